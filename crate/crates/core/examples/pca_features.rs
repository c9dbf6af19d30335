//! Compressing lagged windows of a signal into a few principal components.

use mnarx::features::{build_lagged_windows, fit_pca, transform, Alignment, WindowSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dt = 0.01;
    let signal: Vec<f64> = (0..3000)
        .map(|i| {
            let t = i as f64 * dt;
            (2.0 * t).sin() + 0.3 * (11.0 * t).cos() * (-0.1 * t).exp()
        })
        .collect();

    let spec = WindowSpec::new("u", 40, Alignment::IncludeCurrent);
    let windows = build_lagged_windows(&signal, &spec)?;
    println!("{} windows of {} lags", windows.nrows(), windows.ncols());

    let pca = fit_pca(&spec, &windows, 6)?;
    let total: f64 = pca.components.iter().map(|c| c.eigenvalue).sum();
    let mut cumulative = 0.0;
    for c in &pca.components {
        cumulative += c.eigenvalue;
        println!("component {}: variance {:.3e}, cumulative share {:.5}", c.index + 1, c.eigenvalue, cumulative / total);
    }

    // The first window's scores; four components already carry the signal.
    let scores = transform(&pca, &windows)?;
    let first: Vec<String> = scores.row(0).iter().map(|v| format!("{v:+.4}")).collect();
    println!("scores of the first window: [{}]", first.join(", "));
    Ok(())
}
