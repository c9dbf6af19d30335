//! Fitting one autoregressive model with exogenous input, forecasting it in
//! closed loop and saving it.
//!
//! The system is y(t) = 0.6 y(t-1) - 0.1 y(t-2) + u(t) + 0.2 u(t)^2.

use indexmap::IndexMap;
use mnarx::features::{Alignment, ComponentBudget, WindowSpec};
use mnarx::fnarx::{fit_with_windows, trace_error, FitConfig, FnarxModel};
use mnarx::signals::{Dataset, QuantityRole, Realization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn realization(id: usize, rng: &mut ChaCha8Rng) -> Realization {
    let n = 300;
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; n];
    for t in 0..n {
        let past = |k: usize| if t >= k { y[t - k] } else { 0.0 };
        y[t] = 0.6 * past(1) - 0.1 * past(2) + u[t] + 0.2 * u[t] * u[t];
    }
    Realization {
        id,
        channels: IndexMap::from([("u".to_string(), u), ("y".to_string(), y)]),
        n_steps: n,
        dt: 1.0,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let roles = IndexMap::from([("u".to_string(), QuantityRole::Exogenous), ("y".to_string(), QuantityRole::Target)]);
    let train = Dataset::new((0..20).map(|i| realization(i, &mut rng)).collect(), roles.clone(), Default::default(), 0, 1.0)?;

    let specs = [
        WindowSpec::new("y", 2, Alignment::PastOnly),
        WindowSpec::new("u", 1, Alignment::IncludeCurrent),
    ];
    let config = FitConfig {
        degree: 2,
        q_norm: 1.0,
        ..FitConfig::default()
    };
    let model = fit_with_windows(&train, "y", &specs, &ComponentBudget::all(), &config)?;
    println!("{} terms, checkpoints scored: {}", model.coefficients.len(), model.diagnostics.checkpoints.len());

    let fresh = realization(99, &mut rng);
    let truth = fresh.channel("y")?;
    let forecast = model.forecast(&fresh, &truth[..model.t0_steps])?;
    println!("closed-loop error on a new trace: {:.3e}", trace_error(truth, &forecast)?);

    let path = std::env::temp_dir().join("fit_single_model.json");
    model.save(&path)?;
    let reloaded = FnarxModel::load(&path)?;
    let again = reloaded.forecast(&fresh, &truth[..model.t0_steps])?;
    println!("reloaded model reproduces the forecast: {}", again == forecast);
    Ok(())
}
