//! Response of the hysteretic oscillator to one ground motion, and a check of
//! the integrator against a ten times finer step.

use mnarx::boucwen::{simulate_boucwen, simulate_ground_motion, BoucWenParams, GroundMotionParams, IntegratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = BoucWenParams::default();
    let config = IntegratorConfig::default();
    let motion = simulate_ground_motion(&GroundMotionParams::default(), 11, &config)?;
    let (y, z) = simulate_boucwen(&params, &motion.acceleration, &config)?;

    let peak = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    println!("peak displacement {:.4} m", peak(&y));
    println!("peak hysteretic displacement {:.4} m (bound {:.4})", peak(&z), params.ultimate_displacement());
    println!("residual drift {:+.4} m", y[y.len() - 1]);

    // Same excitation on a finer grid, linearly interpolated.
    let fine = IntegratorConfig { dt: config.dt / 10.0, ..config };
    let a = &motion.acceleration;
    let dense: Vec<f64> = (0..fine.n_steps())
        .map(|i| {
            let (k, f) = (i / 10, (i % 10) as f64 / 10.0);
            if k + 1 < a.len() { a[k] + f * (a[k + 1] - a[k]) } else { a[k] }
        })
        .collect();
    let (y_fine, _) = simulate_boucwen(&params, &dense, &fine)?;
    let diff = y.iter().enumerate().map(|(i, v)| (v - y_fine[10 * i]).abs()).fold(0.0f64, f64::max);
    println!("largest difference to the fine-step solution {diff:.2e} m");
    Ok(())
}
