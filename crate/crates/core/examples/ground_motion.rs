//! Stochastic ground motions: intensity and duration statistics of a small
//! ensemble against the targets they were calibrated to.
//!
//! cargo run --release --example ground_motion -- [n]

use mnarx::boucwen::{arias_intensity, significant_duration, simulate_ground_motion, GroundMotionParams, IntegratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: u64 = std::env::args().nth(1).map_or(Ok(50), |s| s.parse())?;
    let params = GroundMotionParams::default();
    let config = IntegratorConfig::default();

    let mut intensity = 0.0;
    let mut durations = Vec::new();
    let mut peak = 0.0f64;
    for seed in 0..n {
        let g = simulate_ground_motion(&params, seed, &config)?;
        intensity += arias_intensity(&g.acceleration, config.dt);
        durations.extend(significant_duration(&g.acceleration, config.dt));
        peak = peak.max(g.acceleration.iter().fold(0.0f64, |m, a| m.max(a.abs())));
    }
    durations.sort_by(f64::total_cmp);
    println!("{n} motions of {} s at {} Hz", config.duration, 1.0 / config.dt);
    println!("mean Arias intensity {:.4} g*s (target {})", intensity / n as f64, params.arias_intensity);
    println!("median 5-95% duration {:.2} s (target {})", durations[durations.len() / 2], params.duration_5_95);
    println!("largest peak acceleration {:.2} m/s^2", peak);
    Ok(())
}
