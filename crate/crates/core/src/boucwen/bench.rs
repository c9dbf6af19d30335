use indexmap::IndexMap;
use rayon::prelude::*;
use std::collections::BTreeMap;

use super::ground_motion::{simulate_ground_motion, GroundMotionParams};
use super::oscillator::{simulate_boucwen, BoucWenParams, IntegratorConfig};
use crate::error::{Error, Result};
use crate::fnarx::FitConfig;
use crate::mnarx::ConstructConfig;
use crate::signals::{Dataset, QuantityRole, Realization};

/// Channel names of generated datasets.
pub const ACCELERATION: &str = "xdd";
pub const VELOCITY: &str = "xd";
pub const DISPLACEMENT: &str = "x";
pub const HYSTERETIC: &str = "z";
pub const RESPONSE: &str = "y";

/// Construction settings tuned for this benchmark: degree 3, q-norm 0.8,
/// memories of 40 steps for the response and 120 for the hysteretic
/// displacement, forecast scoring on up to 100 training traces.
pub fn benchmark_construct_config() -> ConstructConfig {
    ConstructConfig {
        default_fit: FitConfig {
            degree: 3,
            q_norm: 0.8,
            forecast_eval_traces: 100,
            ..FitConfig::default()
        },
        memories: [(RESPONSE.to_string(), 40), (HYSTERETIC.to_string(), 120)].into(),
        default_memory: 40,
        ..ConstructConfig::default()
    }
}

/// Noise seed of realization `index`.
pub fn realization_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// `n_realizations` ground motions and oscillator responses. Ground-motion
/// parameters are shared; only the noise differs between realizations.
pub fn generate_benchmark(
    n_realizations: usize,
    base_seed: u64,
    gm: &GroundMotionParams,
    bw: &BoucWenParams,
    config: &IntegratorConfig,
) -> Result<Dataset> {
    if n_realizations == 0 {
        return Err(Error::InvalidArgument("at least one realization is required".into()));
    }
    gm.validate()?;
    bw.validate()?;
    config.validate()?;
    let roles: IndexMap<String, QuantityRole> = [
        (ACCELERATION, QuantityRole::Exogenous),
        (VELOCITY, QuantityRole::Exogenous),
        (DISPLACEMENT, QuantityRole::Exogenous),
        (HYSTERETIC, QuantityRole::IntermediateResponse),
        (RESPONSE, QuantityRole::Target),
    ]
    .into_iter()
    .map(|(k, r)| (k.to_string(), r))
    .collect();
    let realizations: Vec<Realization> = (0..n_realizations)
        .into_par_iter()
        .map(|id| {
            let ground = simulate_ground_motion(gm, realization_seed(base_seed, id), config)?;
            let (y, z) = simulate_boucwen(bw, &ground.acceleration, config).map_err(|e| match e {
                Error::NonFinite { channel, step } => Error::Channel {
                    realization: id,
                    channel,
                    message: format!("integration diverged at step {step}"),
                },
                other => other,
            })?;
            let channels: IndexMap<String, Vec<f64>> = [
                (ACCELERATION, ground.acceleration),
                (VELOCITY, ground.velocity),
                (DISPLACEMENT, ground.displacement),
                (HYSTERETIC, z),
                (RESPONSE, y),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            Ok(Realization {
                id,
                channels,
                n_steps: config.n_steps(),
                dt: config.dt,
            })
        })
        .collect::<Result<_>>()?;
    let meta: BTreeMap<String, serde_json::Value> = [
        ("generator", serde_json::json!("boucwen")),
        ("base_seed", serde_json::json!(base_seed)),
        ("ground_motion", serde_json::to_value(gm).map_err(|e| Error::InvalidArgument(e.to_string()))?),
        ("oscillator", serde_json::to_value(bw).map_err(|e| Error::InvalidArgument(e.to_string()))?),
        ("integrator", serde_json::to_value(config).map_err(|e| Error::InvalidArgument(e.to_string()))?),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    Ok(Dataset::new(realizations, roles, BTreeMap::new(), config.n_steps(), config.dt)?.with_meta(meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_repeatability() {
        let cfg = IntegratorConfig { dt: 0.01, duration: 3.0 };
        let gm = GroundMotionParams::default();
        let bw = BoucWenParams::default();
        let one = generate_benchmark(1, 4, &gm, &bw, &cfg).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.n_steps(), 301);
        assert_eq!(one.channel_names().collect::<Vec<_>>(), ["xdd", "xd", "x", "z", "y"]);
        let a = generate_benchmark(2, 9, &gm, &bw, &cfg).unwrap();
        let b = generate_benchmark(2, 9, &gm, &bw, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.meta["base_seed"], serde_json::json!(9));
        assert!(generate_benchmark(0, 9, &gm, &bw, &cfg).is_err());
    }
}
