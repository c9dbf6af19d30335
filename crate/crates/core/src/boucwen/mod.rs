//! Benchmark generator: stochastic ground motions driving a hysteretic
//! oscillator.

pub mod bench;
pub mod ground_motion;
pub mod oscillator;

pub use bench::{benchmark_construct_config, generate_benchmark, realization_seed};
pub use ground_motion::{
    arias_crossings, arias_intensity, significant_duration, simulate_ground_motion, Envelope, GroundMotion, GroundMotionParams,
};
pub use oscillator::{integrate, simulate_boucwen, BoucWenParams, IntegratorConfig, Response};
