//! Registered transforms derive auxiliary channels from measured ones. They
//! are recomputed at prediction time, so construction may select them freely.

use indexmap::IndexMap;
use mnarx::signals::{Dataset, QuantityRole, Realization};
use mnarx::transforms::{HarmonicKind, TransformSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dt = 0.05;
    let speed: Vec<f64> = (0..200).map(|i| 1.0 + 0.2 * (0.1 * i as f64).sin()).collect();
    let r = Realization {
        id: 0,
        channels: IndexMap::from([("speed".to_string(), speed)]),
        n_steps: 200,
        dt,
    };
    let roles = IndexMap::from([("speed".to_string(), QuantityRole::Exogenous)]);
    let data = Dataset::new(vec![r], roles, Default::default(), 0, dt)?
        .with_transform("angle", TransformSpec::CumulativeIntegral { source: "speed".into() })?
        .with_transform(
            "cos2",
            TransformSpec::Harmonic {
                source: "angle".into(),
                order: 2,
                function: HarmonicKind::Cos,
            },
        )?
        .with_transform("smooth", TransformSpec::MovingAverage { source: "speed".into(), window: 10 })?;

    println!("evaluation order: {:?}", data.transform_order()?);
    let r = &data.realizations()[0];
    for step in [0, 50, 100, 199] {
        println!(
            "t={:5.2}  angle {:7.3}  cos(2 angle) {:+.3}  smoothed speed {:.3}",
            step as f64 * dt,
            r.channel("angle")?[step],
            r.channel("cos2")?[step],
            r.channel("smooth")?[step]
        );
    }
    Ok(())
}
