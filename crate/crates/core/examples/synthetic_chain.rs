//! Automatic construction on a two-stage system: a moving average z of the
//! input feeds an autoregressive target y. The target's best feature comes
//! from z, which has no model yet, so construction recurses into z first.

use mnarx::mnarx::{construct, ConstructConfig};
use mnarx::report::evaluate_sequence;
use mnarx::synthetic::moving_average_chain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = moving_average_chain(20, 200, 70)?;
    let test = moving_average_chain(20, 200, 7000)?;

    let config = ConstructConfig {
        memories: [("y".to_string(), 2), ("z".to_string(), 3)].into(),
        ..ConstructConfig::default()
    };
    let built = construct(&train, "y", &config)?;
    for r in &built.trace.records {
        let indent = "  ".repeat(r.depth + 1);
        println!("{indent}{} <- {} rho {:+.3} {:?}", r.target, r.label(), r.rho, r.action);
    }
    println!("stages: {:?}", built.sequence.produced());

    let report = evaluate_sequence(&built.sequence, &test, true)?;
    for (name, channel) in &report.channels {
        let worst = channel.errors().into_iter().fold(0.0f64, f64::max);
        println!("{name}: worst test error {worst:.2e}");
    }
    Ok(())
}
