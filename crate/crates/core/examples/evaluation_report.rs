//! Scoring a model sequence on held-out traces and exporting the plot-ready
//! CSV files: per-trace metrics, error histograms, best and worst traces.
//!
//! cargo run --release --example evaluation_report -- [out_dir]

use mnarx::mnarx::{construct, ConstructConfig};
use mnarx::report::{evaluate_sequence, export_report, read_metrics};
use mnarx::synthetic::moving_average_chain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("evaluation_report"), Into::into);
    let train = moving_average_chain(20, 200, 1)?;
    let test = moving_average_chain(30, 200, 2)?;
    let config = ConstructConfig {
        memories: [("y".to_string(), 2), ("z".to_string(), 3)].into(),
        ..ConstructConfig::default()
    };
    let built = construct(&train, "y", &config)?;

    // Starting from zeros instead of the true initial values leaves a small
    // transient in every trace.
    let report = evaluate_sequence(&built.sequence, &test, false)?;
    export_report(&report, &out)?;
    for (name, channel) in &report.channels {
        println!(
            "{name}: best trace {:?}, worst trace {:?}, {} histogram bins",
            channel.best,
            channel.worst,
            channel.histogram.counts.len()
        );
    }
    let rows = read_metrics(out.join("metrics.csv"))?;
    println!("{} metric rows written to {}", rows.len(), out.display());
    Ok(())
}
