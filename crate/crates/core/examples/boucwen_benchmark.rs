//! Desk-scale hysteretic oscillator study: generate ground motions and
//! responses, build a model sequence on 100 traces and score it on the rest.
//!
//! cargo run --release --example boucwen_benchmark -- [n_total] [seed] [out_dir]

use std::time::Instant;

use mnarx::boucwen::{benchmark_construct_config, generate_benchmark, BoucWenParams, GroundMotionParams, IntegratorConfig};
use mnarx::mnarx::construct;
use mnarx::report::{evaluate_sequence, export_report};
use mnarx::signals::split_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let n_total: usize = args.get(1).map_or(Ok(600), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(7), |s| s.parse())?;
    let out = args.get(3);

    let start = Instant::now();
    let data = generate_benchmark(
        n_total,
        seed,
        &GroundMotionParams::default(),
        &BoucWenParams::default(),
        &IntegratorConfig::default(),
    )?;
    let (train, test) = split_dataset(&data, 100, seed)?;
    println!("generated {} traces in {:.1?}", data.len(), start.elapsed());

    let start = Instant::now();
    let built = construct(&train, "y", &benchmark_construct_config())?;
    println!("construction took {:.1?}", start.elapsed());
    for r in &built.trace.records {
        println!(
            "  depth {} {} <- {:<7} rho {:+.3}  error {}  {:?}",
            r.depth,
            r.target,
            r.label(),
            r.rho,
            r.mean_error.map_or("-".into(), |e| format!("{e:.4}")),
            r.action
        );
    }

    let report = evaluate_sequence(&built.sequence, &test, false)?;
    println!("{} of {} test traces aborted", report.aborted.len(), test.len());
    for (name, channel) in &report.channels {
        let mut e = channel.errors();
        if e.is_empty() {
            continue;
        }
        e.sort_by(f64::total_cmp);
        let pct = |p: f64| e[((e.len() - 1) as f64 * p).round() as usize];
        println!(
            "{name}: min {:.4}  median {:.4}  p95 {:.4}  max {:.4}",
            pct(0.0),
            pct(0.5),
            pct(0.95),
            pct(1.0)
        );
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        built.sequence.save(format!("{dir}/sequence.json"))?;
        built.trace.write_csv(format!("{dir}/trace.csv"))?;
        export_report(&report, format!("{dir}/report"))?;
        println!("wrote {dir}");
    }
    Ok(())
}
