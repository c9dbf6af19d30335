//! Command-line front end. Every command resolves a [`RunConfig`] from the
//! profile defaults, an optional TOML file and the flags, in that order, and
//! writes the resolved configuration next to its outputs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure (including test traces whose prediction aborted).

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

pub use config::{EvaluateConfig, GenerateConfig, GridPoint, Profile, RunConfig, SweepGrid};

use crate::boucwen::generate_benchmark;
use crate::error::{Error, Result};
use crate::fnarx::{mean_error, trace_error};
use crate::mnarx::{construct, ModelSequence, Stage};
use crate::report::{evaluate_sequence, export_report};
use crate::signals::{load_dataset, save_dataset, split_dataset, Dataset};
use crate::synthetic::moving_average_chain;

pub const SEQUENCE_FILE: &str = "sequence.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Parser)]
#[command(name = "mnarx", version, about = "Build and evaluate NARX model sequences")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Profile supplying defaults when no configuration file is given.
    #[arg(long, global = true, value_enum)]
    pub profile: Option<Profile>,
    /// Worker threads.
    #[arg(long, global = true, env = "MNARX_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark dataset.
    Generate(GenerateArgs),
    /// Build a model sequence from a training dataset.
    Construct(ConstructArgs),
    /// Predict every trace of a dataset with a saved sequence.
    Predict(PredictArgs),
    /// Score a saved sequence on a test dataset.
    Evaluate(EvaluateArgs),
    /// Construct over a grid of hyperparameters and rank by training error.
    Sweep(SweepArgs),
    /// Summarize a saved sequence.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also split into `train/` and `test/` with this many training traces.
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long)]
    pub q_norm: Option<f64>,
    /// Window memory of one quantity, `name=steps`; repeatable.
    #[arg(long = "memory", value_parser = parse_memory)]
    pub memories: Vec<(String, usize)>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub max_runtime: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub sequence: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Start from the true initial values present in the data.
    #[arg(long)]
    pub seed_from_truth: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub sequence: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed_from_truth: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub degrees: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    pub q_norms: Vec<f64>,
    /// One memory setting per flag, `y=40,z=120`; repeatable.
    #[arg(long = "memories", value_parser = parse_memory_set)]
    pub memory_sets: Vec<BTreeMap<String, usize>>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub sequence: PathBuf,
}

fn parse_memory(s: &str) -> std::result::Result<(String, usize), String> {
    let (name, steps) = s.split_once('=').ok_or_else(|| format!("expected name=steps, got `{s}`"))?;
    let steps: usize = steps.trim().parse().map_err(|_| format!("invalid step count in `{s}`"))?;
    if name.trim().is_empty() || steps == 0 {
        return Err(format!("invalid memory `{s}`"));
    }
    Ok((name.trim().to_string(), steps))
}

fn parse_memory_set(s: &str) -> std::result::Result<BTreeMap<String, usize>, String> {
    s.split(',').map(parse_memory).collect()
}

/// Process exit code for an error.
pub fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::NonFinite { .. } | Error::Infeasible(_) => 4,
        Error::Io { .. } | Error::Format { .. } | Error::Dataset(_) | Error::Channel { .. } | Error::MissingChannel(_) | Error::Dimension { .. } => 3,
    }
}

impl Cli {
    /// Profile defaults, then the configuration file, then global flags.
    pub fn base_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::for_profile(self.profile.unwrap_or_default()),
        };
        if let (Some(p), Some(_)) = (self.profile, &self.config) {
            if p != c.profile {
                return Err(Error::Config(format!("--profile {p:?} conflicts with the configuration file")));
            }
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        Ok(c)
    }
}

impl ModelArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(t) = &self.target {
            c.target = t.clone();
        }
        if let Some(r) = self.rho {
            c.construct.ranking.rho_threshold = r;
        }
        if let Some(t) = self.max_runtime {
            c.construct.ranking.max_runtime = Some(t);
        }
        for fit in std::iter::once(&mut c.construct.default_fit).chain(c.construct.fits.values_mut()) {
            if let Some(d) = self.degree {
                fit.degree = d;
            }
            if let Some(q) = self.q_norm {
                fit.q_norm = q;
            }
        }
        c.construct.memories.extend(self.memories.iter().cloned());
    }
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> Result<u8> {
    let mut config = cli.base_config()?;
    match &cli.command {
        Command::Generate(a) => {
            config.generate.n = a.n.unwrap_or(config.generate.n);
            config.generate.seed = a.seed.unwrap_or(config.generate.seed);
            config.generate.n_train = a.n_train.or(config.generate.n_train);
            set_path(&mut config.out, &a.out);
        }
        Command::Construct(a) => {
            set_path(&mut config.train, &a.train);
            set_path(&mut config.out, &a.out);
            a.model.apply(&mut config);
        }
        Command::Evaluate(a) => {
            set_path(&mut config.test, &a.test);
            set_path(&mut config.out, &a.out);
            config.evaluate.seed_from_truth |= a.seed_from_truth;
        }
        Command::Predict(a) => {
            set_path(&mut config.out, &a.out);
            config.evaluate.seed_from_truth |= a.seed_from_truth;
        }
        Command::Sweep(a) => {
            set_path(&mut config.train, &a.train);
            set_path(&mut config.out, &a.out);
            a.model.apply(&mut config);
            if !a.degrees.is_empty() {
                config.sweep.degrees = a.degrees.clone();
            }
            if !a.q_norms.is_empty() {
                config.sweep.q_norms = a.q_norms.clone();
            }
            if !a.memory_sets.is_empty() {
                config.sweep.memories = a.memory_sets.clone();
            }
        }
        Command::Inspect(_) => {}
    }
    config.validate()?;
    if let Some(n) = config.workers {
        // Fails only if a pool already exists, which then stays in use.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Generate(_) => cmd_generate(&config).map(|_| 0),
        Command::Construct(_) => cmd_construct(&config).map(|_| 0),
        Command::Predict(a) => cmd_predict(&config, &a.sequence, &a.data).map(|_| 0),
        Command::Evaluate(a) => cmd_evaluate(&config, &a.sequence),
        Command::Sweep(_) => cmd_sweep(&config).map(|_| 0),
        Command::Inspect(a) => {
            print!("{}", inspect(&ModelSequence::load(&a.sequence)?));
            Ok(0)
        }
    }
}

fn set_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::Config(format!("no {what} given (flag or configuration file)")))
}

fn load_prepared(config: &RunConfig, path: &Path) -> Result<Dataset> {
    config.prepare(load_dataset(path)?)
}

/// Generates the profile's dataset into the output directory, or into
/// `train/` and `test/` below it when a split is configured.
pub fn cmd_generate(config: &RunConfig) -> Result<PathBuf> {
    let out = required(&config.out, "output directory")?;
    let g = &config.generate;
    let data = match config.profile {
        Profile::Boucwen => generate_benchmark(g.n, g.seed, &g.ground_motion, &g.oscillator, &g.integrator)?,
        Profile::Chain => moving_average_chain(g.n, g.n_steps, g.seed)?,
    };
    match g.n_train {
        Some(k) => {
            let (train, test) = split_dataset(&data, k, g.seed)?;
            save_dataset(&train, out.join("train"))?;
            save_dataset(&test, out.join("test"))?;
        }
        None => save_dataset(&data, out)?,
    }
    config.write_snapshot(out)?;
    println!("wrote {} realizations of {} steps to {}", data.len(), data.n_steps(), out.display());
    Ok(out.to_path_buf())
}

/// Builds a sequence and writes it with its selection trace.
pub fn cmd_construct(config: &RunConfig) -> Result<ModelSequence> {
    let train = load_prepared(config, required(&config.train, "training dataset")?)?;
    let out = required(&config.out, "output directory")?;
    let built = construct(&train, &config.target, &config.construct)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    built.sequence.save(out.join(SEQUENCE_FILE))?;
    built.trace.write_csv(out.join(TRACE_FILE))?;
    config.write_snapshot(out)?;
    if built.sequence.final_model.input_columns.is_empty() {
        log::warn!("no feature was selected; the final model is a constant");
    }
    let errors = training_errors(&train, &config.target, &built.prediction)?;
    println!("training mean error {:.4e}", mean_error(&errors)?);
    print!("{}", inspect(&built.sequence));
    Ok(built.sequence)
}

fn training_errors(train: &Dataset, target: &str, prediction: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut errors = Vec::with_capacity(prediction.len());
    for (r, p) in train.realizations().iter().zip(prediction) {
        let e = trace_error(r.channel(target)?, p)?;
        if e.is_finite() {
            errors.push(e);
        }
    }
    Ok(errors)
}

/// Writes `pred_<id>.csv` with a time column and one column per produced
/// channel for every realization.
pub fn cmd_predict(config: &RunConfig, sequence: &Path, data: &Path) -> Result<()> {
    let seq = ModelSequence::load(sequence)?;
    let mut data = load_dataset(data)?;
    for (name, role) in &config.roles {
        data = data.with_role(name, *role)?;
    }
    let out = required(&config.out, "output directory")?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let outcomes: Vec<_> = data
        .realizations()
        .par_iter()
        .map(|r| if config.evaluate.seed_from_truth { seq.predict_seeded(r, Some(r)) } else { seq.predict(r) })
        .collect();
    for (r, outcome) in data.realizations().iter().zip(outcomes) {
        let pred = outcome?;
        let path = out.join(format!("pred_{}.csv", r.id));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::format(&path, e.to_string()))?;
        let csv_err = |e: csv::Error| Error::format(&path, e.to_string());
        w.write_record(std::iter::once("time").chain(pred.keys().map(String::as_str))).map_err(csv_err)?;
        for step in 0..r.n_steps {
            let row = std::iter::once(step as f64 * r.dt).chain(pred.values().map(|v| v[step]));
            w.write_record(row.map(|v| v.to_string())).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    config.write_snapshot(out)?;
    println!("wrote {} predictions to {}", data.len(), out.display());
    Ok(())
}

/// Exports the evaluation report; exit code 4 when any trace aborted.
pub fn cmd_evaluate(config: &RunConfig, sequence: &Path) -> Result<u8> {
    let seq = ModelSequence::load(sequence)?;
    let mut test = load_dataset(required(&config.test, "test dataset")?)?;
    for (name, role) in &config.roles {
        test = test.with_role(name, *role)?;
    }
    let out = required(&config.out, "output directory")?;
    let report = evaluate_sequence(&seq, &test, config.evaluate.seed_from_truth)?;
    export_report(&report, out)?;
    config.write_snapshot(out)?;
    for (name, channel) in &report.channels {
        let mut e = channel.errors();
        e.sort_by(f64::total_cmp);
        if e.is_empty() {
            println!("{name}: no finite errors, {} failures", channel.failures());
            continue;
        }
        let pick = |p: f64| e[((e.len() - 1) as f64 * p).round() as usize];
        println!(
            "{name}: {} traces, median error {:.4e}, p95 {:.4e}, max {:.4e}, failures {}",
            e.len(),
            pick(0.5),
            pick(0.95),
            e[e.len() - 1],
            channel.failures()
        );
    }
    for (id, reason) in &report.aborted {
        eprintln!("trace {id} aborted: {reason}");
    }
    Ok(if report.aborted.is_empty() { 0 } else { 4 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub degree: u32,
    pub q_norm: f64,
    pub memories: BTreeMap<String, usize>,
    pub mean_error: Option<f64>,
    pub n_models: Option<usize>,
    pub failure: Option<String>,
}

/// Constructs at every grid point and ranks the points by mean training
/// error; failed points are kept at the end of the ranking.
pub fn cmd_sweep(config: &RunConfig) -> Result<Vec<SweepRow>> {
    let train = load_prepared(config, required(&config.train, "training dataset")?)?;
    let out = required(&config.out, "output directory")?;
    let points = config.sweep.points();
    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .map(|p| {
            let c = SweepGrid::apply(p, &config.construct);
            let mut row = SweepRow {
                degree: c.default_fit.degree,
                q_norm: c.default_fit.q_norm,
                memories: c.memories.clone(),
                mean_error: None,
                n_models: None,
                failure: None,
            };
            let outcome = construct(&train, &config.target, &c)
                .and_then(|b| Ok((b.sequence.n_models(), mean_error(&training_errors(&train, &config.target, &b.prediction)?)?)));
            match outcome {
                Ok((n, e)) => {
                    row.n_models = Some(n);
                    row.mean_error = Some(e);
                }
                Err(e) => row.failure = Some(e.to_string()),
            }
            row
        })
        .collect();
    rows.sort_by(|a, b| match (a.mean_error, b.mean_error) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(SWEEP_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::format(&path, e.to_string()))?;
    let csv_err = |e: csv::Error| Error::format(&path, e.to_string());
    w.write_record(["rank", "degree", "q_norm", "memories", "mean_error", "n_models", "failure"]).map_err(csv_err)?;
    for (i, r) in rows.iter().enumerate() {
        let memories: Vec<String> = r.memories.iter().map(|(k, v)| format!("{k}={v}")).collect();
        w.write_record([
            (i + 1).to_string(),
            r.degree.to_string(),
            r.q_norm.to_string(),
            memories.join(";"),
            r.mean_error.map_or(String::new(), |e| e.to_string()),
            r.n_models.map_or(String::new(), |n| n.to_string()),
            r.failure.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    config.write_snapshot(out)?;
    for (i, r) in rows.iter().enumerate() {
        println!(
            "{:>3}  d={} q={} {:?}  {}",
            i + 1,
            r.degree,
            r.q_norm,
            r.memories,
            r.mean_error.map_or_else(|| format!("failed: {}", r.failure.as_deref().unwrap_or("")), |e| format!("{e:.4e}"))
        );
    }
    Ok(rows)
}

/// Stages, selected features and term counts of a sequence.
pub fn inspect(seq: &ModelSequence) -> String {
    let mut s = format!(
        "target {}  dt {}  exogenous [{}]  models {}\n",
        seq.target,
        seq.dt,
        seq.exogenous.join(", "),
        seq.n_models()
    );
    let describe = |model: &crate::fnarx::FnarxModel| {
        let features: Vec<String> = model.input_columns.iter().map(|c| c.label()).collect();
        format!(
            "features [{}]  terms {}  start {} steps",
            features.join(", "),
            model.coefficients.len(),
            model.t0_steps
        )
    };
    for (i, stage) in seq.stages.iter().enumerate() {
        match stage {
            Stage::Transform { output, transform } => s += &format!("  {i}. transform {output} <- {transform:?}\n"),
            Stage::Model { output, model } => s += &format!("  {i}. model {output}: {}\n", describe(model)),
        }
    }
    s += &format!("  {}. model {}: {}\n", seq.stages.len(), seq.target, describe(&seq.final_model));
    s
}
