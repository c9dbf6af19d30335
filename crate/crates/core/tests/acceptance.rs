//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line and
//! then asserts, so a failing criterion is both reported and fatal.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mnarx::boucwen::{
    arias_intensity, benchmark_construct_config, generate_benchmark, integrate, significant_duration, simulate_ground_motion,
    BoucWenParams, GroundMotionParams, IntegratorConfig,
};
use mnarx::features::{dct2_modes, fit_pca, transform, Alignment, ComponentBudget, WindowSpec};
use mnarx::fnarx::{fit_with_windows, FitConfig};
use mnarx::mnarx::{construct, kendall_tau, ConstructConfig, Construction, Stage};
use mnarx::poly::{generate_hyperbolic_set, MultiIndex};
use mnarx::report::{evaluate_sequence, export_report, EvaluationReport};
use mnarx::signals::{save_dataset, split_dataset, Dataset, QuantityRole, Realization};
use mnarx::synthetic::moving_average_chain;

const BENCH_SEED: u64 = 7;
const BENCH_TOTAL: usize = 600;
const BENCH_TRAIN: usize = 100;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    // Written to the raw handle so the line shows up without --nocapture.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {id:>2} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = out.flush();
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

// 1

fn brute_force_set(n: usize, d: u32, q: f64) -> BTreeSet<Vec<u32>> {
    let mut out = BTreeSet::new();
    let total = (d as usize + 1).pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let alpha: Vec<u32> = (0..n)
            .map(|_| {
                let v = (c % (d as usize + 1)) as u32;
                c /= d as usize + 1;
                v
            })
            .collect();
        let norm = alpha.iter().map(|&a| (a as f64).powf(q)).sum::<f64>().powf(1.0 / q);
        if norm <= d as f64 * (1.0 + 1e-9) {
            out.insert(alpha);
        }
    }
    out
}

#[test]
fn c01_truncation_set_matches_enumeration() {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for n in 1..=4 {
        for d in 0..=5u32 {
            for q in [0.5, 0.75, 0.8, 1.0] {
                let got: BTreeSet<Vec<u32>> = generate_hyperbolic_set(n, d, q).unwrap().indices.iter().map(|a| a.0.clone()).collect();
                if got != brute_force_set(n, d, q) {
                    mismatches.push((n, d, q));
                }
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "truncation set equals enumeration",
        mismatches.is_empty() && within(elapsed, Duration::from_secs(1)),
        format!("{checked} sets, mismatches {mismatches:?}, {elapsed:.2?} (limit 1 s)"),
    );
}

// 2

#[test]
fn c02_pca_orthonormal_and_uncorrelated() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_orth, mut worst_corr) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let width = rng.random_range(2..=16);
        let rows = rng.random_range(width + 5..400);
        let mixing = DMatrix::from_fn(width, width, |_, _| rng.random_range(-1.0..1.0));
        let raw = DMatrix::from_fn(rows, width, |_, _| rng.random_range(-1.0..1.0));
        let windows = raw * mixing;
        let spec = WindowSpec::new("w", width, Alignment::IncludeCurrent);
        let pca = fit_pca(&spec, &windows, width).unwrap();
        let p = pca.projection();
        let gram = p.transpose() * &p;
        let id = DMatrix::<f64>::identity(gram.nrows(), gram.ncols());
        worst_orth = worst_orth.max((gram - id).abs().max());
        let scores = transform(&pca, &windows).unwrap();
        for a in 0..scores.ncols() {
            for b in 0..a {
                let (x, y) = (scores.column(a), scores.column(b));
                let (mx, my) = (x.mean(), y.mean());
                let sxy: f64 = x.iter().zip(y.iter()).map(|(u, v)| (u - mx) * (v - my)).sum();
                let sxx: f64 = x.iter().map(|u| (u - mx).powi(2)).sum();
                let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
                worst_corr = worst_corr.max((sxy / (sxx * syy).sqrt()).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        "PCA orthonormality and decorrelation",
        worst_orth < 1e-10 && worst_corr < 1e-8 && within(elapsed, Duration::from_secs(10)),
        format!("max |PᵀP - I| {worst_orth:.2e} (tol 1e-10), max |corr| {worst_corr:.2e} (tol 1e-8), {elapsed:.2?}"),
    );
}

// 3

fn tau_b_pairs(a: &[f64], b: &[f64]) -> f64 {
    let (mut s, mut ta, mut tb, mut pairs) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..a.len() {
        for j in 0..i {
            let (da, db) = ((a[i] - a[j]).signum() * ((a[i] != a[j]) as i32 as f64), (b[i] - b[j]).signum() * ((b[i] != b[j]) as i32 as f64));
            pairs += 1;
            ta += (da == 0.0) as i64;
            tb += (db == 0.0) as i64;
            s += (da * db) as i64;
        }
    }
    s as f64 / ((((pairs - ta) * (pairs - tb)) as f64).sqrt())
}

#[test]
fn c03_kendall_tau_matches_pair_count() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(2..30) as f64;
        let a: Vec<f64> = (0..n).map(|_| (rng.random_range(0.0..levels)).floor()).collect();
        let b: Vec<f64> = (0..n).map(|_| (rng.random_range(0.0..levels)).floor()).collect();
        let fast = kendall_tau(&a, &b).unwrap();
        let constant = a.iter().all(|v| *v == a[0]) || b.iter().all(|v| *v == b[0]);
        let ok = if constant { fast.degenerate && fast.value == 0.0 } else { fast.value == tau_b_pairs(&a, &b) };
        mismatches += (!ok) as usize;
    }
    let elapsed = start.elapsed();
    verdict(
        3,
        "Kendall tau-b equals O(n²) pair count",
        mismatches == 0 && within(elapsed, Duration::from_secs(10)),
        format!("100 vectors with ties, {mismatches} inexact, {elapsed:.2?}"),
    );
}

// 4

#[test]
fn c04_sparse_recovery() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n_real, n_steps, n_inputs) = (10, 200, 5);
    let mut inputs: Vec<Vec<Vec<f64>>> = (0..n_real)
        .map(|_| (0..n_inputs).map(|_| (0..n_steps).map(|_| rng.random_range(-1.0..1.0)).collect()).collect())
        .collect();
    // Pooled zero mean, so PCA scores of single-sample windows equal the inputs.
    for k in 0..n_inputs {
        let mean = inputs.iter().flat_map(|r| r[k].iter()).sum::<f64>() / (n_real * n_steps) as f64;
        inputs.iter_mut().for_each(|r| r[k].iter_mut().for_each(|v| *v -= mean));
    }
    let truth: [(f64, [u32; 5]); 5] = [
        (1.5, [1, 0, 0, 0, 0]),
        (-2.0, [0, 1, 1, 0, 0]),
        (0.7, [0, 0, 0, 2, 0]),
        (0.3, [1, 0, 0, 0, 2]),
        (-1.1, [0, 0, 3, 0, 0]),
    ];
    let names: Vec<String> = (1..=n_inputs).map(|i| format!("x{i}")).collect();
    let mut roles: IndexMap<String, QuantityRole> = names.iter().map(|n| (n.clone(), QuantityRole::Exogenous)).collect();
    roles.insert("y".into(), QuantityRole::Target);
    let realizations = inputs
        .iter()
        .enumerate()
        .map(|(id, x)| {
            let y: Vec<f64> = (0..n_steps)
                .map(|t| {
                    let point: Vec<f64> = x.iter().map(|c| c[t]).collect();
                    truth.iter().map(|(c, a)| c * MultiIndex(a.to_vec()).evaluate(&point)).sum()
                })
                .collect();
            let mut channels: IndexMap<String, Vec<f64>> = names.iter().cloned().zip(x.iter().cloned()).collect();
            channels.insert("y".into(), y);
            Realization {
                id,
                channels,
                n_steps,
                dt: 1.0,
            }
        })
        .collect();
    let data = Dataset::new(realizations, roles, Default::default(), n_steps, 1.0).unwrap();
    let specs: Vec<WindowSpec> = names.iter().map(|n| WindowSpec::new(n.clone(), 1, Alignment::IncludeCurrent)).collect();
    let config = FitConfig {
        degree: 3,
        q_norm: 1.0,
        ..FitConfig::default()
    };
    let model = fit_with_windows(&data, "y", &specs, &ComponentBudget::all(), &config).unwrap();
    let candidates = generate_hyperbolic_set(n_inputs, config.degree, config.q_norm).unwrap().len();
    let active: BTreeSet<Vec<u32>> = model
        .basis
        .indices
        .iter()
        .zip(&model.coefficients)
        .filter(|(_, c)| c.abs() > 1e-8)
        .map(|(a, _)| a.0.clone())
        .collect();
    // Model columns follow the input order, so multi-indices line up.
    let superset = truth.iter().all(|(_, a)| active.contains(&a.to_vec()));
    let mut sq = 0.0;
    let mut count = 0;
    for r in data.realizations() {
        let pred = model.forecast(r, r.channel("y").unwrap()).unwrap();
        for (a, b) in pred.iter().zip(r.channel("y").unwrap()) {
            sq += (a - b).powi(2);
            count += 1;
        }
    }
    let mse = sq / count as f64;
    let elapsed = start.elapsed();
    verdict(
        4,
        "sparse recovery",
        candidates >= 50 && superset && mse < 1e-10 && within(elapsed, Duration::from_secs(30)),
        format!(
            "{candidates} candidate terms, {} active, true support recovered: {superset}, one-step MSE {mse:.2e} (tol 1e-10), {elapsed:.2?}",
            active.len()
        ),
    );
}

// 5

fn smooth_excitation(t: f64) -> f64 {
    (1.0 - (-0.5 * t).exp()) * (3.0 * (2.1 * t).sin() + 2.0 * (5.3 * t + 0.4).sin())
}

fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn c05_integrator_accuracy_and_order() {
    let start = Instant::now();
    let params = BoucWenParams::default();
    let duration = 10.0;
    let fine_dt = 0.0005;
    let reference = integrate(&params, [0.0; 3], smooth_excitation, fine_dt, (duration / fine_dt) as usize + 1).unwrap();
    let error_at = |dt: f64| {
        let n = (duration / dt).round() as usize + 1;
        let coarse = integrate(&params, [0.0; 3], smooth_excitation, dt, n).unwrap();
        let stride = (dt / fine_dt).round() as usize;
        let matched: Vec<f64> = (0..n).map(|i| reference.displacement[i * stride]).collect();
        relative_l2(&coarse.displacement, &matched)
    };
    let errors: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| error_at(dt)).collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let peak_z = reference.hysteretic.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let yielding = peak_z > 0.5 * params.ultimate_displacement();
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    verdict(
        5,
        "oscillator integration",
        yielding && errors[1] < 1e-3 && min_order >= 3.5 && within(elapsed, Duration::from_secs(60)),
        format!(
            "relative L2 at dt=0.01: {:.2e} (tol 1e-3), observed orders {:.2}/{:.2} (min 3.5), hysteresis engaged {yielding}, {elapsed:.2?}",
            errors[1], orders[0], orders[1]
        ),
    );
}

// 6

#[test]
fn c06_ground_motion_ensemble() {
    let start = Instant::now();
    let params = GroundMotionParams::default();
    let config = IntegratorConfig::default();
    let mut intensities = Vec::new();
    let mut durations = Vec::new();
    for seed in 0..200 {
        let g = simulate_ground_motion(&params, 60_000 + seed, &config).unwrap();
        intensities.push(arias_intensity(&g.acceleration, config.dt));
        durations.push(significant_duration(&g.acceleration, config.dt).unwrap());
    }
    let mean_ia = intensities.iter().sum::<f64>() / intensities.len() as f64;
    durations.sort_by(f64::total_cmp);
    let median_d = 0.5 * (durations[99] + durations[100]);
    let (ia_dev, d_dev) = (mean_ia / 0.109 - 1.0, median_d / 7.96 - 1.0);
    let elapsed = start.elapsed();
    verdict(
        6,
        "ground-motion ensemble statistics",
        ia_dev.abs() <= 0.15 && d_dev.abs() <= 0.15 && within(elapsed, Duration::from_secs(120)),
        format!(
            "mean Arias {mean_ia:.4} g·s ({:+.1}% of 0.109), median D5-95 {median_d:.2} s ({:+.1}% of 7.96), tol 15%, {elapsed:.2?}",
            100.0 * ia_dev,
            100.0 * d_dev
        ),
    );
}

// 7

#[test]
fn c07_synthetic_chain() {
    let start = Instant::now();
    let train = moving_average_chain(20, 200, 70).unwrap();
    let test = moving_average_chain(20, 200, 7_000).unwrap();
    let config = ConstructConfig {
        memories: [("y".to_string(), 2), ("z".to_string(), 3)].into(),
        ..ConstructConfig::default()
    };
    let built = construct(&train, "y", &config).unwrap();
    let model_stages: Vec<&str> = built
        .sequence
        .stages
        .iter()
        .filter_map(|s| match s {
            Stage::Model { output, .. } => Some(output.as_str()),
            Stage::Transform { .. } => None,
        })
        .collect();
    let recursions = built.trace.recursions().count();
    let report = evaluate_sequence(&built.sequence, &test, true).unwrap();
    let worst = report.channel("y").unwrap().errors().into_iter().fold(0.0f64, f64::max);
    let elapsed = start.elapsed();
    verdict(
        7,
        "synthetic chain end to end",
        built.sequence.n_models() == 2
            && model_stages == ["z"]
            && recursions == 1
            && report.aborted.is_empty()
            && worst < 1e-4
            && within(elapsed, Duration::from_secs(120)),
        format!(
            "{} model stages (z then y: {}), {recursions} recursion, worst test error {worst:.2e} (tol 1e-4), {elapsed:.2?}",
            built.sequence.n_models(),
            model_stages == ["z"]
        ),
    );
}

// 8-10

struct BenchRun {
    data: Dataset,
    test: Dataset,
    built: Construction,
    report: EvaluationReport,
    elapsed: Duration,
}

fn bench_run() -> BenchRun {
    let start = Instant::now();
    let data = generate_benchmark(
        BENCH_TOTAL,
        BENCH_SEED,
        &GroundMotionParams::default(),
        &BoucWenParams::default(),
        &IntegratorConfig::default(),
    )
    .unwrap();
    let (train, test) = split_dataset(&data, BENCH_TRAIN, BENCH_SEED).unwrap();
    let built = construct(&train, "y", &benchmark_construct_config()).unwrap();
    let report = evaluate_sequence(&built.sequence, &test, false).unwrap();
    BenchRun {
        data,
        test,
        built,
        report,
        elapsed: start.elapsed(),
    }
}

fn shared_bench() -> &'static BenchRun {
    static RUN: OnceLock<BenchRun> = OnceLock::new();
    RUN.get_or_init(bench_run)
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    sorted[i] + f * (sorted[(i + 1).min(sorted.len() - 1)] - sorted[i])
}

#[test]
fn c08_boucwen_reproduction() {
    let run = shared_bench();
    let recursed_into_z = run.built.trace.recursions().any(|r| r.depth == 0 && r.quantity == "z");
    let z_stage = run.built.sequence.stages.iter().any(|s| matches!(s, Stage::Model { output, .. } if output == "z"));
    let uses_z = run.built.sequence.final_model.input_quantities().contains(&"z");

    let y = run.report.channel("y").unwrap();
    let mut ey = y.errors();
    ey.sort_by(f64::total_cmp);
    let z_errors = run.report.channel("z").map(|c| c.errors()).unwrap_or_default();
    let max_z = z_errors.iter().cloned().fold(0.0f64, f64::max);
    let non_finite = y.failures();
    let (median, p95) = if ey.is_empty() { (f64::NAN, f64::NAN) } else { (percentile(&ey, 0.5), percentile(&ey, 0.95)) };
    let a = recursed_into_z && z_stage && uses_z;
    let b = median <= 0.05 && p95 <= 0.2;
    let c = !z_errors.is_empty() && z_errors.len() == run.test.len() && max_z <= 0.6;
    let d = non_finite == 0 && ey.len() == run.test.len();
    let e = within(run.elapsed, Duration::from_secs(30 * 60));
    let rows: Vec<String> = run
        .built
        .trace
        .records
        .iter()
        .map(|r| format!("{}:{}{}", r.target, r.label(), if r.accepted() { "+" } else { "" }))
        .collect();
    verdict(
        8,
        "desk-scale hysteretic oscillator",
        a && b && c && d && e,
        format!(
            "(a) recursion into z {a} [{}]; (b) median ε_y {median:.4} (≤0.05), p95 {p95:.4} (≤0.2); (c) max ε_z {max_z:.4} (≤0.6); \
             (d) traces without a finite forecast {non_finite}; train {} / test {}, {:.1?} (limit 30 min)",
            rows.join(" "),
            BENCH_TRAIN,
            run.test.len(),
            run.elapsed
        ),
    );
}

#[test]
fn c09_forecast_stability() {
    let run = shared_bench();
    let y = run.report.channel("y").unwrap();
    let mut worst_ratio = 0.0f64;
    let mut unstable = 0;
    for (row, r) in y.rows.iter().zip(run.test.realizations()) {
        let truth_peak = r.channel("y").unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        match row.peak_diff {
            Some(diff) => {
                let ratio = (diff + truth_peak) / truth_peak;
                worst_ratio = worst_ratio.max(ratio);
                unstable += (ratio > 10.0) as usize;
            }
            None => unstable += 1,
        }
    }
    verdict(
        9,
        "forecast stability",
        unstable == 0 && y.rows.len() == run.test.len(),
        format!("{} traces, worst max|ŷ|/max|y| {worst_ratio:.3} (limit 10), {unstable} unstable", y.rows.len()),
    );
}

fn same_tree(a: &Path, b: &Path) -> bool {
    let list = |p: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(p).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    let (la, lb) = (list(a), list(b));
    la == lb && la.iter().all(|f| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap())
}

#[test]
fn c10_determinism() {
    let config = IntegratorConfig::default();
    let params = GroundMotionParams::default();
    let motions_equal = (0..20).all(|s| simulate_ground_motion(&params, s, &config).unwrap() == simulate_ground_motion(&params, s, &config).unwrap());

    let first = shared_bench();
    let second = bench_run();
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);
    save_dataset(&first.data, path("data_a")).unwrap();
    save_dataset(&second.data, path("data_b")).unwrap();
    let datasets_equal = same_tree(&path("data_a"), &path("data_b"));
    first.built.sequence.save(path("seq_a.json")).unwrap();
    second.built.sequence.save(path("seq_b.json")).unwrap();
    let sequences_equal = std::fs::read(path("seq_a.json")).unwrap() == std::fs::read(path("seq_b.json")).unwrap();
    export_report(&first.report, path("report_a")).unwrap();
    export_report(&second.report, path("report_b")).unwrap();
    let reports_equal = same_tree(&path("report_a"), &path("report_b"));
    verdict(
        10,
        "determinism",
        motions_equal && datasets_equal && sequences_equal && reports_equal,
        format!(
            "ground motions {motions_equal}, datasets {datasets_equal}, sequence files {sequences_equal}, reports {reports_equal}"
        ),
    );
}

// 11

#[test]
fn c11_dct_reconstruction() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for (rows, cols) in [(4, 4), (19, 19)] {
        for _ in 0..5 {
            let field = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-5.0..5.0));
            let modes: Vec<(usize, usize)> = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect();
            let eta = dct2_modes(&field, &modes).unwrap();
            for p in 0..rows {
                for r in 0..cols {
                    let sum: f64 = modes
                        .iter()
                        .zip(&eta)
                        .map(|(&(i, j), e)| {
                            e * (PI / rows as f64 * (p as f64 + 0.5) * i as f64).cos() * (PI / cols as f64 * (r as f64 + 0.5) * j as f64).cos()
                        })
                        .sum();
                    worst = worst.max((sum - field[(p, r)]).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        11,
        "DCT modes reconstruct the field",
        worst < 1e-10 && within(elapsed, Duration::from_secs(5)),
        format!("max reconstruction error {worst:.2e} (tol 1e-10), {elapsed:.2?}"),
    );
}
