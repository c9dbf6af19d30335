use indexmap::IndexMap;
use mnarx::features::{assemble_feature_matrix, Alignment, ComponentBudget, FeatureMatrix, WindowSpec};
use mnarx::fnarx::{fit_with_windows, FitConfig, FnarxModel};
use mnarx::poly::evaluate_basis;
use mnarx::signals::{Dataset, QuantityRole, Realization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Static nonlinear response to the current and previous input, which the
/// cubic basis can only approximate.
fn static_system(scale: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let realizations = (0..8)
        .map(|id| {
            let u: Vec<f64> = (0..150).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..150)
                .map(|t| scale * ((1.5 * u[t]).tanh() + 0.3 * if t > 0 { u[t - 1] } else { 0.0 }))
                .collect();
            Realization {
                id,
                channels: IndexMap::from([("u".to_string(), u), ("y".to_string(), y)]),
                n_steps: 150,
                dt: 0.1,
            }
        })
        .collect();
    let roles = IndexMap::from([("u".to_string(), QuantityRole::Exogenous), ("y".to_string(), QuantityRole::Target)]);
    Dataset::new(realizations, roles, Default::default(), 0, 0.1).unwrap()
}

fn specs() -> Vec<WindowSpec> {
    vec![WindowSpec::new("u", 2, Alignment::IncludeCurrent)]
}

fn config() -> FitConfig {
    FitConfig {
        degree: 3,
        q_norm: 1.0,
        ..FitConfig::default()
    }
}

fn fitted(data: &Dataset) -> (FnarxModel, FeatureMatrix) {
    let model = fit_with_windows(data, "y", &specs(), &ComponentBudget::all(), &config()).unwrap();
    let (features, _) = assemble_feature_matrix(data, &specs(), &ComponentBudget::all()).unwrap();
    (model, features)
}

/// Raw feature rows in the model's input order.
fn rows(model: &FnarxModel, features: &FeatureMatrix) -> Vec<Vec<f64>> {
    let cols: Vec<usize> = model
        .input_columns
        .iter()
        .map(|c| features.find(&c.quantity, c.component).unwrap())
        .collect();
    (0..features.n_rows()).map(|i| cols.iter().map(|&c| features.column(c)[i]).collect()).collect()
}

fn one_step(model: &FnarxModel, rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().map(|r| model.predict_one_step(r).unwrap()).collect()
}

#[test]
fn residual_orthogonal_to_active_terms() {
    let data = static_system(1.0, 1);
    let (model, features) = fitted(&data);
    let rows = rows(&model, &features);
    let y = features.stack_targets(&data.channel_traces("y").unwrap());
    let pred = one_step(&model, &rows);
    let residual: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let r_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(r_norm > 1e-6, "the approximation should leave a residual");

    let mut dots = vec![0.0; model.basis.len()];
    let mut norms = vec![0.0; model.basis.len()];
    for (row, r) in rows.iter().zip(&residual) {
        let z: Vec<f64> = row.iter().zip(&model.standardization).map(|(v, s)| s.apply(*v)).collect();
        for (k, p) in evaluate_basis(&z, &model.basis).unwrap().into_iter().enumerate() {
            dots[k] += p * r;
            norms[k] += p * p;
        }
    }
    for (d, n) in dots.iter().zip(&norms) {
        assert!(d.abs() <= 1e-8 * n.sqrt() * r_norm, "{d} vs {}", n.sqrt() * r_norm);
    }
}

#[test]
fn forecast_equals_one_step_without_autoregression() {
    let data = static_system(1.0, 2);
    let (model, features) = fitted(&data);
    assert!(!model.is_autoregressive());
    let rows = rows(&model, &features);
    let per = features.rows_per_realization();
    for (pos, r) in data.realizations().iter().enumerate() {
        let forecast = model.forecast(r, &vec![0.0; model.t0_steps]).unwrap();
        let direct = one_step(&model, &rows[pos * per..(pos + 1) * per]);
        for (a, b) in forecast[features.t0()..].iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn scaling_the_target_scales_predictions() {
    let k = 3.7;
    let (base, features) = fitted(&static_system(1.0, 3));
    let (scaled, _) = fitted(&static_system(k, 3));
    assert_eq!(base.basis, scaled.basis);
    let rows = rows(&base, &features);
    for (a, b) in one_step(&base, &rows).iter().zip(one_step(&scaled, &rows)) {
        assert!((k * a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{} vs {b}", k * a);
    }
}

#[test]
fn returned_model_is_best_checkpoint() {
    let (model, _) = fitted(&static_system(1.0, 4));
    let d = &model.diagnostics;
    assert!(!d.checkpoints.is_empty());
    assert!(d.checkpoints.iter().all(|c| d.mean_error <= c.mean_error));
    assert!(d.checkpoints.iter().any(|c| c.mean_error == d.mean_error && c.active_terms + 1 >= model.coefficients.len()));
}

#[test]
fn constant_target_gives_constant_model() {
    let data = static_system(1.0, 5);
    let flat: Vec<Vec<f64>> = vec![vec![2.5; data.n_steps()]; data.len()];
    let data = data.with_channel("y", QuantityRole::Target, flat).unwrap();
    let (model, _) = fitted(&data);
    let r = &data.realizations()[0];
    let forecast = model.forecast(r, &vec![2.5; model.t0_steps]).unwrap();
    assert!(forecast.iter().all(|v| *v == 2.5));
}
