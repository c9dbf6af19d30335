//! Model fitting: polynomial expansion of the selected feature columns, a
//! LARS path over the standardized terms, least-squares refits at path
//! checkpoints and selection by closed-loop forecast error.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lars::lars_lasso;
use super::metrics::{mean_error, trace_error};
use super::model::{Checkpoint, FitDiagnostics, FnarxModel, Standardization, MODEL_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::features::{assemble_feature_matrix, ColumnInfo, ComponentBudget, FeatureExtractor, FeatureMatrix, WindowSpec};
use crate::poly::{generate_hyperbolic_set, MultiIndexSet};
use crate::signals::Dataset;

const CHUNK_ROWS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub degree: u32,
    pub q_norm: f64,
    /// Largest active set the LARS path may reach.
    pub max_lars_steps: usize,
    /// Number of path checkpoints scored by forecasting.
    pub forecast_eval_points: usize,
    /// Traces forecast per checkpoint.
    pub forecast_eval_traces: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            degree: 3,
            q_norm: 0.8,
            max_lars_steps: 200,
            forecast_eval_points: 10,
            forecast_eval_traces: 50,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::Config("polynomial degree must be at least 1".into()));
        }
        if !(self.q_norm > 0.0 && self.q_norm <= 1.0) {
            return Err(Error::Config(format!("q-norm must lie in (0, 1], got {}", self.q_norm)));
        }
        if self.max_lars_steps == 0 || self.forecast_eval_points == 0 || self.forecast_eval_traces == 0 {
            return Err(Error::Config("LARS steps, checkpoints and scoring traces must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a fit reads: the candidate matrix with its extractors, the
/// chosen columns, and the dataset that supplies targets and forecast inputs.
#[derive(Debug, Clone, Copy)]
pub struct FitProblem<'a> {
    pub dataset: &'a Dataset,
    pub target: &'a str,
    pub features: &'a FeatureMatrix,
    pub extractors: &'a [FeatureExtractor],
    pub columns: &'a [usize],
}

/// Fits on every column of a freshly assembled feature matrix.
pub fn fit_with_windows(
    dataset: &Dataset,
    target: &str,
    specs: &[WindowSpec],
    budget: &ComponentBudget,
    config: &FitConfig,
) -> Result<FnarxModel> {
    let (features, extractors) = assemble_feature_matrix(dataset, specs, budget)?;
    let columns: Vec<usize> = (0..features.n_cols()).collect();
    fit(
        &FitProblem {
            dataset,
            target,
            features: &features,
            extractors: &extractors,
            columns: &columns,
        },
        config,
    )
}

/// Realization positions used to score forecasts: all of them, or an evenly
/// spread subset of `cap`.
pub fn scoring_positions(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        (0..n).collect()
    } else {
        (0..cap).map(|i| i * n / cap).collect()
    }
}

/// Closed-loop mean error of `model` on the realizations at `positions`,
/// seeded with the true target. Any failed or overflowing forecast makes it
/// infinite.
pub fn forecast_mean_error(model: &FnarxModel, dataset: &Dataset, positions: &[usize]) -> Result<f64> {
    let errors: Vec<Option<f64>> = positions
        .par_iter()
        .map(|&p| {
            let r = &dataset.realizations()[p];
            let truth = r.channel(&model.target).ok()?;
            let pred = model.forecast(r, truth).ok()?;
            let e = trace_error(truth, &pred).ok()?;
            let constant = truth.iter().all(|v| *v == truth[0]);
            (e.is_finite() || constant).then_some(e)
        })
        .collect();
    if errors.iter().any(Option::is_none) {
        return Ok(f64::INFINITY);
    }
    mean_error(&errors.into_iter().flatten().collect::<Vec<_>>())
}

struct TermMoments {
    /// Indices into the full basis (the intercept is left out).
    terms: Vec<usize>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Correlation matrix of the standardized terms.
    corr: DMatrix<f64>,
    /// Covariance of each standardized term with the target.
    xty: Vec<f64>,
}

pub fn fit(problem: &FitProblem<'_>, config: &FitConfig) -> Result<FnarxModel> {
    config.validate()?;
    let FitProblem {
        dataset,
        target,
        features,
        extractors,
        columns,
    } = *problem;
    let ids: Vec<usize> = dataset.realizations().iter().map(|r| r.id).collect();
    if ids != features.realization_ids() {
        return Err(Error::InvalidArgument("feature matrix was built from different realizations".into()));
    }
    if let Some(&bad) = columns.iter().find(|&&c| c >= features.n_cols()) {
        return Err(Error::InvalidArgument(format!("column {bad} out of range")));
    }
    let y = features.stack_targets(&dataset.channel_traces(target)?);
    let n_rows = y.len();
    if n_rows == 0 {
        return Err(Error::InvalidArgument("no rows to fit".into()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        let (pos, step) = features.coordinates(i);
        return Err(Error::Channel {
            realization: ids[pos],
            channel: target.to_string(),
            message: format!("non-finite value at step {step}"),
        });
    }
    let y_mean = y.iter().sum::<f64>() / n_rows as f64;
    let positions = scoring_positions(dataset.len(), config.forecast_eval_traces);

    let info: Vec<ColumnInfo> = columns.iter().map(|&c| features.info()[c].clone()).collect();
    let model_extractors = restrict_extractors(extractors, &info)?;
    let t0_steps = model_extractors.iter().map(|e| e.spec.horizon()).max().unwrap_or(0);

    let constant_target = y.iter().all(|v| *v == y[0]);
    if columns.is_empty() || constant_target {
        let mut model = FnarxModel::constant(target, if constant_target { y[0] } else { y_mean });
        model.diagnostics = FitDiagnostics {
            n_rows,
            candidate_terms: 1,
            mean_error: forecast_mean_error(&model, dataset, &positions)?,
            scoring_traces: positions,
            ..FitDiagnostics::default()
        };
        return Ok(model);
    }

    let standardization: Vec<Standardization> = columns
        .iter()
        .map(|&c| {
            let col = features.column(c);
            let mean = col.iter().sum::<f64>() / n_rows as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_rows as f64;
            Standardization {
                mean,
                scale: if var > 0.0 { var.sqrt() } else { 1.0 },
            }
        })
        .collect();
    let basis = generate_hyperbolic_set(columns.len(), config.degree, config.q_norm)?;
    let moments = term_moments(features, columns, &standardization, &basis, &y, y_mean);

    let path = lars_lasso(&moments.corr, &moments.xty, config.max_lars_steps.min(moments.terms.len()));
    let template = FnarxModel {
        schema_version: MODEL_SCHEMA_VERSION,
        target: target.to_string(),
        input_columns: info,
        extractors: model_extractors,
        standardization,
        basis: basis.clone(),
        coefficients: Vec::new(),
        t0_steps,
        diagnostics: FitDiagnostics::default(),
    };

    let mut best: Option<(f64, FnarxModel)> = None;
    let mut checkpoints = Vec::new();
    for step in checkpoint_steps(&path.steps.iter().map(|s| s.active.len()).collect::<Vec<_>>(), config.forecast_eval_points) {
        let active = &path.steps[step].active;
        let model = refit(&template, &basis, &moments, active, y_mean)?;
        let err = forecast_mean_error(&model, dataset, &positions)?;
        log::debug!("fit `{target}`: checkpoint at step {step} with {} terms, mean error {err:.4e}", active.len());
        checkpoints.push(Checkpoint {
            lars_step: step,
            active_terms: active.len(),
            mean_error: err,
        });
        if best.as_ref().is_none_or(|(b, _)| err < *b) {
            best = Some((err, model));
        }
    }
    let (err, mut model) = match best {
        Some(b) => b,
        None => {
            let m = refit(&template, &basis, &moments, &[], y_mean)?;
            (forecast_mean_error(&m, dataset, &positions)?, m)
        }
    };
    model.diagnostics = FitDiagnostics {
        n_rows,
        candidate_terms: basis.len(),
        lars_steps: path.steps.len() - 1,
        checkpoints,
        mean_error: err,
        scoring_traces: positions,
    };
    Ok(model)
}

/// Extractors of the quantities in `info`, keeping only the components used.
fn restrict_extractors(extractors: &[FeatureExtractor], info: &[ColumnInfo]) -> Result<Vec<FeatureExtractor>> {
    let mut out: Vec<FeatureExtractor> = Vec::new();
    for c in info {
        if out.iter().any(|e| e.spec.quantity == c.quantity) {
            continue;
        }
        let e = extractors
            .iter()
            .find(|e| e.spec.quantity == c.quantity)
            .ok_or_else(|| Error::InvalidArgument(format!("no extractor for `{}`", c.quantity)))?;
        let used: Vec<usize> = info.iter().filter(|o| o.quantity == c.quantity).map(|o| o.component).collect();
        out.push(e.restricted_to(&used));
    }
    Ok(out)
}

/// Two passes over the rows: term means, then the centered Gram matrix.
fn term_moments(
    features: &FeatureMatrix,
    columns: &[usize],
    standardization: &[Standardization],
    basis: &MultiIndexSet,
    y: &[f64],
    y_mean: f64,
) -> TermMoments {
    let n_rows = y.len();
    let p_all = basis.len() - 1;
    let cols: Vec<&[f64]> = columns.iter().map(|&c| features.column(c)).collect();
    let mut evaluator = basis.evaluator();
    let mut z = vec![0.0; cols.len()];
    let mut terms = vec![0.0; basis.len()];
    let mut eval_row = |r: usize, terms: &mut [f64]| {
        for ((zk, col), s) in z.iter_mut().zip(&cols).zip(standardization) {
            *zk = s.apply(col[r]);
        }
        evaluator.evaluate_into(&z, terms);
    };

    let mut sums = vec![0.0; p_all];
    for r in 0..n_rows {
        eval_row(r, &mut terms);
        for (s, t) in sums.iter_mut().zip(&terms[1..]) {
            *s += t;
        }
    }
    let mean: Vec<f64> = sums.iter().map(|s| s / n_rows as f64).collect();

    let mut gram = DMatrix::zeros(p_all, p_all);
    let mut xty = DVector::zeros(p_all);
    let mut chunk = DMatrix::zeros(CHUNK_ROWS, p_all);
    let mut yc = DVector::zeros(CHUNK_ROWS);
    let mut start = 0;
    while start < n_rows {
        let len = CHUNK_ROWS.min(n_rows - start);
        for i in 0..len {
            eval_row(start + i, &mut terms);
            for k in 0..p_all {
                chunk[(i, k)] = terms[k + 1] - mean[k];
            }
            yc[i] = y[start + i] - y_mean;
        }
        if len == CHUNK_ROWS {
            gram.gemm_tr(1.0, &chunk, &chunk, 1.0);
            xty.gemv_tr(1.0, &chunk, &yc, 1.0);
        } else {
            let c = chunk.rows(0, len);
            gram.gemm_tr(1.0, &c, &c, 1.0);
            xty.gemv_tr(1.0, &c, &yc.rows(0, len), 1.0);
        }
        start += len;
    }
    gram /= n_rows as f64;
    xty /= n_rows as f64;

    let kept: Vec<usize> = (0..p_all)
        .filter(|&k| gram[(k, k)] > 1e-20 * (1.0 + mean[k] * mean[k]))
        .collect();
    let scale: Vec<f64> = kept.iter().map(|&k| gram[(k, k)].sqrt()).collect();
    let corr = DMatrix::from_fn(kept.len(), kept.len(), |i, j| {
        if i == j {
            1.0
        } else {
            gram[(kept[i], kept[j])] / (scale[i] * scale[j])
        }
    });
    TermMoments {
        xty: kept.iter().zip(&scale).map(|(&k, s)| xty[k] / s).collect(),
        mean: kept.iter().map(|&k| mean[k]).collect(),
        terms: kept.iter().map(|&k| k + 1).collect(),
        scale,
        corr,
    }
}

/// LARS steps to score: the first step reaching each of `points`
/// geometrically spaced active-set sizes, plus the end of the path.
fn checkpoint_steps(sizes: &[usize], points: usize) -> Vec<usize> {
    let max = sizes.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Vec::new();
    }
    let mut targets: Vec<usize> = (0..points)
        .map(|i| {
            if points == 1 {
                max
            } else {
                (max as f64).powf(i as f64 / (points - 1) as f64).round() as usize
            }
        })
        .map(|s| s.clamp(1, max))
        .collect();
    targets.dedup();
    let mut steps: Vec<usize> = targets
        .iter()
        .filter_map(|&t| sizes.iter().position(|&s| s == t))
        .collect();
    let end = sizes.len() - 1;
    if sizes[end] > 0 {
        steps.push(end);
    }
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// Unpenalized least squares on the active terms, expressed as a model over
/// raw monomials of the standardized features.
fn refit(template: &FnarxModel, basis: &MultiIndexSet, m: &TermMoments, active: &[usize], y_mean: f64) -> Result<FnarxModel> {
    let mut active = active.to_vec();
    let beta = loop {
        if active.is_empty() {
            break Vec::new();
        }
        let g = DMatrix::from_fn(active.len(), active.len(), |i, j| m.corr[(active[i], active[j])]);
        let rhs = DVector::from_iterator(active.len(), active.iter().map(|&k| m.xty[k]));
        match g.cholesky() {
            Some(ch) => break ch.solve(&rhs).iter().copied().collect::<Vec<_>>(),
            None => {
                let dropped = active.pop();
                log::debug!("singular refit system; dropping term {dropped:?}");
            }
        }
    };
    let mut intercept = y_mean;
    let mut pairs = Vec::with_capacity(active.len() + 1);
    for (&k, b) in active.iter().zip(&beta) {
        let c = b / m.scale[k];
        intercept -= c * m.mean[k];
        pairs.push((m.terms[k], c));
    }
    pairs.push((0, intercept));
    pairs.sort_by_key(|p| p.0);
    let mut model = template.clone();
    model.basis = MultiIndexSet::from_indices(basis.n_features, basis.degree, basis.q_norm, pairs.iter().map(|p| basis.indices[p.0].clone()).collect())?;
    model.coefficients = pairs.into_iter().map(|p| p.1).collect();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoints_are_geometric_plus_end() {
        let sizes: Vec<usize> = (0..=100).collect();
        let steps = checkpoint_steps(&sizes, 10);
        assert_eq!(steps.first(), Some(&1));
        assert_eq!(steps.last(), Some(&100));
        assert!(steps.len() <= 11);
        assert!(steps.windows(2).all(|w| w[0] < w[1]));
        assert!(checkpoint_steps(&[0], 10).is_empty());
        // A drop puts size 2 at step 2 and again at step 4; the first wins.
        assert_eq!(checkpoint_steps(&[0, 1, 2, 1, 2, 3], 3), vec![1, 2, 5]);
    }

    #[test]
    fn scoring_spread() {
        assert_eq!(scoring_positions(3, 50), vec![0, 1, 2]);
        assert_eq!(scoring_positions(100, 4), vec![0, 25, 50, 75]);
    }
}
