//! Greedy, recursive construction of a model sequence for one target.
//!
//! Each level grows a model for its target by repeatedly ranking candidate
//! features against the forecast residuals. A winning feature whose source
//! has no model yet (an intermediate response) triggers a nested level with
//! that source as target; its prediction then replaces the true values in
//! every later feature computation.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ranking::{rank_features, sample_rows, CandidateBook, ColumnKey, RankingConfig};
use super::sequence::ModelSequence;
use super::trace::{AlgoTrace, TraceAction, TraceRecord};
use crate::error::{Error, Result};
use crate::features::matrix::assemble_with_t0;
use crate::features::{Alignment, ComponentBudget, FeatureMatrix, WindowSpec};
use crate::fnarx::{fit, mean_error, scoring_positions, trace_error, FitConfig, FitProblem, FnarxModel};
use crate::signals::{Dataset, QuantityRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstructConfig {
    pub ranking: RankingConfig,
    pub default_fit: FitConfig,
    /// Fit settings for specific target quantities.
    pub fits: BTreeMap<String, FitConfig>,
    /// Window memory (steps) of response quantities.
    pub memories: BTreeMap<String, usize>,
    pub default_memory: usize,
    pub budget: ComponentBudget,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        ConstructConfig {
            ranking: RankingConfig::default(),
            default_fit: FitConfig::default(),
            fits: BTreeMap::new(),
            memories: BTreeMap::new(),
            default_memory: 10,
            budget: ComponentBudget::default(),
        }
    }
}

impl ConstructConfig {
    pub fn fit_for(&self, target: &str) -> &FitConfig {
        self.fits.get(target).unwrap_or(&self.default_fit)
    }

    pub fn memory_of(&self, quantity: &str) -> usize {
        self.memories.get(quantity).copied().unwrap_or(self.default_memory)
    }

    pub fn validate(&self) -> Result<()> {
        self.ranking.validate()?;
        self.default_fit.validate()?;
        for f in self.fits.values() {
            f.validate()?;
        }
        if self.default_memory == 0 || self.memories.values().any(|&m| m == 0) {
            return Err(Error::Config("memories must be at least one step".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Construction {
    pub sequence: ModelSequence,
    pub trace: AlgoTrace,
    /// Training data with every modeled intermediate response replaced by
    /// its prediction.
    pub dataset: Dataset,
    /// Closed-loop training predictions of the target, per realization.
    pub prediction: Vec<Vec<f64>>,
}

/// Quantities seen by one construction level.
#[derive(Debug, Clone, Default)]
struct Pools {
    /// Exogenous inputs.
    exogenous: Vec<String>,
    /// Auxiliary quantities: registered transforms and modeled responses.
    auxiliary: Vec<String>,
    /// Intermediate responses without a model yet.
    pending: Vec<String>,
}

struct Shared<'a> {
    config: &'a ConstructConfig,
    trace: AlgoTrace,
    iteration: usize,
    start: Instant,
}

struct LevelResult {
    /// Models for intermediate responses, in dependency order.
    stages: Vec<(String, FnarxModel)>,
    model: FnarxModel,
    prediction: Vec<Vec<f64>>,
    dataset: Dataset,
    pools: Pools,
}

/// Builds a model sequence for `target`, which must have role `Target`.
pub fn construct(dataset: &Dataset, target: &str, config: &ConstructConfig) -> Result<Construction> {
    config.validate()?;
    if dataset.role(target)? != QuantityRole::Target {
        return Err(Error::InvalidArgument(format!("`{target}` does not have the target role")));
    }
    if dataset.is_empty() {
        return Err(Error::Dataset("no realizations to learn from".into()));
    }
    let pools = Pools {
        exogenous: dataset.channels_with_role(QuantityRole::Exogenous),
        auxiliary: dataset.channels_with_role(QuantityRole::AuxiliaryTransformed),
        pending: dataset.channels_with_role(QuantityRole::IntermediateResponse),
    };
    let mut shared = Shared {
        config,
        trace: AlgoTrace::default(),
        iteration: 0,
        start: Instant::now(),
    };
    let result = grow(dataset.clone(), pools, target, 0, &mut shared)?;
    let sequence = ModelSequence::assemble(&result.dataset, result.stages, result.model)?;
    Ok(Construction {
        sequence,
        trace: shared.trace,
        dataset: result.dataset,
        prediction: result.prediction,
    })
}

/// Channel whose missing model blocks `quantity`: itself if pending, or the
/// first pending source behind a transform.
fn blocking_source(dataset: &Dataset, pools: &Pools, quantity: &str) -> Option<String> {
    if pools.pending.iter().any(|p| p == quantity) {
        return Some(quantity.to_string());
    }
    let spec = dataset.transforms().get(quantity)?;
    spec.sources().iter().find_map(|s| blocking_source(dataset, pools, s))
}

/// A transform is a candidate only if everything it reads is an input,
/// an auxiliary quantity or a pending response of this level.
fn resolvable(dataset: &Dataset, pools: &Pools, quantity: &str) -> bool {
    match dataset.transforms().get(quantity) {
        Some(spec) => spec.sources().iter().all(|s| {
            pools.exogenous.contains(s) || pools.pending.contains(s) || (pools.auxiliary.contains(s) && resolvable(dataset, pools, s))
        }),
        None => true,
    }
}

fn window_specs(dataset: &Dataset, pools: &Pools, target: &str, config: &ConstructConfig) -> Result<Vec<WindowSpec>> {
    let own = config.memory_of(target);
    let mut specs = vec![WindowSpec::new(target, own, Alignment::PastOnly)];
    for q in pools.exogenous.iter().chain(&pools.auxiliary).chain(&pools.pending) {
        if q == target || !resolvable(dataset, pools, q) {
            continue;
        }
        let memory = if dataset.role(q)?.is_response() { config.memory_of(q) } else { own };
        specs.push(WindowSpec::new(q.clone(), memory, Alignment::IncludeCurrent));
    }
    Ok(specs)
}

/// Closed-loop predictions on every realization, seeded with true values.
fn predict_all(model: &FnarxModel, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
    dataset
        .realizations()
        .iter()
        .map(|r| model.forecast(r, r.channel(&model.target)?))
        .collect()
}

fn stacked_residuals(features: &FeatureMatrix, truth: &[&[f64]], prediction: &[Vec<f64>]) -> Vec<f64> {
    let t0 = features.t0();
    truth
        .iter()
        .zip(prediction)
        .flat_map(|(y, p)| y[t0..].iter().zip(&p[t0..]).map(|(a, b)| a - b))
        .collect()
}

fn grow(mut dataset: Dataset, mut pools: Pools, target: &str, depth: usize, shared: &mut Shared<'_>) -> Result<LevelResult> {
    let config = shared.config;
    let fit_config = config.fit_for(target).clone();
    pools.pending.retain(|p| p != target);
    assert!(
        !pools.auxiliary.iter().any(|a| a == target),
        "construction asked for `{target}`, which already has a model"
    );

    // Node 2: candidate matrix.
    let specs = window_specs(&dataset, &pools, target, config)?;
    let t0 = specs.iter().map(WindowSpec::horizon).max().unwrap_or(0);
    let (mut features, mut extractors) = assemble_with_t0(&dataset, &specs, &config.budget, t0)?;
    log::info!(
        "depth {depth}: building `{target}` from {} candidate features over {} rows",
        features.n_cols(),
        features.n_rows()
    );

    // Rows of traces with a constant target carry no ranking information.
    let truth: Vec<Vec<f64>> = dataset.channel_traces(target)?.into_iter().map(<[f64]>::to_vec).collect();
    let truth_refs: Vec<&[f64]> = truth.iter().map(Vec::as_slice).collect();
    let per = features.rows_per_realization();
    let varying: Vec<usize> = (0..truth.len()).filter(|&p| truth[p].iter().any(|v| *v != truth[p][0])).collect();
    if varying.len() < truth.len() {
        log::warn!("`{target}`: {} traces have zero variance and are left out of the ranking", truth.len() - varying.len());
    }
    let allowed: Vec<usize> = varying.iter().flat_map(|&p| p * per..(p + 1) * per).collect();
    let rows = sample_rows(&allowed, &config.ranking);

    // Node 3: trivial model and bookkeeping.
    let positions = scoring_positions(dataset.len(), fit_config.forecast_eval_traces);
    let zero_errors: Vec<f64> = positions
        .iter()
        .map(|&p| trace_error(&truth[p], &vec![0.0; truth[p].len()]))
        .collect::<Result<_>>()?;
    let mut best_error = mean_error(&zero_errors)?;
    let mut best = FnarxModel::constant(target, 0.0);
    let mut residuals: Vec<f64> = features.stack_targets(&truth_refs);
    let mut book = CandidateBook::new(&features);
    let mut stages: Vec<(String, FnarxModel)> = Vec::new();
    let mut level_iterations = 0usize;

    if rows.len() >= 2 {
        loop {
            debug_assert!(book.is_partition_of(&features));
            if book.available().is_empty() {
                break;
            }
            // Nodes 4-5: rank and test the threshold.
            let ranked = rank_features(&features, &book, &residuals, &rows, &config.ranking)?;
            if ranked.rho.abs() < config.ranking.rho_threshold {
                log::info!("`{target}`: best |rho| {:.3} below threshold", ranked.rho.abs());
                break;
            }
            let info = features.info()[ranked.column].clone();
            let key = ColumnKey::from(&info);

            // Nodes 7-8, 17-18: a pending source is modeled first.
            if let Some(source) = blocking_source(&dataset, &pools, &info.quantity) {
                shared.trace.push(TraceRecord {
                    iteration: shared.iteration,
                    depth,
                    target: target.to_string(),
                    quantity: info.quantity.clone(),
                    component: info.component,
                    rho: ranked.rho,
                    mean_error: None,
                    action: TraceAction::Recursed,
                });
                shared.iteration += 1;
                let child = grow(dataset.clone(), pools.clone(), &source, depth + 1, shared)?;
                stages.extend(child.stages);
                stages.push((source.clone(), child.model));
                dataset = child.dataset.with_channel(&source, QuantityRole::IntermediateResponse, child.prediction)?;
                dataset.refresh_transforms(&source)?;
                pools.auxiliary = child.pools.auxiliary;
                pools.auxiliary.push(source.clone());
                pools.pending = child.pools.pending;
                pools.pending.retain(|p| p != &source);

                let specs = window_specs(&dataset, &pools, target, config)?;
                (features, extractors) = assemble_with_t0(&dataset, &specs, &config.budget, t0)?;
                book.sync(&features);
                continue;
            }

            // Nodes 9-11: extend the selection and fit.
            book.select(&key);
            let columns = book.selected_columns(&features);
            let candidate = fit(
                &FitProblem {
                    dataset: &dataset,
                    target,
                    features: &features,
                    extractors: &extractors,
                    columns: &columns,
                },
                &fit_config,
            )?;
            let err = candidate.diagnostics.mean_error;

            // Nodes 12-15.
            let accepted = err < best_error;
            if accepted {
                let prediction = predict_all(&candidate, &dataset)?;
                residuals = stacked_residuals(&features, &truth_refs, &prediction);
                best = candidate;
                best_error = err;
                book.restore_excluded();
            } else {
                book.exclude(&key);
            }
            shared.trace.push(TraceRecord {
                iteration: shared.iteration,
                depth,
                target: target.to_string(),
                quantity: info.quantity.clone(),
                component: info.component,
                rho: ranked.rho,
                mean_error: Some(err),
                action: if accepted { TraceAction::Accepted } else { TraceAction::Rejected },
            });
            shared.iteration += 1;
            level_iterations += 1;

            // Node 16.
            if config.ranking.max_iterations.is_some_and(|m| level_iterations >= m) {
                log::info!("`{target}`: iteration limit reached");
                break;
            }
            if config.ranking.max_runtime.is_some_and(|t| shared.start.elapsed().as_secs_f64() >= t) {
                log::info!("`{target}`: runtime budget exhausted");
                break;
            }
            if config.ranking.error_threshold.is_some_and(|e| best_error < e) {
                log::info!("`{target}`: error threshold reached");
                break;
            }
        }
    }

    // Node 6.
    let prediction = predict_all(&best, &dataset)?;
    log::info!("depth {depth}: `{target}` done, mean error {best_error:.4e}");
    Ok(LevelResult {
        stages,
        model: best,
        prediction,
        dataset,
        pools,
    })
}
