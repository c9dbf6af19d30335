//! Candidate feature matrix: PCA features of every quantity's sliding window,
//! stacked over time steps `t >= t0` and over realizations.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pca::{from_covariance, FeatureExtractor};
use super::window::WindowSpec;
use crate::error::{Error, Result};
use crate::signals::Dataset;

const CHUNK_ROWS: usize = 2048;

/// Where a column of the feature matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub quantity: String,
    /// Principal-component index within the quantity (0 = largest variance).
    pub component: usize,
    pub eigenvalue: f64,
}

impl ColumnInfo {
    pub fn label(&self) -> String {
        format!("{}[{}]", self.quantity, self.component + 1)
    }

    pub fn same_source(&self, other: &ColumnInfo) -> bool {
        self.quantity == other.quantity && self.component == other.component
    }
}

/// How many principal components to keep per quantity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentBudget {
    #[serde(default)]
    pub per_quantity: BTreeMap<String, usize>,
    /// Upper bound applied to quantities without an explicit entry.
    #[serde(default)]
    pub cap: Option<usize>,
}

impl ComponentBudget {
    pub fn all() -> Self {
        ComponentBudget::default()
    }

    pub fn capped(cap: usize) -> Self {
        ComponentBudget {
            per_quantity: BTreeMap::new(),
            cap: Some(cap),
        }
    }

    pub fn for_quantity(&self, quantity: &str, width: usize) -> usize {
        match self.per_quantity.get(quantity) {
            Some(&n) => n.min(width),
            None => self.cap.map_or(width, |c| c.min(width)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<Vec<f64>>,
    info: Vec<ColumnInfo>,
    t0: usize,
    n_steps: usize,
    realization_ids: Vec<usize>,
}

impl FeatureMatrix {
    /// Wraps precomputed columns. Each column holds
    /// `realization_ids.len() * (n_steps - t0)` rows.
    pub fn from_columns(
        columns: Vec<Vec<f64>>,
        info: Vec<ColumnInfo>,
        t0: usize,
        n_steps: usize,
        realization_ids: Vec<usize>,
    ) -> Result<Self> {
        let rows = realization_ids.len() * n_steps.saturating_sub(t0);
        if columns.len() != info.len() {
            return Err(Error::Dimension {
                expected: info.len(),
                actual: columns.len(),
            });
        }
        if let Some(c) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::Dimension {
                expected: rows,
                actual: c.len(),
            });
        }
        Ok(FeatureMatrix {
            columns,
            info,
            t0,
            n_steps,
            realization_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.realization_ids.len() * self.rows_per_realization()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn rows_per_realization(&self) -> usize {
        self.n_steps.saturating_sub(self.t0)
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    pub fn info(&self) -> &[ColumnInfo] {
        &self.info
    }

    pub fn realization_ids(&self) -> &[usize] {
        &self.realization_ids
    }

    /// Row holding step `step` of the realization at `position`.
    pub fn row_of(&self, position: usize, step: usize) -> Option<usize> {
        (position < self.realization_ids.len() && step >= self.t0 && step < self.n_steps)
            .then(|| position * self.rows_per_realization() + step - self.t0)
    }

    /// `(realization position, step)` of a row.
    pub fn coordinates(&self, row: usize) -> (usize, usize) {
        let per = self.rows_per_realization();
        (row / per, self.t0 + row % per)
    }

    pub fn find(&self, quantity: &str, component: usize) -> Option<usize> {
        self.info
            .iter()
            .position(|c| c.quantity == quantity && c.component == component)
    }

    /// Stacks the `t >= t0` part of each trace in realization order, matching
    /// the row layout of this matrix.
    pub fn stack_targets(&self, traces: &[&[f64]]) -> Vec<f64> {
        traces.iter().flat_map(|t| t[self.t0..].iter().copied()).collect()
    }
}

/// Pooled window mean and covariance over steps `t0..n` of every trace.
fn window_moments(traces: &[&[f64]], spec: &WindowSpec, t0: usize) -> (Vec<f64>, DMatrix<f64>, usize) {
    let m = spec.memory_steps;
    let n = traces.first().map_or(0, |t| t.len());
    let rows = traces.len() * n.saturating_sub(t0);
    let mut mean = vec![0.0; m];
    let mut buf = vec![0.0; m];
    for trace in traces {
        for t in t0..n {
            spec.fill(trace, t, &mut buf);
            for (a, b) in mean.iter_mut().zip(&buf) {
                *a += b;
            }
        }
    }
    mean.iter_mut().for_each(|v| *v /= rows.max(1) as f64);

    let mut cov = DMatrix::zeros(m, m);
    for_each_centered_chunk(traces, spec, t0, &mean, |chunk| {
        cov.gemm_tr(1.0, chunk, chunk, 1.0);
    });
    cov /= rows.max(1) as f64;
    (mean, cov, rows)
}

/// Calls `f` with consecutive blocks of centered windows, in row order.
fn for_each_centered_chunk(
    traces: &[&[f64]],
    spec: &WindowSpec,
    t0: usize,
    mean: &[f64],
    mut f: impl FnMut(&DMatrix<f64>),
) {
    let m = spec.memory_steps;
    let n = traces.first().map_or(0, |t| t.len());
    let mut chunk = DMatrix::zeros(CHUNK_ROWS, m);
    let mut filled = 0;
    let mut buf = vec![0.0; m];
    for trace in traces {
        for t in t0..n {
            spec.fill(trace, t, &mut buf);
            for (c, (v, mu)) in buf.iter().zip(mean).enumerate() {
                chunk[(filled, c)] = v - mu;
            }
            filled += 1;
            if filled == CHUNK_ROWS {
                f(&chunk);
                filled = 0;
            }
        }
    }
    if filled > 0 {
        f(&chunk.rows(0, filled).into_owned());
    }
}

/// Fits the extractor of one quantity and returns its feature columns.
pub(crate) fn extract_quantity(
    dataset: &Dataset,
    spec: &WindowSpec,
    t0: usize,
    n_components: usize,
) -> Result<(FeatureExtractor, Vec<Vec<f64>>)> {
    let traces = dataset.channel_traces(&spec.quantity)?;
    let (mean, cov, rows) = window_moments(&traces, spec, t0);
    if rows < 2 {
        return Err(Error::InvalidArgument(format!(
            "not enough steps after t0={t0} to fit PCA on `{}`",
            spec.quantity
        )));
    }
    let extractor = from_covariance(spec.clone(), mean, cov, n_components);
    let projection = extractor.projection();
    let mut columns = vec![Vec::with_capacity(rows); extractor.n_components()];
    if !columns.is_empty() {
        for_each_centered_chunk(&traces, spec, t0, &extractor.mean, |chunk| {
            let block = chunk * &projection;
            for (k, col) in columns.iter_mut().enumerate() {
                col.extend(block.column(k).iter());
            }
        });
    }
    Ok((extractor, columns))
}

/// Builds the stacked candidate matrix for `specs`.
///
/// Rows start at `t0 = max(memory)` in every realization. Columns follow the
/// order of `specs`, then component index; zero-variance components are left
/// out.
pub fn assemble_feature_matrix(
    dataset: &Dataset,
    specs: &[WindowSpec],
    budget: &ComponentBudget,
) -> Result<(FeatureMatrix, Vec<FeatureExtractor>)> {
    let t0 = specs.iter().map(WindowSpec::horizon).max().unwrap_or(0);
    assemble_with_t0(dataset, specs, budget, t0)
}

pub(crate) fn assemble_with_t0(
    dataset: &Dataset,
    specs: &[WindowSpec],
    budget: &ComponentBudget,
    t0: usize,
) -> Result<(FeatureMatrix, Vec<FeatureExtractor>)> {
    for (i, s) in specs.iter().enumerate() {
        s.validate()?;
        dataset.role(&s.quantity)?;
        if specs[..i].iter().any(|o| o.quantity == s.quantity) {
            return Err(Error::InvalidArgument(format!("duplicate window for `{}`", s.quantity)));
        }
        if s.horizon() > t0 {
            return Err(Error::InvalidArgument(format!("t0={t0} below the horizon of `{}`", s.quantity)));
        }
    }
    if dataset.n_steps() <= t0 {
        return Err(Error::InvalidArgument(format!(
            "traces of {} steps are too short for t0={t0}",
            dataset.n_steps()
        )));
    }
    let parts: Vec<(FeatureExtractor, Vec<Vec<f64>>)> = specs
        .par_iter()
        .map(|s| extract_quantity(dataset, s, t0, budget.for_quantity(&s.quantity, s.memory_steps)))
        .collect::<Result<_>>()?;

    let mut columns = Vec::new();
    let mut info = Vec::new();
    let mut extractors = Vec::with_capacity(parts.len());
    for (extractor, cols) in parts {
        for (pc, col) in extractor.components.iter().zip(cols) {
            info.push(ColumnInfo {
                quantity: extractor.spec.quantity.clone(),
                component: pc.index,
                eigenvalue: pc.eigenvalue,
            });
            columns.push(col);
        }
        extractors.push(extractor);
    }
    Ok((
        FeatureMatrix {
            columns,
            info,
            t0,
            n_steps: dataset.n_steps(),
            realization_ids: dataset.realizations().iter().map(|r| r.id).collect(),
        },
        extractors,
    ))
}
