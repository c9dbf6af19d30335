use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ColumnInfo, FeatureExtractor, WindowSpec};
use crate::poly::{MultiIndex, MultiIndexSet};
use crate::signals::ChannelSource;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub scale: f64,
}

impl Standardization {
    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub lars_step: usize,
    pub active_terms: usize,
    pub mean_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub n_rows: usize,
    pub candidate_terms: usize,
    pub lars_steps: usize,
    pub checkpoints: Vec<Checkpoint>,
    /// Mean forecast error of the returned model on the scoring traces.
    pub mean_error: f64,
    pub scoring_traces: Vec<usize>,
}

/// A polynomial map from standardized PCA features to one output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnarxModel {
    pub schema_version: u32,
    pub target: String,
    pub input_columns: Vec<ColumnInfo>,
    pub extractors: Vec<FeatureExtractor>,
    pub standardization: Vec<Standardization>,
    pub basis: MultiIndexSet,
    pub coefficients: Vec<f64>,
    pub t0_steps: usize,
    #[serde(default)]
    pub diagnostics: FitDiagnostics,
}

/// Where each input column is computed from, resolved once per forecast.
struct ColumnPlan {
    extractor: usize,
    component: usize,
}

impl FnarxModel {
    /// Constant model `ŷ ≡ value`.
    pub fn constant(target: impl Into<String>, value: f64) -> Self {
        FnarxModel {
            schema_version: MODEL_SCHEMA_VERSION,
            target: target.into(),
            input_columns: Vec::new(),
            extractors: Vec::new(),
            standardization: Vec::new(),
            basis: MultiIndexSet {
                n_features: 0,
                degree: 0,
                q_norm: 1.0,
                indices: vec![MultiIndex(Vec::new())],
            },
            coefficients: vec![value],
            t0_steps: 0,
            diagnostics: FitDiagnostics::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.basis.len() {
            return Err(Error::Dimension {
                expected: self.basis.len(),
                actual: self.coefficients.len(),
            });
        }
        if self.basis.n_features != self.input_columns.len() || self.standardization.len() != self.input_columns.len() {
            return Err(Error::InvalidArgument("model inputs, basis and standardization disagree".into()));
        }
        self.plan()?;
        let horizon = self.extractors.iter().map(|e| e.spec.horizon()).max().unwrap_or(0);
        if horizon != self.t0_steps {
            return Err(Error::InvalidArgument(format!(
                "t0_steps {} differs from the longest window {horizon}",
                self.t0_steps
            )));
        }
        Ok(())
    }

    fn plan(&self) -> Result<Vec<ColumnPlan>> {
        self.input_columns
            .iter()
            .map(|c| {
                let extractor = self
                    .extractors
                    .iter()
                    .position(|e| e.spec.quantity == c.quantity)
                    .ok_or_else(|| Error::InvalidArgument(format!("no extractor for input `{}`", c.quantity)))?;
                let component = self.extractors[extractor]
                    .components
                    .iter()
                    .position(|pc| pc.index == c.component)
                    .ok_or_else(|| Error::InvalidArgument(format!("extractor lacks component {}", c.label())))?;
                Ok(ColumnPlan { extractor, component })
            })
            .collect()
    }

    /// Channels other than the target that the model reads.
    pub fn input_quantities(&self) -> Vec<&str> {
        self.extractors
            .iter()
            .map(|e| e.spec.quantity.as_str())
            .filter(|q| *q != self.target)
            .collect()
    }

    pub fn window_specs(&self) -> Vec<&WindowSpec> {
        self.extractors.iter().map(|e| &e.spec).collect()
    }

    pub fn is_autoregressive(&self) -> bool {
        self.extractors.iter().any(|e| e.spec.quantity == self.target)
    }

    /// Model output for one row of raw (unstandardized) features.
    pub fn predict_one_step(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.input_columns.len() {
            return Err(Error::Dimension {
                expected: self.input_columns.len(),
                actual: features.len(),
            });
        }
        let z: Vec<f64> = features.iter().zip(&self.standardization).map(|(v, s)| s.apply(*v)).collect();
        let mut terms = vec![0.0; self.basis.len()];
        self.basis.evaluator().evaluate_into(&z, &mut terms);
        Ok(terms.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum())
    }

    /// Closed-loop simulation. Autoregressive windows read the model's own
    /// earlier outputs; steps before `t0_steps` are copied from `seeds`.
    /// The length is taken from the inputs, or from a `target` trace in
    /// `inputs`, or from `seeds`.
    pub fn forecast<S: ChannelSource + ?Sized>(&self, inputs: &S, seeds: &[f64]) -> Result<Vec<f64>> {
        let n = self
            .input_quantities()
            .iter()
            .find_map(|q| inputs.trace(q))
            .or_else(|| inputs.trace(&self.target))
            .map_or(seeds.len(), <[f64]>::len);
        self.forecast_steps(inputs, seeds, n)
    }

    /// [`forecast`](Self::forecast) over exactly `n` steps.
    pub fn forecast_steps<S: ChannelSource + ?Sized>(&self, inputs: &S, seeds: &[f64], n: usize) -> Result<Vec<f64>> {
        let plan = self.plan()?;
        let mut sources: Vec<Option<&[f64]>> = Vec::with_capacity(self.extractors.len());
        for e in &self.extractors {
            if e.spec.quantity == self.target {
                sources.push(None);
                continue;
            }
            let trace = inputs
                .trace(&e.spec.quantity)
                .ok_or_else(|| Error::MissingChannel(e.spec.quantity.clone()))?;
            if trace.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: trace.len(),
                });
            }
            sources.push(Some(trace));
        }
        self.forecast_with(&plan, &sources, n, seeds)
    }

    fn forecast_with(&self, plan: &[ColumnPlan], sources: &[Option<&[f64]>], n: usize, seeds: &[f64]) -> Result<Vec<f64>> {
        let t0 = self.t0_steps;
        if n <= t0 {
            return Err(Error::InvalidArgument(format!("{n} steps do not exceed the model horizon {t0}")));
        }
        if seeds.len() < t0 {
            return Err(Error::InvalidArgument(format!("{} seed values for a horizon of {t0}", seeds.len())));
        }
        let mut out = Vec::with_capacity(n);
        out.extend_from_slice(&seeds[..t0]);

        let mut windows: Vec<Vec<f64>> = self.extractors.iter().map(|e| vec![0.0; e.width()]).collect();
        let mut projected: Vec<Vec<f64>> = self.extractors.iter().map(|e| vec![0.0; e.n_components()]).collect();
        let mut z = vec![0.0; plan.len()];
        let mut terms = vec![0.0; self.basis.len()];
        let mut evaluator = self.basis.evaluator();

        for t in t0..n {
            for (k, e) in self.extractors.iter().enumerate() {
                let signal = sources[k].unwrap_or(&out);
                e.spec.fill(signal, t, &mut windows[k]);
                for (slot, pc) in projected[k].iter_mut().zip(&e.components) {
                    *slot = e.project_one(&windows[k], pc);
                }
            }
            for ((zk, p), s) in z.iter_mut().zip(plan).zip(&self.standardization) {
                *zk = s.apply(projected[p.extractor][p.component]);
            }
            evaluator.evaluate_into(&z, &mut terms);
            let v: f64 = terms.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum();
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    channel: self.target.clone(),
                    step: t,
                });
            }
            out.push(v);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: FnarxModel = serde_json::from_str(text).map_err(|e| Error::format("<model>", e.to_string()))?;
        if m.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::format("<model>", format!("unsupported schema version {}", m.schema_version)));
        }
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(path, message),
            other => other,
        })
    }
}
