//! Ordered chains of transforms and models that turn exogenous inputs into a
//! prediction of the target, each stage reading only what earlier stages
//! produced.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fnarx::FnarxModel;
use crate::signals::{ChannelSource, Dataset, QuantityRole};
use crate::transforms::TransformSpec;

pub const SEQUENCE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stage {
    Transform { output: String, transform: TransformSpec },
    Model { output: String, model: FnarxModel },
}

impl Stage {
    pub fn output(&self) -> &str {
        match self {
            Stage::Transform { output, .. } | Stage::Model { output, .. } => output,
        }
    }

    pub fn inputs(&self) -> Vec<String> {
        match self {
            Stage::Transform { transform, .. } => transform.sources(),
            Stage::Model { model, .. } => model.input_quantities().into_iter().map(String::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSequence {
    pub schema_version: u32,
    pub target: String,
    /// Channels that must be supplied at prediction time.
    pub exogenous: Vec<String>,
    pub dt: f64,
    pub stages: Vec<Stage>,
    pub final_model: FnarxModel,
}

impl ModelSequence {
    /// Orders `models` (already in dependency order) together with the
    /// registered transforms of `dataset` that they need, placing every
    /// transform right after its sources become available.
    pub fn assemble(dataset: &Dataset, models: Vec<(String, FnarxModel)>, final_model: FnarxModel) -> Result<Self> {
        let exogenous_all = dataset.channels_with_role(QuantityRole::Exogenous);
        let transforms = dataset.transforms();

        // Every transform reachable from a model input.
        let mut needed: Vec<String> = Vec::new();
        let mut stack: Vec<String> = models
            .iter()
            .map(|(_, m)| m)
            .chain(std::iter::once(&final_model))
            .flat_map(|m| m.input_quantities().into_iter().map(String::from))
            .collect();
        let mut exogenous: Vec<String> = Vec::new();
        while let Some(q) = stack.pop() {
            if let Some(spec) = transforms.get(&q) {
                if !needed.contains(&q) {
                    needed.push(q.clone());
                    stack.extend(spec.sources());
                }
            } else if exogenous_all.contains(&q) && !exogenous.contains(&q) {
                exogenous.push(q);
            }
        }
        exogenous.sort_by_key(|q| exogenous_all.iter().position(|e| e == q));
        let order = dataset.transform_order()?;
        needed.sort_by_key(|q| order.iter().position(|o| o == q));

        let mut available: Vec<String> = exogenous.clone();
        let mut stages = Vec::new();
        let place_ready = |available: &mut Vec<String>, stages: &mut Vec<Stage>, needed: &mut Vec<String>| loop {
            let Some(pos) = needed
                .iter()
                .position(|q| transforms[q].sources().iter().all(|s| available.contains(s)))
            else {
                break;
            };
            let q = needed.remove(pos);
            available.push(q.clone());
            stages.push(Stage::Transform {
                transform: transforms[&q].clone(),
                output: q,
            });
        };
        place_ready(&mut available, &mut stages, &mut needed);
        for (output, model) in models {
            available.push(output.clone());
            stages.push(Stage::Model { output, model });
            place_ready(&mut available, &mut stages, &mut needed);
        }
        if let Some(q) = needed.first() {
            return Err(Error::Infeasible(format!("transform `{q}` reads a channel no stage produces")));
        }
        let seq = ModelSequence {
            schema_version: SEQUENCE_SCHEMA_VERSION,
            target: final_model.target.clone(),
            exogenous,
            dt: dataset.dt(),
            stages,
            final_model,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Static causality check: each stage reads only exogenous channels and
    /// outputs of earlier stages, and nothing is produced twice.
    pub fn validate(&self) -> Result<()> {
        let mut available: Vec<&str> = self.exogenous.iter().map(String::as_str).collect();
        for (i, stage) in self.stages.iter().enumerate() {
            for input in stage.inputs() {
                if !available.contains(&input.as_str()) {
                    return Err(Error::Infeasible(format!(
                        "stage {i} (`{}`) reads `{input}` before it is available",
                        stage.output()
                    )));
                }
            }
            if available.contains(&stage.output()) || stage.output() == self.target {
                return Err(Error::Infeasible(format!("channel `{}` is produced twice", stage.output())));
            }
            if let Stage::Model { model, .. } = stage {
                model.validate()?;
            }
            available.push(stage.output());
        }
        for input in self.final_model.input_quantities() {
            if !available.contains(&input) {
                return Err(Error::Infeasible(format!("final model reads unavailable `{input}`")));
            }
        }
        self.final_model.validate()
    }

    /// Channels produced by the stages, then the target.
    pub fn produced(&self) -> Vec<&str> {
        self.stages.iter().map(Stage::output).chain(std::iter::once(self.target.as_str())).collect()
    }

    pub fn n_models(&self) -> usize {
        1 + self.stages.iter().filter(|s| matches!(s, Stage::Model { .. })).count()
    }

    /// Runs the chain on one set of exogenous traces, every model starting
    /// from zeros.
    pub fn predict(&self, exogenous: &dyn ChannelSource) -> Result<IndexMap<String, Vec<f64>>> {
        self.predict_seeded(exogenous, None)
    }

    /// Like [`predict`](Self::predict), but models whose output has a trace
    /// in `seeds` start from its first values.
    pub fn predict_seeded(&self, exogenous: &dyn ChannelSource, seeds: Option<&dyn ChannelSource>) -> Result<IndexMap<String, Vec<f64>>> {
        let mut known: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut n_steps = None;
        for name in &self.exogenous {
            let v = exogenous.trace(name).ok_or_else(|| Error::MissingChannel(name.clone()))?;
            if let Some(step) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    channel: name.clone(),
                    step,
                });
            }
            if n_steps.is_some_and(|n| n != v.len()) {
                return Err(Error::Dimension {
                    expected: n_steps.unwrap_or(0),
                    actual: v.len(),
                });
            }
            n_steps = Some(v.len());
            known.insert(name.clone(), v.to_vec());
        }
        let n = n_steps
            .or_else(|| seeds.and_then(|s| s.trace(&self.target)).map(<[f64]>::len))
            .ok_or_else(|| Error::InvalidArgument("cannot infer the trace length".into()))?;

        let mut out = IndexMap::new();
        let run_model = |model: &FnarxModel, known: &BTreeMap<String, Vec<f64>>| -> Result<Vec<f64>> {
            let zeros = vec![0.0; model.t0_steps];
            let seed = seeds.and_then(|s| s.trace(&model.target)).unwrap_or(&zeros);
            model.forecast_steps(known, seed, n)
        };
        for stage in &self.stages {
            let values = match stage {
                Stage::Transform { transform, output } => {
                    let v = transform.apply(|c| known.get(c).map(Vec::as_slice).ok_or_else(|| Error::MissingChannel(c.to_string())), self.dt)?;
                    if let Some(step) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::NonFinite {
                            channel: output.clone(),
                            step,
                        });
                    }
                    v
                }
                Stage::Model { model, .. } => run_model(model, &known)?,
            };
            known.insert(stage.output().to_string(), values.clone());
            out.insert(stage.output().to_string(), values);
        }
        let y = run_model(&self.final_model, &known)?;
        out.insert(self.target.clone(), y);
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let seq: ModelSequence = serde_json::from_str(text).map_err(|e| Error::format("<sequence>", e.to_string()))?;
        if seq.schema_version != SEQUENCE_SCHEMA_VERSION {
            return Err(Error::format("<sequence>", format!("unsupported schema version {}", seq.schema_version)));
        }
        seq.validate()?;
        Ok(seq)
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
