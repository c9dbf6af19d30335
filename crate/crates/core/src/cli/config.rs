//! Run configuration read from TOML. Every field has a default taken from the
//! selected profile, so a file only needs the values it changes.
//!
//! ```toml
//! profile = "boucwen"
//! target = "y"
//! train = "data/train"
//! test = "data/test"
//! out = "runs/first"
//!
//! [roles]
//! z = "intermediate_response"
//!
//! [generate]
//! n = 600
//! seed = 7
//! n_train = 100
//!
//! [construct]
//! default_memory = 40
//! memories = { y = 40, z = 120 }
//! [construct.default_fit]
//! degree = 3
//! q_norm = 0.8
//! [construct.ranking]
//! rho_threshold = 0.2
//!
//! [sweep]
//! degrees = [2, 3]
//! q_norms = [0.8, 1.0]
//! memories = [{ y = 40, z = 120 }, { y = 20, z = 60 }]
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::boucwen::{benchmark_construct_config, BoucWenParams, GroundMotionParams, IntegratorConfig};
use crate::error::{Error, Result};
use crate::mnarx::ConstructConfig;
use crate::signals::{Dataset, QuantityRole};

pub const SNAPSHOT_FILE: &str = "resolved_config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Ground-motion driven hysteretic oscillator.
    #[default]
    Boucwen,
    /// Moving-average into autoregressive toy chain.
    Chain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub n: usize,
    pub seed: u64,
    /// Realizations kept for training when a generated set is split.
    pub n_train: Option<usize>,
    /// Samples per trace of the chain profile.
    pub n_steps: usize,
    pub ground_motion: GroundMotionParams,
    pub oscillator: BoucWenParams,
    pub integrator: IntegratorConfig,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            n: 600,
            seed: 7,
            n_train: None,
            n_steps: 200,
            ground_motion: GroundMotionParams::default(),
            oscillator: BoucWenParams::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    /// Start every model from the true initial values of the test trace.
    pub seed_from_truth: bool,
}

/// Hyperparameter grid; empty lists keep the configured value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub degrees: Vec<u32>,
    pub q_norms: Vec<f64>,
    pub memories: Vec<BTreeMap<String, usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint<'a> {
    pub degree: Option<u32>,
    pub q_norm: Option<f64>,
    pub memories: Option<&'a BTreeMap<String, usize>>,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<GridPoint<'_>> {
        fn axis<T: Copy>(v: &[T]) -> Vec<Option<T>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        }
        let memories: Vec<Option<&BTreeMap<String, usize>>> =
            if self.memories.is_empty() { vec![None] } else { self.memories.iter().map(Some).collect() };
        let mut out = Vec::new();
        for degree in axis(&self.degrees) {
            for q_norm in axis(&self.q_norms) {
                for m in &memories {
                    out.push(GridPoint {
                        degree,
                        q_norm,
                        memories: *m,
                    });
                }
            }
        }
        out
    }

    /// `base` with the grid point's values substituted for every model.
    pub fn apply(point: &GridPoint<'_>, base: &ConstructConfig) -> ConstructConfig {
        let mut c = base.clone();
        for fit in std::iter::once(&mut c.default_fit).chain(c.fits.values_mut()) {
            if let Some(d) = point.degree {
                fit.degree = d;
            }
            if let Some(q) = point.q_norm {
                fit.q_norm = q;
            }
        }
        if let Some(m) = point.memories {
            c.memories.extend(m.iter().map(|(k, v)| (k.clone(), *v)));
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub profile: Profile,
    pub target: String,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Role overrides applied to loaded datasets.
    pub roles: BTreeMap<String, QuantityRole>,
    pub workers: Option<usize>,
    pub generate: GenerateConfig,
    pub construct: ConstructConfig,
    pub evaluate: EvaluateConfig,
    pub sweep: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::for_profile(Profile::default())
    }
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (construct, evaluate, generate) = match profile {
            Profile::Boucwen => (benchmark_construct_config(), EvaluateConfig::default(), GenerateConfig::default()),
            Profile::Chain => {
                let c = ConstructConfig {
                    memories: [("y".to_string(), 2), ("z".to_string(), 3)].into(),
                    ..ConstructConfig::default()
                };
                let g = GenerateConfig {
                    n: 40,
                    n_train: Some(20),
                    ..GenerateConfig::default()
                };
                (c, EvaluateConfig { seed_from_truth: true }, g)
            }
        };
        RunConfig {
            profile,
            target: "y".into(),
            train: None,
            test: None,
            out: None,
            roles: BTreeMap::new(),
            workers: None,
            generate,
            construct,
            evaluate,
            sweep: SweepGrid::default(),
        }
    }

    /// Reads `path`, filling missing fields from the profile named in the
    /// file (or the default profile).
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let profile = match raw.get("profile") {
            Some(v) => Profile::deserialize(v.clone()).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            None => Profile::default(),
        };
        let base = toml::Table::try_from(RunConfig::for_profile(profile)).map_err(|e| Error::Config(e.to_string()))?;
        let merged = merge(base, raw);
        merged.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.construct.validate()?;
        if self.target.is_empty() {
            return Err(Error::Config("target must be named".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if self.generate.n == 0 {
            return Err(Error::Config("generate.n must be positive".into()));
        }
        if let Some(k) = self.generate.n_train {
            if k == 0 || k >= self.generate.n {
                return Err(Error::Config(format!("generate.n_train must lie in 1..{}", self.generate.n)));
            }
        }
        if self.sweep.degrees.contains(&0) || self.sweep.q_norms.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) {
            return Err(Error::Config("sweep degrees must be positive and q-norms in (0, 1]".into()));
        }
        Ok(())
    }

    /// Applies role overrides and checks that every configured quantity is a
    /// channel of `dataset`.
    pub fn prepare(&self, dataset: Dataset) -> Result<Dataset> {
        let mut dataset = dataset;
        for (name, role) in &self.roles {
            dataset = dataset.with_role(name, *role)?;
        }
        let role = dataset.role(&self.target)?;
        if role != QuantityRole::Target {
            return Err(Error::Config(format!("`{}` has role {role:?}, expected target", self.target)));
        }
        let mentioned = self
            .construct
            .memories
            .keys()
            .chain(self.construct.fits.keys())
            .chain(self.sweep.memories.iter().flat_map(|m| m.keys()));
        for name in mentioned {
            dataset.role(name)?;
        }
        Ok(dataset)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn write_snapshot(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(SNAPSHOT_FILE);
        fs::write(&path, self.to_toml()?).map_err(|e| Error::io(&path, e))
    }
}

fn merge(mut base: toml::Table, overlay: toml::Table) -> toml::Table {
    for (key, value) in overlay {
        let merged = match (base.remove(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !is_map_field(&key) => toml::Value::Table(merge(b, o)),
            (_, v) => v,
        };
        base.insert(key, merged);
    }
    base
}

/// Keyed maps replace the profile's map instead of extending it.
fn is_map_field(key: &str) -> bool {
    matches!(key, "memories" | "fits" | "roles" | "per_quantity")
}
