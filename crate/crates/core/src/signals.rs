//! Experimental designs: aligned, uniformly sampled multichannel time series
//! with a role attached to every channel.
//!
//! On disk a dataset is a directory holding `manifest.json` plus one
//! `real_<id>.csv` per realization (header = channel names, one row per time
//! step). Values are written with the shortest representation that parses
//! back to the same `f64`, so a save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::TransformSpec;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityRole {
    /// Driving signal known at prediction time.
    Exogenous,
    /// Deterministic transform of other channels; recomputable at prediction time.
    AuxiliaryTransformed,
    /// System response that needs its own surrogate before it can be used.
    IntermediateResponse,
    /// Quantity of interest.
    Target,
}

impl QuantityRole {
    /// Response roles get their own window memory and, when selected, their
    /// own model.
    pub fn is_response(self) -> bool {
        matches!(self, QuantityRole::IntermediateResponse | QuantityRole::Target)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub id: usize,
    pub channels: IndexMap<String, Vec<f64>>,
    pub n_steps: usize,
    pub dt: f64,
}

impl Realization {
    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }
}

/// Anything that can hand out a channel trace by name.
pub trait ChannelSource {
    fn trace(&self, name: &str) -> Option<&[f64]>;
}

impl ChannelSource for Realization {
    fn trace(&self, name: &str) -> Option<&[f64]> {
        self.channels.get(name).map(Vec::as_slice)
    }
}

impl ChannelSource for IndexMap<String, Vec<f64>> {
    fn trace(&self, name: &str) -> Option<&[f64]> {
        self.get(name).map(Vec::as_slice)
    }
}

impl ChannelSource for BTreeMap<String, Vec<f64>> {
    fn trace(&self, name: &str) -> Option<&[f64]> {
        self.get(name).map(Vec::as_slice)
    }
}

impl ChannelSource for std::collections::HashMap<String, Vec<f64>> {
    fn trace(&self, name: &str) -> Option<&[f64]> {
        self.get(name).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    realizations: Vec<Realization>,
    roles: IndexMap<String, QuantityRole>,
    transforms: BTreeMap<String, TransformSpec>,
    n_steps: usize,
    dt: f64,
    pub meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    dt: f64,
    n_steps: usize,
    channels: Vec<ManifestChannel>,
    #[serde(default)]
    transforms: BTreeMap<String, TransformSpec>,
    realizations: Vec<usize>,
    #[serde(default)]
    meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestChannel {
    name: String,
    role: QuantityRole,
}

impl Dataset {
    /// Builds and validates a dataset. `n_steps` and `dt` are only consulted
    /// when there are no realizations to take them from.
    pub fn new(
        realizations: Vec<Realization>,
        roles: IndexMap<String, QuantityRole>,
        transforms: BTreeMap<String, TransformSpec>,
        n_steps: usize,
        dt: f64,
    ) -> Result<Self> {
        let (n_steps, dt) = match realizations.first() {
            Some(r) => (r.n_steps, r.dt),
            None => (n_steps, dt),
        };
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Dataset(format!("time step must be positive, got {dt}")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &realizations {
            if !seen.insert(r.id) {
                return Err(Error::Dataset(format!("duplicate realization id {}", r.id)));
            }
            if r.n_steps != n_steps {
                return Err(Error::Dataset(format!(
                    "realization {} has {} steps, expected {n_steps}",
                    r.id, r.n_steps
                )));
            }
            if r.dt != dt {
                return Err(Error::Dataset(format!(
                    "realization {} has dt={}, expected {dt}",
                    r.id, r.dt
                )));
            }
            if r.channels.len() != roles.len() || r.channels.keys().zip(roles.keys()).any(|(a, b)| a != b) {
                return Err(Error::Dataset(format!(
                    "realization {} channel set differs from the declared channels",
                    r.id
                )));
            }
            for (name, values) in &r.channels {
                if values.len() != n_steps {
                    return Err(Error::Channel {
                        realization: r.id,
                        channel: name.clone(),
                        message: format!("{} samples, expected {n_steps}", values.len()),
                    });
                }
                if let Some(step) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Channel {
                        realization: r.id,
                        channel: name.clone(),
                        message: format!("non-finite value at step {step}"),
                    });
                }
            }
        }
        for (name, role) in &roles {
            if *role == QuantityRole::AuxiliaryTransformed && !transforms.contains_key(name) {
                return Err(Error::Dataset(format!(
                    "auxiliary channel `{name}` has no registered transform"
                )));
            }
        }
        for (name, spec) in &transforms {
            if !roles.contains_key(name) {
                return Err(Error::Dataset(format!("transform output `{name}` is not a channel")));
            }
            for source in spec.sources() {
                if !roles.contains_key(&source) {
                    return Err(Error::Dataset(format!(
                        "transform `{name}` reads unknown channel `{source}`"
                    )));
                }
            }
        }
        Ok(Dataset {
            realizations,
            roles,
            transforms,
            n_steps,
            dt,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, meta: BTreeMap<String, serde_json::Value>) -> Self {
        self.meta = meta;
        self
    }

    pub fn realizations(&self) -> &[Realization] {
        &self.realizations
    }

    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn roles(&self) -> &IndexMap<String, QuantityRole> {
        &self.roles
    }

    pub fn role(&self, channel: &str) -> Result<QuantityRole> {
        self.roles
            .get(channel)
            .copied()
            .ok_or_else(|| Error::MissingChannel(channel.to_string()))
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.roles.keys().map(String::as_str)
    }

    pub fn channels_with_role(&self, role: QuantityRole) -> Vec<String> {
        self.roles
            .iter()
            .filter(|(_, r)| **r == role)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn transforms(&self) -> &BTreeMap<String, TransformSpec> {
        &self.transforms
    }

    /// All traces of one channel, in realization order.
    pub fn channel_traces(&self, channel: &str) -> Result<Vec<&[f64]>> {
        self.realizations.iter().map(|r| r.channel(channel)).collect()
    }

    /// Returns a copy in which `channel` holds `values` (one trace per
    /// realization). The channel is appended with `role` if it does not exist;
    /// otherwise its role is overwritten.
    pub fn with_channel(&self, channel: &str, role: QuantityRole, values: Vec<Vec<f64>>) -> Result<Dataset> {
        if values.len() != self.realizations.len() {
            return Err(Error::Dimension {
                expected: self.realizations.len(),
                actual: values.len(),
            });
        }
        let mut out = self.clone();
        out.roles.insert(channel.to_string(), role);
        for (r, v) in out.realizations.iter_mut().zip(values) {
            if v.len() != r.n_steps {
                return Err(Error::Channel {
                    realization: r.id,
                    channel: channel.to_string(),
                    message: format!("{} samples, expected {}", v.len(), r.n_steps),
                });
            }
            r.channels.insert(channel.to_string(), v);
        }
        Ok(out)
    }

    /// Returns a copy with the role of an existing channel changed.
    pub fn with_role(&self, channel: &str, role: QuantityRole) -> Result<Dataset> {
        let current = self.role(channel)?;
        if (current == QuantityRole::AuxiliaryTransformed) != (role == QuantityRole::AuxiliaryTransformed) {
            return Err(Error::Dataset(format!(
                "`{channel}`: only registered transforms can be auxiliary"
            )));
        }
        let mut out = self.clone();
        out.roles.insert(channel.to_string(), role);
        Ok(out)
    }

    /// Registered transforms in an order where every transform comes after
    /// the transforms it reads from.
    pub fn transform_order(&self) -> Result<Vec<String>> {
        let mut done: Vec<String> = Vec::new();
        let mut pending: Vec<&String> = self.transforms.keys().collect();
        while !pending.is_empty() {
            let before = pending.len();
            pending.retain(|name| {
                let ready = self.transforms[*name]
                    .sources()
                    .iter()
                    .all(|s| !self.transforms.contains_key(s) || done.contains(s));
                if ready {
                    done.push((*name).clone());
                }
                !ready
            });
            if pending.len() == before {
                return Err(Error::Dataset("transforms form a cycle".into()));
            }
        }
        Ok(done)
    }

    /// Channels whose values depend on `channel` through registered
    /// transforms, in evaluation order.
    pub fn transform_dependents(&self, channel: &str) -> Result<Vec<String>> {
        let mut affected = vec![channel.to_string()];
        let mut out = Vec::new();
        for name in self.transform_order()? {
            if self.transforms[&name].sources().iter().any(|s| affected.contains(s)) {
                affected.push(name.clone());
                out.push(name);
            }
        }
        Ok(out)
    }

    /// Registers a transform and materializes its output as an auxiliary
    /// channel in every realization.
    pub fn with_transform(&self, name: &str, spec: TransformSpec) -> Result<Dataset> {
        for source in spec.sources() {
            if !self.roles.contains_key(&source) {
                return Err(Error::MissingChannel(source));
            }
        }
        let values = self
            .realizations
            .iter()
            .map(|r| spec.apply(|c| r.channel(c), self.dt))
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.with_channel(name, QuantityRole::AuxiliaryTransformed, values)?;
        out.transforms.insert(name.to_string(), spec);
        out.transform_order()?;
        Ok(out)
    }

    /// Recomputes every transform output that depends on `channel`.
    pub fn refresh_transforms(&mut self, channel: &str) -> Result<Vec<String>> {
        let order = self.transform_dependents(channel)?;
        for name in &order {
            let spec = self.transforms[name].clone();
            let dt = self.dt;
            for r in &mut self.realizations {
                let v = spec.apply(|c| r.channel(c), dt)?;
                r.channels.insert(name.clone(), v);
            }
        }
        Ok(order)
    }

    /// Realizations at the given positions, in the given order.
    pub fn subset(&self, positions: &[usize]) -> Result<Dataset> {
        let mut realizations = Vec::with_capacity(positions.len());
        for &p in positions {
            let r = self
                .realizations
                .get(p)
                .ok_or_else(|| Error::InvalidArgument(format!("realization position {p} out of range")))?;
            realizations.push(r.clone());
        }
        let mut out = self.clone();
        out.realizations = realizations;
        Ok(out)
    }
}

/// Reads a dataset directory written by [`save_dataset`].
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let dir = path.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported schema version {}", manifest.schema_version),
        ));
    }
    let roles: IndexMap<String, QuantityRole> =
        manifest.channels.iter().map(|c| (c.name.clone(), c.role)).collect();
    if roles.len() != manifest.channels.len() {
        return Err(Error::format(&manifest_path, "duplicate channel names"));
    }

    let mut realizations = Vec::with_capacity(manifest.realizations.len());
    for &id in &manifest.realizations {
        let mut channels: IndexMap<String, Vec<f64>> = roles
            .keys()
            .map(|k| (k.clone(), Vec::with_capacity(manifest.n_steps)))
            .collect();
        if !roles.is_empty() {
            let file = dir.join(format!("real_{id}.csv"));
            let mut reader = csv::Reader::from_path(&file).map_err(|e| Error::format(&file, e.to_string()))?;
            let header = reader.headers().map_err(|e| Error::format(&file, e.to_string()))?.clone();
            let mut columns = Vec::with_capacity(header.len());
            for name in header.iter() {
                let idx = roles
                    .get_index_of(name)
                    .ok_or_else(|| Error::format(&file, format!("unexpected column `{name}`")))?;
                columns.push(idx);
            }
            if columns.len() != roles.len() {
                return Err(Error::format(&file, "column set does not match the manifest"));
            }
            for (row_no, record) in reader.records().enumerate() {
                let record = record.map_err(|e| Error::format(&file, e.to_string()))?;
                if record.len() != columns.len() {
                    return Err(Error::format(&file, format!("row {row_no} has {} fields", record.len())));
                }
                for (field, &idx) in record.iter().zip(&columns) {
                    let value: f64 = field.trim().parse().map_err(|_| Error::Channel {
                        realization: id,
                        channel: roles.get_index(idx).unwrap().0.clone(),
                        message: format!("unparsable value `{field}` at step {row_no}"),
                    })?;
                    channels[idx].push(value);
                }
            }
        }
        let n_steps = if roles.is_empty() {
            manifest.n_steps
        } else {
            channels.values().map(Vec::len).next().unwrap_or(0)
        };
        for (name, values) in &channels {
            if values.len() != manifest.n_steps {
                return Err(Error::Channel {
                    realization: id,
                    channel: name.clone(),
                    message: format!("{} rows, manifest declares {}", values.len(), manifest.n_steps),
                });
            }
        }
        realizations.push(Realization {
            id,
            channels,
            n_steps,
            dt: manifest.dt,
        });
    }
    Ok(Dataset::new(realizations, roles, manifest.transforms, manifest.n_steps, manifest.dt)?.with_meta(manifest.meta))
}

/// Writes `dataset` as a manifest plus one CSV per realization.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let dir = path.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        dt: dataset.dt,
        n_steps: dataset.n_steps,
        channels: dataset
            .roles
            .iter()
            .map(|(name, role)| ManifestChannel {
                name: name.clone(),
                role: *role,
            })
            .collect(),
        transforms: dataset.transforms.clone(),
        realizations: dataset.realizations.iter().map(|r| r.id).collect(),
        meta: dataset.meta.clone(),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text + "\n").map_err(|e| Error::io(&manifest_path, e))?;

    if dataset.roles.is_empty() {
        return Ok(());
    }
    for r in &dataset.realizations {
        let file = dir.join(format!("real_{}.csv", r.id));
        let mut writer = csv::Writer::from_path(&file).map_err(|e| Error::format(&file, e.to_string()))?;
        let csv_err = |e: csv::Error| Error::format(&file, e.to_string());
        writer.write_record(r.channels.keys()).map_err(csv_err)?;
        let mut row = Vec::with_capacity(r.channels.len());
        for step in 0..r.n_steps {
            row.clear();
            row.extend(r.channels.values().map(|v| v[step].to_string()));
            writer.write_record(&row).map_err(csv_err)?;
        }
        writer.flush().map_err(|e| Error::io(&file, e))?;
    }
    Ok(())
}

/// Random disjoint partition into `n_train` and `len - n_train` realizations.
/// Both parts keep the original realization order.
pub fn split_dataset(dataset: &Dataset, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "n_train must lie in 1..{n}, got {n_train}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train)?, dataset.subset(&test)?))
}
