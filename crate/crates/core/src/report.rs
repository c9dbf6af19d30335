//! Test-set evaluation of a model sequence and plot-ready CSV output.
//!
//! [`export_report`] writes:
//!
//! - `metrics.csv`: `channel, trace_id, epsilon, rmse, peak_diff, status`,
//!   one row per modeled channel and test trace. `status` is `ok`, `aborted`
//!   (prediction failed, metrics empty) or `degenerate` (constant truth, so
//!   the normalized error is unbounded).
//! - `hist_<channel>.csv`: `lower, upper, count` of the error histogram.
//! - `trace_<id>.csv`: `time` followed by `<channel>` and `<channel>_pred`
//!   columns, for every best or worst trace.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fnarx::{rmse, trace_error};
use crate::mnarx::{ModelSequence, Stage};
use crate::signals::{Dataset, Realization};

pub const MIN_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Ok,
    Aborted,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub channel: String,
    pub trace_id: usize,
    pub epsilon: Option<f64>,
    pub rmse: Option<f64>,
    /// `max|ŷ| - max|y|`.
    pub peak_diff: Option<f64>,
    pub status: TraceStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Freedman-Diaconis bin width, with at least [`MIN_BINS`] bins.
    pub fn freedman_diaconis(values: &[f64]) -> Histogram {
        if values.is_empty() {
            return Histogram {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (lo, hi) = (v[0], v[v.len() - 1]);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (i, f) = (pos.floor() as usize, pos.fract());
            v[i] + f * (v[(i + 1).min(v.len() - 1)] - v[i])
        };
        let width = 2.0 * (q(0.75) - q(0.25)) / (v.len() as f64).cbrt();
        let bins = if width > 0.0 {
            (((hi - lo) / width).ceil() as usize).max(MIN_BINS)
        } else {
            MIN_BINS
        };
        let step = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + i as f64 * step }).collect();
        let mut counts = vec![0; bins];
        for x in &v {
            let b = (((x - lo) / step).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub rows: Vec<MetricRow>,
    pub histogram: Histogram,
    /// Trace ids with the smallest and largest finite error.
    pub best: Option<usize>,
    pub worst: Option<usize>,
}

impl ChannelReport {
    /// Finite errors of successful traces, in trace order.
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.status == TraceStatus::Ok).filter_map(|r| r.epsilon).collect()
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status != TraceStatus::Ok).count()
    }

    pub fn peak_diffs(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.peak_diff).collect()
    }
}

/// True and predicted series of one test trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub dt: f64,
    pub channels: IndexMap<String, (Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub channels: IndexMap<String, ChannelReport>,
    /// Series of every best or worst trace.
    pub extremes: BTreeMap<usize, TraceSeries>,
    /// Trace ids whose prediction failed, with the reason.
    pub aborted: Vec<(usize, String)>,
}

impl EvaluationReport {
    pub fn channel(&self, name: &str) -> Option<&ChannelReport> {
        self.channels.get(name)
    }
}

/// Channels a sequence models: every model stage output, then the target.
pub fn modeled_channels(sequence: &ModelSequence) -> Vec<String> {
    sequence
        .stages
        .iter()
        .filter_map(|s| match s {
            Stage::Model { output, .. } => Some(output.clone()),
            Stage::Transform { .. } => None,
        })
        .chain(std::iter::once(sequence.target.clone()))
        .collect()
}

fn peak(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Predicts every test trace and scores each modeled channel. When
/// `seed_from_truth` is set, models start from the true initial values
/// instead of zeros.
pub fn evaluate_sequence(sequence: &ModelSequence, test: &Dataset, seed_from_truth: bool) -> Result<EvaluationReport> {
    let channels = modeled_channels(sequence);
    for c in channels.iter().chain(&sequence.exogenous) {
        test.role(c)?;
    }
    let predict = |r: &Realization| {
        if seed_from_truth {
            sequence.predict_seeded(r, Some(r))
        } else {
            sequence.predict(r)
        }
    };
    let outcomes: Vec<Result<IndexMap<String, Vec<f64>>>> = test.realizations().par_iter().map(predict).collect();

    let mut report = EvaluationReport {
        channels: IndexMap::new(),
        extremes: BTreeMap::new(),
        aborted: Vec::new(),
    };
    for (r, outcome) in test.realizations().iter().zip(&outcomes) {
        if let Err(e) = outcome {
            log::warn!("trace {}: prediction aborted: {e}", r.id);
            report.aborted.push((r.id, e.to_string()));
        }
    }
    for channel in &channels {
        let mut rows = Vec::with_capacity(test.len());
        for (r, outcome) in test.realizations().iter().zip(&outcomes) {
            let row = match outcome {
                Ok(pred) => {
                    let truth = r.channel(channel)?;
                    let p = &pred[channel];
                    let eps = trace_error(truth, p)?;
                    MetricRow {
                        channel: channel.clone(),
                        trace_id: r.id,
                        epsilon: eps.is_finite().then_some(eps),
                        rmse: Some(rmse(truth, p)?),
                        peak_diff: Some(peak(p) - peak(truth)),
                        status: if eps.is_finite() { TraceStatus::Ok } else { TraceStatus::Degenerate },
                    }
                }
                Err(_) => MetricRow {
                    channel: channel.clone(),
                    trace_id: r.id,
                    epsilon: None,
                    rmse: None,
                    peak_diff: None,
                    status: TraceStatus::Aborted,
                },
            };
            rows.push(row);
        }
        let ok: Vec<(usize, f64)> = rows
            .iter()
            .filter(|r| r.status == TraceStatus::Ok)
            .filter_map(|r| r.epsilon.map(|e| (r.trace_id, e)))
            .collect();
        let best = ok.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|p| p.0);
        let worst = ok.iter().max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0))).map(|p| p.0);
        let histogram = Histogram::freedman_diaconis(&ok.iter().map(|p| p.1).collect::<Vec<_>>());
        report.channels.insert(
            channel.clone(),
            ChannelReport {
                rows,
                histogram,
                best,
                worst,
            },
        );
    }

    let ids: Vec<usize> = report.channels.values().flat_map(|c| [c.best, c.worst]).flatten().collect();
    for (r, outcome) in test.realizations().iter().zip(&outcomes) {
        if !ids.contains(&r.id) {
            continue;
        }
        let Ok(pred) = outcome else { continue };
        let mut series = IndexMap::new();
        for c in &channels {
            series.insert(c.clone(), (r.channel(c)?.to_vec(), pred[c].clone()));
        }
        report.extremes.insert(r.id, TraceSeries { dt: r.dt, channels: series });
    }
    Ok(report)
}

fn csv_error(path: &Path, e: impl ToString) -> Error {
    Error::format(path, e.to_string())
}

/// Writes the report into `dir`, creating it if needed.
pub fn export_report(report: &EvaluationReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record(["channel", "trace_id", "epsilon", "rmse", "peak_diff", "status"])
        .map_err(|e| csv_error(&path, e))?;
    for c in report.channels.values() {
        for r in &c.rows {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            let status = match r.status {
                TraceStatus::Ok => "ok",
                TraceStatus::Aborted => "aborted",
                TraceStatus::Degenerate => "degenerate",
            };
            w.write_record([r.channel.clone(), r.trace_id.to_string(), opt(r.epsilon), opt(r.rmse), opt(r.peak_diff), status.to_string()])
                .map_err(|e| csv_error(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    for (name, c) in &report.channels {
        let path = dir.join(format!("hist_{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        w.write_record(["lower", "upper", "count"]).map_err(|e| csv_error(&path, e))?;
        for (i, n) in c.histogram.counts.iter().enumerate() {
            w.write_record([c.histogram.edges[i].to_string(), c.histogram.edges[i + 1].to_string(), n.to_string()])
                .map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    for (id, series) in &report.extremes {
        let path = dir.join(format!("trace_{id}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        let mut header = vec!["time".to_string()];
        for c in series.channels.keys() {
            header.push(c.clone());
            header.push(format!("{c}_pred"));
        }
        w.write_record(&header).map_err(|e| csv_error(&path, e))?;
        let n = series.channels.values().next().map_or(0, |(t, _)| t.len());
        for i in 0..n {
            let mut row = vec![(i as f64 * series.dt).to_string()];
            for (truth, pred) in series.channels.values() {
                row.push(truth[i].to_string());
                row.push(pred[i].to_string());
            }
            w.write_record(&row).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Parses a `metrics.csv` written by [`export_report`].
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: usize, eps: f64) -> MetricRow {
        MetricRow {
            channel: "y".into(),
            trace_id: id,
            epsilon: Some(eps),
            rmse: Some(eps.sqrt()),
            peak_diff: Some(-0.25),
            status: TraceStatus::Ok,
        }
    }

    #[test]
    fn histogram_mass_and_bins() {
        let values: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
        let h = Histogram::freedman_diaconis(&values);
        assert_eq!(h.total(), 1000);
        assert!(h.counts.len() >= MIN_BINS);
        assert_eq!(h.edges.len(), h.counts.len() + 1);
        let flat = Histogram::freedman_diaconis(&[2.0; 5]);
        assert_eq!((flat.total(), flat.counts.len()), (5, MIN_BINS));
        assert!(Histogram::freedman_diaconis(&[]).counts.is_empty());
    }

    #[test]
    fn metrics_round_trip() {
        let mut rows = vec![row(3, 0.125), row(8, 0.5)];
        rows.push(MetricRow {
            channel: "y".into(),
            trace_id: 9,
            epsilon: None,
            rmse: None,
            peak_diff: None,
            status: TraceStatus::Aborted,
        });
        let report = EvaluationReport {
            channels: [(
                "y".to_string(),
                ChannelReport {
                    histogram: Histogram::freedman_diaconis(&[0.125, 0.5]),
                    rows: rows.clone(),
                    best: Some(3),
                    worst: Some(8),
                },
            )]
            .into_iter()
            .collect(),
            extremes: BTreeMap::new(),
            aborted: vec![(9, "boom".into())],
        };
        let dir = tempfile::tempdir().unwrap();
        export_report(&report, dir.path()).unwrap();
        assert_eq!(read_metrics(dir.path().join("metrics.csv")).unwrap(), rows);
        let hist = fs::read_to_string(dir.path().join("hist_y.csv")).unwrap();
        assert_eq!(hist.lines().count(), 1 + MIN_BINS);

        let empty = EvaluationReport {
            channels: IndexMap::new(),
            extremes: BTreeMap::new(),
            aborted: Vec::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        export_report(&empty, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(text, "channel,trace_id,epsilon,rmse,peak_diff,status\n");
    }
}
