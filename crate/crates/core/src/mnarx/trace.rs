use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceAction {
    /// The feature was added to the model and the error dropped.
    Accepted,
    /// The feature was tried and set aside.
    Rejected,
    /// The feature's source had no model yet; construction recursed into it.
    Recursed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub depth: usize,
    pub target: String,
    pub quantity: String,
    pub component: usize,
    pub rho: f64,
    /// Mean forecast error of the candidate model; empty for recursions.
    pub mean_error: Option<f64>,
    pub action: TraceAction,
}

impl TraceRecord {
    pub fn accepted(&self) -> bool {
        self.action == TraceAction::Accepted
    }

    pub fn label(&self) -> String {
        format!("{}[{}]", self.quantity, self.component + 1)
    }
}

/// Every ranking decision taken during construction, in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlgoTrace {
    pub records: Vec<TraceRecord>,
}

impl AlgoTrace {
    pub fn push(&mut self, record: TraceRecord) {
        log::info!(
            "[{}] depth {} target `{}`: {} rho={:+.3} error={} {:?}",
            record.iteration,
            record.depth,
            record.target,
            record.label(),
            record.rho,
            record.mean_error.map_or("-".to_string(), |e| format!("{e:.4e}")),
            record.action
        );
        self.records.push(record);
    }

    pub fn for_target<'a>(&'a self, target: &'a str) -> impl Iterator<Item = &'a TraceRecord> + 'a {
        self.records.iter().filter(move |r| r.target == target)
    }

    pub fn recursions(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.action == TraceAction::Recursed)
    }

    /// Errors of accepted steps fall strictly, per target.
    pub fn accepted_errors_decrease(&self) -> bool {
        let mut targets: Vec<&str> = self.records.iter().map(|r| r.target.as_str()).collect();
        targets.dedup();
        targets.iter().all(|t| {
            let errs: Vec<f64> = self.for_target(t).filter(|r| r.accepted()).filter_map(|r| r.mean_error).collect();
            errs.windows(2).all(|w| w[1] < w[0])
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_record(["iteration", "depth", "target", "quantity", "component", "label", "rho", "mean_error", "accepted", "action"])
            .map_err(|e| Error::format(path, e.to_string()))?;
        for r in &self.records {
            let action = match r.action {
                TraceAction::Accepted => "accepted",
                TraceAction::Rejected => "rejected",
                TraceAction::Recursed => "recursed",
            };
            w.write_record([
                r.iteration.to_string(),
                r.depth.to_string(),
                r.target.clone(),
                r.quantity.clone(),
                (r.component + 1).to_string(),
                r.label(),
                r.rho.to_string(),
                r.mean_error.map_or(String::new(), |e| e.to_string()),
                r.accepted().to_string(),
                action.to_string(),
            ])
            .map_err(|e| Error::format(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
