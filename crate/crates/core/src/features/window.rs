use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Lags `0 ..= memory - 1`: the current sample comes first.
    IncludeCurrent,
    /// Lags `1 ..= memory`: used for the autoregressive window of a target.
    PastOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub quantity: String,
    pub memory_steps: usize,
    pub alignment: Alignment,
}

impl WindowSpec {
    pub fn new(quantity: impl Into<String>, memory_steps: usize, alignment: Alignment) -> Self {
        WindowSpec {
            quantity: quantity.into(),
            memory_steps,
            alignment,
        }
    }

    /// Contribution of this window to `t0`, the first step with a full feature row.
    pub fn horizon(&self) -> usize {
        self.memory_steps
    }

    /// First step at which the window is fully populated.
    pub fn first_valid_step(&self) -> usize {
        match self.alignment {
            Alignment::IncludeCurrent => self.memory_steps.saturating_sub(1),
            Alignment::PastOnly => self.memory_steps,
        }
    }

    fn lag_offset(&self) -> usize {
        match self.alignment {
            Alignment::IncludeCurrent => 0,
            Alignment::PastOnly => 1,
        }
    }

    /// Writes the window ending at `step` into `out` (most recent lag first).
    /// `step` must be at least [`first_valid_step`](Self::first_valid_step).
    #[inline]
    pub fn fill(&self, signal: &[f64], step: usize, out: &mut [f64]) {
        let newest = step - self.lag_offset();
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = signal[newest - k];
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.memory_steps == 0 {
            return Err(Error::InvalidArgument(format!(
                "window for `{}` needs memory_steps >= 1",
                self.quantity
            )));
        }
        Ok(())
    }
}

/// Stacks every fully populated window of `signal`, one row per step starting
/// at [`WindowSpec::first_valid_step`].
pub fn build_lagged_windows(signal: &[f64], spec: &WindowSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let first = spec.first_valid_step();
    if signal.len() <= first {
        return Err(Error::InvalidArgument(format!(
            "signal of length {} is shorter than the window horizon {}",
            signal.len(),
            spec.horizon()
        )));
    }
    let rows = signal.len() - first;
    let m = spec.memory_steps;
    let mut buf = vec![0.0; m];
    let mut out = DMatrix::zeros(rows, m);
    for (row, step) in (first..signal.len()).enumerate() {
        spec.fill(signal, step, &mut buf);
        for (c, v) in buf.iter().enumerate() {
            out[(row, c)] = *v;
        }
    }
    Ok(out)
}
