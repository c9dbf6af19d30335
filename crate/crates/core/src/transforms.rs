//! Registered deterministic transforms that produce auxiliary channels from
//! other channels. Every transform is causal: the output at step `t` only
//! reads inputs at steps `<= t`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::dct::dct2_modes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicKind {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    Identity { source: String },
    /// Cumulative trapezoidal integral starting at zero.
    CumulativeIntegral { source: String },
    /// Trailing mean over `window` samples (shorter at the start).
    MovingAverage { source: String, window: usize },
    /// One spatial DCT coefficient of a `rows x cols` grid of channels.
    DctMode { grid: Vec<Vec<String>>, mode: [usize; 2] },
    /// `sin(k θ)` or `cos(k θ)` of an angle channel wrapped to `[0, 2π)`.
    Harmonic {
        source: String,
        order: u32,
        function: HarmonicKind,
    },
}

impl TransformSpec {
    pub fn sources(&self) -> Vec<String> {
        match self {
            TransformSpec::Identity { source }
            | TransformSpec::CumulativeIntegral { source }
            | TransformSpec::MovingAverage { source, .. }
            | TransformSpec::Harmonic { source, .. } => vec![source.clone()],
            TransformSpec::DctMode { grid, .. } => grid.iter().flatten().cloned().collect(),
        }
    }

    /// Evaluates the transform. `lookup` resolves a channel name to its trace.
    pub fn apply<'a, F>(&self, lookup: F, dt: f64) -> Result<Vec<f64>>
    where
        F: Fn(&str) -> Result<&'a [f64]>,
    {
        match self {
            TransformSpec::Identity { source } => Ok(lookup(source)?.to_vec()),
            TransformSpec::CumulativeIntegral { source } => Ok(cumulative_trapezoid(lookup(source)?, dt)),
            TransformSpec::MovingAverage { source, window } => {
                if *window == 0 {
                    return Err(Error::InvalidArgument("moving average window must be >= 1".into()));
                }
                Ok(trailing_mean(lookup(source)?, *window))
            }
            TransformSpec::Harmonic { source, order, function } => {
                let k = f64::from(*order);
                Ok(lookup(source)?
                    .iter()
                    .map(|theta| {
                        let wrapped = theta.rem_euclid(TAU);
                        match function {
                            HarmonicKind::Sin => (k * wrapped).sin(),
                            HarmonicKind::Cos => (k * wrapped).cos(),
                        }
                    })
                    .collect())
            }
            TransformSpec::DctMode { grid, mode } => {
                let rows = grid.len();
                let cols = grid.first().map_or(0, Vec::len);
                if rows == 0 || cols == 0 || grid.iter().any(|r| r.len() != cols) {
                    return Err(Error::InvalidArgument("DCT grid must be a non-empty rectangle".into()));
                }
                let traces: Vec<&[f64]> = grid.iter().flatten().map(|c| lookup(c)).collect::<Result<_>>()?;
                let n = traces[0].len();
                let mut field = nalgebra::DMatrix::zeros(rows, cols);
                let mut out = Vec::with_capacity(n);
                for t in 0..n {
                    for (idx, trace) in traces.iter().enumerate() {
                        field[(idx / cols, idx % cols)] = trace[t];
                    }
                    out.push(dct2_modes(&field, &[(mode[0], mode[1])])?[0]);
                }
                Ok(out)
            }
        }
    }
}

pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * dt * (values[i - 1] + v);
        }
        out.push(acc);
    }
    out
}

fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}
