use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized mean squared error of one trace:
/// `(1/N) Σ (y - ŷ)² / Var(y)` with the population variance.
///
/// A constant truth gives 0 on an exact match and `f64::INFINITY` otherwise.
pub fn trace_error(truth: &[f64], prediction: &[f64]) -> Result<f64> {
    check_lengths(truth, prediction)?;
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let var = truth.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mse = truth.iter().zip(prediction).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        Ok(mse / var)
    } else if mse == 0.0 {
        Ok(0.0)
    } else {
        Ok(f64::INFINITY)
    }
}

pub fn rmse(truth: &[f64], prediction: &[f64]) -> Result<f64> {
    check_lengths(truth, prediction)?;
    let mse = truth.iter().zip(prediction).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64;
    Ok(mse.sqrt())
}

/// Arithmetic mean of per-trace errors. Infinite entries (constant truth that
/// was not matched) are left out with a warning; if nothing is left the
/// result is infinite.
pub fn mean_error(per_trace: &[f64]) -> Result<f64> {
    if per_trace.is_empty() {
        return Err(Error::InvalidArgument("mean of an empty error list".into()));
    }
    let finite: Vec<f64> = per_trace.iter().copied().filter(|e| e.is_finite()).collect();
    if finite.len() < per_trace.len() {
        log::warn!(
            "{} of {} traces have an unbounded error; left out of the mean",
            per_trace.len() - finite.len(),
            per_trace.len()
        );
    }
    if finite.is_empty() {
        return Ok(f64::INFINITY);
    }
    Ok(finite.iter().sum::<f64>() / finite.len() as f64)
}

fn check_lengths(truth: &[f64], prediction: &[f64]) -> Result<()> {
    if truth.len() != prediction.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            actual: prediction.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub per_trace: Vec<f64>,
    pub mean: f64,
    pub rmse_per_trace: Vec<f64>,
}

impl ErrorMetrics {
    pub fn compute<'a>(pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>) -> Result<Self> {
        let mut per_trace = Vec::new();
        let mut rmse_per_trace = Vec::new();
        for (truth, pred) in pairs {
            per_trace.push(trace_error(truth, pred)?);
            rmse_per_trace.push(rmse(truth, pred)?);
        }
        let mean = mean_error(&per_trace)?;
        Ok(ErrorMetrics {
            per_trace,
            mean,
            rmse_per_trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_error_cases() {
        assert_eq!(trace_error(&[1.0, 3.0, 2.0], &[1.0, 3.0, 2.0]).unwrap(), 0.0);
        assert_eq!(trace_error(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(trace_error(&[4.0, 4.0], &[4.0, 4.0]).unwrap(), 0.0);
        assert!(trace_error(&[4.0, 4.0], &[4.0, 4.5]).unwrap().is_infinite());
        assert!(trace_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 2f64.sqrt());
    }

    #[test]
    fn mean_cases() {
        assert_eq!(mean_error(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((mean_error(&[0.1, 0.3]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(mean_error(&[0.5, f64::INFINITY]).unwrap(), 0.5);
        assert!(mean_error(&[]).is_err());
    }

    #[test]
    fn metrics_bundle() {
        let t = [0.0, 2.0];
        let p = [0.0, 0.0];
        let m = ErrorMetrics::compute([(&t[..], &p[..]), (&t[..], &t[..])]).unwrap();
        assert_eq!(m.per_trace, vec![2.0, 0.0]);
        assert_eq!(m.mean, 1.0);
        assert_eq!(m.rmse_per_trace[0], 2f64.sqrt());
    }
}
