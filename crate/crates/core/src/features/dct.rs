//! Spatial 2D cosine transform used to compress gridded inputs into a few
//! auxiliary channels.
//!
//! A `rows x cols` field `f` is written as
//!
//! ```text
//! f(p, r) = Σ_i Σ_j η(i, j) cos[π/rows (p + ½) i] cos[π/cols (r + ½) j]
//! ```
//!
//! and [`dct2_modes`] returns the coefficients `η(i, j)` of that expansion
//! (an unnormalized DCT-II/DCT-III pair). With every mode retained the sum
//! reproduces the field exactly.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn basis(n: usize, mode: usize, point: usize) -> f64 {
    (PI / n as f64 * (point as f64 + 0.5) * mode as f64).cos()
}

fn weight(n: usize, mode: usize) -> f64 {
    if mode == 0 {
        1.0 / n as f64
    } else {
        2.0 / n as f64
    }
}

/// Coefficients `η(i, j)` for each requested `(i, j)` mode, in request order.
pub fn dct2_modes(field: &DMatrix<f64>, modes: &[(usize, usize)]) -> Result<Vec<f64>> {
    let (rows, cols) = field.shape();
    modes
        .iter()
        .map(|&(i, j)| {
            if i >= rows || j >= cols {
                return Err(Error::InvalidArgument(format!(
                    "DCT mode ({i}, {j}) outside a {rows}x{cols} field"
                )));
            }
            let mut acc = 0.0;
            for p in 0..rows {
                let bp = basis(rows, i, p);
                for r in 0..cols {
                    acc += field[(p, r)] * bp * basis(cols, j, r);
                }
            }
            Ok(acc * weight(rows, i) * weight(cols, j))
        })
        .collect()
}

/// Evaluates the double cosine sum for a set of retained modes.
pub fn dct2_reconstruct(rows: usize, cols: usize, modes: &[(usize, usize)], coefficients: &[f64]) -> Result<DMatrix<f64>> {
    if modes.len() != coefficients.len() {
        return Err(Error::Dimension {
            expected: modes.len(),
            actual: coefficients.len(),
        });
    }
    let mut field = DMatrix::zeros(rows, cols);
    for (&(i, j), &eta) in modes.iter().zip(coefficients) {
        if i >= rows || j >= cols {
            return Err(Error::InvalidArgument(format!("DCT mode ({i}, {j}) out of range")));
        }
        for p in 0..rows {
            for r in 0..cols {
                field[(p, r)] += eta * basis(rows, i, p) * basis(cols, j, r);
            }
        }
    }
    Ok(field)
}

/// Every `(i, j)` with `i < rows`, `j < cols`, row-major.
pub fn all_modes(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect()
}
