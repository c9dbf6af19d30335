//! PCA of sliding windows: eigen-decomposition of the pooled window
//! covariance, with components ordered by decreasing eigenvalue.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::window::WindowSpec;
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
const RELATIVE_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalComponent {
    /// Position in the full eigenvalue ordering (0 = largest variance).
    pub index: usize,
    pub eigenvalue: f64,
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    pub spec: WindowSpec,
    pub mean: Vec<f64>,
    pub components: Vec<PrincipalComponent>,
    /// Fewer components than requested were available.
    #[serde(default)]
    pub rank_limited: bool,
    /// No direction carries variance.
    #[serde(default)]
    pub degenerate: bool,
}

impl FeatureExtractor {
    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Columns are the retained principal directions.
    pub fn projection(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.width(), self.components.len(), |r, c| self.components[c].direction[r])
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.eigenvalue).collect()
    }

    /// Keeps only the listed components (by [`PrincipalComponent::index`]).
    pub fn restricted_to(&self, indices: &[usize]) -> FeatureExtractor {
        FeatureExtractor {
            components: self
                .components
                .iter()
                .filter(|c| indices.contains(&c.index))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    pub fn component(&self, index: usize) -> Option<&PrincipalComponent> {
        self.components.iter().find(|c| c.index == index)
    }

    /// Projection of one raw window onto one component.
    #[inline]
    pub fn project_one(&self, window: &[f64], component: &PrincipalComponent) -> f64 {
        window
            .iter()
            .zip(&self.mean)
            .zip(&component.direction)
            .map(|((w, m), v)| (w - m) * v)
            .sum()
    }
}

/// Fits PCA on a window matrix (one window per row).
pub fn fit_pca(spec: &WindowSpec, windows: &DMatrix<f64>, n_components: usize) -> Result<FeatureExtractor> {
    let (rows, width) = windows.shape();
    if rows < 2 {
        return Err(Error::InvalidArgument("PCA needs at least two windows".into()));
    }
    if width != spec.memory_steps {
        return Err(Error::Dimension {
            expected: spec.memory_steps,
            actual: width,
        });
    }
    if n_components > width {
        return Err(Error::InvalidArgument(format!(
            "requested {n_components} components from windows of width {width}"
        )));
    }
    let mean: Vec<f64> = windows.column_iter().map(|c| c.sum() / rows as f64).collect();
    let mut centered = windows.clone();
    for (mut col, m) in centered.column_iter_mut().zip(&mean) {
        col.add_scalar_mut(-m);
    }
    let cov = centered.tr_mul(&centered) / rows as f64;
    Ok(from_covariance(spec.clone(), mean, cov, n_components))
}

/// Builds an extractor from an already accumulated covariance matrix.
pub(crate) fn from_covariance(spec: WindowSpec, mean: Vec<f64>, cov: DMatrix<f64>, n_components: usize) -> FeatureExtractor {
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let largest = order.first().map_or(0.0, |&i| eig.eigenvalues[i]);
    let scale = 1.0 + mean.iter().fold(0.0f64, |a, m| a.max(m * m));
    let degenerate = !(largest > 1e-24 * scale);

    let mut components = Vec::new();
    if !degenerate {
        for (rank, &i) in order.iter().enumerate().take(n_components) {
            let lambda = eig.eigenvalues[i];
            if lambda <= RELATIVE_RANK_TOL * largest {
                break;
            }
            let mut direction: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let pivot = direction
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bv), (k, v)| if v.abs() > bv { (k, v.abs()) } else { (bi, bv) })
                .0;
            if direction[pivot] < 0.0 {
                direction.iter_mut().for_each(|v| *v = -*v);
            }
            components.push(PrincipalComponent {
                index: rank,
                eigenvalue: lambda,
                direction,
            });
        }
    }
    let rank_limited = components.len() < n_components;
    if rank_limited {
        log::debug!(
            "PCA for `{}`: {} of {} requested components carry variance",
            spec.quantity,
            components.len(),
            n_components
        );
    }
    FeatureExtractor {
        spec,
        mean,
        components,
        rank_limited,
        degenerate,
    }
}

/// Projects each row of `windows` onto the retained components.
pub fn transform(extractor: &FeatureExtractor, windows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if windows.ncols() != extractor.width() {
        return Err(Error::Dimension {
            expected: extractor.width(),
            actual: windows.ncols(),
        });
    }
    let mut centered = windows.clone();
    for (mut col, m) in centered.column_iter_mut().zip(&extractor.mean) {
        col.add_scalar_mut(-m);
    }
    Ok(centered * extractor.projection())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::window::Alignment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(m: usize) -> WindowSpec {
        WindowSpec::new("x", m, Alignment::IncludeCurrent)
    }

    #[test]
    fn single_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
        let w = DMatrix::from_fn(200, 2, |r, c| if c == 0 { a[r] } else { 0.0 });
        let ex = fit_pca(&spec(2), &w, 2).unwrap();
        let mean = a.iter().sum::<f64>() / 200.0;
        let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 200.0;
        assert_eq!(ex.components.len(), 1);
        assert!(ex.rank_limited);
        assert!((ex.components[0].eigenvalue - var).abs() < 1e-12);
        assert!((ex.components[0].direction[0] - 1.0).abs() < 1e-12);
        assert!(ex.components[0].direction[1].abs() < 1e-12);
    }

    #[test]
    fn analytic_two_by_two() {
        // Rows (±a, ±b) patterns with sample covariance [[2,1],[1,2]]:
        // eigenpairs 3 -> (1,1)/√2, 1 -> (1,-1)/√2.
        let s3 = 3f64.sqrt();
        let pts = [(s3, s3), (-s3, -s3), (1.0, -1.0), (-1.0, 1.0)];
        let w = DMatrix::from_fn(4, 2, |r, c| if c == 0 { pts[r].0 } else { pts[r].1 });
        let centered_cov = {
            let mut c = [[0.0; 2]; 2];
            for p in &pts {
                let v = [p.0, p.1];
                for i in 0..2 {
                    for j in 0..2 {
                        c[i][j] += v[i] * v[j] / 4.0;
                    }
                }
            }
            c
        };
        assert!((centered_cov[0][0] - 2.0).abs() < 1e-12 && (centered_cov[0][1] - 1.0).abs() < 1e-12);
        let ex = fit_pca(&spec(2), &w, 2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((ex.components[0].eigenvalue - 3.0).abs() < 1e-12);
        assert!((ex.components[1].eigenvalue - 1.0).abs() < 1e-12);
        let d0 = &ex.components[0].direction;
        let d1 = &ex.components[1].direction;
        assert!((d0[0] - r).abs() < 1e-12 && (d0[1] - r).abs() < 1e-12);
        // Tie in magnitude: the first entry is the pivot and is made positive.
        assert!((d1[0] - r).abs() < 1e-12 && (d1[1] + r).abs() < 1e-12);
    }

    #[test]
    fn identical_rows_degenerate() {
        let w = DMatrix::from_fn(10, 3, |_, c| c as f64 + 0.3);
        let ex = fit_pca(&spec(3), &w, 3).unwrap();
        assert!(ex.degenerate);
        assert!(ex.components.is_empty());
    }

    #[test]
    fn transform_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = DMatrix::from_fn(50, 3, |_, _| rng.random_range(-1.0..1.0));
        let ex = fit_pca(&spec(3), &w, 3).unwrap();
        let mean_row = DMatrix::from_row_slice(1, 3, &ex.mean);
        assert!(transform(&ex, &mean_row).unwrap().iter().all(|v| v.abs() < 1e-14));

        // Full-rank projection: reconstruction is exact.
        let xi = transform(&ex, &w).unwrap();
        let back = &xi * ex.projection().transpose();
        for r in 0..50 {
            for c in 0..3 {
                assert!((back[(r, c)] + ex.mean[c] - w[(r, c)]).abs() < 1e-12);
            }
        }
        assert!(transform(&ex, &DMatrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn identity_projection_keeps_centered_windows() {
        let ex = FeatureExtractor {
            spec: spec(2),
            mean: vec![1.0, -1.0],
            components: (0..2)
                .map(|i| PrincipalComponent {
                    index: i,
                    eigenvalue: 1.0,
                    direction: (0..2).map(|k| if k == i { 1.0 } else { 0.0 }).collect(),
                })
                .collect(),
            rank_limited: false,
            degenerate: false,
        };
        let w = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 5.0, 6.0]);
        let xi = transform(&ex, &w).unwrap();
        assert_eq!(xi, DMatrix::from_row_slice(2, 2, &[2.0, 5.0, 4.0, 7.0]));
    }
}
