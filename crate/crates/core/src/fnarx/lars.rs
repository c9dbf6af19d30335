//! Least-angle regression with the lasso modification, working on the
//! correlation matrix of standardized regressors so that the regression
//! matrix itself never has to be held in memory.

use nalgebra::{DMatrix, DVector};

/// Regressors whose unexplained variance given the active set falls below
/// this are never added.
pub const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LarsStep {
    /// Active regressors in order of entry.
    pub active: Vec<usize>,
    /// Coefficients on the standardized regressors (length p).
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LarsPath {
    /// Step 0 is the empty model.
    pub steps: Vec<LarsStep>,
    /// Regressors skipped as collinear with the active set.
    pub skipped: Vec<usize>,
}

impl LarsPath {
    pub fn max_active(&self) -> usize {
        self.steps.iter().map(|s| s.active.len()).max().unwrap_or(0)
    }

    pub fn l1_norms(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.coefficients.iter().map(|c| c.abs()).sum())
            .collect()
    }
}

fn submatrix(gram: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| gram[(idx[r], idx[c])])
}

/// `1 - R²` of regressor `j` on the regressors in `active`.
fn unexplained(gram: &DMatrix<f64>, active: &[usize], j: usize) -> f64 {
    if active.is_empty() {
        return gram[(j, j)];
    }
    let g = submatrix(gram, active);
    let r = DVector::from_iterator(active.len(), active.iter().map(|&k| gram[(k, j)]));
    match g.cholesky() {
        Some(ch) => gram[(j, j)] - r.dot(&ch.solve(&r)),
        None => 0.0,
    }
}

/// Runs the path until `max_active` regressors are active, no regressor is
/// left, or the residual correlation vanishes.
///
/// `gram` is the correlation matrix of the standardized regressors and
/// `xty` their correlation with the centered target (both divided by the
/// row count).
pub fn lars_lasso(gram: &DMatrix<f64>, xty: &[f64], max_active: usize) -> LarsPath {
    let p = xty.len();
    let mut beta = vec![0.0; p];
    let mut corr = xty.to_vec();
    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; p];
    let mut skipped = vec![false; p];
    let mut steps = vec![LarsStep {
        active: Vec::new(),
        coefficients: beta.clone(),
    }];

    let c_init = corr.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if p == 0 || !(c_init > 0.0) {
        return LarsPath { steps, skipped: Vec::new() };
    }
    let tiny = 1e-12 * c_init;
    let mut just_dropped = false;

    for _ in 0..(8 * p + 16) {
        if !just_dropped && active.len() < max_active {
            loop {
                let cand = (0..p)
                    .filter(|&j| !in_active[j] && !skipped[j])
                    .fold(None::<(usize, f64)>, |best, j| match best {
                        Some((_, b)) if corr[j].abs() <= b => best,
                        _ => Some((j, corr[j].abs())),
                    });
                let Some((j, _)) = cand else { break };
                if unexplained(gram, &active, j) < COLLINEAR_TOL {
                    skipped[j] = true;
                    continue;
                }
                active.push(j);
                in_active[j] = true;
                break;
            }
        }
        just_dropped = false;
        if active.is_empty() {
            break;
        }

        let big_c = active.iter().fold(0.0f64, |a, &j| a.max(corr[j].abs()));
        if big_c <= tiny {
            break;
        }
        let signs = DVector::from_iterator(active.len(), active.iter().map(|&j| corr[j].signum()));
        let g = submatrix(gram, &active);
        let Some(ch) = g.cholesky() else {
            // Numerically dependent despite the entry check: retire the newest.
            let j = active.pop().unwrap();
            in_active[j] = false;
            skipped[j] = true;
            beta[j] = 0.0;
            continue;
        };
        let z = ch.solve(&signs);
        let norm = 1.0 / signs.dot(&z).sqrt();
        let w: Vec<f64> = z.iter().map(|v| v * norm).collect();
        let a: Vec<f64> = (0..p)
            .map(|j| active.iter().zip(&w).map(|(&k, wk)| gram[(j, k)] * wk).sum())
            .collect();

        let mut gamma = big_c / norm;
        let mut entering = false;
        for j in (0..p).filter(|&j| !in_active[j] && !skipped[j]) {
            for cand in [(big_c - corr[j]) / (norm - a[j]), (big_c + corr[j]) / (norm + a[j])] {
                if cand > 1e-14 && cand < gamma {
                    gamma = cand;
                    entering = true;
                }
            }
        }
        let mut drop: Option<usize> = None;
        for (pos, &j) in active.iter().enumerate() {
            if w[pos] != 0.0 {
                let g = -beta[j] / w[pos];
                if g > 1e-14 && g < gamma {
                    gamma = g;
                    drop = Some(pos);
                }
            }
        }

        for (pos, &j) in active.iter().enumerate() {
            beta[j] += gamma * w[pos];
        }
        for j in 0..p {
            corr[j] -= gamma * a[j];
        }
        if let Some(pos) = drop {
            let j = active.remove(pos);
            in_active[j] = false;
            beta[j] = 0.0;
            just_dropped = true;
        }
        steps.push(LarsStep {
            active: active.clone(),
            coefficients: beta.clone(),
        });

        // Least squares on the active set reached, or the size cap is hit.
        if drop.is_none() && (!entering || active.len() >= max_active) {
            break;
        }
    }

    LarsPath {
        steps,
        skipped: (0..p).filter(|&j| skipped[j]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Standardized design, centered target and their moments.
    fn problem(n: usize, p: usize, coef: &[f64], noise: f64, seed: u64) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: DMatrix<f64> = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        // Mild correlation between neighbours.
        for r in 0..n {
            for c in 1..p {
                x[(r, c)] += 0.3 * x[(r, c - 1)];
            }
        }
        for mut col in x.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
            let s: f64 = (col.norm_squared() / n as f64).sqrt();
            col /= s;
        }
        let mut y: Vec<f64> = (0..n)
            .map(|r| (0..p).map(|c| coef.get(c).copied().unwrap_or(0.0) * x[(r, c)]).sum::<f64>() + noise * rng.random_range(-1.0..1.0))
            .collect();
        let my = y.iter().sum::<f64>() / n as f64;
        y.iter_mut().for_each(|v| *v -= my);
        let gram = x.tr_mul(&x) / n as f64;
        let xty: Vec<f64> = (0..p).map(|c| x.column(c).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n as f64).collect();
        (x, y, gram, xty)
    }

    #[test]
    fn first_entry_is_most_correlated() {
        let (_, _, gram, xty) = problem(200, 6, &[0.0, 0.0, 3.0, 0.0, 0.5, 0.0], 0.1, 3);
        let path = lars_lasso(&gram, &xty, 6);
        assert_eq!(path.steps[1].active, vec![2]);
    }

    #[test]
    fn full_path_reaches_least_squares() {
        let (x, y, gram, xty) = problem(300, 5, &[1.0, -2.0, 0.5, 0.0, 0.3], 0.2, 5);
        let path = lars_lasso(&gram, &xty, 5);
        let last = path.steps.last().unwrap();
        assert_eq!(last.active.len(), 5);
        let beta = DVector::from_vec(last.coefficients.clone());
        let resid = DVector::from_vec(y) - &x * &beta;
        let grad = x.tr_mul(&resid);
        assert!(grad.amax() < 1e-9 * x.nrows() as f64, "gradient {}", grad.amax());
    }

    #[test]
    fn l1_norm_nondecreasing() {
        for seed in 0..20 {
            let (_, _, gram, xty) = problem(60, 8, &[1.0, -1.0, 1.0, 0.5, -0.5, 0.0, 0.2, 0.0], 0.5, seed);
            let norms = lars_lasso(&gram, &xty, 8).l1_norms();
            for w in norms.windows(2) {
                assert!(w[1] >= w[0] - 1e-10, "seed {seed}: {norms:?}");
            }
        }
    }

    #[test]
    fn duplicate_column_skipped() {
        let (mut x, y, _, _) = problem(100, 3, &[1.0, 1.0, 0.0], 0.1, 9);
        let dup = x.column(0).clone_owned();
        x = x.insert_column(3, 0.0);
        x.set_column(3, &dup);
        let n = x.nrows() as f64;
        let gram = x.tr_mul(&x) / n;
        let xty: Vec<f64> = (0..4).map(|c| x.column(c).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n).collect();
        let path = lars_lasso(&gram, &xty, 4);
        let last = path.steps.last().unwrap();
        assert!(!(last.active.contains(&0) && last.active.contains(&3)));
        assert_eq!(path.skipped.len(), 1);
    }

    #[test]
    fn respects_cap_and_zero_target() {
        let (_, _, gram, xty) = problem(100, 6, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 0.0, 1);
        assert!(lars_lasso(&gram, &xty, 2).max_active() <= 2);
        let path = lars_lasso(&gram, &[0.0; 6], 6);
        assert_eq!(path.steps.len(), 1);
    }
}
