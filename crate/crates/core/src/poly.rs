//! Monomial regression bases over feature vectors with hyperbolic (q-norm)
//! truncation of the multi-index set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on the q-norm boundary test.
pub const Q_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn q_norm(&self, q: f64) -> f64 {
        self.0.iter().map(|&a| f64::from(a).powf(q)).sum::<f64>().powf(1.0 / q)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// Value of the monomial at `x`; a zero exponent contributes exactly 1.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(a, _)| **a > 0)
            .map(|(&a, &v)| v.powi(a as i32))
            .product()
    }
}

/// Graded order: total degree first, then reverse lexicographic so that
/// `(1, 0)` precedes `(0, 1)`.
fn graded_cmp(a: &MultiIndex, b: &MultiIndex) -> std::cmp::Ordering {
    a.total_degree().cmp(&b.total_degree()).then_with(|| b.0.cmp(&a.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    pub n_features: usize,
    pub degree: u32,
    pub q_norm: f64,
    pub indices: Vec<MultiIndex>,
}

impl MultiIndexSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        self.indices.binary_search_by(|p| graded_cmp(p, alpha)).is_ok()
    }

    /// A set holding only the listed indices, kept in graded order.
    pub fn from_indices(n_features: usize, degree: u32, q_norm: f64, mut indices: Vec<MultiIndex>) -> Result<Self> {
        if indices.iter().any(|a| a.0.len() != n_features) {
            return Err(Error::InvalidArgument("multi-index length differs from feature count".into()));
        }
        indices.sort_by(graded_cmp);
        indices.dedup();
        Ok(MultiIndexSet {
            n_features,
            degree,
            q_norm,
            indices,
        })
    }

    pub fn evaluator(&self) -> BasisEvaluator {
        BasisEvaluator::new(self)
    }
}

/// `{α : ||α||_q <= d}` over `n_features` variables, in graded order.
pub fn generate_hyperbolic_set(n_features: usize, degree: u32, q_norm: f64) -> Result<MultiIndexSet> {
    if n_features == 0 {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    if !(q_norm > 0.0 && q_norm <= 1.0) {
        return Err(Error::InvalidArgument(format!("q-norm must lie in (0, 1], got {q_norm}")));
    }
    // Work with Σ α_j^q <= d^q, which prunes partial sums monotonically.
    let budget = f64::from(degree).powf(q_norm);
    let tol = Q_NORM_TOL * budget.max(1.0);
    let mut out = Vec::new();
    let mut current = vec![0u32; n_features];
    fn recurse(pos: usize, used: f64, degree: u32, q: f64, budget: f64, tol: f64, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if pos == current.len() {
            out.push(MultiIndex(current.clone()));
            return;
        }
        for a in 0..=degree {
            let cost = used + f64::from(a).powf(q);
            if cost > budget + tol {
                break;
            }
            current[pos] = a;
            recurse(pos + 1, cost, degree, q, budget, tol, current, out);
        }
        current[pos] = 0;
    }
    recurse(0, 0.0, degree, q_norm, budget, tol, &mut current, &mut out);
    // Final check on the q-norm itself; the pruning above is only a bound.
    out.retain(|a| a.q_norm(q_norm) <= f64::from(degree) + Q_NORM_TOL);
    out.sort_by(graded_cmp);
    Ok(MultiIndexSet {
        n_features,
        degree,
        q_norm,
        indices: out,
    })
}

/// Evaluates every basis term of a set at a feature vector.
pub fn evaluate_basis(features: &[f64], set: &MultiIndexSet) -> Result<Vec<f64>> {
    if features.len() != set.n_features {
        return Err(Error::Dimension {
            expected: set.n_features,
            actual: features.len(),
        });
    }
    let mut out = vec![0.0; set.len()];
    set.evaluator().evaluate_into(features, &mut out);
    Ok(out)
}

/// Precomputed sparse exponents for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct BasisEvaluator {
    n_features: usize,
    max_power: usize,
    terms: Vec<Vec<(usize, usize)>>,
    powers: Vec<f64>,
}

impl BasisEvaluator {
    fn new(set: &MultiIndexSet) -> Self {
        let terms: Vec<Vec<(usize, usize)>> = set
            .indices
            .iter()
            .map(|a| {
                a.0.iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(j, &e)| (j, e as usize))
                    .collect()
            })
            .collect();
        let max_power = set.indices.iter().flat_map(|a| a.0.iter()).copied().max().unwrap_or(0) as usize;
        BasisEvaluator {
            n_features: set.n_features,
            max_power,
            terms,
            powers: vec![0.0; set.n_features * (max_power + 1)],
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `out[k]` = value of term `k` at `x`.
    #[inline]
    pub fn evaluate_into(&mut self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_features);
        let stride = self.max_power + 1;
        for (j, &v) in x.iter().enumerate() {
            let row = &mut self.powers[j * stride..(j + 1) * stride];
            row[0] = 1.0;
            for p in 1..stride {
                row[p] = row[p - 1] * v;
            }
        }
        for (o, term) in out.iter_mut().zip(&self.terms) {
            let mut prod = 1.0;
            for &(j, e) in term {
                prod *= self.powers[j * stride + e];
            }
            *o = prod;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    #[test]
    fn total_degree_two_features() {
        let s = generate_hyperbolic_set(2, 2, 1.0).unwrap();
        let expect: Vec<MultiIndex> = [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]].iter().map(|a| mi(a)).collect();
        assert_eq!(s.indices, expect);
    }

    #[test]
    fn half_norm_drops_interaction() {
        let s = generate_hyperbolic_set(2, 2, 0.5).unwrap();
        let expect: Vec<MultiIndex> = [[0, 0], [1, 0], [0, 1], [2, 0], [0, 2]].iter().map(|a| mi(a)).collect();
        assert_eq!(s.indices, expect);
    }

    #[test]
    fn univariate() {
        for q in [0.3, 0.8, 1.0] {
            let s = generate_hyperbolic_set(1, 3, q).unwrap();
            assert_eq!(s.indices, (0..=3).map(|a| mi(&[a])).collect::<Vec<_>>());
        }
    }

    #[test]
    fn bad_arguments() {
        assert!(generate_hyperbolic_set(0, 2, 1.0).is_err());
        assert!(generate_hyperbolic_set(2, 2, 0.0).is_err());
        assert!(generate_hyperbolic_set(2, 2, 1.5).is_err());
    }

    #[test]
    fn basis_values() {
        let s = generate_hyperbolic_set(2, 2, 1.0).unwrap();
        assert_eq!(evaluate_basis(&[2.0, 3.0], &s).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
        assert_eq!(evaluate_basis(&[0.0, 0.0], &s).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(evaluate_basis(&[1.0, 1.0], &s).unwrap().iter().all(|v| *v == 1.0));
        assert!(evaluate_basis(&[1.0], &s).is_err());
    }

    #[test]
    fn contains_uses_graded_order() {
        let s = generate_hyperbolic_set(3, 3, 0.8).unwrap();
        for a in &s.indices {
            assert!(s.contains(a));
        }
        assert!(!s.contains(&mi(&[1, 1, 1])));
    }

    proptest! {
        #[test]
        fn nested_in_q_and_degree(n in 1usize..4, d in 0u32..5, q in 0.3f64..1.0, dq in 0.0f64..0.5) {
            let small = generate_hyperbolic_set(n, d, q).unwrap();
            let wider = generate_hyperbolic_set(n, d, (q + dq).min(1.0)).unwrap();
            let deeper = generate_hyperbolic_set(n, d + 1, q).unwrap();
            prop_assert!(small.indices[0].is_zero());
            for a in &small.indices {
                prop_assert!(wider.contains(a));
                prop_assert!(deeper.contains(a));
            }
        }

        #[test]
        fn multiplicative(x in prop::collection::vec(-2.0f64..2.0, 3), a in prop::collection::vec(0u32..3, 3), b in prop::collection::vec(0u32..3, 3)) {
            let sum = MultiIndex(a.iter().zip(&b).map(|(p, q)| p + q).collect());
            let lhs = sum.evaluate(&x);
            let rhs = MultiIndex(a).evaluate(&x) * MultiIndex(b).evaluate(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
