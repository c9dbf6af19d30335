//! A small two-stage system with a known structure, used to exercise the
//! construction algorithm end to end.
//!
//! `z(t) = (x(t) + x(t-1) + x(t-2)) / 3` and `y(t) = z(t-1) + 0.5 y(t-1)`,
//! driven by Gaussian white noise `x`, with `z` an intermediate response.

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;

use crate::error::Result;
use crate::signals::{Dataset, QuantityRole, Realization};

/// Input, intermediate response and target of one realization.
pub fn chain_response(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut z = vec![0.0; n];
    let mut y = vec![0.0; n];
    for t in 0..n {
        let back = |k: usize| if t >= k { x[t - k] } else { 0.0 };
        z[t] = (back(0) + back(1) + back(2)) / 3.0;
        if t > 0 {
            y[t] = z[t - 1] + 0.5 * y[t - 1];
        }
    }
    (z, y)
}

/// `n_realizations` traces of `n_steps` samples; realization `i` is driven by
/// a stream seeded with `seed + i`.
pub fn moving_average_chain(n_realizations: usize, n_steps: usize, seed: u64) -> Result<Dataset> {
    let roles: IndexMap<String, QuantityRole> = [
        ("x", QuantityRole::Exogenous),
        ("z", QuantityRole::IntermediateResponse),
        ("y", QuantityRole::Target),
    ]
    .into_iter()
    .map(|(k, r)| (k.to_string(), r))
    .collect();
    let dt = 1.0;
    let realizations = (0..n_realizations)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let x: Vec<f64> = (0..n_steps).map(|_| StandardNormal.sample(&mut rng)).collect();
            let (z, y) = chain_response(&x);
            Realization {
                id: i,
                channels: [("x".to_string(), x), ("z".to_string(), z), ("y".to_string(), y)].into_iter().collect(),
                n_steps,
                dt,
            }
        })
        .collect();
    Dataset::new(realizations, roles, BTreeMap::new(), n_steps, dt)
}
