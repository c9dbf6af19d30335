//! Rank and linear correlation measures used to score candidate features
//! against residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Assessment {
    #[default]
    KendallTau,
    Spearman,
    Pearson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    /// One of the inputs is constant; `value` is then 0.
    pub degenerate: bool,
}

impl Correlation {
    fn degenerate() -> Self {
        Correlation {
            value: 0.0,
            degenerate: true,
        }
    }
}

impl Assessment {
    pub fn evaluate(self, a: &[f64], b: &[f64]) -> Result<Correlation> {
        match self {
            Assessment::KendallTau => kendall_tau(a, b),
            Assessment::Spearman => spearman(a, b),
            Assessment::Pearson => pearson(a, b),
        }
    }
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two samples".into()));
    }
    Ok(())
}

/// Sum of `t (t - 1) / 2` over runs of equal values in a sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

/// Sorts `v` by value and returns the number of inversions removed.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Tie-corrected Kendall tau-b in O(n log n) (Knight's algorithm).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<Correlation> {
    check(a, b)?;
    // Adding zero folds -0.0 into 0.0 so that bit patterns identify ties.
    let a: Vec<f64> = a.iter().map(|v| v + 0.0).collect();
    let b: Vec<f64> = b.iter().map(|v| v + 0.0).collect();
    let n = a.len() as u64;
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));

    let ties_a = tied_pairs(order.iter().map(|&i| a[i].to_bits()));
    let ties_ab = tied_pairs(order.iter().map(|&i| (a[i].to_bits(), b[i].to_bits())));
    let mut bs: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let mut buf = vec![0.0; bs.len()];
    let swaps = merge_count(&mut bs, &mut buf);
    let ties_b = tied_pairs(bs.iter().map(|v| v.to_bits()));

    let total = n * (n - 1) / 2;
    if ties_a == total || ties_b == total {
        return Ok(Correlation::degenerate());
    }
    let s = total as f64 - ties_a as f64 - ties_b as f64 + ties_ab as f64 - 2.0 * swaps as f64;
    let denom = (((total - ties_a) as u128 * (total - ties_b) as u128) as f64).sqrt();
    Ok(Correlation {
        value: (s / denom).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<Correlation> {
    check(a, b)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(Correlation::degenerate());
    }
    Ok(Correlation {
        value: (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<Correlation> {
    check(a, b)?;
    pearson(&average_ranks(a), &average_ranks(b))
}
