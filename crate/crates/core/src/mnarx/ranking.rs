//! Residual-correlation ranking of candidate features and the bookkeeping
//! sets that track which candidates may still be chosen.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::Assessment;
use crate::error::{Error, Result};
use crate::features::{ColumnInfo, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    pub assessment: Assessment,
    /// Stop when the best absolute correlation falls below this.
    pub rho_threshold: f64,
    /// Stop once the best mean forecast error falls below this.
    pub error_threshold: Option<f64>,
    pub max_iterations: Option<usize>,
    /// Wall-clock budget in seconds for the whole construction.
    pub max_runtime: Option<f64>,
    /// Rows used for correlations; larger row sets are subsampled.
    pub subsample: Option<usize>,
    pub seed: u64,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            assessment: Assessment::KendallTau,
            rho_threshold: 0.2,
            error_threshold: None,
            max_iterations: None,
            max_runtime: None,
            subsample: Some(100_000),
            seed: 0,
        }
    }
}

impl RankingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho_threshold) {
            return Err(Error::Config(format!("rho threshold must lie in [0, 1), got {}", self.rho_threshold)));
        }
        if self.error_threshold.is_some_and(|e| !(e >= 0.0)) || self.max_runtime.is_some_and(|t| !(t >= 0.0)) {
            return Err(Error::Config("thresholds must be nonnegative".into()));
        }
        if self.subsample == Some(0) {
            return Err(Error::Config("subsample must be positive".into()));
        }
        Ok(())
    }
}

/// Identity of a candidate column that survives recomputation of the
/// feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnKey {
    pub quantity: String,
    pub component: usize,
}

impl From<&ColumnInfo> for ColumnKey {
    fn from(c: &ColumnInfo) -> Self {
        ColumnKey {
            quantity: c.quantity.clone(),
            component: c.component,
        }
    }
}

/// Partition of the candidate columns into available, selected and
/// excluded sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateBook {
    available: BTreeSet<ColumnKey>,
    /// In order of selection.
    selected: Vec<ColumnKey>,
    excluded: BTreeSet<ColumnKey>,
}

impl CandidateBook {
    /// Every column of `features` available.
    pub fn new(features: &FeatureMatrix) -> Self {
        CandidateBook {
            available: features.info().iter().map(ColumnKey::from).collect(),
            selected: Vec::new(),
            excluded: BTreeSet::new(),
        }
    }

    pub fn available(&self) -> &BTreeSet<ColumnKey> {
        &self.available
    }

    pub fn selected(&self) -> &[ColumnKey] {
        &self.selected
    }

    pub fn excluded(&self) -> &BTreeSet<ColumnKey> {
        &self.excluded
    }

    /// Moves `key` from the available set into the selection.
    pub fn select(&mut self, key: &ColumnKey) {
        self.available.remove(key);
        if !self.selected.contains(key) {
            self.selected.push(key.clone());
        }
    }

    /// Moves `key` from the selection into the excluded set.
    pub fn exclude(&mut self, key: &ColumnKey) {
        self.selected.retain(|k| k != key);
        self.available.remove(key);
        self.excluded.insert(key.clone());
    }

    /// Returns every excluded column to the available set.
    pub fn restore_excluded(&mut self) {
        self.available.append(&mut self.excluded);
    }

    /// Aligns the book with a recomputed matrix: new columns become
    /// available, vanished columns are dropped.
    pub fn sync(&mut self, features: &FeatureMatrix) {
        let present: BTreeSet<ColumnKey> = features.info().iter().map(ColumnKey::from).collect();
        self.available.retain(|k| present.contains(k));
        self.selected.retain(|k| present.contains(k));
        self.excluded.retain(|k| present.contains(k));
        for k in present {
            if !self.selected.contains(&k) && !self.excluded.contains(&k) {
                self.available.insert(k);
            }
        }
    }

    /// Column indices of the selection in `features`, in selection order.
    pub fn selected_columns(&self, features: &FeatureMatrix) -> Vec<usize> {
        self.selected
            .iter()
            .filter_map(|k| features.find(&k.quantity, k.component))
            .collect()
    }

    /// A, C and E are pairwise disjoint and together cover `features`.
    pub fn is_partition_of(&self, features: &FeatureMatrix) -> bool {
        let sel: BTreeSet<&ColumnKey> = self.selected.iter().collect();
        let disjoint = sel.len() == self.selected.len()
            && self.available.iter().all(|k| !sel.contains(k) && !self.excluded.contains(k))
            && self.excluded.iter().all(|k| !sel.contains(k));
        let total = self.available.len() + self.selected.len() + self.excluded.len();
        disjoint
            && total == features.n_cols()
            && features.info().iter().all(|c| {
                let k = ColumnKey::from(c);
                self.available.contains(&k) || sel.contains(&k) || self.excluded.contains(&k)
            })
    }
}

/// Rows used for ranking: `allowed`, reduced to a sorted fixed-seed uniform
/// sample when it exceeds the configured size.
pub fn sample_rows(allowed: &[usize], config: &RankingConfig) -> Vec<usize> {
    match config.subsample {
        Some(cap) if allowed.len() > cap => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut picked: Vec<usize> = sample(&mut rng, allowed.len(), cap).into_iter().map(|i| allowed[i]).collect();
            picked.sort_unstable();
            picked
        }
        _ => allowed.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub column: usize,
    pub rho: f64,
}

/// Scores every available column against the residuals on `rows` and returns
/// the one with the largest absolute correlation. Ties go to the larger
/// eigenvalue, then the lower column index.
pub fn rank_features(
    features: &FeatureMatrix,
    book: &CandidateBook,
    residuals: &[f64],
    rows: &[usize],
    config: &RankingConfig,
) -> Result<Ranked> {
    if residuals.len() != features.n_rows() {
        return Err(Error::Dimension {
            expected: features.n_rows(),
            actual: residuals.len(),
        });
    }
    let candidates: Vec<usize> = book
        .available()
        .iter()
        .filter_map(|k| features.find(&k.quantity, k.component))
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no available candidate features".into()));
    }
    let e: Vec<f64> = rows.iter().map(|&r| residuals[r]).collect();
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&c| {
            let col = features.column(c);
            let x: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
            config.assessment.evaluate(&x, &e).map(|r| r.value)
        })
        .collect::<Result<_>>()?;

    let info = features.info();
    let mut best = 0;
    for i in 1..candidates.len() {
        let (a, b) = (scores[i].abs(), scores[best].abs());
        let better = a > b
            || (a == b
                && (info[candidates[i]].eigenvalue > info[candidates[best]].eigenvalue
                    || (info[candidates[i]].eigenvalue == info[candidates[best]].eigenvalue && candidates[i] < candidates[best])));
        if better {
            best = i;
        }
    }
    Ok(Ranked {
        column: candidates[best],
        rho: scores[best],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn info(q: &str, component: usize, eigenvalue: f64) -> ColumnInfo {
        ColumnInfo {
            quantity: q.into(),
            component,
            eigenvalue,
        }
    }

    fn matrix(columns: Vec<Vec<f64>>, infos: Vec<ColumnInfo>) -> FeatureMatrix {
        let n = columns[0].len();
        FeatureMatrix::from_columns(columns, infos, 0, n, vec![0]).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn residual_equal_to_column_wins() {
        let cols = vec![noise(200, 1), noise(200, 2), noise(200, 3)];
        let e = cols[1].clone();
        let fm = matrix(cols, vec![info("a", 0, 3.0), info("a", 1, 2.0), info("b", 0, 1.0)]);
        let book = CandidateBook::new(&fm);
        let rows: Vec<usize> = (0..200).collect();
        for assessment in [Assessment::KendallTau, Assessment::Spearman, Assessment::Pearson] {
            let cfg = RankingConfig {
                assessment,
                ..RankingConfig::default()
            };
            let r = rank_features(&fm, &book, &e, &rows, &cfg).unwrap();
            assert_eq!(r.column, 1);
            assert!((r.rho - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_noise_below_threshold() {
        let n = 4000;
        let cols: Vec<Vec<f64>> = (0..5).map(|k| noise(n, 10 + k)).collect();
        let infos = (0..5).map(|k| info("x", k, 1.0 / (k + 1) as f64)).collect();
        let fm = matrix(cols, infos);
        let e = noise(n, 99);
        let rows: Vec<usize> = (0..n).collect();
        let r = rank_features(&fm, &CandidateBook::new(&fm), &e, &rows, &RankingConfig::default()).unwrap();
        // Null standard deviation of tau is about 0.67/sqrt(n) ≈ 0.011.
        assert!(r.rho.abs() < 0.2);
    }

    #[test]
    fn ties_prefer_eigenvalue_then_index() {
        let c = noise(50, 4);
        let e = noise(50, 5);
        let fm = matrix(vec![c.clone(), c.clone(), c.clone()], vec![info("a", 0, 1.0), info("b", 0, 1.0), info("c", 0, 1.0)]);
        let rows: Vec<usize> = (0..50).collect();
        let cfg = RankingConfig::default();
        assert_eq!(rank_features(&fm, &CandidateBook::new(&fm), &e, &rows, &cfg).unwrap().column, 0);
        let fm = matrix(vec![c.clone(), c.clone(), c], vec![info("a", 0, 1.0), info("b", 0, 1.0), info("c", 0, 2.0)]);
        assert_eq!(rank_features(&fm, &CandidateBook::new(&fm), &e, &rows, &cfg).unwrap().column, 2);
    }

    #[test]
    fn book_keeps_partition() {
        let fm = matrix(vec![noise(10, 1), noise(10, 2), noise(10, 3)], vec![info("a", 0, 1.0), info("a", 1, 0.5), info("b", 0, 1.0)]);
        let mut book = CandidateBook::new(&fm);
        assert!(book.is_partition_of(&fm));
        let k0 = ColumnKey::from(&fm.info()[0]);
        let k2 = ColumnKey::from(&fm.info()[2]);
        book.select(&k0);
        assert!(book.is_partition_of(&fm));
        book.select(&k2);
        book.exclude(&k2);
        assert!(book.is_partition_of(&fm));
        assert_eq!(book.selected_columns(&fm), vec![0]);
        book.restore_excluded();
        assert!(book.available().contains(&k2));
        assert!(book.is_partition_of(&fm));

        let bigger = matrix(
            vec![noise(10, 1), noise(10, 2), noise(10, 3), noise(10, 4)],
            vec![info("a", 0, 1.0), info("a", 1, 0.5), info("b", 0, 1.0), info("z", 0, 1.0)],
        );
        book.sync(&bigger);
        assert!(book.is_partition_of(&bigger));
        assert_eq!(book.selected_columns(&bigger), vec![0]);
        assert!(rank_features(&bigger, &CandidateBook::default(), &[0.0; 10], &[0, 1], &RankingConfig::default()).is_err());
    }

    #[test]
    fn subsample_is_fixed_and_sorted() {
        let allowed: Vec<usize> = (0..1000).map(|i| i * 2).collect();
        let cfg = RankingConfig {
            subsample: Some(100),
            ..RankingConfig::default()
        };
        let a = sample_rows(&allowed, &cfg);
        assert_eq!(a.len(), 100);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, sample_rows(&allowed, &cfg));
        assert_eq!(sample_rows(&allowed[..50], &cfg).len(), 50);
    }
}
