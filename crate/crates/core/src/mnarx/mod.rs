//! Automatic construction of manifold-NARX model sequences.

pub mod construct;
pub mod correlation;
pub mod ranking;
pub mod sequence;
pub mod trace;

pub use construct::{construct, ConstructConfig, Construction};
pub use correlation::{kendall_tau, pearson, spearman, Assessment, Correlation};
pub use ranking::{rank_features, CandidateBook, ColumnKey, Ranked, RankingConfig};
pub use sequence::{ModelSequence, Stage};
pub use trace::{AlgoTrace, TraceAction, TraceRecord};
