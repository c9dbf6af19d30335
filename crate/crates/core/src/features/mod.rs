//! Temporal feature extraction: sliding windows, per-quantity PCA and the
//! stacked candidate matrix, plus the spatial DCT used for gridded inputs.

pub mod dct;
pub mod matrix;
pub mod pca;
pub mod window;

pub use dct::{dct2_modes, dct2_reconstruct};
pub use matrix::{assemble_feature_matrix, ColumnInfo, ComponentBudget, FeatureMatrix};
pub use pca::{fit_pca, transform, FeatureExtractor, PrincipalComponent};
pub use window::{build_lagged_windows, Alignment, WindowSpec};
