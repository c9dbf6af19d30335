//! Single functional-NARX models: fitting, one-step prediction, closed-loop
//! forecasting and error metrics.

pub mod fit;
pub mod lars;
pub mod metrics;
pub mod model;

pub use fit::{fit, fit_with_windows, forecast_mean_error, scoring_positions, FitConfig, FitProblem};
pub use metrics::{mean_error, rmse, trace_error, ErrorMetrics};
pub use model::{FitDiagnostics, FnarxModel, Standardization};
