//! Functional NARX surrogates for dynamical systems with exogenous inputs,
//! and automatic construction of manifold-NARX model chains.
//!
//! The crate is organised bottom-up:
//!
//! - [`signals`]: experimental designs (multichannel traces with roles) and
//!   their on-disk format.
//! - [`features`]: sliding windows, PCA feature extraction, the stacked
//!   candidate matrix, spatial DCT.
//! - [`poly`]: hyperbolically truncated monomial bases.
//! - [`fnarx`]: single-model fitting by least-angle regression with
//!   forecast-error model selection, closed-loop forecasting, error metrics.
//! - [`mnarx`]: residual-correlation feature ranking and the recursive
//!   construction of model sequences, plus sequential prediction.
//! - [`boucwen`]: stochastic ground motions and a hysteretic oscillator used
//!   as a benchmark generator.
//! - [`report`]: error distributions and plot-ready CSV output.
//! - [`cli`]: the `mnarx` command-line front end.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod boucwen;
pub mod cli;
pub mod error;
pub mod features;
pub mod fnarx;
pub mod mnarx;
pub mod poly;
pub mod report;
pub mod signals;
pub mod synthetic;
pub mod transforms;

pub use error::{Error, Result};
