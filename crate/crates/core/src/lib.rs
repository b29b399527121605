//! Distributed-order fractional kernels, a subdiffusion solver for
//! ∂ₜ[k∗(u−u₀)] − div(A Du) = f and an empirical verification harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod geometry;
pub mod harnack;
pub mod kernels;
pub mod measure;
pub mod quad;
pub mod run;
pub mod solver;
pub mod volterra;

pub use config::{parse_config, Experiment, ExperimentConfig};
pub use error::{Error, Result, ValidationReport, Violation};
pub use harnack::{critical_exponent, HarnackReport, OscillationProfile};
pub use kernels::{KernelGrid, KernelKind};
pub use measure::{Atom, Measure, MeasureSpec, WeightDensity};
pub use run::{run, RunOutcome};
pub use solver::{solve, Problem, SolutionField, SpatialGrid};
pub use volterra::DiscreteKernel;
