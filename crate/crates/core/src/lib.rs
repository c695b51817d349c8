//! Typical-case theory and simulation of linear regression with quantized
//! weights.
//!
//! The analytic layers ([`single_body`], [`replica`], [`state_evolution`])
//! and the finite-size simulators ([`data`], [`amp`], [`oracle`]) are generic
//! over the scalar type; sweeps in [`experiments`] run in `f64`.

pub mod amp;
pub mod codebook;
pub mod data;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod quadrature;
pub mod replica;
pub mod scalar;
pub mod single_body;
pub mod state_evolution;

pub use amp::{amp_run, amp_step, empirical_gen_error, energy, AmpConfig, AmpResult, AmpState};
pub use codebook::{Codebook, QuantScheme};
pub use data::{generate, Dataset, Matrix};
pub use error::{Error, Result};
pub use oracle::{enumerate_min, ridge_exact};
pub use replica::{ridge_saddle, solve, ModelParams, Phase, ReplicaSolution, SolveOptions};
pub use scalar::Real;
pub use single_body::{Denoiser, FieldContext, Identity, Smoothed};
pub use state_evolution::{amp_fixed_point_stability, se_run, se_step, SEOptions, SEState};

pub type Codebook64 = Codebook<f64>;
pub type Codebook32 = Codebook<f32>;
pub type ModelParams64 = ModelParams<f64>;
pub type ModelParams32 = ModelParams<f32>;
pub type ReplicaSolution64 = ReplicaSolution<f64>;
pub type SEState64 = SEState<f64>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type AmpConfig64 = AmpConfig<f64>;
pub type AmpResult64 = AmpResult<f64>;
