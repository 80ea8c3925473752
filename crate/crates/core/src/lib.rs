//! Error exponents for outage-limited fading links carrying bursty,
//! delay-constrained traffic.
//!
//! The analytic modules are generic over the scalar type through [`Real`]
//! (`f32` or `f64`); the `*64` aliases below fix the scalar to `f64`.

// NaN-rejecting guards are written as `!(x > y)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay_exponent;
pub mod dmt_models;
pub mod error;
mod numeric;
pub mod optimizer;
pub mod queue_sim;
pub mod rate_models;
pub mod scalar;

pub use delay_exponent::{exponent_exact, exponent_relaxed, ExponentQuery, ExponentResult};
pub use dmt_models::{ChannelModel, PiecewiseDmt, TDependence};
pub use error::{Error, Result};
pub use optimizer::{
    classify_and_bound, coop_closed_forms, mimo22_r_ir, optimize_case1, optimize_case1_with,
    optimize_coop, p_tot_exponent, r_star_of_t, relaxed_optimum, siso_closed_forms,
    siso_r_star_relaxed, BoundReport, Classification, CoopClosedForms, Crossing, DurationRow,
    ExponentMode, OptimizationResult, RelaxedSolution, SisoClosedForms,
};
pub use queue_sim::{
    exact_discrete_oracle, lemma3_check, simulate, simulate_detailed, simulate_discrete,
    BatchQueue, DiscretePmf, Lemma3Report, OracleReport, SimConfig, SimReport,
};
pub use rate_models::{ArrivalKind, ArrivalModel, ScalingRegime};
pub use scalar::Real;

pub type ArrivalModel64 = ArrivalModel<f64>;
pub type ChannelModel64 = ChannelModel<f64>;
pub type ExponentQuery64 = ExponentQuery<f64>;
pub type ExponentResult64 = ExponentResult<f64>;
pub type ScalingRegime64 = ScalingRegime<f64>;
pub type OptimizationResult64 = OptimizationResult<f64>;
pub type Classification64 = Classification<f64>;
pub type RelaxedSolution64 = RelaxedSolution<f64>;
