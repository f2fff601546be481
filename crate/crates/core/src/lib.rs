//! Numerical toolkit for the random-order prophet inequality hard instance.
//!
//! The instance consists of `n` iid copies of a three-point variable `V`
//! (values `n`, `b`, `0` with masses `1/n²`, `p/n` and the remainder) plus a
//! single constant `a`, presented in uniformly random order. The crate
//! provides:
//!
//! * [`instance`]: parameters, the distribution of `V` and the feasibility
//!   conditions the asymptotic analysis relies on.
//! * [`dp`]: the collapsed backward induction for the expected future
//!   rewards `φ_k`, `φ̄_k`, the acceptance times and the optimal value.
//! * [`prophet`]: exact and limiting expectation of the offline maximum.
//! * [`asymptotics`]: closed forms for the limits of the acceptance times,
//!   the exponential quadratic `q` and its derivatives, and finite-n bound
//!   diagnostics.
//! * [`bound`]: maximisation of `q` by certified bisection, producing the
//!   hardness bound `M(a, b, p)`.
//! * [`oracle`]: an exhaustive history-level backward induction for tiny `n`
//!   and seeded Monte Carlo simulation.
//! * [`sweep`]: ranked grid search over `(a, b, p)`.

// Negated float comparisons are used on purpose so that NaN fails checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bound;
pub mod dp;
mod error;
pub mod format;
pub mod instance;
pub mod oracle;
pub mod prophet;
pub mod sweep;

pub use asymptotics::{AsymptoticProfile, DiagnosticRecord, DiagnosticsReport, QDerivatives};
pub use bound::{BisectionOptions, BoundCase, Certificate, HardnessBound};
pub use dp::{AcceptanceTimes, CurveRow, ThresholdTables};
pub use error::{Error, Result};
pub use instance::{
    ClassParams, Condition, ConditionCheck, ConditionReport, Instance, InstanceParams,
    ValueDistribution,
};
pub use oracle::{ExhaustiveOutcome, HistoryValue, SimulationReport, Symbol};
pub use prophet::ProphetValue;
pub use sweep::{Execution, GridRange, RefineOutcome, SweepRecord, SweepSpec};

/// Parameters of the instance studied in the hardness proof.
pub const REF_A: f64 = 0.789;
pub const REF_B: f64 = 1.24;
pub const REF_P: f64 = 0.421;

/// `(a, b, p) = (0.789, 1.24, 0.421)`.
pub fn reference_params() -> ClassParams {
    ClassParams::new(REF_A, REF_B, REF_P)
}
