use thiserror::Error;

use crate::instance::ConditionReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {name} = {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("instance fails feasibility checks: {}", .0.failed_names().join(", "))]
    Infeasible(Box<ConditionReport>),

    #[error("distribution of V is not a probability vector for n = {n} (p/n + 1/n² = {mass})")]
    InvalidPmf { n: u64, mass: f64 },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("argument {value} outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("acceptance times are not ordered (k = {k}, kbar = {kbar}, j = {j})")]
    Ordering { k: usize, kbar: usize, j: usize },

    #[error("condition {0} fails")]
    ConditionFailed(&'static str),

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("bisection did not converge within {0} iterations")]
    MaxIterations(usize),

    #[error("inconsistent derivative: q'(lambda*) = {0} > 0")]
    Inconsistent(f64),

    #[error("numerical identity violated: {what} (deviation {deviation:e})")]
    Identity { what: &'static str, deviation: f64 },

    #[error("certification failed: sup |q'| = {sup} on the certified interval")]
    Certification { sup: f64 },

    #[error("{what} too large: {size} exceeds the limit {limit}")]
    TooLarge {
        what: &'static str,
        size: u64,
        limit: u64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
