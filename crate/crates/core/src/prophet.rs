//! Expectation of the offline maximum `E max_i V_i`.
//!
//! Since `a < b < n`, the maximum is `n` unless no copy of `V` hits `n`, is
//! `b` when some copy hits `b` but none hits `n`, and `a` otherwise.

use serde::Serialize;

use crate::instance::{ClassParams, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProphetValue {
    pub n: u64,
    pub exact: f64,
    pub limit: f64,
}

pub fn prophet(inst: &Instance) -> ProphetValue {
    ProphetValue {
        n: inst.params.n,
        exact: prophet_exact(inst),
        limit: prophet_limit(&inst.class()),
    }
}

/// `n[1 − (1−1/n²)ⁿ] + b[(1−1/n²)ⁿ − qⁿ] + a qⁿ`, `q = 1 − p/n − 1/n²`.
pub fn prophet_exact(inst: &Instance) -> f64 {
    let nf = inst.nf();
    let top = inst.dist.top_mass();
    let nonzero = inst.dist.nonzero_mass();
    // (1 − x)ⁿ = exp(n log1p(−x))
    let log_no_top = nf * (-top).ln_1p();
    let log_all_zero = nf * (-nonzero).ln_1p();
    let p_top = -log_no_top.exp_m1();
    let p_all_zero = log_all_zero.exp();
    // (1−1/n²)ⁿ − qⁿ = qⁿ (exp(n(log(1−1/n²) − log q)) − 1)
    let p_b = p_all_zero * (log_no_top - log_all_zero).exp_m1();
    nf * p_top + inst.b() * p_b + inst.a() * p_all_zero
}

/// `1 + b(1 − e^{−p}) + a e^{−p}`.
pub fn prophet_limit(params: &ClassParams) -> f64 {
    let decay = (-params.p).exp();
    1.0 + params.b * -(-params.p).exp_m1() + params.a * decay
}
