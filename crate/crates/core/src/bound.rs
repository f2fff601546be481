//! The hardness bound `M(a, b, p) = max_{ν ∈ [μ*, λ*]} q(ν) / prophet_limit`.
//!
//! `q'` is convex on `[μ*, λ*]` and `q'(λ*) ≤ 0`, so either `q' ≤ 0` on the
//! whole interval (maximum at `μ*`) or `q'` has a single root there, located
//! by bisection. Bisection's bracket gives a rigorous bound on the location
//! error, and `|q'| < 1` near the root transfers it to `q`.

use std::fmt;

use serde::Serialize;

use crate::asymptotics::{
    lambda_mu_star, profile_unchecked, q_of_nu, q_prime, q_prime_unsubstituted, AsymptoticProfile,
};
use crate::error::{Error, Result};
use crate::instance::{validate_class, ClassParams};
use crate::prophet::prophet_limit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BisectionOptions {
    pub xtol: f64,
    pub rtol: f64,
    pub max_iter: usize,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-13,
            rtol: 1e-14,
            max_iter: 200,
        }
    }
}

/// Final state of a bracketing bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bisection {
    /// Midpoint of the final bracket.
    pub root: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
    /// Half the final bracket width, or zero when `f(root) == 0`.
    pub error_bound: f64,
}

/// Bracketing bisection on `[lo, hi]` for a sign change of `f`.
///
/// Stops once the bracket width is at most `xtol + |mid| rtol` and returns
/// its midpoint, so the root lies within `error_bound ≤ (xtol + |mid| rtol)/2`
/// of the result. Either orientation of the sign change is accepted.
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    opts: &BisectionOptions,
) -> Result<Bisection> {
    let f_lo = f(lo);
    let f_hi = f(hi);
    let lo_positive = f_lo > 0.0;
    if !(lo < hi) || lo_positive == (f_hi > 0.0) || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    let mut iterations = 0;
    loop {
        let mid = lo + (hi - lo) / 2.0;
        if hi - lo <= opts.xtol + mid.abs() * opts.rtol {
            return Ok(Bisection {
                root: mid,
                lo,
                hi,
                iterations,
                error_bound: (hi - lo) / 2.0,
            });
        }
        if iterations == opts.max_iter {
            return Err(Error::MaxIterations(opts.max_iter));
        }
        iterations += 1;
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(Bisection {
                root: mid,
                lo: mid,
                hi: mid,
                iterations,
                error_bound: 0.0,
            });
        }
        if (f_mid > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Root of `q'` on `[μ*, λ*]`; requires `q'(μ*) > 0 ≥ q'(λ*)`.
pub fn bisect_qprime(params: &ClassParams, opts: &BisectionOptions) -> Result<Bisection> {
    let profile = lambda_mu_star(params)?;
    bisect_profile(&profile, opts)
}

fn bisect_profile(profile: &AsymptoticProfile, opts: &BisectionOptions) -> Result<Bisection> {
    let (lo, hi) = (profile.mu_star, profile.lambda_star);
    let (f_lo, f_hi) = (q_prime(profile, lo), q_prime(profile, hi));
    if !(f_lo > 0.0 && f_hi <= 0.0) {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    bisect(|nu| q_prime(profile, nu), lo, hi, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundCase {
    /// `q'(μ*) > 0`: interior maximiser found by bisection.
    Interior,
    /// `q'(μ*) ≤ 0`: `q` is nonincreasing and the maximiser is `μ*`.
    Monotone,
}

impl fmt::Display for BoundCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundCase::Interior => "interior",
            BoundCase::Monotone => "monotone",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardnessBound {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub lambda_star: f64,
    pub mu_star: f64,
    /// Located maximiser of `q` (`μ*` in the monotone case).
    pub nu_hat: f64,
    /// `q(ν̂)`.
    pub m: f64,
    /// `m / prophet_limit(a, b, p)`.
    #[serde(rename = "M")]
    pub ratio: f64,
    pub case: BoundCase,
    pub nu_error_bound: f64,
    pub q_error_bound: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub options: BisectionOptions,
}

impl HardnessBound {
    pub fn params(&self) -> ClassParams {
        ClassParams::new(self.a, self.b, self.p)
    }

    pub fn profile(&self) -> AsymptoticProfile {
        AsymptoticProfile {
            params: self.params(),
            lambda_star: self.lambda_star,
            mu_star: self.mu_star,
        }
    }
}

/// Tolerance for the agreement of the two forms of `q'` at `ν̂`.
pub const DERIVATIVE_FORM_TOLERANCE: f64 = 1e-12;

/// Number of evaluation points for the `|q'|` supremum on the certified
/// interval.
pub const CERTIFICATE_GRID: usize = 100_000;

/// `M(a, b, p)` with the default tolerances `xtol = 1e-13`, `rtol = 1e-14`.
pub fn hardness_bound(a: f64, b: f64, p: f64) -> Result<HardnessBound> {
    hardness_bound_with(&ClassParams::new(a, b, p), &BisectionOptions::default())
}

/// Feasibility-checked bound with explicit bisection options.
pub fn hardness_bound_with(params: &ClassParams, opts: &BisectionOptions) -> Result<HardnessBound> {
    let report = validate_class(params)?;
    if !report.passed() {
        return Err(Error::Infeasible(Box::new(report)));
    }
    let profile = lambda_mu_star(params)?;
    bound_for_profile(&profile, opts)
}

/// Runs the procedure on raw formulas, skipping Conditions I–V. Used to
/// reach parameter boundaries such as `a = 0`, where `q'(μ*) = 0`.
pub fn hardness_bound_unchecked(params: &ClassParams, opts: &BisectionOptions) -> Result<HardnessBound> {
    params.ensure_finite()?;
    bound_for_profile(&profile_unchecked(params), opts)
}

fn bound_for_profile(profile: &AsymptoticProfile, opts: &BisectionOptions) -> Result<HardnessBound> {
    let params = profile.params;
    let at_lambda = q_prime(profile, profile.lambda_star);
    if at_lambda > 0.0 {
        return Err(Error::Inconsistent(at_lambda));
    }
    let at_mu = q_prime(profile, profile.mu_star);
    let (case, nu_hat, iterations, nu_error_bound) = if at_mu <= 0.0 {
        (BoundCase::Monotone, profile.mu_star, 0, 0.0)
    } else {
        let bis = bisect_profile(profile, opts)?;
        (BoundCase::Interior, bis.root, bis.iterations, bis.error_bound)
    };
    let drift = (q_prime(profile, nu_hat) - q_prime_unsubstituted(profile, nu_hat)).abs();
    if drift > DERIVATIVE_FORM_TOLERANCE {
        return Err(Error::Identity {
            what: "substituted and direct forms of q' disagree",
            deviation: drift,
        });
    }
    let m = q_of_nu(profile, nu_hat);
    let q_error_bound = if nu_error_bound > 0.0 {
        sup_abs_qprime(profile, nu_hat, nu_error_bound) * nu_error_bound
    } else {
        0.0
    };
    Ok(HardnessBound {
        a: params.a,
        b: params.b,
        p: params.p,
        lambda_star: profile.lambda_star,
        mu_star: profile.mu_star,
        nu_hat,
        m,
        ratio: m / prophet_limit(&params),
        case,
        nu_error_bound,
        q_error_bound,
        iterations,
        options: *opts,
    })
}

/// `max |q'|` over `[centre − radius, centre + radius]`, sampled on
/// [`CERTIFICATE_GRID`] points including both endpoints.
fn sup_abs_qprime(profile: &AsymptoticProfile, centre: f64, radius: f64) -> f64 {
    let lo = centre - radius;
    let step = 2.0 * radius / (CERTIFICATE_GRID - 1) as f64;
    (0..CERTIFICATE_GRID)
        .map(|i| q_prime(profile, lo + step * i as f64).abs())
        .chain([q_prime(profile, centre + radius).abs()])
        .fold(0.0, f64::max)
}

/// Error chain for a computed bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub case: BoundCase,
    /// `xtol + |ν̂| rtol`, the guarantee of the stopping rule.
    pub tolerance_bound: f64,
    /// Half the final bracket, `≤ tolerance_bound`.
    pub nu_error_bound: f64,
    /// `sup |q'|` on `[ν̂ − nu_error_bound, ν̂ + nu_error_bound]`.
    pub sup_abs_qprime: f64,
    /// `sup |q'| · nu_error_bound`, a bound on `|q(ν̂) − q(ν*)|`.
    pub q_error_bound: f64,
    /// `q'` at the ends of the certified interval; convexity of `q'`
    /// bounds it by the endpoint values from above.
    pub qprime_left: f64,
    pub qprime_right: f64,
}

/// Recomputes the error chain and checks `|q'| < 1` on the certified
/// interval. The monotone case has no root-finding error.
pub fn certify(bound: &HardnessBound) -> Result<Certificate> {
    let profile = bound.profile();
    if bound.case == BoundCase::Monotone {
        return Ok(Certificate {
            case: BoundCase::Monotone,
            tolerance_bound: 0.0,
            nu_error_bound: 0.0,
            sup_abs_qprime: 0.0,
            q_error_bound: 0.0,
            qprime_left: q_prime(&profile, bound.nu_hat),
            qprime_right: q_prime(&profile, bound.nu_hat),
        });
    }
    let tolerance_bound = bound.options.xtol + bound.nu_hat.abs() * bound.options.rtol;
    let radius = bound.nu_error_bound;
    if radius > tolerance_bound {
        return Err(Error::InvalidArgument(format!(
            "error bound {radius:e} exceeds the bisection guarantee {tolerance_bound:e}"
        )));
    }
    let sup = sup_abs_qprime(&profile, bound.nu_hat, radius);
    let qprime_left = q_prime(&profile, bound.nu_hat - radius);
    let qprime_right = q_prime(&profile, bound.nu_hat + radius);
    if !(sup < 1.0 && qprime_left.abs() < 1.0 && qprime_right.abs() < 1.0) {
        return Err(Error::Certification { sup });
    }
    Ok(Certificate {
        case: BoundCase::Interior,
        tolerance_bound,
        nu_error_bound: radius,
        sup_abs_qprime: sup,
        q_error_bound: sup * radius,
        qprime_left,
        qprime_right,
    })
}
