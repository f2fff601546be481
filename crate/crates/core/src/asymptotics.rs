//! Closed-form asymptotics of the acceptance times and of the optimal value.
//!
//! With `c = 1/p + b`, the optimal value satisfies
//! `E V_T = q(λ_n, μ_n, ν_n) + O(1/n)` where
//!
//! ```text
//! q(λ, μ, ν) = μ²/2 − ν²/2 + ν + c + (1/p − μ) c e^{p(μ−1)}
//!            + [c(ν − λ) − a/p] e^{p(ν−1)} − (1/p)(c − a) e^{p(ν−λ)}
//! ```
//!
//! and `λ_n → λ*`, `μ_n → μ*`. The hardness bound maximises `q(λ*, μ*, ·)`
//! over `[μ*, λ*]`.

use serde::Serialize;

use crate::dp::{AcceptanceTimes, ThresholdTables};
use crate::error::{Error, Result};
use crate::instance::{validate_class, ClassParams, Condition, Instance};

/// Limits of `j_n/n` and `k_n/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticProfile {
    pub params: ClassParams,
    /// `1 + (1/p) log((1 + (b−a)p)/(1 + bp))`.
    pub lambda_star: f64,
    /// `1 − (1/p) log(1 + bp)`.
    pub mu_star: f64,
}

/// Requires the ordering and log conditions, which make `0 < μ* < λ* < 1`.
pub fn lambda_mu_star(params: &ClassParams) -> Result<AsymptoticProfile> {
    let report = validate_class(params)?;
    for cond in [Condition::Ordering, Condition::Log] {
        if !report.get(cond).is_some_and(|c| c.pass) {
            return Err(Error::ConditionFailed(cond.name()));
        }
    }
    Ok(profile_unchecked(params))
}

/// The formulas without any feasibility checks.
pub fn profile_unchecked(params: &ClassParams) -> AsymptoticProfile {
    let ClassParams { a, b, p } = *params;
    let lambda_star = 1.0 + ((1.0 + (b - a) * p) / (1.0 + b * p)).ln() / p;
    let mu_star = 1.0 - (b * p).ln_1p() / p;
    AsymptoticProfile {
        params: *params,
        lambda_star,
        mu_star,
    }
}

/// The exponential quadratic `q_{a,b,p}(λ, μ, ν)`.
pub fn q_eval(params: &ClassParams, lambda: f64, mu: f64, nu: f64) -> f64 {
    let ClassParams { a, b, p } = *params;
    let c = 1.0 / p + b;
    mu * mu / 2.0 - nu * nu / 2.0 + nu + c
        + (1.0 / p - mu) * c * (p * (mu - 1.0)).exp()
        + (c * (nu - lambda) - a / p) * (p * (nu - 1.0)).exp()
        - (1.0 / p) * (c - a) * (p * (nu - lambda)).exp()
}

/// `ν ↦ q(λ*, μ*, ν)`.
pub fn q_of_nu(profile: &AsymptoticProfile, nu: f64) -> f64 {
    q_eval(&profile.params, profile.lambda_star, profile.mu_star, nu)
}

/// First three derivatives of `ν ↦ q(λ*, μ*, ν)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QDerivatives {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

/// `q'(ν) = 1 − ν + [(1+bp)(ν−λ*) − a] e^{p(ν−1)}`, which uses the identity
/// `(1/p + b − a) e^{p(ν−λ*)} = (1/p + b) e^{p(ν−1)}`.
pub fn q_prime(profile: &AsymptoticProfile, nu: f64) -> f64 {
    let ClassParams { a, b, p } = profile.params;
    1.0 - nu + ((1.0 + b * p) * (nu - profile.lambda_star) - a) * (p * (nu - 1.0)).exp()
}

/// `q'` before the exponential identity is applied; must agree with
/// [`q_prime`] to rounding.
pub fn q_prime_unsubstituted(profile: &AsymptoticProfile, nu: f64) -> f64 {
    let ClassParams { a, b, p } = profile.params;
    let c = 1.0 / p + b;
    let lambda = profile.lambda_star;
    1.0 - nu + (c + (1.0 + b * p) * (nu - lambda) - a) * (p * (nu - 1.0)).exp()
        - (c - a) * (p * (nu - lambda)).exp()
}

fn derivatives_unchecked(profile: &AsymptoticProfile, nu: f64) -> QDerivatives {
    let ClassParams { a, b, p } = profile.params;
    let shift = (1.0 + b * p) * (nu - profile.lambda_star);
    let e = (p * (nu - 1.0)).exp();
    QDerivatives {
        q1: q_prime(profile, nu),
        q2: -1.0 + (1.0 + p * (b - a + shift)) * e,
        q3: p * (2.0 + p * (2.0 * b - a + shift)) * e,
    }
}

/// Derivatives on `[μ*, λ*]`, the interval where their closed forms are
/// used in the maximisation argument.
pub fn q_derivatives(profile: &AsymptoticProfile, nu: f64) -> Result<QDerivatives> {
    let (lo, hi) = (profile.mu_star, profile.lambda_star);
    if !(lo..=hi).contains(&nu) {
        return Err(Error::Domain { value: nu, lo, hi });
    }
    Ok(derivatives_unchecked(profile, nu))
}

/// `E_i V_T` (expectation conditional on `a` arriving at step `i`) with the
/// `O(1/n)` terms dropped. Piecewise in `i` with breakpoints `k_n`, `k̄_n`,
/// `j_n`.
pub fn conditional_expectation_asymptotic(
    inst: &Instance,
    times: &AcceptanceTimes,
    i: usize,
) -> Result<f64> {
    times.ensure_ordered()?;
    let n = inst.n();
    if i == 0 || i > n + 1 {
        return Err(Error::IndexOutOfRange {
            index: i,
            max: n + 1,
        });
    }
    let p = inst.p();
    let c = 1.0 / p + inst.b();
    let x = i as f64 / inst.nf();
    let segment = |t: f64| t + c * (1.0 - (p * (t - 1.0)).exp());
    Ok(if i < times.k {
        segment(times.mu())
    } else if i < times.kbar {
        segment(x)
    } else if i < times.j {
        segment(times.nu())
    } else {
        let decay = (p * (times.nu() - x)).exp();
        times.nu() + c * (1.0 - decay) + inst.a() * decay
    })
}

/// The four segment sums `S_{1,k−1}`, `S_{k,k̄−1}`, `S_{k̄,j−1}`, `S_{j,n+1}`
/// of the law-of-total-expectation decomposition, in asymptotic form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSums {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
}

impl PartialSums {
    pub fn total(&self) -> f64 {
        self.s1 + self.s2 + self.s3 + self.s4
    }
}

/// Tolerance on the assembly identity `S1 + S2 + S3 + S4 = q(λ_n, μ_n, ν_n)`.
pub const ASSEMBLY_TOLERANCE: f64 = 1e-10;

pub fn partial_sums(inst: &Instance, times: &AcceptanceTimes) -> Result<PartialSums> {
    times.ensure_ordered()?;
    let params = inst.class();
    let ClassParams { a, p, .. } = params;
    let c = params.c();
    let (lambda, mu, nu) = (times.lambda(), times.mu(), times.nu());
    let s1 = mu * mu + mu * c * (1.0 - (p * (mu - 1.0)).exp());
    // empty segments contribute exactly zero
    let s2 = if times.kbar == times.k {
        0.0
    } else {
        nu * nu / 2.0 - mu * mu / 2.0 + c * (nu - mu)
            - ((-p).exp() / p) * c * ((p * nu).exp() - (p * mu).exp())
    };
    let s3 = if times.j == times.kbar {
        0.0
    } else {
        -nu * nu + lambda * nu + (lambda - nu) * c * (1.0 - (p * (nu - 1.0)).exp())
    };
    let s4 = -lambda * nu + nu + c * (1.0 - lambda)
        - (1.0 / p) * (c - a) * ((-p * (lambda - nu)).exp() - (-p * (1.0 - nu)).exp());
    let sums = PartialSums { s1, s2, s3, s4 };
    let deviation = (sums.total() - q_eval(&params, lambda, mu, nu)).abs();
    if deviation > ASSEMBLY_TOLERANCE {
        return Err(Error::Identity {
            what: "segment sums do not assemble into q",
            deviation,
        });
    }
    Ok(sums)
}

/// `⌈n (1 − (2−p)(b−a)) / (1 + p(b−a))⌉`, the first step at which `b`
/// exceeds the upper bound on `φ̄_k`.
pub fn k_star(params: &ClassParams, n: u64) -> Result<usize> {
    let ClassParams { a, b, p } = *params;
    let d = b - a;
    if !((2.0 - p) * d < 1.0) {
        return Err(Error::ConditionFailed(Condition::II.name()));
    }
    let gamma = (1.0 - (2.0 - p) * d) / (1.0 + p * d);
    Ok((n as f64 * gamma).ceil() as usize)
}

/// One diagnostic: the extreme signed margin over a range of steps. A
/// positive margin means the claimed inequality holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticRecord {
    pub check: String,
    pub k_lo: usize,
    pub k_hi: usize,
    pub worst_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DiagnosticsReport {
    pub records: Vec<DiagnosticRecord>,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn get(&self, check: &str) -> Option<&DiagnosticRecord> {
        self.records.iter().find(|r| r.check == check)
    }
}

/// Rounding allowance for the threshold sandwich. The lower bound is attained
/// with equality for `k ≥ j_n − 1`, so its exact margin there is zero.
pub const SANDWICH_ROUNDING: f64 = 1e-12;

/// Checks the finite-n sandwich on `φ̄_k`:
///
/// * lower: `φ̄_k ≥ a + ((1+(b−a)p)/n − a/n²) Σ_{j=0}^{n−k−1} (n−k−j)/(n+1−k) q^j`
///   for `k ≥ k_n − 1`;
/// * upper: `φ̄_k ≤ a + (n−k)/2 · (1+(b−a)p)/n` for `j_n ≤ k ≤ n − 1`;
///
/// and the orderings `k_n ≤ k̄_n ≤ k*_n < j_n`.
pub fn verify_bound_sandwich(
    inst: &Instance,
    tables: &ThresholdTables,
    times: &AcceptanceTimes,
) -> DiagnosticsReport {
    let n = inst.n();
    let nf = inst.nf();
    let ClassParams { a, b, p } = inst.class();
    let q = inst.dist.zero_mass();
    let slope = (1.0 + (b - a) * p) / nf;
    let mut records = Vec::new();

    // Lower bound. With m = n − k, the sum equals T_m/(m+1) where
    // T_m = Σ_{j<m} (m−j) q^j obeys T_{m+1} = T_m + G_{m+1}, G_{m+1} = 1 + q G_m.
    let lo_k = times.k.saturating_sub(1).max(1);
    if lo_k <= n {
        let coeff = slope - a / (nf * nf);
        let (mut geo, mut tri) = (0.0f64, 0.0f64);
        let mut worst = f64::INFINITY;
        for m in 0..=(n - lo_k) {
            if m > 0 {
                geo = 1.0 + q * geo;
                tri += geo;
            }
            let k = n - m;
            let bound = a + coeff * tri / (m as f64 + 1.0);
            worst = worst.min(tables.phibar(k) - bound);
        }
        records.push(DiagnosticRecord {
            check: "phibar_lower_bound".into(),
            k_lo: lo_k,
            k_hi: n,
            worst_margin: worst,
            pass: worst >= -SANDWICH_ROUNDING,
        });
    }

    // Upper bound.
    if times.j < n {
        let worst = (times.j..n)
            .map(|k| a + (n - k) as f64 / 2.0 * slope - tables.phibar(k))
            .fold(f64::INFINITY, f64::min);
        records.push(DiagnosticRecord {
            check: "phibar_upper_bound".into(),
            k_lo: times.j,
            k_hi: n - 1,
            worst_margin: worst,
            pass: worst >= -SANDWICH_ROUNDING,
        });
    }

    let ordering = |check: &str, lo: usize, hi: usize, margin: f64, pass: bool| DiagnosticRecord {
        check: check.into(),
        k_lo: lo,
        k_hi: hi,
        worst_margin: margin,
        pass,
    };
    records.push(ordering(
        "k_le_kbar",
        times.k,
        times.kbar,
        times.kbar as f64 - times.k as f64,
        times.k <= times.kbar,
    ));
    match k_star(&inst.class(), inst.params.n) {
        Ok(ks) => {
            records.push(ordering(
                "kbar_le_kstar",
                times.kbar,
                ks,
                ks as f64 - times.kbar as f64,
                times.kbar <= ks,
            ));
            records.push(ordering(
                "kstar_lt_j",
                ks,
                times.j,
                times.j as f64 - ks as f64,
                ks < times.j,
            ));
        }
        Err(_) => {
            for check in ["kbar_le_kstar", "kstar_lt_j"] {
                records.push(ordering(check, 0, 0, f64::NAN, false));
            }
        }
    }
    DiagnosticsReport { records }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{acceptance_times, compute_thresholds, optimal_value};
    use crate::instance::make_instance;
    use crate::{reference_params, REF_A, REF_B, REF_P};

    fn reference_profile() -> AsymptoticProfile {
        lambda_mu_star(&reference_params()).unwrap()
    }

    #[test]
    fn star_values() {
        let prof = reference_profile();
        assert!((prof.lambda_star - 0.41519).abs() < 5e-6, "{}", prof.lambda_star);
        assert!((prof.mu_star - 0.0022529).abs() < 1e-6, "{}", prof.mu_star);
        assert!((prof.lambda_star * 1e6 - 415187.0).abs() < 5.0);
        assert!((prof.mu_star * 1e6 - 2253.0).abs() < 5.0);
        assert!(0.0 < prof.mu_star && prof.mu_star < prof.lambda_star && prof.lambda_star < 1.0);
    }

    #[test]
    fn mu_star_ignores_a() {
        let m1 = profile_unchecked(&ClassParams::new(0.3, 1.24, 0.421)).mu_star;
        let m2 = profile_unchecked(&ClassParams::new(0.9, 1.24, 0.421)).mu_star;
        assert_eq!(m1, m2);
    }

    #[test]
    fn infeasible_profile_is_rejected() {
        assert!(matches!(
            lambda_mu_star(&ClassParams::new(0.789, 1.24, 0.2)),
            Err(Error::ConditionFailed("log"))
        ));
        assert!(lambda_mu_star(&ClassParams::new(0.5, 1.0, 0.4)).is_err());
    }

    #[test]
    fn q_collapses_when_segments_vanish() {
        // λ = μ = ν: the middle segments vanish and q reduces to the first
        // and last segment sums evaluated by hand.
        let params = reference_params();
        let (a, b, p) = (params.a, params.b, params.p);
        let c = 1.0 / p + b;
        let t = 0.3;
        let direct = t * t / 2.0 - t * t / 2.0 + t + c + (1.0 / p - t) * c * (p * (t - 1.0)).exp()
            - (a / p) * (p * (t - 1.0)).exp()
            - (c - a) / p;
        assert!((q_eval(&params, t, t, t) - direct).abs() < 1e-14);
    }

    #[test]
    fn derivative_forms_agree() {
        let prof = reference_profile();
        for i in 0..=100 {
            let nu = prof.mu_star + (prof.lambda_star - prof.mu_star) * i as f64 / 100.0;
            let d = (q_prime(&prof, nu) - q_prime_unsubstituted(&prof, nu)).abs();
            assert!(d < 1e-12, "{nu}: {d:e}");
        }
    }

    #[test]
    fn derivative_domain() {
        let prof = reference_profile();
        assert!(q_derivatives(&prof, prof.mu_star).is_ok());
        assert!(q_derivatives(&prof, prof.lambda_star).is_ok());
        assert!(matches!(
            q_derivatives(&prof, prof.lambda_star + 1e-9),
            Err(Error::Domain { .. })
        ));
        assert!(q_derivatives(&prof, 0.0).is_err());
    }

    #[test]
    fn q_prime_vanishes_at_published_root() {
        let prof = reference_profile();
        let d = q_derivatives(&prof, 0.211231196923).unwrap();
        assert!(d.q1.abs() < 1e-12, "{:e}", d.q1);
        assert!(d.q2 < 0.0);
    }

    #[test]
    fn q_prime_at_lambda_is_nonpositive() {
        for (a, b, p) in [(0.789, 1.24, 0.421), (0.8, 1.25, 0.45), (0.75, 1.2, 0.4)] {
            let prof = lambda_mu_star(&ClassParams::new(a, b, p)).unwrap();
            assert!(q_prime(&prof, prof.lambda_star) <= 0.0);
        }
    }

    #[test]
    fn conditional_expectation_pieces() {
        let inst = make_instance(REF_A, REF_B, REF_P, 10_000).unwrap();
        let tables = compute_thresholds(&inst);
        let times = acceptance_times(&tables, &inst);
        let p = REF_P;
        let c = 1.0 / p + REF_B;
        let first = conditional_expectation_asymptotic(&inst, &times, 1).unwrap();
        let mu = times.mu();
        assert!((first - (mu + c * (1.0 - (p * (mu - 1.0)).exp()))).abs() < 1e-15);
        // constant on [kbar, j)
        let v1 = conditional_expectation_asymptotic(&inst, &times, times.kbar).unwrap();
        let v2 = conditional_expectation_asymptotic(&inst, &times, times.j - 1).unwrap();
        assert_eq!(v1, v2);
        assert!(conditional_expectation_asymptotic(&inst, &times, 0).is_err());
        assert!(conditional_expectation_asymptotic(&inst, &times, inst.n() + 2).is_err());

        let values: Vec<f64> = (1..=inst.n() + 1)
            .map(|i| conditional_expectation_asymptotic(&inst, &times, i).unwrap())
            .collect();
        // piece two follows i/n exactly
        for i in times.k..times.kbar {
            let x = i as f64 / inst.nf();
            assert_eq!(values[i - 1], x + c * (1.0 - (p * (x - 1.0)).exp()));
        }
        // piece one jumps into piece two at k only through i/n
        assert_eq!(values[times.k - 1], values[0]);
        // constant on [1, k)
        assert!(values[..times.k - 1].windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn ordering_violation_is_an_error() {
        let inst = make_instance(REF_A, REF_B, REF_P, 100).unwrap();
        let bad = AcceptanceTimes {
            n: 100,
            j: 10,
            k: 20,
            kbar: 15,
        };
        assert!(matches!(
            conditional_expectation_asymptotic(&inst, &bad, 1),
            Err(Error::Ordering { .. })
        ));
        assert!(matches!(partial_sums(&inst, &bad), Err(Error::Ordering { .. })));
    }

    #[test]
    fn partial_sums_assemble_into_q() {
        for n in [1_000u64, 100_000] {
            let inst = make_instance(REF_A, REF_B, REF_P, n).unwrap();
            let tables = compute_thresholds(&inst);
            let times = acceptance_times(&tables, &inst);
            let sums = partial_sums(&inst, &times).unwrap();
            let q = q_eval(&inst.class(), times.lambda(), times.mu(), times.nu());
            assert!((sums.total() - q).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_segments_are_zero() {
        let inst = make_instance(REF_A, REF_B, REF_P, 1000).unwrap();
        let times = AcceptanceTimes {
            n: 1000,
            k: 5,
            kbar: 5,
            j: 5,
        };
        let sums = partial_sums(&inst, &times).unwrap();
        assert_eq!(sums.s2, 0.0);
        assert_eq!(sums.s3, 0.0);
    }

    #[test]
    fn law_of_total_expectation_matches_dp() {
        let inst = make_instance(REF_A, REF_B, REF_P, 100_000).unwrap();
        let tables = compute_thresholds(&inst);
        let times = acceptance_times(&tables, &inst);
        let n = inst.n();
        let avg: f64 = (1..=n + 1)
            .map(|i| conditional_expectation_asymptotic(&inst, &times, i).unwrap())
            .sum::<f64>()
            / (n as f64 + 1.0);
        let dp = optimal_value(&inst, &tables);
        assert!((avg - dp).abs() < 1e-3, "{avg} vs {dp}");
    }

    #[test]
    fn k_star_values() {
        let ks = k_star(&reference_params(), 1_000_000).unwrap();
        assert!((ks as i64 - 241_935).abs() <= 1, "{ks}");
        assert!((211_231..415_187).contains(&ks));
        assert!(matches!(
            k_star(&ClassParams::new(0.2, 1.5, 0.4), 100),
            Err(Error::ConditionFailed("II"))
        ));
    }

    #[test]
    fn sandwich_holds_at_n_10_4() {
        let inst = make_instance(REF_A, REF_B, REF_P, 10_000).unwrap();
        let tables = compute_thresholds(&inst);
        let times = acceptance_times(&tables, &inst);
        let report = verify_bound_sandwich(&inst, &tables, &times);
        assert!(report.passed(), "{report:#?}");
        assert_eq!(report.records.len(), 5);
        // base case of the upper bound at k = n − 1
        let n = inst.n();
        let base = REF_A + (1.0 + (REF_B - REF_A) * REF_P) / (2.0 * n as f64);
        assert!(tables.phibar(n - 1) <= base);
    }

    #[test]
    fn lower_bound_sum_matches_closed_form() {
        // S_{k,n} = (1−q^m)/(1−q) − (1 − q^m (m(1−q) + 1)) / ((m+1)(1−q)²), m = n − k
        let n = 500usize;
        let inst = make_instance(REF_A, REF_B, REF_P, n as u64).unwrap();
        let q = inst.dist.zero_mass();
        let (mut geo, mut tri) = (0.0f64, 0.0f64);
        for m in 0..n {
            if m > 0 {
                geo = 1.0 + q * geo;
                tri += geo;
            }
            let mf = m as f64;
            let qm = q.powi(m as i32);
            let closed =
                (1.0 - qm) / (1.0 - q) - (1.0 - qm * (mf * (1.0 - q) + 1.0)) / ((mf + 1.0) * (1.0 - q).powi(2));
            let direct: f64 = (0..m).map(|j| (m - j) as f64 / (mf + 1.0) * q.powi(j as i32)).sum();
            assert!((tri / (mf + 1.0) - direct).abs() < 1e-9 * direct.max(1.0));
            assert!((closed - direct).abs() < 1e-6 * direct.max(1.0));
        }
    }
}
