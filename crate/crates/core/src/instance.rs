//! The instance class: `n` iid copies of a three-point variable `V` plus the
//! constant `a`, and the closed-form conditions on `(a, b, p)` under which
//! the asymptotic ordering of the acceptance times holds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The n-independent parameters `(a, b, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    /// Constant reward, in `(0, 1)`.
    pub a: f64,
    /// Large reward, `> 1`.
    pub b: f64,
    /// Mass-scaling parameter, `> 0`.
    pub p: f64,
}

impl ClassParams {
    pub const fn new(a: f64, b: f64, p: f64) -> Self {
        Self { a, b, p }
    }

    pub fn ensure_finite(&self) -> Result<()> {
        for (name, value) in [("a", self.a), ("b", self.b), ("p", self.p)] {
            if !value.is_finite() {
                return Err(Error::NonFinite { name, value });
            }
        }
        Ok(())
    }

    /// `1/p + b`, the coefficient that recurs throughout the asymptotics.
    pub fn c(&self) -> f64 {
        1.0 / self.p + self.b
    }
}

/// Parameters of a concrete instance of size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub n: u64,
}

impl InstanceParams {
    pub const fn new(a: f64, b: f64, p: f64, n: u64) -> Self {
        Self { a, b, p, n }
    }

    pub fn class(&self) -> ClassParams {
        ClassParams::new(self.a, self.b, self.p)
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }
}

/// Law of `V`: support `(n, b, 0)` with masses `(1/n², p/n, 1 − p/n − 1/n²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueDistribution {
    /// `(n, b, 0)`.
    pub support: [f64; 3],
    /// `(1/n², p/n, 1 − p/n − 1/n²)`.
    pub masses: [f64; 3],
    /// `E V = (1 + bp)/n`.
    pub expected_value: f64,
}

impl ValueDistribution {
    pub fn new(b: f64, p: f64, n: u64) -> Self {
        let nf = n as f64;
        let top = 1.0 / (nf * nf);
        let mid = p / nf;
        let zero = (1.0 - mid) - top;
        Self {
            support: [nf, b, 0.0],
            masses: [top, mid, zero],
            expected_value: (1.0 + b * p) / nf,
        }
    }

    pub fn top(&self) -> f64 {
        self.support[0]
    }

    pub fn top_mass(&self) -> f64 {
        self.masses[0]
    }

    pub fn b_mass(&self) -> f64 {
        self.masses[1]
    }

    /// `q(n, p) = 1 − p/n − 1/n²`, the mass of the zero outcome.
    pub fn zero_mass(&self) -> f64 {
        self.masses[2]
    }

    /// `p/n + 1/n²`, the probability that `V` is nonzero.
    pub fn nonzero_mass(&self) -> f64 {
        self.masses[0] + self.masses[1]
    }

    pub fn is_probability_vector(&self) -> bool {
        self.masses.iter().all(|m| (0.0..=1.0).contains(m))
    }

    /// `E(V ∨ x)`, expanded over the three outcomes with the largest mass
    /// (the zero outcome) added last.
    #[inline]
    pub fn expected_max(&self, x: f64) -> f64 {
        let [top, b, _] = self.support;
        let [m_top, m_b, m_zero] = self.masses;
        m_top * top.max(x) + m_b * b.max(x) + m_zero * x.max(0.0)
    }
}

/// The checks making up a [`ConditionReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// `0 < a < 1 < b` and `p > 0`.
    Ordering,
    /// `log(1 + pb) < p`.
    Log,
    #[serde(rename = "I")]
    I,
    #[serde(rename = "II")]
    II,
    #[serde(rename = "III")]
    III,
    #[serde(rename = "IV")]
    IV,
    #[serde(rename = "V")]
    V,
    /// `p/n + 1/n² ≤ 1`.
    Pmf,
}

impl Condition {
    pub const CLASS: [Condition; 7] = [
        Condition::Ordering,
        Condition::Log,
        Condition::I,
        Condition::II,
        Condition::III,
        Condition::IV,
        Condition::V,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Ordering => "ordering",
            Condition::Log => "log",
            Condition::I => "I",
            Condition::II => "II",
            Condition::III => "III",
            Condition::IV => "IV",
            Condition::V => "V",
            Condition::Pmf => "pmf",
        }
    }

    /// Human-readable form of the inequality `lhs ? rhs`.
    pub fn relation(self) -> &'static str {
        match self {
            Condition::Ordering => "min(a, 1-a, b-1, p) > 0",
            Condition::Log => "log(1+pb) < p",
            Condition::I => "r log r <= ap, r = (1+bp)/(1+(b-a)p)",
            Condition::II => "(2-p)(b-a) < 1",
            Condition::III => "(1-(2-p)(b-a))/(1+p(b-a)) < 1 + log((1+p(b-a))/(1+pb))/p",
            Condition::IV => "2 + pb(1-p(b-a)) >= 0",
            Condition::V => "bp(1+(b-a)p)/((1+pb)log(1+pb)) < 1",
            Condition::Pmf => "p/n + 1/n^2 <= 1",
        }
    }

    fn evaluate(self, params: &ClassParams, n: u64) -> ConditionCheck {
        let ClassParams { a, b, p } = *params;
        let d = b - a;
        let (lhs, rhs, pass) = match self {
            Condition::Ordering => {
                let slack = a.min(1.0 - a).min(b - 1.0).min(p);
                (slack, 0.0, slack > 0.0)
            }
            Condition::Log => {
                let lhs = (p * b).ln_1p();
                (lhs, p, lhs < p)
            }
            Condition::I => {
                let r = (1.0 + b * p) / (1.0 + d * p);
                let lhs = r * r.ln();
                (lhs, a * p, lhs <= a * p)
            }
            Condition::II => {
                let lhs = (2.0 - p) * d;
                (lhs, 1.0, lhs < 1.0)
            }
            Condition::III => {
                let lhs = (1.0 - (2.0 - p) * d) / (1.0 + p * d);
                let rhs = 1.0 + ((1.0 + p * d) / (1.0 + p * b)).ln() / p;
                (lhs, rhs, lhs < rhs)
            }
            Condition::IV => {
                let lhs = 2.0 + p * b * (1.0 - p * d);
                (lhs, 0.0, lhs >= 0.0)
            }
            Condition::V => {
                let lhs = b * p * (1.0 + d * p) / ((1.0 + p * b) * (p * b).ln_1p());
                (lhs, 1.0, lhs < 1.0)
            }
            Condition::Pmf => {
                let nf = n as f64;
                let lhs = p / nf + 1.0 / (nf * nf);
                (lhs, 1.0, n >= 1 && lhs <= 1.0)
            }
        };
        ConditionCheck {
            condition: self,
            lhs,
            rhs,
            // NaN comparisons are false, so undefined expressions fail.
            pass,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One evaluated inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionCheck {
    #[serde(rename = "name")]
    pub condition: Condition,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Every feasibility check, evaluated without short-circuiting.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn failed_names(&self) -> Vec<&'static str> {
        self.failed().map(|c| c.condition.name()).collect()
    }

    pub fn get(&self, condition: Condition) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// The seven n-independent checks (everything except `pmf`).
pub fn validate_class(params: &ClassParams) -> Result<ConditionReport> {
    params.ensure_finite()?;
    Ok(ConditionReport {
        checks: Condition::CLASS
            .iter()
            .map(|c| c.evaluate(params, 0))
            .collect(),
    })
}

/// All eight checks for `H(a, b, p, n)`.
pub fn validate(a: f64, b: f64, p: f64, n: u64) -> Result<ConditionReport> {
    let params = ClassParams::new(a, b, p);
    let mut report = validate_class(&params)?;
    report.checks.push(Condition::Pmf.evaluate(&params, n));
    Ok(report)
}

/// A constructed instance: parameters together with the law of `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Instance {
    pub params: InstanceParams,
    pub dist: ValueDistribution,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.params.n as usize
    }

    pub fn nf(&self) -> f64 {
        self.params.nf()
    }

    pub fn a(&self) -> f64 {
        self.params.a
    }

    pub fn b(&self) -> f64 {
        self.params.b
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    pub fn class(&self) -> ClassParams {
        self.params.class()
    }

    /// Builds an instance without evaluating Conditions I–V or the pmf
    /// bound. Only finiteness and `n ≥ 1` are enforced; masses may be
    /// negative when `p/n + 1/n² > 1`. Meant for diagnostics such as
    /// algebraic oracle comparisons at `n = 1`.
    pub fn unchecked(a: f64, b: f64, p: f64, n: u64) -> Result<Self> {
        ClassParams::new(a, b, p).ensure_finite()?;
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        Ok(Self {
            params: InstanceParams::new(a, b, p, n),
            dist: ValueDistribution::new(b, p, n),
        })
    }

    /// Builds an instance whose law is a genuine probability vector but
    /// without requiring Conditions I–V.
    pub fn with_valid_pmf(a: f64, b: f64, p: f64, n: u64) -> Result<Self> {
        let inst = Self::unchecked(a, b, p, n)?;
        if !inst.dist.is_probability_vector() {
            return Err(Error::InvalidPmf {
                n,
                mass: inst.dist.nonzero_mass(),
            });
        }
        Ok(inst)
    }
}

/// Validates and constructs `H(a, b, p, n)`.
pub fn make_instance(a: f64, b: f64, p: f64, n: u64) -> Result<Instance> {
    let report = validate(a, b, p, n)?;
    if !report.passed() {
        return Err(Error::Infeasible(Box::new(report)));
    }
    Instance::with_valid_pmf(a, b, p, n)
}
