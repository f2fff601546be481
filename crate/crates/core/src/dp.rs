//! Collapsed backward induction on the hard instance.
//!
//! The continuation value at step `k` depends only on `k` and on whether the
//! constant `a` has already been observed, so the full history recursion
//! reduces to two sequences:
//!
//! ```text
//! φ_n = E V = (1 + bp)/n,                φ̄_n = a,
//! φ_k = E(V ∨ φ_{k+1}),
//! φ̄_k = (a ∨ φ_{k+1})/(n+1−k) + (1 − 1/(n+1−k)) E(V ∨ φ̄_{k+1}).
//! ```
//!
//! A value `x` probed at step `k` is accepted iff `x ≥` the applicable
//! threshold; step `n + 1` accepts anything.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sig;
use crate::instance::Instance;
use crate::prophet;

/// The sequences `φ_k` (after `a`) and `φ̄_k` (before `a`), `k = 1..=n`.
///
/// Stored zero-based: `phi[k - 1]` is `φ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTables {
    phi: Vec<f64>,
    phibar: Vec<f64>,
}

impl ThresholdTables {
    /// Wraps externally supplied thresholds, e.g. to simulate a modified
    /// policy. Both sequences must be nonempty and of equal length.
    pub fn from_raw(phi: Vec<f64>, phibar: Vec<f64>) -> Result<Self> {
        if phi.is_empty() || phi.len() != phibar.len() {
            return Err(Error::InvalidArgument(format!(
                "threshold lengths {} and {} must be equal and nonzero",
                phi.len(),
                phibar.len()
            )));
        }
        Ok(Self { phi, phibar })
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// `φ_k`, one-based.
    #[inline]
    pub fn phi(&self, k: usize) -> f64 {
        self.phi[k - 1]
    }

    /// `φ̄_k`, one-based.
    #[inline]
    pub fn phibar(&self, k: usize) -> f64 {
        self.phibar[k - 1]
    }

    pub fn phi_slice(&self) -> &[f64] {
        &self.phi
    }

    pub fn phibar_slice(&self) -> &[f64] {
        &self.phibar
    }
}

/// Backward pass over `k = n, n−1, …, 1`.
pub fn compute_thresholds(inst: &Instance) -> ThresholdTables {
    let n = inst.n();
    let a = inst.a();
    let dist = &inst.dist;
    let mut phi = vec![0.0; n];
    let mut phibar = vec![0.0; n];
    phi[n - 1] = dist.expected_value;
    phibar[n - 1] = a;
    for k in (1..n).rev() {
        let next_phi = phi[k];
        let next_phibar = phibar[k];
        // remaining slots after step k, one of which holds a
        let slots = (n + 1 - k) as f64;
        phi[k - 1] = dist.expected_max(next_phi);
        phibar[k - 1] =
            a.max(next_phi) / slots + (1.0 - 1.0 / slots) * dist.expected_max(next_phibar);
    }
    ThresholdTables { phi, phibar }
}

/// Acceptance times `(k_n, k̄_n, j_n)` and their normalisations.
///
/// An empty infimum is encoded as `n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AcceptanceTimes {
    pub n: usize,
    /// First `k` with `a ≥ φ_k`.
    pub j: usize,
    /// First `k` with `b ≥ φ_k`.
    pub k: usize,
    /// First `k` with `b ≥ φ̄_k`.
    pub kbar: usize,
}

impl AcceptanceTimes {
    /// `λ_n = j_n / n`.
    pub fn lambda(&self) -> f64 {
        self.j as f64 / self.n as f64
    }

    /// `μ_n = k_n / n`.
    pub fn mu(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// `ν_n = k̄_n / n`.
    pub fn nu(&self) -> f64 {
        self.kbar as f64 / self.n as f64
    }

    /// `k_n ≤ k̄_n ≤ j_n`.
    pub fn is_ordered(&self) -> bool {
        self.k <= self.kbar && self.kbar <= self.j
    }

    pub fn ensure_ordered(&self) -> Result<()> {
        if self.is_ordered() {
            Ok(())
        } else {
            Err(Error::Ordering {
                k: self.k,
                kbar: self.kbar,
                j: self.j,
            })
        }
    }
}

fn first_accepting(value: f64, thresholds: &[f64]) -> usize {
    thresholds
        .iter()
        .position(|&t| value >= t)
        .map_or(thresholds.len() + 1, |i| i + 1)
}

pub fn acceptance_times(tables: &ThresholdTables, inst: &Instance) -> AcceptanceTimes {
    AcceptanceTimes {
        n: tables.n(),
        j: first_accepting(inst.a(), &tables.phi),
        k: first_accepting(inst.b(), &tables.phi),
        kbar: first_accepting(inst.b(), &tables.phibar),
    }
}

/// `E γ_1(X_1)`: with probability `1/(n+1)` the first arrival is `a`.
pub fn optimal_value(inst: &Instance, tables: &ThresholdTables) -> f64 {
    let nf = inst.nf();
    let first_is_a = inst.a().max(tables.phi(1));
    let first_is_v = inst.dist.expected_max(tables.phibar(1));
    first_is_a / (nf + 1.0) + (nf / (nf + 1.0)) * first_is_v
}

/// Closed form of `φ_i` obtained by unrolling `φ_{k−1} = (1+pb)/n + q φ_k`,
/// valid where `b ∨ φ_k = b` (that is for `i ≥ k_n`):
///
/// `φ_i = (1+bp)/n · (1 − q^{n−i+1}) / (p/n + 1/n²)`, `q = 1 − p/n − 1/n²`.
pub fn phi_closed_form(inst: &Instance, i: usize) -> Result<f64> {
    let n = inst.n();
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, max: n });
    }
    if i == n {
        return Ok(inst.dist.expected_value);
    }
    let nonzero = inst.dist.nonzero_mass();
    let terms = (n - i + 1) as f64;
    // 1 − q^m computed as −expm1(m log1p(−x)) to avoid cancellation
    let geometric = -(terms * (-nonzero).ln_1p()).exp_m1() / nonzero;
    Ok(inst.dist.expected_value * geometric)
}

/// Optimal expected reward divided by the exact prophet expectation.
pub fn gambler_prophet_ratio(inst: &Instance) -> f64 {
    let tables = compute_thresholds(inst);
    optimal_value(inst, &tables) / prophet::prophet_exact(inst)
}

/// One row of the threshold-curve export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub k: usize,
    pub phi: f64,
    pub phibar: f64,
}

/// Rows for `k = 1, 1 + stride, …`, always ending with `k = n`.
pub fn emit_threshold_curves(tables: &ThresholdTables, stride: usize) -> Result<Vec<CurveRow>> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let n = tables.n();
    let row = |k| CurveRow {
        k,
        phi: tables.phi(k),
        phibar: tables.phibar(k),
    };
    let mut rows: Vec<CurveRow> = (1..=n).step_by(stride).map(row).collect();
    if rows.last().map(|r| r.k) != Some(n) {
        rows.push(row(n));
    }
    Ok(rows)
}

/// Writes `k,phi,phibar` rows with 15 significant digits and LF endings.
pub fn write_curves_csv<W: Write>(rows: &[CurveRow], mut out: W) -> Result<()> {
    out.write_all(b"k,phi,phibar\n")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.k, sig(r.phi, 15), sig(r.phibar, 15))?;
    }
    out.flush()?;
    Ok(())
}
