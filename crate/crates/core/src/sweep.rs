//! Grid search over `(a, b, p)` ranked by the hardness bound.
//!
//! Smaller `M` is a stronger hardness result, so records are sorted in
//! ascending `M` with infeasible points kept at the end. Grid values are
//! rounded to twelve decimals so that decimal grids hit their nominal
//! points exactly.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bound::{hardness_bound, BoundCase};
use crate::dp::gambler_prophet_ratio;
use crate::error::{Error, Result};
use crate::format::sig;
use crate::instance::{make_instance, validate_class, ClassParams};

/// Upper limit on the number of grid points.
pub const MAX_GRID_POINTS: u64 = 10_000_000;

/// Inclusive range `lo, lo + step, …, ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

fn snap(x: f64) -> f64 {
    // rounding through decimal text removes accumulated binary error
    format!("{x:.12}").parse().unwrap_or(x)
}

impl GridRange {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        for (name, v) in [("lo", lo), ("hi", hi), ("step", step)] {
            if !v.is_finite() {
                return Err(Error::NonFinite { name, value: v });
            }
        }
        if lo > hi || step <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "range {lo}:{hi}:{step} needs lo ≤ hi and step > 0"
            )));
        }
        Ok(Self { lo, hi, step })
    }

    /// A single value.
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x, step: 1.0 }
    }

    /// Number of steps between `lo` and the last grid value.
    fn steps(&self) -> u64 {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as u64
    }

    pub fn len(&self) -> u64 {
        self.steps() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| snap(self.lo + i as f64 * self.step))
            .collect()
    }

    /// Range centred on `x` with the step and the width divided by `factor`.
    pub fn shrink_around(&self, x: f64, factor: f64) -> Self {
        let step = self.step / factor;
        let half = (self.steps() / 2) as f64 * step;
        Self {
            lo: snap(x - half),
            hi: snap(x + half),
            step,
        }
    }
}

impl FromStr for GridRange {
    type Err = Error;

    /// Parses `lo:hi:step`, or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number '{t}' in range '{s}'")))
        };
        match parts.as_slice() {
            [x] => {
                let x = num(x)?;
                GridRange::new(x, x, 1.0)
            }
            [lo, hi, step] => GridRange::new(num(lo)?, num(hi)?, num(step)?),
            _ => Err(Error::InvalidArgument(format!(
                "range '{s}' must be lo:hi:step"
            ))),
        }
    }
}

impl fmt::Display for GridRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub a: GridRange,
    pub b: GridRange,
    pub p: GridRange,
    /// Instance size for a DP cross-check of the best point.
    pub n: Option<u64>,
    pub refine_rounds: usize,
    pub shrink: f64,
}

impl SweepSpec {
    pub fn new(a: GridRange, b: GridRange, p: GridRange) -> Self {
        Self {
            a,
            b,
            p,
            n: None,
            refine_rounds: 0,
            shrink: 5.0,
        }
    }

    pub fn grid_size(&self) -> u64 {
        self.a
            .len()
            .saturating_mul(self.b.len())
            .saturating_mul(self.p.len())
    }

    /// Grid points with `a` outermost and `p` innermost.
    pub fn points(&self) -> Result<Vec<ClassParams>> {
        let size = self.grid_size();
        if size > MAX_GRID_POINTS {
            return Err(Error::TooLarge {
                what: "sweep grid",
                size,
                limit: MAX_GRID_POINTS,
            });
        }
        let (bs, ps) = (self.b.values(), self.p.values());
        let mut out = Vec::with_capacity(size as usize);
        for a in self.a.values() {
            for &b in &bs {
                for &p in &ps {
                    out.push(ClassParams::new(a, b, p));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub feasible: bool,
    pub failed: Vec<String>,
    #[serde(rename = "M")]
    pub m_value: Option<f64>,
    pub case: Option<BoundCase>,
}

impl SweepRecord {
    pub fn params(&self) -> ClassParams {
        ClassParams::new(self.a, self.b, self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Validates a point and, if feasible, computes its bound.
pub fn evaluate(params: &ClassParams) -> SweepRecord {
    let mut rec = SweepRecord {
        a: params.a,
        b: params.b,
        p: params.p,
        feasible: false,
        failed: Vec::new(),
        m_value: None,
        case: None,
    };
    match validate_class(params) {
        Err(_) => rec.failed.push("finite".into()),
        Ok(report) if !report.passed() => {
            rec.failed = report.failed_names().into_iter().map(String::from).collect();
        }
        Ok(_) => match hardness_bound(params.a, params.b, params.p) {
            Ok(bound) => {
                rec.feasible = true;
                rec.m_value = Some(bound.ratio);
                rec.case = Some(bound.case);
            }
            Err(_) => rec.failed.push("bound".into()),
        },
    }
    rec
}

fn lexicographic(x: &SweepRecord, y: &SweepRecord) -> Ordering {
    x.a.total_cmp(&y.a)
        .then(x.b.total_cmp(&y.b))
        .then(x.p.total_cmp(&y.p))
}

/// Ascending `M`, infeasible last, ties broken by `(a, b, p)`.
pub fn ranking(x: &SweepRecord, y: &SweepRecord) -> Ordering {
    match (x.m_value, y.m_value) {
        (Some(mx), Some(my)) => mx.total_cmp(&my),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| lexicographic(x, y))
}

fn evaluate_all(points: &[ClassParams], exec: Execution) -> Vec<SweepRecord> {
    match exec {
        Execution::Serial => points.iter().map(evaluate).collect(),
        Execution::Parallel => points.par_iter().map(evaluate).collect(),
    }
}

/// Evaluates every grid point and returns the ranked records.
pub fn run_sweep(spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepRecord>> {
    let points = spec.points()?;
    let mut records = evaluate_all(&points, exec);
    records.sort_by(ranking);
    Ok(records)
}

/// Writes `a,b,p,feasible,failed_conditions,case,M`; failing conditions
/// are joined with `;` and `M` has 12 significant digits.
pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], mut out: W) -> Result<()> {
    out.write_all(b"a,b,p,feasible,failed_conditions,case,M\n")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.a,
            r.b,
            r.p,
            r.feasible,
            r.failed.join(";"),
            r.case.map(|c| c.to_string()).unwrap_or_default(),
            r.m_value.map(|m| sig(m, 12)).unwrap_or_default(),
        )?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineOutcome {
    pub record: SweepRecord,
    /// Set when a round found no feasible point; `record` is then the input.
    pub warning: bool,
    pub rounds: usize,
}

/// Re-sweeps shrinking grids centred on the incumbent for
/// `spec.refine_rounds` rounds. The incumbent is kept unless a strictly
/// smaller `M` is found, so the result never has a larger `M`.
pub fn refine(best: &SweepRecord, spec: &SweepSpec, exec: Execution) -> Result<RefineOutcome> {
    let Some(mut best_m) = best.m_value.filter(|_| best.feasible) else {
        return Err(Error::InvalidArgument(
            "refinement needs a feasible starting point".into(),
        ));
    };
    if !(spec.shrink > 1.0) || !spec.shrink.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "shrink factor {} must exceed 1",
            spec.shrink
        )));
    }
    let mut incumbent = best.clone();
    let (mut ra, mut rb, mut rp) = (spec.a, spec.b, spec.p);
    for round in 0..spec.refine_rounds {
        ra = ra.shrink_around(incumbent.a, spec.shrink);
        rb = rb.shrink_around(incumbent.b, spec.shrink);
        rp = rp.shrink_around(incumbent.p, spec.shrink);
        let local = SweepSpec::new(ra, rb, rp);
        let records = run_sweep(&local, exec)?;
        let Some(top) = records.first().filter(|r| r.feasible) else {
            return Ok(RefineOutcome {
                record: best.clone(),
                warning: true,
                rounds: round,
            });
        };
        if let Some(m) = top.m_value.filter(|&m| m < best_m) {
            best_m = m;
            incumbent = top.clone();
        }
    }
    Ok(RefineOutcome {
        record: incumbent,
        warning: false,
        rounds: spec.refine_rounds,
    })
}

/// Finite-n gambler-to-prophet ratio at a record's parameters.
pub fn dp_cross_check(record: &SweepRecord, n: u64) -> Result<f64> {
    let inst = make_instance(record.a, record.b, record.p, n)?;
    Ok(gambler_prophet_ratio(&inst))
}
