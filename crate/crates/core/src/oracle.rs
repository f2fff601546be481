//! Independent ground truth for the collapsed recursion.
//!
//! [`exhaustive_optimal_value`] runs backward induction over full value
//! histories without assuming that the continuation value depends only on
//! the step and on whether `a` has been seen. The Monte Carlo routines
//! sample the instance directly.
//!
//! Simulations split trials into fixed chunks of [`CHUNK_TRIALS`]; chunk `c`
//! draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `c`. Chunk
//! statistics are merged pairwise in chunk order, so results are
//! bit-identical for any thread count.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dp::ThresholdTables;
use crate::error::{Error, Result};
use crate::instance::Instance;

/// Largest `n` accepted by the exhaustive oracle.
pub const MAX_EXHAUSTIVE_N: usize = 8;

/// Trials per random stream.
pub const CHUNK_TRIALS: u64 = 1 << 14;

/// An observed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Symbol {
    Zero,
    B,
    /// The top value `n`.
    Top,
    A,
}

impl Symbol {
    pub fn value(self, inst: &Instance) -> f64 {
        match self {
            Symbol::Zero => 0.0,
            Symbol::B => inst.b(),
            Symbol::Top => inst.dist.top(),
            Symbol::A => inst.a(),
        }
    }
}

/// Optimal continuation value `γ̄` after observing `history`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryValue {
    pub history: Vec<Symbol>,
    pub gamma: f64,
    pub depth: usize,
}

impl HistoryValue {
    pub fn has_a(&self) -> bool {
        self.history.contains(&Symbol::A)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustiveOutcome {
    /// `E γ_1(X_1)`.
    pub value: f64,
    /// Number of nonterminal histories visited.
    pub histories: usize,
    /// Largest gap between `γ̄` values sharing a depth and an `a`-seen flag.
    pub collapse_spread: f64,
    /// `γ̄` by depth `1..=n` for histories containing `a`.
    pub with_a: Vec<f64>,
    /// `γ̄` by depth `1..=n` for histories without `a`.
    pub without_a: Vec<f64>,
}

impl ExhaustiveOutcome {
    /// `max |γ̄ − φ_k|` and `max |γ̄ − φ̄_k|` over all depths.
    pub fn deviation_from(&self, tables: &ThresholdTables) -> Result<f64> {
        if tables.n() != self.with_a.len() {
            return Err(Error::InvalidArgument(format!(
                "tables for n = {} compared with oracle for n = {}",
                tables.n(),
                self.with_a.len()
            )));
        }
        let mut worst = 0.0f64;
        for k in 1..=tables.n() {
            worst = worst
                .max((self.with_a[k - 1] - tables.phi(k)).abs())
                .max((self.without_a[k - 1] - tables.phibar(k)).abs());
        }
        Ok(worst)
    }
}

/// Full history table: every nonterminal history with its `γ̄`, in
/// depth-first order.
pub fn exhaustive_table(inst: &Instance) -> Result<(f64, Vec<HistoryValue>)> {
    let n = inst.n();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::TooLarge {
            what: "n for exhaustive enumeration",
            size: n as u64,
            limit: MAX_EXHAUSTIVE_N as u64,
        });
    }
    let mut walker = Walker {
        inst,
        n,
        table: Vec::new(),
        history: Vec::with_capacity(n + 1),
    };
    let value = walker.expected_gamma();
    Ok((value, walker.table))
}

/// Backward induction over all histories for `n ≤ 8`.
pub fn exhaustive_optimal_value(inst: &Instance) -> Result<ExhaustiveOutcome> {
    let (value, table) = exhaustive_table(inst)?;
    let n = inst.n();
    let mut with_a: Vec<Option<f64>> = vec![None; n];
    let mut without_a: Vec<Option<f64>> = vec![None; n];
    let mut spread = 0.0f64;
    for h in &table {
        let slot = if h.has_a() {
            &mut with_a[h.depth - 1]
        } else {
            &mut without_a[h.depth - 1]
        };
        match slot {
            Some(first) => spread = spread.max((*first - h.gamma).abs()),
            None => *slot = Some(h.gamma),
        }
    }
    let unwrap = |v: Vec<Option<f64>>| -> Vec<f64> { v.into_iter().map(|g| g.unwrap_or(f64::NAN)).collect() };
    Ok(ExhaustiveOutcome {
        value,
        histories: table.len(),
        collapse_spread: spread,
        with_a: unwrap(with_a),
        without_a: unwrap(without_a),
    })
}

struct Walker<'a> {
    inst: &'a Instance,
    n: usize,
    table: Vec<HistoryValue>,
    history: Vec<Symbol>,
}

impl Walker<'_> {
    /// Law of the next arrival given the current history. With `l` values
    /// seen and `a` not among them, `a` occupies each of the `n + 1 − l`
    /// remaining slots with equal probability.
    fn next_law(&self) -> Vec<(Symbol, f64)> {
        let l = self.history.len();
        let dist = &self.inst.dist;
        let v_law = [
            (Symbol::Top, dist.masses[0]),
            (Symbol::B, dist.masses[1]),
            (Symbol::Zero, dist.masses[2]),
        ];
        if self.history.contains(&Symbol::A) {
            return v_law.to_vec();
        }
        let p_a = 1.0 / (self.n + 1 - l) as f64;
        let mut law = vec![(Symbol::A, p_a)];
        if p_a < 1.0 {
            law.extend(v_law.iter().map(|&(s, m)| (s, (1.0 - p_a) * m)));
        }
        law
    }

    /// `E γ_{l+1}` over the next arrival.
    fn expected_gamma(&mut self) -> f64 {
        let mut total = 0.0;
        for (symbol, prob) in self.next_law() {
            let x = symbol.value(self.inst);
            self.history.push(symbol);
            let gamma = if self.history.len() == self.n + 1 {
                x
            } else {
                x.max(self.continuation())
            };
            self.history.pop();
            total += prob * gamma;
        }
        total
    }

    /// `γ̄` for the current (nonterminal) history.
    fn continuation(&mut self) -> f64 {
        let gamma = self.expected_gamma();
        self.table.push(HistoryValue {
            history: self.history.clone(),
            gamma,
            depth: self.history.len(),
        });
        gamma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub trials: u64,
    pub mean: f64,
    pub std_error: f64,
    /// Stopping step (policy) or arrival step of the maximum (prophet).
    pub stop_histogram: BTreeMap<usize, u64>,
    pub seed: u64,
}

impl SimulationReport {
    /// Writes the histogram as `step,count` rows.
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"step,count\n")?;
        for (step, count) in &self.stop_histogram {
            writeln!(out, "{step},{count}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Streaming mean and sum of squared deviations.
#[derive(Debug, Clone, Default)]
struct Stats {
    count: u64,
    mean: f64,
    m2: f64,
    histogram: BTreeMap<usize, u64>,
}

impl Stats {
    fn push(&mut self, x: f64, step: usize) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        *self.histogram.entry(step).or_insert(0) += 1;
    }

    fn merge(mut self, other: Stats) -> Stats {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * nb / total;
        self.m2 += other.m2 + delta * delta * na * nb / total;
        self.count += other.count;
        for (step, c) in other.histogram {
            *self.histogram.entry(step).or_insert(0) += c;
        }
        self
    }
}

/// Merges neighbours level by level: `((s0 s1) (s2 s3)) …`.
fn pairwise(mut level: Vec<Stats>) -> Stats {
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(left) = it.next() {
            next.push(match it.next() {
                Some(right) => left.merge(right),
                None => left,
            });
        }
        level = next;
    }
    level.pop().unwrap_or_default()
}

/// A sampled instance: the slot of `a` and the nonzero draws of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    /// Arrival step of `a`, in `1..=n+1`.
    pub a_step: usize,
    /// `(step, value)` for every nonzero `V`, in arrival order.
    pub nonzero: Vec<(usize, Symbol)>,
}

/// Draws one realization. Nonzero copies of `V` are located by geometric
/// gaps `⌊ln U / ln(1 − r)⌋`, `r = p/n + 1/n²`, which has the same law as
/// drawing all `n` copies.
pub fn sample_realization<R: Rng>(inst: &Instance, rng: &mut R) -> Realization {
    let n = inst.n();
    let a_step = rng.random_range(1..=n + 1);
    let r = inst.dist.nonzero_mass();
    let top_share = inst.dist.top_mass() / r;
    let log_miss = (-r).ln_1p();
    let mut nonzero = Vec::new();
    // index of the next V copy, zero-based
    let mut index = 0usize;
    loop {
        let u = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / log_miss).floor();
        if !(gap < (n - index) as f64) {
            break;
        }
        index += gap as usize;
        let symbol = if rng.random::<f64>() < top_share {
            Symbol::Top
        } else {
            Symbol::B
        };
        let step = if index + 1 < a_step { index + 1 } else { index + 2 };
        nonzero.push((step, symbol));
        index += 1;
        if index == n {
            break;
        }
    }
    Realization { a_step, nonzero }
}

/// Reward and stopping step of the threshold policy on one realization.
pub fn run_policy(inst: &Instance, tables: &ThresholdTables, real: &Realization) -> (f64, usize) {
    let n = inst.n();
    let last = n + 1;
    let mut arrivals = real.nonzero.iter().peekable();
    let mut a_pending = true;
    loop {
        let next_v = arrivals.peek().map(|&&(s, _)| s);
        let (step, value, is_a) = match next_v {
            Some(s) if !a_pending || s < real.a_step => {
                let (s, sym) = *arrivals.next().unwrap();
                (s, sym.value(inst), false)
            }
            _ if a_pending => (real.a_step, inst.a(), true),
            // only zeros remain
            _ => return (0.0, last),
        };
        if step == last {
            return (value, last);
        }
        if is_a {
            a_pending = false;
        }
        let threshold = if a_pending { tables.phibar(step) } else { tables.phi(step) };
        if value >= threshold {
            return (value, step);
        }
    }
}

/// Value of the offline maximum and the first step at which it arrives.
pub fn run_prophet(inst: &Instance, real: &Realization) -> (f64, usize) {
    let mut best = (inst.a(), real.a_step);
    for &(step, sym) in &real.nonzero {
        let v = sym.value(inst);
        if v > best.0 || (v == best.0 && step < best.1) {
            best = (v, step);
        }
    }
    best
}

fn simulate<F>(inst: &Instance, trials: u64, seed: u64, trial: F) -> Result<SimulationReport>
where
    F: Fn(&Realization) -> (f64, usize) + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if !inst.dist.is_probability_vector() {
        return Err(Error::InvalidPmf {
            n: inst.params.n,
            mass: inst.dist.nonzero_mass(),
        });
    }
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    let parts: Vec<Stats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = CHUNK_TRIALS.min(trials - c * CHUNK_TRIALS);
            let mut stats = Stats::default();
            for _ in 0..count {
                let real = sample_realization(inst, &mut rng);
                let (value, step) = trial(&real);
                stats.push(value, step);
            }
            stats
        })
        .collect();
    let stats = pairwise(parts);
    let std_error = if stats.count > 1 {
        (stats.m2 / (stats.count - 1) as f64).sqrt() / (stats.count as f64).sqrt()
    } else {
        0.0
    };
    Ok(SimulationReport {
        trials,
        mean: stats.mean,
        std_error,
        stop_histogram: stats.histogram,
        seed,
    })
}

/// Monte Carlo estimate of the threshold policy's expected reward.
pub fn simulate_policy(
    inst: &Instance,
    tables: &ThresholdTables,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if tables.n() != inst.n() {
        return Err(Error::InvalidArgument(format!(
            "tables for n = {} used with an instance of n = {}",
            tables.n(),
            inst.n()
        )));
    }
    simulate(inst, trials, seed, |real| run_policy(inst, tables, real))
}

/// Monte Carlo estimate of `E max`.
pub fn simulate_prophet(inst: &Instance, trials: u64, seed: u64) -> Result<SimulationReport> {
    simulate(inst, trials, seed, |real| run_prophet(inst, real))
}
