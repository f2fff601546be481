//! `rohard`: command-line driver for the hard-instance computations.
//!
//! Exit status is 0 on success, 1 when the parameters are infeasible or a
//! check fails, and 2 on usage errors.

mod config;

use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rohard::asymptotics::verify_bound_sandwich;
use rohard::bound::{certify, hardness_bound_with};
use rohard::dp::{
    acceptance_times, compute_thresholds, emit_threshold_curves, optimal_value, write_curves_csv,
};
use rohard::format::sig;
use rohard::instance::{make_instance, validate, validate_class};
use rohard::oracle::{simulate_policy, simulate_prophet};
use rohard::prophet::prophet;
use rohard::sweep::{dp_cross_check, refine, run_sweep, write_sweep_csv};
use rohard::{BisectionOptions, ClassParams, Error, Execution, GridRange, SweepSpec};
use serde_json::{json, Value};

use config::ConfigFile;

/// Significant digits for headline numbers in plain output.
const DIGITS: usize = 15;

#[derive(Debug, Parser)]
#[command(name = "rohard", version, about = "Hardness bound and backward induction for the random-order prophet instance")]
struct Cli {
    /// Flat key = value file supplying a, b, p and n; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the feasibility conditions.
    Validate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        json: bool,
    },
    /// Run the backward induction for one instance size.
    Dp {
        #[command(flatten)]
        params: ParamArgs,
        /// Write the threshold curves as CSV.
        #[arg(long, value_name = "FILE")]
        thresholds_out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Also check the finite-n sandwich bounds on the thresholds.
        #[arg(long)]
        diagnostics: bool,
        #[arg(long)]
        json: bool,
    },
    /// Compute the hardness bound M(a, b, p) with its certificate.
    Bound {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1e-13)]
        xtol: f64,
        #[arg(long, default_value_t = 1e-14)]
        rtol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo estimate of the optimal policy or of the prophet.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulate the offline maximum instead of the threshold policy.
        #[arg(long)]
        prophet: bool,
        /// Write the stopping-step histogram as CSV.
        #[arg(long, value_name = "FILE")]
        histogram_out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Rank a grid of parameters by M.
    Sweep {
        /// Range lo:hi:step, or a single value.
        #[arg(long, value_name = "RANGE")]
        a: Option<GridRange>,
        #[arg(long, value_name = "RANGE")]
        b: Option<GridRange>,
        #[arg(long, value_name = "RANGE")]
        p: Option<GridRange>,
        /// Cross-check the best point with the DP at this n.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = 0)]
        refine: usize,
        #[arg(long, default_value_t = 5.0)]
        shrink: f64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Evaluate grid points on one thread.
        #[arg(long)]
        serial: bool,
        #[arg(long)]
        json: bool,
    },
    /// Emit the threshold curves phi and phibar as CSV.
    Figure {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
}

#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
}

/// A usage problem detected after argument parsing.
#[derive(Debug)]
struct Usage(String);

impl Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Signals a failed check whose report has already been printed.
#[derive(Debug)]
struct CheckFailed(&'static str);

impl Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

struct Resolved {
    params: ClassParams,
    n: Option<u64>,
}

impl ParamArgs {
    fn resolve(&self, cfg: &ConfigFile) -> Result<Resolved> {
        let pick = |flag: Option<f64>, key: &str| -> Result<f64> {
            match flag {
                Some(v) => Ok(v),
                None => cfg
                    .get::<f64>(key)
                    .map_err(|e| usage(e.to_string()))?
                    .ok_or_else(|| usage(format!("missing --{key} (flag or config key)"))),
            }
        };
        let n = match self.n {
            Some(n) => Some(n),
            None => cfg.get::<u64>("n").map_err(|e| usage(e.to_string()))?,
        };
        Ok(Resolved {
            params: ClassParams::new(pick(self.a, "a")?, pick(self.b, "b")?, pick(self.p, "p")?),
            n,
        })
    }

    fn resolve_with_n(&self, cfg: &ConfigFile) -> Result<(ClassParams, u64)> {
        let r = self.resolve(cfg)?;
        let n = r.n.ok_or_else(|| usage("missing --n (flag or config key)"))?;
        Ok((r.params, n))
    }
}

/// Line-oriented `key = value` output.
#[derive(Default)]
struct Lines(String);

impl Lines {
    fn put(&mut self, key: &str, value: impl Display) {
        self.0.push_str(&format!("{key} = {value}\n"));
    }
}

fn emit_json(value: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn emit_lines(lines: Lines) -> Result<()> {
    io::stdout().lock().write_all(lines.0.as_bytes())?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn num(x: f64) -> String {
    sig(x, DIGITS)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Validate { params, json } => cmd_validate(&params, &cfg, json),
        Command::Dp {
            params,
            thresholds_out,
            stride,
            diagnostics,
            json,
        } => cmd_dp(&params, &cfg, thresholds_out.as_deref(), stride, diagnostics, json),
        Command::Bound {
            params,
            xtol,
            rtol,
            max_iter,
            json,
        } => {
            let opts = BisectionOptions { xtol, rtol, max_iter };
            cmd_bound(&params, &cfg, &opts, json)
        }
        Command::Simulate {
            params,
            trials,
            seed,
            prophet,
            histogram_out,
            json,
        } => cmd_simulate(&params, &cfg, trials, seed, prophet, histogram_out.as_deref(), json),
        Command::Sweep {
            a,
            b,
            p,
            n,
            refine,
            shrink,
            out,
            serial,
            json,
        } => {
            let range = |flag: Option<GridRange>, key: &str| -> Result<GridRange> {
                match (flag, cfg.raw(key)) {
                    (Some(r), _) => Ok(r),
                    (None, Some(text)) => text.parse().map_err(|e: Error| usage(e.to_string())),
                    (None, None) => Err(usage(format!("missing --{key} range"))),
                }
            };
            let mut spec = SweepSpec::new(range(a, "a")?, range(b, "b")?, range(p, "p")?);
            spec.n = match n {
                Some(n) => Some(n),
                None => cfg.get::<u64>("n").map_err(|e| usage(e.to_string()))?,
            };
            spec.refine_rounds = refine;
            spec.shrink = shrink;
            let exec = if serial { Execution::Serial } else { Execution::Parallel };
            cmd_sweep(&spec, exec, &out, json)
        }
        Command::Figure { params, out, stride } => cmd_figure(&params, &cfg, &out, stride),
    }
}

fn cmd_validate(args: &ParamArgs, cfg: &ConfigFile, json: bool) -> Result<()> {
    let r = args.resolve(cfg)?;
    let ClassParams { a, b, p } = r.params;
    let report = match r.n {
        Some(n) => validate(a, b, p, n)?,
        None => validate_class(&r.params)?,
    };
    if json {
        emit_json(&json!({ "feasible": report.passed(), "checks": report }))?;
    } else {
        let mut out = Lines::default();
        for c in &report.checks {
            let verdict = if c.pass { "pass" } else { "fail" };
            out.put(
                c.condition.name(),
                format!("{verdict} ({}; lhs {}, rhs {})", c.condition.relation(), c.lhs, c.rhs),
            );
        }
        out.put("feasible", report.passed());
        emit_lines(out)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CheckFailed("infeasible parameters").into())
    }
}

fn cmd_dp(
    args: &ParamArgs,
    cfg: &ConfigFile,
    thresholds_out: Option<&Path>,
    stride: usize,
    diagnostics: bool,
    json: bool,
) -> Result<()> {
    let (params, n) = args.resolve_with_n(cfg)?;
    let inst = make_instance(params.a, params.b, params.p, n)?;
    let tables = compute_thresholds(&inst);
    let times = acceptance_times(&tables, &inst);
    let value = optimal_value(&inst, &tables);
    let pv = prophet(&inst);
    let ratio = value / pv.exact;
    if let Some(path) = thresholds_out {
        let rows = emit_threshold_curves(&tables, stride).map_err(|e| usage(e.to_string()))?;
        write_curves_csv(&rows, create(path)?)?;
    }
    let report = diagnostics.then(|| verify_bound_sandwich(&inst, &tables, &times));
    if json {
        let mut v = json!({
            "n": n,
            "optimal_value": value,
            "prophet_exact": pv.exact,
            "prophet_limit": pv.limit,
            "ratio": ratio,
            "k": times.k,
            "kbar": times.kbar,
            "j": times.j,
            "mu_n": times.mu(),
            "nu_n": times.nu(),
            "lambda_n": times.lambda(),
        });
        if let Some(report) = &report {
            v["diagnostics"] = serde_json::to_value(report)?;
        }
        emit_json(&v)?;
    } else {
        let mut out = Lines::default();
        out.put("n", n);
        out.put("optimal_value", num(value));
        out.put("prophet_exact", num(pv.exact));
        out.put("prophet_limit", num(pv.limit));
        out.put("ratio", num(ratio));
        out.put("k", times.k);
        out.put("kbar", times.kbar);
        out.put("j", times.j);
        out.put("mu_n", num(times.mu()));
        out.put("nu_n", num(times.nu()));
        out.put("lambda_n", num(times.lambda()));
        if let Some(report) = &report {
            for r in &report.records {
                let verdict = if r.pass { "pass" } else { "fail" };
                out.put(
                    &format!("diagnostic.{}", r.check),
                    format!("{verdict} (k {}..={}, worst margin {:e})", r.k_lo, r.k_hi, r.worst_margin),
                );
            }
        }
        emit_lines(out)?;
    }
    match report {
        Some(r) if !r.passed() => Err(CheckFailed("threshold diagnostics failed").into()),
        _ => Ok(()),
    }
}

fn cmd_bound(args: &ParamArgs, cfg: &ConfigFile, opts: &BisectionOptions, json: bool) -> Result<()> {
    let params = args.resolve(cfg)?.params;
    if !(opts.xtol >= 0.0 && opts.rtol >= 0.0) || opts.xtol + opts.rtol == 0.0 {
        return Err(usage("tolerances must be nonnegative and not both zero"));
    }
    let bound = hardness_bound_with(&params, opts)?;
    let cert = certify(&bound)?;
    if json {
        let mut v = serde_json::to_value(bound)?;
        v["certificate"] = serde_json::to_value(cert)?;
        emit_json(&v)?;
    } else {
        let mut out = Lines::default();
        out.put("a", bound.a);
        out.put("b", bound.b);
        out.put("p", bound.p);
        out.put("case", bound.case);
        out.put("lambda_star", num(bound.lambda_star));
        out.put("mu_star", num(bound.mu_star));
        out.put("nu_hat", num(bound.nu_hat));
        out.put("m", num(bound.m));
        out.put("M", num(bound.ratio));
        out.put("iterations", bound.iterations);
        out.put("nu_error_bound", format!("{:e}", bound.nu_error_bound));
        out.put("q_error_bound", format!("{:e}", bound.q_error_bound));
        out.put("certificate.tolerance_bound", format!("{:e}", cert.tolerance_bound));
        out.put("certificate.sup_abs_qprime", format!("{:e}", cert.sup_abs_qprime));
        out.put("certificate.q_error_bound", format!("{:e}", cert.q_error_bound));
        emit_lines(out)?;
    }
    Ok(())
}

fn cmd_simulate(
    args: &ParamArgs,
    cfg: &ConfigFile,
    trials: u64,
    seed: u64,
    prophet_mode: bool,
    histogram_out: Option<&Path>,
    json: bool,
) -> Result<()> {
    let (params, n) = args.resolve_with_n(cfg)?;
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let inst = make_instance(params.a, params.b, params.p, n)?;
    let (report, reference) = if prophet_mode {
        (simulate_prophet(&inst, trials, seed)?, prophet(&inst).exact)
    } else {
        let tables = compute_thresholds(&inst);
        (
            simulate_policy(&inst, &tables, trials, seed)?,
            optimal_value(&inst, &tables),
        )
    };
    if let Some(path) = histogram_out {
        report.write_histogram_csv(create(path)?)?;
    }
    let target = if prophet_mode { "prophet" } else { "policy" };
    if json {
        let mut v = serde_json::to_value(&report)?;
        v["target"] = json!(target);
        v["n"] = json!(n);
        v["exact"] = json!(reference);
        emit_json(&v)?;
    } else {
        let mut out = Lines::default();
        out.put("target", target);
        out.put("n", n);
        out.put("trials", report.trials);
        out.put("seed", report.seed);
        out.put("mean", num(report.mean));
        out.put("std_error", num(report.std_error));
        out.put("exact", num(reference));
        out.put("distinct_steps", report.stop_histogram.len());
        emit_lines(out)?;
    }
    Ok(())
}

fn cmd_sweep(spec: &SweepSpec, exec: Execution, out_path: &Path, json: bool) -> Result<()> {
    if spec.refine_rounds > 0 && spec.shrink.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
        return Err(usage("--shrink must exceed 1"));
    }
    let records = run_sweep(spec, exec)?;
    write_sweep_csv(&records, create(out_path)?)?;
    let feasible = records.iter().filter(|r| r.feasible).count();
    let best = records.first().filter(|r| r.feasible);
    let refined = match best {
        Some(best) if spec.refine_rounds > 0 => Some(refine(best, spec, exec)?),
        _ => None,
    };
    let final_best = refined.as_ref().map(|o| &o.record).or(best);
    let cross = match (final_best, spec.n) {
        (Some(rec), Some(n)) => Some(dp_cross_check(rec, n)?),
        _ => None,
    };
    if json {
        emit_json(&json!({
            "points": records.len(),
            "feasible": feasible,
            "best": best,
            "refined": refined,
            "dp_ratio": cross,
        }))?;
    } else {
        let mut out = Lines::default();
        out.put("points", records.len());
        out.put("feasible", feasible);
        if let Some(best) = best {
            out.put("best.a", best.a);
            out.put("best.b", best.b);
            out.put("best.p", best.p);
            out.put("best.M", num(best.m_value.unwrap_or(f64::NAN)));
        }
        if let Some(r) = &refined {
            out.put("refined.a", r.record.a);
            out.put("refined.b", r.record.b);
            out.put("refined.p", r.record.p);
            out.put("refined.M", num(r.record.m_value.unwrap_or(f64::NAN)));
            out.put("refined.rounds", r.rounds);
            out.put("refined.warning", r.warning);
        }
        if let (Some(ratio), Some(n)) = (cross, spec.n) {
            out.put(&format!("dp_ratio.n{n}"), num(ratio));
        }
        emit_lines(out)?;
    }
    if best.is_none() {
        return Err(CheckFailed("no feasible grid point").into());
    }
    Ok(())
}

fn cmd_figure(args: &ParamArgs, cfg: &ConfigFile, out_path: &Path, stride: usize) -> Result<()> {
    let (params, n) = args.resolve_with_n(cfg)?;
    let inst = make_instance(params.a, params.b, params.p, n)?;
    let tables = compute_thresholds(&inst);
    let rows = emit_threshold_curves(&tables, stride).map_err(|e| usage(e.to_string()))?;
    write_curves_csv(&rows, create(out_path)?)?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    if err.downcast_ref::<CheckFailed>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidArgument(_)
            | Error::NonFinite { .. }
            | Error::TooLarge { .. }
            | Error::Domain { .. }
            | Error::IndexOutOfRange { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
