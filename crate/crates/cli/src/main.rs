//! `epibarrier` command-line front end.
//!
//! Every command reads one JSON scenario file (`--config`) and writes CSV and
//! JSON files under `--out`, together with a `manifest.json` recording the
//! inputs and output digests. Exit codes: 0 success, 2 input error, 3 compute
//! failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use epibarrier::analysis::classify;
use epibarrier::barrier::{assemble_set, ComputedSet};
use epibarrier::export::{curve_table, fmt_f64, trajectory_table, Manifest, SetDocument, FORMAT_VERSION};
use epibarrier::policy::{
    membership_oracle, monte_carlo, oracle_grid, simulate, OracleOptions, Policy, SwitchingSets, DEFAULT_T_END,
};
use epibarrier::scenario::validate_config;
use epibarrier::{Error, ModelVariant, Scenario, SetKind, StateVec, Tolerances};

#[derive(Parser)]
#[command(name = "epibarrier", version, about = "Admissible and robust invariant sets for SIR/SEIR models under an infection cap")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the scenario and print the result as JSON.
    Classify(Common),
    /// Compute barrier curves and write them with `set.json`.
    Barrier {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        set: SetArg,
        /// Number of SEIR barrier curves (SIR always has one).
        #[arg(long, default_value_t = 30)]
        curves: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Simulate one trajectory under a policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// `constant:BETA[,GAMMA[,ETA]]` (or `constant:beta=..,gamma=..`),
        /// `feedback[:DISTURBANCE]` or `switching`.
        #[arg(long)]
        policy: String,
        /// Initial state `S,I` (SIR) or `S,I,E` (SEIR).
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = DEFAULT_T_END)]
        t_end: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Feedback runs with the disturbance drawn uniformly from its interval.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        /// Initial state `S,I` (SIR) or `S,I,E` (SEIR).
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_T_END)]
        t_end: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check membership verdicts against brute-force simulation.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        set: SetArg,
        /// Cells per axis of an S x I grid (SIR only).
        #[arg(long, conflicts_with = "points", required_unless_present = "points")]
        grid: Option<usize>,
        /// Semicolon-separated states `S,I[,E];...` to check instead of a grid.
        #[arg(long)]
        points: Option<String>,
        /// Random extremal schedules per point (robust sets only).
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Tolerance override, repeatable.
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    tol: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetArg {
    Admissible,
    Mrpi,
}

impl From<SetArg> for SetKind {
    fn from(s: SetArg) -> Self {
        match s {
            SetArg::Admissible => SetKind::Admissible,
            SetArg::Mrpi => SetKind::Mrpi,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Error carrying the process exit code. The message starts with the core
/// error code.
struct Failure {
    exit: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            exit: if e.is_input_error() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

/// Errors raised while reading inputs are the caller's fault whatever their kind.
fn input_error(e: Error) -> Failure {
    Failure { exit: 2, ..e.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit)
        }
    }
}

struct Loaded {
    scenario: Scenario,
    tol: Tolerances,
    overrides: Vec<String>,
    bytes: Vec<u8>,
}

fn load(common: &Common) -> CliResult<Loaded> {
    let bytes = std::fs::read(&common.config)
        .map_err(|e| input_error(Error::Io(format!("{}: {e}", common.config.display()))))?;
    let raw: Value = serde_json::from_slice(&bytes).map_err(|e| input_error(e.into()))?;
    let (scenario, mut tol) = validate_config(&raw)?;
    for spec in &common.tol {
        tol = tol.with_override_str(spec)?;
    }
    Ok(Loaded {
        scenario,
        tol,
        overrides: common.tol.clone(),
        bytes,
    })
}

fn run(command: Command) -> CliResult<()> {
    let started = Instant::now();
    match command {
        Command::Classify(common) => {
            let l = load(&common)?;
            let c = classify(&l.scenario);
            let report = json!({
                "variant": l.scenario.variant,
                "tag": c.tag,
                "witnesses": c.witnesses,
            });
            print_json(&report);
            Ok(())
        }
        Command::Barrier { common, set, curves, out, format } => {
            let l = load(&common)?;
            let kind = SetKind::from(set);
            let computed = assemble_set(&l.scenario, kind, curves, &l.tol)?;
            let mut m = manifest("barrier", &l);
            m.flags.insert("set".into(), kind.to_string());
            m.flags.insert("curves".into(), curves.to_string());
            m.flags.insert("format".into(), format_name(format).into());
            for (k, c) in computed.curves.iter().enumerate() {
                let (name, bytes) = match format {
                    Format::Csv => (format!("curve_{k:03}.csv"), curve_table(c).to_csv().into_bytes()),
                    Format::Json => (format!("curve_{k:03}.json"), pretty(&serde_json::to_value(c).map_err(Error::from)?)),
                };
                m.write_output(&out, &name, &bytes)?;
            }
            let summary = json!({
                "set_kind": kind,
                "trivial": computed.trivial,
                "classification": computed.classification.tag,
                "curves": computed.curves.len(),
                "terminations": computed.curve_summaries.iter().map(|c| c.termination).collect::<Vec<_>>(),
            });
            let doc = SetDocument {
                format_version: FORMAT_VERSION,
                set: computed,
                manifest: Some(m.clone()),
            };
            m.write_output(&out, "set.json", doc.to_json()?.as_bytes())?;
            finish(m, &out, started)?;
            print_json(&summary);
            Ok(())
        }
        Command::Simulate { common, policy, x0, t_end, out } => {
            let l = load(&common)?;
            let sc = &l.scenario;
            let x0 = parse_state(sc, &x0)?;
            let p = parse_policy(sc, &policy, &l.tol)?;
            let traj = simulate(sc, &p, &x0, t_end, &l.tol)?;
            let mut m = manifest("simulate", &l);
            m.flags.insert("policy".into(), policy.clone());
            m.flags.insert("x0".into(), join(x0.as_slice()));
            m.flags.insert("t_end".into(), fmt_f64(t_end));
            m.write_output(&out, "trajectory.csv", trajectory_table(sc.variant, &traj).to_csv().as_bytes())?;
            let summary = json!({
                "policy": p.label(),
                "breached": traj.breached,
                "max_I": traj.max_i,
                "first_breach_time": traj.first_breach_time,
                "t_end": traj.t_end,
                "samples": traj.samples.len(),
                "final_state": traj.final_state().as_slice(),
            });
            m.write_output(&out, "summary.json", &pretty(&summary))?;
            finish(m, &out, started)?;
            print_json(&summary);
            Ok(())
        }
        Command::Montecarlo { common, x0, n, seed, t_end, out } => {
            let l = load(&common)?;
            let sc = &l.scenario;
            let x0 = parse_state(sc, &x0)?;
            let p = worst_feedback(sc)?;
            let runs = monte_carlo(sc, &x0, &p, n, seed, t_end, &l.tol)?;
            let mut m = manifest("montecarlo", &l);
            m.seed = Some(seed);
            m.flags.insert("x0".into(), join(x0.as_slice()));
            m.flags.insert("n".into(), n.to_string());
            m.flags.insert("t_end".into(), fmt_f64(t_end));
            let mut trials = Vec::new();
            for r in &runs {
                let name = format!("trial_{:03}.csv", r.trial);
                m.write_output(&out, &name, trajectory_table(sc.variant, &r.trajectory).to_csv().as_bytes())?;
                trials.push(json!({
                    "trial": r.trial,
                    "file": name,
                    "disturbance": r.disturbance,
                    "breached": r.trajectory.breached,
                    "max_I": r.trajectory.max_i,
                }));
            }
            let max_i = runs.iter().map(|r| r.trajectory.max_i).reduce(f64::max);
            let aggregate = json!({
                "n_trials": runs.len(),
                "seed": seed,
                "n_breached": runs.iter().filter(|r| r.trajectory.breached).count(),
                "max_I": max_i,
                "trials": trials,
            });
            m.write_output(&out, "aggregate.json", &pretty(&aggregate))?;
            finish(m, &out, started)?;
            print_json(&json!({
                "n_trials": aggregate["n_trials"],
                "n_breached": aggregate["n_breached"],
                "max_I": aggregate["max_I"],
            }));
            Ok(())
        }
        Command::Oracle { common, set, grid, points, trials, seed, out } => {
            let l = load(&common)?;
            let sc = &l.scenario;
            let kind = SetKind::from(set);
            let computed = assemble_set(sc, kind, 30, &l.tol)?;
            let sets = switching_sets(sc, kind, &l.tol)?;
            let opts = OracleOptions::default();
            let mut m = manifest("oracle", &l);
            m.seed = Some(seed);
            m.flags.insert("set".into(), kind.to_string());
            m.flags.insert("trials".into(), trials.to_string());
            let header = if sc.variant.is_seir() { "S,E,I" } else { "S,I" };
            let mut csv = format!("{header},verdict,distance,oracle_inside,oracle_agrees\n");
            let summary = if let Some(n) = grid {
                m.flags.insert("grid".into(), n.to_string());
                let r = oracle_grid(sc, &computed, sets.as_ref(), n, trials, seed, &l.tol, &opts).map_err(|e| match e {
                    Error::BadArgument(msg) => Error::BadArgument(format!("{msg}; use --points for SEIR")),
                    other => other,
                })?;
                for c in &r.cells {
                    csv.push_str(&oracle_row(&[c.s, c.i], c.verdict.as_str(), c.distance, c.oracle_inside, c.agree));
                }
                json!({
                    "set_kind": kind,
                    "mode": "grid",
                    "grid": n,
                    "cells": r.cells.len(),
                    "decisive": r.n_decisive,
                    "agree": r.n_agree,
                    "agreement": r.agreement,
                    "max_disagreement_distance": r.max_disagreement_distance,
                })
            } else {
                let list = points.unwrap_or_default();
                m.flags.insert("points".into(), list.clone());
                let (mut decisive, mut agree) = (0usize, 0usize);
                let mut n_points = 0;
                for (k, text) in list.split(';').filter(|t| !t.trim().is_empty()).enumerate() {
                    let p = parse_state(sc, text)?;
                    let mem = computed.membership(&p);
                    let r = membership_oracle(
                        sc,
                        kind,
                        &p,
                        mem.verdict,
                        trials,
                        seed.wrapping_add(k as u64),
                        sets.as_ref(),
                        &l.tol,
                        &opts,
                    )?;
                    if mem.verdict.is_decisive() {
                        decisive += 1;
                        agree += r.agree as usize;
                    }
                    csv.push_str(&oracle_row(p.as_slice(), mem.verdict.as_str(), mem.distance_estimate, r.oracle_inside, r.agree));
                    n_points += 1;
                }
                json!({
                    "set_kind": kind,
                    "mode": "points",
                    "points": n_points,
                    "decisive": decisive,
                    "agree": agree,
                    "agreement": if decisive == 0 { 1.0 } else { agree as f64 / decisive as f64 },
                })
            };
            m.write_output(&out, "oracle.csv", csv.as_bytes())?;
            m.write_output(&out, "summary.json", &pretty(&summary))?;
            finish(m, &out, started)?;
            print_json(&summary);
            Ok(())
        }
    }
}

fn manifest(command: &str, l: &Loaded) -> Manifest {
    let mut m = Manifest::new(command, &l.bytes, &l.scenario, &l.tol);
    if !l.overrides.is_empty() {
        m.flags.insert("tol".into(), l.overrides.join(";"));
    }
    m
}

/// Writes `manifest.json`, the only output carrying the wall-clock runtime.
fn finish(mut m: Manifest, out: &Path, started: Instant) -> CliResult<()> {
    m.runtime_seconds = Some(started.elapsed().as_secs_f64());
    let bytes = pretty(&serde_json::to_value(&m).map_err(Error::from)?);
    epibarrier::export::write_atomic(&out.join("manifest.json"), &bytes)?;
    Ok(())
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialise");
    s.push('\n');
    s.into_bytes()
}

/// A closed stdout (`| head`) is not an error.
fn print_json(v: &Value) {
    let _ = std::io::stdout().lock().write_all(&pretty(v));
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

fn oracle_row(x: &[f64], verdict: &str, distance: f64, inside: bool, agree: bool) -> String {
    format!("{},{verdict},{},{},{}\n", join(x), fmt_f64(distance), inside as u8, agree as u8)
}

fn parse_numbers(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::BadArgument(format!("bad number {t:?} in {what}")).into())
        })
        .collect()
}

/// `S,I` for SIR, `S,I,E` for SEIR.
fn parse_state(sc: &Scenario, text: &str) -> CliResult<StateVec> {
    let v = parse_numbers(text, "state")?;
    let state = match (sc.variant.is_seir(), v.as_slice()) {
        (false, &[s, i]) => StateVec::sir(s, i),
        (true, &[s, i, e]) => StateVec::seir(s, e, i),
        _ => {
            let want = if sc.variant.is_seir() { "S,I,E" } else { "S,I" };
            return Err(Error::BadState(format!("expected {want}, got {text:?}")).into());
        }
    };
    if !state.in_simplex(0.0) {
        return Err(Error::BadState(format!("{text:?} is not in the simplex")).into());
    }
    Ok(state)
}

fn parse_policy(sc: &Scenario, text: &str, tol: &Tolerances) -> CliResult<Policy> {
    let (name, arg) = text.split_once(':').unwrap_or((text, ""));
    match name.trim() {
        "constant" => {
            let mut rates: [Option<f64>; 3] = [None; 3];
            for (k, tok) in arg.split(',').filter(|t| !t.trim().is_empty()).enumerate() {
                let (slot, value) = match tok.split_once('=') {
                    Some((key, v)) => {
                        let slot = match key.trim() {
                            "beta" => 0,
                            "gamma" => 1,
                            "eta" => 2,
                            other => return Err(Error::BadPolicy(format!("unknown rate {other:?}")).into()),
                        };
                        (slot, v)
                    }
                    None => (k, tok),
                };
                if slot > 2 {
                    return Err(Error::BadPolicy(format!("too many rates in {text:?}")).into());
                }
                rates[slot] = Some(parse_numbers(value, "policy")?[0]);
            }
            let beta = rates[0].ok_or_else(|| Error::BadPolicy("constant policy needs beta".into()))?;
            Ok(Policy::constant(sc, beta, rates[1], rates[2])?)
        }
        "feedback" => {
            if arg.trim().is_empty() {
                worst_feedback(sc)
            } else {
                Ok(Policy::feedback(sc, parse_numbers(arg, "policy")?[0])?)
            }
        }
        "switching" => match switching_sets(sc, SetKind::Admissible, tol)? {
            Some(sets) => Ok(Policy::SwitchingLaw(sets)),
            None => Err(Error::BadPolicy(format!("the switching law needs {}", ModelVariant::SirPerfect)).into()),
        },
        other => Err(Error::BadPolicy(format!("unknown policy {other:?}")).into()),
    }
}

/// Feedback with the disturbance at the end that favours infection.
fn worst_feedback(sc: &Scenario) -> CliResult<Policy> {
    let d = match sc.variant {
        ModelVariant::SirImperfect => sc.gamma.lo,
        ModelVariant::SeirImperfect => sc.eta_bounds().hi,
        v => return Err(Error::BadPolicy(format!("feedback laws are not defined for {v}")).into()),
    };
    Ok(Policy::feedback(sc, d)?)
}

/// Admissible and MRPI sets for the switching law, when the variant has one.
fn switching_sets(sc: &Scenario, kind: SetKind, tol: &Tolerances) -> CliResult<Option<SwitchingSets>> {
    if sc.variant != ModelVariant::SirPerfect || kind != SetKind::Admissible {
        return Ok(None);
    }
    let a: ComputedSet = assemble_set(sc, SetKind::Admissible, 1, tol)?;
    let m = assemble_set(sc, SetKind::Mrpi, 1, tol)?;
    Ok(Some(SwitchingSets::new(sc, a, m)?))
}
