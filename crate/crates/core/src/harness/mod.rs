//! Command-line front end: `simulate`, `approx`, `tables` and `couple`.
//!
//! Settings come from an optional config file (see [`config`]) and are
//! overridden by command-line flags. Every output is rendered in memory and
//! written through a temporary file, so a failed run never leaves a partial
//! file behind.

pub mod config;
pub mod tables;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::coupling::{run_scaling_series, ScalingConfig};
use crate::error::{Error, Result};
use crate::primitives::{generate_stream, resolve_rates, Family, InitialConditions, SystemParams};
use crate::rou::{RouInputs, RouSummary};
use crate::standard_queue::simulate_standard;
use crate::stats::{time_average, DEFAULT_LEVEL, DEFAULT_WARMUP};
use crate::ticket_queue::{simulate_ticket, simulate_ticket_markov_aggregate};
use config::{load_config, RunSpec};
use tables::{run_table, Fidelity, TableConfig};

#[derive(Debug, Parser)]
#[command(name = "ticketq", version, about = "Ticket and standard queues with balking and abandonment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Markdown,
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Format as ValueEnum>::from_str(s, true).map_err(|_| Error::usage(format!("unknown format `{s}`")))
    }
}

#[derive(Debug, Args)]
struct Common {
    /// Config file with `key = value` lines and optional `[run]` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "TICKETQ_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct Model {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long)]
    theta_b: Option<f64>,
    #[arg(long)]
    theta_r: Option<f64>,
    /// markovian or lognormal-uniform
    #[arg(long)]
    family: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one discipline and write its breakpoint path.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// standard, ticket or ticket-markov
        #[arg(long)]
        discipline: Option<String>,
        /// Jobs present at time zero.
        #[arg(long)]
        q0: Option<usize>,
        /// Also write the counter record to this file.
        #[arg(long)]
        counters: Option<PathBuf>,
    },
    /// Print the closed-form heavy-traffic approximations.
    Approx {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
    },
    /// Regenerate a comparison table.
    Tables {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        id: Option<u32>,
        /// smoke, desk or full
        #[arg(long)]
        fidelity: Option<String>,
        #[arg(long)]
        warmup: Option<f64>,
        #[arg(long)]
        level: Option<f64>,
    },
    /// Run the diffusion-scaling series of coupled pairs.
    Couple {
        #[command(flatten)]
        common: Common,
        /// Comma-separated scale values.
        #[arg(long)]
        n: Option<String>,
        /// Number of seeds per scale value.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        #[arg(long)]
        theta_b: Option<f64>,
        #[arg(long)]
        theta_r: Option<f64>,
        #[arg(long)]
        family: Option<String>,
        /// Also write the per-scale markdown summary to this file.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

const COMMON_KEYS: &[&str] = &["seed", "horizon", "reps", "out", "format"];
const MODEL_KEYS: &[&str] = &["lambda", "mu", "beta", "theta_b", "theta_r", "family"];

/// Load the config runs (or one empty run) and apply command-line overrides.
fn runs_with_overrides(common: &Common, extra: &[(&str, Option<String>)]) -> Result<Vec<RunSpec>> {
    let mut runs = match &common.config {
        Some(path) => load_config(path)?.runs,
        None => vec![RunSpec::empty()],
    };
    let shared = [
        ("seed", common.seed.map(|v| v.to_string())),
        ("horizon", common.horizon.map(|v| v.to_string())),
        ("reps", common.reps.map(|v| v.to_string())),
        ("out", common.out.as_ref().map(|p| p.display().to_string())),
        ("format", common.format.map(|f| format!("{f:?}").to_ascii_lowercase())),
    ];
    for run in &mut runs {
        for (key, value) in shared.iter().chain(extra) {
            if let Some(v) = value {
                run.set(key, v);
            }
        }
    }
    Ok(runs)
}

fn model_overrides(m: &Model) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("lambda", m.lambda.map(|v| v.to_string())),
        ("mu", m.mu.map(|v| v.to_string())),
        ("beta", m.beta.map(|v| v.to_string())),
        ("theta_b", m.theta_b.map(|v| v.to_string())),
        ("theta_r", m.theta_r.map(|v| v.to_string())),
        ("family", m.family.clone()),
    ]
}

fn single_run(runs: Vec<RunSpec>, command: &str) -> Result<RunSpec> {
    let count = runs.len();
    let mut runs = runs.into_iter();
    match (runs.next(), count) {
        (Some(run), 1) => Ok(run),
        _ => Err(Error::usage(format!("`{command}` takes a config with at most one section, got {count}"))),
    }
}

fn require<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::usage(format!("missing required setting `{key}` (flag --{})", key.replace('_', "-"))))
}

fn model_params(run: &RunSpec) -> Result<SystemParams> {
    let (lambda, mu, beta) = resolve_rates(run.get("lambda")?, run.get("mu")?, run.get("beta")?)?;
    let family: Family = require(run.get("family")?, "family")?;
    let theta_b = require(run.get("theta_b")?, "theta_b")?;
    let theta_r = require(run.get("theta_r")?, "theta_r")?;
    let mut params = SystemParams::from_family(mu, beta, theta_b, theta_r, family)?;
    // honor an explicit λ exactly
    params.lambda = lambda;
    Ok(params)
}

fn format_of(run: &RunSpec, default: Format) -> Result<Format> {
    Ok(run.get("format")?.unwrap_or(default))
}

fn seed_of(run: &RunSpec) -> Result<u64> {
    Ok(run.get("seed")?.unwrap_or(1))
}

/// Write `bytes` to `path` via a sibling temporary file, or to stdout.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    let Some(path) = path else {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(bytes)?;
        stdout.flush()?;
        return Ok(());
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::usage(format!("output path `{}` has no file name", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    let result = std::fs::write(&tmp, bytes).and_then(|_| std::fs::rename(&tmp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn out_path(run: &RunSpec) -> Option<PathBuf> {
    run.raw("out").map(PathBuf::from)
}

fn cmd_simulate(
    common: &Common,
    model: &Model,
    discipline: &Option<String>,
    q0: Option<usize>,
    counters: &Option<PathBuf>,
) -> Result<()> {
    let mut extra = model_overrides(model);
    extra.push(("discipline", discipline.clone()));
    extra.push(("q0", q0.map(|v| v.to_string())));
    let run = single_run(runs_with_overrides(common, &extra)?, "simulate")?;
    let allowed: Vec<&str> = [COMMON_KEYS, MODEL_KEYS, &["discipline", "q0", "warmup"]].concat();
    run.check_keys(&allowed)?;

    let params = model_params(&run)?;
    let seed = seed_of(&run)?;
    let horizon: f64 = require(run.get("horizon")?, "horizon")?;
    let q0: usize = run.get("q0")?.unwrap_or(0);
    let warmup: f64 = run.get("warmup")?.unwrap_or(DEFAULT_WARMUP);
    let discipline = run.raw("discipline").unwrap_or("ticket").to_ascii_lowercase();

    let traj = if discipline == "ticket-markov" {
        if q0 > 0 {
            return Err(Error::usage("the clock-driven ticket simulator starts empty"));
        }
        simulate_ticket_markov_aggregate(&params, seed, horizon)?
    } else {
        let primitives = generate_stream(&params, seed, horizon)?;
        let init = InitialConditions::build(q0, &params.service, &[params.deadline], params.mu, seed)?;
        match discipline.as_str() {
            "standard" | "s" => simulate_standard(&params, &primitives, &init, horizon)?,
            "ticket" | "t" => simulate_ticket(&params, &primitives, &init, horizon)?,
            other => {
                return Err(Error::usage(format!(
                    "unknown discipline `{other}` (standard, ticket, ticket-markov)"
                )))
            }
        }
    };

    let mut buf = Vec::new();
    match format_of(&run, Format::Csv)? {
        Format::Csv => traj.write_csv(&mut buf)?,
        Format::Markdown | Format::Text => {
            let m = time_average(&traj, warmup)?;
            writeln!(buf, "| metric | value |\n|---|---|")?;
            for (k, v) in [
                ("Q", m.q_bar),
                ("W", m.w_bar),
                ("R", m.r_frac),
                ("B", m.b_frac),
                ("X", m.x_bar),
                ("idle", m.idle_frac),
            ] {
                writeln!(buf, "| {k} | {v:.6} |")?;
            }
        }
    }
    let mut counter_buf = Vec::new();
    if counters.is_some() {
        traj.write_counters(&mut counter_buf)?;
    }
    emit(out_path(&run).as_deref(), &buf)?;
    if let Some(path) = counters {
        emit(Some(path), &counter_buf)?;
    }
    Ok(())
}

fn render_summary(s: &RouSummary, mu: f64, lambda: f64, format: Format) -> Result<Vec<u8>> {
    let fields = [
        ("lambda", lambda),
        ("mu", mu),
        ("beta", s.beta),
        ("theta", s.theta),
        ("sigma_hat", s.sigma_hat),
        ("sigma", s.sigma),
        ("tn_mean", s.tn_mean),
        ("tn_var", s.tn_var),
        ("E[Q]", s.e_q),
        ("E[W]", s.workload(mu)),
        ("alpha1", s.alpha1),
        ("alpha2", s.alpha2),
        ("alpha3", s.alpha3),
        ("gamma1", s.gamma1),
        ("gamma2", s.gamma2),
        ("gamma3", s.gamma3),
        ("E[X]", s.e_x),
    ];
    let mut buf = Vec::new();
    match format {
        Format::Csv => {
            writeln!(buf, "key,value")?;
            for (k, v) in fields {
                writeln!(buf, "{k},{v}")?;
            }
        }
        Format::Markdown => {
            writeln!(buf, "| quantity | value |\n|---|---|")?;
            for (k, v) in fields {
                writeln!(buf, "| {k} | {v:.6} |")?;
            }
        }
        Format::Text => {
            for (k, v) in fields {
                writeln!(buf, "{k:<9} = {v:.4}")?;
            }
        }
    }
    Ok(buf)
}

fn cmd_approx(common: &Common, model: &Model) -> Result<()> {
    let run = single_run(runs_with_overrides(common, &model_overrides(model))?, "approx")?;
    run.check_keys(&[COMMON_KEYS, MODEL_KEYS].concat())?;
    let params = model_params(&run)?;
    let summary = RouSummary::new(&RouInputs::from_params(&params))?;
    let buf = render_summary(&summary, params.mu, params.lambda, format_of(&run, Format::Text)?)?;
    emit(out_path(&run).as_deref(), &buf)
}

fn cmd_tables(
    common: &Common,
    id: Option<u32>,
    fidelity: &Option<String>,
    warmup: Option<f64>,
    level: Option<f64>,
) -> Result<()> {
    let extra = [
        ("id", id.map(|v| v.to_string())),
        ("fidelity", fidelity.clone()),
        ("warmup", warmup.map(|v| v.to_string())),
        ("level", level.map(|v| v.to_string())),
    ];
    let runs = runs_with_overrides(common, &extra)?;
    let allowed: Vec<&str> = [COMMON_KEYS, &["id", "fidelity", "warmup", "level"]].concat();

    let mut outputs: Vec<(Option<PathBuf>, Vec<u8>)> = Vec::new();
    for run in &runs {
        run.check_keys(&allowed)?;
        let mut cfg = TableConfig::new(
            require(run.get("id")?, "id")?,
            run.get::<Fidelity>("fidelity")?.unwrap_or(Fidelity::Desk),
            seed_of(run)?,
        );
        cfg.replications = run.get("reps")?;
        cfg.horizon = run.get("horizon")?;
        cfg.warmup = run.get("warmup")?.unwrap_or(DEFAULT_WARMUP);
        cfg.level = run.get("level")?.unwrap_or(DEFAULT_LEVEL);
        let rows = run_table(&cfg)?;

        let path = out_path(run);
        // runs sharing an output are concatenated
        let slot = match outputs.iter().position(|(p, _)| *p == path) {
            Some(i) => i,
            None => {
                outputs.push((path, Vec::new()));
                outputs.len() - 1
            }
        };
        let buf = &mut outputs[slot].1;
        match format_of(run, Format::Csv)? {
            Format::Csv => {
                let header = buf.is_empty();
                tables::write_csv(&rows, &mut *buf, header)?
            }
            Format::Markdown | Format::Text => {
                tables::write_markdown(&rows, &mut *buf, &format!("Table {}", cfg.id))?
            }
        }
    }
    for (path, buf) in outputs {
        emit(path.as_deref(), &buf)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_couple(
    common: &Common,
    n: &Option<String>,
    seeds: Option<u64>,
    beta: Option<f64>,
    theta_b: Option<f64>,
    theta_r: Option<f64>,
    family: &Option<String>,
    summary: &Option<PathBuf>,
) -> Result<()> {
    let extra = [
        ("n", n.clone()),
        ("seeds", seeds.map(|v| v.to_string())),
        ("beta", beta.map(|v| v.to_string())),
        ("theta_b", theta_b.map(|v| v.to_string())),
        ("theta_r", theta_r.map(|v| v.to_string())),
        ("family", family.clone()),
    ];
    let run = single_run(runs_with_overrides(common, &extra)?, "couple")?;
    run.check_keys(&[COMMON_KEYS, &["n", "seeds", "beta", "theta_b", "theta_r", "family"]].concat())?;

    let base = seed_of(&run)?;
    let count: u64 = run.get("seeds")?.unwrap_or(20);
    let mut cfg = ScalingConfig::new(
        run.get_list("n")?.unwrap_or_else(|| vec![4, 25, 100, 400]),
        run.get("beta")?.unwrap_or(0.0),
        run.get("theta_b")?.unwrap_or(0.1),
        run.get("theta_r")?.unwrap_or(0.1),
        (0..count).map(|k| base.wrapping_add(k)).collect(),
    );
    if let Some(h) = run.get("horizon")? {
        cfg.horizon = h;
    }
    if let Some(f) = run.get("family")? {
        cfg.family = f;
    }
    let report = run_scaling_series(&cfg)?;

    let mut buf = Vec::new();
    match format_of(&run, Format::Csv)? {
        Format::Csv => report.write_csv(&mut buf)?,
        Format::Markdown | Format::Text => report.write_markdown(&mut buf)?,
    }
    let mut md = Vec::new();
    if summary.is_some() {
        report.write_markdown(&mut md)?;
    }
    emit(out_path(&run).as_deref(), &buf)?;
    if let Some(path) = summary {
        emit(Some(path), &md)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate {
            common,
            model,
            discipline,
            q0,
            counters,
        } => cmd_simulate(common, model, discipline, *q0, counters),
        Command::Approx { common, model } => cmd_approx(common, model),
        Command::Tables {
            common,
            id,
            fidelity,
            warmup,
            level,
        } => cmd_tables(common, *id, fidelity, *warmup, *level),
        Command::Couple {
            common,
            n,
            seeds,
            beta,
            theta_b,
            theta_r,
            family,
            summary,
        } => cmd_couple(common, n, *seeds, *beta, *theta_b, *theta_r, family, summary),
    }
}

/// Exit status: 0 on success, 2 for usage and configuration problems, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Config(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}

/// Entry point for the `ticketq` binary; `argv[0]` is the program name.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("ticketq: {err}");
            if exit_code(&err) == 2 {
                eprintln!("run `ticketq help` for usage");
            }
            exit_code(&err)
        }
    }
}
