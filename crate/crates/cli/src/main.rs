mod commands;
mod config;
mod output;
mod svg;

use clap::{Args, Parser, Subcommand};
use commands::{Failure, Outcome};
use config::{merge_raw, validate_config, Command, RunConfig};
use serde_json::{json, Map, Value};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_NO_ESCAPE: u8 = 4;
const THREADS_ENV: &str = "BREATHER_LAB_THREADS";

/// Damped-driven breathers of discrete NLS chains: solve, analyze, simulate.
#[derive(Parser)]
#[command(name = "breather-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve for the damped-driven breather and its drive amplitude
    Breather(Flags),
    /// Breather plus its linearized spectrum
    Spectrum(Flags),
    /// Small eigenvalue over an eps grid (a:b:step), one cell per eps
    SweepLambda2(Flags),
    /// Integrate the lattice and record the modulation trace
    Evolve(Flags),
    /// Twist at the damped end for one or more chain lengths
    Twist(Flags),
    /// Two-site energy law, phase shift and escape
    TwoSite(Flags),
    /// Damped evolution with escape detection and twist tracking
    Escape(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// JSON object of settings; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<String>,
    /// Worker threads for sweeps (0 = all cores); overrides BREATHER_LAB_THREADS
    #[arg(long)]
    threads: Option<String>,
    /// Number of sites; `twist` also takes a:b:step
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    /// Coupling; `sweep-lambda2` also takes a:b:step
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    /// Frame frequency [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    /// Drive amplitude for `evolve` [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Initial two-site energy
    #[arg(long, allow_hyphen_values = true)]
    e0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t_end: Option<String>,
    /// Time between stored samples [default: 10, two-site: 1]
    #[arg(long, allow_hyphen_values = true)]
    sample_stride: Option<String>,
    /// asymptotic, single_site or file [default: asymptotic]
    #[arg(long)]
    seed_profile: Option<String>,
    /// JSON with p and q arrays (a breather.json works)
    #[arg(long)]
    seed_file: Option<String>,
    /// Amplitude of the single-site seed [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<String>,
    /// Integrator relative tolerance [default: 1e-10]
    #[arg(long, allow_hyphen_values = true)]
    rel_tol: Option<String>,
    /// Time between checkpoints [default: 1e4]
    #[arg(long, allow_hyphen_values = true)]
    checkpoint_interval: Option<String>,
    /// Continue from checkpoint.json in the output directory
    #[arg(long)]
    resume: bool,
    /// Escape when the energy gap drops below this fraction of its plateau [default: 0.25]
    #[arg(long, allow_hyphen_values = true)]
    escape_fraction: Option<String>,
    /// ... and stays there this long [default: 1000]
    #[arg(long, allow_hyphen_values = true)]
    escape_dwell: Option<String>,
    /// Time at which the plateau gap is read [default: 100]
    #[arg(long, allow_hyphen_values = true)]
    escape_settle: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(String, Value)> {
        let mut v = Vec::new();
        let mut put = |k: &str, x: &Option<String>| {
            if let Some(s) = x {
                v.push((k.to_string(), Value::String(s.clone())));
            }
        };
        put("out", &self.out);
        put("threads", &self.threads);
        put("n", &self.n);
        put("eps", &self.eps);
        put("gamma", &self.gamma);
        put("omega", &self.omega);
        put("beta", &self.beta);
        put("e0", &self.e0);
        put("t_end", &self.t_end);
        put("sample_stride", &self.sample_stride);
        put("seed_profile", &self.seed_profile);
        put("seed_file", &self.seed_file);
        put("amplitude", &self.amplitude);
        put("rel_tol", &self.rel_tol);
        put("checkpoint_interval", &self.checkpoint_interval);
        put("escape_fraction", &self.escape_fraction);
        put("escape_dwell", &self.escape_dwell);
        put("escape_settle", &self.escape_settle);
        if self.resume {
            v.push(("resume".into(), Value::Bool(true)));
        }
        v
    }
}

fn split(sub: Sub) -> (Command, Flags) {
    match sub {
        Sub::Breather(f) => (Command::Breather, f),
        Sub::Spectrum(f) => (Command::Spectrum, f),
        Sub::SweepLambda2(f) => (Command::SweepLambda2, f),
        Sub::Evolve(f) => (Command::Evolve, f),
        Sub::Twist(f) => (Command::Twist, f),
        Sub::TwoSite(f) => (Command::TwoSite, f),
        Sub::Escape(f) => (Command::Escape, f),
    }
}

fn emit_error(kind: &str, messages: Vec<String>) {
    eprintln!("{}", json!({ "error": kind, "messages": messages }));
}

fn load_config_file(path: &PathBuf) -> Result<Map<String, Value>, Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![format!("config: cannot read {}: {e}", path.display())])?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(vec![format!(
            "config: {} must hold a JSON object",
            path.display()
        )]),
        Err(e) => Err(vec![format!(
            "config: invalid JSON in {}: {e}",
            path.display()
        )]),
    }
}

/// Flag or config value, then the environment, then all cores.
fn resolve_threads(cfg: &RunConfig) -> Result<usize, Vec<String>> {
    if let Some(t) = cfg.threads {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => s.trim().parse::<usize>().map_err(|_| {
            vec![format!(
                "{THREADS_ENV}: expected a non-negative integer, got {s:?}"
            )]
        }),
        Err(_) => Ok(0),
    }
}

fn failure_exit(f: Failure) -> ExitCode {
    match f {
        Failure::Config(m) => {
            emit_error("config", m);
            ExitCode::from(EXIT_CONFIG)
        }
        Failure::Numerical { kind, message } => {
            eprintln!(
                "{}",
                json!({ "error": "numerical", "kind": kind, "messages": [message] })
            );
            ExitCode::from(EXIT_NUMERICAL)
        }
        Failure::Io(m) => {
            emit_error("io", vec![m]);
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

fn write_manifest(
    cfg: &RunConfig,
    threads: usize,
    started: Instant,
    status: &str,
    outcome: Option<&Outcome>,
) {
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": cfg.command.name(),
        "config": cfg.to_raw(),
        "threads": threads,
        "status": status,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "outputs": outcome.map(|o| o.outputs.clone()).unwrap_or_default(),
        "notes": outcome.map(|o| o.notes.clone()).unwrap_or_default(),
    });
    if let Err(e) = output::write_json(&cfg.output_dir.join("manifest.json"), &manifest) {
        emit_error("io", vec![format!("cannot write manifest: {e}")]);
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            emit_error("config", vec![e.to_string().trim_end().to_string()]);
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let (command, flags) = split(cli.command);
    let file = match flags.config.as_ref().map(load_config_file).transpose() {
        Ok(f) => f,
        Err(m) => return failure_exit(Failure::Config(m)),
    };
    let raw = merge_raw(file, flags.pairs());
    let cfg = match validate_config(command, &raw) {
        Ok(c) => c,
        Err(m) => return failure_exit(Failure::Config(m)),
    };
    let threads = match resolve_threads(&cfg) {
        Ok(t) => t,
        Err(m) => return failure_exit(Failure::Config(m)),
    };
    if let Err(f) = commands::resolve_dir(&cfg) {
        return failure_exit(f);
    }

    match commands::run(&cfg, threads) {
        Ok(mut o) => {
            for (k, v) in &o.summary {
                println!("{k} = {v}");
            }
            for n in &o.notes {
                println!("note: {n}");
            }
            if let Some(f) = o.partial_failure.take() {
                write_manifest(&cfg, threads, started, "numerical_failure", Some(&o));
                return failure_exit(f);
            }
            if o.escape_not_reached {
                write_manifest(&cfg, threads, started, "escape_not_reached", Some(&o));
                eprintln!(
                    "{}",
                    json!({ "status": "escape_not_reached", "messages": ["no escape before t_end"] })
                );
                return ExitCode::from(EXIT_NO_ESCAPE);
            }
            write_manifest(&cfg, threads, started, "ok", Some(&o));
            ExitCode::SUCCESS
        }
        Err(f) => {
            let status = match f {
                Failure::Config(_) => "config_error",
                _ => "numerical_failure",
            };
            write_manifest(&cfg, threads, started, status, None);
            failure_exit(f)
        }
    }
}
