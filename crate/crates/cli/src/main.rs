//! `rewardsafe` command-line tool.
//!
//! Run flags (`--mode`, `--tol`, `--seed`, `--cap`, `--out`, `--oracle`,
//! `--promote-floats`) go before the subcommand.

mod commands;
mod error;
mod io;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rewardsafe::mdp::DEFAULT_CAP;
use rewardsafe::Rational;
use serde_json::{json, Value};

use commands::{AttackArgs, AttackKind, CheckArgs, ExampleName, Output, RunConfig};
use error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NumericMode {
    Float,
    Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackMode {
    Unreg,
    Reg,
    Rlhf,
    RlhfMae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Example {
    Tightness,
    Chatbot,
    Worked,
}

#[derive(Debug, Parser)]
#[command(name = "rewardsafe", version, about = "Safety analysis of reward-learning data distributions")]
struct Cli {
    /// Arithmetic: IEEE doubles or exact rationals.
    #[arg(long, value_enum, default_value = "float")]
    mode: NumericMode,
    /// Float tolerance for near-tie reporting and expected-value checks.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Seed for random instance generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Upper limit on enumerated candidates.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    /// Write the JSON report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cross-check safety verdicts against the LP oracle.
    #[arg(long)]
    oracle: bool,
    /// Accept float literals in rational mode via their exact binary value.
    #[arg(long)]
    promote_floats: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a model file and summarise it.
    Validate { file: PathBuf },
    /// Build the safety matrix.
    Matrix {
        file: PathBuf,
        #[arg(long = "regret-bound", value_name = "L")]
        regret_bound: String,
    },
    /// Decide whether a data distribution is safe.
    Check {
        file: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        epsilon: String,
        #[arg(long = "regret-bound", value_name = "L")]
        regret_bound: Option<String>,
        /// Previously written matrix; skips the build.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Construct and certify a reward model with low error and high regret.
    Attack {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: AttackMode,
        #[arg(long)]
        epsilon: String,
        #[arg(long = "regret-bound", value_name = "L")]
        regret_bound: String,
        #[arg(long)]
        dist: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Reference policy (flat, state-major); uniform if omitted.
        #[arg(long = "ref-policy")]
        ref_policy: Option<PathBuf>,
        /// Bad policy for the unregularised attack; searched if omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Check the finite-horizon return and preference bounds on random trials.
    VerifyBounds {
        file: PathBuf,
        #[arg(long, default_value_t = 3)]
        horizon: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Overrides the run seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rebuild a reference example and compare with its known values.
    Example {
        #[arg(long, value_enum)]
        name: Example,
    },
    /// Closed-form epsilon below which a distribution is safe.
    Threshold {
        file: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long = "regret-bound", value_name = "L")]
        regret_bound: String,
    },
    /// Upper bound on the regret of optimal policies of a learned reward.
    RegretBound {
        file: PathBuf,
        #[arg(long)]
        rhat: PathBuf,
    },
}

fn dispatch<S: io::CliScalar>(cli: &Cli, cfg: &RunConfig) -> CliResult<Output> {
    match &cli.command {
        Command::Validate { file } => commands::validate::<S>(cfg, file),
        Command::Matrix { file, regret_bound } => commands::matrix::<S>(cfg, file, regret_bound, cli.out.as_deref()),
        Command::Check { file, dist, epsilon, regret_bound, matrix } => commands::check::<S>(
            cfg,
            &CheckArgs { file, dist, epsilon, regret_bound: regret_bound.as_deref(), matrix: matrix.as_deref() },
        ),
        Command::Attack { file, mode, epsilon, regret_bound, dist, lambda, ref_policy, policy } => {
            let kind = match mode {
                AttackMode::Unreg => AttackKind::Unreg,
                AttackMode::Reg => AttackKind::Reg,
                AttackMode::Rlhf => AttackKind::Rlhf,
                AttackMode::RlhfMae => AttackKind::RlhfMae,
            };
            commands::attack::<S>(
                cfg,
                &AttackArgs {
                    file,
                    kind,
                    epsilon,
                    regret_bound,
                    dist: dist.as_deref(),
                    lambda: *lambda,
                    ref_policy: ref_policy.as_deref(),
                    policy: policy.as_deref(),
                },
            )
        }
        Command::VerifyBounds { file, horizon, trials, seed } => {
            commands::verify_bounds::<S>(cfg, file, *horizon, *trials, seed.unwrap_or(cfg.seed))
        }
        Command::Example { name } => commands::example(match name {
            Example::Tightness => ExampleName::Tightness,
            Example::Chatbot => ExampleName::Chatbot,
            Example::Worked => ExampleName::Worked,
        }),
        Command::Threshold { file, dist, regret_bound } => commands::threshold::<S>(cfg, file, dist, regret_bound),
        Command::RegretBound { file, rhat } => commands::regret_bound::<S>(cfg, file, rhat),
    }
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn run(cli: &Cli) -> CliResult<Option<CliError>> {
    if !(cli.tol > 0.0 && cli.tol.is_finite()) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let cfg = RunConfig {
        mode: match cli.mode {
            NumericMode::Float => "float",
            NumericMode::Rational => "rational",
        },
        tol: cli.tol,
        seed: cli.seed,
        cap: cli.cap,
        oracle: cli.oracle,
        promote: cli.promote_floats,
    };
    let out = match cli.mode {
        NumericMode::Float => dispatch::<f64>(cli, &cfg)?,
        NumericMode::Rational => dispatch::<Rational>(cli, &cfg)?,
    };
    match &cli.out {
        Some(path) => {
            fs::write(path, render(&out.report)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            if let Some(s) = &out.summary {
                print!("{}", render(s));
            }
        }
        None => print!("{}", render(&out.report)),
    }
    Ok(out.failure)
}

fn report_error(e: &CliError) -> ExitCode {
    let v = json!({"error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()});
    eprint!("{}", render(&v));
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(e)) | Err(e) => report_error(&e),
    }
}
