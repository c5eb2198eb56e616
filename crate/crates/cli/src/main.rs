use std::path::PathBuf;
use std::process::ExitCode;

use absorbing_cli::{commands, report, CliError, RunConfig};
use absorbing_core::FCoefficientVariant;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "absorbing", version, about = "Merton portfolio with default: closed form, ODE, HJB and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal weight, J_after and f(t) samples for both coefficient variants.
    ClosedForm(Common),
    /// RK4 solution of the f(t) ODE against the closed form (CSV).
    OdeCheck(Common),
    /// Finite-difference solution of the coupled HJB system (CSV).
    HjbSolve(Common),
    /// Monte Carlo estimate of E[log W_T] for one constant weight.
    McEstimate(Common),
    /// Monte Carlo and exact values over a grid of weights (CSV).
    Sweep(Common),
    /// Runs every engine and reports pass/fail per gate.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to the config's output_path, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides mc.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the f(t) coefficient variant.
    #[arg(long, value_enum)]
    variant: Option<Variant>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Paper,
    Derived,
}

impl From<Variant> for FCoefficientVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Paper => FCoefficientVariant::PaperK,
            Variant::Derived => FCoefficientVariant::DerivedK,
        }
    }
}

fn execute(name: &str, common: &Common) -> Result<bool, CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.mc.seed = seed;
    }
    if let Some(variant) = common.variant {
        cfg.variant = variant.into();
    }
    let cfg = cfg.resolve()?;
    let (rendered, pass) = commands::run(name, &cfg)?;
    report::emit(&rendered, common.out.as_deref().or(cfg.output_path.as_deref()))?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::ClosedForm(c) => ("closed-form", c),
        Command::OdeCheck(c) => ("ode-check", c),
        Command::HjbSolve(c) => ("hjb-solve", c),
        Command::McEstimate(c) => ("mc-estimate", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Verify(c) => ("verify", c),
    };
    match execute(name, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("absorbing {name}: one or more gates failed");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("absorbing {name}: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
