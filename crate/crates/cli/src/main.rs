mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Failure, Outcome};

#[derive(Parser)]
#[command(name = "surfdos", version, about = "Integrated density of surface states experiments")]
struct Cli {
    /// Worker threads; defaults to the available parallelism. Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write the main artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Target {
    /// Experiment config (TOML).
    config: PathBuf,
}

#[derive(Args)]
struct WithCurve {
    config: PathBuf,
    /// Also write the sampled curve as CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Stable or fluctuating lower edge (JSON).
    Classify(Target),
    /// IDSS curve (CSV).
    Idss(Target),
    /// Constant-potential asymptotic law against a fitted curve (JSON).
    ConstAsym(WithCurve),
    /// Double-log Lifshitz exponent of the reduced surface operator (JSON).
    Lifshitz(WithCurve),
    /// Newton-polygon exponents of the reduced symbol, d1 = 2 (JSON).
    Newton(Target),
    /// Box eigenvalue count against the resonance-function count (JSON).
    #[command(name = "prop-w1-check")]
    PropW1Check(Target),
    /// Positivity of the resolvent Fourier coefficients (JSON).
    AppendixCheck(Target),
}

fn run(cli: Cli) -> Result<(Outcome, Option<PathBuf>), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let load = |p: &Path| config::load(p).map_err(Failure::Config);
    let (outcome, default_out) = match cli.command {
        Command::Classify(t) => (commands::classify(&load(&t.config)?)?, None),
        Command::Idss(t) => {
            let ld = load(&t.config)?;
            let out = ld.cfg.run.output.clone();
            (commands::idss(&ld)?, out)
        }
        Command::ConstAsym(t) => (commands::const_asym(&load(&t.config)?, t.curve)?, None),
        Command::Lifshitz(t) => (commands::lifshitz(&load(&t.config)?, t.curve)?, None),
        Command::Newton(t) => (commands::newton(&load(&t.config)?)?, None),
        Command::PropW1Check(t) => (commands::prop_w1(&load(&t.config)?)?, None),
        Command::AppendixCheck(t) => (commands::appendix(&load(&t.config)?)?, None),
    };
    Ok((outcome, cli.out.or(default_out)))
}

fn io(p: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", p.display()))
}

fn emit(outcome: &Outcome, out: Option<&Path>) -> Result<(), Failure> {
    for (p, text) in &outcome.side {
        std::fs::write(p, text).map_err(io(p))?;
    }
    match out {
        Some(p) => std::fs::write(p, &outcome.body).map_err(io(p))?,
        None => std::io::stdout().write_all(outcome.body.as_bytes()).map_err(io(Path::new("<stdout>")))?,
    }
    eprintln!("{}", outcome.summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(o, out)| emit(&o, out.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("surfdos: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
