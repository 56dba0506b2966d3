use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fock_metrology::cli::{parse_config, preset, run, Scenario};
use fock_metrology::Error;

#[derive(Parser)]
#[command(name = "fock-metrology", version, about = "Fock-probe estimation of phase-randomized displacement and squeezing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a figure preset or a scenario file and write CSV.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Figure preset (fig1a ... fig7b, flucC).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Scenario file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of Monte Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
}

fn load(args: &RunArgs) -> Result<Scenario, Error> {
    let mut sc = match (&args.preset, &args.config) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter { name: "config".into(), reason: format!("{}: {e}", path.display()) })?;
            parse_config(&text)?
        }
        (None, None) => unreachable!("clap requires one of --preset and --config"),
    };
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if let Some(trials) = args.trials {
        sc.trials = trials;
    }
    sc.validate()?;
    Ok(sc)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("FOCK_METROLOGY_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| Error::InvalidParameter {
        name: "FOCK_METROLOGY_THREADS".into(),
        reason: format!("expected a positive integer, got `{value}`"),
    })?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| Error::InvalidParameter {
        name: "FOCK_METROLOGY_THREADS".into(),
        reason: e.to_string(),
    })
}

fn execute(args: &RunArgs) -> Result<usize, Error> {
    configure_threads()?;
    let sc = load(args)?;
    let table = run(&sc)?;
    std::fs::write(&args.out, table.to_csv())
        .map_err(|e| Error::InvalidParameter { name: "out".into(), reason: format!("{}: {e}", args.out.display()) })?;
    Ok(table.rows.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    match execute(&args) {
        Ok(rows) => {
            eprintln!("wrote {rows} rows to {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
