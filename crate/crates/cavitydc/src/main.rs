use cavitydc::cli::{self, Overrides, ScenarioKind};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cavitydc",
    version,
    about = "dc-biased microwave cavity design and analysis toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate ideal-box TE mode frequencies
    Modes(RunArgs),
    /// Solve dc field maps and report homogeneity statistics
    Fields(RunArgs),
    /// Assemble a mode's linewidth budget
    Losses(RunArgs),
    /// Sweep a tuning rod and report the frequency shift
    Tuning(RunArgs),
    /// Synthesize and fit Rydberg spectral lines under dc fields
    Spectrum(RunArgs),
    /// Synthesize and fit a transmission resonance, with photon-number
    /// and thermal-occupation bookkeeping
    Transmission(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// scenario config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// directory the output files are written into
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// RNG seed, overriding the config's
    #[arg(long)]
    seed: Option<u64>,
    /// solver grid override, e.g. 128x64x96
    #[arg(long)]
    grid: Option<String>,
}

fn run(kind: ScenarioKind, args: &RunArgs) -> cavitydc::Result<()> {
    let grid = args.grid.as_deref().map(cli::parse_grid_override).transpose()?;
    let overrides = Overrides { seed: args.seed, grid };
    let report = cli::run_scenario_expecting(kind, &args.config, &args.out_dir, &overrides)?;
    print!("{}", report.summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Modes(a) => (ScenarioKind::Modes, a),
        Command::Fields(a) => (ScenarioKind::Fields, a),
        Command::Losses(a) => (ScenarioKind::Losses, a),
        Command::Tuning(a) => (ScenarioKind::Tuning, a),
        Command::Spectrum(a) => (ScenarioKind::Spectrum, a),
        Command::Transmission(a) => (ScenarioKind::Transmission, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
