use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ioncav::budget::BudgetReport;
use ioncav::experiments::{compare_files, run_file, ExperimentConfig, ExperimentKind, RunResult};
use ioncav::Error;

#[derive(Parser)]
#[command(name = "ioncav", version, about = "Ion-cavity photon emission and absorption simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides `base_seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    #[command(name = "emit_histogram")]
    EmitHistogram(RunArgs),
    #[command(name = "g2")]
    G2(RunArgs),
    #[command(name = "spin_photon")]
    SpinPhoton(RunArgs),
    #[command(name = "absorption_sweep")]
    AbsorptionSweep(RunArgs),
    #[command(name = "saturation_curve")]
    SaturationCurve(RunArgs),
    #[command(name = "budget_report")]
    BudgetReport(RunArgs),
    /// Run the experiment named in the config file.
    Run(RunArgs),
    /// Print the efficiency budget as JSON.
    Budget {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare a run summary with a golden file.
    Compare {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        golden: PathBuf,
    },
}

fn run(args: &RunArgs, kind: Option<ExperimentKind>) -> Result<(), Error> {
    let RunResult { out_dir, summary, .. } = run_file(&args.config, kind, args.seed, args.out.as_deref())?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string_pretty(&summary.quantities)?);
    eprintln!("wrote {}", out_dir.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::EmitHistogram(a) => run(&a, Some(ExperimentKind::EmitHistogram)),
        Command::G2(a) => run(&a, Some(ExperimentKind::G2)),
        Command::SpinPhoton(a) => run(&a, Some(ExperimentKind::SpinPhoton)),
        Command::AbsorptionSweep(a) => run(&a, Some(ExperimentKind::AbsorptionSweep)),
        Command::SaturationCurve(a) => run(&a, Some(ExperimentKind::SaturationCurve)),
        Command::BudgetReport(a) => run(&a, Some(ExperimentKind::BudgetReport)),
        Command::Run(a) => run(&a, None),
        Command::Budget { config } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::new(ExperimentKind::BudgetReport, 0),
            };
            let report = BudgetReport::new(&cfg.physics.cavity, &cfg.physics.branching, &cfg.budget)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Compare { result, golden } => {
            let report = compare_files(&result, &golden)?;
            println!("{report}");
            if report.passed {
                Ok(())
            } else {
                let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                Err(Error::Comparison(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
