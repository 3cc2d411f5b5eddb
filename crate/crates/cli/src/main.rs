use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emtbo::emt::CircuitParams;
use emtbo::study::{
    compare_methods, impedance_table, run_study, with_jobs, write_compare_csv, write_impedance_csv, RunOptions,
    StudyConfig, StudyError,
};

#[derive(Parser)]
#[command(name = "emtbo", version, about = "Bayesian-optimization studies on EMT energization models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write its traces, tables and summary.json.
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output root; files go to OUT/<study_id>/.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a baseline-suite study and print its comparison table as CSV.
    Compare {
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse a config and report its kind without running it.
    Validate { config: PathBuf },
    /// Print the input impedance of the default energization circuit as CSV.
    Impedance {
        #[arg(long, default_value_t = 20.0)]
        fmin: f64,
        #[arg(long, default_value_t = 300.0)]
        fmax: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Skip the time-domain measurement and print the analytic curve only.
        #[arg(long)]
        analytic_only: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<(), StudyError> {
    match command {
        Command::Run { config, jobs, out, seed } => {
            let cfg = StudyConfig::load(&config)?;
            log::info!("running {} study {}", cfg.kind.name(), cfg.study_id);
            let report = run_study(&cfg, &RunOptions { out_dir: out.clone(), jobs, seed })?;
            let dir = out.join(&report.study_id);
            println!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
            eprintln!(
                "{} study {} finished in {:.1} s; {} files in {}",
                report.kind,
                report.study_id,
                report.wall_time_s,
                report.files.len(),
                dir.display()
            );
            Ok(())
        }
        Command::Compare { config, jobs, seed } => {
            let cfg = StudyConfig::load(&config)?;
            let seed = seed.unwrap_or(cfg.seed);
            let cmp = with_jobs(jobs, || compare_methods(&cfg, seed))?;
            eprintln!("oracle optimum: {}", cmp.oracle);
            write_compare_csv(&cmp.rows, std::io::stdout().lock())?;
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = StudyConfig::load(&config)?;
            println!("{}: valid {} study", cfg.study_id, cfg.kind.name());
            Ok(())
        }
        Command::Impedance {
            fmin,
            fmax,
            points,
            analytic_only,
        } => {
            let params = CircuitParams::default();
            let rows = impedance_table(&params, fmin, fmax, points, !analytic_only, emtbo::emt::DEFAULT_DT)
                .map_err(|e| StudyError::Config(e.to_string()))?;
            write_impedance_csv(&rows, std::io::stdout().lock())?;
            Ok(())
        }
    }
}
