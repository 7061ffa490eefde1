use std::path::PathBuf;
use std::process::ExitCode;

use cfproc::config::RunConfig;
use cfproc::exit_code;
use cfproc::pipeline::{Pipeline, REPORT_CSV, REPORT_TXT};
use cfproc_core::counterfactual::Algorithm;
use cfproc_core::Error;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cfproc", version, about = "Declare-constrained counterfactuals for process outcome prediction")]
struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Recompute stages even when cached outputs are up to date.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    #[value(name = "revised+")]
    RevisedPlus,
    #[value(name = "revise+")]
    RevisePlus,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::RevisedPlus => Algorithm::RevisedPlus,
            AlgorithmArg::RevisePlus => Algorithm::RevisePlus,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, cut, terminate and split the input log.
    Ingest,
    /// Mine trace and label-specific Declare constraints.
    Mine {
        /// Overrides the configured support threshold.
        #[arg(long)]
        support: Option<f64>,
    },
    /// Train the VAE with the trace-constraint penalty.
    TrainVae,
    /// Train the VAE without the trace-constraint penalty.
    TrainVaePlain,
    /// Train the outcome classifier.
    TrainClf,
    /// Generate counterfactuals for negatively predicted test traces.
    Generate {
        #[arg(long, value_enum, default_value = "revised+")]
        algorithm: AlgorithmArg,
        /// Overrides the label-constraint weight (revised+ only).
        #[arg(long)]
        lambda_dlc: Option<f64>,
    },
    /// Compute metrics and write the report files.
    Evaluate {
        /// Restrict to one algorithm.
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
    },
    /// Print the last report.
    Report {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run every stage for both algorithms.
    Run,
    /// Write a synthetic labelled CSV log.
    Synth {
        #[arg(long, default_value_t = 500)]
        cases: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
            .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    }
    if let Command::Synth { cases, out } = &cli.command {
        let csv = cfproc_core::synth::synthetic_csv(*cases, config.seed);
        return std::fs::write(out, csv)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", out.display()))));
    }
    let mut p = Pipeline::new(config)?;
    p.force = cli.force;
    match cli.command {
        Command::Ingest => {
            p.ingest()?;
        }
        Command::Mine { support } => {
            p.mine(support)?;
        }
        Command::TrainVae => {
            p.train_vae(false)?;
        }
        Command::TrainVaePlain => {
            p.train_vae(true)?;
        }
        Command::TrainClf => {
            p.train_classifier()?;
        }
        Command::Generate { algorithm, lambda_dlc } => {
            p.generate(algorithm.into(), lambda_dlc)?;
        }
        Command::Evaluate { algorithm } => {
            p.evaluate(algorithm.map(Into::into))?;
            print!("{}", read(&p.path(REPORT_TXT))?);
        }
        Command::Report { format } => {
            p.report_rows()?;
            let file = match format {
                Format::Text => REPORT_TXT,
                Format::Csv => REPORT_CSV,
            };
            print!("{}", read(&p.path(file))?);
        }
        Command::Run => {
            p.run_all()?;
            print!("{}", read(&p.path(REPORT_TXT))?);
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn read(path: &std::path::Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
