use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use gplime_core::data::write_dataset;
use gplime_core::pipeline::{self, PipelineError, RunConfig, RunManifest, Stage};
use gplime_core::synth::drilling_dataset;

#[derive(Parser)]
#[command(name = "gplime", version, about = "Gaussian process regression with LIME explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config field by dotted path, e.g. `gp.restarts=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Global seed for split, fit, LIME and bootstrap.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Deduplicate, smooth, split and standardize the input.
    Preprocess(ConfigArgs),
    /// Fit GP hyperparameters on the training split.
    Fit(ConfigArgs),
    /// Predict the test split with 95% intervals.
    Predict(ConfigArgs),
    /// Local explanations for the test split and global importance.
    Explain(ConfigArgs),
    /// Select features and retrain on them.
    Select(ConfigArgs),
    /// Every stage in order.
    RunAll(ConfigArgs),
    /// Print the resolved configuration as JSON.
    Config(ConfigArgs),
    /// Write the bundled synthetic drilling dataset as CSV.
    Synth {
        #[arg(long, default_value_t = 300)]
        rows: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, PipelineError> {
    let base = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.with_overrides(&args.overrides)?;
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    Ok(cfg)
}

fn report(manifest: &RunManifest) {
    for s in &manifest.stages {
        let summary: Vec<String> = s.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<10} {:>8.2}s  {}", s.stage, s.seconds, summary.join(" "));
    }
    println!(
        "{} artifacts in {}",
        manifest.artifacts().count(),
        manifest.config.output_dir.display()
    );
}

fn run(command: Command) -> Result<(), PipelineError> {
    let (stage, args) = match command {
        Command::Preprocess(a) => (Some(Stage::Preprocess), a),
        Command::Fit(a) => (Some(Stage::Fit), a),
        Command::Predict(a) => (Some(Stage::Predict), a),
        Command::Explain(a) => (Some(Stage::Explain), a),
        Command::Select(a) => (Some(Stage::Select), a),
        Command::RunAll(a) => (None, a),
        Command::Config(a) => {
            let cfg = load_config(&a)?.resolved();
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            return Ok(());
        }
        Command::Synth { rows, seed, out } => {
            let ds = drilling_dataset(rows, seed)?;
            let mut buf = Vec::new();
            write_dataset(&ds, &mut buf)?;
            pipeline::write_atomic(&out, &buf)?;
            println!("{} rows -> {}", ds.n_rows(), out.display());
            return Ok(());
        }
    };
    let cfg = load_config(&args)?;
    let manifest = match stage {
        Some(s) => pipeline::run_stage(s, &cfg)?,
        None => pipeline::cmd_run_all(&cfg)?,
    };
    report(&manifest);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
