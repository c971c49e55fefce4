//! Command-line front end for the synthesis / dataset / train / eval /
//! report pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error,
//! 4 missing-input or file-format error. `MDFORGE_THREADS` caps worker
//! parallelism.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mdforge::pipeline::{
    cmd_dataset, cmd_eval, cmd_report, cmd_synth, cmd_train, parse_config, PipelineConfig,
};
use mdforge::Error;

#[derive(Parser)]
#[command(
    name = "mdforge",
    about = "Synthesizes micro-Doppler radar spectrograms of vibrating metal sheets and trains a CNN to classify the metal",
    version
)]
struct Cli {
    /// Pipeline configuration file (`section.key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides `paths.out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed (overrides `pipeline.master_seed`).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize IQ returns and original spectrogram images.
    Synth,
    /// Augment the originals and write the split dataset manifest.
    Dataset,
    /// Train the classifier; writes model.ckpt and history.csv.
    Train,
    /// Evaluate a checkpoint on the test split.
    Eval {
        /// Checkpoint to evaluate (default: <out>/model.ckpt).
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Render accuracy/loss charts from <out>/history.csv.
    Report,
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Parse { .. } | Error::Config(_) | Error::Argument(_) | Error::Domain(_) => 2,
        Error::Io(_) => 3,
        Error::Precondition(_) | Error::Format(_) => 4,
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(out) = &cli.out {
        cfg.out_dir.clone_from(out);
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth => {
            let manifest = cmd_synth(&cfg)?;
            println!(
                "synth: wrote {} IQ captures and original spectrograms to {}",
                manifest.entries.len(),
                cfg.out_dir.display()
            );
        }
        Command::Dataset => {
            let manifest = cmd_dataset(&cfg)?;
            println!(
                "dataset: {} images ({} train / {} val / {} test) in {}",
                manifest.entries.len(),
                manifest.count_split(mdforge::pipeline::SplitSet::Train),
                manifest.count_split(mdforge::pipeline::SplitSet::Val),
                manifest.count_split(mdforge::pipeline::SplitSet::Test),
                cfg.out_dir.join("manifest.csv").display()
            );
        }
        Command::Train => {
            let (_, history) = cmd_train(&cfg)?;
            if let Some(last) = history.records.last() {
                println!(
                    "train: {} epochs, final train_acc {:.3}, val_acc {:.3}; checkpoint at {}",
                    history.records.len(),
                    last.train_acc,
                    last.val_acc,
                    cfg.out_dir.join("model.ckpt").display()
                );
            }
        }
        Command::Eval { checkpoint } => {
            let metrics = cmd_eval(&cfg, checkpoint.as_deref())?;
            print!("{}", metrics.to_csv());
        }
        Command::Report => {
            let history = cfg.out_dir.join("history.csv");
            let (accuracy, loss) = cmd_report(&history, &cfg.out_dir)?;
            println!("report: wrote {} and {}", accuracy.display(), loss.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("MDFORGE_THREADS") {
        if let Ok(count) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(count)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
