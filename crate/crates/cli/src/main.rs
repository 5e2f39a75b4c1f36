//! Command-line front end: preprocess PDB files, train, evaluate, export embeddings, inspect
//! graph files.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Protein classification with intrinsic-extrinsic convolutions and hierarchical pooling.
#[derive(Debug, Parser)]
#[command(name = "ieprot", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a directory of PDB files into graph-hierarchy files and a manifest skeleton.
    Preprocess {
        /// Directory holding `.pdb` / `.ent` files.
        #[arg(long = "in")]
        input: PathBuf,
        /// Directory receiving one `.iecg` file per protein.
        #[arg(long)]
        out: PathBuf,
        /// Manifest to write; every row starts as label 0 in the train split.
        #[arg(long)]
        manifest: PathBuf,
        /// Ignore hydrogen bonds between different chains.
        #[arg(long)]
        no_interchain_hbonds: bool,
    },
    /// Train a classifier on the train split, selecting on the valid split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// `key = value` run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for checkpoints and the training log.
        #[arg(long)]
        out: PathBuf,
        /// Seed for initialization, shuffling, augmentation and dropout.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Worker threads (0 uses every core).
        #[arg(long)]
        workers: Option<usize>,
        /// Extra `key=value` settings applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        settings: Vec<String>,
    },
    /// Print metrics of a checkpoint on one split as JSON.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Write the readout vector of every protein as tab-separated rows.
    Embed {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Only this split; all entries by default.
        #[arg(long)]
        split: Option<String>,
    },
    /// Summarize a graph or hierarchy file.
    Inspect {
        #[arg(long)]
        graph: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Preprocess {
            input,
            out,
            manifest,
            no_interchain_hbonds,
        } => commands::preprocess(&input, &out, &manifest, !no_interchain_hbonds),
        Command::Train {
            manifest,
            config,
            out,
            seed,
            epochs,
            workers,
            settings,
        } => commands::train(&commands::TrainArgs {
            manifest,
            config,
            out,
            seed,
            epochs,
            workers,
            settings,
        }),
        Command::Eval {
            manifest,
            checkpoint,
            split,
        } => commands::eval(&manifest, &checkpoint, &split),
        Command::Embed {
            manifest,
            checkpoint,
            out,
            split,
        } => commands::embed(&manifest, &checkpoint, &out, split.as_deref()),
        Command::Inspect { graph } => commands::inspect(&graph),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{}", e.message);
            ExitCode::from(e.code)
        }
    }
}
