//! Command-line front end for rulelens. The binary is a thin wrapper around
//! [`run`], which returns the text a command prints to stdout.

mod commands;
mod config;
mod error;
mod oracle;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{resolve, Common};

pub use error::{CliError, Result};

#[derive(Parser)]
#[command(name = "rulelens", version, about = "Rule-based explanations of black-box tabular classifiers")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the builtin forest; writes model.txt and train_report.txt.
    Train(Common),
    /// Explain one record: factual rule, counterfactuals, fidelity.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Row of the dataset to explain.
        #[arg(long)]
        index: Option<usize>,
        /// Inline record, comma separated in schema order.
        #[arg(long)]
        record: Option<String>,
    },
    /// Explain every record; writes explanations.txt and local_rules.txt.
    ExplainAll(Common),
    /// Local explanations, dendrogram and the selected global rule set.
    Globalize(Common),
    /// Fidelity, coverage and complexity of a rule file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rules: PathBuf,
    },
    /// Dendrogram of a rule file in Graphviz format.
    ExportDot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rules: PathBuf,
    },
    /// Serve the configured oracle over the line protocol.
    Serve {
        #[command(flatten)]
        common: Common,
        /// TCP address; stdin/stdout when absent.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Write the synthetic credit dataset (credit.csv, credit.schema).
    Synth {
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs one command and returns its stdout report.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train(c) => commands::train(&resolve(&c)?),
        Command::Explain { common, index, record } => commands::explain_one(&resolve(&common)?, index, record.as_deref()),
        Command::ExplainAll(c) => commands::explain_all(&resolve(&c)?),
        Command::Globalize(c) => commands::globalize(&resolve(&c)?),
        Command::Evaluate { common, rules } => commands::evaluate(&resolve(&common)?, &rules),
        Command::ExportDot { common, rules } => commands::export_dot(&resolve(&common)?, &rules),
        Command::Serve { common, listen } => commands::serve_oracle(&resolve(&common)?, listen.as_deref()),
        Command::Synth { rows, seed, out } => commands::synth_data(rows, seed, &out),
    }
}
