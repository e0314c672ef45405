//! Command-line interface over the sparse-align library: document
//! alignment, candidate ranking, rationale scoring, synthetic instances,
//! and the randomized verification suite.

use std::path::Path;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sparse_align::constraints::{ConstraintSpec, ConstraintVariant};
use sparse_align::ot::SolverConfig;
use sparse_align::textio::{load_embeddings, CostMetric, EmbeddingTable};

pub mod align;
pub mod error;
pub mod heatmap;
pub mod pipeline;
pub mod rank;
pub mod rationale;
pub mod synth;
pub mod verify;

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "sparse-align",
    version,
    about = "Sparse, interpretable alignments between documents via constrained optimal transport"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sentence-align two documents.
    Align(align::AlignArgs),
    /// Rank candidate documents against queries from a manifest.
    Rank(rank::RankArgs),
    /// Extract and score rationales from a saved alignment.
    Rationale(rationale::RationaleArgs),
    /// Generate and solve a synthetic banded cost matrix.
    Synth(synth::SynthArgs),
    /// Run the seeded randomized property suite.
    Verify(verify::VerifyArgs),
}

/// Flags shared by the solving commands.
#[derive(Debug, clap::Args)]
pub struct SolverArgs {
    /// Constraint family: vanilla | one-to-k | relaxed-one-to-k | exact-k.
    #[arg(long, default_value = "exact-k", value_parser = parse_variant)]
    pub variant: ConstraintVariant,
    /// Cardinality parameter (ignored by vanilla).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Pairwise cost: cosine_distance | negative_cosine | euclidean |
    /// dot_negative. Defaults to negative_cosine for relaxed-one-to-k and
    /// cosine_distance otherwise.
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<CostMetric>,
    /// Active-pair threshold; defaults to 0.01/(n*m).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Final entropic regularization strength.
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon_final: f64,
    /// Seed for anything randomized downstream of the flags.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolverArgs {
    pub fn spec(&self) -> ConstraintSpec {
        match self.variant {
            ConstraintVariant::Vanilla => ConstraintSpec::vanilla(),
            ConstraintVariant::OneToK => ConstraintSpec::one_to_k(self.k),
            ConstraintVariant::RelaxedOneToK => ConstraintSpec::relaxed_one_to_k(self.k),
            ConstraintVariant::ExactK => ConstraintSpec::exact_k(self.k),
        }
    }

    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            epsilon_final: self.epsilon_final,
            ..SolverConfig::default()
        }
    }
}

fn parse_variant(s: &str) -> std::result::Result<ConstraintVariant, String> {
    match s.replace('_', "-").as_str() {
        "vanilla" => Ok(ConstraintVariant::Vanilla),
        "one-to-k" => Ok(ConstraintVariant::OneToK),
        "relaxed-one-to-k" => Ok(ConstraintVariant::RelaxedOneToK),
        "exact-k" => Ok(ConstraintVariant::ExactK),
        other => Err(format!(
            "unknown variant {other:?} (expected vanilla, one-to-k, relaxed-one-to-k, or exact-k)"
        )),
    }
}

fn parse_metric(s: &str) -> std::result::Result<CostMetric, String> {
    s.parse::<CostMetric>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeatmapMode {
    Text,
    Svg,
    None,
}

pub fn load_table(path: &Path) -> Result<EmbeddingTable> {
    Ok(load_embeddings(path)?)
}

/// Writes pretty JSON to the path, or to stdout when no path is given.
pub fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Align(args) => align::run(args),
        Command::Rank(args) => rank::run(args),
        Command::Rationale(args) => rationale::run(args),
        Command::Synth(args) => synth::run(args),
        Command::Verify(args) => verify::run(args),
    }
}
