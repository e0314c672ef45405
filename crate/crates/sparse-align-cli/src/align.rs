//! `align`: sentence-align two documents and emit a JSON report.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sparse_align::constraints::ActivePair;
use sparse_align::ot::{CostMatrix, TransportPlan};

use crate::error::Result;
use crate::heatmap::{svg_heatmap, text_heatmap};
use crate::pipeline::{default_metric, embed_document, pair_costs, solve_pair};
use crate::{load_table, write_json, HeatmapMode, SolverArgs};

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Left document (rows of the alignment).
    pub doc_a: PathBuf,
    /// Right document (columns of the alignment).
    pub doc_b: PathBuf,
    /// Word-embedding table in the text vector format.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output path for the JSON report (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a heatmap next to --out.
    #[arg(long, value_enum, default_value_t = HeatmapMode::None, requires = "out")]
    pub heatmap: HeatmapMode,
}

#[derive(Debug, Serialize)]
pub struct AlignReport {
    pub spans_x: Vec<String>,
    pub spans_y: Vec<String>,
    pub cost_matrix: CostMatrix,
    pub plan: TransportPlan,
    pub active_pairs: Vec<ActivePair>,
    pub original_cost: f64,
    pub similarity: f64,
    pub warnings: Vec<String>,
}

pub fn run(args: &AlignArgs) -> Result<()> {
    let table = load_table(&args.embeddings)?;
    let doc_a = embed_document(&args.doc_a, &table)?;
    let doc_b = embed_document(&args.doc_b, &table)?;

    let metric = args
        .solver
        .metric
        .unwrap_or_else(|| default_metric(args.solver.variant));
    let cost = pair_costs(&doc_a, &doc_b, metric)?;
    let spec = args.solver.spec();
    let cfg = args.solver.config();
    let solved = solve_pair(&cost, &spec, &cfg)?;

    let mut warnings = Vec::new();
    for (doc, path, side) in [
        (&doc_a, &args.doc_a, "x"),
        (&doc_b, &args.doc_b, "y"),
    ] {
        for &idx in &doc.oov_spans {
            warnings.push(format!(
                "{}: span {idx} ({side}) has no in-vocabulary tokens and embeds to zero",
                path.display()
            ));
        }
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let lambda = args
        .solver
        .lambda
        .unwrap_or_else(|| sparse_align::constraints::default_lambda(cost.rows(), cost.cols()));

    let report = AlignReport {
        spans_x: doc_a.spans.spans().to_vec(),
        spans_y: doc_b.spans.spans().to_vec(),
        cost_matrix: cost,
        active_pairs: solved.alignment.active_pairs.clone(),
        original_cost: solved.original_cost,
        similarity: solved.similarity,
        plan: solved.alignment.plan,
        warnings,
    };
    write_json(&report, args.out.as_deref())?;

    match args.heatmap {
        HeatmapMode::None => {}
        HeatmapMode::Text => {
            let out = args.out.as_ref().expect("clap enforces --out");
            std::fs::write(
                out.with_extension("heatmap.txt"),
                text_heatmap(&report.plan, lambda),
            )?;
        }
        HeatmapMode::Svg => {
            let out = args.out.as_ref().expect("clap enforces --out");
            std::fs::write(out.with_extension("svg"), svg_heatmap(&report.plan, lambda))?;
        }
    }
    Ok(())
}
