//! `rationale`: binarize a saved alignment into rationales and score them
//! against gold annotations.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sparse_align::ot::TransportPlan;
use sparse_align::rationale::{
    binarize, default_delta_grid, select_delta, soft_rationales, token_f1, RationalePair,
    SoftRationales,
};

use crate::error::{CliError, Result};
use crate::{write_json, read_json};

#[derive(Debug, Args)]
pub struct RationaleArgs {
    /// Alignment report produced by `align` (its `plan` field is used).
    #[arg(long)]
    pub alignment: PathBuf,
    /// Gold rationales: {"x": [0,1,...], "y": [0,1,...]}.
    #[arg(long)]
    pub gold: PathBuf,
    /// Fixed binarization threshold.
    #[arg(long, conflicts_with = "delta_grid")]
    pub delta: Option<f64>,
    /// Comma-separated thresholds to select from by mean token F1
    /// (defaults to a log-spaced grid when neither flag is given).
    #[arg(long, value_delimiter = ',')]
    pub delta_grid: Option<Vec<f64>>,
    /// Output path for the JSON report (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct RationaleReport {
    pub delta: f64,
    /// True when delta was chosen from a grid rather than given directly.
    pub selected: bool,
    pub rationale: RationalePair,
    pub soft: SoftRationales,
    pub f1_x: f64,
    pub f1_y: f64,
    pub mean_f1: f64,
}

pub fn run(args: &RationaleArgs) -> Result<()> {
    let alignment: serde_json::Value = read_json(&args.alignment)?;
    let plan_value = alignment
        .get("plan")
        .ok_or_else(|| CliError::input("alignment file has no `plan` field"))?;
    let plan: TransportPlan = serde_json::from_value(plan_value.clone())?;
    let gold: RationalePair = read_json(&args.gold)?;
    if gold.r_x.len() != plan.rows() || gold.r_y.len() != plan.cols() {
        return Err(CliError::input(format!(
            "gold shapes ({}, {}) do not match the {}x{} plan",
            gold.r_x.len(),
            gold.r_y.len(),
            plan.rows(),
            plan.cols()
        )));
    }

    let (delta, selected) = match args.delta {
        Some(d) => (d, false),
        None => {
            let grid = args
                .delta_grid
                .clone()
                .unwrap_or_else(|| default_delta_grid(plan.rows(), plan.cols()));
            let golds = vec![(gold.r_x.clone(), gold.r_y.clone())];
            let chosen = select_delta(std::slice::from_ref(&plan), &golds, &grid)?;
            (chosen, true)
        }
    };

    let rationale = binarize(&plan, delta);
    let f1_x = token_f1(&rationale.r_x, &gold.r_x)?;
    let f1_y = token_f1(&rationale.r_y, &gold.r_y)?;
    let report = RationaleReport {
        delta,
        selected,
        soft: soft_rationales(&plan),
        rationale,
        f1_x,
        f1_y,
        mean_f1: 0.5 * (f1_x + f1_y),
    };
    write_json(&report, args.out.as_deref())
}
