//! `synth`: generate a seeded cost matrix with a planted low-cost band and
//! solve it under every constraint family.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sparse_align::constraints::{default_lambda, ConstraintSpec, ConstraintVariant};
use sparse_align::exact::SplitMix64;
use sparse_align::ot::{CostMatrix, SolverConfig};

use crate::error::{CliError, Result};
use crate::heatmap::{svg_heatmap, text_heatmap};
use crate::pipeline::solve_pair;
use crate::{write_json, HeatmapMode};

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 30)]
    pub rows: usize,
    #[arg(long, default_value_t = 20)]
    pub cols: usize,
    /// Cardinality parameter for the constrained variants. One-to-k clamps
    /// it to its feasibility bound for the shape.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon_final: f64,
    /// Output path for the JSON report (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one heatmap per variant next to --out.
    #[arg(long, value_enum, default_value_t = HeatmapMode::None, requires = "out")]
    pub heatmap: HeatmapMode,
}

#[derive(Debug, Serialize)]
pub struct VariantResult {
    pub variant: ConstraintVariant,
    /// The k actually solved with, after feasibility clamping (absent for
    /// vanilla, which has no cardinality parameter).
    pub k_used: Option<usize>,
    pub active_count: usize,
    pub pairs: Vec<(usize, usize)>,
    pub original_cost: f64,
}

#[derive(Debug, Serialize)]
pub struct SynthReport {
    pub rows: usize,
    pub cols: usize,
    pub k: usize,
    pub seed: u64,
    pub results: Vec<VariantResult>,
}

/// Uniform [0.1, 1) base costs with a cheap cell in every even column `j`
/// at row `floor(1.5 j)`: the band is the unique cheap structure, so the
/// constrained variants have a visually checkable optimum.
pub fn generate(rows: usize, cols: usize, seed: u64) -> CostMatrix {
    let mut rng = SplitMix64::new(seed);
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        values.push(0.1 + 0.9 * rng.next_f64());
    }
    for j in (0..cols).step_by(2) {
        let i = 3 * j / 2;
        if i < rows {
            values[i * cols + j] = 0.02 + 0.06 * rng.next_f64();
        }
    }
    CostMatrix::new(rows, cols, values).expect("generated values are finite")
}

pub fn run(args: &SynthArgs) -> Result<()> {
    if args.rows == 0 || args.cols == 0 {
        return Err(CliError::input("rows and cols must be at least 1"));
    }
    if args.k == 0 {
        return Err(CliError::input("k must be at least 1"));
    }
    let c = generate(args.rows, args.cols, args.seed);
    let cfg = SolverConfig {
        epsilon_final: args.epsilon_final,
        ..SolverConfig::default()
    };
    let lambda = default_lambda(args.rows, args.cols);

    let short = args.rows.min(args.cols);
    let long = args.rows.max(args.cols);
    // One-to-k must fit k picks per short-side point into the long side;
    // exact-k needs k <= short side.
    let k_one = args.k.min((long / short).max(1));
    let k_exact = args.k.min(short);

    let plan_specs = [
        (ConstraintSpec::vanilla(), None),
        (ConstraintSpec::one_to_k(k_one), Some(k_one)),
        (ConstraintSpec::relaxed_one_to_k(args.k), Some(args.k)),
        (ConstraintSpec::exact_k(k_exact), Some(k_exact)),
    ];

    let mut results = Vec::new();
    let mut plans = Vec::new();
    for (spec, k_used) in plan_specs {
        // Relaxed one-to-k reads negative costs as rewards; the band sits
        // below 0.1, so shifting by -0.1 makes exactly the band negative.
        let solved = if spec.variant == ConstraintVariant::RelaxedOneToK {
            let shifted = c.map(|v| v - 0.1)?;
            solve_pair(&shifted, &spec, &cfg)?
        } else {
            solve_pair(&c, &spec, &cfg)?
        };
        // Costs refer to the generated matrix even when the relaxed solve
        // ran on the shifted one.
        let original_cost: f64 = solved
            .alignment
            .active_pairs
            .iter()
            .map(|p| c.value(p.0, p.1) * p.2)
            .sum();
        let mut pairs: Vec<(usize, usize)> = solved
            .alignment
            .active_pairs
            .iter()
            .map(|p| (p.0, p.1))
            .collect();
        pairs.sort_unstable();
        results.push(VariantResult {
            variant: spec.variant,
            k_used,
            active_count: pairs.len(),
            pairs,
            original_cost,
        });
        plans.push((spec.variant, solved.alignment.plan));
    }

    let report = SynthReport {
        rows: args.rows,
        cols: args.cols,
        k: args.k,
        seed: args.seed,
        results,
    };
    write_json(&report, args.out.as_deref())?;

    if args.heatmap != HeatmapMode::None {
        let out = args.out.as_ref().expect("clap enforces --out");
        let stem = out.with_extension("");
        for (variant, plan) in &plans {
            let name = match variant {
                ConstraintVariant::Vanilla => "vanilla",
                ConstraintVariant::OneToK => "one_to_k",
                ConstraintVariant::RelaxedOneToK => "relaxed_one_to_k",
                ConstraintVariant::ExactK => "exact_k",
            };
            let (content, ext) = match args.heatmap {
                HeatmapMode::Text => (text_heatmap(plan, lambda), "txt"),
                HeatmapMode::Svg => (svg_heatmap(plan, lambda), "svg"),
                HeatmapMode::None => unreachable!(),
            };
            let path = stem.with_extension(format!("{name}.{ext}"));
            std::fs::write(path, content)?;
        }
    }
    Ok(())
}
