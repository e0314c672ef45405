//! Rationale extraction and evaluation on top of transport plans:
//! delta-thresholded binary rationales, soft (marginal-sum) rationales,
//! token-level F1, threshold selection, sufficiency masking, and the
//! contrastive / rationale losses as pure evaluative functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::{Marginals, TransportPlan, DEFAULT_FEASIBILITY_TOL};

/// Probability clip applied before logs in [`rationale_cross_entropy`];
/// keeps hard 0/1 indicators (permutation plans) finite.
pub const CROSS_ENTROPY_CLIP: f64 = 1e-7;

/// Binary selection vectors over the two span sets.
/// Serialized as `{"x": [0,1,...], "y": [0,1,...]}`, the same shape gold
/// rationales are read from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalePair {
    #[serde(rename = "x")]
    pub r_x: Vec<u8>,
    #[serde(rename = "y")]
    pub r_y: Vec<u8>,
}

impl RationalePair {
    pub fn new(r_x: Vec<u8>, r_y: Vec<u8>) -> Result<Self> {
        if r_x.iter().chain(&r_y).any(|&v| v > 1) {
            return Err(Error::InvalidInput(
                "rationale entries must be 0 or 1".into(),
            ));
        }
        Ok(RationalePair { r_x, r_y })
    }
}

/// Row and column mass totals of a plan; each side sums to the plan's
/// total mass. Serialized as `{"x": [...], "y": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftRationales {
    #[serde(rename = "x")]
    pub s_x: Vec<f64>,
    #[serde(rename = "y")]
    pub s_y: Vec<f64>,
}

/// `r_x[i] = 1` iff row i has any entry above `delta`; columns likewise.
/// Total for any `delta` (callers pass `delta >= 0`).
pub fn binarize(p: &TransportPlan, delta: f64) -> RationalePair {
    let (n, m) = (p.rows(), p.cols());
    let mut r_x = vec![0u8; n];
    let mut r_y = vec![0u8; m];
    for (i, j, mass) in p.entries() {
        if mass > delta {
            r_x[i] = 1;
            r_y[j] = 1;
        }
    }
    RationalePair { r_x, r_y }
}

/// Row sums and column sums of the plan.
pub fn soft_rationales(p: &TransportPlan) -> SoftRationales {
    SoftRationales {
        s_x: p.row_sums(),
        s_y: p.col_sums(),
    }
}

/// Token-level F1 between two binary selections (nonzero = selected):
/// `2 TP / (|pred positives| + |gold positives|)`. Both sides all-zero is
/// perfect agreement and scores 1.0; otherwise zero overlap scores 0.0.
pub fn token_f1(pred: &[u8], gold: &[u8]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::ShapeMismatch(format!(
            "rationale length {} vs gold length {}",
            pred.len(),
            gold.len()
        )));
    }
    let tp = pred
        .iter()
        .zip(gold)
        .filter(|&(&p, &g)| p != 0 && g != 0)
        .count();
    let pos_pred = pred.iter().filter(|&&v| v != 0).count();
    let pos_gold = gold.iter().filter(|&&v| v != 0).count();
    if pos_pred == 0 && pos_gold == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (pos_pred + pos_gold) as f64)
}

/// Mean token F1 of `binarize(plan, delta)` against gold, averaged over
/// both sides of every pair.
fn mean_f1(plans: &[TransportPlan], golds: &[(Vec<u8>, Vec<u8>)], delta: f64) -> Result<f64> {
    let mut total = 0.0;
    for (plan, (gold_x, gold_y)) in plans.iter().zip(golds) {
        let pair = binarize(plan, delta);
        total += token_f1(&pair.r_x, gold_x)?;
        total += token_f1(&pair.r_y, gold_y)?;
    }
    Ok(total / (2 * plans.len()) as f64)
}

/// Picks the grid value maximizing mean token F1 over the validation
/// pairs; exact ties go to the smallest delta.
pub fn select_delta(
    plans: &[TransportPlan],
    golds: &[(Vec<u8>, Vec<u8>)],
    grid: &[f64],
) -> Result<f64> {
    if plans.is_empty() || grid.is_empty() {
        return Err(Error::InvalidInput(
            "select_delta needs at least one plan and a non-empty grid".into(),
        ));
    }
    if plans.len() != golds.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} plans vs {} gold pairs",
            plans.len(),
            golds.len()
        )));
    }
    let mut best: Option<(f64, f64)> = None; // (f1, delta)
    for &delta in grid {
        let f1 = mean_f1(plans, golds, delta)?;
        let better = match best {
            None => true,
            Some((best_f1, best_delta)) => {
                f1 > best_f1 || (f1 == best_f1 && delta < best_delta)
            }
        };
        if better {
            best = Some((f1, delta));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

/// 20 log-spaced candidate thresholds from `1e-4/(n*m)` up to 1.0.
pub fn default_delta_grid(n: usize, m: usize) -> Vec<f64> {
    let lo = 1e-4 / (n as f64 * m as f64);
    let hi = 1.0;
    let steps = 20;
    (0..steps)
        .map(|t| lo * (hi / lo).powf(t as f64 / (steps - 1) as f64))
        .collect()
}

/// Zeroes every entry `<= lambda`, keeping the rest verbatim — no
/// renormalization, so the masked cost is a pure sub-sum of the full
/// cost. Idempotent; marginals are re-recorded as the realized masses.
pub fn sufficiency_mask(p: &TransportPlan, lambda: f64) -> Result<TransportPlan> {
    let (n, m) = (p.rows(), p.cols());
    let values: Vec<f64> = p
        .values()
        .iter()
        .map(|&v| if v <= lambda { 0.0 } else { v })
        .collect();
    let row_sums: Vec<f64> = (0..n)
        .map(|i| values[i * m..(i + 1) * m].iter().sum())
        .collect();
    let col_sums: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| values[i * m + j]).sum())
        .collect();
    TransportPlan::new(
        n,
        m,
        values,
        Marginals::masses(row_sums)?,
        Marginals::masses(col_sums)?,
        DEFAULT_FEASIBILITY_TOL,
    )
}

/// `max_i max(cost_pos - costs_neg[i] + margin, 0)`.
pub fn hinge_contrastive_loss(cost_pos: f64, costs_neg: &[f64], margin: f64) -> Result<f64> {
    if costs_neg.is_empty() {
        return Err(Error::InvalidInput(
            "contrastive loss needs at least one negative".into(),
        ));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "margin must be nonnegative, got {margin}"
        )));
    }
    Ok(costs_neg
        .iter()
        .map(|neg| (cost_pos - neg + margin).max(0.0))
        .fold(0.0, f64::max))
}

/// `alpha * task_loss + (1 - alpha) * rationale_loss` with `alpha` in [0, 1].
pub fn combined_loss(task_loss: f64, rationale_loss: f64, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(alpha * task_loss + (1.0 - alpha) * rationale_loss)
}

/// Mean binary cross-entropy of the soft rationales against binary gold,
/// pooled over both sides' positions. Predictions are clipped to
/// `[1e-7, 1 - 1e-7]` before the logs.
pub fn rationale_cross_entropy(
    soft: &SoftRationales,
    gold_x: &[u8],
    gold_y: &[u8],
) -> Result<f64> {
    if soft.s_x.len() != gold_x.len() || soft.s_y.len() != gold_y.len() {
        return Err(Error::ShapeMismatch(format!(
            "soft sides ({}, {}) vs gold sides ({}, {})",
            soft.s_x.len(),
            soft.s_y.len(),
            gold_x.len(),
            gold_y.len()
        )));
    }
    let bce = |p: f64, y: u8| -> f64 {
        let p = p.clamp(CROSS_ENTROPY_CLIP, 1.0 - CROSS_ENTROPY_CLIP);
        if y != 0 {
            -p.ln()
        } else {
            -(1.0 - p).ln()
        }
    };
    let total: f64 = soft
        .s_x
        .iter()
        .zip(gold_x)
        .chain(soft.s_y.iter().zip(gold_y))
        .map(|(&p, &y)| bce(p, y))
        .sum();
    Ok(total / (gold_x.len() + gold_y.len()) as f64)
}
