//! Shared ingestion and solving steps for the document-facing commands:
//! documents -> spans -> embeddings -> cost matrix -> constrained solve.

use std::path::Path;

use sparse_align::constraints::{
    solve_constrained, ConstrainedAlignment, ConstraintSpec, ConstraintVariant,
};
use sparse_align::metrics::score_pair;
use sparse_align::ot::{CostMatrix, SolverConfig};
use sparse_align::textio::{
    cost_matrix, embed_span, split_sentences, CostMetric, EmbeddingTable, SpanSet,
};

use crate::error::Result;

/// Exact-k needs strictly positive costs, and metrics like cosine distance
/// produce (near-)zero entries on near-duplicate spans. The whole matrix is
/// shifted so its minimum becomes `SHIFT_TARGET`: every size-k support's
/// cost moves by the same `k * shift / N`, so the optimal support is
/// unchanged while the precondition is met. Reported costs always use the
/// unshifted matrix.
const SHIFT_TRIGGER: f64 = 1e-6;
const SHIFT_TARGET: f64 = 0.01;

/// Relaxed one-to-k interprets negative costs as rewards, so it pairs with
/// a mixed-sign metric by default; the others use a distance.
pub fn default_metric(variant: ConstraintVariant) -> CostMetric {
    match variant {
        ConstraintVariant::RelaxedOneToK => CostMetric::NegativeCosine,
        _ => CostMetric::CosineDistance,
    }
}

pub struct EmbeddedDoc {
    pub spans: SpanSet,
    pub vectors: Vec<Vec<f64>>,
    /// Indices of spans with no in-vocabulary token (embedded as zero).
    pub oov_spans: Vec<usize>,
}

pub fn embed_document(path: &Path, table: &EmbeddingTable) -> Result<EmbeddedDoc> {
    let text = std::fs::read_to_string(path)?;
    let spans = split_sentences(&text, &path.display().to_string())?;
    let mut vectors = Vec::with_capacity(spans.len());
    let mut oov_spans = Vec::new();
    for (idx, span) in spans.spans().iter().enumerate() {
        let e = embed_span(span, table);
        if e.all_oov {
            oov_spans.push(idx);
        }
        vectors.push(e.vector);
    }
    Ok(EmbeddedDoc {
        spans,
        vectors,
        oov_spans,
    })
}

pub struct SolvedPair {
    pub alignment: ConstrainedAlignment,
    /// Negated transport cost against the unshifted matrix; higher is better.
    pub similarity: f64,
    /// Mass-weighted cost of the active pairs against the unshifted matrix.
    pub original_cost: f64,
    pub shifted: bool,
}

/// Solves one cost matrix under the requested constraint, applying the
/// exact-k positivity shift when needed. All reported numbers refer to the
/// caller's (unshifted) matrix.
pub fn solve_pair(
    cost: &CostMatrix,
    spec: &ConstraintSpec,
    cfg: &SolverConfig,
) -> Result<SolvedPair> {
    let needs_shift =
        spec.variant == ConstraintVariant::ExactK && cost.min_value() < SHIFT_TRIGGER;
    let alignment = if needs_shift {
        let shift = SHIFT_TARGET - cost.min_value();
        let shifted = cost.map(|v| v + shift)?;
        solve_constrained(&shifted, spec, cfg)?
    } else {
        solve_constrained(cost, spec, cfg)?
    };
    let original_cost = alignment
        .active_pairs
        .iter()
        .map(|p| cost.value(p.0, p.1) * p.2)
        .sum();
    let similarity = score_pair(cost, &alignment.plan)?;
    Ok(SolvedPair {
        alignment,
        similarity,
        original_cost,
        shifted: needs_shift,
    })
}

/// Cost matrix between two embedded documents.
pub fn pair_costs(x: &EmbeddedDoc, y: &EmbeddedDoc, metric: CostMetric) -> Result<CostMatrix> {
    Ok(cost_matrix(&x.vectors, &y.vectors, metric)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sparse_align::textio::parse_embeddings;

    #[test]
    fn exact_k_shift_preserves_the_optimal_support() {
        // Zero-diagonal matrix (identical docs): unshifted input violates
        // the exact-k positivity precondition; the shifted solve must pick
        // diagonal cells anyway.
        let c = CostMatrix::from_rows(&[
            vec![0.0, 0.8, 0.9],
            vec![0.8, 0.0, 0.7],
            vec![0.9, 0.7, 0.0],
        ])
        .unwrap();
        let spec = ConstraintSpec::exact_k(2);
        let cfg = SolverConfig::default();
        let solved = solve_pair(&c, &spec, &cfg).unwrap();
        assert!(solved.shifted);
        assert_eq!(solved.alignment.active_pairs.len(), 2);
        for p in &solved.alignment.active_pairs {
            assert_eq!(p.0, p.1, "expected a diagonal pair, got ({}, {})", p.0, p.1);
        }
        assert!(solved.original_cost.abs() < 1e-12);
        assert!(solved.similarity.abs() < 1e-12);
    }

    #[test]
    fn positive_matrices_skip_the_shift() {
        let c = CostMatrix::from_rows(&[vec![0.3, 0.8], vec![0.9, 0.4]]).unwrap();
        let solved =
            solve_pair(&c, &ConstraintSpec::exact_k(1), &SolverConfig::default()).unwrap();
        assert!(!solved.shifted);
        assert_eq!(solved.alignment.active_pairs.len(), 1);
    }

    #[test]
    fn default_metrics_follow_the_variant() {
        assert_eq!(
            default_metric(ConstraintVariant::RelaxedOneToK),
            CostMetric::NegativeCosine
        );
        assert_eq!(
            default_metric(ConstraintVariant::ExactK),
            CostMetric::CosineDistance
        );
        assert_eq!(
            default_metric(ConstraintVariant::Vanilla),
            CostMetric::CosineDistance
        );
    }

    #[test]
    fn embedding_a_document_flags_oov_spans() {
        let table = parse_embeddings("alpha 1 0\nbeta 0 1").unwrap();
        let dir = std::env::temp_dir().join("sparse-align-pipeline-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("doc.txt");
        std::fs::write(&path, "Alpha beta here. Zzz qqq! Beta again.").unwrap();
        let doc = embed_document(&path, &table).unwrap();
        assert_eq!(doc.spans.len(), 3);
        assert_eq!(doc.oov_spans, vec![1]);
        assert_eq!(doc.vectors[0], vec![0.5, 0.5]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
