//! Retrieval metrics over ranked candidate lists, plus batch sparsity
//! statistics for transport plans.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ot::{transport_cost, CostMatrix, TransportPlan};

/// One scored candidate document for a query.
#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub candidate_id: String,
    pub score: f64,
    pub relevant: bool,
}

/// Candidates for one query, sorted by score descending with ties broken
/// by `candidate_id` ascending so rankings are deterministic.
#[derive(Debug, Clone, Serialize)]
pub struct RankedList {
    query_id: String,
    candidates: Vec<Candidate>,
}

impl RankedList {
    pub fn new(query_id: impl Into<String>, mut candidates: Vec<Candidate>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidInput(
                "ranked list needs at least one candidate".into(),
            ));
        }
        if let Some(bad) = candidates.iter().find(|c| !c.score.is_finite()) {
            return Err(Error::NonFinite(format!(
                "candidate {:?} has score {}",
                bad.candidate_id, bad.score
            )));
        }
        candidates.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then_with(|| a.candidate_id.cmp(&b.candidate_id))
        });
        Ok(RankedList {
            query_id: query_id.into(),
            candidates,
        })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    /// Candidates in rank order (best first).
    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    fn relevant_count(&self) -> usize {
        self.candidates.iter().filter(|c| c.relevant).count()
    }
}

/// Alignment score for a query/candidate pair: negated transport cost, so
/// higher is better.
pub fn score_pair(cost: &CostMatrix, plan: &TransportPlan) -> Result<f64> {
    Ok(-transport_cost(cost, plan)?)
}

/// A metric value together with how many queries contributed to it and
/// how many were skipped for lacking the required relevance labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub value: f64,
    pub used: usize,
    pub skipped: usize,
}

fn per_query(
    lists: &[RankedList],
    usable: impl Fn(&RankedList) -> bool,
    score: impl Fn(&RankedList) -> f64,
) -> Result<MetricReport> {
    let mut used = 0usize;
    let mut skipped = 0usize;
    let mut total = 0.0;
    for list in lists {
        if usable(list) {
            total += score(list);
            used += 1;
        } else {
            skipped += 1;
        }
    }
    if used == 0 {
        return Err(Error::InvalidInput(
            "no query has the relevance labels this metric needs".into(),
        ));
    }
    Ok(MetricReport {
        value: total / used as f64,
        used,
        skipped,
    })
}

fn average_precision(list: &RankedList) -> f64 {
    let mut relevant_seen = 0usize;
    let mut sum = 0.0;
    for (idx, cand) in list.candidates().iter().enumerate() {
        if cand.relevant {
            relevant_seen += 1;
            sum += relevant_seen as f64 / (idx + 1) as f64;
        }
    }
    sum / relevant_seen as f64
}

/// Mean average precision over queries with at least one relevant candidate.
pub fn map(lists: &[RankedList]) -> Result<MetricReport> {
    per_query(lists, |l| l.relevant_count() > 0, average_precision)
}

/// Mean reciprocal rank of the first relevant candidate.
pub fn mrr(lists: &[RankedList]) -> Result<MetricReport> {
    per_query(
        lists,
        |l| l.relevant_count() > 0,
        |l| {
            let rank = l
                .candidates()
                .iter()
                .position(|c| c.relevant)
                .expect("usable lists have a relevant candidate");
            1.0 / (rank + 1) as f64
        },
    )
}

/// Fraction of queries whose top-ranked candidate is relevant.
pub fn p_at_1(lists: &[RankedList]) -> Result<MetricReport> {
    per_query(
        lists,
        |l| l.relevant_count() > 0,
        |l| {
            if l.candidates()[0].relevant {
                1.0
            } else {
                0.0
            }
        },
    )
}

/// Pairwise AUC per query (relevant-vs-irrelevant score pairs, ties worth
/// 0.5), averaged over queries that have both kinds of candidates.
pub fn auc(lists: &[RankedList]) -> Result<MetricReport> {
    per_query(
        lists,
        |l| {
            let rel = l.relevant_count();
            rel > 0 && rel < l.candidates().len()
        },
        |l| {
            let relevant: Vec<f64> = l
                .candidates()
                .iter()
                .filter(|c| c.relevant)
                .map(|c| c.score)
                .collect();
            let irrelevant: Vec<f64> = l
                .candidates()
                .iter()
                .filter(|c| !c.relevant)
                .map(|c| c.score)
                .collect();
            let mut wins = 0.0;
            for r in &relevant {
                for s in &irrelevant {
                    if r > s {
                        wins += 1.0;
                    } else if r == s {
                        wins += 0.5;
                    }
                }
            }
            wins / (relevant.len() * irrelevant.len()) as f64
        },
    )
}

/// Batch sparsity: active entries are those with mass strictly above
/// `lambda`; the percentage is per-plan (relative to its own n*m) and
/// averaged over the batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparsityStats {
    pub mean_active_count: f64,
    pub mean_active_percent: f64,
}

pub fn sparsity_stats(plans: &[TransportPlan], lambda: f64) -> Result<SparsityStats> {
    if plans.is_empty() {
        return Err(Error::InvalidInput(
            "sparsity statistics need at least one plan".into(),
        ));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidInput(format!(
            "sparsity threshold must be finite and non-negative, got {lambda}"
        )));
    }
    let mut count_sum = 0.0;
    let mut percent_sum = 0.0;
    for plan in plans {
        let active = plan.values().iter().filter(|&&v| v > lambda).count();
        count_sum += active as f64;
        percent_sum += 100.0 * active as f64 / (plan.rows() * plan.cols()) as f64;
    }
    let n = plans.len() as f64;
    Ok(SparsityStats {
        mean_active_count: count_sum / n,
        mean_active_percent: percent_sum / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::Marginals;

    fn cand(id: &str, score: f64, relevant: bool) -> Candidate {
        Candidate {
            candidate_id: id.into(),
            score,
            relevant,
        }
    }

    fn list(query: &str, cands: Vec<Candidate>) -> RankedList {
        RankedList::new(query, cands).unwrap()
    }

    #[test]
    fn sorting_is_score_descending_then_id_ascending() {
        let l = list(
            "q",
            vec![
                cand("beta", 0.5, false),
                cand("alpha", 0.5, true),
                cand("gamma", 0.9, false),
            ],
        );
        let ids: Vec<&str> = l.candidates().iter().map(|c| c.candidate_id.as_str()).collect();
        assert_eq!(ids, ["gamma", "alpha", "beta"]);
    }

    #[test]
    fn rejects_empty_and_non_finite_lists() {
        assert!(RankedList::new("q", vec![]).is_err());
        assert!(RankedList::new("q", vec![cand("a", f64::NAN, true)]).is_err());
    }

    #[test]
    fn relevant_on_top_scores_perfectly() {
        let lists = vec![list(
            "q",
            vec![cand("a", 0.9, true), cand("b", 0.5, false)],
        )];
        assert_eq!(map(&lists).unwrap().value, 1.0);
        assert_eq!(mrr(&lists).unwrap().value, 1.0);
        assert_eq!(p_at_1(&lists).unwrap().value, 1.0);
        assert_eq!(auc(&lists).unwrap().value, 1.0);
    }

    #[test]
    fn relevant_at_rank_two_of_two() {
        let lists = vec![list(
            "q",
            vec![cand("a", 0.9, false), cand("b", 0.5, true)],
        )];
        assert_eq!(map(&lists).unwrap().value, 0.5);
        assert_eq!(mrr(&lists).unwrap().value, 0.5);
        assert_eq!(p_at_1(&lists).unwrap().value, 0.0);
        assert_eq!(auc(&lists).unwrap().value, 0.0);
    }

    #[test]
    fn average_precision_on_ranks_one_and_three() {
        // Relevant at ranks 1 and 3 of 4: AP = (1/1 + 2/3) / 2 = 5/6.
        let lists = vec![list(
            "q",
            vec![
                cand("a", 0.9, true),
                cand("b", 0.7, false),
                cand("c", 0.5, true),
                cand("d", 0.3, false),
            ],
        )];
        assert!((map(&lists).unwrap().value - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(mrr(&lists).unwrap().value, 1.0);
        // AUC: pairs (a,b),(a,d),(c,b),(c,d) -> wins 1,1,0,1 = 3/4.
        assert!((auc(&lists).unwrap().value - 0.75).abs() < 1e-15);
    }

    #[test]
    fn score_ties_count_half_in_auc() {
        let lists = vec![list(
            "q",
            vec![cand("a", 0.5, true), cand("b", 0.5, false)],
        )];
        assert_eq!(auc(&lists).unwrap().value, 0.5);
    }

    #[test]
    fn unusable_queries_are_skipped_and_counted() {
        let lists = vec![
            list("q1", vec![cand("a", 0.9, true), cand("b", 0.1, false)]),
            list("q2", vec![cand("a", 0.9, false), cand("b", 0.1, false)]),
            list("q3", vec![cand("a", 0.9, true), cand("b", 0.1, true)]),
        ];
        let m = map(&lists).unwrap();
        assert_eq!((m.used, m.skipped), (2, 1));
        // AUC also needs an irrelevant candidate, so q3 is skipped too.
        let a = auc(&lists).unwrap();
        assert_eq!((a.used, a.skipped), (1, 2));

        let none = vec![list("q", vec![cand("a", 0.9, false)])];
        assert!(map(&none).is_err());
        assert!(auc(&none).is_err());
    }

    #[test]
    fn metrics_are_invariant_under_monotone_score_transforms() {
        let raw = [vec![cand("a", 0.3, false), cand("b", 1.2, true), cand("c", 0.7, false)],
            vec![cand("a", -0.5, true), cand("b", 0.1, false)]];
        let build = |f: &dyn Fn(f64) -> f64| -> Vec<RankedList> {
            raw.iter()
                .enumerate()
                .map(|(i, cands)| {
                    list(
                        &format!("q{i}"),
                        cands
                            .iter()
                            .map(|c| cand(&c.candidate_id, f(c.score), c.relevant))
                            .collect(),
                    )
                })
                .collect()
        };
        let base = build(&|s| s);
        let warped = build(&|s| (3.0 * s).exp());
        for metric in [map, mrr, p_at_1, auc] {
            let b = metric(&base).unwrap();
            let w = metric(&warped).unwrap();
            assert!((b.value - w.value).abs() < 1e-12);
        }
    }

    #[test]
    fn p_at_1_never_exceeds_mrr() {
        let lists = vec![
            list("q1", vec![cand("a", 0.9, false), cand("b", 0.5, true)]),
            list("q2", vec![cand("a", 0.9, true), cand("b", 0.5, false)]),
        ];
        let p = p_at_1(&lists).unwrap().value;
        let m = mrr(&lists).unwrap().value;
        assert!(p <= m + 1e-15);
        assert_eq!(p, 0.5);
        assert_eq!(m, 0.75);
    }

    #[test]
    fn sparsity_stats_average_per_plan_percentages() {
        let a = Marginals::uniform(2);
        let dense = TransportPlan::new(
            2,
            2,
            vec![0.25; 4],
            a.clone(),
            a.clone(),
            1e-6,
        )
        .unwrap();
        let sparse = TransportPlan::new(
            2,
            2,
            vec![0.5, 0.0, 0.0, 0.5],
            a.clone(),
            a,
            1e-6,
        )
        .unwrap();
        let stats = sparsity_stats(&[dense, sparse], 1e-4).unwrap();
        assert_eq!(stats.mean_active_count, 3.0);
        assert_eq!(stats.mean_active_percent, 75.0);

        assert!(sparsity_stats(&[], 1e-4).is_err());
    }

    #[test]
    fn score_pair_negates_transport_cost() {
        let c = CostMatrix::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let a = Marginals::uniform(2);
        let p = TransportPlan::new(2, 2, vec![0.5, 0.0, 0.0, 0.5], a.clone(), a, 1e-6).unwrap();
        let s = score_pair(&c, &p).unwrap();
        assert_eq!(s, 0.0);

        let c2 = CostMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(score_pair(&c2, &p).unwrap(), -1.0);
    }
}
