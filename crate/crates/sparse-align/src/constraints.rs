//! Constrained alignment via replica and dummy augmentation.
//!
//! Each variant rewrites the n x m problem as a square N x N assignment
//! with uniform marginals: replica rows let an original point match
//! several columns, dummy rows/columns absorb whatever may stay
//! unmatched at zero cost. Solving the augmented problem with the
//! entropic solver and rounding to a permutation yields the sparse
//! alignment patterns; the permutation structure is what delivers the
//! per-variant sparsity guarantees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{extreme_point_permutation, round_to_vertex, Permutation};
use crate::ot::{transport_cost, CostMatrix, Marginals, SolverConfig, TransportPlan, DEFAULT_FEASIBILITY_TOL};
use crate::sinkhorn::sinkhorn_epsilon_scaled;

/// Default active threshold `0.01 / (n * m)`.
pub fn default_lambda(n: usize, m: usize) -> f64 {
    0.01 / (n as f64 * m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintVariant {
    /// Plain OT on the original rectangle; no augmentation.
    Vanilla,
    /// Every row matched to exactly k columns, columns used at most once.
    OneToK,
    /// Every row matched to at most k columns; opting out is free.
    RelaxedOneToK,
    /// Exactly k row-column matches overall.
    ExactK,
}

impl ConstraintVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintVariant::Vanilla => "vanilla",
            ConstraintVariant::OneToK => "one_to_k",
            ConstraintVariant::RelaxedOneToK => "relaxed_one_to_k",
            ConstraintVariant::ExactK => "exact_k",
        }
    }
}

fn default_k() -> usize {
    1
}

/// A constrained-alignment request. `k` is ignored for [`ConstraintVariant::Vanilla`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub variant: ConstraintVariant,
    #[serde(default = "default_k")]
    pub k: usize,
}

impl ConstraintSpec {
    pub fn vanilla() -> Self {
        ConstraintSpec {
            variant: ConstraintVariant::Vanilla,
            k: 1,
        }
    }

    pub fn one_to_k(k: usize) -> Self {
        ConstraintSpec {
            variant: ConstraintVariant::OneToK,
            k,
        }
    }

    pub fn relaxed_one_to_k(k: usize) -> Self {
        ConstraintSpec {
            variant: ConstraintVariant::RelaxedOneToK,
            k,
        }
    }

    pub fn exact_k(k: usize) -> Self {
        ConstraintSpec {
            variant: ConstraintVariant::ExactK,
            k,
        }
    }

    /// Checks the k-bounds against an oriented instance (`n <= m`):
    /// one-to-k needs `1 <= k <= floor(m/n)`, relaxed needs `k >= 1`,
    /// exact-k needs `1 <= k <= n`.
    pub fn validate_for(&self, n: usize, m: usize) -> Result<()> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("empty cost matrix".into()));
        }
        match self.variant {
            ConstraintVariant::Vanilla => Ok(()),
            ConstraintVariant::OneToK => {
                let max = m / n;
                if self.k < 1 || self.k > max {
                    return Err(Error::KOutOfRange {
                        variant: "one_to_k",
                        k: self.k,
                        max,
                    });
                }
                Ok(())
            }
            ConstraintVariant::RelaxedOneToK => {
                if self.k < 1 {
                    return Err(Error::KOutOfRange {
                        variant: "relaxed_one_to_k",
                        k: self.k,
                        max: usize::MAX,
                    });
                }
                Ok(())
            }
            ConstraintVariant::ExactK => {
                if self.k < 1 || self.k > n {
                    return Err(Error::KOutOfRange {
                        variant: "exact_k",
                        k: self.k,
                        max: n,
                    });
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Original(usize),
    ReplicaOf(usize),
    Dummy,
}

impl RowKind {
    /// The original row this augmented row stands for, if any.
    pub fn original_index(&self) -> Option<usize> {
        match self {
            RowKind::Original(i) | RowKind::ReplicaOf(i) => Some(*i),
            RowKind::Dummy => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColKind {
    Original(usize),
    Dummy,
}

impl ColKind {
    pub fn original_index(&self) -> Option<usize> {
        match self {
            ColKind::Original(j) => Some(*j),
            ColKind::Dummy => None,
        }
    }
}

/// The square uniform-marginal problem produced by [`augment`].
///
/// Dummy rows and columns cost exactly 0.0 against everything; replica
/// rows carry the costs of the original row they copy.
#[derive(Debug, Clone)]
pub struct AugmentedProblem {
    pub c_hat: CostMatrix,
    pub a_hat: Marginals,
    pub b_hat: Marginals,
    pub row_kind: Vec<RowKind>,
    pub col_kind: Vec<ColKind>,
    pub n_original: usize,
    pub m_original: usize,
}

impl AugmentedProblem {
    pub fn size(&self) -> usize {
        self.row_kind.len()
    }
}

fn build_augmented(
    c: &CostMatrix,
    row_kind: Vec<RowKind>,
    col_kind: Vec<ColKind>,
) -> AugmentedProblem {
    let rows = row_kind.len();
    let cols = col_kind.len();
    let mut values = vec![0.0; rows * cols];
    for (r, rk) in row_kind.iter().enumerate() {
        let Some(i) = rk.original_index() else { continue };
        for (s, ck) in col_kind.iter().enumerate() {
            if let Some(j) = ck.original_index() {
                values[r * cols + s] = c.value(i, j);
            }
        }
    }
    AugmentedProblem {
        c_hat: CostMatrix::new(rows, cols, values)
            .expect("augmentation of a finite matrix is finite"),
        a_hat: Marginals::uniform(rows),
        b_hat: Marginals::uniform(cols),
        row_kind,
        col_kind,
        n_original: c.rows(),
        m_original: c.cols(),
    }
}

/// Builds the square augmented problem for an oriented instance
/// (`n <= m`; callers transpose first — [`solve_constrained`] does this
/// automatically):
///
/// * one-to-k: N = m; rows are kn replicas plus m - kn dummies.
/// * relaxed one-to-k: N = m + kn; rows are kn replicas plus m dummies,
///   columns the m originals plus kn dummies. Requires mixed-sign costs,
///   otherwise matching (all positive) or opting out (all negative)
///   silently degenerates.
/// * exact-k: N = n + m - k; rows are the n originals plus m - k dummies,
///   columns the m originals plus n - k dummies. Requires strictly
///   positive costs so that using more than k real matches is never free.
/// * vanilla: pass-through, no augmentation (not necessarily square).
pub fn augment(c: &CostMatrix, spec: &ConstraintSpec) -> Result<AugmentedProblem> {
    let (n, m) = (c.rows(), c.cols());
    if n > m {
        return Err(Error::InvalidInput(format!(
            "augment expects n <= m, got {n}x{m}; transpose first"
        )));
    }
    spec.validate_for(n, m)?;
    let k = spec.k;

    match spec.variant {
        ConstraintVariant::Vanilla => Ok(build_augmented(
            c,
            (0..n).map(RowKind::Original).collect(),
            (0..m).map(ColKind::Original).collect(),
        )),
        ConstraintVariant::OneToK => {
            let mut row_kind = Vec::with_capacity(m);
            for i in 0..n {
                row_kind.extend(std::iter::repeat_n(RowKind::ReplicaOf(i), k));
            }
            row_kind.extend(std::iter::repeat_n(RowKind::Dummy, m - k * n));
            Ok(build_augmented(
                c,
                row_kind,
                (0..m).map(ColKind::Original).collect(),
            ))
        }
        ConstraintVariant::RelaxedOneToK => {
            if !(c.min_value() < 0.0 && c.max_value() > 0.0) {
                return Err(Error::ConstraintSign {
                    variant: "relaxed_one_to_k",
                    detail: format!(
                        "costs must take both signs (matches are rewarded, opting out is free); \
                         got range [{}, {}]",
                        c.min_value(),
                        c.max_value()
                    ),
                });
            }
            let mut row_kind = Vec::with_capacity(m + k * n);
            for i in 0..n {
                row_kind.extend(std::iter::repeat_n(RowKind::ReplicaOf(i), k));
            }
            row_kind.extend(std::iter::repeat_n(RowKind::Dummy, m));
            let mut col_kind: Vec<ColKind> = (0..m).map(ColKind::Original).collect();
            col_kind.extend(std::iter::repeat_n(ColKind::Dummy, k * n));
            Ok(build_augmented(c, row_kind, col_kind))
        }
        ConstraintVariant::ExactK => {
            if c.min_value() <= 0.0 {
                return Err(Error::ConstraintSign {
                    variant: "exact_k",
                    detail: format!(
                        "costs must be strictly positive so no real match is free; min = {}",
                        c.min_value()
                    ),
                });
            }
            let mut row_kind: Vec<RowKind> = (0..n).map(RowKind::Original).collect();
            row_kind.extend(std::iter::repeat_n(RowKind::Dummy, m - k));
            let mut col_kind: Vec<ColKind> = (0..m).map(ColKind::Original).collect();
            col_kind.extend(std::iter::repeat_n(ColKind::Dummy, n - k));
            Ok(build_augmented(c, row_kind, col_kind))
        }
    }
}

/// Greedy rounding of a near-permutation square plan: take entries in
/// decreasing mass (ties: lowest row, then lowest column), skipping rows
/// and columns already matched. Errors when the matched cells capture
/// less than `(1 - 0.01/N)` of the plan mass — the plan is then a tied
/// mixture or too diffuse, and greedy cell-by-cell choices cannot be
/// trusted.
pub fn round_to_assignment(p_hat: &TransportPlan) -> Result<Permutation> {
    if p_hat.rows() != p_hat.cols() {
        return Err(Error::ShapeMismatch(format!(
            "assignment rounding needs a square plan, got {}x{}",
            p_hat.rows(),
            p_hat.cols()
        )));
    }
    let n = p_hat.rows();
    let mut order: Vec<(usize, usize)> = (0..n * n).map(|idx| (idx / n, idx % n)).collect();
    order.sort_by(|&(i1, j1), &(i2, j2)| {
        p_hat
            .value(i2, j2)
            .partial_cmp(&p_hat.value(i1, j1))
            .expect("plan entries are finite")
            .then(i1.cmp(&i2))
            .then(j1.cmp(&j2))
    });

    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    let mut mapping = vec![usize::MAX; n];
    let mut captured = 0.0;
    for (i, j) in order {
        if row_used[i] || col_used[j] {
            continue;
        }
        row_used[i] = true;
        col_used[j] = true;
        mapping[i] = j;
        captured += p_hat.value(i, j);
    }

    let total = p_hat.total_mass();
    let required = (1.0 - 0.01 / n as f64) * total;
    if captured < required {
        return Err(Error::Rounding(format!(
            "greedy assignment captured {captured:.6} of {total:.6} mass \
             (needs {required:.6}); plan is tied or too diffuse — \
             reduce epsilon_final or recover an extreme point instead"
        )));
    }
    Permutation::new(mapping)
}

/// Collapses an augmented permutation-like plan back to the original
/// n x m rectangle: replica masses sum into their original row, dummy
/// rows and columns are dropped. Marginals are recorded as the realized
/// (possibly partial) masses — no renormalization.
pub fn extract(p_hat: &TransportPlan, problem: &AugmentedProblem) -> Result<TransportPlan> {
    if p_hat.rows() != problem.row_kind.len() || p_hat.cols() != problem.col_kind.len() {
        return Err(Error::ShapeMismatch(format!(
            "plan is {}x{} but the augmented problem is {}x{}",
            p_hat.rows(),
            p_hat.cols(),
            problem.row_kind.len(),
            problem.col_kind.len()
        )));
    }
    let (n, m) = (problem.n_original, problem.m_original);
    let mut values = vec![0.0; n * m];
    for (r, rk) in problem.row_kind.iter().enumerate() {
        let Some(i) = rk.original_index() else { continue };
        for (s, ck) in problem.col_kind.iter().enumerate() {
            if let Some(j) = ck.original_index() {
                values[i * m + j] += p_hat.value(r, s);
            }
        }
    }
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

/// Entries exceeding `lambda`, in row-major order.
pub fn active_alignments(p: &TransportPlan, lambda: f64) -> (usize, Vec<(usize, usize)>) {
    let pairs: Vec<(usize, usize)> = p
        .entries()
        .filter(|&(_, _, mass)| mass > lambda)
        .map(|(i, j, _)| (i, j))
        .collect();
    (pairs.len(), pairs)
}

/// An entry of the extracted plan above the active threshold:
/// `(row, column, mass)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivePair(pub usize, pub usize, pub f64);

/// A solved constrained alignment on the original rectangle.
#[derive(Debug, Clone, Serialize)]
pub struct ConstrainedAlignment {
    pub plan: TransportPlan,
    pub active_pairs: Vec<ActivePair>,
    pub spec: ConstraintSpec,
    /// Cost of the rounded plan on the augmented matrix.
    pub augmented_cost: f64,
    /// `sum C[i][j] * mass` over the active pairs, on the original matrix.
    pub original_cost: f64,
}

/// Full constrained pipeline: orient so the row set is the smaller one,
/// augment, solve the square uniform problem with the epsilon-scaled
/// solver, round to a permutation, and collapse back to the original
/// rectangle.
///
/// When the entropic solution is a tied mixture of optimal permutations,
/// greedy rounding refuses (it would stitch rows of different optima
/// together); the fallback recovers a permutation supported on the
/// mixture, which is within the entropic tolerance of optimal.
pub fn solve_constrained(
    c: &CostMatrix,
    spec: &ConstraintSpec,
    cfg: &SolverConfig,
) -> Result<ConstrainedAlignment> {
    let transposed = c.rows() > c.cols();
    let oriented = if transposed { c.transpose() } else { c.clone() };

    let problem = augment(&oriented, spec)?;
    let (p_hat, _state) = sinkhorn_epsilon_scaled(
        &problem.c_hat,
        &problem.a_hat,
        &problem.b_hat,
        cfg,
    )?;

    let (augmented_cost, mut extracted) = if spec.variant == ConstraintVariant::Vanilla {
        let rounded = round_to_vertex(&p_hat)?;
        (transport_cost(&problem.c_hat, &rounded)?, rounded)
    } else {
        let perm = match round_to_assignment(&p_hat) {
            Ok(perm) => perm,
            Err(Error::Rounding(_)) => extreme_point_permutation(&p_hat)?,
            Err(other) => return Err(other),
        };
        let rounded = perm.to_plan();
        (
            transport_cost(&problem.c_hat, &rounded)?,
            extract(&rounded, &problem)?,
        )
    };

    if transposed {
        extracted = extracted.transpose();
    }

    let lambda = default_lambda(c.rows(), c.cols());
    let active_pairs: Vec<ActivePair> = extracted
        .entries()
        .filter(|&(_, _, mass)| mass > lambda)
        .map(|(i, j, mass)| ActivePair(i, j, mass))
        .collect();
    let original_cost = active_pairs
        .iter()
        .map(|&ActivePair(i, j, mass)| c.value(i, j) * mass)
        .sum();

    Ok(ConstrainedAlignment {
        plan: extracted,
        active_pairs,
        spec: *spec,
        augmented_cost,
        original_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{brute_force_assignment, brute_force_constrained, random_uniform_cost, SplitMix64};

    #[test]
    fn spec_json_round_trips_and_defaults_k() {
        let spec: ConstraintSpec = serde_json::from_str(r#"{"variant":"one_to_k","k":2}"#).unwrap();
        assert_eq!(spec, ConstraintSpec::one_to_k(2));
        let spec: ConstraintSpec = serde_json::from_str(r#"{"variant":"exact_k"}"#).unwrap();
        assert_eq!(spec.k, 1);
        assert!(serde_json::from_str::<ConstraintSpec>(r#"{"variant":"two_to_k"}"#).is_err());
        let text = serde_json::to_string(&ConstraintSpec::relaxed_one_to_k(3)).unwrap();
        assert!(text.contains(r#""variant":"relaxed_one_to_k""#));
    }

    #[test]
    fn one_to_k_augmentation_counts_and_costs() {
        let c = random_uniform_cost(2, 6, 0.1, 1.0, &mut SplitMix64::new(1));
        let problem = augment(&c, &ConstraintSpec::one_to_k(2)).unwrap();
        assert_eq!(problem.size(), 6);
        assert_eq!(
            problem.row_kind,
            vec![
                RowKind::ReplicaOf(0),
                RowKind::ReplicaOf(0),
                RowKind::ReplicaOf(1),
                RowKind::ReplicaOf(1),
                RowKind::Dummy,
                RowKind::Dummy,
            ]
        );
        // Replica rows copy the original costs; dummy rows are all zero.
        for j in 0..6 {
            assert_eq!(problem.c_hat.value(0, j), c.value(0, j));
            assert_eq!(problem.c_hat.value(1, j), c.value(0, j));
            assert_eq!(problem.c_hat.value(2, j), c.value(1, j));
            assert_eq!(problem.c_hat.value(4, j), 0.0);
            assert_eq!(problem.c_hat.value(5, j), 0.0);
        }
        assert_eq!(problem.a_hat.weights(), vec![1.0 / 6.0; 6].as_slice());
    }

    #[test]
    fn relaxed_augmentation_counts() {
        let c = CostMatrix::from_rows(&[vec![-0.5, 0.2, 0.3], vec![0.4, -0.1, 0.6]]).unwrap();
        let problem = augment(&c, &ConstraintSpec::relaxed_one_to_k(1)).unwrap();
        assert_eq!(problem.size(), 5);
        assert_eq!(
            problem.row_kind,
            vec![
                RowKind::ReplicaOf(0),
                RowKind::ReplicaOf(1),
                RowKind::Dummy,
                RowKind::Dummy,
                RowKind::Dummy,
            ]
        );
        assert_eq!(
            problem.col_kind,
            vec![
                ColKind::Original(0),
                ColKind::Original(1),
                ColKind::Original(2),
                ColKind::Dummy,
                ColKind::Dummy,
            ]
        );
    }

    #[test]
    fn exact_k_augmentation_counts() {
        let c = random_uniform_cost(3, 4, 0.1, 1.0, &mut SplitMix64::new(2));
        let problem = augment(&c, &ConstraintSpec::exact_k(2)).unwrap();
        assert_eq!(problem.size(), 5);
        let dummies_r = problem
            .row_kind
            .iter()
            .filter(|k| **k == RowKind::Dummy)
            .count();
        let dummies_c = problem
            .col_kind
            .iter()
            .filter(|k| **k == ColKind::Dummy)
            .count();
        assert_eq!(dummies_r, 2);
        assert_eq!(dummies_c, 1);
    }

    #[test]
    fn sign_preconditions_are_hard_errors() {
        let with_zero = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            augment(&with_zero, &ConstraintSpec::exact_k(1)),
            Err(Error::ConstraintSign { variant: "exact_k", .. })
        ));
        let all_positive = CostMatrix::from_rows(&[vec![0.5, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            augment(&all_positive, &ConstraintSpec::relaxed_one_to_k(1)),
            Err(Error::ConstraintSign {
                variant: "relaxed_one_to_k",
                ..
            })
        ));
    }

    #[test]
    fn k_bounds_are_enforced() {
        let c = random_uniform_cost(2, 6, 0.1, 1.0, &mut SplitMix64::new(3));
        assert!(matches!(
            augment(&c, &ConstraintSpec::one_to_k(4)),
            Err(Error::KOutOfRange { max: 3, .. })
        ));
        assert!(matches!(
            augment(&c, &ConstraintSpec::one_to_k(0)),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(matches!(
            augment(&c, &ConstraintSpec::exact_k(3)),
            Err(Error::KOutOfRange { max: 2, .. })
        ));
        let mixed = CostMatrix::from_rows(&[vec![-0.5, 0.2], vec![0.4, -0.1]]).unwrap();
        assert!(matches!(
            augment(&mixed, &ConstraintSpec::relaxed_one_to_k(0)),
            Err(Error::KOutOfRange { .. })
        ));
    }

    #[test]
    fn augment_requires_orientation() {
        let c = random_uniform_cost(4, 2, 0.1, 1.0, &mut SplitMix64::new(4));
        assert!(matches!(
            augment(&c, &ConstraintSpec::exact_k(1)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn rounding_recovers_clean_and_noisy_permutations() {
        let perm = Permutation::new(vec![2, 0, 1]).unwrap();
        let recovered = round_to_assignment(&perm.to_plan()).unwrap();
        assert_eq!(recovered, perm);

        // Perturbation far below the tie scale.
        let mut rng = SplitMix64::new(5);
        let noisy: Vec<f64> = perm
            .to_plan()
            .values()
            .iter()
            .map(|v| v + 1e-6 * rng.next_f64())
            .collect();
        let plan = TransportPlan::new(
            3,
            3,
            noisy,
            Marginals::uniform(3),
            Marginals::uniform(3),
            1e-4,
        )
        .unwrap();
        assert_eq!(round_to_assignment(&plan).unwrap(), perm);
    }

    #[test]
    fn rounding_refuses_diffuse_plans() {
        let p = TransportPlan::new(
            3,
            3,
            vec![1.0 / 9.0; 9],
            Marginals::uniform(3),
            Marginals::uniform(3),
            DEFAULT_FEASIBILITY_TOL,
        )
        .unwrap();
        assert!(matches!(round_to_assignment(&p), Err(Error::Rounding(_))));
    }

    #[test]
    fn extraction_collapses_replicas_and_drops_dummies() {
        let c = random_uniform_cost(3, 3, 0.1, 1.0, &mut SplitMix64::new(6));
        let problem = augment(&c, &ConstraintSpec::one_to_k(1)).unwrap();
        let identity = Permutation::identity(3).to_plan();
        let extracted = extract(&identity, &problem).unwrap();
        for (i, j, mass) in extracted.entries() {
            if i == j {
                assert!((mass - 1.0 / 3.0).abs() < 1e-15);
            } else {
                assert_eq!(mass, 0.0);
            }
        }
    }

    #[test]
    fn relaxed_with_bypassed_signs_goes_all_dummy() {
        // All-positive costs make every real match worse than opting out.
        // augment() rejects this, so assemble the augmented problem by hand
        // and check the end-to-end claim on it.
        let c = CostMatrix::new(1, 1, vec![0.5]).unwrap();
        let problem = AugmentedProblem {
            c_hat: CostMatrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.0]]).unwrap(),
            a_hat: Marginals::uniform(2),
            b_hat: Marginals::uniform(2),
            row_kind: vec![RowKind::ReplicaOf(0), RowKind::Dummy],
            col_kind: vec![ColKind::Original(0), ColKind::Dummy],
            n_original: 1,
            m_original: 1,
        };
        let oracle = brute_force_assignment(&problem.c_hat).unwrap();
        assert_eq!(oracle.0.mapping(), &[1, 0]);

        let (p_hat, _) = sinkhorn_epsilon_scaled(
            &problem.c_hat,
            &problem.a_hat,
            &problem.b_hat,
            &SolverConfig::default(),
        )
        .unwrap();
        let perm = round_to_assignment(&p_hat).unwrap();
        assert_eq!(perm.mapping(), &[1, 0]);
        let extracted = extract(&perm.to_plan(), &problem).unwrap();
        assert!(extracted.values().iter().all(|&v| v == 0.0));
        assert_eq!(c.rows(), 1);
    }

    #[test]
    fn active_alignments_uses_the_documented_default() {
        assert!((default_lambda(4, 5) - 5e-4).abs() < 1e-18);
        let p = Permutation::identity(3).to_plan();
        let (count, pairs) = active_alignments(&p, default_lambda(3, 3));
        assert_eq!(count, 3);
        assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn symmetric_exact_k_instance_yields_one_deterministic_pair() {
        let c = CostMatrix::from_rows(&[vec![0.1, 1.1], vec![1.1, 0.1]]).unwrap();
        let alignment =
            solve_constrained(&c, &ConstraintSpec::exact_k(1), &SolverConfig::default()).unwrap();
        assert_eq!(alignment.active_pairs.len(), 1);
        let ActivePair(i, j, mass) = alignment.active_pairs[0];
        assert_eq!(i, j, "tied optimum must sit on the cheap diagonal");
        assert!((mass - 1.0 / 3.0).abs() < 1e-6);
        assert!((alignment.original_cost - 0.1 * mass).abs() < 1e-6);

        // Determinism across repeated solves.
        let again =
            solve_constrained(&c, &ConstraintSpec::exact_k(1), &SolverConfig::default()).unwrap();
        assert_eq!(again.active_pairs, alignment.active_pairs);
    }

    #[test]
    fn one_to_k_solution_matches_the_oracle() {
        let c = CostMatrix::from_rows(&[
            vec![0.1, 0.2, 0.9, 0.9],
            vec![0.9, 0.9, 0.1, 0.2],
        ])
        .unwrap();
        let spec = ConstraintSpec::one_to_k(2);
        let alignment = solve_constrained(&c, &spec, &SolverConfig::default()).unwrap();
        let active: Vec<(usize, usize)> = alignment
            .active_pairs
            .iter()
            .map(|&ActivePair(i, j, _)| (i, j))
            .collect();
        let oracle = brute_force_constrained(&c, &spec).unwrap();
        assert_eq!(active, oracle.pairs);
        // Augmented mass is 1/N per match, so costs compare after scaling.
        let n_hat = 4.0;
        assert!((alignment.original_cost * n_hat - oracle.cost).abs() < 1e-3);
        // Row multiplicities: each row exactly k times.
        for i in 0..2 {
            assert_eq!(active.iter().filter(|&&(r, _)| r == i).count(), 2);
        }
    }

    #[test]
    fn wide_instances_are_transposed_and_mapped_back() {
        let c = CostMatrix::from_rows(&[
            vec![0.2, 0.9],
            vec![0.5, 0.1],
            vec![0.9, 0.9],
        ])
        .unwrap();
        let alignment =
            solve_constrained(&c, &ConstraintSpec::exact_k(1), &SolverConfig::default()).unwrap();
        assert_eq!(alignment.plan.rows(), 3);
        assert_eq!(alignment.plan.cols(), 2);
        assert_eq!(alignment.active_pairs.len(), 1);
        let ActivePair(i, j, _) = alignment.active_pairs[0];
        assert_eq!((i, j), (1, 1));
    }

    #[test]
    fn vanilla_square_rounds_to_a_permutation() {
        let mut rng = SplitMix64::new(7);
        let c = random_uniform_cost(4, 4, 0.0, 1.0, &mut rng);
        let alignment =
            solve_constrained(&c, &ConstraintSpec::vanilla(), &SolverConfig::default()).unwrap();
        assert_eq!(alignment.active_pairs.len(), 4);
        let mut rows_seen = [false; 4];
        let mut cols_seen = [false; 4];
        for &ActivePair(i, j, mass) in &alignment.active_pairs {
            assert!(!rows_seen[i] && !cols_seen[j]);
            rows_seen[i] = true;
            cols_seen[j] = true;
            assert!((mass - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn support_is_invariant_under_cost_scaling() {
        let mut rng = SplitMix64::new(8);
        let c = random_uniform_cost(3, 5, 0.1, 1.0, &mut rng);
        let scaled = c.map(|v| 2.5 * v).unwrap();
        let spec = ConstraintSpec::exact_k(2);
        let cfg = SolverConfig::default();
        let base = solve_constrained(&c, &spec, &cfg).unwrap();
        let big = solve_constrained(&scaled, &spec, &cfg).unwrap();
        let pairs = |a: &ConstrainedAlignment| {
            a.active_pairs
                .iter()
                .map(|&ActivePair(i, j, _)| (i, j))
                .collect::<Vec<_>>()
        };
        assert_eq!(pairs(&base), pairs(&big));
    }
}
