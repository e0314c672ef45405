//! Exact small-instance oracles and extreme-point machinery: brute-force
//! assignment and constrained-support enumeration, Birkhoff decomposition,
//! cost perturbation with a deterministic generator, and greedy rounding of
//! near-vertex plans.
//!
//! Everything here is deliberately independent of the iterative solvers so
//! it can serve as ground truth for them.

use serde::Serialize;

use crate::constraints::{ConstraintSpec, ConstraintVariant};
use crate::error::{Error, Result};
use crate::ot::{CostMatrix, Marginals, TransportPlan, DEFAULT_FEASIBILITY_TOL};

/// Enumeration budget for [`brute_force_assignment`] (9! = 362880 permutations).
pub const MAX_ASSIGNMENT_SIZE: usize = 9;

/// Enumeration budget for [`brute_force_constrained`].
pub const MAX_CONSTRAINED_ROWS: usize = 4;
pub const MAX_CONSTRAINED_COLS: usize = 6;

/// SplitMix64: a small shift-and-multiply generator with a 64-bit state.
/// It is fixed by its algorithm (additive constant 0x9E3779B97F4A7C15 and
/// the two finalizer multiplies below), so seeded streams are bit-identical
/// across platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw from `[0, 1)` using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Bounded integer draw; modulo bias is irrelevant at the sizes used
    /// for instance sampling.
    pub fn next_below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Random cost matrix with i.i.d. uniform `[lo, hi)` entries, row-major
/// draw order. Used by the randomized verification suites.
pub fn random_uniform_cost(n: usize, m: usize, lo: f64, hi: f64, rng: &mut SplitMix64) -> CostMatrix {
    let values: Vec<f64> = (0..n * m).map(|_| rng.next_range(lo, hi)).collect();
    CostMatrix::new(n, m, values).expect("finite bounds produce a valid matrix")
}

/// A permutation of `{0, .., N-1}`, stored as `i -> mapping[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty permutation".into()));
        }
        let mut seen = vec![false; n];
        for &j in &mapping {
            if j >= n || seen[j] {
                return Err(Error::InvalidInput(format!(
                    "mapping is not a bijection on 0..{n}"
                )));
            }
            seen[j] = true;
        }
        Ok(Permutation { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            mapping: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn apply(&self, i: usize) -> usize {
        self.mapping[i]
    }

    /// Total assignment cost `sum_i C[i, sigma(i)]` (unit mass per match).
    pub fn assignment_cost(&self, c: &CostMatrix) -> Result<f64> {
        if c.rows() != self.len() || c.cols() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "cost {}x{} vs permutation of {}",
                c.rows(),
                c.cols(),
                self.len()
            )));
        }
        Ok(self
            .mapping
            .iter()
            .enumerate()
            .map(|(i, &j)| c.value(i, j))
            .sum())
    }

    /// The plan `M(sigma)/N` with uniform marginals.
    pub fn to_plan(&self) -> TransportPlan {
        let n = self.len();
        let mass = 1.0 / n as f64;
        let mut values = vec![0.0; n * n];
        for (i, &j) in self.mapping.iter().enumerate() {
            values[i * n + j] = mass;
        }
        TransportPlan::new(
            n,
            n,
            values,
            Marginals::uniform(n),
            Marginals::uniform(n),
            DEFAULT_FEASIBILITY_TOL,
        )
        .expect("permutation plans satisfy uniform marginals exactly")
    }
}

/// Advances `perm` to the lexicographically next permutation in place;
/// returns false once the last one has been visited.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Enumerates all permutations in lexicographic order, returning the best
/// mapping, its cost, and the best cost among all other permutations.
/// Ties keep the lexicographically smallest mapping.
pub(crate) fn assignment_best_two(c: &CostMatrix) -> Result<(Permutation, f64, f64)> {
    if c.rows() != c.cols() {
        return Err(Error::ShapeMismatch(format!(
            "assignment needs a square matrix, got {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    let n = c.rows();
    if n > MAX_ASSIGNMENT_SIZE {
        return Err(Error::TooLarge(format!(
            "assignment enumeration capped at N <= {MAX_ASSIGNMENT_SIZE}, got {n}"
        )));
    }
    let cost_of = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(i, &j)| c.value(i, j))
            .sum()
    };
    let mut current: Vec<usize> = (0..n).collect();
    let mut best_map = current.clone();
    let mut best = cost_of(&current);
    let mut second = f64::INFINITY;
    while next_permutation(&mut current) {
        let cost = cost_of(&current);
        if cost < best {
            second = best;
            best = cost;
            best_map = current.clone();
        } else if cost < second {
            second = cost;
        }
    }
    Ok((Permutation::new(best_map)?, best, second))
}

/// Exact assignment oracle: minimizes `sum_i C[i, sigma(i)]` over all `N!`
/// permutations (N <= 9). Ties resolve to the lexicographically smallest
/// mapping. Divide the cost by `N` to compare against mass-`1/N` plans.
pub fn brute_force_assignment(c: &CostMatrix) -> Result<(Permutation, f64)> {
    let (perm, best, _) = assignment_best_two(c)?;
    Ok((perm, best))
}

/// Minimum-cost support found by exhaustive enumeration of a constrained
/// family. Pair order is row-major; `cost` sums `C[i][j]` at unit mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceSolution {
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

/// Exhaustive oracle for the constrained families (n <= 4, m <= 6):
///
/// * one-to-k: every row picks exactly `k` distinct columns, all picks
///   disjoint across rows;
/// * relaxed one-to-k: every row picks at most `k` columns, columns used at
///   most once, opting out costs nothing;
/// * exact-k: exactly `k` row-column matches, rows and columns used at most
///   once.
///
/// Instances with more rows than columns are transposed internally.
pub fn brute_force_constrained(c: &CostMatrix, spec: &ConstraintSpec) -> Result<BruteForceSolution> {
    if spec.variant == ConstraintVariant::Vanilla {
        return Err(Error::InvalidInput(
            "vanilla has no combinatorial support family; use brute_force_assignment".into(),
        ));
    }
    if c.rows() > c.cols() {
        let sol = brute_force_constrained(&c.transpose(), spec)?;
        let mut pairs: Vec<(usize, usize)> = sol.pairs.iter().map(|&(i, j)| (j, i)).collect();
        pairs.sort_unstable();
        return Ok(BruteForceSolution {
            pairs,
            cost: sol.cost,
        });
    }
    let (n, m) = (c.rows(), c.cols());
    if n > MAX_CONSTRAINED_ROWS || m > MAX_CONSTRAINED_COLS {
        return Err(Error::TooLarge(format!(
            "constrained enumeration capped at {MAX_CONSTRAINED_ROWS}x{MAX_CONSTRAINED_COLS}, got {n}x{m}"
        )));
    }
    spec.validate_for(n, m)?;
    let k = spec.k;

    struct Search<'a> {
        c: &'a CostMatrix,
        k: usize,
        chosen: Vec<(usize, usize)>,
        best_cost: f64,
        best_pairs: Vec<(usize, usize)>,
    }

    impl Search<'_> {
        fn record(&mut self, cost: f64) {
            if cost < self.best_cost {
                self.best_cost = cost;
                self.best_pairs = self.chosen.clone();
            }
        }

        // One-to-k: every row takes a k-subset of the still-free columns.
        fn one_to_k_row(&mut self, row: usize, mask: u32, cost: f64) {
            if row == self.c.rows() {
                self.record(cost);
                return;
            }
            self.one_to_k_pick(row, 0, self.k, mask, cost);
        }

        fn one_to_k_pick(&mut self, row: usize, start: usize, left: usize, mask: u32, cost: f64) {
            if left == 0 {
                self.one_to_k_row(row + 1, mask, cost);
                return;
            }
            for j in start..self.c.cols() {
                if mask & (1 << j) != 0 {
                    continue;
                }
                self.chosen.push((row, j));
                let cell = self.c.value(row, j);
                self.one_to_k_pick(row, j + 1, left - 1, mask | (1 << j), cost + cell);
                self.chosen.pop();
            }
        }

        // Relaxed: every row takes a subset of size 0..=k of the free columns.
        fn relaxed_row(&mut self, row: usize, mask: u32, cost: f64) {
            if row == self.c.rows() {
                self.record(cost);
                return;
            }
            self.relaxed_subsets(row, 0, 0, mask, cost);
        }

        fn relaxed_subsets(&mut self, row: usize, start: usize, taken: usize, mask: u32, cost: f64) {
            // Close this row with the current subset.
            self.relaxed_row(row + 1, mask, cost);
            if taken == self.k {
                return;
            }
            for j in start..self.c.cols() {
                if mask & (1 << j) != 0 {
                    continue;
                }
                self.chosen.push((row, j));
                let cell = self.c.value(row, j);
                self.relaxed_subsets(row, j + 1, taken + 1, mask | (1 << j), cost + cell);
                self.chosen.pop();
            }
        }

        // Exact-k: exactly k matches, rows and columns used at most once.
        fn exact_k(&mut self, row: usize, picked: usize, mask: u32, cost: f64) {
            if picked == self.k {
                self.record(cost);
                return;
            }
            if row == self.c.rows() || self.c.rows() - row < self.k - picked {
                return;
            }
            for j in 0..self.c.cols() {
                if mask & (1 << j) != 0 {
                    continue;
                }
                self.chosen.push((row, j));
                let cell = self.c.value(row, j);
                self.exact_k(row + 1, picked + 1, mask | (1 << j), cost + cell);
                self.chosen.pop();
            }
            self.exact_k(row + 1, picked, mask, cost);
        }
    }

    let mut search = Search {
        c,
        k,
        chosen: Vec::new(),
        best_cost: f64::INFINITY,
        best_pairs: Vec::new(),
    };
    match spec.variant {
        ConstraintVariant::OneToK => search.one_to_k_row(0, 0, 0.0),
        ConstraintVariant::RelaxedOneToK => search.relaxed_row(0, 0, 0.0),
        ConstraintVariant::ExactK => search.exact_k(0, 0, 0, 0.0),
        ConstraintVariant::Vanilla => unreachable!(),
    }

    if !search.best_cost.is_finite() {
        return Err(Error::InvalidInput(
            "no feasible support for the requested constraint".into(),
        ));
    }
    search.best_pairs.sort_unstable();
    Ok(BruteForceSolution {
        pairs: search.best_pairs,
        cost: search.best_cost,
    })
}

/// Kuhn augmenting-path matching on the support `{w[i*n+j] > thresh}`.
/// Rows are processed in order and columns tried in ascending index, so the
/// result is deterministic. Returns row -> column, or None if no perfect
/// matching exists.
pub(crate) fn perfect_matching(w: &[f64], n: usize, thresh: f64) -> Option<Vec<usize>> {
    fn augment(
        i: usize,
        w: &[f64],
        n: usize,
        thresh: f64,
        visited: &mut [bool],
        row_of_col: &mut [usize],
    ) -> bool {
        for j in 0..n {
            if w[i * n + j] > thresh && !visited[j] {
                visited[j] = true;
                if row_of_col[j] == usize::MAX
                    || augment(row_of_col[j], w, n, thresh, visited, row_of_col)
                {
                    row_of_col[j] = i;
                    return true;
                }
            }
        }
        false
    }

    let mut row_of_col = vec![usize::MAX; n];
    for i in 0..n {
        let mut visited = vec![false; n];
        if !augment(i, w, n, thresh, &mut visited, &mut row_of_col) {
            return None;
        }
    }
    let mut col_of_row = vec![usize::MAX; n];
    for (j, &i) in row_of_col.iter().enumerate() {
        col_of_row[i] = j;
    }
    Some(col_of_row)
}

/// One permutation term of a Birkhoff decomposition. Weights live on the
/// doubly stochastic scale, so they sum to 1 across terms.
#[derive(Debug, Clone, Serialize)]
pub struct BirkhoffTerm {
    pub weight: f64,
    pub permutation: Permutation,
}

#[derive(Debug, Clone, Serialize)]
pub struct BirkhoffDecomposition {
    pub terms: Vec<BirkhoffTerm>,
    /// Max-norm error of `sum_t weight_t M(sigma_t)/N` against the input.
    pub residual_norm: f64,
}

impl BirkhoffDecomposition {
    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// Rebuilds the plan values `sum_t weight_t M(sigma_t)/N`.
    pub fn reconstruct(&self, n: usize) -> Vec<f64> {
        let mut values = vec![0.0; n * n];
        let mass = 1.0 / n as f64;
        for term in &self.terms {
            for (i, &j) in term.permutation.mapping().iter().enumerate() {
                values[i * n + j] += term.weight * mass;
            }
        }
        values
    }
}

/// Decomposes a square plan whose `N`-scaling is doubly stochastic (within
/// `tol`) into a convex combination of permutation matrices: repeatedly find
/// a perfect matching on the support (entries > `tol`), subtract the
/// minimum matched entry times that permutation, stop once the residual
/// mass drops below `tol`.
pub fn birkhoff_decompose(p: &TransportPlan, tol: f64) -> Result<BirkhoffDecomposition> {
    if p.rows() != p.cols() {
        return Err(Error::ShapeMismatch(format!(
            "Birkhoff decomposition needs a square plan, got {}x{}",
            p.rows(),
            p.cols()
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = p.rows();
    let nf = n as f64;
    let mut w: Vec<f64> = p.values().iter().map(|v| v * nf).collect();

    for i in 0..n {
        let row: f64 = w[i * n..(i + 1) * n].iter().sum();
        if (row - 1.0).abs() > tol {
            return Err(Error::Decomposition(format!(
                "scaled row {i} sums to {row}, not doubly stochastic within {tol}"
            )));
        }
    }
    for j in 0..n {
        let col: f64 = (0..n).map(|i| w[i * n + j]).sum();
        if (col - 1.0).abs() > tol {
            return Err(Error::Decomposition(format!(
                "scaled column {j} sums to {col}, not doubly stochastic within {tol}"
            )));
        }
    }

    let mut terms: Vec<BirkhoffTerm> = Vec::new();
    loop {
        let remaining: f64 = w.iter().sum();
        if remaining < tol {
            break;
        }
        let Some(mapping) = perfect_matching(&w, n, tol) else {
            return Err(Error::Decomposition(format!(
                "no perfect matching on the support while mass {remaining:.3e} remains"
            )));
        };
        let weight = mapping
            .iter()
            .enumerate()
            .map(|(i, &j)| w[i * n + j])
            .fold(f64::INFINITY, f64::min);
        for (i, &j) in mapping.iter().enumerate() {
            let cell = &mut w[i * n + j];
            *cell = (*cell - weight).max(0.0);
        }
        terms.push(BirkhoffTerm {
            weight,
            permutation: Permutation::new(mapping)?,
        });
        // Every pass zeroes at least one support entry.
        if terms.len() > n * n {
            return Err(Error::Decomposition(
                "term budget exceeded; input is not close enough to the Birkhoff polytope".into(),
            ));
        }
    }

    let mut decomposition = BirkhoffDecomposition {
        terms,
        residual_norm: 0.0,
    };
    let recon = decomposition.reconstruct(n);
    decomposition.residual_norm = recon
        .iter()
        .zip(p.values())
        .map(|(r, v)| (r - v).abs())
        .fold(0.0, f64::max);
    Ok(decomposition)
}

/// Support thresholds (on the doubly stochastic scale) tried by
/// [`extreme_point_permutation`], from strongest consensus downwards. The
/// floor keeps every matched cell within `epsilon * ln(1/1e-4)` of tightness
/// for plans produced at temperature `epsilon`.
const MATCHING_LEVELS: [f64; 6] = [0.45, 0.2, 0.05, 0.01, 1e-3, 1e-4];

/// Recovers an extreme point from a plan that converged onto a face of the
/// polytope (a convex mixture of optimal permutations): find the highest
/// support threshold at which the scaled plan still contains a perfect
/// matching and return that matching. Cells admitted at threshold `theta`
/// carry slack at most `epsilon * ln(1/theta)` each, so the recovered
/// permutation stays near-optimal.
pub fn extreme_point_permutation(p: &TransportPlan) -> Result<Permutation> {
    if p.rows() != p.cols() {
        return Err(Error::ShapeMismatch(format!(
            "extreme-point recovery needs a square plan, got {}x{}",
            p.rows(),
            p.cols()
        )));
    }
    let n = p.rows();
    let nf = n as f64;
    let w: Vec<f64> = p.values().iter().map(|v| v * nf).collect();
    for &theta in MATCHING_LEVELS.iter() {
        if let Some(mapping) = perfect_matching(&w, n, theta) {
            return Permutation::new(mapping);
        }
    }
    Err(Error::Rounding(
        "no perfect matching on the plan support at any consensus threshold; \
         plan too diffuse (try a smaller epsilon_final)"
            .into(),
    ))
}

/// Greedy rounding of a feasible plan to an extreme point of the transport
/// polytope: repeatedly assign `min(row remainder, column remainder)` to the
/// largest remaining entry (ties: lowest row, then lowest column). Each step
/// saturates a row or a column, so the support is a forest with at most
/// `n + m - 1` nonzeros.
pub fn round_to_vertex(p: &TransportPlan) -> Result<TransportPlan> {
    let (n, m) = (p.rows(), p.cols());
    let mut rem_row = p.row_marginal().weights().to_vec();
    let mut rem_col = p.col_marginal().weights().to_vec();
    let mut out = vec![0.0; n * m];

    for _ in 0..n + m {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, &rr) in rem_row.iter().enumerate() {
            if rr <= 0.0 {
                continue;
            }
            for (j, &rc) in rem_col.iter().enumerate() {
                if rc <= 0.0 {
                    continue;
                }
                let v = p.value(i, j);
                if best.is_none_or(|(_, _, bv)| v > bv) {
                    best = Some((i, j, v));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        let w = rem_row[i].min(rem_col[j]);
        out[i * m + j] += w;
        if rem_row[i] <= rem_col[j] {
            rem_col[j] -= w;
            rem_row[i] = 0.0;
            if rem_col[j] <= 0.0 {
                rem_col[j] = 0.0;
            }
        } else {
            rem_row[i] -= w;
            rem_col[j] = 0.0;
        }
    }

    TransportPlan::new(
        n,
        m,
        out,
        p.row_marginal().clone(),
        p.col_marginal().clone(),
        p.feasibility_tol().max(DEFAULT_FEASIBILITY_TOL),
    )
}

/// Adds i.i.d. uniform `[0, epsilon]` noise to every entry, drawn row-major
/// from a seeded [`SplitMix64`] stream. Bit-reproducible for a fixed seed.
pub fn perturb_costs(c: &CostMatrix, epsilon: f64, seed: u64) -> Result<CostMatrix> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "perturbation magnitude must be positive, got {epsilon}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let values: Vec<f64> = c.values().iter().map(|&v| v + epsilon * rng.next_f64()).collect();
    CostMatrix::new(c.rows(), c.cols(), values)
}

/// Outcome of [`verify_theorem1`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    /// `<C, P_eps*> - <C, P*>` on mass-`1/N` permutation plans; always in
    /// `[0, epsilon]`.
    pub gap: f64,
    /// Whether the perturbed optimum beats every other permutation by more
    /// than 1e-12.
    pub unique: bool,
    pub is_permutation: bool,
}

/// Checks the perturbation guarantee on one instance: solve the original
/// and the `[0, epsilon]`-perturbed assignment exactly, and report the
/// suboptimality (under the original costs) of the perturbed optimum.
pub fn verify_theorem1(c: &CostMatrix, epsilon: f64, seed: u64) -> Result<Theorem1Report> {
    let (_, best, _) = assignment_best_two(c)?;
    let perturbed = perturb_costs(c, epsilon, seed)?;
    let (sigma_eps, best_eps, second_eps) = assignment_best_two(&perturbed)?;
    let n = c.rows() as f64;
    let gap = (sigma_eps.assignment_cost(c)? - best) / n;
    debug_assert!(gap >= -1e-12 && gap <= epsilon + 1e-12);
    Ok(Theorem1Report {
        gap,
        unique: second_eps - best_eps > 1e-12,
        is_permutation: true,
    })
}

/// Outcome of [`check_sparsity_bound`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    pub active_count: usize,
    /// The extreme-point bound `n + m - 1`.
    pub bound: usize,
    pub passes: bool,
}

/// Counts entries above `lambda` and compares against the extreme-point
/// support bound `n + m - 1`.
pub fn check_sparsity_bound(p: &TransportPlan, lambda: f64) -> SparsityReport {
    let active_count = p.values().iter().filter(|&&v| v > lambda).count();
    let bound = p.rows() + p.cols() - 1;
    SparsityReport {
        active_count,
        bound,
        passes: active_count <= bound,
    }
}
