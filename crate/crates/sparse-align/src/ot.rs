//! Core transport types: marginals, cost matrices, transport plans, and the
//! solver configuration, plus the bilinear cost and entropy functionals.
//!
//! Matrices are dense and row-major. Plans keep the marginals they were
//! solved (or realized) against, together with the feasibility tolerance
//! they are guaranteed to satisfy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default marginal feasibility tolerance carried by transport plans.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-6;

/// Tolerance on the total mass of probability marginals.
pub const SIMPLEX_TOL: f64 = 1e-9;

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    for (idx, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{what}[{idx}] = {v}")));
        }
    }
    Ok(())
}

/// Nonnegative mass over a point set.
///
/// Solver inputs must be probability weights (see [`Marginals::simplex`]);
/// realized marginals of a partial alignment may carry less total mass and
/// are built with [`Marginals::masses`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Marginals {
    weights: Vec<f64>,
}

impl From<Marginals> for Vec<f64> {
    fn from(m: Marginals) -> Vec<f64> {
        m.weights
    }
}

impl TryFrom<Vec<f64>> for Marginals {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Marginals::masses(weights)
    }
}

impl Marginals {
    /// Probability weights: nonnegative, finite, summing to 1 within 1e-9.
    pub fn simplex(weights: Vec<f64>) -> Result<Self> {
        let m = Self::masses(weights)?;
        let total: f64 = m.weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!(
                "marginal weights must sum to 1 (got {total})"
            )));
        }
        Ok(m)
    }

    /// Nonnegative mass vector without the sum-to-one requirement, for the
    /// realized marginals of partial alignments.
    pub fn masses(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("marginals must be non-empty".into()));
        }
        check_finite(&weights, "marginals")?;
        if let Some(w) = weights.iter().find(|w| **w < 0.0) {
            return Err(Error::InvalidInput(format!(
                "marginal weights must be nonnegative (got {w})"
            )));
        }
        Ok(Marginals { weights })
    }

    /// Uniform probability weights `1/n`.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform marginals need at least one point");
        Marginals {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Checks the sum-to-one requirement demanded of solver inputs.
    pub fn require_simplex(&self) -> Result<()> {
        let total = self.total();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!(
                "expected probability marginals summing to 1, got {total}"
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct DenseRaw {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

/// Pairwise cost matrix between two point sets, `n` rows by `m` columns,
/// stored row-major. Entries must be finite; negative costs are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseRaw")]
pub struct CostMatrix {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl TryFrom<DenseRaw> for CostMatrix {
    type Error = Error;

    fn try_from(raw: DenseRaw) -> Result<Self> {
        CostMatrix::new(raw.n, raw.m, raw.values)
    }
}

impl CostMatrix {
    pub fn new(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput(
                "cost matrix must have at least one row and one column".into(),
            ));
        }
        if values.len() != n * m {
            return Err(Error::ShapeMismatch(format!(
                "cost matrix {n}x{m} expects {} values, got {}",
                n * m,
                values.len()
            )));
        }
        check_finite(&values, "cost")?;
        Ok(CostMatrix { n, m, values })
    }

    /// Builds from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("cost matrix must have rows".into()));
        }
        let m = rows[0].len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::ShapeMismatch("ragged cost rows".into()));
        }
        CostMatrix::new(rows.len(), m, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.n {
            for j in 0..self.m {
                values[j * self.n + i] = self.value(i, j);
            }
        }
        CostMatrix {
            n: self.m,
            m: self.n,
            values,
        }
    }

    /// Entrywise transform; the result must still be finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<CostMatrix> {
        CostMatrix::new(self.n, self.m, self.values.iter().map(|&v| f(v)).collect())
    }
}

#[derive(Deserialize)]
struct PlanRaw {
    n: usize,
    m: usize,
    values: Vec<f64>,
    row_marginal: Marginals,
    col_marginal: Marginals,
}

/// Transport plan: nonnegative `n x m` coupling whose row/column sums match
/// its recorded marginals within `feasibility_tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanRaw")]
pub struct TransportPlan {
    n: usize,
    m: usize,
    values: Vec<f64>,
    row_marginal: Marginals,
    col_marginal: Marginals,
    #[serde(skip)]
    feasibility_tol: f64,
}

impl TryFrom<PlanRaw> for TransportPlan {
    type Error = Error;

    fn try_from(raw: PlanRaw) -> Result<Self> {
        if raw.values.len() != raw.n * raw.m {
            return Err(Error::ShapeMismatch(format!(
                "plan {}x{} expects {} values, got {}",
                raw.n,
                raw.m,
                raw.n * raw.m,
                raw.values.len()
            )));
        }
        TransportPlan::new(
            raw.n,
            raw.m,
            raw.values,
            raw.row_marginal,
            raw.col_marginal,
            DEFAULT_FEASIBILITY_TOL,
        )
    }
}

impl TransportPlan {
    /// Validating constructor: entries nonnegative and finite, marginal
    /// lengths match, and row/column sums agree with the recorded marginals
    /// within `feasibility_tol`.
    pub fn new(
        n: usize,
        m: usize,
        values: Vec<f64>,
        row_marginal: Marginals,
        col_marginal: Marginals,
        feasibility_tol: f64,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput(
                "transport plan must have at least one row and one column".into(),
            ));
        }
        if values.len() != n * m {
            return Err(Error::ShapeMismatch(format!(
                "plan {n}x{m} expects {} values, got {}",
                n * m,
                values.len()
            )));
        }
        if row_marginal.len() != n || col_marginal.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "marginal lengths ({}, {}) do not match plan {n}x{m}",
                row_marginal.len(),
                col_marginal.len()
            )));
        }
        if !(feasibility_tol.is_finite() && feasibility_tol >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "feasibility tolerance must be finite and nonnegative, got {feasibility_tol}"
            )));
        }
        check_finite(&values, "plan")?;
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "plan entries must be nonnegative (got {v})"
            )));
        }
        let plan = TransportPlan {
            n,
            m,
            values,
            row_marginal,
            col_marginal,
            feasibility_tol,
        };
        let (row_violation, col_violation) = plan.marginal_violations();
        let worst = row_violation.max(col_violation);
        if worst > feasibility_tol {
            return Err(Error::InvalidInput(format!(
                "plan violates its marginals by {worst:.3e} (tolerance {feasibility_tol:.3e})"
            )));
        }
        Ok(plan)
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn row_marginal(&self) -> &Marginals {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &Marginals {
        &self.col_marginal
    }

    pub fn feasibility_tol(&self) -> f64 {
        self.feasibility_tol
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.m];
        for i in 0..self.n {
            for (j, s) in sums.iter_mut().enumerate() {
                *s += self.value(i, j);
            }
        }
        sums
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Worst absolute deviation of (row sums, column sums) from the
    /// recorded marginals.
    pub fn marginal_violations(&self) -> (f64, f64) {
        let row = self
            .row_sums()
            .iter()
            .zip(self.row_marginal.weights())
            .map(|(s, a)| (s - a).abs())
            .fold(0.0, f64::max);
        let col = self
            .col_sums()
            .iter()
            .zip(self.col_marginal.weights())
            .map(|(s, b)| (s - b).abs())
            .fold(0.0, f64::max);
        (row, col)
    }

    /// `(i, j, mass)` triples in row-major order, zeros included.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let m = self.m;
        self.values
            .iter()
            .enumerate()
            .map(move |(idx, &v)| (idx / m, idx % m, v))
    }

    pub fn transpose(&self) -> TransportPlan {
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.n {
            for j in 0..self.m {
                values[j * self.n + i] = self.value(i, j);
            }
        }
        TransportPlan {
            n: self.m,
            m: self.n,
            values,
            row_marginal: self.col_marginal.clone(),
            col_marginal: self.row_marginal.clone(),
            feasibility_tol: self.feasibility_tol,
        }
    }
}

/// Sinkhorn solver configuration.
///
/// `epsilon_start` is annealed down to `epsilon_final` by repeated
/// multiplication with `scaling_factor`; each stage runs at most
/// `max_iterations_per_epsilon` iterations and declares convergence when the
/// worst marginal violation drops below `convergence_tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub epsilon_final: f64,
    pub epsilon_start: f64,
    pub scaling_factor: f64,
    #[serde(rename = "max_iter")]
    pub max_iterations_per_epsilon: usize,
    #[serde(rename = "tol")]
    pub convergence_tol: f64,
    pub log_domain: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon_final: 1e-4,
            epsilon_start: 1.0,
            scaling_factor: 0.5,
            max_iterations_per_epsilon: 500,
            convergence_tol: 1e-6,
            log_domain: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_final.is_finite() && self.epsilon_final > 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon_final must be positive, got {}",
                self.epsilon_final
            )));
        }
        if !(self.epsilon_start.is_finite() && self.epsilon_start >= self.epsilon_final) {
            return Err(Error::InvalidInput(format!(
                "epsilon_start ({}) must be >= epsilon_final ({})",
                self.epsilon_start, self.epsilon_final
            )));
        }
        if !(self.scaling_factor > 0.0 && self.scaling_factor < 1.0) {
            return Err(Error::InvalidInput(format!(
                "scaling_factor must lie in (0, 1), got {}",
                self.scaling_factor
            )));
        }
        if self.max_iterations_per_epsilon == 0 {
            return Err(Error::InvalidInput(
                "max_iterations_per_epsilon must be positive".into(),
            ));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "convergence_tol must be positive, got {}",
                self.convergence_tol
            )));
        }
        Ok(())
    }
}

/// Outcome of [`validate_plan`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanValidation {
    pub max_row_violation: f64,
    pub max_col_violation: f64,
    pub min_entry: f64,
    pub passes: bool,
}

/// Checks a plan against explicit marginals: row/column sums within `tol`
/// and entries no more negative than `-tol`.
pub fn validate_plan(
    p: &TransportPlan,
    a: &Marginals,
    b: &Marginals,
    tol: f64,
) -> Result<PlanValidation> {
    if a.len() != p.rows() || b.len() != p.cols() {
        return Err(Error::ShapeMismatch(format!(
            "marginals ({}, {}) do not match plan {}x{}",
            a.len(),
            b.len(),
            p.rows(),
            p.cols()
        )));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    let max_row_violation = p
        .row_sums()
        .iter()
        .zip(a.weights())
        .map(|(s, a)| (s - a).abs())
        .fold(0.0, f64::max);
    let max_col_violation = p
        .col_sums()
        .iter()
        .zip(b.weights())
        .map(|(s, b)| (s - b).abs())
        .fold(0.0, f64::max);
    let min_entry = p.values().iter().copied().fold(f64::INFINITY, f64::min);
    let passes = max_row_violation <= tol && max_col_violation <= tol && min_entry >= -tol;
    Ok(PlanValidation {
        max_row_violation,
        max_col_violation,
        min_entry,
        passes,
    })
}

/// Bilinear transport cost `<C, P> = sum_ij C_ij P_ij`.
pub fn transport_cost(c: &CostMatrix, p: &TransportPlan) -> Result<f64> {
    if c.rows() != p.rows() || c.cols() != p.cols() {
        return Err(Error::ShapeMismatch(format!(
            "cost {}x{} vs plan {}x{}",
            c.rows(),
            c.cols(),
            p.rows(),
            p.cols()
        )));
    }
    Ok(c.values()
        .iter()
        .zip(p.values())
        .map(|(c, p)| c * p)
        .sum())
}

/// Entropy `H(P) = -sum_ij P_ij (log P_ij - 1)`, with `0 log 0 = 0`.
pub fn entropy(p: &TransportPlan) -> f64 {
    -p.values()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * (v.ln() - 1.0))
        .sum::<f64>()
}
