//! Entropy-regularized transport: Sinkhorn iterations with an epsilon
//! annealing schedule and log-domain stabilization.
//!
//! The solution of the regularized problem has the form
//! `P = diag(u) K diag(v)` with `K = exp(-C/eps)`. The linear-domain
//! iteration alternates `u <- a ./ (K v)` and `v <- b ./ (K' u)`; the
//! log-domain iteration updates the potentials `f = eps ln u`,
//! `g = eps ln v` through log-sum-exps, which stays finite for any
//! epsilon. Both modes are deterministic: identical inputs produce
//! bitwise-identical outputs.

use crate::error::{Error, Result};
use crate::ot::{CostMatrix, Marginals, SolverConfig, TransportPlan, DEFAULT_FEASIBILITY_TOL};

/// Iterations between convergence checks.
const CHECK_EVERY: usize = 10;

/// Solver scalings and bookkeeping returned alongside the plan.
///
/// `f`/`g` are the dual potentials and are always finite wherever the
/// corresponding marginal is positive. `u = exp(f/eps)` and
/// `v = exp(g/eps)` are the linear-domain scalings; at very small epsilon
/// they can saturate to 0 or infinity, so prefer the potentials for any
/// further arithmetic.
#[derive(Debug, Clone)]
pub struct SinkhornState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub epsilon_current: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Max over `x` mapped; empty input gives negative infinity.
fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn plan_values_log(c: &CostMatrix, f: &[f64], g: &[f64], eps: f64) -> Vec<f64> {
    let (n, m) = (c.rows(), c.cols());
    let mut values = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            values[i * m + j] = ((f[i] + g[j] - c.value(i, j)) / eps).exp();
        }
    }
    values
}

fn max_marginal_violation(values: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut worst = 0.0f64;
    for i in 0..n {
        let sum: f64 = values[i * m..(i + 1) * m].iter().sum();
        worst = worst.max((sum - a[i]).abs());
    }
    for j in 0..m {
        let sum: f64 = (0..n).map(|i| values[i * m + j]).sum();
        worst = worst.max((sum - b[j]).abs());
    }
    worst
}

/// One annealing stage at fixed epsilon, starting from the given
/// potentials. Returns (plan values, violation, iterations, converged).
fn run_stage(
    c: &CostMatrix,
    a: &[f64],
    b: &[f64],
    f: &mut [f64],
    g: &mut [f64],
    eps: f64,
    cfg: &SolverConfig,
) -> (Vec<f64>, f64, usize, bool) {
    let (n, m) = (c.rows(), c.cols());

    if cfg.log_domain {
        let ln_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
        let ln_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
        let mut buf = vec![0.0; n.max(m)];
        for it in 1..=cfg.max_iterations_per_epsilon {
            for i in 0..n {
                for j in 0..m {
                    buf[j] = (g[j] - c.value(i, j)) / eps;
                }
                f[i] = eps * ln_a[i] - eps * log_sum_exp(&buf[..m]);
            }
            for j in 0..m {
                for i in 0..n {
                    buf[i] = (f[i] - c.value(i, j)) / eps;
                }
                g[j] = eps * ln_b[j] - eps * log_sum_exp(&buf[..n]);
            }
            if it % CHECK_EVERY == 0 || it == cfg.max_iterations_per_epsilon {
                let values = plan_values_log(c, f, g, eps);
                let violation = max_marginal_violation(&values, a, b);
                if violation < cfg.convergence_tol {
                    return (values, violation, it, true);
                }
                if it == cfg.max_iterations_per_epsilon {
                    return (values, violation, it, false);
                }
            }
        }
        unreachable!("loop exits through the final check");
    }

    // Linear domain: materialize K and iterate on u, v directly. Underflows
    // for small eps on costs of order one; kept for the large-eps regime.
    let k: Vec<f64> = c.values().iter().map(|&v| (-v / eps).exp()).collect();
    let mut u: Vec<f64> = f.iter().map(|x| (x / eps).exp()).collect();
    let mut v: Vec<f64> = g.iter().map(|x| (x / eps).exp()).collect();
    let plan = |u: &[f64], v: &[f64]| -> Vec<f64> {
        let mut values = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                values[i * m + j] = u[i] * k[i * m + j] * v[j];
            }
        }
        values
    };
    for it in 1..=cfg.max_iterations_per_epsilon {
        for i in 0..n {
            let kv: f64 = (0..m).map(|j| k[i * m + j] * v[j]).sum();
            u[i] = a[i] / kv;
        }
        for j in 0..m {
            let ktu: f64 = (0..n).map(|i| k[i * m + j] * u[i]).sum();
            v[j] = b[j] / ktu;
        }
        if it % CHECK_EVERY == 0 || it == cfg.max_iterations_per_epsilon {
            let values = plan(&u, &v);
            let violation = max_marginal_violation(&values, a, b);
            let done = violation < cfg.convergence_tol;
            if done || it == cfg.max_iterations_per_epsilon {
                for i in 0..n {
                    f[i] = eps * u[i].ln();
                }
                for j in 0..m {
                    g[j] = eps * v[j].ln();
                }
                return (values, violation, it, done);
            }
        }
    }
    unreachable!("loop exits through the final check");
}

fn run_schedule(
    c: &CostMatrix,
    a: &Marginals,
    b: &Marginals,
    cfg: &SolverConfig,
    schedule: &[f64],
) -> Result<(TransportPlan, SinkhornState)> {
    cfg.validate()?;
    if c.rows() != a.len() || c.cols() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "cost is {}x{} but marginals have lengths {} and {}",
            c.rows(),
            c.cols(),
            a.len(),
            b.len()
        )));
    }
    a.require_simplex()?;
    b.require_simplex()?;

    let (n, m) = (c.rows(), c.cols());
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut iterations_total = 0;
    let mut last: Option<(Vec<f64>, f64, bool)> = None;

    for &eps in schedule {
        let (values, violation, iters, converged) =
            run_stage(c, a.weights(), b.weights(), &mut f, &mut g, eps, cfg);
        iterations_total += iters;
        last = Some((values, violation, converged));
    }
    let (values, violation, converged) = last.expect("schedule is never empty");
    let eps_final = *schedule.last().expect("schedule is never empty");

    // Record the feasibility actually achieved so construction succeeds
    // even when the budget ran out short of the target tolerance.
    let tol = if violation < DEFAULT_FEASIBILITY_TOL {
        DEFAULT_FEASIBILITY_TOL
    } else {
        violation * (1.0 + 1e-9) + 1e-15
    };
    let plan = TransportPlan::new(n, m, values, a.clone(), b.clone(), tol)?;
    let state = SinkhornState {
        u: f.iter().map(|x| (x / eps_final).exp()).collect(),
        v: g.iter().map(|x| (x / eps_final).exp()).collect(),
        f,
        g,
        epsilon_current: eps_final,
        iterations_used: iterations_total,
        converged,
    };
    Ok((plan, state))
}

/// Sinkhorn iterations at the single temperature `cfg.epsilon_final`.
///
/// Runs until the max marginal violation drops below
/// `cfg.convergence_tol` (checked every 10 iterations) or the per-epsilon
/// budget is spent; a non-converged plan is still returned with
/// `converged = false` and its achieved feasibility recorded on the plan.
pub fn sinkhorn_solve(
    c: &CostMatrix,
    a: &Marginals,
    b: &Marginals,
    cfg: &SolverConfig,
) -> Result<(TransportPlan, SinkhornState)> {
    run_schedule(c, a, b, cfg, &[cfg.epsilon_final])
}

/// Epsilon-scaled Sinkhorn: anneal from `cfg.epsilon_start` down by
/// `cfg.scaling_factor` per stage, clamping the last stage to exactly
/// `cfg.epsilon_final`, warm-starting the potentials between stages.
///
/// With `epsilon_start == epsilon_final` the schedule degenerates to a
/// single cold-started stage, which is bitwise-identical to
/// [`sinkhorn_solve`].
pub fn sinkhorn_epsilon_scaled(
    c: &CostMatrix,
    a: &Marginals,
    b: &Marginals,
    cfg: &SolverConfig,
) -> Result<(TransportPlan, SinkhornState)> {
    cfg.validate()?;
    let mut schedule = Vec::new();
    let mut eps = cfg.epsilon_start;
    loop {
        if eps <= cfg.epsilon_final {
            schedule.push(cfg.epsilon_final);
            break;
        }
        schedule.push(eps);
        eps *= cfg.scaling_factor;
    }
    run_schedule(c, a, b, cfg, &schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{brute_force_assignment, random_uniform_cost, SplitMix64};
    use crate::ot::transport_cost;

    fn uniform_pair(n: usize, m: usize) -> (Marginals, Marginals) {
        (Marginals::uniform(n), Marginals::uniform(m))
    }

    #[test]
    fn single_cell_problem_is_forced() {
        let c = CostMatrix::new(1, 1, vec![3.0]).unwrap();
        let (a, b) = uniform_pair(1, 1);
        for eps in [1.0, 0.1, 1e-4] {
            let cfg = SolverConfig {
                epsilon_final: eps,
                epsilon_start: eps,
                ..SolverConfig::default()
            };
            let (plan, state) = sinkhorn_solve(&c, &a, &b, &cfg).unwrap();
            assert!((plan.value(0, 0) - 1.0).abs() < 1e-12);
            assert!(state.converged);
        }
    }

    #[test]
    fn constant_costs_converge_to_outer_product() {
        let c = CostMatrix::new(3, 3, vec![0.7; 9]).unwrap();
        let (a, b) = uniform_pair(3, 3);
        let (plan, state) = sinkhorn_solve(&c, &a, &b, &SolverConfig::default()).unwrap();
        for &v in plan.values() {
            assert!((v - 1.0 / 9.0).abs() < 1e-12);
        }
        assert!(state.converged);
    }

    #[test]
    fn scaled_solver_sharpens_to_the_permutation() {
        let c = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (a, b) = uniform_pair(2, 2);
        let (plan, state) = sinkhorn_epsilon_scaled(&c, &a, &b, &SolverConfig::default()).unwrap();
        assert!(state.converged);
        assert!((plan.value(0, 0) - 0.5).abs() < 1e-3);
        assert!((plan.value(1, 1) - 0.5).abs() < 1e-3);
        assert!(plan.value(0, 1) < 1e-3);
        assert!(plan.value(1, 0) < 1e-3);
        let cost = transport_cost(&c, &plan).unwrap();
        assert!(cost.abs() < 1e-3);
    }

    #[test]
    fn degenerate_schedule_equals_plain_solve_bitwise() {
        let mut rng = SplitMix64::new(11);
        let c = random_uniform_cost(4, 5, 0.0, 1.0, &mut rng);
        let (a, b) = uniform_pair(4, 5);
        let cfg = SolverConfig {
            epsilon_final: 0.05,
            epsilon_start: 0.05,
            ..SolverConfig::default()
        };
        let (plan_scaled, state_scaled) = sinkhorn_epsilon_scaled(&c, &a, &b, &cfg).unwrap();
        let (plan_plain, state_plain) = sinkhorn_solve(&c, &a, &b, &cfg).unwrap();
        assert_eq!(plan_scaled.values(), plan_plain.values());
        assert_eq!(state_scaled.f, state_plain.f);
        assert_eq!(state_scaled.g, state_plain.g);
        assert_eq!(state_scaled.iterations_used, state_plain.iterations_used);
    }

    #[test]
    fn repeated_runs_are_bitwise_identical() {
        let mut rng = SplitMix64::new(5);
        let c = random_uniform_cost(5, 5, 0.0, 1.0, &mut rng);
        let (a, b) = uniform_pair(5, 5);
        let cfg = SolverConfig::default();
        let (p1, s1) = sinkhorn_epsilon_scaled(&c, &a, &b, &cfg).unwrap();
        let (p2, s2) = sinkhorn_epsilon_scaled(&c, &a, &b, &cfg).unwrap();
        assert_eq!(p1.values(), p2.values());
        assert_eq!(s1.iterations_used, s2.iterations_used);
        assert_eq!(s1.f, s2.f);
    }

    #[test]
    fn converged_plans_meet_the_marginal_tolerance() {
        let mut rng = SplitMix64::new(17);
        let c = random_uniform_cost(6, 4, 0.0, 1.0, &mut rng);
        let (a, b) = uniform_pair(6, 4);
        let (plan, state) = sinkhorn_epsilon_scaled(&c, &a, &b, &SolverConfig::default()).unwrap();
        assert!(state.converged);
        let (rv, cv) = plan.marginal_violations();
        assert!(rv < 1e-6 && cv < 1e-6, "violations {rv} {cv}");
    }

    #[test]
    fn budget_exhaustion_returns_unconverged_plan() {
        let mut rng = SplitMix64::new(23);
        let c = random_uniform_cost(5, 5, 0.0, 1.0, &mut rng);
        let (a, b) = uniform_pair(5, 5);
        let cfg = SolverConfig {
            convergence_tol: 1e-18,
            max_iterations_per_epsilon: 20,
            ..SolverConfig::default()
        };
        let (plan, state) = sinkhorn_epsilon_scaled(&c, &a, &b, &cfg).unwrap();
        assert!(!state.converged);
        assert!(plan.feasibility_tol() >= 1e-6);
    }

    #[test]
    fn small_epsilon_matches_assignment_oracle() {
        let mut rng = SplitMix64::new(404);
        for _ in 0..5 {
            let n = 2 + rng.next_below(5);
            let c = random_uniform_cost(n, n, 0.0, 1.0, &mut rng);
            let (a, b) = uniform_pair(n, n);
            let (plan, state) =
                sinkhorn_epsilon_scaled(&c, &a, &b, &SolverConfig::default()).unwrap();
            assert!(state.converged);
            let cost = transport_cost(&c, &plan).unwrap();
            let (_, oracle) = brute_force_assignment(&c).unwrap();
            assert!(
                (cost - oracle / n as f64).abs() <= 1e-3,
                "n={n} cost={cost} oracle={}",
                oracle / n as f64
            );
        }
    }

    #[test]
    fn entropic_bias_shrinks_with_epsilon() {
        let mut rng = SplitMix64::new(909);
        for _ in 0..5 {
            let c = random_uniform_cost(4, 4, 0.0, 1.0, &mut rng);
            let (a, b) = uniform_pair(4, 4);
            let coarse = SolverConfig {
                epsilon_final: 1e-2,
                ..SolverConfig::default()
            };
            let fine = SolverConfig::default();
            let (p_coarse, _) = sinkhorn_epsilon_scaled(&c, &a, &b, &coarse).unwrap();
            let (p_fine, _) = sinkhorn_epsilon_scaled(&c, &a, &b, &fine).unwrap();
            let cost_coarse = transport_cost(&c, &p_coarse).unwrap();
            let cost_fine = transport_cost(&c, &p_fine).unwrap();
            assert!(cost_coarse >= cost_fine - 1e-9);
        }
    }

    #[test]
    fn linear_and_log_domains_agree_at_moderate_epsilon() {
        let mut rng = SplitMix64::new(31);
        let c = random_uniform_cost(3, 4, 0.0, 1.0, &mut rng);
        let (a, b) = uniform_pair(3, 4);
        let base = SolverConfig {
            epsilon_final: 0.1,
            epsilon_start: 1.0,
            ..SolverConfig::default()
        };
        let linear = SolverConfig {
            log_domain: false,
            ..base.clone()
        };
        let (p_log, _) = sinkhorn_epsilon_scaled(&c, &a, &b, &base).unwrap();
        let (p_lin, _) = sinkhorn_epsilon_scaled(&c, &a, &b, &linear).unwrap();
        // Same fixed point, different arithmetic paths; agreement is
        // limited by the convergence tolerance, not machine precision.
        for (x, y) in p_log.values().iter().zip(p_lin.values()) {
            assert!((x - y).abs() < 1e-6, "log {x} vs linear {y}");
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let c = CostMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        let (a, b) = uniform_pair(3, 2);
        assert!(matches!(
            sinkhorn_solve(&c, &a, &b, &SolverConfig::default()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let c = CostMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        let (a, b) = uniform_pair(2, 2);
        let cfg = SolverConfig {
            epsilon_final: 0.0,
            ..SolverConfig::default()
        };
        assert!(sinkhorn_solve(&c, &a, &b, &cfg).is_err());
    }
}
