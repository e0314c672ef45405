//! `verify`: seeded randomized suite for the solver's structural claims —
//! extreme-point sparsity, permutation recovery on square uniform
//! instances, the perturbation gap bound, and Birkhoff reconstruction.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sparse_align::exact::{
    birkhoff_decompose, brute_force_assignment, check_sparsity_bound, random_uniform_cost,
    round_to_vertex, verify_theorem1, Permutation, SplitMix64,
};
use sparse_align::ot::{
    transport_cost, Marginals, SolverConfig, TransportPlan, DEFAULT_FEASIBILITY_TOL,
};
use sparse_align::sinkhorn::sinkhorn_epsilon_scaled;

use crate::error::{CliError, Result};
use crate::write_json;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Trials per check.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path for the JSON report (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub trials: usize,
    pub passes: usize,
    /// Worst violation distance observed; 0 when every trial was clean.
    pub worst_gap: f64,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<CheckReport>,
    pub all_passed: bool,
}

fn random_size(rng: &mut SplitMix64) -> usize {
    2 + rng.next_below(5) // 2..=6
}

fn random_permutation(n: usize, rng: &mut SplitMix64) -> Permutation {
    let mut mapping: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        mapping.swap(i, rng.next_below(i + 1));
    }
    Permutation::new(mapping).expect("shuffled identity is a bijection")
}

/// Rounded rectangular plans stay within the extreme-point support bound.
fn check_prop1(trials: usize, seed: u64, cfg: &SolverConfig) -> Result<CheckReport> {
    let mut rng = SplitMix64::new(seed ^ 0xA001);
    let mut passes = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = random_size(&mut rng);
        let m = random_size(&mut rng);
        let c = random_uniform_cost(n, m, 0.0, 1.0, &mut rng);
        let (plan, _) = sinkhorn_epsilon_scaled(
            &c,
            &Marginals::uniform(n),
            &Marginals::uniform(m),
            cfg,
        )?;
        let vertex = round_to_vertex(&plan)?;
        let lambda = 0.01 / (n as f64 * m as f64);
        let report = check_sparsity_bound(&vertex, lambda);
        if report.passes {
            passes += 1;
        }
        worst = worst.max(report.active_count as f64 - report.bound as f64);
    }
    Ok(CheckReport {
        name: "prop1_sparsity",
        trials,
        passes,
        worst_gap: worst.max(0.0),
    })
}

/// Square uniform instances round to permutation matrices whose cost
/// matches the assignment oracle.
fn check_prop2(trials: usize, seed: u64, cfg: &SolverConfig) -> Result<CheckReport> {
    let mut rng = SplitMix64::new(seed ^ 0xA002);
    let mut passes = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = random_size(&mut rng);
        let c = random_uniform_cost(n, n, 0.0, 1.0, &mut rng);
        let a = Marginals::uniform(n);
        let (plan, _) = sinkhorn_epsilon_scaled(&c, &a, &a, cfg)?;
        let vertex = round_to_vertex(&plan)?;

        let cell = 1.0 / n as f64;
        let is_permutation = vertex
            .values()
            .iter()
            .all(|&v| v.abs() <= 1e-9 || (v - cell).abs() <= 1e-9)
            && vertex.values().iter().filter(|&&v| v > 1e-9).count() == n;
        let cost = transport_cost(&c, &vertex)?;
        let (_, oracle) = brute_force_assignment(&c)?;
        let gap = (cost - oracle / n as f64).abs();
        if is_permutation && gap <= 1e-3 {
            passes += 1;
        }
        worst = worst.max(gap);
    }
    Ok(CheckReport {
        name: "prop2_permutation",
        trials,
        passes,
        worst_gap: worst,
    })
}

/// Perturbation gap lies in [0, eps]; epsilon alternates between 1e-2 and
/// 1e-3. Returns the gap check and the uniqueness tally.
fn check_theorem1(trials: usize, seed: u64) -> Result<(CheckReport, CheckReport)> {
    let mut rng = SplitMix64::new(seed ^ 0xA003);
    let mut gap_passes = 0;
    let mut unique_passes = 0;
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let n = random_size(&mut rng);
        let c = random_uniform_cost(n, n, 0.0, 1.0, &mut rng);
        let eps = if t % 2 == 0 { 1e-2 } else { 1e-3 };
        let report = verify_theorem1(&c, eps, rng.next_u64())?;
        let violation = (report.gap - eps).max(-report.gap).max(0.0);
        if violation == 0.0 {
            gap_passes += 1;
        }
        if report.unique {
            unique_passes += 1;
        }
        worst = worst.max(violation);
    }
    Ok((
        CheckReport {
            name: "theorem1_gap",
            trials,
            passes: gap_passes,
            worst_gap: worst,
        },
        CheckReport {
            name: "theorem1_uniqueness",
            trials,
            passes: unique_passes,
            worst_gap: (trials - unique_passes) as f64,
        },
    ))
}

/// Convex combinations of known permutations decompose back to weights
/// summing to 1 and reconstruct within 1e-8.
fn check_birkhoff(trials: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = SplitMix64::new(seed ^ 0xA004);
    let mut passes = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = random_size(&mut rng);
        let terms = 1 + rng.next_below(4);
        let perms: Vec<Permutation> = (0..terms).map(|_| random_permutation(n, &mut rng)).collect();
        let mut weights: Vec<f64> = (0..terms).map(|_| 0.1 + rng.next_f64()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }

        let mut values = vec![0.0; n * n];
        for (perm, w) in perms.iter().zip(&weights) {
            for (v, pv) in values.iter_mut().zip(perm.to_plan().values()) {
                *v += w * pv;
            }
        }
        let plan = TransportPlan::new(
            n,
            n,
            values.clone(),
            Marginals::uniform(n),
            Marginals::uniform(n),
            DEFAULT_FEASIBILITY_TOL,
        )?;

        let d = birkhoff_decompose(&plan, 1e-9)?;
        let rebuilt = d.reconstruct(n);
        let err = rebuilt
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let weight_err = (d.weight_sum() - 1.0).abs();
        if err <= 1e-8 && weight_err <= 1e-8 {
            passes += 1;
        }
        worst = worst.max(err).max(weight_err);
    }
    Ok(CheckReport {
        name: "birkhoff_reconstruction",
        trials,
        passes,
        worst_gap: worst,
    })
}

pub fn run(args: &VerifyArgs) -> Result<()> {
    if args.trials == 0 {
        return Err(CliError::input("verify needs at least one trial"));
    }
    let cfg = SolverConfig::default();
    let (thm_gap, thm_unique) = check_theorem1(args.trials, args.seed)?;
    let checks = vec![
        check_prop1(args.trials, args.seed, &cfg)?,
        check_prop2(args.trials, args.seed, &cfg)?,
        thm_gap,
        thm_unique,
        check_birkhoff(args.trials, args.seed)?,
    ];

    // Uniqueness is a probability-1 property; machine-precision ties are
    // tolerated at rate 1e-3. Every other check must be clean.
    let all_passed = checks.iter().all(|c| {
        if c.name == "theorem1_uniqueness" {
            c.passes + c.trials / 1000 >= c.trials
        } else {
            c.passes == c.trials
        }
    });

    let report = VerifyReport {
        seed: args.seed,
        trials: args.trials,
        checks,
        all_passed,
    };
    write_json(&report, args.out.as_deref())?;
    if !all_passed {
        let failing: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.passes < c.trials)
            .map(|c| c.name)
            .collect();
        return Err(CliError::Verification(format!(
            "checks with failures: {}",
            failing.join(", ")
        )));
    }
    Ok(())
}
