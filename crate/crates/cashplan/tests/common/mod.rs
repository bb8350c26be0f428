//! Shared test support: the reference instance, random instance and LP
//! generators with their documented ranges, and an exhaustive vertex
//! enumeration oracle for small LPs.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::prelude::IndexedRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use cashplan::model::{CashSystem, CostStructure, ProblemInstance, RiskParams};
use cashplan::simplex::{LinearConstraint, LpProblem, Relation};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// Expected values recorded for the reference fixture, derived once by the
/// exhaustive enumeration in `tests/pin_s4.rs`.
#[derive(Debug, Deserialize)]
pub struct ExpectedValues {
    pub cost_objective: f64,
    pub risk_objective: f64,
}

pub fn load_expected() -> ExpectedValues {
    let text = std::fs::read_to_string(fixture_path("example_s4.expected.json"))
        .expect("expected-values fixture");
    serde_json::from_str(&text).expect("expected-values fixture parses")
}

/// The three-account reference instance (two checking accounts plus one
/// investment account, transfers allowed between every pair).
pub fn s4_instance() -> ProblemInstance {
    ProblemInstance {
        system: CashSystem {
            account_labels: vec!["1".into(), "2".into(), "3".into()],
            transaction_labels: (1..=6).map(|i| i.to_string()).collect(),
            incidence: vec![
                vec![1.0, -1.0, 0.0],
                vec![-1.0, 1.0, 0.0],
                vec![0.0, 1.0, -1.0],
                vec![0.0, -1.0, 1.0],
                vec![1.0, 0.0, -1.0],
                vec![-1.0, 0.0, 1.0],
            ],
        },
        costs: CostStructure {
            fixed: vec![50.0, 50.0, 100.0, 50.0, 100.0, 50.0],
            variable: vec![0.0, 0.0, 100.0, 10.0, 100.0, 10.0],
            holding: vec![100.0, 100.0, 0.0],
        },
        min_balance: vec![2.0, 2.0, 0.0],
        initial_balance: vec![5.0, 8.0, 12.0],
        forecasts: vec![
            vec![1.0, -3.0, 0.0],
            vec![1.0, -9.0, 0.0],
            vec![6.0, 6.0, 0.0],
            vec![-1.0, -4.0, 0.0],
            vec![-1.0, 6.0, 0.0],
        ],
        horizon: 5,
    }
}

pub fn s4_truncated(horizon: usize) -> ProblemInstance {
    let mut inst = s4_instance();
    inst.forecasts.truncate(horizon);
    inst.horizon = horizon;
    inst
}

pub fn deterministic_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn grid(rng: &mut ChaCha8Rng, lo: f64, hi: f64, step: f64) -> f64 {
    let steps = ((hi - lo) / step).round() as u32;
    lo + step * rng.random_range(0..=steps) as f64
}

/// Random instance in the documented acceptance ranges:
/// - accounts m in {2,3}, transactions n in {2,3,4}, horizon in {1,2,3},
///   capped at n*horizon <= 12 so the plain oracle applies;
/// - every transaction connects a random ordered pair of distinct
///   accounts;
/// - fixed costs on a 5-grid in [5, 100], variable costs on a 0.5-grid in
///   [0, 20], holding costs on a 0.5-grid in [0, 25];
/// - minimum balances on a 0.5-grid in [0, 2], initial balances between
///   the minimum and minimum + 4 on a 0.25-grid;
/// - forecasts on a 0.25-grid in [-4, 4].
///
/// Quarter-grid money amounts keep optimal transfers comfortably above the
/// solver's dust thresholds.
pub fn random_instance(rng: &mut ChaCha8Rng) -> ProblemInstance {
    let m = *[2usize, 3].choose(rng).unwrap();
    let (n, horizon) = loop {
        let n = *[2usize, 3, 4].choose(rng).unwrap();
        let horizon = *[1usize, 2, 3].choose(rng).unwrap();
        if n * horizon <= 12 {
            break (n, horizon);
        }
    };
    let mut incidence = Vec::with_capacity(n);
    for _ in 0..n {
        let from = rng.random_range(0..m);
        let mut to = rng.random_range(0..m);
        if to == from {
            to = (to + 1) % m;
        }
        let mut row = vec![0.0; m];
        row[from] = -1.0;
        row[to] = 1.0;
        incidence.push(row);
    }
    let min_balance: Vec<f64> = (0..m).map(|_| grid(rng, 0.0, 2.0, 0.5)).collect();
    let initial_balance: Vec<f64> = min_balance
        .iter()
        .map(|&b| b + grid(rng, 0.0, 4.0, 0.25))
        .collect();
    ProblemInstance {
        system: CashSystem {
            account_labels: (0..m).map(|j| format!("a{}", j + 1)).collect(),
            transaction_labels: (0..n).map(|i| format!("t{}", i + 1)).collect(),
            incidence,
        },
        costs: CostStructure {
            fixed: (0..n).map(|_| grid(rng, 5.0, 100.0, 5.0)).collect(),
            variable: (0..n).map(|_| grid(rng, 0.0, 20.0, 0.5)).collect(),
            holding: (0..m).map(|_| grid(rng, 0.0, 25.0, 0.5)).collect(),
        },
        min_balance,
        initial_balance,
        forecasts: (0..horizon)
            .map(|_| (0..m).map(|_| grid(rng, -4.0, 4.0, 0.25)).collect())
            .collect(),
        horizon,
    }
}

/// Random risk parameters that keep the risk program feasible: budgets are
/// twice the sums achieved by the oracle's cost-optimal policy (plus one
/// risk unit so the budget stays positive).
pub fn random_risk_params(
    rng: &mut ChaCha8Rng,
    cost_optimum: f64,
    period_costs: &[f64],
) -> RiskParams {
    let mean = period_costs.iter().sum::<f64>() / period_costs.len() as f64;
    let factor = *[0.5, 0.75, 1.0, 1.25].choose(rng).unwrap();
    let cost_ref = mean * factor;
    let deviation_sum: f64 = period_costs.iter().map(|&c| (c - cost_ref).max(0.0)).sum();
    let risk_weight = *[0.0, 0.25, 0.5, 0.75, 1.0].choose(rng).unwrap();
    RiskParams {
        cost_ref,
        cost_budget: (2.0 * cost_optimum).max(1.0),
        risk_budget: 2.0 * deviation_sum + 1.0,
        cost_weight: 1.0 - risk_weight,
        risk_weight,
    }
}

/// Random bounded LP with up to 6 variables and 6 rows. All bounds are
/// finite (a box), so every feasible problem has a vertex optimum and
/// unboundedness is impossible: exactly the setting the vertex enumeration
/// oracle can certify. Coefficients on coarse grids keep the vertices well
/// separated.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let num_vars = rng.random_range(1..=6);
    let num_rows = rng.random_range(0..=6);
    let var_lower: Vec<f64> = (0..num_vars)
        .map(|_| *[0.0, 0.0, -2.0].choose(rng).unwrap())
        .collect();
    let var_upper: Vec<f64> = var_lower
        .iter()
        .map(|&l| l + grid(rng, 1.0, 8.0, 1.0))
        .collect();
    let objective: Vec<f64> = (0..num_vars).map(|_| grid(rng, -10.0, 10.0, 0.5)).collect();
    let mut constraints = Vec::with_capacity(num_rows);
    for _ in 0..num_rows {
        let coeffs: Vec<(usize, f64)> = (0..num_vars)
            .filter_map(|j| {
                let a = grid(rng, -4.0, 4.0, 0.5);
                (a != 0.0).then_some((j, a))
            })
            .collect();
        let relation = *[Relation::Le, Relation::Ge, Relation::Eq]
            .choose(rng)
            .unwrap();
        // Right-hand sides near the box midpoint image keep a healthy mix
        // of feasible and infeasible problems.
        let midpoint: f64 = coeffs
            .iter()
            .map(|&(j, a)| a * 0.5 * (var_lower[j] + var_upper[j]))
            .sum();
        let rhs = midpoint + grid(rng, -6.0, 6.0, 0.5);
        constraints.push(LinearConstraint {
            coeffs,
            relation,
            rhs,
        });
    }
    LpProblem {
        num_vars,
        objective,
        objective_offset: 0.0,
        var_lower,
        var_upper,
        constraints,
    }
}

/// Exhaustive oracle for box-bounded LPs: enumerate every choice of
/// `num_vars` active constraints (rows as equalities, or variables pinned
/// to a bound), solve the square system, keep the best feasible point.
/// Returns None when no feasible vertex exists, i.e. the LP is infeasible.
pub fn vertex_enumeration_optimum(problem: &LpProblem) -> Option<f64> {
    let n = problem.num_vars;
    // Candidate active sets: (coefficient row, rhs) per candidate.
    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
    for con in &problem.constraints {
        let mut row = vec![0.0; n];
        for &(j, a) in &con.coeffs {
            row[j] += a;
        }
        candidates.push((row, con.rhs));
    }
    for j in 0..n {
        let mut unit = vec![0.0; n];
        unit[j] = 1.0;
        candidates.push((unit.clone(), problem.var_lower[j]));
        candidates.push((unit, problem.var_upper[j]));
    }

    let mut best: Option<f64> = None;
    let mut combo: Vec<usize> = (0..n).collect();
    loop {
        if let Some(point) = solve_square(&candidates, &combo, n) {
            if feasible(problem, &point) {
                let objective = problem.objective_value(&point);
                if best.is_none_or(|b| objective < b) {
                    best = Some(objective);
                }
            }
        }
        // Next combination in lexicographic order.
        let total = candidates.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if combo[i] != i + total - n {
                break;
            }
        }
        combo[i] += 1;
        for k in (i + 1)..n {
            combo[k] = combo[k - 1] + 1;
        }
    }
}

fn solve_square(candidates: &[(Vec<f64>, f64)], combo: &[usize], n: usize) -> Option<Vec<f64>> {
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for (r, &c) in combo.iter().enumerate() {
        a[r * n..(r + 1) * n].copy_from_slice(&candidates[c].0);
        b[r] = candidates[c].1;
    }
    // Gaussian elimination with partial pivoting.
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if a[i * n + k].abs() > a[piv * n + k].abs() {
                piv = i;
            }
        }
        if a[piv * n + k].abs() < 1e-10 {
            return None;
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        for i in (k + 1)..n {
            let f = a[i * n + k] / a[k * n + k];
            if f != 0.0 {
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in (k + 1)..n {
            acc -= a[k * n + j] * x[j];
        }
        x[k] = acc / a[k * n + k];
    }
    Some(x)
}

fn feasible(problem: &LpProblem, point: &[f64]) -> bool {
    problem.max_constraint_violation(point) <= 1e-7 && problem.max_bound_violation(point) <= 1e-7
}
