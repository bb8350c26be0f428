//! One-time exhaustive verification of the reference-instance regression
//! value, independent of the branch-and-bound engine.
//!
//! The full reference instance has 6 x 5 = 30 indicator bits, far beyond
//! the plain oracle's enumeration cap, so this test shrinks the pattern
//! space with a netting argument: if a period runs both directions between
//! the same pair of accounts, replacing the two transfers by their net
//! flow preserves every balance and never increases cost (variable costs
//! are nonnegative and an indicator can only switch off). Some optimal
//! solution therefore uses at most one direction per account pair per
//! period, leaving 27 options per period instead of 2^6.
//!
//! The remaining 27^5 patterns are pruned by a sound lower bound: the
//! pattern's fixed-cost sum plus the optimum of the instance with all
//! fixed costs removed can never undershoot the pattern's LP value. The
//! search is seeded with a hand-checked feasible policy so pruning engages
//! immediately.
//!
//! Run with `cargo test --release --test pin_s4 -- --ignored --nocapture`;
//! it takes a few minutes. The expected values in
//! `fixtures/example_s4.expected.json` were produced by this enumeration.

mod common;

use cashplan::engine::{solve_cost, BnbOptions};
use cashplan::formulate::build_cost_model;
use cashplan::model::{check_feasible, policy_cost_total, propagate_balances, Policy};
use cashplan::oracle::oracle_solve_cost;
use cashplan::simplex::{solve_lp, LpStatus, DEFAULT_MAX_ITERS};

use common::{s4_instance, s4_truncated};

/// Transactions grouped by the unordered account pair they connect, as
/// (index of one direction, index of the other).
const PAIRS: [(usize, usize); 3] = [(0, 1), (2, 3), (4, 5)];

/// Exhaustive optimum over pair-reduced indicator patterns.
fn reduced_enumeration(instance: &cashplan::model::ProblemInstance, seed_upper_bound: f64) -> f64 {
    let horizon = instance.horizon;
    let (model, map) = build_cost_model(instance).unwrap();

    // Lower bound on the continuous part of any pattern: the optimum with
    // every fixed cost erased.
    let mut free_instance = instance.clone();
    free_instance.costs.fixed = vec![0.0; 6];
    let (free_model, _) = build_cost_model(&free_instance).unwrap();
    let free = solve_lp(&free_model.relax(), DEFAULT_MAX_ITERS);
    assert_eq!(free.status, LpStatus::Optimal);
    let continuous_floor = free.objective;
    println!("continuous floor (no fixed costs): {continuous_floor}");

    // The 27 per-period options: for each pair, off / first / second
    // direction. Sorted by fixed cost so cheap prefixes come first.
    let mut options: Vec<(f64, Vec<usize>)> = Vec::new();
    for choice in 0..27usize {
        let mut active = Vec::new();
        let mut digits = choice;
        for (a, b) in PAIRS {
            match digits % 3 {
                1 => active.push(a),
                2 => active.push(b),
                _ => {}
            }
            digits /= 3;
        }
        let fixed: f64 = active.iter().map(|&i| instance.costs.fixed[i]).sum();
        options.push((fixed, active));
    }
    options.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut lp = model.relax();
    let mut best = seed_upper_bound;
    let mut solved = 0u64;
    let mut pruned = 0u64;

    // Depth-first over periods, pruning on fixed cost + continuous floor.
    let mut stack_choice = vec![0usize; horizon];
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        t: usize,
        fixed_so_far: f64,
        horizon: usize,
        options: &[(f64, Vec<usize>)],
        stack_choice: &mut Vec<usize>,
        lp: &mut cashplan::simplex::LpProblem,
        map: &cashplan::formulate::VariableMap,
        continuous_floor: f64,
        best: &mut f64,
        solved: &mut u64,
        pruned: &mut u64,
    ) {
        if fixed_so_far + continuous_floor >= *best {
            *pruned += 1;
            return;
        }
        if t == horizon {
            for (period, &choice) in stack_choice.iter().enumerate() {
                let active = &options[choice].1;
                for i in 0..6 {
                    let on = active.contains(&i);
                    let var = map.indicator(period, i);
                    let value = if on { 1.0 } else { 0.0 };
                    lp.var_lower[var] = value;
                    lp.var_upper[var] = value;
                }
            }
            let solution = solve_lp(lp, DEFAULT_MAX_ITERS);
            *solved += 1;
            if solution.status == LpStatus::Optimal && solution.objective < *best {
                *best = solution.objective;
                println!("new best {best} after {solved} LPs");
            }
            return;
        }
        for choice in 0..options.len() {
            stack_choice[t] = choice;
            dfs(
                t + 1,
                fixed_so_far + options[choice].0,
                horizon,
                options,
                stack_choice,
                lp,
                map,
                continuous_floor,
                best,
                solved,
                pruned,
            );
        }
    }
    dfs(
        0,
        0.0,
        horizon,
        &options,
        &mut stack_choice,
        &mut lp,
        &map,
        continuous_floor,
        &mut best,
        &mut solved,
        &mut pruned,
    );
    println!("enumeration done: {solved} LPs solved, {pruned} subtrees pruned, best {best}");
    best
}

/// A hand-checked feasible policy of the reference instance; its cost
/// seeds the enumeration with a valid upper bound that does not come from
/// the engine under test.
fn seed_policy() -> Policy {
    let mut policy = Policy::zeros(5, 6);
    policy.actions[0][1] = 4.0; // 1 -> 2
    policy.actions[1][1] = 1.0; // 1 -> 2
    policy.actions[1][2] = 1.0; // 3 -> 2
    policy.actions[2][5] = 5.0; // 1 -> 3
    policy.actions[2][3] = 2.0; // 2 -> 3
    policy.actions[4][0] = 1.0; // 2 -> 1
    policy.actions[4][3] = 5.0; // 2 -> 3
    policy
}

#[test]
#[ignore = "multi-minute exhaustive enumeration; run once to re-derive the pinned value"]
fn full_reference_instance_pin() {
    let instance = s4_instance();

    let policy = seed_policy();
    let path = propagate_balances(
        &instance.initial_balance,
        &instance.forecasts,
        &policy,
        &instance.system,
    )
    .unwrap();
    assert!(check_feasible(&path, &instance.min_balance).ok());
    let (seed_cost, _) = policy_cost_total(&policy, &path, &instance.costs).unwrap();
    println!("seed policy cost: {seed_cost}");

    let pinned = reduced_enumeration(&instance, seed_cost + 1e-9);
    println!("exhaustive optimum: {pinned}");

    let engine = solve_cost(&instance, &BnbOptions::default()).unwrap();
    let engine_obj = engine.objective.unwrap();
    println!("engine optimum: {engine_obj}");
    assert!(
        (pinned - engine_obj).abs() < 1e-6,
        "enumeration {pinned} vs engine {engine_obj}"
    );

    let expected = common::load_expected();
    assert!(
        (pinned - expected.cost_objective).abs() < 1e-6,
        "enumeration {pinned} vs recorded {}",
        expected.cost_objective
    );
}

/// The same reduced enumeration must agree with the plain oracle wherever
/// the plain oracle can run at all.
#[test]
#[ignore = "slow cross-check of the reduced enumeration against the plain oracle"]
fn reduced_enumeration_matches_oracle_on_truncations() {
    for horizon in [1usize, 2] {
        let instance = s4_truncated(horizon);
        let oracle = oracle_solve_cost(&instance)
            .unwrap()
            .objective()
            .expect("truncations are feasible");
        let reduced = reduced_enumeration(&instance, f64::INFINITY);
        assert!(
            (reduced - oracle).abs() < 1e-6,
            "horizon {horizon}: reduced {reduced} vs oracle {oracle}"
        );
    }
}
