//! Brute-force reference optimizer.
//!
//! Enumerates every on/off pattern of the transfer indicators, solves the
//! remaining pure LP for each pattern, and returns the best result. Cost
//! is exponential in `num_transactions * horizon`, so a hard cap keeps it
//! honest; within the cap it produces the exact global optimum and serves
//! as ground truth for the branch-and-bound engine.
//!
//! Patterns whose fixed-cost contribution alone already reaches the best
//! objective found are skipped. That is sound because every other
//! objective term is nonnegative (costs are nonnegative and minimum
//! balances are nonnegative by construction). Ties are resolved toward the
//! lexicographically smallest pattern, so results are deterministic.

use thiserror::Error;

use crate::formulate::{build_cost_model, build_cost_risk_model, MilpModel, VariableMap};
use crate::model::{ModelError, Policy, ProblemInstance, RiskParams};
use crate::simplex::{solve_lp, LpStatus, DEFAULT_MAX_ITERS};

/// Hard cap on `num_transactions * horizon`; each extra unit doubles the
/// pattern count.
pub const MAX_PATTERN_BITS: usize = 16;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "pattern space too large: {bits} indicator variables exceed the cap of {MAX_PATTERN_BITS}"
    )]
    CapExceeded { bits: usize },
}

/// Result of an exhaustive solve.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Optimal { objective: f64, policy: Policy },
    Infeasible,
}

impl OracleOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            OracleOutcome::Optimal { objective, .. } => Some(*objective),
            OracleOutcome::Infeasible => None,
        }
    }
}

/// Exact global optimum of the cost program by full pattern enumeration.
pub fn oracle_solve_cost(instance: &ProblemInstance) -> Result<OracleOutcome, OracleError> {
    let (model, map) = build_cost_model(instance)?;
    enumerate_patterns(&model, &map)
}

/// Exact global optimum of the cost-risk program by full pattern
/// enumeration.
pub fn oracle_solve_risk(
    instance: &ProblemInstance,
    risk: &RiskParams,
) -> Result<OracleOutcome, OracleError> {
    let (model, map) = build_cost_risk_model(instance, risk)?;
    enumerate_patterns(&model, &map)
}

fn enumerate_patterns(model: &MilpModel, map: &VariableMap) -> Result<OracleOutcome, OracleError> {
    let n = map.num_transactions();
    let bits = n * map.horizon();
    if bits > MAX_PATTERN_BITS {
        return Err(OracleError::CapExceeded { bits });
    }

    let mut lp = model.relax();
    let mut best: Option<(f64, Vec<f64>)> = None;

    // Iterating the pattern integer with bit (bits-1-k) holding indicator k
    // visits patterns in lexicographic order of the flat indicator vector.
    for pattern in 0u64..(1u64 << bits) {
        let mut fixed_sum = 0.0;
        for k in 0..bits {
            let on = (pattern >> (bits - 1 - k)) & 1 == 1;
            let var = map.indicator(k / n, k % n);
            let value = if on { 1.0 } else { 0.0 };
            lp.var_lower[var] = value;
            lp.var_upper[var] = value;
            if on {
                fixed_sum += model.objective[var];
            }
        }
        if let Some((best_obj, _)) = &best {
            if fixed_sum >= *best_obj {
                continue;
            }
        }
        let solution = solve_lp(&lp, DEFAULT_MAX_ITERS);
        if solution.status == LpStatus::Optimal
            && best.as_ref().is_none_or(|(b, _)| solution.objective < *b)
        {
            best = Some((solution.objective, solution.values));
        }
    }

    Ok(match best {
        Some((objective, values)) => OracleOutcome::Optimal {
            objective,
            policy: map.extract_policy(&values),
        },
        None => OracleOutcome::Infeasible,
    })
}
