//! Domain types, validation, balance propagation, and policy evaluation.
//!
//! Everything needed to state a cash management problem and score a given
//! transfer policy, independent of any solver. All types are immutable
//! after construction and all operations are pure functions, so instances
//! can be shared freely across threads.
//!
//! Conventions: money amounts (balances, flows, transfers) are in money
//! units; variable transaction costs and holding costs are in cost units
//! per money unit; fixed transaction costs are flat cost units. Matrices
//! are row-major `Vec<Vec<f64>>`; row `t` of a policy, balance, or forecast
//! matrix is period `t + 1` (periods are 1-based in reports).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A transfer amount below this threshold does not count as an executed
/// transaction (no fixed charge). Solver outputs carry float noise; an
/// exact `> 0` test would charge fixed costs on numerical dust.
pub const INDICATOR_TOL: f64 = 1e-9;

/// Absolute tolerance for minimum-balance feasibility checks.
pub const BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("transfer amount for transaction index {index} is negative ({value})")]
    NegativeTransfer { index: usize, value: f64 },
    #[error("period cost vector is empty")]
    EmptyCosts,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

/// A set of bank accounts and the transfers allowed between them.
///
/// Row `i` of `incidence` describes transaction `i`: `+1` in the column of
/// the account it adds cash to, `-1` in the column it removes cash from,
/// `0` elsewhere. External cash enters only through forecasts, so every
/// row must be an exact two-endpoint transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashSystem {
    pub account_labels: Vec<String>,
    pub transaction_labels: Vec<String>,
    pub incidence: Vec<Vec<f64>>,
}

impl CashSystem {
    pub fn num_accounts(&self) -> usize {
        self.account_labels.len()
    }

    pub fn num_transactions(&self) -> usize {
        self.transaction_labels.len()
    }

    /// Source and destination account indices of transaction `i`, if the
    /// row is a well-formed transfer.
    pub fn endpoints(&self, i: usize) -> Option<(usize, usize)> {
        let row = self.incidence.get(i)?;
        let mut source = None;
        let mut dest = None;
        for (j, &a) in row.iter().enumerate() {
            if a == 1.0 {
                if dest.is_some() {
                    return None;
                }
                dest = Some(j);
            } else if a == -1.0 {
                if source.is_some() {
                    return None;
                }
                source = Some(j);
            } else if a != 0.0 {
                return None;
            }
        }
        match (source, dest) {
            (Some(s), Some(d)) => Some((s, d)),
            _ => None,
        }
    }
}

/// Fixed and variable costs per transaction, holding cost per account.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostStructure {
    /// Flat cost charged whenever a transaction executes (one entry per
    /// transaction).
    pub fixed: Vec<f64>,
    /// Cost per money unit transferred (one entry per transaction).
    pub variable: Vec<f64>,
    /// Cost per money unit held per period (one entry per account).
    pub holding: Vec<f64>,
}

/// A complete optimization problem: system, costs, balance floors, initial
/// state, and the forecast matrix over the planning horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub system: CashSystem,
    pub costs: CostStructure,
    pub min_balance: Vec<f64>,
    pub initial_balance: Vec<f64>,
    /// `horizon x num_accounts`; row `t` holds the expected net cash flows
    /// of period `t + 1`.
    pub forecasts: Vec<Vec<f64>>,
    pub horizon: usize,
}

/// Parameters of the cost-risk objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    /// Cost reference: per-period costs above this level count as risk.
    pub cost_ref: f64,
    /// Budget on the total cost over the horizon. Must be positive (it
    /// divides the objective).
    pub cost_budget: f64,
    /// Budget on the total positive cost deviation. Must be positive.
    pub risk_budget: f64,
    pub cost_weight: f64,
    pub risk_weight: f64,
}

impl RiskParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut problems = Vec::new();
        if !self.cost_ref.is_finite() {
            problems.push(format!(
                "cost reference must be finite, got {}",
                self.cost_ref
            ));
        }
        // NaN budgets fail the finiteness clause.
        if self.cost_budget <= 0.0 || !self.cost_budget.is_finite() {
            problems.push(format!(
                "cost budget must be positive, got {}",
                self.cost_budget
            ));
        }
        if self.risk_budget <= 0.0 || !self.risk_budget.is_finite() {
            problems.push(format!(
                "risk budget must be positive, got {}",
                self.risk_budget
            ));
        }
        for (name, w) in [
            ("cost weight", self.cost_weight),
            ("risk weight", self.risk_weight),
        ] {
            if !(0.0..=1.0).contains(&w) {
                problems.push(format!("{name} must lie in [0, 1], got {w}"));
            }
        }
        if (self.cost_weight + self.risk_weight - 1.0).abs() > 1e-12 {
            problems.push(format!(
                "weights must sum to 1, got {} + {} = {}",
                self.cost_weight,
                self.risk_weight,
                self.cost_weight + self.risk_weight
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidInstance(problems.join("; ")))
        }
    }
}

/// A transfer policy: `horizon x num_transactions` nonnegative amounts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub actions: Vec<Vec<f64>>,
}

impl Policy {
    pub fn zeros(horizon: usize, num_transactions: usize) -> Self {
        Policy {
            actions: vec![vec![0.0; num_transactions]; horizon],
        }
    }
}

/// Account balances after each period: `horizon x num_accounts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePath {
    pub balances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

/// Deterministic solver work counters (no wall time; identical inputs give
/// identical stats).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub simplex_iterations: u64,
}

/// Result of a cost or cost-risk solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Present unless the problem is infeasible (or no incumbent was found
    /// before hitting the node limit).
    pub policy: Option<Policy>,
    pub balances: Option<BalancePath>,
    pub objective: Option<f64>,
    /// Cost of each period under the returned policy; empty without a policy.
    pub period_costs: Vec<f64>,
    /// Positive cost deviations above the cost reference; all zeros for
    /// cost-only solves.
    pub deviations: Vec<f64>,
    pub stats: SolveStats,
}

impl Solution {
    pub fn infeasible(stats: SolveStats) -> Self {
        Solution {
            status: SolveStatus::Infeasible,
            policy: None,
            balances: None,
            objective: None,
            period_costs: Vec::new(),
            deviations: Vec::new(),
            stats,
        }
    }
}

/// Outcome of a structural validation pass.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A balance that fell below its account minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceShortfall {
    /// 1-based period.
    pub period: usize,
    /// 0-based account index.
    pub account: usize,
    /// How far below the minimum the balance fell.
    pub shortfall: f64,
}

/// Outcome of a minimum-balance feasibility check.
#[derive(Debug, Clone, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<BalanceShortfall>,
}

impl FeasibilityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_unique(labels: &[String], kind: &str, out: &mut Vec<String>) {
    for (a, label) in labels.iter().enumerate() {
        if labels[..a].contains(label) {
            out.push(format!("duplicate {kind} label \"{label}\""));
        }
    }
}

/// Check every [`CashSystem`] invariant and report each violation with the
/// offending row or entry.
pub fn validate_system(system: &CashSystem) -> ValidationReport {
    let mut violations = Vec::new();
    let m = system.num_accounts();
    let n = system.num_transactions();
    if m == 0 {
        violations.push("system has no accounts".to_string());
    }
    if n == 0 {
        violations.push("system has no transactions".to_string());
    }
    check_unique(&system.account_labels, "account", &mut violations);
    check_unique(&system.transaction_labels, "transaction", &mut violations);
    if system.incidence.len() != n {
        violations.push(format!(
            "incidence matrix has {} rows, expected one per transaction ({n})",
            system.incidence.len()
        ));
        return ValidationReport { violations };
    }
    for (i, row) in system.incidence.iter().enumerate() {
        if row.len() != m {
            violations.push(format!(
                "incidence row {} has {} entries, expected one per account ({m})",
                i + 1,
                row.len()
            ));
            continue;
        }
        let mut plus = 0usize;
        let mut minus = 0usize;
        let mut bad_entry = false;
        for (j, &a) in row.iter().enumerate() {
            if a == 1.0 {
                plus += 1;
            } else if a == -1.0 {
                minus += 1;
            } else if a != 0.0 {
                violations.push(format!(
                    "incidence entry ({}, {}) = {a} is outside {{-1, 0, 1}}",
                    i + 1,
                    j + 1
                ));
                bad_entry = true;
            }
        }
        if bad_entry {
            continue;
        }
        if plus == 0 && minus == 0 {
            violations.push(format!("transaction {} has no endpoints", i + 1));
        } else if plus != 1 || minus != 1 {
            violations.push(format!(
                "transaction {} must have exactly one source and one destination \
                 (found {minus} sources, {plus} destinations)",
                i + 1
            ));
        }
    }
    ValidationReport { violations }
}

impl ProblemInstance {
    /// Full validation report: structural problems plus the safe-start
    /// condition (initial balances at or above the minimums). Structural
    /// problems make the instance unusable; a violated safe-start condition
    /// merely guarantees an infeasible solve verdict.
    pub fn validation(&self) -> ValidationReport {
        let mut report = self.structural_validation();
        let m = self.system.num_accounts();
        if self.initial_balance.len() == m && self.min_balance.len() == m {
            for j in 0..m {
                if self.initial_balance[j] < self.min_balance[j] {
                    report.violations.push(format!(
                        "initial balance of account \"{}\" ({}) is below its minimum ({})",
                        self.system.account_labels[j], self.initial_balance[j], self.min_balance[j]
                    ));
                }
            }
        }
        report
    }

    fn structural_validation(&self) -> ValidationReport {
        let mut report = validate_system(&self.system);
        let violations = &mut report.violations;
        let m = self.system.num_accounts();
        let n = self.system.num_transactions();

        for (name, vec, expected) in [
            ("fixed costs", &self.costs.fixed, n),
            ("variable costs", &self.costs.variable, n),
            ("holding costs", &self.costs.holding, m),
            ("minimum balances", &self.min_balance, m),
            ("initial balances", &self.initial_balance, m),
        ] {
            if vec.len() != expected {
                violations.push(format!(
                    "{name} vector has length {}, expected {expected}",
                    vec.len()
                ));
            }
            for (k, &v) in vec.iter().enumerate() {
                if !v.is_finite() {
                    violations.push(format!("{name} entry {} is not finite", k + 1));
                }
            }
        }
        for (name, vec) in [
            ("fixed cost", &self.costs.fixed),
            ("variable cost", &self.costs.variable),
            ("holding cost", &self.costs.holding),
            ("minimum balance", &self.min_balance),
        ] {
            for (k, &v) in vec.iter().enumerate() {
                if v < 0.0 {
                    violations.push(format!("{name} entry {} is negative ({v})", k + 1));
                }
            }
        }
        if self.horizon == 0 {
            violations.push("horizon must be at least 1".to_string());
        }
        if self.forecasts.len() != self.horizon {
            violations.push(format!(
                "forecast matrix has {} rows, expected horizon ({})",
                self.forecasts.len(),
                self.horizon
            ));
        }
        for (t, row) in self.forecasts.iter().enumerate() {
            if row.len() != m {
                violations.push(format!(
                    "forecast row {} has {} entries, expected one per account ({m})",
                    t + 1,
                    row.len()
                ));
            }
            for (j, &f) in row.iter().enumerate() {
                if !f.is_finite() {
                    violations.push(format!(
                        "forecast entry ({}, {}) is not finite",
                        t + 1,
                        j + 1
                    ));
                }
            }
        }
        report
    }

    /// Reject instances whose shape or domains make the optimization
    /// ill-posed. The safe-start condition is deliberately not enforced
    /// here: a solver is entitled to judge such instances infeasible.
    pub fn validate_structure(&self) -> Result<(), ModelError> {
        let report = self.structural_validation();
        if report.ok() {
            Ok(())
        } else {
            Err(ModelError::InvalidInstance(report.violations.join("; ")))
        }
    }
}

/// Roll balances forward from `initial` through every period: each period
/// adds the forecast flows and the net effect of the period's transfers.
pub fn propagate_balances(
    initial: &[f64],
    forecasts: &[Vec<f64>],
    policy: &Policy,
    system: &CashSystem,
) -> Result<BalancePath, ModelError> {
    let m = system.num_accounts();
    let n = system.num_transactions();
    if initial.len() != m {
        return Err(ModelError::DimensionMismatch {
            what: "initial balance",
            expected: m,
            actual: initial.len(),
        });
    }
    if policy.actions.len() != forecasts.len() {
        return Err(ModelError::DimensionMismatch {
            what: "policy rows",
            expected: forecasts.len(),
            actual: policy.actions.len(),
        });
    }
    let mut balances = Vec::with_capacity(forecasts.len());
    let mut prev = initial.to_vec();
    for (flow, actions) in forecasts.iter().zip(&policy.actions) {
        if flow.len() != m {
            return Err(ModelError::DimensionMismatch {
                what: "forecast row",
                expected: m,
                actual: flow.len(),
            });
        }
        if actions.len() != n {
            return Err(ModelError::DimensionMismatch {
                what: "policy row",
                expected: n,
                actual: actions.len(),
            });
        }
        let mut next = vec![0.0; m];
        for j in 0..m {
            let mut transfer_net = 0.0;
            for (i, &amount) in actions.iter().enumerate() {
                transfer_net += system.incidence[i][j] * amount;
            }
            next[j] = prev[j] + flow[j] + transfer_net;
        }
        balances.push(next.clone());
        prev = next;
    }
    Ok(BalancePath { balances })
}

/// Check every balance against its account minimum (absolute tolerance
/// [`BALANCE_TOL`]); violations carry the 1-based period, the account
/// index, and the shortfall.
pub fn check_feasible(path: &BalancePath, min_balance: &[f64]) -> FeasibilityReport {
    let mut violations = Vec::new();
    for (t, row) in path.balances.iter().enumerate() {
        for (j, &b) in row.iter().enumerate() {
            let floor = min_balance.get(j).copied().unwrap_or(0.0);
            if b < floor - BALANCE_TOL {
                violations.push(BalanceShortfall {
                    period: t + 1,
                    account: j,
                    shortfall: floor - b,
                });
            }
        }
    }
    FeasibilityReport { violations }
}

/// Cost of one period: fixed charges for every executed transfer, variable
/// charges per unit transferred, and holding charges on the end-of-period
/// balances.
pub fn period_cost(x_t: &[f64], b_t: &[f64], costs: &CostStructure) -> Result<f64, ModelError> {
    if x_t.len() != costs.fixed.len() || x_t.len() != costs.variable.len() {
        return Err(ModelError::DimensionMismatch {
            what: "transfer vector",
            expected: costs.fixed.len(),
            actual: x_t.len(),
        });
    }
    if b_t.len() != costs.holding.len() {
        return Err(ModelError::DimensionMismatch {
            what: "balance vector",
            expected: costs.holding.len(),
            actual: b_t.len(),
        });
    }
    let mut total = 0.0;
    for (i, &x) in x_t.iter().enumerate() {
        if x < 0.0 {
            return Err(ModelError::NegativeTransfer { index: i, value: x });
        }
        if x > INDICATOR_TOL {
            total += costs.fixed[i];
        }
        total += costs.variable[i] * x;
    }
    for (j, &b) in b_t.iter().enumerate() {
        total += costs.holding[j] * b;
    }
    Ok(total)
}

/// Total and per-period cost of a policy along its balance path.
pub fn policy_cost_total(
    policy: &Policy,
    path: &BalancePath,
    costs: &CostStructure,
) -> Result<(f64, Vec<f64>), ModelError> {
    if policy.actions.len() != path.balances.len() {
        return Err(ModelError::DimensionMismatch {
            what: "balance rows",
            expected: policy.actions.len(),
            actual: path.balances.len(),
        });
    }
    let mut per_period = Vec::with_capacity(policy.actions.len());
    for (x_t, b_t) in policy.actions.iter().zip(&path.balances) {
        per_period.push(period_cost(x_t, b_t, costs)?);
    }
    Ok((per_period.iter().sum(), per_period))
}

/// Empirical Conditional Cost-at-Risk: the mean of the per-period costs
/// strictly above the reference. Returns 0 when no period exceeds the
/// reference (the conditional expectation is undefined there and zero is
/// the risk-free report).
pub fn empirical_ccar(period_costs: &[f64], cost_ref: f64) -> Result<f64, ModelError> {
    if period_costs.is_empty() {
        return Err(ModelError::EmptyCosts);
    }
    let exceed: Vec<f64> = period_costs
        .iter()
        .copied()
        .filter(|&c| c > cost_ref)
        .collect();
    if exceed.is_empty() {
        Ok(0.0)
    } else {
        Ok(exceed.iter().sum::<f64>() / exceed.len() as f64)
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Human-readable dump of an instance: accounts with their costs and
/// balances, transactions with endpoints, forecasts, and (when the
/// instance fails validation) the violation list.
pub fn describe(instance: &ProblemInstance) -> String {
    let system = &instance.system;
    let m = system.num_accounts();
    let n = system.num_transactions();
    let mut out = String::new();
    out.push_str(&format!(
        "Cash management system: {m} accounts, {n} transactions, horizon {} periods\n",
        instance.horizon
    ));
    out.push_str("Accounts:\n");
    for (j, label) in system.account_labels.iter().enumerate() {
        let holding = instance.costs.holding.get(j).copied().unwrap_or(f64::NAN);
        let min = instance.min_balance.get(j).copied().unwrap_or(f64::NAN);
        let init = instance.initial_balance.get(j).copied().unwrap_or(f64::NAN);
        out.push_str(&format!(
            "  {label}: holding cost {}, min balance {}, initial balance {}\n",
            fmt_num(holding),
            fmt_num(min),
            fmt_num(init)
        ));
    }
    out.push_str("Transactions:\n");
    for (i, label) in system.transaction_labels.iter().enumerate() {
        let route = match system.endpoints(i) {
            Some((src, dst)) => format!(
                "{} -> {}",
                system.account_labels[src], system.account_labels[dst]
            ),
            None => "(malformed incidence row)".to_string(),
        };
        let fixed = instance.costs.fixed.get(i).copied().unwrap_or(f64::NAN);
        let variable = instance.costs.variable.get(i).copied().unwrap_or(f64::NAN);
        out.push_str(&format!(
            "  {label}: {route} (fixed {}, variable {})\n",
            fmt_num(fixed),
            fmt_num(variable)
        ));
    }
    out.push_str("Forecasts:\n");
    for (t, row) in instance.forecasts.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        out.push_str(&format!("  t={}: [{}]\n", t + 1, cells.join(", ")));
    }
    let report = instance.validation();
    if !report.ok() {
        out.push_str("Validation issues:\n");
        for v in &report.violations {
            out.push_str(&format!("  - {v}\n"));
        }
    }
    out
}
