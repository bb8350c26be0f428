//! Translation of a [`ProblemInstance`] into a mixed-integer linear model.
//!
//! The cost program minimizes total transaction-plus-holding cost subject
//! to the balance recursion, minimum balances, and nonnegative transfers.
//! The cost-risk variant adds one deviation variable per period, a cost
//! reference row per period, and budget rows on total cost and total
//! deviation, with the two objective terms normalized by their budgets.
//!
//! Fixed charges are linked to transfer amounts through big-M rows
//! `x - M z <= 0`. The bound `M` is the total cash ever available in the
//! system, which is safe because balances are nonnegative and circular
//! transfers only ever add cost.
//!
//! Variable layout is deterministic: for each period, the transfer block,
//! then the indicator block, then the balance block, then (risk mode) the
//! deviation variable. Two builds of the same instance produce identical
//! models.

use crate::model::{ModelError, ProblemInstance, RiskParams};
use crate::simplex::{LinearConstraint, LpProblem, Relation};

/// Which role a model variable plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Transfer amount of one transaction in one period.
    Transfer,
    /// Binary execution indicator of one transaction in one period.
    Indicator,
    /// End-of-period balance of one account.
    Balance,
    /// Positive cost deviation above the reference (risk mode only).
    Deviation,
}

/// Solver-facing intermediate representation of the optimization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    /// `true` marks a binary 0/1 variable.
    pub integrality: Vec<bool>,
    /// Debug labels, e.g. `x[t=1,i=4]`; 1-based period and index.
    pub var_names: Vec<String>,
}

impl MilpModel {
    /// The LP relaxation: integrality dropped, binaries keep their [0, 1]
    /// bounds.
    pub fn relax(&self) -> LpProblem {
        LpProblem {
            num_vars: self.num_vars,
            objective: self.objective.clone(),
            objective_offset: self.objective_offset,
            var_lower: self.var_lower.clone(),
            var_upper: self.var_upper.clone(),
            constraints: self.constraints.clone(),
        }
    }
}

/// Bijective lookup from `(kind, period, index)` to flat variable position.
///
/// Periods are 0-based here; `index` is the transaction index for transfer
/// and indicator variables, the account index for balances, and unused for
/// deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableMap {
    num_transactions: usize,
    num_accounts: usize,
    horizon: usize,
    with_deviations: bool,
}

impl VariableMap {
    fn new(instance: &ProblemInstance, with_deviations: bool) -> Self {
        VariableMap {
            num_transactions: instance.system.num_transactions(),
            num_accounts: instance.system.num_accounts(),
            horizon: instance.horizon,
            with_deviations,
        }
    }

    fn period_stride(&self) -> usize {
        2 * self.num_transactions + self.num_accounts + usize::from(self.with_deviations)
    }

    pub fn num_vars(&self) -> usize {
        self.horizon * self.period_stride()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_transactions(&self) -> usize {
        self.num_transactions
    }

    pub fn num_accounts(&self) -> usize {
        self.num_accounts
    }

    /// Extract the transfer matrix from a flat assignment, dropping
    /// sub-threshold dust and clamping tiny negatives to zero.
    pub fn extract_policy(&self, assignment: &[f64]) -> crate::model::Policy {
        let mut actions = vec![vec![0.0; self.num_transactions]; self.horizon];
        for (t, row) in actions.iter_mut().enumerate() {
            for (i, slot) in row.iter_mut().enumerate() {
                let v = assignment[self.transfer(t, i)];
                *slot = if v > crate::model::INDICATOR_TOL {
                    v
                } else {
                    0.0
                };
            }
        }
        crate::model::Policy { actions }
    }

    pub fn transfer(&self, t: usize, i: usize) -> usize {
        debug_assert!(t < self.horizon && i < self.num_transactions);
        t * self.period_stride() + i
    }

    pub fn indicator(&self, t: usize, i: usize) -> usize {
        debug_assert!(t < self.horizon && i < self.num_transactions);
        t * self.period_stride() + self.num_transactions + i
    }

    pub fn balance(&self, t: usize, j: usize) -> usize {
        debug_assert!(t < self.horizon && j < self.num_accounts);
        t * self.period_stride() + 2 * self.num_transactions + j
    }

    /// Position of the period's deviation variable; panics when the model
    /// was built without deviations.
    pub fn deviation(&self, t: usize) -> usize {
        assert!(
            self.with_deviations,
            "cost model has no deviation variables"
        );
        debug_assert!(t < self.horizon);
        t * self.period_stride() + 2 * self.num_transactions + self.num_accounts
    }

    /// Decode a flat position back into `(kind, period, index)`.
    pub fn decode(&self, var: usize) -> (VarKind, usize, usize) {
        let stride = self.period_stride();
        let t = var / stride;
        let offset = var % stride;
        let n = self.num_transactions;
        let m = self.num_accounts;
        if offset < n {
            (VarKind::Transfer, t, offset)
        } else if offset < 2 * n {
            (VarKind::Indicator, t, offset - n)
        } else if offset < 2 * n + m {
            (VarKind::Balance, t, offset - 2 * n)
        } else {
            (VarKind::Deviation, t, 0)
        }
    }
}

/// Upper bound on any single transfer: all cash the system can ever hold,
/// i.e. the initial balances plus every positive forecast inflow. The same
/// bound applies to every transaction.
pub fn compute_big_m(instance: &ProblemInstance) -> Vec<f64> {
    let initial: f64 = instance.initial_balance.iter().sum();
    let inflows: f64 = instance
        .forecasts
        .iter()
        .flat_map(|row| row.iter())
        .filter(|&&f| f > 0.0)
        .sum();
    vec![initial + inflows; instance.system.num_transactions()]
}

fn base_model(instance: &ProblemInstance, map: VariableMap) -> MilpModel {
    let n = instance.system.num_transactions();
    let m = instance.system.num_accounts();
    let horizon = instance.horizon;
    let num_vars = map.num_vars();
    let big_m = compute_big_m(instance);

    let objective = vec![0.0; num_vars];
    let mut var_lower = vec![0.0; num_vars];
    let mut var_upper = vec![f64::INFINITY; num_vars];
    let mut integrality = vec![false; num_vars];
    let mut var_names = vec![String::new(); num_vars];

    for t in 0..horizon {
        for i in 0..n {
            let x = map.transfer(t, i);
            var_names[x] = format!("x[t={},i={}]", t + 1, i + 1);

            let z = map.indicator(t, i);
            var_upper[z] = 1.0;
            integrality[z] = true;
            var_names[z] = format!("z[t={},i={}]", t + 1, i + 1);
        }
        for j in 0..m {
            let b = map.balance(t, j);
            var_lower[b] = instance.min_balance[j];
            var_names[b] = format!("b[t={},j={}]", t + 1, j + 1);
        }
        if map.with_deviations {
            let d = map.deviation(t);
            var_names[d] = format!("d[t={}]", t + 1);
        }
    }

    // Balance recursion: transfers plus the previous balance determine the
    // current one; the initial balance and the forecasts sit in the rhs.
    let mut constraints = Vec::new();
    for t in 0..horizon {
        for j in 0..m {
            let mut coeffs = Vec::new();
            for i in 0..n {
                let a = instance.system.incidence[i][j];
                if a != 0.0 {
                    coeffs.push((map.transfer(t, i), a));
                }
            }
            if t > 0 {
                coeffs.push((map.balance(t - 1, j), 1.0));
            }
            coeffs.push((map.balance(t, j), -1.0));
            let mut rhs = -instance.forecasts[t][j];
            if t == 0 {
                rhs -= instance.initial_balance[j];
            }
            constraints.push(LinearConstraint {
                coeffs,
                relation: Relation::Eq,
                rhs,
            });
        }
    }
    // Fixed-charge links: a transfer can only flow when its indicator is on.
    for t in 0..horizon {
        for (i, &bound) in big_m.iter().enumerate() {
            constraints.push(LinearConstraint {
                coeffs: vec![(map.transfer(t, i), 1.0), (map.indicator(t, i), -bound)],
                relation: Relation::Le,
                rhs: 0.0,
            });
        }
    }

    MilpModel {
        num_vars,
        objective,
        objective_offset: 0.0,
        var_lower,
        var_upper,
        constraints,
        integrality,
        var_names,
    }
}

/// Build the cost-minimization model.
pub fn build_cost_model(
    instance: &ProblemInstance,
) -> Result<(MilpModel, VariableMap), ModelError> {
    instance.validate_structure()?;
    let map = VariableMap::new(instance, false);
    let mut model = base_model(instance, map);
    for t in 0..instance.horizon {
        for i in 0..instance.system.num_transactions() {
            model.objective[map.indicator(t, i)] = instance.costs.fixed[i];
            model.objective[map.transfer(t, i)] = instance.costs.variable[i];
        }
        for j in 0..instance.system.num_accounts() {
            model.objective[map.balance(t, j)] = instance.costs.holding[j];
        }
    }
    Ok((model, map))
}

/// Build the weighted cost-risk model.
pub fn build_cost_risk_model(
    instance: &ProblemInstance,
    risk: &RiskParams,
) -> Result<(MilpModel, VariableMap), ModelError> {
    instance.validate_structure()?;
    risk.validate()?;
    let n = instance.system.num_transactions();
    let m = instance.system.num_accounts();
    let map = VariableMap::new(instance, true);
    let mut model = base_model(instance, map);

    let cost_scale = risk.cost_weight / risk.cost_budget;
    let risk_scale = risk.risk_weight / risk.risk_budget;
    for t in 0..instance.horizon {
        for i in 0..n {
            model.objective[map.indicator(t, i)] = cost_scale * instance.costs.fixed[i];
            model.objective[map.transfer(t, i)] = cost_scale * instance.costs.variable[i];
        }
        for j in 0..m {
            model.objective[map.balance(t, j)] = cost_scale * instance.costs.holding[j];
        }
        model.objective[map.deviation(t)] = risk_scale;
    }

    // Per-period cost must stay within the reference unless its deviation
    // variable absorbs the excess.
    for t in 0..instance.horizon {
        let mut coeffs = period_cost_coeffs(instance, &map, t);
        coeffs.push((map.deviation(t), -1.0));
        model.constraints.push(LinearConstraint {
            coeffs,
            relation: Relation::Le,
            rhs: risk.cost_ref,
        });
    }
    // Total cost budget.
    let mut total_cost = Vec::new();
    for t in 0..instance.horizon {
        total_cost.extend(period_cost_coeffs(instance, &map, t));
    }
    model.constraints.push(LinearConstraint {
        coeffs: total_cost,
        relation: Relation::Le,
        rhs: risk.cost_budget,
    });
    // Total deviation budget.
    model.constraints.push(LinearConstraint {
        coeffs: (0..instance.horizon)
            .map(|t| (map.deviation(t), 1.0))
            .collect(),
        relation: Relation::Le,
        rhs: risk.risk_budget,
    });

    Ok((model, map))
}

fn period_cost_coeffs(
    instance: &ProblemInstance,
    map: &VariableMap,
    t: usize,
) -> Vec<(usize, f64)> {
    let mut coeffs = Vec::new();
    for i in 0..instance.system.num_transactions() {
        if instance.costs.fixed[i] != 0.0 {
            coeffs.push((map.indicator(t, i), instance.costs.fixed[i]));
        }
        if instance.costs.variable[i] != 0.0 {
            coeffs.push((map.transfer(t, i), instance.costs.variable[i]));
        }
    }
    for j in 0..instance.system.num_accounts() {
        if instance.costs.holding[j] != 0.0 {
            coeffs.push((map.balance(t, j), instance.costs.holding[j]));
        }
    }
    coeffs
}
