//! Bounded-variable two-phase primal simplex.
//!
//! Solves `min c'y` subject to general linear rows and finite lower /
//! possibly infinite upper bounds on every variable. The implementation is
//! dense: models in this crate stay well under a few hundred variables, so
//! correctness and determinism take priority over sparse-matrix speed. The
//! basis inverse is kept explicitly and refactorized from scratch at fixed
//! intervals and at termination.
//!
//! Pricing is Dantzig's rule with a permanent switch to Bland's rule after
//! a run of degenerate pivots, which rules out cycling. All ties break
//! toward the lowest variable index, so identical inputs always produce
//! identical pivot sequences and outputs.

// Dense kernels read better with plain index loops.
#![allow(clippy::needless_range_loop)]

/// Default pivot budget for one solve.
pub const DEFAULT_MAX_ITERS: usize = 50_000;

/// Row feasibility tolerance (absolute).
pub const ROW_TOL: f64 = 1e-7;
/// Variable bound tolerance (absolute).
pub const BOUND_TOL: f64 = 1e-9;
/// Smallest usable pivot magnitude.
const PIVOT_TOL: f64 = 1e-9;
/// Reduced costs within this of zero are treated as non-improving.
const REDUCED_COST_TOL: f64 = 1e-9;
/// Steps at most this long count as degenerate.
const DEGENERATE_STEP: f64 = 1e-12;
/// Degenerate pivots before switching to Bland's rule for good.
const BLAND_TRIGGER: usize = 1_000;
/// Pivots between basis refactorizations.
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One linear row: a sparse coefficient list, a relation, and a right-hand
/// side.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// How far `values` is from satisfying this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.evaluate(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A linear program in the shape produced by relaxing a mixed-integer
/// model: finite lower bounds, optional upper bounds, arbitrary rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
}

impl LpProblem {
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset
            + self
                .objective
                .iter()
                .zip(values)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    pub fn max_constraint_violation(&self, values: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max)
    }

    pub fn max_bound_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &v) in values.iter().enumerate() {
            worst = worst.max(self.var_lower[j] - v);
            if self.var_upper[j].is_finite() {
                worst = worst.max(v - self.var_upper[j]);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values of the problem's variables; empty unless `Optimal`.
    pub values: Vec<f64>,
    /// Objective at the returned point; `inf` when infeasible, `-inf` when
    /// unbounded.
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

enum PivotOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
    SingularBasis,
}

struct Workspace {
    nrows: usize,
    ncols: usize,
    art_start: usize,
    /// Column-major `nrows x ncols`.
    cols: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    /// Row-major `nrows x nrows` basis inverse.
    binv: Vec<f64>,
    /// Values of the basic variables, by basis position.
    xb: Vec<f64>,
    iterations: usize,
    max_iters: usize,
    degenerate: usize,
    bland: bool,
}

impl Workspace {
    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.nrows..(j + 1) * self.nrows]
    }

    fn var_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(r) => self.xb[r],
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
        }
    }

    /// Rebuild the basis inverse from scratch (Gauss-Jordan with partial
    /// pivoting) and recompute the basic values. Returns false on a
    /// numerically singular basis.
    fn refactorize(&mut self) -> bool {
        let r = self.nrows;
        if r == 0 {
            return true;
        }
        let mut mat = vec![0.0; r * r];
        for (pos, &var) in self.basis.iter().enumerate() {
            let col = &self.cols[var * r..(var + 1) * r];
            for row in 0..r {
                mat[row * r + pos] = col[row];
            }
        }
        let mut inv = vec![0.0; r * r];
        for i in 0..r {
            inv[i * r + i] = 1.0;
        }
        for k in 0..r {
            let mut piv_row = k;
            let mut piv_val = mat[k * r + k].abs();
            for i in (k + 1)..r {
                let v = mat[i * r + k].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val < 1e-12 {
                return false;
            }
            if piv_row != k {
                for j in 0..r {
                    mat.swap(k * r + j, piv_row * r + j);
                    inv.swap(k * r + j, piv_row * r + j);
                }
            }
            let p = mat[k * r + k];
            for j in 0..r {
                mat[k * r + j] /= p;
                inv[k * r + j] /= p;
            }
            for i in 0..r {
                if i == k {
                    continue;
                }
                let f = mat[i * r + k];
                if f != 0.0 {
                    for j in 0..r {
                        mat[i * r + j] -= f * mat[k * r + j];
                        inv[i * r + j] -= f * inv[k * r + j];
                    }
                }
            }
        }
        self.binv = inv;
        self.recompute_basic_values();
        true
    }

    fn recompute_basic_values(&mut self) {
        let r = self.nrows;
        let mut net_rhs = self.rhs.clone();
        for j in 0..self.ncols {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.var_value(j);
            if v != 0.0 {
                let col = &self.cols[j * r..(j + 1) * r];
                for row in 0..r {
                    net_rhs[row] -= col[row] * v;
                }
            }
        }
        for pos in 0..r {
            let mut acc = 0.0;
            for row in 0..r {
                acc += self.binv[pos * r + row] * net_rhs[row];
            }
            self.xb[pos] = acc;
        }
    }

    fn duals(&self) -> Vec<f64> {
        let r = self.nrows;
        let mut pi = vec![0.0; r];
        for pos in 0..r {
            let cb = self.cost[self.basis[pos]];
            if cb != 0.0 {
                for row in 0..r {
                    pi[row] += cb * self.binv[pos * r + row];
                }
            }
        }
        pi
    }

    fn reduced_cost(&self, j: usize, pi: &[f64]) -> f64 {
        let col = self.col(j);
        let mut d = self.cost[j];
        for row in 0..self.nrows {
            d -= pi[row] * col[row];
        }
        d
    }

    /// Pick the entering variable, or None at an optimum.
    fn price(&self, pi: &[f64]) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..self.ncols {
            let state = self.state[j];
            if matches!(state, VarState::Basic(_)) {
                continue;
            }
            if self.upper[j] - self.lower[j] <= 0.0 {
                continue; // fixed (includes pinned artificials)
            }
            let d = self.reduced_cost(j, pi);
            let improving = match state {
                VarState::AtLower => d < -REDUCED_COST_TOL,
                VarState::AtUpper => d > REDUCED_COST_TOL,
                VarState::Basic(_) => unreachable!(),
            };
            if !improving {
                continue;
            }
            if self.bland {
                return Some(j);
            }
            let mag = d.abs();
            match best {
                Some((m, _)) if m >= mag => {}
                _ => best = Some((mag, j)),
            }
        }
        best.map(|(_, j)| j)
    }

    fn pivot_loop(&mut self) -> PivotOutcome {
        loop {
            if self.iterations >= self.max_iters {
                return PivotOutcome::IterationLimit;
            }
            let due_refactor =
                self.iterations > 0 && self.iterations.is_multiple_of(REFACTOR_EVERY);
            if due_refactor && self.nrows > 0 && !self.refactorize() {
                return PivotOutcome::SingularBasis;
            }
            let pi = self.duals();
            let entering = match self.price(&pi) {
                Some(j) => j,
                None => return PivotOutcome::Optimal,
            };
            let sigma = match self.state[entering] {
                VarState::AtLower => 1.0,
                VarState::AtUpper => -1.0,
                VarState::Basic(_) => unreachable!(),
            };
            let r = self.nrows;
            let col = self.col(entering);
            let mut w = vec![0.0; r];
            for pos in 0..r {
                let mut acc = 0.0;
                for row in 0..r {
                    acc += self.binv[pos * r + row] * col[row];
                }
                w[pos] = acc;
            }

            // Ratio test: the entering variable moves by delta >= 0 toward
            // its opposite bound; each basic variable moves at rate
            // -sigma*w and must stay inside its own bounds.
            let span = self.upper[entering] - self.lower[entering];
            let mut best_delta = span; // may be +inf
            let mut leaving: Option<(usize, bool)> = None; // (basis pos, hits_upper)
            for pos in 0..r {
                let rate = -sigma * w[pos];
                let var = self.basis[pos];
                let (cand, hits_upper) = if rate < -PIVOT_TOL {
                    ((self.xb[pos] - self.lower[var]) / -rate, false)
                } else if rate > PIVOT_TOL {
                    if self.upper[var].is_infinite() {
                        continue;
                    }
                    ((self.upper[var] - self.xb[pos]) / rate, true)
                } else {
                    continue;
                };
                let cand = cand.max(0.0);
                let replace = if cand < best_delta - DEGENERATE_STEP {
                    true
                } else if cand <= best_delta + DEGENERATE_STEP {
                    match leaving {
                        Some((prev_pos, _)) => self.basis[pos] < self.basis[prev_pos],
                        None => best_delta.is_infinite(),
                    }
                } else {
                    false
                };
                if replace {
                    best_delta = cand.min(best_delta);
                    leaving = Some((pos, hits_upper));
                }
            }

            if best_delta.is_infinite() {
                return PivotOutcome::Unbounded;
            }
            let delta = best_delta.max(0.0);

            for pos in 0..r {
                self.xb[pos] -= sigma * delta * w[pos];
            }
            match leaving {
                None => {
                    // Bound flip: the entering variable crosses its span.
                    self.state[entering] = match self.state[entering] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        VarState::Basic(_) => unreachable!(),
                    };
                }
                Some((pos, hits_upper)) => {
                    let leaving_var = self.basis[pos];
                    let piv = w[pos];
                    if piv.abs() < PIVOT_TOL {
                        return PivotOutcome::SingularBasis;
                    }
                    let entering_value = match self.state[entering] {
                        VarState::AtLower => self.lower[entering] + delta,
                        VarState::AtUpper => self.upper[entering] - delta,
                        VarState::Basic(_) => unreachable!(),
                    };
                    // Eta update of the explicit inverse.
                    for jcol in 0..r {
                        self.binv[pos * r + jcol] /= piv;
                    }
                    for i in 0..r {
                        if i == pos {
                            continue;
                        }
                        let f = w[i];
                        if f != 0.0 {
                            for jcol in 0..r {
                                self.binv[i * r + jcol] -= f * self.binv[pos * r + jcol];
                            }
                        }
                    }
                    self.basis[pos] = entering;
                    self.state[entering] = VarState::Basic(pos);
                    self.state[leaving_var] = if hits_upper {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.xb[pos] = entering_value;
                }
            }
            self.iterations += 1;
            if delta <= DEGENERATE_STEP {
                self.degenerate += 1;
                if self.degenerate >= BLAND_TRIGGER {
                    self.bland = true;
                }
            }
        }
    }

    /// Swap basic artificials for structural or slack columns where
    /// possible, so phase 2 starts from a basis that mentions them only for
    /// genuinely redundant rows.
    fn drive_out_artificials(&mut self) {
        let r = self.nrows;
        for pos in 0..r {
            if self.basis[pos] < self.art_start {
                continue;
            }
            let mut chosen = None;
            for j in 0..self.art_start {
                if matches!(self.state[j], VarState::Basic(_)) {
                    continue;
                }
                let col = self.col(j);
                let mut w_pos = 0.0;
                for row in 0..r {
                    w_pos += self.binv[pos * r + row] * col[row];
                }
                if w_pos.abs() > 1e-7 {
                    chosen = Some((j, w_pos));
                    break;
                }
            }
            let Some((j, _)) = chosen else { continue };
            let col = self.col(j).to_vec();
            let mut w = vec![0.0; r];
            for p in 0..r {
                let mut acc = 0.0;
                for row in 0..r {
                    acc += self.binv[p * r + row] * col[row];
                }
                w[p] = acc;
            }
            let piv = w[pos];
            for jcol in 0..r {
                self.binv[pos * r + jcol] /= piv;
            }
            for i in 0..r {
                if i == pos {
                    continue;
                }
                let f = w[i];
                if f != 0.0 {
                    for jcol in 0..r {
                        self.binv[i * r + jcol] -= f * self.binv[pos * r + jcol];
                    }
                }
            }
            let art = self.basis[pos];
            self.basis[pos] = j;
            let value = self.var_value(j);
            self.state[j] = VarState::Basic(pos);
            self.state[art] = VarState::AtLower;
            self.xb[pos] = value;
        }
        self.recompute_basic_values();
    }
}

/// Solve a bounded-variable linear program with at most `max_iters` simplex
/// pivots across both phases.
pub fn solve_lp(problem: &LpProblem, max_iters: usize) -> LpSolution {
    // Crossed bounds make the variable's domain empty.
    if problem
        .var_lower
        .iter()
        .zip(&problem.var_upper)
        .any(|(l, u)| l > u)
    {
        return LpSolution {
            status: LpStatus::Infeasible,
            values: Vec::new(),
            objective: f64::INFINITY,
            iterations: 0,
        };
    }
    let nrows = problem.constraints.len();
    let nstruct = problem.num_vars;
    let nslack = problem
        .constraints
        .iter()
        .filter(|c| c.relation != Relation::Eq)
        .count();
    let ncols = nstruct + nslack + nrows;
    let art_start = nstruct + nslack;

    let mut cols = vec![0.0; ncols * nrows];
    let mut lower = vec![0.0; ncols];
    let mut upper = vec![f64::INFINITY; ncols];
    let mut rhs = vec![0.0; nrows];

    lower[..nstruct].copy_from_slice(&problem.var_lower);
    upper[..nstruct].copy_from_slice(&problem.var_upper);

    let mut slack_idx = nstruct;
    for (i, con) in problem.constraints.iter().enumerate() {
        rhs[i] = con.rhs;
        for &(var, coef) in &con.coeffs {
            debug_assert!(var < nstruct, "constraint references unknown variable");
            cols[var * nrows + i] += coef;
        }
        match con.relation {
            Relation::Le => {
                cols[slack_idx * nrows + i] = 1.0;
                slack_idx += 1;
            }
            Relation::Ge => {
                cols[slack_idx * nrows + i] = -1.0;
                slack_idx += 1;
            }
            Relation::Eq => {}
        }
    }

    // Start everything nonbasic at its lower bound and give each row an
    // artificial column signed to make the starting basis feasible.
    let mut state = vec![VarState::AtLower; ncols];
    let mut residual = rhs.clone();
    for j in 0..art_start {
        let v = lower[j];
        if v != 0.0 {
            for row in 0..nrows {
                residual[row] -= cols[j * nrows + row] * v;
            }
        }
    }
    let mut basis = Vec::with_capacity(nrows);
    let mut xb = vec![0.0; nrows];
    let mut binv = vec![0.0; nrows * nrows];
    for i in 0..nrows {
        let sign = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
        let art = art_start + i;
        cols[art * nrows + i] = sign;
        basis.push(art);
        state[art] = VarState::Basic(i);
        xb[i] = residual[i].abs();
        binv[i * nrows + i] = sign;
    }

    // Phase 1: minimize the sum of artificial values.
    let mut cost = vec![0.0; ncols];
    for j in art_start..ncols {
        cost[j] = 1.0;
    }

    let mut ws = Workspace {
        nrows,
        ncols,
        art_start,
        cols,
        lower,
        upper,
        rhs,
        cost,
        basis,
        state,
        binv,
        xb,
        iterations: 0,
        max_iters,
        degenerate: 0,
        bland: false,
    };

    let infeasible = |iterations| LpSolution {
        status: LpStatus::Infeasible,
        values: Vec::new(),
        objective: f64::INFINITY,
        iterations,
    };
    let limit = |iterations| LpSolution {
        status: LpStatus::IterationLimit,
        values: Vec::new(),
        objective: f64::NAN,
        iterations,
    };

    if nrows > 0 {
        match ws.pivot_loop() {
            PivotOutcome::Optimal => {}
            // Phase 1 minimizes a sum of nonnegative variables, so an
            // unbounded outcome can only mean numerical breakdown.
            PivotOutcome::Unbounded
            | PivotOutcome::IterationLimit
            | PivotOutcome::SingularBasis => return limit(ws.iterations),
        }
        let phase1: f64 = (ws.art_start..ws.ncols).map(|j| ws.var_value(j)).sum();
        if phase1 > ROW_TOL {
            return infeasible(ws.iterations);
        }
        ws.drive_out_artificials();
    }

    // Phase 2: real costs, artificials pinned at zero.
    for j in 0..ws.ncols {
        ws.cost[j] = if j < nstruct {
            problem.objective[j]
        } else {
            0.0
        };
    }
    for j in ws.art_start..ws.ncols {
        ws.upper[j] = 0.0;
        ws.lower[j] = 0.0;
    }
    ws.degenerate = 0;
    ws.bland = false;

    match ws.pivot_loop() {
        PivotOutcome::Optimal => {}
        PivotOutcome::Unbounded => {
            return LpSolution {
                status: LpStatus::Unbounded,
                values: Vec::new(),
                objective: f64::NEG_INFINITY,
                iterations: ws.iterations,
            }
        }
        PivotOutcome::IterationLimit | PivotOutcome::SingularBasis => return limit(ws.iterations),
    }

    if ws.nrows > 0 && !ws.refactorize() {
        return limit(ws.iterations);
    }
    let mut values = Vec::with_capacity(nstruct);
    for j in 0..nstruct {
        values.push(ws.var_value(j));
    }
    let objective = problem.objective_value(&values);
    LpSolution {
        status: LpStatus::Optimal,
        values,
        objective,
        iterations: ws.iterations,
    }
}
