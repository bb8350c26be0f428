//! Optimal cash management policies for systems of multiple bank accounts.
//!
//! A cash management system is a set of bank accounts plus the set of
//! allowed transfers between them. Given per-transfer fixed and variable
//! costs, per-account holding costs, minimum balances, and a matrix of net
//! cash-flow forecasts over a planning horizon, this crate computes the
//! transfer policy that minimizes either total cost or a weighted
//! combination of cost and Conditional Cost-at-Risk.
//!
//! The optimization problem is a fixed-charge linear program. It is solved
//! exactly by an embedded mixed-integer solver: a bounded-variable two-phase
//! primal simplex ([`simplex`]) under branch-and-bound over the transfer
//! indicator variables ([`engine`]). A brute-force enumeration reference
//! optimizer ([`oracle`]) backs the test suite.
//!
//! Module map:
//! - [`model`] — domain types, validation, balance propagation, policy
//!   evaluation, risk metric.
//! - [`formulate`] — translation of a problem instance into the solver IR.
//! - [`simplex`] — the LP solver.
//! - [`engine`] — branch-and-bound plus the `solve_cost` / `solve_risk`
//!   facade.
//! - [`oracle`] — exhaustive reference optimizer for small instances.
//! - [`cli`] — problem/solution file formats and the command-line front end.

pub mod cli;
pub mod engine;
pub mod formulate;
pub mod model;
pub mod oracle;
pub mod simplex;

pub use engine::{solve_cost, solve_risk, BnbOptions};
pub use model::{
    BalancePath, CashSystem, CostStructure, Policy, ProblemInstance, RiskParams, Solution,
    SolveStatus,
};
