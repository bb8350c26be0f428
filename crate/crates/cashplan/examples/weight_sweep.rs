//! Sweep the cost/risk weight on the shipped reference problem and print
//! the resulting cost-risk trade-off.
//!
//! Run with: `cargo run --release --example weight_sweep`

use std::path::PathBuf;

use cashplan::cli::load_problem;
use cashplan::engine::{solve_risk, BnbOptions};
use cashplan::model::RiskParams;

fn main() {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/example_s4.json");
    let instance = load_problem(&fixture).expect("fixture loads");

    println!(
        "{:>6} {:>12} {:>12} {:>12}",
        "w2", "objective", "total cost", "total dev"
    );
    for w2 in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let params = RiskParams {
            cost_ref: 3000.0,
            cost_budget: 5000.0,
            risk_budget: 5000.0,
            cost_weight: 1.0 - w2,
            risk_weight: w2,
        };
        let solution = solve_risk(&instance, &params, &BnbOptions::default()).expect("solve");
        println!(
            "{:>6} {:>12.6} {:>12.2} {:>12.2}",
            w2,
            solution.objective.unwrap_or(f64::NAN),
            solution.period_costs.iter().sum::<f64>(),
            solution.deviations.iter().sum::<f64>(),
        );
    }
}
