//! Problem and solution file formats plus the command-line front end.
//!
//! Problem files are JSON documents describing accounts, transactions with
//! their costs, balance floors, initial balances, and a forecast matrix
//! (inline or in a separate CSV file). The incidence matrix is synthesized
//! from each transaction's `from`/`to` labels. Solution documents,
//! policy/balance CSV exports, and plot-data exports all carry a
//! `format_version` field.
//!
//! Exit codes: 0 optimal, 2 infeasible, 3 invalid input, 4 solver limit.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{solve_cost, solve_risk, BnbOptions, EngineError};
use crate::model::{
    describe, CashSystem, CostStructure, ProblemInstance, RiskParams, Solution, SolveStatus,
};

pub const FORMAT_VERSION: &str = "1";

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INVALID_INPUT: i32 = 3;
pub const EXIT_SOLVER_LIMIT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// One allowed transfer between two accounts, with its cost coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionSpec {
    pub label: String,
    pub from: String,
    pub to: String,
    pub fixed_cost: f64,
    pub variable_cost: f64,
}

/// Forecast matrix: inline rows, or a path to a CSV file with a header row
/// of account labels (resolved relative to the problem file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ForecastSpec {
    Inline(Vec<Vec<f64>>),
    File { path: String },
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(default = "format_version")]
    pub format_version: String,
    pub accounts: Vec<String>,
    pub transactions: Vec<TransactionSpec>,
    pub holding_costs: BTreeMap<String, f64>,
    pub min_balance: BTreeMap<String, f64>,
    pub initial_balance: BTreeMap<String, f64>,
    pub horizon: usize,
    pub forecasts: ForecastSpec,
}

fn format_version() -> String {
    FORMAT_VERSION.to_string()
}

/// Load and validate a problem file.
pub fn load_problem(path: &Path) -> Result<ProblemInstance, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ProblemFile = serde_json::from_str(&text).map_err(|source| CliError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    problem_from_file(&file, base)
}

/// Resolve a parsed problem file into a validated instance.
pub fn problem_from_file(file: &ProblemFile, base_dir: &Path) -> Result<ProblemInstance, CliError> {
    let accounts = &file.accounts;
    let account_index = |label: &str| accounts.iter().position(|a| a == label);

    for spec in &file.transactions {
        for endpoint in [&spec.from, &spec.to] {
            if account_index(endpoint).is_none() {
                return Err(CliError::Invalid(format!(
                    "transaction \"{}\" references unknown account \"{endpoint}\"",
                    spec.label
                )));
            }
        }
        if spec.from == spec.to {
            return Err(CliError::Invalid(format!(
                "transaction \"{}\" has identical endpoints \"{}\"",
                spec.label, spec.from
            )));
        }
    }

    let vector_from_map = |name: &str, map: &BTreeMap<String, f64>| {
        for key in map.keys() {
            if account_index(key).is_none() {
                return Err(CliError::Invalid(format!(
                    "{name} references unknown account \"{key}\""
                )));
            }
        }
        accounts
            .iter()
            .map(|label| {
                map.get(label).copied().ok_or_else(|| {
                    CliError::Invalid(format!("{name} is missing account \"{label}\""))
                })
            })
            .collect::<Result<Vec<f64>, CliError>>()
    };
    let holding = vector_from_map("holding_costs", &file.holding_costs)?;
    let min_balance = vector_from_map("min_balance", &file.min_balance)?;
    let initial_balance = vector_from_map("initial_balance", &file.initial_balance)?;

    let forecasts = match &file.forecasts {
        ForecastSpec::Inline(rows) => rows.clone(),
        ForecastSpec::File { path } => load_forecast_csv(&base_dir.join(path), accounts)?,
    };
    if forecasts.len() != file.horizon {
        return Err(CliError::Invalid(format!(
            "forecast matrix has {} rows but the horizon is {}",
            forecasts.len(),
            file.horizon
        )));
    }
    for (t, row) in forecasts.iter().enumerate() {
        if row.len() != accounts.len() {
            return Err(CliError::Invalid(format!(
                "forecast row {} has {} entries, expected one per account ({})",
                t + 1,
                row.len(),
                accounts.len()
            )));
        }
    }

    let incidence = file
        .transactions
        .iter()
        .map(|spec| {
            let mut row = vec![0.0; accounts.len()];
            row[account_index(&spec.from).expect("validated above")] = -1.0;
            row[account_index(&spec.to).expect("validated above")] = 1.0;
            row
        })
        .collect();

    let instance = ProblemInstance {
        system: CashSystem {
            account_labels: accounts.clone(),
            transaction_labels: file.transactions.iter().map(|s| s.label.clone()).collect(),
            incidence,
        },
        costs: CostStructure {
            fixed: file.transactions.iter().map(|s| s.fixed_cost).collect(),
            variable: file.transactions.iter().map(|s| s.variable_cost).collect(),
            holding,
        },
        min_balance,
        initial_balance,
        forecasts,
        horizon: file.horizon,
    };
    instance
        .validate_structure()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(instance)
}

fn load_forecast_csv(path: &Path, accounts: &[String]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| CliError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| CliError::Csv {
            path: path.display().to_string(),
            source,
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    // Columns may come in any order but must cover exactly the accounts.
    let mut column_of = Vec::with_capacity(accounts.len());
    for label in accounts {
        match headers.iter().position(|h| h == label) {
            Some(c) => column_of.push(c),
            None => {
                return Err(CliError::Invalid(format!(
                    "forecast file {} has no column for account \"{label}\"",
                    path.display()
                )))
            }
        }
    }
    if headers.len() != accounts.len() {
        return Err(CliError::Invalid(format!(
            "forecast file {} has {} columns, expected one per account ({})",
            path.display(),
            headers.len(),
            accounts.len()
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|source| CliError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        let mut row = Vec::with_capacity(accounts.len());
        for &c in &column_of {
            let cell = record.get(c).unwrap_or("");
            let value: f64 = cell.trim().parse().map_err(|_| {
                CliError::Invalid(format!(
                    "forecast file {} row {}: cannot parse \"{cell}\" as a number",
                    path.display(),
                    line + 1
                ))
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Serialize an instance back into the problem file schema with inline
/// forecasts. `load_problem(write_problem(x))` reproduces `x` exactly.
pub fn write_problem(instance: &ProblemInstance) -> ProblemFile {
    let system = &instance.system;
    let transactions = system
        .transaction_labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let (from, to) = system
                .endpoints(i)
                .expect("write_problem requires a structurally valid instance");
            TransactionSpec {
                label: label.clone(),
                from: system.account_labels[from].clone(),
                to: system.account_labels[to].clone(),
                fixed_cost: instance.costs.fixed[i],
                variable_cost: instance.costs.variable[i],
            }
        })
        .collect();
    let map_of = |values: &[f64]| {
        system
            .account_labels
            .iter()
            .cloned()
            .zip(values.iter().copied())
            .collect::<BTreeMap<String, f64>>()
    };
    ProblemFile {
        format_version: FORMAT_VERSION.to_string(),
        accounts: system.account_labels.clone(),
        transactions,
        holding_costs: map_of(&instance.costs.holding),
        min_balance: map_of(&instance.min_balance),
        initial_balance: map_of(&instance.initial_balance),
        horizon: instance.horizon,
        forecasts: ForecastSpec::Inline(instance.forecasts.clone()),
    }
}

/// A labeled matrix in a solution document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStatsDoc {
    pub nodes: usize,
    pub simplex_iterations: u64,
    pub wall_time_ms: f64,
}

/// On-disk solve result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub format_version: String,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub period_costs: Vec<f64>,
    pub deviations: Vec<f64>,
    pub policy: Option<MatrixDoc>,
    pub balances: Option<MatrixDoc>,
    pub solver: SolverStatsDoc,
}

/// Assemble the solution document for an instance/solution pair.
pub fn solution_document(
    instance: &ProblemInstance,
    solution: &Solution,
    wall_time_ms: f64,
) -> SolutionDocument {
    SolutionDocument {
        format_version: FORMAT_VERSION.to_string(),
        status: solution.status,
        objective: solution.objective,
        period_costs: solution.period_costs.clone(),
        deviations: solution.deviations.clone(),
        policy: solution.policy.as_ref().map(|p| MatrixDoc {
            columns: instance.system.transaction_labels.clone(),
            rows: p.actions.clone(),
        }),
        balances: solution.balances.as_ref().map(|b| MatrixDoc {
            columns: instance.system.account_labels.clone(),
            rows: b.balances.clone(),
        }),
        solver: SolverStatsDoc {
            nodes: solution.stats.nodes,
            simplex_iterations: solution.stats.simplex_iterations,
            wall_time_ms,
        },
    }
}

/// Per-account balance series keyed by period (period 0 is the initial
/// balance), ready for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub format_version: String,
    pub periods: Vec<usize>,
    pub series: BTreeMap<String, Vec<f64>>,
}

pub fn plot_data(instance: &ProblemInstance, solution: &Solution) -> Option<PlotData> {
    let balances = solution.balances.as_ref()?;
    let mut series = BTreeMap::new();
    for (j, label) in instance.system.account_labels.iter().enumerate() {
        let mut values = vec![instance.initial_balance[j]];
        values.extend(balances.balances.iter().map(|row| row[j]));
        series.insert(label.clone(), values);
    }
    Some(PlotData {
        format_version: FORMAT_VERSION.to_string(),
        periods: (0..=instance.horizon).collect(),
        series,
    })
}

/// Write a labeled matrix as CSV: one header row of labels, then the
/// matrix rows. Numbers use the shortest round-trippable representation,
/// so re-parsing reproduces the matrix exactly.
pub fn write_matrix_csv(
    path: &Path,
    columns: &[String],
    rows: &[Vec<f64>],
) -> Result<(), CliError> {
    let to_io = |source: csv::Error| match source.into_kind() {
        csv::ErrorKind::Io(io) => CliError::Io {
            path: path.display().to_string(),
            source: io,
        },
        other => CliError::Invalid(format!("cannot write {}: {other:?}", path.display())),
    };
    let mut writer = csv::Writer::from_path(path).map_err(to_io)?;
    writer.write_record(columns).map_err(to_io)?;
    for row in rows {
        writer
            .write_record(row.iter().map(|v| format!("{v}")))
            .map_err(to_io)?;
    }
    writer.flush().map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[derive(Parser, Debug)]
#[command(
    name = "cashplan",
    version,
    about = "Optimal cash management policies for multiple bank accounts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write the solution document here instead of stdout.
    #[arg(short = 'o', long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Export the policy matrix as CSV (transaction labels as header).
    #[arg(long, value_name = "FILE")]
    policy_csv: Option<PathBuf>,
    /// Export the balance matrix as CSV (account labels as header).
    #[arg(long, value_name = "FILE")]
    balance_csv: Option<PathBuf>,
    /// Export per-account balance series keyed by period, for plotting.
    #[arg(long, value_name = "FILE")]
    plot_data: Option<PathBuf>,
    /// Override the branch-and-bound node budget.
    #[arg(long, value_name = "N")]
    max_nodes: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a human-readable description of a problem file.
    Describe {
        /// Problem file to describe.
        #[arg(short = 'p', long, value_name = "FILE")]
        problem: PathBuf,
    },
    /// Compute the cost-minimal policy.
    SolveCost {
        /// Problem file to solve.
        #[arg(short = 'p', long, value_name = "FILE")]
        problem: PathBuf,
        #[command(flatten)]
        outputs: OutputArgs,
    },
    /// Compute the policy minimizing weighted cost and risk.
    SolveRisk {
        /// Problem file to solve.
        #[arg(short = 'p', long, value_name = "FILE")]
        problem: PathBuf,
        /// Cost reference: per-period costs above this level count as risk.
        #[arg(long = "c0", value_name = "N")]
        cost_ref: f64,
        /// Budget on total cost over the horizon.
        #[arg(long = "cmax", value_name = "N")]
        cost_budget: f64,
        /// Budget on total cost deviation above the reference.
        #[arg(long = "rmax", value_name = "N")]
        risk_budget: f64,
        /// Weight on normalized cost (must sum to 1 with --w2).
        #[arg(long = "w1", value_name = "N")]
        cost_weight: f64,
        /// Weight on normalized risk (must sum to 1 with --w1).
        #[arg(long = "w2", value_name = "N")]
        risk_weight: f64,
        #[command(flatten)]
        outputs: OutputArgs,
    },
}

/// Run the command line and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                EXIT_INVALID_INPUT
            } else {
                0
            };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_INVALID_INPUT
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Describe { problem } => {
            let instance = load_problem(&problem)?;
            print!("{}", describe(&instance));
            Ok(EXIT_OPTIMAL)
        }
        Command::SolveCost { problem, outputs } => {
            let instance = load_problem(&problem)?;
            let options = bnb_options(&outputs);
            let started = Instant::now();
            let solution = solve_cost(&instance, &options)?;
            finish(&instance, &solution, &outputs, started)
        }
        Command::SolveRisk {
            problem,
            cost_ref,
            cost_budget,
            risk_budget,
            cost_weight,
            risk_weight,
            outputs,
        } => {
            let instance = load_problem(&problem)?;
            let params = RiskParams {
                cost_ref,
                cost_budget,
                risk_budget,
                cost_weight,
                risk_weight,
            };
            params
                .validate()
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            let options = bnb_options(&outputs);
            let started = Instant::now();
            let solution = solve_risk(&instance, &params, &options)?;
            finish(&instance, &solution, &outputs, started)
        }
    }
}

fn bnb_options(outputs: &OutputArgs) -> BnbOptions {
    let mut options = BnbOptions::default();
    if let Some(max_nodes) = outputs.max_nodes {
        options.max_nodes = max_nodes;
    }
    options
}

fn finish(
    instance: &ProblemInstance,
    solution: &Solution,
    outputs: &OutputArgs,
    started: Instant,
) -> Result<i32, CliError> {
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    let document = solution_document(instance, solution, wall_time_ms);
    let json = serde_json::to_string_pretty(&document).expect("document serialization");
    match &outputs.out {
        Some(path) => std::fs::write(path, json + "\n").map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => println!("{json}"),
    }
    if let Some(path) = &outputs.policy_csv {
        if let Some(doc) = &document.policy {
            write_matrix_csv(path, &doc.columns, &doc.rows)?;
        }
    }
    if let Some(path) = &outputs.balance_csv {
        if let Some(doc) = &document.balances {
            write_matrix_csv(path, &doc.columns, &doc.rows)?;
        }
    }
    if let Some(path) = &outputs.plot_data {
        if let Some(data) = plot_data(instance, solution) {
            let json = serde_json::to_string_pretty(&data).expect("plot data serialization");
            std::fs::write(path, json + "\n").map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
    }
    Ok(match solution.status {
        SolveStatus::Optimal => EXIT_OPTIMAL,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::IterationLimit => EXIT_SOLVER_LIMIT,
    })
}
