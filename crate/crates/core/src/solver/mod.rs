//! Solving models: the backend contract, a built-in branch-and-bound backend,
//! an external-process backend speaking the LP file format, and the exact
//! bilevel oracle.

pub mod lp;
pub mod oracle;
pub mod simplex;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read as _;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::model::{ModelIr, Sense, VarKind};

pub use lp::{read_lp, write_lp, LpError};
pub use oracle::{oracle_solve, OracleError, OracleResult, DEFAULT_ORACLE_CAP};

/// Absolute tolerance of the independent feasibility check.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    BudgetExhausted,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::BudgetExhausted => "budget-exhausted",
        }
    }

    pub fn parse(s: &str) -> Option<SolveStatus> {
        [
            SolveStatus::Optimal,
            SolveStatus::Feasible,
            SolveStatus::Infeasible,
            SolveStatus::BudgetExhausted,
        ]
        .into_iter()
        .find(|st| st.label() == s.trim())
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Incumbent objective, absent without an incumbent.
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    /// `(best_bound - objective) / max(1e-10, |best_bound|)`; infinite
    /// without an incumbent or bound.
    pub gap: f64,
    pub assignment: BTreeMap<String, f64>,
    pub wall_time: Duration,
}

pub fn relative_gap(objective: Option<f64>, best_bound: Option<f64>) -> f64 {
    match (objective, best_bound) {
        (Some(o), Some(b)) => ((b - o) / b.abs().max(1e-10)).max(0.0),
        _ => f64::INFINITY,
    }
}

impl SolveResult {
    fn without_incumbent(status: SolveStatus, wall_time: Duration) -> Self {
        SolveResult {
            status,
            objective: None,
            best_bound: None,
            gap: f64::INFINITY,
            assignment: BTreeMap::new(),
            wall_time,
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.assignment.get(name).copied()
    }

    pub fn has_incumbent(&self) -> bool {
        self.objective.is_some()
    }

    /// Values in the model's variable order; missing names read as zero.
    pub fn values_for(&self, model: &ModelIr) -> Vec<f64> {
        model
            .variables()
            .iter()
            .map(|v| self.value(&v.name).unwrap_or(0.0))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver configuration error: {0}")]
    Configuration(String),
    #[error("solver failed: {message}\n{output}")]
    Backend { message: String, output: String },
    #[error("model is unbounded")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("solution fails verification: {}", .0.join("; "))]
    Verification(Vec<String>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A MILP engine. `solve` may stop at `budget` and report its incumbent.
pub trait MilpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, model: &ModelIr, budget: Duration) -> Result<SolveResult, SolverError>;
}

/// In-process branch and bound (the `microlp` crate).
#[derive(Debug, Clone, Default)]
pub struct BuiltinBackend {
    /// Optional node cap, a deterministic alternative to the time budget.
    pub node_limit: Option<u64>,
}

impl MilpBackend for BuiltinBackend {
    fn name(&self) -> &str {
        "builtin"
    }

    fn solve(&self, model: &ModelIr, budget: Duration) -> Result<SolveResult, SolverError> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOptions, SolveOutcome};
        let start = Instant::now();
        let mut objective = vec![0.0; model.variables().len()];
        for &(c, v) in model.objective() {
            objective[v] += c.to_f64();
        }
        let mut problem = Problem::new(OptimizationDirection::Maximize);
        // microlp misclassifies some bounded models with free columns as
        // unbounded, so a variable without a lower bound becomes `v+ - v-`.
        let mut parts: Vec<Vec<(microlp::Variable, f64)>> = Vec::with_capacity(objective.len());
        let mut upper_rows = Vec::new();
        for (v, &obj) in model.variables().iter().zip(&objective) {
            let hi = v.upper.map_or(f64::INFINITY, |u| u.to_f64());
            match (v.kind, v.lower) {
                (VarKind::Binary, _) => parts.push(vec![(problem.add_binary_var(obj), 1.0)]),
                (VarKind::Continuous, Some(lo)) => parts.push(vec![(problem.add_var(obj, (lo.to_f64(), hi)), 1.0)]),
                (VarKind::Continuous, None) => {
                    let plus = problem.add_var(obj, (0.0, f64::INFINITY));
                    let minus = problem.add_var(-obj, (0.0, f64::INFINITY));
                    if hi.is_finite() {
                        upper_rows.push(([(plus, 1.0), (minus, -1.0)], hi));
                    }
                    parts.push(vec![(plus, 1.0), (minus, -1.0)]);
                }
            }
        }
        for (terms, hi) in upper_rows {
            problem.add_constraint(terms, ComparisonOp::Le, hi);
        }
        for row in model.constraints() {
            let terms: Vec<(microlp::Variable, f64)> = row
                .terms
                .iter()
                .flat_map(|&(c, v)| parts[v].iter().map(move |&(var, sign)| (var, sign * c.to_f64())))
                .collect();
            let op = match row.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Eq => ComparisonOp::Eq,
                Sense::Ge => ComparisonOp::Ge,
            };
            problem.add_constraint(terms, op, row.rhs.to_f64());
        }
        let mut options = SolveOptions::default();
        options.time_limit = Some(budget.saturating_sub(start.elapsed()).max(Duration::from_millis(1)));
        options.node_limit = self.node_limit;
        let outcome = match problem.solve_with(options) {
            Ok(o) => o,
            Err(microlp::Error::Infeasible) => {
                return Ok(SolveResult::without_incumbent(SolveStatus::Infeasible, start.elapsed()))
            }
            Err(microlp::Error::Unbounded) => return Err(SolverError::Unbounded),
            Err(e) => {
                return Err(SolverError::Backend {
                    message: "builtin backend error".into(),
                    output: e.to_string(),
                })
            }
        };
        let solution = match outcome {
            SolveOutcome::Solution(s) => s,
            SolveOutcome::Interrupted(i) => {
                let mut r = SolveResult::without_incumbent(SolveStatus::BudgetExhausted, start.elapsed());
                r.best_bound = i.stats().best_bound;
                return Ok(r);
            }
        };
        let optimal = solution.status() == microlp::SolutionStatus::Optimal;
        let value = solution.objective();
        let best_bound = if optimal {
            Some(value)
        } else {
            solution.stats().best_bound.or(Some(value))
        };
        let assignment = model
            .variables()
            .iter()
            .zip(&parts)
            .map(|(v, terms)| {
                let value = terms.iter().map(|&(var, sign)| sign * solution.var_value_raw(var)).sum();
                (v.name.clone(), value)
            })
            .collect();
        let status = if optimal {
            SolveStatus::Optimal
        } else {
            SolveStatus::BudgetExhausted
        };
        Ok(SolveResult {
            status,
            objective: Some(value),
            best_bound,
            gap: if optimal { 0.0 } else { relative_gap(Some(value), best_bound) },
            assignment,
            wall_time: start.elapsed(),
        })
    }
}

/// Runs a shell command template per solve. `{lp}` and `{sol}` are replaced
/// with the model and solution file paths and `{budget}` with the budget in
/// whole seconds.
///
/// The solution file has one `key value` pair per line: `status` (one of
/// `optimal`, `feasible`, `infeasible`, `budget-exhausted`, `unbounded`),
/// optionally `objective` and `bound`, then one line per variable.
#[derive(Debug, Clone)]
pub struct ExternalBackend {
    pub command: String,
}

impl ExternalBackend {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalBackend {
            command: command.into(),
        }
    }
}

/// Parses the `key value` solution format.
pub fn parse_solution(text: &str, wall_time: Duration) -> Result<SolveResult, SolverError> {
    let bad = |msg: String| SolverError::Backend {
        message: format!("malformed solution file: {msg}"),
        output: text.chars().take(2000).collect(),
    };
    let mut status = None;
    let mut objective = None;
    let mut bound = None;
    let mut assignment = BTreeMap::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (key, value) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| bad(format!("line `{line}` is not `name value`")))?;
        let key = key.trim();
        match key {
            "status" => {
                if value == "unbounded" {
                    return Err(SolverError::Unbounded);
                }
                status = Some(SolveStatus::parse(value).ok_or_else(|| bad(format!("unknown status `{value}`")))?);
            }
            "objective" | "bound" => {
                let v: f64 = value.parse().map_err(|_| bad(format!("bad number `{value}`")))?;
                if key == "objective" {
                    objective = Some(v);
                } else {
                    bound = Some(v);
                }
            }
            name => {
                let v: f64 = value.parse().map_err(|_| bad(format!("bad number `{value}`")))?;
                assignment.insert(name.to_string(), v);
            }
        }
    }
    let status = status.ok_or_else(|| bad("missing status line".into()))?;
    let best_bound = match status {
        SolveStatus::Optimal => bound.or(objective),
        _ => bound,
    };
    let gap = if status == SolveStatus::Optimal {
        0.0
    } else {
        relative_gap(objective, best_bound)
    };
    Ok(SolveResult {
        status,
        objective,
        best_bound,
        gap,
        assignment,
        wall_time,
    })
}

/// Writes a result in the format [`parse_solution`] reads.
pub fn format_solution(result: &SolveResult) -> String {
    let mut out = format!("status {}\n", result.status);
    if let Some(o) = result.objective {
        out.push_str(&format!("objective {o}\n"));
    }
    if let Some(b) = result.best_bound {
        out.push_str(&format!("bound {b}\n"));
    }
    for (name, v) in &result.assignment {
        out.push_str(&format!("{name} {v}\n"));
    }
    out
}

impl MilpBackend for ExternalBackend {
    fn name(&self) -> &str {
        &self.command
    }

    fn solve(&self, model: &ModelIr, budget: Duration) -> Result<SolveResult, SolverError> {
        let start = Instant::now();
        let dir = tempfile::tempdir()?;
        let lp_path = dir.path().join("model.lp");
        let sol_path = dir.path().join("model.sol");
        std::fs::write(&lp_path, write_lp(model)?)?;
        let command = self
            .command
            .replace("{lp}", &lp_path.to_string_lossy())
            .replace("{sol}", &sol_path.to_string_lossy())
            .replace("{budget}", &budget.as_secs().max(1).to_string());
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SolverError::Configuration(format!("cannot start `sh`: {e}")))?;
        // Drain output on threads so a chatty solver cannot block on a full pipe.
        let mut stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let out_thread = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let err_thread = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        // A grace period past the budget lets the solver write its incumbent.
        let deadline = start + budget + Duration::from_secs(5);
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let output = format!(
            "{}{}",
            out_thread.join().unwrap_or_default(),
            err_thread.join().unwrap_or_default()
        );
        let Some(status) = status else {
            return Ok(SolveResult::without_incumbent(SolveStatus::BudgetExhausted, start.elapsed()));
        };
        match status.code() {
            Some(0) => {}
            Some(127) => {
                return Err(SolverError::Configuration(format!(
                    "solver command not found: `{}`\n{output}",
                    self.command
                )))
            }
            _ => {
                return Err(SolverError::Backend {
                    message: format!("`{command}` exited with {status}"),
                    output,
                })
            }
        }
        let text = std::fs::read_to_string(&sol_path).map_err(|e| SolverError::Backend {
            message: format!("no solution file: {e}"),
            output: output.clone(),
        })?;
        parse_solution(&text, start.elapsed())
    }
}

/// Solves with `backend` and checks the returned assignment against the
/// model independently. A zero budget returns `budget-exhausted` without
/// calling the backend.
pub fn solve(model: &ModelIr, budget: Duration, backend: &dyn MilpBackend) -> Result<SolveResult, SolverError> {
    if budget.is_zero() {
        return Ok(SolveResult::without_incumbent(SolveStatus::BudgetExhausted, Duration::ZERO));
    }
    let result = backend.solve(model, budget)?;
    if let Some(objective) = result.objective {
        verify(model, &result, objective)?;
    }
    Ok(result)
}

fn verify(model: &ModelIr, result: &SolveResult, objective: f64) -> Result<(), SolverError> {
    let missing: Vec<String> = model
        .variables()
        .iter()
        .filter(|v| !result.assignment.contains_key(&v.name))
        .map(|v| format!("{} missing from the solution", v.name))
        .collect();
    if !missing.is_empty() {
        return Err(SolverError::Verification(missing));
    }
    let values = result.values_for(model);
    let mut problems = model.violations(&values, VERIFY_TOL);
    let recomputed = model.objective_value(&values);
    if (recomputed - objective).abs() > VERIFY_TOL * objective.abs().max(1.0) {
        problems.push(format!("reported objective {objective} but assignment gives {recomputed}"));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(SolverError::Verification(problems))
    }
}
