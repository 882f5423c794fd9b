//! Linear and mixed-integer programming layer.
//!
//! Models are held as a [`CanonicalProgram`] (minimize c'x + offset over
//! bounded variables and linear rows). Solving goes through one of two
//! backends: the embedded bounded-variable simplex plus branch and bound, or
//! an external executable speaking an MPS-in, solution-out protocol. Every
//! solution claimed optimal or feasible is re-checked here against all rows
//! at a fixed tolerance before it is returned.
//!
//! Rows flagged `lazy` are not given to the simplex up front; the driver adds
//! them in rounds as they are violated. That keeps masters small for models
//! with large scenario families where only a few rows can bind at optimum.

mod branch;
mod exec;
mod lptext;
mod mps;
mod simplex;

pub use lptext::write_lp_text;
pub use mps::{read_mps, write_mps};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for independent feasibility verification of returned solutions.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(&self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    /// Sorted by variable index, no duplicates, no zeros.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub lazy: bool,
}

#[derive(Debug, Clone, Default)]
pub struct CanonicalProgram {
    pub name: String,
    pub var_names: Vec<String>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub integer: Vec<bool>,
    pub obj: Vec<f64>,
    pub obj_offset: f64,
    pub rows: Vec<Row>,
}

impl CanonicalProgram {
    pub fn new(name: impl Into<String>) -> Self {
        CanonicalProgram { name: name.into(), ..Default::default() }
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, obj: f64, integer: bool) -> usize {
        self.var_names.push(name.into());
        self.lb.push(lb);
        self.ub.push(ub);
        self.obj.push(obj);
        self.integer.push(integer);
        self.var_names.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.push_row(name, terms, sense, rhs, false)
    }

    pub fn add_lazy_row(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.push_row(name, terms, sense, rhs, true)
    }

    fn push_row(&mut self, name: impl Into<String>, mut terms: Vec<(usize, f64)>, sense: Sense, rhs: f64, lazy: bool) -> usize {
        terms.sort_by_key(|&(j, _)| j);
        terms.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        terms.retain(|&(_, c)| c != 0.0);
        self.rows.push(Row { name: name.into(), terms, sense, rhs, lazy });
        self.rows.len() - 1
    }

    pub fn row_activity(&self, row: &Row, x: &[f64]) -> f64 {
        row.terms.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Signed violation of one row: positive means infeasible by that much.
    pub fn row_violation(&self, row: &Row, x: &[f64]) -> f64 {
        let a = self.row_activity(row, x);
        match row.sense {
            Sense::Le => a - row.rhs,
            Sense::Ge => row.rhs - a,
            Sense::Eq => (a - row.rhs).abs(),
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.obj_offset
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let n = self.n_vars();
        if self.lb.len() != n || self.ub.len() != n || self.obj.len() != n || self.integer.len() != n {
            return Err(SolveError::Invalid("inconsistent variable array lengths".into()));
        }
        for j in 0..n {
            if self.lb[j] > self.ub[j] + 1e-12 {
                return Err(SolveError::Invalid(format!("variable {} has lb > ub", self.var_names[j])));
            }
            if !self.obj[j].is_finite() {
                return Err(SolveError::Invalid(format!("variable {} has non-finite cost", self.var_names[j])));
            }
            if self.lb[j].is_nan() || self.ub[j].is_nan() {
                return Err(SolveError::Invalid(format!("variable {} has NaN bound", self.var_names[j])));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(SolveError::Invalid(format!("row {} has non-finite rhs", row.name)));
            }
            for &(j, c) in &row.terms {
                if j >= n {
                    return Err(SolveError::Invalid(format!("row {} references variable {}", row.name, j)));
                }
                if !c.is_finite() {
                    return Err(SolveError::Invalid(format!("row {} has non-finite coefficient", row.name)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Time or node limit hit; values hold the incumbent when one exists.
    Limit,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveStats {
    pub simplex_iterations: u64,
    pub nodes: u64,
    pub active_rows: usize,
    pub wall_s: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    /// Objective of `values` including the offset; +inf when no point exists.
    pub objective: f64,
    /// Proven lower bound on the optimum (equals objective when Optimal).
    pub bound: f64,
    /// Structural variable values; empty when no feasible point is known.
    pub values: Vec<f64>,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Embedded,
    /// Path to an executable invoked as `<path> model.mps out.sol`.
    Exec(String),
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "embedded" {
            Ok(Backend::Embedded)
        } else if let Some(path) = s.strip_prefix("exec:") {
            if path.is_empty() {
                Err("exec: needs a path".into())
            } else {
                Ok(Backend::Exec(path.into()))
            }
        } else {
            Err(format!("unknown backend '{s}' (use 'embedded' or 'exec:<path>')"))
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Embedded => write!(f, "embedded"),
            Backend::Exec(p) => write!(f, "exec:{p}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub backend: Backend,
    pub time_limit_s: f64,
    /// Relative branch-and-bound gap at which the search stops.
    pub mip_gap: f64,
    pub node_limit: u64,
    pub log: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            backend: Backend::Embedded,
            time_limit_s: 300.0,
            mip_gap: 1e-6,
            node_limit: 1_000_000,
            log: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("solution failed verification: {0}")]
    Verification(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Check x against every bound, every row (lazy included), and integrality.
/// Returns human-readable violation descriptions, empty when clean.
pub fn verify_solution(p: &CanonicalProgram, x: &[f64], tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    if x.len() != p.n_vars() {
        out.push(format!("value vector has {} entries, expected {}", x.len(), p.n_vars()));
        return out;
    }
    for j in 0..p.n_vars() {
        if !x[j].is_finite() {
            out.push(format!("{} is not finite", p.var_names[j]));
            continue;
        }
        if x[j] < p.lb[j] - tol {
            out.push(format!("{} = {} below lower bound {}", p.var_names[j], x[j], p.lb[j]));
        }
        if x[j] > p.ub[j] + tol {
            out.push(format!("{} = {} above upper bound {}", p.var_names[j], x[j], p.ub[j]));
        }
        if p.integer[j] && (x[j] - x[j].round()).abs() > tol {
            out.push(format!("{} = {} is not integral", p.var_names[j], x[j]));
        }
    }
    for row in &p.rows {
        let v = p.row_violation(row, x);
        let scale = 1.0 + row.rhs.abs();
        if v > tol * scale {
            out.push(format!("row {} violated by {v:.3e}", row.name));
        }
    }
    out
}

pub fn solve(p: &CanonicalProgram, opts: &SolveOptions) -> Result<Solution, SolveError> {
    p.validate()?;
    let start = std::time::Instant::now();
    let mut sol = match &opts.backend {
        Backend::Embedded => {
            if p.integer.iter().any(|&b| b) {
                branch::solve_mip(p, opts)?
            } else {
                simplex::solve_lp(p, opts)?
            }
        }
        Backend::Exec(cmd) => exec::solve(p, cmd, opts)?,
    };
    sol.stats.wall_s = start.elapsed().as_secs_f64();
    if !sol.values.is_empty() {
        let viol = verify_solution(p, &sol.values, VERIFY_TOL);
        if !viol.is_empty() {
            let head = viol.iter().take(5).cloned().collect::<Vec<_>>().join("; ");
            return Err(SolveError::Verification(format!("{} issue(s): {head}", viol.len())));
        }
        // Trust only the primal point, never the backend's reported value.
        sol.objective = p.objective_value(&sol.values);
        if sol.status == SolveStatus::Optimal {
            sol.bound = sol.objective;
        }
    }
    Ok(sol)
}
