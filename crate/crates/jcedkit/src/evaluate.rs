//! Ex-post assessment of a solved dispatch on a fresh scenario set: how often
//! each reserve family would have fallen short, what the shortfall costs at a
//! shed price, and side-by-side method comparisons.
//!
//! The checks replay the constraint bodies the dispatch promised to cover:
//! DIBR curtailment headroom against realized availability, per-unit AGC
//! deployment against procured regulation, and line flows under full up / full
//! down reserve deployment (the two-regime form the model enforces, which puts
//! reserves on the load side of the flow bodies; growing reserves therefore
//! cannot relax this family). A scenario violating any row of a family counts
//! once for that family.

use crate::grid::{compute_ptdf, CaseError, GridCase};
use crate::model::{
    build_model, evaluate_objective_exact, BuildError, BuildMode, BuildOptions, DispatchDecision,
};
use crate::reform::{reform, Method, ReformError, ReformOptions, ReformSummary};
use crate::scenario::{Scenario, ScenarioError, ScenarioSet};
use crate::sfr;
use crate::solve::{solve, SolveError, SolveOptions, SolveStatus};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Reform(#[from] ReformError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn invalid(msg: impl Into<String>) -> EvalError {
    EvalError::Invalid(msg.into())
}

/// Shortfalls below this are solver roundoff, not deficiencies.
const BODY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct FamilyStats {
    /// Probability-weighted fraction of scenarios violating any row.
    pub violation_probability: f64,
    /// Expected unmet MW (weighted mean over all scenarios).
    pub mean_unmet_mw: f64,
    pub max_unmet_mw: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExPostReport {
    pub n_scenarios: usize,
    pub seed: u64,
    pub shed_price_per_mwh: f64,
    pub dt_h: f64,
    pub dibr_up: FamilyStats,
    pub sfr: FamilyStats,
    pub line_flow: FamilyStats,
    /// Aggregate inertia / droop requirement checks (no MW measure).
    pub freq_violation_probability: f64,
    /// Expected operating cost over the interval, exact regulation term.
    pub objective_cost: f64,
    /// shed_price x dt x expected unmet MW summed over the three families.
    pub ex_post_cost: f64,
    pub total_cost: f64,
    pub wall_s: f64,
}

struct ScenarioOutcome {
    weight: f64,
    violated: [bool; 4],
    unmet: [f64; 3],
}

struct FamilyAcc {
    prob: f64,
    mean: f64,
    max: f64,
}

impl FamilyAcc {
    fn new() -> Self {
        FamilyAcc { prob: 0.0, mean: 0.0, max: 0.0 }
    }

    fn add(&mut self, weight: f64, violated: bool, unmet: f64) {
        if violated {
            self.prob += weight;
        }
        self.mean += weight * unmet;
        self.max = self.max.max(unmet);
    }

    fn stats(&self) -> FamilyStats {
        FamilyStats {
            violation_probability: self.prob.clamp(0.0, 1.0),
            mean_unmet_mw: self.mean,
            max_unmet_mw: self.max,
        }
    }
}

/// Replay the reserve bodies of a decision on a test set and price the
/// shortfalls. Pure in its inputs: repeat calls give identical reports.
pub fn ex_post_evaluate(
    case: &GridCase,
    decision: &DispatchDecision,
    test: &ScenarioSet,
    shed_price_per_mwh: f64,
) -> Result<ExPostReport, EvalError> {
    let start = std::time::Instant::now();
    test.validate(case)?;
    if !(shed_price_per_mwh >= 0.0) {
        return Err(invalid("shed price must be nonnegative"));
    }
    let th = &case.thresholds;
    let f0 = case.f0_hz;

    // Positional lookups; every case device must appear in the decision.
    let find = |what: &str, id: u32, got: Option<usize>| {
        got.ok_or_else(|| invalid(format!("decision is missing {what} {id}")))
    };
    let mut thermal = Vec::with_capacity(case.thermal.len());
    for g in &case.thermal {
        let k = find("thermal unit", g.id, decision.thermal.iter().position(|d| d.id == g.id))?;
        thermal.push(&decision.thermal[k]);
    }
    let mut dibr = Vec::with_capacity(case.dibr.len());
    for w in &case.dibr {
        let k = find("dibr", w.id, decision.dibr.iter().position(|d| d.id == w.id))?;
        dibr.push(&decision.dibr[k]);
    }
    let mut storage = Vec::with_capacity(case.storage.len());
    for e in &case.storage {
        let k = find("storage unit", e.id, decision.storage.iter().position(|d| d.id == e.id))?;
        storage.push(&decision.storage[k]);
    }

    // DIBR body: base point plus transient headroom within realized availability.
    let dibr_req: Vec<f64> = dibr
        .iter()
        .zip(&case.dibr)
        .map(|(d, w)| d.p_mw + sfr::pfr_headroom_bound(d.h_s, d.d_pu, w.capacity_mw, th, f0))
        .collect();

    // Line bodies: controllable flow under full up / full dn deployment minus
    // the scenario's uncontrolled flow must stay within capacity.
    let ptdf = compute_ptdf(case, None)?;
    let idx = case.bus_index();
    let mut lines = Vec::with_capacity(case.lines.len());
    for (li, line) in case.lines.iter().enumerate() {
        let s = &ptdf.factors[li];
        let mut base = 0.0;
        let mut up = 0.0;
        let mut dn = 0.0;
        for (g, d) in case.thermal.iter().zip(&thermal) {
            let c = s[idx[&g.bus]];
            base += c * d.p_mw;
            if g.agc {
                up += c * d.r_up_mw;
                dn -= c * d.r_dn_mw;
            }
        }
        for (w, d) in case.dibr.iter().zip(&dibr) {
            base += s[idx[&w.bus]] * d.p_mw;
        }
        for (e, d) in case.storage.iter().zip(&storage) {
            base += s[idx[&e.bus]] * d.p_mw;
        }
        let e_nom: f64 =
            case.buses.iter().enumerate().map(|(bi, b)| s[bi] * (b.load_mw - b.ibr_mw)).sum();
        lines.push((s, base + up, base + dn, e_nom, line.capacity_mw));
    }

    // Aggregate frequency requirements the decision's response must cover.
    let agg0 = sfr::aggregate(case, 0.0, 0.0);
    let p_sys = agg0.p_sys_mw;
    let rate_pu = th.rocof_max_hz_per_s / f0;
    let ss_pu = th.ss_max_hz / f0;

    let per_scenario = |sc: &Scenario| -> ScenarioOutcome {
        let mut violated = [false; 4];
        let mut unmet = [0.0f64; 3];
        for (req, avail) in dibr_req.iter().zip(&sc.p_avail) {
            let short = req - avail;
            if short > BODY_TOL {
                violated[0] = true;
                unmet[0] += short;
            }
        }
        for d in &thermal {
            let deploy = d.alpha * sc.dp_l_mw;
            let short = (deploy - d.r_up_mw).max(-deploy - d.r_dn_mw);
            if short > BODY_TOL {
                violated[1] = true;
                unmet[1] += short;
            }
        }
        for (s, flow_up, flow_dn, e_nom, cap) in &lines {
            let de: f64 = sc
                .zeta_d
                .iter()
                .zip(&sc.zeta_h)
                .zip(*s)
                .map(|((zd, zh), c)| c * (zd - zh))
                .sum();
            let e = e_nom + de;
            let short = ((flow_up - e).abs().max((flow_dn - e).abs())) - cap;
            if short > BODY_TOL {
                violated[2] = true;
                unmet[2] += short;
            }
        }
        let dp_pu = sc.dp_l_mw.abs() / p_sys;
        let h_need = dp_pu / (2.0 * rate_pu) - agg0.h_thermal_s;
        let d_need = dp_pu / ss_pu - agg0.d_load_pu - agg0.r_inv_pu;
        if h_need > decision.h_inv_s + BODY_TOL || d_need > decision.d_inv_pu + BODY_TOL {
            violated[3] = true;
        }
        ScenarioOutcome { weight: sc.weight, violated, unmet }
    };

    let outcomes: Vec<ScenarioOutcome> = test.scenarios.par_iter().map(per_scenario).collect();
    let mut acc = [FamilyAcc::new(), FamilyAcc::new(), FamilyAcc::new()];
    let mut freq_prob = 0.0;
    for o in &outcomes {
        for k in 0..3 {
            acc[k].add(o.weight, o.violated[k], o.unmet[k]);
        }
        if o.violated[3] {
            freq_prob += o.weight;
        }
    }

    let dibr_up = acc[0].stats();
    let sfr_stats = acc[1].stats();
    let line_flow = acc[2].stats();
    let expected_unmet = dibr_up.mean_unmet_mw + sfr_stats.mean_unmet_mw + line_flow.mean_unmet_mw;
    let ex_post_cost = shed_price_per_mwh * th.dt_h * expected_unmet;
    let objective_cost = decision.objective_exact_per_h * th.dt_h;
    Ok(ExPostReport {
        n_scenarios: test.n(),
        seed: test.seed,
        shed_price_per_mwh,
        dt_h: th.dt_h,
        dibr_up,
        sfr: sfr_stats,
        line_flow,
        freq_violation_probability: freq_prob.clamp(0.0, 1.0),
        objective_cost,
        ex_post_cost,
        total_cost: objective_cost + ex_post_cost,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

impl ExPostReport {
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "ex-post evaluation  n={}  seed={}  shed={} $/MWh  dt={} h\n",
            self.n_scenarios, self.seed, self.shed_price_per_mwh, self.dt_h
        ));
        out.push_str("family      violation    mean unmet MW    max unmet MW\n");
        for (name, s) in [
            ("dibr_up", &self.dibr_up),
            ("sfr", &self.sfr),
            ("line_flow", &self.line_flow),
        ] {
            out.push_str(&format!(
                "{name:<11} {:>9.4}    {:>13.4}    {:>12.4}\n",
                s.violation_probability, s.mean_unmet_mw, s.max_unmet_mw
            ));
        }
        out.push_str(&format!("freq        {:>9.4}\n", self.freq_violation_probability));
        out.push_str(&format!(
            "objective {:.2} $  ex-post {:.2} $  total {:.2} $\n",
            self.objective_cost, self.ex_post_cost, self.total_cost
        ));
        out
    }
}

/// One reformulate-and-solve run of a method on a fixed instance.
#[derive(Debug, Clone, Serialize)]
pub struct MethodRun {
    pub method: Method,
    pub status: SolveStatus,
    pub objective_per_h: f64,
    pub objective_exact_per_h: f64,
    /// Median build+reform+solve wall time over the repeats.
    pub wall_s: f64,
    pub n_vars: usize,
    pub n_rows: usize,
    pub n_integers: usize,
    pub reform: ReformSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodComparison {
    pub runs: Vec<MethodRun>,
    /// (first - second) / first on the solver objective; first is reference.
    pub cost_error: Option<f64>,
    /// first wall time / second wall time.
    pub speedup: Option<f64>,
}

/// Solve the same instance once per method and tabulate objective, wall time
/// and model size. Wall time is the median of `repeats` full pipeline runs.
#[allow(clippy::too_many_arguments)]
pub fn compare_methods(
    case: &GridCase,
    set: &ScenarioSet,
    mode: BuildMode,
    build: &BuildOptions,
    reform_opts: &ReformOptions,
    methods: &[Method],
    repeats: usize,
    solve_opts: &SolveOptions,
) -> Result<MethodComparison, EvalError> {
    if methods.is_empty() {
        return Err(invalid("no methods to compare"));
    }
    if repeats == 0 {
        return Err(invalid("repeats must be at least 1"));
    }
    let mut runs = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut walls = Vec::with_capacity(repeats);
        let mut last = None;
        for _ in 0..repeats {
            let t0 = std::time::Instant::now();
            let mut model = build_model(case, set, mode, build)?;
            let summary = reform(&mut model, method, reform_opts)?;
            let sol = solve(&model.program, solve_opts)?;
            walls.push(t0.elapsed().as_secs_f64());
            last = Some((model, summary, sol));
        }
        let (model, summary, sol) = last.unwrap();
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Limit if !sol.values.is_empty() => {}
            s => return Err(invalid(format!("{method} ended {s:?} with no usable point"))),
        }
        walls.sort_by(f64::total_cmp);
        let wall_s = walls[walls.len() / 2];
        let exact = evaluate_objective_exact(&model, case, &sol.values, sol.objective);
        runs.push(MethodRun {
            method,
            status: sol.status,
            objective_per_h: sol.objective,
            objective_exact_per_h: exact,
            wall_s,
            n_vars: model.program.var_names.len(),
            n_rows: model.program.rows.len(),
            n_integers: model.program.integer.iter().filter(|&&b| b).count(),
            reform: summary,
        });
    }
    let (cost_error, speedup) = if runs.len() >= 2 {
        let (a, b) = (&runs[0], &runs[1]);
        let err = if a.objective_per_h.abs() > 1e-12 {
            Some((a.objective_per_h - b.objective_per_h) / a.objective_per_h)
        } else {
            None
        };
        (err, Some(a.wall_s / b.wall_s.max(1e-12)))
    } else {
        (None, None)
    };
    Ok(MethodComparison { runs, cost_error, speedup })
}

impl MethodComparison {
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str("method  status   objective $/h   exact $/h     wall s    vars   rows  ints\n");
        for r in &self.runs {
            out.push_str(&format!(
                "{:<7} {:<8} {:>13.4} {:>11.4} {:>10.4} {:>7} {:>6} {:>5}\n",
                r.method.to_string(),
                format!("{:?}", r.status).to_lowercase(),
                r.objective_per_h,
                r.objective_exact_per_h,
                r.wall_s,
                r.n_vars,
                r.n_rows,
                r.n_integers
            ));
        }
        if let (Some(err), Some(sp)) = (self.cost_error, self.speedup) {
            out.push_str(&format!("cost error {:.4}%  speedup x{:.2}\n", 100.0 * err, sp));
        }
        out
    }

    /// One CSV line per run, keyed by a caller-chosen label (scenario count,
    /// case name, ...). Pair with [`Self::csv_header`].
    pub fn csv_rows(&self, label: &str) -> String {
        let mut out = String::new();
        for r in &self.runs {
            out.push_str(&format!(
                "{label},{},{},{},{},{},{},{},{}\n",
                r.method,
                format!("{:?}", r.status).to_lowercase(),
                r.objective_per_h,
                r.objective_exact_per_h,
                r.wall_s,
                r.n_vars,
                r.n_rows,
                r.n_integers
            ));
        }
        out
    }

    pub fn csv_header() -> &'static str {
        "label,method,status,objective_per_h,objective_exact_per_h,wall_s,n_vars,n_rows,n_integers\n"
    }
}
