//! Chance-constraint reformulations.
//!
//! The builder leaves each family as a slack y >= 0 with per-scenario offsets
//! w_i; enforcing the family means picking which scenarios may be violated.
//! Four treatments:
//!
//! - `Saa`: binary indicators z_i per group, scenario rows y + w_i z_i >= w_i
//!   (lazy), and a knapsack budget sum(p_i z_i) <= delta. Exact sample
//!   counterpart; a MILP.
//! - `Msaa`: same rows with z relaxed to the unit interval, tightened by a quantile lower
//!   bound on every slack and one mixing inequality per family, plus an
//!   indicator-only cut per line when the scenario spread of uncontrolled
//!   flow exceeds the line span. An LP.
//! - `Robust`: y >= max_i w_i, no indicators.
//! - `Quantile`: y >= the delta upper quantile of the offsets, per family in
//!   isolation (individual rather than joint guarantee), no indicators.
//!
//! The quantile bound y >= w_(k+1) (the largest offset that cannot be bought
//! out of the budget) is valid for the exact MILP too: if y were smaller,
//! every scenario with w_i >= w_(k+1) would need z_i = 1, overrunning the
//! budget. With the bound in place, scenario rows with w_i <= w_(k+1) are
//! implied and are dropped instead of emitted.

use crate::model::{BuiltModel, ChanceFamily, ZGroup};
use crate::scenario::{empirical_quantile, QuantileSide};
use crate::solve::Sense;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReformError {
    #[error("invalid reformulation input: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ReformError {
    ReformError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Saa,
    Msaa,
    Robust,
    Quantile,
}

impl Method {
    pub fn uses_indicators(&self) -> bool {
        matches!(self, Method::Saa | Method::Msaa)
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "saa" => Ok(Method::Saa),
            "msaa" => Ok(Method::Msaa),
            "robust" => Ok(Method::Robust),
            "quantile" => Ok(Method::Quantile),
            other => Err(format!("unknown method '{other}' (saa, msaa, robust, quantile)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Saa => "saa",
            Method::Msaa => "msaa",
            Method::Robust => "robust",
            Method::Quantile => "quantile",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReformOptions {
    /// Apply the quantile lower bound to family slacks and prune implied
    /// scenario rows (Saa and Msaa).
    pub strengthen: bool,
    /// Emit one mixing inequality per family (Msaa).
    pub mixing_cuts: bool,
    /// Emit the indicator-only line cuts (Msaa).
    pub aggregated_cuts: bool,
}

impl Default for ReformOptions {
    fn default() -> Self {
        ReformOptions { strengthen: true, mixing_cuts: true, aggregated_cuts: true }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ReformSummary {
    pub method: Option<Method>,
    /// First indicator variable index per group tag; n consecutive each.
    pub z_start: BTreeMap<&'static str, usize>,
    pub scenario_rows: usize,
    pub pruned_rows: usize,
    pub slack_bounds: usize,
    pub mixing_cuts: usize,
    pub aggregated_cuts: usize,
    pub vacuous_aggregated: usize,
}

/// Protection level of one offset vector: sort descending, accumulate weight
/// until it exceeds delta. Returns (k, bound, order): the k heaviest-offset
/// scenarios fit inside the budget, the (k+1)-th largest offset is a valid
/// lower bound on the slack, and `order` is the descending index order.
/// k == n means the budget covers everything (no bound, no cut).
pub fn protection_level(w: &[f64], weights: &[f64], delta: f64) -> (usize, f64, Vec<usize>) {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
    let mut cum = 0.0;
    for (m, &i) in order.iter().enumerate() {
        cum += weights[i];
        if cum > delta + 1e-12 {
            return (m, w[i], order);
        }
    }
    (w.len(), 0.0, order)
}

/// Mixing inequality for one family over the k+1 largest offsets
/// j_1, ..., j_tau (descending): y + sum_s (w_{j_s} - w_{j_{s+1}}) z_{j_s} is
/// at least w_{j_1}, with w after the subsequence taken as 0. Valid from the
/// scenario rows and y >= 0 alone: the first unswitched scenario in the
/// subsequence already forces y past its offset, and the switched prefix
/// telescopes to cover the gap to the top.
pub fn mixing_terms(w: &[f64], order: &[usize], tau: usize, y: usize, z_start: usize) -> (Vec<(usize, f64)>, f64) {
    let mut terms = vec![(y, 1.0)];
    for s in 0..tau {
        let i = order[s];
        let next = if s + 1 < tau { w[order[s + 1]] } else { 0.0 };
        let c = w[i] - next;
        if c > 1e-12 {
            terms.push((z_start + i, c));
        }
    }
    (terms, w[order[0]])
}

/// Indicator-only cut for one line. Serving scenario i on a line of span
/// [-F, F] pins the controllable flow into [e_i - F, e_i + F]; when the
/// scenario spread max e - min e exceeds 2F those windows cannot all
/// intersect, so indicators must absorb the excess. Derived by summing the
/// low-side and high-side mixing inequalities after shifting each slack
/// nonnegative (shifts u_b, u_a land on the last coefficient of their leg);
/// the controllable flow cancels, leaving a pure indicator inequality, the
/// same for the up- and down-regulation copies. Returns None when the right
/// side is nonpositive (cut vacuous, the usual case).
pub(crate) fn aggregated_line_cut(
    e: &[f64],
    capacity: f64,
    weights: &[f64],
    delta: f64,
) -> Option<(Vec<(usize, f64)>, f64)> {
    let e_max = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e_min = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let rhs = (e_max - e_min) - 2.0 * capacity;
    if !(rhs > 1e-9) {
        return None;
    }
    let v_low: Vec<f64> = e.iter().map(|&ei| capacity + ei).collect();
    let v_up: Vec<f64> = e.iter().map(|&ei| capacity - ei).collect();
    let u_b = (-(capacity + e_min)).max(0.0);
    let u_a = (e_max - capacity).max(0.0);

    let mut coeff: BTreeMap<usize, f64> = BTreeMap::new();
    for (v, u) in [(&v_low, u_b), (&v_up, u_a)] {
        let (k, _, order) = protection_level(v, weights, delta);
        if k >= e.len() {
            return None;
        }
        let tau = k + 1;
        for s in 0..tau {
            let i = order[s];
            let next = if s + 1 < tau { v[order[s + 1]] } else { -u };
            *coeff.entry(i).or_insert(0.0) += v[i] - next;
        }
    }
    let terms: Vec<(usize, f64)> = coeff.into_iter().filter(|&(_, c)| c.abs() > 1e-12).collect();
    Some((terms, rhs))
}

/// Apply `method` to the model in place: indicator variables, budgets,
/// scenario rows, bounds, and cuts per the method. Call once per model.
pub fn reform(model: &mut BuiltModel, method: Method, opts: &ReformOptions) -> Result<ReformSummary, ReformError> {
    let n = model.meta.n_scenarios;
    let weights = model.meta.weights.clone();
    if weights.len() != n {
        return Err(invalid("weight vector does not match the scenario count"));
    }
    for f in &model.families {
        if f.w.len() != n {
            return Err(invalid(format!("family {} has {} offsets for {n} scenarios", f.name, f.w.len())));
        }
        if f.w.iter().any(|&v| !(v >= 0.0)) {
            return Err(invalid(format!("family {} has a negative or NaN offset", f.name)));
        }
    }
    if model.program.var_names.iter().any(|v| v.starts_with("z_")) {
        return Err(invalid("model is already reformulated"));
    }

    let mut summary = ReformSummary { method: Some(method), ..Default::default() };
    let p = &mut model.program;

    match method {
        Method::Robust => {
            for f in &model.families {
                let hi = f.w.iter().cloned().fold(0.0, f64::max);
                if hi > p.lb[f.y] {
                    p.lb[f.y] = hi;
                    summary.slack_bounds += 1;
                }
            }
            return Ok(summary);
        }
        Method::Quantile => {
            for f in &model.families {
                let delta = model.meta.deltas.of(f.group);
                let q = empirical_quantile(&f.w, &weights, delta, QuantileSide::Upper).max(0.0);
                if q > p.lb[f.y] {
                    p.lb[f.y] = q;
                    summary.slack_bounds += 1;
                }
            }
            return Ok(summary);
        }
        Method::Saa | Method::Msaa => {}
    }

    let binary = method == Method::Saa;
    let mut z_start: BTreeMap<ZGroup, usize> = BTreeMap::new();
    for group in [ZGroup::Freq, ZGroup::Dibr, ZGroup::Line] {
        if !model.families.iter().any(|f| f.group == group) {
            continue;
        }
        let delta = model.meta.deltas.of(group);
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid(format!("delta for {} group must be in [0, 1)", group.tag())));
        }
        let start = p.n_vars();
        for i in 0..n {
            p.add_var(format!("z_{}_{}", group.tag(), i), 0.0, 1.0, 0.0, binary);
        }
        z_start.insert(group, start);
        summary.z_start.insert(group.tag(), start);
        p.add_row(
            format!("budget_{}", group.tag()),
            (0..n).map(|i| (start + i, weights[i])).collect(),
            Sense::Le,
            delta,
        );
    }

    for fi in 0..model.families.len() {
        let f: ChanceFamily = model.families[fi].clone();
        let zs = z_start[&f.group];
        let delta = model.meta.deltas.of(f.group);
        let (k, bound, order) = protection_level(&f.w, &weights, delta);

        let floor = if opts.strengthen && k < n {
            if bound > p.lb[f.y] {
                p.lb[f.y] = bound;
                summary.slack_bounds += 1;
            }
            bound
        } else {
            0.0
        };
        for i in 0..n {
            if f.w[i] > floor + 1e-12 {
                p.add_lazy_row(
                    format!("{}_s{}", f.name, i),
                    vec![(f.y, 1.0), (zs + i, f.w[i])],
                    Sense::Ge,
                    f.w[i],
                );
                summary.scenario_rows += 1;
            } else if f.w[i] > 1e-12 {
                summary.pruned_rows += 1;
            }
        }

        if method == Method::Msaa && opts.mixing_cuts && k >= 1 && k < n && f.w[order[0]] > floor + 1e-12 {
            let (terms, rhs) = mixing_terms(&f.w, &order, k + 1, f.y, zs);
            p.add_row(format!("mix_{}", f.name), terms, Sense::Ge, rhs);
            summary.mixing_cuts += 1;
        }
    }

    if method == Method::Msaa && opts.aggregated_cuts {
        if let Some(&zs) = z_start.get(&ZGroup::Line) {
            let delta = model.meta.deltas.of(ZGroup::Line);
            for line in &model.meta.lines {
                match aggregated_line_cut(&line.e_mw, line.capacity_mw, &weights, delta) {
                    Some((coeffs, rhs)) => {
                        let terms = coeffs.into_iter().map(|(i, c)| (zs + i, c)).collect();
                        p.add_row(format!("agg_line{}", line.id), terms, Sense::Ge, rhs);
                        summary.aggregated_cuts += 1;
                    }
                    None => summary.vacuous_aggregated += 1,
                }
            }
        }
    }

    Ok(summary)
}
