//! Dispatch model builder.
//!
//! Turns a grid case plus a scenario set into a linear program: decision
//! variables for thermal base points, reserves, AGC shares, inverter virtual
//! inertia/droop, and storage operation; the deterministic operating rows;
//! and the chance-constraint families whose scenario rows the reformulation
//! step instantiates. The builder never emits scenario rows itself, so the
//! returned program is the deterministic core plus one slack variable and one
//! defining row per family.
//!
//! Families all share the same shape: a slack y >= 0 tied to the model by an
//! equality, per-scenario offsets w_i >= 0, and a group that says which
//! shared indicator vector (frequency, DIBR, line) the family draws on. The
//! frequency families reuse the aggregate inverter inertia/droop variables
//! directly as their slack.

use crate::grid::{compute_ptdf, CaseError, GridCase};
use crate::scenario::{disturbance_quantiles, DisturbanceQuantiles, ScenarioError, ScenarioSet};
use crate::sfr::{self, PwlBoundary, SfrError};
use crate::solve::{CanonicalProgram, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("invalid model input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sfr(#[from] SfrError),
}

fn invalid(msg: impl Into<String>) -> BuildError {
    BuildError::Invalid(msg.into())
}

/// What drives the inverter response parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuildMode {
    /// Virtual inertia and droop of every DIBR and ES are decision variables.
    CoOptimized,
    /// Inverter response pinned: every DIBR and ES runs the given values
    /// (device base). Rejected if any device cap is exceeded.
    Fixed { h_s: f64, d_pu: f64 },
    /// Per-family individual chance constraints (quantile rows, no shared
    /// indicators) covering up-regulation only: ES down-headroom and SFR
    /// down-reserve rows are dropped.
    Individual,
}

impl BuildMode {
    pub fn is_individual(&self) -> bool {
        matches!(self, BuildMode::Individual)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildOptions {
    /// Chords per thermal fuel curve.
    pub fuel_segments: usize,
    /// Secant pieces for the nadir security boundary.
    pub nadir_pieces: usize,
    /// Fractional tightening of the nadir threshold before fitting, covering
    /// the conservatism of the piecewise boundary and governor lumping.
    pub nadir_margin: f64,
    /// Damping grid resolution for the boundary fit.
    pub boundary_grid: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { fuel_segments: 3, nadir_pieces: 4, nadir_margin: 0.03, boundary_grid: 64 }
    }
}

/// Which shared indicator vector a family draws on; one budget row each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ZGroup {
    Freq,
    Dibr,
    Line,
}

impl ZGroup {
    pub fn delta(&self, case: &GridCase) -> f64 {
        let th = &case.thresholds;
        match self {
            ZGroup::Freq => th.delta_f,
            ZGroup::Dibr => th.delta_dibr,
            ZGroup::Line => th.delta_l,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ZGroup::Freq => "freq",
            ZGroup::Dibr => "dibr",
            ZGroup::Line => "line",
        }
    }
}

/// One scenario-indexed constraint family: slack variable y (>= 0, tied to
/// the decision variables by an equality or by construction), offsets
/// w_i >= 0, and the indicator group. Feasibility for scenario i means
/// y >= w_i; the reformulation decides how to enforce "all but delta of them".
#[derive(Debug, Clone)]
pub struct ChanceFamily {
    pub name: String,
    pub y: usize,
    pub w: Vec<f64>,
    pub group: ZGroup,
}

/// Variable indices by role, parallel to the case device vectors.
#[derive(Debug, Clone, Default)]
pub struct VarMap {
    pub p_g: Vec<usize>,
    pub r_up_g: Vec<usize>,
    pub r_dn_g: Vec<usize>,
    pub fuel_g: Vec<usize>,
    /// AGC participation; None for units outside AGC.
    pub alpha_g: Vec<Option<usize>>,
    pub p_w: Vec<usize>,
    pub h_w: Vec<usize>,
    pub d_w: Vec<usize>,
    pub p_e: Vec<usize>,
    pub loss_e: Vec<usize>,
    pub r_up_e: Vec<usize>,
    pub r_dn_e: Vec<usize>,
    pub h_e: Vec<usize>,
    pub d_e: Vec<usize>,
    /// Aggregate inverter inertia / droop on the system base.
    pub y_rate: usize,
    pub y_ss: usize,
    pub y_dibr: Vec<usize>,
    /// Per line: slacks for [up-reg low, up-reg high, down-reg low,
    /// down-reg high] sides.
    pub y_line: Vec<[usize; 4]>,
}

/// Per-line data the reformulation needs for aggregated two-sided cuts.
#[derive(Debug, Clone)]
pub struct LineMeta {
    pub id: u32,
    pub capacity_mw: f64,
    /// Flow of the uncontrolled injections (realized net load) through the
    /// line, per scenario (MW).
    pub e_mw: Vec<f64>,
}

/// Admissible joint violation probability per indicator group.
#[derive(Debug, Clone, Copy)]
pub struct GroupDeltas {
    pub freq: f64,
    pub dibr: f64,
    pub line: f64,
}

impl GroupDeltas {
    pub fn of(&self, group: ZGroup) -> f64 {
        match group {
            ZGroup::Freq => self.freq,
            ZGroup::Dibr => self.dibr,
            ZGroup::Line => self.line,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelMeta {
    pub n_scenarios: usize,
    pub weights: Vec<f64>,
    pub dp_l_mw: Vec<f64>,
    pub quantiles: DisturbanceQuantiles,
    pub p_sys_mw: f64,
    pub h_thermal_s: f64,
    pub r_inv_pu: f64,
    pub d_load_pu: f64,
    pub boundary: Option<PwlBoundary>,
    pub lines: Vec<LineMeta>,
    pub deltas: GroupDeltas,
    /// Constant folded into the objective for expected DIBR curtailment.
    pub curtail_offset: f64,
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub program: CanonicalProgram,
    pub families: Vec<ChanceFamily>,
    pub vars: VarMap,
    pub meta: ModelMeta,
    pub mode: BuildMode,
}

/// Build the deterministic core and the chance families for one case and one
/// scenario set.
pub fn build_model(
    case: &GridCase,
    set: &ScenarioSet,
    mode: BuildMode,
    opts: &BuildOptions,
) -> Result<BuiltModel, BuildError> {
    case.validate()?;
    set.validate(case)?;
    let n = set.n();
    if n == 0 {
        return Err(invalid("scenario set is empty"));
    }
    if opts.fuel_segments == 0 {
        return Err(invalid("fuel_segments must be at least 1"));
    }
    if !(0.0..1.0).contains(&opts.nadir_margin) {
        return Err(invalid("nadir_margin must be in [0, 1)"));
    }
    if let BuildMode::Fixed { h_s, d_pu } = mode {
        if !(h_s >= 0.0) || !(d_pu >= 0.0) {
            return Err(invalid("fixed inverter response must be nonnegative"));
        }
        for w in &case.dibr {
            if h_s > w.h_max_s + 1e-9 || d_pu > w.d_max_pu + 1e-9 {
                return Err(invalid(format!(
                    "fixed response (H={h_s} s, D={d_pu}) exceeds dibr {} caps (H<={}, D<={})",
                    w.id, w.h_max_s, w.d_max_pu
                )));
            }
        }
        for e in &case.storage {
            if h_s > e.h_max_s + 1e-9 || d_pu > e.d_max_pu + 1e-9 {
                return Err(invalid(format!(
                    "fixed response (H={h_s} s, D={d_pu}) exceeds storage {} caps (H<={}, D<={})",
                    e.id, e.h_max_s, e.d_max_pu
                )));
            }
        }
    }

    let th = &case.thresholds;
    let f0 = case.f0_hz;
    let p_sys = case.p_sys_mw();
    let agg0 = sfr::aggregate(case, 0.0, 0.0);
    let dq = disturbance_quantiles(set, th.delta_f, th.delta_r());
    let ptdf = compute_ptdf(case, None)?;
    let weights = set.weights();
    let dp_l = set.dp_l();
    let dt_min = th.dt_h * 60.0;
    let rate_pu = th.rocof_max_hz_per_s / f0;
    let dev_pu = th.nadir_max_hz / f0;
    let ss_pu = th.ss_max_hz / f0;

    let mut p = CanonicalProgram::new(format!("{}-dispatch", case.name));
    let mut vars = VarMap::default();
    let inf = f64::INFINITY;

    // Mean realized availability per DIBR: forecast cap for the base point
    // and the constant part of the expected curtailment cost.
    let mean_avail: Vec<f64> = (0..case.dibr.len())
        .map(|wi| set.scenarios.iter().map(|s| s.weight * s.p_avail[wi]).sum())
        .collect();

    // --- variables ---
    for g in &case.thermal {
        vars.p_g.push(p.add_var(format!("p_g{}", g.id), g.p_min_mw, g.p_max_mw, 0.0, false));
        vars.r_up_g.push(p.add_var(
            format!("r_up_g{}", g.id),
            0.0,
            g.ramp_up_mw_per_min * dt_min,
            g.c_res_up,
            false,
        ));
        vars.r_dn_g.push(p.add_var(
            format!("r_dn_g{}", g.id),
            0.0,
            g.ramp_dn_mw_per_min * dt_min,
            g.c_res_dn,
            false,
        ));
        // Epigraph variable for the piecewise-linear fuel cost.
        vars.fuel_g.push(p.add_var(format!("fuel_g{}", g.id), -inf, inf, 1.0, false));
        vars.alpha_g.push(if g.agc {
            // Redispatch cost approximation: c_r * alpha * E|dp_L|.
            Some(p.add_var(
                format!("alpha_g{}", g.id),
                0.0,
                1.0,
                g.c_redispatch * dq.mean_abs_dp_mw,
                false,
            ))
        } else {
            None
        });
    }
    let (h_fix, d_fix) = match mode {
        BuildMode::Fixed { h_s, d_pu } => (Some(h_s), Some(d_pu)),
        _ => (None, None),
    };
    for (wi, w) in case.dibr.iter().enumerate() {
        // Base point capped by the mean realized availability; the expected
        // curtailment cost c_w * E(avail - p_w) contributes -c_w on p_w plus
        // a constant.
        vars.p_w.push(p.add_var(format!("p_w{}", w.id), 0.0, mean_avail[wi], -w.c_curtail, false));
        let (hl, hu) = h_fix.map_or((0.0, w.h_max_s), |v| (v, v));
        let (dl, du) = d_fix.map_or((0.0, w.d_max_pu), |v| (v, v));
        vars.h_w.push(p.add_var(format!("h_w{}", w.id), hl, hu, 0.0, false));
        vars.d_w.push(p.add_var(format!("d_w{}", w.id), dl, du, 0.0, false));
    }
    for e in &case.storage {
        vars.p_e.push(p.add_var(format!("p_e{}", e.id), -e.p_max_mw, e.p_max_mw, 0.0, false));
        vars.loss_e.push(p.add_var(format!("loss_e{}", e.id), 0.0, inf, e.c_loss, false));
        vars.r_up_e.push(p.add_var(format!("r_up_e{}", e.id), 0.0, inf, e.c_res_up, false));
        vars.r_dn_e.push(p.add_var(format!("r_dn_e{}", e.id), 0.0, inf, e.c_res_dn, false));
        let (hl, hu) = h_fix.map_or((0.0, e.h_max_s), |v| (v, v));
        let (dl, du) = d_fix.map_or((0.0, e.d_max_pu), |v| (v, v));
        vars.h_e.push(p.add_var(format!("h_e{}", e.id), hl, hu, 0.0, false));
        vars.d_e.push(p.add_var(format!("d_e{}", e.id), dl, du, 0.0, false));
    }
    vars.y_rate = p.add_var("h_inv_total", 0.0, inf, 0.0, false);
    vars.y_ss = p.add_var("d_inv_total", 0.0, inf, 0.0, false);

    p.obj_offset = case
        .dibr
        .iter()
        .zip(&mean_avail)
        .map(|(w, m)| w.c_curtail * m)
        .sum();
    let curtail_offset = p.obj_offset;

    // --- deterministic rows ---
    // System balance at forecast injections.
    let mut bal: Vec<(usize, f64)> = Vec::new();
    for &v in vars.p_g.iter().chain(&vars.p_w).chain(&vars.p_e) {
        bal.push((v, 1.0));
    }
    p.add_row("balance", bal, Sense::Eq, case.net_load_mw());

    for (gi, g) in case.thermal.iter().enumerate() {
        p.add_row(
            format!("cap_up_g{}", g.id),
            vec![(vars.p_g[gi], 1.0), (vars.r_up_g[gi], 1.0)],
            Sense::Le,
            g.p_max_mw,
        );
        p.add_row(
            format!("cap_dn_g{}", g.id),
            vec![(vars.p_g[gi], 1.0), (vars.r_dn_g[gi], -1.0)],
            Sense::Ge,
            g.p_min_mw,
        );
        // Governor response at the steady-state deviation limit must fit
        // inside the procured reserve.
        let pfr_req = ss_pu / g.droop_pu * g.p_max_mw;
        p.add_row(format!("pfr_up_g{}", g.id), vec![(vars.r_up_g[gi], 1.0)], Sense::Ge, pfr_req);
        p.add_row(format!("pfr_dn_g{}", g.id), vec![(vars.r_dn_g[gi], 1.0)], Sense::Ge, pfr_req);
        // Fuel epigraph: chords of the convex quadratic, exact at breakpoints.
        let (lo, hi) = (g.p_min_mw, g.p_max_mw);
        if hi - lo <= 1e-9 {
            p.add_row(format!("fuel_g{}_s0", g.id), vec![(vars.fuel_g[gi], 1.0)], Sense::Ge, g.cost.eval(lo));
        } else {
            let seg = (hi - lo) / opts.fuel_segments as f64;
            for s in 0..opts.fuel_segments {
                let a = lo + seg * s as f64;
                let b = a + seg;
                let slope = g.cost.c2 * (a + b) + g.cost.c1;
                p.add_row(
                    format!("fuel_g{}_s{}", g.id, s),
                    vec![(vars.fuel_g[gi], 1.0), (vars.p_g[gi], -slope)],
                    Sense::Ge,
                    g.cost.eval(a) - slope * a,
                );
            }
        }
    }

    for (ei, e) in case.storage.iter().enumerate() {
        p.add_row(
            format!("es_cap_up_e{}", e.id),
            vec![(vars.p_e[ei], 1.0), (vars.r_up_e[ei], 1.0)],
            Sense::Le,
            e.p_max_mw,
        );
        p.add_row(
            format!("es_cap_dn_e{}", e.id),
            vec![(vars.p_e[ei], 1.0), (vars.r_dn_e[ei], -1.0)],
            Sense::Ge,
            -e.p_max_mw,
        );
        // End-of-interval energy window: E0 - (p + loss) * dt in [Emin, Emax].
        let dt = th.dt_h;
        p.add_row(
            format!("energy_lo_e{}", e.id),
            vec![(vars.p_e[ei], -dt), (vars.loss_e[ei], -dt)],
            Sense::Ge,
            e.e_min_mwh - e.e0_mwh,
        );
        p.add_row(
            format!("energy_hi_e{}", e.id),
            vec![(vars.p_e[ei], -dt), (vars.loss_e[ei], -dt)],
            Sense::Le,
            e.e_max_mwh - e.e0_mwh,
        );
        // Conversion loss epigraph: discharging leg and charging leg.
        p.add_row(
            format!("loss_dis_e{}", e.id),
            vec![(vars.loss_e[ei], 1.0), (vars.p_e[ei], -(1.0 / e.eta_dis - 1.0))],
            Sense::Ge,
            0.0,
        );
        p.add_row(
            format!("loss_ch_e{}", e.id),
            vec![(vars.loss_e[ei], 1.0), (vars.p_e[ei], 1.0 - e.eta_ch)],
            Sense::Ge,
            0.0,
        );
        // Inverter response headroom inside the procured ES reserves.
        let hr = vec![
            (vars.r_up_e[ei], 1.0),
            (vars.h_e[ei], -2.0 * rate_pu * e.p_max_mw),
            (vars.d_e[ei], -dev_pu * e.p_max_mw),
        ];
        p.add_row(format!("es_pfr_up_e{}", e.id), hr, Sense::Ge, 0.0);
        if !mode.is_individual() {
            let hr = vec![
                (vars.r_dn_e[ei], 1.0),
                (vars.h_e[ei], -2.0 * rate_pu * e.p_max_mw),
                (vars.d_e[ei], -dev_pu * e.p_max_mw),
            ];
            p.add_row(format!("es_pfr_dn_e{}", e.id), hr, Sense::Ge, 0.0);
        }
    }

    // AGC shares sum to one; SFR reserves cover the quantile disturbance both
    // in total and per unit at its share.
    let agc: Vec<usize> = (0..case.thermal.len()).filter(|&gi| case.thermal[gi].agc).collect();
    if agc.is_empty() {
        return Err(invalid("no AGC unit in the case; secondary regulation is unservable"));
    }
    p.add_row(
        "agc_total",
        agc.iter().map(|&gi| (vars.alpha_g[gi].unwrap(), 1.0)).collect(),
        Sense::Eq,
        1.0,
    );
    let q_up = dq.dp_up_qr_mw;
    let q_dn = dq.dp_dn_qr_mw;
    p.add_row(
        "sfr_up_total",
        agc.iter().map(|&gi| (vars.r_up_g[gi], 1.0)).collect(),
        Sense::Ge,
        q_up.max(0.0),
    );
    for &gi in &agc {
        let id = case.thermal[gi].id;
        p.add_row(
            format!("sfr_up_g{id}"),
            vec![(vars.r_up_g[gi], 1.0), (vars.alpha_g[gi].unwrap(), -q_up)],
            Sense::Ge,
            0.0,
        );
    }
    if !mode.is_individual() {
        p.add_row(
            "sfr_dn_total",
            agc.iter().map(|&gi| (vars.r_dn_g[gi], 1.0)).collect(),
            Sense::Ge,
            (-q_dn).max(0.0),
        );
        for &gi in &agc {
            let id = case.thermal[gi].id;
            p.add_row(
                format!("sfr_dn_g{id}"),
                vec![(vars.r_dn_g[gi], 1.0), (vars.alpha_g[gi].unwrap(), q_dn)],
                Sense::Ge,
                0.0,
            );
        }
    }

    // Defining equalities for the aggregate inverter response (system base).
    let mut def_h = vec![(vars.y_rate, 1.0)];
    let mut def_d = vec![(vars.y_ss, 1.0)];
    for (wi, w) in case.dibr.iter().enumerate() {
        def_h.push((vars.h_w[wi], -w.capacity_mw / p_sys));
        def_d.push((vars.d_w[wi], -w.capacity_mw / p_sys));
    }
    for (ei, e) in case.storage.iter().enumerate() {
        def_h.push((vars.h_e[ei], -e.p_max_mw / p_sys));
        def_d.push((vars.d_e[ei], -e.p_max_mw / p_sys));
    }
    p.add_row("def_h_inv", def_h, Sense::Eq, 0.0);
    p.add_row("def_d_inv", def_d, Sense::Eq, 0.0);

    // Transient (nadir) security boundary, fitted at the delta_F quantile of
    // the disturbance with a conservatism margin, as rows on the aggregates.
    let boundary = if dq.abs_dp_qf_mw > 1e-9 {
        let fitted = sfr::fit_nadir_boundary(
            case,
            dq.abs_dp_qf_mw,
            th.nadir_max_hz * (1.0 - opts.nadir_margin),
            opts.nadir_pieces,
            opts.boundary_grid,
        )?;
        for (m, &(alpha, beta)) in fitted.pieces.iter().enumerate() {
            p.add_row(
                format!("nadir_m{m}"),
                vec![(vars.y_rate, 1.0), (vars.y_ss, beta)],
                Sense::Ge,
                alpha,
            );
        }
        if let Some(floor) = fitted.d_floor_pu {
            p.add_row("nadir_floor", vec![(vars.y_ss, 1.0)], Sense::Ge, floor);
        }
        Some(fitted)
    } else {
        None
    };

    // --- chance families ---
    let mut families = Vec::new();

    // Frequency family offsets: inverter inertia/droop the disturbance of
    // scenario i demands beyond what thermal units and load damping provide.
    let w_rate: Vec<f64> = dp_l
        .iter()
        .map(|dp| (dp.abs() / p_sys / (2.0 * rate_pu) - agg0.h_thermal_s).max(0.0))
        .collect();
    let w_ss: Vec<f64> = dp_l
        .iter()
        .map(|dp| (dp.abs() / p_sys / ss_pu - agg0.d_load_pu - agg0.r_inv_pu).max(0.0))
        .collect();
    families.push(ChanceFamily { name: "freq_rate".into(), y: vars.y_rate, w: w_rate, group: ZGroup::Freq });
    families.push(ChanceFamily { name: "freq_ss".into(), y: vars.y_ss, w: w_ss, group: ZGroup::Freq });

    // DIBR headroom families: base point plus inverter response headroom must
    // fit under the realized availability.
    for (wi, w) in case.dibr.iter().enumerate() {
        let avail = set.p_avail_of(wi);
        let hi = avail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let y = p.add_var(format!("y_dibr_w{}", w.id), 0.0, inf, 0.0, false);
        vars.y_dibr.push(y);
        p.add_row(
            format!("def_dibr_w{}", w.id),
            vec![
                (vars.p_w[wi], 1.0),
                (vars.h_w[wi], 2.0 * rate_pu * w.capacity_mw),
                (vars.d_w[wi], dev_pu * w.capacity_mw),
                (y, 1.0),
            ],
            Sense::Eq,
            hi,
        );
        let wv: Vec<f64> = avail.iter().map(|a| hi - a).collect();
        families.push(ChanceFamily { name: format!("dibr_w{}", w.id), y, w: wv, group: ZGroup::Dibr });
    }

    // Line flow families: deployment-adjusted controllable flow A x against
    // the uncontrolled net-load flow e_l(xi) within +-F_l. Four one-sided
    // families per line (up/down deployment x low/high side); all lines share
    // the line indicator vector.
    let bus_of_thermal: Vec<usize> = {
        let idx = case.bus_index();
        case.thermal.iter().map(|g| idx[&g.bus]).collect()
    };
    let bus_of_dibr: Vec<usize> = {
        let idx = case.bus_index();
        case.dibr.iter().map(|w| idx[&w.bus]).collect()
    };
    let bus_of_storage: Vec<usize> = {
        let idx = case.bus_index();
        case.storage.iter().map(|e| idx[&e.bus]).collect()
    };
    let mut line_meta = Vec::with_capacity(case.lines.len());
    for (li, line) in case.lines.iter().enumerate() {
        let s = &ptdf.factors[li];
        // Uncontrolled flow per scenario: PTDF-weighted realized net load.
        let e_mw: Vec<f64> = set
            .scenarios
            .iter()
            .map(|sc| {
                case.buses
                    .iter()
                    .enumerate()
                    .map(|(bi, b)| s[bi] * ((b.load_mw + sc.zeta_d[bi]) - (b.ibr_mw + sc.zeta_h[bi])))
                    .sum()
            })
            .collect();
        let e_min = e_mw.iter().cloned().fold(f64::INFINITY, f64::min);
        let e_max = e_mw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w_low: Vec<f64> = e_mw.iter().map(|e| e - e_min).collect();
        let w_high: Vec<f64> = e_mw.iter().map(|e| e_max - e).collect();

        let mut slacks = [0usize; 4];
        for (k, (up_reg, low_side)) in
            [(true, true), (true, false), (false, true), (false, false)].into_iter().enumerate()
        {
            let reg = if up_reg { "up" } else { "dn" };
            let side = if low_side { "lo" } else { "hi" };
            // Controllable-injection flow with the full reserve deployed.
            let mut terms: Vec<(usize, f64)> = Vec::new();
            let sign = if low_side { 1.0 } else { -1.0 };
            for (gi, g) in case.thermal.iter().enumerate() {
                let c = s[bus_of_thermal[gi]] * sign;
                if c != 0.0 {
                    terms.push((vars.p_g[gi], c));
                    if g.agc {
                        if up_reg {
                            terms.push((vars.r_up_g[gi], c));
                        } else {
                            terms.push((vars.r_dn_g[gi], -c));
                        }
                    }
                }
            }
            for wi in 0..case.dibr.len() {
                let c = s[bus_of_dibr[wi]] * sign;
                if c != 0.0 {
                    terms.push((vars.p_w[wi], c));
                }
            }
            for ei in 0..case.storage.len() {
                let c = s[bus_of_storage[ei]] * sign;
                if c != 0.0 {
                    terms.push((vars.p_e[ei], c));
                }
            }
            let y = p.add_var(format!("y_line{}_{}_{}", line.id, reg, side), 0.0, inf, 0.0, false);
            slacks[k] = y;
            // low side:  A x - y = -F + min e;  high side: -A x - y = -F - max e.
            let rhs = if low_side { -line.capacity_mw + e_min } else { -line.capacity_mw - e_max };
            terms.push((y, -1.0));
            p.add_row(format!("def_line{}_{}_{}", line.id, reg, side), terms, Sense::Eq, rhs);
            families.push(ChanceFamily {
                name: format!("line{}_{}_{}", line.id, reg, side),
                y,
                w: if low_side { w_low.clone() } else { w_high.clone() },
                group: ZGroup::Line,
            });
        }
        vars.y_line.push(slacks);
        line_meta.push(LineMeta { id: line.id, capacity_mw: line.capacity_mw, e_mw });
    }

    let meta = ModelMeta {
        n_scenarios: n,
        weights,
        dp_l_mw: dp_l,
        quantiles: dq,
        p_sys_mw: p_sys,
        h_thermal_s: agg0.h_thermal_s,
        r_inv_pu: agg0.r_inv_pu,
        d_load_pu: agg0.d_load_pu,
        boundary,
        lines: line_meta,
        deltas: GroupDeltas { freq: th.delta_f, dibr: th.delta_dibr, line: th.delta_l },
        curtail_offset,
    };
    Ok(BuiltModel { program: p, families, vars, meta, mode })
}

/// Per-unit slice of a solved dispatch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThermalDecision {
    pub id: u32,
    pub p_mw: f64,
    pub r_up_mw: f64,
    pub r_dn_mw: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DibrDecision {
    pub id: u32,
    pub p_mw: f64,
    pub h_s: f64,
    pub d_pu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StorageDecision {
    pub id: u32,
    pub p_mw: f64,
    pub loss_mw: f64,
    pub r_up_mw: f64,
    pub r_dn_mw: f64,
    pub h_s: f64,
    pub d_pu: f64,
}

/// A solved operating point in engineering units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispatchDecision {
    /// Solver objective: cost rate in $/h with the linear redispatch term.
    pub objective_per_h: f64,
    /// Objective with the exact expected deployed-regulation cost instead.
    pub objective_exact_per_h: f64,
    pub thermal: Vec<ThermalDecision>,
    pub dibr: Vec<DibrDecision>,
    pub storage: Vec<StorageDecision>,
    /// Aggregate inverter inertia / droop on the system base.
    pub h_inv_s: f64,
    pub d_inv_pu: f64,
}

pub fn extract_decision(model: &BuiltModel, case: &GridCase, objective: f64, x: &[f64]) -> DispatchDecision {
    let v = &model.vars;
    DispatchDecision {
        objective_per_h: objective,
        objective_exact_per_h: evaluate_objective_exact(model, case, x, objective),
        thermal: case
            .thermal
            .iter()
            .enumerate()
            .map(|(gi, g)| ThermalDecision {
                id: g.id,
                p_mw: x[v.p_g[gi]],
                r_up_mw: x[v.r_up_g[gi]],
                r_dn_mw: x[v.r_dn_g[gi]],
                alpha: v.alpha_g[gi].map_or(0.0, |a| x[a]),
            })
            .collect(),
        dibr: case
            .dibr
            .iter()
            .enumerate()
            .map(|(wi, w)| DibrDecision { id: w.id, p_mw: x[v.p_w[wi]], h_s: x[v.h_w[wi]], d_pu: x[v.d_w[wi]] })
            .collect(),
        storage: case
            .storage
            .iter()
            .enumerate()
            .map(|(ei, e)| StorageDecision {
                id: e.id,
                p_mw: x[v.p_e[ei]],
                loss_mw: x[v.loss_e[ei]],
                r_up_mw: x[v.r_up_e[ei]],
                r_dn_mw: x[v.r_dn_e[ei]],
                h_s: x[v.h_e[ei]],
                d_pu: x[v.d_e[ei]],
            })
            .collect(),
        h_inv_s: x[v.y_rate],
        d_inv_pu: x[v.y_ss],
    }
}

/// Swap the linear redispatch approximation for the exact expected cost of
/// deployed regulation, truncated at the procured reserves.
pub fn evaluate_objective_exact(model: &BuiltModel, case: &GridCase, x: &[f64], objective_approx: f64) -> f64 {
    let mut exact = objective_approx;
    for (gi, g) in case.thermal.iter().enumerate() {
        let Some(a) = model.vars.alpha_g[gi] else { continue };
        let alpha = x[a];
        let r_up = x[model.vars.r_up_g[gi]];
        let r_dn = x[model.vars.r_dn_g[gi]];
        exact -= g.c_redispatch * alpha * model.meta.quantiles.mean_abs_dp_mw;
        let mut dep = 0.0;
        for (&dp, &pi) in model.meta.dp_l_mw.iter().zip(&model.meta.weights) {
            let d = alpha * dp;
            dep += pi * (d.max(0.0).min(r_up) + (-d).max(0.0).min(r_dn));
        }
        exact += g.c_redispatch * dep;
    }
    exact
}
