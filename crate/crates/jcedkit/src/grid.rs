//! Grid case model: buses, lines, devices, security thresholds, and the DC
//! power transfer distribution factor (PTDF) matrix.
//!
//! Conventions: powers are MW on the declared `base_mva`; reactances are per
//! unit; frequency thresholds are Hz and converted to per unit at module
//! boundaries via `f0_hz`. Storage discharge is positive.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u32 },
    #[error("{kind} {id} references unknown bus {bus}")]
    UnknownBus { kind: &'static str, id: u32, bus: u32 },
    #[error("line {0} has non-positive reactance")]
    BadReactance(u32),
    #[error("network is not connected (bus {0} unreachable from bus {1})")]
    Disconnected(u32, u32),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> CaseError {
    CaseError::Invalid(msg.into())
}

/// Load and uncontrollable-IBR forecast at one bus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u32,
    /// Forecast load d_b (MW).
    #[serde(default)]
    pub load_mw: f64,
    /// Forecast uncontrollable IBR output h_b (MW), netted against load.
    #[serde(default)]
    pub ibr_mw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    /// Series reactance (p.u. on base_mva).
    pub reactance_pu: f64,
    /// Thermal limit F_l (MW), applied in both directions.
    pub capacity_mw: f64,
}

/// Quadratic fuel curve c2*p^2 + c1*p + c0 ($/h with p in MW).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuelCurve {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl FuelCurve {
    pub fn eval(&self, p: f64) -> f64 {
        self.c2 * p * p + self.c1 * p + self.c0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalUnit {
    pub id: u32,
    pub bus: u32,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
    pub cost: FuelCurve,
    /// Up/down reserve capacity prices ($/MW/h).
    pub c_res_up: f64,
    pub c_res_dn: f64,
    /// Redispatch (AGC deployment) price ($/MWh).
    pub c_redispatch: f64,
    /// Governor droop R_g (p.u. on the unit base).
    pub droop_pu: f64,
    /// Rotor inertia constant H_g (s on the unit base).
    pub inertia_s: f64,
    /// Reheat turbine high-pressure fraction F_H (dimensionless).
    pub reheat_fraction: f64,
    /// Reheat time constant T_R (s).
    pub reheat_time_s: f64,
    pub ramp_up_mw_per_min: f64,
    pub ramp_dn_mw_per_min: f64,
    /// Participates in secondary frequency regulation (AGC).
    pub agc: bool,
}

/// Dispatchable inverter-based resource (wind/PV plant with grid-forming
/// controls); its virtual inertia H and droop D are decision variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dibr {
    pub id: u32,
    pub bus: u32,
    /// Nameplate capacity p_cap (MW); also the device per-unit base.
    pub capacity_mw: f64,
    /// Curtailment price c_w ($/MWh).
    pub c_curtail: f64,
    /// Upper bound on virtual inertia (s on the device base).
    pub h_max_s: f64,
    /// Upper bound on droop response (p.u. on the device base).
    pub d_max_pu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Storage {
    pub id: u32,
    pub bus: u32,
    /// Symmetric power rating (MW); also the device per-unit base.
    pub p_max_mw: f64,
    pub e_min_mwh: f64,
    pub e_max_mwh: f64,
    pub e0_mwh: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// Price on conversion losses ($/MWh).
    pub c_loss: f64,
    pub c_res_up: f64,
    pub c_res_dn: f64,
    pub h_max_s: f64,
    pub d_max_pu: f64,
}

/// Frequency-security thresholds and chance-constraint significance levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// RoCoF limit (Hz/s).
    pub rocof_max_hz_per_s: f64,
    /// Maximum transient deviation / nadir limit (Hz).
    pub nadir_max_hz: f64,
    /// Quasi-steady-state deviation limit (Hz).
    pub ss_max_hz: f64,
    /// Aggregate load damping D_O (p.u. on system capacity base).
    pub d_load_pu: f64,
    /// Dispatch interval length (h).
    pub dt_h: f64,
    pub delta_f: f64,
    pub delta_dibr: f64,
    pub delta_sfr: f64,
    pub delta_l: f64,
    /// Redispatch quantile level; defaults to delta_sfr when absent.
    #[serde(default)]
    pub delta_r: Option<f64>,
}

impl Thresholds {
    pub fn delta_r(&self) -> f64 {
        self.delta_r.unwrap_or(self.delta_sfr)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCase {
    pub name: String,
    pub base_mva: f64,
    pub f0_hz: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub thermal: Vec<ThermalUnit>,
    pub dibr: Vec<Dibr>,
    pub storage: Vec<Storage>,
    pub thresholds: Thresholds,
}

impl GridCase {
    /// Total generation capacity (MW); the system base for frequency dynamics.
    pub fn p_sys_mw(&self) -> f64 {
        self.thermal.iter().map(|g| g.p_max_mw).sum::<f64>()
            + self.dibr.iter().map(|w| w.capacity_mw).sum::<f64>()
            + self.storage.iter().map(|e| e.p_max_mw).sum::<f64>()
    }

    /// Net forecast load: sum of d_b - h_b (MW).
    pub fn net_load_mw(&self) -> f64 {
        self.buses.iter().map(|b| b.load_mw - b.ibr_mw).sum()
    }

    /// Default slack: the bus hosting the largest thermal unit.
    pub fn default_slack(&self) -> u32 {
        self.thermal
            .iter()
            .max_by(|a, b| a.p_max_mw.total_cmp(&b.p_max_mw).then(b.id.cmp(&a.id)))
            .map(|g| g.bus)
            .unwrap_or_else(|| self.buses[0].id)
    }

    pub fn bus_index(&self) -> BTreeMap<u32, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        if self.buses.is_empty() {
            return Err(invalid("case has no buses"));
        }
        if self.thermal.is_empty() {
            return Err(invalid("case has no thermal units (governor aggregate undefined)"));
        }
        if !(self.base_mva > 0.0) || !(self.f0_hz > 0.0) {
            return Err(invalid("base_mva and f0_hz must be positive"));
        }
        let mut bus_ids = BTreeSet::new();
        for b in &self.buses {
            if !bus_ids.insert(b.id) {
                return Err(CaseError::DuplicateId { kind: "bus", id: b.id });
            }
            if b.load_mw < 0.0 || b.ibr_mw < 0.0 {
                return Err(invalid(format!("bus {}: negative load or ibr forecast", b.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for l in &self.lines {
            if !seen.insert(l.id) {
                return Err(CaseError::DuplicateId { kind: "line", id: l.id });
            }
            for end in [l.from, l.to] {
                if !bus_ids.contains(&end) {
                    return Err(CaseError::UnknownBus { kind: "line", id: l.id, bus: end });
                }
            }
            if !(l.reactance_pu > 0.0) {
                return Err(CaseError::BadReactance(l.id));
            }
            if !(l.capacity_mw > 0.0) {
                return Err(invalid(format!("line {}: capacity must be positive", l.id)));
            }
            if l.from == l.to {
                return Err(invalid(format!("line {}: self-loop", l.id)));
            }
        }
        let mut dev_seen = BTreeSet::new();
        for g in &self.thermal {
            if !dev_seen.insert(g.id) {
                return Err(CaseError::DuplicateId { kind: "thermal", id: g.id });
            }
            if !bus_ids.contains(&g.bus) {
                return Err(CaseError::UnknownBus { kind: "thermal", id: g.id, bus: g.bus });
            }
            if !(g.p_min_mw >= 0.0 && g.p_max_mw >= g.p_min_mw) {
                return Err(invalid(format!("thermal {}: bad power bounds", g.id)));
            }
            if !(g.droop_pu > 0.0) {
                return Err(invalid(format!("thermal {}: droop must be positive", g.id)));
            }
            if !(g.inertia_s >= 0.0) || !(g.reheat_time_s > 0.0) {
                return Err(invalid(format!("thermal {}: bad inertia or reheat time", g.id)));
            }
            if !(0.0..1.0).contains(&g.reheat_fraction) {
                return Err(invalid(format!("thermal {}: reheat fraction outside [0,1)", g.id)));
            }
            if g.ramp_up_mw_per_min < 0.0 || g.ramp_dn_mw_per_min < 0.0 || g.cost.c2 < 0.0 {
                return Err(invalid(format!("thermal {}: negative ramp or concave cost", g.id)));
            }
        }
        let mut dev_seen = BTreeSet::new();
        for w in &self.dibr {
            if !dev_seen.insert(w.id) {
                return Err(CaseError::DuplicateId { kind: "dibr", id: w.id });
            }
            if !bus_ids.contains(&w.bus) {
                return Err(CaseError::UnknownBus { kind: "dibr", id: w.id, bus: w.bus });
            }
            if w.capacity_mw < 0.0 || w.h_max_s < 0.0 || w.d_max_pu < 0.0 {
                return Err(invalid(format!("dibr {}: negative capacity or control bounds", w.id)));
            }
        }
        let mut dev_seen = BTreeSet::new();
        for e in &self.storage {
            if !dev_seen.insert(e.id) {
                return Err(CaseError::DuplicateId { kind: "storage", id: e.id });
            }
            if !bus_ids.contains(&e.bus) {
                return Err(CaseError::UnknownBus { kind: "storage", id: e.id, bus: e.bus });
            }
            if !(e.p_max_mw >= 0.0) {
                return Err(invalid(format!("storage {}: negative power rating", e.id)));
            }
            if !(e.e_min_mwh <= e.e0_mwh && e.e0_mwh <= e.e_max_mwh) {
                return Err(invalid(format!("storage {}: energy bounds must satisfy min <= e0 <= max", e.id)));
            }
            if !(e.eta_ch > 0.0 && e.eta_ch <= 1.0 && e.eta_dis > 0.0 && e.eta_dis <= 1.0) {
                return Err(invalid(format!("storage {}: efficiencies must lie in (0,1]", e.id)));
            }
            if e.h_max_s < 0.0 || e.d_max_pu < 0.0 {
                return Err(invalid(format!("storage {}: negative control bounds", e.id)));
            }
        }
        let t = &self.thresholds;
        if !(t.rocof_max_hz_per_s > 0.0 && t.nadir_max_hz > 0.0 && t.ss_max_hz > 0.0) {
            return Err(invalid("frequency thresholds must be positive"));
        }
        if !(t.d_load_pu >= 0.0 && t.dt_h > 0.0) {
            return Err(invalid("d_load_pu must be >= 0 and dt_h > 0"));
        }
        for (name, d) in [
            ("delta_f", t.delta_f),
            ("delta_dibr", t.delta_dibr),
            ("delta_sfr", t.delta_sfr),
            ("delta_l", t.delta_l),
            ("delta_r", t.delta_r()),
        ] {
            if !(0.0..=1.0).contains(&d) {
                return Err(invalid(format!("{name} outside [0,1]")));
            }
        }
        self.check_connected()?;
        Ok(())
    }

    fn check_connected(&self) -> Result<(), CaseError> {
        let idx = self.bus_index();
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            let (f, t) = (idx[&l.from], idx[&l.to]);
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(CaseError::Disconnected(self.buses[i].id, self.buses[0].id));
        }
        Ok(())
    }
}

/// Parse and validate a case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<GridCase, CaseError> {
    let text = std::fs::read_to_string(path)?;
    let case: GridCase = serde_json::from_str(&text)?;
    case.validate()?;
    Ok(case)
}

/// Serialize a case deterministically (pretty JSON, struct field order).
pub fn save_case(case: &GridCase, path: impl AsRef<Path>) -> Result<(), CaseError> {
    let mut text = serde_json::to_string_pretty(case)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Line-by-bus injection sensitivities, slack column identically zero.
#[derive(Debug, Clone)]
pub struct PtdfMatrix {
    pub slack: u32,
    pub line_ids: Vec<u32>,
    pub bus_ids: Vec<u32>,
    /// Row-major: `factors[l][b]` = MW on line l per MW injected at bus b
    /// (withdrawn at the slack).
    pub factors: Vec<Vec<f64>>,
}

impl PtdfMatrix {
    /// Flow on each line (MW) for a full injection vector (bus order).
    pub fn flows(&self, injections: &[f64]) -> Vec<f64> {
        self.factors
            .iter()
            .map(|row| row.iter().zip(injections).map(|(s, p)| s * p).sum())
            .collect()
    }
}

/// DC PTDF from the reduced nodal susceptance matrix.
///
/// Builds B with entries 1/x per line, removes the slack row/column, and
/// solves B_red * theta = e_b for each non-slack bus; line sensitivities are
/// (theta_from - theta_to)/x. O(n^3) dense, fine for study-scale networks.
pub fn compute_ptdf(case: &GridCase, slack: Option<u32>) -> Result<PtdfMatrix, CaseError> {
    case.validate()?;
    let idx = case.bus_index();
    let slack = slack.unwrap_or_else(|| case.default_slack());
    let slack_i = *idx
        .get(&slack)
        .ok_or(CaseError::UnknownBus { kind: "slack", id: 0, bus: slack })?;
    let n = case.buses.len();
    let m = case.lines.len();

    let mut b_full = nalgebra::DMatrix::<f64>::zeros(n, n);
    for l in &case.lines {
        let (f, t) = (idx[&l.from], idx[&l.to]);
        let b = 1.0 / l.reactance_pu;
        b_full[(f, f)] += b;
        b_full[(t, t)] += b;
        b_full[(f, t)] -= b;
        b_full[(t, f)] -= b;
    }
    // Reduced system without the slack row/column.
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack_i).collect();
    let mut b_red = nalgebra::DMatrix::<f64>::zeros(n - 1, n - 1);
    for (ri, &i) in keep.iter().enumerate() {
        for (rj, &j) in keep.iter().enumerate() {
            b_red[(ri, rj)] = b_full[(i, j)];
        }
    }
    let lu = b_red.lu();

    // theta columns for unit injections at each kept bus.
    let mut theta = vec![vec![0.0; n]; n]; // theta[b][node]
    for (ri, &i) in keep.iter().enumerate() {
        let mut rhs = nalgebra::DVector::<f64>::zeros(n - 1);
        rhs[ri] = 1.0;
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| invalid("singular susceptance matrix (islanded network?)"))?;
        for (rj, &j) in keep.iter().enumerate() {
            theta[i][j] = sol[rj];
        }
    }

    let mut factors = vec![vec![0.0; n]; m];
    for (li, l) in case.lines.iter().enumerate() {
        let (f, t) = (idx[&l.from], idx[&l.to]);
        for b in 0..n {
            factors[li][b] = (theta[b][f] - theta[b][t]) / l.reactance_pu;
        }
    }

    Ok(PtdfMatrix {
        slack,
        line_ids: case.lines.iter().map(|l| l.id).collect(),
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        factors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus(id: u32, load: f64) -> Bus {
        Bus { id, load_mw: load, ibr_mw: 0.0 }
    }

    fn line(id: u32, from: u32, to: u32, x: f64) -> Line {
        Line { id, from, to, reactance_pu: x, capacity_mw: 100.0 }
    }

    fn unit(id: u32, bus: u32, p_max: f64) -> ThermalUnit {
        ThermalUnit {
            id,
            bus,
            p_min_mw: 0.0,
            p_max_mw: p_max,
            cost: FuelCurve { c2: 0.01, c1: 30.0, c0: 0.0 },
            c_res_up: 12.0,
            c_res_dn: 12.0,
            c_redispatch: 36.0,
            droop_pu: 0.05,
            inertia_s: 4.0,
            reheat_fraction: 0.3,
            reheat_time_s: 8.0,
            ramp_up_mw_per_min: 4.0,
            ramp_dn_mw_per_min: 4.0,
            agc: true,
        }
    }

    fn thresholds() -> Thresholds {
        Thresholds {
            rocof_max_hz_per_s: 0.5,
            nadir_max_hz: 0.5,
            ss_max_hz: 0.25,
            d_load_pu: 1.0,
            dt_h: 0.25,
            delta_f: 0.0,
            delta_dibr: 0.05,
            delta_sfr: 0.05,
            delta_l: 0.05,
            delta_r: None,
        }
    }

    fn triangle_case() -> GridCase {
        GridCase {
            name: "tri".into(),
            base_mva: 100.0,
            f0_hz: 60.0,
            buses: vec![bus(1, 0.0), bus(2, 50.0), bus(3, 50.0)],
            lines: vec![line(1, 1, 2, 0.1), line(2, 2, 3, 0.1), line(3, 1, 3, 0.1)],
            thermal: vec![unit(1, 1, 100.0)],
            dibr: vec![],
            storage: vec![],
            thresholds: thresholds(),
        }
    }

    #[test]
    fn triangle_ptdf_matches_hand_solution() {
        // Equal reactances: injection at bus 1 toward slack bus 3 splits 2/3
        // on the direct line and 1/3 on the two-hop path.
        let case = triangle_case();
        let ptdf = compute_ptdf(&case, Some(3)).unwrap();
        let col = |l: usize| ptdf.factors[l][0]; // bus 1 column
        assert!((col(0) - 1.0 / 3.0).abs() < 1e-12); // line 1-2
        assert!((col(1) - 1.0 / 3.0).abs() < 1e-12); // line 2-3
        assert!((col(2) - 2.0 / 3.0).abs() < 1e-12); // line 1-3
        for row in &ptdf.factors {
            assert_eq!(row[2], 0.0); // slack column zero
        }
    }

    #[test]
    fn ptdf_invariant_under_uniform_reactance_scaling() {
        let case = triangle_case();
        let mut scaled = case.clone();
        for l in &mut scaled.lines {
            l.reactance_pu *= 7.5;
        }
        let a = compute_ptdf(&case, None).unwrap();
        let b = compute_ptdf(&scaled, None).unwrap();
        for (ra, rb) in a.factors.iter().zip(&b.factors) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ptdf_flows_match_direct_dc_solve() {
        // Oracle: solve B_red * theta = p directly with hand-rolled Gaussian
        // elimination and compare line flows.
        let case = triangle_case();
        let ptdf = compute_ptdf(&case, Some(1)).unwrap();
        let inj = [30.0, -10.0, -20.0];
        let flows = ptdf.flows(&inj);

        // Hand-rolled reduced solve, slack = bus 1 (index 0).
        // B_red over buses 2,3 with x = 0.1 everywhere:
        // [ 20 -10; -10 20 ] theta = [p2; p3]
        let (a, b, c, d) = (20.0, -10.0, -10.0, 20.0);
        let det = a * d - b * c;
        let th2 = (d * inj[1] - b * inj[2]) / det;
        let th3 = (-c * inj[1] + a * inj[2]) / det;
        let expect = [(0.0 - th2) / 0.1, (th2 - th3) / 0.1, (0.0 - th3) / 0.1];
        for (f, e) in flows.iter().zip(expect) {
            assert!((f - e).abs() < 1e-9, "{f} vs {e}");
        }
    }

    #[test]
    fn ptdf_entries_bounded_for_positive_reactances() {
        let case = triangle_case();
        let ptdf = compute_ptdf(&case, None).unwrap();
        for row in &ptdf.factors {
            for &s in row {
                assert!(s.abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn disconnected_network_rejected() {
        let mut case = triangle_case();
        case.buses.push(bus(9, 5.0));
        let err = case.validate().unwrap_err();
        assert!(matches!(err, CaseError::Disconnected(9, _)));
    }

    #[test]
    fn duplicate_and_dangling_ids_rejected() {
        let mut case = triangle_case();
        case.lines[1].from = 77;
        assert!(matches!(case.validate().unwrap_err(), CaseError::UnknownBus { .. }));

        let mut case = triangle_case();
        case.buses[1].id = 1;
        assert!(matches!(case.validate().unwrap_err(), CaseError::DuplicateId { .. }));
    }

    #[test]
    fn default_slack_is_largest_unit_bus() {
        let mut case = triangle_case();
        case.thermal.push(unit(2, 2, 500.0));
        assert_eq!(case.default_slack(), 2);
    }

    #[test]
    fn case_roundtrip_is_bit_identical() {
        let case = triangle_case();
        let dir = std::env::temp_dir().join(format!("jcedkit-grid-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("a.json");
        let p2 = dir.join("b.json");
        save_case(&case, &p1).unwrap();
        let loaded = load_case(&p1).unwrap();
        save_case(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }
}
