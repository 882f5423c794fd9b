//! Aggregate frequency-response model: closed-form RoCoF, frequency nadir and
//! steady-state deviation after a power imbalance, plus the piecewise-linear
//! inertia/damping security boundary used by the dispatch model.
//!
//! Devices are lumped on a common base p_sys (sum of device capacities).
//! Thermal governors contribute droop 1/R filtered by a reheat stage
//! (F_H + (1 - F_H)/(1 + s T_R)); inverters contribute virtual inertia and
//! damping; loads contribute damping. The deviation after a step -dp is the
//! step response of a second-order system with one zero, so its extremum has
//! a closed form in both the oscillatory and the overdamped regime.

use crate::grid::{GridCase, Thresholds};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SfrError {
    #[error("{0}")]
    Invalid(String),
}

/// Lumped frequency-response parameters on the p_sys base.
#[derive(Debug, Clone, Copy)]
pub struct SfrAggregates {
    pub f0_hz: f64,
    pub p_sys_mw: f64,
    /// Capacity-weighted thermal inertia (s).
    pub h_thermal_s: f64,
    /// Aggregate governor gain sum (1/R_g scaled by capacity share).
    pub r_inv_pu: f64,
    /// Gain-weighted reheat fraction.
    pub f_h: f64,
    /// Gain-weighted reheat time constant (s).
    pub t_r_s: f64,
    /// Inverter-provided inertia (s) on the p_sys base.
    pub h_inv_s: f64,
    /// Inverter-provided damping (pu) on the p_sys base.
    pub d_inv_pu: f64,
    /// Load damping (pu) on the p_sys base.
    pub d_load_pu: f64,
}

impl SfrAggregates {
    pub fn h_total_s(&self) -> f64 {
        self.h_thermal_s + self.h_inv_s
    }

    pub fn d_total_pu(&self) -> f64 {
        self.d_load_pu + self.d_inv_pu
    }

    /// Initial rate of change of frequency for a load step of dp_mw (Hz/s).
    pub fn rocof_hz_per_s(&self, dp_mw: f64) -> f64 {
        self.f0_hz * (-dp_mw / self.p_sys_mw) / (2.0 * self.h_total_s())
    }

    /// Quasi-steady-state deviation once governors settle (Hz).
    pub fn ss_dev_hz(&self, dp_mw: f64) -> f64 {
        self.f0_hz * (-dp_mw / self.p_sys_mw) / (self.d_total_pu() + self.r_inv_pu)
    }

    pub fn nadir_hz(&self, dp_mw: f64) -> f64 {
        self.nadir_detail(dp_mw).0
    }

    /// Frequency extremum and its time. A load increase gives a negative
    /// extremum; a load drop mirrors it. Returns time infinity when the
    /// response approaches steady state monotonically.
    pub fn nadir_detail(&self, dp_mw: f64) -> (f64, f64) {
        let p_signed = dp_mw / self.p_sys_mw;
        if p_signed == 0.0 {
            return (0.0, 0.0);
        }
        let sign = p_signed.signum();
        let p = p_signed.abs();
        let h2 = 2.0 * self.h_total_s();
        let d = self.d_total_pu();
        let r = self.r_inv_pu;

        if r < 1e-12 {
            // No governor: first-order decay toward -p/d.
            if d < 1e-12 {
                return (-sign * f64::INFINITY, f64::INFINITY);
            }
            return (-sign * self.f0_hz * p / d, f64::INFINITY);
        }

        let tr = self.t_r_s;
        let dr = d + r;
        let ss = -p / dr;
        let wn2 = dr / (h2 * tr);
        let wn = wn2.sqrt();
        let zeta = (h2 + (d + self.f_h * r) * tr) / (2.0 * (h2 * tr * dr).sqrt());
        let a = zeta * wn;
        // Deviation: ss * (1 - g(t)), g(t) = e^{-at}(c(t) - (wn^2 tr - a) s(t)),
        // with c/s the (co)sine pair, circular or hyperbolic by damping regime.
        let num = wn2 * tr - a;
        let (t_star, g) = if zeta < 1.0 - 1e-9 {
            let wd = wn * (1.0 - zeta * zeta).sqrt();
            let mut t = (wd * tr).atan2(a * tr - 1.0) / wd;
            if t <= 0.0 {
                t += std::f64::consts::PI / wd;
            }
            let g = (-a * t).exp() * ((wd * t).cos() - num * (wd * t).sin() / wd);
            (t, g)
        } else {
            let mu = wn * (zeta * zeta - 1.0).max(1e-18).sqrt();
            let denom = a * tr - 1.0;
            if denom > mu * tr {
                let x = mu * tr / denom;
                let t = if x < 1e-6 { tr / denom } else { x.atanh() / mu };
                // sinh(mu t)/mu, stable as mu -> 0.
                let s = if mu * t < 1e-6 { t * (1.0 + (mu * t).powi(2) / 6.0) } else { (mu * t).sinh() / mu };
                let g = (-a * t).exp() * ((mu * t).cosh() - num * s);
                (t, g)
            } else {
                // Slow zero never overtakes the poles: monotone approach.
                return (sign * self.f0_hz * ss, f64::INFINITY);
            }
        };
        (sign * self.f0_hz * ss * (1.0 - g), t_star)
    }
}

/// Capacity-weighted thermal constants plus explicit inverter totals.
pub fn aggregate(case: &GridCase, h_inv_s: f64, d_inv_pu: f64) -> SfrAggregates {
    let p_sys = case.p_sys_mw();
    let mut h_thermal = 0.0;
    let mut r_inv = 0.0;
    for g in &case.thermal {
        h_thermal += g.inertia_s * g.p_max_mw / p_sys;
        r_inv += (1.0 / g.droop_pu) * g.p_max_mw / p_sys;
    }
    let (mut f_h, mut t_r) = (0.0, 0.0);
    if r_inv > 0.0 {
        for g in &case.thermal {
            let lambda = (1.0 / g.droop_pu) * g.p_max_mw / p_sys / r_inv;
            f_h += lambda * g.reheat_fraction;
            t_r += lambda * g.reheat_time_s;
        }
    }
    SfrAggregates {
        f0_hz: case.f0_hz,
        p_sys_mw: p_sys,
        h_thermal_s: h_thermal,
        r_inv_pu: r_inv,
        f_h,
        t_r_s: t_r,
        h_inv_s,
        d_inv_pu,
        d_load_pu: case.thresholds.d_load_pu,
    }
}

/// Aggregate from per-device virtual inertia/damping given on each device's
/// own base; slices are positional against case.dibr and case.storage.
pub fn aggregate_devices(
    case: &GridCase,
    h_w: &[f64],
    d_w: &[f64],
    h_e: &[f64],
    d_e: &[f64],
) -> SfrAggregates {
    assert_eq!(h_w.len(), case.dibr.len());
    assert_eq!(d_w.len(), case.dibr.len());
    assert_eq!(h_e.len(), case.storage.len());
    assert_eq!(d_e.len(), case.storage.len());
    let p_sys = case.p_sys_mw();
    let mut h = 0.0;
    let mut d = 0.0;
    for (w, (&hw, &dw)) in case.dibr.iter().zip(h_w.iter().zip(d_w)) {
        h += hw * w.capacity_mw / p_sys;
        d += dw * w.capacity_mw / p_sys;
    }
    for (e, (&he, &de)) in case.storage.iter().zip(h_e.iter().zip(d_e)) {
        h += he * e.p_max_mw / p_sys;
        d += de * e.p_max_mw / p_sys;
    }
    aggregate(case, h, d)
}

/// Maximum inverter inertia and damping the fleet can provide (p_sys base).
pub fn inverter_limits(case: &GridCase) -> (f64, f64) {
    let p_sys = case.p_sys_mw();
    let mut h = 0.0;
    let mut d = 0.0;
    for w in &case.dibr {
        h += w.h_max_s * w.capacity_mw / p_sys;
        d += w.d_max_pu * w.capacity_mw / p_sys;
    }
    for e in &case.storage {
        h += e.h_max_s * e.p_max_mw / p_sys;
        d += e.d_max_pu * e.p_max_mw / p_sys;
    }
    (h, d)
}

/// Headroom an inverter must keep to ride out the worst admissible transient:
/// inertial power at the RoCoF limit plus damping power at the deviation
/// limit, in MW on the device base.
pub fn pfr_headroom_bound(h_s: f64, d_pu: f64, base_mw: f64, th: &Thresholds, f0_hz: f64) -> f64 {
    let rate_pu = th.rocof_max_hz_per_s / f0_hz;
    let dev_pu = th.nadir_max_hz / f0_hz;
    (2.0 * h_s * rate_pu + d_pu * dev_pu) * base_mw
}

/// Smallest inverter inertia keeping |nadir| within threshold_hz at the given
/// inverter damping, or None if even h_hi_s is not enough. |nadir| decreases
/// in both inertia and damping, so bisection applies.
pub fn required_inertia(
    case: &GridCase,
    dp_mw: f64,
    threshold_hz: f64,
    d_inv_pu: f64,
    h_hi_s: f64,
) -> Option<f64> {
    let dp = dp_mw.abs();
    let ok = |h: f64| aggregate(case, h, d_inv_pu).nadir_hz(dp).abs() <= threshold_hz;
    if ok(0.0) {
        return Some(0.0);
    }
    if !ok(h_hi_s) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, h_hi_s);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Piecewise-linear outer approximation of the nadir security boundary in the
/// (inverter damping, inverter inertia) plane: h >= alpha_m - beta_m d for
/// every piece, plus an optional damping floor below which no available
/// inertia meets the threshold.
#[derive(Debug, Clone)]
pub struct PwlBoundary {
    /// (alpha, beta) with beta >= 0; the binding envelope is their max.
    pub pieces: Vec<(f64, f64)>,
    /// Minimum inverter damping for attainability, if any.
    pub d_floor_pu: Option<f64>,
    /// Damping range the fit covers.
    pub d_range: (f64, f64),
    /// Coarse samples (d, required h) behind the fit.
    pub samples: Vec<(f64, f64)>,
}

impl PwlBoundary {
    pub fn envelope(&self, d: f64) -> f64 {
        self.pieces.iter().map(|&(a, b)| a - b * d).fold(0.0, f64::max)
    }
}

/// Fit the boundary for a disturbance of |dp_mw| at the given |nadir| limit.
/// Samples `grid` damping points, bisects the required inertia at each, fits
/// `pieces` secant lines on contiguous blocks, then lifts them on a 4x finer
/// grid so the envelope never dips below the sampled boundary.
pub fn fit_nadir_boundary(
    case: &GridCase,
    dp_mw: f64,
    threshold_hz: f64,
    pieces: usize,
    grid: usize,
) -> Result<PwlBoundary, SfrError> {
    if !(threshold_hz > 0.0) {
        return Err(SfrError::Invalid("nadir threshold must be positive".into()));
    }
    if pieces == 0 || grid < 2 {
        return Err(SfrError::Invalid("need at least one piece and two grid points".into()));
    }
    let dp = dp_mw.abs();
    let (h_cap, d_cap) = inverter_limits(case);
    let req = |d: f64| required_inertia(case, dp, threshold_hz, d, h_cap);

    // Attainability floor: below d_start even the full inertia fleet misses
    // the threshold.
    let d_start = if req(0.0).is_some() {
        0.0
    } else if req(d_cap).is_none() {
        return Err(SfrError::Invalid(format!(
            "nadir limit {threshold_hz} Hz unattainable for a {dp} MW disturbance even at full inverter response"
        )));
    } else {
        let (mut lo, mut hi) = (0.0, d_cap);
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if req(mid).is_some() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    let span = d_cap - d_start;
    let n = if span <= 1e-12 { 1 } else { grid };
    let mut samples = Vec::with_capacity(n);
    for j in 0..n {
        let d = if n == 1 { d_start } else { d_start + span * j as f64 / (n - 1) as f64 };
        // Clamp to the cap: coarse floor bisection can leave the first point
        // a hair short of attainable.
        let h = req(d).unwrap_or(h_cap);
        samples.push((d, h));
    }

    // Secant per contiguous block, lifted to clear every block sample.
    let m = pieces.min(n.saturating_sub(1)).max(1);
    let mut fitted: Vec<(f64, f64)> = Vec::with_capacity(m);
    for piece in 0..m {
        let j0 = (piece * (n - 1)) / m;
        let j1 = (((piece + 1) * (n - 1)) / m).max(j0 + usize::from(n > 1)).min(n - 1);
        let (d0, h0) = samples[j0];
        let (d1, h1) = samples[j1];
        let beta = if d1 - d0 > 1e-12 { ((h0 - h1) / (d1 - d0)).max(0.0) } else { 0.0 };
        let alpha = samples[j0..=j1]
            .iter()
            .map(|&(d, h)| h + beta * d)
            .fold(f64::NEG_INFINITY, f64::max);
        fitted.push((alpha, beta));
    }

    // Conservatism pass on a finer grid: lift the active piece wherever the
    // envelope dips below the true requirement.
    if n > 1 {
        let fine = 4 * n;
        for j in 0..fine {
            let d = d_start + span * j as f64 / (fine - 1) as f64;
            let need = req(d).unwrap_or(h_cap);
            let (mut best, mut best_v) = (0, f64::NEG_INFINITY);
            for (k, &(a, b)) in fitted.iter().enumerate() {
                let v = a - b * d;
                if v > best_v {
                    best_v = v;
                    best = k;
                }
            }
            if best_v < need {
                fitted[best].0 += need - best_v;
            }
        }
    }

    // Drop vacuous pieces (never positive on d >= 0).
    fitted.retain(|&(a, _)| a > 1e-12);
    fitted.sort_by(|x, y| y.1.total_cmp(&x.1));

    Ok(PwlBoundary {
        pieces: fitted,
        d_floor_pu: if d_start > 1e-12 { Some(d_start) } else { None },
        d_range: (d_start, d_cap),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bus, Dibr, FuelCurve, GridCase, Line, Storage, ThermalUnit};
    use approx::assert_relative_eq;

    fn unit(id: u32, p_max: f64, h: f64, r: f64, fh: f64, tr: f64) -> ThermalUnit {
        ThermalUnit {
            id,
            bus: 1,
            p_min_mw: 0.0,
            p_max_mw: p_max,
            cost: FuelCurve { c2: 0.01, c1: 30.0, c0: 0.0 },
            c_res_up: 8.0,
            c_res_dn: 8.0,
            c_redispatch: 24.0,
            droop_pu: r,
            inertia_s: h,
            reheat_fraction: fh,
            reheat_time_s: tr,
            ramp_up_mw_per_min: 5.0,
            ramp_dn_mw_per_min: 5.0,
            agc: true,
        }
    }

    fn two_unit_case() -> GridCase {
        GridCase {
            name: "sfr".into(),
            base_mva: 100.0,
            f0_hz: 60.0,
            buses: vec![
                Bus { id: 1, load_mw: 150.0, ibr_mw: 0.0 },
                Bus { id: 2, load_mw: 100.0, ibr_mw: 0.0 },
            ],
            lines: vec![Line { id: 1, from: 1, to: 2, reactance_pu: 0.1, capacity_mw: 300.0 }],
            thermal: vec![unit(1, 100.0, 4.0, 0.05, 0.3, 8.0), unit(2, 200.0, 6.0, 0.04, 0.4, 7.0)],
            dibr: vec![],
            storage: vec![],
            thresholds: crate::grid::Thresholds {
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
            },
        }
    }

    fn with_inverters() -> GridCase {
        let mut case = two_unit_case();
        case.dibr = vec![Dibr { id: 1, bus: 2, capacity_mw: 80.0, c_curtail: 15.0, h_max_s: 8.0, d_max_pu: 12.0 }];
        case.storage = vec![Storage {
            id: 1,
            bus: 1,
            p_max_mw: 20.0,
            e_min_mwh: 2.0,
            e_max_mwh: 12.0,
            e0_mwh: 6.0,
            eta_ch: 0.9,
            eta_dis: 0.95,
            c_loss: 8.0,
            c_res_up: 6.0,
            c_res_dn: 6.0,
            h_max_s: 10.0,
            d_max_pu: 15.0,
        }];
        case
    }

    #[test]
    fn thermal_aggregates_match_hand_calculation() {
        let agg = aggregate(&two_unit_case(), 0.0, 0.0);
        // p_sys = 300; H = (4*100 + 6*200)/300; sum 1/R shares = (2000 + 5000)/300.
        assert_relative_eq!(agg.p_sys_mw, 300.0);
        assert_relative_eq!(agg.h_thermal_s, 16.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(agg.r_inv_pu, 70.0 / 3.0, max_relative = 1e-12);
        // Gain weights 2/7 and 5/7.
        assert_relative_eq!(agg.f_h, (2.0 * 0.3 + 5.0 * 0.4) / 7.0, max_relative = 1e-12);
        assert_relative_eq!(agg.t_r_s, (2.0 * 8.0 + 5.0 * 7.0) / 7.0, max_relative = 1e-12);
    }

    #[test]
    fn rocof_and_ss_match_hand_values() {
        let mut agg = aggregate(&two_unit_case(), 0.0, 0.0);
        agg.h_thermal_s = 5.0;
        agg.r_inv_pu = 20.0;
        agg.d_load_pu = 1.0;
        // dp = 30 MW of 300 -> 0.1 pu.
        assert_relative_eq!(agg.rocof_hz_per_s(30.0), -0.6, max_relative = 1e-12);
        assert_relative_eq!(agg.ss_dev_hz(30.0), -60.0 * 0.1 / 21.0, max_relative = 1e-12);
        assert_relative_eq!(agg.rocof_hz_per_s(-30.0), 0.6, max_relative = 1e-12);
    }

    // Fixed-step RK4 on the two-state aggregate model, as an independent
    // check of the closed-form extremum.
    fn rk4_nadir(agg: &SfrAggregates, dp_mw: f64) -> (f64, f64) {
        let p = dp_mw / agg.p_sys_mw;
        let (h2, d, r) = (2.0 * agg.h_total_s(), agg.d_total_pu(), agg.r_inv_pu);
        let (fh, tr) = (agg.f_h, agg.t_r_s);
        let deriv = |s: [f64; 2]| {
            let pm = -r * (fh * s[0] + (1.0 - fh) * s[1]);
            [(-p - d * s[0] + pm) / h2, (s[0] - s[1]) / tr]
        };
        let dt = 1e-4;
        let mut s = [0.0f64; 2];
        let (mut worst, mut t_at) = (0.0f64, 0.0f64);
        let mut t = 0.0;
        while t < 60.0 {
            let k1 = deriv(s);
            let k2 = deriv([s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1]]);
            let k3 = deriv([s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1]]);
            let k4 = deriv([s[0] + dt * k3[0], s[1] + dt * k3[1]]);
            s[0] += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            s[1] += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            t += dt;
            if s[0].abs() > worst.abs() {
                worst = s[0];
                t_at = t;
            }
        }
        (agg.f0_hz * worst, t_at)
    }

    #[test]
    fn nadir_closed_form_matches_rk4_across_damping_regimes() {
        let case = two_unit_case();
        // Sweep load damping to cross from oscillatory to overdamped.
        for d_load in [0.5, 1.0, 4.0, 10.0, 20.0, 45.0, 80.0] {
            let mut agg = aggregate(&case, 0.6, 0.8);
            agg.d_load_pu = d_load;
            let (nadir, t_star) = agg.nadir_detail(30.0);
            let (sim, t_sim) = rk4_nadir(&agg, 30.0);
            assert_relative_eq!(nadir, sim, max_relative = 1e-4);
            if t_star.is_finite() {
                assert!((t_star - t_sim).abs() < 0.05, "d={d_load}: t {t_star} vs {t_sim}");
            } else {
                // Monotone regime: extremum is the steady-state value.
                assert_relative_eq!(nadir, agg.ss_dev_hz(30.0), max_relative = 1e-3);
            }
        }
    }

    #[test]
    fn nadir_is_monotone_in_inertia_and_damping_and_sign_symmetric() {
        let case = two_unit_case();
        let mut prev = f64::INFINITY;
        for h in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let agg = aggregate(&case, h, 0.5);
            let n = agg.nadir_hz(36.0).abs();
            assert!(n < prev, "inertia {h}");
            prev = n;
        }
        prev = f64::INFINITY;
        for d in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let agg = aggregate(&case, 1.0, d);
            let n = agg.nadir_hz(36.0).abs();
            assert!(n < prev, "damping {d}");
            prev = n;
        }
        let agg = aggregate(&case, 1.0, 1.0);
        assert_relative_eq!(agg.nadir_hz(36.0), -agg.nadir_hz(-36.0), max_relative = 1e-12);
    }

    #[test]
    fn nadir_approaches_steady_state_for_large_inertia() {
        let agg = aggregate(&two_unit_case(), 1e4, 0.0);
        let ratio = agg.nadir_hz(30.0) / agg.ss_dev_hz(30.0);
        assert!((1.0..1.01).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_disturbance_gives_zero_metrics() {
        let agg = aggregate(&two_unit_case(), 0.0, 0.0);
        assert_eq!(agg.nadir_hz(0.0), 0.0);
        assert_eq!(agg.rocof_hz_per_s(0.0), 0.0);
        assert_eq!(agg.ss_dev_hz(0.0), 0.0);
    }

    #[test]
    fn headroom_bound_matches_hand_value() {
        let th = two_unit_case().thresholds;
        // (2*3*(0.5/60) + 8*(0.5/60)) * 100 = 35/3.
        assert_relative_eq!(pfr_headroom_bound(3.0, 8.0, 100.0, &th, 60.0), 35.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn required_inertia_is_tight_at_the_threshold() {
        let case = with_inverters();
        let (h_cap, _) = inverter_limits(&case);
        let h = required_inertia(&case, 48.0, 0.60, 2.0, h_cap).unwrap();
        assert!(h > 0.0 && h < h_cap);
        let at = aggregate(&case, h, 2.0).nadir_hz(48.0).abs();
        assert_relative_eq!(at, 0.60, epsilon = 1e-6);
        // Slightly less inertia must violate.
        assert!(aggregate(&case, h - 1e-4, 2.0).nadir_hz(48.0).abs() > 0.60);
    }

    #[test]
    fn boundary_fit_is_conservative_and_reasonably_tight() {
        let case = with_inverters();
        let (h_cap, d_cap) = inverter_limits(&case);
        let b = fit_nadir_boundary(&case, 48.0, 0.60, 4, 32).unwrap();
        assert!(!b.pieces.is_empty());
        assert!(b.d_range.1 <= d_cap + 1e-12);
        let (d_lo, d_hi) = b.d_range;
        let mut worst_gap = 0.0f64;
        for j in 0..200 {
            let d = d_lo + (d_hi - d_lo) * j as f64 / 199.0;
            let need = required_inertia(&case, 48.0, 0.60, d, h_cap).unwrap_or(h_cap);
            let env = b.envelope(d);
            assert!(env >= need - 1e-6, "gap at d={d}: env {env} < need {need}");
            // The fitted point must itself satisfy the limit.
            assert!(aggregate(&case, env, d).nadir_hz(48.0).abs() <= 0.60 + 1e-9);
            worst_gap = worst_gap.max(env - need);
        }
        let h_spread = b.samples.first().unwrap().1 - b.samples.last().unwrap().1;
        assert!(worst_gap <= 0.30 * h_spread.max(0.1), "worst gap {worst_gap} vs spread {h_spread}");
    }

    #[test]
    fn boundary_floor_marks_unattainable_damping() {
        // Shrink the inertia offer so low damping cannot meet the limit.
        let mut case = with_inverters();
        case.dibr[0].h_max_s = 0.5;
        case.storage[0].h_max_s = 0.5;
        let (h_cap, _) = inverter_limits(&case);
        let b = fit_nadir_boundary(&case, 60.0, 0.78, 4, 24).unwrap();
        let floor = b.d_floor_pu.expect("tight limit needs a damping floor");
        assert!(required_inertia(&case, 60.0, 0.78, floor * 0.98, h_cap).is_none());
        assert!(required_inertia(&case, 60.0, 0.78, floor + 1e-6, h_cap).is_some());
    }

    #[test]
    fn unattainable_threshold_is_an_error() {
        let case = with_inverters();
        assert!(fit_nadir_boundary(&case, 200.0, 0.01, 4, 16).is_err());
    }
}
