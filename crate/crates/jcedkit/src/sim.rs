//! Time-domain frequency response on a uniform-frequency model: one swing
//! equation on the system base, one reheat state per thermal governor,
//! inverter inertia/damping as algebraic feedback. Fixed-step RK4.
//!
//! The closed forms in [`crate::sfr`] lump governors into one gain-weighted
//! reheat stage; this simulator keeps them separate, so it is the reference
//! the lumped model is checked against.

use crate::grid::GridCase;
use crate::model::DispatchDecision;
use crate::sfr;
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub t_end_s: f64,
    pub dt_s: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { t_end_s: 60.0, dt_s: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub t_s: Vec<f64>,
    pub f_dev_hz: Vec<f64>,
    pub rocof_hz_per_s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimMetrics {
    pub rocof_hz_per_s: f64,
    pub nadir_hz: f64,
    pub nadir_time_s: f64,
    pub ss_dev_hz: f64,
}

struct FleetModel {
    f0_hz: f64,
    h_total_s: f64,
    d_total_pu: f64,
    // Per governor: (capacity share, 1/R, F_H, T_R).
    governors: Vec<(f64, f64, f64, f64)>,
    dp_pu: f64,
}

impl FleetModel {
    fn new(case: &GridCase, h_w: &[f64], d_w: &[f64], h_e: &[f64], d_e: &[f64], dp_mw: f64) -> Self {
        let agg = sfr::aggregate_devices(case, h_w, d_w, h_e, d_e);
        let p_sys = agg.p_sys_mw;
        let governors = case
            .thermal
            .iter()
            .map(|g| (g.p_max_mw / p_sys, 1.0 / g.droop_pu, g.reheat_fraction, g.reheat_time_s))
            .collect();
        FleetModel {
            f0_hz: agg.f0_hz,
            h_total_s: agg.h_total_s(),
            d_total_pu: agg.d_total_pu(),
            governors,
            dp_pu: dp_mw / p_sys,
        }
    }

    // state = [f_pu, x_1 .. x_G]; returns d(state)/dt.
    fn deriv(&self, state: &[f64], out: &mut [f64]) {
        let f = state[0];
        let mut pm = 0.0;
        for (k, &(share, gain, fh, tr)) in self.governors.iter().enumerate() {
            let x = state[1 + k];
            pm -= share * gain * (fh * f + (1.0 - fh) * x);
            out[1 + k] = (f - x) / tr;
        }
        out[0] = (-self.dp_pu - self.d_total_pu * f + pm) / (2.0 * self.h_total_s);
    }
}

/// Integrate the post-disturbance response for a load step of dp_mw.
/// Virtual inertia/damping slices are device-base and positional against
/// case.dibr and case.storage.
pub fn simulate(
    case: &GridCase,
    h_w: &[f64],
    d_w: &[f64],
    h_e: &[f64],
    d_e: &[f64],
    dp_mw: f64,
    opts: &SimOptions,
) -> (Trajectory, SimMetrics) {
    let model = FleetModel::new(case, h_w, d_w, h_e, d_e, dp_mw);
    let n_states = 1 + model.governors.len();
    let steps = (opts.t_end_s / opts.dt_s).round() as usize;
    let dt = opts.dt_s;

    let mut state = vec![0.0; n_states];
    let mut k1 = vec![0.0; n_states];
    let mut k2 = vec![0.0; n_states];
    let mut k3 = vec![0.0; n_states];
    let mut k4 = vec![0.0; n_states];
    let mut tmp = vec![0.0; n_states];

    let mut traj = Trajectory {
        t_s: Vec::with_capacity(steps + 1),
        f_dev_hz: Vec::with_capacity(steps + 1),
        rocof_hz_per_s: Vec::with_capacity(steps + 1),
    };
    let push = |t: f64, state: &[f64], d0: f64, traj: &mut Trajectory| {
        traj.t_s.push(t);
        traj.f_dev_hz.push(model.f0_hz * state[0]);
        traj.rocof_hz_per_s.push(model.f0_hz * d0);
    };

    model.deriv(&state, &mut k1);
    push(0.0, &state, k1[0], &mut traj);
    for step in 1..=steps {
        model.deriv(&state, &mut k1);
        for i in 0..n_states {
            tmp[i] = state[i] + 0.5 * dt * k1[i];
        }
        model.deriv(&tmp, &mut k2);
        for i in 0..n_states {
            tmp[i] = state[i] + 0.5 * dt * k2[i];
        }
        model.deriv(&tmp, &mut k3);
        for i in 0..n_states {
            tmp[i] = state[i] + dt * k3[i];
        }
        model.deriv(&tmp, &mut k4);
        for i in 0..n_states {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        model.deriv(&state, &mut k1);
        push(step as f64 * dt, &state, k1[0], &mut traj);
    }

    let metrics = metrics_of(&traj);
    (traj, metrics)
}

fn metrics_of(traj: &Trajectory) -> SimMetrics {
    let n = traj.t_s.len();
    let (mut nadir, mut t_at) = (0.0f64, 0.0f64);
    for (i, &f) in traj.f_dev_hz.iter().enumerate() {
        if f.abs() > nadir.abs() {
            nadir = f;
            t_at = traj.t_s[i];
        }
    }
    let tail = (n / 10).max(1);
    let ss = traj.f_dev_hz[n - tail..].iter().sum::<f64>() / tail as f64;
    SimMetrics {
        rocof_hz_per_s: traj.rocof_hz_per_s[0],
        nadir_hz: nadir,
        nadir_time_s: t_at,
        ss_dev_hz: ss,
    }
}

/// Peak MW a device with virtual inertia h (s) and damping d (pu), both on
/// base_mw, injects (positive) and absorbs (negative) along a trajectory:
/// dp(t) = -(2 h f'(t) + d f(t)) in device pu.
pub fn peak_inverter_power_mw(traj: &Trajectory, f0_hz: f64, h_s: f64, d_pu: f64, base_mw: f64) -> (f64, f64) {
    let (mut up, mut dn) = (0.0f64, 0.0f64);
    for i in 0..traj.t_s.len() {
        let f = traj.f_dev_hz[i] / f0_hz;
        let fd = traj.rocof_hz_per_s[i] / f0_hz;
        let p = -(2.0 * h_s * fd + d_pu * f) * base_mw;
        up = up.max(p);
        dn = dn.min(p);
    }
    (up, dn)
}

/// One inverter's simulated transient peaks against the room the dispatch
/// left it. DIBR curtailment can always deepen, so only its upward peak is
/// limited; storage must fit both peaks inside its procured reserves.
#[derive(Debug, Clone, Serialize)]
pub struct DeviceHeadroom {
    pub kind: &'static str,
    pub id: u32,
    pub peak_up_mw: f64,
    pub peak_dn_mw: f64,
    pub limit_up_mw: f64,
    pub limit_dn_mw: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DisturbanceCheck {
    pub dp_mw: f64,
    pub metrics: SimMetrics,
    pub rocof_ok: bool,
    pub nadir_ok: bool,
    pub ss_ok: bool,
    pub devices: Vec<DeviceHeadroom>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub checks: Vec<DisturbanceCheck>,
}

const TOL_HZ: f64 = 1e-6;
const TOL_MW: f64 = 1e-6;

/// Simulate each disturbance step with the decision's inverter settings and
/// check the frequency thresholds plus every inverter's transient headroom:
/// a DIBR's upward peak must fit in the margin its settings reserved, and a
/// storage unit's peaks must fit inside r_up / r_dn. Devices are matched by
/// id; one the decision omits responds with nothing and needs nothing.
pub fn verify_decision(
    case: &GridCase,
    decision: &DispatchDecision,
    disturbances_mw: &[f64],
    opts: &SimOptions,
) -> VerifyReport {
    let th = &case.thresholds;
    let f0 = case.f0_hz;
    let mut h_w = vec![0.0; case.dibr.len()];
    let mut d_w = vec![0.0; case.dibr.len()];
    for (k, w) in case.dibr.iter().enumerate() {
        if let Some(dw) = decision.dibr.iter().find(|d| d.id == w.id) {
            h_w[k] = dw.h_s;
            d_w[k] = dw.d_pu;
        }
    }
    let mut h_e = vec![0.0; case.storage.len()];
    let mut d_e = vec![0.0; case.storage.len()];
    let mut r_e = vec![(0.0, 0.0); case.storage.len()];
    for (k, e) in case.storage.iter().enumerate() {
        if let Some(de) = decision.storage.iter().find(|d| d.id == e.id) {
            h_e[k] = de.h_s;
            d_e[k] = de.d_pu;
            r_e[k] = (de.r_up_mw, de.r_dn_mw);
        }
    }

    let mut checks = Vec::with_capacity(disturbances_mw.len());
    for &dp in disturbances_mw {
        let (traj, metrics) = simulate(case, &h_w, &d_w, &h_e, &d_e, dp, opts);
        let rocof_ok = metrics.rocof_hz_per_s.abs() <= th.rocof_max_hz_per_s + TOL_HZ;
        let nadir_ok = metrics.nadir_hz.abs() <= th.nadir_max_hz + TOL_HZ;
        let ss_ok = metrics.ss_dev_hz.abs() <= th.ss_max_hz + TOL_HZ;
        let mut devices = Vec::with_capacity(case.dibr.len() + case.storage.len());
        for (k, w) in case.dibr.iter().enumerate() {
            let (up, dn) = peak_inverter_power_mw(&traj, f0, h_w[k], d_w[k], w.capacity_mw);
            let limit = sfr::pfr_headroom_bound(h_w[k], d_w[k], w.capacity_mw, th, f0);
            devices.push(DeviceHeadroom {
                kind: "dibr",
                id: w.id,
                peak_up_mw: up,
                peak_dn_mw: dn,
                limit_up_mw: limit,
                limit_dn_mw: None,
                ok: up <= limit + TOL_MW,
            });
        }
        for (k, e) in case.storage.iter().enumerate() {
            let (up, dn) = peak_inverter_power_mw(&traj, f0, h_e[k], d_e[k], e.p_max_mw);
            let (r_up, r_dn) = r_e[k];
            devices.push(DeviceHeadroom {
                kind: "storage",
                id: e.id,
                peak_up_mw: up,
                peak_dn_mw: dn,
                limit_up_mw: r_up,
                limit_dn_mw: Some(r_dn),
                ok: up <= r_up + TOL_MW && -dn <= r_dn + TOL_MW,
            });
        }
        let pass = rocof_ok && nadir_ok && ss_ok && devices.iter().all(|d| d.ok);
        checks.push(DisturbanceCheck { dp_mw: dp, metrics, rocof_ok, nadir_ok, ss_ok, devices, pass });
    }
    VerifyReport { pass: checks.iter().all(|c| c.pass), checks }
}
