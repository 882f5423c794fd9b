//! Scenario engine: forecast-error and availability sampling, empirical
//! quantiles, and the scenario CSV interchange format.
//!
//! Each scenario carries per-bus load/IBR forecast errors (zeta_d, zeta_h),
//! per-DIBR available maximum output, a probability weight, and the system
//! disturbance dp_L = sum_b (zeta_d_b - zeta_h_b), stored exactly as that sum.

use crate::grid::GridCase;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// Identifier recorded in sampled sets; bump when the stream layout changes.
pub const RNG_ID: &str = "chacha8-stream-v1";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

/// Marginal distribution of one uncertain quantity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RandomSpec {
    /// Degenerate point mass (zero-error buses, fully available DIBRs).
    Point { value: f64 },
    /// Beta(alpha, beta) affinely mapped onto [lo, hi].
    Beta { alpha: f64, beta: f64, lo: f64, hi: f64 },
}

impl RandomSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        match *self {
            RandomSpec::Point { value } => {
                if !value.is_finite() {
                    return Err(invalid("point mass must be finite"));
                }
            }
            RandomSpec::Beta { alpha, beta, lo, hi } => {
                if !(alpha > 0.0 && beta > 0.0) {
                    return Err(invalid("beta shape parameters must be positive"));
                }
                if !(lo < hi) {
                    return Err(invalid("beta support requires lo < hi"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            RandomSpec::Point { value } => value,
            RandomSpec::Beta { alpha, beta, lo, hi } => lo + (hi - lo) * alpha / (alpha + beta),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            RandomSpec::Point { .. } => 0.0,
            RandomSpec::Beta { alpha, beta, lo, hi } => {
                let s = alpha + beta;
                (hi - lo).powi(2) * alpha * beta / (s * s * (s + 1.0))
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            RandomSpec::Point { value } => (value, value),
            RandomSpec::Beta { lo, hi, .. } => (lo, hi),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            RandomSpec::Point { value } => value,
            RandomSpec::Beta { alpha, beta, lo, hi } => {
                let d = rand_distr::Beta::new(alpha, beta).expect("validated shape");
                lo + (hi - lo) * d.sample(rng)
            }
        }
    }

    /// Method-of-moments Beta fit on a known support.
    pub fn fit_beta_moments(samples: &[f64], lo: f64, hi: f64) -> Result<RandomSpec, ScenarioError> {
        if samples.len() < 2 {
            return Err(invalid("need at least two samples to fit"));
        }
        if !(lo < hi) {
            return Err(invalid("fit support requires lo < hi"));
        }
        let span = hi - lo;
        let u: Vec<f64> = samples.iter().map(|&x| (x - lo) / span).collect();
        if u.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(invalid("sample outside the declared support"));
        }
        let n = u.len() as f64;
        let m = u.iter().sum::<f64>() / n;
        let v = u.iter().map(|&x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        if !(m > 0.0 && m < 1.0) || v <= 0.0 || v >= m * (1.0 - m) {
            return Err(invalid("sample moments incompatible with a beta distribution"));
        }
        let k = m * (1.0 - m) / v - 1.0;
        Ok(RandomSpec::Beta { alpha: m * k, beta: (1.0 - m) * k, lo, hi })
    }
}

/// Per-device uncertainty specs keyed by id; unlisted buses default to zero
/// error and unlisted DIBRs to full availability.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyModel {
    #[serde(default)]
    pub load_err: BTreeMap<u32, RandomSpec>,
    #[serde(default)]
    pub ibr_err: BTreeMap<u32, RandomSpec>,
    #[serde(default)]
    pub dibr_avail: BTreeMap<u32, RandomSpec>,
}

impl UncertaintyModel {
    pub fn validate(&self, case: &GridCase) -> Result<(), ScenarioError> {
        let buses = case.bus_index();
        for (map, what) in [(&self.load_err, "load_err"), (&self.ibr_err, "ibr_err")] {
            for (id, spec) in map {
                if !buses.contains_key(id) {
                    return Err(invalid(format!("{what} references unknown bus {id}")));
                }
                spec.validate()?;
            }
        }
        for (id, spec) in &self.dibr_avail {
            let w = case
                .dibr
                .iter()
                .find(|w| w.id == *id)
                .ok_or_else(|| invalid(format!("dibr_avail references unknown dibr {id}")))?;
            spec.validate()?;
            let (lo, hi) = spec.support();
            if lo < -1e-9 || hi > w.capacity_mw + 1e-9 {
                return Err(invalid(format!(
                    "dibr_avail for {id} exceeds capacity support [0, {}]",
                    w.capacity_mw
                )));
            }
        }
        Ok(())
    }
}

pub fn load_uncertainty(path: impl AsRef<Path>) -> Result<UncertaintyModel, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("parse: {e}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    /// Probability weight p_i; equal 1/n for sampled sets.
    pub weight: f64,
    /// System disturbance dp_L (MW), exactly sum(zeta_d) - sum(zeta_h).
    pub dp_l_mw: f64,
    /// Load forecast errors by bus position (MW).
    pub zeta_d: Vec<f64>,
    /// Uncontrollable-IBR forecast errors by bus position (MW).
    pub zeta_h: Vec<f64>,
    /// Realized maximum DIBR output by dibr position (MW).
    pub p_avail: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub seed: u64,
    pub rng_id: String,
    pub bus_ids: Vec<u32>,
    pub dibr_ids: Vec<u32>,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn n(&self) -> usize {
        self.scenarios.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.weight).collect()
    }

    pub fn dp_l(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.dp_l_mw).collect()
    }

    /// Availability of dibr at position `w` across scenarios.
    pub fn p_avail_of(&self, w: usize) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.p_avail[w]).collect()
    }

    pub fn validate(&self, case: &GridCase) -> Result<(), ScenarioError> {
        let nb = case.buses.len();
        let nw = case.dibr.len();
        if self.bus_ids.len() != nb || self.dibr_ids.len() != nw {
            return Err(invalid("scenario set shape does not match the case"));
        }
        for (i, (want, have)) in self.bus_ids.iter().zip(case.buses.iter().map(|b| b.id)).enumerate() {
            if *want != have {
                return Err(invalid(format!("bus column {i} is {want}, case has {have}")));
            }
        }
        for (i, (want, have)) in self.dibr_ids.iter().zip(case.dibr.iter().map(|w| w.id)).enumerate() {
            if *want != have {
                return Err(invalid(format!("dibr column {i} is {want}, case has {have}")));
            }
        }
        let mut total = 0.0;
        for (i, s) in self.scenarios.iter().enumerate() {
            if s.zeta_d.len() != nb || s.zeta_h.len() != nb || s.p_avail.len() != nw {
                return Err(invalid(format!("scenario {i} has wrong column counts")));
            }
            if !(s.weight >= 0.0) {
                return Err(invalid(format!("scenario {i} has negative weight")));
            }
            total += s.weight;
        }
        if self.n() > 0 && (total - 1.0).abs() > 1e-6 {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// Draw `n` equally weighted scenarios. Each scenario uses an independent
/// ChaCha8 stream derived from (seed, i), so sampling is order-independent
/// and reproducible across platforms.
pub fn sample_scenarios(
    case: &GridCase,
    model: &UncertaintyModel,
    n: usize,
    seed: u64,
) -> Result<ScenarioSet, ScenarioError> {
    if n == 0 {
        return Err(invalid("scenario count must be positive"));
    }
    model.validate(case)?;

    let specs_d: Vec<RandomSpec> = case
        .buses
        .iter()
        .map(|b| model.load_err.get(&b.id).copied().unwrap_or(RandomSpec::Point { value: 0.0 }))
        .collect();
    let specs_h: Vec<RandomSpec> = case
        .buses
        .iter()
        .map(|b| model.ibr_err.get(&b.id).copied().unwrap_or(RandomSpec::Point { value: 0.0 }))
        .collect();
    let specs_w: Vec<RandomSpec> = case
        .dibr
        .iter()
        .map(|w| {
            model
                .dibr_avail
                .get(&w.id)
                .copied()
                .unwrap_or(RandomSpec::Point { value: w.capacity_mw })
        })
        .collect();

    let weight = 1.0 / n as f64;
    use rayon::prelude::*;
    let scenarios: Vec<Scenario> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let zeta_d: Vec<f64> = specs_d.iter().map(|s| s.sample(&mut rng)).collect();
            let zeta_h: Vec<f64> = specs_h.iter().map(|s| s.sample(&mut rng)).collect();
            let p_avail: Vec<f64> = specs_w.iter().map(|s| s.sample(&mut rng)).collect();
            let dp_l_mw = zeta_d.iter().sum::<f64>() - zeta_h.iter().sum::<f64>();
            Scenario { weight, dp_l_mw, zeta_d, zeta_h, p_avail }
        })
        .collect();

    Ok(ScenarioSet {
        seed,
        rng_id: RNG_ID.into(),
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        dibr_ids: case.dibr.iter().map(|w| w.id).collect(),
        scenarios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantileSide {
    Upper,
    Lower,
}

/// Weighted empirical quantile.
///
/// Upper: smallest sample value v with P(X > v) <= delta. Lower: largest v
/// with P(X < v) <= delta. delta = 0 therefore returns the extreme value.
pub fn empirical_quantile(values: &[f64], weights: &[f64], delta: f64, side: QuantileSide) -> f64 {
    assert_eq!(values.len(), weights.len());
    assert!(!values.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&delta), "delta outside [0,1]");
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    match side {
        QuantileSide::Upper => {
            // Walk upward; tail = P(X > v) for v = current value.
            let mut tail: f64 = weights.iter().sum();
            let mut k = 0;
            while k < idx.len() {
                // Remove the whole tie group at this value from the tail.
                let v = values[idx[k]];
                let mut group = 0.0;
                let mut j = k;
                while j < idx.len() && values[idx[j]] == v {
                    group += weights[idx[j]];
                    j += 1;
                }
                tail -= group;
                if tail <= delta + 1e-12 {
                    return v;
                }
                k = j;
            }
            values[*idx.last().unwrap()]
        }
        QuantileSide::Lower => {
            let mut head: f64 = weights.iter().sum();
            let mut k = idx.len();
            while k > 0 {
                let v = values[idx[k - 1]];
                let mut group = 0.0;
                let mut j = k;
                while j > 0 && values[idx[j - 1]] == v {
                    group += weights[idx[j - 1]];
                    j -= 1;
                }
                head -= group;
                if head <= delta + 1e-12 {
                    return v;
                }
                k = j;
            }
            values[idx[0]]
        }
    }
}

/// Disturbance quantiles consumed by the model builder.
#[derive(Debug, Clone, Copy)]
pub struct DisturbanceQuantiles {
    /// Upper delta_F quantile of |dp_L| (MW).
    pub abs_dp_qf_mw: f64,
    /// Upper delta_R/2 quantile of dp_L (MW).
    pub dp_up_qr_mw: f64,
    /// Lower delta_R/2 quantile of dp_L (MW).
    pub dp_dn_qr_mw: f64,
    /// Expected |dp_L| (MW), used by the redispatch cost approximation.
    pub mean_abs_dp_mw: f64,
}

pub fn disturbance_quantiles(set: &ScenarioSet, delta_f: f64, delta_r: f64) -> DisturbanceQuantiles {
    let w = set.weights();
    let dp = set.dp_l();
    let abs_dp: Vec<f64> = dp.iter().map(|x| x.abs()).collect();
    DisturbanceQuantiles {
        abs_dp_qf_mw: empirical_quantile(&abs_dp, &w, delta_f, QuantileSide::Upper),
        dp_up_qr_mw: empirical_quantile(&dp, &w, delta_r / 2.0, QuantileSide::Upper),
        dp_dn_qr_mw: empirical_quantile(&dp, &w, delta_r / 2.0, QuantileSide::Lower),
        mean_abs_dp_mw: abs_dp.iter().zip(&w).map(|(x, p)| x * p).sum(),
    }
}

/// Write the interchange CSV: `i, p_i, dp_L, zeta_d_<bus>..., zeta_h_<bus>...,
/// pbar_<dibr>...`. Floats use shortest round-trip formatting.
pub fn write_scenarios_csv(set: &ScenarioSet, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["i".to_string(), "p_i".to_string(), "dp_L".to_string()];
    header.extend(set.bus_ids.iter().map(|b| format!("zeta_d_{b}")));
    header.extend(set.bus_ids.iter().map(|b| format!("zeta_h_{b}")));
    header.extend(set.dibr_ids.iter().map(|w| format!("pbar_{w}")));
    wtr.write_record(&header)?;
    for (i, s) in set.scenarios.iter().enumerate() {
        let mut rec = vec![i.to_string(), fmt(s.weight), fmt(s.dp_l_mw)];
        rec.extend(s.zeta_d.iter().map(|&x| fmt(x)));
        rec.extend(s.zeta_h.iter().map(|&x| fmt(x)));
        rec.extend(s.p_avail.iter().map(|&x| fmt(x)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

pub fn read_scenarios_csv(path: impl AsRef<Path>) -> Result<ScenarioSet, ScenarioError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 || cols[0] != "i" || cols[1] != "p_i" || cols[2] != "dp_L" {
        return Err(invalid("scenario csv must start with columns i, p_i, dp_L"));
    }
    let mut bus_ids = Vec::new();
    let mut bus_ids_h = Vec::new();
    let mut dibr_ids = Vec::new();
    for c in &cols[3..] {
        if let Some(b) = c.strip_prefix("zeta_d_") {
            bus_ids.push(b.parse::<u32>().map_err(|_| invalid(format!("bad column {c}")))?);
        } else if let Some(b) = c.strip_prefix("zeta_h_") {
            bus_ids_h.push(b.parse::<u32>().map_err(|_| invalid(format!("bad column {c}")))?);
        } else if let Some(w) = c.strip_prefix("pbar_") {
            dibr_ids.push(w.parse::<u32>().map_err(|_| invalid(format!("bad column {c}")))?);
        } else {
            return Err(invalid(format!("unrecognized column {c}")));
        }
    }
    if bus_ids != bus_ids_h {
        return Err(invalid("zeta_d and zeta_h bus columns disagree"));
    }
    let (nb, nw) = (bus_ids.len(), dibr_ids.len());
    let mut scenarios = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 + 2 * nb + nw {
            return Err(invalid(format!("row {row}: wrong field count")));
        }
        let num = |k: usize| -> Result<f64, ScenarioError> {
            rec[k].parse::<f64>().map_err(|_| invalid(format!("row {row} col {k}: not a number")))
        };
        let weight = num(1)?;
        let dp_l_mw = num(2)?;
        let mut zeta_d = Vec::with_capacity(nb);
        let mut zeta_h = Vec::with_capacity(nb);
        let mut p_avail = Vec::with_capacity(nw);
        for k in 0..nb {
            zeta_d.push(num(3 + k)?);
        }
        for k in 0..nb {
            zeta_h.push(num(3 + nb + k)?);
        }
        for k in 0..nw {
            p_avail.push(num(3 + 2 * nb + k)?);
        }
        scenarios.push(Scenario { weight, dp_l_mw, zeta_d, zeta_h, p_avail });
    }
    if scenarios.is_empty() {
        return Err(invalid("scenario csv has no rows"));
    }
    Ok(ScenarioSet { seed: 0, rng_id: "csv".into(), bus_ids, dibr_ids, scenarios })
}
