//! Bounded-variable revised primal simplex with an explicit basis inverse
//! kept current by product-form pivots and periodic refactorization, plus a
//! driver that activates lazy rows in rounds as they are violated.
//!
//! Phase 1 minimizes the total bound violation of the basic variables with
//! costs recomputed each iteration (-1 below, +1 above); phase 2 prices the
//! real objective. Dantzig pricing, switching to Bland's rule during
//! degenerate stretches. Rows are equilibrated by their largest coefficient.

use super::{CanonicalProgram, Sense, Solution, SolveError, SolveOptions, SolveStats, SolveStatus};
use std::time::Instant;

const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-9;
const DEGEN_STEP: f64 = 1e-12;
const BLAND_AFTER: u32 = 50;
const MAX_ROWS_PER_ROUND: usize = 500;

pub(super) struct ActiveSet {
    pub active: Vec<usize>,
    pub is_active: Vec<bool>,
}

impl ActiveSet {
    pub fn new(p: &CanonicalProgram) -> Self {
        let mut active = Vec::new();
        let mut is_active = vec![false; p.rows.len()];
        for (r, row) in p.rows.iter().enumerate() {
            if !row.lazy {
                active.push(r);
                is_active[r] = true;
            }
        }
        ActiveSet { active, is_active }
    }

    fn activate(&mut self, r: usize) {
        if !self.is_active[r] {
            self.is_active[r] = true;
            self.active.push(r);
        }
    }
}

pub(super) struct LpOutcome {
    pub status: SolveStatus,
    /// Structural values; empty unless a primal-feasible point was reached.
    pub x: Vec<f64>,
    /// c'x without the offset, +inf/-inf for infeasible/unbounded.
    pub objective: f64,
    pub iterations: u64,
    /// Every row of the program, lazy included, is satisfied by x.
    pub complete: bool,
}

/// Full LP entry point used by the public solve().
pub(super) fn solve_lp(p: &CanonicalProgram, opts: &SolveOptions) -> Result<Solution, SolveError> {
    let deadline = Instant::now() + std::time::Duration::from_secs_f64(opts.time_limit_s.max(0.0));
    let mut active = ActiveSet::new(p);
    let out = solve_bounded(p, &p.lb, &p.ub, &mut active, deadline, opts.log)?;
    let objective = match out.status {
        SolveStatus::Optimal | SolveStatus::Limit if !out.x.is_empty() => out.objective + p.obj_offset,
        SolveStatus::Unbounded => f64::NEG_INFINITY,
        _ => f64::INFINITY,
    };
    let bound = match out.status {
        SolveStatus::Optimal => objective,
        SolveStatus::Unbounded => f64::NEG_INFINITY,
        SolveStatus::Infeasible => f64::INFINITY,
        SolveStatus::Limit => f64::NEG_INFINITY,
    };
    Ok(Solution {
        status: out.status,
        objective,
        bound,
        values: out.x,
        stats: SolveStats {
            simplex_iterations: out.iterations,
            nodes: 0,
            active_rows: active.active.len(),
            wall_s: 0.0,
        },
    })
}

/// Solve min c'x over the given bounds, activating lazy rows on violation
/// until all rows hold. Infeasibility of an active subset proves the whole
/// program infeasible. The active set persists across calls so repeated
/// solves (branch and bound) keep their cutting rows.
pub(super) fn solve_bounded(
    p: &CanonicalProgram,
    lb: &[f64],
    ub: &[f64],
    active: &mut ActiveSet,
    deadline: Instant,
    log: bool,
) -> Result<LpOutcome, SolveError> {
    let mut iterations = 0u64;
    let mut widened = false;
    loop {
        let mut core = Core::build(p, lb, ub, &active.active)?;
        let mut out = core.run(deadline)?;
        iterations += out.iterations;
        out.iterations = iterations;
        match out.status {
            SolveStatus::Optimal => {
                let added = activate_violated(p, &out.x, active, MAX_ROWS_PER_ROUND);
                if added == 0 {
                    out.complete = true;
                    return Ok(out);
                }
                if log {
                    eprintln!("lazy: +{added} rows ({} active)", active.active.len());
                }
                if Instant::now() >= deadline {
                    out.status = SolveStatus::Limit;
                    out.complete = false;
                    return Ok(out);
                }
            }
            SolveStatus::Infeasible => {
                out.complete = true;
                return Ok(out);
            }
            SolveStatus::Unbounded => {
                // A lazily held row may cut the ray; activate everything once.
                if widened || p.rows.len() == active.active.len() {
                    return Ok(out);
                }
                widened = true;
                for r in 0..p.rows.len() {
                    active.activate(r);
                }
            }
            SolveStatus::Limit => return Ok(out),
        }
    }
}

fn activate_violated(p: &CanonicalProgram, x: &[f64], active: &mut ActiveSet, cap: usize) -> usize {
    let mut viols: Vec<(f64, usize)> = Vec::new();
    for (r, row) in p.rows.iter().enumerate() {
        if active.is_active[r] {
            continue;
        }
        let v = p.row_violation(row, x);
        if v > FEAS_TOL * (1.0 + row.rhs.abs()) {
            viols.push((v, r));
        }
    }
    viols.sort_by(|a, b| b.0.total_cmp(&a.0));
    let take = viols.len().min(cap);
    for &(_, r) in &viols[..take] {
        active.activate(r);
    }
    take
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VarState {
    AtLb,
    AtUb,
    /// Free variable resting at zero.
    FreeZero,
    Basic,
}

struct Core {
    m: usize,
    n_struct: usize,
    /// Structural columns over active row positions, row-scaled.
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<VarState>,
    x: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    pivots_since_refactor: usize,
}

impl Core {
    fn build(p: &CanonicalProgram, slb: &[f64], sub: &[f64], active: &[usize]) -> Result<Core, SolveError> {
        let m = active.len();
        let n = p.n_vars();
        let ncols = n + m;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rhs = vec![0.0; m];
        let mut lb = vec![0.0; ncols];
        let mut ub = vec![0.0; ncols];
        lb[..n].copy_from_slice(slb);
        ub[..n].copy_from_slice(sub);
        for (pos, &r) in active.iter().enumerate() {
            let row = &p.rows[r];
            let maxc = row.terms.iter().map(|&(_, c)| c.abs()).fold(1.0f64, f64::max);
            let s = 1.0 / maxc;
            for &(j, c) in &row.terms {
                cols[j].push((pos, c * s));
            }
            rhs[pos] = row.rhs * s;
            // Row a.x + slack = b with the slack sign fixing the sense.
            let (slo, shi) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lb[n + pos] = slo;
            ub[n + pos] = shi;
        }
        let mut cost = vec![0.0; ncols];
        cost[..n].copy_from_slice(&p.obj);

        let mut state = vec![VarState::AtLb; ncols];
        let mut x = vec![0.0; ncols];
        for j in 0..n {
            if lb[j].is_finite() {
                state[j] = VarState::AtLb;
                x[j] = lb[j];
            } else if ub[j].is_finite() {
                state[j] = VarState::AtUb;
                x[j] = ub[j];
            } else {
                state[j] = VarState::FreeZero;
                x[j] = 0.0;
            }
        }
        // Slacks start basic: value b - A x_N, basis inverse the identity.
        let mut basis = Vec::with_capacity(m);
        let mut binv = vec![0.0; m * m];
        for pos in 0..m {
            basis.push(n + pos);
            state[n + pos] = VarState::Basic;
            binv[pos * m + pos] = 1.0;
        }
        let mut core = Core {
            m,
            n_struct: n,
            cols,
            rhs,
            lb,
            ub,
            cost,
            state,
            x,
            basis,
            binv,
            pivots_since_refactor: 0,
        };
        core.recompute_basics();
        Ok(core)
    }

    fn col(&self, j: usize) -> ColRef<'_> {
        if j < self.n_struct {
            ColRef::Sparse(&self.cols[j])
        } else {
            ColRef::Unit(j - self.n_struct)
        }
    }

    /// w = B^-1 A_j.
    fn ftran(&self, j: usize, w: &mut [f64]) {
        w.fill(0.0);
        match self.col(j) {
            ColRef::Sparse(terms) => {
                for &(r, c) in terms {
                    let col = r;
                    for i in 0..self.m {
                        w[i] += self.binv[i * self.m + col] * c;
                    }
                }
            }
            ColRef::Unit(r) => {
                for i in 0..self.m {
                    w[i] = self.binv[i * self.m + r];
                }
            }
        }
    }

    /// y' = cb' B^-1 for an arbitrary basic cost vector.
    fn btran(&self, cb: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for i in 0..self.m {
            let c = cb[i];
            if c != 0.0 {
                let row = &self.binv[i * self.m..(i + 1) * self.m];
                for k in 0..self.m {
                    y[k] += c * row[k];
                }
            }
        }
    }

    fn dot_col(&self, j: usize, y: &[f64]) -> f64 {
        match self.col(j) {
            ColRef::Sparse(terms) => terms.iter().map(|&(r, c)| y[r] * c).sum(),
            ColRef::Unit(r) => y[r],
        }
    }

    fn recompute_basics(&mut self) {
        // x_B = B^-1 (b - N x_N)
        let mut resid = self.rhs.clone();
        let ncols = self.n_struct + self.m;
        for j in 0..ncols {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                match self.col(j) {
                    ColRef::Sparse(terms) => {
                        for &(r, c) in terms {
                            resid[r] -= c * self.x[j];
                        }
                    }
                    ColRef::Unit(r) => resid[r] -= self.x[j],
                }
            }
        }
        for i in 0..self.m {
            let row = &self.binv[i * self.m..(i + 1) * self.m];
            self.x[self.basis[i]] = row.iter().zip(&resid).map(|(a, b)| a * b).sum();
        }
    }

    fn refactor(&mut self) -> Result<(), SolveError> {
        if self.m == 0 {
            return Ok(());
        }
        let mut b = nalgebra::DMatrix::<f64>::zeros(self.m, self.m);
        for (k, &j) in self.basis.iter().enumerate() {
            match self.col(j) {
                ColRef::Sparse(terms) => {
                    for &(r, c) in terms {
                        b[(r, k)] = c;
                    }
                }
                ColRef::Unit(r) => b[(r, k)] = 1.0,
            }
        }
        let inv = b
            .try_inverse()
            .ok_or_else(|| SolveError::Numerical("singular basis during refactorization".into()))?;
        for i in 0..self.m {
            for k in 0..self.m {
                self.binv[i * self.m + k] = inv[(i, k)];
            }
        }
        self.pivots_since_refactor = 0;
        self.recompute_basics();
        Ok(())
    }

    /// Replace basis position r by column q, updating B^-1 in place.
    fn pivot_update(&mut self, r: usize, w: &[f64]) -> Result<(), SolveError> {
        let wr = w[r];
        if wr.abs() < 1e-12 {
            return Err(SolveError::Numerical("zero pivot".into()));
        }
        let m = self.m;
        let inv_wr = 1.0 / wr;
        for k in 0..m {
            self.binv[r * m + k] *= inv_wr;
        }
        for i in 0..m {
            if i != r {
                let f = w[i];
                if f != 0.0 {
                    for k in 0..m {
                        self.binv[i * m + k] -= f * self.binv[r * m + k];
                    }
                }
            }
        }
        self.pivots_since_refactor += 1;
        Ok(())
    }

    fn total_infeasibility(&self) -> f64 {
        let mut t = 0.0;
        for &j in &self.basis {
            let v = self.x[j];
            if v < self.lb[j] {
                t += self.lb[j] - v;
            } else if v > self.ub[j] {
                t += v - self.ub[j];
            }
        }
        t
    }

    fn objective(&self) -> f64 {
        (0..self.n_struct).map(|j| self.cost[j] * self.x[j]).sum()
    }

    fn run(&mut self, deadline: Instant) -> Result<LpOutcome, SolveError> {
        let mut iterations = 0u64;
        for phase in [1u8, 2u8] {
            if phase == 1 && self.total_infeasibility() <= FEAS_TOL * (self.m as f64 + 1.0) {
                continue;
            }
            let status = self.run_phase(phase, deadline, &mut iterations)?;
            match status {
                PhaseEnd::Done => {
                    if phase == 1 {
                        let inf = self.total_infeasibility();
                        if inf > 1e-7 * (self.m as f64 + 1.0) {
                            return Ok(LpOutcome {
                                status: SolveStatus::Infeasible,
                                x: Vec::new(),
                                objective: f64::INFINITY,
                                iterations,
                                complete: false,
                            });
                        }
                    }
                }
                PhaseEnd::Unbounded => {
                    return Ok(LpOutcome {
                        status: SolveStatus::Unbounded,
                        x: Vec::new(),
                        objective: f64::NEG_INFINITY,
                        iterations,
                        complete: false,
                    })
                }
                PhaseEnd::TimeOut => {
                    // A phase-2 interrupt still has a feasible point in hand.
                    let x = if phase == 2 { self.x[..self.n_struct].to_vec() } else { Vec::new() };
                    let objective = if phase == 2 { self.objective() } else { f64::INFINITY };
                    return Ok(LpOutcome {
                        status: SolveStatus::Limit,
                        x,
                        objective,
                        iterations,
                        complete: false,
                    });
                }
            }
        }
        Ok(LpOutcome {
            status: SolveStatus::Optimal,
            x: self.x[..self.n_struct].to_vec(),
            objective: self.objective(),
            iterations,
            complete: false,
        })
    }

    fn run_phase(&mut self, phase: u8, deadline: Instant, iterations: &mut u64) -> Result<PhaseEnd, SolveError> {
        let m = self.m;
        let ncols = self.n_struct + m;
        let mut cb = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut w = vec![0.0; m];
        let mut degen_run: u32 = 0;
        let mut ratios: Vec<(usize, f64, bool)> = Vec::with_capacity(m);
        let refactor_every = 128.max(m / 2);

        loop {
            *iterations += 1;
            if iterations.is_multiple_of(512) && Instant::now() >= deadline {
                return Ok(PhaseEnd::TimeOut);
            }
            if self.pivots_since_refactor >= refactor_every {
                self.refactor()?;
            }

            // Basic costs for this phase.
            let mut any_infeasible = false;
            for i in 0..m {
                let j = self.basis[i];
                cb[i] = if phase == 1 {
                    let v = self.x[j];
                    if v < self.lb[j] - FEAS_TOL {
                        any_infeasible = true;
                        -1.0
                    } else if v > self.ub[j] + FEAS_TOL {
                        any_infeasible = true;
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[j]
                };
            }
            if phase == 1 && !any_infeasible {
                return Ok(PhaseEnd::Done);
            }
            self.btran(&cb, &mut y);

            // Price nonbasic columns.
            let bland = degen_run >= BLAND_AFTER;
            let mut enter: Option<(usize, f64, f64)> = None; // (col, |d|, dir)
            for j in 0..ncols {
                let st = self.state[j];
                if st == VarState::Basic {
                    continue;
                }
                if self.lb[j] == self.ub[j] {
                    continue; // fixed
                }
                let c = if phase == 1 { 0.0 } else { self.cost[j] };
                let d = c - self.dot_col(j, &y);
                let dir = match st {
                    VarState::AtLb => {
                        if d < -DUAL_TOL {
                            1.0
                        } else {
                            continue;
                        }
                    }
                    VarState::AtUb => {
                        if d > DUAL_TOL {
                            -1.0
                        } else {
                            continue;
                        }
                    }
                    VarState::FreeZero => {
                        if d < -DUAL_TOL {
                            1.0
                        } else if d > DUAL_TOL {
                            -1.0
                        } else {
                            continue;
                        }
                    }
                    VarState::Basic => unreachable!(),
                };
                if bland {
                    enter = Some((j, d.abs(), dir));
                    break;
                }
                if enter.is_none_or(|(_, best, _)| d.abs() > best) {
                    enter = Some((j, d.abs(), dir));
                }
            }
            let Some((q, _, dir)) = enter else {
                return Ok(PhaseEnd::Done);
            };

            self.ftran(q, &mut w);

            // Ratio test. g_i is the rate of change of basic i per unit step;
            // each candidate is the exact step at which basic i hits a bound.
            ratios.clear();
            let mut t_min = f64::INFINITY;
            for i in 0..m {
                let g = -w[i] * dir;
                if g.abs() < 1e-11 {
                    continue;
                }
                let j = self.basis[i];
                let v = self.x[j];
                let (cand, to_ub): (f64, bool) = if phase == 1 && v < self.lb[j] - FEAS_TOL {
                    // Infeasible below: blocks only when rising to its lb.
                    if g > 0.0 {
                        ((self.lb[j] - v) / g, false)
                    } else {
                        continue;
                    }
                } else if phase == 1 && v > self.ub[j] + FEAS_TOL {
                    if g < 0.0 {
                        ((self.ub[j] - v) / g, true)
                    } else {
                        continue;
                    }
                } else if g > 0.0 {
                    if self.ub[j].is_finite() {
                        (((self.ub[j] - v) / g).max(0.0), true)
                    } else {
                        continue;
                    }
                } else if self.lb[j].is_finite() {
                    (((self.lb[j] - v) / g).max(0.0), false)
                } else {
                    continue;
                };
                t_min = t_min.min(cand);
                ratios.push((i, cand, to_ub));
            }
            // The entering variable can also stop at its own opposite bound.
            let span = self.ub[q] - self.lb[q];
            let can_flip = span.is_finite() && self.state[q] != VarState::FreeZero;
            if can_flip && span <= t_min {
                self.apply_step(q, dir, span, &w);
                self.state[q] = if dir > 0.0 { VarState::AtUb } else { VarState::AtLb };
                self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                degen_run = if span < DEGEN_STEP { degen_run + 1 } else { 0 };
                continue;
            }
            if t_min.is_infinite() {
                if phase == 1 {
                    return Err(SolveError::Numerical("phase 1 found no blocking bound".into()));
                }
                return Ok(PhaseEnd::Unbounded);
            }
            // Among exact near-ties prefer the largest pivot (smallest basic
            // variable index under Bland's rule).
            let tie = t_min + RATIO_TIE * (1.0 + t_min.abs());
            let mut r = usize::MAX;
            let mut leave_to_ub = false;
            let mut best_w = -1.0;
            for &(i, cand, to_ub) in &ratios {
                if cand > tie {
                    continue;
                }
                let pick = if bland {
                    r == usize::MAX || self.basis[i] < self.basis[r]
                } else {
                    w[i].abs() > best_w
                };
                if pick {
                    r = i;
                    leave_to_ub = to_ub;
                    best_w = w[i].abs();
                }
            }
            if r == usize::MAX {
                return Err(SolveError::Numerical("ratio test lost its candidates".into()));
            }
            let t = t_min.max(0.0);
            self.apply_step(q, dir, t, &w);
            let out = self.basis[r];
            self.x[out] = if leave_to_ub { self.ub[out] } else { self.lb[out] };
            self.state[out] = if leave_to_ub { VarState::AtUb } else { VarState::AtLb };
            self.state[q] = VarState::Basic;
            self.basis[r] = q;
            self.pivot_update(r, &w)?;
            degen_run = if t < DEGEN_STEP { degen_run + 1 } else { 0 };
            if degen_run > 10_000 {
                return Err(SolveError::Numerical("stalled in degenerate pivots".into()));
            }
        }
    }

    fn apply_step(&mut self, q: usize, dir: f64, t: f64, w: &[f64]) {
        if t == 0.0 {
            return;
        }
        self.x[q] += dir * t;
        for i in 0..self.m {
            let g = -w[i] * dir;
            if g != 0.0 {
                self.x[self.basis[i]] += g * t;
            }
        }
    }
}

enum ColRef<'a> {
    Sparse(&'a [(usize, f64)]),
    Unit(usize),
}

enum PhaseEnd {
    Done,
    Unbounded,
    TimeOut,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::{solve, Backend, SolveOptions};

    fn opts() -> SolveOptions {
        SolveOptions { backend: Backend::Embedded, ..Default::default() }
    }

    fn lp(name: &str) -> CanonicalProgram {
        CanonicalProgram::new(name)
    }

    #[test]
    fn pure_bound_problem_without_rows() {
        let mut p = lp("b");
        p.add_var("x", 1.0, 2.0, -1.0, false);
        p.add_var("y", -3.0, 5.0, 2.0, false);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.values, vec![2.0, -3.0]);
        assert!((s.objective - (-8.0)).abs() < 1e-9);
    }

    #[test]
    fn simple_lp_hand_solution() {
        // max x + 2y st x + y <= 4, x <= 3, y <= 2 -> (2, 2), value 6.
        let mut p = lp("h");
        let x = p.add_var("x", 0.0, 3.0, -1.0, false);
        let y = p.add_var("y", 0.0, 2.0, -2.0, false);
        p.add_row("s", vec![(x, 1.0), (y, 1.0)], Sense::Le, 4.0);
        let s = solve(&p, &opts()).unwrap();
        assert!((s.objective + 6.0).abs() < 1e-9);
        assert!((s.values[0] - 2.0).abs() < 1e-9);
        assert!((s.values[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min 3a + 2b st a + b = 10, a - b >= 2 -> a = 6, b = 4 at the corner.
        let mut p = lp("eq");
        let a = p.add_var("a", 0.0, f64::INFINITY, 3.0, false);
        let b = p.add_var("b", 0.0, f64::INFINITY, 2.0, false);
        p.add_row("sum", vec![(a, 1.0), (b, 1.0)], Sense::Eq, 10.0);
        p.add_row("gap", vec![(a, 1.0), (b, -1.0)], Sense::Ge, 2.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.values[0] - 6.0).abs() < 1e-8);
        assert!((s.values[1] - 4.0).abs() < 1e-8);
        assert!((s.objective - 26.0).abs() < 1e-8);
    }

    #[test]
    fn infeasible_detected() {
        let mut p = lp("inf");
        let x = p.add_var("x", 0.0, 10.0, 1.0, false);
        p.add_row("lo", vec![(x, 1.0)], Sense::Ge, 6.0);
        p.add_row("hi", vec![(x, 1.0)], Sense::Le, 5.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.values.is_empty());
    }

    #[test]
    fn unbounded_detected() {
        let mut p = lp("unb");
        let x = p.add_var("x", 0.0, f64::INFINITY, -1.0, false);
        let y = p.add_var("y", 0.0, f64::INFINITY, 0.0, false);
        p.add_row("r", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Unbounded);
    }

    #[test]
    fn free_variables_work() {
        // min |x| style: x free, x >= -5 row, cost 1 -> pushes to -5.
        let mut p = lp("free");
        let x = p.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0, false);
        p.add_row("lo", vec![(x, 1.0)], Sense::Ge, -5.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.values[0] + 5.0).abs() < 1e-9);
    }

    #[test]
    fn negative_lower_bounds_and_ranges() {
        let mut p = lp("rng");
        let x = p.add_var("x", -4.0, -1.0, 1.0, false);
        let y = p.add_var("y", -2.0, 2.0, -1.0, false);
        p.add_row("r", vec![(x, 1.0), (y, 1.0)], Sense::Ge, -3.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        // x wants its lb, y wants its ub; row allows both (-4 + 2 = -2 >= -3).
        assert_eq!(s.values, vec![-4.0, 2.0]);
    }

    #[test]
    fn degenerate_vertices_terminate() {
        // Many redundant rows through the same vertex.
        let mut p = lp("deg");
        let x = p.add_var("x", 0.0, 10.0, -1.0, false);
        let y = p.add_var("y", 0.0, 10.0, -1.0, false);
        for k in 0..20 {
            let a = 1.0 + (k as f64) * 1e-9;
            p.add_row(format!("r{k}"), vec![(x, a), (y, 1.0)], Sense::Le, 4.0);
        }
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective + 4.0).abs() < 1e-6);
    }

    // Brute-force oracle: enumerate all candidate vertices of a small LP by
    // picking tight constraint subsets, keep the feasible ones, take the best.
    fn brute_force(p: &CanonicalProgram) -> Option<f64> {
        let n = p.n_vars();
        assert!(n <= 3);
        // Constraint list: rows as equalities plus variable bounds.
        let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
        for row in &p.rows {
            let mut a = vec![0.0; n];
            for &(j, c) in &row.terms {
                a[j] = c;
            }
            cons.push((a, row.rhs));
        }
        for j in 0..n {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            if p.lb[j].is_finite() {
                cons.push((a.clone(), p.lb[j]));
            }
            if p.ub[j].is_finite() {
                cons.push((a, p.ub[j]));
            }
        }
        let k = cons.len();
        let mut best: Option<f64> = None;
        let mut idx = vec![0usize; n];
        // All n-subsets with repetition filtered to strictly increasing.
        #[allow(clippy::too_many_arguments)]
        fn rec(
            start: usize,
            depth: usize,
            n: usize,
            k: usize,
            idx: &mut Vec<usize>,
            cons: &[(Vec<f64>, f64)],
            p: &CanonicalProgram,
            best: &mut Option<f64>,
        ) {
            if depth == n {
                let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
                let mut b = nalgebra::DVector::<f64>::zeros(n);
                for (r, &ci) in idx.iter().enumerate() {
                    for c in 0..n {
                        a[(r, c)] = cons[ci].0[c];
                    }
                    b[r] = cons[ci].1;
                }
                if let Some(sol) = a.lu().solve(&b) {
                    let x: Vec<f64> = sol.iter().cloned().collect();
                    if x.iter().all(|v| v.is_finite()) && crate::solve::verify_solution(p, &x, 1e-7).is_empty() {
                        let obj = p.objective_value(&x);
                        if best.is_none_or(|b| obj < b) {
                            *best = Some(obj);
                        }
                    }
                }
                return;
            }
            for c in start..k {
                idx[depth] = c;
                rec(c + 1, depth + 1, n, k, idx, cons, p, best);
            }
        }
        rec(0, 0, n, k, &mut idx, &cons, p, &mut best);
        best
    }

    #[test]
    fn randomized_lps_match_vertex_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        for trial in 0..250 {
            let n = rng.gen_range(2..=3);
            let mut p = lp("rand");
            for j in 0..n {
                let lb = rng.gen_range(-5.0..0.0);
                let ub = lb + rng.gen_range(0.5..8.0);
                let c = rng.gen_range(-3.0..3.0);
                p.add_var(format!("x{j}"), lb, ub, c, false);
            }
            for r in 0..rng.gen_range(1..=4) {
                let terms: Vec<(usize, f64)> =
                    (0..n).map(|j| (j, rng.gen_range(-2.0..2.0))).filter(|&(_, c): &(usize, f64)| c.abs() > 0.1).collect();
                if terms.is_empty() {
                    continue;
                }
                let sense = match rng.gen_range(0..3) {
                    0 => Sense::Le,
                    1 => Sense::Ge,
                    _ => Sense::Eq,
                };
                p.add_row(format!("r{r}"), terms, sense, rng.gen_range(-3.0..3.0));
            }
            let oracle = brute_force(&p);
            let got = solve(&p, &opts());
            match (oracle, got) {
                (Some(want), Ok(s)) => {
                    assert_eq!(s.status, SolveStatus::Optimal, "trial {trial}");
                    assert!(
                        (s.objective - want).abs() <= 1e-6 * (1.0 + want.abs()),
                        "trial {trial}: got {} want {want}",
                        s.objective
                    );
                    checked += 1;
                }
                (None, Ok(s)) => {
                    // Bounded boxes: no feasible vertex means infeasible.
                    assert_eq!(s.status, SolveStatus::Infeasible, "trial {trial}");
                }
                (_, Err(e)) => panic!("trial {trial}: {e}"),
            }
        }
        assert!(checked > 100, "only {checked} feasible trials");
    }

    #[test]
    fn lazy_rows_reach_the_same_optimum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for trial in 0..60 {
            let n = rng.gen_range(2..=4);
            let mut eager = lp("eager");
            for j in 0..n {
                eager.add_var(format!("x{j}"), 0.0, rng.gen_range(1.0..6.0), rng.gen_range(-3.0..0.5), false);
            }
            let mut rows = Vec::new();
            for r in 0..rng.gen_range(3..=12) {
                let terms: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(0.1..2.0))).collect();
                let rhs = rng.gen_range(0.5..5.0);
                rows.push((format!("r{r}"), terms, rhs));
            }
            for (name, terms, rhs) in &rows {
                eager.add_row(name.clone(), terms.clone(), Sense::Le, *rhs);
            }
            let mut lazy = lp("lazy");
            for j in 0..n {
                lazy.add_var(format!("x{j}"), eager.lb[j], eager.ub[j], eager.obj[j], false);
            }
            for (i, (name, terms, rhs)) in rows.iter().enumerate() {
                if i % 2 == 0 {
                    lazy.add_lazy_row(name.clone(), terms.clone(), Sense::Le, *rhs);
                } else {
                    lazy.add_row(name.clone(), terms.clone(), Sense::Le, *rhs);
                }
            }
            let a = solve(&eager, &opts()).unwrap();
            let b = solve(&lazy, &opts()).unwrap();
            assert_eq!(a.status, b.status, "trial {trial}");
            assert!((a.objective - b.objective).abs() < 1e-7, "trial {trial}");
        }
    }

    #[test]
    fn all_lazy_rows_with_equalities() {
        let mut p = lp("lz");
        let x = p.add_var("x", 0.0, 10.0, 1.0, false);
        let y = p.add_var("y", 0.0, 10.0, 1.0, false);
        p.add_lazy_row("need", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 7.0);
        p.add_lazy_row("tie", vec![(x, 1.0), (y, -1.0)], Sense::Ge, 1.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 7.0).abs() < 1e-9);
        assert!(s.values[0] >= s.values[1] + 1.0 - 1e-9);
    }

    #[test]
    fn lazy_row_can_bound_an_unbounded_master() {
        let mut p = lp("ray");
        let x = p.add_var("x", 0.0, f64::INFINITY, -1.0, false);
        p.add_lazy_row("cap", vec![(x, 1.0)], Sense::Le, 9.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective + 9.0).abs() < 1e-9);
    }

    #[test]
    fn scaled_rows_solve_cleanly() {
        // Badly scaled coefficients still meet the verification tolerance.
        let mut p = lp("scale");
        let x = p.add_var("x", 0.0, 1e8, 1e-6, false);
        let y = p.add_var("y", 0.0, 1e8, 1.0, false);
        p.add_row("r1", vec![(x, 1e6), (y, 1e-4)], Sense::Ge, 3e6);
        p.add_row("r2", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 4.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
    }
}
