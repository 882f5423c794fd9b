//! Best-first branch and bound on top of the bounded simplex. Nodes store
//! only their branching fixes; the lazy-row active set is shared across the
//! whole tree, so cutting rows discovered in one node help every other.
//!
//! Incumbents come from integral node relaxations and from a rounding
//! heuristic that respects budget rows (<= rows with nonnegative rhs whose
//! terms are all positive and on binary variables), fixing the rounded
//! binaries and re-solving the continuous rest.

use super::simplex::{solve_bounded, ActiveSet};
use super::{CanonicalProgram, Solution, SolveError, SolveOptions, SolveStats, SolveStatus};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

const INT_TOL: f64 = 1e-6;

struct Node {
    bound: f64,
    seq: u64,
    fixes: Vec<(usize, bool)>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.bound == o.bound && self.seq == o.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    // BinaryHeap pops the max; reverse so the smallest bound pops first.
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound).then(o.seq.cmp(&self.seq))
    }
}

pub(super) fn solve_mip(p: &CanonicalProgram, opts: &SolveOptions) -> Result<Solution, SolveError> {
    let deadline = Instant::now() + std::time::Duration::from_secs_f64(opts.time_limit_s.max(0.0));
    let int_vars: Vec<usize> = (0..p.n_vars()).filter(|&j| p.integer[j]).collect();
    for &j in &int_vars {
        if p.lb[j] < -INT_TOL || p.ub[j] > 1.0 + INT_TOL {
            return Err(SolveError::Invalid(format!(
                "integer variable {} is not binary; general integers are not supported",
                p.var_names[j]
            )));
        }
    }

    let mut active = ActiveSet::new(p);
    let mut iterations = 0u64;
    let mut nodes = 0u64;

    let root = solve_bounded(p, &p.lb, &p.ub, &mut active, deadline, opts.log)?;
    iterations += root.iterations;
    match root.status {
        SolveStatus::Infeasible => {
            return Ok(done(SolveStatus::Infeasible, None, f64::INFINITY, iterations, nodes, &active))
        }
        SolveStatus::Unbounded => {
            return Ok(done(SolveStatus::Unbounded, None, f64::NEG_INFINITY, iterations, nodes, &active))
        }
        SolveStatus::Limit => {
            let inc = if !root.x.is_empty() && integral(&root.x, &int_vars) {
                Some((root.objective + p.obj_offset, root.x))
            } else {
                None
            };
            return Ok(done(SolveStatus::Limit, inc, f64::NEG_INFINITY, iterations, nodes, &active));
        }
        SolveStatus::Optimal => {}
    }

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let consider = |cand: Option<(f64, Vec<f64>)>, incumbent: &mut Option<(f64, Vec<f64>)>| {
        if let Some((obj, x)) = cand {
            if incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
                *incumbent = Some((obj, x));
            }
        }
    };

    if integral(&root.x, &int_vars) {
        let obj = root.objective + p.obj_offset;
        return Ok(done(SolveStatus::Optimal, Some((obj, root.x)), obj, iterations, nodes, &active));
    }
    let h = heuristic(p, &root.x, &int_vars, &mut active, deadline, &mut iterations)?;
    consider(h, &mut incumbent);

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node { bound: root.objective + p.obj_offset, seq, fixes: branch_fixes(&root.x, &int_vars, &[]) });

    let gap_ok = |bound: f64, inc: &Option<(f64, Vec<f64>)>| {
        inc.as_ref()
            .is_some_and(|(obj, _)| bound >= obj - opts.mip_gap * obj.abs().max(1.0))
    };

    let mut final_status = SolveStatus::Optimal;
    let mut best_bound = f64::INFINITY;

    while let Some(node) = heap.pop() {
        best_bound = node.bound;
        if gap_ok(node.bound, &incumbent) {
            break;
        }
        if nodes >= opts.node_limit || Instant::now() >= deadline {
            final_status = SolveStatus::Limit;
            break;
        }
        nodes += 1;

        // Two children per popped entry: the stored fixes end with the branch
        // variable unfixed; expand both assignments here.
        let (stem, var) = node.fixes.split_at(node.fixes.len() - 1);
        let var = var[0].0;
        for value in [false, true] {
            let mut lb = p.lb.clone();
            let mut ub = p.ub.clone();
            for &(j, v) in stem {
                let x = if v { 1.0 } else { 0.0 };
                lb[j] = x;
                ub[j] = x;
            }
            let x = if value { 1.0 } else { 0.0 };
            lb[var] = x;
            ub[var] = x;

            let out = solve_bounded(p, &lb, &ub, &mut active, deadline, opts.log)?;
            iterations += out.iterations;
            match out.status {
                SolveStatus::Infeasible => continue,
                SolveStatus::Optimal => {
                    let obj = out.objective + p.obj_offset;
                    if gap_ok(obj, &incumbent) {
                        continue;
                    }
                    if integral(&out.x, &int_vars) {
                        consider(Some((obj, out.x)), &mut incumbent);
                        continue;
                    }
                    let mut fixes = stem.to_vec();
                    fixes.push((var, value));
                    seq += 1;
                    heap.push(Node { bound: obj, seq, fixes: branch_fixes(&out.x, &int_vars, &fixes) });
                }
                SolveStatus::Limit => {
                    final_status = SolveStatus::Limit;
                    break;
                }
                SolveStatus::Unbounded => {
                    return Err(SolveError::Numerical("node relaxation unbounded below a bounded root".into()));
                }
            }
        }
        if final_status == SolveStatus::Limit {
            break;
        }
    }

    if final_status == SolveStatus::Limit {
        best_bound = heap.iter().map(|n| n.bound).fold(best_bound, f64::min);
        return Ok(done(SolveStatus::Limit, incumbent, best_bound, iterations, nodes, &active));
    }
    match incumbent {
        Some((obj, x)) => {
            // Search exhausted or gap closed: the incumbent is optimal within gap.
            let bound = if heap.is_empty() { obj } else { best_bound.min(obj) };
            Ok(done(SolveStatus::Optimal, Some((obj, x)), bound, iterations, nodes, &active))
        }
        None => Ok(done(SolveStatus::Infeasible, None, f64::INFINITY, iterations, nodes, &active)),
    }
}

fn done(
    status: SolveStatus,
    incumbent: Option<(f64, Vec<f64>)>,
    bound: f64,
    iterations: u64,
    nodes: u64,
    active: &ActiveSet,
) -> Solution {
    let (objective, values) = match incumbent {
        Some((obj, x)) => (obj, x),
        None => (
            if status == SolveStatus::Unbounded { f64::NEG_INFINITY } else { f64::INFINITY },
            Vec::new(),
        ),
    };
    Solution {
        status,
        objective,
        bound,
        values,
        stats: SolveStats {
            simplex_iterations: iterations,
            nodes,
            active_rows: active.active.len(),
            wall_s: 0.0,
        },
    }
}

fn integral(x: &[f64], int_vars: &[usize]) -> bool {
    int_vars.iter().all(|&j| (x[j] - x[j].round()).abs() <= INT_TOL)
}

/// Append the most fractional integer variable (ties to the lowest index) to
/// the fix stack; the popped node expands it to both assignments.
fn branch_fixes(x: &[f64], int_vars: &[usize], fixes: &[(usize, bool)]) -> Vec<(usize, bool)> {
    let mut best = usize::MAX;
    let mut best_score = -1.0;
    for &j in int_vars {
        if fixes.iter().any(|&(k, _)| k == j) {
            continue;
        }
        let f = x[j] - x[j].floor();
        let score = f.min(1.0 - f);
        if score > best_score + 1e-15 {
            best_score = score;
            best = j;
        }
    }
    let mut out = fixes.to_vec();
    out.push((best, false));
    out
}

/// Round binaries greedily by LP value subject to budget rows, fix them, and
/// re-solve the continuous remainder. Falls back to all zeros.
fn heuristic(
    p: &CanonicalProgram,
    lp_x: &[f64],
    int_vars: &[usize],
    active: &mut ActiveSet,
    deadline: Instant,
    iterations: &mut u64,
) -> Result<Option<(f64, Vec<f64>)>, SolveError> {
    let is_int = |j: usize| p.integer[j];
    let budgets: Vec<usize> = (0..p.rows.len())
        .filter(|&r| {
            let row = &p.rows[r];
            row.sense == super::Sense::Le
                && row.rhs >= 0.0
                && !row.terms.is_empty()
                && row.terms.iter().all(|&(j, c)| c > 0.0 && is_int(j))
        })
        .collect();

    let mut order: Vec<usize> = int_vars.to_vec();
    order.sort_by(|&a, &b| lp_x[b].total_cmp(&lp_x[a]).then(a.cmp(&b)));

    let mut usage = vec![0.0; budgets.len()];
    let mut chosen = vec![false; p.n_vars()];
    for &j in &order {
        let mut fits = true;
        for (bi, &r) in budgets.iter().enumerate() {
            if let Some(&(_, c)) = p.rows[r].terms.iter().find(|&&(v, _)| v == j) {
                if usage[bi] + c > p.rows[r].rhs + 1e-12 {
                    fits = false;
                    break;
                }
            }
        }
        // Variables outside every budget row default to plain rounding.
        let in_any = budgets.iter().any(|&r| p.rows[r].terms.iter().any(|&(v, _)| v == j));
        let take = if in_any { fits } else { lp_x[j] >= 0.5 };
        if take {
            chosen[j] = true;
            for (bi, &r) in budgets.iter().enumerate() {
                if let Some(&(_, c)) = p.rows[r].terms.iter().find(|&&(v, _)| v == j) {
                    usage[bi] += c;
                }
            }
        }
    }

    for attempt in 0..2 {
        let mut lb = p.lb.clone();
        let mut ub = p.ub.clone();
        for &j in int_vars {
            let v: f64 = if attempt == 0 && chosen[j] { 1.0 } else { 0.0 };
            lb[j] = v.max(p.lb[j]);
            ub[j] = v.min(p.ub[j]);
        }
        let out = solve_bounded(p, &lb, &ub, active, deadline, false)?;
        *iterations += out.iterations;
        if out.status == SolveStatus::Optimal {
            return Ok(Some((out.objective + p.obj_offset, out.x)));
        }
        if attempt == 0 && int_vars.iter().all(|&j| !chosen[j]) {
            break; // all-zeros already tried
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use crate::solve::{solve, CanonicalProgram, Sense, SolveOptions, SolveStatus};

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn knapsack_hand_optimum() {
        // max 8a + 11b + 6c + 4d st 5a + 7b + 4c + 3d <= 14 -> b + c + d = 21.
        let mut p = CanonicalProgram::new("ks");
        let a = p.add_var("a", 0.0, 1.0, -8.0, true);
        let b = p.add_var("b", 0.0, 1.0, -11.0, true);
        let c = p.add_var("c", 0.0, 1.0, -6.0, true);
        let d = p.add_var("d", 0.0, 1.0, -4.0, true);
        p.add_row("w", vec![(a, 5.0), (b, 7.0), (c, 4.0), (d, 3.0)], Sense::Le, 14.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective + 21.0).abs() < 1e-9);
        assert_eq!(s.values.iter().map(|v| v.round() as i32).collect::<Vec<_>>(), vec![0, 1, 1, 1]);
    }

    #[test]
    fn mixed_integer_with_continuous_part() {
        // min 10y + x st x >= 3 - 4y, x >= 0, y binary. y=1 -> 10; y=0 -> 3.
        let mut p = CanonicalProgram::new("mix");
        let x = p.add_var("x", 0.0, f64::INFINITY, 1.0, false);
        let y = p.add_var("y", 0.0, 1.0, 10.0, true);
        p.add_row("r", vec![(x, 1.0), (y, 4.0)], Sense::Ge, 3.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert_eq!(s.values[1].round() as i32, 0);
    }

    #[test]
    fn infeasible_mip() {
        let mut p = CanonicalProgram::new("inf");
        let a = p.add_var("a", 0.0, 1.0, 1.0, true);
        let b = p.add_var("b", 0.0, 1.0, 1.0, true);
        p.add_row("lo", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 1.5);
        p.add_row("hi", vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.2);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn scenario_style_indicator_rows() {
        // y >= w_i (1 - z_i), sum z_i / n <= 0.25, minimize y.
        // w = [1, 2.2, 3, 10]; one drop allowed -> optimum y = 3.
        let mut p = CanonicalProgram::new("saa");
        let y = p.add_var("y", 0.0, f64::INFINITY, 1.0, false);
        let w = [1.0, 2.2, 3.0, 10.0];
        let zs: Vec<usize> = (0..4).map(|i| p.add_var(format!("z{i}"), 0.0, 1.0, 0.0, true)).collect();
        for (i, &wi) in w.iter().enumerate() {
            p.add_lazy_row(format!("s{i}"), vec![(y, 1.0), (zs[i], wi)], Sense::Ge, wi);
        }
        p.add_row("budget", vec![(zs[0], 0.25), (zs[1], 0.25), (zs[2], 0.25), (zs[3], 0.25)], Sense::Le, 0.25);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9, "got {}", s.objective);
        assert_eq!(s.values[zs[3]].round() as i32, 1);
    }

    #[test]
    fn node_limit_reports_limit_with_incumbent() {
        // A MIP the heuristic can solve but the proof needs nodes for.
        let mut p = CanonicalProgram::new("lim");
        let n = 12;
        let vars: Vec<usize> = (0..n).map(|i| p.add_var(format!("z{i}"), 0.0, 1.0, -((i % 5) as f64) - 1.0, true)).collect();
        let terms: Vec<(usize, f64)> = vars.iter().enumerate().map(|(i, &v)| (v, 1.0 + ((i * 7) % 3) as f64)).collect();
        p.add_row("w", terms, Sense::Le, 7.3);
        let limited = SolveOptions { node_limit: 0, ..opts() };
        let s = solve(&p, &limited).unwrap();
        assert_eq!(s.status, SolveStatus::Limit);
        assert!(!s.values.is_empty(), "heuristic incumbent expected");
        assert!(s.bound <= s.objective + 1e-9);
        let full = solve(&p, &opts()).unwrap();
        assert_eq!(full.status, SolveStatus::Optimal);
        assert!(full.objective <= s.objective + 1e-9);
    }

    #[test]
    fn randomized_small_mips_match_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5150);
        for trial in 0..80 {
            let nb = rng.gen_range(2..=8);
            let mut p = CanonicalProgram::new("rmip");
            let zs: Vec<usize> = (0..nb).map(|i| p.add_var(format!("z{i}"), 0.0, 1.0, rng.gen_range(-4.0..2.0), true)).collect();
            let x = p.add_var("x", 0.0, 5.0, rng.gen_range(-1.0..1.0), false);
            for r in 0..rng.gen_range(1..=3) {
                let mut terms: Vec<(usize, f64)> =
                    zs.iter().map(|&z| (z, rng.gen_range(-2.0..3.0))).filter(|&(_, c): &(usize, f64)| c.abs() > 0.2).collect();
                terms.push((x, rng.gen_range(0.2..1.0)));
                let sense = if rng.gen_bool(0.5) { Sense::Le } else { Sense::Ge };
                p.add_row(format!("r{r}"), terms, sense, rng.gen_range(-2.0..4.0));
            }
            // Enumerate all binary patterns, solving the 1-var continuous rest.
            let mut best = f64::INFINITY;
            for mask in 0..(1u32 << nb) {
                // x appears with positive coefficients; its best value per
                // pattern follows from interval intersection.
                let mut x_lo: f64 = 0.0;
                let mut x_hi: f64 = 5.0;
                let mut fixed_cost = 0.0;
                for (k, &z) in zs.iter().enumerate() {
                    if mask >> k & 1 == 1 {
                        fixed_cost += p.obj[z];
                    }
                }
                let mut ok = true;
                for row in &p.rows {
                    let mut a_x = 0.0;
                    let mut acc = 0.0;
                    for &(j, c) in &row.terms {
                        if j == x {
                            a_x = c;
                        } else {
                            let k = zs.iter().position(|&z| z == j).unwrap();
                            if mask >> k & 1 == 1 {
                                acc += c;
                            }
                        }
                    }
                    match row.sense {
                        Sense::Le => x_hi = x_hi.min((row.rhs - acc) / a_x),
                        Sense::Ge => x_lo = x_lo.max((row.rhs - acc) / a_x),
                        Sense::Eq => unreachable!(),
                    }
                }
                if x_lo > x_hi + 1e-12 {
                    ok = false;
                }
                if ok {
                    let xv = if p.obj[x] >= 0.0 { x_lo } else { x_hi };
                    best = best.min(fixed_cost + p.obj[x] * xv);
                }
            }
            let s = solve(&p, &opts()).unwrap();
            if best.is_finite() {
                assert_eq!(s.status, SolveStatus::Optimal, "trial {trial}");
                assert!((s.objective - best).abs() <= 1e-6 * (1.0 + best.abs()), "trial {trial}: {} vs {best}", s.objective);
            } else {
                assert_eq!(s.status, SolveStatus::Infeasible, "trial {trial}");
            }
        }
    }

    #[test]
    fn objective_offset_carries_through() {
        let mut p = CanonicalProgram::new("off");
        let z = p.add_var("z", 0.0, 1.0, -2.0, true);
        let _ = z;
        p.obj_offset = 100.0;
        let s = solve(&p, &opts()).unwrap();
        assert!((s.objective - 98.0).abs() < 1e-9);
    }
}
