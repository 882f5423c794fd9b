//! External solver bridge. The backend string `exec:<program>` names an
//! executable that is invoked as `<program> <model.mps> <out.sol>` in a fresh
//! temporary directory. The program must write the solution file as plain
//! `name value` lines (variables it omits default to zero) plus an optional
//! `=status= optimal|infeasible|unbounded|limit` line. Lines starting with
//! `#` are ignored. The whole string after `exec:` is the program path; no
//! shell is involved.

use super::{mps, CanonicalProgram, Solution, SolveError, SolveOptions, SolveStats, SolveStatus};
use std::collections::HashMap;
use std::io::Read as _;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

pub(super) fn solve(p: &CanonicalProgram, program: &str, opts: &SolveOptions) -> Result<Solution, SolveError> {
    let t0 = Instant::now();
    let dir = tempfile::tempdir()?;
    let mps_path = dir.path().join("model.mps");
    let sol_path = dir.path().join("out.sol");
    std::fs::write(&mps_path, mps::write_mps(p))?;

    let mut child = Command::new(program)
        .arg(&mps_path)
        .arg(&sol_path)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SolveError::Backend(format!("launching {program:?}: {e}")))?;

    // Give the process the full time limit plus slack for process startup and
    // file writing before declaring a timeout.
    let deadline = t0 + Duration::from_secs_f64(opts.time_limit_s.max(0.0) + 10.0);
    let status = loop {
        match child.try_wait().map_err(|e| SolveError::Backend(format!("waiting on {program:?}: {e}")))? {
            Some(status) => break status,
            None => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Ok(Solution {
                        status: SolveStatus::Limit,
                        objective: f64::INFINITY,
                        bound: f64::NEG_INFINITY,
                        values: Vec::new(),
                        stats: SolveStats { wall_s: t0.elapsed().as_secs_f64(), ..Default::default() },
                    });
                }
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    };
    let mut stderr = String::new();
    if let Some(mut pipe) = child.stderr.take() {
        let _ = pipe.read_to_string(&mut stderr);
    }
    if !status.success() {
        return Err(SolveError::Backend(format!(
            "{program:?} exited with {status}: {}",
            stderr.trim()
        )));
    }

    let text = std::fs::read_to_string(&sol_path)
        .map_err(|e| SolveError::Backend(format!("{program:?} wrote no solution file: {e}")))?;
    parse_solution(p, &text, t0.elapsed().as_secs_f64())
}

fn parse_solution(p: &CanonicalProgram, text: &str, wall_s: f64) -> Result<Solution, SolveError> {
    let mut index: HashMap<String, usize> = HashMap::new();
    for (j, name) in p.var_names.iter().enumerate() {
        index.insert(mps::sanitize_name(name), j);
    }
    let mut values = vec![0.0; p.n_vars()];
    let mut any = false;
    let mut status = SolveStatus::Optimal;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(SolveError::Backend(format!("solution line {line:?} is not `name value`")));
        };
        if a == "=status=" {
            status = match b {
                "optimal" => SolveStatus::Optimal,
                "infeasible" => SolveStatus::Infeasible,
                "unbounded" => SolveStatus::Unbounded,
                "limit" => SolveStatus::Limit,
                other => return Err(SolveError::Backend(format!("unknown solver status {other:?}"))),
            };
            continue;
        }
        let Some(&j) = index.get(a) else {
            // Tolerate extra names (slacks, duals) from chatty solvers.
            continue;
        };
        values[j] = b
            .parse::<f64>()
            .map_err(|_| SolveError::Backend(format!("bad value {b:?} for {a:?}")))?;
        any = true;
    }
    let has_point = any && matches!(status, SolveStatus::Optimal | SolveStatus::Limit);
    let objective = if has_point { p.objective_value(&values) } else { f64::INFINITY };
    let bound = match status {
        SolveStatus::Optimal => objective,
        SolveStatus::Infeasible => f64::INFINITY,
        _ => f64::NEG_INFINITY,
    };
    Ok(Solution {
        status,
        objective,
        bound,
        values: if has_point { values } else { Vec::new() },
        stats: SolveStats { wall_s, ..Default::default() },
    })
}
