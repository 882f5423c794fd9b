//! CPLEX-style LP text rendering, for eyeballing a built model. Write-only;
//! the interchange format for external solvers is MPS.

use super::{CanonicalProgram, Sense};
use crate::solve::mps::sanitize_name;
use std::fmt::Write as _;

fn push_terms(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    let mut first = true;
    for &(j, c) in terms {
        if first {
            let _ = write!(out, "{} {}", c, names[j]);
            first = false;
        } else if c < 0.0 {
            let _ = write!(out, " - {} {}", -c, names[j]);
        } else {
            let _ = write!(out, " + {} {}", c, names[j]);
        }
    }
    if first {
        out.push('0');
    }
}

pub fn write_lp_text(p: &CanonicalProgram) -> String {
    let names: Vec<String> = p.var_names.iter().map(|n| sanitize_name(n)).collect();
    let mut s = String::new();
    let _ = writeln!(s, "\\ {}", sanitize_name(&p.name));
    s.push_str("Minimize\n obj: ");
    let obj_terms: Vec<(usize, f64)> = p.obj.iter().cloned().enumerate().filter(|&(_, c)| c != 0.0).collect();
    push_terms(&mut s, &obj_terms, &names);
    if p.obj_offset != 0.0 {
        if p.obj_offset < 0.0 {
            let _ = write!(s, " - {}", -p.obj_offset);
        } else {
            let _ = write!(s, " + {}", p.obj_offset);
        }
    }
    s.push_str("\nSubject To\n");
    for row in &p.rows {
        let _ = write!(s, " {}: ", sanitize_name(&row.name));
        push_terms(&mut s, &row.terms, &names);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = write!(s, " {} {}", op, row.rhs);
        if row.lazy {
            s.push_str(" \\ lazy");
        }
        s.push('\n');
    }
    s.push_str("Bounds\n");
    for j in 0..p.n_vars() {
        let (lo, hi) = (p.lb[j], p.ub[j]);
        if lo == hi {
            let _ = writeln!(s, " {} = {}", names[j], lo);
        } else if lo.is_infinite() && hi.is_infinite() {
            let _ = writeln!(s, " {} free", names[j]);
        } else if lo.is_infinite() {
            let _ = writeln!(s, " -inf <= {} <= {}", names[j], hi);
        } else if hi.is_infinite() {
            let _ = writeln!(s, " {} >= {}", names[j], lo);
        } else {
            let _ = writeln!(s, " {} <= {} <= {}", lo, names[j], hi);
        }
    }
    let binaries: Vec<usize> = (0..p.n_vars())
        .filter(|&j| p.integer[j] && p.lb[j] == 0.0 && p.ub[j] == 1.0)
        .collect();
    let generals: Vec<usize> = (0..p.n_vars()).filter(|&j| p.integer[j] && !binaries.contains(&j)).collect();
    if !binaries.is_empty() {
        s.push_str("Binaries\n");
        for j in binaries {
            let _ = writeln!(s, " {}", names[j]);
        }
    }
    if !generals.is_empty() {
        s.push_str("Generals\n");
        for j in generals {
            let _ = writeln!(s, " {}", names[j]);
        }
    }
    s.push_str("End\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_all_sections() {
        let mut p = CanonicalProgram::new("demo");
        let x = p.add_var("x", 0.0, 4.0, 1.5, false);
        let y = p.add_var("y", f64::NEG_INFINITY, f64::INFINITY, -1.0, false);
        let z = p.add_var("z", 0.0, 1.0, 0.0, true);
        p.obj_offset = -2.0;
        p.add_row("c1", vec![(x, 1.0), (y, -2.0)], Sense::Le, 4.0);
        p.add_lazy_row("c2", vec![(y, 1.0), (z, 5.0)], Sense::Ge, 1.0);
        let text = write_lp_text(&p);
        assert!(text.contains("Minimize"));
        assert!(text.contains("obj: 1.5 x - 1 y - 2"));
        assert!(text.contains("c1: 1 x - 2 y <= 4"));
        assert!(text.contains("c2: 1 y + 5 z >= 1 \\ lazy"));
        assert!(text.contains(" y free"));
        assert!(text.contains("Binaries\n z"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn empty_objective_renders_zero() {
        let mut p = CanonicalProgram::new("zero");
        p.add_var("x", 0.0, 1.0, 0.0, false);
        let text = write_lp_text(&p);
        assert!(text.contains("obj: 0\n"));
    }
}
