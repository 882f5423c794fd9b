//! MPS emit and parse for the canonical program.
//!
//! The dialect is free-format MPS: fields separated by whitespace, names of
//! any length without embedded whitespace. Integer columns sit between the
//! usual INTORG/INTEND markers. Every variable gets explicit BOUNDS entries
//! (BV for binaries, otherwise FX/MI/LO plus UP/PL) so readers never need the
//! MPS bound defaults, and a constant objective term is carried as an RHS
//! entry on the objective row with its sign flipped, which is how most
//! solvers expect it.

use super::{CanonicalProgram, Row, Sense, SolveError};
use std::collections::HashMap;
use std::fmt::Write as _;

pub(crate) fn sanitize_name(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

/// Render the program as an MPS string. Row order and variable order are
/// preserved; lazy rows are written like any other row.
pub fn write_mps(p: &CanonicalProgram) -> String {
    let vn: Vec<String> = p.var_names.iter().map(|n| sanitize_name(n)).collect();
    let rn: Vec<String> = p.rows.iter().map(|r| sanitize_name(&r.name)).collect();
    let mut s = String::new();
    let _ = writeln!(s, "NAME {}", sanitize_name(&p.name));

    s.push_str("ROWS\n N OBJ\n");
    for (r, row) in p.rows.iter().enumerate() {
        let tag = match row.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(s, " {} {}", tag, rn[r]);
    }

    // Column-major entries: collect each variable's rows once.
    let mut col_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.n_vars()];
    for (r, row) in p.rows.iter().enumerate() {
        for &(j, c) in &row.terms {
            col_terms[j].push((r, c));
        }
    }

    s.push_str("COLUMNS\n");
    let mut in_int = false;
    for j in 0..p.n_vars() {
        if p.integer[j] != in_int {
            in_int = p.integer[j];
            let mark = if in_int { "INTORG" } else { "INTEND" };
            let _ = writeln!(s, " MARK{} 'MARKER' '{}'", u8::from(in_int), mark);
        }
        // Always write the objective entry, even at zero, so every column is
        // declared in COLUMNS.
        let _ = writeln!(s, " {} OBJ {}", vn[j], p.obj[j]);
        for &(r, c) in &col_terms[j] {
            let _ = writeln!(s, " {} {} {}", vn[j], rn[r], c);
        }
    }
    if in_int {
        s.push_str(" MARK9 'MARKER' 'INTEND'\n");
    }

    s.push_str("RHS\n");
    if p.obj_offset != 0.0 {
        let _ = writeln!(s, " RHS OBJ {}", -p.obj_offset);
    }
    for (r, row) in p.rows.iter().enumerate() {
        if row.rhs != 0.0 {
            let _ = writeln!(s, " RHS {} {}", rn[r], row.rhs);
        }
    }

    s.push_str("BOUNDS\n");
    for j in 0..p.n_vars() {
        let (lo, hi) = (p.lb[j], p.ub[j]);
        if p.integer[j] && lo == 0.0 && hi == 1.0 {
            let _ = writeln!(s, " BV BND {}", vn[j]);
            continue;
        }
        if lo == hi {
            let _ = writeln!(s, " FX BND {} {}", vn[j], lo);
            continue;
        }
        if lo.is_infinite() {
            let _ = writeln!(s, " MI BND {}", vn[j]);
        } else {
            let _ = writeln!(s, " LO BND {} {}", vn[j], lo);
        }
        if hi.is_infinite() {
            let _ = writeln!(s, " PL BND {}", vn[j]);
        } else {
            let _ = writeln!(s, " UP BND {} {}", vn[j], hi);
        }
    }
    s.push_str("ENDATA\n");
    s
}

/// Parse the dialect written by `write_mps`. Unknown sections other than
/// RANGES are rejected; RANGES is rejected explicitly because the canonical
/// form has no ranged rows.
pub fn read_mps(text: &str) -> Result<CanonicalProgram, SolveError> {
    let bad = |msg: String| SolveError::Backend(msg);
    let mut p = CanonicalProgram::new("");
    let mut obj_row: Option<String> = None;
    let mut row_ix: HashMap<String, usize> = HashMap::new();
    let mut col_ix: HashMap<String, usize> = HashMap::new();
    let mut section = String::new();
    let mut in_int = false;
    // Terms are accumulated per row, then attached at the end.
    let mut terms: Vec<Vec<(usize, f64)>> = Vec::new();

    let parse_num = |f: &str| {
        f.parse::<f64>()
            .map_err(|_| bad(format!("mps: bad number {f:?}")))
    };

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let indented = raw.starts_with(' ') || raw.starts_with('\t');
        if !indented {
            match fields[0] {
                "NAME" => {
                    p.name = fields.get(1).unwrap_or(&"").to_string();
                }
                "ROWS" | "COLUMNS" | "RHS" | "BOUNDS" | "ENDATA" => {
                    section = fields[0].to_string();
                }
                "RANGES" => return Err(bad("mps: RANGES section not supported".into())),
                other => return Err(bad(format!("mps line {}: unknown section {other:?}", ln + 1))),
            }
            if section == "ENDATA" {
                break;
            }
            continue;
        }
        match section.as_str() {
            "ROWS" => {
                if fields.len() != 2 {
                    return Err(bad(format!("mps line {}: malformed row entry", ln + 1)));
                }
                let name = fields[1].to_string();
                match fields[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(name);
                        }
                    }
                    tag => {
                        let sense = match tag {
                            "L" => Sense::Le,
                            "G" => Sense::Ge,
                            "E" => Sense::Eq,
                            _ => return Err(bad(format!("mps line {}: bad row sense {tag:?}", ln + 1))),
                        };
                        if row_ix.insert(name.clone(), p.rows.len()).is_some() {
                            return Err(bad(format!("mps: duplicate row {name:?}")));
                        }
                        p.rows.push(Row { name, terms: Vec::new(), sense, rhs: 0.0, lazy: false });
                        terms.push(Vec::new());
                    }
                }
            }
            "COLUMNS" => {
                if fields.len() >= 3 && fields[1] == "'MARKER'" {
                    match *fields.last().unwrap() {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        m => return Err(bad(format!("mps line {}: unknown marker {m:?}", ln + 1))),
                    }
                    continue;
                }
                if fields.len() < 3 || fields.len().is_multiple_of(2) {
                    return Err(bad(format!("mps line {}: malformed column entry", ln + 1)));
                }
                let col = *col_ix.entry(fields[0].to_string()).or_insert_with(|| {
                    p.add_var(fields[0], 0.0, f64::INFINITY, 0.0, in_int)
                });
                for pair in fields[1..].chunks(2) {
                    let val = parse_num(pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        p.obj[col] = val;
                    } else {
                        let r = *row_ix
                            .get(pair[0])
                            .ok_or_else(|| bad(format!("mps line {}: unknown row {:?}", ln + 1, pair[0])))?;
                        terms[r].push((col, val));
                    }
                }
            }
            "RHS" => {
                if fields.len() < 3 || fields.len().is_multiple_of(2) {
                    return Err(bad(format!("mps line {}: malformed rhs entry", ln + 1)));
                }
                for pair in fields[1..].chunks(2) {
                    let val = parse_num(pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        p.obj_offset = -val;
                    } else {
                        let r = *row_ix
                            .get(pair[0])
                            .ok_or_else(|| bad(format!("mps line {}: unknown row {:?}", ln + 1, pair[0])))?;
                        p.rows[r].rhs = val;
                    }
                }
            }
            "BOUNDS" => {
                if fields.len() < 3 {
                    return Err(bad(format!("mps line {}: malformed bound entry", ln + 1)));
                }
                let j = *col_ix
                    .get(fields[2])
                    .ok_or_else(|| bad(format!("mps line {}: unknown column {:?}", ln + 1, fields[2])))?;
                let val = || -> Result<f64, SolveError> {
                    parse_num(fields.get(3).ok_or_else(|| bad(format!("mps line {}: bound needs a value", ln + 1)))?)
                };
                match fields[0] {
                    "LO" => p.lb[j] = val()?,
                    "UP" => p.ub[j] = val()?,
                    "FX" => {
                        let v = val()?;
                        p.lb[j] = v;
                        p.ub[j] = v;
                    }
                    "FR" => {
                        p.lb[j] = f64::NEG_INFINITY;
                        p.ub[j] = f64::INFINITY;
                    }
                    "MI" => p.lb[j] = f64::NEG_INFINITY,
                    "PL" => p.ub[j] = f64::INFINITY,
                    "BV" => {
                        p.lb[j] = 0.0;
                        p.ub[j] = 1.0;
                        p.integer[j] = true;
                    }
                    "LI" => {
                        p.lb[j] = val()?;
                        p.integer[j] = true;
                    }
                    "UI" => {
                        p.ub[j] = val()?;
                        p.integer[j] = true;
                    }
                    t => return Err(bad(format!("mps line {}: unknown bound type {t:?}", ln + 1))),
                }
            }
            other => {
                return Err(bad(format!("mps line {}: data outside a known section ({other:?})", ln + 1)))
            }
        }
    }

    for (r, t) in terms.into_iter().enumerate() {
        for (j, c) in t {
            p.rows[r].terms.push((j, c));
        }
        p.rows[r].terms.sort_by_key(|&(j, _)| j);
    }
    p.validate().map_err(|e| bad(format!("mps: parsed program invalid: {e}")))?;
    Ok(p)
}
