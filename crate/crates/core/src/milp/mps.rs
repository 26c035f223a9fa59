//! Free-format MPS output.
//!
//! Variable names are written through [`mangle_name`]: bytes outside
//! `[A-Za-z0-9_.]` become `#xx` (two lowercase hex digits), and `#` itself is
//! escaped the same way, so [`demangle_name`] recovers the original exactly.
//! Rows are named `R<index>` in constraint order; the objective row is `OBJ`.

use std::fmt::Write;

use super::model::{Domain, MilpModel, Sense};

pub fn mangle_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for b in name.bytes() {
        if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' {
            out.push(b as char);
        } else {
            let _ = write!(out, "#{b:02x}");
        }
    }
    if out.is_empty() {
        out.push('#');
    }
    out
}

pub fn demangle_name(name: &str) -> Option<String> {
    if name == "#" {
        return Some(String::new());
    }
    let bytes = name.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'#' {
            let hex = name.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

fn num(v: f64) -> String {
    // `{:?}` keeps the shortest round-trip representation.
    let s = format!("{v:?}");
    s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
}

pub fn write_mps(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME psps");
    let _ = writeln!(out, "ROWS");
    let _ = writeln!(out, " N OBJ");
    for (i, c) in model.constraints().iter().enumerate() {
        let kind = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {kind} R{i}");
    }

    // Column-major view of the constraint matrix.
    let n = model.num_vars();
    let mut columns: Vec<Vec<(String, f64)>> = vec![Vec::new(); n];
    for (coef, var) in model.objective() {
        columns[var.0].push(("OBJ".to_string(), *coef));
    }
    for (i, c) in model.constraints().iter().enumerate() {
        for (coef, var) in &c.terms {
            columns[var.0].push((format!("R{i}"), *coef));
        }
    }

    let _ = writeln!(out, "COLUMNS");
    let mut in_int_block = false;
    let mut marker = 0usize;
    for (j, var) in model.variables().iter().enumerate() {
        let binary = var.domain.is_binary();
        if binary != in_int_block {
            let kind = if binary { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER{marker} 'MARKER' {kind}");
            marker += 1;
            in_int_block = binary;
        }
        let name = mangle_name(&var.name);
        if columns[j].is_empty() {
            let _ = writeln!(out, "    {name} OBJ 0");
        }
        for (row, coef) in &columns[j] {
            let _ = writeln!(out, "    {name} {row} {}", num(*coef));
        }
    }
    if in_int_block {
        let _ = writeln!(out, "    MARKER{marker} 'MARKER' 'INTEND'");
    }

    let _ = writeln!(out, "RHS");
    for (i, c) in model.constraints().iter().enumerate() {
        if c.rhs != 0.0 {
            let _ = writeln!(out, "    RHS R{i} {}", num(c.rhs));
        }
    }

    let _ = writeln!(out, "BOUNDS");
    for var in model.variables() {
        let name = mangle_name(&var.name);
        match var.domain {
            Domain::Binary => {
                let _ = writeln!(out, " LO BND {name} 0");
                let _ = writeln!(out, " UP BND {name} 1");
            }
            Domain::Continuous { lower, upper } => {
                if lower == upper {
                    let _ = writeln!(out, " FX BND {name} {}", num(lower));
                } else if lower == f64::NEG_INFINITY && upper == f64::INFINITY {
                    let _ = writeln!(out, " FR BND {name}");
                } else {
                    if lower == f64::NEG_INFINITY {
                        let _ = writeln!(out, " MI BND {name}");
                    } else if lower != 0.0 {
                        let _ = writeln!(out, " LO BND {name} {}", num(lower));
                    }
                    if upper != f64::INFINITY {
                        let _ = writeln!(out, " UP BND {name} {}", num(upper));
                    }
                }
            }
        }
    }
    let _ = writeln!(out, "ENDATA");
    out
}
