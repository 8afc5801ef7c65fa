//! Fixed-format MPS export.
//!
//! Rows and columns are given generated eight-character names (`R0000001`,
//! `C0000001`); the original names are listed in comment lines at the top of
//! the file. Maximization problems are written with the objective negated,
//! since fixed MPS has no portable sense marker.

use std::io::{self, Write};

use crate::problem::{LinearProgram, Sense};

pub const OBJECTIVE_ROW: &str = "COST";

pub fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

pub fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

/// Formats a number into at most 12 characters.
fn num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for prec in (0..=8).rev() {
        let s = format!("{v:.prec$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:.0e}")
}

fn field_line(out: &mut impl Write, code: &str, name: &str, pairs: &[(&str, f64)]) -> io::Result<()> {
    let mut line = format!(" {code:<2} {name:<8}");
    for (i, (n, v)) in pairs.iter().enumerate() {
        if i == 0 {
            line.push_str(&format!("  {n:<8}  {:>12}", num(*v)));
        } else {
            line.push_str(&format!("   {n:<8}  {:>12}", num(*v)));
        }
    }
    writeln!(out, "{}", line.trim_end())
}

pub fn write_mps(lp: &LinearProgram, out: &mut impl Write) -> io::Result<()> {
    let sign = match lp.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    writeln!(out, "* {}", lp)?;
    if lp.sense() == Sense::Maximize {
        writeln!(out, "* objective negated: the original problem maximizes")?;
    }
    for (i, r) in lp.constraints().iter().enumerate() {
        writeln!(out, "*  {}  {}", row_name(i), r.name)?;
    }
    for (j, v) in lp.variables().iter().enumerate() {
        writeln!(out, "*  {}  {}", col_name(j), v.name)?;
    }
    let name: String = lp.name.chars().filter(|c| !c.is_whitespace()).take(8).collect();
    writeln!(out, "NAME          {}", if name.is_empty() { "LP" } else { &name })?;

    writeln!(out, "ROWS")?;
    writeln!(out, " N  {OBJECTIVE_ROW}")?;
    for (i, r) in lp.constraints().iter().enumerate() {
        let code = match (r.lower.is_finite(), r.upper.is_finite()) {
            (true, true) if r.lower == r.upper => "E",
            (true, _) => "G",
            (false, true) => "L",
            (false, false) => "N",
        };
        writeln!(out, " {code:<2} {}", row_name(i))?;
    }

    // Column-major entries.
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_vars()];
    for (i, r) in lp.constraints().iter().enumerate() {
        for &(v, a) in &r.terms {
            by_col[v.0].push((i, a));
        }
    }
    writeln!(out, "COLUMNS")?;
    for (j, v) in lp.variables().iter().enumerate() {
        let cname = col_name(j);
        let mut entries: Vec<(String, f64)> = Vec::new();
        if v.objective != 0.0 {
            entries.push((OBJECTIVE_ROW.to_string(), sign * v.objective));
        }
        entries.extend(by_col[j].iter().map(|&(i, a)| (row_name(i), a)));
        if entries.is_empty() {
            // Keep the column declared so bounds can refer to it.
            entries.push((OBJECTIVE_ROW.to_string(), 0.0));
        }
        for chunk in entries.chunks(2) {
            let pairs: Vec<(&str, f64)> = chunk.iter().map(|(n, a)| (n.as_str(), *a)).collect();
            field_line(out, "", &cname, &pairs)?;
        }
    }

    writeln!(out, "RHS")?;
    for (i, r) in lp.constraints().iter().enumerate() {
        let rhs = if r.lower.is_finite() {
            r.lower
        } else if r.upper.is_finite() {
            r.upper
        } else {
            0.0
        };
        if rhs != 0.0 {
            field_line(out, "", "RHS", &[(&row_name(i), rhs)])?;
        }
    }

    let ranged: Vec<(usize, f64)> = lp
        .constraints()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.lower.is_finite() && r.upper.is_finite() && r.lower != r.upper)
        .map(|(i, r)| (i, r.upper - r.lower))
        .collect();
    if !ranged.is_empty() {
        writeln!(out, "RANGES")?;
        for (i, width) in ranged {
            field_line(out, "", "RNG", &[(&row_name(i), width)])?;
        }
    }

    writeln!(out, "BOUNDS")?;
    for (j, v) in lp.variables().iter().enumerate() {
        let c = col_name(j);
        let (lo, up) = (v.lower, v.upper);
        if lo == up {
            field_line(out, "FX", "BND", &[(&c, lo)])?;
            continue;
        }
        match (lo.is_finite(), up.is_finite()) {
            (false, false) => writeln!(out, " FR BND       {c}")?,
            (false, true) => {
                writeln!(out, " MI BND       {c}")?;
                field_line(out, "UP", "BND", &[(&c, up)])?;
            }
            (true, fin_up) => {
                if lo != 0.0 {
                    field_line(out, "LO", "BND", &[(&c, lo)])?;
                }
                if fin_up {
                    field_line(out, "UP", "BND", &[(&c, up)])?;
                }
            }
        }
    }
    writeln!(out, "ENDATA")?;
    Ok(())
}
