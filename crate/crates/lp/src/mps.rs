//! MPS export.
//!
//! Fields start at the classic fixed-format columns (2, 5, 15, 25, 40, 50).
//! Names longer than eight characters push later fields right, keeping at
//! least two separating blanks, so files stay readable by free-format parsers
//! as long as names contain no spaces.

use std::io::{self, Write};

use crate::model::Problem;

/// Pads to 1-based column `col`, or adds two blanks when already past it.
fn pad_to(line: &mut String, col: usize) {
    let target = col - 1;
    if line.len() < target {
        line.extend(std::iter::repeat_n(' ', target - line.len()));
    } else {
        line.push_str("  ");
    }
}

fn num(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 12 {
        s
    } else {
        format!("{v:.6e}")
    }
}

/// Lays out `kind`, `name` and up to four further fields at the fixed columns.
fn fields(kind: &str, name: &str, rest: &[&str]) -> String {
    let mut line = String::new();
    pad_to(&mut line, 2);
    line.push_str(kind);
    pad_to(&mut line, 5);
    line.push_str(name);
    for (field, col) in rest.iter().zip([15usize, 25, 40, 50]) {
        pad_to(&mut line, col);
        line.push_str(field);
    }
    line
}

fn field_line(kind: &str, name: &str, entries: &[(&str, f64)]) -> String {
    let values: Vec<String> = entries.iter().map(|(_, v)| num(*v)).collect();
    let mut rest: Vec<&str> = Vec::new();
    for ((n, _), v) in entries.iter().zip(&values) {
        rest.push(n);
        rest.push(v);
    }
    fields(kind, name, &rest)
}

fn marker_line(index: usize, tag: &str) -> String {
    fields("", &format!("MARKER{index:04}"), &["'MARKER'", "", tag])
}

pub fn write_mps<W: Write>(problem: &Problem, mut out: W) -> io::Result<()> {
    let name = if problem.name.is_empty() { "PROBLEM" } else { &problem.name };
    writeln!(out, "NAME          {name}")?;
    writeln!(out, "ROWS")?;
    writeln!(out, " N  COST")?;
    let mut row_kind = Vec::with_capacity(problem.num_rows());
    for row in problem.rows() {
        let kind = if row.lower == row.upper {
            "E"
        } else if row.lower.is_finite() {
            "G"
        } else if row.upper.is_finite() {
            "L"
        } else {
            "N"
        };
        row_kind.push(kind);
        writeln!(out, " {kind}  {}", row.name)?;
    }

    // column-major view
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.num_vars()];
    for (i, row) in problem.rows().iter().enumerate() {
        for (v, c) in &row.entries {
            columns[v.0].push((i, *c));
        }
    }

    writeln!(out, "COLUMNS")?;
    let mut in_int = false;
    let mut marker = 0usize;
    for (j, var) in problem.vars().iter().enumerate() {
        if var.integer != in_int {
            let tag = if var.integer { "'INTORG'" } else { "'INTEND'" };
            writeln!(out, "{}", marker_line(marker, tag))?;
            marker += 1;
            in_int = var.integer;
        }
        let mut entries: Vec<(&str, f64)> = Vec::new();
        if var.cost != 0.0 {
            entries.push(("COST", var.cost));
        }
        for &(i, c) in &columns[j] {
            entries.push((problem.rows()[i].name.as_str(), c));
        }
        if entries.is_empty() {
            // keep the column declared
            entries.push(("COST", 0.0));
        }
        for chunk in entries.chunks(2) {
            writeln!(out, "{}", field_line("", &var.name, chunk))?;
        }
    }
    if in_int {
        writeln!(out, "{}", marker_line(marker, "'INTEND'"))?;
    }

    writeln!(out, "RHS")?;
    for (row, kind) in problem.rows().iter().zip(&row_kind) {
        let rhs = match *kind {
            "E" | "G" => row.lower,
            "L" => row.upper,
            _ => continue,
        };
        if rhs != 0.0 {
            writeln!(out, "{}", field_line("", "RHS", &[(row.name.as_str(), rhs)]))?;
        }
    }

    let ranged: Vec<_> = problem
        .rows()
        .iter()
        .filter(|r| r.lower.is_finite() && r.upper.is_finite() && r.lower != r.upper)
        .collect();
    if !ranged.is_empty() {
        writeln!(out, "RANGES")?;
        for row in ranged {
            writeln!(out, "{}", field_line("", "RNG", &[(row.name.as_str(), row.upper - row.lower)]))?;
        }
    }

    writeln!(out, "BOUNDS")?;
    for var in problem.vars() {
        let (lo, up) = (var.lower, var.upper);
        if var.integer && lo == 0.0 && up == 1.0 {
            writeln!(out, "{}", field_line("BV", "BND", &[(var.name.as_str(), 1.0)]))?;
            continue;
        }
        if lo == up {
            writeln!(out, "{}", field_line("FX", "BND", &[(var.name.as_str(), lo)]))?;
            continue;
        }
        if !lo.is_finite() && !up.is_finite() {
            writeln!(out, "{}", fields("FR", "BND", &[var.name.as_str()]))?;
            continue;
        }
        if !lo.is_finite() {
            writeln!(out, "{}", fields("MI", "BND", &[var.name.as_str()]))?;
        } else if lo != 0.0 {
            writeln!(out, "{}", field_line("LO", "BND", &[(var.name.as_str(), lo)]))?;
        }
        if up.is_finite() {
            writeln!(out, "{}", field_line("UP", "BND", &[(var.name.as_str(), up)]))?;
        }
    }
    writeln!(out, "ENDATA")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_columns_and_sections() {
        let mut p = Problem::new("UC");
        let u = p.add_binary("u_g1_t1", 50.0, 1);
        let x = p.add_var("p_g1_t1", 0.0, 200.0, 20.0);
        let th = p.add_var("th", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        p.add_row("bal_b1_t1", 100.0, 100.0, &[(x, 1.0)]);
        p.add_row("cap", f64::NEG_INFINITY, 0.0, &[(x, 1.0), (u, -200.0)]);
        p.add_row("rng", -1.0, 1.0, &[(th, 1.0)]);
        let mut buf = Vec::new();
        write_mps(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "NAME          UC");
        assert!(lines.contains(&" E  bal_b1_t1"));
        assert!(lines.contains(&" L  cap"));
        assert!(text.contains("'INTORG'") && text.contains("'INTEND'"));
        let bv = lines.iter().find(|l| l.starts_with(" BV ")).unwrap();
        assert_eq!(&bv[4..7], "BND");
        assert_eq!(&bv[14..21], "u_g1_t1");
        assert!(text.contains(" FR BND       th"));
        assert!(text.contains("RANGES"));
        assert_eq!(*lines.last().unwrap(), "ENDATA");
        // short names land on the classic field columns
        let rhs = lines.iter().find(|l| l.contains("RHS") && l.contains("bal_b1_t1")).unwrap();
        assert_eq!(&rhs[4..7], "RHS");
        assert_eq!(&rhs[14..23], "bal_b1_t1");
    }
}
