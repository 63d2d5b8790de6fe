//! Fixed-column MPS export. Rows and columns get positional 8-character
//! names (`R0000001`, `C0000001`); a comment block maps them back to tags.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::{LpProblem, RowSense, Sense};

const FIELD_NUM: usize = 12;

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

/// Shortest decimal rendering of `v` that fits in 12 characters.
pub(crate) fn fmt_num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= FIELD_NUM {
        return plain;
    }
    let mut best = format!("{v:.0e}");
    let mut best_err = f64::INFINITY;
    for prec in 0..FIELD_NUM {
        for s in [format!("{v:.prec$}"), format!("{v:.prec$e}")] {
            if s.len() > FIELD_NUM {
                continue;
            }
            let err = (s.parse::<f64>().unwrap_or(f64::NAN) - v).abs();
            if err < best_err {
                best_err = err;
                best = s;
            }
        }
    }
    best
}

/// One data line with fields at columns 2-3, 5-12, 15-22, 25-36, 40-47
/// and 50-61.
fn data_line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str, f5: &str, f6: &str) {
    let mut line = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}");
    if !f5.is_empty() {
        write!(line, "   {f5:<8}  {f6:>12}").unwrap();
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

pub fn write_mps<W: Write>(p: &LpProblem, mut w: W) -> io::Result<()> {
    let mut s = String::new();
    let name: String = p.name.chars().filter(|c| !c.is_whitespace()).take(8).collect();
    writeln!(s, "* {} rows, {} columns", p.n_rows(), p.n_cols()).unwrap();
    let sign = if p.sense == Sense::Maximize {
        s.push_str("* maximization written as minimization of the negated objective\n");
        -1.0
    } else {
        1.0
    };
    for (i, r) in p.rows().iter().enumerate() {
        writeln!(s, "* {} {}", row_name(i), r.tag).unwrap();
    }
    for (j, c) in p.cols().iter().enumerate() {
        writeln!(s, "* {} {}", col_name(j), c.tag).unwrap();
    }
    writeln!(s, "NAME          {}", if name.is_empty() { "LP" } else { &name }).unwrap();
    s.push_str("ROWS\n");
    data_line(&mut s, "N", "COST", "", "", "", "");
    for (i, r) in p.rows().iter().enumerate() {
        let t = match r.sense {
            RowSense::Le => "L",
            RowSense::Eq => "E",
            RowSense::Ge => "G",
        };
        data_line(&mut s, t, &row_name(i), "", "", "", "");
    }
    s.push_str("COLUMNS\n");
    let cols = p.columns();
    for (j, col) in cols.iter().enumerate() {
        let mut entries: Vec<(String, f64)> = Vec::with_capacity(col.len() + 1);
        let obj = sign * p.cols()[j].obj;
        if obj != 0.0 {
            entries.push(("COST".into(), obj));
        }
        entries.extend(col.iter().map(|&(i, v)| (row_name(i), v)));
        if entries.is_empty() {
            entries.push(("COST".into(), 0.0));
        }
        for pair in entries.chunks(2) {
            let (r1, v1) = &pair[0];
            match pair.get(1) {
                Some((r2, v2)) => data_line(&mut s, "", &col_name(j), r1, &fmt_num(*v1), r2, &fmt_num(*v2)),
                None => data_line(&mut s, "", &col_name(j), r1, &fmt_num(*v1), "", ""),
            }
        }
    }
    s.push_str("RHS\n");
    if p.obj_offset != 0.0 {
        data_line(&mut s, "", "RHS", "COST", &fmt_num(-sign * p.obj_offset), "", "");
    }
    for (i, r) in p.rows().iter().enumerate() {
        if r.rhs != 0.0 {
            data_line(&mut s, "", "RHS", &row_name(i), &fmt_num(r.rhs), "", "");
        }
    }
    s.push_str("BOUNDS\n");
    for (j, c) in p.cols().iter().enumerate() {
        let n = col_name(j);
        if c.lower == c.upper {
            data_line(&mut s, "FX", "BND", &n, &fmt_num(c.lower), "", "");
            continue;
        }
        if c.lower == f64::NEG_INFINITY {
            if c.upper == f64::INFINITY {
                data_line(&mut s, "FR", "BND", &n, "", "", "");
                continue;
            }
            data_line(&mut s, "MI", "BND", &n, "", "", "");
        } else if c.lower != 0.0 {
            data_line(&mut s, "LO", "BND", &n, &fmt_num(c.lower), "", "");
        }
        if c.upper.is_finite() {
            data_line(&mut s, "UP", "BND", &n, &fmt_num(c.upper), "", "");
        }
    }
    s.push_str("ENDATA\n");
    w.write_all(s.as_bytes())
}
