//! Exhaustive vertex enumeration for tiny LPs, used as a test oracle.

use super::{LpProblem, LpSolution, LpStatus, RowSense, Sense};
use crate::error::{Error, Result};

pub const ORACLE_MAX_SIZE: usize = 24;

#[derive(Clone, Copy)]
enum Origin {
    Row(usize),
    Lower,
    Upper,
    Box,
}

struct Constraint {
    a: Vec<f64>,
    sense: RowSense,
    rhs: f64,
    origin: Origin,
}

/// Solve the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when (numerically) singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Optimum of `problem` found by enumerating every basic solution.
/// Unboundedness is detected with an artificial box far outside the data.
pub fn enumerate_vertices_oracle(problem: &LpProblem) -> Result<LpSolution> {
    let n = problem.n_cols();
    let m = problem.n_rows();
    if n + m > ORACLE_MAX_SIZE {
        return Err(Error::Lp(format!(
            "oracle limited to {ORACLE_MAX_SIZE} variables + rows, got {}",
            n + m
        )));
    }
    let sigma = if problem.sense == Sense::Minimize { 1.0 } else { -1.0 };
    let c: Vec<f64> = problem.cols().iter().map(|col| sigma * col.obj).collect();

    let mut big = 1.0f64;
    for row in problem.rows() {
        big = big.max(row.rhs.abs());
    }
    for col in problem.cols() {
        for v in [col.lower, col.upper] {
            if v.is_finite() {
                big = big.max(v.abs());
            }
        }
    }
    let big = 1e6 * big;

    let mut cons = Vec::new();
    for (i, row) in problem.rows().iter().enumerate() {
        let mut a = vec![0.0; n];
        for &(j, v) in problem.row_entries(i) {
            a[j] += v;
        }
        cons.push(Constraint { a, sense: row.sense, rhs: row.rhs, origin: Origin::Row(i) });
    }
    for (j, col) in problem.cols().iter().enumerate() {
        let unit = |v: f64| {
            let mut a = vec![0.0; n];
            a[j] = v;
            a
        };
        if col.lower == col.upper {
            cons.push(Constraint { a: unit(1.0), sense: RowSense::Eq, rhs: col.lower, origin: Origin::Lower });
            continue;
        }
        if col.lower.is_finite() {
            cons.push(Constraint { a: unit(1.0), sense: RowSense::Ge, rhs: col.lower, origin: Origin::Lower });
        } else {
            cons.push(Constraint { a: unit(1.0), sense: RowSense::Ge, rhs: -big, origin: Origin::Box });
        }
        if col.upper.is_finite() {
            cons.push(Constraint { a: unit(1.0), sense: RowSense::Le, rhs: col.upper, origin: Origin::Upper });
        } else {
            cons.push(Constraint { a: unit(1.0), sense: RowSense::Le, rhs: big, origin: Origin::Box });
        }
    }

    let feas_tol = 1e-9 * (1.0 + big / 1e6);
    let feasible = |x: &[f64]| {
        cons.iter().all(|k| {
            let v: f64 = k.a.iter().zip(x).map(|(a, b)| a * b).sum();
            match k.sense {
                RowSense::Le => v <= k.rhs + feas_tol,
                RowSense::Ge => v >= k.rhs - feas_tol,
                RowSense::Eq => (v - k.rhs).abs() <= feas_tol,
            }
        })
    };

    let mut empty = LpSolution::empty(LpStatus::Infeasible, problem, 0);
    if n == 0 {
        let ok = problem.rows().iter().all(|r| match r.sense {
            RowSense::Le => r.rhs >= 0.0,
            RowSense::Ge => r.rhs <= 0.0,
            RowSense::Eq => r.rhs == 0.0,
        });
        if ok {
            empty.status = LpStatus::Optimal;
            empty.objective = problem.obj_offset;
        }
        return Ok(empty);
    }

    struct Best {
        z: f64,
        x: Vec<f64>,
        uses_box: bool,
    }
    let mut best: Option<Best> = None;
    let mut visited = 0usize;
    let mut idx: Vec<usize> = (0..n).collect();
    if cons.len() >= n {
        loop {
            visited += 1;
            let a: Vec<Vec<f64>> = idx.iter().map(|&k| cons[k].a.clone()).collect();
            let b: Vec<f64> = idx.iter().map(|&k| cons[k].rhs).collect();
            if let Some(x) = solve_dense(a, b) {
                if feasible(&x) {
                    let z: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                    let uses_box = idx.iter().any(|&k| matches!(cons[k].origin, Origin::Box));
                    let better = best.as_ref().is_none_or(|bst| {
                        z < bst.z - 1e-12 * (1.0 + z.abs()) || (!uses_box && bst.uses_box && z <= bst.z + 1e-9)
                    });
                    if better {
                        best = Some(Best { z, x, uses_box });
                    }
                }
            }
            if !next_combination(&mut idx, cons.len()) {
                break;
            }
        }
    }

    let Some(best) = best else {
        empty.iterations = visited;
        return Ok(empty);
    };
    if best.uses_box {
        let on_box = best.x.iter().any(|v| v.abs() >= big * (1.0 - 1e-9));
        if on_box {
            let mut s = LpSolution::empty(LpStatus::Unbounded, problem, visited);
            s.iterations = visited;
            return Ok(s);
        }
    }

    // multipliers: express c as a signed combination of active constraints
    let x = best.x;
    let active: Vec<usize> = (0..cons.len())
        .filter(|&k| {
            let v: f64 = cons[k].a.iter().zip(&x).map(|(a, b)| a * b).sum();
            (v - cons[k].rhs).abs() <= 1e-7 * (1.0 + cons[k].rhs.abs()) && !matches!(cons[k].origin, Origin::Box)
        })
        .collect();
    let mut duals = vec![0.0; m];
    let mut rc = c.clone();
    if active.len() >= n {
        let mut sel: Vec<usize> = (0..n).collect();
        loop {
            let rows: Vec<usize> = sel.iter().map(|&s| active[s]).collect();
            // A_S^T mu = c
            let at: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|&k| cons[k].a[j]).collect()).collect();
            if let Some(mu) = solve_dense(at, c.clone()) {
                let sign_ok = rows.iter().zip(&mu).all(|(&k, &u)| match cons[k].sense {
                    RowSense::Le => u <= 1e-9,
                    RowSense::Ge => u >= -1e-9,
                    RowSense::Eq => true,
                });
                if sign_ok {
                    duals.iter_mut().for_each(|v| *v = 0.0);
                    for (&k, &u) in rows.iter().zip(&mu) {
                        if let Origin::Row(i) = cons[k].origin {
                            duals[i] += u;
                        }
                    }
                    break;
                }
            }
            if !next_combination(&mut sel, active.len()) {
                break;
            }
        }
    }
    for (i, &yi) in duals.iter().enumerate() {
        for &(j, v) in problem.row_entries(i) {
            rc[j] -= v * yi;
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: problem.objective_value(&x),
        x,
        duals: duals.into_iter().map(|v| sigma * v).collect(),
        reduced_costs: rc.into_iter().map(|v| sigma * v).collect(),
        iterations: visited,
    })
}

#[cfg(test)]
mod tests {
    use super::super::Tag;
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn trivial_cases() {
        let mut p = LpProblem::new("o", Sense::Minimize);
        let x = p.add_col(Tag::scalar("x", 0), 1.0, 0.0, INF).unwrap();
        p.add_row(Tag::scalar("r", 0), &[(x, 1.0)], RowSense::Ge, 1.0).unwrap();
        let s = enumerate_vertices_oracle(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);

        let mut p = LpProblem::new("o", Sense::Minimize);
        let x = p.add_col(Tag::scalar("x", 0), 1.0, 0.0, INF).unwrap();
        p.add_row(Tag::scalar("r", 0), &[(x, 1.0)], RowSense::Le, -1.0).unwrap();
        assert_eq!(enumerate_vertices_oracle(&p).unwrap().status, LpStatus::Infeasible);

        let mut p = LpProblem::new("o", Sense::Maximize);
        let x = p.add_col(Tag::scalar("x", 0), 1.0, 0.0, INF).unwrap();
        let y = p.add_col(Tag::scalar("x", 1), 0.0, 0.0, INF).unwrap();
        p.add_row(Tag::scalar("r", 0), &[(x, 1.0), (y, -1.0)], RowSense::Le, 1.0).unwrap();
        assert_eq!(enumerate_vertices_oracle(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn size_limit() {
        let mut p = LpProblem::new("big", Sense::Minimize);
        for j in 0..25 {
            p.add_col(Tag::scalar("x", j), 1.0, 0.0, 1.0).unwrap();
        }
        assert!(enumerate_vertices_oracle(&p).is_err());
    }
}
