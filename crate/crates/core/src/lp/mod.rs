//! Sparse LP model container, a bounded revised simplex solver, a
//! brute-force vertex oracle for tiny instances and MPS export.

mod lu;
mod mps;
mod oracle;
mod simplex;

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub use mps::write_mps;
pub use oracle::enumerate_vertices_oracle;
pub use simplex::{Pricing, RevisedSimplex, SimplexOptions};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// Structured row/column name: what the entry models, for which entity,
/// at which time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Tag {
    pub kind: &'static str,
    pub entity: u32,
    pub time: Option<u32>,
}

impl Tag {
    pub const fn new(kind: &'static str, entity: usize, time: Option<usize>) -> Self {
        Tag {
            kind,
            entity: entity as u32,
            time: match time {
                Some(t) => Some(t as u32),
                None => None,
            },
        }
    }

    pub const fn at(kind: &'static str, entity: usize, time: usize) -> Self {
        Self::new(kind, entity, Some(time))
    }

    pub const fn scalar(kind: &'static str, entity: usize) -> Self {
        Self::new(kind, entity, None)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.time {
            Some(t) => write!(f, "{}[{}]@{}", self.kind, self.entity, t),
            None => write!(f, "{}[{}]", self.kind, self.entity),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    pub tag: Tag,
    pub obj: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub tag: Tag,
    pub sense: RowSense,
    pub rhs: f64,
}

/// Linear program `opt c^T x + offset` subject to row constraints and
/// variable bounds. The matrix is stored row-major.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub name: String,
    pub sense: Sense,
    pub obj_offset: f64,
    cols: Vec<Column>,
    rows: Vec<Row>,
    row_start: Vec<usize>,
    entries: Vec<(usize, f64)>,
    col_index: HashMap<Tag, usize>,
    row_index: HashMap<Tag, usize>,
}

impl LpProblem {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        LpProblem {
            name: name.into(),
            sense,
            obj_offset: 0.0,
            cols: Vec::new(),
            rows: Vec::new(),
            row_start: vec![0],
            entries: Vec::new(),
            col_index: HashMap::new(),
            row_index: HashMap::new(),
        }
    }

    pub fn add_col(&mut self, tag: Tag, obj: f64, lower: f64, upper: f64) -> Result<usize> {
        if !obj.is_finite() || lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::Lp(format!("column {tag}: invalid data obj={obj} [{lower}, {upper}]")));
        }
        if lower > upper {
            return Err(Error::Lp(format!("column {tag}: lower bound {lower} above upper {upper}")));
        }
        let j = self.cols.len();
        if self.col_index.insert(tag, j).is_some() {
            return Err(Error::Lp(format!("duplicate column name {tag}")));
        }
        self.cols.push(Column { tag, obj, lower, upper });
        Ok(j)
    }

    pub fn add_row(&mut self, tag: Tag, coeffs: &[(usize, f64)], sense: RowSense, rhs: f64) -> Result<usize> {
        if !rhs.is_finite() {
            return Err(Error::Lp(format!("row {tag}: rhs {rhs}")));
        }
        for &(j, v) in coeffs {
            if j >= self.cols.len() || !v.is_finite() {
                return Err(Error::Lp(format!("row {tag}: bad entry ({j}, {v})")));
            }
        }
        let i = self.rows.len();
        if self.row_index.insert(tag, i).is_some() {
            return Err(Error::Lp(format!("duplicate row name {tag}")));
        }
        self.entries.extend(coeffs.iter().copied().filter(|e| e.1 != 0.0));
        self.row_start.push(self.entries.len());
        self.rows.push(Row { tag, sense, rhs });
        Ok(i)
    }

    pub fn set_obj(&mut self, j: usize, obj: f64) {
        self.cols[j].obj = obj;
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.cols[j].lower = lower;
        self.cols[j].upper = upper;
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> &[Column] {
        &self.cols
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    #[inline]
    pub fn row_entries(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[self.row_start[i]..self.row_start[i + 1]]
    }

    pub fn col_of(&self, tag: &Tag) -> Option<usize> {
        self.col_index.get(tag).copied()
    }

    pub fn row_of(&self, tag: &Tag) -> Option<usize> {
        self.row_index.get(tag).copied()
    }

    /// Column-major copy of the matrix.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.cols.len()];
        for i in 0..self.rows.len() {
            for &(j, v) in self.row_entries(i) {
                out[j].push((i, v));
            }
        }
        out
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_offset + self.cols.iter().zip(x).map(|(c, v)| c.obj * v).sum::<f64>()
    }

    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows.len())
            .map(|i| self.row_entries(i).iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Structural invariants: consistent sizes and finite data.
    pub fn validate(&self) -> Result<()> {
        if self.row_start.len() != self.rows.len() + 1 {
            return Err(Error::Lp("row index out of sync".into()));
        }
        if !self.obj_offset.is_finite() {
            return Err(Error::Lp("objective offset is not finite".into()));
        }
        if self.col_index.len() != self.cols.len() || self.row_index.len() != self.rows.len() {
            return Err(Error::Lp("names are not unique".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration limit reached before a terminal status.
    Stalled,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::Stalled => "stalled",
        };
        f.write_str(s)
    }
}

/// Primal-dual solution. `duals[i]` is the shadow price of row `i`
/// (`d objective / d rhs_i`) and `reduced_costs[j] = c_j - a_j^T duals`,
/// both in the problem's own objective sense.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn empty(status: LpStatus, p: &LpProblem, iterations: usize) -> Self {
        LpSolution {
            status,
            x: vec![0.0; p.n_cols()],
            duals: vec![0.0; p.n_rows()],
            reduced_costs: vec![0.0; p.n_cols()],
            objective: f64::NAN,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, p: &LpProblem, tag: &Tag) -> Option<f64> {
        p.col_of(tag).map(|j| self.x[j])
    }

    pub fn dual(&self, p: &LpProblem, tag: &Tag) -> Option<f64> {
        p.row_of(tag).map(|i| self.duals[i])
    }
}

/// Optimality residuals of a primal-dual pair, all absolute.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct KktReport {
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl KktReport {
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }

    pub fn passes(&self, tol: f64) -> bool {
        let scale = 1.0 + self.primal_objective.abs();
        self.primal_infeasibility <= tol * scale.max(1.0)
            && self.dual_infeasibility <= tol * scale
            && self.complementarity <= tol * scale
            && self.gap() <= tol * scale
    }
}

/// Recompute feasibility, sign and complementarity conditions from
/// scratch. The dual objective uses `b^T y` plus bound contributions of the
/// reduced costs.
pub fn kkt_report(p: &LpProblem, sol: &LpSolution) -> KktReport {
    let sigma = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let act = p.row_activity(&sol.x);
    let mut rep = KktReport {
        primal_objective: p.objective_value(&sol.x),
        ..Default::default()
    };
    let mut dual_obj = p.obj_offset;
    for (i, row) in p.rows().iter().enumerate() {
        let slack = row.rhs - act[i];
        let viol = match row.sense {
            RowSense::Le => (-slack).max(0.0),
            RowSense::Ge => slack.max(0.0),
            RowSense::Eq => slack.abs(),
        };
        rep.primal_infeasibility = rep.primal_infeasibility.max(viol);
        // in minimization form: Le rows need y <= 0, Ge rows y >= 0
        let y = sigma * sol.duals[i];
        let sign_viol = match row.sense {
            RowSense::Le => y.max(0.0),
            RowSense::Ge => (-y).max(0.0),
            RowSense::Eq => 0.0,
        };
        rep.dual_infeasibility = rep.dual_infeasibility.max(sign_viol);
        if row.sense != RowSense::Eq {
            rep.complementarity = rep.complementarity.max((slack * sol.duals[i]).abs());
        }
        dual_obj += row.rhs * sol.duals[i];
    }
    let cols = p.columns();
    for (j, col) in p.cols().iter().enumerate() {
        let x = sol.x[j];
        rep.primal_infeasibility = rep
            .primal_infeasibility
            .max((col.lower - x).max(0.0))
            .max((x - col.upper).max(0.0));
        let d_calc = col.obj - cols[j].iter().map(|&(i, v)| v * sol.duals[i]).sum::<f64>();
        rep.dual_infeasibility = rep.dual_infeasibility.max((d_calc - sol.reduced_costs[j]).abs());
        // minimization form: d > 0 needs x at lower, d < 0 needs x at upper
        let d = sigma * d_calc;
        if d > 0.0 {
            if col.lower.is_finite() {
                rep.complementarity = rep.complementarity.max(d * (x - col.lower));
                dual_obj += d_calc * col.lower;
            } else {
                rep.dual_infeasibility = rep.dual_infeasibility.max(d);
            }
        } else if d < 0.0 {
            if col.upper.is_finite() {
                rep.complementarity = rep.complementarity.max(-d * (col.upper - x));
                dual_obj += d_calc * col.upper;
            } else {
                rep.dual_infeasibility = rep.dual_infeasibility.max(-d);
            }
        }
    }
    rep.dual_objective = dual_obj;
    rep
}

/// Interface for substituting another LP engine.
pub trait LpSolver: Send + Sync {
    fn solve(&self, problem: &LpProblem) -> Result<LpSolution>;
}

/// Solve with the in-house revised simplex at tolerance `tol`.
pub fn solve_lp(problem: &LpProblem, tol: f64) -> Result<LpSolution> {
    RevisedSimplex::new(SimplexOptions::with_tol(tol)).solve(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = LpProblem::new("d", Sense::Minimize);
        p.add_col(Tag::scalar("x", 0), 1.0, 0.0, f64::INFINITY).unwrap();
        assert!(p.add_col(Tag::scalar("x", 0), 1.0, 0.0, f64::INFINITY).is_err());
        p.add_row(Tag::scalar("r", 0), &[(0, 1.0)], RowSense::Ge, 1.0).unwrap();
        assert!(p.add_row(Tag::scalar("r", 0), &[(0, 1.0)], RowSense::Ge, 1.0).is_err());
        assert!(p.add_row(Tag::scalar("r", 1), &[(3, 1.0)], RowSense::Ge, 1.0).is_err());
        assert!(p.add_col(Tag::scalar("y", 0), f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn tag_display() {
        assert_eq!(Tag::at("cap", 3, 12).to_string(), "cap[3]@12");
        assert_eq!(Tag::scalar("dem", 0).to_string(), "dem[0]");
    }
}
