//! Bounded-variable revised simplex.
//!
//! Rows become equalities with one logical variable each; singleton rows
//! are folded into variable bounds beforehand and their duals recovered
//! from reduced costs afterwards. Phase 1 minimizes a sum of artificials.
//! The basis inverse is an LU factorization followed by an eta file that
//! is rebuilt every `refactor_interval` pivots.

use super::lu::{LuFactor, Singular};
use super::{LpProblem, LpSolution, LpSolver, LpStatus, RowSense, Sense};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pricing {
    /// Most negative reduced cost; switches to Bland's rule while stalled.
    Dantzig,
    /// Devex reference weights; same stall fallback.
    Devex,
    /// Bland's smallest-index rule throughout.
    Bland,
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Primal feasibility and optimality tolerance.
    pub tol: f64,
    pub pivot_tol: f64,
    pub max_iter: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_window: usize,
    pub refactor_interval: usize,
    pub pricing: Pricing,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self::with_tol(super::DEFAULT_TOL)
    }
}

impl SimplexOptions {
    pub fn with_tol(tol: f64) -> Self {
        SimplexOptions {
            tol,
            pivot_tol: 1e-9,
            max_iter: 5_000_000,
            stall_window: 500,
            refactor_interval: 100,
            pricing: Pricing::Dantzig,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RevisedSimplex {
    pub options: SimplexOptions,
}

impl RevisedSimplex {
    pub fn new(options: SimplexOptions) -> Self {
        RevisedSimplex { options }
    }
}

impl LpSolver for RevisedSimplex {
    fn solve(&self, problem: &LpProblem) -> Result<LpSolution> {
        problem.validate()?;
        Ok(solve(problem, &self.options))
    }
}

const BASIC: u8 = 0;
const AT_LOWER: u8 = 1;
const AT_UPPER: u8 = 2;
const FREE: u8 = 3;
const FIXED: u8 = 4;

struct Eta {
    r: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

enum Phase {
    Optimal,
    Unbounded,
    IterLimit,
}

/// Which bound of a structural came from a folded singleton row.
#[derive(Clone, Copy)]
struct BoundSource {
    row: usize,
    coef: f64,
}

struct Presolved {
    lower: Vec<f64>,
    upper: Vec<f64>,
    lower_src: Vec<Option<BoundSource>>,
    upper_src: Vec<Option<BoundSource>>,
    /// Original row index of each kept row.
    kept: Vec<usize>,
    infeasible: bool,
}

fn presolve(p: &LpProblem, tol: f64) -> Presolved {
    let n = p.n_cols();
    let mut ps = Presolved {
        lower: p.cols().iter().map(|c| c.lower).collect(),
        upper: p.cols().iter().map(|c| c.upper).collect(),
        lower_src: vec![None; n],
        upper_src: vec![None; n],
        kept: Vec::new(),
        infeasible: false,
    };
    for (i, row) in p.rows().iter().enumerate() {
        let e = p.row_entries(i);
        match e.len() {
            0 => {
                let ok = match row.sense {
                    RowSense::Le => row.rhs >= -tol,
                    RowSense::Ge => row.rhs <= tol,
                    RowSense::Eq => row.rhs.abs() <= tol,
                };
                ps.infeasible |= !ok;
            }
            1 => {
                let (j, a) = e[0];
                let v = row.rhs / a;
                let src = Some(BoundSource { row: i, coef: a });
                let (up, lo) = match (row.sense, a > 0.0) {
                    (RowSense::Eq, _) => (true, true),
                    (RowSense::Le, true) | (RowSense::Ge, false) => (true, false),
                    _ => (false, true),
                };
                if up && v <= ps.upper[j] {
                    ps.upper[j] = v;
                    ps.upper_src[j] = src;
                }
                if lo && v >= ps.lower[j] {
                    ps.lower[j] = v;
                    ps.lower_src[j] = src;
                }
            }
            _ => ps.kept.push(i),
        }
    }
    for j in 0..n {
        if ps.lower[j] > ps.upper[j] {
            if ps.lower[j] - ps.upper[j] <= tol * (1.0 + ps.upper[j].abs()) {
                ps.lower[j] = ps.upper[j];
            } else {
                ps.infeasible = true;
            }
        }
    }
    ps
}

struct Solver<'a> {
    opt: &'a SimplexOptions,
    m: usize,
    n: usize,
    ntot: usize,
    // structural columns (kept rows renumbered)
    col_start: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    /// Artificial columns: (row, sign). Column index `n + m + a`.
    art: Vec<(usize, f64)>,
    art_of_row: Vec<usize>,
    b: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<u8>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    d: Vec<f64>,
    weights: Vec<f64>,
    lu: LuFactor,
    etas: Vec<Eta>,
    work: Vec<f64>,
    iterations: usize,
    bland: bool,
    degenerate_run: usize,
}

impl<'a> Solver<'a> {
    fn build(p: &LpProblem, ps: &Presolved, opt: &'a SimplexOptions) -> Self {
        let n = p.n_cols();
        let m = ps.kept.len();
        let sigma = if p.sense == Sense::Minimize { 1.0 } else { -1.0 };
        let mut row_start = vec![0];
        let mut row_idx = Vec::new();
        let mut row_val = Vec::new();
        let mut counts = vec![0usize; n];
        let mut b = Vec::with_capacity(m);
        let mut lb = ps.lower.clone();
        let mut ub = ps.upper.clone();
        for &i in &ps.kept {
            for &(j, v) in p.row_entries(i) {
                row_idx.push(j);
                row_val.push(v);
                counts[j] += 1;
            }
            row_start.push(row_idx.len());
            let r = &p.rows()[i];
            b.push(r.rhs);
            let (l, u) = match r.sense {
                RowSense::Le => (0.0, f64::INFINITY),
                RowSense::Ge => (f64::NEG_INFINITY, 0.0),
                RowSense::Eq => (0.0, 0.0),
            };
            lb.push(l);
            ub.push(u);
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let mut fill = col_start.clone();
        let mut col_idx = vec![0; row_idx.len()];
        let mut col_val = vec![0.0; row_idx.len()];
        for r in 0..m {
            for k in row_start[r]..row_start[r + 1] {
                let j = row_idx[k];
                col_idx[fill[j]] = r;
                col_val[fill[j]] = row_val[k];
                fill[j] += 1;
            }
        }
        let mut cost: Vec<f64> = p.cols().iter().map(|c| sigma * c.obj).collect();
        cost.resize(n + m, 0.0);
        let ntot = n + m;
        Solver {
            opt,
            m,
            n,
            ntot,
            col_start,
            col_idx,
            col_val,
            row_start,
            row_idx,
            row_val,
            art: Vec::new(),
            art_of_row: vec![usize::MAX; m],
            b,
            lb,
            ub,
            cost,
            x: vec![0.0; ntot],
            state: vec![AT_LOWER; ntot],
            basis: Vec::new(),
            pos: vec![usize::MAX; ntot],
            d: vec![0.0; ntot],
            weights: vec![1.0; ntot],
            lu: LuFactor::default(),
            etas: Vec::new(),
            work: Vec::new(),
            iterations: 0,
            bland: opt.pricing == Pricing::Bland,
            degenerate_run: 0,
        }
    }

    /// Visit the entries of column `j` as (row, value).
    #[inline]
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                f(self.col_idx[k], self.col_val[k]);
            }
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            let (r, s) = self.art[j - self.n - self.m];
            f(r, s);
        }
    }

    fn col_vec(&self, j: usize) -> Vec<(usize, f64)> {
        let mut v = Vec::new();
        self.for_col(j, |i, a| v.push((i, a)));
        v
    }

    fn nonbasic_start(&self, j: usize) -> (f64, u8) {
        let (l, u) = (self.lb[j], self.ub[j]);
        if l == u {
            (l, FIXED)
        } else if l.is_finite() {
            (l, AT_LOWER)
        } else if u.is_finite() {
            (u, AT_UPPER)
        } else {
            (0.0, FREE)
        }
    }

    /// Slack basis, with an artificial for every row the logical cannot
    /// absorb.
    fn crash(&mut self) {
        for j in 0..self.n {
            let (v, s) = self.nonbasic_start(j);
            self.x[j] = v;
            self.state[j] = s;
        }
        let mut resid = self.b.clone();
        for j in 0..self.n {
            let xj = self.x[j];
            if xj != 0.0 {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    resid[self.col_idx[k]] -= self.col_val[k] * xj;
                }
            }
        }
        let tol = self.opt.tol;
        self.basis = Vec::with_capacity(self.m);
        for i in 0..self.m {
            let s = self.n + i;
            let v = resid[i];
            if v >= self.lb[s] - tol && v <= self.ub[s] + tol {
                self.x[s] = v;
                self.state[s] = BASIC;
                self.pos[s] = i;
                self.basis.push(s);
            } else {
                let bound = if v < self.lb[s] { self.lb[s] } else { self.ub[s] };
                self.x[s] = bound;
                self.state[s] = if self.lb[s] == self.ub[s] {
                    FIXED
                } else if bound == self.lb[s] {
                    AT_LOWER
                } else {
                    AT_UPPER
                };
                let r = v - bound;
                let a = self.ntot;
                self.art.push((i, r.signum()));
                self.art_of_row[i] = a;
                self.ntot += 1;
                self.lb.push(0.0);
                self.ub.push(f64::INFINITY);
                self.cost.push(0.0);
                self.x.push(r.abs());
                self.state.push(BASIC);
                self.pos.push(i);
                self.d.push(0.0);
                self.weights.push(1.0);
                self.basis.push(a);
            }
        }
    }

    fn refactor(&mut self) {
        loop {
            let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&j| self.col_vec(j)).collect();
            match LuFactor::factor(self.m, &cols, self.opt.pivot_tol * 1e-3) {
                Ok(lu) => {
                    self.lu = lu;
                    self.etas.clear();
                    return;
                }
                Err(Singular { cols, rows }) => {
                    log::debug!("singular basis: replacing {} columns", cols.len());
                    for (&p, &r) in cols.iter().zip(&rows) {
                        let old = self.basis[p];
                        let (v, s) = self.nonbasic_near(old);
                        self.x[old] = v;
                        self.state[old] = s;
                        self.pos[old] = usize::MAX;
                        let new = self.n + r;
                        self.basis[p] = new;
                        self.pos[new] = p;
                        self.state[new] = BASIC;
                    }
                }
            }
        }
    }

    fn nonbasic_near(&self, j: usize) -> (f64, u8) {
        let (l, u, v) = (self.lb[j], self.ub[j], self.x[j]);
        if l == u {
            (l, FIXED)
        } else if l.is_finite() && (!u.is_finite() || (v - l).abs() <= (u - v).abs()) {
            (l, AT_LOWER)
        } else if u.is_finite() {
            (u, AT_UPPER)
        } else {
            (0.0, FREE)
        }
    }

    fn ftran(&mut self, v: &mut [f64]) {
        self.lu.ftran(v, &mut self.work);
        for e in &self.etas {
            let xr = v[e.r] / e.pivot;
            v[e.r] = xr;
            if xr != 0.0 {
                for (&i, &a) in e.idx.iter().zip(&e.val) {
                    v[i] -= a * xr;
                }
            }
        }
    }

    fn btran(&mut self, v: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let mut s = v[e.r];
            for (&i, &a) in e.idx.iter().zip(&e.val) {
                s -= a * v[i];
            }
            v[e.r] = s / e.pivot;
        }
        self.lu.btran(v, &mut self.work);
    }

    /// Recompute basic values from the nonbasic ones.
    fn recompute_primal(&mut self) {
        let mut r = self.b.clone();
        for j in 0..self.ntot {
            if self.state[j] != BASIC && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_col(j, |i, a| r[i] -= a * xj);
            }
        }
        self.ftran(&mut r);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = r[p];
        }
    }

    /// Duals `y = B^-T c_B` for the given cost vector.
    fn duals(&mut self, cost: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        self.btran(&mut y);
        y
    }

    fn recompute_reduced_costs(&mut self, cost: &[f64]) {
        let y = self.duals(cost);
        for j in 0..self.ntot {
            if self.state[j] == BASIC {
                self.d[j] = 0.0;
            } else {
                let mut dj = cost[j];
                self.for_col(j, |i, a| dj -= a * y[i]);
                self.d[j] = dj;
            }
        }
    }

    fn price(&self) -> Option<(usize, f64)> {
        let tol = self.opt.tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        let devex = self.opt.pricing == Pricing::Devex;
        for j in 0..self.ntot {
            let s = self.state[j];
            if s == BASIC || s == FIXED {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -tol && (s == AT_LOWER || s == FREE) {
                1.0
            } else if dj > tol && (s == AT_UPPER || s == FREE) {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = if devex { dj * dj / self.weights[j] } else { dj.abs() };
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Returns (step, leaving position or None for a bound flip), or None
    /// when the step is unbounded.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64]) -> Option<(f64, Option<usize>)> {
        let tol = self.opt.tol;
        let ptol = self.opt.pivot_tol;
        let range = self.ub[q] - self.lb[q];
        if self.bland {
            let mut best = range;
            let mut leave: Option<usize> = None;
            for p in 0..self.m {
                let delta = -dir * alpha[p];
                if delta.abs() <= ptol {
                    continue;
                }
                let j = self.basis[p];
                let ratio = if delta < 0.0 {
                    if !self.lb[j].is_finite() {
                        continue;
                    }
                    (self.x[j] - self.lb[j]).max(0.0) / -delta
                } else {
                    if !self.ub[j].is_finite() {
                        continue;
                    }
                    (self.ub[j] - self.x[j]).max(0.0) / delta
                };
                let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs().min(1e12));
                let better = if ratio < best && !tie {
                    true
                } else if tie {
                    // equal ratios: smallest variable index leaves; a bound
                    // flip of the entering variable wins over a pivot
                    leave.map_or(!range.is_finite(), |lp| j < self.basis[lp])
                } else {
                    false
                };
                if better {
                    best = best.min(ratio);
                    leave = Some(p);
                }
            }
            return if best.is_finite() { Some((best, leave)) } else { None };
        }

        // Harris two-pass
        let mut theta_max = f64::INFINITY;
        for p in 0..self.m {
            let delta = -dir * alpha[p];
            if delta.abs() <= ptol {
                continue;
            }
            let j = self.basis[p];
            let r = if delta < 0.0 {
                if !self.lb[j].is_finite() {
                    continue;
                }
                (self.x[j] - self.lb[j] + tol) / -delta
            } else {
                if !self.ub[j].is_finite() {
                    continue;
                }
                (self.ub[j] - self.x[j] + tol) / delta
            };
            theta_max = theta_max.min(r);
        }
        if !theta_max.is_finite() && !range.is_finite() {
            return None;
        }
        if range <= theta_max {
            return Some((range, None));
        }
        let mut leave = None;
        let mut best_mag = 0.0;
        let mut step = 0.0;
        for p in 0..self.m {
            let delta = -dir * alpha[p];
            if delta.abs() <= ptol {
                continue;
            }
            let j = self.basis[p];
            let r = if delta < 0.0 {
                if !self.lb[j].is_finite() {
                    continue;
                }
                (self.x[j] - self.lb[j]) / -delta
            } else {
                if !self.ub[j].is_finite() {
                    continue;
                }
                (self.ub[j] - self.x[j]) / delta
            };
            if r <= theta_max && delta.abs() > best_mag {
                best_mag = delta.abs();
                leave = Some(p);
                step = r;
            }
        }
        Some((step.max(0.0), leave))
    }

    fn run(&mut self, cost: &[f64]) -> Phase {
        self.recompute_reduced_costs(cost);
        let mut alpha = vec![0.0; self.m];
        let mut rho = vec![0.0; self.m];
        let mut row_alpha = vec![0.0; self.ntot];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; self.ntot];
        self.bland = self.opt.pricing == Pricing::Bland;
        self.degenerate_run = 0;
        loop {
            if self.iterations >= self.opt.max_iter {
                return Phase::IterLimit;
            }
            if self.etas.len() >= self.opt.refactor_interval {
                self.refactor();
                self.recompute_primal();
                self.recompute_reduced_costs(cost);
            }
            let Some((q, dir)) = self.price() else {
                // confirm with fresh reduced costs before declaring optimality
                if !self.etas.is_empty() {
                    self.refactor();
                    self.recompute_primal();
                    self.recompute_reduced_costs(cost);
                    if self.price().is_some() {
                        continue;
                    }
                }
                return Phase::Optimal;
            };
            self.iterations += 1;

            alpha.iter_mut().for_each(|v| *v = 0.0);
            self.for_col(q, |i, a| alpha[i] = a);
            self.ftran(&mut alpha);

            let Some((theta, leave)) = self.ratio_test(q, dir, &alpha) else {
                return Phase::Unbounded;
            };

            let dq = self.d[q];
            if theta * dq.abs() > 1e-12 {
                self.degenerate_run = 0;
                if self.opt.pricing != Pricing::Bland {
                    self.bland = false;
                }
            } else {
                self.degenerate_run += 1;
                if self.degenerate_run > self.opt.stall_window {
                    self.bland = true;
                }
            }

            // primal update
            if theta != 0.0 {
                self.x[q] += dir * theta;
                for p in 0..self.m {
                    if alpha[p] != 0.0 {
                        let j = self.basis[p];
                        self.x[j] -= dir * theta * alpha[p];
                    }
                }
            }

            let Some(r) = leave else {
                // bound flip
                self.state[q] = if dir > 0.0 { AT_UPPER } else { AT_LOWER };
                self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                continue;
            };

            let leaving = self.basis[r];
            let delta = -dir * alpha[r];
            let (val, st) = if self.lb[leaving] == self.ub[leaving] {
                (self.lb[leaving], FIXED)
            } else if delta < 0.0 {
                (self.lb[leaving], AT_LOWER)
            } else {
                (self.ub[leaving], AT_UPPER)
            };

            // pivot row for reduced-cost and weight updates
            rho.iter_mut().for_each(|v| *v = 0.0);
            rho[r] = 1.0;
            self.btran(&mut rho);
            for &j in &touched {
                row_alpha[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
            for i in 0..self.m {
                let ri = rho[i];
                if ri.abs() <= 1e-13 {
                    continue;
                }
                for k in self.row_start[i]..self.row_start[i + 1] {
                    let j = self.row_idx[k];
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    row_alpha[j] += ri * self.row_val[k];
                }
                let s = self.n + i;
                if !mark[s] {
                    mark[s] = true;
                    touched.push(s);
                }
                row_alpha[s] += ri;
                let a = self.art_of_row[i];
                if a != usize::MAX {
                    if !mark[a] {
                        mark[a] = true;
                        touched.push(a);
                    }
                    row_alpha[a] += ri * self.art[a - self.n - self.m].1;
                }
            }
            let arq = alpha[r];
            let theta_d = dq / arq;
            let wq = self.weights[q].max(1.0);
            let devex = self.opt.pricing == Pricing::Devex;
            for &j in &touched {
                if self.state[j] == BASIC {
                    continue;
                }
                let a = row_alpha[j];
                if a != 0.0 {
                    self.d[j] -= theta_d * a;
                    if devex {
                        let ratio = a / arq;
                        self.weights[j] = self.weights[j].max(ratio * ratio * wq);
                    }
                }
            }
            self.d[q] = 0.0;
            self.d[leaving] = -theta_d;
            if devex {
                self.weights[leaving] = (wq / (arq * arq)).max(1.0);
            }

            // basis change
            self.x[leaving] = val;
            self.state[leaving] = st;
            self.pos[leaving] = usize::MAX;
            self.basis[r] = q;
            self.pos[q] = r;
            self.state[q] = BASIC;
            let mut idx = Vec::new();
            let mut vals = Vec::new();
            for (p, &a) in alpha.iter().enumerate() {
                if p != r && a.abs() > 1e-14 {
                    idx.push(p);
                    vals.push(a);
                }
            }
            self.etas.push(Eta {
                r,
                pivot: arq,
                idx,
                val: vals,
            });
        }
    }

    fn artificial_sum(&self) -> f64 {
        (self.n + self.m..self.ntot).map(|j| self.x[j].abs()).sum()
    }
}

fn solve(p: &LpProblem, opt: &SimplexOptions) -> LpSolution {
    let ps = presolve(p, opt.tol);
    if ps.infeasible {
        return LpSolution::empty(LpStatus::Infeasible, p, 0);
    }
    let mut s = Solver::build(p, &ps, opt);
    s.crash();
    s.refactor();
    s.recompute_primal();

    if !s.art.is_empty() {
        let mut c1 = vec![0.0; s.ntot];
        for j in s.n + s.m..s.ntot {
            c1[j] = 1.0;
        }
        match s.run(&c1) {
            Phase::IterLimit => return LpSolution::empty(LpStatus::Stalled, p, s.iterations),
            Phase::Unbounded => unreachable!("phase 1 objective is bounded below"),
            Phase::Optimal => {}
        }
        let scale = 1.0 + s.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s.artificial_sum() > opt.tol * scale * 10.0 {
            return LpSolution::empty(LpStatus::Infeasible, p, s.iterations);
        }
        for j in s.n + s.m..s.ntot {
            s.ub[j] = 0.0;
            if s.state[j] != BASIC {
                s.x[j] = 0.0;
                s.state[j] = FIXED;
            }
        }
    }
    let cost = s.cost.clone();
    match s.run(&cost) {
        Phase::IterLimit => return LpSolution::empty(LpStatus::Stalled, p, s.iterations),
        Phase::Unbounded => return LpSolution::empty(LpStatus::Unbounded, p, s.iterations),
        Phase::Optimal => {}
    }
    extract(p, &ps, &mut s)
}

fn extract(p: &LpProblem, ps: &Presolved, s: &mut Solver) -> LpSolution {
    let sigma = if p.sense == Sense::Minimize { 1.0 } else { -1.0 };
    let cost = s.cost.clone();
    let y = s.duals(&cost);
    let n = s.n;
    let mut x: Vec<f64> = s.x[..n].to_vec();
    // snap nonbasic values exactly onto their bounds
    for j in 0..n {
        match s.state[j] {
            AT_LOWER | FIXED => x[j] = s.lb[j],
            AT_UPPER => x[j] = s.ub[j],
            _ => {}
        }
    }
    let mut duals = vec![0.0; p.n_rows()];
    for (r, &i) in ps.kept.iter().enumerate() {
        duals[i] = y[r];
    }
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = cost[j];
        s.for_col(j, |i, a| dj -= a * y[i]);
        d[j] = dj;
    }
    // hand bound multipliers back to the folded singleton rows
    for j in 0..n {
        if s.state[j] == BASIC {
            continue;
        }
        let src = if d[j] > 0.0 && x[j] == s.lb[j] {
            ps.lower_src[j]
        } else if d[j] < 0.0 && x[j] == s.ub[j] {
            ps.upper_src[j]
        } else {
            None
        };
        if let Some(BoundSource { row, coef }) = src {
            duals[row] = d[j] / coef;
            d[j] = 0.0;
        }
    }
    for v in duals.iter_mut() {
        *v *= sigma;
    }
    for v in d.iter_mut() {
        *v *= sigma;
    }
    let objective = p.objective_value(&x);
    LpSolution {
        status: LpStatus::Optimal,
        x,
        duals,
        reduced_costs: d,
        objective,
        iterations: s.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{kkt_report, solve_lp, Tag};
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn single_ge_row() {
        // min x s.t. x >= 1; folded into a bound by presolve
        let mut p = LpProblem::new("t", Sense::Minimize);
        let x = p.add_col(Tag::scalar("x", 0), 1.0, 0.0, INF).unwrap();
        p.add_row(Tag::scalar("r", 0), &[(x, 1.0)], RowSense::Ge, 1.0).unwrap();
        let s = solve_lp(&p, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.x, vec![1.0]);
        assert_eq!(s.objective, 1.0);
        assert_eq!(s.duals, vec![1.0]);
        assert!(kkt_report(&p, &s).passes(1e-9));
    }

    #[test]
    fn max_with_binding_row() {
        let mut p = LpProblem::new("t", Sense::Maximize);
        let x = p.add_col(Tag::scalar("x", 0), 1.0, 0.0, INF).unwrap();
        let y = p.add_col(Tag::scalar("x", 1), 1.0, 0.0, INF).unwrap();
        p.add_row(Tag::scalar("r", 0), &[(x, 1.0), (y, 1.0)], RowSense::Le, 1.0).unwrap();
        let s = solve_lp(&p, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
        assert!(kkt_report(&p, &s).passes(1e-9));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = LpProblem::new("inf", Sense::Minimize);
        let x = p.add_col(Tag::scalar("x", 0), 1.0, 0.0, INF).unwrap();
        p.add_row(Tag::scalar("r", 0), &[(x, 1.0)], RowSense::Le, -1.0).unwrap();
        assert_eq!(solve_lp(&p, 1e-9).unwrap().status, LpStatus::Infeasible);

        let mut p = LpProblem::new("inf2", Sense::Minimize);
        let x = p.add_col(Tag::scalar("x", 0), 0.0, 0.0, INF).unwrap();
        let y = p.add_col(Tag::scalar("x", 1), 0.0, 0.0, INF).unwrap();
        p.add_row(Tag::scalar("r", 0), &[(x, 1.0), (y, 1.0)], RowSense::Eq, -1.0).unwrap();
        assert_eq!(solve_lp(&p, 1e-9).unwrap().status, LpStatus::Infeasible);

        let mut p = LpProblem::new("unb", Sense::Maximize);
        let x = p.add_col(Tag::scalar("x", 0), 1.0, 0.0, INF).unwrap();
        let y = p.add_col(Tag::scalar("x", 1), 0.0, 0.0, INF).unwrap();
        p.add_row(Tag::scalar("r", 0), &[(x, 1.0), (y, -1.0)], RowSense::Le, 1.0).unwrap();
        assert_eq!(solve_lp(&p, 1e-9).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn iteration_limit_reports_stalled() {
        let mut p = LpProblem::new("s", Sense::Maximize);
        let x = p.add_col(Tag::scalar("x", 0), 1.0, 0.0, INF).unwrap();
        let y = p.add_col(Tag::scalar("x", 1), 2.0, 0.0, INF).unwrap();
        p.add_row(Tag::scalar("r", 0), &[(x, 1.0), (y, 1.0)], RowSense::Le, 4.0).unwrap();
        p.add_row(Tag::scalar("r", 1), &[(x, 1.0), (y, 3.0)], RowSense::Le, 6.0).unwrap();
        let mut opt = SimplexOptions::with_tol(1e-9);
        opt.max_iter = 1;
        let s = RevisedSimplex::new(opt).solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Stalled);
    }
}
