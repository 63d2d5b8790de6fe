//! Cost determination: the relaxed LP pair whose duals give candidate
//! queueing delays, earliest travel times and trip costs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{CostPattern, FlowPattern, Instance};
use crate::lp::{LpProblem, LpSolution, LpSolver, RowSense, Sense, Tag};
use crate::options::SolveOptions;
use crate::timegrid::SeriesSet;

pub const Q: &str = "q";
pub const Y: &str = "y";
pub const W: &str = "w";
pub const PI: &str = "pi";
pub const RHO: &str = "rho";
pub const DEMAND: &str = "demand";
pub const CONSERVATION: &str = "conservation";
pub const CAPACITY: &str = "capacity";
pub const DEPARTURE: &str = "departure";
pub const ROUTE: &str = "route";

const INF: f64 = f64::INFINITY;

/// Column layout shared by every LP over `(q, y)`.
pub(crate) struct FlowColumns {
    pub q0: usize,
    pub y0: usize,
    pub k: usize,
}

impl FlowColumns {
    #[inline]
    pub fn q(&self, i: usize, k: usize) -> usize {
        self.q0 + i * self.k + k
    }

    #[inline]
    pub fn y(&self, l: usize, k: usize) -> usize {
        self.y0 + l * self.k + k
    }
}

/// Variables, objective, demand rows and conservation rows of an LP over
/// `(q, y)`; the caller adds its own per-link bound rows. The last grid
/// step has zero quadrature weight and its flows are fixed at zero.
pub(crate) fn flow_lp_skeleton(inst: &Instance, name: &str) -> Result<(LpProblem, FlowColumns)> {
    let g = &inst.grid;
    let (n, l, k) = (inst.n_origins(), inst.n_links(), g.k);
    let mut p = LpProblem::new(name, Sense::Minimize);
    let cols = FlowColumns { q0: 0, y0: n * k, k };
    for i in 0..n {
        for t in 0..k {
            let h = g.weight(t);
            let ub = if h > 0.0 { INF } else { 0.0 };
            p.add_col(Tag::at(Q, i, t), h * inst.s[t], 0.0, ub)?;
        }
    }
    for (li, link) in inst.network.links.iter().enumerate() {
        for t in 0..k {
            let h = g.weight(t);
            let ub = if h > 0.0 { INF } else { 0.0 };
            p.add_col(Tag::at(Y, li, t), h * link.free_flow_time, 0.0, ub)?;
        }
        debug_assert_eq!(cols.y(li, 0), li * k + n * k);
    }
    let _ = l;
    for i in 0..n {
        let coeffs: Vec<(usize, f64)> = (0..k).map(|t| (cols.q(i, t), g.weight(t))).collect();
        p.add_row(Tag::scalar(DEMAND, i), &coeffs, RowSense::Eq, inst.network.demand[i])?;
    }
    // rows scaled by dt so their duals read directly as pi
    let dt = g.dt;
    for i in 0..n {
        for t in 0..k {
            let mut coeffs = Vec::with_capacity(inst.out_links[i].len() + inst.in_links[i].len() + 1);
            for &li in &inst.out_links[i] {
                coeffs.push((cols.y(li, t), dt));
            }
            for &li in &inst.in_links[i] {
                coeffs.push((cols.y(li, t), -dt));
            }
            coeffs.push((cols.q(i, t), -dt));
            p.add_row(Tag::at(CONSERVATION, i, t), &coeffs, RowSense::Eq, 0.0)?;
        }
    }
    Ok((p, cols))
}

/// Relaxed primal: schedule plus free-flow cost subject to demand,
/// conservation and `y <= mu`.
pub fn build_cost_primal(inst: &Instance) -> Result<LpProblem> {
    let (mut p, cols) = flow_lp_skeleton(inst, "cost-primal")?;
    let dt = inst.grid.dt;
    for (li, link) in inst.network.links.iter().enumerate() {
        for t in 0..inst.k() {
            p.add_row(Tag::at(CAPACITY, li, t), &[(cols.y(li, t), dt)], RowSense::Le, dt * link.capacity)?;
        }
    }
    Ok(p)
}

pub(crate) struct DualColumns {
    pub w0: usize,
    pub pi0: usize,
    pub rho0: usize,
    pub k: usize,
}

impl DualColumns {
    #[inline]
    pub fn w(&self, l: usize, k: usize) -> usize {
        self.w0 + l * self.k + k
    }

    #[inline]
    pub fn pi(&self, i: usize, k: usize) -> usize {
        self.pi0 + i * self.k + k
    }
}

/// Relaxed dual: maximize `Q^T rho - sum mu w` over `(w, pi, rho) >= 0`
/// with departure rows `pi + s - rho >= 0` and route rows
/// `w - A^T pi + c >= 0`.
pub fn build_cost_dual(inst: &Instance) -> Result<LpProblem> {
    let g = &inst.grid;
    let (n, l, k) = (inst.n_origins(), inst.n_links(), g.k);
    let mut p = LpProblem::new("cost-dual", Sense::Maximize);
    let cols = DualColumns {
        w0: 0,
        pi0: l * k,
        rho0: l * k + n * k,
        k,
    };
    for (li, link) in inst.network.links.iter().enumerate() {
        for t in 0..k {
            p.add_col(Tag::at(W, li, t), -g.weight(t) * link.capacity, 0.0, INF)?;
        }
    }
    for i in 0..n {
        for t in 0..k {
            p.add_col(Tag::at(PI, i, t), 0.0, 0.0, INF)?;
        }
    }
    for i in 0..n {
        p.add_col(Tag::scalar(RHO, i), inst.network.demand[i], 0.0, INF)?;
    }
    for i in 0..n {
        for t in 0..k {
            p.add_row(
                Tag::at(DEPARTURE, i, t),
                &[(cols.pi(i, t), 1.0), (cols.rho0 + i, -1.0)],
                RowSense::Ge,
                -inst.s[t],
            )?;
        }
    }
    for (li, link) in inst.network.links.iter().enumerate() {
        for t in 0..k {
            let mut coeffs = vec![(cols.w(li, t), 1.0)];
            if inst.network.is_origin(link.tail) {
                coeffs.push((cols.pi(link.tail, t), -1.0));
            }
            if inst.network.is_origin(link.head) {
                coeffs.push((cols.pi(link.head, t), 1.0));
            }
            p.add_row(Tag::at(ROUTE, li, t), &coeffs, RowSense::Ge, -link.free_flow_time)?;
        }
    }
    Ok(p)
}

/// Shortest remaining travel time to the destination at every step with
/// link costs `c + w`.
pub fn earliest_travel_times(inst: &Instance, w: &SeriesSet) -> SeriesSet {
    let net = &inst.network;
    let (n, k) = (net.n_origins(), inst.k());
    let dest = net.destination();
    let mut pi = SeriesSet::zeros(n, k);
    let mut dist = vec![INF; n + 1];
    let mut done = vec![false; n + 1];
    for t in 0..k {
        dist.iter_mut().for_each(|d| *d = INF);
        done.iter_mut().for_each(|d| *d = false);
        dist[dest] = 0.0;
        for _ in 0..=n {
            let mut v = usize::MAX;
            let mut best = INF;
            for u in 0..=n {
                if !done[u] && dist[u] < best {
                    best = dist[u];
                    v = u;
                }
            }
            if v == usize::MAX {
                break;
            }
            done[v] = true;
            for &li in &inst.in_links[v] {
                let link = &net.links[li];
                let cand = best + link.free_flow_time + w.get(li, t);
                if cand < dist[link.tail] {
                    dist[link.tail] = cand;
                }
            }
        }
        for i in 0..n {
            pi.set(i, t, dist[i]);
        }
    }
    pi
}

#[derive(Debug, Clone, Serialize)]
pub struct CostStep {
    /// Authoritative pattern from the dual LP, with `pi` replaced by the
    /// earliest travel times under `c + w`.
    pub cost: CostPattern,
    /// Primal flows of the relaxed problem.
    pub flow: FlowPattern,
    /// Pattern read from the primal LP's row duals.
    pub primal_duals: CostPattern,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    /// Largest difference between `w` read from the primal duals and `w`
    /// from the dual LP; nonzero values signal a non-unique dual optimum.
    pub dual_degeneracy: f64,
    pub primal_iterations: usize,
    pub dual_iterations: usize,
    /// Queues or departures within five steps of either window end.
    pub boundary_warning: bool,
}

fn check_status(stage: &'static str, s: &LpSolution) -> Result<()> {
    if s.is_optimal() {
        Ok(())
    } else {
        Err(Error::Solve {
            stage,
            status: s.status.to_string(),
        })
    }
}

pub(crate) fn read_flows(inst: &Instance, cols: &FlowColumns, x: &[f64]) -> FlowPattern {
    let mut f = FlowPattern::zeros(inst);
    for i in 0..inst.n_origins() {
        for t in 0..inst.k() {
            f.q.set(i, t, x[cols.q(i, t)].max(0.0));
        }
    }
    for l in 0..inst.n_links() {
        for t in 0..inst.k() {
            f.y.set(l, t, x[cols.y(l, t)].max(0.0));
        }
    }
    f
}

/// Pattern carried by the row duals of the relaxed primal. The same
/// reading applies to the system-optimum LP, where `w` is the price.
pub(crate) fn pattern_from_primal(inst: &Instance, p: &LpProblem, sol: &LpSolution) -> CostPattern {
    let mut c = CostPattern::zeros(inst);
    for i in 0..inst.n_origins() {
        c.rho[i] = sol.dual(p, &Tag::scalar(DEMAND, i)).unwrap_or(0.0);
        for t in 0..inst.k() {
            c.pi.set(i, t, sol.dual(p, &Tag::at(CONSERVATION, i, t)).unwrap_or(0.0));
        }
    }
    for l in 0..inst.n_links() {
        for t in 0..inst.k() {
            let v = -sol.dual(p, &Tag::at(CAPACITY, l, t)).unwrap_or(0.0);
            c.w.set(l, t, v.max(0.0));
        }
    }
    hold_terminal(&mut c.w);
    c
}

/// The last step carries no weight, so the LPs leave `w` there free.
/// Repeating the previous value keeps the pattern optimal and makes
/// `w` and `pi` flat across the final step.
pub(crate) fn hold_terminal(w: &mut SeriesSet) {
    let k = w.k;
    if k < 2 {
        return;
    }
    for e in 0..w.entities() {
        let r = w.row_mut(e);
        r[k - 1] = r[k - 2];
    }
}

pub(crate) fn boundary_activity(inst: &Instance, series: &[&SeriesSet], thr: f64) -> bool {
    let k = inst.k();
    let edge = 5.min(k);
    series.iter().any(|s| {
        (0..s.entities()).any(|e| {
            let r = s.row(e);
            r[..edge].iter().chain(&r[k - edge..k - 1]).any(|&v| v > thr)
        })
    })
}

pub fn solve_cost_step(inst: &Instance, solver: &dyn LpSolver, opts: &SolveOptions) -> Result<CostStep> {
    let primal = build_cost_primal(inst)?;
    let dual = build_cost_dual(inst)?;
    let (ps, ds) = rayon::join(|| solver.solve(&primal), || solver.solve(&dual));
    let (ps, ds) = (ps?, ds?);
    check_status("cost-primal", &ps)?;
    check_status("cost-dual", &ds)?;

    let (n, l, k) = (inst.n_origins(), inst.n_links(), inst.k());
    let cols = FlowColumns { q0: 0, y0: n * k, k };
    let flow = read_flows(inst, &cols, &ps.x);
    let dcols = DualColumns {
        w0: 0,
        pi0: l * k,
        rho0: l * k + n * k,
        k,
    };
    let mut w = SeriesSet::zeros(l, k);
    for li in 0..l {
        for t in 0..k {
            w.set(li, t, ds.x[dcols.w(li, t)].max(0.0));
        }
    }
    hold_terminal(&mut w);
    let rho: Vec<f64> = (0..n).map(|i| ds.x[dcols.rho0 + i].max(0.0)).collect();
    let pi = earliest_travel_times(inst, &w);
    let mut primal_duals = pattern_from_primal(inst, &primal, &ps);
    primal_duals.pi = earliest_travel_times(inst, &primal_duals.w);

    let dual_degeneracy = w.max_abs_diff(&primal_duals.w);
    if dual_degeneracy > opts.support() {
        log::info!("cost step: primal and dual LP disagree on w by {dual_degeneracy:.3e}");
    }
    let thr = opts.support();
    let boundary_warning = boundary_activity(inst, &[&w, &flow.q], thr);
    if boundary_warning {
        log::warn!("queues or departures near the window ends; widen the window");
    }
    Ok(CostStep {
        cost: CostPattern { w, pi, rho },
        flow,
        primal_duals,
        primal_objective: ps.objective,
        dual_objective: ds.objective,
        duality_gap: (ps.objective - ds.objective).abs(),
        dual_degeneracy,
        primal_iterations: ps.iterations,
        dual_iterations: ds.iterations,
        boundary_warning,
    })
}

/// Complementarity `|min(a, b)|` of a pair that must satisfy `a, b >= 0`,
/// `a b = 0`.
#[inline]
pub fn perp(a: f64, b: f64) -> f64 {
    a.min(b).abs()
}

/// Residuals of the cost-step optimality conditions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CostKkt {
    pub demand: f64,
    pub conservation: f64,
    /// `(mu - y) perp w`
    pub capacity: f64,
    /// `(pi + s - rho) perp q`
    pub departure: f64,
    /// `(w - A^T pi + c) perp y`
    pub route: f64,
}

impl CostKkt {
    pub fn max(&self) -> f64 {
        [self.demand, self.conservation, self.capacity, self.departure, self.route]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn check_cost_kkt(cost: &CostPattern, flow: &FlowPattern, inst: &Instance) -> CostKkt {
    let net = &inst.network;
    let g = &inst.grid;
    let mut r = CostKkt::default();
    for i in 0..net.n_origins() {
        r.demand = r.demand.max((flow.q.integrate(g, i) - net.demand[i]).abs());
    }
    for t in 0..g.k {
        for i in 0..net.n_origins() {
            let mut bal = -flow.q.get(i, t);
            for &l in &inst.out_links[i] {
                bal += flow.y.get(l, t);
            }
            for &l in &inst.in_links[i] {
                bal -= flow.y.get(l, t);
            }
            r.conservation = r.conservation.max(bal.abs());
            let sigma = cost.pi.get(i, t) + inst.s[t] - cost.rho[i];
            r.departure = r.departure.max(perp(sigma, flow.q.get(i, t)));
        }
        for (l, link) in net.links.iter().enumerate() {
            r.capacity = r.capacity.max(perp(link.capacity - flow.y.get(l, t), cost.w.get(l, t)));
            let lam = cost.w.get(l, t) - inst.pi_at(&cost.pi, link.tail, t) + inst.pi_at(&cost.pi, link.head, t)
                + link.free_flow_time;
            r.route = r.route.max(perp(lam, flow.y.get(l, t)));
        }
    }
    r
}
