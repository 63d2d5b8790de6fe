//! Dynamic system optimum, its queue-eliminating prices, and the
//! comparisons against the user equilibrium.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cost_step::{build_cost_primal, check_cost_kkt, earliest_travel_times, pattern_from_primal, read_flows, CostKkt, FlowColumns};
use crate::cost_step::solve_cost_step;
use crate::error::{Error, Result};
use crate::flow_step::{check_sufficient_condition, Margin};
use crate::instance::{CostPattern, FlowPattern, Instance};
use crate::lp::LpSolver;
use crate::network::ScalingMode;
use crate::options::SolveOptions;
use crate::timegrid::SeriesSet;
use crate::verify::DueSolution;

#[derive(Debug, Clone, Serialize)]
pub struct DsoSolution {
    pub flow: FlowPattern,
    /// Capacity-row prices per link.
    pub pricing: SeriesSet,
    /// Earliest travel times under `c + p`.
    pub pi_star: SeriesSet,
    pub rho_star: Vec<f64>,
    /// Total schedule plus free-flow cost; tolls excluded.
    pub objective: f64,
    pub iterations: usize,
    pub kkt: CostKkt,
}

impl DsoSolution {
    pub fn as_pattern(&self) -> CostPattern {
        CostPattern {
            w: self.pricing.clone(),
            pi: self.pi_star.clone(),
            rho: self.rho_star.clone(),
        }
    }
}

/// Minimizes total cost with link flows capped at capacity. The LP is the
/// relaxed cost-determination primal; prices are its capacity duals.
pub fn solve_dso(inst: &Instance, solver: &dyn LpSolver) -> Result<DsoSolution> {
    let mut p = build_cost_primal(inst)?;
    p.name = "dso".into();
    let sol = solver.solve(&p)?;
    if !sol.is_optimal() {
        return Err(Error::Solve {
            stage: "dso",
            status: sol.status.to_string(),
        });
    }
    let k = inst.k();
    let cols = FlowColumns {
        q0: 0,
        y0: inst.n_origins() * k,
        k,
    };
    let flow = read_flows(inst, &cols, &sol.x);
    let mut pat = pattern_from_primal(inst, &p, &sol);
    pat.pi = earliest_travel_times(inst, &pat.w);
    let kkt = check_cost_kkt(&pat, &flow, inst);
    Ok(DsoSolution {
        flow,
        pricing: pat.w,
        pi_star: pat.pi,
        rho_star: pat.rho,
        objective: sol.objective,
        iterations: sol.iterations,
        kkt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeCheck {
    pub holds: bool,
    /// First `(node id, step)` with two loaded outgoing links.
    pub witness: Option<(u64, usize)>,
}

/// Sufficient test for unique node-passing times: at every step, each
/// node sends the system-optimal flow along at most one link.
pub fn check_tree_assumption(dso: &DsoSolution, inst: &Instance, threshold: f64) -> TreeCheck {
    for t in 0..inst.k() {
        for i in 0..inst.n_origins() {
            let loaded = inst.out_links[i].iter().filter(|&&l| dso.flow.y.get(l, t) > threshold).count();
            if loaded > 1 {
                return TreeCheck {
                    holds: false,
                    witness: Some((inst.network.node_ids[i], t)),
                };
            }
        }
    }
    TreeCheck { holds: true, witness: None }
}

#[derive(Debug, Clone, Serialize)]
pub struct DsoComparison {
    pub applicable: bool,
    pub note: Option<String>,
    /// `max |p - w|`
    pub pricing_deviation: f64,
    pub pi_deviation: f64,
    pub rho_deviation: f64,
    pub tree: TreeCheck,
}

pub fn compare_dso_due(dso: &DsoSolution, due: &DueSolution, gqrp_holds: bool, inst: &Instance, opts: &SolveOptions) -> DsoComparison {
    let pricing_deviation = dso.pricing.max_abs_diff(&due.cost.w);
    let pi_deviation = dso.pi_star.max_abs_diff(&due.cost.pi);
    let rho_deviation = dso
        .rho_star
        .iter()
        .zip(&due.cost.rho)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let tree = check_tree_assumption(dso, inst, opts.support());
    let note = if !gqrp_holds {
        Some("not applicable: GQRP does not hold".to_string())
    } else if !tree.holds {
        Some("system-optimal flow is not a tree at every step; equality not guaranteed".to_string())
    } else {
        None
    };
    DsoComparison {
        applicable: gqrp_holds,
        note,
        pricing_deviation,
        pi_deviation,
        rho_deviation,
        tree,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OriginCost {
    pub origin: u64,
    pub due: f64,
    pub dso: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParetoReport {
    /// `sum h w y` over links and steps in the equilibrium.
    pub due_queue_cost: f64,
    /// `sum h p y*` under system-optimal pricing.
    pub toll_revenue: f64,
    pub per_origin: Vec<OriginCost>,
    /// Revenue collected by the manager; queues yield nothing.
    pub manager_benefit: f64,
    pub due_total_cost: f64,
    /// Schedule plus free-flow cost at the system optimum.
    pub dso_total_cost: f64,
}

impl ParetoReport {
    pub fn revenue_gap(&self) -> f64 {
        (self.toll_revenue - self.due_queue_cost).abs() / self.due_queue_cost.abs().max(1e-12)
    }

    pub fn max_rho_gap(&self) -> f64 {
        self.per_origin.iter().map(|o| (o.due - o.dso).abs()).fold(0.0, f64::max)
    }
}

pub fn pareto_report(dso: &DsoSolution, due: &DueSolution, inst: &Instance) -> ParetoReport {
    let g = &inst.grid;
    let mut due_queue_cost = 0.0;
    let mut toll_revenue = 0.0;
    for l in 0..inst.n_links() {
        for t in 0..g.k {
            let h = g.weight(t);
            due_queue_cost += h * due.cost.w.get(l, t) * due.flow.y.get(l, t);
            toll_revenue += h * dso.pricing.get(l, t) * dso.flow.y.get(l, t);
        }
    }
    let per_origin = (0..inst.n_origins())
        .map(|i| OriginCost {
            origin: inst.network.node_ids[i],
            due: due.cost.rho[i],
            dso: dso.rho_star[i],
        })
        .collect();
    let due_total_cost = inst.network.demand.iter().zip(&due.cost.rho).map(|(q, r)| q * r).sum();
    ParetoReport {
        due_queue_cost,
        toll_revenue,
        per_origin,
        manager_benefit: toll_revenue,
        due_total_cost,
        dso_total_cost: dso.objective,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaEval {
    pub kappa: f64,
    pub holds: bool,
    pub worst: Option<Margin>,
    /// Every evaluated `(origin, step)` margin.
    #[serde(skip)]
    pub margins: Vec<Margin>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaSearch {
    pub kappa_star: Option<f64>,
    pub mode: ScalingMode,
    /// Grid evaluations in grid order, then bisection probes.
    pub evaluations: Vec<KappaEval>,
    pub refinements: Vec<KappaEval>,
    /// Cells whose margin fell between consecutive grid values.
    pub decreasing_cells: usize,
}

impl KappaSearch {
    /// Cells whose margin drops between consecutive grid values, compared
    /// per `(origin, step)` where both cost-step flows are active. The
    /// worst margin itself can move between cells because the cost-step
    /// flow is not unique.
    pub fn margin_decreases(&self, tol: f64) -> Vec<(f64, Margin, f64)> {
        let mut out = Vec::new();
        for pair in self.evaluations.windows(2) {
            let before: BTreeMap<(usize, usize), f64> =
                pair[0].margins.iter().map(|m| ((m.origin, m.step), m.margin)).collect();
            for m in &pair[1].margins {
                if let Some(&b) = before.get(&(m.origin, m.step)) {
                    if m.margin < b - tol {
                        out.push((pair[1].kappa, *m, b));
                    }
                }
            }
        }
        out
    }

    pub fn margins_monotone(&self, tol: f64) -> bool {
        self.margin_decreases(tol).is_empty()
    }
}

fn eval_kappa(inst: &Instance, kappa: f64, mode: ScalingMode, solver: &dyn LpSolver, opts: &SolveOptions) -> Result<KappaEval> {
    let scaled = inst.with_schedule(inst.sc.scaled(kappa, mode))?;
    let step = solve_cost_step(&scaled, solver, opts)?;
    let chk = check_sufficient_condition(&scaled, &step.flow, &step.cost, opts);
    Ok(KappaEval {
        kappa,
        holds: chk.holds,
        worst: chk.worst,
        margins: chk.margins,
    })
}

/// Largest `kappa` on the grid (descending, in `(0, 1]`) at which the
/// sufficient condition holds, refined by bisection against the grid
/// value just above it.
pub fn kappa_search(
    inst: &Instance,
    kappa_grid: &[f64],
    mode: ScalingMode,
    bisection_steps: usize,
    solver: &dyn LpSolver,
    opts: &SolveOptions,
) -> Result<KappaSearch> {
    if kappa_grid.iter().any(|&k| !(k > 0.0 && k <= 1.0)) || kappa_grid.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::Schedule("kappa grid must be strictly descending within (0, 1]".into()));
    }
    let evaluations = kappa_grid
        .par_iter()
        .map(|&k| eval_kappa(inst, k, mode, solver, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut refinements = Vec::new();
    let first = evaluations.iter().position(|e| e.holds);
    let kappa_star = match first {
        None => None,
        Some(0) => Some(evaluations[0].kappa),
        Some(p) => {
            let (mut fail, mut pass) = (evaluations[p - 1].kappa, evaluations[p].kappa);
            for _ in 0..bisection_steps {
                let mid = 0.5 * (fail + pass);
                let e = eval_kappa(inst, mid, mode, solver, opts)?;
                if e.holds {
                    pass = mid;
                } else {
                    fail = mid;
                }
                refinements.push(e);
            }
            Some(pass)
        }
    };
    let mut res = KappaSearch {
        kappa_star,
        mode,
        evaluations,
        refinements,
        decreasing_cells: 0,
    };
    res.decreasing_cells = res.margin_decreases(opts.support()).len();
    Ok(res)
}
