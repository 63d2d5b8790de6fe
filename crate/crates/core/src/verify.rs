//! Independent check of a full solution `(q, y, w, pi, rho)` against the
//! six equilibrium conditions, the quadratic gap objective, and cumulative
//! curve reconstruction in physical time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{CostPattern, FlowPattern, Instance};
use crate::timegrid::diff_slice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Constructive,
    Numeric,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DueSolution {
    pub cost: CostPattern,
    pub flow: FlowPattern,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Offender {
    pub entity: usize,
    pub step: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionResidual {
    pub max: f64,
    pub l1: f64,
    pub worst: Option<Offender>,
    pub pass: bool,
}

#[derive(Default)]
struct Acc {
    max: f64,
    l1: f64,
    worst: Option<Offender>,
}

impl Acc {
    fn push(&mut self, v: f64, entity: usize, step: Option<usize>) {
        let v = v.abs();
        self.l1 += v;
        if v > self.max {
            self.max = v;
            self.worst = Some(Offender { entity, step });
        }
    }

    fn finish(self, tol: f64) -> ConditionResidual {
        ConditionResidual {
            max: self.max,
            l1: self.l1,
            worst: self.worst,
            pass: self.max <= tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub tol: f64,
    pub demand: ConditionResidual,
    pub flow_conservation: ConditionResidual,
    pub queueing: ConditionResidual,
    pub consistency: ConditionResidual,
    pub route_choice: ConditionResidual,
    pub departure_choice: ConditionResidual,
}

impl ResidualReport {
    pub fn conditions(&self) -> [(&'static str, &ConditionResidual); 6] {
        [
            ("demand", &self.demand),
            ("flow_conservation", &self.flow_conservation),
            ("queueing", &self.queueing),
            ("consistency", &self.consistency),
            ("route_choice", &self.route_choice),
            ("departure_choice", &self.departure_choice),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.conditions().iter().all(|(_, c)| c.pass)
    }

    pub fn max(&self) -> f64 {
        self.conditions().iter().map(|(_, c)| c.max).fold(0.0, f64::max)
    }
}

#[inline]
fn perp(a: f64, b: f64) -> f64 {
    a.min(b)
}

/// Derivatives of `pi` per node, destination last and zero.
fn node_pi_dot(inst: &Instance, cost: &CostPattern) -> Vec<Vec<f64>> {
    let g = &inst.grid;
    let mut v: Vec<Vec<f64>> = (0..inst.n_origins()).map(|i| diff_slice(cost.pi.row(i), g.dt, g.scheme)).collect();
    v.push(vec![0.0; g.k]);
    v
}

fn node_pi(inst: &Instance, cost: &CostPattern, node: usize, t: usize) -> f64 {
    if node < inst.n_origins() {
        cost.pi.get(node, t)
    } else {
        0.0
    }
}

pub fn due_residuals(sol: &DueSolution, inst: &Instance, tol: f64) -> ResidualReport {
    let net = &inst.network;
    let g = &inst.grid;
    let (cost, flow) = (&sol.cost, &sol.flow);
    let (n, k) = (net.n_origins(), g.k);
    let pd = node_pi_dot(inst, cost);

    let mut demand = Acc::default();
    let mut cons = Acc::default();
    let mut queue = Acc::default();
    let mut consist = Acc::default();
    let mut route = Acc::default();
    let mut dep = Acc::default();

    for i in 0..n {
        let total: f64 = (0..k).map(|t| g.weight(t) * flow.q.get(i, t)).sum();
        demand.push(total - net.demand[i], i, None);
        for t in 0..k {
            let mut bal = -flow.q.get(i, t);
            for (li, link) in net.links.iter().enumerate() {
                if link.tail == i {
                    bal += flow.y.get(li, t);
                } else if link.head == i {
                    bal -= flow.y.get(li, t);
                }
            }
            cons.push(bal, i, Some(t));
            consist.push((pd[i][t] - 1.0).max(0.0), i, Some(t));
            let sigma = cost.pi.get(i, t) + inst.s[t] - cost.rho[i];
            dep.push(perp(sigma, flow.q.get(i, t)), i, Some(t));
        }
    }
    for (li, link) in net.links.iter().enumerate() {
        let w = cost.w.row(li);
        let wd = diff_slice(w, g.dt, g.scheme);
        for t in 0..k {
            let y = flow.y.get(li, t);
            let service = link.capacity * (wd[t] - pd[link.tail][t] + 1.0) - y;
            queue.push(perp(service, w[t]), li, Some(t));
            let lam = w[t] - node_pi(inst, cost, link.tail, t) + node_pi(inst, cost, link.head, t) + link.free_flow_time;
            route.push(perp(lam, y), li, Some(t));
        }
    }
    ResidualReport {
        tol,
        demand: demand.finish(tol),
        flow_conservation: cons.finish(tol),
        queueing: queue.finish(tol),
        consistency: consist.finish(tol),
        route_choice: route.finish(tol),
        departure_choice: dep.finish(tol),
    }
}

/// Quadratic gap objective and its parts; zero exactly at an equilibrium.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DueObjective {
    pub total: f64,
    /// `sum h mu w (w' - pi_tail')`
    pub z_q: f64,
    /// `sum h (s q + c y)`
    pub z_p: f64,
    /// `Q^T rho - sum h mu w`
    pub z_d: f64,
}

pub fn due_qp_objective(sol: &DueSolution, inst: &Instance) -> DueObjective {
    let net = &inst.network;
    let g = &inst.grid;
    let (cost, flow) = (&sol.cost, &sol.flow);
    let pd = node_pi_dot(inst, cost);
    let mut z_q = 0.0;
    let mut z_p = 0.0;
    let mut z_d: f64 = net.demand.iter().zip(&cost.rho).map(|(q, r)| q * r).sum();
    for t in 0..g.k {
        let h = g.weight(t);
        for i in 0..net.n_origins() {
            z_p += h * inst.s[t] * flow.q.get(i, t);
        }
    }
    for (li, link) in net.links.iter().enumerate() {
        let w = cost.w.row(li);
        let wd = diff_slice(w, g.dt, g.scheme);
        for t in 0..g.k {
            let h = g.weight(t);
            z_p += h * link.free_flow_time * flow.y.get(li, t);
            z_q += h * link.capacity * w[t] * (wd[t] - pd[link.tail][t]);
            z_d -= h * link.capacity * w[t];
        }
    }
    DueObjective {
        total: z_q + z_p - z_d,
        z_q,
        z_p,
        z_d,
    }
}

/// Cumulative counts of one link in physical time. Each destination
/// arrival step `k` maps to three clock times: entering the link, leaving
/// the bottleneck (placed at the link entrance) and leaving the link.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkCurves {
    pub link_id: u64,
    pub entry_time: Vec<f64>,
    pub bottleneck_exit_time: Vec<f64>,
    pub exit_time: Vec<f64>,
    /// Users on the link with destination arrival at or before step `k`.
    pub cumulative: Vec<f64>,
}

fn step_eval(times: &[f64], counts: &[f64], u: f64) -> f64 {
    // largest index with times[i] <= u
    match times.partition_point(|&x| x <= u) {
        0 => 0.0,
        p => counts[p - 1],
    }
}

impl LinkCurves {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Arrival curve `A(u)`.
    pub fn arrivals(&self, u: f64) -> f64 {
        step_eval(&self.entry_time, &self.cumulative, u)
    }

    /// Bottleneck departure curve `D(u)`.
    pub fn departures(&self, u: f64) -> f64 {
        step_eval(&self.bottleneck_exit_time, &self.cumulative, u)
    }

    /// Link exit curve.
    pub fn exits(&self, u: f64) -> f64 {
        step_eval(&self.exit_time, &self.cumulative, u)
    }

    /// `(u, A(u), D(u))` at every breakpoint of either curve.
    pub fn events(&self) -> Vec<(f64, f64, f64)> {
        let mut u: Vec<f64> = self.entry_time.iter().chain(&self.bottleneck_exit_time).copied().collect();
        u.sort_by(f64::total_cmp);
        u.dedup();
        u.into_iter().map(|t| (t, self.arrivals(t), self.departures(t))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulativeCurves {
    pub links: Vec<LinkCurves>,
}

pub fn eulerian_reconstruct(sol: &DueSolution, inst: &Instance) -> Result<CumulativeCurves> {
    let net = &inst.network;
    let g = &inst.grid;
    let slack = 1e-9 * (1.0 + g.t_end.abs());
    for i in 0..net.n_origins() {
        for t in 1..g.k {
            let prev = g.time(t - 1) - sol.cost.pi.get(i, t - 1);
            let cur = g.time(t) - sol.cost.pi.get(i, t);
            if cur < prev - slack {
                return Err(Error::Curves(format!(
                    "departure time from node {} decreases at step {t}",
                    net.node_ids[i]
                )));
            }
        }
    }
    let links = net
        .links
        .iter()
        .enumerate()
        .map(|(li, link)| {
            let mut n = 0.0;
            let mut cumulative = Vec::with_capacity(g.k);
            let mut entry = Vec::with_capacity(g.k);
            let mut bottleneck = Vec::with_capacity(g.k);
            let mut exit = Vec::with_capacity(g.k);
            for t in 0..g.k {
                if t > 0 {
                    n += sol.flow.y.get(li, t) * g.dt;
                }
                let u_a = g.time(t) - node_pi(inst, &sol.cost, link.tail, t);
                cumulative.push(n);
                entry.push(u_a);
                bottleneck.push(u_a + sol.cost.w.get(li, t));
                exit.push(g.time(t) - node_pi(inst, &sol.cost, link.head, t));
            }
            LinkCurves {
                link_id: link.id,
                entry_time: entry,
                bottleneck_exit_time: bottleneck,
                exit_time: exit,
                cumulative,
            }
        })
        .collect();
    Ok(CumulativeCurves { links })
}
