mod common;

use std::collections::BTreeMap;

use common::*;
use gqrp_due::flow_step::*;
use gqrp_due::*;
use proptest::prelude::*;

struct Solved {
    inst: Instance,
    cost: CostStep,
    fs: FlowStep,
}

fn solved_braess() -> Solved {
    let inst = braess();
    let (cost, fs) = solve(&inst);
    Solved { inst, cost, fs }
}

/// Steps where `w` is queued at both `k` and `k - 1`.
fn interior_queue_steps(w: &[f64], thr: f64) -> impl Iterator<Item = usize> + '_ {
    (1..w.len()).filter(move |&t| w[t] > thr && w[t - 1] > thr)
}

#[test]
fn strong_duality() {
    for inst in [braess(), corridor(300.0, 200.0), single_link(600.0)] {
        let cost = solve_cost_step(&inst, &solver(), &opts()).unwrap();
        assert!(cost.duality_gap <= 1e-8, "{}: gap {}", inst.network.name, cost.duality_gap);
        assert!(check_cost_kkt(&cost.cost, &cost.flow, &inst).max() <= 1e-6);
    }
}

#[test]
fn travel_time_grows_slower_than_clock() {
    let s = solved_braess();
    let thr = opts().support();
    let pd = s.cost.cost.pi.differentiate(&s.inst.grid);
    assert!(pd.data.iter().all(|&v| v < 1.0));
    for i in 0..s.inst.n_origins() {
        for t in 1..s.inst.k() {
            if s.cost.flow.q.get(i, t) > thr && s.cost.flow.q.get(i, t - 1) > thr {
                assert!((pd.get(i, t) + s.inst.s_dot[t]).abs() <= 10.0 * 1e-6, "origin {i} step {t}");
            }
        }
    }
}

#[test]
fn queue_slopes_follow_schedule() {
    let s = solved_braess();
    let thr = opts().support();
    let wd = s.cost.cost.w.differentiate(&s.inst.grid);
    let mut seen = 0;
    for l in 0..s.inst.n_links() {
        for t in interior_queue_steps(s.cost.cost.w.row(l), thr) {
            let v = wd.get(l, t);
            assert!(v.abs() < 1e-6 || (v + s.inst.s_dot[t]).abs() < 1e-6, "link {l} step {t}: {v}");
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn theta_nonnegative() {
    let s = solved_braess();
    let min = s.fs.multipliers.theta.data.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-9, "min theta {min}");
}

#[test]
fn constructive_flow_conserves_link_totals() {
    let s = solved_braess();
    let flow = s.fs.flow.as_ref().unwrap();
    for l in 0..s.inst.n_links() {
        let a = flow.y.integrate(&s.inst.grid, l);
        let b = s.cost.flow.y.integrate(&s.inst.grid, l);
        assert!((a - b).abs() <= 1e-6 * (1.0 + b), "link {l}: {a} vs {b}");
    }
}

#[test]
fn constructive_flow_closes_the_gap() {
    let s = solved_braess();
    let flow = s.fs.flow.as_ref().unwrap();
    let gap = flow_gap(&s.inst, &s.cost.cost, flow);
    let split = gap_breakdown(&s.inst, &s.cost.cost, &s.fs.multipliers, flow);
    let scale = 1.0 + s.cost.dual_objective.abs();
    assert!((gap - split.total()).abs() <= 1e-9 * scale);
    assert!(gap.abs() <= 10.0 * 1e-6 * scale);
    assert!(reduced_residual(&s.inst, &s.cost.cost, &s.fs.multipliers, flow) <= 1e-6);
}

#[test]
fn objective_identity_on_numeric_route() {
    let inst = braess();
    let (o, sv) = (opts(), solver());
    let cost = solve_cost_step(&inst, &sv, &o).unwrap();
    let fs = run_flow_step(&inst, &cost, &sv, &o, &FlowStepOptions { force_numeric: true, cross_check: false }).unwrap();
    let sol = DueSolution { cost: cost.cost.clone(), flow: fs.flow.unwrap(), provenance: Provenance::Numeric };
    let z = due_qp_objective(&sol, &inst);
    assert!((z.total - fs.verdict.flow_lp_objective).abs() <= 10.0 * 1e-6);
}

#[test]
fn reconstructed_curves_are_fifo() {
    let s = solved_braess();
    let sol = DueSolution {
        cost: s.cost.cost.clone(),
        flow: s.fs.flow.clone().unwrap(),
        provenance: Provenance::Constructive,
    };
    let curves = eulerian_reconstruct(&sol, &s.inst).unwrap();
    for lc in &curves.links {
        for series in [&lc.entry_time, &lc.bottleneck_exit_time, &lc.exit_time, &lc.cumulative] {
            assert!(series.windows(2).all(|p| p[1] >= p[0] - 1e-9), "link {}", lc.link_id);
        }
        for (_, a, d) in lc.events() {
            assert!(d <= a + 1e-9);
        }
    }
}

#[test]
fn departures_run_at_capacity_while_queued() {
    let s = solved_braess();
    let thr = opts().support();
    let sol = DueSolution {
        cost: s.cost.cost.clone(),
        flow: s.fs.flow.clone().unwrap(),
        provenance: Provenance::Constructive,
    };
    let curves = eulerian_reconstruct(&sol, &s.inst).unwrap();
    let mut seen = 0;
    for (l, link) in s.inst.network.links.iter().enumerate() {
        let lc = &curves.links[l];
        for t in interior_queue_steps(s.cost.cost.w.row(l), thr) {
            if t + 1 >= s.inst.k() {
                continue;
            }
            let du = lc.bottleneck_exit_time[t] - lc.bottleneck_exit_time[t - 1];
            let slope = (lc.cumulative[t] - lc.cumulative[t - 1]) / du;
            assert!((slope - link.capacity).abs() <= 1e-6 * link.capacity, "link {l} step {t}: {slope}");
            seen += 1;
        }
    }
    assert!(seen > 0);
}

fn coarse_corridor(q0: f64, q1: f64) -> Instance {
    let net = Network::from_parts(
        "corridor",
        2,
        &[(1, 0, 1, 100.0, 2.0), (2, 1, 2, 30.0, 3.0)],
        &BTreeMap::from([(0, q0), (1, q1)]),
    )
    .unwrap();
    let sc = ScheduleCost::piecewise_linear(0.3, 0.6, 30.0).unwrap();
    Instance::new(net, TimeGrid::new(0.0, 60.0, 0.5).unwrap(), sc).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_corridor_cost_step(q0 in 0.0f64..200.0, q1 in 0.0f64..200.0) {
        let inst = coarse_corridor(q0, q1);
        let cost = solve_cost_step(&inst, &solver(), &opts()).unwrap();
        prop_assert!(cost.duality_gap <= 1e-8);
        prop_assert!(check_cost_kkt(&cost.cost, &cost.flow, &inst).max() <= 1e-6);
        let pd = cost.cost.pi.differentiate(&inst.grid);
        prop_assert!(pd.data.iter().all(|&v| v < 1.0));
        let qr: f64 = inst.network.demand.iter().zip(&cost.cost.rho).map(|(q, r)| q * r).sum();
        prop_assert!((cost.dual_objective - (qr - mu_w(&inst, &cost.cost))).abs() <= 1e-6 * (1.0 + qr));
    }
}

fn mu_w(inst: &Instance, cost: &CostPattern) -> f64 {
    let g = &inst.grid;
    inst.network
        .links
        .iter()
        .enumerate()
        .map(|(l, link)| (0..g.k).map(|t| g.weight(t) * link.capacity * cost.w.get(l, t)).sum::<f64>())
        .sum()
}
