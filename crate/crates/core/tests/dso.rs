mod common;

use common::*;
use gqrp_due::dso::check_tree_assumption;
use gqrp_due::flow_step::FlowStepOptions;
use gqrp_due::*;

fn due_solution(inst: &Instance) -> (DueSolution, bool) {
    let (cost, fs) = solve(inst);
    let holds = fs.verdict.holds;
    let flow = fs.flow.or(fs.diagnostic_flow).unwrap();
    (DueSolution { cost: cost.cost, flow, provenance: Provenance::Constructive }, holds)
}

#[test]
fn zero_demand_has_zero_prices() {
    let inst = single_link(0.0);
    let d = solve_dso(&inst, &solver()).unwrap();
    assert_eq!(d.objective, 0.0);
    assert_eq!(d.pricing.max_abs(), 0.0);
    assert_eq!(d.flow.y.max_abs(), 0.0);
    let (due, holds) = due_solution(&inst);
    let c = compare_dso_due(&d, &due, holds, &inst, &opts());
    assert!(c.applicable);
    assert_eq!((c.pricing_deviation, c.pi_deviation, c.rho_deviation), (0.0, 0.0, 0.0));
    let p = pareto_report(&d, &due, &inst);
    assert_eq!((p.toll_revenue, p.due_queue_cost, p.manager_benefit), (0.0, 0.0, 0.0));
}

#[test]
fn dso_objective_equals_relaxed_primal() {
    let inst = braess();
    let s = solver();
    let d = solve_dso(&inst, &s).unwrap();
    let cost = solve_cost_step(&inst, &s, &opts()).unwrap();
    assert!((d.objective - cost.primal_objective).abs() <= 1e-9 * (1.0 + d.objective.abs()));
    assert!(d.kkt.max() <= 1e-6);
    for (l, link) in inst.network.links.iter().enumerate() {
        assert!(d.flow.y.row(l).iter().all(|&y| y <= link.capacity + 1e-9));
    }
}

#[test]
fn braess_prices_match_queues() {
    let inst = braess();
    let d = solve_dso(&inst, &solver()).unwrap();
    let (due, holds) = due_solution(&inst);
    assert!(holds);
    let c = compare_dso_due(&d, &due, holds, &inst, &opts());
    assert!(c.applicable);
    assert!(c.pricing_deviation <= 1e-6, "{c:?}");
    assert!(c.rho_deviation <= 1e-6);
    assert!(c.pi_deviation <= 1e-6);

    let p = pareto_report(&d, &due, &inst);
    assert!(p.due_queue_cost > 0.0);
    assert!(p.revenue_gap() <= 1e-4, "gap {}", p.revenue_gap());
    assert!(p.max_rho_gap() <= 1e-6);
    assert_eq!(p.per_origin.len(), 3);
}

#[test]
fn single_link_revenue() {
    let inst = single_link(600.0);
    let d = solve_dso(&inst, &solver()).unwrap();
    let (due, _) = due_solution(&inst);
    let p = pareto_report(&d, &due, &inst);
    // triangular price profile of height 2.4 over a 12-unit window at rate 50
    let oracle = 50.0 * 0.5 * 2.4 * 12.0;
    assert!((p.toll_revenue - oracle).abs() <= 1.0, "revenue {}", p.toll_revenue);
    assert!((p.toll_revenue - p.due_queue_cost).abs() <= 1e-6);
}

#[test]
fn corridor_satisfies_tree_assumption() {
    let inst = corridor(300.0, 200.0);
    let d = solve_dso(&inst, &solver()).unwrap();
    let t = check_tree_assumption(&d, &inst, opts().support());
    assert!(t.holds);
    assert!(t.witness.is_none());
}

#[test]
fn split_departures_violate_tree_assumption() {
    let inst = braess();
    let d = solve_dso(&inst, &solver()).unwrap();
    let t = check_tree_assumption(&d, &inst, opts().support());
    assert!(!t.holds);
    let (node, step) = t.witness.unwrap();
    let i = inst.network.node_index(node).unwrap();
    let thr = opts().support();
    let loaded = inst.out_links[i].iter().filter(|&&l| d.flow.y.get(l, step) > thr).count();
    assert!(loaded >= 2);
}

#[test]
fn failed_equilibrium_is_not_comparable() {
    let inst = braess();
    let d = solve_dso(&inst, &solver()).unwrap();
    let (due, _) = due_solution(&inst);
    let c = compare_dso_due(&d, &due, false, &inst, &opts());
    assert!(!c.applicable);
    assert!(c.note.unwrap().contains("GQRP does not hold"));
}

#[test]
fn valid_instance_keeps_unit_kappa() {
    let inst = braess();
    let k = kappa_search(&inst, &[1.0, 0.5], ScalingMode::LateSide, 4, &solver(), &opts()).unwrap();
    assert_eq!(k.kappa_star, Some(1.0));
    assert!(k.refinements.is_empty());
    assert!(k.margins_monotone(1e-6));
}

#[test]
fn kappa_grid_is_validated() {
    let inst = single_link(600.0);
    let s = solver();
    for grid in [&[0.5, 1.0][..], &[1.0, 0.0], &[1.2, 0.5], &[0.5, 0.5]] {
        assert!(kappa_search(&inst, grid, ScalingMode::LateSide, 0, &s, &opts()).is_err(), "{grid:?}");
    }
}

#[test]
fn numeric_route_gives_same_prices() {
    let inst = braess();
    let o = opts();
    let s = solver();
    let cost = solve_cost_step(&inst, &s, &o).unwrap();
    let fs = run_flow_step(&inst, &cost, &s, &o, &FlowStepOptions { force_numeric: true, cross_check: false }).unwrap();
    assert_eq!(fs.verdict.route, FlowRoute::Numeric);
    assert!(fs.verdict.holds);
    let due = DueSolution { cost: cost.cost, flow: fs.flow.unwrap(), provenance: Provenance::Numeric };
    let d = solve_dso(&inst, &s).unwrap();
    let p = pareto_report(&d, &due, &inst);
    assert!(p.revenue_gap() <= 1e-4);
}
