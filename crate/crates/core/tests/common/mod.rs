#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use gqrp_due::cost_step::solve_cost_step;
use gqrp_due::flow_step::{run_flow_step, FlowStep, FlowStepOptions};
use gqrp_due::{CostStep, Instance, Network, RevisedSimplex, ScheduleCost, SolveOptions, TimeGrid};

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

pub fn grid() -> TimeGrid {
    TimeGrid::new(0.0, 60.0, 0.1).unwrap()
}

pub fn braess() -> Instance {
    let net = Network::from_json_file(data("networks/braess.json")).unwrap();
    let sc = ScheduleCost::piecewise_linear(0.3, 0.6, 30.0).unwrap();
    Instance::new(net, grid(), sc).unwrap()
}

pub fn nguyen(gamma: f64) -> Instance {
    let net = Network::from_json_file(data("networks/nguyen.json")).unwrap();
    let sc = ScheduleCost::piecewise_linear(0.4, gamma, 30.0).unwrap();
    Instance::new(net, grid(), sc).unwrap()
}

pub fn single_link(q: f64) -> Instance {
    let net = Network::from_parts("one", 1, &[(1, 0, 1, 50.0, 0.0)], &BTreeMap::from([(0, q)])).unwrap();
    let sc = ScheduleCost::piecewise_linear(0.3, 0.6, 30.0).unwrap();
    Instance::new(net, grid(), sc).unwrap()
}

/// Two origins in series: 0 -> 1 -> 2 (destination).
pub fn corridor(q0: f64, q1: f64) -> Instance {
    let net = Network::from_parts(
        "corridor",
        2,
        &[(1, 0, 1, 100.0, 2.0), (2, 1, 2, 30.0, 3.0)],
        &BTreeMap::from([(0, q0), (1, q1)]),
    )
    .unwrap();
    let sc = ScheduleCost::piecewise_linear(0.3, 0.6, 30.0).unwrap();
    Instance::new(net, grid(), sc).unwrap()
}

pub fn opts() -> SolveOptions {
    SolveOptions::default()
}

pub fn solver() -> RevisedSimplex {
    opts().simplex()
}

pub fn solve(inst: &Instance) -> (CostStep, FlowStep) {
    let o = opts();
    let s = solver();
    let cost = solve_cost_step(inst, &s, &o).unwrap();
    let flow = run_flow_step(inst, &cost, &s, &o, &FlowStepOptions::default()).unwrap();
    (cost, flow)
}
