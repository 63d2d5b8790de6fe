//! Shared fixtures for the benchmarks.

use std::path::PathBuf;

use gqrp_due::{Instance, Network, ScheduleCost, TimeGrid};

pub fn braess(dt: f64) -> Instance {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/networks/braess.json");
    let net = Network::from_json_file(path).expect("braess fixture");
    let sc = ScheduleCost::piecewise_linear(0.3, 0.6, 30.0).expect("schedule");
    Instance::new(net, TimeGrid::new(0.0, 60.0, dt).expect("grid"), sc).expect("instance")
}
