//! A solvable instance: network, grid and schedule cost with the derived
//! quantities every stage needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{build_incidence, IncidenceMatrices, Network, ScheduleCost};
use crate::timegrid::{diff_slice, SeriesSet, TimeGrid};

#[derive(Debug, Clone)]
pub struct Instance {
    pub network: Network,
    pub grid: TimeGrid,
    pub sc: ScheduleCost,
    pub inc: IncidenceMatrices,
    /// `s(t_k)` on the grid.
    pub s: Vec<f64>,
    /// Discrete derivative of `s` under the grid's scheme.
    pub s_dot: Vec<f64>,
    pub out_links: Vec<Vec<usize>>,
    pub in_links: Vec<Vec<usize>>,
}

impl Instance {
    pub fn new(network: Network, grid: TimeGrid, sc: ScheduleCost) -> Result<Self> {
        if grid.k < 2 {
            return Err(Error::Grid("need at least two grid points".into()));
        }
        let s: Vec<f64> = grid.times().map(|t| sc.eval(t).0).collect();
        let s_dot = diff_slice(&s, grid.dt, grid.scheme);
        Ok(Instance {
            inc: build_incidence(&network),
            out_links: network.out_links(),
            in_links: network.in_links(),
            network,
            grid,
            sc,
            s,
            s_dot,
        })
    }

    /// Same network and grid with a different schedule cost.
    pub fn with_schedule(&self, sc: ScheduleCost) -> Result<Self> {
        Instance::new(self.network.clone(), self.grid, sc)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.grid.k
    }

    #[inline]
    pub fn n_origins(&self) -> usize {
        self.network.n_origins()
    }

    #[inline]
    pub fn n_links(&self) -> usize {
        self.network.n_links()
    }

    /// `pi` at a node and step, with the destination pinned to zero.
    #[inline]
    pub fn pi_at(&self, pi: &SeriesSet, node: usize, k: usize) -> f64 {
        if self.network.is_origin(node) {
            pi.get(node, k)
        } else {
            0.0
        }
    }
}

/// Candidate equilibrium costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPattern {
    /// Queueing delay per link.
    pub w: SeriesSet,
    /// Earliest travel time to the destination per origin.
    pub pi: SeriesSet,
    /// Equilibrium trip cost per origin.
    pub rho: Vec<f64>,
}

impl CostPattern {
    pub fn zeros(inst: &Instance) -> Self {
        CostPattern {
            w: SeriesSet::zeros(inst.n_links(), inst.k()),
            pi: SeriesSet::zeros(inst.n_origins(), inst.k()),
            rho: vec![0.0; inst.n_origins()],
        }
    }
}

/// Departure rates (by destination arrival time) and link flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPattern {
    pub q: SeriesSet,
    pub y: SeriesSet,
}

impl FlowPattern {
    pub fn zeros(inst: &Instance) -> Self {
        FlowPattern {
            q: SeriesSet::zeros(inst.n_origins(), inst.k()),
            y: SeriesSet::zeros(inst.n_links(), inst.k()),
        }
    }
}
