//! Network data model, file ingestion, incidence matrices and
//! schedule-delay costs.

mod incidence;
mod schedule;
mod tntp;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timegrid::TimeGrid;

pub use incidence::{build_incidence, IncidenceMatrices, SparseCol};
pub use schedule::{eval_schedule_cost, ScheduleCost, ScalingMode};
pub use tntp::load_tntp;

/// External node identifier, preserved from input files.
pub type NodeId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: u64,
    /// Internal node index of the tail.
    pub tail: usize,
    /// Internal node index of the head.
    pub head: usize,
    pub capacity: f64,
    pub free_flow_time: f64,
}

/// Many-to-one network.
///
/// Internal node indices `0..n_origins()` are the origins (in ascending
/// external id order) and index `n_origins()` is the destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    /// External id of every internal node; the destination is last.
    pub node_ids: Vec<NodeId>,
    pub links: Vec<Link>,
    /// Demand per origin, aligned with the origin indices.
    pub demand: Vec<f64>,
}

impl Network {
    #[inline]
    pub fn n_origins(&self) -> usize {
        self.node_ids.len() - 1
    }

    #[inline]
    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    #[inline]
    pub fn destination(&self) -> usize {
        self.node_ids.len() - 1
    }

    #[inline]
    pub fn is_origin(&self, node: usize) -> bool {
        node < self.n_origins()
    }

    pub fn origin_ids(&self) -> &[NodeId] {
        &self.node_ids[..self.n_origins()]
    }

    pub fn destination_id(&self) -> NodeId {
        self.node_ids[self.destination()]
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().sum()
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.capacity).collect()
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.node_ids.iter().position(|&n| n == id)
    }

    pub fn out_links(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_nodes()];
        for (l, link) in self.links.iter().enumerate() {
            out[link.tail].push(l);
        }
        out
    }

    pub fn in_links(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n_nodes()];
        for (l, link) in self.links.iter().enumerate() {
            inc[link.head].push(l);
        }
        inc
    }

    /// Assemble a network from external ids. Origins are every non-destination
    /// node that appears in a link or in the demand map.
    pub fn from_parts(
        name: impl Into<String>,
        destination: NodeId,
        links: &[(u64, NodeId, NodeId, f64, f64)],
        demand: &BTreeMap<NodeId, f64>,
    ) -> Result<Self> {
        let mut ids: Vec<NodeId> = links
            .iter()
            .flat_map(|&(_, t, h, _, _)| [t, h])
            .chain(demand.keys().copied())
            .filter(|&n| n != destination)
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        ids.sort_unstable();
        if !links.iter().any(|&(_, t, h, _, _)| t == destination || h == destination) {
            return Err(Error::Network(format!(
                "destination {destination} is not incident to any link"
            )));
        }
        ids.push(destination);
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();

        let mut seen = HashSet::new();
        let mut out_links = Vec::with_capacity(links.len());
        for &(id, t, h, cap, fft) in links {
            if t == h {
                return Err(Error::Network(format!("link {id} is a self-loop at node {t}")));
            }
            if !seen.insert((t, h)) {
                return Err(Error::Network(format!("duplicate link {t} -> {h}")));
            }
            if !(cap > 0.0) || !cap.is_finite() {
                return Err(Error::Network(format!("link {id} has capacity {cap}")));
            }
            if !(fft >= 0.0) || !fft.is_finite() {
                return Err(Error::Network(format!("link {id} has free-flow time {fft}")));
            }
            out_links.push(Link {
                id,
                tail: index[&t],
                head: index[&h],
                capacity: cap,
                free_flow_time: fft,
            });
        }
        let mut dem = vec![0.0; ids.len() - 1];
        for (&n, &q) in demand {
            if n == destination {
                continue;
            }
            if !(q >= 0.0) || !q.is_finite() {
                return Err(Error::Network(format!("origin {n} has demand {q}")));
            }
            dem[index[&n]] = q;
        }
        Ok(Network {
            name: name.into(),
            node_ids: ids,
            links: out_links,
            demand: dem,
        })
    }

    /// Origins (internal indices) with a directed path to the destination.
    pub fn reaches_destination(&self) -> Vec<bool> {
        let inc = self.in_links();
        let mut seen = vec![false; self.n_nodes()];
        let d = self.destination();
        seen[d] = true;
        let mut queue = VecDeque::from([d]);
        while let Some(v) = queue.pop_front() {
            for &l in &inc[v] {
                let u = self.links[l].tail;
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen.truncate(self.n_origins());
        seen
    }

    /// Drop zero-demand nodes that cannot reach the destination, together
    /// with their incident links.
    pub(crate) fn prune_dead_transit_nodes(self) -> Self {
        let reach = self.reaches_destination();
        let keep: Vec<bool> = (0..self.n_nodes())
            .map(|n| n == self.destination() || reach[n] || self.demand[n] > 0.0)
            .collect();
        if keep.iter().all(|&k| k) {
            return self;
        }
        let mut remap = vec![usize::MAX; self.n_nodes()];
        let mut node_ids = Vec::new();
        for n in 0..self.n_nodes() {
            if keep[n] {
                remap[n] = node_ids.len();
                node_ids.push(self.node_ids[n]);
            }
        }
        let demand = (0..self.n_origins())
            .filter(|&n| keep[n])
            .map(|n| self.demand[n])
            .collect();
        let links = self
            .links
            .into_iter()
            .filter(|l| keep[l.tail] && keep[l.head])
            .map(|l| Link {
                tail: remap[l.tail],
                head: remap[l.head],
                ..l
            })
            .collect();
        Network {
            name: self.name,
            node_ids,
            links,
            demand,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: NetworkFile = serde_json::from_str(text)?;
        raw.into_network()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json_str(&text)
    }

    pub fn to_file_format(&self) -> NetworkFile {
        NetworkFile {
            name: self.name.clone(),
            destination: self.destination_id(),
            links: self
                .links
                .iter()
                .map(|l| LinkRecord {
                    id: Some(l.id),
                    tail: self.node_ids[l.tail],
                    head: self.node_ids[l.head],
                    capacity: l.capacity,
                    free_flow_time: l.free_flow_time,
                })
                .collect(),
            demand: self
                .origin_ids()
                .iter()
                .zip(&self.demand)
                .map(|(&n, &q)| (n, q))
                .collect(),
        }
    }
}

/// Native JSON layout for hand-built fixtures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    #[serde(default)]
    pub name: String,
    pub destination: NodeId,
    pub links: Vec<LinkRecord>,
    pub demand: BTreeMap<NodeId, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkRecord {
    #[serde(default)]
    pub id: Option<u64>,
    pub tail: NodeId,
    pub head: NodeId,
    pub capacity: f64,
    pub free_flow_time: f64,
}

impl NetworkFile {
    pub fn into_network(self) -> Result<Network> {
        let links: Vec<_> = self
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.unwrap_or(i as u64 + 1), l.tail, l.head, l.capacity, l.free_flow_time))
            .collect();
        Network::from_parts(self.name, self.destination, &links, &self.demand)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    Unreachable { origin: NodeId },
    ZeroCapacity { link: u64 },
    NoDemand,
    DemandExceedsWindow { total_demand: f64, throughput: f64 },
    SlopeViolation { time: f64, slope: f64 },
    NotConvex { time: f64 },
    NonzeroAtPreferredTime { value: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

/// Structural and parameter checks. The grid, when given, is used for the
/// slope test and the window-throughput estimate.
pub fn validate_network(
    network: &Network,
    sc: &ScheduleCost,
    grid: Option<&TimeGrid>,
) -> ValidationReport {
    let mut diagnostics = Vec::new();
    let reach = network.reaches_destination();
    for (i, ok) in reach.iter().enumerate() {
        if !ok {
            diagnostics.push(Diagnostic::Unreachable {
                origin: network.node_ids[i],
            });
        }
    }
    for l in &network.links {
        if !(l.capacity > 0.0) {
            diagnostics.push(Diagnostic::ZeroCapacity { link: l.id });
        }
    }
    let total = network.total_demand();
    if !(total > 0.0) {
        diagnostics.push(Diagnostic::NoDemand);
    }
    if let Some(g) = grid {
        let final_cap: f64 = network
            .links
            .iter()
            .filter(|l| l.head == network.destination())
            .map(|l| l.capacity)
            .sum();
        let throughput = final_cap * (g.t_end - g.t_start);
        if total > throughput {
            diagnostics.push(Diagnostic::DemandExceedsWindow {
                total_demand: total,
                throughput,
            });
        }
    }
    diagnostics.extend(sc.diagnostics(grid));
    ValidationReport { diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network {
        let links = [(1, 1, 2, 10.0, 1.0), (2, 2, 3, 10.0, 1.0), (3, 4, 1, 5.0, 0.0)];
        let demand = BTreeMap::from([(1, 10.0), (2, 5.0), (4, 0.0)]);
        Network::from_parts("tiny", 3, &links, &demand).unwrap()
    }

    #[test]
    fn internal_layout() {
        let n = tiny();
        assert_eq!(n.node_ids, vec![1, 2, 4, 3]);
        assert_eq!(n.n_origins(), 3);
        assert_eq!(n.destination_id(), 3);
        assert_eq!(n.demand, vec![10.0, 5.0, 0.0]);
        assert_eq!(n.links[2].tail, 2);
    }

    #[test]
    fn rejects_bad_links() {
        let d = BTreeMap::from([(1, 1.0)]);
        assert!(Network::from_parts("x", 2, &[(1, 1, 2, 0.0, 1.0)], &d).is_err());
        assert!(Network::from_parts("x", 2, &[(1, 1, 1, 1.0, 1.0)], &d).is_err());
        assert!(Network::from_parts("x", 2, &[(1, 1, 2, 1.0, 1.0), (2, 1, 2, 1.0, 1.0)], &d).is_err());
        assert!(Network::from_parts("x", 9, &[(1, 1, 2, 1.0, 1.0)], &d).is_err());
    }

    #[test]
    fn unreachable_origin_reported() {
        let links = [(1, 1, 2, 10.0, 1.0), (2, 3, 1, 10.0, 1.0), (3, 2, 4, 1.0, 1.0)];
        let demand = BTreeMap::from([(1, 10.0), (4, 3.0)]);
        let n = Network::from_parts("u", 2, &links, &demand).unwrap();
        let sc = ScheduleCost::piecewise_linear(0.3, 0.6, 30.0).unwrap();
        let rep = validate_network(&n, &sc, None);
        assert_eq!(rep.diagnostics, vec![Diagnostic::Unreachable { origin: 4 }]);
    }

    #[test]
    fn json_round_trip() {
        let n = tiny();
        let text = serde_json::to_string(&n.to_file_format()).unwrap();
        assert_eq!(Network::from_json_str(&text).unwrap(), n);
    }

    #[test]
    fn prune_drops_dead_transit() {
        let links = [(1, 1, 2, 10.0, 1.0), (2, 1, 5, 10.0, 1.0)];
        let demand = BTreeMap::from([(1, 10.0)]);
        let n = Network::from_parts("p", 2, &links, &demand).unwrap().prune_dead_transit_nodes();
        assert_eq!(n.node_ids, vec![1, 2]);
        assert_eq!(n.links.len(), 1);
    }
}
