use std::collections::BTreeMap;

use super::{Network, NodeId};
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Iterate over data lines: comments (`~`) and metadata (`<...>`) removed,
/// trailing `;` terminators kept for the caller. Yields 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut in_header = text.lines().any(|l| l.trim().starts_with("<END OF METADATA>"));
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let line = raw.split('~').next().unwrap_or("").trim();
        if in_header {
            if line.starts_with("<END OF METADATA>") {
                in_header = false;
            }
            return None;
        }
        if line.is_empty() || line.starts_with('<') {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {tok:?}")))
}

/// `(id, tail, head, capacity, free_flow_time)`
type LinkRow = (u64, NodeId, NodeId, f64, f64);

fn parse_net(text: &str) -> Result<Vec<LinkRow>> {
    let mut links = Vec::new();
    for (line, content) in data_lines(text) {
        let toks: Vec<&str> = content
            .split_whitespace()
            .filter(|t| *t != ";")
            .map(|t| t.trim_end_matches(';'))
            .collect();
        if toks.len() < 5 {
            return Err(parse_err(line, format!("expected at least 5 fields, found {}", toks.len())));
        }
        let tail = parse_num(toks[0], line, "init node")?;
        let head = parse_num(toks[1], line, "term node")?;
        let cap = parse_num(toks[2], line, "capacity")?;
        let fft = parse_num(toks[4], line, "free flow time")?;
        links.push((links.len() as u64 + 1, tail, head, cap, fft));
    }
    if links.is_empty() {
        return Err(parse_err(0, "network file has no link records"));
    }
    Ok(links)
}

/// Demand from every origin to `destination`.
fn parse_trips(text: &str, destination: NodeId) -> Result<BTreeMap<NodeId, f64>> {
    let mut demand = BTreeMap::new();
    let mut origin: Option<NodeId> = None;
    for (line, content) in data_lines(text) {
        if let Some(rest) = content.strip_prefix("Origin") {
            origin = Some(parse_num(rest.trim(), line, "origin id")?);
            continue;
        }
        let o = origin.ok_or_else(|| parse_err(line, "OD entry before any Origin header"))?;
        for entry in content.split(';').map(str::trim).filter(|e| !e.is_empty()) {
            let (d, v) = entry
                .split_once(':')
                .ok_or_else(|| parse_err(line, format!("malformed OD entry {entry:?}")))?;
            let d: NodeId = parse_num(d.trim(), line, "destination id")?;
            let v: f64 = parse_num(v.trim(), line, "demand")?;
            if d == destination && o != destination && v > 0.0 {
                *demand.entry(o).or_insert(0.0) += v;
            }
        }
    }
    Ok(demand)
}

/// Many-to-one network from TNTP net and trips files. Capacities are
/// multiplied by `capacity_scale`; OD pairs to other destinations are
/// dropped.
pub fn load_tntp(
    net_text: &str,
    trips_text: &str,
    destination: NodeId,
    capacity_scale: f64,
) -> Result<Network> {
    if !(capacity_scale > 0.0) {
        return Err(Error::Network(format!("capacity scale must be positive, got {capacity_scale}")));
    }
    let mut links = parse_net(net_text)?;
    if !links.iter().any(|&(_, t, h, _, _)| t == destination || h == destination) {
        return Err(Error::Network(format!("destination {destination} not found in network")));
    }
    for l in &mut links {
        l.3 *= capacity_scale;
        if !(l.3 > 0.0) {
            return Err(Error::Network(format!("link {} -> {} has zero scaled capacity", l.1, l.2)));
        }
    }
    let demand = parse_trips(trips_text, destination)?;
    let net = Network::from_parts("tntp", destination, &links, &demand)?;
    let reach = net.reaches_destination();
    if !(0..net.n_origins()).any(|i| reach[i] && net.demand[i] > 0.0) {
        return Err(Error::Network(format!("no origin has a path to destination {destination}")));
    }
    Ok(net.prune_dead_transit_nodes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NET: &str = "<NUMBER OF NODES> 2\n<END OF METADATA>\n\n~ init term cap len fft b p s t ty ;\n\t1\t2\t50\t1\t0\t0.15\t4\t0\t0\t1\t;\n";
    const TRIPS: &str = "<NUMBER OF ZONES> 2\n<END OF METADATA>\n\nOrigin \t1\n    1 :     0.0;    2 :   600.0;\n\nOrigin 2\n 1 : 5.0;\n";

    #[test]
    fn single_link_file() {
        let n = load_tntp(NET, TRIPS, 2, 1.0).unwrap();
        assert_eq!(n.n_origins(), 1);
        assert_eq!(n.n_links(), 1);
        assert_eq!(n.demand, vec![600.0]);
        assert_eq!(n.links[0].capacity, 50.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = NET.replace("\t50\t", "\tfifty\t");
        match load_tntp(&bad, TRIPS, 2, 1.0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load_tntp(NET, TRIPS, 7, 1.0), Err(Error::Network(_))));
        assert!(matches!(load_tntp(NET, TRIPS, 1, 1.0), Err(Error::Network(_))));
    }
}
