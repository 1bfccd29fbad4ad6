//! Node-to-domain assignment.
//!
//! Two partitioners are provided: orthogonal recursive bisection over node
//! coordinates, and multilevel recursive bisection (coarsen by matching,
//! split the small graph, refine with boundary moves while uncoarsening).
//! Quality is measured by the number of split links and by the theoretical
//! efficiency `e_dmn = (total load / p) / max domain load`.

mod fit;
mod graph;
mod multilevel;
mod orb;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::net::Network;

pub use fit::{fit_split_scaling, ScalingFit};
pub use multilevel::{multilevel_partition, multilevel_partition_with_log, MultilevelOptions, RefinementStep};
pub use orb::orthogonal_bisection;

/// Load per node, indexed like `Network::nodes()`.
pub type NodeWeights = Vec<f64>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PartitionError {
    #[error("cannot split {nodes} nodes into {p} domains")]
    TooManyDomains { p: usize, nodes: usize },
    #[error("domain count must be at least 1")]
    NoDomains,
    #[error("expected {expected} node weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("node weight {weight} at node index {node} is negative or not finite")]
    BadWeight { node: usize, weight: f64 },
    #[error("total node weight is zero")]
    ZeroWeight,
    #[error("node {node} has no domain")]
    Unassigned { node: u64 },
    #[error("node {node} assigned to domain {domain}, outside 0..{p}")]
    DomainOutOfRange { node: u64, domain: usize, p: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Degenerate(String),
}

/// Equal weight for every node.
pub fn uniform_weights(net: &Network) -> NodeWeights {
    vec![1.0; net.node_count()]
}

pub(crate) fn check_weights(net: &Network, weights: &[f64]) -> Result<(), PartitionError> {
    if weights.len() != net.node_count() {
        return Err(PartitionError::WeightCount { expected: net.node_count(), got: weights.len() });
    }
    if let Some((node, &weight)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
        return Err(PartitionError::BadWeight { node, weight });
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(PartitionError::ZeroWeight);
    }
    Ok(())
}

pub(crate) fn check_p(net: &Network, p: usize) -> Result<(), PartitionError> {
    if p == 0 {
        return Err(PartitionError::NoDomains);
    }
    if p > net.node_count() {
        return Err(PartitionError::TooManyDomains { p, nodes: net.node_count() });
    }
    Ok(())
}

/// Assignment of every node to one of `p` domains, with the induced set of
/// split links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    p: usize,
    domain_of: Vec<usize>,
    split_links: Vec<usize>,
}

impl Partition {
    pub fn new(net: &Network, domain_of: Vec<usize>, p: usize) -> Result<Self, PartitionError> {
        if p == 0 {
            return Err(PartitionError::NoDomains);
        }
        if domain_of.len() != net.node_count() {
            let node = net.node(domain_of.len().min(net.node_count().saturating_sub(1))).id;
            return Err(PartitionError::Unassigned { node });
        }
        if let Some(n) = domain_of.iter().position(|&d| d >= p) {
            return Err(PartitionError::DomainOutOfRange { node: net.node(n).id, domain: domain_of[n], p });
        }
        let split_links = split_links_of(net, &domain_of);
        Ok(Self { p, domain_of, split_links })
    }

    /// Everything in domain 0.
    pub fn single(net: &Network) -> Self {
        Self { p: 1, domain_of: vec![0; net.node_count()], split_links: Vec::new() }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn domain_of(&self, node: usize) -> usize {
        self.domain_of[node]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.domain_of
    }

    /// Indices of links whose endpoints lie in different domains, ascending.
    pub fn split_links(&self) -> &[usize] {
        &self.split_links
    }

    pub fn n_spl(&self) -> usize {
        self.split_links.len()
    }
}

fn split_links_of(net: &Network, domain_of: &[usize]) -> Vec<usize> {
    net.links()
        .iter()
        .enumerate()
        .filter(|(_, l)| domain_of[l.from] != domain_of[l.to])
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionMetrics {
    pub p: usize,
    pub n_spl: usize,
    pub e_dmn: f64,
    pub loads: Vec<f64>,
    /// Distinct other domains sharing a split link, per domain.
    pub neighbors: Vec<usize>,
}

impl PartitionMetrics {
    pub fn max_load(&self) -> f64 {
        self.loads.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_neighbors(&self) -> f64 {
        self.neighbors.iter().sum::<usize>() as f64 / self.p as f64
    }
}

pub fn compute_metrics(net: &Network, part: &Partition, weights: &[f64]) -> PartitionMetrics {
    let p = part.p();
    let mut loads = vec![0.0; p];
    for (node, &w) in weights.iter().enumerate() {
        loads[part.domain_of(node)] += w;
    }
    let mut pairs = BTreeSet::new();
    for &l in part.split_links() {
        let link = net.link(l);
        let (a, b) = (part.domain_of(link.from), part.domain_of(link.to));
        pairs.insert((a, b));
        pairs.insert((b, a));
    }
    let mut neighbors = vec![0; p];
    for (a, _) in pairs {
        neighbors[a] += 1;
    }
    let total: f64 = loads.iter().sum();
    let max = loads.iter().copied().fold(0.0, f64::max);
    let e_dmn = if max > 0.0 { (total / p as f64) / max } else { 1.0 };
    PartitionMetrics { p, n_spl: part.n_spl(), e_dmn, loads, neighbors }
}

/// `node_id domain_index` lines in node order.
pub fn write_partition(net: &Network, part: &Partition) -> String {
    let mut out = String::new();
    for (i, n) in net.nodes().iter().enumerate() {
        let _ = writeln!(out, "{} {}", n.id, part.domain_of(i));
    }
    out
}

/// Parse a partition file. The domain count is one more than the largest
/// index unless `p` is given.
pub fn read_partition(text: &str, net: &Network, p: Option<usize>) -> Result<Partition, PartitionError> {
    let mut domain_of = vec![usize::MAX; net.node_count()];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let parse_err = |msg: String| PartitionError::Parse { line, msg };
        if fields.len() != 2 {
            return Err(parse_err(format!("expected 'node_id domain', found {} fields", fields.len())));
        }
        let id: u64 = fields[0].parse().map_err(|_| parse_err(format!("invalid node id '{}'", fields[0])))?;
        let d: usize = fields[1].parse().map_err(|_| parse_err(format!("invalid domain '{}'", fields[1])))?;
        let node = net.node_by_id(id).ok_or_else(|| parse_err(format!("unknown node {id}")))?;
        domain_of[node] = d;
    }
    if let Some(n) = domain_of.iter().position(|&d| d == usize::MAX) {
        return Err(PartitionError::Unassigned { node: net.node(n).id });
    }
    let p = p.unwrap_or_else(|| domain_of.iter().max().map_or(1, |m| m + 1));
    Partition::new(net, domain_of, p)
}

/// `node_id weight` lines in node order.
pub fn write_weights(net: &Network, weights: &[f64]) -> String {
    let mut out = String::new();
    for (n, w) in net.nodes().iter().zip(weights) {
        let _ = writeln!(out, "{} {}", n.id, w);
    }
    out
}

/// Parse a weights file; every node must be listed.
pub fn read_weights(text: &str, net: &Network) -> Result<NodeWeights, PartitionError> {
    let mut weights = vec![f64::NAN; net.node_count()];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let parse_err = |msg: String| PartitionError::Parse { line, msg };
        if fields.len() != 2 {
            return Err(parse_err(format!("expected 'node_id weight', found {} fields", fields.len())));
        }
        let id: u64 = fields[0].parse().map_err(|_| parse_err(format!("invalid node id '{}'", fields[0])))?;
        let w: f64 = fields[1].parse().map_err(|_| parse_err(format!("invalid weight '{}'", fields[1])))?;
        let node = net.node_by_id(id).ok_or_else(|| parse_err(format!("unknown node {id}")))?;
        weights[node] = w;
    }
    if let Some(n) = weights.iter().position(|w| w.is_nan()) {
        return Err(PartitionError::Unassigned { node: net.node(n).id });
    }
    check_weights(net, &weights)?;
    Ok(weights)
}

pub const METRICS_HEADER: &str = "p,N_spl,e_dmn,max_load,mean_neighbors";

pub fn metrics_row(m: &PartitionMetrics) -> String {
    format!("{},{},{:.6},{},{:.6}", m.p, m.n_spl, m.e_dmn, m.max_load(), m.mean_neighbors())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{generate_grid, NetworkBuilder};

    fn path(n: usize) -> Network {
        let mut b = NetworkBuilder::new();
        for i in 0..n {
            b.node(i as u64, i as f64 * 100.0, 0.0);
        }
        for i in 0..n - 1 {
            b.link(i as u64, i as u64, i as u64 + 1, 100.0, 1, 5);
        }
        b.build().unwrap()
    }

    #[test]
    fn single_domain_metrics() {
        let net = generate_grid(3, 3, 75.0, 1);
        let part = Partition::single(&net);
        let m = compute_metrics(&net, &part, &uniform_weights(&net));
        assert_eq!(m.n_spl, 0);
        assert_eq!(m.e_dmn, 1.0);
        assert_eq!(m.neighbors, vec![0]);
    }

    #[test]
    fn e_dmn_from_loads() {
        // Three nodes with weights 3, 3, 4, one per domain.
        let net = path(3);
        let part = Partition::new(&net, vec![0, 1, 2], 3).unwrap();
        let m = compute_metrics(&net, &part, &[3.0, 3.0, 4.0]);
        assert!((m.e_dmn - (10.0 / 3.0) / 4.0).abs() < 1e-12);
        assert_eq!(m.loads, vec![3.0, 3.0, 4.0]);
    }

    #[test]
    fn neighbor_counts_with_three_links() {
        let mut b = NetworkBuilder::new();
        b.node(1, 0.0, 0.0).node(2, 1.0, 0.0).node(3, 0.0, 1.0).node(4, 1.0, 1.0);
        b.link(1, 1, 2, 10.0, 1, 5).link(2, 4, 3, 10.0, 1, 5).link(3, 2, 1, 10.0, 1, 5);
        b.link(4, 1, 3, 10.0, 1, 5);
        let net = b.build().unwrap();
        let part = Partition::new(&net, vec![0, 1, 0, 1], 2).unwrap();
        let m = compute_metrics(&net, &part, &uniform_weights(&net));
        assert_eq!(m.n_spl, 3);
        assert_eq!(m.neighbors, vec![1, 1]);
    }

    #[test]
    fn partition_file_round_trip() {
        let net = generate_grid(3, 4, 75.0, 1);
        let part = Partition::new(&net, (0..12).map(|i| i % 3).collect(), 3).unwrap();
        let text = write_partition(&net, &part);
        assert_eq!(read_partition(&text, &net, None).unwrap(), part);
        assert!(matches!(read_partition("0 0\n", &net, None), Err(PartitionError::Unassigned { .. })));
        assert!(matches!(read_partition("0 x\n", &net, None), Err(PartitionError::Parse { line: 1, .. })));
    }

    #[test]
    fn weights_file_round_trip() {
        let net = generate_grid(2, 3, 75.0, 1);
        let w: Vec<f64> = (0..6).map(|i| i as f64 + 0.5).collect();
        assert_eq!(read_weights(&write_weights(&net, &w), &net).unwrap(), w);
    }

    #[test]
    fn split_links_match_definition() {
        let net = generate_grid(4, 4, 75.0, 1);
        let part = Partition::new(&net, (0..16).map(|i| (i % 4) / 2).collect(), 2).unwrap();
        // Columns 0,1 vs 2,3: the only cut edges are the 4 row edges between
        // columns 1 and 2, in both directions.
        assert_eq!(part.n_spl(), 8);
        for &l in part.split_links() {
            let link = net.link(l);
            assert_ne!(part.domain_of(link.from), part.domain_of(link.to));
        }
    }
}
