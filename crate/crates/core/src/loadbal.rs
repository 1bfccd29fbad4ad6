//! Node weights from measured work, for repartitioning the next run.
//!
//! A run writes the work spent on every link and node (see
//! [`write_load_file`](crate::parengine::write_load_file)). Feeding that
//! profile back replaces the static length-based estimate, so congested
//! regions end up in smaller domains.

use crate::net::Network;
use crate::parengine::StepTrace;
use crate::partition::NodeWeights;

/// Smallest weight a node may carry. Zero weights make proportional cuts
/// degenerate.
pub const WEIGHT_FLOOR: f64 = 1.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LoadError {
    #[error("load file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("load file line {line}: unknown {kind} id {id}")]
    UnknownElement { line: usize, kind: &'static str, id: u64 },
    #[error("load file total {file} differs from the run trace total {trace}")]
    TraceMismatch { file: f64, trace: f64 },
}

/// Accumulated work per link and per node, indexed like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadProfile {
    pub link_work: Vec<f64>,
    pub node_work: Vec<f64>,
}

impl LoadProfile {
    pub fn zero(net: &Network) -> Self {
        Self { link_work: vec![0.0; net.link_count()], node_work: vec![0.0; net.node_count()] }
    }

    /// Profile taken directly from a traced run.
    pub fn from_trace(trace: &StepTrace) -> Self {
        Self {
            link_work: trace.link_work.iter().map(|&w| w as f64).collect(),
            node_work: trace.node_work.iter().map(|&w| w as f64).collect(),
        }
    }

    pub fn total(&self) -> f64 {
        self.link_work.iter().sum::<f64>() + self.node_work.iter().sum::<f64>()
    }

    /// Element-wise sum of two profiles of the same network.
    pub fn add(&mut self, other: &LoadProfile) {
        for (a, b) in self.link_work.iter_mut().zip(&other.link_work) {
            *a += b;
        }
        for (a, b) in self.node_work.iter_mut().zip(&other.node_work) {
            *a += b;
        }
    }

    /// Link with the largest work, if any work was recorded.
    pub fn busiest_link(&self) -> Option<usize> {
        let (ix, &w) = self.link_work.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        (w > 0.0).then_some(ix)
    }
}

/// Parse a load file (`L <link id> <work>` / `N <node id> <work>`, `#`
/// comments). Repeated entries add up; absent elements have zero work.
/// When `trace` is given its element totals must match the file.
pub fn collect(net: &Network, text: &str, trace: Option<&StepTrace>) -> Result<LoadProfile, LoadError> {
    let mut prof = LoadProfile::zero(net);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap().trim();
        if s.is_empty() {
            continue;
        }
        let f: Vec<&str> = s.split_whitespace().collect();
        if f.len() != 3 {
            return Err(LoadError::Parse { line, msg: format!("expected 3 fields, got {}", f.len()) });
        }
        let id: u64 = f[1].parse().map_err(|_| LoadError::Parse { line, msg: format!("bad id '{}'", f[1]) })?;
        let work: f64 = f[2].parse().map_err(|_| LoadError::Parse { line, msg: format!("bad work '{}'", f[2]) })?;
        if !(work.is_finite() && work >= 0.0) {
            return Err(LoadError::Parse { line, msg: format!("work must be finite and nonnegative, got {work}") });
        }
        match f[0] {
            "L" => {
                let ix = net.link_by_id(id).ok_or(LoadError::UnknownElement { line, kind: "link", id })?;
                prof.link_work[ix] += work;
            }
            "N" => {
                let ix = net.node_by_id(id).ok_or(LoadError::UnknownElement { line, kind: "node", id })?;
                prof.node_work[ix] += work;
            }
            other => return Err(LoadError::Parse { line, msg: format!("unknown record type '{other}'") }),
        }
    }
    if let Some(t) = trace {
        let expected = t.total_work() as f64;
        if (prof.total() - expected).abs() > 1e-6 * expected.max(1.0) {
            return Err(LoadError::TraceMismatch { file: prof.total(), trace: expected });
        }
    }
    Ok(prof)
}

/// Node weights together with how much the floor added.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightResult {
    pub weights: NodeWeights,
    /// Sum over floored nodes of `WEIGHT_FLOOR - raw weight`.
    pub floor_adjustment: f64,
    pub floored_nodes: usize,
}

/// Node weight = node work + half the work of every attached link, raised
/// to [`WEIGHT_FLOOR`] where smaller.
pub fn to_weights(profile: &LoadProfile, net: &Network) -> WeightResult {
    let mut raw = profile.node_work.clone();
    raw.resize(net.node_count(), 0.0);
    for (l, link) in net.links().iter().enumerate() {
        let half = profile.link_work.get(l).copied().unwrap_or(0.0) / 2.0;
        raw[link.from] += half;
        raw[link.to] += half;
    }
    let mut floor_adjustment = 0.0;
    let mut floored_nodes = 0;
    let weights = raw
        .into_iter()
        .map(|w| {
            if w < WEIGHT_FLOOR {
                floor_adjustment += WEIGHT_FLOOR - w;
                floored_nodes += 1;
                WEIGHT_FLOOR
            } else {
                w
            }
        })
        .collect();
    WeightResult { weights, floor_adjustment, floored_nodes }
}

/// Static estimate: each node carries half the length of every attached link.
pub fn length_weights(net: &Network) -> NodeWeights {
    let mut w = vec![0.0; net.node_count()];
    for l in net.links() {
        w[l.from] += l.length / 2.0;
        w[l.to] += l.length / 2.0;
    }
    w
}

/// Per-domain sums of profile work over an assignment of nodes, with link work
/// split evenly between the end nodes' domains.
pub fn domain_work(net: &Network, profile: &LoadProfile, domain_of: &[usize], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for (n, &w) in profile.node_work.iter().enumerate() {
        out[domain_of[n]] += w;
    }
    for (l, &w) in profile.link_work.iter().enumerate() {
        let link = net.link(l);
        out[domain_of[link.from]] += w / 2.0;
        out[domain_of[link.to]] += w / 2.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{generate_grid, NetworkBuilder};

    fn star() -> Network {
        // Node 1 joined to node 2 by a 4-work link and to node 3 by a 6-work one.
        let mut b = NetworkBuilder::new();
        b.node(1, 0.0, 0.0).node(2, 75.0, 0.0).node(3, 0.0, 75.0).node(4, 500.0, 500.0);
        b.link(10, 1, 2, 75.0, 1, 5).link(11, 3, 1, 75.0, 1, 5);
        b.build().unwrap()
    }

    #[test]
    fn weight_rule_arithmetic() {
        let net = star();
        let prof = collect(&net, "L 10 4\nL 11 6\nN 1 3\n", None).unwrap();
        let r = to_weights(&prof, &net);
        assert_eq!(r.weights[0], 8.0);
        assert_eq!(r.weights[1], 2.0);
        assert_eq!(r.weights[2], 3.0);
        // Isolated node 4 is floored.
        assert_eq!(r.weights[3], WEIGHT_FLOOR);
        assert_eq!((r.floored_nodes, r.floor_adjustment), (1, 1.0));
        let total: f64 = r.weights.iter().sum();
        assert_eq!(total, prof.total() + r.floor_adjustment);
    }

    #[test]
    fn zero_profile_is_all_floor() {
        let net = generate_grid(4, 4, 75.0, 1);
        let r = to_weights(&LoadProfile::zero(&net), &net);
        assert!(r.weights.iter().all(|&w| w == WEIGHT_FLOOR));
        assert_eq!(r.floor_adjustment, 16.0);
    }

    #[test]
    fn uniform_profile_on_symmetric_grid() {
        let net = generate_grid(4, 4, 75.0, 1);
        let prof = LoadProfile { link_work: vec![10.0; net.link_count()], node_work: vec![0.0; 16] };
        let r = to_weights(&prof, &net);
        // Weight follows degree: corners 2, edges 3, interior 4 links each way.
        let deg = |n: usize| net.outgoing(n).len() + net.incoming(n).len();
        for n in 0..16 {
            assert_eq!(r.weights[n], 5.0 * deg(n) as f64);
        }
        assert_eq!(r.weights[5], r.weights[6]);
    }

    #[test]
    fn length_weight_examples() {
        let net = star();
        let w = length_weights(&net);
        assert_eq!(w[0], 75.0);
        assert_eq!(w[3], 0.0);
        let g = generate_grid(5, 5, 75.0, 1);
        let w = length_weights(&g);
        // Interior node: 4 neighbours, a link each way, half of 75 m each.
        assert_eq!(w[6], 300.0);
        assert!([6, 7, 8, 11, 12, 13, 16, 17, 18].iter().all(|&n| w[n] == w[6]));
    }

    #[test]
    fn profiles_add_up() {
        let net = star();
        let text = "L 10 4\nN 2 1\n";
        let once = collect(&net, text, None).unwrap();
        let twice = collect(&net, &format!("{text}{text}"), None).unwrap();
        let mut sum = once.clone();
        sum.add(&once);
        assert_eq!(twice, sum);
    }

    #[test]
    fn malformed_files() {
        let net = star();
        assert!(matches!(collect(&net, "L 10", None), Err(LoadError::Parse { line: 1, .. })));
        assert!(matches!(collect(&net, "X 10 1", None), Err(LoadError::Parse { .. })));
        assert!(matches!(collect(&net, "L 99 1", None), Err(LoadError::UnknownElement { kind: "link", .. })));
        assert!(matches!(collect(&net, "# c\nN 1 -1", None), Err(LoadError::Parse { line: 2, .. })));
        let trace = StepTrace { steps: vec![], link_work: vec![4, 0], node_work: vec![0; 4] };
        assert!(collect(&net, "L 10 4", Some(&trace)).is_ok());
        assert!(matches!(collect(&net, "L 10 5", Some(&trace)), Err(LoadError::TraceMismatch { .. })));
    }

    #[test]
    fn domain_work_splits_links() {
        let net = star();
        let prof = collect(&net, "L 10 4\nL 11 6\nN 1 3\n", None).unwrap();
        let d = domain_work(&net, &prof, &[0, 1, 1, 1], 2);
        assert_eq!(d, vec![8.0, 5.0]);
    }
}
