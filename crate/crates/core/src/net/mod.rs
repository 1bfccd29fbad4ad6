//! Road network model.
//!
//! Links are directed and discretised into cells of [`CELL_LENGTH_M`]; a
//! link with several lanes has one cell row per lane. Nodes carry planar
//! coordinates, which the spatial partitioner and the turn classifier use.
//!
//! Internally everything is addressed by dense indices (`usize`). The
//! external integer ids from network and plan files are kept on [`Node`] and
//! [`Link`] for output.

mod format;
mod generate;
mod trips;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::RangeInclusive;

pub use format::{load_network, load_plans, serialize_network, serialize_plans};
pub use generate::{generate_grid, generate_ring, ring_builder, ring_route};
pub use trips::{concentrated_trips, random_trips, shortest_route};

/// Length of one cell: the space a car occupies in a jam.
pub const CELL_LENGTH_M: f64 = 7.5;

/// Interaction range of every driving rule, in cells.
pub const INTERACTION_RANGE: usize = 5;

/// Default and upper bound for a link's maximum velocity (cells per step).
pub const DEFAULT_V_MAX: u8 = 5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NetError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: link {link} references unknown node {node}")]
    DanglingNode { line: usize, link: u64, node: u64 },
    #[error("line {line}: link {link} has non-positive length {length}")]
    NonPositiveLength { line: usize, link: u64, length: f64 },
    #[error("line {line}: duplicate {kind} id {id}")]
    DuplicateId { line: usize, kind: &'static str, id: u64 },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    #[error("line {line}: plan for vehicle {vehicle}: {msg}")]
    BadPlan { line: usize, vehicle: u64, msg: String },
}

impl NetError {
    fn invalid(line: usize, msg: impl Into<String>) -> Self {
        NetError::Invalid { line, msg: msg.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub id: u64,
    /// Index of the upstream node.
    pub from: usize,
    /// Index of the downstream node.
    pub to: usize,
    pub length: f64,
    pub lanes: u8,
    pub v_max: u8,
    pub cells: u32,
}

/// Intersection control for one (incoming link, outgoing link) movement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Uncontrolled,
    /// Gap acceptance against priority approaches.
    Yield,
    /// Full stop at the stop line, then gap acceptance.
    Stop,
    /// Fixed-time signal; each cycle starts with the red phase.
    Signal { red_s: u32, green_s: u32 },
}

impl Control {
    /// Whether the movement is red at `time` (seconds since simulation start).
    pub fn is_red(&self, time: u32) -> bool {
        match *self {
            Control::Signal { red_s, green_s } => {
                let cycle = red_s + green_s;
                cycle > 0 && time % cycle < red_s
            }
            _ => false,
        }
    }

    /// Movements with right of way are checked first when several vehicles
    /// compete for the same downstream lane.
    pub fn priority_class(&self) -> u8 {
        match self {
            Control::Uncontrolled | Control::Signal { .. } => 0,
            Control::Yield | Control::Stop => 1,
        }
    }

    pub fn needs_gap(&self) -> bool {
        matches!(self, Control::Yield | Control::Stop)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TurnDir {
    Left,
    Straight,
    Right,
}

/// A permitted movement from an incoming link.
#[derive(Clone, Debug, PartialEq)]
pub struct Exit {
    pub to_link: usize,
    pub control: Control,
    pub dir: TurnDir,
    /// Lanes of the incoming link from which the movement may be made.
    pub lanes: RangeInclusive<u8>,
}

/// Departure record of one vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub vehicle_id: u64,
    pub departure: u32,
    pub entry_cell: u32,
    /// Link indices; consecutive links share a node.
    pub route: Vec<usize>,
}

/// Validated, immutable road network.
#[derive(Clone, Debug)]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    node_index: HashMap<u64, usize>,
    link_index: HashMap<u64, usize>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
    /// Explicit turn table; nodes without entries allow every movement.
    turns: BTreeMap<(usize, usize), Control>,
    explicit_nodes: BTreeSet<usize>,
    exits: Vec<Vec<Exit>>,
    /// Incoming links that have at least one uncontrolled movement, per node.
    priority_approaches: Vec<Vec<usize>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.links == other.links && self.turns == other.turns
    }
}

/// Number of cells for a link length: rounded to nearest, at least one.
pub fn cells_for_length(length: f64) -> u32 {
    ((length / CELL_LENGTH_M).round() as u32).max(1)
}

/// Incremental construction with id-based references.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    nodes: Vec<Node>,
    links: Vec<(u64, u64, u64, f64, u8, u8, usize)>,
    turns: Vec<(u64, u64, u64, Control, usize)>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, id: u64, x: f64, y: f64) -> &mut Self {
        self.nodes.push(Node { id, x, y });
        self
    }

    pub fn link(&mut self, id: u64, from: u64, to: u64, length: f64, lanes: u8, v_max: u8) -> &mut Self {
        self.links.push((id, from, to, length, lanes, v_max, 0));
        self
    }

    pub fn turn(&mut self, node: u64, in_link: u64, out_link: u64, control: Control) -> &mut Self {
        self.turns.push((node, in_link, out_link, control, 0));
        self
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn link_at(&mut self, line: usize, id: u64, from: u64, to: u64, length: f64, lanes: u8, v_max: u8) {
        self.links.push((id, from, to, length, lanes, v_max, line));
    }

    pub(crate) fn turn_at(&mut self, line: usize, node: u64, in_link: u64, out_link: u64, control: Control) {
        self.turns.push((node, in_link, out_link, control, line));
    }

    pub fn build(&self) -> Result<Network, NetError> {
        let mut node_index = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !(n.x.is_finite() && n.y.is_finite()) {
                return Err(NetError::invalid(0, format!("node {} has non-finite coordinates", n.id)));
            }
            if node_index.insert(n.id, i).is_some() {
                return Err(NetError::DuplicateId { line: 0, kind: "node", id: n.id });
            }
        }
        let mut links = Vec::with_capacity(self.links.len());
        let mut link_index = HashMap::new();
        for &(id, from, to, length, lanes, v_max, line) in &self.links {
            let from_ix = *node_index.get(&from).ok_or(NetError::DanglingNode { line, link: id, node: from })?;
            let to_ix = *node_index.get(&to).ok_or(NetError::DanglingNode { line, link: id, node: to })?;
            if length <= 0.0 || !length.is_finite() {
                return Err(NetError::NonPositiveLength { line, link: id, length });
            }
            if from_ix == to_ix {
                return Err(NetError::invalid(line, format!("link {id} starts and ends at node {from}")));
            }
            if lanes == 0 {
                return Err(NetError::invalid(line, format!("link {id} has no lanes")));
            }
            if v_max == 0 || v_max as usize > INTERACTION_RANGE {
                return Err(NetError::invalid(
                    line,
                    format!("link {id}: v_max must be in 1..={INTERACTION_RANGE}, got {v_max}"),
                ));
            }
            if link_index.insert(id, links.len()).is_some() {
                return Err(NetError::DuplicateId { line, kind: "link", id });
            }
            links.push(Link { id, from: from_ix, to: to_ix, length, lanes, v_max, cells: cells_for_length(length) });
        }

        let n = self.nodes.len();
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for (i, l) in links.iter().enumerate() {
            outgoing[l.from].push(i);
            incoming[l.to].push(i);
        }

        let mut turns = BTreeMap::new();
        let mut explicit_nodes = BTreeSet::new();
        for &(node, in_link, out_link, control, line) in &self.turns {
            let node_ix = *node_index
                .get(&node)
                .ok_or_else(|| NetError::invalid(line, format!("turn at unknown node {node}")))?;
            let in_ix = *link_index
                .get(&in_link)
                .ok_or_else(|| NetError::invalid(line, format!("turn references unknown link {in_link}")))?;
            let out_ix = *link_index
                .get(&out_link)
                .ok_or_else(|| NetError::invalid(line, format!("turn references unknown link {out_link}")))?;
            if links[in_ix].to != node_ix || links[out_ix].from != node_ix {
                return Err(NetError::invalid(
                    line,
                    format!("turn {in_link}->{out_link} is not incident to node {node}"),
                ));
            }
            if let Control::Signal { red_s, green_s } = control {
                if red_s + green_s == 0 {
                    return Err(NetError::invalid(line, "signal cycle has zero length"));
                }
            }
            turns.insert((in_ix, out_ix), control);
            explicit_nodes.insert(node_ix);
        }

        let mut net = Network {
            nodes: self.nodes.clone(),
            links,
            node_index,
            link_index,
            incoming,
            outgoing,
            turns,
            explicit_nodes,
            exits: Vec::new(),
            priority_approaches: Vec::new(),
        };
        net.exits = (0..net.links.len()).map(|l| net.compute_exits(l)).collect();
        net.priority_approaches = (0..n)
            .map(|node| {
                net.incoming[node]
                    .iter()
                    .copied()
                    .filter(|&l| net.exits[l].iter().any(|e| e.control == Control::Uncontrolled))
                    .collect()
            })
            .collect();
        Ok(net)
    }
}

impl Network {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, ix: usize) -> &Node {
        &self.nodes[ix]
    }

    pub fn link(&self, ix: usize) -> &Link {
        &self.links[ix]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node_by_id(&self, id: u64) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub fn link_by_id(&self, id: u64) -> Option<usize> {
        self.link_index.get(&id).copied()
    }

    pub fn incoming(&self, node: usize) -> &[usize] {
        &self.incoming[node]
    }

    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    /// Control of the movement `in_link -> out_link`, or `None` when the
    /// movement is not permitted.
    pub fn turn(&self, in_link: usize, out_link: usize) -> Option<Control> {
        let node = self.links[in_link].to;
        if self.links[out_link].from != node {
            return None;
        }
        if self.explicit_nodes.contains(&node) {
            self.turns.get(&(in_link, out_link)).copied()
        } else {
            Some(Control::Uncontrolled)
        }
    }

    /// Explicit turn table entries, as (in, out, control).
    pub fn explicit_turns(&self) -> impl Iterator<Item = (usize, usize, Control)> + '_ {
        self.turns.iter().map(|(&(i, o), &c)| (i, o, c))
    }

    pub fn exits(&self, link: usize) -> &[Exit] {
        &self.exits[link]
    }

    pub fn exit(&self, link: usize, to_link: usize) -> Option<&Exit> {
        self.exits[link].iter().find(|e| e.to_link == to_link)
    }

    /// Incoming links at `node` carrying at least one uncontrolled movement.
    pub fn priority_approaches(&self, node: usize) -> &[usize] {
        &self.priority_approaches[node]
    }

    /// Geometric turn direction of `in_link -> out_link`.
    pub fn turn_dir(&self, in_link: usize, out_link: usize) -> TurnDir {
        let a = &self.links[in_link];
        let b = &self.links[out_link];
        let (ax, ay) = (self.nodes[a.to].x - self.nodes[a.from].x, self.nodes[a.to].y - self.nodes[a.from].y);
        let (bx, by) = (self.nodes[b.to].x - self.nodes[b.from].x, self.nodes[b.to].y - self.nodes[b.from].y);
        let cross = ax * by - ay * bx;
        let dot = ax * bx + ay * by;
        if cross == 0.0 && dot == 0.0 {
            return TurnDir::Straight;
        }
        let angle = cross.atan2(dot).to_degrees();
        if angle.abs() < 45.0 {
            TurnDir::Straight
        } else if angle > 0.0 || angle.abs() >= 179.999 {
            // U-turns count as left turns.
            TurnDir::Left
        } else {
            TurnDir::Right
        }
    }

    fn compute_exits(&self, link: usize) -> Vec<Exit> {
        let l = &self.links[link];
        let permitted: Vec<(usize, Control)> = self.outgoing[l.to]
            .iter()
            .filter_map(|&o| self.turn(link, o).map(|c| (o, c)))
            .collect();
        let top = l.lanes - 1;
        let restrict = l.lanes > 1 && permitted.len() > 1;
        permitted
            .into_iter()
            .map(|(o, control)| {
                let dir = self.turn_dir(link, o);
                let lanes = match (restrict, dir) {
                    (true, TurnDir::Left) => top..=top,
                    (true, TurnDir::Right) => 0..=0,
                    _ => 0..=top,
                };
                Exit { to_link: o, control, dir, lanes }
            })
            .collect()
    }

    /// Check a plan against the network: links exist, consecutive links are
    /// joined by a permitted movement, and the entry cell lies on the first
    /// link.
    pub fn check_plan(&self, plan: &Plan) -> Result<(), String> {
        let first = *plan.route.first().ok_or("empty route")?;
        if first >= self.links.len() {
            return Err(format!("unknown link index {first}"));
        }
        if plan.entry_cell >= self.links[first].cells {
            return Err(format!(
                "entry cell {} outside link {} ({} cells)",
                plan.entry_cell, self.links[first].id, self.links[first].cells
            ));
        }
        for w in plan.route.windows(2) {
            if w[1] >= self.links.len() {
                return Err(format!("unknown link index {}", w[1]));
            }
            if self.turn(w[0], w[1]).is_none() {
                return Err(format!(
                    "no permitted movement from link {} to link {}",
                    self.links[w[0]].id, self.links[w[1]].id
                ));
            }
        }
        Ok(())
    }

    /// Whether every node can reach every other node.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 {
            return true;
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(v) = stack.pop() {
                let adj = if forward { &self.outgoing[v] } else { &self.incoming[v] };
                for &l in adj {
                    let w = if forward { self.links[l].to } else { self.links[l].from };
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Sum over links of cells times lanes.
    pub fn total_lane_cells(&self) -> u64 {
        self.links.iter().map(|l| l.cells as u64 * l.lanes as u64).sum()
    }
}
