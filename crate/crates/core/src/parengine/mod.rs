//! Domain-decomposed execution of the traffic automaton.
//!
//! Every node belongs to one domain. A link whose end nodes share a domain
//! belongs to it whole; any other link is cut in the middle. The upstream
//! domain owns cells `[0, n/2)`, the downstream domain owns the rest, and each
//! side keeps a read-only mirror of the [`INTERACTION_RANGE`] remote cells
//! nearest the cut. Node logic stays with the node's domain because both
//! halves are at least one interaction range long.
//!
//! Each time step every domain runs the lane-change sub-step, exchanges
//! boundary strips with all neighbours, runs the move sub-step, then
//! exchanges strips again together with the vehicles that crossed a cut.
//! Results are identical to a single-domain run for any partition.

mod cluster;
mod message;
mod trace;
mod transport;

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;
use std::time::Instant;

use crate::ca::{CaConfig, Domain, LinkState, Migrant, MoveReport, Occupant};
use crate::net::{Network, Plan, INTERACTION_RANGE};
use crate::partition::Partition;

pub use cluster::{run, Cluster, RunOptions, RunSummary};
pub use message::{BoundaryMessage, Phase, Strip, WIRE_VERSION};
pub use trace::{write_load_file, DomainStep, StepRecord, StepTrace};
pub use transport::{connect, Endpoint, TransportKind, RECV_TIMEOUT};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("link {link} has {cells} cells; links cut by the partition need at least {min}", min = 2 * INTERACTION_RANGE)]
    ShortSplitLink { link: u64, cells: u32 },
    #[error("partition does not match the network: {0}")]
    PartitionMismatch(String),
    #[error("plan for vehicle {vehicle}: {msg}")]
    BadPlan { vehicle: u64, msg: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("undecodable message: {0}")]
    Decode(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("domain {domain} expected step {expected} {phase:?} but domain {peer} sent step {got}")]
    ClockDivergence { domain: usize, peer: usize, expected: u32, got: u32, phase: Phase },
    #[error("worker for domain {0} panicked")]
    WorkerPanic(usize),
}

impl EngineError {
    pub fn is_input_error(&self) -> bool {
        matches!(self, Self::ShortSplitLink { .. } | Self::PartitionMismatch(_) | Self::BadPlan { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Half {
    Upstream,
    Downstream,
}

/// One domain's share of a cut link.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitLinkHalf {
    pub link: usize,
    pub half: Half,
    /// Domain owning the other half.
    pub peer: usize,
    pub owned: Range<u32>,
    /// Remote cells kept up to date by the peer.
    pub mirror: Range<u32>,
}

impl SplitLinkHalf {
    /// Owned cells the peer mirrors.
    pub fn exported(&self) -> Range<u32> {
        let w = INTERACTION_RANGE as u32;
        match self.half {
            Half::Upstream => self.owned.end - w..self.owned.end,
            Half::Downstream => self.owned.start..self.owned.start + w,
        }
    }
}

/// Cut position of a split link with `cells` cells.
pub fn cut_point(cells: u32) -> u32 {
    cells / 2
}

/// Message and byte counts of the step exchanges (setup excluded).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Traffic {
    pub messages: u64,
    pub bytes: u64,
}

impl std::ops::AddAssign for Traffic {
    fn add_assign(&mut self, o: Self) {
        self.messages += o.messages;
        self.bytes += o.bytes;
    }
}

/// One domain of a decomposed simulation together with its boundary
/// bookkeeping. Drive it through [`Cluster`] or [`run`].
pub struct DomainWorker {
    index: usize,
    domain: Domain,
    nodes: Vec<usize>,
    halves: Vec<SplitLinkHalf>,
    neighbors: Vec<usize>,
    /// Peer owning the downstream half, for links where this domain owns
    /// the upstream half.
    downstream_peer: HashMap<usize, usize>,
    step: u32,
    outbox: Vec<Migrant>,
    sent: Vec<Migrant>,
    traffic: Traffic,
    compute_us: u64,
}

/// Build one worker per domain. Plans go to the domain owning their entry
/// cell; vehicles departing at time 0 are placed before the first exchange.
pub fn decompose(
    net: &Arc<Network>,
    part: &Partition,
    plans: Vec<Plan>,
    cfg: &CaConfig,
) -> Result<Vec<DomainWorker>, EngineError> {
    if part.assignment().len() != net.node_count() {
        return Err(EngineError::PartitionMismatch(format!(
            "{} nodes assigned, network has {}",
            part.assignment().len(),
            net.node_count()
        )));
    }
    let p = part.p();
    let w = INTERACTION_RANGE as u32;
    let mut links: Vec<Vec<Option<LinkState>>> = vec![vec![None; net.link_count()]; p];
    let mut halves: Vec<Vec<SplitLinkHalf>> = vec![Vec::new(); p];
    for (ix, l) in net.links().iter().enumerate() {
        let (a, b) = (part.domain_of(l.from), part.domain_of(l.to));
        if a == b {
            links[a][ix] = Some(LinkState::new(l.lanes, l.cells, 0..l.cells));
            continue;
        }
        let cut = cut_point(l.cells);
        if cut < w || l.cells - cut < w {
            return Err(EngineError::ShortSplitLink { link: l.id, cells: l.cells });
        }
        links[a][ix] = Some(LinkState::new(l.lanes, l.cells, 0..cut));
        links[b][ix] = Some(LinkState::new(l.lanes, l.cells, cut..l.cells));
        halves[a].push(SplitLinkHalf { link: ix, half: Half::Upstream, peer: b, owned: 0..cut, mirror: cut..cut + w });
        halves[b].push(SplitLinkHalf {
            link: ix,
            half: Half::Downstream,
            peer: a,
            owned: cut..l.cells,
            mirror: cut - w..cut,
        });
    }

    let mut domain_plans: Vec<Vec<Plan>> = vec![Vec::new(); p];
    for plan in plans {
        net.check_plan(&plan).map_err(|e| EngineError::BadPlan { vehicle: plan.vehicle_id, msg: e })?;
        let first = plan.route[0];
        let d = links.iter().position(|ls| ls[first].as_ref().is_some_and(|s| s.owns(plan.entry_cell)));
        let d = d.ok_or_else(|| EngineError::BadPlan { vehicle: plan.vehicle_id, msg: "entry cell is owned by no domain".into() })?;
        domain_plans[d].push(plan);
    }

    let mut workers = Vec::with_capacity(p);
    for (d, ((ls, hs), plans)) in links.into_iter().zip(halves).zip(domain_plans).enumerate() {
        let owned_nodes: Vec<bool> = part.assignment().iter().map(|&x| x == d).collect();
        let nodes = (0..net.node_count()).filter(|&n| owned_nodes[n]).collect();
        let mut neighbors: Vec<usize> = hs.iter().map(|h| h.peer).collect();
        neighbors.sort_unstable();
        neighbors.dedup();
        let downstream_peer = hs.iter().filter(|h| h.half == Half::Upstream).map(|h| (h.link, h.peer)).collect();
        workers.push(DomainWorker {
            index: d,
            domain: Domain::from_parts(net.clone(), cfg.clone(), ls, owned_nodes, plans),
            nodes,
            halves: hs,
            neighbors,
            downstream_peer,
            step: 0,
            outbox: Vec::new(),
            sent: Vec::new(),
            traffic: Traffic::default(),
            compute_us: 0,
        });
    }
    Ok(workers)
}

impl DomainWorker {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_mut(&mut self) -> &mut Domain {
        &mut self.domain
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Split-link halves, ordered by link.
    pub fn halves(&self) -> &[SplitLinkHalf] {
        &self.halves
    }

    /// Neighbouring domains in ascending order.
    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn traffic(&self) -> Traffic {
        self.traffic
    }

    /// Time spent in the sub-steps of the most recent step.
    pub fn compute_us(&self) -> u64 {
        self.compute_us
    }

    pub(crate) fn lane_change(&mut self) {
        let t0 = Instant::now();
        self.domain.lane_change_substep();
        self.compute_us = t0.elapsed().as_micros() as u64;
    }

    pub(crate) fn move_vehicles(&mut self) -> MoveReport {
        let t0 = Instant::now();
        let mut report = self.domain.move_substep();
        self.outbox = std::mem::take(&mut report.migrants);
        self.compute_us += t0.elapsed().as_micros() as u64;
        report
    }

    fn message(&self, to: usize, phase: Phase) -> BoundaryMessage {
        let mut strips = Vec::new();
        for h in self.halves.iter().filter(|h| h.peer == to) {
            let ls = self.domain.link_state(h.link).expect("split link half without state");
            for lane in 0..ls.lane_count() {
                let r = h.exported();
                strips.push(Strip { link: h.link, lane, start: r.start, cells: ls.strip(lane, r) });
            }
        }
        let migrants = if phase == Phase::Move {
            self.outbox.iter().filter(|m| self.downstream_peer.get(&m.link) == Some(&to)).cloned().collect()
        } else {
            Vec::new()
        };
        BoundaryMessage { sender: self.index, receiver: to, step: self.step, phase, strips, migrants }
    }

    pub(crate) fn send_boundary(&mut self, ep: &mut dyn Endpoint, phase: Phase) -> Result<(), EngineError> {
        if phase == Phase::Move {
            for m in &self.outbox {
                if !self.downstream_peer.contains_key(&m.link) {
                    return Err(EngineError::Protocol(format!(
                        "domain {}: vehicle {} left the domain on link {} it does not send downstream",
                        self.index, m.id, m.link
                    )));
                }
            }
        }
        for i in 0..self.neighbors.len() {
            let to = self.neighbors[i];
            let bytes = self.message(to, phase).encode();
            if phase != Phase::Setup {
                self.traffic += Traffic { messages: 1, bytes: bytes.len() as u64 };
            }
            ep.send(to, bytes)?;
        }
        if phase == Phase::Move {
            self.sent = std::mem::take(&mut self.outbox);
        }
        Ok(())
    }

    pub(crate) fn receive_boundary(&mut self, ep: &mut dyn Endpoint, phase: Phase) -> Result<(), EngineError> {
        for i in 0..self.neighbors.len() {
            let from = self.neighbors[i];
            let msg = BoundaryMessage::decode(&ep.recv(from)?)?;
            self.apply(from, phase, msg)?;
        }
        // The peer built its strips before placing the vehicles sent to it.
        for m in std::mem::take(&mut self.sent) {
            let ls = self.domain.link_state_mut(m.link).expect("sent migrant from unknown link");
            ls.set(m.lane, m.cell, Some(Occupant { id: m.id, velocity: m.velocity }));
        }
        if phase == Phase::Move {
            self.step += 1;
        }
        Ok(())
    }

    fn apply(&mut self, from: usize, phase: Phase, msg: BoundaryMessage) -> Result<(), EngineError> {
        let me = self.index;
        if msg.sender != from || msg.receiver != me {
            return Err(EngineError::Protocol(format!(
                "domain {me} got a message from {} to {} on the channel from {from}",
                msg.sender, msg.receiver
            )));
        }
        if msg.step != self.step || msg.phase != phase {
            return Err(EngineError::ClockDivergence {
                domain: me,
                peer: from,
                expected: self.step,
                got: msg.step,
                phase: msg.phase,
            });
        }
        for s in msg.strips {
            let h = self.halves.iter().find(|h| h.link == s.link && h.peer == from);
            let ok = h.is_some_and(|h| h.mirror.start == s.start && h.mirror.len() == s.cells.len());
            let ls = self.domain.link_state_mut(s.link).filter(|ls| ok && s.lane < ls.lane_count());
            let ls = ls.ok_or_else(|| {
                EngineError::Protocol(format!("domain {me}: unexpected strip for link {} from domain {from}", s.link))
            })?;
            ls.write_strip(s.lane, s.start, &s.cells);
        }
        for m in msg.migrants {
            let free = self.domain.link_state(m.link).is_some_and(|ls| {
                ls.owns(m.cell) && m.lane < ls.lane_count() && ls.get(m.lane, m.cell).is_none()
            });
            if !free {
                return Err(EngineError::Protocol(format!(
                    "domain {me}: vehicle {} from domain {from} cannot be placed at link {} lane {} cell {}",
                    m.id, m.link, m.lane, m.cell
                )));
            }
            self.domain.accept_migrant(m);
        }
        Ok(())
    }

    /// Whether every mirrored cell matches `truth` (the owner's cells).
    pub fn mirrors_match(&self, owner_state: impl Fn(usize, u8, u32) -> Option<Occupant>) -> bool {
        self.halves.iter().all(|h| {
            let ls = self.domain.link_state(h.link).unwrap();
            (0..ls.lane_count()).all(|lane| h.mirror.clone().all(|c| ls.get(lane, c) == owner_state(h.link, lane, c)))
        })
    }
}

#[cfg(test)]
mod tests;
