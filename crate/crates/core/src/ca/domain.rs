use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use super::rules::{desperation_gaps, gap_acceptance, DESPERATION_CELLS};
use super::snapshot::{CellRecord, Snapshot};
use super::{CaConfig, Occupant, SimClock, SubStep, Vehicle, VehicleId};
use crate::net::{Control, Network, Plan, INTERACTION_RANGE};
use crate::rng::{uniform, Stream};

/// Cell rows of one link as seen by one domain. Cells outside `owned` are
/// either mirrors of a remote half or unused.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkState {
    lanes: Vec<Vec<Option<Occupant>>>,
    owned: Range<u32>,
}

impl LinkState {
    pub fn new(lanes: u8, cells: u32, owned: Range<u32>) -> Self {
        assert!(owned.end <= cells);
        Self { lanes: vec![vec![None; cells as usize]; lanes as usize], owned }
    }

    pub fn owned(&self) -> Range<u32> {
        self.owned.clone()
    }

    pub fn owns(&self, cell: u32) -> bool {
        self.owned.contains(&cell)
    }

    pub fn lane_count(&self) -> u8 {
        self.lanes.len() as u8
    }

    pub fn cell_count(&self) -> u32 {
        self.lanes.first().map_or(0, |l| l.len() as u32)
    }

    #[inline]
    pub fn get(&self, lane: u8, cell: u32) -> Option<Occupant> {
        self.lanes[lane as usize][cell as usize]
    }

    #[inline]
    fn occupied(&self, lane: u8, cell: u32) -> bool {
        self.lanes[lane as usize][cell as usize].is_some()
    }

    pub fn set(&mut self, lane: u8, cell: u32, occ: Option<Occupant>) {
        self.lanes[lane as usize][cell as usize] = occ;
    }

    pub fn lane(&self, lane: u8) -> &[Option<Occupant>] {
        &self.lanes[lane as usize]
    }

    /// Copy of `range` in one lane.
    pub fn strip(&self, lane: u8, range: Range<u32>) -> Vec<Option<Occupant>> {
        self.lanes[lane as usize][range.start as usize..range.end as usize].to_vec()
    }

    /// Overwrite cells starting at `start` in one lane.
    pub fn write_strip(&mut self, lane: u8, start: u32, cells: &[Option<Occupant>]) {
        let s = start as usize;
        self.lanes[lane as usize][s..s + cells.len()].copy_from_slice(cells);
    }

    fn clear_owned(&mut self) {
        let r = self.owned.start as usize..self.owned.end as usize;
        for lane in &mut self.lanes {
            lane[r.clone()].fill(None);
        }
    }
}

#[derive(Clone, Debug)]
struct VehicleState {
    route: Arc<[usize]>,
    cursor: usize,
    departed: u32,
}

/// A vehicle that moved into a cell owned by another domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Migrant {
    pub id: VehicleId,
    pub velocity: u8,
    pub link: usize,
    pub lane: u8,
    pub cell: u32,
    pub route: Arc<[usize]>,
    pub cursor: u32,
    pub departed: u32,
}

/// Counts node crossings. `from_link` and `lane` (lane on the incoming
/// link) restrict which movements are counted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Detector {
    pub node: usize,
    pub from_link: Option<usize>,
    pub lane: Option<u8>,
}

impl Detector {
    pub fn node(node: usize) -> Self {
        Self { node, from_link: None, lane: None }
    }

    fn matches(&self, node: usize, from: usize, lane: u8) -> bool {
        self.node == node && self.from_link.is_none_or(|l| l == from) && self.lane.is_none_or(|l| l == lane)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TripCounters {
    /// Plans whose vehicle has been placed on the grid.
    pub injected: u64,
    pub arrived: u64,
    /// Plans still waiting for their departure or a free entry cell.
    pub pending: u64,
    /// Vehicles currently in owned cells.
    pub present: u64,
    /// Sum over arrived vehicles of arrival time minus injection time.
    pub travel_time: u64,
}

#[derive(Clone, Debug, Default)]
pub struct MoveReport {
    /// Vehicles that left this domain's cells; the caller hands them to the
    /// owning domain.
    pub migrants: Vec<Migrant>,
    pub arrived: u32,
    pub injected: u32,
    pub crossings: u32,
}

#[derive(Clone, Copy, Debug)]
enum Outcome {
    Stay(u32),
    Cross { to: usize, lane: u8, cell: u32, class: u8 },
    Exit,
}

#[derive(Clone, Copy, Debug)]
struct Decision {
    link: usize,
    lane: u8,
    cell: u32,
    id: VehicleId,
    velocity: u8,
    outcome: Outcome,
}

/// State of one domain: owned cell ranges, mirrored cells, the vehicles in
/// owned cells, and plans whose entry cell the domain owns.
pub struct Domain {
    net: Arc<Network>,
    cfg: CaConfig,
    clock: SimClock,
    links: Vec<Option<LinkState>>,
    owned_links: Vec<usize>,
    owned_nodes: Vec<bool>,
    vehicles: HashMap<VehicleId, VehicleState>,
    pending: Vec<Plan>,
    detectors: Vec<Detector>,
    detector_hits: Vec<u64>,
    link_work: Vec<u64>,
    node_work: Vec<u64>,
    counters: TripCounters,
}

impl Domain {
    /// Domain owning the whole network.
    pub fn whole(net: Arc<Network>, cfg: CaConfig, plans: Vec<Plan>) -> Self {
        let links = net.links().iter().map(|l| Some(LinkState::new(l.lanes, l.cells, 0..l.cells))).collect();
        let nodes = vec![true; net.node_count()];
        Self::from_parts(net, cfg, links, nodes, plans)
    }

    /// Domain with an explicit layout. `links[l]` is `None` for links the
    /// domain neither owns nor mirrors. Plans must start in owned cells.
    /// Vehicles departing at time 0 are placed immediately.
    pub fn from_parts(
        net: Arc<Network>,
        cfg: CaConfig,
        links: Vec<Option<LinkState>>,
        owned_nodes: Vec<bool>,
        mut plans: Vec<Plan>,
    ) -> Self {
        assert_eq!(links.len(), net.link_count());
        assert_eq!(owned_nodes.len(), net.node_count());
        assert!((cfg.required_gap as usize) <= INTERACTION_RANGE);
        plans.sort_by_key(|p| (p.departure, p.vehicle_id));
        for p in &plans {
            let ls = links[p.route[0]].as_ref().expect("plan starts on a link absent from the domain");
            assert!(ls.owns(p.entry_cell), "plan {} enters outside the domain", p.vehicle_id);
        }
        let owned_links = (0..links.len())
            .filter(|&l| links[l].as_ref().is_some_and(|s| !s.owned.is_empty()))
            .collect();
        let mut d = Self {
            link_work: vec![0; net.link_count()],
            node_work: vec![0; net.node_count()],
            net,
            cfg,
            clock: SimClock::start(),
            links,
            owned_links,
            owned_nodes,
            vehicles: HashMap::new(),
            pending: plans,
            detectors: Vec::new(),
            detector_hits: Vec::new(),
            counters: TripCounters::default(),
        };
        d.inject_initial();
        d
    }

    pub fn set_detectors(&mut self, detectors: Vec<Detector>) {
        self.detector_hits = vec![0; detectors.len()];
        self.detectors = detectors;
    }

    pub fn detector_hits(&self) -> &[u64] {
        &self.detector_hits
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.net
    }

    pub fn config(&self) -> &CaConfig {
        &self.cfg
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn link_state(&self, link: usize) -> Option<&LinkState> {
        self.links[link].as_ref()
    }

    pub fn link_state_mut(&mut self, link: usize) -> Option<&mut LinkState> {
        self.links[link].as_mut()
    }

    pub fn owns_node(&self, node: usize) -> bool {
        self.owned_nodes[node]
    }

    /// Links with at least one owned cell.
    pub fn owned_links(&self) -> &[usize] {
        &self.owned_links
    }

    /// Vehicle updates performed per link so far, both sub-steps.
    pub fn link_work(&self) -> &[u64] {
        &self.link_work
    }

    /// Crossing evaluations per node so far.
    pub fn node_work(&self) -> &[u64] {
        &self.node_work
    }

    pub fn total_work(&self) -> u64 {
        self.link_work.iter().sum::<u64>() + self.node_work.iter().sum::<u64>()
    }

    pub fn counters(&self) -> TripCounters {
        TripCounters { pending: self.pending.len() as u64, present: self.vehicles.len() as u64, ..self.counters }
    }

    fn cell_occupied(&self, link: usize, lane: u8, cell: u32) -> bool {
        self.links[link].as_ref().expect("read from a link absent from the domain").occupied(lane, cell)
    }

    /// Empty cells ahead of `cell` in `lane`, capped at `cap`; the link end
    /// counts as open road.
    fn gap_forward(&self, link: usize, lane: u8, cell: u32, cap: u8) -> u8 {
        let n = self.net.link(link).cells;
        for k in 1..=cap {
            let c = cell + k as u32;
            if c >= n {
                return cap;
            }
            if self.cell_occupied(link, lane, c) {
                return k - 1;
            }
        }
        cap
    }

    /// Empty cells behind `cell` in `lane`, capped at `cap`; the link start
    /// counts as open road.
    fn gap_backward(&self, link: usize, lane: u8, cell: u32, cap: u8) -> u8 {
        for k in 1..=cap {
            if (k as u32) > cell {
                return cap;
            }
            if self.cell_occupied(link, lane, cell - k as u32) {
                return k - 1;
            }
        }
        cap
    }

    /// Lanes of `link` from which the vehicle's next movement is allowed.
    fn allowed_lanes(&self, link: usize, v: &VehicleState) -> Option<std::ops::RangeInclusive<u8>> {
        let next = *v.route.get(v.cursor + 1)?;
        self.net.exit(link, next).map(|e| e.lanes.clone())
    }

    fn lane_target(&self, link: usize, lane: u8, cell: u32, occ: Occupant, upward: bool) -> Option<u8> {
        let l = self.net.link(link);
        let target = if upward {
            (lane + 1 < l.lanes).then_some(lane + 1)?
        } else {
            lane.checked_sub(1)?
        };
        if self.cell_occupied(link, target, cell) {
            return None;
        }
        let veh = &self.vehicles[&occ.id];
        let allowed = self.allowed_lanes(link, veh);
        let in_allowed = |ln: u8| allowed.as_ref().is_none_or(|r| r.contains(&ln));
        let dist = l.cells - 1 - cell;
        let v_max = l.v_max;
        if !in_allowed(lane) {
            let r = allowed.as_ref().expect("restricted lanes imply a next link");
            if (lane < *r.start()) != upward {
                return None;
            }
            let (need_f, need_b) = desperation_gaps(occ.velocity, v_max, dist);
            let fwd = self.gap_forward(link, target, cell, v_max);
            let back = self.gap_backward(link, target, cell, v_max);
            return (fwd >= need_f && back >= need_b).then_some(target);
        }
        if !in_allowed(target) && dist < DESPERATION_CELLS {
            return None;
        }
        let cur = self.gap_forward(link, lane, cell, v_max);
        if cur > occ.velocity {
            return None;
        }
        let ahead = self.gap_forward(link, target, cell, v_max);
        let back = self.gap_backward(link, target, cell, v_max);
        (ahead > cur && back >= v_max).then_some(target)
    }

    /// Sideways moves. Even steps move toward higher lane indices, odd
    /// steps toward lower ones, so two vehicles never target one cell.
    pub fn lane_change_substep(&mut self) {
        assert_eq!(self.clock.sub_step, SubStep::LaneChange, "lane change out of order");
        let upward = self.clock.time.is_multiple_of(2);
        let mut changes = Vec::new();
        for i in 0..self.owned_links.len() {
            let link = self.owned_links[i];
            let ls = self.links[link].as_ref().unwrap();
            let multi = ls.lane_count() > 1;
            let mut work = 0u64;
            for lane in 0..ls.lane_count() {
                for cell in ls.owned() {
                    if let Some(occ) = ls.get(lane, cell) {
                        work += 1;
                        if multi {
                            if let Some(target) = self.lane_target(link, lane, cell, occ, upward) {
                                changes.push((link, lane, cell, target, occ));
                            }
                        }
                    }
                }
            }
            self.link_work[link] += work;
        }
        for (link, lane, cell, target, occ) in changes {
            let ls = self.links[link].as_mut().unwrap();
            ls.set(lane, cell, None);
            ls.set(target, cell, Some(occ));
        }
        self.clock.sub_step = SubStep::Move;
    }

    /// Whether the movement `link -> out` may be made now from `lane`, and
    /// if so into which lane of `out` and with which priority class.
    fn turn_open(&self, link: usize, out: usize, lane: u8, cell: u32, prev_velocity: u8) -> Option<(u8, u8)> {
        let exit = self.net.exit(link, out)?;
        if !exit.lanes.contains(&lane) {
            return None;
        }
        let l = self.net.link(link);
        match exit.control {
            Control::Signal { .. } if exit.control.is_red(self.clock.time) => return None,
            Control::Stop if cell != l.cells - 1 || prev_velocity != 0 => return None,
            _ => {}
        }
        if exit.control.needs_gap() && !self.priority_gap_clear(link) {
            return None;
        }
        let to_lane = lane.min(self.net.link(out).lanes - 1);
        Some((to_lane, exit.control.priority_class()))
    }

    /// Gap acceptance against every priority approach other than `link`.
    fn priority_gap_clear(&self, link: usize) -> bool {
        let node = self.net.link(link).to;
        let need = self.cfg.required_gap as usize;
        self.net.priority_approaches(node).iter().filter(|&&p| p != link).all(|&p| {
            let pl = self.net.link(p);
            let ls = self.links[p].as_ref().expect("priority approach absent from node owner");
            (0..pl.lanes).all(|lane| {
                let window: Vec<bool> = (0..INTERACTION_RANGE as u32)
                    .take_while(|&k| k < pl.cells)
                    .map(|k| ls.occupied(lane, pl.cells - 1 - k))
                    .collect();
                gap_acceptance(&window, need)
            })
        })
    }

    fn decide(&mut self, link: usize, lane: u8, cell: u32, occ: Occupant) -> Decision {
        let t = self.clock.time;
        let l = self.net.link(link);
        let n = l.cells;
        let dist = n - 1 - cell;
        let veh = &self.vehicles[&occ.id];
        let last = veh.cursor + 1 == veh.route.len();
        let mut v = (occ.velocity + 1).min(l.v_max);
        let mut cross = None;
        let ls = self.links[link].as_ref().unwrap();
        let blocked = (1..=v as u32).take_while(|k| cell + k < n).find(|k| ls.occupied(lane, cell + k));
        if let Some(k) = blocked {
            v = v.min((k - 1) as u8);
        } else if v as u32 > dist && !last {
            let node = l.to;
            let out = veh.route[veh.cursor + 1];
            match self.turn_open(link, out, lane, cell, occ.velocity) {
                Some((to_lane, class)) => {
                    let o = self.net.link(out);
                    let os = self.links[out].as_ref().expect("outgoing link absent from node owner");
                    let free = (0..(INTERACTION_RANGE as u32).min(o.cells))
                        .take_while(|&c| !os.occupied(to_lane, c))
                        .count() as u32;
                    let reach = (dist + free).min(dist.max(o.v_max as u32));
                    v = v.min(reach as u8);
                    cross = Some((out, to_lane, class));
                }
                None => v = v.min(dist as u8),
            }
            self.node_work[node] += 1;
        }
        if v > 0 && uniform(self.cfg.seed, occ.id, t, Stream::Move) < self.cfg.p_brake {
            v -= 1;
        }
        let outcome = if (v as u32) <= dist {
            Outcome::Stay(cell + v as u32)
        } else if last {
            Outcome::Exit
        } else {
            let (to, to_lane, class) = cross.expect("crossing decided above");
            Outcome::Cross { to, lane: to_lane, cell: v as u32 - dist - 1, class }
        };
        Decision { link, lane, cell, id: occ.id, velocity: v, outcome }
    }

    /// Forward movement, node crossings, arrivals, then injection of
    /// vehicles departing by the next time step. Advances the clock.
    pub fn move_substep(&mut self) -> MoveReport {
        assert_eq!(self.clock.sub_step, SubStep::Move, "move out of order");
        let t = self.clock.time;
        let due = self.pending.partition_point(|p| p.departure <= t + 1);
        let windows: Vec<Vec<bool>> = self.pending[..due].iter().map(|p| self.entry_windows(p)).collect();

        let mut decisions = Vec::new();
        for i in 0..self.owned_links.len() {
            let link = self.owned_links[i];
            let ls = self.links[link].as_ref().unwrap();
            let mut occupants = Vec::new();
            for lane in 0..ls.lane_count() {
                for cell in ls.owned() {
                    if let Some(occ) = ls.get(lane, cell) {
                        occupants.push((lane, cell, occ));
                    }
                }
            }
            self.link_work[link] += occupants.len() as u64;
            for (lane, cell, occ) in occupants {
                decisions.push(self.decide(link, lane, cell, occ));
            }
        }
        self.resolve_conflicts(&mut decisions);

        let mut report = MoveReport::default();
        for &link in &self.owned_links {
            self.links[link].as_mut().unwrap().clear_owned();
        }
        for d in decisions {
            self.apply(d, &mut report);
        }
        self.clock = SimClock { time: t + 1, sub_step: SubStep::LaneChange };
        report.injected = self.inject(due, &windows);
        report
    }

    /// Among crossings into the same lane of the same link, the first by
    /// (priority class, incoming link, lane) proceeds; the others stop at
    /// the end of their link.
    fn resolve_conflicts(&self, decisions: &mut [Decision]) {
        let mut crossing: Vec<usize> =
            (0..decisions.len()).filter(|&i| matches!(decisions[i].outcome, Outcome::Cross { .. })).collect();
        let key = |d: &Decision| match d.outcome {
            Outcome::Cross { to, lane, class, .. } => (to, lane, class, d.link, d.lane),
            _ => unreachable!(),
        };
        crossing.sort_by_key(|&i| key(&decisions[i]));
        let mut prev: Option<(usize, u8)> = None;
        for i in crossing {
            let (to, lane, ..) = key(&decisions[i]);
            if prev == Some((to, lane)) {
                let d = &mut decisions[i];
                let end = self.net.link(d.link).cells - 1;
                d.velocity = (end - d.cell) as u8;
                d.outcome = Outcome::Stay(end);
            }
            prev = Some((to, lane));
        }
    }

    fn apply(&mut self, d: Decision, report: &mut MoveReport) {
        let occ = Occupant { id: d.id, velocity: d.velocity };
        match d.outcome {
            Outcome::Stay(cell) => {
                let ls = self.links[d.link].as_mut().unwrap();
                if ls.owns(cell) {
                    debug_assert!(ls.get(d.lane, cell).is_none(), "collision at link {} cell {cell}", d.link);
                    ls.set(d.lane, cell, Some(occ));
                } else {
                    let v = self.vehicles.remove(&d.id).unwrap();
                    report.migrants.push(Migrant {
                        id: d.id,
                        velocity: d.velocity,
                        link: d.link,
                        lane: d.lane,
                        cell,
                        route: v.route,
                        cursor: v.cursor as u32,
                        departed: v.departed,
                    });
                }
            }
            Outcome::Cross { to, lane, cell, .. } => {
                let node = self.net.link(d.link).to;
                for (k, det) in self.detectors.iter().enumerate() {
                    if det.matches(node, d.link, d.lane) {
                        self.detector_hits[k] += 1;
                    }
                }
                report.crossings += 1;
                self.vehicles.get_mut(&d.id).unwrap().cursor += 1;
                let ls = self.links[to].as_mut().unwrap();
                debug_assert!(ls.owns(cell) && ls.get(lane, cell).is_none());
                ls.set(lane, cell, Some(occ));
            }
            Outcome::Exit => {
                let v = self.vehicles.remove(&d.id).unwrap();
                self.counters.arrived += 1;
                self.counters.travel_time += (self.clock.time + 1 - v.departed) as u64;
                report.arrived += 1;
            }
        }
    }

    /// Per entry lane: whether the cells up to one interaction range behind
    /// the entry cell are empty before the move. Together with an empty
    /// entry cell after the move this keeps injection independent of the
    /// order in which domains apply migrations.
    fn entry_windows(&self, p: &Plan) -> Vec<bool> {
        let link = p.route[0];
        let ls = self.links[link].as_ref().unwrap();
        let lo = p.entry_cell.saturating_sub(INTERACTION_RANGE as u32);
        (0..ls.lane_count()).map(|lane| (lo..p.entry_cell).all(|c| !ls.occupied(lane, c))).collect()
    }

    fn place(&mut self, p: &Plan, lane: u8) {
        let ls = self.links[p.route[0]].as_mut().unwrap();
        ls.set(lane, p.entry_cell, Some(Occupant { id: p.vehicle_id, velocity: 0 }));
        let state = VehicleState { route: p.route.clone().into(), cursor: 0, departed: self.clock.time };
        self.vehicles.insert(p.vehicle_id, state);
        self.counters.injected += 1;
    }

    fn inject(&mut self, due: usize, windows: &[Vec<bool>]) -> u32 {
        let mut placed = vec![false; due];
        for i in 0..due {
            let p = &self.pending[i];
            let ls = self.links[p.route[0]].as_ref().unwrap();
            let lane = (0..ls.lane_count()).find(|&ln| windows[i][ln as usize] && !ls.occupied(ln, p.entry_cell));
            if let Some(lane) = lane {
                let p = p.clone();
                self.place(&p, lane);
                placed[i] = true;
            }
        }
        let mut ix = 0;
        self.pending.retain(|_| {
            let keep = ix >= due || !placed[ix];
            ix += 1;
            keep
        });
        placed.iter().filter(|&&b| b).count() as u32
    }

    fn inject_initial(&mut self) {
        let due = self.pending.partition_point(|p| p.departure == 0);
        let all_open: Vec<Vec<bool>> =
            self.pending[..due].iter().map(|p| vec![true; self.net.link(p.route[0]).lanes as usize]).collect();
        self.inject(due, &all_open);
    }

    /// Place a vehicle handed over by another domain.
    pub fn accept_migrant(&mut self, m: Migrant) {
        let ls = self.links[m.link].as_mut().expect("migrant for a link absent from the domain");
        assert!(ls.owns(m.cell), "migrant {} lands outside the domain", m.id);
        debug_assert!(ls.get(m.lane, m.cell).is_none(), "migrant {} lands on an occupied cell", m.id);
        ls.set(m.lane, m.cell, Some(Occupant { id: m.id, velocity: m.velocity }));
        self.vehicles.insert(m.id, VehicleState { route: m.route, cursor: m.cursor as usize, departed: m.departed });
    }

    fn view(&self, link: usize, lane: u8, cell: u32, occ: Occupant) -> Vehicle {
        let v = &self.vehicles[&occ.id];
        Vehicle {
            id: occ.id,
            velocity: occ.velocity,
            link,
            lane,
            cell,
            route: v.route.clone(),
            cursor: v.cursor,
            departed: v.departed,
        }
    }

    /// Every vehicle in owned cells.
    pub fn vehicles(&self) -> Vec<Vehicle> {
        let mut out = Vec::with_capacity(self.vehicles.len());
        for &link in &self.owned_links {
            let ls = self.links[link].as_ref().unwrap();
            for lane in 0..ls.lane_count() {
                for cell in ls.owned() {
                    if let Some(occ) = ls.get(lane, cell) {
                        out.push(self.view(link, lane, cell, occ));
                    }
                }
            }
        }
        out
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<Vehicle> {
        if !self.vehicles.contains_key(&id) {
            return None;
        }
        self.vehicles().into_iter().find(|v| v.id == id)
    }

    /// Owned cell contents, sorted by (link, lane, cell).
    pub fn snapshot(&self) -> Snapshot {
        let mut records = Vec::with_capacity(self.vehicles.len());
        for &link in &self.owned_links {
            let ls = self.links[link].as_ref().unwrap();
            for lane in 0..ls.lane_count() {
                for cell in ls.owned() {
                    if let Some(occ) = ls.get(lane, cell) {
                        records.push(CellRecord { link, lane, cell, vehicle: occ.id, velocity: occ.velocity });
                    }
                }
            }
        }
        records.sort_unstable_by_key(|r| (r.link, r.lane, r.cell));
        Snapshot { time: self.clock.time, records }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{generate_ring, ring_route, NetworkBuilder};

    fn cfg(p_brake: f64) -> CaConfig {
        CaConfig { p_brake, seed: 7, required_gap: 5 }
    }

    fn plan(id: u64, departure: u32, cell: u32, route: Vec<usize>) -> Plan {
        Plan { vehicle_id: id, departure, entry_cell: cell, route }
    }

    /// Straight chain of `k` links of `cells` cells each.
    fn chain(k: usize, cells: u32, lanes: u8) -> Arc<Network> {
        let mut b = NetworkBuilder::new();
        for i in 0..=k {
            b.node(i as u64, i as f64 * 100.0, 0.0);
        }
        for i in 0..k {
            b.link(i as u64, i as u64, i as u64 + 1, cells as f64 * 7.5, lanes, 5);
        }
        Arc::new(b.build().unwrap())
    }

    #[allow(clippy::too_many_arguments)]
    fn set(d: &mut Domain, link: usize, lane: u8, cell: u32, id: u64, v: u8, route: Vec<usize>, cursor: usize) {
        d.link_state_mut(link).unwrap().set(lane, cell, Some(Occupant { id, velocity: v }));
        d.vehicles.insert(id, VehicleState { route: route.into(), cursor, departed: 0 });
    }

    fn position(d: &Domain, id: u64) -> (usize, u8, u32, u8) {
        let v = d.vehicle(id).expect("vehicle present");
        (v.link, v.lane, v.cell, v.velocity)
    }

    #[test]
    fn single_lane_link_has_no_lane_changes() {
        let net = chain(1, 10, 1);
        let mut d = Domain::whole(net, cfg(0.0), vec![plan(1, 0, 3, vec![0])]);
        let before = d.snapshot();
        d.lane_change_substep();
        assert_eq!(d.snapshot().records, before.records);
    }

    #[test]
    fn acceleration_from_rest() {
        let net = chain(1, 30, 1);
        let mut d = Domain::whole(net, cfg(0.0), vec![plan(1, 0, 0, vec![0])]);
        d.lane_change_substep();
        d.move_substep();
        assert_eq!(position(&d, 1), (0, 0, 1, 1));
    }

    #[test]
    fn velocity_clamped_to_gap() {
        let net = chain(1, 30, 1);
        let mut d = Domain::whole(net, cfg(0.0), vec![]);
        set(&mut d, 0, 0, 5, 1, 4, vec![0], 0);
        set(&mut d, 0, 0, 8, 2, 0, vec![0], 0);
        d.lane_change_substep();
        d.move_substep();
        assert_eq!(position(&d, 1), (0, 0, 7, 2));
    }

    #[test]
    fn free_vehicle_on_ring_cruises_at_vmax() {
        let net = Arc::new(generate_ring(200, 1));
        let route = ring_route(&net, 0, 10_000);
        let mut d = Domain::whole(net, cfg(0.0), vec![plan(1, 0, 0, route)]);
        for _ in 0..10 {
            d.lane_change_substep();
            d.move_substep();
        }
        let mut prev = d.vehicle(1).unwrap();
        for _ in 0..100 {
            d.lane_change_substep();
            d.move_substep();
            let now = d.vehicle(1).unwrap();
            assert_eq!(now.velocity, 5);
            let before = prev.cell as i64 + (0..prev.cursor).map(|i| d.net.link(prev.route[i]).cells as i64).sum::<i64>();
            let after = now.cell as i64 + (0..now.cursor).map(|i| d.net.link(now.route[i]).cells as i64).sum::<i64>();
            assert_eq!(after - before, 5);
            prev = now;
        }
    }

    #[test]
    fn turn_motivated_change_to_left_lane() {
        // Link 0 ends at a node with a left and a straight exit; the plan turns left.
        let mut b = NetworkBuilder::new();
        b.node(0, 0.0, 0.0).node(1, 75.0, 0.0).node(2, 150.0, 0.0).node(3, 75.0, 75.0);
        b.link(0, 0, 1, 75.0, 2, 5).link(1, 1, 2, 75.0, 2, 5).link(2, 1, 3, 75.0, 2, 5);
        let net = Arc::new(b.build().unwrap());
        assert_eq!(net.exit(0, 2).unwrap().lanes, 1..=1);
        let mut d = Domain::whole(net, cfg(0.0), vec![]);
        set(&mut d, 0, 0, 4, 1, 2, vec![0, 2], 0);
        d.lane_change_substep();
        assert_eq!(position(&d, 1), (0, 1, 4, 2));
    }

    #[test]
    fn faster_lane_change_when_blocked() {
        let net = chain(1, 30, 2);
        let mut d = Domain::whole(net, cfg(0.0), vec![]);
        set(&mut d, 0, 0, 10, 1, 2, vec![0], 0);
        set(&mut d, 0, 0, 11, 2, 0, vec![0], 0);
        d.lane_change_substep();
        assert_eq!(position(&d, 1), (0, 1, 10, 2));
        assert_eq!(position(&d, 2), (0, 0, 11, 0));
    }

    #[test]
    fn lane_change_needs_backward_gap() {
        let net = chain(1, 30, 2);
        let mut d = Domain::whole(net, cfg(0.0), vec![]);
        set(&mut d, 0, 0, 10, 1, 2, vec![0], 0);
        set(&mut d, 0, 0, 11, 2, 0, vec![0], 0);
        set(&mut d, 0, 1, 7, 3, 3, vec![0], 0);
        d.lane_change_substep();
        assert_eq!(position(&d, 1), (0, 0, 10, 2));
    }

    fn signal_net(red: u32, green: u32) -> Arc<Network> {
        let mut b = NetworkBuilder::new();
        b.node(0, 0.0, 0.0).node(1, 75.0, 0.0).node(2, 150.0, 0.0);
        b.link(0, 0, 1, 75.0, 1, 5).link(1, 1, 2, 75.0, 1, 5);
        b.turn(1, 0, 1, Control::Signal { red_s: red, green_s: green });
        Arc::new(b.build().unwrap())
    }

    #[test]
    fn red_signal_blocks_at_link_end() {
        let net = signal_net(30, 30);
        let mut d = Domain::whole(net, cfg(0.0), vec![]);
        // Three cells from the end: cell 7 of 10, two empty cells ahead.
        set(&mut d, 0, 0, 7, 1, 3, vec![0, 1], 0);
        d.lane_change_substep();
        d.move_substep();
        assert_eq!(position(&d, 1), (0, 0, 9, 2));
    }

    #[test]
    fn green_signal_lets_vehicle_pass() {
        let net = signal_net(30, 30);
        let mut d = Domain::whole(net, cfg(0.0), vec![]);
        d.clock.time = 30;
        set(&mut d, 0, 0, 7, 1, 3, vec![0, 1], 0);
        d.lane_change_substep();
        d.move_substep();
        assert_eq!(position(&d, 1), (1, 0, 1, 4));
    }

    #[test]
    fn stop_sign_requires_full_stop_and_gap() {
        let mut b = NetworkBuilder::new();
        b.node(0, 0.0, 0.0).node(1, 75.0, 0.0).node(2, 150.0, 0.0).node(3, 75.0, -75.0);
        b.link(0, 0, 1, 75.0, 1, 5).link(1, 1, 2, 75.0, 1, 5).link(2, 3, 1, 75.0, 1, 5);
        b.turn(1, 0, 1, Control::Uncontrolled).turn(1, 2, 1, Control::Stop);
        let net = Arc::new(b.build().unwrap());
        let mut d = Domain::whole(net, cfg(0.0), vec![]);
        set(&mut d, 2, 0, 8, 1, 1, vec![2, 1], 0);
        d.lane_change_substep();
        d.move_substep();
        assert_eq!(position(&d, 1), (2, 0, 9, 1));
        // Arrived with v=1: must stand still for a step.
        d.lane_change_substep();
        d.move_substep();
        assert_eq!(position(&d, 1), (2, 0, 9, 0));
        // A priority vehicle 3 cells before the conflict point blocks the gap.
        set(&mut d, 0, 0, 7, 2, 0, vec![0, 1], 0);
        d.lane_change_substep();
        d.move_substep();
        assert_eq!(position(&d, 1), (2, 0, 9, 0));
        // Once the priority vehicle has passed, the minor vehicle goes.
        for _ in 0..6 {
            d.lane_change_substep();
            d.move_substep();
        }
        assert_eq!(d.vehicle(1).unwrap().link, 1);
    }

    #[test]
    fn injection_on_time_and_retry() {
        let net = chain(1, 30, 1);
        let mut d = Domain::whole(net, cfg(0.0), vec![plan(9, 10, 0, vec![0])]);
        while d.clock().time < 10 {
            assert!(d.vehicle(9).is_none());
            d.lane_change_substep();
            d.move_substep();
        }
        assert_eq!(position(&d, 9), (0, 0, 0, 0));

        // Entry cell held by a vehicle waiting at a red light until t=10.
        let net = signal_net(10, 30);
        let mut d = Domain::whole(net, cfg(0.0), vec![plan(9, 10, 9, vec![0, 1])]);
        set(&mut d, 0, 0, 9, 1, 0, vec![0, 1], 0);
        while d.clock().time < 10 {
            d.lane_change_substep();
            d.move_substep();
        }
        assert!(d.vehicle(9).is_none());
        assert_eq!(position(&d, 1), (0, 0, 9, 0));
        d.lane_change_substep();
        d.move_substep();
        assert_eq!(d.clock().time, 11);
        assert_eq!(position(&d, 9), (0, 0, 9, 0));
        assert_eq!(position(&d, 1), (1, 0, 0, 1));
    }

    #[test]
    fn arrival_removes_vehicle() {
        let net = chain(2, 10, 1);
        let mut d = Domain::whole(net, cfg(0.0), vec![]);
        set(&mut d, 1, 0, 8, 1, 2, vec![0, 1], 1);
        d.lane_change_substep();
        let r = d.move_substep();
        assert_eq!(r.arrived, 1);
        assert!(d.vehicle(1).is_none());
        assert_eq!(d.counters().arrived, 1);
        assert_eq!(d.counters().present, 0);
    }
}
