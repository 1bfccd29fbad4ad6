//! Cellular-automata driving logic.
//!
//! Each one-second step has two sub-steps: sideways lane changes, then
//! forward movement (accelerate, clamp to the gap, random slowdown). Signals
//! act as a stationary blocker behind the last cell of a red approach;
//! yield and stop movements need an empty window on the priority approaches.
//!
//! All rules operate on a [`Domain`], which owns a set of cell ranges and
//! mirrors a few cells it does not own. A [`Simulation`] is the degenerate
//! case of one domain owning everything.

mod domain;
mod rules;
mod snapshot;

use std::sync::Arc;

use crate::net::{Network, Plan};

pub use domain::{Detector, Domain, LinkState, Migrant, MoveReport, TripCounters};
pub use rules::{desperation_gaps, gap_acceptance, DESPERATION_CELLS};
pub use snapshot::{digest, write_snapshot_csv, CellRecord, Snapshot};

pub type VehicleId = u64;

#[derive(Clone, Debug, PartialEq)]
pub struct CaConfig {
    /// Probability of the random slowdown in the move sub-step.
    pub p_brake: f64,
    pub seed: u64,
    /// Cells upstream of a conflict point that must be empty for a yield or
    /// stop movement. At most the interaction range.
    pub required_gap: u8,
}

impl Default for CaConfig {
    fn default() -> Self {
        Self { p_brake: 0.2, seed: 0, required_gap: 5 }
    }
}

/// Content of an occupied cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Occupant {
    pub id: VehicleId,
    /// Cells moved in the last step.
    pub velocity: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubStep {
    LaneChange,
    Move,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimClock {
    /// Simulated seconds; one step is one second.
    pub time: u32,
    pub sub_step: SubStep,
}

impl SimClock {
    pub fn start() -> Self {
        Self { time: 0, sub_step: SubStep::LaneChange }
    }
}

/// Full view of one vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub velocity: u8,
    pub link: usize,
    pub lane: u8,
    pub cell: u32,
    pub route: Arc<[usize]>,
    /// Index of the current link in `route`.
    pub cursor: usize,
    pub departed: u32,
}

/// Single-domain simulation.
pub struct Simulation {
    domain: Domain,
}

impl Simulation {
    pub fn new(net: Arc<Network>, cfg: CaConfig, plans: Vec<Plan>) -> Self {
        Self { domain: Domain::whole(net, cfg, plans) }
    }

    pub fn with_detectors(mut self, detectors: Vec<Detector>) -> Self {
        self.domain.set_detectors(detectors);
        self
    }

    pub fn time(&self) -> u32 {
        self.domain.clock().time
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_mut(&mut self) -> &mut Domain {
        &mut self.domain
    }

    /// Run the lane-change sub-step only.
    pub fn lane_change_substep(&mut self) {
        self.domain.lane_change_substep();
    }

    /// Run the move sub-step (including injection); advances the clock.
    pub fn move_substep(&mut self) -> MoveReport {
        let report = self.domain.move_substep();
        debug_assert!(report.migrants.is_empty());
        report
    }

    pub fn step(&mut self) -> MoveReport {
        self.lane_change_substep();
        self.move_substep()
    }

    pub fn run(&mut self, steps: u32) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        self.domain.snapshot()
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<Vehicle> {
        self.domain.vehicle(id)
    }

    pub fn counters(&self) -> TripCounters {
        self.domain.counters()
    }
}
