use std::io::{self, Write};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::{
    connect, decompose, DomainStep, DomainWorker, Endpoint, EngineError, Phase, StepRecord, StepTrace, Traffic,
    TransportKind,
};
use crate::ca::{CaConfig, Detector, Snapshot, TripCounters, Vehicle};
use crate::net::{Network, Plan};
use crate::partition::Partition;

/// All domains of a decomposed simulation stepped together on the calling
/// thread. Useful for inspection between steps; messages still travel
/// through the chosen transport.
pub struct Cluster {
    net: Arc<Network>,
    workers: Vec<DomainWorker>,
    endpoints: Vec<Box<dyn Endpoint>>,
    n_spl: usize,
    plans: u64,
}

impl Cluster {
    pub fn new(
        net: Arc<Network>,
        part: &Partition,
        plans: Vec<Plan>,
        cfg: CaConfig,
        transport: TransportKind,
    ) -> Result<Self, EngineError> {
        let n_plans = plans.len() as u64;
        let workers = decompose(&net, part, plans, &cfg)?;
        let neighbors: Vec<Vec<usize>> = workers.iter().map(|w| w.neighbors().to_vec()).collect();
        let endpoints = connect(transport, &neighbors)?;
        let mut c = Self { net, workers, endpoints, n_spl: part.n_spl(), plans: n_plans };
        c.exchange(Phase::Setup)?;
        Ok(c)
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.net
    }

    pub fn set_detectors(&mut self, detectors: Vec<Detector>) {
        for w in &mut self.workers {
            w.domain_mut().set_detectors(detectors.clone());
        }
    }

    fn exchange(&mut self, phase: Phase) -> Result<(), EngineError> {
        for (w, ep) in self.workers.iter_mut().zip(&mut self.endpoints) {
            w.send_boundary(ep.as_mut(), phase)?;
        }
        for (w, ep) in self.workers.iter_mut().zip(&mut self.endpoints) {
            w.receive_boundary(ep.as_mut(), phase)?;
        }
        Ok(())
    }

    pub fn step(&mut self) -> Result<(), EngineError> {
        for w in &mut self.workers {
            w.lane_change();
        }
        self.exchange(Phase::LaneChange)?;
        for w in &mut self.workers {
            w.move_vehicles();
        }
        self.exchange(Phase::Move)
    }

    pub fn run(&mut self, steps: u32) -> Result<(), EngineError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn time(&self) -> u32 {
        self.workers[0].domain().clock().time
    }

    pub fn workers(&self) -> &[DomainWorker] {
        &self.workers
    }

    pub fn n_spl(&self) -> usize {
        self.n_spl
    }

    pub fn plan_count(&self) -> u64 {
        self.plans
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::merge(self.workers.iter().map(|w| w.domain().snapshot()))
    }

    pub fn digest(&self) -> u64 {
        self.workers.iter().fold(0u64, |a, w| a.wrapping_add(w.domain().snapshot().digest()))
    }

    pub fn vehicles(&self) -> Vec<Vehicle> {
        let mut v: Vec<Vehicle> = self.workers.iter().flat_map(|w| w.domain().vehicles()).collect();
        v.sort_by_key(|v| v.id);
        v
    }

    pub fn counters(&self) -> TripCounters {
        sum_counters(self.workers.iter().map(|w| w.domain().counters()))
    }

    pub fn detector_hits(&self) -> Vec<u64> {
        sum_columns(self.workers.iter().map(|w| w.domain().detector_hits()))
    }

    pub fn link_work(&self) -> Vec<u64> {
        sum_columns(self.workers.iter().map(|w| w.domain().link_work()))
    }

    pub fn node_work(&self) -> Vec<u64> {
        sum_columns(self.workers.iter().map(|w| w.domain().node_work()))
    }

    pub fn traffic(&self) -> Traffic {
        let mut t = Traffic::default();
        for w in &self.workers {
            t += w.traffic();
        }
        t
    }

    /// Whether every mirrored cell equals the cell held by its owner.
    pub fn mirrors_consistent(&self) -> bool {
        self.workers.iter().all(|w| {
            w.mirrors_match(|link, lane, cell| {
                let h = w.halves().iter().find(|h| h.link == link).unwrap();
                self.workers[h.peer].domain().link_state(link).unwrap().get(lane, cell)
            })
        })
    }
}

fn sum_counters(parts: impl Iterator<Item = TripCounters>) -> TripCounters {
    parts.fold(TripCounters::default(), |a, c| TripCounters {
        injected: a.injected + c.injected,
        arrived: a.arrived + c.arrived,
        pending: a.pending + c.pending,
        present: a.present + c.present,
        travel_time: a.travel_time + c.travel_time,
    })
}

fn sum_columns<'a>(parts: impl Iterator<Item = &'a [u64]>) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for p in parts {
        if out.len() < p.len() {
            out.resize(p.len(), 0);
        }
        for (o, x) in out.iter_mut().zip(p) {
            *o += x;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub steps: u32,
    pub transport: TransportKind,
    /// Record per-step timing and work.
    pub trace: bool,
    /// Record the state fingerprint after every step.
    pub digests: bool,
    /// Keep a full snapshot every this many steps.
    pub snapshot_every: Option<u32>,
    pub detectors: Vec<Detector>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            steps: 100,
            transport: TransportKind::Channel,
            trace: false,
            digests: false,
            snapshot_every: None,
            detectors: Vec::new(),
        }
    }
}

/// Outcome of a threaded run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub p: usize,
    pub steps: u32,
    pub plans: u64,
    pub n_spl: usize,
    pub counters: TripCounters,
    pub traffic: Traffic,
    pub wall: Duration,
    /// Fingerprint after each step, when requested.
    pub digests: Vec<u64>,
    pub snapshots: Vec<Snapshot>,
    pub final_snapshot: Snapshot,
    pub detector_hits: Vec<u64>,
    pub link_work: Vec<u64>,
    pub node_work: Vec<u64>,
    pub trace: Option<StepTrace>,
}

impl RunSummary {
    /// Every plan is pending, on the grid, or arrived.
    pub fn conserved(&self) -> bool {
        let c = &self.counters;
        c.injected == c.arrived + c.present && self.plans == c.injected + c.pending
    }

    pub fn messages_per_step(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.traffic.messages as f64 / self.steps as f64
        }
    }

    /// Bytes sent per split link per exchange, both directions and message
    /// headers included.
    pub fn bytes_per_split_link_exchange(&self) -> Option<f64> {
        (self.n_spl > 0 && self.steps > 0).then(|| self.traffic.bytes as f64 / (self.n_spl as f64 * 2.0 * self.steps as f64))
    }

    /// `key=value` lines. Wall time is left out so that repeated runs give
    /// identical text.
    pub fn write_text<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let c = &self.counters;
        writeln!(out, "domains={}", self.p)?;
        writeln!(out, "steps={}", self.steps)?;
        writeln!(out, "split_links={}", self.n_spl)?;
        writeln!(out, "plans={}", self.plans)?;
        writeln!(out, "injected={}", c.injected)?;
        writeln!(out, "arrived={}", c.arrived)?;
        writeln!(out, "present={}", c.present)?;
        writeln!(out, "pending={}", c.pending)?;
        writeln!(out, "conserved={}", self.conserved())?;
        let mean_tt = if c.arrived > 0 { c.travel_time as f64 / c.arrived as f64 } else { 0.0 };
        writeln!(out, "mean_travel_time_s={mean_tt:.3}")?;
        writeln!(out, "messages={}", self.traffic.messages)?;
        writeln!(out, "messages_per_step={:.3}", self.messages_per_step())?;
        writeln!(out, "bytes={}", self.traffic.bytes)?;
        if let Some(b) = self.bytes_per_split_link_exchange() {
            writeln!(out, "bytes_per_split_link_exchange={b:.2}")?;
        }
        writeln!(out, "final_digest={:016x}", self.final_snapshot.digest())
    }
}

struct WorkerOutput {
    rows: Vec<DomainStep>,
    digests: Vec<u64>,
    snapshots: Vec<Snapshot>,
    final_snapshot: Snapshot,
    counters: TripCounters,
    detector_hits: Vec<u64>,
    link_work: Vec<u64>,
    node_work: Vec<u64>,
    traffic: Traffic,
}

fn worker_loop(
    mut w: DomainWorker,
    mut ep: Box<dyn Endpoint>,
    opts: &RunOptions,
) -> Result<WorkerOutput, EngineError> {
    let ep = ep.as_mut();
    w.domain_mut().set_detectors(opts.detectors.clone());
    w.send_boundary(ep, Phase::Setup)?;
    w.receive_boundary(ep, Phase::Setup)?;
    let mut rows = Vec::new();
    let mut digests = Vec::new();
    let mut snapshots = Vec::new();
    if opts.snapshot_every.is_some() {
        snapshots.push(w.domain().snapshot());
    }
    for step in 0..opts.steps {
        let work0 = w.domain().total_work();
        w.lane_change();
        w.send_boundary(ep, Phase::LaneChange)?;
        w.receive_boundary(ep, Phase::LaneChange)?;
        w.move_vehicles();
        let elapsed_us = w.compute_us();
        w.send_boundary(ep, Phase::Move)?;
        w.receive_boundary(ep, Phase::Move)?;
        if opts.trace {
            rows.push(DomainStep { elapsed_us, work_units: w.domain().total_work() - work0 });
        }
        if opts.digests {
            digests.push(w.domain().snapshot().digest());
        }
        if opts.snapshot_every.is_some_and(|k| k > 0 && (step + 1) % k == 0) {
            snapshots.push(w.domain().snapshot());
        }
    }
    let d = w.domain();
    Ok(WorkerOutput {
        rows,
        digests,
        snapshots,
        final_snapshot: d.snapshot(),
        counters: d.counters(),
        detector_hits: d.detector_hits().to_vec(),
        link_work: d.link_work().to_vec(),
        node_work: d.node_work().to_vec(),
        traffic: w.traffic(),
    })
}

/// Run every domain on its own thread for `opts.steps` steps.
///
/// A failing worker drops its connections, which makes its neighbours fail
/// in turn; the first error that is not a lost connection is reported.
pub fn run(
    net: Arc<Network>,
    part: &Partition,
    plans: Vec<Plan>,
    cfg: CaConfig,
    opts: &RunOptions,
) -> Result<RunSummary, EngineError> {
    let n_plans = plans.len() as u64;
    let workers = decompose(&net, part, plans, &cfg)?;
    let neighbors: Vec<Vec<usize>> = workers.iter().map(|w| w.neighbors().to_vec()).collect();
    let endpoints = connect(opts.transport, &neighbors)?;
    let p = workers.len();
    let start = Instant::now();
    let results: Vec<Result<WorkerOutput, EngineError>> = thread::scope(|s| {
        let handles: Vec<_> = workers
            .into_iter()
            .zip(endpoints)
            .map(|(w, ep)| thread::Builder::new().name(format!("domain-{}", w.index())).spawn_scoped(s, move || worker_loop(w, ep, opts)))
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(i, h)| match h {
                Ok(h) => h.join().unwrap_or(Err(EngineError::WorkerPanic(i))),
                Err(e) => Err(EngineError::Transport(format!("cannot start worker {i}: {e}"))),
            })
            .collect()
    });
    let wall = start.elapsed();

    let mut outputs = Vec::with_capacity(p);
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(o) => outputs.push(o),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        let root = errors.iter().position(|e| !matches!(e, EngineError::Transport(_))).unwrap_or(0);
        return Err(errors.swap_remove(root));
    }

    let digests = (0..opts.steps as usize)
        .filter(|_| opts.digests)
        .map(|i| outputs.iter().fold(0u64, |a, o| a.wrapping_add(o.digests[i])))
        .collect();
    let n_snap = outputs[0].snapshots.len();
    let snapshots = (0..n_snap).map(|i| Snapshot::merge(outputs.iter().map(|o| o.snapshots[i].clone()))).collect();
    let link_work = sum_columns(outputs.iter().map(|o| o.link_work.as_slice()));
    let node_work = sum_columns(outputs.iter().map(|o| o.node_work.as_slice()));
    let trace = opts.trace.then(|| StepTrace {
        steps: (0..opts.steps as usize)
            .map(|i| StepRecord { step: i as u32, domains: outputs.iter().map(|o| o.rows[i]).collect() })
            .collect(),
        link_work: link_work.clone(),
        node_work: node_work.clone(),
    });
    let mut traffic = Traffic::default();
    for o in &outputs {
        traffic += o.traffic;
    }
    Ok(RunSummary {
        p,
        steps: opts.steps,
        plans: n_plans,
        n_spl: part.n_spl(),
        counters: sum_counters(outputs.iter().map(|o| o.counters)),
        traffic,
        wall,
        digests,
        snapshots,
        final_snapshot: Snapshot::merge(outputs.iter().map(|o| o.final_snapshot.clone())),
        detector_hits: sum_columns(outputs.iter().map(|o| o.detector_hits.as_slice())),
        link_work,
        node_work,
        trace,
    })
}
