use std::sync::{Arc, Mutex};

use super::*;
use crate::ca::Simulation;
use crate::net::{generate_grid, random_trips, NetworkBuilder};
use crate::partition::{orthogonal_bisection, uniform_weights};

fn two_node(length: f64) -> Arc<Network> {
    let mut b = NetworkBuilder::new();
    b.node(1, 0.0, 0.0).node(2, length, 0.0).link(10, 1, 2, length, 1, 5);
    Arc::new(b.build().unwrap())
}

fn cfg(p_brake: f64) -> CaConfig {
    CaConfig { p_brake, seed: 11, required_gap: 5 }
}

#[test]
fn ten_cell_link_splits_in_halves() {
    let net = two_node(75.0);
    let part = Partition::new(&net, vec![0, 1], 2).unwrap();
    let ws = decompose(&net, &part, vec![], &cfg(0.0)).unwrap();
    assert_eq!(ws[0].halves()[0].owned, 0..5);
    assert_eq!(ws[0].halves()[0].mirror, 5..10);
    assert_eq!(ws[1].halves()[0].owned, 5..10);
    assert_eq!(ws[1].halves()[0].mirror, 0..5);
    assert_eq!(ws[0].domain().link_state(0).unwrap().owned(), 0..5);
    assert_eq!(ws[1].domain().link_state(0).unwrap().owned(), 5..10);
    assert_eq!((ws[0].neighbors(), ws[1].neighbors()), (&[1usize][..], &[0usize][..]));
}

#[test]
fn odd_link_gives_extra_cell_downstream() {
    let net = two_node(82.5);
    assert_eq!(net.link(0).cells, 11);
    let part = Partition::new(&net, vec![0, 1], 2).unwrap();
    let ws = decompose(&net, &part, vec![], &cfg(0.0)).unwrap();
    assert_eq!(ws[0].halves()[0].owned, 0..5);
    assert_eq!(ws[1].halves()[0].owned, 5..11);
    assert_eq!(ws[1].halves()[0].exported(), 5..10);
}

#[test]
fn short_split_link_rejected() {
    let net = two_node(67.5);
    let part = Partition::new(&net, vec![0, 1], 2).unwrap();
    let err = decompose(&net, &part, vec![], &cfg(0.0)).err().unwrap();
    assert!(matches!(err, EngineError::ShortSplitLink { link: 10, cells: 9 }));
    assert!(err.is_input_error());
    // The same link is fine when not cut.
    let whole = Partition::new(&net, vec![0, 0], 2).unwrap();
    assert!(decompose(&net, &whole, vec![], &cfg(0.0)).is_ok());
}

#[test]
fn plans_go_to_entry_cell_owner() {
    let net = two_node(150.0);
    let part = Partition::new(&net, vec![0, 1], 2).unwrap();
    let plans = vec![
        Plan { vehicle_id: 1, departure: 5, entry_cell: 9, route: vec![0] },
        Plan { vehicle_id: 2, departure: 5, entry_cell: 10, route: vec![0] },
    ];
    let ws = decompose(&net, &part, plans, &cfg(0.0)).unwrap();
    assert_eq!(ws[0].domain().counters().pending, 1);
    assert_eq!(ws[1].domain().counters().pending, 1);
}

/// Endpoint that keeps a decoded copy of every frame it sends.
struct Recorder {
    inner: Box<dyn Endpoint>,
    log: Arc<Mutex<Vec<BoundaryMessage>>>,
}

impl Endpoint for Recorder {
    fn send(&mut self, to: usize, frame: Vec<u8>) -> Result<(), EngineError> {
        self.log.lock().unwrap().push(BoundaryMessage::decode(&frame).unwrap());
        self.inner.send(to, frame)
    }

    fn recv(&mut self, from: usize) -> Result<Vec<u8>, EngineError> {
        self.inner.recv(from)
    }
}

fn lockstep(ws: &mut [DomainWorker], eps: &mut [Box<dyn Endpoint>], phase: Phase) {
    for (w, ep) in ws.iter_mut().zip(eps.iter_mut()) {
        w.send_boundary(ep.as_mut(), phase).unwrap();
    }
    for (w, ep) in ws.iter_mut().zip(eps.iter_mut()) {
        w.receive_boundary(ep.as_mut(), phase).unwrap();
    }
}

fn step(ws: &mut [DomainWorker], eps: &mut [Box<dyn Endpoint>]) {
    ws.iter_mut().for_each(|w| w.lane_change());
    lockstep(ws, eps, Phase::LaneChange);
    ws.iter_mut().for_each(|w| {
        w.move_vehicles();
    });
    lockstep(ws, eps, Phase::Move);
}

#[test]
fn vehicle_crossing_the_cut_migrates_in_second_exchange() {
    // 20 cells, cut at 10. Entering at cell 2 with no random slowdown the
    // vehicle reaches cell 3 (v1), 5 (v2), 8 (v3); the next step takes it to
    // cell 12 with v4, two cells past the cut.
    let net = two_node(150.0);
    let part = Partition::new(&net, vec![0, 1], 2).unwrap();
    let plans = vec![Plan { vehicle_id: 42, departure: 0, entry_cell: 2, route: vec![0] }];
    let mut ws = decompose(&net, &part, plans, &cfg(0.0)).unwrap();
    let log = Arc::new(Mutex::new(Vec::new()));
    let mut eps: Vec<Box<dyn Endpoint>> = connect(TransportKind::Channel, &[vec![1], vec![0]])
        .unwrap()
        .into_iter()
        .map(|inner| Box::new(Recorder { inner, log: log.clone() }) as Box<dyn Endpoint>)
        .collect();
    lockstep(&mut ws, &mut eps, Phase::Setup);
    for _ in 0..3 {
        step(&mut ws, &mut eps);
    }
    let v = ws[0].domain().vehicle(42).unwrap();
    assert_eq!((v.cell, v.velocity), (8, 3));
    log.lock().unwrap().clear();

    step(&mut ws, &mut eps);
    assert!(ws[0].domain().vehicle(42).is_none());
    let v = ws[1].domain().vehicle(42).unwrap();
    assert_eq!((v.cell, v.velocity, v.departed), (12, 4, 0));
    // The upstream side sees the vehicle in its mirror.
    assert_eq!(ws[0].domain().link_state(0).unwrap().get(0, 12), Some(Occupant { id: 42, velocity: 4 }));
    assert_eq!(ws[0].domain().link_state(0).unwrap().get(0, 8), None);

    let log = log.lock().unwrap();
    assert_eq!(log.len(), 4, "one message per direction per exchange");
    let carrying: Vec<_> = log.iter().filter(|m| !m.migrants.is_empty()).collect();
    assert_eq!(carrying.len(), 1);
    let m = carrying[0];
    assert_eq!((m.sender, m.receiver, m.phase, m.step), (0, 1, Phase::Move, 3));
    assert_eq!((m.migrants[0].id, m.migrants[0].cell, m.migrants[0].velocity), (42, 12, 4));
    // Each message carries the five exported cells of the single lane.
    assert!(log.iter().all(|m| m.strips.len() == 1 && m.strips[0].cells.len() == 5));
}

#[test]
fn mismatched_step_is_detected() {
    let net = two_node(150.0);
    let part = Partition::new(&net, vec![0, 1], 2).unwrap();
    let mut ws = decompose(&net, &part, vec![], &cfg(0.0)).unwrap();
    let mut eps = connect(TransportKind::Channel, &[vec![1], vec![0]]).unwrap();
    ws[0].lane_change();
    ws[0].send_boundary(eps[0].as_mut(), Phase::LaneChange).unwrap();
    ws[1].send_boundary(eps[1].as_mut(), Phase::Move).unwrap();
    let err = ws[0].receive_boundary(eps[0].as_mut(), Phase::LaneChange).unwrap_err();
    assert!(matches!(err, EngineError::ClockDivergence { domain: 0, peer: 1, .. }), "{err}");
}

fn grid_case(trips: usize) -> (Arc<Network>, Vec<Plan>) {
    let net = Arc::new(generate_grid(10, 10, 75.0, 2));
    let plans = random_trips(&net, trips, 60, 3);
    (net, plans)
}

fn reference_digests(net: &Arc<Network>, plans: &[Plan], steps: u32) -> (Vec<u64>, Simulation) {
    let mut sim = Simulation::new(net.clone(), cfg(0.2), plans.to_vec());
    let mut out = Vec::new();
    for _ in 0..steps {
        sim.step();
        out.push(sim.snapshot().digest());
    }
    (out, sim)
}

#[test]
fn decomposed_runs_match_single_domain() {
    let (net, plans) = grid_case(1500);
    let steps = 100;
    let (reference, sim) = reference_digests(&net, &plans, steps);
    assert!(sim.counters().arrived > 0 && sim.counters().present > 0);
    let w = uniform_weights(&net);
    for p in [2, 4, 7] {
        let part = orthogonal_bisection(&net, &w, p).unwrap();
        let mut c = Cluster::new(net.clone(), &part, plans.clone(), cfg(0.2), TransportKind::Channel).unwrap();
        assert!(c.mirrors_consistent());
        for (t, &d) in reference.iter().enumerate() {
            c.step().unwrap();
            assert_eq!(c.digest(), d, "p={p} diverged at step {t}");
            assert!(c.mirrors_consistent(), "p={p} mirrors stale after step {t}");
        }
        assert_eq!(c.snapshot(), sim.snapshot());
        assert_eq!(c.counters(), sim.counters());
        assert_eq!(c.link_work(), sim.domain().link_work());
        assert_eq!(c.node_work(), sim.domain().node_work());
        let pairs: usize = c.workers().iter().map(|w| w.neighbors().len()).sum();
        assert_eq!(c.traffic().messages, 2 * pairs as u64 * steps as u64);
    }
}

#[test]
fn threaded_runs_match_single_domain() {
    let (net, plans) = grid_case(800);
    let steps = 60;
    let (reference, sim) = reference_digests(&net, &plans, steps);
    let w = uniform_weights(&net);
    for (p, transport) in [(1, TransportKind::Channel), (4, TransportKind::Channel), (4, TransportKind::Tcp)] {
        let part = orthogonal_bisection(&net, &w, p).unwrap();
        let opts = RunOptions { steps, transport, trace: true, digests: true, snapshot_every: Some(20), ..Default::default() };
        let s = run(net.clone(), &part, plans.clone(), cfg(0.2), &opts).unwrap();
        assert_eq!(s.digests, reference, "p={p} {transport:?}");
        assert_eq!(s.final_snapshot, sim.snapshot());
        assert_eq!(s.snapshots.len(), 4);
        assert_eq!(s.snapshots[3].time, steps);
        assert!(s.conserved());
        assert_eq!(s.counters, sim.counters());
        let trace = s.trace.unwrap();
        assert_eq!(trace.steps.len(), steps as usize);
        assert_eq!(trace.domain_work().iter().sum::<u64>(), trace.total_work());
        assert_eq!(trace.total_work(), sim.domain().total_work());
    }
}

#[test]
fn failing_worker_stops_the_run() {
    let (net, plans) = grid_case(100);
    let part = orthogonal_bisection(&net, &uniform_weights(&net), 4).unwrap();
    let mut ws = decompose(&net, &part, plans, &cfg(0.2)).unwrap();
    let nbs: Vec<Vec<usize>> = ws.iter().map(|w| w.neighbors().to_vec()).collect();
    let mut eps = connect(TransportKind::Channel, &nbs).unwrap();
    // Domain 0 disappears after the setup exchange.
    lockstep(&mut ws, &mut eps, Phase::Setup);
    drop(eps.remove(0));
    let w1 = &mut ws[1];
    w1.lane_change();
    let r = w1
        .send_boundary(eps[0].as_mut(), Phase::LaneChange)
        .and_then(|_| w1.receive_boundary(eps[0].as_mut(), Phase::LaneChange));
    assert!(matches!(r, Err(EngineError::Transport(_))));
}

#[test]
fn load_file_lists_every_element() {
    let net = two_node(150.0);
    let text = write_load_file(&net, &[7], &[1, 2]);
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines, vec!["L 10 7", "N 1 1", "N 2 2"]);
}
