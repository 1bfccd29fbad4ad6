//! Property tests: decomposed runs reproduce the sequential run exactly.

use std::sync::Arc;

use proptest::prelude::*;

use cellflow::ca::{CaConfig, Simulation};
use cellflow::net::{generate_grid, random_trips};
use cellflow::parengine::{run, Cluster, RunOptions, TransportKind};
use cellflow::partition::{multilevel_partition, orthogonal_bisection, uniform_weights};

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn any_decomposition_matches_sequential(
        rows in 3usize..8,
        cols in 3usize..8,
        lanes in 1u8..=3,
        trips in 50usize..600,
        p in 2usize..9,
        seed in 0u64..1000,
        p_brake in prop_oneof![Just(0.0), Just(0.2), Just(0.5)],
        multilevel in any::<bool>(),
    ) {
        let net = Arc::new(generate_grid(rows, cols, 75.0, lanes));
        let p = p.min(net.node_count());
        let plans = random_trips(&net, trips, 120, seed);
        let cfg = CaConfig { p_brake, seed, required_gap: 5 };
        let w = uniform_weights(&net);
        let part = if multilevel {
            multilevel_partition(&net, &w, p, seed).unwrap()
        } else {
            orthogonal_bisection(&net, &w, p).unwrap()
        };
        let mut sim = Simulation::new(net.clone(), cfg.clone(), plans.clone());
        let mut cluster = Cluster::new(net.clone(), &part, plans, cfg, TransportKind::Channel).unwrap();
        for _ in 0..150 {
            sim.step();
            cluster.step().unwrap();
            prop_assert_eq!(cluster.digest(), sim.snapshot().digest());
            prop_assert!(cluster.mirrors_consistent());
        }
        prop_assert_eq!(cluster.snapshot(), sim.snapshot());
        prop_assert_eq!(cluster.counters(), sim.counters());
        let pairs: usize = cluster.workers().iter().map(|w| w.neighbors().len()).sum();
        prop_assert_eq!(cluster.traffic().messages, 2 * pairs as u64 * 150);
    }

    #[test]
    fn vehicles_are_conserved(trips in 1usize..800, seed in 0u64..1000, steps in 1u32..400) {
        let net = Arc::new(generate_grid(5, 5, 75.0, 2));
        let plans = random_trips(&net, trips, 200, seed);
        let part = orthogonal_bisection(&net, &uniform_weights(&net), 4).unwrap();
        let opts = RunOptions { steps, ..Default::default() };
        let s = run(net, &part, plans, CaConfig { seed, ..Default::default() }, &opts).unwrap();
        prop_assert!(s.conserved());
        prop_assert_eq!(s.final_snapshot.records.len() as u64, s.counters.present);
    }
}
