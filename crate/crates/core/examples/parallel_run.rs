//! The same simulation on 1, 2, 4 and 8 domains over both transports.
//! Every run ends in the same state; only timing and message traffic
//! differ.
//!
//! `cargo run --release --example parallel_run`

use std::sync::Arc;

use cellflow::ca::CaConfig;
use cellflow::net::{generate_grid, random_trips};
use cellflow::parengine::{run, RunOptions, TransportKind};
use cellflow::partition::{multilevel_partition, uniform_weights};

fn main() {
    let net = Arc::new(generate_grid(10, 10, 75.0, 2));
    let plans = random_trips(&net, 2000, 600, 1);
    let cfg = CaConfig { seed: 1, ..Default::default() };
    let w = uniform_weights(&net);
    let mut reference = None;
    for transport in [TransportKind::Channel, TransportKind::Tcp] {
        for p in [1, 2, 4, 8] {
            let part = multilevel_partition(&net, &w, p, 1).expect("partition");
            let opts = RunOptions { steps: 900, transport, ..Default::default() };
            let s = run(net.clone(), &part, plans.clone(), cfg.clone(), &opts).expect("run");
            let digest = s.final_snapshot.digest();
            let same = *reference.get_or_insert(digest) == digest;
            println!(
                "{transport:?} p={p}: arrived {}, split links {}, {:.1} messages/step, {:.0} bytes/split link/exchange, {:.2}s, state {digest:016x} {}",
                s.counters.arrived,
                s.n_spl,
                s.messages_per_step(),
                s.bytes_per_split_link_exchange().unwrap_or(0.0),
                s.wall.as_secs_f64(),
                if same { "(identical)" } else { "(DIFFERENT)" }
            );
        }
    }
}
