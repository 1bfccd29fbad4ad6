//! Write a generated network and its trips in the text formats read by the
//! `cellflow` binary, read them back, and run them.
//!
//! `cargo run --release --example network_files -- [dir]`

use std::sync::Arc;

use cellflow::ca::{CaConfig, Simulation};
use cellflow::net::{generate_grid, load_network, load_plans, random_trips, serialize_network, serialize_plans};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "network_out".into());
    std::fs::create_dir_all(&dir).expect("create directory");
    let net = generate_grid(5, 5, 150.0, 2);
    let plans = random_trips(&net, 400, 300, 2);
    let net_path = format!("{dir}/grid.net");
    let plans_path = format!("{dir}/trips.pl");
    std::fs::write(&net_path, serialize_network(&net)).unwrap();
    std::fs::write(&plans_path, serialize_plans(&plans, &net)).unwrap();

    let net2 = Arc::new(load_network(&std::fs::read_to_string(&net_path).unwrap()).expect("network file"));
    let plans2 = load_plans(&std::fs::read_to_string(&plans_path).unwrap(), &net2).expect("plans file");
    assert_eq!(plans2, plans);
    let mut sim = Simulation::new(net2.clone(), CaConfig::default(), plans2);
    for _ in 0..900 {
        sim.step();
    }
    let c = sim.counters();
    println!("{} nodes, {} links, {} lane cells", net2.node_count(), net2.link_count(), net2.total_lane_cells());
    println!("after 900 s: {} arrived, {} on the road, {} waiting", c.arrived, c.present, c.pending);
    println!("files: {net_path} {plans_path}");
    println!("same run from the command line:");
    println!("  cellflow simulate --net {net_path} --plans {plans_path} --duration 900 --p 4");
}
