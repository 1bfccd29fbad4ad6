//! Adaptive load balancing: run with length-based node weights, feed the
//! measured per-element work back as weights, and repartition.
//!
//! Most trips stay inside the south-west quadrant, so the first partition
//! leaves one domain with most of the work.
//!
//! `cargo run --release --example load_feedback`

use std::sync::Arc;

use cellflow::ca::CaConfig;
use cellflow::loadbal::{collect, domain_work, length_weights, to_weights};
use cellflow::net::{concentrated_trips, generate_grid};
use cellflow::parengine::{run, write_load_file, RunOptions};
use cellflow::partition::orthogonal_bisection;

fn main() {
    let net = Arc::new(generate_grid(12, 12, 75.0, 1));
    let half = 5.5 * 75.0;
    let plans = concentrated_trips(&net, 3000, 0.8, [0.0, half, 0.0, half], 900, 5);
    let cfg = CaConfig { seed: 5, ..Default::default() };
    let opts = RunOptions { steps: 1200, trace: true, ..Default::default() };
    let p = 4;

    let mut weights = length_weights(&net);
    for iteration in 1..=3 {
        let part = orthogonal_bisection(&net, &weights, p).expect("partition");
        let s = run(net.clone(), &part, plans.clone(), cfg.clone(), &opts).expect("run");
        let trace = s.trace.as_ref().unwrap();
        let work = trace.domain_work();
        let max = *work.iter().max().unwrap() as f64;
        let mean = trace.total_work() as f64 / p as f64;
        println!(
            "iteration {iteration}: domain work {work:?}, max/mean {:.3}, split links {}",
            max / mean,
            s.n_spl
        );
        // Round trip through the load file, as between separate runs.
        let text = write_load_file(&net, &s.link_work, &s.node_work);
        let profile = collect(&net, &text, Some(trace)).expect("load file");
        let check = domain_work(&net, &profile, part.assignment(), p);
        assert!((check.iter().sum::<f64>() - trace.total_work() as f64).abs() < 1e-6);
        weights = to_weights(&profile, &net).weights;
    }
}
