//! Split-link counts and theoretical efficiency of both partitioners on a
//! 64 x 64 lattice, with power-law fits of the split-link growth.
//!
//! `cargo run --release --example partition_scaling`

use cellflow::net::generate_grid;
use cellflow::partition::{
    compute_metrics, fit_split_scaling, multilevel_partition, orthogonal_bisection, uniform_weights,
};

fn main() {
    let net = generate_grid(64, 64, 75.0, 1);
    let w = uniform_weights(&net);
    let ps = [1usize, 2, 4, 8, 16, 32, 64, 128, 256];
    let mut orb_samples = Vec::new();
    let mut ml_samples = Vec::new();
    println!("{:>5} {:>8} {:>8} {:>8} {:>8}", "p", "orb_spl", "ml_spl", "orb_edmn", "ml_edmn");
    for &p in &ps {
        let t = std::time::Instant::now();
        let orb = orthogonal_bisection(&net, &w, p).expect("orb");
        let ml = multilevel_partition(&net, &w, p, 1).expect("multilevel");
        let mo = compute_metrics(&net, &orb, &w);
        let mm = compute_metrics(&net, &ml, &w);
        println!(
            "{:>5} {:>8} {:>8} {:>8.4} {:>8.4}  ({:.2}s)",
            p,
            mo.n_spl,
            mm.n_spl,
            mo.e_dmn,
            mm.e_dmn,
            t.elapsed().as_secs_f64()
        );
        orb_samples.push((p as f64, mo.n_spl as f64));
        ml_samples.push((p as f64, mm.n_spl as f64));
    }
    for (name, s) in [("orb", &orb_samples), ("multilevel", &ml_samples)] {
        let f = fit_split_scaling(s).expect("fit");
        let form = if f.offset_form { "A (p^alpha - 1)" } else { "A p^alpha" };
        println!("{name}: N_spl = {form} with A = {:.1}, alpha = {:.3}", f.a, f.alpha);
    }
}
