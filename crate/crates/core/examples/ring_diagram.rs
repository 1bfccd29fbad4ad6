//! Fundamental diagram of a closed single-lane ring, with and without the
//! random slowdown.
//!
//! `cargo run --release --example ring_diagram`

use cellflow::validate::{default_densities, ring_diagram, ValidateConfig};

fn main() {
    let densities = default_densities();
    let noisy = ValidateConfig { steps: 1000, ..Default::default() };
    let exact = ValidateConfig { p_brake: 0.0, ..noisy.clone() };
    let a = ring_diagram(1, &densities, &noisy).expect("ring run");
    let b = ring_diagram(1, &densities, &exact).expect("ring run");
    println!("{:>8} {:>12} {:>10} {:>12} {:>10}", "density", "flow p=0.2", "speed", "flow p=0", "speed");
    for (x, y) in a.iter().zip(&b) {
        println!(
            "{:>8.3} {:>12.1} {:>10.3} {:>12.1} {:>10.3}",
            x.density, x.flow_vph, x.mean_speed, y.flow_vph, y.mean_speed
        );
    }
}
