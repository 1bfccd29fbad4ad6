//! Predicted real-time ratio against CPU count for every hardware preset
//! on the 20,000-link scenario, plus the empty-network and 200,000-link
//! variants on switched 100 Mbit Ethernet.
//!
//! `cargo run --release --example predict_curves`

use cellflow::perfmodel::{hardware_preset, predict_curve, scenario_preset, Regime, HARDWARE_PRESETS};

fn main() {
    let ps: Vec<usize> = (0..=12).map(|k| 1 << k).collect();
    print!("{:>30}", "p");
    for p in &ps {
        print!("{p:>7}");
    }
    println!();
    let mut curves = Vec::new();
    for hw in HARDWARE_PRESETS {
        curves.push((hw, "planning-20k"));
    }
    curves.push(("100mbit-switched", "planning-20k-empty"));
    curves.push(("100mbit-switched", "planning-200k"));
    for (hw, sc) in curves {
        let pred = predict_curve(&hardware_preset(hw).unwrap(), &scenario_preset(sc).unwrap(), &ps).expect("prediction");
        let label = if sc == "planning-20k" { hw.to_string() } else { format!("{hw} ({})", &sc[9..]) };
        print!("{label:>30}");
        for r in &pred.rows {
            print!("{:>7.1}", r.rtr);
        }
        match pred.regime {
            Regime::LatencyPlateau { rtr_ceiling } => println!("  limit {rtr_ceiling:.1}"),
            Regime::BandwidthGrowth => println!("  slows down past its peak"),
        }
    }
}
