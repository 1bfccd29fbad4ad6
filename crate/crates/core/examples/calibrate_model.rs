//! Fit the single-CPU step time and the message latency to measured step
//! times, then predict beyond the measured range.
//!
//! The "measurements" here are model values for a known machine with a
//! little multiplicative noise, so the fit can be checked against the truth.
//!
//! `cargo run --release --example calibrate_model`

use cellflow::perfmodel::{calibrate, hardware_preset, predict_step_time, scenario_preset, Unknown};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let sc = scenario_preset("planning-20k").unwrap();
    let mut truth = hardware_preset("100mbit-switched").unwrap();
    truth.t_1 = 0.31;
    truth.t_lt = 1.1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<(usize, f64)> = [1, 2, 4, 8, 16]
        .iter()
        .map(|&p| (p, predict_step_time(&truth, &sc, p).unwrap().t_total * rng.gen_range(0.98..1.02)))
        .collect();
    let start = hardware_preset("100mbit-switched").unwrap();
    let fit = calibrate(&samples, &start, &sc, &[Unknown::T1, Unknown::Tlt]).expect("calibration");
    println!("T_1  = {:.4} s   (true {:.4})", fit.hardware.t_1, truth.t_1);
    println!("T_lt = {:.3} ms  (true {:.3})", fit.hardware.t_lt * 1e3, truth.t_lt * 1e3);
    println!("rms residual {:.2e} s", fit.rms);
    for p in [32, 64, 128] {
        let a = predict_step_time(&fit.hardware, &sc, p).unwrap();
        let b = predict_step_time(&truth, &sc, p).unwrap();
        println!("p={p:>4}: predicted rtr {:.1}, true {:.1}", a.rtr, b.rtr);
    }
}
