//! Full validation suite: fundamental diagrams on 1- and 3-lane rings,
//! stop-sign merge capacity, signal throughput and lane balance.
//!
//! `cargo run --release --example flow_validation -- [out_dir] [domains]`

use cellflow::validate::{run_suite, ValidateConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "validation_out".into());
    let domains = args.next().map(|s| s.parse().expect("domain count")).unwrap_or(1);
    std::fs::create_dir_all(&out).expect("create output directory");
    let cfg = ValidateConfig { domains, ..Default::default() };
    let t = std::time::Instant::now();
    let checks = run_suite(&cfg, out.as_ref()).expect("validation run");
    for c in &checks {
        println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {out}/ in {:.1}s", t.elapsed().as_secs_f64());
}
