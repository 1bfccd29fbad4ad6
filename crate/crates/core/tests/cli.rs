use std::path::Path;
use std::process::{Command, Output};

fn cellflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellflow")).current_dir(dir).args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const SIM: &[&str] = &["simulate", "--grid", "6x6", "--lanes", "2", "--trips", "400", "--p", "4", "--duration", "400"];

#[test]
fn simulate_is_repeatable_and_partitioner_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = cellflow(d, &[SIM, &["--seed", "7", "--out-dir", "a", "--trace"]].concat());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = cellflow(d, &[SIM, &["--seed", "7", "--out-dir", "b"]].concat());
    let c = cellflow(d, &[SIM, &["--seed", "7", "--out-dir", "c", "--partitioner", "multilevel"]].concat());
    assert!(b.status.success() && c.status.success());
    assert_eq!(read(d, "a/summary.txt"), read(d, "b/summary.txt"));
    assert_eq!(read(d, "a/load.txt"), read(d, "b/load.txt"));
    let traffic = |s: String| {
        s.lines()
            .filter(|l| ["arrived", "present", "pending", "final_digest"].iter().any(|k| l.starts_with(k)))
            .map(String::from)
            .collect::<Vec<_>>()
    };
    assert_eq!(traffic(read(d, "a/summary.txt")), traffic(read(d, "c/summary.txt")));
    assert!(read(d, "a/summary.txt").starts_with("seed=7\n"));
    assert!(read(d, "a/config.txt").contains("seed=7"));
    assert!(read(d, "a/trace.csv").starts_with("step,domain,elapsed_us,work_units\n"));
    assert!(!d.join("b/trace.csv").exists());

    let other = cellflow(d, &[SIM, &["--seed", "8", "--out-dir", "e"]].concat());
    assert!(other.status.success());
    assert_ne!(read(d, "a/summary.txt"), read(d, "e/summary.txt"));
}

#[test]
fn config_file_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(cellflow(d, &[SIM, &["--seed", "3", "--out-dir", "first"]].concat()).status.success());
    let again = cellflow(d, &["simulate", "--config", "first/config.txt", "--out-dir", "second"]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
    assert_eq!(read(d, "first/summary.txt"), read(d, "second/summary.txt"));
    // A flag overrides the file.
    let p2 = cellflow(d, &["simulate", "--config", "first/config.txt", "--out-dir", "third", "--p", "2"]);
    assert!(p2.status.success());
    assert!(read(d, "third/summary.txt").contains("domains=2\n"));
}

#[test]
fn input_errors_exit_with_status_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = cellflow(d, &["simulate", "--grid", "4x4", "--plans", "nope.pl"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.pl"));
    std::fs::write(d.join("bad.net"), "NODES\n1 0 0\nLINKS\n5 1 9 75 1 5\n").unwrap();
    assert_eq!(cellflow(d, &["partition", "--net", "bad.net"]).status.code(), Some(2));
    assert_eq!(cellflow(d, &["partition", "--grid", "3x3", "--p", "10"]).status.code(), Some(2));
    assert_eq!(cellflow(d, &["predict", "--hardware", "carrier-pigeon"]).status.code(), Some(2));
    assert_eq!(cellflow(d, &["simulate", "--frobnicate"]).status.code(), Some(2));
    std::fs::write(d.join("x.cfg"), "colour=red\n").unwrap();
    assert_eq!(cellflow(d, &["predict", "--config", "x.cfg"]).status.code(), Some(2));
    assert_eq!(cellflow(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn partition_balance_feedback_path() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = cellflow(d, &["partition", "--grid", "16x16", "--p", "1..8", "--method", "both", "--fit", "--out-dir", "pt"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = read(d, "pt/metrics.csv");
    assert!(metrics.starts_with("method,p,N_spl,e_dmn,max_load,mean_neighbors\n"));
    assert_eq!(metrics.lines().count(), 1 + 16);
    assert_eq!(read(d, "pt/fit.csv").lines().count(), 3);
    assert!(d.join("pt/partition_multilevel_p8.txt").exists());

    assert!(cellflow(d, &["simulate", "--grid", "8x8", "--trips", "600", "--duration", "300", "--out-dir", "run"]).status.success());
    let bal = cellflow(d, &["balance", "--grid", "8x8", "--load", "run/load.txt", "--p", "4", "--out-dir", "bal"]);
    assert!(bal.status.success(), "{}", String::from_utf8_lossy(&bal.stderr));
    assert_eq!(read(d, "bal/weights.txt").lines().count(), 64);
    assert!(read(d, "bal/balance.txt").contains("max_domain_work_feedback="));
    let fed = cellflow(d, &["partition", "--grid", "8x8", "--p", "4", "--method", "orb", "--weights", "bal/weights.txt", "--out-dir", "fed"]);
    assert!(fed.status.success());
    assert_eq!(read(d, "fed/partition_orb_p4.txt"), read(d, "bal/partition.txt"));
}

#[test]
fn predict_presets_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = cellflow(d, &["predict", "--p", "1,16", "--out-dir", "pr"]);
    assert!(out.status.success());
    let csv = read(d, "pr/prediction.csv");
    let row16: Vec<f64> = csv.lines().nth(2).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row16[0], 16.0);
    assert!((row16[6] - 40.0).abs() < 1e-3, "rtr(16) = {}", row16[6]);

    std::fs::write(d.join("a.profile"), "hardware=10mbit-shared\n").unwrap();
    std::fs::write(d.join("b.profile"), "hardware=gbit-switched\nhardware_label=fast\n").unwrap();
    let cmp = cellflow(d, &["predict", "--compare", "a.profile", "b.profile", "--out-dir", "cmp"]);
    assert!(cmp.status.success(), "{}", String::from_utf8_lossy(&cmp.stderr));
    assert!(d.join("cmp/prediction_10mbit-shared.csv").exists());
    assert!(d.join("cmp/prediction_fast.csv").exists());

    std::fs::write(d.join("samples.txt"), "1 0.30\n2 0.16\n4 0.09\n8 0.05\n").unwrap();
    let cal = cellflow(d, &["predict", "--samples", "samples.txt", "--fit", "t1,tlt", "--out-dir", "cal"]);
    assert!(cal.status.success(), "{}", String::from_utf8_lossy(&cal.stderr));
    assert!(String::from_utf8_lossy(&cal.stdout).contains("calibrated"));
}

#[test]
fn validate_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = cellflow(d, &["validate", "--ring-cells", "200", "--warmup", "200", "--steps", "300", "--p", "2", "--out-dir", "v"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in read(d, "v/manifest.txt").lines() {
        assert!(d.join("v").join(f).exists(), "{f}");
    }
    assert!(read(d, "v/fundamental_1lane.csv").starts_with("density,flow_vph,mean_speed"));
    assert!(read(d, "v/checks.txt").contains("diagram_endpoints"));
}
