//! Command implementations behind the `cellflow` binary.
//!
//! Every subcommand accepts `--seed`, `--out-dir` and `--config`. A config
//! file holds `key=value` lines whose keys are the long flag names
//! (`p-brake=0.3`, `partitioner=multilevel`); flags given on the command
//! line win. The resolved settings, seed included, are written to
//! `config.txt` in the output directory and can be fed back with `--config`.
//!
//! Exit status: 0 success, 1 internal failure, 2 bad input.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::ca::{write_snapshot_csv, CaConfig};
use crate::loadbal;
use crate::net::{generate_grid, load_network, load_plans, random_trips, Network, Plan};
use crate::parengine::{self, write_load_file, RunOptions, TransportKind};
use crate::partition::{
    compute_metrics, fit_split_scaling, metrics_row, multilevel_partition, orthogonal_bisection, read_weights,
    write_partition, write_weights, NodeWeights, Partition, METRICS_HEADER,
};
use crate::perfmodel::{self, calibrate, hardware_preset, parse_profile, predict_curve, scenario_preset, Regime};
use crate::validate::{run_suite, ValidateConfig};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "cellflow", version, about = "Parallel cellular-automata traffic simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a simulation on p domains.
    Simulate(SimulateArgs),
    /// Partition a network for a list of domain counts and report metrics.
    Partition(PartitionArgs),
    /// Turn a measured load file into node weights.
    Balance(BalanceArgs),
    /// Predict time per step, real-time ratio, speed-up and efficiency.
    Predict(PredictArgs),
    /// Run the flow validation experiments.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for output files [default: .].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// `key=value` file with defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct NetArgs {
    /// Network file.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Generate a ROWSxCOLS grid instead of reading a file.
    #[arg(long)]
    pub grid: Option<String>,
    /// Link length of a generated grid, meters [default: 75].
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Lanes per link of a generated grid [default: 1].
    #[arg(long)]
    pub lanes: Option<u8>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub network: NetArgs,
    /// Plans file.
    #[arg(long)]
    pub plans: Option<PathBuf>,
    /// Generate this many random trips instead of reading plans.
    #[arg(long)]
    pub trips: Option<usize>,
    /// Latest departure of generated trips, seconds [default: 600].
    #[arg(long)]
    pub departure_window: Option<u32>,
    /// Domain count [default: 1].
    #[arg(long)]
    pub p: Option<usize>,
    /// `orb` or `multilevel` [default: orb].
    #[arg(long)]
    pub partitioner: Option<String>,
    /// Node weights file; length-based weights when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Load file of an earlier run; its measured work becomes the node weights.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Simulated seconds [default: 3600].
    #[arg(long)]
    pub duration: Option<u32>,
    /// Random slowdown probability [default: 0.2].
    #[arg(long)]
    pub p_brake: Option<f64>,
    /// Empty cells a yielding vehicle needs [default: 5].
    #[arg(long)]
    pub required_gap: Option<u8>,
    /// `channel` or `tcp` [default: channel].
    #[arg(long)]
    pub transport: Option<String>,
    /// Write per-step timings and work to trace.csv.
    #[arg(long)]
    pub trace: bool,
    /// Write all vehicle positions every this many steps to snapshots.csv.
    #[arg(long)]
    pub snapshot_every: Option<u32>,
}

#[derive(Args, Debug)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub network: NetArgs,
    /// Domain counts: `8`, `1..64` or `2,4,8` [default: 1,2,4,8,16,32,64].
    #[arg(long)]
    pub p: Option<String>,
    /// `orb`, `multilevel` or `both` [default: both].
    #[arg(long)]
    pub method: Option<String>,
    /// Node weights file.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Load file; measured work becomes the node weights.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Fit the split-link growth per method.
    #[arg(long)]
    pub fit: bool,
}

#[derive(Args, Debug)]
pub struct BalanceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub network: NetArgs,
    /// Load file written by `simulate`.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Also partition with the new weights for this many domains.
    #[arg(long)]
    pub p: Option<usize>,
    /// `orb` or `multilevel` [default: orb].
    #[arg(long)]
    pub partitioner: Option<String>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    /// Hardware preset [default: 100mbit-switched].
    #[arg(long)]
    pub hardware: Option<String>,
    /// Scenario preset [default: planning-20k].
    #[arg(long)]
    pub scenario: Option<String>,
    /// Profile file (`key=value`), applied over the presets.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Scenario file (`key=value`), applied after the profile.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    /// Predict for several profiles on the same scenario.
    #[arg(long, num_args = 2..)]
    pub compare: Vec<PathBuf>,
    /// Domain counts [default: 1,2,4,...,1024].
    #[arg(long)]
    pub p: Option<String>,
    /// Re-solve T_1 so that rtr(P) = R, given as `P:R`.
    #[arg(long)]
    pub target_rtr: Option<String>,
    /// Measured `p seconds_per_step` lines to calibrate against.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Parameters to calibrate, e.g. `t1,tlt` [default: t1].
    #[arg(long)]
    pub fit: Option<String>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Cells per lane of the rings [default: 1000].
    #[arg(long)]
    pub ring_cells: Option<u32>,
    /// Measurement steps [default: 2000].
    #[arg(long)]
    pub steps: Option<u32>,
    /// Warmup steps [default: max(10 * ring cells / v_max, 1000)].
    #[arg(long)]
    pub warmup: Option<u32>,
    /// Domain count [default: 1].
    #[arg(long)]
    pub p: Option<usize>,
    /// Random slowdown probability [default: 0.2].
    #[arg(long)]
    pub p_brake: Option<f64>,
    /// Empty cells a yielding vehicle needs [default: 5].
    #[arg(long)]
    pub required_gap: Option<u8>,
}

/// Config-file values plus a record of every resolved setting.
struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
    out_dir: PathBuf,
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('_', "-")
}

impl Settings {
    fn new(common: &Common) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = &common.config {
            let text = read(path)?;
            for (i, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap().trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::Usage(format!("{}:{}: expected key=value", path.display(), i + 1))
                })?;
                file.insert(normalize(k), v.trim().to_string());
            }
        }
        let mut s = Self { file, resolved: BTreeMap::new(), out_dir: PathBuf::new() };
        s.get("seed", common.seed, 0u64)?;
        s.out_dir = s.get("out-dir", common.out_dir.clone().map(|p| p.display().to_string()), ".".to_string())?.into();
        Ok(s)
    }

    fn seed(&self) -> u64 {
        self.resolved["seed"].parse().unwrap()
    }

    fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(text) => Some(
                    text.parse()
                        .map_err(|_| Error::Usage(format!("config key '{key}': cannot parse '{text}'")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    fn path(&mut self, key: &str, flag: &Option<PathBuf>) -> Result<Option<PathBuf>> {
        Ok(self.opt(key, flag.as_ref().map(|p| p.display().to_string()))?.map(PathBuf::from))
    }

    fn flag(&mut self, key: &str, set: bool) -> Result<bool> {
        let v = if set { true } else { self.opt::<bool>(key, None)?.unwrap_or(false) };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Reject config keys no setting asked for, then write `config.txt`.
    fn finish(&self) -> Result<()> {
        if let Some(k) = self.file.keys().find(|k| !self.resolved.contains_key(*k)) {
            return Err(Error::Usage(format!("unknown config key '{k}'")));
        }
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        let mut text = String::new();
        for (k, v) in &self.resolved {
            if k != "out-dir" && k != "config" {
                let _ = writeln!(text, "{k}={v}");
            }
        }
        self.write("config.txt", &text)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parse `8`, `1..64` (inclusive) or comma-separated mixes of both.
pub fn parse_p_list(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Usage(format!("invalid domain list '{s}'"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(Error::Usage(format!("domain counts must be at least 1: '{s}'")));
    }
    Ok(out)
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| Error::Usage(format!("grid must be ROWSxCOLS, got '{s}'")))?;
    let (r, c): (usize, usize) = (
        r.parse().map_err(|_| Error::Usage(format!("bad grid rows '{r}'")))?,
        c.parse().map_err(|_| Error::Usage(format!("bad grid columns '{c}'")))?,
    );
    if r < 2 || c < 2 {
        return Err(Error::Usage("grid needs at least 2 rows and 2 columns".into()));
    }
    Ok((r, c))
}

fn network(s: &mut Settings, a: &NetArgs) -> Result<Network> {
    let file = s.path("net", &a.net)?;
    let grid = s.opt("grid", a.grid.clone())?;
    match (file, grid) {
        (Some(_), Some(_)) => Err(Error::Usage("give either --net or --grid, not both".into())),
        (Some(path), None) => Ok(load_network(&read(&path)?)?),
        (None, Some(g)) => {
            let (r, c) = parse_grid(&g)?;
            let spacing = s.get("spacing", a.spacing, 75.0)?;
            let lanes = s.get("lanes", a.lanes, 1u8)?;
            if !(spacing > 0.0 && spacing.is_finite()) || lanes == 0 {
                return Err(Error::Usage("grid spacing and lanes must be positive".into()));
            }
            Ok(generate_grid(r, c, spacing, lanes))
        }
        (None, None) => Err(Error::Usage("a network is required: --net FILE or --grid ROWSxCOLS".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Method {
    Orb,
    Multilevel,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Orb => "orb",
            Method::Multilevel => "multilevel",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "orb" => Ok(Method::Orb),
            "multilevel" | "ml" => Ok(Method::Multilevel),
            _ => Err(Error::Usage(format!("unknown partitioner '{s}' (orb, multilevel)"))),
        }
    }

    fn partition(self, net: &Network, w: &[f64], p: usize, seed: u64) -> Result<Partition> {
        Ok(match self {
            Method::Orb => orthogonal_bisection(net, w, p)?,
            Method::Multilevel => multilevel_partition(net, w, p, seed)?,
        })
    }
}

/// Node weights from `--weights`, `--load` or link lengths, with a label.
fn node_weights(s: &mut Settings, net: &Network, weights: &Option<PathBuf>, load: &Option<PathBuf>) -> Result<NodeWeights> {
    let weights = s.path("weights", weights)?;
    let load = s.path("load", load)?;
    match (weights, load) {
        (Some(_), Some(_)) => Err(Error::Usage("give either --weights or --load, not both".into())),
        (Some(path), None) => Ok(read_weights(&read(&path)?, net)?),
        (None, Some(path)) => {
            let prof = loadbal::collect(net, &read(&path)?, None)?;
            Ok(loadbal::to_weights(&prof, net).weights)
        }
        (None, None) => Ok(loadbal::length_weights(net)),
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut s = Settings::new(&a.common)?;
    let seed = s.seed();
    let net = Arc::new(network(&mut s, &a.network)?);
    let plans_file = s.path("plans", &a.plans)?;
    let trips = s.opt("trips", a.trips)?;
    let p = s.get("p", a.p, 1usize)?;
    let method = Method::parse(&s.get("partitioner", a.partitioner.clone(), "orb".into())?)?;
    let weights = node_weights(&mut s, &net, &a.weights, &a.load)?;
    let duration = s.get("duration", a.duration, 3600u32)?;
    let p_brake = s.get("p-brake", a.p_brake, 0.2)?;
    let required_gap = s.get("required-gap", a.required_gap, 5u8)?;
    let transport: TransportKind = s.get("transport", a.transport.clone(), "channel".into())?.parse().map_err(Error::Usage)?;
    let trace = s.flag("trace", a.trace)?;
    let snapshot_every = s.opt("snapshot-every", a.snapshot_every)?;
    let plans: Vec<Plan> = match (plans_file, trips) {
        (Some(_), Some(_)) => return Err(Error::Usage("give either --plans or --trips, not both".into())),
        (Some(path), None) => load_plans(&read(&path)?, &net)?,
        (None, Some(n)) => {
            let window = s.get("departure-window", a.departure_window, 600u32)?;
            if net.link_count() < 2 {
                return Err(Error::Usage("random trips need at least two links".into()));
            }
            random_trips(&net, n, window, seed)
        }
        (None, None) => return Err(Error::Usage("plans are required: --plans FILE or --trips N".into())),
    };
    if !(0.0..=1.0).contains(&p_brake) {
        return Err(Error::Usage(format!("p-brake must be in [0, 1], got {p_brake}")));
    }
    if snapshot_every == Some(0) {
        return Err(Error::Usage("snapshot-every must be positive".into()));
    }
    s.finish()?;

    let part = if p == 1 { Partition::single(&net) } else { method.partition(&net, &weights, p, seed)? };
    let cfg = CaConfig { p_brake, seed, required_gap };
    let opts = RunOptions { steps: duration, transport, trace, digests: false, snapshot_every, detectors: Vec::new() };
    let summary = parengine::run(net.clone(), &part, plans, cfg, &opts)?;

    let mut buf = format!("seed={seed}\npartitioner={}\n", method.name()).into_bytes();
    summary.write_text(&mut buf).expect("writing to memory");
    let text = String::from_utf8(buf).unwrap();
    s.write("summary.txt", &text)?;
    s.write("partition.txt", &write_partition(&net, &part))?;
    s.write("load.txt", &write_load_file(&net, &summary.link_work, &summary.node_work))?;
    if let Some(t) = &summary.trace {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).expect("writing to memory");
        s.write("trace.csv", &String::from_utf8(buf).unwrap())?;
    }
    if snapshot_every.is_some() {
        let mut buf = Vec::new();
        for (i, snap) in summary.snapshots.iter().enumerate() {
            write_snapshot_csv(&mut buf, &net, snap, i == 0).expect("writing to memory");
        }
        s.write("snapshots.csv", &String::from_utf8(buf).unwrap())?;
    }
    print!("{text}");
    eprintln!("wall_s={:.3}", summary.wall.as_secs_f64());
    Ok(())
}

pub fn partition(a: &PartitionArgs) -> Result<()> {
    let mut s = Settings::new(&a.common)?;
    let seed = s.seed();
    let net = network(&mut s, &a.network)?;
    let ps = parse_p_list(&s.get("p", a.p.clone(), "1,2,4,8,16,32,64".into())?)?;
    let methods = match s.get("method", a.method.clone(), "both".into())?.as_str() {
        "both" => vec![Method::Orb, Method::Multilevel],
        m => vec![Method::parse(m)?],
    };
    let weights = node_weights(&mut s, &net, &a.weights, &a.load)?;
    let fit = s.flag("fit", a.fit)?;
    if let Some(&p) = ps.iter().find(|&&p| p > net.node_count()) {
        return Err(Error::Usage(format!("p = {p} exceeds the {} nodes of the network", net.node_count())));
    }
    s.finish()?;

    let mut csv = format!("method,{METRICS_HEADER}\n");
    let mut fits = String::from("method,A,alpha,offset_form,sse\n");
    for &m in &methods {
        let mut samples = Vec::new();
        for &p in &ps {
            let part = m.partition(&net, &weights, p, seed)?;
            let metrics = compute_metrics(&net, &part, &weights);
            let _ = writeln!(csv, "{},{}", m.name(), metrics_row(&metrics));
            s.write(&format!("partition_{}_p{p}.txt", m.name()), &write_partition(&net, &part))?;
            samples.push((p as f64, metrics.n_spl as f64));
        }
        if fit {
            let f = fit_split_scaling(&samples)?;
            let _ = writeln!(fits, "{},{:.6},{:.6},{},{:.6}", m.name(), f.a, f.alpha, f.offset_form, f.sse);
        }
    }
    s.write("metrics.csv", &csv)?;
    print!("{csv}");
    if fit {
        s.write("fit.csv", &fits)?;
        print!("{fits}");
    }
    Ok(())
}

pub fn balance(a: &BalanceArgs) -> Result<()> {
    let mut s = Settings::new(&a.common)?;
    let seed = s.seed();
    let net = network(&mut s, &a.network)?;
    let load = s.path("load", &a.load)?.ok_or_else(|| Error::Usage("--load FILE is required".into()))?;
    let p = s.opt("p", a.p)?;
    let method = Method::parse(&s.get("partitioner", a.partitioner.clone(), "orb".into())?)?;
    s.finish()?;

    let profile = loadbal::collect(&net, &read(&load)?, None)?;
    let w = loadbal::to_weights(&profile, &net);
    s.write("weights.txt", &write_weights(&net, &w.weights))?;
    let mut report = format!(
        "seed={seed}\nprofile_total={}\nweight_total={}\nfloor_adjustment={}\nfloored_nodes={}\n",
        profile.total(),
        w.weights.iter().sum::<f64>(),
        w.floor_adjustment,
        w.floored_nodes
    );
    if let Some(l) = profile.busiest_link() {
        let _ = writeln!(report, "busiest_link={}", net.link(l).id);
    }
    if let Some(p) = p {
        let fed = method.partition(&net, &w.weights, p, seed)?;
        let base = method.partition(&net, &loadbal::length_weights(&net), p, seed)?;
        let max = |part: &Partition| {
            loadbal::domain_work(&net, &profile, part.assignment(), p).into_iter().fold(0.0, f64::max)
        };
        let _ = writeln!(report, "p={p}\nmax_domain_work_length={}\nmax_domain_work_feedback={}", max(&base), max(&fed));
        s.write("partition.txt", &write_partition(&net, &fed))?;
    }
    s.write("balance.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn label_file(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn parse_samples(text: &str) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() || line.starts_with(|c: char| c.is_alphabetic()) {
            continue;
        }
        let f: Vec<&str> = line.split([',', ' ', '\t']).filter(|x| !x.is_empty()).collect();
        let bad = || Error::Usage(format!("samples line {}: expected 'p seconds'", i + 1));
        if f.len() != 2 {
            return Err(bad());
        }
        out.push((f[0].parse().map_err(|_| bad())?, f[1].parse().map_err(|_| bad())?));
    }
    Ok(out)
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let mut s = Settings::new(&a.common)?;
    let hardware = s.get("hardware", a.hardware.clone(), "100mbit-switched".into())?;
    let scenario = s.get("scenario", a.scenario.clone(), "planning-20k".into())?;
    let profile = s.path("profile", &a.profile)?;
    let scenario_file = s.path("scenario-file", &a.scenario_file)?;
    let default_ps = (0..=10).map(|k| (1usize << k).to_string()).collect::<Vec<_>>().join(",");
    let ps = parse_p_list(&s.get("p", a.p.clone(), default_ps)?)?;
    let target = s.opt("target-rtr", a.target_rtr.clone())?;
    let samples = s.path("samples", &a.samples)?;
    let fit = s.get("fit", a.fit.clone(), "t1".into())?;
    if !a.compare.is_empty() {
        let list = a.compare.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
        s.resolved.insert("compare".into(), list);
    }
    s.finish()?;

    let mut setups = Vec::new();
    let base = (hardware_preset(&hardware)?, scenario_preset(&scenario)?);
    let profile_files: Vec<PathBuf> = if a.compare.is_empty() { profile.into_iter().collect() } else { a.compare.clone() };
    if profile_files.is_empty() {
        setups.push(base);
    }
    for path in &profile_files {
        let text = format!("hardware={hardware}\nscenario={scenario}\n{}", read(path)?);
        setups.push(parse_profile(&text)?);
    }
    if let Some(path) = &scenario_file {
        let text = read(path)?;
        for (hw, sc) in &mut setups {
            for (i, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap().trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::Usage(format!("{}:{}: expected key=value", path.display(), i + 1))
                })?;
                perfmodel::apply_key(hw, sc, k.trim(), v.trim())
                    .map_err(|msg| Error::Usage(format!("{}:{}: {msg}", path.display(), i + 1)))?;
            }
        }
    }
    if let Some(t) = &target {
        let bad = || Error::Usage(format!("target-rtr must be P:R, got '{t}'"));
        let (p, r) = t.split_once(':').ok_or_else(bad)?;
        let (p, r): (usize, f64) = (p.parse().map_err(|_| bad())?, r.parse().map_err(|_| bad())?);
        for (hw, sc) in &mut setups {
            hw.t_1 = perfmodel::solve_t1_for_rtr(hw, sc, p, r)?;
        }
    }
    let mut report = String::new();
    if let Some(path) = &samples {
        let samples = parse_samples(&read(path)?)?;
        let unknowns: Vec<perfmodel::Unknown> =
            fit.split(',').map(|u| u.trim().parse()).collect::<Result<_, _>>()?;
        for (hw, sc) in &mut setups {
            let c = calibrate(&samples, hw, sc, &unknowns)?;
            let _ = writeln!(report, "# calibrated {}: rms {:.6e} s", c.hardware.label, c.rms);
            *hw = c.hardware;
            *sc = c.scenario;
        }
    }

    let many = setups.len() > 1;
    for (hw, sc) in &setups {
        let pred = predict_curve(hw, sc, &ps)?;
        let name = if many { format!("prediction_{}.csv", label_file(&hw.label)) } else { "prediction.csv".into() };
        s.write(&name, &pred.to_csv())?;
        let profile_name = if many { format!("profile_{}.txt", label_file(&hw.label)) } else { "profile.txt".into() };
        s.write(&profile_name, &perfmodel::write_profile(hw, sc))?;
        let best = pred.rows.iter().max_by(|x, y| x.rtr.total_cmp(&y.rtr)).unwrap();
        let regime = match pred.regime {
            Regime::BandwidthGrowth => "bandwidth growth".to_string(),
            Regime::LatencyPlateau { rtr_ceiling } => format!("latency plateau, rtr ceiling {rtr_ceiling:.2}"),
        };
        let _ = writeln!(
            report,
            "{} / {}: T_1={:.6} s, best rtr {:.2} at p={}, {regime} -> {name}",
            pred.hardware, pred.scenario, hw.t_1, best.rtr, best.p
        );
    }
    print!("{report}");
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> Result<()> {
    let mut s = Settings::new(&a.common)?;
    let d = ValidateConfig::default();
    let cfg = ValidateConfig {
        seed: s.seed(),
        ring_cells: s.get("ring-cells", a.ring_cells, d.ring_cells)?,
        steps: s.get("steps", a.steps, d.steps)?,
        warmup: s.opt("warmup", a.warmup)?,
        domains: s.get("p", a.p, d.domains)?,
        p_brake: s.get("p-brake", a.p_brake, d.p_brake)?,
        required_gap: s.get("required-gap", a.required_gap, d.required_gap)?,
    };
    if cfg.ring_cells < 40 || cfg.steps == 0 || cfg.domains == 0 || !(0.0..=1.0).contains(&cfg.p_brake) {
        return Err(Error::Usage("need ring-cells >= 40, steps >= 1, p >= 1 and p-brake in [0, 1]".into()));
    }
    s.finish()?;
    let checks = run_suite(&cfg, &s.out_dir)?;
    for c in &checks {
        println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Partition(a) => partition(a),
        Command::Balance(a) => balance(a),
        Command::Predict(a) => predict(a),
        Command::Validate(a) => validate(a),
    }
}

/// Parse arguments, run the command and return the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_lists() {
        assert_eq!(parse_p_list("8").unwrap(), vec![8]);
        assert_eq!(parse_p_list("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_p_list("2, 4,16..17").unwrap(), vec![2, 4, 16, 17]);
        assert!(parse_p_list("0").is_err());
        assert!(parse_p_list("5..2").is_err());
        assert!(parse_p_list("x").is_err());
    }

    #[test]
    fn grid_spec() {
        assert_eq!(parse_grid("10x12").unwrap(), (10, 12));
        assert!(parse_grid("1x5").is_err());
        assert!(parse_grid("10").is_err());
    }

    #[test]
    fn config_file_fills_missing_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "# defaults\nseed = 9\np_brake=0.5\nout-dir=x\n").unwrap();
        let common = Common { seed: None, out_dir: Some(dir.path().to_path_buf()), config: Some(cfg) };
        let mut s = Settings::new(&common).unwrap();
        assert_eq!(s.seed(), 9);
        assert_eq!(s.out_dir, dir.path());
        assert_eq!(s.get("p-brake", None, 0.2).unwrap(), 0.5);
        assert_eq!(s.get("p-brake", Some(0.1), 0.2).unwrap(), 0.1);
        s.finish().unwrap();
        let written = std::fs::read_to_string(dir.path().join("config.txt")).unwrap();
        assert_eq!(written, "p-brake=0.1\nseed=9\n");
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "colour=blue\n").unwrap();
        let common = Common { seed: None, out_dir: Some(dir.path().to_path_buf()), config: Some(cfg) };
        let s = Settings::new(&common).unwrap();
        assert!(matches!(s.finish(), Err(Error::Usage(_))));
    }

    #[test]
    fn sample_lines() {
        let v = parse_samples("p,seconds\n1 0.25\n4,0.07 # measured\n").unwrap();
        assert_eq!(v, vec![(1, 0.25), (4, 0.07)]);
        assert!(parse_samples("1 2 3").is_err());
    }
}
