//! Analytic step-time model for a decomposed run.
//!
//! ```text
//! T(p)   = T_cmp + T_lat + T_bnd_node + T_bnd_net
//! T_cmp  = (T_1 / p) (1 + f_ovr(p) + f_dmn(p))
//! T_lat  = N_sub n_nb(p) T_lt
//! T_bnd_node = N_sub (N_spl(p) / p) 8 S_bnd / b_nd
//! T_bnd_net  = N_sub N_spl(p) 8 S_bnd / b_net
//! ```
//!
//! A simulated step covers one second, so the real-time ratio is
//! `1 s / T(p)`.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::partition::ScalingFit;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("parameter {name}: {msg}")]
    BadParameter { name: &'static str, msg: String },
    #[error("unknown {kind} preset '{name}'")]
    UnknownPreset { kind: &'static str, name: String },
    #[error("no split-link count for p={0}")]
    MissingSplitCount(usize),
    #[error("speedup needs a p=1 row")]
    MissingBaseline,
    #[error("empty domain-count list")]
    EmptyCurve,
    #[error("{unknowns} unknowns cannot be fitted from {samples} samples at {distinct} distinct domain counts")]
    Underdetermined { unknowns: usize, samples: usize, distinct: usize },
    #[error("profile line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("least-squares solve failed: {0}")]
    Numerical(String),
}

impl ModelError {
    pub fn is_input_error(&self) -> bool {
        !matches!(self, ModelError::Numerical(_))
    }
}

/// Expected number of neighbour domains of a domain in a planar
/// decomposition into `p` parts.
pub fn n_nb(p: usize) -> f64 {
    let s = (p as f64).sqrt();
    2.0 * (3.0 * s - 1.0) * (s - 1.0) / p as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    BitsPerSecond(f64),
    /// Switched topology: the shared medium never limits.
    Unlimited,
}

impl Bandwidth {
    /// Seconds to move `bits`.
    fn time(self, bits: f64) -> f64 {
        match self {
            Bandwidth::BitsPerSecond(b) => bits / b,
            Bandwidth::Unlimited => 0.0,
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::BitsPerSecond(b) => write!(f, "{b}"),
            Bandwidth::Unlimited => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardwareProfile {
    pub label: String,
    /// Latency per message, seconds.
    pub t_lt: f64,
    /// Node bandwidth, bits per second.
    pub b_nd: f64,
    pub b_net: Bandwidth,
    /// Single-CPU time per step, seconds.
    pub t_1: f64,
}

/// Presets cover the cluster configurations discussed for commodity
/// Ethernet plus a low-latency machine. All share the per-CPU speed
/// [`reference_t1`].
pub const HARDWARE_PRESETS: [&str; 6] =
    ["10mbit-shared", "10mbit-switched", "100mbit-switched", "gbit-shared", "gbit-switched", "supercomputer"];

/// Single-CPU step time that gives `rtr(16) = 40` for the
/// `100mbit-switched` / `planning-20k` pair. Back-solved, not measured.
pub fn reference_t1() -> f64 {
    let hw = HardwareProfile { t_1: 1.0, ..hardware_preset_raw("100mbit-switched").unwrap() };
    solve_t1_for_rtr(&hw, &scenario_preset("planning-20k").unwrap(), 16, 40.0).unwrap()
}

fn hardware_preset_raw(name: &str) -> Option<HardwareProfile> {
    use Bandwidth::*;
    let mbit = 1e6;
    let (t_lt, b_nd, b_net) = match name {
        "10mbit-shared" => (0.8e-3, 5.0 * mbit, BitsPerSecond(10.0 * mbit)),
        "10mbit-switched" => (0.8e-3, 5.0 * mbit, Unlimited),
        "100mbit-switched" => (0.8e-3, 50.0 * mbit, Unlimited),
        "gbit-shared" => (0.8e-3, 500.0 * mbit, BitsPerSecond(1000.0 * mbit)),
        "gbit-switched" => (0.8e-3, 500.0 * mbit, Unlimited),
        // Assumed: a tenth of the Ethernet latency and Gbit links.
        "supercomputer" => (0.08e-3, 1000.0 * mbit, Unlimited),
        _ => return None,
    };
    Some(HardwareProfile { label: name.to_string(), t_lt, b_nd, b_net, t_1: 0.0 })
}

pub fn hardware_preset(name: &str) -> Result<HardwareProfile, ModelError> {
    let hw = hardware_preset_raw(name).ok_or_else(|| ModelError::UnknownPreset { kind: "hardware", name: name.into() })?;
    Ok(HardwareProfile { t_1: reference_t1(), ..hw })
}

impl HardwareProfile {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ModelError::BadParameter { name, msg: format!("must be positive and finite, got {v}") })
            }
        };
        positive("t_lt", self.t_lt)?;
        positive("b_nd", self.b_nd)?;
        positive("t_1", self.t_1)?;
        if let Bandwidth::BitsPerSecond(b) = self.b_net {
            positive("b_net", b)?;
            if b < self.b_nd {
                return Err(ModelError::BadParameter {
                    name: "b_net",
                    msg: format!("network bandwidth {b} is below node bandwidth {}", self.b_nd),
                });
            }
        }
        Ok(())
    }
}

/// Split-link count as a function of the domain count.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitModel {
    Fit(ScalingFit),
    /// Measured `(p, N_spl)` pairs; other `p` are an error.
    Table(Vec<(usize, f64)>),
}

impl SplitModel {
    pub fn offset(a: f64, alpha: f64) -> Self {
        SplitModel::Fit(ScalingFit { a, alpha, offset_form: true, sse: 0.0 })
    }

    pub fn plain(a: f64, alpha: f64) -> Self {
        SplitModel::Fit(ScalingFit { a, alpha, offset_form: false, sse: 0.0 })
    }

    /// A single domain has no split links whatever the fitted form says.
    pub fn n_spl(&self, p: usize) -> Result<f64, ModelError> {
        if p == 1 {
            return Ok(0.0);
        }
        match self {
            SplitModel::Fit(f) => Ok(f.eval(p as f64).max(0.0)),
            SplitModel::Table(t) => {
                t.iter().find(|&&(q, _)| q == p).map(|&(_, n)| n).ok_or(ModelError::MissingSplitCount(p))
            }
        }
    }
}

/// Relative correction to the computation term as a function of `p`.
#[derive(Clone)]
pub enum Correction {
    Zero,
    Constant(f64),
    /// Exact `(p, value)` pairs; zero elsewhere.
    Table(Vec<(usize, f64)>),
    Func(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl Correction {
    /// Imbalance term `1/e_dmn - 1` from measured partition efficiencies.
    pub fn from_efficiencies(e_dmn: &[(usize, f64)]) -> Self {
        Correction::Table(e_dmn.iter().map(|&(p, e)| (p, 1.0 / e - 1.0)).collect())
    }

    pub fn eval(&self, p: usize) -> f64 {
        match self {
            Correction::Zero => 0.0,
            Correction::Constant(c) => *c,
            Correction::Table(t) => t.iter().find(|&&(q, _)| q == p).map_or(0.0, |&(_, v)| v),
            Correction::Func(f) => f(p),
        }
    }
}

impl fmt::Debug for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correction::Zero => f.write_str("Zero"),
            Correction::Constant(c) => write!(f, "Constant({c})"),
            Correction::Table(t) => write!(f, "Table({t:?})"),
            Correction::Func(_) => f.write_str("Func(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioProfile {
    pub label: String,
    /// Boundary exchanges per step.
    pub n_sub: u32,
    /// Bytes per split link per exchange.
    pub s_bnd: f64,
    pub split: SplitModel,
    pub f_ovr: Correction,
    pub f_dmn: Correction,
    /// Multiplier on the hardware `T_1` for larger or smaller problems.
    pub t1_scale: f64,
}

pub const SCENARIO_PRESETS: [&str; 3] = ["planning-20k", "planning-20k-empty", "planning-200k"];

/// Presets for a 20,000-link metropolitan network with and without
/// vehicles, and a ten times larger network assumed eight times slower per
/// step.
pub fn scenario_preset(name: &str) -> Result<ScenarioProfile, ModelError> {
    let (s_bnd, split, t1_scale) = match name {
        "planning-20k" => (200.0, SplitModel::offset(140.0, 0.59), 1.0),
        "planning-20k-empty" => (40.0, SplitModel::offset(140.0, 0.59), 1.0),
        "planning-200k" => (200.0, SplitModel::plain(250.0, 0.59), 8.0),
        _ => return Err(ModelError::UnknownPreset { kind: "scenario", name: name.into() }),
    };
    Ok(ScenarioProfile {
        label: name.into(),
        n_sub: 2,
        s_bnd,
        split,
        f_ovr: Correction::Zero,
        f_dmn: Correction::Zero,
        t1_scale,
    })
}

impl ScenarioProfile {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_sub < 1 {
            return Err(ModelError::BadParameter { name: "n_sub", msg: "must be at least 1".into() });
        }
        if !(self.s_bnd.is_finite() && self.s_bnd > 0.0) {
            return Err(ModelError::BadParameter { name: "s_bnd", msg: format!("must be positive, got {}", self.s_bnd) });
        }
        if !(self.t1_scale.is_finite() && self.t1_scale > 0.0) {
            return Err(ModelError::BadParameter { name: "t1_scale", msg: format!("must be positive, got {}", self.t1_scale) });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionRow {
    pub p: usize,
    pub t_cmp: f64,
    pub t_lat: f64,
    pub t_bnd_node: f64,
    pub t_bnd_net: f64,
    pub t_total: f64,
    pub rtr: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

/// Limit behaviour of `T(p)` for large `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    /// Shared medium: the network-bandwidth term grows with the split-link
    /// count, so adding CPUs eventually slows the run down.
    BandwidthGrowth,
    /// Switched: the real-time ratio tends to `1 / (N_sub * 6 * T_lt)`. With
    /// fewer than six neighbours at finite p it may sit slightly above.
    LatencyPlateau { rtr_ceiling: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub hardware: String,
    pub scenario: String,
    pub rows: Vec<PredictionRow>,
    pub regime: Regime,
}

/// One row of the model. Speedup and efficiency are left at NaN; see
/// [`speedup_efficiency`].
pub fn predict_step_time(hw: &HardwareProfile, sc: &ScenarioProfile, p: usize) -> Result<PredictionRow, ModelError> {
    if p == 0 {
        return Err(ModelError::BadParameter { name: "p", msg: "must be at least 1".into() });
    }
    hw.validate()?;
    sc.validate()?;
    let pf = p as f64;
    let n_spl = sc.split.n_spl(p)?;
    let n_sub = sc.n_sub as f64;
    let bits = 8.0 * sc.s_bnd;
    let t_cmp = hw.t_1 * sc.t1_scale / pf * (1.0 + sc.f_ovr.eval(p) + sc.f_dmn.eval(p));
    let t_lat = n_sub * n_nb(p) * hw.t_lt;
    let t_bnd_node = n_sub * n_spl / pf * bits / hw.b_nd;
    let t_bnd_net = n_sub * hw.b_net.time(n_spl * bits);
    let t_total = t_cmp + t_lat + t_bnd_node + t_bnd_net;
    Ok(PredictionRow {
        p,
        t_cmp,
        t_lat,
        t_bnd_node,
        t_bnd_net,
        t_total,
        rtr: 1.0 / t_total,
        speedup: f64::NAN,
        efficiency: f64::NAN,
    })
}

pub fn predict_curve(hw: &HardwareProfile, sc: &ScenarioProfile, ps: &[usize]) -> Result<Prediction, ModelError> {
    if ps.is_empty() {
        return Err(ModelError::EmptyCurve);
    }
    let mut rows = ps.iter().map(|&p| predict_step_time(hw, sc, p)).collect::<Result<Vec<_>, _>>()?;
    if rows.iter().any(|r| r.p == 1) {
        speedup_efficiency(&mut rows)?;
    }
    let regime = match hw.b_net {
        Bandwidth::BitsPerSecond(_) => Regime::BandwidthGrowth,
        Bandwidth::Unlimited => Regime::LatencyPlateau { rtr_ceiling: 1.0 / (sc.n_sub as f64 * 6.0 * hw.t_lt) },
    };
    Ok(Prediction { hardware: hw.label.clone(), scenario: sc.label.clone(), rows, regime })
}

/// Fill `S(p) = T(1)/T(p)` and `E(p) = S(p)/p`.
pub fn speedup_efficiency(rows: &mut [PredictionRow]) -> Result<(), ModelError> {
    let t1 = rows.iter().find(|r| r.p == 1).ok_or(ModelError::MissingBaseline)?.t_total;
    for r in rows {
        r.speedup = t1 / r.t_total;
        r.efficiency = r.speedup / r.p as f64;
    }
    Ok(())
}

/// `T_1` such that `rtr(p)` equals `target`.
pub fn solve_t1_for_rtr(hw: &HardwareProfile, sc: &ScenarioProfile, p: usize, target: f64) -> Result<f64, ModelError> {
    let probe = HardwareProfile { t_1: 1.0, ..hw.clone() };
    let row = predict_step_time(&probe, sc, p)?;
    let comm = row.t_total - row.t_cmp;
    let t1 = (1.0 / target - comm) / row.t_cmp;
    if t1 > 0.0 {
        Ok(t1)
    } else {
        Err(ModelError::BadParameter {
            name: "rtr",
            msg: format!("communication alone limits rtr({p}) to {:.3}", 1.0 / comm),
        })
    }
}

pub const PREDICTION_HEADER: &str = "p,T_cmp,T_lat,T_bnd_node,T_bnd_net,T_total,rtr,speedup,efficiency";

impl Prediction {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{PREDICTION_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.6},{:.6},{:.6}",
                r.p, r.t_cmp, r.t_lat, r.t_bnd_node, r.t_bnd_net, r.t_total, r.rtr, r.speedup, r.efficiency
            );
        }
        out
    }
}

/// Model parameters a calibration may fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unknown {
    T1,
    Tlt,
    Sbnd,
}

impl std::str::FromStr for Unknown {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "t_1" | "T_1" | "t1" => Ok(Unknown::T1),
            "t_lt" | "T_lt" | "tlt" => Ok(Unknown::Tlt),
            "s_bnd" | "S_bnd" | "sbnd" => Ok(Unknown::Sbnd),
            _ => Err(ModelError::BadParameter { name: "unknowns", msg: format!("cannot fit '{s}'") }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Calibration {
    pub hardware: HardwareProfile,
    pub scenario: ScenarioProfile,
    /// Measured minus predicted, per sample.
    pub residuals: Vec<f64>,
    pub rms: f64,
}

/// Least-squares fit of the chosen parameters to measured `(p, T)` pairs.
/// The model is linear in each of `T_1`, `T_lt` and `S_bnd`, so the fit is
/// a linear solve.
pub fn calibrate(
    samples: &[(usize, f64)],
    hw: &HardwareProfile,
    sc: &ScenarioProfile,
    unknowns: &[Unknown],
) -> Result<Calibration, ModelError> {
    let mut unknowns = unknowns.to_vec();
    unknowns.dedup();
    let mut distinct: Vec<usize> = samples.iter().map(|s| s.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let underdetermined = ModelError::Underdetermined {
        unknowns: unknowns.len(),
        samples: samples.len(),
        distinct: distinct.len(),
    };
    if unknowns.is_empty() || distinct.len() < unknowns.len() {
        return Err(underdetermined);
    }
    // Unit coefficients: the prediction with one parameter at 1 and the
    // others at 0, per term.
    let unit_hw = HardwareProfile { t_1: 1.0, t_lt: 1.0, ..hw.clone() };
    let unit_sc = ScenarioProfile { s_bnd: 1.0, ..sc.clone() };
    let n = samples.len();
    let m = unknowns.len();
    let mut a = DMatrix::zeros(n, m);
    let mut b = DVector::zeros(n);
    for (i, &(p, t)) in samples.iter().enumerate() {
        let u = predict_step_time(&unit_hw, &unit_sc, p)?;
        let coef = |k: Unknown| match k {
            Unknown::T1 => u.t_cmp,
            Unknown::Tlt => u.t_lat,
            Unknown::Sbnd => u.t_bnd_node + u.t_bnd_net,
        };
        let value = |k: Unknown| match k {
            Unknown::T1 => hw.t_1,
            Unknown::Tlt => hw.t_lt,
            Unknown::Sbnd => sc.s_bnd,
        };
        let mut known = 0.0;
        for k in [Unknown::T1, Unknown::Tlt, Unknown::Sbnd] {
            match unknowns.iter().position(|&x| x == k) {
                Some(j) => a[(i, j)] = coef(k),
                None => known += coef(k) * value(k),
            }
        }
        b[i] = t - known;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().any(|&s| s <= smax * 1e-10) {
        return Err(underdetermined);
    }
    let x = svd.solve(&b, smax * 1e-12).map_err(|e| ModelError::Numerical(e.to_string()))?;
    let mut hw = hw.clone();
    let mut sc = sc.clone();
    for (j, k) in unknowns.iter().enumerate() {
        match k {
            Unknown::T1 => hw.t_1 = x[j],
            Unknown::Tlt => hw.t_lt = x[j],
            Unknown::Sbnd => sc.s_bnd = x[j],
        }
    }
    hw.validate()?;
    sc.validate()?;
    let residuals: Vec<f64> = samples
        .iter()
        .map(|&(p, t)| predict_step_time(&hw, &sc, p).map(|r| t - r.t_total))
        .collect::<Result<_, _>>()?;
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    Ok(Calibration { hardware: hw, scenario: sc, residuals, rms })
}

/// Read a `key=value` profile. `hardware=` and `scenario=` select presets,
/// later keys override single parameters. Times are seconds, bandwidths bits
/// per second (`inf` allowed for `b_net`), `s_bnd` bytes.
pub fn parse_profile(text: &str) -> Result<(HardwareProfile, ScenarioProfile), ModelError> {
    let mut hw = hardware_preset("100mbit-switched")?;
    let mut sc = scenario_preset("planning-20k")?;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap().trim();
        if s.is_empty() {
            continue;
        }
        let (k, v) = s.split_once('=').ok_or(ModelError::Parse { line, msg: format!("expected key=value, got '{s}'") })?;
        let (k, v) = (k.trim(), v.trim());
        apply_key(&mut hw, &mut sc, k, v).map_err(|msg| ModelError::Parse { line, msg })?;
    }
    hw.validate()?;
    sc.validate()?;
    Ok((hw, sc))
}

/// Set one profile parameter from its text form.
pub fn apply_key(hw: &mut HardwareProfile, sc: &mut ScenarioProfile, k: &str, v: &str) -> Result<(), String> {
    let num = |v: &str| v.parse::<f64>().map_err(|_| format!("{k}: bad number '{v}'"));
    let pairs = |v: &str| -> Result<Vec<(usize, f64)>, String> {
        v.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|pair| {
                let (p, x) = pair.split_once(':').ok_or(format!("{k}: expected p:value pairs"))?;
                Ok((p.trim().parse().map_err(|_| format!("{k}: bad p '{p}'"))?, num(x.trim())?))
            })
            .collect()
    };
    match k {
        "hardware" => *hw = hardware_preset(v).map_err(|e| e.to_string())?,
        "scenario" => *sc = scenario_preset(v).map_err(|e| e.to_string())?,
        "hardware_label" => hw.label = v.into(),
        "scenario_label" => sc.label = v.into(),
        "t_lt" => hw.t_lt = num(v)?,
        "b_nd" => hw.b_nd = num(v)?,
        "b_net" => {
            hw.b_net = if v == "inf" { Bandwidth::Unlimited } else { Bandwidth::BitsPerSecond(num(v)?) };
        }
        "t_1" => hw.t_1 = num(v)?,
        "n_sub" => sc.n_sub = v.parse().map_err(|_| format!("n_sub: bad integer '{v}'"))?,
        "s_bnd" => sc.s_bnd = num(v)?,
        "t1_scale" => sc.t1_scale = num(v)?,
        "split_a" | "split_alpha" | "split_offset" => {
            let mut f = match &sc.split {
                SplitModel::Fit(f) => *f,
                SplitModel::Table(_) => ScalingFit { a: 0.0, alpha: 0.5, offset_form: true, sse: 0.0 },
            };
            match k {
                "split_a" => f.a = num(v)?,
                "split_alpha" => f.alpha = num(v)?,
                _ => f.offset_form = v.parse().map_err(|_| format!("split_offset: expected true or false, got '{v}'"))?,
            }
            sc.split = SplitModel::Fit(f);
        }
        "split_table" => sc.split = SplitModel::Table(pairs(v)?),
        "f_ovr" => sc.f_ovr = Correction::Constant(num(v)?),
        "e_dmn" => sc.f_dmn = Correction::from_efficiencies(&pairs(v)?),
        _ => return Err(format!("unknown key '{k}'")),
    }
    Ok(())
}

/// Profile in the format read by [`parse_profile`].
pub fn write_profile(hw: &HardwareProfile, sc: &ScenarioProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "hardware_label={}", hw.label);
    let _ = writeln!(out, "t_lt={}", hw.t_lt);
    let _ = writeln!(out, "b_nd={}", hw.b_nd);
    let _ = writeln!(out, "b_net={}", hw.b_net);
    let _ = writeln!(out, "t_1={}", hw.t_1);
    let _ = writeln!(out, "scenario_label={}", sc.label);
    let _ = writeln!(out, "n_sub={}", sc.n_sub);
    let _ = writeln!(out, "s_bnd={}", sc.s_bnd);
    let _ = writeln!(out, "t1_scale={}", sc.t1_scale);
    match &sc.split {
        SplitModel::Fit(f) => {
            let _ = writeln!(out, "split_a={}\nsplit_alpha={}\nsplit_offset={}", f.a, f.alpha, f.offset_form);
        }
        SplitModel::Table(t) => {
            let s: Vec<String> = t.iter().map(|(p, n)| format!("{p}:{n}")).collect();
            let _ = writeln!(out, "split_table={}", s.join(","));
        }
    }
    out
}
