use std::fmt::Write as _;
use std::io::{self, Write};

use crate::net::Network;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DomainStep {
    /// Time spent in the two sub-steps, excluding communication.
    pub elapsed_us: u64,
    /// Vehicle updates and crossing evaluations.
    pub work_units: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub step: u32,
    /// Indexed by domain.
    pub domains: Vec<DomainStep>,
}

/// Per-step, per-domain timing and work, plus accumulated work per network
/// element.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepTrace {
    pub steps: Vec<StepRecord>,
    pub link_work: Vec<u64>,
    pub node_work: Vec<u64>,
}

impl StepTrace {
    /// `step,domain,elapsed_us,work_units`, one row per step and domain.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "step,domain,elapsed_us,work_units")?;
        for s in &self.steps {
            for (d, r) in s.domains.iter().enumerate() {
                writeln!(out, "{},{},{},{}", s.step, d, r.elapsed_us, r.work_units)?;
            }
        }
        Ok(())
    }

    /// Work per domain summed over all steps.
    pub fn domain_work(&self) -> Vec<u64> {
        let p = self.steps.first().map_or(0, |s| s.domains.len());
        let mut out = vec![0; p];
        for s in &self.steps {
            for (d, r) in s.domains.iter().enumerate() {
                out[d] += r.work_units;
            }
        }
        out
    }

    pub fn total_work(&self) -> u64 {
        self.link_work.iter().sum::<u64>() + self.node_work.iter().sum::<u64>()
    }
}

/// Element loads as `L <link id> <work>` and `N <node id> <work>` lines.
pub fn write_load_file(net: &Network, link_work: &[u64], node_work: &[u64]) -> String {
    let mut out = String::from("# measured work per element\n");
    for (l, w) in net.links().iter().zip(link_work) {
        let _ = writeln!(out, "L {} {}", l.id, w);
    }
    for (n, w) in net.nodes().iter().zip(node_work) {
        let _ = writeln!(out, "N {} {}", n.id, w);
    }
    out
}
