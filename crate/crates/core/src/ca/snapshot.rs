use std::io::{self, Write};

use super::VehicleId;
use crate::net::Network;
use crate::rng::mix;

/// One occupied cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellRecord {
    pub link: usize,
    pub lane: u8,
    pub cell: u32,
    pub vehicle: VehicleId,
    pub velocity: u8,
}

/// All occupied cells at one time, sorted by (link, lane, cell).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub time: u32,
    pub records: Vec<CellRecord>,
}

impl Snapshot {
    /// Merge per-domain snapshots taken at the same time.
    pub fn merge(parts: impl IntoIterator<Item = Snapshot>) -> Snapshot {
        let mut time = None;
        let mut records = Vec::new();
        for p in parts {
            assert!(time.is_none_or(|t| t == p.time), "snapshots from different times");
            time = Some(p.time);
            records.extend(p.records);
        }
        records.sort_unstable_by_key(|r| (r.link, r.lane, r.cell));
        Snapshot { time: time.unwrap_or(0), records }
    }

    pub fn digest(&self) -> u64 {
        digest(&self.records)
    }
}

/// Order-independent fingerprint of a set of cell records. Per-domain
/// digests add up to the digest of the whole network.
pub fn digest(records: &[CellRecord]) -> u64 {
    records.iter().fold(0u64, |acc, r| {
        let h = mix(mix(mix(r.link as u64 ^ ((r.lane as u64) << 40)) ^ r.cell as u64) ^ r.vehicle)
            ^ ((r.velocity as u64) << 56);
        acc.wrapping_add(mix(h))
    })
}

/// Append `time,vehicle_id,link_id,lane,cell,velocity` rows.
pub fn write_snapshot_csv<W: Write>(out: &mut W, net: &Network, snap: &Snapshot, header: bool) -> io::Result<()> {
    if header {
        writeln!(out, "time,vehicle_id,link_id,lane,cell,velocity")?;
    }
    for r in &snap.records {
        writeln!(out, "{},{},{},{},{},{}", snap.time, r.vehicle, net.link(r.link).id, r.lane, r.cell, r.velocity)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(link: usize, cell: u32, vehicle: u64) -> CellRecord {
        CellRecord { link, lane: 0, cell, vehicle, velocity: 1 }
    }

    #[test]
    fn digest_is_order_independent_and_additive() {
        let a = [rec(0, 1, 10), rec(1, 4, 11)];
        let b = [rec(2, 0, 12)];
        let all = [a[1], b[0], a[0]];
        assert_eq!(digest(&all), digest(&a).wrapping_add(digest(&b)));
        assert_ne!(digest(&a), digest(&[rec(0, 2, 10), rec(1, 4, 11)]));
    }

    #[test]
    fn merge_sorts() {
        let s = Snapshot::merge([
            Snapshot { time: 3, records: vec![rec(2, 0, 1)] },
            Snapshot { time: 3, records: vec![rec(0, 5, 2)] },
        ]);
        assert_eq!(s.records[0].link, 0);
        assert_eq!(s.time, 3);
    }
}
