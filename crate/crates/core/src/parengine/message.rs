//! Boundary messages and their binary encoding.
//!
//! Body layout (little-endian), preceded on stream transports by a `u32`
//! body length:
//!
//! ```text
//! u8  version
//! u32 sender, u32 receiver, u32 step, u8 phase
//! u32 strip count, then per strip:
//!     u32 link, u8 lane, u32 start, u32 cell count,
//!     per cell: u64 vehicle id (u64::MAX = empty), u8 velocity
//! u32 migrant count, then per migrant:
//!     u64 id, u8 velocity, u32 link, u8 lane, u32 cell,
//!     u32 route cursor, u32 departure time, u32 route length, u32 links...
//! ```

use std::sync::Arc;

use super::EngineError;
use crate::ca::{Migrant, Occupant};

pub const WIRE_VERSION: u8 = 1;

const EMPTY: u64 = u64::MAX;

/// Which of the synchronisation points a message belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Once, after initial vehicle placement.
    Setup = 0,
    /// After the lane-change sub-step.
    LaneChange = 1,
    /// After the move sub-step; carries migrants.
    Move = 2,
}

impl Phase {
    fn from_u8(b: u8) -> Option<Phase> {
        match b {
            0 => Some(Phase::Setup),
            1 => Some(Phase::LaneChange),
            2 => Some(Phase::Move),
            _ => None,
        }
    }
}

/// Cells of one lane of a split link, as owned by the sender.
#[derive(Clone, Debug, PartialEq)]
pub struct Strip {
    pub link: usize,
    pub lane: u8,
    pub start: u32,
    pub cells: Vec<Option<Occupant>>,
}

/// Everything one domain sends to one neighbour at one exchange.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMessage {
    pub sender: usize,
    pub receiver: usize,
    pub step: u32,
    pub phase: Phase,
    pub strips: Vec<Strip>,
    pub migrants: Vec<Migrant>,
}

impl BoundaryMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(64 + self.strips.len() * 50);
        b.push(WIRE_VERSION);
        put_u32(&mut b, self.sender as u32);
        put_u32(&mut b, self.receiver as u32);
        put_u32(&mut b, self.step);
        b.push(self.phase as u8);
        put_u32(&mut b, self.strips.len() as u32);
        for s in &self.strips {
            put_u32(&mut b, s.link as u32);
            b.push(s.lane);
            put_u32(&mut b, s.start);
            put_u32(&mut b, s.cells.len() as u32);
            for c in &s.cells {
                match c {
                    Some(o) => {
                        b.extend_from_slice(&o.id.to_le_bytes());
                        b.push(o.velocity);
                    }
                    None => {
                        b.extend_from_slice(&EMPTY.to_le_bytes());
                        b.push(0);
                    }
                }
            }
        }
        put_u32(&mut b, self.migrants.len() as u32);
        for m in &self.migrants {
            b.extend_from_slice(&m.id.to_le_bytes());
            b.push(m.velocity);
            put_u32(&mut b, m.link as u32);
            b.push(m.lane);
            put_u32(&mut b, m.cell);
            put_u32(&mut b, m.cursor);
            put_u32(&mut b, m.departed);
            put_u32(&mut b, m.route.len() as u32);
            for &l in m.route.iter() {
                put_u32(&mut b, l as u32);
            }
        }
        b
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, EngineError> {
        let mut r = Reader { bytes, pos: 0 };
        let version = r.u8()?;
        if version != WIRE_VERSION {
            return Err(EngineError::Decode(format!("unsupported wire version {version}")));
        }
        let sender = r.u32()? as usize;
        let receiver = r.u32()? as usize;
        let step = r.u32()?;
        let phase = r.u8()?;
        let phase = Phase::from_u8(phase).ok_or_else(|| EngineError::Decode(format!("unknown phase {phase}")))?;
        let n_strips = r.count(14)?;
        let mut strips = Vec::with_capacity(n_strips);
        for _ in 0..n_strips {
            let link = r.u32()? as usize;
            let lane = r.u8()?;
            let start = r.u32()?;
            let n = r.count(9)?;
            let mut cells = Vec::with_capacity(n);
            for _ in 0..n {
                let id = r.u64()?;
                let velocity = r.u8()?;
                cells.push((id != EMPTY).then_some(Occupant { id, velocity }));
            }
            strips.push(Strip { link, lane, start, cells });
        }
        let n_migrants = r.count(34)?;
        let mut migrants = Vec::with_capacity(n_migrants);
        for _ in 0..n_migrants {
            let id = r.u64()?;
            let velocity = r.u8()?;
            let link = r.u32()? as usize;
            let lane = r.u8()?;
            let cell = r.u32()?;
            let cursor = r.u32()?;
            let departed = r.u32()?;
            let n = r.count(4)?;
            let route: Vec<usize> = (0..n).map(|_| r.u32().map(|l| l as usize)).collect::<Result<_, _>>()?;
            if cursor as usize >= route.len() || route[cursor as usize] != link {
                return Err(EngineError::Decode(format!("migrant {id} has an inconsistent route cursor")));
            }
            migrants.push(Migrant { id, velocity, link, lane, cell, route: Arc::from(route), cursor, departed });
        }
        if r.pos != bytes.len() {
            return Err(EngineError::Decode(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { sender, receiver, step, phase, strips, migrants })
    }
}

fn put_u32(b: &mut Vec<u8>, v: u32) {
    b.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], EngineError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| EngineError::Decode(format!("message truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, EngineError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, EngineError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, EngineError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Element count, rejected early when the remaining bytes cannot hold
    /// that many elements of `min_size` bytes.
    fn count(&mut self, min_size: usize) -> Result<usize, EngineError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_size) > self.bytes.len() - self.pos {
            return Err(EngineError::Decode(format!("count {n} exceeds message size")));
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn occupant() -> impl Strategy<Value = Option<Occupant>> {
        proptest::option::of((0u64..u64::MAX, 0u8..=5).prop_map(|(id, velocity)| Occupant { id, velocity }))
    }

    fn migrant() -> impl Strategy<Value = Migrant> {
        (any::<u64>(), 0u8..=5, 0u8..4, 0u32..1000, proptest::collection::vec(0usize..10_000, 1..20), any::<u32>())
            .prop_flat_map(|(id, velocity, lane, cell, route, departed)| {
                let n = route.len();
                (0..n).prop_map(move |cursor| Migrant {
                    id,
                    velocity,
                    link: route[cursor],
                    lane,
                    cell,
                    route: Arc::from(route.clone()),
                    cursor: cursor as u32,
                    departed,
                })
            })
    }

    proptest! {
        #[test]
        fn round_trip(
            sender in 0usize..64, receiver in 0usize..64, step in any::<u32>(), phase in 0u8..3,
            strips in proptest::collection::vec(
                (0usize..5000, 0u8..4, 0u32..500, proptest::collection::vec(occupant(), 0..6)), 0..8),
            migrants in proptest::collection::vec(migrant(), 0..4),
        ) {
            let msg = BoundaryMessage {
                sender, receiver, step,
                phase: Phase::from_u8(phase).unwrap(),
                strips: strips.into_iter().map(|(link, lane, start, cells)| Strip { link, lane, start, cells }).collect(),
                migrants,
            };
            let bytes = msg.encode();
            prop_assert_eq!(bytes[0], WIRE_VERSION);
            prop_assert_eq!(BoundaryMessage::decode(&bytes).unwrap(), msg);
            for cut in 0..bytes.len() {
                prop_assert!(BoundaryMessage::decode(&bytes[..cut]).is_err());
            }
        }
    }

    #[test]
    fn empty_message_size() {
        let msg = BoundaryMessage { sender: 0, receiver: 1, step: 3, phase: Phase::Move, strips: vec![], migrants: vec![] };
        assert_eq!(msg.encode().len(), 1 + 4 + 4 + 4 + 1 + 4 + 4);
        let mut bad = msg.encode();
        bad[0] = 9;
        assert!(BoundaryMessage::decode(&bad).is_err());
    }
}
