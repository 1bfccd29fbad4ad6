//! Counter-based random draws.
//!
//! A draw is a pure function of `(seed, vehicle, time, sub-step)`, so results
//! do not depend on how vehicles are distributed over domains or in which
//! order a domain visits them.

/// Sub-step tags mixed into the counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    LaneChange = 1,
    Move = 2,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Raw 64-bit draw for a vehicle at a given time and sub-step.
#[inline]
pub fn draw(seed: u64, vehicle: u64, time: u32, stream: Stream) -> u64 {
    let counter = ((time as u64) << 8) | stream as u64;
    splitmix64(seed ^ splitmix64(vehicle ^ splitmix64(counter)))
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn uniform(seed: u64, vehicle: u64, time: u32, stream: Stream) -> f64 {
    (draw(seed, vehicle, time, stream) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Order-independent mixing used by state digests.
#[inline]
pub fn mix(value: u64) -> u64 {
    splitmix64(value)
}
