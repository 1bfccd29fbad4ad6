//! Synthetic networks: bidirectional lattices and closed rings.

use super::{cells_for_length, Network, NetworkBuilder, CELL_LENGTH_M, DEFAULT_V_MAX};

/// Bidirectional `rows x cols` lattice with identical links.
///
/// Node `r * cols + c` sits at `(c * link_length, r * link_length)`. Links
/// are numbered row edges first, then column edges, each edge contributing
/// the forward direction followed by the reverse one.
pub fn generate_grid(rows: usize, cols: usize, link_length: f64, lanes: u8) -> Network {
    assert!(rows >= 2 && cols >= 2, "grid needs at least 2 rows and 2 columns");
    let mut b = NetworkBuilder::new();
    for r in 0..rows {
        for c in 0..cols {
            b.node((r * cols + c) as u64, c as f64 * link_length, r as f64 * link_length);
        }
    }
    let mut next = 0u64;
    let mut pair = |b: &mut NetworkBuilder, u: usize, v: usize| {
        b.link(next, u as u64, v as u64, link_length, lanes, DEFAULT_V_MAX);
        b.link(next + 1, v as u64, u as u64, link_length, lanes, DEFAULT_V_MAX);
        next += 2;
    };
    for r in 0..rows {
        for c in 0..cols - 1 {
            pair(&mut b, r * cols + c, r * cols + c + 1);
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols {
            pair(&mut b, r * cols + c, (r + 1) * cols + c);
        }
    }
    b.build().expect("grid generator produces a valid network")
}

/// Closed one-way loop of `cell_count` cells per lane, split into between 2
/// and 16 links of (nearly) equal cell counts, running counter-clockwise.
pub fn generate_ring(cell_count: u32, lanes: u8) -> Network {
    ring_builder(cell_count, lanes).build().expect("ring generator produces a valid network")
}

/// Builder holding the nodes (ids `0..k`) and links (ids `0..k`, link `i`
/// from node `i` to node `i + 1`) of [`generate_ring`], for callers that
/// attach more elements.
pub fn ring_builder(cell_count: u32, lanes: u8) -> NetworkBuilder {
    assert!(cell_count >= 10, "ring needs at least 10 cells");
    let k = (cell_count / 20).clamp(2, 16);
    let base = cell_count / k;
    let extra = cell_count % k;
    let radius = cell_count as f64 * CELL_LENGTH_M / std::f64::consts::TAU;
    let mut b = NetworkBuilder::new();
    for i in 0..k {
        let a = std::f64::consts::TAU * i as f64 / k as f64;
        b.node(i as u64, radius * a.cos(), radius * a.sin());
    }
    for i in 0..k {
        let cells = base + u32::from(i < extra);
        let length = cells as f64 * CELL_LENGTH_M;
        debug_assert_eq!(cells_for_length(length), cells);
        b.link(i as u64, i as u64, ((i + 1) % k) as u64, length, lanes, DEFAULT_V_MAX);
    }
    b
}

/// Route around a ring network starting on `first_link` and covering at
/// least `min_links` links.
pub fn ring_route(net: &Network, first_link: usize, min_links: usize) -> Vec<usize> {
    let k = net.link_count();
    (0..min_links.max(1)).map(|i| (first_link + i) % k).collect()
}
