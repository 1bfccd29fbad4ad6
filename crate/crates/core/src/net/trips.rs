//! Synthetic travel demand.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Network, Plan};

/// Fewest-cells route from `from` to `to` following allowed movements,
/// both links included.
pub fn shortest_route(net: &Network, from: usize, to: usize) -> Option<Vec<usize>> {
    let n = net.link_count();
    let mut dist = vec![u64::MAX; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[from] = 0;
    heap.push(Reverse((0u64, from)));
    while let Some(Reverse((d, l))) = heap.pop() {
        if d > dist[l] {
            continue;
        }
        if l == to {
            break;
        }
        for e in net.exits(l) {
            let nd = d + net.link(e.to_link).cells as u64;
            if nd < dist[e.to_link] {
                dist[e.to_link] = nd;
                prev[e.to_link] = l;
                heap.push(Reverse((nd, e.to_link)));
            }
        }
    }
    if dist[to] == u64::MAX {
        return None;
    }
    let mut route = vec![to];
    while *route.last().unwrap() != from {
        route.push(prev[*route.last().unwrap()]);
    }
    route.reverse();
    Some(route)
}

/// `count` trips between uniformly drawn links, departing uniformly in
/// `0..=last_departure` at a uniformly drawn entry cell. Vehicle ids are
/// `0..count`; unreachable pairs are redrawn.
pub fn random_trips(net: &Network, count: usize, last_departure: u32, seed: u64) -> Vec<Plan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = net.link_count();
    assert!(n >= 2, "trips need at least two links");
    let mut plans = Vec::with_capacity(count);
    while plans.len() < count {
        let from = rng.gen_range(0..n);
        let to = rng.gen_range(0..n);
        if from == to {
            continue;
        }
        let Some(route) = shortest_route(net, from, to) else { continue };
        plans.push(Plan {
            vehicle_id: plans.len() as u64,
            departure: rng.gen_range(0..=last_departure),
            entry_cell: rng.gen_range(0..net.link(from).cells),
            route,
        });
    }
    plans.sort_by_key(|p| (p.departure, p.vehicle_id));
    plans
}

/// Like [`random_trips`], but a fraction `share` of the trips start and end
/// on links inside the axis-aligned box `[x0, x1] x [y0, y1]` (both end
/// nodes inside).
pub fn concentrated_trips(
    net: &Network,
    count: usize,
    share: f64,
    bbox: [f64; 4],
    last_departure: u32,
    seed: u64,
) -> Vec<Plan> {
    let [x0, x1, y0, y1] = bbox;
    let inside_node = |n: usize| {
        let node = net.node(n);
        node.x >= x0 && node.x <= x1 && node.y >= y0 && node.y <= y1
    };
    let inside: Vec<usize> =
        (0..net.link_count()).filter(|&l| inside_node(net.link(l).from) && inside_node(net.link(l).to)).collect();
    assert!(inside.len() >= 2, "box must contain at least two links");
    let n_in = (share.clamp(0.0, 1.0) * count as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plans = Vec::with_capacity(count);
    let all: Vec<usize> = (0..net.link_count()).collect();
    while plans.len() < count {
        let pool = if plans.len() < n_in { &inside } else { &all };
        let from = pool[rng.gen_range(0..pool.len())];
        let to = pool[rng.gen_range(0..pool.len())];
        if from == to {
            continue;
        }
        let Some(route) = shortest_route(net, from, to) else { continue };
        plans.push(Plan {
            vehicle_id: plans.len() as u64,
            departure: rng.gen_range(0..=last_departure),
            entry_cell: rng.gen_range(0..net.link(from).cells),
            route,
        });
    }
    plans.sort_by_key(|p| (p.departure, p.vehicle_id));
    plans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::generate_grid;

    #[test]
    fn grid_routes_are_manhattan() {
        let net = generate_grid(4, 4, 75.0, 1);
        // Link 0 runs node 0 -> 1; find the link 14 -> 15.
        let target = (0..net.link_count()).find(|&l| net.link(l).from == 14 && net.link(l).to == 15).unwrap();
        let r = shortest_route(&net, 0, target).unwrap();
        assert_eq!(r.first(), Some(&0));
        assert_eq!(r.last(), Some(&target));
        // 0->1, then three links up to row 3 and two along it: 6 links.
        assert_eq!(r.len(), 6);
        for w in r.windows(2) {
            assert_eq!(net.link(w[0]).to, net.link(w[1]).from);
        }
    }

    #[test]
    fn concentrated_share() {
        let net = generate_grid(8, 8, 75.0, 1);
        let plans = concentrated_trips(&net, 500, 0.8, [0.0, 262.5, 0.0, 262.5], 60, 4);
        let inside = |l: usize| {
            let (a, b) = (net.node(net.link(l).from), net.node(net.link(l).to));
            a.x.max(b.x) <= 262.5 && a.y.max(b.y) <= 262.5
        };
        let contained = plans.iter().filter(|p| p.route.iter().all(|&l| inside(l))).count();
        // Manhattan routes between links of a box stay in the box, and some
        // of the remaining trips land there by chance.
        assert!((400..450).contains(&contained), "{contained}");
        for p in &plans {
            net.check_plan(p).unwrap();
        }
    }

    #[test]
    fn trips_are_valid_and_reproducible() {
        let net = generate_grid(5, 5, 75.0, 2);
        let a = random_trips(&net, 200, 100, 9);
        assert_eq!(a, random_trips(&net, 200, 100, 9));
        assert_ne!(a, random_trips(&net, 200, 100, 10));
        assert_eq!(a.len(), 200);
        for p in &a {
            net.check_plan(p).unwrap();
            assert!(p.departure <= 100);
        }
    }
}
