use super::{check_p, check_weights, Partition, PartitionError};
use crate::net::Network;

/// Orthogonal recursive bisection.
///
/// The first cut is a vertical line (split along x), then cuts alternate
/// between horizontal and vertical at each recursion depth. A piece that
/// must hold `k` domains is split with target loads `ceil(k/2) : floor(k/2)`.
/// Among cut positions with the best balance the one with the smallest
/// coordinate wins.
pub fn orthogonal_bisection(net: &Network, weights: &[f64], p: usize) -> Result<Partition, PartitionError> {
    check_p(net, p)?;
    check_weights(net, weights)?;
    let mut domain_of = vec![0; net.node_count()];
    let mut nodes: Vec<usize> = (0..net.node_count()).collect();
    split(net, weights, &mut nodes, p, 0, 0, &mut domain_of);
    Partition::new(net, domain_of, p)
}

fn split(
    net: &Network,
    weights: &[f64],
    nodes: &mut [usize],
    parts: usize,
    first: usize,
    depth: usize,
    domain_of: &mut [usize],
) {
    if parts == 1 {
        for &n in nodes.iter() {
            domain_of[n] = first;
        }
        return;
    }
    let key = |n: usize| {
        let node = net.node(n);
        if depth.is_multiple_of(2) {
            (node.x, node.y, node.id)
        } else {
            (node.y, node.x, node.id)
        }
    };
    nodes.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap());
    let left_parts = parts.div_ceil(2);
    let right_parts = parts - left_parts;
    let k = cut_index(nodes.iter().map(|&n| weights[n]), left_parts, right_parts);
    let (left, right) = nodes.split_at_mut(k);
    split(net, weights, left, left_parts, first, depth + 1, domain_of);
    split(net, weights, right, right_parts, first + left_parts, depth + 1, domain_of);
}

/// Prefix length whose load is closest to the proportional target, keeping
/// at least one node per domain on each side. Ties go to the shorter prefix.
pub(crate) fn cut_index(sorted_weights: impl Iterator<Item = f64>, left_parts: usize, right_parts: usize) -> usize {
    let w: Vec<f64> = sorted_weights.collect();
    let total: f64 = w.iter().sum();
    let target = total * left_parts as f64 / (left_parts + right_parts) as f64;
    let mut prefix = w[..left_parts - 1].iter().sum::<f64>();
    let mut best = (f64::INFINITY, left_parts);
    for k in left_parts..=w.len() - right_parts {
        prefix += w[k - 1];
        let dev = (prefix - target).abs();
        if dev < best.0 - 1e-12 * total.max(1.0) {
            best = (dev, k);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{generate_grid, NetworkBuilder};
    use crate::partition::{compute_metrics, uniform_weights};

    #[test]
    fn one_domain() {
        let net = generate_grid(3, 3, 75.0, 1);
        let part = orthogonal_bisection(&net, &uniform_weights(&net), 1).unwrap();
        assert_eq!(part.n_spl(), 0);
    }

    #[test]
    fn square_corners_split_on_vertical_median() {
        let mut b = NetworkBuilder::new();
        b.node(1, 0.0, 0.0).node(2, 10.0, 0.0).node(3, 0.0, 10.0).node(4, 10.0, 10.0);
        b.link(1, 1, 2, 10.0, 1, 5).link(2, 3, 4, 10.0, 1, 5);
        let net = b.build().unwrap();
        let part = orthogonal_bisection(&net, &uniform_weights(&net), 2).unwrap();
        assert_eq!(part.assignment(), &[0, 1, 0, 1]);
    }

    /// Axis cuts between distinct coordinates that split `pts` into two
    /// non-empty sides.
    type Cut = (Vec<(usize, usize)>, Vec<(usize, usize)>);

    fn axis_cuts(pts: &[(usize, usize)]) -> Vec<Cut> {
        let mut out = Vec::new();
        for axis in 0..2 {
            let coord = |q: &(usize, usize)| if axis == 0 { q.1 } else { q.0 };
            let max = pts.iter().map(coord).max().unwrap_or(0);
            for t in 1..=max {
                let (a, b): (Vec<_>, Vec<_>) = pts.iter().partition(|q| coord(q) < t);
                if !a.is_empty() && !b.is_empty() {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Smallest achievable max load over all two-level axis-cut trees.
    fn brute_force_best_max_load(rows: usize, cols: usize) -> usize {
        let pts: Vec<(usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
        let best2 = |side: &[(usize, usize)]| {
            axis_cuts(side).iter().map(|(a, b)| a.len().max(b.len())).min().unwrap_or(usize::MAX)
        };
        axis_cuts(&pts).iter().map(|(a, b)| best2(a).max(best2(b))).min().unwrap()
    }

    #[test]
    fn two_by_n_into_quadrants() {
        for cols in [4, 5, 6, 9] {
            let net = generate_grid(2, cols, 75.0, 1);
            let w = uniform_weights(&net);
            let part = orthogonal_bisection(&net, &w, 4).unwrap();
            let m = compute_metrics(&net, &part, &w);
            let ideal = (2 * cols) as f64 / 4.0;
            assert!(m.max_load() <= ideal + 1.0, "cols {cols}: {:?}", m.loads);
            assert!(m.max_load() <= brute_force_best_max_load(2, cols) as f64);
            // Domains are contiguous column blocks split by row.
            for d in 0..4 {
                assert!(part.assignment().contains(&d));
            }
        }
    }

    #[test]
    fn power_of_two_balance_bound() {
        let net = generate_grid(13, 11, 75.0, 1);
        let w = uniform_weights(&net);
        for p in [2, 4, 8, 16, 32] {
            let m = compute_metrics(&net, &orthogonal_bisection(&net, &w, p).unwrap(), &w);
            assert!(m.max_load() <= 143.0 / p as f64 + 1.0 + 1e-9, "p={p} {:?}", m.loads);
        }
    }

    #[test]
    fn rejects_too_many_domains() {
        let net = generate_grid(2, 2, 75.0, 1);
        assert_eq!(
            orthogonal_bisection(&net, &uniform_weights(&net), 5),
            Err(PartitionError::TooManyDomains { p: 5, nodes: 4 })
        );
        let part = orthogonal_bisection(&net, &uniform_weights(&net), 4).unwrap();
        assert_eq!(part.n_spl(), net.link_count());
    }

    #[test]
    fn cut_index_ties_prefer_smaller_prefix() {
        assert_eq!(cut_index([1.0, 1.0, 1.0].into_iter(), 1, 1), 1);
        assert_eq!(cut_index([1.0, 1.0, 1.0, 1.0].into_iter(), 1, 1), 2);
        assert_eq!(cut_index([5.0, 1.0, 1.0, 1.0].into_iter(), 1, 1), 1);
        assert_eq!(cut_index([1.0; 6].into_iter(), 2, 1), 4);
    }
}
