//! Multilevel recursive bisection.
//!
//! Each bisection runs several V-cycles (coarsen by matching, split the
//! coarsest graph by greedy growing, refine with boundary moves at every
//! uncoarsening level) and, optionally, refined coordinate splits of the
//! full graph. The best feasible candidate by (edge cut, imbalance) wins.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::Graph;
use super::{check_p, check_weights, Partition, PartitionError};
use crate::net::Network;

#[derive(Clone, Debug, PartialEq)]
pub struct MultilevelOptions {
    /// Allowed relative overload of a side beyond one vertex weight.
    pub imbalance_tol: f64,
    /// Independent V-cycles per bisection.
    pub vcycles: usize,
    /// Stop coarsening below this many vertices.
    pub coarse_size: usize,
    /// Also try refined axis-aligned splits as starting points.
    pub coordinate_starts: bool,
    /// Greedy-growing attempts on the coarsest graph.
    pub growing_tries: usize,
}

impl Default for MultilevelOptions {
    fn default() -> Self {
        Self { imbalance_tol: 0.03, vcycles: 4, coarse_size: 60, coordinate_starts: true, growing_tries: 4 }
    }
}

/// One refinement call.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementStep {
    /// Sequence number of the bisection within the recursion.
    pub bisection: usize,
    /// Coarsening level refined (0 = the graph being bisected).
    pub level: usize,
    pub vertices: usize,
    pub cut_before: u64,
    pub cut_after: u64,
    pub imbalance_before: f64,
    pub imbalance_after: f64,
    /// Side weight above the allowed maximum, before and after.
    pub excess_before: f64,
    pub excess_after: f64,
}

pub fn multilevel_partition(net: &Network, weights: &[f64], p: usize, seed: u64) -> Result<Partition, PartitionError> {
    multilevel_partition_with_log(net, weights, p, seed, &MultilevelOptions::default()).map(|(part, _)| part)
}

pub fn multilevel_partition_with_log(
    net: &Network,
    weights: &[f64],
    p: usize,
    seed: u64,
    opts: &MultilevelOptions,
) -> Result<(Partition, Vec<RefinementStep>), PartitionError> {
    check_p(net, p)?;
    check_weights(net, weights)?;
    let g = Graph::from_network(net, weights);
    let mut ctx = Ctx { rng: ChaCha8Rng::seed_from_u64(seed), opts, log: Vec::new(), bisection: 0 };
    let mut domain_of = vec![0; net.node_count()];
    let all: Vec<usize> = (0..g.len()).collect();
    ctx.recurse(&g, &all, p, 0, &mut domain_of);
    Ok((Partition::new(net, domain_of, p)?, ctx.log))
}

struct Ctx<'a> {
    rng: ChaCha8Rng,
    opts: &'a MultilevelOptions,
    log: Vec<RefinementStep>,
    bisection: usize,
}

/// Side capacity and count limits for one bisection.
#[derive(Clone, Debug)]
struct Balance {
    target: [f64; 2],
    cap: [f64; 2],
    min_count: [u32; 2],
}

impl Balance {
    fn new(g: &Graph, left_parts: usize, right_parts: usize, tol: f64) -> Self {
        let total = g.total_weight();
        let parts = (left_parts + right_parts) as f64;
        let target = [total * left_parts as f64 / parts, total * right_parts as f64 / parts];
        let max_w = g.vw.iter().copied().fold(0.0, f64::max);
        let cap = [target[0] * (1.0 + tol) + max_w, target[1] * (1.0 + tol) + max_w];
        Self { target, cap, min_count: [left_parts as u32, right_parts as u32] }
    }

    fn excess(&self, w: &[f64; 2]) -> f64 {
        (w[0] - self.cap[0]).max(0.0) + (w[1] - self.cap[1]).max(0.0)
    }

    fn imbalance(&self, w: &[f64; 2]) -> f64 {
        let r = |s: usize| if self.target[s] > 0.0 { w[s] / self.target[s] } else { 1.0 };
        (r(0).max(r(1)) - 1.0).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Quality {
    excess: f64,
    cut: u64,
    imbalance: f64,
}

impl Quality {
    fn cmp(&self, other: &Quality) -> Ordering {
        let feq = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        if !feq(self.excess, other.excess) {
            return self.excess.total_cmp(&other.excess);
        }
        if self.cut != other.cut {
            return self.cut.cmp(&other.cut);
        }
        if feq(self.imbalance, other.imbalance) {
            Ordering::Equal
        } else {
            self.imbalance.total_cmp(&other.imbalance)
        }
    }
}

fn side_totals(g: &Graph, side: &[u8]) -> ([f64; 2], [u32; 2]) {
    let mut w = [0.0; 2];
    let mut c = [0u32; 2];
    for v in 0..g.len() {
        w[side[v] as usize] += g.vw[v];
        c[side[v] as usize] += g.size[v];
    }
    (w, c)
}

fn quality(g: &Graph, side: &[u8], bal: &Balance) -> Quality {
    let (w, _) = side_totals(g, side);
    Quality { excess: bal.excess(&w), cut: g.cut(side), imbalance: bal.imbalance(&w) }
}

impl Ctx<'_> {
    fn recurse(&mut self, g: &Graph, verts: &[usize], parts: usize, first: usize, domain_of: &mut [usize]) {
        if parts == 1 {
            for &v in verts {
                domain_of[v] = first;
            }
            return;
        }
        let sub = g.induced(verts);
        let left_parts = parts.div_ceil(2);
        let right_parts = parts - left_parts;
        let side = self.bisect(&sub, left_parts, right_parts);
        let left: Vec<usize> = (0..verts.len()).filter(|&i| side[i] == 0).map(|i| verts[i]).collect();
        let right: Vec<usize> = (0..verts.len()).filter(|&i| side[i] == 1).map(|i| verts[i]).collect();
        self.recurse(g, &left, left_parts, first, domain_of);
        self.recurse(g, &right, right_parts, first + left_parts, domain_of);
    }

    fn bisect(&mut self, g: &Graph, left_parts: usize, right_parts: usize) -> Vec<u8> {
        let bal = Balance::new(g, left_parts, right_parts, self.opts.imbalance_tol);
        let mut candidates = Vec::new();
        for _ in 0..self.opts.vcycles.max(1) {
            candidates.push(self.vcycle(g, &bal));
        }
        if self.opts.coordinate_starts {
            for axis in 0..2 {
                let mut side = coordinate_split(g, &bal, axis);
                self.refine(g, &mut side, &bal, 0);
                candidates.push(side);
            }
        }
        self.bisection += 1;
        let mut best = 0;
        let mut best_q = quality(g, &candidates[0], &bal);
        for (i, c) in candidates.iter().enumerate().skip(1) {
            let q = quality(g, c, &bal);
            if q.cmp(&best_q) == Ordering::Less {
                best = i;
                best_q = q;
            }
        }
        candidates.swap_remove(best)
    }

    fn vcycle(&mut self, g: &Graph, bal: &Balance) -> Vec<u8> {
        let cap_vw = 1.5 * g.total_weight() / self.opts.coarse_size.max(2) as f64;
        let mut graphs: Vec<Graph> = Vec::new();
        let mut maps: Vec<Vec<usize>> = Vec::new();
        loop {
            let cur = graphs.last().unwrap_or(g);
            if cur.len() <= self.opts.coarse_size {
                break;
            }
            let (map, n) = self.matching(cur, cap_vw);
            if n as f64 > 0.95 * cur.len() as f64 {
                break;
            }
            let coarse = cur.contract(&map, n);
            maps.push(map);
            graphs.push(coarse);
        }
        let level = graphs.len();
        let coarsest = graphs.last().unwrap_or(g);
        let mut side = self.initial(coarsest, bal);
        self.refine(coarsest, &mut side, bal, level);
        for lv in (0..level).rev() {
            let fine = if lv == 0 { g } else { &graphs[lv - 1] };
            side = maps[lv].iter().map(|&c| side[c]).collect();
            self.refine(fine, &mut side, bal, lv);
        }
        side
    }

    /// Randomized matching: vertices visited in random order, each paired
    /// with its heaviest-edge unmatched neighbor (random among ties).
    fn matching(&mut self, g: &Graph, cap_vw: f64) -> (Vec<usize>, usize) {
        let n = g.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        let mut mate = vec![usize::MAX; n];
        for &v in &order {
            if mate[v] != usize::MAX {
                continue;
            }
            let mut best: Option<(u32, usize)> = None;
            let mut ties = 0u32;
            for &(u, w) in &g.adj[v] {
                if mate[u] != usize::MAX || g.vw[v] + g.vw[u] > cap_vw {
                    continue;
                }
                match best {
                    Some((bw, _)) if w < bw => {}
                    Some((bw, _)) if w == bw => {
                        ties += 1;
                        if self.rng.gen_range(0..=ties) == 0 {
                            best = Some((w, u));
                        }
                    }
                    _ => {
                        best = Some((w, u));
                        ties = 0;
                    }
                }
            }
            match best {
                Some((_, u)) => {
                    mate[v] = u;
                    mate[u] = v;
                }
                None => mate[v] = v,
            }
        }
        let mut map = vec![usize::MAX; n];
        let mut next = 0;
        for v in 0..n {
            if map[v] == usize::MAX {
                map[v] = next;
                map[mate[v]] = next;
                next += 1;
            }
        }
        (map, next)
    }

    /// Best of several greedy graph-growing splits and the two coordinate
    /// splits of the coarsest graph.
    fn initial(&mut self, g: &Graph, bal: &Balance) -> Vec<u8> {
        let mut best: Option<(Quality, Vec<u8>)> = None;
        let consider = |side: Vec<u8>, best: &mut Option<(Quality, Vec<u8>)>| {
            let q = quality(g, &side, bal);
            if best.as_ref().is_none_or(|(bq, _)| q.cmp(bq) == Ordering::Less) {
                *best = Some((q, side));
            }
        };
        for _ in 0..self.opts.growing_tries.max(1) {
            let side = self.grow(g, bal);
            consider(side, &mut best);
        }
        for axis in 0..2 {
            consider(coordinate_split(g, bal, axis), &mut best);
        }
        best.unwrap().1
    }

    /// Grow side 0 from a random vertex, always adding the frontier vertex
    /// with the largest cut reduction, until it reaches its target weight.
    fn grow(&mut self, g: &Graph, bal: &Balance) -> Vec<u8> {
        let n = g.len();
        let (_, c_all) = side_totals(g, &vec![1u8; n]);
        let mut side = vec![1u8; n];
        let mut w0 = 0.0;
        let mut c0 = 0u32;
        // Edge weight from each vertex into side 0.
        let mut into = vec![0i64; n];
        let degree: Vec<i64> = g.adj.iter().map(|a| a.iter().map(|&(_, w)| w as i64).sum()).collect();
        let mut frontier: Vec<usize> = Vec::new();
        loop {
            let done = w0 >= bal.target[0] && c0 >= bal.min_count[0];
            if done {
                break;
            }
            let room = |v: usize| c_all[1] - c0 - g.size[v] >= bal.min_count[1];
            frontier.retain(|&v| side[v] == 1);
            let pick = frontier
                .iter()
                .copied()
                .filter(|&v| room(v))
                .max_by_key(|&v| (2 * into[v] - degree[v], std::cmp::Reverse(v)));
            let v = match pick {
                Some(v) => v,
                None => {
                    let rest: Vec<usize> = (0..n).filter(|&v| side[v] == 1 && room(v)).collect();
                    if rest.is_empty() {
                        break;
                    }
                    rest[self.rng.gen_range(0..rest.len())]
                }
            };
            if w0 > 0.0 && w0 + g.vw[v] - bal.target[0] > bal.target[0] - w0 && c0 >= bal.min_count[0] {
                break;
            }
            side[v] = 0;
            w0 += g.vw[v];
            c0 += g.size[v];
            for &(u, w) in &g.adj[v] {
                into[u] += w as i64;
                if side[u] == 1 {
                    frontier.push(u);
                }
            }
        }
        side
    }

    /// Boundary Fiduccia-Mattheyses passes with rollback to the best prefix
    /// of moves. Never worsens (excess, cut, imbalance).
    fn refine(&mut self, g: &Graph, side: &mut [u8], bal: &Balance, level: usize) {
        let before = quality(g, side, bal);
        let n = g.len();
        let (mut w, mut count) = side_totals(g, side);
        let mut cut = g.cut(side) as i64;
        let mut gain = vec![0i64; n];
        for v in 0..n {
            for &(u, ew) in &g.adj[v] {
                gain[v] += if side[u] == side[v] { -(ew as i64) } else { ew as i64 };
            }
        }
        let max_passes = 8;
        for _ in 0..max_passes {
            let salt: Vec<u32> = (0..n).map(|_| self.rng.gen()).collect();
            let mut heap: BinaryHeap<(i64, u32, usize)> = BinaryHeap::new();
            for v in 0..n {
                if g.adj[v].iter().any(|&(u, _)| side[u] != side[v]) {
                    heap.push((gain[v], salt[v], v));
                }
            }
            let mut locked = vec![false; n];
            let mut moves: Vec<usize> = Vec::new();
            let start_q = Quality { excess: bal.excess(&w), cut: cut as u64, imbalance: bal.imbalance(&w) };
            let mut best_q = start_q;
            let mut best_len = 0;
            let limit = 50.max(n / 10);
            let mut since_best = 0;
            while let Some((gv, _, v)) = heap.pop() {
                if locked[v] || gv != gain[v] {
                    continue;
                }
                let from = side[v] as usize;
                let to = 1 - from;
                if count[from] < bal.min_count[from] + g.size[v] {
                    continue;
                }
                let mut nw = w;
                nw[from] -= g.vw[v];
                nw[to] += g.vw[v];
                if bal.excess(&nw) > bal.excess(&w) + 1e-12 {
                    continue;
                }
                side[v] = to as u8;
                w = nw;
                count[from] -= g.size[v];
                count[to] += g.size[v];
                cut -= gain[v];
                locked[v] = true;
                moves.push(v);
                gain[v] = -gain[v];
                for &(u, ew) in &g.adj[v] {
                    let ew = ew as i64;
                    if side[u] as usize == to {
                        gain[u] -= 2 * ew;
                    } else {
                        gain[u] += 2 * ew;
                    }
                    if !locked[u] {
                        heap.push((gain[u], salt[u], u));
                    }
                }
                let q = Quality { excess: bal.excess(&w), cut: cut as u64, imbalance: bal.imbalance(&w) };
                if q.cmp(&best_q) == Ordering::Less {
                    best_q = q;
                    best_len = moves.len();
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best > limit {
                        break;
                    }
                }
            }
            for &v in moves[best_len..].iter().rev() {
                let from = side[v] as usize;
                let to = 1 - from;
                side[v] = to as u8;
                w[from] -= g.vw[v];
                w[to] += g.vw[v];
                count[from] -= g.size[v];
                count[to] += g.size[v];
                cut -= gain[v];
                gain[v] = -gain[v];
                for &(u, ew) in &g.adj[v] {
                    let ew = ew as i64;
                    if side[u] as usize == to {
                        gain[u] -= 2 * ew;
                    } else {
                        gain[u] += 2 * ew;
                    }
                }
            }
            if best_len == 0 {
                break;
            }
        }
        let after = quality(g, side, bal);
        debug_assert!(after.cmp(&before) != Ordering::Greater);
        self.log.push(RefinementStep {
            bisection: self.bisection,
            level,
            vertices: n,
            cut_before: before.cut,
            cut_after: after.cut,
            imbalance_before: before.imbalance,
            imbalance_after: after.imbalance,
            excess_before: before.excess,
            excess_after: after.excess,
        });
    }
}

/// Split at the prefix of vertices sorted along `axis` whose weight is
/// closest to the side-0 target, respecting the per-side vertex counts.
fn coordinate_split(g: &Graph, bal: &Balance, axis: usize) -> Vec<u8> {
    let n = g.len();
    let key = |v: usize| if axis == 0 { (g.coords[v].0, g.coords[v].1) } else { (g.coords[v].1, g.coords[v].0) };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap().then(a.cmp(&b)));
    let total_count: u32 = g.size.iter().sum();
    let mut best = (f64::INFINITY, 1);
    let (mut w, mut c) = (0.0, 0u32);
    for (k, &v) in order.iter().enumerate() {
        w += g.vw[v];
        c += g.size[v];
        if c >= bal.min_count[0] && total_count - c >= bal.min_count[1] {
            let dev = (w - bal.target[0]).abs();
            if dev < best.0 {
                best = (dev, k + 1);
            }
        }
    }
    let mut side = vec![1u8; n];
    for &v in &order[..best.1] {
        side[v] = 0;
    }
    side
}
