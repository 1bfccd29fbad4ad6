//! Undirected weighted graph used by the multilevel partitioner.

use std::collections::HashMap;

use crate::net::Network;

#[derive(Clone, Debug)]
pub(crate) struct Graph {
    /// Neighbor lists with edge weights; no self-loops, no duplicates.
    pub adj: Vec<Vec<(usize, u32)>>,
    pub vw: Vec<f64>,
    /// Number of original nodes represented by each vertex.
    pub size: Vec<u32>,
    pub coords: Vec<(f64, f64)>,
}

impl Graph {
    /// One vertex per node; edge weight = number of links joining the pair
    /// in either direction, so the edge cut equals the split-link count.
    pub fn from_network(net: &Network, weights: &[f64]) -> Self {
        let n = net.node_count();
        let mut acc: Vec<HashMap<usize, u32>> = vec![HashMap::new(); n];
        for l in net.links() {
            *acc[l.from].entry(l.to).or_default() += 1;
            *acc[l.to].entry(l.from).or_default() += 1;
        }
        Self {
            adj: acc.into_iter().map(sorted_adjacency).collect(),
            vw: weights.to_vec(),
            size: vec![1; n],
            coords: net.nodes().iter().map(|v| (v.x, v.y)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.vw.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.vw.iter().sum()
    }

    /// Subgraph on `vertices`; vertex `i` of the result is `vertices[i]`.
    pub fn induced(&self, vertices: &[usize]) -> Graph {
        let mut local = HashMap::with_capacity(vertices.len());
        for (i, &v) in vertices.iter().enumerate() {
            local.insert(v, i);
        }
        let adj = vertices
            .iter()
            .map(|&v| self.adj[v].iter().filter_map(|&(u, w)| local.get(&u).map(|&lu| (lu, w))).collect())
            .collect();
        Graph {
            adj,
            vw: vertices.iter().map(|&v| self.vw[v]).collect(),
            size: vertices.iter().map(|&v| self.size[v]).collect(),
            coords: vertices.iter().map(|&v| self.coords[v]).collect(),
        }
    }

    /// Collapse vertices by `map` (fine vertex -> coarse vertex).
    pub fn contract(&self, map: &[usize], coarse_n: usize) -> Graph {
        let mut vw = vec![0.0; coarse_n];
        let mut size = vec![0u32; coarse_n];
        let mut sx = vec![(0.0, 0.0); coarse_n];
        let mut acc: Vec<HashMap<usize, u32>> = vec![HashMap::new(); coarse_n];
        for v in 0..self.len() {
            let c = map[v];
            vw[c] += self.vw[v];
            size[c] += self.size[v];
            let s = self.size[v] as f64;
            sx[c].0 += self.coords[v].0 * s;
            sx[c].1 += self.coords[v].1 * s;
            for &(u, w) in &self.adj[v] {
                let cu = map[u];
                if cu != c {
                    *acc[c].entry(cu).or_default() += w;
                }
            }
        }
        let coords = sx.iter().zip(&size).map(|(&(x, y), &s)| (x / s as f64, y / s as f64)).collect();
        Graph { adj: acc.into_iter().map(sorted_adjacency).collect(), vw, size, coords }
    }

    /// Total weight of edges whose endpoints are on different sides.
    pub fn cut(&self, side: &[u8]) -> u64 {
        let mut c = 0u64;
        for v in 0..self.len() {
            for &(u, w) in &self.adj[v] {
                if u > v && side[u] != side[v] {
                    c += w as u64;
                }
            }
        }
        c
    }
}

fn sorted_adjacency(m: HashMap<usize, u32>) -> Vec<(usize, u32)> {
    let mut v: Vec<_> = m.into_iter().collect();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::generate_grid;

    #[test]
    fn grid_graph_cut_counts_links() {
        let net = generate_grid(3, 3, 75.0, 1);
        let g = Graph::from_network(&net, &[1.0; 9]);
        assert!(g.adj.iter().all(|a| a.iter().all(|&(_, w)| w == 2)));
        let side: Vec<u8> = (0..9).map(|i| u8::from(i % 3 == 2)).collect();
        assert_eq!(g.cut(&side), 6);
    }

    #[test]
    fn contraction_preserves_weight_and_cut() {
        let net = generate_grid(4, 4, 75.0, 1);
        let g = Graph::from_network(&net, &[1.0; 16]);
        // Pair columns 0-1 and 2-3 in each row.
        let map: Vec<usize> = (0..16).map(|i| (i / 4) * 2 + (i % 4) / 2).collect();
        let c = g.contract(&map, 8);
        assert_eq!(c.total_weight(), 16.0);
        let coarse_side: Vec<u8> = (0..8).map(|c| (c % 2) as u8).collect();
        let fine_side: Vec<u8> = map.iter().map(|&m| coarse_side[m]).collect();
        assert_eq!(c.cut(&coarse_side), g.cut(&fine_side));
    }
}
