use alloc::collections::VecDeque;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NetsimError;

pub(crate) fn check_shape(nodes: u32, links: u32) -> Result<(), NetsimError> {
    if nodes < 2 {
        return Err(NetsimError::Topology("need at least two nodes"));
    }
    if links < nodes {
        return Err(NetsimError::Topology("need at least one link per node for strong connectivity"));
    }
    if links as u64 > nodes as u64 * (nodes as u64 - 1) {
        return Err(NetsimError::Topology("more links than ordered node pairs"));
    }
    Ok(())
}

/// Strongly connected directed graph with fixed shortest-path routes.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: u32,
    /// `(source, destination)` per link id, sorted.
    links: Vec<(u32, u32)>,
    /// Link ids along the route for each ordered pair, row-major by source.
    routes: Vec<Vec<u32>>,
}

impl Topology {
    /// A random Hamiltonian cycle plus uniformly chosen extra links.
    pub fn random(nodes: u32, links: u32, seed: u64) -> Result<Self, NetsimError> {
        check_shape(nodes, links)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<u32> = (0..nodes).collect();
        order.shuffle(&mut rng);
        let mut arcs: Vec<(u32, u32)> = (0..nodes as usize)
            .map(|i| (order[i], order[(i + 1) % nodes as usize]))
            .collect();
        let mut rest: Vec<(u32, u32)> = (0..nodes)
            .flat_map(|s| (0..nodes).map(move |d| (s, d)))
            .filter(|&(s, d)| s != d && !arcs.contains(&(s, d)))
            .collect();
        rest.shuffle(&mut rng);
        arcs.extend(rest.into_iter().take((links - nodes) as usize));
        Self::from_links(nodes, arcs)
    }

    /// Builds routes for given links; fails unless strongly connected.
    pub fn from_links(nodes: u32, mut links: Vec<(u32, u32)>) -> Result<Self, NetsimError> {
        links.sort_unstable();
        links.dedup();
        if links.iter().any(|&(s, d)| s == d || s >= nodes || d >= nodes) {
            return Err(NetsimError::Topology("link endpoints must be distinct existing nodes"));
        }
        let n = nodes as usize;
        let mut out: Vec<Vec<(u32, u32)>> = alloc::vec![Vec::new(); n];
        for (id, &(s, d)) in links.iter().enumerate() {
            out[s as usize].push((d, id as u32));
        }
        let mut routes = alloc::vec![Vec::new(); n * n];
        for src in 0..n {
            // BFS; neighbors are visited in increasing node id.
            let mut via: Vec<Option<(usize, u32)>> = alloc::vec![None; n];
            let mut seen = alloc::vec![false; n];
            seen[src] = true;
            let mut queue = VecDeque::from([src]);
            while let Some(v) = queue.pop_front() {
                for &(w, id) in &out[v] {
                    let w = w as usize;
                    if !seen[w] {
                        seen[w] = true;
                        via[w] = Some((v, id));
                        queue.push_back(w);
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(NetsimError::Topology("graph is not strongly connected"));
            }
            for dst in 0..n {
                let mut path = Vec::new();
                let mut at = dst;
                while let Some((prev, id)) = via[at] {
                    path.push(id);
                    at = prev;
                }
                path.reverse();
                routes[src * n + dst] = path;
            }
        }
        Ok(Self { nodes, links, routes })
    }

    pub fn node_count(&self) -> u32 {
        self.nodes
    }

    pub fn link_count(&self) -> u32 {
        self.links.len() as u32
    }

    pub fn links(&self) -> &[(u32, u32)] {
        &self.links
    }

    /// Link ids from `src` to `dst` (empty when equal).
    pub fn route(&self, src: u32, dst: u32) -> &[u32] {
        &self.routes[(src * self.nodes + dst) as usize]
    }
}

/// Offered flow rates in bit/s for every ordered node pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    nodes: u32,
    rates: Vec<f64>,
}

impl TrafficMatrix {
    /// Each pair is active with `probability` and then draws a rate
    /// uniformly in `(0, max_rate]`.
    pub fn random(nodes: u32, max_rate: f64, probability: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = nodes as usize;
        let mut rates = alloc::vec![0.0; n * n];
        for s in 0..n {
            for d in 0..n {
                if s == d {
                    continue;
                }
                let active = probability >= 1.0 || rng.random::<f64>() < probability;
                if active {
                    rates[s * n + d] = max_rate * (1.0 - rng.random::<f64>());
                }
            }
        }
        Self { nodes, rates }
    }

    pub fn rate(&self, src: u32, dst: u32) -> f64 {
        self.rates[(src * self.nodes + dst) as usize]
    }

    /// Offered bit rate on every link.
    pub fn link_loads(&self, topo: &Topology) -> Vec<f64> {
        let mut load = alloc::vec![0.0; topo.link_count() as usize];
        for s in 0..self.nodes {
            for d in 0..self.nodes {
                let r = self.rate(s, d);
                if r > 0.0 {
                    for &l in topo.route(s, d) {
                        load[l as usize] += r;
                    }
                }
            }
        }
        load
    }
}
