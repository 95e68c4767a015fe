//! Seeded random graphs for tests, oracles and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Alphabet, Graph, GraphDataset, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomGraphSpec {
    pub max_nodes: usize,
    pub max_edges: usize,
    pub alphabet: usize,
}

impl Default for RandomGraphSpec {
    fn default() -> Self {
        Self {
            max_nodes: 30,
            max_edges: 100,
            alphabet: 5,
        }
    }
}

/// Directed graph with exactly `nodes` nodes and `edges` distinct edges
/// (self-loops allowed), uniform labels below `alphabet` and neighbor lists
/// in random order.
pub fn random_graph_exact(rng: &mut impl Rng, nodes: usize, edges: usize, alphabet: usize) -> Result<Graph> {
    if nodes == 0 || alphabet == 0 {
        return Err(Error::InvalidConfig("random graphs need nodes and labels".into()));
    }
    let capacity = nodes.saturating_mul(nodes);
    if edges > capacity {
        return Err(Error::InvalidConfig(format!("{edges} edges do not fit {nodes} nodes")));
    }
    let labels = (0..nodes).map(|_| Label(rng.gen_range(0..alphabet as u32))).collect();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    if edges * 2 > capacity {
        // dense: sample pairs without replacement
        let mut pairs: Vec<usize> = (0..capacity).collect();
        pairs.shuffle(rng);
        for p in &pairs[..edges] {
            adjacency[p / nodes].push(p % nodes);
        }
    } else {
        let mut seen = std::collections::HashSet::with_capacity(edges);
        while seen.len() < edges {
            let (v, u) = (rng.gen_range(0..nodes), rng.gen_range(0..nodes));
            if seen.insert((v, u)) {
                adjacency[v].push(u);
            }
        }
    }
    Graph::new(labels, adjacency, true)
}

/// Random graph with `1..=max_nodes` nodes and up to `max_edges` edges.
pub fn random_graph(rng: &mut impl Rng, spec: &RandomGraphSpec) -> Result<Graph> {
    let nodes = rng.gen_range(1..=spec.max_nodes.max(1));
    let edges = rng.gen_range(0..=spec.max_edges.min(nodes * nodes));
    random_graph_exact(rng, nodes, edges, spec.alphabet)
}

/// Dataset of random graphs with random binary classes. Label ids follow
/// first appearance in graph/node order, named `L<original>`.
pub fn random_dataset(seed: u64, graphs: usize, spec: &RandomGraphSpec) -> Result<GraphDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::with_capacity(graphs);
    let mut classes = Vec::with_capacity(graphs);
    for _ in 0..graphs {
        raw.push(random_graph(&mut rng, spec)?);
        classes.push(rng.gen_range(0..2));
    }
    let mut alphabet = Alphabet::new();
    let graphs = raw
        .iter()
        .map(|g| {
            let labels = g
                .labels()
                .iter()
                .map(|l| alphabet.intern(&format!("L{}", l.0)))
                .collect();
            g.with_labels(labels)
        })
        .collect::<Result<Vec<_>>>()?;
    GraphDataset::new(graphs, classes, alphabet)
}
