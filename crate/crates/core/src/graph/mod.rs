//! Labeled graphs whose adjacency lists carry an explicit neighbor order.
//!
//! The order of each node's adjacency list is the ordering function of the
//! graph: every traversal visits neighbors exactly in list order.

mod label;
pub mod temporal;
pub mod tu;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use label::{Alphabet, Label};

use crate::error::{Error, Result};

/// Node-labeled graph with ordered out-neighborhoods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    labels: Vec<Label>,
    adjacency: Vec<Vec<usize>>,
    directed: bool,
}

impl Graph {
    /// Builds a graph, checking that every neighbor id is in range and that no
    /// adjacency list repeats a neighbor.
    pub fn new(labels: Vec<Label>, adjacency: Vec<Vec<usize>>, directed: bool) -> Result<Self> {
        let n = labels.len();
        if adjacency.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} adjacency lists for {} nodes",
                adjacency.len(),
                n
            )));
        }
        if labels.contains(&Label::BIAS) {
            return Err(Error::InvalidGraph("reserved bias label used as node label".into()));
        }
        let mut seen = vec![usize::MAX; n];
        for (v, list) in adjacency.iter().enumerate() {
            for &u in list {
                if u >= n {
                    return Err(Error::InvalidGraph(format!(
                        "node {v} has neighbor {u} but the graph has {n} nodes"
                    )));
                }
                if seen[u] == v {
                    return Err(Error::InvalidGraph(format!("node {v} lists neighbor {u} twice")));
                }
                seen[u] = v;
            }
        }
        Ok(Self {
            labels,
            adjacency,
            directed,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Number of directed adjacency entries, Σ_v |N_v|.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Label {
        self.labels[v]
    }

    /// Out-neighbors of `v` in traversal order.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Same structure and neighbor order with new node labels.
    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Self> {
        Self::new(labels, self.adjacency.clone(), self.directed)
    }

    /// Adds `u -> v` for every `v -> u` that is missing. A reverse entry is
    /// appended after the existing neighbors of `u`, in the order the forward
    /// edges are encountered.
    pub fn with_reverse_edges(&self) -> Self {
        let n = self.node_count();
        let mut adjacency = self.adjacency.clone();
        let mut present: Vec<std::collections::HashSet<usize>> =
            adjacency.iter().map(|list| list.iter().copied().collect()).collect();
        for (v, list) in self.adjacency.iter().enumerate() {
            for &u in list {
                if present[u].insert(v) {
                    adjacency[u].push(v);
                }
            }
        }
        debug_assert_eq!(adjacency.len(), n);
        Self {
            labels: self.labels.clone(),
            adjacency,
            directed: false,
        }
    }

    /// Renumbers nodes: node `v` becomes `perm[v]`. Labels and each list's
    /// neighbor order travel with the nodes.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count();
        if perm.len() != n {
            return Err(Error::InvalidGraph("permutation length differs from node count".into()));
        }
        let mut labels = vec![Label(0); n];
        let mut adjacency = vec![Vec::new(); n];
        let mut hit = vec![false; n];
        for v in 0..n {
            let w = perm[v];
            if w >= n || std::mem::replace(&mut hit[w], true) {
                return Err(Error::InvalidGraph("not a permutation".into()));
            }
            labels[w] = self.labels[v];
            adjacency[w] = self.adjacency[v].iter().map(|&u| perm[u]).collect();
        }
        Self::new(labels, adjacency, self.directed)
    }

    /// Places the graphs side by side, offsetting node ids.
    pub fn disjoint_union(graphs: &[Graph]) -> Self {
        let mut labels = Vec::new();
        let mut adjacency = Vec::new();
        let mut directed = true;
        for g in graphs {
            let offset = labels.len();
            labels.extend_from_slice(&g.labels);
            adjacency.extend(
                g.adjacency
                    .iter()
                    .map(|list| list.iter().map(|&u| u + offset).collect::<Vec<_>>()),
            );
            directed &= g.directed;
        }
        Self {
            labels,
            adjacency,
            directed,
        }
    }
}

/// A collection of graphs with integer class labels over one shared alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphDataset {
    pub graphs: Vec<Graph>,
    pub classes: Vec<i64>,
    pub alphabet: Alphabet,
}

impl GraphDataset {
    pub fn new(graphs: Vec<Graph>, classes: Vec<i64>, alphabet: Alphabet) -> Result<Self> {
        if graphs.len() != classes.len() {
            return Err(Error::InvalidGraph(format!(
                "{} graphs but {} class labels",
                graphs.len(),
                classes.len()
            )));
        }
        Ok(Self {
            graphs,
            classes,
            alphabet,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn total_edges(&self) -> usize {
        self.graphs.iter().map(Graph::edge_count).sum()
    }

    /// Symmetrizes every graph, see [`Graph::with_reverse_edges`].
    pub fn with_reverse_edges(&self) -> Self {
        Self {
            graphs: self.graphs.iter().map(Graph::with_reverse_edges).collect(),
            classes: self.classes.clone(),
            alphabet: self.alphabet.clone(),
        }
    }

    /// Shuffles every graph's neighborhoods; graph `i` uses a seed derived
    /// from `(seed, i)`.
    pub fn shuffle_neighborhoods(&self, seed: u64) -> Self {
        Self {
            graphs: self
                .graphs
                .iter()
                .enumerate()
                .map(|(i, g)| shuffle_neighborhoods(g, crate::hash::mix64(seed ^ crate::hash::mix64(i as u64))))
                .collect(),
            classes: self.classes.clone(),
            alphabet: self.alphabet.clone(),
        }
    }
}

/// Independently permutes each adjacency list with a seeded generator,
/// discarding the neighbor order while keeping labels and the edge set.
pub fn shuffle_neighborhoods(graph: &Graph, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = graph.clone();
    for list in &mut shuffled.adjacency {
        list.shuffle(&mut rng);
    }
    shuffled
}
