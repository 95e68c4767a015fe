//! Composite string generation traversals.
//!
//! Both traversals build the iteration-`i` string of a node by concatenating
//! the iteration-`(i - 1)` strings of its out-neighbors in neighbor order:
//!
//! * breadth-first: `s_v^0 = l(v)`, `s_v^i = s_u1^{i-1} s_u2^{i-1} ...` and the
//!   final string is `s_v^0 s_v^1 ... s_v^h`;
//! * Weisfeiler-Lehman: `s_v^i = l(v) s_u1^{i-1} s_u2^{i-1} ...` and the final
//!   string is `s_v^h`.
//!
//! The breadth-first traversal unfolds the graph as a tree: a node reached by
//! several walks contributes its label once per walk, so on the example graph
//! with edges `v->B, v->C, v->D, v->G, D->G, B->F, B->E, C->H` (neighbors in
//! alphabetical order) node `v` yields `A BCDG EFHG` at depth 2.
//!
//! The traversal is written once against [`Combiner`]; explicit strings and
//! k-gram summaries are two combiners.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Alphabet, Graph, GraphDataset, Label};
use crate::kgram::{summarize, PayloadSpace, StringSummary, SummaryBuilder};

/// Default cap on the total number of tokens materialized by explicit
/// traversals.
pub const DEFAULT_LENGTH_CAP: usize = 10_000_000;

const PARALLEL_NODES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraversalKind {
    Bfs,
    Wl,
}

impl std::str::FromStr for TraversalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bfs" => Ok(TraversalKind::Bfs),
            "wl" => Ok(TraversalKind::Wl),
            other => Err(Error::InvalidConfig(format!("unknown traversal {other:?}"))),
        }
    }
}

/// Builds node strings, or stand-ins for them, from labels and ordered
/// concatenation.
pub trait Combiner: Sync {
    type Item: Clone + Send + Sync;

    fn leaf(&self, label: Label) -> Result<Self::Item>;

    /// The concatenation of `parts` in order.
    fn concat(&self, parts: &[&Self::Item]) -> Result<Self::Item>;

    /// Appends one iteration's string to the running breadth-first string.
    fn append(&self, acc: &Self::Item, next: &Self::Item) -> Result<Self::Item> {
        self.concat(&[acc, next])
    }
}

/// One traversal iteration: the iteration-`i` item of every node from the
/// iteration-`(i - 1)` items.
pub fn csgt_step<C: Combiner>(
    previous: &[C::Item],
    graph: &Graph,
    kind: TraversalKind,
    combiner: &C,
) -> Result<Vec<C::Item>> {
    let step = |v: usize| -> Result<C::Item> {
        let neighbors = graph.neighbors(v);
        let mut parts: Vec<&C::Item> = Vec::with_capacity(neighbors.len() + 1);
        let own;
        if kind == TraversalKind::Wl {
            own = combiner.leaf(graph.label(v))?;
            parts.push(&own);
        }
        parts.extend(neighbors.iter().map(|&u| &previous[u]));
        combiner.concat(&parts)
    };
    if graph.node_count() >= PARALLEL_NODES {
        (0..graph.node_count()).into_par_iter().map(step).collect()
    } else {
        (0..graph.node_count()).map(step).collect()
    }
}

/// Runs `h` iterations and returns each node's final item. `on_iteration`
/// sees the per-node items of iterations `0..=h`.
pub fn run_csgt<C: Combiner>(
    graph: &Graph,
    kind: TraversalKind,
    h: usize,
    combiner: &C,
    mut on_iteration: impl FnMut(usize, &[C::Item]),
) -> Result<Vec<C::Item>> {
    let mut current = graph
        .labels()
        .iter()
        .map(|&l| combiner.leaf(l))
        .collect::<Result<Vec<_>>>()?;
    on_iteration(0, &current);
    let mut total = match kind {
        TraversalKind::Bfs => Some(current.clone()),
        TraversalKind::Wl => None,
    };
    for i in 1..=h {
        current = csgt_step(&current, graph, kind, combiner)?;
        on_iteration(i, &current);
        if let Some(total) = total.as_mut() {
            for (acc, next) in total.iter_mut().zip(&current) {
                *acc = combiner.append(acc, next)?;
            }
        }
    }
    Ok(total.unwrap_or(current))
}

/// Materializes strings, failing once the total number of tokens produced
/// exceeds a cap.
pub struct ExplicitStrings {
    cap: usize,
    produced: AtomicUsize,
}

impl ExplicitStrings {
    pub fn new(cap: usize) -> Self {
        Self {
            cap,
            produced: AtomicUsize::new(0),
        }
    }

    fn charge(&self, tokens: usize) -> Result<()> {
        let before = self.produced.fetch_add(tokens, Ordering::Relaxed);
        if before.saturating_add(tokens) > self.cap {
            Err(Error::LengthCapExceeded { cap: self.cap })
        } else {
            Ok(())
        }
    }
}

impl Combiner for ExplicitStrings {
    type Item = Vec<Label>;

    fn leaf(&self, label: Label) -> Result<Vec<Label>> {
        self.charge(1)?;
        Ok(vec![label])
    }

    fn concat(&self, parts: &[&Vec<Label>]) -> Result<Vec<Label>> {
        let len = parts.iter().map(|p| p.len()).sum();
        self.charge(len)?;
        let mut out = Vec::with_capacity(len);
        for p in parts {
            out.extend_from_slice(p);
        }
        Ok(out)
    }
}

/// Per-node, per-iteration strings of an explicit traversal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeStrings {
    /// `iterations[i][v]` is `s_v^i`.
    pub iterations: Vec<Vec<Vec<Label>>>,
    /// `finals[v]` is `S_v^h`.
    pub finals: Vec<Vec<Label>>,
}

pub fn explicit_strings(graph: &Graph, kind: TraversalKind, h: usize, cap: usize) -> Result<NodeStrings> {
    let combiner = ExplicitStrings::new(cap);
    let mut iterations = Vec::with_capacity(h + 1);
    let finals = run_csgt(graph, kind, h, &combiner, |_, items| iterations.push(items.to_vec()))?;
    Ok(NodeStrings { iterations, finals })
}

pub fn bfs_strings(graph: &Graph, h: usize) -> Result<NodeStrings> {
    explicit_strings(graph, TraversalKind::Bfs, h, DEFAULT_LENGTH_CAP)
}

pub fn wl_strings(graph: &Graph, h: usize) -> Result<NodeStrings> {
    explicit_strings(graph, TraversalKind::Wl, h, DEFAULT_LENGTH_CAP)
}

/// Drives the traversal over [`StringSummary`] items, never materializing
/// strings longer than `2(k - 1)` tokens.
pub struct SummaryCombiner<'a, S: PayloadSpace> {
    space: &'a S,
    k: usize,
    step_kgrams: AtomicU64,
    append_kgrams: AtomicU64,
}

impl<'a, S: PayloadSpace> SummaryCombiner<'a, S> {
    pub fn new(space: &'a S, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroK);
        }
        Ok(Self {
            space,
            k,
            step_kgrams: AtomicU64::new(0),
            append_kgrams: AtomicU64::new(0),
        })
    }

    /// Junction k-grams created by [`csgt_step`] concatenations so far.
    pub fn step_kgrams(&self) -> u64 {
        self.step_kgrams.load(Ordering::Relaxed)
    }

    /// Junction k-grams created while appending iteration strings to the
    /// breadth-first running string.
    pub fn append_kgrams(&self) -> u64 {
        self.append_kgrams.load(Ordering::Relaxed)
    }

    fn join(&self, parts: &[&StringSummary<S::Payload>], counter: &AtomicU64) -> Result<StringSummary<S::Payload>> {
        let mut builder = SummaryBuilder::new(self.space, self.k)?;
        for part in parts {
            builder.push(part)?;
        }
        counter.fetch_add(builder.new_kgrams(), Ordering::Relaxed);
        Ok(builder.finish())
    }
}

impl<S: PayloadSpace> Combiner for SummaryCombiner<'_, S> {
    type Item = StringSummary<S::Payload>;

    fn leaf(&self, label: Label) -> Result<Self::Item> {
        summarize(&[label], self.k, self.space)
    }

    fn concat(&self, parts: &[&Self::Item]) -> Result<Self::Item> {
        self.join(parts, &self.step_kgrams)
    }

    fn append(&self, acc: &Self::Item, next: &Self::Item) -> Result<Self::Item> {
        self.join(&[acc, next], &self.append_kgrams)
    }
}

/// One round of Weisfeiler-Lehman relabeling with neighbor order kept: each
/// node's new label is the compressed id of `l(v)` followed by its
/// neighbors' labels in order. The dictionary persists across calls so that
/// all graphs of a dataset share one label space.
#[derive(Debug, Clone, Default)]
pub struct WlRelabeler {
    dictionary: HashMap<Vec<Label>, Label>,
    alphabet: Alphabet,
}

impl WlRelabeler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Compressed label of a node with label `own` whose neighbors carry
    /// `neighbors`, in order. `names` renders old labels for the new alphabet.
    pub fn label_for(
        &mut self,
        own: Label,
        neighbors: impl IntoIterator<Item = Label>,
        names: Option<&Alphabet>,
    ) -> Label {
        let mut key = vec![own];
        key.extend(neighbors);
        if let Some(&l) = self.dictionary.get(&key) {
            return l;
        }
        let render = |l: Label| -> String {
            names
                .and_then(|a| a.name(l))
                .map(str::to_owned)
                .unwrap_or_else(|| l.0.to_string())
        };
        let rendered: Vec<String> = key[1..].iter().map(|&l| render(l)).collect();
        let name = format!("{}({})", render(key[0]), rendered.join(","));
        let l = self.alphabet.intern(&name);
        self.dictionary.insert(key, l);
        l
    }

    /// Relabels one graph.
    pub fn relabel_with(&mut self, graph: &Graph, names: Option<&Alphabet>) -> Graph {
        let labels = (0..graph.node_count())
            .map(|v| {
                let neighbors = graph.neighbors(v).iter().map(|&u| graph.label(u));
                self.label_for(graph.label(v), neighbors, names)
            })
            .collect();
        graph.with_labels(labels).expect("relabeling keeps the structure valid")
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn into_alphabet(self) -> Alphabet {
        self.alphabet
    }
}

/// Relabels a single graph with a fresh dictionary.
pub fn wl_relabel(graph: &Graph) -> Graph {
    WlRelabeler::new().relabel_with(graph, None)
}

/// Relabels every graph of a dataset over one shared dictionary; ids are
/// assigned in graph order, then node order.
pub fn wl_relabel_dataset(dataset: &GraphDataset) -> GraphDataset {
    let mut relabeler = WlRelabeler::new();
    let graphs = dataset
        .graphs
        .iter()
        .map(|g| relabeler.relabel_with(g, Some(&dataset.alphabet)))
        .collect();
    GraphDataset {
        graphs,
        classes: dataset.classes.clone(),
        alphabet: relabeler.into_alphabet(),
    }
}
