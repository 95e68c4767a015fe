//! Semi-streaming feature maps.
//!
//! Edges arrive as events in any order. Traversal iteration `i` is one pass
//! over the stream: when `src -> dst` arrives, the iteration-`(i - 1)` payload
//! of `dst` is merged into the iteration-`i` summary of `src` immediately, and
//! the `(order_key, label, dst)` triple is kept so that the junction k-grams
//! can be replayed in neighbor order at the end of the pass. Only per-node
//! summaries are stored, never a string or an adjacency list.
//!
//! Payloads stay integer-valued until finalization, so the result does not
//! depend on arrival order and is bit-identical to the in-memory computation
//! on the parsed graph.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::feature::{sketched_node_feature, sum_node_sketches, FeatureConfig, FeatureMap, FeatureVector};
use crate::graph::temporal::{parse_edge_line, NodeTable};
use crate::graph::{Alphabet, GraphDataset, Label};
use crate::kgram::{summarize, Boundary, StringSummary, SummaryBuilder};
use crate::sketch::{Convolver, SketchSpace, TensorSketch};
use crate::traversal::{TraversalKind, WlRelabeler};

const CHECKPOINT_MAGIC: [u8; 8] = *b"KONGSTR\0";
const CHECKPOINT_VERSION: u32 = 1;

/// A directed edge between global node ids; `order_key` ranks `dst` among
/// the neighbors of `src`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeEvent {
    pub src: usize,
    pub dst: usize,
    pub order_key: i64,
}

/// A source of edge events. Multi-pass computations replay it once per pass.
pub trait EventSource {
    fn for_each_event(&mut self, f: &mut dyn FnMut(EdgeEvent) -> Result<()>) -> Result<()>;
}

impl EventSource for Vec<EdgeEvent> {
    fn for_each_event(&mut self, f: &mut dyn FnMut(EdgeEvent) -> Result<()>) -> Result<()> {
        self.iter().try_for_each(|&e| f(e))
    }
}

/// Events of a temporal edge file, read line by line on every pass.
pub struct FileEvents<'a> {
    path: PathBuf,
    table: &'a NodeTable,
}

impl<'a> FileEvents<'a> {
    pub fn new(path: impl Into<PathBuf>, table: &'a NodeTable) -> Self {
        Self {
            path: path.into(),
            table,
        }
    }
}

impl EventSource for FileEvents<'_> {
    fn for_each_event(&mut self, f: &mut dyn FnMut(EdgeEvent) -> Result<()>) -> Result<()> {
        let path = self.path.as_path();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut first = true;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            if std::mem::take(&mut first) && text.split(',').next().map(str::trim) == Some("graph_id") {
                continue;
            }
            let e = parse_edge_line(path, i + 1, text)?;
            let global = |node| {
                self.table
                    .locate(e.graph, node)
                    .map(|(g, local)| self.table.offsets[g] + local)
                    .ok_or_else(|| Error::parse(path, i + 1, format!("node {node} of graph {} has no label", e.graph)))
            };
            f(EdgeEvent {
                src: global(e.src)?,
                dst: global(e.dst)?,
                order_key: e.order_key,
            })?;
        }
        Ok(())
    }
}

/// A source that can be read only once, such as a live feed.
pub struct OnceEvents<I> {
    events: Option<I>,
}

impl<I: Iterator<Item = EdgeEvent>> OnceEvents<I> {
    pub fn new(events: I) -> Self {
        Self { events: Some(events) }
    }
}

impl<I: Iterator<Item = EdgeEvent>> EventSource for OnceEvents<I> {
    fn for_each_event(&mut self, f: &mut dyn FnMut(EdgeEvent) -> Result<()>) -> Result<()> {
        let events = self
            .events
            .take()
            .ok_or_else(|| Error::Stream("the event source cannot be replayed for another pass".into()))?;
        events.into_iter().try_for_each(f)
    }
}

/// Events of an in-memory dataset with `order_key` = adjacency position.
pub fn dataset_events(dataset: &GraphDataset) -> Vec<EdgeEvent> {
    let mut events = Vec::with_capacity(dataset.total_edges());
    let mut offset = 0;
    for g in &dataset.graphs {
        for v in 0..g.node_count() {
            for (rank, &u) in g.neighbors(v).iter().enumerate() {
                events.push(EdgeEvent {
                    src: offset + v,
                    dst: offset + u,
                    order_key: rank as i64,
                });
            }
        }
        offset += g.node_count();
    }
    events
}

/// Resource counters of a streaming run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub passes: usize,
    pub events: u64,
    /// k-grams fed into payloads: leaf tokens plus junction k-grams.
    pub kgram_feeds: u64,
    /// Payload merges on edge arrival.
    pub payload_merges: u64,
    /// Largest number of sketch counters held at once.
    pub peak_counters: usize,
}

/// How neighbor order is determined during a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    /// By `(order_key, neighbor label, neighbor id)`, whatever the arrival order.
    #[default]
    Keyed,
    /// Arrival order is the neighbor order; single pass, no buffering.
    Arrival,
}

/// Per-node summaries of a streaming computation.
#[derive(Debug, Clone)]
pub struct StreamState {
    config: FeatureConfig,
    space: SketchSpace,
    ordering: Ordering,
    labels: Vec<Label>,
    /// Global id of each graph's first node, plus the total at the end.
    bounds: Vec<usize>,
    pass: usize,
    relabeled: bool,
    previous: Vec<StringSummary<TensorSketch>>,
    total: Option<Vec<StringSummary<TensorSketch>>>,
    stats: StreamStats,
}

impl StreamState {
    /// `labels[g]` are the labels of graph `g` by local id.
    pub fn new(labels: &[Vec<Label>], config: &FeatureConfig, ordering: Ordering) -> Result<Self> {
        config.validate()?;
        let space = config
            .sketch_space()
            .ok_or_else(|| Error::InvalidConfig("streaming requires sketched mode".into()))?;
        if config.exact_norms {
            return Err(Error::InvalidConfig(
                "exact norms are not tracked in streaming mode".into(),
            ));
        }
        let mut bounds = vec![0];
        for g in labels {
            bounds.push(bounds.last().unwrap() + g.len());
        }
        let mut state = Self {
            config: config.clone(),
            space,
            ordering,
            labels: labels.iter().flatten().copied().collect(),
            bounds,
            pass: 0,
            relabeled: false,
            previous: Vec::new(),
            total: None,
            stats: StreamStats::default(),
        };
        state.reset_leaves()?;
        Ok(state)
    }

    pub fn from_table(table: &NodeTable, config: &FeatureConfig, ordering: Ordering) -> Result<Self> {
        Self::new(&table.labels, config, ordering)
    }

    fn reset_leaves(&mut self) -> Result<()> {
        self.previous = self
            .labels
            .iter()
            .map(|&l| summarize(&[l], self.config.k, &self.space))
            .collect::<Result<_>>()?;
        self.stats.kgram_feeds += if self.config.k == 1 {
            self.labels.len() as u64
        } else {
            0
        };
        self.total = (self.config.traversal == TraversalKind::Bfs).then(|| self.previous.clone());
        self.note_counters(0);
        Ok(())
    }

    fn note_counters(&mut self, extra_summaries: usize) {
        let live = self.previous.len() + self.total.as_ref().map_or(0, Vec::len) + extra_summaries;
        let per = self.space.rows * self.space.width * self.space.degree as usize;
        self.stats.peak_counters = self.stats.peak_counters.max(live * per);
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Traversal iterations completed.
    pub fn passes_done(&self) -> usize {
        self.pass
    }

    pub fn stats(&self) -> &StreamStats {
        &self.stats
    }

    fn check_event(&self, e: &EdgeEvent) -> Result<()> {
        let n = self.node_count();
        if e.src >= n || e.dst >= n {
            return Err(Error::Stream(format!(
                "event {} -> {} refers to an unknown node",
                e.src, e.dst
            )));
        }
        let graph_of = |v: usize| self.bounds.partition_point(|&b| b <= v);
        if graph_of(e.src) != graph_of(e.dst) {
            return Err(Error::Stream(format!("event {} -> {} crosses graphs", e.src, e.dst)));
        }
        Ok(())
    }

    /// Extra pass computing the order-aware WL relabeling. Label ids are
    /// assigned in global node order, as in the in-memory relabeling.
    pub fn relabel_pass(&mut self, source: &mut dyn EventSource, names: Option<&Alphabet>) -> Result<Alphabet> {
        if self.pass > 0 || self.relabeled {
            return Err(Error::Stream("relabeling must precede the traversal passes".into()));
        }
        let mut pending: Vec<Vec<(i64, Label, usize)>> = vec![Vec::new(); self.node_count()];
        let mut events = 0u64;
        source.for_each_event(&mut |e| {
            self.check_event(&e)?;
            events += 1;
            pending[e.src].push((e.order_key, self.labels[e.dst], e.dst));
            Ok(())
        })?;
        self.stats.events += events;
        let mut relabeler = WlRelabeler::new();
        let mut labels = Vec::with_capacity(self.node_count());
        for (v, list) in pending.iter_mut().enumerate() {
            if self.ordering == Ordering::Keyed {
                list.sort_unstable();
            }
            labels.push(relabeler.label_for(self.labels[v], list.iter().map(|t| t.1), names));
        }
        self.labels = labels;
        self.relabeled = true;
        self.stats.passes += 1;
        self.stats.kgram_feeds = 0;
        self.reset_leaves()?;
        Ok(relabeler.into_alphabet())
    }

    /// One traversal iteration over the whole stream.
    pub fn pass(&mut self, source: &mut dyn EventSource) -> Result<()> {
        if self.pass >= self.config.h {
            return Err(Error::Stream(format!("all {} passes are done", self.config.h)));
        }
        let k = self.config.k;
        let space = self.space;
        let wl = self.config.traversal == TraversalKind::Wl;
        let mut builders = self
            .labels
            .iter()
            .map(|&l| -> Result<SummaryBuilder<SketchSpace>> {
                let mut b = SummaryBuilder::new(&space, k)?;
                if wl {
                    b.push(&summarize(&[l], k, &space)?)?;
                }
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()?;
        if wl && k == 1 {
            self.stats.kgram_feeds += self.labels.len() as u64;
        }
        self.note_counters(builders.len());

        let keyed = self.ordering == Ordering::Keyed;
        let mut pending: Vec<Vec<(i64, Label, usize)>> = vec![Vec::new(); if keyed { self.node_count() } else { 0 }];
        let previous = &self.previous;
        let labels = &self.labels;
        let mut events = 0u64;
        {
            let check = |e: &EdgeEvent| self.check_event(e);
            source.for_each_event(&mut |e| {
                check(&e)?;
                events += 1;
                if keyed {
                    builders[e.src].merge_payload(&previous[e.dst].payload);
                    pending[e.src].push((e.order_key, labels[e.dst], e.dst));
                } else {
                    builders[e.src].push(&previous[e.dst])?;
                }
                Ok(())
            })?;
        }
        for (v, list) in pending.iter_mut().enumerate() {
            list.sort_unstable();
            for &(_, _, u) in list.iter() {
                builders[v].push_boundary(&previous[u].boundary);
            }
        }
        let current: Vec<_> = builders
            .into_iter()
            .map(|b| {
                self.stats.kgram_feeds += b.new_kgrams();
                b.finish()
            })
            .collect();
        self.stats.events += events;
        self.stats.payload_merges += events;

        if let Some(total) = self.total.as_mut() {
            for (acc, next) in total.iter_mut().zip(&current) {
                let mut b = SummaryBuilder::new(&space, k)?;
                b.push(acc)?;
                b.push(next)?;
                self.stats.kgram_feeds += b.new_kgrams();
                *acc = b.finish();
            }
        }
        self.previous = current;
        self.pass += 1;
        self.stats.passes += 1;
        Ok(())
    }

    /// Feature maps of all graphs once every pass is done.
    pub fn finalize(&self) -> Result<Vec<FeatureMap>> {
        if self.pass != self.config.h {
            return Err(Error::Stream(format!(
                "finalizing after {} of {} passes",
                self.pass, self.config.h
            )));
        }
        if self.config.relabel && !self.relabeled {
            return Err(Error::Stream("the configuration asks for a relabeling pass".into()));
        }
        let finals = self.total.as_ref().unwrap_or(&self.previous);
        let convolver = Convolver::new(self.space.width)?;
        (0..self.bounds.len() - 1)
            .map(|g| {
                let nodes = &finals[self.bounds[g]..self.bounds[g + 1]];
                let total = sum_node_sketches(
                    &self.space,
                    nodes
                        .iter()
                        .map(|s| sketched_node_feature(&s.payload, s.payload.norm(), &self.config, &convolver)),
                )?;
                Ok(FeatureMap::from_parts(
                    g,
                    FeatureVector::Dense(total),
                    self.config.clone(),
                ))
            })
            .collect()
    }

    /// Saves the pass counter, labels and per-node summaries.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
            out.write_all(&CHECKPOINT_MAGIC)?;
            for v in [
                CHECKPOINT_VERSION,
                self.config.k as u32,
                self.pass as u32,
                self.relabeled as u32,
            ] {
                out.write_all(&v.to_le_bytes())?;
            }
            out.write_all(&(self.labels.len() as u64).to_le_bytes())?;
            for l in &self.labels {
                out.write_all(&l.0.to_le_bytes())?;
            }
            out.write_all(&[self.total.is_some() as u8])?;
            for s in self.previous.iter().chain(self.total.iter().flatten()) {
                write_boundary(out, &s.boundary)?;
                s.payload.write_to(out)?;
            }
            out.flush()
        };
        write(&mut out).map_err(io)
    }

    /// Restores a checkpoint written for the same configuration and nodes.
    pub fn load_checkpoint(&mut self, path: &Path) -> Result<()> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let mut magic = [0u8; 8];
        read_exact(&mut input, &mut magic)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Stream(format!("{} is not a stream checkpoint", path.display())));
        }
        let version = read_u32(&mut input)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Stream(format!("unsupported checkpoint version {version}")));
        }
        let k = read_u32(&mut input)? as usize;
        let pass = read_u32(&mut input)? as usize;
        let relabeled = read_u32(&mut input)? != 0;
        let n = read_u64(&mut input)? as usize;
        if k != self.config.k || n != self.node_count() || pass > self.config.h {
            return Err(Error::Stream("checkpoint does not match this configuration".into()));
        }
        let labels = (0..n)
            .map(|_| read_u32(&mut input).map(Label))
            .collect::<Result<Vec<_>>>()?;
        let mut flag = [0u8; 1];
        read_exact(&mut input, &mut flag)?;
        if (flag[0] != 0) != self.total.is_some() {
            return Err(Error::Stream("checkpoint traversal kind does not match".into()));
        }
        let mut read_summaries = || -> Result<Vec<StringSummary<TensorSketch>>> {
            (0..n)
                .map(|_| {
                    let boundary = read_boundary(&mut input)?;
                    let payload = TensorSketch::read_from(&mut input)?;
                    if payload.width() != self.space.width
                        || payload.rows() != self.space.rows
                        || payload.seed() != self.space.seed
                        || payload.degree() != self.space.degree
                    {
                        return Err(Error::Stream("checkpoint sketch parameters do not match".into()));
                    }
                    Ok(StringSummary { k, boundary, payload })
                })
                .collect()
        };
        let previous = read_summaries()?;
        let total = if flag[0] != 0 { Some(read_summaries()?) } else { None };
        self.labels = labels;
        self.pass = pass;
        self.relabeled = relabeled;
        self.previous = previous;
        self.total = total;
        Ok(())
    }
}

fn write_tokens(out: &mut impl Write, tokens: &[Label]) -> std::io::Result<()> {
    out.write_all(&(tokens.len() as u32).to_le_bytes())?;
    tokens.iter().try_for_each(|t| out.write_all(&t.0.to_le_bytes()))
}

fn write_boundary(out: &mut impl Write, b: &Boundary) -> std::io::Result<()> {
    out.write_all(&b.length.to_le_bytes())?;
    write_tokens(out, &b.prefix)?;
    write_tokens(out, &b.suffix)?;
    match &b.short_body {
        Some(body) => {
            out.write_all(&[1])?;
            write_tokens(out, body)
        }
        None => out.write_all(&[0]),
    }
}

fn read_exact(input: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    input
        .read_exact(buf)
        .map_err(|e| Error::Stream(format!("truncated checkpoint: {e}")))
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(input, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(input, &mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_tokens(input: &mut impl Read) -> Result<Vec<Label>> {
    let len = read_u32(input)?;
    (0..len).map(|_| read_u32(input).map(Label)).collect()
}

fn read_boundary(input: &mut impl Read) -> Result<Boundary> {
    let length = read_u64(input)?;
    let prefix = read_tokens(input)?;
    let suffix = read_tokens(input)?;
    let mut flag = [0u8; 1];
    read_exact(input, &mut flag)?;
    let short_body = if flag[0] != 0 { Some(read_tokens(input)?) } else { None };
    Ok(Boundary {
        length,
        prefix,
        suffix,
        short_body,
    })
}

/// Runs the relabeling pass (if configured) and all `h` traversal passes,
/// then finalizes.
pub fn stream_feature_maps(
    source: &mut dyn EventSource,
    labels: &[Vec<Label>],
    names: Option<&Alphabet>,
    config: &FeatureConfig,
    ordering: Ordering,
) -> Result<(Vec<FeatureMap>, StreamStats)> {
    let mut state = StreamState::new(labels, config, ordering)?;
    if config.relabel {
        state.relabel_pass(source, names)?;
    }
    for _ in 0..config.h {
        state.pass(source)?;
    }
    Ok((state.finalize()?, state.stats.clone()))
}
