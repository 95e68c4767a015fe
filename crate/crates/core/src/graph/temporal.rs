//! Temporal edge-list CSV format.
//!
//! * edges: `graph_id,src,dst,order_key`; the order key (a timestamp or rank)
//!   fixes the position of `dst` in the neighbor list of `src`;
//! * node labels: `graph_id,node,label`;
//! * graph classes (optional): `graph_id,class`.
//!
//! Graphs are numbered by ascending `graph_id` and nodes by ascending raw node
//! id within their graph. Label ids follow first appearance in the label file.
//! Blank lines, `#` comments and a leading `graph_id,...` header are skipped.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::tu::read_lines;
use super::{Alphabet, Graph, GraphDataset, Label};
use crate::error::{Error, Result};

fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut lines = read_lines(path)?;
    lines.retain(|(_, l)| !l.starts_with('#'));
    if let Some((_, first)) = lines.first() {
        if first.split(',').next().map(str::trim) == Some("graph_id") {
            lines.remove(0);
        }
    }
    Ok(lines)
}

fn fields<'a>(path: &Path, line: usize, text: &'a str, want: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != want {
        return Err(Error::parse(
            path,
            line,
            format!("expected {want} comma-separated fields, found {}", parts.len()),
        ));
    }
    Ok(parts)
}

fn int<T: std::str::FromStr>(path: &Path, line: usize, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("expected an integer, found {field:?}")))
}

/// One parsed edge line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawEdge {
    pub graph: u64,
    pub src: u64,
    pub dst: u64,
    pub order_key: i64,
}

pub(crate) fn parse_edge_line(path: &Path, line: usize, text: &str) -> Result<RawEdge> {
    let f = fields(path, line, text, 4)?;
    Ok(RawEdge {
        graph: int(path, line, f[0])?,
        src: int(path, line, f[1])?,
        dst: int(path, line, f[2])?,
        order_key: int(path, line, f[3])?,
    })
}

/// Node labels of a whole dataset, with the raw-id to dense-id mapping.
#[derive(Debug, Clone)]
pub struct NodeTable {
    pub alphabet: Alphabet,
    /// Raw graph ids in ascending order; position = graph index.
    pub graph_ids: Vec<u64>,
    /// Per graph, labels by local node id.
    pub labels: Vec<Vec<Label>>,
    /// Per graph, the global id of local node 0.
    pub offsets: Vec<usize>,
    /// Per graph, class labels (0 when no class file is given).
    pub classes: Vec<i64>,
    index: HashMap<(u64, u64), (usize, usize)>,
}

impl NodeTable {
    /// Reads the node-label file and, if given, the graph-class file.
    pub fn load(node_labels: &Path, graph_classes: Option<&Path>) -> Result<Self> {
        let mut alphabet = Alphabet::new();
        let mut graphs: BTreeMap<u64, BTreeMap<u64, Label>> = BTreeMap::new();
        for (line, text) in data_lines(node_labels)? {
            let f = fields(node_labels, line, &text, 3)?;
            let g: u64 = int(node_labels, line, f[0])?;
            let v: u64 = int(node_labels, line, f[1])?;
            let label = alphabet.intern(f[2]);
            if graphs.entry(g).or_default().insert(v, label).is_some() {
                return Err(Error::parse(
                    node_labels,
                    line,
                    format!("node {v} of graph {g} labeled twice"),
                ));
            }
        }
        let mut class_of = BTreeMap::new();
        if let Some(path) = graph_classes {
            for (line, text) in data_lines(path)? {
                let f = fields(path, line, &text, 2)?;
                let g: u64 = int(path, line, f[0])?;
                let class: i64 = int(path, line, f[1])?;
                if class_of.insert(g, class).is_some() {
                    return Err(Error::parse(path, line, format!("graph {g} has two classes")));
                }
                graphs.entry(g).or_default();
            }
        }

        let mut table = NodeTable {
            alphabet,
            graph_ids: Vec::with_capacity(graphs.len()),
            labels: Vec::with_capacity(graphs.len()),
            offsets: Vec::with_capacity(graphs.len()),
            classes: Vec::with_capacity(graphs.len()),
            index: HashMap::new(),
        };
        let mut offset = 0;
        for (gi, (g, nodes)) in graphs.into_iter().enumerate() {
            table.graph_ids.push(g);
            table.offsets.push(offset);
            table.classes.push(class_of.get(&g).copied().unwrap_or(0));
            let mut labels = Vec::with_capacity(nodes.len());
            for (local, (v, label)) in nodes.into_iter().enumerate() {
                table.index.insert((g, v), (gi, local));
                labels.push(label);
            }
            offset += labels.len();
            table.labels.push(labels);
        }
        Ok(table)
    }

    /// (graph index, local node id) of a raw node.
    pub fn locate(&self, graph: u64, node: u64) -> Option<(usize, usize)> {
        self.index.get(&(graph, node)).copied()
    }

    pub fn total_nodes(&self) -> usize {
        self.labels.iter().map(Vec::len).sum()
    }

    pub fn graph_count(&self) -> usize {
        self.graph_ids.len()
    }
}

/// Parses an ordered-neighborhood dataset from the temporal CSV files.
///
/// Each adjacency list is sorted ascending by order key, ties broken by
/// neighbor label id and then neighbor node id.
pub fn parse_temporal_edge_list(
    edges: impl AsRef<Path>,
    node_labels: impl AsRef<Path>,
    graph_classes: Option<&Path>,
) -> Result<GraphDataset> {
    let edges = edges.as_ref();
    let table = NodeTable::load(node_labels.as_ref(), graph_classes)?;
    let mut pending: Vec<Vec<Vec<(i64, Label, usize)>>> =
        table.labels.iter().map(|l| vec![Vec::new(); l.len()]).collect();
    let mut seen = std::collections::HashSet::new();
    for (line, text) in data_lines(edges)? {
        let e = parse_edge_line(edges, line, &text)?;
        let locate = |node| {
            table
                .locate(e.graph, node)
                .ok_or_else(|| Error::parse(edges, line, format!("node {node} of graph {} has no label", e.graph)))
        };
        let (g, src) = locate(e.src)?;
        let (_, dst) = locate(e.dst)?;
        if !seen.insert((e.graph, e.src, e.dst)) {
            return Err(Error::parse(
                edges,
                line,
                format!("duplicate edge {} -> {} in graph {}", e.src, e.dst, e.graph),
            ));
        }
        pending[g][src].push((e.order_key, table.labels[g][dst], dst));
    }

    let graphs = pending
        .into_iter()
        .zip(&table.labels)
        .map(|(lists, labels)| {
            let adjacency = lists
                .into_iter()
                .map(|mut list| {
                    list.sort_unstable();
                    list.into_iter().map(|(_, _, u)| u).collect()
                })
                .collect();
            Graph::new(labels.clone(), adjacency, true)
        })
        .collect::<Result<Vec<_>>>()?;
    GraphDataset::new(graphs, table.classes, table.alphabet)
}

/// Writes a dataset in the temporal CSV format. Graph ids are dataset
/// indices, node ids are local ids and the order key of a neighbor is its
/// position in the adjacency list.
///
/// Reparsing reproduces the dataset exactly when its alphabet ids follow
/// first appearance in graph/node order, as parsed datasets always do.
pub fn write_temporal_edge_list(
    dataset: &GraphDataset,
    edges: impl AsRef<Path>,
    node_labels: impl AsRef<Path>,
    graph_classes: Option<&Path>,
) -> Result<()> {
    let mut edge_text = String::new();
    let mut label_text = String::new();
    let mut class_text = String::new();
    for (g, graph) in dataset.graphs.iter().enumerate() {
        let _ = writeln!(class_text, "{g},{}", dataset.classes[g]);
        for v in 0..graph.node_count() {
            let label = graph.label(v);
            let name = dataset
                .alphabet
                .name(label)
                .map(str::to_owned)
                .unwrap_or_else(|| label.0.to_string());
            let _ = writeln!(label_text, "{g},{v},{name}");
            for (rank, &u) in graph.neighbors(v).iter().enumerate() {
                let _ = writeln!(edge_text, "{g},{v},{u},{rank}");
            }
        }
    }
    let write = |path: &Path, text: &str| fs::write(path, text).map_err(|e| Error::io(path, e));
    write(edges.as_ref(), &edge_text)?;
    write(node_labels.as_ref(), &label_text)?;
    if let Some(path) = graph_classes {
        write(path, &class_text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn files(edges: &str, labels: &str) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let e = dir.path().join("edges.csv");
        let l = dir.path().join("labels.csv");
        fs::write(&e, edges).unwrap();
        fs::write(&l, labels).unwrap();
        (dir, e, l)
    }

    #[test]
    fn sorts_by_order_key() {
        let (_d, e, l) = files("0,0,1,3\n0,0,2,1\n", "0,0,A\n0,1,B\n0,2,C\n");
        let ds = parse_temporal_edge_list(&e, &l, None).unwrap();
        let g = &ds.graphs[0];
        let names: Vec<_> = g
            .neighbors(0)
            .iter()
            .map(|&u| ds.alphabet.name(g.label(u)).unwrap())
            .collect();
        assert_eq!(names, ["C", "B"]);
    }

    #[test]
    fn equal_keys_break_ties_by_label_then_node() {
        // label X is interned before Y, so X < Y
        let (_d, e, l) = files("0,0,3,5\n0,0,2,5\n0,0,1,5\n", "0,0,R\n0,1,X\n0,2,Y\n0,3,X\n");
        let ds = parse_temporal_edge_list(&e, &l, None).unwrap();
        assert_eq!(ds.graphs[0].neighbors(0), &[1, 3, 2]);
    }

    #[test]
    fn ordered_example_neighbors_in_alphabetical_order() {
        let names = ["A", "B", "C", "D", "E", "F", "G", "H"];
        let labels: String = names.iter().enumerate().map(|(i, n)| format!("0,{i},{n}\n")).collect();
        // out-edges in scrambled file order, keyed by the neighbor's letter
        let edges = [(0, 6), (0, 3), (0, 1), (0, 2), (3, 6), (1, 5), (1, 4), (2, 7)];
        let body: String = edges.iter().map(|&(s, d)| format!("0,{s},{d},{}\n", d)).collect();
        let (_d, e, l) = files(&body, &labels);
        let ds = parse_temporal_edge_list(&e, &l, None).unwrap();
        let g = &ds.graphs[0];
        let order: Vec<_> = g
            .neighbors(0)
            .iter()
            .map(|&u| ds.alphabet.name(g.label(u)).unwrap())
            .collect();
        assert_eq!(order, ["B", "C", "D", "G"]);
    }

    #[test]
    fn malformed_duplicate_and_unlabeled_are_errors() {
        let (_d, e, l) = files("0,0,1\n", "0,0,A\n0,1,B\n");
        assert!(matches!(
            parse_temporal_edge_list(&e, &l, None),
            Err(Error::Parse { line: 1, .. })
        ));
        let (_d, e, l) = files("0,0,1,1\n0,0,1,2\n", "0,0,A\n0,1,B\n");
        assert!(matches!(
            parse_temporal_edge_list(&e, &l, None),
            Err(Error::Parse { line: 2, .. })
        ));
        let (_d, e, l) = files("0,0,5,1\n", "0,0,A\n0,1,B\n");
        assert!(matches!(
            parse_temporal_edge_list(&e, &l, None),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn header_comments_and_raw_ids() {
        let (d, e, l) = files(
            "graph_id,src,dst,order_key\n# note\n10,7,3,1\n\n",
            "graph_id,node,label\n10,3,B\n10,7,A\n4,0,A\n",
        );
        let c = d.path().join("classes.csv");
        fs::write(&c, "4,1\n10,2\n").unwrap();
        let ds = parse_temporal_edge_list(&e, &l, Some(&c)).unwrap();
        assert_eq!(ds.classes, vec![1, 2]);
        assert_eq!(ds.graphs[0].node_count(), 1);
        // raw node 3 -> local 0, raw node 7 -> local 1
        assert_eq!(ds.graphs[1].adjacency(), &[vec![], vec![0]]);
    }
}
