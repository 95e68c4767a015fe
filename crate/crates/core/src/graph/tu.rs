//! Reader for the plain-text graph classification benchmark layout:
//! `DS_A.txt`, `DS_graph_indicator.txt`, `DS_graph_labels.txt`,
//! `DS_node_labels.txt` and an optional `DS_edge_order.txt`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Alphabet, Graph, GraphDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Add the reverse of every edge that lacks one.
    pub undirected: bool,
}

/// Non-blank lines of a file with their 1-based line numbers.
pub(crate) fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| (i, l.to_owned()))
        .collect())
}

fn parse_int<T: std::str::FromStr>(path: &Path, line: usize, field: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("expected an integer, found {field:?}")))
}

fn dataset_prefix(dir: &Path) -> Result<String> {
    if let Some(name) = dir.file_name().and_then(|n| n.to_str()) {
        if dir.join(format!("{name}_A.txt")).is_file() {
            return Ok(name.to_owned());
        }
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(prefix) = entry.file_name().to_str().and_then(|n| n.strip_suffix("_A.txt")) {
            found.push(prefix.to_owned());
        }
    }
    found.sort();
    found
        .into_iter()
        .next()
        .ok_or_else(|| Error::MissingFile(dir.join("DS_A.txt")))
}

/// Parses a benchmark dataset directory.
///
/// Node ids are renumbered per graph from 0 in file order. Each adjacency list
/// is ordered by the edge-order rank when `DS_edge_order.txt` exists and by
/// edge-file line order otherwise; repeated edges keep their first position.
pub fn parse_benchmark_dataset(dir: impl AsRef<Path>, options: ParseOptions) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    let prefix = dataset_prefix(dir)?;
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{prefix}_{suffix}.txt")) };

    let indicator_path = file("graph_indicator");
    let indicator_lines = read_lines(&indicator_path)?;
    let graph_labels_path = file("graph_labels");
    let graph_label_lines = read_lines(&graph_labels_path)?;
    let node_labels_path = file("node_labels");
    let node_label_lines = read_lines(&node_labels_path)?;
    let edges_path = file("A");
    let edge_lines = read_lines(&edges_path)?;
    let order_path = file("edge_order");
    let order_lines = if order_path.is_file() {
        Some(read_lines(&order_path)?)
    } else {
        None
    };

    let graph_count = graph_label_lines.len();
    let classes = graph_label_lines
        .iter()
        .map(|(line, text)| parse_int::<i64>(&graph_labels_path, *line, text))
        .collect::<Result<Vec<_>>>()?;

    // node -> (graph, local id)
    let mut membership = Vec::with_capacity(indicator_lines.len());
    let mut sizes = vec![0usize; graph_count];
    for (line, text) in &indicator_lines {
        let g: usize = parse_int(&indicator_path, *line, text)?;
        if g == 0 || g > graph_count {
            return Err(Error::parse(
                &indicator_path,
                *line,
                format!("graph id {g} outside 1..={graph_count}"),
            ));
        }
        membership.push((g - 1, sizes[g - 1]));
        sizes[g - 1] += 1;
    }
    let node_count = membership.len();

    if node_label_lines.len() != node_count {
        let line = node_label_lines
            .get(node_count)
            .or(node_label_lines.last())
            .map_or(1, |(l, _)| *l);
        return Err(Error::parse(
            &node_labels_path,
            line,
            format!(
                "{} node labels but the graph indicator lists {node_count} nodes",
                node_label_lines.len()
            ),
        ));
    }
    let mut alphabet = Alphabet::new();
    let mut labels: Vec<Vec<_>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    for ((g, _), (_, text)) in membership.iter().zip(&node_label_lines) {
        labels[*g].push(alphabet.intern(text));
    }

    if let Some(order) = &order_lines {
        if order.len() != edge_lines.len() {
            let line = order.last().map_or(1, |(l, _)| *l);
            return Err(Error::parse(
                &order_path,
                line,
                format!("{} ranks for {} edges", order.len(), edge_lines.len()),
            ));
        }
    }

    // per graph, per local node: (rank, sequence, neighbor)
    let mut pending: Vec<Vec<Vec<(i64, usize, usize)>>> = sizes.iter().map(|&s| vec![Vec::new(); s]).collect();
    for (seq, (line, text)) in edge_lines.iter().enumerate() {
        let mut fields = text.split(',');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(
                &edges_path,
                *line,
                format!("expected \"i, j\", found {text:?}"),
            ));
        };
        let i: usize = parse_int(&edges_path, *line, a)?;
        let j: usize = parse_int(&edges_path, *line, b)?;
        for x in [i, j] {
            if x == 0 || x > node_count {
                return Err(Error::parse(
                    &edges_path,
                    *line,
                    format!("node index {x} outside 1..={node_count}"),
                ));
            }
        }
        let (gi, li) = membership[i - 1];
        let (gj, lj) = membership[j - 1];
        if gi != gj {
            return Err(Error::parse(
                &edges_path,
                *line,
                format!("edge joins graphs {} and {}", gi + 1, gj + 1),
            ));
        }
        let rank = match &order_lines {
            Some(order) => {
                let (oline, otext) = &order[seq];
                parse_int(&order_path, *oline, otext)?
            }
            None => seq as i64,
        };
        pending[gi][li].push((rank, 2 * seq, lj));
        if options.undirected {
            pending[gi][lj].push((rank, 2 * seq + 1, li));
        }
    }

    let mut graphs = Vec::with_capacity(graph_count);
    for (g, (node_labels, lists)) in labels.into_iter().zip(pending).enumerate() {
        let adjacency = lists
            .into_iter()
            .map(|mut entries| {
                entries.sort_unstable();
                let mut seen = std::collections::HashSet::new();
                entries
                    .into_iter()
                    .filter_map(|(_, _, u)| seen.insert(u).then_some(u))
                    .collect()
            })
            .collect();
        let graph = Graph::new(node_labels, adjacency, !options.undirected)
            .map_err(|e| Error::InvalidGraph(format!("graph {}: {e}", g + 1)))?;
        graphs.push(graph);
    }
    GraphDataset::new(graphs, classes, alphabet)
}
