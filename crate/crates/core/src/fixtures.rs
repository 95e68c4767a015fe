//! Small hand-built graphs shared by tests, examples and the CLI.

use crate::graph::{Alphabet, Graph, GraphDataset};

/// The eight-node example graph with neighbors in alphabetical order:
/// `A->B,C,D,G`, `B->E,F`, `C->H`, `D->G`. Node ids follow the letters, so
/// node 0 is the root labeled `A`.
pub fn ordered_example() -> (Graph, Alphabet) {
    let mut alphabet = Alphabet::new();
    let labels = ["A", "B", "C", "D", "E", "F", "G", "H"]
        .iter()
        .map(|n| alphabet.intern(n))
        .collect();
    let adjacency = vec![
        vec![1, 2, 3, 6],
        vec![4, 5],
        vec![7],
        vec![6],
        vec![],
        vec![],
        vec![],
        vec![],
    ];
    let graph = Graph::new(labels, adjacency, true).expect("fixture is valid");
    (graph, alphabet)
}

/// [`ordered_example`] as a one-graph dataset of class 1.
pub fn ordered_example_dataset() -> GraphDataset {
    let (graph, alphabet) = ordered_example();
    GraphDataset::new(vec![graph], vec![1], alphabet).expect("fixture is valid")
}
