//! Convolutional graph kernels built from ordered-neighborhood traversals.
//!
//! Each node of a graph is unfolded into a string of labels by a traversal
//! that respects the order of its adjacency lists. Strings are compared by
//! their k-gram spectra, and a graph is represented by the sum of its node
//! representations. Explicit k-gram vectors or Tensor-Sketch summaries are
//! maintained incrementally, so node strings are never materialized.

pub mod classifier;
pub mod error;
pub mod export;
pub mod feature;
pub mod fixtures;
pub mod generate;
pub mod graph;
pub mod hash;
pub mod kgram;
pub mod oracle;
pub mod sketch;
pub mod stream;
pub mod traversal;

pub use error::{Error, Result};
pub use feature::{
    error_bound, exact_pairwise_kernel, feature_maps, gram_from_maps, gram_matrix, graph_feature_map, FeatureConfig,
    FeatureMap, FeatureMatrix, FeatureVector, Mode,
};
pub use graph::temporal::{parse_temporal_edge_list, write_temporal_edge_list, NodeTable};
pub use graph::tu::{parse_benchmark_dataset, ParseOptions};
pub use graph::{shuffle_neighborhoods, Alphabet, Graph, GraphDataset, Label};
pub use kgram::{count_kgrams, exact_base_kernel, KGramVector, KernelKind, StringSummary};
pub use sketch::{suggest_sketch_size, CombinedSketch, CountSketch, SketchBudget, TensorSketch};
pub use traversal::{run_csgt, wl_relabel, wl_relabel_dataset, TraversalKind};
