//! Explicit graph feature maps.
//!
//! Every node string `S_v` is represented by its k-gram vector `φ(S_v)`; the
//! graph map is `Φ(G) = Σ_v φ'(S_v)` where `φ'` applies the base kernel's own
//! feature map:
//!
//! * cosine: `φ / |φ|` (zero vectors stay zero);
//! * polynomial with `c > 0`: one extra coordinate of value `√c`;
//! * degree `p > 1`: the `p`-fold tensor power.
//!
//! Then `<Φ(G), Φ(H)> = Σ_{u ∈ G, v ∈ H} κ(S_u, S_v)`. In exact mode the
//! tensor power is never materialized; maps of degree `p > 1` keep per-node
//! vectors and are compared pairwise. In sketched mode node strings are
//! summarized with Tensor-Sketch payloads and the graph map is a dense
//! `rows x width` array.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset, Label};
use crate::kgram::{check_kernel_params, count_kgrams, exact_base_kernel, ExactSpace, KGramVector, KernelKind};
use crate::sketch::{CombinedSketch, Convolver, SketchBudget, SketchSpace, TensorSketch, DEFAULT_ROWS};
use crate::traversal::{
    explicit_strings, run_csgt, wl_relabel_dataset, SummaryCombiner, TraversalKind, WlRelabeler, DEFAULT_LENGTH_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Sketched { width: usize, rows: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub traversal: TraversalKind,
    /// Traversal depth.
    pub h: usize,
    /// k-gram length.
    pub k: usize,
    pub kernel: KernelKind,
    /// Degree of the base kernel.
    pub p: u32,
    /// Offset of the polynomial kernel.
    pub c: f64,
    pub mode: Mode,
    /// Apply one round of order-aware WL relabeling before the traversal
    /// (dataset-level; see [`feature_maps`]).
    pub relabel: bool,
    /// In sketched cosine mode, normalize with exact node norms (tracked
    /// alongside the sketches) instead of sketch estimates.
    pub exact_norms: bool,
    /// Token cap for explicit-string oracles.
    pub length_cap: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            traversal: TraversalKind::Bfs,
            h: 2,
            k: 2,
            kernel: KernelKind::Poly,
            p: 1,
            c: 0.0,
            mode: Mode::Exact,
            relabel: false,
            exact_norms: false,
            length_cap: DEFAULT_LENGTH_CAP,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::ZeroK);
        }
        check_kernel_params(self.kernel, self.p, self.c)?;
        if let Mode::Sketched { width, rows, seed } = self.mode {
            SketchSpace::new(width, rows, seed, self.p)?;
        }
        Ok(())
    }

    /// Sketched mode with the default row count.
    pub fn sketched(mut self, width: usize, seed: u64) -> Self {
        self.mode = Mode::Sketched {
            width,
            rows: DEFAULT_ROWS,
            seed,
        };
        self
    }

    /// Applies a kernel preset written as `<kernel>[-rlb]-<p>`, e.g.
    /// `poly-rlb-1` (polynomial, relabeled, p = 1) or `cosine-2`.
    pub fn apply_preset(&mut self, preset: &str) -> Result<()> {
        let bad = || Error::InvalidConfig(format!("unknown preset {preset:?}, expected e.g. poly-rlb-1"));
        let parts: Vec<&str> = preset.split('-').collect();
        let (kernel, relabel, degree) = match parts.as_slice() {
            [kernel, degree] => (kernel, false, degree),
            [kernel, "rlb", degree] => (kernel, true, degree),
            _ => return Err(bad()),
        };
        self.kernel = kernel.parse().map_err(|_| bad())?;
        self.relabel = relabel;
        self.p = degree.parse().map_err(|_| bad())?;
        if self.kernel == KernelKind::Cosine {
            self.c = 0.0;
        }
        Ok(())
    }

    pub(crate) fn sketch_space(&self) -> Option<SketchSpace> {
        match self.mode {
            Mode::Exact => None,
            Mode::Sketched { width, rows, seed } => Some(SketchSpace {
                width,
                rows,
                seed,
                degree: self.p,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureVector {
    /// Exact map of degree 1, indexed by k-gram (plus the bias token).
    Sparse(KGramVector),
    /// Exact map of degree `p > 1`: per-node base vectors, compared pairwise.
    Nodes(Vec<KGramVector>),
    /// Sketched map.
    Dense(CombinedSketch),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub graph: usize,
    pub vector: FeatureVector,
    config: FeatureConfig,
}

impl FeatureMap {
    pub(crate) fn from_parts(graph: usize, vector: FeatureVector, config: FeatureConfig) -> Self {
        Self { graph, vector, config }
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Kernel value `<Φ(G), Φ(H)>`. Sketched maps use the median over rows.
    pub fn dot(&self, other: &FeatureMap) -> Result<f64> {
        if self.config != other.config {
            return Err(Error::MixedConfigs);
        }
        match (&self.vector, &other.vector) {
            (FeatureVector::Sparse(x), FeatureVector::Sparse(y)) => Ok(x.dot(y)),
            (FeatureVector::Nodes(xs), FeatureVector::Nodes(ys)) => {
                let p = self.config.p as i32;
                Ok(xs
                    .iter()
                    .map(|x| ys.iter().map(|y| x.dot(y).powi(p)).sum::<f64>())
                    .sum())
            }
            (FeatureVector::Dense(x), FeatureVector::Dense(y)) => x.dot(y),
            _ => Err(Error::MixedConfigs),
        }
    }
}

fn canonical_order(a: &KGramVector, b: &KGramVector) -> std::cmp::Ordering {
    let mut x = a.iter();
    let mut y = b.iter();
    loop {
        match (x.next(), y.next()) {
            (None, None) => return std::cmp::Ordering::Equal,
            (None, Some(_)) => return std::cmp::Ordering::Less,
            (Some(_), None) => return std::cmp::Ordering::Greater,
            (Some((ga, wa)), Some((gb, wb))) => {
                let o = ga.cmp(gb).then(wa.total_cmp(&wb));
                if o.is_ne() {
                    return o;
                }
            }
        }
    }
}

/// `φ'` of a node in exact mode.
fn exact_node_feature(phi: &KGramVector, config: &FeatureConfig) -> KGramVector {
    let mut out = match config.kernel {
        KernelKind::Cosine => {
            let norm = phi.norm();
            if norm == 0.0 {
                KGramVector::new(phi.k())
            } else {
                phi.scaled(1.0 / norm)
            }
        }
        KernelKind::Poly => phi.clone(),
    };
    if config.c > 0.0 {
        out.add(&[Label::BIAS], config.c.sqrt());
    }
    out
}

/// Finalized sketch of `φ'` for one node, or `None` when the node
/// contributes nothing. `norm` is the norm used for cosine normalization.
pub(crate) fn sketched_node_feature(
    payload: &TensorSketch,
    norm: f64,
    config: &FeatureConfig,
    convolver: &Convolver,
) -> Result<Option<CombinedSketch>> {
    if config.kernel == KernelKind::Cosine && norm == 0.0 {
        return Ok(None);
    }
    let mut combined = if config.c > 0.0 {
        let mut with_bias = payload.clone();
        with_bias.add(&[Label::BIAS], config.c.sqrt());
        with_bias.finalize(convolver)?
    } else {
        payload.finalize(convolver)?
    };
    if config.kernel == KernelKind::Cosine {
        combined.scale(norm.powi(-(config.p as i32)));
    }
    Ok(Some(combined))
}

/// Sums per-node sketches in a canonical order (by content), so that the
/// floating-point result does not depend on node numbering.
pub(crate) fn sum_node_sketches(
    space: &SketchSpace,
    nodes: impl IntoIterator<Item = Result<Option<CombinedSketch>>>,
) -> Result<CombinedSketch> {
    let mut parts = Vec::new();
    for node in nodes {
        if let Some(sketch) = node? {
            parts.push(sketch);
        }
    }
    parts.sort_by(|a, b| {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut total = CombinedSketch::zeros(space.width, space.rows, space.seed, space.degree);
    for part in &parts {
        total.merge(part)?;
    }
    Ok(total)
}

/// Feature map of one graph as given. Relabeling is a dataset-level step so
/// that all graphs share one dictionary; `config.relabel` is applied by
/// [`feature_maps`], not here.
pub fn graph_feature_map(graph: &Graph, config: &FeatureConfig) -> Result<FeatureMap> {
    config.validate()?;
    let vector = match config.sketch_space() {
        None => {
            let space = ExactSpace { k: config.k };
            let combiner = SummaryCombiner::new(&space, config.k)?;
            let finals = run_csgt(graph, config.traversal, config.h, &combiner, |_, _| {})?;
            // canonical node order keeps floating-point sums independent of numbering
            let mut nodes: Vec<KGramVector> = finals.iter().map(|s| exact_node_feature(&s.payload, config)).collect();
            nodes.sort_by(canonical_order);
            if config.p == 1 {
                let mut sum = KGramVector::new(config.k);
                for node in nodes {
                    sum.add_vector(&node);
                }
                FeatureVector::Sparse(sum)
            } else {
                FeatureVector::Nodes(nodes)
            }
        }
        Some(space) => {
            let convolver = Convolver::new(space.width)?;
            let total = if config.exact_norms && config.kernel == KernelKind::Cosine {
                let pair = (space, ExactSpace { k: config.k });
                let combiner = SummaryCombiner::new(&pair, config.k)?;
                let finals = run_csgt(graph, config.traversal, config.h, &combiner, |_, _| {})?;
                sum_node_sketches(
                    &space,
                    finals
                        .iter()
                        .map(|s| sketched_node_feature(&s.payload.0, s.payload.1.norm(), config, &convolver)),
                )?
            } else {
                let combiner = SummaryCombiner::new(&space, config.k)?;
                let finals = run_csgt(graph, config.traversal, config.h, &combiner, |_, _| {})?;
                sum_node_sketches(
                    &space,
                    finals
                        .iter()
                        .map(|s| sketched_node_feature(&s.payload, s.payload.norm(), config, &convolver)),
                )?
            };
            FeatureVector::Dense(total)
        }
    };
    Ok(FeatureMap {
        graph: 0,
        vector,
        config: config.clone(),
    })
}

/// Feature maps of every graph of a dataset, relabeling first when the
/// configuration asks for it. Graphs are processed in parallel; the result
/// does not depend on scheduling.
pub fn feature_maps(dataset: &GraphDataset, config: &FeatureConfig) -> Result<Vec<FeatureMap>> {
    config.validate()?;
    let relabeled;
    let dataset = if config.relabel {
        relabeled = wl_relabel_dataset(dataset);
        &relabeled
    } else {
        dataset
    };
    dataset
        .graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let mut map = graph_feature_map(g, config)?;
            map.graph = i;
            Ok(map)
        })
        .collect()
}

/// `K[i][j] = <Φ(G_i), Φ(G_j)>`, symmetric by construction.
pub fn gram_from_maps(maps: &[FeatureMap]) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = maps.first() {
        if maps.iter().any(|m| m.config != first.config) {
            return Err(Error::MixedConfigs);
        }
    }
    let n = maps.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| maps[i].dot(&maps[j])).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut k = vec![vec![0.0; n]; n];
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, value) in row.into_iter().enumerate() {
            k[i][i + offset] = value;
            k[i + offset][i] = value;
        }
    }
    Ok(k)
}

pub fn gram_matrix(dataset: &GraphDataset, config: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    gram_from_maps(&feature_maps(dataset, config)?)
}

/// Brute-force convolutional kernel: explicit node strings, explicit k-gram
/// counts and the base kernel summed over all node pairs. Quadratic in the
/// node counts; meant as an oracle on small graphs.
pub fn exact_pairwise_kernel(g: &Graph, h: &Graph, config: &FeatureConfig) -> Result<f64> {
    check_kernel_params(config.kernel, config.p, config.c)?;
    let (g, h) = if config.relabel {
        let mut relabeler = WlRelabeler::new();
        (relabeler.relabel_with(g, None), relabeler.relabel_with(h, None))
    } else {
        (g.clone(), h.clone())
    };
    let vectors = |graph: &Graph| -> Result<Vec<KGramVector>> {
        explicit_strings(graph, config.traversal, config.h, config.length_cap)?
            .finals
            .iter()
            .map(|s| count_kgrams(s, config.k))
            .collect()
    };
    let xs = vectors(&g)?;
    let ys = vectors(&h)?;
    let mut total = 0.0;
    for x in &xs {
        for y in &ys {
            total += exact_base_kernel(x, y, config.kernel, config.p, config.c)?;
        }
    }
    Ok(total)
}

/// Additive error guaranteed for one sketched kernel value:
/// `ε (K + R^{2p} α T_{<α})`, where `T_{<α}` counts node pairs whose
/// base-kernel cosine falls below `α`.
pub fn error_bound(budget: &SketchBudget, kernel_value: f64, pairs_below_alpha: f64) -> f64 {
    budget.epsilon
        * (kernel_value + budget.norm_bound.powi(2 * budget.degree as i32) * budget.alpha * pairs_below_alpha)
}

/// Feature maps as rows of a sparse matrix with a shared column space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Column k-grams for exact maps; empty for sketched maps.
    pub vocabulary: Vec<Vec<Label>>,
}

impl FeatureMatrix {
    /// Exact maps are indexed by the sorted union of their k-grams; sketched
    /// maps by position `row * width + bucket`. Exact maps of degree `p > 1`
    /// have no materialized coordinates and are rejected.
    pub fn from_maps(maps: &[FeatureMap]) -> Result<Self> {
        if let Some(first) = maps.first() {
            if maps.iter().any(|m| m.config != first.config) {
                return Err(Error::MixedConfigs);
            }
        }
        let mut vocab: BTreeMap<Vec<Label>, usize> = BTreeMap::new();
        let mut dim = 0;
        for map in maps {
            match &map.vector {
                FeatureVector::Sparse(v) => {
                    for (gram, _) in v.iter() {
                        vocab.entry(gram.to_vec()).or_insert(0);
                    }
                }
                FeatureVector::Dense(s) => dim = s.data().len(),
                FeatureVector::Nodes(_) => {
                    return Err(Error::InvalidConfig(
                        "exact maps of degree p > 1 have no explicit coordinates; use sketched mode".into(),
                    ))
                }
            }
        }
        for (i, index) in vocab.values_mut().enumerate() {
            *index = i;
        }
        if !vocab.is_empty() {
            dim = vocab.len();
        }
        let rows = maps
            .iter()
            .map(|map| match &map.vector {
                FeatureVector::Sparse(v) => v.iter().map(|(g, w)| (vocab[g], w)).collect(),
                FeatureVector::Dense(s) => s
                    .data()
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(i, &w)| (i, w))
                    .collect(),
                FeatureVector::Nodes(_) => unreachable!("rejected above"),
            })
            .collect();
        Ok(Self {
            dim,
            rows,
            vocabulary: vocab.into_keys().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::ordered_example;
    use crate::graph::shuffle_neighborhoods;

    fn config(k: usize, h: usize) -> FeatureConfig {
        FeatureConfig {
            k,
            h,
            ..FeatureConfig::default()
        }
    }

    #[test]
    fn singleton_graph() {
        let g = Graph::new(vec![Label(0)], vec![vec![]], true).unwrap();
        for h in 0..4 {
            let map = graph_feature_map(&g, &config(1, h)).unwrap();
            let mut expected = KGramVector::new(1);
            expected.add(&[Label(0)], 1.0);
            assert_eq!(map.vector, FeatureVector::Sparse(expected));
            assert_eq!(map.dot(&map).unwrap(), 1.0);
        }
    }

    #[test]
    fn root_contribution_matches_traversal_string() {
        let (g, _) = ordered_example();
        let cfg = config(2, 2);
        let space = ExactSpace { k: 2 };
        let combiner = SummaryCombiner::new(&space, 2).unwrap();
        let finals = run_csgt(&g, TraversalKind::Bfs, 2, &combiner, |_, _| {}).unwrap();
        let (a, b, c, d, e, f, gg, hh) = (0, 1, 2, 3, 4, 5, 6, 7).map_labels();
        let s = [a, b, c, d, gg, e, f, hh, gg];
        assert_eq!(finals[0].payload, count_kgrams(&s, 2).unwrap());
        // and the graph map is the sum over nodes
        let map = graph_feature_map(&g, &cfg).unwrap();
        let FeatureVector::Sparse(phi) = map.vector else {
            panic!()
        };
        let mut sum = KGramVector::new(2);
        for node in &finals {
            sum.add_vector(&node.payload);
        }
        assert_eq!(phi, sum);
    }

    trait MapLabels {
        fn map_labels(self) -> (Label, Label, Label, Label, Label, Label, Label, Label);
    }

    impl MapLabels for (u32, u32, u32, u32, u32, u32, u32, u32) {
        fn map_labels(self) -> (Label, Label, Label, Label, Label, Label, Label, Label) {
            let (a, b, c, d, e, f, g, h) = self;
            (
                Label(a),
                Label(b),
                Label(c),
                Label(d),
                Label(e),
                Label(f),
                Label(g),
                Label(h),
            )
        }
    }

    #[test]
    fn unigrams_ignore_neighbor_order() {
        let (g, _) = ordered_example();
        for traversal in [TraversalKind::Bfs, TraversalKind::Wl] {
            let cfg = FeatureConfig {
                traversal,
                ..config(1, 3)
            };
            let a = graph_feature_map(&g, &cfg).unwrap();
            let b = graph_feature_map(&shuffle_neighborhoods(&g, 5), &cfg).unwrap();
            assert_eq!(a.vector, b.vector);
        }
    }

    #[test]
    fn exact_degree_two_matches_pairwise_oracle() {
        let (g, _) = ordered_example();
        let h = shuffle_neighborhoods(&g, 1);
        for (kernel, c) in [
            (KernelKind::Poly, 0.0),
            (KernelKind::Poly, 2.0),
            (KernelKind::Cosine, 0.0),
        ] {
            for p in 1..=3 {
                let cfg = FeatureConfig {
                    kernel,
                    c,
                    p,
                    ..config(2, 2)
                };
                let mg = graph_feature_map(&g, &cfg).unwrap();
                let mh = graph_feature_map(&h, &cfg).unwrap();
                let fast = mg.dot(&mh).unwrap();
                let oracle = exact_pairwise_kernel(&g, &h, &cfg).unwrap();
                assert!(
                    (fast - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
                    "{kernel:?} p={p} c={c}: {fast} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn pairwise_oracle_edge_cases() {
        let a = Graph::new(vec![Label(0)], vec![vec![]], true).unwrap();
        let b = Graph::new(vec![Label(1)], vec![vec![]], true).unwrap();
        for p in 1..4 {
            let cos = FeatureConfig {
                kernel: KernelKind::Cosine,
                p,
                ..config(1, 1)
            };
            assert_eq!(exact_pairwise_kernel(&a, &a, &cos).unwrap(), 1.0);
            assert_eq!(exact_pairwise_kernel(&a, &b, &config(1, 1)).unwrap(), 0.0);
        }
    }

    #[test]
    fn gram_of_identical_graphs() {
        let (g, alphabet) = ordered_example();
        let ds = GraphDataset::new(vec![g.clone(), g], vec![0, 1], alphabet).unwrap();
        let k = gram_matrix(&ds, &config(2, 2)).unwrap();
        assert_eq!(k[0][0], k[0][1]);
        assert_eq!(k[1][1], k[0][1]);
        assert!(k[0][0] > 0.0);
    }

    #[test]
    fn mixed_configs_are_rejected() {
        let (g, _) = ordered_example();
        let a = graph_feature_map(&g, &config(2, 2)).unwrap();
        let b = graph_feature_map(&g, &config(3, 2)).unwrap();
        assert!(matches!(a.dot(&b), Err(Error::MixedConfigs)));
        assert!(matches!(gram_from_maps(&[a, b]), Err(Error::MixedConfigs)));
    }

    #[test]
    fn sketched_single_node_cosine_is_one() {
        let g = Graph::new(vec![Label(0)], vec![vec![]], true).unwrap();
        for p in 1..=3 {
            let cfg = FeatureConfig {
                kernel: KernelKind::Cosine,
                p,
                ..config(1, 0)
            }
            .sketched(64, 3);
            let m = graph_feature_map(&g, &cfg).unwrap();
            assert!((m.dot(&m).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn error_bound_arithmetic() {
        let budget = SketchBudget {
            graphs: 10,
            max_nodes: 10,
            alpha: 0.1,
            epsilon: 0.5,
            delta: 0.1,
            degree: 1,
            norm_bound: 1.0,
        };
        assert_eq!(error_bound(&budget, 10.0, 100.0), 10.0);
        assert_eq!(error_bound(&budget, 10.0, 0.0), 5.0);
        assert_eq!(error_bound(&SketchBudget { epsilon: 0.0, ..budget }, 10.0, 100.0), 0.0);
    }

    #[test]
    fn presets() {
        let mut cfg = FeatureConfig::default();
        cfg.apply_preset("poly-rlb-1").unwrap();
        assert_eq!((cfg.kernel, cfg.relabel, cfg.p), (KernelKind::Poly, true, 1));
        cfg.apply_preset("cosine-2").unwrap();
        assert_eq!((cfg.kernel, cfg.relabel, cfg.p), (KernelKind::Cosine, false, 2));
        assert!(cfg.apply_preset("poly").is_err());
        assert!(cfg.apply_preset("gauss-1").is_err());
    }

    #[test]
    fn feature_matrix_indexes_vocabulary() {
        let (g, alphabet) = ordered_example();
        let ds = GraphDataset::new(vec![g], vec![1], alphabet).unwrap();
        let maps = feature_maps(&ds, &config(1, 0)).unwrap();
        let m = FeatureMatrix::from_maps(&maps).unwrap();
        assert_eq!(m.dim, 8);
        assert_eq!(m.rows[0], (0..8).map(|i| (i, 1.0)).collect::<Vec<_>>());
        let p2 = FeatureConfig { p: 2, ..config(1, 0) };
        assert!(FeatureMatrix::from_maps(&feature_maps(&ds, &p2).unwrap()).is_err());
    }
}
