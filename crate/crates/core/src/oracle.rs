//! Cross-checks of the summary pipeline against explicit strings.
//!
//! For every graph and parameter combination the node strings are
//! materialized, their k-grams counted directly, and the result compared
//! coordinate by coordinate with the incremental summaries. The number of
//! k-grams created at concatenation junctions is recomputed from string
//! lengths and checked against the `(k - 1)`-per-junction bound.

use std::fmt;

use rayon::prelude::*;

use crate::error::Result;
use crate::graph::{Graph, GraphDataset, Label};
use crate::kgram::{count_kgrams, ExactSpace, KGramVector};
use crate::traversal::{explicit_strings, run_csgt, SummaryCombiner, TraversalKind};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub traversals: Vec<TraversalKind>,
    pub ks: Vec<usize>,
    pub hs: Vec<usize>,
    pub length_cap: usize,
    /// Test hook: perturb one summary coordinate before comparing.
    pub corrupt: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            traversals: vec![TraversalKind::Bfs, TraversalKind::Wl],
            ks: vec![1, 2, 3, 4],
            hs: vec![0, 1, 2, 3],
            length_cap: crate::traversal::DEFAULT_LENGTH_CAP,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleReport {
    pub cases: usize,
    /// Largest absolute coordinate difference between the two pipelines.
    pub max_discrepancy: f64,
    /// Cases whose junction k-gram count differs from the recount.
    pub count_mismatches: usize,
    /// Cases exceeding the `(k - 1)`-per-junction bound.
    pub bound_violations: usize,
    /// Smallest `bound - count` over all cases.
    pub min_bound_slack: u64,
    pub junction_kgrams: u64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.max_discrepancy == 0.0 && self.count_mismatches == 0 && self.bound_violations == 0
    }

    fn absorb(&mut self, other: &OracleReport) {
        if self.cases == 0 {
            self.min_bound_slack = other.min_bound_slack;
        } else if other.cases > 0 {
            self.min_bound_slack = self.min_bound_slack.min(other.min_bound_slack);
        }
        self.cases += other.cases;
        self.max_discrepancy = self.max_discrepancy.max(other.max_discrepancy);
        self.count_mismatches += other.count_mismatches;
        self.bound_violations += other.bound_violations;
        self.junction_kgrams += other.junction_kgrams;
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cases: {}", self.cases)?;
        writeln!(f, "max coordinate discrepancy: {}", self.max_discrepancy)?;
        writeln!(f, "junction k-gram count mismatches: {}", self.count_mismatches)?;
        writeln!(f, "junction bound violations: {}", self.bound_violations)?;
        writeln!(f, "min junction bound slack: {}", self.min_bound_slack)?;
        write!(f, "result: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn grams(len: usize, k: usize) -> u64 {
    (len + 1).saturating_sub(k) as u64
}

fn discrepancy(a: &KGramVector, b: &KGramVector) -> f64 {
    let mut worst: f64 = 0.0;
    for (gram, w) in a.iter() {
        worst = worst.max((w - b.get(gram)).abs());
    }
    for (gram, w) in b.iter() {
        worst = worst.max((w - a.get(gram)).abs());
    }
    worst
}

/// Checks one graph under one parameter combination.
pub fn check_case(
    graph: &Graph,
    kind: TraversalKind,
    k: usize,
    h: usize,
    options: &OracleOptions,
) -> Result<OracleReport> {
    let strings = explicit_strings(graph, kind, h, options.length_cap)?;
    let space = ExactSpace { k };
    let combiner = SummaryCombiner::new(&space, k)?;
    let mut summaries = run_csgt(graph, kind, h, &combiner, |_, _| {})?;
    if options.corrupt {
        if let Some(first) = summaries.first_mut() {
            first.payload.add(&vec![Label(0); k], 1.0);
        }
    }

    let mut report = OracleReport {
        cases: 1,
        ..OracleReport::default()
    };
    for (summary, explicit) in summaries.iter().zip(&strings.finals) {
        let direct = count_kgrams(explicit, k)?;
        report.max_discrepancy = report.max_discrepancy.max(discrepancy(&summary.payload, &direct));
        if summary.boundary.length != explicit.len() as u64 {
            report.count_mismatches += 1;
        }
    }

    // junction k-grams recounted from lengths, and their bound
    let mut recount = 0u64;
    let mut bound = 0u64;
    let keep = (k - 1) as u64;
    for i in 1..=h {
        for v in 0..graph.node_count() {
            let mut parts: Vec<usize> = Vec::with_capacity(graph.neighbors(v).len() + 1);
            if kind == TraversalKind::Wl {
                parts.push(1);
            }
            parts.extend(graph.neighbors(v).iter().map(|&u| strings.iterations[i - 1][u].len()));
            let total: usize = parts.iter().sum();
            recount += grams(total, k) - parts.iter().map(|&p| grams(p, k)).sum::<u64>();
            bound += keep * parts.len().saturating_sub(1) as u64;
            if kind == TraversalKind::Bfs {
                let before: usize = (0..i).map(|j| strings.iterations[j][v].len()).sum();
                let next = strings.iterations[i][v].len();
                recount += grams(before + next, k) - grams(before, k) - grams(next, k);
                bound += keep;
            }
        }
    }
    let counted = combiner.step_kgrams() + combiner.append_kgrams();
    report.junction_kgrams = counted;
    if counted != recount {
        report.count_mismatches += 1;
    }
    if counted > bound {
        report.bound_violations += 1;
    }
    report.min_bound_slack = bound.saturating_sub(counted);
    Ok(report)
}

/// Runs every combination of the options over every graph.
pub fn oracle_check(dataset: &GraphDataset, options: &OracleOptions) -> Result<OracleReport> {
    let reports: Vec<OracleReport> = dataset
        .graphs
        .par_iter()
        .map(|g| {
            let mut report = OracleReport::default();
            for &kind in &options.traversals {
                for &k in &options.ks {
                    for &h in &options.hs {
                        report.absorb(&check_case(g, kind, k, h, options)?);
                    }
                }
            }
            Ok(report)
        })
        .collect::<Result<_>>()?;
    let mut total = OracleReport::default();
    for r in &reports {
        total.absorb(r);
    }
    Ok(total)
}
