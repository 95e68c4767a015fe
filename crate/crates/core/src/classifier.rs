//! Linear SVM over explicit feature maps.
//!
//! Each binary machine minimizes `1/2 |w|^2 + C Σ_i hinge(y_i <w, x_i>)` by
//! dual coordinate descent: epochs visit the examples in a seeded random
//! order and update one dual variable at a time, stopping once the projected
//! gradient spread falls below a tolerance. The bias is an extra constant
//! feature. Several classes are handled one-vs-rest.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feature::{feature_maps, FeatureConfig, FeatureMatrix};
use crate::graph::GraphDataset;
use crate::hash::mix64;

pub type SparseRow = Vec<(usize, f64)>;

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_TOLERANCE: f64 = 0.1;
pub const DEFAULT_C_GRID: [f64; 3] = [0.1, 1.0, 10.0];
const MODEL_HEADER: &str = "kong-linear-model 1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub c: f64,
    /// Upper bound on passes over the data.
    pub epochs: usize,
    /// Stop once the spread of projected gradients drops to this value.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: DEFAULT_EPOCHS,
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
        }
    }
}

/// One binary machine: positive class against the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    pub positive: i64,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Machine {
    pub fn decision(&self, x: &[(usize, f64)]) -> f64 {
        self.bias
            + x.iter()
                .filter(|(i, _)| *i < self.weights.len())
                .map(|&(i, v)| self.weights[i] * v)
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub dim: usize,
    pub c: f64,
    /// Sorted class labels.
    pub classes: Vec<i64>,
    /// Most frequent training class (smallest label on ties); decides ties.
    pub majority: i64,
    /// One machine for two classes (positive = the larger label), otherwise
    /// one per class.
    pub machines: Vec<Machine>,
}

impl LinearModel {
    pub fn predict(&self, x: &[(usize, f64)]) -> i64 {
        if let [m] = self.machines.as_slice() {
            let score = m.decision(x);
            return if score > 0.0 {
                m.positive
            } else if score < 0.0 {
                self.classes[0]
            } else {
                self.majority
            };
        }
        let scores: Vec<f64> = self.machines.iter().map(|m| m.decision(x)).collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<i64> = self
            .machines
            .iter()
            .zip(&scores)
            .filter(|(_, &s)| s == best)
            .map(|(m, _)| m.positive)
            .collect();
        if tied.len() == 1 {
            tied[0]
        } else if tied.contains(&self.majority) {
            self.majority
        } else {
            tied[0]
        }
    }

    pub fn accuracy(&self, x: &[SparseRow], y: &[i64]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        let hits = x
            .iter()
            .zip(y)
            .filter(|(row, &label)| self.predict(row) == label)
            .count();
        hits as f64 / x.len() as f64
    }

    /// Text format: header, `dim`, `C`, `classes`, `majority`, then per
    /// machine a `machine <positive> <bias>` line followed by the weights.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "dim {}", self.dim);
        let _ = writeln!(out, "C {}", self.c);
        let classes: Vec<String> = self.classes.iter().map(i64::to_string).collect();
        let _ = writeln!(out, "classes {}", classes.join(" "));
        let _ = writeln!(out, "majority {}", self.majority);
        for m in &self.machines {
            let _ = writeln!(out, "machine {} {}", m.positive, m.bias);
            let weights: Vec<String> = m.weights.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{}", weights.join(" "));
        }
        out
    }

    pub fn from_text(text: &str, source: &Path) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::parse(source, line, msg.to_string());
        let lines: Vec<&str> = text.lines().collect();
        if lines.first().map(|l| l.trim()) != Some(MODEL_HEADER) {
            return Err(bad(1, "not a linear model file of a supported version"));
        }
        let field = |i: usize, key: &str| -> Result<&str> {
            lines
                .get(i)
                .and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix(' '))
                .ok_or_else(|| bad(i + 1, &format!("expected {key:?}")))
        };
        let num = |i: usize, s: &str| -> Result<f64> { s.parse().map_err(|_| bad(i + 1, "expected a number")) };
        let int = |i: usize, s: &str| -> Result<i64> { s.parse().map_err(|_| bad(i + 1, "expected an integer")) };
        let dim = int(1, field(1, "dim")?)? as usize;
        let c = num(2, field(2, "C")?)?;
        let classes = field(3, "classes")?
            .split_whitespace()
            .map(|s| int(3, s))
            .collect::<Result<Vec<_>>>()?;
        let majority = int(4, field(4, "majority")?)?;
        let mut machines = Vec::new();
        let mut i = 5;
        while i < lines.len() {
            let head: Vec<&str> = field(i, "machine")?.split_whitespace().collect();
            if head.len() != 2 {
                return Err(bad(i + 1, "expected `machine <class> <bias>`"));
            }
            let positive = int(i, head[0])?;
            let bias = num(i, head[1])?;
            let weights = lines
                .get(i + 1)
                .ok_or_else(|| bad(i + 2, "missing weights"))?
                .split_whitespace()
                .map(|s| num(i + 1, s))
                .collect::<Result<Vec<_>>>()?;
            if weights.len() != dim {
                return Err(bad(i + 2, &format!("expected {dim} weights, found {}", weights.len())));
            }
            machines.push(Machine {
                positive,
                weights,
                bias,
            });
            i += 2;
        }
        let expected = if classes.len() == 2 { 1 } else { classes.len() };
        if classes.len() < 2 || machines.len() != expected {
            return Err(Error::Model(format!(
                "{} classes need {expected} machines, found {}",
                classes.len(),
                machines.len()
            )));
        }
        Ok(Self {
            dim,
            c,
            classes,
            majority,
            machines,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// Dual coordinate descent for one binary problem with labels `±1`.
fn train_binary(
    x: &[SparseRow],
    y: &[f64],
    dim: usize,
    options: &TrainOptions,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64) {
    let n = x.len();
    let upper = options.c;
    // bias lives at index `dim`
    let mut w = vec![0.0; dim + 1];
    if upper <= 0.0 || n == 0 {
        w.pop();
        return (w, 0.0);
    }
    let diag: Vec<f64> = x
        .iter()
        .map(|row| 1.0 + row.iter().map(|(_, v)| v * v).sum::<f64>())
        .collect();
    let mut alpha = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..options.epochs {
        order.shuffle(rng);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in &order {
            let dot = w[dim] + x[i].iter().map(|&(j, v)| w[j] * v).sum::<f64>();
            let g = y[i] * dot - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == upper {
                g.max(0.0)
            } else {
                g
            };
            lo = lo.min(pg);
            hi = hi.max(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, upper);
                let delta = (alpha[i] - old) * y[i];
                for &(j, v) in &x[i] {
                    w[j] += delta * v;
                }
                w[dim] += delta;
            }
        }
        if hi - lo <= options.tolerance {
            break;
        }
    }
    let bias = w.pop().expect("bias slot");
    (w, bias)
}

/// Trains a one-vs-rest linear SVM. Feature indices at or beyond `dim` are
/// rejected. `C <= 0` yields the zero model, which predicts the majority
/// class.
pub fn train(x: &[SparseRow], y: &[i64], dim: usize, options: &TrainOptions) -> Result<LinearModel> {
    if x.len() != y.len() {
        return Err(Error::Model(format!("{} feature rows but {} labels", x.len(), y.len())));
    }
    if let Some(&(j, _)) = x.iter().flatten().find(|(j, _)| *j >= dim) {
        return Err(Error::Model(format!("feature index {j} outside dimension {dim}")));
    }
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let majority = classes
        .iter()
        .copied()
        .max_by_key(|&c| (y.iter().filter(|&&l| l == c).count(), std::cmp::Reverse(c)))
        .expect("at least two classes");
    let positives: Vec<i64> = if classes.len() == 2 {
        vec![classes[1]]
    } else {
        classes.clone()
    };
    let machines = positives
        .iter()
        .enumerate()
        .map(|(m, &positive)| {
            let targets: Vec<f64> = y.iter().map(|&l| if l == positive { 1.0 } else { -1.0 }).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(options.seed ^ mix64(m as u64)));
            let (weights, bias) = train_binary(x, &targets, dim, options, &mut rng);
            Machine {
                positive,
                weights,
                bias,
            }
        })
        .collect();
    Ok(LinearModel {
        dim,
        c: options.c,
        classes,
        majority,
        machines,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    pub repetitions: usize,
    pub c_grid: Vec<f64>,
    /// Folds of the inner split that selects `C` on each training part.
    pub inner_folds: usize,
    pub epochs: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 10,
            repetitions: 30,
            c_grid: DEFAULT_C_GRID.to_vec(),
            inner_folds: 3,
            epochs: DEFAULT_EPOCHS,
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Mean test accuracy of each repetition.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Standard deviation across repetitions.
    pub std: f64,
    /// Standard deviation across folds, averaged over repetitions.
    pub mean_fold_std: f64,
    /// `C` chosen for every (repetition, fold).
    pub chosen_c: Vec<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Assigns positions `0..y.len()` to `folds` folds so that every class is
/// spread evenly; `order` fixes the visiting order within each class.
pub fn stratified_folds(y: &[i64], order: &[usize], folds: usize) -> Vec<usize> {
    let mut classes: Vec<i64> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut fold_of = vec![0; y.len()];
    let mut next = 0;
    for c in classes {
        for &i in order.iter().filter(|&&i| y[i] == c) {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    fold_of
}

fn subset(x: &[SparseRow], y: &[i64], idx: &[usize]) -> (Vec<SparseRow>, Vec<i64>) {
    (
        idx.iter().map(|&i| x[i].clone()).collect(),
        idx.iter().map(|&i| y[i]).collect(),
    )
}

fn select_c(x: &[SparseRow], y: &[i64], dim: usize, options: &CvOptions, seed: u64) -> Result<f64> {
    if options.c_grid.len() == 1 {
        return Ok(options.c_grid[0]);
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let inner = options.inner_folds.clamp(2, y.len());
    let fold_of = stratified_folds(y, &order, inner);
    let mut best = (f64::NEG_INFINITY, options.c_grid[0]);
    for &c in &options.c_grid {
        let mut hits = 0.0;
        for f in 0..inner {
            let train_idx: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
            let test_idx: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
            let (tx, ty) = subset(x, y, &train_idx);
            let (vx, vy) = subset(x, y, &test_idx);
            let model = match train(
                &tx,
                &ty,
                dim,
                &TrainOptions {
                    c,
                    epochs: options.epochs,
                    tolerance: options.tolerance,
                    seed,
                },
            ) {
                Ok(m) => m,
                Err(Error::SingleClass) => continue,
                Err(e) => return Err(e),
            };
            hits += model.accuracy(&vx, &vy) * vy.len() as f64;
        }
        if hits > best.0 {
            best = (hits, c);
        }
    }
    Ok(best.1)
}

/// Repeated stratified k-fold cross-validation with `C` chosen per fold by
/// an inner split of the training part.
pub fn cross_validate(x: &[SparseRow], y: &[i64], dim: usize, options: &CvOptions) -> Result<CvReport> {
    if options.folds < 2 {
        return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    if options.repetitions == 0 || options.c_grid.is_empty() {
        return Err(Error::InvalidConfig(
            "cross-validation needs repetitions and a C grid".into(),
        ));
    }
    if y.len() < options.folds {
        return Err(Error::TooFewGraphs {
            graphs: y.len(),
            folds: options.folds,
        });
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::SingleClass);
    }
    let jobs: Vec<(usize, usize)> = (0..options.repetitions)
        .flat_map(|r| (0..options.folds).map(move |f| (r, f)))
        .collect();
    let fold_maps: Vec<Vec<usize>> = (0..options.repetitions)
        .map(|r| {
            let mut order: Vec<usize> = (0..y.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix64(options.seed ^ mix64(r as u64))));
            stratified_folds(y, &order, options.folds)
        })
        .collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(r, f)| {
            let fold_of = &fold_maps[r];
            let train_idx: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
            let test_idx: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
            let (tx, ty) = subset(x, y, &train_idx);
            let (vx, vy) = subset(x, y, &test_idx);
            let seed = mix64(options.seed ^ mix64(((r as u64) << 32) | f as u64));
            let c = select_c(&tx, &ty, dim, options, seed)?;
            let model = train(
                &tx,
                &ty,
                dim,
                &TrainOptions {
                    c,
                    epochs: options.epochs,
                    tolerance: options.tolerance,
                    seed,
                },
            )?;
            Ok((model.accuracy(&vx, &vy), c))
        })
        .collect::<Result<_>>()?;
    let mut accuracies = Vec::with_capacity(options.repetitions);
    let mut fold_stds = Vec::with_capacity(options.repetitions);
    for chunk in results.chunks(options.folds) {
        let accs: Vec<f64> = chunk.iter().map(|r| r.0).collect();
        let (m, s) = mean_std(&accs);
        accuracies.push(m);
        fold_stds.push(s);
    }
    let (mean, std) = mean_std(&accuracies);
    Ok(CvReport {
        mean,
        std,
        mean_fold_std: fold_stds.iter().sum::<f64>() / fold_stds.len() as f64,
        accuracies,
        chosen_c: results.iter().map(|r| r.1).collect(),
    })
}

/// Feature maps of a dataset followed by [`cross_validate`].
pub fn cross_validate_dataset(dataset: &GraphDataset, config: &FeatureConfig, options: &CvOptions) -> Result<CvReport> {
    let matrix = FeatureMatrix::from_maps(&feature_maps(dataset, config)?)?;
    cross_validate(&matrix.rows, &dataset.classes, matrix.dim, options)
}
