//! Count-Sketch and Tensor-Sketch of k-gram vectors.
//!
//! Hash functions are derived from `(seed, component, row)` and the token
//! ids of the k-gram, so two sketches built with the same parameters agree
//! bucket for bucket in any process. The bucket is the low bits of the hash,
//! the sign its top bit.

use std::io::{Read, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::graph::Label;
use crate::hash::{function_key, hash_tokens};
use crate::kgram::{KGramVector, PayloadSpace};

pub const DEFAULT_ROWS: usize = 5;

const MAGIC: [u8; 8] = *b"KONGSKT\0";
const FORMAT_VERSION: u32 = 1;

fn check_width(width: usize) -> Result<()> {
    if width == 0 || !width.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(width));
    }
    if width > u32::MAX as usize {
        return Err(Error::InvalidConfig(format!("sketch width {width} too large")));
    }
    Ok(())
}

fn check_rows(rows: usize) -> Result<()> {
    if rows == 0 || rows > u32::MAX as usize {
        return Err(Error::InvalidConfig(format!(
            "sketch rows must be in 1..2^32, got {rows}"
        )));
    }
    Ok(())
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn row_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `rows` independent Count-Sketches of width `width`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSketch {
    width: usize,
    rows: usize,
    seed: u64,
    component: u32,
    table: Vec<f64>,
}

impl CountSketch {
    pub fn new(width: usize, rows: usize, seed: u64) -> Result<Self> {
        Self::component(width, rows, seed, 0)
    }

    /// The `component`-th sketch of a Tensor-Sketch family; component 0 is
    /// the plain Count-Sketch with this seed.
    pub fn component(width: usize, rows: usize, seed: u64, component: u32) -> Result<Self> {
        check_width(width)?;
        check_rows(rows)?;
        Ok(Self {
            width,
            rows,
            seed,
            component,
            table: vec![0.0; width * rows],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.table[r * self.width..(r + 1) * self.width]
    }

    /// Bucket and sign of `gram` in row `r`.
    pub fn locate(&self, r: usize, gram: &[Label]) -> (usize, f64) {
        let h = hash_tokens(function_key(self.seed, self.component, r as u32), gram);
        let bucket = (h as usize) & (self.width - 1);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        (bucket, sign)
    }

    /// Adds `sign(gram) * weight` to the bucket of `gram` in every row.
    pub fn add(&mut self, gram: &[Label], weight: f64) {
        for r in 0..self.rows {
            let (bucket, sign) = self.locate(r, gram);
            self.table[r * self.width + bucket] += sign * weight;
        }
    }

    /// Feeds every entry of a k-gram vector.
    pub fn feed(&mut self, vector: &KGramVector) {
        for (gram, weight) in vector.iter() {
            self.add(gram, weight);
        }
    }

    fn compatible(&self, other: &CountSketch) -> Result<()> {
        if (self.width, self.rows, self.seed, self.component) != (other.width, other.rows, other.seed, other.component)
        {
            return Err(Error::SketchMismatch(format!(
                "(b={}, r={}, seed={}, component={}) vs (b={}, r={}, seed={}, component={})",
                self.width, self.rows, self.seed, self.component, other.width, other.rows, other.seed, other.component
            )));
        }
        Ok(())
    }

    /// Bucket-wise sum; the sketch of `x + y` from sketches of `x` and `y`.
    pub fn merge(&mut self, other: &CountSketch) -> Result<()> {
        self.compatible(other)?;
        for (a, b) in self.table.iter_mut().zip(&other.table) {
            *a += b;
        }
        Ok(())
    }

    pub fn row_dots(&self, other: &CountSketch) -> Result<Vec<f64>> {
        self.compatible(other)?;
        Ok((0..self.rows).map(|r| row_dot(self.row(r), other.row(r))).collect())
    }

    /// Inner-product estimate: median over rows of the row inner products.
    pub fn dot(&self, other: &CountSketch) -> Result<f64> {
        Ok(median(&mut self.row_dots(other)?))
    }

    /// Norm estimate: square root of the median row self inner product.
    pub fn norm(&self) -> f64 {
        let mut squares: Vec<f64> = (0..self.rows).map(|r| row_dot(self.row(r), self.row(r))).collect();
        median(&mut squares).max(0.0).sqrt()
    }
}

/// `degree` Count-Sketches with independent hash functions, all fed the same
/// vector; combining them by circular convolution sketches the
/// `degree`-fold tensor power of that vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSketch {
    components: Vec<CountSketch>,
}

impl TensorSketch {
    pub fn new(width: usize, rows: usize, seed: u64, degree: u32) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidConfig("tensor degree must be at least 1".into()));
        }
        let components = (0..degree)
            .map(|c| CountSketch::component(width, rows, seed, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    pub fn degree(&self) -> u32 {
        self.components.len() as u32
    }

    pub fn width(&self) -> usize {
        self.components[0].width
    }

    pub fn rows(&self) -> usize {
        self.components[0].rows
    }

    pub fn seed(&self) -> u64 {
        self.components[0].seed
    }

    pub fn components(&self) -> &[CountSketch] {
        &self.components
    }

    pub fn add(&mut self, gram: &[Label], weight: f64) {
        for c in &mut self.components {
            c.add(gram, weight);
        }
    }

    pub fn feed(&mut self, vector: &KGramVector) {
        for c in &mut self.components {
            c.feed(vector);
        }
    }

    pub fn merge(&mut self, other: &TensorSketch) -> Result<()> {
        if self.degree() != other.degree() {
            return Err(Error::SketchMismatch(format!(
                "degree {} vs {}",
                self.degree(),
                other.degree()
            )));
        }
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            a.merge(b)?;
        }
        Ok(())
    }

    /// Norm estimate of the sketched vector, from the first component.
    pub fn norm(&self) -> f64 {
        self.components[0].norm()
    }

    /// Number of counters held.
    pub fn counters(&self) -> usize {
        self.components.iter().map(|c| c.table.len()).sum()
    }

    /// Per row, the circular convolution of the components' rows. Degree 1
    /// copies the single component.
    pub fn finalize(&self, convolver: &Convolver) -> Result<CombinedSketch> {
        let (width, rows) = (self.width(), self.rows());
        let data = if self.degree() == 1 {
            self.components[0].table.clone()
        } else {
            if convolver.width() != width {
                return Err(Error::SketchMismatch(format!(
                    "convolver width {} for sketch width {width}",
                    convolver.width()
                )));
            }
            let mut data = Vec::with_capacity(width * rows);
            let mut row_refs = Vec::with_capacity(self.components.len());
            for r in 0..rows {
                row_refs.clear();
                row_refs.extend(self.components.iter().map(|c| c.row(r)));
                data.extend(convolver.convolve(&row_refs));
            }
            data
        };
        Ok(CombinedSketch {
            width,
            rows,
            seed: self.seed(),
            degree: self.degree(),
            data,
        })
    }

    /// Writes the versioned binary layout: magic, version, seed, width, rows,
    /// degree, then every component's table row-major as little-endian f64.
    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        out.write_all(&MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&self.seed().to_le_bytes())?;
        out.write_all(&(self.width() as u32).to_le_bytes())?;
        out.write_all(&(self.rows() as u32).to_le_bytes())?;
        out.write_all(&self.degree().to_le_bytes())?;
        for c in &self.components {
            for v in &c.table {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let bad = |e: std::io::Error| Error::Stream(format!("truncated sketch: {e}"));
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(bad)?;
        if magic != MAGIC {
            return Err(Error::Stream("not a sketch block".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut u64buf = [0u8; 8];
        let mut read_u32 = |input: &mut dyn Read| -> Result<u32> {
            input.read_exact(&mut u32buf).map_err(bad)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(input)?;
        if version != FORMAT_VERSION {
            return Err(Error::Stream(format!("unsupported sketch format version {version}")));
        }
        input.read_exact(&mut u64buf).map_err(bad)?;
        let seed = u64::from_le_bytes(u64buf);
        let width = read_u32(input)? as usize;
        let rows = read_u32(input)? as usize;
        let degree = read_u32(input)?;
        let mut sketch = TensorSketch::new(width, rows, seed, degree)?;
        for c in &mut sketch.components {
            for v in &mut c.table {
                input.read_exact(&mut u64buf).map_err(bad)?;
                *v = f64::from_le_bytes(u64buf);
            }
        }
        Ok(sketch)
    }
}

/// Finalized Tensor-Sketch: `rows x width` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedSketch {
    width: usize,
    rows: usize,
    seed: u64,
    degree: u32,
    data: Vec<f64>,
}

impl CombinedSketch {
    pub fn zeros(width: usize, rows: usize, seed: u64, degree: u32) -> Self {
        Self {
            width,
            rows,
            seed,
            degree,
            data: vec![0.0; width * rows],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    fn compatible(&self, other: &CombinedSketch) -> Result<()> {
        if (self.width, self.rows, self.seed, self.degree) != (other.width, other.rows, other.seed, other.degree) {
            return Err(Error::SketchMismatch(
                "combined sketches from different parameters".into(),
            ));
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn merge(&mut self, other: &CombinedSketch) -> Result<()> {
        self.compatible(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn row_dots(&self, other: &CombinedSketch) -> Result<Vec<f64>> {
        self.compatible(other)?;
        Ok((0..self.rows).map(|r| row_dot(self.row(r), other.row(r))).collect())
    }

    /// Estimate of `<x, y>^degree`: median over rows.
    pub fn dot(&self, other: &CombinedSketch) -> Result<f64> {
        Ok(median(&mut self.row_dots(other)?))
    }
}

/// Circular convolution of equal-length rows by FFT. Width must be a power of
/// two.
#[derive(Clone)]
pub struct Convolver {
    width: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver").field("width", &self.width).finish()
    }
}

impl Convolver {
    pub fn new(width: usize) -> Result<Self> {
        check_width(width)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            width,
            forward: planner.plan_fft_forward(width),
            inverse: planner.plan_fft_inverse(width),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `out[j] = Σ_{i_1 + ... + i_p ≡ j (mod width)} Π_c rows[c][i_c]`.
    pub fn convolve(&self, rows: &[&[f64]]) -> Vec<f64> {
        let n = self.width;
        let mut product = vec![Complex::new(1.0, 0.0); n];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for row in rows {
            assert_eq!(row.len(), n, "row width differs from convolver width");
            for (b, &x) in buf.iter_mut().zip(row.iter()) {
                *b = Complex::new(x, 0.0);
            }
            self.forward.process(&mut buf);
            for (p, b) in product.iter_mut().zip(&buf) {
                *p *= b;
            }
        }
        self.inverse.process(&mut product);
        let scale = 1.0 / n as f64;
        product.iter().map(|c| c.re * scale).collect()
    }
}

/// Accuracy target for sizing sketches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchBudget {
    /// Number of graphs.
    pub graphs: usize,
    /// Largest node count of a graph.
    pub max_nodes: usize,
    /// Cosine cutoff below which node pairs only get an additive guarantee.
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub degree: u32,
    /// Upper bound on node k-gram vector norms.
    pub norm_bound: f64,
}

impl SketchBudget {
    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(self.epsilon) || !open(self.delta) {
            return Err(Error::InvalidConfig("epsilon and delta must lie in (0, 1)".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1]".into()));
        }
        if self.graphs == 0 || self.max_nodes == 0 {
            return Err(Error::InvalidConfig("budget needs at least one graph and node".into()));
        }
        Ok(())
    }

    /// `(ln M + ln n) ln(1/δ) / (α² ε²)` before rounding.
    pub fn raw_size(&self) -> f64 {
        let logs = (self.graphs as f64).ln() + (self.max_nodes as f64).ln();
        logs * (1.0 / self.delta).ln() / (self.alpha * self.alpha * self.epsilon * self.epsilon)
    }
}

/// Smallest sketch width allowed by [`suggest_sketch_size`].
pub const MIN_SKETCH_WIDTH: usize = 16;

/// Smallest power of two at or above the budget's raw size, and at least 16.
pub fn suggest_sketch_size(budget: &SketchBudget) -> Result<usize> {
    budget.validate()?;
    let raw = budget.raw_size().ceil();
    if raw > (1u64 << 62) as f64 {
        return Err(Error::InvalidConfig(
            "budget asks for an unreasonably large sketch".into(),
        ));
    }
    Ok((raw as usize).max(MIN_SKETCH_WIDTH).next_power_of_two())
}

/// Payload space for sketched summaries: every k-gram goes into each
/// component of a Tensor-Sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchSpace {
    pub width: usize,
    pub rows: usize,
    pub seed: u64,
    pub degree: u32,
}

impl SketchSpace {
    pub fn new(width: usize, rows: usize, seed: u64, degree: u32) -> Result<Self> {
        TensorSketch::new(width, rows, seed, degree)?;
        Ok(Self {
            width,
            rows,
            seed,
            degree,
        })
    }
}

impl PayloadSpace for SketchSpace {
    type Payload = TensorSketch;

    fn zero(&self) -> TensorSketch {
        TensorSketch::new(self.width, self.rows, self.seed, self.degree).expect("validated on construction")
    }

    fn add_kgram(&self, payload: &mut TensorSketch, gram: &[Label], weight: f64) {
        payload.add(gram, weight);
    }

    fn merge(&self, into: &mut TensorSketch, from: &TensorSketch) {
        into.merge(from).expect("payloads share one space");
    }
}
