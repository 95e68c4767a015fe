//! k-gram frequency vectors and string summaries.
//!
//! A [`StringSummary`] stands in for a token string that is never
//! materialized: it keeps the string's length, its first and last `k - 1`
//! tokens, the whole body while the string is at most `2(k - 1)` tokens long,
//! and a payload holding (or sketching) the string's k-gram counts. Two
//! summaries concatenate by adding payloads and counting only the k-grams that
//! cross the junction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::Label;

/// Sparse k-gram frequency vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KGramVector {
    k: usize,
    entries: BTreeMap<Vec<Label>, f64>,
}

impl KGramVector {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            entries: BTreeMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Adds `weight` to the entry of `gram`, dropping the entry if it cancels.
    pub fn add(&mut self, gram: &[Label], weight: f64) {
        if weight == 0.0 {
            return;
        }
        match self.entries.get_mut(gram) {
            Some(value) => {
                *value += weight;
                if *value == 0.0 {
                    self.entries.remove(gram);
                }
            }
            None => {
                self.entries.insert(gram.to_vec(), weight);
            }
        }
    }

    pub fn add_vector(&mut self, other: &KGramVector) {
        for (gram, &w) in &other.entries {
            self.add(gram, w);
        }
    }

    pub fn scaled(&self, factor: f64) -> KGramVector {
        let mut out = KGramVector::new(self.k);
        for (gram, &w) in &self.entries {
            out.add(gram, w * factor);
        }
        out
    }

    pub fn get(&self, gram: &[Label]) -> f64 {
        self.entries.get(gram).copied().unwrap_or(0.0)
    }

    /// Entries in ascending k-gram order.
    pub fn iter(&self) -> impl Iterator<Item = (&[Label], f64)> {
        self.entries.iter().map(|(g, &w)| (g.as_slice(), w))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, other: &KGramVector) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .entries
            .iter()
            .filter_map(|(g, &w)| large.entries.get(g).map(|&v| w * v))
            .sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum()
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    /// Total count, Σ values.
    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }
}

/// k-gram counts of a token sequence; empty when the sequence is shorter than
/// `k`.
pub fn count_kgrams(tokens: &[Label], k: usize) -> Result<KGramVector> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    let mut v = KGramVector::new(k);
    for gram in tokens.windows(k) {
        v.add(gram, 1.0);
    }
    Ok(v)
}

/// Where the k-gram counts of a summary go: an exact vector or a sketch.
pub trait PayloadSpace: Sync {
    type Payload: Clone + Send + Sync;

    fn zero(&self) -> Self::Payload;
    fn add_kgram(&self, payload: &mut Self::Payload, gram: &[Label], weight: f64);
    fn merge(&self, into: &mut Self::Payload, from: &Self::Payload);
}

/// Exact payloads.
#[derive(Debug, Clone, Copy)]
pub struct ExactSpace {
    pub k: usize,
}

impl PayloadSpace for ExactSpace {
    type Payload = KGramVector;

    fn zero(&self) -> KGramVector {
        KGramVector::new(self.k)
    }

    fn add_kgram(&self, payload: &mut KGramVector, gram: &[Label], weight: f64) {
        payload.add(gram, weight);
    }

    fn merge(&self, into: &mut KGramVector, from: &KGramVector) {
        into.add_vector(from);
    }
}

/// Two payloads fed in lockstep.
impl<A: PayloadSpace, B: PayloadSpace> PayloadSpace for (A, B) {
    type Payload = (A::Payload, B::Payload);

    fn zero(&self) -> Self::Payload {
        (self.0.zero(), self.1.zero())
    }

    fn add_kgram(&self, payload: &mut Self::Payload, gram: &[Label], weight: f64) {
        self.0.add_kgram(&mut payload.0, gram, weight);
        self.1.add_kgram(&mut payload.1, gram, weight);
    }

    fn merge(&self, into: &mut Self::Payload, from: &Self::Payload) {
        self.0.merge(&mut into.0, &from.0);
        self.1.merge(&mut into.1, &from.1);
    }
}

/// The token state of a summarized string needed to find the k-grams created
/// when it is concatenated with others.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Boundary {
    pub length: u64,
    /// First `min(k - 1, length)` tokens.
    pub prefix: Vec<Label>,
    /// Last `min(k - 1, length)` tokens.
    pub suffix: Vec<Label>,
    /// The full string, present iff `length <= 2(k - 1)`.
    pub short_body: Option<Vec<Label>>,
}

impl Boundary {
    pub fn from_tokens(tokens: &[Label], k: usize) -> Self {
        let keep = k - 1;
        let n = tokens.len();
        Self {
            length: n as u64,
            prefix: tokens[..keep.min(n)].to_vec(),
            suffix: tokens[n - keep.min(n)..].to_vec(),
            short_body: (n <= 2 * keep).then(|| tokens.to_vec()),
        }
    }

    /// Tokens this summary has to keep. When the body is stored, prefix and
    /// suffix are views of it.
    pub fn stored_tokens(&self) -> usize {
        match &self.short_body {
            Some(body) => body.len(),
            None => self.prefix.len() + self.suffix.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StringSummary<P> {
    pub k: usize,
    pub boundary: Boundary,
    pub payload: P,
}

impl<P> StringSummary<P> {
    pub fn len(&self) -> u64 {
        self.boundary.length
    }

    pub fn is_empty(&self) -> bool {
        self.boundary.length == 0
    }
}

impl StringSummary<KGramVector> {
    /// Exact summary of an explicit string.
    pub fn exact(tokens: &[Label], k: usize) -> Result<Self> {
        summarize(tokens, k, &ExactSpace { k })
    }
}

/// Summary of an explicit token string.
pub fn summarize<S: PayloadSpace>(tokens: &[Label], k: usize, space: &S) -> Result<StringSummary<S::Payload>> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    let mut payload = space.zero();
    for gram in tokens.windows(k) {
        space.add_kgram(&mut payload, gram, 1.0);
    }
    Ok(StringSummary {
        k,
        boundary: Boundary::from_tokens(tokens, k),
        payload,
    })
}

/// Incremental concatenation of summarized strings.
///
/// Pushing boundaries and merging payloads are separate steps so that a
/// caller can merge payloads as they arrive and replay the boundaries later
/// in neighbor order.
pub struct SummaryBuilder<'a, S: PayloadSpace> {
    space: &'a S,
    k: usize,
    length: u64,
    prefix: Vec<Label>,
    tail: Vec<Label>,
    body: Option<Vec<Label>>,
    payload: S::Payload,
    new_kgrams: u64,
    window: Vec<Label>,
}

impl<'a, S: PayloadSpace> SummaryBuilder<'a, S> {
    pub fn new(space: &'a S, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroK);
        }
        Ok(Self {
            space,
            k,
            length: 0,
            prefix: Vec::new(),
            tail: Vec::new(),
            body: Some(Vec::new()),
            payload: space.zero(),
            new_kgrams: 0,
            window: Vec::with_capacity(2 * k),
        })
    }

    /// Appends a summarized string: payload merge plus junction k-grams.
    pub fn push(&mut self, child: &StringSummary<S::Payload>) -> Result<()> {
        if child.k != self.k {
            return Err(Error::MixedK(self.k, child.k));
        }
        self.space.merge(&mut self.payload, &child.payload);
        self.push_boundary(&child.boundary);
        Ok(())
    }

    pub fn merge_payload(&mut self, payload: &S::Payload) {
        self.space.merge(&mut self.payload, payload);
    }

    /// Appends the token state of a string whose payload is merged
    /// separately, feeding the k-grams that span the junction.
    pub fn push_boundary(&mut self, child: &Boundary) {
        if child.length == 0 {
            return;
        }
        let keep = self.k - 1;

        // k-grams starting in the current tail and ending inside the child;
        // each crossing k-gram is counted once, at the child holding its last
        // token, and its last token lies within the child's first k - 1.
        if !self.tail.is_empty() {
            self.window.clear();
            self.window.extend_from_slice(&self.tail);
            self.window.extend_from_slice(&child.prefix);
            let starts = self.tail.len().min((self.window.len() + 1).saturating_sub(self.k));
            for start in 0..starts {
                self.space
                    .add_kgram(&mut self.payload, &self.window[start..start + self.k], 1.0);
            }
            self.new_kgrams += starts as u64;
        }

        if self.prefix.len() < keep {
            let need = keep - self.prefix.len();
            self.prefix
                .extend_from_slice(&child.prefix[..need.min(child.prefix.len())]);
        }

        if child.length >= keep as u64 {
            self.tail.clear();
            self.tail.extend_from_slice(&child.suffix);
        } else {
            // child shorter than k - 1: its prefix is the whole child
            self.tail.extend_from_slice(&child.prefix);
            let excess = self.tail.len().saturating_sub(keep);
            self.tail.drain(..excess);
        }

        self.length = self.length.saturating_add(child.length);
        self.body = match self.body.take() {
            Some(mut body) if self.length <= 2 * keep as u64 => {
                body.extend_from_slice(
                    child
                        .short_body
                        .as_deref()
                        .expect("strings within 2(k-1) tokens keep their body"),
                );
                Some(body)
            }
            _ => None,
        };
    }

    /// Number of junction k-grams fed so far.
    pub fn new_kgrams(&self) -> u64 {
        self.new_kgrams
    }

    pub fn finish(self) -> StringSummary<S::Payload> {
        StringSummary {
            k: self.k,
            boundary: Boundary {
                length: self.length,
                prefix: self.prefix,
                suffix: self.tail,
                short_body: self.body,
            },
            payload: self.payload,
        }
    }
}

/// Concatenates summaries in order, returning the summary of the
/// concatenated string and the number of junction k-grams created.
pub fn concat_with_count<S: PayloadSpace>(
    children: &[&StringSummary<S::Payload>],
    k: usize,
    space: &S,
) -> Result<(StringSummary<S::Payload>, u64)> {
    let mut builder = SummaryBuilder::new(space, k)?;
    for child in children {
        builder.push(child)?;
    }
    let created = builder.new_kgrams();
    Ok((builder.finish(), created))
}

/// Exact summary of the concatenation of the summarized strings.
pub fn concat_summaries(children: &[&StringSummary<KGramVector>], k: usize) -> Result<StringSummary<KGramVector>> {
    concat_with_count(children, k, &ExactSpace { k }).map(|(s, _)| s)
}

/// Number of k-grams that concatenating the strings creates across
/// junctions; at most `(k - 1)` per junction.
pub fn new_kgram_count(children: &[&StringSummary<KGramVector>], k: usize) -> Result<u64> {
    let space = ExactSpace { k };
    let mut builder = SummaryBuilder::new(&space, k)?;
    for child in children {
        if child.k != k {
            return Err(Error::MixedK(k, child.k));
        }
        builder.push_boundary(&child.boundary);
    }
    Ok(builder.new_kgrams())
}

/// Base kernel applied to two k-gram vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `(<x, y> + c)^p`
    Poly,
    /// `(<x, y> / (|x| |y|))^p`, zero when either vector is zero.
    Cosine,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poly" | "polynomial" => Ok(KernelKind::Poly),
            "cosine" | "cos" => Ok(KernelKind::Cosine),
            other => Err(Error::InvalidConfig(format!("unknown kernel {other:?}"))),
        }
    }
}

pub(crate) fn check_kernel_params(kind: KernelKind, p: u32, c: f64) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidConfig("kernel degree p must be at least 1".into()));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "offset c must be finite and non-negative, got {c}"
        )));
    }
    if kind == KernelKind::Cosine && c != 0.0 {
        return Err(Error::CosineWithOffset(c));
    }
    Ok(())
}

pub fn exact_base_kernel(x: &KGramVector, y: &KGramVector, kind: KernelKind, p: u32, c: f64) -> Result<f64> {
    check_kernel_params(kind, p, c)?;
    let base = match kind {
        KernelKind::Poly => x.dot(y) + c,
        KernelKind::Cosine => {
            let denom = x.norm() * y.norm();
            if denom == 0.0 {
                0.0
            } else {
                x.dot(y) / denom
            }
        }
    };
    Ok(base.powi(p as i32))
}
