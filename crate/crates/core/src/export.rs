//! Text exports of feature maps and Gram matrices.
//!
//! * sparse: one line per graph, `class idx:value ...` with 0-based indices;
//! * dense: CSV with a `class,f0,f1,...` header;
//! * gram: CSV whose header and first column hold graph indices.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! equal maps give byte-identical files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::feature::FeatureMatrix;
use crate::graph::Alphabet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Sparse,
    Dense,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" | "svmlight" => Ok(Format::Sparse),
            "dense" | "csv" => Ok(Format::Dense),
            _ => Err(Error::InvalidConfig(format!(
                "unknown format {s:?}, expected sparse or dense"
            ))),
        }
    }
}

fn check_rows(matrix: &FeatureMatrix, classes: &[i64]) -> Result<()> {
    if matrix.rows.len() != classes.len() {
        return Err(Error::InvalidConfig(format!(
            "{} feature rows but {} classes",
            matrix.rows.len(),
            classes.len()
        )));
    }
    Ok(())
}

pub fn sparse_text(matrix: &FeatureMatrix, classes: &[i64]) -> Result<String> {
    check_rows(matrix, classes)?;
    let mut out = String::new();
    for (row, class) in matrix.rows.iter().zip(classes) {
        let _ = write!(out, "{class}");
        for (i, v) in row {
            let _ = write!(out, " {i}:{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn dense_text(matrix: &FeatureMatrix, classes: &[i64]) -> Result<String> {
    check_rows(matrix, classes)?;
    let mut out = String::from("class");
    for i in 0..matrix.dim {
        let _ = write!(out, ",f{i}");
    }
    out.push('\n');
    let mut values = vec![0.0; matrix.dim];
    for (row, class) in matrix.rows.iter().zip(classes) {
        values.iter_mut().for_each(|v| *v = 0.0);
        for &(i, v) in row {
            values[i] = v;
        }
        let _ = write!(out, "{class}");
        for v in &values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn features_text(matrix: &FeatureMatrix, classes: &[i64], format: Format) -> Result<String> {
    match format {
        Format::Sparse => sparse_text(matrix, classes),
        Format::Dense => dense_text(matrix, classes),
    }
}

pub fn gram_text(gram: &[Vec<f64>]) -> String {
    let mut out = String::from("graph");
    for j in 0..gram.len() {
        let _ = write!(out, ",{j}");
    }
    out.push('\n');
    for (i, row) in gram.iter().enumerate() {
        let _ = write!(out, "{i}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Column index, then the k-gram spelled out with alphabet names.
pub fn vocabulary_text(matrix: &FeatureMatrix, alphabet: &Alphabet) -> String {
    let mut out = String::new();
    for (i, gram) in matrix.vocabulary.iter().enumerate() {
        let names: Vec<String> = gram
            .iter()
            .map(|&l| {
                if l == crate::graph::Label::BIAS {
                    "<bias>".to_string()
                } else {
                    alphabet.name(l).map(str::to_owned).unwrap_or_else(|| l.0.to_string())
                }
            })
            .collect();
        let _ = writeln!(out, "{i}\t{}", names.join(" "));
    }
    out
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Label;

    fn matrix() -> FeatureMatrix {
        FeatureMatrix {
            dim: 3,
            rows: vec![vec![(0, 2.0), (2, 0.5)], vec![]],
            vocabulary: vec![vec![Label(0)], vec![Label(1)], vec![Label::BIAS]],
        }
    }

    #[test]
    fn sparse_lines() {
        assert_eq!(sparse_text(&matrix(), &[1, -1]).unwrap(), "1 0:2 2:0.5\n-1\n");
        assert!(sparse_text(&matrix(), &[1]).is_err());
    }

    #[test]
    fn dense_csv() {
        assert_eq!(
            dense_text(&matrix(), &[1, 0]).unwrap(),
            "class,f0,f1,f2\n1,2,0,0.5\n0,0,0,0\n"
        );
    }

    #[test]
    fn gram_csv() {
        let text = gram_text(&[vec![1.0, 0.25], vec![0.25, 3.0]]);
        assert_eq!(text, "graph,0,1\n0,1,0.25\n1,0.25,3\n");
    }

    #[test]
    fn vocabulary_names() {
        let mut alphabet = Alphabet::new();
        alphabet.intern("C");
        alphabet.intern("N");
        assert_eq!(vocabulary_text(&matrix(), &alphabet), "0\tC\n1\tN\n2\t<bias>\n");
    }

    #[test]
    fn formats_parse() {
        assert_eq!("dense".parse::<Format>().unwrap(), Format::Dense);
        assert!("xml".parse::<Format>().is_err());
    }
}
