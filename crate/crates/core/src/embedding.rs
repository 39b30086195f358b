//! Row-major point sets and the plain-text points format.
//!
//! A points file holds one row per item, coordinates separated by single
//! spaces and written with 17 significant digits so that `f64` values
//! round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{LabError, Result};

/// An embedding `f: V -> R^d` stored as an `n x d` row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
}

impl Embedding {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Embedding {
            n,
            dim,
            coords: vec![0.0; n * dim],
        }
    }

    pub fn from_flat(n: usize, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != n * dim {
            return Err(LabError::InvalidInput(format!(
                "expected {} coordinates for {n} x {dim}, got {}",
                n * dim,
                coords.len()
            )));
        }
        Ok(Embedding { n, dim, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        let mut coords = Vec::with_capacity(n * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(LabError::InvalidInput(format!(
                    "row {i} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        Ok(Embedding { n, dim, coords })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim.max(1)).take(self.n)
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j))
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }

    /// Rescales every nonzero row to unit Euclidean norm.
    pub fn normalize_rows(&mut self) {
        let dim = self.dim;
        for row in self.coords.chunks_exact_mut(dim.max(1)) {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.coords.len() * 24);
        for i in 0..self.n {
            for (k, x) in self.row(i).iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                write!(out, "{x:.16e}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str, path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| LabError::parse(path, lineno + 1, format!("`{tok}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Embedding::from_rows(&rows).map_err(|e| LabError::parse(path, 0, e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| LabError::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Embedding::parse_text(&text, path)
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_ragged_rows() {
        assert!(Embedding::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn normalize_skips_zero_rows() {
        let mut e = Embedding::from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        e.normalize_rows();
        assert_eq!(e.row(0), &[0.6, 0.8]);
        assert_eq!(e.row(1), &[0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..6)
        ) {
            let e = Embedding::from_rows(&rows).unwrap();
            let back = Embedding::parse_text(&e.to_text(), Path::new("mem")).unwrap();
            prop_assert_eq!(e, back);
        }
    }
}
