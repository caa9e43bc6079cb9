//! Real symmetric sparse matrices in compressed-row form.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Entries below this magnitude are dropped during assembly.
pub const DROP_TOL: f64 = 1e-15;

/// Real symmetric matrix stored in CSR form with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetricOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetricOperator {
    /// The zero operator.
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            vals: vec![1.0; dim],
        }
    }

    /// Assembles from coordinate triplets, summing duplicates and dropping near-zeros.
    ///
    /// Fails if the result is not symmetric.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::InvalidArgument(format!(
                    "entry ({r}, {c}) outside dimension {dim}"
                )));
            }
            rows[r].push((c, v));
        }
        let op = Self::from_rows(dim, rows);
        op.check_symmetric()?;
        Ok(op)
    }

    /// Builds from per-row entry lists; duplicates are summed. Symmetry is not checked.
    pub(crate) fn from_rows(dim: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v.abs() >= DROP_TOL {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    fn check_symmetric(&self) -> Result<()> {
        let scale = self.vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        for (r, c, v) in self.iter() {
            if (self.get(c, r) - v).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "matrix not symmetric at ({r}, {c})"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entry lookup by binary search within the row.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.cols[lo..hi].binary_search(&c) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates over stored `(row, col, value)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }

    /// `y = A x` for a complex vector.
    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            *yr = acc;
        }
    }

    /// `<x|A|x>` for a complex vector. The imaginary part vanishes for symmetric `A`.
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply_complex(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|r| self.get(r, r)).sum()
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| {
                self.vals[self.row_ptr[r]..self.row_ptr[r + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Returns `self + a * other`.
    pub fn add_scaled(&self, other: &Self, a: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::InvalidArgument(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        let rows = (0..self.dim)
            .map(|r| {
                let mut row: Vec<(usize, f64)> = (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| (self.cols[k], self.vals[k]))
                    .collect();
                row.extend(
                    (other.row_ptr[r]..other.row_ptr[r + 1])
                        .map(|k| (other.cols[k], a * other.vals[k])),
                );
                row
            })
            .collect();
        Ok(Self::from_rows(self.dim, rows))
    }

    /// Writes `row col value` lines with 17 significant digits.
    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# dim {}", self.dim)?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`write_coo`](Self::write_coo).
    pub fn read_coo(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let dim = lines
            .next()
            .and_then(|l| l.strip_prefix("# dim "))
            .and_then(|s| s.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse("missing '# dim' header".into()))?;
        let mut trip = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse(format!("bad entry line '{line}'"));
            if f.len() != 3 {
                return Err(bad());
            }
            let r = f[0].parse().map_err(|_| bad())?;
            let c = f[1].parse().map_err(|_| bad())?;
            let v = f[2].parse().map_err(|_| bad())?;
            trip.push((r, c, v));
        }
        Self::from_triplets(dim, &trip)
    }
}
