use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64 as c64;
use rayon::prelude::*;

use crate::error::{invalid, Result};

/// Matrix entry type: either `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Default
    + Add<Output = Self>
    + AddAssign
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn conj(self) -> Self;
    fn to_c64(self) -> c64;
    fn scale(self, f: f64) -> Self;
    fn abs(self) -> f64;
    fn mul_c(self, z: c64) -> c64;
    fn from_c64(z: c64) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn conj(self) -> Self {
        self
    }
    fn to_c64(self) -> c64 {
        c64::new(self, 0.0)
    }
    fn scale(self, f: f64) -> Self {
        self * f
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    #[inline(always)]
    fn mul_c(self, z: c64) -> c64 {
        c64::new(self * z.re, self * z.im)
    }
    /// Drops the imaginary part.
    fn from_c64(z: c64) -> Self {
        z.re
    }
}

impl Scalar for c64 {
    fn zero() -> Self {
        c64::new(0.0, 0.0)
    }
    fn conj(self) -> Self {
        c64::conj(&self)
    }
    fn to_c64(self) -> c64 {
        self
    }
    fn scale(self, f: f64) -> Self {
        self * f
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    #[inline(always)]
    fn mul_c(self, z: c64) -> c64 {
        self * z
    }
    fn from_c64(z: c64) -> Self {
        z
    }
}

/// Compressed sparse row matrix. Explicitly stored zeros are kept, so
/// matrices built from the same generator share one sparsity pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<T>,
}

const PAR_ROWS: usize = 4096;

impl<T: Scalar> Csr<T> {
    /// Builds from per-row entry lists; duplicate columns in a row are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = indices.len();
            for (c, v) in row {
                if c >= ncols {
                    return Err(invalid(format!("column {c} out of range {ncols}")));
                }
                if indices.len() > start && *indices.last().unwrap() as usize == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c as u32);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    pub fn from_triplets(nrows: usize, ncols: usize, trips: &[(usize, usize, T)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, v) in trips {
            if r >= nrows {
                return Err(invalid(format!("row {r} out of range {nrows}")));
            }
            rows[r].push((c, v));
        }
        Self::from_rows(ncols, rows)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            values: vec![T::from_c64(c64::new(1.0, 0.0)); n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()].iter().map(|&c| c as usize).zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let range = self.indptr[r]..self.indptr[r + 1];
        match self.indices[range.clone()].binary_search(&(c as u32)) {
            Ok(p) => self.values[range.start + p],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// y = A x
    pub fn matvec(&self, x: &[c64], y: &mut [c64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let kernel = |(r, yr): (usize, &mut c64)| {
            let mut acc = c64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k].mul_c(x[self.indices[k] as usize]);
            }
            *yr = acc;
        };
        if self.nrows >= PAR_ROWS {
            y.par_iter_mut().enumerate().with_min_len(1024).for_each(kernel);
        } else {
            y.iter_mut().enumerate().for_each(kernel);
        }
    }

    /// y = A† x
    pub fn matvec_adjoint(&self, x: &[c64], y: &mut [c64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = c64::new(0.0, 0.0));
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k] as usize] += self.values[k].conj().mul_c(x[r]);
            }
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0u32; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k] as usize;
                let p = next[c];
                indices[p] = r as u32;
                values[p] = self.values[k].conj();
                next[c] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, indptr, indices, values }
    }

    /// wa·A + wb·B, merging sparsity patterns.
    pub fn linear_combination(&self, wa: f64, other: &Self, wb: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(invalid("shape mismatch in linear combination"));
        }
        if self.indptr == other.indptr && self.indices == other.indices {
            let values = self.values.iter().zip(&other.values).map(|(a, b)| a.scale(wa) + b.scale(wb)).collect();
            return Ok(Self { values, ..self.clone() });
        }
        let rows = (0..self.nrows)
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| (c, v.scale(wa)))
                    .chain(other.row(r).map(|(c, v)| (c, v.scale(wb))))
                    .collect()
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }

    /// (A + A†)/2, which is exactly Hermitian entry by entry.
    pub fn hermitian_part(&self) -> Result<Self> {
        self.linear_combination(0.5, &self.adjoint(), 0.5)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..self.nrows)
            .flat_map(|r| {
                self.row(r)
                    .map(move |(c, v)| (v - other.get(r, c)).abs())
                    .chain(other.row(r).map(move |(c, v)| (v - self.get(r, c)).abs()))
            })
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.nrows == self.ncols && self.max_abs_diff(&self.adjoint()) == 0.0
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Csr<U> {
        Csr {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_dense(&self) -> faer::Mat<T> {
        let mut m = faer::Mat::<T>::from_fn(self.nrows, self.ncols, |_, _| T::zero());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn row_values_all(&self, pred: impl Fn(&T) -> bool) -> bool {
        self.values.iter().all(pred)
    }

    /// A + diag(d); the diagonal must already be part of the pattern or is inserted.
    pub fn add_diagonal(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.nrows || self.nrows != self.ncols {
            return Err(invalid("diagonal length mismatch"));
        }
        let mut out = self.clone();
        let mut missing = false;
        for (r, &x) in d.iter().enumerate() {
            let range = out.indptr[r]..out.indptr[r + 1];
            match out.indices[range.clone()].binary_search(&(r as u32)) {
                Ok(p) => out.values[range.start + p] += T::from_c64(c64::new(x, 0.0)),
                Err(_) => missing = true,
            }
        }
        if missing {
            let diag = Csr::from_triplets(self.nrows, self.ncols, &d.iter().enumerate().map(|(i, &x)| (i, i, T::from_c64(c64::new(x, 0.0)))).collect::<Vec<_>>())?;
            return self.linear_combination(1.0, &diag, 1.0);
        }
        Ok(out)
    }

    fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows && self.ncols == other.ncols && self.indptr == other.indptr && self.indices == other.indices
    }

    /// Σ_k w_k A_k; fast when all terms share the pattern of the first.
    pub fn weighted_sum(terms: &[(f64, &Self)]) -> Result<Self> {
        let Some(&(w0, first)) = terms.first() else {
            return Err(invalid("empty weighted sum"));
        };
        if terms.iter().all(|(_, m)| m.same_pattern(first)) {
            let mut values: Vec<T> = first.values.iter().map(|v| v.scale(w0)).collect();
            for &(w, m) in &terms[1..] {
                for (acc, v) in values.iter_mut().zip(&m.values) {
                    *acc += v.scale(w);
                }
            }
            return Ok(Self { values, ..first.clone() });
        }
        let mut acc = first.map(|v| v.scale(w0));
        for &(w, m) in &terms[1..] {
            acc = acc.linear_combination(1.0, m, w)?;
        }
        Ok(acc)
    }

    /// Sparse product A·B (small operators only; used by test oracles).
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(invalid("shape mismatch in matmul"));
        }
        let rows = (0..self.nrows)
            .map(|r| {
                let mut acc = Vec::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        acc.push((c, a * b));
                    }
                }
                acc
            })
            .collect();
        Self::from_rows(other.ncols, rows)
    }
}

/// A square Hermitian operator with real or complex entries.
#[derive(Clone, Debug, PartialEq)]
pub enum SparseOp {
    Real(Csr<f64>),
    Complex(Csr<c64>),
}

impl SparseOp {
    pub fn dim(&self) -> usize {
        match self {
            Self::Real(m) => m.nrows(),
            Self::Complex(m) => m.nrows(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Self::Real(m) => m.nnz(),
            Self::Complex(m) => m.nnz(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Self::Real(_))
    }

    pub fn matvec(&self, x: &[c64], y: &mut [c64]) {
        match self {
            Self::Real(m) => m.matvec(x, y),
            Self::Complex(m) => m.matvec(x, y),
        }
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        let mut y = vec![c64::new(0.0, 0.0); self.dim()];
        self.matvec(x, &mut y);
        y
    }

    /// ⟨x|A|x⟩ (real part; the imaginary part vanishes for Hermitian A).
    pub fn expectation(&self, x: &[c64]) -> f64 {
        crate::linalg::vec::dot(x, &self.apply(x)).re
    }

    pub fn to_complex(&self) -> Csr<c64> {
        match self {
            Self::Real(m) => m.map(|v| c64::new(v, 0.0)),
            Self::Complex(m) => m.clone(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        match self {
            Self::Real(m) => c64::new(m.get(r, c), 0.0),
            Self::Complex(m) => m.get(r, c),
        }
    }

    pub fn is_hermitian(&self) -> bool {
        match self {
            Self::Real(m) => m.is_hermitian(),
            Self::Complex(m) => m.is_hermitian(),
        }
    }

    pub fn linear_combination(&self, wa: f64, other: &Self, wb: f64) -> Result<Self> {
        Ok(match (self, other) {
            (Self::Real(a), Self::Real(b)) => Self::Real(a.linear_combination(wa, b, wb)?),
            _ => Self::Complex(self.to_complex().linear_combination(wa, &other.to_complex(), wb)?),
        })
    }

    /// Σ_k w_k A_k, real when every term is real.
    pub fn weighted_sum(terms: &[(f64, &Self)]) -> Result<Self> {
        if terms.iter().all(|(_, m)| m.is_real()) {
            let real: Vec<(f64, &Csr<f64>)> = terms
                .iter()
                .map(|(w, m)| match m {
                    Self::Real(x) => (*w, x),
                    Self::Complex(_) => unreachable!(),
                })
                .collect();
            return Ok(Self::Real(Csr::weighted_sum(&real)?));
        }
        let owned: Vec<Csr<c64>> = terms.iter().map(|(_, m)| m.to_complex()).collect();
        let refs: Vec<(f64, &Csr<c64>)> = terms.iter().zip(&owned).map(|((w, _), m)| (*w, m)).collect();
        Ok(Self::Complex(Csr::weighted_sum(&refs)?))
    }

    /// Largest |entry| difference between two operators.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        match (self, other) {
            (Self::Real(a), Self::Real(b)) => a.max_abs_diff(b),
            _ => self.to_complex().max_abs_diff(&other.to_complex()),
        }
    }

    /// Sum of row-wise absolute values; bounds the spectral radius.
    pub fn gershgorin_radius(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|r| match self {
                Self::Real(m) => m.row(r).map(|(_, v)| v.abs()).sum::<f64>(),
                Self::Complex(m) => m.row(r).map(|(_, v)| v.norm()).sum::<f64>(),
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Csr<c64> {
        let i = c64::new(0.0, 1.0);
        Csr::from_triplets(
            3,
            3,
            &[(0, 0, c64::new(1.0, 0.0)), (0, 2, i), (2, 0, -i), (1, 1, c64::new(2.0, 0.0)), (1, 1, c64::new(0.5, 0.0))],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        assert_eq!(sample().get(1, 1), c64::new(2.5, 0.0));
        assert_eq!(sample().nnz(), 4);
    }

    #[test]
    fn adjoint_of_hermitian_is_itself() {
        let m = sample();
        assert!(m.is_hermitian());
        assert_eq!(m.adjoint(), m);
    }

    #[test]
    fn matvec_adjoint_matches_adjoint_matvec() {
        let m = Csr::from_triplets(2, 3, &[(0, 1, c64::new(1.0, 2.0)), (1, 2, c64::new(-1.0, 0.5))]).unwrap();
        let x = [c64::new(0.3, -1.0), c64::new(2.0, 0.1)];
        let mut y1 = vec![c64::default(); 3];
        m.matvec_adjoint(&x, &mut y1);
        let mut y2 = vec![c64::default(); 3];
        m.adjoint().matvec(&x, &mut y2);
        assert_eq!(y1, y2);
    }

    #[test]
    fn linear_combination_merges_patterns() {
        let a = Csr::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        let b = Csr::from_triplets(2, 2, &[(1, 0, 2.0), (0, 0, 1.0)]).unwrap();
        let c = a.linear_combination(2.0, &b, -1.0).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(1, 0), -2.0);
    }
}
