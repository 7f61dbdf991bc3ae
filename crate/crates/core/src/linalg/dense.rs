use faer::{Mat, Side};
use num_complex::Complex64 as c64;

use super::sparse::SparseOp;
use crate::error::{Error, Result};

/// Largest dimension handled by the dense solver.
pub const DENSE_LIMIT: usize = 20_000;

/// Eigenvectors stored column-wise, real when the operator is real.
#[derive(Clone, Debug)]
pub enum Eigenvectors {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl Eigenvectors {
    pub fn count(&self) -> usize {
        match self {
            Self::Real(m) => m.ncols(),
            Self::Complex(m) => m.ncols(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Real(m) => m.nrows(),
            Self::Complex(m) => m.nrows(),
        }
    }

    pub fn column(&self, n: usize) -> Vec<c64> {
        match self {
            Self::Real(m) => (0..m.nrows()).map(|i| c64::new(m[(i, n)], 0.0)).collect(),
            Self::Complex(m) => (0..m.nrows()).map(|i| m[(i, n)]).collect(),
        }
    }

    /// ⟨n|x⟩ for every eigenvector n.
    pub fn project(&self, x: &[c64]) -> Vec<c64> {
        match self {
            Self::Real(m) => (0..m.ncols())
                .map(|n| {
                    let col = m.col(n);
                    (0..m.nrows()).map(|i| x[i] * col[i]).sum()
                })
                .collect(),
            Self::Complex(m) => (0..m.ncols())
                .map(|n| {
                    let col = m.col(n);
                    (0..m.nrows()).map(|i| col[i].conj() * x[i]).sum()
                })
                .collect(),
        }
    }
}

fn check_dim(op: &SparseOp) -> Result<()> {
    if op.dim() > DENSE_LIMIT {
        return Err(Error::TooLarge { dim: op.dim(), limit: DENSE_LIMIT });
    }
    Ok(())
}

fn numerical(e: impl std::fmt::Debug) -> Error {
    Error::Numerical(format!("dense eigensolver failed: {e:?}"))
}

/// All eigenvalues in ascending order.
pub fn eigvalsh(op: &SparseOp) -> Result<Vec<f64>> {
    check_dim(op)?;
    match op {
        SparseOp::Real(m) => m.to_dense().self_adjoint_eigenvalues(Side::Lower).map_err(numerical),
        SparseOp::Complex(m) => m.to_dense().self_adjoint_eigenvalues(Side::Lower).map_err(numerical),
    }
}

/// Full eigendecomposition, energies ascending.
pub fn eigh(op: &SparseOp) -> Result<(Vec<f64>, Eigenvectors)> {
    check_dim(op)?;
    match op {
        SparseOp::Real(m) => {
            let e = m.to_dense().self_adjoint_eigen(Side::Lower).map_err(numerical)?;
            let s = e.S().column_vector();
            let vals = (0..s.nrows()).map(|i| s[i]).collect();
            Ok((vals, Eigenvectors::Real(e.U().to_owned())))
        }
        SparseOp::Complex(m) => {
            let e = m.to_dense().self_adjoint_eigen(Side::Lower).map_err(numerical)?;
            let s = e.S().column_vector();
            let vals = (0..s.nrows()).map(|i| s[i].re).collect();
            Ok((vals, Eigenvectors::Complex(e.U().to_owned())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::Csr;

    #[test]
    fn two_level_eigenpairs() {
        let i = c64::new(0.0, 1.0);
        let m = Csr::from_triplets(2, 2, &[(0, 1, i), (1, 0, -i)]).unwrap();
        let op = SparseOp::Complex(m);
        let (vals, vecs) = eigh(&op).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let v = vecs.column(0);
        let hv = op.apply(&v);
        for k in 0..2 {
            assert!((hv[k] + v[k]).norm() < 1e-14);
        }
    }
}
