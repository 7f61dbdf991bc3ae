//! Lattice Laughlin state with two quasiholes and its parent Hamiltonian H_β(s).

use std::sync::Arc;

use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectra::Bipartition;
use crate::hilbert::{BosonBasis, SectorBasis};
use crate::linalg::{Csr, SparseOp};

const POLE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeGeometry {
    pub lx: usize,
    pub ly: usize,
    positions: Vec<c64>,
}

impl LatticeGeometry {
    /// Unit-spacing rectangular lattice, z_j = x + i·y with j = x + L_x·y.
    pub fn new(lx: usize, ly: usize) -> Result<Self> {
        let n = lx * ly;
        if lx == 0 || ly == 0 || n % 2 != 0 {
            return Err(invalid(format!("lattice {lx}x{ly} must have an even, nonzero number of sites")));
        }
        if n > 63 {
            return Err(Error::Unsupported(format!("{n} sites exceed the bitmask width")));
        }
        let positions = (0..n).map(|j| c64::new((j % lx) as f64, (j / lx) as f64)).collect();
        Ok(Self { lx, ly, positions })
    }

    pub fn n_sites(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[c64] {
        &self.positions
    }

    /// Particle number of the two-quasihole sector, N/2 − 1.
    pub fn particles(&self) -> usize {
        self.n_sites() / 2 - 1
    }

    pub fn center(&self) -> c64 {
        c64::new((self.lx as f64 - 1.0) / 2.0, (self.ly as f64 - 1.0) / 2.0)
    }

    fn check_off_lattice(&self, w: c64) -> Result<()> {
        if self.positions.iter().any(|z| (z - w).norm() < POLE_TOL) {
            return Err(invalid(format!("quasihole position {w} coincides with a lattice site")));
        }
        Ok(())
    }

    /// Bitmask of the lower half of the rows (the entanglement cut).
    pub fn lower_half_mask(&self) -> u64 {
        let sites = self.lx * (self.ly / 2);
        if sites == 0 { 0 } else { (1u64 << sites) - 1 }
    }
}

/// w₁ fixed at the lattice center; w₂ traverses a rectangle centered on w₁,
/// counterclockwise from its lower-left corner, one edge per unit of s.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiholePath {
    pub w1: c64,
    pub corners: [c64; 4],
}

impl QuasiholePath {
    /// Width 2 (1) for even (odd) L_x, height 2 (1) for even (odd) L_y.
    pub fn standard(geom: &LatticeGeometry) -> Result<Self> {
        let w1 = geom.center();
        geom.check_off_lattice(w1)?;
        let hw = if geom.lx % 2 == 0 { 1.0 } else { 0.5 };
        let hh = if geom.ly % 2 == 0 { 1.0 } else { 0.5 };
        let corners = [
            w1 + c64::new(-hw, -hh),
            w1 + c64::new(hw, -hh),
            w1 + c64::new(hw, hh),
            w1 + c64::new(-hw, hh),
        ];
        Ok(Self { w1, corners })
    }

    fn edge(s: f64) -> Result<usize> {
        if !(0.0..=4.0).contains(&s) || s.is_nan() {
            return Err(invalid(format!("path parameter s={s} outside [0, 4]")));
        }
        // at a corner the incoming edge is used, so derivatives are left-sided
        Ok(if s == 0.0 { 0 } else { (s.ceil() as usize).clamp(1, 4) - 1 })
    }

    pub fn w2(&self, s: f64) -> Result<c64> {
        let e = Self::edge(s)?;
        let t = s - e as f64;
        Ok(self.corners[e] + (self.corners[(e + 1) % 4] - self.corners[e]) * t)
    }

    pub fn dw2(&self, s: f64) -> Result<c64> {
        let e = Self::edge(s)?;
        Ok(self.corners[(e + 1) % 4] - self.corners[e])
    }
}

/// Normalized |Φ₀⟩ with largest amplitude real positive.
pub fn laughlin_state(geom: &LatticeGeometry, w1: c64, w2: c64, basis: &BosonBasis) -> Result<Vec<c64>> {
    geom.check_off_lattice(w1)?;
    geom.check_off_lattice(w2)?;
    let n = geom.n_sites();
    if basis.n_sites() != n || basis.particles() != geom.particles() {
        return Err(invalid("basis must hold N/2 − 1 particles on the lattice"));
    }
    let z = geom.positions();
    let qh: Vec<c64> = z.iter().map(|&zj| ((zj - w1) * (zj - w2)).ln()).collect();
    // ln(z_j − z_k) for j < k
    let mut pair = vec![c64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for k in (j + 1)..n {
            pair[j * n + k] = (z[j] - z[k]).ln();
        }
    }
    let logs: Vec<c64> = basis
        .configs()
        .par_iter()
        .map(|&c| {
            let mut acc = c64::new(0.0, 0.0);
            let mut parity = 0usize;
            for j in 0..n {
                let nj = (c >> j) & 1;
                if nj == 1 {
                    acc += qh[j];
                    parity += j;
                }
                for k in (j + 1)..n {
                    let nk = (c >> k) & 1;
                    // exponent 2 n_j n_k − n_j − n_k is −1 when exactly one site is filled
                    if nj != nk {
                        acc -= pair[j * n + k];
                    }
                }
            }
            acc + c64::new(0.0, std::f64::consts::PI * (parity % 2) as f64)
        })
        .collect();
    let max = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let mut v: Vec<c64> = logs.iter().map(|l| (l - max).exp()).collect();
    crate::linalg::vec::normalize(&mut v);
    crate::linalg::vec::fix_phase(&mut v);
    Ok(v)
}

/// c_jk = 1/(z_j − z_k) (zero on the diagonal) and c̃_jl = 1/(z_j − w_l).
fn pair_coefficients(geom: &LatticeGeometry) -> Vec<c64> {
    let z = geom.positions();
    let n = z.len();
    let mut c = vec![c64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for k in 0..n {
            if j != k {
                c[j * n + k] = (z[j] - z[k]).inv();
            }
        }
    }
    c
}

/// Coefficient tables of H_β (or of ∂_s H_β, in which case F^C and F^D vanish).
#[derive(Clone, Debug)]
pub struct CoefficientTables {
    pub n: usize,
    pub beta: f64,
    pub fa: Vec<c64>,
    pub fb: Vec<c64>,
    pub fc: Vec<c64>,
    pub fd: Vec<c64>,
    pub fe: Vec<c64>,
}

impl CoefficientTables {
    pub fn new(geom: &LatticeGeometry, w: [c64; 2], beta: f64) -> Result<Self> {
        for &wl in &w {
            geom.check_off_lattice(wl)?;
        }
        let n = geom.n_sites();
        let z = geom.positions();
        let c = pair_coefficients(geom);
        let ct: Vec<[c64; 2]> = z.iter().map(|&zj| [(zj - w[0]).inv(), (zj - w[1]).inv()]).collect();
        let cc = |i: usize, j: usize| c[i * n + j];
        let mut fa = vec![c64::new(0.0, 0.0); n * n];
        let mut fb = vec![c64::new(0.0, 0.0); n * n];
        let mut fc = vec![c64::new(0.0, 0.0); n * n * n];
        let mut fd = vec![c64::new(0.0, 0.0); n * n * n];
        let mut fe = vec![c64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut a = c64::new(2.0 * cc(i, j).norm_sqr(), 0.0);
                let mut b = beta * cc(i, j).norm_sqr() * c64::new(1.0, 0.0);
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    a += cc(i, k).conj() * cc(i, j) + cc(j, i).conj() * cc(j, k) + cc(k, i).conj() * cc(k, j);
                    let t = cc(i, j).conj() * cc(i, k);
                    b -= 2.0 * (t + t.conj());
                    fc[(i * n + j) * n + k] =
                        -2.0 * (cc(i, k).conj() * cc(i, j) + cc(j, i).conj() * cc(j, k)) + beta * cc(k, i).conj() * cc(k, j);
                    fd[(i * n + j) * n + k] = 4.0 * cc(i, j).conj() * cc(i, k);
                }
                for l in 0..2 {
                    a -= cc(i, j) * ct[i][l].conj() + cc(j, i).conj() * ct[j][l];
                    let t = cc(i, j) * ct[i][l].conj();
                    b += 2.0 * (t + t.conj());
                }
                fa[i * n + j] = a;
                fb[i * n + j] = b;
            }
            let mut e = c64::new(0.0, 0.0);
            let row_sum: c64 = (0..n).filter(|&j| j != i).map(|j| cc(i, j)).sum();
            for j in 0..n {
                if j != i {
                    e += cc(i, j).norm_sqr();
                    for l in 0..2 {
                        let t = cc(i, j) * ct[i][l].conj();
                        e -= t + t.conj();
                    }
                }
            }
            e += row_sum.norm_sqr();
            e += (ct[i][0] + ct[i][1]).norm_sqr();
            fe[i] = e;
        }
        Ok(Self { n, beta, fa, fb, fc, fd, fe })
    }

    /// Tables of ∂_s H_β for quasihole velocities dw (only c̃ depends on s).
    pub fn derivative(geom: &LatticeGeometry, w: [c64; 2], dw: [c64; 2]) -> Result<Self> {
        for &wl in &w {
            geom.check_off_lattice(wl)?;
        }
        let n = geom.n_sites();
        let z = geom.positions();
        let c = pair_coefficients(geom);
        let ct: Vec<[c64; 2]> = z.iter().map(|&zj| [(zj - w[0]).inv(), (zj - w[1]).inv()]).collect();
        // ∂_s (z_j − w_l)^{-1} = w_l' (z_j − w_l)^{-2}
        let dct: Vec<[c64; 2]> = ct.iter().map(|t| [dw[0] * t[0] * t[0], dw[1] * t[1] * t[1]]).collect();
        let cc = |i: usize, j: usize| c[i * n + j];
        let mut fa = vec![c64::new(0.0, 0.0); n * n];
        let mut fb = vec![c64::new(0.0, 0.0); n * n];
        let mut fe = vec![c64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut a = c64::new(0.0, 0.0);
                let mut b = c64::new(0.0, 0.0);
                for l in 0..2 {
                    a -= cc(i, j) * dct[i][l].conj() + cc(j, i).conj() * dct[j][l];
                    let t = cc(i, j) * dct[i][l].conj();
                    b += 2.0 * (t + t.conj());
                }
                fa[i * n + j] = a;
                fb[i * n + j] = b;
            }
            let mut e = c64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    for l in 0..2 {
                        let t = cc(i, j) * dct[i][l].conj();
                        e -= t + t.conj();
                    }
                }
            }
            let s = ct[i][0] + ct[i][1];
            let ds = dct[i][0] + dct[i][1];
            e += ds.conj() * s + s.conj() * ds;
            fe[i] = e;
        }
        Ok(Self { n, beta: 0.0, fa, fb, fc: Vec::new(), fd: Vec::new(), fe })
    }

    /// Assembles Σ F^A d†d + Σ F^B nn + Σ F^C d†dn + Σ F^D nnn + Σ F^E n on a basis.
    pub fn assemble(&self, basis: &BosonBasis) -> Result<Csr<c64>> {
        let n = self.n;
        if basis.n_sites() != n {
            return Err(invalid("basis built for a different lattice"));
        }
        let three = !self.fc.is_empty();
        let columns: Vec<Vec<(usize, c64)>> = basis
            .configs()
            .par_iter()
            .enumerate()
            .map(|(col, &cfg)| {
                let occ: Vec<usize> = (0..n).filter(|&j| (cfg >> j) & 1 == 1).collect();
                let emp: Vec<usize> = (0..n).filter(|&j| (cfg >> j) & 1 == 0).collect();
                let mut diag = c64::new(0.0, 0.0);
                for &i in &occ {
                    diag += self.fe[i];
                    for &j in &occ {
                        if j != i {
                            diag += self.fb[i * n + j];
                            if three {
                                for &k in &occ {
                                    if k != i && k != j {
                                        diag += self.fd[(i * n + j) * n + k];
                                    }
                                }
                            }
                        }
                    }
                }
                let mut entries = Vec::with_capacity(1 + occ.len() * emp.len());
                entries.push((col, diag));
                for &j in &occ {
                    for &i in &emp {
                        let mut amp = self.fa[i * n + j];
                        if three {
                            for &k in &occ {
                                if k != j {
                                    amp += self.fc[(i * n + j) * n + k];
                                }
                            }
                        }
                        let target = cfg ^ (1 << j) ^ (1 << i);
                        let row = basis.index(target).expect("hop stays in the sector");
                        entries.push((row, amp));
                    }
                }
                entries
            })
            .collect();
        // conjugating column c of a Hermitian matrix gives its row c
        let rows = columns.into_iter().map(|col| col.into_iter().map(|(r, v)| (r, v.conj())).collect()).collect();
        Csr::from_rows(basis.dim(), rows)?.hermitian_part()
    }
}

/// Λ_j (to N_p − 1 particles) and Γ_j (to N_p − 2 particles) for every site j.
pub fn annihilators(geom: &LatticeGeometry, w: [c64; 2], basis: &BosonBasis) -> Result<(Vec<Csr<c64>>, Vec<Csr<c64>>)> {
    for &wl in &w {
        geom.check_off_lattice(wl)?;
    }
    let n = geom.n_sites();
    let p = basis.particles();
    let c = pair_coefficients(geom);
    let z = geom.positions();
    let lower1 = if p >= 1 { Some(BosonBasis::new(n, p - 1)?) } else { None };
    let lower2 = if p >= 2 { Some(BosonBasis::new(n, p - 2)?) } else { None };
    let mut lambdas = Vec::with_capacity(n);
    let mut gammas = Vec::with_capacity(n);
    for j in 0..n {
        let ctj: c64 = w.iter().map(|&wl| (z[j] - wl).inv()).sum();
        let mut lt = Vec::new();
        let mut gt = Vec::new();
        for (col, &cfg) in basis.configs().iter().enumerate() {
            let nj = (cfg >> j) & 1 == 1;
            if let Some(b1) = &lower1 {
                for k in 0..n {
                    if k == j {
                        continue;
                    }
                    let nk = (cfg >> k) & 1 == 1;
                    if nk {
                        lt.push((b1.index(cfg ^ (1 << k)).unwrap(), col, c[j * n + k]));
                    }
                    if nj {
                        let sign = if nk { 1.0 } else { -1.0 };
                        lt.push((b1.index(cfg ^ (1 << j)).unwrap(), col, -c[j * n + k] * sign));
                    }
                }
                if nj {
                    lt.push((b1.index(cfg ^ (1 << j)).unwrap(), col, -ctj));
                }
            }
            if let Some(b2) = &lower2 {
                if nj {
                    for k in 0..n {
                        if k != j && (cfg >> k) & 1 == 1 {
                            gt.push((b2.index(cfg ^ (1 << j) ^ (1 << k)).unwrap(), col, c[j * n + k]));
                        }
                    }
                }
            }
        }
        let d1 = lower1.as_ref().map_or(0, |b| b.dim());
        let d2 = lower2.as_ref().map_or(0, |b| b.dim());
        lambdas.push(Csr::from_triplets(d1, basis.dim(), &lt)?);
        gammas.push(Csr::from_triplets(d2, basis.dim(), &gt)?);
    }
    Ok((lambdas, gammas))
}

/// Σ_j Λ†_jΛ_j + β Σ_j Γ†_jΓ_j from explicit operator products (small lattices only).
pub fn direct_hamiltonian(geom: &LatticeGeometry, w: [c64; 2], beta: f64, basis: &BosonBasis) -> Result<Csr<c64>> {
    let (lambdas, gammas) = annihilators(geom, w, basis)?;
    let mut h = Csr::from_rows(basis.dim(), vec![Vec::new(); basis.dim()])?;
    for l in &lambdas {
        h = h.linear_combination(1.0, &l.adjoint().matmul(l)?, 1.0)?;
    }
    for g in &gammas {
        h = h.linear_combination(1.0, &g.adjoint().matmul(g)?, beta)?;
    }
    Ok(h)
}

/// H_β(s) along the quasihole path.
#[derive(Clone, Debug)]
pub struct FqhFamily {
    pub geom: LatticeGeometry,
    pub path: QuasiholePath,
    pub beta: f64,
    pub basis: Arc<BosonBasis>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FqhSpec {
    pub lx: usize,
    pub ly: usize,
    pub beta: f64,
}

impl FqhFamily {
    pub fn new(lx: usize, ly: usize, beta: f64) -> Result<Self> {
        let geom = LatticeGeometry::new(lx, ly)?;
        let path = QuasiholePath::standard(&geom)?;
        let basis = Arc::new(BosonBasis::new(geom.n_sites(), geom.particles())?);
        Ok(Self { geom, path, beta, basis })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn positions(&self, s: f64) -> Result<[c64; 2]> {
        Ok([self.path.w1, self.path.w2(s)?])
    }

    pub fn tables(&self, s: f64) -> Result<CoefficientTables> {
        CoefficientTables::new(&self.geom, self.positions(s)?, self.beta)
    }

    pub fn hamiltonian(&self, s: f64) -> Result<SparseOp> {
        Ok(SparseOp::Complex(self.tables(s)?.assemble(&self.basis)?))
    }

    pub fn derivative(&self, s: f64) -> Result<SparseOp> {
        let w = self.positions(s)?;
        let t = CoefficientTables::derivative(&self.geom, w, [c64::new(0.0, 0.0), self.path.dw2(s)?])?;
        Ok(SparseOp::Complex(t.assemble(&self.basis)?))
    }

    pub fn reference_state(&self, s: f64) -> Result<Vec<c64>> {
        let w = self.positions(s)?;
        laughlin_state(&self.geom, w[0], w[1], &self.basis)
    }

    /// Lower rows against upper rows.
    pub fn bipartition(&self) -> Bipartition {
        Bipartition::Mask { n_sites: self.geom.n_sites(), mask: self.geom.lower_half_mask() }
    }
}

/// Page value [N ln 2 − 1]/2 for the half-lattice cut.
pub fn page_value(n_sites: usize) -> f64 {
    (n_sites as f64 * std::f64::consts::LN_2 - 1.0) / 2.0
}
