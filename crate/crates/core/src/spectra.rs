//! Diagonalization and static diagnostics: eigenpairs, level statistics,
//! entanglement entropy and scar identification.

use std::collections::HashMap;

use faer::Mat;
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::hilbert::SectorBasis;
use crate::linalg::{eigh, lanczos_lowest, vec as v, Eigenvectors, LanczosOptions, SparseOp};

/// Mean r for Poisson, GOE and GUE spectra.
pub const R_POISSON: f64 = 0.386;
pub const R_GOE: f64 = 0.536;
pub const R_GUE: f64 = 0.603;

/// Energies closer than this (relative to max(1, |E|)) count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub energies: Vec<f64>,
    pub vectors: Eigenvectors,
    pub scar: Option<ScarInfo>,
}

#[derive(Clone, Debug)]
pub struct ScarInfo {
    pub index: usize,
    /// |⟨ref|scar⟩|² after rotation within a degenerate subspace.
    pub overlap: f64,
    /// Indices of eigenvectors degenerate with the scar (including itself).
    pub degenerate: Vec<usize>,
    /// The scar vector; differs from column `index` only inside a degenerate subspace.
    pub state: Vec<c64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn vector(&self, n: usize) -> Vec<c64> {
        self.vectors.column(n)
    }

    pub fn scar_index(&self) -> Option<usize> {
        self.scar.as_ref().map(|s| s.index)
    }

    /// Locates the eigenvector with the largest overlap with `reference`.
    pub fn identify_scar(&mut self, reference: &[c64]) -> Result<()> {
        if reference.len() != self.vectors.dim() {
            return Err(invalid("reference state has the wrong dimension"));
        }
        let amps = self.vectors.project(reference);
        let index = amps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .map(|(i, _)| i)
            .ok_or(Error::ZeroState)?;
        let e = self.energies[index];
        let tol = DEGENERACY_TOL * e.abs().max(1.0);
        let degenerate: Vec<usize> = (0..self.dim()).filter(|&j| (self.energies[j] - e).abs() < tol).collect();
        let state = if degenerate.len() == 1 {
            self.vector(index)
        } else {
            // rotate inside the degenerate subspace towards the reference
            let mut x = vec![c64::new(0.0, 0.0); self.vectors.dim()];
            for &j in &degenerate {
                v::axpy(amps[j], &self.vector(j), &mut x);
            }
            if v::normalize(&mut x) == 0.0 {
                return Err(Error::ZeroState);
            }
            x
        };
        let overlap = v::fidelity(reference, &state);
        self.scar = Some(ScarInfo { index, overlap, degenerate, state });
        Ok(())
    }

    /// max_n ‖H v_n − E_n v_n‖.
    pub fn max_residual(&self, h: &SparseOp) -> f64 {
        (0..self.dim())
            .into_par_iter()
            .map(|n| {
                let x = self.vector(n);
                let mut r = h.apply(&x);
                v::axpy(c64::new(-self.energies[n], 0.0), &x, &mut r);
                v::norm(&r)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Complete dense eigendecomposition; the scar is located when a reference is given.
pub fn full_diagonalize(h: &SparseOp, reference: Option<&[c64]>) -> Result<EigenDecomposition> {
    let (energies, vectors) = eigh(h).map_err(|e| match e {
        Error::TooLarge { dim, limit } => Error::Unsupported(format!(
            "dimension {dim} exceeds the dense limit {limit}; use lanczos_lowest instead"
        )),
        other => other,
    })?;
    let mut d = EigenDecomposition { energies, vectors, scar: None };
    if let Some(r) = reference {
        d.identify_scar(r)?;
    }
    Ok(d)
}

#[derive(Clone, Debug)]
pub struct PartialSpectrum {
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<c64>>,
    pub residuals: Vec<f64>,
}

/// The `k` lowest eigenpairs by Lanczos with full reorthogonalization.
pub fn lanczos_lowest_pairs(h: &SparseOp, k: usize, opts: &LanczosOptions) -> Result<PartialSpectrum> {
    let (energies, vectors, residuals) = lanczos_lowest(|x, y| h.matvec(x, y), h.dim(), k, opts)?;
    Ok(PartialSpectrum { energies, vectors, residuals })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelStatistics {
    pub r: Vec<f64>,
    pub r_ave: f64,
    /// (bin lower edge, bin upper edge, normalized density).
    pub histogram: Vec<(f64, f64, f64)>,
    /// Number of r entries that came from duplicated energies.
    pub duplicates: usize,
}

/// Ratios r_n = min(δ_n, δ_{n+1}) / max(δ_n, δ_{n+1}) of consecutive gaps.
/// `exclude` lists indices into `energies` that are dropped first.
pub fn level_statistics(energies: &[f64], exclude: &[usize], bins: usize) -> Result<LevelStatistics> {
    let e: Vec<f64> = energies.iter().enumerate().filter(|(i, _)| !exclude.contains(i)).map(|(_, &x)| x).collect();
    if e.len() < 3 {
        return Err(invalid("level statistics need at least three levels"));
    }
    if e.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("energies must be sorted ascending"));
    }
    if bins == 0 {
        return Err(invalid("histogram needs at least one bin"));
    }
    let gaps: Vec<f64> = e.windows(2).map(|w| w[1] - w[0]).collect();
    let tol = DEGENERACY_TOL * e.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut duplicates = 0;
    let r: Vec<f64> = gaps
        .windows(2)
        .map(|g| {
            if g[0] < tol || g[1] < tol {
                duplicates += 1;
                return 0.0;
            }
            g[0].min(g[1]) / g[0].max(g[1])
        })
        .collect();
    let r_ave = r.iter().sum::<f64>() / r.len() as f64;
    let width = 1.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &r {
        counts[((x / width) as usize).min(bins - 1)] += 1;
    }
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (k as f64 * width, (k + 1) as f64 * width, c as f64 / (r.len() as f64 * width)))
        .collect();
    Ok(LevelStatistics { r, r_ave, histogram, duplicates })
}

/// How configurations are split between subsystem A and its complement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bipartition {
    /// First N/2 sites of a spin-1 chain.
    HalfChain { n: usize },
    /// Hardcore bosons; A is the set bits of `mask`.
    Mask { n_sites: usize, mask: u64 },
}

impl Bipartition {
    /// (A part, Ā part, conserved charge of A).
    fn split(&self, c: u64) -> (u64, u64, i32) {
        match *self {
            Self::HalfChain { n } => {
                let d = 3u64.pow((n / 2) as u32);
                let a = c % d;
                let mut x = a;
                let mut q = 0i32;
                for _ in 0..n / 2 {
                    q += (x % 3) as i32 - 1;
                    x /= 3;
                }
                (a, c / d, q)
            }
            Self::Mask { mask, .. } => (c & mask, c & !mask, (c & mask).count_ones() as i32),
        }
    }

    /// min(|A|, |Ā|)·ln(local dimension).
    pub fn max_entropy(&self) -> f64 {
        match *self {
            Self::HalfChain { n } => (n / 2) as f64 * 3f64.ln(),
            Self::Mask { n_sites, mask } => {
                let a = mask.count_ones() as usize;
                a.min(n_sites - a) as f64 * 2f64.ln()
            }
        }
    }
}

/// Von Neumann entropy −Tr ρ_A ln ρ_A of a state given by its configuration amplitudes.
pub fn entanglement_entropy(amplitudes: &[(u64, c64)], cut: &Bipartition) -> Result<f64> {
    struct Block {
        rows: HashMap<u64, usize>,
        cols: HashMap<u64, usize>,
        entries: Vec<(usize, usize, c64)>,
    }
    let mut blocks: HashMap<i32, Block> = HashMap::new();
    for &(c, amp) in amplitudes {
        let (a, b, q) = cut.split(c);
        let blk = blocks.entry(q).or_insert_with(|| Block { rows: HashMap::new(), cols: HashMap::new(), entries: vec![] });
        let nr = blk.rows.len();
        let i = *blk.rows.entry(a).or_insert(nr);
        let nc = blk.cols.len();
        let j = *blk.cols.entry(b).or_insert(nc);
        blk.entries.push((i, j, amp));
    }
    let mut norm = 0.0;
    let mut s = 0.0;
    let mut keys: Vec<i32> = blocks.keys().copied().collect();
    keys.sort_unstable();
    for q in keys {
        let blk = &blocks[&q];
        let mut m = Mat::<c64>::zeros(blk.rows.len(), blk.cols.len());
        for &(i, j, a) in &blk.entries {
            m[(i, j)] += a;
        }
        let sv = m.singular_values().map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
        for x in sv {
            let p = x * x;
            norm += p;
            if p > 1e-300 {
                s -= p * p.ln();
            }
        }
    }
    if (norm - 1.0).abs() > 1e-8 {
        return Err(invalid(format!("state is not normalized (norm² = {norm})")));
    }
    Ok(s.max(0.0))
}

/// Entanglement entropy of every eigenvector of `d`.
pub fn eigenstate_entropies<B: SectorBasis + Sync>(d: &EigenDecomposition, basis: &B, cut: &Bipartition) -> Result<Vec<f64>> {
    (0..d.dim()).into_par_iter().map(|n| entanglement_entropy(&basis.expand_vector(&d.vector(n)), cut)).collect()
}

/// Page value N/2·ln3 − 1/2 for a spin-1 chain cut in half.
pub fn page_value_chain(n: usize) -> f64 {
    0.5 * n as f64 * 3f64.ln() - 0.5
}

/// Mean of `values` over the central `fraction` of indices.
pub fn central_mean(values: &[f64], fraction: f64) -> f64 {
    let n = values.len();
    let k = ((n as f64 * fraction).round() as usize).max(1).min(n);
    let start = (n - k) / 2;
    values[start..start + k].iter().sum::<f64>() / k as f64
}
