//! Transfer-matrix evaluation of overlaps and local correlators of the MPS
//! and of its scar-tower descendants at large N.
//!
//! The tower states are handled through the generating state
//! Π_j (1 + ξ(−1)^j (S⁺_j)²)|Φ₀⟩, whose site tensors are linear in ξ. Transfer
//! matrices then carry polynomials in (ξ̄, ξ) truncated at degree ℓ_max in each
//! variable, and the coefficient of (ξ̄ξ)^ℓ yields (ℓ!)⁻² times the tower-state
//! quantity. For ℓ = 0 everything reduces to plain 4×4 transfer matrices.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fit;
use crate::mps_model::{k0_derivative, k0_state, mps_tensor_derivatives, mps_tensors, Tensors};

/// 4×4 matrix whose entries are polynomials in (ξ̄, ξ) truncated at degree `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMat {
    l: usize,
    data: Vec<f64>,
}

impl PolyMat {
    fn stride(l: usize) -> usize {
        (l + 1) * (l + 1)
    }

    pub fn zeros(l: usize) -> Self {
        Self { l, data: vec![0.0; 16 * Self::stride(l)] }
    }

    pub fn identity(l: usize) -> Self {
        let mut m = Self::zeros(l);
        for i in 0..4 {
            m.data[(i * 4 + i) * Self::stride(l)] = 1.0;
        }
        m
    }

    #[inline]
    fn at(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.data[(i * 4 + j) * Self::stride(self.l) + a * (self.l + 1) + b]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize, a: usize, b: usize) -> &mut f64 {
        let st = Self::stride(self.l);
        &mut self.data[(i * 4 + j) * st + a * (self.l + 1) + b]
    }

    pub fn mul(&self, other: &Self) -> Self {
        let l = self.l;
        let st = Self::stride(l);
        let mut out = Self::zeros(l);
        for i in 0..4 {
            for k in 0..4 {
                let x = &self.data[(i * 4 + k) * st..(i * 4 + k + 1) * st];
                if x.iter().all(|v| *v == 0.0) {
                    continue;
                }
                for j in 0..4 {
                    let y = &other.data[(k * 4 + j) * st..(k * 4 + j + 1) * st];
                    let z = &mut out.data[(i * 4 + j) * st..(i * 4 + j + 1) * st];
                    for a in 0..=l {
                        for b in 0..=l {
                            let xv = x[a * (l + 1) + b];
                            if xv == 0.0 {
                                continue;
                            }
                            for a2 in 0..=(l - a) {
                                for b2 in 0..=(l - b) {
                                    z[(a + a2) * (l + 1) + b + b2] += xv * y[a2 * (l + 1) + b2];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn scale(&mut self, f: f64) {
        self.data.iter_mut().for_each(|v| *v *= f);
    }

    pub fn add_assign(&mut self, other: &Self, w: f64) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += w * y;
        }
    }

    /// Coefficient of (ξ̄ξ)^ℓ in the trace.
    pub fn trace_coefficient(&self, ell: usize) -> f64 {
        (0..4).map(|i| self.at(i, i, ell, ell)).sum()
    }

    /// Plain 4×4 matrix of the constant term.
    fn constant(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = self.at(i, j, 0, 0);
            }
        }
        m
    }
}

/// Dominant eigenvalue of a 4×4 matrix with a simple, gapped leading eigenvalue.
fn dominant_eigenvalue(m: &[[f64; 4]; 4]) -> Result<f64> {
    let mut v = [1.0, 0.3, -0.2, 0.7];
    let mut lam = 0.0;
    for it in 0..2000 {
        let mut w = [0.0; 4];
        for i in 0..4 {
            for j in 0..4 {
                w[i] += m[i][j] * v[j];
            }
        }
        let num: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        let new = num / den;
        let nrm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Err(Error::Numerical("transfer matrix annihilates the start vector".into()));
        }
        v = w.map(|a| a / nrm);
        if it > 10 && (new - lam).abs() <= 1e-15 * new.abs() {
            return Ok(new);
        }
        lam = new;
    }
    // fall back to the growth rate of the trace of high powers
    Err(Error::Numerical("power iteration on the transfer matrix did not converge (no spectral gap?)".into()))
}

/// Single-variable polynomial 2×2 matrices: list of (degree, matrix).
type SiteTerms = [Vec<(usize, [f64; 4])>; 3];

fn site_terms(t: &Tensors, site: usize, tower: bool) -> SiteTerms {
    let mut terms: SiteTerms = [vec![(0, t[0])], vec![(0, t[1])], vec![(0, t[2])]];
    if tower {
        // (S⁺)²|−⟩ = 2|+⟩ with sign (−1)^j, sites numbered from 1
        let sign = if site % 2 == 0 { 2.0 } else { -2.0 };
        terms[2].push((1, t[0].map(|x| sign * x)));
    }
    terms
}

fn mul2(x: &[f64; 4], y: &[f64; 4]) -> [f64; 4] {
    [x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3], x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3]]
}

fn mul_terms(x: &[(usize, [f64; 4])], y: &[(usize, [f64; 4])], l: usize) -> Vec<(usize, [f64; 4])> {
    let mut out = Vec::new();
    for (dx, a) in x {
        for (dy, b) in y {
            if dx + dy <= l {
                out.push((dx + dy, mul2(a, b)));
            }
        }
    }
    out
}

/// Σ over (bra, ket) polynomial 2×2 matrices weighted by w of conj(bra) ⊗ ket.
fn kron_into(out: &mut PolyMat, bra: &[(usize, [f64; 4])], ket: &[(usize, [f64; 4])], w: f64) {
    for (da, x) in bra {
        for (db, y) in ket {
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for m in 0..2 {
                            *out.at_mut(i * 2 + k, j * 2 + m, *da, *db) += w * x[i * 2 + j] * y[k * 2 + m];
                        }
                    }
                }
            }
        }
    }
}

/// Transfer matrix over `k` consecutive sites with operator `op` (3^k × 3^k,
/// row-major, leftmost site most significant) inserted; `None` means identity.
fn block_transfer(bras: &[SiteTerms], kets: &[SiteTerms], op: Option<&[f64]>, l: usize) -> PolyMat {
    let k = bras.len();
    let dim = 3usize.pow(k as u32);
    let strings = |terms: &[SiteTerms]| -> Vec<Vec<(usize, [f64; 4])>> {
        (0..dim)
            .map(|idx| {
                let mut acc = vec![(0usize, [1.0, 0.0, 0.0, 1.0])];
                for s in 0..k {
                    let m = (idx / 3usize.pow((k - 1 - s) as u32)) % 3;
                    acc = mul_terms(&acc, &terms[s][m], l);
                }
                acc
            })
            .collect()
    };
    let bs = strings(bras);
    let ks = strings(kets);
    let mut out = PolyMat::zeros(l);
    match op {
        None => {
            for idx in 0..dim {
                kron_into(&mut out, &bs[idx], &ks[idx], 1.0);
            }
        }
        Some(o) => {
            for r in 0..dim {
                for c in 0..dim {
                    let w = o[r * dim + c];
                    if w != 0.0 {
                        kron_into(&mut out, &bs[r], &ks[c], w);
                    }
                }
            }
        }
    }
    out
}

/// Ring of N sites with cached products of consecutive (rescaled) transfer matrices.
struct Ring {
    n: usize,
    l: usize,
    bra: [SiteTerms; 2],
    ket: [SiteTerms; 2],
    /// ln of the per-site rescaling factor
    log_eta: f64,
    eta: f64,
    /// prefix[len][p]: product of `len` sites starting at a site of parity p
    prefix: Vec<[PolyMat; 2]>,
}

impl Ring {
    fn new(n: usize, l: usize, bra: &Tensors, ket: &Tensors, tower: bool, with_prefix: bool) -> Result<Self> {
        let bra = [site_terms(bra, 0, tower), site_terms(bra, 1, tower)];
        let ket = [site_terms(ket, 0, tower), site_terms(ket, 1, tower)];
        let t0 = block_transfer(&bra[0..1], &ket[0..1], None, l);
        let t1 = block_transfer(&bra[1..2], &ket[1..2], None, l);
        let cell = t1.mul(&t0);
        let eta2 = dominant_eigenvalue(&cell.constant())?;
        if eta2 <= 0.0 {
            return Err(Error::Numerical("leading transfer-matrix eigenvalue is not positive".into()));
        }
        let eta = eta2.sqrt();
        let mut ring = Self { n, l, bra, ket, log_eta: eta.ln(), eta, prefix: Vec::new() };
        if with_prefix {
            let mut t = [t0, t1];
            t[0].scale(1.0 / eta);
            t[1].scale(1.0 / eta);
            ring.prefix.push([PolyMat::identity(l), PolyMat::identity(l)]);
            for len in 0..n {
                let p0 = ring.prefix[len][0].mul(&t[len % 2]);
                let p1 = ring.prefix[len][1].mul(&t[(1 + len) % 2]);
                ring.prefix.push([p0, p1]);
            }
        }
        Ok(ring)
    }

    /// ln|coefficient| and sign of (ξ̄ξ)^ℓ in Tr[Π_j E_j] using repeated squaring.
    fn log_trace(&self, ell: usize) -> (f64, f64) {
        let mut t0 = block_transfer(&self.bra[0..1], &self.ket[0..1], None, self.l);
        let mut t1 = block_transfer(&self.bra[1..2], &self.ket[1..2], None, self.l);
        t0.scale(1.0 / self.eta);
        t1.scale(1.0 / self.eta);
        let mut base = t1.mul(&t0);
        let mut acc = PolyMat::identity(self.l);
        let mut log_acc = 0.0;
        let mut log_base = 0.0;
        let mut e = self.n / 2;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
                log_acc += log_base;
                let s = max_abs(&acc);
                acc.scale(1.0 / s);
                log_acc += s.ln();
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
                log_base *= 2.0;
                let s = max_abs(&base);
                base.scale(1.0 / s);
                log_base += s.ln();
            }
        }
        let c = acc.trace_coefficient(ell);
        (log_acc + c.abs().ln() + self.n as f64 * self.log_eta, c.signum())
    }

    /// Site parity index of a 1-based site number.
    fn parity(site: usize) -> usize {
        site % 2
    }

    /// Insertion transfer matrix over k sites beginning at 1-based `site`, rescaled.
    fn insertion(&self, site: usize, k: usize, op: Option<&[f64]>, bra_override: Option<&Tensors>, ket_override: Option<&Tensors>) -> PolyMat {
        let bras: Vec<SiteTerms> = (0..k)
            .map(|q| match (q, bra_override) {
                (0, Some(t)) => site_terms(t, site, self.l > 0),
                _ => self.bra[Self::parity(site + q)].clone(),
            })
            .collect();
        let kets: Vec<SiteTerms> = (0..k)
            .map(|q| match (q, ket_override) {
                (0, Some(t)) => site_terms(t, site, self.l > 0),
                _ => self.ket[Self::parity(site + q)].clone(),
            })
            .collect();
        let mut m = block_transfer(&bras, &kets, op, self.l);
        m.scale(self.eta.powi(-(k as i32)));
        m
    }

    /// Coefficient of (ξ̄ξ)^ℓ of the rescaled trace with insertions given as
    /// (1-based start site, block matrix, block length), sorted and disjoint.
    fn trace_with(&self, ins: &[(usize, &PolyMat, usize)], ell: usize) -> f64 {
        let mut acc = PolyMat::identity(self.l);
        let first = ins[0].0;
        let mut pos = first;
        for (idx, &(start, m, len)) in ins.iter().enumerate() {
            debug_assert!(start >= pos);
            let gap = start - pos;
            if gap > 0 {
                acc = acc.mul(&self.prefix[gap][Self::parity(pos)]);
            }
            acc = acc.mul(m);
            pos = start + len;
            if idx == ins.len() - 1 {
                let rest = first + self.n - pos;
                if rest > 0 {
                    acc = acc.mul(&self.prefix[rest][Self::parity(pos)]);
                }
            }
        }
        acc.trace_coefficient(ell)
    }

    /// Rescaled coefficient of (ξ̄ξ)^ℓ in the plain trace.
    fn norm_coefficient(&self, ell: usize) -> f64 {
        self.prefix[self.n][1].trace_coefficient(ell)
    }
}

fn max_abs(m: &PolyMat) -> f64 {
    m.data.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300)
}

fn check(n: usize, ell: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(invalid(format!("transfer-matrix engine needs even N ≥ 4, got {n}")));
    }
    if ell > n / 2 {
        return Err(invalid("quasiparticle count exceeds N/2"));
    }
    Ok(())
}

/// ln|⟨Φ_ℓ(a)|Φ_ℓ(b)⟩| for unnormalized tower states (ℓ = 0 is the MPS itself),
/// up to the ℓ-independent factor (ℓ!)².
pub fn log_overlap(n: usize, a: f64, b: f64, ell: usize) -> Result<f64> {
    check(n, ell)?;
    let ring = Ring::new(n, ell, &mps_tensors(a), &mps_tensors(b), ell > 0, false)?;
    Ok(ring.log_trace(ell).0)
}

/// ln 𝒞(s) = ln |⟨Φ_ℓ(0)|Φ_ℓ(s)⟩|² for normalized states.
pub fn log_instantaneous_fidelity(n: usize, s: f64, ell: usize) -> Result<f64> {
    Ok(2.0 * log_overlap(n, 0.0, s, ell)? - log_overlap(n, 0.0, 0.0, ell)? - log_overlap(n, s, s, ell)?)
}

/// 𝒞(s); may underflow to zero at large N, see [`log_instantaneous_fidelity`].
pub fn instantaneous_fidelity(n: usize, s: f64) -> Result<f64> {
    Ok(log_instantaneous_fidelity(n, s, 0)?.exp())
}

#[derive(Clone, Debug, Serialize)]
pub struct CatastropheFit {
    pub n: usize,
    pub ell: usize,
    pub c_n: f64,
    pub rms_residual: f64,
    pub s: Vec<f64>,
    pub minus_log_c: Vec<f64>,
}

/// Least-squares fit of −ln 𝒞(s) = C_N s² on `points` equally spaced s in (0, s_max].
pub fn catastrophe_exponent(n: usize, ell: usize, s_max: f64, points: usize) -> Result<CatastropheFit> {
    if !(s_max > 0.0 && s_max <= 1.0) || points == 0 {
        return Err(invalid("fit window must be (0, s_max] with s_max ≤ 1"));
    }
    let s: Vec<f64> = (1..=points).map(|k| s_max * k as f64 / points as f64).collect();
    let y = s.iter().map(|&x| log_instantaneous_fidelity(n, x, ell).map(|v| -v)).collect::<Result<Vec<_>>>()?;
    if y.windows(2).any(|w| w[1] < w[0] - 1e-12) {
        return Err(Error::Numerical("instantaneous fidelity is not monotone in the fit window".into()));
    }
    let x2: Vec<f64> = s.iter().map(|x| x * x).collect();
    let (c, rms) = fit::through_origin(&x2, &y)?;
    Ok(CatastropheFit { n, ell, c_n: c, rms_residual: rms, s, minus_log_c: y })
}

/// Two-site operator ∂_s(|K₀⟩⟨K₀|) as a row-major 9×9 matrix.
pub fn k0_projector_derivative(s: f64) -> [f64; 81] {
    let k = k0_state(s);
    let dk = k0_derivative(s);
    let mut v = [0.0; 81];
    for i in 0..9 {
        for j in 0..9 {
            v[9 * i + j] = dk[i] * k[j] + k[i] * dk[j];
        }
    }
    v
}

fn three_site(left: bool, op: &[f64; 81]) -> Vec<f64> {
    // op ⊗ 1 (left) or 1 ⊗ op (right) on three sites
    let mut out = vec![0.0; 729];
    for r in 0..27 {
        for c in 0..27 {
            let (ra, rb, rc) = (r / 9, (r / 3) % 3, r % 3);
            let (ca, cb, cc) = (c / 9, (c / 3) % 3, c % 3);
            out[r * 27 + c] = if left {
                if rc == cc { op[(3 * ra + rb) * 9 + 3 * ca + cb] } else { 0.0 }
            } else if ra == ca {
                op[(3 * rb + rc) * 9 + 3 * cb + cc]
            } else {
                0.0
            };
        }
    }
    out
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let x = a[i * d + k];
            if x != 0.0 {
                for j in 0..d {
                    out[i * d + j] += x * b[k * d + j];
                }
            }
        }
    }
    out
}

/// Variance ⟨O²⟩ − ⟨O⟩² of O = Σ_i o_i for a two-site operator `op` in the
/// normalized tower state ℓ at deformation s.
pub fn bond_sum_variance(n: usize, s: f64, ell: usize, op: &[f64; 81]) -> Result<(f64, f64)> {
    check(n, ell)?;
    let t = mps_tensors(s);
    let ring = Ring::new(n, ell, &t, &t, ell > 0, true)?;
    let z = ring.norm_coefficient(ell);
    let sq = matmul(op, op, 9);
    // o_i o_{i+1} on sites (i, i+1, i+2) and o_i o_{i-1} on sites (i-1, i, i+1)
    let fwd = matmul(&three_site(true, op), &three_site(false, op), 27);
    let bwd = matmul(&three_site(false, op), &three_site(true, op), 27);
    let mut mean = [0.0; 2];
    let mut second = 0.0;
    for (pi, i) in [1usize, 2].into_iter().enumerate() {
        let x = ring.insertion(i, 2, Some(op), None, None);
        mean[pi] = ring.trace_with(&[(i, &x, 2)], ell) / z;
    }
    for (pi, i) in [1usize, 2].into_iter().enumerate() {
        let x = ring.insertion(i, 2, Some(op), None, None);
        let x2 = ring.insertion(i, 2, Some(&sq), None, None);
        let mut row = ring.trace_with(&[(i, &x2, 2)], ell) / z - mean[pi] * mean[pi];
        let f = ring.insertion(i, 3, Some(&fwd), None, None);
        row += ring.trace_with(&[(i, &f, 3)], ell) / z - mean[pi] * mean[1 - pi];
        // labels only matter through their parity, so site i-1 is written as i-1+N
        let b = ring.insertion(i - 1 + n, 3, Some(&bwd), None, None);
        row += ring.trace_with(&[(i - 1 + n, &b, 3)], ell) / z - mean[pi] * mean[1 - pi];
        for d in 2..=(n - 2) {
            let y = ring.insertion(i + d, 2, Some(op), None, None);
            let pj = (pi + d) % 2;
            row += ring.trace_with(&[(i, &x, 2), (i + d, &y, 2)], ell) / z - mean[pi] * mean[pj];
        }
        second += row;
    }
    let var = 0.5 * n as f64 * second;
    let total_mean = 0.5 * n as f64 * (mean[0] + mean[1]);
    Ok((total_mean, var))
}

/// δE = √(⟨V²⟩ − ⟨V⟩²) for V = 𝒥₀ Σ_i ∂_s(|K₀⟩⟨K₀|)_i in tower state ℓ.
pub fn force_uncertainty(n: usize, s: f64, ell: usize, j0: f64) -> Result<f64> {
    let (_, var) = bond_sum_variance(n, s, ell, &k0_projector_derivative(s))?;
    let var = var * j0 * j0;
    if var < -1e-12 {
        return Err(Error::Numerical(format!("negative force variance {var:e}")));
    }
    Ok(var.max(0.0).sqrt())
}

/// χ₀(s) = ⟨∂Φ|∂Φ⟩ − |⟨Φ|∂Φ⟩|² for the normalized tower state ℓ.
pub fn fidelity_susceptibility(n: usize, s: f64, ell: usize) -> Result<f64> {
    check(n, ell)?;
    let t = mps_tensors(s);
    let dt = mps_tensor_derivatives();
    let ring = Ring::new(n, ell, &t, &t, ell > 0, true)?;
    let z = ring.norm_coefficient(ell);
    let mut dd = 0.0;
    let mut first = 0.0;
    for i in [1usize, 2] {
        let both = ring.insertion(i, 1, None, Some(&dt), Some(&dt));
        let bra = ring.insertion(i, 1, None, Some(&dt), None);
        let ket_here = ring.insertion(i, 1, None, None, Some(&dt));
        first += ring.trace_with(&[(i, &ket_here, 1)], ell) / z;
        dd += ring.trace_with(&[(i, &both, 1)], ell) / z;
        for d in 1..n {
            let ket = ring.insertion(i + d, 1, None, None, Some(&dt));
            dd += ring.trace_with(&[(i, &bra, 1), (i + d, &ket, 1)], ell) / z;
        }
    }
    let half = 0.5 * n as f64;
    let chi = half * dd - (half * first).powi(2);
    if chi < -1e-10 * (half * dd).abs().max(1.0) {
        return Err(Error::Numerical(format!("negative susceptibility {chi:e}")));
    }
    Ok(chi.max(0.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct QslReport {
    pub n: usize,
    pub delta_e0: f64,
    pub c_n: f64,
    pub v_qsl: f64,
    /// δE₀/C_N, which must vanish with N for the bound to be meaningful.
    pub validity_ratio: f64,
}

/// v_QSL = δE₀/(2 C_N) for the MPS embedded with zero-energy coupling 𝒥₀.
pub fn qsl_bound(n: usize, j0: f64, s_max: f64, points: usize) -> Result<QslReport> {
    let fit = catastrophe_exponent(n, 0, s_max, points)?;
    let de = force_uncertainty(n, 0.0, 0, j0)?;
    Ok(QslReport { n, delta_e0: de, c_n: fit.c_n, v_qsl: de / (2.0 * fit.c_n), validity_ratio: de / fit.c_n })
}
