//! Deformed AKLT matrix-product state, its parent Hamiltonians and
//! the scar-tower Hamiltonian.

use std::sync::Arc;

use num_complex::Complex64 as c64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{SectorBasis, SpinBasis, SymmetrySector};
use crate::linalg::{Csr, SparseOp};

/// Couplings 𝒥⁺_m of the ground-state Hamiltonian for m = −2, …, 2.
pub const J_PLUS: [f64; 5] = [0.97545513805816, 0.84883205409987, 0.40823209824201, 0.32544692707096, 0.55079799361114];

/// Couplings 𝒥⁻_m = (−1)^m of the scar Hamiltonian.
pub const J_MINUS: [f64; 5] = [1.0, -1.0, 1.0, -1.0, 1.0];

/// Which parent Hamiltonian to build.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// H⁺: the MPS is the frustration-free ground state.
    Ground,
    /// H⁻: the MPS is a zero-energy scar in the middle of the spectrum.
    Scar,
    /// H_ST⁻ with tower spacing ω₀.
    Tower { omega0: f64 },
}

impl Variant {
    pub fn local_term(&self) -> LocalTermSpec {
        match *self {
            Variant::Ground => LocalTermSpec::single(J_PLUS),
            Variant::Scar => LocalTermSpec::single(J_MINUS),
            Variant::Tower { omega0 } => {
                let mut block = [[c64::new(0.0, 0.0); 3]; 3];
                for (i, row) in block.iter_mut().enumerate() {
                    row[i] = c64::new(J_MINUS[i], 0.0);
                }
                LocalTermSpec::tower(omega0, block)
            }
        }
    }

    /// Symmetry sector hosting the MPS for this variant.
    pub fn default_sector(&self) -> SymmetrySector {
        match self {
            Variant::Scar => SymmetrySector::full(0, 0, 1, 1),
            _ => SymmetrySector::with_reflection(0, 0, 1),
        }
    }

    /// Coefficient 𝒥₀ multiplying the s-dependent projector.
    pub fn j0(&self) -> f64 {
        self.local_term().coupling[2][2].re
    }
}

/// Hermitian 5×5 coupling matrix in the |K_m⟩ basis, m = −2, …, 2.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTermSpec {
    pub coupling: [[c64; 5]; 5],
}

impl LocalTermSpec {
    /// 𝒥₀|K₀⟩⟨K₀| + Σ_m 𝒥_m|J_{2,m}⟩⟨J_{2,m}|, couplings ordered m = −2, …, 2.
    pub fn single(j: [f64; 5]) -> Self {
        let mut coupling = [[c64::new(0.0, 0.0); 5]; 5];
        for m in 0..5 {
            coupling[m][m] = c64::new(j[m], 0.0);
        }
        Self { coupling }
    }

    /// ω₀/2 Σ_{m=1,2}|K_m⟩⟨K_m| + Σ_{m,m'≤0} 𝒥_{mm'}|K_m⟩⟨K_m'|, block ordered m = −2, −1, 0.
    pub fn tower(omega0: f64, block: [[c64; 3]; 3]) -> Self {
        let mut coupling = [[c64::new(0.0, 0.0); 5]; 5];
        for i in 0..3 {
            for j in 0..3 {
                coupling[i][j] = block[i][j];
            }
        }
        coupling[3][3] = c64::new(omega0 / 2.0, 0.0);
        coupling[4][4] = c64::new(omega0 / 2.0, 0.0);
        Self { coupling }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..5 {
            for j in 0..5 {
                if (self.coupling[i][j] - self.coupling[j][i].conj()).norm() > 1e-14 {
                    return Err(invalid("coupling matrix is not Hermitian"));
                }
            }
        }
        Ok(())
    }

    pub fn is_real(&self) -> bool {
        self.coupling.iter().flatten().all(|z| z.im == 0.0)
    }
}

/// λ_s of the deformed |K₀⟩ and its derivative.
pub fn lambda(s: f64) -> (f64, f64) {
    let u = (s + 2.0).powi(4);
    let w = (s - 2.0).powi(4);
    let du = 4.0 * (s + 2.0).powi(3);
    let dw = 4.0 * (s - 2.0).powi(3);
    let d = 4.0 * w + 2.0 * u;
    (u / d, 4.0 * (du * w - u * dw) / (d * d))
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) || s.is_nan() {
        return Err(invalid(format!("deformation s={s} outside [0, 1]")));
    }
    Ok(())
}

/// 2×2 tensors A^m(s) stored row-major, indexed by digit m + 1.
pub type Tensors = [[f64; 4]; 3];

pub fn mps_tensors(s: f64) -> Tensors {
    let a = (1.0 - s / 2.0) * (2.0f64 / 3.0).sqrt();
    let b = (1.0 + s / 2.0) / 3.0f64.sqrt();
    [[0.0, 0.0, -a, 0.0], [-b, 0.0, 0.0, b], [0.0, a, 0.0, 0.0]]
}

/// ∂_s A^m(s).
pub fn mps_tensor_derivatives() -> Tensors {
    let a = -0.5 * (2.0f64 / 3.0).sqrt();
    let b = 0.5 / 3.0f64.sqrt();
    [[0.0, 0.0, -a, 0.0], [-b, 0.0, 0.0, b], [0.0, a, 0.0, 0.0]]
}

#[inline]
fn mul2(x: &[f64; 4], y: &[f64; 4]) -> [f64; 4] {
    [x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3], x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3]]
}

/// Unnormalized amplitude Tr[A^{m₁} ⋯ A^{m_N}] of a base-3 configuration.
pub fn mps_amplitude(t: &Tensors, mut code: u64, n: usize) -> f64 {
    let mut acc = [1.0, 0.0, 0.0, 1.0];
    for _ in 0..n {
        acc = mul2(&acc, &t[(code % 3) as usize]);
        code /= 3;
    }
    acc[0] + acc[3]
}

/// Normalized MPS |Φ₀(s)⟩ in a symmetry-adapted basis.
pub fn mps_state_vector(n: usize, s: f64, basis: &SpinBasis) -> Result<Vec<c64>> {
    check_s(s)?;
    if basis.n_sites() != n {
        return Err(invalid("basis built for a different chain length"));
    }
    let t = mps_tensors(s);
    let mut v: Vec<c64> = (0..basis.dim())
        .into_par_iter()
        .map(|r| {
            basis
                .expand(r)
                .into_iter()
                .map(|(c, amp)| amp.conj() * mps_amplitude(&t, c, n))
                .sum()
        })
        .collect();
    if crate::linalg::vec::normalize(&mut v) == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok(v)
}

/// Two-site basis index 3·a + b for digits a (site i) and b (site i+1).
fn pair(a: usize, b: usize) -> usize {
    3 * a + b
}

/// |K_m⟩ for m ≠ 0 as 9-component vectors.
fn k_state(m: i32) -> [f64; 9] {
    let r = 0.5f64.sqrt();
    let mut v = [0.0; 9];
    match m {
        2 => v[pair(2, 2)] = 1.0,
        -2 => v[pair(0, 0)] = 1.0,
        1 => {
            v[pair(2, 1)] = r;
            v[pair(1, 2)] = r;
        }
        -1 => {
            v[pair(0, 1)] = r;
            v[pair(1, 0)] = r;
        }
        _ => unreachable!(),
    }
    v
}

/// |+−⟩ + |−+⟩ and |00⟩.
fn k0_parts() -> ([f64; 9], [f64; 9]) {
    let mut x = [0.0; 9];
    x[pair(2, 0)] = 1.0;
    x[pair(0, 2)] = 1.0;
    let mut z = [0.0; 9];
    z[pair(1, 1)] = 1.0;
    (x, z)
}

pub fn k0_state(s: f64) -> [f64; 9] {
    let (l, _) = lambda(s);
    let (x, z) = k0_parts();
    let mut v = [0.0; 9];
    for i in 0..9 {
        v[i] = l.sqrt() * x[i] + (1.0 - 2.0 * l).sqrt() * z[i];
    }
    v
}

pub fn k0_derivative(s: f64) -> [f64; 9] {
    let (l, dl) = lambda(s);
    let (x, z) = k0_parts();
    let mut v = [0.0; 9];
    for i in 0..9 {
        v[i] = dl / (2.0 * l.sqrt()) * x[i] - dl / (1.0 - 2.0 * l).sqrt() * z[i];
    }
    v
}

/// 9×9 operator stored row-major.
pub type TwoSite = [c64; 81];

fn outer(a: &[f64; 9], b: &[f64; 9], w: c64) -> TwoSite {
    let mut m = [c64::new(0.0, 0.0); 81];
    for i in 0..9 {
        for j in 0..9 {
            m[9 * i + j] = w * a[i] * b[j];
        }
    }
    m
}

fn add_into(acc: &mut TwoSite, x: &TwoSite, w: f64) {
    for i in 0..81 {
        acc[i] += x[i] * w;
    }
}

/// Number of s-dependent coefficient functions in the affine decomposition.
pub const N_COEFS: usize = 6;

/// Coefficient functions [1, λ, √(λ(1−2λ)), 1−2λ, √λ, √(1−2λ)] and their s-derivatives.
pub fn coefficient_functions(s: f64) -> ([f64; N_COEFS], [f64; N_COEFS]) {
    let (l, dl) = lambda(s);
    let rest = 1.0 - 2.0 * l;
    assert!(l >= 0.0 && rest >= 0.0, "negative radicand in |K0(s)>");
    let g = (l * rest).sqrt();
    (
        [1.0, l, g, rest, l.sqrt(), rest.sqrt()],
        [0.0, dl, dl * (1.0 - 4.0 * l) / (2.0 * g), -2.0 * dl, dl / (2.0 * l.sqrt()), -dl / rest.sqrt()],
    )
}

/// Constant 9×9 pieces L_k with h(s) = Σ_k f_k(s) L_k.
pub fn local_term_pieces(spec: &LocalTermSpec) -> [TwoSite; N_COEFS] {
    let (x, z) = k0_parts();
    let zero = [c64::new(0.0, 0.0); 81];
    let mut pieces = [zero; N_COEFS];
    let ms = [-2, -1, 1, 2];
    let idx = |m: i32| (m + 2) as usize;
    for &m in &ms {
        for &mp in &ms {
            let w = spec.coupling[idx(m)][idx(mp)];
            if w != c64::new(0.0, 0.0) {
                add_into(&mut pieces[0], &outer(&k_state(m), &k_state(mp), w), 1.0);
            }
        }
        // |K_m⟩⟨K₀| + h.c.
        let w = spec.coupling[idx(m)][2];
        if w != c64::new(0.0, 0.0) {
            let km = k_state(m);
            add_into(&mut pieces[4], &outer(&km, &x, w), 1.0);
            add_into(&mut pieces[4], &outer(&x, &km, w.conj()), 1.0);
            add_into(&mut pieces[5], &outer(&km, &z, w), 1.0);
            add_into(&mut pieces[5], &outer(&z, &km, w.conj()), 1.0);
        }
    }
    let j0 = spec.coupling[2][2];
    pieces[1] = outer(&x, &x, j0);
    add_into(&mut pieces[2], &outer(&x, &z, j0), 1.0);
    add_into(&mut pieces[2], &outer(&z, &x, j0), 1.0);
    pieces[3] = outer(&z, &z, j0);
    pieces
}

/// The two-site operator h(s) as a 9×9 matrix.
pub fn local_term(s: f64, spec: &LocalTermSpec) -> Result<TwoSite> {
    check_s(s)?;
    spec.validate()?;
    let (f, _) = coefficient_functions(s);
    let pieces = local_term_pieces(spec);
    let mut h = [c64::new(0.0, 0.0); 81];
    for k in 0..N_COEFS {
        add_into(&mut h, &pieces[k], f[k]);
    }
    Ok(h)
}

/// ∂_s h(s).
pub fn local_term_derivative(s: f64, spec: &LocalTermSpec) -> Result<TwoSite> {
    check_s(s)?;
    let (_, df) = coefficient_functions(s);
    let pieces = local_term_pieces(spec);
    let mut h = [c64::new(0.0, 0.0); 81];
    for k in 0..N_COEFS {
        add_into(&mut h, &pieces[k], df[k]);
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// −ε Σ S^z_j S^z_{j+1}
    CleanZz,
    /// Σ ε_j S^z_j S^z_{j+1}
    DisorderedZz,
    /// Σ ε_j S^z_j
    DisorderedZ,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub strength: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn clean(strength: f64) -> Self {
        Self { kind: PerturbationKind::CleanZz, strength, seed: 0 }
    }

    /// Per-site couplings ε_j. Disorder is Gaussian with mean 0 and standard
    /// deviation ε, drawn from a ChaCha stream seeded by `seed`.
    pub fn draws(&self, n: usize) -> Result<Vec<f64>> {
        if !(self.strength >= 0.0) {
            return Err(invalid("perturbation strength must be nonnegative"));
        }
        Ok(match self.kind {
            PerturbationKind::CleanZz => vec![-self.strength; n],
            _ if self.strength == 0.0 => vec![0.0; n],
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let dist = Normal::new(0.0, self.strength).map_err(|e| invalid(e.to_string()))?;
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
        })
    }

    fn check_compatible(&self, sector: &SymmetrySector) -> Result<()> {
        let disordered = self.kind != PerturbationKind::CleanZz && self.strength > 0.0;
        if disordered && (sector.momentum.is_some() || sector.reflection.is_some()) {
            return Err(invalid("disordered perturbation breaks translation/reflection symmetry of the basis"));
        }
        if self.kind == PerturbationKind::DisorderedZ && self.strength > 0.0 && sector.inversion.is_some() {
            return Err(invalid("disordered_z breaks spin-inversion symmetry of the basis"));
        }
        Ok(())
    }

    /// Diagonal value on a configuration code.
    fn diagonal(&self, eps: &[f64], code: u64, n: usize) -> f64 {
        let digits: Vec<f64> = (0..n).map(|j| ((code / 3u64.pow(j as u32)) % 3) as f64 - 1.0).collect();
        match self.kind {
            PerturbationKind::DisorderedZ => (0..n).map(|j| eps[j] * digits[j]).sum(),
            _ => (0..n).map(|j| eps[j] * digits[j] * digits[(j + 1) % n]).sum(),
        }
    }
}

/// Assembles Σ_i O_i for several two-site operators at once. All returned
/// matrices share one sparsity pattern (explicit zeros kept, diagonal always present).
pub fn assemble_bond_operators(basis: &SpinBasis, ops: &[TwoSite]) -> Result<Vec<Csr<c64>>> {
    let n = basis.n_sites();
    let k = ops.len();
    let zero = c64::new(0.0, 0.0);
    // Column r of each operator, later conjugated into row r (operators are Hermitian).
    let columns: Vec<Vec<(usize, Vec<c64>)>> = (0..basis.dim())
        .into_par_iter()
        .map(|r| {
            let c = basis.representatives()[r];
            let nr = basis.norms()[r];
            let mut entries: Vec<(usize, Vec<c64>)> = vec![(r, vec![zero; k])];
            for i in 0..n {
                let j = (i + 1) % n;
                let (pi, pj) = (basis.pow3(i), basis.pow3(j));
                let a = ((c / pi) % 3) as usize;
                let b = ((c / pj) % 3) as usize;
                let col = pair(a, b);
                for ap in 0..3 {
                    for bp in 0..3 {
                        let row = pair(ap, bp);
                        if ops.iter().all(|o| o[9 * row + col] == zero) {
                            continue;
                        }
                        let cp = c - a as u64 * pi - b as u64 * pj + ap as u64 * pi + bp as u64 * pj;
                        let Some((rp, chi)) = basis.lookup(cp) else { continue };
                        let factor = chi * basis.norms()[rp] / nr;
                        entries.push((rp, ops.iter().map(|o| o[9 * row + col] * factor).collect()));
                    }
                }
            }
            entries
        })
        .collect();
    let mut out = Vec::with_capacity(k);
    for t in 0..k {
        let rows: Vec<Vec<(usize, c64)>> =
            columns.iter().map(|col| col.iter().map(|(rp, vals)| (*rp, vals[t].conj())).collect()).collect();
        out.push(Csr::from_rows(basis.dim(), rows)?.hermitian_part()?);
    }
    Ok(out)
}

fn to_op(m: Csr<c64>) -> SparseOp {
    if m.row_values_all(|v| v.im == 0.0) {
        SparseOp::Real(m.map(|v| v.re))
    } else {
        SparseOp::Complex(m)
    }
}

/// H(s) = H_static + Σ_k f_k(s)·T_k with all pieces on a shared pattern.
#[derive(Clone, Debug)]
pub struct MpsFamily {
    pub n: usize,
    pub variant: Variant,
    pub basis: Arc<SpinBasis>,
    static_part: SparseOp,
    pieces: Vec<(usize, SparseOp)>,
}

impl MpsFamily {
    pub fn new(n: usize, variant: Variant, perturbation: Option<&PerturbationSpec>, basis: Arc<SpinBasis>) -> Result<Self> {
        if basis.n_sites() != n {
            return Err(invalid("basis built for a different chain length"));
        }
        let spec = variant.local_term();
        spec.validate()?;
        let sector = basis.sector();
        if let Variant::Tower { .. } = variant {
            if sector.inversion.is_some() {
                return Err(invalid("the tower Hamiltonian does not conserve spin inversion"));
            }
        }
        if variant == Variant::Ground && sector.inversion.is_some() {
            return Err(invalid("H+ does not conserve spin inversion"));
        }
        let pieces = local_term_pieces(&spec);
        let nonzero: Vec<usize> = (0..N_COEFS).filter(|&k| pieces[k].iter().any(|z| z.norm() > 0.0)).collect();
        let ops: Vec<TwoSite> = nonzero.iter().map(|&k| pieces[k]).collect();
        let mut mats = assemble_bond_operators(&basis, &ops)?;
        let mut static_part = match nonzero.iter().position(|&k| k == 0) {
            Some(p) => mats.remove(p),
            None => mats[0].map(|_| c64::new(0.0, 0.0)),
        };
        if let Some(p) = perturbation {
            p.check_compatible(&sector)?;
            let eps = p.draws(n)?;
            let diag: Vec<f64> = basis.representatives().iter().map(|&c| p.diagonal(&eps, c, n)).collect();
            static_part = static_part.add_diagonal(&diag)?;
        }
        let pieces = nonzero.into_iter().filter(|&k| k != 0).zip(mats.into_iter().map(to_op)).collect();
        Ok(Self { n, variant, basis, static_part: to_op(static_part), pieces })
    }

    /// Builds the family in the variant's default sector.
    pub fn with_default_sector(n: usize, variant: Variant) -> Result<Self> {
        let basis = Arc::new(SpinBasis::new(n, variant.default_sector())?);
        Self::new(n, variant, None, basis)
    }

    pub fn dim(&self) -> usize {
        self.static_part.dim()
    }

    fn combine(&self, f: &[f64; N_COEFS]) -> Result<SparseOp> {
        let mut terms = vec![(1.0, &self.static_part)];
        terms.extend(self.pieces.iter().map(|(k, op)| (f[*k], op)));
        SparseOp::weighted_sum(&terms)
    }

    pub fn hamiltonian(&self, s: f64) -> Result<SparseOp> {
        check_s(s)?;
        self.combine(&coefficient_functions(s).0)
    }

    /// ∂_s H(s), evaluated analytically.
    pub fn derivative(&self, s: f64) -> Result<SparseOp> {
        check_s(s)?;
        let (_, df) = coefficient_functions(s);
        let mut terms = vec![(0.0, &self.static_part)];
        terms.extend(self.pieces.iter().map(|(k, op)| (df[*k], op)));
        SparseOp::weighted_sum(&terms)
    }

    /// Σ_k w_k H(s_k) without forming the intermediate operators.
    pub fn hamiltonian_combination(&self, points: &[(f64, f64)]) -> Result<SparseOp> {
        let mut f = [0.0; N_COEFS];
        let mut total = 0.0;
        for &(w, s) in points {
            check_s(s)?;
            let (fs, _) = coefficient_functions(s);
            for k in 0..N_COEFS {
                f[k] += w * fs[k];
            }
            total += w;
        }
        let mut terms = vec![(total, &self.static_part)];
        terms.extend(self.pieces.iter().map(|(k, op)| (f[*k], op)));
        SparseOp::weighted_sum(&terms)
    }

    pub fn reference_state(&self, s: f64) -> Result<Vec<c64>> {
        mps_state_vector(self.n, s, &self.basis)
    }
}

/// H(s) in a sector basis, optionally perturbed.
pub fn assemble_hamiltonian(
    n: usize,
    s: f64,
    variant: Variant,
    perturbation: Option<&PerturbationSpec>,
    basis: Arc<SpinBasis>,
) -> Result<SparseOp> {
    MpsFamily::new(n, variant, perturbation, basis)?.hamiltonian(s)
}

/// Sector of the ℓ-th tower state: (2ℓ, k = ℓπ, I = (−1)^ℓ).
pub fn tower_sector(n: usize, ell: usize) -> SymmetrySector {
    let odd = ell % 2 == 1;
    SymmetrySector::with_reflection(2 * ell as i32, if odd { n / 2 } else { 0 }, if odd { -1 } else { 1 })
}

/// Amplitudes of (Q†_π)^ℓ |Φ₀(s)⟩ on configurations, Q†_π = Σ_j (−1)^j (S⁺_j)².
pub fn tower_amplitudes(n: usize, s: f64, ell: usize) -> Result<Vec<(u64, f64)>> {
    check_s(s)?;
    if ell > n / 2 {
        return Err(invalid(format!("quasiparticle count {ell} exceeds N/2")));
    }
    let t = mps_tensors(s);
    let mut state: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
    crate::hilbert::for_each_config_with_magnetization(n, 0, &mut |c| {
        let a = mps_amplitude(&t, c, n);
        if a != 0.0 {
            state.insert(c, a);
        }
    });
    for _ in 0..ell {
        let mut next: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
        for (&c, &a) in &state {
            let mut p = 1u64;
            for j in 0..n {
                if (c / p) % 3 == 0 {
                    // (S⁺)²|−⟩ = 2|+⟩, sites numbered from 1
                    let sign = if (j + 1) % 2 == 0 { 1.0 } else { -1.0 };
                    *next.entry(c + 2 * p).or_default() += 2.0 * sign * a;
                }
                p *= 3;
            }
        }
        state = next;
    }
    let mut out: Vec<(u64, f64)> = state.into_iter().filter(|e| e.1 != 0.0).collect();
    out.sort_by_key(|e| e.0);
    Ok(out)
}

/// Normalized tower state in `basis`; `Error::ZeroState` when it vanishes.
pub fn tower_state(n: usize, s: f64, ell: usize, basis: &SpinBasis) -> Result<Vec<c64>> {
    let amps = tower_amplitudes(n, s, ell)?;
    let full_norm: f64 = amps.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    let scale = amps.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
    if full_norm <= 1e-12 * scale.max(1e-300) || amps.is_empty() {
        return Err(Error::ZeroState);
    }
    let mut v = basis.project(amps.into_iter().map(|(c, a)| (c, c64::new(a, 0.0))));
    let norm = crate::linalg::vec::normalize(&mut v);
    if (norm - full_norm).abs() > 1e-8 * full_norm {
        return Err(invalid("tower state does not lie in the supplied sector"));
    }
    Ok(v)
}
