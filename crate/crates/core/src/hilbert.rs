//! Configuration spaces and symmetry-adapted sector bases.
//!
//! Spin-1 configurations are base-3 integers with site 1 as the least
//! significant digit and digit `m + 1` for local level `m`. Hardcore-boson
//! configurations are bitmasks over lattice sites in row-major order.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Anything that maps symmetry-adapted coefficients back to plain configurations.
pub trait SectorBasis {
    fn dim(&self) -> usize;
    /// Amplitudes of the state on individual configurations (zero entries skipped).
    fn expand_vector(&self, v: &[c64]) -> Vec<(u64, c64)>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinConfig {
    pub sites: Vec<i8>,
}

impl SpinConfig {
    pub fn new(sites: Vec<i8>) -> Result<Self> {
        if sites.iter().any(|m| !(-1..=1).contains(m)) {
            return Err(invalid("spin-1 levels must be -1, 0 or +1"));
        }
        Ok(Self { sites })
    }

    pub fn encode(&self) -> u64 {
        self.sites.iter().rev().fold(0u64, |acc, &m| acc * 3 + (m + 1) as u64)
    }

    pub fn decode(mut code: u64, n: usize) -> Self {
        let sites = (0..n)
            .map(|_| {
                let d = (code % 3) as i8;
                code /= 3;
                d - 1
            })
            .collect();
        Self { sites }
    }

    pub fn magnetization(&self) -> i32 {
        self.sites.iter().map(|&m| m as i32).sum()
    }
}

/// Quantum numbers of a spin-chain sector. `momentum` is the integer j of
/// k = 2πj/N; `None` means the symmetry is not used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetrySector {
    pub magnetization: i32,
    pub momentum: Option<usize>,
    pub reflection: Option<i8>,
    pub inversion: Option<i8>,
}

impl SymmetrySector {
    pub fn magnetization(m: i32) -> Self {
        Self { magnetization: m, momentum: None, reflection: None, inversion: None }
    }

    /// (S^z, k, I, Z) with all four symmetries active.
    pub fn full(m: i32, momentum: usize, reflection: i8, inversion: i8) -> Self {
        Self { magnetization: m, momentum: Some(momentum), reflection: Some(reflection), inversion: Some(inversion) }
    }

    /// (S^z, k, I) without spin inversion.
    pub fn with_reflection(m: i32, momentum: usize, reflection: i8) -> Self {
        Self { magnetization: m, momentum: Some(momentum), reflection: Some(reflection), inversion: None }
    }
}

#[derive(Clone, Debug)]
struct Group {
    shifts: usize,
    reflect: bool,
    invert: bool,
    /// characters indexed [p][r][z]
    chi: Vec<c64>,
}

impl Group {
    fn chi(&self, p: usize, r: usize, z: usize) -> c64 {
        self.chi[(p * self.shifts + r) * 2 + z]
    }
    fn order(&self) -> usize {
        self.shifts * (1 + self.reflect as usize) * (1 + self.invert as usize)
    }
}

/// Symmetry-adapted basis of a spin-1 chain sector.
#[derive(Clone, Debug)]
pub struct SpinBasis {
    n: usize,
    sector: SymmetrySector,
    reps: Vec<u64>,
    norms: Vec<f64>,
    pow3: Vec<u64>,
    half_rev: Vec<u64>,
    group: Group,
}

fn reverse_digits(mut c: u64, len: usize) -> u64 {
    let mut r = 0;
    for _ in 0..len {
        r = r * 3 + c % 3;
        c /= 3;
    }
    r
}

/// Calls `f` for every code with `n` base-3 digits whose digit sum equals `target`.
fn for_each_with_digit_sum(n: usize, target: i64, f: &mut impl FnMut(u64)) {
    fn rec(site: usize, n: usize, remaining: i64, code: u64, place: u64, f: &mut impl FnMut(u64)) {
        if site == n {
            if remaining == 0 {
                f(code);
            }
            return;
        }
        let left = (n - site - 1) as i64;
        for d in 0..3i64 {
            let rem = remaining - d;
            if rem >= 0 && rem <= 2 * left {
                rec(site + 1, n, rem, code + d as u64 * place, place * 3, f);
            }
        }
    }
    rec(0, n, target, 0, 1, f);
}

impl SpinBasis {
    /// Builds the basis of `sector` for an N-site periodic chain.
    pub fn new(n: usize, sector: SymmetrySector) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::Unsupported(format!("odd chain length N={n}")));
        }
        if !(2..=20).contains(&n) {
            return Err(Error::Unsupported(format!("chain length N={n} outside 2..=20")));
        }
        if sector.magnetization.unsigned_abs() as usize > n {
            return Err(invalid(format!("magnetization {} impossible for N={n}", sector.magnetization)));
        }
        if let Some(j) = sector.momentum {
            if j >= n {
                return Err(invalid(format!("momentum index {j} not in 0..{n}")));
            }
        }
        if let Some(p) = sector.reflection {
            if p.abs() != 1 {
                return Err(invalid("reflection parity must be ±1"));
            }
            if let Some(j) = sector.momentum {
                if j != 0 && 2 * j != n {
                    return Err(invalid("reflection only commutes with translations at k = 0 or π"));
                }
            }
        }
        if let Some(z) = sector.inversion {
            if z.abs() != 1 {
                return Err(invalid("spin-inversion parity must be ±1"));
            }
            if sector.magnetization != 0 {
                return Err(invalid("spin inversion requires zero magnetization"));
            }
        }
        let shifts = if sector.momentum.is_some() { n } else { 1 };
        let k = 2.0 * PI * sector.momentum.unwrap_or(0) as f64 / n as f64;
        let mut chi = Vec::with_capacity(4 * shifts);
        for p in 0..2 {
            for r in 0..shifts {
                for z in 0..2 {
                    let rho = if p == 1 { sector.reflection.unwrap_or(1) as f64 } else { 1.0 };
                    let zeta = if z == 1 { sector.inversion.unwrap_or(1) as f64 } else { 1.0 };
                    chi.push(c64::from_polar(rho * zeta, k * r as f64));
                }
            }
        }
        let group = Group { shifts, reflect: sector.reflection.is_some(), invert: sector.inversion.is_some(), chi };
        let pow3: Vec<u64> = (0..=n as u32).map(|e| 3u64.pow(e)).collect();
        let half = n / 2;
        let half_rev = (0..pow3[half]).map(|c| reverse_digits(c, half)).collect();
        let mut basis = Self { n, sector, reps: Vec::new(), norms: Vec::new(), pow3, half_rev, group };
        let mut reps = Vec::new();
        let target = sector.magnetization as i64 + n as i64;
        for_each_with_digit_sum(n, target, &mut |c| {
            if let Some(norm) = basis.representative_norm(c) {
                reps.push((c, norm));
            }
        });
        reps.sort_by_key(|r| r.0);
        basis.reps = reps.iter().map(|r| r.0).collect();
        basis.norms = reps.iter().map(|r| r.1).collect();
        Ok(basis)
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }
    pub fn sector(&self) -> SymmetrySector {
        self.sector
    }
    pub fn representatives(&self) -> &[u64] {
        &self.reps
    }
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }
    pub fn group_order(&self) -> usize {
        self.group.order()
    }
    pub fn pow3(&self, i: usize) -> u64 {
        self.pow3[i]
    }

    #[inline]
    pub fn translate(&self, c: u64) -> u64 {
        let top = self.pow3[self.n - 1];
        (c % top) * 3 + c / top
    }

    #[inline]
    pub fn reflect(&self, c: u64) -> u64 {
        let h = self.pow3[self.n / 2];
        self.half_rev[(c % h) as usize] * h + self.half_rev[(c / h) as usize]
    }

    #[inline]
    pub fn invert(&self, c: u64) -> u64 {
        self.pow3[self.n] - 1 - c
    }

    /// Visits g·c for every group element g together with χ(g); g = Z^z T^r I^p.
    #[inline]
    fn for_each_image(&self, c: u64, mut f: impl FnMut(u64, c64) -> bool) {
        let g = &self.group;
        for p in 0..(1 + g.reflect as usize) {
            let mut x = if p == 1 { self.reflect(c) } else { c };
            for r in 0..g.shifts {
                if !f(x, g.chi(p, r, 0)) {
                    return;
                }
                if g.invert && !f(self.invert(x), g.chi(p, r, 1)) {
                    return;
                }
                x = self.translate(x);
            }
        }
    }

    /// Norm of the projected configuration if `c` is the smallest member of
    /// its orbit and the projection does not vanish.
    fn representative_norm(&self, c: u64) -> Option<f64> {
        let mut is_min = true;
        let mut stab = c64::new(0.0, 0.0);
        self.for_each_image(c, |x, chi| {
            if x < c {
                is_min = false;
                return false;
            }
            if x == c {
                stab += chi.conj();
            }
            true
        });
        if !is_min {
            return None;
        }
        let n2 = stab.re / self.group.order() as f64;
        (n2 > 1e-10).then(|| n2.sqrt())
    }

    /// Index of the orbit representative of `c` and χ(g) with c = g·c_rep.
    pub fn lookup(&self, c: u64) -> Option<(usize, c64)> {
        let mut best = u64::MAX;
        let mut best_chi = c64::new(1.0, 0.0);
        self.for_each_image(c, |x, chi| {
            if x < best {
                best = x;
                best_chi = chi;
            }
            true
        });
        let idx = self.reps.binary_search(&best).ok()?;
        Some((idx, best_chi.conj()))
    }

    /// Nonzero components ⟨c|r⟩ of basis vector r.
    pub fn expand(&self, r: usize) -> Vec<(u64, c64)> {
        let c = self.reps[r];
        let mut out: Vec<(u64, c64)> = Vec::with_capacity(self.group.order());
        self.for_each_image(c, |x, chi| {
            out.push((x, chi.conj() * self.norms[r]));
            true
        });
        out.sort_by_key(|e| e.0);
        out.dedup_by_key(|e| e.0);
        out
    }

    /// Coefficients ⟨r|ψ⟩ of a state given on configurations. Components
    /// outside the sector are discarded by the projection.
    pub fn project<I: IntoIterator<Item = (u64, c64)>>(&self, amplitudes: I) -> Vec<c64> {
        let mut v = vec![c64::new(0.0, 0.0); self.dim()];
        for (c, a) in amplitudes {
            if let Some((r, chi)) = self.lookup(c) {
                v[r] += chi * self.norms[r] * a;
            }
        }
        v
    }
}

impl SectorBasis for SpinBasis {
    fn dim(&self) -> usize {
        self.reps.len()
    }

    fn expand_vector(&self, v: &[c64]) -> Vec<(u64, c64)> {
        let mut map: HashMap<u64, c64> = HashMap::new();
        for (r, &coef) in v.iter().enumerate() {
            if coef == c64::new(0.0, 0.0) {
                continue;
            }
            for (c, a) in self.expand(r) {
                *map.entry(c).or_default() += a * coef;
            }
        }
        let mut out: Vec<(u64, c64)> = map.into_iter().collect();
        out.sort_by_key(|e| e.0);
        out
    }
}

/// Binomial coefficient table C(n, k) for n, k ≤ 64.
fn binomials() -> Vec<[u64; 65]> {
    let mut t = vec![[0u64; 65]; 65];
    for n in 0..65 {
        t[n][0] = 1;
        for k in 1..=n {
            t[n][k] = t[n - 1][k - 1].saturating_add(if k <= n - 1 { t[n - 1][k] } else { 0 });
        }
    }
    t
}

/// Fixed-particle-number hardcore-boson basis ordered by numeric bitmask.
#[derive(Clone, Debug)]
pub struct BosonBasis {
    n: usize,
    particles: usize,
    configs: Vec<u64>,
    binom: Vec<[u64; 65]>,
}

impl BosonBasis {
    pub fn new(n: usize, particles: usize) -> Result<Self> {
        if n == 0 || n > 63 {
            return Err(Error::Unsupported(format!("lattice with {n} sites")));
        }
        if particles > n {
            return Err(invalid(format!("{particles} particles on {n} sites")));
        }
        let binom = binomials();
        let dim = binom[n][particles] as usize;
        let mut configs = Vec::with_capacity(dim);
        if particles == 0 {
            configs.push(0);
        } else {
            // Gosper's hack walks masks with fixed popcount in increasing order.
            let mut c: u64 = (1u64 << particles) - 1;
            let limit = 1u64 << n;
            while c < limit {
                configs.push(c);
                let u = c & c.wrapping_neg();
                let v = c + u;
                c = v + (((v ^ c) / u) >> 2);
            }
        }
        Ok(Self { n, particles, configs, binom })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }
    pub fn particles(&self) -> usize {
        self.particles
    }
    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    /// Position of `mask` in the basis (combinatorial number system).
    #[inline]
    pub fn index(&self, mask: u64) -> Option<usize> {
        if mask.count_ones() as usize != self.particles || (self.n < 64 && mask >> self.n != 0) {
            return None;
        }
        let mut rank = 0u64;
        let mut m = mask;
        let mut i = 1;
        while m != 0 {
            let pos = m.trailing_zeros() as usize;
            rank += self.binom[pos][i];
            i += 1;
            m &= m - 1;
        }
        Some(rank as usize)
    }

    pub fn occupations(&self, idx: usize) -> Vec<u8> {
        let c = self.configs[idx];
        (0..self.n).map(|j| ((c >> j) & 1) as u8).collect()
    }
}

impl SectorBasis for BosonBasis {
    fn dim(&self) -> usize {
        self.configs.len()
    }

    fn expand_vector(&self, v: &[c64]) -> Vec<(u64, c64)> {
        self.configs.iter().copied().zip(v.iter().copied()).filter(|e| e.1 != c64::new(0.0, 0.0)).collect()
    }
}

/// Calls `f` on every N-site configuration code with total magnetization `m`.
pub fn for_each_config_with_magnetization(n: usize, m: i32, f: &mut impl FnMut(u64)) {
    for_each_with_digit_sum(n, m as i64 + n as i64, f);
}

/// Spin sector enumeration entry point.
pub fn enumerate_spin_sector(n: usize, sector: SymmetrySector) -> Result<SpinBasis> {
    SpinBasis::new(n, sector)
}

/// Boson sector enumeration entry point.
pub fn enumerate_boson_sector(n: usize, particles: usize) -> Result<BosonBasis> {
    BosonBasis::new(n, particles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_site_zero_magnetization() {
        let b = SpinBasis::new(2, SymmetrySector::magnetization(0)).unwrap();
        assert_eq!(b.dim(), 3);
        let mut cfgs: Vec<Vec<i8>> = b.representatives().iter().map(|&c| SpinConfig::decode(c, 2).sites).collect();
        cfgs.sort();
        assert_eq!(cfgs, vec![vec![-1, 1], vec![0, 0], vec![1, -1]]);
    }

    #[test]
    fn rejects_bad_sectors() {
        assert!(SpinBasis::new(5, SymmetrySector::magnetization(0)).is_err());
        assert!(SpinBasis::new(6, SymmetrySector::full(0, 6, 1, 1)).is_err());
        assert!(SpinBasis::new(6, SymmetrySector::with_reflection(0, 1, 1)).is_err());
        assert!(SpinBasis::new(6, SymmetrySector::full(2, 0, 1, 1)).is_err());
    }

    #[test]
    fn boson_small_enumeration() {
        let b = BosonBasis::new(4, 1).unwrap();
        assert_eq!(b.configs(), &[0b0001, 0b0010, 0b0100, 0b1000]);
        assert_eq!(BosonBasis::new(16, 7).unwrap().dim(), 11440);
        assert!(BosonBasis::new(4, 5).is_err());
    }

    #[test]
    fn boson_index_inverts_enumeration() {
        let b = BosonBasis::new(12, 5).unwrap();
        assert_eq!(b.dim(), 792);
        for (i, &c) in b.configs().iter().enumerate() {
            assert_eq!(b.index(c), Some(i));
        }
        assert_eq!(b.index(0b111), None);
    }

    #[test]
    fn momentum_sectors_partition_magnetization_space() {
        let n = 8;
        let full = SpinBasis::new(n, SymmetrySector::magnetization(0)).unwrap().dim();
        let mut total = 0;
        for j in 0..n {
            if j == 0 || 2 * j == n {
                for p in [1, -1] {
                    for z in [1, -1] {
                        total += SpinBasis::new(n, SymmetrySector::full(0, j, p, z)).unwrap().dim();
                    }
                }
            } else {
                let s = SymmetrySector { magnetization: 0, momentum: Some(j), reflection: None, inversion: Some(1) };
                let t = SymmetrySector { inversion: Some(-1), ..s };
                total += SpinBasis::new(n, s).unwrap().dim() + SpinBasis::new(n, t).unwrap().dim();
            }
        }
        assert_eq!(total, full);
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(sites in proptest::collection::vec(-1i8..=1, 1..20)) {
            let c = SpinConfig::new(sites.clone()).unwrap();
            prop_assert_eq!(SpinConfig::decode(c.encode(), sites.len()), c);
        }

        #[test]
        fn lookup_inverts_expansion(j in 0usize..2, p in prop::sample::select(vec![1i8, -1]), z in prop::sample::select(vec![1i8, -1])) {
            let n = 6;
            let b = SpinBasis::new(n, SymmetrySector::full(0, j * n / 2, p, z)).unwrap();
            for r in 0..b.dim() {
                for (c, amp) in b.expand(r) {
                    let (r2, chi) = b.lookup(c).unwrap();
                    prop_assert_eq!(r2, r);
                    // ⟨c|r⟩ = χ(g)* n_r for c = g·c_r
                    prop_assert!((amp - chi.conj() * b.norms()[r]).norm() < 1e-12);
                }
            }
        }
    }
}
