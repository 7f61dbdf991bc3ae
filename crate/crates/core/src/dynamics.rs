//! Time evolution under slow ramps of s with Chebyshev propagators.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::PathBuf;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fqh_model::FqhFamily;
use crate::linalg::{lanczos_extremes, vec as v, SparseOp};
use crate::mps_model::MpsFamily;

/// A parameter-dependent Hamiltonian H(s) acting on one symmetry sector.
pub trait HamiltonianFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn hamiltonian(&self, s: f64) -> Result<SparseOp>;
    fn derivative(&self, s: f64) -> Result<SparseOp>;
    /// The analytic state tracked by the ramp (MPS or Laughlin state).
    fn reference_state(&self, s: f64) -> Result<Vec<c64>>;
    /// Σ_k w_k H(s_k).
    fn combination(&self, points: &[(f64, f64)]) -> Result<SparseOp> {
        let ops = points.iter().map(|&(_, s)| self.hamiltonian(s)).collect::<Result<Vec<_>>>()?;
        let terms: Vec<(f64, &SparseOp)> = points.iter().zip(&ops).map(|(&(w, _), op)| (w, op)).collect();
        SparseOp::weighted_sum(&terms)
    }
}

impl HamiltonianFamily for MpsFamily {
    fn dim(&self) -> usize {
        MpsFamily::dim(self)
    }
    fn hamiltonian(&self, s: f64) -> Result<SparseOp> {
        MpsFamily::hamiltonian(self, s)
    }
    fn derivative(&self, s: f64) -> Result<SparseOp> {
        MpsFamily::derivative(self, s)
    }
    fn reference_state(&self, s: f64) -> Result<Vec<c64>> {
        MpsFamily::reference_state(self, s)
    }
    fn combination(&self, points: &[(f64, f64)]) -> Result<SparseOp> {
        self.hamiltonian_combination(points)
    }
}

impl HamiltonianFamily for FqhFamily {
    fn dim(&self) -> usize {
        FqhFamily::dim(self)
    }
    fn hamiltonian(&self, s: f64) -> Result<SparseOp> {
        FqhFamily::hamiltonian(self, s)
    }
    fn derivative(&self, s: f64) -> Result<SparseOp> {
        FqhFamily::derivative(self, s)
    }
    fn reference_state(&self, s: f64) -> Result<Vec<c64>> {
        FqhFamily::reference_state(self, s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampKind {
    Linear,
    Sinusoidal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampProtocol {
    pub kind: RampKind,
    /// v = 1/T.
    pub speed: f64,
    pub s_start: f64,
    pub s_end: f64,
}

impl RampProtocol {
    pub fn new(kind: RampKind, speed: f64, s_start: f64, s_end: f64) -> Result<Self> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(invalid("ramp speed must be positive"));
        }
        Ok(Self { kind, speed, s_start, s_end })
    }

    pub fn duration(&self) -> f64 {
        1.0 / self.speed
    }

    pub fn s(&self, t: f64) -> f64 {
        let x = (t * self.speed).clamp(0.0, 1.0);
        let f = match self.kind {
            RampKind::Linear => x,
            RampKind::Sinusoidal => (0.5 * PI * x).sin().powi(2),
        };
        self.s_start + (self.s_end - self.s_start) * f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// exp(−iΔt H) with H sampled at the segment midpoint.
    Midpoint,
    /// Fourth-order commutator-free product of two exponentials at the Gauss nodes.
    Cfet4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorConfig {
    /// Largest change of s per step.
    pub ds: f64,
    /// Largest time step.
    pub max_dt: f64,
    /// Largest Δt times the spectral width, so wide spectra get shorter steps.
    pub max_phase: f64,
    /// Chebyshev series cut when |J_k| drops below this.
    pub tolerance: f64,
    /// Relative padding of the spectral bounds.
    pub padding: f64,
    pub scheme: Scheme,
    /// Number of evenly spaced checkpoints (the final time is always recorded).
    pub checkpoints: usize,
    /// Keep the state vector at every checkpoint.
    pub keep_states: bool,
    /// Save the state every `every` steps to `path` and resume from it.
    pub restart: Option<RestartFile>,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            ds: 1e-3,
            max_dt: 0.5,
            max_phase: 10.0,
            tolerance: 1e-14,
            padding: 0.05,
            scheme: Scheme::Cfet4,
            checkpoints: 200,
            keep_states: false,
            restart: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartFile {
    pub path: PathBuf,
    pub every: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Checkpoint {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub norm: f64,
    /// |⟨Φ₀(s)|ψ(t)⟩|² against the family's reference state.
    pub fidelity: f64,
    #[serde(skip)]
    pub state: Option<Vec<c64>>,
}

#[derive(Clone, Debug)]
pub struct EvolutionRecord {
    pub ramp: RampProtocol,
    pub checkpoints: Vec<Checkpoint>,
    pub final_state: Vec<c64>,
    pub steps: usize,
    pub dt: f64,
    pub bounds: (f64, f64),
    pub max_order: usize,
}

impl EvolutionRecord {
    pub fn final_fidelity(&self) -> f64 {
        self.checkpoints.last().map(|c| c.fidelity).unwrap_or(f64::NAN)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.checkpoints.iter().map(|c| (c.norm - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// J_0(x), …, J_K(x) with K the first order past x whose magnitude is below `tol`.
pub fn bessel_series(x: f64, tol: f64) -> Vec<f64> {
    if x == 0.0 {
        return vec![1.0];
    }
    let ax = x.abs();
    let mut m = (1.3 * ax + 12.0 * ax.cbrt() + 40.0) as usize;
    m += m % 2;
    // Miller backward recurrence J_{k-1} = (2k/x) J_k − J_{k+1}
    let mut j = vec![0.0; m + 2];
    j[m] = 1e-300;
    for k in (1..=m).rev() {
        j[k - 1] = 2.0 * k as f64 / ax * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e200 {
            j.iter_mut().for_each(|y| *y *= 1e-200);
        }
    }
    let norm = j[0] + 2.0 * (1..=m / 2).map(|k| j[2 * k]).sum::<f64>();
    let mut out: Vec<f64> = j[..=m].iter().map(|y| y / norm).collect();
    if x < 0.0 {
        out.iter_mut().enumerate().for_each(|(k, y)| {
            if k % 2 == 1 {
                *y = -*y
            }
        });
    }
    let cut = (0..=m).find(|&k| k as f64 > ax && out[k].abs() < tol).unwrap_or(m);
    out.truncate(cut + 1);
    out
}

/// exp(−iτH)ψ for H with spectrum inside [lo, hi]. Returns the state and the expansion order.
pub fn chebyshev_step(h: &SparseOp, psi: &[c64], tau: f64, bounds: (f64, f64), tol: f64) -> Result<(Vec<c64>, usize)> {
    let (lo, hi) = bounds;
    if !(hi > lo) {
        return Err(invalid("spectral bounds must satisfy hi > lo"));
    }
    let center = 0.5 * (hi + lo);
    let half = 0.5 * (hi - lo);
    let coef = bessel_series(half * tau, tol);
    let n = psi.len();
    let inv = 1.0 / half;
    // X = (H − center)/half
    let apply_x = |x: &[c64], y: &mut [c64]| {
        h.matvec(x, y);
        for i in 0..n {
            y[i] = (y[i] - x[i] * center) * inv;
        }
    };
    let mut out: Vec<c64> = psi.iter().map(|&x| x * coef[0]).collect();
    let mut prev = psi.to_vec();
    let mut cur = vec![c64::new(0.0, 0.0); n];
    if coef.len() > 1 {
        apply_x(psi, &mut cur);
    }
    let mut phase = c64::new(0.0, -1.0);
    let mut next = vec![c64::new(0.0, 0.0); n];
    for k in 1..coef.len() {
        let w = phase * (2.0 * coef[k]);
        v::axpy(w, &cur, &mut out);
        phase *= c64::new(0.0, -1.0);
        if k + 1 < coef.len() {
            apply_x(&cur, &mut next);
            for i in 0..n {
                next[i] = next[i] * 2.0 - prev[i];
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
            if k % 8 == 0 && v::norm(&cur) > 4.0 * v::norm(psi) {
                return Err(Error::Numerical(format!(
                    "Chebyshev recurrence diverged at order {k}: spectrum leaves [{lo}, {hi}]"
                )));
            }
        }
    }
    let rot = c64::from_polar(1.0, -center * tau);
    out.iter_mut().for_each(|x| *x *= rot);
    Ok((out, coef.len() - 1))
}

/// Envelope of extremal Lanczos estimates at the given s values, padded by `padding`·width.
pub fn spectral_bounds<F: HamiltonianFamily + ?Sized>(family: &F, s_values: &[f64], padding: f64) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &s in s_values {
        let h = family.hamiltonian(s)?;
        let (a, b) = lanczos_extremes(|x, y| h.matvec(x, y), h.dim(), 300);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let pad = padding * (hi - lo).max(1e-12);
    Ok((lo - pad, hi + pad))
}

/// Bounds of Σ w_k H_k when every H_k has spectrum in `b`.
fn combination_bounds(weights: &[f64], b: (f64, f64)) -> (f64, f64) {
    weights.iter().fold((0.0, 0.0), |(lo, hi), &w| if w >= 0.0 { (lo + w * b.0, hi + w * b.1) } else { (lo + w * b.1, hi + w * b.0) })
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// One step t → t + dt. Returns the new state and the largest expansion order used.
fn step<F: HamiltonianFamily + ?Sized>(
    family: &F,
    ramp: &RampProtocol,
    psi: &[c64],
    t: f64,
    dt: f64,
    bounds: (f64, f64),
    cfg: &PropagatorConfig,
) -> Result<(Vec<c64>, usize)> {
    match cfg.scheme {
        Scheme::Midpoint => {
            let h = family.hamiltonian(ramp.s(t + 0.5 * dt))?;
            chebyshev_step(&h, psi, dt, bounds, cfg.tolerance)
        }
        Scheme::Cfet4 => {
            let s1 = ramp.s(t + (0.5 - SQRT3 / 6.0) * dt);
            let s2 = ramp.s(t + (0.5 + SQRT3 / 6.0) * dt);
            let a1 = (3.0 - 2.0 * SQRT3) / 12.0;
            let a2 = (3.0 + 2.0 * SQRT3) / 12.0;
            let first = family.combination(&[(a2, s1), (a1, s2)])?;
            let (x, o1) = chebyshev_step(&first, psi, dt, combination_bounds(&[a2, a1], bounds), cfg.tolerance)?;
            let second = family.combination(&[(a1, s1), (a2, s2)])?;
            let (y, o2) = chebyshev_step(&second, &x, dt, combination_bounds(&[a1, a2], bounds), cfg.tolerance)?;
            Ok((y, o1.max(o2)))
        }
    }
}

/// Number of steps for a ramp: enough to respect `ds`, `max_dt` and `max_phase`
/// for a spectrum of the given width.
pub fn step_count(ramp: &RampProtocol, cfg: &PropagatorConfig, width: f64) -> usize {
    let by_s = ((ramp.s_end - ramp.s_start).abs() / cfg.ds).ceil();
    let dt = cfg.max_dt.min(cfg.max_phase / width.max(1e-12));
    let by_t = (ramp.duration() / dt).ceil();
    (by_s.max(by_t) as usize).max(1)
}

/// Evolves `psi0` under H(s(t)) for t ∈ [0, T].
pub fn propagate<F: HamiltonianFamily + ?Sized>(family: &F, psi0: &[c64], ramp: &RampProtocol, cfg: &PropagatorConfig) -> Result<EvolutionRecord> {
    if psi0.len() != family.dim() {
        return Err(invalid("initial state is not in the sector of H"));
    }
    if (v::norm(psi0) - 1.0).abs() > 1e-9 {
        return Err(invalid("initial state must be normalized"));
    }
    if !(cfg.ds > 0.0 && cfg.max_dt > 0.0 && cfg.max_phase > 0.0 && cfg.tolerance > 0.0 && cfg.padding >= 0.0) {
        return Err(invalid("propagator steps, tolerance and padding must be positive"));
    }
    let mid = 0.5 * (ramp.s_start + ramp.s_end);
    let bounds = spectral_bounds(family, &[ramp.s_start, mid, ramp.s_end], cfg.padding)?;
    let steps = step_count(ramp, cfg, bounds.1 - bounds.0);
    let dt = ramp.duration() / steps as f64;
    let n_cp = cfg.checkpoints.max(1);
    let mut marks: Vec<usize> = (0..=n_cp).map(|k| ((k as f64 * steps as f64 / n_cp as f64).round() as usize).min(steps)).collect();
    marks.dedup();

    let mut psi = psi0.to_vec();
    let mut start = 0;
    if let Some(r) = &cfg.restart {
        if let Some((k, state)) = load_restart(r, psi0.len(), steps)? {
            start = k;
            psi = state;
        }
    }
    let mut checkpoints = Vec::with_capacity(marks.len());
    let mut record = |k: usize, psi: &[c64]| -> Result<()> {
        let t = k as f64 * dt;
        let s = ramp.s(t);
        let norm = v::norm(psi);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical(format!("norm drifted to {norm} at t = {t}")));
        }
        let target = family.reference_state(s)?;
        checkpoints.push(Checkpoint {
            step: k,
            t,
            s,
            norm,
            fidelity: v::fidelity(&target, psi),
            state: cfg.keep_states.then(|| psi.to_vec()),
        });
        Ok(())
    };
    let mut max_order = 0;
    let mut next_mark = marks.iter().position(|&m| m >= start).unwrap_or(marks.len());
    for k in start..=steps {
        if next_mark < marks.len() && marks[next_mark] == k {
            record(k, &psi)?;
            next_mark += 1;
        }
        if k == steps {
            break;
        }
        let (next, order) = step(family, ramp, &psi, k as f64 * dt, dt, bounds, cfg)?;
        psi = next;
        max_order = max_order.max(order);
        if let Some(r) = &cfg.restart {
            if r.every > 0 && (k + 1) % r.every == 0 && k + 1 < steps {
                save_restart(r, k + 1, steps, &psi)?;
            }
        }
    }
    Ok(EvolutionRecord { ramp: *ramp, checkpoints, final_state: psi, steps, dt, bounds, max_order })
}

fn save_restart(r: &RestartFile, step: usize, steps: usize, psi: &[c64]) -> Result<()> {
    let tmp = r.path.with_extension("tmp");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
    for x in [step as u64, steps as u64, psi.len() as u64] {
        f.write_all(&x.to_le_bytes())?;
    }
    for z in psi {
        f.write_all(&z.re.to_le_bytes())?;
        f.write_all(&z.im.to_le_bytes())?;
    }
    f.flush()?;
    drop(f);
    std::fs::rename(tmp, &r.path)?;
    Ok(())
}

fn load_restart(r: &RestartFile, dim: usize, steps: usize) -> Result<Option<(usize, Vec<c64>)>> {
    let Ok(mut f) = std::fs::File::open(&r.path) else { return Ok(None) };
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    let word = |i: usize| -> Option<[u8; 8]> { bytes.get(8 * i..8 * i + 8).and_then(|b| b.try_into().ok()) };
    let (Some(a), Some(b), Some(c)) = (word(0), word(1), word(2)) else { return Ok(None) };
    let (step, total, len) = (u64::from_le_bytes(a) as usize, u64::from_le_bytes(b) as usize, u64::from_le_bytes(c) as usize);
    if total != steps || len != dim || bytes.len() != 24 + 16 * dim {
        return Ok(None);
    }
    let psi = (0..dim)
        .map(|i| c64::new(f64::from_le_bytes(word(3 + 2 * i).unwrap()), f64::from_le_bytes(word(4 + 2 * i).unwrap())))
        .collect();
    Ok(Some((step, psi)))
}

/// |⟨target|ψ(T)⟩|².
pub fn adiabatic_fidelity(record: &EvolutionRecord, target: &[c64]) -> f64 {
    v::fidelity(target, &record.final_state)
}

#[derive(Clone, Debug, Serialize)]
pub struct Populations {
    pub rho: Vec<f64>,
    pub diagonal_entropy: f64,
    /// S_diag / ln D.
    pub scaled_entropy: f64,
}

/// ρ_nn = |⟨n|ψ⟩|² in the eigenbasis `vectors` and the diagonal entropy.
pub fn populations_and_entropy(psi: &[c64], vectors: &crate::linalg::Eigenvectors) -> Result<Populations> {
    let rho: Vec<f64> = vectors.project(psi).iter().map(|a| a.norm_sqr()).collect();
    let total: f64 = rho.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Numerical(format!("populations sum to {total}")));
    }
    let s: f64 = rho.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    let d = rho.len() as f64;
    Ok(Populations { diagonal_entropy: s, scaled_entropy: if d > 1.0 { s / d.ln() } else { 0.0 }, rho })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VelocityScan {
    pub threshold: f64,
    /// Fastest speed tried; the scan moves towards slower ramps.
    pub v_max: f64,
    pub v_min: f64,
    pub points_per_decade: usize,
    /// Stop bisecting once v_hi/v_lo − 1 is below this.
    pub relative_width: f64,
}

impl Default for VelocityScan {
    fn default() -> Self {
        Self { threshold: 0.99, v_max: 1.0, v_min: 1e-5, points_per_decade: 24, relative_width: 0.05 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VelocityResult {
    pub threshold: f64,
    /// Geometric mean of the final bracket.
    pub v: f64,
    pub bracket: (f64, f64),
    /// Every (v, F) evaluated, in order.
    pub samples: Vec<(f64, f64)>,
    /// False if F increased with v anywhere in the scan.
    pub monotone: bool,
}

/// Largest v with F(v) ≥ threshold: scan downwards on a log grid, then bisect on log v.
pub fn adiabatic_velocity(mut fidelity: impl FnMut(f64) -> Result<f64>, scan: &VelocityScan) -> Result<VelocityResult> {
    if !(scan.v_max > scan.v_min && scan.v_min > 0.0 && scan.points_per_decade > 0 && scan.relative_width > 0.0) {
        return Err(invalid("velocity scan needs 0 < v_min < v_max, a positive density and width"));
    }
    let factor = 10f64.powf(1.0 / scan.points_per_decade as f64);
    let mut samples = Vec::new();
    let mut v_cur = scan.v_max;
    let mut above: Option<f64> = None;
    let mut below = None;
    while v_cur >= scan.v_min * (1.0 - 1e-12) {
        let f = fidelity(v_cur)?;
        samples.push((v_cur, f));
        if f >= scan.threshold {
            below = Some(v_cur);
            break;
        }
        above = Some(v_cur);
        v_cur /= factor;
    }
    let (Some(mut hi), Some(mut lo)) = (above, below) else {
        return Err(Error::NotBracketed {
            threshold: scan.threshold,
            detail: format!("F(v) does not cross the threshold on [{:e}, {:e}]", scan.v_min, scan.v_max),
        });
    };
    while hi / lo - 1.0 > scan.relative_width {
        let mid = (hi * lo).sqrt();
        let f = fidelity(mid)?;
        samples.push((mid, f));
        if f >= scan.threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    Ok(VelocityResult { threshold: scan.threshold, v: (hi * lo).sqrt(), bracket: (lo, hi), samples, monotone })
}

/// Final adiabatic fidelity of a ramp started in the reference state.
pub fn ramp_fidelity<F: HamiltonianFamily + ?Sized>(family: &F, ramp: &RampProtocol, cfg: &PropagatorConfig) -> Result<f64> {
    let psi0 = family.reference_state(ramp.s_start)?;
    let cfg = PropagatorConfig { checkpoints: 1, keep_states: false, restart: None, ..cfg.clone() };
    Ok(propagate(family, &psi0, ramp, &cfg)?.final_fidelity())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_values() {
        let j = bessel_series(1.0, 1e-16);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((j[2] - 0.114_903_484_931_900_5).abs() < 1e-14);
        let j = bessel_series(50.0, 1e-14);
        assert!((j[0] - 0.055_812_327_669_251_86).abs() < 1e-12);
        assert!(j.len() > 51 && j.last().unwrap().abs() < 1e-14);
    }

    #[test]
    fn ramp_endpoints() {
        for kind in [RampKind::Linear, RampKind::Sinusoidal] {
            let r = RampProtocol::new(kind, 0.01, 0.2, 0.9).unwrap();
            assert!((r.s(0.0) - 0.2).abs() < 1e-15);
            assert!((r.s(r.duration()) - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn combination_bounds_respect_signs() {
        let b = combination_bounds(&[2.0, -1.0], (-1.0, 3.0));
        assert_eq!(b, (-5.0, 7.0));
    }

    #[test]
    fn step_count_takes_the_tightest_cap() {
        let r = RampProtocol::new(RampKind::Linear, 0.01, 0.0, 1.0).unwrap();
        let cfg = PropagatorConfig::default();
        assert_eq!(step_count(&r, &cfg, 10.0), 1000);
        assert_eq!(step_count(&r, &cfg, 1000.0), 10_000);
        let slow = RampProtocol::new(RampKind::Linear, 1e-4, 0.0, 1.0).unwrap();
        assert_eq!(step_count(&slow, &cfg, 10.0), 20_000);
    }
}
