//! Kernel polynomial method for G(ω) = Σ_m |⟨probe|m⟩|² δ(ω − E_m).

use std::f64::consts::PI;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{lanczos_extremes, vec as v, SparseOp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KpmConfig {
    pub moments: usize,
    /// Relative padding of the Lanczos bounds.
    pub padding: f64,
    /// Explicit spectral bounds; estimated when absent.
    pub bounds: Option<(f64, f64)>,
    /// ω grid; defaults to the padded bounds when absent.
    pub omega_range: Option<(f64, f64)>,
    pub omega_points: usize,
}

impl Default for KpmConfig {
    fn default() -> Self {
        Self::preset("desk-3x4").unwrap()
    }
}

impl KpmConfig {
    /// Named presets: "desk-3x4" (2¹² moments) and "paper-6x4" (2¹⁷ moments).
    pub fn preset(name: &str) -> Result<Self> {
        let moments = match name {
            "desk-3x4" => 1 << 12,
            "paper-6x4" => 1 << 17,
            _ => return Err(invalid(format!("unknown KPM preset {name:?}"))),
        };
        Ok(Self { moments, padding: 0.05, bounds: None, omega_range: None, omega_points: 4096 })
    }
}

/// Jackson damping factors g_0 … g_{M−1}.
pub fn jackson_kernel(m: usize) -> Vec<f64> {
    let q = PI / (m as f64 + 1.0);
    let cot = 1.0 / q.tan();
    (0..m)
        .map(|k| {
            let k = k as f64;
            ((m as f64 - k + 1.0) * (q * k).cos() + (q * k).sin() * cot) / (m as f64 + 1.0)
        })
        .collect()
}

/// μ_k = ⟨ψ|T_k(X)|ψ⟩ for X = (H − center)/half, with two moments per matvec.
pub fn moments(h: &SparseOp, psi: &[c64], m: usize, center: f64, half: f64) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(invalid("need at least two moments"));
    }
    let n = psi.len();
    let inv = 1.0 / half;
    let apply_x = |x: &[c64], y: &mut [c64]| {
        h.matvec(x, y);
        for i in 0..n {
            y[i] = (y[i] - x[i] * center) * inv;
        }
    };
    let mut mu = vec![0.0; m];
    let mut prev = psi.to_vec();
    let mut cur = vec![c64::new(0.0, 0.0); n];
    apply_x(psi, &mut cur);
    mu[0] = v::dot(psi, psi).re;
    mu[1] = v::dot(psi, &cur).re;
    let mut next = vec![c64::new(0.0, 0.0); n];
    // prev = T_{k−1}ψ, cur = T_kψ
    let mut k = 1;
    while 2 * k < m {
        mu[2 * k] = 2.0 * v::dot(&cur, &cur).re - mu[0];
        if 2 * k + 1 < m {
            apply_x(&cur, &mut next);
            for i in 0..n {
                next[i] = next[i] * 2.0 - prev[i];
            }
            mu[2 * k + 1] = 2.0 * v::dot(&next, &cur).re - mu[1];
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        if mu[2 * k].abs() > 1.0 + 1e-6 {
            return Err(Error::Numerical(format!("KPM moment {} = {:e} exceeds one: spectrum leaves the bounds", 2 * k, mu[2 * k])));
        }
        k += 1;
    }
    Ok(mu)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralFunction {
    pub omega: Vec<f64>,
    pub g: Vec<f64>,
    pub bounds: (f64, f64),
    pub moments: usize,
}

impl SpectralFunction {
    pub fn grid_step(&self) -> f64 {
        if self.omega.len() > 1 { self.omega[1] - self.omega[0] } else { 0.0 }
    }

    /// ω at the maximum of G.
    pub fn peak(&self) -> f64 {
        let i = (0..self.g.len()).max_by(|&a, &b| self.g[a].total_cmp(&self.g[b])).unwrap_or(0);
        self.omega[i]
    }

    /// Trapezoidal ∫G dω over the grid.
    pub fn integral(&self) -> f64 {
        self.omega.windows(2).zip(self.g.windows(2)).map(|(w, g)| 0.5 * (w[1] - w[0]) * (g[0] + g[1])).sum()
    }

    pub fn min(&self) -> f64 {
        self.g.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates the damped expansion (1/(π a √(1−x²)))[g₀μ₀ + 2Σ g_k μ_k T_k(x)] on the ω grid.
pub fn reconstruct(mu: &[f64], center: f64, half: f64, omega: &[f64]) -> Vec<f64> {
    let g = jackson_kernel(mu.len());
    let c: Vec<f64> = mu.iter().zip(&g).map(|(m, k)| m * k).collect();
    omega
        .iter()
        .map(|&w| {
            let x = (w - center) / half;
            if x.abs() >= 1.0 {
                return 0.0;
            }
            // Clenshaw for Σ' c_k T_k(x)
            let (mut b1, mut b2) = (0.0, 0.0);
            for k in (1..c.len()).rev() {
                let b0 = 2.0 * x * b1 - b2 + 2.0 * c[k];
                b2 = b1;
                b1 = b0;
            }
            let sum = c[0] + x * b1 - b2;
            sum / (PI * half * (1.0 - x * x).sqrt())
        })
        .collect()
}

/// G(ω) for a normalized probe state.
pub fn spectral_function(h: &SparseOp, probe: &[c64], cfg: &KpmConfig) -> Result<SpectralFunction> {
    if cfg.moments < 64 {
        return Err(invalid("KPM needs at least 64 moments"));
    }
    if (v::norm(probe) - 1.0).abs() > 1e-9 {
        return Err(invalid("probe state must be normalized"));
    }
    let (lo, hi) = match cfg.bounds {
        Some(b) => b,
        None => {
            let (a, b) = lanczos_extremes(|x, y| h.matvec(x, y), h.dim(), 300);
            let pad = cfg.padding * (b - a).max(1e-12);
            (a - pad, b + pad)
        }
    };
    if !(hi > lo) {
        return Err(invalid("KPM bounds must satisfy hi > lo"));
    }
    let center = 0.5 * (hi + lo);
    let half = 0.5 * (hi - lo);
    let mu = moments(h, probe, cfg.moments, center, half)?;
    let (w0, w1) = cfg.omega_range.unwrap_or((lo, hi));
    let pts = cfg.omega_points.max(2);
    let omega: Vec<f64> = (0..pts).map(|i| w0 + (w1 - w0) * i as f64 / (pts - 1) as f64).collect();
    let g = reconstruct(&mu, center, half, &omega);
    Ok(SpectralFunction { omega, g, bounds: (lo, hi), moments: cfg.moments })
}

/// The same damped expansion built from exact weights |⟨probe|m⟩|² at energies E_m.
pub fn dense_reference(energies: &[f64], weights: &[f64], moments: usize, bounds: (f64, f64), omega: &[f64]) -> Vec<f64> {
    let center = 0.5 * (bounds.0 + bounds.1);
    let half = 0.5 * (bounds.1 - bounds.0);
    let mut mu = vec![0.0; moments];
    for (e, w) in energies.iter().zip(weights) {
        let theta = ((e - center) / half).clamp(-1.0, 1.0).acos();
        for (k, m) in mu.iter_mut().enumerate() {
            *m += w * (k as f64 * theta).cos();
        }
    }
    reconstruct(&mu, center, half, omega)
}
