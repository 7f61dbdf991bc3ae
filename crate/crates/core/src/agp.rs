//! Adiabatic gauge potential, fidelity susceptibility, adiabatic perturbation
//! theory and crossing-leakage estimates.

use faer::{Mat, Side};
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fit::{self, LineFit};
use crate::linalg::{vec as v, Eigenvectors, SparseOp};
use crate::spectra::{EigenDecomposition, DEGENERACY_TOL};

/// Matrix elements ⟨n|∂H|ref⟩ below this inside a degenerate subspace count as zero.
const DEGENERATE_COUPLING_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct AgpRow {
    pub s: f64,
    pub reference: usize,
    pub energies: Vec<f64>,
    /// A_{n0} = i⟨n|∂H|0⟩/(E₀ − E_n); zero for n = reference, NaN where flagged.
    pub elements: Vec<c64>,
    /// Degenerate partners that ∂H couples to the reference.
    pub flagged: Vec<usize>,
}

impl AgpRow {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.elements.iter().map(|a| a.norm()).collect()
    }

    /// Σ_n |A_{n0}|² over unflagged states.
    pub fn susceptibility(&self) -> f64 {
        self.elements.iter().filter(|a| a.re.is_finite()).map(|a| a.norm_sqr()).sum()
    }
}

/// Eigenvector n, with the scar replaced by its rotated version.
fn state(d: &EigenDecomposition, n: usize) -> Vec<c64> {
    match &d.scar {
        Some(sc) if sc.index == n => sc.state.clone(),
        _ => d.vector(n),
    }
}

/// Feynman-Hellmann AGP elements towards the reference eigenstate `reference`
/// (the identified scar when `None`).
pub fn agp_elements(s: f64, dh: &SparseOp, d: &EigenDecomposition, reference: Option<usize>) -> Result<AgpRow> {
    let r = reference.or(d.scar_index()).ok_or_else(|| invalid("no reference eigenstate given"))?;
    let psi0 = state(d, r);
    let w = dh.apply(&psi0);
    let proj = d.vectors.project(&w);
    let e0 = d.energies[r];
    let tol = DEGENERACY_TOL * e0.abs().max(1.0);
    let degenerate: Vec<usize> = (0..d.dim()).filter(|&n| n != r && (d.energies[n] - e0).abs() < tol).collect();
    let mut elements: Vec<c64> = (0..d.dim())
        .map(|n| if n == r { c64::new(0.0, 0.0) } else { c64::new(0.0, 1.0) * proj[n] / (e0 - d.energies[n]) })
        .collect();
    let mut flagged = Vec::new();
    if !degenerate.is_empty() {
        // complement of the (rotated) reference inside its degenerate subspace
        let mut basis: Vec<Vec<c64>> = vec![psi0.clone()];
        for &n in degenerate.iter().chain(std::iter::once(&r)) {
            let mut x = d.vector(n);
            for b in &basis {
                let c = v::dot(b, &x);
                v::axpy(-c, b, &mut x);
            }
            if v::normalize(&mut x) > 1e-6 {
                basis.push(x);
            }
        }
        let coupling: f64 = basis[1..].iter().map(|b| v::dot(b, &w).norm_sqr()).sum::<f64>().sqrt();
        for &n in &degenerate {
            if coupling > DEGENERATE_COUPLING_TOL {
                elements[n] = c64::new(f64::NAN, f64::NAN);
                flagged.push(n);
            } else {
                elements[n] = c64::new(0.0, 0.0);
            }
        }
    }
    Ok(AgpRow { s, reference: r, energies: d.energies.clone(), elements, flagged })
}

/// Derivative of a state family by a five-point stencil, one-sided near the
/// ends of `domain`.
pub fn state_derivative(f: &dyn Fn(f64) -> Result<Vec<c64>>, s: f64, h: f64, domain: (f64, f64)) -> Result<Vec<c64>> {
    let pts: Vec<(f64, f64)> = if s - 2.0 * h >= domain.0 && s + 2.0 * h <= domain.1 {
        vec![(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)]
    } else if s + 4.0 * h <= domain.1 {
        vec![(0.0, -25.0), (1.0, 48.0), (2.0, -36.0), (3.0, 16.0), (4.0, -3.0)]
    } else {
        vec![(0.0, 25.0), (-1.0, -48.0), (-2.0, 36.0), (-3.0, -16.0), (-4.0, 3.0)]
    };
    let mut out: Option<Vec<c64>> = None;
    for (k, w) in pts {
        let x = f(s + k * h)?;
        let acc = out.get_or_insert_with(|| vec![c64::new(0.0, 0.0); x.len()]);
        v::axpy(c64::new(w / (12.0 * h), 0.0), &x, acc);
    }
    out.ok_or(Error::ZeroState)
}

/// Second derivative by a central five-point stencil.
fn state_second_derivative(f: &dyn Fn(f64) -> Result<Vec<c64>>, s: f64, h: f64) -> Result<Vec<c64>> {
    let mut out: Option<Vec<c64>> = None;
    for (k, w) in [(-2.0, -1.0), (-1.0, 16.0), (0.0, -30.0), (1.0, 16.0), (2.0, -1.0)] {
        let x = f(s + k * h)?;
        let acc = out.get_or_insert_with(|| vec![c64::new(0.0, 0.0); x.len()]);
        v::axpy(c64::new(w / (12.0 * h * h), 0.0), &x, acc);
    }
    out.ok_or(Error::ZeroState)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StencilSusceptibility {
    /// ⟨∂ψ|∂ψ⟩ − |⟨ψ|∂ψ⟩|².
    pub first_derivative_form: f64,
    /// −Re⟨ψ|∂²ψ⟩ − |⟨ψ|∂ψ⟩|²; NaN near the ends of the domain.
    pub second_derivative_form: f64,
}

/// χ₀(s) from a normalized, smoothly gauged state family.
pub fn fidelity_susceptibility(f: &dyn Fn(f64) -> Result<Vec<c64>>, s: f64, h: f64, domain: (f64, f64)) -> Result<StencilSusceptibility> {
    let psi = f(s)?;
    let d1 = state_derivative(f, s, h, domain)?;
    let overlap = v::dot(&psi, &d1);
    let first = v::dot(&d1, &d1).re - overlap.norm_sqr();
    let second = if s - 2.0 * h >= domain.0 && s + 2.0 * h <= domain.1 {
        let d2 = state_second_derivative(f, s, h)?;
        -v::dot(&psi, &d2).re - overlap.norm_sqr()
    } else {
        f64::NAN
    };
    if first < -1e-8 {
        return Err(Error::Numerical(format!("stencil gave negative susceptibility {first:e}; reduce the step")));
    }
    Ok(StencilSusceptibility { first_derivative_form: first.max(0.0), second_derivative_form: second })
}

/// The eigenvector nearest in energy to `m` (ties go to the lower index).
pub fn closest_in_energy(energies: &[f64], m: usize) -> Option<usize> {
    (0..energies.len())
        .filter(|&n| n != m)
        .min_by(|&a, &b| (energies[a] - energies[m]).abs().total_cmp(&(energies[b] - energies[m]).abs()))
}

fn complex_vectors(v: &Eigenvectors) -> Mat<c64> {
    match v {
        Eigenvectors::Real(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0)),
        Eigenvectors::Complex(m) => m.clone(),
    }
}

/// χ̃_m = Σ_{n≠m} |⟨n|∂H|m⟩|² / (μ² + (E_n − E_m)²).
pub fn regularized_susceptibility(d: &EigenDecomposition, dh: &SparseOp, m: usize, mu: f64) -> Result<f64> {
    if m >= d.dim() {
        return Err(invalid("state index out of range"));
    }
    let proj = d.vectors.project(&dh.apply(&state(d, m)));
    Ok(regularized_sum(&proj, &d.energies, m, mu))
}

fn regularized_sum(col: &[c64], e: &[f64], m: usize, mu: f64) -> f64 {
    (0..e.len()).filter(|&n| n != m).map(|n| col[n].norm_sqr() / (mu * mu + (e[n] - e[m]).powi(2))).sum()
}

/// ‖Ã‖² = (1/D) Σ_m χ̃_m over the whole sector.
pub fn gauge_norm(d: &EigenDecomposition, dh: &SparseOp, mu: f64) -> Result<f64> {
    let vecs = complex_vectors(&d.vectors);
    let dim = d.dim();
    let cols: Vec<Vec<c64>> = (0..dim).into_par_iter().map(|j| dh.apply(&(0..dim).map(|i| vecs[(i, j)]).collect::<Vec<_>>())).collect();
    let w = Mat::from_fn(dim, dim, |i, j| cols[j][i]);
    let m = vecs.adjoint() * &w;
    let total: f64 = (0..dim)
        .into_par_iter()
        .map(|j| {
            let col: Vec<c64> = (0..dim).map(|i| m[(i, j)]).collect();
            regularized_sum(&col, &d.energies, j, mu)
        })
        .sum();
    Ok(total / dim as f64)
}

/// μ = N/D.
pub fn default_regularization(n: usize, dim: usize) -> f64 {
    n as f64 / dim as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct SusceptibilityPoint {
    pub n: usize,
    pub epsilon: f64,
    pub chi_scar: f64,
    pub chi_thermal: f64,
    pub gauge_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossoverReport {
    /// Power law χ̃ = A N^γ fitted to the unperturbed data.
    pub power: LineFit,
    /// Shared exponential slope β of the perturbed data.
    pub beta: Option<f64>,
    /// (ε, N★) for every ε whose exponential regime was reached.
    pub crossovers: Vec<(f64, f64)>,
    /// ln ε = ln a − b N★.
    pub epsilon_fit: Option<LineFit>,
}

/// Locates the power-law to exponential crossover N★(ε).
///
/// Points more than `excess`× above the ε = 0 power law are taken as
/// exponential. β comes from the ε with the most such points; the other ε
/// keep β fixed and fit only the intercept.
pub fn crossover_analysis(points: &[SusceptibilityPoint], excess: f64) -> Result<CrossoverReport> {
    let clean: Vec<&SusceptibilityPoint> = points.iter().filter(|p| p.epsilon == 0.0).collect();
    let power = fit::power_law(
        &clean.iter().map(|p| p.n as f64).collect::<Vec<_>>(),
        &clean.iter().map(|p| p.chi_scar).collect::<Vec<_>>(),
    )?;
    let law = |n: f64| power.intercept + power.slope * n.ln();
    let mut eps: Vec<f64> = points.iter().map(|p| p.epsilon).filter(|&e| e > 0.0).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let regime = |e: f64| -> Vec<(f64, f64)> {
        points
            .iter()
            .filter(|p| p.epsilon == e && p.chi_scar > 0.0)
            .map(|p| (p.n as f64, p.chi_scar.ln()))
            .filter(|&(n, y)| y - law(n) > excess.ln())
            .collect()
    };
    let reference = eps.iter().copied().max_by_key(|&e| (regime(e).len(), (e * 1e9) as i64)).filter(|&e| regime(e).len() >= 2);
    let Some(e_ref) = reference else {
        return Ok(CrossoverReport { power, beta: None, crossovers: vec![], epsilon_fit: None });
    };
    let pts = regime(e_ref);
    let beta = fit::line(&pts.iter().map(|p| p.0).collect::<Vec<_>>(), &pts.iter().map(|p| p.1).collect::<Vec<_>>())?.slope;
    let mut crossovers = Vec::new();
    for &e in &eps {
        let pts = regime(e);
        if pts.is_empty() || beta <= 0.0 {
            continue;
        }
        let c = pts.iter().map(|(n, y)| y - beta * n).sum::<f64>() / pts.len() as f64;
        // solve law(N) = c + βN on N > 1
        let g = |n: f64| law(n) - c - beta * n;
        let (mut a, mut b) = (1.0, 1000.0);
        if g(a) * g(b) > 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if g(a) * g(mid) <= 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        crossovers.push((e, 0.5 * (a + b)));
    }
    let epsilon_fit = if crossovers.len() >= 2 {
        Some(fit::line(&crossovers.iter().map(|c| c.1).collect::<Vec<_>>(), &crossovers.iter().map(|c| c.0.ln()).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok(CrossoverReport { power, beta: Some(beta), crossovers, epsilon_fit })
}

/// Σ_{n≠0} |⟨n|∂H|0⟩|² / (E_n − E₀)⁴ from a dense decomposition.
pub fn apt_boundary_sum(dh: &SparseOp, d: &EigenDecomposition, reference: usize) -> Result<f64> {
    let psi = d.vector(reference);
    let proj = d.vectors.project(&dh.apply(&psi));
    let e0 = d.energies[reference];
    let mut total = 0.0;
    for n in 0..d.dim() {
        if n == reference {
            continue;
        }
        let gap = d.energies[n] - e0;
        let c = proj[n].norm_sqr();
        if gap.abs() < 1e-6 {
            if c > DEGENERATE_COUPLING_TOL {
                return Err(Error::Unsupported("reference is not gapped; use crossing_leakage".into()));
            }
            continue;
        }
        total += c / gap.powi(4);
    }
    Ok(total)
}

/// Same sum as [`apt_boundary_sum`] without diagonalizing: ‖(H − E₀)⁻² Q ∂H|0⟩‖²
/// with Q = 1 − |0⟩⟨0|, by conjugate gradients on the complement of |0⟩.
pub fn apt_boundary_sum_resolvent(h: &SparseOp, dh: &SparseOp, ground: &[c64], tol: f64) -> Result<f64> {
    let e0 = h.expectation(ground);
    let project = |x: &mut Vec<c64>| {
        let c = v::dot(ground, x);
        v::axpy(-c, ground, x);
    };
    let mut b = dh.apply(ground);
    project(&mut b);
    let x = cg_shifted(h, e0, &b, tol, &project)?;
    let y = cg_shifted(h, e0, &x, tol, &project)?;
    Ok(v::dot(&y, &y).re)
}

fn cg_shifted(h: &SparseOp, shift: f64, b: &[c64], tol: f64, project: &dyn Fn(&mut Vec<c64>)) -> Result<Vec<c64>> {
    let n = b.len();
    let apply = |x: &[c64]| -> Vec<c64> {
        let mut y = h.apply(x);
        v::axpy(c64::new(-shift, 0.0), x, &mut y);
        let mut y = y;
        project(&mut y);
        y
    };
    let bnorm = v::norm(b);
    if bnorm == 0.0 {
        return Ok(vec![c64::new(0.0, 0.0); n]);
    }
    let mut x = vec![c64::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = v::dot(&r, &r).re;
    let max_iter = 20 * n.max(100);
    for it in 0..max_iter {
        let ap = apply(&p);
        let alpha = rr / v::dot(&p, &ap).re;
        v::axpy(c64::new(alpha, 0.0), &p, &mut x);
        v::axpy(c64::new(-alpha, 0.0), &ap, &mut r);
        let rr_new = v::dot(&r, &r).re;
        if rr_new.sqrt() < tol * bnorm {
            project(&mut x);
            return Ok(x);
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + p[i] * beta;
        }
        rr = rr_new;
        if it + 1 == max_iter {
            break;
        }
    }
    Err(Error::NotConverged { iterations: max_iter, residual: rr.sqrt() / bnorm })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AptPrediction {
    /// Σ_n |A_{n0}|²/ΔE_n² at s = 0 and at s = 1.
    pub start_sum: f64,
    pub end_sum: f64,
    pub v_threshold: f64,
    pub threshold: f64,
}

impl AptPrediction {
    pub fn new(start_sum: f64, end_sum: f64, threshold: f64) -> Result<Self> {
        let total = start_sum + end_sum;
        if !(total > 0.0) || !(threshold > 0.0 && threshold < 1.0) {
            return Err(invalid("APT needs a positive boundary sum and a threshold in (0, 1)"));
        }
        Ok(Self { start_sum, end_sum, v_threshold: ((1.0 - threshold) / total).sqrt(), threshold })
    }

    /// F(v) = 1 − v² (S₀ + S₁).
    pub fn fidelity(&self, v: f64) -> f64 {
        1.0 - v * v * (self.start_sum + self.end_sum)
    }
}

/// One level of H restricted to the complement of the scar, tracked across s.
#[derive(Clone, Debug, Serialize)]
pub struct Crossing {
    /// Position of the level in the energy-ordered complement spectrum.
    pub level: usize,
    pub s: f64,
    pub slope: f64,
    pub agp: f64,
    /// 2π|A|² v/|α|, or zero when tangential.
    pub population: f64,
    pub tangential: bool,
    /// v is not small against δ²|α|/2 with δ the grid spacing.
    pub fresnel_doubtful: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeakageReport {
    pub v: f64,
    pub crossings: Vec<Crossing>,
    /// Σ over crossings (contributions added in norm).
    pub total: f64,
}

/// Complement spectrum E_k(s) − E₀(s) and |A_{k0}(s)| on one grid point.
#[derive(Clone, Debug)]
pub struct ComplementSlice {
    pub s: f64,
    pub gaps: Vec<f64>,
    pub agp: Vec<f64>,
}

/// Diagonalizes H(s) + λ|Φ₀⟩⟨Φ₀| to push the exact eigenstate Φ₀ out of the spectrum,
/// and evaluates |A_{k0}| = |⟨k|∂_sΦ₀⟩| for the remaining levels.
pub fn complement_slice(s: f64, h: &SparseOp, phi: &[c64], dphi: &[c64]) -> Result<ComplementSlice> {
    let e0 = h.expectation(phi);
    let dim = h.dim();
    let shift = h.gershgorin_radius() * 2.0 + 10.0;
    let mut m = h.to_complex().to_dense();
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] += phi[i] * phi[j].conj() * shift;
        }
    }
    let dec = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("dense eigensolver failed: {e:?}")))?;
    let sv = dec.S().column_vector();
    let e: Vec<f64> = (0..dim).map(|i| sv[i].re).collect();
    let vecs = Eigenvectors::Complex(dec.U().to_owned());
    let top = vecs.column(dim - 1);
    if v::fidelity(&top, phi) < 1.0 - 1e-8 {
        return Err(Error::Numerical("reference state is not an exact eigenstate; cannot split it off".into()));
    }
    let proj = vecs.project(dphi);
    Ok(ComplementSlice { s, gaps: e[..dim - 1].iter().map(|x| x - e0).collect(), agp: proj[..dim - 1].iter().map(|a| a.norm()).collect() })
}

/// Landau-Zener style leakage summed over level crossings with the scar.
pub fn crossing_leakage(slices: &[ComplementSlice], v: f64, min_slope: f64) -> Result<LeakageReport> {
    if slices.len() < 2 {
        return Err(invalid("crossing detection needs at least two grid points"));
    }
    let mut crossings = Vec::new();
    for w in slices.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let ds = b.s - a.s;
        for k in 0..a.gaps.len().min(b.gaps.len()) {
            let (ga, gb) = (a.gaps[k], b.gaps[k]);
            if ga == 0.0 || ga.signum() == gb.signum() {
                continue;
            }
            let x = ga / (ga - gb);
            let slope = (gb - ga) / ds;
            let agp = a.agp[k] + x * (b.agp[k] - a.agp[k]);
            let tangential = slope.abs() < min_slope;
            let population = if tangential { 0.0 } else { 2.0 * std::f64::consts::PI * agp * agp * v / slope.abs() };
            crossings.push(Crossing {
                level: k,
                s: a.s + x * ds,
                slope,
                agp,
                population,
                tangential,
                fresnel_doubtful: v > 0.5 * ds * ds * slope.abs(),
            });
        }
    }
    let total = crossings.iter().map(|c| c.population).sum();
    Ok(LeakageReport { v, crossings, total })
}
