use faer::{Mat, Side};
use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vec::{axpy, dot, normalize};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub check_every: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 600, check_every: 10, seed: 7 }
    }
}

fn random_start(dim: usize, seed: u64) -> Vec<c64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<c64> = (0..dim).map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    normalize(&mut v);
    v
}

struct Krylov {
    basis: Vec<Vec<c64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

/// One Lanczos step with two passes of full reorthogonalization.
/// Returns false when the Krylov space is exhausted.
fn extend<F: Fn(&[c64], &mut [c64])>(apply: &F, k: &mut Krylov, rng: &mut ChaCha8Rng) -> bool {
    let dim = k.basis[0].len();
    let j = k.basis.len() - 1;
    let mut w = vec![c64::default(); dim];
    apply(&k.basis[j], &mut w);
    let a = dot(&k.basis[j], &w).re;
    k.alpha.push(a);
    for _ in 0..2 {
        for q in &k.basis {
            let c = dot(q, &w);
            axpy(-c, q, &mut w);
        }
    }
    let b = normalize(&mut w);
    if k.basis.len() >= dim {
        return false;
    }
    if b < 1e-12 {
        // invariant subspace: continue with a fresh orthogonal direction
        let mut fresh: Vec<c64> = (0..dim).map(|_| c64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
        for _ in 0..2 {
            for q in &k.basis {
                let c = dot(q, &fresh);
                axpy(-c, q, &mut fresh);
            }
        }
        normalize(&mut fresh);
        k.beta.push(0.0);
        k.basis.push(fresh);
    } else {
        k.beta.push(b);
        k.basis.push(w);
    }
    true
}

/// Ritz values, Ritz vectors (in Krylov coordinates) and residual estimates.
fn ritz(k: &Krylov, m: usize) -> (Vec<f64>, Mat<f64>, Vec<f64>) {
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            k.alpha[i]
        } else if i + 1 == j {
            k.beta[i]
        } else if j + 1 == i {
            k.beta[j]
        } else {
            0.0
        }
    });
    let e = t.self_adjoint_eigen(Side::Lower).expect("tridiagonal eigensolver");
    let s = e.S().column_vector();
    let vals: Vec<f64> = (0..m).map(|i| s[i]).collect();
    let u = e.U().to_owned();
    let bnext = if k.beta.len() >= m { k.beta[m - 1] } else { 0.0 };
    let res = (0..m).map(|i| (bnext * u[(m - 1, i)]).abs()).collect();
    (vals, u, res)
}

/// Lowest `count` eigenpairs of a Hermitian operator given as a matvec.
/// Returns energies, eigenvectors and residual estimates. Exactly degenerate
/// eigenvalues are resolved only as far as the random start allows.
pub fn lanczos_lowest<F: Fn(&[c64], &mut [c64])>(
    apply: F,
    dim: usize,
    count: usize,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, Vec<Vec<c64>>, Vec<f64>)> {
    let count = count.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let mut k = Krylov { basis: vec![random_start(dim, opts.seed)], alpha: vec![], beta: vec![] };
    let max_iter = opts.max_iter.min(dim).max(count);
    let mut worst = f64::INFINITY;
    loop {
        let more = extend(&apply, &mut k, &mut rng);
        let m = k.alpha.len();
        let done = !more || m >= max_iter;
        if m >= count && (m % opts.check_every == 0 || done) {
            let (vals, u, res) = ritz(&k, m);
            worst = res[..count].iter().cloned().fold(0.0, f64::max);
            if worst < opts.tol || !more {
                let vecs = (0..count)
                    .map(|i| {
                        let mut v = vec![c64::default(); dim];
                        for j in 0..m {
                            axpy(c64::new(u[(j, i)], 0.0), &k.basis[j], &mut v);
                        }
                        normalize(&mut v);
                        v
                    })
                    .collect();
                return Ok((vals[..count].to_vec(), vecs, res[..count].to_vec()));
            }
        }
        if done {
            return Err(Error::NotConverged { iterations: m, residual: worst });
        }
    }
}

/// Rigorous-ish enclosure [min, max] of the spectrum: extremal Ritz values
/// widened by their residual estimates.
pub fn lanczos_extremes<F: Fn(&[c64], &mut [c64])>(apply: F, dim: usize, max_iter: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut k = Krylov { basis: vec![random_start(dim, 3)], alpha: vec![], beta: vec![] };
    let mut last = (0.0, 0.0);
    loop {
        let more = extend(&apply, &mut k, &mut rng);
        let m = k.alpha.len();
        if m % 10 == 0 || !more || m >= max_iter.min(dim) {
            let (vals, _, res) = ritz(&k, m);
            let lo = vals[0] - res[0];
            let hi = vals[m - 1] + res[m - 1];
            last = (lo, hi);
            let width = (hi - lo).abs().max(1e-300);
            if !more || m >= max_iter.min(dim) || (res[0] < 1e-6 * width && res[m - 1] < 1e-6 * width) {
                return last;
            }
        }
        if m > dim {
            return last;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_apply(d: &[f64]) -> impl Fn(&[c64], &mut [c64]) + '_ {
        move |x, y| {
            for i in 0..d.len() {
                y[i] = x[i] * d[i];
            }
        }
    }

    #[test]
    fn finds_lowest_of_diagonal_operator() {
        let d: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin() * 3.0 + i as f64 * 0.05).collect();
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        let (vals, vecs, _) = lanczos_lowest(diag_apply(&d), d.len(), 5, &LanczosOptions::default()).unwrap();
        for i in 0..5 {
            assert!((vals[i] - sorted[i]).abs() < 1e-9, "{} vs {}", vals[i], sorted[i]);
            let mut hv = vec![c64::default(); d.len()];
            diag_apply(&d)(&vecs[i], &mut hv);
            axpy(c64::new(-vals[i], 0.0), &vecs[i], &mut hv);
            assert!(super::super::vec::norm(&hv) < 1e-7);
        }
    }

    #[test]
    fn extremes_enclose_spectrum() {
        let d: Vec<f64> = (0..500).map(|i| ((i * 7919) % 1000) as f64 / 100.0 - 4.0).collect();
        let (lo, hi) = lanczos_extremes(diag_apply(&d), d.len(), 120);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= min + 1e-9 && hi >= max - 1e-9, "{lo} {hi} vs {min} {max}");
    }
}
