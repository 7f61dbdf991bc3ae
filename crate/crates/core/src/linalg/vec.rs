//! Helpers for complex state vectors stored as plain slices.

use num_complex::Complex64 as c64;

/// ⟨a|b⟩ with the first argument conjugated.
pub fn dot(a: &[c64], b: &[c64]) -> c64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &mut [c64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        let inv = 1.0 / n;
        a.iter_mut().for_each(|x| *x *= inv);
    }
    n
}

/// y += alpha x
pub fn axpy(alpha: c64, x: &[c64], y: &mut [c64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: c64, x: &mut [c64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// |⟨a|b⟩|² for normalized inputs.
pub fn fidelity(a: &[c64], b: &[c64]) -> f64 {
    dot(a, b).norm_sqr()
}

pub fn distance(a: &[c64], b: &[c64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub fn from_real(a: &[f64]) -> Vec<c64> {
    a.iter().map(|&x| c64::new(x, 0.0)).collect()
}

/// Multiplies by a global phase so the largest-magnitude entry is real and positive.
pub fn fix_phase(a: &mut [c64]) {
    let Some(big) = a.iter().copied().max_by(|x, y| x.norm_sqr().total_cmp(&y.norm_sqr())) else {
        return;
    };
    if big.norm() > 0.0 {
        let ph = big.conj() / big.norm();
        scale(ph, a);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_conjugates_first_argument() {
        let a = [c64::new(0.0, 1.0)];
        let b = [c64::new(0.0, 1.0)];
        assert_eq!(dot(&a, &b), c64::new(1.0, 0.0));
    }

    #[test]
    fn fix_phase_makes_largest_entry_positive() {
        let mut a = vec![c64::new(0.1, 0.0), c64::new(0.0, -2.0)];
        fix_phase(&mut a);
        assert!((a[1] - c64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((a[0] - c64::new(0.0, 0.1)).norm() < 1e-15);
    }
}
