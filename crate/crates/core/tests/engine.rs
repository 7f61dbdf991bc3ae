use std::sync::Arc;

use num_complex::Complex64 as c64;
use scarlab::hilbert::SpinBasis;
use scarlab::linalg::{vec as v, SparseOp};
use scarlab::mps_engine;
use scarlab::mps_model::{self, TwoSite};

fn tower(n: usize, ell: usize) -> Arc<SpinBasis> {
    Arc::new(SpinBasis::new(n, mps_model::tower_sector(n, ell)).unwrap())
}

#[test]
fn tower_fidelity_matches_dense_vectors() {
    let n = 8;
    for ell in 0..=4 {
        let b = tower(n, ell);
        let p0 = mps_model::tower_state(n, 0.0, ell, &b).unwrap();
        for &s in &[0.25, 0.8] {
            let ps = mps_model::tower_state(n, s, ell, &b).unwrap();
            let dense = v::fidelity(&p0, &ps).ln();
            let engine = mps_engine::log_instantaneous_fidelity(n, s, ell).unwrap();
            assert!((dense - engine).abs() < 1e-10, "ell={ell} s={s}: {dense} vs {engine}");
        }
    }
}

#[test]
fn force_uncertainty_matches_dense_variance() {
    let n = 8;
    let s = 0.35;
    let op = mps_engine::k0_projector_derivative(s);
    let two: TwoSite = std::array::from_fn(|i| c64::new(op[i], 0.0));
    for ell in [0usize, 1, 2] {
        let b = tower(n, ell);
        let vop = SparseOp::Complex(mps_model::assemble_bond_operators(&b, &[two]).unwrap().remove(0));
        let psi = mps_model::tower_state(n, s, ell, &b).unwrap();
        let vpsi = vop.apply(&psi);
        let mean = v::dot(&psi, &vpsi).re;
        let var = v::dot(&vpsi, &vpsi).re - mean * mean;
        let (m, var_engine) = mps_engine::bond_sum_variance(n, s, ell, &op).unwrap();
        assert!((m - mean).abs() < 1e-10, "ell={ell}: mean {m} vs {mean}");
        assert!((var - var_engine).abs() < 1e-10, "ell={ell}: var {var_engine} vs {var}");
    }
}

#[test]
fn susceptibility_matches_finite_difference_overlap() {
    let n = 10;
    let (s, d) = (0.4, 1e-4);
    for ell in [0usize, 1] {
        let b = tower(n, ell);
        let lo = mps_model::tower_state(n, s - d, ell, &b).unwrap();
        let hi = mps_model::tower_state(n, s + d, ell, &b).unwrap();
        let fd = (1.0 - v::fidelity(&lo, &hi)) / (4.0 * d * d);
        let chi = mps_engine::fidelity_susceptibility(n, s, ell).unwrap();
        assert!((chi - fd).abs() < 1e-5 * chi.max(1.0), "ell={ell}: {chi} vs {fd}");
    }
}

#[test]
fn catastrophe_exponent_is_extensive() {
    let a = mps_engine::catastrophe_exponent(100, 0, 1.0, 21).unwrap();
    let b = mps_engine::catastrophe_exponent(200, 0, 1.0, 21).unwrap();
    assert!((b.c_n / a.c_n - 2.0).abs() < 1e-6);
    assert!(a.c_n / 100.0 > 0.25 && a.c_n / 100.0 < 0.31);
}
