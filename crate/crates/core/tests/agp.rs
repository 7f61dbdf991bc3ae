use num_complex::Complex64 as c64;
use scarlab::agp::{self, AptPrediction, SusceptibilityPoint};
use scarlab::hilbert::{SectorBasis, SpinBasis};
use scarlab::linalg::{vec as v, Csr, SparseOp};
use scarlab::mps_engine;
use scarlab::mps_model::{self, MpsFamily, Variant};
use scarlab::spectra;

fn decomposition(fam: &MpsFamily, s: f64) -> spectra::EigenDecomposition {
    let phi = fam.reference_state(s).unwrap();
    spectra::full_diagonalize(&fam.hamiltonian(s).unwrap(), Some(&phi)).unwrap()
}

#[test]
fn feynman_hellmann_matches_finite_difference() {
    let s = 0.37;
    for variant in [Variant::Ground, Variant::Scar] {
        let fam = MpsFamily::with_default_sector(8, variant).unwrap();
        let d = decomposition(&fam, s);
        let row = agp::agp_elements(s, &fam.derivative(s).unwrap(), &d, None).unwrap();
        assert!(row.flagged.is_empty());
        let h = 1e-5;
        let mut dphi = fam.reference_state(s + h).unwrap();
        v::axpy(c64::new(-1.0, 0.0), &fam.reference_state(s - h).unwrap(), &mut dphi);
        v::scale(c64::new(0.5 / h, 0.0), &mut dphi);
        let fd = d.vectors.project(&dphi);
        for n in 0..d.dim() {
            if n == row.reference {
                continue;
            }
            assert!((row.elements[n].norm() - fd[n].norm()).abs() < 1e-6, "{variant:?} n={n}");
            // real Hamiltonians and real eigenvectors make A purely imaginary
            assert!(row.elements[n].re.abs() < 1e-14);
        }
    }
}

#[test]
fn susceptibility_sum_rule_and_embedding_independence() {
    let n = 8;
    for &s in &[0.0, 0.5, 0.9] {
        let exact = mps_engine::fidelity_susceptibility(n, s, 0).unwrap();
        for variant in [Variant::Ground, Variant::Scar] {
            let fam = MpsFamily::with_default_sector(n, variant).unwrap();
            let d = decomposition(&fam, s);
            let chi = agp::agp_elements(s, &fam.derivative(s).unwrap(), &d, None).unwrap().susceptibility();
            assert!((chi - exact).abs() < 1e-6, "{variant:?} s={s}: {chi} vs {exact}");
        }
    }
}

#[test]
fn stencil_forms_agree() {
    let fam = MpsFamily::with_default_sector(10, Variant::Scar).unwrap();
    let f = |s: f64| fam.reference_state(s);
    for &s in &[0.0, 0.4, 1.0] {
        let exact = mps_engine::fidelity_susceptibility(10, s, 0).unwrap();
        let st = agp::fidelity_susceptibility(&f, s, 1e-3, (0.0, 1.0)).unwrap();
        assert!((st.first_derivative_form - exact).abs() < 1e-6, "s={s}");
        if st.second_derivative_form.is_finite() {
            assert!((st.second_derivative_form - exact).abs() < 1e-6, "s={s}");
        }
    }
}

#[test]
fn regularization_vanishes_on_a_gapped_ground_state() {
    let s = 0.2;
    let fam = MpsFamily::with_default_sector(8, Variant::Ground).unwrap();
    let d = decomposition(&fam, s);
    let dh = fam.derivative(s).unwrap();
    let exact = mps_engine::fidelity_susceptibility(8, s, 0).unwrap();
    let mut last = f64::INFINITY;
    for mu in [1e-1, 1e-2, 1e-3, 1e-4] {
        let chi = agp::regularized_susceptibility(&d, &dh, d.scar_index().unwrap(), mu).unwrap();
        let err = (chi - exact).abs();
        assert!(err < last);
        last = err;
    }
    assert!(last < 1e-6 * exact);
}

#[test]
fn gauge_norm_is_the_mean_regularized_susceptibility() {
    let fam = MpsFamily::with_default_sector(6, Variant::Scar).unwrap();
    let d = decomposition(&fam, 0.3);
    let dh = fam.derivative(0.3).unwrap();
    let mu = agp::default_regularization(6, d.dim());
    let direct: f64 = (0..d.dim()).map(|m| agp::regularized_susceptibility(&d, &dh, m, mu).unwrap()).sum::<f64>() / d.dim() as f64;
    let norm = agp::gauge_norm(&d, &dh, mu).unwrap();
    assert!((norm - direct).abs() < 1e-9 * direct);
}

#[test]
fn resolvent_sum_matches_dense_sum() {
    let fam = MpsFamily::with_default_sector(10, Variant::Ground).unwrap();
    for s in [0.0, 1.0] {
        let h = fam.hamiltonian(s).unwrap();
        let dh = fam.derivative(s).unwrap();
        let d = decomposition(&fam, s);
        let dense = agp::apt_boundary_sum(&dh, &d, d.scar_index().unwrap()).unwrap();
        let cg = agp::apt_boundary_sum_resolvent(&h, &dh, &fam.reference_state(s).unwrap(), 1e-12).unwrap();
        assert!((dense - cg).abs() < 1e-8 * dense, "{dense} vs {cg}");
    }
}

/// H(s) = (Δ/2)(cos θ σz + sin θ σx) with θ = θ₁ s has |A₁₀| = θ₁/2 and gap Δ.
#[test]
fn two_level_apt_matches_first_order_result() {
    let (gap, theta1) = (2.0, 0.8);
    let op = |th: f64, scale: f64| {
        let (c, s) = (th.cos() * scale, th.sin() * scale);
        SparseOp::Real(Csr::from_triplets(2, 2, &[(0, 0, c), (1, 1, -c), (0, 1, s), (1, 0, s)]).unwrap())
    };
    let mut sums = vec![];
    for s in [0.0, 1.0] {
        let th = theta1 * s;
        let h = op(th, gap / 2.0);
        let dh = op(th + std::f64::consts::FRAC_PI_2, gap / 2.0 * theta1);
        let d = spectra::full_diagonalize(&h, None).unwrap();
        sums.push(agp::apt_boundary_sum(&dh, &d, 0).unwrap());
    }
    let apt = AptPrediction::new(sums[0], sums[1], 0.99).unwrap();
    // oscillation-averaged first order: |c|² = 2 v² (θ₁/2)² / Δ²
    let v = 0.05;
    let analytic = 1.0 - 2.0 * v * v * (theta1 / 2.0).powi(2) / (gap * gap);
    assert!((apt.fidelity(v) - analytic).abs() < 1e-14);
}

#[test]
fn gapped_ground_state_has_no_crossings() {
    let fam = MpsFamily::with_default_sector(6, Variant::Ground).unwrap();
    let slices: Vec<_> = (0..=10)
        .map(|k| {
            let s = k as f64 / 10.0;
            let phi = fam.reference_state(s).unwrap();
            let dphi = agp::state_derivative(&|x| fam.reference_state(x), s, 1e-4, (0.0, 1.0)).unwrap();
            agp::complement_slice(s, &fam.hamiltonian(s).unwrap(), &phi, &dphi).unwrap()
        })
        .collect();
    let r = agp::crossing_leakage(&slices, 1e-3, 1e-3).unwrap();
    assert!(r.crossings.is_empty() && r.total == 0.0);
}

#[test]
fn complement_slice_reproduces_feynman_hellmann() {
    let fam = MpsFamily::with_default_sector(8, Variant::Scar).unwrap();
    let s = 0.45;
    let phi = fam.reference_state(s).unwrap();
    let dphi = agp::state_derivative(&|x| fam.reference_state(x), s, 1e-3, (0.0, 1.0)).unwrap();
    let slice = agp::complement_slice(s, &fam.hamiltonian(s).unwrap(), &phi, &dphi).unwrap();
    let d = decomposition(&fam, s);
    let row = agp::agp_elements(s, &fam.derivative(s).unwrap(), &d, None).unwrap();
    let total: f64 = slice.agp.iter().map(|a| a * a).sum();
    assert!((total - row.susceptibility()).abs() < 1e-7);
}

#[test]
fn tower_states_do_not_mix_across_sectors() {
    let n = 8;
    let s = 0.3;
    let expanded = |ell: usize, s: f64| -> std::collections::HashMap<u64, c64> {
        let b = SpinBasis::new(n, mps_model::tower_sector(n, ell)).unwrap();
        b.expand_vector(&mps_model::tower_state(n, s, ell, &b).unwrap()).into_iter().collect()
    };
    for ell in 0..=3 {
        let h = 1e-5;
        let (p, m) = (expanded(ell, s + h), expanded(ell, s - h));
        for other in 0..=4 {
            if other == ell {
                continue;
            }
            let bra = expanded(other, s);
            let el: c64 = bra.iter().map(|(c, a)| a.conj() * (p.get(c).copied().unwrap_or_default() - m.get(c).copied().unwrap_or_default()) / (2.0 * h)).sum();
            assert_eq!(el.norm(), 0.0);
        }
    }
}

#[test]
fn crossover_fit_recovers_a_synthetic_law() {
    // χ = N below N★ and e^{2(N − N★)}·N★ above, with ε = e^{−1.1 N★}
    let mut pts = vec![];
    for &n in &[6usize, 8, 10, 12, 14] {
        pts.push(SusceptibilityPoint { n, epsilon: 0.0, chi_scar: n as f64, chi_thermal: 1.0, gauge_norm: 1.0 });
        for &nstar in &[7.0f64, 9.0, 11.0] {
            let x = n as f64;
            let chi = if x < nstar { x } else { nstar * (2.0 * (x - nstar)).exp() };
            pts.push(SusceptibilityPoint { n, epsilon: (-1.1 * nstar).exp(), chi_scar: chi, chi_thermal: 1.0, gauge_norm: 1.0 });
        }
    }
    let r = agp::crossover_analysis(&pts, 2.0).unwrap();
    assert!((r.beta.unwrap() - 2.0).abs() < 1e-9);
    let fit = r.epsilon_fit.unwrap();
    assert!((fit.slope + 1.1).abs() < 0.1, "{}", fit.slope);
}
