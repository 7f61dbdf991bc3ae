use num_complex::Complex64 as c64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use scarlab::fqh_model::FqhFamily;
use scarlab::hilbert::SectorBasis;
use scarlab::linalg::{vec as v, Csr, LanczosOptions, SparseOp};
use scarlab::mps_model::{self, LocalTermSpec, MpsFamily, Variant};
use scarlab::spectra::{self, Bipartition};

#[test]
fn local_term_spectrum_is_the_projector_weights() {
    let spec = LocalTermSpec::single(mps_model::J_PLUS);
    let h = mps_model::local_term(0.0, &spec).unwrap();
    let trip: Vec<(usize, usize, c64)> = (0..81).map(|k| (k / 9, k % 9, h[k])).collect();
    let op = SparseOp::Complex(Csr::from_triplets(9, 9, &trip).unwrap());
    let e = scarlab::linalg::eigvalsh(&op).unwrap();
    let mut want: Vec<f64> = mps_model::J_PLUS.to_vec();
    want.extend([0.0; 4]);
    want.sort_by(f64::total_cmp);
    for (a, b) in e.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12, "{e:?}");
    }
}

#[test]
fn n12_scar_is_an_exact_zero_mode() {
    let fam = MpsFamily::with_default_sector(12, Variant::Scar).unwrap();
    let h = fam.hamiltonian(0.0).unwrap();
    let phi = fam.reference_state(0.0).unwrap();
    let d = spectra::full_diagonalize(&h, Some(&phi)).unwrap();
    let scar = d.scar.as_ref().unwrap();
    assert!(d.energies[scar.index].abs() < 1e-10);
    assert!(scar.overlap > 1.0 - 1e-10);
    assert!(d.max_residual(&h) < 1e-9);
}

#[test]
fn lanczos_agrees_with_dense_lowest_pairs() {
    let fam = MpsFamily::with_default_sector(10, Variant::Ground).unwrap();
    let h = fam.hamiltonian(0.3).unwrap();
    let dense = spectra::full_diagonalize(&h, None).unwrap();
    let opts = LanczosOptions { max_iter: 1500, ..Default::default() };
    let part = spectra::lanczos_lowest_pairs(&h, 50, &opts).unwrap();
    assert!(part.energies[0].abs() < 1e-8);
    for k in 0..50 {
        assert!((part.energies[k] - dense.energies[k]).abs() < 1e-8, "k={k}");
        assert!(part.residuals[k] < 1e-8);
    }
}

#[test]
fn eigenvectors_are_complete() {
    let fam = MpsFamily::with_default_sector(8, Variant::Scar).unwrap();
    let d = spectra::full_diagonalize(&fam.hamiltonian(0.6).unwrap(), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<c64> = (0..d.dim()).map(|_| c64::new(rng.random(), rng.random())).collect();
    let amps = d.vectors.project(&x);
    let mut back = vec![c64::default(); d.dim()];
    for (n, a) in amps.iter().enumerate() {
        v::axpy(*a, &d.vector(n), &mut back);
    }
    assert!(v::distance(&back, &x) < 1e-10 * v::norm(&x));
}

#[test]
fn scar_is_identified_along_the_path() {
    let fam = MpsFamily::with_default_sector(8, Variant::Scar).unwrap();
    for k in 0..=10 {
        let s = k as f64 / 10.0;
        let phi = fam.reference_state(s).unwrap();
        let d = spectra::full_diagonalize(&fam.hamiltonian(s).unwrap(), Some(&phi)).unwrap();
        assert!(d.scar.unwrap().overlap > 0.99, "s={s}");
    }
}

#[test]
fn poisson_levels_calibrate_the_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut e = vec![0.0];
    for _ in 0..100_000 {
        let gap: f64 = Exp1.sample(&mut rng);
        e.push(e.last().unwrap() + gap);
    }
    let st = spectra::level_statistics(&e, &[], 20).unwrap();
    assert!((st.r_ave - spectra::R_POISSON).abs() < 0.01, "{}", st.r_ave);
}

#[test]
fn goe_triples_calibrate_the_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut total = 0.0;
    let samples = 100_000;
    for _ in 0..samples {
        let mut g = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let x: f64 = StandardNormal.sample(&mut rng);
                let x = if i == j { x * 2f64.sqrt() } else { x };
                g[i][j] = x;
                g[j][i] = x;
            }
        }
        let trip: Vec<(usize, usize, f64)> = (0..9).map(|k| (k / 3, k % 3, g[k / 3][k % 3])).collect();
        let e = scarlab::linalg::eigvalsh(&SparseOp::Real(Csr::from_triplets(3, 3, &trip).unwrap())).unwrap();
        total += spectra::level_statistics(&e, &[], 1).unwrap().r_ave;
    }
    let r = total / samples as f64;
    assert!((r - spectra::R_GOE).abs() < 0.01, "{r}");
}

#[test]
fn fqh_entropy_is_symmetric_under_swapping_halves() {
    let fam = FqhFamily::new(3, 4, 5.0).unwrap();
    let phi = fam.reference_state(0.3).unwrap();
    let amps = fam.basis.expand_vector(&phi);
    let cut = fam.bipartition();
    let Bipartition::Mask { n_sites, mask } = cut else { unreachable!() };
    let other = Bipartition::Mask { n_sites, mask: !mask & ((1u64 << n_sites) - 1) };
    let a = spectra::entanglement_entropy(&amps, &cut).unwrap();
    let b = spectra::entanglement_entropy(&amps, &other).unwrap();
    assert!((a - b).abs() < 1e-10);
    assert!(a > 0.0 && a < cut.max_entropy());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn entropy_is_bounded(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 4;
        let mut amps: Vec<(u64, c64)> = (0..81u64).map(|c| (c, c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))).collect();
        let norm = amps.iter().map(|a| a.1.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| a.1 /= norm);
        let cut = Bipartition::HalfChain { n };
        let s = spectra::entanglement_entropy(&amps, &cut).unwrap();
        prop_assert!(s >= 0.0 && s <= cut.max_entropy() + 1e-12);
    }
}
