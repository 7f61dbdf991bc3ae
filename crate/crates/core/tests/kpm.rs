use scarlab::fqh_model::FqhFamily;
use scarlab::kpm::{self, KpmConfig};
use scarlab::linalg::{eigh, vec as v};
use scarlab::mps_model::{MpsFamily, Variant};

#[test]
fn moments_match_dense_weights() {
    let fam = MpsFamily::with_default_sector(8, Variant::Scar).unwrap();
    let h = fam.hamiltonian(0.2).unwrap();
    let mut probe = fam.reference_state(0.5).unwrap();
    v::normalize(&mut probe);
    let (e, vecs) = eigh(&h).unwrap();
    let w: Vec<f64> = vecs.project(&probe).iter().map(|a| a.norm_sqr()).collect();
    let (center, half) = (0.5 * (e[0] + e[e.len() - 1]), 0.6 * (e[e.len() - 1] - e[0]));
    let mu = kpm::moments(&h, &probe, 257, center, half).unwrap();
    for (k, m) in mu.iter().enumerate() {
        let exact: f64 = e.iter().zip(&w).map(|(x, p)| p * (k as f64 * ((x - center) / half).acos()).cos()).sum();
        assert!((m - exact).abs() < 1e-10, "k={k}");
    }
}

#[test]
fn spectral_function_is_normalized_and_nonnegative() {
    let fam = FqhFamily::new(3, 4, -5.0).unwrap();
    let h = fam.hamiltonian(0.0).unwrap();
    let probe = fam.reference_state(0.0).unwrap();
    let g = kpm::spectral_function(&h, &probe, &KpmConfig::default()).unwrap();
    assert!((g.integral() - 1.0).abs() < 1e-3, "{}", g.integral());
    assert!(g.min() >= -1e-8);
    // the exact eigenstate gives one sharp peak at its energy
    assert!(g.peak().abs() < g.grid_step(), "{}", g.peak());
}

#[test]
fn kpm_agrees_with_dense_expansion() {
    let plus = FqhFamily::new(3, 4, 5.0).unwrap();
    let minus = FqhFamily::new(3, 4, -5.0).unwrap();
    let hp = plus.hamiltonian(0.0).unwrap();
    let hm = minus.hamiltonian(0.0).unwrap();
    let (_, vp) = eigh(&hp).unwrap();
    let (em, vm) = eigh(&hm).unwrap();
    let cfg = KpmConfig { moments: 512, omega_points: 1024, ..Default::default() };
    for n in [1, 3] {
        let probe = vp.column(n);
        let g = kpm::spectral_function(&hm, &probe, &cfg).unwrap();
        let w: Vec<f64> = vm.project(&probe).iter().map(|a| a.norm_sqr()).collect();
        let dense = kpm::dense_reference(&em, &w, cfg.moments, g.bounds, &g.omega);
        let diff = g.g.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "n={n}: {diff}");
    }
}

#[test]
fn too_narrow_bounds_are_detected() {
    let fam = MpsFamily::with_default_sector(8, Variant::Scar).unwrap();
    let h = fam.hamiltonian(0.2).unwrap();
    let probe = fam.reference_state(0.2).unwrap();
    let mut x: Vec<_> = probe.iter().enumerate().map(|(i, a)| a + scarlab::c64::new(0.01 * i as f64, 0.0)).collect();
    v::normalize(&mut x);
    let cfg = KpmConfig { moments: 256, bounds: Some((-1.0, 1.0)), ..Default::default() };
    assert!(kpm::spectral_function(&h, &x, &cfg).is_err());
}
