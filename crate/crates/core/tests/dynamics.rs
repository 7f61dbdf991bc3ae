use num_complex::Complex64 as c64;
use scarlab::dynamics::{self, HamiltonianFamily, PropagatorConfig, RampKind, RampProtocol, RestartFile, Scheme, VelocityScan};
use scarlab::linalg::{eigh, vec as v, Csr, SparseOp};
use scarlab::mps_engine;
use scarlab::mps_model::{MpsFamily, Variant};
use scarlab::Result;

/// H(s) = a(s − 1/2)σz + gσx.
struct TwoLevel {
    a: f64,
    g: f64,
}

impl HamiltonianFamily for TwoLevel {
    fn dim(&self) -> usize {
        2
    }
    fn hamiltonian(&self, s: f64) -> Result<SparseOp> {
        let z = self.a * (s - 0.5);
        Ok(SparseOp::Real(Csr::from_triplets(2, 2, &[(0, 0, z), (1, 1, -z), (0, 1, self.g), (1, 0, self.g)])?))
    }
    fn derivative(&self, _s: f64) -> Result<SparseOp> {
        Ok(SparseOp::Real(Csr::from_triplets(2, 2, &[(0, 0, self.a), (1, 1, -self.a)])?))
    }
    fn reference_state(&self, s: f64) -> Result<Vec<c64>> {
        let (_, vecs) = eigh(&self.hamiltonian(s)?)?;
        let mut x = vecs.column(0);
        v::fix_phase(&mut x);
        Ok(x)
    }
}

fn dense_exp(h: &SparseOp, psi: &[c64], tau: f64) -> Vec<c64> {
    let (e, vecs) = eigh(h).unwrap();
    let amps = vecs.project(psi);
    let mut out = vec![c64::default(); psi.len()];
    for (n, a) in amps.iter().enumerate() {
        v::axpy(a * c64::from_polar(1.0, -e[n] * tau), &vecs.column(n), &mut out);
    }
    out
}

#[test]
fn chebyshev_matches_dense_exponential() {
    let fam = MpsFamily::with_default_sector(8, Variant::Scar).unwrap();
    let h = fam.hamiltonian(0.3).unwrap();
    let psi = {
        let mut x: Vec<c64> = (0..h.dim()).map(|i| c64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        v::normalize(&mut x);
        x
    };
    let bounds = dynamics::spectral_bounds(&fam, &[0.3], 0.05).unwrap();
    for tau in [0.01, 0.7, 5.0] {
        let (x, _) = dynamics::chebyshev_step(&h, &psi, tau, bounds, 1e-14).unwrap();
        assert!(v::distance(&x, &dense_exp(&h, &psi, tau)) < 1e-12, "tau={tau}");
    }
}

#[test]
fn wrong_bounds_are_detected() {
    let fam = MpsFamily::with_default_sector(8, Variant::Scar).unwrap();
    let h = fam.hamiltonian(0.3).unwrap();
    let (lo, hi) = dynamics::spectral_bounds(&fam, &[0.3], 0.0).unwrap();
    let mut x: Vec<c64> = vec![c64::new(1.0, 0.0); h.dim()];
    v::normalize(&mut x);
    let shrunk = (lo + 0.4 * (hi - lo), hi - 0.4 * (hi - lo));
    assert!(dynamics::chebyshev_step(&h, &x, 20.0, shrunk, 1e-14).is_err());
}

#[test]
fn frozen_ramp_keeps_the_eigenstate() {
    let fam = MpsFamily::with_default_sector(8, Variant::Scar).unwrap();
    let ramp = RampProtocol::new(RampKind::Linear, 1e-3, 0.4, 0.4).unwrap();
    let psi = fam.reference_state(0.4).unwrap();
    let rec = dynamics::propagate(&fam, &psi, &ramp, &PropagatorConfig::default()).unwrap();
    assert!((1.0 - rec.final_fidelity()).abs() < 1e-9);
    assert!(rec.max_norm_drift() < 1e-9);
}

#[test]
fn sudden_quench_reproduces_instantaneous_fidelity() {
    let n = 8;
    let fam = MpsFamily::with_default_sector(n, Variant::Ground).unwrap();
    let ramp = RampProtocol::new(RampKind::Linear, 1e7, 0.0, 1.0).unwrap();
    let f = dynamics::ramp_fidelity(&fam, &ramp, &PropagatorConfig::default()).unwrap();
    let c = mps_engine::instantaneous_fidelity(n, 1.0).unwrap();
    assert!((f - c).abs() < 1e-5, "{f} vs {c}");
}

/// Classical fourth-order Runge-Kutta on i ψ' = H(s(t)) ψ.
fn rk4(fam: &MpsFamily, ramp: &RampProtocol, dt: f64) -> Vec<c64> {
    let mut psi = fam.reference_state(ramp.s_start).unwrap();
    let steps = (ramp.duration() / dt).round() as usize;
    let rhs = |t: f64, x: &[c64]| -> Vec<c64> {
        let h = fam.hamiltonian(ramp.s(t)).unwrap();
        h.apply(x).into_iter().map(|y| y * c64::new(0.0, -1.0)).collect()
    };
    let add = |x: &[c64], k: &[c64], w: f64| -> Vec<c64> { x.iter().zip(k).map(|(a, b)| a + b * w).collect() };
    for i in 0..steps {
        let t = i as f64 * dt;
        let k1 = rhs(t, &psi);
        let k2 = rhs(t + 0.5 * dt, &add(&psi, &k1, 0.5 * dt));
        let k3 = rhs(t + 0.5 * dt, &add(&psi, &k2, 0.5 * dt));
        let k4 = rhs(t + dt, &add(&psi, &k3, dt));
        for j in 0..psi.len() {
            psi[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (dt / 6.0);
        }
    }
    psi
}

#[test]
fn propagator_matches_runge_kutta() {
    let fam = MpsFamily::with_default_sector(6, Variant::Scar).unwrap();
    let ramp = RampProtocol::new(RampKind::Linear, 1e-2, 0.0, 1.0).unwrap();
    let exact = rk4(&fam, &ramp, 1e-4);
    for scheme in [Scheme::Cfet4] {
        let cfg = PropagatorConfig { scheme, ..Default::default() };
        let psi0 = fam.reference_state(0.0).unwrap();
        let rec = dynamics::propagate(&fam, &psi0, &ramp, &cfg).unwrap();
        let err = 1.0 - v::dot(&exact, &rec.final_state).norm();
        assert!(err.abs() < 1e-8, "{scheme:?}: {err:e}");
    }
}

#[test]
fn halving_the_step_leaves_the_fidelity_unchanged() {
    let fam = MpsFamily::with_default_sector(8, Variant::Scar).unwrap();
    let ramp = RampProtocol::new(RampKind::Linear, 2e-3, 0.0, 1.0).unwrap();
    let cfg = PropagatorConfig::default();
    let a = dynamics::ramp_fidelity(&fam, &ramp, &cfg).unwrap();
    let fine = PropagatorConfig { ds: cfg.ds / 2.0, max_dt: cfg.max_dt / 2.0, ..cfg };
    let b = dynamics::ramp_fidelity(&fam, &ramp, &fine).unwrap();
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn landau_zener_velocity_matches_closed_form() {
    let toy = TwoLevel { a: 400.0, g: 1.0 };
    let cfg = PropagatorConfig { max_dt: 0.01, ..Default::default() };
    let scan = VelocityScan { threshold: 0.99, v_max: 1.0, v_min: 1e-4, points_per_decade: 4, relative_width: 0.01 };
    let res = dynamics::adiabatic_velocity(
        |v| dynamics::ramp_fidelity(&toy, &RampProtocol::new(RampKind::Linear, v, 0.0, 1.0)?, &cfg),
        &scan,
    )
    .unwrap();
    // 1 − F = exp(−π g²/(a v))
    let exact = std::f64::consts::PI * toy.g * toy.g / (toy.a * 100f64.ln());
    assert!((res.v / exact - 1.0).abs() < 0.03, "{} vs {exact}", res.v);
    assert!(res.monotone);
}

#[test]
fn unbracketed_threshold_is_an_error() {
    let scan = VelocityScan { v_max: 1.0, v_min: 0.1, ..Default::default() };
    assert!(dynamics::adiabatic_velocity(|_| Ok(0.5), &scan).is_err());
}

#[test]
fn restart_file_resumes_the_same_run() {
    let fam = MpsFamily::with_default_sector(6, Variant::Scar).unwrap();
    let ramp = RampProtocol::new(RampKind::Sinusoidal, 1e-2, 0.0, 1.0).unwrap();
    let psi0 = fam.reference_state(0.0).unwrap();
    let plain = dynamics::propagate(&fam, &psi0, &ramp, &PropagatorConfig::default()).unwrap();
    let dir = std::env::temp_dir().join(format!("scarlab-restart-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let restart = RestartFile { path: dir.join("state.bin"), every: 50 };
    let cfg = PropagatorConfig { restart: Some(restart.clone()), ..Default::default() };
    let first = dynamics::propagate(&fam, &psi0, &ramp, &cfg).unwrap();
    assert!(restart.path.exists());
    // a second run picks up the saved state and still ends identically
    let second = dynamics::propagate(&fam, &psi0, &ramp, &cfg).unwrap();
    assert_eq!(first.final_state, plain.final_state);
    assert!(v::distance(&second.final_state, &plain.final_state) < 1e-12);
    std::fs::remove_dir_all(dir).unwrap();
}
