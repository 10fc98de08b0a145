//! Property tests over randomized models from every builder.

use gqfi_core::dynamics::{run_trajectory, IntegratorConfig};
use gqfi_core::gaussian::{assemble_generators, classify_dynamics, ClassTag, GaussianState, CLASS_TOL};
use gqfi_core::linalg::{self, CMatrix, C64};
use gqfi_core::models::{build_named, ModelName, ModelParams};
use gqfi_core::spectral::{self, PositionBlockDecomposition};
use gqfi_core::ModelSpec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.5f64..2.0, 0.0f64..0.49, 0.05f64..0.6, 0.5f64..2.0, 0.5f64..2.0, 0.01f64..0.4, 0.01f64..1.0, -1.5f64..1.5).prop_map(
        // the cavity chain is stable for 2 delta < omega0
        |(omega0, frac, zeta, omega, k, gamma, drive_e, dphi)| ModelParams { omega0, delta: frac * omega0, zeta, omega, k, gamma, drive_e, dphi },
    )
}

fn zoo(max_m: usize) -> impl Strategy<Value = (ModelName, usize, ModelParams)> {
    (0..ModelName::ALL.len(), 1..=max_m, params()).prop_map(|(i, m, p)| (ModelName::ALL[i], m, p))
}

fn trapped(max_m: usize) -> impl Strategy<Value = (ModelName, usize, ModelParams)> {
    (2..ModelName::ALL.len(), 1..=max_m, params()).prop_map(|(i, m, p)| (ModelName::ALL[i], m, p))
}

fn build(name: ModelName, m: usize, p: &ModelParams) -> ModelSpec {
    build_named(name, m, p).unwrap()
}

fn random_jumps(rows: usize, n: usize, seed: &[f64]) -> CMatrix {
    CMatrix::from_fn(rows, n, |i, j| {
        let k = (i * n + j) % seed.len();
        C64::new(seed[k], seed[(k + 3) % seed.len()] * 0.5)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generator_identities(m in 1usize..5, rows in 0usize..6, seed in prop::collection::vec(-1.0f64..1.0, 7)) {
        let n = 2 * m;
        let hraw = DMatrix::from_fn(n, n, |i, j| seed[(i + 2 * j) % 7]);
        let model = ModelSpec::new("rand", &hraw + hraw.transpose(), DVector::zeros(n), random_jumps(rows, n, &seed), 0.0).unwrap();
        let gen = assemble_generators(&model).unwrap();
        let sigma = linalg::symplectic(m);
        prop_assert!(linalg::max_abs(&(&gen.x - &sigma * (model.hamiltonian() + &gen.m_i))) <= 1e-14);
        prop_assert!(linalg::max_abs(&(&gen.y + &sigma * &gen.m_r * &sigma)) <= 1e-14);
        let min = SymmetricEigen::new(gen.y.clone()).eigenvalues.min();
        prop_assert!(min >= -1e-12 * linalg::max_abs(&gen.y).max(1.0));
        let rebuilt = CMatrix::from_fn(n, n, |i, j| C64::new(gen.m_r[(i, j)], gen.m_i[(i, j)]));
        let scale = linalg::max_abs_c(&gen.m_mat).max(f64::MIN_POSITIVE);
        prop_assert!(linalg::max_abs_c(&(rebuilt - &gen.m_mat)) <= 1e-12 * scale);
    }

    #[test]
    fn builders_land_in_their_class((name, m, p) in zoo(12)) {
        let gen = assemble_generators(&build(name, m, &p)).unwrap();
        let tag = classify_dynamics(&gen, CLASS_TOL).unwrap().tag;
        prop_assert_eq!(tag, if name.is_cavity() { ClassTag::Dissipative } else { ClassTag::ZeroDamping });
    }

    #[test]
    fn real_jumps_have_no_antisymmetric_part(m in 1usize..10, p in params()) {
        for name in [ModelName::TrappedLocal, ModelName::TrappedGlobal, ModelName::TrappedNonreciprocal] {
            let p = ModelParams { dphi: 0.0, ..p.clone() };
            let gen = assemble_generators(&build(name, m, &p)).unwrap();
            prop_assert!(gen.m_i.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn nonreciprocal_exchange_asymmetry(m in 2usize..10, p in params()) {
        let gen = assemble_generators(&build(ModelName::TrappedNonreciprocal, m, &p)).unwrap();
        let s = p.gamma * p.dphi.sin();
        for j in 0..m - 1 {
            let lower = gen.h_eff[(j + 1, j)];
            let upper = gen.h_eff[(j, j + 1)];
            prop_assert!((lower + p.k + s).abs() < 1e-12 && (upper + p.k - s).abs() < 1e-12);
        }
    }

    #[test]
    fn trajectory_invariants((name, m, p) in zoo(8), t in 0.5f64..8.0) {
        let model = build(name, m, &p).with_theta(0.0);
        let cfg = IntegratorConfig::new(5e-3, t).with_stride(40);
        let traj = run_trajectory(&model, &cfg).unwrap();
        for s in &traj {
            let state = GaussianState { mean: s.phi.clone(), covariance: s.gamma.clone() };
            prop_assert!(linalg::uncertainty_margin(&state.covariance) >= -1e-9 * s.gamma.norm());
            prop_assert!(s.delta_i >= -1e-9 && s.i_e <= s.i_g + 1e-9);
        }
        let shifted = run_trajectory(&model.with_theta(0.1), &cfg).unwrap();
        for (a, b) in traj.iter().zip(&shifted) {
            prop_assert_eq!(a.i_g.to_bits(), b.i_g.to_bits());
            prop_assert_eq!(a.i_e.to_bits(), b.i_e.to_bits());
            prop_assert_eq!(a.delta_i.to_bits(), b.delta_i.to_bits());
        }
    }

    #[test]
    fn integrated_covariance_matches_closed_form((name, m, p) in zoo(8), t in 0.5f64..15.0) {
        let model = build(name, m, &p);
        let gen = assemble_generators(&model).unwrap();
        let spec = spectral::decompose_drift(&gen).unwrap();
        let traj = run_trajectory(&model, &IntegratorConfig::new(1e-3, t).with_stride(usize::MAX)).unwrap();
        let s = traj.last().unwrap();
        let g0 = GaussianState::vacuum(m).covariance;
        let closed = if name.is_cavity() {
            spectral::dissipative_solution(&gen, &spec, &g0, s.t).unwrap()
        } else {
            spectral::zero_damping_solution(&gen, &spec, &g0, s.t).unwrap()
        };
        prop_assert!(linalg::max_abs(&(closed - &s.gamma)) < 1e-8);
    }

    #[test]
    fn steady_state_matches_kronecker_solve(cavity in 0usize..2, m in 1usize..=12, p in params()) {
        let model = build(ModelName::ALL[cavity], m, &p);
        let gen = assemble_generators(&model).unwrap();
        let spec = spectral::decompose_drift(&gen).unwrap();
        let a = spectral::steady_covariance(&gen, &spec).unwrap();
        let b = linalg::lyapunov_kron(&gen.x, &gen.y).unwrap();
        prop_assert!(linalg::max_abs(&(&a - &b)) <= 1e-8 * linalg::max_abs(&b).max(1.0));
    }

    #[test]
    fn zero_damping_identities((name, m, p) in trapped(20)) {
        let model = build(name, m, &p);
        let gen = assemble_generators(&model).unwrap();
        let pbd = PositionBlockDecomposition::new(&model, &gen).unwrap();
        let (a, b) = (pbd.retained_matrix(), pbd.retained_matrix_via_inverse());
        prop_assert!(linalg::max_abs(&(&a - &b)) <= 1e-8 * linalg::max_abs(&a));
        let mt = pbd.dephased_backaction();
        prop_assert!(mt == mt.transpose());
        prop_assert!(SymmetricEigen::new(mt.clone()).eigenvalues.min() >= -1e-10 * linalg::max_abs(&mt));
        let r = spectral::zero_damping_rates(&pbd, &pbd.b);
        prop_assert!(r.identity_residual < 1e-8);
    }

    #[test]
    fn optimized_rate_dominates_any_drive((name, m, p) in zoo(10), dir in prop::collection::vec(-1.0f64..1.0, 40)) {
        let model = build(name, m, &p);
        let gen = assemble_generators(&model).unwrap();
        let spec = spectral::decompose_drift(&gen).unwrap();
        if name.is_cavity() {
            let mut a = DVector::from_fn(2 * m, |i, _| dir[i]);
            if a.norm() == 0.0 { a[0] = 1.0; }
            a *= (m as f64).sqrt() / a.norm();
            let r = spectral::dissipative_rates(&gen, &spec, &a).unwrap();
            let opt = spectral::optimized_dissipative(&gen, &spec).unwrap();
            prop_assert!(r.rate_ig <= opt.rate_ig * (1.0 + 1e-10));
        } else {
            let pbd = PositionBlockDecomposition::new(&model, &gen).unwrap();
            let mut b = DVector::from_fn(m, |i, _| dir[i]);
            if b.norm() == 0.0 { b[0] = 1.0; }
            b *= (m as f64).sqrt() / b.norm();
            let r = spectral::zero_damping_rates(&pbd, &b);
            let opt = spectral::optimized_zero_damping(&pbd);
            prop_assert!(r.rate_ig <= opt.rate_ig * (1.0 + 1e-10) + 1e-14);
            prop_assert!(r.rate_ie <= opt.rate_ie * (1.0 + 1e-10) + 1e-14);
        }
    }
}
