//! Gaussian engine against the truncated Fock-space integrator.

use gqfi_core::dynamics::{run_trajectory, IntegratorConfig};
use gqfi_core::fock::{self, FockConfig, TruncatedOperatorSet};
use gqfi_core::linalg::{CMatrix, C64};
use gqfi_core::models::{build_cavity_array, CavityArrayParams};
use gqfi_core::ModelSpec;
use nalgebra::{DMatrix, DVector};

fn lossy_cavity() -> ModelSpec {
    build_cavity_array(&CavityArrayParams { modes: 1, omega0: 1.0, delta: 0.0, zeta: 0.3, gamma: 0.0, drive_e: 0.1 }).unwrap()
}

fn measured_trap(gamma: f64) -> ModelSpec {
    let l = CMatrix::from_row_slice(1, 2, &[C64::new(gamma.sqrt(), 0.0), C64::new(0.0, 0.0)]);
    ModelSpec::new("trap1", DMatrix::identity(2, 2), DVector::from_vec(vec![-1.0, 0.0]), l, 0.1).unwrap()
}

fn gaussian_at(model: &ModelSpec, t: f64) -> gqfi_core::dynamics::TrajectoryState {
    let traj = run_trajectory(model, &IntegratorConfig::new(1e-3, t).with_stride(usize::MAX)).unwrap();
    traj.last().unwrap().clone()
}

#[test]
fn lossy_mode_qfis_match_fock() {
    let model = lossy_cavity();
    let g = gaussian_at(&model, 10.0);
    let q = fock::fidelity_qfis(&model, model.theta(), 1e-3, 10.0, &FockConfig::default()).unwrap();
    assert!((q.i_g - g.i_g).abs() / g.i_g < 0.01, "I_G {} vs {}", q.i_g, g.i_g);
    assert!((q.i_e - g.i_e).abs() / g.i_e < 0.01, "I_E {} vs {}", q.i_e, g.i_e);
    assert!(q.f_g <= q.f_e + 1e-12 && q.f_e <= 1.0 + 1e-12);
}

#[test]
fn zero_damping_information_difference_matches_fock() {
    let model = measured_trap(0.1);
    let g = gaussian_at(&model, 5.0);
    let q = fock::fidelity_qfis(&model, model.theta(), 1e-3, 5.0, &FockConfig::default()).unwrap();
    let fock_di = q.i_g - q.i_e;
    assert!((fock_di - g.delta_i).abs() / g.delta_i < 0.02, "{fock_di} vs {}", g.delta_i);
}

#[test]
fn fock_moments_match_gaussian() {
    let model = lossy_cavity();
    let cfg = FockConfig::default();
    let ops = TruncatedOperatorSet::new(&model, cfg.cutoff).unwrap();
    for t in [1.0, 10.0] {
        let theta = model.theta();
        let mu = fock::integrate_with(&ops, theta, theta, t, &cfg).unwrap();
        let (mean, cov) = ops.moments(&mu);
        let g = gaussian_at(&model, t);
        assert!((mean - &g.phi).abs().max() < 1e-5);
        assert!((cov - &g.gamma).abs().max() < 1e-5);
    }
}

#[test]
fn halving_eps_is_stable() {
    let model = lossy_cavity();
    let cfg = FockConfig::default();
    let a = fock::fidelity_qfis(&model, 0.1, 2e-3, 4.0, &cfg).unwrap();
    let b = fock::fidelity_qfis(&model, 0.1, 1e-3, 4.0, &cfg).unwrap();
    assert!((a.i_g - b.i_g).abs() / b.i_g < 0.005);
}

// The normalized pseudo-state settles at a distance from rho that is linear in
// the parameter split, so it converges to rho as the split vanishes.
#[test]
fn normalized_pseudo_state_plateau_is_linear_in_split() {
    let model = lossy_cavity();
    let cfg = FockConfig { cutoff: 20, ..Default::default() };
    let ops = TruncatedOperatorSet::new(&model, cfg.cutoff).unwrap();
    let dist = |eps: f64, t: f64| {
        let mu = fock::integrate_with(&ops, 0.1 + eps / 2.0, 0.1 - eps / 2.0, t, &cfg).unwrap();
        let rho = fock::integrate_with(&ops, 0.1, 0.1, t, &cfg).unwrap();
        let tr: C64 = (0..mu.nrows()).map(|i| mu[(i, i)]).sum();
        (mu / tr - rho).norm()
    };
    let (a20, a30) = (dist(0.1, 20.0), dist(0.1, 30.0));
    assert!((a30 - a20).abs() / a30 < 0.03, "{a20} {a30}");
    let b30 = dist(0.01, 30.0);
    assert!((a30 / b30 - 10.0).abs() < 0.05, "{}", a30 / b30);
}
