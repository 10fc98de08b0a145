//! Time integration of the moment equations together with the sensitivity
//! vector `w` and the global QFI accumulator.
//!
//! The system integrated is
//!
//! ```text
//! dphi/dt   = X phi + theta sigma a
//! dGamma/dt = X Gamma + Gamma X^T + Y
//! dw/dt     = X w + Gamma a
//! dI_G/dt   = 8 a^T w
//! ```
//!
//! with `delta_I = 4 w^T Gamma^{-1} w` evaluated on demand.

use nalgebra::{DMatrix, DVector};

use crate::error::{GqfiError, Result};
use crate::gaussian::{assemble_generators, GaussianState, Generators, ModelSpec};
use crate::linalg::{self, Csr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Rk4,
    Midpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    pub scheme: Scheme,
    pub record_stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        IntegratorConfig { dt, t_max, scheme: Scheme::Rk4, record_stride: 1 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(GqfiError::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(GqfiError::InvalidInput(format!("t_max must be non-negative, got {}", self.t_max)));
        }
        if self.record_stride == 0 {
            return Err(GqfiError::InvalidInput("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    pub phi: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub w: DVector<f64>,
    pub i_g: f64,
    pub delta_i: f64,
    pub i_e: f64,
    pub nbar: f64,
}

impl TrajectoryState {
    pub fn initial(state: GaussianState) -> Self {
        let n = state.mean.len();
        let mut s = TrajectoryState {
            t: 0.0,
            phi: state.mean,
            gamma: state.covariance,
            w: DVector::zeros(n),
            i_g: 0.0,
            delta_i: 0.0,
            i_e: 0.0,
            nbar: 0.0,
        };
        s.nbar = excitation_number(&s);
        s
    }

    pub fn modes(&self) -> usize {
        self.phi.len() / 2
    }

    /// Recompute `delta_i`, `i_e` and `nbar` from the integrated fields.
    pub fn refresh_derived(&mut self) -> Result<()> {
        self.delta_i = info_difference(self)?;
        self.i_e = self.i_g - self.delta_i;
        self.nbar = excitation_number(self);
        Ok(())
    }
}

/// Drift and forcing prepared for repeated stepping.
#[derive(Debug, Clone)]
pub struct Propagator {
    x: Csr,
    y: DMatrix<f64>,
    a: DVector<f64>,
    forcing: DVector<f64>,
    x_norm: f64,
}

#[derive(Clone)]
struct Deriv {
    phi: DVector<f64>,
    gamma: DMatrix<f64>,
    w: DVector<f64>,
    i_g: f64,
}

impl Propagator {
    pub fn new(gen: &Generators, model: &ModelSpec) -> Self {
        let forcing = &gen.sigma * model.drive() * model.theta();
        let x_norm = gen.x.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        Propagator { x: Csr::from_dense(&gen.x), y: gen.y.clone(), a: model.drive().clone(), forcing, x_norm }
    }

    /// Infinity norm of the drift.
    pub fn drift_norm(&self) -> f64 {
        self.x_norm
    }

    fn gamma_rhs(&self, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        let xg = self.x.mul_mat(gamma);
        let mut d = &xg + xg.transpose();
        d += &self.y;
        d
    }

    fn rhs(&self, phi: &DVector<f64>, gamma: &DMatrix<f64>, w: &DVector<f64>, sensitivity: bool) -> Deriv {
        let dphi = self.x.mul_vec(phi) + &self.forcing;
        let dgamma = self.gamma_rhs(gamma);
        let (dw, di) = if sensitivity {
            (self.x.mul_vec(w) + gamma * &self.a, 8.0 * self.a.dot(w))
        } else {
            (DVector::zeros(w.len()), 0.0)
        };
        Deriv { phi: dphi, gamma: dgamma, w: dw, i_g: di }
    }

    fn advance(&self, s: &TrajectoryState, dt: f64, scheme: Scheme, sensitivity: bool) -> Result<TrajectoryState> {
        let eval = |phi: &DVector<f64>, gamma: &DMatrix<f64>, w: &DVector<f64>| self.rhs(phi, gamma, w, sensitivity);
        let stage = |k: &Deriv, h: f64| -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
            (&s.phi + &k.phi * h, &s.gamma + &k.gamma * h, &s.w + &k.w * h)
        };
        let incr = match scheme {
            Scheme::Rk4 => {
                let k1 = eval(&s.phi, &s.gamma, &s.w);
                let (p, g, w) = stage(&k1, dt / 2.0);
                let k2 = eval(&p, &g, &w);
                let (p, g, w) = stage(&k2, dt / 2.0);
                let k3 = eval(&p, &g, &w);
                let (p, g, w) = stage(&k3, dt);
                let k4 = eval(&p, &g, &w);
                let c = dt / 6.0;
                Deriv {
                    phi: (&k1.phi + (&k2.phi + &k3.phi) * 2.0 + &k4.phi) * c,
                    gamma: (&k1.gamma + (&k2.gamma + &k3.gamma) * 2.0 + &k4.gamma) * c,
                    w: (&k1.w + (&k2.w + &k3.w) * 2.0 + &k4.w) * c,
                    i_g: (k1.i_g + 2.0 * (k2.i_g + k3.i_g) + k4.i_g) * c,
                }
            }
            Scheme::Midpoint => {
                let k1 = eval(&s.phi, &s.gamma, &s.w);
                let (p, g, w) = stage(&k1, dt / 2.0);
                let k2 = eval(&p, &g, &w);
                Deriv { phi: k2.phi * dt, gamma: k2.gamma * dt, w: k2.w * dt, i_g: k2.i_g * dt }
            }
        };
        let t = s.t + dt;
        let gamma = linalg::symmetrize(&(&s.gamma + incr.gamma));
        if !gamma.iter().all(|v| v.is_finite()) {
            return Err(GqfiError::UncertaintyViolation { t, margin: f64::NAN });
        }
        let mut next = TrajectoryState {
            t,
            phi: &s.phi + incr.phi,
            gamma,
            w: &s.w + incr.w,
            i_g: s.i_g + incr.i_g,
            delta_i: s.delta_i,
            i_e: s.i_e,
            nbar: 0.0,
        };
        next.nbar = excitation_number(&next);
        Ok(next)
    }

    /// One step of the mean and covariance only; `w` and `I_G` are carried over.
    pub fn step_moments(&self, s: &TrajectoryState, dt: f64, scheme: Scheme) -> Result<TrajectoryState> {
        self.advance(s, dt, scheme, false)
    }

    /// One step of the full augmented system (moments, `w`, `I_G`), followed by
    /// evaluation of `delta_I` and `I_E`.
    pub fn step_sensitivity(&self, s: &TrajectoryState, dt: f64, scheme: Scheme) -> Result<TrajectoryState> {
        let mut next = self.advance(s, dt, scheme, true)?;
        next.refresh_derived()?;
        Ok(next)
    }

    /// Augmented step without the `delta_I` solve; used inside long runs where
    /// only recorded states need it.
    fn step_fast(&self, s: &TrajectoryState, dt: f64, scheme: Scheme) -> Result<TrajectoryState> {
        self.advance(s, dt, scheme, true)
    }
}

/// `4 w^T Gamma^{-1} w` by Cholesky (LU fallback) solve.
pub fn info_difference(s: &TrajectoryState) -> Result<f64> {
    if s.w.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let sol = match s.gamma.clone().cholesky() {
        Some(ch) => ch.solve(&s.w),
        None => s.gamma.clone().lu().solve(&s.w).ok_or(GqfiError::SingularCovariance { t: s.t })?,
    };
    let v = 4.0 * s.w.dot(&sol);
    if !v.is_finite() {
        return Err(GqfiError::SingularCovariance { t: s.t });
    }
    Ok(v)
}

/// Excitations per mode, `(Tr Gamma - M + |phi|^2) / (2M)`.
pub fn excitation_number(s: &TrajectoryState) -> f64 {
    let m = s.modes() as f64;
    (s.gamma.trace() - m + s.phi.norm_squared()) / (2.0 * m)
}

/// Integrates from the vacuum and records every `record_stride` steps plus the final step.
pub fn run_trajectory(model: &ModelSpec, config: &IntegratorConfig) -> Result<Vec<TrajectoryState>> {
    run_trajectory_from(model, config, GaussianState::vacuum(model.modes()))
}

pub fn run_trajectory_from(
    model: &ModelSpec,
    config: &IntegratorConfig,
    initial: GaussianState,
) -> Result<Vec<TrajectoryState>> {
    config.validate()?;
    if initial.mean.len() != 2 * model.modes() || initial.covariance.nrows() != 2 * model.modes() {
        return Err(GqfiError::InvalidInput("initial state dimension does not match model".into()));
    }
    let gen = assemble_generators(model)?;
    let prop = Propagator::new(&gen, model);
    if config.dt * prop.drift_norm() > 0.1 {
        log::warn!(
            "dt * |X| = {:.3} exceeds the recommended 0.1 for {}",
            config.dt * prop.drift_norm(),
            model.label()
        );
    }
    let steps = config.steps();
    let mut state = TrajectoryState::initial(initial);
    let mut out = Vec::with_capacity(steps / config.record_stride + 2);
    record(&mut state, &mut out)?;
    for k in 1..=steps {
        let mut next = prop.step_fast(&state, config.dt, config.scheme)?;
        // Fixed grid: avoid drift from accumulating dt.
        next.t = k as f64 * config.dt;
        state = next;
        if k % config.record_stride == 0 || k == steps {
            record(&mut state, &mut out)?;
        }
    }
    Ok(out)
}

fn record(state: &mut TrajectoryState, out: &mut Vec<TrajectoryState>) -> Result<()> {
    let g = GaussianState { mean: state.phi.clone(), covariance: state.gamma.clone() };
    g.check_uncertainty(state.t)?;
    state.refresh_derived()?;
    out.push(state.clone());
    Ok(())
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
