//! Phase-space model description and the derived drift/diffusion generators.
//!
//! Quadratures are ordered `(x_1..x_M, p_1..p_M)` with `hbar = 1` and
//! `b = (x + i p) / sqrt(2)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GqfiError, Result};
use crate::linalg::{self, CMatrix, C64};

/// Relative tolerance for positivity of the measurement matrix.
pub const PSD_TOL: f64 = 1e-12;
/// Relative tolerance for the uncertainty relation.
pub const UNCERTAINTY_TOL: f64 = 1e-9;
/// Relative tolerance used to classify the drift spectrum.
pub const CLASS_TOL: f64 = 1e-9;

/// One sensor setup: `H = phi^T hamiltonian phi / 2 + theta a^T phi`, jump
/// operators `L_n = (jumps * phi)_n`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    modes: usize,
    hamiltonian: DMatrix<f64>,
    drive: DVector<f64>,
    jumps: CMatrix,
    theta: f64,
    label: String,
}

impl ModelSpec {
    /// Validates shapes and finiteness; the Hamiltonian is symmetrized.
    /// `jumps` may have any number of rows, including zero.
    pub fn new(
        label: impl Into<String>,
        hamiltonian: DMatrix<f64>,
        drive: DVector<f64>,
        jumps: CMatrix,
        theta: f64,
    ) -> Result<Self> {
        let n = hamiltonian.nrows();
        if n == 0 || n % 2 != 0 || hamiltonian.ncols() != n {
            return Err(GqfiError::InvalidInput(format!(
                "hamiltonian must be 2M x 2M, got {}x{}",
                hamiltonian.nrows(),
                hamiltonian.ncols()
            )));
        }
        if drive.len() != n {
            return Err(GqfiError::InvalidInput(format!("drive has length {}, expected {n}", drive.len())));
        }
        if jumps.ncols() != n && jumps.nrows() > 0 {
            return Err(GqfiError::InvalidInput(format!("jump matrix has {} columns, expected {n}", jumps.ncols())));
        }
        let finite = hamiltonian.iter().all(|v| v.is_finite())
            && drive.iter().all(|v| v.is_finite())
            && jumps.iter().all(|v| v.re.is_finite() && v.im.is_finite())
            && theta.is_finite();
        if !finite {
            return Err(GqfiError::InvalidInput("non-finite model entry".into()));
        }
        let jumps = if jumps.nrows() == 0 { CMatrix::zeros(0, n) } else { jumps };
        Ok(ModelSpec {
            modes: n / 2,
            hamiltonian: linalg::symmetrize(&hamiltonian),
            drive,
            jumps,
            theta,
            label: label.into(),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }
    pub fn hamiltonian(&self) -> &DMatrix<f64> {
        &self.hamiltonian
    }
    pub fn drive(&self) -> &DVector<f64> {
        &self.drive
    }
    pub fn jumps(&self) -> &CMatrix {
        &self.jumps
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        ModelSpec { theta, ..self.clone() }
    }

    pub fn with_drive(&self, drive: DVector<f64>) -> Result<Self> {
        ModelSpec::new(self.label.clone(), self.hamiltonian.clone(), drive, self.jumps.clone(), self.theta)
    }
}

/// Derived matrices. `x = sigma (hamiltonian + m_i)`, `y = -sigma m_r sigma`.
#[derive(Debug, Clone)]
pub struct Generators {
    pub m_mat: CMatrix,
    pub m_r: DMatrix<f64>,
    pub m_i: DMatrix<f64>,
    pub h_eff: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

pub fn assemble_generators(model: &ModelSpec) -> Result<Generators> {
    let n = 2 * model.modes();
    let m_mat = if model.jumps().nrows() == 0 {
        CMatrix::zeros(n, n)
    } else {
        model.jumps().adjoint() * model.jumps()
    };
    let scale = linalg::max_abs_c(&m_mat);
    if scale > 0.0 {
        let min_eig = linalg::min_hermitian_eig(&m_mat);
        if min_eig < -PSD_TOL * scale {
            return Err(GqfiError::NonPsdM { min_eig });
        }
    }
    // Split exactly: Hermitian => real part symmetric, imaginary part antisymmetric.
    let m_r = linalg::symmetrize(&m_mat.map(|v| v.re));
    let m_i_raw = m_mat.map(|v| v.im);
    let m_i = (&m_i_raw - m_i_raw.transpose()) * 0.5;
    let sigma = linalg::symplectic(model.modes());
    let h_eff = model.hamiltonian() + &m_i;
    let x = &sigma * &h_eff;
    let y = linalg::symmetrize(&(-(&sigma * &m_r * &sigma)));
    Ok(Generators { m_mat, m_r, m_i, h_eff, x, y, sigma })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassTag {
    Dissipative,
    ZeroDamping,
    Unstable,
}

impl std::fmt::Display for ClassTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ClassTag::Dissipative => "Dissipative",
            ClassTag::ZeroDamping => "ZeroDamping",
            ClassTag::Unstable => "Unstable",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsClass {
    pub tag: ClassTag,
    /// Largest real part over the drift spectrum.
    pub spectral_margin: f64,
}

/// Classify from the drift spectrum. `tol` is relative to the largest entry of X.
pub fn classify_dynamics(gen: &Generators, tol: f64) -> Result<DynamicsClass> {
    let (vals, _) = linalg::general_eigen(&gen.x)?;
    Ok(classify_spectrum(&vals, linalg::max_abs(&gen.x), tol))
}

pub(crate) fn classify_spectrum(vals: &[C64], x_scale: f64, tol: f64) -> DynamicsClass {
    let abs_tol = tol * x_scale.max(f64::MIN_POSITIVE);
    let margin = vals.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
    let tag = if vals.iter().all(|v| v.re < -abs_tol) {
        ClassTag::Dissipative
    } else if vals.iter().all(|v| v.re.abs() <= abs_tol) {
        ClassTag::ZeroDamping
    } else {
        ClassTag::Unstable
    };
    DynamicsClass { tag, spectral_margin: margin }
}

/// Mean vector and covariance matrix of a Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(modes: usize) -> Self {
        GaussianState {
            mean: DVector::zeros(2 * modes),
            covariance: DMatrix::identity(2 * modes, 2 * modes) * 0.5,
        }
    }

    /// Checks the generalized uncertainty relation; returns the margin.
    pub fn check_uncertainty(&self, t: f64) -> Result<f64> {
        let margin = linalg::uncertainty_margin(&self.covariance);
        let scale = self.covariance.norm().max(1.0);
        if margin < -UNCERTAINTY_TOL * scale {
            return Err(GqfiError::UncertaintyViolation { t, margin });
        }
        Ok(margin)
    }
}
