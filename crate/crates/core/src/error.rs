use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GqfiError {
    #[error("measurement matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NonPsdM { min_eig: f64 },

    #[error("uncertainty relation violated at t = {t} (min eigenvalue {margin:e})")]
    UncertaintyViolation { t: f64, margin: f64 },

    #[error("covariance matrix is singular at t = {t}")]
    SingularCovariance { t: f64 },

    #[error("drift matrix is not diagonalizable within tolerance ({reason})")]
    DefectiveDrift { reason: String },

    #[error("operation requires {expected} dynamics, model is {found}")]
    WrongClass { expected: &'static str, found: String },

    #[error("model does not have position-block structure: {0}")]
    WrongBlockStructure(String),

    #[error("all eigenvalue gaps carry negligible weight")]
    AllGapsDegenerate,

    #[error("hopping amplitudes must satisfy t_R * t_L > 0 (got t_R = {t_r}, t_L = {t_l})")]
    InvalidHopping { t_r: f64, t_l: f64 },

    #[error("nonreciprocal chain requires K > gamma*|sin(dphi)| (K = {k}, gamma*|sin(dphi)| = {threshold})")]
    PtBroken { k: f64, threshold: f64 },

    #[error("model {label} is dynamically unstable (spectral margin {margin:e})")]
    UnstableModel { label: String, margin: f64 },

    #[error("Fock cutoff {cutoff} too small: top-level population {leakage:e} at t = {t}")]
    CutoffExceeded { cutoff: usize, leakage: f64, t: f64 },

    #[error("finite-difference fidelity is ill-conditioned: 1 - F = {infidelity:e}")]
    IllConditioned { infidelity: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl GqfiError {
    /// Stable variant name, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            GqfiError::NonPsdM { .. } => "NonPsdM",
            GqfiError::UncertaintyViolation { .. } => "UncertaintyViolation",
            GqfiError::SingularCovariance { .. } => "SingularCovariance",
            GqfiError::DefectiveDrift { .. } => "DefectiveDrift",
            GqfiError::WrongClass { .. } => "WrongClass",
            GqfiError::WrongBlockStructure(_) => "WrongBlockStructure",
            GqfiError::AllGapsDegenerate => "AllGapsDegenerate",
            GqfiError::InvalidHopping { .. } => "InvalidHopping",
            GqfiError::PtBroken { .. } => "PtBroken",
            GqfiError::UnstableModel { .. } => "UnstableModel",
            GqfiError::CutoffExceeded { .. } => "CutoffExceeded",
            GqfiError::IllConditioned { .. } => "IllConditioned",
            GqfiError::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, GqfiError>;
