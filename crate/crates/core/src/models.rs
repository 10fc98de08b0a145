//! Builders for the cavity-array and trapped-particle-array sensors.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{GqfiError, Result};
use crate::gaussian::{assemble_generators, classify_dynamics, ClassTag, ModelSpec, CLASS_TOL};
use crate::linalg::{CMatrix, C64};

/// Coupled cavities with hopping and two-mode squeezing of equal strength.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityArrayParams {
    pub modes: usize,
    pub omega0: f64,
    pub delta: f64,
    /// Local loss rate.
    pub zeta: f64,
    /// Global homodyne rate; zero for the local-only array.
    pub gamma: f64,
    pub drive_e: f64,
}

impl Default for CavityArrayParams {
    fn default() -> Self {
        CavityArrayParams { modes: 1, omega0: 1.0, delta: 0.5, zeta: 0.3, gamma: 0.0, drive_e: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrappedVariant {
    Local,
    Global,
    Nonreciprocal,
    /// Nonreciprocal jumps with the end diagonals of the potential raised to
    /// `omega + 2k`, so that the position block is a uniform tridiagonal chain.
    NonreciprocalUniformDiag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrappedArrayParams {
    pub modes: usize,
    pub omega: f64,
    pub k: f64,
    pub gamma: f64,
    pub drive_e: f64,
    pub dphi: f64,
    pub variant: TrappedVariant,
}

impl Default for TrappedArrayParams {
    fn default() -> Self {
        TrappedArrayParams {
            modes: 1,
            omega: 1.0,
            k: 1.0,
            gamma: 0.1,
            drive_e: 0.1,
            dphi: 0.0,
            variant: TrappedVariant::Local,
        }
    }
}

fn check_positive_modes(m: usize) -> Result<()> {
    if m == 0 {
        return Err(GqfiError::InvalidInput("mode count must be positive".into()));
    }
    Ok(())
}

fn check_finite(vals: &[(&str, f64)]) -> Result<()> {
    for (name, v) in vals {
        if !v.is_finite() {
            return Err(GqfiError::InvalidInput(format!("{name} must be finite")));
        }
    }
    Ok(())
}

fn reject_unstable(model: ModelSpec) -> Result<ModelSpec> {
    let gen = assemble_generators(&model)?;
    let class = classify_dynamics(&gen, CLASS_TOL)?;
    if class.tag == ClassTag::Unstable {
        return Err(GqfiError::UnstableModel { label: model.label().to_string(), margin: class.spectral_margin });
    }
    Ok(model)
}

fn position_drive(m: usize) -> DVector<f64> {
    DVector::from_fn(2 * m, |i, _| if i < m { -1.0 } else { 0.0 })
}

pub fn build_cavity_array(p: &CavityArrayParams) -> Result<ModelSpec> {
    check_positive_modes(p.modes)?;
    check_finite(&[("omega0", p.omega0), ("delta", p.delta), ("zeta", p.zeta), ("gamma", p.gamma), ("E", p.drive_e)])?;
    if p.zeta < 0.0 || p.gamma < 0.0 {
        return Err(GqfiError::InvalidInput("rates must be non-negative".into()));
    }
    let m = p.modes;
    let mut h = DMatrix::identity(2 * m, 2 * m) * p.omega0;
    // Hopping gives -(delta/2)(x x' + p p'), squeezing -(delta/2)(x x' - p p').
    let hop = -p.delta / 2.0;
    let sq = -p.delta / 2.0;
    for j in 0..m.saturating_sub(1) {
        let (xa, xb, pa, pb) = (j, j + 1, m + j, m + j + 1);
        h[(xa, xb)] = hop + sq;
        h[(xb, xa)] = hop + sq;
        h[(pa, pb)] = hop - sq;
        h[(pb, pa)] = hop - sq;
    }
    let rows = m + usize::from(p.gamma > 0.0);
    let mut l = CMatrix::zeros(rows, 2 * m);
    let s = (p.zeta / 2.0).sqrt();
    for n in 0..m {
        l[(n, n)] = C64::new(s, 0.0);
        l[(n, m + n)] = C64::new(0.0, s);
    }
    if p.gamma > 0.0 {
        for j in 0..m {
            l[(m, j)] = C64::new(p.gamma.sqrt(), 0.0);
        }
    }
    let label = if p.gamma > 0.0 { "cavity_hybrid" } else { "cavity_local" };
    reject_unstable(ModelSpec::new(label, h, position_drive(m), l, p.drive_e)?)
}

pub fn build_trapped_array(p: &TrappedArrayParams) -> Result<ModelSpec> {
    check_positive_modes(p.modes)?;
    check_finite(&[("omega", p.omega), ("K", p.k), ("gamma", p.gamma), ("E", p.drive_e), ("dphi", p.dphi)])?;
    if p.gamma < 0.0 {
        return Err(GqfiError::InvalidInput("gamma must be non-negative".into()));
    }
    let nonreciprocal = matches!(p.variant, TrappedVariant::Nonreciprocal | TrappedVariant::NonreciprocalUniformDiag);
    if nonreciprocal {
        let threshold = p.gamma * p.dphi.sin().abs();
        if p.k <= threshold {
            return Err(GqfiError::PtBroken { k: p.k, threshold });
        }
    }
    let m = p.modes;
    let mut h = DMatrix::identity(2 * m, 2 * m) * p.omega;
    // (K/2) sum (x_j - x_{j+1})^2 is K times the open-chain Laplacian.
    for j in 0..m.saturating_sub(1) {
        h[(j, j)] += p.k;
        h[(j + 1, j + 1)] += p.k;
        h[(j, j + 1)] -= p.k;
        h[(j + 1, j)] -= p.k;
    }
    if p.variant == TrappedVariant::NonreciprocalUniformDiag {
        for j in 0..m {
            h[(j, j)] = p.omega + 2.0 * p.k;
        }
    }
    let sg = p.gamma.sqrt();
    let l = match p.variant {
        TrappedVariant::Local => {
            let mut l = CMatrix::zeros(m, 2 * m);
            for n in 0..m {
                l[(n, n)] = C64::new(sg, 0.0);
            }
            l
        }
        TrappedVariant::Global => CMatrix::from_fn(1, 2 * m, |_, j| C64::new(if j < m { sg } else { 0.0 }, 0.0)),
        TrappedVariant::Nonreciprocal | TrappedVariant::NonreciprocalUniformDiag => {
            let pairs = m.saturating_sub(1);
            let mut l = CMatrix::zeros(2 * pairs, 2 * m);
            let half = C64::new(0.0, p.dphi / 2.0).exp();
            for j in 0..pairs {
                l[(2 * j, j)] = half * sg;
                l[(2 * j, j + 1)] = -half.conj() * sg;
                l[(2 * j + 1, j)] = C64::new(sg, 0.0);
                l[(2 * j + 1, j + 1)] = C64::new(sg, 0.0);
            }
            l
        }
    };
    let label = match p.variant {
        TrappedVariant::Local => "trapped_local",
        TrappedVariant::Global => "trapped_global",
        TrappedVariant::Nonreciprocal => "trapped_nonreciprocal",
        TrappedVariant::NonreciprocalUniformDiag => "trapped_nonreciprocal_uniformdiag",
    };
    reject_unstable(ModelSpec::new(label, h, position_drive(m), l, p.drive_e)?)
}

/// Builders addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelName {
    CavityLocal,
    CavityHybrid,
    TrappedLocal,
    TrappedGlobal,
    TrappedNonreciprocal,
    TrappedNonreciprocalUniformDiag,
}

impl ModelName {
    pub const ALL: [ModelName; 6] = [
        ModelName::CavityLocal,
        ModelName::CavityHybrid,
        ModelName::TrappedLocal,
        ModelName::TrappedGlobal,
        ModelName::TrappedNonreciprocal,
        ModelName::TrappedNonreciprocalUniformDiag,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelName::CavityLocal => "cavity_local",
            ModelName::CavityHybrid => "cavity_hybrid",
            ModelName::TrappedLocal => "trapped_local",
            ModelName::TrappedGlobal => "trapped_global",
            ModelName::TrappedNonreciprocal => "trapped_nonreciprocal",
            ModelName::TrappedNonreciprocalUniformDiag => "trapped_nonreciprocal_uniformdiag",
        }
    }

    pub fn is_cavity(&self) -> bool {
        matches!(self, ModelName::CavityLocal | ModelName::CavityHybrid)
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = GqfiError;
    fn from_str(s: &str) -> Result<Self> {
        ModelName::ALL
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| GqfiError::InvalidInput(format!("unknown model '{s}'")))
    }
}

/// Union of all builder knobs. Fields irrelevant to a builder are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub omega0: f64,
    pub delta: f64,
    pub zeta: f64,
    pub omega: f64,
    pub k: f64,
    pub gamma: f64,
    pub drive_e: f64,
    pub dphi: f64,
}

impl ModelParams {
    /// Reference parameters for each named builder.
    pub fn defaults_for(name: ModelName) -> Self {
        let base = ModelParams {
            omega0: 1.0,
            delta: 0.5,
            zeta: 0.3,
            omega: 1.0,
            k: 1.0,
            gamma: 0.1,
            drive_e: 0.1,
            dphi: 0.0,
        };
        match name {
            ModelName::CavityLocal => ModelParams { gamma: 0.0, ..base },
            ModelName::CavityHybrid => ModelParams { zeta: 0.1, gamma: 0.3, ..base },
            ModelName::TrappedNonreciprocal | ModelName::TrappedNonreciprocalUniformDiag => {
                ModelParams { dphi: -std::f64::consts::FRAC_PI_2, ..base }
            }
            _ => base,
        }
    }
}

pub fn build_named(name: ModelName, modes: usize, p: &ModelParams) -> Result<ModelSpec> {
    let trapped = |variant| TrappedArrayParams {
        modes,
        omega: p.omega,
        k: p.k,
        gamma: p.gamma,
        drive_e: p.drive_e,
        dphi: p.dphi,
        variant,
    };
    match name {
        ModelName::CavityLocal | ModelName::CavityHybrid => build_cavity_array(&CavityArrayParams {
            modes,
            omega0: p.omega0,
            delta: p.delta,
            zeta: p.zeta,
            gamma: if name == ModelName::CavityLocal { 0.0 } else { p.gamma },
            drive_e: p.drive_e,
        }),
        ModelName::TrappedLocal => build_trapped_array(&trapped(TrappedVariant::Local)),
        ModelName::TrappedGlobal => build_trapped_array(&trapped(TrappedVariant::Global)),
        ModelName::TrappedNonreciprocal => build_trapped_array(&trapped(TrappedVariant::Nonreciprocal)),
        ModelName::TrappedNonreciprocalUniformDiag => {
            build_trapped_array(&trapped(TrappedVariant::NonreciprocalUniformDiag))
        }
    }
}
