//! Spectral decompositions of the drift, closed-form covariance solutions and
//! the asymptotic rate formulas for both coupling classes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{GqfiError, Result};
use crate::gaussian::{self, assemble_generators, ClassTag, DynamicsClass, Generators, ModelSpec, CLASS_TOL};
use crate::linalg::{self, CMatrix, C64};

/// Largest accepted condition number of the eigenvector matrix.
pub const COND_CAP: f64 = 1e8;
/// Eigenvalues closer than this (relative to |X|) are flagged degenerate.
pub const GAP_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-8;
/// Relative floor below which an oscillatory coupling counts as absent.
pub const V_TOL: f64 = 1e-10;

/// Eigen-decomposition `X = V diag(lambda) V^{-1}` organised in conjugate pairs.
///
/// Full ordering: the `n_pairs` representatives with `Im > 0` (ascending in
/// `Im`), then their conjugates in the same order, then real eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    values: Vec<C64>,
    right: CMatrix,
    left: CMatrix,
    n_pairs: usize,
    pub condition_number: f64,
    /// One flag per representative.
    pub degenerate: Vec<bool>,
}

impl SpectralDecomposition {
    /// Representatives, one per conjugate pair.
    pub fn eigenvalues(&self) -> &[C64] {
        &self.values[..self.n_pairs]
    }

    pub fn full_eigenvalues(&self) -> &[C64] {
        &self.values
    }

    pub fn pair_count(&self) -> usize {
        self.n_pairs
    }

    pub fn right(&self) -> &CMatrix {
        &self.right
    }

    /// Inverse of [`Self::right`]; rows are left eigenvectors.
    pub fn left(&self) -> &CMatrix {
        &self.left
    }

    /// Projector onto the `k`-th eigenvector in full ordering.
    pub fn projector_full(&self, k: usize) -> CMatrix {
        self.right.column(k) * self.left.row(k)
    }

    /// `P_alpha` for representative `alpha`.
    pub fn projector(&self, alpha: usize) -> CMatrix {
        assert!(alpha < self.n_pairs);
        self.projector_full(alpha)
    }

    pub fn reconstruct(&self) -> CMatrix {
        let lam = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.values.clone()));
        &self.right * lam * &self.left
    }

    /// `W M W^T` with `W = V^{-1}`: a real symmetric matrix in the eigenbasis.
    fn to_eigenbasis(&self, m: &DMatrix<f64>) -> CMatrix {
        &self.left * linalg::to_complex(m) * self.left.transpose()
    }

    /// `Re(V C V^T)`, symmetrized.
    fn from_eigenbasis(&self, c: &CMatrix) -> DMatrix<f64> {
        let g = &self.right * c * self.right.transpose();
        linalg::symmetrize(&g.map(|v| v.re))
    }

    fn class(&self, x_scale: f64) -> DynamicsClass {
        gaussian::classify_spectrum(&self.values, x_scale, CLASS_TOL)
    }
}

/// Rotate a complex vector so its largest entry is real, then keep the real part.
fn realify(v: nalgebra::DVectorView<C64>) -> Vec<f64> {
    let (imax, _) = v.iter().enumerate().fold((0, 0.0), |(bi, bv), (i, z)| if z.norm() > bv { (i, z.norm()) } else { (bi, bv) });
    let phase = v[imax].conj() / v[imax].norm().max(f64::MIN_POSITIVE);
    let re: Vec<f64> = v.iter().map(|z| (z * phase).re).collect();
    let n = re.iter().map(|x| x * x).sum::<f64>().sqrt();
    re.iter().map(|x| x / n).collect()
}

pub fn decompose_drift(gen: &Generators) -> Result<SpectralDecomposition> {
    decompose_real(&gen.x)
}

/// Diagonalize a real matrix, pairing complex eigenvalues exactly with their
/// conjugate eigenvectors so real-valued results stay real.
pub fn decompose_real(x: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let n = x.nrows();
    let scale = linalg::max_abs(x).max(f64::MIN_POSITIVE);
    let (vals, vecs) = linalg::general_eigen(x)?;
    let im_tol = 1e-10 * scale;
    let mut pos: Vec<usize> = (0..n).filter(|&k| vals[k].im > im_tol).collect();
    let n_neg = (0..n).filter(|&k| vals[k].im < -im_tol).count();
    let real: Vec<usize> = (0..n).filter(|&k| vals[k].im.abs() <= im_tol).collect();
    if pos.len() != n_neg {
        return Err(GqfiError::DefectiveDrift { reason: "unpaired complex eigenvalues".into() });
    }
    pos.sort_by(|&a, &b| vals[a].im.total_cmp(&vals[b].im).then(vals[a].re.total_cmp(&vals[b].re)));
    let n_pairs = pos.len();
    let mut values = Vec::with_capacity(n);
    let mut right = CMatrix::zeros(n, n);
    for (slot, &k) in pos.iter().enumerate() {
        values.push(vals[k]);
        right.set_column(slot, &vecs.column(k));
    }
    for (slot, &k) in pos.iter().enumerate() {
        values.push(vals[k].conj());
        right.set_column(n_pairs + slot, &vecs.column(k).map(|z| z.conj()));
    }
    let mut real_sorted = real.clone();
    real_sorted.sort_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re));
    for (slot, &k) in real_sorted.iter().enumerate() {
        values.push(C64::new(vals[k].re, 0.0));
        let rv = realify(vecs.column(k));
        for (i, v) in rv.iter().enumerate() {
            right[(i, 2 * n_pairs + slot)] = C64::new(*v, 0.0);
        }
    }

    let sv = right.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition_number <= COND_CAP) {
        return Err(GqfiError::DefectiveDrift {
            reason: format!("eigenvector condition number {condition_number:e} exceeds {COND_CAP:e}"),
        });
    }
    let left = right
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| GqfiError::DefectiveDrift { reason: "singular eigenvector matrix".into() })?;

    let lam = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(values.clone()));
    let resid = linalg::max_abs_c(&(linalg::to_complex(x) * &right - &right * lam));
    if resid > RESIDUAL_TOL * scale {
        return Err(GqfiError::DefectiveDrift { reason: format!("eigen residual {resid:e}") });
    }

    let gap = GAP_TOL * scale;
    let degenerate = (0..n_pairs)
        .map(|a| (0..n).any(|b| b != a && (values[a] - values[b]).norm() < gap))
        .collect();
    Ok(SpectralDecomposition { values, right, left, n_pairs, condition_number, degenerate })
}

fn require_class(spec: &SpectralDecomposition, gen: &Generators, expected: ClassTag) -> Result<()> {
    let class = spec.class(linalg::max_abs(&gen.x));
    if class.tag != expected {
        return Err(GqfiError::WrongClass {
            expected: if expected == ClassTag::Dissipative { "Dissipative" } else { "ZeroDamping" },
            found: class.tag.to_string(),
        });
    }
    Ok(())
}

/// `Gamma(t) = e^{Xt} Gamma0 e^{X^T t} + int_0^t e^{Xs} Y e^{X^T s} ds` in the
/// eigenbasis. Terms with `lambda_k + lambda_l = 0` (the secular terms) are the
/// continuous limit of `(e^{zt} - 1)/z`, so near-degenerate pairs merge smoothly.
fn covariance_solution(spec: &SpectralDecomposition, y: &DMatrix<f64>, g0: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let yt = spec.to_eigenbasis(y);
    let gt = spec.to_eigenbasis(g0);
    let v = spec.full_eigenvalues();
    let n = v.len();
    let c = CMatrix::from_fn(n, n, |k, l| {
        let z = v[k] + v[l];
        (z * t).exp() * gt[(k, l)] + yt[(k, l)] * linalg::phi1(z, t)
    });
    spec.from_eigenbasis(&c)
}

pub fn steady_covariance(gen: &Generators, spec: &SpectralDecomposition) -> Result<DMatrix<f64>> {
    require_class(spec, gen, ClassTag::Dissipative)?;
    let yt = spec.to_eigenbasis(&gen.y);
    let v = spec.full_eigenvalues();
    let n = v.len();
    let c = CMatrix::from_fn(n, n, |k, l| -yt[(k, l)] / (v[k] + v[l]));
    Ok(spec.from_eigenbasis(&c))
}

pub fn dissipative_solution(
    gen: &Generators,
    spec: &SpectralDecomposition,
    gamma0: &DMatrix<f64>,
    t: f64,
) -> Result<DMatrix<f64>> {
    require_class(spec, gen, ClassTag::Dissipative)?;
    Ok(covariance_solution(spec, &gen.y, gamma0, t))
}

pub fn zero_damping_solution(
    gen: &Generators,
    spec: &SpectralDecomposition,
    gamma0: &DMatrix<f64>,
    t: f64,
) -> Result<DMatrix<f64>> {
    require_class(spec, gen, ClassTag::ZeroDamping)?;
    Ok(covariance_solution(spec, &gen.y, gamma0, t))
}

/// `lim Gamma(t)/t = 2 Re sum_alpha P_alpha Y P_alpha^dagger` for zero damping.
pub fn diffusion_rate(gen: &Generators, spec: &SpectralDecomposition) -> Result<DMatrix<f64>> {
    require_class(spec, gen, ClassTag::ZeroDamping)?;
    let n = gen.y.nrows();
    let yc = linalg::to_complex(&gen.y);
    let mut acc = CMatrix::zeros(n, n);
    for a in 0..spec.pair_count() {
        let p = spec.projector(a);
        acc += &p * &yc * p.adjoint();
    }
    Ok(linalg::symmetrize(&(acc.map(|v| v.re) * 2.0)))
}

#[derive(Debug, Clone)]
pub struct DissipativeRates {
    pub rate_ig: f64,
    /// Equal to `rate_ig`: the retained information saturates.
    pub rate_ie: f64,
    /// Saturated information difference `4 w_st^T Gamma_st^{-1} w_st`.
    pub delta_i_st: f64,
    /// Same rate from the projector double sum; agrees with `rate_ig`.
    pub rate_ig_projector: f64,
    pub nbar_st: f64,
    pub gamma_st: DMatrix<f64>,
}

pub fn dissipative_rates(gen: &Generators, spec: &SpectralDecomposition, a: &DVector<f64>) -> Result<DissipativeRates> {
    let gamma_st = steady_covariance(gen, spec)?;
    let n = a.len();
    let lu = gen.x.clone().lu();
    let z = lu.solve(&gamma_st).ok_or_else(|| GqfiError::InvalidInput("singular drift".into()))?;
    let w_st = -(&z * a);
    let rate_ig = -8.0 * a.dot(&(&z * a));

    // 8 a^T V [Y~_kl / (lambda_k (lambda_k + lambda_l))] V^T a
    let yt = spec.to_eigenbasis(&gen.y);
    let v = spec.full_eigenvalues();
    let va = spec.right().transpose() * a.map(|x| C64::new(x, 0.0));
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        for l in 0..n {
            acc += va[k] * yt[(k, l)] / (v[k] * (v[k] + v[l])) * va[l];
        }
    }
    let rate_ig_projector = 8.0 * acc.re;

    let delta_i_st = match gamma_st.clone().cholesky() {
        Some(ch) => 4.0 * w_st.dot(&ch.solve(&w_st)),
        None => return Err(GqfiError::SingularCovariance { t: f64::INFINITY }),
    };
    let m = (n / 2) as f64;
    Ok(DissipativeRates {
        rate_ig,
        rate_ie: rate_ig,
        delta_i_st,
        rate_ig_projector,
        nbar_st: gamma_st.trace() / (2.0 * m),
        gamma_st,
    })
}

/// Position-block view of a zero-damping model with
/// `H = diag(h, omega 1)` and `M = diag(m_R + i m_I, 0)`.
#[derive(Debug, Clone)]
pub struct PositionBlockDecomposition {
    /// Ascending, positive.
    pub eigenvalues: Vec<f64>,
    /// Columns `r_alpha`.
    pub right: DMatrix<f64>,
    /// Columns `l_alpha`, unit norm, `l_alpha^T r_beta = delta`.
    pub left: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub m_r: DMatrix<f64>,
    pub m_i: DMatrix<f64>,
    pub h_eff: DMatrix<f64>,
    pub omega: f64,
    /// Position part of the drive.
    pub b: DVector<f64>,
}

impl PositionBlockDecomposition {
    pub fn new(model: &ModelSpec, gen: &Generators) -> Result<Self> {
        let m = model.modes();
        let hm = model.hamiltonian();
        let scale = linalg::max_abs(hm).max(linalg::max_abs_c(&gen.m_mat)).max(1.0);
        let tol = 1e-12 * scale;
        let omega = hm[(m, m)];
        for i in 0..m {
            for j in 0..m {
                if hm[(i, m + j)].abs() > tol || hm[(m + i, j)].abs() > tol {
                    return Err(GqfiError::WrongBlockStructure("hamiltonian couples positions and momenta".into()));
                }
                let expect = if i == j { omega } else { 0.0 };
                if (hm[(m + i, m + j)] - expect).abs() > tol {
                    return Err(GqfiError::WrongBlockStructure("momentum block is not a multiple of identity".into()));
                }
                if gen.m_mat[(i, m + j)].norm() > tol
                    || gen.m_mat[(m + i, j)].norm() > tol
                    || gen.m_mat[(m + i, m + j)].norm() > tol
                {
                    return Err(GqfiError::WrongBlockStructure("measurement acts outside the position block".into()));
                }
            }
            if model.drive()[m + i].abs() > tol {
                return Err(GqfiError::WrongBlockStructure("drive has momentum components".into()));
            }
        }
        let h = hm.view((0, 0), (m, m)).into_owned();
        let m_r = gen.m_r.view((0, 0), (m, m)).into_owned();
        let m_i = gen.m_i.view((0, 0), (m, m)).into_owned();
        let h_eff = &h + &m_i;
        let b = model.drive().rows(0, m).into_owned();

        let (vals, vecs) = linalg::general_eigen(&h_eff)?;
        let hs = linalg::max_abs(&h_eff).max(f64::MIN_POSITIVE);
        let wrong = || GqfiError::WrongClass { expected: "ZeroDamping", found: "complex or non-positive h_eff spectrum".into() };
        if vals.iter().any(|v| v.im.abs() > 1e-9 * hs || v.re <= 0.0) || omega <= 0.0 {
            return Err(wrong());
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| vals[k].re).collect();
        let mut right = DMatrix::zeros(m, m);
        for (slot, &k) in order.iter().enumerate() {
            right.set_column(slot, &DVector::from_vec(realify(vecs.column(k))));
        }
        let lt = right
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| GqfiError::DefectiveDrift { reason: "singular h_eff eigenvectors".into() })?;
        let mut left = lt.transpose();
        for a in 0..m {
            let n = left.column(a).norm();
            left.column_mut(a).scale_mut(1.0 / n);
            right.column_mut(a).scale_mut(n);
        }
        Ok(PositionBlockDecomposition { eigenvalues, right, left, h, m_r, m_i, h_eff, omega, b })
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn projector(&self, a: usize) -> DMatrix<f64> {
        self.right.column(a) * self.left.column(a).transpose()
    }

    /// `d_alpha = l_alpha^T m_R l_alpha`.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.modes()).map(|a| (self.left.column(a).transpose() * &self.m_r * self.left.column(a))[(0, 0)]).collect()
    }

    fn weighted_outer(&self, f: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let d: Vec<f64> = self.weights().iter().enumerate().map(|(a, d)| d * f(a)).collect();
        &self.right * DMatrix::from_diagonal(&DVector::from_vec(d)) * self.right.transpose()
    }

    /// Dephased backaction `sum_alpha P~ m_R P~^T`.
    pub fn dephased_backaction(&self) -> DMatrix<f64> {
        linalg::symmetrize(&self.weighted_outer(|_| 1.0))
    }

    /// `sum_alpha P~ m_R P~^T / (sqrt(2) lambda~)`.
    pub fn dephased_backaction_prime(&self) -> DMatrix<f64> {
        let l = &self.eigenvalues;
        linalg::symmetrize(&self.weighted_outer(|a| 1.0 / (2f64.sqrt() * l[a])))
    }

    /// `h_eff^{-1} m_R h_eff^{-T}`.
    pub fn environmental_matrix(&self) -> DMatrix<f64> {
        let inv = DMatrix::from_diagonal(&DVector::from_iterator(self.modes(), self.eigenvalues.iter().map(|l| 1.0 / l)));
        let heff_inv = &self.right * inv * self.left.transpose();
        linalg::symmetrize(&(&heff_inv * &self.m_r * heff_inv.transpose()))
    }

    /// `sum_alpha P~ m_R P~^T / (2 lambda~^2)`.
    pub fn retained_matrix(&self) -> DMatrix<f64> {
        let l = &self.eigenvalues;
        linalg::symmetrize(&self.weighted_outer(|a| 1.0 / (2.0 * l[a] * l[a])))
    }

    /// `m~' m~^{-1} m~'`, using a pseudo-inverse when `m~` is rank deficient.
    pub fn retained_matrix_via_inverse(&self) -> DMatrix<f64> {
        let mt = self.dephased_backaction();
        let mp = self.dephased_backaction_prime();
        let eig = SymmetricEigen::new(mt);
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let cut = 1e-12 * top;
        let inv_vals = eig.eigenvalues.map(|v| if v > cut { 1.0 / v } else { 0.0 });
        let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
        linalg::symmetrize(&(&mp * pinv * &mp))
    }

    /// Block form of `lim Gamma(t)/t`.
    pub fn diffusion_rate(&self) -> DMatrix<f64> {
        let m = self.modes();
        let l = &self.eigenvalues;
        let om = self.omega;
        let xx = self.weighted_outer(|a| om / l[a] / 2.0);
        let pp = self.weighted_outer(|_| 0.5);
        let mut g = DMatrix::zeros(2 * m, 2 * m);
        g.view_mut((0, 0), (m, m)).copy_from(&xx);
        g.view_mut((m, m), (m, m)).copy_from(&pp);
        linalg::symmetrize(&g)
    }

    /// Full-space eigenvalues `sqrt(omega lambda~)`.
    pub fn frequencies(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| (self.omega * l).sqrt()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ZeroDampingRates {
    pub nbar_rate: f64,
    pub rate_ig: f64,
    pub rate_ie: f64,
    pub rate_di: f64,
    /// `|rate_ig - rate_ie - rate_di| / rate_ig`.
    pub identity_residual: f64,
}

pub fn zero_damping_rates(pbd: &PositionBlockDecomposition, b: &DVector<f64>) -> ZeroDampingRates {
    let m = pbd.modes();
    let om = pbd.omega;
    let nbar_rate = pbd
        .weights()
        .iter()
        .enumerate()
        .map(|(a, d)| (om / pbd.eigenvalues[a] + 1.0) * d * pbd.right.column(a).norm_squared())
        .sum::<f64>()
        / (4.0 * m as f64);
    let f = pbd.environmental_matrix();
    let amat = pbd.retained_matrix();
    let quad = |q: &DMatrix<f64>| 4.0 * b.dot(&(q * b));
    let rate_ie = quad(&f);
    let rate_ig = rate_ie + quad(&amat);
    let rate_di = quad(&pbd.retained_matrix_via_inverse());
    let identity_residual = if rate_ig != 0.0 { (rate_ig - rate_ie - rate_di).abs() / rate_ig.abs() } else { (rate_ig - rate_ie - rate_di).abs() };
    ZeroDampingRates { nbar_rate, rate_ig, rate_ie, rate_di, identity_residual }
}

#[derive(Debug, Clone)]
pub struct OptimizedRates {
    pub rate_ig: f64,
    pub rate_ie: f64,
    /// Maximizing drives in the full 2M space, scaled to `|a|^2 = M`.
    pub argmax_ig: DVector<f64>,
    pub argmax_ie: DVector<f64>,
}

/// Largest eigenpair of a symmetric matrix; eigenvector sign fixed so its entries sum to >= 0.
fn top_eigenpair(s: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(linalg::symmetrize(s));
    let (k, _) = eig.eigenvalues.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bk, bv), (k, v)| if *v > bv { (k, *v) } else { (bk, bv) });
    let mut v = eig.eigenvectors.column(k).into_owned();
    if v.sum() < 0.0 {
        v = -v;
    }
    (eig.eigenvalues[k], v)
}

/// Dissipative optimum over `|a|^2 = M` in the full phase space.
pub fn optimized_dissipative(gen: &Generators, spec: &SpectralDecomposition) -> Result<OptimizedRates> {
    let gamma_st = steady_covariance(gen, spec)?;
    let m = gamma_st.nrows() / 2;
    let z = gen.x.clone().lu().solve(&gamma_st).ok_or_else(|| GqfiError::InvalidInput("singular drift".into()))?;
    let (lmax, v) = top_eigenpair(&(-z));
    let rate = 8.0 * m as f64 * lmax;
    let a = v * (m as f64).sqrt();
    Ok(OptimizedRates { rate_ig: rate, rate_ie: rate, argmax_ig: a.clone(), argmax_ie: a })
}

/// Zero-damping optimum over position-only drives with `|b|^2 = M`.
pub fn optimized_zero_damping(pbd: &PositionBlockDecomposition) -> OptimizedRates {
    let m = pbd.modes();
    let f = pbd.environmental_matrix();
    let g = &f + pbd.retained_matrix();
    let pad = |v: DVector<f64>| {
        let mut a = DVector::zeros(2 * m);
        a.rows_mut(0, m).copy_from(&(v * (m as f64).sqrt()));
        a
    };
    let (lg, vg) = top_eigenpair(&g);
    let (le, ve) = top_eigenpair(&f);
    OptimizedRates { rate_ig: 4.0 * m as f64 * lg, rate_ie: 4.0 * m as f64 * le, argmax_ig: pad(vg), argmax_ie: pad(ve) }
}

#[derive(Debug, Clone)]
pub struct DephasingTime {
    pub t_star: f64,
    pub sigma_gap: f64,
    /// Weighted mean gap; zero by antisymmetry, kept as a diagnostic.
    pub m_gap: f64,
}

/// Dephasing time `pi / sigma_gap` from the gap distribution of the oscillatory terms.
pub fn dephasing_time(gen: &Generators, spec: &SpectralDecomposition) -> Result<DephasingTime> {
    require_class(spec, gen, ClassTag::ZeroDamping)?;
    let n = spec.pair_count();
    let freqs: Vec<f64> = spec.eigenvalues().iter().map(|v| v.im).collect();
    let yc = linalg::to_complex(&gen.y);
    let left = spec.left();
    let right = spec.right();
    let col_norm: Vec<f64> = (0..n).map(|a| right.column(a).norm()).collect();
    let gap_tol = GAP_TOL * linalg::max_abs(&gen.x);
    let mut coupling = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        let uy = left.row(a) * &yc;
        for b in 0..n {
            // ||P_a Y P_b^dagger||_HS = |u_a Y u_b^dagger| |v_a| |v_b|
            let c = (&uy * left.row(b).adjoint())[(0, 0)];
            coupling[(a, b)] = c.norm() * col_norm[a] * col_norm[b];
        }
    }
    // Couplings that vanish by symmetry come out at round-off level.
    let floor = V_TOL * (0..n).map(|a| coupling[(a, a)]).fold(0.0, f64::max);
    let mut weights = Vec::new();
    let mut gaps = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let gap = freqs[a] - freqs[b];
            if a == b || gap.abs() < gap_tol || coupling[(a, b)] <= floor {
                continue;
            }
            let v = coupling[(a, b)] / gap.abs();
            weights.push(v * v);
            gaps.push(gap);
        }
    }
    let total: f64 = weights.iter().sum();
    let top = weights.iter().cloned().fold(0.0, f64::max);
    if weights.is_empty() || top <= 0.0 || total <= 1e-300 {
        return Err(GqfiError::AllGapsDegenerate);
    }
    let q: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let m_gap: f64 = q.iter().zip(&gaps).map(|(q, g)| q * g).sum();
    let var: f64 = q.iter().zip(&gaps).map(|(q, g)| q * g * g).sum();
    let sigma_gap = var.sqrt();
    Ok(DephasingTime { t_star: std::f64::consts::PI / sigma_gap, sigma_gap, m_gap })
}

#[derive(Debug, Clone)]
pub struct SkinSpectrum {
    /// Analytic eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Dense-solver eigenvalues, ascending.
    pub numeric_eigenvalues: Vec<f64>,
    pub max_abs_error: f64,
    /// `1/xi = |log sqrt(t_R/t_L)|`.
    pub inv_xi: f64,
    pub xi: f64,
    /// Signed growth rate `log sqrt(t_R/t_L)` of right eigenvectors along the chain.
    pub profile_exponent: f64,
    /// Per-mode least-squares estimate of the same exponent from the dense eigenvectors.
    pub fitted_exponents: Vec<f64>,
}

/// Uniform tridiagonal chain with `H[j+1][j] = t_r`, `H[j][j+1] = t_l` and diagonal `w`.
pub fn chain_matrix(t_r: f64, t_l: f64, w: f64, l: usize) -> DMatrix<f64> {
    let mut h = DMatrix::identity(l, l) * w;
    for j in 0..l.saturating_sub(1) {
        h[(j + 1, j)] = t_r;
        h[(j, j + 1)] = t_l;
    }
    h
}

pub fn skin_spectrum(t_r: f64, t_l: f64, w: f64, l: usize) -> Result<SkinSpectrum> {
    if !(t_r * t_l > 0.0) {
        return Err(GqfiError::InvalidHopping { t_r, t_l });
    }
    if l == 0 {
        return Err(GqfiError::InvalidInput("chain length must be positive".into()));
    }
    let root = t_r.signum() * (t_r * t_l).sqrt();
    let mut eigenvalues: Vec<f64> =
        (1..=l).map(|n| w + 2.0 * root * (n as f64 * std::f64::consts::PI / (l as f64 + 1.0)).cos()).collect();
    eigenvalues.sort_by(f64::total_cmp);
    let profile_exponent = (t_r / t_l).sqrt().ln();
    let inv_xi = profile_exponent.abs();
    let xi = if inv_xi == 0.0 { f64::INFINITY } else { 1.0 / inv_xi };

    let h = chain_matrix(t_r, t_l, w, l);
    let spec = decompose_real(&h)?;
    let mut numeric: Vec<(f64, usize)> = spec.full_eigenvalues().iter().enumerate().map(|(k, v)| (v.re, k)).collect();
    numeric.sort_by(|a, b| a.0.total_cmp(&b.0));
    let max_abs_error = numeric.iter().zip(&eigenvalues).map(|(a, b)| (a.0 - b).abs()).fold(0.0, f64::max);

    // log|r_j / l_j| = 2 j log sqrt(t_R/t_L) + const: the sine envelope cancels.
    let fitted_exponents = numeric
        .iter()
        .map(|&(_, k)| {
            let r = spec.right().column(k);
            let lv = spec.left().row(k);
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            let rmax = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let lmax = lv.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for j in 0..l {
                let (rn, ln) = (r[j].norm(), lv[j].norm());
                if rn > 1e-12 * rmax && ln > 1e-12 * lmax {
                    xs.push(j as f64);
                    ys.push((rn / ln).ln() / 2.0);
                }
            }
            if xs.len() < 2 {
                f64::NAN
            } else {
                crate::dynamics::linear_slope(&xs, &ys)
            }
        })
        .collect();
    Ok(SkinSpectrum {
        eigenvalues,
        numeric_eigenvalues: numeric.iter().map(|p| p.0).collect(),
        max_abs_error,
        inv_xi,
        xi,
        profile_exponent,
        fitted_exponents,
    })
}

/// One family member for the bound sandwich.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub modes: usize,
    pub optimized_rate: f64,
    pub resource: f64,
}

#[derive(Debug, Clone)]
pub struct BoundCheckResult {
    /// `rate / (resource M)` per point.
    pub lower_ratios: Vec<f64>,
    /// `rate / (resource M^2)` per point.
    pub upper_ratios: Vec<f64>,
    /// Fitted constants: min of the lower ratios, max of the upper ratios.
    pub lower_constant: f64,
    pub upper_constant: f64,
    /// `(max - min) / (max + min)` of each ratio sequence.
    pub lower_spread: f64,
    pub upper_spread: f64,
    /// Relative change between the first and last ratio.
    pub lower_drift: f64,
    pub upper_drift: f64,
    pub lower_flagged: bool,
    pub upper_flagged: bool,
}

pub const BOUND_TOL: f64 = 0.10;

pub fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / (max + min)
}

fn drift(v: &[f64]) -> f64 {
    let (a, b) = (v[0], v[v.len() - 1]);
    (b - a) / (0.5 * (a.abs() + b.abs()))
}

/// Sandwich ratios for a family swept over M. Flags a ratio whose end-to-end
/// drift exceeds `BOUND_TOL`; a lower ratio drifting up (or an upper one
/// drifting down) is consistent with the bound and is not flagged.
pub fn check_bounds(points: &[BoundPoint]) -> BoundCheckResult {
    let lower: Vec<f64> = points.iter().map(|p| p.optimized_rate / (p.resource * p.modes as f64)).collect();
    let upper: Vec<f64> = points.iter().map(|p| p.optimized_rate / (p.resource * (p.modes * p.modes) as f64)).collect();
    let (ld, ud) = if points.len() >= 2 { (drift(&lower), drift(&upper)) } else { (0.0, 0.0) };
    BoundCheckResult {
        lower_constant: lower.iter().cloned().fold(f64::INFINITY, f64::min),
        upper_constant: upper.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        lower_spread: if points.is_empty() { 0.0 } else { spread(&lower) },
        upper_spread: if points.is_empty() { 0.0 } else { spread(&upper) },
        lower_drift: ld,
        upper_drift: ud,
        lower_flagged: ld < -BOUND_TOL,
        upper_flagged: ud > BOUND_TOL,
        lower_ratios: lower,
        upper_ratios: upper,
    }
}

/// All asymptotic quantities for one model.
#[derive(Debug, Clone)]
pub struct AsymptoticReport {
    pub class: DynamicsClass,
    pub rate_ig: f64,
    pub rate_ie: f64,
    pub rate_di: f64,
    /// Steady excitations per mode (dissipative) or their growth rate (zero damping).
    pub nbar: f64,
    /// `Gamma_st` (dissipative) or `lim Gamma(t)/t` (zero damping).
    pub gamma: DMatrix<f64>,
    pub t_star: Option<f64>,
    pub optimized: OptimizedRates,
}

pub fn asymptotic_report(model: &ModelSpec) -> Result<AsymptoticReport> {
    let gen = assemble_generators(model)?;
    let spec = decompose_drift(&gen)?;
    let class = spec.class(linalg::max_abs(&gen.x));
    match class.tag {
        ClassTag::Dissipative => {
            let r = dissipative_rates(&gen, &spec, model.drive())?;
            let optimized = optimized_dissipative(&gen, &spec)?;
            Ok(AsymptoticReport {
                class,
                rate_ig: r.rate_ig,
                rate_ie: r.rate_ie,
                rate_di: 0.0,
                nbar: r.nbar_st,
                gamma: r.gamma_st,
                t_star: None,
                optimized,
            })
        }
        ClassTag::ZeroDamping => {
            let pbd = PositionBlockDecomposition::new(model, &gen)?;
            let r = zero_damping_rates(&pbd, &pbd.b);
            let t_star = match dephasing_time(&gen, &spec) {
                Ok(d) => Some(d.t_star),
                Err(GqfiError::AllGapsDegenerate) => None,
                Err(e) => return Err(e),
            };
            Ok(AsymptoticReport {
                class,
                rate_ig: r.rate_ig,
                rate_ie: r.rate_ie,
                rate_di: r.rate_di,
                nbar: r.nbar_rate,
                gamma: pbd.diffusion_rate(),
                t_star,
                optimized: optimized_zero_damping(&pbd),
            })
        }
        ClassTag::Unstable => Err(GqfiError::WrongClass { expected: "Dissipative or ZeroDamping", found: "Unstable".into() }),
    }
}
