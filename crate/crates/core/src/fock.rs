//! Brute-force check of the Gaussian engine: the pseudo-density matrix
//! `mu_{theta1,theta2}` is integrated in a truncated Fock basis and both QFIs
//! are read off fidelities by a symmetric finite difference.

use nalgebra::{DMatrix, DVector};

use crate::error::{GqfiError, Result};
use crate::gaussian::ModelSpec;
use crate::linalg::{CMatrix, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Sparse complex matrix in CSR form.
#[derive(Debug, Clone)]
pub struct SparseC {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseC {
    /// Builds from triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<C64> = Vec::with_capacity(trip.len());
        let mut rows = Vec::with_capacity(trip.len());
        for (i, j, v) in trip {
            if let (Some(&li), Some(&lj)) = (rows.last(), cols.last()) {
                if li == i && lj == j {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(i);
            cols.push(j);
            vals.push(v);
        }
        let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] != C64::new(0.0, 0.0)).collect();
        let rows: Vec<usize> = keep.iter().map(|&k| rows[k]).collect();
        let cols: Vec<usize> = keep.iter().map(|&k| cols[k]).collect();
        let vals: Vec<C64> = keep.iter().map(|&k| vals[k]).collect();
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseC { n, row_ptr, cols, vals }
    }

    pub fn zeros(n: usize) -> Self {
        SparseC::from_triplets(n, Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        SparseC::from_triplets(n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k])))
    }

    pub fn adjoint(&self) -> Self {
        SparseC::from_triplets(self.n, self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        SparseC { vals: self.vals.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &SparseC) -> Self {
        SparseC::from_triplets(self.n, self.triplets().chain(other.triplets()).collect())
    }

    pub fn mul(&self, other: &SparseC) -> Self {
        let mut trip = Vec::new();
        for (i, k, a) in self.triplets() {
            for q in other.row_ptr[k]..other.row_ptr[k + 1] {
                trip.push((i, other.cols[q], a * other.vals[q]));
            }
        }
        SparseC::from_triplets(self.n, trip)
    }

    /// `self * m` for dense `m`.
    pub fn left_mul(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.n, m.ncols());
        for c in 0..m.ncols() {
            let mc = m.column(c);
            for i in 0..self.n {
                let mut acc = C64::new(0.0, 0.0);
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[k] * mc[self.cols[k]];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    /// `m * self` for dense `m`.
    pub fn right_mul(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), self.n);
        for (k, j, v) in self.triplets() {
            let src = m.column(k).into_owned();
            let mut dst = out.column_mut(j);
            dst.axpy(v, &src, C64::new(1.0, 0.0));
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut d = CMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockConfig {
    pub cutoff: usize,
    pub dt: f64,
    /// Largest tolerated population in the top two Fock levels of any mode.
    pub leak_tol: f64,
}

impl Default for FockConfig {
    fn default() -> Self {
        FockConfig { cutoff: 30, dt: 0.01, leak_tol: 1e-6 }
    }
}

/// Operators of one model on the truncated space of dimension `cutoff^M`.
#[derive(Debug, Clone)]
pub struct TruncatedOperatorSet {
    pub modes: usize,
    pub cutoff: usize,
    /// Quadratures in `(x..., p...)` order.
    pub quadratures: Vec<SparseC>,
    /// `phi^T H phi / 2` without the drive.
    pub h0: SparseC,
    /// `a^T phi`; the Hamiltonian is `h0 + theta * drive`.
    pub drive: SparseC,
    pub jumps: Vec<SparseC>,
    /// `sum_n L_n^dagger L_n`.
    pub jump_sum: SparseC,
    /// Basis indices whose occupation in some mode is in the top two levels.
    edge_states: Vec<usize>,
}

impl TruncatedOperatorSet {
    pub fn new(model: &ModelSpec, cutoff: usize) -> Result<Self> {
        let m = model.modes();
        if m > 2 {
            return Err(GqfiError::InvalidInput(format!("Fock oracle supports at most 2 modes, got {m}")));
        }
        if cutoff < 8 {
            return Err(GqfiError::InvalidInput(format!("Fock cutoff must be at least 8, got {cutoff}")));
        }
        let dim = cutoff.pow(m as u32);
        // Mode 0 is the most significant digit of the basis index.
        let digit = |idx: usize, mode: usize| (idx / cutoff.pow((m - 1 - mode) as u32)) % cutoff;
        let stride = |mode: usize| cutoff.pow((m - 1 - mode) as u32);
        let annihilation = |mode: usize| {
            let trip = (0..dim)
                .filter(|&s| digit(s, mode) > 0)
                .map(|s| (s - stride(mode), s, C64::new((digit(s, mode) as f64).sqrt(), 0.0)))
                .collect();
            SparseC::from_triplets(dim, trip)
        };
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut xs = Vec::new();
        let mut ps = Vec::new();
        for j in 0..m {
            let b = annihilation(j);
            let bd = b.adjoint();
            xs.push(b.add(&bd).scale(C64::new(r2, 0.0)));
            ps.push(b.add(&bd.scale(C64::new(-1.0, 0.0))).scale(C64::new(0.0, -r2)));
        }
        let quadratures: Vec<SparseC> = xs.into_iter().chain(ps).collect();
        let n = 2 * m;
        let hm = model.hamiltonian();
        let mut h0 = SparseC::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                if hm[(i, j)] != 0.0 {
                    h0 = h0.add(&quadratures[i].mul(&quadratures[j]).scale(C64::new(0.5 * hm[(i, j)], 0.0)));
                }
            }
        }
        let mut drive = SparseC::zeros(dim);
        for i in 0..n {
            if model.drive()[i] != 0.0 {
                drive = drive.add(&quadratures[i].scale(C64::new(model.drive()[i], 0.0)));
            }
        }
        let mut jumps = Vec::new();
        let mut jump_sum = SparseC::zeros(dim);
        for r in 0..model.jumps().nrows() {
            let mut l = SparseC::zeros(dim);
            for k in 0..n {
                let c = model.jumps()[(r, k)];
                if c != C64::new(0.0, 0.0) {
                    l = l.add(&quadratures[k].scale(c));
                }
            }
            jump_sum = jump_sum.add(&l.adjoint().mul(&l));
            jumps.push(l);
        }
        let edge_states = (0..dim).filter(|&s| (0..m).any(|j| digit(s, j) + 2 >= cutoff)).collect();
        Ok(TruncatedOperatorSet { modes: m, cutoff, quadratures, h0, drive, jumps, jump_sum, edge_states })
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn vacuum(&self) -> CMatrix {
        let mut mu = CMatrix::zeros(self.dim(), self.dim());
        mu[(0, 0)] = C64::new(1.0, 0.0);
        mu
    }

    /// Magnitude of the diagonal weight in the top two levels.
    pub fn leakage(&self, mu: &CMatrix) -> f64 {
        self.edge_states.iter().map(|&s| mu[(s, s)].norm()).sum()
    }

    /// `Tr[x mu]` and `Tr[{dx, dx} mu] / 2` over all quadratures.
    pub fn moments(&self, mu: &CMatrix) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.quadratures.len();
        let tr = |a: &CMatrix| (0..a.nrows()).map(|i| a[(i, i)]).sum::<C64>();
        let mean = DVector::from_fn(n, |i, _| tr(&self.quadratures[i].left_mul(mu)).re);
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let ij = tr(&self.quadratures[i].left_mul(&self.quadratures[j].left_mul(mu)));
                let ji = tr(&self.quadratures[j].left_mul(&self.quadratures[i].left_mul(mu)));
                cov[(i, j)] = 0.5 * (ij + ji).re - mean[i] * mean[j];
            }
        }
        (mean, cov)
    }
}

struct Generator<'a> {
    ops: &'a TruncatedOperatorSet,
    k1: SparseC,
    k2_dag: SparseC,
    jumps_dag: Vec<SparseC>,
}

impl<'a> Generator<'a> {
    fn new(ops: &'a TruncatedOperatorSet, theta1: f64, theta2: f64) -> Self {
        let half_i = C64::new(0.0, 0.5);
        let h1 = ops.h0.add(&ops.drive.scale(C64::new(theta1, 0.0)));
        let h2 = ops.h0.add(&ops.drive.scale(C64::new(theta2, 0.0)));
        let k1 = h1.add(&ops.jump_sum.scale(-half_i));
        let k2_dag = h2.add(&ops.jump_sum.scale(half_i));
        let jumps_dag = ops.jumps.iter().map(|l| l.adjoint()).collect();
        Generator { ops, k1, k2_dag, jumps_dag }
    }

    fn rhs(&self, mu: &CMatrix) -> CMatrix {
        let mut d = self.k1.left_mul(mu) * (-I) + self.k2_dag.right_mul(mu) * I;
        for (l, ld) in self.ops.jumps.iter().zip(&self.jumps_dag) {
            d += ld.right_mul(&l.left_mul(mu));
        }
        d
    }
}

/// RK4 integration of the generalized Lindblad equation from the vacuum.
pub fn integrate_pseudo_density(
    model: &ModelSpec,
    theta1: f64,
    theta2: f64,
    t: f64,
    config: &FockConfig,
) -> Result<CMatrix> {
    let ops = TruncatedOperatorSet::new(model, config.cutoff)?;
    integrate_with(&ops, theta1, theta2, t, config)
}

pub fn integrate_with(
    ops: &TruncatedOperatorSet,
    theta1: f64,
    theta2: f64,
    t: f64,
    config: &FockConfig,
) -> Result<CMatrix> {
    if !(config.dt > 0.0) || !(t >= 0.0) {
        return Err(GqfiError::InvalidInput("dt must be positive and t non-negative".into()));
    }
    let gen = Generator::new(ops, theta1, theta2);
    let steps = (t / config.dt - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps > 0 { t / steps as f64 } else { 0.0 };
    let mut mu = ops.vacuum();
    for k in 1..=steps {
        let k1 = gen.rhs(&mu);
        let k2 = gen.rhs(&(&mu + &k1 * C64::new(dt / 2.0, 0.0)));
        let k3 = gen.rhs(&(&mu + &k2 * C64::new(dt / 2.0, 0.0)));
        let k4 = gen.rhs(&(&mu + &k3 * C64::new(dt, 0.0)));
        mu += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
        let leak = ops.leakage(&mu);
        if !(leak <= config.leak_tol) {
            return Err(GqfiError::CutoffExceeded { cutoff: ops.cutoff, leakage: leak, t: k as f64 * dt });
        }
    }
    Ok(mu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockQfis {
    pub i_g: f64,
    pub i_e: f64,
    pub f_g: f64,
    pub f_e: f64,
}

/// Global fidelity `|Tr mu|`.
pub fn global_fidelity(mu: &CMatrix) -> f64 {
    (0..mu.nrows()).map(|i| mu[(i, i)]).sum::<C64>().norm()
}

/// Environmental fidelity: trace norm of `mu`.
pub fn environmental_fidelity(mu: &CMatrix) -> f64 {
    mu.clone().svd(false, false).singular_values.sum()
}

/// `I = 8 (1 - F) / eps^2` with `F` evaluated at `theta +- eps/2`.
/// A model whose drive vanishes carries no information and returns zeros.
pub fn fidelity_qfis(model: &ModelSpec, theta: f64, eps: f64, t: f64, config: &FockConfig) -> Result<FockQfis> {
    if !(eps > 0.0) {
        return Err(GqfiError::InvalidInput("eps must be positive".into()));
    }
    if model.drive().iter().all(|v| *v == 0.0) {
        return Ok(FockQfis { i_g: 0.0, i_e: 0.0, f_g: 1.0, f_e: 1.0 });
    }
    let mu = integrate_pseudo_density(model, theta + eps / 2.0, theta - eps / 2.0, t, config)?;
    let f_g = global_fidelity(&mu);
    let f_e = environmental_fidelity(&mu);
    for f in [f_g, f_e] {
        let inf = 1.0 - f;
        if inf < 10.0 * f64::EPSILON || f < 0.5 {
            return Err(GqfiError::IllConditioned { infidelity: inf });
        }
    }
    let q = |f: f64| 8.0 * (1.0 - f) / (eps * eps);
    Ok(FockQfis { i_g: q(f_g), i_e: q(f_e), f_g, f_e })
}
