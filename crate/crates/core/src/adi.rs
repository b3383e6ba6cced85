//! ADI iteration for `A X + X B + b c^T = 0`.
//!
//! One step with shifts `(alpha, beta)` maps
//!
//! ```text
//! X_i = (A - a I)(A + b I)^{-1} X_{i-1} (B - b I)(B + a I)^{-1}
//!       - (a + b)(A + b I)^{-1} Y (B + a I)^{-1}
//! ```
//!
//! [`adi_step_dense`] evaluates this literally. [`adi_lowrank`] runs the same
//! sweep from `X_0 = 0` in factored form, `X_r = L M^T`, using `alpha_i = -sigma_i`
//! and `beta_i = -mu_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::krylov::ShiftSet;
use crate::linalg::{thin_r, to_complex, Lu, C64};
use crate::operator::{LinearOperator, Transposed};
use crate::problem::{LyapunovProblem, SylvesterProblem};

/// Paired ADI parameters; the usual choice is `alpha = -sigma`, `beta = -mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiShiftPairs {
    pub alpha: Vec<C64>,
    pub beta: Vec<C64>,
}

impl AdiShiftPairs {
    pub fn new(alpha: Vec<C64>, beta: Vec<C64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::InvalidArgument(format!(
                "ADI shift lists differ in length: {} vs {}",
                alpha.len(),
                beta.len()
            )));
        }
        Ok(AdiShiftPairs { alpha, beta })
    }

    pub fn from_shift_sets(sigma: &ShiftSet, mu: &ShiftSet) -> Result<Self> {
        Self::new(sigma.iter().map(|s| -s).collect(), mu.iter().map(|s| -s).collect())
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// `X_r = L M^T`.
#[derive(Debug, Clone)]
pub struct LowRankApproximation {
    pub l: DMatrix<f64>,
    pub m: DMatrix<f64>,
}

impl LowRankApproximation {
    pub fn zero(n: usize, m: usize) -> Self {
        LowRankApproximation { l: DMatrix::zeros(n, 0), m: DMatrix::zeros(m, 0) }
    }

    pub fn rank_bound(&self) -> usize {
        self.l.ncols()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        if self.l.ncols() == 0 {
            return DMatrix::zeros(self.l.nrows(), self.m.nrows());
        }
        &self.l * self.m.transpose()
    }

    pub fn transpose(&self) -> Self {
        LowRankApproximation { l: self.m.clone(), m: self.l.clone() }
    }

    /// Rank-revealing recompression of `F G^T` with columns of `L` and `M`
    /// carrying equal norms. Keeps at most `max_rank` terms and drops exact zeros.
    pub fn compress(f: &DMatrix<f64>, g: &DMatrix<f64>, max_rank: usize) -> Self {
        let (n, m) = (f.nrows(), g.nrows());
        if f.ncols() == 0 {
            return Self::zero(n, m);
        }
        let qf = f.clone().qr();
        let qg = g.clone().qr();
        let core = qf.r() * qg.r().transpose();
        let svd = core.svd(true, true);
        let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let keep: Vec<usize> = order
            .into_iter()
            .filter(|&k| svd.singular_values[k] > 0.0)
            .take(max_rank)
            .collect();
        if keep.is_empty() {
            return Self::zero(n, m);
        }
        let (q1, q2) = (qf.q(), qg.q());
        let mut l = DMatrix::zeros(n, keep.len());
        let mut mm = DMatrix::zeros(m, keep.len());
        for (c, &k) in keep.iter().enumerate() {
            let s = svd.singular_values[k].sqrt();
            l.set_column(c, &(&q1 * u.column(k) * s));
            mm.set_column(c, &(&q2 * vt.row(k).transpose() * s));
        }
        LowRankApproximation { l, m: mm }
    }
}

fn shifted_plus(m: &DMatrix<f64>, shift: C64) -> DMatrix<C64> {
    let mut out = to_complex(m);
    for i in 0..m.nrows() {
        out[(i, i)] += shift;
    }
    out
}

fn collision(shift: C64) -> Error {
    Error::ShiftCollision { shift }
}

/// One dense ADI step from `x_prev`.
pub fn adi_step_dense(
    p: &SylvesterProblem,
    x_prev: &DMatrix<C64>,
    alpha: C64,
    beta: C64,
) -> Result<DMatrix<C64>> {
    let (n, m) = (p.n(), p.m());
    if x_prev.shape() != (n, m) {
        return Err(Error::DimensionMismatch { context: "rows of X_prev", expected: n, found: x_prev.nrows() });
    }
    // (A + beta I) and (B + alpha I) are the shifted operators at -beta and -alpha
    let a_plus = Lu::new(&shifted_plus(&p.a, beta)).ok_or_else(|| collision(-beta))?;
    let b_plus = Lu::new(&shifted_plus(&p.b, alpha)).ok_or_else(|| collision(-alpha))?;
    let a_minus = shifted_plus(&p.a, -alpha);
    let b_minus = shifted_plus(&p.b, -beta);

    let left = &a_minus * a_plus.solve_matrix(x_prev);
    let first = b_plus.right_solve_matrix(&(left * b_minus));
    let y = to_complex(&p.rhs());
    let second = b_plus.right_solve_matrix(&a_plus.solve_matrix(&y));
    Ok(first - second * (alpha + beta))
}

/// Runs `adi_step_dense` for each pair, starting from `x0`.
pub fn adi_dense(p: &SylvesterProblem, x0: &DMatrix<C64>, shifts: &AdiShiftPairs) -> Result<DMatrix<C64>> {
    let mut x = x0.clone();
    for (&a, &b) in shifts.alpha.iter().zip(&shifts.beta) {
        x = adi_step_dense(p, &x, a, b)?;
    }
    Ok(x)
}

/// Factored ADI from `X_0 = 0` with `alpha_i = -sigma_i`, `beta_i = -mu_i`.
///
/// Step `i` appends `(mu_i + sigma_i)(A - mu_i I)^{-1} b` to `L` after mapping the
/// existing columns through `(A + sigma_i I)(A - mu_i I)^{-1}`; on the other side
/// it appends `(B^T - conj(sigma_i) I)^{-1} c` after mapping the existing columns
/// through `(B^T - conj(sigma_i) I)^{-1}(B^T + conj(mu_i) I)`. Then `X_r = L M^H`,
/// which is real for conjugate-closed shifts and is recompressed to real factors.
pub fn adi_lowrank(p: &SylvesterProblem, sigma: &ShiftSet, mu: &ShiftSet) -> Result<LowRankApproximation> {
    if sigma.len() != mu.len() {
        return Err(Error::InvalidArgument(format!(
            "sigma and mu must have equal length, got {} and {}",
            sigma.len(),
            mu.len()
        )));
    }
    let (n, m) = (p.n(), p.m());
    let r = sigma.len();
    let bt = Transposed(&p.b);
    let b_vec = crate::linalg::to_complex_vec(&p.b_vec);
    let c_vec = crate::linalg::to_complex_vec(&p.c_vec);
    let mut l: Vec<DVector<C64>> = Vec::with_capacity(r);
    let mut mm: Vec<DVector<C64>> = Vec::with_capacity(r);

    for (&s, &u) in sigma.iter().zip(mu.iter()) {
        // (mu I - A)^{-1} = -(A - mu I)^{-1}
        let fa = p.a.shifted(u)?;
        for col in l.iter_mut() {
            let w = -fa.solve(col);
            *col = p.a.apply_complex(&w) + w * s;
        }
        l.push(fa.solve(&b_vec) * (-(u + s)));

        let fb = bt.shifted(s.conj())?;
        for col in mm.iter_mut() {
            let w = bt.apply_complex(col) + &*col * u.conj();
            *col = -fb.solve(&w);
        }
        mm.push(-fb.solve(&c_vec));
    }

    if l.is_empty() {
        return Ok(LowRankApproximation::zero(n, m));
    }
    // Re(L M^H) = [Re L, Im L] [Re M, Im M]^T
    let k = l.len();
    let mut f = DMatrix::zeros(n, 2 * k);
    let mut g = DMatrix::zeros(m, 2 * k);
    for j in 0..k {
        f.set_column(j, &l[j].map(|z| z.re));
        f.set_column(k + j, &l[j].map(|z| z.im));
        g.set_column(j, &mm[j].map(|z| z.re));
        g.set_column(k + j, &mm[j].map(|z| z.im));
    }
    if sigma.is_real() && mu.is_real() {
        f = f.columns(0, k).into_owned();
        g = g.columns(0, k).into_owned();
    }
    Ok(LowRankApproximation::compress(&f, &g, r))
}

/// ADI for `A X + X A^T + b b^T = 0` with `mu = sigma`, returned in the symmetric
/// form `X_r = Q S Q^T` (`L = Q`, `M = Q S`).
pub fn adi_lyapunov(p: &LyapunovProblem, sigma: &ShiftSet) -> Result<LowRankApproximation> {
    let x = adi_lowrank(&p.to_sylvester(), sigma, sigma)?;
    Ok(symmetrize(&x))
}

/// Rewrites a (numerically) symmetric `L M^T` as `Q S Q^T` with `S = S^T`.
pub fn symmetrize(x: &LowRankApproximation) -> LowRankApproximation {
    if x.l.ncols() == 0 {
        return x.clone();
    }
    let q = x.l.clone().qr().q();
    let core = (q.tr_mul(&x.l)) * (x.m.tr_mul(&q));
    let s = (&core + core.transpose()) * 0.5;
    LowRankApproximation { m: &q * s, l: q }
}

/// `Z` with `X_r = Z Z^T` when the symmetric core is positive semidefinite up to
/// `tol * ||S||`; `None` otherwise.
pub fn psd_factor(x: &LowRankApproximation, tol: f64) -> Option<DMatrix<f64>> {
    let sym = symmetrize(x);
    let s = sym.l.tr_mul(&sym.m);
    let eig = nalgebra::SymmetricEigen::new(s);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if eig.eigenvalues.iter().any(|&v| v < -tol * top) {
        return None;
    }
    let scale = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Some(&sym.l * eig.eigenvectors * DMatrix::from_diagonal(&scale))
}

/// `||L M^T||_2` without forming the product.
pub fn lowrank_norm(x: &LowRankApproximation) -> f64 {
    crate::linalg::lowrank_norm2(&x.l, &x.m)
}

/// Rank of `L M^T` read from the triangular factors (relative tolerance `tol`).
pub fn numerical_rank(x: &LowRankApproximation, tol: f64) -> usize {
    if x.l.ncols() == 0 {
        return 0;
    }
    let core = thin_r(&x.l) * thin_r(&x.m).transpose();
    let sv = core.singular_values();
    let top = sv.iter().fold(0.0f64, |a, &v| a.max(v));
    sv.iter().filter(|&&v| v > tol * top).count()
}
