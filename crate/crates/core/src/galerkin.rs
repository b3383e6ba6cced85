//! Rational Krylov projection (RKPM): project onto `Q` and `U`, solve the small
//! Sylvester equation by Bartels-Stewart, lift back as `Q X~ U^T`.

use nalgebra::{DMatrix, DVector, Schur};

use crate::adi::LowRankApproximation;
use crate::error::{Error, Result};
use crate::krylov::{rational_krylov_basis, OrthonormalBasis, ShiftSet};
use crate::linalg::{to_complex, C64};
use crate::operator::{LinearOperator, Transposed};
use crate::problem::{LtiSystem, SylvesterProblem};
use crate::shifts::projected_operator;

/// Separation below which the small solve is flagged as near-singular.
pub const NEAR_SINGULAR_TOL: f64 = 1e-12;

/// `A_r X + X B_r + b_r c_r^T = 0` with `A_r = Q^T A Q`, `B_r = U^T B U`.
#[derive(Debug, Clone)]
pub struct ProjectedEquation {
    pub a_r: DMatrix<f64>,
    pub b_r: DMatrix<f64>,
    pub b_vec: DVector<f64>,
    pub c_vec: DVector<f64>,
}

pub fn project(p: &SylvesterProblem, q: &OrthonormalBasis, u: &OrthonormalBasis) -> Result<ProjectedEquation> {
    if q.nrows() != p.n() {
        return Err(Error::DimensionMismatch { context: "rows of Q", expected: p.n(), found: q.nrows() });
    }
    if u.nrows() != p.m() {
        return Err(Error::DimensionMismatch { context: "rows of U", expected: p.m(), found: u.nrows() });
    }
    Ok(ProjectedEquation {
        a_r: projected_operator(&p.a, &q.q),
        b_r: projected_operator(&p.b, &u.q),
        b_vec: q.q.tr_mul(&p.b_vec),
        c_vec: u.q.tr_mul(&p.c_vec),
    })
}

#[derive(Debug, Clone)]
pub struct SmallSolution {
    pub x: DMatrix<f64>,
    /// `min |lambda_i(A_r) + lambda_j(B_r)|` read off the Schur diagonals.
    pub min_separation: f64,
    pub near_singular: bool,
}

/// Bartels-Stewart on complex Schur forms, plus one step of iterative refinement
/// that reuses the factorizations.
pub fn solve_small_sylvester(e: &ProjectedEquation) -> Result<SmallSolution> {
    let (ra, rb) = (e.a_r.nrows(), e.b_r.nrows());
    if ra == 0 || rb == 0 {
        return Ok(SmallSolution { x: DMatrix::zeros(ra, rb), min_separation: f64::INFINITY, near_singular: false });
    }
    let (qa, ta) = complex_schur(&e.a_r)?;
    let (qb, tb) = complex_schur(&e.b_r)?;
    let solve = |rhs: &DMatrix<f64>| -> Result<(DMatrix<f64>, f64)> {
        // Ta Z + Z Tb = Qa^H rhs Qb with X = Qa Z Qb^H
        let f = qa.adjoint() * to_complex(rhs) * &qb;
        let (z, sep) = triangular_sylvester(&ta, &tb, &f)?;
        Ok(((&qa * z * qb.adjoint()).map(|v| v.re), sep))
    };
    let y = &e.b_vec * e.c_vec.transpose();
    let (mut x, min_sep) = solve(&(-&y))?;
    let residual = &e.a_r * &x + &x * &e.b_r + &y;
    x -= solve(&residual)?.0;

    let scale = ta.norm().max(tb.norm()).max(f64::MIN_POSITIVE);
    let near_singular = min_sep < NEAR_SINGULAR_TOL * scale;
    if near_singular {
        log::warn!("projected Sylvester equation is near-singular: separation {min_sep:e}");
    }
    Ok(SmallSolution { x, min_separation: min_sep, near_singular })
}

/// Column-by-column solve of `Ta Z + Z Tb = F` for upper-triangular `Ta`, `Tb`.
fn triangular_sylvester(ta: &DMatrix<C64>, tb: &DMatrix<C64>, f: &DMatrix<C64>) -> Result<(DMatrix<C64>, f64)> {
    let (ra, rb) = (ta.nrows(), tb.nrows());
    let mut z = DMatrix::<C64>::zeros(ra, rb);
    let mut min_sep = f64::INFINITY;
    for j in 0..rb {
        let mut rhs = f.column(j).into_owned();
        for k in 0..j {
            let t = tb[(k, j)];
            if t != C64::new(0.0, 0.0) {
                rhs -= z.column(k) * t;
            }
        }
        let shift = tb[(j, j)];
        for i in (0..ra).rev() {
            let mut acc = rhs[i];
            for k in i + 1..ra {
                acc -= ta[(i, k)] * z[(k, j)];
            }
            let d = ta[(i, i)] + shift;
            let sep = d.norm();
            min_sep = min_sep.min(sep);
            if sep == 0.0 {
                return Err(Error::SpectralCollision { i, j, separation: sep });
            }
            z[(i, j)] = acc / d;
        }
    }
    Ok((z, min_sep))
}

/// `M = Q T Q^H` with `T` upper triangular.
fn complex_schur(m: &DMatrix<f64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = m.nrows();
    let schur = Schur::try_new(to_complex(m), f64::EPSILON, 200 * n.max(10))
        .ok_or_else(|| Error::NoConvergence(format!("complex Schur form of a {n}x{n} matrix")))?;
    let (q, mut t) = schur.unpack();
    // whatever sits below the diagonal is rounding
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

#[derive(Debug, Clone)]
pub struct RkpmSolution {
    pub x: LowRankApproximation,
    pub q: OrthonormalBasis,
    pub u: OrthonormalBasis,
    pub projected: ProjectedEquation,
    pub small: SmallSolution,
}

/// Lifts `Q X~ U^T` as `L = Q F`, `M = U G` with `X~ = F G^T` from an untruncated SVD.
fn lift(q: &DMatrix<f64>, u: &DMatrix<f64>, x_small: &DMatrix<f64>) -> LowRankApproximation {
    if x_small.is_empty() {
        return LowRankApproximation::zero(q.nrows(), u.nrows());
    }
    let svd = x_small.clone().svd(true, true);
    let root = svd.singular_values.map(f64::sqrt);
    let d = DMatrix::from_diagonal(&root);
    let f = svd.u.expect("u") * &d;
    let g = svd.v_t.expect("v_t").transpose() * d;
    LowRankApproximation { l: q * f, m: u * g }
}

/// RKPM with caller-supplied bases.
pub fn rkpm_with_bases(p: &SylvesterProblem, q: OrthonormalBasis, u: OrthonormalBasis) -> Result<RkpmSolution> {
    let projected = project(p, &q, &u)?;
    let small = solve_small_sylvester(&projected)?;
    let x = lift(&q.q, &u.q, &small.x);
    Ok(RkpmSolution { x, q, u, projected, small })
}

/// RKPM with `Q` from `K(A, b, sigma)` and `U` from `K(B^T, c, conj(sigma))`.
pub fn rkpm_solve_full(p: &SylvesterProblem, sigma: &ShiftSet) -> Result<RkpmSolution> {
    rkpm_solve_two_sets(p, sigma, sigma)
}

pub fn rkpm_solve(p: &SylvesterProblem, sigma: &ShiftSet) -> Result<LowRankApproximation> {
    Ok(rkpm_solve_full(p, sigma)?.x)
}

/// Two-set variant: `Q` from `K(A, b, mu)`, `U` from `K(B^T, c, conj(sigma))`, the
/// spaces holding the factors of ADI run with `(sigma, mu)`. The ADI/RKPM
/// equivalence is only claimed for `mu = sigma`.
pub fn rkpm_solve_two_sets(p: &SylvesterProblem, sigma: &ShiftSet, mu: &ShiftSet) -> Result<RkpmSolution> {
    let q = rational_krylov_basis(&p.a, &p.b_vec, mu)?;
    let u = rational_krylov_basis(&Transposed(&p.b), &p.c_vec, &sigma.conj())?;
    rkpm_with_bases(p, q, u)
}

/// `H(s) = c^T (s I - A)^{-1} b`.
pub fn transfer_eval(sys: &LtiSystem, s: C64) -> Result<C64> {
    let solver = sys.a.shifted(s).map_err(|e| match e {
        Error::ShiftCollision { .. } => Error::Pole { s },
        other => other,
    })?;
    let x = solver.solve_real(&sys.b);
    Ok(sys.c.iter().zip(x.iter()).map(|(&c, &v)| v * c).sum())
}

/// Defects of the one-sided Galerkin reduction `(Q^T A Q, Q^T b, Q^T c)`.
#[derive(Debug, Clone, Copy)]
pub struct InterpolationDefect {
    /// `max_i ||Q (s_i I - A_r)^{-1} b_r - (s_i I - A)^{-1} b|| / ||(s_i I - A)^{-1} b||`.
    pub state: f64,
    /// `max_i |H(s_i) - H_r(s_i)| / |H(s_i)|`.
    pub transfer: f64,
}

pub fn galerkin_interpolation_check(sys: &LtiSystem, q: &OrthonormalBasis) -> Result<InterpolationDefect> {
    if q.nrows() != sys.n() {
        return Err(Error::DimensionMismatch { context: "rows of Q", expected: sys.n(), found: q.nrows() });
    }
    let reduced = LtiSystem {
        a: projected_operator(&sys.a, &q.q),
        b: q.q.tr_mul(&sys.b),
        c: q.q.tr_mul(&sys.c),
    };
    let qc = to_complex(&q.q);
    let (mut state, mut transfer) = (0.0f64, 0.0f64);
    for &s in q.shifts.iter() {
        let full = sys.a.shifted(s)?.solve_real(&sys.b);
        let small = reduced.a.shifted(s)?.solve_real(&reduced.b);
        let lifted = &qc * &small;
        state = state.max((lifted - &full).norm() / full.norm().max(f64::MIN_POSITIVE));
        let h = transfer_eval(sys, s)?;
        let hr = transfer_eval(&reduced, s)?;
        transfer = transfer.max((h - hr).norm() / h.norm().max(f64::MIN_POSITIVE));
    }
    Ok(InterpolationDefect { state, transfer })
}
