//! Operator abstraction used by the Krylov and ADI routines.
//!
//! Every algorithm only needs products with `A` and solves with `shift I - A`.
//! Dense matrices implement this with an LU per shift; large sparse problems can
//! plug in their own factorization by implementing [`LinearOperator`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{to_complex, to_complex_vec, Lu, C64};

/// A factorization of `shift I - A`.
pub trait ShiftedSolver {
    fn shift(&self) -> C64;

    /// Solves `(shift I - A) x = rhs`.
    fn solve(&self, rhs: &DVector<C64>) -> DVector<C64>;

    /// Solves `(shift I - A)^H x = rhs`, i.e. `(conj(shift) I - A^T) x = rhs`.
    fn solve_adjoint(&self, rhs: &DVector<C64>) -> DVector<C64>;

    fn solve_real(&self, rhs: &DVector<f64>) -> DVector<C64> {
        self.solve(&to_complex_vec(rhs))
    }
}

pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;

    fn apply_transpose(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Factors `shift I - A`; a singular system is a [`Error::ShiftCollision`].
    fn shifted(&self, shift: C64) -> Result<Box<dyn ShiftedSolver + '_>>;

    fn apply_complex(&self, x: &DVector<C64>) -> DVector<C64> {
        let re = self.apply(&x.map(|v| v.re));
        let im = self.apply(&x.map(|v| v.im));
        re.zip_map(&im, C64::new)
    }

    fn apply_transpose_complex(&self, x: &DVector<C64>) -> DVector<C64> {
        let re = self.apply_transpose(&x.map(|v| v.re));
        let im = self.apply_transpose(&x.map(|v| v.im));
        re.zip_map(&im, C64::new)
    }

    /// `A Q` for a real block of columns.
    fn apply_block(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), q.ncols());
        for j in 0..q.ncols() {
            out.set_column(j, &self.apply(&q.column(j).into_owned()));
        }
        out
    }
}

enum DenseFactor {
    // real shifts keep the factorization real
    Real(Lu<f64>),
    Complex(Lu<C64>),
}

struct DenseShifted {
    shift: C64,
    factor: DenseFactor,
}

impl ShiftedSolver for DenseShifted {
    fn shift(&self) -> C64 {
        self.shift
    }

    fn solve(&self, rhs: &DVector<C64>) -> DVector<C64> {
        match &self.factor {
            DenseFactor::Complex(lu) => lu.solve(rhs),
            DenseFactor::Real(lu) => {
                let re = lu.solve(&rhs.map(|v| v.re));
                let im = lu.solve(&rhs.map(|v| v.im));
                re.zip_map(&im, C64::new)
            }
        }
    }

    fn solve_adjoint(&self, rhs: &DVector<C64>) -> DVector<C64> {
        match &self.factor {
            DenseFactor::Complex(lu) => lu.solve_adjoint(rhs),
            DenseFactor::Real(lu) => {
                let re = lu.solve_transpose(&rhs.map(|v| v.re));
                let im = lu.solve_transpose(&rhs.map(|v| v.im));
                re.zip_map(&im, C64::new)
            }
        }
    }

    fn solve_real(&self, rhs: &DVector<f64>) -> DVector<C64> {
        match &self.factor {
            DenseFactor::Real(lu) => lu.solve(rhs).map(|v| C64::new(v, 0.0)),
            DenseFactor::Complex(lu) => lu.solve(&to_complex_vec(rhs)),
        }
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }

    fn apply_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        self.tr_mul(x)
    }

    fn apply_block(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        self * q
    }

    fn shifted(&self, shift: C64) -> Result<Box<dyn ShiftedSolver + '_>> {
        let n = self.nrows();
        let factor = if shift.im == 0.0 {
            let mut m = -self.clone();
            for i in 0..n {
                m[(i, i)] += shift.re;
            }
            DenseFactor::Real(Lu::new(&m).ok_or(Error::ShiftCollision { shift })?)
        } else {
            let mut m = -to_complex(self);
            for i in 0..n {
                m[(i, i)] += shift;
            }
            DenseFactor::Complex(Lu::new(&m).ok_or(Error::ShiftCollision { shift })?)
        };
        Ok(Box::new(DenseShifted { shift, factor }))
    }
}

/// View of `A^T` through an operator for `A`.
pub struct Transposed<'a, O: ?Sized>(pub &'a O);

struct TransposedShifted<'a> {
    shift: C64,
    inner: Box<dyn ShiftedSolver + 'a>,
}

impl ShiftedSolver for TransposedShifted<'_> {
    fn shift(&self) -> C64 {
        self.shift
    }

    // (s I - A^T) = (conj(s) I - A)^H
    fn solve(&self, rhs: &DVector<C64>) -> DVector<C64> {
        self.inner.solve_adjoint(rhs)
    }

    fn solve_adjoint(&self, rhs: &DVector<C64>) -> DVector<C64> {
        self.inner.solve(rhs)
    }
}

impl<O: LinearOperator + ?Sized> LinearOperator for Transposed<'_, O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.0.apply_transpose(x)
    }

    fn apply_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        self.0.apply(x)
    }

    fn shifted(&self, shift: C64) -> Result<Box<dyn ShiftedSolver + '_>> {
        let inner = self.0.shifted(shift.conj()).map_err(|e| match e {
            Error::ShiftCollision { .. } => Error::ShiftCollision { shift },
            other => other,
        })?;
        Ok(Box::new(TransposedShifted { shift, inner }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nonsymmetric() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, -1.0, -2.0, 1.0, 0.0, -1.0, -3.0])
    }

    #[test]
    fn shifted_solve_inverts_resolvent() {
        let a = nonsymmetric();
        let b = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        for shift in [C64::new(1.5, 0.0), C64::new(0.5, 2.0)] {
            let s = a.shifted(shift).unwrap();
            let x = s.solve_real(&b);
            let mut m = -to_complex(&a);
            for i in 0..3 {
                m[(i, i)] += shift;
            }
            assert!((&m * &x - to_complex_vec(&b)).norm() < 1e-13);
            let y = s.solve_adjoint(&to_complex_vec(&b));
            assert!((m.adjoint() * y - to_complex_vec(&b)).norm() < 1e-13);
        }
    }

    #[test]
    fn transposed_view_solves_with_transpose() {
        let a = nonsymmetric();
        let at = a.transpose();
        let view = Transposed(&a);
        let b = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let shift = C64::new(0.7, -1.3);
        let x1 = view.shifted(shift).unwrap().solve_real(&b);
        let x2 = at.shifted(shift).unwrap().solve_real(&b);
        assert!((x1 - x2).norm() < 1e-13);
        assert!((view.apply(&b) - &at * &b).norm() < 1e-15);
    }

    #[test]
    fn collision_is_reported_with_shift() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let err = a.shifted(C64::new(1.0, 0.0)).err();
        match err {
            Some(Error::ShiftCollision { shift }) => assert_eq!(shift, C64::new(1.0, 0.0)),
            _ => panic!("expected collision"),
        }
    }
}
