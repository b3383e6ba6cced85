//! Problem data: Sylvester `A X + X B + b c^T = 0`, its Lyapunov special case,
//! and the single-input single-output system that supplies `(A, b, c)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{real_eigenvalues, C64};

/// Above this dimension the dense eigenvalue checks are skipped and reported as unchecked.
pub const DENSE_CHECK_LIMIT: usize = 2000;

#[derive(Debug, Clone)]
pub struct SylvesterProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub b_vec: DVector<f64>,
    pub c_vec: DVector<f64>,
}

impl SylvesterProblem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        b_vec: DVector<f64>,
        c_vec: DVector<f64>,
    ) -> Result<Self> {
        check_square("A", &a)?;
        check_square("B", &b)?;
        if b_vec.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                context: "length of b against A",
                expected: a.nrows(),
                found: b_vec.len(),
            });
        }
        if c_vec.len() != b.nrows() {
            return Err(Error::DimensionMismatch {
                context: "length of c against B",
                expected: b.nrows(),
                found: c_vec.len(),
            });
        }
        Ok(SylvesterProblem { a, b, b_vec, c_vec })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    /// Right-hand side `Y = b c^T`.
    pub fn rhs(&self) -> DMatrix<f64> {
        &self.b_vec * self.c_vec.transpose()
    }
}

/// `A X + X A^T + b b^T = 0`.
#[derive(Debug, Clone)]
pub struct LyapunovProblem {
    pub a: DMatrix<f64>,
    pub b_vec: DVector<f64>,
}

impl LyapunovProblem {
    pub fn new(a: DMatrix<f64>, b_vec: DVector<f64>) -> Result<Self> {
        check_square("A", &a)?;
        if b_vec.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                context: "length of b against A",
                expected: a.nrows(),
                found: b_vec.len(),
            });
        }
        Ok(LyapunovProblem { a, b_vec })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn to_sylvester(&self) -> SylvesterProblem {
        SylvesterProblem {
            a: self.a.clone(),
            b: self.a.transpose(),
            b_vec: self.b_vec.clone(),
            c_vec: self.b_vec.clone(),
        }
    }
}

/// `x' = A x + b u`, `y = c^T x`.
#[derive(Debug, Clone)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        check_square("A", &a)?;
        for (name, v) in [("b", &b), ("c", &c)] {
            if v.len() != a.nrows() {
                return Err(Error::DimensionMismatch {
                    context: if name == "b" { "length of b" } else { "length of c" },
                    expected: a.nrows(),
                    found: v.len(),
                });
            }
        }
        Ok(LtiSystem { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Controllability Gramian equation `A P + P A^T + b b^T = 0`.
    pub fn controllability(&self) -> LyapunovProblem {
        LyapunovProblem { a: self.a.clone(), b_vec: self.b.clone() }
    }

    /// Cross-Gramian equation `A X + X A + b c^T = 0`.
    pub fn cross_gramian(&self) -> SylvesterProblem {
        SylvesterProblem {
            a: self.a.clone(),
            b: self.a.clone(),
            b_vec: self.b.clone(),
            c_vec: self.c.clone(),
        }
    }
}

fn check_square(name: &'static str, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("{name} must be at least 1x1")));
    }
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: if name == "A" { "columns of A" } else { "columns of B" },
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// `A = diag(-1, ..., -n)`.
    Diagonal,
    /// Nonsymmetric tridiagonal with diagonal -2, superdiagonal 1 and subdiagonal -1.
    /// Its eigenvalues `-2 + 2i cos(k pi / (n + 1))` come in conjugate pairs.
    Tridiagonal,
    /// `A = -(W W^T / n + I)` with `W` standard normal.
    RandomStable,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(SynthKind::Diagonal),
            "tridiagonal" => Ok(SynthKind::Tridiagonal),
            "random-stable" => Ok(SynthKind::RandomStable),
            other => Err(Error::InvalidArgument(format!("unknown synthetic kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for SynthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SynthKind::Diagonal => "diagonal",
            SynthKind::Tridiagonal => "tridiagonal",
            SynthKind::RandomStable => "random-stable",
        })
    }
}

/// Deterministic stable test system with `b = c = ones`.
pub fn synth_stable_system(n: usize, kind: SynthKind, seed: u64) -> Result<LtiSystem> {
    if n == 0 {
        return Err(Error::InvalidArgument("system dimension must be positive".into()));
    }
    let a = match kind {
        SynthKind::Diagonal => DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| -(i as f64 + 1.0))),
        SynthKind::Tridiagonal => DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -2.0
            } else if j == i + 1 {
                1.0
            } else if i == j + 1 {
                -1.0
            } else {
                0.0
            }
        }),
        SynthKind::RandomStable => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
            let mut a = -(&w * w.transpose()) / n as f64;
            for i in 0..n {
                a[(i, i)] -= 1.0;
            }
            // exact symmetry, independent of the product's rounding
            (&a + a.transpose()) * 0.5
        }
    };
    let ones = DVector::from_element(n, 1.0);
    Ok(LtiSystem { a, b: ones.clone(), c: ones })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Check<T> {
    Checked(T),
    /// Operator too large for a dense eigendecomposition.
    Unchecked,
}

impl<T: Copy> Check<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Check::Checked(v) => Some(*v),
            Check::Unchecked => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// `min_{i,j} |lambda_i(A) + lambda_j(B)|`.
    pub min_separation: Check<f64>,
    pub a_stable: Check<bool>,
    pub b_stable: Check<bool>,
}

impl ValidationReport {
    /// Nonzero separation; unchecked problems count as solvable.
    pub fn solvable(&self) -> bool {
        match self.min_separation {
            Check::Checked(s) => s > 0.0,
            Check::Unchecked => true,
        }
    }

    pub fn stable(&self) -> bool {
        self.a_stable.value().unwrap_or(true) && self.b_stable.value().unwrap_or(true)
    }
}

fn spectrum(m: &DMatrix<f64>) -> Result<Option<Vec<C64>>> {
    if m.nrows() > DENSE_CHECK_LIMIT {
        return Ok(None);
    }
    real_eigenvalues(m).map(Some)
}

pub fn validate_problem(p: &SylvesterProblem) -> Result<ValidationReport> {
    let la = spectrum(&p.a)?;
    let lb = spectrum(&p.b)?;
    let stable = |l: &Option<Vec<C64>>| match l {
        Some(v) => Check::Checked(v.iter().all(|z| z.re < 0.0)),
        None => Check::Unchecked,
    };
    let min_separation = match (&la, &lb) {
        (Some(la), Some(lb)) => {
            let mut best = f64::INFINITY;
            for x in la {
                for y in lb {
                    best = best.min((x + y).norm());
                }
            }
            Check::Checked(best)
        }
        _ => Check::Unchecked,
    };
    Ok(ValidationReport { min_separation, a_stable: stable(&la), b_stable: stable(&lb) })
}
