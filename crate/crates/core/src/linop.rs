//! Dense linear-operator primitives on R^n with the Euclidean inner product.
//!
//! Positivity is always judged on the symmetric part `(G + G^T)/2`, which
//! carries the whole quadratic form `<Gy, y>`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

const EIGEN_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 10_000;

/// Spectral data of the symmetric part of a square matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub is_positive: bool,
    /// Smallest eigenvalue of the symmetric part.
    pub lambda_min: f64,
    /// `1 / lambda_min` when the symmetric part is positive definite.
    pub inv_norm: Option<f64>,
}

fn ensure_square(g: &Matrix, what: &'static str) -> Result<()> {
    if g.nrows() != g.ncols() {
        return Err(Error::Dimension {
            what,
            expected: g.nrows(),
            got: g.ncols(),
        });
    }
    Ok(())
}

/// `(G + G^T) / 2`, exactly symmetric.
pub fn symmetric_part(g: &Matrix) -> Matrix {
    let n = g.nrows();
    debug_assert_eq!(n, g.ncols());
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = g[(i, i)];
        for j in (i + 1)..n {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Spectral norm `||G||_2`.
pub fn op_norm(g: &Matrix) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    if g.ncols() == 1 || g.nrows() == 1 {
        return g.norm();
    }
    g.singular_values().max()
}

/// Smallest eigenvalue of the symmetric part of `g`.
pub fn lambda_min_sym(g: &Matrix) -> Result<f64> {
    ensure_square(g, "symmetric eigenproblem")?;
    let s = symmetric_part(g);
    if s.nrows() == 1 {
        return Ok(s[(0, 0)]);
    }
    let eig = s
        .try_symmetric_eigen(EIGEN_EPS, MAX_SWEEPS)
        .ok_or_else(|| Error::EigenNonConvergence(format!("{}x{} matrix {:?}", g.nrows(), g.ncols(), g.as_slice())))?;
    Ok(eig.eigenvalues.min())
}

/// Default positivity threshold `1e-12 * ||G||`.
pub fn default_positivity_tol(g: &Matrix) -> f64 {
    (1e-12 * op_norm(g)).max(f64::MIN_POSITIVE)
}

pub fn positivity_report(g: &Matrix, tol: f64) -> Result<PositivityReport> {
    if !(tol > 0.0) {
        return Err(Error::Domain {
            what: "positivity tolerance",
            value: tol,
            domain: "(0, inf)".into(),
        });
    }
    let lambda_min = lambda_min_sym(g)?;
    let is_positive = lambda_min > tol;
    Ok(PositivityReport {
        is_positive,
        lambda_min,
        inv_norm: is_positive.then(|| 1.0 / lambda_min),
    })
}

/// Inverts `b` when `||B - I|| < 1`, returning the inverse together with the
/// Banach bound `1 / (1 - ||B - I||)` on its norm.
pub fn banach_invert(b: &Matrix) -> Result<(Matrix, f64)> {
    ensure_square(b, "banach_invert")?;
    let n = b.nrows();
    let distance = op_norm(&(b - Matrix::identity(n, n)));
    if distance >= 1.0 {
        return Err(Error::BanachHypothesis { distance });
    }
    let inv = b
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("banach_invert".into()))?;
    Ok((inv, 1.0 / (1.0 - distance)))
}

/// Solves `m x = rhs` by partial-pivot LU.
pub fn solve(m: &Matrix, rhs: &Vector) -> Option<Vector> {
    let x = m.clone().lu().solve(rhs)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Like [`solve`], but rejects systems whose LU pivots are tiny relative to
/// the matrix scale.
pub fn solve_checked(m: &Matrix, rhs: &Vector) -> Option<Vector> {
    let lu = m.clone().lu();
    let u = lu.u();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if u.diagonal().iter().any(|d| d.abs() <= 1e-13 * scale) {
        return None;
    }
    let x = lu.solve(rhs)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}
