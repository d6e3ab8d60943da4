//! Affine generalized equations `0 in q + M z + T(z)`.
//!
//! This is the subproblem solved at every Newton step. When the symmetric
//! part of `M` is positive definite and `T` is maximal monotone it has exactly
//! one solution; three independent methods compute it.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{self, Matrix, Vector};
use crate::monotone::SetValuedOperator;

pub const DEFAULT_SSN_MAX_ITER: usize = 100;
pub const DEFAULT_FB_MAX_ITER: usize = 200_000;
/// Largest dimension accepted by the enumeration oracle (3^12 patterns).
pub const ENUMERATION_MAX_DIM: usize = 12;
const ENUMERATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineGe {
    pub m: Matrix,
    pub q: Vector,
    pub op: SetValuedOperator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    ActiveSetNewton,
    ForwardBackward,
    Enumeration,
}

impl fmt::Display for InnerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ActiveSetNewton => "active_set_newton",
            Self::ForwardBackward => "forward_backward",
            Self::Enumeration => "enumeration",
        })
    }
}

/// Method preference for [`solve_affine_ge`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Active-set Newton for box-like operators, forward-backward otherwise.
    #[default]
    Auto,
    ActiveSetNewton,
    ForwardBackward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub z: Vector,
    /// Natural residual at `z` with `lambda = 1`.
    pub residual: f64,
    pub method: InnerMethod,
    pub iterations: usize,
}

/// Step size and contraction factor of the forward-backward iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbParams {
    /// Smallest eigenvalue of the symmetric part of `M`.
    pub c: f64,
    pub norm: f64,
    pub lambda: f64,
    /// `sqrt(1 - c^2 / ||M||^2)`.
    pub rho: f64,
}

impl AffineGe {
    pub fn new(m: Matrix, q: Vector, op: SetValuedOperator) -> Result<Self> {
        let n = q.len();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension {
                what: "affine matrix M",
                expected: n,
                got: if m.nrows() != n { m.nrows() } else { m.ncols() },
            });
        }
        if let Some(d) = op.dimension() {
            if d != n {
                return Err(Error::Dimension {
                    what: "operator of affine problem",
                    expected: n,
                    got: d,
                });
            }
        }
        if m.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine problem data"));
        }
        Ok(Self { m, q, op })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// `q + M z`.
    pub fn affine_value(&self, z: &Vector) -> Vector {
        &self.q + &self.m * z
    }

    pub fn residual(&self, z: &Vector) -> f64 {
        self.op
            .natural_residual(z, &self.affine_value(z), 1.0)
            .map(|r| r.natural_residual)
            .unwrap_or(f64::INFINITY)
    }

    fn solution(&self, z: Vector, method: InnerMethod, iterations: usize) -> InnerSolution {
        InnerSolution {
            residual: self.residual(&z),
            z,
            method,
            iterations,
        }
    }

    fn start_point(&self, z0: Option<&Vector>) -> Vector {
        let z = z0.cloned().unwrap_or_else(|| Vector::zeros(self.dim()));
        match self.op.bounds(self.dim()) {
            Some((l, u)) => Vector::from_fn(z.len(), |i, _| z[i].max(l[i]).min(u[i])),
            None => z,
        }
    }
}

/// Solves the affine problem to natural residual `tol`.
pub fn solve_affine_ge(p: &AffineGe, tol: f64, method: MethodChoice) -> Result<InnerSolution> {
    solve_affine_ge_from(p, tol, method, None)
}

/// Like [`solve_affine_ge`], warm-started at `z0`.
pub fn solve_affine_ge_from(
    p: &AffineGe,
    tol: f64,
    method: MethodChoice,
    z0: Option<&Vector>,
) -> Result<InnerSolution> {
    if !(tol > 0.0) {
        return Err(Error::Domain {
            what: "inner tolerance",
            value: tol,
            domain: "(0, inf)".into(),
        });
    }
    let report = linop::positivity_report(&p.m, linop::default_positivity_tol(&p.m))?;
    if !report.is_positive {
        return Err(Error::NotPositive {
            context: "the affine subproblem matrix".into(),
            lambda_min: report.lambda_min,
        });
    }
    let method = match method {
        MethodChoice::Auto if p.op.is_box_like() => MethodChoice::ActiveSetNewton,
        MethodChoice::Auto => MethodChoice::ForwardBackward,
        m => m,
    };
    match method {
        MethodChoice::ActiveSetNewton => semismooth_newton(p, tol, DEFAULT_SSN_MAX_ITER, z0),
        _ => forward_backward(p, tol, DEFAULT_FB_MAX_ITER, z0),
    }
}

pub fn fb_params(p: &AffineGe) -> Result<FbParams> {
    let c = linop::lambda_min_sym(&p.m)?;
    let norm = linop::op_norm(&p.m);
    if !(c > 0.0) {
        return Err(Error::NotPositive {
            context: "the forward-backward matrix".into(),
            lambda_min: c,
        });
    }
    let ratio = (c / norm).min(1.0);
    Ok(FbParams {
        c,
        norm,
        lambda: c / (norm * norm),
        rho: (1.0 - ratio * ratio).max(0.0).sqrt(),
    })
}

/// One forward-backward step `J_{lambda T}(z - lambda (q + M z))`.
pub fn fb_step(p: &AffineGe, lambda: f64, z: &Vector) -> Result<Vector> {
    p.op.resolvent(lambda, &(z - p.affine_value(z) * lambda))
}

/// Forward-backward splitting with the fixed step `c / ||M||^2`.
pub fn forward_backward(
    p: &AffineGe,
    tol: f64,
    max_iter: usize,
    z0: Option<&Vector>,
) -> Result<InnerSolution> {
    let params = fb_params(p)?;
    let mut z = p.start_point(z0);
    let mut best = (p.residual(&z), z.clone());
    for it in 0..=max_iter {
        let r = p.residual(&z);
        if r < best.0 {
            best = (r, z.clone());
        }
        if r <= tol {
            return Ok(p.solution(z, InnerMethod::ForwardBackward, it));
        }
        if it == max_iter {
            break;
        }
        z = fb_step(p, params.lambda, &z)?;
    }
    Err(Error::NonConvergence {
        method: "forward-backward splitting",
        iterations: max_iter,
        residual: best.0,
        best: best.1,
        rho: Some(params.rho),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Lower,
    Upper,
    Free,
}

/// Solution of the affine problem with every non-free coordinate pinned to
/// its bound.
fn solve_pattern(p: &AffineGe, slots: &[Slot], l: &Vector, u: &Vector) -> Option<Vector> {
    let n = p.dim();
    let mut z = Vector::zeros(n);
    let mut free = Vec::with_capacity(n);
    for (i, s) in slots.iter().enumerate() {
        match s {
            Slot::Lower => z[i] = l[i],
            Slot::Upper => z[i] = u[i],
            Slot::Free => free.push(i),
        }
    }
    if free.is_empty() {
        return Some(z);
    }
    let rhs = -(&p.q + &p.m * &z);
    let m_ff = Matrix::from_fn(free.len(), free.len(), |a, b| p.m[(free[a], free[b])]);
    let rhs_f = Vector::from_fn(free.len(), |a, _| rhs[free[a]]);
    let zf = linop::solve_checked(&m_ff, &rhs_f)?;
    for (a, &i) in free.iter().enumerate() {
        z[i] = zf[a];
    }
    Some(z)
}

/// Active-set (semismooth) Newton on the natural map
/// `z -> z - P(z - (q + M z))` for box-like operators. Falls back to
/// forward-backward on singular reduced systems, cycling or the iteration cap.
pub fn semismooth_newton(
    p: &AffineGe,
    tol: f64,
    max_iter: usize,
    z0: Option<&Vector>,
) -> Result<InnerSolution> {
    let (l, u) = p.op.bounds(p.dim()).ok_or_else(|| {
        Error::Misuse("active-set Newton needs a box or zero operator".into())
    })?;
    let mut z = p.start_point(z0);
    let mut seen = HashSet::new();
    let mut iterations = 0;
    loop {
        let w = p.affine_value(&z);
        let y = &z - &w;
        let r = (0..z.len())
            .map(|i| z[i] - y[i].max(l[i]).min(u[i]))
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt();
        if r <= tol {
            return Ok(p.solution(z, InnerMethod::ActiveSetNewton, iterations));
        }
        if iterations >= max_iter {
            break;
        }
        let slots: Vec<Slot> = (0..z.len())
            .map(|i| {
                // ties go to the free slot
                if y[i] < l[i] {
                    Slot::Lower
                } else if y[i] > u[i] {
                    Slot::Upper
                } else {
                    Slot::Free
                }
            })
            .collect();
        if !seen.insert(slots.clone()) {
            break;
        }
        match solve_pattern(p, &slots, &l, &u) {
            Some(next) => z = next,
            None => break,
        }
        iterations += 1;
    }
    let fb = forward_backward(p, tol, DEFAULT_FB_MAX_ITER, Some(&z)).map_err(|e| match e {
        Error::NonConvergence {
            iterations: it,
            residual,
            best,
            rho,
            ..
        } => Error::NonConvergence {
            method: "active-set Newton with forward-backward fallback",
            iterations: iterations + it,
            residual,
            best,
            rho,
        },
        other => other,
    })?;
    Ok(InnerSolution {
        iterations: iterations + fb.iterations,
        ..fb
    })
}

fn pattern_label(slots: &[Slot]) -> String {
    slots
        .iter()
        .map(|s| match s {
            Slot::Lower => 'L',
            Slot::Upper => 'U',
            Slot::Free => 'F',
        })
        .collect()
}

/// Brute-force solver: tries all `3^n` lower/upper/free patterns and returns
/// the unique consistent one. Box-like operators only, `n <= 12`.
pub fn enumerate_oracle(p: &AffineGe) -> Result<InnerSolution> {
    let n = p.dim();
    if n > ENUMERATION_MAX_DIM {
        return Err(Error::TooLarge {
            what: "active-set enumeration",
            n,
            max: ENUMERATION_MAX_DIM,
        });
    }
    let (l, u) = p.op.bounds(n).ok_or_else(|| {
        Error::Misuse("active-set enumeration needs a box or zero operator".into())
    })?;
    let choices: Vec<Vec<Slot>> = (0..n)
        .map(|i| {
            let mut c = Vec::with_capacity(3);
            if l[i].is_finite() {
                c.push(Slot::Lower);
            }
            if u[i].is_finite() && u[i] != l[i] {
                c.push(Slot::Upper);
            }
            c.push(Slot::Free);
            c
        })
        .collect();

    let total: usize = choices.iter().map(Vec::len).product();
    let mut consistent: Vec<(String, Vector)> = Vec::new();
    let mut slots = vec![Slot::Free; n];
    for code in 0..total {
        // mixed radix, first coordinate most significant
        let mut rest = code;
        for i in (0..n).rev() {
            let radix = choices[i].len();
            slots[i] = choices[i][rest % radix];
            rest /= radix;
        }
        if let Some(z) = solve_pattern(p, &slots, &l, &u) {
            if pattern_consistent(p, &slots, &z, &l, &u) {
                consistent.push((pattern_label(&slots), z));
            }
        }
    }
    if consistent.len() != 1 {
        return Err(Error::Degenerate {
            consistent: consistent.len(),
            patterns: consistent.into_iter().map(|(s, _)| s).take(8).collect(),
        });
    }
    let (_, z) = consistent.pop().expect("exactly one pattern");
    let z = Vector::from_fn(n, |i, _| z[i].max(l[i]).min(u[i]));
    Ok(p.solution(z, InnerMethod::Enumeration, total))
}

fn pattern_consistent(p: &AffineGe, slots: &[Slot], z: &Vector, l: &Vector, u: &Vector) -> bool {
    let w = p.affine_value(z);
    slots.iter().enumerate().all(|(i, s)| {
        let scale = 1.0 + p.q[i].abs() + (0..z.len()).map(|j| (p.m[(i, j)] * z[j]).abs()).sum::<f64>();
        let tol = ENUMERATION_TOL * scale;
        match s {
            Slot::Lower => w[i] >= -tol,
            Slot::Upper => w[i] <= tol,
            Slot::Free => z[i] >= l[i] - tol && z[i] <= u[i] + tol,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::sample_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn m(n: usize, xs: &[f64]) -> Matrix {
        Matrix::from_row_slice(n, n, xs)
    }

    fn ncp1(q: f64) -> AffineGe {
        AffineGe::new(m(1, &[2.0]), v(&[q]), SetValuedOperator::nonnegative_orthant(1)).unwrap()
    }

    const ALL: [MethodChoice; 3] = [
        MethodChoice::Auto,
        MethodChoice::ActiveSetNewton,
        MethodChoice::ForwardBackward,
    ];

    #[test]
    fn scalar_ncp_examples() {
        for method in ALL {
            let s = solve_affine_ge(&ncp1(-1.0), 1e-12, method).unwrap();
            assert_abs_diff_eq!(s.z[0], 0.5, epsilon = 1e-12);
            let s = solve_affine_ge(&ncp1(1.0), 1e-12, method).unwrap();
            assert_abs_diff_eq!(s.z[0], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unconstrained_identity() {
        let q = v(&[0.3, -2.0, 5.0]);
        let p = AffineGe::new(Matrix::identity(3, 3), q.clone(), SetValuedOperator::Zero).unwrap();
        for method in ALL {
            let s = solve_affine_ge(&p, 1e-12, method).unwrap();
            assert_abs_diff_eq!(s.z, -&q, epsilon = 1e-12);
        }
    }

    #[test]
    fn auto_dispatch() {
        let s = solve_affine_ge(&ncp1(-1.0), 1e-12, MethodChoice::Auto).unwrap();
        assert_eq!(s.method, InnerMethod::ActiveSetNewton);
        let p = AffineGe::new(Matrix::identity(1, 1), v(&[-3.0]), SetValuedOperator::l1(1.0).unwrap()).unwrap();
        let s = solve_affine_ge(&p, 1e-12, MethodChoice::Auto).unwrap();
        assert_eq!(s.method, InnerMethod::ForwardBackward);
        assert_abs_diff_eq!(s.z[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn positivity_violation_is_reported() {
        let p = AffineGe::new(m(2, &[1.0, 0.0, 0.0, -1.0]), v(&[0.0, 0.0]), SetValuedOperator::Zero).unwrap();
        assert!(matches!(
            solve_affine_ge(&p, 1e-10, MethodChoice::Auto),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn ssn_rejects_l1() {
        let p = AffineGe::new(Matrix::identity(1, 1), v(&[1.0]), SetValuedOperator::l1(1.0).unwrap()).unwrap();
        assert!(matches!(
            semismooth_newton(&p, 1e-10, 10, None),
            Err(Error::Misuse(_))
        ));
    }

    #[test]
    fn enumeration_examples() {
        let s = enumerate_oracle(&ncp1(-1.0)).unwrap();
        assert_abs_diff_eq!(s.z[0], 0.5, epsilon = 1e-15);
        let s = enumerate_oracle(&ncp1(1.0)).unwrap();
        assert_eq!(s.z[0], 0.0);
        let p = AffineGe::new(
            Matrix::identity(2, 2),
            v(&[-0.5, 2.0]),
            SetValuedOperator::box_constraint(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap(),
        )
        .unwrap();
        let s = enumerate_oracle(&p).unwrap();
        assert_abs_diff_eq!(s.z, v(&[0.5, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn enumeration_guards() {
        let n = 13;
        let p = AffineGe::new(Matrix::identity(n, n), Vector::zeros(n), SetValuedOperator::nonnegative_orthant(n)).unwrap();
        assert!(matches!(enumerate_oracle(&p), Err(Error::TooLarge { .. })));
        let p = AffineGe::new(Matrix::identity(1, 1), v(&[1.0]), SetValuedOperator::l1(1.0).unwrap()).unwrap();
        assert!(matches!(enumerate_oracle(&p), Err(Error::Misuse(_))));
    }

    #[test]
    fn enumeration_reports_degeneracy() {
        // z = 0 with w = 0: both the lower and the free pattern are consistent
        let p = ncp1(0.0);
        match enumerate_oracle(&p) {
            Err(Error::Degenerate { consistent, patterns }) => {
                assert_eq!(consistent, 2);
                assert_eq!(patterns, vec!["L".to_string(), "F".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn forward_backward_examples() {
        let p = AffineGe::new(Matrix::identity(1, 1), v(&[-3.0]), SetValuedOperator::Zero).unwrap();
        let s = forward_backward(&p, 1e-14, 10, Some(&v(&[0.0]))).unwrap();
        assert_eq!(s.z, v(&[3.0]));
        assert_eq!(s.iterations, 1);

        let p = ncp1(1.0);
        let params = fb_params(&p).unwrap();
        assert_eq!(params.rho, 0.0);
        assert_eq!(params.lambda, 0.5);
        let s = forward_backward(&p, 1e-14, 10, Some(&v(&[1.0]))).unwrap();
        assert_eq!(s.z, v(&[0.0]));
        assert_eq!(s.iterations, 1);

        let p = AffineGe::new(m(2, &[2.0, -1.0, 0.0, 2.0]), v(&[-1.0, -1.0]), SetValuedOperator::Zero).unwrap();
        let s = forward_backward(&p, 1e-12, 10_000, None).unwrap();
        assert_abs_diff_eq!(s.z, v(&[0.75, 0.5]), epsilon = 1e-11);
    }

    #[test]
    fn forward_backward_reports_non_convergence() {
        let p = AffineGe::new(m(2, &[1.0, 5.0, -5.0, 1.0]), v(&[1.0, 1.0]), SetValuedOperator::Zero).unwrap();
        match forward_backward(&p, 1e-14, 3, None) {
            Err(Error::NonConvergence { rho: Some(rho), .. }) => assert!(rho > 0.9 && rho < 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ssn_zero_start_is_immediate() {
        let p = AffineGe::new(
            Matrix::identity(3, 3),
            Vector::zeros(3),
            SetValuedOperator::box_constraint(v(&[-1.0, 0.0, -2.0]), v(&[1.0, 3.0, 0.0])).unwrap(),
        )
        .unwrap();
        let s = semismooth_newton(&p, 1e-14, 10, None).unwrap();
        assert_eq!(s.z, Vector::zeros(3));
        assert!(s.iterations <= 1);
    }

    #[test]
    fn ssn_breaks_bound_ties_toward_free() {
        // from 0 the iterates hit z = (0, 1) where z_1 - w_1 equals u_1 exactly
        let p = AffineGe::new(
            m(2, &[2.0, 1.0, 1.0, 2.0]),
            v(&[-2.0, -4.0]),
            SetValuedOperator::box_constraint(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap(),
        )
        .unwrap();
        let s = semismooth_newton(&p, 1e-14, 10, None).unwrap();
        assert_eq!(s.method, InnerMethod::ActiveSetNewton);
        assert!(s.iterations <= 3);
        assert_abs_diff_eq!(s.z, v(&[0.5, 1.0]), epsilon = 1e-15);
    }

    /// Random box-constrained instance with positive definite symmetric part.
    fn random_instance(seed: u64) -> AffineGe {
        let mut rng = sample_rng(seed, 0);
        let n = rng.random_range(1..=6);
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let k = Matrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
        let m = a.transpose() * &a + (&k - k.transpose()) + Matrix::identity(n, n) * 0.5;
        let q = Vector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let l = Vector::from_fn(n, |_, _| if rng.random_bool(0.2) { f64::NEG_INFINITY } else { rng.random_range(-1.0..0.0) });
        let u = Vector::from_fn(n, |_, _| if rng.random_bool(0.2) { f64::INFINITY } else { rng.random_range(0.0..1.0) });
        AffineGe::new(m, q, SetValuedOperator::box_constraint(l, u).unwrap()).unwrap()
    }

    #[test]
    fn solution_satisfies_variational_inequality() {
        for seed in 0..30 {
            let p = random_instance(seed);
            let s = solve_affine_ge(&p, 1e-12, MethodChoice::Auto).unwrap();
            let w = p.affine_value(&s.z);
            let (l, u) = p.op.bounds(p.dim()).unwrap();
            let mut rng = sample_rng(seed, 1);
            for _ in 0..100 {
                let f = Vector::from_fn(p.dim(), |i, _| {
                    let lo = if l[i].is_finite() { l[i] } else { -5.0 };
                    let hi = if u[i].is_finite() { u[i] } else { 5.0 };
                    rng.random_range(lo..=hi)
                });
                assert!(w.dot(&(&f - &s.z)) >= -1e-8);
            }
        }
    }

    #[test]
    fn methods_agree_on_random_instances() {
        for seed in 0..50 {
            let p = random_instance(seed);
            let e = enumerate_oracle(&p).unwrap();
            let n = semismooth_newton(&p, 1e-12, DEFAULT_SSN_MAX_ITER, None).unwrap();
            let f = forward_backward(&p, 1e-12, DEFAULT_FB_MAX_ITER, None).unwrap();
            assert!((&e.z - &n.z).amax() <= 1e-8, "seed {seed}");
            assert!((&e.z - &f.z).amax() <= 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn scale_covariance() {
        for seed in 0..20 {
            let p = random_instance(seed);
            let base = solve_affine_ge(&p, 1e-13, MethodChoice::Auto).unwrap().z;
            for alpha in [0.01, 1.0, 100.0] {
                let scaled = AffineGe::new(&p.m * alpha, &p.q * alpha, p.op.clone()).unwrap();
                let z = enumerate_oracle(&scaled).unwrap().z;
                assert!((&z - &base).amax() <= 1e-9, "seed {seed} alpha {alpha}");
            }
        }
    }

    #[test]
    fn forward_backward_contracts_at_rho() {
        for seed in 0..20 {
            let p = random_instance(seed);
            let params = fb_params(&p).unwrap();
            let star = enumerate_oracle(&p).unwrap().z;
            let mut z = Vector::from_element(p.dim(), 2.0);
            for _ in 0..50 {
                let next = fb_step(&p, params.lambda, &z).unwrap();
                let before = (&z - &star).norm();
                let after = (&next - &star).norm();
                if before > 1e-9 {
                    assert!(after / before <= params.rho + 0.05, "seed {seed}");
                }
                z = next;
            }
        }
    }
}
