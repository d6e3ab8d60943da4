//! The Josephy-Newton iteration
//! `0 in F(x_k) + F'(x_k)(x_{k+1} - x_k) + T(x_{k+1})` with certificate
//! tracking.
//!
//! In certified mode the first step `x_1` fixes `b = ||x_1 - x_0||`, the
//! user's Lipschitz or Smale constant fixes the majorant, and every iteration
//! is compared against the scalar majorant sequence `t_k`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::derivative;
use crate::error::{Error, Result};
use crate::exec;
use crate::inner::{self, AffineGe, InnerMethod, MethodChoice};
use crate::linop::{self, Matrix, Vector};
use crate::majorant::{Certificate, HypothesisReport, MajorantSpec};
use crate::monotone::SetValuedOperator;
use crate::sampling;

type VectorFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type MatrixFn = dyn Fn(&Vector) -> Matrix + Send + Sync;
type HessianFn = dyn Fn(&Vector) -> Vec<Matrix> + Send + Sync;

/// Slack for the majorant-domination and `K(t)` membership checks.
pub const DOMINATION_SLACK: f64 = 1e-8;

/// Generalized equation `0 in F(x) + T(x)` with start point and trust radius.
#[derive(Clone)]
pub struct GeProblem {
    name: String,
    n: usize,
    f: Arc<VectorFn>,
    jac: Arc<MatrixFn>,
    hessians: Option<Arc<HessianFn>>,
    op: SetValuedOperator,
    x0: Vector,
    radius: f64,
}

impl fmt::Debug for GeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeProblem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("op", &self.op)
            .field("x0", &self.x0.as_slice())
            .field("radius", &self.radius)
            .finish_non_exhaustive()
    }
}

impl GeProblem {
    /// Builds a problem and checks that `F'(x0)` has a positive definite
    /// symmetric part.
    pub fn new<F, J>(
        n: usize,
        f: F,
        jac: J,
        op: SetValuedOperator,
        x0: Vector,
        radius: f64,
    ) -> Result<Self>
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        let p = Self {
            name: String::new(),
            n,
            f: Arc::new(f),
            jac: Arc::new(jac),
            hessians: None,
            op,
            x0,
            radius,
        };
        p.validate()?;
        Ok(p)
    }

    /// `F(x) = q + M x`.
    pub fn affine(m: Matrix, q: Vector, op: SetValuedOperator, x0: Vector, radius: f64) -> Result<Self> {
        let n = q.len();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension {
                what: "affine M",
                expected: n,
                got: m.nrows(),
            });
        }
        let (mf, qf) = (m.clone(), q);
        Self::new(n, move |x| &qf + &mf * x, move |_| m.clone(), op, x0, radius)?
            .with_hessians(move |_| vec![Matrix::zeros(n, n); n])
    }

    /// `F_i(x) = c_i + g_i . x + x^T H_i x / 2` with symmetric `H_i`.
    pub fn quadratic(
        c: Vector,
        g: Matrix,
        h: Vec<Matrix>,
        op: SetValuedOperator,
        x0: Vector,
        radius: f64,
    ) -> Result<Self> {
        let n = c.len();
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::Dimension {
                what: "quadratic g",
                expected: n,
                got: g.nrows(),
            });
        }
        if h.len() != n {
            return Err(Error::Dimension {
                what: "quadratic H list",
                expected: n,
                got: h.len(),
            });
        }
        if let Some(bad) = h.iter().find(|hi| hi.nrows() != n || hi.ncols() != n) {
            return Err(Error::Dimension {
                what: "quadratic H_i",
                expected: n,
                got: bad.nrows(),
            });
        }
        let h: Arc<Vec<Matrix>> = Arc::new(h.iter().map(linop::symmetric_part).collect());
        let (hf, hj, hh) = (h.clone(), h.clone(), h);
        let gj = g.clone();
        Self::new(
            n,
            move |x| {
                let mut v = &c + &g * x;
                for (i, hi) in hf.iter().enumerate() {
                    v[i] += 0.5 * x.dot(&(hi * x));
                }
                v
            },
            move |x| {
                let mut j = gj.clone();
                for (i, hi) in hj.iter().enumerate() {
                    let row = hi * x;
                    for k in 0..n {
                        j[(i, k)] += row[k];
                    }
                }
                j
            },
            op,
            x0,
            radius,
        )?
        .with_hessians(move |_| hh.as_ref().clone())
    }

    /// Attaches second derivatives: `H_i(x)` is the Hessian of `F_i`.
    pub fn with_hessians<H>(mut self, h: H) -> Result<Self>
    where
        H: Fn(&Vector) -> Vec<Matrix> + Send + Sync + 'static,
    {
        let hs = h(&self.x0);
        if hs.len() != self.n || hs.iter().any(|m| m.nrows() != self.n || m.ncols() != self.n) {
            return Err(Error::Dimension {
                what: "Hessian list",
                expected: self.n,
                got: hs.len(),
            });
        }
        self.hessians = Some(Arc::new(h));
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same problem started from `x0`, bypassing the positivity check.
    fn restarted(&self, x0: Vector) -> Self {
        Self { x0, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Misuse("problem dimension must be at least 1".into()));
        }
        if self.x0.len() != self.n {
            return Err(Error::Dimension {
                what: "x0",
                expected: self.n,
                got: self.x0.len(),
            });
        }
        if let Some(d) = self.op.dimension() {
            if d != self.n {
                return Err(Error::Dimension {
                    what: "operator T",
                    expected: self.n,
                    got: d,
                });
            }
        }
        if !(self.radius > 0.0) {
            return Err(Error::Domain {
                what: "R",
                value: self.radius,
                domain: "(0, inf]".into(),
            });
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("x0"));
        }
        let fx = self.eval_f(&self.x0);
        if fx.len() != self.n {
            return Err(Error::Dimension {
                what: "F(x0)",
                expected: self.n,
                got: fx.len(),
            });
        }
        if fx.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("F(x0)"));
        }
        let j = self.eval_j(&self.x0);
        if j.nrows() != self.n || j.ncols() != self.n {
            return Err(Error::Dimension {
                what: "J(x0)",
                expected: self.n,
                got: j.nrows(),
            });
        }
        let r = linop::positivity_report(&j, linop::default_positivity_tol(&j))?;
        if !r.is_positive {
            return Err(Error::NotPositive {
                context: "F'(x0)".into(),
                lambda_min: r.lambda_min,
            });
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn x0(&self) -> &Vector {
        &self.x0
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn op(&self) -> &SetValuedOperator {
        &self.op
    }

    pub fn eval_f(&self, x: &Vector) -> Vector {
        (self.f)(x)
    }

    pub fn eval_j(&self, x: &Vector) -> Matrix {
        (self.jac)(x)
    }

    pub fn eval_hessians(&self, x: &Vector) -> Option<Vec<Matrix>> {
        self.hessians.as_ref().map(|h| h(x))
    }

    pub fn has_hessians(&self) -> bool {
        self.hessians.is_some()
    }

    /// `beta = ||(sym F'(x0))^{-1}||`.
    pub fn beta(&self) -> Result<f64> {
        let j = self.eval_j(&self.x0);
        let r = linop::positivity_report(&j, linop::default_positivity_tol(&j))?;
        r.inv_norm.ok_or(Error::NotPositive {
            context: "F'(x0)".into(),
            lambda_min: r.lambda_min,
        })
    }

    pub fn natural_residual(&self, x: &Vector) -> Result<f64> {
        Ok(self.op.natural_residual(x, &self.eval_f(x), 1.0)?.natural_residual)
    }

    /// The partial linearization at `x` as an affine problem in `z = x_next`:
    /// `F(x) + J(x)(z - x) = q + M z` with `M = J(x)`, `q = F(x) - J(x) x`.
    pub fn linearization(&self, x: &Vector) -> Result<AffineGe> {
        let m = self.eval_j(x);
        let q = self.eval_f(x) - &m * x;
        AffineGe::new(m, q, self.op.clone())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CertificateMode {
    /// Solve without a certificate.
    #[default]
    None,
    /// `||F'(x) - F'(y)|| <= L ||x - y||` on `B(x0, R)`.
    Lipschitz {
        #[serde(rename = "L")]
        l: f64,
    },
    /// Smale's gamma at `x0` (already including the factor `beta`).
    Smale { gamma: f64 },
}

impl CertificateMode {
    pub fn is_certified(&self) -> bool {
        !matches!(self, Self::None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterConfig {
    /// Natural-residual tolerance; `None` means `1e-10 (1 + ||F(x0)||)`.
    pub tol_outer: Option<f64>,
    pub max_outer: usize,
    pub inner: MethodChoice,
    /// Falsify the user's constant by sampling before trusting the certificate.
    pub bound_check: bool,
    pub mode: CertificateMode,
    pub seed: u64,
    pub verify_samples: usize,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            tol_outer: None,
            max_outer: 50,
            inner: MethodChoice::Auto,
            bound_check: true,
            mode: CertificateMode::None,
            seed: 0,
            verify_samples: 256,
        }
    }
}

impl OuterConfig {
    pub fn certified(mode: CertificateMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_outer = Some(tol);
        self
    }
}

/// Certificate data induced by the first Newton step.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub beta: f64,
    pub b: f64,
    pub mode: CertificateMode,
    /// `K = beta * L` in Lipschitz mode.
    pub k: Option<f64>,
    pub gamma: Option<f64>,
    pub spec: MajorantSpec,
    pub certificate: Certificate,
    pub hypotheses: HypothesisReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Converged, but the requested certificate could not be established.
    CertificateInfeasible,
    MaxIter,
    InnerFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::CertificateInfeasible => "certificate_infeasible",
            Self::MaxIter => "max_iter",
            Self::InnerFailure => "inner_failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vector,
    /// Natural residual at `x_k` (lambda = 1).
    pub residual: f64,
    /// `||x_{k+1} - x_k||`; absent on the final record.
    pub step_norm: Option<f64>,
    pub t_k: Option<f64>,
    /// `(t_{k+1} - t_k) - step_norm`.
    pub gap: Option<f64>,
    /// `x_k in K(t_k)`.
    pub in_kt: Option<bool>,
    /// `t* - t_k`.
    pub apriori_bound: Option<f64>,
    /// `rate_Q * step_norm^2`.
    pub aposteriori_bound: Option<f64>,
    pub inner_method: Option<InnerMethod>,
    pub inner_iterations: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub status: SolveStatus,
    pub solution: Option<Vector>,
    pub certificate: Option<CertificateReport>,
    /// Whether the certificate survived every check; bound columns are only
    /// meaningful when this is true.
    pub certified: bool,
    pub warnings: Vec<String>,
    pub tol_outer: f64,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn iterates(&self) -> impl Iterator<Item = &Vector> {
        self.records.iter().map(|r| &r.x)
    }
}

/// `N_{F+T}(x)`: solves the partial linearization at `x`.
pub fn newton_step(p: &GeProblem, x: &Vector, tol_inner: f64, method: MethodChoice) -> Result<Vector> {
    Ok(step_strict(p, x, tol_inner, method)?.z)
}

fn step_strict(
    p: &GeProblem,
    x: &Vector,
    tol_inner: f64,
    method: MethodChoice,
) -> Result<inner::InnerSolution> {
    let lin = p.linearization(x)?;
    let r = linop::positivity_report(&lin.m, linop::default_positivity_tol(&lin.m))?;
    if !r.is_positive {
        return Err(Error::NotPositive {
            context: format!("F'(x) at x = {:?}", x.as_slice()),
            lambda_min: r.lambda_min,
        });
    }
    inner::solve_affine_ge_from(&lin, tol_inner, method, Some(x))
}

/// Uncertified step: with `T = 0` an indefinite but invertible Jacobian still
/// gives the classical Newton step.
fn step_relaxed(
    p: &GeProblem,
    x: &Vector,
    tol_inner: f64,
    method: MethodChoice,
) -> Result<inner::InnerSolution> {
    match step_strict(p, x, tol_inner, method) {
        Err(Error::NotPositive { .. }) if matches!(p.op, SetValuedOperator::Zero) => {
            let lin = p.linearization(x)?;
            let z = linop::solve_checked(&lin.m, &(-&lin.q))
                .ok_or_else(|| Error::Singular(format!("F'(x) at x = {:?}", x.as_slice())))?;
            Ok(inner::InnerSolution {
                residual: lin.residual(&z),
                z,
                method: InnerMethod::ActiveSetNewton,
                iterations: 1,
            })
        }
        other => other,
    }
}

/// Derives the majorant certificate from the first step `x1`.
pub fn build_certificate(p: &GeProblem, mode: CertificateMode, x1: &Vector) -> Result<CertificateReport> {
    let beta = p.beta()?;
    let b = (x1 - p.x0()).norm();
    if !(b > 0.0) {
        return Err(Error::CertificateInfeasible {
            reason: "x1 = x0, so f(0) = b is not positive".into(),
            margin: 0.0,
        });
    }
    let (spec, k, gamma) = match mode {
        CertificateMode::None => {
            return Err(Error::Misuse("no certificate mode selected".into()));
        }
        CertificateMode::Lipschitz { l } => {
            let k = beta * l;
            let spec = MajorantSpec::lipschitz(k, b)?;
            if 1.0 / k > p.radius() {
                return Err(Error::CertificateInfeasible {
                    reason: format!("ball B(x0, 1/K) with 1/K = {} exceeds R = {}", 1.0 / k, p.radius()),
                    margin: 1.0 / k - p.radius(),
                });
            }
            (spec, Some(k), None)
        }
        CertificateMode::Smale { gamma } => {
            let spec = MajorantSpec::smale(gamma, b)?;
            if 1.0 / gamma > p.radius() {
                return Err(Error::CertificateInfeasible {
                    reason: format!("ball B(x0, 1/gamma) with 1/gamma = {} exceeds R = {}", 1.0 / gamma, p.radius()),
                    margin: 1.0 / gamma - p.radius(),
                });
            }
            (spec, None, Some(gamma))
        }
    };
    let certificate = spec.smallest_zero()?;
    let hypotheses = spec.check_hypotheses();
    Ok(CertificateReport {
        beta,
        b,
        mode,
        k,
        gamma,
        spec,
        certificate,
        hypotheses,
    })
}

fn inner_tolerance(tol_outer: f64, prev_step: Option<f64>, lin: &AffineGe, x: &Vector) -> f64 {
    let mut tol = 0.1 * tol_outer;
    if let Some(s) = prev_step {
        tol = tol.min(0.01 * s * s);
    }
    let scale = lin.q.norm() + linop::op_norm(&lin.m) * x.norm();
    tol.max(100.0 * f64::EPSILON * scale).max(f64::MIN_POSITIVE)
}

/// Samples the user's constant against the problem; returns a warning when
/// the constant is demonstrably too small.
fn falsify_constant(p: &GeProblem, mode: CertificateMode, cfg: &OuterConfig) -> Option<String> {
    match mode {
        CertificateMode::Lipschitz { l } => {
            let est = derivative::estimate_lipschitz(p, cfg.verify_samples.max(2), cfg.seed);
            (est > l * (1.0 + 1e-9)).then(|| {
                format!("Lipschitz constant L = {l} is unsound: sampled lower bound {est}")
            })
        }
        CertificateMode::Smale { gamma } => {
            if !p.has_hessians() {
                return None;
            }
            let report = derivative::check_smale_bound(p, gamma, cfg.verify_samples.max(1), cfg.seed).ok()?;
            report.witness.map(|w| {
                format!(
                    "Smale gamma = {gamma} is unsound: beta ||F''|| = {} > {} at distance {}",
                    w.lhs, w.rhs, w.distance
                )
            })
        }
        CertificateMode::None => None,
    }
}

/// Runs the iteration from `p.x0()`.
pub fn solve(p: &GeProblem, cfg: &OuterConfig) -> SolveTrace {
    let x0 = p.x0().clone();
    let tol = cfg
        .tol_outer
        .unwrap_or_else(|| 1e-10 * (1.0 + p.eval_f(&x0).norm()));
    let step_floor = 1e-14 * (1.0 + x0.norm());

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut certificate: Option<CertificateReport> = None;
    let mut certified = false;
    let mut certificate_failed = false;
    let mut status = SolveStatus::MaxIter;

    let mut x = x0.clone();
    let mut t = 0.0;
    let mut prev_step: Option<f64> = None;

    let final_record = |k: usize, x: &Vector, residual: f64, cert: &Option<CertificateReport>, certified: bool, t: f64| {
        let c = cert.as_ref().filter(|_| certified);
        IterationRecord {
            k,
            x: x.clone(),
            residual,
            step_norm: None,
            t_k: c.map(|_| t),
            gap: None,
            in_kt: None,
            apriori_bound: c.map(|c| c.certificate.t_star - t),
            aposteriori_bound: None,
            inner_method: None,
            inner_iterations: None,
        }
    };

    for k in 0..=cfg.max_outer {
        let residual = match p.natural_residual(&x) {
            Ok(r) => r,
            Err(e) => {
                warnings.push(e.to_string());
                status = SolveStatus::InnerFailure;
                break;
            }
        };
        let small_step = prev_step.is_some_and(|s| s <= step_floor);
        if residual <= tol || small_step {
            records.push(final_record(k, &x, residual, &certificate, certified, t));
            status = SolveStatus::Converged;
            break;
        }
        if k == cfg.max_outer {
            records.push(final_record(k, &x, residual, &certificate, certified, t));
            status = SolveStatus::MaxIter;
            break;
        }

        let strict = cfg.mode.is_certified() && !certificate_failed;
        let step_result = p.linearization(&x).and_then(|lin| {
            let tol_inner = inner_tolerance(tol, prev_step, &lin, &x);
            if strict {
                step_strict(p, &x, tol_inner, cfg.inner)
            } else {
                step_relaxed(p, &x, tol_inner, cfg.inner)
            }
        });
        let sol = match step_result {
            Ok(s) => s,
            Err(e) => {
                warnings.push(format!("iteration {k}: {e}"));
                records.push(final_record(k, &x, residual, &certificate, certified, t));
                status = SolveStatus::InnerFailure;
                break;
            }
        };

        if k == 0 && cfg.mode.is_certified() {
            match build_certificate(p, cfg.mode, &sol.z) {
                Ok(c) => {
                    certified = true;
                    if cfg.bound_check {
                        if let Some(w) = falsify_constant(p, cfg.mode, cfg) {
                            warnings.push(w);
                            certified = false;
                            certificate_failed = true;
                        }
                    }
                    certificate = Some(c);
                }
                Err(e) => {
                    warnings.push(format!("certificate: {e}; continuing uncertified"));
                    if cfg.bound_check {
                        warnings.extend(falsify_constant(p, cfg.mode, cfg));
                    }
                    certificate_failed = true;
                }
            }
        }

        let step = (&sol.z - &x).norm();
        let mut rec = IterationRecord {
            k,
            x: x.clone(),
            residual,
            step_norm: Some(step),
            t_k: None,
            gap: None,
            in_kt: None,
            apriori_bound: None,
            aposteriori_bound: None,
            inner_method: Some(sol.method),
            inner_iterations: Some(sol.iterations),
        };
        if let (Some(c), true) = (&certificate, certified) {
            let t_next = c.spec.advance(&c.certificate, t);
            let dt = t_next - t;
            rec.t_k = Some(t);
            rec.gap = Some(dt - step);
            rec.in_kt = Some(
                (&x - &x0).norm() <= t + DOMINATION_SLACK && step <= dt + DOMINATION_SLACK,
            );
            rec.apriori_bound = Some(c.certificate.t_star - t);
            rec.aposteriori_bound = c.certificate.rate_q.map(|q| q * step * step);
            t = t_next;
        }
        records.push(rec);
        x = sol.z;
        prev_step = Some(step);
    }

    if certified {
        if let Some(bad) = records.iter().find(|r| r.gap.is_some_and(|g| g < -DOMINATION_SLACK)) {
            warnings.push(format!(
                "majorant domination violated at iteration {} (gap {})",
                bad.k,
                bad.gap.unwrap_or_default()
            ));
        }
    }
    if status == SolveStatus::Converged && cfg.mode.is_certified() && !certified {
        status = SolveStatus::CertificateInfeasible;
    }
    let solution = matches!(status, SolveStatus::Converged | SolveStatus::CertificateInfeasible)
        .then(|| x.clone());
    SolveTrace {
        records,
        status,
        solution,
        certificate,
        certified,
        warnings,
        tol_outer: tol,
    }
}

/// Performs the first step only and returns the certificate with its
/// scalar sequence.
pub fn certify(p: &GeProblem, mode: CertificateMode, inner: MethodChoice) -> Result<(CertificateReport, Vec<f64>)> {
    let x0 = p.x0().clone();
    let lin = p.linearization(&x0)?;
    let tol = inner_tolerance(1e-12 * (1.0 + p.eval_f(&x0).norm()), None, &lin, &x0);
    let x1 = newton_step(p, &x0, tol, inner)?;
    let report = build_certificate(p, mode, &x1)?;
    let trace = report.spec.scalar_sequence(1e-15 * (1.0 + report.certificate.t_star), 200)?;
    Ok((report, trace.t_values))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeOutcome {
    /// Converged to the reference solution.
    Agrees,
    /// Converged to a different point.
    Elsewhere { solution: Vector, distance: f64 },
    /// The trial did not converge; says nothing about uniqueness.
    Inconclusive(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrial {
    pub start: Vector,
    pub outcome: ProbeOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub unique: bool,
    pub trials: Vec<ProbeTrial>,
}

impl ProbeReport {
    pub fn first_violation(&self) -> Option<&ProbeTrial> {
        self.trials
            .iter()
            .find(|t| matches!(t.outcome, ProbeOutcome::Elsewhere { .. }))
    }
}

/// Restarts uncertified solves from `trials` uniform points of
/// `B[x0, radius]` and reports whether each lands on `x_star`.
pub fn uniqueness_probe(
    p: &GeProblem,
    x_star: &Vector,
    radius: f64,
    trials: usize,
    seed: u64,
    tol: f64,
) -> ProbeReport {
    let cfg = OuterConfig {
        tol_outer: Some(1e-12 * (1.0 + x_star.norm())),
        max_outer: 100,
        ..OuterConfig::default()
    };
    let trials = exec::map_range(trials, |i| {
        let mut rng = exec::sample_rng(seed, i as u64);
        let start = sampling::uniform_in_ball(&mut rng, p.x0(), radius);
        let trace = solve(&p.restarted(start.clone()), &cfg);
        let outcome = match trace.solution {
            Some(sol) => {
                let distance = (&sol - x_star).norm();
                if distance <= tol {
                    ProbeOutcome::Agrees
                } else {
                    ProbeOutcome::Elsewhere {
                        solution: sol,
                        distance,
                    }
                }
            }
            None => ProbeOutcome::Inconclusive(format!(
                "{}{}",
                trace.status,
                trace.warnings.last().map(|w| format!(": {w}")).unwrap_or_default()
            )),
        };
        ProbeTrial { start, outcome }
    });
    ProbeReport {
        unique: !trials
            .iter()
            .any(|t| matches!(t.outcome, ProbeOutcome::Elsewhere { .. })),
        trials,
    }
}

/// Probe over `B[x0, min(t*, R)]` for a certified trace.
pub fn certified_uniqueness_probe(
    p: &GeProblem,
    trace: &SolveTrace,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<ProbeReport> {
    let (Some(cert), Some(x_star)) = (trace.certificate.as_ref().filter(|_| trace.certified), &trace.solution) else {
        return Err(Error::Misuse("uniqueness probe needs a certified, converged trace".into()));
    };
    let radius = cert.certificate.t_star.min(p.radius());
    Ok(uniqueness_probe(p, x_star, radius, trials, seed, tol))
}

/// One sampled tuple violating a linearization-error or inverse bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundWitness {
    pub x: Vector,
    pub y: Option<Vector>,
    pub t: f64,
    pub v: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoundReport {
    pub samples: usize,
    /// Largest `lhs / rhs` over the linearization-error draws.
    pub max_ratio: f64,
    pub error_violations: Vec<BoundWitness>,
    pub inverse_violations: Vec<BoundWitness>,
}

impl ErrorBoundReport {
    pub fn holds(&self) -> bool {
        self.error_violations.is_empty() && self.inverse_violations.is_empty()
    }
}

/// Samples `(x, y, t, v)` with `||x - x0|| <= t < v`, `||y - x|| <= v - t`
/// and checks
/// `beta ||E_F(x, y)|| <= e_f(t, v) ||y - x||^2 / (v - t)^2`, where
/// `E_F(x, y) = F(y) - F(x) - F'(x)(y - x)`. On the same `x` it checks
/// `||(sym F'(x))^{-1}|| <= -beta / f'(t)` for `t < t*`.
pub fn verify_error_bound(
    p: &GeProblem,
    spec: &MajorantSpec,
    samples: usize,
    seed: u64,
) -> Result<ErrorBoundReport> {
    let beta = p.beta()?;
    let cert = spec.smallest_zero()?;
    let v_max = p.radius().min(spec.radius());
    let t_max = cert.t_star.min(v_max);
    let x0 = p.x0().clone();
    let draws = exec::map_range(samples, |i| -> Result<(f64, Option<BoundWitness>, Option<BoundWitness>)> {
        use rand::Rng;
        let mut rng = exec::sample_rng(seed, i as u64);
        let t = t_max * rng.random::<f64>();
        let v = t + (v_max - t) * rng.random_range(1e-6..1.0) * (1.0 - 1e-12);
        let x = sampling::uniform_in_ball(&mut rng, &x0, t);
        let y = sampling::uniform_in_ball(&mut rng, &x, v - t);
        let jx = p.eval_j(&x);
        let e = p.eval_f(&y) - p.eval_f(&x) - &jx * (&y - &x);
        let lhs = beta * e.norm();
        let h = (&y - &x).norm();
        let rhs = spec.linearization_error(t, v)? * h * h / ((v - t) * (v - t));
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        let err_bad = (lhs > rhs + 1e-8).then(|| BoundWitness {
            x: x.clone(),
            y: Some(y.clone()),
            t,
            v: Some(v),
            lhs,
            rhs,
        });
        let lam = linop::lambda_min_sym(&jx)?;
        let df = spec.eval(t)?.df;
        let bound = -beta / df;
        let inv = if lam > 0.0 { 1.0 / lam } else { f64::INFINITY };
        let inv_bad = (inv > bound * (1.0 + 1e-8) + 1e-8).then_some(BoundWitness {
            x,
            y: None,
            t,
            v: None,
            lhs: inv,
            rhs: bound,
        });
        Ok((ratio, err_bad, inv_bad))
    });
    let mut report = ErrorBoundReport {
        samples,
        max_ratio: 0.0,
        error_violations: Vec::new(),
        inverse_violations: Vec::new(),
    };
    for d in draws {
        let (ratio, e, i) = d?;
        report.max_ratio = report.max_ratio.max(ratio);
        report.error_violations.extend(e);
        report.inverse_violations.extend(i);
    }
    Ok(report)
}
