//! Scalar majorant functions and the Kantorovich-type certificate they induce.
//!
//! A majorant `f: [0, R) -> R` satisfies `f(0) > 0`, `f'(0) = -1`, and has a
//! convex, strictly increasing derivative. Its smallest zero `t*` bounds the
//! distance from the start point to the solution, and the scalar Newton
//! sequence `t_{k+1} = t_k - f(t_k)/f'(t_k)` majorizes the vector iteration.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Stand-in for the unbounded domain of the quadratic (Lipschitz) majorant.
pub const LIPSCHITZ_RADIUS: f64 = 1e18;

/// Grid size used to sample h2 for custom majorants.
pub const H2_GRID: usize = 1024;

/// `3 - 2 sqrt(2)`, the largest admissible `alpha = b * gamma`.
pub fn smale_alpha_limit() -> f64 {
    3.0 - 2.0 * std::f64::consts::SQRT_2
}

const H4_TIE: f64 = 1e-12;

/// `(f(t), f'(t), f''(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorantValue {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

type MajorantFn = dyn Fn(f64) -> MajorantValue + Send + Sync;

/// A user-supplied twice differentiable majorant on `[0, radius)`.
///
/// The evaluator must be reentrant; it may be called from several threads.
#[derive(Clone)]
pub struct CustomMajorant {
    eval: Arc<MajorantFn>,
    radius: f64,
}

impl CustomMajorant {
    pub fn new<F>(radius: f64, eval: F) -> Self
    where
        F: Fn(f64) -> MajorantValue + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            radius,
        }
    }
}

impl fmt::Debug for CustomMajorant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMajorant")
            .field("radius", &self.radius)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum MajorantSpec {
    /// `f(t) = (K/2) t^2 - t + b`.
    Lipschitz { k: f64, b: f64 },
    /// `f(t) = t / (1 - gamma t) - 2t + b` on `[0, 1/gamma)`.
    Smale { gamma: f64, b: f64 },
    Custom(CustomMajorant),
}

/// Existence radius, uniqueness data and rate constant derived from a majorant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub t_star: f64,
    pub t_bar: f64,
    pub h3_holds: bool,
    pub h4_holds: bool,
    /// `f''(t*) / (-2 f'(t*))`, present iff h4 holds.
    pub rate_q: Option<f64>,
    /// `b * gamma` for Smale majorants.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrace {
    pub t_values: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisMargins {
    /// `f(0)`; must be positive.
    pub f0: f64,
    /// `|f'(0) + 1|`; must be below `1e-9`.
    pub slope_defect: f64,
    /// Smallest increment of `f'` between neighbouring grid points (analytic
    /// `f''(0)` for the built-in kinds).
    pub min_slope_increment: f64,
    /// Non-positive when a zero exists: `2bK - 1`, `alpha - (3 - 2 sqrt 2)`,
    /// or `f` at the right end of the bisection bracket.
    pub h3: f64,
    /// `f'(t*)` when a zero exists.
    pub h4: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisReport {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub h4: bool,
    pub margins: HypothesisMargins,
    /// Grid points used for the sampled h2 check (0 for analytic checks).
    pub grid_points: usize,
}

/// A discriminant within rounding of zero is a double root.
fn snap_discriminant(disc: f64, scale: f64) -> f64 {
    if disc <= 8.0 * f64::EPSILON * scale {
        0.0
    } else {
        disc
    }
}

impl MajorantSpec {
    pub fn lipschitz(k: f64, b: f64) -> Result<Self> {
        positive("K", k)?;
        positive("b", b)?;
        Ok(Self::Lipschitz { k, b })
    }

    pub fn smale(gamma: f64, b: f64) -> Result<Self> {
        positive("gamma", gamma)?;
        positive("b", b)?;
        Ok(Self::Smale { gamma, b })
    }

    pub fn custom(custom: CustomMajorant) -> Result<Self> {
        positive("R", custom.radius)?;
        Ok(Self::Custom(custom))
    }

    /// Right end of the domain `[0, R)`.
    pub fn radius(&self) -> f64 {
        match self {
            Self::Lipschitz { .. } => LIPSCHITZ_RADIUS,
            Self::Smale { gamma, .. } => 1.0 / gamma,
            Self::Custom(c) => c.radius,
        }
    }

    /// `f(0)`.
    pub fn b(&self) -> f64 {
        match self {
            Self::Lipschitz { b, .. } | Self::Smale { b, .. } => *b,
            Self::Custom(c) => (c.eval)(0.0).f,
        }
    }

    pub fn eval(&self, t: f64) -> Result<MajorantValue> {
        if !(t >= 0.0 && t < self.radius()) {
            return Err(Error::Domain {
                what: "t",
                value: t,
                domain: format!("[0, {})", self.radius()),
            });
        }
        Ok(self.eval_unchecked(t))
    }

    fn eval_unchecked(&self, t: f64) -> MajorantValue {
        match *self {
            Self::Lipschitz { k, b } => MajorantValue {
                f: 0.5 * k * t * t - t + b,
                df: k * t - 1.0,
                d2f: k,
            },
            Self::Smale { gamma, b } => {
                let s = 1.0 - gamma * t;
                MajorantValue {
                    f: t / s - 2.0 * t + b,
                    df: 1.0 / (s * s) - 2.0,
                    d2f: 2.0 * gamma / (s * s * s),
                }
            }
            Self::Custom(ref c) => (c.eval)(t),
        }
    }

    /// `sup { t in [0, R) : f'(t) < 0 }`.
    pub fn t_bar(&self) -> f64 {
        match *self {
            Self::Lipschitz { k, .. } => 1.0 / k,
            Self::Smale { gamma, .. } => (1.0 - std::f64::consts::FRAC_1_SQRT_2) / gamma,
            Self::Custom(_) => {
                let r = self.radius();
                let hi = r * (1.0 - 1e-12);
                if self.eval_unchecked(hi).df < 0.0 {
                    return r;
                }
                bisect(0.0, hi, |t| self.eval_unchecked(t).df < 0.0)
            }
        }
    }

    /// Scalar Newton map `n_f(t) = t - f(t) / f'(t)`.
    pub fn newton_step(&self, t: f64) -> Result<f64> {
        let v = self.eval(t)?;
        if !(v.df < 0.0) {
            return Err(Error::Domain {
                what: "t (f'(t) must be negative)",
                value: t,
                domain: format!("[0, {})", self.t_bar()),
            });
        }
        Ok(t - v.f / v.df)
    }

    /// Linearization error `e_f(t, u) = f(u) - f(t) - f'(t)(u - t)`.
    pub fn linearization_error(&self, t: f64, u: f64) -> Result<f64> {
        if u < t {
            return Err(Error::Domain {
                what: "u (must satisfy u >= t)",
                value: u,
                domain: format!("[{t}, {})", self.radius()),
            });
        }
        self.eval(t)?;
        self.eval(u)?;
        let h = u - t;
        Ok(match *self {
            Self::Lipschitz { k, .. } => 0.5 * k * h * h,
            Self::Smale { gamma, .. } => {
                let st = 1.0 - gamma * t;
                gamma * h * h / (st * st * (1.0 - gamma * u))
            }
            Self::Custom(_) => {
                let vt = self.eval_unchecked(t);
                let vu = self.eval_unchecked(u);
                vu.f - (vt.f + vt.df * h)
            }
        })
    }

    /// Margin of the zero-existence condition; non-positive means feasible.
    fn h3_margin(&self) -> f64 {
        match *self {
            Self::Lipschitz { k, b } => 2.0 * b * k - 1.0,
            Self::Smale { gamma, b } => b * gamma - smale_alpha_limit(),
            Self::Custom(_) => {
                let r = self.radius();
                let hi = (self.t_bar() - 1e-12 * r).max(0.0);
                self.eval_unchecked(hi).f
            }
        }
    }

    /// Smallest zero `t*` by bisection on `[0, t_bar]`.
    pub fn bisect_smallest_zero(&self) -> Option<f64> {
        let hi = match self {
            Self::Custom(_) => (self.t_bar() - 1e-12 * self.radius()).max(0.0),
            _ => self.t_bar(),
        };
        if self.eval_unchecked(hi).f > 0.0 {
            return None;
        }
        Some(bisect(0.0, hi, |t| self.eval_unchecked(t).f > 0.0))
    }

    /// Certificate data: `t*`, `t_bar`, h4 and the quadratic rate constant.
    pub fn smallest_zero(&self) -> Result<Certificate> {
        let margin = self.h3_margin();
        if !(margin <= 0.0) {
            let reason = match self {
                Self::Lipschitz { .. } => "2bK > 1",
                Self::Smale { .. } => "alpha > 3 - 2 sqrt(2)",
                Self::Custom(_) => "f has no zero before t_bar",
            };
            return Err(Error::CertificateInfeasible {
                reason: reason.into(),
                margin,
            });
        }
        let t_bar = self.t_bar();
        let (t_star, alpha) = match *self {
            Self::Lipschitz { k, b } => {
                // (1 - sqrt(1 - 2bK)) / K without the cancellation
                let disc = snap_discriminant(1.0 - 2.0 * b * k, 1.0);
                (2.0 * b / (1.0 + disc.sqrt()), None)
            }
            Self::Smale { gamma, b } => {
                let alpha = b * gamma;
                let disc = snap_discriminant((alpha + 1.0).powi(2) - 8.0 * alpha, (alpha + 1.0).powi(2));
                // (alpha + 1 - sqrt(disc)) / (4 gamma), rationalized
                (2.0 * b / (alpha + 1.0 + disc.sqrt()), Some(alpha))
            }
            Self::Custom(_) => (
                self.bisect_smallest_zero()
                    .ok_or_else(|| Error::CertificateInfeasible {
                        reason: "f has no zero before t_bar".into(),
                        margin,
                    })?,
                None,
            ),
        };
        let t_star = t_star.min(t_bar);
        let v = self.eval_unchecked(t_star);
        let h4_holds = v.df < -H4_TIE;
        Ok(Certificate {
            t_star,
            t_bar,
            h3_holds: true,
            h4_holds,
            rate_q: h4_holds.then(|| v.d2f / (-2.0 * v.df)),
            alpha,
        })
    }

    /// Scalar Newton sequence from `t_0 = 0` until `t* - t_k <= tol`.
    pub fn scalar_sequence(&self, tol: f64, max_iter: usize) -> Result<ScalarTrace> {
        if !(tol > 0.0) {
            return Err(Error::Domain {
                what: "tol",
                value: tol,
                domain: "(0, inf)".into(),
            });
        }
        let cert = self.smallest_zero()?;
        let mut t = 0.0;
        let mut t_values = vec![t];
        for _ in 0..max_iter {
            if cert.t_star - t <= tol {
                break;
            }
            let next = self.advance(&cert, t);
            if next <= t {
                break;
            }
            t = next;
            t_values.push(t);
        }
        Ok(ScalarTrace {
            converged: cert.t_star - t <= tol,
            t_values,
        })
    }

    /// One step of the majorant sequence, saturating at `t*` once rounding
    /// stops it from increasing.
    pub fn advance(&self, cert: &Certificate, t: f64) -> f64 {
        if t >= cert.t_star {
            return t;
        }
        match self.newton_step(t) {
            Ok(next) if next > t => next.min(cert.t_star),
            _ => t,
        }
    }

    pub fn check_hypotheses(&self) -> HypothesisReport {
        let v0 = self.eval_unchecked(0.0);
        let slope_defect = (v0.df + 1.0).abs();
        let h1 = v0.f > 0.0 && slope_defect <= 1e-9;
        let (h2, min_slope_increment, grid_points) = match self {
            Self::Lipschitz { k, .. } => (*k > 0.0, *k, 0),
            Self::Smale { gamma, .. } => (*gamma > 0.0, 2.0 * gamma, 0),
            Self::Custom(_) => self.sample_h2(),
        };
        let h3_margin = self.h3_margin();
        let cert = self.smallest_zero().ok();
        let h4_slope = cert.map(|c| self.eval_unchecked(c.t_star).df);
        HypothesisReport {
            h1,
            h2,
            h3: cert.is_some(),
            h4: cert.is_some_and(|c| c.h4_holds),
            margins: HypothesisMargins {
                f0: v0.f,
                slope_defect,
                min_slope_increment,
                h3: h3_margin,
                h4: h4_slope,
            },
            grid_points,
        }
    }

    fn sample_h2(&self) -> (bool, f64, usize) {
        let top = 0.999 * self.radius().min(LIPSCHITZ_RADIUS);
        let slopes: Vec<f64> = (0..H2_GRID)
            .map(|i| self.eval_unchecked(top * i as f64 / (H2_GRID - 1) as f64).df)
            .collect();
        let min_inc = slopes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let scale = slopes.iter().fold(1.0f64, |m, s| m.max(s.abs()));
        let convex = slopes
            .windows(3)
            .all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-12 * scale);
        (min_inc > 0.0 && convex, min_inc, H2_GRID)
    }
}

fn positive(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: v,
            domain: "(0, inf)".into(),
        })
    }
}

/// Boundary of a predicate that holds on `[lo, s)` and fails on `(s, hi]`.
fn bisect(mut lo: f64, mut hi: f64, holds: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
