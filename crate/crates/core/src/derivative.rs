//! Finite-difference checks of user Jacobians and sampling-based
//! falsification of user-supplied Lipschitz and Smale constants.
//!
//! Sampling can only refute a constant, never prove it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::linop::{self, Matrix, Vector};
use crate::newton::GeProblem;
use crate::sampling;

/// Cap on the sampling radius when the problem declares `R = inf`.
const MAX_SAMPLING_RADIUS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianCheckReport {
    pub max_abs_deviation: f64,
    pub worst_entry: (usize, usize),
    pub fd_step: f64,
}

/// Central differences of `F` at `x` against the user Jacobian.
pub fn check_jacobian(p: &GeProblem, x: &Vector, rel_step: f64) -> Result<JacobianCheckReport> {
    if !(rel_step > 0.0) {
        return Err(Error::Domain {
            what: "rel_step",
            value: rel_step,
            domain: "(0, inf)".into(),
        });
    }
    if x.len() != p.dim() {
        return Err(Error::Dimension {
            what: "check_jacobian point",
            expected: p.dim(),
            got: x.len(),
        });
    }
    let h = rel_step * x.amax().max(1.0);
    let j = p.eval_j(x);
    let mut report = JacobianCheckReport {
        max_abs_deviation: 0.0,
        worst_entry: (0, 0),
        fd_step: h,
    };
    for col in 0..p.dim() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[col] += h;
        xm[col] -= h;
        let d = (p.eval_f(&xp) - p.eval_f(&xm)) / (2.0 * h);
        for row in 0..p.dim() {
            let dev = (d[row] - j[(row, col)]).abs();
            if dev > report.max_abs_deviation || dev.is_nan() {
                report.max_abs_deviation = dev;
                report.worst_entry = (row, col);
            }
        }
    }
    Ok(report)
}

fn sampling_radius(p: &GeProblem) -> f64 {
    p.radius().min(MAX_SAMPLING_RADIUS)
}

/// Lower bound on the Lipschitz constant of `F'` over `B(x0, R)`:
/// the largest `||J(x) - J(y)|| / ||x - y||` over `samples` random pairs.
pub fn estimate_lipschitz(p: &GeProblem, samples: usize, seed: u64) -> f64 {
    let radius = sampling_radius(p);
    exec::map_range(samples, |i| {
        let mut rng = exec::sample_rng(seed, i as u64);
        let x = sampling::uniform_in_ball(&mut rng, p.x0(), radius);
        let y = sampling::uniform_in_ball(&mut rng, p.x0(), radius);
        let d = (&x - &y).norm();
        if d <= 1e-12 * (1.0 + radius) {
            return 0.0;
        }
        linop::op_norm(&(p.eval_j(&x) - p.eval_j(&y))) / d
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Norm of the symmetric bilinear map `(u, w) -> (u^T H_i w)_i`, estimated
/// from below as `max ||(u^T H_i u)_i||` over unit `u` (exact for n = 1).
pub fn bilinear_norm(hessians: &[Matrix], rng: &mut impl Rng) -> f64 {
    let n = hessians.first().map_or(0, |h| h.nrows());
    if n == 0 {
        return 0.0;
    }
    let value = |u: &Vector| -> Vector {
        Vector::from_fn(hessians.len(), |i, _| u.dot(&(&hessians[i] * u)))
    };
    if n == 1 {
        return value(&Vector::from_element(1, 1.0)).norm();
    }
    let mut starts: Vec<Vector> = (0..n)
        .map(|k| {
            let mut e = Vector::zeros(n);
            e[k] = 1.0;
            e
        })
        .collect();
    starts.extend((0..16).map(|_| sampling::unit_vector(rng, n)));
    let mut best = 0.0f64;
    for mut u in starts {
        for _ in 0..60 {
            let b = value(&u);
            let nb = b.norm();
            best = best.max(nb);
            if nb == 0.0 {
                break;
            }
            // ascent direction of ||B(u, u)||^2
            let mut g = Vector::zeros(n);
            for (i, h) in hessians.iter().enumerate() {
                g += h * &u * b[i];
            }
            let ng = g.norm();
            if ng == 0.0 {
                break;
            }
            u = g / ng;
        }
        best = best.max(value(&u).norm());
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmaleWitness {
    pub x: Vector,
    pub distance: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmaleCheckReport {
    pub samples: usize,
    /// Largest `beta ||F''(x)|| / (2 gamma / (1 - gamma ||x - x0||)^3)`.
    pub max_ratio: f64,
    /// Worst violation, if any.
    pub witness: Option<SmaleWitness>,
}

impl SmaleCheckReport {
    pub fn holds(&self) -> bool {
        self.witness.is_none()
    }
}

/// Checks `beta ||F''(x)|| <= 2 gamma / (1 - gamma ||x - x0||)^3` on `x0` and
/// `samples - 1` uniform points of `B(x0, 0.99 / gamma)`.
pub fn check_smale_bound(p: &GeProblem, gamma: f64, samples: usize, seed: u64) -> Result<SmaleCheckReport> {
    if !(gamma > 0.0) {
        return Err(Error::Domain {
            what: "gamma",
            value: gamma,
            domain: "(0, inf)".into(),
        });
    }
    if !p.has_hessians() {
        return Err(Error::Misuse(
            "the Smale bound check needs second derivatives".into(),
        ));
    }
    let beta = p.beta()?;
    let radius = 0.99 / gamma;
    let x0 = p.x0().clone();
    let results = exec::map_range(samples.max(1), |i| {
        let mut rng = exec::sample_rng(seed, i as u64);
        let x = if i == 0 {
            x0.clone()
        } else {
            sampling::uniform_in_ball(&mut rng, &x0, radius)
        };
        let distance = (&x - &x0).norm();
        let hs = p.eval_hessians(&x).expect("checked above");
        let lhs = beta * bilinear_norm(&hs, &mut rng);
        let rhs = 2.0 * gamma / (1.0 - gamma * distance).powi(3);
        SmaleWitness { x, distance, lhs, rhs }
    });
    let max_ratio = results.iter().map(|w| w.lhs / w.rhs).fold(0.0, f64::max);
    let witness = results
        .into_iter()
        .filter(|w| w.lhs > w.rhs + 1e-8)
        .max_by(|a, b| (a.lhs - a.rhs).total_cmp(&(b.lhs - b.rhs)));
    Ok(SmaleCheckReport {
        samples: samples.max(1),
        max_ratio,
        witness,
    })
}
