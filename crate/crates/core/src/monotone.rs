//! Maximal monotone operators represented through their resolvents.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec;
use crate::linop::Vector;

/// Dimension used by the monotonicity probe for operators without one.
const PROBE_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum SetValuedOperator {
    /// `T = 0`: the generalized equation is the nonlinear equation `F(x) = 0`.
    Zero,
    /// Normal cone of the box `[lower, upper]`; entries may be infinite.
    Box { lower: Vector, upper: Vector },
    /// Subdifferential of `mu * ||x||_1`.
    L1 { mu: f64 },
}

/// Natural residual `||x - J_{lambda T}(x - lambda F(x))||` and the resolved point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub natural_residual: f64,
    pub fixed_point: Vector,
    pub lambda: f64,
}

impl SetValuedOperator {
    pub fn box_constraint(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                what: "box bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().chain(upper.iter()).any(|v| v.is_nan()) {
            return Err(Error::NonFinite("box bounds"));
        }
        if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::Misuse(format!(
                "box bound {i}: lower {} exceeds upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self::Box { lower, upper })
    }

    /// The nonnegative orthant, turning the problem into an NCP.
    pub fn nonnegative_orthant(n: usize) -> Self {
        Self::Box {
            lower: Vector::zeros(n),
            upper: Vector::from_element(n, f64::INFINITY),
        }
    }

    pub fn l1(mu: f64) -> Result<Self> {
        if mu > 0.0 && mu.is_finite() {
            Ok(Self::L1 { mu })
        } else {
            Err(Error::Domain {
                what: "mu",
                value: mu,
                domain: "(0, inf)".into(),
            })
        }
    }

    /// Fixed dimension, if the operator carries one.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            Self::Box { lower, .. } => Some(lower.len()),
            _ => None,
        }
    }

    pub fn is_box_like(&self) -> bool {
        matches!(self, Self::Zero | Self::Box { .. })
    }

    /// Componentwise bounds; `Zero` is the box `(-inf, inf)^n`.
    pub fn bounds(&self, n: usize) -> Option<(Vector, Vector)> {
        match self {
            Self::Zero => Some((
                Vector::from_element(n, f64::NEG_INFINITY),
                Vector::from_element(n, f64::INFINITY),
            )),
            Self::Box { lower, upper } => Some((lower.clone(), upper.clone())),
            Self::L1 { .. } => None,
        }
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        match self.dimension() {
            Some(n) if n != x.len() => Err(Error::Dimension {
                what: "operator argument",
                expected: n,
                got: x.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Euclidean projection onto the box.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        match self {
            Self::Box { lower, upper } => {
                self.check_dim(x)?;
                Ok(clamp(x, lower, upper))
            }
            _ => Err(Error::Misuse(
                "project is only defined for box operators".into(),
            )),
        }
    }

    /// `(I + lambda T)^{-1}(x)`.
    pub fn resolvent(&self, lambda: f64, x: &Vector) -> Result<Vector> {
        if !(lambda > 0.0) {
            return Err(Error::Domain {
                what: "lambda",
                value: lambda,
                domain: "(0, inf)".into(),
            });
        }
        self.check_dim(x)?;
        Ok(match self {
            Self::Zero => x.clone(),
            Self::Box { lower, upper } => clamp(x, lower, upper),
            Self::L1 { mu } => soft_threshold(x, lambda * mu),
        })
    }

    pub fn natural_residual(&self, x: &Vector, fx: &Vector, lambda: f64) -> Result<ResidualReport> {
        if x.len() != fx.len() {
            return Err(Error::Dimension {
                what: "F(x)",
                expected: x.len(),
                got: fx.len(),
            });
        }
        let fixed_point = self.resolvent(lambda, &(x - fx * lambda))?;
        Ok(ResidualReport {
            natural_residual: (x - &fixed_point).norm(),
            fixed_point,
            lambda,
        })
    }

    /// Checks `<u - v, y - x> >= -1e-10` on random selections `u in T(y)`,
    /// `v in T(x)` obtained from the resolvent identity
    /// `(a - J(a)) / lambda in T(J(a))`. A test utility, not a proof.
    pub fn monotonicity_probe(&self, samples: usize, seed: u64) -> bool {
        let n = self.dimension().unwrap_or(PROBE_DIM);
        let violations = exec::map_range(samples.max(1), |i| {
            let mut rng = exec::sample_rng(seed, i as u64);
            let lambda = rng.random_range(0.1..10.0);
            let (y, u) = self.random_selection(&mut rng, n, lambda);
            let (x, v) = self.random_selection(&mut rng, n, lambda);
            (&u - &v).dot(&(&y - &x)) < -1e-10
        });
        !violations.into_iter().any(|bad| bad)
    }

    fn random_selection(&self, rng: &mut impl Rng, n: usize, lambda: f64) -> (Vector, Vector) {
        let scale = 3.0;
        let a = Vector::from_fn(n, |i, _| {
            // occasionally land exactly on a bound so the selection is a
            // nontrivial cone element
            if let Self::Box { lower, upper } = self {
                if rng.random_bool(0.2) {
                    let b = if rng.random_bool(0.5) { lower[i] } else { upper[i] };
                    if b.is_finite() {
                        return b + scale * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            scale * rng.sample::<f64, _>(StandardNormal)
        });
        let x = self
            .resolvent(lambda, &a)
            .expect("probe draws have the operator dimension");
        let u = (&a - &x) / lambda;
        (x, u)
    }
}

fn clamp(x: &Vector, lower: &Vector, upper: &Vector) -> Vector {
    Vector::from_fn(x.len(), |i, _| x[i].max(lower[i]).min(upper[i]))
}

fn soft_threshold(x: &Vector, kappa: f64) -> Vector {
    x.map(|v| v.signum() * (v.abs() - kappa).max(0.0))
}
