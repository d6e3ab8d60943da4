use rand::Rng;
use rand_distr::StandardNormal;

use crate::linop::Vector;

/// Uniform direction on the unit sphere in R^n.
pub fn unit_vector(rng: &mut impl Rng, n: usize) -> Vector {
    loop {
        let g = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

/// Uniform point in the closed ball `B[center, radius]`: a Gaussian direction
/// scaled by `u^(1/n) * radius`.
pub fn uniform_in_ball(rng: &mut impl Rng, center: &Vector, radius: f64) -> Vector {
    let n = center.len();
    let u: f64 = rng.random();
    center + unit_vector(rng, n) * (radius * u.powf(1.0 / n as f64))
}
