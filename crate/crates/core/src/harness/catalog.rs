//! Built-in test problems with known solutions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::problem_file::{field, BoundSpec, BuiltProblem, FileError, FunctionSpec, OperatorSpec, ProblemFile};
use crate::inner::AffineGe;
use crate::linop::{Matrix, Vector};
use crate::monotone::SetValuedOperator;
use crate::newton::{CertificateMode, GeProblem};

pub const CATALOG_NAMES: [&str; 5] = ["ncp-sqrt", "exp-root", "qp-kkt-2d", "l1-prox-ge", "affine-box-nd"];

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// Fully populated problem file; `F` is explicit for affine problems.
    pub file: ProblemFile,
    pub solution: Option<Vector>,
}

impl CatalogEntry {
    /// The problem with the known solution attached.
    pub fn build(&self) -> Result<BuiltProblem, FileError> {
        self.file.build_explicit(Some(self.name), self.solution.clone())
    }
}

fn param(params: &BTreeMap<String, f64>, allowed: &[(&str, f64)], key: &str) -> f64 {
    debug_assert!(allowed.iter().any(|(k, _)| *k == key));
    params
        .get(key)
        .copied()
        .unwrap_or_else(|| allowed.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).unwrap_or(0.0))
}

fn check_params(name: &str, params: &BTreeMap<String, f64>, allowed: &[(&str, f64)]) -> Result<(), FileError> {
    for (k, v) in params {
        if !allowed.iter().any(|(a, _)| a == k) {
            return Err(field(format!("F.builtin.params.{k}"), format!("unknown parameter for {name:?}")));
        }
        if !v.is_finite() {
            return Err(field(format!("F.builtin.params.{k}"), "must be finite"));
        }
    }
    Ok(())
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn affine_file(name: &str, m: &Matrix, q: &Vector, op: &SetValuedOperator, x0: Vec<f64>, r: f64, cert: CertificateMode) -> ProblemFile {
    ProblemFile {
        name: Some(name.into()),
        n: Some(q.len()),
        f: FunctionSpec::Affine {
            q: q.iter().copied().collect(),
            m: rows(m),
        },
        t: Some(OperatorSpec::from_operator(op)),
        x0: Some(x0),
        r: Some(r),
        certificate: Some(cert),
    }
}

const NO_PARAMS: &[(&str, f64)] = &[];
const EXP_PARAMS: &[(&str, f64)] = &[("c", 1.1)];
const ND_PARAMS: &[(&str, f64)] = &[("n", 4.0), ("seed", 0.0)];

fn allowed(name: &str) -> Option<&'static [(&'static str, f64)]> {
    match name {
        "ncp-sqrt" | "qp-kkt-2d" | "l1-prox-ge" => Some(NO_PARAMS),
        "exp-root" => Some(EXP_PARAMS),
        "affine-box-nd" => Some(ND_PARAMS),
        _ => None,
    }
}

/// Looks up a catalog problem, applying `params` over its defaults.
pub fn entry(name: &str, params: &BTreeMap<String, f64>) -> Result<CatalogEntry, FileError> {
    let allowed = allowed(name).ok_or_else(|| {
        field("F.builtin.name", format!("unknown builtin {name:?}; known: {}", CATALOG_NAMES.join(", ")))
    })?;
    check_params(name, params, allowed)?;
    let builtin = |p: BTreeMap<String, f64>| FunctionSpec::Builtin { name: name.into(), params: p };
    Ok(match name {
        "ncp-sqrt" => CatalogEntry {
            name: "ncp-sqrt",
            description: "x^2 - 1 on the nonnegative half-line",
            file: ProblemFile {
                name: Some(name.into()),
                n: Some(1),
                f: builtin(BTreeMap::new()),
                t: Some(OperatorSpec::Box {
                    l: BoundSpec::Each(vec![super::problem_file::BoundValue::Num(0.0)]),
                    u: BoundSpec::uniform(f64::INFINITY),
                }),
                x0: Some(vec![2.0]),
                r: Some(2.0),
                certificate: Some(CertificateMode::Lipschitz { l: 2.0 }),
            },
            solution: Some(Vector::from_element(1, 1.0)),
        },
        "exp-root" => {
            let c = param(params, allowed, "c");
            if !(c > 0.0) {
                return Err(field("F.builtin.params.c", "must be positive"));
            }
            CatalogEntry {
                name: "exp-root",
                description: "exp(x) - c, analytic (Smale mode)",
                file: ProblemFile {
                    name: Some(name.into()),
                    n: Some(1),
                    f: builtin([("c".to_string(), c)].into_iter().collect()),
                    t: Some(OperatorSpec::Zero),
                    x0: Some(vec![0.0]),
                    r: Some(2.0),
                    certificate: Some(CertificateMode::Smale { gamma: 0.5 }),
                },
                solution: Some(Vector::from_element(1, c.ln())),
            }
        }
        "qp-kkt-2d" => {
            let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
            let q = Vector::from_vec(vec![-2.0, -4.0]);
            let op = SetValuedOperator::box_constraint(Vector::zeros(2), Vector::from_element(2, 1.0))?;
            CatalogEntry {
                name: "qp-kkt-2d",
                description: "box-constrained convex QP, upper bound active",
                file: affine_file(name, &m, &q, &op, vec![0.0, 0.0], 10.0, CertificateMode::Lipschitz { l: 0.1 }),
                solution: Some(Vector::from_vec(vec![0.5, 1.0])),
            }
        }
        "l1-prox-ge" => {
            let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 2.0]);
            let q = Vector::from_vec(vec![-3.0, 0.5]);
            let op = SetValuedOperator::l1(1.0)?;
            CatalogEntry {
                name: "l1-prox-ge",
                description: "nonsymmetric affine map plus an l1 subdifferential",
                file: affine_file(name, &m, &q, &op, vec![0.0, 0.0], 20.0, CertificateMode::Lipschitz { l: 0.1 }),
                solution: Some(Vector::from_vec(vec![1.0, 0.0])),
            }
        }
        _ => {
            let n = param(params, allowed, "n");
            let seed = param(params, allowed, "seed");
            if n.fract() != 0.0 || !(1.0..=1024.0).contains(&n) {
                return Err(field("F.builtin.params.n", "must be an integer in 1..=1024"));
            }
            if seed.fract() != 0.0 || !(0.0..=9.007_199_254_740_992e15).contains(&seed) {
                return Err(field("F.builtin.params.seed", "must be a nonnegative integer"));
            }
            let p = random_affine_box(n as usize, seed as u64);
            CatalogEntry {
                name: "affine-box-nd",
                description: "random monotone affine map over a partly unbounded box",
                file: affine_file(name, &p.m, &p.q, &p.op, vec![0.0; n as usize], 10.0, CertificateMode::None),
                solution: None,
            }
        }
    })
}

/// Builds the nonlinear builtin `F` for `name` on dimension `n`.
pub(crate) fn builtin_function(
    name: &str,
    params: &BTreeMap<String, f64>,
    n: usize,
    op: SetValuedOperator,
    x0: Vector,
    r: f64,
) -> Result<GeProblem, FileError> {
    if n != 1 {
        return Err(field("x0", format!("{name:?} is one-dimensional")));
    }
    match name {
        "ncp-sqrt" => Ok(GeProblem::quadratic(
            Vector::from_element(1, -1.0),
            Matrix::zeros(1, 1),
            vec![Matrix::from_element(1, 1, 2.0)],
            op,
            x0,
            r,
        )?),
        "exp-root" => {
            let c = params.get("c").copied().unwrap_or(EXP_PARAMS[0].1);
            Ok(GeProblem::new(
                1,
                move |x| Vector::from_element(1, x[0].exp() - c),
                |x| Matrix::from_element(1, 1, x[0].exp()),
                op,
                x0,
                r,
            )?
            .with_hessians(|x| vec![Matrix::from_element(1, 1, x[0].exp())])?)
        }
        _ => Err(field("F.builtin.name", format!("unknown builtin {name:?}"))),
    }
}

/// Random strongly monotone affine problem over a box.
///
/// `M = A^T A / n + (S - S^T) / 2 + I / 2` with entries of `A`, `S` uniform on
/// `[-1, 1]`, `q` uniform on `[-3, 3]`; each bound is infinite with
/// probability 0.2, otherwise `l_i` in `[-2, 0]`, `u_i` in `[0, 2]`.
pub fn random_affine_box(n: usize, seed: u64) -> AffineGe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let s = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let m = a.transpose() * &a / n as f64 + (&s - s.transpose()) * 0.5 + Matrix::identity(n, n) * 0.5;
    let q = Vector::from_fn(n, |_, _| rng.random_range(-3.0..=3.0));
    let mut lower = Vector::zeros(n);
    let mut upper = Vector::zeros(n);
    for i in 0..n {
        lower[i] = if rng.random_bool(0.2) { f64::NEG_INFINITY } else { rng.random_range(-2.0..=0.0) };
        upper[i] = if rng.random_bool(0.2) { f64::INFINITY } else { rng.random_range(0.0..=2.0) };
    }
    let op = SetValuedOperator::box_constraint(lower, upper).expect("ordered bounds");
    AffineGe::new(m, q, op).expect("consistent dimensions")
}

/// Every catalog entry with default parameters.
pub fn all() -> Vec<CatalogEntry> {
    CATALOG_NAMES
        .iter()
        .map(|n| entry(n, &BTreeMap::new()).expect("catalog defaults are valid"))
        .collect()
}
