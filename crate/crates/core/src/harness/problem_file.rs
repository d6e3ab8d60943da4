//! JSON problem files.
//!
//! ```json
//! {
//!   "n": 2,
//!   "F": {"affine": {"q": [-2, -4], "M": [[2, 1], [1, 2]]}},
//!   "T": {"type": "box", "l": [0, 0], "u": [1, 1]},
//!   "x0": [0, 0],
//!   "R": 10,
//!   "certificate": {"mode": "lipschitz", "L": 0.1}
//! }
//! ```
//!
//! `F` is one of `affine {q, M}`, `quadratic {c, g, H}` with
//! `F_i(x) = c_i + g_i . x + x^T H_i x / 2`, or `builtin {name, params}`
//! naming a catalog problem. For builtin problems every other field is
//! optional and overrides the catalog default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::catalog;
use super::format;
use crate::error::Error;
use crate::inner::AffineGe;
use crate::linop::{Matrix, Vector};
use crate::monotone::SetValuedOperator;
use crate::newton::{CertificateMode, GeProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "F")]
    pub f: FunctionSpec,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Affine {
        q: Vec<f64>,
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
    },
    Quadratic {
        c: Vec<f64>,
        g: Vec<Vec<f64>>,
        #[serde(rename = "H")]
        h: Vec<Vec<Vec<f64>>>,
    },
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Zero,
    Box { l: BoundSpec, u: BoundSpec },
    L1 { mu: f64 },
}

/// A bound vector, or `"-inf"` / `"+inf"` for every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundSpec {
    Uniform(String),
    Each(Vec<BoundValue>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundValue {
    Num(f64),
    Token(String),
}

#[derive(Debug)]
pub enum FileError {
    Io { path: String, message: String },
    Syntax { line: usize, column: usize, message: String },
    Field { field: String, message: String },
    Problem(Error),
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, message } => write!(f, "{path}: {message}"),
            Self::Syntax { line, column, message } => {
                write!(f, "line {line}, column {column}: {message}")
            }
            Self::Field { field, message } => write!(f, "field `{field}`: {message}"),
            Self::Problem(e) => write!(f, "invalid problem: {e}"),
        }
    }
}

impl std::error::Error for FileError {}

impl From<Error> for FileError {
    fn from(e: Error) -> Self {
        Self::Problem(e)
    }
}

pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> FileError {
    FileError::Field {
        field: field.into(),
        message: message.into(),
    }
}

/// A problem ready to solve, with its certificate request.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub name: String,
    pub problem: GeProblem,
    pub mode: CertificateMode,
    pub known_solution: Option<Vector>,
}

fn parse_token(s: &str, field_name: &str) -> Result<f64, FileError> {
    match s {
        "-inf" => Ok(f64::NEG_INFINITY),
        "+inf" | "inf" => Ok(f64::INFINITY),
        _ => Err(field(field_name, format!("expected a number, \"-inf\" or \"+inf\", got {s:?}"))),
    }
}

fn finite(v: &[f64], name: &str) -> Result<(), FileError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(field(format!("{name}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

fn vector(v: &[f64], n: usize, name: &str) -> Result<Vector, FileError> {
    if v.len() != n {
        return Err(field(name, format!("expected {n} entries, got {}", v.len())));
    }
    finite(v, name)?;
    Ok(Vector::from_row_slice(v))
}

fn matrix(rows: &[Vec<f64>], n: usize, name: &str) -> Result<Matrix, FileError> {
    if rows.len() != n {
        return Err(field(name, format!("expected {n} rows, got {}", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(field(format!("{name}[{i}]"), format!("expected {n} entries, got {}", r.len())));
        }
        finite(r, &format!("{name}[{i}]"))?;
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl BoundSpec {
    pub fn uniform(v: f64) -> Self {
        Self::Uniform(if v > 0.0 { "+inf" } else { "-inf" }.into())
    }

    pub fn from_vector(v: &Vector) -> Self {
        Self::Each(
            v.iter()
                .map(|&x| {
                    if x.is_finite() {
                        BoundValue::Num(x)
                    } else {
                        BoundValue::Token(if x > 0.0 { "+inf" } else { "-inf" }.into())
                    }
                })
                .collect(),
        )
    }

    fn resolve(&self, n: usize, name: &str) -> Result<Vector, FileError> {
        match self {
            Self::Uniform(s) => Ok(Vector::from_element(n, parse_token(s, name)?)),
            Self::Each(vals) => {
                if vals.len() != n {
                    return Err(field(name, format!("expected {n} entries, got {}", vals.len())));
                }
                let mut out = Vector::zeros(n);
                for (i, v) in vals.iter().enumerate() {
                    out[i] = match v {
                        BoundValue::Num(x) => *x,
                        BoundValue::Token(s) => parse_token(s, &format!("{name}[{i}]"))?,
                    };
                }
                Ok(out)
            }
        }
    }
}

impl OperatorSpec {
    pub fn from_operator(op: &SetValuedOperator) -> Self {
        match op {
            SetValuedOperator::Zero => Self::Zero,
            SetValuedOperator::Box { lower, upper } => Self::Box {
                l: BoundSpec::from_vector(lower),
                u: BoundSpec::from_vector(upper),
            },
            SetValuedOperator::L1 { mu } => Self::L1 { mu: *mu },
        }
    }

    pub fn build(&self, n: usize) -> Result<SetValuedOperator, FileError> {
        match self {
            Self::Zero => Ok(SetValuedOperator::Zero),
            Self::Box { l, u } => {
                let lower = l.resolve(n, "T.l")?;
                let upper = u.resolve(n, "T.u")?;
                if let Some(i) = (0..n).find(|&i| lower[i] > upper[i]) {
                    return Err(field(format!("T.l[{i}]"), "lower bound exceeds upper bound"));
                }
                Ok(SetValuedOperator::box_constraint(lower, upper)?)
            }
            Self::L1 { mu } => {
                SetValuedOperator::l1(*mu).map_err(|_| field("T.mu", "must be positive and finite"))
            }
        }
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, FileError> {
        serde_json::from_str(text).map_err(|e| FileError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, FileError> {
        let text = std::fs::read_to_string(path).map_err(|e| FileError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        format::to_json(self)
    }

    /// Dimension declared by `n` or implied by `F`.
    fn dimension(&self) -> Result<usize, FileError> {
        let implied = match &self.f {
            FunctionSpec::Affine { q, .. } => Some(q.len()),
            FunctionSpec::Quadratic { c, .. } => Some(c.len()),
            FunctionSpec::Builtin { .. } => None,
        };
        match (self.n, implied) {
            (Some(n), Some(m)) if n != m => Err(field("n", format!("declares {n} but F has dimension {m}"))),
            (Some(0), _) => Err(field("n", "must be at least 1")),
            (Some(n), _) => Ok(n),
            (None, Some(m)) if m > 0 => Ok(m),
            _ => Err(field("n", "missing or zero")),
        }
    }

    fn required<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T, FileError> {
        v.as_ref().ok_or_else(|| field(name, "missing field"))
    }

    /// Validates the file and builds the problem it describes.
    pub fn build(&self) -> Result<BuiltProblem, FileError> {
        if let FunctionSpec::Builtin { name, params } = &self.f {
            let entry = catalog::entry(name, params)?;
            return self.overlay(&entry.file).build_explicit(Some(entry.name), entry.solution);
        }
        self.build_explicit(None, None)
    }

    /// The catalog defaults in `base`, overridden by every field set here.
    fn overlay(&self, base: &ProblemFile) -> ProblemFile {
        ProblemFile {
            name: self.name.clone().or_else(|| base.name.clone()),
            n: self.n.or(base.n),
            f: base.f.clone(),
            t: self.t.clone().or_else(|| base.t.clone()),
            x0: self.x0.clone().or_else(|| base.x0.clone()),
            r: self.r.or(base.r),
            certificate: self.certificate.or(base.certificate),
        }
    }

    pub(crate) fn build_explicit(&self, builtin: Option<&str>, known: Option<Vector>) -> Result<BuiltProblem, FileError> {
        let n = match builtin {
            Some(_) => Self::required(&self.x0, "x0")?.len(),
            None => self.dimension()?,
        };
        if let (Some(decl), Some(_)) = (self.n, builtin) {
            if decl != n {
                return Err(field("n", format!("declares {decl} but x0 has {n} entries")));
            }
        }
        let op = Self::required(&self.t, "T")?.build(n)?;
        let x0 = vector(Self::required(&self.x0, "x0")?, n, "x0")?;
        let r = *Self::required(&self.r, "R")?;
        if !(r > 0.0) {
            return Err(field("R", "must be positive"));
        }
        let mode = self.certificate.unwrap_or_default();
        match mode {
            CertificateMode::Lipschitz { l } if !(l > 0.0 && l.is_finite()) => {
                return Err(field("certificate.L", "must be positive and finite"))
            }
            CertificateMode::Smale { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                return Err(field("certificate.gamma", "must be positive and finite"))
            }
            _ => {}
        }
        let problem = match (&self.f, builtin) {
            (FunctionSpec::Affine { q, m }, _) => {
                let q = vector(q, n, "F.affine.q")?;
                let m = matrix(m, n, "F.affine.M")?;
                GeProblem::affine(m, q, op, x0, r)?
            }
            (FunctionSpec::Quadratic { c, g, h }, _) => {
                let c = vector(c, n, "F.quadratic.c")?;
                let g = matrix(g, n, "F.quadratic.g")?;
                if h.len() != n {
                    return Err(field("F.quadratic.H", format!("expected {n} matrices, got {}", h.len())));
                }
                let hs = h
                    .iter()
                    .enumerate()
                    .map(|(i, hi)| matrix(hi, n, &format!("F.quadratic.H[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                GeProblem::quadratic(c, g, hs, op, x0, r)?
            }
            (FunctionSpec::Builtin { params, .. }, Some(name)) => {
                catalog::builtin_function(name, params, n, op, x0, r)?
            }
            (FunctionSpec::Builtin { name, .. }, None) => {
                return Err(field("F.builtin.name", format!("unknown builtin {name:?}")))
            }
        };
        let name = self
            .name
            .clone()
            .or_else(|| builtin.map(str::to_owned))
            .unwrap_or_else(|| "problem".into());
        Ok(BuiltProblem {
            problem: problem.with_name(name.clone()),
            name,
            mode,
            known_solution: known,
        })
    }

    /// `(M, q, T)` when `F` is affine (directly or through the catalog).
    pub fn affine_parts(&self) -> Result<AffineGe, FileError> {
        let file = match &self.f {
            FunctionSpec::Builtin { name, params } => {
                let entry = catalog::entry(name, params)?;
                if !matches!(entry.file.f, FunctionSpec::Affine { .. }) {
                    return Err(field("F", format!("builtin {name:?} is not affine")));
                }
                self.overlay(&entry.file)
            }
            _ => self.clone(),
        };
        let FunctionSpec::Affine { q, m } = &file.f else {
            return Err(field("F", "the oracle needs an affine F"));
        };
        let n = file.dimension()?;
        let op = Self::required(&file.t, "T")?.build(n)?;
        Ok(AffineGe::new(matrix(m, n, "F.affine.M")?, vector(q, n, "F.affine.q")?, op)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const QP: &str = r#"{
        "n": 2,
        "F": {"affine": {"q": [-2, -4], "M": [[2, 1], [1, 2]]}},
        "T": {"type": "box", "l": [0, 0], "u": [1, "+inf"]},
        "x0": [0, 0],
        "R": 10,
        "certificate": {"mode": "lipschitz", "L": 0.1}
    }"#;

    #[test]
    fn parses_affine_box_file() {
        let f = ProblemFile::parse(QP).unwrap();
        let b = f.build().unwrap();
        assert_eq!(b.problem.dim(), 2);
        assert_eq!(b.mode, CertificateMode::Lipschitz { l: 0.1 });
        match b.problem.op() {
            SetValuedOperator::Box { upper, .. } => assert_eq!(upper[1], f64::INFINITY),
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        match ProblemFile::parse("{\n  \"n\": 2,\n  \"F\": oops\n}") {
            Err(FileError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ProblemFile::parse(r#"{"F": {"builtin": {"name": "ncp-sqrt"}}, "bogus": 1}"#).is_err());
    }

    #[test]
    fn field_errors_name_the_field() {
        let bad = QP.replace("[[2, 1], [1, 2]]", "[[2, 1], [1]]");
        let e = ProblemFile::parse(&bad).unwrap().build().unwrap_err();
        assert!(e.to_string().contains("F.affine.M[1]"), "{e}");

        let bad = QP.replace("\"x0\": [0, 0]", "\"x0\": [0]");
        let e = ProblemFile::parse(&bad).unwrap().build().unwrap_err();
        assert!(e.to_string().contains("x0"), "{e}");

        let bad = QP.replace("\"l\": [0, 0]", "\"l\": [0, \"bogus\"]");
        let e = ProblemFile::parse(&bad).unwrap().build().unwrap_err();
        assert!(e.to_string().contains("T.l[1]"), "{e}");

        let bad = QP.replace("\"n\": 2", "\"n\": 3");
        assert!(ProblemFile::parse(&bad).unwrap().build().is_err());
    }

    #[test]
    fn uniform_bounds() {
        let text = r#"{"F": {"affine": {"q": [1], "M": [[1]]}}, "T": {"type": "box", "l": "-inf", "u": "+inf"}, "x0": [0], "R": 1}"#;
        let b = ProblemFile::parse(text).unwrap().build().unwrap();
        assert_eq!(b.mode, CertificateMode::None);
        assert_eq!(b.problem.op().bounds(1).unwrap().0[0], f64::NEG_INFINITY);
    }

    #[test]
    fn quadratic_file() {
        let text = r#"{"F": {"quadratic": {"c": [-1], "g": [[0]], "H": [[[2]]]}}, "T": {"type": "zero"}, "x0": [2], "R": 2}"#;
        let b = ProblemFile::parse(text).unwrap().build().unwrap();
        let x = Vector::from_element(1, 3.0);
        assert_eq!(b.problem.eval_f(&x)[0], 8.0);
        assert_eq!(b.problem.eval_j(&x)[(0, 0)], 6.0);
    }

    #[test]
    fn builtin_overrides() {
        let text = r#"{"F": {"builtin": {"name": "ncp-sqrt"}}, "certificate": {"mode": "lipschitz", "L": 0.1}}"#;
        let b = ProblemFile::parse(text).unwrap().build().unwrap();
        assert_eq!(b.mode, CertificateMode::Lipschitz { l: 0.1 });
        assert_eq!(b.problem.x0()[0], 2.0);
        assert_eq!(b.known_solution.unwrap()[0], 1.0);
    }

    fn num() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6f64..1e6, proptest::num::f64::NORMAL]
    }

    fn problem_file() -> impl Strategy<Value = ProblemFile> {
        (1usize..4).prop_flat_map(|n| {
            (
                proptest::collection::vec(num(), n),
                proptest::collection::vec(proptest::collection::vec(num(), n), n),
                proptest::collection::vec(num(), n),
                proptest::collection::vec(proptest::option::of(num()), n),
                num(),
                prop_oneof![
                    Just(CertificateMode::None),
                    num().prop_map(|l| CertificateMode::Lipschitz { l }),
                    num().prop_map(|gamma| CertificateMode::Smale { gamma }),
                ],
            )
                .prop_map(move |(q, m, x0, lower, r, cert)| ProblemFile {
                    name: Some("roundtrip".into()),
                    n: Some(n),
                    f: FunctionSpec::Affine { q, m },
                    t: Some(OperatorSpec::Box {
                        l: BoundSpec::Each(
                            lower
                                .into_iter()
                                .map(|v| v.map(BoundValue::Num).unwrap_or(BoundValue::Token("-inf".into())))
                                .collect(),
                        ),
                        u: BoundSpec::Uniform("+inf".into()),
                    }),
                    x0: Some(x0),
                    r: Some(r),
                    certificate: Some(cert),
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(file in problem_file()) {
            let text = file.to_json();
            let back = ProblemFile::parse(&text).unwrap();
            prop_assert_eq!(&back, &file);
            prop_assert_eq!(back.to_json(), text);
        }
    }
}
