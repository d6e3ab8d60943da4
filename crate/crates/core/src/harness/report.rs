//! Machine-readable run reports.
//!
//! JSON reports carry `"schema": 1`. The CSV report holds the iteration
//! table only, with columns in this fixed order:
//!
//! `k, t_k, step_norm, gap, residual, apriori_bound, in_Kt,
//!  aposteriori_bound, inner_method, inner_iterations, x[0], ..., x[n-1]`
//!
//! Cells that do not apply (for example every certificate column in an
//! uncertified run) are empty.

use std::io;

use serde::Serialize;

use super::format::{fmt_f64, fmt_opt, to_json};
use super::problem_file::BuiltProblem;
use crate::error::Error;
use crate::inner::{self, AffineGe, InnerMethod, MethodChoice};
use crate::linop::Vector;
use crate::newton::{self, CertificateMode, CertificateReport, IterationRecord, OuterConfig, SolveStatus, SolveTrace};

pub const SCHEMA: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATE_INFEASIBLE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_MALFORMED: i32 = 64;

pub const CSV_COLUMNS: [&str; 10] = [
    "k",
    "t_k",
    "step_norm",
    "gap",
    "residual",
    "apriori_bound",
    "in_Kt",
    "aposteriori_bound",
    "inner_method",
    "inner_iterations",
];

pub fn exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::CertificateInfeasible => EXIT_CERTIFICATE_INFEASIBLE,
        SolveStatus::MaxIter | SolveStatus::InnerFailure => EXIT_NOT_CONVERGED,
    }
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRow {
    pub k: usize,
    pub t_k: Option<f64>,
    pub step_norm: Option<f64>,
    pub gap: Option<f64>,
    pub residual: f64,
    pub apriori_bound: Option<f64>,
    #[serde(rename = "in_Kt")]
    pub in_kt: Option<bool>,
    pub aposteriori_bound: Option<f64>,
    pub inner_method: Option<InnerMethod>,
    pub inner_iterations: Option<usize>,
    pub x: Vec<f64>,
}

impl From<&IterationRecord> for IterationRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            k: r.k,
            t_k: r.t_k,
            step_norm: r.step_norm,
            gap: r.gap,
            residual: r.residual,
            apriori_bound: r.apriori_bound,
            in_kt: r.in_kt,
            aposteriori_bound: r.aposteriori_bound,
            inner_method: r.inner_method,
            inner_iterations: r.inner_iterations,
            x: to_vec(&r.x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginBlock {
    pub f0: f64,
    pub slope_defect: f64,
    pub min_slope_increment: f64,
    pub h3: f64,
    pub h4: Option<f64>,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateBlock {
    pub mode: &'static str,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub beta: f64,
    pub b: f64,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub t_star: f64,
    pub t_bar: f64,
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub h4: bool,
    #[serde(rename = "rate_Q")]
    pub rate_q: Option<f64>,
    pub margins: MarginBlock,
}

impl From<&CertificateReport> for CertificateBlock {
    fn from(c: &CertificateReport) -> Self {
        let h = &c.hypotheses;
        let (mode, l) = match c.mode {
            CertificateMode::None => ("none", None),
            CertificateMode::Lipschitz { l } => ("lipschitz", Some(l)),
            CertificateMode::Smale { .. } => ("smale", None),
        };
        Self {
            mode,
            l,
            beta: c.beta,
            b: c.b,
            k: c.k,
            gamma: c.gamma,
            alpha: c.certificate.alpha,
            t_star: c.certificate.t_star,
            t_bar: c.certificate.t_bar,
            h1: h.h1,
            h2: h.h2,
            h3: h.h3,
            h4: h.h4,
            rate_q: c.certificate.rate_q,
            margins: MarginBlock {
                f0: h.margins.f0,
                slope_defect: h.margins.slope_defect,
                min_slope_increment: h.margins.min_slope_increment,
                h3: h.margins.h3,
                h4: h.margins.h4,
                grid_points: h.grid_points,
            },
        }
    }
}

/// Report of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: &'static str,
    pub problem: String,
    pub status: SolveStatus,
    pub exit_code: i32,
    pub tol_outer: f64,
    pub residual_lambda: f64,
    pub certified: bool,
    pub solution: Option<Vec<f64>>,
    pub iterations: Vec<IterationRow>,
    pub certificate: Option<CertificateBlock>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn from_trace(problem: &str, trace: &SolveTrace) -> Self {
        Self {
            schema: SCHEMA,
            command: "solve",
            problem: problem.to_owned(),
            status: trace.status,
            exit_code: exit_code(trace.status),
            tol_outer: trace.tol_outer,
            residual_lambda: 1.0,
            certified: trace.certified,
            solution: trace.solution.as_ref().map(to_vec),
            iterations: trace.records.iter().map(IterationRow::from).collect(),
            certificate: trace.certificate.as_ref().map(CertificateBlock::from),
            warnings: trace.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    /// Writes the iteration table as CSV.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let n = self.iterations.first().map_or(0, |r| r.x.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend((0..n).map(|i| format!("x[{i}]")));
        w.write_record(&header)?;
        for r in &self.iterations {
            let mut row = vec![
                r.k.to_string(),
                fmt_opt(r.t_k),
                fmt_opt(r.step_norm),
                fmt_opt(r.gap),
                fmt_f64(r.residual),
                fmt_opt(r.apriori_bound),
                r.in_kt.map(|b| b.to_string()).unwrap_or_default(),
                fmt_opt(r.aposteriori_bound),
                r.inner_method.map(|m| m.to_string()).unwrap_or_default(),
                r.inner_iterations.map(|i| i.to_string()).unwrap_or_default(),
            ];
            row.extend(r.x.iter().map(|&v| fmt_f64(v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

/// Solves a built problem with the certificate mode it requests.
pub fn run_solve(built: &BuiltProblem, mut cfg: OuterConfig) -> RunReport {
    cfg.mode = built.mode;
    let trace = newton::solve(&built.problem, &cfg);
    RunReport::from_trace(&built.name, &trace)
}

/// Report of `certify`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub schema: u32,
    pub command: &'static str,
    pub problem: String,
    pub feasible: bool,
    pub exit_code: i32,
    pub x1: Option<Vec<f64>>,
    pub certificate: Option<CertificateBlock>,
    pub t_table: Vec<f64>,
    /// Positive by how much a feasibility condition is missed.
    pub margin: Option<f64>,
    pub reason: Option<String>,
}

impl CertifyReport {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// One Newton step, the certificate and its scalar sequence.
pub fn run_certify(built: &BuiltProblem, inner: MethodChoice) -> CertifyReport {
    let mut report = CertifyReport {
        schema: SCHEMA,
        command: "certify",
        problem: built.name.clone(),
        feasible: false,
        exit_code: EXIT_CERTIFICATE_INFEASIBLE,
        x1: None,
        certificate: None,
        t_table: Vec::new(),
        margin: None,
        reason: None,
    };
    if !built.mode.is_certified() {
        report.reason = Some("no certificate requested (mode none)".into());
        return report;
    }
    match newton::certify(&built.problem, built.mode, inner) {
        Ok((c, t)) => {
            report.feasible = true;
            report.exit_code = EXIT_OK;
            report.margin = Some(c.hypotheses.margins.h3);
            report.certificate = Some(CertificateBlock::from(&c));
            report.t_table = t;
        }
        Err(Error::CertificateInfeasible { reason, margin }) => {
            report.margin = Some(margin);
            report.reason = Some(reason);
        }
        Err(e) => {
            report.exit_code = EXIT_NOT_CONVERGED;
            report.reason = Some(e.to_string());
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub method: String,
    pub solution: Option<Vec<f64>>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

/// Report of `oracle`: every inner solver on one affine problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub schema: u32,
    pub command: &'static str,
    pub problem: String,
    pub n: usize,
    pub exit_code: i32,
    pub methods: Vec<OracleRow>,
    /// `agreement[i][j] = ||z_i - z_j||_inf`, `null` when either failed.
    pub agreement: Vec<Vec<Option<f64>>>,
    pub max_disagreement: Option<f64>,
}

impl OracleReport {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// Runs enumeration, semismooth Newton and forward-backward on `p`.
pub fn run_oracle(name: &str, p: &AffineGe, tol: f64) -> Result<OracleReport, Error> {
    let n = p.dim();
    if n > inner::ENUMERATION_MAX_DIM {
        return Err(Error::TooLarge {
            what: "oracle dimension",
            n,
            max: inner::ENUMERATION_MAX_DIM,
        });
    }
    let results = [
        ("enumeration", inner::enumerate_oracle(p)),
        (
            "semismooth_newton",
            inner::semismooth_newton(p, tol, inner::DEFAULT_SSN_MAX_ITER, None),
        ),
        (
            "forward_backward",
            inner::forward_backward(p, tol, inner::DEFAULT_FB_MAX_ITER, None),
        ),
    ];
    let methods: Vec<OracleRow> = results
        .iter()
        .map(|(m, r)| match r {
            Ok(s) => OracleRow {
                method: (*m).into(),
                solution: Some(to_vec(&s.z)),
                residual: Some(s.residual),
                iterations: Some(s.iterations),
                error: None,
            },
            Err(e) => OracleRow {
                method: (*m).into(),
                solution: None,
                residual: None,
                iterations: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let agreement: Vec<Vec<Option<f64>>> = results
        .iter()
        .map(|(_, a)| {
            results
                .iter()
                .map(|(_, b)| match (a, b) {
                    (Ok(a), Ok(b)) => Some((&a.z - &b.z).amax()),
                    _ => None,
                })
                .collect()
        })
        .collect();
    let all_ok = results.iter().all(|(_, r)| r.is_ok());
    let max_disagreement = all_ok.then(|| agreement.iter().flatten().flatten().fold(0.0f64, |a, &b| a.max(b)));
    Ok(OracleReport {
        schema: SCHEMA,
        command: "oracle",
        problem: name.into(),
        n,
        exit_code: if all_ok { EXIT_OK } else { EXIT_NOT_CONVERGED },
        methods,
        agreement,
        max_disagreement,
    })
}
