//! `genewton`: solve, certify and cross-check generalized equations from
//! JSON problem files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use genewton::harness::problem_file::BuiltProblem;
use genewton::harness::report::{self, EXIT_MALFORMED};
use genewton::harness::{catalog, FileError, ProblemFile, CATALOG_NAMES};
use genewton::{Error, MethodChoice, OuterConfig};

#[derive(Parser)]
#[command(name = "genewton", version)]
#[command(about = "Josephy-Newton solver for 0 in F(x) + T(x) with majorant certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Newton iteration and report the trace and certificate
    Solve {
        #[command(flatten)]
        input: Input,
        /// Natural-residual tolerance (default 1e-10 (1 + ||F(x0)||))
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        report: ReportFormat,
        /// Seed for the sampled constant checks
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip sampling the user's L or gamma before trusting it
        #[arg(long)]
        no_bound_check: bool,
    },
    /// One Newton step, the certificate and the scalar sequence t_k
    Certify {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
    },
    /// Compare enumeration, semismooth Newton and forward-backward on an
    /// affine problem with a box operator (n <= 12)
    Oracle {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// List or export builtin problems
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List,
    /// Write a builtin problem as an explicit problem file
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    /// Problem file, or a directory of `*.json` problem files
    #[arg(long, required_unless_present = "catalog", conflicts_with = "catalog")]
    problem: Option<PathBuf>,
    /// Builtin problem name
    #[arg(long)]
    catalog: Option<String>,
    /// Report file (or directory in batch mode); stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Ssn,
    Fb,
}

impl From<Method> for MethodChoice {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => MethodChoice::Auto,
            Method::Ssn => MethodChoice::ActiveSetNewton,
            Method::Fb => MethodChoice::ForwardBackward,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    fn extension(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
        }
    }
}

/// A rendered report and its exit code, or a diagnostic.
type Outcome = Result<(String, i32), String>;

struct Job {
    label: String,
    file: Result<ProblemFile, FileError>,
}

fn jobs(input: &Input) -> Result<(Vec<Job>, bool), String> {
    if let Some(name) = &input.catalog {
        let file = ProblemFile {
            name: None,
            n: None,
            f: genewton::harness::problem_file::FunctionSpec::Builtin {
                name: name.clone(),
                params: BTreeMap::new(),
            },
            t: None,
            x0: None,
            r: None,
            certificate: None,
        };
        return Ok((vec![Job { label: name.clone(), file: Ok(file) }], false));
    }
    let path = input.problem.as_ref().expect("clap enforces one source");
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| format!("{}: {e}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let jobs = files
            .into_iter()
            .map(|p| Job {
                label: p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                file: ProblemFile::load(&p),
            })
            .collect();
        Ok((jobs, true))
    } else {
        Ok((vec![Job { label: path.display().to_string(), file: ProblemFile::load(path) }], false))
    }
}

fn build(job: &Job) -> Result<BuiltProblem, String> {
    let file = job.file.as_ref().map_err(|e| format!("{}: {e}", job.label))?;
    file.build().map_err(|e| format!("{}: {e}", job.label))
}

fn run_all<F>(input: &Input, ext: &str, run: F) -> ExitCode
where
    F: Fn(&Job) -> Outcome + Sync,
{
    let (jobs, batch) = match jobs(input) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_MALFORMED as u8);
        }
    };
    let outcomes: Vec<Outcome> = jobs.par_iter().map(&run).collect();
    let mut worst = 0;
    if batch {
        if let Some(dir) = &input.out {
            if let Err(e) = fs::create_dir_all(dir) {
                eprintln!("error: {}: {e}", dir.display());
                return ExitCode::from(EXIT_MALFORMED as u8);
            }
        }
    }
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let code = match outcome {
            Ok((text, code)) => {
                let target = match (&input.out, batch) {
                    (Some(dir), true) => Some(dir.join(format!("{}.{ext}", job.label))),
                    (Some(file), false) => Some(file.clone()),
                    (None, _) => None,
                };
                match target {
                    Some(path) => {
                        if let Err(e) = write(&path, &text) {
                            eprintln!("error: {e}");
                            return ExitCode::from(EXIT_MALFORMED as u8);
                        }
                    }
                    None => print!("{text}"),
                }
                code
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                EXIT_MALFORMED
            }
        };
        worst = worst.max(code);
    }
    ExitCode::from(worst as u8)
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve {
            input,
            tol,
            max_iter,
            method,
            report: format,
            seed,
            no_bound_check,
        } => {
            if tol.is_some_and(|t| t.is_nan() || t <= 0.0) {
                eprintln!("error: --tol must be positive");
                return ExitCode::from(EXIT_MALFORMED as u8);
            }
            let cfg = OuterConfig {
                tol_outer: tol,
                max_outer: max_iter,
                inner: method.into(),
                bound_check: !no_bound_check,
                seed,
                ..OuterConfig::default()
            };
            run_all(&input, format.extension(), |job| {
                let built = build(job)?;
                let r = report::run_solve(&built, cfg.clone());
                let text = match format {
                    ReportFormat::Json => r.to_json(),
                    ReportFormat::Csv => r.to_csv(),
                };
                for w in &r.warnings {
                    eprintln!("warning: {}: {w}", job.label);
                }
                Ok((text, r.exit_code))
            })
        }
        Command::Certify { input, method } => run_all(&input, "json", |job| {
            let built = build(job)?;
            let r = report::run_certify(&built, method.into());
            if let Some(reason) = &r.reason {
                eprintln!("certificate: {}: {reason}", job.label);
            }
            Ok((r.to_json(), r.exit_code))
        }),
        Command::Oracle { input, tol } => run_all(&input, "json", |job| {
            let file = job.file.as_ref().map_err(|e| format!("{}: {e}", job.label))?;
            let p = file.affine_parts().map_err(|e| format!("{}: {e}", job.label))?;
            if !p.op.is_box_like() {
                return Err(format!("{}: the oracle needs a box (or zero) operator", job.label));
            }
            let name = file.name.clone().unwrap_or_else(|| job.label.clone());
            match report::run_oracle(&name, &p, tol) {
                Ok(r) => {
                    for m in &r.methods {
                        if let Some(e) = &m.error {
                            eprintln!("{}: {}: {e}", job.label, m.method);
                        }
                    }
                    Ok((r.to_json(), r.exit_code))
                }
                Err(e @ Error::TooLarge { .. }) => Err(format!("{}: refused: {e}", job.label)),
                Err(e) => Err(format!("{}: {e}", job.label)),
            }
        }),
        Command::Catalog { action } => match action {
            CatalogAction::List => {
                for e in catalog::all() {
                    println!("{:<14} {}", e.name, e.description);
                }
                ExitCode::SUCCESS
            }
            CatalogAction::Export { name, out } => {
                if !CATALOG_NAMES.contains(&name.as_str()) {
                    eprintln!("error: unknown builtin {name:?}; known: {}", CATALOG_NAMES.join(", "));
                    return ExitCode::from(EXIT_MALFORMED as u8);
                }
                let e = catalog::entry(&name, &BTreeMap::new()).expect("catalog defaults are valid");
                let text = e.file.to_json();
                match out {
                    Some(path) => {
                        if let Err(e) = write(&path, &text) {
                            eprintln!("error: {e}");
                            return ExitCode::from(EXIT_MALFORMED as u8);
                        }
                    }
                    None => print!("{text}"),
                }
                ExitCode::SUCCESS
            }
        },
    }
}
