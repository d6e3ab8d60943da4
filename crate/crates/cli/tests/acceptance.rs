//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use genewton::derivative::check_smale_bound;
use genewton::harness::catalog;
use genewton::harness::problem_file::{BoundSpec, BoundValue, BuiltProblem, FunctionSpec, OperatorSpec};
use genewton::harness::ProblemFile;
use genewton::inner::{self, enumerate_oracle, forward_backward, semismooth_newton};
use genewton::newton::{self, certified_uniqueness_probe, uniqueness_probe, verify_error_bound};
use genewton::{exec, CertificateMode, GeProblem, MajorantSpec, Matrix, OuterConfig, SetValuedOperator, SolveStatus, Vector};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn builtin(name: &str) -> BuiltProblem {
    catalog::entry(name, &BTreeMap::new()).unwrap().build().unwrap()
}

fn certified_solve(b: &BuiltProblem, tol: f64) -> genewton::SolveTrace {
    newton::solve(&b.problem, &OuterConfig::certified(b.mode).with_tol(tol))
}

fn ac1() -> Outcome {
    let b = builtin("ncp-sqrt");
    let tr = certified_solve(&b, 1e-13);
    ensure(tr.status == SolveStatus::Converged && tr.certified, || format!("status {} certified {}", tr.status, tr.certified))?;
    let xs = [2.0, 1.25, 1.025, 1.000_304_878_048_780_5];
    let ts = [0.0, 0.75, 0.975, 0.999_695_121_951_219_5];
    for k in 0..4 {
        let r = &tr.records[k];
        ensure((r.x[0] - xs[k]).abs() <= 1e-10, || format!("x_{k} = {} expected {}", r.x[0], xs[k]))?;
        let t = r.t_k.ok_or("missing t_k")?;
        ensure((t - ts[k]).abs() <= 1e-10, || format!("t_{k} = {t} expected {}", ts[k]))?;
        let gap = r.gap.ok_or("missing gap")?;
        ensure(gap.abs() <= 1e-10, || format!("|step - dt| = {} at k = {k}", gap.abs()))?;
    }
    let t_star = tr.certificate.as_ref().unwrap().certificate.t_star;
    ensure((t_star - 1.0).abs() <= 1e-12, || format!("t* = {t_star}"))?;
    let max_gap = tr.records.iter().take(4).filter_map(|r| r.gap).fold(0.0f64, |a, g| a.max(g.abs()));
    Ok(format!("max |step - (t_k+1 - t_k)| = {max_gap:.1e} for k <= 3, t* = {t_star}"))
}

fn ac2() -> Outcome {
    let mut notes = Vec::new();
    for name in ["ncp-sqrt", "exp-root", "qp-kkt-2d"] {
        let b = builtin(name);
        let x_star = b.known_solution.clone().unwrap();
        let tr = certified_solve(&b, 1e-14);
        ensure(tr.certified && tr.status == SolveStatus::Converged, || format!("{name}: status {}", tr.status))?;
        let c = &tr.certificate.as_ref().unwrap().certificate;
        let errs: Vec<f64> = tr.iterates().map(|x| (x - &x_star).norm()).collect();
        let mut worst_ratio = 0.0f64;
        for (k, r) in tr.records.iter().enumerate() {
            if let Some(g) = r.gap {
                ensure(g >= -1e-8, || format!("{name}: gap {g} at k = {k}"))?;
            }
            let t = r.t_k.ok_or_else(|| format!("{name}: missing t_k at {k}"))?;
            ensure(errs[k] <= c.t_star - t + 1e-8, || format!("{name}: a priori bound fails at k = {k}"))?;
            if k + 1 < errs.len() {
                let t_next = tr.records[k + 1].t_k.unwrap();
                ensure(errs[k + 1] <= 0.5 * errs[k] + 1e-15, || format!("{name}: error halving fails at k = {k}"))?;
                ensure(c.t_star - t_next <= 0.5 * (c.t_star - t) + 1e-15, || format!("{name}: t halving fails at k = {k}"))?;
                if let (true, Some(q)) = (c.h4_holds, c.rate_q) {
                    if errs[k] > 1e-7 {
                        let ratio = errs[k + 1] / (errs[k] * errs[k]);
                        worst_ratio = worst_ratio.max(ratio / q);
                        ensure(ratio <= 1.05 * q, || format!("{name}: ratio {ratio} > 1.05 rate_Q = {}", 1.05 * q))?;
                    }
                }
            }
        }
        notes.push(format!("{name}: {} its, ratio/rate_Q <= {worst_ratio:.3}", tr.iterations()));
    }
    Ok(notes.join("; "))
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for i in 0..500 {
        let k: f64 = rng.random_range(0.1..10.0);
        let ratio: f64 = rng.random_range(0.001..0.99);
        let b = ratio / (2.0 * k);
        let spec = MajorantSpec::lipschitz(k, b).map_err(|e| e.to_string())?;
        let cert = spec.smallest_zero().map_err(|e| e.to_string())?;
        let printed = (1.0 - (1.0 - 2.0 * b * k).sqrt()) / k;
        let bis = spec.bisect_smallest_zero().ok_or("bisection found no zero")?;
        let d = (cert.t_star - bis).abs().max((cert.t_star - printed).abs());
        worst = worst.max(d);
        ensure(d <= 1e-12, || format!("case {i}: K = {k}, b = {b}: closed {} bisection {bis} printed {printed}", cert.t_star))?;
        let tr = spec.scalar_sequence(1e-14, 200).map_err(|e| e.to_string())?;
        ensure(tr.converged, || format!("case {i}: scalar sequence did not converge"))?;
        ensure(tr.t_values.windows(2).all(|w| w[1] >= w[0] && w[1] <= cert.t_star + 1e-15), || format!("case {i}: not monotone"))?;
        let last = *tr.t_values.last().unwrap();
        ensure((cert.t_star - last).abs() <= 1e-12, || format!("case {i}: sequence ends at {last}"))?;
    }
    Ok(format!("500 cases, max |closed - bisection| = {worst:.1e}"))
}

fn ac4() -> Outcome {
    let b = builtin("exp-root");
    let (rep, _) = newton::certify(&b.problem, b.mode, genewton::MethodChoice::Auto).map_err(|e| e.to_string())?;
    let alpha = rep.certificate.alpha.unwrap();
    ensure((rep.b - 0.1).abs() <= 1e-12 && (alpha - 0.05).abs() <= 1e-12, || format!("b = {}, alpha = {alpha}", rep.b))?;
    let t_star = rep.certificate.t_star;
    let bis = rep.spec.bisect_smallest_zero().ok_or("no bisection zero")?;
    ensure((t_star - bis).abs() <= 1e-12, || format!("closed {t_star} vs bisection {bis}"))?;
    ensure((t_star - 0.105_924).abs() <= 5e-7, || format!("t* = {t_star}"))?;

    let tr = certified_solve(&b, 1e-15);
    ensure(tr.certified && tr.status == SolveStatus::Converged, || format!("status {}", tr.status))?;
    let x = tr.solution.as_ref().unwrap()[0];
    ensure((x - 1.1f64.ln()).abs() <= 1e-12, || format!("solution {x}"))?;
    ensure(tr.iterates().all(|xk| (xk - b.problem.x0()).norm() <= t_star), || "iterate left B[x0, t*]".into())?;

    let good = check_smale_bound(&b.problem, 0.5, 1000, 4).map_err(|e| e.to_string())?;
    ensure(good.witness.is_none(), || format!("gamma = 0.5 rejected: {:?}", good.witness))?;
    let bad = check_smale_bound(&b.problem, 0.1, 1000, 4).map_err(|e| e.to_string())?;
    ensure(bad.witness.is_some(), || "gamma = 0.1 not rejected".into())?;
    Ok(format!(
        "t* = {t_star:.9} (|closed - bisection| = {:.1e}), x = {x:.16}, {} its, F'' ratio {:.3} (gamma 0.1: {:.2})",
        (t_star - bis).abs(),
        tr.iterations(),
        good.max_ratio,
        bad.max_ratio
    ))
}

fn ac5() -> Outcome {
    let results = exec::map_range(500, |i| -> Result<(f64, f64), String> {
        let n = 1 + i % 8;
        let p = catalog::random_affine_box(n, 1000 + i as u64);
        let ctx = |m: &str, e: genewton::Error| format!("instance {i} (n = {n}) {m}: {e}");
        let z_enum = enumerate_oracle(&p).map_err(|e| ctx("enumeration", e))?;
        let z_ssn = semismooth_newton(&p, 1e-12, inner::DEFAULT_SSN_MAX_ITER, None).map_err(|e| ctx("ssn", e))?;
        let z_fb = forward_backward(&p, 1e-12, inner::DEFAULT_FB_MAX_ITER, None).map_err(|e| ctx("fb", e))?;
        let zs = [&z_enum.z, &z_ssn.z, &z_fb.z];
        let mut dist = 0.0f64;
        for a in zs {
            for b in zs {
                dist = dist.max((a - b).norm());
            }
        }
        let res = zs.iter().map(|z| p.residual(z)).fold(0.0f64, f64::max);
        Ok((dist, res))
    });
    let mut worst = (0.0f64, 0.0f64);
    for (i, r) in results.into_iter().enumerate() {
        let (d, res) = r?;
        ensure(d <= 1e-8, || format!("instance {i}: disagreement {d}"))?;
        ensure(res <= 1e-10, || format!("instance {i}: residual {res}"))?;
        worst = (worst.0.max(d), worst.1.max(res));
    }
    Ok(format!("500 instances, max disagreement {:.1e}, max residual {:.1e}", worst.0, worst.1))
}

fn ac6() -> Outcome {
    let mut notes = Vec::new();
    for name in ["ncp-sqrt", "exp-root", "qp-kkt-2d", "l1-prox-ge"] {
        let b = builtin(name);
        let tr = certified_solve(&b, 1e-13);
        let r = certified_uniqueness_probe(&b.problem, &tr, 20, 6, 1e-8).map_err(|e| format!("{name}: {e}"))?;
        ensure(r.unique, || format!("{name}: {:?}", r.first_violation()))?;
        let agree = r.trials.iter().filter(|t| t.outcome == newton::ProbeOutcome::Agrees).count();
        notes.push(format!("{name} {agree}/20"));
    }
    let control = GeProblem::new(
        1,
        |x| Vector::from_element(1, x[0] * x[0] - 1.0),
        |x| Matrix::from_element(1, 1, 2.0 * x[0]),
        SetValuedOperator::Zero,
        Vector::from_element(1, 0.5),
        2.0,
    )
    .map_err(|e| e.to_string())?;
    let r = uniqueness_probe(&control, &Vector::from_element(1, 1.0), 2.0, 20, 6, 1e-8);
    ensure(!r.unique, || "control: second root not found".into())?;
    Ok(format!("agreeing starts: {}; control finds another root", notes.join(", ")))
}

/// `F_i(x) = c_i + g_i . x + x_i^2` with skew `g`: `L = 2` exactly.
fn quadratic_2d() -> GeProblem {
    let h = vec![
        Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]),
        Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]),
    ];
    GeProblem::quadratic(
        Vector::from_vec(vec![-5.0, -7.5]),
        Matrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]),
        h,
        SetValuedOperator::nonnegative_orthant(2),
        Vector::from_vec(vec![2.0, 3.0]),
        2.0,
    )
    .unwrap()
}

fn ac7() -> Outcome {
    let mut notes = Vec::new();
    for (label, p) in [("ncp-sqrt", builtin("ncp-sqrt").problem), ("quadratic-2d", quadratic_2d())] {
        let (rep, _) = newton::certify(&p, CertificateMode::Lipschitz { l: 2.0 }, genewton::MethodChoice::Auto)
            .map_err(|e| format!("{label}: {e}"))?;
        let r = verify_error_bound(&p, &rep.spec, 1000, 7).map_err(|e| format!("{label}: {e}"))?;
        ensure(r.error_violations.is_empty(), || format!("{label}: {:?}", r.error_violations.first()))?;
        ensure(r.inverse_violations.is_empty(), || format!("{label}: {:?}", r.inverse_violations.first()))?;
        notes.push(format!("{label} max ratio {:.6}", r.max_ratio));
    }
    Ok(format!("1000 draws each, {}", notes.join(", ")))
}

fn cli(args: &[&str]) -> (Vec<u8>, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_genewton")).args(args).output().expect("run genewton");
    (out.stdout, out.status.code().unwrap_or(-1))
}

fn random_file(rng: &mut ChaCha8Rng) -> ProblemFile {
    let n = rng.random_range(1..5);
    let mut num = || {
        if rng.random_bool(0.5) {
            f64::from_bits(rng.random::<u64>() & !(0x7ffu64 << 52) | ((rng.random_range(900u64..1150)) << 52))
        } else {
            rng.random_range(-1e3..1e3)
        }
    };
    let q: Vec<f64> = (0..n).map(|_| num()).collect();
    let m: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| num()).collect()).collect();
    let x0: Vec<f64> = (0..n).map(|_| num()).collect();
    let l: Vec<BoundValue> = (0..n).map(|i| if i % 2 == 0 { BoundValue::Token("-inf".into()) } else { BoundValue::Num(num()) }).collect();
    ProblemFile {
        name: Some("random".into()),
        n: Some(n),
        f: FunctionSpec::Affine { q, m },
        t: Some(OperatorSpec::Box { l: BoundSpec::Each(l), u: BoundSpec::Uniform("+inf".into()) }),
        x0: Some(x0),
        r: Some(num().abs()),
        certificate: Some(CertificateMode::Smale { gamma: num().abs() }),
    }
}

fn ac8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = 0;
    for name in catalog::CATALOG_NAMES {
        for args in [
            vec!["solve", "--catalog", name],
            vec!["solve", "--catalog", name, "--report", "csv"],
            vec!["certify", "--catalog", name],
        ] {
            let a = cli(&args);
            let b = cli(&args);
            ensure(a == b, || format!("{args:?} differs between runs"))?;
            ensure(!a.0.is_empty(), || format!("{args:?} printed nothing"))?;
            runs += 1;
        }
        let exported = dir.path().join(format!("{name}.json"));
        let path = exported.to_str().unwrap();
        let (_, code) = cli(&["catalog", "export", name, "--out", path]);
        ensure(code == 0, || format!("export {name} failed"))?;
        let text = std::fs::read_to_string(&exported).map_err(|e| e.to_string())?;
        let file = ProblemFile::parse(&text).map_err(|e| e.to_string())?;
        ensure(file.to_json() == text, || format!("{name}: export does not re-serialize identically"))?;
        let from_catalog = cli(&["solve", "--catalog", name]);
        let from_file = cli(&["solve", "--problem", path]);
        ensure(from_catalog == from_file, || format!("{name}: exported file solves differently"))?;
    }
    let a = cli(&["oracle", "--catalog", "affine-box-nd"]);
    ensure(a == cli(&["oracle", "--catalog", "affine-box-nd"]), || "oracle output differs".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1000 {
        let f = random_file(&mut rng);
        let text = f.to_json();
        let back = ProblemFile::parse(&text).map_err(|e| format!("file {i}: {e}"))?;
        ensure(back == f, || format!("file {i}: values changed on round trip"))?;
        ensure(back.to_json() == text, || format!("file {i}: text changed on round trip"))?;
    }
    Ok(format!("{runs} repeated CLI runs byte-identical, 5 exports + 1000 random files round-trip exactly"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("AC1", "tight majorant on ncp-sqrt", ac1),
        ("AC2", "error bounds and rates", ac2),
        ("AC3", "Lipschitz closed form vs bisection", ac3),
        ("AC4", "Smale case on exp-root", ac4),
        ("AC5", "inner solver agreement", ac5),
        ("AC6", "uniqueness probe", ac6),
        ("AC7", "sampled linearization and inverse bounds", ac7),
        ("AC8", "determinism and round trip", ac8),
    ];
    let mut failed = 0;
    for (id, title, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS {title} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("{id} FAIL {title} ({secs:.2}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
