//! Command-line front end: admissibility checks, solves, identity
//! verification, convergence studies, estimate checks, and sweeps.
//!
//! Exit codes: 0 success, 1 I/O or validation failure, 2 a requested check
//! did not hold (inadmissible coefficients, failed tolerance), 3 numerical
//! failure (singular system or reduction).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

use dispersive_bvp::discretize::{assemble, solve_linear, DiscretizeError, Grid};
use dispersive_bvp::model::{reduce_raw_forms, validate_spec, BoundaryCoefficients, ProblemSpec};
use dispersive_bvp::polycalc::{lemma_residual, Identity, Polynomial};
use dispersive_bvp::verify::{
    convergence_study, estimate_check, sweep, sweep_csv, ErrorReference, SweepConfig, VerifyError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXIT_OK: i32 = 0;
const EXIT_INVALID: i32 = 1;
const EXIT_CHECK_FAILED: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "dispersive",
    version,
    about = "Admissibility analysis and high-order collocation solves for stationary \
             dispersive boundary value problems on an interval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the admissibility margins of a problem spec
    Check {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Solve the boundary value problem; writes solution.csv / solution.json
    Solve {
        #[arg(long)]
        spec: PathBuf,
        /// Grid size (number of nodes)
        #[arg(long, default_value_t = 201)]
        n: usize,
        /// Accuracy order (2 or 4)
        #[arg(long, default_value_t = 4, value_parser = parse_accuracy)]
        p: usize,
        /// Output directory for report files
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check the integration-by-parts identities on random polynomials
    VerifyLemmas {
        /// Largest order parameter to exercise
        #[arg(long = "max-l", default_value_t = 5)]
        max_l: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mesh-refinement (manufactured solution) convergence study
    Mms {
        #[arg(long)]
        spec: PathBuf,
        /// Comma-separated study grid sizes
        #[arg(long, default_value = "41,81,161", value_delimiter = ',')]
        grids: Vec<usize>,
        /// Reference grid for self-convergence; must nest every study grid
        #[arg(long = "ref-n", default_value_t = 1281)]
        ref_n: usize,
        #[arg(long, default_value_t = 4, value_parser = parse_accuracy)]
        p: usize,
        /// Minimum acceptable fitted order (default p - 0.5)
        #[arg(long = "min-order")]
        min_order: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A priori estimate check for one spec
    Estimates {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 201)]
        n: usize,
        #[arg(long, default_value_t = 4, value_parser = parse_accuracy)]
        p: usize,
        /// Tolerance on lambda ||u|| / ||f|| <= 1 + tol
        #[arg(long = "tol-l2", default_value_t = 1e-3)]
        tol_l2: f64,
        /// Tolerance on the trace bound: lhs <= rhs (1 + tol)
        #[arg(long = "tol-trace", default_value_t = 1e-2)]
        tol_trace: f64,
    },
    /// Monte-Carlo estimate sweep over random admissible problems
    Sweep {
        /// Order parameters to sweep, comma separated
        #[arg(long, default_value = "2", value_delimiter = ',')]
        l: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 201)]
        n: usize,
        #[arg(long, default_value_t = 4, value_parser = parse_accuracy)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "tol-l2", default_value_t = 1e-3)]
        tol_l2: f64,
        #[arg(long = "tol-trace", default_value_t = 1e-2)]
        tol_trace: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn parse_accuracy(s: &str) -> Result<usize, String> {
    match s {
        "2" => Ok(2),
        "4" => Ok(4),
        _ => Err("accuracy order must be 2 or 4".into()),
    }
}

fn fail(kind: &str, message: impl std::fmt::Display, code: i32) -> i32 {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message.to_string() } }));
    code
}

fn load_spec(path: &Path) -> Result<ProblemSpec, i32> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail("io", format!("cannot read {}: {e}", path.display()), EXIT_INVALID))?;
    let spec = ProblemSpec::from_json_str(&text)
        .map_err(|e| fail("parse", format!("invalid spec JSON: {e}"), EXIT_INVALID))?;
    let violations = validate_spec(&spec);
    if !violations.is_empty() {
        let details: Vec<serde_json::Value> = violations
            .iter()
            .map(|v| json!({ "field": v.field, "message": v.message }))
            .collect();
        eprintln!("{}", json!({ "error": { "kind": "validation", "violations": details } }));
        return Err(EXIT_INVALID);
    }
    Ok(spec)
}

/// Raw linear forms are reduced up front; the solver and the margin
/// formulas work with coefficient representations.
fn reduce_if_raw(spec: ProblemSpec) -> Result<ProblemSpec, i32> {
    match &spec.bc {
        BoundaryCoefficients::Raw { alpha, beta } => {
            let reduced = reduce_raw_forms(spec.l, alpha, beta)
                .map_err(|e| fail("reduction", e, EXIT_NUMERICAL))?;
            Ok(ProblemSpec {
                bc: reduced,
                ..spec
            })
        }
        _ => Ok(spec),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), i32> {
    fs::write(path, contents)
        .map_err(|e| fail("io", format!("cannot write {}: {e}", path.display()), EXIT_INVALID))
}

/// Timestamps and invocation details live here so the report files stay
/// byte-identical across runs with the same seed.
fn write_metadata(dir: &Path) -> Result<(), i32> {
    let unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let args: Vec<String> = std::env::args().collect();
    let meta = json!({ "unix_time": unix, "argv": args });
    write_file(&dir.join("metadata.json"), &format!("{meta:#}\n"))
}

fn run_check(path: &Path) -> Result<i32, i32> {
    let spec = reduce_if_raw(load_spec(path)?)?;
    let report = dispersive_bvp::admissibility::margins(spec.l, &spec.bc)
        .map_err(|e| fail("admissibility", e, EXIT_INVALID))?;
    println!("{}", report.to_json_string());
    Ok(if report.admissible {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn map_discretize_error(e: &DiscretizeError) -> i32 {
    match e {
        DiscretizeError::NumericallySingular { .. } | DiscretizeError::NonFiniteSolution => {
            EXIT_NUMERICAL
        }
        _ => EXIT_INVALID,
    }
}

fn run_solve(path: &Path, n: usize, p: usize, out: &Path) -> Result<i32, i32> {
    let spec = reduce_if_raw(load_spec(path)?)?;
    let grid =
        Grid::uniform(n, spec.length).map_err(|e| fail("grid", e, EXIT_INVALID))?;
    let mut sys = assemble(&spec, &grid, p)
        .map_err(|e| fail("assemble", &e, map_discretize_error(&e)))?;
    let sol = solve_linear(&mut sys).map_err(|e| fail("solve", &e, map_discretize_error(&e)))?;
    fs::create_dir_all(out)
        .map_err(|e| fail("io", format!("cannot create {}: {e}", out.display()), EXIT_INVALID))?;
    write_file(&out.join("solution.csv"), &sol.to_csv())?;
    write_file(&out.join("solution.json"), &sol.to_json_string())?;
    write_metadata(out)?;
    println!(
        "{}",
        json!({
            "n": n,
            "p": p,
            "condition_estimate": sol.condition_estimate,
            "max_abs": sol.max_abs(),
            "out": out.display().to_string(),
        })
    );
    Ok(EXIT_OK)
}

fn run_verify_lemmas(max_l: usize, seed: u64) -> i32 {
    let lengths = [0.5, 1.0, std::f64::consts::PI, 10.0];
    let mut rows = Vec::new();
    let mut pass = true;
    for l in 1..=max_l {
        for (name, identity) in [
            ("pairing", Identity::Single { j: l }),
            ("pairing-x", Identity::SingleWeighted { j: l }),
            ("alternating-sum", Identity::Alternating { l }),
            ("alternating-sum-x", Identity::AlternatingWeighted { l }),
        ] {
            let mut worst: f64 = 0.0;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (l as u64) << 8);
            for &length in &lengths {
                for _ in 0..200 {
                    let degree = rng.gen_range(0..=20);
                    let u = Polynomial::random(degree, &mut rng);
                    let chk = lemma_residual(&u, identity, length);
                    worst = worst.max(chk.residual / (1.0 + chk.lhs.abs()));
                }
            }
            pass &= worst <= 1e-10;
            rows.push(json!({ "identity": name, "l": l, "worst_relative_residual": worst }));
        }
    }
    println!(
        "{:#}",
        json!({ "max_l": max_l, "tolerance": 1e-10, "pass": pass, "results": rows })
    );
    if pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn run_mms(
    path: &Path,
    grids: &[usize],
    ref_n: usize,
    p: usize,
    min_order: Option<f64>,
    out: Option<&Path>,
) -> Result<i32, i32> {
    let spec = reduce_if_raw(load_spec(path)?)?;
    let threshold = min_order.unwrap_or(p as f64 - 0.5);
    let report = convergence_study(&spec, &ErrorReference::FineGrid { n: ref_n }, grids, p)
        .map_err(|e| match &e {
            VerifyError::Discretize(d) => fail("mms", &e, map_discretize_error(d)),
            _ => fail("mms", &e, EXIT_INVALID),
        })?;
    println!("{}", report.to_json_string());
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| {
            fail("io", format!("cannot create {}: {e}", dir.display()), EXIT_INVALID)
        })?;
        let mut csv = String::from("n,h,max_error,l2_error\n");
        for (i, &g) in report.grid_sizes.iter().enumerate() {
            csv.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                g,
                spec.length / (g - 1) as f64,
                report.max_errors[i],
                report.l2_errors[i]
            ));
        }
        write_file(&dir.join("convergence.csv"), &csv)?;
        write_metadata(dir)?;
    }
    Ok(if report.fitted_order >= threshold {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn run_estimates(path: &Path, n: usize, p: usize, tol_l2: f64, tol_trace: f64) -> Result<i32, i32> {
    let spec = reduce_if_raw(load_spec(path)?)?;
    let report = estimate_check(&spec, n, p).map_err(|e| match &e {
        VerifyError::Discretize(d) => fail("estimates", &e, map_discretize_error(d)),
        _ => fail("estimates", &e, EXIT_INVALID),
    })?;
    println!("{}", report.to_json_string());
    Ok(if report.l2_ok(tol_l2) && report.trace_ok(tol_trace) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    ls: &[usize],
    cases: usize,
    n: usize,
    p: usize,
    seed: u64,
    tol_l2: f64,
    tol_trace: f64,
    out: &Path,
) -> Result<i32, i32> {
    fs::create_dir_all(out)
        .map_err(|e| fail("io", format!("cannot create {}: {e}", out.display()), EXIT_INVALID))?;
    let mut all_cases = Vec::new();
    for &l in ls {
        let mut config = SweepConfig::new(l, cases, seed ^ (l as u64));
        config.n = n;
        config.p = p;
        config.tol_l2 = tol_l2;
        config.tol_trace = tol_trace;
        let result = sweep(&config).map_err(|e| match &e {
            VerifyError::Discretize(d) => fail("sweep", &e, map_discretize_error(d)),
            _ => fail("sweep", &e, EXIT_INVALID),
        })?;
        all_cases.extend(result);
    }
    let failed: Vec<&dispersive_bvp::verify::SweepCase> = all_cases
        .iter()
        .filter(|c| !(c.l2_ok && c.trace_ok))
        .collect();
    for c in &failed {
        let repro = out.join(format!("repro-l{}-case{}.json", c.l, c.index));
        write_file(&repro, &c.spec.to_json_string())?;
    }
    write_file(&out.join("sweep.csv"), &sweep_csv(&all_cases))?;
    write_metadata(out)?;
    let worst_l2 = all_cases.iter().map(|c| c.l2_ratio).fold(0.0, f64::max);
    let worst_trace = all_cases
        .iter()
        .map(|c| c.trace_lhs / c.trace_rhs)
        .fold(0.0, f64::max);
    println!(
        "{:#}",
        json!({
            "cases": all_cases.len(),
            "failed": failed.len(),
            "worst_l2_ratio": worst_l2,
            "worst_trace_ratio": worst_trace,
            "out": out.display().to_string(),
        })
    );
    Ok(if failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check { spec } => run_check(spec),
        Command::Solve { spec, n, p, out } => run_solve(spec, *n, *p, out),
        Command::VerifyLemmas { max_l, seed } => Ok(run_verify_lemmas(*max_l, *seed)),
        Command::Mms {
            spec,
            grids,
            ref_n,
            p,
            min_order,
            out,
        } => run_mms(spec, grids, *ref_n, *p, *min_order, out.as_deref()),
        Command::Estimates {
            spec,
            n,
            p,
            tol_l2,
            tol_trace,
        } => run_estimates(spec, *n, *p, *tol_l2, *tol_trace),
        Command::Sweep {
            l,
            cases,
            n,
            p,
            seed,
            tol_l2,
            tol_trace,
            out,
        } => run_sweep(l, *cases, *n, *p, *seed, *tol_l2, *tol_trace, out),
    };
    std::process::exit(match result {
        Ok(code) => code,
        Err(code) => code,
    });
}
