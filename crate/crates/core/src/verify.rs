//! Manufactured solutions, convergence studies, and empirical checks of the
//! a priori solution bounds.
//!
//! The L^2 bound `lambda ||u|| <= ||f||`, the boundary-trace bound with
//! constant 1/(lambda M_1), and the H^l / H^{2l+1} ratios are evaluated on
//! discrete solutions. M_1 is the minimum of the admissibility margins.

use crate::admissibility::{margins, sample_admissible_canonical};
use crate::discretize::{
    assemble, discrete_norms, h_norm, solve_linear, DiscretizeError, Grid, GridSolution,
};
use crate::linalg::{kernel_basis, Dd, DdMatrix};
use crate::model::{BoundaryCoefficients, ForcingSpec, ProblemSpec};
use crate::polycalc::{differentiate, Polynomial};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("boundary constraints are full rank over degree-{degree} polynomials; raise the degree")]
    EmptyNullspace { degree: usize },
    #[error("coefficients are inadmissible (minimum margin {min_margin})")]
    InadmissibleCoefficients { min_margin: f64 },
    #[error("forcing is identically zero; the estimate ratios are undefined")]
    ZeroForcing,
    #[error("invalid grid list: {0}")]
    InvalidGrids(String),
    #[error("raw boundary forms must be reduced first")]
    UnreducedRawForms,
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Admissibility(#[from] crate::admissibility::AdmissibilityError),
}

/// A nonzero polynomial of degree <= `degree` whose traces satisfy all
/// 2l+1 boundary conditions. The homogeneous constraint system is solved
/// for its kernel and a seeded random kernel element is drawn, then
/// normalized to unit coefficient of its lowest nonzero term.
pub fn polynomial_satisfying_bcs(
    l: usize,
    bc: &BoundaryCoefficients,
    length: f64,
    degree: usize,
    seed: u64,
) -> Result<Polynomial, VerifyError> {
    let (a_full, b_full) = bc
        .general_layout(l)
        .ok_or(VerifyError::UnreducedRawForms)?;
    let dim = degree + 1;
    let len = Dd::from_f64(length);

    // Row of trace functionals: entry idx is d^k/dx^k x^idx at x.
    let trace_row = |k: usize, at_length: bool| -> Vec<Dd> {
        let mut row = vec![Dd::ZERO; dim];
        for (idx, slot) in row.iter_mut().enumerate().skip(k) {
            let mut fall = Dd::ONE;
            for t in (idx - k + 1)..=idx {
                fall *= t as f64;
            }
            *slot = if at_length {
                fall * len.powi((idx - k) as u32)
            } else if idx == k {
                fall
            } else {
                Dd::ZERO
            };
        }
        row
    };
    let combine = |hi: Vec<Dd>, los: Vec<(f64, Vec<Dd>)>| -> Vec<Dd> {
        let mut row = hi;
        for (coeff, lo) in los {
            for (r, v) in row.iter_mut().zip(&lo) {
                *r -= *v * coeff;
            }
        }
        row
    };

    let mut rows: Vec<Vec<Dd>> = Vec::with_capacity(2 * l + 1);
    rows.push(trace_row(0, false));
    rows.push(trace_row(0, true));
    for (idx, a_row) in a_full.iter().enumerate() {
        // relations at x = 0: D^{l+1+idx} - sum_jj a[idx][jj-1] D^jj
        let los = (1..=l).map(|jj| (a_row[jj - 1], trace_row(jj, false))).collect();
        rows.push(combine(trace_row(l + 1 + idx, false), los));
    }
    for (idx, b_row) in b_full.iter().enumerate() {
        // rows at x = L: D^{l+idx} - sum_jj b[idx][jj-1] D^jj
        let los = (1..l).map(|jj| (b_row[jj - 1], trace_row(jj, true))).collect();
        rows.push(combine(trace_row(l + idx, true), los));
    }

    let mut constraint = DdMatrix::zeros(rows.len(), dim);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            constraint[(i, j)] = v;
        }
    }
    let basis = kernel_basis(&constraint, 1e-12);
    if basis.is_empty() {
        return Err(VerifyError::EmptyNullspace { degree });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Dd::ZERO; dim];
    for vector in &basis {
        let weight = rng.gen_range(-1.0..=1.0);
        for (c, v) in coeffs.iter_mut().zip(vector) {
            *c += *v * weight;
        }
    }
    let max_abs = coeffs
        .iter()
        .map(|c| c.abs().to_f64())
        .fold(0.0, f64::max);
    let lowest = coeffs
        .iter()
        .position(|c| c.abs().to_f64() > 1e-12 * max_abs)
        .expect("kernel element is nonzero");
    let pivot = coeffs[lowest];
    Ok(Polynomial::new(
        coeffs.iter().map(|c| (*c / pivot).to_f64()).collect(),
    ))
}

/// Exact forcing for a chosen solution:
/// `f = lambda u + sum_{j=1..l} (-1)^{j+1} D^{2j+1} u`.
pub fn forcing_for(u: &Polynomial, lambda: f64, l: usize) -> Polynomial {
    let mut f = u.scale(lambda);
    for j in 1..=l {
        let d = differentiate(u, 2 * j + 1);
        f = f.add(&if j % 2 == 1 { d } else { d.scale(-1.0) });
    }
    f
}

/// Mesh-refinement study result.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub grid_sizes: Vec<usize>,
    pub max_errors: Vec<f64>,
    pub l2_errors: Vec<f64>,
    /// Least-squares slope of log(max error) against log(h).
    pub fitted_order: f64,
}

impl ConvergenceReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// What to measure errors against.
pub enum ErrorReference {
    /// A known exact solution.
    Polynomial(Polynomial),
    /// Self-convergence against a solve on a finer grid whose step divides
    /// every study grid.
    FineGrid { n: usize },
}

fn solve_on(spec: &ProblemSpec, n: usize, p: usize) -> Result<GridSolution, VerifyError> {
    let grid = Grid::uniform(n, spec.length)?;
    let mut sys = assemble(spec, &grid, p)?;
    Ok(solve_linear(&mut sys)?)
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Solves on each grid and fits the error order. Max errors are taken over
/// nodes (shared nodes for self-convergence); L^2 errors use the trapezoid
/// rule on the study grid.
pub fn convergence_study(
    spec: &ProblemSpec,
    reference: &ErrorReference,
    grids: &[usize],
    p: usize,
) -> Result<ConvergenceReport, VerifyError> {
    if grids.len() < 3 {
        return Err(VerifyError::InvalidGrids(format!(
            "need at least 3 grids, got {}",
            grids.len()
        )));
    }
    let reference_values: Option<(usize, Vec<f64>)> = match reference {
        ErrorReference::Polynomial(_) => None,
        ErrorReference::FineGrid { n } => {
            for &g in grids {
                if (n - 1) % (g - 1) != 0 {
                    return Err(VerifyError::InvalidGrids(format!(
                        "reference grid {n} does not nest study grid {g}"
                    )));
                }
                if g >= *n {
                    return Err(VerifyError::InvalidGrids(format!(
                        "study grid {g} must be coarser than the reference {n}"
                    )));
                }
            }
            let sol = solve_on(spec, *n, p)?;
            Some((*n, sol.values().to_vec()))
        }
    };

    let mut max_errors = Vec::with_capacity(grids.len());
    let mut l2_errors = Vec::with_capacity(grids.len());
    for &g in grids {
        let sol = solve_on(spec, g, p)?;
        let grid = sol.grid().clone();
        let diffs: Vec<f64> = match (&reference_values, reference) {
            (Some((n_ref, vals)), _) => {
                let stride = (n_ref - 1) / (g - 1);
                sol.values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v - vals[i * stride])
                    .collect()
            }
            (None, ErrorReference::Polynomial(u_star)) => sol
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| v - u_star.eval(grid.node(i)))
                .collect(),
            (None, ErrorReference::FineGrid { .. }) => unreachable!(),
        };
        let max_err = diffs.iter().map(|d| d.abs()).fold(0.0, f64::max);
        let h = grid.h();
        let l2 = {
            let mut acc = 0.0;
            for (i, d) in diffs.iter().enumerate() {
                let w = if i == 0 || i == diffs.len() - 1 { 0.5 } else { 1.0 };
                acc += w * d * d;
            }
            (acc * h).sqrt()
        };
        max_errors.push(max_err);
        l2_errors.push(l2);
    }

    let hs: Vec<f64> = grids
        .iter()
        .map(|&g| (spec.length / (g - 1) as f64).ln())
        .collect();
    let logs: Vec<f64> = max_errors.iter().map(|&e| e.max(1e-300).ln()).collect();
    Ok(ConvergenceReport {
        grid_sizes: grids.to_vec(),
        max_errors,
        l2_errors,
        fitted_order: fit_slope(&hs, &logs),
    })
}

/// Discrete a priori estimate quantities for one admissible problem.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    /// lambda ||u|| / ||f||; bounded by 1 in the continuum.
    pub l2_ratio: f64,
    /// Boundary-trace sum and its bound ||f||^2 / (lambda M_1).
    pub trace_lhs: f64,
    pub trace_rhs: f64,
    /// ||u||_{H^l} / ||f|| and ||u||_{H^{2l+1}} / ||f||, reported only.
    pub hl_ratio: f64,
    pub h2l1_ratio: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
}

impl EstimateReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn l2_ok(&self, tol: f64) -> bool {
        self.l2_ratio <= 1.0 + tol
    }

    pub fn trace_ok(&self, tol: f64) -> bool {
        self.trace_lhs <= self.trace_rhs * (1.0 + tol)
    }
}

fn forcing_l2_norm(spec: &ProblemSpec, grid: &Grid) -> f64 {
    let n = grid.n();
    let h = grid.h();
    let mut acc = 0.0;
    for i in 0..n {
        let v = match &spec.forcing {
            ForcingSpec::Samples { values } => values[i],
            other => other.eval(grid.node(i)).expect("pointwise forcing"),
        };
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * v * v;
    }
    (acc * h).sqrt()
}

/// Solves the problem and evaluates the estimate quantities. Requires
/// admissible coefficients and a nonzero forcing.
pub fn estimate_check(spec: &ProblemSpec, n: usize, p: usize) -> Result<EstimateReport, VerifyError> {
    let report = margins(spec.l, &spec.bc)?;
    if !report.admissible {
        return Err(VerifyError::InadmissibleCoefficients {
            min_margin: report.min_margin(),
        });
    }
    let m1 = report.min_margin();
    let grid = Grid::uniform(n, spec.length)?;
    let f_norm = forcing_l2_norm(spec, &grid);
    if f_norm == 0.0 {
        return Err(VerifyError::ZeroForcing);
    }
    let mut sys = assemble(spec, &grid, p)?;
    let sol = solve_linear(&mut sys)?;
    let l = spec.l;
    let norms = discrete_norms(&sol, 2 * l + 1)?;
    let traces = &sol.derivative_traces;
    let mut trace_lhs = 0.0;
    for i in 1..l {
        trace_lhs += traces.at_length[i - 1].powi(2) + traces.at_zero[i - 1].powi(2);
    }
    trace_lhs += traces.at_zero[l - 1].powi(2);
    Ok(EstimateReport {
        l2_ratio: spec.lambda * norms[0] / f_norm,
        trace_lhs,
        trace_rhs: f_norm * f_norm / (spec.lambda * m1),
        hl_ratio: h_norm(&norms[..=l]) / f_norm,
        h2l1_ratio: h_norm(&norms) / f_norm,
        m1,
    })
}

/// Sup norm of the discrete solution with zero forcing; the unique-solution
/// property predicts zero for admissible coefficients.
pub fn homogeneous_sup_norm(
    l: usize,
    bc: &BoundaryCoefficients,
    lambda: f64,
    length: f64,
    n: usize,
    p: usize,
) -> Result<f64, VerifyError> {
    let spec = ProblemSpec {
        l,
        lambda,
        length,
        bc: bc.clone(),
        forcing: ForcingSpec::zero(),
    };
    let sol = solve_on(&spec, n, p)?;
    Ok(sol.max_abs())
}

/// Monte-Carlo sweep configuration: per case, canonical coefficients are
/// drawn with all margins inside `margin_range`, lambda inside
/// `lambda_range`, and a random trig forcing is applied.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub l: usize,
    pub cases: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub length: f64,
    pub lambda_range: (f64, f64),
    pub margin_range: (f64, f64),
    pub tol_l2: f64,
    pub tol_trace: f64,
}

impl SweepConfig {
    pub fn new(l: usize, cases: usize, seed: u64) -> SweepConfig {
        SweepConfig {
            l,
            cases,
            n: 201,
            p: 4,
            seed,
            length: 1.0,
            lambda_range: (0.5, 2.0),
            margin_range: (0.1, 2.0),
            tol_l2: 1e-3,
            tol_trace: 1e-2,
        }
    }
}

/// One sweep case with its estimate quantities and pass flags. The spec is
/// retained so failing cases can be dumped for reproduction.
#[derive(Clone, Debug, Serialize)]
pub struct SweepCase {
    pub index: usize,
    pub l: usize,
    pub lambda: f64,
    pub m1: f64,
    pub l2_ratio: f64,
    pub trace_lhs: f64,
    pub trace_rhs: f64,
    pub hl_ratio: f64,
    pub h2l1_ratio: f64,
    pub l2_ok: bool,
    pub trace_ok: bool,
    pub spec: ProblemSpec,
}

/// Runs the sweep; cases are generated and reported in seed order.
pub fn sweep(config: &SweepConfig) -> Result<Vec<SweepCase>, VerifyError> {
    let mut out = Vec::with_capacity(config.cases);
    for index in 0..config.cases {
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let bc = sample_admissible_canonical(
            config.l,
            config.margin_range.0,
            config.margin_range.1,
            &mut rng,
        );
        let lambda = rng.gen_range(config.lambda_range.0..=config.lambda_range.1);
        let terms: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=3usize))
            .map(|_| {
                (
                    rng.gen_range(0.3..=1.5) * if rng.gen_bool(0.5) { -1.0 } else { 1.0 },
                    rng.gen_range(1.0..=12.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let spec = ProblemSpec {
            l: config.l,
            lambda,
            length: config.length,
            bc,
            forcing: ForcingSpec::Trig { terms },
        };
        let report = estimate_check(&spec, config.n, config.p)?;
        out.push(SweepCase {
            index,
            l: config.l,
            lambda,
            m1: report.m1,
            l2_ratio: report.l2_ratio,
            trace_lhs: report.trace_lhs,
            trace_rhs: report.trace_rhs,
            hl_ratio: report.hl_ratio,
            h2l1_ratio: report.h2l1_ratio,
            l2_ok: report.l2_ok(config.tol_l2),
            trace_ok: report.trace_ok(config.tol_trace),
            spec,
        });
    }
    Ok(out)
}

/// Flat CSV, one row per case, 17 significant digits.
pub fn sweep_csv(cases: &[SweepCase]) -> String {
    let mut out = String::from(
        "case,l,lambda,m1,l2_ratio,trace_lhs,trace_rhs,hl_ratio,h2l1_ratio,l2_ok,trace_ok\n",
    );
    for c in cases {
        out.push_str(&format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            c.index,
            c.l,
            c.lambda,
            c.m1,
            c.l2_ratio,
            c.trace_lhs,
            c.trace_rhs,
            c.hl_ratio,
            c.h2l1_ratio,
            c.l2_ok,
            c.trace_ok
        ));
    }
    out
}
