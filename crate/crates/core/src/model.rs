//! Problem specification for the stationary dispersive equation
//! `lambda*u + sum_{j=1..l} (-1)^{j+1} D^{2j+1} u = f` on (0, L), together
//! with the three boundary-condition representations and the reduction of
//! raw linear boundary forms to coefficient form.

use crate::linalg::{Dd, DdMatrix, LuFactors};
use crate::polycalc::Polynomial;
use serde::{Deserialize, Serialize};

/// A full boundary value problem instance.
///
/// `l` is the dispersion order parameter (the equation has order 2l+1),
/// `lambda` the zeroth-order coefficient, `length` the interval length.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub l: usize,
    pub lambda: f64,
    pub length: f64,
    pub bc: BoundaryCoefficients,
    pub forcing: ForcingSpec,
}

impl ProblemSpec {
    pub fn from_json_str(s: &str) -> Result<ProblemSpec, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization cannot fail")
    }
}

/// Boundary-condition coefficients in one of three representations.
///
/// All of them imply `u(0) = u(L) = 0`. The canonical-diagonal form couples
/// `D^{l+j}` to `D^{l-j}` only and additionally imposes `D^l u(L) = 0`;
/// `a[j-1]` and `b[j-1]` hold the diagonal coefficients for j = 1..l-1.
/// The general form stores the full relation matrices (rows i = l+1..2l-1
/// at x = 0 over columns j = 1..l; rows i = l..2l-1 at x = L over columns
/// j = 1..l-1). Raw linear forms store one homogeneous form per row over
/// the derivatives D^1..D^{2l-1} and must be reduced before use.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryCoefficients {
    Canonical { a: Vec<f64>, b: Vec<f64> },
    General { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    Raw { alpha: Vec<Vec<f64>>, beta: Vec<Vec<f64>> },
}

/// Relation matrices in the general layout: (rows at x = 0, rows at x = L).
pub type RelationMatrices = (Vec<Vec<f64>>, Vec<Vec<f64>>);

impl BoundaryCoefficients {
    pub fn kind_name(&self) -> &'static str {
        match self {
            BoundaryCoefficients::Canonical { .. } => "canonical",
            BoundaryCoefficients::General { .. } => "general",
            BoundaryCoefficients::Raw { .. } => "raw",
        }
    }

    pub fn is_raw(&self) -> bool {
        matches!(self, BoundaryCoefficients::Raw { .. })
    }

    /// Relation matrices in the general layout, expanding the canonical
    /// diagonal into full (sparse) rows. `None` for raw forms.
    ///
    /// Returned shapes: at x = 0, (l-1) rows over columns j = 1..l;
    /// at x = L, l rows (i = l..2l-1) over columns j = 1..l-1.
    pub fn general_layout(&self, l: usize) -> Option<RelationMatrices> {
        match self {
            BoundaryCoefficients::Canonical { a, b } => {
                let mut a_full = vec![vec![0.0; l]; l - 1];
                let mut b_full = vec![vec![0.0; l - 1]; l];
                for j in 1..l {
                    // row for D^{l+j}, coupled column l-j
                    a_full[j - 1][l - j - 1] = a[j - 1];
                    b_full[j][l - j - 1] = b[j - 1];
                }
                Some((a_full, b_full))
            }
            BoundaryCoefficients::General { a, b } => Some((a.clone(), b.clone())),
            BoundaryCoefficients::Raw { .. } => None,
        }
    }
}

/// Right-hand side f of the equation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ForcingSpec {
    /// Exact polynomial; `coeffs[k]` multiplies x^k.
    Polynomial { coeffs: Vec<f64> },
    /// Sum of `amplitude * sin(frequency * x + phase)` terms.
    Trig { terms: Vec<(f64, f64, f64)> },
    /// Raw values at the solver's nodes.
    Samples { values: Vec<f64> },
}

impl ForcingSpec {
    pub fn zero() -> ForcingSpec {
        ForcingSpec::Polynomial { coeffs: Vec::new() }
    }

    pub fn from_polynomial(p: &Polynomial) -> ForcingSpec {
        ForcingSpec::Polynomial {
            coeffs: p.coeffs().to_vec(),
        }
    }

    pub fn as_polynomial(&self) -> Option<Polynomial> {
        match self {
            ForcingSpec::Polynomial { coeffs } => Some(Polynomial::new(coeffs.clone())),
            _ => None,
        }
    }

    /// Pointwise evaluation; `None` for sample-based forcing.
    pub fn eval(&self, x: f64) -> Option<f64> {
        match self {
            ForcingSpec::Polynomial { coeffs } => {
                Some(coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c))
            }
            ForcingSpec::Trig { terms } => Some(
                terms
                    .iter()
                    .map(|&(a, w, phi)| a * (w * x + phi).sin())
                    .sum(),
            ),
            ForcingSpec::Samples { .. } => None,
        }
    }
}

/// One broken invariant, named after the offending field.
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn violation(field: &str, message: impl Into<String>) -> Violation {
    Violation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

fn check_matrix_shape(
    out: &mut Vec<Violation>,
    field: &str,
    m: &[Vec<f64>],
    rows: usize,
    cols: usize,
) {
    if m.len() != rows {
        out.push(violation(
            field,
            format!("matrix must have {rows} rows, got {}", m.len()),
        ));
        return;
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            out.push(violation(
                field,
                format!("row {i} must have {cols} entries, got {}", row.len()),
            ));
            return;
        }
        if !all_finite(row) {
            out.push(violation(field, format!("row {i} contains a non-finite entry")));
            return;
        }
    }
}

/// Checks every `ProblemSpec` invariant; an empty list means the spec is
/// valid. Violations are data, not failures.
pub fn validate_spec(spec: &ProblemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if spec.l < 1 {
        out.push(violation("l", "l must be >= 1"));
        return out;
    }
    let l = spec.l;
    if !(spec.lambda.is_finite() && spec.lambda > 0.0) {
        out.push(violation("lambda", "lambda must be > 0"));
    }
    if !(spec.length.is_finite() && spec.length > 0.0) {
        out.push(violation("length", "length must be > 0"));
    }
    match &spec.bc {
        BoundaryCoefficients::Canonical { a, b } => {
            if a.len() != l - 1 {
                out.push(violation(
                    "bc.a",
                    format!("coefficient map size must be l-1={}, got {}", l - 1, a.len()),
                ));
            }
            if b.len() != l - 1 {
                out.push(violation(
                    "bc.b",
                    format!("coefficient map size must be l-1={}, got {}", l - 1, b.len()),
                ));
            }
            if !all_finite(a) || !all_finite(b) {
                out.push(violation("bc", "coefficients must be finite"));
            }
        }
        BoundaryCoefficients::General { a, b } => {
            check_matrix_shape(&mut out, "bc.a", a, l - 1, l);
            check_matrix_shape(&mut out, "bc.b", b, l, l - 1);
        }
        BoundaryCoefficients::Raw { alpha, beta } => {
            check_matrix_shape(&mut out, "bc.alpha", alpha, l - 1, 2 * l - 1);
            check_matrix_shape(&mut out, "bc.beta", beta, l, 2 * l - 1);
        }
    }
    match &spec.forcing {
        ForcingSpec::Polynomial { coeffs } => {
            if !all_finite(coeffs) {
                out.push(violation("forcing.coeffs", "coefficients must be finite"));
            }
        }
        ForcingSpec::Trig { terms } => {
            if terms
                .iter()
                .any(|t| ![t.0, t.1, t.2].iter().all(|v| v.is_finite()))
            {
                out.push(violation("forcing.terms", "terms must be finite"));
            }
        }
        ForcingSpec::Samples { values } => {
            if !all_finite(values) {
                out.push(violation("forcing.values", "samples must be finite"));
            }
        }
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(
        "raw {block} sub-block is numerically singular \
         (min pivot {min_pivot:.3e} < 1e-10 * max entry {scale:.3e}); \
         the raw forms do not determine the high derivatives"
    )]
    SingularReduction {
        block: &'static str,
        min_pivot: f64,
        scale: f64,
    },
    #[error("raw form shape mismatch: {0}")]
    ShapeMismatch(String),
}

const REDUCTION_PIVOT_TOL: f64 = 1e-10;

/// Solves the square high-derivative sub-block of homogeneous forms
/// `sum_i coef[k][i-1] D^i u = 0` for the derivatives `D^i, i in high_cols`,
/// expressing them through the low derivatives `D^j, j = 1..n_low`.
fn reduce_block(
    coef: &[Vec<f64>],
    high_start: usize, // zero-based column where the square sub-block begins
    n_low: usize,
    block: &'static str,
) -> Result<Vec<Vec<f64>>, ModelError> {
    let n_high = coef.len();
    let mut sub = DdMatrix::zeros(n_high, n_high);
    for k in 0..n_high {
        for m in 0..n_high {
            sub[(k, m)] = Dd::from_f64(coef[k][high_start + m]);
        }
    }
    let scale = sub.max_abs();
    let factors = LuFactors::factor(sub, 0.0).map_err(|_| ModelError::SingularReduction {
        block,
        min_pivot: 0.0,
        scale,
    })?;
    if factors.min_pivot() < REDUCTION_PIVOT_TOL * scale {
        return Err(ModelError::SingularReduction {
            block,
            min_pivot: factors.min_pivot(),
            scale,
        });
    }
    // sub * v_high = -low * v_low  =>  v_high = M v_low, column by column.
    let mut result = vec![vec![0.0; n_low]; n_high];
    for j in 0..n_low {
        let rhs: Vec<Dd> = (0..n_high)
            .map(|k| -Dd::from_f64(coef[k][j]))
            .collect();
        let col = factors.solve(&rhs);
        for (row, value) in result.iter_mut().zip(&col) {
            row[j] = value.to_f64();
        }
    }
    Ok(result)
}

/// Reduces raw linear boundary forms to the general coefficient form by
/// solving for the high derivatives (Cramer-style, implemented as an LU
/// solve of the square sub-block). Fails with `SingularReduction` when a
/// sub-block does not determine the high derivatives.
pub fn reduce_raw_forms(
    l: usize,
    alpha: &[Vec<f64>],
    beta: &[Vec<f64>],
) -> Result<BoundaryCoefficients, ModelError> {
    let cols = 2 * l - 1;
    if alpha.len() != l - 1 || alpha.iter().any(|r| r.len() != cols) {
        return Err(ModelError::ShapeMismatch(format!(
            "alpha must be {}x{cols}",
            l - 1
        )));
    }
    if beta.len() != l || beta.iter().any(|r| r.len() != cols) {
        return Err(ModelError::ShapeMismatch(format!("beta must be {l}x{cols}")));
    }
    // At x = 0 the high block covers D^{l+1}..D^{2l-1} (columns l..2l-2);
    // at x = L it covers D^l..D^{2l-1} (columns l-1..2l-2).
    let a = reduce_block(alpha, l, l, "alpha")?;
    let b = reduce_block(beta, l - 1, l - 1, "beta")?;
    Ok(BoundaryCoefficients::General { a, b })
}

/// Encodes general-form coefficients as raw linear forms with an identity
/// sub-block on the high derivatives (the inverse of `reduce_raw_forms` up
/// to row scaling).
pub fn encode_general_as_raw(
    l: usize,
    a: &[Vec<f64>],
    b: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let cols = 2 * l - 1;
    let mut alpha = vec![vec![0.0; cols]; l - 1];
    for (k, row) in alpha.iter_mut().enumerate() {
        row[l + k] = 1.0; // D^{l+1+k}
        for j in 1..=l {
            row[j - 1] = -a[k][j - 1];
        }
    }
    let mut beta = vec![vec![0.0; cols]; l];
    for (k, row) in beta.iter_mut().enumerate() {
        row[l - 1 + k] = 1.0; // D^{l+k}
        for j in 1..l {
            row[j - 1] = -b[k][j - 1];
        }
    }
    (alpha, beta)
}
