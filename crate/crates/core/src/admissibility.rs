//! Sufficient admissibility conditions for the boundary coefficients.
//!
//! For each order l and coefficient representation the module evaluates the
//! margin quantities A_1..A_l and B_1..B_{l-1} whose strict positivity makes
//! the boundary quadratic form
//! `I = sum_{j=1..l} (-1)^{j+1} (D^{2j+1}u, u)` nonnegative, which in turn
//! gives uniqueness and the L^2 a priori bound for the equation. The form I
//! itself is evaluated exactly from a boundary jet, and the cross-term lower
//! bound used in the l >= 4 analysis is exposed for direct testing.

use crate::model::BoundaryCoefficients;
use rand::Rng;
use serde::Serialize;

/// Which margin formula family produced a report. The specialized l = 2 and
/// l = 3 formulas are sharper than the general-l ones and take precedence
/// for canonical/general inputs of those orders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FormulaFamily {
    #[serde(rename = "L1")]
    L1,
    #[serde(rename = "L2_general")]
    L2General,
    #[serde(rename = "L2_reduced")]
    L2Reduced,
    #[serde(rename = "L3_general")]
    L3General,
    #[serde(rename = "L3_reduced")]
    L3Reduced,
    #[serde(rename = "GeneralL_full")]
    GeneralLFull,
    #[serde(rename = "GeneralL_reduced")]
    GeneralLReduced,
}

/// Margins and verdict for one coefficient set.
///
/// `margins_a` lists A_1..A_l (x = 0 side plus the A_l quarter term) and
/// `margins_b` lists B_1..B_{l-1} (x = L side). Margins are reported even
/// when negative so a user can see how far a set is from admissibility.
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub l: usize,
    pub family: FormulaFamily,
    #[serde(rename = "A")]
    pub margins_a: Vec<f64>,
    #[serde(rename = "B")]
    pub margins_b: Vec<f64>,
    pub admissible: bool,
}

impl AdmissibilityReport {
    fn from_margins(l: usize, family: FormulaFamily, a: Vec<f64>, b: Vec<f64>) -> Self {
        let admissible = a.iter().chain(b.iter()).all(|&m| m > 0.0);
        AdmissibilityReport {
            l,
            family,
            margins_a: a,
            margins_b: b,
            admissible,
        }
    }

    /// M_1, the minimum over all margins; feeds the boundary-trace bound.
    /// For l = 1 there are no coefficient margins and the boundary form is
    /// plainly (1/2) (Du(0))^2, so the minimum defaults to 1/2.
    pub fn min_margin(&self) -> f64 {
        self.margins_a
            .iter()
            .chain(self.margins_b.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
            .min(if self.l == 1 { 0.5 } else { f64::INFINITY })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Derivative traces D^1 u .. D^{2l} u at the two endpoints. The zeroth
/// derivatives are implicitly zero (u(0) = u(L) = 0).
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryJet {
    pub at_zero: Vec<f64>,
    pub at_length: Vec<f64>,
}

impl BoundaryJet {
    pub fn zeros(l: usize) -> BoundaryJet {
        BoundaryJet {
            at_zero: vec![0.0; 2 * l],
            at_length: vec![0.0; 2 * l],
        }
    }

    /// Uniform [-scale, scale] entries.
    pub fn random(l: usize, scale: f64, rng: &mut impl Rng) -> BoundaryJet {
        let draw = |rng: &mut dyn rand::RngCore| {
            (0..2 * l)
                .map(|_| rng.gen_range(-scale..=scale))
                .collect::<Vec<f64>>()
        };
        BoundaryJet {
            at_zero: draw(rng),
            at_length: draw(rng),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.at_zero
            .iter()
            .chain(self.at_length.iter())
            .map(|v| v * v)
            .sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AdmissibilityError {
    #[error("raw linear forms must be reduced to coefficient form first")]
    UnreducedRawForms,
    #[error("boundary jet must list 2l = {expected} derivatives per endpoint, got {got}")]
    JetLength { expected: usize, got: usize },
}

/// Evaluates the margin formula family matching (l, representation).
pub fn margins(
    l: usize,
    bc: &BoundaryCoefficients,
) -> Result<AdmissibilityReport, AdmissibilityError> {
    if bc.is_raw() {
        return Err(AdmissibilityError::UnreducedRawForms);
    }
    if l == 1 {
        return Ok(AdmissibilityReport::from_margins(
            1,
            FormulaFamily::L1,
            Vec::new(),
            Vec::new(),
        ));
    }
    let report = match (l, bc) {
        (2, BoundaryCoefficients::Canonical { a, b }) => AdmissibilityReport::from_margins(
            2,
            FormulaFamily::L2Reduced,
            vec![0.5 - a[0], 0.25],
            vec![b[0] - 0.5],
        ),
        (3, BoundaryCoefficients::Canonical { a, b }) => {
            // a = [a_{42}, a_{51}], b = [b_{42}, b_{51}]
            AdmissibilityReport::from_margins(
                3,
                FormulaFamily::L3Reduced,
                vec![a[1] - 0.5, 0.5 - a[0], 0.25],
                vec![-b[1] - 0.5, b[0] - 0.5],
            )
        }
        (2, BoundaryCoefficients::General { a, b }) => {
            let (a31, a32) = (a[0][0], a[0][1]);
            let (b21, b31) = (b[0][0], b[1][0]);
            AdmissibilityReport::from_margins(
                2,
                FormulaFamily::L2General,
                vec![0.5 - a31 - a32 * a32, 0.25],
                vec![b31 - 0.5 - 0.5 * b21 * b21],
            )
        }
        (3, BoundaryCoefficients::General { a, b }) => {
            let (a41, a42, a43) = (a[0][0], a[0][1], a[0][2]);
            let (a51, a52, a53) = (a[1][0], a[1][1], a[1][2]);
            let (b31, b32) = (b[0][0], b[0][1]);
            let (b41, b42) = (b[1][0], b[1][1]);
            let (b51, b52) = (b[2][0], b[2][1]);
            let cross_b = 0.5 * (b32.abs() + b52.abs() + b41.abs());
            AdmissibilityReport::from_margins(
                3,
                FormulaFamily::L3General,
                vec![
                    a51 - 0.5 - 0.5 * (a52.abs() + a41.abs() + a53.abs()),
                    -a42 + 0.5 - 0.5 * (a52.abs() + a41.abs() + a43.abs()),
                    0.25 - 0.5 * (a53.abs() + a43.abs()),
                ],
                vec![
                    b31 - b51 - 0.5 - b31 * b31 - cross_b,
                    b42 - 0.5 - b32 * b32 - cross_b,
                ],
            )
        }
        (_, BoundaryCoefficients::Canonical { a, b }) => general_l_reduced(l, a, b),
        (_, BoundaryCoefficients::General { a, b }) => general_l_full(l, a, b),
        (_, BoundaryCoefficients::Raw { .. }) => unreachable!("raw handled above"),
    };
    Ok(report)
}

/// Reduced (diagonal) margin formulas for l >= 4. `a[j-1]` and `b[j-1]` are
/// the diagonal coefficients coupling D^{l+j} to D^{l-j}.
fn general_l_reduced(l: usize, a: &[f64], b: &[f64]) -> AdmissibilityReport {
    let lf = l as f64;
    let mut margins_b = vec![0.0; l - 1];
    let mut margins_a = vec![0.0; l];
    for j in 1..l {
        // The accumulated-coefficient sums run over earlier indices of the
        // same parity; for j = 1, 2 they are empty.
        let (sum_b, sum_a) = if j % 2 == 1 {
            let s_b: f64 = (1..=(j - 1) / 2).map(|m| b[2 * m - 2].abs()).sum();
            let s_a: f64 = (1..=(j - 1) / 2).map(|m| a[2 * m - 2].abs()).sum();
            (s_b, s_a)
        } else {
            let s_b: f64 = (1..=j / 2 - 1).map(|m| b[2 * m - 1].abs()).sum();
            let s_a: f64 = (1..=j / 2 - 1).map(|m| a[2 * m - 1].abs()).sum();
            (s_b, s_a)
        };
        let signed_b = if j % 2 == 1 { b[j - 1] } else { -b[j - 1] };
        let signed_a = if j % 2 == 1 { -a[j - 1] } else { a[j - 1] };
        margins_b[l - j - 1] = signed_b - 0.5 * sum_b * sum_b + 2.0 - lf;
        margins_a[l - j - 1] = signed_a - 0.5 * sum_a * sum_a - 2.0 * lf + 5.0;
    }
    margins_a[l - 1] = 0.25;
    AdmissibilityReport::from_margins(l, FormulaFamily::GeneralLReduced, margins_a, margins_b)
}

/// Full-matrix margin formulas for l >= 4, evaluated exactly as stated,
/// including the nested absolute-value sums.
fn general_l_full(l: usize, a: &[Vec<f64>], b: &[Vec<f64>]) -> AdmissibilityReport {
    let lf = l as f64;
    // b_{i,j} for i = l..2l-1 -> b[i-l][j-1]; a_{i,j} for i = l+1..2l-1 -> a[i-l-1][j-1]
    let b_at = |i: usize, j: usize| b[i - l][j - 1];
    let a_at = |i: usize, j: usize| a[i - l - 1][j - 1];

    let mut margins_b = vec![0.0; l - 1];
    for i in 1..l {
        let ks = (1..=(l - i)).filter(|k| 2 * k + i >= l);
        let mut diag = 0.0;
        for k in ks.clone() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            diag += sign * b_at(2 * k + i, i);
        }
        let mut cross = 0.0;
        for j in (1..l).filter(|&j| j != i) {
            let s: f64 = ks.clone().map(|k| b_at(2 * k + i, j).abs()).sum();
            cross += s * s;
        }
        let bl = b_at(l, i);
        margins_b[i - 1] = diag + (2.0 - lf) + 0.5 * (1.0 - lf) * bl * bl - 0.5 * cross;
    }

    let mut margins_a = vec![0.0; l];
    let mut last_column_total = 0.0;
    for i in 1..l {
        let ks = (1..=(l - i)).filter(|k| 2 * k + i > l);
        let mut diag = 0.0;
        for k in ks.clone() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            diag += sign * a_at(2 * k + i, i);
        }
        let mut cross = 0.0;
        for j in (1..l).filter(|&j| j != i) {
            let s: f64 = ks.clone().map(|k| a_at(2 * k + i, j).abs()).sum();
            cross += s * s;
        }
        let last_col: f64 = ks.clone().map(|k| a_at(2 * k + i, l).abs()).sum();
        last_column_total += last_col;
        margins_a[i - 1] = diag + (5.0 - 2.0 * lf) - 0.5 * cross - 0.5 * last_col;
    }
    margins_a[l - 1] = 0.25 - 0.5 * last_column_total;
    AdmissibilityReport::from_margins(l, FormulaFamily::GeneralLFull, margins_a, margins_b)
}

/// Overwrites the constrained jet entries with the values dictated by the
/// boundary conditions: D^l u(L) and the high derivatives at both endpoints
/// become linear combinations of the free low-order traces.
pub fn apply_bc_to_jet(
    l: usize,
    bc: &BoundaryCoefficients,
    jet: &BoundaryJet,
) -> Result<BoundaryJet, AdmissibilityError> {
    if jet.at_zero.len() != 2 * l || jet.at_length.len() != 2 * l {
        return Err(AdmissibilityError::JetLength {
            expected: 2 * l,
            got: jet.at_zero.len().min(jet.at_length.len()),
        });
    }
    if l == 1 {
        let mut out = jet.clone();
        out.at_length[0] = 0.0; // Du(L) = 0
        return Ok(out);
    }
    let (a_full, b_full) = bc
        .general_layout(l)
        .ok_or(AdmissibilityError::UnreducedRawForms)?;
    let mut out = jet.clone();
    for i in l + 1..=2 * l - 1 {
        out.at_zero[i - 1] = (1..=l)
            .map(|j| a_full[i - l - 1][j - 1] * jet.at_zero[j - 1])
            .sum();
    }
    for i in l..=2 * l - 1 {
        out.at_length[i - 1] = (1..l)
            .map(|j| b_full[i - l][j - 1] * jet.at_length[j - 1])
            .sum();
    }
    Ok(out)
}

/// Exact value of the boundary expression equal to
/// `sum_{j=1..l} (-1)^{j+1} (D^{2j+1}u, u)` for functions obeying the
/// boundary conditions: the jet is first made consistent with `bc`, then
///
/// `I = sum_{i=0}^{l-1} D^i u (sum_{k=1}^{l-i} (-1)^{k+1} D^{2k+i} u) |_0^L
///      - 1/2 sum_{j=1}^{l} (D^j u)^2 |_0^L`
///
/// is evaluated with u(0) = u(L) = 0.
pub fn boundary_form(
    l: usize,
    bc: &BoundaryCoefficients,
    jet: &BoundaryJet,
) -> Result<f64, AdmissibilityError> {
    let jet = apply_bc_to_jet(l, bc, jet)?;
    // D^0 = 0 at both endpoints, so the i = 0 term drops.
    let d0 = |k: usize| if k == 0 { 0.0 } else { jet.at_zero[k - 1] };
    let dl = |k: usize| if k == 0 { 0.0 } else { jet.at_length[k - 1] };
    let mut total = 0.0;
    for i in 0..l {
        let mut inner_l = 0.0;
        let mut inner_0 = 0.0;
        for k in 1..=(l - i) {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            inner_l += sign * dl(2 * k + i);
            inner_0 += sign * d0(2 * k + i);
        }
        total += dl(i) * inner_l - d0(i) * inner_0;
    }
    for j in 1..=l {
        total -= 0.5 * (dl(j) * dl(j) - d0(j) * d0(j));
    }
    Ok(total)
}

/// Both sides of the cross-term inequality used in the l >= 4 analysis at
/// x = L:
///
/// `lhs = sum_{i=1}^{l-3} sum_{k >= 1, 2k+i <= l-1} (-1)^{k+1} D^i u(L) D^{2k+i} u(L)`
/// `rhs = (3-l)/2 * sum_{i=1}^{l-1} (D^i u(L))^2`
///
/// The contract is `lhs >= rhs` for every jet. The jet lists D^1 u(L)
/// onward and is implicitly extended by zeros.
pub fn cross_term_bound(l: usize, jet_at_length: &[f64]) -> (f64, f64) {
    assert!(l >= 4, "the cross-term bound applies for l >= 4");
    let d = |k: usize| jet_at_length.get(k - 1).copied().unwrap_or(0.0);
    let mut lhs = 0.0;
    for i in 1..=(l - 3) {
        let mut k = 1;
        while 2 * k + i < l {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            lhs += sign * d(i) * d(2 * k + i);
            k += 1;
        }
    }
    let rhs = 0.5 * (3.0 - l as f64) * (1..l).map(|i| d(i) * d(i)).sum::<f64>();
    (lhs, rhs)
}

/// Draws a canonical-diagonal coefficient set whose margins all land in
/// `[margin_lo, margin_hi]` (the fixed quarter margins excepted). Margins
/// that depend on previously drawn coefficients are solved for the
/// coefficient that realizes the drawn margin, so the floor is exact.
pub fn sample_admissible_canonical(
    l: usize,
    margin_lo: f64,
    margin_hi: f64,
    rng: &mut impl Rng,
) -> BoundaryCoefficients {
    assert!(l >= 2, "canonical coefficients exist for l >= 2");
    assert!(
        margin_lo <= 0.25,
        "the fixed quarter margin caps the achievable floor"
    );
    let draw = |rng: &mut dyn rand::RngCore| rng.gen_range(margin_lo..=margin_hi);
    match l {
        2 => {
            let (ma, mb) = (draw(rng), draw(rng));
            BoundaryCoefficients::Canonical {
                a: vec![0.5 - ma],
                b: vec![0.5 + mb],
            }
        }
        3 => {
            let (m1, m2, m3, m4) = (draw(rng), draw(rng), draw(rng), draw(rng));
            BoundaryCoefficients::Canonical {
                a: vec![0.5 - m2, 0.5 + m1], // [a_{42}, a_{51}]
                b: vec![0.5 + m4, -0.5 - m3], // [b_{42}, b_{51}]
            }
        }
        _ => {
            let lf = l as f64;
            let mut a: Vec<f64> = vec![0.0; l - 1];
            let mut b: Vec<f64> = vec![0.0; l - 1];
            for j in 1..l {
                let (ma, mb) = (draw(rng), draw(rng));
                if j % 2 == 1 {
                    let s_b: f64 = (1..=(j - 1) / 2).map(|m| b[2 * m - 2].abs()).sum();
                    let s_a: f64 = (1..=(j - 1) / 2).map(|m| a[2 * m - 2].abs()).sum();
                    b[j - 1] = mb + 0.5 * s_b * s_b + lf - 2.0;
                    a[j - 1] = -(ma + 0.5 * s_a * s_a + 2.0 * lf - 5.0);
                } else {
                    let s_b: f64 = (1..=j / 2 - 1).map(|m| b[2 * m - 1].abs()).sum();
                    let s_a: f64 = (1..=j / 2 - 1).map(|m| a[2 * m - 1].abs()).sum();
                    b[j - 1] = -(mb + 0.5 * s_b * s_b + lf - 2.0);
                    a[j - 1] = ma + 0.5 * s_a * s_a + 2.0 * lf - 5.0;
                }
            }
            BoundaryCoefficients::Canonical { a, b }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_margin_values_l2() {
        let bc = BoundaryCoefficients::Canonical {
            a: vec![0.0],
            b: vec![1.0],
        };
        let r = margins(2, &bc).unwrap();
        assert_eq!(r.family, FormulaFamily::L2Reduced);
        assert_eq!(r.margins_a, vec![0.5, 0.25]);
        assert_eq!(r.margins_b, vec![0.5]);
        assert!(r.admissible);
        assert_eq!(r.min_margin(), 0.25);
    }

    #[test]
    fn worked_margin_values_l3() {
        let bc = BoundaryCoefficients::Canonical {
            a: vec![0.0, 1.0],  // a_{42} = 0, a_{51} = 1
            b: vec![1.0, -1.0], // b_{42} = 1, b_{51} = -1
        };
        let r = margins(3, &bc).unwrap();
        assert_eq!(r.family, FormulaFamily::L3Reduced);
        assert_eq!(r.margins_a, vec![0.5, 0.5, 0.25]);
        assert_eq!(r.margins_b, vec![0.5, 0.5]);
        assert!(r.admissible);
    }

    #[test]
    fn zero_coefficients_inadmissible_for_l4() {
        let bc = BoundaryCoefficients::Canonical {
            a: vec![0.0; 3],
            b: vec![0.0; 3],
        };
        let r = margins(4, &bc).unwrap();
        assert_eq!(r.family, FormulaFamily::GeneralLReduced);
        assert_eq!(r.margins_b[2], -2.0); // B_3 = 0 + 2 - 4
        assert!(!r.admissible);
    }

    #[test]
    fn zero_b_inadmissible_for_l2() {
        let bc = BoundaryCoefficients::Canonical {
            a: vec![0.0],
            b: vec![0.0],
        };
        let r = margins(2, &bc).unwrap();
        assert_eq!(r.margins_b[0], -0.5);
        assert!(!r.admissible);
    }

    #[test]
    fn l4_reduced_margins_match_term_by_term_evaluation() {
        // b_{53} = 3.5, b_{62} = -2.5, a_{53} = -3.5, a_{62} = 3.5, rest 0.
        let bc = BoundaryCoefficients::Canonical {
            a: vec![-3.5, 3.5, 0.0],
            b: vec![3.5, -2.5, 0.0],
        };
        let r = margins(4, &bc).unwrap();
        assert_eq!(r.margins_b[2], 1.5); // B_3 = b_{53} + 2 - 4
        assert_eq!(r.margins_b[1], 0.5); // B_2 = -b_{62} + 2 - 4
        assert_eq!(r.margins_a[2], 0.5); // A_3 = -a_{53} - 8 + 5
        assert_eq!(r.margins_a[1], 0.5); // A_2 = a_{62} - 8 + 5
        assert_eq!(r.margins_a[3], 0.25); // A_4
        // Remaining margins carry the square of the accumulated lower terms.
        assert_eq!(r.margins_b[0], 0.0 - 0.5 * 3.5f64.powi(2) + 2.0 - 4.0);
        assert_eq!(r.margins_a[0], 0.0 - 0.5 * 3.5f64.powi(2) - 8.0 + 5.0);
    }

    #[test]
    fn l1_report_is_vacuous() {
        let bc = BoundaryCoefficients::Canonical {
            a: vec![],
            b: vec![],
        };
        let r = margins(1, &bc).unwrap();
        assert!(r.admissible);
        assert!(r.margins_a.is_empty() && r.margins_b.is_empty());
        assert_eq!(r.min_margin(), 0.5);
    }

    #[test]
    fn raw_forms_are_rejected() {
        let bc = BoundaryCoefficients::Raw {
            alpha: vec![vec![0.0; 3]],
            beta: vec![vec![0.0; 3]; 2],
        };
        assert!(matches!(
            margins(2, &bc),
            Err(AdmissibilityError::UnreducedRawForms)
        ));
    }

    #[test]
    fn general_specializes_to_reduced_l2() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let a31 = rng.gen_range(-2.0..2.0);
            let b31 = rng.gen_range(-2.0..2.0);
            let full = BoundaryCoefficients::General {
                a: vec![vec![a31, 0.0]],
                b: vec![vec![0.0], vec![b31]],
            };
            let red = BoundaryCoefficients::Canonical {
                a: vec![a31],
                b: vec![b31],
            };
            let rf = margins(2, &full).unwrap();
            let rr = margins(2, &red).unwrap();
            assert_eq!(rf.margins_a, rr.margins_a);
            assert_eq!(rf.margins_b, rr.margins_b);
        }
    }

    #[test]
    fn general_specializes_to_reduced_l3() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a42 = rng.gen_range(-2.0..2.0);
            let a51 = rng.gen_range(-2.0..2.0);
            let b42 = rng.gen_range(-2.0..2.0);
            let b51 = rng.gen_range(-2.0..2.0);
            let full = BoundaryCoefficients::General {
                a: vec![vec![0.0, a42, 0.0], vec![a51, 0.0, 0.0]],
                b: vec![vec![0.0, 0.0], vec![0.0, b42], vec![b51, 0.0]],
            };
            let red = BoundaryCoefficients::Canonical {
                a: vec![a42, a51],
                b: vec![b42, b51],
            };
            let rf = margins(3, &full).unwrap();
            let rr = margins(3, &red).unwrap();
            assert_eq!(rf.margins_a, rr.margins_a);
            assert_eq!(rf.margins_b, rr.margins_b);
        }
    }

    #[test]
    fn boundary_form_matches_hand_value_l2() {
        let bc = BoundaryCoefficients::Canonical {
            a: vec![0.0],
            b: vec![1.0],
        };
        let jet = BoundaryJet {
            at_zero: vec![1.0, 1.0, 0.0, 0.0],
            at_length: vec![1.0, 0.0, 0.0, 0.0],
        };
        let i = boundary_form(2, &bc, &jet).unwrap();
        assert!((i - 1.5).abs() < 1e-14, "I = {i}");
    }

    #[test]
    fn boundary_form_is_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for l in 2..=5usize {
            let bc = sample_admissible_canonical(l, 0.1, 2.0, &mut rng);
            let jet = BoundaryJet::random(l, 2.0, &mut rng);
            let i1 = boundary_form(l, &bc, &jet).unwrap();
            for &c in &[0.0, -1.5, 3.25] {
                let scaled = BoundaryJet {
                    at_zero: jet.at_zero.iter().map(|v| c * v).collect(),
                    at_length: jet.at_length.iter().map(|v| c * v).collect(),
                };
                let got = boundary_form(l, &bc, &scaled).unwrap();
                let expect = c * c * i1;
                assert!(
                    (got - expect).abs() <= 1e-10 * (1.0 + expect.abs()),
                    "l={l} c={c}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn positivity_transfer_on_reduced_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for l in 2..=6usize {
            for _ in 0..50 {
                let bc = sample_admissible_canonical(l, 0.1, 2.0, &mut rng);
                let report = margins(l, &bc).unwrap();
                assert!(report.admissible, "sampled set must be admissible");
                let jet = BoundaryJet::random(l, 3.0, &mut rng);
                let i = boundary_form(l, &bc, &jet).unwrap();
                let consistent = apply_bc_to_jet(l, &bc, &jet).unwrap();
                let mut bound = 0.0;
                for i_idx in 1..l {
                    bound += report.margins_b[i_idx - 1]
                        * consistent.at_length[i_idx - 1].powi(2);
                }
                for i_idx in 1..=l {
                    bound += report.margins_a[i_idx - 1] * consistent.at_zero[i_idx - 1].powi(2);
                }
                assert!(
                    i >= bound - 1e-12 * consistent.norm_sq(),
                    "l={l}: I = {i} < bound = {bound}"
                );
                assert!(bound >= 0.0);
            }
        }
    }

    #[test]
    fn cross_term_bound_base_case() {
        let (lhs, rhs) = cross_term_bound(4, &[1.0, 0.0, 1.0]);
        assert_eq!(lhs, 1.0);
        assert_eq!(rhs, -1.0);
        let (lhs, rhs) = cross_term_bound(5, &[]);
        assert_eq!((lhs, rhs), (0.0, 0.0));
    }

    #[test]
    fn cross_term_bound_on_random_jets() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for l in 4..=8usize {
            for _ in 0..500 {
                let jet: Vec<f64> = (0..l - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let (lhs, rhs) = cross_term_bound(l, &jet);
                let scale: f64 = jet.iter().map(|v| v * v).sum();
                assert!(lhs >= rhs - 1e-12 * scale, "l={l}: {lhs} < {rhs}");
            }
        }
    }

    #[test]
    fn report_serializes_with_contract_keys() {
        let bc = BoundaryCoefficients::Canonical {
            a: vec![0.0],
            b: vec![1.0],
        };
        let r = margins(2, &bc).unwrap();
        let json = r.to_json_string();
        assert!(json.contains("\"family\": \"L2_reduced\""));
        assert!(json.contains("\"A\""));
        assert!(json.contains("\"B\""));
        assert!(json.contains("\"admissible\": true"));
    }
}
