//! Exact univariate polynomial calculus.
//!
//! Differentiation is an exact coefficient shift and definite integrals are
//! evaluated through the antiderivative, so there is no quadrature error
//! anywhere in this module. Coefficients are plain doubles; the integral and
//! boundary-term accumulations run compensated so that identity residuals
//! stay far below the verification tolerances even at degree 30 and L = 10.

use crate::linalg::Dd;
use rand::Rng;

/// Dense univariate polynomial; `coeffs[k]` multiplies `x^k`.
/// The zero polynomial has an empty coefficient list and the trailing
/// coefficient is nonzero otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds from coefficients, trimming trailing exact zeros.
    pub fn new(mut coeffs: Vec<f64>) -> Polynomial {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Polynomial {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Polynomial {
        Polynomial::new(vec![c])
    }

    /// `c * x^k`.
    pub fn monomial(k: usize, c: f64) -> Polynomial {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Polynomial::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Highest power with nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.coeffs.get(k).copied().unwrap_or(0.0)
                + other.coeffs.get(k).copied().unwrap_or(0.0);
        }
        Polynomial::new(out)
    }

    /// Uniform [-1, 1] coefficients up to `degree` inclusive.
    pub fn random(degree: usize, rng: &mut impl Rng) -> Polynomial {
        Polynomial::new((0..=degree).map(|_| rng.gen_range(-1.0..=1.0)).collect())
    }
}

impl std::fmt::Display for Polynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { "-" } else { "+" })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", c.abs())?,
                1 => write!(f, "{}*x", c.abs())?,
                _ => write!(f, "{}*x^{}", c.abs(), k)?,
            }
        }
        Ok(())
    }
}

/// Exact k-th derivative.
pub fn differentiate(p: &Polynomial, k: usize) -> Polynomial {
    let mut c = p.coeffs.to_vec();
    for _ in 0..k {
        if c.is_empty() {
            break;
        }
        c = c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &v)| i as f64 * v)
            .collect();
    }
    Polynomial::new(c)
}

/// Weight of the L^2-style pairing: plain measure or an extra factor x.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weight {
    One,
    X,
}

/// Exact `\int_0^L w(x) p(x) q(x) dx` via antiderivative evaluation.
pub fn inner_product(p: &Polynomial, q: &Polynomial, weight: Weight, length: f64) -> f64 {
    let mut prod = DdPoly::from(p).mul(&DdPoly::from(q));
    if weight == Weight::X {
        prod = prod.mul_x();
    }
    prod.integral(length).to_f64()
}

/// `||p||^2` on (0, L).
pub fn l2_norm_sq(p: &Polynomial, length: f64) -> f64 {
    inner_product(p, p, Weight::One, length)
}

/// The four integration-by-parts identities checked on polynomials:
/// the single pairing `(D^{2j+1}u, u)`, its x-weighted variant, and the
/// alternating sums over j = 1..l of both.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Identity {
    Single { j: usize },
    SingleWeighted { j: usize },
    Alternating { l: usize },
    AlternatingWeighted { l: usize },
}

/// Integral side, boundary/norm side and their absolute difference.
#[derive(Clone, Copy, Debug)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Evaluates both sides of an integration-by-parts identity on `u` over
/// (0, L). The left side is the exact integral; the right side is assembled
/// from endpoint values of derivatives (plus exact derivative norms for the
/// weighted identities).
pub fn lemma_residual(u: &Polynomial, identity: Identity, length: f64) -> IdentityCheck {
    let ctx = IdentityContext::new(u, length, max_derivative_order(identity));
    let (lhs, rhs) = match identity {
        Identity::Single { j } => (ctx.pairing(j), ctx.single_boundary(j)),
        Identity::SingleWeighted { j } => (ctx.pairing_weighted(j), ctx.single_weighted_boundary(j)),
        Identity::Alternating { l } => {
            let lhs = (1..=l)
                .map(|j| ctx.pairing(j) * sign(j + 1))
                .fold(Dd::ZERO, |a, b| a + b);
            (lhs, ctx.alternating_boundary(l))
        }
        Identity::AlternatingWeighted { l } => {
            let lhs = (1..=l)
                .map(|j| ctx.pairing_weighted(j) * sign(j + 1))
                .fold(Dd::ZERO, |a, b| a + b);
            (lhs, ctx.alternating_weighted_boundary(l))
        }
    };
    IdentityCheck {
        lhs: lhs.to_f64(),
        rhs: rhs.to_f64(),
        residual: (lhs - rhs).abs().to_f64(),
    }
}

fn max_derivative_order(identity: Identity) -> usize {
    match identity {
        Identity::Single { j } | Identity::SingleWeighted { j } => 2 * j + 1,
        Identity::Alternating { l } | Identity::AlternatingWeighted { l } => 2 * l + 1,
    }
}

#[inline]
fn sign(k: usize) -> Dd {
    if k.is_multiple_of(2) {
        Dd::ONE
    } else {
        -Dd::ONE
    }
}

/// Derivatives of u with cached endpoint values, all in compensated form.
struct IdentityContext {
    derivs: Vec<DdPoly>,
    at_zero: Vec<Dd>,
    at_length: Vec<Dd>,
    length: Dd,
}

impl IdentityContext {
    fn new(u: &Polynomial, length: f64, max_order: usize) -> IdentityContext {
        let l = Dd::from_f64(length);
        let mut derivs = Vec::with_capacity(max_order + 1);
        derivs.push(DdPoly::from(u));
        for k in 1..=max_order {
            let next = derivs[k - 1].derivative();
            derivs.push(next);
        }
        let at_zero = derivs.iter().map(|p| p.eval(Dd::ZERO)).collect();
        let at_length = derivs.iter().map(|p| p.eval(l)).collect();
        IdentityContext {
            derivs,
            at_zero,
            at_length,
            length: l,
        }
    }

    fn d0(&self, k: usize) -> Dd {
        self.at_zero[k]
    }

    fn dl(&self, k: usize) -> Dd {
        self.at_length[k]
    }

    /// `[D^a u * D^b u]_0^L`.
    fn bracket(&self, a: usize, b: usize) -> Dd {
        self.dl(a) * self.dl(b) - self.d0(a) * self.d0(b)
    }

    /// `[x * D^a u * D^b u]_0^L`, i.e. L * (value at L).
    fn bracket_x(&self, a: usize, b: usize) -> Dd {
        self.length * self.dl(a) * self.dl(b)
    }

    /// `(D^{2j+1} u, u)`, exactly.
    fn pairing(&self, j: usize) -> Dd {
        self.derivs[2 * j + 1]
            .mul(&self.derivs[0])
            .integral_dd(self.length)
    }

    /// `(D^{2j+1} u, x u)`, exactly.
    fn pairing_weighted(&self, j: usize) -> Dd {
        self.derivs[2 * j + 1]
            .mul(&self.derivs[0])
            .mul_x()
            .integral_dd(self.length)
    }

    fn norm_sq(&self, k: usize) -> Dd {
        self.derivs[k].mul(&self.derivs[k]).integral_dd(self.length)
    }

    fn single_boundary(&self, j: usize) -> Dd {
        let mut rhs = Dd::ZERO;
        for k in 1..=j {
            rhs += self.bracket(k - 1, 2 * j + 1 - k) * sign(k + 1);
        }
        rhs + self.bracket(j, j) * sign(j) * 0.5
    }

    fn single_weighted_boundary(&self, j: usize) -> Dd {
        let mut rhs = Dd::ZERO;
        for k in 1..=j {
            rhs += self.bracket_x(k - 1, 2 * j + 1 - k) * sign(k + 1);
        }
        rhs += self.bracket_x(j, j) * sign(j) * 0.5;
        for k in 1..=j {
            rhs += self.bracket(k - 1, 2 * j - k) * sign(k) * k as f64;
        }
        rhs + self.norm_sq(j) * sign(j + 1) * ((2 * j + 1) as f64 / 2.0)
    }

    fn alternating_boundary(&self, l: usize) -> Dd {
        let mut rhs = Dd::ZERO;
        for i in 0..l {
            let mut inner_l = Dd::ZERO;
            let mut inner_0 = Dd::ZERO;
            for k in 1..=(l - i) {
                inner_l += self.dl(2 * k + i) * sign(k + 1);
                inner_0 += self.d0(2 * k + i) * sign(k + 1);
            }
            rhs += self.dl(i) * inner_l - self.d0(i) * inner_0;
        }
        for j in 1..=l {
            rhs -= self.bracket(j, j) * 0.5;
        }
        rhs
    }

    fn alternating_weighted_boundary(&self, l: usize) -> Dd {
        let mut rhs = Dd::ZERO;
        // x-weighted first sum only survives at x = L.
        for i in 0..l {
            let mut inner_l = Dd::ZERO;
            for k in 1..=(l - i) {
                inner_l += self.dl(2 * k + i) * sign(k + 1);
            }
            rhs += self.length * self.dl(i) * inner_l;
        }
        for i in 0..l {
            let mut inner_l = Dd::ZERO;
            let mut inner_0 = Dd::ZERO;
            for k in 1..=(l - i) {
                inner_l += self.dl(2 * k + i - 1) * sign(k);
                inner_0 += self.d0(2 * k + i - 1) * sign(k);
            }
            rhs += (self.dl(i) * inner_l - self.d0(i) * inner_0) * ((1 + i) as f64);
        }
        for j in 1..=l {
            rhs -= self.length * self.dl(j) * self.dl(j) * 0.5;
        }
        for j in 1..=l {
            rhs += self.norm_sq(j) * ((2 * j + 1) as f64 / 2.0);
        }
        rhs
    }
}

/// Compensated mirror of `Polynomial` used for the identity bookkeeping.
struct DdPoly(Vec<Dd>);

impl DdPoly {
    fn from(p: &Polynomial) -> DdPoly {
        DdPoly(p.coeffs().iter().map(|&c| Dd::from_f64(c)).collect())
    }

    fn derivative(&self) -> DdPoly {
        DdPoly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    fn mul(&self, other: &DdPoly) -> DdPoly {
        if self.0.is_empty() || other.0.is_empty() {
            return DdPoly(Vec::new());
        }
        let mut out = vec![Dd::ZERO; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        DdPoly(out)
    }

    fn mul_x(&self) -> DdPoly {
        if self.0.is_empty() {
            return DdPoly(Vec::new());
        }
        let mut out = Vec::with_capacity(self.0.len() + 1);
        out.push(Dd::ZERO);
        out.extend_from_slice(&self.0);
        DdPoly(out)
    }

    fn eval(&self, x: Dd) -> Dd {
        self.0.iter().rev().fold(Dd::ZERO, |acc, &c| acc * x + c)
    }

    /// `\int_0^L` via the antiderivative (whose constant term is zero).
    fn integral_dd(&self, length: Dd) -> Dd {
        let anti: Vec<Dd> = std::iter::once(Dd::ZERO)
            .chain(self.0.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64))
            .collect();
        DdPoly(anti).eval(length)
    }

    fn integral(&self, length: f64) -> Dd {
        self.integral_dd(Dd::from_f64(length))
    }
}
