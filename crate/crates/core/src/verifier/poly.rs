//! Univariate polynomials with exact rational coefficients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalPolynomial {
    /// `coeffs[i]` multiplies `x^i`; no trailing zeros.
    coeffs: Vec<BigRational>,
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl RationalPolynomial {
    pub fn new(coeffs: Vec<BigRational>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    /// From integer coefficients, lowest degree first.
    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigRational::from_integer(c.into())).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        Self::new(vec![c])
    }

    pub fn x() -> Self {
        Self::from_ints(&[0, 1])
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coefficients(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(BigRational::one());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// `self(inner(x))`, by Horner's scheme.
    pub fn compose(&self, inner: &Self) -> Self {
        let mut out = Self::zero();
        for c in self.coeffs.iter().rev() {
            out = &(&out * inner) + &Self::constant(c.clone());
        }
        out
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_f64().unwrap_or(f64::NAN);
        }
        acc
    }
}

impl Add for &RationalPolynomial {
    type Output = RationalPolynomial;
    fn add(self, rhs: Self) -> RationalPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let z = BigRational::zero();
        RationalPolynomial::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&z) + rhs.coeffs.get(i).unwrap_or(&z))
                .collect(),
        )
    }
}

impl Neg for &RationalPolynomial {
    type Output = RationalPolynomial;
    fn neg(self) -> RationalPolynomial {
        RationalPolynomial::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Sub for &RationalPolynomial {
    type Output = RationalPolynomial;
    fn sub(self, rhs: Self) -> RationalPolynomial {
        self + &(-rhs)
    }
}

impl Mul for &RationalPolynomial {
    type Output = RationalPolynomial;
    fn mul(self, rhs: Self) -> RationalPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return RationalPolynomial::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RationalPolynomial::new(out)
    }
}

macro_rules! owned_op {
    ($tr:ident, $m:ident) => {
        impl $tr for RationalPolynomial {
            type Output = RationalPolynomial;
            fn $m(self, rhs: Self) -> RationalPolynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
owned_op!(Add, add);
owned_op!(Sub, sub);
owned_op!(Mul, mul);

impl fmt::Display for RationalPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})x")?,
                _ => write!(f, "({c})x^{i}")?,
            }
        }
        Ok(())
    }
}

/// Outcome of one exact identity `lhs = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub id: String,
    pub statement: String,
    pub holds: bool,
    /// `lhs - rhs`, printed; `"0"` when the identity holds.
    pub remainder: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn check(id: &str, statement: &str, lhs: &RationalPolynomial, rhs: &RationalPolynomial) -> IdentityCheck {
    let rem = lhs - rhs;
    IdentityCheck {
        id: id.to_string(),
        statement: statement.to_string(),
        holds: rem.is_zero(),
        remainder: rem.to_string(),
        note: None,
    }
}

fn p(c: &[i64]) -> RationalPolynomial {
    RationalPolynomial::from_ints(c)
}

/// `(d - 1/2)^4 - 5/2 (d - 1/2)^2 - 7/16`.
fn shifted_quartic() -> RationalPolynomial {
    let x = RationalPolynomial::new(vec![rational(-1, 2), rational(1, 1)]);
    let quartic = RationalPolynomial::new(vec![
        rational(-7, 16),
        rational(0, 1),
        rational(-5, 2),
        rational(0, 1),
        rational(1, 1),
    ]);
    quartic.compose(&x)
}

/// The exact identities behind the negativity of `W` at its maximum, plus the
/// mass-ratio relation for the first Lagrange point.
///
/// Identity (iv) is checked against its full factorization
/// `40 (ρ-1)² (ρ+1)² (3/2 - ρ²)`; the shorter display without `(ρ+1)²` is
/// checked separately and reported as a display mismatch.
pub fn polynomial_identities() -> Vec<IdentityCheck> {
    let mut out = Vec::new();

    // (i)
    let lhs = p(&[-1, 2, -1, 1, -2, 1]);
    let rhs = &p(&[1, 1, 1]) * &p(&[-1, 1]).pow(3);
    out.push(check("i", "d^5-2d^4+d^3-d^2+2d-1 = (d^2+d+1)(d-1)^3", &lhs, &rhs));

    // (ii)
    let lhs = p(&[-1, 2, -1, -2, 1]);
    out.push(check(
        "ii",
        "d^4-2d^3-d^2+2d-1 = (d-1/2)^4-5/2(d-1/2)^2-7/16",
        &lhs,
        &shifted_quartic(),
    ));

    // (iii)
    let lhs = &p(&[3, 0, -1]).pow(2) - &p(&[1, 0, 1, 0, -1]).scale(&rational(4, 1));
    let rhs = &p(&[1, -1]).pow(2) * &p(&[1, 1]).pow(2);
    let rhs = rhs.scale(&rational(5, 1));
    out.push(check("iii", "(3-d^2)^2-4(1+d^2-d^4) = 5(1-d)^2(1+d)^2", &lhs, &rhs));

    // (iv)
    let lhs = &(&p(&[10, 0, -6]).pow(2) * &p(&[1, 0, 1, 0, -1])) - &p(&[-10, 0, 4, 0, 2]).pow(2);
    let rhs = &p(&[0, 0, 20]) * &p(&[3, 0, -8, 0, 7, 0, -2]);
    out.push(check(
        "iv",
        "(10-6r^2)^2(-r^4+r^2+1)-(2r^4+4r^2-10)^2 = 20r^2(3-8r^2+7r^4-2r^6)",
        &lhs,
        &rhs,
    ));

    // (v) with x = r^2
    let lhs = p(&[3, -8, 7, -2]);
    let rhs = &p(&[-1, 1]).pow(2) * &p(&[3, -2]);
    out.push(check("v", "3-8x+7x^2-2x^3 = (x-1)^2(3-2x)", &lhs, &rhs));

    // (iv') the factored numerator, in r
    let sextic = p(&[3, 0, -8, 0, 7, 0, -2]).scale(&rational(20, 1));
    let three_halves = RationalPolynomial::new(vec![rational(3, 2), rational(0, 1), rational(-1, 1)]);
    let full = &(&p(&[-1, 1]).pow(2) * &p(&[1, 1]).pow(2)) * &three_halves;
    out.push(check(
        "iv-factored",
        "20(3-8r^2+7r^4-2r^6) = 40(r-1)^2(r+1)^2(3/2-r^2)",
        &sextic,
        &full.scale(&rational(40, 1)),
    ));
    let shown = &p(&[-1, 1]).pow(2) * &three_halves;
    let mut display = check(
        "iv-display",
        "20(3-8r^2+7r^4-2r^6) = 40(r-1)^2(3/2-r^2)",
        &sextic,
        &shown.scale(&rational(40, 1)),
    );
    display.note = Some(
        "the short factorization drops the positive factor (r+1)^2; the sign argument is unaffected"
            .to_string(),
    );
    out.push(display);

    // the L1 quintic is A(r) + mu B(r), which gives mu as a function of d
    let a = p(&[0, 0, 0, 3, -3, 1]);
    let b = p(&[-1, 2, -1, -2, 1]);
    let mut all = true;
    for (n, dd) in [(1, 10), (3, 10), (1, 2), (7, 9)] {
        let mu = rational(n, dd);
        let quintic = RationalPolynomial::new(vec![
            -mu.clone(),
            mu.clone() * rational(2, 1),
            -mu.clone(),
            rational(3, 1) - mu.clone() * rational(2, 1),
            mu.clone() - rational(3, 1),
            rational(1, 1),
        ]);
        all &= (&quintic - &(&a + &b.scale(&mu))).is_zero();
    }
    out.push(IdentityCheck {
        id: "quintic".to_string(),
        statement: "r^5-(3-mu)r^4+(3-2mu)r^3-mu r^2+2mu r-mu = (r^5-3r^4+3r^3) + mu(r^4-2r^3-r^2+2r-1)"
            .to_string(),
        holds: all,
        remainder: if all { "0" } else { "nonzero" }.to_string(),
        note: None,
    });

    // numerator of W at its maximum after substituting mu(d)
    let lhs = &b + &a;
    out.push(check(
        "numerator",
        "(d^4-2d^3-d^2+2d-1) + (d^5-3d^4+3d^3) = d^5-2d^4+d^3-d^2+2d-1",
        &lhs,
        &p(&[-1, 2, -1, 1, -2, 1]),
    ));
    out
}

/// Ids from [`polynomial_identities`] that are displays rather than claims.
pub const DISPLAY_ONLY: &[&str] = &["iv-display"];

/// Maximum of `(d - 1/2)^4 - 5/2 (d - 1/2)^2 - 7/16` over an `n`-point grid of `[0, 1]`.
pub fn shifted_quartic_max(n: usize) -> (f64, f64) {
    let q = shifted_quartic();
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let d = i as f64 / (n - 1) as f64;
            (q.eval_f64(d), d)
        })
        .fold((f64::NEG_INFINITY, f64::NAN), |a, b| if b.0 > a.0 { b } else { a })
}

/// `(h'(t), exact)` for `h(t) = (2-t)^4 / (16 (1-t^2)(1-t)^2)` at a rational `t`,
/// by the quotient rule in exact arithmetic.
pub fn h_prime_exact(t: &BigRational) -> BigRational {
    let num = p(&[2, -1]).pow(4);
    let den = (&p(&[1, 0, -1]) * &p(&[1, -1]).pow(2)).scale(&rational(16, 1));
    let top = &(&num.derivative() * &den) - &(&num * &den.derivative());
    let d = den.eval(t);
    top.eval(t) / (d.clone() * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identities_hold_exactly() {
        for c in polynomial_identities() {
            if DISPLAY_ONLY.contains(&c.id.as_str()) {
                assert!(!c.holds, "{c:?}");
            } else {
                assert!(c.holds, "{c:?}");
                assert_eq!(c.remainder, "0");
            }
        }
    }

    #[test]
    fn shifted_quartic_is_negative() {
        let (max, at) = shifted_quartic_max(2001);
        assert!((max + 7.0 / 16.0).abs() < 1e-15 && (at - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_iv_numeric_spot_check() {
        let r: f64 = 0.7;
        let lhs = (10.0 - 6.0 * r * r).powi(2) * (-r.powi(4) + r * r + 1.0)
            - (2.0 * r.powi(4) + 4.0 * r * r - 10.0).powi(2);
        let exact = p(&[0, 0, 20]) * p(&[3, 0, -8, 0, 7, 0, -2]);
        let at = exact.eval(&rational(7, 10)).to_f64().unwrap();
        assert!((lhs - at).abs() < 1e-12, "{lhs} vs {at}");
    }

    #[test]
    fn h_prime_exact_matches_closed_form() {
        let exact = h_prime_exact(&rational(1, 2)).to_f64().unwrap();
        let closed = crate::contactcert::h_prime(0.5).unwrap();
        assert!((exact - closed).abs() < 1e-12);
    }

    #[test]
    fn compose_and_derivative() {
        let q = p(&[1, 2, 3]);
        assert_eq!(q.compose(&RationalPolynomial::x()), q);
        assert_eq!(q.derivative(), p(&[2, 6]));
        assert_eq!(p(&[1, 1]).compose(&p(&[0, 0, 1])), p(&[1, 0, 1]));
        assert_eq!(q.degree(), Some(2));
        assert_eq!(RationalPolynomial::zero().degree(), None);
    }

    fn poly_strategy() -> impl Strategy<Value = RationalPolynomial> {
        prop::collection::vec(-20i64..20, 0..6).prop_map(|c| p(&c))
    }

    proptest! {
        #[test]
        fn ring_laws(a in poly_strategy(), b in poly_strategy(), c in poly_strategy()) {
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert!((&a - &a).is_zero());
        }

        #[test]
        fn evaluation_is_a_homomorphism(a in poly_strategy(), b in poly_strategy(), n in -9i64..9) {
            let x = rational(n, 7);
            prop_assert_eq!((&a * &b).eval(&x), a.eval(&x) * b.eval(&x));
            prop_assert_eq!(a.compose(&b).eval(&x), a.eval(&b.eval(&x)));
        }
    }
}
