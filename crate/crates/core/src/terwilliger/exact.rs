//! Exact scalars: arbitrary-precision rationals and values of the form
//! `q · √s` with `q` rational and `s` a square-free positive integer.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational in canonical form (gcd 1, positive
/// denominator). Backed by `num_rational::BigRational`, which maintains
/// exactly that invariant.
pub type Rational = BigRational;

/// Rational from an integer.
pub fn rational(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Rational from a numerator/denominator pair.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact binomial coefficient with nonnegative arguments; zero when
/// `k > n`.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut value = BigInt::one();
    for j in 0..k {
        value = value * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    value
}

/// Rising factorial `(a)_k = a (a+1) ⋯ (a+k-1)`, with `(a)_0 = 1`.
pub fn pochhammer(a: &Rational, k: u64) -> Rational {
    let mut value = Rational::one();
    for j in 0..k {
        value *= a + Rational::from_integer(BigInt::from(j));
    }
    value
}

/// An exact value `q · √s` with `q` rational and `s` a square-free
/// positive integer. Zero is represented as `0 · √1`, plain rationals as
/// `q · √1`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QuadExact {
    coefficient: Rational,
    radicand: u64,
}

impl QuadExact {
    pub fn zero() -> QuadExact {
        QuadExact {
            coefficient: Rational::zero(),
            radicand: 1,
        }
    }

    pub fn one() -> QuadExact {
        QuadExact::from_rational(Rational::one())
    }

    pub fn from_rational(q: Rational) -> QuadExact {
        QuadExact {
            coefficient: q,
            radicand: 1,
        }
    }

    /// Exact square root of a nonnegative rational: `√(p/q) = √(pq) / q`,
    /// with the square part of `pq` pulled out of the radical.
    pub fn sqrt_of_rational(r: &Rational) -> Result<QuadExact> {
        if r.is_negative() {
            return Err(Error::ExactInconsistency(format!(
                "square root of negative rational {r}"
            )));
        }
        if r.is_zero() {
            return Ok(QuadExact::zero());
        }
        let num: u64 = big_to_u64(r.numer())?;
        let den: u64 = big_to_u64(r.denom())?;
        let radicand_raw = num.checked_mul(den).ok_or_else(|| {
            Error::ExactInconsistency(format!("radicand overflow for sqrt({r})"))
        })?;
        let (square_part, square_free) = extract_square(radicand_raw);
        Ok(QuadExact {
            coefficient: Rational::new(BigInt::from(square_part), BigInt::from(den)),
            radicand: square_free,
        })
    }

    pub fn coefficient(&self) -> &Rational {
        &self.coefficient
    }

    pub fn radicand(&self) -> u64 {
        self.radicand
    }

    pub fn is_zero(&self) -> bool {
        self.coefficient.is_zero()
    }

    /// The value as a rational, when the radical part is trivial.
    pub fn as_rational(&self) -> Option<&Rational> {
        (self.radicand == 1 || self.is_zero()).then_some(&self.coefficient)
    }

    pub fn negate(&self) -> QuadExact {
        QuadExact {
            coefficient: -self.coefficient.clone(),
            radicand: self.radicand,
        }
    }

    /// Exact product; the product of two square-free radicands reduces by
    /// pulling out their gcd squared.
    pub fn mul(&self, other: &QuadExact) -> QuadExact {
        if self.is_zero() || other.is_zero() {
            return QuadExact::zero();
        }
        let g = gcd(self.radicand, other.radicand);
        QuadExact {
            coefficient: &self.coefficient * &other.coefficient * Rational::from_integer(g.into()),
            radicand: (self.radicand / g) * (other.radicand / g),
        }
    }

    pub fn mul_rational(&self, q: &Rational) -> QuadExact {
        let out = QuadExact {
            coefficient: &self.coefficient * q,
            radicand: self.radicand,
        };
        out.normalized()
    }

    /// Exact sum; defined only when the radicands agree (or one side is
    /// zero). Mixed radicands indicate a bug in the caller and surface as
    /// an error.
    pub fn add(&self, other: &QuadExact) -> Result<QuadExact> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.radicand != other.radicand {
            return Err(Error::ExactInconsistency(format!(
                "cannot add sqrt({}) and sqrt({}) terms exactly",
                self.radicand, other.radicand
            )));
        }
        Ok(QuadExact {
            coefficient: &self.coefficient + &other.coefficient,
            radicand: self.radicand,
        }
        .normalized())
    }

    pub fn sub(&self, other: &QuadExact) -> Result<QuadExact> {
        self.add(&other.negate())
    }

    /// `q² s` as a rational; always exact.
    pub fn square(&self) -> Rational {
        &self.coefficient * &self.coefficient * Rational::from_integer(self.radicand.into())
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.coefficient) * (self.radicand as f64).sqrt()
    }

    fn normalized(self) -> QuadExact {
        if self.coefficient.is_zero() {
            QuadExact::zero()
        } else {
            self
        }
    }
}

impl std::fmt::Display for QuadExact {
    /// Renders `"p/q"` for rational values and `"p/q*sqrt(s)"` otherwise.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.radicand == 1 || self.is_zero() {
            write!(f, "{}", self.coefficient)
        } else {
            write!(f, "{}*sqrt({})", self.coefficient, self.radicand)
        }
    }
}

/// Rational to nearest f64, for reporting table values.
pub fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

fn big_to_u64(v: &BigInt) -> Result<u64> {
    use num_traits::ToPrimitive;
    v.to_u64().ok_or_else(|| {
        Error::ExactInconsistency(format!(
            "value {v} does not fit in u64 for radical reduction"
        ))
    })
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Splits `n = c² · s` with `s` square-free; returns `(c, s)`.
fn extract_square(mut n: u64) -> (u64, u64) {
    let mut square = 1u64;
    let mut free = 1u64;
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut count = 0u32;
            while n.is_multiple_of(p) {
                n /= p;
                count += 1;
            }
            square *= p.pow(count / 2);
            if count % 2 == 1 {
                free *= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        free *= n;
    }
    (square, free)
}

/// Accumulator for sums of `QuadExact` terms with possibly different
/// radicands; exact zero and rationality tests stay exact.
#[derive(Debug, Default, Clone)]
pub struct QuadSum {
    terms: std::collections::BTreeMap<u64, Rational>,
}

impl QuadSum {
    pub fn new() -> QuadSum {
        QuadSum::default()
    }

    pub fn accumulate(&mut self, value: &QuadExact) {
        if value.is_zero() {
            return;
        }
        let entry = self
            .terms
            .entry(value.radicand)
            .or_insert_with(Rational::zero);
        *entry += value.coefficient();
        if entry.is_zero() {
            self.terms.remove(&value.radicand);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The sum as a single `QuadExact`, when it is one.
    pub fn as_single(&self) -> Option<QuadExact> {
        match self.terms.len() {
            0 => Some(QuadExact::zero()),
            1 => {
                let (&radicand, coefficient) = self.terms.iter().next().unwrap();
                Some(QuadExact {
                    coefficient: coefficient.clone(),
                    radicand,
                })
            }
            _ => None,
        }
    }
}
