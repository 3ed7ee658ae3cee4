//! Exact arithmetic in the Laurent ring `Z[x, 1/x]` and in its additive
//! quotient `Λ⁰ = Z[x, 1/x] / <xⁿ - x⁻ⁿ, x⁰, x⁻¹>`.
//!
//! `Λ⁰` is free abelian on `x², x³, …`; every element has a unique
//! representative with exponents `k ≥ 2`, which is what [`Lambda0`] stores.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Sparse Laurent polynomial with arbitrary-precision coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct LaurentPoly {
    coeffs: BTreeMap<i64, BigInt>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `coef · x^exp`
    pub fn monomial(exp: i64, coef: impl Into<BigInt>) -> Self {
        let mut p = Self::zero();
        p.add_term(exp, coef.into());
        p
    }

    pub fn from_terms<I, C>(terms: I) -> Self
    where
        I: IntoIterator<Item = (i64, C)>,
        C: Into<BigInt>,
    {
        let mut p = Self::zero();
        for (e, c) in terms {
            p.add_term(e, c.into());
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, exp: i64) -> BigInt {
        self.coeffs.get(&exp).cloned().unwrap_or_default()
    }

    /// Nonzero terms in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigInt)> {
        self.coeffs.iter().map(|(e, c)| (*e, c))
    }

    fn add_term(&mut self, exp: i64, coef: BigInt) {
        add_into(&mut self.coeffs, exp, coef);
    }
}

fn add_into<K: Ord + Copy>(map: &mut BTreeMap<K, BigInt>, exp: K, coef: BigInt) {
    if coef.is_zero() {
        return;
    }
    let slot = map.entry(exp).or_insert_with(BigInt::zero);
    *slot += coef;
    if slot.is_zero() {
        map.remove(&exp);
    }
}

pub fn laurent_add(a: &LaurentPoly, b: &LaurentPoly) -> LaurentPoly {
    let mut out = a.clone();
    for (e, c) in b.terms() {
        out.add_term(e, c.clone());
    }
    out
}

pub fn laurent_neg(a: &LaurentPoly) -> LaurentPoly {
    LaurentPoly { coeffs: a.coeffs.iter().map(|(e, c)| (*e, -c)).collect() }
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        laurent_add(self, rhs)
    }
}

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        laurent_neg(self)
    }
}

/// Canonical element of `Λ⁰`: integer coefficients on `x^k`, `k ≥ 2`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Lambda0 {
    coeffs: BTreeMap<u64, BigInt>,
}

impl Lambda0 {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Image of `coef · x^exp` in the quotient.
    pub fn monomial(exp: i64, coef: impl Into<BigInt>) -> Self {
        lambda0_reduce(&LaurentPoly::monomial(exp, coef))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of the canonical monomial `x^exp`; exponents below 2 are 0.
    pub fn coeff(&self, exp: u64) -> BigInt {
        self.coeffs.get(&exp).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, &BigInt)> {
        self.coeffs.iter().map(|(e, c)| (*e, c))
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// `Some(n)` when the element is `n·x²` (including `n = 0`).
    pub fn as_x2_multiple(&self) -> Option<BigInt> {
        match self.coeffs.len() {
            0 => Some(BigInt::zero()),
            1 => self.coeffs.get(&2).cloned(),
            _ => None,
        }
    }

    /// Lift back to the Laurent ring using the canonical representatives.
    pub fn to_laurent(&self) -> LaurentPoly {
        LaurentPoly::from_terms(self.terms().map(|(e, c)| (e as i64, c.clone())))
    }
}

/// Reduce a Laurent polynomial to its canonical form in `Λ⁰`.
///
/// `x^k ↦ x^|k|` for `|k| ≥ 2`, and `x⁻¹, x⁰, x¹ ↦ 0`.
pub fn lambda0_reduce(a: &LaurentPoly) -> Lambda0 {
    let mut coeffs = BTreeMap::new();
    for (e, c) in a.terms() {
        let k = e.unsigned_abs();
        if k >= 2 {
            add_into(&mut coeffs, k, c.clone());
        }
    }
    Lambda0 { coeffs }
}

pub fn lambda0_add(a: &Lambda0, b: &Lambda0) -> Lambda0 {
    let mut coeffs = a.coeffs.clone();
    for (e, c) in b.terms() {
        add_into(&mut coeffs, e, c.clone());
    }
    Lambda0 { coeffs }
}

pub fn lambda0_neg(a: &Lambda0) -> Lambda0 {
    Lambda0 { coeffs: a.coeffs.iter().map(|(e, c)| (*e, -c)).collect() }
}

pub fn lambda0_eq(a: &Lambda0, b: &Lambda0) -> bool {
    a.coeffs == b.coeffs
}

impl Add for &Lambda0 {
    type Output = Lambda0;
    fn add(self, rhs: &Lambda0) -> Lambda0 {
        lambda0_add(self, rhs)
    }
}

impl Sub for &Lambda0 {
    type Output = Lambda0;
    fn sub(self, rhs: &Lambda0) -> Lambda0 {
        lambda0_add(self, &lambda0_neg(rhs))
    }
}

impl Neg for &Lambda0 {
    type Output = Lambda0;
    fn neg(self) -> Lambda0 {
        lambda0_neg(self)
    }
}

impl std::iter::Sum for Lambda0 {
    fn sum<I: Iterator<Item = Lambda0>>(iter: I) -> Lambda0 {
        iter.fold(Lambda0::zero(), |acc, x| lambda0_add(&acc, &x))
    }
}

fn fmt_terms<E: fmt::Display>(f: &mut fmt::Formatter<'_>, terms: impl Iterator<Item = (E, BigInt)>) -> fmt::Result {
    let mut first = true;
    for (e, c) in terms {
        let neg = c.is_negative();
        let mag = c.abs();
        if first {
            if neg {
                write!(f, "-")?;
            }
        } else {
            write!(f, " {} ", if neg { "-" } else { "+" })?;
        }
        if mag != BigInt::from(1) {
            write!(f, "{mag}")?;
        }
        write!(f, "x^{e}")?;
        first = false;
    }
    if first {
        write!(f, "0")?;
    }
    Ok(())
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_terms(f, self.terms().map(|(e, c)| (e, c.clone())))
    }
}

impl fmt::Display for Lambda0 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_terms(f, self.terms().map(|(e, c)| (e, c.clone())))
    }
}

// JSON form: {"terms": [{"exp": k, "coef": c}, ...]} with increasing exponents.
// Coefficients are written as JSON integers when they fit in i64, and as
// decimal strings otherwise.

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exp: u64,
    coef: CoefRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoefRepr {
    Small(i64),
    Big(String),
}

#[derive(Serialize, Deserialize)]
struct Lambda0Repr {
    terms: Vec<TermRepr>,
}

impl Serialize for Lambda0 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let terms = self
            .terms()
            .map(|(exp, c)| TermRepr {
                exp,
                coef: match i64::try_from(c) {
                    Ok(v) => CoefRepr::Small(v),
                    Err(_) => CoefRepr::Big(c.to_string()),
                },
            })
            .collect();
        Lambda0Repr { terms }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lambda0 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = Lambda0Repr::deserialize(d)?;
        let mut coeffs = BTreeMap::new();
        let mut last: Option<u64> = None;
        for t in repr.terms {
            if t.exp < 2 {
                return Err(D::Error::custom(format!("exponent {} below 2", t.exp)));
            }
            if last.is_some_and(|l| l >= t.exp) {
                return Err(D::Error::custom("exponents must be strictly increasing"));
            }
            last = Some(t.exp);
            let c = match t.coef {
                CoefRepr::Small(v) => BigInt::from(v),
                CoefRepr::Big(s) => s.parse().map_err(D::Error::custom)?,
            };
            if c.is_zero() {
                return Err(D::Error::custom("zero coefficient in canonical form"));
            }
            coeffs.insert(t.exp, c);
        }
        Ok(Lambda0 { coeffs })
    }
}
