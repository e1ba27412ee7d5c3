//! Exact rationals, p-adic valuations and relative-precision p-adic numbers.
//!
//! [`PAdicApprox`] stores a nonzero value as `p^v * u` where the unit `u` is
//! known modulo `p^N`; arithmetic never claims more digits than the inputs
//! support. Values that are only known to be divisible by `p^k` are kept as
//! [`PAdicApprox::big_o`], and the exact zero has its own marker so it never
//! degrades the precision of a partner operand.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// p-adic valuation; `Infinity` is reserved for exact zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Valuation::Infinity
    }

    /// `self + k`, saturating at infinity.
    pub fn shift(self, k: i64) -> Valuation {
        match self {
            Valuation::Finite(v) => Valuation::Finite(v + k),
            Valuation::Infinity => Valuation::Infinity,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinity => write!(f, "inf"),
        }
    }
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int<T: Into<BigInt>>(n: T) -> Rational {
    Rational::from_integer(n.into())
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

pub fn require_odd_prime(p: u64) -> Result<()> {
    if p == 2 || !is_prime(p) {
        return Err(Error::NotOddPrime(p));
    }
    Ok(())
}

pub fn pow_p(p: u64, k: u32) -> BigInt {
    num_traits::pow(BigInt::from(p), k as usize)
}

/// Strip the p-part of a nonzero integer: returns `(v, n / p^v)`.
pub fn split_p(n: &BigInt, p: u64) -> (i64, BigInt) {
    debug_assert!(!n.is_zero());
    let pb = BigInt::from(p);
    let mut v = 0;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(&pb);
        if !r.is_zero() {
            return (v, m);
        }
        m = q;
        v += 1;
    }
}

pub fn ord_int(n: &BigInt, p: u64) -> Valuation {
    if n.is_zero() {
        Valuation::Infinity
    } else {
        Valuation::Finite(split_p(n, p).0)
    }
}

/// ord_p of a rational; `Infinity` iff `x = 0`.
pub fn valuation(x: &Rational, p: u64) -> Valuation {
    if x.is_zero() {
        return Valuation::Infinity;
    }
    let (a, _) = split_p(x.numer(), p);
    let (b, _) = split_p(x.denom(), p);
    Valuation::Finite(a - b)
}

pub fn is_p_integral(x: &Rational, p: u64) -> bool {
    x.denom().mod_floor(&BigInt::from(p)) != BigInt::zero()
}

/// Inverse of `a` modulo `m`, in `[0, m)`.
pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let a = a.mod_floor(m);
    let e = a.extended_gcd(m);
    if !e.gcd.is_one() {
        return None;
    }
    Some(e.x.mod_floor(m))
}

/// Reduction of a p-integral rational modulo `p^k`, in `[0, p^k)`.
pub fn residue(x: &Rational, p: u64, k: u32) -> Option<BigInt> {
    let m = pow_p(p, k);
    if k == 0 {
        return Some(BigInt::zero());
    }
    let inv = mod_inverse(x.denom(), &m)?;
    Some((x.numer() * inv).mod_floor(&m))
}

/// Residue mod p as a small integer.
pub fn residue_u64(x: &Rational, p: u64) -> Option<u64> {
    residue(x, p, 1).and_then(|r| r.to_u64())
}

/// Symmetric representative of `r mod m` in `(-m/2, m/2]`.
pub fn symmetric(r: &BigInt, m: &BigInt) -> BigInt {
    let r = r.mod_floor(m);
    if &r * 2 > *m {
        r - m
    } else {
        r
    }
}

/// Legendre symbol by Euler's criterion.
pub fn legendre_symbol(a: &BigInt, p: u64) -> Result<i8> {
    require_odd_prime(p)?;
    let pb = BigInt::from(p);
    let a = a.mod_floor(&pb);
    if a.is_zero() {
        return Ok(0);
    }
    let r = a.modpow(&BigInt::from((p - 1) / 2), &pb);
    Ok(if r.is_one() { 1 } else { -1 })
}

pub fn legendre_i64(a: i64, p: u64) -> Result<i8> {
    legendre_symbol(&BigInt::from(a), p)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Repr {
    /// Exactly zero.
    Zero,
    /// Known only to be divisible by `p^abs`.
    BigO { abs: i64 },
    /// `p^valuation * unit + O(p^(valuation + digits))`, `unit` in `[1, p^digits)`, prime to p.
    Unit {
        valuation: i64,
        unit: BigUint,
        digits: u32,
    },
}

/// A p-adic number with tracked relative precision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PAdicApprox {
    p: u64,
    repr: Repr,
}

impl PAdicApprox {
    pub fn zero(p: u64) -> Self {
        PAdicApprox {
            p,
            repr: Repr::Zero,
        }
    }

    /// A value known only modulo `p^abs`, with all known digits zero.
    pub fn big_o(p: u64, abs: i64) -> Self {
        PAdicApprox {
            p,
            repr: Repr::BigO { abs },
        }
    }

    /// `x` rounded to `digits` significant p-adic digits.
    pub fn from_rational(x: &Rational, p: u64, digits: u32) -> Self {
        if x.is_zero() {
            return Self::zero(p);
        }
        let (a, na) = split_p(x.numer(), p);
        let (b, nb) = split_p(x.denom(), p);
        let v = a - b;
        if digits == 0 {
            return Self::big_o(p, v);
        }
        let m = pow_p(p, digits);
        let inv = mod_inverse(&nb, &m).expect("p-free denominator is invertible");
        let u = (na * inv).mod_floor(&m);
        PAdicApprox {
            p,
            repr: Repr::Unit {
                valuation: v,
                unit: u.to_biguint().expect("nonnegative residue"),
                digits,
            },
        }
    }

    /// An integer residue known modulo `p^abs` (e.g. a solution of a congruence).
    pub fn from_residue(r: &BigInt, p: u64, abs: u32) -> Self {
        let m = pow_p(p, abs);
        let r = r.mod_floor(&m);
        if r.is_zero() {
            return Self::big_o(p, abs as i64);
        }
        let (v, _) = split_p(&r, p);
        Self::from_rational(&Rational::from_integer(r), p, abs - v as u32)
    }

    fn from_scaled(p: u64, v: i64, s: BigInt, abs: i64) -> Self {
        // value = p^v * s, known modulo p^abs
        if s.is_zero() {
            return Self::big_o(p, abs);
        }
        let (k, u) = split_p(&s, p);
        let val = v + k;
        if val >= abs {
            return Self::big_o(p, abs);
        }
        let digits = (abs - val) as u32;
        let m = pow_p(p, digits);
        PAdicApprox {
            p,
            repr: Repr::Unit {
                valuation: val,
                unit: u.mod_floor(&m).to_biguint().expect("nonnegative"),
                digits,
            },
        }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn is_exact_zero(&self) -> bool {
        self.repr == Repr::Zero
    }

    /// Lower bound on the valuation (exact when the value is a known nonzero).
    pub fn valuation(&self) -> Valuation {
        match &self.repr {
            Repr::Zero => Valuation::Infinity,
            Repr::BigO { abs } => Valuation::Finite(*abs),
            Repr::Unit { valuation, .. } => Valuation::Finite(*valuation),
        }
    }

    /// True when the value is certainly nonzero with the stored valuation.
    pub fn has_known_valuation(&self) -> bool {
        matches!(self.repr, Repr::Unit { .. })
    }

    /// Absolute precision: the value is known modulo `p^abs`.
    pub fn abs_precision(&self) -> Valuation {
        match &self.repr {
            Repr::Zero => Valuation::Infinity,
            Repr::BigO { abs } => Valuation::Finite(*abs),
            Repr::Unit {
                valuation, digits, ..
            } => Valuation::Finite(valuation + *digits as i64),
        }
    }

    /// Relative precision in significant digits (0 for `O(p^k)`).
    pub fn digits(&self) -> Option<u32> {
        match &self.repr {
            Repr::Zero => None,
            Repr::BigO { .. } => Some(0),
            Repr::Unit { digits, .. } => Some(*digits),
        }
    }

    pub fn unit(&self) -> Option<&BigUint> {
        match &self.repr {
            Repr::Unit { unit, .. } => Some(unit),
            _ => None,
        }
    }

    /// A rational representative `p^v * u` (zero for `O(p^k)`).
    pub fn representative(&self) -> Rational {
        match &self.repr {
            Repr::Zero | Repr::BigO { .. } => Rational::zero(),
            Repr::Unit {
                valuation, unit, ..
            } => {
                let u = BigInt::from_biguint(Sign::Plus, unit.clone());
                if *valuation >= 0 {
                    Rational::from_integer(u * pow_p(self.p, *valuation as u32))
                } else {
                    Rational::new(u, pow_p(self.p, (-valuation) as u32))
                }
            }
        }
    }

    /// The value modulo `p^k` (requires valuation >= 0 and k within the known precision).
    pub fn residue(&self, k: u32) -> Result<BigInt> {
        if let Valuation::Finite(a) = self.abs_precision() {
            if (k as i64) > a {
                return Err(Error::PrecisionExhausted(format!(
                    "residue mod {}^{k} requested, value known mod {}^{a}",
                    self.p, self.p
                )));
            }
        }
        let r = self.representative();
        residue(&r, self.p, k).ok_or_else(|| {
            Error::PrecisionExhausted(format!("value {self} is not {}-integral", self.p))
        })
    }

    /// ord_p(self - other), capped by the precision of both operands.
    pub fn agreement(&self, other: &PAdicApprox) -> Valuation {
        self.sub(other).valuation()
    }

    /// Congruence modulo `p^k`, failing when either operand is not known that far.
    pub fn congruent_mod(&self, other: &PAdicApprox, k: i64) -> bool {
        if self.abs_precision() < Valuation::Finite(k)
            || other.abs_precision() < Valuation::Finite(k)
        {
            return false;
        }
        self.agreement(other) >= Valuation::Finite(k)
    }

    fn scaled(&self) -> Option<(i64, BigInt)> {
        match &self.repr {
            Repr::Unit {
                valuation, unit, ..
            } => Some((*valuation, BigInt::from_biguint(Sign::Plus, unit.clone()))),
            _ => None,
        }
    }

    pub fn neg(&self) -> PAdicApprox {
        match &self.repr {
            Repr::Unit {
                valuation,
                unit,
                digits,
            } => {
                let m = pow_p(self.p, *digits);
                let u = (m - BigInt::from_biguint(Sign::Plus, unit.clone()))
                    .to_biguint()
                    .expect("unit below modulus");
                PAdicApprox {
                    p: self.p,
                    repr: Repr::Unit {
                        valuation: *valuation,
                        unit: u,
                        digits: *digits,
                    },
                }
            }
            _ => self.clone(),
        }
    }

    pub fn add(&self, other: &PAdicApprox) -> PAdicApprox {
        assert_eq!(self.p, other.p, "mixed primes");
        let p = self.p;
        if self.is_exact_zero() {
            return other.clone();
        }
        if other.is_exact_zero() {
            return self.clone();
        }
        let abs = match self.abs_precision().min(other.abs_precision()) {
            Valuation::Finite(a) => a,
            Valuation::Infinity => unreachable!("nonzero operands have finite precision"),
        };
        match (self.scaled(), other.scaled()) {
            (None, None) => Self::big_o(p, abs),
            (Some((v, u)), None) | (None, Some((v, u))) => Self::from_scaled(p, v, u, abs),
            (Some((va, ua)), Some((vb, ub))) => {
                let v = va.min(vb);
                let s = ua * pow_p(p, (va - v) as u32) + ub * pow_p(p, (vb - v) as u32);
                Self::from_scaled(p, v, s, abs)
            }
        }
    }

    pub fn sub(&self, other: &PAdicApprox) -> PAdicApprox {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &PAdicApprox) -> PAdicApprox {
        assert_eq!(self.p, other.p, "mixed primes");
        let p = self.p;
        match (&self.repr, &other.repr) {
            (Repr::Zero, _) | (_, Repr::Zero) => Self::zero(p),
            (Repr::BigO { abs: a }, Repr::BigO { abs: b }) => Self::big_o(p, a + b),
            (Repr::BigO { abs }, Repr::Unit { valuation, .. })
            | (Repr::Unit { valuation, .. }, Repr::BigO { abs }) => Self::big_o(p, abs + valuation),
            (
                Repr::Unit {
                    valuation: va,
                    unit: ua,
                    digits: da,
                },
                Repr::Unit {
                    valuation: vb,
                    unit: ub,
                    digits: db,
                },
            ) => {
                let digits = (*da).min(*db);
                let m = pow_p(p, digits);
                let u = (BigInt::from_biguint(Sign::Plus, ua * ub)).mod_floor(&m);
                PAdicApprox {
                    p,
                    repr: Repr::Unit {
                        valuation: va + vb,
                        unit: u.to_biguint().expect("nonnegative"),
                        digits,
                    },
                }
            }
        }
    }

    pub fn mul_rational(&self, x: &Rational) -> PAdicApprox {
        if x.is_zero() {
            return Self::zero(self.p);
        }
        // exact multiplier: keep our relative precision
        let digits = self.digits().unwrap_or(0).max(1);
        let x = Self::from_rational(x, self.p, digits);
        match &self.repr {
            Repr::BigO { abs } => {
                Self::big_o(self.p, abs + x.valuation().finite().expect("nonzero"))
            }
            _ => self.mul(&x),
        }
    }

    pub fn inverse(&self) -> Result<PAdicApprox> {
        match &self.repr {
            Repr::Unit {
                valuation,
                unit,
                digits,
            } => {
                let m = pow_p(self.p, *digits);
                let inv = mod_inverse(&BigInt::from_biguint(Sign::Plus, unit.clone()), &m)
                    .expect("unit is invertible");
                Ok(PAdicApprox {
                    p: self.p,
                    repr: Repr::Unit {
                        valuation: -valuation,
                        unit: inv.to_biguint().expect("nonnegative"),
                        digits: *digits,
                    },
                })
            }
            _ => Err(Error::DivisionByNonUnit(format!(
                "{self} has no certified leading digit"
            ))),
        }
    }

    pub fn div(&self, other: &PAdicApprox) -> Result<PAdicApprox> {
        Ok(self.mul(&other.inverse()?))
    }
}

impl fmt::Display for PAdicApprox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Zero => write!(f, "0"),
            Repr::BigO { abs } => write!(f, "O({}^{})", self.p, abs),
            Repr::Unit {
                valuation,
                unit,
                digits,
            } => {
                let m = pow_p(self.p, *digits);
                let s = symmetric(&BigInt::from_biguint(Sign::Plus, unit.clone()), &m);
                match valuation.cmp(&0) {
                    Ordering::Equal => write!(f, "{s}")?,
                    _ => write!(f, "{}^{}*{s}", self.p, valuation)?,
                }
                write!(f, " + O({}^{})", self.p, valuation + *digits as i64)
            }
        }
    }
}

/// The last term of a Cauchy sequence together with its agreement profile.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitEstimate {
    pub value: PAdicApprox,
    pub last_term: Rational,
    /// ord_p(x_{k+1} - x_k) for consecutive terms.
    pub profile: Vec<Valuation>,
}

/// Estimate `lim x_k` p-adically from the terms of a sequence.
///
/// The absolute precision of the estimate is the agreement of the final
/// consecutive pair, and relative precision is capped at `cap` digits. The
/// agreement profile must be weakly increasing and certify at least one digit.
pub fn padic_limit_estimate(seq: &[Rational], p: u64, cap: u32) -> Result<LimitEstimate> {
    let last = seq
        .last()
        .ok_or_else(|| Error::NonCauchy("empty sequence".into()))?
        .clone();
    if seq.len() < 2 {
        return Err(Error::NonCauchy(
            "a single term shows no agreement growth".into(),
        ));
    }
    let profile: Vec<Valuation> = seq
        .windows(2)
        .map(|w| valuation(&(&w[1] - &w[0]), p))
        .collect();
    if let Some(k) = profile.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::NonCauchy(format!(
            "agreement drops from {} to {} at term {}",
            profile[k],
            profile[k + 1],
            k + 2
        )));
    }
    let agreement = *profile.last().expect("at least one pair");
    let v_last = valuation(&last, p);
    let value = match (agreement, v_last) {
        (Valuation::Infinity, Valuation::Infinity) => PAdicApprox::big_o(p, cap as i64),
        (Valuation::Infinity, Valuation::Finite(_)) => PAdicApprox::from_rational(&last, p, cap),
        (Valuation::Finite(a), Valuation::Infinity) => {
            if a <= 0 {
                return Err(Error::NonCauchy(format!(
                    "agreement {a} certifies no digit"
                )));
            }
            PAdicApprox::big_o(p, a)
        }
        (Valuation::Finite(a), Valuation::Finite(v)) => {
            if a <= v.min(0) {
                return Err(Error::NonCauchy(format!(
                    "agreement {a} certifies no digit of a term with valuation {v}"
                )));
            }
            if a <= v {
                PAdicApprox::big_o(p, a)
            } else {
                PAdicApprox::from_rational(&last, p, ((a - v) as u32).min(cap))
            }
        }
    };
    Ok(LimitEstimate {
        value,
        last_term: last,
        profile,
    })
}

/// `n!` as a big integer.
pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// The integer represented by a rational with denominator 1.
pub fn as_integer(x: &Rational) -> Option<BigInt> {
    if x.is_integer() {
        Some(x.numer().clone())
    } else {
        None
    }
}

pub fn abs_rational(x: &Rational) -> Rational {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn valuation_examples() {
        assert_eq!(valuation(&rat(8, 3), 2), Valuation::Finite(3));
        assert_eq!(valuation(&rat(0, 1), 5), Valuation::Infinity);
        assert_eq!(valuation(&rat(9, 4), 3), Valuation::Finite(2));
        assert_eq!(valuation(&rat(5, 27), 3), Valuation::Finite(-3));
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre_i64(2, 7).unwrap(), 1);
        assert_eq!(legendre_i64(2, 3).unwrap(), -1);
        assert_eq!(legendre_i64(2, 17).unwrap(), 1);
        assert_eq!(legendre_i64(14, 7).unwrap(), 0);
        assert_eq!(legendre_i64(2, 2), Err(Error::NotOddPrime(2)));
    }

    #[test]
    fn legendre_matches_squares_exhaustively() {
        for p in (3..=97).filter(|&p| is_prime(p)) {
            let squares: Vec<u64> = (1..p).map(|x| x * x % p).collect();
            for a in 1..p {
                let expected = if squares.contains(&a) { 1 } else { -1 };
                assert_eq!(legendre_i64(a as i64, p).unwrap(), expected, "({a}|{p})");
            }
        }
    }

    #[test]
    fn limit_of_geometric_partial_sums() {
        let seq: Vec<Rational> = [1, 4, 13, 40].iter().map(|&n| rat(n, 1)).collect();
        let est = padic_limit_estimate(&seq, 3, 20).unwrap();
        assert_eq!(
            est.profile,
            vec![
                Valuation::Finite(1),
                Valuation::Finite(2),
                Valuation::Finite(3)
            ]
        );
        let minus_half = PAdicApprox::from_rational(&rat(-1, 2), 3, 10);
        assert!(est.value.digits().unwrap() >= 3);
        assert!(est.value.congruent_mod(&minus_half, 3));
    }

    #[test]
    fn limit_of_constant_sequence_has_cap_precision() {
        let c = rat(7, 5);
        let est = padic_limit_estimate(&[c.clone(), c.clone(), c.clone()], 3, 12).unwrap();
        assert_eq!(est.value.digits(), Some(12));
        assert_eq!(est.value, PAdicApprox::from_rational(&c, 3, 12));
    }

    #[test]
    fn oscillating_sequence_is_rejected() {
        let seq: Vec<Rational> = [1, 2, 1, 2].iter().map(|&n| rat(n, 1)).collect();
        assert!(matches!(
            padic_limit_estimate(&seq, 5, 10),
            Err(Error::NonCauchy(_))
        ));
        let drop: Vec<Rational> = [0, 9, 10].iter().map(|&n| rat(n, 1)).collect();
        assert!(matches!(
            padic_limit_estimate(&drop, 3, 10),
            Err(Error::NonCauchy(_))
        ));
    }

    #[test]
    fn sequence_tending_to_zero_gives_big_o() {
        let seq: Vec<Rational> = [3, 9, 27].iter().map(|&n| rat(n, 1)).collect();
        let est = padic_limit_estimate(&seq, 3, 10).unwrap();
        assert_eq!(est.value, PAdicApprox::big_o(3, 2));
    }

    #[test]
    fn zero_keeps_partner_precision() {
        let x = PAdicApprox::from_rational(&rat(5, 7), 3, 4);
        assert_eq!(x.add(&PAdicApprox::zero(3)), x);
        assert_eq!(PAdicApprox::zero(3).sub(&x), x.neg());
        assert!(x.mul(&PAdicApprox::zero(3)).is_exact_zero());
    }

    #[test]
    fn precision_propagation_is_pessimistic() {
        let a = PAdicApprox::from_rational(&rat(1, 1), 5, 3);
        let b = PAdicApprox::from_rational(&rat(26, 1), 5, 3);
        // 26 - 1 = 25 = 5^2, known mod 5^3
        let d = b.sub(&a);
        assert_eq!(d.valuation(), Valuation::Finite(2));
        assert_eq!(d.digits(), Some(1));
        let c = PAdicApprox::from_rational(&rat(126, 1), 5, 3);
        assert_eq!(c.sub(&a), PAdicApprox::big_o(5, 3));
        let inv = PAdicApprox::from_rational(&rat(3, 1), 5, 4)
            .inverse()
            .unwrap();
        assert_eq!(inv, PAdicApprox::from_rational(&rat(1, 3), 5, 4));
        assert!(PAdicApprox::big_o(5, 2).inverse().is_err());
    }

    #[test]
    fn from_residue_tracks_valuation() {
        let x = PAdicApprox::from_residue(&BigInt::from(18), 3, 4);
        assert_eq!(x.valuation(), Valuation::Finite(2));
        assert_eq!(x.abs_precision(), Valuation::Finite(4));
        assert_eq!(
            PAdicApprox::from_residue(&BigInt::from(81), 3, 4),
            PAdicApprox::big_o(3, 4)
        );
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-500i64..500, 1i64..200).prop_map(|(n, d)| rat(n, d))
    }

    proptest! {
        #[test]
        fn valuation_is_multiplicative(x in small_rational(), y in small_rational(), pi in 0usize..4) {
            let p = [2u64, 3, 5, 7][pi];
            let vx = valuation(&x, p);
            let vy = valuation(&y, p);
            let vxy = valuation(&(&x * &y), p);
            match (vx, vy) {
                (Valuation::Finite(a), Valuation::Finite(b)) => prop_assert_eq!(vxy, Valuation::Finite(a + b)),
                _ => prop_assert_eq!(vxy, Valuation::Infinity),
            }
            let vs = valuation(&(&x + &y), p);
            prop_assert!(vs >= vx.min(vy));
            if vx != vy {
                prop_assert_eq!(vs, vx.min(vy));
            }
        }

        #[test]
        fn residue_round_trip(n in -100000i64..100000, d in 1i64..1000, digits in 1u32..6) {
            let p = 7u64;
            let x = rat(n, d);
            prop_assume!(valuation(&x, p) >= Valuation::Finite(0));
            let approx = PAdicApprox::from_rational(&x, p, digits);
            let direct = residue(&x, p, digits).unwrap();
            prop_assert_eq!(approx.residue(digits).unwrap(), direct);
        }

        #[test]
        fn approx_arithmetic_matches_exact(a in small_rational(), b in small_rational()) {
            let p = 3u64;
            let digits = 6;
            let x = PAdicApprox::from_rational(&a, p, digits);
            let y = PAdicApprox::from_rational(&b, p, digits);
            let exact_sum = PAdicApprox::from_rational(&(&a + &b), p, 30);
            let exact_prod = PAdicApprox::from_rational(&(&a * &b), p, 30);
            let sum = x.add(&y);
            let prod = x.mul(&y);
            if let Valuation::Finite(k) = sum.abs_precision() {
                prop_assert!(sum.agreement(&exact_sum) >= Valuation::Finite(k));
            }
            if let Valuation::Finite(k) = prod.abs_precision() {
                prop_assert!(prod.agreement(&exact_prod) >= Valuation::Finite(k));
            }
        }
    }
}
