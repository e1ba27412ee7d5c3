//! Modular objects as exact q-expansions: eta quotients, Eisenstein series,
//! P(τ), Bernoulli numbers, eigenform ingestion and the level-32 cast.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Pow, Signed, Zero};

use crate::cache;
use crate::error::{Error, Result};
use crate::exactnum::{binomial, rat, rat_int, Rational};
use crate::qseries::QSeries;
use crate::weierstrass::CurveModel;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtaQuotientSpec {
    factors: Vec<(u32, i32)>,
    lead: i64,
}

impl EtaQuotientSpec {
    /// Π η(dτ)^r over `(d, r)`; the leading exponent Σ d·r / 24 must be integral.
    pub fn new(factors: Vec<(u32, i32)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(d, _) in &factors {
            if d == 0 {
                return Err(Error::Precondition(
                    "eta multiplier must be positive".into(),
                ));
            }
            if !seen.insert(d) {
                return Err(Error::RepeatedMultiplier(d));
            }
        }
        let s: i64 = factors.iter().map(|&(d, r)| d as i64 * r as i64).sum();
        if s % 24 != 0 {
            return Err(Error::FractionalLeadingExponent(s));
        }
        Ok(EtaQuotientSpec {
            factors,
            lead: s / 24,
        })
    }

    pub fn factors(&self) -> &[(u32, i32)] {
        &self.factors
    }

    pub fn leading_exponent(&self) -> i64 {
        self.lead
    }

    /// g = η²(4τ)η²(8τ).
    pub fn g32() -> Self {
        Self::new(vec![(4, 2), (8, 2)]).expect("valid spec")
    }

    /// L = η⁶(8τ) / (η²(4τ)η⁴(16τ)).
    pub fn l16() -> Self {
        Self::new(vec![(8, 6), (4, -2), (16, -4)]).expect("valid spec")
    }

    pub fn descriptor(&self) -> String {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|(d, r)| format!("{d}^{r}"))
            .collect();
        format!("eta[{}]", parts.join(","))
    }
}

/// Nonzero exponents of Π(1 − q^{dn}) up to `limit`, with signs (Euler's pentagonal theorem).
fn pentagonal_terms(d: usize, limit: usize) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    for k in 1usize.. {
        let a = d * k * (3 * k - 1) / 2;
        if a > limit {
            break;
        }
        let neg = k % 2 == 1;
        out.push((a, neg));
        let b = d * k * (3 * k + 1) / 2;
        if b <= limit {
            out.push((b, neg));
        }
    }
    out.sort_unstable();
    out
}

/// Exact expansion of an eta quotient through `q^order`.
pub fn eta_quotient_expand(spec: &EtaQuotientSpec, order: i64) -> Result<QSeries> {
    cache::global().get_or_compute(&spec.descriptor(), order, |order| {
        let lead = spec.lead;
        let len = (order - lead + 1).max(0) as usize;
        let mut a = vec![BigInt::zero(); len];
        if len > 0 {
            a[0] = BigInt::one();
        }
        for &(d, r) in &spec.factors {
            let pent = pentagonal_terms(d as usize, len.saturating_sub(1));
            for _ in 0..r.unsigned_abs() {
                if r > 0 {
                    // multiply in place, top down
                    for i in (1..len).rev() {
                        let mut acc = BigInt::zero();
                        for &(j, neg) in pent.iter().take_while(|(j, _)| *j <= i) {
                            if neg {
                                acc -= &a[i - j];
                            } else {
                                acc += &a[i - j];
                            }
                        }
                        a[i] += acc;
                    }
                } else {
                    // divide in place, bottom up
                    for i in 1..len {
                        let mut acc = BigInt::zero();
                        for &(j, neg) in pent.iter().take_while(|(j, _)| *j <= i) {
                            if neg {
                                acc -= &a[i - j];
                            } else {
                                acc += &a[i - j];
                            }
                        }
                        a[i] -= acc;
                    }
                }
            }
        }
        Ok(QSeries::from_bigints(lead, a, order))
    })
}

/// B_0 ..= B_n with B_1 = −1/2.
pub fn bernoulli_numbers(n: usize) -> Vec<Rational> {
    let mut b: Vec<Rational> = Vec::with_capacity(n + 1);
    b.push(Rational::one());
    for m in 1..=n {
        let mut s = Rational::zero();
        for (j, bj) in b.iter().enumerate() {
            s += Rational::from_integer(binomial(m as u64 + 1, j as u64)) * bj;
        }
        b.push(-s / rat(m as i64 + 1, 1));
    }
    b
}

pub fn bernoulli(n: u32) -> Rational {
    bernoulli_numbers(n as usize).pop().expect("nonempty")
}

fn check_weight(k: u32) -> Result<()> {
    if k < 4 || k % 2 == 1 {
        return Err(Error::InvalidWeight(k));
    }
    Ok(())
}

/// σ_{k}(n) for 1 ≤ n ≤ len−1 (index 0 unused).
fn divisor_sums(k: u32, len: usize) -> Vec<BigInt> {
    let mut s = vec![BigInt::zero(); len];
    for d in 1..len {
        let dk: BigInt = BigInt::from(d).pow(k);
        for m in (d..len).step_by(d) {
            s[m] += &dk;
        }
    }
    s
}

/// E_k = 1 − (2k/B_k) Σ σ_{k−1}(n) qⁿ.
pub fn eisenstein_qexp(k: u32, order: i64) -> Result<QSeries> {
    check_weight(k)?;
    let key = format!("E{k}");
    cache::global().get_or_compute(&key, order, |order| {
        let len = (order + 1).max(0) as usize;
        let factor = -rat(2 * k as i64, 1) / bernoulli(k);
        let sig = divisor_sums(k - 1, len);
        let mut c: Vec<Rational> = sig
            .into_iter()
            .map(|s| &factor * Rational::from_integer(s))
            .collect();
        if len > 0 {
            c[0] = Rational::one();
        }
        Ok(QSeries::truncated(0, c, order))
    })
}

/// P = 1/24 − Σ σ₁(n) qⁿ.
pub fn p_series(order: i64) -> QSeries {
    let len = (order + 1).max(0) as usize;
    let mut c: Vec<Rational> = divisor_sums(1, len)
        .into_iter()
        .map(|s| Rational::from_integer(-s))
        .collect();
    if len > 0 {
        c[0] = rat(1, 24);
    }
    QSeries::truncated(0, c, order)
}

/// f(dτ) through q^order, from f through q^⌈order/d⌉.
pub fn rescaled(f: impl Fn(i64) -> Result<QSeries>, d: u64, order: i64) -> Result<QSeries> {
    let inner = f(Integer::div_ceil(&order, &(d as i64)))?;
    Ok(inner.v_operator(d).truncate(order))
}

fn primes_up_to(n: usize) -> Vec<usize> {
    let mut sieve = vec![true; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if sieve[i] {
            out.push(i);
            for j in (i * i..=n).step_by(i) {
                sieve[j] = false;
            }
        }
    }
    out
}

fn smallest_factor_table(n: usize) -> Vec<usize> {
    let mut spf = vec![0usize; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            for j in (i..=n).step_by(i) {
                if spf[j] == 0 {
                    spf[j] = i;
                }
            }
        }
    }
    spf
}

/// Normalized Hecke eigenform coefficients b(1..=T).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Eigenform {
    level: Option<u64>,
    b: Vec<i64>,
}

impl Eigenform {
    /// `b[0]` is b(1). With no level, each prime may obey either the good or
    /// the bad-prime Hecke relation.
    pub fn new(level: Option<u64>, b: Vec<i64>) -> Result<Self> {
        if b.first() != Some(&1) {
            return Err(Error::MissingNormalization);
        }
        let mut padded = Vec::with_capacity(b.len() + 1);
        padded.push(0);
        padded.extend(b);
        let f = Eigenform { level, b: padded };
        f.validate()?;
        Ok(f)
    }

    pub fn from_series(level: Option<u64>, s: &QSeries, terms: usize) -> Result<Self> {
        let mut b = Vec::with_capacity(terms);
        for n in 1..=terms as i64 {
            let c = s.coeff_or_err(n)?;
            if !c.is_integer() {
                return Err(Error::Precondition(format!(
                    "b({n}) = {c} is not an integer"
                )));
            }
            b.push(
                i64::try_from(c.numer())
                    .map_err(|_| Error::Precondition(format!("b({n}) does not fit in 64 bits")))?,
            );
        }
        Self::new(level, b)
    }

    pub fn level(&self) -> Option<u64> {
        self.level
    }

    /// Number of known coefficients T.
    pub fn len(&self) -> usize {
        self.b.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn b(&self, n: u64) -> Option<i64> {
        if n == 0 {
            return Some(0);
        }
        self.b.get(n as usize).copied()
    }

    pub fn to_series(&self) -> QSeries {
        QSeries::from_ints(1, &self.b[1..], Some(self.len() as i64))
    }

    fn is_bad(&self, p: u64) -> Option<bool> {
        self.level.map(|n| n % p == 0)
    }

    fn validate(&self) -> Result<()> {
        let t = self.len();
        let spf = smallest_factor_table(t);
        let b = |n: usize| self.b[n] as i128;
        for n in 2..=t {
            let p = spf[n];
            let mut k = 0;
            let mut m = n;
            while m % p == 0 {
                m /= p;
                k += 1;
            }
            if m > 1 {
                let pk = n / m;
                if b(n) != b(pk) * b(m) {
                    return Err(Error::HeckeInconsistency(format!(
                        "b({n}) = {} but b({pk})·b({m}) = {}",
                        b(n),
                        b(pk) * b(m)
                    )));
                }
            } else if k >= 2 {
                let pp = p as i128;
                let good = b(p) * b(n / p) - pp * b(n / (p * p));
                let bad = b(p) * b(n / p);
                let ok = match self.is_bad(p as u64) {
                    Some(false) => b(n) == good,
                    Some(true) => b(n) == bad,
                    None => b(n) == good || b(n) == bad,
                };
                if !ok {
                    return Err(Error::HeckeInconsistency(format!(
                        "b({p}^{k}) = {} violates b(p^(k)) = b(p)b(p^(k-1)) - p·b(p^(k-2)) (= {good})",
                        b(n)
                    )));
                }
            }
        }
        for &p in &primes_up_to(t) {
            if self.b[p] != 0 || self.is_bad(p as u64) == Some(true) {
                continue;
            }
            let mut pk = p * p;
            let mut expected: i128 = -(p as i128);
            while pk <= t {
                if b(pk) != expected && (self.level.is_some() || b(pk) != 0) {
                    return Err(Error::HeckeInconsistency(format!(
                        "b({p}) = 0 but b({pk}) = {} instead of {expected}",
                        b(pk)
                    )));
                }
                expected *= -(p as i128);
                match pk.checked_mul(p * p) {
                    Some(x) => pk = x,
                    None => break,
                }
            }
        }
        Ok(())
    }

    /// Lines `n b(n)` starting with `1 1`; optional `level N` line; `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut level = None;
        let mut b = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: i + 1, msg };
            let mut it = line.split_whitespace();
            let head = it.next().unwrap_or("");
            if head == "level" {
                let n = it
                    .next()
                    .and_then(|x| x.parse::<u64>().ok())
                    .filter(|&n| n > 0)
                    .ok_or_else(|| perr("bad level".into()))?;
                level = Some(n);
                continue;
            }
            let n: usize = head
                .parse()
                .map_err(|_| perr(format!("bad index `{head}`")))?;
            let v: i64 = it
                .next()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| perr("bad coefficient".into()))?;
            if n == 1 && b.is_empty() && v != 1 {
                return Err(Error::MissingNormalization);
            }
            if n != b.len() + 1 {
                if b.is_empty() {
                    return Err(Error::MissingNormalization);
                }
                return Err(perr(format!("expected index {}, found {n}", b.len() + 1)));
            }
            b.push(v);
        }
        Self::new(level, b)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(n) = self.level {
            writeln!(s, "level {n}").expect("write to string");
        }
        for n in 1..=self.len() {
            writeln!(s, "{n} {}", self.b[n]).expect("write to string");
        }
        s
    }
}

/// Σ b(n)/n qⁿ for a series with zero constant term.
pub fn eichler_integral(f: &QSeries) -> Result<QSeries> {
    f.formal_integral()
}

pub fn g32(order: i64) -> Result<QSeries> {
    eta_quotient_expand(&EtaQuotientSpec::g32(), order)
}

pub fn l16(order: i64) -> Result<QSeries> {
    eta_quotient_expand(&EtaQuotientSpec::l16(), order)
}

/// L(2τ) through q^order.
pub fn l16_doubled(order: i64) -> Result<QSeries> {
    rescaled(|t| l16(t + 1), 2, order)
}

/// W₁ = −g·L(2τ) through q^order.
pub fn w1_32(order: i64) -> Result<QSeries> {
    cache::global().get_or_compute("W1-32", order, |order| {
        let g = g32(order + 2)?;
        let l2 = l16_doubled(order - 1)?;
        Ok(g.mul(&l2).neg().truncate(order))
    })
}

/// W₂ = E₄(4τ)/g through q^order.
pub fn w2_32(order: i64) -> Result<QSeries> {
    cache::global().get_or_compute("W2-32", order, |order| {
        let g = g32(order + 3)?;
        let e4 = rescaled(|t| eisenstein_qexp(4, t), 4, order + 1)?;
        Ok(e4.mul(&g.inverse()?).truncate(order))
    })
}

pub fn eichler_g32(order: i64) -> Result<QSeries> {
    eichler_integral(&g32(order)?)
}

pub fn eigenform_g32(terms: usize) -> Result<Eigenform> {
    Eigenform::from_series(Some(32), &g32(terms as i64)?, terms)
}

/// y² = 4x³ + 16x.
pub fn curve_32b() -> CurveModel {
    CurveModel::new(rat_int(-16), rat_int(0)).expect("nonsingular")
}

pub struct Builtin32 {
    pub g: QSeries,
    pub l: QSeries,
    pub l2: QSeries,
    pub w1: QSeries,
    pub w2: QSeries,
    pub curve: CurveModel,
}

pub fn builtin_32(order: i64) -> Result<Builtin32> {
    Ok(Builtin32 {
        g: g32(order)?,
        l: l16(order)?,
        l2: l16_doubled(order)?,
        w1: w1_32(order)?,
        w2: w2_32(order)?,
        curve: curve_32b(),
    })
}

/// Integer coefficients of a series (fails on a non-integer).
pub fn integer_coeffs(s: &QSeries, from: i64, to: i64) -> Result<Vec<BigInt>> {
    (from..=to)
        .map(|n| {
            let c = s.coeff_or_err(n)?;
            if c.is_integer() {
                Ok(c.numer().clone())
            } else {
                Err(Error::Precondition(format!("coefficient of q^{n} is {c}")))
            }
        })
        .collect()
}

pub fn max_abs_coeff(s: &QSeries) -> BigInt {
    s.coeffs()
        .iter()
        .map(|c| c.numer().abs())
        .max()
        .unwrap_or_default()
}
