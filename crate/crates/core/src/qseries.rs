//! Exact Laurent series in one variable with explicit truncation.
//!
//! A [`QSeries`] stores the coefficients from `min_exp` through its order `T`;
//! coefficients of exponent `> T` are unknown, never implicitly zero. A series
//! with no order is an exact Laurent polynomial. Every operation derives the
//! largest output order it can justify from the orders of its inputs.

use std::fmt::Write as _;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exactnum::{valuation, Rational, Valuation};

#[derive(Clone, Debug)]
pub struct QSeries {
    min_exp: i64,
    coeffs: Vec<Rational>,
    order: Option<i64>,
}

/// Equal orders and equal known coefficients; leading zeros are irrelevant.
impl PartialEq for QSeries {
    fn eq(&self, other: &Self) -> bool {
        if self.order != other.order {
            return false;
        }
        let lo = self.min_exp.min(other.min_exp);
        let hi = self.top().max(other.top());
        (lo..=hi).all(|n| self.coeff(n) == other.coeff(n))
    }
}

fn zero_ref() -> &'static Rational {
    static ZERO: OnceLock<Rational> = OnceLock::new();
    ZERO.get_or_init(Rational::zero)
}

impl QSeries {
    /// Coefficients for `min_exp, min_exp+1, ...` known through `q^order`.
    /// Missing entries up to `order` are zero; extra entries are dropped.
    pub fn truncated(min_exp: i64, mut coeffs: Vec<Rational>, order: i64) -> Self {
        let len = (order - min_exp + 1).max(0) as usize;
        coeffs.resize(len, Rational::zero());
        QSeries {
            min_exp,
            coeffs,
            order: Some(order),
        }
    }

    pub fn exact(min_exp: i64, mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        QSeries {
            min_exp,
            coeffs,
            order: None,
        }
    }

    pub fn from_ints(min_exp: i64, coeffs: &[i64], order: Option<i64>) -> Self {
        let c = coeffs
            .iter()
            .map(|&x| Rational::from_integer(BigInt::from(x)))
            .collect();
        match order {
            Some(t) => Self::truncated(min_exp, c, t),
            None => Self::exact(min_exp, c),
        }
    }

    pub fn from_bigints(min_exp: i64, coeffs: Vec<BigInt>, order: i64) -> Self {
        Self::truncated(
            min_exp,
            coeffs.into_iter().map(Rational::from_integer).collect(),
            order,
        )
    }

    /// Nothing known below `q^(order+1)`.
    pub fn big_o(order: i64) -> Self {
        QSeries {
            min_exp: order + 1,
            coeffs: Vec::new(),
            order: Some(order),
        }
    }

    pub fn zero() -> Self {
        Self::exact(0, Vec::new())
    }

    pub fn one() -> Self {
        Self::monomial(Rational::one(), 0)
    }

    pub fn monomial(c: Rational, e: i64) -> Self {
        Self::exact(e, vec![c])
    }

    pub fn min_exp(&self) -> i64 {
        self.min_exp
    }

    /// Truncation order, `None` for an exact Laurent polynomial.
    pub fn order(&self) -> Option<i64> {
        self.order
    }

    pub fn is_exact(&self) -> bool {
        self.order.is_none()
    }

    /// Largest exponent stored.
    pub fn top(&self) -> i64 {
        self.min_exp + self.coeffs.len() as i64 - 1
    }

    pub fn is_exact_zero(&self) -> bool {
        self.order.is_none() && self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Coefficient of `q^n`, `None` if it lies beyond the truncation.
    pub fn coeff(&self, n: i64) -> Option<&Rational> {
        if let Some(t) = self.order {
            if n > t {
                return None;
            }
        }
        if n < self.min_exp {
            return Some(zero_ref());
        }
        Some(
            self.coeffs
                .get((n - self.min_exp) as usize)
                .unwrap_or_else(|| zero_ref()),
        )
    }

    pub fn coeff_or_err(&self, n: i64) -> Result<&Rational> {
        self.coeff(n).ok_or(Error::UnknownCoefficient(n))
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// `(exponent, coefficient)` pairs of the nonzero stored coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &Rational)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.min_exp + i as i64, c))
    }

    /// Exponent of the first nonzero known coefficient.
    pub fn valuation(&self) -> Option<i64> {
        self.terms().next().map(|(e, _)| e)
    }

    /// Drop leading zeros so that `min_exp` is the valuation (or order + 1).
    pub fn trimmed(&self) -> QSeries {
        match self.coeffs.iter().position(|c| !c.is_zero()) {
            Some(0) => self.clone(),
            Some(k) => QSeries {
                min_exp: self.min_exp + k as i64,
                coeffs: self.coeffs[k..].to_vec(),
                order: self.order,
            },
            None => match self.order {
                Some(t) => Self::big_o(t),
                None => Self::zero(),
            },
        }
    }

    /// Forget everything beyond `q^t` (never raises the order).
    pub fn truncate(&self, t: i64) -> QSeries {
        let t = match self.order {
            Some(o) => o.min(t),
            None => t,
        };
        let mut coeffs: Vec<Rational> = self
            .coeffs
            .iter()
            .take((t - self.min_exp + 1).max(0) as usize)
            .cloned()
            .collect();
        coeffs.resize((t - self.min_exp + 1).max(0) as usize, Rational::zero());
        QSeries {
            min_exp: self.min_exp.min(t + 1),
            coeffs: if self.min_exp > t { Vec::new() } else { coeffs },
            order: Some(t),
        }
    }

    /// Dense coefficients of `q^from ..= q^to` (must be known).
    pub fn dense(&self, from: i64, to: i64) -> Result<Vec<Rational>> {
        (from..=to).map(|n| self.coeff_or_err(n).cloned()).collect()
    }

    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integer())
    }

    /// Minimum ord_p over the known coefficients.
    pub fn min_ord_p(&self, p: u64) -> Valuation {
        self.coeffs
            .iter()
            .map(|c| valuation(c, p))
            .min()
            .unwrap_or(Valuation::Infinity)
    }

    /// First exponent `<= through` where the two series differ.
    pub fn first_mismatch(&self, other: &QSeries, through: i64) -> Result<Option<i64>> {
        let lo = self.min_exp.min(other.min_exp);
        for n in lo..=through {
            if self.coeff_or_err(n)? != other.coeff_or_err(n)? {
                return Ok(Some(n));
            }
        }
        Ok(None)
    }

    pub fn map_coeffs(&self, f: impl Fn(i64, &Rational) -> Rational) -> QSeries {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| f(self.min_exp + i as i64, c))
            .collect();
        QSeries {
            min_exp: self.min_exp,
            coeffs,
            order: self.order,
        }
        .renormalized()
    }

    fn renormalized(mut self) -> Self {
        if self.order.is_none() {
            while self.coeffs.last().is_some_and(|c| c.is_zero()) {
                self.coeffs.pop();
            }
        }
        self
    }

    pub fn neg(&self) -> QSeries {
        self.map_coeffs(|_, c| -c)
    }

    pub fn scale(&self, k: &Rational) -> QSeries {
        self.map_coeffs(|_, c| c * k)
    }

    /// Multiply by `q^k`.
    pub fn shift(&self, k: i64) -> QSeries {
        QSeries {
            min_exp: self.min_exp + k,
            coeffs: self.coeffs.clone(),
            order: self.order.map(|t| t + k),
        }
    }

    pub fn add(&self, other: &QSeries) -> QSeries {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &QSeries) -> QSeries {
        self.combine(other, |a, b| a - b)
    }

    fn combine(&self, other: &QSeries, f: impl Fn(&Rational, &Rational) -> Rational) -> QSeries {
        let order = match (self.order, other.order) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let lo = self.min_exp.min(other.min_exp);
        let hi = match order {
            Some(t) => t,
            None => self.top().max(other.top()),
        };
        let coeffs = (lo..=hi)
            .map(|n| {
                f(
                    self.coeff(n).unwrap_or_else(|| zero_ref()),
                    other.coeff(n).unwrap_or_else(|| zero_ref()),
                )
            })
            .collect();
        QSeries {
            min_exp: lo,
            coeffs,
            order,
        }
        .renormalized()
    }

    pub fn mul(&self, other: &QSeries) -> QSeries {
        if self.is_exact_zero() || other.is_exact_zero() {
            return Self::zero();
        }
        let a = self.trimmed();
        let b = other.trimmed();
        let (va, vb) = (a.min_exp, b.min_exp);
        let order = match (a.order, b.order) {
            (None, None) => None,
            (Some(ta), None) => Some(ta + vb),
            (None, Some(tb)) => Some(tb + va),
            (Some(ta), Some(tb)) => Some((ta + vb).min(tb + va)),
        };
        let min_exp = va + vb;
        let len = match order {
            Some(t) => (t - min_exp + 1).max(0) as usize,
            None => (a.coeffs.len() + b.coeffs.len()).saturating_sub(1),
        };
        let coeffs = mul_dense(&a.coeffs, &b.coeffs, len);
        QSeries {
            min_exp,
            coeffs,
            order,
        }
        .renormalized()
    }

    /// Multiplicative inverse; requires a known nonzero leading coefficient.
    /// Exact inputs with more than one term are expanded through `q^order_hint`.
    pub fn inverse_to(&self, order_hint: Option<i64>) -> Result<QSeries> {
        let a = self.trimmed();
        if a.coeffs.is_empty() {
            return Err(Error::NonUnitLeadingTerm);
        }
        let v = a.min_exp;
        let order = match (a.order, order_hint) {
            (Some(t), Some(h)) => (t - 2 * v).min(h),
            (Some(t), None) => t - 2 * v,
            (None, _) if a.coeffs.len() == 1 => {
                return Ok(Self::monomial(a.coeffs[0].recip(), -v));
            }
            (None, Some(h)) => h,
            (None, None) => {
                return Err(Error::Precondition(
                    "inverse of an exact polynomial needs a truncation order".into(),
                ))
            }
        };
        let len = (order + v + 1).max(0) as usize;
        let inv = inv_dense(&a.coeffs, len);
        Ok(QSeries::truncated(-v, inv, order))
    }

    pub fn inverse(&self) -> Result<QSeries> {
        self.inverse_to(None)
    }

    pub fn pow(&self, k: i64) -> Result<QSeries> {
        let base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = QSeries::one();
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq);
            }
        }
        Ok(acc)
    }

    /// Atkin's U_p: coefficient of q^n becomes a(pn).
    pub fn u_operator(&self, p: u64) -> QSeries {
        let p = p as i64;
        let lo = Integer::div_ceil(&self.min_exp, &p);
        let hi = match self.order {
            Some(t) => Integer::div_floor(&t, &p),
            None => Integer::div_floor(&self.top(), &p),
        };
        let coeffs = (lo..=hi)
            .map(|n| self.coeff(n * p).cloned().unwrap_or_default())
            .collect();
        QSeries {
            min_exp: lo,
            coeffs,
            order: self.order.map(|_| hi),
        }
        .renormalized()
    }

    /// V_p: q -> q^p.
    pub fn v_operator(&self, p: u64) -> QSeries {
        let p = p as i64;
        let mut coeffs = Vec::with_capacity(self.coeffs.len() * p as usize);
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs.push(c.clone());
            if i + 1 < self.coeffs.len() {
                coeffs.extend(std::iter::repeat_n(Rational::zero(), p as usize - 1));
            }
        }
        let min_exp = self.min_exp * p;
        match self.order {
            Some(t) => QSeries::truncated(min_exp, coeffs, t * p),
            None => QSeries::exact(min_exp, coeffs),
        }
    }

    /// D = q d/dq.
    pub fn d_operator(&self) -> QSeries {
        self.map_coeffs(|n, c| c * Rational::from_integer(BigInt::from(n)))
    }

    /// Inverse of D on series without constant term.
    pub fn formal_integral(&self) -> Result<QSeries> {
        if let Some(c) = self.coeff(0) {
            if !c.is_zero() {
                return Err(Error::NonzeroConstantTerm);
            }
        }
        Ok(self.map_coeffs(|n, c| {
            if n == 0 {
                Rational::zero()
            } else {
                c / Rational::from_integer(BigInt::from(n))
            }
        }))
    }

    /// Ordinary derivative d/dz.
    pub fn derivative(&self) -> QSeries {
        let s = self.d_operator();
        QSeries {
            min_exp: s.min_exp - 1,
            coeffs: s.coeffs,
            order: s.order.map(|t| t - 1),
        }
    }

    /// Ordinary antiderivative with zero constant; the z^-1 coefficient must vanish.
    pub fn antiderivative(&self) -> Result<QSeries> {
        if self.coeff(-1).is_some_and(|c| !c.is_zero()) {
            return Err(Error::Precondition(
                "antiderivative of a series with a residue".into(),
            ));
        }
        let s = self.shift(1).formal_integral()?;
        Ok(s)
    }

    /// Composition `self(inner)` for a power series `self` (no negative
    /// exponents) and an inner series of positive valuation.
    pub fn compose(&self, inner: &QSeries) -> Result<QSeries> {
        let outer = self;
        if outer.min_exp < 0 && outer.valuation().is_some_and(|v| v < 0) {
            return Err(Error::Precondition(
                "outer series has a pole; use compose_inner".into(),
            ));
        }
        let s = inner.trimmed();
        let vs = match s.coeffs.first() {
            Some(_) if s.min_exp >= 1 => s.min_exp,
            _ => return Err(Error::NonUnitLeadingTerm),
        };
        let i_min = outer.terms().map(|(e, _)| e).find(|&e| e >= 1);
        let mut bound: Option<i64> = None;
        let mut tighten = |b: i64| bound = Some(bound.map_or(b, |x: i64| x.min(b)));
        if let Some(tp) = outer.order {
            tighten(vs * (tp + 1) - 1);
        }
        if let (Some(ts), Some(i)) = (s.order, i_min) {
            tighten(i * vs + ts - vs);
        }
        let order = match bound {
            Some(b) => b,
            None => outer.top().max(0) * s.top(),
        };
        if order < 0 {
            return Ok(QSeries::big_o(order));
        }
        let n = (order + 1) as usize;
        let max_i = (order / vs) as usize;
        let outer_dense: Vec<Rational> = (0..=max_i as i64)
            .map(|e| outer.coeff(e).cloned().unwrap_or_default())
            .collect();
        let inner_dense: Vec<Rational> = (0..n as i64)
            .map(|e| s.coeff(e).cloned().unwrap_or_default())
            .collect();
        let coeffs = compose_dense(&outer_dense, &inner_dense, n);
        Ok(if bound.is_some() {
            QSeries::truncated(0, coeffs, order)
        } else {
            QSeries::exact(0, coeffs)
        })
    }

    /// Composition `outer(inner)` where `outer` may have a pole of finite order
    /// and `inner` has positive valuation with nonzero leading coefficient.
    pub fn compose_inner(outer: &QSeries, inner: &QSeries) -> Result<QSeries> {
        let s = inner.trimmed();
        if s.coeffs.is_empty() || s.min_exp < 1 {
            return Err(Error::NonUnitLeadingTerm);
        }
        let o = outer.trimmed();
        if o.coeffs.is_empty() {
            return Ok(match o.order {
                None => QSeries::zero(),
                Some(t) => QSeries::big_o(s.min_exp * (t + 1) - 1),
            });
        }
        let e0 = o.min_exp;
        let power_part = o.shift(-e0);
        if e0 >= 0 {
            return power_part.compose(&s)?.mul_checked(&s.pow(e0)?);
        }
        // inner^e0 needs a finite expansion
        let vs = s.min_exp;
        let mut target = None::<i64>;
        if let Some(ts) = s.order {
            target = Some(e0 * vs + ts - vs);
        }
        if let Some(t) = o.order {
            let b = vs * (t + 1) - 1;
            target = Some(target.map_or(b, |x| x.min(b)));
        }
        let target = target.ok_or_else(|| {
            Error::Precondition("composition with a pole needs a truncated input".into())
        })?;
        let s_inv = s.inverse_to(Some(target + vs * (-e0 - 1)))?;
        let neg_pow = s_inv.pow(-e0)?;
        let p_of_s = power_part.compose(&s.truncate(target - e0 * vs))?;
        Ok(neg_pow.mul(&p_of_s).truncate(target))
    }

    fn mul_checked(&self, other: &QSeries) -> Result<QSeries> {
        Ok(self.mul(other))
    }

    /// Compositional inverse of `c1 q + c2 q^2 + ...`, `c1 != 0`.
    pub fn reversion(&self) -> Result<QSeries> {
        let s = self.trimmed();
        if s.min_exp != 1 || s.coeffs.is_empty() {
            return Err(Error::NonUnitLeadingTerm);
        }
        let order = match s.order {
            Some(t) => t,
            None if s.coeffs.len() == 1 => {
                return Ok(QSeries::monomial(s.coeffs[0].recip(), 1));
            }
            None => {
                return Err(Error::Precondition(
                    "reversion of an exact polynomial needs a truncation order".into(),
                ))
            }
        };
        self.reversion_to(order)
    }

    /// Reversion through `q^order` (also for exact polynomials).
    pub fn reversion_to(&self, order: i64) -> Result<QSeries> {
        let order = self.order.map_or(order, |t| t.min(order));
        let q = QSeries::truncated(1, vec![Rational::one()], order.max(1));
        if order < 1 {
            return Ok(QSeries::big_o(order));
        }
        self.invert_composition(&q)
    }

    /// Solve `self(t) = rhs` for `t`, i.e. `reversion(self) ∘ rhs`, by Newton
    /// iteration `t ← t − (self(t) − rhs)/self′(t)`. `self = c₁z + ...` with
    /// `c₁ ≠ 0`; `rhs` has positive valuation.
    pub fn invert_composition(&self, rhs: &QSeries) -> Result<QSeries> {
        let s = self.trimmed();
        if s.min_exp != 1 || s.coeffs.is_empty() {
            return Err(Error::NonUnitLeadingTerm);
        }
        let r = rhs.trimmed();
        if r.coeffs.is_empty() || r.min_exp < 1 {
            return Err(Error::NonUnitLeadingTerm);
        }
        let v = r.min_exp;
        // s known through z^ts gives t through q^(ts + v - 1)
        let order = match (s.order, r.order) {
            (Some(a), Some(b)) => (a + v - 1).min(b),
            (Some(a), None) => a + v - 1,
            (None, Some(b)) => b,
            (None, None) => {
                return Err(Error::Precondition(
                    "inverting an exact composition needs a truncated input".into(),
                ))
            }
        };
        if order < v {
            return Ok(QSeries::big_o(order));
        }
        let n = (order + 1) as usize;
        let dense = |x: &QSeries| -> Vec<Rational> {
            (0..n as i64)
                .map(|e| x.coeff(e).cloned().unwrap_or_default())
                .collect()
        };
        let sd = dense(&s);
        let rd = dense(&r);
        let dsd: Vec<Rational> = (0..n)
            .map(|i| {
                sd.get(i + 1)
                    .map(|c| c * Rational::from_integer(BigInt::from(i + 1)))
                    .unwrap_or_default()
            })
            .collect();
        let mut t = vec![Rational::zero(); v as usize + 1];
        t[v as usize] = &rd[v as usize] / &sd[1];
        let mut prec = v as usize;
        while prec < order as usize {
            prec = (2 * prec + 1).min(order as usize);
            let len = prec + 1;
            t.resize(len, Rational::zero());
            let comp = compose_dense(&sd[..len], &t, len);
            let dcomp = compose_dense(&dsd[..len], &t, len);
            let diff: Vec<Rational> = comp.iter().zip(&rd[..len]).map(|(a, b)| a - b).collect();
            let corr = mul_dense(&diff, &inv_dense(&dcomp, len), len);
            for (ti, ci) in t.iter_mut().zip(corr) {
                *ti -= ci;
            }
        }
        Ok(QSeries::truncated(0, t, order))
    }

    /// Text form: header `minexp T` (`*` for exact), then `exponent num/den` per nonzero term.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self.order {
            Some(t) => writeln!(s, "{} {}", self.min_exp, t),
            None => writeln!(s, "{} *", self.min_exp),
        }
        .expect("write to string");
        for (e, c) in self.terms() {
            writeln!(s, "{} {}/{}", e, c.numer(), c.denom()).expect("write to string");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<QSeries> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let mut h = header.split_whitespace();
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let min_exp: i64 = h
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| parse_err(0, "bad minexp"))?;
        let order = match h.next() {
            Some("*") => None,
            Some(t) => Some(t.parse::<i64>().map_err(|_| parse_err(0, "bad order"))?),
            None => return Err(parse_err(0, "missing order")),
        };
        let mut terms: Vec<(i64, Rational)> = Vec::new();
        for (i, line) in lines {
            let mut it = line.split_whitespace();
            let e: i64 = it
                .next()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| parse_err(i, "bad exponent"))?;
            let c = it
                .next()
                .and_then(parse_rational)
                .ok_or_else(|| parse_err(i, "bad coefficient"))?;
            if e < min_exp || order.is_some_and(|t| e > t) {
                return Err(parse_err(i, "exponent outside the header range"));
            }
            terms.push((e, c));
        }
        let hi = order.unwrap_or_else(|| terms.iter().map(|t| t.0).max().unwrap_or(min_exp - 1));
        let mut coeffs = vec![Rational::zero(); (hi - min_exp + 1).max(0) as usize];
        for (e, c) in terms {
            coeffs[(e - min_exp) as usize] = c;
        }
        Ok(match order {
            Some(t) => QSeries::truncated(min_exp, coeffs, t),
            None => QSeries::exact(min_exp, coeffs),
        })
    }
}

/// Parse `a`, `a/b` with optional sign.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let d: BigInt = d.parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(n.parse().ok()?, d))
        }
        None => Some(Rational::from_integer(s.parse().ok()?)),
    }
}

/// Common denominator and integer numerators of a slice of rationals.
pub(crate) fn scale_to_integers(a: &[Rational]) -> (BigInt, Vec<BigInt>) {
    let mut den = BigInt::one();
    for c in a {
        if !c.denom().is_one() {
            den = den.lcm(c.denom());
        }
    }
    let nums = a
        .iter()
        .map(|c| {
            if c.is_zero() {
                BigInt::zero()
            } else if den.is_one() {
                c.numer().clone()
            } else {
                c.numer() * (&den / c.denom())
            }
        })
        .collect();
    (den, nums)
}

fn nonzero_indices(v: &[BigInt]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| !x.is_zero())
        .map(|(i, _)| i)
        .collect()
}

/// Integer convolution truncated to `len` terms, skipping zero entries.
pub(crate) fn convolve_int(a: &[BigInt], b: &[BigInt], len: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); len];
    let nb = nonzero_indices(b);
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for &j in &nb {
            let k = i + j;
            if k >= len {
                break;
            }
            out[k] += x * &b[j];
        }
    }
    out
}

/// Product of two dense coefficient vectors truncated to `len` terms.
pub(crate) fn mul_dense(a: &[Rational], b: &[Rational], len: usize) -> Vec<Rational> {
    let (da, na) = scale_to_integers(&a[..a.len().min(len)]);
    let (db, nb) = scale_to_integers(&b[..b.len().min(len)]);
    let den = da * db;
    convolve_int(&na, &nb, len)
        .into_iter()
        .map(|c| Rational::new(c, den.clone()))
        .collect()
}

/// First `len` coefficients of `1/u`, `u[0] != 0`.
pub(crate) fn inv_dense(u: &[Rational], len: usize) -> Vec<Rational> {
    assert!(!u[0].is_zero(), "inverse needs a nonzero constant term");
    if len == 0 {
        return Vec::new();
    }
    let u = &u[..u.len().min(len)];
    if u.iter().all(|c| c.is_integer()) && u[0].numer().abs().is_one() {
        // integer recurrence c_n = -u0 * sum_{k>=1} u_k c_{n-k}
        let ui: Vec<BigInt> = u.iter().map(|c| c.numer().clone()).collect();
        let u0 = ui[0].clone();
        let nz: Vec<usize> = nonzero_indices(&ui)
            .into_iter()
            .filter(|&k| k > 0)
            .collect();
        let mut c: Vec<BigInt> = Vec::with_capacity(len);
        c.push(u0.clone());
        for n in 1..len {
            let mut acc = BigInt::zero();
            for &k in &nz {
                if k > n {
                    break;
                }
                acc += &ui[k] * &c[n - k];
            }
            c.push(-(&u0 * acc));
        }
        return c.into_iter().map(Rational::from_integer).collect();
    }
    let mut r = vec![u[0].recip()];
    let mut k = 1usize;
    while k < len {
        k = (2 * k).min(len);
        let ur = mul_dense(&u[..u.len().min(k)], &r, k);
        let mut e: Vec<Rational> = ur.into_iter().map(|c| -c).collect();
        e[0] += Rational::from_integer(BigInt::from(2));
        r = mul_dense(&r, &e, k);
    }
    r
}

/// `sum_i w_i * v_i` for rational weights over integer-scaled vectors `v_i = n_i / d_i`.
fn linear_combination(
    weights: &[(&Rational, &(BigInt, Vec<BigInt>))],
    len: usize,
) -> Vec<Rational> {
    let scalars: Vec<(Rational, &Vec<BigInt>)> = weights
        .iter()
        .filter(|(w, _)| !w.is_zero())
        .map(|(w, (d, n))| (*w / Rational::from_integer(d.clone()), n))
        .collect();
    if scalars.is_empty() {
        return vec![Rational::zero(); len];
    }
    let mut l = BigInt::one();
    for (s, _) in &scalars {
        l = l.lcm(s.denom());
    }
    let ints: Vec<(BigInt, &Vec<BigInt>)> = scalars
        .iter()
        .map(|(s, n)| (s.numer() * (&l / s.denom()), *n))
        .collect();
    let mut acc = vec![BigInt::zero(); len];
    for (w, n) in ints {
        for (a, x) in acc.iter_mut().zip(n.iter()) {
            if !x.is_zero() {
                *a += &w * x;
            }
        }
    }
    acc.into_iter()
        .map(|c| Rational::new(c, l.clone()))
        .collect()
}

/// `outer(s)` truncated to `len` terms, `s[0] = 0` (Brent–Kung baby-step/giant-step).
pub(crate) fn compose_dense(outer: &[Rational], s: &[Rational], len: usize) -> Vec<Rational> {
    debug_assert!(s.first().is_none_or(|c| c.is_zero()));
    let m = outer.len();
    if m == 0 || len == 0 {
        return vec![Rational::zero(); len];
    }
    let k = ((m as f64).sqrt().ceil() as usize).max(1);
    let mut s_t: Vec<Rational> = s.iter().take(len).cloned().collect();
    s_t.resize(len, Rational::zero());
    let mut one = vec![Rational::zero(); len];
    one[0] = Rational::one();
    let mut powers: Vec<Vec<Rational>> = vec![one];
    for i in 1..=k {
        let next = mul_dense(&powers[i - 1], &s_t, len);
        powers.push(next);
    }
    let scaled: Vec<(BigInt, Vec<BigInt>)> =
        powers[..k].iter().map(|p| scale_to_integers(p)).collect();
    let n_blocks = m.div_ceil(k);
    let block = |j: usize| {
        let ws: Vec<(&Rational, &(BigInt, Vec<BigInt>))> = (0..k)
            .filter(|i| j * k + i < m)
            .map(|i| (&outer[j * k + i], &scaled[i]))
            .collect();
        linear_combination(&ws, len)
    };
    let giant = &powers[k];
    let mut acc = block(n_blocks - 1);
    for j in (0..n_blocks - 1).rev() {
        let prod = mul_dense(&acc, giant, len);
        let b = block(j);
        acc = prod.into_iter().zip(b).map(|(x, y)| x + y).collect();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rat;
    use proptest::prelude::*;

    fn ints(min: i64, c: &[i64], order: i64) -> QSeries {
        QSeries::from_ints(min, c, Some(order))
    }

    fn poly(min: i64, c: &[i64]) -> QSeries {
        QSeries::from_ints(min, c, None)
    }

    #[test]
    fn mul_laurent_polynomials() {
        // (q^-1 + 1)(q - 1) = q - q^-1
        let a = poly(-1, &[1, 1]);
        let b = poly(0, &[-1, 1]);
        assert_eq!(a.mul(&b), poly(-1, &[-1, 0, 1]));
        let s = ints(-2, &[3, 0, 1, 5, -2], 2);
        assert_eq!(s.mul(&QSeries::one()), s);
    }

    #[test]
    fn mul_tracks_truncation() {
        // (1 + q + O(q^2)) * (q^3 + O(q^5)): known through q^4
        let a = ints(0, &[1, 1], 1);
        let b = ints(3, &[1, 0, 0], 5);
        let c = a.mul(&b);
        assert_eq!(c.order(), Some(4));
        assert_eq!(c.coeff(4), Some(&rat(1, 1)));
        assert_eq!(c.coeff(5), None);
    }

    #[test]
    fn u_and_v_examples() {
        let s = poly(-1, &[1, 0, 0, 3, 0, 5]);
        assert_eq!(s.u_operator(2), poly(1, &[3, 5]));
        assert_eq!(poly(1, &[1, 1]).v_operator(3), poly(3, &[1, 0, 0, 1]));
        assert_eq!(QSeries::one().v_operator(7), QSeries::one());
        let t = ints(0, &[1, 2, 3, 4], 10);
        assert_eq!(t.v_operator(5).order(), Some(50));
        assert_eq!(t.v_operator(5).u_operator(5), t);
        assert_eq!(t.u_operator(3).order(), Some(3));
    }

    #[test]
    fn integral_and_derivative() {
        let s = poly(-1, &[1, 0, 2]);
        assert_eq!(s.formal_integral().unwrap(), poly(-1, &[-1, 0, 2]));
        let t = poly(2, &[3, 0, 0, -1]);
        assert_eq!(t.formal_integral().unwrap().d_operator(), t);
        assert_eq!(poly(1, &[1, 1]).d_operator(), poly(1, &[1, 2]));
        assert!(QSeries::monomial(rat(5, 1), 0).d_operator().is_exact_zero());
        assert_eq!(
            QSeries::one().formal_integral(),
            Err(Error::NonzeroConstantTerm)
        );
    }

    #[test]
    fn reversion_of_t_plus_t2_gives_signed_catalan() {
        let s = poly(1, &[1, 1]);
        let r = s.reversion_to(8).unwrap();
        let expected = [0, 1, -1, 2, -5, 14, -42, 132, -429];
        for (n, c) in expected.iter().enumerate() {
            assert_eq!(r.coeff(n as i64), Some(&rat(*c, 1)), "t^{n}");
        }
        assert_eq!(poly(1, &[1]).reversion().unwrap(), poly(1, &[1]));
        let s = ints(1, &[1, 3, 7], 12);
        let back = s.reversion().unwrap().reversion().unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn reversion_rejects_bad_leading_term() {
        assert_eq!(
            poly(2, &[1, 1]).reversion_to(5),
            Err(Error::NonUnitLeadingTerm)
        );
        assert_eq!(
            poly(0, &[1, 1]).reversion_to(5),
            Err(Error::NonUnitLeadingTerm)
        );
    }

    #[test]
    fn compose_inner_examples() {
        // 1/z composed with q + q^2 + O(q^12)
        let inner = ints(1, &[1, 1], 11);
        let r = QSeries::compose_inner(&poly(-1, &[1]), &inner).unwrap();
        assert_eq!(r.order(), Some(9));
        for n in -1..=9 {
            let expected = if n % 2 == 0 { 1 } else { -1 };
            assert_eq!(r.coeff(n), Some(&rat(-expected, 1)), "q^{n}");
        }
        let cube = QSeries::compose_inner(&poly(3, &[1]), &poly(1, &[1])).unwrap();
        assert_eq!(cube, poly(3, &[1]));
        assert_eq!(
            QSeries::compose_inner(&poly(-1, &[1]), &poly(0, &[1, 1])),
            Err(Error::NonUnitLeadingTerm)
        );
    }

    #[test]
    fn inverse_with_rational_leading_coefficient() {
        let s = QSeries::truncated(-1, vec![rat(2, 3), rat(1, 5), rat(-7, 2)], 12);
        let inv = s.inverse().unwrap();
        let prod = s.mul(&inv);
        assert_eq!(prod.order(), Some(12 - (-1)));
        assert_eq!(prod.first_mismatch(&QSeries::one(), 13).unwrap(), None);
    }

    #[test]
    fn text_round_trip() {
        let s = QSeries::truncated(-2, vec![rat(1, 1), rat(0, 1), rat(-3, 4), rat(5, 1)], 3);
        assert_eq!(QSeries::from_text(&s.to_text()).unwrap(), s);
        let e = poly(1, &[2, 0, -1]);
        assert_eq!(QSeries::from_text(&e.to_text()).unwrap(), e);
        assert!(matches!(
            QSeries::from_text("0 3\n5 1/2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    fn series_strategy(len: usize) -> impl Strategy<Value = QSeries> {
        (proptest::collection::vec(-20i64..20, len), -3i64..3)
            .prop_map(move |(c, m)| QSeries::from_ints(m, &c, Some(m + len as i64 - 1)))
    }

    fn unit_series(len: usize) -> impl Strategy<Value = QSeries> {
        (
            proptest::collection::vec(-6i64..6, len - 1),
            1i64..4,
            any::<bool>(),
        )
            .prop_map(move |(c, lead, neg)| {
                let mut v = vec![0, if neg { -lead } else { lead }];
                v.extend(c);
                QSeries::from_ints(0, &v, Some(len as i64))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn u_after_v_is_identity(s in series_strategy(200), pi in 0usize..3) {
            let p = [3u64, 5, 7][pi];
            prop_assert_eq!(s.v_operator(p).u_operator(p), s);
        }

        #[test]
        fn mul_is_commutative_and_associative(a in series_strategy(50), b in series_strategy(50), c in series_strategy(50)) {
            prop_assert_eq!(a.mul(&b), b.mul(&a));
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        }

        #[test]
        fn reversion_round_trip(s in unit_series(16)) {
            let r = s.reversion().unwrap();
            let t = QSeries::from_ints(1, &[1], None);
            let sr = s.compose(&r).unwrap();
            prop_assert_eq!(sr.first_mismatch(&t, sr.order().unwrap()).unwrap(), None);
            let rs = r.compose(&s).unwrap();
            prop_assert_eq!(rs.first_mismatch(&t, rs.order().unwrap()).unwrap(), None);
            prop_assert_eq!(sr.order(), Some(16));
        }

        #[test]
        fn integral_inverts_derivative(s in series_strategy(60)) {
            let s = s.sub(&QSeries::monomial(s.coeff(0).cloned().unwrap_or_default(), 0));
            prop_assert_eq!(s.formal_integral().unwrap().d_operator(), s.clone());
            prop_assert_eq!(s.d_operator().formal_integral().unwrap(), s);
        }

        #[test]
        fn product_ord_bound(a in series_strategy(30), b in series_strategy(30)) {
            let a = a.scale(&rat(1, 9));
            let b = b.scale(&rat(3, 2));
            let p = 3;
            let bound = match (a.min_ord_p(p), b.min_ord_p(p)) {
                (Valuation::Finite(x), Valuation::Finite(y)) => Valuation::Finite(x + y),
                _ => Valuation::Infinity,
            };
            prop_assert!(a.mul(&b).min_ord_p(p) >= bound);
        }
    }
}
