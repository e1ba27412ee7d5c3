//! Eisenstein series as weighted polynomials in Q = E₄, R = E₆; supersingularity
//! with two witnesses; the mod-p congruence for μ_p.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactnum::{legendre_i64, rat_int, residue, residue_u64, Rational};
use crate::fgl;
use crate::modforms::eisenstein_qexp;
use crate::qseries::QSeries;
use crate::report::Check;
use crate::weierstrass::CurveModel;

/// Σ c_{a,b} Q^a R^b with 4a + 6b = weight.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPoly {
    weight: u32,
    terms: BTreeMap<(u32, u32), Rational>,
}

fn monomials(k: u32) -> Vec<(u32, u32)> {
    (0..=k / 6)
        .filter(|b| (k - 6 * b).is_multiple_of(4))
        .map(|b| ((k - 6 * b) / 4, b))
        .collect()
}

/// Exact solve of an overdetermined consistent system `rows · x = rhs`.
fn solve_exact(mut rows: Vec<Vec<Rational>>, mut rhs: Vec<Rational>) -> Result<Vec<Rational>> {
    let m = rows.first().map_or(0, Vec::len);
    let mut pivot_row = 0;
    for col in 0..m {
        let Some(r) = (pivot_row..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            return Err(Error::SingularSystem);
        };
        rows.swap(pivot_row, r);
        rhs.swap(pivot_row, r);
        let inv = rows[pivot_row][col].recip();
        for c in col..m {
            rows[pivot_row][c] *= &inv;
        }
        rhs[pivot_row] *= &inv;
        for r in 0..rows.len() {
            if r != pivot_row && !rows[r][col].is_zero() {
                let f = rows[r][col].clone();
                for c in col..m {
                    let d = &f * &rows[pivot_row][c];
                    rows[r][c] -= d;
                }
                let d = &f * &rhs[pivot_row];
                rhs[r] -= d;
            }
        }
        pivot_row += 1;
    }
    if rhs[m..].iter().any(|x| !x.is_zero()) {
        return Err(Error::SingularSystem);
    }
    rhs.truncate(m);
    Ok(rhs)
}

fn monomial_series(a: u32, b: u32, order: i64) -> Result<QSeries> {
    Ok(eisenstein_qexp(4, order)?
        .pow(a as i64)?
        .mul(&eisenstein_qexp(6, order)?.pow(b as i64)?))
}

/// E_k as a polynomial in Q = E₄ and R = E₆.
pub fn ek_as_qr(k: u32) -> Result<WeightedPoly> {
    if k < 4 || k % 2 == 1 {
        return Err(Error::InvalidWeight(k));
    }
    static MEMO: OnceLock<Mutex<HashMap<u32, WeightedPoly>>> = OnceLock::new();
    let memo = MEMO.get_or_init(Default::default);
    if let Some(w) = memo.lock().expect("memo lock").get(&k) {
        return Ok(w.clone());
    }
    let mons = monomials(k);
    let depth = mons.len() as i64 + 1;
    let series: Vec<QSeries> = mons
        .iter()
        .map(|&(a, b)| monomial_series(a, b, depth))
        .collect::<Result<_>>()?;
    let ek = eisenstein_qexp(k, depth)?;
    let rows: Vec<Vec<Rational>> = (0..=depth)
        .map(|n| {
            series
                .iter()
                .map(|s| s.coeff_or_err(n).cloned())
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rhs: Vec<Rational> = (0..=depth)
        .map(|n| ek.coeff_or_err(n).cloned())
        .collect::<Result<_>>()?;
    let x = solve_exact(rows, rhs)?;
    let terms = mons
        .into_iter()
        .zip(x)
        .filter(|(_, c)| !c.is_zero())
        .collect();
    let w = WeightedPoly { weight: k, terms };
    memo.lock().expect("memo lock").insert(k, w.clone());
    Ok(w)
}

impl WeightedPoly {
    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn terms(&self) -> &BTreeMap<(u32, u32), Rational> {
        &self.terms
    }

    pub fn evaluate(&self, q: &Rational, r: &Rational) -> Rational {
        self.terms
            .iter()
            .map(|(&(a, b), c)| {
                c * num_traits::pow(q.clone(), a as usize) * num_traits::pow(r.clone(), b as usize)
            })
            .fold(Rational::zero(), |acc, x| acc + x)
    }

    /// Substitute Q = 12g₂, R = −216g₃.
    pub fn evaluate_curve(&self, curve: &CurveModel) -> Rational {
        self.evaluate(&curve.q(), &curve.r())
    }

    /// Re-expand as a q-series through q^order.
    pub fn to_qseries(&self, order: i64) -> Result<QSeries> {
        let mut acc = QSeries::truncated(0, Vec::new(), order);
        for (&(a, b), c) in &self.terms {
            acc = acc.add(&monomial_series(a, b, order)?.scale(c));
        }
        Ok(acc)
    }

    /// Coefficients mod p (nonzero ones only); fails if p divides a denominator.
    pub fn reduce_mod(&self, p: u64) -> Result<BTreeMap<(u32, u32), u64>> {
        let mut out = BTreeMap::new();
        for (&k, c) in &self.terms {
            let r = residue_u64(c, p).ok_or_else(|| {
                Error::Precondition(format!(
                    "E_{} has coefficient {c} with {p} in the denominator",
                    self.weight
                ))
            })?;
            if r != 0 {
                out.insert(k, r);
            }
        }
        Ok(out)
    }
}

fn short_form_mod(curve: &CurveModel, p: u64) -> Result<(i64, i64)> {
    let (a, b) = curve.short_form();
    let ra = residue_u64(&a, p).ok_or(Error::BadReduction(p))?;
    let rb = residue_u64(&b, p).ok_or(Error::BadReduction(p))?;
    Ok((ra as i64, rb as i64))
}

/// #E(𝔽_p) for y² = x³ + Ax + B, including the point at infinity.
pub fn point_count(curve: &CurveModel, p: u64) -> Result<u64> {
    curve.require_good_reduction(p)?;
    let (a, b) = short_form_mod(curve, p)?;
    let pi = p as i64;
    let mut count: i64 = 1;
    for x in 0..pi {
        let f = ((x * x % pi * x + a * x + b) % pi + pi) % pi;
        count += 1 + legendre_i64(f, p)? as i64;
    }
    Ok(count as u64)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupersingularWitness {
    pub p: u64,
    pub supersingular: bool,
    /// Hasse invariant (E_{p−1} at the curve, or the x^{p−1} coefficient at p = 3) mod p.
    pub hasse_value: u64,
    pub points: u64,
}

/// Two witnesses: the Hasse invariant and the point count; they must agree.
pub fn is_supersingular(curve: &CurveModel, p: u64) -> Result<SupersingularWitness> {
    crate::exactnum::require_odd_prime(p)?;
    curve.require_good_reduction(p)?;
    let hasse_value = if p == 3 {
        // coefficient of x² in x³ + Ax + B
        0
    } else {
        let a = ek_as_qr((p - 1) as u32)?.evaluate_curve(curve);
        residue_u64(&a, p).ok_or(Error::BadReduction(p))?
    };
    let points = point_count(curve, p)?;
    let hasse = hasse_value == 0;
    // a_p ≡ 0 mod p; at p = 3 the Hasse bound still allows a_p = ±3
    let count = points % p == 1;
    if hasse != count {
        return Err(Error::WitnessDisagreement { p, hasse, count });
    }
    Ok(SupersingularWitness {
        p,
        supersingular: hasse,
        hasse_value,
        points,
    })
}

/// Nonsingular integral pairs with |g₂|, |g₃| ≤ bound.
pub fn grid_curves(bound: i64) -> Vec<CurveModel> {
    let mut out = Vec::new();
    for g2 in -bound..=bound {
        for g3 in -bound..=bound {
            if let Ok(c) = CurveModel::from_ints(g2, g3) {
                out.push(c);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct MuCongruence {
    pub p: u64,
    pub mu_residue: u64,
    /// −E_{p+1}/12 mod p (`None` at p = 3).
    pub target_residue: Option<u64>,
    /// μ ≡ sign·(−E_{p+1}/12).
    pub sign: Option<i8>,
    /// μ ≡ sign·(p·[u^p]ζ(ℓ_t)).
    pub ptypical_sign: Option<i8>,
    pub checks: Vec<Check>,
}

fn sign_relating(x: u64, y: u64, p: u64) -> Option<i8> {
    if y == 0 {
        None
    } else if x == y {
        Some(1)
    } else if (x + y).is_multiple_of(p) {
        Some(-1)
    } else {
        None
    }
}

pub fn verify_mu_congruence(curve: &CurveModel, p: u64) -> Result<MuCongruence> {
    let w = is_supersingular(curve, p)?;
    if !w.supersingular {
        return Err(Error::NotSupersingular(p));
    }
    let log = fgl::ec_formal_expansion(curve, fgl::dieudonne_truncation(p, 1))?;
    let sol = fgl::dieudonne_solve(&log, p, 1)?;
    let mu = u64::try_from(sol.mu.residue(1)?).expect("residue below p");
    let e = ek_as_qr((p + 1) as u32)?.evaluate_curve(curve);
    let e_res = residue_u64(&e, p).ok_or(Error::BadReduction(p))?;
    let tag = format!("(g2,g3)=({},{}) p={p}", curve.g2(), curve.g3());
    let pt = fgl::mu_mod_p_via_ptypical(curve, p)?;
    let ptypical_sign = sign_relating(mu, pt.residue, p);
    let mut checks = vec![Check::new(
        format!("μ vs p-typical {tag}"),
        ptypical_sign.is_some(),
        format!("μ ≡ {mu}, p·[u^p]ζ(ℓ_t) ≡ {} mod {p}", pt.residue),
    )];
    let (target_residue, sign) = if p == 3 {
        let delta = residue_u64(&curve.discriminant(), 3).ok_or(Error::BadReduction(3))?;
        let g2c = residue_u64(&num_traits::pow(curve.g2().clone(), 3), 3)
            .ok_or(Error::BadReduction(3))?;
        checks.push(Check::new(
            format!("μ₃ ≢ 0 {tag}"),
            mu != 0 && delta != 0 && delta == g2c,
            format!("μ₃ ≡ {mu}, Δ ≡ g₂³ ≡ {delta} mod 3"),
        ));
        checks.push(Check::new(
            format!("E₄ ≡ 0 mod 3 {tag}"),
            e_res == 0,
            format!("E₄ = {e}"),
        ));
        (None, None)
    } else {
        let target = residue(&(-&e / rat_int(12)), p, 1)
            .and_then(|x| x.to_u64())
            .ok_or(Error::BadReduction(p))?;
        let sign = sign_relating(mu, target, p);
        checks.push(Check::new(
            format!("E_{} ≢ 0 {tag}", p + 1),
            e_res != 0,
            format!("E_{} ≡ {e_res} mod {p}", p + 1),
        ));
        checks.push(Check::new(
            format!("μ ≡ ε·(−E_{}/12) {tag}", p + 1),
            sign.is_some(),
            format!("μ ≡ {mu}, −E/12 ≡ {target} mod {p}, sign {sign:?}"),
        ));
        (Some(target), sign)
    };
    Ok(MuCongruence {
        p,
        mu_residue: mu,
        target_residue,
        sign,
        ptypical_sign,
        checks,
    })
}

fn poly_mod(mut a: Vec<u64>, p: u64) -> Vec<u64> {
    for x in a.iter_mut() {
        *x %= p;
    }
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn inv_mod(a: u64, p: u64) -> u64 {
    let r = BigInt::from(a)
        .extended_gcd(&BigInt::from(p))
        .x
        .mod_floor(&BigInt::from(p));
    r.to_u64().expect("residue")
}

/// gcd over 𝔽_p (monic; empty for zero).
fn poly_gcd(a: Vec<u64>, b: Vec<u64>, p: u64) -> Vec<u64> {
    let (mut a, mut b) = (poly_mod(a, p), poly_mod(b, p));
    while !b.is_empty() {
        let lead_inv = inv_mod(*b.last().expect("nonempty"), p);
        while a.len() >= b.len() {
            let f = a.last().expect("nonempty") * lead_inv % p;
            let shift = a.len() - b.len();
            for (i, bi) in b.iter().enumerate() {
                a[i + shift] = (a[i + shift] + p - f * bi % p) % p;
            }
            a = poly_mod(a, p);
            if a.is_empty() {
                break;
            }
        }
        std::mem::swap(&mut a, &mut b);
    }
    if let Some(&l) = a.last() {
        let li = inv_mod(l, p);
        a.iter_mut().for_each(|x| *x = *x * li % p);
    }
    a
}

/// (e, f, univariate remainder in s = Q³/R²) after stripping Q^e R^f.
fn strip(terms: &BTreeMap<(u32, u32), u64>) -> (u32, u32, Vec<u64>) {
    let e = terms.keys().map(|k| k.0).min().unwrap_or(0);
    let f = terms.keys().map(|k| k.1).min().unwrap_or(0);
    let deg = terms.keys().map(|k| (k.0 - e) / 3).max().unwrap_or(0);
    let mut poly = vec![0; deg as usize + 1];
    for (&(a, _), &c) in terms {
        poly[((a - e) / 3) as usize] = c;
    }
    (e, f, poly)
}

/// Ā = E_{p−1}, B̄ = E_{p+1} mod p are coprime in 𝔽_p[Q, R].
pub fn relative_primality_check(p: u64) -> Result<Check> {
    if p < 5 {
        return Err(Error::Precondition(
            "relative primality needs p >= 5".into(),
        ));
    }
    crate::exactnum::require_odd_prime(p)?;
    let a = ek_as_qr((p - 1) as u32)?.reduce_mod(p)?;
    let b = ek_as_qr((p + 1) as u32)?.reduce_mod(p)?;
    let (ea, fa, pa) = strip(&a);
    let (eb, fb, pb) = strip(&b);
    let g = poly_gcd(pa, pb, p);
    let coprime = g.len() == 1 && !(ea > 0 && eb > 0) && !(fa > 0 && fb > 0);
    let shape = ea <= 1 && fa <= 1;
    Ok(Check::new(
        format!("Ā, B̄ coprime mod {p}"),
        coprime && shape,
        format!(
            "Ā = Q^{ea} R^{fa}·(deg {} in Q³/R²), B̄ = Q^{eb} R^{fb}·(...), gcd degree {}",
            a.len(),
            g.len().saturating_sub(1)
        ),
    ))
}

/// B_{p+1}/(p+1) mod p, for the Kummer step.
pub fn kummer_residue(p: u64) -> Result<u64> {
    let b = crate::modforms::bernoulli((p + 1) as u32) / rat_int((p + 1) as i64);
    residue_u64(&b, p)
        .ok_or_else(|| Error::Precondition(format!("B_{}/{} not {p}-integral", p + 1, p + 1)))
}

/// Helper used by reports: an exact rational as a residue string.
pub fn residue_string(x: &Rational, p: u64) -> String {
    match residue_u64(x, p) {
        Some(r) => format!("{r} mod {p}"),
        None => format!("{x} (not {p}-integral)"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rat;
    use crate::modforms;

    #[test]
    fn weighted_polynomials() {
        let e4 = ek_as_qr(4).unwrap();
        assert_eq!(e4.terms().len(), 1);
        assert_eq!(e4.terms()[&(1, 0)], rat(1, 1));
        let e10 = ek_as_qr(10).unwrap();
        assert_eq!(
            e10.terms().iter().collect::<Vec<_>>(),
            vec![(&(1, 1), &rat(1, 1))]
        );
        let e12 = ek_as_qr(12).unwrap();
        assert_eq!(e12.terms()[&(3, 0)], rat(441, 691));
        assert_eq!(e12.terms()[&(0, 2)], rat(250, 691));
        assert_eq!(ek_as_qr(8).unwrap().terms()[&(2, 0)], rat(1, 1));
    }

    #[test]
    fn weighted_round_trip() {
        for k in [4u32, 6, 8, 12, 14, 16, 18, 24] {
            let w = ek_as_qr(k).unwrap();
            let s = w.to_qseries(50).unwrap();
            let e = modforms::eisenstein_qexp(k, 50).unwrap();
            assert_eq!(s.first_mismatch(&e, 50).unwrap(), None, "k={k}");
        }
    }

    #[test]
    fn evaluation_32b() {
        let c = modforms::curve_32b();
        assert_eq!(c.q(), rat(-192, 1));
        assert_eq!(c.r(), rat(0, 1));
        assert_eq!(ek_as_qr(4).unwrap().evaluate_curve(&c), rat(-192, 1));
        assert_eq!(ek_as_qr(6).unwrap().evaluate_curve(&c), rat(0, 1));
        assert_eq!(ek_as_qr(8).unwrap().evaluate_curve(&c), rat(36864, 1));
        for k in [4u32, 6, 8, 10, 12] {
            let (_, e) = crate::weierstrass::lattice_eisenstein(&c, k).unwrap();
            assert_eq!(ek_as_qr(k).unwrap().evaluate_curve(&c), e, "k={k}");
        }
    }

    #[test]
    fn point_counts() {
        let c = modforms::curve_32b();
        assert_eq!(point_count(&c, 7).unwrap(), 8);
        assert_eq!(point_count(&c, 11).unwrap(), 12);
        assert_ne!(point_count(&c, 5).unwrap(), 6);
        assert_eq!(point_count(&c, 2), Err(Error::BadReduction(2)));
    }

    #[test]
    fn supersingular_witnesses() {
        let c = modforms::curve_32b();
        assert!(is_supersingular(&c, 7).unwrap().supersingular);
        assert!(!is_supersingular(&c, 5).unwrap().supersingular);
        assert!(is_supersingular(&c, 3).unwrap().supersingular);
        let j0 = CurveModel::from_ints(0, 4).unwrap();
        assert!(!is_supersingular(&j0, 13).unwrap().supersingular);
        assert!(is_supersingular(&j0, 5).unwrap().supersingular);
    }

    #[test]
    fn mu_congruence_32b() {
        let c = modforms::curve_32b();
        let r7 = verify_mu_congruence(&c, 7).unwrap();
        assert!(r7.checks.iter().all(Check::passed), "{:?}", r7.checks);
        assert_eq!(r7.target_residue, Some(1));
        assert_eq!(r7.mu_residue, 1);
        let r3 = verify_mu_congruence(&c, 3).unwrap();
        assert!(r3.checks.iter().all(Check::passed), "{:?}", r3.checks);
        assert_eq!(r3.mu_residue, 2);
    }

    #[test]
    fn relative_primality() {
        for p in [5u64, 7, 11, 13, 17, 19, 23] {
            let c = relative_primality_check(p).unwrap();
            assert!(c.passed(), "p={p}: {}", c.detail);
        }
    }

    #[test]
    fn kummer_step() {
        for p in [5u64, 7, 11, 13] {
            assert_eq!(
                kummer_residue(p).unwrap(),
                residue_u64(&rat(1, 12), p).unwrap(),
                "p={p}"
            );
        }
    }

    #[test]
    fn gcd_over_fp() {
        // (x+1)(x+2) and (x+1)(x+3) over F_7
        assert_eq!(poly_gcd(vec![2, 3, 1], vec![3, 4, 1], 7), vec![1, 1]);
        assert_eq!(poly_gcd(vec![1, 1], vec![2, 1], 7), vec![1]);
    }
}
