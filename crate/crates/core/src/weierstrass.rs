//! Laurent data of ℘ and ζ for y² = 4x³ − g₂x − g₃, lattice Eisenstein values,
//! and the level-32 identity checks.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exactnum::{factorial, is_p_integral, rat, rat_int, valuation, Rational, Valuation};
use crate::modforms::{self, bernoulli, rescaled};
use crate::qseries::{parse_rational, QSeries};
use crate::report::Check;

#[derive(Clone, Debug, PartialEq)]
pub struct CurveModel {
    g2: Rational,
    g3: Rational,
}

impl CurveModel {
    pub fn new(g2: Rational, g3: Rational) -> Result<Self> {
        let c = CurveModel { g2, g3 };
        if c.discriminant().is_zero() {
            return Err(Error::SingularCurve);
        }
        Ok(c)
    }

    pub fn from_ints(g2: i64, g3: i64) -> Result<Self> {
        Self::new(rat_int(g2), rat_int(g3))
    }

    /// From y² + a₁xy + a₃y = x³ + a₂x² + a₄x + a₆, via g₂ = c₄/12, g₃ = c₆/216.
    pub fn from_ainvariants(a: [Rational; 5]) -> Result<Self> {
        let [a1, a2, a3, a4, a6] = a;
        let b2 = &a1 * &a1 + rat_int(4) * &a2;
        let b4 = rat_int(2) * &a4 + &a1 * &a3;
        let b6 = &a3 * &a3 + rat_int(4) * &a6;
        let c4 = &b2 * &b2 - rat_int(24) * &b4;
        let c6 = -(&b2 * &b2 * &b2) + rat_int(36) * &b2 * &b4 - rat_int(216) * &b6;
        Self::new(c4 / rat_int(12), c6 / rat_int(216))
    }

    pub fn g2(&self) -> &Rational {
        &self.g2
    }

    pub fn g3(&self) -> &Rational {
        &self.g3
    }

    /// Δ = g₂³ − 27g₃².
    pub fn discriminant(&self) -> Rational {
        &self.g2 * &self.g2 * &self.g2 - rat_int(27) * &self.g3 * &self.g3
    }

    /// Q = 12g₂ (the value of E₄ at the lattice).
    pub fn q(&self) -> Rational {
        rat_int(12) * &self.g2
    }

    /// R = −216g₃ (the value of E₆ at the lattice).
    pub fn r(&self) -> Rational {
        rat_int(-216) * &self.g3
    }

    /// (A, B) of the short form y² = x³ + Ax + B obtained by y ↦ 2y.
    pub fn short_form(&self) -> (Rational, Rational) {
        (-&self.g2 / rat_int(4), -&self.g3 / rat_int(4))
    }

    /// p-integral model with unit discriminant.
    pub fn has_good_reduction(&self, p: u64) -> bool {
        is_p_integral(&self.g2, p)
            && is_p_integral(&self.g3, p)
            && valuation(&self.discriminant(), p) == Valuation::Finite(0)
    }

    pub fn require_good_reduction(&self, p: u64) -> Result<()> {
        if self.has_good_reduction(p) {
            Ok(())
        } else {
            Err(Error::BadReduction(p))
        }
    }

    /// Lines `g2 <r>` and `g3 <r>`, or `ainv a1 a2 a3 a4 a6`; `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let (mut g2, mut g3, mut ainv) = (None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or("");
            let vals: Option<Vec<Rational>> = it.map(parse_rational).collect();
            let vals = vals.ok_or_else(|| perr("bad rational"))?;
            match (key, vals.len()) {
                ("g2", 1) => g2 = Some(vals[0].clone()),
                ("g3", 1) => g3 = Some(vals[0].clone()),
                ("ainv", 5) => {
                    ainv = Some(<[Rational; 5]>::try_from(vals).expect("length checked"))
                }
                ("g2" | "g3", _) => return Err(perr("expected one value")),
                ("ainv", _) => return Err(perr("expected five a-invariants")),
                _ => return Err(perr(&format!("unknown key `{key}`"))),
            }
        }
        match (g2, g3, ainv) {
            (Some(a), Some(b), None) => Self::new(a, b),
            (None, None, Some(a)) => Self::from_ainvariants(a),
            _ => Err(Error::Parse {
                line: 0,
                msg: "curve file needs both g2 and g3, or a single ainv line".into(),
            }),
        }
    }
}

/// ℘ = z⁻² + Σ_{k≥2} c_k z^{2k−2}.
#[derive(Clone, Debug, PartialEq)]
pub struct WpLaurent {
    c: Vec<Rational>,
}

pub fn wp_coefficients(curve: &CurveModel, k_max: usize) -> WpLaurent {
    let k_max = k_max.max(3);
    let mut c = vec![Rational::zero(); k_max + 1];
    c[2] = curve.g2() / rat_int(20);
    c[3] = curve.g3() / rat_int(28);
    for k in 4..=k_max {
        let mut s = Rational::zero();
        for j in 2..=k - 2 {
            s += &c[j] * &c[k - j];
        }
        c[k] = rat_int(3) * s / rat_int(((2 * k + 1) * (k - 3)) as i64);
    }
    WpLaurent { c }
}

impl WpLaurent {
    pub fn k_max(&self) -> usize {
        self.c.len() - 1
    }

    pub fn c(&self, k: usize) -> &Rational {
        &self.c[k]
    }

    /// G_{2k} = c_k·(2k−2)!/2, normalized so that G₄ = g₂/20.
    pub fn g(&self, k: usize) -> Rational {
        &self.c[k] * Rational::from_integer(factorial(2 * k as u64 - 2)) / rat_int(2)
    }

    /// ℘ through z^{2K−1}.
    pub fn wp_series(&self) -> QSeries {
        let k = self.k_max() as i64;
        let mut coeffs = vec![Rational::zero(); (2 * k + 2) as usize];
        coeffs[0] = Rational::one();
        for j in 2..=k {
            coeffs[(2 * j) as usize] = self.c[j as usize].clone();
        }
        QSeries::truncated(-2, coeffs, 2 * k - 1)
    }

    /// ζ = 1/z − Σ c_k z^{2k−1}/(2k−1) through z^{2K}, so that ℘ = −ζ′.
    pub fn zeta_series(&self) -> QSeries {
        let k = self.k_max() as i64;
        let mut coeffs = vec![Rational::zero(); (2 * k + 2) as usize];
        coeffs[0] = Rational::one();
        for j in 2..=k {
            coeffs[(2 * j) as usize] = -&self.c[j as usize] / rat_int(2 * j - 1);
        }
        QSeries::truncated(-1, coeffs, 2 * k)
    }
}

pub fn zeta_laurent(curve: &CurveModel, k_max: usize) -> QSeries {
    wp_coefficients(curve, k_max).zeta_series()
}

/// (G_{2k}, E_{2k}) with E_{2k} = −(4k/B_{2k})·G_{2k}.
pub fn lattice_eisenstein(curve: &CurveModel, two_k: u32) -> Result<(Rational, Rational)> {
    if two_k < 4 || two_k % 2 == 1 {
        return Err(Error::InvalidWeight(two_k));
    }
    let k = (two_k / 2) as usize;
    let g = wp_coefficients(curve, k).g(k);
    let e = -rat(2 * two_k as i64, 1) / bernoulli(two_k) * &g;
    Ok((g, e))
}

/// Outer Laurent series in z with enough terms to compose with an inner
/// series of valuation 1 through q^order.
fn k_for_order(order: i64) -> usize {
    (order.max(4) / 2 + 2) as usize
}

/// Below this order the direct composition is cheap and seeds the recurrence.
const ODE_SEED: i64 = 8;

fn wp_direct(curve: &CurveModel, s: &QSeries, order: i64) -> Result<QSeries> {
    let wp = wp_coefficients(curve, k_for_order(order)).wp_series();
    Ok(QSeries::compose_inner(&wp, &s.truncate(order + 3))?.truncate(order))
}

fn zeta_direct(curve: &CurveModel, s: &QSeries, order: i64) -> Result<QSeries> {
    let z = zeta_laurent(curve, k_for_order(order));
    Ok(QSeries::compose_inner(&z, &s.truncate(order + 2))?.truncate(order))
}

/// Coefficient of q^k in 6X² − g₂/2, with x[i] the coefficient of q^{i−2}.
/// `skip_pole` drops the two products involving the q^{-2} term.
fn six_x_squared(x: &[Rational], k: i64, g2_half: &Rational, skip_pole: bool) -> Rational {
    let lo = if skip_pole { -1 } else { -2 };
    let mut acc = Rational::zero();
    for a in lo..=k - lo {
        let b = k - a;
        if b < lo || a + 2 >= x.len() as i64 || b + 2 >= x.len() as i64 {
            continue;
        }
        acc += &x[(a + 2) as usize] * &x[(b + 2) as usize];
    }
    acc *= rat_int(6);
    if k == 0 {
        acc -= g2_half;
    }
    acc
}

/// (℘(Λ, s), ℘′(Λ, s)) through q^order and q^{order−1}, for s of valuation 1
/// known through q^{order+3}.
///
/// Composing directly costs a full series product per Laurent term, with
/// denominators that grow like lcm(1..n). Instead X = ℘(s), Y = ℘′(s) solve
/// X′ = Y·s′ and Y′ = (6X² − g₂/2)·s′; at step m the pair (x_{m+1}, y_m) is the
/// solution of a 2×2 system with determinant m(m+1) − 12, which only vanishes
/// at m = 3, inside the directly computed seed.
pub fn wp_pair_of(curve: &CurveModel, s: &QSeries, order: i64) -> Result<(QSeries, QSeries)> {
    let seed = order.min(ODE_SEED);
    let ds = s.truncate(order + 3).derivative();
    let x_seed = wp_direct(curve, s, seed)?;
    let y_seed = x_seed.derivative().mul(&ds.truncate(seed + 2).inverse()?);
    if order <= ODE_SEED {
        return Ok((x_seed, y_seed.truncate(order - 1)));
    }
    let u = (0..=order + 2)
        .map(|i| ds.coeff_or_err(i).cloned())
        .collect::<Result<Vec<_>>>()?;
    let mut x = (-2..=seed)
        .map(|n| x_seed.coeff_or_err(n).cloned())
        .collect::<Result<Vec<_>>>()?;
    let mut y = (-3..seed)
        .map(|n| y_seed.coeff_or_err(n).cloned())
        .collect::<Result<Vec<_>>>()?;
    let g2_half = curve.g2() / rat_int(2);
    // z[k+4] = [q^k](6X² − g₂/2)
    let mut z = (-4..=seed - 2)
        .map(|k| six_x_squared(&x, k, &g2_half, false))
        .collect::<Vec<_>>();
    let pole = rat_int(12) * &x[0] * &u[0];
    for m in seed..order {
        let zp = six_x_squared(&x, m - 1, &g2_half, true);
        let mut sa = Rational::zero();
        for j in -3..m {
            sa += &y[(j + 3) as usize] * &u[(m - j) as usize];
        }
        let mut sb = &zp * &u[0];
        for k in -4..=m - 2 {
            sb += &z[(k + 4) as usize] * &u[(m - 1 - k) as usize];
        }
        let mr = rat_int(m);
        let xn = (&mr * &sa + &u[0] * &sb) / rat_int(m * (m + 1) - 12);
        let ym = (&sb + &pole * &xn) / &mr;
        z.push(zp + rat_int(12) * &x[0] * &xn);
        x.push(xn);
        y.push(ym);
    }
    Ok((
        QSeries::truncated(-2, x, order),
        QSeries::truncated(-3, y, order - 1),
    ))
}

/// ℘(Λ, s(q)) through q^order (s has valuation 1 and is known through q^{order+3}).
pub fn wp_of(curve: &CurveModel, s: &QSeries, order: i64) -> Result<QSeries> {
    Ok(wp_pair_of(curve, s, order)?.0)
}

/// ζ(Λ, s(q)) through q^order, from dζ(s)/dq = −℘(s)·s′.
pub fn zeta_of(curve: &CurveModel, s: &QSeries, order: i64) -> Result<QSeries> {
    let seed = zeta_direct(curve, s, order.min(ODE_SEED))?;
    if order <= ODE_SEED {
        return Ok(seed);
    }
    let x = wp_of(curve, s, order - 1)?;
    let dz = x
        .mul(&s.truncate(order + 2).derivative())
        .neg()
        .truncate(order - 1);
    let constant = QSeries::monomial(seed.coeff_or_err(0)?.clone(), 0);
    Ok(dz
        .shift(1)
        .formal_integral()?
        .add(&constant)
        .truncate(order))
}

/// ℘(Λ₃₂, 𝓔_g) against a target series through q^order.
pub fn verify_wp_lift_against(target: &QSeries, order: i64) -> Result<Check> {
    let eg = modforms::eichler_g32(order + 3)?;
    let lhs = wp_of(&modforms::curve_32b(), &eg, order)?;
    let name = "wp-lift: ℘(Λ32, E_g(q)) = L(2τ)";
    Ok(match lhs.first_mismatch(target, order)? {
        None => {
            Check::pass(name, format!("exact agreement through q^{order}")).with_precision(order)
        }
        Some(n) => Check::fail(
            name,
            format!(
                "first mismatch at q^{n}: lhs {} vs rhs {}",
                lhs.coeff_or_err(n)?,
                target.coeff_or_err(n)?
            ),
        ),
    })
}

pub fn verify_wp_lift(order: i64) -> Result<Check> {
    verify_wp_lift_against(&modforms::l16_doubled(order)?, order)
}

/// Outcome of the 20ζ comparison: the signs σ with LHS = σ·RHS through q^order.
#[derive(Clone, Debug, PartialEq)]
pub struct ZetaIdentity {
    pub sigmas: Vec<i8>,
    pub lhs_leading: Rational,
    pub rhs_leading: Rational,
    pub rhs_g_integral: bool,
    pub check: Check,
}

/// 20ζ(Λ₃₂, 𝓔_g) + ∫E₄(4τ)/g dq/q  vs  (56P(4τ) − 32P(8τ) + 160P(16τ) − 640P(32τ))/g.
pub fn verify_20zeta_identity(order: i64) -> Result<ZetaIdentity> {
    let curve = modforms::curve_32b();
    let eg = modforms::eichler_g32(order + 2)?;
    let zeta = zeta_of(&curve, &eg, order)?;
    let w2 = modforms::w2_32(order)?;
    let lhs = zeta.scale(&rat_int(20)).add(&w2.formal_integral()?);
    let comb = [(56, 4u64), (-32, 8), (160, 16), (-640, 32)]
        .iter()
        .map(|&(k, d)| {
            rescaled(|t| Ok(modforms::p_series(t)), d, order + 1).map(|s| s.scale(&rat_int(k)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .reduce(|a, b| a.add(&b))
        .expect("four terms");
    let g = modforms::g32(order + 3)?;
    let rhs = comb.mul(&g.inverse()?).truncate(order);
    let rhs_g_integral = comb.scale(&rat_int(3)).is_integral();
    let mut sigmas = Vec::new();
    for sigma in [1i8, -1] {
        let target = rhs.scale(&rat_int(sigma as i64));
        if lhs.first_mismatch(&target, order)?.is_none() {
            sigmas.push(sigma);
        }
    }
    let name = "20ζ identity holds for exactly one sign σ";
    let detail = format!(
        "lhs q^-1 coefficient {}, rhs {}; signs that hold through q^{order}: {:?}",
        lhs.coeff_or_err(-1)?,
        rhs.coeff_or_err(-1)?,
        sigmas
    );
    let check = Check::new(name, sigmas.len() == 1, detail).with_precision(order);
    Ok(ZetaIdentity {
        lhs_leading: lhs.coeff_or_err(-1)?.clone(),
        rhs_leading: rhs.coeff_or_err(-1)?.clone(),
        sigmas,
        rhs_g_integral,
        check,
    })
}
