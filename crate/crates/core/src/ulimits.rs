//! U-operator limits of weight-2 forms: estimating (β, γ), regularizing, and
//! certifying that the normalized U^{2m+1} iterates converge to the eigenform.
//!
//! For an input W = Σ d(n)qⁿ and an eigenform g = Σ b(n)qⁿ with b(p) = 0,
//! C_{β,γ}(n) = d(n) − β·b(n) − γ·b(n/p) is the coefficient of W − βg − γ·g|V.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exactnum::{padic_limit_estimate, rat_int, valuation, PAdicApprox, Rational, Valuation};
use crate::modforms::{self, Eigenform, EtaQuotientSpec};
use crate::qseries::QSeries;
use crate::report::Check;
use crate::weierstrass::{self, CurveModel};

/// Largest p^{2m+1}·n_check the iteration may read.
pub const ITERATION_BUDGET: u64 = 300_000;

/// Relative digits carried through the p-adic bookkeeping.
const WORK_DIGITS: u32 = 24;

#[derive(Clone, Debug, PartialEq)]
pub enum WSource {
    /// `W1-32` (−g·L(2τ)) or `W2-32` (E₄(4τ)/g).
    Builtin(String),
    EtaQuotient(EtaQuotientSpec),
    /// W = D(ζ(Λ, 𝓔_g)) for the eigenform of the problem.
    ZetaRoute(CurveModel),
}

impl WSource {
    pub fn build(&self, eigenform: &Eigenform, order: i64) -> Result<QSeries> {
        match self {
            WSource::Builtin(key) => match key.as_str() {
                "W1-32" => modforms::w1_32(order),
                "W2-32" => modforms::w2_32(order),
                other => Err(Error::Precondition(format!(
                    "unknown builtin W source `{other}`"
                ))),
            },
            WSource::EtaQuotient(spec) => modforms::eta_quotient_expand(spec, order),
            WSource::ZetaRoute(curve) => {
                if (eigenform.len() as i64) < order + 2 {
                    return Err(Error::Precondition(format!(
                        "ζ-route through q^{order} needs {} eigenform terms, have {}",
                        order + 2,
                        eigenform.len()
                    )));
                }
                zeta_route_w(curve, &eigenform.to_series(), order)
            }
        }
    }
}

/// D(ζ(Λ, 𝓔_g(q))) through q^order; for 32B this is W₁.
pub fn zeta_route_w(curve: &CurveModel, g: &QSeries, order: i64) -> Result<QSeries> {
    let eg = modforms::eichler_integral(&g.truncate(order + 2))?;
    Ok(weierstrass::zeta_of(curve, &eg, order)?.d_operator())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ULimitProblem {
    pub w: QSeries,
    pub eigenform: Eigenform,
    pub p: u64,
    /// Deepest U^{2m+1} iterate.
    pub m_max: u32,
    pub n_check: u64,
    /// β and γ use d(p^{2m}), d(p^{2m+1}) for m ≤ estimate_depth.
    pub estimate_depth: u32,
}

impl ULimitProblem {
    pub fn new(
        w: QSeries,
        eigenform: Eigenform,
        p: u64,
        m_max: u32,
        n_check: u64,
        estimate_depth: u32,
    ) -> Result<Self> {
        crate::exactnum::require_odd_prime(p)?;
        let prob = ULimitProblem {
            w,
            eigenform,
            p,
            m_max,
            n_check,
            estimate_depth,
        };
        let iter_top = prob.iteration_top()?;
        match prob.eigenform.b(p) {
            Some(0) => {}
            Some(b) => return Err(Error::Precondition(format!("b({p}) = {b}, expected 0"))),
            None => return Err(Error::Precondition(format!("eigenform lacks b({p})"))),
        }
        let need = iter_top.max(prob.estimate_top());
        let have = prob.w.order().unwrap_or(i64::MAX);
        if have < need as i64 {
            return Err(Error::Precondition(format!(
                "W known through q^{have}, problem needs q^{need}"
            )));
        }
        if (prob.eigenform.len() as u64) < iter_top {
            return Err(Error::Precondition(format!(
                "eigenform has {} terms, iteration needs {iter_top}",
                prob.eigenform.len()
            )));
        }
        Ok(prob)
    }

    /// Problem for a level-32 source with the truncations it needs.
    pub fn level32(
        source: &WSource,
        p: u64,
        m_max: u32,
        n_check: u64,
        estimate_depth: u32,
    ) -> Result<Self> {
        Self::from_source(source, None, p, m_max, n_check, estimate_depth)
    }

    /// Builds W from `source` through the needed truncation; without an
    /// eigenform, the level-32 form g is used.
    pub fn from_source(
        source: &WSource,
        eigenform: Option<Eigenform>,
        p: u64,
        m_max: u32,
        n_check: u64,
        estimate_depth: u32,
    ) -> Result<Self> {
        let iter_top = checked_top(p, m_max, n_check)?;
        let est_top = p
            .checked_pow(2 * estimate_depth + 1)
            .ok_or_else(|| Error::Budget(format!("{p}^{} overflows", 2 * estimate_depth + 1)))?;
        let top = iter_top.max(est_top) as i64;
        let extra = if matches!(source, WSource::ZetaRoute(_)) {
            2
        } else {
            0
        };
        let eigen = match eigenform {
            Some(e) => e,
            None => modforms::eigenform_g32((top + extra) as usize)?,
        };
        let w = source.build(&eigen, top)?;
        Self::new(w, eigen, p, m_max, n_check, estimate_depth)
    }

    fn iteration_top(&self) -> Result<u64> {
        checked_top(self.p, self.m_max, self.n_check)
    }

    fn estimate_top(&self) -> u64 {
        self.p.pow(2 * self.estimate_depth + 1)
    }

    pub fn d(&self, n: u64) -> Result<&Rational> {
        self.w.coeff_or_err(n as i64)
    }

    fn b(&self, n: u64) -> Result<i64> {
        self.eigenform
            .b(n)
            .ok_or_else(|| Error::Precondition(format!("eigenform lacks b({n})")))
    }

    /// Exact approximants d(p^{2m})/(−p)^m and d(p^{2m+1})/(−p)^m.
    pub fn approximants(&self) -> Result<(Vec<Rational>, Vec<Rational>)> {
        let p = self.p;
        let mut beta = Vec::new();
        let mut gamma = Vec::new();
        for m in 0..=self.estimate_depth {
            let norm = rat_int(-(p as i64)).pow(m as i32);
            beta.push(self.d(p.pow(2 * m))? / &norm);
            gamma.push(self.d(p.pow(2 * m + 1))? / &norm);
        }
        Ok((beta, gamma))
    }

    /// The same problem with W replaced by W + c·g (Φ ↦ Φ + c·𝓔_g).
    pub fn eichler_shifted(&self, c: &Rational) -> Result<Self> {
        let g = self.eigenform.to_series();
        let w = self.w.add(&g.scale(c));
        Self::new(
            w,
            self.eigenform.clone(),
            self.p,
            self.m_max,
            self.n_check,
            self.estimate_depth,
        )
    }
}

fn checked_top(p: u64, m_max: u32, n_check: u64) -> Result<u64> {
    p.checked_pow(2 * m_max + 1)
        .and_then(|t| t.checked_mul(n_check))
        .filter(|&t| t <= ITERATION_BUDGET)
        .ok_or_else(|| {
            Error::Budget(format!(
                "p^(2m+1)·n_check = {p}^{}·{n_check} exceeds {ITERATION_BUDGET}",
                2 * m_max + 1
            ))
        })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaGamma {
    pub beta: PAdicApprox,
    pub gamma: PAdicApprox,
    pub beta_approximants: Vec<Rational>,
    pub gamma_approximants: Vec<Rational>,
    pub beta_profile: Vec<Valuation>,
    pub gamma_profile: Vec<Valuation>,
}

pub fn estimate_beta_gamma(problem: &ULimitProblem) -> Result<BetaGamma> {
    let (b, g) = problem.approximants()?;
    let be = padic_limit_estimate(&b, problem.p, WORK_DIGITS)?;
    let ge = padic_limit_estimate(&g, problem.p, WORK_DIGITS)?;
    Ok(BetaGamma {
        beta: be.value,
        gamma: ge.value,
        beta_approximants: b,
        gamma_approximants: g,
        beta_profile: be.profile,
        gamma_profile: ge.profile,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Regularized<'a> {
    problem: &'a ULimitProblem,
    pub beta: PAdicApprox,
    pub gamma: PAdicApprox,
}

fn exact_padic(x: &Rational, p: u64) -> PAdicApprox {
    if x.is_zero() {
        PAdicApprox::zero(p)
    } else {
        PAdicApprox::from_rational(x, p, WORK_DIGITS)
    }
}

pub fn regularize<'a>(
    problem: &'a ULimitProblem,
    beta: &PAdicApprox,
    gamma: &PAdicApprox,
) -> Regularized<'a> {
    Regularized {
        problem,
        beta: beta.clone(),
        gamma: gamma.clone(),
    }
}

impl Regularized<'_> {
    /// C_{β,γ}(n) = d(n) − β·b(n) − γ·b(n/p).
    pub fn c(&self, n: u64) -> Result<PAdicApprox> {
        let pr = self.problem;
        let p = pr.p;
        let mut acc = exact_padic(pr.d(n)?, p);
        let bn = pr.b(n)?;
        if bn != 0 {
            acc = acc.sub(&self.beta.mul_rational(&rat_int(bn)));
        }
        if n.is_multiple_of(p) {
            let bv = pr.b(n / p)?;
            if bv != 0 {
                acc = acc.sub(&self.gamma.mul_rational(&rat_int(bv)));
            }
        }
        Ok(acc)
    }

    /// W − β·g − γ·g|V with β, γ replaced by their representatives.
    pub fn series(&self) -> QSeries {
        let pr = self.problem;
        let g = pr.eigenform.to_series();
        pr.w.sub(&g.scale(&self.beta.representative()))
            .sub(&g.v_operator(pr.p).scale(&self.gamma.representative()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterateRow {
    pub m: u32,
    /// C_{β,γ}(p^{2m+1}).
    pub normalizer: PAdicApprox,
    /// min over n ≤ n_check of ord_p(R_m(n) − b(n)) (a lower bound when precision runs out).
    pub agreement: Valuation,
    pub q_coefficient_is_one: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub p: u64,
    pub estimate: BetaGamma,
    /// The non-exceptional γ used for the iteration.
    pub gamma_used: Rational,
    pub rows: Vec<IterateRow>,
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn agreements(&self) -> Vec<Valuation> {
        self.rows.iter().map(|r| r.agreement).collect()
    }

    pub fn check(&self) -> Check {
        let table: Vec<String> = self
            .rows
            .iter()
            .map(|r| format!("m={}: {}", r.m, r.agreement))
            .collect();
        Check::new(
            format!("U-iteration p={}", self.p),
            self.passed,
            format!(
                "agreement digits [{}], β = {}, γ = {}, iterating with γ = {}",
                table.join(", "),
                self.estimate.beta,
                self.estimate.gamma,
                self.gamma_used
            ),
        )
    }
}

/// 0 unless the estimate cannot rule 0 out as the exceptional value, then 1.
fn non_exceptional_gamma(est: &PAdicApprox) -> Rational {
    if est.has_known_valuation() {
        Rational::zero()
    } else {
        Rational::one()
    }
}

pub fn u_iterate_certify(problem: &ULimitProblem) -> Result<ConvergenceReport> {
    let p = problem.p;
    let estimate = estimate_beta_gamma(problem)?;
    let gamma_used = non_exceptional_gamma(&estimate.gamma);
    let reg = regularize(problem, &estimate.beta, &exact_padic(&gamma_used, p));
    let mut rows = Vec::new();
    for m in 0..=problem.m_max {
        let pm = p.pow(2 * m + 1);
        let normalizer = reg.c(pm)?;
        if !normalizer.has_known_valuation() {
            return Err(Error::DivisionByNonUnit(format!(
                "C({pm}) = {normalizer} has unknown valuation"
            )));
        }
        let mut agreement = Valuation::Infinity;
        let mut q_one = false;
        for n in 1..=problem.n_check {
            let r = reg.c(pm * n)?.div(&normalizer)?;
            let target = exact_padic(&rat_int(problem.b(n)?), p);
            let diff = r.sub(&target);
            if n == 1 {
                // R_m(1) = C(p^{2m+1})/C(p^{2m+1}): no known digit of R_m(1) − 1 may be nonzero
                q_one = !diff.has_known_valuation();
            }
            agreement = agreement.min(diff.valuation());
        }
        rows.push(IterateRow {
            m,
            normalizer,
            agreement,
            q_coefficient_is_one: q_one,
        });
    }
    let ag: Vec<Valuation> = rows.iter().map(|r| r.agreement).collect();
    let passed = ag.iter().all(|&a| a > Valuation::Finite(0))
        && ag.windows(2).all(|w| w[0] <= w[1])
        && rows.iter().all(|r| r.q_coefficient_is_one);
    Ok(ConvergenceReport {
        p,
        estimate,
        gamma_used,
        rows,
        passed,
    })
}

/// γ approximants are unchanged by Φ ↦ Φ + c·𝓔_g, and β approximants shift by c.
pub fn eichler_shift_invariance(problem: &ULimitProblem, c: &Rational) -> Result<Check> {
    let (b0, g0) = problem.approximants()?;
    let (b1, g1) = problem.eichler_shifted(c)?.approximants()?;
    let gamma_same = g0 == g1;
    let beta_shift = b0.iter().zip(&b1).all(|(x, y)| &(y - x) == c);
    Ok(Check::new(
        format!("Eichler shift c={c} p={}", problem.p),
        gamma_same && beta_shift,
        format!(
            "γ approximants identical: {gamma_same}; β approximants shifted by c: {beta_shift}"
        ),
    ))
}

/// ord_p of the coefficient of q^{p^k} in Φ − β𝓔_g − γ(1/p)𝓔_g|V, which is C(p^k)/p^k.
pub fn prime_power_ords(
    problem: &ULimitProblem,
    beta: &PAdicApprox,
    gamma: &PAdicApprox,
    k_max: u32,
) -> Result<Vec<Valuation>> {
    let reg = regularize(problem, beta, gamma);
    (0..=k_max)
        .map(|k| {
            let c = reg.c(problem.p.pow(k))?;
            Ok(c.valuation().shift(-(k as i64)))
        })
        .collect()
}

/// True when an exact rational is a p-adic unit.
pub fn is_unit_rational(x: &Rational, p: u64) -> bool {
    valuation(x, p) == Valuation::Finite(0)
}
