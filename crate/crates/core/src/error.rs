use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("sequence is not p-adically Cauchy: {0}")]
    NonCauchy(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("division by a non-unit: {0}")]
    DivisionByNonUnit(String),

    #[error("series must have order 1 with nonzero leading coefficient")]
    NonUnitLeadingTerm,
    #[error("constant term is nonzero, formal integral undefined")]
    NonzeroConstantTerm,
    #[error("coefficient of q^{0} is beyond the known truncation")]
    UnknownCoefficient(i64),

    #[error("eta quotient has fractional leading exponent {0}/24")]
    FractionalLeadingExponent(i64),
    #[error("eta quotient repeats multiplier {0}")]
    RepeatedMultiplier(u32),
    #[error("weight {0} is not an even integer >= 4")]
    InvalidWeight(u32),
    #[error("Hecke relation violated: {0}")]
    HeckeInconsistency(String),
    #[error("eigenform file must start with `1 1`")]
    MissingNormalization,

    #[error("curve is singular (discriminant vanishes)")]
    SingularCurve,
    #[error("curve has bad reduction at {0}")]
    BadReduction(u64),
    #[error("no pair of constraints with unit determinant; raise the truncation")]
    NoUnitDeterminant,
    #[error("membership violated at t^{exponent}: {detail}")]
    MembershipViolation { exponent: i64, detail: String },
    #[error("curve is not supersingular at {0}")]
    NotSupersingular(u64),

    #[error("argument {0} is not a p-adic integer")]
    ArgumentNotPAdicInteger(String),
    #[error("class number formula needs p = 3 mod 4 and p > 3, got {0}")]
    BadDiscriminant(u64),
    #[error("Catalan index is not integral: {0}")]
    IndexNotIntegral(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("linear system is singular")]
    SingularSystem,
    #[error("supersingularity witnesses disagree at p = {p}: hasse = {hasse}, count = {count}")]
    WitnessDisagreement { p: u64, hasse: bool, count: bool },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
