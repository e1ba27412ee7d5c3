use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use padiclab::exactnum::{is_prime, Valuation};
use padiclab::modforms::{self, Eigenform, EtaQuotientSpec};
use padiclab::qseries::parse_rational;
use padiclab::report::{Check, RunReport};
use padiclab::suite::{self, SuiteConfig};
use padiclab::ulimits::{self, ULimitProblem, WSource};
use padiclab::weierstrass::{self, CurveModel};
use padiclab::{cache, eisenmod, fgl, gammap, Error};

#[derive(Parser)]
#[command(
    name = "padiclab",
    version,
    about = "Exact verification runs for p-adic limits at level 32 and beyond"
)]
struct Cli {
    /// Series cache directory (default: $PADICLAB_CACHE).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Disable the series cache entirely.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Worker threads for multi-criterion runs.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed for the randomized property subsets.
    #[arg(long, global = true, default_value_t = SuiteConfig::default().seed)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compare the Catalan limit, closed form, U-limit γ and μ_p for 32B.
    Gamma32 {
        #[arg(long)]
        p: u64,
        /// Comparison modulus exponent K (default: what the approximants certify).
        #[arg(long)]
        prec: Option<u32>,
        /// Depth of the Catalan approximants and of the γ estimate.
        #[arg(long)]
        m_max: Option<u32>,
    },
    /// Solve for (λ_p, μ_p) and check the Eisenstein congruence.
    Mu {
        #[arg(long)]
        p: u64,
        #[arg(long, allow_hyphen_values = true)]
        g2: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        g3: Option<String>,
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        prec: u32,
    },
    /// p-integrality of t(q) = ℓ⁻¹(𝓔_g(q)).
    Honda {
        #[arg(long, value_delimiter = ',', default_values_t = [3u64, 5, 7, 11, 13])]
        p: Vec<u64>,
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Eigenform file (`n b(n)` lines); default is the level-32 form.
        #[arg(long)]
        form: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        terms: i64,
    },
    /// Exact q-series identities for 32B.
    Verify {
        #[arg(value_enum)]
        identity: Identity,
        #[arg(long, default_value_t = 200)]
        terms: i64,
    },
    /// Estimate (β, γ) and certify U-iteration convergence for a problem file.
    Ulimit {
        problem: PathBuf,
        #[arg(long)]
        p: Option<u64>,
        #[arg(long)]
        m_max: Option<u32>,
    },
    /// μ-congruence over a grid of small curves at their supersingular primes.
    Grid {
        /// TOML with `bound` and `primes`; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Curves with |g2|, |g3| ≤ bound.
        #[arg(long)]
        bound: Option<i64>,
        #[arg(long, value_delimiter = ',')]
        p: Vec<u64>,
    },
    /// Run a named battery.
    Suite {
        #[arg(value_enum)]
        which: SuiteKind,
        /// Restrict to these criteria (comma separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Identity {
    WpLift,
    #[value(name = "20zeta")]
    Zeta20,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteKind {
    Acceptance,
}

/// Refusals and bad inputs (exit code 2), distinct from failed checks (exit code 1).
#[derive(Debug)]
struct Refusal(String);

impl From<Error> for Refusal {
    fn from(e: Error) -> Self {
        Refusal(e.to_string())
    }
}

type Run<T> = std::result::Result<T, Refusal>;

/// Hashes the command line and the contents of every file it names.
struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    fn new() -> Self {
        let mut hasher = Sha256::new();
        for a in std::env::args().skip(1) {
            hasher.update(a.as_bytes());
            hasher.update([0u8]);
        }
        Inputs { hasher }
    }

    fn read(&mut self, path: &Path) -> Run<String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Refusal(format!("{}: {e}", path.display())))?;
        self.hasher.update(text.as_bytes());
        Ok(text)
    }

    fn digest(self) -> String {
        self.hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn in_file(path: &Path, r: padiclab::Result<impl Sized>) -> Run<()> {
    r.map(|_| ())
        .map_err(|e| Refusal(format!("{}: {e}", path.display())))
}

fn load_curve(inputs: &mut Inputs, path: &Path) -> Run<CurveModel> {
    let text = inputs.read(path)?;
    let c = CurveModel::parse(&text);
    in_file(path, c.clone())?;
    Ok(c.expect("checked"))
}

fn load_eigenform(inputs: &mut Inputs, path: &Path) -> Run<Eigenform> {
    let text = inputs.read(path)?;
    let f = Eigenform::parse(&text);
    in_file(path, f.clone())?;
    Ok(f.expect("checked"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cache = cache::global();
    if cli.no_cache {
        cache.set_enabled(false);
    } else {
        let dir = cli
            .cache_dir
            .clone()
            .or_else(|| std::env::var_os("PADICLAB_CACHE").map(PathBuf::from));
        cache.set_dir(dir);
    }
    let start = Instant::now();
    let mut inputs = Inputs::new();
    let cfg = SuiteConfig {
        seed: cli.seed,
        jobs: cli.jobs,
    };
    let result = match &cli.cmd {
        Cmd::Gamma32 { p, prec, m_max } => gamma32(*p, *prec, *m_max),
        Cmd::Mu {
            p,
            g2,
            g3,
            curve,
            prec,
        } => mu(&mut inputs, *p, g2, g3, curve, *prec),
        Cmd::Honda {
            p,
            curve,
            form,
            terms,
        } => honda(&mut inputs, p, curve, form, *terms),
        Cmd::Verify { identity, terms } => verify(*identity, *terms),
        Cmd::Ulimit { problem, p, m_max } => ulimit(&mut inputs, problem, *p, *m_max),
        Cmd::Grid { config, bound, p } => grid(&mut inputs, config, *bound, p, cfg.jobs),
        Cmd::Suite {
            which: SuiteKind::Acceptance,
            only,
        } => acceptance(only, &cfg),
    };
    let mut report = match result {
        Ok(r) => r,
        Err(Refusal(msg)) => {
            eprintln!("padiclab: {msg}");
            return ExitCode::from(2);
        }
    };
    report.input_digest = inputs.digest();
    report.elapsed_ms = start.elapsed().as_millis() as u64;
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Table => report.render_table(),
    };
    // a closed pipe (`| head`) is not an error worth a panic
    let _ = std::io::stdout().write_all(text.as_bytes());
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn gamma32(p: u64, prec: Option<u32>, m_max: Option<u32>) -> Run<RunReport> {
    if p % 4 != 3 || !is_prime(p) {
        return Err(Refusal(format!(
            "gamma32 needs a prime p = 3 mod 4, got {p}"
        )));
    }
    let (m_cat, depth) = match (m_max, suite::gamma_depths(p)) {
        (Some(m), _) => (m, m.max(1)),
        (None, Ok((m, _, d))) => (m, d),
        (None, Err(_)) => {
            let m = (1..=2)
                .rev()
                .find(|&m| {
                    p.checked_pow(2 * m + 1)
                        .is_some_and(|t| t <= gammap::CATALAN_BUDGET)
                })
                .unwrap_or(0);
            (m, 1)
        }
    };
    let k = match (prec, m_max) {
        (Some(k), _) => Some(k),
        (None, None) => suite::gamma_depths(p).ok().map(|d| d.1),
        (None, Some(_)) => None,
    };
    let av = suite::gamma_avatars_at(p, m_cat, depth, k)?;
    let mut report = RunReport::new(format!("gamma32 p={p}"));
    let (checks, signs) = suite::avatar_checks(&av);
    checks.into_iter().for_each(|c| report.push(c));
    for (name, s, ev) in signs {
        report.signs.record(name, s, ev);
    }
    if report.signs.get("same-side").is_some_and(|s| s != 1) {
        report.push(Check::fail(
            "same-side signs",
            "avatars on one side disagree by −1",
        ));
    }
    Ok(report)
}

fn curve_from_flags(
    inputs: &mut Inputs,
    g2: &Option<String>,
    g3: &Option<String>,
    curve: &Option<PathBuf>,
) -> Run<CurveModel> {
    match (g2, g3, curve) {
        (None, None, Some(path)) => load_curve(inputs, path),
        (Some(a), Some(b), None) => {
            let parse =
                |s: &str| parse_rational(s).ok_or_else(|| Refusal(format!("bad rational `{s}`")));
            Ok(CurveModel::new(parse(a)?, parse(b)?)?)
        }
        (None, None, None) => Ok(modforms::curve_32b()),
        _ => Err(Refusal("give either --g2 and --g3, or --curve".into())),
    }
}

fn mu(
    inputs: &mut Inputs,
    p: u64,
    g2: &Option<String>,
    g3: &Option<String>,
    curve: &Option<PathBuf>,
    prec: u32,
) -> Run<RunReport> {
    let curve = curve_from_flags(inputs, g2, g3, curve)?;
    let tag = format!("(g2,g3)=({},{}) p={p}", curve.g2(), curve.g3());
    let w = eisenmod::is_supersingular(&curve, p)?;
    if !w.supersingular {
        return Err(Refusal(format!(
            "{tag} is ordinary ({} points); the Dieudonné solve needs supersingular reduction",
            w.points
        )));
    }
    let mut report = RunReport::new(format!("mu {tag}"));
    report.push(Check::pass(
        format!("supersingular {tag}"),
        format!("Hasse value {}, {} points", w.hasse_value, w.points),
    ));
    let log = fgl::ec_formal_expansion(&curve, fgl::dieudonne_truncation(p, prec))?;
    let sol = fgl::dieudonne_solve(&log, p, prec)?;
    report.push(
        Check::pass(
            format!("Dieudonné solve {tag}"),
            format!(
                "λ = {}, μ = {}; membership verified through t^{} on {} rows",
                sol.lambda,
                sol.mu,
                sol.truncation,
                sol.residuals.len()
            ),
        )
        .with_precision(sol.certified_precision as i64),
    );
    report.push(Check::new(
        format!("μ_p ≢ 0 {tag}"),
        sol.mu.has_known_valuation() && sol.mu.valuation() == Valuation::Finite(0),
        format!("μ = {}", sol.mu),
    ));
    let cong = eisenmod::verify_mu_congruence(&curve, p)?;
    cong.checks.into_iter().for_each(|c| report.push(c));
    if let Some(s) = cong.sign {
        report.signs.record("mu vs -E_{p+1}/12", s, tag.clone());
    }
    if let Some(s) = cong.ptypical_sign {
        report.signs.record("mu vs p-typical", s, tag);
    }
    Ok(report)
}

fn honda(
    inputs: &mut Inputs,
    primes: &[u64],
    curve: &Option<PathBuf>,
    form: &Option<PathBuf>,
    terms: i64,
) -> Run<RunReport> {
    if terms < 2 {
        return Err(Refusal("--terms must be at least 2".into()));
    }
    let curve = match curve {
        Some(path) => load_curve(inputs, path)?,
        None => modforms::curve_32b(),
    };
    let g = match form {
        Some(path) => {
            let f = load_eigenform(inputs, path)?;
            if (f.len() as i64) < terms {
                return Err(Refusal(format!(
                    "{}: {} coefficients, --terms {terms} needs more",
                    path.display(),
                    f.len()
                )));
            }
            f.to_series()
        }
        None => modforms::g32(terms)?,
    };
    let log = fgl::ec_formal_expansion(&curve, terms)?;
    let eg = modforms::eichler_integral(&g.truncate(terms))?;
    let (_, checks) = fgl::honda_check(&log, &eg, primes, terms)?;
    let mut report = RunReport::new(format!("honda (g2,g3)=({},{})", curve.g2(), curve.g3()));
    checks.into_iter().for_each(|c| report.push(c));
    Ok(report)
}

fn verify(identity: Identity, terms: i64) -> Run<RunReport> {
    match identity {
        Identity::WpLift => {
            let mut report = RunReport::new("verify wp-lift");
            report.push(weierstrass::verify_wp_lift(terms)?);
            Ok(report)
        }
        Identity::Zeta20 => {
            let mut report = RunReport::new("verify 20zeta");
            let z = weierstrass::verify_20zeta_identity(terms)?;
            if let [s] = z.sigmas[..] {
                report
                    .signs
                    .record("20-zeta sigma", s, format!("through q^{terms}"));
            }
            report.push(z.check);
            Ok(report)
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    p: u64,
    m_max: u32,
    n_check: u64,
    estimate_depth: Option<u32>,
    /// Eigenform file; the level-32 form when absent.
    eigenform: Option<PathBuf>,
    source: SourceSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSpec {
    builtin: Option<String>,
    eta: Option<Vec<(u32, i32)>>,
    zeta_curve: Option<PathBuf>,
}

fn ulimit(inputs: &mut Inputs, path: &Path, p: Option<u64>, m_max: Option<u32>) -> Run<RunReport> {
    let text = inputs.read(path)?;
    let spec: ProblemFile =
        toml::from_str(&text).map_err(|e| Refusal(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let source = match (
        &spec.source.builtin,
        &spec.source.eta,
        &spec.source.zeta_curve,
    ) {
        (Some(key), None, None) => WSource::Builtin(key.clone()),
        (None, Some(factors), None) => WSource::EtaQuotient(EtaQuotientSpec::new(factors.clone())?),
        (None, None, Some(c)) => WSource::ZetaRoute(load_curve(inputs, &base.join(c))?),
        _ => {
            return Err(Refusal(format!(
                "{}: [source] needs exactly one of builtin, eta, zeta_curve",
                path.display()
            )))
        }
    };
    let eigen = match &spec.eigenform {
        Some(e) => Some(load_eigenform(inputs, &base.join(e))?),
        None => None,
    };
    let p = p.unwrap_or(spec.p);
    let m_max = m_max.unwrap_or(spec.m_max);
    let depth = spec.estimate_depth.unwrap_or(m_max.max(1));
    let problem = ULimitProblem::from_source(&source, eigen, p, m_max, spec.n_check, depth)?;
    let conv = ulimits::u_iterate_certify(&problem)?;
    let mut report = RunReport::new(format!("ulimit {} p={p}", path.display()));
    let est = &conv.estimate;
    report.push(Check::pass(
        format!("estimate p={p}"),
        format!(
            "β = {} (profile {:?}), γ = {} (profile {:?})",
            est.beta, est.beta_profile, est.gamma, est.gamma_profile
        ),
    ));
    report.push(conv.check());
    report.push(ulimits::eichler_shift_invariance(
        &problem,
        &padiclab::exactnum::rat(1, 1),
    )?);
    Ok(report)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GridConfig {
    bound: Option<i64>,
    primes: Option<Vec<u64>>,
}

fn grid(
    inputs: &mut Inputs,
    config: &Option<PathBuf>,
    bound: Option<i64>,
    primes: &[u64],
    jobs: usize,
) -> Run<RunReport> {
    let file = match config {
        Some(path) => {
            let text = inputs.read(path)?;
            toml::from_str::<GridConfig>(&text)
                .map_err(|e| Refusal(format!("{}: {e}", path.display())))?
        }
        None => GridConfig::default(),
    };
    let bound = bound.or(file.bound).unwrap_or(suite::GRID_BOUND);
    let primes = match primes {
        [] => file.primes.unwrap_or_else(|| vec![3, 5, 7, 11, 13]),
        ps => ps.to_vec(),
    };
    if !(0..=20).contains(&bound) {
        return Err(Refusal(format!("grid bound {bound} outside 0..=20")));
    }
    for &p in &primes {
        if p < 3 || !is_prime(p) {
            return Err(Refusal(format!("{p} is not an odd prime")));
        }
    }
    let (checks, signs) = suite::mu_grid_checks(bound, &primes, jobs)?;
    let mut report = RunReport::new(format!("grid bound={bound}"));
    checks.into_iter().for_each(|c| report.push(c));
    for (name, s, ev) in signs {
        report.signs.record(name, s, ev);
    }
    Ok(report)
}

fn acceptance(only: &[u8], cfg: &SuiteConfig) -> Run<RunReport> {
    let ids: Vec<u8> = if only.is_empty() {
        suite::CRITERIA.iter().map(|c| c.0).collect()
    } else {
        only.to_vec()
    };
    if let Some(bad) = ids
        .iter()
        .find(|&&id| !suite::CRITERIA.iter().any(|c| c.0 == id))
    {
        return Err(Refusal(format!("no acceptance criterion {bad}")));
    }
    let outcomes = suite::run_criteria(&ids, cfg);
    let mut report = RunReport::new("suite acceptance");
    for o in &outcomes {
        eprintln!("{}", o.summary_line());
        report.push(Check::new(
            format!("criterion {}", o.id),
            o.passed(),
            o.title,
        ));
        for c in &o.checks {
            report.push(Check {
                name: format!("[{}] {}", o.id, c.name),
                ..c.clone()
            });
        }
        report.signs.merge(&o.signs);
    }
    Ok(report)
}
