use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use liouville::constructors::{
    construct, existence_bound, recipe, ConstructOptions, PiecewiseSolution, SolutionSpec,
};
use liouville::estimates::{kappa_threshold, verify_lemma1, LemmaOptions};
use liouville::manifold::{build_manifold, certify_growth, classical_criteria, ManifoldSpec, VolumeBound};
use liouville::params::{admissible_a, classify, cond_ab, critical_growth, h_of_p, k_classify, Params, Region};
use liouville::radial::{default_tol, log_grid, residual_terms, TOL_ENV};
use liouville::Error;

#[derive(Parser)]
#[command(name = "liouville", version, about = "Volume-growth thresholds and verified solutions for Δ_m u + u^p|∇u|^q ≤ 0")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Region, test-power region and growth threshold of (p, q).
    Classify(ParamArgs),
    /// Critical and constructed volume exponents; Caccioppoli exponents with --a.
    Exponents {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
    },
    /// Build and verify an explicit solution.
    Construct {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Reload a saved solution and rerun every check.
    Verify {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Residual grid for --format csv.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Compare V(r) with r^α(ln r)^β, e^{κr} or e^{κ r^γ ln r}.
    CertifyVolume {
        #[command(flatten)]
        source: ManifoldSource,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, value_parser = parse_window, default_value = "1e2:1e6")]
        window: (f64, f64),
        #[command(flatten)]
        output: Output,
    },
    /// Explicit-constant Caccioppoli chain against φ_i.
    Lemma1 {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 50.0)]
        b: f64,
        #[arg(long, default_value_t = 4)]
        i: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Parabolicity, m-parabolicity and stochastic completeness verdicts.
    Criteria {
        #[command(flatten)]
        source: ManifoldSource,
        #[arg(long)]
        m: f64,
        /// Exponent for the two conjectured integral tests.
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Defaults, tolerances and version.
    Info,
}

#[derive(Args, Clone, Copy)]
struct ParamArgs {
    #[arg(long)]
    m: f64,
    #[arg(long, allow_hyphen_values = true)]
    p: f64,
    #[arg(long, allow_hyphen_values = true)]
    q: f64,
}

#[derive(Args)]
struct Knobs {
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    iota: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 2)]
    n: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ManifoldSource {
    /// Manifold spec, or a saved solution whose manifold is used.
    #[arg(long)]
    manifold: Option<PathBuf>,
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound {lo}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound {hi}: {e}"))?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("window needs 0 < lo < hi, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

enum Failure {
    Usage(String),
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Params(_) | Error::NoAdmissibleA(_) => Failure::Usage(e.to_string()),
            e => Failure::Compute(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Compute(Error::Domain(e.to_string()))
    }
}

type Run = Result<bool, Failure>;

fn emit<T: Serialize>(doc: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc).map_err(Error::from)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}

fn emit_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn params(a: &ParamArgs) -> Result<Params, Failure> {
    Params::new(a.m, a.p, a.q).map_err(|e| Failure::Usage(e.to_string()))
}

fn load_manifold(src: &ManifoldSource) -> Result<ManifoldSpec, Failure> {
    let path = src.manifold.as_ref().or(src.solution.as_ref()).expect("clap enforces one source");
    let text = std::fs::read_to_string(path)?;
    if let Ok(spec) = ManifoldSpec::from_json(&text) {
        return Ok(spec);
    }
    let sol: SolutionSpec = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(sol.manifold)
}

fn classify_cmd(a: &ParamArgs) -> Run {
    let p = params(a)?;
    let region = classify(&p);
    let k = k_classify(&p);
    let growth = critical_growth(&p);
    let h = if region == Region::G5 && p.p > 0.0 { h_of_p(p.m, p.p).ok() } else { None };
    let kappa = kappa_threshold(&p).ok();
    emit(&json!({
        "params": p,
        "region": region,
        "k_region": k,
        "admissible_a": admissible_a(&p).ok(),
        "growth": growth,
        "h": h,
        "kappa_threshold": kappa,
    }))?;
    Ok(true)
}

fn exponents_cmd(a: &ParamArgs, epsilon: f64, ta: Option<f64>, tb: Option<f64>) -> Run {
    let p = params(a)?;
    let opts = ConstructOptions { epsilon, ..ConstructOptions::default() };
    let lemma = ta.map(|ta| {
        let b = tb.unwrap_or_else(|| 2.0 * liouville::params::LemmaExponents::new(&p, ta, 1.0).cutoff_power().max(1.0));
        cond_ab(&p, ta, b)
    });
    emit(&json!({
        "params": p,
        "region": classify(&p),
        "nonexistence": critical_growth(&p),
        "existence": existence_bound(&p, &opts)?,
        "lemma": lemma,
    }))?;
    Ok(lemma.is_none_or(|c| c.holds))
}

fn construct_cmd(a: &ParamArgs, k: &Knobs, out: Option<&PathBuf>, output: &Output) -> Run {
    let p = params(a)?;
    let opts = ConstructOptions {
        epsilon: k.epsilon,
        eta: k.eta,
        theta: k.theta,
        iota: k.iota,
        lambda: k.lambda,
        gamma: k.gamma,
        alpha_origin: None,
        n: k.n,
        seed: k.seed,
    };
    let sol = match construct(&p, &opts) {
        Ok(sol) => sol,
        Err(Error::Construction { stage, msg }) if stage == "verify" => {
            // Keep the failing spec around for inspection.
            let mut sol = PiecewiseSolution::from_spec(recipe(&p, &opts)?)?;
            sol.verify(k.seed)?;
            if let Some(path) = out {
                sol.save(path)?;
            }
            eprintln!("verification failed: {msg}");
            emit(&json!({ "solution": sol.spec, "pass": false }))?;
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = out {
        sol.save(path)?;
    }
    match output.format {
        Format::Json => emit(&json!({ "solution": sol.spec, "pass": sol.passed() }))?,
        Format::Csv => emit_csv(grid_rows(&sol, sol.window(), 200)?)?,
    }
    Ok(sol.passed())
}

#[derive(Serialize)]
struct GridRow {
    r: f64,
    u: f64,
    du: f64,
    relative_residual: f64,
}

fn grid_rows(sol: &PiecewiseSolution, window: (f64, f64), points: usize) -> Result<Vec<GridRow>, Failure> {
    let u = sol.u();
    log_grid(window.0, window.1, points.max(2))
        .into_iter()
        .map(|r| {
            let t = residual_terms(sol.params(), &sol.manifold, u, r, 1.0)?;
            Ok(GridRow { r, u: u.value(r), du: u.deriv(r), relative_residual: t.relative() })
        })
        .collect()
}

fn verify_cmd(path: &Path, seed: Option<u64>, window: Option<(f64, f64)>, points: usize, output: &Output) -> Run {
    let mut sol = PiecewiseSolution::load(path)?;
    let stored = sol.verification().cloned();
    let seed = seed.or(stored.as_ref().map(|s| s.seed)).unwrap_or(42);
    let report = sol.verify(seed)?.clone();
    let pass = report.pass;
    match output.format {
        Format::Json => {
            let same = stored.as_ref().map(|s| {
                s.pass == report.pass
                    && (s.inequality.worst_residual - report.inequality.worst_residual).abs() <= 1e-12
            });
            emit(&json!({ "params": sol.params(), "region": sol.spec.region, "report": report, "matches_stored": same, "pass": pass }))?;
        }
        Format::Csv => emit_csv(grid_rows(&sol, window.unwrap_or(sol.window()), points)?)?,
    }
    Ok(pass)
}

fn certify_cmd(
    src: &ManifoldSource,
    alpha: Option<f64>,
    beta: f64,
    kappa: Option<f64>,
    gamma: Option<f64>,
    window: (f64, f64),
    output: &Output,
) -> Run {
    let bound = match (alpha, kappa, gamma) {
        (Some(alpha), None, None) => VolumeBound::PolyLog { alpha, beta },
        (None, Some(rate), None) => VolumeBound::Exp { rate },
        (None, Some(rate), Some(gamma)) => VolumeBound::ExpPowerLog { rate, gamma },
        _ => return Err(Failure::Usage("give --alpha [--beta], or --kappa [--gamma]".into())),
    };
    let man = build_manifold(&load_manifold(src)?)?;
    let cert = certify_growth(&man, bound, window)?;
    match output.format {
        Format::Json => emit(&cert)?,
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                r: f64,
                ln_v: f64,
                ln_bound: f64,
            }
            let rows: Result<Vec<Row>, Error> = log_grid(window.0, window.1, 200)
                .into_iter()
                .map(|r| Ok(Row { r, ln_v: man.ln_v(r)?, ln_bound: bound.ln_eval(r) }))
                .collect();
            emit_csv(rows?)?
        }
    }
    Ok(cert.pass)
}

fn lemma1_cmd(path: &Path, a: f64, b: f64, i: u32, output: &Output) -> Run {
    let sol = PiecewiseSolution::load(path)?;
    let rep = verify_lemma1(&sol, a, b, i, &LemmaOptions::default())?;
    match output.format {
        Format::Json => emit(&rep)?,
        Format::Csv => emit_csv(rep.steps.iter())?,
    }
    Ok(rep.pass)
}

fn criteria_cmd(src: &ManifoldSource, m: f64, p: Option<f64>, output: &Output) -> Run {
    if m.is_nan() || m <= 1.0 {
        return Err(Failure::Usage(format!("m must exceed 1, got {m}")));
    }
    let man = build_manifold(&load_manifold(src)?)?;
    let c = classical_criteria(&man, m, p);
    match output.format {
        Format::Json => emit(&c)?,
        Format::Csv => {
            let mut rows = vec![
                ("parabolic_cy", c.parabolic_cy.clone()),
                ("m_parabolic", c.m_parabolic.clone()),
                ("stochastically_complete", c.stochastically_complete.clone()),
            ];
            if let Some(ci) = &c.conjecture_integrals {
                rows.push(("conjecture_first", ci.first.clone()));
                rows.push(("conjecture_second", ci.second.clone()));
            }
            #[derive(Serialize)]
            struct Row {
                criterion: &'static str,
                verdict: liouville::manifold::Verdict,
                power_slope: f64,
                log_exponent: Option<f64>,
            }
            emit_csv(rows.into_iter().map(|(criterion, t)| Row {
                criterion,
                verdict: t.verdict,
                power_slope: t.power_slope,
                log_exponent: t.log_exponent,
            }))?
        }
    }
    Ok(true)
}

fn info_cmd() -> Run {
    emit(&json!({
        "version": env!("CARGO_PKG_VERSION"),
        "tolerance": default_tol(),
        "tolerance_env": TOL_ENV,
        "default_seed": 42,
        "regions": ["G1", "G2", "G3", "G4", "G5", "G6"],
        "verbs": ["classify", "exponents", "construct", "verify", "certify-volume", "lemma1", "criteria", "info"],
    }))?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Classify(a) => classify_cmd(a),
        Command::Exponents { params, epsilon, a, b } => exponents_cmd(params, *epsilon, *a, *b),
        Command::Construct { params, knobs, out, output } => construct_cmd(params, knobs, out.as_ref(), output),
        Command::Verify { solution, seed, window, points, output } => verify_cmd(solution, *seed, *window, *points, output),
        Command::CertifyVolume { source, alpha, beta, kappa, gamma, window, output } => {
            certify_cmd(source, *alpha, *beta, *kappa, *gamma, *window, output)
        }
        Command::Lemma1 { solution, a, b, i, output } => lemma1_cmd(solution, *a, *b, *i, output),
        Command::Criteria { source, m, p, output } => criteria_cmd(source, *m, *p, output),
        Command::Info => info_cmd(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(Error::Io(e))) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
