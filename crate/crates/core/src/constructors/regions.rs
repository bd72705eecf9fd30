//! Per-region recipes. Each returns an unverified `SolutionSpec`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{build_manifold, ln_omega, ManifoldSpec, ModelManifold, Outer, VolumeBound};
use crate::params::{classify, critical_growth, h_of_p, Params, Region};
use crate::roots::bisect;

use super::glue::{check_theta, default_theta, match_ratio, origin_profile_1, origin_profile_2, scan_r0, Match};
use super::profiles::Profile;
use super::{Glue, Piece, PieceKind, Route, SolutionSpec, Transform};

/// Knobs for `construct`; `None` picks the documented default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructOptions {
    /// Excess of the log exponent over its critical value.
    pub epsilon: f64,
    pub eta: Option<f64>,
    pub theta: Option<f64>,
    pub iota: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    /// Exponent of the `c₀ - r^α` origin piece (G5, p = 0).
    pub alpha_origin: Option<f64>,
    pub n: u32,
    pub seed: u64,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        ConstructOptions {
            epsilon: 1.0,
            eta: None,
            theta: None,
            iota: None,
            lambda: None,
            gamma: None,
            alpha_origin: None,
            n: 2,
            seed: 42,
        }
    }
}

const MAX_R0_DOUBLINGS: usize = 20;

fn eta_in(eta: Option<f64>, hi: f64, what: &str) -> Result<f64> {
    let eta = eta.unwrap_or(0.5 * hi);
    if !(eta > 0.0 && eta < hi) {
        return Err(Error::Params(format!("eta={eta} outside (0, {hi}) for {what}")));
    }
    Ok(eta)
}

fn power_log_coef(man: &ModelManifold) -> f64 {
    ln_omega(man.n()) + (man.n() - 1) as f64 * man.c0().ln()
}

/// Weight `δ` and the final rescaling for a glued pair.
fn scaling(params: &Params, ln_lambda: f64, tau: f64) -> (f64, Transform, Option<f64>) {
    let Params { m, p, q } = *params;
    let ln_delta = (ln_lambda + (m - 1.0 - p - q) * tau.ln()).min(0.0);
    let delta = ln_delta.exp();
    let d = params.denom();
    if d == 0.0 {
        // u = v^a needs δ a^{-p} ≥ 1; here p < 0.
        let a = (ln_delta / p).exp().max(2.0);
        (delta, Transform::Power { a }, None)
    } else {
        (delta, Transform::Identity, Some((ln_delta / d).exp()))
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    params: &Params,
    region: Region,
    route: Route,
    man: &ModelManifold,
    origin: Profile,
    infinity: Profile,
    r0: f64,
    matched: Match,
    lambda: f64,
) -> SolutionSpec {
    let (delta, transform, k) = scaling(params, lambda.ln(), matched.tau);
    SolutionSpec {
        params: *params,
        region,
        route,
        manifold: *man.spec(),
        pieces: vec![
            Piece { kind: PieceKind::Origin, lo: 0.0, hi: Some(r0), scale: matched.tau, profile: origin },
            Piece { kind: PieceKind::Infinity, lo: r0, hi: None, scale: 1.0, profile: infinity },
        ],
        glue: Glue {
            r0,
            rho0: Some(matched.rho),
            tau: matched.tau,
            lambda_origin: Some(lambda),
            delta,
            c1: k,
            shift: 0.0,
            transform,
        },
        verification: None,
    }
}

/// Power-log manifold, tail-integral infinity piece, first origin family.
fn power_log_route(params: &Params, opts: &ConstructOptions, beta: f64, region: Region) -> Result<SolutionSpec> {
    let Params { m, p, q } = *params;
    let d = params.denom();
    let alpha = (m * p + q) / d;
    let beta_crit = (m - 1.0) / d;
    if beta <= beta_crit {
        return Err(Error::stage(
            "manifold",
            format!("log exponent {beta} must exceed (m-1)/(p+q-m+1) = {beta_crit}"),
        ));
    }
    let eta = eta_in(opts.eta, beta - beta_crit, "the tail-integral profile")?;
    let theta = opts.theta.unwrap_or_else(|| default_theta(params, opts.n));
    check_theta(params, opts.n, theta)?;
    let man = build_manifold(&ManifoldSpec::new(opts.n, Outer::PowerLog { alpha, beta, c0: None }))?;
    let infinity = Profile::PowerLogTail { m, eta, alpha, beta, ln_coef: power_log_coef(&man) };
    let inf = infinity.build(man.r2())?;
    let r0 = scan_r0(params, &man, &inf, 1.0)?;
    let matched = match_ratio(&inf, theta, 1.0, r0)?;
    let origin = origin_profile_1(params, opts.n, matched.rho, theta)?;
    Ok(assemble(params, region, Route::Direct, &man, origin.profile, infinity, r0, matched, origin.lambda_max))
}

pub fn recipe_g1(params: &Params, opts: &ConstructOptions) -> Result<SolutionSpec> {
    let beta = (params.m - 1.0) / params.denom() + opts.epsilon;
    power_log_route(params, opts, beta, Region::G1)
}

/// `u = v + 1` with `v` the tail-integral solution for `(m, 0, q)`.
pub fn recipe_g3(params: &Params, opts: &ConstructOptions) -> Result<SolutionSpec> {
    let Params { m, q, .. } = *params;
    let base = Params { m, p: 0.0, q };
    let beta = 1.0 / (q - m + 1.0) + opts.epsilon;
    let mut spec = power_log_route(&base, opts, beta, Region::G3)?;
    spec.params = *params;
    spec.route = Route::Shifted;
    spec.glue.shift = 1.0;
    Ok(spec)
}

/// Matches with the second origin family, doubling `R₀` until the ratios bracket.
fn stretched_match(params: &Params, man: &ModelManifold, inf: &Profile, theta: f64) -> Result<(f64, Match)> {
    let f = inf.build(man.r2())?;
    let mut r0 = scan_r0(params, man, &f, 1.0)?;
    let mut last = None;
    for _ in 0..=MAX_R0_DOUBLINGS {
        match match_ratio(&f, theta, 2.0, r0) {
            Ok(mt) => return Ok((r0, mt)),
            Err(e) => last = Some(e),
        }
        r0 *= 2.0;
    }
    Err(last.unwrap_or_else(|| Error::stage("glue", "no bracket")))
}

pub fn recipe_g2(params: &Params, opts: &ConstructOptions) -> Result<SolutionSpec> {
    let Params { m, .. } = *params;
    let beta = m - 1.0 + opts.epsilon;
    let eta = eta_in(opts.eta, beta - (m - 1.0), "the log-power profile")?;
    let theta = opts.theta.unwrap_or(1.0);
    let man = build_manifold(&ManifoldSpec::new(opts.n, Outer::PowerLog { alpha: m, beta, c0: None }))?;
    let infinity = Profile::LogPower { exponent: -eta / (m - 1.0) };
    let (r0, matched) = stretched_match(params, &man, &infinity, theta)?;
    let origin = origin_profile_2(params, matched.rho, theta)?;
    Ok(assemble(params, Region::G2, Route::Direct, &man, origin.profile, infinity, r0, matched, origin.lambda_max))
}

pub fn recipe_g4(params: &Params, opts: &ConstructOptions) -> Result<SolutionSpec> {
    let p = params.p;
    let lambda = opts.lambda.unwrap_or(1.0);
    if !(lambda > 0.0) {
        return Err(Error::Params(format!("lambda must be positive, got {lambda}")));
    }
    let eta = opts.eta.unwrap_or(0.5);
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Params(format!("eta={eta} outside (0, 1)")));
    }
    let theta = opts.theta.unwrap_or(1.0);
    let man = build_manifold(&ManifoldSpec::new(opts.n, Outer::PureExp { lambda }))?;
    let infinity = Profile::ConstPlusPower { c: lambda.powf(1.0 / p), eta };
    let (r0, matched) = stretched_match(params, &man, &infinity, theta)?;
    let origin = origin_profile_2(params, matched.rho, theta)?;
    Ok(assemble(params, Region::G4, Route::Direct, &man, origin.profile, infinity, r0, matched, origin.lambda_max))
}

pub fn recipe_g5(params: &Params, opts: &ConstructOptions) -> Result<SolutionSpec> {
    let Params { m, p, .. } = *params;
    let (iota, eta, r0, origin) = if p > 0.0 {
        let h = h_of_p(m, p)?;
        let iota = opts.iota.unwrap_or(h.h);
        if iota < h.h * (1.0 - 1e-12) {
            return Err(Error::Threshold(format!("iota={iota} is below H(p)={}", h.h)));
        }
        let eta = h.eta_opt;
        let k = (p + 1.0) * (m - 1.0).powf(1.0 / p);
        let r_max = (p + 1.0).powf(p / (p + 1.0)) * (m - 1.0).powf(1.0 / (p + 1.0)) / p;
        let f = |r: f64| (p * r / (m - 1.0)).powf(1.0 / p) - eta + eta * (p * r).powf(1.0 + 1.0 / p) / k;
        let r0 = bisect(f, 0.0, r_max * (1.0 - 1e-12), 1e-15)
            .map_err(|e| Error::stage("glue", format!("C1 system for R0 has no root below {r_max}: {e}")))?;
        let c0 = eta * (-eta * r0).exp() / (p * r0 / (m - 1.0)).powf(1.0 / p);
        (iota, eta, r0, Profile::G5Origin { c0, p, m })
    } else {
        let iota = opts.iota.unwrap_or(2.0);
        if !(iota > 1.0) {
            return Err(Error::Threshold(format!("p = 0 needs iota > 1, got {iota}")));
        }
        let eta = eta_in(opts.eta, (iota - 1.0) / (m - 1.0) * (1.0 + 1e-15), "the exponential profile")?;
        let alpha = opts.alpha_origin.unwrap_or(2.0);
        if !(alpha > 1.0) {
            return Err(Error::Params(format!("origin exponent must exceed 1, got {alpha}")));
        }
        let r_max = (m - 1.0) * (alpha - 1.0);
        let f = |r: f64| alpha * r.powf(alpha - 1.0) - eta * (-eta * r).exp();
        let r0 = bisect(f, 0.0, r_max, 1e-15)
            .map_err(|e| Error::stage("glue", format!("C1 system for R0 has no root below {r_max}: {e}")))?;
        let c0 = (-eta * r0).exp() + r0.powf(alpha);
        (iota, eta, r0, Profile::PowerCap { c0, alpha })
    };
    let man = build_manifold(&ManifoldSpec::new(opts.n, Outer::ScaledExp { iota }).with_joins(r0 / 8.0, r0 / 2.0))?;
    if man.r2() > r0 {
        return Err(Error::stage("manifold", format!("outer region starts at {} beyond R0={r0}", man.r2())));
    }
    Ok(SolutionSpec {
        params: *params,
        region: Region::G5,
        route: Route::Direct,
        manifold: *man.spec(),
        pieces: vec![
            Piece { kind: PieceKind::Origin, lo: 0.0, hi: Some(r0), scale: 1.0, profile: origin },
            Piece { kind: PieceKind::Infinity, lo: r0, hi: None, scale: 1.0, profile: Profile::Exponential { eta } },
        ],
        glue: Glue {
            r0,
            rho0: None,
            tau: 1.0,
            lambda_origin: None,
            delta: 1.0,
            c1: Some(1.0),
            shift: 0.0,
            transform: Transform::Identity,
        },
        verification: None,
    })
}

pub fn recipe_g6(params: &Params, opts: &ConstructOptions) -> Result<SolutionSpec> {
    let Params { m, p, q } = *params;
    let lambda = opts.lambda.unwrap_or(1.0);
    if !(lambda > 0.0) {
        return Err(Error::Params(format!("lambda must be positive, got {lambda}")));
    }
    let gamma_min = 2.0 * (m - 1.0 - q) + 1.0;
    let gamma = opts.gamma.unwrap_or(gamma_min + 0.5);
    if gamma <= gamma_min {
        return Err(Error::Threshold(format!("gamma={gamma} must exceed 2(m-1-q)+1={gamma_min}")));
    }
    let theta = opts.theta.unwrap_or_else(|| default_theta(params, opts.n));
    check_theta(params, opts.n, theta)?;
    // A short blend keeps the connector monotone when γ is large.
    let outer = Outer::ExpPowerLog { lambda, gamma };
    let joins = [(1.0, 2.0), (2.0, 2.0 * (1.0 + 2.0 / gamma)), (4.0, 4.0 * (1.0 + 2.0 / gamma))];
    let mut built = Err(Error::Manifold("no join candidates".into()));
    for (r1, r2) in joins {
        built = build_manifold(&ManifoldSpec::new(opts.n, outer).with_joins(r1, r2));
        if built.is_ok() {
            break;
        }
    }
    let man = built?;
    let infinity = Profile::ExpLogOverR;
    let inf = infinity.build(0.0)?;
    let r0 = scan_r0(params, &man, &inf, 1.0)?;
    let matched = match_ratio(&inf, theta, 1.0, r0)?;
    let origin = origin_profile_1(params, opts.n, matched.rho, theta)?;
    // u^p is largest where u is smallest, at R₀.
    let lam = origin.lambda_max * origin.function.value(r0).powf(-p).min(1.0);
    Ok(assemble(params, Region::G6, Route::Direct, &man, origin.profile, infinity, r0, matched, lam))
}

/// `q = m`: an explicit m-superharmonic `v` pushed through the change of variables.
pub fn recipe_q_equals_m(params: &Params, opts: &ConstructOptions) -> Result<SolutionSpec> {
    let Params { m, p, .. } = *params;
    let beta = m - 1.0 + opts.epsilon;
    let eta = eta_in(opts.eta, beta - (m - 1.0), "the superharmonic tail")?;
    let theta = opts.theta.unwrap_or(1.0);
    let man = build_manifold(&ManifoldSpec::new(opts.n, Outer::PowerLog { alpha: m, beta, c0: None }))?;
    let infinity = Profile::PowerLogTail { m, eta, alpha: m, beta, ln_coef: power_log_coef(&man) };
    let inf = infinity.build(man.r2())?;
    let harmonic = Params { m, p: 0.0, q: 0.0 };
    let r0 = scan_r0(&harmonic, &man, &inf, 0.0)?;
    let matched = match_ratio(&inf, theta, 1.0, r0)?;
    let origin = Profile::OriginExpIntegral { rho: matched.rho, theta, stretch: 1.0 };
    let mut spec = assemble(params, Region::G2, Route::ChangeOfVariables, &man, origin, infinity, r0, matched, 1.0);
    spec.glue.lambda_origin = None;
    spec.glue.delta = 1.0;
    spec.glue.c1 = Some(1.0);
    spec.glue.transform = Transform::InverseChange { p, m };
    Ok(spec)
}

pub fn recipe(params: &Params, opts: &ConstructOptions) -> Result<SolutionSpec> {
    params.validate()?;
    match classify(params) {
        Region::G1 => recipe_g1(params, opts),
        Region::G2 if params.q == params.m => recipe_q_equals_m(params, opts),
        Region::G2 => recipe_g2(params, opts),
        Region::G3 => recipe_g3(params, opts),
        Region::G4 => recipe_g4(params, opts),
        Region::G5 => recipe_g5(params, opts),
        Region::G6 => recipe_g6(params, opts),
    }
}

/// Growth of the manifold `construct` builds for these options.
pub fn existence_bound(params: &Params, opts: &ConstructOptions) -> Result<VolumeBound> {
    params.validate()?;
    let Params { m, p, q } = *params;
    let eps = opts.epsilon;
    Ok(match classify(params) {
        Region::G1 => {
            let d = params.denom();
            VolumeBound::PolyLog { alpha: (m * p + q) / d, beta: (m - 1.0) / d + eps }
        }
        Region::G2 => VolumeBound::PolyLog { alpha: m, beta: m - 1.0 + eps },
        Region::G3 => {
            let d = q - m + 1.0;
            VolumeBound::PolyLog { alpha: q / d, beta: 1.0 / d + eps }
        }
        Region::G4 => VolumeBound::Exp { rate: opts.lambda.unwrap_or(1.0) },
        Region::G5 => {
            let iota = match opts.iota {
                Some(i) => i,
                None if p > 0.0 => h_of_p(m, p)?.h,
                None => 2.0,
            };
            VolumeBound::Exp { rate: iota }
        }
        Region::G6 => VolumeBound::ExpPowerLog {
            rate: opts.lambda.unwrap_or(1.0),
            gamma: opts.gamma.unwrap_or(2.0 * (m - 1.0 - q) + 1.5),
        },
    })
}

/// Growth under which no positive solution exists; `kappa` is needed for G5 and G6.
/// `None` for G4 (every polynomial rate works) or a missing `kappa`.
pub fn nonexistence_bound(params: &Params, kappa: Option<f64>) -> Option<VolumeBound> {
    let g = critical_growth(params);
    match classify(params) {
        Region::G1 | Region::G2 | Region::G3 => Some(VolumeBound::PolyLog { alpha: g.alpha?, beta: g.beta? }),
        Region::G4 => None,
        Region::G5 => kappa.map(|rate| VolumeBound::Exp { rate }),
        Region::G6 => kappa.map(|rate| VolumeBound::ExpPowerLog { rate, gamma: 1.0 }),
    }
}
