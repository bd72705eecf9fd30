//! Radial residuals, weak forms and cutoff families.
//!
//! The radial form of `Δ_m u + u^p|∇u|^q ≤ 0` on a model manifold is
//! `(S|u′|^{m-2}u′)′ + S u^p |u′|^q ≤ 0`. Both terms are evaluated relative to
//! `e^κ` with `κ = ln S + (m-1) ln|u′|` at the evaluation point, which keeps
//! exponential profiles on exponential manifolds finite.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::ModelManifold;
use crate::params::Params;
use crate::quad::{integrate, QuadOptions};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const WEAK_TOL: f64 = 1e-8;
pub const TOL_ENV: &str = "LIOUVILLE_TOL";

/// Verification slack, overridable through `LIOUVILLE_TOL`.
pub fn default_tol() -> f64 {
    std::env::var(TOL_ENV).ok().and_then(|s| s.parse().ok()).filter(|t: &f64| *t > 0.0).unwrap_or(DEFAULT_TOL)
}

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial profile: value, derivative and, optionally, exact logarithms.
#[derive(Clone)]
pub struct RadialFunction {
    value: Func,
    deriv: Func,
    ln_value: Option<Func>,
    ln_abs_deriv: Option<Func>,
    pub domain: (f64, f64),
    /// Points where the second derivative may jump.
    pub breaks: Vec<f64>,
}

impl fmt::Debug for RadialFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialFunction").field("domain", &self.domain).field("breaks", &self.breaks).finish()
    }
}

impl RadialFunction {
    pub fn new<V, D>(value: V, deriv: D, domain: (f64, f64)) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        RadialFunction { value: Arc::new(value), deriv: Arc::new(deriv), ln_value: None, ln_abs_deriv: None, domain, breaks: Vec::new() }
    }

    /// Supplies `ln u` and `ln|u′|` directly, for profiles that under- or overflow.
    pub fn with_logs<A, B>(mut self, ln_value: A, ln_abs_deriv: B) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.ln_value = Some(Arc::new(ln_value));
        self.ln_abs_deriv = Some(Arc::new(ln_abs_deriv));
        self
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn value(&self, r: f64) -> f64 {
        (self.value)(r)
    }

    pub fn deriv(&self, r: f64) -> f64 {
        (self.deriv)(r)
    }

    pub fn ln_value(&self, r: f64) -> f64 {
        match &self.ln_value {
            Some(f) => f(r),
            None => self.value(r).ln(),
        }
    }

    pub fn ln_abs_deriv(&self, r: f64) -> f64 {
        match &self.ln_abs_deriv {
            Some(f) => f(r),
            None => self.deriv(r).abs().ln(),
        }
    }

    pub fn in_domain(&self, r: f64) -> bool {
        r >= self.domain.0 && r <= self.domain.1
    }

    /// `c·u`, with logs shifted accordingly.
    pub fn scaled(&self, c: f64) -> RadialFunction {
        let (v, d) = (self.value.clone(), self.deriv.clone());
        let (lv, ld) = (self.clone(), self.clone());
        let lc = c.abs().ln();
        RadialFunction::new(move |r| c * v(r), move |r| c * d(r), self.domain)
            .with_logs(move |r| lc + lv.ln_value(r), move |r| lc + ld.ln_abs_deriv(r))
            .with_breaks(self.breaks.clone())
    }

    /// Largest relative mismatch between `deriv` and a central difference of `value`.
    pub fn derivative_check(&self, samples: &[f64]) -> f64 {
        samples
            .iter()
            .map(|&r| {
                let h = r.abs().max(1.0) * 3e-6;
                let fd = (self.value(r + h) - self.value(r - h)) / (2.0 * h);
                let d = self.deriv(r);
                (fd - d).abs() / d.abs().max(1e-300)
            })
            .fold(0.0, f64::max)
    }
}

/// The two terms of the radial operator, each divided by `e^{ln_scale}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualTerms {
    pub flux_deriv: f64,
    pub source: f64,
    pub ln_scale: f64,
}

impl ResidualTerms {
    pub fn total(&self) -> f64 {
        self.flux_deriv + self.source
    }

    pub fn residual(&self) -> f64 {
        self.total() * self.ln_scale.exp()
    }

    /// `total / (|flux′| + source)`; scale-free.
    pub fn relative(&self) -> f64 {
        let denom = self.flux_deriv.abs() + self.source.abs();
        if denom == 0.0 {
            0.0
        } else {
            self.total() / denom
        }
    }
}

const CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const FORWARD: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];

/// `p·ln u` with the `0^p` conventions.
fn ln_power(exponent: f64, ln_base: f64, what: &str, r: f64) -> Result<f64> {
    if ln_base == f64::NEG_INFINITY {
        return if exponent > 0.0 {
            Ok(f64::NEG_INFINITY)
        } else if exponent == 0.0 {
            Ok(0.0)
        } else if what == "u" {
            Err(Error::Domain(format!("u vanishes at r={r} with negative p")))
        } else {
            Err(Error::Singular(format!("u' vanishes at r={r} with negative q")))
        };
    }
    Ok(exponent * ln_base)
}

/// Residual terms of `(S|u′|^{m-2}u′)′ + w·S u^p|u′|^q` at `r`.
pub fn residual_terms(params: &Params, man: &ModelManifold, u: &RadialFunction, r: f64, weight: f64) -> Result<ResidualTerms> {
    let Params { m, p, q } = *params;
    let val = u.value(r);
    if val < 0.0 || val.is_nan() {
        return Err(Error::Domain(format!("u({r}) = {val} is negative")));
    }
    let ln_s = man.ln_s(r);
    let lnl = |x: f64| man.ln_s(x) + (m - 1.0) * u.ln_abs_deriv(x);
    let l0 = lnl(r);
    let kappa = if l0.is_finite() { l0 } else { ln_s };

    let h = r.max(1.0) * 1e-5;
    let near_break = u.breaks.iter().chain(man.joins().iter()).copied().find(|&b| (b - r).abs() < 2.0 * h);
    let (offsets, weights, denom): ([f64; 5], [f64; 5], f64) = match near_break {
        Some(b) if b > r => ([0.0, -1.0, -2.0, -3.0, -4.0], FORWARD.map(|w| -w), 12.0 * h),
        Some(_) => ([0.0, 1.0, 2.0, 3.0, 4.0], FORWARD, 12.0 * h),
        None if r - 2.0 * h < u.domain.0 || r - 2.0 * h <= 0.0 => ([0.0, 1.0, 2.0, 3.0, 4.0], FORWARD, 12.0 * h),
        None => ([-2.0, -1.0, 0.0, 1.0, 2.0], CENTRAL, 12.0 * h),
    };
    let xs = offsets.map(|o| r + o * h);
    let ls = xs.map(lnl);
    let signs = xs.map(|x| u.deriv(x).signum());
    let same_sign = xs.iter().all(|&x| u.deriv(x) != 0.0) && signs.iter().all(|&s| s == signs[0]);
    let spread = ls.iter().map(|l| (l - ls[0]).abs()).fold(0.0, f64::max);
    let flux_deriv = if same_sign && spread > 1e-2 && ls.iter().all(|l| l.is_finite()) {
        // F = ±e^L, so F′/e^κ = ±L′ when κ = L(r).
        let dl: f64 = weights.iter().zip(&ls).map(|(w, l)| w * (l - ls[0])).sum::<f64>() / denom;
        signs[0] * dl * (l0 - kappa).exp()
    } else {
        weights
            .iter()
            .zip(ls.iter().zip(&signs))
            .map(|(w, (l, s))| if l.is_finite() { w * s * (l - kappa).exp() } else { 0.0 })
            .sum::<f64>()
            / denom
    };

    let ln_u = ln_power(p, u.ln_value(r), "u", r)?;
    let ln_du = ln_power(q, u.ln_abs_deriv(r), "u'", r)?;
    let source = weight * (ln_s + ln_u + ln_du - kappa).exp();
    Ok(ResidualTerms { flux_deriv, source, ln_scale: kappa })
}

pub fn residual(params: &Params, man: &ModelManifold, u: &RadialFunction, r: f64) -> Result<f64> {
    residual_terms(params, man, u, r, 1.0).map(|t| t.residual())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub window: (f64, f64),
    pub points: usize,
    pub checked: usize,
    pub excluded: usize,
    /// Most positive `total / (|flux′| + source)` over the grid.
    pub worst_residual: f64,
    pub worst_location: f64,
    pub slack: f64,
    pub pass: bool,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub points: usize,
    pub weight: f64,
    pub tol: f64,
    /// Closed intervals removed from the grid.
    pub exclude: Vec<(f64, f64)>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { points: 400, weight: 1.0, tol: default_tol(), exclude: Vec::new() }
    }
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points).map(|k| lo * (hi / lo).powf(k as f64 / (points - 1) as f64)).collect()
}

pub fn verify_inequality(params: &Params, man: &ModelManifold, u: &RadialFunction, window: (f64, f64), opts: &VerifyOptions) -> Result<VerificationReport> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Params(format!("bad window [{lo}, {hi}]")));
    }
    if !(u.in_domain(lo) && u.in_domain(hi)) {
        return Err(Error::Domain(format!("window [{lo}, {hi}] leaves the domain {:?}", u.domain)));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = lo;
    let (mut checked, mut excluded) = (0, 0);
    for r in log_grid(lo, hi, opts.points) {
        if opts.exclude.iter().any(|&(a, b)| r >= a && r <= b) {
            excluded += 1;
            continue;
        }
        let t = residual_terms(params, man, u, r, opts.weight)?;
        let rel = t.relative();
        checked += 1;
        if rel > worst || rel.is_nan() {
            worst = rel;
            worst_at = r;
        }
    }
    Ok(VerificationReport {
        window,
        points: opts.points,
        checked,
        excluded,
        worst_residual: worst,
        worst_location: worst_at,
        slack: opts.tol,
        pass: worst <= opts.tol,
        weight: opts.weight,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakFormReport {
    /// `∫ F ψ′` divided by `e^{ln_scale}`.
    pub flux_integral: f64,
    /// `w ∫ S u^p|u′|^q ψ` divided by `e^{ln_scale}`.
    pub source_integral: f64,
    pub ln_scale: f64,
    pub margin: f64,
    pub tol: f64,
    pub pass: bool,
}

/// `∫ S|u′|^{m-2}u′ψ′ − w∫ S u^p|u′|^q ψ` over `support`.
pub fn weak_form_check(
    params: &Params,
    man: &ModelManifold,
    u: &RadialFunction,
    psi: &RadialFunction,
    support: (f64, f64),
    weight: f64,
) -> Result<WeakFormReport> {
    let Params { m, p, q } = *params;
    let (a, b) = support;
    let ln_flux = |r: f64| man.ln_s(r) + (m - 1.0) * u.ln_abs_deriv(r);
    let ln_src = |r: f64| -> f64 {
        let lu = if p == 0.0 { 0.0 } else { p * u.ln_value(r) };
        let ld = if q == 0.0 { 0.0 } else { q * u.ln_abs_deriv(r) };
        man.ln_s(r) + lu + ld
    };
    let scale = log_grid(a.max(1e-300), b, 33)
        .into_iter()
        .flat_map(|r| [ln_flux(r), ln_src(r)])
        .filter(|x| x.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = if scale.is_finite() { scale } else { 0.0 };
    let mut breaks: Vec<f64> = u.breaks.iter().chain(man.joins().iter()).chain(psi.breaks.iter()).copied().collect();
    breaks.retain(|&x| x > a && x < b);
    let opts = QuadOptions::rel(1e-10).with_breaks(&breaks).with_clustering(8);
    let flux = integrate(
        |r| {
            let d = psi.deriv(r);
            if d == 0.0 {
                return 0.0;
            }
            u.deriv(r).signum() * (ln_flux(r) - scale).exp() * d
        },
        a,
        b,
        &opts,
    )?;
    let src = integrate(
        |r| {
            let w = psi.value(r);
            if w == 0.0 {
                return 0.0;
            }
            weight * (ln_src(r) - scale).exp() * w
        },
        a,
        b,
        &opts,
    )?;
    let margin = flux.value - src.value;
    let pass = margin >= -WEAK_TOL * (flux.value.abs() + src.value.abs());
    Ok(WeakFormReport { flux_integral: flux.value, source_integral: src.value, ln_scale: scale, margin, tol: WEAK_TOL, pass })
}

/// `(1 - x²)²` with `x = (r - c)/w`, supported on `[c - w, c + w]`.
pub fn bump(center: f64, half_width: f64) -> RadialFunction {
    let (c, w) = (center, half_width);
    RadialFunction::new(
        move |r| {
            let x = (r - c) / w;
            if x.abs() >= 1.0 {
                0.0
            } else {
                (1.0 - x * x).powi(2)
            }
        },
        move |r| {
            let x = (r - c) / w;
            if x.abs() >= 1.0 {
                0.0
            } else {
                -4.0 * x * (1.0 - x * x) / w
            }
        },
        (c - w, c + w),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakFormSuite {
    pub reports: Vec<(f64, f64, WeakFormReport)>,
    pub pass: bool,
}

/// Seeded bumps inside `[lo, hi]`; `straddling` of them are centred on `point`.
#[allow(clippy::too_many_arguments)]
pub fn weak_form_suite(
    params: &Params,
    man: &ModelManifold,
    u: &RadialFunction,
    window: (f64, f64),
    point: f64,
    count: usize,
    straddling: usize,
    seed: u64,
    weight: f64,
) -> Result<WeakFormSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = window;
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut reports = Vec::with_capacity(count);
    for k in 0..count {
        let (c, w) = if k < straddling {
            let reach = (point - lo).min(hi - point);
            let w = reach * rng.gen_range(0.05..0.9);
            (point + w * rng.gen_range(-0.5..0.5), w)
        } else {
            let c: f64 = rng.gen_range(llo..lhi);
            let c = c.exp();
            let reach = (c - lo).min(hi - c);
            (c, reach * rng.gen_range(0.05..0.95))
        };
        if !(w > 0.0) {
            continue;
        }
        let psi = bump(c, w);
        let rep = weak_form_check(params, man, u, &psi, (c - w, c + w), weight)?;
        reports.push((c, w, rep));
    }
    let pass = reports.iter().all(|(_, _, r)| r.pass);
    Ok(WeakFormSuite { reports, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffKind {
    /// `1 - (3s² - 2s³)` on `[1, 2]`.
    Smoothstep3,
    /// Flat to `1 + w`, then linear down to 0 at 2.
    Ramp { w: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub kind: CutoffKind,
    pub rho_h: f64,
}

pub fn cutoff_h(kind: CutoffKind) -> Result<CutoffFamily> {
    let rho_h = match kind {
        CutoffKind::Smoothstep3 => 1.5,
        CutoffKind::Ramp { w } => {
            if !(0.0..1.0).contains(&w) {
                return Err(Error::Params(format!("ramp width must lie in [0, 1), got {w}")));
            }
            1.0 / (1.0 - w)
        }
    };
    Ok(CutoffFamily { kind, rho_h })
}

impl CutoffFamily {
    pub fn h(&self, t: f64) -> f64 {
        if t <= 1.0 {
            return 1.0;
        }
        if t >= 2.0 {
            return 0.0;
        }
        match self.kind {
            CutoffKind::Smoothstep3 => {
                let s = t - 1.0;
                1.0 - (3.0 * s * s - 2.0 * s * s * s)
            }
            CutoffKind::Ramp { w } => {
                if t <= 1.0 + w {
                    1.0
                } else {
                    (2.0 - t) / (1.0 - w)
                }
            }
        }
    }

    pub fn h_deriv(&self, t: f64) -> f64 {
        if t <= 1.0 || t >= 2.0 {
            return 0.0;
        }
        match self.kind {
            CutoffKind::Smoothstep3 => {
                let s = t - 1.0;
                -6.0 * s * (1.0 - s)
            }
            CutoffKind::Ramp { w } => {
                if t <= 1.0 + w {
                    0.0
                } else {
                    -1.0 / (1.0 - w)
                }
            }
        }
    }

    /// `φ_i(r) = (1/i) Σ_{k=i+1}^{2i} h(r/2^k)`.
    pub fn phi(&self, i: u32) -> Result<RadialFunction> {
        if i < 1 {
            return Err(Error::Params("phi_i needs i >= 1".into()));
        }
        let (fa, fb) = (*self, *self);
        let ks = move || (i + 1..=2 * i).map(|k| 2f64.powi(k as i32));
        let inv = 1.0 / i as f64;
        let breaks = (i + 1..=2 * i + 1).map(|k| 2f64.powi(k as i32)).collect();
        Ok(RadialFunction::new(
            move |r| inv * ks().map(|s| fa.h(r / s)).sum::<f64>(),
            move |r| inv * ks().map(|s| fb.h_deriv(r / s) / s).sum::<f64>(),
            (0.0, f64::INFINITY),
        )
        .with_breaks(breaks))
    }
}

/// Largest relative deviation over the samples between the residual of
/// `u = e^v − 1` divided by `S`, and
/// `e^{v(m-1)}[Δ_m v + (m-1)|v′|^m + (e^v−1)^p e^{v(q-m+1)}|v′|^q]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub samples: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
    pub pass: bool,
}

pub const IDENTITY_TOL: f64 = 1e-8;

pub fn transform_exp_minus_one(params: &Params, man: &ModelManifold, v: &RadialFunction, samples: &[f64]) -> Result<IdentityReport> {
    let Params { m, p, q } = *params;
    let (vv, vd) = (v.clone(), v.clone());
    let u = RadialFunction::new(move |r| vv.value(r).exp_m1(), move |r| vd.value(r).exp() * vd.deriv(r), v.domain)
        .with_breaks(v.breaks.clone());
    // Δ_m v alone: the pure m-Laplacian with the source switched off.
    let harmonic = Params { m, p: 0.0, q: 0.0 };
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for &r in samples {
        let val = v.value(r);
        if !(val > 0.0) {
            skipped += 1;
            continue;
        }
        let lhs_terms = residual_terms(params, man, &u, r, 1.0)?;
        let lhs = lhs_terms.total() * (lhs_terms.ln_scale - man.ln_s(r)).exp();
        let lap = residual_terms(&harmonic, man, v, r, 0.0)?;
        let lap_v = lap.flux_deriv * (lap.ln_scale - man.ln_s(r)).exp();
        let dv = v.deriv(r).abs();
        let grad_m = (m - 1.0) * dv.powf(m);
        let src = val.exp_m1().powf(p) * (val * (q - m + 1.0)).exp() * dv.powf(q);
        let rhs = (val * (m - 1.0)).exp() * (lap_v + grad_m + src);
        let scale = (val * (m - 1.0)).exp() * (lap_v.abs() + grad_m + src.abs());
        worst = worst.max((lhs - rhs).abs() / scale.max(1e-300));
    }
    Ok(IdentityReport { samples: samples.len(), skipped, max_rel_error: worst, pass: worst <= IDENTITY_TOL })
}
