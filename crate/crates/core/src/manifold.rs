//! Rotationally symmetric model manifolds `(ℝⁿ, dr² + ψ(r)² dθ²)`.
//!
//! Everything is carried in log space: `ln S` is evaluated directly and the
//! volume is cached as `ln V` on a log-spaced grid, so exponential and
//! super-exponential profiles stay representable far past `f64` overflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};

const GRID_PER_DECADE: f64 = 32.0;
const MONOTONE_SAMPLES: usize = 1000;
const MAX_R2_DOUBLINGS: usize = 8;
const MAX_C0_EXPONENT: i32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSpec {
    pub r1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendSpec {
    pub r2: f64,
}

/// Outer piece of the warp, given through `S(r)` for `r ≥ r₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Outer {
    /// `S = ω_n c₀^{n-1} r^{α-1} (ln r)^β`; `c0 = None` asks for auto-selection.
    PowerLog { alpha: f64, beta: f64, c0: Option<f64> },
    /// `S = e^{λr}`
    PureExp { lambda: f64 },
    /// `S = ι e^{ιr}`
    ScaledExp { iota: f64 },
    /// `S = e^{λ r^γ ln r}`
    ExpPowerLog { lambda: f64, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub n: u32,
    pub inner: InnerSpec,
    pub outer: Outer,
    pub blend: BlendSpec,
}

impl ManifoldSpec {
    pub fn new(n: u32, outer: Outer) -> Self {
        ManifoldSpec { n, inner: InnerSpec { r1: 1.0 }, outer, blend: BlendSpec { r2: 4.0 } }
    }

    pub fn power_log(alpha: f64, beta: f64) -> Self {
        Self::new(2, Outer::PowerLog { alpha, beta, c0: None })
    }

    pub fn with_joins(mut self, r1: f64, r2: f64) -> Self {
        self.inner.r1 = r1;
        self.blend.r2 = r2;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `ln ω_n` with `ω_n = 2π^{n/2}/Γ(n/2)` the area of the unit sphere.
pub fn ln_omega(n: u32) -> f64 {
    use std::f64::consts::PI;
    // Γ at half-integers by recurrence from Γ(1) = 1 or Γ(1/2) = √π.
    let (mut x, mut ln_gamma) = if n.is_multiple_of(2) { (1.0, 0.0) } else { (0.5, 0.5 * PI.ln()) };
    let target = n as f64 / 2.0;
    while x < target - 0.25 {
        ln_gamma += f64::ln(x);
        x += 1.0;
    }
    std::f64::consts::LN_2 + target * PI.ln() - ln_gamma
}

pub fn omega(n: u32) -> f64 {
    ln_omega(n).exp()
}

/// `ln(e^a + e^b)` without overflow.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Cubic Hermite data for `y = ln ψ` on `[r₁, r₂]`.
#[derive(Debug, Clone, Copy)]
struct Blend {
    r1: f64,
    r2: f64,
    y0: f64,
    d0: f64,
    y1: f64,
    d1: f64,
}

impl Blend {
    fn eval(&self, r: f64) -> (f64, f64) {
        let h = self.r2 - self.r1;
        let t = (r - self.r1) / h;
        let (t2, t3) = (t * t, t * t * t);
        let y = (2.0 * t3 - 3.0 * t2 + 1.0) * self.y0
            + (t3 - 2.0 * t2 + t) * h * self.d0
            + (-2.0 * t3 + 3.0 * t2) * self.y1
            + (t3 - t2) * h * self.d1;
        let dy = ((6.0 * t2 - 6.0 * t) * self.y0
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.d0
            + (-6.0 * t2 + 6.0 * t) * self.y1
            + (3.0 * t2 - 2.0 * t) * h * self.d1)
            / h;
        (y, dy)
    }

    fn monotone(&self) -> bool {
        let h = self.r2 - self.r1;
        let sampled = (0..=MONOTONE_SAMPLES).all(|k| {
            let r = self.r1 + h * k as f64 / MONOTONE_SAMPLES as f64;
            self.eval(r).1 >= 0.0
        });
        // dy/dr is quadratic in t; also test its vertex.
        let a = 6.0 * self.y0 + 3.0 * h * self.d0 - 6.0 * self.y1 + 3.0 * h * self.d1;
        let b = -6.0 * self.y0 - 4.0 * h * self.d0 + 6.0 * self.y1 - 2.0 * h * self.d1;
        let vertex_ok = if a > 0.0 {
            let t = -b / (2.0 * a);
            !(0.0..=1.0).contains(&t) || self.eval(self.r1 + t * h).1 >= 0.0
        } else {
            true
        };
        sampled && vertex_ok
    }
}

#[derive(Debug, Clone)]
pub struct ModelManifold {
    spec: ManifoldSpec,
    ln_omega: f64,
    outer_offset: f64,
    blend: Blend,
    grid_r: Vec<f64>,
    grid_ln_v: Vec<f64>,
}

fn outer_ln_s(outer: &Outer, offset: f64, r: f64) -> f64 {
    match *outer {
        Outer::PowerLog { alpha, beta, .. } => {
            let lnr = r.ln();
            let loglog = if beta == 0.0 { 0.0 } else { beta * lnr.ln() };
            offset + (alpha - 1.0) * lnr + loglog
        }
        Outer::PureExp { lambda } => lambda * r,
        Outer::ScaledExp { iota } => iota.ln() + iota * r,
        Outer::ExpPowerLog { lambda, gamma } => lambda * r.powf(gamma) * r.ln(),
    }
}

fn outer_ln_s_deriv(outer: &Outer, r: f64) -> f64 {
    match *outer {
        Outer::PowerLog { alpha, beta, .. } => (alpha - 1.0) / r + beta / (r * r.ln()),
        Outer::PureExp { lambda } => lambda,
        Outer::ScaledExp { iota } => iota,
        Outer::ExpPowerLog { lambda, gamma } => lambda * r.powf(gamma - 1.0) * (gamma * r.ln() + 1.0),
    }
}

/// `ln S(b - s) - ln S(b)` on the outer piece without cancellation.
fn outer_ln_s_drop(outer: &Outer, b: f64, s: f64) -> f64 {
    let rel = (-s / b).ln_1p();
    match *outer {
        Outer::PowerLog { alpha, beta, .. } => {
            let loglog = if beta == 0.0 { 0.0 } else { beta * (rel / b.ln()).ln_1p() };
            (alpha - 1.0) * rel + loglog
        }
        Outer::PureExp { lambda } => -lambda * s,
        Outer::ScaledExp { iota } => -iota * s,
        Outer::ExpPowerLog { lambda, gamma } => {
            let bg = b.powf(gamma);
            lambda * (bg * (gamma * rel).exp_m1() * (b - s).ln() + bg * rel)
        }
    }
}

fn validate(spec: &ManifoldSpec) -> Result<()> {
    if spec.n < 2 {
        return Err(Error::Manifold(format!("dimension must be at least 2, got {}", spec.n)));
    }
    let (r1, r2) = (spec.inner.r1, spec.blend.r2);
    if !(r1 > 0.0 && r2 > r1 && r2.is_finite()) {
        return Err(Error::Manifold(format!("need 0 < r1 < r2, got r1={r1}, r2={r2}")));
    }
    match spec.outer {
        Outer::PowerLog { alpha, beta, c0 } => {
            if !(alpha > 0.0 && beta.is_finite()) {
                return Err(Error::Manifold(format!("power_log needs alpha > 0, got {alpha}")));
            }
            if r2 < 2.0 {
                return Err(Error::Manifold(format!("power_log needs r2 >= 2, got {r2}")));
            }
            if let Some(c) = c0 {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::Manifold(format!("c0 must be positive, got {c}")));
                }
            }
        }
        Outer::PureExp { lambda } if !(lambda > 0.0) => {
            return Err(Error::Manifold(format!("pure_exp needs lambda > 0, got {lambda}")));
        }
        Outer::ScaledExp { iota } if !(iota > 0.0) => {
            return Err(Error::Manifold(format!("scaled_exp needs iota > 0, got {iota}")));
        }
        Outer::ExpPowerLog { lambda, gamma } => {
            if !(lambda > 0.0 && gamma > 1.0) {
                return Err(Error::Manifold(format!(
                    "exp_power_log needs lambda > 0 and gamma > 1, got {lambda}, {gamma}"
                )));
            }
            if r2 <= 1.0 {
                return Err(Error::Manifold(format!("exp_power_log needs r2 > 1, got {r2}")));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Tries to connect the inner and outer pieces for fixed `r₂` and `c₀`.
fn try_blend(spec: &ManifoldSpec, ln_omega: f64, c0: f64) -> Option<(Blend, f64)> {
    let nm1 = (spec.n - 1) as f64;
    let (r1, r2) = (spec.inner.r1, spec.blend.r2);
    let offset = ln_omega + nm1 * c0.ln();
    let ln_s2 = outer_ln_s(&spec.outer, offset, r2);
    let blend = Blend {
        r1,
        r2,
        y0: r1.ln(),
        d0: 1.0 / r1,
        y1: (ln_s2 - ln_omega) / nm1,
        d1: outer_ln_s_deriv(&spec.outer, r2) / nm1,
    };
    let dominates = blend.y1.exp() >= r1;
    (dominates && blend.monotone()).then_some((blend, offset))
}

fn resolve(spec: &ManifoldSpec, ln_omega: f64) -> Result<(ManifoldSpec, Blend, f64)> {
    let mut current = *spec;
    for _ in 0..=MAX_R2_DOUBLINGS {
        match current.outer {
            Outer::PowerLog { alpha, beta, c0: None } => {
                for k in 0..=MAX_C0_EXPONENT {
                    let c0 = 2f64.powi(k);
                    if let Some((blend, off)) = try_blend(&current, ln_omega, c0) {
                        let resolved = ManifoldSpec { outer: Outer::PowerLog { alpha, beta, c0: Some(c0) }, ..current };
                        return Ok((resolved, blend, off));
                    }
                }
            }
            Outer::PowerLog { c0: Some(c0), .. } => {
                if let Some((blend, off)) = try_blend(&current, ln_omega, c0) {
                    return Ok((current, blend, off));
                }
            }
            _ => {
                if let Some((blend, off)) = try_blend(&current, ln_omega, 1.0) {
                    return Ok((current, blend, off));
                }
            }
        }
        current.blend.r2 *= 2.0;
    }
    Err(Error::Manifold(format!(
        "no increasing C1 connector between r1={} and r2 up to {}",
        spec.inner.r1, current.blend.r2 / 2.0
    )))
}

pub fn build_manifold(spec: &ManifoldSpec) -> Result<ModelManifold> {
    validate(spec)?;
    let lw = ln_omega(spec.n);
    let (resolved, blend, outer_offset) = resolve(spec, lw)?;
    let mut man = ModelManifold {
        spec: resolved,
        ln_omega: lw,
        outer_offset,
        blend,
        grid_r: Vec::new(),
        grid_ln_v: Vec::new(),
    };
    man.build_volume_grid()?;
    Ok(man)
}

impl ModelManifold {
    /// The spec with `c₀` and `r₂` as actually used; rebuilding from it is exact.
    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn n(&self) -> u32 {
        self.spec.n
    }

    pub fn r1(&self) -> f64 {
        self.spec.inner.r1
    }

    pub fn r2(&self) -> f64 {
        self.spec.blend.r2
    }

    pub fn joins(&self) -> [f64; 2] {
        [self.r1(), self.r2()]
    }

    pub fn outer(&self) -> &Outer {
        &self.spec.outer
    }

    pub fn c0(&self) -> f64 {
        match self.spec.outer {
            Outer::PowerLog { c0, .. } => c0.unwrap_or(1.0),
            _ => 1.0,
        }
    }

    pub fn ln_s(&self, r: f64) -> f64 {
        let nm1 = (self.spec.n - 1) as f64;
        if r <= self.r1() {
            self.ln_omega + nm1 * r.ln()
        } else if r < self.r2() {
            self.ln_omega + nm1 * self.blend.eval(r).0
        } else {
            outer_ln_s(&self.spec.outer, self.outer_offset, r)
        }
    }

    pub fn ln_s_deriv(&self, r: f64) -> f64 {
        let nm1 = (self.spec.n - 1) as f64;
        if r <= self.r1() {
            nm1 / r
        } else if r < self.r2() {
            nm1 * self.blend.eval(r).1
        } else {
            outer_ln_s_deriv(&self.spec.outer, r)
        }
    }

    pub fn s(&self, r: f64) -> f64 {
        self.ln_s(r).exp()
    }

    pub fn psi(&self, r: f64) -> f64 {
        ((self.ln_s(r) - self.ln_omega) / (self.spec.n - 1) as f64).exp()
    }

    pub fn psi_deriv(&self, r: f64) -> f64 {
        self.psi(r) * self.ln_s_deriv(r) / (self.spec.n - 1) as f64
    }

    /// `ln ∫_a^b S`, integrated backward from `b` with the integrand scaled by `S(b)`.
    fn ln_segment(&self, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(f64::NEG_INFINITY);
        }
        let len = b - a;
        let ln_sb = self.ln_s(b);
        let slope = self.ln_s_deriv(b);
        let s0 = if slope > 0.0 { len.min(1.0 / slope) } else { len };
        let breaks: Vec<f64> = self.joins().iter().map(|j| b - j).filter(|&s| s > 0.0 && s < len).collect();
        let opts = QuadOptions::rel(1e-13).with_breaks(&breaks);
        let r2 = self.r2();
        let f = |s: f64| {
            let drop = if b - s >= r2 { outer_ln_s_drop(&self.spec.outer, b, s) } else { self.ln_s(b - s) - ln_sb };
            drop.exp()
        };
        let (mut lo, mut hi) = (0.0, s0);
        let mut total = 0.0;
        loop {
            let part = integrate(f, lo, hi, &opts)?.value;
            total += part;
            if hi >= len || (part <= 1e-18 * total && f(hi) <= 1e-18) {
                break;
            }
            lo = hi;
            hi = (2.0 * hi).min(len);
        }
        Ok(ln_sb + total.ln())
    }

    fn build_volume_grid(&mut self) -> Result<()> {
        let (r1, r2) = (self.r1(), self.r2());
        let r_max = (1e3 * r2).max(1e8);
        let decades = (r_max / r1).log10();
        let count = (decades * GRID_PER_DECADE).ceil() as usize;
        let mut rs: Vec<f64> =
            (0..=count).map(|k| r1 * (r_max / r1).powf(k as f64 / count as f64)).collect();
        rs.push(r2);
        rs.sort_by(f64::total_cmp);
        rs.dedup();
        let mut lnv = Vec::with_capacity(rs.len());
        lnv.push(self.ln_omega + self.spec.n as f64 * r1.ln() - (self.spec.n as f64).ln());
        for w in rs.windows(2) {
            let seg = self.ln_segment(w[0], w[1])?;
            let prev = *lnv.last().expect("seeded");
            let next = logaddexp(prev, seg);
            if !next.is_finite() {
                // Super-exponential profiles run out of range; the grid just stops.
                break;
            }
            lnv.push(next);
        }
        rs.truncate(lnv.len());
        self.grid_r = rs;
        self.grid_ln_v = lnv;
        Ok(())
    }

    pub fn ln_v(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let n = self.spec.n as f64;
        if r <= self.r1() {
            return Ok(self.ln_omega + n * r.ln() - n.ln());
        }
        let idx = self.grid_r.partition_point(|&g| g <= r) - 1;
        let g = self.grid_r[idx];
        if g == r {
            return Ok(self.grid_ln_v[idx]);
        }
        Ok(logaddexp(self.grid_ln_v[idx], self.ln_segment(g, r)?))
    }

    pub fn v(&self, r: f64) -> Result<f64> {
        self.ln_v(r).map(f64::exp)
    }

    /// Default window for `certify_growth`.
    pub fn default_window(&self) -> (f64, f64) {
        match self.spec.outer {
            Outer::PowerLog { .. } => (1e4, 1e8),
            _ => {
                let lo = (10.0 * self.r2()).max(10.0);
                (lo, 100.0 * lo)
            }
        }
    }
}

/// A volume bound `B(r)` in the forms the thresholds take.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VolumeBound {
    /// `r^α (ln r)^β`
    PolyLog { alpha: f64, beta: f64 },
    /// `e^{rate·r}`
    Exp { rate: f64 },
    /// `e^{rate·r^γ ln r}`
    ExpPowerLog { rate: f64, gamma: f64 },
}

impl VolumeBound {
    pub fn ln_eval(&self, r: f64) -> f64 {
        match *self {
            VolumeBound::PolyLog { alpha, beta } => alpha * r.ln() + beta * r.ln().ln(),
            VolumeBound::Exp { rate } => rate * r,
            VolumeBound::ExpPowerLog { rate, gamma } => rate * r.powf(gamma) * r.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    pub bound: VolumeBound,
    pub window: (f64, f64),
    pub ln_sup_ratio: f64,
    pub sup_ratio: f64,
    pub fitted_constant: f64,
    pub tail_slope: f64,
    pub pass: bool,
}

pub const GROWTH_SLOPE_TOL: f64 = 0.02;
const GROWTH_POINTS: usize = 512;

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn largest_finite_r(man: &ModelManifold, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        match man.ln_v(mid.exp()) {
            Ok(v) if v.is_finite() => a = mid,
            _ => b = mid,
        }
    }
    a.exp()
}

pub fn certify_growth(man: &ModelManifold, bound: VolumeBound, window: (f64, f64)) -> Result<GrowthCertificate> {
    let (lo, hi) = window;
    if !(lo > man.r2() && hi / lo >= 100.0 - 1e-9) {
        return Err(Error::Params(format!(
            "window must sit beyond r2={} and span two decades, got [{lo}, {hi}]",
            man.r2()
        )));
    }
    match man.ln_v(hi) {
        Ok(v) if v.is_finite() && bound.ln_eval(hi).is_finite() => {}
        _ => return Err(Error::Overflow { max_r: largest_finite_r(man, lo, hi) }),
    }
    let mut xs = Vec::with_capacity(GROWTH_POINTS);
    let mut ys = Vec::with_capacity(GROWTH_POINTS);
    for k in 0..GROWTH_POINTS {
        let r = lo * (hi / lo).powf(k as f64 / (GROWTH_POINTS - 1) as f64);
        xs.push(r.ln());
        ys.push(man.ln_v(r)? - bound.ln_eval(r));
    }
    let ln_sup = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = GROWTH_POINTS * 3 / 4;
    let slope = lsq_slope(&xs[tail..], &ys[tail..]);
    let fitted = (ys[tail..].iter().sum::<f64>() / (GROWTH_POINTS - tail) as f64).exp();
    let pass = ln_sup.is_finite() && slope <= GROWTH_SLOPE_TOL;
    Ok(GrowthCertificate {
        bound,
        window,
        ln_sup_ratio: ln_sup,
        sup_ratio: ln_sup.exp(),
        fitted_constant: fitted,
        tail_slope: slope,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub verdict: Verdict,
    pub power_slope: f64,
    pub log_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureIntegrals {
    pub first: TailEstimate,
    pub second: TailEstimate,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCriteria {
    /// `∫ r/V dr`; divergence implies parabolicity.
    pub parabolic_cy: TailEstimate,
    /// `∫ (r/V)^{1/(m-1)} dr`; divergence makes `Δ_m`-superharmonic functions constant.
    pub m_parabolic: TailEstimate,
    /// `∫ r/ln V dr`; divergence implies stochastic completeness.
    pub stochastically_complete: TailEstimate,
    pub conjecture_integrals: Option<ConjectureIntegrals>,
}

const SLOPE_BAND: f64 = 0.05;
const TAIL_HI: f64 = 1e8;

fn log_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64)).collect()
}

/// Decides convergence of `∫^∞ f` from samples of `ln f` near infinity.
fn tail_verdict<F: Fn(f64) -> Result<f64>>(ln_f: F) -> TailEstimate {
    let inconclusive = TailEstimate { verdict: Verdict::Inconclusive, power_slope: f64::NAN, log_exponent: None };
    let sample = |lo: f64| -> Option<(Vec<f64>, Vec<f64>)> {
        let rs = log_points(lo, TAIL_HI, 64);
        let ys: Option<Vec<f64>> = rs.iter().map(|&r| ln_f(r).ok().filter(|v| v.is_finite())).collect();
        Some((rs, ys?))
    };
    let Some((rs, ys)) = sample(TAIL_HI / 1e2) else { return inconclusive };
    let xs: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let slope = lsq_slope(&xs, &ys);
    if slope < -1.0 - SLOPE_BAND {
        return TailEstimate { verdict: Verdict::Convergent, power_slope: slope, log_exponent: None };
    }
    if slope > -1.0 + SLOPE_BAND {
        return TailEstimate { verdict: Verdict::Divergent, power_slope: slope, log_exponent: None };
    }
    // Near r^{-1}: fit r·f against ln ln r over one more decade.
    let Some((rs, ys)) = sample(TAIL_HI / 1e3) else { return inconclusive };
    let lx: Vec<f64> = rs.iter().map(|r| r.ln().ln()).collect();
    let ly: Vec<f64> = rs.iter().zip(&ys).map(|(r, y)| y + r.ln()).collect();
    let k = lsq_slope(&lx, &ly);
    let verdict = if k < -1.0 - SLOPE_BAND {
        Verdict::Convergent
    } else if k > -1.0 + SLOPE_BAND {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    TailEstimate { verdict, power_slope: slope, log_exponent: Some(k) }
}

/// `ln ∫_r^∞ t/V(t) dt`, quadrature to `TAIL_HI` plus a fitted power-law tail.
fn ln_inner_tail(man: &ModelManifold, r: f64) -> Result<f64> {
    let f = |t: f64| -> f64 { (t.ln() - man.ln_v(t).unwrap_or(f64::NAN)).exp() };
    let lo = r.ln();
    let hi = TAIL_HI.ln();
    let body = integrate(|x: f64| f(x.exp()) * x.exp(), lo, hi, &QuadOptions::rel(1e-9))?.value;
    // Tail beyond TAIL_HI from the local exponent of t/V.
    let t1 = TAIL_HI / 10.0;
    let k = (f(TAIL_HI).ln() - f(t1).ln()) / (TAIL_HI.ln() - t1.ln());
    if k >= -1.0 {
        return Ok(f64::INFINITY);
    }
    let tail = f(TAIL_HI) * TAIL_HI / (-1.0 - k);
    Ok((body + tail).ln())
}

pub fn classical_criteria(man: &ModelManifold, m: f64, p_exp: Option<f64>) -> ClassicalCriteria {
    let ln_v = |r: f64| man.ln_v(r);
    let parabolic_cy = tail_verdict(|r| Ok(r.ln() - ln_v(r)?));
    let m_parabolic = tail_verdict(|r| Ok((r.ln() - ln_v(r)?) / (m - 1.0)));
    let stochastically_complete = tail_verdict(|r| Ok(r.ln() - ln_v(r)?.ln()));
    let conjecture_integrals = p_exp.filter(|&p| p > 1.0).map(|p| {
        let first = tail_verdict(|r| Ok((2.0 * p - 1.0) * r.ln() - (p - 1.0) * ln_v(r)?));
        let inner_diverges = matches!(ln_inner_tail(man, 1e3), Ok(v) if v == f64::INFINITY);
        let second = if inner_diverges {
            TailEstimate { verdict: Verdict::Divergent, power_slope: f64::INFINITY, log_exponent: None }
        } else {
            tail_verdict(|r| Ok((p - 1.0) * ln_inner_tail(man, r)? + r.ln()))
        };
        let agree = first.verdict == second.verdict;
        ConjectureIntegrals { first, second, agree }
    });
    ClassicalCriteria { parabolic_cy, m_parabolic, stochastically_complete, conjecture_integrals }
}
