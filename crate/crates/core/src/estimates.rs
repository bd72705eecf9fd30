//! Finite-instance checks of the nonexistence estimates.
//!
//! Every `≲` of the Caccioppoli chain is replaced by its explicit constant,
//! and each step is reported as `lhs ≤ rhs` with the ratio between them.
//! All integrals are radial: `∫_M f dμ = ∫ f(r) S(r) dr`.

use serde::{Deserialize, Serialize};

use crate::constructors::PiecewiseSolution;
use crate::error::{Error, Result};
use crate::manifold::ModelManifold;
use crate::params::{classify, cond_ab, LemmaExponents, Params, Region};
use crate::quad::{integrate, QuadOptions};
use crate::radial::{verify_inequality, CutoffFamily, CutoffKind, RadialFunction, VerifyOptions, cutoff_h};

/// Slack allowed on every step of a chain.
pub const CHAIN_TOL: f64 = 1e-6;
const QUAD_TOL: f64 = 1e-11;

/// One inequality `lhs ≤ rhs` of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl StepRecord {
    pub fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs <= 0.0 { 0.0 } else { f64::INFINITY };
        StepRecord { step_name: name.to_string(), lhs, rhs, ratio, pass: lhs.is_finite() && ratio <= 1.0 + CHAIN_TOL }
    }
}

/// `∫_lo^hi e^{g(r)} dr`, with the grid seeded at `nodes`.
fn log_integral<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, nodes: &[f64]) -> Result<f64> {
    let opts = QuadOptions { max_intervals: 20000, ..QuadOptions::rel(QUAD_TOL).with_breaks(nodes) };
    let f = |r: f64| {
        let x = g(r);
        if x == f64::NEG_INFINITY { 0.0 } else { x.exp() }
    };
    let res = integrate(f, lo, hi, &opts)?;
    if !res.value.is_finite() {
        return Err(Error::Domain(format!("integral on [{lo:e}, {hi:e}] is not finite")));
    }
    Ok(res.value)
}

/// `k·ln x`, with `0·ln 0 = 0`.
fn pow_ln(k: f64, ln_x: f64) -> f64 {
    if k == 0.0 { 0.0 } else { k * ln_x }
}

/// Geometric nodes from `1e-6` to `hi` plus the given extras.
fn nodes(hi: f64, extra: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = (-20..).map(|k| 2f64.powi(k)).take_while(|&x| x < hi).collect();
    v.extend(extra.iter().copied().filter(|&x| x > 0.0 && x < hi));
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `u + ε`.
fn shifted(u: &RadialFunction, eps: f64) -> RadialFunction {
    if eps == 0.0 {
        return u.clone();
    }
    let (a, b, c) = (u.clone(), u.clone(), u.clone());
    RadialFunction::new(move |r| a.value(r) + eps, move |r| b.deriv(r), u.domain)
        .with_logs(move |r| (c.value(r) + eps).ln(), {
            let d = u.clone();
            move |r| d.ln_abs_deriv(r)
        })
        .with_breaks(u.breaks.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaOptions {
    pub cutoff: CutoffKind,
    /// Also rerun the chain with `u + ε` for these `ε`.
    pub shifts: [f64; 2],
}

impl Default for LemmaOptions {
    fn default() -> Self {
        LemmaOptions { cutoff: CutoffKind::Smoothstep3, shifts: [1e-3, 1e-6] }
    }
}

/// The integrals entering the chain for one test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaIntegrals {
    /// `∫ u^{p-a}|u′|^q φ^b`
    pub l: f64,
    /// `∫ u^{-a-1}|u′|^m φ^b`
    pub e: f64,
    /// `b∫ u^{-a}φ^{b-1}|u′|^{m-1}|φ′|`
    pub cross: f64,
    /// `∫ u^{-a+t-1}|u′|^{m-t}φ^{b-t}|φ′|^t`
    pub t_term: f64,
    /// `∫_{supp φ′} u^{p-a}|u′|^q φ^b`
    pub r1: f64,
    /// `∫ φ^{b-tρ}|φ′|^{tρ}`
    pub r2_weighted: f64,
    /// `∫ |φ′|^{tρ}`
    pub r2: f64,
    /// `∫_{B_{2^{i+1}}} u^{p-a}|u′|^q`
    pub ball: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub epsilon: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub params: Params,
    pub i: u32,
    pub exponents: LemmaExponents,
    /// `(2b)^t a^{1-t}`
    pub prefactor: f64,
    pub integrals: LemmaIntegrals,
    pub steps: Vec<StepRecord>,
    /// `lhs/rhs` of the explicit two-integral form.
    pub slack: f64,
    /// `lhs/rhs` of the single-integral form.
    pub simplified_slack: f64,
    pub shifts: Vec<ShiftRecord>,
    pub pass: bool,
}

fn lemma_integrals(params: &Params, man: &ModelManifold, u: &RadialFunction, ex: &LemmaExponents, phi: &RadialFunction, i: u32) -> Result<LemmaIntegrals> {
    let Params { m, p, q } = *params;
    let LemmaExponents { a, b, t, .. } = *ex;
    let tr = ex.cutoff_power();
    let (inner, outer) = (2f64.powi(i as i32 + 1), 2f64.powi(2 * i as i32 + 1));
    let mut extra = u.breaks.clone();
    extra.extend(man.joins());
    let grid = nodes(outer, &extra);
    let ln_phi = |r: f64| phi.value(r).ln();
    let ln_dphi = |r: f64| phi.deriv(r).abs().ln();
    let base = |r: f64, pu: f64, pd: f64| pow_ln(pu, u.ln_value(r)) + pow_ln(pd, u.ln_abs_deriv(r)) + man.ln_s(r);
    let l_integrand = |r: f64| base(r, p - a, q) + pow_ln(b, ln_phi(r));

    let l = log_integral(l_integrand, 0.0, outer, &grid)?;
    let e = log_integral(|r| base(r, -a - 1.0, m) + pow_ln(b, ln_phi(r)), 0.0, outer, &grid)?;
    let cross = b * log_integral(|r| base(r, -a, m - 1.0) + pow_ln(b - 1.0, ln_phi(r)) + ln_dphi(r), inner, outer, &grid)?;
    let t_term = log_integral(|r| base(r, -a + t - 1.0, m - t) + pow_ln(b - t, ln_phi(r)) + t * ln_dphi(r), inner, outer, &grid)?;
    let r1 = log_integral(|r| if phi.deriv(r) != 0.0 { l_integrand(r) } else { f64::NEG_INFINITY }, inner, outer, &grid)?;
    let r2_weighted = log_integral(|r| pow_ln(b - tr, ln_phi(r)) + tr * ln_dphi(r) + man.ln_s(r), inner, outer, &grid)?;
    let r2 = log_integral(|r| tr * ln_dphi(r) + man.ln_s(r), inner, outer, &grid)?;
    let ball = log_integral(|r| base(r, p - a, q), 0.0, inner, &grid)?;
    Ok(LemmaIntegrals { l, e, cross, t_term, r1, r2_weighted, r2, ball })
}

fn lemma_steps(ex: &LemmaExponents, n: &LemmaIntegrals) -> Vec<StepRecord> {
    let LemmaExponents { a, b, t, gamma, hoelder_rho: rho, .. } = *ex;
    let young = b.powf(t) * 2f64.powf(t - 1.0) * a.powf(1.0 - t);
    let pre = (2.0 * b).powf(t) * a.powf(1.0 - t);
    vec![
        StepRecord::new("test_function", n.l + a * n.e, n.cross),
        StepRecord::new("young", n.cross, 0.5 * a * n.e + young * n.t_term),
        StepRecord::new("absorb", n.l, young * n.t_term),
        StepRecord::new("constant", young, pre),
        StepRecord::new("hoelder", n.t_term, n.r1.powf(1.0 / gamma) * n.r2_weighted.powf(1.0 / rho)),
        StepRecord::new("drop_cutoff_power", n.r2_weighted, n.r2),
        StepRecord::new("explicit", n.l, pre * n.r1.powf(1.0 / gamma) * n.r2.powf(1.0 / rho)),
        StepRecord::new("simplified", n.l.powf(1.0 / rho), pre * n.r2.powf(1.0 / rho)),
    ]
}

/// Checks the Caccioppoli estimate for `u` against `φ_i` with explicit constants.
///
/// The solution must satisfy the inequality on the whole support of `φ_i`;
/// this is checked first on `[10⁻²R₀, 2^{2i+1}]`.
pub fn verify_lemma1(sol: &PiecewiseSolution, a: f64, b: f64, i: u32, opts: &LemmaOptions) -> Result<LemmaReport> {
    let params = *sol.params();
    if params.denom() == 0.0 {
        return Err(Error::Params("the estimate needs p+q != m-1".into()));
    }
    let cond = cond_ab(&params, a, b);
    if !cond.holds {
        return Err(Error::Params(format!("(a, b) = ({a}, {b}) not admissible: {}", cond.failures.join("; "))));
    }
    let ex = cond.exponents;
    let man = &sol.manifold;
    let u = sol.u();
    let outer = 2f64.powi(2 * i as i32 + 1);
    if !u.in_domain(outer) {
        return Err(Error::Domain(format!("support of phi_{i} leaves the domain of u")));
    }
    let r0 = sol.r0();
    let window = (sol.window().0.min(0.5), sol.window().1.max(outer));
    let vopts = VerifyOptions { points: 400, exclude: vec![(r0 - 1e-6, r0 + 1e-6)], ..VerifyOptions::default() };
    let rep = verify_inequality(&params, man, u, window, &vopts)?;
    if !rep.pass {
        return Err(Error::Domain(format!(
            "u is not a solution on [{:.3e}, {:.3e}]: worst residual {:.3e} at r={:.4e}",
            window.0, window.1, rep.worst_residual, rep.worst_location
        )));
    }
    let phi = cutoff_h(opts.cutoff)?.phi(i)?;
    let integrals = lemma_integrals(&params, man, u, &ex, &phi, i)?;
    if !(integrals.l > 0.0) {
        return Err(Error::Domain("u is not positive on the support of phi".into()));
    }
    let steps = lemma_steps(&ex, &integrals);
    let slack = steps[6].ratio;
    let simplified_slack = steps[7].ratio;
    let mut shifts = Vec::new();
    for eps in opts.shifts {
        let n = lemma_integrals(&params, man, &shifted(u, eps), &ex, &phi, i)?;
        shifts.push(ShiftRecord { epsilon: eps, slack: lemma_steps(&ex, &n)[6].ratio });
    }
    let pass = steps.iter().all(|s| s.pass);
    let prefactor = (2.0 * b).powf(ex.t) * a.powf(1.0 - ex.t);
    Ok(LemmaReport { params, i, exponents: ex, prefactor, integrals, steps, slack, simplified_slack, shifts, pass })
}

/// The closed-form parts of the G6 argument with `a = 2R`, `b = c₃a/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub C1: f64,
    pub C2: f64,
    pub C3: f64,
    pub C4: f64,
    pub kappa: f64,
    /// Level `k` of the sublevel set the argument works on.
    pub k: f64,
    pub kappa_star: f64,
    pub c1_negative: bool,
}

/// Coefficients with `k = 1`.
pub fn c_coefficients(params: &Params, kappa: f64) -> Result<CCoefficients> {
    c_coefficients_at(params, kappa, 1.0)
}

#[allow(non_snake_case)]
pub fn c_coefficients_at(params: &Params, kappa: f64, k: f64) -> Result<CCoefficients> {
    let Params { m, p, q } = *params;
    if !(p < m - 1.0 - q && q < m - 1.0) {
        return Err(Error::Params(format!("coefficients need p < m-1-q and q < m-1, got (m,p,q)=({m},{p},{q})")));
    }
    let d = p + q - m + 1.0;
    let c1 = (q - m) / d;
    let c2 = (m * p + q) / d;
    let c3 = 4.0 * (q - m) / d;
    let c4 = -(q - m + 1.0) / d;
    let c5 = -p * (m - 1.0) / d;
    let c6 = -c1;
    let c7 = -c2;
    let ln2 = std::f64::consts::LN_2;
    let C1 = c1 + c4 + kappa + c6;
    let C2 = c1 * c3.ln() + k.ln() - c6 * ln2;
    let C3 = c2 + c5 + c7;
    let C4 = c2 * c3.ln() - c7 * ln2;
    let kappa_star = (m - 1.0 - q) / (m - 1.0 - p - q);
    Ok(CCoefficients { c1, c2, c3, c4, c5, c6, c7, C1, C2, C3, C4, kappa, k, kappa_star, c1_negative: C1 < 0.0 })
}

impl CCoefficients {
    /// `(c₁a+c₂)ln(c₃a) + (c₄a+c₅)ln a + a ln k + κa ln a + (c₆a+c₇)ln(a/2)`
    pub fn log_bound(&self, a: f64) -> f64 {
        (self.c1 * a + self.c2) * (self.c3 * a).ln()
            + (self.c4 * a + self.c5) * a.ln()
            + a * self.k.ln()
            + self.kappa * a * a.ln()
            + (self.c6 * a + self.c7) * (a / 2.0).ln()
    }

    /// `C₁a ln a + C₂a + C₃ ln a + C₄`
    pub fn collected(&self, a: f64) -> f64 {
        self.C1 * a * a.ln() + self.C2 * a + self.C3 * a.ln() + self.C4
    }
}

/// Supremum of admissible `κ`: as stated, and as the proof actually delivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaThreshold {
    pub region: Region,
    pub statement: f64,
    /// `min{m-1,1}/(2ρ_h e)` for G5; equal to `statement` for G6.
    pub proof: f64,
    pub rho_h: Option<f64>,
}

impl KappaThreshold {
    /// Whether `κ` lies where the statement applies but the proof does not reach.
    pub fn between(&self, kappa: f64) -> bool {
        kappa >= self.proof && kappa < self.statement
    }
}

/// Thresholds with the default cubic cutoff.
pub fn kappa_threshold(params: &Params) -> Result<KappaThreshold> {
    kappa_threshold_with(params, &cutoff_h(CutoffKind::Smoothstep3)?)
}

pub fn kappa_threshold_with(params: &Params, cutoff: &CutoffFamily) -> Result<KappaThreshold> {
    let Params { m, p, q } = *params;
    match classify(params) {
        Region::G5 => {
            let l = (m - 1.0).min(1.0);
            let statement = l / (2.0 * std::f64::consts::E);
            Ok(KappaThreshold { region: Region::G5, statement, proof: statement / cutoff.rho_h, rho_h: Some(cutoff.rho_h) })
        }
        Region::G6 => {
            let k = (m - 1.0 - q) / (m - 1.0 - p - q);
            Ok(KappaThreshold { region: Region::G6, statement: k, proof: k, rho_h: None })
        }
        r => Err(Error::Params(format!("kappa threshold defined only on G5 and G6, got {r:?}"))),
    }
}

/// `2κ + θ ln(C₁θ)`; negative means the energy bound forces a vanishing integral.
pub fn kappa_exponent(kappa: f64, theta: f64, c1: f64) -> f64 {
    2.0 * kappa + theta * (c1 * theta).ln()
}

/// Pointwise Young step `|v′|^λ ≤ ((λ-q)|v′|^m + (m-λ)|v′|^q)/(m-q) ≤ |v′|^m + |v′|^q`.
pub fn young_pointwise(m: f64, q: f64, lambda: f64, dv: f64) -> (f64, f64, f64) {
    let x = dv.abs();
    let lhs = x.powf(lambda);
    let sharp = ((lambda - q) * x.powf(m) + (m - lambda) * x.powf(q)) / (m - q);
    (lhs, sharp, x.powf(m) + x.powf(q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub params: Params,
    pub r: f64,
    pub lambda: f64,
    pub z: f64,
    pub l: f64,
    pub rho_h: f64,
    pub kappa: f64,
    pub steps: Vec<StepRecord>,
    /// `2κ + θ ln(C₁θ)` at `θ = z/R`, `C₁ = ρ_h/l`.
    pub exponent: f64,
    pub thresholds: KappaThreshold,
    pub kappa_between: bool,
    pub pass: bool,
}

/// The energy chain for `v = ln u` on a G5 solution, at radius `r`.
pub fn verify_energy_bound_g5(sol: &PiecewiseSolution, r: f64, lambda: f64, cutoff: &CutoffFamily, kappa: f64) -> Result<EnergyReport> {
    let params = *sol.params();
    let Params { m, q, .. } = params;
    if classify(&params) != Region::G5 {
        return Err(Error::Params(format!("energy chain needs G5 parameters, got {:?}", classify(&params))));
    }
    if !(lambda > m - 1.0 && lambda < m) {
        return Err(Error::Params(format!("lambda must lie in (m-1, m) = ({}, {m}), got {lambda}", m - 1.0)));
    }
    if !(r > 0.0) {
        return Err(Error::Params(format!("radius must be positive, got {r}")));
    }
    let man = &sol.manifold;
    let u = sol.u();
    let hi = 2.0 * r;
    if !u.in_domain(hi) {
        return Err(Error::Domain(format!("2R={hi} leaves the domain of u")));
    }
    let l = (m - 1.0).min(1.0);
    let z = lambda / (lambda - m + 1.0);
    let rho_h = cutoff.rho_h;
    let mut extra = u.breaks.clone();
    extra.extend(man.joins());
    extra.extend([r]);
    let grid = nodes(hi, &extra);

    // ln|v′| = ln|u′| - ln u
    let ln_dv = |s: f64| u.ln_abs_deriv(s) - u.ln_value(s);
    let mut young_worst: f64 = 0.0;
    for k in 1..=200 {
        let s = hi * k as f64 / 200.0;
        let lu = u.ln_value(s);
        if !lu.is_finite() {
            return Err(Error::Domain(format!("ln u is not finite at r={s}: u is not bounded away from 0 on B_2R")));
        }
        let (lhs, sharp, coarse) = young_pointwise(m, q, lambda, ln_dv(s).exp());
        young_worst = young_worst.max(lhs / sharp).max(sharp / coarse);
    }
    let phi_r = |s: f64| cutoff.h(s / r);
    let dphi_r = |s: f64| (cutoff.h_deriv(s / r) / r).abs();

    let ball = log_integral(|s| lambda * ln_dv(s) + man.ln_s(s), 0.0, r, &grid)?;
    let energy = log_integral(|s| lambda * ln_dv(s) + pow_ln(z, phi_r(s).ln()) + man.ln_s(s), 0.0, hi, &grid)?;
    let cross = log_integral(|s| (m - 1.0) * ln_dv(s) + pow_ln(z - 1.0, phi_r(s).ln()) + dphi_r(s).ln() + man.ln_s(s), r, hi, &grid)?;
    let grad = log_integral(|s| z * dphi_r(s).ln() + man.ln_s(s), r, hi, &grid)?;
    let v2r = man.v(hi)?;

    let steps = vec![
        StepRecord::new("young_pointwise", young_worst, 1.0),
        StepRecord::new("test_function", energy, z / l * cross),
        StepRecord::new("hoelder", cross, energy.powf((m - 1.0) / lambda) * grad.powf((lambda - m + 1.0) / lambda)),
        StepRecord::new("ball_energy", ball, (z / l).powf(z) * grad),
        StepRecord::new("volume", (z / l).powf(z) * grad, (rho_h * z / (l * r)).powf(z) * v2r),
    ];
    let thresholds = kappa_threshold_with(&params, cutoff)?;
    let exponent = kappa_exponent(kappa, z / r, rho_h / l);
    let pass = steps.iter().all(|s| s.pass);
    Ok(EnergyReport {
        params,
        r,
        lambda,
        z,
        l,
        rho_h,
        kappa,
        steps,
        exponent,
        thresholds,
        kappa_between: thresholds.between(kappa),
        pass,
    })
}
