//! The substitution turning an m-superharmonic `v` into a solution with `q = m`.
//!
//! `v = G(u) = ∫₀^u exp(s^{p+1}/((p+1)(m-1))) ds` for `p ≠ -1` and
//! `v = u^{m/(m-1)}` for `p = -1`. With `g = G′(u)` one has
//! `Δ_m v = g^{m-1}[Δ_m u + u^p|∇u|^m]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::ModelManifold;
use crate::params::Params;
use crate::quad::{integrate, QuadOptions};
use crate::radial::{residual_terms, verify_inequality, IdentityReport, RadialFunction, VerifyOptions, IDENTITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeMap {
    pub p: f64,
    pub m: f64,
}

impl ChangeMap {
    pub fn new(p: f64, m: f64) -> Self {
        ChangeMap { p, m }
    }

    fn is_power(&self) -> bool {
        self.p == -1.0
    }

    /// `ln G′(u)`
    pub fn ln_g(&self, u: f64) -> f64 {
        if self.is_power() {
            (self.m / (self.m - 1.0)).ln() + u.ln() / (self.m - 1.0)
        } else {
            u.powf(self.p + 1.0) / ((self.p + 1.0) * (self.m - 1.0))
        }
    }

    /// `G(u)`
    pub fn forward(&self, u: f64) -> Result<f64> {
        if u <= 0.0 {
            return Ok(0.0);
        }
        if self.is_power() {
            return Ok(u.powf(self.m / (self.m - 1.0)));
        }
        let opts = QuadOptions::rel(1e-15).with_clustering(if self.p + 1.0 < 1.0 { 6 } else { 0 });
        Ok(integrate(|s| self.ln_g(s).exp(), 0.0, u, &opts)?.value)
    }

    /// `G⁻¹(v)` by bracketing then Newton to full precision.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        invert(self, v, |u| self.forward(u))
    }

    /// `u = G⁻¹(v)` as a radial function, with `u′ = v′/g(u)`.
    pub fn apply(&self, v: &RadialFunction) -> RadialFunction {
        let map = *self;
        let table = Arc::new(GTable::new(map));
        let (vv, vd, ld) = (v.clone(), v.clone(), v.clone());
        let value = move |r: f64| table.inverse(vv.value(r)).unwrap_or(f64::NAN);
        let (value2, value3, value4) = (value.clone(), value.clone(), value.clone());
        RadialFunction::new(value, move |r| vd.deriv(r) / map.ln_g(value2(r)).exp(), v.domain)
            .with_logs(move |r| value3(r).ln(), move |r| ld.ln_abs_deriv(r) - map.ln_g(value4(r)))
            .with_breaks(v.breaks.clone())
    }
}

fn invert<F: Fn(f64) -> Result<f64>>(map: &ChangeMap, v: f64, forward: F) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("change of variables needs v > 0, got {v}")));
    }
    if map.is_power() {
        return Ok(v.powf((map.m - 1.0) / map.m));
    }
    // G′ ≥ 1 when p+1 > 0, so u ≤ v; otherwise G′ ≤ 1 and u ≥ v.
    let (mut lo, mut hi) = if map.p + 1.0 > 0.0 { (0.0, v.min(1.0)) } else { (v, v) };
    let saturated = |u: f64| forward(u).unwrap_or(f64::INFINITY);
    let mut k = 0;
    while saturated(hi) < v {
        lo = hi;
        hi *= 2.0;
        k += 1;
        if k > 60 {
            return Err(Error::Domain(format!("v={v} outside the range of the map: G(u) < v up to u={hi:e}")));
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = saturated(u) - v;
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let next = u - f / map.ln_g(u).exp();
        let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if (next - u).abs() <= 2.0 * f64::EPSILON * u || hi - lo <= 2.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        u = next;
    }
    Ok(u)
}

const G_TABLE_LO: f64 = 1e-8;
const G_TABLE_STEP: f64 = std::f64::consts::LN_2 / 8.0;

/// Cumulative values of `G` on a geometric grid, so each evaluation is one short panel.
struct GTable {
    map: ChangeMap,
    nodes: Vec<f64>,
}

impl GTable {
    fn new(map: ChangeMap) -> Self {
        let mut nodes = Vec::new();
        if !map.is_power() {
            let opts = QuadOptions::rel(1e-15);
            let mut acc = map.forward(G_TABLE_LO).unwrap_or(f64::NAN);
            let mut u = G_TABLE_LO;
            nodes.push(acc);
            while u < 1e8 && map.ln_g(u) < 600.0 && acc.is_finite() {
                let next = u * G_TABLE_STEP.exp();
                acc += integrate(|s| map.ln_g(s).exp(), u, next, &opts).map(|r| r.value).unwrap_or(f64::NAN);
                nodes.push(acc);
                u = next;
            }
        }
        GTable { map, nodes }
    }

    fn forward(&self, u: f64) -> Result<f64> {
        if u <= G_TABLE_LO || self.nodes.is_empty() {
            return self.map.forward(u);
        }
        let k = (((u / G_TABLE_LO).ln() / G_TABLE_STEP).floor() as usize).min(self.nodes.len() - 1);
        let node = G_TABLE_LO * (k as f64 * G_TABLE_STEP).exp();
        let opts = QuadOptions::rel(1e-15);
        Ok(self.nodes[k] + integrate(|s| self.map.ln_g(s).exp(), node, u, &opts)?.value)
    }

    fn inverse(&self, v: f64) -> Result<f64> {
        invert(&self.map, v, |u| self.forward(u))
    }
}

/// Turns a verified m-superharmonic `v` into a solution for `params` (which must have `q = m`).
pub fn change_of_variables(params: &Params, man: &ModelManifold, v: &RadialFunction, window: (f64, f64)) -> Result<RadialFunction> {
    let Params { m, p, q } = *params;
    if q != m {
        return Err(Error::Params(format!("change of variables needs q = m, got q={q}, m={m}")));
    }
    let harmonic = Params { m, p: 0.0, q: 0.0 };
    let opts = VerifyOptions { weight: 0.0, ..VerifyOptions::default() };
    let rep = verify_inequality(&harmonic, man, v, window, &opts)?;
    if !rep.pass {
        return Err(Error::stage(
            "change_of_variables",
            format!("v is not m-superharmonic: worst residual {:e} at r={}", rep.worst_residual, rep.worst_location),
        ));
    }
    Ok(ChangeMap::new(p, m).apply(v))
}

/// Checks `Δ_m v = g^{m-1}[Δ_m u + u^p|∇u|^m]` at `samples`.
pub fn change_identity(params: &Params, man: &ModelManifold, v: &RadialFunction, samples: &[f64]) -> Result<IdentityReport> {
    let Params { m, p, .. } = *params;
    let u = ChangeMap::new(p, m).apply(v);
    let harmonic = Params { m, p: 0.0, q: 0.0 };
    let with_source = Params { m, p, q: m };
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for &r in samples {
        if !(v.value(r) > 0.0) || v.deriv(r) == 0.0 {
            skipped += 1;
            continue;
        }
        // Both sides share the scale e^{ln S + (m-1) ln|v′|}.
        let lap_v = residual_terms(&harmonic, man, v, r, 0.0)?;
        let rhs = residual_terms(&with_source, man, &u, r, 1.0)?;
        let shift = (rhs.ln_scale + (m - 1.0) * ChangeMap::new(p, m).ln_g(u.value(r)) - lap_v.ln_scale).exp();
        let (a, b) = (lap_v.flux_deriv, rhs.total() * shift);
        let scale = lap_v.flux_deriv.abs() + (rhs.flux_deriv.abs() + rhs.source) * shift;
        worst = worst.max((a - b).abs() / scale.max(1e-300));
    }
    Ok(IdentityReport { samples: samples.len(), skipped, max_rel_error: worst, pass: worst <= IDENTITY_TOL })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_manifold, ManifoldSpec};
    use crate::radial::log_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn p_zero_is_log_one_plus() {
        let map = ChangeMap::new(0.0, 2.0);
        for v in [1e-6, 0.1, 1.0, 7.5] {
            assert_relative_eq!(map.inverse(v).unwrap(), v.ln_1p(), max_relative = 1e-14);
        }
    }

    #[test]
    fn p_minus_one_power() {
        let map = ChangeMap::new(-1.0, 3.0);
        assert_relative_eq!(map.inverse(8.0).unwrap(), 8f64.powf(2.0 / 3.0), max_relative = 1e-15);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(ChangeMap::new(1.0, 2.0).inverse(0.0).is_err());
    }

    #[test]
    fn superharmonic_power_gives_solution() {
        // Δ(100 - √r) = -r^{-3/2}/4 on the plane.
        let man = build_manifold(&ManifoldSpec::power_log(2.0, 0.0).with_joins(1e6, 2e6)).unwrap();
        let v = RadialFunction::new(|r: f64| 100.0 - r.sqrt(), |r: f64| -0.5 / r.sqrt(), (0.0, 9e3));
        let params = Params::new(2.0, 3.0, 2.0).unwrap();
        let u = change_of_variables(&params, &man, &v, (0.5, 5e3)).unwrap();
        let rep = verify_inequality(&params, &man, &u, (0.5, 5e3), &VerifyOptions::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
        let id = change_identity(&params, &man, &v, &log_grid(0.5, 5e3, 200)).unwrap();
        assert!(id.pass, "{id:?}");
    }

    #[test]
    fn harmonic_violation_rejected() {
        let man = build_manifold(&ManifoldSpec::power_log(2.0, 0.0).with_joins(1e6, 2e6)).unwrap();
        let v = RadialFunction::new(|r: f64| 1.0 + r * r, |r: f64| 2.0 * r, (0.0, f64::INFINITY));
        let params = Params::new(2.0, 1.0, 2.0).unwrap();
        assert!(change_of_variables(&params, &man, &v, (0.5, 10.0)).is_err());
    }

    proptest! {
        #[test]
        fn inverse_roundtrip(p in prop_oneof![-3.0f64..-1.2, -0.9f64..4.0], m in 1.5f64..4.0, v in 1e-3f64..5.0) {
            let map = ChangeMap::new(p, m);
            let u = map.inverse(v).unwrap();
            prop_assert!((map.forward(u).unwrap() - v).abs() <= 1e-13 * v);
        }
    }
}
