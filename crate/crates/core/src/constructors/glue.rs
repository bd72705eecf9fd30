//! Origin families, their admissible source weights, and C¹ matching.

use crate::error::{Error, Result};
use crate::manifold::ModelManifold;
use crate::params::Params;
use crate::radial::{log_grid, residual_terms, RadialFunction};
use crate::roots::bisect_log;

use super::profiles::{JTable, Profile};

/// An origin profile with the largest source weight it tolerates on `[0, reach]`.
#[derive(Debug, Clone)]
pub struct OriginProfile {
    pub profile: Profile,
    pub function: RadialFunction,
    /// Weight used by the construction.
    pub lambda_max: f64,
    /// The closed-form bound as usually displayed; may exceed `lambda_max`.
    pub lambda_closed_form: f64,
}

/// Admissible `θ` for the first origin family.
pub fn check_theta(params: &Params, n: u32, theta: f64) -> Result<()> {
    let Params { m, q, .. } = *params;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Params(format!("theta must be positive, got {theta}")));
    }
    if q < m - 1.0 && theta >= 1.0 / (m - 1.0 - q) {
        return Err(Error::Params(format!("theta={theta} must stay below 1/(m-1-q)={}", 1.0 / (m - 1.0 - q))));
    }
    if q < 0.0 && theta * q + n as f64 <= 0.0 {
        return Err(Error::Params(format!("theta={theta} violates theta*q + n > 0")));
    }
    Ok(())
}

/// Half the admissible upper bound, or 1 when unconstrained.
pub fn default_theta(params: &Params, n: u32) -> f64 {
    let Params { m, q, .. } = *params;
    let mut hi = f64::INFINITY;
    if q < m - 1.0 {
        hi = 1.0 / (m - 1.0 - q);
    }
    if q < 0.0 {
        hi = hi.min(-(n as f64) / q);
    }
    if hi.is_finite() {
        0.5 * hi
    } else {
        1.0
    }
}

/// `ln λ` admissible at `x = r/(sρ)` for either family, before any `u^p` factor.
fn lambda_at(params: &Params, table: &JTable, scale: f64, x: f64) -> f64 {
    let Params { m, q, .. } = *params;
    let theta = table.theta();
    let ln_a = -(scale * table.j0()).ln();
    let e = theta * (m - 1.0 - q) - 1.0;
    (theta * (m - 1.0)).ln() + (m - 1.0 - q) * ln_a + e * (-(-x).exp_m1()).ln() - x - scale.ln()
}

/// `u_{1,ρ}(r) = A∫_r^ρ (1-e^{-x/ρ})^θ dx` with `u(0) = 1`.
pub fn origin_profile_1(params: &Params, n: u32, rho: f64, theta: f64) -> Result<OriginProfile> {
    check_theta(params, n, theta)?;
    if !(rho > 0.0) {
        return Err(Error::Params(format!("rho must be positive, got {rho}")));
    }
    let Params { m, q, .. } = *params;
    let table = JTable::new(theta)?;
    let profile = Profile::OriginExpIntegral { rho, theta, stretch: 1.0 };
    let function = profile.build(0.0)?;
    let ln_a = -(rho * table.j0()).ln();
    let lambda_closed_form = (theta * (m - 1.0)).ln()
        + (theta * (m - 1.0 - q) + 1.0) * (-(-1f64).exp_m1()).ln()
        - rho.ln()
        + (m - 1.0 - q) * ln_a;
    // The infimum over (0, ρ) sits at r → ρ and carries an extra e^{-1}.
    let tight = lambda_at(params, &table, rho, 1.0);
    Ok(OriginProfile { profile, function, lambda_max: tight.min(lambda_closed_form).exp(), lambda_closed_form: lambda_closed_form.exp() })
}

/// `u_{2,ρ}(r) = A∫_r^{2ρ} (1-e^{-x/(2ρ)})^θ dx` on `[0, ρ]` with `u(0) = 1`.
pub fn origin_profile_2(params: &Params, rho: f64, theta: f64) -> Result<OriginProfile> {
    let Params { m, p, q } = *params;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Params(format!("theta must be positive, got {theta}")));
    }
    if q < m - 1.0 {
        return Err(Error::Params(format!("second origin family needs q >= m-1, got q={q}")));
    }
    if !(rho > 0.0) {
        return Err(Error::Params(format!("rho must be positive, got {rho}")));
    }
    let table = JTable::new(theta)?;
    let profile = Profile::OriginExpIntegral { rho, theta, stretch: 2.0 };
    let function = profile.build(0.0)?;
    let la = table.eval(0.5) / table.j0();
    let ln_lambda = lambda_at(params, &table, 2.0 * rho, 0.5) - (p * la.ln()).max(0.0);
    Ok(OriginProfile { profile, function, lambda_max: ln_lambda.exp(), lambda_closed_form: ln_lambda.exp() })
}

/// Log-derivative `u′/u` of the origin family at `r0` as a function of `ρ`.
pub fn origin_ratio(table: &JTable, stretch: f64, rho: f64, r0: f64) -> f64 {
    let scale = stretch * rho;
    let x = r0 / scale;
    -(-(-x).exp_m1()).powf(table.theta()) / (scale * table.eval(x))
}

/// Result of matching an origin family to an infinity piece at `r0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub rho: f64,
    pub tau: f64,
}

/// Finds `ρ` with matching log-derivatives at `r0`, then `τ` matching values.
pub fn match_ratio(inf: &RadialFunction, theta: f64, stretch: f64, r0: f64) -> Result<Match> {
    let table = JTable::new(theta)?;
    let target = inf.deriv(r0) / inf.value(r0);
    if !(target < 0.0) {
        return Err(Error::stage("glue", format!("infinity piece is not decreasing at R0={r0}: u'/u={target:e}")));
    }
    let lo = if stretch == 1.0 { r0 * (1.0 + 1e-9) } else { r0 / stretch * 2.0 };
    let lo = lo.max(r0 / stretch * (1.0 + 1e-9));
    let hi = 1e6 * r0;
    let f = |rho: f64| origin_ratio(&table, stretch, rho, r0) - target;
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo < 0.0 && fhi > 0.0) {
        let curve: Vec<String> = log_grid(lo, hi, 7)
            .into_iter()
            .map(|rho| format!("rho={rho:.3e}: {:.3e}", origin_ratio(&table, stretch, rho, r0)))
            .collect();
        return Err(Error::stage(
            "glue",
            format!("ratio not bracketed at R0={r0}: target {target:.3e}; origin ratio {}", curve.join(", ")),
        ));
    }
    let rho = bisect_log(f, lo, hi, 1e-14)?;
    Ok(Match { rho, tau: tau_for(inf, theta, stretch, rho, r0)? })
}

/// `τ = u_∞(R₀)/u_ρ(R₀)`.
pub fn tau_for(inf: &RadialFunction, theta: f64, stretch: f64, rho: f64, r0: f64) -> Result<f64> {
    let origin = Profile::OriginExpIntegral { rho, theta, stretch }.build(0.0)?;
    Ok(inf.value(r0) / origin.value(r0))
}

pub const SCAN_LO: f64 = std::f64::consts::E * std::f64::consts::E;
pub const SCAN_HI: f64 = 1e12;
pub const SCAN_PER_DECADE: usize = 64;
pub const SCAN_RUN: usize = 64;

/// First radius after which `SCAN_RUN` consecutive grid residuals are negative, doubled.
pub fn scan_r0(params: &Params, man: &ModelManifold, u: &RadialFunction, weight: f64) -> Result<f64> {
    let lo = SCAN_LO.max(man.r2() * 1.0001).max(u.domain.0 * 1.0001);
    let decades = (SCAN_HI / lo).log10();
    let grid = log_grid(lo, SCAN_HI, (decades * SCAN_PER_DECADE as f64).ceil() as usize + 1);
    let mut start = None;
    let mut run = 0;
    for &r in &grid {
        let t = residual_terms(params, man, u, r, weight)?;
        if t.total() < 0.0 {
            if run == 0 {
                start = Some(r);
            }
            run += 1;
            if run >= SCAN_RUN {
                return Ok(2.0 * start.unwrap_or(r));
            }
        } else {
            run = 0;
        }
    }
    Err(Error::stage("scan", format!("no run of {SCAN_RUN} negative residuals on [{lo:.3e}, {SCAN_HI:e}]")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_manifold, ManifoldSpec};
    use crate::radial::{verify_inequality, VerifyOptions};

    #[test]
    fn theta_rules() {
        let p = Params::new(2.0, 2.0, 0.0).unwrap();
        assert!(check_theta(&p, 2, 0.99).is_ok());
        assert!(check_theta(&p, 2, 1.0).is_err());
        let neg = Params::new(2.0, 3.0, -1.0).unwrap();
        assert!(check_theta(&neg, 2, 0.49).is_ok());
        assert!(check_theta(&neg, 2, 0.6).is_err());
        assert_eq!(default_theta(&Params::new(2.0, 0.0, 3.0).unwrap(), 2), 1.0);
        assert_eq!(default_theta(&p, 2), 0.5);
    }

    #[test]
    fn closed_form_bound_overshoots_by_constant_factor() {
        let p = Params::new(2.0, 2.0, 0.0).unwrap();
        let o = origin_profile_1(&p, 2, 50.0, 0.5).unwrap();
        let factor = (1.0 - (-1f64).exp()).powi(2) * std::f64::consts::E;
        assert!((o.lambda_closed_form / o.lambda_max / factor - 1.0).abs() < 1e-12);
    }

    #[test]
    fn origin_profiles_solve_weighted_inequality() {
        let man = build_manifold(&ManifoldSpec::power_log(4.0, 2.0)).unwrap();
        let g1 = Params::new(2.0, 2.0, 0.0).unwrap();
        let o = origin_profile_1(&g1, 2, 40.0, 0.5).unwrap();
        let opts = VerifyOptions { weight: o.lambda_max, ..VerifyOptions::default() };
        assert!(verify_inequality(&g1, &man, &o.function, (0.05, 39.9), &opts).unwrap().pass);

        let man2 = build_manifold(&ManifoldSpec::power_log(2.0, 2.0)).unwrap();
        let g2 = Params::new(2.0, 0.0, 3.0).unwrap();
        let o2 = origin_profile_2(&g2, 30.0, 1.0).unwrap();
        let opts = VerifyOptions { weight: o2.lambda_max, ..VerifyOptions::default() };
        assert!(verify_inequality(&g2, &man2, &o2.function, (0.05, 30.0), &opts).unwrap().pass);
    }

    #[test]
    fn ratio_limits() {
        let t = JTable::new(0.5).unwrap();
        assert!(origin_ratio(&t, 1.0, 10.0 * (1.0 + 1e-9), 10.0) < -1e6);
        assert!(origin_ratio(&t, 1.0, 1e7, 10.0).abs() < 1e-6);
    }

    #[test]
    fn match_is_c1_and_idempotent() {
        let inf = Profile::LogPower { exponent: -0.5 }.build(0.0).unwrap();
        let r0 = 15.0;
        let mt = match_ratio(&inf, 1.0, 1.0, r0).unwrap();
        let org = Profile::OriginExpIntegral { rho: mt.rho, theta: 1.0, stretch: 1.0 }.build(0.0).unwrap();
        assert!((mt.tau * org.value(r0) / inf.value(r0) - 1.0).abs() < 1e-13);
        assert!((mt.tau * org.deriv(r0) / inf.deriv(r0) - 1.0).abs() < 1e-10);
        let again = tau_for(&inf, 1.0, 1.0, mt.rho, r0).unwrap();
        assert!((again / mt.tau - 1.0).abs() < 1e-12);
    }
}
