//! Closed-form and quadrature-backed radial profiles used as solution pieces.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};
use crate::radial::RadialFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `J(r/(sρ))/J(0)` with `J(a) = ∫_a^1 (1-e^{-y})^θ dy`.
    OriginExpIntegral { rho: f64, theta: f64, stretch: f64 },
    /// `∫_r^∞ S^{-1/(m-1)} (ln s)^{η/(m-1)} ds` for `S = e^{ln_coef} s^{α-1} (ln s)^β`.
    PowerLogTail { m: f64, eta: f64, alpha: f64, beta: f64, ln_coef: f64 },
    /// `(ln r)^exponent`
    LogPower { exponent: f64 },
    /// `c + r^{-η}`
    ConstPlusPower { c: f64, eta: f64 },
    /// `e^{-ηr}`
    Exponential { eta: f64 },
    /// `c₀ - c₀(pr)^{(p+1)/p} / ((p+1)(m-1)^{1/p})`
    G5Origin { c0: f64, p: f64, m: f64 },
    /// `c₀ - r^α`
    PowerCap { c0: f64, alpha: f64 },
    /// `e^{ln r / r}`
    ExpLogOverR,
}

const J_NODES: usize = 256;

/// Cumulative table for `J(a) = ∫_a^1 (1-e^{-y})^θ dy` on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct JTable {
    theta: f64,
    nodes: Vec<f64>,
}

fn j_integrand(theta: f64) -> impl Fn(f64) -> f64 {
    move |y: f64| (-(-y).exp_m1()).powf(theta)
}

impl JTable {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Params(format!("theta must be positive, got {theta}")));
        }
        let f = j_integrand(theta);
        let mut nodes = vec![0.0; J_NODES + 1];
        let opts = QuadOptions::rel(1e-15).with_clustering(4);
        for k in (0..J_NODES).rev() {
            let (a, b) = (k as f64 / J_NODES as f64, (k + 1) as f64 / J_NODES as f64);
            nodes[k] = nodes[k + 1] + integrate(&f, a, b, &opts)?.value;
        }
        Ok(JTable { theta, nodes })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `J(a)` for `a ∈ [0, 1]`.
    pub fn eval(&self, a: f64) -> f64 {
        if a >= 1.0 {
            return 0.0;
        }
        let a = a.max(0.0);
        let k = ((a * J_NODES as f64).floor() as usize).min(J_NODES - 1);
        let hi = (k + 1) as f64 / J_NODES as f64;
        let f = j_integrand(self.theta);
        let opts = QuadOptions::rel(1e-15);
        let part = integrate(f, a, hi, &opts).map(|r| r.value).unwrap_or(f64::NAN);
        self.nodes[k + 1] + part
    }

    pub fn j0(&self) -> f64 {
        self.nodes[0]
    }
}

/// Tail table for the power-log profile in the variable `t = ln s`.
#[derive(Debug, Clone)]
struct TailTable {
    a: f64,
    c: f64,
    e: f64,
    t0: f64,
    dt: f64,
    tails: Vec<f64>,
}

impl TailTable {
    fn integrand(&self, t: f64) -> f64 {
        (-self.a - self.c * t + self.e * t.ln()).exp()
    }

    /// Closed form when the exponential factor is absent.
    fn exact_tail(&self, t: f64) -> Option<f64> {
        (self.c == 0.0).then(|| (-self.a).exp() * t.powf(self.e + 1.0) / (-self.e - 1.0))
    }

    fn new(m: f64, eta: f64, alpha: f64, beta: f64, ln_coef: f64, t0: f64) -> Result<Self> {
        let c = (alpha - m) / (m - 1.0);
        let e = (eta - beta) / (m - 1.0);
        if c < 0.0 || (c == 0.0 && e >= -1.0) {
            return Err(Error::stage(
                "infinity_profile",
                format!("profile undefined: tail integral diverges for alpha={alpha}, m={m}, beta={beta}, eta={eta}"),
            ));
        }
        if !(t0 > 0.0) {
            return Err(Error::stage("infinity_profile", "power-log tail needs r > 1"));
        }
        let mut table = TailTable { a: ln_coef / (m - 1.0), c, e, t0, dt: 0.5, tails: Vec::new() };
        if c == 0.0 {
            return Ok(table);
        }
        // Integrate panels outward until the integrand is negligible, then sum backward.
        let opts = QuadOptions::rel(1e-14);
        let mut parts = Vec::new();
        let mut t = t0;
        let mut peak: f64 = 0.0;
        loop {
            let part = integrate(|s| table.integrand(s), t, t + table.dt, &opts)?.value;
            peak = peak.max(part);
            parts.push(part);
            t += table.dt;
            let f_end = table.integrand(t);
            if (part < 1e-20 * peak && f_end * (1.0 / c) < 1e-20 * peak) || parts.len() > 200_000 {
                break;
            }
        }
        let mut tails = vec![0.0; parts.len() + 1];
        // Remainder past the last node from the leading asymptotics.
        let t_end = t0 + parts.len() as f64 * table.dt;
        let slope = c - e / t_end;
        tails[parts.len()] = table.integrand(t_end) / slope.max(c * 0.5);
        for k in (0..parts.len()).rev() {
            tails[k] = tails[k + 1] + parts[k];
        }
        table.tails = tails;
        Ok(table)
    }

    fn tail(&self, t: f64) -> f64 {
        if let Some(v) = self.exact_tail(t) {
            return v;
        }
        let opts = QuadOptions::rel(1e-14);
        let pos = (t - self.t0) / self.dt;
        let k = pos.ceil().max(0.0) as usize;
        if k < self.tails.len() {
            let node = self.t0 + k as f64 * self.dt;
            let part = integrate(|s| self.integrand(s), t, node, &opts).map(|r| r.value).unwrap_or(f64::NAN);
            return self.tails[k] + part;
        }
        // Past the table: integrate panels until negligible.
        let mut total = 0.0;
        let mut lo = t;
        loop {
            let part = integrate(|s| self.integrand(s), lo, lo + self.dt, &opts).map(|r| r.value).unwrap_or(f64::NAN);
            total += part;
            lo += self.dt;
            if !(part > 1e-20 * total) {
                break;
            }
        }
        total
    }
}

impl Profile {
    /// Radii where the closed form is defined.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            Profile::OriginExpIntegral { rho, stretch, .. } => (0.0, stretch * rho),
            Profile::PowerLogTail { .. } | Profile::LogPower { .. } => (1.0, f64::INFINITY),
            Profile::ConstPlusPower { .. } | Profile::ExpLogOverR => (0.0, f64::INFINITY),
            Profile::Exponential { .. } => (0.0, f64::INFINITY),
            Profile::G5Origin { p, m, .. } => {
                (0.0, (p + 1.0).powf(p / (p + 1.0)) * (m - 1.0).powf(1.0 / (p + 1.0)) / p)
            }
            Profile::PowerCap { c0, alpha } => (0.0, c0.powf(1.0 / alpha)),
        }
    }

    /// Builds an evaluator; `r_min` bounds the radii that will be queried.
    pub fn build(&self, r_min: f64) -> Result<RadialFunction> {
        let domain = self.domain();
        Ok(match *self {
            Profile::OriginExpIntegral { rho, theta, stretch } => {
                let table = Arc::new(JTable::new(theta)?);
                let scale = stretch * rho;
                let j0 = table.j0();
                let ln_norm = (scale * j0).ln();
                let tv = table.clone();
                RadialFunction::new(
                    move |r| tv.eval(r / scale) / j0,
                    move |r| -(-(-r / scale).exp_m1()).powf(theta) / (scale * j0),
                    domain,
                )
                .with_logs(
                    {
                        let t = table.clone();
                        move |r| (t.eval(r / scale) / j0).ln()
                    },
                    move |r| theta * (-(-r / scale).exp_m1()).ln() - ln_norm,
                )
            }
            Profile::PowerLogTail { m, eta, alpha, beta, ln_coef } => {
                let table = Arc::new(TailTable::new(m, eta, alpha, beta, ln_coef, r_min.max(1.0 + 1e-9).ln())?);
                let ln_d = move |r: f64| {
                    let lr = r.ln();
                    let ln_s = ln_coef + (alpha - 1.0) * lr + beta * lr.ln();
                    (eta * lr.ln() - ln_s) / (m - 1.0)
                };
                let tv = table.clone();
                let tl = table.clone();
                RadialFunction::new(move |r| tv.tail(r.ln()), move |r| -ln_d(r).exp(), (r_min, f64::INFINITY))
                    .with_logs(move |r| tl.tail(r.ln()).ln(), ln_d)
            }
            Profile::LogPower { exponent } => RadialFunction::new(
                move |r: f64| r.ln().powf(exponent),
                move |r: f64| exponent * r.ln().powf(exponent - 1.0) / r,
                domain,
            )
            .with_logs(
                move |r: f64| exponent * r.ln().ln(),
                move |r: f64| exponent.abs().ln() + (exponent - 1.0) * r.ln().ln() - r.ln(),
            ),
            Profile::ConstPlusPower { c, eta } => RadialFunction::new(
                move |r: f64| c + r.powf(-eta),
                move |r: f64| -eta * r.powf(-eta - 1.0),
                domain,
            )
            .with_logs(
                move |r: f64| (c + r.powf(-eta)).ln(),
                move |r: f64| eta.ln() - (eta + 1.0) * r.ln(),
            ),
            Profile::Exponential { eta } => RadialFunction::new(
                move |r: f64| (-eta * r).exp(),
                move |r: f64| -eta * (-eta * r).exp(),
                domain,
            )
            .with_logs(move |r| -eta * r, move |r| eta.ln() - eta * r),
            Profile::G5Origin { c0, p, m } => {
                let k = (p + 1.0) * (m - 1.0).powf(1.0 / p);
                RadialFunction::new(
                    move |r: f64| c0 - c0 * (p * r).powf((p + 1.0) / p) / k,
                    move |r: f64| -c0 * (p * r / (m - 1.0)).powf(1.0 / p),
                    domain,
                )
            }
            Profile::PowerCap { c0, alpha } => RadialFunction::new(
                move |r: f64| c0 - r.powf(alpha),
                move |r: f64| -alpha * r.powf(alpha - 1.0),
                domain,
            ),
            Profile::ExpLogOverR => RadialFunction::new(
                |r: f64| (r.ln() / r).exp(),
                |r: f64| (r.ln() / r).exp() * (1.0 - r.ln()) / (r * r),
                domain,
            )
            .with_logs(
                |r: f64| r.ln() / r,
                |r: f64| r.ln() / r + (r.ln() - 1.0).abs().ln() - 2.0 * r.ln(),
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn j_table_matches_closed_form() {
        // θ = 1: J(a) = 1 - a + e^{-1} - e^{-a}
        let t = JTable::new(1.0).unwrap();
        for a in [0.0, 0.1, 0.37, 0.5, 0.99] {
            let exact = 1.0 - a + (-1f64).exp() - (-a).exp();
            assert_relative_eq!(t.eval(a), exact, max_relative = 1e-13);
        }
        assert!(JTable::new(0.0).is_err());
    }

    #[test]
    fn origin_profile_normalised() {
        for rho in [10.0, 100.0, 1000.0] {
            let u = Profile::OriginExpIntegral { rho, theta: 0.5, stretch: 1.0 }.build(0.0).unwrap();
            assert_relative_eq!(u.value(0.0), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn origin_profile_limits() {
        // A_ρ = 1/(ρJ(0)) decreases in ρ and u_ρ(r) → 1.
        let t = JTable::new(0.5).unwrap();
        let a: Vec<f64> = [10.0, 1e2, 1e3].iter().map(|rho| 1.0 / (rho * t.j0())).collect();
        assert!(a[0] > a[1] && a[1] > a[2]);
        let at5: Vec<f64> = [10.0, 1e2, 1e3, 1e5]
            .iter()
            .map(|&rho| Profile::OriginExpIntegral { rho, theta: 0.5, stretch: 1.0 }.build(0.0).unwrap().value(5.0))
            .collect();
        assert!(at5.windows(2).all(|w| w[1] > w[0]));
        assert!((at5[3] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn stretched_profile_bounds() {
        let rho = 20.0;
        let u = Profile::OriginExpIntegral { rho, theta: 1.0, stretch: 2.0 }.build(0.0).unwrap();
        let t = JTable::new(1.0).unwrap();
        let l_a = t.eval(0.5) / t.j0();
        for k in 0..=100 {
            let r = rho * k as f64 / 100.0;
            let v = u.value(r);
            assert!(v <= 1.0 + 1e-15 && v >= l_a * (1.0 - 1e-12));
            let exact = (1.0 - (-r / (2.0 * rho)).exp()) / (2.0 * rho * t.j0());
            assert_relative_eq!(-u.deriv(r), exact, max_relative = 1e-14);
        }
    }

    #[test]
    fn derivatives_match_values() {
        let profiles = [
            Profile::OriginExpIntegral { rho: 30.0, theta: 0.5, stretch: 1.0 },
            Profile::LogPower { exponent: -0.5 },
            Profile::ConstPlusPower { c: 1.0, eta: 0.5 },
            Profile::Exponential { eta: 1.3 },
            Profile::G5Origin { c0: 0.655, p: 1.0, m: 2.0 },
            Profile::G5Origin { c0: 1.2, p: 2.5, m: 3.0 },
            Profile::PowerCap { c0: 2.0, alpha: 2.0 },
            Profile::ExpLogOverR,
            Profile::PowerLogTail { m: 2.0, eta: 0.5, alpha: 4.0, beta: 2.0, ln_coef: 2.0 },
            Profile::PowerLogTail { m: 2.0, eta: 0.5, alpha: 2.0, beta: 2.0, ln_coef: 2.0 },
        ];
        for prof in profiles {
            let u = prof.build(4.0).unwrap();
            let (lo, hi) = u.domain;
            let lo = lo.max(4.0).min(0.5 * hi.min(1e3));
            let hi = hi.min(1e3) * 0.999;
            let samples: Vec<f64> = (0..200).map(|k| lo + (hi - lo) * (k as f64 + 0.5) / 200.0).collect();
            let err = u.derivative_check(&samples);
            assert!(err < 1e-6, "{prof:?}: {err}");
            for &r in &samples[..20] {
                assert_relative_eq!(u.ln_value(r), u.value(r).ln(), epsilon = 1e-12, max_relative = 1e-12);
                assert_relative_eq!(u.ln_abs_deriv(r), u.deriv(r).abs().ln(), epsilon = 1e-11, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn power_log_tail_closed_form() {
        // α = 4, β = 0, η = 0, m = 2: ∫_r^∞ e^{-c} s^{-3} ds = e^{-c} r^{-2}/2
        let u = Profile::PowerLogTail { m: 2.0, eta: 0.0, alpha: 4.0, beta: 0.0, ln_coef: 1.5 }.build(4.0).unwrap();
        for r in [4.0, 10.0, 1e3, 1e8, 1e15] {
            assert_relative_eq!(u.value(r), (-1.5f64).exp() / (2.0 * r * r), max_relative = 1e-12);
        }
    }

    #[test]
    fn power_log_tail_monotone_to_zero() {
        let u = Profile::PowerLogTail { m: 2.0, eta: 0.5, alpha: 4.0, beta: 2.0, ln_coef: 2.0 }.build(4.0).unwrap();
        let vals: Vec<f64> = (1..=10).map(|k| u.value(10f64.powi(k))).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        assert!(vals[9] < 1e-18);
    }

    #[test]
    fn divergent_tail_rejected() {
        let err = Profile::PowerLogTail { m: 2.0, eta: 0.5, alpha: 2.0, beta: 1.0, ln_coef: 0.0 }.build(4.0);
        assert!(err.is_err());
        let err = Profile::PowerLogTail { m: 2.0, eta: 0.5, alpha: 1.5, beta: 5.0, ln_coef: 0.0 }.build(4.0);
        assert!(err.is_err());
    }

    #[test]
    fn exp_log_over_r_turns_at_e() {
        let u = Profile::ExpLogOverR.build(0.0).unwrap();
        assert!(u.deriv(2.5) > 0.0);
        assert!(u.deriv(3.0) < 0.0);
        assert!(u.deriv(std::f64::consts::E).abs() < 1e-16);
    }
}
