//! Region taxonomy and exponent arithmetic on `(m, p, q)`.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Tolerance used to decide whether a point sits on the line `p + q = m - 1`
/// for the K-partition.
pub const CRITICAL_LINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub m: f64,
    pub p: f64,
    pub q: f64,
}

impl Params {
    pub fn new(m: f64, p: f64, q: f64) -> Result<Self> {
        let params = Params { m, p, q };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.p.is_finite() && self.q.is_finite()) {
            return Err(Error::Params(format!("non-finite entry in {self}")));
        }
        if self.m <= 1.0 {
            return Err(Error::Params(format!("m must exceed 1, got {}", self.m)));
        }
        Ok(())
    }

    /// `p + q - (m - 1)`, the signed distance (along p) to the critical line.
    pub fn excess(&self) -> f64 {
        (self.p + self.q) - (self.m - 1.0)
    }

    /// `p + q - m + 1` as it appears in the exponent formulas.
    pub fn denom(&self) -> f64 {
        self.p + self.q - self.m + 1.0
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(m={}, p={}, q={})", self.m, self.p, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    G1,
    G2,
    G3,
    G4,
    G5,
    G6,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Sign data shared by all region predicates. Computing the differences once
/// keeps the six predicates mutually exclusive in floating point.
#[derive(Debug, Clone, Copy)]
struct Signs {
    p: f64,
    d: f64,
    e: f64,
    f: f64,
}

impl Signs {
    fn of(params: &Params) -> Self {
        Signs {
            p: params.p,
            d: params.excess(),
            e: params.q - (params.m - 1.0),
            f: params.q - params.m,
        }
    }
}

/// Membership predicate for a single region.
pub fn in_region(params: &Params, region: Region) -> bool {
    let s = Signs::of(params);
    match region {
        Region::G1 => s.p >= 0.0 && s.d > 0.0 && s.f < 0.0,
        Region::G2 => s.f >= 0.0,
        Region::G3 => s.p < 0.0 && s.e > 0.0 && s.f < 0.0,
        Region::G4 => s.d < 0.0 && s.e == 0.0,
        Region::G5 => s.d == 0.0 && s.e <= 0.0,
        Region::G6 => s.d < 0.0 && s.e < 0.0,
    }
}

pub const ALL_REGIONS: [Region; 6] =
    [Region::G1, Region::G2, Region::G3, Region::G4, Region::G5, Region::G6];

pub fn classify(params: &Params) -> Region {
    let s = Signs::of(params);
    if s.f >= 0.0 {
        Region::G2
    } else if s.e > 0.0 {
        if s.p >= 0.0 {
            Region::G1
        } else {
            Region::G3
        }
    } else if s.d > 0.0 {
        Region::G1
    } else if s.d == 0.0 {
        Region::G5
    } else if s.e == 0.0 {
        Region::G4
    } else {
        Region::G6
    }
}

/// Smallest distance to any of the lines that bound the regions.
pub fn boundary_distance(params: &Params) -> f64 {
    let Params { m, p, q } = *params;
    [(q - m).abs(), (q - (m - 1.0)).abs(), (p + q - (m - 1.0)).abs(), p.abs()]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KTag {
    K1,
    K2,
    K3,
    K4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KRegion {
    pub tag: Option<KTag>,
    pub on_critical_line: bool,
}

pub fn in_k_region(params: &Params, tag: KTag) -> bool {
    let s = Signs::of(params);
    match tag {
        KTag::K1 => s.d < 0.0 && s.e <= 0.0,
        KTag::K2 => s.p >= 0.0 && s.d > 0.0 && s.e <= 0.0,
        KTag::K3 => s.d > 0.0 && s.e > 0.0,
        KTag::K4 => s.p < 0.0 && s.e > 0.0 && s.d < 0.0,
    }
}

pub fn k_classify(params: &Params) -> KRegion {
    let s = Signs::of(params);
    if s.d.abs() <= CRITICAL_LINE_TOL {
        return KRegion { tag: None, on_critical_line: true };
    }
    let tag = match (s.d > 0.0, s.e > 0.0) {
        (false, false) => KTag::K1,
        (true, false) => KTag::K2,
        (true, true) => KTag::K3,
        (false, true) => KTag::K4,
    };
    KRegion { tag: Some(tag), on_critical_line: false }
}

/// Open interval `(lo, hi)`; `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

impl OpenInterval {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

/// Admissible test powers `a`, intersected with `a > 0`.
pub fn admissible_a(params: &Params) -> Result<OpenInterval> {
    let k = k_classify(params);
    let Params { m, p, q } = *params;
    let pivot = || p * (1.0 - m) / (q - m + 1.0);
    match k.tag {
        None => Err(Error::NoAdmissibleA("no admissible a on p+q=m-1".into())),
        Some(KTag::K1) => Ok(OpenInterval { lo: m - 1.0, hi: f64::INFINITY }),
        Some(KTag::K2) => Ok(OpenInterval { lo: 0.0, hi: m - 1.0 }),
        Some(KTag::K3) => Ok(OpenInterval { lo: pivot().max(0.0), hi: m - 1.0 }),
        Some(KTag::K4) => Ok(OpenInterval { lo: m - 1.0, hi: pivot() }),
    }
}

/// The exponents attached to a test power `a` in the Caccioppoli estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaExponents {
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub t: f64,
    pub gamma: f64,
    pub hoelder_rho: f64,
}

impl LemmaExponents {
    pub fn new(params: &Params, a: f64, b: f64) -> Self {
        let Params { m, p, q } = *params;
        let num = m * p + q + a * (q - m);
        LemmaExponents {
            a,
            b,
            s: num / ((m - 1.0) * p + a * (q - m + 1.0)),
            t: num / (p + q - a),
            gamma: (p + q - a) / (m - 1.0 - a),
            hoelder_rho: (p + q - a) / (p + q - m + 1.0),
        }
    }

    /// Residuals of `t(m-1) - mt/s = m - t` and `-at + t(a+1)/s = -a + t - 1`.
    pub fn identity_residuals(&self, m: f64) -> (f64, f64) {
        let (a, s, t) = (self.a, self.s, self.t);
        let r1 = t * (m - 1.0) - m * t / s - (m - t);
        let r2 = -a * t + t * (a + 1.0) / s - (-a + t - 1.0);
        (r1, r2)
    }

    /// Exponent `t·ρ` carried by `|∇φ|` after Hölder.
    pub fn cutoff_power(&self) -> f64 {
        self.t * self.hoelder_rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondAb {
    pub holds: bool,
    pub exponents: LemmaExponents,
    pub failures: Vec<String>,
}

/// Full check of the admissibility conditions on `(a, b)`, with diagnostics.
pub fn cond_ab(params: &Params, a: f64, b: f64) -> CondAb {
    let ex = LemmaExponents::new(params, a, b);
    let Params { m, p, q } = *params;
    let mut failures = Vec::new();
    let denoms = [
        ("s", (m - 1.0) * p + a * (q - m + 1.0)),
        ("t", p + q - a),
        ("gamma", m - 1.0 - a),
        ("rho", p + q - m + 1.0),
    ];
    for (name, d) in denoms {
        if d == 0.0 {
            failures.push(format!("denominator of {name} vanishes"));
        }
    }
    if !(a > 0.0) {
        failures.push(format!("a={a} must be positive"));
    }
    if !(b > 0.0) {
        failures.push(format!("b={b} must be positive"));
    }
    let checks = [
        ("s > 1", ex.s > 1.0),
        ("t > 1", ex.t > 1.0),
        ("gamma > 1", ex.gamma > 1.0),
        ("rho > 1", ex.hoelder_rho > 1.0),
        ("b > (mp+q+a(q-m))/(p+q-m+1)", b > (m * p + q + a * (q - m)) / (p + q - m + 1.0)),
        ("b >= t*rho", b >= ex.cutoff_power()),
    ];
    for (name, ok) in checks {
        if !ok {
            failures.push(format!("{name} fails"));
        }
    }
    CondAb { holds: failures.is_empty(), exponents: ex, failures }
}

pub fn check_cond_ab(params: &Params, a: f64, b: f64) -> bool {
    cond_ab(params, a, b).holds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthKind {
    PolynomialLog,
    PolynomialAnyAlpha,
    Exponential,
    ExpRLogR,
}

/// Sharp volume-growth threshold below which no positive solution exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthThreshold {
    pub kind: GrowthKind,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub kappa_sup: Option<f64>,
    /// G3 only: the log exponent `1/(q-m+1)` used by the existence side.
    pub beta_existence: Option<f64>,
}

pub fn critical_growth(params: &Params) -> GrowthThreshold {
    let Params { m, p, q } = *params;
    let poly = |alpha: f64, beta: f64| GrowthThreshold {
        kind: GrowthKind::PolynomialLog,
        alpha: Some(alpha),
        beta: Some(beta),
        kappa_sup: None,
        beta_existence: None,
    };
    match classify(params) {
        Region::G1 => {
            let d = params.denom();
            poly((m * p + q) / d, (m - 1.0) / d)
        }
        Region::G2 => poly(m, m - 1.0),
        Region::G3 => {
            let d = q - m + 1.0;
            GrowthThreshold { beta_existence: Some(1.0 / d), ..poly(q / d, (m - 1.0) / d) }
        }
        Region::G4 => GrowthThreshold {
            kind: GrowthKind::PolynomialAnyAlpha,
            alpha: None,
            beta: None,
            kappa_sup: None,
            beta_existence: None,
        },
        Region::G5 => GrowthThreshold {
            kind: GrowthKind::Exponential,
            alpha: None,
            beta: None,
            kappa_sup: Some((m - 1.0).min(1.0) / (2.0 * std::f64::consts::E)),
            beta_existence: None,
        },
        Region::G6 => GrowthThreshold {
            kind: GrowthKind::ExpRLogR,
            alpha: None,
            beta: None,
            kappa_sup: Some((m - 1.0 - q) / (m - 1.0 - p - q)),
            beta_existence: None,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HValue {
    pub h: f64,
    pub eta_opt: f64,
}

/// `H(p) = ((m-1)/p)^{p/(p+1)} + (m-1)((m-1)/p)^{-1/(p+1)}`, the smallest
/// admissible rate `ι` for the exponential G5 profile.
pub fn h_of_p(m: f64, p: f64) -> Result<HValue> {
    if !(m > 1.0) {
        return Err(Error::Params(format!("m must exceed 1, got {m}")));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Params(format!("H(p) needs p > 0, got {p}; p = 0 uses iota > 1")));
    }
    let ratio = (m - 1.0) / p;
    let h = ratio.powf(p / (p + 1.0)) + (m - 1.0) * ratio.powf(-1.0 / (p + 1.0));
    Ok(HValue { h, eta_opt: (p / (m - 1.0)).powf(1.0 / (p + 1.0)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pr(m: f64, p: f64, q: f64) -> Params {
        Params::new(m, p, q).unwrap()
    }

    #[test]
    fn region_examples() {
        assert_eq!(classify(&pr(2.0, 2.0, 0.0)), Region::G1);
        assert_eq!(classify(&pr(2.0, 0.5, 0.5)), Region::G5);
        assert_eq!(classify(&pr(2.0, -1.0, 1.5)), Region::G3);
        assert_eq!(classify(&pr(3.0, 0.0, 2.0)), Region::G5);
        assert_eq!(classify(&pr(2.0, 0.0, 3.0)), Region::G2);
        assert_eq!(classify(&pr(2.0, -1.0, 1.0)), Region::G4);
        assert_eq!(classify(&pr(2.0, 1.0, 0.0)), Region::G5);
        assert_eq!(classify(&pr(2.0, -1.0, 0.0)), Region::G6);
    }

    #[test]
    fn rejects_bad_m() {
        assert!(Params::new(1.0, 0.0, 0.0).is_err());
        assert!(Params::new(2.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn k_examples() {
        assert_eq!(k_classify(&pr(2.0, 2.0, 0.0)).tag, Some(KTag::K2));
        assert_eq!(k_classify(&pr(2.0, -1.0, 1.5)).tag, Some(KTag::K4));
        let crit = k_classify(&pr(2.0, 0.5, 0.5));
        assert!(crit.on_critical_line && crit.tag.is_none());
    }

    #[test]
    fn admissible_examples() {
        let i = admissible_a(&pr(2.0, 2.0, 0.0)).unwrap();
        assert_eq!((i.lo, i.hi), (0.0, 1.0));
        let i = admissible_a(&pr(2.0, -1.0, 1.5)).unwrap();
        assert_relative_eq!(i.lo, 1.0);
        assert_relative_eq!(i.hi, 2.0);
        let i = admissible_a(&pr(2.0, -0.2, 1.5)).unwrap();
        assert_relative_eq!(i.lo, 0.4, epsilon = 1e-15);
        assert_relative_eq!(i.hi, 1.0);
        let err = admissible_a(&pr(2.0, 0.5, 0.5)).unwrap_err();
        assert_eq!(err.to_string(), "no admissible a on p+q=m-1");
    }

    #[test]
    fn cond_ab_examples() {
        let g1 = pr(2.0, 2.0, 0.0);
        assert!(check_cond_ab(&g1, 0.5, 100.0));
        assert!(!check_cond_ab(&g1, 0.5, 1.0));
        let c = cond_ab(&g1, 1.0, 100.0);
        assert!(!c.holds);
        assert!(c.failures.iter().any(|f| f.contains("gamma")));
    }

    #[test]
    fn growth_examples() {
        let t = critical_growth(&pr(2.0, 2.0, 0.0));
        assert_eq!((t.alpha, t.beta), (Some(4.0), Some(1.0)));
        let t = critical_growth(&pr(3.0, -1.0, 4.0));
        assert_eq!((t.alpha, t.beta), (Some(3.0), Some(2.0)));
        let t = critical_growth(&pr(2.0, -1.0, 0.0));
        assert_eq!(t.kind, GrowthKind::ExpRLogR);
        assert_eq!(t.kappa_sup, Some(0.5));
        let t = critical_growth(&pr(2.0, -1.0, 1.5));
        assert_eq!((t.alpha, t.beta, t.beta_existence), (Some(3.0), Some(2.0), Some(2.0)));
        let t = critical_growth(&pr(1.5, 0.25, 0.25));
        assert_relative_eq!(t.kappa_sup.unwrap(), 0.5 / (2.0 * std::f64::consts::E));
        assert_eq!(critical_growth(&pr(2.0, -1.0, 1.0)).kind, GrowthKind::PolynomialAnyAlpha);
    }

    #[test]
    fn g1_semilinear_thresholds() {
        for p in [1.5, 2.0, 3.0, 5.0] {
            let t = critical_growth(&pr(2.0, p, 0.0));
            assert_eq!(t.alpha.unwrap(), 2.0 * p / (p - 1.0));
            assert_eq!(t.beta.unwrap(), 1.0 / (p - 1.0));
        }
    }

    #[test]
    fn h_examples() {
        assert_relative_eq!(h_of_p(2.0, 1.0).unwrap().h, 2.0, epsilon = 1e-14);
        assert_relative_eq!(h_of_p(3.0, 2.0).unwrap().h, 3.0, epsilon = 1e-14);
        assert!((h_of_p(2.0, 1e-6).unwrap().h - 1.0).abs() < 1e-4);
        assert!(h_of_p(2.0, 0.0).is_err());
        assert!(h_of_p(2.0, -1.0).is_err());
        assert_relative_eq!(h_of_p(2.0, 1.0).unwrap().eta_opt, 1.0);
    }

    #[test]
    fn h_unimodal() {
        for m in [1.5, 2.0, 3.0] {
            let n = 1000;
            let grid: Vec<f64> = (1..=n).map(|k| 0.01 * (1000.0f64).powf(k as f64 / n as f64)).collect();
            let vals: Vec<f64> = grid.iter().map(|&p| h_of_p(m, p).unwrap().h).collect();
            for k in 1..n {
                if grid[k] < m - 1.0 {
                    assert!(vals[k] > vals[k - 1], "not increasing at p={}", grid[k]);
                } else if grid[k - 1] > m - 1.0 {
                    assert!(vals[k] < vals[k - 1], "not decreasing at p={}", grid[k]);
                }
            }
        }
    }

    fn params_strategy() -> impl Strategy<Value = Params> {
        (prop_oneof![Just(1.5), Just(2.0), Just(3.0), 1.05f64..6.0], -8.0f64..8.0, -8.0f64..8.0)
            .prop_map(|(m, p, q)| Params { m, p, q })
    }

    proptest! {
        #[test]
        fn exactly_one_region(params in params_strategy()) {
            let hits = ALL_REGIONS.iter().filter(|&&r| in_region(&params, r)).count();
            prop_assert_eq!(hits, 1);
            prop_assert!(in_region(&params, classify(&params)));
        }

        #[test]
        fn exactly_one_k_region(params in params_strategy()) {
            prop_assume!(params.excess().abs() > CRITICAL_LINE_TOL);
            let tags = [KTag::K1, KTag::K2, KTag::K3, KTag::K4];
            let hits = tags.iter().filter(|&&t| in_k_region(&params, t)).count();
            prop_assert_eq!(hits, 1);
            let k = k_classify(&params);
            prop_assert!(in_k_region(&params, k.tag.unwrap()));
        }

        #[test]
        fn admissible_interval_nonempty_and_works(params in params_strategy(), u in 0.01f64..0.99) {
            prop_assume!(params.excess().abs() > 1e-6);
            prop_assume!((params.q - params.m + 1.0).abs() > 1e-6);
            let iv = admissible_a(&params).unwrap();
            prop_assert!(iv.lo < iv.hi);
            let lo = iv.lo.max(0.0);
            let hi = if iv.hi.is_finite() { iv.hi } else { lo + 10.0 };
            let a = lo + u * (hi - lo);
            let ex = LemmaExponents::new(&params, a, 1.0);
            let b = 10.0 * ex.cutoff_power().max(1.0);
            let c = cond_ab(&params, a, b);
            prop_assert!(c.holds, "{} a={} failures={:?}", params, a, c.failures);
        }

        #[test]
        fn g1_alpha_exceeds_m(m in 1.05f64..5.0, p in 0.0f64..8.0, frac in 0.001f64..0.999) {
            let lo = (m - 1.0 - p).max(-8.0);
            let q = lo + frac * (m - lo);
            let params = Params { m, p, q };
            prop_assume!(classify(&params) == Region::G1);
            prop_assert!(critical_growth(&params).alpha.unwrap() > m);
        }

        #[test]
        fn lemma_identities(params in params_strategy(), a in 0.01f64..6.0) {
            let ex = LemmaExponents::new(&params, a, 1.0);
            prop_assume!(ex.s.is_finite() && ex.t.is_finite() && ex.s.abs() > 1e-3 && ex.t.abs() < 1e6);
            let (r1, r2) = ex.identity_residuals(params.m);
            let scale = 1.0 + ex.t.abs() * (1.0 + a) + params.m;
            prop_assert!(r1.abs() <= 1e-12 * scale * (1.0 + 1.0 / ex.s.abs()));
            prop_assert!(r2.abs() <= 1e-12 * scale * (1.0 + 1.0 / ex.s.abs()));
        }
    }
}
