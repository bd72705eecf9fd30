//! Explicit positive solutions on model manifolds above the growth thresholds.
//!
//! Every construction glues an origin piece to an infinity piece at `R₀`,
//! rescales, and is accepted only after grid and weak-form verification.

pub mod change;
pub mod glue;
pub mod profiles;
pub mod regions;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{build_manifold, ManifoldSpec, ModelManifold};
use crate::params::{Params, Region};
use crate::radial::{
    log_grid, verify_inequality, weak_form_suite, RadialFunction, VerificationReport, VerifyOptions, WEAK_TOL,
};

pub use change::{change_identity, change_of_variables, ChangeMap};
pub use glue::{match_ratio, origin_profile_1, origin_profile_2, scan_r0, tau_for, Match, OriginProfile};
pub use profiles::{JTable, Profile};
pub use regions::{existence_bound, nonexistence_bound, recipe, ConstructOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceKind {
    Origin,
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub kind: PieceKind,
    pub lo: f64,
    /// `None` for an unbounded piece.
    pub hi: Option<f64>,
    pub scale: f64,
    pub profile: Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Direct,
    /// `u = v + 1` with `v` built for `p = 0`.
    Shifted,
    /// `u = G⁻¹(v)` for an m-superharmonic `v`.
    ChangeOfVariables,
}

/// Map applied last: `u = T(shift + c₁·U)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `u = w^{1/a}`
    Power { a: f64 },
    InverseChange { p: f64, m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Glue {
    pub r0: f64,
    pub rho0: Option<f64>,
    pub tau: f64,
    pub lambda_origin: Option<f64>,
    pub delta: f64,
    /// Multiplier `c₁`; `None` on the branch that uses `Transform::Power`.
    pub c1: Option<f64>,
    pub shift: f64,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakFormSummary {
    pub window: (f64, f64),
    pub count: usize,
    pub straddling: usize,
    pub failures: usize,
    /// Most negative `margin / (|flux| + |source|)`.
    pub worst_relative_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub c1_value_gap: f64,
    pub c1_deriv_gap: f64,
    pub c1_pass: bool,
    pub positive: bool,
    pub decreasing: bool,
    pub inequality: VerificationReport,
    pub weak_form: WeakFormSummary,
    pub seed: u64,
    pub pass: bool,
}

/// Serializable description of a solution; rebuilding from it is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSpec {
    pub params: Params,
    pub region: Region,
    pub route: Route,
    pub manifold: ManifoldSpec,
    pub pieces: Vec<Piece>,
    pub glue: Glue,
    pub verification: Option<ConstructionReport>,
}

pub const C1_TOL: f64 = 1e-8;
pub const WEAK_COUNT: usize = 20;
pub const WEAK_STRADDLING: usize = 5;
/// Bumps are kept where `r·|(ln S)′| ≤ WEAK_STIFFNESS`; beyond it the integrands are
/// a single spike at the bump edge.
pub const WEAK_STIFFNESS: f64 = 1e6;
pub const POINTS: usize = 400;

pub struct PiecewiseSolution {
    pub spec: SolutionSpec,
    pub manifold: ModelManifold,
    pub origin_piece: RadialFunction,
    pub infinity_piece: RadialFunction,
    base: RadialFunction,
    u: RadialFunction,
}

impl std::fmt::Debug for PiecewiseSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PiecewiseSolution").field("spec", &self.spec).finish()
    }
}

fn piece(spec: &SolutionSpec, kind: PieceKind) -> Result<&Piece> {
    spec.pieces
        .iter()
        .find(|p| p.kind == kind)
        .ok_or_else(|| Error::stage("load", format!("missing {kind:?} piece")))
}

/// `U = τ·origin` on `[0, R₀]` and `infinity` beyond.
fn join(origin: &RadialFunction, infinity: &RadialFunction, r0: f64) -> RadialFunction {
    let (o1, o2, o3, o4) = (origin.clone(), origin.clone(), origin.clone(), origin.clone());
    let (i1, i2, i3, i4) = (infinity.clone(), infinity.clone(), infinity.clone(), infinity.clone());
    RadialFunction::new(
        move |r| if r <= r0 { o1.value(r) } else { i1.value(r) },
        move |r| if r <= r0 { o2.deriv(r) } else { i2.deriv(r) },
        (origin.domain.0, infinity.domain.1),
    )
    .with_logs(
        move |r| if r <= r0 { o3.ln_value(r) } else { i3.ln_value(r) },
        move |r| if r <= r0 { o4.ln_abs_deriv(r) } else { i4.ln_abs_deriv(r) },
    )
    .with_breaks(vec![r0])
}

/// `T(shift + c·U)`
fn finish(base: &RadialFunction, glue: &Glue) -> RadialFunction {
    let c = glue.c1.unwrap_or(1.0);
    let shift = glue.shift;
    let w = if shift == 0.0 {
        base.scaled(c)
    } else {
        let (b1, b2, b3) = (base.clone(), base.clone(), base.clone());
        let lc = c.ln();
        RadialFunction::new(move |r| shift + c * b1.value(r), move |r| c * b2.deriv(r), base.domain)
            .with_logs(move |r| (shift + c * b3.value(r)).ln(), {
                let b = base.clone();
                move |r| lc + b.ln_abs_deriv(r)
            })
            .with_breaks(base.breaks.clone())
    };
    match glue.transform {
        Transform::Identity => w,
        Transform::Power { a } => {
            let (w1, w2, w3, w4) = (w.clone(), w.clone(), w.clone(), w.clone());
            RadialFunction::new(
                move |r| w1.value(r).powf(1.0 / a),
                move |r| w2.value(r).powf(1.0 / a - 1.0) * w2.deriv(r) / a,
                w.domain,
            )
            .with_logs(
                move |r| w3.ln_value(r) / a,
                move |r| -a.ln() + (1.0 / a - 1.0) * w4.ln_value(r) + w4.ln_abs_deriv(r),
            )
            .with_breaks(w.breaks.clone())
        }
        Transform::InverseChange { p, m } => ChangeMap::new(p, m).apply(&w),
    }
}

impl PiecewiseSolution {
    /// Rebuilds every function from the spec.
    pub fn from_spec(spec: SolutionSpec) -> Result<Self> {
        spec.params.validate()?;
        let manifold = build_manifold(&spec.manifold)?;
        let o = piece(&spec, PieceKind::Origin)?;
        let i = piece(&spec, PieceKind::Infinity)?;
        let r0 = spec.glue.r0;
        let origin_piece = o.profile.build(o.lo)?.scaled(o.scale);
        let infinity_piece = i.profile.build(i.lo.min(manifold.r2()))?.scaled(i.scale);
        let base = join(&origin_piece, &infinity_piece, r0);
        let u = finish(&base, &spec.glue);
        Ok(PiecewiseSolution { spec, manifold, origin_piece, infinity_piece, base, u })
    }

    pub fn params(&self) -> &Params {
        &self.spec.params
    }

    pub fn r0(&self) -> f64 {
        self.spec.glue.r0
    }

    /// The assembled solution.
    pub fn u(&self) -> &RadialFunction {
        &self.u
    }

    /// The glued profile before rescaling and transforms.
    pub fn base(&self) -> &RadialFunction {
        &self.base
    }

    /// Parameters the glued profile was built against (differs from `params` for G3).
    pub fn base_params(&self) -> Params {
        match self.spec.route {
            Route::Shifted => Params { p: 0.0, ..self.spec.params },
            _ => self.spec.params,
        }
    }

    pub fn verification(&self) -> Option<&ConstructionReport> {
        self.spec.verification.as_ref()
    }

    pub fn passed(&self) -> bool {
        self.verification().is_some_and(|v| v.pass)
    }

    /// `[10⁻²R₀, 10³R₀]`
    pub fn window(&self) -> (f64, f64) {
        (1e-2 * self.r0(), 1e3 * self.r0())
    }

    /// Relative value and derivative gaps of the two pieces at `R₀`.
    pub fn c1_gaps(&self) -> (f64, f64) {
        let r0 = self.r0();
        let (o, i) = (&self.origin_piece, &self.infinity_piece);
        let value = (o.value(r0) - i.value(r0)).abs() / i.value(r0).abs();
        let deriv = (o.deriv(r0) - i.deriv(r0)).abs() / i.deriv(r0).abs();
        (value, deriv)
    }

    fn weak_window(&self) -> (f64, f64) {
        let (lo, hi) = self.window();
        let stiff = |r: f64| r * self.manifold.ln_s_deriv(r).abs() <= WEAK_STIFFNESS;
        if stiff(hi) {
            return (lo, hi);
        }
        let grid = log_grid(self.r0() * 1.01, hi, 400);
        let cap = grid.iter().copied().take_while(|&r| stiff(r)).last().unwrap_or(self.r0() * 1.01);
        (lo, cap.max(self.r0() * 1.01))
    }

    /// Runs every acceptance check and stores the report in the spec.
    pub fn verify(&mut self, seed: u64) -> Result<&ConstructionReport> {
        let params = self.spec.params;
        let r0 = self.r0();
        let window = self.window();
        let (gv, gd) = self.c1_gaps();
        let c1_pass = gv <= C1_TOL && gd <= C1_TOL;
        let opts = VerifyOptions { points: POINTS, exclude: vec![(r0 - 1e-6, r0 + 1e-6)], ..VerifyOptions::default() };
        let inequality = verify_inequality(&params, &self.manifold, &self.u, window, &opts)?;
        let grid = log_grid(window.0, window.1, POINTS);
        let positive = grid.iter().all(|&r| self.u.value(r) > 0.0);
        let decreasing = grid.iter().all(|&r| self.u.deriv(r) < 0.0);
        let wwin = self.weak_window();
        let suite = weak_form_suite(&params, &self.manifold, &self.u, wwin, r0, WEAK_COUNT, WEAK_STRADDLING, seed, 1.0)?;
        let failures = suite.reports.iter().filter(|(_, _, r)| !r.pass).count();
        let worst = suite
            .reports
            .iter()
            .map(|(_, _, r)| r.margin / (r.flux_integral.abs() + r.source_integral.abs()).max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min);
        let weak_form = WeakFormSummary {
            window: wwin,
            count: suite.reports.len(),
            straddling: WEAK_STRADDLING,
            failures,
            worst_relative_margin: worst,
            pass: suite.pass && suite.reports.len() == WEAK_COUNT && worst >= -WEAK_TOL,
        };
        let pass = c1_pass && positive && decreasing && inequality.pass && weak_form.pass;
        self.spec.verification =
            Some(ConstructionReport { c1_value_gap: gv, c1_deriv_gap: gd, c1_pass, positive, decreasing, inequality, weak_form, seed, pass });
        Ok(self.spec.verification.as_ref().expect("just stored"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.spec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Builds, verifies and returns a solution; a failed verification is an error.
pub fn construct(params: &Params, opts: &ConstructOptions) -> Result<PiecewiseSolution> {
    let spec = recipe(params, opts)?;
    let mut sol = PiecewiseSolution::from_spec(spec)?;
    let rep = sol.verify(opts.seed)?.clone();
    if !rep.pass {
        return Err(Error::stage(
            "verify",
            format!(
                "c1 gaps ({:.2e}, {:.2e}), positive {}, decreasing {}, worst residual {:.3e} at r={:.4e}, weak-form failures {}/{}",
                rep.c1_value_gap,
                rep.c1_deriv_gap,
                rep.positive,
                rep.decreasing,
                rep.inequality.worst_residual,
                rep.inequality.worst_location,
                rep.weak_form.failures,
                rep.weak_form.count
            ),
        ));
    }
    Ok(sol)
}
