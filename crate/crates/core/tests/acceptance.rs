//! One pass/fail line per acceptance criterion; exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use liouville::constructors::{
    change_identity, construct, existence_bound, nonexistence_bound, ConstructOptions, PiecewiseSolution, C1_TOL,
    WEAK_COUNT, WEAK_STRADDLING,
};
use liouville::estimates::{c_coefficients, verify_lemma1, LemmaOptions};
use liouville::manifold::{build_manifold, certify_growth, classical_criteria, ManifoldSpec, Outer, VolumeBound, Verdict};
use liouville::params::{
    admissible_a, classify, cond_ab, critical_growth, h_of_p, in_k_region, in_region, KTag, Params, Region, ALL_REGIONS,
    CRITICAL_LINE_TOL,
};
use liouville::radial::{log_grid, residual, transform_exp_minus_one, RadialFunction};
use liouville::roots::bisect;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond { Ok(ok) } else { Err(fail) }
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

const SIX: [(f64, f64, f64, Region); 6] = [
    (2.0, 2.0, 0.0, Region::G1),
    (2.0, 0.0, 3.0, Region::G2),
    (2.0, -1.0, 1.5, Region::G3),
    (2.0, -1.0, 1.0, Region::G4),
    (2.0, 1.0, 0.0, Region::G5),
    (2.0, -1.0, 0.0, Region::G6),
];

fn region_partition() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut bad_g = 0;
    let mut bad_k = 0;
    let mut off_line = 0;
    let tags = [KTag::K1, KTag::K2, KTag::K3, KTag::K4];
    for m in [1.5, 2.0, 3.0] {
        for _ in 0..100_000 {
            let mut p: f64 = rng.gen_range(-10.0..10.0);
            let mut q: f64 = rng.gen_range(-10.0..10.0);
            // A fifth of the samples sit on a boundary line.
            match rng.gen_range(0..20) {
                0 => q = m - 1.0,
                1 => q = m,
                2 => p = m - 1.0 - q,
                3 => p = 0.0,
                _ => {}
            }
            let params = Params { m, p, q };
            if ALL_REGIONS.iter().filter(|&&r| in_region(&params, r)).count() != 1 {
                bad_g += 1;
            }
            if params.excess().abs() > CRITICAL_LINE_TOL {
                off_line += 1;
                if tags.iter().filter(|&&t| in_k_region(&params, t)).count() != 1 {
                    bad_k += 1;
                }
            }
        }
    }
    let t = start.elapsed();
    let msg = format!("300000 samples, {bad_g} G violations, {bad_k} K violations over {off_line} off-line points, {t:.2?}");
    check(bad_g == 0 && bad_k == 0 && within(t, 5.0), msg.clone(), msg)
}

fn exponent_spots() -> Outcome {
    let ab = |m, p, q| {
        let g = critical_growth(&Params { m, p, q });
        (g.alpha, g.beta)
    };
    let g1 = ab(2.0, 2.0, 0.0) == (Some(4.0), Some(1.0));
    let g3 = ab(2.0, -1.0, 1.5) == (Some(3.0), Some(2.0));
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut g2 = 0;
    for _ in 0..1000 {
        let params = Params { m: 3.0, p: rng.gen_range(-10.0..10.0), q: rng.gen_range(3.0..10.0) };
        let g = critical_growth(&params);
        if classify(&params) == Region::G2 && (g.alpha, g.beta) == (Some(3.0), Some(2.0)) {
            g2 += 1;
        }
    }
    let msg = format!("(2,2,0)->(4,1) {g1}, (2,-1,1.5)->(3,2) {g3}, m=3 G2 points ->(3,2) {g2}/1000");
    check(g1 && g3 && g2 == 1000, msg.clone(), msg)
}

fn h_gate() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for m in [1.5, 2.0, 3.0] {
        let at = h_of_p(m, m - 1.0).map_err(|e| e.to_string())?.h;
        let peak_err = (at - m).abs();
        let grid = log_grid(1e-6, 1e6, 1000);
        let vals: Vec<f64> = grid.iter().map(|&p| h_of_p(m, p).map(|h| h.h)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let signs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).signum()).filter(|&s| s != 0.0).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        let unimodal = signs.first() == Some(&1.0) && signs.last() == Some(&-1.0) && changes == 1;
        let lo = (vals[0] - 1.0).abs();
        let hi = (vals[999] - (m - 1.0)).abs();
        ok &= peak_err <= 1e-12 && unimodal && lo < 1e-3 && hi < 1e-3;
        notes.push(format!("m={m}: |H(m-1)-m|={peak_err:.1e}, unimodal {unimodal}, limits {lo:.1e}/{hi:.1e}"));
    }
    let msg = notes.join("; ");
    check(ok, msg.clone(), msg)
}

fn exact_cancellation() -> Outcome {
    let start = Instant::now();
    let params = Params { m: 2.0, p: 1.0, q: 0.0 };
    let opts = ConstructOptions { iota: Some(2.0), eta: Some(1.0), ..ConstructOptions::default() };
    let sol = construct(&params, &opts).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for r in log_grid(1.0, 30.0, 100) {
        let res = residual(&params, &sol.manifold, sol.u(), r).map_err(|e| e.to_string())?;
        worst = worst.max(res.abs() / (2.0 * r.exp()));
    }
    let t = start.elapsed();
    let msg = format!("max |R[u]|/(2e^r) = {worst:.2e} over 100 radii in [1, 30], R0={:.4}, {t:.2?}", sol.r0());
    check(worst <= 1e-9 && within(t, 1.0), msg.clone(), msg)
}

fn six_constructions() -> (Vec<Result<PiecewiseSolution, String>>, Duration) {
    let start = Instant::now();
    let sols = SIX
        .iter()
        .map(|&(m, p, q, _)| construct(&Params { m, p, q }, &ConstructOptions::default()).map_err(|e| e.to_string()))
        .collect();
    (sols, start.elapsed())
}

fn end_to_end(sols: &[Result<PiecewiseSolution, String>], t: Duration) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (sol, &(m, p, q, region)) in sols.iter().zip(&SIX) {
        let line = match sol {
            Err(e) => {
                ok = false;
                format!("({m},{p},{q}) failed: {e}")
            }
            Ok(sol) => {
                let v = sol.verification().expect("construct stores the report");
                let (gv, gd) = sol.c1_gaps();
                let good = sol.spec.region == region
                    && gv <= C1_TOL
                    && gd <= C1_TOL
                    && v.inequality.pass
                    && v.weak_form.pass
                    && v.weak_form.count == WEAK_COUNT
                    && v.weak_form.straddling == WEAK_STRADDLING
                    && v.pass;
                ok &= good;
                format!(
                    "{region:?} R0={:.3e} gaps {gv:.0e}/{gd:.0e} ineq {} weak {}/{}",
                    sol.r0(),
                    v.inequality.pass,
                    v.weak_form.count - v.weak_form.failures,
                    v.weak_form.count
                )
            }
        };
        notes.push(line);
    }
    ok &= within(t, 60.0);
    let msg = format!("{}; {t:.2?}", notes.join("; "));
    check(ok, msg.clone(), msg)
}

fn certificate_window(bound: &VolumeBound, r2: f64) -> (f64, f64) {
    let lo = (2.0 * r2).max(100.0);
    match bound {
        VolumeBound::PolyLog { .. } => (lo, 1e4 * lo),
        _ => (lo, 100.0 * lo),
    }
}

fn volume_certificates(sols: &[Result<PiecewiseSolution, String>]) -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for (sol, &(m, p, q, region)) in sols.iter().zip(&SIX) {
        let Ok(sol) = sol else {
            ok = false;
            notes.push(format!("{region:?}: no construction"));
            continue;
        };
        let params = Params { m, p, q };
        let bound = existence_bound(&params, &ConstructOptions::default()).map_err(|e| e.to_string())?;
        let window = certificate_window(&bound, sol.manifold.r2());
        let cert = certify_growth(&sol.manifold, bound, window).map_err(|e| e.to_string())?;
        ok &= cert.pass;
        let mut line = format!("{region:?} existence slope {:+.3} {}", cert.tail_slope, if cert.pass { "pass" } else { "FAIL" });
        if matches!(region, Region::G1 | Region::G2) {
            let strict = nonexistence_bound(&params, None).expect("polynomial regions have a bound");
            let c = certify_growth(&sol.manifold, strict, window).map_err(|e| e.to_string())?;
            let exceeds = !c.pass && c.tail_slope > 0.01;
            ok &= exceeds;
            line.push_str(&format!(", nonexistence slope {:+.3} {}", c.tail_slope, if exceeds { "exceeded" } else { "NOT exceeded" }));
        }
        notes.push(line);
    }
    let t = start.elapsed();
    ok &= within(t, 10.0);
    let msg = format!("{}; {t:.2?}", notes.join("; "));
    check(ok, msg.clone(), msg)
}

fn lemma_one(sols: &[Result<PiecewiseSolution, String>]) -> Outcome {
    let sol = sols[0].as_ref().map_err(|e| format!("G1 construction failed: {e}"))?;
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut balls = Vec::new();
    for i in 3..=8u32 {
        let rep = verify_lemma1(sol, 1.0 / i as f64, 50.0, i, &LemmaOptions::default()).map_err(|e| format!("i={i}: {e}"))?;
        worst = worst.max(rep.slack).max(rep.simplified_slack);
        ok &= rep.pass && rep.slack <= 1.0 + 1e-6 && rep.simplified_slack <= 1.0 + 1e-6;
        balls.push(format!("{:.2e}", rep.integrals.ball));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut hits, mut worst_id) = (0, 0.0f64);
    while hits < 1000 {
        let m = [1.5, 2.0, 3.0][rng.gen_range(0..3)];
        let params = Params { m, p: rng.gen_range(-8.0..8.0), q: rng.gen_range(-8.0..8.0) };
        let Ok(iv) = admissible_a(&params) else { continue };
        let hi = if iv.hi.is_finite() { iv.hi } else { iv.lo + 5.0 };
        let a = iv.lo + (hi - iv.lo) * rng.gen_range(0.01..0.99);
        let probe = cond_ab(&params, a, 1.0).exponents;
        let c = cond_ab(&params, a, 2.0 * probe.cutoff_power().max(1.0) + 1.0);
        if !c.holds {
            continue;
        }
        let ex = c.exponents;
        let (r1, r2) = ex.identity_residuals(m);
        let scale = (1.0 + ex.t) * (m + a + 1.0);
        worst_id = worst_id.max(r1.abs() / scale).max(r2.abs() / scale);
        hits += 1;
    }
    ok &= worst_id <= 1e-12;
    let msg = format!(
        "i=3..8 worst slack {worst:.3e}; ball integrals [{}]; identities on 1000 admissible inputs, worst relative residual {worst_id:.1e}",
        balls.join(", ")
    );
    check(ok, msg.clone(), msg)
}

fn criteria_oracle() -> Outcome {
    let (m, p) = (3.0, 2.0);
    let mut agree = 0;
    let mut inconclusive = 0;
    let mut conj = 0;
    let mut notes = Vec::new();
    let alphas = [1.5, 2.0, 2.5, 3.0, 4.0, 5.0];
    let conv = |c: bool| if c { Verdict::Convergent } else { Verdict::Divergent };
    for alpha in alphas {
        let man = build_manifold(&ManifoldSpec::new(2, Outer::PowerLog { alpha, beta: 0.0, c0: None })).map_err(|e| e.to_string())?;
        let c = classical_criteria(&man, m, Some(p));
        let pairs = [
            (c.parabolic_cy.verdict, conv(alpha > 2.0)),
            (c.m_parabolic.verdict, conv(alpha > m)),
            (c.stochastically_complete.verdict, Verdict::Divergent),
        ];
        for (got, want) in pairs {
            if got == Verdict::Inconclusive {
                inconclusive += 1;
            } else if got == want {
                agree += 1;
            } else {
                notes.push(format!("alpha={alpha}: {got:?} vs {want:?}"));
            }
        }
        let ci = c.conjecture_integrals.as_ref().expect("p > 1 requested");
        if ci.agree && ci.first.verdict == conv(alpha > 2.0 * p) {
            conj += 1;
        } else {
            notes.push(format!("alpha={alpha}: conjecture integrals {:?}/{:?}", ci.first.verdict, ci.second.verdict));
        }
    }
    let msg = format!(
        "{agree}/18 verdicts match, {inconclusive} inconclusive; conjecture pair matches on {conj}/6{}",
        if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
    );
    check(agree == 18 && inconclusive == 0 && conj == 6, msg.clone(), msg)
}

fn g6_bookkeeping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut n, mut worst_c1, mut worst_flip) = (0, 0.0f64, 0.0f64);
    while n < 1000 {
        let m = rng.gen_range(1.1..5.0);
        let q = rng.gen_range(-6.0..m - 1.0);
        let p = rng.gen_range(-8.0..m - 1.0 - q);
        let params = Params { m, p, q };
        if classify(&params) != Region::G6 {
            continue;
        }
        let kappa = rng.gen_range(0.0..3.0);
        let c = c_coefficients(&params, kappa).map_err(|e| e.to_string())?;
        worst_c1 = worst_c1.max((c.C1 - (kappa + (m - 1.0 - q) / (p + q - m + 1.0))).abs());
        let c1_at = |k: f64| c_coefficients(&params, k).map(|c| c.C1).unwrap_or(f64::NAN);
        let root = bisect(c1_at, 0.0, 2.0 * c.kappa_star + 1.0, 1e-16).map_err(|e| e.to_string())?;
        worst_flip = worst_flip.max((root - c.kappa_star).abs() / c.kappa_star.max(1.0));
        n += 1;
    }
    let msg = format!("1000 G6 points: worst C1 identity error {worst_c1:.1e}, worst sign-flip offset {worst_flip:.1e}");
    check(worst_c1 <= 1e-14 && worst_flip <= 1e-12, msg.clone(), msg)
}

fn transform_identities() -> Outcome {
    let params = Params { m: 2.0, p: -1.0, q: 1.5 };
    let man = build_manifold(&ManifoldSpec::power_log(3.0, 3.0)).map_err(|e| e.to_string())?;
    let v = RadialFunction::new(|r: f64| r.ln().sqrt(), |r: f64| 0.5 / (r * r.ln().sqrt()), (1.0, f64::INFINITY));
    let a = transform_exp_minus_one(&params, &man, &v, &log_grid(1.5, 1e4, 200)).map_err(|e| e.to_string())?;

    let flat = build_manifold(&ManifoldSpec::power_log(2.0, 0.0).with_joins(1e6, 2e6)).map_err(|e| e.to_string())?;
    let w = RadialFunction::new(|r: f64| 100.0 - r.sqrt(), |r: f64| -0.5 / r.sqrt(), (0.0, 9e3));
    let b = change_identity(&Params { m: 2.0, p: 3.0, q: 2.0 }, &flat, &w, &log_grid(0.5, 5e3, 200)).map_err(|e| e.to_string())?;
    let msg = format!(
        "exp-1: {} samples, {} skipped, max rel {:.1e}; change of variables: {} samples, {} skipped, max rel {:.1e}",
        a.samples, a.skipped, a.max_rel_error, b.samples, b.skipped, b.max_rel_error
    );
    let good = |r: &liouville::radial::IdentityReport| r.pass && r.samples == 200 && r.skipped == 0 && r.max_rel_error <= 1e-8;
    check(good(&a) && good(&b), msg.clone(), msg)
}

fn run(n: usize, f: impl FnOnce() -> Outcome) -> bool {
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let what = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", what.unwrap_or_default()))
    });
    match res {
        Ok(msg) => {
            println!("criterion {n}: PASS {msg}");
            true
        }
        Err(msg) => {
            println!("criterion {n}: FAIL {msg}");
            false
        }
    }
}

fn main() -> ExitCode {
    let (sols, t) = six_constructions();
    let results = [
        run(1, region_partition),
        run(2, exponent_spots),
        run(3, h_gate),
        run(4, exact_cancellation),
        run(5, || end_to_end(&sols, t)),
        run(6, || volume_certificates(&sols)),
        run(7, || lemma_one(&sols)),
        run(8, criteria_oracle),
        run(9, g6_bookkeeping),
        run(10, transform_identities),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
