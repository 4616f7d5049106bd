//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them all).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svifit::anchor::{slope_anchor_method_iip, slope_anchor_method_ip};
use svifit::diagnostics::{certify, compute_metrics};
use svifit::fpi::{fit_rase, fixed_point_step_min, fixed_point_step_slope, fpi_fit};
use svifit::linear::{build_design, normal_equation_residual, normal_rhs_scale, Beta};
use svifit::qe::{qe_fit, QeConfig};
use svifit::report::{AnchorInfo, FitReport, SmileData};
use svifit::rotation::{fit_rotated, map_params_through_rotation, rotate_point};
use svifit::sim::{reference_grid, simulate_case};
use svifit::{min_point_method_ii, Anchor, FpiConfig, QuadraticFit, Smile, SviParams};

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Criterion 1: the four reference cases, 50 fixed-point iterations seeded
/// with the analytic minimum point, recover every parameter to 1e-6 with
/// RASE at most 1e-8, in under a second per case.
#[test]
fn criterion_1_reference_cases_analytic_anchor() {
    let mut ok = true;
    let mut detail = String::new();
    for id in 1..=4 {
        let (smile, truth) = simulate_case(id).unwrap();
        let anchor = Anchor::from_min_point(&truth.min_point().unwrap());
        let started = Instant::now();
        let (fitted, _) = fpi_fit(&smile, &anchor, &FpiConfig::fixed_iterations(50)).unwrap();
        let elapsed = started.elapsed();
        let param_err = fitted.max_abs_diff(&truth);
        let rase = fit_rase(&smile, &fitted);
        let case_ok = param_err <= 1e-6 && rase <= 1e-8 && elapsed.as_secs_f64() < 1.0;
        ok &= case_ok;
        detail.push_str(&format!(
            " case{id}: param_err={param_err:.2e} rase={rase:.2e} ({:.1} ms)",
            elapsed.as_secs_f64() * 1e3
        ));
    }
    println!("criterion 1 (FPI, analytic anchor, 50 iters): {}{detail}", status(ok));
    assert!(ok, "{detail}");
}

/// Criterion 2: the same cases anchored at the quadratic-vertex estimate
/// must reach RASE 1e-3.
///
/// Case 2 cannot meet this bound: the vertex estimate on the 0.1-spaced grid
/// sits 8.2e-3 from the true minimum in x, and even the ideal constrained
/// fit at that anchor has RASE 1.10e-3 (the iteration converges to 1.16e-3,
/// within 6% of that ideal). The bound is asserted as stated and the case-2
/// failure is expected; see the fitted numbers in the printed line.
#[test]
fn criterion_2_reference_cases_estimated_anchor() {
    let mut ok = true;
    let mut detail = String::new();
    for id in 1..=4 {
        let (smile, _) = simulate_case(id).unwrap();
        let mp = min_point_method_ii(&smile);
        let anchor = Anchor::from_min_point(&mp);
        let (fitted, _) = fpi_fit(&smile, &anchor, &FpiConfig::fixed_iterations(50)).unwrap();
        let rase = fit_rase(&smile, &fitted);
        ok &= rase <= 1e-3;
        detail.push_str(&format!(" case{id}: rase={rase:.4e}"));
    }
    println!(
        "criterion 2 (FPI, method-II anchor, rase <= 1e-3): {}{detail}",
        status(ok)
    );
    assert!(ok, "{detail}");
}

/// Criterion 3: on every case the 50-step fixed-point fit beats the 50-step
/// quasi-explicit fit, whose RASE lands between 1e-7 and 1e-1.
#[test]
fn criterion_3_method_ordering() {
    let mut ok = true;
    let mut detail = String::new();
    for id in 1..=4 {
        let (smile, truth) = simulate_case(id).unwrap();
        let mp = truth.min_point().unwrap();
        let (fpi_params, _) = fpi_fit(
            &smile,
            &Anchor::from_min_point(&mp),
            &FpiConfig::fixed_iterations(50),
        )
        .unwrap();
        let (qe_params, _) = qe_fit(&smile, &mp, &QeConfig::default()).unwrap();
        let fpi_rase = fit_rase(&smile, &fpi_params);
        let qe_rase = fit_rase(&smile, &qe_params);
        let case_ok = fpi_rase < qe_rase && (1e-7..=1e-1).contains(&qe_rase);
        ok &= case_ok;
        detail.push_str(&format!(" case{id}: fpi={fpi_rase:.2e} qe={qe_rase:.2e}"));
    }
    println!("criterion 3 (50-step ordering fpi < qe): {}{detail}", status(ok));
    assert!(ok, "{detail}");
}

/// Criterion 4: 500 quasi-explicit outer steps on case 1 bring every
/// parameter within 5e-3 of the generator and RASE under 1e-3.
#[test]
fn criterion_4_qe_long_run() {
    let (smile, truth) = simulate_case(1).unwrap();
    let mp = truth.min_point().unwrap();
    let cfg = QeConfig {
        outer_iters: 500,
        ..QeConfig::default()
    };
    let (fitted, _) = qe_fit(&smile, &mp, &cfg).unwrap();
    let param_err = fitted.max_abs_diff(&truth);
    let rase = fit_rase(&smile, &fitted);
    let ok = param_err <= 5e-3 && rase <= 1e-3;
    println!(
        "criterion 4 (QE 500 steps on case 1): {} param_err={param_err:.2e} rase={rase:.2e}",
        status(ok)
    );
    assert!(ok);
}

/// Criterion 5: the degenerate curve (skew −1) fitted through a π/12
/// rotation for 50 iterations lands in the demo error windows.
#[test]
fn criterion_5_rotation_demo() {
    let p = SviParams::new(0.5, 0.5, -1.0, -0.3, 0.5).unwrap();
    let smile = Smile::new(reference_grid().into_iter().map(|x| (x, p.eval(x))).collect()).unwrap();
    let fit = fit_rotated(
        &smile,
        std::f64::consts::PI / 12.0,
        &FpiConfig::fixed_iterations(50),
    )
    .unwrap();
    let fitted = fit.eval_many(smile.xs()).unwrap();
    let m = compute_metrics(smile.vs(), &fitted).unwrap();
    let ok = (1.26e-5..=1.26e-3).contains(&m.rase) && (1.98e-5..=1.98e-3).contains(&m.rmse);
    println!(
        "criterion 5 (rotation demo windows): {} rase={:.4e} rmse={:.4e}",
        status(ok),
        m.rase,
        m.rmse
    );
    assert!(ok, "rase={} rmse={}", m.rase, m.rmse);
}

/// Criterion 6: a fixed-point iteration costs at most a fifth of a
/// quasi-explicit outer step on case 1.
#[test]
fn criterion_6_speed_ordering() {
    let (smile, truth) = simulate_case(1).unwrap();
    let mp = truth.min_point().unwrap();
    let anchor = Anchor::from_min_point(&mp);
    let fpi_cfg = FpiConfig::fixed_iterations(50);
    let qe_cfg = QeConfig::default();

    // a few repetitions, keeping the fastest, to damp scheduler noise
    let mut fpi_best = f64::INFINITY;
    let mut qe_best = f64::INFINITY;
    for _ in 0..5 {
        let t = Instant::now();
        let (_, trace) = fpi_fit(&smile, &anchor, &fpi_cfg).unwrap();
        fpi_best = fpi_best.min(t.elapsed().as_secs_f64() / (trace.len() - 1) as f64);
        let t = Instant::now();
        let (_, trace) = qe_fit(&smile, &mp, &qe_cfg).unwrap();
        qe_best = qe_best.min(t.elapsed().as_secs_f64() / (trace.len() - 1) as f64);
    }
    let ratio = qe_best / fpi_best;
    let ok = fpi_best <= qe_best / 5.0;
    println!(
        "criterion 6 (speed, qe/fpi per-step ratio >= 5): {} ratio={ratio:.1} \
         (fpi {:.2} us/iter, qe {:.2} us/iter)",
        status(ok),
        fpi_best * 1e6,
        qe_best * 1e6
    );
    assert!(ok, "ratio {ratio}");
}

/// Criterion 7: the case-1 trajectory's parameter estimates after steps 10
/// and 11 differ by at most 0.01 in every component.
#[test]
fn criterion_7_convergence_deltas() {
    let (smile, truth) = simulate_case(1).unwrap();
    let anchor = Anchor::from_min_point(&truth.min_point().unwrap());
    let (_, trace) = fpi_fit(&smile, &anchor, &FpiConfig::fixed_iterations(50)).unwrap();
    let p10 = trace.params_after(10).unwrap().as_array();
    let p11 = trace.params_after(11).unwrap().as_array();
    let mut ok = true;
    let mut detail = String::new();
    for (name, (a, b)) in ["a", "b", "rho", "m", "sigma"]
        .iter()
        .zip(p10.iter().zip(p11.iter()))
    {
        let d = (a - b).abs();
        ok &= d <= 0.01;
        detail.push_str(&format!(" |d{name}|={d:.4}"));
    }
    println!("criterion 7 (step 10->11 deltas <= 0.01): {}{detail}", status(ok));
    assert!(ok, "{detail}");
}

/// Criterion 8: the property suite.
#[test]
fn criterion_8_property_suite() {
    let mut all = true;
    let mut lines: Vec<String> = Vec::new();
    let mut check = |name: &str, ok: bool| {
        all &= ok;
        lines.push(format!("  - {name}: {}", status(ok)));
    };

    // fixed-point consistency at convergence (relative residual <= 1e-8)
    {
        let (smile, truth) = simulate_case(3).unwrap();
        let mp = truth.min_point().unwrap();
        let (fitted, trace) = fpi_fit(
            &smile,
            &Anchor::from_min_point(&mp),
            &FpiConfig::fixed_iterations(50),
        )
        .unwrap();
        let n = trace.len();
        let converged = trace
            .params_after(n - 2)
            .unwrap()
            .max_abs_diff(&trace.params_after(n - 1).unwrap())
            < 1e-10;
        let u = fixed_point_step_min(mp.x, mp.v, fitted.a, fitted.b, fitted.rho, 1e-8);
        let resid = ((u.m - fitted.m).abs() / (1.0 + fitted.m.abs()))
            .max((u.sigma - fitted.sigma).abs() / (1.0 + fitted.sigma.abs()));
        check("fixed-point consistency at convergence", converged && resid <= 1e-8);
    }

    // per-step normal-equation optimality (<= 1e-8 scaled)
    {
        let (smile, truth) = simulate_case(1).unwrap();
        let anchor = Anchor::from_min_point(&truth.min_point().unwrap());
        let (_, trace) = fpi_fit(&smile, &anchor, &FpiConfig::fixed_iterations(50)).unwrap();
        let mut worst: f64 = 0.0;
        for step in &trace.steps {
            let design = build_design(&smile, step.m, step.sigma).unwrap();
            let beta = Beta {
                a: step.a,
                b_rho: step.b * step.rho,
                b: step.b,
            };
            let scaled = normal_equation_residual(&design, smile.vs(), &beta)
                / normal_rhs_scale(&design, smile.vs());
            worst = worst.max(scaled);
        }
        check("per-step normal-equation optimality", worst <= 1e-8);
    }

    // slope-anchored update recovers (m, sigma) exactly on curve data
    {
        let (_, truth) = simulate_case(1).unwrap();
        let x = 0.2;
        let u = fixed_point_step_slope(
            x,
            truth.eval(x),
            truth.slope(x),
            truth.a,
            truth.b,
            truth.rho,
            1e-12,
        );
        check(
            "slope-anchor identity on exact data",
            (u.m - truth.m).abs() <= 1e-10 && (u.sigma - truth.sigma).abs() <= 1e-10,
        );
    }

    // rotation parameter-map invariance at 1e-6
    {
        let p = SviParams::new(0.5, 0.5, -1.0, -0.3, 0.5).unwrap();
        let theta = std::f64::consts::PI / 12.0;
        let mapped = map_params_through_rotation(&p, theta)
            .unwrap()
            .params()
            .unwrap();
        let worst = reference_grid()
            .into_iter()
            .map(|x| {
                let (xr, vr) = rotate_point(x, p.eval(x), theta);
                (vr - mapped.eval(xr)).abs()
            })
            .fold(0.0, f64::max);
        check("rotation parameter-map invariance", worst <= 1e-6);
    }

    // rase <= rmse on random error vectors
    {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ok = (0..200).all(|_| {
            let n = rng.gen_range(1..40);
            let obs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let fit: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let m = compute_metrics(&obs, &fit).unwrap();
            m.rase <= m.rmse + 1e-15
        });
        check("rase <= rmse", ok);
    }

    // quadratic-vertex estimator exact on quadratics
    {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ok = (0..100).all(|_| {
            let c1 = rng.gen_range(0.1..4.0);
            let xv = rng.gen_range(-1.0..1.0);
            let vv = rng.gen_range(0.0..2.0);
            let h = rng.gen_range(0.1..0.7);
            let pts: Vec<(f64, f64)> = (-2..=2)
                .map(|k| {
                    let x = xv + k as f64 * h;
                    (x, c1 * (x - xv).powi(2) + vv)
                })
                .collect();
            let s = Smile::new(pts).unwrap();
            let mp = min_point_method_ii(&s);
            (mp.x - xv).abs() < 1e-9 && (mp.v - vv).abs() < 1e-9
        });
        check("method-II exact on quadratics", ok);
    }

    // slope estimators exact on linear/quadratic data
    {
        let lin = Smile::new(vec![(0.0, 1.0), (0.4, 1.8), (1.0, 3.0)]).unwrap();
        let a1 = slope_anchor_method_ip(&lin, 1).unwrap();
        let quad_pts: Vec<(f64, f64)> = (-1..=1)
            .map(|k| {
                let x = k as f64 * 0.5;
                (x, 1.5 * x * x - 0.3 * x + 0.7)
            })
            .collect();
        let quad = Smile::new(quad_pts.clone()).unwrap();
        let exact = QuadraticFit::through(quad_pts[0], quad_pts[1], quad_pts[2]);
        let a2 = slope_anchor_method_iip(&quad, 1).unwrap();
        check(
            "slope estimators exact on linear/quadratic",
            (a1.slope - 2.0).abs() < 1e-12 && (a2.slope - exact.slope_at(0.0)).abs() < 1e-12,
        );
    }

    // analytic minimum against the dense grid-search oracle
    {
        let (_, truth) = simulate_case(1).unwrap();
        let mp = truth.min_point().unwrap();
        let mut best = (f64::INFINITY, 0.0);
        let mut x = -1.0;
        while x <= 1.0 {
            let v = truth.eval(x);
            if v < best.0 {
                best = (v, x);
            }
            x += 1e-6;
        }
        check(
            "analytic minimum matches grid search",
            (mp.x - best.1).abs() <= 1e-5 && (mp.v - best.0).abs() <= 1e-5,
        );
    }

    // determinism: identical runs produce identical traces and reports
    {
        let (smile, _) = simulate_case(2).unwrap();
        let mp = min_point_method_ii(&smile);
        let anchor = Anchor::from_min_point(&mp);
        let cfg = FpiConfig::fixed_iterations(50);
        let run = || {
            let (params, trace) = fpi_fit(&smile, &anchor, &cfg).unwrap();
            let rase = fit_rase(&smile, &params);
            let report = FitReport {
                method: "fpi".into(),
                anchor: AnchorInfo::from_min_point(&mp),
                params,
                rase,
                rmse: rase,
                iterations: trace.len() - 1,
                wall_time_ns: 0,
                clamp_events: trace.clamp_counts(),
                certificate: Some(
                    certify(&trace, &smile, &anchor, 0.5, 0.4, 1e-3).summary(),
                ),
                theta: None,
                mirrored: None,
                theta_consistent: None,
                trace: Some(trace),
                smile: Some(SmileData::from_smile(&smile)),
            };
            report.to_json().unwrap()
        };
        check("determinism (bit-identical reports)", run() == run());
    }

    let ok = all;
    println!("criterion 8 (property suite): {}", status(ok));
    for line in &lines {
        println!("{line}");
    }
    assert!(ok, "{}", lines.join("\n"));
}

/// Criterion 9: the market-table numbers are not reproducible from the
/// inputs available, so the substitute is asserted instead: a CSV round
/// trip is exact, and a noisy synthetic smile calibrates to RASE 2e-3 with
/// a located converged tail.
#[test]
fn criterion_9_market_substitute() {
    // CSV round trip: emit, reload, refit; the reloaded fit is identical
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("case2.csv");
    let (smile, _) = simulate_case(2).unwrap();
    svifit::write_smile_csv(&smile, &path).unwrap();
    let reloaded = svifit::load_smile(&path).unwrap();
    let round_trip_exact = reloaded == smile;
    let mp = min_point_method_ii(&smile);
    let anchor = Anchor::from_min_point(&mp);
    let cfg = FpiConfig::fixed_iterations(50);
    let (p_mem, _) = fpi_fit(&smile, &anchor, &cfg).unwrap();
    let (p_csv, _) = fpi_fit(&reloaded, &anchor, &cfg).unwrap();
    let refit_identical = p_mem.max_abs_diff(&p_csv) <= 1e-12;

    // noisy market-like smile: case 2 plus uniform noise of amplitude 1e-3
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let noisy_pts: Vec<(f64, f64)> = smile
        .xs()
        .iter()
        .zip(smile.vs())
        .map(|(&x, &v)| (x, v + rng.gen_range(-1e-3..=1e-3)))
        .collect();
    let noisy = Smile::new(noisy_pts).unwrap();
    let mp = min_point_method_ii(&noisy);
    let anchor = Anchor::from_min_point(&mp);
    let (fitted, trace) = fpi_fit(&noisy, &anchor, &FpiConfig::fixed_iterations(100)).unwrap();
    let rase = fit_rase(&noisy, &fitted);
    let cert = certify(&trace, &noisy, &anchor, 0.5, 0.4, 0.01);
    let ok = round_trip_exact && refit_identical && rase <= 2e-3 && cert.n0.is_some();
    println!(
        "criterion 9 (csv round trip + noisy smile): {} round_trip={round_trip_exact} \
         refit_identical={refit_identical} rase={rase:.4e} n0={:?}",
        status(ok),
        cert.n0
    );
    assert!(ok);
}
