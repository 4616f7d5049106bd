//! File-based workflow: write a smile CSV, reload it, fit, and emit the
//! report and a plot-ready curve.
//!
//! This mirrors what the `svifit` binary does with
//! `simulate`/`fit --report --curve-out`, using the library API directly.
//!
//! ```sh
//! cargo run --example csv_workflow
//! ```

use svifit::diagnostics::compute_metrics;
use svifit::report::{AnchorInfo, FitReport, SmileData};
use svifit::{
    certify, emit_curve, fpi_fit, load_smile, min_point_method_ii, simulate_case, write_smile_csv,
    Anchor, FpiConfig,
};

fn main() -> svifit::Result<()> {
    let dir = std::env::temp_dir().join("svifit_csv_workflow");
    std::fs::create_dir_all(&dir).ok();
    let smile_path = dir.join("case2.csv");
    let report_path = dir.join("fit.json");
    let curve_path = dir.join("curve.csv");

    // write, reload: full-precision floats make this bit-exact
    let (generated, _) = simulate_case(2)?;
    write_smile_csv(&generated, &smile_path)?;
    let smile = load_smile(&smile_path)?;
    assert_eq!(smile, generated);

    let mp = min_point_method_ii(&smile);
    let anchor = Anchor::from_min_point(&mp);
    let cfg = FpiConfig::fixed_iterations(50);
    let started = std::time::Instant::now();
    let (params, trace) = fpi_fit(&smile, &anchor, &cfg)?;
    let wall_time_ns = started.elapsed().as_nanos() as u64;

    let fitted: Vec<f64> = smile.xs().iter().map(|&x| params.eval(x)).collect();
    let metrics = compute_metrics(smile.vs(), &fitted)?;
    let report = FitReport {
        method: "fpi".into(),
        anchor: AnchorInfo::from_min_point(&mp),
        params,
        rase: metrics.rase,
        rmse: metrics.rmse,
        iterations: trace.len() - 1,
        wall_time_ns,
        clamp_events: trace.clamp_counts(),
        certificate: Some(certify(&trace, &smile, &anchor, 0.5, 0.4, 1e-3).summary()),
        theta: None,
        mirrored: None,
        theta_consistent: None,
        trace: Some(trace),
        smile: Some(SmileData::from_smile(&smile)),
    };
    report.write_to(&report_path)?;
    emit_curve(|x| Ok(params.eval(x)), &smile, &curve_path)?;

    println!("smile:  {}", smile_path.display());
    println!("report: {}", report_path.display());
    println!("curve:  {}", curve_path.display());
    println!("rase {:.3e}, rmse {:.3e}, {} iterations", metrics.rase, metrics.rmse, report.iterations);
    Ok(())
}
