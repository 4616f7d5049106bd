//! Command-line interface: `fit`, `simulate`, `compare`, and `certify`.
//!
//! Exit codes: 0 on success, 1 on input problems (bad files, bad flags),
//! 2 on numerical failures (degenerate systems, failed brackets).

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::anchor::{
    min_point_method_i, min_point_method_ii, min_point_method_iii, slope_anchor_method_iip,
    slope_anchor_method_ip, SlopeAnchor,
};
use crate::diagnostics::{certify, compute_metrics, CertificateSummary, ErrorMetrics};
use crate::error::{Error, Result};
use crate::fpi::{default_slope_anchor, fpi_fit, rase_scorer, Anchor, FitTrace, FpiConfig};
use crate::io::{emit_curve, load_smile, write_smile_csv};
use crate::model::{MinPoint, Smile, SviParams};
use crate::qe::{qe_fit, QeConfig};
use crate::report::{AnchorInfo, CompareReport, FitReport, SmileData};
use crate::rotation::fit_rotated;
use crate::sim::simulate_case;

/// Monitor constant α used for report certificates.
const CERT_ALPHA: f64 = 0.5;
/// Monitor contraction target L used for report certificates.
const CERT_CONTRACTION: f64 = 0.4;
/// Candidate draws for the method-III anchor.
const METHOD_III_SAMPLES: usize = 10;

#[derive(Parser)]
#[command(
    name = "svifit",
    version,
    about = "Calibrates five-parameter variance smiles with an anchored fixed-point iteration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a smile from a CSV file.
    Fit(FitArgs),
    /// Generate a synthetic smile from a built-in case.
    Simulate(SimulateArgs),
    /// Run the fixed-point and quasi-explicit methods side by side.
    Compare(CompareArgs),
    /// Re-run convergence certification on a stored trace.
    Certify(CertifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Minimum-point anchored fixed-point iteration.
    Fpi,
    /// Slope-anchored fixed-point iteration (no minimum point needed).
    FpiUniform,
    /// Fixed-point iteration in a rotated frame, for monotone smiles.
    FpiRotated,
    /// Quasi-explicit baseline (Nelder-Mead over (m, sigma)).
    Qe,
}

impl Method {
    fn id(self) -> &'static str {
        match self {
            Method::Fpi => "fpi",
            Method::FpiUniform => "fpi-uniform",
            Method::FpiRotated => "fpi-rotated",
            Method::Qe => "qe",
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input smile CSV (columns x,v).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "fpi")]
    method: Method,
    /// Anchor: auto | I | II | III | analytic:a,b,rho,m,sigma | point:x,v.
    #[arg(long, default_value = "auto")]
    anchor: String,
    /// Refinement step budget.
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Residual-norm stop tolerance; 0 runs the full budget.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Rotation angle in radians (fpi-rotated only).
    #[arg(long, default_value_t = std::f64::consts::PI / 12.0)]
    theta: f64,
    /// Seed for the method-III anchor sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Embed the per-iteration trace (and the observations) in the report.
    #[arg(long)]
    trace: bool,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write a plot-ready fitted curve CSV here.
    #[arg(long)]
    curve_out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Case id, 1 through 4.
    #[arg(long)]
    case: u32,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    /// Anchor for both methods (minimum-point specs only).
    #[arg(long, default_value = "auto")]
    anchor: String,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Residual-norm stop tolerance for the fixed-point run; 0 runs the
    /// full budget (the baseline always runs the full budget).
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    /// A fit report produced with --trace.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = CERT_ALPHA)]
    alpha: f64,
    /// Target contraction factor.
    #[arg(long, default_value_t = CERT_CONTRACTION)]
    contraction: f64,
    /// Coefficient-delta threshold locating the converged tail.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Write the full certificate JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` and runs the requested subcommand, returning the process
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Certify(args) => cmd_certify(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Anchor selection spelled on the command line.
enum AnchorSpec {
    Auto,
    MethodI,
    MethodII,
    MethodIII,
    Analytic(SviParams),
    Point { x: f64, v: f64 },
}

fn parse_anchor_spec(s: &str) -> Result<AnchorSpec> {
    match s {
        "auto" => return Ok(AnchorSpec::Auto),
        "I" | "i" => return Ok(AnchorSpec::MethodI),
        "II" | "ii" => return Ok(AnchorSpec::MethodII),
        "III" | "iii" => return Ok(AnchorSpec::MethodIII),
        _ => {}
    }
    if let Some(rest) = s.strip_prefix("analytic:") {
        let vals = parse_floats(rest, 5, "analytic:a,b,rho,m,sigma")?;
        let p = SviParams::new(vals[0], vals[1], vals[2], vals[3], vals[4])?;
        return Ok(AnchorSpec::Analytic(p));
    }
    if let Some(rest) = s.strip_prefix("point:") {
        let vals = parse_floats(rest, 2, "point:x,v")?;
        return Ok(AnchorSpec::Point {
            x: vals[0],
            v: vals[1],
        });
    }
    Err(Error::InvalidInput(format!(
        "unknown anchor spec '{s}'; expected auto | I | II | III | analytic:a,b,rho,m,sigma | point:x,v"
    )))
}

fn parse_floats(s: &str, expect: usize, usage: &str) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        s.split(',').map(|f| f.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == expect => Ok(v),
        _ => Err(Error::InvalidInput(format!(
            "could not parse '{s}'; expected {usage}"
        ))),
    }
}

fn resolve_min_point_anchor(
    spec: &AnchorSpec,
    smile: &Smile,
    seed: u64,
    cfg: &FpiConfig,
) -> Result<MinPoint> {
    Ok(match spec {
        AnchorSpec::Auto | AnchorSpec::MethodII => min_point_method_ii(smile),
        AnchorSpec::MethodI => min_point_method_i(smile),
        AnchorSpec::MethodIII => {
            min_point_method_iii(smile, METHOD_III_SAMPLES, seed, rase_scorer(smile, cfg))
        }
        AnchorSpec::Analytic(p) => p.min_point()?,
        AnchorSpec::Point { x, v } => MinPoint::user_supplied(*x, *v)?,
    })
}

fn resolve_slope_anchor(spec: &AnchorSpec, smile: &Smile) -> Result<SlopeAnchor> {
    let j = smile.argmin_v();
    match spec {
        AnchorSpec::Auto => default_slope_anchor(smile),
        AnchorSpec::MethodI => slope_anchor_method_ip(smile, j),
        AnchorSpec::MethodII => slope_anchor_method_iip(smile, j),
        AnchorSpec::Analytic(p) => {
            let x = smile.xs()[j];
            Ok(SlopeAnchor {
                x,
                v: p.eval(x),
                slope: p.slope(x),
                source_index: j,
            })
        }
        AnchorSpec::MethodIII => Err(Error::InvalidInput(
            "anchor III applies to minimum-point methods only".into(),
        )),
        AnchorSpec::Point { .. } => Err(Error::InvalidInput(
            "the slope-anchored method needs a slope; point:x,v has none".into(),
        )),
    }
}

fn fpi_config(max_iters: usize, tol: f64) -> FpiConfig {
    if tol > 0.0 {
        FpiConfig {
            max_iters,
            tol,
            ..FpiConfig::default()
        }
    } else {
        FpiConfig::fixed_iterations(max_iters)
    }
}

fn slope_provenance(sa: &SlopeAnchor, smile: &Smile) -> String {
    let n = smile.len();
    if sa.source_index == 0 || sa.source_index + 1 == n {
        "method-I'".to_string()
    } else {
        "method-II'".to_string()
    }
}

struct FitOutcome {
    report: FitReport,
    /// Original-frame evaluator for curve emission.
    eval: Box<dyn Fn(f64) -> Result<f64>>,
}

fn execute_fit(
    method: Method,
    smile: &Smile,
    anchor_spec: &AnchorSpec,
    cfg: &FpiConfig,
    theta: f64,
    seed: u64,
    want_trace: bool,
) -> Result<FitOutcome> {
    match method {
        Method::Fpi | Method::Qe => {
            let mp = resolve_min_point_anchor(anchor_spec, smile, seed, &FpiConfig::default())?;
            let anchor = Anchor::from_min_point(&mp);
            let started = Instant::now();
            let (params, trace) = if method == Method::Fpi {
                fpi_fit(smile, &anchor, cfg)?
            } else {
                let qe_cfg = QeConfig {
                    outer_iters: cfg.max_iters,
                    ..QeConfig::default()
                };
                qe_fit(smile, &mp, &qe_cfg)?
            };
            let wall_time_ns = started.elapsed().as_nanos() as u64;
            let metrics = metrics_for_params(smile, &params)?;
            let certificate =
                Some(certify(&trace, smile, &anchor, CERT_ALPHA, CERT_CONTRACTION, cfg.tol).summary());
            let report = assemble_report(
                method.id(),
                AnchorInfo::from_min_point(&mp),
                params,
                metrics,
                &trace,
                wall_time_ns,
                certificate,
                want_trace.then(|| SmileData::from_smile(smile)),
                want_trace,
                None,
            );
            Ok(FitOutcome {
                report,
                eval: Box::new(move |x| Ok(params.eval(x))),
            })
        }
        Method::FpiUniform => {
            let sa = resolve_slope_anchor(anchor_spec, smile)?;
            let provenance = slope_provenance(&sa, smile);
            let anchor = Anchor::from_slope_anchor(&sa);
            let started = Instant::now();
            let (params, trace) = fpi_fit(smile, &anchor, cfg)?;
            let wall_time_ns = started.elapsed().as_nanos() as u64;
            let metrics = metrics_for_params(smile, &params)?;
            let certificate =
                Some(certify(&trace, smile, &anchor, CERT_ALPHA, CERT_CONTRACTION, cfg.tol).summary());
            let report = assemble_report(
                "fpi-uniform",
                AnchorInfo::slope(sa.x, sa.v, sa.slope, provenance),
                params,
                metrics,
                &trace,
                wall_time_ns,
                certificate,
                want_trace.then(|| SmileData::from_smile(smile)),
                want_trace,
                None,
            );
            Ok(FitOutcome {
                report,
                eval: Box::new(move |x| Ok(params.eval(x))),
            })
        }
        Method::FpiRotated => {
            let started = Instant::now();
            let fit = fit_rotated(smile, theta, cfg)?;
            let wall_time_ns = started.elapsed().as_nanos() as u64;
            if !fit.theta_consistent {
                eprintln!(
                    "warning: theta = {theta} exceeds the admissible bound implied by the fitted slope"
                );
            }
            let fitted = fit.eval_many(smile.xs())?;
            let metrics = compute_metrics(smile.vs(), &fitted)?;
            // the trace lives in the rotated frame; certification against the
            // rotated observations is possible only when they form a valid
            // smile (nonnegative variance), so it is attempted, not required
            let rotated_smile = Smile::new(fit.rotated_points.clone()).ok();
            let rot_anchor = Anchor::MinPoint {
                x: fit.rotated_anchor.x,
                v: fit.rotated_anchor.v,
            };
            let certificate = rotated_smile.as_ref().map(|rs| {
                certify(&fit.trace, rs, &rot_anchor, CERT_ALPHA, CERT_CONTRACTION, cfg.tol)
                    .summary()
            });
            let report = assemble_report(
                "fpi-rotated",
                AnchorInfo::min_point(&fit.rotated_anchor, "rotated-method-II"),
                fit.rotated_params,
                metrics,
                &fit.trace,
                wall_time_ns,
                certificate,
                want_trace.then(|| SmileData::from_points(&fit.rotated_points)),
                want_trace,
                Some((theta, fit.mirrored, fit.theta_consistent)),
            );
            let eval_fit = fit.clone();
            Ok(FitOutcome {
                report,
                eval: Box::new(move |x| eval_fit.eval(x)),
            })
        }
    }
}

fn metrics_for_params(smile: &Smile, params: &SviParams) -> Result<ErrorMetrics> {
    let fitted: Vec<f64> = smile.xs().iter().map(|&x| params.eval(x)).collect();
    compute_metrics(smile.vs(), &fitted)
}

#[allow(clippy::too_many_arguments)]
fn assemble_report(
    method: &str,
    anchor: AnchorInfo,
    params: SviParams,
    metrics: ErrorMetrics,
    trace: &FitTrace,
    wall_time_ns: u64,
    certificate: Option<CertificateSummary>,
    smile: Option<SmileData>,
    want_trace: bool,
    rotation: Option<(f64, bool, bool)>,
) -> FitReport {
    FitReport {
        method: method.to_string(),
        anchor,
        params,
        rase: metrics.rase,
        rmse: metrics.rmse,
        iterations: trace.len().saturating_sub(1),
        wall_time_ns,
        clamp_events: trace.clamp_counts(),
        certificate,
        theta: rotation.map(|r| r.0),
        mirrored: rotation.map(|r| r.1),
        theta_consistent: rotation.map(|r| r.2),
        trace: want_trace.then(|| trace.clone()),
        smile,
    }
}

fn print_report_summary(report: &FitReport) {
    println!("method: {}", report.method);
    println!(
        "anchor: {} {} at ({:.6}, {:.6})",
        report.anchor.kind, report.anchor.provenance, report.anchor.x, report.anchor.v
    );
    let p = &report.params;
    println!(
        "params: a={:.6} b={:.6} rho={:.6} m={:.6} sigma={:.6}",
        p.a, p.b, p.rho, p.m, p.sigma
    );
    println!("rase: {:.6e}  rmse: {:.6e}", report.rase, report.rmse);
    println!(
        "iterations: {}  wall_time: {:.3} ms",
        report.iterations,
        report.wall_time_ns as f64 / 1e6
    );
    if let Some(cert) = &report.certificate {
        match cert.n0 {
            Some(n0) => println!(
                "certificate: n0={n0} tail={} contraction_condition={}",
                cert.tail_len,
                cert.contraction_condition_holds
                    .map(|b| b.to_string())
                    .unwrap_or_else(|| "n/a".to_string())
            ),
            None => println!("certificate: no converged tail located"),
        }
    }
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let smile = load_smile(&args.input)?;
    let spec = parse_anchor_spec(&args.anchor)?;
    if args.method == Method::FpiRotated && !matches!(spec, AnchorSpec::Auto) {
        eprintln!("note: --anchor is ignored by fpi-rotated (it anchors on the rotated data)");
    }
    let cfg = fpi_config(args.max_iters, args.tol);
    let outcome = execute_fit(
        args.method,
        &smile,
        &spec,
        &cfg,
        args.theta,
        args.seed,
        args.trace,
    )?;
    print_report_summary(&outcome.report);
    if let Some(path) = &args.report {
        outcome.report.write_to(path)?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = &args.curve_out {
        emit_curve(|x| (outcome.eval)(x), &smile, path)?;
        println!("curve written to {}", path.display());
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let (smile, params) = simulate_case(args.case)?;
    write_smile_csv(&smile, &args.out)?;
    println!(
        "case {} written to {} ({} points, a={} b={} rho={} m={} sigma={})",
        args.case,
        args.out.display(),
        smile.len(),
        params.a,
        params.b,
        params.rho,
        params.m,
        params.sigma
    );
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let smile = load_smile(&args.input)?;
    let spec = parse_anchor_spec(&args.anchor)?;
    let cfg = fpi_config(args.max_iters, args.tol);

    let fpi_outcome = execute_fit(Method::Fpi, &smile, &spec, &cfg, 0.0, args.seed, false)?;
    let qe_outcome = execute_fit(Method::Qe, &smile, &spec, &cfg, 0.0, args.seed, false)?;

    let fpi = fpi_outcome.report;
    let qe = qe_outcome.report;
    let per_iter = |r: &FitReport| r.wall_time_ns as f64 / r.iterations.max(1) as f64;
    let compare = CompareReport {
        input: args.input.display().to_string(),
        rase_ratio: qe.rase / fpi.rase,
        step_time_ratio: per_iter(&qe) / per_iter(&fpi),
        fpi,
        qe,
    };

    println!("== fixed-point ==");
    print_report_summary(&compare.fpi);
    println!("== quasi-explicit ==");
    print_report_summary(&compare.qe);
    println!(
        "rase ratio (qe/fpi): {:.3e}   step-time ratio (qe/fpi): {:.2}",
        compare.rase_ratio, compare.step_time_ratio
    );
    if let Some(path) = &args.report {
        compare.write_to(path)?;
        println!("comparison written to {}", path.display());
    }
    Ok(())
}

fn cmd_certify(args: &CertifyArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.report).map_err(|e| Error::Io {
        path: args.report.display().to_string(),
        source: e,
    })?;
    let report = FitReport::from_json(&text)?;
    let trace = report.trace.as_ref().ok_or(Error::MissingReportData("a trace"))?;
    let smile_data = report
        .smile
        .as_ref()
        .ok_or(Error::MissingReportData("the observations"))?;
    let smile = smile_data.to_smile()?;
    let anchor = report.anchor.to_anchor();
    let cert = certify(trace, &smile, &anchor, args.alpha, args.contraction, args.delta);
    let summary = cert.summary();
    println!("n0: {:?}", summary.n0);
    println!("tail length: {}", summary.tail_len);
    println!("b lower bound: {:?}", summary.b_lower);
    println!("rho upper bound: {:?}", summary.rho_upper);
    println!("a nonnegative: {:?}", summary.a_nonneg);
    println!("gains (m, sigma): {:?} {:?}", summary.gain_m, summary.gain_sigma);
    println!(
        "contraction condition holds: {:?}  (2L < b_lower: {:?})",
        summary.contraction_condition_holds, summary.contraction_below_b_lower
    );
    println!("applicable: {}", summary.applicable);
    if let Some(path) = &args.out {
        let json = crate::report::to_json_string(&cert)?;
        std::fs::write(path, json.as_bytes()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        println!("certificate written to {}", path.display());
    }
    Ok(())
}

/// Library entry point mirroring the binary: parse `argv` and run.
pub fn run_cli(argv: &[String]) -> i32 {
    run(argv.iter().cloned())
}

impl std::fmt::Debug for AnchorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnchorSpec::Auto => write!(f, "Auto"),
            AnchorSpec::MethodI => write!(f, "MethodI"),
            AnchorSpec::MethodII => write!(f, "MethodII"),
            AnchorSpec::MethodIII => write!(f, "MethodIII"),
            AnchorSpec::Analytic(p) => write!(f, "Analytic({p:?})"),
            AnchorSpec::Point { x, v } => write!(f, "Point({x}, {v})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpi::StopRule;

    #[test]
    fn anchor_specs_parse() {
        assert!(matches!(parse_anchor_spec("auto"), Ok(AnchorSpec::Auto)));
        assert!(matches!(parse_anchor_spec("I"), Ok(AnchorSpec::MethodI)));
        assert!(matches!(parse_anchor_spec("II"), Ok(AnchorSpec::MethodII)));
        assert!(matches!(
            parse_anchor_spec("III"),
            Ok(AnchorSpec::MethodIII)
        ));
        match parse_anchor_spec("analytic:0.5,0.5,-0.5,-0.3,0.5") {
            Ok(AnchorSpec::Analytic(p)) => assert_eq!(p.rho, -0.5),
            other => panic!("unexpected {other:?}"),
        }
        match parse_anchor_spec("point:0.1,0.7") {
            Ok(AnchorSpec::Point { x, v }) => assert_eq!((x, v), (0.1, 0.7)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_anchor_spec("bogus").is_err());
        assert!(parse_anchor_spec("analytic:1,2").is_err());
    }

    #[test]
    fn tol_zero_disables_the_residual_stop() {
        let cfg = fpi_config(50, 0.0);
        assert_eq!(cfg.stop, StopRule::MaxItersOnly);
        let cfg = fpi_config(50, 1e-4);
        assert_eq!(cfg.stop, StopRule::ResidualOrMaxIters);
        assert_eq!(cfg.tol, 1e-4);
    }
}
