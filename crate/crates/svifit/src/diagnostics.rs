//! Error metrics and a numerical convergence-certificate monitor.
//!
//! The monitor evaluates, along a recorded trajectory, the sufficient
//! conditions under which the anchored fixed-point iteration provably
//! contracts: coefficient deltas below a threshold from some step `N₀` on,
//! bounds on the tail (`b` bounded away from zero, `|ρ|` bounded away from
//! one, `a` non-negative), Lipschitz-style gains of the anchor update, drift
//! bounds on the least-squares coefficients, and tail monotonicity of the
//! five parameter sequences. It is a sufficient-condition checker, not a
//! convergence prover: a failed condition says nothing about divergence, and
//! the monitor never enforces anything (market fits routinely violate
//! `a ≥ 0`, which is reported as a flag).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpi::{Anchor, FitTrace};
use crate::linear::{build_design_raw, Beta, DesignMatrix};
use crate::model::Smile;

/// Root average squared error and root maximum squared error of a fit.
///
/// `rase = √(Σ(vᵢ − v̂ᵢ)²/N)`; `rmse = max|vᵢ − v̂ᵢ|` (the root of the
/// maximum squared error, not the usual root-mean-square). `rase ≤ rmse`
/// always, since a mean of squares never exceeds the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub rase: f64,
    pub rmse: f64,
    pub n: usize,
}

/// Computes [`ErrorMetrics`] for observed vs fitted values.
pub fn compute_metrics(observed: &[f64], fitted: &[f64]) -> Result<ErrorMetrics> {
    if observed.len() != fitted.len() {
        return Err(Error::LengthMismatch {
            left: observed.len(),
            right: fitted.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::InvalidInput("metrics need at least one point".into()));
    }
    let n = observed.len();
    let mut sum_sq = 0.0;
    let mut max_abs: f64 = 0.0;
    for i in 0..n {
        let e = observed[i] - fitted[i];
        sum_sq += e * e;
        max_abs = max_abs.max(e.abs());
    }
    Ok(ErrorMetrics {
        rase: (sum_sq / n as f64).sqrt(),
        rmse: max_abs,
        n,
    })
}

/// Lipschitz-style gains of the minimum-point update: how far `(m, σ)` can
/// move per unit change in `(a, b, ρ)` when `b ≥ b_lower`,
/// `|ρ| ≤ rho_upper < 1`, and the anchor variance is `v_anchor`.
///
/// ```text
/// gain_m = (b̲(1 + ρ̄²)v + b̲ρ̄(1 − ρ̄²) + ρ̄(1 − ρ̄²)v) / (b̲²(1 − ρ̄²)²)
/// gain_σ = (ρ̄b̲v + b̲(1 − ρ̄²) + (1 − ρ̄²)v) / (b̲²(1 − ρ̄²)^{3/2})
/// ```
pub fn update_gain_bounds(b_lower: f64, rho_upper: f64, v_anchor: f64) -> Result<(f64, f64)> {
    if b_lower <= 0.0 || b_lower.is_nan() {
        return Err(Error::DomainError(format!(
            "gain bounds need b_lower > 0, got {b_lower}"
        )));
    }
    if !(0.0..1.0).contains(&rho_upper) {
        return Err(Error::DomainError(format!(
            "gain bounds need 0 <= rho_upper < 1, got {rho_upper}"
        )));
    }
    if v_anchor < 0.0 || v_anchor.is_nan() {
        return Err(Error::DomainError(format!(
            "gain bounds need v_anchor >= 0, got {v_anchor}"
        )));
    }
    let r2 = rho_upper * rho_upper;
    let one_minus = 1.0 - r2;
    let gain_m = (b_lower * (1.0 + r2) * v_anchor
        + b_lower * rho_upper * one_minus
        + rho_upper * one_minus * v_anchor)
        / (b_lower * b_lower * one_minus * one_minus);
    let gain_sigma = (rho_upper * b_lower * v_anchor
        + b_lower * one_minus
        + one_minus * v_anchor)
        / (b_lower * b_lower * one_minus.powf(1.5));
    Ok((gain_m, gain_sigma))
}

/// Drift bounds on the three least-squares coefficients per unit coefficient
/// delta, evaluated at one trajectory state.
///
/// With `β¹ = (β₁, 2β₂, β₃)` and `β² = (β₁, β₂, 2β₃)`:
///
/// ```text
/// d₁ = N|β₂|·gₘ + N|β₃|·(gₘ + gσ)
/// d₂ = |X1ᵀ(V − Yβ¹)|·gₘ + |X1ᵀX2·β₃|·(gₘ + gσ) + |β₂| + |β₃|
/// d₃ = |X1ᵀ(V − Yβ²)|·(gₘ + gσ) + |X1ᵀX3·β₂|·gₘ + |β₂| + |β₃|
/// ```
pub fn coefficient_drift_bounds(
    smile: &Smile,
    m: f64,
    sigma: f64,
    beta: &Beta,
    gain_m: f64,
    gain_sigma: f64,
) -> Result<[f64; 3]> {
    let design = build_design_raw(smile.xs(), m, sigma)?;
    Ok(drift_bounds_at(&design, smile.vs(), beta, gain_m, gain_sigma))
}

fn drift_bounds_at(
    design: &DesignMatrix,
    vs: &[f64],
    beta: &Beta,
    gain_m: f64,
    gain_sigma: f64,
) -> [f64; 3] {
    let n = design.nrows() as f64;
    let gm = gain_m;
    let gms = gain_m + gain_sigma;

    let mut ones_resid_b1 = 0.0; // X1ᵀ(V − Yβ¹)
    let mut ones_resid_b2 = 0.0; // X1ᵀ(V − Yβ²)
    let mut sum_x2 = 0.0;
    let mut sum_x3 = 0.0;
    for ((&u, &w), &vi) in design.x2.iter().zip(&design.x3).zip(vs) {
        ones_resid_b1 += vi - (beta.a + 2.0 * beta.b_rho * u + beta.b * w);
        ones_resid_b2 += vi - (beta.a + beta.b_rho * u + 2.0 * beta.b * w);
        sum_x2 += u;
        sum_x3 += w;
    }

    [
        n * beta.b_rho.abs() * gm + n * beta.b.abs() * gms,
        ones_resid_b1.abs() * gm
            + (sum_x2 * beta.b).abs() * gms
            + beta.b_rho.abs()
            + beta.b.abs(),
        ones_resid_b2.abs() * gms
            + (sum_x3 * beta.b_rho).abs() * gm
            + beta.b_rho.abs()
            + beta.b.abs(),
    ]
}

/// Tail behaviour of one parameter sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

/// Relative tolerance under which consecutive values count as equal; keeps
/// last-ulp wobble of a numerically stationary sequence from reading as
/// mixed-direction movement.
const MONOTONE_EPS: f64 = 1e-13;

fn classify(seq: &[f64]) -> Monotonicity {
    let mut up = false;
    let mut down = false;
    for w in seq.windows(2) {
        let tol = MONOTONE_EPS * (1.0 + w[0].abs());
        if w[1] > w[0] + tol {
            up = true;
        } else if w[1] < w[0] - tol {
            down = true;
        }
    }
    match (up, down) {
        (false, false) => Monotonicity::Constant,
        (true, false) => Monotonicity::Increasing,
        (false, true) => Monotonicity::Decreasing,
        (true, true) => Monotonicity::Mixed,
    }
}

/// Tail monotonicity of the five parameter sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub a: Monotonicity,
    pub b: Monotonicity,
    pub rho: Monotonicity,
    pub m: Monotonicity,
    pub sigma: Monotonicity,
}

/// Everything the monitor measured along one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCertificate {
    /// Coefficient-delta threshold used to locate `n0`.
    pub delta: f64,
    pub alpha: f64,
    /// Target contraction factor `L`.
    pub contraction_target: f64,
    /// First step whose `(|Δa|, |Δb|, |Δρ|)` all fall below `delta`;
    /// `None` when no step qualifies.
    pub n0: Option<usize>,
    /// Number of steps in the monitored tail.
    pub tail_len: usize,
    /// Infimum of `b` over the tail.
    pub b_lower: Option<f64>,
    /// Supremum of `|ρ|` over the tail.
    pub rho_upper: Option<f64>,
    /// Whether every tail `a` is non-negative. Reported, never enforced.
    pub a_nonneg: Option<bool>,
    pub gain_m: Option<f64>,
    pub gain_sigma: Option<f64>,
    /// `(|Δa|, |Δb|, |Δρ|)` for every step `n ≥ 1` of the whole trace.
    pub coefficient_deltas: Vec<[f64; 3]>,
    /// Drift bounds per tail step.
    pub drift_bounds: Vec<[f64; 3]>,
    /// Componentwise supremum over the tail of `|(YᵀY)⁻¹·d|`.
    pub update_map_sup: Option<[f64; 3]>,
    /// Whether the supremum stays below `(1 − α)·L`.
    pub contraction_condition_holds: Option<bool>,
    /// Whether `2L < b_lower`.
    pub contraction_below_b_lower: Option<bool>,
    pub monotonicity: Option<MonotonicityReport>,
    /// True when `n0` was found and the tail bounds admit the gain
    /// constants; the contraction flags are meaningful only then.
    pub applicable: bool,
}

/// Compact form of the certificate for embedding in fit reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub delta: f64,
    pub alpha: f64,
    pub contraction_target: f64,
    pub n0: Option<usize>,
    pub tail_len: usize,
    pub b_lower: Option<f64>,
    pub rho_upper: Option<f64>,
    pub a_nonneg: Option<bool>,
    pub gain_m: Option<f64>,
    pub gain_sigma: Option<f64>,
    pub update_map_sup_max: Option<f64>,
    pub contraction_condition_holds: Option<bool>,
    pub contraction_below_b_lower: Option<bool>,
    pub monotonicity: Option<MonotonicityReport>,
    pub applicable: bool,
}

impl ConvergenceCertificate {
    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            delta: self.delta,
            alpha: self.alpha,
            contraction_target: self.contraction_target,
            n0: self.n0,
            tail_len: self.tail_len,
            b_lower: self.b_lower,
            rho_upper: self.rho_upper,
            a_nonneg: self.a_nonneg,
            gain_m: self.gain_m,
            gain_sigma: self.gain_sigma,
            update_map_sup_max: self
                .update_map_sup
                .map(|s| s.iter().copied().fold(0.0, f64::max)),
            contraction_condition_holds: self.contraction_condition_holds,
            contraction_below_b_lower: self.contraction_below_b_lower,
            monotonicity: self.monotonicity,
            applicable: self.applicable,
        }
    }
}

/// Evaluates the convergence monitor on a recorded trajectory.
///
/// `alpha` and `contraction_target` are the monitor's free constants, both
/// in `(0, 1)`; `delta` is the coefficient-delta threshold locating `n0`.
/// The tail window runs from `n0` to the end of the trace.
pub fn certify(
    trace: &FitTrace,
    smile: &Smile,
    anchor: &Anchor,
    alpha: f64,
    contraction_target: f64,
    delta: f64,
) -> ConvergenceCertificate {
    let coefficient_deltas: Vec<[f64; 3]> = (1..trace.len())
        .filter_map(|n| trace.coefficient_delta(n))
        .collect();
    let n0 = coefficient_deltas
        .iter()
        .position(|d| d.iter().all(|&x| x < delta))
        .map(|i| i + 1);

    let mut cert = ConvergenceCertificate {
        delta,
        alpha,
        contraction_target,
        n0,
        tail_len: 0,
        b_lower: None,
        rho_upper: None,
        a_nonneg: None,
        gain_m: None,
        gain_sigma: None,
        coefficient_deltas,
        drift_bounds: Vec::new(),
        update_map_sup: None,
        contraction_condition_holds: None,
        contraction_below_b_lower: None,
        monotonicity: None,
        applicable: false,
    };
    let Some(n0) = n0 else {
        return cert;
    };

    let tail = &trace.steps[n0..];
    cert.tail_len = tail.len();
    let b_lower = tail.iter().map(|s| s.b).fold(f64::INFINITY, f64::min);
    let rho_upper = tail.iter().map(|s| s.rho.abs()).fold(0.0, f64::max);
    cert.b_lower = Some(b_lower);
    cert.rho_upper = Some(rho_upper);
    cert.a_nonneg = Some(tail.iter().all(|s| s.a >= 0.0));

    let series = |f: fn(&crate::fpi::TraceStep) -> f64| -> Vec<f64> {
        tail.iter().map(f).collect()
    };
    cert.monotonicity = Some(MonotonicityReport {
        a: classify(&series(|s| s.a)),
        b: classify(&series(|s| s.b)),
        rho: classify(&series(|s| s.rho)),
        m: classify(&series(|s| s.m_next)),
        sigma: classify(&series(|s| s.sigma_next)),
    });

    let v_anchor = match *anchor {
        Anchor::MinPoint { v, .. } => v,
        Anchor::Slope { v, .. } => v,
    };
    let Ok((gain_m, gain_sigma)) = update_gain_bounds(b_lower, rho_upper, v_anchor) else {
        return cert;
    };
    cert.gain_m = Some(gain_m);
    cert.gain_sigma = Some(gain_sigma);

    let mut sup = [0.0f64; 3];
    for step in tail {
        let Ok(design) = build_design_raw(smile.xs(), step.m, step.sigma) else {
            return cert;
        };
        let beta = Beta {
            a: step.a,
            b_rho: step.b * step.rho,
            b: step.b,
        };
        let bounds = drift_bounds_at(&design, smile.vs(), &beta, gain_m, gain_sigma);
        cert.drift_bounds.push(bounds);

        let normal = normal_matrix(&design);
        let Some(inv) = normal.try_inverse() else {
            return cert;
        };
        let mapped = inv * Vector3::new(bounds[0], bounds[1], bounds[2]);
        for i in 0..3 {
            sup[i] = sup[i].max(mapped[i].abs());
        }
    }
    let sup_max = sup.iter().copied().fold(0.0, f64::max);
    cert.update_map_sup = Some(sup);
    cert.contraction_condition_holds = Some(sup_max < (1.0 - alpha) * contraction_target);
    cert.contraction_below_b_lower = Some(2.0 * contraction_target < b_lower);
    cert.applicable = true;
    cert
}

fn normal_matrix(design: &DesignMatrix) -> Matrix3<f64> {
    let n = design.nrows() as f64;
    let (mut s2, mut s3, mut s22, mut s23, mut s33) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&u, &w) in design.x2.iter().zip(&design.x3) {
        s2 += u;
        s3 += w;
        s22 += u * u;
        s23 += u * w;
        s33 += w * w;
    }
    Matrix3::new(n, s2, s3, s2, s22, s23, s3, s23, s33)
}
