//! Anchored fixed-point calibration.
//!
//! Each iteration alternates two explicit half-steps:
//!
//! 1. solve the linear least-squares problem for `(a, bρ, b)` at the current
//!    `(m, σ)` (see [`crate::linear`]);
//! 2. pin `(m, σ)` back through the anchor. With a minimum-point anchor
//!    `(x_min, v_min)`:
//!
//!    ```text
//!    m = x_min + ρ(v_min − a)/(b(1 − ρ²)),   σ = (v_min − a)/(b√(1 − ρ²)),
//!    ```
//!
//!    and with a slope anchor `(x, v, v_x)`:
//!
//!    ```text
//!    m = x − (v − a)(v_x − bρ)/(bρ·v_x + b²(1 − ρ²)),
//!    σ = (v − a)√(b² − (v_x − bρ)²)/(bρ·v_x + b²(1 − ρ²)).
//!    ```
//!
//! The slope form needs no minimum point, so it also covers monotone smiles
//! (`ρ² = 1`); with `v_x = 0` it reduces to the minimum-point form. The
//! iteration transits infeasible intermediate states on real data, so the
//! updates clamp rather than fail, and every clamp is recorded in the trace.

use serde::{Deserialize, Serialize};

use crate::anchor::{slope_anchor_method_ip, slope_anchor_method_iip, SlopeAnchor};
use crate::diagnostics::compute_metrics;
use crate::error::{Error, Result};
use crate::linear::{
    beta_to_abr, build_design_raw, lsq_solve, Beta, DesignMatrix, ProjectionFlags,
};
use crate::model::{MinPoint, Smile, SviParams};

/// Margin keeping the clamped anchor slope strictly inside `(−b, b)` around
/// `bρ`.
const SLOPE_MARGIN: f64 = 1e-10;
/// Magnitude floor for the slope-update denominator.
const DENOM_FLOOR: f64 = 1e-12;
/// Componentwise parameter delta under which the iteration counts as stalled.
const STALL_EPS: f64 = 1e-14;
/// Number of consecutive stalled deltas that stop the iteration.
const STALL_STEPS: usize = 3;

/// The datum the iteration pins `(m, σ)` through.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Anchor {
    /// A minimum point `(x_min, v_min)`.
    MinPoint { x: f64, v: f64 },
    /// An observation with its estimated slope.
    Slope { x: f64, v: f64, slope: f64 },
}

impl Anchor {
    pub fn from_min_point(mp: &MinPoint) -> Self {
        Anchor::MinPoint { x: mp.x, v: mp.v }
    }

    pub fn from_slope_anchor(sa: &SlopeAnchor) -> Self {
        Anchor::Slope {
            x: sa.x,
            v: sa.v,
            slope: sa.slope,
        }
    }

    /// Starting `(m₀, σ₀)`: the anchor coordinates themselves.
    fn initial(&self) -> (f64, f64) {
        match *self {
            Anchor::MinPoint { x, v } => (x, v),
            Anchor::Slope { x, v, .. } => (x, v),
        }
    }

    fn validate(&self, require_nonneg_v: bool) -> Result<()> {
        let (x, v, s) = match *self {
            Anchor::MinPoint { x, v } => (x, v, 0.0),
            Anchor::Slope { x, v, slope } => (x, v, slope),
        };
        if !x.is_finite() || !v.is_finite() || !s.is_finite() {
            return Err(Error::InvalidInput(format!(
                "anchor fields must be finite, got ({x}, {v}, {s})"
            )));
        }
        if require_nonneg_v && matches!(self, Anchor::MinPoint { .. }) && v < 0.0 {
            return Err(Error::InvalidInput(format!(
                "minimum-point anchor needs v >= 0, got {v}"
            )));
        }
        Ok(())
    }
}

/// When the iteration stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Stop at `n ≥ M`, at `L(n) ≤ δ`, or when the parameters stall.
    ResidualOrMaxIters,
    /// Run exactly `M` refinement steps regardless of the residual.
    MaxItersOnly,
}

/// Iteration configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpiConfig {
    /// Refinement step budget `M`.
    pub max_iters: usize,
    /// Residual-norm tolerance `δ`.
    pub tol: f64,
    /// Lower clamp for every σ the iteration produces.
    pub sigma_floor: f64,
    pub stop: StopRule,
    /// Overrides the anchor-derived starting `(m₀, σ₀)` when set.
    pub initial: Option<(f64, f64)>,
}

impl Default for FpiConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-3,
            sigma_floor: 1e-8,
            stop: StopRule::ResidualOrMaxIters,
            initial: None,
        }
    }
}

impl FpiConfig {
    /// Runs exactly `n` refinement steps, ignoring the residual tolerance.
    pub fn fixed_iterations(n: usize) -> Self {
        Self {
            max_iters: n,
            stop: StopRule::MaxItersOnly,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        if self.tol <= 0.0 || self.tol.is_nan() {
            return Err(Error::InvalidInput(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.sigma_floor <= 0.0 || self.sigma_floor.is_nan() {
            return Err(Error::InvalidInput(format!(
                "sigma_floor must be positive, got {}",
                self.sigma_floor
            )));
        }
        Ok(())
    }
}

/// Clamp and projection events of a single step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFlags {
    /// σ hit the configured floor.
    pub sigma_clamped: bool,
    /// The solved wing slope was floored at its feasibility minimum.
    pub b_floored: bool,
    /// The solved skew was projected into (−1, 1).
    pub rho_projected: bool,
    /// The anchor slope was pulled inside the attainable band.
    pub slope_clamped: bool,
    /// The slope-update denominator was pushed away from zero.
    pub denominator_clamped: bool,
}

impl StepFlags {
    pub(crate) fn with_projection(mut self, p: ProjectionFlags) -> Self {
        self.b_floored |= p.b_floored;
        self.rho_projected |= p.rho_projected;
        self
    }

    pub fn any(&self) -> bool {
        self.sigma_clamped
            || self.b_floored
            || self.rho_projected
            || self.slope_clamped
            || self.denominator_clamped
    }
}

/// One refinement step: the design point it consumed, the coefficients it
/// solved, the residual norm, and the anchor-updated `(m, σ)` it handed to
/// the next step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Design shift used by this step's solve.
    pub m: f64,
    /// Design width used by this step's solve.
    pub sigma: f64,
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    /// `L(n) = ‖V − Yβ‖₂` at this step's solve.
    pub residual_norm: f64,
    /// Anchor update produced from this step's `(a, b, ρ)`.
    pub m_next: f64,
    pub sigma_next: f64,
    pub flags: StepFlags,
}

/// Totals of clamp events over a whole trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampCounts {
    pub sigma_clamped: u32,
    pub b_floored: u32,
    pub rho_projected: u32,
    pub slope_clamped: u32,
    pub denominator_clamped: u32,
}

/// Full per-iteration record of a fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub steps: Vec<TraceStep>,
}

impl FitTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&TraceStep> {
        self.steps.last()
    }

    /// The parameter estimate as it stands once step `n` has completed, i.e.
    /// the solved `(a, b, ρ)` together with the `(m, σ)` the step's anchor
    /// update produced. This is the per-step state a convergence plot of the
    /// five sequences displays.
    pub fn params_after(&self, n: usize) -> Option<SviParams> {
        self.steps.get(n).map(|s| SviParams {
            a: s.a,
            b: s.b,
            rho: s.rho,
            m: s.m_next,
            sigma: s.sigma_next,
        })
    }

    /// Componentwise `(|Δa|, |Δb|, |Δρ|)` between steps `n−1` and `n`.
    pub fn coefficient_delta(&self, n: usize) -> Option<[f64; 3]> {
        if n == 0 || n >= self.steps.len() {
            return None;
        }
        let (p, q) = (&self.steps[n - 1], &self.steps[n]);
        Some([
            (q.a - p.a).abs(),
            (q.b - p.b).abs(),
            (q.rho - p.rho).abs(),
        ])
    }

    pub fn clamp_counts(&self) -> ClampCounts {
        let mut c = ClampCounts::default();
        for s in &self.steps {
            c.sigma_clamped += s.flags.sigma_clamped as u32;
            c.b_floored += s.flags.b_floored as u32;
            c.rho_projected += s.flags.rho_projected as u32;
            c.slope_clamped += s.flags.slope_clamped as u32;
            c.denominator_clamped += s.flags.denominator_clamped as u32;
        }
        c
    }

    /// Final parameters: the last solve's coefficients at the design point
    /// that produced them.
    pub fn final_params(&self) -> Option<SviParams> {
        self.steps.last().map(|s| SviParams {
            a: s.a,
            b: s.b,
            rho: s.rho,
            m: s.m,
            sigma: s.sigma,
        })
    }

    fn stalled(&self) -> bool {
        if self.steps.len() < STALL_STEPS + 1 {
            return false;
        }
        let n = self.steps.len();
        (n - STALL_STEPS..n).all(|i| {
            let p = self.params_after(i - 1).unwrap();
            let q = self.params_after(i).unwrap();
            p.max_abs_diff(&q) < STALL_EPS
        })
    }
}

/// Result of one anchor update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointUpdate {
    pub m: f64,
    pub sigma: f64,
    pub flags: StepFlags,
}

/// Minimum-point update of `(m, σ)` from `(a, b, ρ)`. σ is clamped to
/// `sigma_floor` from below (the raw value goes negative whenever `a`
/// overshoots `v_min`).
pub fn fixed_point_step_min(
    x_min: f64,
    v_min: f64,
    a: f64,
    b: f64,
    rho: f64,
    sigma_floor: f64,
) -> FixedPointUpdate {
    debug_assert!(b > 0.0 && rho.abs() < 1.0);
    let one_minus_rho_sq = 1.0 - rho * rho;
    let m = x_min + rho * (v_min - a) / (b * one_minus_rho_sq);
    let sigma_raw = (v_min - a) / (b * one_minus_rho_sq.sqrt());
    let mut flags = StepFlags::default();
    let sigma = if sigma_raw < sigma_floor {
        flags.sigma_clamped = true;
        sigma_floor
    } else {
        sigma_raw
    };
    FixedPointUpdate { m, sigma, flags }
}

/// Slope-anchored update of `(m, σ)` from `(a, b, ρ)`.
///
/// `v_x − bρ` is pulled inside `±b(1 − 1e-10)` so the square root stays real,
/// and the denominator is kept at least `1e-12` in magnitude; both clamps are
/// reported. With `slope = 0` the result equals [`fixed_point_step_min`] on
/// `(x, v)`.
pub fn fixed_point_step_slope(
    x: f64,
    v: f64,
    slope: f64,
    a: f64,
    b: f64,
    rho: f64,
    sigma_floor: f64,
) -> FixedPointUpdate {
    debug_assert!(b > 0.0 && rho.abs() < 1.0);
    let mut flags = StepFlags::default();

    let excess_raw = slope - b * rho;
    let excess_limit = b * (1.0 - SLOPE_MARGIN);
    let excess = if excess_raw.abs() > excess_limit {
        flags.slope_clamped = true;
        excess_limit.copysign(excess_raw)
    } else {
        excess_raw
    };

    let denom_raw = b * rho * slope + b * b * (1.0 - rho * rho);
    let denom = if denom_raw.abs() < DENOM_FLOOR {
        flags.denominator_clamped = true;
        if denom_raw == 0.0 {
            DENOM_FLOOR
        } else {
            DENOM_FLOOR.copysign(denom_raw)
        }
    } else {
        denom_raw
    };

    let m = x - (v - a) * excess / denom;
    let sigma_raw = (v - a) * (b * b - excess * excess).sqrt() / denom;
    let sigma = if sigma_raw < sigma_floor {
        flags.sigma_clamped = true;
        sigma_floor
    } else {
        sigma_raw
    };
    FixedPointUpdate { m, sigma, flags }
}

/// True when the trace satisfies the configured stop rule: the step budget
/// is exhausted, the residual fell to `δ` (residual rule only), or the
/// parameters stalled for several consecutive steps.
pub fn default_stop(trace: &FitTrace, cfg: &FpiConfig) -> bool {
    let Some(last) = trace.steps.last() else {
        return false;
    };
    let n = trace.steps.len() - 1;
    if n >= cfg.max_iters {
        return true;
    }
    match cfg.stop {
        StopRule::MaxItersOnly => false,
        StopRule::ResidualOrMaxIters => last.residual_norm <= cfg.tol || trace.stalled(),
    }
}

/// Runs the anchored fixed-point calibration on a smile.
pub fn fpi_fit(smile: &Smile, anchor: &Anchor, cfg: &FpiConfig) -> Result<(SviParams, FitTrace)> {
    anchor.validate(true)?;
    fpi_fit_raw(smile.xs(), smile.vs(), anchor, cfg)
}

pub(crate) fn fpi_fit_raw(
    xs: &[f64],
    vs: &[f64],
    anchor: &Anchor,
    cfg: &FpiConfig,
) -> Result<(SviParams, FitTrace)> {
    cfg.validate()?;
    anchor.validate(false)?;

    let (m0, sigma0_raw) = cfg.initial.unwrap_or_else(|| anchor.initial());
    let mut init_flags = StepFlags::default();
    let mut m = m0;
    let mut sigma = if sigma0_raw < cfg.sigma_floor {
        init_flags.sigma_clamped = true;
        cfg.sigma_floor
    } else {
        sigma0_raw
    };

    let mut trace = FitTrace::default();
    loop {
        let design: DesignMatrix = build_design_raw(xs, m, sigma)?;
        let (beta, residual_norm): (Beta, f64) = lsq_solve(&design, vs)?;
        let (a, b, rho, projection) = beta_to_abr(&beta);
        let update = match *anchor {
            Anchor::MinPoint { x, v } => {
                fixed_point_step_min(x, v, a, b, rho, cfg.sigma_floor)
            }
            Anchor::Slope { x, v, slope } => {
                fixed_point_step_slope(x, v, slope, a, b, rho, cfg.sigma_floor)
            }
        };
        let mut flags = update.flags.with_projection(projection);
        if trace.is_empty() {
            flags.sigma_clamped |= init_flags.sigma_clamped;
        }
        trace.steps.push(TraceStep {
            m,
            sigma,
            a,
            b,
            rho,
            residual_norm,
            m_next: update.m,
            sigma_next: update.sigma,
            flags,
        });
        if default_stop(&trace, cfg) {
            break;
        }
        m = update.m;
        sigma = update.sigma;
    }

    let params = trace.final_params().expect("at least one step ran");
    Ok((params, trace))
}

/// Default slope anchor for the uniform (slope-anchored) mode: the argmin
/// observation, slope from the interpolating quadratic when the argmin is
/// interior and from one-sided neighbour copying on the boundary.
pub fn default_slope_anchor(smile: &Smile) -> Result<SlopeAnchor> {
    let j = smile.argmin_v();
    slope_anchor_for_index(smile, j)
}

/// Slope anchor at an explicit observation index, quadratic where possible.
pub fn slope_anchor_for_index(smile: &Smile, j: usize) -> Result<SlopeAnchor> {
    if j == 0 || j + 1 >= smile.len() {
        slope_anchor_method_ip(smile, j)
    } else {
        slope_anchor_method_iip(smile, j)
    }
}

/// Fit-quality scorer for candidate minimum points: the root average squared
/// error of a full fixed-point calibration anchored at the candidate.
/// Candidates the fit rejects score infinitely bad.
pub fn rase_scorer<'a>(smile: &'a Smile, cfg: &'a FpiConfig) -> impl Fn(f64, f64) -> f64 + 'a {
    move |x: f64, v: f64| {
        let anchor = Anchor::MinPoint { x, v };
        match fpi_fit(smile, &anchor, cfg) {
            Ok((params, _)) => {
                let fitted: Vec<f64> = smile.xs().iter().map(|&xi| params.eval(xi)).collect();
                match compute_metrics(smile.vs(), &fitted) {
                    Ok(metrics) => metrics.rase,
                    Err(_) => f64::INFINITY,
                }
            }
            Err(_) => f64::INFINITY,
        }
    }
}

/// RASE of a parameter set against a smile.
pub fn fit_rase(smile: &Smile, params: &SviParams) -> f64 {
    let fitted: Vec<f64> = smile.xs().iter().map(|&x| params.eval(x)).collect();
    compute_metrics(smile.vs(), &fitted)
        .map(|m| m.rase)
        .unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::simulate_case;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn min_step_is_stationary_at_the_true_parameters() {
        let (_, p) = simulate_case(1).unwrap();
        let mp = p.min_point().unwrap();
        let u = fixed_point_step_min(mp.x, mp.v, p.a, p.b, p.rho, 1e-8);
        assert_abs_diff_eq!(u.m, -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(u.sigma, 0.5, epsilon = 1e-12);
        assert!(!u.flags.any());
    }

    #[test]
    fn min_step_simplifies_for_zero_skew() {
        let u = fixed_point_step_min(0.2, 0.8, 0.3, 2.0, 0.0, 1e-8);
        assert_abs_diff_eq!(u.m, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(u.sigma, (0.8 - 0.3) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn min_step_clamps_sigma_when_a_overshoots() {
        // raw sigma is negative, so the floor fires; with rho = 0 the shift
        // is unaffected
        let u = fixed_point_step_min(0.2, 0.8, 0.9, 1.0, 0.0, 1e-8);
        assert_eq!(u.sigma, 1e-8);
        assert!(u.flags.sigma_clamped);
        assert_abs_diff_eq!(u.m, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn slope_step_with_zero_slope_matches_min_step() {
        let (a, b, rho) = (0.4, 0.7, -0.3);
        let min = fixed_point_step_min(0.1, 0.6, a, b, rho, 1e-8);
        let slope = fixed_point_step_slope(0.1, 0.6, 0.0, a, b, rho, 1e-8);
        assert_abs_diff_eq!(min.m, slope.m, epsilon = 1e-14);
        assert_abs_diff_eq!(min.sigma, slope.sigma, epsilon = 1e-14);
    }

    #[test]
    fn slope_step_identity_on_exact_curve_data() {
        let (_, p) = simulate_case(1).unwrap();
        let x = 0.2;
        let u = fixed_point_step_slope(x, p.eval(x), p.slope(x), p.a, p.b, p.rho, 1e-8);
        assert_abs_diff_eq!(u.m, -0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(u.sigma, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn slope_step_clamps_out_of_band_slopes() {
        // attainable slopes lie in (b(rho-1), b(rho+1)) = (-0.65, 0.35)
        let u = fixed_point_step_slope(0.0, 0.5, 2.0, 0.1, 0.5, -0.3, 1e-8);
        assert!(u.flags.slope_clamped);
        assert!(u.sigma >= 1e-8);
        assert!(u.m.is_finite());
    }

    #[test]
    fn fit_on_case1_recovers_the_generator() {
        let (smile, p) = simulate_case(1).unwrap();
        let anchor = Anchor::from_min_point(&p.min_point().unwrap());
        let cfg = FpiConfig::fixed_iterations(50);
        let (fitted, trace) = fpi_fit(&smile, &anchor, &cfg).unwrap();
        assert_eq!(trace.len(), 51);
        assert!(fitted.max_abs_diff(&p) < 1e-6);
        assert!(fit_rase(&smile, &fitted) <= 1e-8);
    }

    #[test]
    fn fit_on_case4_reaches_machine_level_error() {
        let (smile, p) = simulate_case(4).unwrap();
        let anchor = Anchor::from_min_point(&p.min_point().unwrap());
        let cfg = FpiConfig::fixed_iterations(50);
        let (fitted, _) = fpi_fit(&smile, &anchor, &cfg).unwrap();
        assert!(fit_rase(&smile, &fitted) <= 1e-10);
    }

    #[test]
    fn seeding_at_the_true_shift_is_stationary() {
        let (smile, p) = simulate_case(1).unwrap();
        let anchor = Anchor::from_min_point(&p.min_point().unwrap());
        let cfg = FpiConfig {
            initial: Some((p.m, p.sigma)),
            stop: StopRule::MaxItersOnly,
            max_iters: 10,
            ..FpiConfig::default()
        };
        let (_, trace) = fpi_fit(&smile, &anchor, &cfg).unwrap();
        // beta is exact at step 0 and every later (m, sigma) stays put
        let s0 = &trace.steps[0];
        assert_abs_diff_eq!(s0.a, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s0.b, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s0.rho, -0.5, epsilon = 1e-12);
        for s in &trace.steps {
            assert_abs_diff_eq!(s.m, p.m, epsilon = 1e-12);
            assert_abs_diff_eq!(s.sigma, p.sigma, epsilon = 1e-12);
        }
    }

    #[test]
    fn stop_rule_examples() {
        let (smile, p) = simulate_case(1).unwrap();
        let anchor = Anchor::from_min_point(&p.min_point().unwrap());
        // exact start makes L(0) ~ 0, so the default rule stops immediately
        let cfg = FpiConfig {
            initial: Some((p.m, p.sigma)),
            ..FpiConfig::default()
        };
        let (_, trace) = fpi_fit(&smile, &anchor, &cfg).unwrap();
        assert_eq!(trace.len(), 1);
        // a residual that never meets the tolerance runs out the budget
        let cfg = FpiConfig {
            tol: 1e-30,
            max_iters: 7,
            stop: StopRule::MaxItersOnly,
            ..FpiConfig::default()
        };
        let (_, trace) = fpi_fit(&smile, &anchor, &cfg).unwrap();
        assert_eq!(trace.len(), 8);
        // the default tolerance stops case 1 well before 50 steps
        let cfg = FpiConfig::default();
        let (_, trace) = fpi_fit(&smile, &anchor, &cfg).unwrap();
        assert!(trace.len() < 50, "stopped after {} steps", trace.len());
        assert!(trace.last().unwrap().residual_norm <= cfg.tol);
    }

    #[test]
    fn traces_are_bit_identical_across_runs() {
        let (smile, p) = simulate_case(2).unwrap();
        let anchor = Anchor::from_min_point(&p.min_point().unwrap());
        let cfg = FpiConfig::fixed_iterations(50);
        let (p1, t1) = fpi_fit(&smile, &anchor, &cfg).unwrap();
        let (p2, t2) = fpi_fit(&smile, &anchor, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn fixed_point_holds_at_convergence() {
        let (smile, p) = simulate_case(3).unwrap();
        let anchor = Anchor::from_min_point(&p.min_point().unwrap());
        let cfg = FpiConfig::fixed_iterations(50);
        let (fitted, trace) = fpi_fit(&smile, &anchor, &cfg).unwrap();
        let n = trace.len();
        let delta = trace
            .params_after(n - 2)
            .unwrap()
            .max_abs_diff(&trace.params_after(n - 1).unwrap());
        assert!(delta < 1e-10);
        let mp = p.min_point().unwrap();
        let u = fixed_point_step_min(mp.x, mp.v, fitted.a, fitted.b, fitted.rho, cfg.sigma_floor);
        assert!((u.m - fitted.m).abs() <= 1e-8 * (1.0 + fitted.m.abs()));
        assert!((u.sigma - fitted.sigma).abs() <= 1e-8 * (1.0 + fitted.sigma.abs()));
    }

    #[test]
    fn uniform_mode_converges_with_an_exact_slope_anchor() {
        let (smile, p) = simulate_case(1).unwrap();
        let x = 0.2;
        let anchor = Anchor::Slope {
            x,
            v: p.eval(x),
            slope: p.slope(x),
        };
        let (fitted, _) = fpi_fit(&smile, &anchor, &FpiConfig::fixed_iterations(50)).unwrap();
        assert!(fit_rase(&smile, &fitted) < 1e-5);
    }

    #[test]
    fn default_slope_anchor_uses_the_quadratic_inside() {
        let (smile, _) = simulate_case(1).unwrap();
        let sa = default_slope_anchor(&smile).unwrap();
        assert_eq!(sa.source_index, smile.argmin_v());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (smile, p) = simulate_case(1).unwrap();
        let anchor = Anchor::from_min_point(&p.min_point().unwrap());
        let bad = FpiConfig {
            tol: 0.0,
            ..FpiConfig::default()
        };
        assert!(fpi_fit(&smile, &anchor, &bad).is_err());
        let bad = FpiConfig {
            max_iters: 0,
            ..FpiConfig::default()
        };
        assert!(fpi_fit(&smile, &anchor, &bad).is_err());
    }

    proptest! {
        #[test]
        fn min_update_inverts_the_analytic_minimum(
            a in -0.2f64..1.0,
            b in 0.05f64..2.0,
            rho in -0.95f64..0.95,
            m in -1.0f64..1.0,
            sigma in 0.05f64..1.5,
        ) {
            let p = crate::model::SviParams { a, b, rho, m, sigma };
            let mp = p.min_point().unwrap();
            let u = fixed_point_step_min(mp.x, mp.v, a, b, rho, 1e-12);
            prop_assert!((u.m - m).abs() <= 1e-12 * (1.0 + m.abs()));
            prop_assert!((u.sigma - sigma).abs() <= 1e-12 * (1.0 + sigma.abs()));
        }

        #[test]
        fn slope_update_inverts_exact_observations(
            a in -0.2f64..1.0,
            b in 0.05f64..2.0,
            rho in -0.9f64..0.9,
            m in -1.0f64..1.0,
            sigma in 0.05f64..1.5,
            x in -1.5f64..1.5,
        ) {
            let p = crate::model::SviParams { a, b, rho, m, sigma };
            let u = fixed_point_step_slope(x, p.eval(x), p.slope(x), a, b, rho, 1e-12);
            prop_assert!((u.m - m).abs() <= 1e-10 * (1.0 + m.abs()));
            prop_assert!((u.sigma - sigma).abs() <= 1e-10 * (1.0 + sigma.abs()));
        }
    }
}
