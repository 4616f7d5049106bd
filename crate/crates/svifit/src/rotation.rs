//! Degenerate-smile handling by coordinate rotation.
//!
//! A smile with `ρ² = 1` is monotone and has no finite minimum, so the
//! minimum-point calibration cannot anchor itself. Rotating the data about
//! the origin,
//!
//! ```text
//! x' = x cos θ − v sin θ,    v' = x sin θ + v cos θ,
//! ```
//!
//! maps the degenerate curve onto another curve of the same five-parameter
//! family with `|ρ'| < 1`, which calibrates normally; evaluation in the
//! original frame goes back through the inverse rotation. The curve family
//! is closed under rotation because its graph is a hyperbola branch: the
//! mapped parameters come from matching the rotated conic coefficient by
//! coefficient, and the admissible angles are exactly
//!
//! ```text
//! 0 < θ < arctan(2b),
//! ```
//!
//! outside of which the rotated branch stops being a function graph with
//! `|ρ'| < 1`. Increasing smiles (the `ρ = +1` shape) are mirrored in `x`
//! first, which flips the skew sign.

use serde::{Deserialize, Serialize};

use crate::anchor::min_point_method_ii_raw;
use crate::error::{Error, Result};
use crate::fpi::{fpi_fit_raw, Anchor, FitTrace, FpiConfig};
use crate::model::{MinPoint, Smile, SviParams, RHO_DEGENERACY_EPS};

/// Two rotated points closer than this in `x'` stop being a function graph.
const ABSCISSA_EPS: f64 = 1e-12;
/// Bisection tolerance of the original-frame evaluator.
const BISECT_TOL: f64 = 1e-12;
/// Bracket expansions before the evaluator gives up.
const MAX_DOUBLINGS: usize = 10;

/// Rotates one point about the origin by `theta` radians.
pub fn rotate_point(x: f64, v: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (x * c - v * s, x * s + v * c)
}

fn validate_theta_range(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidTheta {
            theta,
            reason: "(0, pi/2)".to_string(),
        });
    }
    Ok(())
}

/// Rotates a smile's observations, re-sorts by the new abscissa, and checks
/// the result is still a function graph.
pub fn rotate_points(smile: &Smile, theta: f64) -> Result<Vec<(f64, f64)>> {
    validate_theta_range(theta)?;
    let pts: Vec<(f64, f64)> = smile
        .xs()
        .iter()
        .zip(smile.vs())
        .map(|(&x, &v)| (x, v))
        .collect();
    rotate_point_set(&pts, theta)
}

fn rotate_point_set(points: &[(f64, f64)], theta: f64) -> Result<Vec<(f64, f64)>> {
    let mut rotated: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, v)| rotate_point(x, v, theta))
        .collect();
    rotated.sort_by(|p, q| p.0.total_cmp(&q.0));
    for w in rotated.windows(2) {
        if (w[1].0 - w[0].0).abs() < ABSCISSA_EPS {
            return Err(Error::NotAFunction { theta });
        }
    }
    Ok(rotated)
}

/// Parameters of the rotated curve, with the intermediates of the map.
///
/// `a0` and `m0` are the shift terms the map routes through:
/// `a' = a/cos θ − a0` and `m0 = a·tan θ/cos θ − m/cos θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedParamMap {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub m: f64,
    pub sigma_sq: f64,
    pub a0: f64,
    pub m0: f64,
}

impl RotatedParamMap {
    /// The mapped parameter set; fails when `σ'²` came out negative.
    pub fn params(&self) -> Result<SviParams> {
        if self.sigma_sq < 0.0 {
            return Err(Error::NegativeSigmaSquared {
                sigma_sq: self.sigma_sq,
            });
        }
        SviParams::new(self.a, self.b, self.rho, self.m, self.sigma_sq.sqrt())
    }
}

/// Maps a decreasing degenerate curve (`ρ = −1`) to the parameters of its
/// rotation by `theta`.
///
/// The rotated graph satisfies the same five-parameter form exactly; the
/// mapped values come from matching the conic
/// `w² + 2bu·w = b²σ²` (with `u = x − m`, `w = v − a`) against
/// `w'² − 2b'ρ'u'w' − b'²(1 − ρ'²)u'² = b'²σ'²` in the rotated coordinates.
/// Requires `0 < θ < arctan(2b)` so that `|ρ'| < 1`.
pub fn map_params_through_rotation(p: &SviParams, theta: f64) -> Result<RotatedParamMap> {
    if (p.rho + 1.0).abs() > RHO_DEGENERACY_EPS {
        return Err(Error::InvalidInput(format!(
            "rotation map applies to rho = -1 curves, got rho = {}",
            p.rho
        )));
    }
    if p.b <= 0.0 {
        return Err(Error::InvalidInput("rotation map needs b > 0".into()));
    }
    validate_theta_range(theta)?;
    let limit = (2.0 * p.b).atan();
    if theta >= limit {
        return Err(Error::InvalidTheta {
            theta,
            reason: format!("(0, arctan(2b)) = (0, {limit})"),
        });
    }

    let (sn, cs) = theta.sin_cos();
    let tn = sn / cs;
    let (a, b, m, sigma) = (p.a, p.b, p.m, p.sigma);

    // scale factor of the v'^2 coefficient
    let lambda = cs * cs * (1.0 + 2.0 * b * tn);
    // P = b'ρ', Q = b'^2(1 − ρ'^2)
    let p_coef = (sn * cs - b * (cs * cs - sn * sn)) / lambda;
    let q_coef = (2.0 * b * cs * sn - sn * sn) / lambda;
    let b_sq = p_coef * p_coef + q_coef;
    let b_rot = b_sq.sqrt();
    let rho_rot = p_coef / b_rot;

    // linear and constant coefficients of the rotated conic
    let lin_v = (a * cs + a * b * sn + b * m * cs) / lambda;
    let lin_x = (a * sn + b * m * sn - a * b * cs) / lambda;
    let constant = (a * a + 2.0 * a * b * m - b * b * sigma * sigma) / lambda;

    let m_rot = (lin_x - p_coef * lin_v) / b_sq;
    let a_rot = lin_v + p_coef * m_rot;
    let sigma_sq =
        (a_rot * a_rot - 2.0 * p_coef * m_rot * a_rot - q_coef * m_rot * m_rot - constant) / b_sq;
    if sigma_sq < 0.0 {
        return Err(Error::NegativeSigmaSquared { sigma_sq });
    }

    Ok(RotatedParamMap {
        a: a_rot,
        b: b_rot,
        rho: rho_rot,
        m: m_rot,
        sigma_sq,
        a0: a / cs - a_rot,
        m0: a * tn / cs - m / cs,
    })
}

/// A calibration performed in the rotated frame, evaluable in the original
/// frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedFit {
    pub theta: f64,
    /// Whether the data was mirrored in `x` first (increasing smiles).
    pub mirrored: bool,
    /// Fitted parameters of the rotated-frame curve.
    pub rotated_params: SviParams,
    /// Minimum-point anchor estimated on the rotated data.
    pub rotated_anchor: MinPoint,
    pub trace: FitTrace,
    /// Whether `theta` still satisfies its admissibility bound when checked
    /// against the fitted curve mapped back to the original frame. The bound
    /// needs the original-frame slope, unknown before fitting, so it can
    /// only be verified after the fact.
    pub theta_consistent: bool,
    /// The (mirrored and) rotated observations the fit ran on.
    pub rotated_points: Vec<(f64, f64)>,
    rotated_x_lo: f64,
    rotated_x_hi: f64,
}

impl RotatedFit {
    /// Total variance of the fitted curve at an original-frame `x`.
    ///
    /// Finds the rotated abscissa `x'` with
    /// `x' cos θ + v̂(x') sin θ = x` by bracketed bisection (bracket taken
    /// from the rotated data range and doubled until a sign change, at most
    /// ten times), then rotates the curve point back.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let target = if self.mirrored { -x } else { x };
        let (sn, cs) = self.theta.sin_cos();
        let g = |xp: f64| xp * cs + self.rotated_params.eval(xp) * sn - target;

        let mut lo = self.rotated_x_lo;
        let mut hi = self.rotated_x_hi;
        let mut width = (hi - lo).max(1.0);
        let mut doublings = 0;
        while g(lo) * g(hi) > 0.0 {
            if doublings >= MAX_DOUBLINGS {
                return Err(Error::BracketFailure { x, doublings });
            }
            lo -= width;
            hi += width;
            width *= 2.0;
            doublings += 1;
        }

        let mut f_lo = g(lo);
        // 200 halvings take any double-width interval to ulp level, so this
        // also bounds the loop when the tolerance sits below ulp(lo)
        for _ in 0..200 {
            if hi - lo <= BISECT_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = g(mid);
            if f_mid == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if f_lo * f_mid < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                f_lo = f_mid;
            }
        }
        let xp = 0.5 * (lo + hi);
        Ok(-xp * sn + self.rotated_params.eval(xp) * cs)
    }

    /// Fitted values at every observation abscissa of a smile.
    pub fn eval_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Calibrates a (possibly degenerate) smile by rotating it, fitting in the
/// rotated frame with a quadratic-vertex anchor, and wrapping the result in
/// an original-frame evaluator.
///
/// Decreasing smiles rotate directly; increasing smiles are mirrored in `x`
/// first. The default angle π/12 works for the moderate slopes typical of
/// variance data; the admissibility bound is re-checked against the fitted
/// curve and reported through [`RotatedFit::theta_consistent`].
pub fn fit_rotated(smile: &Smile, theta: f64, cfg: &FpiConfig) -> Result<RotatedFit> {
    validate_theta_range(theta)?;
    let mirrored = smile.argmin_v() == 0;
    let source: Vec<(f64, f64)> = if mirrored {
        smile
            .xs()
            .iter()
            .zip(smile.vs())
            .rev()
            .map(|(&x, &v)| (-x, v))
            .collect()
    } else {
        smile
            .xs()
            .iter()
            .zip(smile.vs())
            .map(|(&x, &v)| (x, v))
            .collect()
    };
    let rotated = rotate_point_set(&source, theta)?;
    let xs: Vec<f64> = rotated.iter().map(|p| p.0).collect();
    let vs: Vec<f64> = rotated.iter().map(|p| p.1).collect();

    let rotated_anchor = min_point_method_ii_raw(&xs, &vs);
    let anchor = Anchor::MinPoint {
        x: rotated_anchor.x,
        v: rotated_anchor.v,
    };
    let (rotated_params, trace) = fpi_fit_raw(&xs, &vs, &anchor, cfg)?;

    // map the fitted rotated slope back and re-check the angle bound
    let (sn, cs) = theta.sin_cos();
    let back_denom = 1.0 - 2.0 * rotated_params.b * sn * cs;
    let theta_consistent = back_denom > 0.0 && {
        let b_original = rotated_params.b * cs * cs / back_denom;
        b_original > 0.0 && theta < (2.0 * b_original).atan()
    };

    Ok(RotatedFit {
        theta,
        mirrored,
        rotated_params,
        rotated_anchor,
        trace,
        theta_consistent,
        rotated_x_lo: xs[0],
        rotated_x_hi: xs[xs.len() - 1],
        rotated_points: rotated,
    })
}
