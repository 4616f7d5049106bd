//! Five-parameter smile model for total implied variance.
//!
//! The curve is parameterized over log-moneyness `x` as
//!
//! ```text
//! v(x) = a + b·[ρ(x − m) + √((x − m)² + σ²)]
//! ```
//!
//! with level `a`, wing slope `b ≥ 0`, skew `ρ ∈ [−1, 1]`, horizontal shift
//! `m`, and smoothing width `σ > 0`. For `|ρ| < 1` the curve is strictly
//! convex with a finite global minimum; at `ρ² = 1` one wing flattens and the
//! minimum escapes to infinity (handled by the [`crate::rotation`] module).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treat `1 − ρ²` below this as degenerate when computing the minimum point.
pub const RHO_DEGENERACY_EPS: f64 = 1e-12;

/// The five smile parameters `(a, b, ρ, m, σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SviParams {
    /// Variance level.
    pub a: f64,
    /// Wing slope, in variance per unit log-moneyness. Non-negative.
    pub b: f64,
    /// Skew, in `[-1, 1]`. The closed interval is deliberate: `ρ² = 1`
    /// parameter sets are legal values (the rotation path produces and
    /// consumes them) even though they have no finite minimum.
    pub rho: f64,
    /// Horizontal shift, in log-moneyness units.
    pub m: f64,
    /// Smoothing width, in log-moneyness units. Strictly positive.
    pub sigma: f64,
}

impl SviParams {
    /// Validates `b ≥ 0`, `σ > 0`, `|ρ| ≤ 1`, and finiteness of every field.
    pub fn new(a: f64, b: f64, rho: f64, m: f64, sigma: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidInput(format!("a must be finite, got {a}")));
        }
        if b < 0.0 || !b.is_finite() {
            return Err(Error::InvalidInput(format!(
                "b must be non-negative and finite, got {b}"
            )));
        }
        if rho.abs() > 1.0 || rho.is_nan() {
            return Err(Error::InvalidInput(format!(
                "rho must lie in [-1, 1], got {rho}"
            )));
        }
        if !m.is_finite() {
            return Err(Error::InvalidInput(format!("m must be finite, got {m}")));
        }
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { a, b, rho, m, sigma })
    }

    /// Total implied variance at log-moneyness `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let u = x - self.m;
        self.a + self.b * (self.rho * u + (u * u + self.sigma * self.sigma).sqrt())
    }

    /// First derivative of [`eval`](Self::eval) at `x`:
    /// `v'(x) = bρ + b(x − m)/√((x − m)² + σ²)`, strictly inside
    /// `(b(ρ−1), b(ρ+1))` when `b > 0`.
    pub fn slope(&self, x: f64) -> f64 {
        let u = x - self.m;
        self.b * self.rho + self.b * u / (u * u + self.sigma * self.sigma).sqrt()
    }

    /// The analytic global minimum point,
    ///
    /// ```text
    /// x_min = m − ρσ/√(1 − ρ²),    v_min = a + bσ√(1 − ρ²).
    /// ```
    ///
    /// Requires `|ρ| < 1` (within [`RHO_DEGENERACY_EPS`]) and `b > 0`;
    /// otherwise the minimum is at infinity and [`Error::DegenerateRho`]
    /// is returned. Every caller that needs a finite minimum on a degenerate
    /// curve must route through rotation or the slope-anchored variant.
    pub fn min_point(&self) -> Result<MinPoint> {
        let one_minus_rho_sq = 1.0 - self.rho * self.rho;
        if one_minus_rho_sq < RHO_DEGENERACY_EPS {
            return Err(Error::DegenerateRho { rho: self.rho });
        }
        if self.b <= 0.0 {
            return Err(Error::InvalidInput(
                "minimum point requires b > 0".to_string(),
            ));
        }
        let root = one_minus_rho_sq.sqrt();
        Ok(MinPoint {
            x: self.m - self.rho * self.sigma / root,
            v: self.a + self.b * self.sigma * root,
            source: AnchorSource::Analytic,
            boundary: false,
        })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.a, self.b, self.rho, self.m, self.sigma]
    }

    /// Largest componentwise difference to `other`.
    pub fn max_abs_diff(&self, other: &SviParams) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array().iter())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    }
}

/// Ordered smile observations: log-moneyness paired with total implied
/// variance, strictly increasing in `x`, at least three points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smile {
    xs: Vec<f64>,
    vs: Vec<f64>,
}

impl Smile {
    /// Builds a smile from `(x, v)` pairs, validating the invariants:
    /// `x` strictly increasing, `N ≥ 3`, every `v` finite and non-negative.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::TooFewPoints { n: points.len() });
        }
        for (i, &(x, v)) in points.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidInput(format!("x[{i}] = {x} is not finite")));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "v[{i}] = {v} must be finite and non-negative"
                )));
            }
        }
        for i in 1..points.len() {
            if points[i].0 == points[i - 1].0 {
                return Err(Error::DuplicateAbscissa {
                    x: points[i].0,
                    first: i - 1,
                    second: i,
                });
            }
            if points[i].0 < points[i - 1].0 {
                return Err(Error::InvalidInput(format!(
                    "x must be strictly increasing; x[{}] = {} < x[{}] = {}",
                    i,
                    points[i].0,
                    i - 1,
                    points[i - 1].0
                )));
            }
        }
        let (xs, vs) = points.into_iter().unzip();
        Ok(Self { xs, vs })
    }

    /// Sorts the pairs by `x` before validating; convenience for unordered
    /// input such as raw CSV rows.
    pub fn from_unsorted(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|p, q| p.0.total_cmp(&q.0));
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn vs(&self) -> &[f64] {
        &self.vs
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.xs[i], self.vs[i])
    }

    /// Index of the smallest variance, ties broken by the smallest index.
    pub fn argmin_v(&self) -> usize {
        let mut best = 0;
        for i in 1..self.vs.len() {
            if self.vs[i] < self.vs[best] {
                best = i;
            }
        }
        best
    }
}

/// How a minimum-point anchor was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorSource {
    /// Closed form from known parameters.
    Analytic,
    /// Discrete argmin of the observations.
    MethodI,
    /// Vertex of the interpolating quadratic through the argmin stencil.
    MethodII,
    /// Best of randomly sampled candidates near the argmin, scored by a fit.
    MethodIII,
    /// Supplied by the caller.
    UserSupplied,
}

impl std::fmt::Display for AnchorSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AnchorSource::Analytic => "analytic",
            AnchorSource::MethodI => "method-I",
            AnchorSource::MethodII => "method-II",
            AnchorSource::MethodIII => "method-III",
            AnchorSource::UserSupplied => "user-supplied",
        };
        f.write_str(s)
    }
}

/// A minimum-point estimate `(x_min, v_min)` with its provenance.
///
/// `boundary` is set when the discrete argmin sat on an endpoint of the
/// smile, which forces the stencil methods to fall back to the raw argmin.
/// Such smiles are monotone and better served by the rotation or
/// slope-anchored paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinPoint {
    pub x: f64,
    pub v: f64,
    pub source: AnchorSource,
    pub boundary: bool,
}

impl MinPoint {
    pub fn user_supplied(x: f64, v: f64) -> Result<Self> {
        if !x.is_finite() || !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidInput(format!(
                "minimum point ({x}, {v}) must be finite with v >= 0"
            )));
        }
        Ok(Self {
            x,
            v,
            source: AnchorSource::UserSupplied,
            boundary: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn case1() -> SviParams {
        SviParams::new(0.5, 0.5, -0.5, -0.3, 0.5).unwrap()
    }

    #[test]
    fn eval_at_m_is_a_plus_b_sigma() {
        // at x = m the sqrt term equals sigma, so v = a + b*sigma
        let p = case1();
        assert_abs_diff_eq!(p.eval(-0.3), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn eval_identity_like_case() {
        let p = SviParams::new(0.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.eval(0.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn eval_matches_arbitrary_precision_value() {
        // 0.5 + 0.5*(0.8 + sqrt(2.81)) evaluated with 30-digit arithmetic
        let p = case1();
        assert_abs_diff_eq!(p.eval(-1.9), 1.7381527307120105, epsilon = 1e-15);
    }

    #[test]
    fn slope_at_m_is_b_rho() {
        let p = case1();
        assert_abs_diff_eq!(p.slope(-0.3), -0.25, epsilon = 1e-15);
    }

    #[test]
    fn slope_approaches_upper_asymptote() {
        let p = SviParams::new(0.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        // asymptotic slope is b(rho + 1) = 1
        assert_abs_diff_eq!(p.slope(1e9), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn slope_matches_central_difference() {
        let p = case1();
        let x = 0.2;
        let h = 1e-6;
        let fd = (p.eval(x + h) - p.eval(x - h)) / (2.0 * h);
        assert_abs_diff_eq!(p.slope(x), fd, epsilon = 1e-6);
    }

    #[test]
    fn slope_stays_inside_open_band() {
        let p = case1();
        for i in -50..=50 {
            let s = p.slope(i as f64 * 0.2);
            assert!(s > p.b * (p.rho - 1.0) && s < p.b * (p.rho + 1.0));
        }
    }

    #[test]
    fn min_point_with_zero_rho_sits_at_m() {
        let p = SviParams::new(0.5, 0.5, 0.0, -0.3, 0.5).unwrap();
        let mp = p.min_point().unwrap();
        assert_abs_diff_eq!(mp.x, -0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(mp.v, 0.75, epsilon = 1e-15);
        assert_eq!(mp.source, AnchorSource::Analytic);
    }

    #[test]
    fn min_point_matches_grid_search_oracle() {
        // dense grid search with step 1e-6 as an independent oracle
        let p = case1();
        let mp = p.min_point().unwrap();
        let step = 1e-6;
        let mut best_x = -1.0;
        let mut best_v = f64::INFINITY;
        let mut x = -1.0;
        while x <= 1.0 {
            let v = p.eval(x);
            if v < best_v {
                best_v = v;
                best_x = x;
            }
            x += step;
        }
        assert_abs_diff_eq!(mp.x, best_x, epsilon = 1e-5);
        assert_abs_diff_eq!(mp.v, best_v, epsilon = 1e-5);
        // against the closed form evaluated with 30-digit arithmetic
        assert_abs_diff_eq!(mp.x, -0.011324865405187118, epsilon = 1e-15);
        assert_abs_diff_eq!(mp.v, 0.7165063509461097, epsilon = 1e-15);
    }

    #[test]
    fn min_point_slope_is_zero() {
        let p = case1();
        let mp = p.min_point().unwrap();
        assert_abs_diff_eq!(p.slope(mp.x), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn min_point_rejects_degenerate_rho() {
        let p = SviParams::new(0.5, 0.5, -1.0, -0.3, 0.5).unwrap();
        assert!(matches!(p.min_point(), Err(Error::DegenerateRho { .. })));
        // near-degenerate is treated the same to avoid overflow
        let p = SviParams::new(0.5, 0.5, 1.0 - 1e-14, -0.3, 0.5).unwrap();
        assert!(matches!(p.min_point(), Err(Error::DegenerateRho { .. })));
    }

    #[test]
    fn eval_dominates_v_min_everywhere() {
        let p = case1();
        let mp = p.min_point().unwrap();
        for i in 0..=4000 {
            let x = -2.0 + i as f64 * 0.001;
            assert!(p.eval(x) >= mp.v - 1e-12);
        }
    }

    #[test]
    fn second_differences_are_convex() {
        let p = case1();
        let h = 0.01;
        for i in -200..=200 {
            let x = i as f64 * h;
            let dd = p.eval(x + h) - 2.0 * p.eval(x) + p.eval(x - h);
            assert!(dd >= -1e-12, "second difference {dd} at x = {x}");
        }
    }

    #[test]
    fn new_rejects_bad_params() {
        assert!(SviParams::new(f64::NAN, 0.5, 0.0, 0.0, 0.5).is_err());
        assert!(SviParams::new(0.5, -0.1, 0.0, 0.0, 0.5).is_err());
        assert!(SviParams::new(0.5, 0.5, 1.5, 0.0, 0.5).is_err());
        assert!(SviParams::new(0.5, 0.5, 0.0, f64::INFINITY, 0.5).is_err());
        assert!(SviParams::new(0.5, 0.5, 0.0, 0.0, 0.0).is_err());
        // the closed rho interval is legal
        assert!(SviParams::new(0.5, 0.5, -1.0, 0.0, 0.5).is_ok());
    }

    #[test]
    fn smile_validates_ordering_and_count() {
        assert!(matches!(
            Smile::new(vec![(0.0, 1.0), (1.0, 2.0)]),
            Err(Error::TooFewPoints { n: 2 })
        ));
        assert!(matches!(
            Smile::new(vec![(0.0, 1.0), (0.0, 2.0), (1.0, 3.0)]),
            Err(Error::DuplicateAbscissa { .. })
        ));
        assert!(Smile::new(vec![(1.0, 1.0), (0.0, 2.0), (2.0, 3.0)]).is_err());
        let s = Smile::from_unsorted(vec![(1.0, 1.0), (0.0, 2.0), (2.0, 3.0)]).unwrap();
        assert_eq!(s.xs(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn smile_rejects_negative_variance() {
        assert!(Smile::new(vec![(0.0, 1.0), (1.0, -0.1), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn argmin_breaks_ties_by_smallest_index() {
        let s = Smile::new(vec![(0.0, 2.0), (1.0, 2.0), (2.0, 2.0)]).unwrap();
        assert_eq!(s.argmin_v(), 0);
    }
}
