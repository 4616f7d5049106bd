//! Anchor estimation from discrete observations.
//!
//! The calibrators pin `(m, σ)` each iteration through a fixed anchor:
//! either a minimum point `(x_min, v_min)` or a single observation with an
//! estimated slope `(x, v, v_x)`. This module estimates both from the data:
//!
//! - method I: the raw argmin observation;
//! - method II: the vertex of the quadratic through the argmin stencil;
//! - method III: the best of random candidates near the argmin, scored by a
//!   full calibration run;
//! - methods I'/II': slope estimates via central differences or the
//!   interpolating quadratic's derivative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnchorSource, MinPoint, Smile};

/// Radius floor for the method-III sampling disc.
const DISC_RADIUS_FLOOR: f64 = 1e-8;

/// Coefficients of `v(x) = c1·x² + c2·x + c3`. A finite minimum exists only
/// for `c1 > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl QuadraticFit {
    /// Exact interpolating quadratic through three points with distinct
    /// abscissae, via Newton divided differences.
    pub fn through(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Self {
        let d01 = (p1.1 - p0.1) / (p1.0 - p0.0);
        let d12 = (p2.1 - p1.1) / (p2.0 - p1.0);
        let c1 = (d12 - d01) / (p2.0 - p0.0);
        let c2 = d01 - c1 * (p0.0 + p1.0);
        let c3 = p0.1 - d01 * p0.0 + c1 * p0.0 * p1.0;
        Self { c1, c2, c3 }
    }

    /// Vertex `(−c2/(2c1), (4c1c3 − c2²)/(4c1))`; caller checks `c1 > 0`.
    pub fn vertex(&self) -> (f64, f64) {
        (
            -self.c2 / (2.0 * self.c1),
            (4.0 * self.c1 * self.c3 - self.c2 * self.c2) / (4.0 * self.c1),
        )
    }

    /// Derivative `v_x = 2c1·x + c2`.
    pub fn slope_at(&self, x: f64) -> f64 {
        2.0 * self.c1 * x + self.c2
    }
}

/// A slope anchor `(x, v, v_x)` taken at observation `source_index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeAnchor {
    pub x: f64,
    pub v: f64,
    pub slope: f64,
    pub source_index: usize,
}

/// Method I: the observation with the smallest variance, ties broken by the
/// smallest index.
pub fn min_point_method_i(smile: &Smile) -> MinPoint {
    min_point_method_i_raw(smile.xs(), smile.vs())
}

pub(crate) fn min_point_method_i_raw(xs: &[f64], vs: &[f64]) -> MinPoint {
    let mut p = 0;
    for i in 1..vs.len() {
        if vs[i] < vs[p] {
            p = i;
        }
    }
    MinPoint {
        x: xs[p],
        v: vs[p],
        source: AnchorSource::MethodI,
        boundary: p == 0 || p + 1 == vs.len(),
    }
}

/// Method II: vertex of the interpolating quadratic through the argmin and
/// its two neighbours.
///
/// Falls back to method I (with the provenance recording that) when the
/// argmin sits on an endpoint, when the stencil is not convex (`c1 ≤ 0`), or
/// when the vertex variance would be negative.
pub fn min_point_method_ii(smile: &Smile) -> MinPoint {
    min_point_method_ii_raw(smile.xs(), smile.vs())
}

pub(crate) fn min_point_method_ii_raw(xs: &[f64], vs: &[f64]) -> MinPoint {
    let fallback = min_point_method_i_raw(xs, vs);
    if fallback.boundary {
        return fallback;
    }
    let p = {
        let mut p = 0;
        for i in 1..vs.len() {
            if vs[i] < vs[p] {
                p = i;
            }
        }
        p
    };
    let quad = QuadraticFit::through(
        (xs[p - 1], vs[p - 1]),
        (xs[p], vs[p]),
        (xs[p + 1], vs[p + 1]),
    );
    if quad.c1 <= 0.0 {
        return fallback;
    }
    let (x, v) = quad.vertex();
    if !x.is_finite() || !v.is_finite() || v < 0.0 {
        return fallback;
    }
    MinPoint {
        x,
        v,
        source: AnchorSource::MethodII,
        boundary: false,
    }
}

/// Method III: sample candidate anchors from the disc around the argmin and
/// keep the one the scorer likes best.
///
/// The disc radius is the distance to the nearer stencil neighbour (the most
/// conservative reading keeps both neighbours outside), floored at 1e-8. The
/// candidate set always contains the argmin itself and, when it falls inside
/// the disc, the method-II vertex, so the winner is never worse than those
/// under the given scorer. `scorer` maps a candidate `(x, v)` to a fit
/// quality (lower is better), typically the error of a full calibration run.
/// Deterministic for a fixed `seed`.
pub fn min_point_method_iii<F>(
    smile: &Smile,
    n_samples: usize,
    seed: u64,
    scorer: F,
) -> MinPoint
where
    F: Fn(f64, f64) -> f64,
{
    let anchor_i = min_point_method_i(smile);
    if anchor_i.boundary {
        return anchor_i;
    }
    let p = smile.argmin_v();
    let (xp, vp) = smile.point(p);
    let (xl, vl) = smile.point(p - 1);
    let (xr, vr) = smile.point(p + 1);
    let r = f64::hypot(xp - xl, vp - vl)
        .min(f64::hypot(xr - xp, vr - vp))
        .max(DISC_RADIUS_FLOOR);

    let mut candidates = vec![(xp, vp)];
    let anchor_ii = min_point_method_ii(smile);
    if anchor_ii.source == AnchorSource::MethodII
        && f64::hypot(anchor_ii.x - xp, anchor_ii.v - vp) <= r
    {
        candidates.push((anchor_ii.x, anchor_ii.v));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_samples {
        // rejection sampling keeps the draw exactly uniform over the disc
        loop {
            let dx = rng.gen_range(-r..=r);
            let dv = rng.gen_range(-r..=r);
            if dx * dx + dv * dv <= r * r {
                candidates.push((xp + dx, (vp + dv).max(0.0)));
                break;
            }
        }
    }

    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (i, &(x, v)) in candidates.iter().enumerate() {
        let score = scorer(x, v);
        if score < best_score {
            best_score = score;
            best = i;
        }
    }
    MinPoint {
        x: candidates[best].0,
        v: candidates[best].1,
        source: AnchorSource::MethodIII,
        boundary: false,
    }
}

/// Method I': slope by central differences,
/// `v_x,j = (v_{j+1} − v_{j−1})/(x_{j+1} − x_{j−1})`, with the endpoints
/// copying their neighbour's value.
pub fn slope_anchor_method_ip(smile: &Smile, j: usize) -> Result<SlopeAnchor> {
    let n = smile.len();
    if j >= n {
        return Err(Error::InvalidInput(format!(
            "index {j} out of range for {n} observations"
        )));
    }
    let central = |i: usize| {
        (smile.vs()[i + 1] - smile.vs()[i - 1]) / (smile.xs()[i + 1] - smile.xs()[i - 1])
    };
    let slope = if j == 0 {
        central(1)
    } else if j == n - 1 {
        central(n - 2)
    } else {
        central(j)
    };
    let (x, v) = smile.point(j);
    Ok(SlopeAnchor {
        x,
        v,
        slope,
        source_index: j,
    })
}

/// Method II': slope from the derivative of the interpolating quadratic
/// through observations `j−1, j, j+1`. Interior indices only.
pub fn slope_anchor_method_iip(smile: &Smile, j: usize) -> Result<SlopeAnchor> {
    let n = smile.len();
    if j == 0 || j + 1 >= n {
        return Err(Error::BoundaryIndex { index: j, len: n });
    }
    let quad = QuadraticFit::through(smile.point(j - 1), smile.point(j), smile.point(j + 1));
    let (x, v) = smile.point(j);
    Ok(SlopeAnchor {
        x,
        v,
        slope: quad.slope_at(x),
        source_index: j,
    })
}
