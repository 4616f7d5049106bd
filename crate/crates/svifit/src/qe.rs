//! Quasi-explicit baseline calibration.
//!
//! The classical alternating scheme the fixed-point iteration is benchmarked
//! against: each outer step first minimizes the residual over `(m, σ)` with
//! the linear coefficients frozen, using a derivative-free Nelder-Mead
//! simplex, then re-solves the linear least-squares problem at the new
//! `(m, σ)`. Both phases minimize over their own block, so the recorded
//! residual is non-increasing up to the inner solver's tolerance.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fpi::{FitTrace, StepFlags, TraceStep};
use crate::linear::{beta_to_abr, build_design_raw, lsq_solve, Beta};
use crate::model::{MinPoint, Smile, SviParams};

/// Penalty returned for infeasible simplex vertices (`σ ≤ 0`).
const PENALTY: f64 = 1e12;

/// Nelder-Mead settings: the classic coefficient set with a small relative
/// initial simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Objective-evaluation budget per inner solve.
    pub max_evals: usize,
    /// Simplex diameter and value-spread convergence tolerance.
    pub tol: f64,
    /// Relative offset of the initial simplex vertices.
    pub scale_rel: f64,
    /// Absolute floor of the initial simplex offsets.
    pub scale_floor: f64,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_evals: 200,
            tol: 1e-10,
            scale_rel: 0.05,
            scale_floor: 1e-4,
        }
    }
}

/// Outer-loop configuration of the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QeConfig {
    /// Outer alternation steps `M`.
    pub outer_iters: usize,
    pub nm: NmConfig,
    pub sigma_floor: f64,
    /// Overrides the anchor-derived starting `(m₀, σ₀)` when set.
    pub initial: Option<(f64, f64)>,
}

impl Default for QeConfig {
    fn default() -> Self {
        Self {
            outer_iters: 50,
            nm: NmConfig::default(),
            sigma_floor: 1e-8,
            initial: None,
        }
    }
}

/// Derivative-free 2-D minimization with the Nelder-Mead simplex.
///
/// Returns the best vertex seen, which is never worse than `start` (the
/// start is a vertex of the initial simplex). Restarts once with a mirrored
/// simplex if the search cannot improve on a start with non-zero objective.
/// Deterministic.
pub fn nelder_mead_2d<F>(objective: F, start: (f64, f64), cfg: &NmConfig) -> (f64, f64)
where
    F: Fn(f64, f64) -> f64,
{
    let first = run_simplex(&objective, start, cfg, 1.0);
    if first.0 == start && first.1 > 0.0 {
        let second = run_simplex(&objective, start, cfg, -1.0);
        if second.1 < first.1 {
            return second.0;
        }
    }
    first.0
}

fn run_simplex<F>(
    objective: &F,
    start: (f64, f64),
    cfg: &NmConfig,
    orientation: f64,
) -> ((f64, f64), f64)
where
    F: Fn(f64, f64) -> f64,
{
    let offset = |v: f64| orientation * (cfg.scale_rel * v.abs()).max(cfg.scale_floor);
    let mut pts = [
        start,
        (start.0 + offset(start.0), start.1),
        (start.0, start.1 + offset(start.1)),
    ];
    let mut fv = [
        objective(pts[0].0, pts[0].1),
        objective(pts[1].0, pts[1].1),
        objective(pts[2].0, pts[2].1),
    ];
    let mut evals = 3;

    while evals < cfg.max_evals {
        // order best..worst
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| fv[i].total_cmp(&fv[j]));
        pts = [pts[idx[0]], pts[idx[1]], pts[idx[2]]];
        fv = [fv[idx[0]], fv[idx[1]], fv[idx[2]]];

        let diameter = dist(pts[0], pts[1]).max(dist(pts[0], pts[2]));
        if diameter < cfg.tol && (fv[2] - fv[0]).abs() < cfg.tol {
            break;
        }

        let centroid = (
            0.5 * (pts[0].0 + pts[1].0),
            0.5 * (pts[0].1 + pts[1].1),
        );
        let towards = |coef: f64, from: (f64, f64)| {
            (
                centroid.0 + coef * (from.0 - centroid.0),
                centroid.1 + coef * (from.1 - centroid.1),
            )
        };

        let reflected = towards(-cfg.reflection, pts[2]);
        let f_reflected = objective(reflected.0, reflected.1);
        evals += 1;

        if f_reflected < fv[0] {
            let expanded = towards(-cfg.reflection * cfg.expansion, pts[2]);
            let f_expanded = objective(expanded.0, expanded.1);
            evals += 1;
            if f_expanded < f_reflected {
                pts[2] = expanded;
                fv[2] = f_expanded;
            } else {
                pts[2] = reflected;
                fv[2] = f_reflected;
            }
        } else if f_reflected < fv[1] {
            pts[2] = reflected;
            fv[2] = f_reflected;
        } else {
            // contract outside towards the reflection when it helped at all,
            // inside towards the worst vertex otherwise
            let contracted = if f_reflected < fv[2] {
                towards(-cfg.reflection * cfg.contraction, pts[2])
            } else {
                towards(cfg.contraction, pts[2])
            };
            let f_contracted = objective(contracted.0, contracted.1);
            evals += 1;
            if f_contracted < f_reflected.min(fv[2]) {
                pts[2] = contracted;
                fv[2] = f_contracted;
            } else {
                for i in 1..3 {
                    pts[i] = (
                        pts[0].0 + cfg.shrink * (pts[i].0 - pts[0].0),
                        pts[0].1 + cfg.shrink * (pts[i].1 - pts[0].1),
                    );
                    fv[i] = objective(pts[i].0, pts[i].1);
                    evals += 1;
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..3 {
        if fv[i] < fv[best] {
            best = i;
        }
    }
    (pts[best], fv[best])
}

fn dist(p: (f64, f64), q: (f64, f64)) -> f64 {
    f64::hypot(p.0 - q.0, p.1 - q.1)
}

/// Runs the quasi-explicit baseline: alternating inner Nelder-Mead over
/// `(m, σ)` and the explicit linear solve, starting from the anchor.
///
/// The trace shares its schema with the fixed-point calibration, so the two
/// methods compare row for row; here `(m_next, σ_next)` equal the step's own
/// `(m, σ)` since the inner search of the next step warm-starts there.
pub fn qe_fit(smile: &Smile, anchor: &MinPoint, cfg: &QeConfig) -> Result<(SviParams, FitTrace)> {
    let xs = smile.xs();
    let vs = smile.vs();
    let (m0, sigma0_raw) = cfg.initial.unwrap_or((anchor.x, anchor.v));

    let mut flags0 = StepFlags::default();
    let mut m = m0;
    let mut sigma = if sigma0_raw < cfg.sigma_floor {
        flags0.sigma_clamped = true;
        cfg.sigma_floor
    } else {
        sigma0_raw
    };

    let mut trace = FitTrace::default();
    let mut beta: Beta;
    {
        let design = build_design_raw(xs, m, sigma)?;
        let (b0, l0) = lsq_solve(&design, vs)?;
        beta = b0;
        let (a, b, rho, projection) = beta_to_abr(&beta);
        trace.steps.push(TraceStep {
            m,
            sigma,
            a,
            b,
            rho,
            residual_norm: l0,
            m_next: m,
            sigma_next: sigma,
            flags: flags0.with_projection(projection),
        });
    }

    for _ in 1..=cfg.outer_iters {
        let frozen = beta;
        let objective = |mm: f64, ss: f64| -> f64 {
            if ss <= 0.0 {
                return PENALTY;
            }
            let mut ssr = 0.0;
            for i in 0..xs.len() {
                let u = xs[i] - mm;
                let w = (u * u + ss * ss).sqrt();
                let e = vs[i] - (frozen.a + frozen.b_rho * u + frozen.b * w);
                ssr += e * e;
            }
            ssr
        };
        let (m_new, sigma_new) = nelder_mead_2d(objective, (m, sigma), &cfg.nm);
        let mut flags = StepFlags::default();
        m = m_new;
        sigma = if sigma_new < cfg.sigma_floor {
            flags.sigma_clamped = true;
            cfg.sigma_floor
        } else {
            sigma_new
        };

        let design = build_design_raw(xs, m, sigma)?;
        let (b_new, l) = lsq_solve(&design, vs)?;
        beta = b_new;
        let (a, b, rho, projection) = beta_to_abr(&beta);
        trace.steps.push(TraceStep {
            m,
            sigma,
            a,
            b,
            rho,
            residual_norm: l,
            m_next: m,
            sigma_next: sigma,
            flags: flags.with_projection(projection),
        });
    }

    let params = trace.final_params().expect("at least one step ran");
    Ok((params, trace))
}
