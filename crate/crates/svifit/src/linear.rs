//! Explicit least-squares solve for the linear half of the calibration.
//!
//! For fixed `(m, σ)` the smile model is linear in `β = (a, bρ, b)`:
//!
//! ```text
//! v_i ≈ β1 + β2·(x_i − m) + β3·√((x_i − m)² + σ²)
//! ```
//!
//! so the design matrix `Y(m, σ) = (X1, X2, X3)` has an all-ones column, the
//! shifted abscissae, and the smoothed distances. The normal equations are a
//! 3×3 symmetric system solved directly with full pivoting; an orthogonal
//! factorization of `Y` takes over when the normal matrix looks
//! ill-conditioned, and a condition estimate beyond 1e12 is reported as a
//! degenerate smile.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Smile;

/// Feasibility floor for the wing slope `b`.
pub const B_FLOOR: f64 = 1e-10;
/// Feasibility margin keeping `|ρ|` strictly below one.
pub const RHO_MARGIN: f64 = 1e-10;
/// Condition estimate beyond which the normal equations hand over to QR.
const QR_FALLBACK_COND: f64 = 1e8;
/// Condition estimate beyond which the system is reported singular.
const SINGULAR_COND: f64 = 1e12;

/// Design matrix columns for one `(m, σ)`. `X1` is implicitly all ones.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    /// `x_i − m`.
    pub x2: Vec<f64>,
    /// `√((x_i − m)² + σ²)`, entrywise at least `σ`.
    pub x3: Vec<f64>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.x2.len()
    }
}

/// The linear coefficients `(a, bρ, b)` of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beta {
    pub a: f64,
    pub b_rho: f64,
    pub b: f64,
}

impl Beta {
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b_rho, self.b)
    }
}

/// Which clamps fired while mapping a raw solve to feasible `(a, b, ρ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionFlags {
    pub b_floored: bool,
    pub rho_projected: bool,
}

/// Builds the design columns for the given shift and width.
pub fn build_design(smile: &Smile, m: f64, sigma: f64) -> Result<DesignMatrix> {
    build_design_raw(smile.xs(), m, sigma)
}

pub(crate) fn build_design_raw(xs: &[f64], m: f64, sigma: f64) -> Result<DesignMatrix> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma { sigma });
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput(format!("m must be finite, got {m}")));
    }
    let x2: Vec<f64> = xs.iter().map(|&x| x - m).collect();
    let x3: Vec<f64> = x2.iter().map(|&u| (u * u + sigma * sigma).sqrt()).collect();
    Ok(DesignMatrix { x2, x3 })
}

/// Solves `min_β ‖V − Yβ‖₂` and returns the minimizer with the residual
/// norm `‖V − Yβ‖₂`.
pub fn lsq_solve(design: &DesignMatrix, v: &[f64]) -> Result<(Beta, f64)> {
    let n = design.nrows();
    if v.len() != n {
        return Err(Error::LengthMismatch {
            left: v.len(),
            right: n,
        });
    }
    if n < 3 {
        return Err(Error::TooFewPoints { n });
    }

    let normal = normal_matrix(design);
    let rhs = normal_rhs(design, v);
    let cond = condition_estimate(&normal);

    let beta_vec = if cond <= QR_FALLBACK_COND {
        solve_full_pivot(&normal, &rhs)
            .ok_or(Error::SingularSystem { cond })?
    } else if cond <= SINGULAR_COND {
        solve_col_piv_qr(design, v).ok_or(Error::SingularSystem { cond })?
    } else {
        return Err(Error::SingularSystem { cond });
    };

    let beta = Beta {
        a: beta_vec[0],
        b_rho: beta_vec[1],
        b: beta_vec[2],
    };
    let residual_norm = residual_norm(design, v, &beta);
    Ok((beta, residual_norm))
}

/// Maps a raw solve to feasible `(a, b, ρ)`:
/// `a = β1`, `b = max(β3, 1e-10)`, `ρ = β2/b` projected into
/// `[−1 + 1e-10, 1 − 1e-10]`. The projection keeps the fixed-point update
/// defined when the unconstrained solve strays outside the feasible set.
pub fn beta_to_abr(beta: &Beta) -> (f64, f64, f64, ProjectionFlags) {
    let mut flags = ProjectionFlags::default();
    let a = beta.a;
    let b = if beta.b < B_FLOOR {
        flags.b_floored = true;
        B_FLOOR
    } else {
        beta.b
    };
    let raw_rho = beta.b_rho / b;
    let limit = 1.0 - RHO_MARGIN;
    let rho = if raw_rho.abs() > limit {
        flags.rho_projected = true;
        limit.copysign(raw_rho)
    } else {
        raw_rho
    };
    (a, b, rho, flags)
}

/// `‖Yᵀ(V − Yβ)‖₂`, the optimality residual of the normal equations.
pub fn normal_equation_residual(design: &DesignMatrix, v: &[f64], beta: &Beta) -> f64 {
    let mut r = [0.0; 3];
    for ((&u, &w), &vi) in design.x2.iter().zip(&design.x3).zip(v) {
        let e = vi - (beta.a + beta.b_rho * u + beta.b * w);
        r[0] += e;
        r[1] += u * e;
        r[2] += w * e;
    }
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// Scale for the normal-equation optimality check: `1 + ‖YᵀV‖`.
pub fn normal_rhs_scale(design: &DesignMatrix, v: &[f64]) -> f64 {
    1.0 + normal_rhs(design, v).norm()
}

fn residual_norm(design: &DesignMatrix, v: &[f64], beta: &Beta) -> f64 {
    let mut ss = 0.0;
    for ((&u, &w), &vi) in design.x2.iter().zip(&design.x3).zip(v) {
        let e = vi - (beta.a + beta.b_rho * u + beta.b * w);
        ss += e * e;
    }
    ss.sqrt()
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

fn normal_rhs(design: &DesignMatrix, v: &[f64]) -> Vector3<f64> {
    let mut r = Vector3::zeros();
    for ((&u, &w), &vi) in design.x2.iter().zip(&design.x3).zip(v) {
        r[0] += vi;
        r[1] += u * vi;
        r[2] += w * vi;
    }
    r
}

/// Least squares through a rank-revealing orthogonal factorization of the
/// full design: with `Y·P = Q·R`, solve `R·z = Qᵀv` and un-permute. Used when
/// the normal equations look too ill-conditioned to square the problem.
fn solve_col_piv_qr(design: &DesignMatrix, v: &[f64]) -> Option<Vector3<f64>> {
    let n = design.nrows();
    let y = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => design.x2[i],
        _ => design.x3[i],
    });
    let qr = y.col_piv_qr();
    let r = qr.r();
    // rank check on the pivoted diagonal
    let r00 = r[(0, 0)].abs();
    if r00 == 0.0 || r[(2, 2)].abs() < 1e-14 * r00 {
        return None;
    }
    let mut z = qr.q().tr_mul(&DVector::from_column_slice(v));
    for i in (0..3).rev() {
        let mut s = z[i];
        for j in (i + 1)..3 {
            s -= r[(i, j)] * z[j];
        }
        z[i] = s / r[(i, i)];
    }
    qr.p().inv_permute_rows(&mut z);
    let out = Vector3::new(z[0], z[1], z[2]);
    out.iter().all(|c| c.is_finite()).then_some(out)
}

/// One-norm condition estimate `‖A‖₁·‖A⁻¹‖₁` of the 3×3 normal matrix;
/// infinite when the matrix fails to invert.
fn condition_estimate(a: &Matrix3<f64>) -> f64 {
    let norm1 = |m: &Matrix3<f64>| {
        (0..3)
            .map(|j| (0..3).map(|i| m[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match a.try_inverse() {
        Some(inv) => norm1(a) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// Gaussian elimination with full pivoting on the 3×3 system.
fn solve_full_pivot(a: &Matrix3<f64>, b: &Vector3<f64>) -> Option<Vector3<f64>> {
    let mut m = *a;
    let mut rhs = *b;
    let mut col_perm = [0usize, 1, 2];

    for k in 0..3 {
        // largest remaining entry as pivot
        let (mut pi, mut pj, mut pmax) = (k, k, 0.0);
        for i in k..3 {
            for j in k..3 {
                if m[(i, j)].abs() > pmax {
                    pmax = m[(i, j)].abs();
                    pi = i;
                    pj = j;
                }
            }
        }
        if pmax == 0.0 {
            return None;
        }
        if pi != k {
            m.swap_rows(k, pi);
            rhs.swap_rows(k, pi);
        }
        if pj != k {
            m.swap_columns(k, pj);
            col_perm.swap(k, pj);
        }
        for i in (k + 1)..3 {
            let f = m[(i, k)] / m[(k, k)];
            for j in k..3 {
                m[(i, j)] -= f * m[(k, j)];
            }
            rhs[i] -= f * rhs[k];
        }
    }

    let mut y = Vector3::zeros();
    for k in (0..3).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..3 {
            s -= m[(k, j)] * y[j];
        }
        y[k] = s / m[(k, k)];
    }
    let mut x = Vector3::zeros();
    for k in 0..3 {
        x[col_perm[k]] = y[k];
    }
    if x.iter().all(|c| c.is_finite()) {
        Some(x)
    } else {
        None
    }
}
