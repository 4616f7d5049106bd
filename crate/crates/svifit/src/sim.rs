//! Synthetic smiles generated from known parameter sets.
//!
//! Four canonical cases are sampled exactly on the grid
//! `x_i = −1.9 + 0.1·(i − 1)`, `i = 1..=39`, so a calibrator seeded with the
//! analytic minimum point should recover the generating parameters to
//! numerical precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Smile, SviParams};

/// Number of grid points.
pub const GRID_COUNT: usize = 39;
/// Grid start.
pub const GRID_START: f64 = -1.9;
/// Grid spacing.
pub const GRID_STEP: f64 = 0.1;

/// A simulation case: id and generating parameters; the grid is shared.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimCase {
    pub id: u32,
    pub params: SviParams,
}

impl SimCase {
    pub fn new(id: u32) -> Result<Self> {
        Ok(Self {
            id,
            params: case_params(id)?,
        })
    }

    /// Evaluates the generating curve exactly on the shared grid.
    pub fn smile(&self) -> Smile {
        let points: Vec<(f64, f64)> = reference_grid()
            .into_iter()
            .map(|x| (x, self.params.eval(x)))
            .collect();
        Smile::new(points).expect("case curves are positive on the grid")
    }
}

/// The evaluation grid shared by all cases.
pub fn reference_grid() -> Vec<f64> {
    (0..GRID_COUNT)
        .map(|i| GRID_START + GRID_STEP * i as f64)
        .collect()
}

/// True parameters for case ids 1 through 4.
pub fn case_params(id: u32) -> Result<SviParams> {
    let (a, b, rho, m, sigma) = match id {
        1 => (0.5, 0.5, -0.5, -0.3, 0.5),
        2 => (0.05, 0.63, -0.55, 0.036, 0.26),
        3 => (0.05, 0.63, 0.55, 0.036, 0.26),
        4 => (0.1, 0.06, -0.7, 0.24, 0.06),
        _ => return Err(Error::UnknownCase { id }),
    };
    SviParams::new(a, b, rho, m, sigma)
}

/// Generates the case smile by evaluating the true curve on the grid.
pub fn simulate_case(id: u32) -> Result<(Smile, SviParams)> {
    let case = SimCase::new(id)?;
    Ok((case.smile(), case.params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_matches_the_reference_layout() {
        let g = reference_grid();
        assert_eq!(g.len(), 39);
        assert_abs_diff_eq!(g[0], -1.9, epsilon = 1e-15);
        assert_abs_diff_eq!(g[38], 1.9, epsilon = 1e-12);
        for w in g.windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn case1_first_point_value() {
        let (smile, _) = simulate_case(1).unwrap();
        assert_abs_diff_eq!(smile.xs()[0], -1.9, epsilon = 1e-15);
        // independently evaluated with 30-digit arithmetic
        assert_abs_diff_eq!(smile.vs()[0], 1.7381527307120105, epsilon = 1e-14);
    }

    #[test]
    fn case3_mirrors_case2_skew() {
        let p2 = case_params(2).unwrap();
        let p3 = case_params(3).unwrap();
        assert_eq!(p3.rho, -p2.rho);
        assert_eq!((p3.a, p3.b, p3.m, p3.sigma), (p2.a, p2.b, p2.m, p2.sigma));
    }

    #[test]
    fn unknown_case_is_rejected() {
        assert!(matches!(simulate_case(5), Err(Error::UnknownCase { id: 5 })));
        assert!(matches!(simulate_case(0), Err(Error::UnknownCase { id: 0 })));
    }
}
