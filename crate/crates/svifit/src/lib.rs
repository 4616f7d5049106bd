//! Calibration engine for the five-parameter implied-variance smile
//! `v(x) = a + b(ρ(x − m) + √((x − m)² + σ²))`.
//!
//! The core method is an anchored fixed-point iteration: for a fixed anchor
//! (a minimum point or a point-with-slope), every step solves the explicit
//! linear least-squares problem for `(a, bρ, b)` and then recovers `(m, σ)`
//! from the anchor in closed form. Both half-steps are explicit, which makes
//! a step orders of magnitude cheaper than derivative-free search over
//! `(m, σ)`; the classical quasi-explicit alternation is included as a
//! baseline for exactly that comparison.
//!
//! Monotone degenerate smiles (`ρ² = 1`, no finite minimum) calibrate
//! through a coordinate rotation that maps them back into the regular
//! family, and a convergence monitor evaluates sufficient contraction
//! conditions numerically along any recorded trajectory.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `svifit` binary for the `fit` / `simulate` / `compare` /
//! `certify` command-line surface.

pub mod anchor;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod fpi;
pub mod io;
pub mod linear;
pub mod model;
pub mod qe;
pub mod report;
pub mod rotation;
pub mod sim;

pub use anchor::{
    min_point_method_i, min_point_method_ii, min_point_method_iii, slope_anchor_method_iip,
    slope_anchor_method_ip, QuadraticFit, SlopeAnchor,
};
pub use diagnostics::{
    certify, compute_metrics, update_gain_bounds, ConvergenceCertificate, ErrorMetrics,
};
pub use error::{Error, Result};
pub use fpi::{fpi_fit, Anchor, FitTrace, FpiConfig, StopRule};
pub use io::{emit_curve, load_smile, write_smile_csv};
pub use model::{AnchorSource, MinPoint, Smile, SviParams};
pub use qe::{nelder_mead_2d, qe_fit, NmConfig, QeConfig};
pub use report::{CompareReport, FitReport};
pub use rotation::{fit_rotated, map_params_through_rotation, RotatedFit, RotatedParamMap};
pub use sim::{case_params, reference_grid, simulate_case, SimCase};
