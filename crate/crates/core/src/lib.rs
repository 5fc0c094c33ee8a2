//! Numerical machinery for positive solutions of singular quasilinear
//! elliptic systems with gradient-dependent right-hand sides.

// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod barriers;
pub mod error;
pub mod estimates;
pub mod fixedpoint;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod plap;
pub mod system;

pub use barriers::{
    build_barrier_set, build_singular_barrier, build_torsion, build_y, build_z, verify_lemma2, BarrierOptions, BarrierSet,
};
pub use error::{Error, Result};
pub use estimates::{calibrate_kp, check_hardy, energy_chain_report, validate_kp, CalibrationReport, Problem};
pub use fixedpoint::{
    apply_t, iterate, membership, run_fixpoint, select_c, DriverOptions, FixpointRun, FixpointState, IterateOptions, Rectangle,
    Status,
};
pub use mesh::{build_mesh, gradient, integrate_singular, norm_lr, norm_sup_grad, Mesh, ScalarField};
pub use plap::{plap_residual, plap_solve, plap_solve_from, Load, PlapConfig, PlapSolution};
pub use system::{check_envelope, eval_f, validate_cdt, Args, CdtReport, Expr, SystemSpec};
