//! Josephy-Newton iteration for generalized equations `0 in F(x) + T(x)` on
//! R^n, with `F` smooth and `T` maximal monotone, together with
//! Kantorovich-type majorant certificates that predict existence,
//! uniqueness radius, error bounds and convergence rates of the iteration.
//!
//! - [`linop`]: symmetric part, positivity, spectral norms, Banach inversion.
//! - [`majorant`]: majorant functions, `t*`, the scalar Newton sequence.
//! - [`monotone`]: normal cones and l1 subdifferentials through resolvents.
//! - [`inner`]: the affine subproblem solved at each Newton step.
//! - [`newton`]: the outer iteration, certificates and bound verification.
//! - [`derivative`]: finite-difference and constant-falsification checks.
//! - [`harness`]: problem files, the builtin catalog and run reports.
//!
//! Sampling-heavy routines run on the rayon pool when the `parallel`
//! feature (on by default) is enabled; results are identical either way.

// `!(x > 0.0)` is the NaN-rejecting form used throughout for validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod derivative;
pub mod error;
pub mod exec;
pub mod harness;
pub mod inner;
pub mod linop;
pub mod majorant;
pub mod monotone;
pub mod newton;
pub mod sampling;

pub use error::{Error, Result};
pub use inner::{AffineGe, InnerMethod, InnerSolution, MethodChoice};
pub use linop::{Matrix, Vector};
pub use majorant::{Certificate, MajorantSpec};
pub use monotone::SetValuedOperator;
pub use newton::{CertificateMode, GeProblem, OuterConfig, SolveStatus, SolveTrace};
