//! Multi-penalty (`ℓ¹ + ℓ²`) regularization for sparse unmixing.
//!
//! The crate covers four layers:
//!
//! * [`linalg`]: dense kernels, the regularized operator `A_β` and the
//!   single-penalty reduction `(B_β, y_β)`;
//! * [`conditions`]: exact-support-recovery certificates for one support and
//!   admissible-parameter regions over all supports of a given size;
//! * [`solvers`]: iterative soft-thresholding for single- and multi-penalty
//!   problems, with optimality diagnostics;
//! * [`experiments`]: seeded Monte-Carlo studies over Gaussian ensembles.
//!
//! The `unmix` binary exposes all of it on the command line (see [`cli`]).

pub mod cli;
pub mod conditions;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod solvers;
pub mod subsets;

pub use error::{Error, Result};
pub use linalg::{Beta, IndexSet, Matrix};
