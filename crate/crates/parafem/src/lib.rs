//! A laboratory for low-order finite element discretizations of
//! parabolic problems
//!
//!   du/dt + A(t) u = f,   u(0) = u_0,
//!
//! with A(t) a second-order form (diffusion, convection, reaction) on an
//! interval or a square, homogeneous Dirichlet boundary, and piecewise
//! linear elements on uniformly refined simplicial meshes.
//!
//! The pieces fit together as follows: `mesh` builds the triangulations
//! and their refinement lineage, `assembly` turns coefficient functions
//! into sparse mass/stiffness/form matrices over the interior vertices,
//! `stepping` runs the implicit Euler scheme, and `energy_error` measures
//! the distance between a computed trajectory and an exact solution in a
//! norm that controls both the time derivative (through a computable dual
//! norm) and the spatial gradient. `problems` carries a small catalog of
//! manufactured solutions — smooth products, a high-contrast checkerboard,
//! and rough sine series with declared space-time norms — and `study`
//! drives refinement studies over the catalog with fitted convergence
//! rates. `verify` bundles the self-checks behind the command-line
//! `verify` subcommand.

// Validation guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`
// they also reject NaN. Indexed loops are kept where several arrays are
// walked in lockstep in the numerical kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod energy_error;
pub mod error;
pub mod function;
pub mod linalg;
pub mod mesh;
pub mod modal;
pub mod norms;
pub mod problems;
pub mod projection;
pub mod quadrature;
pub mod stepping;
pub mod study;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
