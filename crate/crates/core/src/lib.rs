//! Simulation and verification of the ε-regularized elastic flow of open plane
//! curves with pinned endpoints, together with its ε → 0 limit, the curvature flow.
//!
//! The crate is split along the lines of the computation:
//!
//! * [`geometry`]: discrete open curves, arclength calculus, constant-speed
//!   reparametrization and the snapshot file format.
//! * [`flow`]: normal/tangential velocities and the semi-implicit time stepper.
//! * [`estimates`]: energy, dissipation, boundary residuals, interpolation
//!   inequalities and the Gronwall majorant with its doubling time.
//! * [`convergence`]: the ε-ladder experiment and C^k distances.
//! * [`config`], [`output`], [`verify`]: configuration, file emission and the
//!   acceptance suite driven by the `elastic-flow` binary.

// `!(x > 0.0)` rejects NaN as well; index loops mirror the stencil formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod config;
pub mod convergence;
pub mod error;
pub mod estimates;
pub mod flow;
pub mod geometry;
pub mod output;
pub mod spline;
pub mod stencil;
pub mod verify;

pub use error::{FlowError, Result};
pub use flow::{FlowConfig, FlowState, Termination, Trajectory};
pub use geometry::{DiscreteCurve, GeometryCache, Point2};
