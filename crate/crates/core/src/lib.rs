//! Gauge calculus of planar convex bodies, anisotropic boundary distances,
//! and gradient-constrained variational solvers.
//!
//! The crate is organized bottom-up:
//!
//! * [`geom`]: 2-vectors and symmetric 2x2 matrices.
//! * [`body`]: convex bodies with Minkowski gauge, polar gauge, their
//!   derivatives, polar/reflected bodies and smooth approximations.
//! * [`domain`]: piecewise C^2 domains with corners and signed curvature.
//! * [`distance`]: the anisotropic distance to the boundary, its closed-form
//!   derivatives off the ridge, and sampled distance fields.
//! * [`solver`]: double-obstacle and penalized finite-difference solvers for
//!   `min ∫ F(Dv) + g(v)` with the gradient confined to the polar body,
//!   plus the smoothing pipeline for nonsmooth constraints.
//! * [`verify`]: identity and structure checks with JSON reports.
//! * [`problem`]: TOML problem files used by the command-line tool.

pub mod body;
pub mod distance;
pub mod domain;
pub mod geom;
pub mod grid;
pub mod problem;
pub mod solver;
pub mod verify;
