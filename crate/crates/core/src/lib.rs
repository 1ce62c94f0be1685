//! Numerical machinery for isoperimetric problems in radially log-convex
//! densities: generating curves of constant generalized mean curvature,
//! weighted measures, comparison checks and spherical symmetrization.

pub mod acceptance;
pub mod appendix;
pub mod comparisons;
pub mod density;
pub mod geometry;
pub mod measures;
pub mod ode;
pub mod quadrature;
pub mod shooting;
pub mod symmetrization;

pub use density::{Density, DensityKind};
pub use geometry::CurveState;
pub use shooting::{ShootingConfig, Trajectory};
