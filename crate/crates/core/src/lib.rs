//! Numerical engine for probe-type reconstruction of obstacles in a bounded
//! 2D acoustic domain.
//!
//! The library simulates boundary measurements (the Dirichlet-to-Neumann map
//! of the Helmholtz equation with embedded impedance or sound-soft obstacles)
//! with a Nystrom boundary-integral solver, constructs point-source
//! approximations concentrated along user-chosen needles, evaluates indicator
//! sequences and functions from the measurements, classifies points by the
//! divergence behaviour of the indicator, and bundles the asymptotic claims
//! behind that classification into a measurable verification suite.

pub mod forward;
pub mod geometry;
pub mod needles;
pub mod oracle;
pub mod quadrature;
pub mod specfun;
pub mod vec2;

pub use vec2::Vec2;
