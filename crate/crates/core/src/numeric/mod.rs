//! Numerical building blocks: quadrature, differentiation, interpolation.

pub mod diff;
pub mod quad;
pub mod spline;

pub use quad::{gauss_legendre, integrate, integrate_segment, QuadValue};
pub use spline::CubicSpline;
