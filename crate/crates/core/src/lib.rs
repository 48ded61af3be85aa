//! Divergence-conforming isogeometric collocation for steady incompressible
//! Navier-Stokes and Stokes flow.

pub mod analytic;
pub mod cases;
pub mod colloc2d;
pub mod colloc3d;
pub mod dofs;
pub mod error;
pub mod kernels;
pub mod mapped;
pub mod quadrature;
pub mod scalar;
pub mod solver;
pub mod spaces;
pub mod sparse;
pub mod splines;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision knot vector.
pub type KnotVectorF64 = splines::KnotVector<f64>;
/// Double-precision tensor spline space.
pub type TensorSpaceF64 = spaces::TensorSpace<f64>;
/// Double-precision 2D compatible spaces.
pub type Complex2D = spaces::ComplexSpaces2D<f64>;
/// Double-precision 3D compatible spaces.
pub type Complex3D = spaces::ComplexSpaces3D<f64>;
