//! Numerical workbench for nonlocal elliptic operators of fractional order: principal
//! value evaluation, boundary barriers, a monotone Dirichlet solver for solutions that
//! blow up at the boundary, and the experiments that check their boundary behaviour.

pub mod analysis;
pub mod barriers;
pub mod error;
pub mod field;
pub mod geometry;
pub mod kernels;
pub mod nonlocal_eval;
pub mod point;
pub mod quadrature;
pub mod real;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use field::{FieldRef, Integrability, RayBreak, ScalarField};
pub use geometry::{BoundaryFrame, Domain, Shape};
pub use kernels::{Anisotropy, EllipticityBounds, Kernel, KernelFamily};
pub use nonlocal_eval::{EvalResult, QuadratureConfig, TailMode};
pub use point::Point;
pub use real::Real;

pub type Point64 = Point<f64>;
pub type Kernel64 = Kernel<f64>;
pub type Domain64 = Domain<f64>;
pub type Kernel32 = Kernel<f32>;
pub type Domain32 = Domain<f32>;
