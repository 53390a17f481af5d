//! Laplacians on metric graphs with general, possibly non-self-adjoint,
//! vertex conditions: spectra via secular determinants, resolvent kernels
//! and similarity transforms.

pub mod bcspace;
pub mod graph;
pub mod linalg;
pub mod resolvent;
pub mod secular;
pub mod similarity;
pub mod spectrum;

pub type C64 = nalgebra::Complex<f64>;
pub type CMat = nalgebra::DMatrix<C64>;

pub use bcspace::{BoundaryConditions, Tolerances};
pub use graph::MetricGraph;
