//! Periodic grids, scalar and vector fields, and the spectral operators
//! acting on them.

mod fields;
mod grid;
pub(crate) mod ops;

pub use fields::{ScalarField, Spectrum, VectorField};
pub(crate) use fields::check_grids;
pub use grid::Grid;
pub use ops::{
    convolve, div, grad, inner, laplacian, leray_project, norm_l2, project_spectra, L2,
};
