//! Round-sphere base geometry: grids, quadrature, operators and conformal metrics.

mod graph;
mod grid;
mod metric;
mod ops;

pub use graph::{angular_distance, GraphSample};
pub use grid::{
    euclidean_ball_volume, gauss_legendre, sin_power_integral, sphere_volume, RadialGrid, MIN_GRID,
};
pub use metric::{
    conformal_coefficient, critical_exponent, Backend, ConformalMetric, ScalarField,
};
pub use ops::{
    deformed_scalar_curvature, dirichlet_energy, integrate, laplace_beltrami, laplacian,
    scalar_curvature,
};
pub(crate) use ops::shell_factor;
