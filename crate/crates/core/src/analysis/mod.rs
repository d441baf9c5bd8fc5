//! Geodesic distances, metric balls, the maximal function and volume ratio, cut-offs,
//! and the localized inequality checkers.

mod balls;
mod checks;
mod distance;
mod slice;

pub use balls::{
    ball_profile, build_cutoff, cutoff_profile, maximal_function, maximal_function_log,
    radius_grid, small_radius_limit, volume_ratio, write_profiles_csv, Ball, BallProfile, Cutoff,
    DEFAULT_RADII, FLOOR_OCTAVES, RADII_PER_OCTAVE,
};
pub use checks::{
    check_alternative, check_alternative_radii, check_functional_inequality, check_functional_radii, delta_constant,
    iteration_claim, log_sobolev_level, AlternativeReport, ClaimRecord, LogConstant,
};
pub(crate) use checks::iteration_exponent;
pub use distance::{
    diameter, distance, distance_field, geodesic, DiameterMeasurement, DistanceField, Geodesic,
    Point,
};
pub use slice::{march, SliceField, SliceGeometry};
