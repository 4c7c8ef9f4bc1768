//! Gaussian-mixture view of boundary-weighted resampling: EM fitting,
//! mean-shift mode seeking with and without a boundary weight, and a grid of
//! mixtures that mirrors the engine's topology.

mod gmm;
mod grid;
mod modes;

pub use gmm::{gmm_fit_em, EmFit, EmInit, EmOptions, GaussianComponent, GaussianMixture, COV_FLOOR};
pub use grid::{gmm_grid_epoch, surviving_modes, GmmGrid, GmmGridOptions};
pub use modes::{
    default_starts, find_all_modes, fixed_point_step, meanshift_fixed_point, weighted_density,
    weighted_density_gradient, weighted_fixed_point, BoundaryWeight, FixedPoint, FixedPointOptions, Mode,
    ModeOptions, ModeSet,
};
