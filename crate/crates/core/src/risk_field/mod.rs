//! Deterministic interaction-field risk: pairwise energy and force, Doppler
//! directional coefficients, and grid rasterization.

mod field;
mod params;
mod raster;

pub use field::{
    alpha_lat, alpha_lon, directional_force, directional_samples, distance_floor, doppler_ratio,
    interaction_energy, pairwise_force, total_directional_force, total_energy, total_force, RiskSample,
};
pub use params::RiskFieldParams;
pub use raster::{
    rasterize, rasterize_states, read_raster, sample_grid, write_raster, GridSpec, RasterSidecar, RiskRaster,
    PROBE_ID,
};
