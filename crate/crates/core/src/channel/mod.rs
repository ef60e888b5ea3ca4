//! Array geometry, field-response channels and random scenario generation.

mod geometry;
mod paths;
mod rate;
mod scenario;

pub use geometry::{
    half_wavelength_offsets, ArrayGeometry, GeometryParams, Point2, Region, SubArrayCenters,
};
pub use paths::{
    channel_matrix, frv_receive, frv_transmit, full_channel, subarray_channel, Angle,
    PathResponse, PathSet, UserResponse,
};
pub use rate::{link_gains, sinrs_from_gains, sum_rate, sum_rate_from_gains};
pub use scenario::{
    sample_angle, sample_scenario, ChannelScenario, GainVariance, PreparedScenario,
    ScenarioConfig,
};
