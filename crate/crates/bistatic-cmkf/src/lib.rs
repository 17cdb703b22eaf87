//! Converted-measurement Kalman filtering for bistatic range-sum/bearing
//! radar: coordinate conversion with bias and covariance correction, a linear
//! tracking filter over the converted measurements, and Monte Carlo campaign
//! drivers with consistency metrics.

pub mod conversion;
pub mod filter;
pub mod geometry;
pub mod metrics;
pub mod simulation;

pub use conversion::{
    convert_conventional, convert_ducm, convert_ucm, ducm_covariance, ucm_covariance,
    ucm_position, ConversionError, ConversionMethod, ConvertedMeasurement,
    MeasurementSpacePrediction, NoiseSpec, NoisyMeasurement,
};
pub use filter::{
    constant_velocity_model, initialize, predict, step, track_to_measurement_space, update,
    FilterError, MotionModel, StepOutcome, TrackState, ACCEL_NOISE_VARIANCE,
};
pub use geometry::{
    BistaticGeometry, BistaticPoint, CartesianPoint, ForwardPartials, GeometryError,
    InversePartials,
};
pub use metrics::{
    chi2_mean_bounds, nees_dynamic, nees_static, normalized_error_squared, rmse, MetricsError,
};
pub use simulation::{
    generate_measurement, generate_trajectory, run_static_bias_campaign,
    run_static_nees_campaign, run_tracking_campaign, BearingHistogram, BiasCampaignConfig,
    BiasCampaignResult, BiasMethodStats, BiasPoint, CampaignDiagnostics, HeadingPolicy,
    MeasurementDraw, MethodSeries, NeesSweepPoint, NeesSweepResult, Parallelism, PerMethod,
    ScenarioConfig, SimulationError, StaticSweepConfig, SweptParameter, TrackingCampaignResult,
    CLAMP_MARGIN,
};
