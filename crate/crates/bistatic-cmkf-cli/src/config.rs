//! Flat TOML configuration schemas for the campaign subcommands.
//!
//! Angles cross this boundary in degrees and carry an explicit `_deg` key
//! suffix; everything downstream of parsing works in radians. Unknown keys
//! are rejected, and each schema is validated eagerly so a bad file fails
//! before any simulation work starts. The built-in presets are the canonical
//! example files under `configs/`, embedded at compile time.

use std::f64::consts::PI;
use std::fmt;

use bistatic_cmkf::{
    BiasCampaignConfig, BistaticGeometry, CartesianPoint, ConversionError, GeometryError,
    HeadingPolicy, NoiseSpec, ScenarioConfig, StaticSweepConfig, SweptParameter,
};
use nalgebra::Matrix2;
use serde::Deserialize;

const DEG: f64 = PI / 180.0;

/// Canonical preset files per subcommand; `--preset NAME` resolves here.
pub const BIAS_PRESETS: &[(&str, &str)] = &[("fig2", include_str!("../configs/fig2.toml"))];
pub const NEES_PRESETS: &[(&str, &str)] = &[
    ("fig3a", include_str!("../configs/fig3a.toml")),
    ("fig3b", include_str!("../configs/fig3b.toml")),
    ("fig3c", include_str!("../configs/fig3c.toml")),
    ("fig3d", include_str!("../configs/fig3d.toml")),
];
pub const TRACK_PRESETS: &[(&str, &str)] = &[("fig4", include_str!("../configs/fig4.toml"))];

#[derive(Debug)]
pub enum ConfigError {
    Parse(toml::de::Error),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(err) => write!(f, "config parse error: {err}"),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<toml::de::Error> for ConfigError {
    fn from(err: toml::de::Error) -> Self {
        ConfigError::Parse(err)
    }
}

impl From<GeometryError> for ConfigError {
    fn from(err: GeometryError) -> Self {
        ConfigError::Invalid(err.to_string())
    }
}

impl From<ConversionError> for ConfigError {
    fn from(err: ConversionError) -> Self {
        ConfigError::Invalid(err.to_string())
    }
}

/// Static bias campaign: repeated conversions of fixed truth points.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasConfig {
    pub baseline: f64,
    pub range_sum: f64,
    pub sigma_range_sum: f64,
    pub sigma_bearing_deg: f64,
    pub bearings_deg: Vec<f64>,
    pub runs_per_bearing: u64,
    pub histogram_bins: usize,
    pub histogram_half_width_sigmas: f64,
    pub seed: u64,
}

impl BiasConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: BiasConfig = toml::from_str(text)?;
        cfg.to_campaign()?;
        Ok(cfg)
    }

    pub fn to_campaign(&self) -> Result<BiasCampaignConfig, ConfigError> {
        if self.bearings_deg.is_empty() {
            return Err(ConfigError::Invalid("empty bearing grid".into()));
        }
        Ok(BiasCampaignConfig {
            geometry: BistaticGeometry::new(self.baseline)?,
            noise: NoiseSpec::new(self.sigma_range_sum, self.sigma_bearing_deg * DEG)?,
            range_sum: self.range_sum,
            bearings: self.bearings_deg.iter().map(|b| b * DEG).collect(),
            runs_per_bearing: self.runs_per_bearing,
            histogram_bins: self.histogram_bins,
            histogram_half_width_sigmas: self.histogram_half_width_sigmas,
            seed: self.seed,
        })
    }
}

/// Sweep axis selector; angle axes take their grid from `grid_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptKey {
    RangeSum,
    Bearing,
    SigmaRangeSum,
    SigmaBearing,
}

impl SweptKey {
    pub fn is_angle(self) -> bool {
        matches!(self, SweptKey::Bearing | SweptKey::SigmaBearing)
    }

    /// Stem of the output file name, `nees_<stem>.csv`.
    pub fn file_stem(self) -> &'static str {
        match self {
            SweptKey::RangeSum => "range_sum",
            SweptKey::Bearing => "bearing",
            SweptKey::SigmaRangeSum => "sigma_range_sum",
            SweptKey::SigmaBearing => "sigma_bearing",
        }
    }

    fn to_library(self) -> SweptParameter {
        match self {
            SweptKey::RangeSum => SweptParameter::RangeSum,
            SweptKey::Bearing => SweptParameter::Bearing,
            SweptKey::SigmaRangeSum => SweptParameter::SigmaRangeSum,
            SweptKey::SigmaBearing => SweptParameter::SigmaBearing,
        }
    }
}

/// Static consistency sweep: average NEES per grid point of one swept
/// parameter. Exactly one of `grid` (metric axes) or `grid_deg` (angle axes)
/// must be present, matching the swept parameter's unit.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeesConfig {
    pub baseline: f64,
    pub swept: SweptKey,
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub grid_deg: Option<Vec<f64>>,
    pub range_sum: f64,
    pub bearing_deg: f64,
    pub sigma_range_sum: f64,
    pub sigma_bearing_deg: f64,
    pub runs_per_point: u64,
    /// Row-major 2x2 shape of the prediction-corruption covariance; scaled by
    /// the current range-sum noise variance at every grid point.
    pub prediction_unit_covariance: [f64; 4],
    pub confidence: f64,
    pub seed: u64,
}

impl NeesConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: NeesConfig = toml::from_str(text)?;
        cfg.to_campaign()?;
        Ok(cfg)
    }

    fn grid_radians(&self) -> Result<Vec<f64>, ConfigError> {
        let grid = match (self.swept.is_angle(), &self.grid, &self.grid_deg) {
            (true, None, Some(deg)) => deg.iter().map(|g| g * DEG).collect(),
            (false, Some(grid), None) => grid.clone(),
            (true, _, _) => {
                return Err(ConfigError::Invalid(format!(
                    "swept = \"{}\" is an angle axis: provide `grid_deg`, not `grid`",
                    self.swept.file_stem()
                )))
            }
            (false, _, _) => {
                return Err(ConfigError::Invalid(format!(
                    "swept = \"{}\" is a metric axis: provide `grid`, not `grid_deg`",
                    self.swept.file_stem()
                )))
            }
        };
        if grid.is_empty() {
            return Err(ConfigError::Invalid("empty sweep grid".into()));
        }
        Ok(grid)
    }

    pub fn to_campaign(&self) -> Result<StaticSweepConfig, ConfigError> {
        let p = self.prediction_unit_covariance;
        if p[1] != p[2] {
            return Err(ConfigError::Invalid(
                "prediction_unit_covariance must be symmetric".into(),
            ));
        }
        Ok(StaticSweepConfig {
            geometry: BistaticGeometry::new(self.baseline)?,
            swept: self.swept.to_library(),
            grid: self.grid_radians()?,
            range_sum: self.range_sum,
            bearing: self.bearing_deg * DEG,
            noise: NoiseSpec::new(self.sigma_range_sum, self.sigma_bearing_deg * DEG)?,
            runs_per_point: self.runs_per_point,
            prediction_unit_covariance: Matrix2::new(p[0], p[1], p[2], p[3]),
            confidence: self.confidence,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingKey {
    Random,
    Fixed,
}

/// Tracking campaign: constant-velocity target, one filter per conversion
/// method on shared measurement streams.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackConfig {
    pub baseline: f64,
    pub sigma_range_sum: f64,
    pub sigma_bearing_deg: f64,
    pub period: f64,
    pub scan_count: usize,
    pub run_count: u64,
    pub initial_x: f64,
    pub initial_y: f64,
    pub initial_speed: f64,
    pub heading: HeadingKey,
    /// Required iff `heading = "fixed"`.
    #[serde(default)]
    pub heading_deg: Option<f64>,
    pub truth_process_noise: bool,
    pub confidence: f64,
    pub seed: u64,
}

impl TrackConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: TrackConfig = toml::from_str(text)?;
        cfg.to_campaign()?;
        Ok(cfg)
    }

    pub fn to_campaign(&self) -> Result<ScenarioConfig, ConfigError> {
        let heading = match (self.heading, self.heading_deg) {
            (HeadingKey::Random, None) => HeadingPolicy::RandomUniform,
            (HeadingKey::Fixed, Some(deg)) => HeadingPolicy::Fixed(deg * DEG),
            (HeadingKey::Random, Some(_)) => {
                return Err(ConfigError::Invalid(
                    "heading_deg is only valid with heading = \"fixed\"".into(),
                ))
            }
            (HeadingKey::Fixed, None) => {
                return Err(ConfigError::Invalid(
                    "heading = \"fixed\" requires heading_deg".into(),
                ))
            }
        };
        Ok(ScenarioConfig {
            geometry: BistaticGeometry::new(self.baseline)?,
            noise: NoiseSpec::new(self.sigma_range_sum, self.sigma_bearing_deg * DEG)?,
            period: self.period,
            scan_count: self.scan_count,
            run_count: self.run_count,
            initial_position: CartesianPoint::new(self.initial_x, self.initial_y),
            initial_speed: self.initial_speed,
            heading,
            truth_process_noise: self.truth_process_noise,
            seed: self.seed,
            confidence: self.confidence,
        })
    }
}
