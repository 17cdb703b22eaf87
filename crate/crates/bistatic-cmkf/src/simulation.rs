//! Scenario generation and Monte Carlo campaign drivers: static conversion
//! bias, static NEES sweeps over geometry and noise parameters, and dynamic
//! tracking runs feeding all conversion methods the same measurement streams.
//!
//! Campaigns execute over fixed-size chunks of runs. Every run seeds its own
//! generator from `(campaign seed, stream index, run index)`, chunk results
//! are collected in chunk order, and totals are folded sequentially, so the
//! output is bitwise identical for any thread count, and shards that split on
//! chunk boundaries merge exactly by concatenating their chunk lists.

use crate::conversion::{
    convert_conventional, convert_ducm, convert_ucm, ConversionError, ConversionMethod,
    MeasurementSpacePrediction, NoiseSpec, NoisyMeasurement,
};
use crate::filter::{
    constant_velocity_model, initialize, step, FilterError, TrackState, ACCEL_NOISE_VARIANCE,
};
use crate::geometry::{BistaticGeometry, BistaticPoint, CartesianPoint, GeometryError};
use crate::metrics::{chi2_mean_bounds, normalized_error_squared, MetricsError};
use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Noisy range sums at or below this relative margin above the baseline are
/// lifted onto it so campaigns keep running; every lift is counted.
pub const CLAMP_MARGIN: f64 = 1e-6;

const STATIC_CHUNK_RUNS: u64 = 256;
const TRACKING_CHUNK_RUNS: u64 = 8;

/// Errors from campaign configuration and propagated library failures.
#[derive(Debug, Clone, PartialEq)]
pub enum SimulationError {
    Geometry(GeometryError),
    Conversion(ConversionError),
    Filter(FilterError),
    Metrics(MetricsError),
    InvalidConfig(String),
}

impl std::fmt::Display for SimulationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimulationError::Geometry(e) => write!(f, "{e}"),
            SimulationError::Conversion(e) => write!(f, "{e}"),
            SimulationError::Filter(e) => write!(f, "{e}"),
            SimulationError::Metrics(e) => write!(f, "{e}"),
            SimulationError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for SimulationError {}

impl From<GeometryError> for SimulationError {
    fn from(e: GeometryError) -> Self {
        SimulationError::Geometry(e)
    }
}

impl From<ConversionError> for SimulationError {
    fn from(e: ConversionError) -> Self {
        SimulationError::Conversion(e)
    }
}

impl From<FilterError> for SimulationError {
    fn from(e: FilterError) -> Self {
        SimulationError::Filter(e)
    }
}

impl From<MetricsError> for SimulationError {
    fn from(e: MetricsError) -> Self {
        SimulationError::Metrics(e)
    }
}

/// Execution strategy for a campaign. `Threaded` uses the rayon pool when the
/// `parallel` feature is enabled and silently degrades to sequential
/// execution otherwise; results are bitwise identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Threaded,
}

/// One value per conversion method.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PerMethod<T> {
    pub conventional: T,
    pub ucm: T,
    pub ducm: T,
}

impl<T> PerMethod<T> {
    pub fn from_fn(mut f: impl FnMut(ConversionMethod) -> T) -> Self {
        Self {
            conventional: f(ConversionMethod::Conventional),
            ucm: f(ConversionMethod::Ucm),
            ducm: f(ConversionMethod::Ducm),
        }
    }

    pub fn get(&self, method: ConversionMethod) -> &T {
        match method {
            ConversionMethod::Conventional => &self.conventional,
            ConversionMethod::Ucm => &self.ucm,
            ConversionMethod::Ducm => &self.ducm,
        }
    }

    pub fn get_mut(&mut self, method: ConversionMethod) -> &mut T {
        match method {
            ConversionMethod::Conventional => &mut self.conventional,
            ConversionMethod::Ucm => &mut self.ucm,
            ConversionMethod::Ducm => &mut self.ducm,
        }
    }
}

/// Observability counters common to every campaign. The checksum folds every
/// measurement draw with an order-insensitive mix, so campaigns that share a
/// seed prove they consumed identical measurement streams by reporting equal
/// checksums.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CampaignDiagnostics {
    pub runs: u64,
    pub clamp_events: u64,
    pub ducm_fallback_events: u64,
    pub covariance_adjust_events: u64,
    pub measurement_checksum: u64,
}

impl CampaignDiagnostics {
    fn absorb(&mut self, other: &CampaignDiagnostics) {
        self.runs += other.runs;
        self.clamp_events += other.clamp_events;
        self.ducm_fallback_events += other.ducm_fallback_events;
        self.covariance_adjust_events += other.covariance_adjust_events;
        self.measurement_checksum = self
            .measurement_checksum
            .wrapping_add(other.measurement_checksum);
    }

    fn note_measurement(&mut self, draw: &MeasurementDraw) {
        if draw.clamped {
            self.clamp_events += 1;
        }
        let point = draw.measurement.point;
        let mixed = splitmix64(
            point.range_sum.to_bits() ^ splitmix64(point.bearing.to_bits() ^ 0x5851F42D4C957F2D),
        );
        self.measurement_checksum = self.measurement_checksum.wrapping_add(mixed);
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

// Per-run generator independent of every other run: changing the run count
// never reshuffles earlier runs, and each (stream, run) pair is decorrelated
// by two mixing rounds.
fn run_rng(campaign_seed: u64, stream: u64, run: u64) -> ChaCha12Rng {
    let s = splitmix64(splitmix64(campaign_seed) ^ stream);
    ChaCha12Rng::seed_from_u64(splitmix64(s ^ run))
}

// Chunked executor: maps fixed chunks of the run range in chunk order.
fn map_chunks<P, F>(
    runs: u64,
    chunk_size: u64,
    parallelism: Parallelism,
    f: F,
) -> Result<Vec<P>, SimulationError>
where
    P: Send,
    F: Fn(std::ops::Range<u64>) -> Result<P, SimulationError> + Sync + Send,
{
    let ranges: Vec<std::ops::Range<u64>> = (0..runs)
        .step_by(chunk_size.max(1) as usize)
        .map(|start| start..(start + chunk_size).min(runs))
        .collect();
    match parallelism {
        Parallelism::Sequential => ranges.into_iter().map(f).collect(),
        Parallelism::Threaded => {
            #[cfg(feature = "parallel")]
            {
                ranges.into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                ranges.into_iter().map(f).collect()
            }
        }
    }
}

/// One noisy measurement draw plus whether the range sum had to be lifted
/// back above the baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementDraw {
    pub measurement: NoisyMeasurement,
    pub clamped: bool,
}

/// Draws one measurement of `truth_position`: the exact measurement-space
/// point plus independent Gaussian noise on each coordinate. Both noise draws
/// are consumed even at zero sigma so the stream layout never depends on the
/// noise level.
pub fn generate_measurement(
    truth_position: CartesianPoint,
    noise: NoiseSpec,
    geom: &BistaticGeometry,
    rng: &mut ChaCha12Rng,
) -> Result<MeasurementDraw, GeometryError> {
    let exact = geom.to_measurement(truth_position)?;
    let w_b: f64 = rng.sample(StandardNormal);
    let w_a: f64 = rng.sample(StandardNormal);
    let mut range_sum = exact.range_sum + noise.sigma_range_sum() * w_b;
    let bearing = exact.bearing + noise.sigma_bearing() * w_a;
    let floor = geom.baseline() * (1.0 + CLAMP_MARGIN);
    let clamped = range_sum <= floor;
    if clamped {
        range_sum = floor;
    }
    Ok(MeasurementDraw {
        measurement: NoisyMeasurement {
            point: BistaticPoint::new(range_sum, bearing),
            noise,
        },
        clamped,
    })
}

/// Initial heading selection for trajectory generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadingPolicy {
    /// Uniform on `[0, 2*pi)`, drawn once per run.
    RandomUniform,
    /// Fixed heading in radians.
    Fixed(f64),
}

/// Full description of one tracking experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: BistaticGeometry,
    pub noise: NoiseSpec,
    pub period: f64,
    pub scan_count: usize,
    pub run_count: u64,
    pub initial_position: CartesianPoint,
    pub initial_speed: f64,
    pub heading: HeadingPolicy,
    /// When set, the truth trajectory picks up process noise sampled from the
    /// filter's own model each scan; otherwise motion is exactly linear.
    pub truth_process_noise: bool,
    pub seed: u64,
    /// Confidence level for the NEES bounds attached to the result.
    pub confidence: f64,
}

impl ScenarioConfig {
    fn validate(&self) -> Result<(), SimulationError> {
        if self.scan_count < 2 {
            return Err(SimulationError::InvalidConfig(format!(
                "scan count must be at least 2, got {}",
                self.scan_count
            )));
        }
        if self.run_count == 0 {
            return Err(SimulationError::InvalidConfig("run count is zero".into()));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(SimulationError::InvalidConfig(format!(
                "sampling period must be positive, got {}",
                self.period
            )));
        }
        if !(self.initial_speed.is_finite() && self.initial_speed >= 0.0) {
            return Err(SimulationError::InvalidConfig(format!(
                "initial speed must be nonnegative, got {}",
                self.initial_speed
            )));
        }
        if self.noise.sigma_range_sum() <= 0.0 || self.noise.sigma_bearing() <= 0.0 {
            return Err(SimulationError::InvalidConfig(
                "campaigns require strictly positive noise sigmas".into(),
            ));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(SimulationError::InvalidConfig(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        if let HeadingPolicy::Fixed(h) = self.heading {
            if !h.is_finite() {
                return Err(SimulationError::InvalidConfig(format!(
                    "fixed heading must be finite, got {h}"
                )));
            }
        }
        Ok(())
    }
}

/// Truth states `[x, vx, y, vy]` for scans `1..=scan_count`. The first state
/// places the target at the configured position with the configured speed
/// along the drawn heading; later states propagate by the constant-velocity
/// transition, plus per-axis white-acceleration noise when enabled.
pub fn generate_trajectory(cfg: &ScenarioConfig, rng: &mut ChaCha12Rng) -> Vec<Vector4<f64>> {
    let heading = match cfg.heading {
        HeadingPolicy::RandomUniform => rng.random::<f64>() * std::f64::consts::TAU,
        HeadingPolicy::Fixed(h) => h,
    };
    let model = constant_velocity_model(cfg.period).expect("validated period");
    let t = cfg.period;
    let sigma_a = ACCEL_NOISE_VARIANCE.sqrt();
    let mut states = Vec::with_capacity(cfg.scan_count);
    let mut state = Vector4::new(
        cfg.initial_position.x,
        cfg.initial_speed * heading.cos(),
        cfg.initial_position.y,
        cfg.initial_speed * heading.sin(),
    );
    states.push(state);
    for _ in 1..cfg.scan_count {
        state = model.transition * state;
        if cfg.truth_process_noise {
            let ax: f64 = rng.sample::<f64, _>(StandardNormal) * sigma_a;
            let ay: f64 = rng.sample::<f64, _>(StandardNormal) * sigma_a;
            state += Vector4::new(ax * t * t / 2.0, ax * t, ay * t * t / 2.0, ay * t);
        }
        states.push(state);
    }
    states
}

/// Configuration of the static conversion-bias campaign: repeated conversion
/// of noisy measurements of fixed truth points across a bearing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasCampaignConfig {
    pub geometry: BistaticGeometry,
    pub noise: NoiseSpec,
    pub range_sum: f64,
    /// Truth bearings in radians.
    pub bearings: Vec<f64>,
    pub runs_per_bearing: u64,
    /// Bins per axis of the per-bearing 2D histogram of conventional
    /// conversions.
    pub histogram_bins: usize,
    /// Histogram half-width per axis in units of the conversion standard
    /// deviation at the truth point.
    pub histogram_half_width_sigmas: f64,
    pub seed: u64,
}

impl BiasCampaignConfig {
    fn validate(&self) -> Result<(), SimulationError> {
        if self.bearings.is_empty() {
            return Err(SimulationError::InvalidConfig("empty bearing grid".into()));
        }
        if self.runs_per_bearing == 0 {
            return Err(SimulationError::InvalidConfig("run count is zero".into()));
        }
        if self.histogram_bins == 0 {
            return Err(SimulationError::InvalidConfig(
                "histogram needs at least one bin per axis".into(),
            ));
        }
        if !(self.histogram_half_width_sigmas.is_finite() && self.histogram_half_width_sigmas > 0.0)
        {
            return Err(SimulationError::InvalidConfig(
                "histogram half-width must be positive".into(),
            ));
        }
        if self.noise.sigma_range_sum() <= 0.0 || self.noise.sigma_bearing() <= 0.0 {
            return Err(SimulationError::InvalidConfig(
                "campaigns require strictly positive noise sigmas".into(),
            ));
        }
        self.geometry.validate_range_sum(self.range_sum)?;
        Ok(())
    }
}

/// Sample mean and standard error of converted positions for one method.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BiasMethodStats {
    pub mean: Vector2<f64>,
    /// Standard error of the mean per axis; zero for a single run.
    pub standard_error: Vector2<f64>,
}

/// Bias statistics at one truth bearing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPoint {
    pub bearing: f64,
    pub truth: CartesianPoint,
    pub runs: u64,
    pub methods: PerMethod<BiasMethodStats>,
}

/// 2D histogram of conventional conversions at one bearing; `counts` is
/// row-major with the x index fastest: `counts[iy * x_centers.len() + ix]`.
/// Draws outside the window saturate into the edge bins, so counts sum to
/// the run count.
#[derive(Debug, Clone, PartialEq)]
pub struct BearingHistogram {
    pub bearing: f64,
    pub x_centers: Vec<f64>,
    pub y_centers: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Output of [`run_static_bias_campaign`].
#[derive(Debug, Clone, PartialEq)]
pub struct BiasCampaignResult {
    pub points: Vec<BiasPoint>,
    pub histograms: Vec<BearingHistogram>,
    pub diagnostics: CampaignDiagnostics,
}

#[derive(Clone)]
struct BiasChunk {
    // sums of deviations from truth and their squares, per method and axis
    dev: PerMethod<Vector2<f64>>,
    dev_sq: PerMethod<Vector2<f64>>,
    hist_counts: Vec<u64>,
    diag: CampaignDiagnostics,
}

/// Repeatedly measures fixed truth points and reports per-method sample
/// means with standard errors plus histograms of the conventional cloud.
pub fn run_static_bias_campaign(
    cfg: &BiasCampaignConfig,
    parallelism: Parallelism,
) -> Result<BiasCampaignResult, SimulationError> {
    cfg.validate()?;
    let geom = cfg.geometry;
    let mut points = Vec::with_capacity(cfg.bearings.len());
    let mut histograms = Vec::with_capacity(cfg.bearings.len());
    let mut diagnostics = CampaignDiagnostics::default();

    for (bearing_idx, &bearing) in cfg.bearings.iter().enumerate() {
        let truth_point = BistaticPoint::new(cfg.range_sum, bearing);
        let truth = geom.to_cartesian(truth_point)?;
        // histogram window sized from the conversion covariance at the truth
        let probe = NoisyMeasurement {
            point: truth_point,
            noise: cfg.noise,
        };
        let r_truth = crate::conversion::ucm_covariance(&probe, &geom)?;
        let half_x = cfg.histogram_half_width_sigmas * r_truth[(0, 0)].max(0.0).sqrt();
        let half_y = cfg.histogram_half_width_sigmas * r_truth[(1, 1)].max(0.0).sqrt();
        let bins = cfg.histogram_bins;
        let bin_of = move |value: f64, center: f64, half: f64| -> usize {
            if half <= 0.0 {
                return 0;
            }
            let t = (value - (center - half)) / (2.0 * half) * bins as f64;
            (t.floor().max(0.0) as usize).min(bins - 1)
        };

        let chunks = map_chunks(
            cfg.runs_per_bearing,
            STATIC_CHUNK_RUNS,
            parallelism,
            |range| -> Result<BiasChunk, SimulationError> {
                let mut chunk = BiasChunk {
                    dev: PerMethod::default(),
                    dev_sq: PerMethod::default(),
                    hist_counts: vec![0u64; bins * bins],
                    diag: CampaignDiagnostics::default(),
                };
                for run in range {
                    let mut rng = run_rng(cfg.seed, bearing_idx as u64, run);
                    let draw = generate_measurement(truth, cfg.noise, &geom, &mut rng)?;
                    chunk.diag.note_measurement(&draw);
                    chunk.diag.runs += 1;
                    let m = draw.measurement;
                    let conventional = convert_conventional(&m, &geom)?;
                    let ucm = convert_ucm(&m, &geom)?;
                    chunk.diag.covariance_adjust_events += u64::from(conventional.covariance_adjusted)
                        + u64::from(ucm.covariance_adjusted);
                    for (method, position) in [
                        (ConversionMethod::Conventional, conventional.position),
                        (ConversionMethod::Ucm, ucm.position),
                        // the DUCM position is by definition the UCM position
                        (ConversionMethod::Ducm, ucm.position),
                    ] {
                        let d = Vector2::new(position.x - truth.x, position.y - truth.y);
                        *chunk.dev.get_mut(method) += d;
                        *chunk.dev_sq.get_mut(method) += d.component_mul(&d);
                    }
                    let ix = bin_of(conventional.position.x, truth.x, half_x);
                    let iy = bin_of(conventional.position.y, truth.y, half_y);
                    chunk.hist_counts[iy * bins + ix] += 1;
                }
                Ok(chunk)
            },
        )?;

        let mut dev = PerMethod::<Vector2<f64>>::default();
        let mut dev_sq = PerMethod::<Vector2<f64>>::default();
        let mut hist_counts = vec![0u64; bins * bins];
        let mut diag = CampaignDiagnostics::default();
        for chunk in &chunks {
            for method in ConversionMethod::ALL {
                *dev.get_mut(method) += chunk.dev.get(method);
                *dev_sq.get_mut(method) += chunk.dev_sq.get(method);
            }
            for (total, part) in hist_counts.iter_mut().zip(&chunk.hist_counts) {
                *total += part;
            }
            diag.absorb(&chunk.diag);
        }

        let n = cfg.runs_per_bearing as f64;
        let methods = PerMethod::from_fn(|method| {
            let sum = dev.get(method);
            let sum_sq = dev_sq.get(method);
            let mean_dev = sum / n;
            let standard_error = if cfg.runs_per_bearing > 1 {
                Vector2::new(
                    ((sum_sq.x - sum.x * sum.x / n) / (n - 1.0)).max(0.0).sqrt() / n.sqrt(),
                    ((sum_sq.y - sum.y * sum.y / n) / (n - 1.0)).max(0.0).sqrt() / n.sqrt(),
                )
            } else {
                Vector2::zeros()
            };
            BiasMethodStats {
                mean: Vector2::new(truth.x + mean_dev.x, truth.y + mean_dev.y),
                standard_error,
            }
        });
        points.push(BiasPoint {
            bearing,
            truth,
            runs: cfg.runs_per_bearing,
            methods,
        });

        let centers = |center: f64, half: f64| -> Vec<f64> {
            (0..bins)
                .map(|i| center - half + (i as f64 + 0.5) * (2.0 * half / bins as f64))
                .collect()
        };
        histograms.push(BearingHistogram {
            bearing,
            x_centers: centers(truth.x, half_x),
            y_centers: centers(truth.y, half_y),
            counts: hist_counts,
        });
        diagnostics.absorb(&diag);
    }

    Ok(BiasCampaignResult {
        points,
        histograms,
        diagnostics,
    })
}

/// Which scenario parameter a static NEES sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptParameter {
    /// Range sum, with the truth on the perpendicular bisector of the
    /// baseline (both sensor ranges equal).
    RangeSum,
    /// Truth bearing in radians.
    Bearing,
    /// Range-sum noise standard deviation.
    SigmaRangeSum,
    /// Bearing noise standard deviation in radians.
    SigmaBearing,
}

/// Configuration of a static NEES sweep. `prediction_unit_covariance` is the
/// shape of the prediction-corruption covariance; at every grid point it is
/// scaled by the current (possibly swept) range-sum noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSweepConfig {
    pub geometry: BistaticGeometry,
    pub swept: SweptParameter,
    pub grid: Vec<f64>,
    pub range_sum: f64,
    pub bearing: f64,
    pub noise: NoiseSpec,
    pub runs_per_point: u64,
    pub prediction_unit_covariance: Matrix2<f64>,
    pub confidence: f64,
    pub seed: u64,
}

impl StaticSweepConfig {
    fn validate(&self) -> Result<(), SimulationError> {
        if self.grid.is_empty() {
            return Err(SimulationError::InvalidConfig("empty sweep grid".into()));
        }
        if self.runs_per_point == 0 {
            return Err(SimulationError::InvalidConfig("run count is zero".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(SimulationError::InvalidConfig(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        for &value in &self.grid {
            if !value.is_finite() {
                return Err(SimulationError::InvalidConfig(format!(
                    "non-finite grid value {value}"
                )));
            }
        }
        // every resolved grid point must have valid geometry and noise
        for &value in &self.grid {
            let (point, noise) = self.resolve(value)?;
            self.geometry.validate_range_sum(point.range_sum)?;
            if noise.sigma_range_sum() <= 0.0 || noise.sigma_bearing() <= 0.0 {
                return Err(SimulationError::InvalidConfig(
                    "campaigns require strictly positive noise sigmas".into(),
                ));
            }
        }
        Ok(())
    }

    // Truth point and noise spec at one grid value.
    fn resolve(&self, value: f64) -> Result<(BistaticPoint, NoiseSpec), SimulationError> {
        Ok(match self.swept {
            SweptParameter::RangeSum => {
                let l = self.geometry.baseline();
                let half_b = value / 2.0;
                let half_l = l / 2.0;
                let offset_sq = half_b * half_b - half_l * half_l;
                if offset_sq <= 0.0 {
                    return Err(SimulationError::InvalidConfig(format!(
                        "range sum {value} does not reach past the baseline"
                    )));
                }
                let y = offset_sq.sqrt();
                let bearing = y.atan2(half_l);
                (BistaticPoint::new(value, bearing), self.noise)
            }
            SweptParameter::Bearing => {
                (BistaticPoint::new(self.range_sum, value), self.noise)
            }
            SweptParameter::SigmaRangeSum => (
                BistaticPoint::new(self.range_sum, self.bearing),
                NoiseSpec::new(value, self.noise.sigma_bearing())?,
            ),
            SweptParameter::SigmaBearing => (
                BistaticPoint::new(self.range_sum, self.bearing),
                NoiseSpec::new(self.noise.sigma_range_sum(), value)?,
            ),
        })
    }
}

/// NEES of all three methods at one grid value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeesSweepPoint {
    pub swept_value: f64,
    pub runs: u64,
    pub nees: PerMethod<f64>,
}

/// Output of [`run_static_nees_campaign`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeesSweepResult {
    pub points: Vec<NeesSweepPoint>,
    /// Two-sided chi-square bounds on the Monte Carlo NEES mean.
    pub bounds: (f64, f64),
    pub diagnostics: CampaignDiagnostics,
}

struct NeesChunk {
    sums: PerMethod<f64>,
    diag: CampaignDiagnostics,
}

/// Per grid point: draw measurements of the truth, corrupt the truth into a
/// prediction for the DUCM loop, convert by all three methods, and average
/// the position NEES against each conversion's own reported covariance.
pub fn run_static_nees_campaign(
    cfg: &StaticSweepConfig,
    parallelism: Parallelism,
) -> Result<NeesSweepResult, SimulationError> {
    cfg.validate()?;
    let geom = cfg.geometry;
    let mut points = Vec::with_capacity(cfg.grid.len());
    let mut diagnostics = CampaignDiagnostics::default();

    for (point_idx, &value) in cfg.grid.iter().enumerate() {
        let (truth_point, noise) = cfg.resolve(value)?;
        let truth = geom.to_cartesian(truth_point)?;
        let p_t = cfg.prediction_unit_covariance * noise.var_range_sum();
        let chol = nalgebra::Cholesky::new(p_t).ok_or_else(|| {
            SimulationError::InvalidConfig(
                "prediction corruption covariance is not positive definite".into(),
            )
        })?;
        let corruption = chol.l();

        let chunks = map_chunks(
            cfg.runs_per_point,
            STATIC_CHUNK_RUNS,
            parallelism,
            |range| -> Result<NeesChunk, SimulationError> {
                let mut chunk = NeesChunk {
                    sums: PerMethod::default(),
                    diag: CampaignDiagnostics::default(),
                };
                for run in range {
                    let mut rng = run_rng(cfg.seed, point_idx as u64, run);
                    let draw = generate_measurement(truth, noise, &geom, &mut rng)?;
                    chunk.diag.note_measurement(&draw);
                    chunk.diag.runs += 1;
                    let m = draw.measurement;

                    // prediction = truth position corrupted by P_t
                    let shake = Vector2::new(
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    );
                    let pred_pos = truth.vector() + corruption * shake;
                    let mut pred_cov = Matrix4::zeros();
                    pred_cov[(0, 0)] = p_t[(0, 0)];
                    pred_cov[(0, 2)] = p_t[(0, 1)];
                    pred_cov[(2, 0)] = p_t[(1, 0)];
                    pred_cov[(2, 2)] = p_t[(1, 1)];
                    let pred_track = TrackState {
                        state: Vector4::new(pred_pos.x, 0.0, pred_pos.y, 0.0),
                        covariance: pred_cov,
                    };

                    let conventional = convert_conventional(&m, &geom)?;
                    let ucm = convert_ucm(&m, &geom)?;
                    let ducm = match crate::filter::track_to_measurement_space(&pred_track, &geom)
                    {
                        Ok(pred) => convert_ducm(&m, &pred, &geom)?,
                        Err(_) => {
                            chunk.diag.ducm_fallback_events += 1;
                            let pred = MeasurementSpacePrediction {
                                point: m.point,
                                var_range_sum: 0.0,
                                var_bearing: 0.0,
                            };
                            convert_ducm(&m, &pred, &geom)?
                        }
                    };

                    for cm in [&conventional, &ucm, &ducm] {
                        chunk.diag.covariance_adjust_events +=
                            u64::from(cm.covariance_adjusted);
                        let e = Vector2::new(cm.position.x - truth.x, cm.position.y - truth.y);
                        let nes = normalized_error_squared(&e, &cm.covariance).ok_or(
                            SimulationError::Metrics(MetricsError::SingularCovariance {
                                index: run as usize,
                            }),
                        )?;
                        *chunk.sums.get_mut(cm.method) += nes;
                    }
                }
                Ok(chunk)
            },
        )?;

        let mut sums = PerMethod::<f64>::default();
        let mut diag = CampaignDiagnostics::default();
        for chunk in &chunks {
            for method in ConversionMethod::ALL {
                *sums.get_mut(method) += chunk.sums.get(method);
            }
            diag.absorb(&chunk.diag);
        }
        let denom = 2.0 * cfg.runs_per_point as f64;
        points.push(NeesSweepPoint {
            swept_value: value,
            runs: cfg.runs_per_point,
            nees: PerMethod::from_fn(|method| sums.get(method) / denom),
        });
        diagnostics.absorb(&diag);
    }

    let bounds = chi2_mean_bounds(cfg.runs_per_point as usize, 2, cfg.confidence)?;
    Ok(NeesSweepResult {
        points,
        bounds,
        diagnostics,
    })
}

/// Per-scan statistics of one method over a tracking campaign; vectors are
/// indexed by scan minus one.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSeries {
    pub method: ConversionMethod,
    pub position_rmse: Vec<f64>,
    pub velocity_rmse: Vec<f64>,
    pub nees: Vec<f64>,
}

/// Output of [`run_tracking_campaign`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingCampaignResult {
    pub series: Vec<MethodSeries>,
    pub scan_count: usize,
    /// Two-sided chi-square bounds on the per-scan NEES mean (dof 4).
    pub bounds: (f64, f64),
    pub diagnostics: CampaignDiagnostics,
}

#[derive(Clone, Copy, Default)]
struct ScanSums {
    pos_sq: f64,
    vel_sq: f64,
    nees: f64,
}

struct TrackChunk {
    // [method index][scan index]
    sums: Vec<Vec<ScanSums>>,
    diag: CampaignDiagnostics,
}

/// Runs every requested filter over identical per-run measurement streams
/// and accumulates per-scan position/velocity RMSE and state NEES.
pub fn run_tracking_campaign(
    cfg: &ScenarioConfig,
    methods: &[ConversionMethod],
    parallelism: Parallelism,
) -> Result<TrackingCampaignResult, SimulationError> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(SimulationError::InvalidConfig(
            "at least one conversion method is required".into(),
        ));
    }
    let geom = cfg.geometry;
    let model = constant_velocity_model(cfg.period)?;
    let scan_count = cfg.scan_count;

    let chunks = map_chunks(
        cfg.run_count,
        TRACKING_CHUNK_RUNS,
        parallelism,
        |range| -> Result<TrackChunk, SimulationError> {
            let mut chunk = TrackChunk {
                sums: vec![vec![ScanSums::default(); scan_count]; methods.len()],
                diag: CampaignDiagnostics::default(),
            };
            for run in range {
                let mut rng = run_rng(cfg.seed, 0, run);
                let truths = generate_trajectory(cfg, &mut rng);
                let mut draws = Vec::with_capacity(scan_count);
                for truth in &truths {
                    let position = CartesianPoint::new(truth[0], truth[2]);
                    let draw = generate_measurement(position, cfg.noise, &geom, &mut rng)?;
                    chunk.diag.note_measurement(&draw);
                    draws.push(draw);
                }
                chunk.diag.runs += 1;

                // shared initialization: position of the first conversion,
                // zero velocity, fixed diagonal covariance
                let first_cm = convert_conventional(&draws[0].measurement, &geom)?;
                for (mi, &method) in methods.iter().enumerate() {
                    let mut track = initialize(&first_cm);
                    accumulate_scan(&mut chunk.sums[mi][0], &track, &truths[0], run)?;
                    for scan in 1..scan_count {
                        let outcome =
                            step(&track, &draws[scan].measurement, method, &model, &geom)?;
                        chunk.diag.ducm_fallback_events += u64::from(outcome.ducm_fallback);
                        chunk.diag.covariance_adjust_events +=
                            u64::from(outcome.covariance_adjusted);
                        track = outcome.track;
                        accumulate_scan(&mut chunk.sums[mi][scan], &track, &truths[scan], run)?;
                    }
                }
            }
            Ok(chunk)
        },
    )?;

    let mut sums = vec![vec![ScanSums::default(); scan_count]; methods.len()];
    let mut diagnostics = CampaignDiagnostics::default();
    for chunk in &chunks {
        for (total_m, part_m) in sums.iter_mut().zip(&chunk.sums) {
            for (total, part) in total_m.iter_mut().zip(part_m) {
                total.pos_sq += part.pos_sq;
                total.vel_sq += part.vel_sq;
                total.nees += part.nees;
            }
        }
        diagnostics.absorb(&chunk.diag);
    }

    let n = cfg.run_count as f64;
    let series = methods
        .iter()
        .zip(&sums)
        .map(|(&method, scans)| MethodSeries {
            method,
            position_rmse: scans.iter().map(|s| (s.pos_sq / n).sqrt()).collect(),
            velocity_rmse: scans.iter().map(|s| (s.vel_sq / n).sqrt()).collect(),
            nees: scans.iter().map(|s| s.nees / (4.0 * n)).collect(),
        })
        .collect();

    let bounds = chi2_mean_bounds(cfg.run_count as usize, 4, cfg.confidence)?;
    Ok(TrackingCampaignResult {
        series,
        scan_count,
        bounds,
        diagnostics,
    })
}

fn accumulate_scan(
    sums: &mut ScanSums,
    track: &TrackState,
    truth: &Vector4<f64>,
    run: u64,
) -> Result<(), SimulationError> {
    let e = track.state - truth;
    sums.pos_sq += e[0] * e[0] + e[2] * e[2];
    sums.vel_sq += e[1] * e[1] + e[3] * e[3];
    let nes = normalized_error_squared(&e, &track.covariance).ok_or(SimulationError::Metrics(
        MetricsError::SingularCovariance { index: run as usize },
    ))?;
    sums.nees += nes;
    Ok(())
}
