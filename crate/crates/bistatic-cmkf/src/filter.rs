//! Linear Kalman filter over the Cartesian state `[x, vx, y, vy]` consuming
//! converted measurements. The DUCM path closes a feedback loop each scan:
//! the a priori state is mapped into measurement space and the conversion
//! covariance is evaluated there instead of at the noisy measurement.

use crate::conversion::{
    convert_conventional, convert_ducm, convert_ucm, ConversionError, ConversionMethod,
    ConvertedMeasurement, MeasurementSpacePrediction, NoisyMeasurement,
};
use crate::geometry::{BistaticGeometry, CartesianPoint, GeometryError};
use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

/// Variance of the per-axis white acceleration noise behind the process-noise
/// matrix of [`constant_velocity_model`] ((m/s^2)^2).
pub const ACCEL_NOISE_VARIANCE: f64 = 0.25;

/// Errors from filter configuration and numerical degeneracies.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterError {
    Conversion(ConversionError),
    /// Innovation covariance was not positive definite.
    SingularInnovation,
    /// Sampling period must be finite and positive.
    InvalidPeriod(f64),
}

impl std::fmt::Display for FilterError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilterError::Conversion(e) => write!(f, "{e}"),
            FilterError::SingularInnovation => {
                write!(f, "innovation covariance is not positive definite")
            }
            FilterError::InvalidPeriod(t) => {
                write!(f, "sampling period must be positive, got {t}")
            }
        }
    }
}

impl std::error::Error for FilterError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            FilterError::Conversion(e) => Some(e),
            _ => None,
        }
    }
}

impl From<ConversionError> for FilterError {
    fn from(e: ConversionError) -> Self {
        FilterError::Conversion(e)
    }
}

impl From<GeometryError> for FilterError {
    fn from(e: GeometryError) -> Self {
        FilterError::Conversion(ConversionError::Geometry(e))
    }
}

/// Track estimate: state `[x, vx, y, vy]` (m, m/s) and its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    pub state: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

impl TrackState {
    pub fn position(&self) -> CartesianPoint {
        CartesianPoint::new(self.state[0], self.state[2])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.state[1], self.state[3])
    }

    /// Position sub-block of the covariance, rows/columns `[x, y]`.
    pub fn position_covariance(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.covariance[(0, 0)],
            self.covariance[(0, 2)],
            self.covariance[(2, 0)],
            self.covariance[(2, 2)],
        )
    }
}

/// Constant-velocity transition and process-noise pair for one sampling
/// period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    pub transition: Matrix4<f64>,
    pub process_noise: Matrix4<f64>,
    pub period: f64,
}

/// Constant-velocity model with white-noise acceleration of variance
/// [`ACCEL_NOISE_VARIANCE`] per axis: per-axis blocks `F = [1, T; 0, 1]` and
/// `Q = q * [T^4/4, T^3/2; T^3/2, T^2]`.
pub fn constant_velocity_model(period: f64) -> Result<MotionModel, FilterError> {
    if !(period.is_finite() && period > 0.0) {
        return Err(FilterError::InvalidPeriod(period));
    }
    let t = period;
    let transition = Matrix4::new(
        1.0, t, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, t, //
        0.0, 0.0, 0.0, 1.0,
    );
    let q = ACCEL_NOISE_VARIANCE;
    let q11 = q * t * t * t * t / 4.0;
    let q12 = q * t * t * t / 2.0;
    let q22 = q * t * t;
    let process_noise = Matrix4::new(
        q11, q12, 0.0, 0.0, //
        q12, q22, 0.0, 0.0, //
        0.0, 0.0, q11, q12, //
        0.0, 0.0, q12, q22,
    );
    Ok(MotionModel {
        transition,
        process_noise,
        period,
    })
}

/// Track seeded from the first converted measurement: measured position,
/// zero velocity, and a fixed diagonal covariance of 100 per component
/// (independent of the measurement's own covariance).
pub fn initialize(first_cm: &ConvertedMeasurement) -> TrackState {
    TrackState {
        state: Vector4::new(first_cm.position.x, 0.0, first_cm.position.y, 0.0),
        covariance: Matrix4::identity() * 100.0,
    }
}

/// Time update: `state <- F state`, `P <- F P F^T + Q`.
pub fn predict(track: &TrackState, model: &MotionModel) -> TrackState {
    let state = model.transition * track.state;
    let p = model.transition * track.covariance * model.transition.transpose()
        + model.process_noise;
    TrackState {
        state,
        covariance: (p + p.transpose()) * 0.5,
    }
}

/// Maps the (predicted) track into measurement space: the measurement-space
/// image of the position and the marginal variances obtained by pushing the
/// position covariance through the forward partials. The range-sum/bearing
/// cross-covariance is discarded.
pub fn track_to_measurement_space(
    track: &TrackState,
    geom: &BistaticGeometry,
) -> Result<MeasurementSpacePrediction, GeometryError> {
    let position = track.position();
    let point = geom.to_measurement(position)?;
    geom.validate_range_sum(point.range_sum)?;
    let fp = geom.forward_partials(position)?;
    let p = track.position_covariance();
    let quad = |gx: f64, gy: f64| {
        (gx * gx * p[(0, 0)] + 2.0 * gx * gy * p[(0, 1)] + gy * gy * p[(1, 1)]).max(0.0)
    };
    Ok(MeasurementSpacePrediction {
        point,
        var_range_sum: quad(fp.db_dx, fp.db_dy),
        var_bearing: quad(fp.dalpha_dx, fp.dalpha_dy),
    })
}

/// Measurement update with the position-selector measurement matrix, Joseph
/// covariance form.
pub fn update(track: &TrackState, cm: &ConvertedMeasurement) -> Result<TrackState, FilterError> {
    let h = Matrix2x4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0,
    );
    let innovation_cov = track.position_covariance() + cm.covariance;
    let inv = innovation_cov
        .cholesky()
        .map(|ch| ch.inverse())
        .or_else(|| innovation_cov.try_inverse())
        .ok_or(FilterError::SingularInnovation)?;
    if !inv.iter().all(|v| v.is_finite()) {
        return Err(FilterError::SingularInnovation);
    }
    let gain = track.covariance * h.transpose() * inv;
    let innovation = Vector2::new(
        cm.position.x - track.state[0],
        cm.position.y - track.state[2],
    );
    let state = track.state + gain * innovation;
    let identity_minus_kh = Matrix4::identity() - gain * h;
    let p = identity_minus_kh * track.covariance * identity_minus_kh.transpose()
        + gain * cm.covariance * gain.transpose();
    Ok(TrackState {
        state,
        covariance: (p + p.transpose()) * 0.5,
    })
}

/// Result of one filter scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub track: TrackState,
    /// True when the DUCM prediction mapping was degenerate and the
    /// covariance was evaluated at the raw measurement instead.
    pub ducm_fallback: bool,
    /// True when covariance PSD enforcement jittered this scan's conversion.
    pub covariance_adjusted: bool,
}

/// One full scan: time update, conversion of the raw measurement by the
/// requested method, measurement update.
///
/// For DUCM the a priori state of this scan is mapped into measurement space
/// first; if that mapping is degenerate (predicted position on the baseline
/// or at a sensor), the covariance is evaluated at the raw measurement with
/// zero prediction variances and the event is flagged.
pub fn step(
    track: &TrackState,
    raw: &NoisyMeasurement,
    method: ConversionMethod,
    model: &MotionModel,
    geom: &BistaticGeometry,
) -> Result<StepOutcome, FilterError> {
    let predicted = predict(track, model);
    let (cm, ducm_fallback) = match method {
        ConversionMethod::Conventional => (convert_conventional(raw, geom)?, false),
        ConversionMethod::Ucm => (convert_ucm(raw, geom)?, false),
        ConversionMethod::Ducm => match track_to_measurement_space(&predicted, geom) {
            Ok(pred) => (convert_ducm(raw, &pred, geom)?, false),
            Err(_) => {
                let pred = MeasurementSpacePrediction {
                    point: raw.point,
                    var_range_sum: 0.0,
                    var_bearing: 0.0,
                };
                (convert_ducm(raw, &pred, geom)?, true)
            }
        },
    };
    let covariance_adjusted = cm.covariance_adjusted;
    let track = update(&predicted, &cm)?;
    Ok(StepOutcome {
        track,
        ducm_fallback,
        covariance_adjusted,
    })
}
