//! Measurement conversion from `(range_sum, bearing)` space into Cartesian
//! coordinates, in three flavors:
//!
//! * conventional: plain inverse map with a linearized (Jacobian) covariance,
//!   both evaluated at the noisy measurement;
//! * UCM (unbiased converted measurement): second-order bias compensation of
//!   the position and a second-order covariance, evaluated at the measurement;
//! * DUCM (decorrelated UCM): same position as UCM, but the covariance is
//!   evaluated at a measurement-space prediction of the track so that it does
//!   not correlate with the current measurement noise, with extra terms for
//!   the prediction's own uncertainty.

use crate::geometry::{
    BistaticGeometry, BistaticPoint, CartesianPoint, GeometryError, InversePartials,
};
use nalgebra::Matrix2;

/// Errors from conversion inputs and propagated geometry failures.
#[derive(Debug, Clone, PartialEq)]
pub enum ConversionError {
    Geometry(GeometryError),
    /// Noise standard deviations must be finite and nonnegative.
    InvalidSigma { sigma: f64 },
    /// Prediction variances must be finite and nonnegative.
    InvalidPredictionVariance { variance: f64 },
}

impl std::fmt::Display for ConversionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConversionError::Geometry(e) => write!(f, "{e}"),
            ConversionError::InvalidSigma { sigma } => {
                write!(f, "noise standard deviation must be >= 0, got {sigma}")
            }
            ConversionError::InvalidPredictionVariance { variance } => {
                write!(f, "prediction variance must be >= 0, got {variance}")
            }
        }
    }
}

impl std::error::Error for ConversionError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ConversionError::Geometry(e) => Some(e),
            _ => None,
        }
    }
}

impl From<GeometryError> for ConversionError {
    fn from(e: GeometryError) -> Self {
        ConversionError::Geometry(e)
    }
}

/// Standard deviations of the independent zero-mean Gaussian measurement
/// noise on the range sum (meters) and the bearing (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    sigma_range_sum: f64,
    sigma_bearing: f64,
}

impl NoiseSpec {
    pub fn new(sigma_range_sum: f64, sigma_bearing: f64) -> Result<Self, ConversionError> {
        for sigma in [sigma_range_sum, sigma_bearing] {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(ConversionError::InvalidSigma { sigma });
            }
        }
        Ok(Self {
            sigma_range_sum,
            sigma_bearing,
        })
    }

    pub fn sigma_range_sum(&self) -> f64 {
        self.sigma_range_sum
    }

    pub fn sigma_bearing(&self) -> f64 {
        self.sigma_bearing
    }

    pub fn var_range_sum(&self) -> f64 {
        self.sigma_range_sum * self.sigma_range_sum
    }

    pub fn var_bearing(&self) -> f64 {
        self.sigma_bearing * self.sigma_bearing
    }
}

/// One noisy measurement together with the noise model that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyMeasurement {
    pub point: BistaticPoint,
    pub noise: NoiseSpec,
}

/// Which conversion produced a converted measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConversionMethod {
    Conventional,
    Ucm,
    Ducm,
}

impl ConversionMethod {
    pub const ALL: [ConversionMethod; 3] = [
        ConversionMethod::Conventional,
        ConversionMethod::Ucm,
        ConversionMethod::Ducm,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ConversionMethod::Conventional => "conventional",
            ConversionMethod::Ucm => "ucm",
            ConversionMethod::Ducm => "ducm",
        }
    }
}

impl std::fmt::Display for ConversionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A measurement converted to Cartesian coordinates with its error covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvertedMeasurement {
    pub position: CartesianPoint,
    pub covariance: Matrix2<f64>,
    pub method: ConversionMethod,
    /// True when positive-semidefiniteness enforcement had to jitter the
    /// diagonal (observability hook; never expected at nominal noise levels).
    pub covariance_adjusted: bool,
}

/// Track prediction mapped into measurement space: the predicted
/// `(range_sum, bearing)` point and the marginal variances induced by the
/// track's position covariance. Cross-correlation between the two predicted
/// coordinates is discarded by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSpacePrediction {
    pub point: BistaticPoint,
    pub var_range_sum: f64,
    pub var_bearing: f64,
}

// Symmetrize and, when the smallest eigenvalue falls below -1e-12 * trace,
// lift the diagonal until it reaches +1e-12 * trace. Second-order covariance
// formulas can lose definiteness in extreme geometries and the filter needs
// an invertible innovation covariance.
fn enforce_psd(m: &Matrix2<f64>) -> (Matrix2<f64>, bool) {
    let sym = (m + m.transpose()) * 0.5;
    let half_trace = 0.5 * sym.trace();
    let half_gap = 0.5 * (sym[(0, 0)] - sym[(1, 1)]);
    let radius = (half_gap * half_gap + sym[(0, 1)] * sym[(0, 1)]).sqrt();
    let min_eig = half_trace - radius;
    let floor = 1e-12 * sym.trace().abs();
    if min_eig < -floor {
        (sym + Matrix2::identity() * (floor - min_eig), true)
    } else {
        (sym, false)
    }
}

fn conventional_covariance_at(p: &InversePartials, noise: &NoiseSpec) -> Matrix2<f64> {
    let j = p.jacobian();
    let r = Matrix2::new(noise.var_range_sum(), 0.0, 0.0, noise.var_bearing());
    j * r * j.transpose()
}

fn ucm_position_at(p: &InversePartials, noise: &NoiseSpec) -> CartesianPoint {
    let sb2 = noise.var_range_sum();
    let sa2 = noise.var_bearing();
    CartesianPoint {
        x: p.position.x - 0.5 * sb2 * p.d2x_db2 - 0.5 * sa2 * p.d2x_dalpha2,
        y: p.position.y - 0.5 * sb2 * p.d2y_db2 - 0.5 * sa2 * p.d2y_dalpha2,
    }
}

// Second-order covariance shared by UCM and DUCM: UCM is the special case of
// zero prediction variances, and the expressions below are arranged so that
// the reduction is exact in floating point, not just algebraically.
fn second_order_covariance_at(
    p: &InversePartials,
    noise: &NoiseSpec,
    var_pred_range_sum: f64,
    var_pred_bearing: f64,
) -> Matrix2<f64> {
    let sb2 = noise.var_range_sum();
    let sa2 = noise.var_bearing();
    let tb2 = var_pred_range_sum;
    let ta2 = var_pred_bearing;
    let w_bb = 0.5 * sb2 * sb2 + sb2 * tb2;
    let w_aa = 0.5 * sa2 * sa2 + sa2 * ta2;
    let w_ba = sb2 * sa2 + sb2 * ta2 + sa2 * tb2;
    let r11 = sb2 * p.dx_db * p.dx_db
        + sa2 * p.dx_dalpha * p.dx_dalpha
        + w_bb * p.d2x_db2 * p.d2x_db2
        + w_aa * p.d2x_dalpha2 * p.d2x_dalpha2
        + w_ba * p.d2x_dbdalpha * p.d2x_dbdalpha;
    let r22 = sb2 * p.dy_db * p.dy_db
        + sa2 * p.dy_dalpha * p.dy_dalpha
        + w_bb * p.d2y_db2 * p.d2y_db2
        + w_aa * p.d2y_dalpha2 * p.d2y_dalpha2
        + w_ba * p.d2y_dbdalpha * p.d2y_dbdalpha;
    let r12 = sb2 * p.dx_db * p.dy_db
        + sa2 * p.dx_dalpha * p.dy_dalpha
        + w_bb * p.d2x_db2 * p.d2y_db2
        + w_aa * p.d2x_dalpha2 * p.d2y_dalpha2
        + w_ba * p.d2x_dbdalpha * p.d2y_dbdalpha;
    Matrix2::new(r11, r12, r12, r22)
}

/// Bias-compensated Cartesian position, second-order correction evaluated at
/// the measurement.
pub fn ucm_position(
    m: &NoisyMeasurement,
    geom: &BistaticGeometry,
) -> Result<CartesianPoint, ConversionError> {
    let p = geom.inverse_partials(m.point)?;
    Ok(ucm_position_at(&p, &m.noise))
}

/// Second-order converted-measurement covariance evaluated at the measurement.
pub fn ucm_covariance(
    m: &NoisyMeasurement,
    geom: &BistaticGeometry,
) -> Result<Matrix2<f64>, ConversionError> {
    let p = geom.inverse_partials(m.point)?;
    Ok(enforce_psd(&second_order_covariance_at(&p, &m.noise, 0.0, 0.0)).0)
}

/// Decorrelated covariance: the second-order expressions evaluated at `eval`
/// (normally the track prediction, not the measurement), widened by the
/// prediction variances from `pred`.
pub fn ducm_covariance(
    eval: BistaticPoint,
    pred: &MeasurementSpacePrediction,
    noise: &NoiseSpec,
    geom: &BistaticGeometry,
) -> Result<Matrix2<f64>, ConversionError> {
    for variance in [pred.var_range_sum, pred.var_bearing] {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(ConversionError::InvalidPredictionVariance { variance });
        }
    }
    let p = geom.inverse_partials(eval)?;
    Ok(enforce_psd(&second_order_covariance_at(
        &p,
        noise,
        pred.var_range_sum,
        pred.var_bearing,
    ))
    .0)
}

/// Plain inverse-map conversion with linearized covariance.
pub fn convert_conventional(
    m: &NoisyMeasurement,
    geom: &BistaticGeometry,
) -> Result<ConvertedMeasurement, ConversionError> {
    let p = geom.inverse_partials(m.point)?;
    let (covariance, covariance_adjusted) = enforce_psd(&conventional_covariance_at(&p, &m.noise));
    Ok(ConvertedMeasurement {
        position: p.position,
        covariance,
        method: ConversionMethod::Conventional,
        covariance_adjusted,
    })
}

/// Bias-compensated conversion with second-order covariance, both at the
/// measurement.
pub fn convert_ucm(
    m: &NoisyMeasurement,
    geom: &BistaticGeometry,
) -> Result<ConvertedMeasurement, ConversionError> {
    let p = geom.inverse_partials(m.point)?;
    let (covariance, covariance_adjusted) =
        enforce_psd(&second_order_covariance_at(&p, &m.noise, 0.0, 0.0));
    Ok(ConvertedMeasurement {
        position: ucm_position_at(&p, &m.noise),
        covariance,
        method: ConversionMethod::Ucm,
        covariance_adjusted,
    })
}

/// UCM position (at the measurement) paired with the decorrelated covariance
/// (at the prediction).
pub fn convert_ducm(
    m: &NoisyMeasurement,
    pred: &MeasurementSpacePrediction,
    geom: &BistaticGeometry,
) -> Result<ConvertedMeasurement, ConversionError> {
    let position = ucm_position(m, geom)?;
    let covariance = ducm_covariance(pred.point, pred, &m.noise, geom)?;
    // Jitter events on the DUCM path are already folded into the covariance
    // by ducm_covariance; recompute the flag from the unenforced form.
    let p = geom.inverse_partials(pred.point)?;
    let (_, covariance_adjusted) = enforce_psd(&second_order_covariance_at(
        &p,
        &m.noise,
        pred.var_range_sum,
        pred.var_bearing,
    ));
    Ok(ConvertedMeasurement {
        position,
        covariance,
        method: ConversionMethod::Ducm,
        covariance_adjusted,
    })
}
