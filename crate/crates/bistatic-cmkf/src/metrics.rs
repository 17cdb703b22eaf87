//! Consistency and accuracy metrics for Monte Carlo campaigns: normalized
//! estimation error squared (NEES) with per-sample covariances, root mean
//! square error, and chi-square confidence bounds for the Monte Carlo mean
//! of a NEES statistic.

use nalgebra::{SMatrix, SVector};

/// Errors from metric evaluation and bound parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    EmptyInput,
    LengthMismatch { left: usize, right: usize },
    /// A per-sample covariance could not be inverted.
    SingularCovariance { index: usize },
    /// `runs * dof` must be positive.
    InvalidDegrees { runs: usize, dof: usize },
    /// Confidence must lie strictly inside (0, 1).
    InvalidConfidence(f64),
}

impl std::fmt::Display for MetricsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricsError::EmptyInput => write!(f, "metric over an empty sample set"),
            MetricsError::LengthMismatch { left, right } => {
                write!(f, "sample lists differ in length: {left} vs {right}")
            }
            MetricsError::SingularCovariance { index } => {
                write!(f, "covariance at sample {index} is singular")
            }
            MetricsError::InvalidDegrees { runs, dof } => {
                write!(f, "runs ({runs}) times dof ({dof}) must be positive")
            }
            MetricsError::InvalidConfidence(c) => {
                write!(f, "confidence must be in (0, 1), got {c}")
            }
        }
    }
}

impl std::error::Error for MetricsError {}

fn nees<const D: usize>(
    errors: &[SVector<f64, D>],
    covariances: &[SMatrix<f64, D, D>],
) -> Result<f64, MetricsError> {
    if errors.len() != covariances.len() {
        return Err(MetricsError::LengthMismatch {
            left: errors.len(),
            right: covariances.len(),
        });
    }
    if errors.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sum = 0.0;
    for (index, (e, r)) in errors.iter().zip(covariances).enumerate() {
        sum += normalized_error_squared(e, r).ok_or(MetricsError::SingularCovariance { index })?;
    }
    Ok(sum / (D as f64 * errors.len() as f64))
}

/// One sample's `e^T R^-1 e`, or `None` when `R` is not invertible.
pub fn normalized_error_squared<const D: usize>(
    e: &SVector<f64, D>,
    r: &SMatrix<f64, D, D>,
) -> Option<f64> {
    let inv = r.try_inverse()?;
    let value = (e.transpose() * inv * e)[0];
    value.is_finite().then_some(value)
}

/// Mean NEES of position-level errors against their per-sample 2x2
/// covariances, normalized by the dimension (2).
pub fn nees_static(
    errors: &[SVector<f64, 2>],
    covariances: &[SMatrix<f64, 2, 2>],
) -> Result<f64, MetricsError> {
    nees(errors, covariances)
}

/// Mean NEES of full-state errors against their per-sample 4x4 covariances,
/// normalized by the dimension (4).
pub fn nees_dynamic(
    errors: &[SVector<f64, 4>],
    covariances: &[SMatrix<f64, 4, 4>],
) -> Result<f64, MetricsError> {
    nees(errors, covariances)
}

/// Root mean square Euclidean error between matched truth/estimate pairs.
pub fn rmse<const D: usize>(
    truths: &[SVector<f64, D>],
    estimates: &[SVector<f64, D>],
) -> Result<f64, MetricsError> {
    if truths.len() != estimates.len() {
        return Err(MetricsError::LengthMismatch {
            left: truths.len(),
            right: estimates.len(),
        });
    }
    if truths.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let sum: f64 = truths
        .iter()
        .zip(estimates)
        .map(|(t, e)| (t - e).norm_squared())
        .sum();
    Ok((sum / truths.len() as f64).sqrt())
}

// Inverse standard normal CDF, rational approximation (relative error below
// 1.2e-9 across the domain), evaluated in three pieces. Coefficients are
// kept at their full published precision.
#[allow(clippy::excessive_precision)]
fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    debug_assert!(p > 0.0 && p < 1.0);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    }
}

/// Two-sided confidence bounds for the Monte Carlo mean of a NEES statistic:
/// the `(1 +/- confidence) / 2` quantiles of `chi2_n / n` with
/// `n = runs * dof`, via the Wilson-Hilferty cube approximation. At the
/// degrees of freedom used here (thousands and up) its error is far below
/// the reporting precision.
pub fn chi2_mean_bounds(
    runs: usize,
    dof: usize,
    confidence: f64,
) -> Result<(f64, f64), MetricsError> {
    let n = runs.checked_mul(dof).unwrap_or(0);
    if n == 0 {
        return Err(MetricsError::InvalidDegrees { runs, dof });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(MetricsError::InvalidConfidence(confidence));
    }
    let n = n as f64;
    let z = inverse_normal_cdf(0.5 * (1.0 + confidence));
    let shift = 2.0 / (9.0 * n);
    let spread = z * shift.sqrt();
    let cube = |v: f64| v * v * v;
    Ok((cube(1.0 - shift - spread), cube(1.0 - shift + spread)))
}
