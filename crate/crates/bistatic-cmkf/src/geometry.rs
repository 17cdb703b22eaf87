//! Planar bistatic geometry: the receiver sits at the origin, the transmitter
//! at `[baseline, 0]`, and a target is measured as the pair
//! `(range_sum, bearing)` where `range_sum` is the transmitter-target-receiver
//! path length and `bearing` is the receiver-relative azimuth `atan2(y, x)`.
//!
//! The module provides the forward map (Cartesian to measurement), its
//! inverse on the valid sheet `range_sum > baseline`, and the first and
//! second partial derivatives of both maps in closed form.

use nalgebra::{Matrix2, Vector2};

/// Relative margin below which a range sum is treated as degenerate: points
/// with `range_sum <= baseline * (1 + RANGE_SUM_GUARD)` lie numerically on the
/// baseline segment where the inverse map blows up.
pub const RANGE_SUM_GUARD: f64 = 1e-9;

/// Errors from geometric validation and singular configurations.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// Baseline must be finite and strictly positive.
    InvalidBaseline(f64),
    /// Range sum at or below the baseline: the measurement lies on the
    /// degenerate ellipse and has no unique Cartesian preimage.
    RangeSumTooShort { range_sum: f64, baseline: f64 },
    /// Point coincides with the receiver or the transmitter, where the
    /// bearing (and the forward partials) are undefined.
    AtFocus { x: f64, y: f64 },
    /// Bearing must be finite.
    NonFiniteBearing(f64),
}

impl std::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeometryError::InvalidBaseline(l) => {
                write!(f, "baseline must be finite and positive, got {l}")
            }
            GeometryError::RangeSumTooShort {
                range_sum,
                baseline,
            } => write!(
                f,
                "range sum {range_sum} does not exceed the baseline {baseline}"
            ),
            GeometryError::AtFocus { x, y } => {
                write!(f, "point ({x}, {y}) coincides with a sensor focus")
            }
            GeometryError::NonFiniteBearing(a) => write!(f, "bearing must be finite, got {a}"),
        }
    }
}

impl std::error::Error for GeometryError {}

/// Target position in the receiver-centered Cartesian frame (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianPoint {
    pub x: f64,
    pub y: f64,
}

impl CartesianPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn vector(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

impl From<Vector2<f64>> for CartesianPoint {
    fn from(v: Vector2<f64>) -> Self {
        Self { x: v.x, y: v.y }
    }
}

/// Measurement-space coordinates: bistatic range sum (meters) and
/// receiver bearing (radians, in `(-pi, pi]`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BistaticPoint {
    pub range_sum: f64,
    pub bearing: f64,
}

impl BistaticPoint {
    pub fn new(range_sum: f64, bearing: f64) -> Self {
        Self { range_sum, bearing }
    }
}

/// First and second partials of the inverse map `(range_sum, bearing) -> (x, y)`,
/// all evaluated at one measurement-space point. `b` abbreviates the range
/// sum and `alpha` the bearing in the field names.
#[derive(Debug, Clone, Copy)]
pub struct InversePartials {
    /// Cartesian image of the evaluation point.
    pub position: CartesianPoint,
    pub dx_db: f64,
    pub dx_dalpha: f64,
    pub dy_db: f64,
    pub dy_dalpha: f64,
    pub d2x_db2: f64,
    pub d2x_dalpha2: f64,
    pub d2x_dbdalpha: f64,
    pub d2y_db2: f64,
    pub d2y_dalpha2: f64,
    pub d2y_dbdalpha: f64,
}

impl InversePartials {
    /// Jacobian of `(x, y)` with respect to `(range_sum, bearing)`.
    pub fn jacobian(&self) -> Matrix2<f64> {
        Matrix2::new(self.dx_db, self.dx_dalpha, self.dy_db, self.dy_dalpha)
    }

    /// Hessian of `x` with respect to `(range_sum, bearing)`.
    pub fn hessian_x(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.d2x_db2,
            self.d2x_dbdalpha,
            self.d2x_dbdalpha,
            self.d2x_dalpha2,
        )
    }

    /// Hessian of `y` with respect to `(range_sum, bearing)`.
    pub fn hessian_y(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.d2y_db2,
            self.d2y_dbdalpha,
            self.d2y_dbdalpha,
            self.d2y_dalpha2,
        )
    }
}

/// First partials of the forward map `(x, y) -> (range_sum, bearing)`.
#[derive(Debug, Clone, Copy)]
pub struct ForwardPartials {
    pub db_dx: f64,
    pub db_dy: f64,
    pub dalpha_dx: f64,
    pub dalpha_dy: f64,
}

impl ForwardPartials {
    /// Jacobian of `(range_sum, bearing)` with respect to `(x, y)`.
    pub fn jacobian(&self) -> Matrix2<f64> {
        Matrix2::new(self.db_dx, self.db_dy, self.dalpha_dx, self.dalpha_dy)
    }
}

/// A validated transmitter-receiver pair: receiver at the origin, transmitter
/// at `[baseline, 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BistaticGeometry {
    baseline: f64,
}

impl BistaticGeometry {
    pub fn new(baseline: f64) -> Result<Self, GeometryError> {
        if !(baseline.is_finite() && baseline > 0.0) {
            return Err(GeometryError::InvalidBaseline(baseline));
        }
        Ok(Self { baseline })
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Checks that a range sum lies strictly above the degeneracy guard.
    pub fn validate_range_sum(&self, range_sum: f64) -> Result<(), GeometryError> {
        // negated form so NaN fails validation
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(range_sum > self.baseline * (1.0 + RANGE_SUM_GUARD)) {
            return Err(GeometryError::RangeSumTooShort {
                range_sum,
                baseline: self.baseline,
            });
        }
        Ok(())
    }

    /// Forward map: Cartesian position to `(range_sum, bearing)`.
    pub fn to_measurement(&self, p: CartesianPoint) -> Result<BistaticPoint, GeometryError> {
        let r_rx = p.x.hypot(p.y);
        let r_tx = (p.x - self.baseline).hypot(p.y);
        if r_rx == 0.0 || r_tx == 0.0 {
            return Err(GeometryError::AtFocus { x: p.x, y: p.y });
        }
        Ok(BistaticPoint {
            range_sum: r_rx + r_tx,
            bearing: p.y.atan2(p.x),
        })
    }

    /// Inverse map: `(range_sum, bearing)` to the unique Cartesian point on
    /// the measurement's ellipse along the bearing ray.
    pub fn to_cartesian(&self, m: BistaticPoint) -> Result<CartesianPoint, GeometryError> {
        self.validate_range_sum(m.range_sum)?;
        if !m.bearing.is_finite() {
            return Err(GeometryError::NonFiniteBearing(m.bearing));
        }
        let l = self.baseline;
        let b = m.range_sum;
        let (s, c) = m.bearing.sin_cos();
        let n = l * l - b * b;
        let d = 2.0 * (l * c - b);
        Ok(CartesianPoint {
            x: n * c / d,
            y: n * s / d,
        })
    }

    /// First and second partials of the inverse map at `m`.
    ///
    /// With `b` the range sum, `alpha` the bearing, `l` the baseline,
    /// `c = cos(alpha)`, `s = sin(alpha)`, the closed forms below share the
    /// denominators `d = 2(lc - b)` and its powers; `d < 0` whenever
    /// `b > l`, so the guard also protects every division.
    pub fn inverse_partials(&self, m: BistaticPoint) -> Result<InversePartials, GeometryError> {
        self.validate_range_sum(m.range_sum)?;
        if !m.bearing.is_finite() {
            return Err(GeometryError::NonFiniteBearing(m.bearing));
        }
        let l = self.baseline;
        let b = m.range_sum;
        let (s, c) = m.bearing.sin_cos();
        let n = l * l - b * b;
        let d = 2.0 * (l * c - b);
        let d2 = d * d;
        let d3 = d2 * d;
        // Numerator shared by the range-sum first partials.
        let q = b * b - 2.0 * b * l * c + l * l;
        Ok(InversePartials {
            position: CartesianPoint {
                x: n * c / d,
                y: n * s / d,
            },
            dx_db: 2.0 * c * q / d2,
            dx_dalpha: 2.0 * b * n * s / d2,
            dy_db: 2.0 * s * q / d2,
            dy_dalpha: 2.0 * n * (l - b * c) / d2,
            d2x_db2: 8.0 * l * l * s * s * c / d3,
            d2x_dalpha2: 4.0 * b * n * (l + l * s * s - b * c) / d3,
            d2x_dbdalpha: 4.0 * s * (b * b * b - 3.0 * b * b * l * c + b * l * l + l * l * l * c)
                / d3,
            d2y_db2: 8.0 * l * l * s * s * s / d3,
            d2y_dalpha2: 4.0 * n * s * (2.0 * l * l - b * b - b * l * c) / d3,
            d2y_dbdalpha: 4.0
                * (-b * b * b * c + 3.0 * b * b * l * c * c - 3.0 * b * l * l * c
                    + l * l * l * (1.0 + s * s))
                / d3,
        })
    }

    /// First partials of the forward map at `p`.
    pub fn forward_partials(&self, p: CartesianPoint) -> Result<ForwardPartials, GeometryError> {
        let r_rx = p.x.hypot(p.y);
        let r_tx = (p.x - self.baseline).hypot(p.y);
        if r_rx == 0.0 || r_tx == 0.0 {
            return Err(GeometryError::AtFocus { x: p.x, y: p.y });
        }
        let r_rx2 = r_rx * r_rx;
        Ok(ForwardPartials {
            db_dx: p.x / r_rx + (p.x - self.baseline) / r_tx,
            db_dy: p.y / r_rx + p.y / r_tx,
            dalpha_dx: -p.y / r_rx2,
            dalpha_dy: p.x / r_rx2,
        })
    }
}

#[cfg(test)]
mod tests {
    // frozen reference values are kept verbatim at full printed precision
    #![allow(clippy::excessive_precision)]

    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    fn geom() -> BistaticGeometry {
        BistaticGeometry::new(4000.0).unwrap()
    }

    // Central finite differences used as an independent derivative oracle.
    fn fd_inverse_jacobian(g: &BistaticGeometry, m: BistaticPoint) -> Matrix2<f64> {
        let hb = 1e-4 * m.range_sum;
        let ha = 1e-4;
        let at = |db: f64, da: f64| {
            g.to_cartesian(BistaticPoint::new(m.range_sum + db, m.bearing + da))
                .unwrap()
        };
        let xb = (at(hb, 0.0).x - at(-hb, 0.0).x) / (2.0 * hb);
        let xa = (at(0.0, ha).x - at(0.0, -ha).x) / (2.0 * ha);
        let yb = (at(hb, 0.0).y - at(-hb, 0.0).y) / (2.0 * hb);
        let ya = (at(0.0, ha).y - at(0.0, -ha).y) / (2.0 * ha);
        Matrix2::new(xb, xa, yb, ya)
    }

    fn fd_inverse_hessians(g: &BistaticGeometry, m: BistaticPoint) -> (Matrix2<f64>, Matrix2<f64>) {
        let hb = 1e-4 * m.range_sum;
        let ha = 1e-4;
        let at = |db: f64, da: f64| {
            g.to_cartesian(BistaticPoint::new(m.range_sum + db, m.bearing + da))
                .unwrap()
        };
        let center = at(0.0, 0.0);
        let second = |pp: CartesianPoint, mm: CartesianPoint, h: f64| {
            (
                (pp.x - 2.0 * center.x + mm.x) / (h * h),
                (pp.y - 2.0 * center.y + mm.y) / (h * h),
            )
        };
        let (xbb, ybb) = second(at(hb, 0.0), at(-hb, 0.0), hb);
        let (xaa, yaa) = second(at(0.0, ha), at(0.0, -ha), ha);
        let cross = |f: fn(CartesianPoint) -> f64| {
            (f(at(hb, ha)) - f(at(hb, -ha)) - f(at(-hb, ha)) + f(at(-hb, -ha))) / (4.0 * hb * ha)
        };
        let xba = cross(|p| p.x);
        let yba = cross(|p| p.y);
        (
            Matrix2::new(xbb, xba, xba, xaa),
            Matrix2::new(ybb, yba, yba, yaa),
        )
    }

    fn fd_forward_jacobian(g: &BistaticGeometry, p: CartesianPoint) -> Matrix2<f64> {
        let hx = 1e-4 * p.x.abs().max(1.0);
        let hy = 1e-4 * p.y.abs().max(1.0);
        let at = |dx: f64, dy: f64| g.to_measurement(CartesianPoint::new(p.x + dx, p.y + dy));
        let bearing_diff = |hi: BistaticPoint, lo: BistaticPoint| {
            let mut d = hi.bearing - lo.bearing;
            if d > PI {
                d -= 2.0 * PI;
            } else if d < -PI {
                d += 2.0 * PI;
            }
            d
        };
        let (xp, xm) = (at(hx, 0.0).unwrap(), at(-hx, 0.0).unwrap());
        let (yp, ym) = (at(0.0, hy).unwrap(), at(0.0, -hy).unwrap());
        Matrix2::new(
            (xp.range_sum - xm.range_sum) / (2.0 * hx),
            (yp.range_sum - ym.range_sum) / (2.0 * hy),
            bearing_diff(xp, xm) / (2.0 * hx),
            bearing_diff(yp, ym) / (2.0 * hy),
        )
    }

    // Per-entry relative comparison. Entries smaller than `tol` times the
    // matrix scale (geometry-forced zeros, where central differences bottom
    // out at their truncation noise) count as zero at the target resolution.
    fn assert_matrix_close(a: &Matrix2<f64>, b: &Matrix2<f64>, tol: f64) {
        let floor = tol * a.amax().max(b.amax()).max(1e-300);
        for i in 0..2 {
            for j in 0..2 {
                let denom = a[(i, j)].abs().max(b[(i, j)].abs());
                if denom <= floor {
                    continue;
                }
                let rel = (a[(i, j)] - b[(i, j)]).abs() / denom;
                assert!(
                    rel <= tol,
                    "entry ({i},{j}): {} vs {} rel {rel:e}",
                    a[(i, j)],
                    b[(i, j)]
                );
            }
        }
    }

    #[test]
    fn rejects_bad_baselines() {
        assert!(BistaticGeometry::new(0.0).is_err());
        assert!(BistaticGeometry::new(-4000.0).is_err());
        assert!(BistaticGeometry::new(f64::NAN).is_err());
        assert!(BistaticGeometry::new(f64::INFINITY).is_err());
        assert!(BistaticGeometry::new(4000.0).is_ok());
    }

    #[test]
    fn rejects_degenerate_range_sums() {
        let g = geom();
        // 1. at the baseline
        assert!(g.to_cartesian(BistaticPoint::new(4000.0, 0.3)).is_err());
        // 2. below it
        assert!(g.to_cartesian(BistaticPoint::new(3000.0, 0.3)).is_err());
        // 3. inside the guard band
        assert!(g
            .to_cartesian(BistaticPoint::new(4000.0 * (1.0 + 1e-10), 0.3))
            .is_err());
        // 4. above the guard band
        assert!(g
            .to_cartesian(BistaticPoint::new(4000.0 * (1.0 + 1e-8), 0.3))
            .is_ok());
        // 5. NaN is rejected, not propagated
        assert!(g.to_cartesian(BistaticPoint::new(f64::NAN, 0.3)).is_err());
        assert!(g
            .to_cartesian(BistaticPoint::new(8000.0, f64::NAN))
            .is_err());
    }

    #[test]
    fn rejects_points_at_foci() {
        let g = geom();
        assert_eq!(
            g.to_measurement(CartesianPoint::new(0.0, 0.0)),
            Err(GeometryError::AtFocus { x: 0.0, y: 0.0 })
        );
        assert!(g.to_measurement(CartesianPoint::new(4000.0, 0.0)).is_err());
        assert!(g.forward_partials(CartesianPoint::new(0.0, 0.0)).is_err());
        assert!(g.forward_partials(CartesianPoint::new(4000.0, 0.0)).is_err());
    }

    #[test]
    fn inverse_map_matches_frozen_values() {
        let g = geom();
        let p = g.to_cartesian(BistaticPoint::new(8000.0, FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-9);
        assert_relative_eq!(p.y, 3000.0, max_relative = 1e-12);

        let p = g.to_cartesian(BistaticPoint::new(8000.0, FRAC_PI_3)).unwrap();
        assert_relative_eq!(p.x, 2000.0, max_relative = 1e-12);
        assert_relative_eq!(p.y, 3464.1016151377546, max_relative = 1e-12);

        let p = g
            .to_cartesian(BistaticPoint::new(8000.0, 2.0 * FRAC_PI_3))
            .unwrap();
        assert_relative_eq!(p.x, -1200.0, max_relative = 1e-12);
        assert_relative_eq!(p.y, 2078.4609690826528, max_relative = 1e-12);
    }

    #[test]
    fn forward_map_matches_frozen_values() {
        let g = geom();
        let m = g.to_measurement(CartesianPoint::new(8000.0, 8000.0)).unwrap();
        assert_relative_eq!(m.range_sum, 20257.980408983919, max_relative = 1e-12);
        assert_relative_eq!(m.bearing, FRAC_PI_4, max_relative = 1e-15);
    }

    #[test]
    fn inverse_partials_match_frozen_values() {
        let g = geom();

        // 1. broadside of the receiver (bearing 90 degrees)
        let p = g
            .inverse_partials(BistaticPoint::new(8000.0, FRAC_PI_2))
            .unwrap();
        assert_abs_diff_eq!(p.dx_db, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.dx_dalpha, -3000.0, max_relative = 1e-12);
        assert_relative_eq!(p.dy_db, 0.625, max_relative = 1e-12);
        assert_relative_eq!(p.dy_dalpha, -1500.0, max_relative = 1e-12);
        assert_abs_diff_eq!(p.d2x_db2, 0.0, epsilon = 1e-15);
        assert_relative_eq!(p.d2x_dalpha2, 3000.0, max_relative = 1e-12);
        assert_relative_eq!(p.d2x_dbdalpha, -0.625, max_relative = 1e-12);
        assert_relative_eq!(p.d2y_db2, -3.125e-5, max_relative = 1e-12);
        assert_relative_eq!(p.d2y_dalpha2, -1500.0, max_relative = 1e-12);
        assert_relative_eq!(p.d2y_dbdalpha, -0.125, max_relative = 1e-12);

        // 2. bearing 60 degrees
        let p = g
            .inverse_partials(BistaticPoint::new(8000.0, FRAC_PI_3))
            .unwrap();
        assert_relative_eq!(p.dx_db, 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(p.dx_dalpha, -4618.8021535170061, max_relative = 1e-12);
        assert_relative_eq!(p.dy_db, 0.57735026918962576, max_relative = 1e-12);
        assert_abs_diff_eq!(p.dy_dalpha, 0.0, epsilon = 1e-9);
        assert_relative_eq!(p.d2x_db2, -2.7777777777777778e-5, max_relative = 1e-12);
        assert_relative_eq!(p.d2x_dalpha2, 2666.6666666666667, max_relative = 1e-12);
        assert_relative_eq!(p.d2x_dbdalpha, -0.57735026918962576, max_relative = 1e-12);
        assert_relative_eq!(p.d2y_db2, -4.8112522432468814e-5, max_relative = 1e-12);
        assert_relative_eq!(p.d2y_dalpha2, -4618.8021535170061, max_relative = 1e-12);
        assert_relative_eq!(p.d2y_dbdalpha, 1.0 / 3.0, max_relative = 1e-12);

        // 3. bearing 120 degrees (behind the transmitter side)
        let p = g
            .inverse_partials(BistaticPoint::new(8000.0, 2.0 * FRAC_PI_3))
            .unwrap();
        assert_relative_eq!(p.dx_db, -0.28, max_relative = 1e-12);
        assert_relative_eq!(p.dx_dalpha, -1662.7687752661222, max_relative = 1e-12);
        assert_relative_eq!(p.dy_db, 0.48497422611928564, max_relative = 1e-12);
        assert_relative_eq!(p.dy_dalpha, -1920.0, max_relative = 1e-12);
        assert_relative_eq!(p.d2x_db2, 6.0e-6, max_relative = 1e-12);
        assert_relative_eq!(p.d2x_dalpha2, 2112.0, max_relative = 1e-12);
        assert_relative_eq!(p.d2x_dbdalpha, -0.42954860027708157, max_relative = 1e-12);
        assert_relative_eq!(p.d2y_db2, -1.0392304845413264e-5, max_relative = 1e-12);
        assert_relative_eq!(p.d2y_dalpha2, -332.55375505322444, max_relative = 1e-12);
        assert_relative_eq!(p.d2y_dbdalpha, -0.376, max_relative = 1e-12);
    }

    #[test]
    fn partials_match_finite_differences() {
        let g = geom();
        for &b in &[4500.0, 8000.0, 20000.0] {
            for &deg in &[5.0, 30.0, 60.0, 90.0, 120.0] {
                let m = BistaticPoint::new(b, deg * PI / 180.0);
                let p = g.inverse_partials(m).unwrap();
                assert_matrix_close(&p.jacobian(), &fd_inverse_jacobian(&g, m), 1e-6);
                let (hx, hy) = fd_inverse_hessians(&g, m);
                assert_matrix_close(&p.hessian_x(), &hx, 1e-6);
                assert_matrix_close(&p.hessian_y(), &hy, 1e-6);

                let cart = g.to_cartesian(m).unwrap();
                let f = g.forward_partials(cart).unwrap();
                assert_matrix_close(&f.jacobian(), &fd_forward_jacobian(&g, cart), 1e-6);
            }
        }
    }

    #[test]
    fn inverse_and_forward_jacobians_are_mutual_inverses() {
        let g = geom();
        for &b in &[4500.0, 8000.0, 20000.0] {
            for &deg in &[5.0, 30.0, 60.0, 90.0, 120.0, -45.0, 175.0] {
                let m = BistaticPoint::new(b, deg * PI / 180.0);
                let ji = g.inverse_partials(m).unwrap().jacobian();
                let cart = g.to_cartesian(m).unwrap();
                let jf = g.forward_partials(cart).unwrap().jacobian();
                let product = ji * jf;
                assert_abs_diff_eq!(product, Matrix2::identity(), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn round_trip_is_identity_on_a_grid() {
        let g = geom();
        let mut checked = 0;
        for i in 1..=40 {
            for j in -18..=18 {
                let b = 4000.0 * (1.01 + 0.22 * i as f64);
                let alpha = j as f64 * PI / 18.0;
                let m = BistaticPoint::new(b, alpha);
                let back = g.to_measurement(g.to_cartesian(m).unwrap()).unwrap();
                assert_relative_eq!(back.range_sum, b, max_relative = 1e-9);
                assert_abs_diff_eq!(back.bearing, alpha, epsilon = 1e-9 * alpha.abs().max(1.0));
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn bearing_negation_mirrors_across_the_baseline() {
        let g = geom();
        for &b in &[4100.0, 8000.0, 31000.0] {
            for &alpha in &[0.2, 1.0, 2.5] {
                let p = g.to_cartesian(BistaticPoint::new(b, alpha)).unwrap();
                let q = g.to_cartesian(BistaticPoint::new(b, -alpha)).unwrap();
                assert_relative_eq!(p.x, q.x, max_relative = 1e-14);
                assert_relative_eq!(p.y, -q.y, max_relative = 1e-14);
            }
        }
    }
}
