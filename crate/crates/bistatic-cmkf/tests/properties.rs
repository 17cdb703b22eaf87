//! Randomized cross-module invariants: coordinate maps that undo each other,
//! covariance orderings between conversion methods, filter updates that keep
//! covariances well formed, and statistical consistency of the whole filter
//! loop on an exactly matched linear-Gaussian problem.

use bistatic_cmkf::{
    chi2_mean_bounds, constant_velocity_model, convert_conventional, convert_ducm, convert_ucm,
    ducm_covariance, generate_trajectory, nees_dynamic, predict, rmse, step, ucm_covariance,
    update, BistaticGeometry, BistaticPoint, CartesianPoint, ConversionMethod,
    ConvertedMeasurement, HeadingPolicy, MeasurementSpacePrediction, NoiseSpec, NoisyMeasurement,
    ScenarioConfig, TrackState,
};
use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

const BASELINE: f64 = 4000.0;

fn geom() -> BistaticGeometry {
    BistaticGeometry::new(BASELINE).unwrap()
}

fn valid_point() -> impl Strategy<Value = BistaticPoint> {
    (4100.0..40_000.0f64, -3.1..3.1f64).prop_map(|(b, a)| BistaticPoint::new(b, a))
}

fn noise_spec() -> impl Strategy<Value = NoiseSpec> {
    (0.5..100.0f64, 1e-4..0.12f64).prop_map(|(sb, sa)| NoiseSpec::new(sb, sa).unwrap())
}

fn min_eigenvalue(m: &Matrix2<f64>) -> f64 {
    let eigs = m.symmetric_eigenvalues();
    eigs[0].min(eigs[1])
}

proptest! {
    // 1. the inverse map undoes the forward map everywhere in the valid region
    #[test]
    fn round_trip_is_identity(p in valid_point()) {
        let g = geom();
        let cart = g.to_cartesian(p).unwrap();
        let back = g.to_measurement(cart).unwrap();
        prop_assert!((back.range_sum - p.range_sum).abs() <= 1e-9 * p.range_sum);
        prop_assert!((back.bearing - p.bearing).abs() <= 1e-9);
    }

    // 2. forward and inverse jacobians multiply to the identity
    #[test]
    fn jacobians_are_mutual_inverses(p in valid_point()) {
        let g = geom();
        let cart = g.to_cartesian(p).unwrap();
        let inv = g.inverse_partials(p).unwrap();
        let fwd = g.forward_partials(cart).unwrap();
        let product = fwd.jacobian() * inv.jacobian();
        let residual = (product - Matrix2::identity()).norm();
        prop_assert!(
            residual <= 1e-6 * product.norm().max(1.0),
            "residual {residual} for product {product}"
        );
    }

    // 3. the geometry is mirror symmetric about the baseline
    #[test]
    fn bearing_mirror_flips_only_y(p in valid_point()) {
        let g = geom();
        let up = g.to_cartesian(p).unwrap();
        let down = g
            .to_cartesian(BistaticPoint::new(p.range_sum, -p.bearing))
            .unwrap();
        prop_assert!((up.x - down.x).abs() <= 1e-12 * up.x.abs().max(1.0));
        prop_assert!((up.y + down.y).abs() <= 1e-12 * up.y.abs().max(1.0));
    }

    // 4. reported covariances stay symmetric and nonnegative after enforcement
    #[test]
    fn conversion_covariances_are_symmetric_and_psd(p in valid_point(), noise in noise_spec()) {
        let g = geom();
        let m = NoisyMeasurement { point: p, noise };
        for cm in [
            convert_conventional(&m, &g).unwrap(),
            convert_ucm(&m, &g).unwrap(),
        ] {
            prop_assert_eq!(cm.covariance[(0, 1)], cm.covariance[(1, 0)]);
            let floor = -1e-12 * cm.covariance.trace();
            prop_assert!(
                min_eigenvalue(&cm.covariance) >= floor,
                "min eig {} below floor {floor}",
                min_eigenvalue(&cm.covariance)
            );
        }
    }

    // 5. widening by prediction variances never shrinks the covariance
    #[test]
    fn ducm_dominates_ucm(
        p in valid_point(),
        noise in noise_spec(),
        var_b in 0.0..4.0e6f64,
        var_a in 0.0..0.01f64,
    ) {
        let g = geom();
        let m = NoisyMeasurement { point: p, noise };
        let pred = MeasurementSpacePrediction {
            point: p,
            var_range_sum: var_b,
            var_bearing: var_a,
        };
        let ucm = ucm_covariance(&m, &g).unwrap();
        let ducm = ducm_covariance(p, &pred, &noise, &g).unwrap();
        let diff = ducm - ucm;
        prop_assert!(
            min_eigenvalue(&diff) >= -1e-10 * ducm.trace(),
            "difference has min eig {}",
            min_eigenvalue(&diff)
        );
    }

    // 6. zero prediction variance reduces the decorrelated form to the plain
    //    second-order form bit for bit
    #[test]
    fn zero_prediction_variance_reduction_is_bitwise(p in valid_point(), noise in noise_spec()) {
        let g = geom();
        let m = NoisyMeasurement { point: p, noise };
        let pred = MeasurementSpacePrediction {
            point: p,
            var_range_sum: 0.0,
            var_bearing: 0.0,
        };
        prop_assert_eq!(
            ducm_covariance(p, &pred, &noise, &g).unwrap(),
            ucm_covariance(&m, &g).unwrap()
        );
    }

    // 7. the decorrelated covariance depends on the prediction only, never on
    //    the measurement value it is paired with
    #[test]
    fn ducm_covariance_is_independent_of_the_measurement(
        pred_point in valid_point(),
        m1 in valid_point(),
        m2 in valid_point(),
        noise in noise_spec(),
    ) {
        let g = geom();
        let pred = MeasurementSpacePrediction {
            point: pred_point,
            var_range_sum: 900.0,
            var_bearing: 1e-4,
        };
        let a = convert_ducm(&NoisyMeasurement { point: m1, noise }, &pred, &g).unwrap();
        let b = convert_ducm(&NoisyMeasurement { point: m2, noise }, &pred, &g).unwrap();
        prop_assert_eq!(a.covariance, b.covariance);
    }

    // 8. rmse does not care about pair order
    #[test]
    fn rmse_is_permutation_invariant(pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..40)) {
        let truths: Vec<Vector2<f64>> = pairs.iter().map(|_| Vector2::zeros()).collect();
        let estimates: Vec<Vector2<f64>> = pairs.iter().map(|&(x, y)| Vector2::new(x, y)).collect();
        let forward = rmse(&truths, &estimates).unwrap();
        let reversed: Vec<Vector2<f64>> = estimates.iter().rev().copied().collect();
        let backward = rmse(&truths, &reversed).unwrap();
        prop_assert!((forward - backward).abs() <= 1e-12 * forward.max(1.0));
    }
}

// 9. filter steps keep track covariances symmetric and numerically PSD over
//    thousands of randomized geometries, priors, and methods
#[test]
fn filter_steps_preserve_covariance_shape() {
    let g = geom();
    let model = constant_velocity_model(1.0).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    let mut checked = 0usize;
    while checked < 5000 {
        let b = rng.random_range(4200.0..30_000.0f64);
        let a = rng.random_range(-3.0..3.0f64);
        let truth = match g.to_cartesian(BistaticPoint::new(b, a)) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let noise = NoiseSpec::new(
            rng.random_range(1.0..80.0),
            rng.random_range(1e-3..0.1),
        )
        .unwrap();
        // random positive definite prior
        let mut aa = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                aa[(i, j)] = rng.sample::<f64, _>(StandardNormal) * 40.0;
            }
        }
        let prior = TrackState {
            state: Vector4::new(
                truth.x + rng.sample::<f64, _>(StandardNormal) * 50.0,
                rng.sample::<f64, _>(StandardNormal) * 10.0,
                truth.y + rng.sample::<f64, _>(StandardNormal) * 50.0,
                rng.sample::<f64, _>(StandardNormal) * 10.0,
            ),
            covariance: aa * aa.transpose() + Matrix4::identity(),
        };
        let wb: f64 = rng.sample(StandardNormal);
        let wa: f64 = rng.sample(StandardNormal);
        let m = NoisyMeasurement {
            point: BistaticPoint::new(
                b + noise.sigma_range_sum() * wb,
                a + noise.sigma_bearing() * wa,
            ),
            noise,
        };
        if g.validate_range_sum(m.point.range_sum).is_err() {
            continue;
        }
        for method in ConversionMethod::ALL {
            let outcome = step(&prior, &m, method, &model, &g).unwrap();
            let p = outcome.track.covariance;
            assert_eq!(p, p.transpose(), "asymmetric posterior for {method}");
            let min_eig = p
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            assert!(
                min_eig >= -1e-9 * p.trace(),
                "posterior min eig {min_eig} for {method}"
            );
            assert!(p.iter().all(|v| v.is_finite()));
        }
        checked += 1;
    }
}

// 10. on an exactly matched linear-Gaussian problem the filter NEES sits in
//     the chi-square band, validating filter and metrics end to end
#[test]
fn matched_linear_gaussian_filter_is_consistent() {
    let runs = 1000;
    let scans = 30;
    let cfg = ScenarioConfig {
        geometry: geom(),
        noise: NoiseSpec::new(10.0, 0.03).unwrap(), // unused: measurements are synthetic
        period: 1.0,
        scan_count: scans,
        run_count: runs as u64,
        initial_position: CartesianPoint::new(8000.0, 8000.0),
        initial_speed: 10.0,
        heading: HeadingPolicy::RandomUniform,
        truth_process_noise: true,
        seed: 0,
        confidence: 0.99,
    };
    let model = constant_velocity_model(cfg.period).unwrap();
    let r = Matrix2::new(400.0, 0.0, 0.0, 400.0);
    let p0 = Matrix4::from_diagonal(&Vector4::new(100.0, 25.0, 100.0, 25.0));
    let mut errors = Vec::with_capacity(runs);
    let mut covariances = Vec::with_capacity(runs);
    let mut rng = ChaCha12Rng::seed_from_u64(314159);
    for _ in 0..runs {
        let truths = generate_trajectory(&cfg, &mut rng);
        // initial estimate drawn exactly from the stated prior
        let init_err = Vector4::new(
            rng.sample::<f64, _>(StandardNormal) * 10.0,
            rng.sample::<f64, _>(StandardNormal) * 5.0,
            rng.sample::<f64, _>(StandardNormal) * 10.0,
            rng.sample::<f64, _>(StandardNormal) * 5.0,
        );
        let mut track = TrackState {
            state: truths[0] + init_err,
            covariance: p0,
        };
        for truth in truths.iter().skip(1) {
            track = predict(&track, &model);
            let position = Vector2::new(
                truth[0] + rng.sample::<f64, _>(StandardNormal) * 20.0,
                truth[2] + rng.sample::<f64, _>(StandardNormal) * 20.0,
            );
            let cm = ConvertedMeasurement {
                position: CartesianPoint::new(position.x, position.y),
                covariance: r,
                method: ConversionMethod::Ucm,
                covariance_adjusted: false,
            };
            track = update(&track, &cm).unwrap();
        }
        errors.push(track.state - truths[scans - 1]);
        covariances.push(track.covariance);
    }
    let nees = nees_dynamic(&errors, &covariances).unwrap();
    let (low, high) = chi2_mean_bounds(runs, 4, 0.99).unwrap();
    assert!(
        nees > low && nees < high,
        "final-scan NEES {nees} outside [{low}, {high}]"
    );
}
