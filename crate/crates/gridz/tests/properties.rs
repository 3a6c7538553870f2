//! Randomized property checks across the public API: transform round trips,
//! generator invariants, discretization spectra, and estimator consistency
//! on randomly drawn (but always well-posed) problems.

use gridz::freq::{log_grid, FrequencyResponse, ResponseSource};
use gridz::gridsim::{
    simulate_experiment, small_signal_dq, GridModel, NoiseConfig, OperatingPoint,
};
use gridz::signals::{generate_rbs, inverse_park, park, DqSeries, ExcitationSignal};
use gridz::ss::{discretize_zoh, ContinuousStateSpace};
use gridz::sysid::{arx_identify, RegressionData};
use nalgebra::{Complex, DMatrix, Matrix2};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// inverse_park followed by park is the identity for any rotation rate,
    /// initial angle, and dq waveform.
    #[test]
    fn park_round_trip_recovers_any_dq_record(
        seed in 0u64..1_000,
        n in 1usize..400,
        frame_freq in 1.0f64..2_000.0,
        theta0 in -10.0f64..10.0,
        dt in 1e-5f64..1e-2,
    ) {
        let wave = generate_rbs::<f64>(seed, 2 * n, 1.0, 1.0 / dt).unwrap();
        let d = wave.samples[..n].to_vec();
        let q = wave.samples[n..].to_vec();
        let dq = DqSeries::new(0.0, dt, d, q, frame_freq, "probe").unwrap();
        let abc = inverse_park(&dq, theta0).unwrap();
        let back = park(&abc, frame_freq, theta0).unwrap();
        for k in 0..n {
            prop_assert!((back.d[k] - dq.d[k]).abs() < 1e-10);
            prop_assert!((back.q[k] - dq.q[k]).abs() < 1e-10);
        }
    }

    /// A random binary sequence takes exactly the values +/-amplitude and is
    /// bit-reproducible for a fixed seed.
    #[test]
    fn rbs_is_binary_and_seed_deterministic(
        seed in 0u64..10_000,
        n in 1usize..600,
        amplitude in 1e-3f64..10.0,
    ) {
        let a = generate_rbs::<f64>(seed, n, amplitude, 1000.0).unwrap();
        let b = generate_rbs::<f64>(seed, n, amplitude, 1000.0).unwrap();
        prop_assert_eq!(&a.samples, &b.samples);
        for &x in &a.samples {
            prop_assert!(x == amplitude || x == -amplitude);
        }
    }

    /// Log-spaced grids hit both endpoints, stay strictly ascending, and
    /// keep a constant ratio between neighbours.
    #[test]
    fn log_grid_is_strictly_ascending_with_exact_endpoints(
        lo in 1e-2f64..10.0,
        span in 1.5f64..1e4,
        points in 2usize..80,
    ) {
        let hi = lo * span;
        let g = log_grid(lo, hi, points).unwrap();
        prop_assert_eq!(g.len(), points);
        prop_assert_eq!(g[0], lo);
        prop_assert_eq!(g[points - 1], hi);
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
        let ratio = (g[1] / g[0]).ln();
        for w in g.windows(2) {
            prop_assert!(((w[1] / w[0]).ln() - ratio).abs() < 1e-9);
        }
    }

    /// Zero-order-hold discretization maps continuous eigenvalues through
    /// exp(lambda dt) for a randomly damped oscillator-plus-real-pole.
    #[test]
    fn zoh_discretization_maps_the_spectrum_exponentially(
        damping in 0.1f64..50.0,
        omega in 1.0f64..500.0,
        real_pole in 0.5f64..100.0,
        dt in 1e-5f64..1e-3,
    ) {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[-damping, omega, 0.0, -omega, -damping, 0.0, 0.0, 0.0, -real_pole],
        );
        let ss = ContinuousStateSpace::new(
            a.clone(),
            DMatrix::identity(3, 3),
            DMatrix::identity(3, 3),
            DMatrix::zeros(3, 3),
        )
        .unwrap();
        let dss = discretize_zoh(&ss, dt).unwrap();
        let mut want: Vec<Complex<f64>> = a
            .complex_eigenvalues()
            .iter()
            .map(|l| (l * Complex::new(dt, 0.0)).exp())
            .collect();
        let mut got: Vec<Complex<f64>> =
            dss.a.clone().complex_eigenvalues().iter().copied().collect();
        let key = |z: &Complex<f64>| (z.re, z.im);
        want.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
        got.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
        for (p, q) in want.iter().zip(&got) {
            prop_assert!((p - q).norm() < 1e-9);
        }
    }

    /// Least-squares ARX recovers a random stable first-order system exactly
    /// from noiseless data.
    #[test]
    fn arx_recovers_random_first_order_dynamics(
        pole in -0.95f64..0.95,
        gain in -5.0f64..5.0,
        seed in 0u64..1_000,
    ) {
        prop_assume!(gain.abs() > 1e-3);
        let n = 600;
        let u = generate_rbs::<f64>(seed, n, 1.0, 1000.0).unwrap();
        let mut y = vec![0.0; n];
        for k in 1..n {
            y[k] = pole * y[k - 1] + gain * u.samples[k - 1];
        }
        let data = RegressionData::new(
            DMatrix::from_row_slice(1, n, &u.samples),
            DMatrix::from_row_slice(1, n, &y),
            1e-3,
        )
        .unwrap();
        let model = arx_identify(&data, 1, 1).unwrap();
        // Difference-equation convention: y_k + a1 y_{k-1} = b1 u_{k-1}.
        prop_assert!((model.a_coeffs[0][(0, 0)] + pole).abs() < 1e-7);
        prop_assert!((model.b_coeffs[0][(0, 0)] - gain).abs() < 1e-7);
    }

    /// The frequency-response CSV codec round-trips random curves exactly.
    #[test]
    fn frequency_response_csv_round_trip_is_lossless(
        base in 0.1f64..10.0,
        step in 1.1f64..3.0,
        n in 1usize..40,
        re in -100.0f64..100.0,
        im in -100.0f64..100.0,
    ) {
        let freqs: Vec<f64> = (0..n).map(|k| base * step.powi(k as i32)).collect();
        let z: Vec<Matrix2<Complex<f64>>> = (0..n)
            .map(|k| {
                let s = 1.0 + k as f64;
                Matrix2::new(
                    Complex::new(re * s, im),
                    Complex::new(im, -re),
                    Complex::new(-im, re / s),
                    Complex::new(re, im * s),
                )
            })
            .collect();
        let curve = FrequencyResponse::new(freqs, z, ResponseSource::Wideband).unwrap();
        let text = curve.to_csv_string();
        let back = FrequencyResponse::<f64>::from_csv_str(&text, ResponseSource::Wideband).unwrap();
        prop_assert_eq!(&curve.freqs_hz, &back.freqs_hz);
        prop_assert_eq!(&curve.z, &back.z);
    }

    /// With no excitation and no noise the small-signal record is identically
    /// zero: the delta-mode simulation adds nothing to the operating point.
    #[test]
    fn unexcited_noiseless_experiment_is_exactly_quiescent(
        duration_frac in 0.05f64..0.4,
        r in 0.05f64..2.0,
        l in 1e-4f64..1e-2,
    ) {
        let fs = 2_000.0;
        let grid = GridModel::rl_degenerate(r, l, 100.0 * std::f64::consts::PI, 1e-3).unwrap();
        let duration = 0.1 + duration_frac;
        let n = (duration * fs) as usize;
        let silent = ExcitationSignal::<f64>::silent(n, fs);
        let rec = simulate_experiment(
            &grid,
            &silent,
            &silent,
            duration,
            fs,
            1,
            &NoiseConfig::none(),
            &OperatingPoint::default(),
            0.05,
        )
        .unwrap();
        let onset = rec.excitation_meta.onset_sample;
        let (v, i) = small_signal_dq(&rec, 0..onset).unwrap();
        for k in 0..v.len() {
            prop_assert!(v.d[k].abs() < 1e-12 && v.q[k].abs() < 1e-12);
            prop_assert!(i.d[k].abs() < 1e-12 && i.q[k].abs() < 1e-12);
        }
    }
}
