//! Optional prefiltering (frequency weighting) of dq small-signal records.
//!
//! All filters are causal single-pole sections with exact-pole (matched-z)
//! coefficients, initialized at the DC steady state of the first sample so
//! that a constant record maps to an identically zero output rather than a
//! decaying start-up transient.

use super::DqSeries;
use crate::error::{Error, Result};
use crate::scalar::{fl, Scalar};
use num_complex::Complex;

/// Frequency-weighting specification applied identically to both dq channels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    /// Identity: output is bit-identical to the input.
    None,
    /// Subtracts a trailing moving average of `window` samples (slow-trend
    /// removal); partial windows are used near the record start.
    MovingAverageDetrend { window: usize },
    /// Single-pole highpass with pole `exp(-2 pi cutoff_hz dt)` and unit
    /// edge gain.
    FirstOrderHighpass { cutoff_hz: f64 },
    /// Highpass at `low_hz` cascaded with a unit-DC-gain lowpass at `high_hz`.
    Bandpass { low_hz: f64, high_hz: f64 },
}

impl FilterSpec {
    /// Validates cutoffs against a sample rate (strictly inside the open
    /// interval (0, sample_rate/2)).
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let nyquist = sample_rate_hz / 2.0;
        let check = |f: f64, name: &str| -> Result<()> {
            if f <= 0.0 || f >= nyquist {
                return Err(Error::invalid(format!(
                    "{name} cutoff {f} Hz must lie strictly inside (0, {nyquist} Hz)"
                )));
            }
            Ok(())
        };
        match *self {
            FilterSpec::None => Ok(()),
            FilterSpec::MovingAverageDetrend { window } => {
                if window < 2 {
                    return Err(Error::invalid("moving-average window must be at least 2 samples"));
                }
                Ok(())
            }
            FilterSpec::FirstOrderHighpass { cutoff_hz } => check(cutoff_hz, "highpass"),
            FilterSpec::Bandpass { low_hz, high_hz } => {
                check(low_hz, "bandpass low")?;
                check(high_hz, "bandpass high")?;
                if low_hz >= high_hz {
                    return Err(Error::invalid(format!(
                        "bandpass cutoffs must satisfy low < high (got {low_hz} >= {high_hz})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Complex frequency response of the filter at `freq_hz` for records
    /// sampled at `sample_rate_hz` (the design gain used by tests and docs).
    pub fn gain_at(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex<f64> {
        let omega = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
        let z_inv = Complex::from_polar(1.0, -omega);
        match *self {
            FilterSpec::None => Complex::new(1.0, 0.0),
            FilterSpec::MovingAverageDetrend { window } => {
                // 1 - (1/w) * (1 - z^-w) / (1 - z^-1)
                let w = window as f64;
                let zw = Complex::from_polar(1.0, -omega * w);
                Complex::new(1.0, 0.0) - (Complex::new(1.0, 0.0) - zw) / (w * (Complex::new(1.0, 0.0) - z_inv))
            }
            FilterSpec::FirstOrderHighpass { cutoff_hz } => {
                let alpha = (-2.0 * std::f64::consts::PI * cutoff_hz / sample_rate_hz).exp();
                (Complex::new(1.0, 0.0) - z_inv) / (Complex::new(1.0, 0.0) - alpha * z_inv)
            }
            FilterSpec::Bandpass { low_hz, high_hz } => {
                let hp = FilterSpec::FirstOrderHighpass { cutoff_hz: low_hz };
                let beta = (-2.0 * std::f64::consts::PI * high_hz / sample_rate_hz).exp();
                let lp = (1.0 - beta) / (Complex::new(1.0, 0.0) - beta * z_inv);
                hp.gain_at(freq_hz, sample_rate_hz) * lp
            }
        }
    }
}

/// y(k) = alpha y(k-1) + x(k) - x(k-1), seeded with x(-1) = x(0), y(-1) = 0
/// so a DC record yields an exactly zero output.
fn highpass_channel<T: Scalar>(x: &[T], alpha: T) -> Vec<T> {
    let mut y = Vec::with_capacity(x.len());
    let mut y_prev = T::zero();
    let mut x_prev = x[0];
    for &xk in x {
        // Difference first: adding xk before subtracting x_prev would quantize
        // a small decaying output against a large DC level.
        let yk = alpha * y_prev + (xk - x_prev);
        y.push(yk);
        y_prev = yk;
        x_prev = xk;
    }
    y
}

/// y(k) = beta y(k-1) + (1-beta) x(k), seeded with y(-1) = x-free zero state
/// (inputs are already DC-free when used inside the bandpass cascade).
fn lowpass_channel<T: Scalar>(x: &[T], beta: T) -> Vec<T> {
    let one_minus = T::one() - beta;
    let mut y = Vec::with_capacity(x.len());
    let mut y_prev = T::zero();
    for &xk in x {
        let yk = beta * y_prev + one_minus * xk;
        y.push(yk);
        y_prev = yk;
    }
    y
}

fn detrend_channel<T: Scalar>(x: &[T], window: usize) -> Vec<T> {
    let mut y = Vec::with_capacity(x.len());
    let mut running = T::zero();
    for k in 0..x.len() {
        running += x[k];
        if k >= window {
            running -= x[k - window];
        }
        let count = fl::<T>(window.min(k + 1) as f64);
        y.push(x[k] - running / count);
    }
    y
}

/// Applies `spec` identically to both dq channels; `FilterSpec::None` returns
/// a bit-identical copy. Cutoffs are validated against the record's rate.
pub fn prefilter<T: Scalar>(dq: &DqSeries<T>, spec: &FilterSpec) -> Result<DqSeries<T>> {
    spec.validate(crate::scalar::lower(dq.sample_rate()))?;
    let mut out = dq.clone();
    match *spec {
        FilterSpec::None => {}
        FilterSpec::MovingAverageDetrend { window } => {
            out.d = detrend_channel(&dq.d, window);
            out.q = detrend_channel(&dq.q, window);
        }
        FilterSpec::FirstOrderHighpass { cutoff_hz } => {
            let alpha = (-fl::<T>(2.0 * std::f64::consts::PI * cutoff_hz) * dq.dt).exp();
            out.d = highpass_channel(&dq.d, alpha);
            out.q = highpass_channel(&dq.q, alpha);
        }
        FilterSpec::Bandpass { low_hz, high_hz } => {
            let alpha = (-fl::<T>(2.0 * std::f64::consts::PI * low_hz) * dq.dt).exp();
            let beta = (-fl::<T>(2.0 * std::f64::consts::PI * high_hz) * dq.dt).exp();
            out.d = lowpass_channel(&highpass_channel(&dq.d, alpha), beta);
            out.q = lowpass_channel(&highpass_channel(&dq.q, alpha), beta);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const W50: f64 = 100.0 * std::f64::consts::PI;

    fn series(d: Vec<f64>, dt: f64) -> DqSeries {
        let q = d.clone();
        DqSeries::new(0.0, dt, d, q, W50, "t").unwrap()
    }

    /// Correlation-based amplitude of a steady-state tone over exact periods.
    fn tone_amplitude(x: &[f64], freq: f64, dt: f64) -> f64 {
        let n = x.len();
        let mut acc = Complex::new(0.0, 0.0);
        for (k, &v) in x.iter().enumerate() {
            acc += v * Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * freq * (k as f64) * dt);
        }
        2.0 * acc.norm() / n as f64
    }

    #[test]
    fn none_is_bit_identical() {
        let dq = series(vec![0.1, -0.4, 0.9, 0.0], 1e-3);
        let out = prefilter(&dq, &FilterSpec::None).unwrap();
        assert_eq!(out, dq);
    }

    #[test]
    fn highpass_zeroes_a_constant_record() {
        // DC steady-state initialization: a constant record maps to exactly
        // zero everywhere, so it is certainly below 1e-6 of the input level
        // after ten time constants.
        let dq = series(vec![0.8; 4000], 1e-4);
        let out = prefilter(&dq, &FilterSpec::FirstOrderHighpass { cutoff_hz: 40.0 }).unwrap();
        let tau_samples = (1.0 / (2.0 * std::f64::consts::PI * 40.0) / 1e-4).ceil() as usize;
        for k in (10 * tau_samples)..dq.len() {
            assert!(out.d[k].abs() <= 1e-6 * 0.8, "k={k}: {}", out.d[k]);
        }
        assert!(out.d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn highpass_step_decays_along_the_analytic_envelope() {
        // A mid-record step produces y(k0+m) = alpha^m exactly under the
        // recursion y(k) = alpha y(k-1) + x(k) - x(k-1).
        let dt = 1e-4;
        let fc = 40.0;
        let alpha = (-2.0 * std::f64::consts::PI * fc * dt).exp();
        let k0 = 100;
        let mut d = vec![0.0; 1500];
        for v in d.iter_mut().skip(k0) {
            *v = 1.0;
        }
        let dq = series(d, dt);
        let out = prefilter(&dq, &FilterSpec::FirstOrderHighpass { cutoff_hz: fc }).unwrap();
        for m in 0..1000 {
            // The recursion accumulates one rounding per step, so allow m*eps.
            assert_relative_eq!(out.d[k0 + m], alpha.powi(m as i32), max_relative = 1e-9);
        }
    }

    #[test]
    fn highpass_tone_matches_design_gain() {
        let dt = 1e-4;
        let fs = 1.0 / dt;
        let f = 200.0;
        let n = 20_000;
        let d: Vec<f64> = (0..n).map(|k| (2.0 * std::f64::consts::PI * f * k as f64 * dt).sin()).collect();
        let dq = series(d, dt);
        let spec = FilterSpec::FirstOrderHighpass { cutoff_hz: 40.0 };
        let out = prefilter(&dq, &spec).unwrap();
        // Measure after the transient (tau ~ 40 samples) on integer periods.
        let settle = 2000;
        let periods = ((n - settle) as f64 * f * dt).floor();
        let meas = settle + (periods / (f * dt)).round() as usize - settle;
        let amp = tone_amplitude(&out.d[settle..settle + meas], f, dt);
        assert_relative_eq!(amp, spec.gain_at(f, fs).norm(), max_relative = 1e-3);
    }

    #[test]
    fn bandpass_passes_midband_within_one_decibel_of_design_gain() {
        let dt = 1e-4;
        let fs = 1.0 / dt;
        let (lo, hi) = (20.0_f64, 500.0_f64);
        let f = (lo * hi).sqrt(); // geometric mid-band
        let n = 40_000;
        let d: Vec<f64> = (0..n).map(|k| (2.0 * std::f64::consts::PI * f * k as f64 * dt).sin()).collect();
        let dq = series(d, dt);
        let spec = FilterSpec::Bandpass { low_hz: lo, high_hz: hi };
        let out = prefilter(&dq, &spec).unwrap();
        let settle = 4000;
        let periods = ((n - settle) as f64 * f * dt).floor();
        let meas = (periods / (f * dt)).round() as usize;
        let amp = tone_amplitude(&out.d[settle..settle + meas], f, dt);
        let design = spec.gain_at(f, fs).norm();
        let db = 20.0 * (amp / design).log10();
        assert!(db.abs() < 1.0, "gain deviation {db} dB");
        // The time-domain measurement should in fact agree far more tightly.
        assert_relative_eq!(amp, design, max_relative = 2e-3);
    }

    #[test]
    fn detrend_removes_dc_exactly_and_keeps_fast_content() {
        let dt = 1e-4;
        let n = 5000;
        let f = 700.0;
        let d: Vec<f64> = (0..n)
            .map(|k| 2.5 + 0.1 * (2.0 * std::f64::consts::PI * f * k as f64 * dt).sin())
            .collect();
        let dq = series(d, dt);
        let spec = FilterSpec::MovingAverageDetrend { window: 100 };
        let out = prefilter(&dq, &spec).unwrap();
        // DC suppressed entirely.
        let tail_mean: f64 = out.d[200..].iter().sum::<f64>() / (n - 200) as f64;
        assert!(tail_mean.abs() < 1e-3);
        // Fast tone passes with the analytic comb gain.
        let settle = 500;
        let periods = ((n - settle) as f64 * f * dt).floor();
        let meas = (periods / (f * dt)).round() as usize;
        let amp = tone_amplitude(&out.d[settle..settle + meas], f, dt);
        assert_relative_eq!(amp, 0.1 * spec.gain_at(f, 1.0 / dt).norm(), max_relative = 5e-3);
    }

    #[test]
    fn constant_record_detrends_to_zero_from_the_first_sample() {
        let dq = series(vec![1.3; 300], 1e-3);
        let out = prefilter(&dq, &FilterSpec::MovingAverageDetrend { window: 50 }).unwrap();
        assert!(out.d.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn invalid_cutoffs_are_rejected() {
        let dq = series(vec![0.0; 10], 1e-3); // fs = 1 kHz, Nyquist 500 Hz
        assert!(prefilter(&dq, &FilterSpec::FirstOrderHighpass { cutoff_hz: 0.0 }).is_err());
        assert!(prefilter(&dq, &FilterSpec::FirstOrderHighpass { cutoff_hz: 500.0 }).is_err());
        assert!(prefilter(&dq, &FilterSpec::Bandpass { low_hz: 100.0, high_hz: 50.0 }).is_err());
        assert!(prefilter(&dq, &FilterSpec::Bandpass { low_hz: 10.0, high_hz: 600.0 }).is_err());
        assert!(prefilter(&dq, &FilterSpec::MovingAverageDetrend { window: 1 }).is_err());
    }

    #[test]
    fn both_channels_receive_the_same_filter() {
        let dt = 1e-4;
        let d: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.01).sin()).collect();
        let dq = DqSeries::new(0.0, dt, d.clone(), d, W50, "same").unwrap();
        let out = prefilter(&dq, &FilterSpec::FirstOrderHighpass { cutoff_hz: 30.0 }).unwrap();
        assert_eq!(out.d, out.q);
    }
}
