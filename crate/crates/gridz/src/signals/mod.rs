//! Waveform records and the abc <-> dq signal-processing layer.
//!
//! This module owns the two time-series types used throughout the toolkit
//! ([`ThreePhaseSeries`] for raw stationary-frame data, [`DqSeries`] for
//! rotating-frame data), the amplitude-invariant Park transform pair, and the
//! preprocessing steps applied before identification: steady-state offset
//! removal and optional prefiltering.

mod csvio;
mod excitation;
mod filter;

pub use csvio::{read_dq_csv, read_three_phase_csv, write_dq_csv, write_three_phase_csv};
pub use excitation::{generate_rbs, generate_sine, ExcitationKind, ExcitationSignal};
pub use filter::{prefilter, FilterSpec};

use crate::error::{Error, Result};
use crate::scalar::{fl, Scalar};
use std::ops::Range;

/// Uniformly sampled three-phase (abc) waveform record in per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreePhaseSeries<T: Scalar = f64> {
    /// Time of the first sample, seconds.
    pub t0: T,
    /// Sample spacing, seconds (uniform, > 0).
    pub dt: T,
    /// Phase-a samples, per-unit.
    pub a: Vec<T>,
    /// Phase-b samples, per-unit.
    pub b: Vec<T>,
    /// Phase-c samples, per-unit.
    pub c: Vec<T>,
    /// Free-form channel label (e.g. "pcc_voltage").
    pub label: String,
}

impl<T: Scalar> ThreePhaseSeries<T> {
    /// Validated constructor: all channels equal length >= 1 and `dt > 0`.
    pub fn new(t0: T, dt: T, a: Vec<T>, b: Vec<T>, c: Vec<T>, label: &str) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() || a.len() != c.len() {
            return Err(Error::invalid(format!(
                "three-phase channels must share a non-zero length (got a={}, b={}, c={})",
                a.len(),
                b.len(),
                c.len()
            )));
        }
        if dt <= T::zero() {
            return Err(Error::invalid("sample spacing dt must be positive"));
        }
        Ok(Self { t0, dt, a, b, c, label: label.to_string() })
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.a.len()
    }

    /// True when the record holds no samples (unreachable via `new`).
    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Time of sample `k`, seconds.
    pub fn time(&self, k: usize) -> T {
        self.t0 + self.dt * fl::<T>(k as f64)
    }

    /// Sample rate in Hz.
    pub fn sample_rate(&self) -> T {
        T::one() / self.dt
    }
}

/// Uniformly sampled rotating-frame (dq) waveform record in per-unit.
///
/// `frame_freq` is the constant rotation rate omega_g (rad/s) that produced
/// the record; `is_small_signal` records whether the steady-state operating
/// point has been subtracted (see [`remove_offset`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DqSeries<T: Scalar = f64> {
    /// Time of the first sample, seconds.
    pub t0: T,
    /// Sample spacing, seconds (uniform, > 0).
    pub dt: T,
    /// Direct-axis samples, per-unit.
    pub d: Vec<T>,
    /// Quadrature-axis samples, per-unit.
    pub q: Vec<T>,
    /// Rotation rate of the reference frame, rad/s (> 0).
    pub frame_freq: T,
    /// True once the steady-state offset has been removed.
    pub is_small_signal: bool,
    /// Free-form channel label.
    pub label: String,
}

impl<T: Scalar> DqSeries<T> {
    /// Validated constructor: channels equal length >= 1, `dt > 0`,
    /// `frame_freq > 0`.
    pub fn new(t0: T, dt: T, d: Vec<T>, q: Vec<T>, frame_freq: T, label: &str) -> Result<Self> {
        if d.is_empty() || d.len() != q.len() {
            return Err(Error::invalid(format!(
                "dq channels must share a non-zero length (got d={}, q={})",
                d.len(),
                q.len()
            )));
        }
        if dt <= T::zero() {
            return Err(Error::invalid("sample spacing dt must be positive"));
        }
        if frame_freq <= T::zero() {
            return Err(Error::invalid("frame frequency must be positive"));
        }
        Ok(Self { t0, dt, d, q, frame_freq, is_small_signal: false, label: label.to_string() })
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.d.len()
    }

    /// True when the record holds no samples (unreachable via `new`).
    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Time of sample `k`, seconds.
    pub fn time(&self, k: usize) -> T {
        self.t0 + self.dt * fl::<T>(k as f64)
    }

    /// Sample rate in Hz.
    pub fn sample_rate(&self) -> T {
        T::one() / self.dt
    }

    /// Copy of the sub-record covering `range` (same dt; t0 shifted).
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::invalid(format!(
                "slice {}..{} out of bounds for {} samples",
                range.start,
                range.end,
                self.len()
            )));
        }
        Ok(Self {
            t0: self.time(range.start),
            dt: self.dt,
            d: self.d[range.clone()].to_vec(),
            q: self.q[range.clone()].to_vec(),
            frame_freq: self.frame_freq,
            is_small_signal: self.is_small_signal,
            label: self.label.clone(),
        })
    }
}

/// Rotation angle of the dq frame at sample `k` of a series starting at `t0`.
#[inline]
fn frame_angle<T: Scalar>(theta0: T, frame_freq: T, t0: T, dt: T, k: usize) -> T {
    theta0 + frame_freq * (t0 + dt * fl::<T>(k as f64))
}

/// Amplitude-invariant Park transform (abc -> dq), q axis lagging d by 90 deg.
///
/// With theta(k) = `theta0` + `frame_freq`*(t0 + k*dt):
///
/// ```text
/// d =  (2/3) [ a cos(theta) + b cos(theta - 2pi/3) + c cos(theta + 2pi/3) ]
/// q = -(2/3) [ a sin(theta) + b sin(theta - 2pi/3) + c sin(theta + 2pi/3) ]
/// ```
///
/// The zero-sequence channel is dropped (balanced grid assumption). The
/// returned series has `is_small_signal = false`.
pub fn park<T: Scalar>(abc: &ThreePhaseSeries<T>, frame_freq: T, theta0: T) -> Result<DqSeries<T>> {
    if frame_freq <= T::zero() {
        return Err(Error::invalid("frame frequency must be positive"));
    }
    let n = abc.len();
    let two_thirds = fl::<T>(2.0 / 3.0);
    let shift = fl::<T>(2.0 * std::f64::consts::PI / 3.0);
    let mut d = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for k in 0..n {
        let theta = frame_angle(theta0, frame_freq, abc.t0, abc.dt, k);
        let (sa, ca) = (theta.sin(), theta.cos());
        let (sb, cb) = ((theta - shift).sin(), (theta - shift).cos());
        let (sc, cc) = ((theta + shift).sin(), (theta + shift).cos());
        d.push(two_thirds * (abc.a[k] * ca + abc.b[k] * cb + abc.c[k] * cc));
        q.push(-two_thirds * (abc.a[k] * sa + abc.b[k] * sb + abc.c[k] * sc));
    }
    DqSeries::new(abc.t0, abc.dt, d, q, frame_freq, &abc.label)
}

/// Exact inverse of [`park`] under the amplitude-invariant convention with
/// zero sequence assumed 0:
///
/// ```text
/// a = d cos(theta)          - q sin(theta)
/// b = d cos(theta - 2pi/3)  - q sin(theta - 2pi/3)
/// c = d cos(theta + 2pi/3)  - q sin(theta + 2pi/3)
/// ```
pub fn inverse_park<T: Scalar>(dq: &DqSeries<T>, theta0: T) -> Result<ThreePhaseSeries<T>> {
    let n = dq.len();
    let shift = fl::<T>(2.0 * std::f64::consts::PI / 3.0);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for k in 0..n {
        let theta = frame_angle(theta0, dq.frame_freq, dq.t0, dq.dt, k);
        a.push(dq.d[k] * theta.cos() - dq.q[k] * theta.sin());
        b.push(dq.d[k] * (theta - shift).cos() - dq.q[k] * (theta - shift).sin());
        c.push(dq.d[k] * (theta + shift).cos() - dq.q[k] * (theta + shift).sin());
    }
    ThreePhaseSeries::new(dq.t0, dq.dt, a, b, c, &dq.label)
}

/// Subtracts the per-channel mean over `reference_window` (a pre-excitation
/// steady-state stretch) and marks the result as small-signal data.
pub fn remove_offset<T: Scalar>(dq: &DqSeries<T>, reference_window: Range<usize>) -> Result<DqSeries<T>> {
    if reference_window.start >= reference_window.end {
        return Err(Error::invalid("offset reference window is empty"));
    }
    if reference_window.end > dq.len() {
        return Err(Error::invalid(format!(
            "offset reference window {}..{} exceeds record length {}",
            reference_window.start,
            reference_window.end,
            dq.len()
        )));
    }
    let count = fl::<T>((reference_window.end - reference_window.start) as f64);
    let mut mean_d = T::zero();
    let mut mean_q = T::zero();
    for k in reference_window {
        mean_d += dq.d[k];
        mean_q += dq.q[k];
    }
    mean_d /= count;
    mean_q /= count;
    let mut out = dq.clone();
    for v in &mut out.d {
        *v -= mean_d;
    }
    for v in &mut out.q {
        *v -= mean_q;
    }
    out.is_small_signal = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const W50: f64 = 100.0 * std::f64::consts::PI;

    fn balanced_set(n: usize, amp: f64, w: f64, dt: f64, phase: f64) -> ThreePhaseSeries {
        let shift = 2.0 * std::f64::consts::PI / 3.0;
        let sample = |off: f64| -> Vec<f64> {
            (0..n).map(|k| amp * (w * (k as f64) * dt + phase - off).cos()).collect()
        };
        ThreePhaseSeries::new(0.0, dt, sample(0.0), sample(shift), sample(-shift), "bal").unwrap()
    }

    #[test]
    fn park_of_aligned_balanced_set_is_unit_d() {
        let abc = balanced_set(500, 1.0, W50, 1e-4, 0.0);
        let dq = park(&abc, W50, 0.0).unwrap();
        for k in 0..dq.len() {
            assert_relative_eq!(dq.d[k], 1.0, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(dq.q[k], 0.0, epsilon = 1e-12);
        }
        assert!(!dq.is_small_signal);
    }

    #[test]
    fn park_of_zero_input_is_zero() {
        let z = vec![0.0; 16];
        let abc = ThreePhaseSeries::new(0.0, 1e-3, z.clone(), z.clone(), z, "zero").unwrap();
        let dq = park(&abc, W50, 0.3).unwrap();
        assert!(dq.d.iter().chain(dq.q.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn park_preserves_balanced_phasor_magnitude() {
        // Amplitude-invariant convention: |dq phasor| equals the phase amplitude.
        let abc = balanced_set(200, 0.37, W50, 1e-4, 1.1);
        let dq = park(&abc, W50, 0.0).unwrap();
        for k in 0..dq.len() {
            let mag = (dq.d[k] * dq.d[k] + dq.q[k] * dq.q[k]).sqrt();
            assert_relative_eq!(mag, 0.37, max_relative = 1e-12);
        }
    }

    #[test]
    fn inverse_park_of_unit_d_is_balanced_cosines() {
        let n = 100;
        let dq = DqSeries::new(0.0, 1e-4, vec![1.0; n], vec![0.0; n], W50, "u").unwrap();
        let abc = inverse_park(&dq, 0.0).unwrap();
        for k in 0..n {
            let theta = W50 * (k as f64) * 1e-4;
            assert_relative_eq!(abc.a[k], theta.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn park_inverse_park_round_trip_on_balanced_signals() {
        // Random balanced (zero-sum) three-phase signals: a+b+c = 0 ensures the
        // dropped zero-sequence channel carries nothing.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 400;
        let dt = 2e-4;
        let shift = 2.0 * std::f64::consts::PI / 3.0;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        // Superpose random positive- and negative-sequence tones (both zero-sum).
        for _ in 0..5 {
            let amp: f64 = rng.gen_range(0.1..1.0);
            let w: f64 = rng.gen_range(10.0..3000.0);
            let ph: f64 = rng.gen_range(0.0..6.28);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            for k in 0..n {
                let th = w * (k as f64) * dt + ph;
                a[k] += amp * th.cos();
                b[k] += amp * (th - sign * shift).cos();
                c[k] += amp * (th + sign * shift).cos();
            }
        }
        let abc = ThreePhaseSeries::new(0.0, dt, a, b, c, "rt").unwrap();
        let dq = park(&abc, W50, 0.27).unwrap();
        let back = inverse_park(&dq, 0.27).unwrap();
        for k in 0..n {
            assert_relative_eq!(back.a[k], abc.a[k], epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(back.b[k], abc.b[k], epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(back.c[k], abc.c[k], epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn park_after_inverse_park_is_identity_on_dq() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 300;
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dq = DqSeries::new(0.05, 1e-4, d.clone(), q.clone(), W50, "x").unwrap();
        let abc = inverse_park(&dq, 1.9).unwrap();
        let dq2 = park(&abc, W50, 1.9).unwrap();
        for k in 0..n {
            assert_relative_eq!(dq2.d[k], d[k], epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(dq2.q[k], q[k], epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn remove_offset_zeroes_a_constant() {
        let n = 50;
        let dq = DqSeries::new(0.0, 1e-3, vec![0.7; n], vec![-0.2; n], W50, "c").unwrap();
        let out = remove_offset(&dq, 0..20).unwrap();
        assert!(out.is_small_signal);
        assert!(out.d.iter().all(|&x| x.abs() < 1e-15));
        assert!(out.q.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn remove_offset_recovers_excitation_over_constant() {
        // Constant plus a zero-mean wiggle that starts after the window.
        let n = 200;
        let window = 0..50;
        let mut d = vec![0.5; n];
        for (k, v) in d.iter_mut().enumerate().skip(50) {
            *v += ((k as f64) * 0.7).sin() * 0.01;
        }
        let dq = DqSeries::new(0.0, 1e-3, d.clone(), vec![0.1; n], W50, "c+x").unwrap();
        let out = remove_offset(&dq, window).unwrap();
        for k in 0..n {
            assert_relative_eq!(out.d[k], d[k] - 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn remove_offset_is_idempotent_on_small_signal_data() {
        let n = 100;
        let d: Vec<f64> = (0..n).map(|k| ((k as f64) * 0.31).sin() * 0.02).collect();
        let q: Vec<f64> = (0..n).map(|k| ((k as f64) * 0.17).cos() * 0.02).collect();
        let dq = DqSeries::new(0.0, 1e-3, d, q, W50, "s").unwrap();
        let once = remove_offset(&dq, 0..n).unwrap();
        let twice = remove_offset(&once, 0..n).unwrap();
        for k in 0..n {
            assert!((twice.d[k] - once.d[k]).abs() <= 1e-15);
            assert!((twice.q[k] - once.q[k]).abs() <= 1e-15);
        }
    }

    #[test]
    fn remove_offset_rejects_empty_window() {
        let dq = DqSeries::new(0.0, 1e-3, vec![1.0; 4], vec![0.0; 4], W50, "e").unwrap();
        assert!(remove_offset(&dq, 2..2).is_err());
        assert!(remove_offset(&dq, 0..9).is_err());
    }

    #[test]
    fn slice_shifts_time_origin() {
        let dq = DqSeries::new(1.0, 0.5, vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4], W50, "s").unwrap();
        let s = dq.slice(2..4).unwrap();
        assert_eq!(s.d, vec![3.0, 4.0]);
        assert_relative_eq!(s.t0, 2.0);
        assert!(dq.slice(3..3).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(ThreePhaseSeries::new(0.0, 1e-3, vec![1.0], vec![1.0, 2.0], vec![1.0], "x").is_err());
        assert!(ThreePhaseSeries::<f64>::new(0.0, 0.0, vec![1.0], vec![1.0], vec![1.0], "x").is_err());
        assert!(DqSeries::<f64>::new(0.0, 1e-3, vec![], vec![], W50, "x").is_err());
        assert!(DqSeries::new(0.0, 1e-3, vec![1.0], vec![1.0], 0.0, "x").is_err());
    }

    #[test]
    fn park_works_in_f32() {
        let shift = 2.0_f32 * std::f32::consts::PI / 3.0;
        let w = 100.0_f32 * std::f32::consts::PI;
        let n = 64;
        let mk = |off: f32| (0..n).map(|k| (w * (k as f32) * 1e-4 - off).cos()).collect::<Vec<f32>>();
        let abc = ThreePhaseSeries::new(0.0_f32, 1e-4, mk(0.0), mk(shift), mk(-shift), "f32").unwrap();
        let dq = park(&abc, w, 0.0).unwrap();
        for k in 0..n {
            assert!((dq.d[k] - 1.0).abs() < 1e-5);
            assert!(dq.q[k].abs() < 1e-5);
        }
    }
}
