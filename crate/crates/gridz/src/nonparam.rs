//! Nonparametric impedance baselines: pointwise frequency sweep and
//! two-experiment wideband spectral estimation.
//!
//! Both methods resolve the 2x2 MIMO impedance by combining two linearly
//! independent injections: per frequency, `Z(f) = [V1 V2] [I1 I2]^-1`, where
//! the columns hold voltage/current phasors from the two experiments. The
//! sweep extracts single-tone phasors over an integer number of periods; the
//! wideband method averages windowed cross-spectra of repeated broadband
//! records (Welch estimation) and keeps only well-conditioned bins.

use crate::error::{Error, Result};
use crate::freq::{ExperimentMetadata, FrequencyResponse, ResponseSource};
use crate::gridsim::{small_signal_dq, MeasurementRecord};
use crate::scalar::{fl, lower, Scalar};
use crate::signals::DqSeries;
use nalgebra::{Complex, Matrix2, Vector2};
use rayon::prelude::*;
use rustfft::FftPlanner;

/// Which current axis a sweep experiment perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionAxis {
    /// Perturb the d-axis current, q silent.
    Direct,
    /// Perturb the q-axis current, d silent.
    Quadrature,
}

/// Plan for a pointwise frequency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan<T: Scalar = f64> {
    /// Requested injection frequencies, Hz (strictly ascending).
    pub freqs: Vec<T>,
    /// Injection amplitude, p.u.
    pub injection_amplitude: T,
    /// Head of each record discarded before phasor extraction, seconds.
    pub settle_time: T,
    /// Whole injection periods inside the measurement window.
    pub measure_periods: u32,
}

/// One sweep frequency after snapping to the sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnappedFrequency<T: Scalar = f64> {
    /// Snapped frequency, Hz; the window holds an exact period count.
    pub freq_hz: T,
    /// Measurement window length, samples.
    pub window_len: usize,
}

impl<T: Scalar> SweepPlan<T> {
    /// Validated constructor.
    pub fn new(
        freqs: Vec<T>,
        injection_amplitude: T,
        settle_time: T,
        measure_periods: u32,
    ) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::invalid("sweep plan needs at least one frequency"));
        }
        if freqs[0] <= T::zero() {
            return Err(Error::invalid("sweep frequencies must be positive"));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sweep frequencies must be strictly ascending"));
        }
        if injection_amplitude <= T::zero() {
            return Err(Error::invalid("injection amplitude must be positive"));
        }
        if settle_time < T::zero() {
            return Err(Error::invalid("settle time must be non-negative"));
        }
        if measure_periods == 0 {
            return Err(Error::invalid("need at least one measurement period"));
        }
        Ok(Self { freqs, injection_amplitude, settle_time, measure_periods })
    }

    /// Snaps every requested frequency onto the sampling grid so the
    /// measurement window holds exactly `measure_periods` periods
    /// (`f = measure_periods * fs / window_len`); frequencies that collapse
    /// onto the same grid point are merged.
    pub fn snapped(&self, sample_rate: T) -> Result<Vec<SnappedFrequency<T>>> {
        if sample_rate <= T::zero() {
            return Err(Error::invalid("sample rate must be positive"));
        }
        let periods = fl::<T>(f64::from(self.measure_periods));
        let min_window = 2 * self.measure_periods as usize + 1; // keep below Nyquist
        let mut out: Vec<SnappedFrequency<T>> = Vec::with_capacity(self.freqs.len());
        for &f in &self.freqs {
            let exact = periods * sample_rate / f;
            let window_len = lower(exact.round()) as usize;
            if window_len < min_window {
                return Err(Error::invalid(format!(
                    "sweep frequency {} Hz is too close to the Nyquist rate of {} Hz",
                    lower(f),
                    lower(sample_rate) / 2.0
                )));
            }
            if out.last().is_some_and(|prev| prev.window_len == window_len) {
                continue; // duplicate after snapping
            }
            let freq_hz = periods * sample_rate / fl::<T>(window_len as f64);
            out.push(SnappedFrequency { freq_hz, window_len });
        }
        Ok(out)
    }
}

/// Single-frequency correlation phasor of both dq channels, cos-referenced
/// to the start of `series`: `(2/N) * sum_k x(k) * exp(-j 2 pi f k dt)`.
///
/// The window must span an integer number (>= 1) of periods of `freq`,
/// otherwise the estimate would leak neighboring spectral content.
pub fn dft_phasor<T: Scalar>(series: &DqSeries<T>, freq: T) -> Result<Vector2<Complex<T>>> {
    if freq <= T::zero() {
        return Err(Error::invalid("phasor frequency must be positive"));
    }
    let n = series.len();
    let periods = lower(freq * fl::<T>(n as f64) * series.dt);
    let whole = periods.round();
    if whole < 1.0 || (periods - whole).abs() > 1e-6 {
        return Err(Error::Leakage(format!(
            "window holds {periods:.6} periods of {} Hz; need a whole number >= 1",
            lower(freq)
        )));
    }
    let two_over_n = fl::<T>(2.0 / n as f64);
    let step = T::two_pi() * freq * series.dt;
    let mut acc_d = Complex::new(T::zero(), T::zero());
    let mut acc_q = Complex::new(T::zero(), T::zero());
    for k in 0..n {
        let theta = step * fl::<T>(k as f64);
        let w = Complex::new(theta.cos(), -theta.sin());
        acc_d += w * Complex::new(series.d[k], T::zero());
        acc_q += w * Complex::new(series.q[k], T::zero());
    }
    Ok(Vector2::new(
        acc_d * Complex::new(two_over_n, T::zero()),
        acc_q * Complex::new(two_over_n, T::zero()),
    ))
}

/// Exact 2-norm condition number of a complex 2x2 matrix (via the singular
/// values of the Gram matrix); infinite for singular input.
fn condition_2x2<T: Scalar>(m: &Matrix2<Complex<T>>) -> f64 {
    let mut trace = 0.0;
    for e in m.iter() {
        trace += lower(e.norm_sqr());
    }
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let det_sq = lower(det.norm_sqr());
    let disc = (trace * trace - 4.0 * det_sq).max(0.0).sqrt();
    let smax_sq = 0.5 * (trace + disc);
    let smin_sq = 0.5 * (trace - disc);
    if smin_sq <= 0.0 {
        return f64::INFINITY;
    }
    (smax_sq / smin_sq).sqrt()
}

fn invert_2x2<T: Scalar>(m: &Matrix2<Complex<T>>) -> Matrix2<Complex<T>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Matrix2::new(m[(1, 1)] / det, -m[(0, 1)] / det, -m[(1, 0)] / det, m[(0, 0)] / det)
}

struct SweepPoint<T: Scalar> {
    freq_hz: T,
    z: Matrix2<Complex<T>>,
    samples: u64,
    seconds: f64,
    current_energy: f64,
    voltage_energy: f64,
}

/// Runs the pointwise sweep: for every snapped plan frequency, executes one
/// d-axis and one q-axis injection through `runner` and solves the 2x2
/// phasor system. Per-frequency experiments run in parallel; the result
/// order is fixed by the plan, so the output is deterministic.
///
/// `runner(freq_hz, axis)` must return the measured small-signal voltage and
/// current records (post-excitation-onset span only, offset removed) at
/// `sample_rate`; the last `window_len` samples form the phasor window, so
/// the record must be at least `settle_time` longer than the window.
pub fn frequency_sweep_identify<T, F>(
    plan: &SweepPlan<T>,
    sample_rate: T,
    runner: F,
) -> Result<FrequencyResponse<T>>
where
    T: Scalar + Send + Sync,
    F: Fn(T, InjectionAxis) -> Result<(DqSeries<T>, DqSeries<T>)> + Sync,
{
    let points = plan.snapped(sample_rate)?;
    let settle_samples = lower((plan.settle_time * sample_rate).round()) as usize;
    let results: Vec<Result<SweepPoint<T>>> = points
        .par_iter()
        .map(|pt| {
            let mut i_cols = [Vector2::zeros(); 2];
            let mut v_cols = [Vector2::zeros(); 2];
            let mut samples = 0u64;
            let mut seconds = 0.0f64;
            let mut current_energy = 0.0f64;
            let mut voltage_energy = 0.0f64;
            for (slot, axis) in [InjectionAxis::Direct, InjectionAxis::Quadrature]
                .into_iter()
                .enumerate()
            {
                let (v, i) = runner(pt.freq_hz, axis)?;
                for series in [&v, &i] {
                    if !series.is_small_signal {
                        return Err(Error::invalid(
                            "sweep records must be small-signal (offset removed)",
                        ));
                    }
                    let rel = (series.sample_rate() - sample_rate).abs() / sample_rate;
                    if rel > fl::<T>(1e-9) {
                        return Err(Error::invalid("sweep record sample rate mismatch"));
                    }
                }
                if v.len() != i.len() {
                    return Err(Error::invalid("voltage/current record length mismatch"));
                }
                if v.len() < pt.window_len + settle_samples {
                    return Err(Error::invalid(format!(
                        "sweep record at {} Hz too short: {} samples for settle {} + window {}",
                        lower(pt.freq_hz),
                        v.len(),
                        settle_samples,
                        pt.window_len
                    )));
                }
                let window = v.len() - pt.window_len..v.len();
                v_cols[slot] = dft_phasor(&v.slice(window.clone())?, pt.freq_hz)?;
                i_cols[slot] = dft_phasor(&i.slice(window)?, pt.freq_hz)?;
                samples += v.len() as u64;
                seconds += v.len() as f64 / lower(sample_rate);
                for k in 0..i.len() {
                    current_energy += lower(i.d[k] * i.d[k] + i.q[k] * i.q[k]);
                    voltage_energy += lower(v.d[k] * v.d[k] + v.q[k] * v.q[k]);
                }
            }
            let i_mat = Matrix2::from_columns(&i_cols);
            let v_mat = Matrix2::from_columns(&v_cols);
            let condition = condition_2x2(&i_mat);
            if !condition.is_finite() || condition > 1e6 {
                return Err(Error::InsufficientExcitation {
                    freq_hz: lower(pt.freq_hz),
                    condition,
                });
            }
            Ok(SweepPoint {
                freq_hz: pt.freq_hz,
                z: v_mat * invert_2x2(&i_mat),
                samples,
                seconds,
                current_energy,
                voltage_energy,
            })
        })
        .collect();

    let mut freqs = Vec::with_capacity(points.len());
    let mut z = Vec::with_capacity(points.len());
    let mut meta = ExperimentMetadata {
        experiment_cycles: 2 * points.len() as u32,
        excitation_time_s: 0.0,
        data_points: 0,
        current_energy: 0.0,
        voltage_energy: 0.0,
    };
    for result in results {
        let point = result?;
        freqs.push(point.freq_hz);
        z.push(point.z);
        meta.excitation_time_s += point.seconds;
        meta.data_points += 4 * point.samples;
        meta.current_energy += point.current_energy;
        meta.voltage_energy += point.voltage_energy;
    }
    Ok(FrequencyResponse::new(freqs, z, ResponseSource::Sweep)?.with_metadata(meta))
}

/// Segment-averaging settings for the wideband estimator: Hann-windowed
/// segments with 50 percent overlap (Welch's method).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WelchSpec {
    /// Number of averaged segments (>= 1).
    pub segments: usize,
}

impl Default for WelchSpec {
    fn default() -> Self {
        Self { segments: 8 }
    }
}

/// Per-record spectral summary: averaged cross-spectra of the four measured
/// channels against the record's own reference current channel.
struct RecordSpectra {
    /// Bin cross-spectra indexed `[channel][bin]`, channels = vd, vq, id, iq.
    cross: [Vec<Complex<f64>>; 4],
    segment_len: usize,
}

fn record_spectra<T: Scalar>(
    rec: &MeasurementRecord<T>,
    spec: &WelchSpec,
    planner: &mut FftPlanner<f64>,
) -> Result<(RecordSpectra, DqSeries<T>, DqSeries<T>)> {
    let onset = rec.excitation_meta.onset_sample;
    if onset == 0 {
        return Err(Error::invalid(
            "wideband records need a pre-excitation lead-in to reference the offset",
        ));
    }
    let (v, i) = small_signal_dq(rec, 0..onset)?;
    let span = onset..onset + rec.excitation_meta.excitation_samples;
    if span.end > v.len() {
        return Err(Error::invalid("excitation span exceeds the record length"));
    }
    let v = v.slice(span.clone())?;
    let i = i.slice(span)?;
    let n = v.len();

    let segment_len = 2 * (n / (spec.segments + 1));
    if segment_len < 8 {
        return Err(Error::invalid(format!(
            "record too short for {} averaged segments ({} excited samples)",
            spec.segments, n
        )));
    }
    let hop = segment_len / 2;

    // Reference channel: the dominant-energy measured current axis.
    let energy = |x: &[T]| x.iter().fold(0.0, |acc, v| acc + lower(*v) * lower(*v));
    let ref_is_d = energy(&i.d) >= energy(&i.q);

    let window: Vec<f64> = (0..segment_len)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / segment_len as f64).cos()))
        .collect();
    let fft = planner.plan_fft_forward(segment_len);
    let n_bins = segment_len / 2;
    let mut cross: [Vec<Complex<f64>>; 4] = std::array::from_fn(|_| vec![Complex::new(0.0, 0.0); n_bins]);
    let channels: [&[T]; 4] = [&v.d, &v.q, &i.d, &i.q];
    let ref_idx = if ref_is_d { 2 } else { 3 };
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    let mut spectra: [Vec<Complex<f64>>; 4] = std::array::from_fn(|_| vec![Complex::new(0.0, 0.0); n_bins]);
    for s in 0..spec.segments {
        let start = s * hop;
        for (c, data) in channels.iter().enumerate() {
            for k in 0..segment_len {
                buf[k] = Complex::new(window[k] * lower(data[start + k]), 0.0);
            }
            fft.process(&mut buf);
            spectra[c][..n_bins].copy_from_slice(&buf[..n_bins]);
        }
        for c in 0..4 {
            for b in 0..n_bins {
                cross[c][b] += spectra[c][b] * spectra[ref_idx][b].conj();
            }
        }
    }
    Ok((RecordSpectra { cross, segment_len }, v, i))
}

/// Wideband two-experiment identification: both records are preprocessed to
/// small-signal dq, Welch cross-spectra are formed against each record's
/// dominant current channel, and each retained frequency bin solves
/// `Z = [V1 V2] [I1 I2]^-1`. Bins whose current matrix has condition number
/// above 1e6 are dropped (as are DC and Nyquist), so the result may be
/// empty when the two excitations are not independent.
pub fn wideband_fft_identify<T: Scalar>(
    rec1: &MeasurementRecord<T>,
    rec2: &MeasurementRecord<T>,
    spec: &WelchSpec,
) -> Result<FrequencyResponse<T>> {
    if spec.segments == 0 {
        return Err(Error::invalid("need at least one averaging segment"));
    }
    let fs = rec1.sample_rate;
    if (lower(rec2.sample_rate) - lower(fs)).abs() > 1e-9 * lower(fs) {
        return Err(Error::invalid("records have different sample rates"));
    }
    if rec1.excitation_meta.excitation_samples != rec2.excitation_meta.excitation_samples {
        return Err(Error::invalid("records have different excitation lengths"));
    }
    let mut planner = FftPlanner::new();
    let (s1, v1, i1) = record_spectra(rec1, spec, &mut planner)?;
    let (s2, v2, i2) = record_spectra(rec2, spec, &mut planner)?;
    debug_assert_eq!(s1.segment_len, s2.segment_len);

    let segment_len = s1.segment_len;
    let n_bins = segment_len / 2;
    let mut freqs = Vec::new();
    let mut z = Vec::new();
    for b in 1..n_bins {
        let i_mat = Matrix2::new(s1.cross[2][b], s2.cross[2][b], s1.cross[3][b], s2.cross[3][b]);
        let condition = condition_2x2::<f64>(&i_mat);
        if !condition.is_finite() || condition > 1e6 {
            continue;
        }
        let v_mat = Matrix2::new(s1.cross[0][b], s2.cross[0][b], s1.cross[1][b], s2.cross[1][b]);
        let z_f64 = v_mat * invert_2x2(&i_mat);
        freqs.push(fs * fl::<T>(b as f64 / segment_len as f64));
        z.push(Matrix2::from_fn(|r, c| {
            Complex::new(fl::<T>(z_f64[(r, c)].re), fl::<T>(z_f64[(r, c)].im))
        }));
    }

    let mut meta = ExperimentMetadata {
        experiment_cycles: 2,
        excitation_time_s: 0.0,
        data_points: 0,
        current_energy: 0.0,
        voltage_energy: 0.0,
    };
    for (v, i) in [(&v1, &i1), (&v2, &i2)] {
        meta.excitation_time_s += v.len() as f64 / lower(fs);
        meta.data_points += 4 * v.len() as u64;
        for k in 0..i.len() {
            meta.current_energy += lower(i.d[k] * i.d[k] + i.q[k] * i.q[k]);
            meta.voltage_energy += lower(v.d[k] * v.d[k] + v.q[k] * v.q[k]);
        }
    }
    Ok(FrequencyResponse::new(freqs, z, ResponseSource::Wideband)?.with_metadata(meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridsim::{
        simulate_experiment, ExcitationMeta, GridModel, NoiseConfig, OperatingPoint, SteadyState,
    };
    use crate::signals::{generate_rbs, generate_sine, inverse_park, ExcitationSignal};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const OMEGA_G: f64 = 100.0 * PI;

    fn tone_series(n: usize, fs: f64, build: impl Fn(usize) -> (f64, f64)) -> DqSeries<f64> {
        let (d, q): (Vec<f64>, Vec<f64>) = (0..n).map(build).unzip();
        let mut s = DqSeries::new(0.0, 1.0 / fs, d, q, OMEGA_G, "test").unwrap();
        s.is_small_signal = true;
        s
    }

    #[test]
    fn cosine_has_unit_phasor() {
        let fs = 1000.0;
        let f = 50.0;
        let s = tone_series(400, fs, |k| ((2.0 * PI * f * k as f64 / fs).cos(), 0.0));
        let p = dft_phasor(&s, f).unwrap();
        assert!((p[0] - Complex::new(1.0, 0.0)).norm() <= 1e-12);
        assert!(p[1].norm() <= 1e-12);
    }

    #[test]
    fn sine_has_minus_j_phasor() {
        let fs = 1000.0;
        let f = 50.0;
        let s = tone_series(400, fs, |k| (0.0, (2.0 * PI * f * k as f64 / fs).sin()));
        let p = dft_phasor(&s, f).unwrap();
        assert!((p[1] - Complex::new(0.0, -1.0)).norm() <= 1e-12);
    }

    #[test]
    fn non_integer_period_window_is_rejected() {
        let fs = 1000.0;
        let s = tone_series(400, fs, |k| ((2.0 * PI * 50.0 * k as f64 / fs).cos(), 0.0));
        assert!(matches!(dft_phasor(&s, 51.3), Err(Error::Leakage(_))));
        assert!(matches!(dft_phasor(&s, 1.0), Err(Error::Leakage(_)))); // 0.4 periods
    }

    #[test]
    fn phasor_is_linear_in_the_signal() {
        let fs = 1000.0;
        let f = 25.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut noise = || rng.gen_range(-1.0..1.0);
        let xa: Vec<(f64, f64)> = (0..800).map(|_| (noise(), noise())).collect();
        let xb: Vec<(f64, f64)> = (0..800).map(|_| (noise(), noise())).collect();
        let sa = tone_series(800, fs, |k| xa[k]);
        let sb = tone_series(800, fs, |k| xb[k]);
        let combo = tone_series(800, fs, |k| {
            (2.0 * xa[k].0 - 0.5 * xb[k].0, 2.0 * xa[k].1 - 0.5 * xb[k].1)
        });
        let pa = dft_phasor(&sa, f).unwrap();
        let pb = dft_phasor(&sb, f).unwrap();
        let pc = dft_phasor(&combo, f).unwrap();
        for ch in 0..2 {
            let expect = pa[ch] * Complex::new(2.0, 0.0) - pb[ch] * Complex::new(0.5, 0.0);
            assert!((pc[ch] - expect).norm() <= 1e-12);
        }
    }

    #[test]
    fn white_noise_phasor_concentrates_at_the_monte_carlo_rate() {
        let fs = 1000.0;
        let f = 50.0;
        let n = 1000;
        let sigma = 1.0;
        let bound = 5.0 * sigma / (n as f64).sqrt();
        let mut ok = 0;
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            use rand_distr::{Distribution, Normal};
            let normal = Normal::new(0.0, sigma).unwrap();
            let samples: Vec<(f64, f64)> =
                (0..n).map(|_| (normal.sample(&mut rng), normal.sample(&mut rng))).collect();
            let s = tone_series(n, fs, |k| samples[k]);
            let p = dft_phasor(&s, f).unwrap();
            if p[0].norm() <= bound && p[1].norm() <= bound {
                ok += 1;
            }
        }
        assert!(ok >= 195, "only {ok}/200 trials inside the 5 sigma/sqrt(N) bound");
    }

    #[test]
    fn snapping_lands_on_exact_period_counts_and_dedupes() {
        let plan =
            SweepPlan::new(vec![10.3, 10.300001, 100.0, 480.0], 0.1, 0.5, 8).unwrap();
        let pts = plan.snapped(5000.0).unwrap();
        assert_eq!(pts.len(), 3, "near-identical frequencies must merge");
        for pt in &pts {
            let periods = pt.freq_hz * pt.window_len as f64 / 5000.0;
            assert_relative_eq!(periods, 8.0, epsilon = 1e-9);
        }
        assert!(pts.windows(2).all(|w| w[0].freq_hz < w[1].freq_hz));
        // Too close to Nyquist for the window to hold 8 whole periods.
        let plan = SweepPlan::new(vec![2450.0], 0.1, 0.5, 8).unwrap();
        assert!(plan.snapped(5000.0).is_err());
    }

    /// Closed-form dq impedance of a series RL branch in a rotating frame.
    fn rl_impedance(r: f64, l: f64, f_hz: f64) -> Matrix2<Complex<f64>> {
        let s = Complex::new(0.0, 2.0 * PI * f_hz);
        let zs = Complex::new(r, 0.0) + s * l;
        let coupling = Complex::new(OMEGA_G * l, 0.0);
        Matrix2::new(zs, -coupling, coupling, zs)
    }

    /// Runner that synthesizes exact steady-state sinusoids through a known
    /// impedance, bypassing any simulation dynamics.
    fn ideal_rl_runner(
        r: f64,
        l: f64,
        fs: f64,
        amplitude: f64,
        n_samples: usize,
    ) -> impl Fn(f64, InjectionAxis) -> Result<(DqSeries<f64>, DqSeries<f64>)> + Sync {
        move |f, axis| {
            let z = rl_impedance(r, l, f);
            let i_phasor = match axis {
                InjectionAxis::Direct => Vector2::new(Complex::new(amplitude, 0.0), Complex::new(0.0, 0.0)),
                InjectionAxis::Quadrature => Vector2::new(Complex::new(0.0, 0.0), Complex::new(amplitude, 0.0)),
            };
            let v_phasor = z * i_phasor;
            let wave = |p: &Vector2<Complex<f64>>, k: usize| {
                let rot = Complex::from_polar(1.0, 2.0 * PI * f * k as f64 / fs);
                ((p[0] * rot).re, (p[1] * rot).re)
            };
            let i = tone_series(n_samples, fs, |k| wave(&i_phasor, k));
            let v = tone_series(n_samples, fs, |k| wave(&v_phasor, k));
            Ok((v, i))
        }
    }

    #[test]
    fn sweep_recovers_a_known_impedance_from_ideal_records() {
        let fs = 5000.0;
        let (r, l) = (0.2, 5e-4);
        let plan = SweepPlan::new(vec![5.0, 20.0, 80.0, 320.0, 990.0], 0.1, 0.2, 8).unwrap();
        let runner = ideal_rl_runner(r, l, fs, 0.1, 12_000);
        let resp = frequency_sweep_identify(&plan, fs, runner).unwrap();
        assert_eq!(resp.len(), 5);
        for (f, z_hat) in resp.freqs_hz.iter().zip(&resp.z) {
            let z_true = rl_impedance(r, l, *f);
            for idx in 0..4 {
                let err = (z_hat[idx] - z_true[idx]).norm() / z_true[idx].norm();
                assert!(err <= 1e-6, "entry {idx} at {f} Hz off by {err:.2e}");
            }
        }
        let meta = resp.metadata.as_ref().unwrap();
        assert_eq!(meta.experiment_cycles, 10);
        assert_eq!(meta.data_points, 10 * 12_000 * 4);
        assert_relative_eq!(meta.excitation_time_s, 10.0 * 12_000.0 / fs, epsilon = 1e-9);
        // Each cycle injects one unit-energy axis: N * a^2 per cycle.
        assert_relative_eq!(
            meta.current_energy,
            10.0 * 12_000.0 * 0.1 * 0.1 * 0.5,
            max_relative = 1e-6
        );
    }

    #[test]
    fn sweep_on_a_simulated_rl_grid_matches_the_closed_form() {
        let fs = 250_000.0;
        let (r, l) = (0.2, 5e-4);
        let grid = GridModel::rl_degenerate(r, l, OMEGA_G, 1e-3).unwrap();
        let plan = SweepPlan::new(vec![5.0, 50.0, 500.0], 0.05, 0.1, 8).unwrap();
        let runner = |f: f64, axis: InjectionAxis| {
            let n_window = (8.0 * fs / f).round() as usize;
            let n_exc = n_window + (0.1 * fs) as usize;
            let duration = n_exc as f64 / fs;
            let tone = generate_sine(f, 0.05, 0.0, n_exc, fs)?;
            let silent = ExcitationSignal::silent(n_exc, fs);
            let (exc_d, exc_q) = match axis {
                InjectionAxis::Direct => (tone, silent),
                InjectionAxis::Quadrature => (silent, tone),
            };
            let rec = simulate_experiment(
                &grid,
                &exc_d,
                &exc_q,
                duration,
                fs,
                1,
                &NoiseConfig::none(),
                &OperatingPoint::default(),
                0.02,
            )?;
            let onset = rec.excitation_meta.onset_sample;
            let (v, i) = small_signal_dq(&rec, 0..onset)?;
            Ok((v.slice(onset..v.len())?, i.slice(onset..i.len())?))
        };
        let resp = frequency_sweep_identify(&plan, fs, runner).unwrap();
        for (f, z_hat) in resp.freqs_hz.iter().zip(&resp.z) {
            let z_true = rl_impedance(r, l, *f);
            for idx in 0..4 {
                let err = (z_hat[idx] - z_true[idx]).norm() / z_true[idx].norm();
                assert!(err <= 0.01, "entry {idx} at {f} Hz off by {err:.2e}");
            }
        }
    }

    #[test]
    fn sweep_rejects_rank_deficient_injections() {
        let fs = 5000.0;
        // A broken runner that excites the d axis regardless of the request.
        let broken = ideal_rl_runner(0.2, 5e-4, fs, 0.1, 12_000);
        let runner =
            move |f: f64, _axis: InjectionAxis| broken(f, InjectionAxis::Direct);
        let plan = SweepPlan::new(vec![50.0], 0.1, 0.2, 8).unwrap();
        match frequency_sweep_identify(&plan, fs, runner) {
            Err(Error::InsufficientExcitation { freq_hz, condition }) => {
                assert!((freq_hz - 50.0).abs() < 0.1);
                assert!(condition > 1e6);
            }
            other => panic!("expected insufficient excitation, got {other:?}"),
        }
    }

    #[test]
    fn sweep_results_are_reproducible() {
        let fs = 5000.0;
        let plan = SweepPlan::new(vec![10.0, 100.0, 400.0], 0.1, 0.2, 8).unwrap();
        let runner = ideal_rl_runner(0.3, 2e-4, fs, 0.1, 12_000);
        let a = frequency_sweep_identify(&plan, fs, &runner).unwrap();
        let b = frequency_sweep_identify(&plan, fs, &runner).unwrap();
        assert_eq!(a.freqs_hz, b.freqs_hz);
        assert_eq!(a.z, b.z);
    }

    /// Builds a synthetic measurement record whose small-signal voltage is a
    /// frequency-flat matrix gain of the current: v_dq(k) = Z0 * i_dq(k).
    fn static_gain_record(
        z0: &Matrix2<f64>,
        seed_d: u64,
        seed_q: u64,
        fs: f64,
        onset: usize,
        n_exc: usize,
    ) -> MeasurementRecord<f64> {
        let exc_d = generate_rbs::<f64>(seed_d, n_exc, 0.1, fs).unwrap();
        let exc_q = generate_rbs::<f64>(seed_q, n_exc, 0.1, fs).unwrap();
        let n = onset + n_exc;
        let mut id = vec![0.0; n];
        let mut iq = vec![0.0; n];
        for k in 0..n_exc {
            id[onset + k] = exc_d.samples[k];
            iq[onset + k] = exc_q.samples[k];
        }
        let vd: Vec<f64> =
            (0..n).map(|k| z0[(0, 0)] * id[k] + z0[(0, 1)] * iq[k]).collect();
        let vq: Vec<f64> =
            (0..n).map(|k| z0[(1, 0)] * id[k] + z0[(1, 1)] * iq[k]).collect();
        let dt = 1.0 / fs;
        let i_dq = DqSeries::new(0.0, dt, id, iq, OMEGA_G, "i_pcc").unwrap();
        let v_dq = DqSeries::new(0.0, dt, vd, vq, OMEGA_G, "v_pcc").unwrap();
        MeasurementRecord {
            v_abc: inverse_park(&v_dq, 0.0).unwrap(),
            i_abc: inverse_park(&i_dq, 0.0).unwrap(),
            sample_rate: fs,
            noise_seed: 0,
            excitation_meta: ExcitationMeta {
                onset_sample: onset,
                excitation_samples: n_exc,
                d: (&exc_d).into(),
                q: (&exc_q).into(),
            },
            steady_state: SteadyState { i_d0: 0.0, i_q0: 0.0, v_d0: 0.0, v_q0: 0.0 },
            grid_freq_rad: OMEGA_G,
        }
    }

    #[test]
    fn wideband_recovers_a_static_gain_exactly() {
        let z0 = Matrix2::new(0.3, -0.1, 0.1, 0.3);
        let fs = 1000.0;
        let rec1 = static_gain_record(&z0, 11, 13, fs, 100, 4000);
        let rec2 = static_gain_record(&z0, 17, 19, fs, 100, 4000);
        let resp = wideband_fft_identify(&rec1, &rec2, &WelchSpec::default()).unwrap();
        let total_bins = (2 * (4000 / 9)) / 2 - 1;
        assert!(
            resp.len() * 10 >= total_bins * 9,
            "too many bins dropped: {} of {total_bins}",
            resp.len()
        );
        for (f, z_hat) in resp.freqs_hz.iter().zip(&resp.z) {
            for idx in 0..4 {
                let err = (z_hat[idx] - Complex::new(z0[idx], 0.0)).norm();
                assert!(err <= 1e-8, "entry {idx} at {f:.2} Hz off by {err:.2e}");
            }
        }
        let meta = resp.metadata.as_ref().unwrap();
        assert_eq!(meta.experiment_cycles, 2);
        assert_eq!(meta.data_points, 2 * 4000 * 4);
        assert_relative_eq!(meta.excitation_time_s, 8.0, epsilon = 1e-9);
    }

    #[test]
    fn wideband_is_invariant_under_swapping_the_records() {
        let z0 = Matrix2::new(0.3, -0.1, 0.1, 0.3);
        let fs = 1000.0;
        let rec1 = static_gain_record(&z0, 23, 29, fs, 100, 4000);
        let rec2 = static_gain_record(&z0, 31, 37, fs, 100, 4000);
        let fwd = wideband_fft_identify(&rec1, &rec2, &WelchSpec::default()).unwrap();
        let rev = wideband_fft_identify(&rec2, &rec1, &WelchSpec::default()).unwrap();
        assert_eq!(fwd.freqs_hz, rev.freqs_hz);
        for (a, b) in fwd.z.iter().zip(&rev.z) {
            for idx in 0..4 {
                assert!((a[idx] - b[idx]).norm() <= 1e-10 * (1.0 + a[idx].norm()));
            }
        }
    }

    #[test]
    fn identical_records_drop_every_bin() {
        let z0 = Matrix2::new(0.3, -0.1, 0.1, 0.3);
        let rec = static_gain_record(&z0, 41, 43, 1000.0, 100, 4000);
        let resp = wideband_fft_identify(&rec, &rec.clone(), &WelchSpec::default()).unwrap();
        assert!(resp.is_empty(), "rank-one excitation must yield no retained bins");
        assert_eq!(resp.metadata.as_ref().unwrap().experiment_cycles, 2);
    }

    #[test]
    fn wideband_rejects_mismatched_records() {
        let z0 = Matrix2::new(0.3, -0.1, 0.1, 0.3);
        let rec1 = static_gain_record(&z0, 11, 13, 1000.0, 100, 4000);
        let rec2 = static_gain_record(&z0, 17, 19, 2000.0, 100, 4000);
        assert!(matches!(
            wideband_fft_identify(&rec1, &rec2, &WelchSpec::default()),
            Err(Error::InvalidArgument(_))
        ));
        let rec3 = static_gain_record(&z0, 17, 19, 1000.0, 100, 2000);
        assert!(matches!(
            wideband_fft_identify(&rec1, &rec3, &WelchSpec::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
