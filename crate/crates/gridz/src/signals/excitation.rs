//! Excitation-signal generators: seeded random binary sequences for wideband
//! perturbation and sinusoids for pointwise frequency sweeps.

use crate::error::{Error, Result};
use crate::scalar::{fl, Scalar};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Kind of excitation waveform carried by an [`ExcitationSignal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationKind {
    /// Random binary sequence (seeded, two-level).
    Rbs,
    /// Pseudo-random binary sequence (LFSR-style; carried for data labeling).
    Prbs,
    /// Single-frequency sinusoid.
    Sine,
    /// Swept-frequency sinusoid (carried for data labeling).
    Chirp,
}

/// A generated per-unit excitation waveform plus the metadata needed to
/// reproduce it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationSignal<T: Scalar = f64> {
    /// Waveform samples, per-unit.
    pub samples: Vec<T>,
    /// Sample rate, Hz.
    pub sample_rate: T,
    /// Waveform family.
    pub kind: ExcitationKind,
    /// PRNG seed (0 for deterministic kinds).
    pub seed: u64,
    /// Peak amplitude in per-unit (two-level value for RBS).
    pub amplitude: T,
    /// Tone frequency for sinusoidal kinds, Hz.
    pub freq_hz: Option<T>,
    /// Initial phase for sinusoidal kinds, rad.
    pub phase: Option<T>,
}

impl<T: Scalar> ExcitationSignal<T> {
    /// An all-zero signal (represented as a zero-amplitude sine), used for
    /// the inactive axis of single-axis injections.
    pub fn silent(n: usize, sample_rate: T) -> Self {
        Self {
            samples: vec![T::zero(); n],
            sample_rate,
            kind: ExcitationKind::Sine,
            seed: 0,
            amplitude: T::zero(),
            freq_hz: None,
            phase: None,
        }
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the signal holds no samples.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Total energy sum(x^2), per-unit^2 * samples.
    pub fn energy(&self) -> T {
        self.samples.iter().fold(T::zero(), |acc, &x| acc + x * x)
    }
}

/// Generates a seeded random binary sequence taking values {-amplitude,
/// +amplitude} with independent equal probability per sample.
///
/// The same `(seed, n, amplitude, sample_rate)` always yields bit-identical
/// samples (ChaCha8 keystream; one draw per sample).
pub fn generate_rbs<T: Scalar>(
    seed: u64,
    n: usize,
    amplitude: T,
    sample_rate: T,
) -> Result<ExcitationSignal<T>> {
    if n == 0 {
        return Err(Error::invalid("RBS length must be at least 1"));
    }
    if amplitude <= T::zero() {
        return Err(Error::invalid("RBS amplitude must be positive"));
    }
    if sample_rate <= T::zero() {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| if rng.next_u32() >> 31 == 1 { amplitude } else { -amplitude })
        .collect();
    Ok(ExcitationSignal {
        samples,
        sample_rate,
        kind: ExcitationKind::Rbs,
        seed,
        amplitude,
        freq_hz: None,
        phase: None,
    })
}

/// Generates a sinusoid `amplitude * sin(2 pi freq k / sample_rate + phase)`.
///
/// `freq` must lie strictly inside (0, Nyquist). A zero amplitude is allowed
/// (silent signal).
pub fn generate_sine<T: Scalar>(
    freq: T,
    amplitude: T,
    phase: T,
    n: usize,
    sample_rate: T,
) -> Result<ExcitationSignal<T>> {
    if n == 0 {
        return Err(Error::invalid("sine length must be at least 1"));
    }
    if sample_rate <= T::zero() {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let nyquist = sample_rate / fl::<T>(2.0);
    if freq <= T::zero() || freq >= nyquist {
        return Err(Error::invalid(format!(
            "sine frequency must lie in (0, {} Hz) exclusive",
            crate::scalar::lower(nyquist)
        )));
    }
    let w = fl::<T>(2.0 * std::f64::consts::PI) * freq / sample_rate;
    let samples = (0..n).map(|k| amplitude * (w * fl::<T>(k as f64) + phase).sin()).collect();
    Ok(ExcitationSignal {
        samples,
        sample_rate,
        kind: ExcitationKind::Sine,
        seed: 0,
        amplitude,
        freq_hz: Some(freq),
        phase: Some(phase),
    })
}
