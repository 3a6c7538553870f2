//! Frequency-response containers: the common 2x2 impedance-versus-frequency
//! result type shared by the analytic reference, the parametric models, and
//! the nonparametric estimators, plus CSV interchange.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{fl, lower, Scalar};
use crate::ss::{ContinuousStateSpace, DiscreteStateSpace};
use nalgebra::{Complex, Matrix2};

/// Which estimator produced a response curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSource {
    /// Ground truth evaluated from the reference circuit model.
    Analytic,
    /// Parametric ARX least-squares model.
    Arx,
    /// Parametric subspace state-space model.
    Subspace,
    /// Nonparametric pointwise frequency sweep.
    Sweep,
    /// Nonparametric two-experiment wideband FFT estimate.
    Wideband,
}

/// Experiment bookkeeping attached to a response: how much excitation the
/// producing method consumed. Used by the method-comparison report.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentMetadata {
    /// Number of distinct excitation experiments ("measurement cycles").
    pub experiment_cycles: u32,
    /// Total simulated excitation time across all cycles, seconds.
    pub excitation_time_s: f64,
    /// Total recorded data points (samples x recorded dq channels).
    pub data_points: u64,
    /// Injected small-signal current energy, per-unit^2 * samples.
    pub current_energy: f64,
    /// Measured small-signal voltage energy, per-unit^2 * samples.
    pub voltage_energy: f64,
}

/// A sampled 2x2 impedance curve Z(j2*pi*f) over an ascending frequency grid.
///
/// Entry convention: rows are (d, q) voltage components, columns are (d, q)
/// current components, i.e. `z[k][(0, 1)]` is the dq coupling term at
/// `freqs_hz[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse<T: Scalar = f64> {
    /// Evaluation frequencies, Hz, strictly ascending and positive.
    pub freqs_hz: Vec<T>,
    /// One complex 2x2 impedance matrix per frequency.
    pub z: Vec<Matrix2<Complex<T>>>,
    /// Producing estimator.
    pub source: ResponseSource,
    /// Optional experiment bookkeeping (None for analytic curves).
    pub metadata: Option<ExperimentMetadata>,
}

impl<T: Scalar> FrequencyResponse<T> {
    /// Validated constructor: grids must be strictly ascending, positive,
    /// and matched in length with the matrix list. An empty grid is allowed
    /// (an estimator may legitimately retain no frequency point).
    pub fn new(
        freqs_hz: Vec<T>,
        z: Vec<Matrix2<Complex<T>>>,
        source: ResponseSource,
    ) -> Result<Self> {
        if freqs_hz.len() != z.len() {
            return Err(Error::invalid(format!(
                "{} frequencies but {} matrices",
                freqs_hz.len(),
                z.len()
            )));
        }
        if freqs_hz.first().is_some_and(|f| *f <= T::zero()) {
            return Err(Error::invalid("frequencies must be positive"));
        }
        if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("frequency grid must be strictly ascending"));
        }
        Ok(Self { freqs_hz, z, source, metadata: None })
    }

    /// Attaches experiment bookkeeping.
    pub fn with_metadata(mut self, metadata: ExperimentMetadata) -> Self {
        self.metadata = Some(metadata);
        self
    }

    /// Number of frequency points.
    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    /// True when the curve holds no points.
    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    /// Restricts the curve to `lo_hz <= f <= hi_hz` (inclusive band edges).
    pub fn restrict_band(&self, lo_hz: T, hi_hz: T) -> Result<Self> {
        if lo_hz > hi_hz {
            return Err(Error::invalid("band edges out of order"));
        }
        let mut freqs = Vec::new();
        let mut z = Vec::new();
        for (f, m) in self.freqs_hz.iter().zip(&self.z) {
            if *f >= lo_hz && *f <= hi_hz {
                freqs.push(*f);
                z.push(*m);
            }
        }
        if freqs.is_empty() {
            return Err(Error::invalid("no frequency points inside the requested band"));
        }
        Ok(Self { freqs_hz: freqs, z, source: self.source, metadata: self.metadata })
    }

    /// Serializes as CSV with one row per frequency:
    /// `f_hz,re_dd,im_dd,re_dq,im_dq,re_qd,im_qd,re_qq,im_qq`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("f_hz,re_dd,im_dd,re_dq,im_dq,re_qd,im_qd,re_qq,im_qq\n");
        for (f, m) in self.freqs_hz.iter().zip(&self.z) {
            let cells = [
                lower(*f),
                lower(m[(0, 0)].re),
                lower(m[(0, 0)].im),
                lower(m[(0, 1)].re),
                lower(m[(0, 1)].im),
                lower(m[(1, 0)].re),
                lower(m[(1, 0)].im),
                lower(m[(1, 1)].re),
                lower(m[(1, 1)].im),
            ];
            let row: Vec<String> = cells.iter().map(|x| format!("{x}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes the CSV serialization to a file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    /// Parses a curve from the CSV format of [`Self::to_csv_string`]. The
    /// source tag is supplied by the caller (it is not stored in the CSV).
    pub fn read_csv(path: &Path, source: ResponseSource) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text, source)
    }

    /// Parses a curve from CSV text.
    pub fn from_csv_str(text: &str, source: ResponseSource) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let expected = "f_hz,re_dd,im_dd,re_dq,im_dq,re_qd,im_qd,re_qq,im_qq";
        if header.trim() != expected {
            return Err(Error::Parse(format!(
                "unexpected header {header:?}, expected {expected:?}"
            )));
        }
        let mut freqs = Vec::new();
        let mut z = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(Error::Parse(format!(
                    "row {}: expected 9 fields, found {}",
                    i + 2,
                    fields.len()
                )));
            }
            let mut vals = [0.0f64; 9];
            for (j, s) in fields.iter().enumerate() {
                vals[j] = s.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("row {}, field {}: {e}", i + 2, j + 1))
                })?;
            }
            freqs.push(fl::<T>(vals[0]));
            z.push(Matrix2::new(
                Complex::new(fl::<T>(vals[1]), fl::<T>(vals[2])),
                Complex::new(fl::<T>(vals[3]), fl::<T>(vals[4])),
                Complex::new(fl::<T>(vals[5]), fl::<T>(vals[6])),
                Complex::new(fl::<T>(vals[7]), fl::<T>(vals[8])),
            ));
        }
        Self::new(freqs, z, source)
    }
}

/// Anything that can evaluate its 2x2 impedance at a physical frequency.
pub trait TransferModel<T: Scalar> {
    /// Z(j 2 pi f) as a complex 2x2 matrix.
    fn impedance_at(&self, f_hz: T) -> Result<Matrix2<Complex<T>>>;
}

fn to_matrix2<T: Scalar>(m: nalgebra::DMatrix<Complex<T>>) -> Result<Matrix2<Complex<T>>> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(Error::invalid(format!(
            "expected a 2x2 transfer matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]))
}

impl<T: Scalar> TransferModel<T> for ContinuousStateSpace<T> {
    fn impedance_at(&self, f_hz: T) -> Result<Matrix2<Complex<T>>> {
        let s = Complex::new(T::zero(), T::two_pi() * f_hz);
        to_matrix2(self.transfer_at(s)?)
    }
}

impl<T: Scalar> TransferModel<T> for DiscreteStateSpace<T> {
    fn impedance_at(&self, f_hz: T) -> Result<Matrix2<Complex<T>>> {
        let nyquist = fl::<T>(0.5) / self.dt;
        if f_hz >= nyquist {
            return Err(Error::invalid(format!(
                "frequency {} Hz is at or above the Nyquist rate {} Hz",
                lower(f_hz),
                lower(nyquist)
            )));
        }
        let theta = T::two_pi() * f_hz * self.dt;
        let z = Complex::new(theta.cos(), theta.sin());
        to_matrix2(self.transfer_at(z)?)
    }
}

/// Samples any [`TransferModel`] over a frequency grid.
pub fn frequency_response<T: Scalar, M: TransferModel<T>>(
    model: &M,
    freqs_hz: &[T],
    source: ResponseSource,
) -> Result<FrequencyResponse<T>> {
    let mut z = Vec::with_capacity(freqs_hz.len());
    for &f in freqs_hz {
        if f <= T::zero() {
            return Err(Error::invalid("frequencies must be positive"));
        }
        z.push(model.impedance_at(f)?);
    }
    FrequencyResponse::new(freqs_hz.to_vec(), z, source)
}

/// Logarithmically spaced frequency grid from `lo_hz` to `hi_hz` inclusive.
pub fn log_grid<T: Scalar>(lo_hz: T, hi_hz: T, points: usize) -> Result<Vec<T>> {
    if lo_hz <= T::zero() || hi_hz <= lo_hz {
        return Err(Error::invalid("need 0 < lo < hi for a log grid"));
    }
    if points < 2 {
        return Err(Error::invalid("need at least 2 grid points"));
    }
    let l0 = lo_hz.ln();
    let l1 = hi_hz.ln();
    let step = (l1 - l0) / fl::<T>((points - 1) as f64);
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                hi_hz
            } else {
                (l0 + step * fl::<T>(i as f64)).exp()
            }
        })
        .collect())
}
