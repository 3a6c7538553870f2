//! Accuracy and efficiency metrics for comparing identification methods.
//!
//! The headline numbers are Bode-curve errors: the magnitude metric compares
//! `|Z|` curves (relative error, averaged across in-band frequencies and
//! matrix entries, then expressed in dB) and the phase metric averages the
//! wrapped angular difference. Efficiency counters (cycles, samples, signal
//! energies) ride along in [`ExperimentMetadata`] and are assembled into a
//! per-method comparison table.

use crate::error::{Error, Result};
use crate::freq::{frequency_response, FrequencyResponse, ResponseSource, TransferModel};
use crate::scalar::{fl, lower, Scalar};
use crate::signals::DqSeries;
use serde::{Deserialize, Serialize};

/// Reported floor for vanishing magnitude error (instead of minus infinity).
pub const MAG_ERROR_FLOOR_DB: f64 = -200.0;

/// Threshold below which a truth entry is considered zero and excluded.
const TRUTH_MAGNITUDE_CUTOFF: f64 = 1e-9;

/// Average Bode-curve deviation of `est` from `truth` over `band` (Hz,
/// inclusive): `(avg_mag_error_db, avg_phase_error_deg)`.
///
/// Both responses are restricted to the band and must then share the same
/// frequency grid. Per frequency and matrix entry, the magnitude error is
/// `||Z_hat| - |Z|| / |Z|` and the phase error is the absolute angular
/// difference wrapped to (-180, 180] degrees; entries whose true magnitude
/// is below 1e-9 are excluded from both averages. The magnitude average is
/// reported as `20 log10(mean)`, floored at -200 dB.
pub fn bode_errors<T: Scalar>(
    est: &FrequencyResponse<T>,
    truth: &FrequencyResponse<T>,
    band: (T, T),
) -> Result<(T, T)> {
    let est = est.restrict_band(band.0, band.1)?;
    let truth = truth.restrict_band(band.0, band.1)?;
    if est.len() != truth.len() {
        return Err(Error::invalid(format!(
            "estimate and truth grids differ in the band: {} vs {} points",
            est.len(),
            truth.len()
        )));
    }
    for (a, b) in est.freqs_hz.iter().zip(&truth.freqs_hz) {
        if (lower(*a) - lower(*b)).abs() > 1e-9 * lower(*b) {
            return Err(Error::invalid(
                "estimate and truth must be evaluated on the same frequency grid",
            ));
        }
    }
    let mut mag_sum = 0.0f64;
    let mut phase_sum = 0.0f64;
    let mut count = 0usize;
    for (z_hat, z) in est.z.iter().zip(&truth.z) {
        for idx in 0..4 {
            let mag_true = lower(z[idx].norm_sqr()).sqrt();
            if mag_true < TRUTH_MAGNITUDE_CUTOFF {
                continue;
            }
            let mag_est = lower(z_hat[idx].norm_sqr()).sqrt();
            mag_sum += (mag_est - mag_true).abs() / mag_true;
            let arg_est = lower(z_hat[idx].im).atan2(lower(z_hat[idx].re));
            let arg_true = lower(z[idx].im).atan2(lower(z[idx].re));
            let mut delta = (arg_est - arg_true).to_degrees();
            while delta > 180.0 {
                delta -= 360.0;
            }
            while delta <= -180.0 {
                delta += 360.0;
            }
            phase_sum += delta.abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid(
            "no comparable entries: the truth response is zero across the band",
        ));
    }
    let mag_mean = mag_sum / count as f64;
    let mag_db = if mag_mean > 0.0 {
        (20.0 * mag_mean.log10()).max(MAG_ERROR_FLOOR_DB)
    } else {
        MAG_ERROR_FLOOR_DB
    };
    Ok((fl::<T>(mag_db), fl::<T>(phase_sum / count as f64)))
}

/// Total small-signal energy of a dq record: `sum_k d(k)^2 + q(k)^2`
/// (p.u.^2 * samples).
pub fn signal_energy<T: Scalar>(dq: &DqSeries<T>) -> Result<T> {
    if !dq.is_small_signal {
        return Err(Error::invalid(
            "energy is defined on small-signal records; remove the offset first",
        ));
    }
    let mut acc = T::zero();
    for k in 0..dq.len() {
        acc += dq.d[k] * dq.d[k] + dq.q[k] * dq.q[k];
    }
    Ok(acc)
}

/// Per-channel NRMSE fit of a simulated response against a measurement:
/// `100 * (1 - ||y - y_hat|| / ||y - mean(y)||)`, returned as `(d, q)`
/// percentages (100 = perfect, 0 = no better than the mean).
pub fn fit_percent<T: Scalar>(
    measured: &DqSeries<T>,
    simulated: &DqSeries<T>,
) -> Result<(T, T)> {
    if measured.len() != simulated.len() {
        return Err(Error::invalid("records must have equal length"));
    }
    let rel_dt = (lower(measured.dt) - lower(simulated.dt)).abs() / lower(measured.dt);
    if rel_dt > 1e-9 {
        return Err(Error::invalid("records must share the sample interval"));
    }
    let channel = |y: &[T], y_hat: &[T]| -> Result<T> {
        let n = fl::<T>(y.len() as f64);
        let mean = y.iter().fold(T::zero(), |acc, v| acc + *v) / n;
        let mut num = T::zero();
        let mut den = T::zero();
        for (a, b) in y.iter().zip(y_hat) {
            num += (*a - *b) * (*a - *b);
            den += (*a - mean) * (*a - mean);
        }
        if den == T::zero() {
            return Err(Error::UndefinedFit(
                "measured channel is constant; NRMSE fit is undefined".into(),
            ));
        }
        Ok(fl::<T>(100.0) * (T::one() - (num / den).sqrt()))
    };
    Ok((
        channel(&measured.d, &simulated.d)?,
        channel(&measured.q, &simulated.q)?,
    ))
}

/// Whether a method estimates model coefficients or raw frequency points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    /// Coefficient-based model (state space, difference equation).
    Parametric,
    /// Pointwise frequency-domain estimate.
    Nonparametric,
}

/// One method to include in a comparison.
#[derive(Debug, Clone)]
pub struct ReportEntry<'a, T: Scalar = f64> {
    /// Display name of the method (table column header).
    pub name: String,
    /// Parametric or nonparametric.
    pub model_type: ModelType,
    /// The method's impedance estimate, with experiment metadata attached.
    pub response: &'a FrequencyResponse<T>,
}

/// One evaluated method row of the comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    /// Method display name.
    pub method: String,
    /// Parametric or nonparametric.
    pub model_type: ModelType,
    /// Independent excitation runs consumed.
    pub experiment_cycles: u32,
    /// Measured samples consumed (all channels).
    pub data_points: u64,
    /// Total excitation duration, seconds.
    pub excitation_time_s: f64,
    /// Small-signal current energy, p.u.^2 * samples.
    pub current_energy: f64,
    /// Small-signal voltage energy, p.u.^2 * samples.
    pub voltage_energy: f64,
    /// Average Bode magnitude error, dB (lower is better).
    pub avg_mag_error_db: f64,
    /// Average Bode phase error, degrees.
    pub avg_phase_error_deg: f64,
}

/// Accuracy/efficiency comparison across identification methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Evaluation band, Hz.
    pub band_hz: (f64, f64),
    /// One row per method, in caller order.
    pub rows: Vec<MethodSummary>,
}

/// Evaluates every method against `truth` over `band` and assembles the
/// comparison. The truth model is re-evaluated on each method's own grid,
/// so methods with different grids remain comparable.
pub fn comparison_report<T: Scalar, M: TransferModel<T>>(
    entries: &[ReportEntry<'_, T>],
    truth: &M,
    band: (T, T),
) -> Result<ComparisonReport> {
    if entries.is_empty() {
        return Err(Error::invalid("comparison needs at least one method"));
    }
    let mut rows = Vec::with_capacity(entries.len());
    for entry in entries {
        let est = entry.response.restrict_band(band.0, band.1)?;
        let truth_resp =
            frequency_response(truth, &est.freqs_hz, ResponseSource::Analytic)?;
        let (mag_db, phase_deg) = bode_errors(&est, &truth_resp, band)?;
        let meta = entry.response.metadata.clone().unwrap_or_default();
        rows.push(MethodSummary {
            method: entry.name.clone(),
            model_type: entry.model_type,
            experiment_cycles: meta.experiment_cycles,
            data_points: meta.data_points,
            excitation_time_s: meta.excitation_time_s,
            current_energy: meta.current_energy,
            voltage_energy: meta.voltage_energy,
            avg_mag_error_db: lower(mag_db),
            avg_phase_error_deg: lower(phase_deg),
        });
    }
    Ok(ComparisonReport { band_hz: (lower(band.0), lower(band.1)), rows })
}

impl ComparisonReport {
    /// Machine-readable JSON form (pretty-printed, stable field order).
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("report serialization failed: {e}")))
    }

    /// Parses a report back from its JSON form.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad report JSON: {e}")))
    }

    /// Fixed-width text table: metrics as rows, methods as columns.
    pub fn text_table(&self) -> String {
        let labels = [
            "Method",
            "# Experiment cycles",
            "Excitation time (s)",
            "# Data points",
            "Energy of |Δi| (p.u.²·samples)",
            "Energy of |Δv| (p.u.²·samples)",
            "Avg. magnitude error (dB)",
            "Avg. phase error (deg)",
            "Model type",
        ];
        let mut columns: Vec<Vec<String>> = vec![labels.iter().map(|s| s.to_string()).collect()];
        for row in &self.rows {
            columns.push(vec![
                row.method.clone(),
                row.experiment_cycles.to_string(),
                format!("{:.1}", row.excitation_time_s),
                row.data_points.to_string(),
                format!("{:.1}", row.current_energy),
                format!("{:.1}", row.voltage_energy),
                format!("{:.2}", row.avg_mag_error_db),
                format!("{:.2}", row.avg_phase_error_deg),
                match row.model_type {
                    ModelType::Parametric => "parametric".to_string(),
                    ModelType::Nonparametric => "nonparametric".to_string(),
                },
            ]);
        }
        let widths: Vec<usize> = columns
            .iter()
            .map(|col| col.iter().map(|c| c.chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in 0..labels.len() {
            for (c, col) in columns.iter().enumerate() {
                if c > 0 {
                    out.push_str("  ");
                }
                let cell = &col[line];
                let pad = widths[c] - cell.chars().count();
                if c == 0 {
                    out.push_str(cell);
                    out.push_str(&" ".repeat(pad));
                } else {
                    out.push_str(&" ".repeat(pad));
                    out.push_str(cell);
                }
            }
            out.push('\n');
            if line == 0 {
                let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        out
    }
}
