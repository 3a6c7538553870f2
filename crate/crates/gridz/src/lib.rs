//! Parametric and nonparametric identification of the 2x2 MIMO small-signal
//! impedance of a three-phase grid in the rotating dq frame.
//!
//! The toolkit covers the full desk-scale workflow:
//!
//! * [`signals`] — excitation generation (RBS, sine), the amplitude-invariant
//!   Park transform pair, steady-state offset removal, optional prefiltering,
//!   and CSV import/export of waveform records.
//! * [`gridsim`] — the analytic reference grid (an RLC ladder as a dq-frame
//!   continuous state-space model) and noisy excitation experiments that
//!   produce identification data.
//! * [`ss`] — continuous/discrete MIMO state-space models: ZOH
//!   discretization, discrete-to-continuous conversion, minimal realization,
//!   simulation, and frequency evaluation.
//! * [`sysid`] — parametric identification: MIMO ARX least-squares
//!   prediction-error regression, MOESP-style subspace identification with
//!   past-data instruments, and AIC order selection.
//! * [`nonparam`] — nonparametric baselines: pointwise frequency sweep and
//!   two-experiment wideband FFT estimation.
//! * [`metrics`] — Bode error metrics, signal energies, NRMSE fit, and the
//!   method-comparison report.
//!
//! All numerics are generic over the scalar type via [`scalar::Scalar`]
//! (`f64` by default, `f32` supported); every stochastic element is seeded
//! and bit-reproducible.

pub mod error;
pub mod freq;
pub mod gridsim;
pub mod linalg;
pub mod metrics;
pub mod nonparam;
pub mod scalar;
pub mod signals;
pub mod ss;
pub mod sysid;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default-precision three-phase record.
pub type ThreePhaseSeries = signals::ThreePhaseSeries<f64>;
/// Default-precision rotating-frame record.
pub type DqSeries = signals::DqSeries<f64>;
/// Default-precision excitation waveform.
pub type ExcitationSignal = signals::ExcitationSignal<f64>;
/// Default-precision continuous-time state-space model.
pub type ContinuousStateSpace = ss::ContinuousStateSpace<f64>;
/// Default-precision discrete-time state-space model.
pub type DiscreteStateSpace = ss::DiscreteStateSpace<f64>;
/// Default-precision impedance-versus-frequency curve.
pub type FrequencyResponse = freq::FrequencyResponse<f64>;
/// Default-precision circuit parameter set.
pub type CircuitParams = gridsim::CircuitParams<f64>;
/// Default-precision experiment plant.
pub type GridModel = gridsim::GridModel<f64>;
/// Default-precision measurement record.
pub type MeasurementRecord = gridsim::MeasurementRecord<f64>;
/// Default-precision input/output regression record.
pub type RegressionData = sysid::RegressionData<f64>;
/// Default-precision ARX model.
pub type ArxModel = sysid::ArxModel<f64>;
/// Default-precision rational transfer matrix.
pub type DiscreteTransferMatrix = sysid::DiscreteTransferMatrix<f64>;
/// Default-precision subspace identification result.
pub type SubspaceModel = sysid::SubspaceModel<f64>;
/// Default-precision sweep plan.
pub type SweepPlan = nonparam::SweepPlan<f64>;
/// Method-comparison report (plain data, not scalar-generic).
pub use metrics::ComparisonReport;
