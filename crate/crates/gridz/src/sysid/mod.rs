//! Parametric identification: ARX least-squares prediction-error regression,
//! past-instrument subspace identification, and AIC order selection.

mod arx;
mod order;
mod subspace;

pub use arx::{
    arx_identify, arx_identify_prefiltered, arx_predict, arx_simulation_error, arx_to_tf,
    ArxModel, ArxPrediction, DiscreteTransferMatrix,
};
pub use order::{aic_score, select_order, AicScore};
pub use subspace::{subspace_identify, SubspaceModel};

use crate::error::{Error, Result};
use crate::scalar::{fl, Scalar};
use crate::signals::DqSeries;
use nalgebra::DMatrix;

/// Input/output data prepared for identification: inputs are the
/// small-signal dq currents, outputs the small-signal dq voltages, one
/// column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData<T: Scalar = f64> {
    /// Input sequence, p x N (rows: i_d, i_q).
    pub u: DMatrix<T>,
    /// Output sequence, m x N (rows: v_d, v_q).
    pub y: DMatrix<T>,
    /// Sample interval, seconds.
    pub dt: T,
}

impl<T: Scalar> RegressionData<T> {
    /// Validated constructor from raw channel matrices.
    pub fn new(u: DMatrix<T>, y: DMatrix<T>, dt: T) -> Result<Self> {
        if u.ncols() != y.ncols() {
            return Err(Error::invalid(format!(
                "input has {} samples, output {}",
                u.ncols(),
                y.ncols()
            )));
        }
        if u.ncols() < 2 || u.nrows() == 0 || y.nrows() == 0 {
            return Err(Error::invalid("need at least two samples and one channel per side"));
        }
        if dt <= T::zero() {
            return Err(Error::invalid("sample interval dt must be positive"));
        }
        Ok(Self { u, y, dt })
    }

    /// Builds regression data from preprocessed small-signal dq records
    /// (voltage as output, current as input). Both records must be marked
    /// small-signal (offset removed) and share the sampling grid.
    pub fn from_dq(v: &DqSeries<T>, i: &DqSeries<T>) -> Result<Self> {
        if !v.is_small_signal || !i.is_small_signal {
            return Err(Error::invalid(
                "identification expects offset-removed (small-signal) dq records",
            ));
        }
        if v.len() != i.len() {
            return Err(Error::invalid("voltage and current records differ in length"));
        }
        let rel = (v.dt - i.dt).abs() / v.dt;
        if rel > fl::<T>(1e-9) {
            return Err(Error::invalid("voltage and current records differ in sample rate"));
        }
        let n = v.len();
        let mut u = DMatrix::<T>::zeros(2, n);
        let mut y = DMatrix::<T>::zeros(2, n);
        for k in 0..n {
            u[(0, k)] = i.d[k];
            u[(1, k)] = i.q[k];
            y[(0, k)] = v.d[k];
            y[(1, k)] = v.q[k];
        }
        Self::new(u, y, v.dt)
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    /// True when the record holds no samples (unreachable via `new`).
    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }

    /// Number of input channels.
    pub fn n_inputs(&self) -> usize {
        self.u.nrows()
    }

    /// Number of output channels.
    pub fn n_outputs(&self) -> usize {
        self.y.nrows()
    }

    /// Copy restricted to a column (sample) range.
    pub fn slice_samples(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::invalid(format!(
                "sample range {}..{} out of bounds for {} samples",
                range.start,
                range.end,
                self.len()
            )));
        }
        Ok(Self {
            u: self.u.columns(range.start, range.end - range.start).into_owned(),
            y: self.y.columns(range.start, range.end - range.start).into_owned(),
            dt: self.dt,
        })
    }
}
