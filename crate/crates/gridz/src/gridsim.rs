//! Analytic reference grid and excitation-experiment simulation.
//!
//! The reference network is an RLC ladder seen from the converter's point of
//! common coupling (PCC): a resistive load R1 and shunt capacitor C2 at the
//! PCC, a series R2–L2 line to a mid node with a second shunt C2, and a
//! series R3–L3–C3 line to the infinite bus (a small-signal short). Per axis
//! this is a 5-state model; embedded in the rotating dq frame it becomes the
//! 10-state two-input/two-output plant whose 2x2 impedance the rest of the
//! toolkit identifies.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::freq::{frequency_response, FrequencyResponse, ResponseSource, TransferModel};
use crate::scalar::{fl, lower, Scalar};
use crate::signals::{
    inverse_park, park, remove_offset, DqSeries, ExcitationKind, ExcitationSignal,
    ThreePhaseSeries,
};
use crate::ss::{discretize_zoh, ContinuousStateSpace};
use nalgebra::{Complex, ComplexField, DMatrix, DVector, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Electrical parameters of the reference network, in per-unit on the given
/// voltage/power/frequency bases. The converter-filter values (`lf1`, `lf2`,
/// `cf`) are carried for completeness but do not enter the grid model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CircuitParams<T: Scalar = f64> {
    /// Voltage base, volts.
    pub v_base: T,
    /// Power base, VA.
    pub s_base: T,
    /// Frequency base, Hz.
    pub f_base: T,
    /// Load resistance at the PCC, p.u.
    pub r1: T,
    /// First line resistance, p.u.
    pub r2: T,
    /// First line inductance, p.u.
    pub l2: T,
    /// Shunt capacitance (PCC node and mid node), p.u.
    pub c2: T,
    /// Second line resistance, p.u.
    pub r3: T,
    /// Second line inductance, p.u.
    pub l3: T,
    /// Series capacitance toward the infinite bus, p.u.
    pub c3: T,
    /// Converter filter inductance (converter side), p.u. (unused here).
    pub lf1: T,
    /// Converter filter inductance (grid side), p.u. (unused here).
    pub lf2: T,
    /// Converter filter capacitance, p.u. (unused here).
    pub cf: T,
}

impl<T: Scalar> CircuitParams<T> {
    /// The reference network values used throughout the numerical
    /// experiments: 380 V / 1.5 kVA / 50 Hz bases, 2 p.u. load, two
    /// 0.015 + j0.15 p.u. lines, 0.05 p.u. shunt capacitors, and a 10 p.u.
    /// series capacitor to the infinite bus.
    pub fn reference() -> Self {
        Self {
            v_base: fl(380.0),
            s_base: fl(1500.0),
            f_base: fl(50.0),
            r1: fl(2.0),
            r2: fl(0.015),
            l2: fl(0.15),
            c2: fl(0.05),
            r3: fl(0.015),
            l3: fl(0.15),
            c3: fl(10.0),
            lf1: fl(0.08),
            lf2: fl(0.05),
            cf: fl(0.08),
        }
    }

    /// Checks the physical invariants: positive bases, positive reactive
    /// elements, non-negative line resistances, strictly positive load.
    pub fn validate(&self) -> Result<()> {
        if self.v_base <= T::zero() || self.s_base <= T::zero() || self.f_base <= T::zero() {
            return Err(Error::invalid("bases must be positive"));
        }
        if self.r1 <= T::zero() {
            return Err(Error::invalid("load resistance r1 must be positive (use a large value for an open load)"));
        }
        if self.r2 < T::zero() || self.r3 < T::zero() {
            return Err(Error::invalid("line resistances must be non-negative"));
        }
        for (name, v) in [
            ("l2", self.l2),
            ("c2", self.c2),
            ("l3", self.l3),
            ("c3", self.c3),
            ("lf1", self.lf1),
            ("lf2", self.lf2),
            ("cf", self.cf),
        ] {
            if v <= T::zero() {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Angular frequency base, rad/s.
    pub fn omega_base(&self) -> T {
        T::two_pi() * self.f_base
    }

    /// Impedance base, ohms.
    pub fn z_base(&self) -> T {
        self.v_base * self.v_base / self.s_base
    }

    /// Nominal grid angular frequency (equal to the base), rad/s.
    pub fn omega_g(&self) -> T {
        self.omega_base()
    }
}

/// Builds the single-axis (per-phase) network model: input is the current
/// injected into the PCC (p.u.), output the PCC voltage (p.u.).
///
/// States: PCC shunt-capacitor voltage `v1`, first line current `i_L2`, mid
/// shunt-capacitor voltage `v2`, second line current `i_L3`, series-capacitor
/// voltage `v_C3`. Per-unit reactances are converted to SI-time storage
/// values through the angular base (l = L_pu / omega_b, c = C_pu / omega_b),
/// so the simulation runs in per-unit amplitudes with time in seconds.
pub fn build_phase_circuit<T: Scalar>(p: &CircuitParams<T>) -> Result<ContinuousStateSpace<T>> {
    p.validate()?;
    let wb = p.omega_base();
    let c2 = p.c2 / wb;
    let l2 = p.l2 / wb;
    let l3 = p.l3 / wb;
    let c3 = p.c3 / wb;
    let mut a = DMatrix::<T>::zeros(5, 5);
    // C2 dv1/dt = i_in - v1/R1 - i_L2
    a[(0, 0)] = -T::one() / (p.r1 * c2);
    a[(0, 1)] = -T::one() / c2;
    // L2 di_L2/dt = v1 - R2 i_L2 - v2
    a[(1, 0)] = T::one() / l2;
    a[(1, 1)] = -p.r2 / l2;
    a[(1, 2)] = -T::one() / l2;
    // C2 dv2/dt = i_L2 - i_L3
    a[(2, 1)] = T::one() / c2;
    a[(2, 3)] = -T::one() / c2;
    // L3 di_L3/dt = v2 - R3 i_L3 - v_C3
    a[(3, 2)] = T::one() / l3;
    a[(3, 3)] = -p.r3 / l3;
    a[(3, 4)] = -T::one() / l3;
    // C3 dv_C3/dt = i_L3
    a[(4, 3)] = T::one() / c3;
    let mut b = DMatrix::<T>::zeros(5, 1);
    b[(0, 0)] = T::one() / c2;
    let mut c = DMatrix::<T>::zeros(1, 5);
    c[(0, 0)] = T::one();
    let d = DMatrix::<T>::zeros(1, 1);
    ContinuousStateSpace::new(a, b, c, d)?.with_labels(&["i"], &["v"])
}

/// Embeds a single-axis model into the rotating dq frame at `omega_g`:
/// `A_dq = [[A, w I], [-w I, A]]`, B/C/D block-diagonal. Doubles the state,
/// input, and output dimensions; input/output labels gain `_d`/`_q` suffixes.
pub fn to_dq_frame<T: Scalar>(
    ss_phase: &ContinuousStateSpace<T>,
    omega_g: T,
) -> Result<ContinuousStateSpace<T>> {
    if ss_phase.n_inputs() != 1 || ss_phase.n_outputs() != 1 {
        return Err(Error::invalid("dq embedding expects a single-axis (SISO) model"));
    }
    if omega_g < T::zero() {
        return Err(Error::invalid("frame frequency must be non-negative"));
    }
    let n = ss_phase.n_states();
    let mut a = DMatrix::<T>::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&ss_phase.a);
    a.view_mut((n, n), (n, n)).copy_from(&ss_phase.a);
    for i in 0..n {
        a[(i, n + i)] = omega_g;
        a[(n + i, i)] = -omega_g;
    }
    let mut b = DMatrix::<T>::zeros(2 * n, 2);
    b.view_mut((0, 0), (n, 1)).copy_from(&ss_phase.b);
    b.view_mut((n, 1), (n, 1)).copy_from(&ss_phase.b);
    let mut c = DMatrix::<T>::zeros(2, 2 * n);
    c.view_mut((0, 0), (1, n)).copy_from(&ss_phase.c);
    c.view_mut((1, n), (1, n)).copy_from(&ss_phase.c);
    let mut d = DMatrix::<T>::zeros(2, 2);
    d[(0, 0)] = ss_phase.d[(0, 0)];
    d[(1, 1)] = ss_phase.d[(0, 0)];
    let in_l = &ss_phase.input_labels[0];
    let out_l = &ss_phase.output_labels[0];
    ContinuousStateSpace::new(a, b, c, d)?.with_labels(
        &[&format!("{in_l}_d"), &format!("{in_l}_q")],
        &[&format!("{out_l}_d"), &format!("{out_l}_q")],
    )
}

/// Resolvent solve with an explicit conditioning guard: evaluates
/// C (wI - A)^-1 B + D and reports a numerical error when the resolvent's
/// 2-norm condition number exceeds 1e12.
fn transfer_checked<T: Scalar>(
    ss: &ContinuousStateSpace<T>,
    w: Complex<T>,
) -> Result<DMatrix<Complex<T>>> {
    let n = ss.n_states();
    let mut resolvent = ss.a.map(|x| -Complex::new(x, T::zero()));
    for i in 0..n {
        resolvent[(i, i)] += w;
    }
    let sv = resolvent.clone().svd(false, false).singular_values;
    let smin = sv.min();
    let smax = sv.max();
    if smin <= T::zero() || smax / smin > fl::<T>(1e12) {
        return Err(Error::Numerical(format!(
            "resolvent conditioning exceeds 1e12 at w = {w}"
        )));
    }
    let bc = ss.b.map(|x| Complex::new(x, T::zero()));
    let x = resolvent
        .lu()
        .solve(&bc)
        .ok_or_else(|| Error::Numerical(format!("resolvent singular at w = {w}")))?;
    let cc = ss.c.map(|x| Complex::new(x, T::zero()));
    let dc = ss.d.map(|x| Complex::new(x, T::zero()));
    Ok(cc * x + dc)
}

/// Ground-truth 2x2 dq impedance of the reference circuit over a frequency
/// grid, evaluated directly from the state-space resolvent.
pub fn analytic_impedance<T: Scalar>(
    p: &CircuitParams<T>,
    omega_g: T,
    freqs_hz: &[T],
) -> Result<FrequencyResponse<T>> {
    let dq = to_dq_frame(&build_phase_circuit(p)?, omega_g)?;
    let mut z = Vec::with_capacity(freqs_hz.len());
    for &f in freqs_hz {
        if f <= T::zero() {
            return Err(Error::invalid("frequencies must be positive"));
        }
        let s = Complex::new(T::zero(), T::two_pi() * f);
        let g = transfer_checked(&dq, s)?;
        z.push(Matrix2::new(g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]));
    }
    FrequencyResponse::new(freqs_hz.to_vec(), z, ResponseSource::Analytic)
}

/// The simulated plant seen by an experiment: commanded dq current in, PCC
/// voltage and realized PCC current out.
///
/// The converter is an ideal controlled current source, optionally with a
/// first-order current-tracking lag (`tracking_lag_s > 0`). The plant has
/// two inputs (commanded `u_d`, `u_q`) and four outputs
/// (`v_d`, `v_q`, `i_d`, `i_q`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel<T: Scalar = f64> {
    /// Combined grid + converter-tracking dynamics (2 inputs, 4 outputs).
    pub plant: ContinuousStateSpace<T>,
    /// Rotating-frame angular frequency, rad/s.
    pub omega_g: T,
    /// First-order current-tracking time constant, seconds (0 = ideal).
    pub tracking_lag_s: T,
    /// Human-readable model name.
    pub label: String,
}

impl<T: Scalar> GridModel<T> {
    /// Builds the experiment plant around the reference circuit. With an
    /// ideal source (`tracking_lag_s = 0`) the realized current equals the
    /// commanded current exactly; with a lag the command passes through
    /// `1/(1 + s tau)` per axis first.
    pub fn from_circuit(p: &CircuitParams<T>, omega_g: T, tracking_lag_s: T) -> Result<Self> {
        if tracking_lag_s < T::zero() {
            return Err(Error::invalid("tracking lag must be non-negative"));
        }
        let dq = to_dq_frame(&build_phase_circuit(p)?, omega_g)?;
        let n = dq.n_states();
        let plant = if tracking_lag_s == T::zero() {
            let mut c = DMatrix::<T>::zeros(4, n);
            c.view_mut((0, 0), (2, n)).copy_from(&dq.c);
            let mut d = DMatrix::<T>::zeros(4, 2);
            d[(2, 0)] = T::one();
            d[(3, 1)] = T::one();
            ContinuousStateSpace::new(dq.a.clone(), dq.b.clone(), c, d)?
        } else {
            let tau = tracking_lag_s;
            let mut a = DMatrix::<T>::zeros(n + 2, n + 2);
            a.view_mut((0, 0), (n, n)).copy_from(&dq.a);
            a.view_mut((0, n), (n, 2)).copy_from(&dq.b);
            a[(n, n)] = -T::one() / tau;
            a[(n + 1, n + 1)] = -T::one() / tau;
            let mut b = DMatrix::<T>::zeros(n + 2, 2);
            b[(n, 0)] = T::one() / tau;
            b[(n + 1, 1)] = T::one() / tau;
            let mut c = DMatrix::<T>::zeros(4, n + 2);
            c.view_mut((0, 0), (2, n)).copy_from(&dq.c);
            c[(2, n)] = T::one();
            c[(3, n + 1)] = T::one();
            ContinuousStateSpace::new(a, b, c, DMatrix::zeros(4, 2))?
        };
        let plant = plant.with_labels(&["u_d", "u_q"], &["v_d", "v_q", "i_d", "i_q"])?;
        Ok(Self { plant, omega_g, tracking_lag_s, label: "reference_circuit".into() })
    }

    /// A degenerate series R–L grid behind a first-order current-tracking
    /// lag (`tracking_lag_s > 0` required: an ideal current source driving a
    /// pure inductance has no proper state-space form). `l` is the effective
    /// inductance in per-unit seconds (per-unit reactance / angular base),
    /// so the exact impedance is `[[r + s l, -w l], [w l, r + s l]]`.
    pub fn rl_degenerate(r: T, l: T, omega_g: T, tracking_lag_s: T) -> Result<Self> {
        if tracking_lag_s <= T::zero() {
            return Err(Error::invalid(
                "rl_degenerate requires a positive tracking lag (the pure R-L impedance is improper)",
            ));
        }
        if r < T::zero() || l <= T::zero() {
            return Err(Error::invalid("need r >= 0 and l > 0"));
        }
        if omega_g < T::zero() {
            return Err(Error::invalid("frame frequency must be non-negative"));
        }
        let tau = tracking_lag_s;
        // States are the realized currents (i_d, i_q); the terminal voltage
        // v = R i + l di/dt -/+ w l coupling follows algebraically from the
        // lag dynamics di/dt = (u - i)/tau.
        let a = DMatrix::from_diagonal_element(2, 2, -T::one() / tau);
        let b = DMatrix::from_diagonal_element(2, 2, T::one() / tau);
        let mut c = DMatrix::<T>::zeros(4, 2);
        c[(0, 0)] = r - l / tau;
        c[(0, 1)] = -omega_g * l;
        c[(1, 0)] = omega_g * l;
        c[(1, 1)] = r - l / tau;
        c[(2, 0)] = T::one();
        c[(3, 1)] = T::one();
        let mut d = DMatrix::<T>::zeros(4, 2);
        d[(0, 0)] = l / tau;
        d[(1, 1)] = l / tau;
        let plant = ContinuousStateSpace::new(a, b, c, d)?
            .with_labels(&["u_d", "u_q"], &["v_d", "v_q", "i_d", "i_q"])?;
        Ok(Self { plant, omega_g, tracking_lag_s, label: "rl_degenerate".into() })
    }

    /// The grid impedance seen at the PCC, as voltage response over realized
    /// current response: Z(s) = (V/U)(I/U)^-1. For an ideal source this
    /// reduces to the grid transfer matrix itself; with a tracking lag the
    /// shared lag dynamics cancel exactly in the ratio.
    pub fn impedance_response(&self, freqs_hz: &[T]) -> Result<FrequencyResponse<T>> {
        frequency_response(self, freqs_hz, ResponseSource::Analytic)
    }
}

impl<T: Scalar> TransferModel<T> for GridModel<T> {
    fn impedance_at(&self, f_hz: T) -> Result<Matrix2<Complex<T>>> {
        let s = Complex::new(T::zero(), T::two_pi() * f_hz);
        let g = transfer_checked(&self.plant, s)?;
        let v = Matrix2::new(g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
        let i = Matrix2::new(g[(2, 0)], g[(2, 1)], g[(3, 0)], g[(3, 1)]);
        let det = i[(0, 0)] * i[(1, 1)] - i[(0, 1)] * i[(1, 0)];
        let scale = i.iter().map(|c| c.modulus_squared()).fold(T::zero(), |a, x| a + x);
        if det.modulus() <= T::zero() || scale / det.modulus() > fl::<T>(1e12) {
            return Err(Error::Numerical(format!(
                "current response matrix is ill-conditioned at {} Hz",
                lower(f_hz)
            )));
        }
        let inv = Matrix2::new(i[(1, 1)], -i[(0, 1)], -i[(1, 0)], i[(0, 0)]) / det;
        Ok(v * inv)
    }
}

/// Additive measurement-noise settings (white Gaussian, equal variance on
/// all six sampled abc channels).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseConfig<T: Scalar = f64> {
    /// Per-channel noise variance after dq transformation, per-unit squared.
    pub variance: T,
    /// PRNG seed for the noise stream.
    pub seed: u64,
}

impl<T: Scalar> NoiseConfig<T> {
    /// A silent configuration.
    pub fn none() -> Self {
        Self { variance: T::zero(), seed: 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.variance < T::zero() {
            return Err(Error::invalid("noise variance must be non-negative"));
        }
        Ok(())
    }
}

/// Steady-state dq operating point of the converter current.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OperatingPoint<T: Scalar = f64> {
    /// Direct-axis current, p.u.
    pub i_d0: T,
    /// Quadrature-axis current, p.u.
    pub i_q0: T,
}

impl<T: Scalar> Default for OperatingPoint<T> {
    fn default() -> Self {
        Self { i_d0: fl(0.5), i_q0: T::zero() }
    }
}

/// Full steady-state operating point stored with a measurement record.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SteadyState<T: Scalar = f64> {
    /// Direct-axis current, p.u.
    pub i_d0: T,
    /// Quadrature-axis current, p.u.
    pub i_q0: T,
    /// Direct-axis voltage, p.u.
    pub v_d0: T,
    /// Quadrature-axis voltage, p.u.
    pub v_q0: T,
}

/// Reproducibility metadata for one injected excitation waveform.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExcitationDescriptor {
    /// Waveform family.
    pub kind: ExcitationKind,
    /// Number of samples consumed.
    pub samples: usize,
    /// Peak amplitude, p.u.
    pub amplitude: f64,
    /// Generator seed (0 for deterministic kinds).
    pub seed: u64,
    /// Tone frequency for sinusoidal kinds, Hz.
    pub freq_hz: Option<f64>,
    /// Initial phase for sinusoidal kinds, rad.
    pub phase: Option<f64>,
}

impl<T: Scalar> From<&ExcitationSignal<T>> for ExcitationDescriptor {
    fn from(sig: &ExcitationSignal<T>) -> Self {
        Self {
            kind: sig.kind,
            samples: sig.len(),
            amplitude: lower(sig.amplitude),
            seed: sig.seed,
            freq_hz: sig.freq_hz.map(lower),
            phase: sig.phase.map(lower),
        }
    }
}

/// What was injected, and where in the record the injection started.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExcitationMeta {
    /// Sample index at which the excitation switches on.
    pub onset_sample: usize,
    /// Number of excited samples following the onset.
    pub excitation_samples: usize,
    /// Direct-axis injection.
    pub d: ExcitationDescriptor,
    /// Quadrature-axis injection.
    pub q: ExcitationDescriptor,
}

/// One simulated measurement: PCC three-phase voltage and current plus the
/// metadata needed to reproduce and post-process it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord<T: Scalar = f64> {
    /// Sampled PCC voltage, abc frame, p.u.
    pub v_abc: ThreePhaseSeries<T>,
    /// Sampled PCC current, abc frame, p.u.
    pub i_abc: ThreePhaseSeries<T>,
    /// Measurement sample rate, Hz.
    pub sample_rate: T,
    /// Noise PRNG seed used.
    pub noise_seed: u64,
    /// Injection metadata.
    pub excitation_meta: ExcitationMeta,
    /// Steady-state operating point.
    pub steady_state: SteadyState<T>,
    /// Rotating-frame angular frequency, rad/s.
    pub grid_freq_rad: T,
}

impl<T: Scalar> MeasurementRecord<T> {
    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.v_abc.len()
    }

    /// True when the record holds no samples.
    pub fn is_empty(&self) -> bool {
        self.v_abc.is_empty()
    }
}

/// Simulates one excitation experiment against a grid model.
///
/// The commanded current is the steady-state operating point plus the two
/// excitation waveforms (zero-order-held at `sample_rate`, switched on after
/// `lead_in_s`). The plant is ZOH-discretized at `sample_rate * oversample`
/// and stepped from its small-signal equilibrium; outputs are sampled at
/// `sample_rate` (at interval starts), converted to the abc frame with
/// theta = omega_g * t, and independent Gaussian noise is added to each of
/// the six sampled channels. Fully deterministic given the seeds.
#[allow(clippy::too_many_arguments)]
pub fn simulate_experiment<T: Scalar>(
    grid: &GridModel<T>,
    exc_d: &ExcitationSignal<T>,
    exc_q: &ExcitationSignal<T>,
    duration_s: T,
    sample_rate: T,
    oversample: usize,
    noise: &NoiseConfig<T>,
    operating_point: &OperatingPoint<T>,
    lead_in_s: T,
) -> Result<MeasurementRecord<T>> {
    if oversample < 1 {
        return Err(Error::invalid("oversample factor must be >= 1"));
    }
    if duration_s <= T::zero() || sample_rate <= T::zero() || lead_in_s < T::zero() {
        return Err(Error::invalid("need duration > 0, sample_rate > 0, lead_in >= 0"));
    }
    if grid.omega_g <= T::zero() {
        return Err(Error::invalid("experiments need a positive frame frequency"));
    }
    noise.validate()?;
    for (axis, exc) in [("d", exc_d), ("q", exc_q)] {
        let rel = (exc.sample_rate - sample_rate).abs() / sample_rate;
        if rel > fl::<T>(1e-9) {
            return Err(Error::invalid(format!(
                "{axis}-axis excitation rate {} Hz differs from the sample rate {} Hz",
                lower(exc.sample_rate),
                lower(sample_rate)
            )));
        }
    }
    let n_exc = (lower(duration_s) * lower(sample_rate)).round() as usize;
    let onset = (lower(lead_in_s) * lower(sample_rate)).round() as usize;
    if n_exc == 0 {
        return Err(Error::invalid("duration shorter than one sample"));
    }
    if exc_d.len() < n_exc || exc_q.len() < n_exc {
        return Err(Error::invalid(format!(
            "duration requires {n_exc} excitation samples, got d={}, q={}",
            exc_d.len(),
            exc_q.len()
        )));
    }
    let n_total = onset + n_exc;
    let fs = sample_rate;
    let inner_dt = T::one() / (fs * fl::<T>(oversample as f64));
    let dss = discretize_zoh(&grid.plant, inner_dt)?;

    // Small-signal (delta) simulation from the zero equilibrium; the
    // operating point is added afterwards (exact for a linear plant).
    let nst = dss.n_states();
    let mut x = DVector::<T>::zeros(nst);
    let mut x_next = DVector::<T>::zeros(nst);
    let mut u = DVector::<T>::zeros(2);
    let mut y = DVector::<T>::zeros(4);
    let mut dv_d = Vec::with_capacity(n_total);
    let mut dv_q = Vec::with_capacity(n_total);
    let mut di_d = Vec::with_capacity(n_total);
    let mut di_q = Vec::with_capacity(n_total);
    for k in 0..n_total {
        if k >= onset {
            u[0] = exc_d.samples[k - onset];
            u[1] = exc_q.samples[k - onset];
        }
        y.gemv(T::one(), &dss.c, &x, T::zero());
        y.gemv(T::one(), &dss.d, &u, T::one());
        dv_d.push(y[0]);
        dv_q.push(y[1]);
        di_d.push(y[2]);
        di_q.push(y[3]);
        for _ in 0..oversample {
            x_next.gemv(T::one(), &dss.a, &x, T::zero());
            x_next.gemv(T::one(), &dss.b, &u, T::one());
            std::mem::swap(&mut x, &mut x_next);
        }
    }

    // Operating point: realized current tracks the command at DC; voltage
    // from the plant's DC gain.
    let dc = grid.plant.dc_gain()?;
    let u_op = DVector::from_column_slice(&[operating_point.i_d0, operating_point.i_q0]);
    let y_op = &dc * &u_op;
    let steady = SteadyState {
        i_d0: y_op[2],
        i_q0: y_op[3],
        v_d0: y_op[0],
        v_q0: y_op[1],
    };
    let mut v_d = dv_d;
    let mut v_q = dv_q;
    let mut i_d = di_d;
    let mut i_q = di_q;
    for k in 0..n_total {
        v_d[k] += steady.v_d0;
        v_q[k] += steady.v_q0;
        i_d[k] += steady.i_d0;
        i_q[k] += steady.i_q0;
    }
    let dt = T::one() / fs;
    let v_dq = DqSeries::new(T::zero(), dt, v_d, v_q, grid.omega_g, "v_pcc")?;
    let i_dq = DqSeries::new(T::zero(), dt, i_d, i_q, grid.omega_g, "i_pcc")?;
    let mut v_abc = inverse_park(&v_dq, T::zero())?;
    let mut i_abc = inverse_park(&i_dq, T::zero())?;

    // Measurement noise: the configured variance is the post-transform dq
    // variance; the amplitude-invariant Park transform scales white abc
    // noise variance by 2/3, so the abc channels get 1.5x the configured
    // value. Draw order per sample: va, vb, vc, ia, ib, ic.
    if noise.variance > T::zero() {
        let sigma = (1.5 * lower(noise.variance)).sqrt();
        let normal = Normal::new(0.0f64, sigma)
            .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for k in 0..n_total {
            v_abc.a[k] += fl::<T>(normal.sample(&mut rng));
            v_abc.b[k] += fl::<T>(normal.sample(&mut rng));
            v_abc.c[k] += fl::<T>(normal.sample(&mut rng));
            i_abc.a[k] += fl::<T>(normal.sample(&mut rng));
            i_abc.b[k] += fl::<T>(normal.sample(&mut rng));
            i_abc.c[k] += fl::<T>(normal.sample(&mut rng));
        }
    }

    Ok(MeasurementRecord {
        v_abc,
        i_abc,
        sample_rate: fs,
        noise_seed: noise.seed,
        excitation_meta: ExcitationMeta {
            onset_sample: onset,
            excitation_samples: n_exc,
            d: ExcitationDescriptor::from(exc_d),
            q: ExcitationDescriptor::from(exc_q),
        },
        steady_state: steady,
        grid_freq_rad: grid.omega_g,
    })
}

/// Standard small-signal preprocessing of a measurement record: dq
/// transformation at the record's frame frequency followed by offset removal
/// against `reference_window`. Returns `(delta_v_dq, delta_i_dq)`.
pub fn small_signal_dq<T: Scalar>(
    rec: &MeasurementRecord<T>,
    reference_window: Range<usize>,
) -> Result<(DqSeries<T>, DqSeries<T>)> {
    let v = park(&rec.v_abc, rec.grid_freq_rad, T::zero())?;
    let i = park(&rec.i_abc, rec.grid_freq_rad, T::zero())?;
    let v = remove_offset(&v, reference_window.clone())?;
    let i = remove_offset(&i, reference_window)?;
    Ok((v, i))
}
