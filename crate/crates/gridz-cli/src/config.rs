//! Experiment configuration: a single JSON document that fully determines
//! every pipeline. Parsing is strict (unknown fields are rejected and missing
//! fields are reported with their dotted path) so that a typo'd config never
//! silently falls back to defaults, and two runs of the same file are
//! guaranteed to describe the same experiment.

use gridz::gridsim::{CircuitParams, NoiseConfig, OperatingPoint};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Hard cap on `duration_s * sample_rate_hz`: keeps a mistyped config from
/// trying to allocate hundreds of gigabytes of samples.
pub const MAX_RECORD_SAMPLES: f64 = 1e8;

/// A configuration problem. Rendered on stderr and mapped to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Grid network parameters. Mirrors [`CircuitParams`] field for field; kept
/// as a separate type so the on-disk schema can reject unknown keys without
/// constraining the library type.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub v_base: f64,
    pub s_base: f64,
    pub f_base: f64,
    pub r1: f64,
    pub r2: f64,
    pub l2: f64,
    pub c2: f64,
    pub r3: f64,
    pub l3: f64,
    pub c3: f64,
    pub lf1: f64,
    pub lf2: f64,
    pub cf: f64,
}

impl CircuitSection {
    pub fn to_params(&self) -> CircuitParams {
        CircuitParams {
            v_base: self.v_base,
            s_base: self.s_base,
            f_base: self.f_base,
            r1: self.r1,
            r2: self.r2,
            l2: self.l2,
            c2: self.c2,
            r3: self.r3,
            l3: self.l3,
            c3: self.c3,
            lf1: self.lf1,
            lf2: self.lf2,
            cf: self.cf,
        }
    }

    pub fn reference() -> Self {
        let p = CircuitParams::<f64>::reference();
        Self {
            v_base: p.v_base,
            s_base: p.s_base,
            f_base: p.f_base,
            r1: p.r1,
            r2: p.r2,
            l2: p.l2,
            c2: p.c2,
            r3: p.r3,
            l3: p.l3,
            c3: p.c3,
            lf1: p.lf1,
            lf2: p.lf2,
            cf: p.cf,
        }
    }
}

/// Waveform family for the broadband injection used by `simulate`,
/// `identify`, and `seqpert`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationKindCfg {
    /// Random binary sequence of `+amplitude`/`-amplitude` (wideband).
    Rbs,
    /// Single tone at `sine_freq_hz`; the quadrature axis is driven 90
    /// degrees behind the direct axis.
    Sine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSection {
    pub kind: ExcitationKindCfg,
    /// Perturbation amplitude, p.u.
    pub amplitude: f64,
    /// Seed for the direct-axis sequence.
    pub seed_d: u64,
    /// Seed for the quadrature-axis sequence.
    pub seed_q: u64,
    /// Tone frequency when `kind == "sine"`, Hz. Ignored for RBS.
    #[serde(default = "default_sine_freq")]
    pub sine_freq_hz: f64,
}

fn default_sine_freq() -> f64 {
    50.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Per-channel dq-frame variance of the measurement noise, p.u. squared.
    pub variance: f64,
    /// Seed for the noise stream.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPointSection {
    pub i_d0: f64,
    pub i_q0: f64,
}

impl Default for OperatingPointSection {
    fn default() -> Self {
        let op = OperatingPoint::<f64>::default();
        Self { i_d0: op.i_d0, i_q0: op.i_q0 }
    }
}

/// Continuous-time conversion route for identified discrete models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum D2cMethodCfg {
    /// Exact inverse of zero-order-hold sampling (matrix logarithm). Falls
    /// back to the bilinear map if the estimated model has eigenvalues on
    /// the negative real axis, where the logarithm is not defined.
    MatrixLog,
    /// Tustin / bilinear transformation.
    Bilinear,
}

impl Default for D2cMethodCfg {
    fn default() -> Self {
        Self::MatrixLog
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentificationSection {
    /// ARX output-lag order.
    pub arx_na: usize,
    /// ARX input-lag order.
    pub arx_nb: usize,
    /// Maximum denominator-prefilter refinement passes of the ARX fit (the
    /// candidate with the smallest raw-data simulation error is kept; 0
    /// disables refinement).
    #[serde(default = "default_arx_refinements")]
    pub arx_refinements: usize,
    /// State order of the reduced parametric models.
    pub model_order: usize,
    /// Block rows of the subspace data Hankel matrices.
    pub block_rows: usize,
    #[serde(default)]
    pub d2c: D2cMethodCfg,
}

fn default_arx_refinements() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Number of logarithmically spaced injection frequencies.
    pub points: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Tone amplitude, p.u.
    pub amplitude: f64,
    /// Head of each record discarded before phasor extraction, seconds.
    pub settle_s: f64,
    /// Whole signal periods averaged by the correlation window.
    pub measure_periods: u32,
    /// Excited duration of every sweep experiment, seconds (fixed per cycle
    /// so the experiment count and record length do not depend on the
    /// frequency under test).
    pub cycle_s: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            points: 20,
            f_min_hz: 1.0,
            f_max_hz: 1000.0,
            amplitude: 0.1,
            settle_s: 2.0,
            measure_periods: 8,
            cycle_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeqpertSection {
    /// Offset added to every seed of the second wideband experiment so the
    /// two records carry independent excitation and noise.
    pub second_record_seed_offset: u64,
    /// Number of averaged Welch segments per record.
    pub welch_segments: usize,
}

impl Default for SeqpertSection {
    fn default() -> Self {
        Self { second_record_seed_offset: 10, welch_segments: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodeSection {
    /// Number of logarithmically spaced export frequencies.
    pub points: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

impl Default for BodeSection {
    fn default() -> Self {
        Self { points: 200, f_min_hz: 1.0, f_max_hz: 2000.0 }
    }
}

/// The complete experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub circuit: CircuitSection,
    /// Fundamental grid frequency, Hz (rotation rate of the dq frame).
    pub grid_frequency_hz: f64,
    /// Measurement sample rate, Hz.
    pub sample_rate_hz: f64,
    /// Inner plant-integration steps per measurement sample.
    pub oversample: usize,
    /// Excited duration of the broadband experiment, seconds.
    pub duration_s: f64,
    /// Unexcited head of every record, used as the offset-estimation
    /// window, seconds.
    #[serde(default = "default_lead_in")]
    pub lead_in_s: f64,
    #[serde(default)]
    pub operating_point: OperatingPointSection,
    pub excitation: ExcitationSection,
    pub noise: NoiseSection,
    pub identification: IdentificationSection,
    /// Error-evaluation band `[low, high]`, Hz.
    pub band_hz: [f64; 2],
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub seqpert: SeqpertSection,
    #[serde(default)]
    pub bode: BodeSection,
    /// Artifact directory, created if absent. Overridable with `--out`.
    pub output_dir: String,
}

fn default_lead_in() -> f64 {
    0.5
}

impl ExperimentConfig {
    /// The reference experiment: the Table-style network, 5 kHz sampling,
    /// 15 s of 0.1 p.u. RBS on both axes, and order-16 parametric models.
    pub fn reference() -> Self {
        Self {
            circuit: CircuitSection::reference(),
            grid_frequency_hz: 50.0,
            sample_rate_hz: 5000.0,
            oversample: 20,
            duration_s: 15.0,
            lead_in_s: 0.5,
            operating_point: OperatingPointSection::default(),
            excitation: ExcitationSection {
                kind: ExcitationKindCfg::Rbs,
                amplitude: 0.1,
                seed_d: 1,
                seed_q: 2,
                sine_freq_hz: default_sine_freq(),
            },
            noise: NoiseSection { variance: 6.7e-5, seed: 3 },
            identification: IdentificationSection {
                arx_na: 8,
                arx_nb: 8,
                arx_refinements: 8,
                model_order: 16,
                block_rows: 24,
                d2c: D2cMethodCfg::MatrixLog,
            },
            band_hz: [1.0, 1000.0],
            sweep: SweepSection::default(),
            seqpert: SeqpertSection::default(),
            bode: BodeSection::default(),
            output_dir: "out".to_string(),
        }
    }

    /// Parses and validates a config file. All schema and semantic problems
    /// are reported as [`ConfigError`] with the offending field named.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Parses and validates a config from its JSON text.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                ConfigError(format!("invalid config: {inner}"))
            } else {
                ConfigError(format!("invalid config at `{path}`: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Semantic checks that the type system cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn fail(field: &str, why: String) -> Result<(), ConfigError> {
            Err(ConfigError(format!("invalid config at `{field}`: {why}")))
        }
        let circuit_positive = [
            ("circuit.v_base", self.circuit.v_base),
            ("circuit.s_base", self.circuit.s_base),
            ("circuit.f_base", self.circuit.f_base),
            ("circuit.l2", self.circuit.l2),
            ("circuit.c2", self.circuit.c2),
            ("circuit.l3", self.circuit.l3),
            ("circuit.c3", self.circuit.c3),
        ];
        for (name, value) in circuit_positive {
            if !(value > 0.0) {
                return fail(name, format!("must be positive (got {value})"));
            }
        }
        let circuit_non_negative = [
            ("circuit.r1", self.circuit.r1),
            ("circuit.r2", self.circuit.r2),
            ("circuit.r3", self.circuit.r3),
        ];
        for (name, value) in circuit_non_negative {
            if !(value >= 0.0) {
                return fail(name, format!("must be non-negative (got {value})"));
            }
        }
        if !(self.grid_frequency_hz > 0.0) {
            return fail("grid_frequency_hz", format!("must be positive (got {})", self.grid_frequency_hz));
        }
        if !(self.sample_rate_hz > 0.0) {
            return fail("sample_rate_hz", format!("must be positive (got {})", self.sample_rate_hz));
        }
        if self.oversample < 1 {
            return fail("oversample", "must be at least 1".to_string());
        }
        if !(self.duration_s > 0.0) {
            return fail("duration_s", format!("must be positive (got {})", self.duration_s));
        }
        let samples = self.duration_s * self.sample_rate_hz;
        if !(samples <= MAX_RECORD_SAMPLES) {
            return fail(
                "duration_s",
                format!(
                    "duration_s * sample_rate_hz = {samples:.3e} samples exceeds the {MAX_RECORD_SAMPLES:.0e} limit"
                ),
            );
        }
        if !(self.lead_in_s * self.sample_rate_hz >= 1.0) {
            return fail(
                "lead_in_s",
                "must cover at least one sample; the unexcited head is the offset-estimation window"
                    .to_string(),
            );
        }
        if !(self.excitation.amplitude > 0.0) {
            return fail("excitation.amplitude", format!("must be positive (got {})", self.excitation.amplitude));
        }
        if self.excitation.kind == ExcitationKindCfg::Sine && !(self.excitation.sine_freq_hz > 0.0) {
            return fail("excitation.sine_freq_hz", format!("must be positive (got {})", self.excitation.sine_freq_hz));
        }
        if !(self.noise.variance >= 0.0) {
            return fail("noise.variance", format!("must be non-negative (got {})", self.noise.variance));
        }
        if self.identification.arx_na + self.identification.arx_nb == 0 {
            return fail("identification.arx_na", "arx_na + arx_nb must be at least 1".to_string());
        }
        if self.identification.arx_refinements > 64 {
            return fail(
                "identification.arx_refinements",
                format!("at most 64 refinement passes (got {})", self.identification.arx_refinements),
            );
        }
        if self.identification.model_order == 0 {
            return fail("identification.model_order", "must be at least 1".to_string());
        }
        if self.identification.block_rows <= self.identification.model_order {
            return fail(
                "identification.block_rows",
                format!(
                    "must exceed identification.model_order (got {} <= {})",
                    self.identification.block_rows, self.identification.model_order
                ),
            );
        }
        if !(self.band_hz[0] > 0.0 && self.band_hz[1] > self.band_hz[0]) {
            return fail("band_hz", format!("need 0 < low < high (got [{}, {}])", self.band_hz[0], self.band_hz[1]));
        }
        if self.sweep.points < 2 {
            return fail("sweep.points", "need at least 2 sweep frequencies".to_string());
        }
        if !(self.sweep.f_min_hz > 0.0 && self.sweep.f_max_hz > self.sweep.f_min_hz) {
            return fail(
                "sweep.f_min_hz",
                format!("need 0 < f_min_hz < f_max_hz (got [{}, {}])", self.sweep.f_min_hz, self.sweep.f_max_hz),
            );
        }
        if !(self.sweep.amplitude > 0.0) {
            return fail("sweep.amplitude", format!("must be positive (got {})", self.sweep.amplitude));
        }
        if !(self.sweep.settle_s >= 0.0) {
            return fail("sweep.settle_s", format!("must be non-negative (got {})", self.sweep.settle_s));
        }
        if self.sweep.measure_periods == 0 {
            return fail("sweep.measure_periods", "must be at least 1".to_string());
        }
        let sweep_samples = self.sweep.cycle_s * self.sample_rate_hz;
        if !(self.sweep.cycle_s > 0.0) {
            return fail("sweep.cycle_s", format!("must be positive (got {})", self.sweep.cycle_s));
        }
        if !(sweep_samples <= MAX_RECORD_SAMPLES) {
            return fail(
                "sweep.cycle_s",
                format!("cycle_s * sample_rate_hz = {sweep_samples:.3e} samples exceeds the {MAX_RECORD_SAMPLES:.0e} limit"),
            );
        }
        // Every snapped measurement window plus the settle head must fit in
        // one cycle; checking the worst case (the lowest frequency) up front
        // turns a guaranteed runtime failure into a config error.
        let worst_window_s =
            (f64::from(self.sweep.measure_periods) * self.sample_rate_hz / self.sweep.f_min_hz).round()
                / self.sample_rate_hz;
        if worst_window_s + self.sweep.settle_s > self.sweep.cycle_s {
            return fail(
                "sweep.cycle_s",
                format!(
                    "must cover settle_s + measure_periods/f_min_hz = {:.3} s (got {} s)",
                    worst_window_s + self.sweep.settle_s,
                    self.sweep.cycle_s
                ),
            );
        }
        if self.seqpert.welch_segments == 0 {
            return fail("seqpert.welch_segments", "must be at least 1".to_string());
        }
        if self.seqpert.second_record_seed_offset == 0 {
            return fail(
                "seqpert.second_record_seed_offset",
                "must be non-zero; the two wideband records need independent excitation".to_string(),
            );
        }
        if self.bode.points < 2 {
            return fail("bode.points", "need at least 2 export frequencies".to_string());
        }
        if !(self.bode.f_min_hz > 0.0 && self.bode.f_max_hz > self.bode.f_min_hz) {
            return fail(
                "bode.f_min_hz",
                format!("need 0 < f_min_hz < f_max_hz (got [{}, {}])", self.bode.f_min_hz, self.bode.f_max_hz),
            );
        }
        if self.output_dir.is_empty() {
            return fail("output_dir", "must not be empty".to_string());
        }
        Ok(())
    }

    /// Applies `--seed-override o`: the direct-axis excitation takes `o`,
    /// the quadrature axis `o + 1`, and the noise stream `o + 2`.
    pub fn apply_seed_override(&mut self, seed: u64) {
        self.excitation.seed_d = seed;
        self.excitation.seed_q = seed.wrapping_add(1);
        self.noise.seed = seed.wrapping_add(2);
    }

    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig { variance: self.noise.variance, seed: self.noise.seed }
    }

    pub fn operating_point(&self) -> OperatingPoint {
        OperatingPoint { i_d0: self.operating_point.i_d0, i_q0: self.operating_point.i_q0 }
    }

    /// dq-frame rotation rate, rad/s.
    pub fn omega_g(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.grid_frequency_hz
    }
}
