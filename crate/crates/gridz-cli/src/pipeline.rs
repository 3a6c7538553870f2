//! Experiment pipelines: each function turns a validated
//! [`ExperimentConfig`] into identified models and frequency responses.
//! `main` adds artifact writing and exit-code mapping on top; keeping the
//! numerics here lets the integration suites drive the exact production
//! paths in-process.

use crate::config::{D2cMethodCfg, ExcitationKindCfg, ExperimentConfig};
use anyhow::{Context, Result};
use gridz::freq::{
    frequency_response, log_grid, ExperimentMetadata, FrequencyResponse, ResponseSource,
};
use gridz::gridsim::{simulate_experiment, small_signal_dq, GridModel, MeasurementRecord, NoiseConfig};
use gridz::metrics::{comparison_report, signal_energy, ComparisonReport, ModelType, ReportEntry};
use gridz::nonparam::{
    frequency_sweep_identify, wideband_fft_identify, InjectionAxis, SweepPlan, WelchSpec,
};
use gridz::signals::{generate_rbs, generate_sine, DqSeries, ExcitationSignal};
use gridz::ss::{d2c, minreal_default_tol, ContinuousStateSpace, D2cMethod, DiscreteStateSpace};
use gridz::sysid::{arx_identify_prefiltered, subspace_identify, ArxModel, RegressionData, SubspaceModel};

/// Report/table display names, shared with the test suites.
pub const METHOD_ARX: &str = "dq ARX";
pub const METHOD_SUBSPACE: &str = "Subspace";
pub const METHOD_SWEEP: &str = "Frequency sweep";
pub const METHOD_SEQPERT: &str = "Sequential wideband";

/// The simulated grid a config describes (ideal current tracking).
pub fn build_grid(cfg: &ExperimentConfig) -> Result<GridModel> {
    GridModel::from_circuit(&cfg.circuit.to_params(), cfg.omega_g(), 0.0)
        .context("building the grid model")
}

/// Logarithmic export grid for Bode artifacts.
pub fn bode_grid(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    log_grid(cfg.bode.f_min_hz, cfg.bode.f_max_hz, cfg.bode.points).context("bode grid")
}

/// Analytic impedance of the configured grid on `freqs`.
pub fn analytic_response(cfg: &ExperimentConfig, freqs: &[f64]) -> Result<FrequencyResponse> {
    let grid = build_grid(cfg)?;
    frequency_response(&grid, freqs, ResponseSource::Analytic).context("analytic response")
}

/// One broadband experiment on the configured grid with explicit seeds.
pub fn simulate_record(
    cfg: &ExperimentConfig,
    grid: &GridModel,
    seed_d: u64,
    seed_q: u64,
    noise_seed: u64,
) -> Result<MeasurementRecord> {
    let fs = cfg.sample_rate_hz;
    let n_exc = (cfg.duration_s * fs).round() as usize;
    let amp = cfg.excitation.amplitude;
    let (exc_d, exc_q) = match cfg.excitation.kind {
        ExcitationKindCfg::Rbs => (
            generate_rbs(seed_d, n_exc, amp, fs)?,
            generate_rbs(seed_q, n_exc, amp, fs)?,
        ),
        ExcitationKindCfg::Sine => {
            let f0 = cfg.excitation.sine_freq_hz;
            // Quadrature axis lags by a quarter period so the two channels
            // are not collinear.
            (
                generate_sine(f0, amp, 0.0, n_exc, fs)?,
                generate_sine(f0, amp, -std::f64::consts::FRAC_PI_2, n_exc, fs)?,
            )
        }
    };
    let noise = NoiseConfig { variance: cfg.noise.variance, seed: noise_seed };
    simulate_experiment(
        grid,
        &exc_d,
        &exc_q,
        cfg.duration_s,
        fs,
        cfg.oversample,
        &noise,
        &cfg.operating_point(),
        cfg.lead_in_s,
    )
    .context("simulating the experiment")
}

/// Offset-removed dq voltage/current over the excited span of a record.
pub fn excited_small_signal(rec: &MeasurementRecord) -> Result<(DqSeries, DqSeries)> {
    let onset = rec.excitation_meta.onset_sample;
    let (v, i) = small_signal_dq(rec, 0..onset)?;
    let len = v.len();
    Ok((v.slice(onset..len)?, i.slice(onset..len)?))
}

/// Everything the parametric pipeline produces from one experiment.
pub struct ParametricModels {
    pub record: MeasurementRecord,
    /// Excited small-signal voltage, dq.
    pub v: DqSeries,
    /// Excited small-signal current, dq.
    pub i: DqSeries,
    pub arx: ArxModel,
    pub arx_continuous: ContinuousStateSpace,
    pub arx_d2c_used: &'static str,
    pub arx_response: FrequencyResponse,
    pub subspace: SubspaceModel,
    pub subspace_continuous: ContinuousStateSpace,
    pub subspace_d2c_used: &'static str,
    pub subspace_response: FrequencyResponse,
    pub metadata: ExperimentMetadata,
}

/// Converts an estimated discrete model to continuous time, honoring the
/// configured route. The exact sampling inverse (matrix logarithm) is not
/// defined when the estimated spectrum touches the closed negative real
/// axis; estimation noise can put spurious poles there, so that case falls
/// back to the bilinear map instead of failing the run.
fn to_continuous(
    ss: &DiscreteStateSpace,
    requested: D2cMethodCfg,
) -> Result<(ContinuousStateSpace, &'static str)> {
    match requested {
        D2cMethodCfg::Bilinear => Ok((d2c(ss, D2cMethod::Bilinear)?, "bilinear")),
        D2cMethodCfg::MatrixLog => match d2c(ss, D2cMethod::MatrixLog) {
            Ok(cont) => Ok((cont, "matrix_log")),
            Err(gridz::Error::Conversion(_)) => {
                Ok((d2c(ss, D2cMethod::Bilinear)?, "bilinear_fallback"))
            }
            Err(e) => Err(e.into()),
        },
    }
}

/// Runs the parametric pipeline: one broadband experiment, then an ARX fit
/// and a subspace fit, both reduced to `model_order` states and mapped to
/// continuous time.
pub fn run_parametric(cfg: &ExperimentConfig) -> Result<ParametricModels> {
    let grid = build_grid(cfg)?;
    let record = simulate_record(cfg, &grid, cfg.excitation.seed_d, cfg.excitation.seed_q, cfg.noise.seed)?;
    run_parametric_on_record(cfg, record)
}

/// Identification stage of the parametric pipeline, split out so callers can
/// reuse an existing record.
pub fn run_parametric_on_record(
    cfg: &ExperimentConfig,
    record: MeasurementRecord,
) -> Result<ParametricModels> {
    let (v, i) = excited_small_signal(&record)?;
    let fs = cfg.sample_rate_hz;
    let n_exc = record.excitation_meta.excitation_samples;
    let metadata = ExperimentMetadata {
        experiment_cycles: 1,
        excitation_time_s: n_exc as f64 / fs,
        data_points: 4 * n_exc as u64,
        current_energy: signal_energy(&i)?,
        voltage_energy: signal_energy(&v)?,
    };
    let data = RegressionData::from_dq(&v, &i)?;
    let grid_freqs = bode_grid(cfg)?;
    let id = &cfg.identification;

    let arx = arx_identify_prefiltered(&data, id.arx_na, id.arx_nb, id.arx_refinements)
        .context("ARX identification")?;
    let arx_discrete = arx
        .to_state_space()?
        .minimal_realization(minreal_default_tol())
        .context("ARX order reduction")?;
    let (arx_continuous, arx_d2c_used) = to_continuous(&arx_discrete, id.d2c)?;
    let arx_response = frequency_response(&arx_continuous, &grid_freqs, ResponseSource::Arx)?
        .with_metadata(metadata);

    let subspace =
        subspace_identify(&data, id.model_order, id.block_rows).context("subspace identification")?;
    let subspace_discrete = subspace
        .ss
        .minimal_realization(minreal_default_tol())
        .context("subspace order reduction")?;
    let (subspace_continuous, subspace_d2c_used) = to_continuous(&subspace_discrete, id.d2c)?;
    let subspace_response =
        frequency_response(&subspace_continuous, &grid_freqs, ResponseSource::Subspace)?
            .with_metadata(metadata);

    Ok(ParametricModels {
        record,
        v,
        i,
        arx,
        arx_continuous,
        arx_d2c_used,
        arx_response,
        subspace,
        subspace_continuous,
        subspace_d2c_used,
        subspace_response,
        metadata,
    })
}

/// Runs the tone-by-tone frequency sweep against the configured grid. Each
/// snapped frequency gets two fixed-length experiments (direct-axis and
/// quadrature-axis injection) with independent noise streams.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<FrequencyResponse> {
    let grid = build_grid(cfg)?;
    let fs = cfg.sample_rate_hz;
    let freqs = log_grid(cfg.sweep.f_min_hz, cfg.sweep.f_max_hz, cfg.sweep.points)?;
    let plan = SweepPlan::new(freqs, cfg.sweep.amplitude, cfg.sweep.settle_s, cfg.sweep.measure_periods)?;
    let n_cycle = (cfg.sweep.cycle_s * fs).round() as usize;
    let op = cfg.operating_point();

    let runner = |f: f64, axis: InjectionAxis| -> gridz::Result<(DqSeries, DqSeries)> {
        let tone = generate_sine(f, cfg.sweep.amplitude, 0.0, n_cycle, fs)?;
        let silent = ExcitationSignal::silent(n_cycle, fs);
        let (exc_d, exc_q, axis_tag) = match axis {
            InjectionAxis::Direct => (tone, silent, 0u64),
            InjectionAxis::Quadrature => (silent, tone, 1u64),
        };
        // A distinct, reproducible noise stream per experiment: offset the
        // base seed by the (snapped) frequency bits and the injection axis.
        let noise = NoiseConfig {
            variance: cfg.noise.variance,
            seed: cfg.noise.seed.wrapping_add(f.to_bits()).wrapping_add(axis_tag),
        };
        let rec = simulate_experiment(
            &grid,
            &exc_d,
            &exc_q,
            cfg.sweep.cycle_s,
            fs,
            cfg.oversample,
            &noise,
            &op,
            cfg.lead_in_s,
        )?;
        let onset = rec.excitation_meta.onset_sample;
        let (v, i) = small_signal_dq(&rec, 0..onset)?;
        let len = v.len();
        Ok((v.slice(onset..len)?, i.slice(onset..len)?))
    };

    frequency_sweep_identify(&plan, fs, runner).context("frequency sweep")
}

/// Runs the sequential-perturbation baseline: two independent broadband
/// experiments combined by the two-experiment Welch estimator.
pub fn run_seqpert(cfg: &ExperimentConfig) -> Result<FrequencyResponse> {
    let grid = build_grid(cfg)?;
    let off = cfg.seqpert.second_record_seed_offset;
    let rec1 = simulate_record(cfg, &grid, cfg.excitation.seed_d, cfg.excitation.seed_q, cfg.noise.seed)?;
    let rec2 = simulate_record(
        cfg,
        &grid,
        cfg.excitation.seed_d.wrapping_add(off),
        cfg.excitation.seed_q.wrapping_add(off),
        cfg.noise.seed.wrapping_add(off),
    )?;
    let spec = WelchSpec { segments: cfg.seqpert.welch_segments };
    wideband_fft_identify(&rec1, &rec2, &spec).context("sequential wideband estimation")
}

/// Output of the full method comparison.
pub struct CompareOutcome {
    pub parametric: ParametricModels,
    pub sweep: FrequencyResponse,
    pub seqpert: FrequencyResponse,
    pub report: ComparisonReport,
}

/// Runs every identification method on the configured grid and scores each
/// against the analytic impedance over the evaluation band.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<CompareOutcome> {
    let parametric = run_parametric(cfg)?;
    let sweep = run_sweep(cfg)?;
    let seqpert = run_seqpert(cfg)?;
    let truth = build_grid(cfg)?;
    let entries = [
        ReportEntry {
            name: METHOD_ARX.to_string(),
            model_type: ModelType::Parametric,
            response: &parametric.arx_response,
        },
        ReportEntry {
            name: METHOD_SUBSPACE.to_string(),
            model_type: ModelType::Parametric,
            response: &parametric.subspace_response,
        },
        ReportEntry {
            name: METHOD_SWEEP.to_string(),
            model_type: ModelType::Nonparametric,
            response: &sweep,
        },
        ReportEntry {
            name: METHOD_SEQPERT.to_string(),
            model_type: ModelType::Nonparametric,
            response: &seqpert,
        },
    ];
    let report = comparison_report(&entries, &truth, (cfg.band_hz[0], cfg.band_hz[1]))
        .context("comparison report")?;
    Ok(CompareOutcome { parametric, sweep, seqpert, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A configuration small enough for unit tests: short records, a coarse
    /// sweep, and reduced model orders.
    pub(crate) fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::reference();
        cfg.duration_s = 2.0;
        cfg.lead_in_s = 0.1;
        cfg.oversample = 4;
        cfg.identification.arx_na = 6;
        cfg.identification.arx_nb = 6;
        cfg.identification.model_order = 12;
        cfg.identification.block_rows = 20;
        cfg.sweep.points = 3;
        cfg.sweep.f_min_hz = 10.0;
        cfg.sweep.f_max_hz = 400.0;
        cfg.sweep.settle_s = 0.3;
        cfg.sweep.cycle_s = 1.5;
        cfg.bode.points = 25;
        cfg.validate().expect("small config must stay valid");
        cfg
    }

    #[test]
    fn parametric_pipeline_attaches_exact_counters() {
        let cfg = small_config();
        let out = run_parametric(&cfg).unwrap();
        assert_eq!(out.metadata.experiment_cycles, 1);
        assert_eq!(out.metadata.excitation_time_s, 2.0);
        assert_eq!(out.metadata.data_points, 4 * 10_000);
        assert!(out.metadata.current_energy > 0.0);
        assert_eq!(out.arx_response.metadata, Some(out.metadata));
        assert_eq!(out.subspace_response.metadata, Some(out.metadata));
        assert_eq!(out.arx_response.len(), cfg.bode.points);
        // The identified model should land within a factor of two of the
        // analytic impedance in the upper band (a two-second record cannot
        // pin down the low-frequency resonances); this guards against wiring
        // mistakes without re-testing the estimators here.
        let freqs = bode_grid(&cfg).unwrap();
        let truth = analytic_response(&cfg, &freqs).unwrap();
        let probe = 3 * freqs.len() / 4;
        let z_est = out.arx_response.z[probe][(0, 0)];
        let z_true = truth.z[probe][(0, 0)];
        let ratio = (z_est.re * z_est.re + z_est.im * z_est.im).sqrt()
            / (z_true.re * z_true.re + z_true.im * z_true.im).sqrt();
        assert!((0.5..2.0).contains(&ratio), "upper-band |Z_dd| ratio = {ratio}");
    }

    #[test]
    fn seqpert_pipeline_counts_two_cycles() {
        let mut cfg = small_config();
        cfg.duration_s = 1.0;
        let resp = run_seqpert(&cfg).unwrap();
        let meta = resp.metadata.unwrap();
        assert_eq!(meta.experiment_cycles, 2);
        assert_eq!(meta.excitation_time_s, 2.0);
        assert_eq!(meta.data_points, 4 * 2 * 5_000);
        assert!(!resp.is_empty());
    }

    #[test]
    fn sweep_pipeline_counts_two_cycles_per_frequency() {
        let mut cfg = small_config();
        cfg.noise.variance = 0.0;
        let resp = run_sweep(&cfg).unwrap();
        let meta = resp.metadata.unwrap();
        assert_eq!(meta.experiment_cycles, 2 * 3);
        // Six experiments of 1.5 s of excitation each.
        assert_eq!(meta.excitation_time_s, 9.0);
        assert_eq!(resp.len(), 3);
    }

    #[test]
    fn sine_excitation_produces_quadrature_pair() {
        let mut cfg = small_config();
        cfg.excitation.kind = ExcitationKindCfg::Sine;
        cfg.excitation.sine_freq_hz = 25.0;
        let grid = build_grid(&cfg).unwrap();
        let rec = simulate_record(&cfg, &grid, 1, 2, 3).unwrap();
        let meta = &rec.excitation_meta;
        assert_eq!(meta.onset_sample, 500);
        assert_eq!(meta.excitation_samples, 10_000);
    }
}
