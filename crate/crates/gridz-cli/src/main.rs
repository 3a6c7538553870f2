//! `gridz` — grid impedance identification experiments from the command
//! line.
//!
//! Exit codes: `0` success, `2` configuration/schema problem (the offending
//! field is named), `3` pipeline failure (numerical or I/O), and clap's own
//! usage errors also map to `2`.

use anyhow::Result;
use clap::{Parser, Subcommand};
use gridz::freq::{frequency_response, ResponseSource};
use gridz::gridsim::small_signal_dq;
use gridz::signals::{write_dq_csv, write_three_phase_csv};
use gridz_cli::artifact::{sha256_hex, ArtifactSet, ManifestSeeds, ModelJson, ModelProvenance};
use gridz_cli::config::{ConfigError, ExperimentConfig};
use gridz_cli::pipeline;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gridz",
    version,
    about = "Simulate three-phase grid experiments and identify the dq impedance matrix",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// Experiment configuration file (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Replace every seed in the config: direct-axis excitation takes this
    /// value, quadrature-axis this value + 1, measurement noise + 2.
    #[arg(long, global = true, value_name = "SEED")]
    seed_override: Option<u64>,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for the parallel pipelines (default: all cores).
    /// Results are bitwise independent of this setting.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one broadband experiment and write its time series.
    Simulate,
    /// Identify parametric models (ARX and subspace) from one experiment.
    Identify,
    /// Run the tone-by-tone frequency sweep baseline.
    Sweep,
    /// Run the two-experiment sequential wideband baseline.
    Seqpert,
    /// Export Bode data for the analytic impedance or a stored model.
    Bode {
        /// A model JSON written by `identify`/`compare`; the analytic grid
        /// impedance is exported when absent.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
    },
    /// Run every method and write the comparison report.
    Compare,
    /// Parse and validate a configuration file, then exit.
    Validate,
}

/// Failures split by exit code.
enum AppError {
    /// Exit 2: the configuration (or invocation) is invalid.
    Config(String),
    /// Exit 3: a pipeline failed after a valid configuration.
    Run(anyhow::Error),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.0)
    }
}

impl From<anyhow::Error> for AppError {
    fn from(e: anyhow::Error) -> Self {
        AppError::Run(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Run(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(AppError::Config("--threads must be at least 1".to_string()));
        }
        // Only the first initialization wins; a second call (e.g. in-process
        // tests) is harmless because results do not depend on the pool size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| AppError::Config("missing required flag --config <FILE>".to_string()))?;
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        AppError::Config(format!("cannot read {}: {e}", config_path.display()))
    })?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    let config_sha256 = sha256_hex(text.as_bytes());
    if let Some(seed) = cli.seed_override {
        cfg.apply_seed_override(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }

    match cli.command {
        Command::Validate => {
            println!("configuration OK: {}", config_path.display());
            Ok(())
        }
        Command::Simulate => cmd_simulate(&cfg, &config_sha256).map_err(Into::into),
        Command::Identify => cmd_identify(&cfg, &config_sha256).map_err(Into::into),
        Command::Sweep => cmd_sweep(&cfg, &config_sha256).map_err(Into::into),
        Command::Seqpert => cmd_seqpert(&cfg, &config_sha256).map_err(Into::into),
        Command::Bode { model } => cmd_bode(&cfg, &config_sha256, model.as_deref()).map_err(Into::into),
        Command::Compare => cmd_compare(&cfg, &config_sha256).map_err(Into::into),
    }
}

fn manifest_seeds(cfg: &ExperimentConfig) -> ManifestSeeds {
    ManifestSeeds {
        excitation_d: cfg.excitation.seed_d,
        excitation_q: cfg.excitation.seed_q,
        noise: cfg.noise.seed,
    }
}

fn provenance(cfg: &ExperimentConfig, config_sha256: &str) -> ModelProvenance {
    ModelProvenance {
        config_sha256: config_sha256.to_string(),
        seed_d: cfg.excitation.seed_d,
        seed_q: cfg.excitation.seed_q,
        noise_seed: cfg.noise.seed,
    }
}

fn artifact_set(cfg: &ExperimentConfig, config_sha256: &str) -> Result<ArtifactSet> {
    ArtifactSet::create(Path::new(&cfg.output_dir), config_sha256.to_string(), manifest_seeds(cfg))
}

/// Writes the raw three-phase records and the offset-removed dq series of
/// one measurement record.
fn write_time_series(
    set: &mut ArtifactSet,
    rec: &gridz::MeasurementRecord,
) -> Result<()> {
    set.write_with("v_abc.csv", |p| write_three_phase_csv(p, &rec.v_abc))?;
    set.write_with("i_abc.csv", |p| write_three_phase_csv(p, &rec.i_abc))?;
    let onset = rec.excitation_meta.onset_sample;
    let (v_dq, i_dq) = small_signal_dq(rec, 0..onset)?;
    set.write_with("v_dq.csv", |p| write_dq_csv(p, &v_dq))?;
    set.write_with("i_dq.csv", |p| write_dq_csv(p, &i_dq))?;
    Ok(())
}

fn finish(set: ArtifactSet) -> Result<()> {
    let dir = set.dir().to_path_buf();
    let manifest = set.finish()?;
    println!("wrote {} artifacts + manifest.json to {}", manifest.artifacts.len(), dir.display());
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig, config_sha256: &str) -> Result<()> {
    let grid = pipeline::build_grid(cfg)?;
    let rec = pipeline::simulate_record(
        cfg,
        &grid,
        cfg.excitation.seed_d,
        cfg.excitation.seed_q,
        cfg.noise.seed,
    )?;
    let mut set = artifact_set(cfg, config_sha256)?;
    write_time_series(&mut set, &rec)?;
    finish(set)
}

fn cmd_identify(cfg: &ExperimentConfig, config_sha256: &str) -> Result<()> {
    let out = pipeline::run_parametric(cfg)?;
    let mut set = artifact_set(cfg, config_sha256)?;
    write_time_series(&mut set, &out.record)?;
    let prov = provenance(cfg, config_sha256);
    let arx_json = ModelJson::from_arx(&out.arx, &out.arx_continuous, out.arx_d2c_used, prov.clone());
    set.write("arx_model.json", arx_json.to_json()?.as_bytes())?;
    let sub_json =
        ModelJson::from_subspace(&out.subspace, &out.subspace_continuous, out.subspace_d2c_used, prov);
    set.write("subspace_model.json", sub_json.to_json()?.as_bytes())?;
    set.write_with("arx_response.csv", |p| out.arx_response.write_csv(p))?;
    set.write_with("subspace_response.csv", |p| out.subspace_response.write_csv(p))?;
    println!(
        "ARX ({}, {}) -> {} continuous states via {}; subspace order {} -> {} states via {}",
        cfg.identification.arx_na,
        cfg.identification.arx_nb,
        out.arx_continuous.n_states(),
        out.arx_d2c_used,
        cfg.identification.model_order,
        out.subspace_continuous.n_states(),
        out.subspace_d2c_used,
    );
    if out.subspace.order_gap_warning {
        println!("note: weak singular-value gap at the requested subspace order");
    }
    if out.subspace.unstable {
        println!("note: subspace estimate is unstable (spectral radius > 1)");
    }
    finish(set)
}

fn cmd_sweep(cfg: &ExperimentConfig, config_sha256: &str) -> Result<()> {
    let resp = pipeline::run_sweep(cfg)?;
    let mut set = artifact_set(cfg, config_sha256)?;
    set.write_with("sweep_response.csv", |p| resp.write_csv(p))?;
    if let Some(meta) = &resp.metadata {
        println!(
            "sweep: {} frequencies, {} experiments, {:.1} s of excitation",
            resp.len(),
            meta.experiment_cycles,
            meta.excitation_time_s
        );
    }
    finish(set)
}

fn cmd_seqpert(cfg: &ExperimentConfig, config_sha256: &str) -> Result<()> {
    let resp = pipeline::run_seqpert(cfg)?;
    let mut set = artifact_set(cfg, config_sha256)?;
    set.write_with("seqpert_response.csv", |p| resp.write_csv(p))?;
    if let Some(meta) = &resp.metadata {
        println!(
            "sequential wideband: {} usable bins from {} experiments",
            resp.len(),
            meta.experiment_cycles
        );
    }
    finish(set)
}

fn cmd_bode(cfg: &ExperimentConfig, config_sha256: &str, model: Option<&Path>) -> Result<()> {
    let freqs = pipeline::bode_grid(cfg)?;
    let (name, resp) = match model {
        None => ("analytic_response.csv", pipeline::analytic_response(cfg, &freqs)?),
        Some(path) => {
            let stored = ModelJson::load(path)?;
            let source = match stored.kind.as_str() {
                "arx" => ResponseSource::Arx,
                "subspace" => ResponseSource::Subspace,
                other => anyhow::bail!("unknown model kind `{other}` in {}", path.display()),
            };
            let ss = stored.continuous_model.to_continuous()?;
            ("model_response.csv", frequency_response(&ss, &freqs, source)?)
        }
    };
    let mut set = artifact_set(cfg, config_sha256)?;
    set.write_with(name, |p| resp.write_csv(p))?;
    println!("exported {} points over [{}, {}] Hz", freqs.len(), cfg.bode.f_min_hz, cfg.bode.f_max_hz);
    finish(set)
}

fn cmd_compare(cfg: &ExperimentConfig, config_sha256: &str) -> Result<()> {
    let outcome = pipeline::run_compare(cfg)?;
    let mut set = artifact_set(cfg, config_sha256)?;

    let prov = provenance(cfg, config_sha256);
    let p = &outcome.parametric;
    let arx_json = ModelJson::from_arx(&p.arx, &p.arx_continuous, p.arx_d2c_used, prov.clone());
    set.write("arx_model.json", arx_json.to_json()?.as_bytes())?;
    let sub_json = ModelJson::from_subspace(&p.subspace, &p.subspace_continuous, p.subspace_d2c_used, prov);
    set.write("subspace_model.json", sub_json.to_json()?.as_bytes())?;

    set.write_with("arx_response.csv", |f| p.arx_response.write_csv(f))?;
    set.write_with("subspace_response.csv", |f| p.subspace_response.write_csv(f))?;
    set.write_with("sweep_response.csv", |f| outcome.sweep.write_csv(f))?;
    set.write_with("seqpert_response.csv", |f| outcome.seqpert.write_csv(f))?;
    let freqs = pipeline::bode_grid(cfg)?;
    let truth = pipeline::analytic_response(cfg, &freqs)?;
    set.write_with("analytic_response.csv", |f| truth.write_csv(f))?;

    let table = outcome.report.text_table();
    set.write("report.json", outcome.report.to_json()?.as_bytes())?;
    set.write("report.txt", table.as_bytes())?;
    print!("{table}");
    finish(set)
}
