//! Command implementations behind the `aebss` binary.
//!
//! Each `cmd_*` function does the work of one subcommand: it reads its
//! inputs, writes any output files into the chosen directory, and returns
//! a serializable report that the binary prints to stdout as JSON. Errors
//! carry the process exit code: bad inputs exit 2, numerical failures
//! (divergence, ill-conditioned inversion) exit 3.
//!
//! Reports reference output files by name only, never by absolute path,
//! so that a rerun into a different directory produces byte-identical
//! stdout. Timing diagnostics go to the log (stderr), not the report,
//! for the same reason.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use aebss_core::fir::FilterMatrix;
use aebss_core::ica::{run_ica, IcaConfig};
use aebss_core::io;
use aebss_core::locator::{build_prototypes, grnn_locate, BandGeometry, LocateFlag, PrototypeSet};
use aebss_core::signal::{cross_correlation, remove_mean, MultichannelRecord};
use aebss_core::synth::Scenario;
use aebss_core::tdoa::{delay_from_ccf, delays_from_mixing, DelayEstimate};
use serde::{Deserialize, Serialize};

/// Default grid step between prototype positions, in meters.
pub const DEFAULT_PROTOTYPE_SPACING_M: f64 = 0.1;

/// A command failure, tagged with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad or missing input: exit code 2.
    Input(String),
    /// The numerics gave up (divergence, singular inversion): exit code 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Numeric(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<aebss_core::Error> for CliError {
    fn from(err: aebss_core::Error) -> Self {
        match &err {
            aebss_core::Error::Divergence { .. } => {
                CliError::Numeric(format!("{err}; try lowering the learning rate"))
            }
            aebss_core::Error::IllConditioned { .. } => {
                CliError::Numeric(format!("{err}; try a larger ridge parameter"))
            }
            _ => CliError::Input(err.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Prefix an error with the pipeline stage it came from.
fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|err| match err {
        CliError::Input(msg) => CliError::Input(format!("{name}: {msg}")),
        CliError::Numeric(msg) => CliError::Numeric(format!("{name}: {msg}")),
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|err| CliError::Input(format!("cannot create {}: {err}", dir.display())))
}

/// Load a record from either the JSON-header format or a CSV file (one
/// column per channel). CSV carries no sample rate, so the caller must
/// supply one for that path.
fn load_record_any(path: &Path, csv_sample_rate: Option<f64>) -> Result<MultichannelRecord> {
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    if is_csv {
        let rate = csv_sample_rate.ok_or_else(|| {
            CliError::Input(
                "a CSV record carries no sample rate; pass --geometry so one is known".into(),
            )
        })?;
        Ok(io::load_record_csv(path, rate)?)
    } else {
        Ok(io::load_record(path)?)
    }
}

// ---------------------------------------------------------------------------
// synth

/// What `synth` writes and the ground truth it produced.
#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub record_file: String,
    pub sources_file: String,
    pub truth_file: String,
    pub n_channels: usize,
    pub length: usize,
    pub sample_rate_hz: f64,
    pub true_positions_m: Vec<f64>,
    pub true_delays_samples: Vec<i64>,
}

/// Synthesize a scenario: write the sensor record, the clean sources and
/// the ground truth into `out_dir`.
pub fn cmd_synth(scenario_path: &Path, seed: u64, out_dir: &Path) -> Result<SynthReport> {
    let scenario: Scenario = io::load_json(scenario_path)?;
    let started = Instant::now();
    let run = scenario.synthesize(seed)?;
    log::info!("synthesis took {:.2} s", started.elapsed().as_secs_f64());

    ensure_dir(out_dir)?;
    io::save_record(&run.record, &out_dir.join("record.json"))?;
    let clean = MultichannelRecord::from_series(run.sources.clone())?;
    io::save_record(&clean, &out_dir.join("sources.json"))?;
    io::save_json(&run.truth, &out_dir.join("truth.json"))?;

    Ok(SynthReport {
        record_file: "record.json".into(),
        sources_file: "sources.json".into(),
        truth_file: "truth.json".into(),
        n_channels: run.record.n_channels(),
        length: run.record.len(),
        sample_rate_hz: run.record.sample_rate,
        true_positions_m: run.truth.true_positions_m.clone(),
        true_delays_samples: run.truth.true_delays_samples.clone(),
    })
}

// ---------------------------------------------------------------------------
// ccf

/// Cross-correlation delay estimate plus the single location it implies.
#[derive(Debug, Clone, Serialize)]
pub struct CcfReport {
    pub delay: DelayEstimate,
    pub coordinate_m: f64,
    pub flags: Vec<LocateFlag>,
    pub max_lag: usize,
    pub correlation_files: Vec<String>,
}

/// Estimate one inter-sensor delay by cross-correlation, locate it on the
/// band, and dump the four correlation functions as plot-ready CSVs.
pub fn cmd_ccf(
    record_path: &Path,
    geometry_path: &Path,
    prototype_spacing_m: f64,
    sigma_s: Option<f64>,
    out_dir: &Path,
) -> Result<CcfReport> {
    let geometry: BandGeometry = io::load_json(geometry_path)?;
    let record = load_record_any(record_path, Some(geometry.sample_rate_hz))?;
    if record.n_channels() != 2 {
        return Err(CliError::Input(format!(
            "cross-correlation needs a 2-channel record, got {} channels",
            record.n_channels()
        )));
    }

    let max_lag = geometry.max_delay_samples();
    ensure_dir(out_dir)?;
    let a = remove_mean(&record.series(0));
    let b = remove_mean(&record.series(1));
    let pairs = [
        ("r11.csv", &a, &a),
        ("r22.csv", &b, &b),
        ("r12.csv", &a, &b),
        ("r21.csv", &b, &a),
    ];
    let mut correlation_files = Vec::new();
    for (name, x, y) in pairs {
        let ccf = cross_correlation(x, y, max_lag)?;
        io::save_correlation_csv(&ccf, &out_dir.join(name))?;
        correlation_files.push(name.to_string());
    }

    let delay = delay_from_ccf(&record, max_lag)?;
    let prototypes = build_prototypes(&geometry, prototype_spacing_m, sigma_s)?;
    let located = grnn_locate(delay.delay_seconds, &prototypes)?;

    Ok(CcfReport {
        delay,
        coordinate_m: located.coordinate_m,
        flags: located.flags,
        max_lag,
        correlation_files,
    })
}

// ---------------------------------------------------------------------------
// separate

/// What the separation run produced and where it was written.
#[derive(Debug, Clone, Serialize)]
pub struct SeparateReport {
    pub passes_used: usize,
    pub final_update_norm: f64,
    pub bins_realigned: usize,
    pub sources_estimated: usize,
    pub delays: Vec<DelayEstimate>,
    pub unmixing_file: String,
    pub mixing_file: String,
    pub sources_file: String,
    pub convergence_file: String,
}

/// Run the separation loop on a record; write both filter matrices, the
/// estimated sources and the convergence trace.
pub fn cmd_separate(
    record_path: &Path,
    config_path: Option<&Path>,
    out_dir: &Path,
) -> Result<SeparateReport> {
    let record = load_record_any(record_path, None)?;
    let config: IcaConfig = match config_path {
        Some(path) => io::load_json(path)?,
        None => IcaConfig::default(),
    };

    let started = Instant::now();
    let result = run_ica(&record, &config)?;
    log::info!(
        "separation took {:.2} s over {} passes",
        started.elapsed().as_secs_f64(),
        result.passes_used
    );

    ensure_dir(out_dir)?;
    io::save_json(&result.unmixing_time, &out_dir.join("unmixing.json"))?;
    io::save_json(&result.mixing_time, &out_dir.join("mixing.json"))?;
    io::save_record(&result.sources_estimated, &out_dir.join("sources_estimated.json"))?;
    io::save_convergence_csv(&result.pass_norms, &out_dir.join("convergence.csv"))?;

    let delays = delays_from_mixing(&result.mixing_time, record.sample_rate)?;

    Ok(SeparateReport {
        passes_used: result.passes_used,
        final_update_norm: result.final_update_norm,
        bins_realigned: result.bins_realigned,
        sources_estimated: result.sources_estimated.n_channels(),
        delays,
        unmixing_file: "unmixing.json".into(),
        mixing_file: "mixing.json".into(),
        sources_file: "sources_estimated.json".into(),
        convergence_file: "convergence.csv".into(),
    })
}

// ---------------------------------------------------------------------------
// locate

/// A delays-only input file: per-source delays in seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelaysDocument {
    pub delays_s: Vec<f64>,
}

/// One source placed on the band.
#[derive(Debug, Clone, Serialize)]
pub struct LocatedSource {
    pub source_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_samples: Option<i64>,
    pub delay_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub coordinate_m: f64,
    pub flags: Vec<LocateFlag>,
    /// Absolute location error against ground truth; present only when
    /// the caller supplied truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_mm: Option<f64>,
}

/// Locations for every source in the input.
#[derive(Debug, Clone, Serialize)]
pub struct LocateReport {
    pub sources: Vec<LocatedSource>,
}

fn locate_delays(
    delays: &[DelayEstimate],
    prototypes: &PrototypeSet,
) -> Result<Vec<LocatedSource>> {
    delays
        .iter()
        .map(|d| {
            let located = grnn_locate(d.delay_seconds, prototypes)?;
            Ok(LocatedSource {
                source_index: d.source_index,
                delay_samples: Some(d.delay_samples),
                delay_s: d.delay_seconds,
                confidence: Some(d.confidence),
                coordinate_m: located.coordinate_m,
                flags: located.flags,
                error_mm: None,
            })
        })
        .collect()
}

/// Place sources on the band from either a mixing filter matrix or a
/// plain list of delays. Exactly one of `filters_path` / `delays_path`
/// must be given.
pub fn cmd_locate(
    filters_path: Option<&Path>,
    delays_path: Option<&Path>,
    geometry_path: &Path,
    prototype_spacing_m: f64,
    sigma_s: Option<f64>,
) -> Result<LocateReport> {
    let geometry: BandGeometry = io::load_json(geometry_path)?;
    let prototypes = build_prototypes(&geometry, prototype_spacing_m, sigma_s)?;

    let sources = match (filters_path, delays_path) {
        (Some(filters), None) => {
            let mixing: FilterMatrix = io::load_json(filters)?;
            let delays = delays_from_mixing(&mixing, geometry.sample_rate_hz)?;
            locate_delays(&delays, &prototypes)?
        }
        (None, Some(delays)) => {
            let doc: DelaysDocument = io::load_json(delays)?;
            doc.delays_s
                .iter()
                .enumerate()
                .map(|(i, &delay_s)| {
                    let located = grnn_locate(delay_s, &prototypes)?;
                    Ok(LocatedSource {
                        source_index: i,
                        delay_samples: None,
                        delay_s,
                        confidence: None,
                        coordinate_m: located.coordinate_m,
                        flags: located.flags,
                        error_mm: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => {
            return Err(CliError::Input(
                "pass exactly one of --filters or --delays".into(),
            ))
        }
    };

    Ok(LocateReport { sources })
}

// ---------------------------------------------------------------------------
// pipeline

/// Ground truth echoed into the pipeline report.
#[derive(Debug, Clone, Serialize)]
pub struct TruthSection {
    pub positions_m: Vec<f64>,
    pub delays_samples: Vec<i64>,
}

/// The cross-correlation leg of the comparison: one delay, one location.
#[derive(Debug, Clone, Serialize)]
pub struct CcfSection {
    pub delay_samples: i64,
    pub delay_s: f64,
    pub confidence: f64,
    pub coordinate_m: f64,
    pub flags: Vec<LocateFlag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_mm: Option<f64>,
}

/// The separation leg: per-source delays and locations.
#[derive(Debug, Clone, Serialize)]
pub struct IcaSection {
    pub passes_used: usize,
    pub final_update_norm: f64,
    pub bins_realigned: usize,
    pub sources: Vec<LocatedSource>,
}

/// Full synth → ccf → separate → locate comparison for one scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub scenario: Scenario,
    pub config: IcaConfig,
    pub truth: TruthSection,
    pub ccf: CcfSection,
    pub ica: IcaSection,
}

/// Absolute error in millimeters against the nearest true position.
fn error_vs_nearest_mm(coordinate_m: f64, truths: &[f64]) -> f64 {
    truths
        .iter()
        .map(|t| (coordinate_m - t).abs() * 1000.0)
        .fold(f64::INFINITY, f64::min)
}

/// Pair estimated locations with true positions by coordinate rank and
/// fill in per-source errors.
fn fill_rank_errors(sources: &mut [LocatedSource], truths: &[f64]) {
    if sources.len() != truths.len() {
        for s in sources.iter_mut() {
            s.error_mm = Some(error_vs_nearest_mm(s.coordinate_m, truths));
        }
        return;
    }
    let mut order: Vec<usize> = (0..sources.len()).collect();
    order.sort_by(|&a, &b| sources[a].coordinate_m.total_cmp(&sources[b].coordinate_m));
    let mut sorted_truth = truths.to_vec();
    sorted_truth.sort_by(f64::total_cmp);
    for (rank, &i) in order.iter().enumerate() {
        sources[i].error_mm = Some((sources[i].coordinate_m - sorted_truth[rank]).abs() * 1000.0);
    }
}

/// Run the whole comparison: synthesize the scenario, locate via plain
/// cross-correlation, then separate and locate each recovered source.
pub fn cmd_pipeline(
    scenario_path: &Path,
    config_path: Option<&Path>,
    seed: u64,
    out_dir: &Path,
) -> Result<PipelineReport> {
    let scenario: Scenario = stage("synth", io::load_json(scenario_path).map_err(CliError::from))?;
    let config: IcaConfig = match config_path {
        Some(path) => stage("separate", io::load_json(path).map_err(CliError::from))?,
        None => IcaConfig::default(),
    };

    let synth_report = stage("synth", cmd_synth(scenario_path, seed, out_dir))?;
    let record_path = out_dir.join(&synth_report.record_file);
    let geometry = scenario.geometry;

    // The ccf stage needs the geometry as a file; write it next to the rest.
    let geometry_path = out_dir.join("geometry.json");
    io::save_json(&geometry, &geometry_path)?;

    let ccf_report = stage(
        "ccf",
        cmd_ccf(
            &record_path,
            &geometry_path,
            DEFAULT_PROTOTYPE_SPACING_M,
            None,
            out_dir,
        ),
    )?;

    let separate_report = stage("separate", cmd_separate(&record_path, config_path, out_dir))?;

    let prototypes = build_prototypes(&geometry, DEFAULT_PROTOTYPE_SPACING_M, None)?;
    let mut ica_sources = stage(
        "locate",
        locate_delays(&separate_report.delays, &prototypes),
    )?;

    let truths = &synth_report.true_positions_m;
    fill_rank_errors(&mut ica_sources, truths);
    let ccf_section = CcfSection {
        delay_samples: ccf_report.delay.delay_samples,
        delay_s: ccf_report.delay.delay_seconds,
        confidence: ccf_report.delay.confidence,
        coordinate_m: ccf_report.coordinate_m,
        flags: ccf_report.flags.clone(),
        error_mm: Some(error_vs_nearest_mm(ccf_report.coordinate_m, truths)),
    };

    Ok(PipelineReport {
        seed,
        scenario,
        config,
        truth: TruthSection {
            positions_m: synth_report.true_positions_m.clone(),
            delays_samples: synth_report.true_delays_samples.clone(),
        },
        ccf: ccf_section,
        ica: IcaSection {
            passes_used: separate_report.passes_used,
            final_update_norm: separate_report.final_update_norm,
            bins_realigned: separate_report.bins_realigned,
            sources: ica_sources,
        },
    })
}
