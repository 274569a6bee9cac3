//! `biphoton` — two-photon polarization tomography from the command line.
//!
//! Each subcommand wraps one stage of the analysis (reconstruction, metrics,
//! Monte-Carlo error bars, background subtraction, correlation curves, count
//! normalization, synthesis, curve fitting); `reproduce-paper` runs the whole
//! chain against the bundled reference data set and checks every pinned
//! number. All file formats are the JSON/CSV schemas of the library's io
//! module, reports go to stdout unless `--output` says otherwise, and every
//! random choice flows from an explicit `--seed`, so identical invocations
//! produce byte-identical reports.

mod errors;
mod reproduce;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use biphoton::counts::{
    correlations_from_counts, normalize_complete, normalize_pairwise, synthesize_counts,
    PairwiseGrouping, SynthesisConfig,
};
use biphoton::fitstats::{fit_constant, fit_sinusoid};
use biphoton::io::{
    parse_counts, parse_density_matrix, parse_measurements, read_points_csv, write_xy_csv,
    CountsJson, DensityMatrixJson,
};
use biphoton::mcerr::{
    background_ensemble, build_ensemble, ensemble_statistics, subtract_background, Metric,
    DEFAULT_ENSEMBLE_SIZE,
};
use biphoton::metrics::{degree_of_correlation, MetricsReport, DEFAULT_DOP_THRESHOLD};
use biphoton::qstate::eigen::hermitian_eigenvalues;
use biphoton::tomo::{linear_inversion, max_likelihood, MLConfig, MeasurementSet};

use errors::AppError;

/// Background fraction of the bundled reference analysis.
const REFERENCE_BACKGROUND: f64 = biphoton::fixtures::BACKGROUND_FRACTION;

#[derive(Parser)]
#[command(
    name = "biphoton",
    version,
    about = "Two-photon polarization tomography and entanglement verification",
    long_about = "Reconstructs two-qubit polarization states from coincidence data and \
                  quantifies their entanglement. Defaults (5000 Monte-Carlo samples, \
                  background fraction 0.49, polarization threshold 0.01) match the \
                  bundled reference data set; see `reproduce-paper`."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct a density matrix from measured probabilities.
    Reconstruct(ReconstructArgs),
    /// Entanglement and polarization metrics of a density matrix.
    Metrics(MetricsArgs),
    /// Monte-Carlo uncertainty propagation over the reconstruction.
    Mc(McArgs),
    /// Remove an unpolarized background admixture from a state.
    Subtract(SubtractArgs),
    /// Degree-of-correlation curve over the linear analyzer angle.
    Correlation(CorrelationArgs),
    /// Counts to probabilities to reconstruction to metrics, in one pass.
    Pipeline(PipelineArgs),
    /// Generate synthetic coincidence counts for a known state.
    Synth(SynthArgs),
    /// Weighted least-squares fit of correlation data points.
    Fit(FitArgs),
    /// Verify every pinned number of the bundled reference analysis.
    #[command(name = "reproduce-paper")]
    ReproducePaper(ReproduceArgs),
}

#[derive(Args)]
struct ReconstructArgs {
    /// Measurement JSON: {"measurements":[{"setting","p","sigma"},...]}.
    input: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Density-matrix JSON: {"basis","re","im"}.
    input: PathBuf,
    /// Marginals count as unpolarized below this degree of polarization.
    #[arg(long, default_value_t = DEFAULT_DOP_THRESHOLD)]
    dop_threshold: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    /// Measurement JSON: {"measurements":[{"setting","p","sigma"},...]}.
    input: PathBuf,
    /// Ensemble size (the reference analysis uses 5000).
    #[arg(long, default_value_t = DEFAULT_ENSEMBLE_SIZE)]
    samples: usize,
    /// Seed for all resampling draws.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Subtract this unpolarized background fraction from each member,
    /// rejecting unphysical draws; the bare flag uses the reference
    /// fraction 0.49.
    #[arg(long, value_name = "FRACTION", num_args = 0..=1, default_missing_value = "0.49")]
    background: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SubtractArgs {
    /// Density-matrix JSON: {"basis","re","im"}.
    input: PathBuf,
    /// Unpolarized background fraction to remove (reference value 0.49).
    #[arg(long, default_value_t = REFERENCE_BACKGROUND)]
    fraction: f64,
    /// Write the subtracted matrix here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelationArgs {
    /// Density-matrix JSON: {"basis","re","im"}.
    input: PathBuf,
    /// Number of evenly spaced angles across [0, pi].
    #[arg(long, default_value_t = 181)]
    points: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Counts JSON: {"records":[{"setting","coincidences","accidental_total","peaks"},...]}.
    input: PathBuf,
    /// How to turn correlation values into probabilities.
    #[arg(long, value_enum)]
    normalization: NormalizationMode,
    /// Marginals count as unpolarized below this degree of polarization.
    #[arg(long, default_value_t = DEFAULT_DOP_THRESHOLD)]
    dop_threshold: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Density-matrix JSON for the source state.
    input: PathBuf,
    /// Expected pair detections per setting.
    #[arg(long, default_value_t = 100_000)]
    pairs: u64,
    /// Unpolarized background fraction mixed into the source.
    #[arg(long, default_value_t = 0.0)]
    background: f64,
    /// Expected accidental counts per histogram peak.
    #[arg(long, default_value_t = 50.0)]
    accidental_level: f64,
    /// Number of adjacent peaks recorded per setting.
    #[arg(long, default_value_t = 100)]
    peaks: u32,
    /// Seed for the count draws.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the counts JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Points CSV with header theta_rad,y,sigma.
    input: PathBuf,
    /// Model to fit.
    #[arg(long, value_enum)]
    model: FitModel,
    /// Sinusoid period (required for the sinusoid model).
    #[arg(long, required_if_eq("model", "sinusoid"))]
    period: Option<f64>,
    /// Write the fit report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Seed for every random stage of the suite.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Monte-Carlo ensemble size (the reference analysis uses 5000).
    #[arg(long, default_value_t = DEFAULT_ENSEMBLE_SIZE)]
    samples: usize,
    /// Also write the full report as JSON here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NormalizationMode {
    /// Each orthogonal pair of settings is forced to sum to 1/2.
    Pairwise,
    /// Each complete analyzer quadruple is forced to sum to 1.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitModel {
    Constant,
    Sinusoid,
}

/// How far the unconstrained least-squares estimate sat from physicality and
/// from the final fit; a large gap means the data pushed hard against the
/// boundary of the physical set.
#[derive(Serialize)]
struct LinearInversionDiagnostic {
    min_eigenvalue: f64,
    max_deviation_from_ml: f64,
}

#[derive(Serialize)]
struct ReconstructionReport {
    rho: DensityMatrixJson,
    iterations: usize,
    objective: f64,
    converged: bool,
    linear_inversion: LinearInversionDiagnostic,
}

#[derive(Serialize)]
struct PipelineReport {
    normalization: NormalizationMode,
    probabilities: Vec<biphoton::tomo::ProbabilityRecord>,
    reconstruction: ReconstructionReport,
    metrics: MetricsReport,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            let payload = serde_json::json!({
                "error": { "kind": err.kind, "message": err.message }
            });
            eprintln!("{payload}");
            ExitCode::from(err.code)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, AppError> {
    match command {
        Command::Reconstruct(args) => reconstruct_cmd(args),
        Command::Metrics(args) => metrics_cmd(args),
        Command::Mc(args) => mc_cmd(args),
        Command::Subtract(args) => subtract_cmd(args),
        Command::Correlation(args) => correlation_cmd(args),
        Command::Pipeline(args) => pipeline_cmd(args),
        Command::Synth(args) => synth_cmd(args),
        Command::Fit(args) => fit_cmd(args),
        Command::ReproducePaper(args) => reproduce_cmd(args),
    }
}

fn read_input(path: &Path) -> Result<String, AppError> {
    fs::read_to_string(path).map_err(|e| AppError::file(path, e))
}

fn emit(output: Option<&Path>, text: &str) -> Result<ExitCode, AppError> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| AppError::file(path, e))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn emit_json<T: Serialize>(output: Option<&Path>, report: &T) -> Result<ExitCode, AppError> {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
    text.push('\n');
    emit(output, &text)
}

/// Shared by `reconstruct` and `pipeline`: fit plus the initializer
/// diagnostic.
fn reconstruct_report(ms: &MeasurementSet) -> Result<ReconstructionReport, AppError> {
    let inversion = linear_inversion(ms)?;
    let fit = max_likelihood(ms, &MLConfig::default())?;
    Ok(ReconstructionReport {
        linear_inversion: LinearInversionDiagnostic {
            min_eigenvalue: hermitian_eigenvalues(&inversion)[0],
            max_deviation_from_ml: fit.rho.matrix().max_abs_diff(&inversion),
        },
        rho: DensityMatrixJson::from_state(&fit.rho),
        iterations: fit.iterations,
        objective: fit.objective,
        converged: fit.converged,
    })
}

fn reconstruct_cmd(args: ReconstructArgs) -> Result<ExitCode, AppError> {
    let ms = parse_measurements(&read_input(&args.input)?)?;
    let report = reconstruct_report(&ms)?;
    emit_json(args.output.as_deref(), &report)
}

fn metrics_cmd(args: MetricsArgs) -> Result<ExitCode, AppError> {
    let rho = parse_density_matrix(&read_input(&args.input)?)?;
    let report = MetricsReport::from_state(&rho, args.dop_threshold)?;
    emit_json(args.output.as_deref(), &report)
}

fn mc_cmd(args: McArgs) -> Result<ExitCode, AppError> {
    let ms = parse_measurements(&read_input(&args.input)?)?;
    let config = MLConfig::default();
    let ensemble = match args.background {
        Some(fraction) => background_ensemble(&ms, &config, fraction, args.samples, args.seed)?,
        None => build_ensemble(&ms, &config, args.samples, args.seed)?,
    };
    let stats = ensemble_statistics(&ensemble, &Metric::ALL)?;
    emit_json(args.output.as_deref(), &stats)
}

fn subtract_cmd(args: SubtractArgs) -> Result<ExitCode, AppError> {
    let rho = parse_density_matrix(&read_input(&args.input)?)?;
    let subtracted = subtract_background(&rho, args.fraction)?;
    emit_json(
        args.output.as_deref(),
        &DensityMatrixJson::from_state(&subtracted),
    )
}

fn correlation_cmd(args: CorrelationArgs) -> Result<ExitCode, AppError> {
    if args.points < 2 {
        return Err(AppError::usage(format!(
            "--points = {} must be at least 2 to span [0, pi]",
            args.points
        )));
    }
    let rho = parse_density_matrix(&read_input(&args.input)?)?;
    let mut rows = Vec::with_capacity(args.points);
    for i in 0..args.points {
        let theta = i as f64 * std::f64::consts::PI / (args.points - 1) as f64;
        rows.push((theta, degree_of_correlation(&rho, theta)?));
    }
    emit(
        args.output.as_deref(),
        &write_xy_csv(["theta", "correlation"], &rows),
    )
}

fn pipeline_cmd(args: PipelineArgs) -> Result<ExitCode, AppError> {
    let records = parse_counts(&read_input(&args.input)?)?;
    let g2 = correlations_from_counts(&records)?;
    let probabilities = match args.normalization {
        NormalizationMode::Pairwise => normalize_pairwise(&g2, &PairwiseGrouping::canonical())?,
        NormalizationMode::Complete => normalize_complete(&g2)?,
    };
    let ms = MeasurementSet::new(probabilities.clone())?;
    let reconstruction = reconstruct_report(&ms)?;
    let metrics = MetricsReport::from_state(&reconstruction_state(&reconstruction)?, args.dop_threshold)?;
    let report = PipelineReport {
        normalization: args.normalization,
        probabilities,
        reconstruction,
        metrics,
    };
    emit_json(args.output.as_deref(), &report)
}

/// The reconstruction report stores the state in wire form; convert it back
/// for the metrics pass.
fn reconstruction_state(report: &ReconstructionReport) -> Result<biphoton::DensityMatrix, AppError> {
    Ok(report.rho.to_state()?)
}

fn synth_cmd(args: SynthArgs) -> Result<ExitCode, AppError> {
    let rho = parse_density_matrix(&read_input(&args.input)?)?;
    let config = SynthesisConfig {
        pairs_per_setting: args.pairs,
        background_fraction: args.background,
        accidental_level: args.accidental_level,
        peaks: args.peaks,
    };
    let records = synthesize_counts(&rho, &config, args.seed)?;
    emit_json(args.output.as_deref(), &CountsJson { records })
}

fn fit_cmd(args: FitArgs) -> Result<ExitCode, AppError> {
    let points = read_points_csv(&read_input(&args.input)?)?;
    let result = match args.model {
        FitModel::Constant => fit_constant(&points)?,
        FitModel::Sinusoid => {
            let period = args.period.expect("clap enforces --period for sinusoid");
            fit_sinusoid(&points, period)?
        }
    };
    emit_json(args.output.as_deref(), &result)
}

fn reproduce_cmd(args: ReproduceArgs) -> Result<ExitCode, AppError> {
    if args.samples == 0 {
        return Err(AppError::usage("--samples must be at least 1"));
    }
    let report = reproduce::run(args.seed, args.samples)?;
    print!("{}", reproduce::render_table(&report));
    if let Some(path) = args.output.as_deref() {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        fs::write(path, &text).map_err(|e| AppError::file(path, e))?;
    }
    Ok(if report.all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
