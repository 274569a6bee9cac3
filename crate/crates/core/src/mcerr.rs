//! Monte-Carlo propagation of measurement uncertainty into derived metrics.
//!
//! Nonlinear maps — reconstruction, concurrence, partial-transpose spectra —
//! have no closed-form error propagation worth trusting, so uncertainties are
//! estimated by brute force: resample every probability from a Gaussian with
//! its quoted sigma, reconstruct a state from each resampled dataset, and
//! read the spread of any metric across the resulting ensemble.
//!
//! A second ensemble type models background subtraction. The point estimate
//! `(rho - f I/4) / (1 - f)` removes an unpolarized background fraction `f`,
//! but applied to resampled reconstructions it can produce unphysical
//! matrices; those draws are rejected and sampling continues until the
//! ensemble is full, mirroring how subtracted uncertainties are quoted in
//! practice.
//!
//! Members are reconstructed in parallel, but every member owns an RNG
//! substream keyed by its attempt index, so results are byte-identical
//! across thread counts and repeat runs.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::metrics::{MetricsError, MetricsReport, DEFAULT_DOP_THRESHOLD};
use crate::qstate::random::substream;
use crate::qstate::{ComplexMatrix, DensityMatrix};
use crate::tomo::{max_likelihood, MLConfig, MeasurementSet, ProbabilityRecord, TomoError};

/// Ensemble size used for published-style uncertainty estimates.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 5000;

/// Attempts allowed per requested member before rejection sampling gives up.
pub const REJECTION_BUDGET_FACTOR: usize = 100;

/// Subtracted matrices may dip this far below zero and still count as
/// physical; anything lower is rejected.
const PHYSICAL_TOLERANCE: f64 = 1e-10;

/// Attempts are dispatched to the thread pool in blocks of this size, then
/// accepted in index order so the ensemble does not depend on scheduling.
const ATTEMPT_CHUNK: usize = 64;

/// Substream tag for resampled datasets. Both ensemble types share it: the
/// background variant is the plain one plus a subtraction filter, and with
/// fraction 0 the two must coincide member for member.
const RESAMPLE_STREAM_TAG: u64 = 0x726573616d70; // "resamp"

#[derive(Debug, Error)]
pub enum McError {
    #[error("background subtraction left eigenvalue {min_eigenvalue}; the state is unphysical")]
    NonPhysical { min_eigenvalue: f64 },
    #[error(
        "rejection sampling exhausted {examined} attempts with only {accepted} physical members"
    )]
    RejectionBudgetExhausted { examined: usize, accepted: usize },
    #[error("invalid parameter: {0}")]
    BadParameters(String),
    #[error("statistics need at least one ensemble member")]
    EmptyEnsemble,
    #[error("ensemble member {index} failed: {source}")]
    Member { index: u64, source: TomoError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// One reconstructed ensemble member, tagged with the attempt index that
/// seeded it.
#[derive(Debug, Clone)]
pub struct MemberFit {
    pub index: u64,
    pub rho: DensityMatrix,
}

/// A set of reconstructions drawn from the same measurement noise model.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub members: Vec<MemberFit>,
    pub seed: u64,
    /// Attempts discarded as unphysical (zero for plain resampling).
    pub rejected: usize,
}

/// Draws one synthetic dataset: each probability is resampled from
/// N(p, sigma^2). Values are deliberately not clamped to [0, 1] — the
/// reconstruction is what enforces physicality, exactly as it does for the
/// real data.
pub fn sample_dataset(ms: &MeasurementSet, rng: &mut impl Rng) -> MeasurementSet {
    let records = ms
        .records()
        .iter()
        .map(|r| ProbabilityRecord {
            setting: r.setting,
            p: r.p + r.sigma * rng.sample::<f64, _>(StandardNormal),
            sigma: r.sigma,
        })
        .collect();
    MeasurementSet::new(records).expect("resampling preserves settings and finite sigmas")
}

/// Removes an unpolarized background admixture:
/// (rho - fraction I/4) / (1 - fraction). Errors if the result dips below
/// zero by more than the physical tolerance; smaller dips are accepted and
/// validated away by the density-matrix constructor.
pub fn subtract_background(
    rho: &DensityMatrix,
    fraction: f64,
) -> Result<DensityMatrix, McError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(McError::BadParameters(format!(
            "background fraction = {fraction} must lie in [0, 1)"
        )));
    }
    if rho.dim() != 4 {
        return Err(McError::BadParameters(format!(
            "background subtraction needs a two-photon state, got dimension {}",
            rho.dim()
        )));
    }
    let shifted = rho
        .matrix()
        .add(&ComplexMatrix::identity(4).scale_re(-fraction / 4.0))
        .scale_re(1.0 / (1.0 - fraction));
    let min_eigenvalue = crate::qstate::eigen::hermitian_eigenvalues(&shifted)[0];
    if min_eigenvalue < -PHYSICAL_TOLERANCE {
        return Err(McError::NonPhysical { min_eigenvalue });
    }
    Ok(DensityMatrix::with_tolerance(shifted, PHYSICAL_TOLERANCE)
        .expect("shift preserves hermiticity and trace; positivity just checked"))
}

fn fit_resampled(
    ms: &MeasurementSet,
    config: &MLConfig,
    seed: u64,
    tag: u64,
    index: u64,
) -> Result<DensityMatrix, TomoError> {
    let mut rng = substream(seed, tag, index);
    let sampled = sample_dataset(ms, &mut rng);
    max_likelihood(&sampled, config).map(|fit| fit.rho)
}

/// Reconstructs `size` states from independently resampled datasets.
pub fn build_ensemble(
    ms: &MeasurementSet,
    config: &MLConfig,
    size: usize,
    seed: u64,
) -> Result<Ensemble, McError> {
    if size == 0 {
        return Err(McError::BadParameters("ensemble size must be positive".into()));
    }
    let members = (0..size as u64)
        .into_par_iter()
        .map(|index| {
            fit_resampled(ms, config, seed, RESAMPLE_STREAM_TAG, index)
                .map(|rho| MemberFit { index, rho })
                .map_err(|source| McError::Member { index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ensemble {
        members,
        seed,
        rejected: 0,
    })
}

/// Builds an ensemble of background-subtracted states by rejection: each
/// attempt resamples the data, reconstructs, subtracts, and keeps the result
/// only if it stayed physical. Attempts are consumed in index order until
/// `size` members are accepted; the budget caps the total number of attempts
/// at REJECTION_BUDGET_FACTOR * size.
pub fn background_ensemble(
    ms: &MeasurementSet,
    config: &MLConfig,
    fraction: f64,
    size: usize,
    seed: u64,
) -> Result<Ensemble, McError> {
    if size == 0 {
        return Err(McError::BadParameters("ensemble size must be positive".into()));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(McError::BadParameters(format!(
            "background fraction = {fraction} must lie in [0, 1)"
        )));
    }
    let budget = REJECTION_BUDGET_FACTOR * size;
    let mut members = Vec::with_capacity(size);
    let mut examined = 0usize;
    let mut next_index = 0u64;
    while members.len() < size {
        if examined >= budget {
            return Err(McError::RejectionBudgetExhausted {
                examined,
                accepted: members.len(),
            });
        }
        let chunk = ATTEMPT_CHUNK.min(budget - examined);
        let attempts: Vec<(u64, Result<Option<DensityMatrix>, TomoError>)> = (0..chunk as u64)
            .into_par_iter()
            .map(|offset| {
                let index = next_index + offset;
                let outcome =
                    fit_resampled(ms, config, seed, RESAMPLE_STREAM_TAG, index).map(|rho| {
                        subtract_background(&rho, fraction).ok()
                    });
                (index, outcome)
            })
            .collect();
        next_index += chunk as u64;
        for (index, outcome) in attempts {
            if members.len() == size {
                break;
            }
            examined += 1;
            let accepted = outcome.map_err(|source| McError::Member { index, source })?;
            if let Some(rho) = accepted {
                members.push(MemberFit { index, rho });
            }
        }
    }
    let rejected = examined - size;
    Ok(Ensemble {
        members,
        seed,
        rejected,
    })
}

/// Metrics whose ensemble spread can be requested by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Tangle,
    Concurrence,
    EntanglementOfFormation,
    LinearEntropy,
    PeresMinEigenvalue,
    LargestEigenvalue,
    DopPhoton1,
    DopPhoton2,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Tangle,
        Metric::Concurrence,
        Metric::EntanglementOfFormation,
        Metric::LinearEntropy,
        Metric::PeresMinEigenvalue,
        Metric::LargestEigenvalue,
        Metric::DopPhoton1,
        Metric::DopPhoton2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Tangle => "tangle",
            Metric::Concurrence => "concurrence",
            Metric::EntanglementOfFormation => "entanglement_of_formation",
            Metric::LinearEntropy => "linear_entropy",
            Metric::PeresMinEigenvalue => "peres_min_eigenvalue",
            Metric::LargestEigenvalue => "largest_eigenvalue",
            Metric::DopPhoton1 => "dop_photon1",
            Metric::DopPhoton2 => "dop_photon2",
        }
    }

    pub fn parse(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name)
    }

    fn extract(self, report: &MetricsReport) -> f64 {
        match self {
            Metric::Tangle => report.tangle,
            Metric::Concurrence => report.concurrence,
            Metric::EntanglementOfFormation => report.entanglement_of_formation,
            Metric::LinearEntropy => report.linear_entropy,
            Metric::PeresMinEigenvalue => report.peres_min_eigenvalue,
            Metric::LargestEigenvalue => report.largest_eigenvalue,
            Metric::DopPhoton1 => report.dop_photon1,
            Metric::DopPhoton2 => report.dop_photon2,
        }
    }
}

/// Spread of one metric across an ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct MetricStatistics {
    pub metric: Metric,
    pub mean: f64,
    /// Population standard deviation — the ensemble is the full population
    /// of the noise model, not a sample from something larger.
    #[serde(rename = "std")]
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

/// Summary of an ensemble run.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStatistics {
    pub seed: u64,
    pub size: usize,
    pub rejected: usize,
    pub stats: Vec<MetricStatistics>,
}

/// Evaluates the requested metrics on every member and summarizes their
/// distributions.
pub fn ensemble_statistics(
    ensemble: &Ensemble,
    metrics: &[Metric],
) -> Result<EnsembleStatistics, McError> {
    if ensemble.members.is_empty() {
        return Err(McError::EmptyEnsemble);
    }
    let reports = ensemble
        .members
        .par_iter()
        .map(|m| MetricsReport::from_state(&m.rho, DEFAULT_DOP_THRESHOLD))
        .collect::<Result<Vec<_>, _>>()?;
    let n = reports.len() as f64;
    let stats = metrics
        .iter()
        .map(|&metric| {
            let values: Vec<f64> = reports.iter().map(|r| metric.extract(r)).collect();
            let mean = values.iter().sum::<f64>() / n;
            let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in &values {
                min = min.min(v);
                max = max.max(v);
            }
            MetricStatistics {
                metric,
                mean,
                std_dev: variance.sqrt(),
                min,
                max,
            }
        })
        .collect();
    Ok(EnsembleStatistics {
        seed: ensemble.seed,
        size: ensemble.members.len(),
        rejected: ensemble.rejected,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::werner_state;
    use crate::tomo::{exact_measurement_set, CANONICAL_SETTINGS};
    use approx::assert_relative_eq;

    fn werner_measurements(p: f64, sigma: f64) -> MeasurementSet {
        exact_measurement_set(&werner_state(p), &CANONICAL_SETTINGS, sigma)
    }

    #[test]
    fn subtraction_of_known_admixture_recovers_the_cleaner_state() {
        // werner(0.3) = 0.3 Phi+ + 0.7 I/4; removing f = 0.4 of I/4 leaves
        // 0.5 Phi+ + 0.5 I/4 = werner(0.5).
        let subtracted = subtract_background(&werner_state(0.3), 0.4).unwrap();
        let expected = werner_state(0.5);
        assert!(subtracted.matrix().max_abs_diff(expected.matrix()) < 1e-12);
    }

    #[test]
    fn oversubtraction_is_reported_with_the_offending_eigenvalue() {
        // Removing f = 0.8 from werner(0.3) drives the three non-Bell
        // eigenvalues to exactly -0.125.
        match subtract_background(&werner_state(0.3), 0.8) {
            Err(McError::NonPhysical { min_eigenvalue }) => {
                assert_relative_eq!(min_eigenvalue, -0.125, epsilon = 1e-10);
            }
            other => panic!("expected NonPhysical, got {other:?}"),
        }
    }

    #[test]
    fn subtraction_rejects_bad_fractions() {
        assert!(matches!(
            subtract_background(&werner_state(0.5), 1.0),
            Err(McError::BadParameters(_))
        ));
        assert!(matches!(
            subtract_background(&werner_state(0.5), -0.1),
            Err(McError::BadParameters(_))
        ));
    }

    #[test]
    fn resampling_with_zero_sigma_is_the_identity() {
        let ms = werner_measurements(0.6, 0.0);
        let mut rng = substream(1, 2, 3);
        let sampled = sample_dataset(&ms, &mut rng);
        for (a, b) in ms.records().iter().zip(sampled.records()) {
            assert_eq!(a.p, b.p);
        }
    }

    #[test]
    fn ensembles_are_deterministic_across_runs() {
        let ms = werner_measurements(0.6, 0.01);
        let config = MLConfig::default();
        let a = build_ensemble(&ms, &config, 8, 42).unwrap();
        let b = build_ensemble(&ms, &config, 8, 42).unwrap();
        for (x, y) in a.members.iter().zip(&b.members) {
            assert_eq!(x.index, y.index);
            assert!(x.rho.matrix().max_abs_diff(y.rho.matrix()) == 0.0);
        }
        let c = build_ensemble(&ms, &config, 8, 43).unwrap();
        assert!(a.members[0]
            .rho
            .matrix()
            .max_abs_diff(c.members[0].rho.matrix())
            > 0.0);
    }

    #[test]
    fn ensemble_spread_tracks_the_measurement_noise() {
        let ms = werner_measurements(0.6, 0.005);
        let config = MLConfig::default();
        let ensemble = build_ensemble(&ms, &config, 48, 7).unwrap();
        let stats = ensemble_statistics(&ensemble, &[Metric::Tangle]).unwrap();
        let tangle = &stats.stats[0];
        // werner(0.6): concurrence 0.4, tangle 0.16. The resampled spread
        // must straddle the true value and stay well clear of zero width.
        assert!((tangle.mean - 0.16).abs() < 0.05);
        assert!(tangle.std_dev > 1e-4 && tangle.std_dev < 0.05);
        assert!(tangle.min <= tangle.mean && tangle.mean <= tangle.max);
        assert_eq!(stats.size, 48);
        assert_eq!(stats.rejected, 0);
    }

    #[test]
    fn background_ensemble_rejects_unphysical_draws_deterministically() {
        // werner(0.42) sits close enough to the f = 0.4 subtraction boundary
        // that some resampled reconstructions go unphysical.
        let ms = werner_measurements(0.42, 0.02);
        let config = MLConfig::default();
        let a = background_ensemble(&ms, &config, 0.4, 24, 5).unwrap();
        let b = background_ensemble(&ms, &config, 0.4, 24, 5).unwrap();
        assert_eq!(a.members.len(), 24);
        assert!(a.rejected > 0, "scenario should produce some rejections");
        assert_eq!(a.rejected, b.rejected);
        // Accepted indices skip the rejected attempts, so the last one runs
        // past the ensemble size.
        assert!(a.members.last().unwrap().index >= 24);
        for (x, y) in a.members.iter().zip(&b.members) {
            assert_eq!(x.index, y.index);
            assert!(x.rho.matrix().max_abs_diff(y.rho.matrix()) == 0.0);
        }
        // Every member is physical after subtraction by construction.
        for m in &a.members {
            assert!(m.rho.eigenvalues()[0] >= -PHYSICAL_TOLERANCE);
        }
    }

    #[test]
    fn zero_fraction_background_ensemble_matches_plain_resampling() {
        let ms = werner_measurements(0.5, 0.01);
        let config = MLConfig::default();
        let plain = build_ensemble(&ms, &config, 12, 31).unwrap();
        let filtered = background_ensemble(&ms, &config, 0.0, 12, 31).unwrap();
        assert_eq!(filtered.rejected, 0);
        for (x, y) in plain.members.iter().zip(&filtered.members) {
            assert_eq!(x.index, y.index);
            assert!(x.rho.matrix().max_abs_diff(y.rho.matrix()) == 0.0);
        }
    }

    #[test]
    fn hopeless_subtraction_exhausts_the_budget() {
        // werner(0.8) keeps its three small eigenvalues at 0.05, far below
        // the f/4 = 0.1 needed to survive; every attempt is rejected.
        let ms = werner_measurements(0.8, 0.001);
        let config = MLConfig::default();
        match background_ensemble(&ms, &config, 0.4, 3, 9) {
            Err(McError::RejectionBudgetExhausted { examined, accepted }) => {
                assert_eq!(examined, 300);
                assert_eq!(accepted, 0);
            }
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(Metric::parse(m.name()), Some(m));
        }
        assert_eq!(Metric::parse("nonsense"), None);
    }
}
