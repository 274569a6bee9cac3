//! From photon-counting histograms to normalized coincidence probabilities.
//!
//! A pulsed two-photon source produces a coincidence histogram with one peak
//! per pulse period. The zero-delay peak holds both true pairs and accidental
//! coincidences; the adjacent peaks hold accidentals alone and calibrate the
//! accidental level. The ratio
//!
//! ```text
//! g2 = C n / N,    with relative error sqrt(1/C + 1/N),
//! ```
//!
//! where `C` is the zero-delay count and `N` the total over `n` adjacent
//! peaks, measures how strongly a setting's pair rate stands above that
//! level. Turning a set of g2 values into probabilities requires a
//! normalization convention, and this module implements two:
//!
//! * **Pairwise** — `P_A = g2_A / (2 (g2_A + g2_B))` with `B` the orthogonal
//!   photon-2 partner of `A` at the same photon-1 setting. Settings without a
//!   measured partner borrow the denominator of the measured pair sharing
//!   their photon-1 letter. Every pair is forced to sum to 1/2, so this
//!   convention silently erases any polarization of photon 1.
//! * **Complete-set** — `P_k = g2_k / S` with `S` the g2 sum over a complete
//!   analyzer quadruple, whose true probabilities sum to 1. Settings inside a
//!   fully measured quadruple use their own sum; the rest borrow the first
//!   complete quadruple in the record set. No marginal is constrained, at the
//!   cost of leaning on a single reference group.
//!
//! Uncertainties propagate through either map to first order, treating the
//! g2 errors as independent. A seeded synthesizer generates histogram counts
//! for a known state so whole-pipeline behavior can be tested end to end.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::random::substream;
use crate::qstate::{ComplexMatrix, DensityMatrix};
use crate::tomo::{
    predicted_probability, ProbabilityRecord, SettingLabel, CANONICAL_SETTINGS,
};

/// Substream tag reserved for count synthesis.
const SYNTH_STREAM_TAG: u64 = 0x636f756e7473; // "counts"

/// Denominators smaller than this are degenerate rather than divisible.
const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CountsError {
    #[error("zero-delay peak for {0} has no counts; its g2 error is undefined")]
    ZeroCoincidences(SettingLabel),
    #[error("adjacent peaks for {0} hold no counts; the accidental level is undefined")]
    ZeroAccidentals(SettingLabel),
    #[error("setting {0} reports zero adjacent peaks")]
    ZeroPeaks(SettingLabel),
    #[error("duplicate record for setting {0}")]
    DuplicateSetting(SettingLabel),
    #[error("no grouping rule covers setting {0}")]
    MissingRule(SettingLabel),
    #[error("normalizing {target} needs a record for {missing}")]
    MissingSetting {
        target: SettingLabel,
        missing: SettingLabel,
    },
    #[error("denominator for setting {0} is numerically zero")]
    ZeroDenominator(SettingLabel),
    #[error("no complete analyzer quadruple is present in the record set")]
    NoCompleteQuadruple,
    #[error("invalid grouping rule: {0}")]
    BadRule(String),
    #[error("invalid synthesis parameter: {0}")]
    BadParameters(String),
}

/// Raw histogram numbers for one analyzer setting.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: SettingLabel,
    /// Counts in the zero-delay coincidence peak (same-cycle pairs).
    pub coincidences: u64,
    /// Total accidental counts across the adjacent (different-cycle) peaks.
    pub accidental_total: u64,
    /// Number of adjacent peaks summed into `accidental_total`.
    pub peaks: u32,
}

/// A second-order correlation value with its counting-statistics error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct G2Value {
    pub value: f64,
    pub sigma: f64,
}

/// A g2 value tagged with the setting it was measured at.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct G2Record {
    pub setting: SettingLabel,
    pub g2: G2Value,
}

/// g2 = C n / N from the zero-delay count `C`, the total `N` over the
/// adjacent peaks, and the number of peaks `n`, with the Poisson error
/// g2 sqrt(1/C + 1/N). Either count at zero leaves the estimate or its
/// error undefined, so both are rejected.
pub fn second_order_correlation(record: &CountRecord) -> Result<G2Record, CountsError> {
    if record.peaks == 0 {
        return Err(CountsError::ZeroPeaks(record.setting));
    }
    if record.accidental_total == 0 {
        return Err(CountsError::ZeroAccidentals(record.setting));
    }
    if record.coincidences == 0 {
        return Err(CountsError::ZeroCoincidences(record.setting));
    }
    let c = record.coincidences as f64;
    let n = record.accidental_total as f64;
    let value = c * record.peaks as f64 / n;
    let sigma = value * (1.0 / c + 1.0 / n).sqrt();
    Ok(G2Record {
        setting: record.setting,
        g2: G2Value { value, sigma },
    })
}

/// Converts a whole acquisition, preserving order.
pub fn correlations_from_counts(records: &[CountRecord]) -> Result<Vec<G2Record>, CountsError> {
    records.iter().map(second_order_correlation).collect()
}

/// Which pair of settings forms the normalization denominator for each
/// setting under the pairwise convention.
#[derive(Debug, Clone)]
pub struct PairwiseGrouping {
    rules: Vec<(SettingLabel, [SettingLabel; 2])>,
}

impl PairwiseGrouping {
    /// Builds a grouping, checking that every denominator pair shares the
    /// target's photon-1 setting and is orthogonal on photon 2 — the
    /// conditions under which the pair's true probabilities sum to the
    /// photon-1 marginal.
    pub fn new(rules: Vec<(SettingLabel, [SettingLabel; 2])>) -> Result<Self, CountsError> {
        let mut seen: Vec<SettingLabel> = Vec::new();
        for (target, [a, b]) in &rules {
            if seen.contains(target) {
                return Err(CountsError::BadRule(format!(
                    "setting {target} appears in two rules"
                )));
            }
            seen.push(*target);
            if a.photon1 != target.photon1 || b.photon1 != target.photon1 {
                return Err(CountsError::BadRule(format!(
                    "denominator pair {a}, {b} does not share photon 1 with {target}"
                )));
            }
            if a.photon2.orthogonal() != Some(b.photon2) {
                return Err(CountsError::BadRule(format!(
                    "denominator pair {a}, {b} is not orthogonal on photon 2"
                )));
            }
        }
        Ok(PairwiseGrouping { rules })
    }

    /// The grouping for the sixteen canonical settings: the four measured
    /// orthogonal pairs (VV, VH), (HH, HV), (LV, LH), (DH, DV) normalize
    /// themselves, and every other setting borrows the measured pair that
    /// shares its photon-1 letter.
    pub fn canonical() -> Self {
        let pair_for = |s: SettingLabel| -> [SettingLabel; 2] {
            let pick = |a: &str, b: &str| [a.parse().unwrap(), b.parse().unwrap()];
            match s.photon1.letter() {
                'V' => pick("VV", "VH"),
                'H' => pick("HH", "HV"),
                'L' => pick("LV", "LH"),
                'D' => pick("DH", "DV"),
                _ => unreachable!("canonical settings use V, H, L, D on photon 1"),
            }
        };
        let rules = CANONICAL_SETTINGS
            .iter()
            .map(|&s| (s, pair_for(s)))
            .collect();
        PairwiseGrouping::new(rules).expect("canonical rules satisfy the pair conditions")
    }

    pub fn denominator_for(&self, setting: SettingLabel) -> Option<[SettingLabel; 2]> {
        self.rules
            .iter()
            .find(|(target, _)| *target == setting)
            .map(|(_, pair)| *pair)
    }
}

fn indexed<'a>(
    records: &'a [G2Record],
) -> Result<Vec<(SettingLabel, &'a G2Value)>, CountsError> {
    let mut index: Vec<(SettingLabel, &G2Value)> = Vec::with_capacity(records.len());
    for r in records {
        if index.iter().any(|(s, _)| *s == r.setting) {
            return Err(CountsError::DuplicateSetting(r.setting));
        }
        index.push((r.setting, &r.g2));
    }
    Ok(index)
}

fn lookup<'a>(
    index: &[(SettingLabel, &'a G2Value)],
    target: SettingLabel,
    missing: SettingLabel,
) -> Result<&'a G2Value, CountsError> {
    index
        .iter()
        .find(|(s, _)| *s == missing)
        .map(|(_, g)| *g)
        .ok_or(CountsError::MissingSetting { target, missing })
}

/// First-order error propagation through P = g_k / (scale * S), where S is
/// the g2 sum over `group`. The derivative with respect to a group member is
/// -g_k / (scale S^2), plus an extra 1 / (scale S) when that member is the
/// numerator itself; a numerator outside the group only carries the direct
/// term. All g2 errors are treated as independent.
fn propagate(
    target: SettingLabel,
    own: &G2Value,
    group: &[(SettingLabel, &G2Value)],
    scale: f64,
) -> Result<(f64, f64), CountsError> {
    let s: f64 = group.iter().map(|(_, g)| g.value).sum();
    if s.abs() < DENOMINATOR_FLOOR {
        return Err(CountsError::ZeroDenominator(target));
    }
    let p = own.value / (scale * s);
    let mut variance = 0.0;
    let mut own_in_group = false;
    for (label, g) in group {
        let mut d = -own.value / (scale * s * s);
        if *label == target {
            own_in_group = true;
            d += 1.0 / (scale * s);
        }
        variance += d * d * g.sigma * g.sigma;
    }
    if !own_in_group {
        let d = 1.0 / (scale * s);
        variance += d * d * own.sigma * own.sigma;
    }
    Ok((p, variance.sqrt()))
}

/// Normalizes one orthogonal pair: P_A = g2_A / (2 (g2_A + g2_B)) and
/// likewise for B, so the two probabilities sum to exactly 1/2. Their errors
/// come out equal — the pair sum is pinned, so the two estimates are
/// perfectly anticorrelated.
pub fn pairwise_normalize(
    a: &G2Record,
    b: &G2Record,
) -> Result<(ProbabilityRecord, ProbabilityRecord), CountsError> {
    let group = [(a.setting, &a.g2), (b.setting, &b.g2)];
    let (p_a, sigma_a) = propagate(a.setting, &a.g2, &group, 2.0)?;
    let (p_b, sigma_b) = propagate(b.setting, &b.g2, &group, 2.0)?;
    Ok((
        ProbabilityRecord {
            setting: a.setting,
            p: p_a,
            sigma: sigma_a,
        },
        ProbabilityRecord {
            setting: b.setting,
            p: p_b,
            sigma: sigma_b,
        },
    ))
}

/// Normalizes one complete analyzer quadruple: P_k = g2_k / sum, so the four
/// probabilities sum to exactly 1.
pub fn complete_set_normalize(
    group: &[G2Record; 4],
) -> Result<[ProbabilityRecord; 4], CountsError> {
    let refs: Vec<(SettingLabel, &G2Value)> =
        group.iter().map(|r| (r.setting, &r.g2)).collect();
    let mut out = [ProbabilityRecord {
        setting: group[0].setting,
        p: 0.0,
        sigma: 0.0,
    }; 4];
    for (slot, r) in out.iter_mut().zip(group) {
        let (p, sigma) = propagate(r.setting, &r.g2, &refs, 1.0)?;
        *slot = ProbabilityRecord {
            setting: r.setting,
            p,
            sigma,
        };
    }
    Ok(out)
}

/// Pairwise normalization: P_k = g2_k / (2 (g2_A + g2_B)) with (A, B) the
/// denominator pair assigned to k by the grouping. Output order follows the
/// input order.
pub fn normalize_pairwise(
    records: &[G2Record],
    grouping: &PairwiseGrouping,
) -> Result<Vec<ProbabilityRecord>, CountsError> {
    let index = indexed(records)?;
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let pair = grouping
            .denominator_for(r.setting)
            .ok_or(CountsError::MissingRule(r.setting))?;
        let group = [
            (pair[0], lookup(&index, r.setting, pair[0])?),
            (pair[1], lookup(&index, r.setting, pair[1])?),
        ];
        let (p, sigma) = propagate(r.setting, &r.g2, &group, 2.0)?;
        out.push(ProbabilityRecord {
            setting: r.setting,
            p,
            sigma,
        });
    }
    Ok(out)
}

/// Complete-set normalization: P_k = g2_k / S with S summed over a complete
/// analyzer quadruple. A setting whose own quadruple is fully measured uses
/// that sum; every other setting borrows the first complete quadruple found
/// in record order. Output order follows the input order.
pub fn normalize_complete(records: &[G2Record]) -> Result<Vec<ProbabilityRecord>, CountsError> {
    let index = indexed(records)?;
    let complete_group = |setting: SettingLabel| -> Option<[SettingLabel; 4]> {
        let quad = setting.quadruple()?;
        quad.iter()
            .all(|q| index.iter().any(|(s, _)| s == q))
            .then_some(quad)
    };
    let anchor = records
        .iter()
        .find_map(|r| complete_group(r.setting))
        .ok_or(CountsError::NoCompleteQuadruple)?;
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let quad = complete_group(r.setting).unwrap_or(anchor);
        let mut group = Vec::with_capacity(4);
        for q in quad {
            group.push((q, lookup(&index, r.setting, q)?));
        }
        let (p, sigma) = propagate(r.setting, &r.g2, &group, 1.0)?;
        out.push(ProbabilityRecord {
            setting: r.setting,
            p,
            sigma,
        });
    }
    Ok(out)
}

/// Knobs for the count synthesizer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Expected number of pair detections per setting acquisition.
    pub pairs_per_setting: u64,
    /// Fraction of the unpolarized background mixed into the state:
    /// rho_eff = (1 - f) rho + f I/4.
    pub background_fraction: f64,
    /// Expected accidental counts per histogram peak.
    pub accidental_level: f64,
    /// Number of adjacent peaks recorded per setting.
    pub peaks: u32,
}

impl Default for SynthesisConfig {
    /// Counting statistics comparable to the reference acquisition: relative
    /// g2 errors around one to two percent per setting.
    fn default() -> Self {
        SynthesisConfig {
            pairs_per_setting: 100_000,
            background_fraction: 0.0,
            accidental_level: 50.0,
            peaks: 100,
        }
    }
}

impl SynthesisConfig {
    fn validate(&self) -> Result<(), CountsError> {
        if self.pairs_per_setting == 0 {
            return Err(CountsError::BadParameters(
                "pairs_per_setting must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.background_fraction) {
            return Err(CountsError::BadParameters(format!(
                "background_fraction = {} must lie in [0, 1]",
                self.background_fraction
            )));
        }
        if !(self.accidental_level.is_finite() && self.accidental_level > 0.0) {
            return Err(CountsError::BadParameters(format!(
                "accidental_level = {} must be positive",
                self.accidental_level
            )));
        }
        if self.peaks == 0 {
            return Err(CountsError::BadParameters(
                "peaks must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn poisson_draw(rng: &mut impl Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as u64
}

/// Simulates one acquisition over the sixteen canonical settings.
///
/// The zero-delay peak for setting k draws from
/// Poisson(pairs_per_setting * Tr(rho_eff P_k)) and the adjacent peaks
/// jointly from Poisson(peaks * accidental_level), clamped to at least one
/// count so the g2 reference level never vanishes. Each setting consumes its
/// own substream of `seed`, so results are independent of evaluation order.
pub fn synthesize_counts(
    rho: &DensityMatrix,
    config: &SynthesisConfig,
    seed: u64,
) -> Result<Vec<CountRecord>, CountsError> {
    config.validate()?;
    if rho.dim() != 4 {
        return Err(CountsError::BadParameters(format!(
            "synthesis needs a two-photon state, got dimension {}",
            rho.dim()
        )));
    }
    let f = config.background_fraction;
    let effective = rho
        .matrix()
        .scale_re(1.0 - f)
        .add(&ComplexMatrix::identity(4).scale_re(f / 4.0));
    let effective = DensityMatrix::new(effective).expect("mixture with I/4 stays physical");
    let mut out = Vec::with_capacity(CANONICAL_SETTINGS.len());
    for (i, &setting) in CANONICAL_SETTINGS.iter().enumerate() {
        let mut rng = substream(seed, SYNTH_STREAM_TAG, i as u64);
        let p = predicted_probability(&effective, setting);
        let zero_delay_mean = config.pairs_per_setting as f64 * p;
        let accidental_mean = config.peaks as f64 * config.accidental_level;
        out.push(CountRecord {
            setting,
            coincidences: poisson_draw(&mut rng, zero_delay_mean),
            accidental_total: poisson_draw(&mut rng, accidental_mean).max(1),
            peaks: config.peaks,
        });
    }
    Ok(out)
}
