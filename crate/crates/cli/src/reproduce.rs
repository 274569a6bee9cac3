//! The verification suite behind `reproduce-paper`: eleven numbered checks
//! that pin the full analysis of the bundled reference data set, from the
//! golden reconstruction through Monte-Carlo error bars to the normalization
//! bias demonstration. Every tolerance is written next to the check it
//! guards; the final row reruns the first ten from scratch and insists the
//! two serialized reports agree byte for byte.

use serde::Serialize;

use biphoton::counts::{
    correlations_from_counts, normalize_complete, normalize_pairwise, synthesize_counts,
    PairwiseGrouping, SynthesisConfig,
};
use biphoton::fitstats::sigma_distance;
use biphoton::fixtures::{reference_state, table1, BACKGROUND_FRACTION};
use biphoton::mcerr::{
    background_ensemble, build_ensemble, ensemble_statistics, subtract_background, Metric,
};
use biphoton::metrics::{
    degree_of_correlation, degree_of_polarization, tangle, MetricsReport, DEFAULT_DOP_THRESHOLD,
    SEPARABLE_ENTROPY_BOUND,
};
use biphoton::qstate::random::{random_density_matrix, substream};
use biphoton::qstate::{
    bell_state, tensor, werner_state, BellKind, ComplexMatrix, DensityMatrix, Photon,
};
use biphoton::tomo::{check_complete_normalization, max_likelihood, MLConfig, MeasurementSet};
use num_complex::Complex64;

use crate::errors::AppError;

/// Substream tag for the property-suite state generator (row 9).
const PROPERTY_STREAM_TAG: u64 = 0x70726f70; // "prop"

/// One verification row.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// The full report, serializable for `--output`.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub seed: u64,
    pub samples: usize,
    pub rows: Vec<Row>,
    pub all_passed: bool,
}

fn row(index: usize, name: &'static str, passed: bool, detail: String) -> Row {
    Row {
        index,
        name,
        passed,
        detail,
    }
}

fn within(value: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&value)
}

/// Rows 1 through 10. Row 11 is the determinism check on top of these.
fn compute_rows(seed: u64, samples: usize) -> Result<Vec<Row>, AppError> {
    let data = table1();
    let reference = reference_state();
    let ml_config = MLConfig::default();
    let mut rows = Vec::with_capacity(10);

    // 1. The reconstruction from the bundled probabilities must land on the
    //    bundled matrix, entry for entry.
    let fit = max_likelihood(data, &ml_config)?;
    let deviation = fit.rho.matrix().max_abs_diff(reference.matrix());
    rows.push(row(
        1,
        "golden reconstruction",
        fit.converged && deviation <= 5e-3,
        format!("max entry deviation {deviation:.2e} (tolerance 5.0e-3)"),
    ));

    // 2. The reference state carries strictly no tangle.
    let t = tangle(reference)?;
    rows.push(row(
        2,
        "tangle of reference state",
        t == 0.0,
        format!("tangle = {t} (must be exactly 0)"),
    ));

    // 3. Linear entropy against an independent trace computation: purity is
    //    just the entry-wise square sum of a Hermitian matrix.
    let s_l = reference.linear_entropy();
    let mut purity = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            purity += reference.matrix().get(r, c).norm_sqr();
        }
    }
    let oracle = (4.0 / 3.0) * (1.0 - purity);
    let row3_pass =
        within(s_l, 0.92, 0.99) && (s_l - 0.942).abs() <= 0.005 && (s_l - oracle).abs() <= 1e-12;
    rows.push(row(
        3,
        "linear entropy",
        row3_pass,
        format!("S_L = {s_l:.6}, independent oracle {oracle:.6} (range [0.92, 0.99], target 0.942 +- 0.005)"),
    ));

    // 4. Marginal polarizations of the reference state.
    let report = MetricsReport::from_state(reference, DEFAULT_DOP_THRESHOLD)?;
    let row4_pass = (report.dop_photon2 - 0.045).abs() <= 0.002 && report.dop_photon1 <= 0.001;
    rows.push(row(
        4,
        "marginal polarizations",
        row4_pass,
        format!(
            "photon-2 DOP {:.4} (target 0.045 +- 0.002), photon-1 DOP {:.4} (max 0.001)",
            report.dop_photon2, report.dop_photon1
        ),
    ));

    // 5. Point estimates after removing the unpolarized background fraction.
    let subtracted = subtract_background(reference, BACKGROUND_FRACTION)?;
    let sub_tangle = tangle(&subtracted)?;
    let sub_dop2 = degree_of_polarization(&subtracted.partial_trace(Photon::Two)?)?;
    let row5_pass = within(sub_tangle, 0.018, 0.038) && within(sub_dop2, 0.080, 0.096);
    rows.push(row(
        5,
        "background subtraction",
        row5_pass,
        format!(
            "subtracted tangle {sub_tangle:.4} (range [0.018, 0.038]), photon-2 DOP {sub_dop2:.4} (range [0.080, 0.096])"
        ),
    ));

    // 6. Monte-Carlo error bars. The plain ensemble carries the marginal
    //    uncertainties; the background ensemble carries the subtracted-tangle
    //    spread. Bands are +-50% of the published values because the
    //    optimizer is not pinned by the data set.
    let plain = build_ensemble(data, &ml_config, samples, seed)?;
    let plain_stats = ensemble_statistics(
        &plain,
        &[Metric::DopPhoton1, Metric::DopPhoton2, Metric::Tangle],
    )?;
    let dop1_std = plain_stats.stats[0].std_dev;
    let dop2_std = plain_stats.stats[1].std_dev;
    let tangle_mean = plain_stats.stats[2].mean;
    let background =
        background_ensemble(data, &ml_config, BACKGROUND_FRACTION, samples, seed)?;
    let background_stats = ensemble_statistics(&background, &[Metric::Tangle])?;
    let sub_tangle_std = background_stats.stats[0].std_dev;
    let row6_pass = within(dop2_std, 0.010, 0.029)
        && within(sub_tangle_std, 0.011, 0.033)
        && within(dop1_std, 0.006, 0.017)
        && tangle_mean < 0.005;
    rows.push(row(
        6,
        "monte-carlo uncertainties",
        row6_pass,
        format!(
            "std(photon-2 DOP) {dop2_std:.4} [0.010, 0.029], std(subtracted tangle) {sub_tangle_std:.4} [0.011, 0.033], std(photon-1 DOP) {dop1_std:.4} [0.006, 0.017], unsubtracted tangle mean {tangle_mean:.5} (< 0.005); {} rejected draws",
            background.rejected
        ),
    ));

    // 7. Distance-in-sigma arithmetic for the correlation-visibility claim.
    let distance = sigma_distance(0.222, 0.028, 0.50)?;
    rows.push(row(
        7,
        "sigma distance",
        (distance - 9.93).abs() <= 0.01,
        format!("sigma_distance(0.222, 0.028, 0.50) = {distance:.4} (target 9.93 +- 0.01)"),
    ));

    // 8. Normalization audit of the bundled probabilities: the four measured
    //    orthogonal pairs are pinned to 1/2, the linear quadruple to 1, and
    //    the {DL, DD} group shows the pair rule does not extend.
    let audit = check_complete_normalization(data, 1e-5);
    let pair_count = audit.pairs.len();
    let dl = data.get("DL".parse()?).expect("fixture has DL").p;
    let dd = data.get("DD".parse()?).expect("fixture has DD").p;
    let dl_dd = dl + dd;
    let row8_pass = pair_count == 4
        && audit.pairwise_convention
        && audit.complete_convention
        && audit.groups.len() == 1
        && (dl_dd - 0.53764).abs() <= 1e-5;
    rows.push(row(
        8,
        "normalization audit",
        row8_pass,
        format!(
            "{pair_count} orthogonal pairs sum to 0.5 within 1e-5: {}; linear quadruple sums to 1 within 1e-5: {}; DL+DD = {dl_dd:.5} (expected 0.53764, not 0.5)",
            audit.pairwise_convention, audit.complete_convention
        ),
    ));

    // 9. Property sweep over seeded random states plus two closed-form
    //    families; these pin the entanglement criteria the report relies on.
    rows.push(property_row(seed)?);

    // 10. Normalization bias, end to end: a synthetic source with photon-1
    //     DOP 0.3 keeps that polarization under complete-set normalization
    //     and loses it under pairwise normalization.
    rows.push(bias_row(seed)?);

    Ok(rows)
}

fn property_row(seed: u64) -> Result<Row, AppError> {
    const STATES: usize = 10_000;
    let mut rng = substream(seed, PROPERTY_STREAM_TAG, 0);

    // High linear entropy forces exactly zero tangle, and the
    // partial-transpose test agrees with the tangle verdict, on every draw.
    let mut entropy_cases = 0usize;
    let mut entropy_violations = 0usize;
    let mut ppt_disagreements = 0usize;
    for _ in 0..STATES {
        let rho = random_density_matrix(4, &mut rng);
        let report = MetricsReport::from_state(&rho, DEFAULT_DOP_THRESHOLD)?;
        if report.linear_entropy > SEPARABLE_ENTROPY_BOUND {
            entropy_cases += 1;
            if report.tangle != 0.0 {
                entropy_violations += 1;
            }
        }
        if report.peres_entangled != (report.tangle > 0.0) {
            ppt_disagreements += 1;
        }
    }

    // Closed-form concurrence of the isotropic mixture family.
    let mut werner_worst = 0.0f64;
    for i in 0..=100 {
        let p = i as f64 / 100.0;
        let expected = (0.0f64).max((3.0 * p - 1.0) / 2.0);
        let got = tangle(&werner_state(p))?.sqrt();
        werner_worst = werner_worst.max((got - expected).abs());
    }

    // Degree of correlation: 1 for the maximally entangled state, 0 for the
    // maximally mixed one, at every analyzer angle.
    let phi_plus = bell_state(BellKind::PhiPlus).density();
    let mixed = DensityMatrix::maximally_mixed(4);
    let mut correlation_worst = 0.0f64;
    for i in 0..=180 {
        let theta = i as f64 * std::f64::consts::PI / 180.0;
        correlation_worst =
            correlation_worst.max((degree_of_correlation(&phi_plus, theta)? - 1.0).abs());
        correlation_worst = correlation_worst.max(degree_of_correlation(&mixed, theta)?.abs());
    }

    let passed = entropy_violations == 0
        && ppt_disagreements == 0
        && werner_worst <= 1e-8
        && correlation_worst <= 1e-9;
    Ok(row(
        9,
        "property suite",
        passed,
        format!(
            "{STATES} random states: {entropy_cases} high-entropy cases, {entropy_violations} entropy-bound violations, {ppt_disagreements} transpose/tangle disagreements; isotropic-family concurrence off by {werner_worst:.1e} (max 1e-8); correlation grid off by {correlation_worst:.1e} (max 1e-9)"
        ),
    ))
}

fn bias_row(seed: u64) -> Result<Row, AppError> {
    // Photon 1 polarized 65/35 along H/V, photon 2 unpolarized: DOP 0.3.
    let mut photon1 = ComplexMatrix::zeros(2);
    photon1.set(0, 0, Complex64::new(0.65, 0.0));
    photon1.set(1, 1, Complex64::new(0.35, 0.0));
    let source = DensityMatrix::new(tensor(
        &photon1,
        DensityMatrix::maximally_mixed(2).matrix(),
    ))?;

    let counts = synthesize_counts(&source, &SynthesisConfig::default(), seed)?;
    let g2 = correlations_from_counts(&counts)?;
    let ml_config = MLConfig::default();

    let dop1_of = |records: Vec<biphoton::tomo::ProbabilityRecord>| -> Result<f64, AppError> {
        let ms = MeasurementSet::new(records)?;
        let fit = max_likelihood(&ms, &ml_config)?;
        Ok(degree_of_polarization(
            &fit.rho.partial_trace(Photon::One)?,
        )?)
    };
    let pairwise = dop1_of(normalize_pairwise(&g2, &PairwiseGrouping::canonical())?)?;
    let complete = dop1_of(normalize_complete(&g2)?)?;

    let passed = pairwise < 0.05 && (complete - 0.30).abs() <= 0.03;
    Ok(row(
        10,
        "normalization bias",
        passed,
        format!(
            "true photon-1 DOP 0.3: pairwise normalization reconstructs {pairwise:.4} (must be < 0.05), complete-set reconstructs {complete:.4} (target 0.30 +- 0.03)"
        ),
    ))
}

/// Runs the whole suite. Rows 1-10 are computed twice from scratch with the
/// same seed; row 11 compares the two serialized reports byte for byte.
pub fn run(seed: u64, samples: usize) -> Result<Report, AppError> {
    let first = compute_rows(seed, samples)?;
    let second = compute_rows(seed, samples)?;
    let first_bytes = serde_json::to_vec(&first).expect("rows serialize");
    let second_bytes = serde_json::to_vec(&second).expect("rows serialize");
    let identical = first_bytes == second_bytes;

    let mut rows = first;
    rows.push(row(
        11,
        "determinism",
        identical,
        format!(
            "two seeded runs serialized to {} bytes each; identical: {identical}",
            first_bytes.len()
        ),
    ));
    let all_passed = rows.iter().all(|r| r.passed);
    Ok(Report {
        seed,
        samples,
        rows,
        all_passed,
    })
}

/// Renders the pass/fail table printed to stdout.
pub fn render_table(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "verification suite: seed {}, {} ensemble members\n",
        report.seed, report.samples
    ));
    for r in &report.rows {
        out.push_str(&format!(
            "{:>2} {} {} — {}\n",
            r.index,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        ));
    }
    out.push_str(&format!(
        "{}\n",
        if report.all_passed {
            "all rows passed"
        } else {
            "FAILURES PRESENT"
        }
    ));
    out
}
