//! Measurement settings and density-matrix reconstruction.
//!
//! A tomography run measures coincidence probabilities behind pairs of
//! polarization analyzers. Each [`SettingLabel`] names one analyzer pair
//! (photon 1 first); [`linear_inversion`] turns a set of probabilities into
//! the unconstrained least-squares estimate, and [`max_likelihood`] searches
//! the physical states rho = T^dag T / Tr(T^dag T) for the one whose Born-rule
//! predictions best match the data in the Gaussian-weighted sense
//! sum_k (Tr(rho Pi_k) - p_k)^2 / (2 sigma_k^2).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::qstate::{eigen, tensor, ComplexMatrix, DensityMatrix};

/// Single-photon analyzer orientations: the linear basis states, the +45°
/// diagonal, and the two circular polarizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
    D,
    L,
    R,
}

impl Polarization {
    pub const ALL: [Polarization; 5] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::L,
        Polarization::R,
    ];

    pub const fn letter(self) -> char {
        match self {
            Polarization::H => 'H',
            Polarization::V => 'V',
            Polarization::D => 'D',
            Polarization::L => 'L',
            Polarization::R => 'R',
        }
    }

    pub fn from_letter(ch: char) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.letter() == ch)
    }

    /// Analyzer ket in the [H, V] basis: |D> = (|H>+|V>)/sqrt2,
    /// |L> = (|H>+i|V>)/sqrt2, |R> = (|H>-i|V>)/sqrt2.
    pub fn ket(self) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Polarization::H => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            Polarization::V => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            Polarization::D => [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            Polarization::L => [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
            Polarization::R => [Complex64::new(s, 0.0), Complex64::new(0.0, -s)],
        }
    }

    /// Single-qubit projector onto the analyzer ket.
    pub fn projector(self) -> ComplexMatrix {
        let k = self.ket();
        let mut m = ComplexMatrix::zeros(2);
        for r in 0..2 {
            for c in 0..2 {
                m.set(r, c, k[r] * k[c].conj());
            }
        }
        m
    }

    /// Orthogonal partner within the label alphabet: H pairs with V and L
    /// with R. The diagonal has no partner here — its complement is the
    /// anti-diagonal, which the alphabet does not contain.
    pub fn orthogonal(self) -> Option<Polarization> {
        axis_of(self).map(|(axis, idx)| letter_of(axis, 1 - idx))
    }
}

/// One coincidence-measurement setting; the first letter is photon 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SettingLabel {
    pub photon1: Polarization,
    pub photon2: Polarization,
}

impl SettingLabel {
    pub const fn new(photon1: Polarization, photon2: Polarization) -> Self {
        SettingLabel { photon1, photon2 }
    }

    /// The complete analyzer quadruple this setting belongs to — itself plus
    /// the three settings with either photon rotated to its orthogonal
    /// partner. None when either letter has no partner in the alphabet.
    pub fn quadruple(self) -> Option<[SettingLabel; 4]> {
        let o1 = self.photon1.orthogonal()?;
        let o2 = self.photon2.orthogonal()?;
        Some([
            self,
            SettingLabel::new(self.photon1, o2),
            SettingLabel::new(o1, self.photon2),
            SettingLabel::new(o1, o2),
        ])
    }
}

impl fmt::Display for SettingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.photon1.letter(), self.photon2.letter())
    }
}

impl FromStr for SettingLabel {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self, TomoError> {
        let mut chars = s.chars();
        let bad = || TomoError::BadLabel(s.to_string());
        let p1 = chars.next().and_then(Polarization::from_letter).ok_or_else(bad)?;
        let p2 = chars.next().and_then(Polarization::from_letter).ok_or_else(bad)?;
        if chars.next().is_some() {
            return Err(bad());
        }
        Ok(SettingLabel::new(p1, p2))
    }
}

impl serde::Serialize for SettingLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for SettingLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

const fn lbl(p1: Polarization, p2: Polarization) -> SettingLabel {
    SettingLabel::new(p1, p2)
}

/// The sixteen settings of the reference acquisition, in its original order:
/// one complete linear quadruple followed by the mixed linear/diagonal/circular
/// combinations that close the tomographic set.
pub const CANONICAL_SETTINGS: [SettingLabel; 16] = {
    use Polarization::{D, H, L, R, V};
    [
        lbl(V, V),
        lbl(V, H),
        lbl(H, H),
        lbl(H, V),
        lbl(L, V),
        lbl(L, H),
        lbl(D, H),
        lbl(D, V),
        lbl(D, L),
        lbl(D, D),
        lbl(L, D),
        lbl(V, D),
        lbl(H, D),
        lbl(H, R),
        lbl(V, R),
        lbl(L, R),
    ]
};

/// A measured (or synthesized) coincidence probability with its 1-sigma
/// uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProbabilityRecord {
    pub setting: SettingLabel,
    pub p: f64,
    pub sigma: f64,
}

/// Collection of probability records with unique settings.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    records: Vec<ProbabilityRecord>,
}

impl MeasurementSet {
    pub fn new(records: Vec<ProbabilityRecord>) -> Result<Self, TomoError> {
        for (i, rec) in records.iter().enumerate() {
            if !rec.p.is_finite() || !rec.sigma.is_finite() || rec.sigma < 0.0 {
                return Err(TomoError::InvalidRecord {
                    setting: rec.setting,
                    reason: format!("p = {}, sigma = {}", rec.p, rec.sigma),
                });
            }
            if records[..i].iter().any(|r| r.setting == rec.setting) {
                return Err(TomoError::DuplicateSetting(rec.setting));
            }
        }
        Ok(MeasurementSet { records })
    }

    pub fn records(&self) -> &[ProbabilityRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, setting: SettingLabel) -> Option<&ProbabilityRecord> {
        self.records.iter().find(|r| r.setting == setting)
    }
}

/// Everything that can go wrong between raw records and a reconstructed state.
#[derive(Debug, Error)]
pub enum TomoError {
    #[error("unrecognized setting label {0:?} (expected two of H, V, D, L, R)")]
    BadLabel(String),
    #[error("duplicate measurement setting {0}")]
    DuplicateSetting(SettingLabel),
    #[error("record for {setting} is invalid: {reason}")]
    InvalidRecord { setting: SettingLabel, reason: String },
    #[error("weighted fit needs positive sigmas; setting {0} has sigma = 0")]
    DegenerateSigma(SettingLabel),
    #[error("settings do not determine the state: {null_dimension} direction(s) unconstrained")]
    UnderdeterminedSystem { null_dimension: usize },
    #[error("bad fit configuration: {0}")]
    BadConfig(String),
}

/// Two-photon projector for a setting: ket(photon1) tensor ket(photon2).
pub fn setting_projector(setting: SettingLabel) -> ComplexMatrix {
    tensor(
        &setting.photon1.projector(),
        &setting.photon2.projector(),
    )
}

/// Born-rule coincidence probability Tr(rho Pi).
pub fn predicted_probability(rho: &DensityMatrix, setting: SettingLabel) -> f64 {
    rho.matrix()
        .trace_product(&setting_projector(setting))
        .re
}

/// Exact Born-rule records for a list of settings, all with the same sigma.
/// Handy for round-trip tests and synthetic pipelines.
pub fn exact_measurement_set(
    rho: &DensityMatrix,
    settings: &[SettingLabel],
    sigma: f64,
) -> MeasurementSet {
    let records = settings
        .iter()
        .map(|&setting| ProbabilityRecord {
            setting,
            p: predicted_probability(rho, setting),
            sigma,
        })
        .collect();
    MeasurementSet::new(records).expect("distinct settings with finite probabilities")
}

fn pauli(i: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2);
    match i {
        0 => {
            m.set(0, 0, Complex64::new(1.0, 0.0));
            m.set(1, 1, Complex64::new(1.0, 0.0));
        }
        1 => {
            m.set(0, 1, Complex64::new(1.0, 0.0));
            m.set(1, 0, Complex64::new(1.0, 0.0));
        }
        2 => {
            m.set(0, 1, Complex64::new(0.0, -1.0));
            m.set(1, 0, Complex64::new(0.0, 1.0));
        }
        _ => {
            m.set(0, 0, Complex64::new(1.0, 0.0));
            m.set(1, 1, Complex64::new(-1.0, 0.0));
        }
    }
    m
}

/// The 15 traceless two-qubit Pauli products sigma_a tensor sigma_b,
/// (a, b) != (0, 0), in lexicographic order.
fn traceless_pauli_basis() -> Vec<ComplexMatrix> {
    let singles: Vec<ComplexMatrix> = (0..4).map(pauli).collect();
    let mut basis = Vec::with_capacity(15);
    for a in 0..4 {
        for b in 0..4 {
            if a == 0 && b == 0 {
                continue;
            }
            basis.push(tensor(&singles[a], &singles[b]));
        }
    }
    basis
}

/// Relative eigenvalue cutoff below which a normal-equation direction counts
/// as unconstrained.
const RANK_TOLERANCE: f64 = 1e-10;

/// Unconstrained least-squares estimate of the state.
///
/// Expands rho = I/4 + sum_j x_j B_j over the traceless Pauli products and
/// solves the normal equations for x by eigendecomposition, so a deficient
/// setting list is detected exactly and reported with the number of
/// undetermined directions. The result is Hermitian with unit trace but may
/// well have negative eigenvalues — that is what [`max_likelihood`] fixes.
pub fn linear_inversion(ms: &MeasurementSet) -> Result<ComplexMatrix, TomoError> {
    let basis = traceless_pauli_basis();
    let m = ms.len();

    // Design matrix rows: p_k - 1/4 = sum_j Tr(B_j Pi_k) x_j.
    let mut design = vec![[0.0f64; 15]; m];
    let mut rhs_rows = vec![0.0f64; m];
    for (k, rec) in ms.records().iter().enumerate() {
        let proj = setting_projector(rec.setting);
        for (j, b) in basis.iter().enumerate() {
            design[k][j] = proj.trace_product(b).re;
        }
        rhs_rows[k] = rec.p - 0.25;
    }

    // Normal equations N x = rhs.
    let mut n_flat = vec![0.0f64; 15 * 15];
    let mut rhs = [0.0f64; 15];
    for j in 0..15 {
        for l in 0..15 {
            let mut acc = 0.0;
            for k in 0..m {
                acc += design[k][j] * design[k][l];
            }
            n_flat[j * 15 + l] = acc;
        }
        for k in 0..m {
            rhs[j] += design[k][j] * rhs_rows[k];
        }
    }

    let (values, vectors) = eigen::jacobi_real_symmetric(15, &mut n_flat);
    let max_val = values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = RANK_TOLERANCE * max_val.max(f64::MIN_POSITIVE);
    let null_dimension = values.iter().filter(|&&v| v <= cutoff).count();
    if null_dimension > 0 {
        return Err(TomoError::UnderdeterminedSystem { null_dimension });
    }

    // x = sum_k (v_k . rhs / lambda_k) v_k, then rho = I/4 + sum x_j B_j.
    let mut x = [0.0f64; 15];
    for k in 0..15 {
        let mut proj = 0.0;
        for j in 0..15 {
            proj += vectors[j * 15 + k] * rhs[j];
        }
        let coeff = proj / values[k];
        for j in 0..15 {
            x[j] += coeff * vectors[j * 15 + k];
        }
    }

    let mut rho = ComplexMatrix::identity(4).scale_re(0.25);
    for (j, b) in basis.iter().enumerate() {
        rho = rho.add(&b.scale_re(x[j]));
    }
    Ok(rho)
}

/// Knobs for the maximum-likelihood search. The defaults converge to well
/// below measurement precision on every data set in the test corpus.
#[derive(Debug, Clone, Copy)]
pub struct MLConfig {
    pub max_iterations: usize,
    /// Stop once an accepted step improves the objective by less than this.
    pub objective_tolerance: f64,
    /// Stop once the proposed parameter step is shorter than this.
    pub step_tolerance: f64,
}

impl Default for MLConfig {
    fn default() -> Self {
        MLConfig {
            max_iterations: 5000,
            objective_tolerance: 1e-12,
            step_tolerance: 1e-10,
        }
    }
}

impl MLConfig {
    fn validate(&self) -> Result<(), TomoError> {
        if self.max_iterations == 0 {
            return Err(TomoError::BadConfig("max_iterations must be positive".into()));
        }
        if !(self.objective_tolerance > 0.0) || !(self.step_tolerance > 0.0) {
            return Err(TomoError::BadConfig(
                "tolerances must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a maximum-likelihood reconstruction.
#[derive(Debug, Clone)]
pub struct MlFit {
    pub rho: DensityMatrix,
    pub iterations: usize,
    /// Final value of sum_k (Tr(rho Pi_k) - p_k)^2 / (2 sigma_k^2).
    pub objective: f64,
    /// False when the iteration budget ran out before the stopping rule
    /// fired; the fit is then the best iterate found, not a converged one.
    pub converged: bool,
}

const N_PARAMS: usize = 16;

/// Lower-triangle coordinates of the off-diagonal T parameters, fixed order.
const OFF_DIAG: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

fn params_to_t(theta: &[f64; N_PARAMS]) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(4);
    for i in 0..4 {
        t.set(i, i, Complex64::new(theta[i], 0.0));
    }
    for (j, &(r, c)) in OFF_DIAG.iter().enumerate() {
        t.set(r, c, Complex64::new(theta[4 + 2 * j], theta[5 + 2 * j]));
    }
    t
}

fn t_to_params(t: &ComplexMatrix) -> [f64; N_PARAMS] {
    let mut theta = [0.0; N_PARAMS];
    for i in 0..4 {
        theta[i] = t.get(i, i).re;
    }
    for (j, &(r, c)) in OFF_DIAG.iter().enumerate() {
        let e = t.get(r, c);
        theta[4 + 2 * j] = e.re;
        theta[5 + 2 * j] = e.im;
    }
    theta
}

/// Lower-triangular T with T^dag T = rho, built from the bottom row up
/// (the mirror image of an ordinary Cholesky factorization).
fn reverse_cholesky(rho: &ComplexMatrix) -> ComplexMatrix {
    let n = rho.dim();
    let mut t = ComplexMatrix::zeros(n);
    for i in (0..n).rev() {
        let mut acc = rho.get(i, i).re;
        for k in (i + 1)..n {
            acc -= t.get(k, i).norm_sqr();
        }
        let tii = acc.max(1e-30).sqrt();
        t.set(i, i, Complex64::new(tii, 0.0));
        for j in 0..i {
            let mut e = rho.get(i, j);
            for k in (i + 1)..n {
                e -= t.get(k, i).conj() * t.get(k, j);
            }
            t.set(i, j, e / tii);
        }
    }
    t
}

/// Residuals, objective, and analytic Jacobian at one parameter point.
/// A non-finite objective (degenerate T) comes back as infinity so the
/// caller's damping logic rejects the step.
fn evaluate(
    theta: &[f64; N_PARAMS],
    projectors: &[ComplexMatrix],
    records: &[ProbabilityRecord],
    jacobian: Option<&mut Vec<[f64; N_PARAMS]>>,
) -> (f64, Vec<f64>) {
    let t = params_to_t(theta);
    let a = t.adjoint().matmul(&t);
    let tr_a = a.trace().re;
    if !(tr_a > 1e-100) || !tr_a.is_finite() {
        return (f64::INFINITY, vec![0.0; records.len()]);
    }

    let mut residuals = Vec::with_capacity(records.len());
    let mut objective = 0.0;
    let mut predictions = Vec::with_capacity(records.len());
    for (k, rec) in records.iter().enumerate() {
        let f = a.trace_product(&projectors[k]).re / tr_a;
        predictions.push(f);
        let r = (f - rec.p) / rec.sigma;
        objective += 0.5 * r * r;
        residuals.push(r);
    }
    if !objective.is_finite() {
        return (f64::INFINITY, residuals);
    }

    if let Some(jac) = jacobian {
        jac.clear();
        // d f_k / d theta_m with theta_m scaling unit e at T entry (r, c):
        //   [2 Re(conj(e) (T Pi_k)_{rc}) - f_k 2 Re(conj(e) T_{rc})] / Tr(A).
        for (k, rec) in records.iter().enumerate() {
            let tp = t.matmul(&projectors[k]);
            let f = predictions[k];
            let mut row = [0.0; N_PARAMS];
            for m in 0..N_PARAMS {
                let (r, c, imag_unit) = if m < 4 {
                    (m, m, false)
                } else {
                    let (r, c) = OFF_DIAG[(m - 4) / 2];
                    (r, c, (m - 4) % 2 == 1)
                };
                let tp_e = tp.get(r, c);
                let t_e = t.get(r, c);
                // conj(e) z is z for e = 1 and has Re(-i z) = Im(z) for e = i.
                let (num, den) = if imag_unit {
                    (tp_e.im, t_e.im)
                } else {
                    (tp_e.re, t_e.re)
                };
                let df = (2.0 * num - f * 2.0 * den) / tr_a;
                row[m] = df / rec.sigma;
            }
            jac.push(row);
        }
    }
    (objective, residuals)
}

/// Cholesky solve of the damped normal equations; `None` when the damped
/// matrix still is not positive definite.
fn solve_damped(
    h: &[[f64; N_PARAMS]; N_PARAMS],
    g: &[f64; N_PARAMS],
    lambda: f64,
) -> Option<[f64; N_PARAMS]> {
    let max_diag = (0..N_PARAMS).map(|i| h[i][i]).fold(0.0f64, f64::max);
    let floor = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    let mut m = *h;
    for i in 0..N_PARAMS {
        m[i][i] = h[i][i] + lambda * h[i][i].max(floor);
    }

    // In-place lower Cholesky.
    let mut l = [[0.0f64; N_PARAMS]; N_PARAMS];
    for i in 0..N_PARAMS {
        for j in 0..=i {
            let mut acc = m[i][j];
            for k in 0..j {
                acc -= l[i][k] * l[j][k];
            }
            if i == j {
                if acc <= 0.0 {
                    return None;
                }
                l[i][j] = acc.sqrt();
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }

    // Solve L y = -g, then L^T delta = y.
    let mut y = [0.0f64; N_PARAMS];
    for i in 0..N_PARAMS {
        let mut acc = -g[i];
        for k in 0..i {
            acc -= l[i][k] * y[k];
        }
        y[i] = acc / l[i][i];
    }
    let mut delta = [0.0f64; N_PARAMS];
    for i in (0..N_PARAMS).rev() {
        let mut acc = y[i];
        for k in (i + 1)..N_PARAMS {
            acc -= l[k][i] * delta[k];
        }
        delta[i] = acc / l[i][i];
    }
    Some(delta)
}

/// Maximum-likelihood reconstruction: Levenberg-Marquardt over the Cholesky
/// parameters of rho = T^dag T / Tr(T^dag T), started from the clipped
/// linear-inversion estimate.
///
/// The parameterization keeps every iterate physical by construction, so the
/// returned state needs no projection step.
pub fn max_likelihood(ms: &MeasurementSet, config: &MLConfig) -> Result<MlFit, TomoError> {
    config.validate()?;
    for rec in ms.records() {
        if rec.sigma == 0.0 {
            return Err(TomoError::DegenerateSigma(rec.setting));
        }
    }

    // Initialization: linear inversion, eigenvalues clipped to at least 1e-6
    // and renormalized, then factored back into a lower-triangular T.
    let li = linear_inversion(ms)?;
    let eig = eigen::hermitian_eigen(&li);
    let clipped: Vec<f64> = eig.values.iter().map(|&v| v.max(1e-6)).collect();
    let total: f64 = clipped.iter().sum();
    let normalized: Vec<f64> = clipped.iter().map(|v| v / total).collect();
    let rho0 = eig.reassemble(&normalized);
    let mut theta = t_to_params(&reverse_cholesky(&rho0));

    let projectors: Vec<ComplexMatrix> = ms
        .records()
        .iter()
        .map(|r| setting_projector(r.setting))
        .collect();
    let records = ms.records();

    let mut jac: Vec<[f64; N_PARAMS]> = Vec::with_capacity(records.len());
    let (mut objective, mut residuals) =
        evaluate(&theta, &projectors, records, Some(&mut jac));
    let mut lambda = 1e-3;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;

        let mut h = [[0.0f64; N_PARAMS]; N_PARAMS];
        let mut g = [0.0f64; N_PARAMS];
        for (row, &r) in jac.iter().zip(&residuals) {
            for i in 0..N_PARAMS {
                g[i] += row[i] * r;
                for j in 0..=i {
                    h[i][j] += row[i] * row[j];
                }
            }
        }
        for i in 0..N_PARAMS {
            for j in (i + 1)..N_PARAMS {
                h[i][j] = h[j][i];
            }
        }

        let Some(delta) = solve_damped(&h, &g, lambda) else {
            lambda *= 10.0;
            if !lambda.is_finite() {
                return Ok(finish(theta, iterations, objective, false));
            }
            continue;
        };
        let step_norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();

        let mut trial = theta;
        for (t, d) in trial.iter_mut().zip(&delta) {
            *t += d;
        }
        let (trial_objective, _) = evaluate(&trial, &projectors, records, None);

        if trial_objective <= objective {
            let improvement = objective - trial_objective;
            theta = trial;
            // Re-evaluate with the Jacobian for the next step.
            let (new_objective, new_residuals) =
                evaluate(&theta, &projectors, records, Some(&mut jac));
            objective = new_objective;
            residuals = new_residuals;
            lambda = (lambda / 3.0).max(1e-12);
            if improvement <= config.objective_tolerance || step_norm <= config.step_tolerance {
                return Ok(finish(theta, iterations, objective, true));
            }
        } else {
            lambda *= 4.0;
            if step_norm <= config.step_tolerance {
                return Ok(finish(theta, iterations, objective, true));
            }
            if !lambda.is_finite() {
                return Ok(finish(theta, iterations, objective, false));
            }
        }
    }
    // Budget exhausted: hand back the best iterate, flagged.
    Ok(finish(theta, iterations, objective, false))
}

fn finish(theta: [f64; N_PARAMS], iterations: usize, objective: f64, converged: bool) -> MlFit {
    let t = params_to_t(&theta);
    let a = t.adjoint().matmul(&t);
    let rho = a.scale_re(1.0 / a.trace().re);
    let rho = DensityMatrix::new(rho).expect("T^dag T / Tr is physical by construction");
    MlFit {
        rho,
        iterations,
        objective,
        converged,
    }
}

/// Sum over one complete analyzer quadruple, checked against 1.
#[derive(Debug, Clone)]
pub struct QuadrupleSum {
    pub settings: [SettingLabel; 4],
    pub sum: f64,
    pub within_tolerance: bool,
}

/// Sum over one measured orthogonal pair sharing photon 1, checked against
/// 1/2 — the signature of pairwise-normalized data.
#[derive(Debug, Clone)]
pub struct PairSum {
    pub settings: [SettingLabel; 2],
    pub sum: f64,
    pub within_tolerance: bool,
}

/// Outcome of the normalization audit.
#[derive(Debug, Clone)]
pub struct NormalizationReport {
    pub groups: Vec<QuadrupleSum>,
    pub pairs: Vec<PairSum>,
    /// Settings that do not belong to any complete measured quadruple.
    pub unaudited: Vec<SettingLabel>,
    /// Every measured orthogonal pair sums to 1/2 (at least one pair found).
    pub pairwise_convention: bool,
    /// Every complete quadruple sums to 1 (at least one quadruple found).
    pub complete_convention: bool,
}

/// Two-element analyzer bases available in the label alphabet. The diagonal
/// setting D has no measured orthogonal partner here, so it can never complete
/// a quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Linear,   // {H, V}
    Circular, // {L, R}
}

fn axis_of(p: Polarization) -> Option<(Axis, usize)> {
    match p {
        Polarization::H => Some((Axis::Linear, 0)),
        Polarization::V => Some((Axis::Linear, 1)),
        Polarization::L => Some((Axis::Circular, 0)),
        Polarization::R => Some((Axis::Circular, 1)),
        Polarization::D => None,
    }
}

fn letter_of(axis: Axis, idx: usize) -> Polarization {
    match (axis, idx) {
        (Axis::Linear, 0) => Polarization::H,
        (Axis::Linear, _) => Polarization::V,
        (Axis::Circular, 0) => Polarization::L,
        (Axis::Circular, _) => Polarization::R,
    }
}

/// Audits the two normalization invariants a probability set can satisfy:
/// every complete measured quadruple {b1, b1'} x {b2, b2'} against a sum of
/// 1, and every measured photon-2-orthogonal pair at a common photon-1
/// setting against a sum of 1/2. Each convention flag is set when all of its
/// checks pass and at least one group of that kind was found. Settings
/// outside complete quadruples are listed as unaudited.
pub fn check_complete_normalization(ms: &MeasurementSet, tolerance: f64) -> NormalizationReport {
    let axes = [Axis::Linear, Axis::Circular];
    let mut groups = Vec::new();
    let mut grouped = Vec::new();
    for a1 in axes {
        for a2 in axes {
            let settings = [
                lbl(letter_of(a1, 0), letter_of(a2, 0)),
                lbl(letter_of(a1, 0), letter_of(a2, 1)),
                lbl(letter_of(a1, 1), letter_of(a2, 0)),
                lbl(letter_of(a1, 1), letter_of(a2, 1)),
            ];
            let records: Vec<_> = settings.iter().filter_map(|&s| ms.get(s)).collect();
            if records.len() == 4 {
                let sum: f64 = records.iter().map(|r| r.p).sum();
                groups.push(QuadrupleSum {
                    settings,
                    sum,
                    within_tolerance: (sum - 1.0).abs() <= tolerance,
                });
                grouped.extend_from_slice(&settings);
            }
        }
    }

    let mut pairs: Vec<PairSum> = Vec::new();
    for rec in ms.records() {
        let Some(partner) = rec
            .setting
            .photon2
            .orthogonal()
            .map(|p2| lbl(rec.setting.photon1, p2))
        else {
            continue;
        };
        let already = pairs
            .iter()
            .any(|pair| pair.settings.contains(&rec.setting));
        if already {
            continue;
        }
        if let Some(other) = ms.get(partner) {
            let sum = rec.p + other.p;
            pairs.push(PairSum {
                settings: [rec.setting, partner],
                sum,
                within_tolerance: (sum - 0.5).abs() <= tolerance,
            });
        }
    }

    let unaudited = ms
        .records()
        .iter()
        .map(|r| r.setting)
        .filter(|s| !grouped.contains(s))
        .collect();
    let pairwise_convention = !pairs.is_empty() && pairs.iter().all(|p| p.within_tolerance);
    let complete_convention = !groups.is_empty() && groups.iter().all(|g| g.within_tolerance);
    NormalizationReport {
        groups,
        pairs,
        unaudited,
        pairwise_convention,
        complete_convention,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::random::random_density_matrix;
    use crate::qstate::{bell_state, werner_state, BellKind};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn labels_parse_and_print() {
        for s in ["HH", "VD", "LR", "DL"] {
            let label: SettingLabel = s.parse().unwrap();
            assert_eq!(label.to_string(), s);
        }
        for bad in ["", "H", "HHH", "XY", "hv"] {
            assert!(matches!(
                bad.parse::<SettingLabel>(),
                Err(TomoError::BadLabel(_))
            ));
        }
    }

    #[test]
    fn dd_projector_is_quarter_of_all_ones() {
        let proj = setting_projector("DD".parse().unwrap());
        for r in 0..4 {
            for c in 0..4 {
                assert_relative_eq!(proj.get(r, c).re, 0.25, max_relative = 1e-12);
                assert_relative_eq!(proj.get(r, c).im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn born_rule_on_bell_state_matches_hand_values() {
        let rho = bell_state(BellKind::PhiPlus).density();
        let expect = [
            ("HH", 0.5),
            ("HV", 0.0),
            ("DD", 0.5),
            ("LL", 0.0),
            ("LR", 0.5),
            ("DL", 0.25),
        ];
        for (label, want) in expect {
            let got = predicted_probability(&rho, label.parse().unwrap());
            assert_relative_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn duplicate_and_invalid_records_are_rejected() {
        let rec = |s: &str, p: f64, sigma: f64| ProbabilityRecord {
            setting: s.parse().unwrap(),
            p,
            sigma,
        };
        assert!(matches!(
            MeasurementSet::new(vec![rec("HH", 0.5, 0.01), rec("HH", 0.4, 0.01)]),
            Err(TomoError::DuplicateSetting(_))
        ));
        assert!(matches!(
            MeasurementSet::new(vec![rec("HH", f64::NAN, 0.01)]),
            Err(TomoError::InvalidRecord { .. })
        ));
        assert!(matches!(
            MeasurementSet::new(vec![rec("HH", 0.5, -0.01)]),
            Err(TomoError::InvalidRecord { .. })
        ));
    }

    #[test]
    fn linear_inversion_recovers_exact_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let rho = random_density_matrix(4, &mut rng);
            let ms = exact_measurement_set(&rho, &CANONICAL_SETTINGS, 0.01);
            let li = linear_inversion(&ms).unwrap();
            assert!(li.max_abs_diff(rho.matrix()) < 1e-10);
        }
    }

    #[test]
    fn linear_inversion_counts_missing_directions() {
        // The first eight canonical settings probe photon 2 only along H/V:
        // photon 1 spans all four Paulis, photon 2 only {I, Z}, so the
        // traceless joint span has dimension 4 * 2 - 1 = 7 and 8 directions
        // stay unconstrained.
        let rho = werner_state(0.7);
        let ms = exact_measurement_set(&rho, &CANONICAL_SETTINGS[..8], 0.01);
        match linear_inversion(&ms) {
            Err(TomoError::UnderdeterminedSystem { null_dimension }) => {
                assert_eq!(null_dimension, 8)
            }
            other => panic!("expected underdetermined system, got {other:?}"),
        }
    }

    #[test]
    fn max_likelihood_recovers_exact_mixed_state() {
        let rho = werner_state(0.7);
        let ms = exact_measurement_set(&rho, &CANONICAL_SETTINGS, 0.01);
        let fit = max_likelihood(&ms, &MLConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(
            fit.rho.matrix().max_abs_diff(rho.matrix()) < 1e-6,
            "max deviation {:e} after {} iterations",
            fit.rho.matrix().max_abs_diff(rho.matrix()),
            fit.iterations
        );
    }

    #[test]
    fn exhausted_iteration_budget_is_flagged_not_fatal() {
        let rho = bell_state(BellKind::PhiPlus).density();
        let ms = exact_measurement_set(&rho, &CANONICAL_SETTINGS, 0.01);
        let config = MLConfig {
            max_iterations: 2,
            ..MLConfig::default()
        };
        let fit = max_likelihood(&ms, &config).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
        // The flagged result is still a physical best-effort state.
        assert_relative_eq!(fit.rho.matrix().trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn max_likelihood_recovers_rank_deficient_state() {
        // A pure Bell state sits on the boundary of the physical set; the
        // fit must still walk there from the clipped full-rank start.
        let rho = bell_state(BellKind::PhiPlus).density();
        let ms = exact_measurement_set(&rho, &CANONICAL_SETTINGS, 0.01);
        let fit = max_likelihood(&ms, &MLConfig::default()).unwrap();
        assert!(
            fit.rho.matrix().max_abs_diff(rho.matrix()) < 1e-6,
            "max deviation {:e}",
            fit.rho.matrix().max_abs_diff(rho.matrix())
        );
    }

    #[test]
    fn max_likelihood_rejects_zero_sigma() {
        let rho = werner_state(0.5);
        let mut records: Vec<ProbabilityRecord> =
            exact_measurement_set(&rho, &CANONICAL_SETTINGS, 0.01)
                .records()
                .to_vec();
        records[3].sigma = 0.0;
        let ms = MeasurementSet::new(records).unwrap();
        assert!(matches!(
            max_likelihood(&ms, &MLConfig::default()),
            Err(TomoError::DegenerateSigma(_))
        ));
    }

    #[test]
    fn bad_config_is_rejected() {
        let rho = werner_state(0.5);
        let ms = exact_measurement_set(&rho, &CANONICAL_SETTINGS, 0.01);
        let config = MLConfig {
            max_iterations: 0,
            ..MLConfig::default()
        };
        assert!(matches!(
            max_likelihood(&ms, &config),
            Err(TomoError::BadConfig(_))
        ));
    }

    #[test]
    fn normalization_audit_finds_quadruples_and_pairs() {
        let rec = |s: &str, p: f64| ProbabilityRecord {
            setting: s.parse().unwrap(),
            p,
            sigma: 0.01,
        };
        let ms = MeasurementSet::new(vec![
            rec("VV", 0.30470),
            rec("VH", 0.19530),
            rec("HH", 0.32605),
            rec("HV", 0.17395),
            rec("LV", 0.25592),
            rec("LH", 0.24408),
            rec("DL", 0.23479),
            rec("DD", 0.30285),
        ])
        .unwrap();
        let report = check_complete_normalization(&ms, 1e-5);
        assert_eq!(report.groups.len(), 1);
        assert!(report.groups[0].within_tolerance);
        assert_relative_eq!(report.groups[0].sum, 1.0, epsilon = 1e-5);
        // Three orthogonal pairs: (VV,VH), (HH,HV), (LV,LH). DL and DD have
        // no measured partners and the linear quadruple absorbs the rest.
        assert_eq!(report.pairs.len(), 3);
        assert!(report.pairs.iter().all(|p| p.within_tolerance));
        assert!(report.pairwise_convention);
        assert!(report.complete_convention);
        assert_eq!(report.unaudited.len(), 4);

        // Perturbing one pair member breaks the pairwise flag but not the
        // quadruple-based one.
        let mut skewed: Vec<ProbabilityRecord> = ms.records().to_vec();
        skewed[4].p += 0.05;
        let report = check_complete_normalization(&MeasurementSet::new(skewed).unwrap(), 1e-5);
        assert!(!report.pairwise_convention);
        assert!(report.complete_convention);
    }

    #[test]
    fn reverse_cholesky_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let rho = random_density_matrix(4, &mut rng);
            let t = reverse_cholesky(rho.matrix());
            // T must be lower triangular and reproduce rho.
            for r in 0..4 {
                for c in (r + 1)..4 {
                    assert_eq!(t.get(r, c), Complex64::new(0.0, 0.0));
                }
            }
            let back = t.adjoint().matmul(&t);
            assert!(back.max_abs_diff(rho.matrix()) < 1e-10);
        }
    }
}
