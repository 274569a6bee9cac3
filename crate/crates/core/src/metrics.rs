//! Entanglement and polarization measures for two-photon states.
//!
//! The headline quantity is the tangle (squared concurrence), computed from
//! the spin-flip spectrum; from it follow the entanglement of formation and
//! the verdict of the partial-transpose test. Alongside these, the module
//! quantifies mixedness (linear entropy), the polarization of each photon's
//! marginal (Stokes vectors and degree of polarization), and the degree of
//! correlation between linear analyzers — everything needed to judge whether
//! a reconstructed state is entangled, and whether shortcut entanglement
//! criteria were applicable to it in the first place.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::qstate::{eigen, tensor, ComplexMatrix, DensityMatrix, Photon};

/// Marginals with a degree of polarization at or below this default count as
/// unpolarized for the largest-eigenvalue entanglement criterion.
pub const DEFAULT_DOP_THRESHOLD: f64 = 0.01;

/// Above this linear entropy every two-qubit state is separable, so any
/// nonzero tangle reported there would be a numerical artifact.
pub const SEPARABLE_ENTROPY_BOUND: f64 = 8.0 / 9.0;

/// A partial-transpose eigenvalue below this counts as genuinely negative.
const PERES_TOLERANCE: f64 = 1e-9;

/// Slack accepted (and clamped away) on nominally-[0, 1] inputs, so that
/// round-tripped floats like 1 + 1e-16 do not error.
const RANGE_SLACK: f64 = 1e-9;

/// The largest eigenvalue must exceed 1/2 for the eigenvalue criterion to
/// indicate entanglement.
const EIGENVALUE_METHOD_THRESHOLD: f64 = 0.5;

/// Correlation denominators below this are reported as degenerate instead of
/// being divided through.
const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("operation needs a two-photon (4x4) state, got dimension {0}")]
    NotTwoPhoton(usize),
    #[error("operation needs a single-photon (2x2) state, got dimension {0}")]
    NotSingleQubit(usize),
    #[error("{name} = {value} lies outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("degree of correlation undefined: both analyzer probabilities vanish")]
    DegenerateDenominator,
}

fn require_pair(rho: &DensityMatrix) -> Result<(), MetricsError> {
    if rho.dim() == 4 {
        Ok(())
    } else {
        Err(MetricsError::NotTwoPhoton(rho.dim()))
    }
}

fn require_qubit(rho: &DensityMatrix) -> Result<(), MetricsError> {
    if rho.dim() == 2 {
        Ok(())
    } else {
        Err(MetricsError::NotSingleQubit(rho.dim()))
    }
}

fn unit_interval(name: &'static str, value: f64) -> Result<f64, MetricsError> {
    if value.is_finite() && (-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&value) {
        Ok(value.clamp(0.0, 1.0))
    } else {
        Err(MetricsError::OutOfRange { name, value })
    }
}

/// Spin-flipped state (sigma_y tensor sigma_y) rho* (sigma_y tensor sigma_y).
pub fn spin_flip(rho: &DensityMatrix) -> Result<ComplexMatrix, MetricsError> {
    require_pair(rho)?;
    let mut sy = ComplexMatrix::zeros(2);
    sy.set(0, 1, Complex64::new(0.0, -1.0));
    sy.set(1, 0, Complex64::new(0.0, 1.0));
    let yy = tensor(&sy, &sy);
    Ok(yy.matmul(&rho.matrix().conjugate()).matmul(&yy))
}

/// The concurrence together with the spectrum it came from.
#[derive(Debug, Clone, Serialize)]
pub struct ConcurrenceBreakdown {
    pub value: f64,
    /// Square roots of the spin-flip spectrum, descending; the concurrence is
    /// max(0, lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).
    pub lambdas: [f64; 4],
}

/// Concurrence via the spin-flip construction, evaluated on the Hermitian
/// form sqrt(rho) rho~ sqrt(rho) so the eigenproblem stays real and
/// deterministic. Eigenvalues that dip negative by rounding are clamped to
/// zero before the square root.
pub fn concurrence(rho: &DensityMatrix) -> Result<ConcurrenceBreakdown, MetricsError> {
    require_pair(rho)?;
    let flipped = spin_flip(rho)?;
    let root = eigen::sqrt_psd(rho.matrix());
    let m = root.matmul(&flipped).matmul(&root);
    let mu = eigen::hermitian_eigenvalues(&m);
    let mut lambdas = [0.0; 4];
    for (i, &v) in mu.iter().rev().enumerate() {
        lambdas[i] = v.max(0.0).sqrt();
    }
    let value = (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0);
    Ok(ConcurrenceBreakdown { value, lambdas })
}

/// Tangle, the squared concurrence.
pub fn tangle(rho: &DensityMatrix) -> Result<f64, MetricsError> {
    let c = concurrence(rho)?.value;
    Ok(c * c)
}

/// Shannon entropy of a biased coin, in bits; 0 log 0 reads as 0.
pub fn binary_entropy(x: f64) -> Result<f64, MetricsError> {
    let x = unit_interval("binary entropy argument", x)?;
    let mut h = 0.0;
    for z in [x, 1.0 - x] {
        if z > 0.0 {
            h -= z * z.log2();
        }
    }
    Ok(h)
}

/// Entanglement of formation from the tangle:
/// h((1 + sqrt(1 - T)) / 2) with h the binary entropy.
pub fn entanglement_of_formation(tangle: f64) -> Result<f64, MetricsError> {
    let t = unit_interval("tangle", tangle)?;
    binary_entropy((1.0 + (1.0 - t).sqrt()) / 2.0)
}

/// Verdict of the partial-transpose test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeresTest {
    pub min_eigenvalue: f64,
    /// True when the smallest partial-transpose eigenvalue is negative beyond
    /// numerical tolerance — for two qubits, exactly the entangled states.
    pub entangled: bool,
}

pub fn peres_test(rho: &DensityMatrix) -> Result<PeresTest, MetricsError> {
    require_pair(rho)?;
    let pt = rho
        .partial_transpose(Photon::Two)
        .expect("dimension already checked");
    let min_eigenvalue = eigen::hermitian_eigenvalues(&pt)[0];
    Ok(PeresTest {
        min_eigenvalue,
        entangled: min_eigenvalue < -PERES_TOLERANCE,
    })
}

/// Single-photon Stokes vector in the (H/V, D/A, L/R) convention:
/// s1 = P_H - P_V, s2 = P_D - P_A, s3 = P_L - P_R.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StokesVector {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    /// Length of the Stokes vector — identically the degree of polarization.
    pub fn length(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt()
    }
}

pub fn stokes_vector(rho: &DensityMatrix) -> Result<StokesVector, MetricsError> {
    require_qubit(rho)?;
    let m = rho.matrix();
    Ok(StokesVector {
        s1: m.get(0, 0).re - m.get(1, 1).re,
        s2: 2.0 * m.get(0, 1).re,
        s3: -2.0 * m.get(0, 1).im,
    })
}

/// Degree of polarization sqrt(1 - 4 det rho) of a single-photon state;
/// 0 for unpolarized light, 1 for a pure polarization.
pub fn degree_of_polarization(rho: &DensityMatrix) -> Result<f64, MetricsError> {
    require_qubit(rho)?;
    let m = rho.matrix();
    let det = m.get(0, 0).re * m.get(1, 1).re - m.get(0, 1).norm_sqr();
    Ok((1.0 - 4.0 * det).max(0.0).sqrt())
}

/// Verdict of the largest-eigenvalue shortcut criterion, which is only
/// meaningful when both marginals are unpolarized.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EigenvalueMethod {
    pub largest_eigenvalue: f64,
    /// Both marginal degrees of polarization lie at or below the threshold.
    pub marginals_unpolarized: bool,
    /// Largest eigenvalue above 1/2 with unpolarized marginals.
    pub indicates_entanglement: bool,
}

pub fn eigenvalue_method(
    rho: &DensityMatrix,
    dop_threshold: f64,
) -> Result<EigenvalueMethod, MetricsError> {
    require_pair(rho)?;
    let largest_eigenvalue = *rho
        .eigenvalues()
        .last()
        .expect("two-photon state has four eigenvalues");
    let dop1 = degree_of_polarization(&rho.partial_trace(Photon::One).expect("4x4 state"))?;
    let dop2 = degree_of_polarization(&rho.partial_trace(Photon::Two).expect("4x4 state"))?;
    let marginals_unpolarized = dop1 <= dop_threshold && dop2 <= dop_threshold;
    Ok(EigenvalueMethod {
        largest_eigenvalue,
        marginals_unpolarized,
        indicates_entanglement: marginals_unpolarized
            && largest_eigenvalue > EIGENVALUE_METHOD_THRESHOLD,
    })
}

/// Degree of correlation between linear analyzers at the same angle theta on
/// both photons: (P(theta, theta) - P(theta, theta+90°)) / (their sum).
/// The analyzer ket is cos(theta)|H> + sin(theta)|V>.
pub fn degree_of_correlation(rho: &DensityMatrix, theta: f64) -> Result<f64, MetricsError> {
    require_pair(rho)?;
    let p_same = linear_pair_probability(rho, theta, theta);
    let p_perp = linear_pair_probability(rho, theta, theta + std::f64::consts::FRAC_PI_2);
    let denom = p_same + p_perp;
    if denom.abs() < DENOMINATOR_FLOOR {
        return Err(MetricsError::DegenerateDenominator);
    }
    Ok((p_same - p_perp) / denom)
}

fn linear_projector(theta: f64) -> ComplexMatrix {
    let (s, c) = theta.sin_cos();
    let mut m = ComplexMatrix::zeros(2);
    m.set(0, 0, Complex64::new(c * c, 0.0));
    m.set(0, 1, Complex64::new(c * s, 0.0));
    m.set(1, 0, Complex64::new(c * s, 0.0));
    m.set(1, 1, Complex64::new(s * s, 0.0));
    m
}

fn linear_pair_probability(rho: &DensityMatrix, theta1: f64, theta2: f64) -> f64 {
    let proj = tensor(&linear_projector(theta1), &linear_projector(theta2));
    rho.matrix().trace_product(&proj).re
}

/// Everything this module can say about one two-photon state, in one pass.
/// Serializes directly as the metrics report of the command-line tool.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub tangle: f64,
    pub concurrence: f64,
    pub entanglement_of_formation: f64,
    pub spin_flip_lambdas: [f64; 4],
    pub linear_entropy: f64,
    /// Linear entropy above 8/9: every such state is separable.
    pub separable_by_entropy: bool,
    pub peres_min_eigenvalue: f64,
    pub peres_entangled: bool,
    pub largest_eigenvalue: f64,
    pub dop_photon1: f64,
    pub dop_photon2: f64,
    pub stokes_photon1: StokesVector,
    pub stokes_photon2: StokesVector,
    pub marginals_unpolarized: bool,
    pub eigenvalue_method_indicates_entanglement: bool,
}

impl MetricsReport {
    pub fn from_state(rho: &DensityMatrix, dop_threshold: f64) -> Result<Self, MetricsError> {
        require_pair(rho)?;
        let breakdown = concurrence(rho)?;
        let tangle = breakdown.value * breakdown.value;
        let linear_entropy = rho.linear_entropy();
        let peres = peres_test(rho)?;
        let eig_method = eigenvalue_method(rho, dop_threshold)?;
        let marginal1 = rho.partial_trace(Photon::One).expect("4x4 state");
        let marginal2 = rho.partial_trace(Photon::Two).expect("4x4 state");
        Ok(MetricsReport {
            tangle,
            concurrence: breakdown.value,
            entanglement_of_formation: entanglement_of_formation(tangle)?,
            spin_flip_lambdas: breakdown.lambdas,
            linear_entropy,
            separable_by_entropy: linear_entropy > SEPARABLE_ENTROPY_BOUND,
            peres_min_eigenvalue: peres.min_eigenvalue,
            peres_entangled: peres.entangled,
            largest_eigenvalue: eig_method.largest_eigenvalue,
            dop_photon1: degree_of_polarization(&marginal1)?,
            dop_photon2: degree_of_polarization(&marginal2)?,
            stokes_photon1: stokes_vector(&marginal1)?,
            stokes_photon2: stokes_vector(&marginal2)?,
            marginals_unpolarized: eig_method.marginals_unpolarized,
            eigenvalue_method_indicates_entanglement: eig_method.indicates_entanglement,
        })
    }
}
