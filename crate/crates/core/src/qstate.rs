//! Polarization-qubit states and the dense linear algebra beneath them.
//!
//! Everything in this crate lives in the computational polarization basis with
//! a fixed ordering: single qubits as `[H, V]`, photon pairs as
//! `[HH, HV, VH, VV]` where the first letter belongs to photon 1 (index
//! `2*i1 + i2`). All public operations either preserve that convention or say
//! so loudly in their names.

use num_complex::Complex64;
use thiserror::Error;

pub mod eigen;
pub mod random;

/// Basis labels for one polarization qubit.
pub const QUBIT_BASIS: [&str; 2] = ["H", "V"];

/// Basis labels for a photon pair; the first letter is photon 1.
pub const PAIR_BASIS: [&str; 4] = ["HH", "HV", "VH", "VV"];

/// Default tolerance for Hermiticity, unit trace, and positivity checks.
///
/// Loose enough to accept matrices whose entries were rounded to four decimal
/// places, tight enough to reject anything genuinely unphysical.
pub const VALIDATION_TOLERANCE: f64 = 1e-9;

/// Ways a matrix or amplitude vector can fail to describe a physical state.
#[derive(Debug, Error)]
pub enum StateError {
    #[error("dimension {0} unsupported: states here are 2x2 (one qubit) or 4x4 (a pair)")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not Hermitian: max |m - m^dag| entry is {max_deviation:.3e}")]
    NotHermitian { max_deviation: f64 },
    #[error("trace is {trace:.8}, expected 1")]
    TraceNotOne { trace: f64 },
    #[error("matrix is not positive semidefinite: smallest eigenvalue {value:.3e}")]
    NegativeEigenvalue { value: f64 },
    #[error("amplitude vector has norm {norm:.8}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("operation needs a two-photon (4x4) state, got dimension {0}")]
    NotTwoPhoton(usize),
}

/// Dense complex matrix in row-major order.
///
/// Only the two sizes that occur in this problem are allowed (2x2 and 4x4),
/// which keeps every dimension bug loud. Operations favour clarity over
/// cleverness; at these sizes nothing else pays off.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

fn check_dim(dim: usize) -> Result<usize, StateError> {
    if dim == 2 || dim == 4 {
        Ok(dim)
    } else {
        Err(StateError::UnsupportedDimension(dim))
    }
}

impl ComplexMatrix {
    /// Zero matrix. Panics on a dimension other than 2 or 4 — that is a
    /// programming error, not a data error.
    pub fn zeros(dim: usize) -> Self {
        check_dim(dim).expect("internal matrix dimension");
        ComplexMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix from rows, validating shape (used on data paths).
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, StateError> {
        let dim = check_dim(rows.len())?;
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(StateError::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(ComplexMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimensions must match");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix { dim: self.dim, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimensions must match");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix { dim: self.dim, data }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimensions must match");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.get(r, k) * other.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.get(c, r).conj());
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.get(c, r));
            }
        }
        out
    }

    /// Entry-wise complex conjugate (no transpose).
    pub fn conjugate(&self) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a.conj()).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry magnitude of `self - other`; the workhorse of every
    /// "matrices agree within tolerance" check.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "matrix dimensions must match");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from Hermiticity, max |m[r][c] - conj(m[c][r])|.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                let dev = (self.get(r, c) - self.get(c, r).conj()).norm();
                worst = worst.max(dev);
            }
        }
        worst
    }

    /// Tr(self * other), evaluated without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim, other.dim, "matrix dimensions must match");
        let n = self.dim;
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..n {
            for c in 0..n {
                acc += self.get(r, c) * other.get(c, r);
            }
        }
        acc
    }
}

/// Kronecker product of two single-qubit operators; photon 1 is the left
/// factor, matching the `[HH, HV, VH, VV]` ordering.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    assert_eq!(a.dim(), 2, "tensor factors must be single-qubit (2x2)");
    assert_eq!(b.dim(), 2, "tensor factors must be single-qubit (2x2)");
    let mut out = ComplexMatrix::zeros(4);
    for i1 in 0..2 {
        for i2 in 0..2 {
            for j1 in 0..2 {
                for j2 in 0..2 {
                    out.set(2 * i1 + j1, 2 * i2 + j2, a.get(i1, i2) * b.get(j1, j2));
                }
            }
        }
    }
    out
}

/// Which photon of a pair an operation acts on (or keeps).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Photon {
    One,
    Two,
}

/// Normalized pure state over 2 or 4 basis kets.
#[derive(Debug, Clone)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Validates the norm (within [`VALIDATION_TOLERANCE`]) and stores the
    /// amplitudes renormalized to exactly unit length.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, StateError> {
        check_dim(amplitudes.len())?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > VALIDATION_TOLERANCE {
            return Err(StateError::NotNormalized { norm });
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / norm).collect();
        Ok(PureState { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Rank-one projector |psi><psi|.
    pub fn projector(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.amplitudes[r] * self.amplitudes[c].conj());
            }
        }
        out
    }

    /// The same state as a density matrix.
    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::new(self.projector()).expect("projector of a unit vector is physical")
    }
}

/// The four maximally entangled two-photon states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellKind {
    /// (|HH> + |VV>)/sqrt2
    PhiPlus,
    /// (|HH> - |VV>)/sqrt2
    PhiMinus,
    /// (|HV> + |VH>)/sqrt2
    PsiPlus,
    /// (|HV> - |VH>)/sqrt2
    PsiMinus,
}

pub fn bell_state(kind: BellKind) -> PureState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b, sign) = match kind {
        BellKind::PhiPlus => (0, 3, 1.0),
        BellKind::PhiMinus => (0, 3, -1.0),
        BellKind::PsiPlus => (1, 2, 1.0),
        BellKind::PsiMinus => (1, 2, -1.0),
    };
    let mut amps = vec![Complex64::new(0.0, 0.0); 4];
    amps[a] = Complex64::new(s, 0.0);
    amps[b] = Complex64::new(sign * s, 0.0);
    PureState::new(amps).expect("bell amplitudes are normalized")
}

/// Physical density matrix: Hermitian, unit trace, positive semidefinite
/// (each within the validation tolerance).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates with the default [`VALIDATION_TOLERANCE`].
    pub fn new(matrix: ComplexMatrix) -> Result<Self, StateError> {
        Self::with_tolerance(matrix, VALIDATION_TOLERANCE)
    }

    /// Checks Hermiticity, unit trace, and positivity, each within `tol`.
    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self, StateError> {
        let dev = matrix.hermitian_deviation();
        if dev > tol {
            return Err(StateError::NotHermitian { max_deviation: dev });
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > tol || trace.im.abs() > tol {
            return Err(StateError::TraceNotOne { trace: trace.re });
        }
        let min_eig = eigen::hermitian_eigenvalues(&matrix)[0];
        if min_eig < -tol {
            return Err(StateError::NegativeEigenvalue { value: min_eig });
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Basis labels in storage order.
    pub fn basis(&self) -> &'static [&'static str] {
        match self.dim() {
            2 => &QUBIT_BASIS,
            _ => &PAIR_BASIS,
        }
    }

    /// The maximally mixed state I/d.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            matrix: ComplexMatrix::identity(dim).scale_re(1.0 / dim as f64),
        }
    }

    /// Tr(rho^2); 1 for pure states, 1/d for the maximally mixed state.
    pub fn purity(&self) -> f64 {
        // For Hermitian rho, Tr(rho^2) = sum of squared entry magnitudes.
        let n = self.dim();
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += self.matrix.get(r, c).norm_sqr();
            }
        }
        acc
    }

    /// Linear entropy d/(d-1) * (1 - Tr rho^2), normalized to [0, 1].
    pub fn linear_entropy(&self) -> f64 {
        let d = self.dim() as f64;
        let s = d / (d - 1.0) * (1.0 - self.purity());
        s.clamp(0.0, 1.0)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigen::hermitian_eigenvalues(&self.matrix)
    }

    /// Reduced state of the kept photon (two-photon states only).
    pub fn partial_trace(&self, keep: Photon) -> Result<DensityMatrix, StateError> {
        if self.dim() != 4 {
            return Err(StateError::NotTwoPhoton(self.dim()));
        }
        let mut out = ComplexMatrix::zeros(2);
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..2 {
                    let (r, c) = match keep {
                        Photon::One => (2 * a + j, 2 * b + j),
                        Photon::Two => (2 * j + a, 2 * j + b),
                    };
                    acc += self.matrix.get(r, c);
                }
                out.set(a, b, acc);
            }
        }
        // A partial trace of a physical state is physical; validation is a
        // cheap belt-and-braces check here.
        DensityMatrix::new(out)
    }

    /// Partial transpose over one photon. The result is Hermitian and
    /// unit-trace but may have negative eigenvalues — that is the point of the
    /// test — so it comes back as a plain matrix.
    pub fn partial_transpose(&self, photon: Photon) -> Result<ComplexMatrix, StateError> {
        if self.dim() != 4 {
            return Err(StateError::NotTwoPhoton(self.dim()));
        }
        let mut out = ComplexMatrix::zeros(4);
        for i1 in 0..2 {
            for j1 in 0..2 {
                for i2 in 0..2 {
                    for j2 in 0..2 {
                        let v = match photon {
                            // transpose photon-1 indices
                            Photon::One => self.matrix.get(2 * i2 + j1, 2 * i1 + j2),
                            // transpose photon-2 indices
                            Photon::Two => self.matrix.get(2 * i1 + j2, 2 * i2 + j1),
                        };
                        out.set(2 * i1 + j1, 2 * i2 + j2, v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Overlap <psi| rho |psi>, clamped to [0, 1].
    pub fn fidelity_pure(&self, psi: &PureState) -> Result<f64, StateError> {
        if psi.dim() != self.dim() {
            return Err(StateError::DimensionMismatch {
                expected: self.dim(),
                actual: psi.dim(),
            });
        }
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..n {
            for c in 0..n {
                acc += psi.amplitudes[r].conj() * self.matrix.get(r, c) * psi.amplitudes[c];
            }
        }
        Ok(acc.re.clamp(0.0, 1.0))
    }
}

/// Werner state p |PhiPlus><PhiPlus| + (1-p) I/4.
///
/// Its concurrence is known in closed form, max(0, (3p-1)/2), which makes it
/// the standard analytic cross-check for the entanglement measures.
pub fn werner_state(p: f64) -> DensityMatrix {
    assert!((0.0..=1.0).contains(&p), "werner parameter must be in [0,1]");
    let phi = bell_state(BellKind::PhiPlus).projector().scale_re(p);
    let mixed = ComplexMatrix::identity(4).scale_re((1.0 - p) / 4.0);
    DensityMatrix::new(phi.add(&mixed)).expect("werner mixture is physical")
}
