//! Self-contained Hermitian eigendecomposition.
//!
//! A cyclic Jacobi sweep over a real symmetric matrix is the whole kernel.
//! Complex Hermitian input H = A + iB is handled through the standard real
//! embedding [[A, -B], [B, A]]: its spectrum is that of H with every
//! eigenvalue doubled, and a real eigenvector (x; y) maps back to the complex
//! eigenvector x + iy. Complex Gram-Schmidt over the sorted real columns then
//! picks one representative per doubled eigenvalue.
//!
//! Everything here is plain f64 arithmetic in a fixed iteration order, so
//! identical input bytes give identical output bytes — the Monte-Carlo layers
//! and the byte-identical-rerun guarantee of the command-line tool depend on
//! that.

use num_complex::Complex64;

use super::ComplexMatrix;

const MAX_SWEEPS: usize = 64;

/// Eigensystem of a Hermitian matrix: ascending eigenvalues paired with
/// orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column k is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Rebuilds V f(Lambda) V^dag; with the identity function this is the
    /// round-trip check, with sqrt it is the PSD square root.
    fn assemble(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += f(self.values[k])
                        * self.vectors.get(r, k)
                        * self.vectors.get(c, k).conj();
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.assemble(|x| x)
    }

    /// V diag(values) V^dag with substituted eigenvalues — the spectral-edit
    /// primitive behind eigenvalue clipping.
    pub fn reassemble(&self, values: &[f64]) -> ComplexMatrix {
        assert_eq!(values.len(), self.values.len(), "one value per eigenvector");
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += values[k] * self.vectors.get(r, k) * self.vectors.get(c, k).conj();
                }
                out.set(r, c, acc);
            }
        }
        out
    }
}

/// Cyclic Jacobi diagonalization of a real symmetric matrix (row-major,
/// length n*n). Returns the unsorted eigenvalues and the rotation product V
/// (row-major; column k is the eigenvector of eigenvalue k).
pub(crate) fn jacobi_real_symmetric(n: usize, a: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(a.len(), n * n);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n < 2 {
        return ((0..n).map(|i| a[i * n + i]).collect(), v);
    }

    for _sweep in 0..MAX_SWEEPS {
        let mut off_sum = 0.0;
        let mut diag_sum = 0.0;
        for p in 0..n {
            diag_sum += a[p * n + p].abs();
            for q in (p + 1)..n {
                off_sum += a[p * n + q].abs();
            }
        }
        if off_sum <= f64::EPSILON * (diag_sum + off_sum) || off_sum == 0.0 {
            break;
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1.0e-300 {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // Smaller-magnitude root of t^2 + 2*t*theta - 1 = 0 keeps the
                // rotation angle below pi/4 and the iteration stable.
                let t = if theta.abs() > 1.0e150 {
                    0.5 / theta
                } else if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = aip - s * (aiq + tau * aip);
                    a[q * n + i] = aiq + s * (aip - tau * aiq);
                    a[p * n + i] = a[i * n + p];
                    a[i * n + q] = a[q * n + i];
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = vip - s * (viq + tau * vip);
                    v[i * n + q] = viq + s * (vip - tau * viq);
                }
            }
        }
    }

    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Indices sorted ascending by eigenvalue, ties broken by index so the order
/// is fully deterministic.
fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("eigenvalues are finite")
            .then(a.cmp(&b))
    });
    order
}

/// [[Re, -Im], [Im, Re]] embedding of a Hermitian matrix, flat row-major.
fn real_embedding(m: &ComplexMatrix) -> (usize, Vec<f64>) {
    let n = m.dim();
    let n2 = 2 * n;
    let mut a = vec![0.0; n2 * n2];
    for r in 0..n {
        for c in 0..n {
            let e = m.get(r, c);
            a[r * n2 + c] = e.re;
            a[r * n2 + (n + c)] = -e.im;
            a[(n + r) * n2 + c] = e.im;
            a[(n + r) * n2 + (n + c)] = e.re;
        }
    }
    (n2, a)
}

/// Ascending eigenvalues of a Hermitian matrix.
///
/// The embedding doubles every eigenvalue, so after sorting the 2n values the
/// even-indexed ones are the spectrum.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.dim();
    let (n2, mut a) = real_embedding(m);
    let (values, _) = jacobi_real_symmetric(n2, &mut a);
    let order = ascending_order(&values);
    (0..n).map(|k| values[order[2 * k]]).collect()
}

/// Full eigensystem of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &ComplexMatrix) -> HermitianEigen {
    let n = m.dim();
    let (n2, mut a) = real_embedding(m);
    let (values, vectors) = jacobi_real_symmetric(n2, &mut a);
    let order = ascending_order(&values);

    // Each complex eigendirection z spans exactly the real plane
    // {(x; y), (-y; x)} in the embedding, so of the 2n real columns exactly n
    // survive a complex Gram-Schmidt sweep. The residual threshold only
    // matters inside (numerically) degenerate clusters; if a pathological
    // cluster leaves fewer than n survivors, retry essentially unfiltered.
    let mut kept_values: Vec<f64> = Vec::with_capacity(n);
    let mut kept_vectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for threshold in [1e-4, 1e-12] {
        kept_values.clear();
        kept_vectors.clear();
        for &k in &order {
            if kept_vectors.len() == n {
                break;
            }
            let mut z: Vec<Complex64> = (0..n)
                .map(|j| Complex64::new(vectors[j * n2 + k], vectors[(n + j) * n2 + k]))
                .collect();
            // Re-orthogonalize twice; once is not always enough in clusters.
            for _ in 0..2 {
                for u in &kept_vectors {
                    let overlap: Complex64 =
                        u.iter().zip(&z).map(|(ui, zi)| ui.conj() * zi).sum();
                    for (zi, ui) in z.iter_mut().zip(u) {
                        *zi -= overlap * ui;
                    }
                }
            }
            let norm = z.iter().map(|zi| zi.norm_sqr()).sum::<f64>().sqrt();
            if norm > threshold {
                for zi in z.iter_mut() {
                    *zi /= norm;
                }
                kept_values.push(values[k]);
                kept_vectors.push(z);
            }
        }
        if kept_vectors.len() == n {
            break;
        }
    }
    assert_eq!(
        kept_vectors.len(),
        n,
        "eigenvector recovery from the real embedding failed"
    );

    let mut vmat = ComplexMatrix::zeros(n);
    for (k, z) in kept_vectors.iter().enumerate() {
        for (j, &zj) in z.iter().enumerate() {
            vmat.set(j, k, zj);
        }
    }
    HermitianEigen {
        values: kept_values,
        vectors: vmat,
    }
}

/// Square root of a positive semidefinite Hermitian matrix. Eigenvalues that
/// dip negative by rounding are clamped to zero rather than propagated as NaN.
pub fn sqrt_psd(m: &ComplexMatrix) -> ComplexMatrix {
    hermitian_eigen(m).assemble(|x| x.max(0.0).sqrt())
}
