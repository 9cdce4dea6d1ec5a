//! Dense symmetric linear algebra.
//!
//! Every matrix in the stepsize and smoothness formulas (L, L_i, D, W and the
//! sketch moments) is a [`SymmetricMatrix`]. The eigendecomposition is computed
//! once, at construction, by cyclic Jacobi rotations; every spectral quantity
//! (λmax, λmin, square roots, inverses, log-determinants) is then read off the
//! cached spectrum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which an eigenvalue is treated as non-positive.
pub const PD_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 64;

/// Eigenpairs with eigenvalues in ascending order. `vectors` is row-major and
/// holds the eigenvectors as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

/// A dense, row-major, exactly symmetric matrix with a cached eigendecomposition.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
    eigen: Eigen,
}

/// JSON wire form: `{"dim": d, "entries": [row-major d*d values]}`.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    dim: usize,
    entries: Vec<f64>,
}

impl TryFrom<MatrixRepr> for SymmetricMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        SymmetricMatrix::new(repr.dim, repr.entries)
    }
}

impl From<SymmetricMatrix> for MatrixRepr {
    fn from(m: SymmetricMatrix) -> Self {
        MatrixRepr { dim: m.dim, entries: m.entries }
    }
}

impl PartialEq for SymmetricMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries == other.entries
    }
}

impl SymmetricMatrix {
    /// Builds a matrix from row-major entries, replacing them by (A + Aᵀ)/2.
    pub fn new(dim: usize, mut entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMatrix("dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::dim(dim * dim, entries.len()));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("non-finite entry {bad}")));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
                entries[i * dim + j] = avg;
                entries[j * dim + i] = avg;
            }
        }
        let eigen = jacobi_eigen(dim, &entries);
        Ok(SymmetricMatrix { dim, entries, eigen })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        Self::diagonal(&vec![c; dim])
    }

    /// Diagonal matrix; its spectrum is known, so no rotations are run.
    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        assert!(dim > 0, "diagonal matrix needs at least one entry");
        let mut entries = vec![0.0; dim * dim];
        for (i, &v) in diag.iter().enumerate() {
            entries[i * dim + i] = v;
        }
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
        let values = order.iter().map(|&i| diag[i]).collect();
        let mut vectors = vec![0.0; dim * dim];
        for (col, &i) in order.iter().enumerate() {
            vectors[i * dim + col] = 1.0;
        }
        SymmetricMatrix { dim, entries, eigen: Eigen { values, vectors } }
    }

    /// Σ_k w_k v_k v_kᵀ over the given rows, plus `shift`·I.
    pub fn gram(dim: usize, rows: &[&[f64]], weight: f64, shift: f64) -> Result<Self> {
        let mut entries = vec![0.0; dim * dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::dim(dim, row.len()));
            }
            for i in 0..dim {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..dim {
                    entries[i * dim + j] += weight * ri * row[j];
                }
            }
        }
        for i in 0..dim {
            entries[i * dim + i] += shift;
            for j in (i + 1)..dim {
                entries[j * dim + i] = entries[i * dim + j];
            }
        }
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn eigen(&self) -> &Eigen {
        &self.eigen
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigen.values.last().expect("non-empty spectrum")
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigen.values[0]
    }

    pub fn is_positive_definite(&self) -> bool {
        let top = self.lambda_max();
        top > 0.0 && self.lambda_min() > PD_TOL * top
    }

    pub(crate) fn require_pd(&self) -> Result<()> {
        if self.is_positive_definite() {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite { lambda_min: self.lambda_min() })
        }
    }

    fn check_dim(&self, other: &SymmetricMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::dim(self.dim, other.dim));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// diag(A): the matrix with the off-diagonal entries zeroed.
    pub fn diag_part(&self) -> Self {
        let d: Vec<f64> = (0..self.dim).map(|i| self.get(i, i)).collect();
        Self::diagonal(&d)
    }

    /// c·A. The eigenvectors are unchanged; eigenvalues are rescaled (and
    /// reversed when c < 0).
    pub fn scale(&self, c: f64) -> Self {
        let entries = self.entries.iter().map(|v| c * v).collect();
        let mut values: Vec<f64> = self.eigen.values.iter().map(|v| c * v).collect();
        let mut vectors = self.eigen.vectors.clone();
        if c < 0.0 {
            values.reverse();
            let n = self.dim;
            for row in 0..n {
                vectors[row * n..(row + 1) * n].reverse();
            }
        }
        SymmetricMatrix { dim: self.dim, entries, eigen: Eigen { values, vectors } }
    }

    pub fn add(&self, other: &SymmetricMatrix) -> Result<Self> {
        self.check_dim(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Self::new(self.dim, entries)
    }

    pub fn sub(&self, other: &SymmetricMatrix) -> Result<Self> {
        self.check_dim(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Self::new(self.dim, entries)
    }

    /// Σ_k c_k A_k for matrices of a common dimension.
    pub fn linear_combination(terms: &[(f64, &SymmetricMatrix)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidMatrix("empty linear combination".into()))?
            .1;
        let mut entries = vec![0.0; first.dim * first.dim];
        for (c, m) in terms {
            first.check_dim(m)?;
            for (e, v) in entries.iter_mut().zip(&m.entries) {
                *e += c * v;
            }
        }
        Self::new(first.dim, entries)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector length must match matrix dimension");
        self.entries
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// xᵀ A x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// V f(Λ) Vᵀ.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = self.dim;
        let fv: Vec<f64> = self.eigen.values.iter().map(|&l| f(l)).collect();
        let v = &self.eigen.vectors;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += v[i * n + k] * fv[k] * v[j * n + k];
                }
                entries[i * n + j] = s;
                entries[j * n + i] = s;
            }
        }
        Self::new(n, entries)
    }

    /// A^{1/2} for PSD A; tiny negative eigenvalues from rounding are clamped to 0.
    pub fn sqrt_psd(&self) -> Result<Self> {
        if self.lambda_min() < -PD_TOL * self.lambda_max().abs().max(1.0) {
            return Err(Error::NotPositiveDefinite { lambda_min: self.lambda_min() });
        }
        self.spectral_map(|l| l.max(0.0).sqrt())
    }

    /// A^{-1/2} for PD A.
    pub fn inv_sqrt(&self) -> Result<Self> {
        self.require_pd()?;
        self.spectral_map(|l| 1.0 / l.sqrt())
    }

    /// A·B·A for symmetric A and B; the result is symmetric.
    pub fn congruence(&self, inner: &SymmetricMatrix) -> Result<Self> {
        self.check_dim(inner)?;
        let n = self.dim;
        let ab = matmul(n, &self.entries, &inner.entries);
        Self::new(n, matmul(n, &ab, &self.entries))
    }

    /// log det A computed from the spectrum.
    pub fn log_det(&self) -> Result<f64> {
        self.require_pd()?;
        Ok(self.eigen.values.iter().map(|l| l.ln()).sum())
    }
}

fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let row = &b[k * n..(k + 1) * n];
            for (o, bkj) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                *o += aik * bkj;
            }
        }
    }
    out
}

/// Cyclic Jacobi eigenvalue algorithm on a symmetric row-major matrix.
fn jacobi_eigen(n: usize, entries: &[f64]) -> Eigen {
    let mut a = entries.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob_sq: f64 = a.iter().map(|x| x * x).sum();
    let stop = (1e-15_f64).powi(2) * frob_sq;

    for _ in 0..MAX_SWEEPS {
        let mut off_sq = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off_sq += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        if off_sq <= stop || off_sq == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                if t == 0.0 {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_p = c * akp - s * akq;
                    let new_q = s * akp + c * akq;
                    a[k * n + p] = new_p;
                    a[p * n + k] = new_p;
                    a[k * n + q] = new_q;
                    a[q * n + k] = new_q;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + src];
        }
    }
    Eigen { values, vectors }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns, row-major).
pub fn eig_sym(a: &SymmetricMatrix) -> (Vec<f64>, Vec<f64>) {
    (a.eigen.values.clone(), a.eigen.vectors.clone())
}

/// A ⪰ B up to `tol`: λmin(A − B) ≥ −tol.
pub fn psd_geq(a: &SymmetricMatrix, b: &SymmetricMatrix, tol: f64) -> Result<bool> {
    Ok(a.sub(b)?.lambda_min() >= -tol)
}

/// ‖x‖²_Q = xᵀQx for positive definite Q.
pub fn weighted_norm_sq(x: &[f64], q: &SymmetricMatrix) -> Result<f64> {
    if x.len() != q.dim() {
        return Err(Error::dim(q.dim(), x.len()));
    }
    q.require_pd()?;
    Ok(q.quad_form(x).max(0.0))
}

/// Returns det(D)^{1/d} and D / det(D)^{1/d}.
pub fn det_normalized(d: &SymmetricMatrix) -> Result<(f64, SymmetricMatrix)> {
    if d.lambda_min() <= 0.0 {
        return Err(Error::NotPositiveDefinite { lambda_min: d.lambda_min() });
    }
    let normalizer = (d.log_det()? / d.dim() as f64).exp();
    Ok((normalizer, d.scale(1.0 / normalizer)))
}

/// A⁻¹ = V diag(1/λ) Vᵀ.
pub fn inv_psd(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    a.require_pd()?;
    a.spectral_map(|l| 1.0 / l)
}
