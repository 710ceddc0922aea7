//! Dense complex-Hermitian matrix algebra for small density matrices.
//!
//! Everything here works on row-major `dim × dim` storage of [`C64`]. The
//! composite-basis convention is big-endian: in a tensor product the first
//! factor owns the most significant digit of the basis index, so for two
//! qubits the basis order is `|00⟩, |01⟩, |10⟩, |11⟩`.

use std::fmt;
use std::ops::{Index, IndexMut, Sub};

pub use num_complex::Complex64 as C64;
use thiserror::Error;

/// Entrywise tolerance for the Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalue floor below which a density matrix is declared non-PSD.
pub const PSD_FLOOR: f64 = -1e-10;
/// Largest dimension accepted by the eigensolver.
pub const MAX_EIGEN_DIM: usize = 64;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: max |M[i][j] - conj(M[j][i])| = {0:e}")]
    NonHermitianInput(f64),
    #[error("Jacobi diagonalization did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("subsystem dimensions {dims:?} do not multiply to {dim}")]
    BadFactorization { dims: Vec<usize>, dim: usize },
    #[error("invalid subsystem selection {keep:?} for {n} subsystems")]
    BadSelection { keep: Vec<usize>, n: usize },
    #[error("dimension {0} exceeds eigensolver limit {MAX_EIGEN_DIM}")]
    TooLarge(usize),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("invalid pure state: {0}")]
    InvalidState(String),
    #[error("data length {len} is not a square of a positive integer")]
    NotSquare { len: usize },
}

/// Square complex matrix with dense row-major storage.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries; the length must be a perfect square.
    pub fn from_row_major(data: Vec<C64>) -> Result<Self, LinalgError> {
        let len = data.len();
        let dim = (len as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != len {
            return Err(LinalgError::NotSquare { len });
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(LinalgError::DimensionMismatch(row.len(), dim));
            }
            data.extend(row.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self::from_row_major(data)
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// Outer product |ψ⟩⟨ψ|.
    pub fn projector(state: &PureState) -> Self {
        let amps = state.amplitudes();
        Self::from_fn(amps.len(), |i, j| amps[i] * amps[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch(self.dim, other.dim));
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest |M[i][j] − conj(M[j][i])| over all index pairs.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Kronecker product with big-endian factor ordering.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |i, j| {
            self[(i / m, j / m)] * other[(i % m, j % m)]
        })
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.dim && j < self.dim, "index ({i},{j}) out of range");
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.dim && j < self.dim, "index ({i},{j}) out of range");
        &mut self.data[i * self.dim + j]
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.checked_sub(rhs).expect("matrix dimensions differ")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(amplitudes: Vec<C64>) -> Result<Self, LinalgError> {
        if amplitudes.is_empty() {
            return Err(LinalgError::InvalidState("empty amplitude vector".into()));
        }
        let norm2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > Self::NORM_TOL {
            return Err(LinalgError::InvalidState(format!(
                "squared norm {norm2} differs from 1"
            )));
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self, LinalgError> {
        Self::new(amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|index⟩` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dim {dim}");
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn kron(&self, other: &Self) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Self { amplitudes }
    }

    pub fn density(&self, label: impl Into<String>) -> Result<DensityMatrix, LinalgError> {
        DensityMatrix::new(ComplexMatrix::projector(self), label)
    }
}

/// Kronecker product shared by state vectors and matrices.
pub trait TensorProduct {
    fn tensor(&self, other: &Self) -> Self;
}

impl TensorProduct for ComplexMatrix {
    fn tensor(&self, other: &Self) -> Self {
        self.kron(other)
    }
}

impl TensorProduct for PureState {
    fn tensor(&self, other: &Self) -> Self {
        self.kron(other)
    }
}

pub fn tensor_product<T: TensorProduct>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// Hermitian, unit-trace, positive semidefinite matrix with a partition label.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    label: String,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and the PSD floor.
    pub fn new(matrix: ComplexMatrix, label: impl Into<String>) -> Result<Self, LinalgError> {
        let defect = matrix.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(LinalgError::NonHermitianInput(defect));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(LinalgError::InvalidDensity(format!(
                "trace {:.3e}{:+.3e}i differs from 1",
                tr.re, tr.im
            )));
        }
        let evs = eigenvalues_hermitian(&matrix)?;
        if let Some(&lowest) = evs.first() {
            if lowest < PSD_FLOOR {
                return Err(LinalgError::InvalidDensity(format!(
                    "eigenvalue {lowest:e} below floor {PSD_FLOOR:e}"
                )));
            }
        }
        Ok(Self {
            matrix,
            label: label.into(),
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        // Validated at construction, so the solver cannot reject it.
        eigenvalues_hermitian(&self.matrix).expect("validated density matrix")
    }

    /// ρ_A ⊗ ρ_B, labels joined.
    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            matrix: self.matrix.kron(&other.matrix),
            label: format!("{}{}", self.label, other.label),
        }
    }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn eigenvalues_hermitian(m: &ComplexMatrix) -> Result<Vec<f64>, LinalgError> {
    jacobi(m, false).map(|(values, _)| values)
}

/// Eigenvalues (ascending) and the unitary whose columns are the matching eigenvectors.
pub fn eigh(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    jacobi(m, true).map(|(values, vectors)| (values, vectors.expect("vectors requested")))
}

fn off_diagonal_norm(a: &[C64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi on the complex Hermitian matrix.
///
/// Each rotation first rotates the phase of column/row `q` so that `a[p][q]`
/// becomes real and non-negative, then applies the classical real Jacobi
/// rotation that annihilates it.
fn jacobi(
    m: &ComplexMatrix,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<ComplexMatrix>), LinalgError> {
    let n = m.dim();
    if n > MAX_EIGEN_DIM {
        return Err(LinalgError::TooLarge(n));
    }
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(LinalgError::NonHermitianInput(defect));
    }

    // Symmetrize so round-off in the input cannot bias the result.
    let mut a: Vec<C64> = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        a[i * n + i] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            a[i * n + j] = z;
            a[j * n + i] = z.conj();
        }
    }
    let mut v = want_vectors.then(|| ComplexMatrix::identity(n).data);

    let threshold = JACOBI_REL_THRESHOLD * m.frobenius_norm();
    let mut converged = off_diagonal_norm(&a, n) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence(JACOBI_MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                // Phase step: column q *= conj(phase), row q *= phase.
                for k in 0..n {
                    a[k * n + q] *= phase.conj();
                    a[q * n + k] *= phase;
                }
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        v[k * n + q] *= phase.conj();
                    }
                }

                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = 0.5 * (aqq - app) / mag;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = akp * c - akq * s;
                    let new_kq = akp * s + akq * c;
                    a[k * n + p] = new_kp;
                    a[k * n + q] = new_kq;
                    a[p * n + k] = new_kp.conj();
                    a[q * n + k] = new_kq.conj();
                }
                a[p * n + p] = C64::new(app - t * mag, 0.0);
                a[q * n + q] = C64::new(aqq + t * mag, 0.0);
                a[p * n + q] = C64::new(0.0, 0.0);
                a[q * n + p] = C64::new(0.0, 0.0);

                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * c - vkq * s;
                        v[k * n + q] = vkp * s + vkq * c;
                    }
                }
            }
        }
        converged = off_diagonal_norm(&a, n) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let values = order.iter().map(|&i| a[i * n + i].re).collect();
    let vectors = v.map(|v| ComplexMatrix::from_fn(n, |row, col| v[row * n + order[col]]));
    Ok((values, vectors))
}

/// Trace norm Tr√(A†A) of a Hermitian matrix, i.e. the sum of |eigenvalues|.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64, LinalgError> {
    Ok(eigenvalues_hermitian(m)?.iter().map(|x| x.abs()).sum())
}

/// D[ρ₁, ρ₂] = ½‖ρ₁ − ρ₂‖₁.
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64, LinalgError> {
    let diff = r1.matrix().checked_sub(r2.matrix())?;
    Ok(0.5 * trace_norm(&diff)?)
}

/// Traces out every subsystem not listed in `keep`.
///
/// `subsystem_dims` lists factor dimensions in big-endian order. The kept
/// subsystems appear in the output in ascending index order regardless of the
/// order given in `keep`.
pub fn partial_trace(
    rho: &DensityMatrix,
    subsystem_dims: &[usize],
    keep: &[usize],
) -> Result<DensityMatrix, LinalgError> {
    let m = partial_trace_matrix(rho.matrix(), subsystem_dims, keep)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let label = format!(
        "{}[{}]",
        rho.label(),
        kept.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
    );
    DensityMatrix::new(m, label)
}

/// Partial trace on a bare matrix, without density-matrix validation.
pub fn partial_trace_matrix(
    m: &ComplexMatrix,
    subsystem_dims: &[usize],
    keep: &[usize],
) -> Result<ComplexMatrix, LinalgError> {
    let product: usize = subsystem_dims.iter().product();
    if subsystem_dims.is_empty() || subsystem_dims.contains(&0) || product != m.dim() {
        return Err(LinalgError::BadFactorization {
            dims: subsystem_dims.to_vec(),
            dim: m.dim(),
        });
    }
    let nsub = subsystem_dims.len();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() || kept.iter().any(|&k| k >= nsub) {
        return Err(LinalgError::BadSelection {
            keep: keep.to_vec(),
            n: nsub,
        });
    }
    let traced: Vec<usize> = (0..nsub).filter(|k| !kept.contains(k)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&k| subsystem_dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| subsystem_dims[k]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let env_dim: usize = traced_dims.iter().product();

    // Place digits of a kept/traced index into a full composite index.
    let compose = |kept_idx: usize, env_idx: usize| -> usize {
        let mut digits = vec![0usize; nsub];
        let mut r = kept_idx;
        for (pos, &k) in kept.iter().enumerate().rev() {
            digits[k] = r % kept_dims[pos];
            r /= kept_dims[pos];
        }
        let mut r = env_idx;
        for (pos, &k) in traced.iter().enumerate().rev() {
            digits[k] = r % traced_dims[pos];
            r /= traced_dims[pos];
        }
        digits
            .iter()
            .zip(subsystem_dims)
            .fold(0, |acc, (&d, &n)| acc * n + d)
    };

    let mut out = ComplexMatrix::zeros(out_dim);
    for i in 0..out_dim {
        for j in 0..out_dim {
            let mut acc = C64::new(0.0, 0.0);
            for e in 0..env_dim {
                acc += m[(compose(i, e), compose(j, e))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}
