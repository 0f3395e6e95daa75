//! Dense complex linear algebra substrate: states, operators, tensor
//! products, partial traces, norms.
//!
//! Everything is stored dense and row-major. The intended scale is exact
//! diagonalization territory; [`MAX_DIMENSION`] caps total dimension at 4096
//! (12 qubits).

use nalgebra::DMatrix;
use num_complex::Complex;

/// Complex double-precision scalar used throughout the crate.
pub type C64 = Complex<f64>;

use crate::error::{Error, Result};

/// Hard cap on total Hilbert-space dimension for tensor products.
pub const MAX_DIMENSION: usize = 4096;

/// Numerical tolerances for state and channel validation.
///
/// `psd_floor` is a magnitude: eigenvalues of a density operator must be
/// ≥ `-psd_floor`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub psd_floor: f64,
    pub completeness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-12,
            trace: 1e-12,
            psd_floor: 1e-10,
            completeness: 1e-10,
        }
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Build from row-major data. Rejects non-finite entries and size
    /// mismatches.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidInput {
                field: "matrix data",
                reason: format!("expected {}x{} = {} entries, got {}", rows, cols, rows * cols, data.len()),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { context: "matrix entries" });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Build entrywise from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Convenience constructor from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, factor: C64) -> Self {
        let data = self.data.iter().map(|a| a * factor).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { left: self.cols, right: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row_out = &mut out.data[i * other.cols..(i + 1) * other.cols];
                let row_b = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in row_out.iter_mut().zip(row_b) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation |m[i][j] - conj(m[j][i])|.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermiticity_deviation() <= tol
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { left: self.cols, right: v.len() });
        }
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(v).map(|(a, x)| a * x).sum();
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch { left: self.rows * self.cols, right: other.rows * other.cols });
        }
        Ok(())
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_iterator(self.rows, self.cols, self.data.iter().copied())
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.hermitian_eigen()?.0)
    }

    /// Full Hermitian eigendecomposition. Returns (eigenvalues ascending,
    /// matrix whose columns are the matching orthonormal eigenvectors).
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        if !self.is_square() {
            return Err(Error::NotSquare { rows: self.rows, cols: self.cols });
        }
        let eig = self.to_nalgebra().symmetric_eigen();
        let n = self.rows;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok((values, vectors))
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let svd = nalgebra::SVD::new_unordered(self.to_nalgebra(), false, false);
        let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        values
    }

    /// Apply a scalar function to the spectrum of a Hermitian matrix:
    /// returns V f(Λ) V†.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> C64) -> Result<ComplexMatrix> {
        let (values, v) = self.hermitian_eigen()?;
        let n = self.rows;
        // V diag(f(λ)) V†, accumulated as a sum of scaled outer products.
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in values.iter().enumerate() {
            let fk = f(lambda);
            if fk == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..n {
                let vi = v.get(i, k);
                for j in 0..n {
                    out.data[i * n + j] += fk * vi * v.get(j, k).conj();
                }
            }
        }
        Ok(out)
    }
}

/// Pauli X.
pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

/// Pauli Y.
pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::new(
        2,
        2,
        vec![
            C64::new(0.0, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
        ],
    )
    .unwrap()
}

/// Pauli Z.
pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
}

/// Kronecker product a ⊗ b with the dimension cap applied.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    tensor_product_bounded(a, b, MAX_DIMENSION)
}

/// Kronecker product with an explicit dimension cap.
pub fn tensor_product_bounded(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    max_dim: usize,
) -> Result<ComplexMatrix> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    if rows > max_dim || cols > max_dim {
        return Err(Error::DimensionOverflow { dim: rows.max(cols), max: max_dim });
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ia in 0..a.rows() {
        for ja in 0..a.cols() {
            let av = a.get(ia, ja);
            if av == C64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..b.rows() {
                for jb in 0..b.cols() {
                    out.data[(ia * b.rows() + ib) * cols + (ja * b.cols() + jb)] = av * b.get(ib, jb);
                }
            }
        }
    }
    Ok(out)
}

/// Embed single-site operators into a chain of `n_sites` factors of local
/// dimension `site_dim`; unlisted sites get the identity. Placements must
/// name distinct sites.
pub fn embed_sites(
    n_sites: usize,
    site_dim: usize,
    placements: &[(usize, &ComplexMatrix)],
) -> Result<ComplexMatrix> {
    for &(site, op) in placements {
        if site >= n_sites {
            return Err(Error::InvalidInput {
                field: "site",
                reason: format!("site {} out of range for {} sites", site, n_sites),
            });
        }
        if op.rows() != site_dim || op.cols() != site_dim {
            return Err(Error::DimensionMismatch { left: op.rows(), right: site_dim });
        }
    }
    let eye = ComplexMatrix::identity(site_dim);
    let mut out = ComplexMatrix::identity(1);
    for site in 0..n_sites {
        let factor = placements
            .iter()
            .find(|&&(s, _)| s == site)
            .map(|&(_, op)| op)
            .unwrap_or(&eye);
        out = tensor_product(&out, factor)?;
    }
    Ok(out)
}

/// Normalized pure state on a finite-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Normalize the given amplitudes. Rejects zero and non-finite input.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidInput { field: "amplitudes", reason: "empty".into() });
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { context: "state amplitudes" });
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let amplitudes = amplitudes.into_iter().map(|z| z / norm).collect();
        Ok(Self { amplitudes })
    }

    /// Computational basis state |index⟩.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidInput {
                field: "index",
                reason: format!("basis index {} out of range for dim {}", index, dim),
            });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    /// |+⟩^⊗n.
    pub fn plus(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self { amplitudes: vec![amp; dim] }
    }

    /// (|0…0⟩ + |1…1⟩)/√2.
    pub fn ghz(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amplitudes[0] = amp;
        amplitudes[dim - 1] = amp;
        Self { amplitudes }
    }

    /// Maximally entangled Σ_k |φ_k⟩⊗|k⟩/√d2 on C^{d1}⊗C^{d2}, with
    /// {φ_k} the first d2 computational basis vectors of C^{d1}.
    /// Requires d1 ≥ d2 so the Schmidt rank is full on the second factor.
    pub fn max_entangled(d1: usize, d2: usize) -> Result<Self> {
        if d1 < d2 {
            return Err(Error::InvalidInput {
                field: "factor_dims",
                reason: format!("need d1 >= d2 for full Schmidt rank, got ({}, {})", d1, d2),
            });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); d1 * d2];
        let amp = C64::new(1.0 / (d2 as f64).sqrt(), 0.0);
        for k in 0..d2 {
            amplitudes[k * d2 + k] = amp;
        }
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dim = self.dim() * other.dim();
        if dim > MAX_DIMENSION {
            return Err(Error::DimensionOverflow { dim, max: MAX_DIMENSION });
        }
        let mut amplitudes = Vec::with_capacity(dim);
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ok(Self { amplitudes })
    }

    /// |ψ⟩⟨ψ|.
    pub fn projector(&self) -> DensityOperator {
        let n = self.dim();
        let m = ComplexMatrix::from_fn(n, n, |i, j| self.amplitudes[i] * self.amplitudes[j].conj());
        DensityOperator { matrix: m }
    }

    /// Apply an operator and renormalize. Fails if the image is null.
    pub fn apply_normalized(&self, op: &ComplexMatrix) -> Result<Self> {
        Self::new(op.apply(&self.amplitudes)?)
    }
}

/// Density operator: Hermitian, unit-trace, positive semidefinite within
/// tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare { rows: matrix.rows(), cols: matrix.cols() });
        }
        let herm = matrix.hermiticity_deviation();
        if herm > tol.hermiticity {
            return Err(Error::NotHermitian { deviation: herm, tolerance: tol.hermiticity });
        }
        let tr = matrix.trace();
        let trace_dev = (tr - C64::new(1.0, 0.0)).norm();
        if trace_dev > tol.trace {
            return Err(Error::InvalidTrace { deviation: trace_dev, tolerance: tol.trace });
        }
        let min_eig = matrix
            .hermitian_eigenvalues()?
            .first()
            .copied()
            .unwrap_or(0.0);
        if min_eig < -tol.psd_floor {
            return Err(Error::NotPositive { min_eigenvalue: min_eig });
        }
        Ok(Self { matrix })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        psi.projector()
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let matrix = ComplexMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0));
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Tr(Oρ) for a Hermitian observable; the imaginary part is discarded
    /// (it vanishes up to rounding).
    pub fn expectation(&self, observable: &ComplexMatrix) -> Result<f64> {
        if observable.rows() != self.dim() || observable.cols() != self.dim() {
            return Err(Error::DimensionMismatch { left: observable.rows(), right: self.dim() });
        }
        Ok(observable.mul(&self.matrix)?.trace().re)
    }
}

/// Reduced density operator after tracing out the factors in
/// `traced_factors`. `factor_dims` lists the tensor factor dimensions in
/// order; their product must equal the operator dimension. Tracing out all
/// factors leaves the 1x1 operator [1].
pub fn partial_trace(
    rho: &DensityOperator,
    factor_dims: &[usize],
    traced_factors: &[usize],
) -> Result<DensityOperator> {
    let total: usize = factor_dims.iter().product();
    if total != rho.dim() || factor_dims.is_empty() {
        return Err(Error::InvalidInput {
            field: "factor_dims",
            reason: format!("product {} does not match operator dimension {}", total, rho.dim()),
        });
    }
    let n_factors = factor_dims.len();
    let mut is_traced = vec![false; n_factors];
    for &f in traced_factors {
        if f >= n_factors {
            return Err(Error::InvalidInput {
                field: "traced_factors",
                reason: format!("factor index {} out of range for {} factors", f, n_factors),
            });
        }
        if is_traced[f] {
            return Err(Error::InvalidInput {
                field: "traced_factors",
                reason: format!("factor index {} repeated", f),
            });
        }
        is_traced[f] = true;
    }

    let kept: Vec<usize> = (0..n_factors).filter(|&f| !is_traced[f]).collect();
    let kept_dim: usize = kept.iter().map(|&f| factor_dims[f]).product();
    let traced: Vec<usize> = (0..n_factors).filter(|&f| is_traced[f]).collect();
    let traced_dim: usize = traced.iter().map(|&f| factor_dims[f]).product();

    // Row-major strides of each factor in the full index.
    let mut strides = vec![1usize; n_factors];
    for f in (0..n_factors.saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * factor_dims[f + 1];
    }

    let full_index = |kept_idx: usize, traced_idx: usize| -> usize {
        let mut idx = 0;
        let mut k = kept_idx;
        for &f in kept.iter().rev() {
            idx += (k % factor_dims[f]) * strides[f];
            k /= factor_dims[f];
        }
        let mut t = traced_idx;
        for &f in traced.iter().rev() {
            idx += (t % factor_dims[f]) * strides[f];
            t /= factor_dims[f];
        }
        idx
    };

    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    for i in 0..kept_dim {
        for j in 0..kept_dim {
            let mut sum = C64::new(0.0, 0.0);
            for t in 0..traced_dim {
                sum += rho.matrix().get(full_index(i, t), full_index(j, t));
            }
            out.data[i * kept_dim + j] = sum;
        }
    }
    DensityOperator::new(out)
}

/// Tr(ρ²). Equals 1 within tolerance iff ρ is a one-dimensional projector.
pub fn purity(rho: &DensityOperator) -> f64 {
    // For Hermitian ρ, Tr ρ² = Σ_{ij} |ρ_ij|².
    rho.matrix().data().iter().map(|z| z.norm_sqr()).sum()
}

/// Trace distance ½‖a − b‖₁ via the eigenvalues of a − b.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    let diff = a.matrix().sub(b.matrix())?;
    let eigs = diff.hermitian_eigenvalues()?;
    Ok(0.5 * eigs.iter().map(|l| l.abs()).sum::<f64>())
}

/// Frobenius norm of the commutator AB − BA.
pub fn commutator_norm(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() || !b.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch { left: a.rows(), right: b.rows() });
    }
    let ab = a.mul(b)?;
    let ba = b.mul(a)?;
    Ok(ab.sub(&ba)?.frobenius_norm())
}
