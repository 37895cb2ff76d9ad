//! Complex linear-algebra substrate: operators and states on truncated Fock
//! and oscillator bases, tensor products and partial traces.
//!
//! Product spaces always order the field as the slow index:
//! `|n⟩ ⊗ |k⟩ ↦ n * particle_dim + k`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod oscillator;

pub use oscillator::{ho_overlap, ho_overlap_matrix, OscillatorBasis};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    Field,
    Particle,
    Product,
}

/// Which factor of a bipartite product to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Field,
    Particle,
}

/// Factor dimensions of a field ⊗ particle product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductDims {
    pub field: usize,
    pub particle: usize,
}

impl ProductDims {
    pub fn total(&self) -> usize {
        self.field * self.particle
    }

    pub fn index(&self, n: usize, k: usize) -> usize {
        n * self.particle + k
    }
}

fn check_tag(space: SpaceTag, dims: Option<ProductDims>, size: usize) -> Result<()> {
    match (space, dims) {
        (SpaceTag::Product, Some(d)) if d.total() == size => Ok(()),
        (SpaceTag::Product, Some(d)) => Err(Error::usage(format!(
            "product dims {}x{} do not match dimension {size}",
            d.field, d.particle
        ))),
        (SpaceTag::Product, None) => Err(Error::usage("product-space object needs factor dimensions")),
        (_, Some(_)) => Err(Error::usage("factor dimensions only apply to product spaces")),
        (_, None) => Ok(()),
    }
}

/// A square operator on a tagged space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    space: SpaceTag,
    dims: Option<ProductDims>,
}

impl Operator {
    pub fn new(matrix: CMatrix, space: SpaceTag) -> Result<Self> {
        Self::with_dims(matrix, space, None)
    }

    pub fn product(matrix: CMatrix, dims: ProductDims) -> Result<Self> {
        Self::with_dims(matrix, SpaceTag::Product, Some(dims))
    }

    fn with_dims(matrix: CMatrix, space: SpaceTag, dims: Option<ProductDims>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::usage(format!(
                "operators must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_tag(space, dims, matrix.nrows())?;
        Ok(Self { matrix, space, dims })
    }

    pub fn from_real(matrix: &DMatrix<f64>, space: SpaceTag) -> Result<Self> {
        Self::new(matrix.map(C64::from), space)
    }

    pub fn identity(dim: usize, space: SpaceTag) -> Result<Self> {
        Self::new(CMatrix::identity(dim, dim), space)
    }

    pub fn zeros_like(&self) -> Self {
        Self { matrix: CMatrix::zeros(self.dim(), self.dim()), ..self.clone() }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }

    pub fn dims(&self) -> Option<ProductDims> {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint(), ..self.clone() }
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space || self.dims != other.dims || self.dim() != other.dim() {
            return Err(Error::usage(format!(
                "operator spaces differ: {:?}/{} vs {:?}/{}",
                self.space,
                self.dim(),
                other.space,
                other.dim()
            )));
        }
        Ok(())
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { matrix: &self.matrix * &other.matrix, ..self.clone() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { matrix: &self.matrix + &other.matrix, ..self.clone() })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { matrix: &self.matrix * factor, ..self.clone() }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self {
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
            ..self.clone()
        })
    }

    /// Replaces the matrix by `(M + M†)/2`.
    pub fn hermitized(mut self) -> Self {
        self.matrix = (&self.matrix + self.matrix.adjoint()) * C64::from(0.5);
        self
    }

    /// Largest entry of `|M − M†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        if state.space != self.space || state.dims != self.dims || state.dim() != self.dim() {
            return Err(Error::usage("operator and state live on different spaces"));
        }
        Ok(QuantumState { amplitudes: &self.matrix * &state.amplitudes, ..state.clone() })
    }

    /// `⟨ψ|O|ψ⟩` for a (not necessarily normalized) state.
    pub fn expectation(&self, state: &QuantumState) -> Result<C64> {
        let out = self.apply(state)?;
        Ok(state.amplitudes.dotc(&out.amplitudes))
    }

    /// Compressed sparse row copy, dropping exact zeros.
    pub fn to_csr(&self) -> CsrMatrix<C64> {
        csr_from_dense(&self.matrix)
    }

    /// Hermitian eigen-decomposition; eigenvalues ascending.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        eigh_sorted(&self.matrix)
    }
}

pub fn csr_from_dense(matrix: &CMatrix) -> CsrMatrix<C64> {
    let mut coo = CooMatrix::new(matrix.nrows(), matrix.ncols());
    for j in 0..matrix.ncols() {
        for i in 0..matrix.nrows() {
            let v = matrix[(i, j)];
            if v != C64::new(0.0, 0.0) {
                coo.push(i, j, v);
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues (ascending) and matching column eigenvectors of a Hermitian matrix.
pub fn eigh_sorted(matrix: &CMatrix) -> (Vec<f64>, CMatrix) {
    let hermitian = (matrix + matrix.adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::new(hermitian.clone());
    let finite = eig.eigenvalues.iter().all(|v| v.is_finite())
        && eig.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite());
    if !finite {
        return eigh_real_embedding(&hermitian);
    }
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(matrix.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

// The complex tridiagonal QR in nalgebra occasionally breaks down with NaN.
// Solve the real symmetric problem [[A, -B], [B, A]] instead. Each eigenvalue
// appears twice there, so every cluster of nearly equal real eigenvalues
// contributes half its size in complex directions, chosen by pivoted
// Gram-Schmidt.
fn eigh_real_embedding(hermitian: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = hermitian.nrows();
    let real = DMatrix::<f64>::from_fn(2 * n, 2 * n, |i, j| {
        let z = hermitian[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = SymmetricEigen::new(real);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let candidate = |k: usize| {
        let col = eig.eigenvectors.column(k);
        CVector::from_fn(n, |i, _| C64::new(col[i], col[i + n]))
    };
    let scale = eig.eigenvalues.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-10 * scale;

    let mut basis: Vec<CVector> = Vec::with_capacity(n);
    let mut start = 0;
    while start < order.len() && basis.len() < n {
        let mut end = start + 1;
        while end < order.len() && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] <= tol {
            end += 1;
        }
        let want = ((end - start) / 2).max(1).min(n - basis.len());
        let pool: Vec<CVector> = order[start..end].iter().map(|&k| candidate(k)).collect();
        pivoted_extend(&mut basis, pool, want);
        start = end;
    }
    if basis.len() < n {
        let missing = n - basis.len();
        pivoted_extend(&mut basis, order.iter().map(|&k| candidate(k)).collect(), missing);
    }

    let values: Vec<f64> = basis.iter().map(|z| (z.adjoint() * hermitian * z)[0].re).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = perm.iter().map(|&k| values[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| basis[perm[j]][i]);
    (sorted, vectors)
}

/// Appends up to `want` orthonormal directions from `pool`, always taking the
/// candidate with the largest component outside the current span.
fn pivoted_extend(basis: &mut Vec<CVector>, mut pool: Vec<CVector>, want: usize) {
    for z in pool.iter_mut() {
        for q in basis.iter() {
            let c = q.dotc(z);
            *z -= q * c;
        }
    }
    for _ in 0..want {
        let Some((best, norm)) = pool
            .iter()
            .enumerate()
            .map(|(k, z)| (k, z.norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            return;
        };
        if norm < 1e-8 {
            return;
        }
        let q = pool.swap_remove(best) / C64::from(norm);
        for z in pool.iter_mut() {
            let c = q.dotc(z);
            *z -= &q * c;
        }
        basis.push(q);
    }
}

/// A pure state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: CVector,
    space: SpaceTag,
    dims: Option<ProductDims>,
}

impl QuantumState {
    pub fn new(amplitudes: CVector, space: SpaceTag) -> Result<Self> {
        check_tag(space, None, amplitudes.len())?;
        Ok(Self { amplitudes, space, dims: None })
    }

    pub fn product_vector(amplitudes: CVector, dims: ProductDims) -> Result<Self> {
        check_tag(SpaceTag::Product, Some(dims), amplitudes.len())?;
        Ok(Self { amplitudes, space: SpaceTag::Product, dims: Some(dims) })
    }

    /// Basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize, space: SpaceTag) -> Result<Self> {
        if index >= dim {
            return Err(Error::usage(format!("basis index {index} out of range for dimension {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Self::new(v, space)
    }

    /// `|field⟩ ⊗ |particle⟩`.
    pub fn product(field: &QuantumState, particle: &QuantumState) -> Result<Self> {
        if field.space != SpaceTag::Field || particle.space != SpaceTag::Particle {
            return Err(Error::usage("product state needs a field factor and a particle factor"));
        }
        let dims = ProductDims { field: field.dim(), particle: particle.dim() };
        let amps = field.amplitudes.kronecker(&particle.amplitudes);
        Self::product_vector(amps, dims)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }

    pub fn dims(&self) -> Option<ProductDims> {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::usage("cannot normalize a zero or non-finite state"));
        }
        Ok(Self { amplitudes: &self.amplitudes / C64::from(n), ..self.clone() })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QuantumState) -> Result<C64> {
        if self.space != other.space || self.dim() != other.dim() {
            return Err(Error::usage("inner product between different spaces"));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Same tag and dims, new amplitudes.
    pub fn with_amplitudes(&self, amplitudes: CVector) -> Result<Self> {
        check_tag(self.space, self.dims, amplitudes.len())?;
        Ok(Self { amplitudes, ..self.clone() })
    }
}

/// A density operator. Constructed through [`DensityMatrix::new`] it is
/// guaranteed Hermitian, unit trace and positive within the documented
/// tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    space: SpaceTag,
    dims: Option<ProductDims>,
}

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(matrix: CMatrix, space: SpaceTag, dims: Option<ProductDims>) -> Result<Self> {
        let rho = Self::unchecked(matrix, space, dims)?;
        rho.validate(HERMITIAN_TOL, TRACE_TOL, POSITIVITY_TOL)?;
        Ok(rho)
    }

    /// Builds without the physical checks (shape and tags are still checked).
    pub fn unchecked(matrix: CMatrix, space: SpaceTag, dims: Option<ProductDims>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::usage("density matrix must be square"));
        }
        check_tag(space, dims, matrix.nrows())?;
        Ok(Self { matrix, space, dims })
    }

    pub fn from_pure(state: &QuantumState) -> Self {
        let v = &state.amplitudes;
        let n2 = v.norm_squared();
        Self {
            matrix: (v * v.adjoint()) / C64::from(n2),
            space: state.space,
            dims: state.dims,
        }
    }

    pub fn validate(&self, herm_tol: f64, trace_tol: f64, pos_tol: f64) -> Result<()> {
        let herm = max_abs(&(&self.matrix - self.matrix.adjoint()));
        if herm > herm_tol {
            return Err(Error::InvalidDensity(format!("not Hermitian (defect {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > trace_tol {
            return Err(Error::InvalidDensity(format!("trace {tr} differs from 1")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -pos_tol {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }

    pub fn dims(&self) -> Option<ProductDims> {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh_sorted(&self.matrix).0
    }

    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        eigh_sorted(&self.matrix)
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.space != self.space || op.dim() != self.dim() {
            return Err(Error::usage("operator and density matrix live on different spaces"));
        }
        Ok((&op.matrix * &self.matrix).trace())
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized pure state.
    pub fn fidelity_with_pure(&self, state: &QuantumState) -> Result<f64> {
        if state.space != self.space || state.dim() != self.dim() {
            return Err(Error::usage("state and density matrix live on different spaces"));
        }
        let v = &state.amplitudes;
        Ok((v.adjoint() * &self.matrix * v)[(0, 0)].re / v.norm_squared())
    }

    /// `½ ‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.space != other.space || self.dim() != other.dim() {
            return Err(Error::usage("trace distance between different spaces"));
        }
        let (vals, _) = eigh_sorted(&(&self.matrix - &other.matrix));
        Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
    }
}

/// Field ladder operators on the truncated Fock basis `|0⟩ … |n_fock − 1⟩`.
#[derive(Debug, Clone)]
pub struct FockOps {
    pub a: Operator,
    pub a_dag: Operator,
    pub num: Operator,
}

pub fn fock_ops(n_fock: usize) -> Result<FockOps> {
    if n_fock < 2 {
        return Err(Error::config(format!("n_fock must be at least 2, got {n_fock}")));
    }
    let a = CMatrix::from_fn(n_fock, n_fock, |i, j| {
        if j == i + 1 {
            C64::from((j as f64).sqrt())
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let a_dag = a.adjoint();
    // a†a is diagonal; set it exactly rather than through √n·√n
    let num = CMatrix::from_fn(n_fock, n_fock, |i, j| if i == j { C64::from(i as f64) } else { C64::new(0.0, 0.0) });
    Ok(FockOps {
        a: Operator::new(a, SpaceTag::Field)?,
        a_dag: Operator::new(a_dag, SpaceTag::Field)?,
        num: Operator::new(num, SpaceTag::Field)?,
    })
}

/// Position and momentum on the first `m_levels` levels of an oscillator
/// basis of length `xi`, with `[x, p] = i`.
pub fn ho_ops(m_levels: usize, xi: f64) -> Result<(Operator, Operator)> {
    if m_levels < 2 {
        return Err(Error::config(format!("m_levels must be at least 2, got {m_levels}")));
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::config(format!("oscillator length must be positive, got {xi}")));
    }
    let mut c = CMatrix::zeros(m_levels, m_levels);
    for k in 1..m_levels {
        c[(k - 1, k)] = C64::from((k as f64).sqrt());
    }
    let c_dag = c.adjoint();
    let x = (&c + &c_dag) * C64::from(xi / std::f64::consts::SQRT_2);
    let p = (&c_dag - &c) * (I / (std::f64::consts::SQRT_2 * xi));
    Ok((Operator::new(x, SpaceTag::Particle)?, Operator::new(p, SpaceTag::Particle)?))
}

/// Kronecker product `field ⊗ particle`.
pub fn tensor(field: &Operator, particle: &Operator) -> Result<Operator> {
    if field.space != SpaceTag::Field || particle.space != SpaceTag::Particle {
        return Err(Error::usage(format!(
            "tensor expects (field, particle), got ({:?}, {:?})",
            field.space, particle.space
        )));
    }
    let dims = ProductDims { field: field.dim(), particle: particle.dim() };
    Operator::product(field.matrix.kronecker(&particle.matrix), dims)
}

/// Contracts one factor of a product-space density matrix.
pub fn partial_trace(rho: &DensityMatrix, keep: Factor) -> Result<DensityMatrix> {
    let dims = match (rho.space, rho.dims) {
        (SpaceTag::Product, Some(d)) => d,
        _ => return Err(Error::usage("partial trace needs a product-space density matrix")),
    };
    let m = &rho.matrix;
    let (out, space) = match keep {
        Factor::Field => (
            CMatrix::from_fn(dims.field, dims.field, |n, n2| {
                (0..dims.particle).map(|k| m[(dims.index(n, k), dims.index(n2, k))]).sum()
            }),
            SpaceTag::Field,
        ),
        Factor::Particle => (
            CMatrix::from_fn(dims.particle, dims.particle, |k, k2| {
                (0..dims.field).map(|n| m[(dims.index(n, k), dims.index(n, k2))]).sum()
            }),
            SpaceTag::Particle,
        ),
    };
    DensityMatrix::unchecked(out, space, None)
}

/// Product density matrix `ρ_field ⊗ ρ_particle`.
pub fn tensor_density(field: &DensityMatrix, particle: &DensityMatrix) -> Result<DensityMatrix> {
    if field.space != SpaceTag::Field || particle.space != SpaceTag::Particle {
        return Err(Error::usage("tensor_density expects (field, particle)"));
    }
    let dims = ProductDims { field: field.dim(), particle: particle.dim() };
    DensityMatrix::unchecked(field.matrix.kronecker(&particle.matrix), SpaceTag::Product, Some(dims))
}

/// Orthonormal basis of the span of `vectors` by twice-iterated modified
/// Gram–Schmidt. Inputs are normalized first; a vector whose residual after
/// projection is below `tol` is dropped.
pub fn orthonormalize(vectors: &[QuantumState], tol: f64) -> Result<Vec<QuantumState>> {
    let Some(first) = vectors.first() else {
        return Ok(Vec::new());
    };
    if vectors.iter().any(|v| v.space != first.space || v.dims != first.dims || v.dim() != first.dim()) {
        return Err(Error::usage("orthonormalize needs vectors on a common space"));
    }
    let mut basis: Vec<CVector> = Vec::new();
    for v in vectors {
        let n = v.norm();
        if n <= tol {
            continue;
        }
        let mut w = &v.amplitudes / C64::from(n);
        for _ in 0..2 {
            for u in &basis {
                let c = u.dotc(&w);
                w.axpy(-c, u, C64::new(1.0, 0.0));
            }
        }
        let r = w.norm();
        if r > tol {
            basis.push(w / C64::from(r));
        }
    }
    Ok(basis
        .into_iter()
        .map(|amplitudes| QuantumState { amplitudes, space: first.space, dims: first.dims })
        .collect())
}

/// Normalized coherent state `|α⟩` truncated to `n_fock` levels, together
/// with the Poisson weight that fell beyond the cutoff.
pub fn coherent_state(n_fock: usize, alpha: C64) -> Result<(QuantumState, f64)> {
    if n_fock < 1 {
        return Err(Error::config("coherent state needs at least one Fock level"));
    }
    let mut v = CVector::zeros(n_fock);
    v[0] = C64::from((-0.5 * alpha.norm_sqr()).exp());
    for n in 1..n_fock {
        v[n] = v[n - 1] * alpha / (n as f64).sqrt();
    }
    let kept = v.norm_squared();
    let tail = (1.0 - kept).max(0.0);
    let state = QuantumState::new(v, SpaceTag::Field)?.normalized()?;
    Ok((state, tail))
}
