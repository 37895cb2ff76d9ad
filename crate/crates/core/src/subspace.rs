//! Low-dimensional subspaces of the product space that capture the
//! quasi-stationary dynamics: one coherent field state per vibrational branch
//! (`coherent`), or the dominant eigenvectors of each branch's stationary field
//! state paired with a matched oscillator level (`effective`).

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{coherent_state, fock_ops, orthonormalize, CVector, ProductDims, QuantumState, SpaceTag};
use crate::liouville::Superoperator;
use crate::model::{build_effective_hamiltonian, particle_basis, ModelOptions, Parity, SystemParams};

pub const BRANCH_DAMPING: f64 = 0.5;
pub const BRANCH_MAX_ITERATIONS: usize = 10_000;
pub const BRANCH_TOL: f64 = 1e-10;
/// Largest coherent weight allowed beyond the Fock cutoff.
pub const COHERENT_TAIL_TOL: f64 = 1e-6;
const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentBranch {
    pub m: usize,
    pub alpha: C64,
    pub xi: f64,
    pub iterations: usize,
    pub residual: f64,
}

fn branch_map(params: &SystemParams, m: usize, alpha: C64) -> C64 {
    let scales = params.scales();
    let xi = scales.xi_of(alpha.norm_sqr());
    let delta_eff = params.delta_c - scales.u0_abs * xi * xi * (m as f64 + 0.5);
    C64::from(params.eta) / C64::new(params.kappa, -delta_eff)
}

/// Self-consistent coherent amplitude of branch `m` by damped fixed-point
/// iteration from `α = 0`.
pub fn solve_coherent_branch(params: &SystemParams, m: usize) -> Result<CoherentBranch> {
    params.validate()?;
    if !(params.kappa > 0.0) {
        return Err(Error::config("coherent branches need kappa > 0"));
    }
    let mut alpha = C64::new(0.0, 0.0);
    let mut previous = alpha;
    for it in 1..=BRANCH_MAX_ITERATIONS {
        let target = branch_map(params, m, alpha);
        let residual = (target - alpha).norm();
        if residual < BRANCH_TOL {
            return Ok(CoherentBranch { m, alpha, xi: params.scales().xi_of(alpha.norm_sqr()), iterations: it - 1, residual });
        }
        previous = alpha;
        alpha = (1.0 - BRANCH_DAMPING) * alpha + BRANCH_DAMPING * target;
    }
    Err(Error::NoConvergence { m, iterations: BRANCH_MAX_ITERATIONS, last: alpha, previous })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceKind {
    Coherent,
    Effective,
}

/// A spanning vector with its construction data.
#[derive(Debug, Clone)]
pub struct BasisVector {
    pub m: usize,
    /// Rank within branch `m`, starting at 1.
    pub i: usize,
    /// Branch amplitude (coherent kind).
    pub alpha: Option<C64>,
    /// Eigenvalue of the branch's stationary field state (effective kind).
    pub eigenvalue: Option<f64>,
    pub photon_number: f64,
    pub xi: f64,
    pub embedding_residual: f64,
    pub state: QuantumState,
}

#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub kind: SubspaceKind,
    pub epsilon: Option<f64>,
    pub dims: ProductDims,
    pub raw: Vec<BasisVector>,
    pub ortho: Vec<QuantumState>,
    pub n_m: BTreeMap<usize, usize>,
}

/// `0, 2, 4, …, m_max` for the even sector, `0, 1, …, m_max` otherwise.
pub fn default_m_list(m_max: usize, parity: Parity) -> Vec<usize> {
    match parity {
        Parity::EvenOnly => (0..=m_max).step_by(2).collect(),
        Parity::Full => (0..=m_max).collect(),
    }
}

struct Embedder {
    basis: crate::hilbert::OscillatorBasis,
    dims: ProductDims,
}

impl Embedder {
    fn new(params: &SystemParams, opts: &ModelOptions) -> Result<Self> {
        let basis = particle_basis(params, opts)?;
        let dims = ProductDims { field: opts.trunc.n_fock, particle: basis.dim() };
        Ok(Self { basis, dims })
    }

    fn product(&self, field: &CVector, m: usize, xi: f64) -> Result<(QuantumState, f64)> {
        if m > self.basis.max_level() {
            return Err(Error::Truncation(format!(
                "oscillator level {m} exceeds the particle cutoff {}",
                self.basis.max_level()
            )));
        }
        let (coeffs, residual) = self.basis.embed(m, xi)?;
        if coeffs.iter().all(|c| *c == 0.0) {
            return Err(Error::config(format!("oscillator level {m} has no weight in the particle basis (parity)")));
        }
        let particle = CVector::from_iterator(coeffs.len(), coeffs.iter().map(|&c| C64::from(c)));
        let amps = field.kronecker(&particle);
        let state = QuantumState::product_vector(amps, self.dims)?;
        Ok((state, residual))
    }
}

fn finish(kind: SubspaceKind, epsilon: Option<f64>, dims: ProductDims, raw: Vec<BasisVector>) -> Result<SubspaceBasis> {
    let states: Vec<QuantumState> = raw.iter().map(|v| v.state.normalized()).collect::<Result<_>>()?;
    let ortho = orthonormalize(&states, ORTHO_TOL)?;
    let mut n_m = BTreeMap::new();
    for v in &raw {
        *n_m.entry(v.m).or_insert(0) += 1;
    }
    Ok(SubspaceBasis { kind, epsilon, dims, raw, ortho, n_m })
}

fn check_m_list(m_list: &[usize]) -> Result<()> {
    if m_list.is_empty() {
        return Err(Error::config("m_list is empty"));
    }
    if m_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("m_list must be strictly ascending"));
    }
    Ok(())
}

/// Span of `|α_m⟩ ⊗ |m, ξ(|α_m|²)⟩` over `m_list`.
pub fn build_coherent_subspace(params: &SystemParams, m_list: &[usize], opts: &ModelOptions) -> Result<SubspaceBasis> {
    check_m_list(m_list)?;
    let emb = Embedder::new(params, opts)?;
    let n_fock = opts.trunc.n_fock;
    let branches: Vec<CoherentBranch> = m_list
        .par_iter()
        .map(|&m| solve_coherent_branch(params, m))
        .collect::<Result<_>>()?;
    let mut raw = Vec::with_capacity(branches.len());
    for b in branches {
        let (field, tail) = coherent_state(n_fock, b.alpha)?;
        if tail > COHERENT_TAIL_TOL {
            return Err(Error::Truncation(format!(
                "coherent branch m = {} (|α|² = {:.4}) leaks {tail:.2e} beyond n_fock = {n_fock}",
                b.m,
                b.alpha.norm_sqr()
            )));
        }
        let (state, residual) = emb.product(field.amplitudes(), b.m, b.xi)?;
        raw.push(BasisVector {
            m: b.m,
            i: 1,
            alpha: Some(b.alpha),
            eigenvalue: None,
            photon_number: b.alpha.norm_sqr(),
            xi: b.xi,
            embedding_residual: residual,
            state,
        });
    }
    finish(SubspaceKind::Coherent, None, emb.dims, raw)
}

/// Eigen-decomposition of branch `m`'s stationary field state, descending.
pub fn branch_steady_spectrum(params: &SystemParams, m: usize, n_fock: usize) -> Result<(Vec<f64>, Vec<CVector>)> {
    let wrap = |e| Error::Branch { m, source: Box::new(e) };
    let h = build_effective_hamiltonian(params, m, n_fock).map_err(wrap)?;
    let rho = Superoperator::assemble(&h, params.kappa).and_then(|l| l.steady_state()).map_err(wrap)?;
    let (vals, vecs) = rho.eigh();
    let order: Vec<usize> = (0..vals.len()).rev().collect();
    Ok((
        order.iter().map(|&k| vals[k]).collect(),
        order.iter().map(|&k| vecs.column(k).into_owned()).collect(),
    ))
}

/// Span of `|φ_{m,i}⟩ ⊗ |m, ξ(⟨φ|n̂|φ⟩)⟩` over eigenvectors of each branch's
/// stationary field state with eigenvalue at least `epsilon`.
pub fn build_effective_subspace(
    params: &SystemParams,
    m_list: &[usize],
    epsilon: f64,
    opts: &ModelOptions,
) -> Result<SubspaceBasis> {
    check_m_list(m_list)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let emb = Embedder::new(params, opts)?;
    let n_fock = opts.trunc.n_fock;
    let num = fock_ops(n_fock)?.num;
    let spectra: Vec<(Vec<f64>, Vec<CVector>)> = m_list
        .par_iter()
        .map(|&m| branch_steady_spectrum(params, m, n_fock))
        .collect::<Result<_>>()?;
    let scales = params.scales();
    let mut raw = Vec::new();
    for (&m, (vals, vecs)) in m_list.iter().zip(spectra) {
        for (i, (val, phi)) in vals.into_iter().zip(vecs).enumerate().take_while(|(_, (v, _))| *v >= epsilon) {
            let n_bar = (phi.adjoint() * num.matrix() * &phi)[(0, 0)].re;
            let xi = scales.xi_of(n_bar);
            let (state, residual) = emb.product(&phi, m, xi).map_err(|e| Error::Branch { m, source: Box::new(e) })?;
            raw.push(BasisVector {
                m,
                i: i + 1,
                alpha: None,
                eigenvalue: Some(val),
                photon_number: n_bar,
                xi,
                embedding_residual: residual,
                state,
            });
        }
    }
    let mut basis = finish(SubspaceKind::Effective, Some(epsilon), emb.dims, raw)?;
    for &m in m_list {
        basis.n_m.entry(m).or_insert(0);
    }
    Ok(basis)
}

fn check_state(basis: &SubspaceBasis, psi: &QuantumState) -> Result<()> {
    if psi.space() != SpaceTag::Product || psi.dims() != Some(basis.dims) {
        return Err(Error::usage(format!(
            "state ({:?}, dim {}) does not match the subspace embedding {}x{}",
            psi.space(),
            psi.dim(),
            basis.dims.field,
            basis.dims.particle
        )));
    }
    Ok(())
}

fn weight(u: &QuantumState, psi: &QuantumState) -> f64 {
    u.amplitudes().dotc(psi.amplitudes()).norm_sqr()
}

impl SubspaceBasis {
    /// `⟨ψ|P|ψ⟩` for the orthogonal projector onto the span.
    pub fn projector_expectation(&self, psi: &QuantumState) -> Result<f64> {
        check_state(self, psi)?;
        Ok(self.ortho.iter().map(|u| weight(u, psi)).sum())
    }

    /// `Σ_k |⟨v_k|ψ⟩|²` over the normalized, non-orthogonalized spanning
    /// vectors.
    pub fn naive_projector_expectation(&self, psi: &QuantumState) -> Result<f64> {
        check_state(self, psi)?;
        Ok(self.raw.iter().map(|v| weight(&v.state, psi) / v.state.norm().powi(2)).sum())
    }

    /// Weight on the spanning vectors of branch `m` alone (orthogonal
    /// projector onto their span).
    pub fn branch_projector_expectation(&self, m: usize, psi: &QuantumState) -> Result<f64> {
        check_state(self, psi)?;
        Ok(self.branch_basis(m)?.iter().map(|u| weight(u, psi)).sum())
    }

    /// Orthonormal basis of the span of branch `m`'s vectors.
    pub fn branch_basis(&self, m: usize) -> Result<Vec<QuantumState>> {
        let vecs: Vec<QuantumState> =
            self.raw.iter().filter(|v| v.m == m).map(|v| v.state.clone()).collect();
        if vecs.is_empty() {
            return Err(Error::usage(format!("branch m = {m} is not part of this subspace")));
        }
        orthonormalize(&vecs, ORTHO_TOL)
    }

    pub fn to_export(&self) -> BasisExport {
        BasisExport {
            kind: self.kind,
            epsilon: self.epsilon,
            n_fock: self.dims.field,
            particle_dim: self.dims.particle,
            n_m: self.n_m.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            vectors: self
                .raw
                .iter()
                .map(|v| ExportedVector {
                    m: v.m,
                    i: v.i,
                    alpha: v.alpha.map(|a| [a.re, a.im]),
                    eigenvalue: v.eigenvalue,
                    photon_number: v.photon_number,
                    xi: v.xi,
                    embedding_residual: v.embedding_residual,
                    amplitudes: v.state.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect(),
        }
    }

    pub fn from_export(export: &BasisExport) -> Result<Self> {
        let dims = ProductDims { field: export.n_fock, particle: export.particle_dim };
        let raw = export
            .vectors
            .iter()
            .map(|v| {
                let amps = CVector::from_iterator(v.amplitudes.len(), v.amplitudes.iter().map(|p| C64::new(p[0], p[1])));
                Ok(BasisVector {
                    m: v.m,
                    i: v.i,
                    alpha: v.alpha.map(|a| C64::new(a[0], a[1])),
                    eigenvalue: v.eigenvalue,
                    photon_number: v.photon_number,
                    xi: v.xi,
                    embedding_residual: v.embedding_residual,
                    state: QuantumState::product_vector(amps, dims)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut basis = finish(export.kind, export.epsilon, dims, raw)?;
        for (k, v) in &export.n_m {
            let m: usize = k.parse().map_err(|_| Error::config(format!("bad branch key `{k}`")))?;
            basis.n_m.insert(m, *v);
        }
        Ok(basis)
    }
}

/// Serializable form of a [`SubspaceBasis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisExport {
    pub kind: SubspaceKind,
    pub epsilon: Option<f64>,
    pub n_fock: usize,
    pub particle_dim: usize,
    pub n_m: BTreeMap<String, usize>,
    pub vectors: Vec<ExportedVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedVector {
    pub m: usize,
    pub i: usize,
    pub alpha: Option<[f64; 2]>,
    pub eigenvalue: Option<f64>,
    pub photon_number: f64,
    pub xi: f64,
    pub embedding_residual: f64,
    pub amplitudes: Vec<[f64; 2]>,
}
