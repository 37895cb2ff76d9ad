//! Field diagnostics: photon statistics, Wigner functions, quadrature
//! squeezing, particle–field negativity and coherent-state fidelity.
//!
//! Phase-space coordinates are `x = Re β`, `p = Im β`, so a coherent state
//! `|α⟩` has a Wigner function `(2/π)·exp(−2|β − α|²)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    coherent_state, eigh_sorted, fock_ops, partial_trace, CMatrix, CVector, DensityMatrix, Factor, QuantumState,
    SpaceTag,
};

/// Probability weight lost by displacement in the padded Fock space above
/// which a Wigner grid is flagged.
pub const WIGNER_TAIL_TOL: f64 = 1e-8;
/// Riemann-sum deviation from unit normalization above which a Wigner grid
/// is flagged as not covering the state.
pub const WIGNER_COVERAGE_TOL: f64 = 5e-3;

fn require_field(rho: &DensityMatrix) -> Result<()> {
    if rho.space() != SpaceTag::Field {
        return Err(Error::usage(format!("expected a field density matrix, got {:?}", rho.space())));
    }
    Ok(())
}

/// Reduced field state of a product-space density matrix.
pub fn field_reduced(rho: &DensityMatrix) -> Result<DensityMatrix> {
    match rho.space() {
        SpaceTag::Field => Ok(rho.clone()),
        SpaceTag::Product => partial_trace(rho, Factor::Field),
        SpaceTag::Particle => Err(Error::usage("a particle-only state has no field factor")),
    }
}

pub fn field_reduced_pure(psi: &QuantumState) -> Result<DensityMatrix> {
    field_reduced(&DensityMatrix::from_pure(psi))
}

/// Photon-number mean and variance.
pub fn photon_stats(rho_field: &DensityMatrix) -> Result<(f64, f64)> {
    require_field(rho_field)?;
    let m = rho_field.matrix();
    let (mut mean, mut second) = (0.0, 0.0);
    for n in 0..m.nrows() {
        let p = m[(n, n)].re;
        mean += n as f64 * p;
        second += (n * n) as f64 * p;
    }
    Ok((mean, second - mean * mean))
}

/// Fidelity to the coherent state with `α = ⟨a⟩`.
pub fn coherent_fit_fidelity(rho_field: &DensityMatrix) -> Result<f64> {
    require_field(rho_field)?;
    let ops = fock_ops(rho_field.dim())?;
    let alpha = rho_field.expectation(&ops.a)?;
    let (coh, _) = coherent_state(rho_field.dim(), alpha)?;
    rho_field.fidelity_with_pure(&coh)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    /// Vacuum-normalized symmetrized covariance `4C` of `X₁ = (a + a†)/2`,
    /// `X₂ = (a − a†)/(2i)`.
    pub covariance: [[f64; 2]; 2],
    pub lambda_s: f64,
    pub lambda_l: f64,
    /// `−ln λ_s`.
    pub measure: f64,
}

pub fn squeezing(rho_field: &DensityMatrix) -> Result<SqueezingReport> {
    require_field(rho_field)?;
    let ops = fock_ops(rho_field.dim())?;
    // moments of a, a² and a†a are exact in the truncated space
    let a = rho_field.expectation(&ops.a)?;
    let a2 = rho_field.expectation(&ops.a.compose(&ops.a)?)?;
    let (n, _) = photon_stats(rho_field)?;
    let c11 = (2.0 * a2.re + 2.0 * n + 1.0 - 4.0 * a.re * a.re) / 4.0;
    let c22 = (-2.0 * a2.re + 2.0 * n + 1.0 - 4.0 * a.im * a.im) / 4.0;
    let c12 = (2.0 * a2.im - 4.0 * a.re * a.im) / 4.0;
    let cov = [[4.0 * c11, 4.0 * c12], [4.0 * c12, 4.0 * c22]];
    let tr = cov[0][0] + cov[1][1];
    let disc = ((cov[0][0] - cov[1][1]).powi(2) + 4.0 * cov[0][1] * cov[0][1]).sqrt();
    let lambda_s = 0.5 * (tr - disc);
    let lambda_l = 0.5 * (tr + disc);
    if !(lambda_s > 0.0) {
        return Err(Error::InvalidDensity(format!("non-positive quadrature variance {lambda_s:e}")));
    }
    Ok(SqueezingReport { covariance: cov, lambda_s, lambda_l, measure: -lambda_s.ln() })
}

/// Partial transpose over the field factor of a product-space matrix.
pub fn partial_transpose_field(rho: &DensityMatrix) -> Result<CMatrix> {
    let dims = rho
        .dims()
        .filter(|_| rho.space() == SpaceTag::Product)
        .ok_or_else(|| Error::usage("negativity needs a product-space density matrix with factor dimensions"))?;
    let m = rho.matrix();
    let d = dims.total();
    Ok(CMatrix::from_fn(d, d, |r, c| {
        let (n, k) = (r / dims.particle, r % dims.particle);
        let (np, kp) = (c / dims.particle, c % dims.particle);
        m[(dims.index(np, k), dims.index(n, kp))]
    }))
}

/// Sum of the magnitudes of the negative eigenvalues of the partial transpose.
pub fn negativity(rho: &DensityMatrix) -> Result<f64> {
    let pt = partial_transpose_field(rho)?;
    let (vals, _) = eigh_sorted(&pt);
    Ok(vals.iter().filter(|&&v| v < 0.0).map(|v| -v).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    /// `values[(i, j)]` is `W(x_axis[i] + i·p_axis[j])`.
    pub values: DMatrix<f64>,
    pub padded_dim: usize,
    /// Largest weight of the displaced state lost beyond the padded space.
    pub max_tail: f64,
    pub tail_warning: bool,
    /// Riemann sum of the grid values.
    pub integral: f64,
    pub coverage_warning: bool,
}

impl WignerGrid {
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    fn cell_area(&self) -> f64 {
        spacing(&self.x_axis) * spacing(&self.p_axis)
    }

    /// `∫ W dp` along the x axis.
    pub fn x_marginal(&self) -> Vec<f64> {
        let dp = spacing(&self.p_axis);
        (0..self.x_axis.len()).map(|i| self.values.row(i).sum() * dp).collect()
    }

    /// `∫ W dx` along the p axis.
    pub fn p_marginal(&self) -> Vec<f64> {
        let dx = spacing(&self.x_axis);
        (0..self.p_axis.len()).map(|j| self.values.column(j).sum() * dx).collect()
    }
}

fn spacing(axis: &[f64]) -> f64 {
    if axis.len() < 2 { 1.0 } else { (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64 }
}

/// Columns `⟨k|D(γ)|m⟩` for `k < padded`, `m < n`, built from
/// `D(γ)|m⟩ = (a† − γ*)ᵐ/√m! |γ⟩`.
fn displacement_columns(gamma: C64, n: usize, padded: usize) -> CMatrix {
    let mut out = CMatrix::zeros(padded, n);
    let mut v = CVector::zeros(padded);
    v[0] = C64::from((-0.5 * gamma.norm_sqr()).exp());
    for k in 1..padded {
        v[k] = v[k - 1] * gamma / (k as f64).sqrt();
    }
    out.set_column(0, &v);
    let gc = gamma.conj();
    for m in 1..n {
        let prev = out.column(m - 1).into_owned();
        let s = 1.0 / (m as f64).sqrt();
        for k in 0..padded {
            let raise = if k > 0 { prev[k - 1] * (k as f64).sqrt() } else { C64::new(0.0, 0.0) };
            out[(k, m)] = (raise - gc * prev[k]) * s;
        }
    }
    out
}

/// Fock dimension used for the displaced-parity evaluation of a state with
/// `n` levels on a grid reaching out to `|β| = reach`.
pub fn wigner_padding(n: usize, reach: f64) -> usize {
    let need = ((n as f64).sqrt() + reach).powi(2).ceil() as usize + 20;
    (2 * n).max(need)
}

/// `W(β) = (2/π) Tr[ρ D(β) Π D(β)†]` on the grid `x_axis × p_axis`.
pub fn wigner(rho_field: &DensityMatrix, x_axis: &[f64], p_axis: &[f64]) -> Result<WignerGrid> {
    require_field(rho_field)?;
    if x_axis.is_empty() || p_axis.is_empty() {
        return Err(Error::config("wigner grid axes must be non-empty"));
    }
    let n = rho_field.dim();
    let reach = x_axis
        .iter()
        .flat_map(|x| p_axis.iter().map(move |p| (x * x + p * p).sqrt()))
        .fold(0.0, f64::max);
    let padded = wigner_padding(n, reach);
    let rho = rho_field.matrix();
    let trace = rho_field.trace();
    let rows: Vec<(Vec<f64>, f64)> = x_axis
        .par_iter()
        .map(|&x| {
            let mut tail: f64 = 0.0;
            let row = p_axis
                .iter()
                .map(|&p| {
                    let m = displacement_columns(C64::new(-x, -p), n, padded);
                    let mr = &m * rho;
                    let (mut acc, mut kept) = (0.0, 0.0);
                    for k in 0..padded {
                        let d: C64 = mr.row(k).iter().zip(m.row(k).iter()).map(|(a, b)| a * b.conj()).sum();
                        acc += if k % 2 == 0 { d.re } else { -d.re };
                        kept += d.re;
                    }
                    tail = tail.max((trace - kept).abs());
                    2.0 / PI * acc
                })
                .collect();
            (row, tail)
        })
        .collect();
    let max_tail = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let values = DMatrix::from_fn(x_axis.len(), p_axis.len(), |i, j| rows[i].0[j]);
    let mut grid = WignerGrid {
        x_axis: x_axis.to_vec(),
        p_axis: p_axis.to_vec(),
        values,
        padded_dim: padded,
        max_tail,
        tail_warning: max_tail > WIGNER_TAIL_TOL,
        integral: 0.0,
        coverage_warning: false,
    };
    grid.integral = grid.values.sum() * grid.cell_area();
    grid.coverage_warning = (grid.integral - 1.0).abs() > WIGNER_COVERAGE_TOL;
    Ok(grid)
}

/// `n` points spanning `[lo, hi]`.
pub fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    crate::integrate::uniform_grid(lo, hi, n)
}
