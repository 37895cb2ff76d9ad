//! Lindblad master equation with a single damped mode:
//! `dρ/dt = −i[h, ρ] + κ(2aρa† − {a†a, ρ})`.
//!
//! Vectorization is column-stacking, `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{Dyn, LU};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{eigh_sorted, fock_ops, max_abs, tensor, CMatrix, DensityMatrix, Operator, ProductDims, SpaceTag, I};
use crate::integrate::{check_grid, Dopri5, Tolerances};

/// Largest operator dimension for which the dense `N² × N²` superoperator is
/// built.
pub const DENSE_LIMIT: usize = 64;
/// Steady-state residual bound, relative to the largest superoperator entry.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;
/// Negative eigenvalues above this are clipped; below it they are an error.
pub const CLIP_TOL: f64 = 1e-8;
pub const MASTER_TRACE_TOL: f64 = 1e-9;

const PIVOT_RATIO_MIN: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct Superoperator {
    h: CMatrix,
    a: CMatrix,
    a_dag: CMatrix,
    n: CMatrix,
    kappa: f64,
    space: SpaceTag,
    dims: Option<ProductDims>,
}

fn field_annihilator(h: &Operator) -> Result<Operator> {
    match (h.space(), h.dims()) {
        (SpaceTag::Field, _) => Ok(fock_ops(h.dim())?.a),
        (SpaceTag::Product, Some(d)) => {
            let a = fock_ops(d.field)?.a;
            tensor(&a, &Operator::identity(d.particle, SpaceTag::Particle)?)
        }
        _ => Err(Error::usage("the damped mode needs a field or product space")),
    }
}

impl Superoperator {
    /// Loss through the field mode of `h`'s space at amplitude rate `kappa`.
    pub fn assemble(h: &Operator, kappa: f64) -> Result<Self> {
        let a = field_annihilator(h)?;
        Self::assemble_with_jump(h, &a, kappa)
    }

    /// `−i[h, ρ] + κ(2cρc† − {c†c, ρ})` for an arbitrary collapse operator `c`.
    pub fn assemble_with_jump(h: &Operator, c: &Operator, kappa: f64) -> Result<Self> {
        if h.space() != c.space() || h.dim() != c.dim() || h.dims() != c.dims() {
            return Err(Error::usage(format!(
                "hamiltonian ({}) and collapse operator ({}) act on different spaces",
                h.dim(),
                c.dim()
            )));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::config(format!("kappa must be finite and non-negative, got {kappa}")));
        }
        let scale = max_abs(h.matrix()).max(1.0);
        if h.hermiticity_defect() > 1e-10 * scale {
            return Err(Error::usage("hamiltonian is not Hermitian"));
        }
        let a = c.matrix().clone();
        let a_dag = a.adjoint();
        let n = &a_dag * &a;
        Ok(Self { h: h.matrix().clone(), a, a_dag, n, kappa, space: h.space(), dims: h.dims() })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }

    pub fn dims(&self) -> Option<ProductDims> {
        self.dims
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        self.apply_into(rho, &mut out);
        out
    }

    fn apply_into(&self, rho: &CMatrix, out: &mut CMatrix) {
        let k = C64::from(self.kappa);
        let jump = &self.a * rho * &self.a_dag;
        out.copy_from(&((&self.h * rho - rho * &self.h) * (-I)));
        *out += (jump * C64::from(2.0) - &self.n * rho - rho * &self.n) * k;
    }

    /// The dense `N² × N²` matrix acting on column-stacked `vec(ρ)`.
    pub fn matrix(&self) -> Result<CMatrix> {
        let n = self.dim();
        if n > DENSE_LIMIT {
            return Err(Error::config(format!("dense superoperator limited to dimension {DENSE_LIMIT}, got {n}")));
        }
        let id = CMatrix::identity(n, n);
        let k = C64::from(self.kappa);
        let mut l = (id.kronecker(&self.h) - self.h.transpose().kronecker(&id)) * (-I);
        l += (self.a.conjugate().kronecker(&self.a) * C64::from(2.0)
            - id.kronecker(&self.n)
            - self.n.transpose().kronecker(&id))
            * k;
        Ok(l)
    }

    /// Largest deviation of the vectorized trace functional from a left null
    /// vector.
    pub fn trace_defect(&self) -> Result<f64> {
        let l = self.matrix()?;
        let n = self.dim();
        Ok((0..l.ncols())
            .map(|col| (0..n).map(|i| l[(i * (n + 1), col)]).sum::<C64>().norm())
            .fold(0.0, f64::max))
    }

    fn density(&self, rho: CMatrix) -> Result<DensityMatrix> {
        DensityMatrix::unchecked(rho, self.space, self.dims)
    }

    /// The unique trace-one stationary state.
    pub fn steady_state(&self) -> Result<DensityMatrix> {
        let n = self.dim();
        let l = self.matrix()?;
        let scale = max_abs(&l).max(1.0);
        let mut m = l.clone();
        for col in 0..n * n {
            m[(0, col)] = C64::new(0.0, 0.0);
        }
        for i in 0..n {
            m[(0, i * (n + 1))] = C64::new(1.0, 0.0);
        }
        let mut b = CMatrix::zeros(n * n, 1);
        b[0] = C64::new(1.0, 0.0);

        let lu = m.clone().lu();
        let direct = if pivot_ratio(&lu) > PIVOT_RATIO_MIN {
            lu.solve(&b).map(|mut x| {
                let r = &b - &m * &x;
                if let Some(dx) = lu.solve(&r) {
                    x += dx;
                }
                x
            })
        } else {
            None
        };
        let rho = match direct {
            Some(x) => {
                let rho = self.normalize_vec(&x)?;
                if frob(&self.apply(&rho)) < STEADY_RESIDUAL_TOL * scale {
                    rho
                } else {
                    self.null_vector(&l, scale)?
                }
            }
            None => self.null_vector(&l, scale)?,
        };
        let residual = frob(&self.apply(&rho));
        if residual >= STEADY_RESIDUAL_TOL * scale {
            return Err(Error::NonUniqueSteadyState(format!(
                "residual {residual:e} exceeds {:e}",
                STEADY_RESIDUAL_TOL * scale
            )));
        }
        self.density(clip_negative(rho)?)
    }

    fn normalize_vec(&self, x: &CMatrix) -> Result<CMatrix> {
        let n = self.dim();
        let rho = CMatrix::from_column_slice(n, n, x.as_slice());
        let rho = (&rho + rho.adjoint()) * C64::from(0.5);
        let tr = rho.trace();
        if tr.norm() < 1e-300 {
            return Err(Error::NonUniqueSteadyState("null vector has zero trace".into()));
        }
        Ok(rho / tr)
    }

    /// Two-vector inverse subspace iteration for the smallest-magnitude
    /// eigenvectors of `L`; a second null direction means the steady state is
    /// not unique.
    fn null_vector(&self, l: &CMatrix, scale: f64) -> Result<CMatrix> {
        let dim = l.nrows();
        let shift = C64::new(1e-9 * scale, 1e-9 * scale);
        let shifted = l - CMatrix::identity(dim, dim) * shift;
        let lu = shifted.lu();
        let mut q = CMatrix::from_fn(dim, 2, |i, j| {
            let x = (i as f64 + 1.0) * (j as f64 + 1.3);
            C64::new(x.sin(), (1.7 * x).cos())
        });
        for _ in 0..8 {
            let y = lu
                .solve(&q)
                .ok_or_else(|| Error::NonUniqueSteadyState("shifted superoperator is singular".into()))?;
            q = y.qr().q();
        }
        let lq = l * &q;
        let gram = lq.adjoint() * &lq;
        let (vals, vecs) = eigh_sorted(&gram);
        let tol = STEADY_RESIDUAL_TOL * scale;
        if vals[1].max(0.0).sqrt() < tol {
            return Err(Error::NonUniqueSteadyState(format!(
                "at least two independent stationary states (second residual {:e})",
                vals[1].max(0.0).sqrt()
            )));
        }
        let v: CMatrix = &q * vecs.columns(0, 1);
        self.normalize_vec(&v)
    }

    /// Integrates the master equation and returns ρ at each grid time.
    pub fn integrate_master(&self, rho0: &DensityMatrix, times: &[f64]) -> Result<Vec<DensityMatrix>> {
        self.integrate_master_with(rho0, times, Tolerances::default())
    }

    pub fn integrate_master_with(
        &self,
        rho0: &DensityMatrix,
        times: &[f64],
        tol: Tolerances,
    ) -> Result<Vec<DensityMatrix>> {
        if rho0.dim() != self.dim() || rho0.space() != self.space {
            return Err(Error::usage("initial density matrix does not match the superoperator space"));
        }
        rho0.validate(1e-10, 1e-8, 1e-8)?;
        check_grid(times)?;
        match self.try_integrate(rho0, times, tol) {
            Ok(out) => Ok(out),
            Err(Error::InvalidDensity(_)) | Err(Error::Integration(_)) => {
                self.try_integrate(rho0, times, tol.tightened(100.0))
            }
            Err(e) => Err(e),
        }
    }

    fn try_integrate(&self, rho0: &DensityMatrix, times: &[f64], tol: Tolerances) -> Result<Vec<DensityMatrix>> {
        let tr0 = rho0.trace();
        let mut solver = Dopri5::new((self.dim(), self.dim()), tol);
        let mut rhs = |_t: f64, rho: &CMatrix, out: &mut CMatrix| self.apply_into(rho, out);
        let mut y = rho0.matrix().clone();
        let mut t = times[0];
        let mut out = Vec::with_capacity(times.len());
        out.push(rho0.clone());
        for &tg in &times[1..] {
            while t < tg {
                solver.step(&mut rhs, &mut t, &mut y, tg)?;
            }
            let rho = (&y + y.adjoint()) * C64::from(0.5);
            let drift = (rho.trace().re - tr0).abs();
            if drift > MASTER_TRACE_TOL {
                return Err(Error::Integration(format!("trace drifted by {drift:e} at t = {tg}")));
            }
            let (vals, _) = eigh_sorted(&rho);
            if vals[0] < -CLIP_TOL {
                return Err(Error::InvalidDensity(format!("eigenvalue {:e} at t = {tg}", vals[0])));
            }
            out.push(self.density(rho)?);
        }
        Ok(out)
    }
}

fn frob(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn pivot_ratio(lu: &LU<C64, Dyn, Dyn>) -> f64 {
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows().min(u.ncols())).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 { 0.0 } else { min / max }
}

/// Clips eigenvalues in `[−CLIP_TOL, 0)` to zero and renormalizes.
pub fn clip_negative(rho: CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = eigh_sorted(&rho);
    if vals[0] >= -1e-12 {
        return Ok(rho);
    }
    if vals[0] < -CLIP_TOL {
        return Err(Error::InvalidDensity(format!("eigenvalue {:e} below −{CLIP_TOL:e}", vals[0])));
    }
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let n = rho.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &w) in clipped.iter().enumerate() {
        if w > 0.0 {
            let v = vecs.column(k);
            out += v * v.adjoint() * C64::from(w / total);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_state, QuantumState};
    use crate::integrate::uniform_grid;
    use crate::model::linear_mode_hamiltonian;
    use proptest::prelude::*;

    fn random_hermitian(n: usize, raw: &[f64]) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |i, j| C64::new(raw[2 * (i * n + j)], raw[2 * (i * n + j) + 1]));
        (&m + m.adjoint()) * C64::from(0.5)
    }

    #[test]
    fn zero_generator_is_zero_map() {
        let h = Operator::zeros_like(&fock_ops(5).unwrap().num);
        let l = Superoperator::assemble(&h, 0.0).unwrap();
        assert_eq!(max_abs(&l.matrix().unwrap()), 0.0);
    }

    #[test]
    fn vacuum_is_stationary_under_decay() {
        let h = Operator::zeros_like(&fock_ops(6).unwrap().num);
        let l = Superoperator::assemble(&h, 0.7).unwrap();
        let vac = DensityMatrix::from_pure(&QuantumState::basis(6, 0, SpaceTag::Field).unwrap());
        assert_eq!(max_abs(&l.apply(vac.matrix())), 0.0);
        let ss = l.steady_state().unwrap();
        assert!((ss.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_matrix_agrees_with_action() {
        let h = linear_mode_hamiltonian(5, 0.3, 0.8).unwrap();
        let l = Superoperator::assemble(&h, 0.4).unwrap();
        let raw: Vec<f64> = (0..50).map(|k| ((k * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let rho = random_hermitian(5, &raw);
        let via_matrix = l.matrix().unwrap() * CMatrix::from_column_slice(25, 1, rho.as_slice());
        let direct = l.apply(&rho);
        assert!(max_abs(&(via_matrix - CMatrix::from_column_slice(25, 1, direct.as_slice()))) < 1e-12);
        assert!(l.trace_defect().unwrap() < 1e-10);
    }

    #[test]
    fn driven_cavity_relaxes_to_coherent_state() {
        let (kappa, delta, eta) = (1.0, 0.6, 1.1);
        let n_fock = 24;
        let h = linear_mode_hamiltonian(n_fock, delta, eta).unwrap();
        let ss = Superoperator::assemble(&h, kappa).unwrap().steady_state().unwrap();
        let alpha = C64::from(eta) / C64::new(kappa, -delta);
        let (coh, _) = coherent_state(n_fock, alpha).unwrap();
        assert!(ss.fidelity_with_pure(&coh).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn driven_cavity_photon_number() {
        let kappa = 1.0;
        let n_fock = 40;
        let h = linear_mode_hamiltonian(n_fock, 0.0, 2.5 * kappa).unwrap();
        let l = Superoperator::assemble(&h, kappa).unwrap();
        let ss = l.steady_state().unwrap();
        let n = ss.expectation(&fock_ops(n_fock).unwrap().num).unwrap().re;
        assert!((n - 6.25).abs() < 1e-8, "n = {n}");
        assert!((ss.purity() - 1.0).abs() < 1e-8);
        assert!(frob(&l.apply(ss.matrix())) < 1e-10);
    }

    #[test]
    fn lossless_diagonal_hamiltonian_has_no_unique_steady_state() {
        let h = fock_ops(4).unwrap().num;
        let l = Superoperator::assemble(&h, 0.0).unwrap();
        assert!(matches!(l.steady_state(), Err(Error::NonUniqueSteadyState(_))));
    }

    #[test]
    fn pure_decay_photon_number() {
        let kappa = 0.3;
        let n_fock = 20;
        let h = Operator::zeros_like(&fock_ops(n_fock).unwrap().num);
        let l = Superoperator::assemble(&h, kappa).unwrap();
        let (coh, _) = coherent_state(n_fock, C64::new(1.5, 0.5)).unwrap();
        let rho0 = DensityMatrix::from_pure(&coh);
        let num = fock_ops(n_fock).unwrap().num;
        let n0 = rho0.expectation(&num).unwrap().re;
        let times = uniform_grid(0.0, 4.0, 9);
        let out = l.integrate_master(&rho0, &times).unwrap();
        for (t, rho) in times.iter().zip(&out) {
            let n = rho.expectation(&num).unwrap().re;
            let exact = n0 * (-2.0 * kappa * t).exp();
            assert!(((n - exact) / exact).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn steady_state_is_fixed_point_of_integration() {
        let h = linear_mode_hamiltonian(16, -0.5, 1.2).unwrap();
        let l = Superoperator::assemble(&h, 0.8).unwrap();
        let ss = l.steady_state().unwrap();
        let out = l.integrate_master(&ss, &uniform_grid(0.0, 10.0, 6)).unwrap();
        for rho in &out {
            assert!(rho.trace_distance(&ss).unwrap() < 1e-8);
        }
    }

    #[test]
    fn rejects_mismatched_operands() {
        let h = linear_mode_hamiltonian(4, 0.0, 1.0).unwrap();
        let c = fock_ops(5).unwrap().a;
        assert!(Superoperator::assemble_with_jump(&h, &c, 1.0).is_err());
        assert!(Superoperator::assemble(&h, -1.0).is_err());
        let rho = DensityMatrix::from_pure(&QuantumState::basis(5, 0, SpaceTag::Field).unwrap());
        let l = Superoperator::assemble(&h, 1.0).unwrap();
        assert!(l.integrate_master(&rho, &[0.0, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn action_is_traceless_and_preserves_hermiticity(
            hraw in prop::collection::vec(-2.0f64..2.0, 72),
            rraw in prop::collection::vec(-1.0f64..1.0, 72),
            kappa in 0.0f64..3.0,
        ) {
            let n = 6;
            let h = Operator::new(random_hermitian(n, &hraw), SpaceTag::Field).unwrap();
            let l = Superoperator::assemble(&h, kappa).unwrap();
            let rho = random_hermitian(n, &rraw);
            let out = l.apply(&rho);
            prop_assert!(out.trace().norm() < 1e-12);
            prop_assert!(max_abs(&(&out - out.adjoint())) < 1e-12);
            let raw_rho = CMatrix::from_fn(n, n, |i, j| C64::new(rraw[2 * (i * n + j)], rraw[2 * (i * n + j) + 1]));
            prop_assert!(max_abs(&(l.apply(&raw_rho).adjoint() - l.apply(&raw_rho.adjoint()))) < 1e-12);
        }
    }
}
