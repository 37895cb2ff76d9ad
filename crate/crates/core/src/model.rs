//! Hamiltonians of the particle–cavity system.
//!
//! Units: ħ = 1, K = 1. Positions are in 1/K, momenta in ħK, and every rate
//! or energy in [`SystemParams`] shares one unit (recoil frequencies in the
//! presets). The detuning follows the convention in which the constant
//! light shift `U0·n̂` has been absorbed into `Δ_C`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{fock_ops, tensor, CMatrix, Operator, OscillatorBasis, ProductDims, SpaceTag, I};

/// Physical parameters. `v0` and `u0` are the (negative) classical depth and
/// per-photon depth; the model only uses their magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub kappa: f64,
    pub v0: f64,
    pub u0: f64,
    pub delta_c: f64,
    pub eta: f64,
    pub omega_rec: f64,
}

impl SystemParams {
    /// Parameters given as `(κ, V0)` in recoil units and `(Δ_C, η, U0)` in
    /// units of κ, the way the moderate/strong coupling presets are quoted.
    pub fn from_kappa_units(kappa: f64, v0: f64, delta_c_k: f64, eta_k: f64, u0_k: f64) -> Self {
        Self {
            kappa,
            v0,
            u0: u0_k * kappa,
            delta_c: delta_c_k * kappa,
            eta: eta_k * kappa,
            omega_rec: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.kappa, self.v0, self.u0, self.delta_c, self.eta, self.omega_rec];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("system parameters must be finite"));
        }
        if self.v0 > 0.0 || self.u0 > 0.0 {
            return Err(Error::config(format!(
                "harmonic regime needs v0 <= 0 and u0 <= 0, got v0 = {}, u0 = {}",
                self.v0, self.u0
            )));
        }
        if self.kappa < 0.0 {
            return Err(Error::config(format!("kappa must be non-negative, got {}", self.kappa)));
        }
        if self.omega_rec < 0.0 {
            return Err(Error::config(format!("omega_rec must be non-negative, got {}", self.omega_rec)));
        }
        Ok(())
    }

    pub fn scales(&self) -> DerivedScales {
        DerivedScales {
            v0_abs: self.v0.abs(),
            u0_abs: self.u0.abs(),
            omega_rec: self.omega_rec,
        }
    }
}

/// Photon-number dependent potential strength, oscillator frequency and
/// oscillator length. The argument may be a Fock number or a mean photon
/// number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    pub v0_abs: f64,
    pub u0_abs: f64,
    pub omega_rec: f64,
}

impl DerivedScales {
    /// `V(n) = |V0| + |U0| n`
    pub fn v_of(&self, n: f64) -> f64 {
        self.v0_abs + self.u0_abs * n
    }

    /// `Ω(n) = 2 √(ω_rec V(n))`
    pub fn omega_of(&self, n: f64) -> f64 {
        2.0 * (self.omega_rec * self.v_of(n)).sqrt()
    }

    /// `ξ(n) = (ω_rec / V(n))^{1/4}`
    pub fn xi_of(&self, n: f64) -> f64 {
        (self.omega_rec / self.v_of(n)).powf(0.25)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential {
    /// `(|V0| + |U0| n̂) x̃²` after the harmonic expansion of the standing wave
    Harmonic,
    /// `(V0 + U0 n̂) cos²(x̃)` with the un-shifted detuning
    Cos2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    EvenOnly,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub n_fock: usize,
    /// Number of retained particle levels (even levels only under
    /// [`Parity::EvenOnly`]).
    pub m_levels: usize,
    /// Length of the particle reference basis; defaults to
    /// `ξ(round(|η/κ|²))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_ref: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    pub potential: Potential,
    pub parity: Parity,
    pub trunc: TruncationConfig,
}

impl ModelOptions {
    pub fn harmonic(n_fock: usize, m_levels: usize) -> Self {
        Self {
            potential: Potential::Harmonic,
            parity: Parity::EvenOnly,
            trunc: TruncationConfig { n_fock, m_levels, xi_ref: None },
        }
    }

    pub fn with_xi_ref(mut self, xi_ref: f64) -> Self {
        self.trunc.xi_ref = Some(xi_ref);
        self
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }
}

/// Resolved reference length for the particle basis.
pub fn reference_length(params: &SystemParams, trunc: &TruncationConfig) -> Result<f64> {
    if let Some(xi) = trunc.xi_ref {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::config(format!("xi_ref must be positive, got {xi}")));
        }
        return Ok(xi);
    }
    let photons = if params.kappa > 0.0 { (params.eta / params.kappa).powi(2).round() } else { 0.0 };
    let xi = params.scales().xi_of(photons);
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::config(
            "default xi_ref is degenerate (omega_rec = 0 or V = 0); set trunc.xi_ref explicitly",
        ));
    }
    Ok(xi)
}

pub fn particle_basis(params: &SystemParams, opts: &ModelOptions) -> Result<OscillatorBasis> {
    let xi = reference_length(params, &opts.trunc)?;
    match opts.parity {
        Parity::EvenOnly => OscillatorBasis::even(opts.trunc.m_levels, xi),
        Parity::Full => OscillatorBasis::full(opts.trunc.m_levels, xi),
    }
}

/// The full product-space Hamiltonian and the basis it was built in.
#[derive(Debug, Clone)]
pub struct ProductHamiltonian {
    pub hamiltonian: Operator,
    pub basis: OscillatorBasis,
    pub n_fock: usize,
    pub potential: Potential,
    /// Constant by which this Hamiltonian exceeds the harmonic one at
    /// leading order (`V0` for cos², zero for harmonic).
    pub energy_offset: f64,
    pub detuning_convention: &'static str,
}

impl ProductHamiltonian {
    pub fn dims(&self) -> ProductDims {
        ProductDims { field: self.n_fock, particle: self.basis.dim() }
    }
}

fn linear_field_part(n_fock: usize, delta_c: f64, eta: f64) -> Result<CMatrix> {
    let ops = fock_ops(n_fock)?;
    let pump = (ops.a_dag.matrix() - ops.a.matrix()) * (I * eta);
    Ok(ops.num.matrix() * C64::from(-delta_c) + pump)
}

/// Field Hamiltonian `−Δ n̂ + iη(a† − a)`.
pub fn linear_mode_hamiltonian(n_fock: usize, delta: f64, eta: f64) -> Result<Operator> {
    Ok(Operator::new(linear_field_part(n_fock, delta, eta)?, SpaceTag::Field)?.hermitized())
}

fn field_diag(n_fock: usize, f: impl Fn(usize) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(n_fock, n_fock, |i, j| if i == j { f(i) } else { 0.0 })
}

pub fn build_hamiltonian(params: &SystemParams, opts: &ModelOptions) -> Result<ProductHamiltonian> {
    params.validate()?;
    let trunc = opts.trunc;
    if trunc.n_fock < 2 || trunc.m_levels < 2 {
        return Err(Error::config(format!(
            "truncation needs n_fock >= 2 and m_levels >= 2, got {} and {}",
            trunc.n_fock, trunc.m_levels
        )));
    }
    if opts.potential == Potential::Cos2 && opts.parity == Parity::EvenOnly && trunc.m_levels < 4 {
        return Err(Error::config("cos2 potential with even-only basis needs at least 4 particle levels"));
    }
    let basis = particle_basis(params, opts)?;
    let n_fock = trunc.n_fock;
    let scales = params.scales();

    let field_id = Operator::identity(n_fock, SpaceTag::Field)?;
    let kinetic = Operator::from_real(&(basis.p_squared() * params.omega_rec), SpaceTag::Particle)?;
    let mut h = tensor(&field_id, &kinetic)?;

    let (potential_field, potential_particle, mode_delta, offset, convention) = match opts.potential {
        Potential::Harmonic => (
            field_diag(n_fock, |n| scales.v_of(n as f64)),
            basis.x_squared(),
            params.delta_c,
            0.0,
            "shifted: Δ_C includes the U0 light shift",
        ),
        Potential::Cos2 => (
            field_diag(n_fock, |n| params.v0 + params.u0 * n as f64),
            basis.potential_matrix(4, |x| x.cos().powi(2))?,
            params.delta_c + params.u0,
            params.v0,
            "original: mode term uses Δ_C + U0",
        ),
    };
    let coupling = tensor(
        &Operator::from_real(&potential_field, SpaceTag::Field)?,
        &Operator::from_real(&potential_particle, SpaceTag::Particle)?,
    )?;
    h = h.add(&coupling)?;

    let mode = Operator::new(linear_field_part(n_fock, mode_delta, params.eta)?, SpaceTag::Field)?;
    let particle_id = Operator::identity(basis.dim(), SpaceTag::Particle)?;
    h = h.add(&tensor(&mode, &particle_id)?)?;

    Ok(ProductHamiltonian {
        hamiltonian: h.hermitized(),
        basis,
        n_fock,
        potential: opts.potential,
        energy_offset: offset,
        detuning_convention: convention,
    })
}

/// Photon-loss jump operator `√(2κ) a ⊗ 1` and the matching decay operator
/// `κ n̂ ⊗ 1` (the non-Hermitian generator is `H − i·decay`).
#[derive(Debug, Clone)]
pub struct LossOperators {
    pub jump: Operator,
    pub decay: Operator,
}

pub fn build_liouvillean_jump(params: &SystemParams, dims: ProductDims) -> Result<LossOperators> {
    let ops = fock_ops(dims.field)?;
    let particle_id = Operator::identity(dims.particle, SpaceTag::Particle)?;
    let jump = tensor(&ops.a.scale(C64::from((2.0 * params.kappa).sqrt())), &particle_id)?;
    let decay = tensor(&ops.num.scale(C64::from(params.kappa)), &particle_id)?;
    Ok(LossOperators { jump, decay })
}

/// Field-only version of [`build_liouvillean_jump`].
pub fn build_field_loss(params: &SystemParams, n_fock: usize) -> Result<LossOperators> {
    let ops = fock_ops(n_fock)?;
    Ok(LossOperators {
        jump: ops.a.scale(C64::from((2.0 * params.kappa).sqrt())),
        decay: ops.num.scale(C64::from(params.kappa)),
    })
}

/// `H − i·decay`, the generator integrated between quantum jumps.
pub fn non_hermitian_generator(h: &Operator, decay: &Operator) -> Result<Operator> {
    h.add(&decay.scale(-I))
}

/// Conditional field Hamiltonian for vibrational level `m`:
/// `√(ω_rec(|V0| + |U0| n̂))(2m + 1) − Δ_C n̂ + iη(a† − a)`.
pub fn build_effective_hamiltonian(params: &SystemParams, m: usize, n_fock: usize) -> Result<Operator> {
    params.validate()?;
    let scales = params.scales();
    let factor = (2 * m + 1) as f64;
    let nonlinear = field_diag(n_fock, |n| (scales.omega_rec * scales.v_of(n as f64)).sqrt() * factor);
    let h = nonlinear.map(C64::from) + linear_field_part(n_fock, params.delta_c, params.eta)?;
    Ok(Operator::new(h, SpaceTag::Field)?.hermitized())
}

/// Detuning that cancels the term linear in `n̂` of the conditional
/// Hamiltonian, expanding the square root about `n = 0`.
pub fn resonance_detuning(params: &SystemParams, m: usize) -> Result<f64> {
    resonance_detuning_about(params, m, 0.0)
}

/// As [`resonance_detuning`], expanding about photon number `n0`.
pub fn resonance_detuning_about(params: &SystemParams, m: usize, n0: f64) -> Result<f64> {
    params.validate()?;
    if params.v0 == 0.0 && n0 == 0.0 {
        return Err(Error::config("resonance detuning is singular for v0 = 0"));
    }
    let s = params.scales();
    let v = s.v_of(n0);
    if v <= 0.0 {
        return Err(Error::config("resonance detuning is singular at zero potential strength"));
    }
    // d/dn √(ω_rec V(n)) = ω_rec |U0| / (2 √(ω_rec V(n)))
    if s.omega_rec == 0.0 {
        return Ok(0.0);
    }
    Ok((2 * m + 1) as f64 * s.omega_rec * s.u0_abs / (2.0 * (s.omega_rec * v).sqrt()))
}

/// Particle parity `1 ⊗ Π` on the product space.
pub fn parity_operator(model: &ProductHamiltonian) -> Result<Operator> {
    tensor(
        &Operator::identity(model.n_fock, SpaceTag::Field)?,
        &Operator::from_real(&model.basis.parity(), SpaceTag::Particle)?,
    )
}

/// `n̂ ⊗ 1` on the product space.
pub fn photon_number_operator(dims: ProductDims) -> Result<Operator> {
    tensor(&fock_ops(dims.field)?.num, &Operator::identity(dims.particle, SpaceTag::Particle)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{eigh_sorted, ho_overlap_matrix, max_abs};
    use approx::assert_abs_diff_eq;

    fn fig2() -> SystemParams {
        SystemParams::from_kappa_units(10.0, -100.0, 0.0, 2.5, -10.0)
    }

    #[test]
    fn derived_scale_identities() {
        let s = fig2().scales();
        for n in 0..20 {
            let n = n as f64;
            assert_abs_diff_eq!(s.omega_of(n).powi(2), 4.0 * s.omega_rec * s.v_of(n), epsilon = 1e-12 * s.v_of(n));
            assert_abs_diff_eq!(s.xi_of(n).powi(4) * s.v_of(n), s.omega_rec, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.xi_of(0.0), 0.316_227_766_016_837_94, epsilon = 1e-15);
    }

    #[test]
    fn rejects_positive_depths() {
        let mut p = fig2();
        p.u0 = 5.0;
        assert!(p.validate().is_err());
        let opts = ModelOptions::harmonic(4, 3);
        assert!(build_hamiltonian(&p, &opts).is_err());
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let model = build_hamiltonian(&fig2(), &ModelOptions::harmonic(6, 5)).unwrap();
        assert!(model.hamiltonian.hermiticity_defect() < 1e-15);
        let cos2 = ModelOptions { potential: Potential::Cos2, ..ModelOptions::harmonic(6, 5) };
        let model = build_hamiltonian(&fig2(), &cos2).unwrap();
        assert!(model.hamiltonian.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn decoupled_limit_commutes_with_photon_number() {
        let mut p = fig2();
        p.u0 = 0.0;
        p.eta = 0.0;
        let model = build_hamiltonian(&p, &ModelOptions::harmonic(5, 4)).unwrap();
        let num = photon_number_operator(model.dims()).unwrap();
        let c = model.hamiltonian.commutator(&num).unwrap();
        assert!(max_abs(c.matrix()) < 1e-12);
    }

    #[test]
    fn frozen_particle_spectrum() {
        let mut p = fig2();
        p.omega_rec = 0.0;
        p.eta = 0.0;
        p.delta_c = -3.0;
        let opts = ModelOptions::harmonic(4, 6).with_xi_ref(0.3);
        let model = build_hamiltonian(&p, &opts).unwrap();
        let num = photon_number_operator(model.dims()).unwrap();
        assert!(max_abs(model.hamiltonian.commutator(&num).unwrap().matrix()) < 1e-12);
        let x2 = tensor(
            &Operator::identity(4, SpaceTag::Field).unwrap(),
            &Operator::from_real(&model.basis.x_squared(), SpaceTag::Particle).unwrap(),
        )
        .unwrap();
        assert!(max_abs(model.hamiltonian.commutator(&x2).unwrap().matrix()) < 1e-10);

        // eigenvalues are V(n)·λ_j(x²) − Δ_C n
        let (x2_vals, _) = eigh_sorted(&model.basis.x_squared().map(C64::from));
        let s = p.scales();
        let mut expected: Vec<f64> = (0..4)
            .flat_map(|n| x2_vals.iter().map(move |&l| s.v_of(n as f64) * l - p.delta_c * n as f64))
            .collect();
        expected.sort_by(|a, b| a.total_cmp(b));
        let (vals, _) = model.hamiltonian.eigh();
        for (a, b) in vals.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn full_parity_hamiltonian_commutes_with_parity() {
        let opts = ModelOptions::harmonic(5, 8).with_parity(Parity::Full);
        let model = build_hamiltonian(&fig2(), &opts).unwrap();
        let parity = parity_operator(&model).unwrap();
        assert!(max_abs(model.hamiltonian.commutator(&parity).unwrap().matrix()) < 1e-12);
        let cos2 = ModelOptions { potential: Potential::Cos2, ..opts };
        let model = build_hamiltonian(&fig2(), &cos2).unwrap();
        let parity = parity_operator(&model).unwrap();
        assert!(max_abs(model.hamiltonian.commutator(&parity).unwrap().matrix()) < 1e-12);
    }

    #[test]
    fn cos2_needs_enough_even_levels() {
        let opts = ModelOptions { potential: Potential::Cos2, ..ModelOptions::harmonic(4, 3) };
        assert!(matches!(build_hamiltonian(&fig2(), &opts), Err(Error::Config(_))));
    }

    /// Particle block at Fock level n, in the ξ_ref basis.
    fn particle_block(model: &ProductHamiltonian, n: usize) -> CMatrix {
        let d = model.basis.dim();
        model.hamiltonian.matrix().view((n * d, n * d), (d, d)).into_owned()
    }

    #[test]
    fn particle_block_is_oscillator_with_photon_dependent_length() {
        let p = fig2();
        let opts = ModelOptions::harmonic(6, 60).with_parity(Parity::Full).with_xi_ref(p.scales().xi_of(2.5));
        let model = build_hamiltonian(&p, &opts).unwrap();
        let s = p.scales();
        for n in 0..6 {
            let block = particle_block(&model, n);
            // remove the field-only terms on the diagonal
            let shift = -p.delta_c * n as f64;
            let xi_n = s.xi_of(n as f64);
            let o = ho_overlap_matrix(60, 8, model.basis.xi(), xi_n).unwrap().map(C64::from);
            let t = o.transpose() * &block * &o;
            for m in 0..8 {
                for k in 0..8 {
                    let expect = if m == k { s.omega_of(n as f64) * (m as f64 + 0.5) + shift } else { 0.0 };
                    assert_abs_diff_eq!(t[(m, k)].re, expect, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn harmonic_and_cos2_agree_for_deep_potentials() {
        // Lowest two even levels (m = 0, 2) of the particle part at fixed n.
        let p = SystemParams { kappa: 10.0, v0: -100.0, u0: -100.0, delta_c: 0.0, eta: 0.0, omega_rec: 1.0 };
        let harmonic = ModelOptions::harmonic(4, 24).with_xi_ref(p.scales().xi_of(1.0));
        let cos2 = ModelOptions { potential: Potential::Cos2, ..harmonic };
        let h = build_hamiltonian(&p, &harmonic).unwrap();
        let c = build_hamiltonian(&p, &cos2).unwrap();
        // At V = 100 the m = 2 level is 7% low (quartic correction), so the
        // comparison starts at V(1) = 200.
        for n in 1..4 {
            // the cos² block differs from the harmonic one by the light-shift
            // constants V0 + U0 n and the detuning convention (−U0 n)
            let shift = p.v0 + p.u0 * n as f64 - p.u0 * n as f64;
            let (eh, _) = eigh_sorted(&particle_block(&h, n));
            let (ec, _) = eigh_sorted(&(particle_block(&c, n) - CMatrix::identity(24, 24) * C64::from(shift)));
            for j in 0..2 {
                let rel = (eh[j] - ec[j]).abs() / eh[j].abs();
                assert!(rel < 0.05, "n = {n}, level {j}: {} vs {}", eh[j], ec[j]);
            }
        }
    }

    #[test]
    fn loss_operators() {
        let mut p = fig2();
        let dims = ProductDims { field: 4, particle: 3 };
        let loss = build_liouvillean_jump(&p, dims).unwrap();
        let jd = loss.jump.adjoint().compose(&loss.jump).unwrap();
        assert!(max_abs(&(jd.matrix() - loss.decay.matrix() * C64::from(2.0))) < 1e-12);
        p.kappa = 0.0;
        let loss = build_liouvillean_jump(&p, dims).unwrap();
        assert_eq!(max_abs(loss.jump.matrix()), 0.0);
    }

    #[test]
    fn effective_hamiltonian_examples() {
        let p = fig2();
        let h = build_effective_hamiltonian(&p, 0, 5).unwrap();
        // √(ω_rec(|V0| + |U0| n)) with |V0| = 100, |U0| = 100
        let expected = [10.0, 200f64.sqrt(), 300f64.sqrt()];
        for (n, e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(h.matrix()[(n, n)].re, e, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(expected[1], 14.142, epsilon = 1e-3);
        assert_abs_diff_eq!(expected[2], 17.321, epsilon = 1e-3);

        let mut frozen = p;
        frozen.omega_rec = 0.0;
        frozen.delta_c = 1.5;
        let h = build_effective_hamiltonian(&frozen, 3, 6).unwrap();
        let linear = linear_mode_hamiltonian(6, 1.5, p.eta).unwrap();
        assert!(max_abs(&(h.matrix() - linear.matrix())) < 1e-14);

        let mut free = p;
        free.u0 = 0.0;
        let h = build_effective_hamiltonian(&free, 2, 6).unwrap();
        let linear = linear_mode_hamiltonian(6, free.delta_c, free.eta).unwrap();
        let diff = h.matrix() - linear.matrix();
        let c = (100f64).sqrt() * 5.0;
        assert!(max_abs(&(diff - CMatrix::identity(6, 6) * C64::from(c))) < 1e-12);
    }

    #[test]
    fn resonance_detuning_examples() {
        let p = SystemParams { kappa: 10.0, v0: -100.0, u0: -100.0, delta_c: 0.0, eta: 25.0, omega_rec: 1.0 };
        assert_abs_diff_eq!(resonance_detuning(&p, 0).unwrap(), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(resonance_detuning(&p, 2).unwrap(), 25.0, epsilon = 1e-12);
        let mut free = p;
        free.u0 = 0.0;
        assert_eq!(resonance_detuning(&free, 3).unwrap(), 0.0);
        let mut flat = p;
        flat.v0 = 0.0;
        assert!(resonance_detuning(&flat, 0).is_err());

        // finite-difference oracle of the square root at n = 0
        let s = p.scales();
        let f = |n: f64| (s.omega_rec * s.v_of(n)).sqrt();
        let fd = (f(1e-6) - f(-1e-6)) / 2e-6;
        assert_abs_diff_eq!(resonance_detuning(&p, 0).unwrap(), fd, epsilon = 1e-6);
        // expanding elsewhere
        let fd2 = (f(2.0 + 1e-6) - f(2.0 - 1e-6)) / 2e-6 * 3.0;
        assert_abs_diff_eq!(resonance_detuning_about(&p, 1, 2.0).unwrap(), fd2, epsilon = 1e-6);
    }
}
