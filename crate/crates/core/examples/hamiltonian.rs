//! Product-space Hamiltonian, its symmetries, and the conditional field
//! Hamiltonians of the vibrational levels.

use cavnl::experiments::presets::moderate_coupling;
use cavnl::model::{
    build_effective_hamiltonian, build_hamiltonian, parity_operator, resonance_detuning, ModelOptions, Parity,
};

fn main() -> cavnl::Result<()> {
    let p = moderate_coupling();
    let s = p.scales();
    println!("kappa = {}, |V0| = {}, |U0| = {}, eta = {}", p.kappa, s.v0_abs, s.u0_abs, p.eta);
    for n in [0.0, 1.0, 4.0, 8.0] {
        println!("n = {n}: V = {:7.1}  Omega = {:6.2}  xi = {:.4}", s.v_of(n), s.omega_of(n), s.xi_of(n));
    }

    let model = build_hamiltonian(&p, &ModelOptions::harmonic(10, 8).with_parity(Parity::Full))?;
    let parity = parity_operator(&model)?;
    let comm = model.hamiltonian.commutator(&parity)?;
    let worst = comm.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("product dimension {}, max |[H, parity]| = {worst:.1e}", model.dims().total());

    for m in [0, 2, 4] {
        let h = build_effective_hamiltonian(&p, m, 16)?;
        println!("m = {m}: resonance detuning {:.3}, conditional H is {}x{}", resonance_detuning(&p, m)?, h.dim(), h.dim());
    }
    Ok(())
}
