//! Stationary field states of the conditional Hamiltonians at resonance.

use cavnl::experiments::presets::moderate_coupling;
use cavnl::liouville::Superoperator;
use cavnl::model::{build_effective_hamiltonian, resonance_detuning};
use cavnl::observables::{coherent_fit_fidelity, photon_stats, squeezing};

fn main() -> cavnl::Result<()> {
    let base = moderate_coupling();
    println!(" m    delta_c     <n>    Mandel Q   fidelity   -ln(lambda_s)");
    for m in [0, 2, 4, 8] {
        let mut p = base;
        p.delta_c = resonance_detuning(&base, m)?;
        let h = build_effective_hamiltonian(&p, m, 30)?;
        let rho = Superoperator::assemble(&h, p.kappa)?.steady_state()?;
        let (n, var) = photon_stats(&rho)?;
        println!(
            "{m:2}  {:9.3}  {n:6.3}  {:9.4}  {:9.5}  {:12.5}",
            p.delta_c,
            (var - n) / n,
            coherent_fit_fidelity(&rho)?,
            squeezing(&rho)?.measure
        );
    }
    Ok(())
}
