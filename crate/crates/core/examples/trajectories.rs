//! A small quantum-trajectory ensemble of the coupled system, checked
//! against the master equation.

use cavnl::experiments::presets::moderate_coupling;
use cavnl::hilbert::{DensityMatrix, QuantumState, SpaceTag};
use cavnl::liouville::Superoperator;
use cavnl::mcwf::{run_ensemble, EnsembleConfig, Observable, TrajectoryOptions};
use cavnl::model::{build_hamiltonian, build_liouvillean_jump, non_hermitian_generator, photon_number_operator, ModelOptions};
use cavnl::observables::axis;

fn main() -> cavnl::Result<()> {
    let p = moderate_coupling();
    let model = build_hamiltonian(&p, &ModelOptions::harmonic(6, 3))?;
    let dims = model.dims();
    let loss = build_liouvillean_jump(&p, dims)?;
    let psi0 = QuantumState::product(
        &QuantumState::basis(dims.field, 0, SpaceTag::Field)?,
        &QuantumState::basis(dims.particle, 0, SpaceTag::Particle)?,
    )?;
    let num = photon_number_operator(dims)?;
    let times = axis(0.0, 0.5, 6);
    let cfg = EnsembleConfig {
        generator: non_hermitian_generator(&model.hamiltonian, &loss.decay)?,
        jump: loss.jump,
        psi0: psi0.clone(),
        times: times.clone(),
        options: TrajectoryOptions::default(),
        average_density: false,
    };
    let ens = run_ensemble(&cfg, 400, 1, &[Observable::operator("n", &num)])?;
    let exact = Superoperator::assemble(&model.hamiltonian, p.kappa)?
        .integrate_master(&DensityMatrix::from_pure(&psi0), &times)?;
    let (mean, err) = ens.series("n").expect("observable was requested");
    println!("    t   <n> trajectories        <n> master equation");
    for (j, t) in times.iter().enumerate() {
        println!("{t:5.2}   {:.4} ± {:.4}       {:.4}", mean[j], err[j], exact[j].expectation(&num)?.re);
    }
    let jumps: usize = ens.jump_counts.iter().sum();
    println!("mean jumps per trajectory {:.2}", jumps as f64 / ens.n_traj as f64);
    Ok(())
}
