//! Coherent-branch and stationary-spectrum subspaces under strong coupling.

use cavnl::experiments::presets::strong_coupling;
use cavnl::model::{ModelOptions, Parity};
use cavnl::subspace::{branch_steady_spectrum, build_effective_subspace, default_m_list, solve_coherent_branch};

fn main() -> cavnl::Result<()> {
    let p = strong_coupling();
    let opts = ModelOptions::harmonic(24, 10).with_xi_ref(p.scales().xi_of(0.0));
    let m_list = default_m_list(8, Parity::EvenOnly);
    for &m in &m_list {
        let branch = solve_coherent_branch(&p, m)?;
        let (eigs, _) = branch_steady_spectrum(&p, m, 24)?;
        let lead: Vec<String> = eigs.iter().take(3).map(|e| format!("{e:.2e}")).collect();
        println!("m = {m}: |alpha|² = {:.4}, leading eigenvalues {}", branch.alpha.norm_sqr(), lead.join(", "));
    }
    for eps in [1e-1, 1e-4] {
        let basis = build_effective_subspace(&p, &m_list, eps, &opts)?;
        println!("eps = {eps:e}: N_m = {:?}, dimension {}", basis.n_m, basis.ortho.len());
    }
    Ok(())
}
