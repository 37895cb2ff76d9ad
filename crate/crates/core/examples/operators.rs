//! Truncated field operators, coherent states and oscillator overlaps.

use num_complex::Complex64 as C64;

use cavnl::hilbert::{coherent_state, fock_ops, ho_overlap_matrix, DensityMatrix};

fn main() -> cavnl::Result<()> {
    let ops = fock_ops(12)?;
    let comm = ops.a.commutator(&ops.a_dag)?;
    println!("[a, a†] diagonal (the last entry carries the cutoff):");
    let diag: Vec<String> = (0..12).map(|i| format!("{:.0}", comm.matrix()[(i, i)].re)).collect();
    println!("  {}", diag.join(" "));

    for n_fock in [8, 12, 20] {
        let (psi, tail) = coherent_state(n_fock, C64::new(2.0, 0.0))?;
        let n = DensityMatrix::from_pure(&psi).expectation(&fock_ops(n_fock)?.num)?.re;
        println!("|α|² = 4 at n_fock = {n_fock:2}: <n> = {n:.6}, lost tail {tail:.2e}");
    }

    // overlaps between oscillator states of two different lengths
    let o = ho_overlap_matrix(6, 6, 0.5, 0.6)?;
    println!("<m, 0.5 | m', 0.6> for even m, m' up to 4:");
    for m in (0..6).step_by(2) {
        let row: Vec<String> = (0..6).step_by(2).map(|k| format!("{:+.5}", o[(m, k)])).collect();
        println!("  {}", row.join("  "));
    }
    Ok(())
}
