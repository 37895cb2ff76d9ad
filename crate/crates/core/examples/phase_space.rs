//! Wigner function, squeezing and field-particle negativity of small states.

use num_complex::Complex64 as C64;

use cavnl::hilbert::{coherent_state, CVector, DensityMatrix, ProductDims, QuantumState, SpaceTag};
use cavnl::observables::{axis, negativity, squeezing, wigner};

fn main() -> cavnl::Result<()> {
    let (a, _) = coherent_state(20, C64::new(1.5, 0.0))?;
    let (b, _) = coherent_state(20, C64::new(-1.5, 0.0))?;
    let cat = QuantumState::new(a.amplitudes() + b.amplitudes(), SpaceTag::Field)?.normalized()?;
    let rho = DensityMatrix::from_pure(&cat);
    let xs = axis(-4.0, 4.0, 9);
    let grid = wigner(&rho, &xs, &[0.0, 1.0])?;
    println!("even cat state, W(x, p) on p = 0 and p = 1:");
    for (i, x) in xs.iter().enumerate() {
        println!("  x = {x:+.1}: {:+.4}  {:+.4}", grid.value_at(i, 0), grid.value_at(i, 1));
    }
    println!("squeezing measure {:.4}", squeezing(&rho)?.measure);

    let dims = ProductDims { field: 3, particle: 2 };
    let mut v = CVector::zeros(dims.total());
    v[dims.index(0, 0)] = C64::new(0.8, 0.0);
    v[dims.index(2, 1)] = C64::new(0.6, 0.0);
    let joint = DensityMatrix::from_pure(&QuantumState::product_vector(v, dims)?);
    println!("negativity of 0.8|0,0> + 0.6|2,1>: {:.4}", negativity(&joint)?);
    Ok(())
}
