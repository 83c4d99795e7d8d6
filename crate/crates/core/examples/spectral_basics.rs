//! Dirichlet eigenbasis, grid transforms and the three norms.

use cpms::space::{Norm, SpectralSpace};
use num_complex::Complex64 as C;

fn main() -> cpms::Result<()> {
    let space = SpectralSpace::with_default_grid(1.0, 16)?;
    println!("N = {}, grid = {}", space.modes(), space.grid_size());
    println!("lambda_1 = {:.6}, lambda_N = {:.3}", space.eigenvalue(1), space.eigenvalue(16));

    let u = space.state_from_fn(|j| C::new(1.0, -0.5) / (j as f64).powi(2));
    let back = u.space().clone();
    let roundtrip = cpms::space::SpectralState::from_grid(&back, &u.to_grid())?;
    println!("grid roundtrip error {:.2e}", u.max_abs_diff(&roundtrip));

    for (name, norm) in [("H^-1", Norm::HMinusOne), ("L2", Norm::L2), ("H^1", Norm::HOne)] {
        println!("{name:>5} norm {:.6}", u.norm(norm));
    }
    Ok(())
}
