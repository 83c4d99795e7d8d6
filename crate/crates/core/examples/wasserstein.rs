//! Exact W2 between empirical laws by optimal assignment, and the weighted
//! distance between law paths.

use cpms::mean_field::{path_distance, wasserstein2, EmpiricalLaw, LawPath};
use cpms::space::SpectralSpace;
use num_complex::Complex64 as C;

fn main() -> cpms::Result<()> {
    let space = SpectralSpace::with_default_grid(1.0, 4)?;
    let cloud = |shift: f64| -> cpms::Result<EmpiricalLaw> {
        EmpiricalLaw::new(
            (0..5)
                .map(|i| space.state_from_fn(|j| C::new(i as f64 * 0.1 + shift, 0.0) / j as f64))
                .collect(),
        )
    };
    let (mu, nu) = (cloud(0.0)?, cloud(0.2)?);
    println!("W2(mu, nu) = {:.6}", wasserstein2(&mu, &nu)?);

    let times = vec![0.0, 0.5, 1.0];
    let a = LawPath::frozen(mu, times.clone())?;
    let b = LawPath::frozen(nu, times)?;
    println!("path distance with c = 2: {:.6}", path_distance(&a, &b, 2.0)?);
    Ok(())
}
