//! Successive Galerkin truncations of a nonlinear problem approach each other.

use cpms::monotone::MonotoneMap;
use cpms::solver::{cauchy_study, Problem, SolverConfig};
use cpms::space::SpectralSpace;
use num_complex::Complex64 as C;

fn main() -> cpms::Result<()> {
    let rows = cauchy_study(&[8, 16, 32], &SolverConfig::new(0.05, 1e-3), |n| {
        let space = SpectralSpace::with_default_grid(1.0, n)?;
        let beta = MonotoneMap::strictified(MonotoneMap::power_phase(2.0)?, 0.5)?;
        let x0 = space.state_from_fn(|j| C::new(1.0, 0.5) * (j as f64).powi(-3));
        Ok((Problem::new(space, beta), x0))
    })?;
    for r in rows {
        println!(
            "N {:>2} -> {:>2}: sup H^-1 gap {:.3e}, integrated L2 gap {:.3e}",
            r.coarse, r.fine, r.sup_dual, r.l2_integral
        );
    }
    Ok(())
}
