//! Linear complex diffusion started from the first eigenmode, compared with the
//! exact exponential decay.

use cpms::monotone::MonotoneMap;
use cpms::solver::{solve_single, Problem, SolverConfig};
use cpms::space::SpectralSpace;
use num_complex::Complex64 as C;

fn main() -> cpms::Result<()> {
    let space = SpectralSpace::with_default_grid(1.0, 8)?;
    let c = C::new(0.1, 1.0);
    let problem = Problem::new(space.clone(), MonotoneMap::linear(c)?);
    let traj = solve_single(&space.mode(1), &problem, &SolverConfig::new(0.1, 1e-4))?;
    for s in (0..=traj.steps()).step_by(250) {
        let t = traj.times[s];
        let exact = (-c * space.eigenvalue(1) * t).exp();
        println!("t = {t:.4}  a_1 = {:.6}  exact = {:.6}", traj.y[s].coeff(1), exact);
    }
    println!("fitted C = {:.3e}", traj.fitted_c);
    Ok(())
}
