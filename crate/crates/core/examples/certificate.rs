//! Brezis-Ekeland certificate for a computed trajectory, and how a small control
//! perturbation breaks it.

use cpms::control::{certify, evaluate_cost};
use cpms::monotone::MonotoneMap;
use cpms::solver::{Problem, SolverConfig};
use cpms::space::SpectralSpace;
use num_complex::Complex64 as C;

fn main() -> cpms::Result<()> {
    let space = SpectralSpace::with_default_grid(1.0, 8)?;
    let problem = Problem::new(space.clone(), MonotoneMap::linear(C::new(0.1, 1.0))?);
    let run = certify(&space.mode(1), &problem, &SolverConfig::new(0.1, 1e-4))?;
    let c = &run.certificate;
    println!("J = {:.3e}, J/norm = {:.3e}, residual = {:.3e}, {:?}", c.cost, c.relative_cost(), c.residual, c.verdict);

    let bumped = run.control.perturbed(&space.mode(1), |t| 0.01 * t)?;
    let other = evaluate_cost(&run.trajectory.x, &bumped, &problem.beta, &problem.drift)?;
    println!("perturbed: J = {:.3e}, {:?}", other.cost, other.verdict);
    Ok(())
}
