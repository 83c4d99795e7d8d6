//! Picard iteration on the law path for a noisy particle system with a mean-field
//! drift, read from the shipped configuration.

use std::path::Path;

use cpms::config::LoadedConfig;
use cpms::solver::solve_mckean_vlasov;

fn main() -> cpms::Result<()> {
    let cfg = LoadedConfig::from_path(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/mean_field.toml")))?;
    let problem = cfg.problem()?;
    let x0 = cfg.initial(&problem.space)?;
    let solver = cfg.solver(None)?;
    let run = solve_mckean_vlasov(&vec![x0; solver.ensemble], &problem, &solver)?;
    for (i, d) in run.report.distances.iter().enumerate() {
        println!("iteration {}: path distance {d:.3e}", i + 1);
    }
    println!(
        "observed ratio {:.4}, theoretical bound {:.4}",
        run.report.contraction_ratio.unwrap_or(f64::NAN),
        run.report.theoretical_ratio.unwrap_or(f64::NAN)
    );
    Ok(())
}
