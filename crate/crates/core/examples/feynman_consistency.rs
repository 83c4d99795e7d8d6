//! One-step path-integral propagation: residual decay in eps and the phase
//! transform consistency check.

use cpms::feynman::{phase_transform_gap, residual_slope, ActionSpec, CheckOptions, LimitForm, WaveGrid};
use num_complex::Complex64 as C;

fn main() -> cpms::Result<()> {
    let psi = WaveGrid::from_fn(-3.0, 3.0, 1e-3, |x| C::new((-x * x / 2.0).exp(), 0.0))?;
    let opts = CheckOptions::default();
    let action = ActionSpec::LogLinear { k: C::new(0.0, 0.5) };
    for form in [LimitForm::Wave, LimitForm::Log] {
        let report = residual_slope(&psi, &[1e-2, 1e-3, 1e-4], action, form, &opts)?;
        println!("{form:?}: residuals {:?}, slope {:.3}", report.residuals, report.slope);
    }
    println!("phase transform gap {:.2e}", phase_transform_gap(&psi, 0.5, &opts)?);
    Ok(())
}
