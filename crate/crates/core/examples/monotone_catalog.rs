//! Monotonicity constants, resolvents and inverses for the catalog of maps on C.

use std::sync::Arc;

use cpms::monotone::{MonotoneMap, SaturatingProfile};
use num_complex::Complex64 as C;

fn main() -> cpms::Result<()> {
    let maps = [
        MonotoneMap::linear(C::new(0.1, 1.0))?,
        MonotoneMap::power_phase(1.0)?,
        MonotoneMap::power_phase(2.0)?,
        MonotoneMap::strictified(MonotoneMap::power_phase(2.0)?, 0.5)?,
        MonotoneMap::modulus(Arc::new(SaturatingProfile {
            base: C::new(1.0, 0.5),
            gain: 0.5,
        }))?,
    ];
    let w = C::new(0.7, -1.2);
    for beta in &maps {
        let alpha_hat = beta.check_monotone(10_000, 1);
        let z = beta.resolvent(0.5, w)?;
        let residual = (z + beta.eval(z) * 0.5 - w).norm();
        println!(
            "{:<40} alpha = {:.3}, sampled alpha = {alpha_hat:+.3e}, resolvent residual {residual:.1e}",
            beta.name(),
            beta.alpha()
        );
    }
    Ok(())
}
