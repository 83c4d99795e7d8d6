//! The Fitzpatrick function: zero on the graph, positive off it, infinite for a
//! rotation away from its graph line.

use cpms::monotone::MonotoneMap;
use num_complex::Complex64 as C;

fn main() -> cpms::Result<()> {
    let beta = MonotoneMap::linear(C::new(0.5, 1.0))?;
    let z1 = C::new(0.3, -0.8);
    let on = beta.fitzpatrick(z1, beta.eval(z1));
    let gap = on.value - (z1 * beta.eval(z1).conj()).re;
    println!("on graph: F - Re<z1,z2> = {gap:.2e}");
    let off = beta.fitzpatrick(z1, C::new(1.0, 1.0));
    println!("off graph: F - Re<z1,z2> = {:.4}", off.value - (z1 * C::new(1.0, -1.0)).re);

    let rotation = MonotoneMap::power_phase(1.0)?;
    println!("rotation off its line: F = {}", rotation.fitzpatrick(z1, C::new(1.0, 0.0)).value);
    Ok(())
}
