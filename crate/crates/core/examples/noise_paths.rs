//! Stochastic convolution paths: per-mode variance against the closed form.

use cpms::noise::NoiseSpec;
use cpms::space::SpectralSpace;

fn main() -> cpms::Result<()> {
    let space = SpectralSpace::with_default_grid(1.0, 4)?;
    let noise = NoiseSpec::power_law(1.0, 3.0, 0.5, 4)?;
    println!("Hilbert-Schmidt norm squared {:.4}", noise.hilbert_schmidt_sq(&space));
    if NoiseSpec::power_law(1.0, 2.0, 0.5, 4).is_err() {
        println!("(gamma=1, r=2) rejected: not regular enough");
    }

    let times = [0.0, 0.5, 1.0];
    let paths = 2000;
    let mut second = [0.0; 4];
    for i in 0..paths {
        let w = noise.sample_convolution(&space, &times, 7, i)?;
        for (k, acc) in second.iter_mut().enumerate() {
            *acc += w.at(2).coeff(k + 1).norm_sqr() / paths as f64;
        }
    }
    for (k, m) in second.iter().enumerate() {
        let expect = noise.sigma_re()[k].powi(2) + noise.sigma_im()[k].powi(2);
        println!("mode {}: E|W_k(1)|^2 = {m:.5}, expected {expect:.5}", k + 1);
    }
    Ok(())
}
