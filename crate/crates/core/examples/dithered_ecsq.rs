//! Entropy-matched subtractive-dither quantization of a Gaussian source,
//! comparing measured distortion with the Gaussian bound.

use csi_tc::quantizers::DitheredUniform;
use csi_tc::rng::{self, Domain};
use rand::Rng;

fn main() -> csi_tc::Result<()> {
    let samples = 200_000;
    println!(
        "{:>6} {:>9} {:>10} {:>10} {:>10} {:>8}",
        "bits", "step", "raw mse", "gain mse", "2^-2b", "gap dB"
    );
    for bits in [0.25, 0.5, 1.0, 2.0, 3.0] {
        let q = DitheredUniform::for_entropy(bits)?;
        let mut rng = rng::stream(5, Domain::Dither, 0);
        let mut src = rng::stream(5, Domain::Channel, 0);
        let g = q.mmse_gain();
        let (mut raw, mut err) = (0.0, 0.0);
        for _ in 0..samples {
            let x = rng::complex_normal(&mut src).re * std::f64::consts::SQRT_2;
            let d = q.dither_from_unit(rng.random::<f64>());
            let y = q.reconstruct(q.quantize(x, d), d);
            raw += (x - y) * (x - y);
            err += (x - g * y) * (x - g * y);
        }
        let mse = err / samples as f64;
        let bound = (-2.0 * bits).exp2();
        println!(
            "{bits:>6.2} {:>9.4} {:>10.5} {mse:>10.5} {bound:>10.5} {:>8.3}",
            q.step(),
            raw / samples as f64,
            10.0 * (mse / bound).log10()
        );
    }
    Ok(())
}
