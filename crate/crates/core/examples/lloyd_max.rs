//! Lloyd-Max design for the unit Gaussian and its distortion-rate behavior.

use csi_tc::quantizers::LloydMaxQuantizer;

fn main() -> csi_tc::Result<()> {
    println!("{:>6} {:>12} {:>12} {:>10}", "levels", "mse", "dB per bit", "iters");
    for levels in [1, 2, 4, 8, 16, 32] {
        let q = LloydMaxQuantizer::design(levels)?;
        let bits = (levels as f64).log2();
        println!(
            "{levels:>6} {:>12.6} {:>12.2} {:>10}",
            q.mse(),
            -10.0 * q.mse().log10() / bits.max(1e-12),
            q.iterations()
        );
    }
    let q = LloydMaxQuantizer::design(4)?;
    println!("4-level codebook {:.4?}", q.codebook());
    println!("4-level thresholds {:.4?}", q.thresholds());
    let x = 0.7;
    let i = q.quantize(x);
    println!("x = {x} -> cell {i} -> {:.4}", q.reconstruct(i));
    Ok(())
}
