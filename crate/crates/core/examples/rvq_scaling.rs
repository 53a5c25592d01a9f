//! Mean squared chordal distance of random vector quantization against the
//! exact moment and the fitted constant.

use csi_tc::mismatch::{estimate_cn, rvq_mean_chordal};
use csi_tc::quantizers::rvq_expected_chordal;

fn main() -> csi_tc::Result<()> {
    let trials = 2000;
    for n in [2, 4, 8] {
        println!("n = {n}");
        for bits in (2..=10).step_by(2) {
            println!(
                "  B = {bits:>2}: measured {:.5}  exact {:.5}",
                rvq_mean_chordal(n, bits, trials, 11)?,
                rvq_expected_chordal(n, bits)
            );
        }
        let est = estimate_cn(n, &(2..=10).collect::<Vec<_>>(), trials, 11)?;
        println!(
            "  fitted slope {:.4} (ideal 1), c_N = {:.4}, max residual {:.3} bits",
            est.slope, est.c_n, est.max_residual_bits
        );
    }
    Ok(())
}
