//! Cost of the separable transform and the rate overhead of model updates.

use csi_tc::harness::structured_complexity;
use csi_tc::ratesplit::effective_rate;

fn main() -> csi_tc::Result<()> {
    for (nt, nc) in [(8, 8), (32, 32), (64, 16)] {
        let c = structured_complexity(nt, nc, 1)?;
        println!(
            "{nt}x{nc}: {} parameters, {} complex MACs, {} FLOPs",
            c.parameters, c.complex_macs, c.flops
        );
    }
    let (n, tau) = (1024, 1e4);
    let full = 32.0 * 2.1e6;
    println!(
        "full FP32 model update: budget 8.0 -> {:.4}",
        effective_rate(8.0, full, n, tau)?
    );
    println!(
        "basis-only update (16 x 20 bits): budget 1.0 -> {:.6}",
        effective_rate(1.0, 320.0, n, tau)?
    );
    Ok(())
}
