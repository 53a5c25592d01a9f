//! Optimal split between coefficient and basis bits around the phase
//! transition.

use csi_tc::channel::{eig_hermitian, exp_correlation, kron_covariance};
use csi_tc::mismatch::MismatchModel;
use csi_tc::ratesplit::{optimal_e2e, optimal_split, phase_threshold};

fn main() -> csi_tc::Result<()> {
    let (_, l) = eig_hermitian(&kron_covariance(&exp_correlation(4, 0.9)?, &exp_correlation(4, 0.9)?)?)?;
    let model = MismatchModel::with_default_cn(16, 2, 2.0)?;
    let th = phase_threshold(&l, &model)?;
    println!(
        "threshold R_th = {:.6} (closed form {:.6}, {} active modes)",
        th.rate, th.closed_form, th.active_modes
    );
    println!("{:>7} {:>10} {:>10} {:>9} {:>10}", "R", "R_q", "R_0", "regime", "D_E2E");
    for k in 0..=12 {
        let r = th.rate * k as f64 / 6.0;
        let s = optimal_split(&l, &model, r)?;
        println!(
            "{r:>7.4} {:>10.6} {:>10.6} {:>9} {:>10.6}",
            s.r_q,
            s.r_0,
            s.regime,
            optimal_e2e(&l, &model, r)?
        );
    }
    Ok(())
}
