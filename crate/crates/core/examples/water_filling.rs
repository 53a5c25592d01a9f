//! Reverse water-filling over a Kronecker spectrum at a few rates.

use csi_tc::channel::{eig_hermitian, exp_correlation, kron_covariance};
use csi_tc::rwf::{dq, mu_closed_form, water_level};

fn main() -> csi_tc::Result<()> {
    let r = kron_covariance(&exp_correlation(4, 0.8)?, &exp_correlation(4, 0.5)?)?;
    let (_, l) = eig_hermitian(&r)?;
    println!("eigenvalues: {:.4?}", l.values());
    println!(
        "{:>6} {:>10} {:>7} {:>10} {:>12}",
        "rate", "mu", "active", "D_q", "closed form"
    );
    for rate in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let a = water_level(&l, rate)?;
        let closed = if a.active_set.is_empty() {
            a.water_level
        } else {
            mu_closed_form(&l, &a.active_set, rate, l.len())?
        };
        println!(
            "{rate:>6.2} {:>10.6} {:>7} {:>10.6} {:>12.6}",
            a.water_level,
            a.active_set.len(),
            dq(&l, rate)?,
            closed
        );
    }
    Ok(())
}
