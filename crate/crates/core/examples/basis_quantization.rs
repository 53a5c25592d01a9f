//! Separable basis feedback: quantize the dominant factor columns and see
//! how the effective Kronecker basis drifts with the bit budget.

use csi_tc::channel::{eig_hermitian, exp_correlation, kron_eigenbasis};
use csi_tc::numeric::frobenius;
use csi_tc::quantizers::{quantize_basis, quantize_dominant};

fn main() -> csi_tc::Result<()> {
    let (us, ls) = eig_hermitian(&exp_correlation(4, 0.8)?)?;
    let (uf, lf) = eig_hermitian(&exp_correlation(4, 0.6)?)?;
    let (u, _) = kron_eigenbasis(&us, &ls, &uf, &lf)?;
    println!(
        "{:>4} {:>14} {:>14} {:>12}",
        "B", "factor chord^2", "|U - Uq|_F^2", "unitarity"
    );
    for bits in [4, 8, 12, 16] {
        let q = quantize_basis(&us, &ls, &uf, &lf, 1, 1, bits, 3)?;
        let drift = frobenius(&(u.matrix() - q.matrix.matrix())).powi(2);
        println!(
            "{bits:>4} {:>14.5} {drift:>14.5} {:>12.2e}",
            q.mean_chordal_sq(),
            q.matrix.unitarity_defect()
        );
    }
    let q = quantize_dominant(&u, 2, 12, 3)?;
    println!(
        "full 16-dim basis, p = 2, B = 12: chordal^2 per column {:.4?}",
        q.column_chordal_sq
    );
    Ok(())
}
