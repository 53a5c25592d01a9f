//! Writes synthetic channels to a dump, ingests it and plans on the
//! moment-matched Gaussian.

use csi_tc::channel::{eig_hermitian, exp_correlation, kron_covariance, sample_channels};
use csi_tc::harness::{
    ingest_channels, plan_with, sample_covariance, write_channels, BasisMode, ExperimentConfig, Scenario,
};
use csi_tc::mismatch::MismatchModel;

fn main() -> csi_tc::Result<()> {
    let r = kron_covariance(&exp_correlation(4, 0.8)?, &exp_correlation(4, 0.8)?)?;
    let (u, l) = eig_hermitian(&r)?;
    let path = std::env::temp_dir().join("csi_tc_example.csid");
    write_channels(&sample_channels(&u, &l, 20_000, 9)?, &path)?;

    let batch = ingest_channels(&path)?;
    let r_hat = sample_covariance(&batch)?;
    let (_, l_hat) = eig_hermitian(&r_hat)?;
    println!("{} realizations of dimension {}", batch.count(), batch.dim());
    println!("true top eigenvalues   {:.4?}", &l.values()[..4]);
    println!("sample top eigenvalues {:.4?}", &l_hat.values()[..4]);

    let cfg = ExperimentConfig {
        nt: 4,
        nc: 4,
        basis: BasisMode::Perfect,
        rates: vec![0.25, 0.5, 1.0],
        ..ExperimentConfig::default()
    };
    let scn = Scenario::from_batch(&cfg, batch)?;
    let model = MismatchModel::with_default_cn(16, 0, cfg.tau as f64)?;
    for rec in plan_with(&cfg, &scn, &model)? {
        let exact = csi_tc::rwf::dq(&l, rec.r_q)?;
        println!(
            "R = {:.2}: moment-matched D_q {:.5}, true-covariance D_q {exact:.5}",
            rec.r_total, rec.analytic_dq
        );
    }
    std::fs::remove_file(&path).ok();
    Ok(())
}
