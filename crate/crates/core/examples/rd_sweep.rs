//! A small Monte Carlo rate-distortion sweep with quantized basis feedback,
//! written as CSV to stdout.

use csi_tc::harness::{run_rd_sweep, write_results, BasisMode, ExperimentConfig, OutputFormat};

fn main() -> csi_tc::Result<()> {
    let cfg = ExperimentConfig {
        nt: 4,
        nc: 4,
        tau: 500,
        trials: 2000,
        basis: BasisMode::Structured,
        max_basis_bits: 12,
        rates: vec![0.0, 0.25, 0.5, 1.0],
        ..ExperimentConfig::default()
    };
    let records = run_rd_sweep(&cfg)?;
    write_results(&records, std::io::stdout().lock(), OutputFormat::Csv)
}
