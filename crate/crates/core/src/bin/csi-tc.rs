use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use csi_tc::harness::{self, BasisMode, ExperimentConfig, OutputFormat, ResultRecord, Source};
use csi_tc::mismatch::estimate_cn;
use csi_tc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "csi-tc",
    version,
    about = "Rate-split transform coding of CSI under basis mismatch"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal rate split, threshold and model distortion per rate point.
    Plan(RunArgs),
    /// Monte Carlo rate-distortion sweep.
    Sweep(RunArgs),
    /// Moment-match a channel dump and plan or sweep on it.
    Ingest {
        /// Channel dump (CSID format).
        dump: PathBuf,
        /// Only run the analytic plan.
        #[arg(long)]
        plan_only: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit the RVQ constant c_N by Monte Carlo.
    EstimateCn {
        #[arg(long)]
        n: usize,
        /// Comma-separated bit counts.
        #[arg(long, default_value = "4,5,6,7,8,9,10,11,12")]
        bits: String,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter and FLOP count of the separable transform.
    Complexity {
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        nc: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    #[command(flatten)]
    overrides: Overrides,
}

/// One flag per config key.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    nt: Option<String>,
    #[arg(long)]
    nc: Option<String>,
    #[arg(long = "rho_s")]
    rho_s: Option<String>,
    #[arg(long = "rho_f")]
    rho_f: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long = "p_s")]
    p_s: Option<String>,
    #[arg(long = "p_f")]
    p_f: Option<String>,
    #[arg(long = "c_n")]
    c_n: Option<String>,
    #[arg(long)]
    quantizer: Option<String>,
    #[arg(long)]
    basis: Option<String>,
    /// Comma-separated rate grid.
    #[arg(long)]
    rates: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    source: Option<String>,
    #[arg(long = "update_bits")]
    update_bits: Option<String>,
    #[arg(long = "zero_beyond_p")]
    zero_beyond_p: Option<String>,
    #[arg(long = "spatial_bit_share")]
    spatial_bit_share: Option<String>,
    #[arg(long = "max_basis_bits")]
    max_basis_bits: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &String)> {
        [
            ("nt", &self.nt),
            ("nc", &self.nc),
            ("rho_s", &self.rho_s),
            ("rho_f", &self.rho_f),
            ("tau", &self.tau),
            ("p_s", &self.p_s),
            ("p_f", &self.p_f),
            ("c_n", &self.c_n),
            ("quantizer", &self.quantizer),
            ("basis", &self.basis),
            ("rates", &self.rates),
            ("trials", &self.trials),
            ("source", &self.source),
            ("update_bits", &self.update_bits),
            ("zero_beyond_p", &self.zero_beyond_p),
            ("spatial_bit_share", &self.spatial_bit_share),
            ("max_basis_bits", &self.max_basis_bits),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
        .collect()
    }
}

fn load_config(run: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &run.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for (k, v) in run.overrides.pairs() {
        cfg.set(k, v)?;
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(records: &[ResultRecord], run: &RunArgs) -> Result<()> {
    let format: OutputFormat = run.format.parse()?;
    match &run.out {
        Some(path) => harness::emit_results(records, path, format),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            harness::write_results(records, &mut lock, format)?;
            lock.flush().map_err(|e| Error::Format(e.to_string()))
        }
    }
}

fn write_text(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan(run) => {
            let cfg = load_config(&run)?;
            emit(&harness::plan(&cfg)?, &run)
        }
        Command::Sweep(run) => {
            let cfg = load_config(&run)?;
            emit(&harness::run_rd_sweep(&cfg)?, &run)
        }
        Command::Ingest { dump, plan_only, run } => {
            let mut cfg = load_config(&run)?;
            cfg.source = Source::Dump(dump);
            if cfg.basis == BasisMode::Structured && run.overrides.basis.is_none() {
                cfg.basis = BasisMode::Perfect;
            }
            let records = if plan_only {
                harness::plan(&cfg)?
            } else {
                harness::run_rd_sweep(&cfg)?
            };
            emit(&records, &run)
        }
        Command::EstimateCn {
            n,
            bits,
            trials,
            seed,
            out,
        } => {
            let bits = bits
                .split(',')
                .map(|b| {
                    b.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::Format(format!("bad bit count '{b}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            let est = estimate_cn(n, &bits, trials, seed)?;
            write_text(
                &out,
                &serde_json::to_string_pretty(&est).map_err(|e| Error::Format(e.to_string()))?,
            )
        }
        Command::Complexity { nt, nc, p } => {
            let c = harness::structured_complexity(nt, nc, p)?;
            println!("parameters\t{}", c.parameters);
            println!("complex_macs\t{}", c.complex_macs);
            println!("flops\t{} (1 complex MAC = 2 FLOPs)", c.flops);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
