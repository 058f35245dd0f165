//! Command-line front end for the `ctcor` toolkit.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use ctcor::Method;

use crate::commands::{ReconstructOptions, SampleOptions, SimulateOptions};
use crate::config::RunConfig;
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "ctcor",
    version,
    about = "Fan-beam CT with center-of-rotation offset estimation"
)]
pub struct Cli {
    /// Run configuration; defaults apply to every key it leaves out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize the configured phantom.
    Phantom {
        #[arg(long)]
        size: Option<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Simulate a sinogram at the configured true offset.
    Simulate {
        /// Image to project instead of the configured phantom.
        #[arg(long)]
        phantom: Option<PathBuf>,
        #[arg(long)]
        noiseless: bool,
        /// Degrees of rotation to keep, starting at the first angle.
        #[arg(long)]
        angular_range: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// MAP reconstruction at fixed offsets.
    Reconstruct {
        sinogram: PathBuf,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "c_list")]
        c: Option<f64>,
        /// Comma-separated offsets.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        c_list: Option<Vec<f64>>,
        #[arg(long, conflicts_with = "from_chain")]
        alpha: Option<f64>,
        /// Chain whose posterior means set α = δ/λ and, if no offset is given, c.
        #[arg(long)]
        from_chain: Option<PathBuf>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        nonneg: Option<bool>,
        #[arg(long)]
        k_fista: Option<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Joint sampling of image, noise and prior precisions, and offset.
    Sample {
        sinogram: PathBuf,
        /// Output directory; defaults to `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Tune the Metropolis step before sampling.
        #[arg(long, conflicts_with = "no_tune")]
        tune: bool,
        #[arg(long)]
        no_tune: bool,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        k_gibbs: Option<usize>,
    },
    /// Baseline offset estimate from the sinogram alone.
    Correct {
        sinogram: PathBuf,
        #[arg(long, default_value = "com")]
        method: Method,
    },
    /// Diagnostics for a finished `sample` run.
    Report {
        dir: PathBuf,
        #[arg(long)]
        burn_in: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Executes a parsed command, printing its results to stdout.
pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Phantom { size, out } => {
            let x = commands::cmd_phantom(&cfg, size, &out)?;
            println!("wrote {} ({1}x{1})", out.display(), x.size());
        }
        Command::Simulate {
            phantom,
            noiseless,
            angular_range,
            out,
        } => {
            let opts = SimulateOptions {
                phantom,
                noiseless,
                angular_range,
            };
            let b = commands::cmd_simulate(&cfg, &opts, &out)?;
            println!(
                "wrote {} ({} angles x {} detectors)",
                out.display(),
                b.n_angles(),
                b.n_detector()
            );
        }
        Command::Reconstruct {
            sinogram,
            c,
            c_list,
            alpha,
            from_chain,
            burn_in,
            nonneg,
            k_fista,
            out,
        } => {
            let offsets = c_list.unwrap_or_default().into_iter().chain(c).collect();
            let opts = ReconstructOptions {
                offsets,
                alpha,
                from_chain,
                burn_in,
                nonneg,
                k_fista,
            };
            for r in commands::cmd_reconstruct(&cfg, &sinogram, &opts, &out)? {
                println!("c={} alpha={} wrote {}", r.c, r.alpha, r.path.display());
            }
        }
        Command::Sample {
            sinogram,
            out_dir,
            tune,
            no_tune,
            burn_in,
            k_gibbs,
        } => {
            let dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            let opts = SampleOptions {
                tune: (tune || no_tune).then_some(tune),
                burn_in,
                k_gibbs,
            };
            let o = commands::cmd_sample(&cfg, &sinogram, &dir, &opts)?;
            print!(
                "{}",
                report::summary_table(&o.summary, o.burn_in, o.chain.records.len())
            );
            println!("step_size {}", o.step_size);
            println!(
                "forward_projections conditional {} expected {} overhead {}",
                o.chain.cost.conditional, o.expected_cost, o.chain.cost.overhead
            );
        }
        Command::Correct { sinogram, method } => {
            let e = commands::cmd_correct(&cfg, &sinogram, method)?;
            println!(
                "{} estimate: center offset {:.4} pixels (detector shift {:.4} pixels)",
                e.method, e.c_hat, e.detector_shift
            );
            if e.warning {
                eprintln!("warning: the scan does not cover a full rotation; the estimate may be biased");
            }
            println!("{e}");
        }
        Command::Report { dir, burn_in } => {
            for p in commands::cmd_report(&dir, burn_in)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

/// Parses `args` and runs; returns the process exit code. Usage errors
/// count as validation errors (1), help and version output as success.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
