//! Subcommand implementations. Each returns its result so tests can call
//! them without spawning the binary.

use std::fs;
use std::path::{Path, PathBuf};

use ctcor::io::{read_chain, read_image, read_sinogram, write_image, write_pgm, write_sinogram, ChainWriter};
use ctcor::sampler::{tune_step_size, ChainSummary, GibbsObserver, RunningMoments, TuneOutcome};
use ctcor::{
    baselines, make_phantom, map_reconstruct, run_gibbs_observed, simulate_phantom_sinogram, simulate_sinogram,
    BaselineEstimate, ChainRecord, GeometrySpec, GibbsChain, Image, Method, Sinogram,
};

use crate::config::{check_range, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report;

pub const RUN_CONFIG: &str = "run.cfg";
pub const CHAIN_CSV: &str = "chain.csv";
pub const SUMMARY: &str = "summary.txt";

fn runtime(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("cannot {what} {}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| runtime("create directory", dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| runtime("write", path, e))
}

fn create_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

/// Geometry matching a sinogram: the configured full scan, or its first
/// `n_angles` angles when the sinogram holds a limited-angle subset.
pub fn geometry_for(cfg: &RunConfig, b: &Sinogram) -> CliResult<GeometrySpec> {
    let full = cfg.geometry();
    if b.n_detector() != full.n_detector || b.n_angles() == 0 || b.n_angles() > full.n_angles() {
        return Err(CliError::Validation(format!(
            "sinogram is {}x{} but the configuration allows at most {}x{}",
            b.n_angles(),
            b.n_detector(),
            full.n_angles(),
            full.n_detector
        )));
    }
    if b.n_angles() == full.n_angles() {
        return Ok(full);
    }
    let prefix: Vec<usize> = (0..b.n_angles()).collect();
    Ok(full.select_angles(&prefix)?)
}

/// Degrees to the angle indices of the configured scan.
fn subset_indices(geom: &GeometrySpec, degrees: f64) -> CliResult<Vec<usize>> {
    check_range(degrees)?;
    Ok(geom.angles_within(degrees.to_radians()))
}

/// Path with `suffix` appended to the file stem and extension `ext`.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Rasterizes the configured phantom and writes it with a PGM preview.
pub fn cmd_phantom(cfg: &RunConfig, size: Option<usize>, out: &Path) -> CliResult<Image> {
    let size = size.unwrap_or(cfg.geometry.image_size);
    let x = make_phantom(&cfg.phantom_spec(size))?;
    create_parent(out)?;
    write_image(out, &x)?;
    write_pgm(sibling(out, "", "pgm"), &x)?;
    Ok(x)
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    /// Image to project instead of the configured phantom.
    pub phantom: Option<PathBuf>,
    pub noiseless: bool,
    /// Degrees; overrides `simulate.angular_range`.
    pub angular_range: Option<f64>,
}

/// Projects the phantom at `simulate.c_true` on a refined grid, adds noise
/// and keeps the angles inside the requested range.
pub fn cmd_simulate(cfg: &RunConfig, opts: &SimulateOptions, out: &Path) -> CliResult<Sinogram> {
    let geom = cfg.geometry();
    let range = opts.angular_range.unwrap_or(cfg.simulate.angular_range);
    let keep = subset_indices(&geom, range)?;
    let noise = cfg.noise_spec();
    let noise = (cfg.noise.enabled && !opts.noiseless).then_some(&noise);
    let c = cfg.simulate.c_true;
    let ss = cfg.simulate.supersample;
    let full = match &opts.phantom {
        Some(p) => simulate_sinogram(&read_image(p)?, &geom, c, noise, ss)?,
        None => simulate_phantom_sinogram(&cfg.phantom_spec(geom.image_size), &geom, c, noise, ss)?,
    };
    let b = if keep.len() == geom.n_angles() {
        full
    } else {
        full.select_angles(&keep)?
    };
    create_parent(out)?;
    write_sinogram(out, &b)?;
    Ok(b)
}

#[derive(Debug, Clone, Default)]
pub struct ReconstructOptions {
    /// Offsets to reconstruct at; empty uses `solver.c` or the chain mean.
    pub offsets: Vec<f64>,
    pub alpha: Option<f64>,
    /// Takes α as the posterior mean of δ/λ and, without explicit
    /// offsets, c as the posterior mean of c.
    pub from_chain: Option<PathBuf>,
    pub burn_in: Option<usize>,
    pub nonneg: Option<bool>,
    pub k_fista: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub c: f64,
    pub alpha: f64,
    pub path: PathBuf,
    pub image: Image,
}

fn chain_means(path: &Path, burn_in: usize) -> CliResult<(f64, f64)> {
    let records = read_chain(path)?;
    if burn_in >= records.len() {
        return Err(CliError::Validation(format!(
            "burn-in {burn_in} leaves no samples of the {} in {}",
            records.len(),
            path.display()
        )));
    }
    let kept = &records[burn_in..];
    let n = kept.len() as f64;
    let ratio = kept.iter().map(|r| r.delta / r.lambda).sum::<f64>() / n;
    let c = kept.iter().map(|r| r.c).sum::<f64>() / n;
    Ok((ratio, c))
}

/// MAP reconstructions at one or more offsets. With several offsets every
/// output gets a `_c<value>` suffix.
pub fn cmd_reconstruct(
    cfg: &RunConfig,
    sinogram: &Path,
    opts: &ReconstructOptions,
    out: &Path,
) -> CliResult<Vec<Reconstruction>> {
    if opts.alpha.is_some() && opts.from_chain.is_some() {
        return Err(CliError::Validation("--alpha and --from-chain are exclusive".into()));
    }
    let b = read_sinogram(sinogram)?;
    let geom = geometry_for(cfg, &b)?;
    let (mut alpha, mut offsets) = (opts.alpha.unwrap_or(cfg.solver.alpha), opts.offsets.clone());
    if let Some(chain) = &opts.from_chain {
        let (ratio, c_mean) = chain_means(chain, opts.burn_in.unwrap_or(cfg.sampler.burn_in))?;
        alpha = ratio;
        if offsets.is_empty() {
            offsets.push(c_mean);
        }
    }
    if offsets.is_empty() {
        offsets.push(cfg.solver.c);
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(CliError::Validation(format!("alpha must be ≥ 0, got {alpha}")));
    }
    for c in &offsets {
        geom.check_offset(*c)?;
    }
    let nonneg = opts.nonneg.unwrap_or(cfg.solver.nonneg);
    let k_fista = opts.k_fista.unwrap_or(cfg.solver.k_fista);
    create_parent(out)?;
    let mut results = Vec::with_capacity(offsets.len());
    for &c in &offsets {
        let path = if offsets.len() == 1 {
            out.to_path_buf()
        } else {
            sibling(out, &format!("_c{c}"), "ctim")
        };
        let image = map_reconstruct(&b, &geom, c, alpha, nonneg, k_fista)?;
        write_image(&path, &image)?;
        write_pgm(sibling(&path, "", "pgm"), &image)?;
        results.push(Reconstruction { c, alpha, path, image });
    }
    Ok(results)
}

#[derive(Debug, Clone, Default)]
pub struct SampleOptions {
    /// Overrides `sampler.tune`.
    pub tune: Option<bool>,
    /// Overrides `sampler.burn_in`; affects summaries only, never the chain.
    pub burn_in: Option<usize>,
    pub k_gibbs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub chain: GibbsChain,
    pub summary: ChainSummary,
    pub tuning: Option<TuneOutcome>,
    pub step_size: f64,
    pub burn_in: usize,
    pub expected_cost: u64,
}

/// Streams chain rows to disk and refreshes the moment images.
struct DiskObserver {
    writer: ChainWriter,
    dir: PathBuf,
    interval: usize,
}

impl GibbsObserver for DiskObserver {
    fn on_record(&mut self, record: &ChainRecord) -> ctcor::Result<()> {
        self.writer.push(record)
    }

    fn on_moments(&mut self, m: &RunningMoments) -> ctcor::Result<()> {
        if m.count() == 0 {
            return Ok(());
        }
        write_image(self.dir.join("mean.ctim"), &m.mean())?;
        write_image(self.dir.join("second_moment.ctim"), &m.second_moment())
    }

    fn moment_interval(&self) -> usize {
        self.interval
    }
}

/// Runs the Gibbs sampler on a sinogram and writes everything to `dir`:
/// `run.cfg`, `chain.csv`, moment images, the last sample and `summary.txt`.
pub fn cmd_sample(cfg: &RunConfig, sinogram: &Path, dir: &Path, opts: &SampleOptions) -> CliResult<SampleOutcome> {
    let mut cfg = cfg.clone();
    if let Some(t) = opts.tune {
        cfg.sampler.tune = t;
    }
    if let Some(k) = opts.k_gibbs {
        cfg.sampler.k_gibbs = k;
    }
    if let Some(n) = opts.burn_in {
        cfg.sampler.burn_in = n;
    }
    cfg.validate()?;
    let b = read_sinogram(sinogram)?;
    let geom = geometry_for(&cfg, &b)?;
    let mut scfg = cfg.sampler_config();
    scfg.validate(&geom)?;
    create_dir(dir)?;
    write_text(&dir.join(RUN_CONFIG), &cfg.to_text())?;

    let tuning = if cfg.sampler.tune {
        let t = tune_step_size(&b, &geom, &scfg, cfg.sampler.tune_warmup, cfg.sampler.tune_pilot)?;
        scfg.step_size = t.step_size;
        scfg.x0 = Some(t.x.clone());
        scfg.c0 = t.c;
        Some(t)
    } else {
        None
    };

    let mut obs = DiskObserver {
        writer: ChainWriter::create(dir.join(CHAIN_CSV))?,
        dir: dir.to_path_buf(),
        interval: cfg.sampler.moment_interval,
    };
    let chain = run_gibbs_observed(&b, &geom, &scfg, &mut obs)?;
    write_image(dir.join("last.ctim"), &chain.last_image)?;
    let mean = chain.moments.mean();
    write_pgm(dir.join("mean.pgm"), &mean)?;
    let sd = Image::from_vec(
        mean.size(),
        chain.moments.variance().as_slice().iter().map(|v| v.sqrt()).collect(),
    )?;
    write_pgm(dir.join("sd.pgm"), &sd)?;

    let burn_in = cfg.sampler.burn_in;
    let summary = chain.summary(burn_in, cfg.sampler.max_lag)?;
    let expected_cost = scfg.expected_cost();
    let mut text = report::summary_table(&summary, burn_in, chain.records.len());
    text.push_str(&format!("step_size {}\n", scfg.step_size));
    if let Some(t) = &tuning {
        text.push_str(&format!(
            "tuning pilots {} converged {} pilot_acceptance {}\n",
            t.history.len(),
            t.converged,
            t.acceptance_rate
        ));
    }
    text.push_str(&format!(
        "forward_projections conditional {} expected {} overhead {}\n",
        chain.cost.conditional, expected_cost, chain.cost.overhead
    ));
    write_text(&dir.join(SUMMARY), &text)?;
    Ok(SampleOutcome {
        step_size: scfg.step_size,
        chain,
        summary,
        tuning,
        burn_in,
        expected_cost,
    })
}

/// Baseline offset estimate from the sinogram alone.
pub fn cmd_correct(cfg: &RunConfig, sinogram: &Path, method: Method) -> CliResult<BaselineEstimate> {
    let b = read_sinogram(sinogram)?;
    let geom = geometry_for(cfg, &b)?;
    Ok(baselines::estimate(method, &b, &geom)?)
}

/// Plots and a statistics table for a finished sampler run in `dir`.
/// Reads `k_metro`, the burn-in and the lag count from its `run.cfg`.
pub fn cmd_report(dir: &Path, burn_in: Option<usize>) -> CliResult<Vec<PathBuf>> {
    let cfg = RunConfig::load(&dir.join(RUN_CONFIG))?;
    let records = read_chain(dir.join(CHAIN_CSV))?;
    let burn_in = burn_in.unwrap_or(cfg.sampler.burn_in);
    report::write_report(dir, &records, cfg.sampler.k_metro, burn_in, cfg.sampler.max_lag)
}
