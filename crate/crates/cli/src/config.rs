//! Plain-text run configuration.
//!
//! One `section.key = value` assignment per line; `#` starts a comment;
//! lists are comma-separated. Every key is optional and falls back to the
//! standard desk scenario. Unknown or repeated keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ctcor::sampler::{HyperPriors, OffsetPrior};
use ctcor::simulate::{Disk, NoiseSpec, PhantomSpec};
use ctcor::{Execution, GeometrySpec, SamplerConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryBlock {
    pub source_to_center: f64,
    pub center_to_detector: f64,
    pub n_detector: usize,
    pub detector_pixel_size: f64,
    pub n_angles: usize,
    pub image_size: usize,
    pub image_pixel_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomBlock {
    /// `None` falls back to the beads layout.
    pub disks: Option<Vec<Disk>>,
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateBlock {
    pub c_true: f64,
    pub supersample: usize,
    /// Degrees, measured from the first angle.
    pub angular_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBlock {
    pub lambda_true: f64,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverBlock {
    pub c: f64,
    pub alpha: f64,
    pub k_fista: usize,
    pub nonneg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerBlock {
    pub k_gibbs: usize,
    pub k_metro: usize,
    pub k_fista: usize,
    pub step_size: f64,
    pub c0: f64,
    pub mu_c: f64,
    pub sigma_c: f64,
    pub alpha_lambda: f64,
    pub beta_lambda: f64,
    pub alpha_delta: f64,
    pub beta_delta: f64,
    pub nonneg: bool,
    pub burn_in: usize,
    pub tune: bool,
    pub tune_warmup: usize,
    pub tune_pilot: usize,
    pub init_alpha: f64,
    pub init_k_fista: usize,
    pub norm_refresh_iters: usize,
    pub sparse_image_step: bool,
    pub parallel: bool,
    /// Sweeps between flushes of the running moment images.
    pub moment_interval: usize,
    pub max_lag: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub geometry: GeometryBlock,
    pub phantom: PhantomBlock,
    pub simulate: SimulateBlock,
    pub noise: NoiseBlock,
    pub solver: SolverBlock,
    pub sampler: SamplerBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SamplerConfig::default();
        let hp = HyperPriors::default();
        let op = OffsetPrior::default();
        RunConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            geometry: GeometryBlock {
                source_to_center: 250.0,
                center_to_detector: 250.0,
                n_detector: 100,
                detector_pixel_size: 1.6,
                n_angles: 180,
                image_size: 64,
                image_pixel_size: 1.0,
            },
            phantom: PhantomBlock {
                disks: None,
                background: 0.0,
            },
            simulate: SimulateBlock {
                c_true: 3.0,
                supersample: 2,
                angular_range: 360.0,
            },
            noise: NoiseBlock {
                lambda_true: 2500.0,
                enabled: true,
            },
            solver: SolverBlock {
                c: 0.0,
                alpha: 1.0,
                k_fista: 200,
                nonneg: true,
            },
            sampler: SamplerBlock {
                k_gibbs: 800,
                k_metro: s.k_metro,
                k_fista: s.k_fista,
                step_size: s.step_size,
                c0: s.c0,
                mu_c: op.mu_c,
                sigma_c: op.sigma_c,
                alpha_lambda: hp.alpha_lambda,
                beta_lambda: hp.beta_lambda,
                alpha_delta: hp.alpha_delta,
                beta_delta: hp.beta_delta,
                nonneg: s.nonneg,
                burn_in: 400,
                tune: true,
                tune_warmup: 100,
                tune_pilot: 50,
                init_alpha: s.init_alpha,
                init_k_fista: s.init_k_fista,
                norm_refresh_iters: s.norm_refresh_iters,
                sparse_image_step: s.sparse_image_step,
                parallel: false,
                moment_interval: 50,
                max_lag: 50,
            },
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse::<T>().map_err(|_| format!("{key}: cannot parse '{v}'"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got '{v}'")),
    }
}

/// `"cx cy r v, cx cy r v, ..."`; an empty string means no disks.
pub fn parse_disks(v: &str) -> Result<Vec<Disk>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let f: Vec<f64> = item
                .split_whitespace()
                .map(|t| parse_num::<f64>("phantom.disks", t))
                .collect::<Result<_, _>>()?;
            match f[..] {
                [center_x, center_y, radius, value] => Ok(Disk {
                    center_x,
                    center_y,
                    radius,
                    value,
                }),
                _ => Err(format!(
                    "phantom.disks: '{item}' needs four numbers (center_x center_y radius value)"
                )),
            }
        })
        .collect()
}

fn format_disks(disks: &[Disk]) -> String {
    disks
        .iter()
        .map(|d| format!("{} {} {} {}", d.center_x, d.center_y, d.radius, d.value))
        .collect::<Vec<_>>()
        .join(", ")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| CliError::Validation(format!("line {}: {m}", no + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            if !seen.insert(key.to_string()) {
                return Err(err(format!("{key} is set twice")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let g = &mut self.geometry;
        let s = &mut self.sampler;
        match key {
            "seed" => self.seed = parse_num(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "geometry.source_to_center" => g.source_to_center = parse_num(key, v)?,
            "geometry.center_to_detector" => g.center_to_detector = parse_num(key, v)?,
            "geometry.n_detector" => g.n_detector = parse_num(key, v)?,
            "geometry.detector_pixel_size" => g.detector_pixel_size = parse_num(key, v)?,
            "geometry.n_angles" => g.n_angles = parse_num(key, v)?,
            "geometry.image_size" => g.image_size = parse_num(key, v)?,
            "geometry.image_pixel_size" => g.image_pixel_size = parse_num(key, v)?,
            "phantom.disks" => self.phantom.disks = Some(parse_disks(v)?),
            "phantom.background" => self.phantom.background = parse_num(key, v)?,
            "simulate.c_true" => self.simulate.c_true = parse_num(key, v)?,
            "simulate.supersample" => self.simulate.supersample = parse_num(key, v)?,
            "simulate.angular_range" => self.simulate.angular_range = parse_num(key, v)?,
            "noise.lambda_true" => self.noise.lambda_true = parse_num(key, v)?,
            "noise.enabled" => self.noise.enabled = parse_bool(key, v)?,
            "solver.c" => self.solver.c = parse_num(key, v)?,
            "solver.alpha" => self.solver.alpha = parse_num(key, v)?,
            "solver.k_fista" => self.solver.k_fista = parse_num(key, v)?,
            "solver.nonneg" => self.solver.nonneg = parse_bool(key, v)?,
            "sampler.k_gibbs" => s.k_gibbs = parse_num(key, v)?,
            "sampler.k_metro" => s.k_metro = parse_num(key, v)?,
            "sampler.k_fista" => s.k_fista = parse_num(key, v)?,
            "sampler.step_size" => s.step_size = parse_num(key, v)?,
            "sampler.c0" => s.c0 = parse_num(key, v)?,
            "sampler.mu_c" => s.mu_c = parse_num(key, v)?,
            "sampler.sigma_c" => s.sigma_c = parse_num(key, v)?,
            "sampler.alpha_lambda" => s.alpha_lambda = parse_num(key, v)?,
            "sampler.beta_lambda" => s.beta_lambda = parse_num(key, v)?,
            "sampler.alpha_delta" => s.alpha_delta = parse_num(key, v)?,
            "sampler.beta_delta" => s.beta_delta = parse_num(key, v)?,
            "sampler.nonneg" => s.nonneg = parse_bool(key, v)?,
            "sampler.burn_in" => s.burn_in = parse_num(key, v)?,
            "sampler.tune" => s.tune = parse_bool(key, v)?,
            "sampler.tune_warmup" => s.tune_warmup = parse_num(key, v)?,
            "sampler.tune_pilot" => s.tune_pilot = parse_num(key, v)?,
            "sampler.init_alpha" => s.init_alpha = parse_num(key, v)?,
            "sampler.init_k_fista" => s.init_k_fista = parse_num(key, v)?,
            "sampler.norm_refresh_iters" => s.norm_refresh_iters = parse_num(key, v)?,
            "sampler.sparse_image_step" => s.sparse_image_step = parse_bool(key, v)?,
            "sampler.parallel" => s.parallel = parse_bool(key, v)?,
            "sampler.moment_interval" => s.moment_interval = parse_num(key, v)?,
            "sampler.max_lag" => s.max_lag = parse_num(key, v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Checks every block with its module's validator.
    pub fn validate(&self) -> Result<(), CliError> {
        let geom = self.geometry();
        geom.ensure_valid()?;
        self.phantom_spec(geom.image_size).validate()?;
        if self.simulate.supersample == 0 {
            return Err(CliError::Validation("simulate.supersample must be ≥ 1".into()));
        }
        check_range(self.simulate.angular_range)?;
        geom.check_offset(self.simulate.c_true)?;
        self.noise_spec().validate()?;
        geom.check_offset(self.solver.c)?;
        if !(self.solver.alpha.is_finite() && self.solver.alpha >= 0.0) {
            return Err(CliError::Validation("solver.alpha must be ≥ 0".into()));
        }
        if self.solver.k_fista == 0 {
            return Err(CliError::Validation("solver.k_fista must be ≥ 1".into()));
        }
        self.sampler_config().validate(&geom)?;
        if self.sampler.burn_in >= self.sampler.k_gibbs {
            return Err(CliError::Validation(
                "sampler.burn_in must be smaller than sampler.k_gibbs".into(),
            ));
        }
        if self.sampler.tune && self.sampler.tune_pilot == 0 {
            return Err(CliError::Validation("sampler.tune_pilot must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Full-rotation geometry with `geometry.n_angles` equispaced angles.
    pub fn geometry(&self) -> GeometrySpec {
        let g = &self.geometry;
        GeometrySpec::full_rotation(
            g.source_to_center,
            g.center_to_detector,
            g.n_detector,
            g.detector_pixel_size,
            g.n_angles,
            g.image_size,
            g.image_pixel_size,
        )
    }

    pub fn phantom_spec(&self, image_size: usize) -> PhantomSpec {
        match &self.phantom.disks {
            None => PhantomSpec {
                background: self.phantom.background,
                ..PhantomSpec::beads(image_size)
            },
            Some(disks) => PhantomSpec {
                image_size,
                disks: disks.clone(),
                background: self.phantom.background,
            },
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            lambda_true: self.noise.lambda_true,
            seed: self.seed,
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            k_gibbs: s.k_gibbs,
            k_metro: s.k_metro,
            k_fista: s.k_fista,
            step_size: s.step_size,
            nonneg: s.nonneg,
            c0: s.c0,
            x0: None,
            hyperpriors: HyperPriors {
                alpha_lambda: s.alpha_lambda,
                beta_lambda: s.beta_lambda,
                alpha_delta: s.alpha_delta,
                beta_delta: s.beta_delta,
            },
            offset_prior: OffsetPrior {
                mu_c: s.mu_c,
                sigma_c: s.sigma_c,
            },
            seed: self.seed,
            moment_burn_in: s.burn_in,
            init_alpha: s.init_alpha,
            init_k_fista: s.init_k_fista,
            norm_refresh_iters: s.norm_refresh_iters,
            execution: if s.parallel {
                Execution::Parallel
            } else {
                Execution::Serial
            },
            sparse_image_step: s.sparse_image_step,
        }
    }

    /// Every key with its effective value, in a form [`RunConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let g = &self.geometry;
        let s = &self.sampler;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("output.dir", self.output_dir.display().to_string());
        kv("geometry.source_to_center", g.source_to_center.to_string());
        kv("geometry.center_to_detector", g.center_to_detector.to_string());
        kv("geometry.n_detector", g.n_detector.to_string());
        kv("geometry.detector_pixel_size", g.detector_pixel_size.to_string());
        kv("geometry.n_angles", g.n_angles.to_string());
        kv("geometry.image_size", g.image_size.to_string());
        kv("geometry.image_pixel_size", g.image_pixel_size.to_string());
        if let Some(d) = &self.phantom.disks {
            kv("phantom.disks", format!("\"{}\"", format_disks(d)));
        }
        kv("phantom.background", self.phantom.background.to_string());
        kv("simulate.c_true", self.simulate.c_true.to_string());
        kv("simulate.supersample", self.simulate.supersample.to_string());
        kv("simulate.angular_range", self.simulate.angular_range.to_string());
        kv("noise.lambda_true", self.noise.lambda_true.to_string());
        kv("noise.enabled", self.noise.enabled.to_string());
        kv("solver.c", self.solver.c.to_string());
        kv("solver.alpha", self.solver.alpha.to_string());
        kv("solver.k_fista", self.solver.k_fista.to_string());
        kv("solver.nonneg", self.solver.nonneg.to_string());
        kv("sampler.k_gibbs", s.k_gibbs.to_string());
        kv("sampler.k_metro", s.k_metro.to_string());
        kv("sampler.k_fista", s.k_fista.to_string());
        kv("sampler.step_size", s.step_size.to_string());
        kv("sampler.c0", s.c0.to_string());
        kv("sampler.mu_c", s.mu_c.to_string());
        kv("sampler.sigma_c", s.sigma_c.to_string());
        kv("sampler.alpha_lambda", s.alpha_lambda.to_string());
        kv("sampler.beta_lambda", s.beta_lambda.to_string());
        kv("sampler.alpha_delta", s.alpha_delta.to_string());
        kv("sampler.beta_delta", s.beta_delta.to_string());
        kv("sampler.nonneg", s.nonneg.to_string());
        kv("sampler.burn_in", s.burn_in.to_string());
        kv("sampler.tune", s.tune.to_string());
        kv("sampler.tune_warmup", s.tune_warmup.to_string());
        kv("sampler.tune_pilot", s.tune_pilot.to_string());
        kv("sampler.init_alpha", s.init_alpha.to_string());
        kv("sampler.init_k_fista", s.init_k_fista.to_string());
        kv("sampler.norm_refresh_iters", s.norm_refresh_iters.to_string());
        kv("sampler.sparse_image_step", s.sparse_image_step.to_string());
        kv("sampler.parallel", s.parallel.to_string());
        kv("sampler.moment_interval", s.moment_interval.to_string());
        kv("sampler.max_lag", s.max_lag.to_string());
        out
    }
}

pub fn check_range(degrees: f64) -> Result<(), CliError> {
    if degrees.is_finite() && degrees > 0.0 && degrees <= 360.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "angular range must be in (0, 360] degrees, got {degrees}"
        )))
    }
}
