//! Hierarchical Metropolis-within-Gibbs sampler for the joint posterior of
//! the image, the offset and the two precision hyperparameters.
//!
//! One Gibbs sweep `k` draws, in this order,
//!
//! 1. `λᵏ ~ Gamma(m/2 + α_λ, ½‖A_{cᵏ⁻¹} xᵏ⁻¹ − b‖² + β_λ)`
//! 2. `δᵏ ~ Gamma(n/2 + α_δ, ½‖xᵏ⁻¹‖² + β_δ)` (with nonnegativity, `n` is
//!    replaced by the number of positive pixels)
//! 3. `cᵏ` by `k_metro` random-walk Metropolis steps on `π(c | xᵏ⁻¹, λᵏ, b)`
//! 4. `xᵏ` by `k_fista` FISTA iterations on the randomized least-squares
//!    problem at `(cᵏ, λᵏ, δᵏ)`, warm-started at `xᵏ⁻¹`.
//!
//! The projection of the current image is carried between steps, so a sweep
//! costs exactly `2·k_fista + k_metro` projections (as long as no proposal
//! falls outside the grid). Lipschitz refreshes and the initial
//! reconstruction are tallied separately as overhead.

pub mod conditionals;
pub mod stats;
pub mod tuning;

pub use conditionals::{
    delta_conditional, lambda_conditional, metropolis_offset, mh_sample_c, offset_log_target, rto_sample_x, rto_solve,
    sample_delta, sample_lambda, GammaParams, MhOutcome, OffsetTarget, ProjectedMisfit,
};
pub use stats::{chain_stats, ChainSummary, ParamSummary};
pub use tuning::{tune_step_size, TuneOutcome};

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::GeometrySpec;
use crate::image::{squared_distance, Image, Sinogram};
use crate::operator::{Counted, LinearOperator, ProjectionCounter};
use crate::projector::{power_iteration, Execution, Projector, SystemMatrix};
use crate::rng::{RngStreams, Stream};
use crate::solver::{fista_solve, FistaConfig, QuadraticObjective, DEFAULT_POWER_ITERS, LIPSCHITZ_SAFETY};

/// Shape (`alpha_*`) and rate (`beta_*`) of the Gamma hyperpriors on λ and δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperPriors {
    pub alpha_lambda: f64,
    pub beta_lambda: f64,
    pub alpha_delta: f64,
    pub beta_delta: f64,
}

impl Default for HyperPriors {
    /// Weakly informative exponential hyperpriors.
    fn default() -> Self {
        HyperPriors {
            alpha_lambda: 1.0,
            beta_lambda: 1e-4,
            alpha_delta: 1.0,
            beta_delta: 1e-4,
        }
    }
}

impl HyperPriors {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha_lambda, self.beta_lambda, self.alpha_delta, self.beta_delta];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "hyperprior shapes and rates must all be > 0".into(),
            ))
        }
    }
}

/// Gaussian prior `c ~ N(mu_c, sigma_c²)`, in object pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetPrior {
    pub mu_c: f64,
    pub sigma_c: f64,
}

impl Default for OffsetPrior {
    fn default() -> Self {
        OffsetPrior {
            mu_c: 0.0,
            sigma_c: 20.0,
        }
    }
}

impl OffsetPrior {
    pub fn validate(&self) -> Result<()> {
        if self.mu_c.is_finite() && self.sigma_c.is_finite() && self.sigma_c > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument("offset prior needs sigma_c > 0".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub k_gibbs: usize,
    pub k_metro: usize,
    pub k_fista: usize,
    /// Standard deviation `s` of the random-walk proposal, in pixels.
    pub step_size: f64,
    pub nonneg: bool,
    pub c0: f64,
    /// Initial image; when absent a regularized reconstruction at `c0` is used.
    pub x0: Option<Image>,
    pub hyperpriors: HyperPriors,
    pub offset_prior: OffsetPrior,
    pub seed: u64,
    /// Sweeps excluded from the running image moments.
    pub moment_burn_in: usize,
    /// Regularization α and iteration count of the initial reconstruction.
    pub init_alpha: f64,
    pub init_k_fista: usize,
    /// Warm-started power iterations re-estimating `‖A_c‖²` after each offset
    /// update; 0 keeps the initial estimate.
    pub norm_refresh_iters: usize,
    pub execution: Execution,
    /// Apply `A_c` through a sparse copy during the image update and the norm
    /// refresh. The copy is rebuilt only when the offset moves; its build is
    /// tallied as overhead. Offset proposals are always projected matrix-free.
    pub sparse_image_step: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            k_gibbs: 1000,
            k_metro: 10,
            k_fista: 20,
            step_size: 0.05,
            nonneg: true,
            c0: 0.0,
            x0: None,
            hyperpriors: HyperPriors::default(),
            offset_prior: OffsetPrior::default(),
            seed: 0,
            moment_burn_in: 0,
            init_alpha: 1.0,
            init_k_fista: 100,
            norm_refresh_iters: 2,
            execution: Execution::Serial,
            sparse_image_step: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, geom: &GeometrySpec) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.k_gibbs == 0 {
            return bad("k_gibbs must be ≥ 1");
        }
        if self.k_metro == 0 {
            return bad("k_metro must be ≥ 1");
        }
        if self.k_fista == 0 || self.init_k_fista == 0 {
            return bad("k_fista must be ≥ 1");
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad("MH step size must be > 0");
        }
        if !(self.init_alpha.is_finite() && self.init_alpha >= 0.0) {
            return bad("init_alpha must be ≥ 0");
        }
        self.hyperpriors.validate()?;
        self.offset_prior.validate()?;
        geom.check_offset(self.c0)?;
        if let Some(x0) = &self.x0 {
            x0.check_matches(geom)?;
        }
        Ok(())
    }

    /// Forward-projection equivalents spent by the Gibbs sweeps.
    pub fn expected_cost(&self) -> u64 {
        (self.k_gibbs * (2 * self.k_fista + self.k_metro)) as u64
    }
}

/// One row of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRecord {
    /// 1-based sweep index.
    pub iter: usize,
    pub lambda: f64,
    pub delta: f64,
    pub c: f64,
    pub mh_accepts: usize,
}

/// Instrumentation event emitted as each conditional draw completes.
/// `image_iter` is the sweep index of the image the draw conditioned on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GibbsStep {
    Lambda {
        iter: usize,
        value: f64,
        c: f64,
        image_iter: usize,
    },
    Delta {
        iter: usize,
        value: f64,
        image_iter: usize,
    },
    Offset {
        iter: usize,
        lambda: f64,
        c_prev: f64,
        c: f64,
        image_iter: usize,
    },
    Image {
        iter: usize,
        lambda: f64,
        delta: f64,
        c: f64,
        warm_start_iter: usize,
    },
}

/// Receives progress from [`run_gibbs_observed`]. An error returned from a
/// hook aborts the run.
pub trait GibbsObserver {
    fn on_step(&mut self, _step: &GibbsStep) {}

    fn on_record(&mut self, _record: &ChainRecord) -> Result<()> {
        Ok(())
    }

    /// Called every [`GibbsObserver::moment_interval`] sweeps and after the last one.
    fn on_moments(&mut self, _moments: &RunningMoments) -> Result<()> {
        Ok(())
    }

    /// 0 disables periodic moment callbacks.
    fn moment_interval(&self) -> usize {
        0
    }
}

impl GibbsObserver for () {}

/// Running mean and running raw second moment of the image samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    size: usize,
    count: usize,
    mean: Vec<f64>,
    second: Vec<f64>,
}

impl RunningMoments {
    pub fn new(size: usize) -> Self {
        RunningMoments {
            size,
            count: 0,
            mean: vec![0.0; size * size],
            second: vec![0.0; size * size],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.second).zip(x) {
            *m += (v - *m) * w;
            *s += (v * v - *s) * w;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Image {
        Image::from_vec(self.size, self.mean.clone()).expect("finite moments")
    }

    pub fn second_moment(&self) -> Image {
        Image::from_vec(self.size, self.second.clone()).expect("finite moments")
    }

    /// Pixelwise `E[x²] − E[x]²`, clamped at zero.
    pub fn variance(&self) -> Image {
        let v = self
            .mean
            .iter()
            .zip(&self.second)
            .map(|(m, s)| (s - m * m).max(0.0))
            .collect();
        Image::from_vec(self.size, v).expect("finite moments")
    }
}

/// Projection counts of a run, in forward-projection equivalents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProjectionCost {
    /// Spent inside the Gibbs sweeps (offset and image draws).
    pub conditional: u64,
    /// Initial reconstruction and operator-norm estimation.
    pub overhead: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsChain {
    pub records: Vec<ChainRecord>,
    pub k_metro: usize,
    pub moments: RunningMoments,
    pub last_image: Image,
    pub cost: ProjectionCost,
}

impl GibbsChain {
    pub fn last_offset(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.c)
    }

    pub fn summary(&self, burn_in: usize, max_lag: usize) -> Result<ChainSummary> {
        chain_stats(&self.records, self.k_metro, burn_in, max_lag)
    }
}

/// Runs the sampler and returns the whole chain.
pub fn run_gibbs(b: &Sinogram, geom: &GeometrySpec, cfg: &SamplerConfig) -> Result<GibbsChain> {
    run_gibbs_observed(b, geom, cfg, &mut ())
}

/// [`run_gibbs`] with progress hooks.
pub fn run_gibbs_observed<O: GibbsObserver + ?Sized>(
    b: &Sinogram,
    geom: &GeometrySpec,
    cfg: &SamplerConfig,
    observer: &mut O,
) -> Result<GibbsChain> {
    geom.ensure_valid()?;
    b.check_matches(geom)?;
    cfg.validate(geom)?;

    let streams = RngStreams::new(cfg.seed);
    let conditional = ProjectionCounter::new();
    let overhead = ProjectionCounter::new();
    let m = geom.n_measurements();
    let n = geom.n_pixels();
    let hp = &cfg.hyperpriors;
    let data = b.as_slice();
    let projector =
        |c: f64| -> Result<Projector<'_>> { Ok(Projector::new_prevalidated(geom, c)?.with_execution(cfg.execution)) };

    let mut c = cfg.c0;
    let mut power_vec: Vec<f64> = {
        let mut rng = streams.stream(Stream::PowerStart);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    };
    let mut sparse: Option<(f64, SystemMatrix)> = None;
    if cfg.sparse_image_step {
        sparse = Some((c, projector(c)?.system_matrix()));
        overhead.add_forward();
    }
    let init_free;
    let init_inner: &dyn LinearOperator = match &sparse {
        Some((_, matrix)) => matrix,
        None => {
            init_free = projector(c)?;
            &init_free
        }
    };
    let init_op = Counted::new(init_inner, &overhead);
    let (est, v) = power_iteration(&init_op, &power_vec, DEFAULT_POWER_ITERS)?;
    power_vec = v;
    let mut lipschitz = est * LIPSCHITZ_SAFETY;

    let (mut x, mut ax) = match &cfg.x0 {
        Some(x0) => {
            let mut ax = vec![0.0; m];
            init_op.apply(x0.as_slice(), &mut ax);
            (x0.as_slice().to_vec(), ax)
        }
        None => {
            let obj = QuadraticObjective::least_squares(data.to_vec(), 1.0, cfg.init_alpha, cfg.nonneg);
            let fcfg = FistaConfig {
                iterations: cfg.init_k_fista,
                lipschitz: Some(lipschitz),
                ..Default::default()
            };
            let r = fista_solve(&init_op, &obj, &fcfg)?;
            (r.x, r.ax)
        }
    };

    let mut records = Vec::with_capacity(cfg.k_gibbs);
    let mut moments = RunningMoments::new(geom.image_size);
    let interval = observer.moment_interval();

    for k in 1..=cfg.k_gibbs {
        let kk = k as u64;
        let misfit = squared_distance(&ax, data);
        let lambda = lambda_conditional(misfit, m, hp).sample(&mut streams.keyed(Stream::GammaLambda, kk));
        observer.on_step(&GibbsStep::Lambda {
            iter: k,
            value: lambda,
            c,
            image_iter: k - 1,
        });

        let delta = delta_conditional(&x, hp, cfg.nonneg).sample(&mut streams.keyed(Stream::GammaDelta, kk));
        observer.on_step(&GibbsStep::Delta {
            iter: k,
            value: delta,
            image_iter: k - 1,
        });

        let c_prev = c;
        let mut target = ProjectedMisfit::new(geom, &x, data, ax)
            .with_execution(cfg.execution)
            .with_counter(&conditional);
        let mh = metropolis_offset(
            &mut target,
            c,
            misfit,
            lambda,
            &cfg.offset_prior,
            cfg.step_size,
            cfg.k_metro,
            &mut streams.keyed(Stream::MhProposal, kk),
            &mut streams.keyed(Stream::MhUniform, kk),
        );
        ax = target.into_current_projection();
        c = mh.c;
        observer.on_step(&GibbsStep::Offset {
            iter: k,
            lambda,
            c_prev,
            c,
            image_iter: k - 1,
        });

        if cfg.sparse_image_step && sparse.as_ref().is_none_or(|(sc, _)| *sc != c) {
            let built = projector(c)?.system_matrix();
            // one traversal of every ray, like a forward projection
            overhead.add_forward();
            sparse = Some((c, built));
        }
        let free;
        let step_op: &dyn LinearOperator = match &sparse {
            Some((_, matrix)) => matrix,
            None => {
                free = projector(c)?;
                &free
            }
        };

        if cfg.norm_refresh_iters > 0 && c != c_prev {
            let op = Counted::new(step_op, &overhead);
            let (est, v) = power_iteration(&op, &power_vec, cfg.norm_refresh_iters)?;
            power_vec = v;
            lipschitz = est * LIPSCHITZ_SAFETY;
        }

        let op = Counted::new(step_op, &conditional);
        let fcfg = FistaConfig {
            iterations: cfg.k_fista,
            lipschitz: Some(lipschitz),
            warm_start: Some(std::mem::take(&mut x)),
            warm_projection: Some(std::mem::take(&mut ax)),
        };
        let sample = rto_sample_x(
            &op,
            data,
            lambda,
            delta,
            cfg.nonneg,
            &fcfg,
            &mut streams.keyed(Stream::DataPerturbation, kk),
            &mut streams.keyed(Stream::PriorPerturbation, kk),
        )?;
        x = sample.x;
        ax = sample.ax;
        observer.on_step(&GibbsStep::Image {
            iter: k,
            lambda,
            delta,
            c,
            warm_start_iter: k - 1,
        });

        let record = ChainRecord {
            iter: k,
            lambda,
            delta,
            c,
            mh_accepts: mh.accepts,
        };
        records.push(record);
        if k > cfg.moment_burn_in {
            moments.push(&x);
        }
        observer.on_record(&record)?;
        if interval > 0 && k % interval == 0 && k != cfg.k_gibbs {
            observer.on_moments(&moments)?;
        }
    }
    observer.on_moments(&moments)?;

    Ok(GibbsChain {
        records,
        k_metro: cfg.k_metro,
        moments,
        last_image: Image::from_vec(geom.image_size, x)?,
        cost: ProjectionCost {
            conditional: conditional.total(),
            overhead: overhead.total(),
        },
    })
}
