//! The three conditional samplers of the Gibbs scheme.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::GeometrySpec;
use crate::image::{squared_distance, Image, Sinogram};
use crate::operator::{LinearOperator, ProjectionCounter};
use crate::projector::{Execution, Projector};
use crate::solver::{fista_solve, FistaConfig, FistaResult, PriorPrecision, QuadraticObjective};

use super::{HyperPriors, OffsetPrior};

/// Gamma distribution in shape/rate form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape, 1.0 / self.rate)
            .expect("shape and rate are positive")
            .sample(rng)
    }
}

/// Conditional of the noise precision: `Gamma(m/2 + α_λ, ½‖A_c x − b‖² + β_λ)`.
pub fn lambda_conditional(misfit: f64, m: usize, hp: &HyperPriors) -> GammaParams {
    GammaParams {
        shape: m as f64 / 2.0 + hp.alpha_lambda,
        rate: 0.5 * misfit + hp.beta_lambda,
    }
}

/// Conditional of the prior precision: `Gamma(k/2 + α_δ, ½‖x‖² + β_δ)` where
/// `k = n`, or with `nonneg` the number of strictly positive entries of `x`.
pub fn delta_conditional(x: &[f64], hp: &HyperPriors, nonneg: bool) -> GammaParams {
    let count = if nonneg {
        x.iter().filter(|v| **v > 0.0).count()
    } else {
        x.len()
    };
    GammaParams {
        shape: count as f64 / 2.0 + hp.alpha_delta,
        rate: 0.5 * x.iter().map(|v| v * v).sum::<f64>() + hp.beta_delta,
    }
}

/// One draw of `λ | x, b, c`. Costs one forward projection.
pub fn sample_lambda<R: Rng + ?Sized>(
    x: &Image,
    b: &Sinogram,
    geom: &GeometrySpec,
    c: f64,
    hp: &HyperPriors,
    rng: &mut R,
) -> Result<f64> {
    hp.validate()?;
    b.check_matches(geom)?;
    let ax = crate::projector::forward_project(x, geom, c)?;
    let misfit = squared_distance(ax.as_slice(), b.as_slice());
    Ok(lambda_conditional(misfit, b.len(), hp).sample(rng))
}

/// One draw of `δ | x`.
pub fn sample_delta<R: Rng + ?Sized>(x: &Image, hp: &HyperPriors, nonneg: bool, rng: &mut R) -> Result<f64> {
    hp.validate()?;
    Ok(delta_conditional(x.as_slice(), hp, nonneg).sample(rng))
}

/// Squared data misfit `‖A_c x − b‖²` as a function of the offset, for fixed
/// `x` and `b`. Implementations may cache work for the state that gets
/// accepted.
pub trait OffsetTarget {
    fn misfit(&mut self, c: f64) -> f64;

    /// The most recent `misfit` argument became the chain's current state.
    fn accept(&mut self) {}

    /// Offsets outside the model's domain are rejected without evaluation.
    fn admissible(&self, _c: f64) -> bool {
        true
    }
}

/// Misfit through the projector. Keeps `A_c x` of the current state so the
/// caller can reuse it once the walk finishes.
pub struct ProjectedMisfit<'a> {
    geom: &'a GeometrySpec,
    x: &'a [f64],
    b: &'a [f64],
    current: Vec<f64>,
    proposal: Vec<f64>,
    execution: Execution,
    counter: Option<&'a ProjectionCounter>,
}

impl<'a> ProjectedMisfit<'a> {
    /// `current_projection` must equal `A_{c_current} x`.
    pub fn new(geom: &'a GeometrySpec, x: &'a [f64], b: &'a [f64], current_projection: Vec<f64>) -> Self {
        let m = current_projection.len();
        ProjectedMisfit {
            geom,
            x,
            b,
            current: current_projection,
            proposal: vec![0.0; m],
            execution: Execution::Serial,
            counter: None,
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_counter(mut self, counter: &'a ProjectionCounter) -> Self {
        self.counter = Some(counter);
        self
    }

    pub fn current_projection(&self) -> &[f64] {
        &self.current
    }

    pub fn into_current_projection(self) -> Vec<f64> {
        self.current
    }
}

impl OffsetTarget for ProjectedMisfit<'_> {
    fn misfit(&mut self, c: f64) -> f64 {
        let op = Projector::new_prevalidated(self.geom, c)
            .expect("admissible offsets only")
            .with_execution(self.execution);
        op.apply(self.x, &mut self.proposal);
        if let Some(counter) = self.counter {
            counter.add_forward();
        }
        squared_distance(&self.proposal, self.b)
    }

    fn accept(&mut self) {
        std::mem::swap(&mut self.current, &mut self.proposal);
    }

    fn admissible(&self, c: f64) -> bool {
        self.geom.check_offset(c).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhOutcome {
    pub c: f64,
    /// Misfit at the returned offset.
    pub misfit: f64,
    pub accepts: usize,
}

/// Log of the unnormalized conditional density of `c`.
pub fn offset_log_target(misfit: f64, c: f64, lambda: f64, prior: &OffsetPrior) -> f64 {
    let z = c - prior.mu_c;
    -0.5 * lambda * misfit - z * z / (2.0 * prior.sigma_c * prior.sigma_c)
}

/// `k_metro` random-walk Metropolis steps on the offset conditional, starting
/// from `c_prev` whose misfit is already known. Proposals come from
/// `proposals`, acceptance uniforms from `uniforms`.
#[allow(clippy::too_many_arguments)]
pub fn metropolis_offset<T, P, U>(
    target: &mut T,
    c_prev: f64,
    misfit_prev: f64,
    lambda: f64,
    prior: &OffsetPrior,
    step_size: f64,
    k_metro: usize,
    proposals: &mut P,
    uniforms: &mut U,
) -> MhOutcome
where
    T: OffsetTarget + ?Sized,
    P: Rng + ?Sized,
    U: Rng + ?Sized,
{
    let mut c = c_prev;
    let mut misfit = misfit_prev;
    let mut log_p = offset_log_target(misfit, c, lambda, prior);
    let mut accepts = 0;
    for _ in 0..k_metro {
        let z: f64 = StandardNormal.sample(proposals);
        let u: f64 = uniforms.random();
        let c_prop = c + step_size * z;
        if !target.admissible(c_prop) {
            continue;
        }
        let misfit_prop = target.misfit(c_prop);
        let log_p_prop = offset_log_target(misfit_prop, c_prop, lambda, prior);
        let log_ratio = log_p_prop - log_p;
        if log_ratio >= 0.0 || u.ln() < log_ratio {
            target.accept();
            c = c_prop;
            misfit = misfit_prop;
            log_p = log_p_prop;
            accepts += 1;
        }
    }
    MhOutcome { c, misfit, accepts }
}

/// Draws `c | x, λ, b` with `k_metro` Metropolis steps from `c_prev`. Costs
/// one forward projection for the starting state plus one per admissible
/// proposal.
#[allow(clippy::too_many_arguments)]
pub fn mh_sample_c<R: Rng + ?Sized>(
    x: &Image,
    c_prev: f64,
    lambda: f64,
    b: &Sinogram,
    geom: &GeometrySpec,
    prior: &OffsetPrior,
    step_size: f64,
    k_metro: usize,
    rng: &mut R,
) -> Result<(f64, usize)> {
    prior.validate()?;
    if step_size.is_nan() || step_size <= 0.0 {
        return Err(Error::InvalidArgument("MH step size must be > 0".into()));
    }
    if k_metro == 0 {
        return Err(Error::InvalidArgument("k_metro must be ≥ 1".into()));
    }
    x.check_matches(geom)?;
    b.check_matches(geom)?;
    let start = crate::projector::forward_project(x, geom, c_prev)?;
    let misfit = squared_distance(start.as_slice(), b.as_slice());
    let mut target = ProjectedMisfit::new(geom, x.as_slice(), b.as_slice(), start.into_vec());
    // both generators are derived from the caller's rng
    let mut proposals = rand_chacha::ChaCha8Rng::from_rng(&mut &mut *rng);
    let mut uniforms = rand_chacha::ChaCha8Rng::from_rng(&mut proposals);
    let out = metropolis_offset(
        &mut target,
        c_prev,
        misfit,
        lambda,
        prior,
        step_size,
        k_metro,
        &mut proposals,
        &mut uniforms,
    );
    Ok((out.c, out.accepts))
}

/// Randomize-then-optimize: solves the perturbed problem
///
/// ```text
/// min  λ/2 ‖A x − b − λ^{-1/2} ξ_m‖² + δ/2 ‖x − δ^{-1/2} ξ_n‖²
/// ```
///
/// with the supplied standard-normal vectors, truncated at `cfg.iterations`.
#[allow(clippy::too_many_arguments)]
pub fn rto_solve<O: LinearOperator>(
    op: &O,
    b: &[f64],
    lambda: f64,
    delta: f64,
    nonneg: bool,
    xi_data: &[f64],
    xi_prior: &[f64],
    cfg: &FistaConfig,
) -> Result<FistaResult> {
    if !(lambda > 0.0 && delta > 0.0) {
        return Err(Error::InvalidArgument("λ and δ must be > 0".into()));
    }
    let sd_data = lambda.powf(-0.5);
    let sd_prior = delta.powf(-0.5);
    let data = b.iter().zip(xi_data).map(|(b, z)| b + sd_data * z).collect();
    let shift = xi_prior.iter().map(|z| sd_prior * z).collect();
    let obj = QuadraticObjective {
        data,
        lambda,
        delta,
        prior_shift: Some(shift),
        precision: PriorPrecision::Identity,
        nonneg,
    };
    fista_solve(op, &obj, cfg)
}

/// One approximate draw of `x | λ, δ, c, b`: ξ_m is drawn from `data_rng`,
/// ξ_n from `prior_rng`, then [`rto_solve`] runs.
#[allow(clippy::too_many_arguments)]
pub fn rto_sample_x<O, R1, R2>(
    op: &O,
    b: &[f64],
    lambda: f64,
    delta: f64,
    nonneg: bool,
    cfg: &FistaConfig,
    data_rng: &mut R1,
    prior_rng: &mut R2,
) -> Result<FistaResult>
where
    O: LinearOperator,
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    let xi_data: Vec<f64> = (0..op.rows()).map(|_| StandardNormal.sample(data_rng)).collect();
    let xi_prior: Vec<f64> = (0..op.cols()).map(|_| StandardNormal.sample(prior_rng)).collect();
    rto_solve(op, b, lambda, delta, nonneg, &xi_data, &xi_prior, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::uniform_angles;
    use crate::rng::{RngStreams, Stream};

    fn hp() -> HyperPriors {
        HyperPriors::default()
    }

    #[test]
    fn lambda_shape_and_rate() {
        let p = lambda_conditional(0.0, 8, &hp());
        assert_eq!(p.shape, 5.0);
        assert_eq!(p.rate, 1e-4);
        let q = lambda_conditional(3.0, 8, &hp());
        let r = lambda_conditional(12.0, 8, &hp());
        // doubling the residual quadruples the misfit: rate grows by half the difference
        assert_eq!(r.rate - q.rate, 0.5 * (12.0 - 3.0));
    }

    #[test]
    fn delta_shape_counts_positive_entries() {
        let x = [0.0, 1.0, -2.0, 3.0, 0.0, 0.5];
        let nn = delta_conditional(&x, &hp(), true);
        assert_eq!(nn.shape, 3.0 / 2.0 + 1.0);
        let full = delta_conditional(&x, &hp(), false);
        assert_eq!(full.shape, 6.0 / 2.0 + 1.0);
        assert_eq!(full.rate, 0.5 * (1.0 + 4.0 + 9.0 + 0.25) + 1e-4);

        let zero = [0.0; 16];
        let z = delta_conditional(&zero, &hp(), true);
        assert_eq!((z.shape, z.rate), (1.0, 1e-4));
        let z = delta_conditional(&zero, &hp(), false);
        assert_eq!((z.shape, z.rate), (9.0, 1e-4));
    }

    #[test]
    fn tiny_step_keeps_state_and_accepts() {
        struct Flat;
        impl OffsetTarget for Flat {
            fn misfit(&mut self, _c: f64) -> f64 {
                1.0
            }
        }
        let s = RngStreams::new(3);
        let prior = OffsetPrior {
            mu_c: 0.0,
            sigma_c: 2.0,
        };
        let out = metropolis_offset(
            &mut Flat,
            1.25,
            1.0,
            10.0,
            &prior,
            1e-300,
            50,
            &mut s.stream(Stream::MhProposal),
            &mut s.stream(Stream::MhUniform),
        );
        assert_eq!(out.c, 1.25);
        assert_eq!(out.accepts, 50);
    }

    #[test]
    fn inadmissible_proposals_are_rejected_unevaluated() {
        struct Bounded(usize);
        impl OffsetTarget for Bounded {
            fn misfit(&mut self, _c: f64) -> f64 {
                self.0 += 1;
                0.0
            }
            fn admissible(&self, c: f64) -> bool {
                c.abs() < 1.0
            }
        }
        let s = RngStreams::new(4);
        let prior = OffsetPrior {
            mu_c: 0.0,
            sigma_c: 100.0,
        };
        let mut t = Bounded(0);
        let out = metropolis_offset(
            &mut t,
            0.0,
            0.0,
            1.0,
            &prior,
            50.0,
            100,
            &mut s.stream(Stream::MhProposal),
            &mut s.stream(Stream::MhUniform),
        );
        assert!(out.c.abs() < 1.0);
        assert_eq!(t.0, out.accepts);
        assert!(t.0 < 20);
    }

    #[test]
    fn projected_misfit_tracks_accepted_projection() {
        let g = GeometrySpec {
            source_to_center: 50.0,
            center_to_detector: 50.0,
            n_detector: 21,
            detector_pixel_size: 1.0,
            angles: uniform_angles(10),
            image_size: 8,
            image_pixel_size: 1.0,
        };
        let x = crate::simulate::make_phantom(&crate::simulate::PhantomSpec::beads(8)).unwrap();
        let b = crate::projector::forward_project(&x, &g, 1.0).unwrap();
        let start = crate::projector::forward_project(&x, &g, 0.0).unwrap();
        let counter = ProjectionCounter::new();
        let mut t = ProjectedMisfit::new(&g, x.as_slice(), b.as_slice(), start.into_vec()).with_counter(&counter);
        let m0 = squared_distance(t.current_projection(), b.as_slice());
        let s = RngStreams::new(5);
        let out = metropolis_offset(
            &mut t,
            0.0,
            m0,
            1e4,
            &OffsetPrior::default(),
            0.3,
            10,
            &mut s.stream(Stream::MhProposal),
            &mut s.stream(Stream::MhUniform),
        );
        assert_eq!(counter.forward(), 10);
        let direct = crate::projector::forward_project(&x, &g, out.c).unwrap();
        assert_eq!(t.current_projection(), direct.as_slice());
        assert_eq!(out.misfit, squared_distance(direct.as_slice(), b.as_slice()));
    }

    #[test]
    fn mh_wrapper_validates() {
        let g = GeometrySpec::full_rotation(50.0, 50.0, 9, 1.0, 4, 4, 1.0);
        let x = Image::zeros(4);
        let b = Sinogram::for_geometry(&g);
        let mut rng = RngStreams::new(0).stream(Stream::MhProposal);
        let prior = OffsetPrior::default();
        assert!(mh_sample_c(&x, 0.0, 1.0, &b, &g, &prior, 0.0, 3, &mut rng).is_err());
        assert!(mh_sample_c(&x, 0.0, 1.0, &b, &g, &prior, 0.1, 0, &mut rng).is_err());
        let (c, acc) = mh_sample_c(&x, 0.0, 1.0, &b, &g, &prior, 0.1, 3, &mut rng).unwrap();
        assert!(c.is_finite() && acc <= 3);
    }

    #[test]
    fn zero_perturbation_reduces_to_map() {
        let g = GeometrySpec {
            source_to_center: 50.0,
            center_to_detector: 30.0,
            n_detector: 15,
            detector_pixel_size: 1.0,
            angles: uniform_angles(9),
            image_size: 6,
            image_pixel_size: 1.0,
        };
        let op = Projector::new(&g, 0.5).unwrap();
        let b = crate::projector::random_start(op.rows(), 12);
        let (lambda, delta) = (40.0, 3.0);
        let cfg = FistaConfig {
            iterations: 80,
            lipschitz: Some(crate::solver::lipschitz_bound(&op).unwrap()),
            ..Default::default()
        };
        let zm = vec![0.0; op.rows()];
        let zn = vec![0.0; op.cols()];
        let rto = rto_solve(&op, &b, lambda, delta, true, &zm, &zn, &cfg).unwrap();
        let map = crate::solver::map_reconstruct_with(&op, &b, delta / lambda, true, 80, cfg.lipschitz).unwrap();
        for (u, v) in rto.x.iter().zip(&map.x) {
            assert!((u - v).abs() <= 1e-10 * (1.0 + v.abs()), "{u} vs {v}");
        }
    }

    #[test]
    fn nonneg_rto_output_is_nonnegative() {
        let g = GeometrySpec::full_rotation(50.0, 30.0, 15, 1.0, 9, 6, 1.0);
        let op = Projector::new(&g, 0.0).unwrap();
        let b = crate::projector::random_start(op.rows(), 1);
        let s = RngStreams::new(8);
        let r = rto_sample_x(
            &op,
            &b,
            1.0,
            1.0,
            true,
            &FistaConfig::new(20),
            &mut s.stream(Stream::DataPerturbation),
            &mut s.stream(Stream::PriorPerturbation),
        )
        .unwrap();
        assert!(r.x.iter().all(|v| *v >= 0.0));
    }
}
