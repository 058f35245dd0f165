//! FISTA for Tikhonov-regularized least squares, optionally constrained to the
//! nonnegative orthant.
//!
//! The smooth part is
//!
//! ```text
//! f(x) = λ/2 ‖A x − b̃‖² + δ/2 ‖x − ξ̃‖²
//! ```
//!
//! and the proximal step is either the identity or the projection onto
//! `x ≥ 0`. The solver keeps `A x` of its iterates up to date by linearity
//! (`A y` for the extrapolated point is a combination of the last two), so
//! each iteration costs exactly one forward and one back projection.

use crate::error::{Error, Result};
use crate::geometry::GeometrySpec;
use crate::image::{dot, squared_distance, Image, Sinogram};
use crate::operator::LinearOperator;
use crate::projector::{power_iteration, random_start, Projector};

/// Multiplier applied to the power-method estimate of `‖A‖²`.
pub const LIPSCHITZ_SAFETY: f64 = 1.01;

/// Power iterations used when the caller does not supply `‖A‖²`.
pub const DEFAULT_POWER_ITERS: usize = 30;

/// Prior precision `Σ_x⁻¹`. Only the identity is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorPrecision {
    #[default]
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    /// Data vector `b̃` (length `m`).
    pub data: Vec<f64>,
    /// Data weight `λ > 0`.
    pub lambda: f64,
    /// Prior weight `δ ≥ 0`.
    pub delta: f64,
    /// Prior shift `ξ̃` (length `n`); `None` means zero.
    pub prior_shift: Option<Vec<f64>>,
    pub precision: PriorPrecision,
    pub nonneg: bool,
}

impl QuadraticObjective {
    pub fn least_squares(data: Vec<f64>, lambda: f64, delta: f64, nonneg: bool) -> Self {
        QuadraticObjective {
            data,
            lambda,
            delta,
            prior_shift: None,
            precision: PriorPrecision::Identity,
            nonneg,
        }
    }

    fn validate<O: LinearOperator>(&self, op: &O) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidArgument("λ must be > 0".into()));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidArgument("δ must be ≥ 0".into()));
        }
        if self.data.len() != op.rows() {
            return Err(Error::ShapeMismatch {
                expected: format!("data of length {}", op.rows()),
                found: format!("length {}", self.data.len()),
            });
        }
        if let Some(s) = &self.prior_shift {
            if s.len() != op.cols() {
                return Err(Error::ShapeMismatch {
                    expected: format!("prior shift of length {}", op.cols()),
                    found: format!("length {}", s.len()),
                });
            }
        }
        Ok(())
    }

    /// `f(x)` given `x` and its projection `A x`.
    pub fn value(&self, x: &[f64], ax: &[f64]) -> f64 {
        let misfit = squared_distance(ax, &self.data);
        let prior = match &self.prior_shift {
            Some(s) => squared_distance(x, s),
            None => dot(x, x),
        };
        0.5 * self.lambda * misfit + 0.5 * self.delta * prior
    }

    /// `∇f(x) = λ Aᵀ(A x − b̃) + δ (x − ξ̃)`, written into `grad`.
    pub fn gradient<O: LinearOperator>(&self, op: &O, x: &[f64], ax: &[f64], grad: &mut [f64]) {
        let residual: Vec<f64> = ax.iter().zip(&self.data).map(|(a, b)| a - b).collect();
        op.apply_adjoint(&residual, grad);
        self.add_prior_gradient(x, grad);
    }

    fn add_prior_gradient(&self, x: &[f64], grad: &mut [f64]) {
        match &self.prior_shift {
            Some(s) => {
                for ((g, xi), si) in grad.iter_mut().zip(x).zip(s) {
                    *g = self.lambda * *g + self.delta * (xi - si);
                }
            }
            None => {
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g = self.lambda * *g + self.delta * xi;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FistaConfig {
    pub iterations: usize,
    /// Upper bound on `‖A‖²` (safety factor already applied). Estimated with
    /// the power method when absent.
    pub lipschitz: Option<f64>,
    pub warm_start: Option<Vec<f64>>,
    /// `A · warm_start`, when the caller already has it.
    pub warm_projection: Option<Vec<f64>>,
}

impl FistaConfig {
    pub fn new(iterations: usize) -> Self {
        FistaConfig {
            iterations,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FistaResult {
    pub x: Vec<f64>,
    /// `A x` for the returned iterate.
    pub ax: Vec<f64>,
    pub step_size: f64,
}

/// Estimate of `‖A‖²` times [`LIPSCHITZ_SAFETY`].
pub fn lipschitz_bound<O: LinearOperator>(op: &O) -> Result<f64> {
    let start = random_start(op.cols(), 0);
    let (est, _) = power_iteration(op, &start, DEFAULT_POWER_ITERS)?;
    Ok(est * LIPSCHITZ_SAFETY)
}

/// Runs exactly `cfg.iterations` FISTA iterations on `obj`.
pub fn fista_solve<O: LinearOperator>(op: &O, obj: &QuadraticObjective, cfg: &FistaConfig) -> Result<FistaResult> {
    obj.validate(op)?;
    if cfg.iterations == 0 {
        return Err(Error::InvalidArgument("k_fista must be ≥ 1".into()));
    }
    let n = op.cols();
    let m = op.rows();
    let lipschitz = match cfg.lipschitz {
        Some(l) => l,
        None => lipschitz_bound(op)?,
    };
    let step = 1.0 / (obj.lambda * lipschitz + obj.delta);
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid FISTA step size {step}")));
    }

    let mut x_prev = match &cfg.warm_start {
        Some(w) if w.len() != n => {
            return Err(Error::ShapeMismatch {
                expected: format!("warm start of length {n}"),
                found: format!("length {}", w.len()),
            })
        }
        Some(w) => w.clone(),
        None => vec![0.0; n],
    };
    let mut ax_prev = match (&cfg.warm_projection, &cfg.warm_start) {
        (Some(p), _) if p.len() == m => p.clone(),
        (Some(p), _) => {
            return Err(Error::ShapeMismatch {
                expected: format!("warm projection of length {m}"),
                found: format!("length {}", p.len()),
            })
        }
        (None, Some(_)) => {
            let mut p = vec![0.0; m];
            op.apply(&x_prev, &mut p);
            p
        }
        (None, None) => vec![0.0; m],
    };

    let mut y = x_prev.clone();
    let mut ay = ax_prev.clone();
    let mut x = vec![0.0; n];
    let mut ax = vec![0.0; m];
    let mut grad = vec![0.0; n];
    let mut residual = vec![0.0; m];
    let mut t = 1.0f64;

    for _ in 0..cfg.iterations {
        for ((r, a), b) in residual.iter_mut().zip(&ay).zip(&obj.data) {
            *r = a - b;
        }
        op.apply_adjoint(&residual, &mut grad);
        obj.add_prior_gradient(&y, &mut grad);
        for ((xi, yi), gi) in x.iter_mut().zip(&y).zip(&grad) {
            *xi = yi - step * gi;
        }
        if obj.nonneg {
            x.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        op.apply(&x, &mut ax);
        if x.iter().chain(ax.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("FISTA iterate (step size too large?)"));
        }

        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        for ((yi, xi), pi) in y.iter_mut().zip(&x).zip(&x_prev) {
            *yi = xi + beta * (xi - pi);
        }
        for ((yi, xi), pi) in ay.iter_mut().zip(&ax).zip(&ax_prev) {
            *yi = xi + beta * (xi - pi);
        }
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut ax_prev, &mut ax);
        t = t_next;
    }

    Ok(FistaResult {
        x: x_prev,
        ax: ax_prev,
        step_size: step,
    })
}

/// Solves `min_{x(≥0)} ‖A_c x − b‖² + α‖x‖²` with `k_fista` iterations from zero.
pub fn map_reconstruct(
    b: &Sinogram,
    geom: &GeometrySpec,
    c: f64,
    alpha: f64,
    nonneg: bool,
    k_fista: usize,
) -> Result<Image> {
    b.check_matches(geom)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidArgument("alpha must be ≥ 0".into()));
    }
    let op = Projector::new(geom, c)?;
    let res = map_reconstruct_with(&op, b.as_slice(), alpha, nonneg, k_fista, None)?;
    Image::from_vec(geom.image_size, res.x)
}

/// [`map_reconstruct`] on an arbitrary operator (λ = 1, δ = α).
pub fn map_reconstruct_with<O: LinearOperator>(
    op: &O,
    b: &[f64],
    alpha: f64,
    nonneg: bool,
    k_fista: usize,
    lipschitz: Option<f64>,
) -> Result<FistaResult> {
    let obj = QuadraticObjective::least_squares(b.to_vec(), 1.0, alpha, nonneg);
    let cfg = FistaConfig {
        iterations: k_fista,
        lipschitz,
        ..Default::default()
    };
    fista_solve(op, &obj, &cfg)
}

/// Largest violation of the first-order optimality conditions, relative to
/// `‖∇f‖∞`. Unconstrained: every gradient entry must vanish. Nonnegative:
/// free entries need a vanishing gradient, entries at zero a nonnegative one.
pub fn kkt_residual<O: LinearOperator>(op: &O, obj: &QuadraticObjective, x: &[f64]) -> f64 {
    let mut ax = vec![0.0; op.rows()];
    op.apply(x, &mut ax);
    let mut grad = vec![0.0; op.cols()];
    obj.gradient(op, x, &ax, &mut grad);
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let worst = x
        .iter()
        .zip(&grad)
        .map(|(xi, gi)| {
            if !obj.nonneg || *xi > 0.0 {
                gi.abs()
            } else {
                (-gi).max(0.0)
            }
        })
        .fold(0.0f64, f64::max);
    worst / scale
}
