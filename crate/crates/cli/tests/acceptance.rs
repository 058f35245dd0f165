//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fail. Pass criterion numbers as arguments to run a subset:
//! `cargo test --release -p ctcor-cli --test acceptance -- 3 9`.

use std::time::{Duration, Instant};

use ctcor::io::read_chain;
use ctcor::rng::{RngStreams, Stream};
use ctcor::sampler::stats::effective_sample_size;
use ctcor::sampler::{
    delta_conditional, lambda_conditional, metropolis_offset, rto_sample_x, tune_step_size, HyperPriors, OffsetPrior,
    OffsetTarget,
};
use ctcor::solver::{kkt_residual, FistaConfig};
use ctcor::{
    back_project, com_offset, fista_solve, forward_project, make_phantom, run_gibbs, simulate_phantom_sinogram,
    xcorr_offset, GeometrySpec, GibbsChain, Image, LinearOperator, Projector, QuadraticObjective, SamplerConfig,
    Sinogram,
};
use ctcor_cli::commands::{cmd_sample, SampleOptions};
use ctcor_cli::config::RunConfig;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

const ADJOINT_TOL: f64 = 1e-10;
const GAMMA_MOMENT_TOL: f64 = 0.01;
const RTO_SAMPLES: usize = 20_000;
const RTO_K_FISTA: usize = 5000;
const RTO_COV_TOL: f64 = 0.05;
const FISTA_TOL: f64 = 1e-6;
const KKT_TOL: f64 = 1e-6;
/// Two-sided KS critical value at the 1% level, large-sample form.
const KS_COEFF_1PCT: f64 = 1.628;
const C_TRUE: f64 = 3.0;
const RECOVERY_TOL: f64 = 0.5;
const GRID_SCAN_TOL: f64 = 0.25;
const LOW_DOSE_FACTOR: f64 = 50.0;
const LAMBDA_RATIO: (f64, f64) = (25.0, 100.0);
const DEGRADED_TOL: f64 = 1.0;
const FAST_SCAN_DEGREES: f64 = 210.0;
const BASELINE_TOL: f64 = 0.5;
const K_GIBBS: usize = 800;
const BURN_IN: usize = 400;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn gaussian(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dense(op: &impl LinearOperator) -> DMatrix<f64> {
    let (m, n) = (op.rows(), op.cols());
    let mut a = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..m {
            a[(i, j)] = col[i];
        }
    }
    a
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Desk scenario shared by criteria 6-8 and 10.
struct Scenario {
    cfg: RunConfig,
    geom: GeometrySpec,
}

impl Scenario {
    fn new() -> Self {
        let cfg = RunConfig::default();
        assert_eq!(cfg.geometry.image_size, 64);
        assert_eq!(cfg.geometry.n_angles, 180);
        assert_eq!(cfg.simulate.supersample, 2);
        assert_eq!(cfg.simulate.c_true, C_TRUE);
        let geom = cfg.geometry();
        Scenario { cfg, geom }
    }

    fn sinogram(&self, lambda_true: Option<f64>) -> Sinogram {
        let noise = lambda_true.map(|l| ctcor::NoiseSpec {
            lambda_true: l,
            seed: self.cfg.seed,
        });
        let spec = self.cfg.phantom_spec(self.geom.image_size);
        simulate_phantom_sinogram(&spec, &self.geom, C_TRUE, noise.as_ref(), self.cfg.simulate.supersample).unwrap()
    }

    /// Tuned run with the configured sampler settings, nonnegativity on.
    fn sample(&self, b: &Sinogram, geom: &GeometrySpec) -> (GibbsChain, f64) {
        let mut scfg: SamplerConfig = self.cfg.sampler_config();
        scfg.k_gibbs = K_GIBBS;
        scfg.moment_burn_in = BURN_IN;
        assert!(scfg.nonneg);
        let t = tune_step_size(
            b,
            geom,
            &scfg,
            self.cfg.sampler.tune_warmup,
            self.cfg.sampler.tune_pilot,
        )
        .unwrap();
        scfg.step_size = t.step_size;
        scfg.x0 = Some(t.x);
        scfg.c0 = t.c;
        (run_gibbs(b, geom, &scfg).unwrap(), t.step_size)
    }
}

fn c1_adjoint() -> Outcome {
    let g = GeometrySpec::full_rotation(250.0, 250.0, 100, 1.6, 180, 64, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let c = rng.random_range(-20.0..=20.0);
        let x = Image::from_vec(64, gaussian(g.n_pixels(), &mut rng)).unwrap();
        let y = Sinogram::from_vec(g.n_angles(), g.n_detector, gaussian(g.n_measurements(), &mut rng)).unwrap();
        let lhs = dot(forward_project(&x, &g, c).unwrap().as_slice(), y.as_slice());
        let rhs = dot(x.as_slice(), back_project(&y, &g, c).unwrap().as_slice());
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    ensure(
        worst <= ADJOINT_TOL,
        format!("max relative defect {worst:.2e} over 20 triples"),
    )
}

fn c2_gamma() -> Outcome {
    let hp = HyperPriors {
        alpha_lambda: 1.3,
        beta_lambda: 2e-3,
        alpha_delta: 0.7,
        beta_delta: 5e-4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let x: Vec<f64> = gaussian(500, &mut rng).into_iter().map(|v| 0.1 * v).collect();
    let positive = x.iter().filter(|v| **v > 0.0).count();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    let (misfit, m) = (3.7, 1800);
    let cases = [
        (
            "lambda",
            lambda_conditional(misfit, m, &hp),
            (hp.alpha_lambda + m as f64 / 2.0, hp.beta_lambda + misfit / 2.0),
        ),
        (
            "delta",
            delta_conditional(&x, &hp, false),
            (hp.alpha_delta + 250.0, hp.beta_delta + sq / 2.0),
        ),
        (
            "delta+",
            delta_conditional(&x, &hp, true),
            (hp.alpha_delta + positive as f64 / 2.0, hp.beta_delta + sq / 2.0),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (name, g, (shape, rate)) in cases {
        if g.shape != shape || g.rate != rate {
            return Err(format!(
                "{name}: Gamma({}, {}) vs closed form Gamma({shape}, {rate})",
                g.shape, g.rate
            ));
        }
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
        let mean = mean_of(&draws);
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        worst = worst
            .max((mean / (shape / rate) - 1.0).abs())
            .max((var / (shape / rate / rate) - 1.0).abs());
    }
    ensure(
        worst <= GAMMA_MOMENT_TOL,
        format!("exact shape/rate; worst moment error {:.3}%", 100.0 * worst),
    )
}

fn c3_rto() -> Outcome {
    // 4×4 image, 4 angles × 5 detectors
    let g = GeometrySpec::full_rotation(40.0, 40.0, 5, 2.0, 4, 4, 1.0);
    let op = Projector::new(&g, 0.3).unwrap().to_dense().unwrap();
    let a = dense(&op);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let b = gaussian(g.n_measurements(), &mut rng);
    let (lambda, delta) = (3.0, 0.5);
    let n = g.n_pixels();
    let h = a.transpose() * &a * lambda + DMatrix::identity(n, n) * delta;
    let chol = h.cholesky().ok_or("precision matrix not positive definite")?;
    let mean = chol.solve(&(a.transpose() * DVector::from_column_slice(&b) * lambda));
    let cov = chol.inverse();

    let cfg = FistaConfig::new(RTO_K_FISTA);
    let streams = RngStreams::new(31);
    let mut data_rng = streams.stream(Stream::DataPerturbation);
    let mut prior_rng = streams.stream(Stream::PriorPerturbation);
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for _ in 0..RTO_SAMPLES {
        let x = rto_sample_x(&op, &b, lambda, delta, false, &cfg, &mut data_rng, &mut prior_rng)
            .map_err(|e| e.to_string())?
            .x;
        for i in 0..n {
            sum[i] += x[i];
            sq[i] += x[i] * x[i];
        }
    }
    let ns = RTO_SAMPLES as f64;
    let (mut worst_z, mut worst_var): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        let m = sum[i] / ns;
        let v = (sq[i] - ns * m * m) / (ns - 1.0);
        worst_z = worst_z.max((m - mean[i]).abs() / (cov[(i, i)] / ns).sqrt());
        worst_var = worst_var.max((v / cov[(i, i)] - 1.0).abs());
    }
    ensure(
        worst_z < 3.0 && worst_var <= RTO_COV_TOL,
        format!(
            "worst mean error {worst_z:.2} SE, worst variance error {:.2}%",
            100.0 * worst_var
        ),
    )
}

fn c4_fista() -> Outcome {
    let g = GeometrySpec::full_rotation(40.0, 40.0, 51, 1.0, 12, 16, 1.0);
    let op = Projector::new(&g, 1.2).unwrap();
    let a = dense(&op);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let b = gaussian(g.n_measurements(), &mut rng);
    let (lambda, delta) = (1.0, 0.5);

    let obj = QuadraticObjective::least_squares(b.clone(), lambda, delta, false);
    let x = fista_solve(&op, &obj, &FistaConfig::new(12_000))
        .map_err(|e| e.to_string())?
        .x;
    let n = g.n_pixels();
    let h = a.transpose() * &a * lambda + DMatrix::identity(n, n) * delta;
    let oracle = h
        .cholesky()
        .ok_or("normal matrix not positive definite")?
        .solve(&(a.transpose() * DVector::from_column_slice(&b) * lambda));
    let rel = (DVector::from_column_slice(&x) - &oracle).norm() / oracle.norm();

    let obj = QuadraticObjective::least_squares(b, lambda, delta, true);
    let x = fista_solve(&op, &obj, &FistaConfig::new(5000))
        .map_err(|e| e.to_string())?
        .x;
    let kkt = kkt_residual(&op, &obj, &x);
    let active = x.iter().filter(|v| **v == 0.0).count();
    ensure(
        rel <= FISTA_TOL && kkt <= KKT_TOL,
        format!("unconstrained relative error {rel:.2e}; nonneg KKT residual {kkt:.2e} ({active} active)"),
    )
}

struct Flat;

impl OffsetTarget for Flat {
    fn misfit(&mut self, _c: f64) -> f64 {
        0.0
    }
}

struct Quadratic {
    k: f64,
    center: f64,
}

impl OffsetTarget for Quadratic {
    fn misfit(&mut self, c: f64) -> f64 {
        self.k * (c - self.center).powi(2)
    }
}

#[allow(clippy::too_many_arguments)]
fn offset_chain<T: OffsetTarget>(
    target: &mut T,
    lambda: f64,
    prior: &OffsetPrior,
    step: f64,
    k_metro: usize,
    draws: usize,
    seed: u64,
) -> Vec<f64> {
    let streams = RngStreams::new(seed);
    let mut proposals = streams.stream(Stream::MhProposal);
    let mut uniforms = streams.stream(Stream::MhUniform);
    let mut c = prior.mu_c;
    let mut misfit = target.misfit(c);
    (0..draws)
        .map(|_| {
            let o = metropolis_offset(
                target,
                c,
                misfit,
                lambda,
                prior,
                step,
                k_metro,
                &mut proposals,
                &mut uniforms,
            );
            c = o.c;
            misfit = o.misfit;
            c
        })
        .collect()
}

fn c5_mh() -> Outcome {
    // flat likelihood: the chain must reproduce the N(μ_c, σ_c²) prior
    let prior = OffsetPrior {
        mu_c: 1.5,
        sigma_c: 20.0,
    };
    let chain = offset_chain(&mut Flat, 1.0, &prior, 48.0, 10, 10_100, 505);
    let kept = &chain[100..];
    let normal = Normal::new(prior.mu_c, prior.sigma_c).unwrap();
    let mut s = kept.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let ks = s
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal.cdf(*x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    let critical = KS_COEFF_1PCT / n.sqrt();

    // quadratic misfit: conjugate Gaussian posterior
    let prior = OffsetPrior {
        mu_c: 0.0,
        sigma_c: 20.0,
    };
    let (lambda, k, center) = (4.0, 1.0, 5.0);
    let precision = lambda * k + prior.sigma_c.powi(-2);
    let post_mean = (lambda * k * center + prior.mu_c * prior.sigma_c.powi(-2)) / precision;
    let sd = precision.powf(-0.5);
    let chain = offset_chain(&mut Quadratic { k, center }, lambda, &prior, 2.4 * sd, 1, 20_000, 506);
    let kept = &chain[1000..];
    let z = (mean_of(kept) - post_mean).abs() / (sd / effective_sample_size(kept).sqrt());
    ensure(
        ks < critical && z < 3.0,
        format!("KS {ks:.4} < {critical:.4}; quadratic posterior mean off by {z:.2} SE"),
    )
}

fn grid_scan_minimizer(s: &Scenario, b: &Sinogram) -> f64 {
    let x = make_phantom(&s.cfg.phantom_spec(s.geom.image_size)).unwrap();
    (0..=120)
        .map(|k| k as f64 * 0.05)
        .map(|c| {
            let r = forward_project(&x, &s.geom, c).unwrap();
            let misfit: f64 = r
                .as_slice()
                .iter()
                .zip(b.as_slice())
                .map(|(p, q)| (p - q).powi(2))
                .sum();
            (c, misfit)
        })
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap()
        .0
}

struct Shared {
    scenario: Scenario,
    high_dose: Sinogram,
    high_lambda_mean: Option<f64>,
}

fn c6_recovery(sh: &mut Shared) -> Outcome {
    let s = &sh.scenario;
    let b = &sh.high_dose;
    let c_scan = grid_scan_minimizer(s, b);
    let (chain, step) = s.sample(b, &s.geom);
    let sum = chain
        .summary(BURN_IN, s.cfg.sampler.max_lag)
        .map_err(|e| e.to_string())?;
    sh.high_lambda_mean = Some(sum.lambda.mean);
    let c = &sum.c;
    ensure(
        (c.mean - C_TRUE).abs() <= RECOVERY_TOL
            && c.q025 <= C_TRUE
            && C_TRUE <= c.q975
            && (c_scan - C_TRUE).abs() <= GRID_SCAN_TOL,
        format!(
            "c mean {:.4}, 95% [{:.4}, {:.4}], step {step}, acceptance {:.3}; grid-scan minimizer {c_scan:.2}",
            c.mean, c.q025, c.q975, sum.acceptance_rate
        ),
    )
}

fn c7_low_dose(sh: &mut Shared) -> Outcome {
    let s = &sh.scenario;
    let high = match sh.high_lambda_mean {
        Some(v) => v,
        None => {
            let (chain, _) = s.sample(&sh.high_dose, &s.geom);
            chain.summary(BURN_IN, 1).map_err(|e| e.to_string())?.lambda.mean
        }
    };
    let b = s.sinogram(Some(s.cfg.noise.lambda_true / LOW_DOSE_FACTOR));
    let (chain, _) = s.sample(&b, &s.geom);
    let sum = chain.summary(BURN_IN, 1).map_err(|e| e.to_string())?;
    let ratio = high / sum.lambda.mean;
    ensure(
        (LAMBDA_RATIO.0..=LAMBDA_RATIO.1).contains(&ratio) && (sum.c.mean - C_TRUE).abs() <= DEGRADED_TOL,
        format!(
            "lambda mean {high:.1} -> {:.2} (factor {ratio:.1}); c mean {:.4}",
            sum.lambda.mean, sum.c.mean
        ),
    )
}

fn c8_fast_scan(sh: &mut Shared) -> Outcome {
    let s = &sh.scenario;
    let keep = s.geom.angles_within(FAST_SCAN_DEGREES.to_radians());
    let geom = s.geom.select_angles(&keep).unwrap();
    let b = sh.high_dose.select_angles(&keep).unwrap();
    let (chain, _) = s.sample(&b, &geom);
    let sum = chain.summary(BURN_IN, 1).map_err(|e| e.to_string())?;
    let com = com_offset(&b, &geom).map_err(|e| e.to_string())?;
    let xc = xcorr_offset(&b, &geom).map_err(|e| e.to_string())?;
    ensure(
        (sum.c.mean - C_TRUE).abs() <= DEGRADED_TOL,
        format!(
            "{} angles; MCMC c {:.4} (error {:+.3}); COM error {:+.3}, XCORR error {:+.3}",
            keep.len(),
            sum.c.mean,
            sum.c.mean - C_TRUE,
            com.c_hat - C_TRUE,
            xc.c_hat - C_TRUE
        ),
    )
}

fn c9_cost() -> Outcome {
    let g = GeometrySpec::full_rotation(60.0, 60.0, 40, 1.0, 24, 16, 1.0);
    let spec = ctcor::PhantomSpec::beads(16);
    let noise = ctcor::NoiseSpec {
        lambda_true: 1e4,
        seed: 9,
    };
    let b = simulate_phantom_sinogram(&spec, &g, 1.0, Some(&noise), 2).unwrap();
    let mut details = Vec::new();
    let custom = SamplerConfig {
        k_gibbs: 25,
        k_metro: 3,
        k_fista: 7,
        seed: 9,
        ..Default::default()
    };
    let defaults = SamplerConfig {
        k_gibbs: 25,
        seed: 9,
        ..Default::default()
    };
    for cfg in [custom, defaults.clone()] {
        let chain = run_gibbs(&b, &g, &cfg).map_err(|e| e.to_string())?;
        let formula = (cfg.k_gibbs * (2 * cfg.k_fista + cfg.k_metro)) as u64;
        if chain.cost.conditional != formula {
            return Err(format!("counted {} vs {formula}", chain.cost.conditional));
        }
        details.push(format!("{} = {formula}", chain.cost.conditional));
    }
    let d = &defaults;
    let default_rule = 2.5 * d.k_gibbs as f64 * d.k_fista as f64;
    ensure(
        defaults.expected_cost() as f64 == default_rule,
        format!(
            "counted {}; defaults give 2.5·k_gibbs·k_fista = {default_rule}",
            details.join(", ")
        ),
    )
}

fn c10_baselines(sh: &mut Shared) -> Outcome {
    let s = &sh.scenario;
    let b = s.sinogram(None);
    let com = com_offset(&b, &s.geom).map_err(|e| e.to_string())?;
    let xc = xcorr_offset(&b, &s.geom).map_err(|e| e.to_string())?;
    ensure(
        (com.c_hat - C_TRUE).abs() <= BASELINE_TOL && (xc.c_hat - C_TRUE).abs() <= BASELINE_TOL,
        format!("COM {:.4}, XCORR {:.4}", com.c_hat, xc.c_hat),
    )
}

fn c11_reproducible(sh: &mut Shared) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sino = dir.path().join("b.ctsg");
    ctcor::io::write_sinogram(&sino, &sh.high_dose).map_err(|e| e.to_string())?;
    let mut cfg = sh.scenario.cfg.clone();
    cfg.sampler.parallel = false;
    cfg.sampler.k_gibbs = 60;
    cfg.sampler.burn_in = 20;
    cfg.sampler.tune_warmup = 10;
    cfg.sampler.tune_pilot = 15;
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        cmd_sample(&cfg, &sino, &out, &SampleOptions::default()).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(out.join("chain.csv")).map_err(|e| e.to_string())?);
    }
    let rows = read_chain(dir.path().join("a/chain.csv"))
        .map_err(|e| e.to_string())?
        .len();
    ensure(
        bytes[0] == bytes[1] && rows == 60,
        format!(
            "{rows} rows, {} bytes, identical: {}",
            bytes[0].len(),
            bytes[0] == bytes[1]
        ),
    )
}

type Check = fn(&mut Shared) -> Outcome;

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, Duration, Check); 11] = [
        (1, "adjoint identity", Duration::from_secs(10), |_| c1_adjoint()),
        (2, "gamma conditionals", Duration::from_secs(5), |_| c2_gamma()),
        (
            3,
            "RTO matches the Gaussian conditional",
            Duration::from_secs(120),
            |_| c3_rto(),
        ),
        (4, "FISTA vs normal equations and KKT", Duration::from_secs(30), |_| {
            c4_fista()
        }),
        (5, "MH on flat and quadratic targets", Duration::from_secs(60), |_| {
            c5_mh()
        }),
        (6, "synthetic recovery", Duration::from_secs(900), c6_recovery),
        (7, "low-dose behavior", Duration::from_secs(900), c7_low_dose),
        (8, "fast-scan behavior", Duration::from_secs(1200), c8_fast_scan),
        (9, "cost model", Duration::from_secs(60), |_| c9_cost()),
        (10, "baselines on clean data", Duration::from_secs(60), c10_baselines),
        (11, "byte-identical chains", Duration::from_secs(300), c11_reproducible),
    ];
    let scenario = Scenario::new();
    let needs_data = criteria
        .iter()
        .any(|(n, ..)| (6..=11).contains(n) && (selected.is_empty() || selected.contains(n)));
    let high_dose = if needs_data {
        scenario.sinogram(Some(scenario.cfg.noise.lambda_true))
    } else {
        Sinogram::zeros(1, 1)
    };
    let mut shared = Shared {
        scenario,
        high_dose,
        high_lambda_mean: None,
    };
    let mut failures = 0;
    for (n, name, budget, check) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| check(&mut shared)))
            .unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(m) if elapsed > budget => Err(format!("{m}; over the {}s budget", budget.as_secs())),
            other => other,
        };
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failures += 1;
                ("FAIL", m)
            }
        };
        println!("[{tag}] criterion {n:>2} {name}: {msg} ({:.1}s)", elapsed.as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
