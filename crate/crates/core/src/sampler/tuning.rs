//! Pilot-phase tuning of the Metropolis step size.

use crate::error::Result;
use crate::geometry::GeometrySpec;
use crate::image::{Image, Sinogram};

use super::{run_gibbs, SamplerConfig};

pub const TARGET_ACCEPTANCE: f64 = 0.25;
pub const ACCEPTANCE_BAND: (f64, f64) = (0.15, 0.40);
pub const MAX_ADJUSTMENTS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub step_size: f64,
    /// Acceptance rate of the pilot run made with `step_size`.
    pub acceptance_rate: f64,
    pub adjustments: usize,
    /// Whether the rate landed inside [`ACCEPTANCE_BAND`].
    pub converged: bool,
    /// State at the end of the last pilot run.
    pub x: Image,
    pub c: f64,
    /// `(step size, acceptance rate)` of every pilot run.
    pub history: Vec<(f64, f64)>,
}

/// Adjusts `cfg.step_size` until a pilot run of `pilot_sweeps` sweeps accepts
/// between 15% and 40% of the offset proposals. A warm-up run of
/// `warmup_sweeps` sweeps at the initial step comes first so the pilots see
/// the chain near equilibrium rather than its transient. Each pilot continues
/// from the previous run's final state and uses its own seed; all pilot
/// samples are discarded. The step doubles or halves until the band is bracketed, then
/// bisects geometrically. Gives up after [`MAX_ADJUSTMENTS`] changes and
/// returns the step whose rate was closest to 25%.
pub fn tune_step_size(
    b: &Sinogram,
    geom: &GeometrySpec,
    cfg: &SamplerConfig,
    warmup_sweeps: usize,
    pilot_sweeps: usize,
) -> Result<TuneOutcome> {
    let (low, high) = ACCEPTANCE_BAND;
    let mut step = cfg.step_size;
    let mut too_small: Option<f64> = None; // largest step with too many acceptances
    let mut too_large: Option<f64> = None; // smallest step with too few
    let mut pilot = cfg.clone();
    pilot.k_gibbs = pilot_sweeps.max(1);
    pilot.moment_burn_in = 0;
    let mut history = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let mut state = (cfg.x0.clone(), cfg.c0);
    if warmup_sweeps > 0 {
        let mut warm = cfg.clone();
        warm.k_gibbs = warmup_sweeps;
        warm.moment_burn_in = 0;
        warm.seed = cfg.seed ^ (0xA5 << 48);
        let chain = run_gibbs(b, geom, &warm)?;
        state = (Some(chain.last_image.clone()), chain.last_offset());
    }

    for attempt in 0..=MAX_ADJUSTMENTS {
        pilot.step_size = step;
        pilot.x0 = state.0.clone();
        pilot.c0 = state.1;
        pilot.seed = cfg.seed ^ ((attempt as u64 + 1) << 40);
        let chain = run_gibbs(b, geom, &pilot)?;
        let accepted: usize = chain.records.iter().map(|r| r.mh_accepts).sum();
        let rate = accepted as f64 / (pilot.k_metro * chain.records.len()) as f64;
        state = (Some(chain.last_image.clone()), chain.last_offset());
        history.push((step, rate));
        if best.is_none_or(|(_, r)| (rate - TARGET_ACCEPTANCE).abs() < (r - TARGET_ACCEPTANCE).abs()) {
            best = Some((step, rate));
        }
        if (low..=high).contains(&rate) {
            return Ok(TuneOutcome {
                step_size: step,
                acceptance_rate: rate,
                adjustments: attempt,
                converged: true,
                x: chain.last_image,
                c: state.1,
                history,
            });
        }
        if attempt == MAX_ADJUSTMENTS {
            break;
        }
        if rate > high {
            too_small = Some(too_small.map_or(step, |s| s.max(step)));
            step = match too_large {
                Some(l) if l > step => (step * l).sqrt(),
                _ => step * 2.0,
            };
        } else {
            too_large = Some(too_large.map_or(step, |s| s.min(step)));
            step = match too_small {
                Some(s) if s < step => (step * s).sqrt(),
                _ => step / 2.0,
            };
        }
    }

    let (step, rate) = best.expect("at least one pilot run");
    Ok(TuneOutcome {
        step_size: step,
        acceptance_rate: rate,
        adjustments: MAX_ADJUSTMENTS,
        converged: false,
        x: state.0.expect("pilot produced an image"),
        c: state.1,
        history,
    })
}
