//! Post-burn-in chain diagnostics.

use crate::error::{Error, Result};

use super::ChainRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    /// Autocorrelation for lags `0..=max_lag`; `acf[0] == 1`.
    pub acf: Vec<f64>,
    /// Effective sample size from the integrated autocorrelation time.
    /// `NaN` for a constant chain.
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub n_samples: usize,
    pub lambda: ParamSummary,
    pub delta: ParamSummary,
    pub c: ParamSummary,
    /// Accepted proposals over all proposals made after burn-in.
    pub acceptance_rate: f64,
}

/// Summaries of λ, δ and c over `records[burn_in..]`.
pub fn chain_stats(records: &[ChainRecord], k_metro: usize, burn_in: usize, max_lag: usize) -> Result<ChainSummary> {
    if burn_in >= records.len() {
        return Err(Error::InvalidArgument(format!(
            "burn-in {burn_in} must be smaller than the chain length {}",
            records.len()
        )));
    }
    if k_metro == 0 {
        return Err(Error::InvalidArgument("k_metro must be ≥ 1".into()));
    }
    let kept = &records[burn_in..];
    let column = |f: fn(&ChainRecord) -> f64| kept.iter().map(f).collect::<Vec<_>>();
    let accepts: usize = kept.iter().map(|r| r.mh_accepts).sum();
    Ok(ChainSummary {
        n_samples: kept.len(),
        lambda: summarize(&column(|r| r.lambda), max_lag),
        delta: summarize(&column(|r| r.delta), max_lag),
        c: summarize(&column(|r| r.c), max_lag),
        acceptance_rate: accepts as f64 / (k_metro * kept.len()) as f64,
    })
}

pub fn summarize(values: &[f64], max_lag: usize) -> ParamSummary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    ParamSummary {
        mean,
        sd,
        q025: quantile_sorted(&sorted, 0.025),
        q975: quantile_sorted(&sorted, 0.975),
        acf: autocorrelation(values, max_lag),
        ess: effective_sample_size(values),
    }
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Normalized autocorrelation `ρ_k = Σ (x_t − x̄)(x_{t+k} − x̄) / Σ (x_t − x̄)²`
/// for `k = 0..=max_lag` (capped at `n − 1`). A constant series has `ρ_0 = 1`
/// and zero elsewhere.
pub fn autocorrelation(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return vec![];
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    let lags = max_lag.min(n - 1);
    let mut acf = Vec::with_capacity(lags + 1);
    acf.push(1.0);
    for k in 1..=lags {
        if denom == 0.0 {
            acf.push(0.0);
            continue;
        }
        let s: f64 = centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum();
        acf.push(s / denom);
    }
    acf
}

/// `n / τ` with `τ = −1 + 2 Σ Γ_t`, where `Γ_t = ρ_{2t} + ρ_{2t+1}` is summed
/// while positive (initial positive sequence estimator).
pub fn effective_sample_size(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return n as f64;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return f64::NAN;
    }
    let rho = |k: usize| -> f64 {
        if k >= n {
            return 0.0;
        }
        centered[..n - k]
            .iter()
            .zip(&centered[k..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / denom
    };
    let mut tau = -1.0;
    let mut t = 0;
    while 2 * t < n {
        let gamma = rho(2 * t) + rho(2 * t + 1);
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        t += 1;
    }
    n as f64 / tau.max(1.0 / n as f64)
}
