//! Sinogram-only center-of-rotation estimators.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::GeometrySpec;
use crate::image::Sinogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Com,
    Xcorr,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Com => "com",
            Method::Xcorr => "xcorr",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "com" => Ok(Method::Com),
            "xcorr" => Ok(Method::Xcorr),
            other => Err(Error::InvalidArgument(format!(
                "unknown baseline method '{other}' (expected com or xcorr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineEstimate {
    /// Offset in object pixels.
    pub c_hat: f64,
    /// Shift of the rotation axis on the detector, in detector pixels.
    pub detector_shift: f64,
    pub method: Method,
    /// Set when the scan does not cover a full rotation; the estimate is
    /// still computed but is not expected to be reliable.
    pub warning: bool,
}

impl fmt::Display for BaselineEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "method={} c_hat={} detector_shift={} warning={}",
            self.method, self.c_hat, self.detector_shift, self.warning
        )
    }
}

pub fn estimate(method: Method, b: &Sinogram, geom: &GeometrySpec) -> Result<BaselineEstimate> {
    match method {
        Method::Com => com_offset(b, geom),
        Method::Xcorr => xcorr_offset(b, geom),
    }
}

/// Center of mass: per-projection intensity centroid, averaged over all
/// projections, measured from the detector midpoint.
pub fn com_offset(b: &Sinogram, geom: &GeometrySpec) -> Result<BaselineEstimate> {
    b.check_matches(geom)?;
    let mid = (b.n_detector() as f64 - 1.0) / 2.0;
    let mut total = 0.0;
    let mut used = 0usize;
    for row in b.rows() {
        let mass: f64 = row.iter().sum();
        if mass == 0.0 {
            continue;
        }
        let moment: f64 = row.iter().enumerate().map(|(j, w)| w * (j as f64 - mid)).sum();
        total += moment / mass;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Estimator(
            "all projections are zero; the centroid is undefined".into(),
        ));
    }
    let shift = total / used as f64;
    Ok(BaselineEstimate {
        c_hat: geom.center_of_detector_shift(shift),
        detector_shift: shift,
        method: Method::Com,
        warning: !geom.covers_full_rotation(),
    })
}

/// Cross-correlation of the angle-summed profile with its mirror image.
pub fn xcorr_offset(b: &Sinogram, geom: &GeometrySpec) -> Result<BaselineEstimate> {
    b.check_matches(geom)?;
    let mut profile = vec![0.0; b.n_detector()];
    for row in b.rows() {
        profile.iter_mut().zip(row).for_each(|(p, v)| *p += v);
    }
    let lag = mirror_lag(&profile)?;
    let shift = lag / 2.0;
    Ok(BaselineEstimate {
        c_hat: geom.center_of_detector_shift(shift),
        detector_shift: shift,
        method: Method::Xcorr,
        warning: !geom.covers_full_rotation(),
    })
}

/// `r(L) = Σ_j p_j q_{j−L}` with `q` the reversal of `p`, for
/// `L = −(n−1) ..= n−1`. Entry `i` holds lag `i − (n−1)`.
pub fn mirror_correlation(profile: &[f64]) -> Vec<f64> {
    let n = profile.len() as isize;
    (-(n - 1)..n)
        .map(|lag| {
            let lo = lag.max(0);
            let hi = (n - 1).min(n - 1 + lag);
            (lo..=hi)
                .map(|j| profile[j as usize] * profile[(n - 1 - (j - lag)) as usize])
                .sum()
        })
        .collect()
}

/// Lag maximizing [`mirror_correlation`], refined by a parabola through the
/// peak and its two neighbours. A profile symmetric about `mid + s` peaks at
/// lag `2s`.
pub fn mirror_lag(profile: &[f64]) -> Result<f64> {
    let n = profile.len();
    if profile.iter().all(|v| *v == 0.0) {
        return Err(Error::Estimator(
            "all projections are zero; the correlation is undefined".into(),
        ));
    }
    let r = mirror_correlation(profile);
    let (peak, _) = r.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, v)| {
            if *v > best.1 {
                (i, *v)
            } else {
                best
            }
        },
    );
    if peak == 0 || peak == r.len() - 1 {
        return Err(Error::Estimator(
            "correlation peak at the boundary; shift outside the measurable range".into(),
        ));
    }
    let (a, m, c) = (r[peak - 1], r[peak], r[peak + 1]);
    let curvature = a - 2.0 * m + c;
    let frac = if curvature < 0.0 {
        0.5 * (a - c) / curvature
    } else {
        0.0
    };
    Ok(peak as f64 - (n as f64 - 1.0) + frac)
}
