//! Fan-beam acquisition geometry with a linear detector and a horizontal
//! center-of-rotation offset.
//!
//! Coordinates are expressed in the object frame: the rotation center sits at
//! the origin and the square reconstruction grid is centered on it. At angle
//! zero the source lies below the object at `(-c·p, -SOD)` and the detector
//! line runs horizontally at `y = ODD`, so the midline (source to the detector
//! midpoint `D`) is the vertical line `x = -c·p`. A positive offset `c`
//! therefore places the rotation center `c·p` to the right of the midline,
//! `p` being the reconstruction pixel size. Every angle rotates source and
//! detector jointly about the origin.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};

/// Description of a fan-beam scan. Lengths are in millimetres, angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySpec {
    pub source_to_center: f64,
    pub center_to_detector: f64,
    pub n_detector: usize,
    pub detector_pixel_size: f64,
    pub angles: Vec<f64>,
    pub image_size: usize,
    pub image_pixel_size: f64,
}

/// One violated [`GeometrySpec`] invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryViolation {
    SourceToCenter,
    CenterToDetector,
    DetectorPixelSize,
    ImagePixelSize,
    NDetector,
    NAngles,
    ImageSize,
    NonFiniteAngle(usize),
    NotIncreasing(usize),
    DuplicateAngle(usize, usize),
}

impl fmt::Display for GeometryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryViolation::SourceToCenter => f.write_str("source_to_center > 0 violated"),
            GeometryViolation::CenterToDetector => f.write_str("center_to_detector > 0 violated"),
            GeometryViolation::DetectorPixelSize => f.write_str("detector_pixel_size > 0 violated"),
            GeometryViolation::ImagePixelSize => f.write_str("image_pixel_size > 0 violated"),
            GeometryViolation::NDetector => f.write_str("n_detector ≥ 1 violated"),
            GeometryViolation::NAngles => f.write_str("n_angles ≥ 1 violated"),
            GeometryViolation::ImageSize => f.write_str("image_size ≥ 1 violated"),
            GeometryViolation::NonFiniteAngle(i) => write!(f, "angle {i} is not finite"),
            GeometryViolation::NotIncreasing(i) => {
                write!(f, "angles strictly increasing violated at index {i}")
            }
            GeometryViolation::DuplicateAngle(i, j) => {
                write!(f, "angles {i} and {j} coincide modulo 2π")
            }
        }
    }
}

/// A single source-to-detector-pixel line, in object-frame millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub source: [f64; 2],
    pub detector: [f64; 2],
}

impl Ray {
    pub fn length(&self) -> f64 {
        (self.detector[0] - self.source[0]).hypot(self.detector[1] - self.source[1])
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl GeometrySpec {
    /// Geometry with `n_angles` equispaced angles `k·2π/n_angles` over a full rotation.
    pub fn full_rotation(
        source_to_center: f64,
        center_to_detector: f64,
        n_detector: usize,
        detector_pixel_size: f64,
        n_angles: usize,
        image_size: usize,
        image_pixel_size: f64,
    ) -> Self {
        GeometrySpec {
            source_to_center,
            center_to_detector,
            n_detector,
            detector_pixel_size,
            angles: uniform_angles(n_angles),
            image_size,
            image_pixel_size,
        }
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    /// Number of reconstruction unknowns `n`.
    pub fn n_pixels(&self) -> usize {
        self.image_size * self.image_size
    }

    /// Number of measurements `m`.
    pub fn n_measurements(&self) -> usize {
        self.n_angles() * self.n_detector
    }

    /// Object-to-detector magnification `(SOD + ODD) / SOD`.
    pub fn magnification(&self) -> f64 {
        (self.source_to_center + self.center_to_detector) / self.source_to_center
    }

    /// Checks every invariant and returns all violations at once.
    pub fn validate(&self) -> std::result::Result<(), Vec<GeometryViolation>> {
        let mut errs = Vec::new();
        if !positive(self.source_to_center) {
            errs.push(GeometryViolation::SourceToCenter);
        }
        if !positive(self.center_to_detector) {
            errs.push(GeometryViolation::CenterToDetector);
        }
        if !positive(self.detector_pixel_size) {
            errs.push(GeometryViolation::DetectorPixelSize);
        }
        if !positive(self.image_pixel_size) {
            errs.push(GeometryViolation::ImagePixelSize);
        }
        if self.n_detector < 1 {
            errs.push(GeometryViolation::NDetector);
        }
        if self.angles.is_empty() {
            errs.push(GeometryViolation::NAngles);
        }
        if self.image_size < 1 {
            errs.push(GeometryViolation::ImageSize);
        }

        let mut finite = true;
        for (i, a) in self.angles.iter().enumerate() {
            if !a.is_finite() {
                errs.push(GeometryViolation::NonFiniteAngle(i));
                finite = false;
            }
        }
        if finite {
            for i in 1..self.angles.len() {
                if self.angles[i] <= self.angles[i - 1] {
                    errs.push(GeometryViolation::NotIncreasing(i));
                }
            }
            let mut normalized: Vec<(f64, usize)> = self
                .angles
                .iter()
                .enumerate()
                .map(|(i, a)| (normalize_angle(*a), i))
                .collect();
            normalized.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in normalized.windows(2) {
                if w[0].0 == w[1].0 {
                    errs.push(GeometryViolation::DuplicateAngle(w[0].1, w[1].1));
                }
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().map_err(Error::InvalidGeometry)
    }

    /// Largest admissible `|c|`: the rotation center has to stay on the grid.
    pub fn offset_limit(&self) -> f64 {
        self.image_size as f64 / 2.0
    }

    pub fn check_offset(&self, c: f64) -> Result<()> {
        let limit = self.offset_limit();
        if c.is_finite() && c.abs() < limit {
            Ok(())
        } else {
            Err(Error::InvalidOffset { c, limit })
        }
    }

    /// Signed detector coordinate (mm, relative to the detector midpoint `D`)
    /// of the centre of detector pixel `j`.
    pub fn detector_coordinate(&self, j: usize) -> f64 {
        (j as f64 - (self.n_detector as f64 - 1.0) / 2.0) * self.detector_pixel_size
    }

    /// Source and detector-pixel-centre positions for one measurement.
    pub fn ray_for(&self, angle_index: usize, detector_index: usize, c: f64) -> Result<Ray> {
        if angle_index >= self.n_angles() {
            return Err(Error::IndexOutOfRange {
                what: "angle",
                index: angle_index,
                len: self.n_angles(),
            });
        }
        if detector_index >= self.n_detector {
            return Err(Error::IndexOutOfRange {
                what: "detector",
                index: detector_index,
                len: self.n_detector,
            });
        }
        self.check_offset(c)?;
        let frame = self.view_frame(angle_index, c);
        Ok(frame.ray(self.detector_coordinate(detector_index)))
    }

    /// Rotated source position and detector axis for one angle. Unchecked.
    pub(crate) fn view_frame(&self, angle_index: usize, c: f64) -> ViewFrame {
        let (sin, cos) = self.angles[angle_index].sin_cos();
        let shift = -c * self.image_pixel_size;
        let rot = |x: f64, y: f64| [x * cos - y * sin, x * sin + y * cos];
        ViewFrame {
            source: rot(shift, -self.source_to_center),
            detector_origin: rot(shift, self.center_to_detector),
            detector_axis: [cos, sin],
        }
    }

    /// Offset `c` (object pixels) expressed as a shift on the detector, in detector pixels.
    pub fn detector_shift_of_center(&self, c: f64) -> f64 {
        c * self.image_pixel_size * self.magnification() / self.detector_pixel_size
    }

    /// Inverse of [`GeometrySpec::detector_shift_of_center`].
    pub fn center_of_detector_shift(&self, shift: f64) -> f64 {
        shift * self.detector_pixel_size / (self.image_pixel_size * self.magnification())
    }

    /// Indices of the angles lying in `[first, first + range]`, `range` in radians.
    pub fn angles_within(&self, range: f64) -> Vec<usize> {
        let first = self.angles.first().copied().unwrap_or(0.0);
        let tol = 1e-9 * range.abs().max(1.0);
        self.angles
            .iter()
            .enumerate()
            .filter(|(_, a)| **a - first <= range + tol)
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy of this geometry keeping only the listed angles.
    pub fn select_angles(&self, indices: &[usize]) -> Result<GeometrySpec> {
        let mut angles = Vec::with_capacity(indices.len());
        for &i in indices {
            let a = self.angles.get(i).ok_or(Error::IndexOutOfRange {
                what: "angle",
                index: i,
                len: self.n_angles(),
            })?;
            angles.push(*a);
        }
        Ok(GeometrySpec { angles, ..self.clone() })
    }

    /// True when no circular gap between consecutive angles exceeds twice
    /// the nominal full-rotation spacing, i.e. the scan covers 360°.
    pub fn covers_full_rotation(&self) -> bool {
        let n = self.angles.len();
        if n < 2 {
            return false;
        }
        let mut a: Vec<f64> = self.angles.iter().map(|x| normalize_angle(*x)).collect();
        a.sort_by(f64::total_cmp);
        let mut max_gap = a[0] + TAU - a[n - 1];
        for w in a.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        max_gap <= 2.0 * TAU / n as f64 + 1e-9
    }

    /// Same scan on a grid refined by `factor` (pixel size divided accordingly).
    pub fn refined(&self, factor: usize) -> GeometrySpec {
        GeometrySpec {
            image_size: self.image_size * factor,
            image_pixel_size: self.image_pixel_size / factor as f64,
            ..self.clone()
        }
    }
}

/// Equispaced angles `k·2π/n`, `k = 0..n`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * TAU / n as f64).collect()
}

pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ViewFrame {
    pub source: [f64; 2],
    pub detector_origin: [f64; 2],
    pub detector_axis: [f64; 2],
}

impl ViewFrame {
    #[inline]
    pub fn ray(&self, u: f64) -> Ray {
        Ray {
            source: self.source,
            detector: [
                self.detector_origin[0] + u * self.detector_axis[0],
                self.detector_origin[1] + u * self.detector_axis[1],
            ],
        }
    }
}
