//! Owned image and sinogram buffers.

use crate::error::{Error, Result};
use crate::geometry::GeometrySpec;

/// Square grid of absorption coefficients, row-major. Row 0 is the top of the
/// object (largest `y`), column 0 the left edge (smallest `x`).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    size: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(size: usize) -> Self {
        Image {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn from_vec(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::ShapeMismatch {
                expected: format!("{size}x{size} image ({} values)", size * size),
                found: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(Image { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.size + col] = v;
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn check_matches(&self, geom: &GeometrySpec) -> Result<()> {
        if self.size != geom.image_size {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0} image", geom.image_size),
                found: format!("{0}x{0} image", self.size),
            });
        }
        Ok(())
    }

    /// Splits every pixel into `factor²` sub-pixels carrying the same value.
    pub fn upsample(&self, factor: usize) -> Image {
        let fine = self.size * factor;
        let mut out = Image::zeros(fine);
        for r in 0..fine {
            for c in 0..fine {
                out.data[r * fine + c] = self.data[(r / factor) * self.size + c / factor];
            }
        }
        out
    }
}

/// Measurements arranged angle-major: row `i` is the projection at angle `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    n_angles: usize,
    n_detector: usize,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(n_angles: usize, n_detector: usize) -> Self {
        Sinogram {
            n_angles,
            n_detector,
            data: vec![0.0; n_angles * n_detector],
        }
    }

    pub fn for_geometry(geom: &GeometrySpec) -> Self {
        Sinogram::zeros(geom.n_angles(), geom.n_detector)
    }

    pub fn from_vec(n_angles: usize, n_detector: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_angles * n_detector {
            return Err(Error::ShapeMismatch {
                expected: format!("{n_angles}x{n_detector} sinogram ({} values)", n_angles * n_detector),
                found: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sinogram"));
        }
        Ok(Sinogram {
            n_angles,
            n_detector,
            data,
        })
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_detector(&self) -> usize {
        self.n_detector
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, angle: usize) -> &[f64] {
        &self.data[angle * self.n_detector..(angle + 1) * self.n_detector]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_detector.max(1))
    }

    pub fn check_matches(&self, geom: &GeometrySpec) -> Result<()> {
        if self.n_angles != geom.n_angles() || self.n_detector != geom.n_detector {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} sinogram", geom.n_angles(), geom.n_detector),
                found: format!("{}x{} sinogram", self.n_angles, self.n_detector),
            });
        }
        Ok(())
    }

    /// Keeps only the listed projection rows, in the given order.
    pub fn select_angles(&self, indices: &[usize]) -> Result<Sinogram> {
        let mut data = Vec::with_capacity(indices.len() * self.n_detector);
        for &i in indices {
            if i >= self.n_angles {
                return Err(Error::IndexOutOfRange {
                    what: "angle",
                    index: i,
                    len: self.n_angles,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Sinogram {
            n_angles: indices.len(),
            n_detector: self.n_detector,
            data,
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
