//! Synthetic phantoms and noisy sinogram simulation.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::GeometrySpec;
use crate::image::{Image, Sinogram};
use crate::operator::LinearOperator;
use crate::projector::Projector;
use crate::rng::{RngStreams, Stream};

/// A filled disk. Coordinates are in pixels relative to the grid centre
/// (which is the rotation center), `x` to the right and `y` up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub image_size: usize,
    pub disks: Vec<Disk>,
    pub background: f64,
}

impl PhantomSpec {
    /// Plastic cylinder holding a handful of glass beads of varying size.
    pub fn beads(image_size: usize) -> Self {
        // layout designed on a 64-pixel grid, scaled to the requested size
        let s = image_size as f64 / 64.0;
        let d = |x: f64, y: f64, r: f64, v: f64| Disk {
            center_x: x * s,
            center_y: y * s,
            radius: r * s,
            value: v,
        };
        PhantomSpec {
            image_size,
            disks: vec![
                d(1.5, -1.0, 24.0, 0.010),
                d(-12.0, 9.0, 4.0, 0.040),
                d(7.0, 13.0, 3.0, 0.040),
                d(14.0, -4.0, 3.5, 0.040),
                d(-4.0, -14.0, 4.5, 0.035),
                d(-15.0, -6.0, 2.5, 0.045),
                d(3.0, 0.5, 2.0, 0.050),
                d(9.0, -15.0, 2.5, 0.040),
                d(-6.0, 3.0, 3.0, 0.030),
                d(17.0, 8.0, 2.0, 0.050),
            ],
            background: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 {
            return Err(Error::InvalidArgument("phantom image_size must be ≥ 1".into()));
        }
        if !self.background.is_finite() {
            return Err(Error::InvalidArgument("phantom background must be finite".into()));
        }
        for (i, d) in self.disks.iter().enumerate() {
            if !(d.radius.is_finite() && d.radius > 0.0) {
                return Err(Error::InvalidArgument(format!("disk {i}: radius must be > 0")));
            }
            if !(d.center_x.is_finite() && d.center_y.is_finite() && d.value.is_finite()) {
                return Err(Error::InvalidArgument(format!("disk {i}: non-finite field")));
            }
        }
        Ok(())
    }

    /// The same object described on a grid `factor` times finer.
    pub fn refined(&self, factor: usize) -> PhantomSpec {
        let f = factor as f64;
        PhantomSpec {
            image_size: self.image_size * factor,
            disks: self
                .disks
                .iter()
                .map(|d| Disk {
                    center_x: d.center_x * f,
                    center_y: d.center_y * f,
                    radius: d.radius * f,
                    value: d.value,
                })
                .collect(),
            background: self.background,
        }
    }
}

/// Rasterizes the phantom: each pixel takes the value of the last disk that
/// contains its centre, or the background.
pub fn make_phantom(spec: &PhantomSpec) -> Result<Image> {
    spec.validate()?;
    let n = spec.image_size;
    let half = n as f64 / 2.0;
    let mut img = Image::zeros(n);
    for r in 0..n {
        let y = half - r as f64 - 0.5;
        for c in 0..n {
            let x = c as f64 + 0.5 - half;
            let v = spec
                .disks
                .iter()
                .rev()
                .find(|d| (x - d.center_x).powi(2) + (y - d.center_y).powi(2) <= d.radius * d.radius)
                .map_or(spec.background, |d| d.value);
            img.set(r, c, v);
        }
    }
    Ok(img)
}

/// Additive Gaussian noise with precision `lambda_true`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub lambda_true: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_true.is_finite() && self.lambda_true > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument("noise lambda_true must be > 0".into()))
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.lambda_true.powf(-0.5)
    }
}

/// Projects `x` at `c_true` on a grid refined by `supersample` (every pixel
/// split into equal sub-pixels) and adds i.i.d. noise when `noise` is given.
pub fn simulate_sinogram(
    x: &Image,
    geom: &GeometrySpec,
    c_true: f64,
    noise: Option<&NoiseSpec>,
    supersample: usize,
) -> Result<Sinogram> {
    x.check_matches(geom)?;
    if supersample == 0 {
        return Err(Error::InvalidArgument("supersample must be ≥ 1".into()));
    }
    let fine = if supersample == 1 {
        x.clone()
    } else {
        x.upsample(supersample)
    };
    simulate_on_fine_grid(&fine, geom, c_true, noise, supersample)
}

/// Like [`simulate_sinogram`] but rasterizes the phantom directly on the
/// refined grid, so disk edges are resolved at the finer pitch. This is the
/// path that keeps simulated data off the reconstruction discretization.
pub fn simulate_phantom_sinogram(
    phantom: &PhantomSpec,
    geom: &GeometrySpec,
    c_true: f64,
    noise: Option<&NoiseSpec>,
    supersample: usize,
) -> Result<Sinogram> {
    if supersample == 0 {
        return Err(Error::InvalidArgument("supersample must be ≥ 1".into()));
    }
    if phantom.image_size != geom.image_size {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0} phantom", geom.image_size),
            found: format!("{0}x{0} phantom", phantom.image_size),
        });
    }
    let fine = make_phantom(&phantom.refined(supersample))?;
    simulate_on_fine_grid(&fine, geom, c_true, noise, supersample)
}

fn simulate_on_fine_grid(
    fine: &Image,
    geom: &GeometrySpec,
    c_true: f64,
    noise: Option<&NoiseSpec>,
    supersample: usize,
) -> Result<Sinogram> {
    geom.ensure_valid()?;
    if let Some(n) = noise {
        n.validate()?;
    }
    let fine_geom = geom.refined(supersample);
    // c is in coarse pixels; the refined grid has pixels `supersample` times smaller
    let op = Projector::new(&fine_geom, c_true * supersample as f64)?;
    let mut out = Sinogram::for_geometry(geom);
    op.apply(fine.as_slice(), out.as_mut_slice());
    if let Some(n) = noise {
        add_noise(&mut out, n);
    }
    Ok(out)
}

pub fn add_noise(sino: &mut Sinogram, noise: &NoiseSpec) {
    let mut rng = RngStreams::new(noise.seed).stream(Stream::Noise);
    let dist = Normal::new(0.0, noise.std_dev()).expect("validated noise level");
    for v in sino.as_mut_slice() {
        *v += dist.sample(&mut rng);
    }
}
