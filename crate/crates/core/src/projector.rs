//! Matched forward and back projection for the fan-beam geometry.
//!
//! Each measurement is the line integral of the piecewise-constant image
//! along the source-to-detector-pixel segment. Intersection lengths come from
//! an incremental Siddon traversal of the pixel grid; the back projection
//! replays the exact same traversal, so the pair is adjoint by construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{GeometrySpec, Ray, ViewFrame};
use crate::image::{dot, norm, Image, Sinogram};
use crate::operator::{DenseMatrix, LinearOperator};

/// Largest image side for which a dense matrix may be materialized.
pub const MAX_DENSE_SIZE: usize = 32;

/// Worker strategy for the projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Single worker; results are bit-reproducible.
    #[default]
    Serial,
    /// Rayon over angles. Back projections reduce per-worker accumulators, so
    /// the summation order may vary with the thread count.
    Parallel,
}

/// Visits every pixel crossed by `ray` on an `n × n` grid of pitch `pixel`
/// centred on the origin, calling `emit(flat_index, intersection_length)`.
#[inline]
pub fn trace_ray<F: FnMut(usize, f64)>(n: usize, pixel: f64, ray: &Ray, mut emit: F) {
    let half = n as f64 * pixel / 2.0;
    let [sx, sy] = ray.source;
    let dx = ray.detector[0] - sx;
    let dy = ray.detector[1] - sy;
    let length = dx.hypot(dy);

    let mut a_min = 0.0f64;
    let mut a_max = 1.0f64;
    let inv_dx = if dx != 0.0 { 1.0 / dx } else { f64::INFINITY };
    let inv_dy = if dy != 0.0 { 1.0 / dy } else { f64::INFINITY };
    if dx != 0.0 {
        let t0 = (-half - sx) * inv_dx;
        let t1 = (half - sx) * inv_dx;
        a_min = a_min.max(t0.min(t1));
        a_max = a_max.min(t0.max(t1));
    } else if sx <= -half || sx >= half {
        return;
    }
    if dy != 0.0 {
        let t0 = (-half - sy) * inv_dy;
        let t1 = (half - sy) * inv_dy;
        a_min = a_min.max(t0.min(t1));
        a_max = a_max.min(t0.max(t1));
    } else if sy <= -half || sy >= half {
        return;
    }
    if a_min >= a_max {
        return;
    }

    let last = n as isize - 1;
    let entry_index = |pos: f64, d: f64| -> isize {
        let t = (pos + half) / pixel;
        let i = if d < 0.0 { t.ceil() - 1.0 } else { t.floor() };
        (i as isize).clamp(0, last)
    };
    let mut col = entry_index(sx + a_min * dx, dx);
    let mut iy = entry_index(sy + a_min * dy, dy);
    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };

    // parametric position of the next vertical / horizontal grid line
    let next_x = |col: isize| -> f64 {
        if dx > 0.0 {
            ((col + 1) as f64 * pixel - half - sx) * inv_dx
        } else if dx < 0.0 {
            (col as f64 * pixel - half - sx) * inv_dx
        } else {
            f64::INFINITY
        }
    };
    let next_y = |iy: isize| -> f64 {
        if dy > 0.0 {
            ((iy + 1) as f64 * pixel - half - sy) * inv_dy
        } else if dy < 0.0 {
            (iy as f64 * pixel - half - sy) * inv_dy
        } else {
            f64::INFINITY
        }
    };
    let mut ax = next_x(col);
    let mut ay = next_y(iy);
    let mut cur = a_min;
    let n_i = n as isize;
    loop {
        let step_in_x = ax <= ay;
        let next = if step_in_x { ax } else { ay };
        let end = next.min(a_max);
        let seg = end - cur;
        if seg > 0.0 {
            let flat = ((last - iy) * n_i + col) as usize;
            emit(flat, seg * length);
        }
        if next >= a_max {
            break;
        }
        cur = cur.max(next);
        if step_in_x {
            col += step_x;
            if col < 0 || col >= n_i {
                break;
            }
            ax = next_x(col);
        } else {
            iy += step_y;
            if iy < 0 || iy >= n_i {
                break;
            }
            ay = next_y(iy);
        }
    }
}

/// The projection operator `A_c` for one geometry and one offset. Never
/// materialized; every application re-traces the rays.
#[derive(Debug, Clone)]
pub struct Projector<'g> {
    geom: &'g GeometrySpec,
    c: f64,
    execution: Execution,
    frames: Vec<ViewFrame>,
    detector_coords: Vec<f64>,
}

impl<'g> Projector<'g> {
    pub fn new(geom: &'g GeometrySpec, c: f64) -> Result<Self> {
        geom.ensure_valid()?;
        Self::new_prevalidated(geom, c)
    }

    /// Skips the geometry validation (the offset is still checked).
    pub(crate) fn new_prevalidated(geom: &'g GeometrySpec, c: f64) -> Result<Self> {
        geom.check_offset(c)?;
        let frames = (0..geom.n_angles()).map(|i| geom.view_frame(i, c)).collect();
        let detector_coords = (0..geom.n_detector).map(|j| geom.detector_coordinate(j)).collect();
        Ok(Projector {
            geom,
            c,
            execution: Execution::Serial,
            frames,
            detector_coords,
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn geometry(&self) -> &GeometrySpec {
        self.geom
    }

    pub fn offset(&self) -> f64 {
        self.c
    }

    fn project_row(&self, angle: usize, x: &[f64], row: &mut [f64]) {
        let frame = &self.frames[angle];
        let n = self.geom.image_size;
        let p = self.geom.image_pixel_size;
        for (out, u) in row.iter_mut().zip(&self.detector_coords) {
            let mut acc = 0.0;
            trace_ray(n, p, &frame.ray(*u), |k, len| acc += x[k] * len);
            *out = acc;
        }
    }

    fn backproject_row(&self, angle: usize, row: &[f64], out: &mut [f64]) {
        let frame = &self.frames[angle];
        let n = self.geom.image_size;
        let p = self.geom.image_pixel_size;
        for (y, u) in row.iter().zip(&self.detector_coords) {
            if *y == 0.0 {
                continue;
            }
            trace_ray(n, p, &frame.ray(*u), |k, len| out[k] += y * len);
        }
    }

    /// Compressed-row copy of the operator, useful when the same `A_c` is
    /// applied many times.
    pub fn system_matrix(&self) -> SystemMatrix {
        let n = self.geom.image_size;
        let p = self.geom.image_pixel_size;
        let mut row_ptr = Vec::with_capacity(self.rows() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for frame in &self.frames {
            for u in &self.detector_coords {
                trace_ray(n, p, &frame.ray(*u), |k, len| {
                    cols.push(k as u32);
                    vals.push(len);
                });
                row_ptr.push(cols.len());
            }
        }
        SystemMatrix {
            rows: self.rows(),
            cols: self.cols(),
            row_ptr,
            col_idx: cols,
            values: vals,
        }
    }

    /// Dense copy of `A_c`; refused for images larger than [`MAX_DENSE_SIZE`].
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        if self.geom.image_size > MAX_DENSE_SIZE {
            return Err(Error::InvalidArgument(format!(
                "dense materialization limited to {MAX_DENSE_SIZE}x{MAX_DENSE_SIZE} images"
            )));
        }
        let sm = self.system_matrix();
        let mut dense = DenseMatrix::zeros(sm.rows, sm.cols);
        for r in 0..sm.rows {
            for k in sm.row_ptr[r]..sm.row_ptr[r + 1] {
                dense.data[r * sm.cols + sm.col_idx[k] as usize] += sm.values[k];
            }
        }
        Ok(dense)
    }
}

impl LinearOperator for Projector<'_> {
    fn rows(&self) -> usize {
        self.geom.n_measurements()
    }

    fn cols(&self) -> usize {
        self.geom.n_pixels()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let nd = self.geom.n_detector;
        match self.execution {
            Execution::Serial => {
                for (i, row) in out.chunks_mut(nd).enumerate() {
                    self.project_row(i, x, row);
                }
            }
            Execution::Parallel => {
                out.par_chunks_mut(nd)
                    .enumerate()
                    .for_each(|(i, row)| self.project_row(i, x, row));
            }
        }
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let nd = self.geom.n_detector;
        match self.execution {
            Execution::Serial => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for (i, row) in y.chunks(nd).enumerate() {
                    self.backproject_row(i, row, out);
                }
            }
            Execution::Parallel => {
                let n = out.len();
                let total = y
                    .par_chunks(nd)
                    .enumerate()
                    .fold(
                        || vec![0.0; n],
                        |mut acc, (i, row)| {
                            self.backproject_row(i, row, &mut acc);
                            acc
                        },
                    )
                    .reduce(
                        || vec![0.0; n],
                        |mut a, b| {
                            a.iter_mut().zip(&b).for_each(|(u, v)| *u += v);
                            a
                        },
                    );
                out.copy_from_slice(&total);
            }
        }
    }
}

/// Compressed sparse row representation of a projection operator.
#[derive(Debug, Clone)]
pub struct SystemMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SystemMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

impl LinearOperator for SystemMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            *o = self.col_idx[a..b]
                .iter()
                .zip(&self.values[a..b])
                .map(|(k, v)| x[*k as usize] * v)
                .sum();
        }
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, yr) in y.iter().enumerate() {
            if *yr == 0.0 {
                continue;
            }
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            for (k, v) in self.col_idx[a..b].iter().zip(&self.values[a..b]) {
                out[*k as usize] += yr * v;
            }
        }
    }
}

/// `A_c x` for an image on the geometry's grid.
pub fn forward_project(x: &Image, geom: &GeometrySpec, c: f64) -> Result<Sinogram> {
    x.check_matches(geom)?;
    let op = Projector::new(geom, c)?;
    let mut out = Sinogram::for_geometry(geom);
    op.apply(x.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// `A_cᵀ y`.
pub fn back_project(y: &Sinogram, geom: &GeometrySpec, c: f64) -> Result<Image> {
    y.check_matches(geom)?;
    let op = Projector::new(geom, c)?;
    let mut out = Image::zeros(geom.image_size);
    op.apply_adjoint(y.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Power-method estimate of `‖A_c‖₂²` from a seeded Gaussian start vector.
pub fn operator_norm_estimate(geom: &GeometrySpec, c: f64, n_power_iters: usize, seed: u64) -> Result<f64> {
    let op = Projector::new(geom, c)?;
    let start = random_start(op.cols(), seed);
    Ok(power_iteration(&op, &start, n_power_iters)?.0)
}

pub(crate) fn random_start(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Runs `iters` power iterations on `AᵀA` from `start`. Returns the Rayleigh
/// quotient `‖A v‖²` of the last normalized iterate together with the next
/// normalized iterate (usable as a warm start). The estimate never decreases
/// with `iters` and never exceeds `‖A‖²` beyond roundoff.
pub fn power_iteration<O: LinearOperator>(op: &O, start: &[f64], iters: usize) -> Result<(f64, Vec<f64>)> {
    if iters == 0 {
        return Err(Error::InvalidArgument("n_power_iters must be ≥ 1".into()));
    }
    let s = norm(start);
    if s == 0.0 || !s.is_finite() {
        return Err(Error::InvalidArgument("power iteration start vector is zero".into()));
    }
    let mut v: Vec<f64> = start.iter().map(|x| x / s).collect();
    let mut w = vec![0.0; op.rows()];
    let mut estimate = 0.0;
    for _ in 0..iters {
        op.apply(&v, &mut w);
        estimate = dot(&w, &w);
        op.apply_adjoint(&w, &mut v);
        let nv = norm(&v);
        if nv == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
    }
    Ok((estimate, v))
}
