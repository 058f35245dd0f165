//! Minimal raster plots written as 16-bit PGM.

use std::path::Path;

use ctcor::io::write_pgm_u16;
use ctcor::Result;

pub const INK: u16 = 0;
pub const AXIS: u16 = 32768;
pub const BLANK: u16 = u16::MAX;

/// Row-major grayscale canvas, white by default.
#[derive(Debug, Clone, PartialEq)]
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u16>,
}

impl Canvas {
    pub fn new(width: usize, height: usize) -> Self {
        Canvas {
            width,
            height,
            pixels: vec![BLANK; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    fn set(&mut self, col: usize, row: usize, v: u16) {
        self.pixels[row * self.width + col] = v;
    }

    /// Inclusive vertical segment in one column.
    fn vline(&mut self, col: usize, r0: usize, r1: usize, v: u16) {
        for r in r0.min(r1)..=r0.max(r1) {
            self.set(col, r, v);
        }
    }

    fn hline(&mut self, row: usize, v: u16) {
        for c in 0..self.width {
            self.set(c, row, v);
        }
    }

    /// Topmost inked row of a column, if any.
    pub fn top_of_column(&self, col: usize) -> Option<usize> {
        (0..self.height).find(|r| self.get(col, *r) == INK)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_pgm_u16(path, self.width, self.height, &self.pixels)
    }
}

/// Maps `v ∈ [lo, hi]` to a row, `hi` at the top. A degenerate range maps
/// everything to the middle row.
fn row_of(v: f64, lo: f64, hi: f64, height: usize) -> usize {
    if hi <= lo || !v.is_finite() {
        return height / 2;
    }
    let t = ((hi - v) / (hi - lo)).clamp(0.0, 1.0);
    (t * (height - 1) as f64).round() as usize
}

fn finite_range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        })
}

/// Line plot of a series against its index. Each column covers an equal
/// share of the samples and spans their range, joined to the previous column.
pub fn trace(values: &[f64], max_width: usize, height: usize) -> Canvas {
    let n = values.len();
    let width = n.clamp(1, max_width.max(1));
    let mut canvas = Canvas::new(width, height);
    if n == 0 {
        return canvas;
    }
    let (lo, hi) = finite_range(values);
    let mut prev: Option<usize> = None;
    for col in 0..width {
        let start = col * n / width;
        let end = ((col + 1) * n / width).max(start + 1);
        let rows: Vec<usize> = values[start..end].iter().map(|v| row_of(*v, lo, hi, height)).collect();
        let mut r0 = *rows.iter().min().unwrap();
        let mut r1 = *rows.iter().max().unwrap();
        if let Some(p) = prev {
            r0 = r0.min(p);
            r1 = r1.max(p);
        }
        canvas.vline(col, r0, r1, INK);
        prev = rows.last().copied();
    }
    canvas
}

/// Bin counts over the finite range of `values`; the top edge is included
/// in the last bin and a constant series lands in a single bin.
pub fn bin_counts(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins];
    let (lo, hi) = finite_range(values);
    for v in values.iter().filter(|v| v.is_finite()) {
        let k = if hi > lo {
            (((v - lo) / (hi - lo)) * bins as f64).floor() as usize
        } else {
            bins / 2
        };
        counts[k.min(bins - 1)] += 1;
    }
    counts
}

/// Histogram with `bins` bars of `bar_width` pixels, tallest bar full height.
pub fn histogram(values: &[f64], bins: usize, bar_width: usize, height: usize) -> Canvas {
    let counts = bin_counts(values, bins);
    let peak = counts.iter().copied().max().unwrap_or(0);
    let mut canvas = Canvas::new(bins * bar_width, height);
    for (k, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let top = row_of(n as f64, 0.0, peak as f64, height);
        for col in k * bar_width..(k + 1) * bar_width {
            canvas.vline(col, top, height - 1, INK);
        }
    }
    canvas
}

/// Bar chart of autocorrelations on a fixed `[-1, 1]` axis: value 1 reaches
/// the top row, the zero line is drawn in gray.
pub fn acf_bars(acf: &[f64], bar_width: usize, height: usize) -> Canvas {
    let mut canvas = Canvas::new(acf.len().max(1) * bar_width, height);
    let zero = row_of(0.0, -1.0, 1.0, height);
    canvas.hline(zero, AXIS);
    for (lag, v) in acf.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        let r = row_of(*v, -1.0, 1.0, height);
        for col in lag * bar_width..(lag + 1) * bar_width {
            canvas.vline(col, zero, r, INK);
        }
    }
    canvas
}
