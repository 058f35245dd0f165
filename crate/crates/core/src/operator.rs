//! Linear operator abstraction shared by the projector, the solver and tests.

use std::sync::atomic::{AtomicU64, Ordering};

/// A real linear map `A: ℝⁿ → ℝᵐ` together with its adjoint.
pub trait LinearOperator {
    /// Output dimension `m`.
    fn rows(&self) -> usize;
    /// Input dimension `n`.
    fn cols(&self) -> usize;
    /// `out = A x`. `out` is overwritten.
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = Aᵀ y`. `out` is overwritten.
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]);
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply(x, out)
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        (**self).apply_adjoint(y, out)
    }
}

/// Tally of operator applications. One forward plus one adjoint counts as two
/// forward-projection equivalents.
#[derive(Debug, Default)]
pub struct ProjectionCounter {
    forward: AtomicU64,
    adjoint: AtomicU64,
}

impl ProjectionCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&self) -> u64 {
        self.forward.load(Ordering::Relaxed)
    }

    pub fn adjoint(&self) -> u64 {
        self.adjoint.load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        self.forward() + self.adjoint()
    }

    pub fn reset(&self) {
        self.forward.store(0, Ordering::Relaxed);
        self.adjoint.store(0, Ordering::Relaxed);
    }

    pub(crate) fn add_forward(&self) {
        self.forward.fetch_add(1, Ordering::Relaxed);
    }
}

/// Wraps an operator and records every application in a [`ProjectionCounter`].
pub struct Counted<'a, O> {
    pub inner: O,
    pub counter: &'a ProjectionCounter,
}

impl<'a, O: LinearOperator> Counted<'a, O> {
    pub fn new(inner: O, counter: &'a ProjectionCounter) -> Self {
        Counted { inner, counter }
    }
}

impl<O: LinearOperator> LinearOperator for Counted<'_, O> {
    fn rows(&self) -> usize {
        self.inner.rows()
    }
    fn cols(&self) -> usize {
        self.inner.cols()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.counter.forward.fetch_add(1, Ordering::Relaxed);
        self.inner.apply(x, out)
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        self.counter.adjoint.fetch_add(1, Ordering::Relaxed);
        self.inner.apply_adjoint(y, out)
    }
}

/// Row-major dense matrix. Only meant for small problems and test oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
    }
}
