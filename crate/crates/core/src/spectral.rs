//! Two-dimensional FFTs on row-major square arrays, plus the zero-padded
//! variants used by the free-space convolution.

use std::fmt;
use std::sync::{Arc, OnceLock};

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

pub type C<T> = Complex<T>;

/// Forward/inverse plans for one side length.
pub(crate) struct Plan<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> Plan<T> {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plan {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized forward transform over both axes.
    pub(crate) fn forward(&self, a: &mut Array2<C<T>>) {
        self.rows(a, &self.forward, self.n);
        self.columns(a, &self.forward);
    }

    /// Inverse transform including the `1/n^2` normalization.
    pub(crate) fn inverse(&self, a: &mut Array2<C<T>>) {
        self.columns(a, &self.inverse);
        self.rows(a, &self.inverse, self.n);
        let scale = T::one() / T::from_usize_lossy(self.n * self.n);
        a.mapv_inplace(|z| z * scale);
    }

    /// Forward transform of an array whose rows `live_rows..` are zero.
    pub(crate) fn forward_sparse_rows(&self, a: &mut Array2<C<T>>, live_rows: usize) {
        self.rows(a, &self.forward, live_rows);
        self.columns(a, &self.forward);
    }

    /// Inverse transform that only produces rows `..live_rows` correctly.
    pub(crate) fn inverse_leading_rows(&self, a: &mut Array2<C<T>>, live_rows: usize) {
        self.columns(a, &self.inverse);
        self.rows(a, &self.inverse, live_rows);
        let scale = T::one() / T::from_usize_lossy(self.n * self.n);
        a.slice_mut(ndarray::s![..live_rows, ..])
            .mapv_inplace(|z| z * scale);
    }

    fn rows(&self, a: &mut Array2<C<T>>, fft: &Arc<dyn Fft<T>>, count: usize) {
        debug_assert_eq!(a.dim(), (self.n, self.n));
        let data = a
            .as_slice_mut()
            .expect("spectral arrays are in standard layout");
        fft.process(&mut data[..count * self.n]);
    }

    fn columns(&self, a: &mut Array2<C<T>>, fft: &Arc<dyn Fft<T>>) {
        let n = self.n;
        let mut t: Vec<C<T>> = Vec::with_capacity(n * n);
        for col in a.axis_iter(Axis(1)) {
            t.extend(col.iter().copied());
        }
        fft.process(&mut t);
        for (j, mut col) in a.axis_iter_mut(Axis(1)).enumerate() {
            for (dst, src) in col.iter_mut().zip(&t[j * n..(j + 1) * n]) {
                *dst = *src;
            }
        }
    }
}

/// Lazily planned transforms for a grid side `n` and its `2n` padding.
pub(crate) struct Plans<T: Real> {
    pub(crate) base: Plan<T>,
    padded: OnceLock<Plan<T>>,
    /// Free-space Green's function multiplier on the padded grid.
    pub(crate) kernel: OnceLock<Array2<T>>,
}

impl<T: Real> Plans<T> {
    pub(crate) fn new(n: usize) -> Self {
        Plans {
            base: Plan::new(n),
            padded: OnceLock::new(),
            kernel: OnceLock::new(),
        }
    }

    pub(crate) fn padded(&self) -> &Plan<T> {
        self.padded.get_or_init(|| Plan::new(2 * self.base.n))
    }
}

impl<T: Real> fmt::Debug for Plans<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Plans(n = {})", self.base.n)
    }
}

pub(crate) fn to_complex<T: Real>(a: &Array2<T>) -> Array2<C<T>> {
    a.mapv(|x| C::new(x, T::zero()))
}

pub(crate) fn real_part<T: Real>(a: &Array2<C<T>>) -> Array2<T> {
    a.mapv(|z| z.re)
}
