//! FFT plumbing for periodic grids (row-major, axis 0 slowest).

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Angular wavenumbers `2 pi m / extent` in FFT order.
pub fn wavenumbers(n: usize, extent: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let m = if i < n.div_ceil(2) { i as isize } else { i as isize - n as isize };
            2.0 * PI * m as f64 / extent
        })
        .collect()
}

pub struct Spectral {
    shape: Vec<usize>,
    k: Vec<Vec<f64>>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("shape", &self.shape).finish()
    }
}

impl Spectral {
    pub fn new(shape: &[usize], extent: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        Spectral {
            shape: shape.to_vec(),
            k: shape.iter().zip(extent).map(|(n, l)| wavenumbers(*n, *l)).collect(),
            fwd: shape.iter().map(|n| planner.plan_fft_forward(*n)).collect(),
            inv: shape.iter().map(|n| planner.plan_fft_inverse(*n)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        let n = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let outer: usize = self.shape[..axis].iter().product();
        let plan = if inverse { &self.inv[axis] } else { &self.fwd[axis] };
        if inner == 1 {
            plan.process(data);
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                for j in 0..n {
                    line[j] = data[base + j * inner];
                }
                plan.process(&mut line);
                for j in 0..n {
                    data[base + j * inner] = line[j];
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        for a in 0..self.shape.len() {
            self.transform_axis(data, a, false);
        }
    }

    /// Normalized inverse of [`Spectral::forward`].
    pub fn inverse(&self, data: &mut [Complex64]) {
        for a in 0..self.shape.len() {
            self.transform_axis(data, a, true);
        }
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Wave vector of flat spectral index `idx`.
    pub fn k_at(&self, idx: usize) -> Vec<f64> {
        let mut rem = idx;
        let mut k = vec![0.0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            k[a] = self.k[a][rem % self.shape[a]];
            rem /= self.shape[a];
        }
        k
    }

    /// Multiply by `symbol(k)` in Fourier space.
    pub fn apply(&self, values: &[Complex64], symbol: impl Fn(&[f64]) -> Complex64) -> Vec<Complex64> {
        let mut d = values.to_vec();
        self.forward(&mut d);
        for (i, z) in d.iter_mut().enumerate() {
            *z *= symbol(&self.k_at(i));
        }
        self.inverse(&mut d);
        d
    }

    /// `d^order / dx_axis^order`. The Nyquist component is dropped for odd orders.
    pub fn derivative(&self, values: &[Complex64], axis: usize, order: u32) -> Vec<Complex64> {
        let n = self.shape[axis];
        let kmax = if n % 2 == 0 { Some(self.k[axis][n / 2]) } else { None };
        self.apply(values, |k| {
            let ka = k[axis];
            if order % 2 == 1 && Some(ka) == kmax {
                return Complex64::new(0.0, 0.0);
            }
            Complex64::new(0.0, ka).powu(order)
        })
    }
}

/// Periodic Lagrange interpolation weights of `points` nodes around fractional index `u`.
pub fn lagrange_weights(u: f64, points: usize) -> (isize, Vec<f64>) {
    let start = u.floor() as isize - (points as isize / 2 - 1);
    let w = (0..points)
        .map(|j| {
            let xj = (start + j as isize) as f64;
            let mut p = 1.0;
            for m in 0..points {
                if m != j {
                    let xm = (start + m as isize) as f64;
                    p *= (u - xm) / (xj - xm);
                }
            }
            p
        })
        .collect();
    (start, w)
}
