//! Wavefunctions sampled on a small periodic grid (at most three dimensions).

use super::Evaluation;
use crate::error::{Error, Result};
use crate::spectral::{lagrange_weights, Spectral};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Points used by the local interpolant.
pub const INTERP_POINTS: usize = 6;

/// Periodic grid: axis `a` has `shape[a]` nodes at `lower[a] + i extent[a] / shape[a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub shape: Vec<usize>,
    pub lower: Vec<f64>,
    pub extent: Vec<f64>,
}

impl GridSpec {
    pub fn new(shape: Vec<usize>, lower: Vec<f64>, extent: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 || shape.len() != lower.len() || shape.len() != extent.len() {
            return Err(Error::InvalidParameter("grid needs 1 to 3 axes with matching lower/extent".into()));
        }
        if shape.iter().any(|n| *n < INTERP_POINTS) || extent.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidParameter("grid axes need >= 6 nodes and positive extent".into()));
        }
        Ok(GridSpec { shape, lower, extent })
    }

    /// One-dimensional grid centred on zero.
    pub fn line(n: usize, extent: f64) -> Result<Self> {
        Self::new(vec![n], vec![-0.5 * extent], vec![extent])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.shape[axis] as f64
    }
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }
    /// Coordinates of flat node index `idx`.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let mut rem = idx;
        let mut x = vec![0.0; self.dim()];
        for a in (0..self.dim()).rev() {
            x[a] = self.lower[a] + (rem % self.shape[a]) as f64 * self.spacing(a);
            rem /= self.shape[a];
        }
        x
    }
    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        (0..self.shape[axis]).map(|i| self.lower[axis] + i as f64 * self.spacing(axis)).collect()
    }
    pub fn spectral(&self) -> Spectral {
        Spectral::new(&self.shape, &self.extent)
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(a, v)| *v >= self.lower[a] && *v <= self.lower[a] + self.extent[a])
    }

    /// Interpolate node data at `x` (periodic wrap of the stencil).
    pub fn interpolate<T>(&self, data: &[T], x: &[f64]) -> Result<T>
    where
        T: Copy + Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    {
        if x.len() != self.dim() {
            return Err(Error::BasisMismatch("point dimension differs from grid".into()));
        }
        if !self.contains(x) {
            return Err(Error::InvalidParameter(format!("point {x:?} outside the grid")));
        }
        let stencils: Vec<(isize, Vec<f64>)> =
            (0..self.dim()).map(|a| lagrange_weights((x[a] - self.lower[a]) / self.spacing(a), INTERP_POINTS)).collect();
        let wrap = |a: usize, i: isize| i.rem_euclid(self.shape[a] as isize) as usize;
        let mut acc = T::default();
        match self.dim() {
            1 => {
                let (s0, w0) = &stencils[0];
                for (j, w) in w0.iter().enumerate() {
                    acc += data[wrap(0, s0 + j as isize)] * *w;
                }
            }
            2 => {
                let ((s0, w0), (s1, w1)) = (&stencils[0], &stencils[1]);
                for (j, wa) in w0.iter().enumerate() {
                    let i0 = wrap(0, s0 + j as isize);
                    for (k, wb) in w1.iter().enumerate() {
                        acc += data[i0 * self.shape[1] + wrap(1, s1 + k as isize)] * (wa * wb);
                    }
                }
            }
            _ => {
                let ((s0, w0), (s1, w1), (s2, w2)) = (&stencils[0], &stencils[1], &stencils[2]);
                for (j, wa) in w0.iter().enumerate() {
                    let i0 = wrap(0, s0 + j as isize);
                    for (k, wb) in w1.iter().enumerate() {
                        let i1 = wrap(1, s1 + k as isize);
                        for (l, wc) in w2.iter().enumerate() {
                            let idx = (i0 * self.shape[1] + i1) * self.shape[2] + wrap(2, s2 + l as isize);
                            acc += data[idx] * (wa * wb * wc);
                        }
                    }
                }
            }
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWavefunction {
    pub grid: GridSpec,
    /// Row-major node values.
    pub values: Vec<Complex64>,
    pub time: f64,
}

/// Node values of `psi` and its first derivatives, for repeated velocity lookups.
#[derive(Clone, Debug)]
pub struct GradientField {
    grid: GridSpec,
    psi: Vec<Complex64>,
    dpsi: Vec<Vec<Complex64>>,
}

impl GradientField {
    /// `Im(grad psi / psi)` at `x`.
    pub fn phase_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.grid.interpolate(&self.psi, x)?;
        if !(p.norm() > 1e-150) {
            return Err(Error::Degenerate);
        }
        self.dpsi.iter().map(|d| Ok((self.grid.interpolate(d, x)? / p).im)).collect()
    }
}

impl GridWavefunction {
    /// Checks the discrete norm is 1 within 1e-8.
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BasisMismatch("value count differs from grid size".into()));
        }
        let g = GridWavefunction { grid, values, time: 0.0 };
        let n = g.norm_sqr();
        if (n - 1.0).abs() > 1e-8 {
            return Err(Error::Invariant(format!("grid norm^2 is {n}")));
        }
        Ok(g)
    }

    pub fn normalized(grid: GridSpec, mut values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BasisMismatch("value count differs from grid size".into()));
        }
        let n: f64 = values.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.cell_volume();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero or non-finite wavefunction".into()));
        }
        let s = 1.0 / n.sqrt();
        values.iter_mut().for_each(|z| *z *= s);
        Self::new(grid, values)
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Self::normalized(grid, values)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let p = self.grid.interpolate(&self.values, x)?;
        if !(p.norm() > 0.0) {
            return Err(Error::Degenerate);
        }
        Ok(Evaluation { log_r: p.norm().ln(), phase: p.arg() })
    }

    pub fn gradient_field(&self) -> GradientField {
        let sp = self.grid.spectral();
        GradientField {
            grid: self.grid.clone(),
            psi: self.values.clone(),
            dpsi: (0..self.grid.dim()).map(|a| sp.derivative(&self.values, a, 1)).collect(),
        }
    }

    /// `dS/dx` at `x` via spectral derivatives and local interpolation.
    pub fn phase_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.gradient_field().phase_gradient(x)
    }
}
