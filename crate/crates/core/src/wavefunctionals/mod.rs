//! Wave functionals on the real coordinates of a theory's field content.
//!
//! Every analytic variant is normalized, so `2 log R` is the log of the
//! equilibrium density itself. The zero-point energy is dropped: the vacuum has
//! phase zero at all times.
//!
//! * [`GaussianFunctional`] - `log Psi = c + sum_r [-w_r (x_r - X_r)^2 / 2 + i P_r (x_r - X_r)]`.
//!   Vacua and coherent states live here.
//! * [`ExcitedFunctional`] - a vacuum times Fock expansions in the real
//!   oscillators, stored as independent factors over disjoint coordinate sets.
//! * [`SuperpositionFunctional`] - weighted sums, normalized on construction.
//! * [`GaugeExtended`] - a functional of a subset of coordinates, constant along
//!   the others (the longitudinal directions of the Valentini field).

mod builders;
pub mod grid;
pub mod spec;

pub use builders::{coherent, n_particle, one_particle_alpha, vacuum, SymmetricTensor, MAX_PARTICLES};
pub use grid::{GridSpec, GridWavefunction};
pub use spec::{Component, FunctionalSpec, ModeRef, ModeValue, TensorEntry};

use crate::error::{Error, Result};
use crate::theories::TheoryModel;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFunctional {
    pub width: Vec<Complex64>,
    pub center: Vec<f64>,
    pub momentum: Vec<f64>,
    /// Global `log N + i theta`; the real part keeps the functional normalized.
    pub log_prefactor: Complex64,
    pub time: f64,
}

impl GaussianFunctional {
    pub fn new(width: Vec<Complex64>, center: Vec<f64>, momentum: Vec<f64>) -> Result<Self> {
        if width.len() != center.len() || width.len() != momentum.len() {
            return Err(Error::InvalidParameter("width, center and momentum lengths differ".into()));
        }
        if width.iter().any(|w| !(w.re > 0.0) || !w.im.is_finite() || !w.re.is_finite()) {
            return Err(Error::Invariant("every width needs a positive real part".into()));
        }
        if center.iter().chain(momentum.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Invariant("non-finite center or momentum".into()));
        }
        let log_norm = width.iter().map(|w| 0.25 * (w.re / PI).ln()).sum::<f64>();
        Ok(GaussianFunctional { width, center, momentum, log_prefactor: Complex64::new(log_norm, 0.0), time: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.width.len()
    }

    pub fn log_psi(&self, x: &[f64]) -> Complex64 {
        let mut acc = self.log_prefactor;
        for r in 0..self.dim() {
            let dx = x[r] - self.center[r];
            acc += -0.5 * self.width[r] * dx * dx + Complex64::new(0.0, self.momentum[r] * dx);
        }
        acc
    }

    fn grad_log(&self, x: &[f64]) -> Vec<Complex64> {
        (0..self.dim())
            .map(|r| -self.width[r] * (x[r] - self.center[r]) + Complex64::new(0.0, self.momentum[r]))
            .collect()
    }

    /// Standard deviation of coordinate `r` under `|Psi|^2`.
    pub fn sigma(&self, r: usize) -> f64 {
        (0.5 / self.width[r].re).sqrt()
    }

    /// Exact evolution under `H = sum_r (kappa_r p^2 + nu_r x^2) / 2`.
    pub fn evolve(&self, kappa: &[f64], nu: &[f64], t: f64) -> Result<GaussianFunctional> {
        let mut out = self.clone();
        let mut log_factor = ZERO;
        for r in 0..self.dim() {
            let (k, v) = (kappa[r], nu[r]);
            if !(k * v >= 0.0) {
                return Err(Error::Unsupported("inverted oscillator".into()));
            }
            let omega = (k * v).sqrt();
            let z = omega * t;
            let sinc = if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
            let (a, b, c, d) = (z.cos(), k * t * sinc, -v * t * sinc, z.cos());
            let (x0, p0) = (self.center[r], self.momentum[r]);
            let (x1, p1) = (a * x0 + b * p0, c * x0 + d * p0);
            let a0 = Complex64::i() * self.width[r];
            let den = a0 * b + a;
            let at = (a0 * d + c) / den;
            out.width[r] = -Complex64::i() * at;
            out.center[r] = x1;
            out.momentum[r] = p1;
            // continuous branch of log(den): den(t) winds with omega t and is real at omega t = n pi
            let mut arg = den.arg();
            if omega > 0.0 {
                let n = (z / PI).floor();
                let target = n * PI + 0.5 * PI;
                arg += 2.0 * PI * ((target - arg) / (2.0 * PI)).round();
            }
            log_factor += -0.5 * Complex64::new(den.norm().ln(), arg);
            log_factor += Complex64::new(0.0, 0.5 * (p1 * x1 - p0 * x0) + 0.5 * omega * t);
        }
        out.log_prefactor += log_factor;
        out.time += t;
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockTerm {
    pub occupation: Vec<u8>,
    pub coef: Complex64,
}

/// Fock expansion over a set of real oscillators: `sum_t c_t prod_j h_{n_tj}(sqrt(w_j) x_j)`
/// with normalized Hermite polynomials `h_n = H_n / sqrt(2^n n!)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockFactor {
    pub coords: Vec<usize>,
    pub terms: Vec<FockTerm>,
}

struct HermiteTable {
    h: Vec<f64>,
    dh: Vec<f64>,
    d2h: Vec<f64>,
}

/// Normalized Hermite polynomials and their derivatives in `x` for `xi = sqrt(w) x`.
fn hermite_table(x: f64, w: f64, nmax: usize) -> HermiteTable {
    let s = w.sqrt();
    let xi = s * x;
    let mut h = vec![0.0; nmax + 1];
    h[0] = 1.0;
    if nmax >= 1 {
        h[1] = std::f64::consts::SQRT_2 * xi;
    }
    for n in 1..nmax {
        let nf = n as f64;
        h[n + 1] = (2.0 / (nf + 1.0)).sqrt() * xi * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
    }
    let mut dh = vec![0.0; nmax + 1];
    let mut d2h = vec![0.0; nmax + 1];
    for n in 1..=nmax {
        dh[n] = s * (2.0 * n as f64).sqrt() * h[n - 1];
        if n >= 2 {
            d2h[n] = s * s * (2.0 * n as f64).sqrt() * (2.0 * (n - 1) as f64).sqrt() * h[n - 2];
        }
    }
    HermiteTable { h, dh, d2h }
}

impl FockFactor {
    fn max_occupation(&self, j: usize) -> usize {
        self.terms.iter().map(|t| t.occupation[j] as usize).max().unwrap_or(0)
    }

    fn tables(&self, x: &[f64], width: &[Complex64]) -> Vec<HermiteTable> {
        self.coords
            .iter()
            .enumerate()
            .map(|(j, &r)| hermite_table(x[r], width[r].re, self.max_occupation(j)))
            .collect()
    }

    /// Value and gradient (over `self.coords`).
    fn value_grad(&self, x: &[f64], width: &[Complex64]) -> (Complex64, Vec<Complex64>) {
        let tabs = self.tables(x, width);
        let m = self.coords.len();
        let mut val = ZERO;
        let mut grad = vec![ZERO; m];
        let mut vals = vec![0.0; m];
        for t in &self.terms {
            for j in 0..m {
                vals[j] = tabs[j].h[t.occupation[j] as usize];
            }
            let prod: f64 = vals.iter().product();
            val += t.coef * prod;
            for j in 0..m {
                let mut p = tabs[j].dh[t.occupation[j] as usize];
                for (i, v) in vals.iter().enumerate() {
                    if i != j {
                        p *= v;
                    }
                }
                grad[j] += t.coef * p;
            }
        }
        (val, grad)
    }

    /// `F`, `dF/dd` and `d^2F/dd^2` along direction `d` (full-length vector).
    fn directional(&self, x: &[f64], width: &[Complex64], d: &[f64]) -> (Complex64, Complex64, Complex64) {
        let tabs = self.tables(x, width);
        let m = self.coords.len();
        let dd: Vec<f64> = self.coords.iter().map(|&r| d[r]).collect();
        let (mut f, mut f1, mut f2) = (ZERO, ZERO, ZERO);
        for t in &self.terms {
            let v: Vec<f64> = (0..m).map(|j| tabs[j].h[t.occupation[j] as usize]).collect();
            let v1: Vec<f64> = (0..m).map(|j| tabs[j].dh[t.occupation[j] as usize] * dd[j]).collect();
            let v2: Vec<f64> = (0..m).map(|j| tabs[j].d2h[t.occupation[j] as usize] * dd[j] * dd[j]).collect();
            let mut s0 = 1.0;
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            // running product rule: (f g)'' = f'' g + 2 f' g' + f g''
            for j in 0..m {
                s2 = s2 * v[j] + 2.0 * s1 * v1[j] + s0 * v2[j];
                s1 = s1 * v[j] + s0 * v1[j];
                s0 *= v[j];
            }
            f += t.coef * s0;
            f1 += t.coef * s1;
            f2 += t.coef * s2;
        }
        (f, f1, f2)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.iter().map(|t| t.coef.norm_sqr()).sum()
    }

    /// Value of the factor at `x` (full coordinate vector; only `self.coords` are read).
    pub fn value(&self, x: &[f64], width: &[Complex64]) -> Complex64 {
        self.value_grad(x, width).0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitedFunctional {
    /// A vacuum: real widths, zero center and momentum.
    pub base: GaussianFunctional,
    pub factors: Vec<FockFactor>,
    pub time: f64,
}

impl ExcitedFunctional {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Total number of quanta in the largest term of each factor, summed.
    pub fn degree(&self) -> usize {
        self.factors
            .iter()
            .map(|f| f.terms.iter().map(|t| t.occupation.iter().map(|n| *n as usize).sum::<usize>()).max().unwrap_or(0))
            .sum()
    }

    fn log_psi(&self, x: &[f64]) -> Result<Complex64> {
        let mut acc = self.base.log_psi(x);
        for f in &self.factors {
            let (v, _) = f.value_grad(x, &self.base.width);
            if !(v.norm() > 0.0) {
                return Err(Error::Degenerate);
            }
            acc += v.ln();
        }
        Ok(acc)
    }

    fn grad_log(&self, x: &[f64]) -> Result<(Complex64, Vec<Complex64>)> {
        let mut lp = self.base.log_psi(x);
        let mut g = self.base.grad_log(x);
        for f in &self.factors {
            let (v, fg) = f.value_grad(x, &self.base.width);
            if !(v.norm() > 0.0) {
                return Err(Error::Degenerate);
            }
            lp += v.ln();
            for (j, &r) in f.coords.iter().enumerate() {
                g[r] += fg[j] / v;
            }
        }
        if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Degenerate);
        }
        Ok((lp, g))
    }

    /// Expand the product of factors into one occupation map.
    pub fn expanded(&self) -> BTreeMap<Vec<(usize, u8)>, Complex64> {
        let mut acc: BTreeMap<Vec<(usize, u8)>, Complex64> = BTreeMap::new();
        acc.insert(Vec::new(), Complex64::new(1.0, 0.0));
        for f in &self.factors {
            let mut next = BTreeMap::new();
            for (occ, c) in &acc {
                for t in &f.terms {
                    let mut o = occ.clone();
                    for (j, &r) in f.coords.iter().enumerate() {
                        if t.occupation[j] > 0 {
                            o.push((r, t.occupation[j]));
                        }
                    }
                    o.sort();
                    *next.entry(o).or_insert(ZERO) += c * t.coef;
                }
            }
            acc = next;
        }
        acc
    }

    fn evolve(&self, kappa: &[f64], nu: &[f64], t: f64) -> Result<ExcitedFunctional> {
        for r in 0..self.dim() {
            let w = if kappa[r] == nu[r] { 1.0 } else { (nu[r] / kappa[r]).sqrt() };
            if (self.base.width[r].re - w).abs() > 1e-10 * w.max(1.0) || self.base.width[r].im != 0.0 {
                return Err(Error::Unsupported("excited state is not built on this theory's vacuum".into()));
            }
        }
        let mut out = self.clone();
        for f in &mut out.factors {
            for term in &mut f.terms {
                let e: f64 = f.coords.iter().zip(&term.occupation).map(|(&r, &n)| n as f64 * (kappa[r] * nu[r]).sqrt()).sum();
                term.coef *= Complex64::from_polar(1.0, -e * t);
            }
        }
        out.time += t;
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionFunctional {
    /// Weights already include the overall normalization.
    pub components: Vec<(Complex64, WaveFunctional)>,
}

impl SuperpositionFunctional {
    /// Normalize `sum_i c_i Psi_i`. Needs analytic inner products, which exist
    /// for Gaussian pairs and for excited states on a common vacuum.
    pub fn new(components: Vec<(Complex64, WaveFunctional)>) -> Result<Self> {
        if components.is_empty() || components.iter().all(|(c, _)| c.norm() == 0.0) {
            return Err(Error::InvalidParameter("superposition needs a nonzero weight".into()));
        }
        let d = components[0].1.dim();
        if components.iter().any(|(_, f)| f.dim() != d) {
            return Err(Error::BasisMismatch("superposition components differ in dimension".into()));
        }
        let mut n2 = ZERO;
        for (ci, fi) in &components {
            for (cj, fj) in &components {
                n2 += ci.conj() * cj * inner_product(fi, fj)?;
            }
        }
        if !(n2.re > 0.0) {
            return Err(Error::InvalidParameter("superposition has zero norm".into()));
        }
        let s = 1.0 / n2.re.sqrt();
        Ok(SuperpositionFunctional { components: components.into_iter().map(|(c, f)| (c * s, f)).collect() })
    }
}

/// A functional of the coordinates listed in `embed` and constant in the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeExtended {
    pub inner: Box<WaveFunctional>,
    /// For each outer coordinate, its inner index, or `None` for a flat direction.
    pub embed: Vec<Option<usize>>,
}

impl GaugeExtended {
    fn restrict(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.inner.dim()];
        for (r, e) in self.embed.iter().enumerate() {
            if let Some(i) = e {
                y[*i] = x[r];
            }
        }
        y
    }
    fn restrict_weights(&self, w: &[f64]) -> Vec<f64> {
        self.restrict(w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum WaveFunctional {
    Gaussian(GaussianFunctional),
    Excited(ExcitedFunctional),
    Superposition(SuperpositionFunctional),
    Gauge(GaugeExtended),
}

/// `log R` and `S` at a configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub log_r: f64,
    pub phase: f64,
}

fn log_sum(terms: &[Complex64]) -> Result<(Complex64, Vec<Complex64>)> {
    let m = terms.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::Degenerate);
    }
    let w: Vec<Complex64> = terms.iter().map(|z| (z - m).exp()).collect();
    let s: Complex64 = w.iter().sum();
    if !(s.norm() > 0.0) {
        return Err(Error::Degenerate);
    }
    Ok((s.ln() + m, w.iter().map(|wi| wi / s).collect()))
}

impl WaveFunctional {
    pub fn dim(&self) -> usize {
        match self {
            WaveFunctional::Gaussian(g) => g.dim(),
            WaveFunctional::Excited(e) => e.dim(),
            WaveFunctional::Superposition(s) => s.components[0].1.dim(),
            WaveFunctional::Gauge(g) => g.embed.len(),
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            WaveFunctional::Gaussian(g) => g.time,
            WaveFunctional::Excited(e) => e.time,
            WaveFunctional::Superposition(s) => s.components[0].1.time(),
            WaveFunctional::Gauge(g) => g.inner.time(),
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::BasisMismatch(format!("functional has {} coordinates, config {}", self.dim(), x.len())));
        }
        Ok(())
    }

    /// `log Psi` (real part `log R`, imaginary part `S` modulo `2 pi`).
    pub fn log_psi(&self, x: &[f64]) -> Result<Complex64> {
        self.check(x)?;
        match self {
            WaveFunctional::Gaussian(g) => Ok(g.log_psi(x)),
            WaveFunctional::Excited(e) => e.log_psi(x),
            WaveFunctional::Superposition(s) => {
                let terms: Vec<Complex64> = s
                    .components
                    .iter()
                    .filter(|(c, _)| c.norm() > 0.0)
                    .map(|(c, f)| f.log_psi(x).map(|l| l + c.ln()))
                    .collect::<Result<_>>()?;
                Ok(log_sum(&terms)?.0)
            }
            WaveFunctional::Gauge(g) => g.inner.log_psi(&g.restrict(x)),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let l = self.log_psi(x)?;
        Ok(Evaluation { log_r: l.re, phase: l.im })
    }

    /// `log Psi` and its gradient over the real coordinates.
    pub fn grad_log_psi(&self, x: &[f64]) -> Result<(Complex64, Vec<Complex64>)> {
        self.check(x)?;
        match self {
            WaveFunctional::Gaussian(g) => Ok((g.log_psi(x), g.grad_log(x))),
            WaveFunctional::Excited(e) => e.grad_log(x),
            WaveFunctional::Superposition(s) => {
                let mut logs = Vec::new();
                let mut grads = Vec::new();
                for (c, f) in s.components.iter().filter(|(c, _)| c.norm() > 0.0) {
                    match f.grad_log_psi(x) {
                        Ok((l, g)) => {
                            logs.push(l + c.ln());
                            grads.push(g);
                        }
                        // a component node is not a node of the sum; fall back to its value only
                        Err(Error::Degenerate) => continue,
                        Err(e) => return Err(e),
                    }
                }
                let (l, w) = log_sum(&logs)?;
                let mut g = vec![ZERO; x.len()];
                for (wi, gi) in w.iter().zip(&grads) {
                    for r in 0..g.len() {
                        g[r] += wi * gi[r];
                    }
                }
                Ok((l, g))
            }
            WaveFunctional::Gauge(ge) => {
                let (l, gi) = ge.inner.grad_log_psi(&ge.restrict(x))?;
                let g = ge.embed.iter().map(|e| e.map(|i| gi[i]).unwrap_or(ZERO)).collect();
                Ok((l, g))
            }
        }
    }

    /// `dS/dx_r` at every coordinate.
    pub fn phase_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.grad_log_psi(x)?.1.iter().map(|z| z.im).collect())
    }

    /// `d log R / dx_r` at every coordinate.
    pub fn amplitude_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.grad_log_psi(x)?.1.iter().map(|z| z.re).collect())
    }

    /// `(d^2 Psi / dd^2) / Psi` along direction `d`.
    pub fn second_directional(&self, x: &[f64], d: &[f64]) -> Result<Complex64> {
        self.check(x)?;
        match self {
            WaveFunctional::Gaussian(g) => {
                let gl = g.grad_log(x);
                let first: Complex64 = gl.iter().zip(d).map(|(a, b)| a * b).sum();
                let second: Complex64 = g.width.iter().zip(d).map(|(w, b)| -w * b * b).sum();
                Ok(second + first * first)
            }
            WaveFunctional::Excited(e) => {
                let gl = e.base.grad_log(x);
                let mut first: Complex64 = gl.iter().zip(d).map(|(a, b)| a * b).sum();
                let mut second: Complex64 = e.base.width.iter().zip(d).map(|(w, b)| -w * b * b).sum();
                for f in &e.factors {
                    let (v, v1, v2) = f.directional(x, &e.base.width, d);
                    if !(v.norm() > 0.0) {
                        return Err(Error::Degenerate);
                    }
                    let r1 = v1 / v;
                    first += r1;
                    second += v2 / v - r1 * r1;
                }
                Ok(second + first * first)
            }
            WaveFunctional::Superposition(s) => {
                let mut logs = Vec::new();
                let mut ratios = Vec::new();
                for (c, f) in s.components.iter().filter(|(c, _)| c.norm() > 0.0) {
                    logs.push(f.log_psi(x)? + c.ln());
                    ratios.push(f.second_directional(x, d)?);
                }
                let (_, w) = log_sum(&logs)?;
                Ok(w.iter().zip(&ratios).map(|(a, b)| a * b).sum())
            }
            WaveFunctional::Gauge(ge) => ge.inner.second_directional(&ge.restrict(x), &ge.restrict(d)),
        }
    }

    pub(crate) fn evolve_with(&self, kappa: &[f64], nu: &[f64], t: f64) -> Result<WaveFunctional> {
        Ok(match self {
            WaveFunctional::Gaussian(g) => WaveFunctional::Gaussian(g.evolve(kappa, nu, t)?),
            WaveFunctional::Excited(e) => WaveFunctional::Excited(e.evolve(kappa, nu, t)?),
            WaveFunctional::Superposition(s) => WaveFunctional::Superposition(SuperpositionFunctional {
                components: s
                    .components
                    .iter()
                    .map(|(c, f)| f.evolve_with(kappa, nu, t).map(|g| (*c, g)))
                    .collect::<Result<_>>()?,
            }),
            WaveFunctional::Gauge(ge) => WaveFunctional::Gauge(GaugeExtended {
                inner: Box::new(ge.inner.evolve_with(&ge.restrict_weights(kappa), &ge.restrict_weights(nu), t)?),
                embed: ge.embed.clone(),
            }),
        })
    }

    pub fn as_gaussian(&self) -> Option<&GaussianFunctional> {
        match self {
            WaveFunctional::Gaussian(g) => Some(g),
            _ => None,
        }
    }
}

/// Exact evolution under a quadratic theory.
pub fn evolve_quadratic(functional: &WaveFunctional, theory: &TheoryModel, t: f64) -> Result<WaveFunctional> {
    if !theory.is_quadratic() {
        return Err(Error::NonQuadratic(theory.kind.name().into()));
    }
    if functional.dim() != theory.dim() {
        return Err(Error::BasisMismatch("functional does not match the theory's field content".into()));
    }
    functional.evolve_with(theory.kinetic(), theory.potential(), t)
}

fn gaussian_inner(a: &GaussianFunctional, b: &GaussianFunctional) -> Complex64 {
    // integral of conj(a) b, one coordinate at a time
    let mut log = a.log_prefactor.conj() + b.log_prefactor;
    for r in 0..a.dim() {
        let (w1, x1, p1) = (a.width[r].conj(), a.center[r], a.momentum[r]);
        let (w2, x2, p2) = (b.width[r], b.center[r], b.momentum[r]);
        let aa = (w1 + w2) * 0.5;
        let bb = w1 * x1 + w2 * x2 + Complex64::new(0.0, p2 - p1);
        let cc = -0.5 * w1 * x1 * x1 - 0.5 * w2 * x2 * x2 + Complex64::new(0.0, p1 * x1 - p2 * x2);
        log += 0.5 * (Complex64::new(PI, 0.0) / aa).ln() + bb * bb / (4.0 * aa) + cc;
    }
    log.exp()
}

/// `<a|b>`, where an analytic form exists.
pub fn inner_product(a: &WaveFunctional, b: &WaveFunctional) -> Result<Complex64> {
    use WaveFunctional::*;
    match (a, b) {
        (Gaussian(x), Gaussian(y)) => Ok(gaussian_inner(x, y)),
        (Excited(x), Excited(y)) => {
            if x.base.width != y.base.width {
                return Err(Error::Unsupported("excited states on different vacua".into()));
            }
            let ex = x.expanded();
            let ey = y.expanded();
            Ok(ex.iter().filter_map(|(k, c)| ey.get(k).map(|d| c.conj() * d)).sum())
        }
        // a vacuum only overlaps the zero-quantum term of an excited state
        (Gaussian(g), Excited(e)) | (Excited(e), Gaussian(g)) if is_vacuum_of(g, &e.base) => {
            let phase = Complex64::new(0.0, e.base.log_prefactor.im - g.log_prefactor.im).exp();
            let c = e.expanded().get(&Vec::new()).copied().unwrap_or(ZERO) * phase;
            Ok(if matches!(a, Gaussian(_)) { c } else { c.conj() })
        }
        (Superposition(s), other) => {
            let mut acc = ZERO;
            for (c, f) in &s.components {
                acc += c.conj() * inner_product(f, other)?;
            }
            Ok(acc)
        }
        (other, Superposition(s)) => {
            let mut acc = ZERO;
            for (c, f) in &s.components {
                acc += c * inner_product(other, f)?;
            }
            Ok(acc)
        }
        (Gauge(x), Gauge(y)) if x.embed == y.embed => inner_product(&x.inner, &y.inner),
        _ => Err(Error::Unsupported("no analytic inner product for this pair".into())),
    }
}

fn is_vacuum_of(g: &GaussianFunctional, base: &GaussianFunctional) -> bool {
    g.width == base.width && g.center.iter().chain(&g.momentum).all(|v| *v == 0.0)
}

/// Local expectation operators of the scalar field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `(dS/dphi) / sqrt 2`.
    PsiImag,
    /// `(phi + i dS/dphi) / sqrt 2`.
    PsiFull,
    /// `Re[Psi^* psi^dag psi Psi] / |Psi|^2`.
    NumberDensity,
}

/// Local expectation value of a field operator at each point. Needs a theory
/// whose first sector is a real scalar field.
pub fn local_expectation(
    theory: &TheoryModel,
    functional: &WaveFunctional,
    config: &[f64],
    kind: OperatorKind,
    points: &[[f64; 3]],
) -> Result<Vec<Complex64>> {
    let sector = &theory.space().sectors()[0];
    if theory.space().sectors().len() != 1 || sector.basis.kind() != crate::mode_basis::FieldKind::ScalarReal {
        return Err(Error::Unsupported("local expectations are defined for a single real scalar field".into()));
    }
    let b = &sector.basis;
    let (_, grad) = functional.grad_log_psi(config)?;
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        let e: Vec<f64> = (0..b.dim()).map(|r| b.mode_function(r, *x)[0].re).collect();
        let phi: f64 = e.iter().zip(config).map(|(a, b)| a * b).sum();
        let ds: f64 = e.iter().zip(&grad).map(|(a, g)| a * g.im).sum();
        let v = match kind {
            OperatorKind::PsiImag => Complex64::new(ds / std::f64::consts::SQRT_2, 0.0),
            OperatorKind::PsiFull => Complex64::new(phi, ds) / std::f64::consts::SQRT_2,
            OperatorKind::NumberDensity => {
                let delta0: f64 = e.iter().map(|a| a * a).sum();
                let dd = functional.second_directional(config, &e)?;
                Complex64::new(0.5 * (phi * phi - delta0 - dd.re), 0.0)
            }
        };
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
