//! Overlap of `|Psi|^2` densities: Monte Carlo estimators, closed forms for
//! Gaussians, and scans over families of states.

use crate::ensemble_stats::sample_equilibrium;
use crate::error::{Error, Result};
use crate::mode_basis::FieldKind;
use crate::rng::{rng, split};
use crate::theories::TheoryModel;
use crate::wavefunctionals::{n_particle, one_particle_alpha, vacuum, GaussianFunctional, SymmetricTensor, WaveFunctional};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Overlap below this counts as negligible.
pub const NEGLIGIBLE_OVERLAP: f64 = 0.1;
/// Smallest Kish effective sample size accepted from the importance sampler.
pub const ESS_FLOOR: f64 = 100.0;

/// A normalized probability density that can be sampled.
pub trait Density: Sync {
    fn dim(&self) -> usize;
    /// `ln rho(x)`; `-inf` where the density vanishes.
    fn log_density(&self, x: &[f64]) -> f64;
    fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>>;
}

impl Density for WaveFunctional {
    fn dim(&self) -> usize {
        WaveFunctional::dim(self)
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        match self.log_psi(x) {
            Ok(l) => 2.0 * l.re,
            Err(_) => f64::NEG_INFINITY,
        }
    }
    fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        Ok(sample_equilibrium(self, n, seed)?.members)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// `int sqrt(rho1 rho2)`
    Bhattacharyya,
    /// `int min(rho1, rho2)`
    MinOverlap,
}

impl Estimator {
    /// Integrand divided by the mixture `(rho1 + rho2) / 2`, from log densities.
    fn weight(self, l1: f64, l2: f64) -> f64 {
        if l1 == f64::NEG_INFINITY || l2 == f64::NEG_INFINITY {
            return 0.0;
        }
        let d = l1 - l2;
        match self {
            Estimator::Bhattacharyya => 1.0 / (0.5 * d).cosh(),
            Estimator::MinOverlap => 2.0 / (1.0 + d.abs().exp()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub estimator: Estimator,
    /// Monte Carlo estimate.
    pub estimate: f64,
    pub std_err: f64,
    pub samples: usize,
    /// Kish effective sample size of the importance weights.
    pub ess: f64,
    /// Closed form, when one exists for the pair.
    pub analytic: Option<f64>,
}

impl OverlapReport {
    /// The closed form when available, otherwise the estimate.
    pub fn value(&self) -> f64 {
        self.analytic.unwrap_or(self.estimate)
    }
    pub fn is_negligible(&self, threshold: f64) -> bool {
        self.value() < threshold
    }
}

/// Both estimators on one set of samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapPair {
    pub bhattacharyya: OverlapReport,
    pub min_overlap: OverlapReport,
}

fn gaussians<'a>(a: &'a WaveFunctional, b: &'a WaveFunctional) -> Option<(&'a GaussianFunctional, &'a GaussianFunctional)> {
    match (a, b) {
        (WaveFunctional::Gauge(x), WaveFunctional::Gauge(y)) if x.embed == y.embed => gaussians(&x.inner, &y.inner),
        _ => Some((a.as_gaussian()?, b.as_gaussian()?)),
    }
}

/// Closed-form Bhattacharyya coefficient of two Gaussian densities.
pub fn gaussian_bhattacharyya(a: &GaussianFunctional, b: &GaussianFunctional) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::BasisMismatch("functionals differ in dimension".into()));
    }
    let mut log_bc = 0.0;
    for i in 0..a.dim() {
        let (s1, s2) = (a.sigma(i), b.sigma(i));
        let v = s1 * s1 + s2 * s2;
        let d = a.center[i] - b.center[i];
        log_bc += 0.5 * (2.0 * s1 * s2 / v).ln() - d * d / (4.0 * v);
    }
    Ok(log_bc.exp())
}

/// Closed-form Bhattacharyya coefficient when both functionals are Gaussian.
pub fn analytic_bhattacharyya(a: &WaveFunctional, b: &WaveFunctional) -> Option<f64> {
    let (g1, g2) = gaussians(a, b)?;
    gaussian_bhattacharyya(g1, g2).ok()
}

struct Weights {
    first: Vec<(f64, f64)>,
    second: Vec<(f64, f64)>,
}

/// Log densities under both arguments at `N/2` samples from each.
fn mixture_logs(a: &dyn Density, b: &dyn Density, n: usize, seed: u64) -> Result<Weights> {
    if a.dim() != b.dim() {
        return Err(Error::BasisMismatch("densities differ in dimension".into()));
    }
    if n < 4 {
        return Err(Error::InvalidParameter("need at least 4 samples".into()));
    }
    let n1 = n / 2;
    let xs = a.sample(n1, split(seed, "overlap-first"))?;
    let ys = b.sample(n - n1, split(seed, "overlap-second"))?;
    let logs = |pts: &[Vec<f64>]| pts.par_iter().map(|x| (a.log_density(x), b.log_density(x))).collect::<Vec<_>>();
    Ok(Weights { first: logs(&xs), second: logs(&ys) })
}

fn report(w: &Weights, est: Estimator) -> Result<OverlapReport> {
    let stratum = |v: &[(f64, f64)]| {
        let ws: Vec<f64> = v.iter().map(|(l1, l2)| est.weight(*l1, *l2)).collect();
        let m = ws.iter().sum::<f64>() / ws.len() as f64;
        let var = ws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (ws.len() as f64 - 1.0);
        (ws, m, var)
    };
    let (w1, m1, v1) = stratum(&w.first);
    let (w2, m2, v2) = stratum(&w.second);
    let estimate = 0.5 * (m1 + m2);
    let std_err = 0.5 * (v1 / w1.len() as f64 + v2 / w2.len() as f64).sqrt();
    let s: f64 = w1.iter().chain(&w2).sum();
    let s2: f64 = w1.iter().chain(&w2).map(|x| x * x).sum();
    let ess = if s2 > 0.0 { s * s / s2 } else { 0.0 };
    if ess < ESS_FLOOR {
        return Err(Error::VarianceExplosion { ess, floor: ESS_FLOOR });
    }
    Ok(OverlapReport { estimator: est, estimate, std_err, samples: w1.len() + w2.len(), ess, analytic: None })
}

/// Overlap of two densities by importance sampling from their equal mixture.
pub fn density_overlap(a: &dyn Density, b: &dyn Density, n: usize, estimator: Estimator, seed: u64) -> Result<OverlapReport> {
    report(&mixture_logs(a, b, n, seed)?, estimator)
}

/// Both estimators on shared samples; the Bhattacharyya report carries the
/// Gaussian closed form when it applies.
pub fn functional_overlap(a: &WaveFunctional, b: &WaveFunctional, n: usize, seed: u64) -> Result<OverlapPair> {
    let w = mixture_logs(a, b, n, seed)?;
    let mut bh = report(&w, Estimator::Bhattacharyya)?;
    bh.analytic = analytic_bhattacharyya(a, b);
    let min = report(&w, Estimator::MinOverlap)?;
    check_ordering(&min, &bh)?;
    Ok(OverlapPair { bhattacharyya: bh, min_overlap: min })
}

/// Overlap pair for arbitrary densities.
pub fn overlap_pair(a: &dyn Density, b: &dyn Density, n: usize, seed: u64) -> Result<OverlapPair> {
    let w = mixture_logs(a, b, n, seed)?;
    let bh = report(&w, Estimator::Bhattacharyya)?;
    let min = report(&w, Estimator::MinOverlap)?;
    check_ordering(&min, &bh)?;
    Ok(OverlapPair { bhattacharyya: bh, min_overlap: min })
}

fn check_ordering(min: &OverlapReport, bh: &OverlapReport) -> Result<()> {
    // pointwise min(p,q) <= sqrt(pq), so this holds sample by sample
    if min.estimate > bh.estimate + 1e-12 {
        return Err(Error::Invariant(format!("min-overlap {} exceeds Bhattacharyya {}", min.estimate, bh.estimate)));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub config: Vec<f64>,
    pub log_density: f64,
    /// Largest deviation from `x_r = Re(gamma_r conj(alpha)) / (w_r |alpha|^2)`,
    /// relative to the largest coordinate.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximaReport {
    pub maxima: Vec<Maximum>,
    /// `gamma_r` with `alpha = sum_r gamma_r x_r`.
    pub gamma: Vec<Complex64>,
    /// Density at random points of the `alpha = 0` hyperplane.
    pub alpha_zero_density: Vec<f64>,
}

fn alpha_of(gamma: &[Complex64], x: &[f64]) -> Complex64 {
    gamma.iter().zip(x).map(|(g, v)| g * v).sum()
}

fn stationarity_residual(gamma: &[Complex64], widths: &[Option<f64>], x: &[f64]) -> f64 {
    let a = alpha_of(gamma, x);
    let a2 = a.norm_sqr();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut r = 0.0f64;
    for (i, g) in gamma.iter().enumerate() {
        if let Some(w) = widths[i] {
            r = r.max((x[i] - (g * a.conj()).re / (w * a2)).abs());
        }
    }
    r / scale
}

/// Density `|Psi|^2` at `x`, zero where the functional vanishes.
pub fn density_at(f: &WaveFunctional, x: &[f64]) -> f64 {
    match f.log_psi(x) {
        Ok(l) => (2.0 * l.re).exp(),
        Err(Error::Degenerate) => 0.0,
        Err(_) => f64::NAN,
    }
}

/// Maxima of the density of the one-particle state with mode function `psi`
/// (slot, coefficient), by multistart gradient ascent on `log R`.
pub fn one_particle_maxima(theory: &TheoryModel, sector: &str, psi: &[(usize, Complex64)], starts: usize, seed: u64) -> Result<MaximaReport> {
    let f = n_particle(theory, sector, &SymmetricTensor::one_particle(psi)?)?;
    let gamma = one_particle_alpha(theory, sector, psi)?;
    let widths: Vec<Option<f64>> = (0..theory.dim()).map(|r| theory.vacuum_width(r)).collect();
    let wmax = widths.iter().flatten().cloned().fold(0.0, f64::max);
    let d = theory.dim();
    let maxima = (0..starts)
        .into_par_iter()
        .map(|s| {
            let mut r = rng(split(seed, &format!("start{s}")));
            let mut x: Vec<f64> = widths
                .iter()
                .map(|w| match w {
                    Some(w) => Distribution::<f64>::sample(&StandardNormal, &mut r) / (2.0 * w).sqrt(),
                    None => 0.0,
                })
                .collect();
            ascend(&f, &gamma, &widths, &mut x, 1.0 / wmax)
        })
        .collect::<Vec<_>>();
    let mut r = rng(split(seed, "alpha-zero"));
    let (gr, gi): (Vec<f64>, Vec<f64>) = gamma.iter().map(|g| (g.re, g.im)).unzip();
    let basis = orthonormal(&[gr, gi]);
    let alpha_zero_density = (0..8)
        .map(|_| {
            let mut x: Vec<f64> = (0..d).map(|i| if widths[i].is_some() { Distribution::<f64>::sample(&StandardNormal, &mut r) } else { 0.0 }).collect();
            for b in &basis {
                let c: f64 = x.iter().zip(b).map(|(u, v)| u * v).sum();
                x.iter_mut().zip(b).for_each(|(u, v)| *u -= c * v);
            }
            density_at(&f, &x)
        })
        .collect();
    Ok(MaximaReport { maxima, gamma, alpha_zero_density })
}

fn orthonormal(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut u = v.clone();
        for b in &out {
            let c: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            u.iter_mut().for_each(|x| *x /= n);
            out.push(u);
        }
    }
    out
}

fn ascend(f: &WaveFunctional, gamma: &[Complex64], widths: &[Option<f64>], x: &mut Vec<f64>, step0: f64) -> Maximum {
    let lr = |y: &[f64]| f.log_psi(y).map(|l| l.re).unwrap_or(f64::NEG_INFINITY);
    let mut val = lr(x);
    let mut step = step0;
    let mut it = 0;
    let mut converged = false;
    while it < 20_000 {
        it += 1;
        let g = match f.amplitude_gradient(x) {
            Ok(g) => g,
            Err(_) => break,
        };
        if stationarity_residual(gamma, widths, x) < 1e-10 {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            let v = lr(&y);
            if v >= val {
                *x = y;
                val = v;
                accepted = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let residual = stationarity_residual(gamma, widths, x);
    Maximum { config: x.clone(), log_density: 2.0 * val, residual, converged: converged || residual < 1e-8, iterations: it }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: usize,
    pub overlap: f64,
    pub std_err: f64,
    pub analytic: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    /// Slope of `ln overlap` against `n`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub family: String,
    pub rows: Vec<ScanRow>,
    /// Least-squares fit over the rows with `n >= 1`.
    pub fit: ExpFit,
}

/// A pair of densities for each `n`.
pub trait OverlapFamily {
    fn name(&self) -> String;
    fn pair(&self, n: usize) -> Result<(Box<dyn Density>, Box<dyn Density>)>;
    /// Closed-form Bhattacharyya coefficient of the `n`-th pair, if known.
    fn analytic(&self, n: usize) -> Option<f64>;
}

/// `a^dag_{m1} .. a^dag_{mn} |0>` against the vacuum, with `m_i` the first
/// `n` entries of `slots`.
pub struct BosonicFamily<'a> {
    pub theory: &'a TheoryModel,
    pub sector: String,
    pub slots: Vec<usize>,
}

impl BosonicFamily<'_> {
    fn slot_factor(&self, slots: &[usize]) -> Option<f64> {
        let s = self.theory.space().sector(&self.sector)?;
        let b = &s.basis;
        let mut f = 1.0;
        for (i, &slot) in slots.iter().enumerate() {
            if slots[..i].contains(&slot) {
                return None;
            }
            let mode = slot / b.n_pol();
            if b.kind() == FieldKind::ScalarComplex {
                f *= std::f64::consts::PI.sqrt() / 2.0;
            } else if b.is_zero(mode) {
                f *= (2.0 / std::f64::consts::PI).sqrt();
            } else {
                let partner = b.partner(mode) * b.n_pol() + slot % b.n_pol();
                if slots.contains(&partner) {
                    return None;
                }
                f *= std::f64::consts::PI.sqrt() / 2.0;
            }
        }
        Some(f)
    }
}

impl OverlapFamily for BosonicFamily<'_> {
    fn name(&self) -> String {
        "bosonic-excitations".into()
    }
    fn pair(&self, n: usize) -> Result<(Box<dyn Density>, Box<dyn Density>)> {
        if n > self.slots.len() {
            return Err(Error::InvalidParameter(format!("family has {} slots, asked for {n}", self.slots.len())));
        }
        let vac = vacuum(self.theory)?;
        let ex = if n == 0 { vac.clone() } else { n_particle(self.theory, &self.sector, &SymmetricTensor::product(&self.slots[..n])?)? };
        Ok((Box::new(ex), Box::new(vac)))
    }
    fn analytic(&self, n: usize) -> Option<f64> {
        self.slot_factor(self.slots.get(..n)?)
    }
}

/// Least-squares line through `(n, ln overlap)`.
pub fn exponential_fit(rows: &[ScanRow]) -> ExpFit {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.n >= 1 && r.overlap > 0.0).map(|r| (r.n as f64, r.overlap.ln())).collect();
    let m = pts.len() as f64;
    if m < 2.0 {
        return ExpFit { slope: f64::NAN, intercept: f64::NAN, r_squared: f64::NAN };
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    ExpFit { slope, intercept, r_squared }
}

/// Bhattacharyya overlap for each `n` in `ns`, with an exponential fit.
pub fn n_particle_overlap_scan(family: &dyn OverlapFamily, ns: &[usize], samples: usize, seed: u64) -> Result<ScanReport> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let (a, b) = family.pair(n)?;
        let r = density_overlap(a.as_ref(), b.as_ref(), samples, Estimator::Bhattacharyya, split(seed, &format!("n{n}")))?;
        rows.push(ScanRow { n, overlap: r.estimate, std_err: r.std_err, analytic: family.analytic(n) });
    }
    let fit = exponential_fit(&rows);
    Ok(ScanReport { family: family.name(), rows, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(center: f64, width: f64) -> WaveFunctional {
        WaveFunctional::Gaussian(GaussianFunctional::new(vec![Complex64::new(width, 0.0)], vec![center], vec![0.3]).unwrap())
    }

    #[test]
    fn identical_densities_overlap_fully() {
        let a = g(0.2, 1.3);
        let p = functional_overlap(&a, &a, 2000, 1).unwrap();
        assert!((p.bhattacharyya.estimate - 1.0).abs() < 1e-12);
        assert!((p.min_overlap.estimate - 1.0).abs() < 1e-12);
        assert!((p.bhattacharyya.analytic.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_unit_gaussians() {
        let d = 1.7;
        let p = functional_overlap(&g(0.0, 1.0), &g(d, 1.0), 40_000, 3).unwrap();
        let exact = (-d * d / 4.0f64).exp();
        assert!((p.bhattacharyya.analytic.unwrap() - exact).abs() < 1e-14);
        assert!((p.bhattacharyya.estimate - exact).abs() < 3.0 * p.bhattacharyya.std_err);
    }

    #[test]
    fn fit_recovers_rate() {
        let rows: Vec<ScanRow> = (0..8).map(|n| ScanRow { n, overlap: 0.8f64.powi(n as i32), std_err: 0.0, analytic: None }).collect();
        let f = exponential_fit(&rows);
        assert!((f.slope - 0.8f64.ln()).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    }
}
