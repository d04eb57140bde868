//! Angular beables on a site lattice: each site carries Euler angles
//! `(alpha, beta, gamma)` distributed by `|u_+|^2` (occupied) or `|u_-|^2`
//! (empty), and the region average `A_V` of `alpha` tells matter from vacuum.

use crate::error::{Error, Result};
use crate::overlap_lab::{Density, OverlapFamily};
use crate::rng::{rng, split, split_index};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::PI;

pub const ALPHA_MAX: f64 = PI;
pub const BETA_MAX: f64 = 2.0 * PI;
pub const GAMMA_MAX: f64 = 4.0 * PI;

/// Default factor standing in for "much greater than".
pub const DEFAULT_MARGIN: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spin {
    /// `u_+`, an occupied site.
    Up,
    /// `u_-`, an empty site.
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub sites: usize,
    pub spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularConfig {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl AngularConfig {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.len() != gamma.len() {
            return Err(Error::InvalidParameter("angle vectors differ in length".into()));
        }
        let ok = |v: &[f64], hi: f64, closed: bool| v.iter().all(|a| *a >= 0.0 && (if closed { *a <= hi } else { *a < hi }));
        if !ok(&alpha, ALPHA_MAX, true) || !ok(&beta, BETA_MAX, false) || !ok(&gamma, GAMMA_MAX, false) {
            return Err(Error::InvalidParameter("angle out of range".into()));
        }
        Ok(AngularConfig { alpha, beta, gamma })
    }
    pub fn sites(&self) -> usize {
        self.alpha.len()
    }
}

/// Occupied sites inside a region `V`; every other site is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationState {
    pub lattice: LatticeSpec,
    pub region: Vec<usize>,
    pub occupied: BTreeSet<usize>,
}

impl OccupationState {
    pub fn new(lattice: LatticeSpec, region: Vec<usize>, occupied: BTreeSet<usize>) -> Result<Self> {
        if region.iter().any(|s| *s >= lattice.sites) {
            return Err(Error::InvalidParameter("region site outside the lattice".into()));
        }
        if !occupied.iter().all(|s| region.contains(s)) {
            return Err(Error::InvalidParameter("occupied sites must lie in the region".into()));
        }
        Ok(OccupationState { lattice, region, occupied })
    }

    /// A lattice that is exactly the region `0..n_l`, with the first `n` sites occupied.
    pub fn block(n_l: usize, n: usize) -> Result<Self> {
        if n > n_l {
            return Err(Error::InvalidParameter(format!("cannot occupy {n} of {n_l} sites")));
        }
        Self::new(LatticeSpec { sites: n_l, spacing: 1.0 }, (0..n_l).collect(), (0..n).collect())
    }

    pub fn spin(&self, site: usize) -> Spin {
        if self.occupied.contains(&site) {
            Spin::Up
        } else {
            Spin::Down
        }
    }
}

/// `|u_+|^2 = cos^2(alpha/2) / 8 pi^2`, `|u_-|^2 = sin^2(alpha/2) / 8 pi^2`,
/// a density on `d Omega = sin(alpha) d alpha d beta d gamma`.
pub fn u_density(spin: Spin, alpha: f64, _beta: f64, _gamma: f64) -> f64 {
    let h = 0.5 * alpha;
    let c = match spin {
        Spin::Up => h.cos(),
        Spin::Down => h.sin(),
    };
    c * c / (8.0 * PI * PI)
}

/// Marginal density of `alpha` with respect to `d alpha`.
pub fn alpha_pdf(spin: Spin, alpha: f64) -> f64 {
    if !(0.0..=PI).contains(&alpha) {
        return 0.0;
    }
    8.0 * PI * PI * u_density(spin, alpha, 0.0, 0.0) * alpha.sin()
}

/// Inverse-CDF draw of `alpha`. For `u_+` the CDF is `(1 - c)(3 + c) / 4`
/// with `c = cos(alpha)`; `u_-` is its mirror `alpha -> pi - alpha`.
pub fn sample_alpha(spin: Spin, r: &mut ChaCha8Rng) -> f64 {
    let u: f64 = r.gen();
    let c = (2.0 * (1.0 - u).sqrt() - 1.0).clamp(-1.0, 1.0);
    let a = c.acos();
    match spin {
        Spin::Up => a,
        Spin::Down => PI - a,
    }
}

/// Closed-form mean of `alpha` under `|u_+|^2` or `|u_-|^2`.
pub fn alpha_mean(spin: Spin) -> f64 {
    match spin {
        Spin::Up => 3.0 * PI / 8.0,
        Spin::Down => 5.0 * PI / 8.0,
    }
}

/// Closed-form standard deviation of `alpha`, the same for both states.
pub fn alpha_std() -> f64 {
    (15.0 * PI * PI / 64.0 - 2.0).sqrt()
}

const CHUNK: usize = 4096;

/// `n` independent draws of one site's `alpha`.
pub fn sample_site_alpha(spin: Spin, n: usize, seed: u64) -> Vec<f64> {
    let chunks = n.div_ceil(CHUNK);
    let mut out: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng(split_index(seed, c as u64));
            let m = CHUNK.min(n - c * CHUNK);
            (0..m).map(move |_| sample_alpha(spin, &mut r))
        })
        .collect();
    out.truncate(n);
    out
}

/// `n` configurations of the whole lattice from the product state.
pub fn sample_angles(state: &OccupationState, n: usize, seed: u64) -> Vec<AngularConfig> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(split_index(seed, i as u64));
            let s = state.lattice.sites;
            let alpha = (0..s).map(|x| sample_alpha(state.spin(x), &mut r)).collect();
            let beta = (0..s).map(|_| r.gen::<f64>() * BETA_MAX).collect();
            let gamma = (0..s).map(|_| r.gen::<f64>() * GAMMA_MAX).collect();
            AngularConfig { alpha, beta, gamma }
        })
        .collect()
}

/// `A_V = sum_{x in V} alpha_x / n_l`, with `n_l = |V|`.
pub fn a_v_statistic(config: &AngularConfig, region: &[usize]) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::InvalidParameter("region V is empty".into()));
    }
    let mut s = 0.0;
    for &x in region {
        s += *config.alpha.get(x).ok_or_else(|| Error::InvalidParameter(format!("site {x} outside the configuration")))?;
    }
    Ok(s / region.len() as f64)
}

/// `n` draws of `A_V` without materializing configurations.
pub fn sample_a_v(state: &OccupationState, n: usize, seed: u64) -> Result<Vec<f64>> {
    if state.region.is_empty() {
        return Err(Error::InvalidParameter("region V is empty".into()));
    }
    let nl = state.region.len() as f64;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(split_index(seed, i as u64));
            state.region.iter().map(|&x| sample_alpha(state.spin(x), &mut r)).sum::<f64>() / nl
        })
        .collect())
}

/// Closed-form mean of `A_V` with `n` of `n_l` sites occupied.
pub fn a_v_mean(n: usize, n_l: usize) -> f64 {
    (n as f64 * alpha_mean(Spin::Up) + (n_l - n) as f64 * alpha_mean(Spin::Down)) / n_l as f64
}

/// Closed-form variance of `A_V`.
pub fn a_v_variance(n_l: usize) -> f64 {
    alpha_std().powi(2) / n_l as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distinguishability {
    /// `n / sqrt(n_l)`
    pub lhs: f64,
    /// `(4 / pi) sqrt(15 pi^2 / 64 - 2)`
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Constant on the right of the criterion.
pub fn distinguishability_constant() -> f64 {
    4.0 / PI * alpha_std()
}

/// Can `n` particles in `n_l` sites be told from empty space through `A_V`?
pub fn distinguishability(n: usize, n_l: usize, margin: f64) -> Result<Distinguishability> {
    if n_l == 0 || n > n_l {
        return Err(Error::InvalidParameter(format!("need 0 <= n <= n_l and n_l >= 1, got n={n}, n_l={n_l}")));
    }
    let lhs = n as f64 / (n_l as f64).sqrt();
    let rhs = distinguishability_constant();
    Ok(Distinguishability { lhs, rhs, margin, pass: lhs > margin * rhs })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthScale {
    /// `1 / (a rho^{2/3})`: `L` must be much larger than this.
    pub threshold: f64,
    /// `margin * threshold`.
    pub required: f64,
}

/// Region size above which matter of number density `rho` is distinguishable
/// on a lattice of spacing `a`.
pub fn length_scale_criterion(a: f64, rho: f64, margin: f64) -> Result<LengthScale> {
    if !(a > 0.0) || !(rho > 0.0) || !(margin > 0.0) {
        return Err(Error::InvalidParameter("spacing, density and margin must be positive".into()));
    }
    let threshold = 1.0 / (a * rho.powf(2.0 / 3.0));
    Ok(LengthScale { threshold, required: margin * threshold })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub n_l: usize,
    pub lhs: f64,
    pub pass: bool,
    /// `|mean difference| / pooled std` of the two `A_V` samples.
    pub empirical_separation: f64,
    pub empirical_pass: bool,
}

impl SweepRow {
    pub fn agrees(&self) -> bool {
        self.pass == self.empirical_pass
    }
}

/// Fractions of `n_l` occupied in the default sweep.
pub const SWEEP_FRACTIONS: [f64; 5] = [0.0, 0.1, 0.25, 0.5, 1.0];
/// Region sizes of the default sweep.
pub const SWEEP_SITES: [usize; 5] = [4, 25, 100, 400, 1600];

/// Empirical versus analytic distinguishability over a grid of `(n, n_l)`.
pub fn sweep(n_ls: &[usize], fractions: &[f64], samples: usize, margin: f64, seed: u64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &n_l in n_ls {
        let empty = sample_a_v(&OccupationState::block(n_l, 0)?, samples, split(seed, &format!("empty{n_l}")))?;
        for &f in fractions {
            let n = (f * n_l as f64).round() as usize;
            let d = distinguishability(n, n_l, margin)?;
            let full = sample_a_v(&OccupationState::block(n_l, n)?, samples, split(seed, &format!("occ{n_l}-{n}")))?;
            let sep = separation(&empty, &full);
            rows.push(SweepRow { n, n_l, lhs: d.lhs, pass: d.pass, empirical_separation: sep, empirical_pass: sep > margin });
        }
    }
    Ok(rows)
}

fn separation(a: &[f64], b: &[f64]) -> f64 {
    let mv = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0))
    };
    let ((ma, va), (mb, vb)) = (mv(a), mv(b));
    (ma - mb).abs() / (0.5 * (va + vb)).sqrt()
}

/// Product state over `alpha, beta, gamma` of a few sites, as a density on
/// `(alpha_1..alpha_n, beta_1..beta_n, gamma_1..gamma_n)` w.r.t. Lebesgue measure.
#[derive(Clone, Debug, PartialEq)]
pub struct HollandProduct {
    pub spins: Vec<Spin>,
}

impl Density for HollandProduct {
    fn dim(&self) -> usize {
        3 * self.spins.len()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        let n = self.spins.len();
        let mut l = 0.0;
        for (i, s) in self.spins.iter().enumerate() {
            let (a, b, g) = (x[i], x[n + i], x[2 * n + i]);
            if !(0.0..=ALPHA_MAX).contains(&a) || !(0.0..BETA_MAX).contains(&b) || !(0.0..GAMMA_MAX).contains(&g) {
                return f64::NEG_INFINITY;
            }
            l += (u_density(*s, a, b, g) * a.sin()).ln();
        }
        l
    }
    fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let k = self.spins.len();
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let mut r = rng(split_index(seed, i as u64));
                let mut x = vec![0.0; 3 * k];
                for (j, s) in self.spins.iter().enumerate() {
                    x[j] = sample_alpha(*s, &mut r);
                    x[k + j] = r.gen::<f64>() * BETA_MAX;
                    x[2 * k + j] = r.gen::<f64>() * GAMMA_MAX;
                }
                x
            })
            .collect())
    }
}

/// `n` occupied sites against the same `n` sites empty. Sites outside the
/// block are identical in both states and contribute a factor 1.
pub struct HollandFamily;

/// Per-site Bhattacharyya coefficient of `|u_+|^2` and `|u_-|^2`.
pub const SITE_BHATTACHARYYA: f64 = PI / 4.0;

impl OverlapFamily for HollandFamily {
    fn name(&self) -> String {
        "holland".into()
    }
    fn pair(&self, n: usize) -> Result<(Box<dyn Density>, Box<dyn Density>)> {
        Ok((Box::new(HollandProduct { spins: vec![Spin::Up; n] }), Box::new(HollandProduct { spins: vec![Spin::Down; n] })))
    }
    fn analytic(&self, n: usize) -> Option<f64> {
        Some(SITE_BHATTACHARYYA.powi(n as i32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // composite Simpson on [0, pi]
    fn integrate(f: impl Fn(f64) -> f64) -> f64 {
        let n = 20_000;
        let h = PI / n as f64;
        let mut s = f(0.0) + f(PI);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for spin in [Spin::Up, Spin::Down] {
            // beta and gamma integrate to 8 pi^2
            let norm = integrate(|a| u_density(spin, a, 0.0, 0.0) * a.sin()) * 8.0 * PI * PI;
            assert!((norm - 1.0).abs() < 1e-12);
            let m = integrate(|a| a * alpha_pdf(spin, a));
            assert!((m - alpha_mean(spin)).abs() < 1e-12);
            let v = integrate(|a| (a - m).powi(2) * alpha_pdf(spin, a));
            assert!((v.sqrt() - alpha_std()).abs() < 1e-12);
        }
        let bc = integrate(|a| (alpha_pdf(Spin::Up, a) * alpha_pdf(Spin::Down, a)).sqrt());
        assert!((bc - SITE_BHATTACHARYYA).abs() < 1e-12);
    }

    #[test]
    fn inverse_cdf_is_exact() {
        // F(alpha) = (1 - cos a)(3 + cos a) / 4 inverts the sampler's map
        for k in 1..50 {
            let u = k as f64 / 50.0;
            let c = 2.0 * (1.0 - u).sqrt() - 1.0;
            assert!(((1.0 - c) * (3.0 + c) / 4.0 - u).abs() < 1e-14);
        }
    }

    #[test]
    fn criterion_examples() {
        assert!((distinguishability_constant() - 0.7126).abs() < 1e-4);
        assert!(distinguishability(100, 100, DEFAULT_MARGIN).unwrap().pass);
        assert!(!distinguishability(1, 1_000_000, DEFAULT_MARGIN).unwrap().pass);
        let l = length_scale_criterion(1e-15, 1e30, DEFAULT_MARGIN).unwrap();
        assert!((l.threshold / 1e-5 - 1.0).abs() < 1e-9);
        let l2 = length_scale_criterion(2e-15, 1e30, DEFAULT_MARGIN).unwrap();
        assert!((l2.required / l.required - 0.5).abs() < 1e-12);
        let planck = length_scale_criterion(1e-35, 1e30, DEFAULT_MARGIN).unwrap();
        assert!((planck.threshold / 1e15 - 1.0).abs() < 1e-9);
    }
}
