//! Equilibrium ensembles and the statistics run on them.

use crate::dynamics::{integrate_guidance, Tolerances};
use crate::error::{Error, Result};
use crate::rng::{rng, split, split_index};
use crate::theories::TheoryModel;
use crate::wavefunctionals::{local_expectation, GaussianFunctional, GridWavefunction, OperatorKind, WaveFunctional};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::Distribution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub seed: u64,
    pub acceptance_rate: Option<f64>,
    /// Largest split-chain R-hat over coordinates.
    pub r_hat: Option<f64>,
    /// Set when the convergence diagnostic failed; the ensemble is still usable for inspection.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<Vec<f64>>,
    pub time: f64,
    pub provenance: Provenance,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.members.first().map(|m| m.len()).unwrap_or(0)
    }
    /// Values of the linear functional `l . x` over the members.
    pub fn project(&self, l: &[f64]) -> Vec<f64> {
        self.members.iter().map(|m| m.iter().zip(l).map(|(a, b)| a * b).sum()).collect()
    }
}

const INDEP_WIDEN: f64 = 1.4;

/// Split-chain R-hat threshold above which an MCMC ensemble is flagged.
pub const RHAT_LIMIT: f64 = 1.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub chains: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings { chains: 4, burn_in: 2000, thin: 10 }
    }
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn gaussian_draw(g: &GaussianFunctional, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..g.dim()).map(|i| g.center[i] + g.sigma(i) * normal(r)).collect()
}

/// Strip gauge wrappers: the inner functional and the embedding (identity if none).
fn unwrap_gauge(f: &WaveFunctional) -> (&WaveFunctional, Option<&[Option<usize>]>) {
    match f {
        WaveFunctional::Gauge(g) => (&g.inner, Some(&g.embed)),
        other => (other, None),
    }
}

fn embed(x: Vec<f64>, map: Option<&[Option<usize>]>) -> Vec<f64> {
    match map {
        None => x,
        // flat directions carry no normalizable density; they are placed at 0
        Some(m) => m.iter().map(|e| e.map(|i| x[i]).unwrap_or(0.0)).collect(),
    }
}

/// Draw `n` members from `|Psi|^2`, reproducibly from `seed`.
pub fn sample_equilibrium(functional: &WaveFunctional, n: usize, seed: u64) -> Result<Ensemble> {
    sample_equilibrium_with(functional, n, seed, &McmcSettings::default())
}

pub fn sample_equilibrium_with(functional: &WaveFunctional, n: usize, seed: u64, mcmc: &McmcSettings) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::InvalidParameter("ensemble size must be at least 1".into()));
    }
    let (inner, map) = unwrap_gauge(functional);
    let (members, provenance) = match inner {
        WaveFunctional::Gaussian(g) => {
            let m: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| gaussian_draw(g, &mut rng(split_index(seed, i as u64)))).collect();
            (m, Provenance { method: "exact-gaussian".into(), seed, acceptance_rate: None, r_hat: None, flagged: false })
        }
        WaveFunctional::Excited(_) | WaveFunctional::Superposition(_) => mcmc_sample(inner, n, seed, mcmc)?,
        WaveFunctional::Gauge(_) => return Err(Error::Unsupported("nested gauge wrappers".into())),
    };
    let members = members.into_iter().map(|x| embed(x, map)).collect();
    Ok(Ensemble { members, time: functional.time(), provenance })
}

struct Chain {
    samples: Vec<Vec<f64>>,
    accepted: usize,
    proposed: usize,
}

/// Random-walk Metropolis with an optional independence proposal, one chain.
fn run_chain(
    log_p: &(dyn Fn(&[f64]) -> f64 + Sync),
    start: Vec<f64>,
    scale: &[f64],
    independence: Option<&(dyn Fn(&mut ChaCha8Rng) -> (Vec<f64>, f64) + Sync)>,
    log_q: Option<&(dyn Fn(&[f64]) -> f64 + Sync)>,
    count: usize,
    settings: &McmcSettings,
    r: &mut ChaCha8Rng,
) -> Chain {
    let d = start.len();
    let mut x = start;
    let mut lp = log_p(&x);
    let mut factor = 2.4 / (d as f64).sqrt();
    let mut samples = Vec::with_capacity(count);
    let (mut acc, mut prop) = (0usize, 0usize);
    let mut window_acc = 0usize;
    let total = settings.burn_in + count * settings.thin;
    for step in 0..total {
        let use_indep = independence.is_some() && r.gen::<f64>() < 0.5;
        let (y, log_ratio_q) = if use_indep {
            let (y, lqy) = (independence.unwrap())(r);
            let lqx = (log_q.unwrap())(&x);
            (y, lqx - lqy)
        } else {
            let y: Vec<f64> = (0..d).map(|i| x[i] + factor * scale[i] * normal(r)).collect();
            (y, 0.0)
        };
        let ly = log_p(&y);
        let accept = ly.is_finite() && (ly - lp + log_ratio_q >= 0.0 || r.gen::<f64>().ln() < ly - lp + log_ratio_q);
        if accept {
            x = y;
            lp = ly;
        }
        if step < settings.burn_in {
            if accept {
                window_acc += 1;
            }
            if (step + 1) % 100 == 0 {
                let rate = window_acc as f64 / 100.0;
                factor *= if rate > 0.4 { 1.2 } else if rate < 0.2 { 0.8 } else { 1.0 };
                window_acc = 0;
            }
        } else {
            prop += 1;
            if accept {
                acc += 1;
            }
            if (step - settings.burn_in + 1) % settings.thin == 0 {
                samples.push(x.clone());
            }
        }
    }
    Chain { samples, accepted: acc, proposed: prop }
}

fn is_linear(f: &crate::wavefunctionals::FockFactor) -> bool {
    f.terms.iter().all(|t| t.occupation.iter().map(|n| *n as usize).sum::<usize>() == 1)
}

/// A factor `F = beta . x` linear in its coordinates. In whitened variables
/// `z_j = sqrt(2 w_j) x_j` the block density is `|g . z|^2 N(0, I)`; writing
/// `|g . z|^2 = l1 t1^2 + l2 t2^2` along the eigenvectors of `Re(g g^dag)`, it
/// is a mixture in which one `t_i` has density `t^2 N(0, 1)` (a chi variable
/// with 3 degrees of freedom) and everything else stays standard normal.
struct LinearFactor {
    coords: Vec<usize>,
    scale: Vec<f64>,
    dirs: Vec<(f64, Vec<f64>)>,
}

impl LinearFactor {
    fn new(fac: &crate::wavefunctionals::FockFactor, base: &GaussianFunctional) -> Result<Self> {
        let d = base.dim();
        let coords = fac.coords.clone();
        let scale: Vec<f64> = coords.iter().map(|&r| 1.0 / (2.0 * base.width[r].re).sqrt()).collect();
        let mut e = vec![0.0; d];
        let g: Vec<Complex64> = coords
            .iter()
            .zip(&scale)
            .map(|(&r, s)| {
                e[r] = 1.0;
                let v = fac.value(&e, &base.width) * *s;
                e[r] = 0.0;
                v
            })
            .collect();
        let a: Vec<f64> = g.iter().map(|z| z.re).collect();
        let b: Vec<f64> = g.iter().map(|z| z.im).collect();
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        // orthonormal basis of span(a, b)
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for v in [&a, &b] {
            let mut u = v.clone();
            for q in &basis {
                let c = dot(&u, q);
                u.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            let n = dot(&u, &u).sqrt();
            if n > 1e-12 * (dot(&a, &a) + dot(&b, &b)).sqrt() {
                u.iter_mut().for_each(|x| *x /= n);
                basis.push(u);
            }
        }
        if basis.is_empty() {
            return Err(Error::Degenerate);
        }
        let m = |i: usize, j: usize| dot(&a, &basis[i]) * dot(&a, &basis[j]) + dot(&b, &basis[i]) * dot(&b, &basis[j]);
        let dirs = if basis.len() == 1 {
            vec![(m(0, 0), basis[0].clone())]
        } else {
            let (p, q, r) = (m(0, 0), m(0, 1), m(1, 1));
            let tr = 0.5 * (p + r);
            let disc = (0.25 * (p - r).powi(2) + q * q).sqrt();
            let theta = 0.5 * (2.0 * q).atan2(p - r);
            let (c, s) = (theta.cos(), theta.sin());
            let u1: Vec<f64> = basis[0].iter().zip(&basis[1]).map(|(x, y)| c * x + s * y).collect();
            let u2: Vec<f64> = basis[0].iter().zip(&basis[1]).map(|(x, y)| -s * x + c * y).collect();
            vec![(tr + disc, u1), ((tr - disc).max(0.0), u2)]
        };
        Ok(LinearFactor { coords, scale, dirs })
    }

    fn draw(&self, row: &mut [f64], r: &mut ChaCha8Rng) {
        let mut z: Vec<f64> = (0..self.coords.len()).map(|_| normal(r)).collect();
        let total: f64 = self.dirs.iter().map(|(l, _)| l).sum();
        let u: f64 = r.gen::<f64>() * total;
        let (_, dir) = if u < self.dirs[0].0 { &self.dirs[0] } else { self.dirs.last().unwrap() };
        let t: f64 = z.iter().zip(dir).map(|(x, y)| x * y).sum();
        let chi = (0..3).map(|_| normal(r).powi(2)).sum::<f64>().sqrt();
        let tn = if r.gen::<bool>() { chi } else { -chi };
        z.iter_mut().zip(dir).for_each(|(x, y)| *x += (tn - t) * y);
        for (j, &c) in self.coords.iter().enumerate() {
            row[c] = z[j] * self.scale[j];
        }
    }
}

/// Split-chain potential scale reduction of one coordinate.
pub fn split_r_hat(chains: &[Vec<f64>]) -> f64 {
    let mut seqs: Vec<&[f64]> = Vec::new();
    for c in chains {
        let h = c.len() / 2;
        if h < 2 {
            return f64::NAN;
        }
        seqs.push(&c[..h]);
        seqs.push(&c[h..2 * h]);
    }
    let n = seqs.iter().map(|s| s.len()).min().unwrap() as f64;
    let means: Vec<f64> = seqs.iter().map(|s| s.iter().take(n as usize).sum::<f64>() / n).collect();
    let vars: Vec<f64> = seqs
        .iter()
        .zip(&means)
        .map(|(s, m)| s.iter().take(n as usize).map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
        .collect();
    let w = vars.iter().sum::<f64>() / vars.len() as f64;
    let mm = means.iter().sum::<f64>() / means.len() as f64;
    let b = n * means.iter().map(|m| (m - mm).powi(2)).sum::<f64>() / (means.len() as f64 - 1.0);
    if w == 0.0 {
        return 1.0;
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

fn log_density(f: &WaveFunctional, x: &[f64]) -> f64 {
    match f.log_psi(x) {
        Ok(l) => 2.0 * l.re,
        Err(_) => f64::NEG_INFINITY,
    }
}

fn mcmc_sample(f: &WaveFunctional, n: usize, seed: u64, settings: &McmcSettings) -> Result<(Vec<Vec<f64>>, Provenance)> {
    let chains = settings.chains.max(1);
    let per = n.div_ceil(chains);
    let d = f.dim();
    let mut out = vec![vec![0.0; d]; per * chains];
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let mut r_hat: f64 = 1.0;
    let (method, blocks): (&str, Vec<Block>) = match f {
        WaveFunctional::Excited(e) => {
            // each factor is an independent block; coordinates outside all factors are Gaussian
            let mut blocks: Vec<Block> = e
                .factors
                .iter()
                .enumerate()
                .map(|(i, fac)| if is_linear(fac) { Block::Linear(i) } else { Block::Factor(i, fac.coords.clone()) })
                .collect();
            let mut covered = vec![false; d];
            e.factors.iter().flat_map(|f| f.coords.iter()).for_each(|r| covered[*r] = true);
            let free: Vec<usize> = (0..d).filter(|r| !covered[*r]).collect();
            if !free.is_empty() {
                blocks.push(Block::Exact(free));
            }
            let method = if blocks.iter().any(|b| matches!(b, Block::Factor(..))) { "metropolis-per-factor" } else { "exact-linear-factors" };
            (method, blocks)
        }
        _ => ("metropolis-mixture", vec![Block::Whole]),
    };
    for (bi, block) in blocks.iter().enumerate() {
        let bseed = split_index(split(seed, "block"), bi as u64);
        match block {
            Block::Exact(coords) => {
                let WaveFunctional::Excited(e) = f else { unreachable!() };
                for (i, row) in out.iter_mut().enumerate() {
                    let mut r = rng(split_index(bseed, i as u64));
                    for &c in coords {
                        row[c] = e.base.center[c] + e.base.sigma(c) * normal(&mut r);
                    }
                }
            }
            Block::Linear(fi) => {
                let WaveFunctional::Excited(e) = f else { unreachable!() };
                let lin = LinearFactor::new(&e.factors[*fi], &e.base)?;
                out.par_iter_mut().enumerate().for_each(|(i, row)| lin.draw(row, &mut rng(split_index(bseed, i as u64))));
            }
            Block::Factor(fi, coords) => {
                let WaveFunctional::Excited(e) = f else { unreachable!() };
                let fac = &e.factors[*fi];
                let coords = coords.clone();
                let width = e.base.width.clone();
                let log_p = |y: &[f64]| -> f64 {
                    let mut full = vec![0.0; d];
                    for (j, &c) in coords.iter().enumerate() {
                        full[c] = y[j];
                    }
                    let v = fac.value(&full, &width);
                    let base: f64 = coords.iter().zip(y).map(|(&c, yj)| -width[c].re * yj * yj).sum();
                    if v.norm() > 0.0 {
                        2.0 * v.norm().ln() + base
                    } else {
                        f64::NEG_INFINITY
                    }
                };
                let scale: Vec<f64> = coords.iter().map(|&c| e.base.sigma(c)).collect();
                // independence proposal: the base Gaussian widened by INDEP_WIDEN
                let wide: Vec<f64> = scale.iter().map(|s| s * INDEP_WIDEN).collect();
                let log_q = |y: &[f64]| -> f64 { y.iter().zip(&wide).map(|(v, s)| -0.5 * (v / s).powi(2)).sum() };
                let draw = |r: &mut ChaCha8Rng| -> (Vec<f64>, f64) {
                    let y: Vec<f64> = wide.iter().map(|s| s * normal(r)).collect();
                    let l = log_q(&y);
                    (y, l)
                };
                let results: Vec<Chain> = (0..chains)
                    .into_par_iter()
                    .map(|ci| {
                        let mut r = rng(split_index(bseed, ci as u64));
                        let start: Vec<f64> = scale.iter().map(|s| s * normal(&mut r)).collect();
                        run_chain(&log_p, start, &scale, Some(&draw), Some(&log_q), per, settings, &mut r)
                    })
                    .collect();
                for j in 0..coords.len() {
                    let per_chain: Vec<Vec<f64>> = results.iter().map(|ch| ch.samples.iter().map(|s| s[j]).collect()).collect();
                    r_hat = r_hat.max(split_r_hat(&per_chain));
                }
                for (ci, ch) in results.iter().enumerate() {
                    accepted += ch.accepted;
                    proposed += ch.proposed;
                    for (k, s) in ch.samples.iter().enumerate() {
                        for (j, &c) in coords.iter().enumerate() {
                            out[ci * per + k][c] = s[j];
                        }
                    }
                }
            }
            Block::Whole => {
                let log_p = |y: &[f64]| log_density(f, y);
                let WaveFunctional::Superposition(s) = f else {
                    return Err(Error::Unsupported("MCMC target must be excited or a superposition".into()));
                };
                let gaussians: Option<Vec<(f64, &GaussianFunctional)>> = s
                    .components
                    .iter()
                    .map(|(c, g)| g.as_gaussian().map(|g| (c.norm_sqr(), g)))
                    .collect();
                let scale: Vec<f64> = match &gaussians {
                    Some(gs) => (0..d).map(|i| gs.iter().map(|(_, g)| g.sigma(i)).fold(f64::INFINITY, f64::min)).collect(),
                    None => vec![0.7; d],
                };
                let mixture = gaussians.map(|gs| {
                    let total: f64 = gs.iter().map(|(w, _)| w).sum();
                    gs.into_iter().map(|(w, g)| (w / total, g.clone())).collect::<Vec<_>>()
                });
                let log_q = mixture.as_ref().map(|mix| {
                    let mix = mix.clone();
                    move |y: &[f64]| -> f64 {
                        let terms: Vec<f64> = mix
                            .iter()
                            .map(|(w, g)| {
                                w.ln()
                                    + (0..g.dim())
                                        .map(|i| {
                                            let s = g.sigma(i);
                                            let z = (y[i] - g.center[i]) / s;
                                            -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
                                        })
                                        .sum::<f64>()
                            })
                            .collect();
                        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
                    }
                });
                let draw = mixture.as_ref().map(|mix| {
                    let mix = mix.clone();
                    let lq = log_q.clone().unwrap();
                    move |r: &mut ChaCha8Rng| -> (Vec<f64>, f64) {
                        let u: f64 = r.gen();
                        let mut acc = 0.0;
                        let mut pick = mix.len() - 1;
                        for (i, (w, _)) in mix.iter().enumerate() {
                            acc += w;
                            if u < acc {
                                pick = i;
                                break;
                            }
                        }
                        let y = gaussian_draw(&mix[pick].1, r);
                        let l = lq(&y);
                        (y, l)
                    }
                });
                let results: Vec<Chain> = (0..chains)
                    .into_par_iter()
                    .map(|ci| {
                        let mut r = rng(split_index(bseed, ci as u64));
                        let start = match &draw {
                            Some(dr) => dr(&mut r).0,
                            None => scale.iter().map(|s| s * normal(&mut r)).collect(),
                        };
                        let indep = draw.as_ref().map(|d| d as &(dyn Fn(&mut ChaCha8Rng) -> (Vec<f64>, f64) + Sync));
                        let lq = log_q.as_ref().map(|q| q as &(dyn Fn(&[f64]) -> f64 + Sync));
                        run_chain(&log_p, start, &scale, indep, lq, per, settings, &mut r)
                    })
                    .collect();
                for j in 0..d {
                    let per_chain: Vec<Vec<f64>> = results.iter().map(|ch| ch.samples.iter().map(|s| s[j]).collect()).collect();
                    r_hat = r_hat.max(split_r_hat(&per_chain));
                }
                for (ci, ch) in results.iter().enumerate() {
                    accepted += ch.accepted;
                    proposed += ch.proposed;
                    for (k, s) in ch.samples.iter().enumerate() {
                        out[ci * per + k] = s.clone();
                    }
                }
            }
        }
    }
    out.truncate(n);
    let acceptance_rate = if proposed > 0 { Some(accepted as f64 / proposed as f64) } else { None };
    let flagged = !(r_hat <= RHAT_LIMIT);
    Ok((out, Provenance { method: method.into(), seed, acceptance_rate, r_hat: Some(r_hat), flagged }))
}

enum Block {
    Exact(Vec<usize>),
    Linear(usize),
    Factor(usize, Vec<usize>),
    Whole,
}

/// Snapshots of an evolved ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolvedEnsemble {
    pub snapshots: Vec<Ensemble>,
    /// Members that hit the step floor and were excluded.
    pub flagged: usize,
}

/// Transport every member under the guidance law of a quadratic theory,
/// returning one ensemble per output time (the first is the input).
pub fn evolve_ensemble(
    ensemble: &Ensemble,
    theory: &TheoryModel,
    psi0: &WaveFunctional,
    times: &[f64],
    tol: &Tolerances,
    max_flagged_fraction: f64,
) -> Result<EvolvedEnsemble> {
    let trajs: Vec<Result<_>> = ensemble.members.par_iter().map(|x| integrate_guidance(theory, psi0, x, times, tol)).collect();
    let mut snapshots: Vec<Ensemble> = times
        .iter()
        .map(|t| Ensemble { members: Vec::with_capacity(ensemble.len()), time: *t, provenance: ensemble.provenance.clone() })
        .collect();
    let mut flagged = 0;
    for tr in trajs {
        let tr = tr?;
        if tr.stats.flagged || tr.states.len() != times.len() {
            flagged += 1;
            continue;
        }
        for (s, x) in snapshots.iter_mut().zip(tr.states) {
            s.members.push(x);
        }
    }
    if flagged as f64 > max_flagged_fraction * ensemble.len() as f64 {
        return Err(Error::Invariant(format!("{flagged} of {} members hit the step floor", ensemble.len())));
    }
    Ok(EvolvedEnsemble { snapshots, flagged })
}

/// One-sample KS critical value at level `alpha` (asymptotic Kolmogorov form).
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

/// Two-sample KS critical value at level `alpha`.
pub fn ks_critical_two(alpha: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (-0.5 * (alpha / 2.0).ln()).sqrt() * ((n + m) / (n * m)).sqrt()
}

/// `sup |F_n - F|` for samples against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0f64, |d, (i, x)| {
        let f = cdf(*x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsConfig {
    /// Family-wise level; each of the `M` marginals is tested at `level / M`.
    pub level: f64,
    pub random_projections: usize,
    /// Size of the reference sample for non-Gaussian functionals.
    pub reference_samples: usize,
    pub seed: u64,
}

impl Default for KsConfig {
    fn default() -> Self {
        KsConfig { level: 0.01, random_projections: 4, reference_samples: 100_000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalKs {
    pub label: String,
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub time: f64,
    pub marginals: Vec<MarginalKs>,
    pub level: f64,
    pub per_test_level: f64,
    pub pass: bool,
}

impl EquivarianceReport {
    pub fn max_statistic(&self) -> f64 {
        self.marginals.iter().map(|m| m.statistic).fold(0.0, f64::max)
    }
}

/// Coordinates with a normalizable marginal (not a flat gauge direction).
fn live_coordinates(f: &WaveFunctional) -> Vec<usize> {
    match f {
        WaveFunctional::Gauge(g) => g.embed.iter().enumerate().filter(|(_, e)| e.is_some()).map(|(r, _)| r).collect(),
        other => (0..other.dim()).collect(),
    }
}

/// Marginal directions: every live coordinate plus seeded random unit vectors.
fn marginal_directions(f: &WaveFunctional, cfg: &KsConfig) -> Vec<(String, Vec<f64>)> {
    let live = live_coordinates(f);
    let d = f.dim();
    let mut dirs: Vec<(String, Vec<f64>)> = live
        .iter()
        .map(|&r| {
            let mut e = vec![0.0; d];
            e[r] = 1.0;
            (format!("x{r}"), e)
        })
        .collect();
    let mut r = rng(split(cfg.seed, "projections"));
    for p in 0..cfg.random_projections {
        let mut v = vec![0.0; d];
        for &i in &live {
            v[i] = normal(&mut r);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= n);
        dirs.push((format!("proj{p}"), v));
    }
    dirs
}

/// Gaussian marginal of `l . x` under `|Psi|^2`, if the functional is Gaussian.
fn gaussian_projection(f: &WaveFunctional, l: &[f64]) -> Option<Normal> {
    let (inner, map) = unwrap_gauge(f);
    let g = inner.as_gaussian()?;
    let (mut mean, mut var) = (0.0, 0.0);
    for (r, lr) in l.iter().enumerate() {
        let i = match map {
            Some(m) => match m[r] {
                Some(i) => i,
                None => continue,
            },
            None => r,
        };
        mean += lr * g.center[i];
        var += lr * lr * g.sigma(i).powi(2);
    }
    Normal::new(mean, var.sqrt()).ok()
}

/// KS comparison of the ensemble's marginals with those of `|Psi|^2`.
pub fn equivariance_test(ensemble: &Ensemble, functional: &WaveFunctional, cfg: &KsConfig) -> Result<EquivarianceReport> {
    if ensemble.is_empty() || ensemble.dim() != functional.dim() {
        return Err(Error::BasisMismatch("ensemble and functional differ in dimension".into()));
    }
    let dirs = marginal_directions(functional, cfg);
    let per = cfg.level / dirs.len() as f64;
    let n = ensemble.len();
    let reference = if gaussian_projection(functional, &dirs[0].1).is_none() {
        Some(sample_equilibrium(functional, cfg.reference_samples, split(cfg.seed, "reference"))?)
    } else {
        None
    };
    let marginals = dirs
        .iter()
        .map(|(label, l)| {
            let xs = ensemble.project(l);
            let (statistic, critical) = match &reference {
                None => {
                    let nd = gaussian_projection(functional, l).expect("gaussian");
                    (ks_statistic(&xs, |x| nd.cdf(x)), ks_critical(per, n))
                }
                Some(refe) => {
                    let ys = refe.project(l);
                    (ks_two_sample(&xs, &ys), ks_critical_two(per, n, ys.len()))
                }
            };
            MarginalKs { label: label.clone(), statistic, critical, pass: statistic < critical }
        })
        .collect::<Vec<_>>();
    let pass = marginals.iter().all(|m| m.pass);
    Ok(EquivarianceReport { time: ensemble.time, marginals, level: cfg.level, per_test_level: per, pass })
}

/// CDF of `|psi|^2` on a 1-D grid (trapezoid cumulative sum, linear in between).
pub fn grid_cdf(psi: &GridWavefunction) -> impl Fn(f64) -> f64 {
    let xs = psi.grid.axis_nodes(0);
    let rho = psi.density();
    let mut cum = vec![0.0; xs.len()];
    for i in 1..xs.len() {
        cum[i] = cum[i - 1] + 0.5 * (rho[i - 1] + rho[i]) * (xs[i] - xs[i - 1]);
    }
    let total = *cum.last().unwrap();
    move |x: f64| {
        if x <= xs[0] {
            return 0.0;
        }
        if x >= xs[xs.len() - 1] {
            return 1.0;
        }
        let h = xs[1] - xs[0];
        let i = (((x - xs[0]) / h).floor() as usize).min(xs.len() - 2);
        let u = (x - xs[i]) / h;
        // exact integral of the linear interpolant of rho over [x_i, x]
        let part = h * (rho[i] * u + 0.5 * (rho[i + 1] - rho[i]) * u * u);
        (cum[i] + part) / total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HConfig {
    /// Bin width in units of the equilibrium standard deviation of each marginal.
    pub bin_fraction: f64,
    /// Half-range in standard deviations; two tail bins catch the rest.
    pub range_sigmas: f64,
    /// Additive smoothing applied to every bin probability before renormalizing.
    pub epsilon: f64,
    pub reference_samples: usize,
    pub seed: u64,
}

impl Default for HConfig {
    fn default() -> Self {
        HConfig { bin_fraction: 0.05, range_sigmas: 6.0, epsilon: 1e-10, reference_samples: 200_000, seed: 0 }
    }
}

fn binned(values: &[f64], lo: f64, width: f64, nb: usize) -> Vec<f64> {
    // bins: [tail below] [nb interior] [tail above]
    let mut c = vec![0.0; nb + 2];
    for v in values {
        let k = ((v - lo) / width).floor();
        let idx = if k < 0.0 { 0 } else if k >= nb as f64 { nb + 1 } else { k as usize + 1 };
        c[idx] += 1.0;
    }
    let n = values.len() as f64;
    c.iter_mut().for_each(|x| *x /= n);
    c
}

fn smooth(p: &mut [f64], eps: f64) {
    p.iter_mut().for_each(|x| *x += eps);
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
}

/// Coarse-grained H: sum over coordinate marginals of the binned relative
/// entropy of the ensemble against `|Psi|^2`.
pub fn coarse_grained_h(ensemble: &Ensemble, functional: &WaveFunctional, cfg: &HConfig) -> Result<f64> {
    if ensemble.is_empty() || ensemble.dim() != functional.dim() {
        return Err(Error::BasisMismatch("ensemble and functional differ in dimension".into()));
    }
    let live = live_coordinates(functional);
    let reference = if gaussian_projection(functional, &unit(functional.dim(), live[0])).is_none() {
        Some(sample_equilibrium(functional, cfg.reference_samples, split(cfg.seed, "h-reference"))?)
    } else {
        None
    };
    let mut h = 0.0;
    for &r in &live {
        let e = unit(functional.dim(), r);
        let xs = ensemble.project(&e);
        let (mean, sd, mut q) = match &reference {
            None => {
                let nd = gaussian_projection(functional, &e).unwrap();
                let (m, s) = (nd.mean().unwrap(), nd.std_dev().unwrap());
                let width = cfg.bin_fraction * s;
                let nb = (2.0 * cfg.range_sigmas / cfg.bin_fraction).round() as usize;
                let lo = m - cfg.range_sigmas * s;
                let mut q = Vec::with_capacity(nb + 2);
                q.push(nd.cdf(lo));
                for b in 0..nb {
                    q.push(nd.cdf(lo + (b + 1) as f64 * width) - nd.cdf(lo + b as f64 * width));
                }
                q.push(1.0 - nd.cdf(lo + nb as f64 * width));
                (m, s, q)
            }
            Some(refe) => {
                let ys = refe.project(&e);
                let m = ys.iter().sum::<f64>() / ys.len() as f64;
                let s = (ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / ys.len() as f64).sqrt();
                let nb = (2.0 * cfg.range_sigmas / cfg.bin_fraction).round() as usize;
                (m, s, binned(&ys, m - cfg.range_sigmas * s, cfg.bin_fraction * s, nb))
            }
        };
        let nb = (2.0 * cfg.range_sigmas / cfg.bin_fraction).round() as usize;
        let mut p = binned(&xs, mean - cfg.range_sigmas * sd, cfg.bin_fraction * sd, nb);
        smooth(&mut p, cfg.epsilon);
        smooth(&mut q, cfg.epsilon);
        h += p.iter().zip(&q).map(|(a, b)| if *a > 0.0 { a * (a / b).ln() } else { 0.0 }).sum::<f64>();
    }
    Ok(h.max(0.0))
}

/// Expected H of an exact equilibrium sample from finite-N noise alone,
/// `(bins - 1) / 2N` per marginal.
pub fn h_noise_floor(ensemble_size: usize, marginals: usize, cfg: &HConfig) -> f64 {
    let bins = (2.0 * cfg.range_sigmas / cfg.bin_fraction).round() + 2.0;
    marginals as f64 * (bins - 1.0) / (2.0 * ensemble_size as f64)
}

fn unit(d: usize, r: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[r] = 1.0;
    e
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
}

impl Histogram {
    /// Equal-width bins spanning the data.
    pub fn from_values(values: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !(hi > lo) { (lo - 0.5, lo + 0.5) } else { (lo, hi) };
        let w = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for v in values {
            let k = (((v - lo) / w).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
        let n = values.len().max(1) as f64;
        Histogram {
            edges: (0..=bins).map(|i| lo + i as f64 * w).collect(),
            density: counts.iter().map(|c| *c as f64 / (n * w)).collect(),
            counts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedBeableReport {
    pub values: Vec<Complex64>,
    pub mean: Complex64,
    /// Standard errors of the real and imaginary parts of the mean.
    pub std_err: (f64, f64),
    pub histogram_re: Histogram,
    pub histogram_im: Histogram,
    /// Members skipped because the functional vanishes there.
    pub skipped: usize,
}

/// Distribution over the ensemble of a local expectation value at `point`.
pub fn derived_beable_distribution(
    ensemble: &Ensemble,
    theory: &TheoryModel,
    functional: &WaveFunctional,
    kind: OperatorKind,
    point: [f64; 3],
    bins: usize,
) -> Result<DerivedBeableReport> {
    let results: Vec<Result<Complex64>> = ensemble
        .members
        .par_iter()
        .map(|x| local_expectation(theory, functional, x, kind, &[point]).map(|v| v[0]))
        .collect();
    let mut values = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(Error::Degenerate) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(Error::Degenerate);
    }
    let n = values.len() as f64;
    let mean: Complex64 = values.iter().sum::<Complex64>() / n;
    let var_re = values.iter().map(|v| (v.re - mean.re).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let var_im = values.iter().map(|v| (v.im - mean.im).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    Ok(DerivedBeableReport {
        histogram_re: Histogram::from_values(&re, bins),
        histogram_im: Histogram::from_values(&im, bins),
        values,
        mean,
        std_err: ((var_re / n).sqrt(), (var_im / n).sqrt()),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_critical_values() {
        assert!((ks_critical(0.01, 10_000) - 0.016276).abs() < 1e-5);
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_statistic(&u, |x| x.clamp(0.0, 1.0)) <= 0.0005 + 1e-12);
        assert_eq!(ks_two_sample(&u, &u), 0.0);
    }

    #[test]
    fn r_hat_detects_disagreeing_chains() {
        let a: Vec<f64> = (0..200).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 5.0).collect();
        assert!(split_r_hat(&[a.clone(), a.clone()]) < 1.05);
        assert!(split_r_hat(&[a, b]) > 1.5);
    }
}
