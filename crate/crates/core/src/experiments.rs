//! End-to-end numerical experiments. Each returns a serializable report;
//! `cli_io` turns reports into files and pass/fail checks.

use crate::dynamics::{
    correct_velocity, evolve_free, floored_velocity, integrate_guidance, naive_hj_velocity, transport_on_grid, GridHamiltonianSpec, Tolerances, VelocityRule,
};
use crate::ensemble_stats::{
    coarse_grained_h, equivariance_test, evolve_ensemble, grid_cdf, h_noise_floor, ks_critical, ks_statistic, sample_equilibrium, EquivarianceReport,
    HConfig, KsConfig,
};
use crate::error::{Error, Result};
use crate::mode_basis::{ModeBasis, Part};
use crate::rng::{rng, split};
use crate::theories::{guidance_from_gradient, guidance_velocity, TheoryModel};
use crate::wavefunctionals::{evolve_quadratic, GaugeExtended, GaussianFunctional, GridSpec, GridWavefunction, WaveFunctional};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

/// `n` equally spaced times from 0 to `t_final` inclusive.
pub fn checkpoints(t_final: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![t_final];
    }
    (0..n).map(|i| t_final * i as f64 / (n - 1) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceRun {
    pub theory: String,
    pub sampling: String,
    pub flagged_members: usize,
    pub reports: Vec<EquivarianceReport>,
}

impl EquivarianceRun {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Sample `|Psi_0|^2`, transport with the guidance law, and KS-test the
/// ensemble against `|Psi_t|^2` at every time in `times`.
pub fn equivariance(theory: &TheoryModel, psi0: &WaveFunctional, n: usize, times: &[f64], tol: &Tolerances, ks: &KsConfig, seed: u64) -> Result<EquivarianceRun> {
    let ens = sample_equilibrium(psi0, n, split(seed, "ensemble"))?;
    let evolved = evolve_ensemble(&ens, theory, psi0, times, tol, 0.01)?;
    let mut reports = Vec::with_capacity(times.len());
    for (i, snap) in evolved.snapshots.iter().enumerate() {
        let psi_t = evolve_quadratic(psi0, theory, times[i] - psi0.time())?;
        let cfg = KsConfig { seed: split(ks.seed, &format!("checkpoint{i}")), ..ks.clone() };
        reports.push(equivariance_test(snap, &psi_t, &cfg)?);
    }
    Ok(EquivarianceRun { theory: theory.kind.name().into(), sampling: ens.provenance.method, flagged_members: evolved.flagged, reports })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationRun {
    pub times: Vec<f64>,
    pub h_bar: Vec<f64>,
    /// Expected value for an exact equilibrium sample of the same size.
    pub noise_floor: f64,
    /// Least-squares slope of `h_bar` against time.
    pub slope: f64,
}

/// Coarse-grained H of an ensemble drawn from `initial` and guided by `psi0`.
pub fn relaxation(
    theory: &TheoryModel,
    psi0: &WaveFunctional,
    initial: &WaveFunctional,
    n: usize,
    times: &[f64],
    tol: &Tolerances,
    h: &HConfig,
    seed: u64,
) -> Result<RelaxationRun> {
    if initial.dim() != psi0.dim() {
        return Err(Error::BasisMismatch("initial distribution and functional differ in dimension".into()));
    }
    let ens = sample_equilibrium(initial, n, split(seed, "initial"))?;
    let evolved = evolve_ensemble(&ens, theory, psi0, times, tol, 0.01)?;
    let mut h_bar = Vec::with_capacity(times.len());
    for (i, snap) in evolved.snapshots.iter().enumerate() {
        let psi_t = evolve_quadratic(psi0, theory, times[i] - psi0.time())?;
        let cfg = HConfig { seed: split(h.seed, &format!("h{i}")), ..h.clone() };
        h_bar.push(coarse_grained_h(snap, &psi_t, &cfg)?);
    }
    let slope = linear_slope(times, &h_bar);
    Ok(RelaxationRun { times: times.to_vec(), h_bar, noise_floor: h_noise_floor(n, psi0.dim(), h), slope })
}

fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRun {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub steps: usize,
    pub rejections: usize,
    pub projection_residual: f64,
    pub flagged: bool,
}

/// One guided trajectory from `x0`, or from a draw of `|Psi_0|^2` if `x0` is `None`.
pub fn trajectory(theory: &TheoryModel, psi0: &WaveFunctional, x0: Option<Vec<f64>>, times: &[f64], tol: &Tolerances, seed: u64) -> Result<TrajectoryRun> {
    let x0 = match x0 {
        Some(x) => x,
        None => sample_equilibrium(psi0, 1, split(seed, "start"))?.members.remove(0),
    };
    let t = integrate_guidance(theory, psi0, &x0, times, tol)?;
    if let Some(e) = t.error {
        return Err(e);
    }
    Ok(TrajectoryRun {
        times: t.times,
        states: t.states,
        steps: t.stats.steps,
        rejections: t.stats.rejections,
        projection_residual: t.stats.projection_residual,
        flagged: t.stats.flagged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuarticParams {
    pub grid_points: usize,
    pub extent: f64,
    /// Initial packet `exp(-x^2 / 4 sigma^2 + i k0 x)`.
    pub sigma: f64,
    pub k0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub t_final: f64,
    pub checkpoints: usize,
    pub steps_per_interval: usize,
    pub particles: usize,
    /// KS level applied at each checkpoint.
    pub level: f64,
    /// Grid size for the plane-wave comparison. Spectral third derivatives
    /// amplify round-off by `k_max^3`, so this is kept small.
    pub plane_wave_points: usize,
    /// Relative density below which the grid velocity is set to zero.
    pub density_floor: f64,
    pub seed: u64,
}

impl Default for QuarticParams {
    fn default() -> Self {
        QuarticParams {
            grid_points: 2048,
            extent: 60.0,
            sigma: 1.0,
            k0: 0.0,
            alpha1: 0.1,
            alpha2: 0.5,
            t_final: 4.0,
            checkpoints: 5,
            steps_per_interval: 200,
            particles: 10_000,
            level: 0.01,
            plane_wave_points: 256,
            density_floor: 1e-20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuarticReport {
    pub times: Vec<f64>,
    pub ks_correct: Vec<f64>,
    pub ks_naive: Vec<f64>,
    pub critical: f64,
    /// Largest `|v_correct - v_naive|` over plane waves, relative to the velocity scale.
    pub plane_wave_disagreement: f64,
    /// Largest relative change of the grid norm over the run.
    pub norm_drift: f64,
}

impl QuarticReport {
    pub fn correct_passes_all(&self) -> bool {
        self.ks_correct.iter().all(|d| *d < self.critical)
    }
    pub fn naive_fails_final(&self) -> bool {
        self.ks_naive.last().is_some_and(|d| *d >= self.critical)
    }
}

/// Inverse-CDF sample of a 1-D grid density.
pub fn sample_grid_density(psi: &GridWavefunction, n: usize, seed: u64) -> Vec<f64> {
    let cdf = grid_cdf(psi);
    let (lo, hi) = (psi.grid.lower[0], psi.grid.lower[0] + psi.grid.extent[0] - psi.grid.spacing(0));
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let u: f64 = r.gen();
            let (mut a, mut b) = (lo, hi);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if cdf(m) < u {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// The quartic-dispersion model: transport the same equilibrium ensemble with
/// the current-based velocity and with the Hamilton-Jacobi velocity, and KS-test
/// both against the exactly evolved density.
pub fn quartic_dispersion(p: &QuarticParams) -> Result<QuarticReport> {
    let grid = GridSpec::line(p.grid_points, p.extent)?;
    let spec = GridHamiltonianSpec::quartic(p.alpha1, p.alpha2);
    let psi0 = GridWavefunction::from_fn(grid.clone(), |x| {
        Complex64::from_polar((-x[0] * x[0] / (4.0 * p.sigma * p.sigma)).exp(), p.k0 * x[0])
    })?;
    let times = checkpoints(p.t_final, p.checkpoints);
    let start = sample_grid_density(&psi0, p.particles, split(p.seed, "appendix-a"));
    let critical = ks_critical(p.level, p.particles);
    let psi_at = |t: f64| evolve_free(&spec, &psi0, t);
    let mut norm_drift: f64 = 0.0;
    let mut run = |naive: bool| -> Result<Vec<f64>> {
        let mut xs = start.clone();
        let mut out = Vec::with_capacity(times.len());
        for (i, &t) in times.iter().enumerate() {
            if i > 0 {
                let dt = (t - times[i - 1]) / p.steps_per_interval as f64;
                transport_on_grid(&grid, &mut xs, times[i - 1], dt, p.steps_per_interval, |s| {
                    let psi = psi_at(s)?;
                    let rule = if naive { VelocityRule::HamiltonJacobi } else { VelocityRule::Current };
                    let v = floored_velocity(&psi, &spec, rule, p.density_floor)?;
                    Ok(v.into_iter().next().unwrap())
                })?;
            }
            let psi_t = psi_at(t)?;
            norm_drift = norm_drift.max((psi_t.norm_sqr() - 1.0).abs());
            out.push(ks_statistic(&xs, grid_cdf(&psi_t)));
        }
        Ok(out)
    };
    let ks_correct = run(false)?;
    let ks_naive = run(true)?;
    Ok(QuarticReport { times, ks_correct, ks_naive, critical, plane_wave_disagreement: plane_wave_check(p)?, norm_drift })
}

/// On `e^{ikx}` both prescriptions give `dT/dk`.
fn plane_wave_check(p: &QuarticParams) -> Result<f64> {
    let grid = GridSpec::line(p.plane_wave_points, p.extent)?;
    let spec = GridHamiltonianSpec::quartic(p.alpha1, p.alpha2);
    let mut worst: f64 = 0.0;
    for m in [1i32, 3, 7, 16, -5] {
        let k = 2.0 * std::f64::consts::PI * m as f64 / p.extent;
        let psi = GridWavefunction::from_fn(grid.clone(), |x| Complex64::from_polar(1.0, k * x[0]))?;
        let a = &correct_velocity(&psi, &spec)?[0];
        let b = &naive_hj_velocity(&psi, &spec)?[0];
        let scale = 4.0 * p.alpha1 * k.abs().powi(3) + 2.0 * p.alpha2 * k.abs();
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x - y).abs() / scale);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeEquivalenceReport {
    pub times: Vec<f64>,
    /// Largest `|B_bohm - B_valentini|` per output time, over all modes and components.
    pub b_difference: Vec<f64>,
    /// Largest `|dA_L/dt|` seen in the Valentini run.
    pub longitudinal_velocity: f64,
}

/// `B_k = i k x A_k` for every mode of a vector basis.
pub fn magnetic_field(basis: &ModeBasis, coords: &[f64]) -> Vec<[Complex64; 3]> {
    let amps = basis.unpack(coords);
    (0..basis.len())
        .map(|i| {
            let mut a = [Complex64::new(0.0, 0.0); 3];
            for pol in 0..basis.n_pol() {
                let e = basis.pol_vector(i, pol);
                for c in 0..3 {
                    a[c] += amps[basis.slot(i, pol)] * e[c];
                }
            }
            let k = basis.momentum(i);
            let ik = |x: f64| Complex64::new(0.0, x);
            [ik(k[1]) * a[2] - ik(k[2]) * a[1], ik(k[2]) * a[0] - ik(k[0]) * a[2], ik(k[0]) * a[1] - ik(k[1]) * a[0]]
        })
        .collect()
}

/// Embedding of Bohm's transverse coordinates into Valentini's full ones.
fn transverse_embedding(bohm: &TheoryModel, val: &TheoryModel) -> Result<Vec<Option<usize>>> {
    let bb = &bohm.space().sector("A").ok_or_else(|| Error::BasisMismatch("no A sector".into()))?.basis;
    let vb = &val.space().sector("A").ok_or_else(|| Error::BasisMismatch("no A sector".into()))?.basis;
    if bb.len() != vb.len() {
        return Err(Error::BasisMismatch("Bohm and Valentini bases hold different modes".into()));
    }
    let mut embed = vec![None; vb.dim()];
    for (r, c) in bb.coordinates().iter().enumerate() {
        let j = vb.index_of(bb.lattice(c.mode)).ok_or_else(|| Error::BasisMismatch("mode missing in Valentini basis".into()))?;
        let (e1, e2) = (bb.pol_vector(c.mode, c.pol), vb.pol_vector(j, c.pol));
        if e1.iter().zip(&e2).any(|(a, b)| (a - b).abs() > 1e-14) {
            return Err(Error::BasisMismatch("polarization frames differ".into()));
        }
        let q = vb.coord_index(j, c.pol, c.part).ok_or_else(|| Error::BasisMismatch("coordinate missing".into()))?;
        embed[q] = Some(r);
    }
    Ok(embed)
}

/// Guide the same transverse data with Bohm's and Valentini's laws and compare
/// the magnetic field along the way.
pub fn gauge_equivalence(l: f64, cutoff: f64, psi_bohm: &WaveFunctional, times: &[f64], tol: &Tolerances, seed: u64) -> Result<GaugeEquivalenceReport> {
    let bohm = TheoryModel::free_em_bohm(l, cutoff)?;
    let val = TheoryModel::free_em_valentini(l, cutoff)?;
    let embed = transverse_embedding(&bohm, &val)?;
    let psi_val = WaveFunctional::Gauge(GaugeExtended { inner: Box::new(psi_bohm.clone()), embed: embed.clone() });
    let xb = sample_equilibrium(psi_bohm, 1, split(seed, "start"))?.members.remove(0);
    let mut r = rng(split(seed, "longitudinal"));
    let xv: Vec<f64> = embed
        .iter()
        .map(|e| match e {
            Some(i) => xb[*i],
            None => r.gen_range(-1.0..1.0),
        })
        .collect();
    let tb = integrate_guidance(&bohm, psi_bohm, &xb, times, tol)?;
    let tv = integrate_guidance(&val, &psi_val, &xv, times, tol)?;
    if let Some(e) = tb.error.or(tv.error) {
        return Err(e);
    }
    let bb = &bohm.space().sector("A").unwrap().basis;
    let vb = &val.space().sector("A").unwrap().basis;
    let mut b_difference = Vec::with_capacity(times.len());
    let mut longitudinal_velocity: f64 = 0.0;
    for (i, t) in times.iter().enumerate() {
        let fb = magnetic_field(bb, &tb.states[i]);
        let fv = magnetic_field(vb, &tv.states[i]);
        let mut d: f64 = 0.0;
        for (m, row) in fb.iter().enumerate() {
            let j = vb.index_of(bb.lattice(m)).unwrap();
            for c in 0..3 {
                d = d.max((row[c] - fv[j][c]).norm());
            }
        }
        b_difference.push(d);
        let psi_t = evolve_quadratic(&psi_val, &val, *t - psi_val.time())?;
        let v = guidance_velocity(&val, &psi_t, &tv.states[i])?;
        for (q, e) in embed.iter().enumerate() {
            if e.is_none() {
                longitudinal_velocity = longitudinal_velocity.max(v[q].abs());
            }
        }
    }
    Ok(GaugeEquivalenceReport { times: times.to_vec(), b_difference, longitudinal_velocity })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizationRow {
    pub epsilon: f64,
    /// `|T v_full - v_quadratic| / |v_quadratic|`.
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiggsLinearization {
    pub rows: Vec<LinearizationRow>,
    /// Slope of `ln error` against `ln epsilon`; 1 for linear convergence.
    pub order: f64,
}

/// The linear map from full Higgs-model coordinates (deviation from the
/// vacuum) to quadratic-sector coordinates: `phi = (v + eta + i xi)/sqrt 2`
/// and `A^L = -grad xi / (e v)`, `A^T` carried over.
pub struct HiggsMap {
    /// Row-major `dim_q x dim_f`.
    pub matrix: Vec<Vec<f64>>,
    /// Full-model coordinates of the vacuum `phi = v / sqrt 2`.
    pub vacuum: Vec<f64>,
}

impl HiggsMap {
    pub fn new(full: &TheoryModel, quad: &TheoryModel) -> Result<Self> {
        let (e, v) = match (full.params.charge, full.params.mu, full.params.lambda) {
            (Some(e), Some(mu), Some(lambda)) => (e, (mu * mu / lambda).sqrt()),
            _ => return Err(Error::InvalidParameter("full Higgs model needs charge, mu, lambda".into())),
        };
        let phi = full.space().sector("phi").ok_or_else(|| Error::BasisMismatch("no phi sector".into()))?;
        let at = full.space().sector("A").ok_or_else(|| Error::BasisMismatch("no A sector".into()))?;
        let eta = quad.space().sector("eta").ok_or_else(|| Error::BasisMismatch("no eta sector".into()))?;
        let aq = quad.space().sector("A").ok_or_else(|| Error::BasisMismatch("no A sector".into()))?;
        let zero = Complex64::new(0.0, 0.0);
        let apply = |x: &[f64]| -> Vec<f64> {
            let c = phi.basis.unpack(&x[phi.offset..phi.offset + phi.basis.dim()]);
            let mut eta_amp = vec![zero; eta.basis.n_slots()];
            let mut xi = vec![zero; phi.basis.len()];
            for k in 0..phi.basis.len() {
                let n = phi.basis.lattice(k);
                let mk = phi.basis.index_of([-n[0], -n[1], -n[2]]).expect("basis is symmetric");
                let ck = c[phi.basis.slot(k, 0)];
                let cm = c[phi.basis.slot(mk, 0)].conj();
                xi[k] = (ck - cm) / Complex64::new(0.0, SQRT_2);
                let j = eta.basis.index_of(n).expect("eta basis holds every phi mode");
                eta_amp[eta.basis.slot(j, 0)] = (ck + cm) / SQRT_2;
            }
            let ta = at.basis.unpack(&x[at.offset..at.offset + at.basis.dim()]);
            let mut a_amp = vec![zero; aq.basis.n_slots()];
            for j in 0..aq.basis.len() {
                let n = aq.basis.lattice(j);
                if let Some(i) = at.basis.index_of(n) {
                    for pol in 0..2 {
                        a_amp[aq.basis.slot(j, pol)] = ta[at.basis.slot(i, pol)];
                    }
                }
                let k = aq.basis.momentum(j);
                let kn = aq.basis.k2(j).sqrt();
                let e2 = aq.basis.pol_vector(j, 2);
                let along = (e2[0] * k[0] + e2[1] * k[1] + e2[2] * k[2]) / kn;
                let ki = phi.basis.index_of(n).expect("phi basis holds every vector mode");
                a_amp[aq.basis.slot(j, 2)] = Complex64::new(0.0, -kn * along) * xi[ki] / (e * v);
            }
            let mut y = eta.basis.pack(&eta_amp);
            y.extend(aq.basis.pack(&a_amp));
            y
        };
        let df = full.dim();
        let cols: Vec<Vec<f64>> = (0..df)
            .map(|j| {
                let mut u = vec![0.0; df];
                u[j] = 1.0;
                apply(&u)
            })
            .collect();
        let dq = quad.dim();
        let matrix = (0..dq).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let mut vacuum = vec![0.0; df];
        let z = phi.basis.index_of([0, 0, 0]).ok_or_else(|| Error::BasisMismatch("phi basis needs its zero mode".into()))?;
        let r = phi.basis.coord_index(z, 0, Part::Re).expect("zero-mode coordinate") + phi.offset;
        // c_0 = L^{3/2} v / sqrt 2 and c_0 = (u + i w) / sqrt 2
        vacuum[r] = phi.basis.box_length().powf(1.5) * v;
        Ok(HiggsMap { matrix, vacuum })
    }

    pub fn apply(&self, dx: &[f64]) -> Vec<f64> {
        self.matrix.iter().map(|row| row.iter().zip(dx).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.vacuum.len()];
        for (row, gi) in self.matrix.iter().zip(g) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * gi;
            }
        }
        out
    }
}

/// Compare the full Coulomb-gauge guidance with the quadratic-sector guidance
/// on states of amplitude `epsilon` about the vacuum.
pub fn higgs_linearization(l: f64, cutoff: f64, mu: f64, lambda: f64, charge: f64, epsilons: &[f64], seed: u64) -> Result<HiggsLinearization> {
    let full = TheoryModel::abelian_higgs(l, cutoff, mu, lambda, charge)?;
    let quad = TheoryModel::higgs_quadratic(l, cutoff, mu, lambda, charge)?;
    let map = HiggsMap::new(&full, &quad)?;
    let mut r = rng(split(seed, "higgs"));
    let dq = quad.dim();
    let df = full.dim();
    let widths: Vec<Complex64> =
        (0..dq).map(|i| Complex64::new(quad.vacuum_width(i).unwrap_or(1.0) * r.gen_range(0.5..1.5), r.gen_range(-1.0..1.0))).collect();
    let centers: Vec<f64> = (0..dq).map(|_| r.gen_range(-1.0..1.0)).collect();
    let moms: Vec<f64> = (0..dq).map(|_| r.gen_range(-1.0..1.0)).collect();
    let dx_dir: Vec<f64> = (0..df).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut rows = Vec::new();
    for &eps in epsilons {
        let psi = WaveFunctional::Gaussian(GaussianFunctional::new(
            widths.clone(),
            centers.iter().map(|c| c * eps).collect(),
            moms.iter().map(|m| m * eps).collect(),
        )?);
        let dx: Vec<f64> = dx_dir.iter().map(|d| d * eps).collect();
        let y = map.apply(&dx);
        let x: Vec<f64> = map.vacuum.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let vq = guidance_velocity(&quad, &psi, &y)?;
        let g = psi.phase_gradient(&y)?;
        let vf = guidance_from_gradient(&full, &x, &map.apply_transpose(&g))?;
        let mapped = map.apply(&vf);
        let num = mapped.iter().zip(&vq).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den = vq.iter().map(|a| a * a).sum::<f64>().sqrt();
        rows.push(LinearizationRow { epsilon: eps, relative_error: num / den });
    }
    let lx: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.relative_error.ln()).collect();
    Ok(HiggsLinearization { order: linear_slope(&lx, &ly), rows })
}
