//! Beable transport and the grid Schrodinger solver.
//!
//! Trajectories use the Dormand-Prince 5(4) pair with standard error control.
//! A vanishing wave functional inside a stage rejects the step and halves it;
//! once the step falls below `h_min` the trajectory is returned flagged.
//!
//! The grid solver is a Strang split (half potential, kinetic, half potential)
//! with the kinetic factor applied exactly in Fourier space, so any real
//! polynomial symbol is handled without a stencil.

use crate::error::{Error, Result};
use crate::theories::{guidance_velocity, TheoryModel};
use crate::wavefunctionals::{evolve_quadratic, GridSpec, GridWavefunction, WaveFunctional};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step before a trajectory is flagged.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-9, atol: 1e-11, h_min: 1e-10, max_steps: 2_000_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub steps: usize,
    pub rejections: usize,
    pub degenerate_events: usize,
    /// Largest reality-pairing residual seen at the output times.
    pub projection_residual: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: TrajectoryStats,
    /// Set when the run stopped early; `times`/`states` hold what was reached.
    pub error: Option<Error>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has its initial point")
    }
}

/// A time-dependent velocity field on configuration space.
pub trait VelocityField: Sync {
    fn dim(&self) -> usize;
    fn velocity(&self, t: f64, x: &[f64]) -> Result<Vec<f64>>;
}

/// Guidance by a functional that evolves exactly under a quadratic theory.
pub struct QuadraticGuidance<'a> {
    pub theory: &'a TheoryModel,
    /// The functional at `t = 0`.
    pub psi0: &'a WaveFunctional,
}

impl VelocityField for QuadraticGuidance<'_> {
    fn dim(&self) -> usize {
        self.theory.dim()
    }
    fn velocity(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let psi = evolve_quadratic(self.psi0, self.theory, t - self.psi0.time())?;
        guidance_velocity(self.theory, &psi, x)
    }
}

/// Guidance by a fixed functional (for theories without a solution method).
pub struct FrozenGuidance<'a> {
    pub theory: &'a TheoryModel,
    pub psi: &'a WaveFunctional,
}

impl VelocityField for FrozenGuidance<'_> {
    fn dim(&self) -> usize {
        self.theory.dim()
    }
    fn velocity(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
        guidance_velocity(self.theory, self.psi, x)
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand-Prince attempt: new state and scaled error norm.
fn dopri_step(field: &dyn VelocityField, t: f64, y: &[f64], h: f64, tol: &Tolerances) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    let mut tmp = vec![0.0; n];
    for s in 0..7 {
        for i in 0..n {
            let mut acc = y[i];
            for (j, kj) in k.iter().enumerate() {
                acc += h * A[s][j] * kj[i];
            }
            tmp[i] = acc;
        }
        k.push(field.velocity(t + C[s] * h, &tmp)?);
    }
    // stage 7 is evaluated at the 5th-order solution, which is `tmp`
    let mut err = 0.0;
    for i in 0..n {
        let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
        let sc = tol.atol + tol.rtol * y[i].abs().max(tmp[i].abs());
        err += (e / sc).powi(2);
    }
    Ok((tmp, (err / n.max(1) as f64).sqrt()))
}

/// Integrate `dx/dt = v(t, x)` from `times[0]` through the (monotone) output times.
pub fn integrate_trajectory(field: &dyn VelocityField, x0: &[f64], times: &[f64], tol: &Tolerances) -> Result<Trajectory> {
    if x0.len() != field.dim() {
        return Err(Error::BasisMismatch(format!("config has {} coordinates, field {}", x0.len(), field.dim())));
    }
    if times.is_empty() {
        return Err(Error::InvalidParameter("no output times".into()));
    }
    let dir = if times.len() > 1 && times[times.len() - 1] < times[0] { -1.0 } else { 1.0 };
    if times.windows(2).any(|w| (w[1] - w[0]) * dir <= 0.0) {
        return Err(Error::InvalidParameter("output times must be strictly monotone".into()));
    }
    let mut traj = Trajectory { times: vec![times[0]], states: vec![x0.to_vec()], stats: TrajectoryStats::default(), error: None };
    let mut t = times[0];
    let mut y = x0.to_vec();
    let span = (times[times.len() - 1] - times[0]).abs();
    let mut h = (1e-3 * span).max(tol.h_min * 16.0).min(span.max(tol.h_min));
    for &target in &times[1..] {
        while (target - t) * dir > 1e-14 * target.abs().max(1.0) {
            if traj.stats.steps + traj.stats.rejections >= tol.max_steps {
                traj.error = Some(Error::StepUnderflow { t });
                traj.stats.flagged = true;
                return Ok(traj);
            }
            let step = h.min((target - t).abs());
            match dopri_step(field, t, &y, dir * step, tol) {
                Ok((ynew, err)) if err <= 1.0 => {
                    t = if step == (target - t).abs() { target } else { t + dir * step };
                    y = ynew;
                    traj.stats.steps += 1;
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    h = (step * fac).max(tol.h_min);
                }
                Ok((_, err)) => {
                    traj.stats.rejections += 1;
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                }
                Err(Error::Degenerate) => {
                    traj.stats.degenerate_events += 1;
                    traj.stats.rejections += 1;
                    h = 0.5 * step;
                }
                Err(e) => return Err(e),
            }
            if h < tol.h_min {
                traj.stats.flagged = true;
                traj.error = Some(Error::StepUnderflow { t });
                return Ok(traj);
            }
        }
        traj.times.push(target);
        traj.states.push(y.clone());
    }
    Ok(traj)
}

/// Integrate under a quadratic theory's guidance law and log the reality
/// residual of every sector at each output time.
pub fn integrate_guidance(theory: &TheoryModel, psi0: &WaveFunctional, x0: &[f64], times: &[f64], tol: &Tolerances) -> Result<Trajectory> {
    let field = QuadraticGuidance { theory, psi0 };
    let mut traj = integrate_trajectory(&field, x0, times, tol)?;
    for x in &traj.states {
        for s in theory.space().sectors() {
            let amps = s.basis.unpack(&x[s.offset..s.offset + s.basis.dim()]);
            traj.stats.projection_residual = traj.stats.projection_residual.max(s.basis.reality_residual(&amps));
        }
    }
    Ok(traj)
}

/// Kinetic symbol per axis (`sum_j c_j p^j`) and an optional potential on the nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHamiltonianSpec {
    pub kinetic: Vec<Vec<f64>>,
    pub potential: Option<Vec<f64>>,
}

impl GridHamiltonianSpec {
    /// `sum_a p_a^2 / 2 m_a`.
    pub fn quadratic(masses: &[f64]) -> Self {
        GridHamiltonianSpec { kinetic: masses.iter().map(|m| vec![0.0, 0.0, 0.5 / m]).collect(), potential: None }
    }

    /// `alpha1 p^4 + alpha2 p^2` in one dimension.
    pub fn quartic(alpha1: f64, alpha2: f64) -> Self {
        GridHamiltonianSpec { kinetic: vec![vec![0.0, 0.0, alpha2, 0.0, alpha1]], potential: None }
    }

    pub fn with_potential(mut self, grid: &GridSpec, v: impl Fn(&[f64]) -> f64) -> Self {
        self.potential = Some((0..grid.len()).map(|i| v(&grid.node(i))).collect());
        self
    }

    pub fn symbol(&self, k: &[f64]) -> f64 {
        self.kinetic.iter().zip(k).map(|(c, p)| c.iter().rev().fold(0.0, |acc, cj| acc * p + cj)).sum()
    }

    fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.kinetic.len() != grid.dim() {
            return Err(Error::BasisMismatch("kinetic symbol needs one polynomial per axis".into()));
        }
        if let Some(v) = &self.potential {
            if v.len() != grid.len() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("potential must be finite on every node".into()));
            }
        }
        for c in &self.kinetic {
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("non-finite kinetic coefficient".into()));
            }
            if let Some(deg) = c.iter().rposition(|x| *x != 0.0) {
                if deg > 0 && (deg % 2 == 1 || c[deg] < 0.0) {
                    return Err(Error::InvalidParameter("kinetic symbol is not bounded below".into()));
                }
            }
        }
        Ok(())
    }
}

/// Exact kinetic phases `exp(-i T(k) dt)` in FFT order.
fn kinetic_phases(spec: &GridHamiltonianSpec, sp: &crate::spectral::Spectral, n: usize, dt: f64) -> (Vec<Complex64>, f64) {
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    let ph = (0..n)
        .map(|i| {
            let t = spec.symbol(&sp.k_at(i));
            range = (range.0.min(t), range.1.max(t));
            Complex64::from_polar(1.0, -t * dt)
        })
        .collect();
    (ph, range.1 - range.0)
}

/// Strang-split evolution by `steps` steps of `dt`.
pub fn grid_evolve(spec: &GridHamiltonianSpec, psi0: &GridWavefunction, dt: f64, steps: usize) -> Result<GridWavefunction> {
    spec.validate(&psi0.grid)?;
    let sp = psi0.grid.spectral();
    let n = psi0.grid.len();
    let (kin, t_range) = kinetic_phases(spec, &sp, n, dt);
    if !kin.iter().all(|z| z.re.is_finite()) {
        return Err(Error::Stability("kinetic symbol is not finite on the grid".into()));
    }
    let half_v: Option<Vec<Complex64>> = match &spec.potential {
        Some(v) => {
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
            // splitting error is controlled only while both phase ranges stay below pi
            if dt.abs() * t_range > PI || dt.abs() * (hi - lo) > PI {
                return Err(Error::Stability(format!(
                    "dt = {dt} too large: kinetic phase range {:.3}, potential phase range {:.3}",
                    dt.abs() * t_range,
                    dt.abs() * (hi - lo)
                )));
            }
            Some(v.iter().map(|x| Complex64::from_polar(1.0, -0.5 * x * dt)).collect())
        }
        None => None,
    };
    let mut psi = psi0.values.clone();
    for _ in 0..steps {
        if let Some(h) = &half_v {
            psi.iter_mut().zip(h).for_each(|(a, b)| *a *= b);
        }
        sp.forward(&mut psi);
        psi.iter_mut().zip(&kin).for_each(|(a, b)| *a *= b);
        sp.inverse(&mut psi);
        if let Some(h) = &half_v {
            psi.iter_mut().zip(h).for_each(|(a, b)| *a *= b);
        }
    }
    Ok(GridWavefunction { grid: psi0.grid.clone(), values: psi, time: psi0.time + dt * steps as f64 })
}

/// Exact free evolution by time `t` (spec must have no potential).
pub fn evolve_free(spec: &GridHamiltonianSpec, psi0: &GridWavefunction, t: f64) -> Result<GridWavefunction> {
    if spec.potential.is_some() {
        return Err(Error::Unsupported("exact evolution needs a potential-free spec".into()));
    }
    grid_evolve(spec, psi0, t, 1)
}

/// `<H>` with the kinetic part evaluated spectrally.
pub fn energy(spec: &GridHamiltonianSpec, psi: &GridWavefunction) -> Result<f64> {
    spec.validate(&psi.grid)?;
    let sp = psi.grid.spectral();
    let hpsi = sp.apply(&psi.values, |k| Complex64::new(spec.symbol(k), 0.0));
    let mut e: f64 = psi.values.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum();
    if let Some(v) = &spec.potential {
        e += psi.values.iter().zip(v).map(|(a, x)| a.norm_sqr() * x).sum::<f64>();
    }
    Ok(e * psi.grid.cell_volume())
}

/// Even-power coefficients `(c2, c4)` of one axis, or an error for odd or higher powers.
fn even_coefficients(c: &[f64]) -> Result<(f64, f64)> {
    for (j, x) in c.iter().enumerate() {
        if *x != 0.0 && (j == 1 || j == 3 || j > 4) {
            return Err(Error::Unsupported("current implemented for p^2 and p^4 terms".into()));
        }
    }
    Ok((c.get(2).copied().unwrap_or(0.0), c.get(4).copied().unwrap_or(0.0)))
}

/// Probability current per axis:
/// `j = 2 Im[c4 (psi^*''' psi + psi^*' psi'') + c2 psi^* psi']`.
pub fn grid_current(psi: &GridWavefunction, spec: &GridHamiltonianSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate(&psi.grid)?;
    let sp = psi.grid.spectral();
    let mut out = Vec::with_capacity(psi.grid.dim());
    for a in 0..psi.grid.dim() {
        let (c2, c4) = even_coefficients(&spec.kinetic[a])?;
        let d1 = sp.derivative(&psi.values, a, 1);
        let (d2, d3) = if c4 != 0.0 { (sp.derivative(&psi.values, a, 2), sp.derivative(&psi.values, a, 3)) } else { (vec![], vec![]) };
        let j = (0..psi.values.len())
            .map(|i| {
                let p = psi.values[i];
                let mut z = c2 * p.conj() * d1[i];
                if c4 != 0.0 {
                    z += c4 * (d3[i].conj() * p + d1[i].conj() * d2[i]);
                }
                2.0 * z.im
            })
            .collect();
        out.push(j);
    }
    Ok(out)
}

fn require_nodeless(psi: &GridWavefunction) -> Result<()> {
    if psi.values.iter().any(|z| z.norm_sqr() == 0.0) {
        return Err(Error::Degenerate);
    }
    Ok(())
}

/// `j / |psi|^2` per axis.
pub fn correct_velocity(psi: &GridWavefunction, spec: &GridHamiltonianSpec) -> Result<Vec<Vec<f64>>> {
    require_nodeless(psi)?;
    let j = grid_current(psi, spec)?;
    Ok(j.into_iter().map(|ja| ja.iter().zip(&psi.values).map(|(x, p)| x / p.norm_sqr()).collect()).collect())
}

/// Log-derivatives of `psi = R e^{iS}` along one axis:
/// `(R'/R, R''/R, S', S'', S''')` at every node.
fn polar_derivatives(psi: &GridWavefunction, axis: usize) -> Vec<[f64; 5]> {
    let sp = psi.grid.spectral();
    let d1 = sp.derivative(&psi.values, axis, 1);
    let d2 = sp.derivative(&psi.values, axis, 2);
    let d3 = sp.derivative(&psi.values, axis, 3);
    (0..psi.values.len())
        .map(|i| {
            let p = psi.values[i];
            let (u1, u2, u3) = (d1[i] / p, d2[i] / p, d3[i] / p);
            let (r1, s1) = (u1.re, u1.im);
            let r2 = u2.re + s1 * s1;
            let s2 = u2.im - 2.0 * r1 * s1;
            let s3 = u3.im - 3.0 * r2 * s1 - 3.0 * r1 * s2 + s1 * s1 * s1;
            [r1, r2, s1, s2, s3]
        })
        .collect()
}

/// The guidance velocity in polar form, built from `R` and `S` derivatives:
/// `4 c4 [S'^3 - 2 S' R''/R + S' (R'/R)^2 - S'' R'/R - S'''/2] + 2 c2 S'`.
pub fn polar_velocity(psi: &GridWavefunction, spec: &GridHamiltonianSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate(&psi.grid)?;
    require_nodeless(psi)?;
    (0..psi.grid.dim())
        .map(|a| {
            let (c2, c4) = even_coefficients(&spec.kinetic[a])?;
            Ok(polar_derivatives(psi, a)
                .iter()
                .map(|&[r1, r2, s1, s2, s3]| {
                    4.0 * c4 * (s1 * s1 * s1 - 2.0 * r2 * s1 + r1 * r1 * s1 - r1 * s2 - 0.5 * s3) + 2.0 * c2 * s1
                })
                .collect())
        })
        .collect()
}

/// The Hamilton-Jacobi prescription: `dT/dp` evaluated at `p = dS/dq`.
pub fn naive_hj_velocity(psi: &GridWavefunction, spec: &GridHamiltonianSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate(&psi.grid)?;
    require_nodeless(psi)?;
    let sp = psi.grid.spectral();
    (0..psi.grid.dim())
        .map(|a| {
            let d1 = sp.derivative(&psi.values, a, 1);
            let c = &spec.kinetic[a];
            Ok(d1
                .iter()
                .zip(&psi.values)
                .map(|(d, p)| {
                    let s1 = (d / p).im;
                    // derivative of the symbol polynomial
                    c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (j, cj)| acc * s1 + j as f64 * cj)
                })
                .collect())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityRule {
    /// `j / |psi|^2`
    Current,
    /// `dT/dp` at `p = dS/dq`
    HamiltonJacobi,
}

/// Grid velocity under `rule`, set to zero at nodes where `|psi|^2` falls
/// below `floor` times its maximum. Useful for transport, where far tails are
/// pure round-off and never visited.
pub fn floored_velocity(psi: &GridWavefunction, spec: &GridHamiltonianSpec, rule: VelocityRule, floor: f64) -> Result<Vec<Vec<f64>>> {
    spec.validate(&psi.grid)?;
    let rho: Vec<f64> = psi.values.iter().map(|z| z.norm_sqr()).collect();
    let cut = floor * rho.iter().cloned().fold(0.0, f64::max);
    match rule {
        VelocityRule::Current => Ok(grid_current(psi, spec)?
            .into_iter()
            .map(|j| j.iter().zip(&rho).map(|(j, r)| if *r > cut { j / r } else { 0.0 }).collect())
            .collect()),
        VelocityRule::HamiltonJacobi => {
            let sp = psi.grid.spectral();
            Ok((0..psi.grid.dim())
                .map(|a| {
                    let d1 = sp.derivative(&psi.values, a, 1);
                    let c = &spec.kinetic[a];
                    (0..rho.len())
                        .map(|i| {
                            if rho[i] <= cut {
                                return 0.0;
                            }
                            let s1 = (psi.values[i].conj() * d1[i]).im / rho[i];
                            c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (j, cj)| acc * s1 + j as f64 * cj)
                        })
                        .collect()
                })
                .collect())
        }
    }
}

/// Particle velocities `grad_k S / m_k` at configuration `x`. The grid axes
/// are split evenly among the particles.
pub fn particle_guidance(psi: &GridWavefunction, masses: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let d = psi.grid.dim();
    if masses.is_empty() || d % masses.len() != 0 || masses.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidParameter("masses must be positive and divide the grid dimension".into()));
    }
    let per = d / masses.len();
    let g = psi.phase_gradient(x)?;
    Ok(g.iter().enumerate().map(|(a, s)| s / masses[a / per]).collect())
}

/// Fixed-step RK4 transport of 1-D positions through a time-dependent
/// velocity defined on the grid nodes.
pub fn transport_on_grid(
    grid: &GridSpec,
    positions: &mut [f64],
    t0: f64,
    dt: f64,
    steps: usize,
    velocity_at: impl Fn(f64) -> Result<Vec<f64>>,
) -> Result<()> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported("grid transport is one-dimensional".into()));
    }
    let interp = |v: &[f64], x: f64| grid.interpolate(v, &[x]);
    let mut t = t0;
    let mut v0 = velocity_at(t)?;
    for _ in 0..steps {
        let vh = velocity_at(t + 0.5 * dt)?;
        let v1 = velocity_at(t + dt)?;
        for x in positions.iter_mut() {
            let k1 = interp(&v0, *x)?;
            let k2 = interp(&vh, *x + 0.5 * dt * k1)?;
            let k3 = interp(&vh, *x + 0.5 * dt * k2)?;
            let k4 = interp(&v1, *x + dt * k3)?;
            *x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t += dt;
        v0 = v1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet(grid: &GridSpec, sigma: f64, k0: f64) -> GridWavefunction {
        GridWavefunction::from_fn(grid.clone(), |x| {
            Complex64::from_polar((-x[0] * x[0] / (4.0 * sigma * sigma)).exp(), k0 * x[0])
        })
        .unwrap()
    }

    #[test]
    fn plane_wave_phase_rate_matches_symbol() {
        let grid = GridSpec::line(64, 2.0 * PI).unwrap();
        let k = 3.0;
        let psi = GridWavefunction::from_fn(grid.clone(), |x| Complex64::from_polar(1.0, k * x[0])).unwrap();
        let spec = GridHamiltonianSpec::quartic(0.3, 0.7);
        let t = 0.37;
        let out = evolve_free(&spec, &psi, t).unwrap();
        let rate = 0.3 * k.powi(4) + 0.7 * k * k;
        for (a, b) in out.values.iter().zip(&psi.values) {
            assert!((a - b * Complex64::from_polar(1.0, -rate * t)).norm() < 1e-12);
        }
    }

    #[test]
    fn free_packet_spreads_as_expected() {
        let grid = GridSpec::line(1024, 80.0).unwrap();
        let sigma = 1.0;
        let psi = packet(&grid, sigma, 0.5);
        let spec = GridHamiltonianSpec::quadratic(&[1.0]);
        let t = 3.0;
        let out = grid_evolve(&spec, &psi, t / 100.0, 100).unwrap();
        let h = grid.cell_volume();
        let xs = grid.axis_nodes(0);
        let mean: f64 = out.values.iter().zip(&xs).map(|(p, x)| p.norm_sqr() * x).sum::<f64>() * h;
        let var: f64 = out.values.iter().zip(&xs).map(|(p, x)| p.norm_sqr() * (x - mean).powi(2)).sum::<f64>() * h;
        let want = sigma * sigma * (1.0 + (t / (2.0 * sigma * sigma)).powi(2));
        assert!((mean - 0.5 * t).abs() < 1e-6);
        assert!((var.sqrt() - want.sqrt()).abs() < 1e-6, "{} vs {}", var.sqrt(), want.sqrt());
    }

    #[test]
    fn quartic_current_forms_agree() {
        let grid = GridSpec::line(512, 40.0).unwrap();
        let spec = GridHamiltonianSpec::quartic(0.2, 0.6);
        let psi = evolve_free(&spec, &packet(&grid, 1.3, 0.4), 0.8).unwrap();
        let a = correct_velocity(&psi, &spec).unwrap();
        let b = polar_velocity(&psi, &spec).unwrap();
        let rho = psi.density();
        let peak = rho.iter().cloned().fold(0.0, f64::max);
        for i in 0..rho.len() {
            if rho[i] > 1e-4 * peak {
                assert!((a[0][i] - b[0][i]).abs() < 1e-8 * a[0][i].abs().max(1.0), "{i}: {} {}", a[0][i], b[0][i]);
            }
        }
        let n = naive_hj_velocity(&psi, &spec).unwrap();
        let diff = (0..rho.len()).filter(|i| rho[*i] > 1e-2 * peak).map(|i| (n[0][i] - a[0][i]).abs()).fold(0.0, f64::max);
        assert!(diff > 1e-2);
    }

    #[test]
    fn stability_violation_is_reported() {
        let grid = GridSpec::line(256, 20.0).unwrap();
        let spec = GridHamiltonianSpec::quadratic(&[1.0]).with_potential(&grid, |x| 0.5 * x[0] * x[0]);
        let psi = packet(&grid, 1.0, 0.0);
        assert!(matches!(grid_evolve(&spec, &psi, 1.0, 1), Err(Error::Stability(_))));
    }

    #[test]
    fn dopri_matches_exponential() {
        struct Decay;
        impl VelocityField for Decay {
            fn dim(&self) -> usize {
                2
            }
            fn velocity(&self, _t: f64, x: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![x[1], -x[0]])
            }
        }
        let tr = integrate_trajectory(&Decay, &[1.0, 0.0], &[0.0, 1.0, 2.0, 5.0], &Tolerances::default()).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.states) {
            assert!((x[0] - t.cos()).abs() < 1e-8 && (x[1] + t.sin()).abs() < 1e-8);
        }
    }
}
