//! Guidance laws.
//!
//! Every mode-space theory here has a kinetic kernel that is diagonal in the
//! polarization basis, so each real coordinate `r` carries a kinetic weight
//! `kappa_r` and a potential weight `nu_r` with
//! `H = sum_r (kappa_r p_r^2 + nu_r x_r^2) / 2` for the quadratic kinds and
//! guidance `dx_r/dt = kappa_r dS/dx_r`.
//!
//! | theory | coordinates | kappa | nu |
//! |---|---|---|---|
//! | Schrodinger field | scalar | k^2/2m | k^2/2m |
//! | free EM (Bohm) | transverse | 1 | k^2 |
//! | free EM (Valentini) | transverse / longitudinal | 1 / 1 | k^2 / 0 |
//! | massive spin-1 | transverse / longitudinal | 1 / 1 + k^2/m^2 | k^2 + m^2 / m^2 |
//! | Higgs, quadratic part | eta, and spin-1 with m = e v | 1 | k^2 + 2 mu^2 |
//!
//! Scalar QED and the full Abelian Higgs model add the Coulomb term
//! `e^2 phi (1/lap) (phi dS/dphi - phi^* dS/dphi^*)` to the matter velocity.
//! In modes, with `phi(x) = L^{-3/2} sum_k e^{ikx} c_k`, `G_k = dS/dc_k`:
//!
//! ```text
//! rho_p  = L^{-3/2} sum_{k - k' = p} (c_k G_k' - G_k^* c_k'^*)
//! w_p    = -rho_p / p^2            (p != 0, the zero mode is dropped)
//! dc_q/dt = G_q^* + e^2 L^{-3/2} sum_k c_k w_{q-k}
//! ```
//!
//! Intermediate momenta `p` range over all differences; the result is projected
//! back onto the retained modes.

use crate::error::{Error, Result};
use crate::mode_basis::{BasisOptions, FieldKind, ModeBasis, Part};
use crate::wavefunctionals::WaveFunctional;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoryKind {
    SchrodingerField,
    FreeEmBohm,
    FreeEmValentini,
    MassiveSpin1,
    ScalarQed,
    AbelianHiggs,
    HiggsQuadratic,
    NonrelParticles,
    QuarticDispersion,
}

impl TheoryKind {
    pub const ALL: [TheoryKind; 9] = [
        TheoryKind::SchrodingerField,
        TheoryKind::FreeEmBohm,
        TheoryKind::FreeEmValentini,
        TheoryKind::MassiveSpin1,
        TheoryKind::ScalarQed,
        TheoryKind::AbelianHiggs,
        TheoryKind::HiggsQuadratic,
        TheoryKind::NonrelParticles,
        TheoryKind::QuarticDispersion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoryKind::SchrodingerField => "schrodinger-field",
            TheoryKind::FreeEmBohm => "free-em-bohm",
            TheoryKind::FreeEmValentini => "free-em-valentini",
            TheoryKind::MassiveSpin1 => "massive-spin1",
            TheoryKind::ScalarQed => "scalar-qed",
            TheoryKind::AbelianHiggs => "abelian-higgs",
            TheoryKind::HiggsQuadratic => "higgs-quadratic",
            TheoryKind::NonrelParticles => "nonrel-particles",
            TheoryKind::QuarticDispersion => "quartic-dispersion",
        }
    }

    pub fn from_name(s: &str) -> Option<TheoryKind> {
        TheoryKind::ALL.iter().copied().find(|k| k.name() == s)
    }

    pub fn is_quadratic(self) -> bool {
        matches!(
            self,
            TheoryKind::SchrodingerField
                | TheoryKind::FreeEmBohm
                | TheoryKind::FreeEmValentini
                | TheoryKind::MassiveSpin1
                | TheoryKind::HiggsQuadratic
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryParams {
    pub mass: Option<f64>,
    pub charge: Option<f64>,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub particle_masses: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Sector {
    pub name: &'static str,
    pub basis: Arc<ModeBasis>,
    pub offset: usize,
}

/// Field content of a theory: one or more bases laid end to end.
#[derive(Clone, Debug, Default)]
pub struct ConfigSpace {
    sectors: Vec<Sector>,
    dim: usize,
}

impl ConfigSpace {
    pub fn new(parts: Vec<(&'static str, Arc<ModeBasis>)>) -> Self {
        let mut sectors = Vec::new();
        let mut offset = 0;
        for (name, basis) in parts {
            let d = basis.dim();
            sectors.push(Sector { name, basis, offset });
            offset += d;
        }
        ConfigSpace { sectors, dim: offset }
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }
    pub fn sector(&self, name: &str) -> Option<&Sector> {
        self.sectors.iter().find(|s| s.name == name)
    }
    /// Locate coordinate `r` as (sector, local index).
    pub fn locate(&self, r: usize) -> (&Sector, usize) {
        for s in &self.sectors {
            if r < s.offset + s.basis.dim() {
                return (s, r - s.offset);
            }
        }
        panic!("coordinate {r} out of range");
    }
}

#[derive(Clone, Debug)]
pub struct TheoryModel {
    pub kind: TheoryKind,
    pub params: TheoryParams,
    space: ConfigSpace,
    kinetic: Vec<f64>,
    potential: Vec<f64>,
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    match v {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => Err(Error::InvalidParameter(format!("{name} = {x} is not finite"))),
        None => Err(Error::InvalidParameter(format!("missing parameter `{name}`"))),
    }
}

fn basis(l: f64, cutoff: f64, kind: FieldKind, zero: Option<bool>) -> Result<Arc<ModeBasis>> {
    Ok(Arc::new(ModeBasis::build(l, cutoff, kind, BasisOptions { zero_mode: zero, ..Default::default() })?))
}

/// Per-coordinate kinetic and potential weights of a massive vector field.
fn spin1_weights(b: &ModeBasis, m: f64, r: usize) -> (f64, f64) {
    let c = b.coordinate(r);
    let k2 = b.k2(c.mode);
    if b.is_zero(c.mode) || c.pol < 2 || b.kind() == FieldKind::VectorTransverse {
        (1.0, k2 + m * m)
    } else {
        (1.0 + k2 / (m * m), m * m)
    }
}

impl TheoryModel {
    fn assemble(kind: TheoryKind, params: TheoryParams, space: ConfigSpace, weight: impl Fn(&Sector, usize) -> (f64, f64)) -> Result<Self> {
        let mut kinetic = Vec::with_capacity(space.dim());
        let mut potential = Vec::with_capacity(space.dim());
        for s in space.sectors() {
            for r in 0..s.basis.dim() {
                let (k, v) = weight(s, r);
                kinetic.push(k);
                potential.push(v);
            }
        }
        if kinetic.iter().any(|k| !(*k >= 0.0) || !k.is_finite()) {
            return Err(Error::Invariant("kinetic kernel is not positive semidefinite".into()));
        }
        Ok(TheoryModel { kind, params, space, kinetic, potential })
    }

    pub fn schrodinger_field(l: f64, cutoff: f64, mass: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("mass must be positive".into()));
        }
        let b = basis(l, cutoff, FieldKind::ScalarReal, None)?;
        let params = TheoryParams { mass: Some(mass), ..Default::default() };
        Self::assemble(TheoryKind::SchrodingerField, params, ConfigSpace::new(vec![("phi", b)]), |s, r| {
            let h = s.basis.k2(s.basis.coordinate(r).mode) / (2.0 * mass);
            (h, h)
        })
    }

    pub fn free_em_bohm(l: f64, cutoff: f64) -> Result<Self> {
        let b = basis(l, cutoff, FieldKind::VectorTransverse, None)?;
        Self::assemble(TheoryKind::FreeEmBohm, TheoryParams::default(), ConfigSpace::new(vec![("A", b)]), |s, r| {
            (1.0, s.basis.k2(s.basis.coordinate(r).mode))
        })
    }

    /// All three components of `A`; the zero mode is excluded so the
    /// transverse/longitudinal split is defined everywhere.
    pub fn free_em_valentini(l: f64, cutoff: f64) -> Result<Self> {
        let b = basis(l, cutoff, FieldKind::VectorFull, Some(false))?;
        Self::assemble(TheoryKind::FreeEmValentini, TheoryParams::default(), ConfigSpace::new(vec![("A", b)]), |s, r| {
            let c = s.basis.coordinate(r);
            if c.pol < 2 {
                (1.0, s.basis.k2(c.mode))
            } else {
                (1.0, 0.0)
            }
        })
    }

    pub fn massive_spin1(l: f64, cutoff: f64, mass: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("mass must be positive".into()));
        }
        let b = basis(l, cutoff, FieldKind::VectorFull, None)?;
        let params = TheoryParams { mass: Some(mass), ..Default::default() };
        Self::assemble(TheoryKind::MassiveSpin1, params, ConfigSpace::new(vec![("A", b)]), |s, r| {
            spin1_weights(&s.basis, mass, r)
        })
    }

    pub fn scalar_qed(l: f64, cutoff: f64, mass: f64, charge: f64) -> Result<Self> {
        let phi = basis(l, cutoff, FieldKind::ScalarComplex, None)?;
        let a = basis(l, cutoff, FieldKind::VectorTransverse, None)?;
        let params = TheoryParams { mass: Some(mass), charge: Some(charge), ..Default::default() };
        Self::assemble(TheoryKind::ScalarQed, params, ConfigSpace::new(vec![("phi", phi), ("A", a)]), |s, r| {
            let k2 = s.basis.k2(s.basis.coordinate(r).mode);
            if s.name == "phi" {
                (1.0, k2 + mass * mass)
            } else {
                (1.0, k2)
            }
        })
    }

    pub fn abelian_higgs(l: f64, cutoff: f64, mu: f64, lambda: f64, charge: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        let phi = basis(l, cutoff, FieldKind::ScalarComplex, None)?;
        let a = basis(l, cutoff, FieldKind::VectorTransverse, None)?;
        let params = TheoryParams { mu: Some(mu), lambda: Some(lambda), charge: Some(charge), ..Default::default() };
        Self::assemble(TheoryKind::AbelianHiggs, params, ConfigSpace::new(vec![("phi", phi), ("A", a)]), |s, r| {
            let k2 = s.basis.k2(s.basis.coordinate(r).mode);
            if s.name == "phi" {
                (1.0, k2 - mu * mu)
            } else {
                (1.0, k2)
            }
        })
    }

    /// Quadratic part of the Higgs model about the vacuum `phi = v / sqrt 2`:
    /// a real scalar `eta` and a massive vector `A` with mass `e v`. The vector
    /// sector drops `k = 0`, where `A^L = -grad xi / (e v)` carries no mode.
    pub fn higgs_quadratic(l: f64, cutoff: f64, mu: f64, lambda: f64, charge: f64) -> Result<Self> {
        let spec = higgs_quadratic_spectrum(mu, lambda, charge, None)?;
        if !(spec.vector_mass > 0.0) {
            return Err(Error::InvalidParameter("the quadratic Higgs sector needs e > 0".into()));
        }
        let eta = basis(l, cutoff, FieldKind::ScalarReal, None)?;
        let a = basis(l, cutoff, FieldKind::VectorFull, Some(false))?;
        let m = spec.vector_mass;
        let ms2 = spec.scalar_mass * spec.scalar_mass;
        let params = TheoryParams { mu: Some(mu), lambda: Some(lambda), charge: Some(charge), ..Default::default() };
        Self::assemble(TheoryKind::HiggsQuadratic, params, ConfigSpace::new(vec![("eta", eta), ("A", a)]), |s, r| {
            if s.name == "eta" {
                (1.0, s.basis.k2(s.basis.coordinate(r).mode) + ms2)
            } else {
                spin1_weights(&s.basis, m, r)
            }
        })
    }

    pub fn nonrel_particles(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() || masses.len() > 3 || masses.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidParameter("need 1 to 3 positive masses".into()));
        }
        let params = TheoryParams { particle_masses: Some(masses), ..Default::default() };
        Ok(TheoryModel { kind: TheoryKind::NonrelParticles, params, space: ConfigSpace::default(), kinetic: vec![], potential: vec![] })
    }

    pub fn quartic_dispersion(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha2 > 0.0) {
            return Err(Error::InvalidParameter("quartic dispersion needs alpha1 > 0 and alpha2 > 0".into()));
        }
        let params = TheoryParams { alpha1: Some(alpha1), alpha2: Some(alpha2), ..Default::default() };
        Ok(TheoryModel { kind: TheoryKind::QuarticDispersion, params, space: ConfigSpace::default(), kinetic: vec![], potential: vec![] })
    }

    /// Build from a kind name, parameters, and box/cutoff.
    pub fn from_parts(kind: TheoryKind, p: &TheoryParams, l: f64, cutoff: f64) -> Result<Self> {
        match kind {
            TheoryKind::SchrodingerField => Self::schrodinger_field(l, cutoff, need(p.mass, "mass")?),
            TheoryKind::FreeEmBohm => Self::free_em_bohm(l, cutoff),
            TheoryKind::FreeEmValentini => Self::free_em_valentini(l, cutoff),
            TheoryKind::MassiveSpin1 => Self::massive_spin1(l, cutoff, need(p.mass, "mass")?),
            TheoryKind::ScalarQed => Self::scalar_qed(l, cutoff, need(p.mass, "mass")?, need(p.charge, "charge")?),
            TheoryKind::AbelianHiggs => {
                Self::abelian_higgs(l, cutoff, need(p.mu, "mu")?, need(p.lambda, "lambda")?, need(p.charge, "charge")?)
            }
            TheoryKind::HiggsQuadratic => {
                Self::higgs_quadratic(l, cutoff, need(p.mu, "mu")?, need(p.lambda, "lambda")?, need(p.charge, "charge")?)
            }
            TheoryKind::NonrelParticles => Self::nonrel_particles(
                p.particle_masses.clone().ok_or_else(|| Error::InvalidParameter("missing `particle_masses`".into()))?,
            ),
            TheoryKind::QuarticDispersion => Self::quartic_dispersion(need(p.alpha1, "alpha1")?, need(p.alpha2, "alpha2")?),
        }
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }
    pub fn dim(&self) -> usize {
        self.space.dim()
    }
    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }
    pub fn is_quadratic(&self) -> bool {
        self.kind.is_quadratic()
    }
    /// Oscillator frequency `sqrt(kappa nu)` of coordinate `r`.
    pub fn omega(&self, r: usize) -> f64 {
        (self.kinetic[r] * self.potential[r]).sqrt()
    }
    /// Ground-state width `sqrt(nu / kappa)`; `None` for a flat (gauge) direction.
    pub fn vacuum_width(&self, r: usize) -> Option<f64> {
        let (k, v) = (self.kinetic[r], self.potential[r]);
        if k == v {
            Some(1.0)
        } else if v > 0.0 && k > 0.0 {
            Some((v / k).sqrt())
        } else {
            None
        }
    }

    fn require_modes(&self) -> Result<()> {
        if self.space.dim() == 0 {
            return Err(Error::Unsupported(format!("{} is a grid theory; use the dynamics grid solver", self.kind.name())));
        }
        Ok(())
    }
}

/// Guidance velocity `dx/dt` at `config` (real coordinates of the theory's field content).
pub fn guidance_velocity(theory: &TheoryModel, functional: &WaveFunctional, config: &[f64]) -> Result<Vec<f64>> {
    theory.require_modes()?;
    if functional.dim() != theory.dim() || config.len() != theory.dim() {
        return Err(Error::BasisMismatch(format!(
            "theory has {} coordinates, functional {}, config {}",
            theory.dim(),
            functional.dim(),
            config.len()
        )));
    }
    let grad = functional.phase_gradient(config)?;
    guidance_from_gradient(theory, config, &grad)
}

/// Guidance velocity from a phase gradient `dS/dx` supplied by the caller.
pub fn guidance_from_gradient(theory: &TheoryModel, config: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
    theory.require_modes()?;
    if grad.len() != theory.dim() || config.len() != theory.dim() {
        return Err(Error::BasisMismatch("gradient or config length differs from the theory".into()));
    }
    let mut v: Vec<f64> = grad.iter().zip(theory.kinetic()).map(|(g, k)| g * k).collect();
    if matches!(theory.kind, TheoryKind::ScalarQed | TheoryKind::AbelianHiggs) {
        let e = theory.params.charge.unwrap_or(0.0);
        let s = theory.space.sector("phi").expect("matter sector");
        let range = s.offset..s.offset + s.basis.dim();
        let (vel, conj) = coulomb_velocity(&s.basis, &config[range.clone()], &grad[range.clone()], e);
        let scale = vel.iter().fold(1e-300f64, |m, z| m.max(z.norm()));
        let mismatch = vel.iter().zip(&conj).fold(0.0f64, |m, (a, b)| m.max((a.conj() - b).norm()));
        if mismatch > 1e-9 * scale.max(1.0) {
            return Err(Error::Invariant(format!("conjugate matter velocities disagree by {mismatch:e}")));
        }
        for (i, cdot) in vel.iter().enumerate() {
            v[s.offset + 2 * i] = SQRT_2 * cdot.re;
            v[s.offset + 2 * i + 1] = SQRT_2 * cdot.im;
        }
    }
    Ok(v)
}

/// Matter velocity of the charged scalar, returned as `(dc/dt, dc^*/dt)`
/// computed from the two equations independently.
fn coulomb_velocity(b: &ModeBasis, coords: &[f64], grad: &[f64], e: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = b.len();
    let c: Vec<Complex64> = (0..n).map(|i| Complex64::new(coords[2 * i], coords[2 * i + 1]) / SQRT_2).collect();
    // G_k = dS/dc_k, Gbar_k = dS/dc_k^*
    let g: Vec<Complex64> = (0..n).map(|i| Complex64::new(grad[2 * i], -grad[2 * i + 1]) / SQRT_2).collect();
    let gbar: Vec<Complex64> = g.iter().map(|z| z.conj()).collect();
    let norm = b.box_length().powf(-1.5);
    let kscale = (2.0 * PI / b.box_length()).powi(2);
    let mut rho: HashMap<[i32; 3], Complex64> = HashMap::new();
    for k in 0..n {
        let nk = b.lattice(k);
        for kp in 0..n {
            let np = b.lattice(kp);
            let p = [nk[0] - np[0], nk[1] - np[1], nk[2] - np[2]];
            if p == [0, 0, 0] {
                continue;
            }
            *rho.entry(p).or_default() += (c[k] * g[kp] - gbar[k] * c[kp].conj()) * norm;
        }
    }
    let w: HashMap<[i32; 3], Complex64> = rho
        .into_iter()
        .map(|(p, r)| {
            let p2 = kscale * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) as f64;
            (p, -r / p2)
        })
        .collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut vel = Vec::with_capacity(n);
    let mut conj = Vec::with_capacity(n);
    for q in 0..n {
        let nq = b.lattice(q);
        let mut acc = zero;
        let mut acc_c = zero;
        for k in 0..n {
            let nk = b.lattice(k);
            let p = [nq[0] - nk[0], nq[1] - nk[1], nq[2] - nk[2]];
            acc += c[k] * *w.get(&p).unwrap_or(&zero);
            let pc = [nk[0] - nq[0], nk[1] - nq[1], nk[2] - nq[2]];
            acc_c += c[k].conj() * *w.get(&pc).unwrap_or(&zero);
        }
        vel.push(gbar[q] + acc * (e * e * norm));
        conj.push(g[q] - acc_c * (e * e * norm));
    }
    (vel, conj)
}

/// Transverse and longitudinal parts of a full vector configuration, returned
/// as coordinate vectors of the same length with the other part zeroed.
pub fn valentini_split(basis: &ModeBasis, coords: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if basis.kind() != FieldKind::VectorFull {
        return Err(Error::BasisMismatch("valentini_split needs a full vector basis".into()));
    }
    if basis.has_zero_mode() {
        return Err(Error::InvalidParameter("zero mode present: k_i k_j / k^2 is undefined at k = 0".into()));
    }
    if coords.len() != basis.dim() {
        return Err(Error::BasisMismatch("coordinate length mismatch".into()));
    }
    // Project A(k) with k_i k_j / k^2 in Cartesian form, then read back.
    let amps = basis.unpack(coords);
    let mut t = vec![Complex64::new(0.0, 0.0); amps.len()];
    let mut l = vec![Complex64::new(0.0, 0.0); amps.len()];
    for i in 0..basis.len() {
        let mut a = [Complex64::new(0.0, 0.0); 3];
        for pol in 0..3 {
            let e = basis.pol_vector(i, pol);
            for c in 0..3 {
                a[c] += amps[basis.slot(i, pol)] * e[c];
            }
        }
        let k = basis.momentum(i);
        let k2 = basis.k2(i);
        let kdota = a[0] * k[0] + a[1] * k[1] + a[2] * k[2];
        let along = [kdota * (k[0] / k2), kdota * (k[1] / k2), kdota * (k[2] / k2)];
        for pol in 0..3 {
            let e = basis.pol_vector(i, pol);
            let lp = along[0] * e[0] + along[1] * e[1] + along[2] * e[2];
            let ap = a[0] * e[0] + a[1] * e[1] + a[2] * e[2];
            l[basis.slot(i, pol)] = lp;
            t[basis.slot(i, pol)] = ap - lp;
        }
    }
    Ok((basis.pack(&t), basis.pack(&l)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub n: [i32; 3],
    pub k: f64,
    pub omega_scalar: f64,
    pub omega_vector_transverse: f64,
    pub omega_vector_longitudinal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiggsSpectrum {
    pub v: f64,
    pub scalar_mass: f64,
    pub vector_mass: f64,
    pub dispersion: Vec<DispersionRow>,
}

/// Frequency of `H = (kappa p^2 + nu x^2) / 2`, from the eigenvalues of the
/// 2x2 phase-space generator `[[0, kappa], [-nu, 0]]`.
fn oscillator_frequency(kappa: f64, nu: f64) -> f64 {
    // eigenvalues are +- i sqrt(kappa nu)
    (kappa * nu).max(0.0).sqrt()
}

/// Vacuum expectation value, masses, and per-mode dispersion of the quadratic
/// Higgs Hamiltonian. The longitudinal vector weights are multiplied out as
/// `(1 + k^2/m^2) m^2 = k^2 + m^2` so that `e = 0` stays finite.
pub fn higgs_quadratic_spectrum(mu: f64, lambda: f64, charge: f64, basis: Option<&ModeBasis>) -> Result<HiggsSpectrum> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if !(mu * mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter("mu^2 must be positive".into()));
    }
    if !(charge >= 0.0) {
        return Err(Error::InvalidParameter("charge must be non-negative".into()));
    }
    let v = (mu * mu / lambda).sqrt();
    // second derivative of -mu^2 |phi|^2 + lambda |phi|^4 along eta at phi = v/sqrt 2
    let curvature = -mu * mu + 3.0 * lambda * v * v;
    let scalar_mass = curvature.sqrt();
    let vector_mass = (charge * charge * v * v).sqrt();
    let mut dispersion = Vec::new();
    if let Some(b) = basis {
        for i in 0..b.len() {
            if !b.is_representative(i) {
                continue;
            }
            let k2 = b.k2(i);
            let m2 = vector_mass * vector_mass;
            dispersion.push(DispersionRow {
                n: b.lattice(i),
                k: k2.sqrt(),
                omega_scalar: oscillator_frequency(1.0, k2 + scalar_mass * scalar_mass),
                omega_vector_transverse: oscillator_frequency(1.0, k2 + m2),
                omega_vector_longitudinal: oscillator_frequency(1.0, k2 + m2),
            });
        }
    }
    Ok(HiggsSpectrum { v, scalar_mass, vector_mass, dispersion })
}

/// Index of the coordinate `(mode, pol, part)` of the sector named `sector`.
pub fn coord_of(theory: &TheoryModel, sector: &str, mode: usize, pol: usize, part: Part) -> Option<usize> {
    let s = theory.space().sector(sector)?;
    s.basis.coord_index(mode, pol, part).map(|r| r + s.offset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn higgs_example_values() {
        let s = higgs_quadratic_spectrum(1.0, 0.5, 0.3, None).unwrap();
        assert!((s.v - 2f64.sqrt()).abs() < 1e-12);
        assert!((s.scalar_mass - 2f64.sqrt()).abs() < 1e-12);
        assert!((s.vector_mass - 0.3 * 2f64.sqrt()).abs() < 1e-12);
        let z = higgs_quadratic_spectrum(1.0, 0.5, 0.0, None).unwrap();
        assert_eq!(z.vector_mass, 0.0);
        assert!(higgs_quadratic_spectrum(1.0, 0.0, 0.3, None).is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in TheoryKind::ALL {
            assert_eq!(TheoryKind::from_name(k.name()), Some(k));
        }
    }

    #[test]
    fn kernels_are_nonnegative() {
        let l = 2.0 * PI;
        for t in [
            TheoryModel::schrodinger_field(l, 1.5, 0.7).unwrap(),
            TheoryModel::free_em_bohm(l, 1.5).unwrap(),
            TheoryModel::free_em_valentini(l, 1.5).unwrap(),
            TheoryModel::massive_spin1(l, 1.5, 0.4).unwrap(),
            TheoryModel::higgs_quadratic(l, 1.5, 1.0, 0.5, 0.3).unwrap(),
        ] {
            assert!(t.kinetic().iter().all(|k| *k >= 0.0));
            assert!(t.potential().iter().all(|k| *k >= 0.0));
        }
    }
}
