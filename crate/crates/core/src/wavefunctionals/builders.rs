//! Vacuum, coherent, and n-particle constructors.
//!
//! Each real coordinate `x_r` of a quadratic theory is an oscillator with
//! ladder operator `b_r = (sqrt(w) x + i p / sqrt(w)) / sqrt 2`. Field-mode
//! ladder operators are built from these:
//!
//! ```text
//! pair representative k:  a_k  = (b_x + i b_y) / sqrt 2
//! partner -k:             a_-k = s (b_x - i b_y) / sqrt 2
//! zero mode:              a_0  = b
//! complex field:          a_k  = (b_u + i b_v) / sqrt 2
//! ```
//!
//! with `s` the reality sign of the slot.

use super::{ExcitedFunctional, FockFactor, FockTerm, GaugeExtended, GaussianFunctional, WaveFunctional};
use crate::error::{Error, Result};
use crate::mode_basis::{FieldKind, Part};
use crate::theories::{Sector, TheoryModel};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::SQRT_2;

/// Largest particle number accepted by [`n_particle`].
pub const MAX_PARTICLES: usize = 12;

const SYM_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-9;

/// Vacuum widths of a theory plus the map from theory coordinates to the
/// non-flat ("inner") coordinates.
struct VacuumLayout {
    widths: Vec<f64>,
    embed: Vec<Option<usize>>,
}

fn layout(theory: &TheoryModel) -> Result<VacuumLayout> {
    if !theory.is_quadratic() {
        return Err(Error::NonQuadratic(theory.kind.name().into()));
    }
    let mut widths = Vec::new();
    let mut embed = Vec::with_capacity(theory.dim());
    for r in 0..theory.dim() {
        match theory.vacuum_width(r) {
            Some(w) => {
                embed.push(Some(widths.len()));
                widths.push(w);
            }
            None => embed.push(None),
        }
    }
    Ok(VacuumLayout { widths, embed })
}

impl VacuumLayout {
    fn is_flat(&self) -> bool {
        self.embed.iter().any(|e| e.is_none())
    }
    fn wrap(&self, inner: WaveFunctional) -> WaveFunctional {
        if self.is_flat() {
            WaveFunctional::Gauge(GaugeExtended { inner: Box::new(inner), embed: self.embed.clone() })
        } else {
            inner
        }
    }
    fn inner(&self, r: usize) -> Result<usize> {
        self.embed[r].ok_or_else(|| Error::InvalidParameter("excitation placed on a flat (gauge) direction".into()))
    }
}

/// Ground state of a quadratic theory. Flat directions (the Valentini
/// longitudinal field) are carried by a [`GaugeExtended`] wrapper.
pub fn vacuum(theory: &TheoryModel) -> Result<WaveFunctional> {
    let lay = layout(theory)?;
    let n = lay.widths.len();
    let g = GaussianFunctional::new(lay.widths.iter().map(|w| Complex64::new(*w, 0.0)).collect(), vec![0.0; n], vec![0.0; n])?;
    Ok(lay.wrap(WaveFunctional::Gaussian(g)))
}

fn sector<'a>(theory: &'a TheoryModel, name: &str) -> Result<&'a Sector> {
    theory
        .space()
        .sector(name)
        .ok_or_else(|| Error::BasisMismatch(format!("{} has no sector `{name}`", theory.kind.name())))
}

/// The creation operator of slot `(mode, pol)` as a linear form in the real
/// oscillators, `[(theory coordinate, coefficient of b_r^dag)]`.
fn creation_form(s: &Sector, slot: usize) -> Result<Vec<(usize, Complex64)>> {
    let b = &s.basis;
    if slot >= b.n_slots() {
        return Err(Error::InvalidParameter(format!("slot {slot} out of range ({} slots)", b.n_slots())));
    }
    let (mode, pol) = (slot / b.n_pol(), slot % b.n_pol());
    let h = Complex64::new(1.0 / SQRT_2, 0.0);
    let i = Complex64::i();
    let idx = |m, part| b.coord_index(m, pol, part).map(|r| r + s.offset).expect("coordinate exists");
    if b.kind() == FieldKind::ScalarComplex {
        return Ok(vec![(idx(mode, Part::Re), h), (idx(mode, Part::Im), -i * h)]);
    }
    let partner = b.partner(mode);
    if partner == mode {
        return Ok(vec![(idx(mode, Part::Real), Complex64::new(1.0, 0.0))]);
    }
    if b.is_representative(mode) {
        Ok(vec![(idx(mode, Part::Re), h), (idx(mode, Part::Im), -i * h)])
    } else {
        let sgn = b.pair_sign(partner, pol);
        Ok(vec![(idx(partner, Part::Re), h * sgn), (idx(partner, Part::Im), i * h * sgn)])
    }
}

/// Coherent state with annihilation eigenvalue `alpha` on each listed slot of
/// `sector` (slot = `mode * n_pol + pol`; unlisted slots are zero).
pub fn coherent(theory: &TheoryModel, sector_name: &str, alpha: &[(usize, Complex64)]) -> Result<WaveFunctional> {
    let lay = layout(theory)?;
    let s = sector(theory, sector_name)?;
    let mut beta = vec![Complex64::new(0.0, 0.0); lay.widths.len()];
    for &(slot, a) in alpha {
        if !(a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite alpha".into()));
        }
        // a_s = sum_r conj(u_r) b_r, so an a_s eigenstate shifts b_r by u_r a
        for (r, u) in creation_form(s, slot)? {
            beta[lay.inner(r)?] += u * a;
        }
    }
    let n = lay.widths.len();
    let mut center = vec![0.0; n];
    let mut momentum = vec![0.0; n];
    for r in 0..n {
        let w = lay.widths[r];
        center[r] = SQRT_2 * beta[r].re / w.sqrt();
        momentum[r] = SQRT_2 * beta[r].im * w.sqrt();
    }
    let mut g = GaussianFunctional::new(lay.widths.iter().map(|w| Complex64::new(*w, 0.0)).collect(), center, momentum)?;
    // standard coherent-state phase: <x|beta> carries exp(i X P / 2)
    let phase: f64 = g.center.iter().zip(&g.momentum).map(|(x, p)| 0.5 * x * p).sum();
    g.log_prefactor.im += phase;
    Ok(lay.wrap(WaveFunctional::Gaussian(g)))
}

/// Symmetric coefficient tensor `T_{s1..sn}` over the slots of one sector.
/// The state is `(n!)^{-1/2} sum T a^dag_{s1} .. a^dag_{sn} |0>`. Only one
/// sorted index list per multiset is stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricTensor {
    rank: usize,
    canonical: Vec<(Vec<usize>, Complex64)>,
}

fn multinomial_perms(key: &[usize]) -> f64 {
    let mut counts = BTreeMap::new();
    for s in key {
        *counts.entry(*s).or_insert(0usize) += 1;
    }
    let mut v = factorial(key.len());
    for c in counts.values() {
        v /= factorial(*c);
    }
    v
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl SymmetricTensor {
    /// Validate symmetry (all permutations present with equal values) and
    /// normalization (`sum |T|^2 = 1`).
    pub fn new(rank: usize, entries: Vec<(Vec<usize>, Complex64)>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidParameter("rank-0 tensor: use the vacuum".into()));
        }
        let mut groups: BTreeMap<Vec<usize>, Vec<Complex64>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (k, v) in &entries {
            if k.len() != rank {
                return Err(Error::InvalidParameter(format!("entry {k:?} does not have rank {rank}")));
            }
            if !seen.insert(k.clone()) {
                return Err(Error::InvalidParameter(format!("duplicate entry {k:?}")));
            }
            let mut sorted = k.clone();
            sorted.sort_unstable();
            groups.entry(sorted).or_default().push(*v);
        }
        for (key, vals) in &groups {
            let perms = multinomial_perms(key);
            let scale = vals.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if (vals.len() as f64 - perms).abs() > 0.5 || vals.iter().any(|v| (v - vals[0]).norm() > SYM_TOL * scale.max(1.0)) {
                return Err(Error::InvalidParameter(format!("tensor is not symmetric at {key:?}")));
            }
        }
        Self::from_canonical(rank, groups.into_iter().map(|(k, v)| (k, v[0])).collect())
    }

    /// Build from one entry per multiset: sorted slot lists with the value
    /// shared by all their orderings.
    pub fn from_canonical(rank: usize, canonical: Vec<(Vec<usize>, Complex64)>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidParameter("rank-0 tensor: use the vacuum".into()));
        }
        let mut seen = BTreeSet::new();
        for (k, _) in &canonical {
            if k.len() != rank || k.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidParameter(format!("entry {k:?} is not a sorted list of {rank} slots")));
            }
            if !seen.insert(k.clone()) {
                return Err(Error::InvalidParameter(format!("duplicate entry {k:?}")));
            }
        }
        let norm: f64 = canonical.iter().map(|(k, v)| multinomial_perms(k) * v.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!("tensor norm^2 is {norm}, expected 1")));
        }
        Ok(SymmetricTensor { rank, canonical })
    }

    /// Rank-1 tensor from single-particle amplitudes.
    pub fn one_particle(psi: &[(usize, Complex64)]) -> Result<Self> {
        Self::new(1, psi.iter().map(|(s, v)| (vec![*s], *v)).collect())
    }

    /// The normalized state `a^dag_{s1} .. a^dag_{sn} |0>` (slots may repeat).
    pub fn product(slots: &[usize]) -> Result<Self> {
        let n = slots.len();
        if n == 0 {
            return Err(Error::InvalidParameter("rank-0 tensor: use the vacuum".into()));
        }
        let mut sorted = slots.to_vec();
        sorted.sort_unstable();
        let occ: f64 = {
            let mut counts = BTreeMap::new();
            for s in &sorted {
                *counts.entry(*s).or_insert(0usize) += 1;
            }
            counts.values().map(|c| factorial(*c)).product()
        };
        let c = Complex64::new((occ / factorial(n)).sqrt(), 0.0);
        Self::from_canonical(n, vec![(sorted, c)])
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// One sorted slot list per multiset, with its tensor component.
    pub fn canonical(&self) -> &[(Vec<usize>, Complex64)] {
        &self.canonical
    }

    /// Representatives with their value and permutation count.
    fn groups(&self) -> Vec<(Vec<usize>, Complex64, f64)> {
        self.canonical.iter().map(|(k, v)| (k.clone(), *v, multinomial_perms(k))).collect()
    }
}

type Poly = BTreeMap<Vec<(usize, u8)>, Complex64>;

fn poly_mul_linear(p: &Poly, form: &[(usize, Complex64)]) -> Poly {
    let mut out = Poly::new();
    for (mono, c) in p {
        for &(r, u) in form {
            let mut m = mono.clone();
            match m.iter_mut().find(|(q, _)| *q == r) {
                Some(e) => e.1 += 1,
                None => {
                    m.push((r, 1));
                    m.sort_unstable();
                }
            }
            *out.entry(m).or_default() += c * u;
        }
    }
    out
}

/// Polynomial in `b^dag` to a Fock factor over the listed coordinates.
fn poly_to_factor(p: &Poly, coords: &[usize]) -> FockFactor {
    let scale = p.values().fold(0.0f64, |m, z| m.max(z.norm()));
    let terms = p
        .iter()
        .filter(|(_, c)| c.norm() > 1e-15 * scale)
        .map(|(mono, c)| {
            let mut occ = vec![0u8; coords.len()];
            let mut f = 1.0;
            for &(r, n) in mono {
                let j = coords.binary_search(&r).expect("coordinate listed");
                occ[j] = n;
                f *= factorial(n as usize);
            }
            FockTerm { occupation: occ, coef: c * f.sqrt() }
        })
        .collect();
    FockFactor { coords: coords.to_vec(), terms }
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

/// The n-particle state `(n!)^{-1/2} sum T a^dag .. a^dag |0>` of one sector.
pub fn n_particle(theory: &TheoryModel, sector_name: &str, tensor: &SymmetricTensor) -> Result<WaveFunctional> {
    if tensor.rank() > MAX_PARTICLES {
        return Err(Error::Unsupported(format!("n = {} exceeds the cap of {MAX_PARTICLES}", tensor.rank())));
    }
    let lay = layout(theory)?;
    let s = sector(theory, sector_name)?;
    let inner_form = |slot: usize| -> Result<Vec<(usize, Complex64)>> {
        creation_form(s, slot)?.into_iter().map(|(r, u)| Ok((lay.inner(r)?, u))).collect()
    };
    let groups = tensor.groups();
    let nfact = factorial(tensor.rank()).sqrt();
    let mut factors = Vec::new();
    if groups.len() == 1 {
        // one multiset: split the product of linear forms into independent blocks
        let (key, v, perms) = &groups[0];
        let forms: Vec<Vec<(usize, Complex64)>> = key.iter().map(|s| inner_form(*s)).collect::<Result<_>>()?;
        let mut parent: Vec<usize> = (0..forms.len()).collect();
        for a in 0..forms.len() {
            for b in 0..a {
                if forms[a].iter().any(|(r, _)| forms[b].iter().any(|(q, _)| q == r)) {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra] = rb;
                }
            }
        }
        let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for a in 0..forms.len() {
            let root = find(&mut parent, a);
            blocks.entry(root).or_default().push(a);
        }
        for (bi, members) in blocks.values().enumerate() {
            let mut p = Poly::new();
            let lead = if bi == 0 { v * (perms / nfact) } else { Complex64::new(1.0, 0.0) };
            p.insert(Vec::new(), lead);
            let mut coords = BTreeSet::new();
            for &a in members {
                p = poly_mul_linear(&p, &forms[a]);
                coords.extend(forms[a].iter().map(|(r, _)| *r));
            }
            factors.push(poly_to_factor(&p, &coords.into_iter().collect::<Vec<_>>()));
        }
    } else {
        let mut total = Poly::new();
        let mut coords = BTreeSet::new();
        for (key, v, perms) in &groups {
            let mut p = Poly::new();
            p.insert(Vec::new(), v * (perms / nfact));
            for s in key {
                let f = inner_form(*s)?;
                coords.extend(f.iter().map(|(r, _)| *r));
                p = poly_mul_linear(&p, &f);
            }
            for (m, c) in p {
                *total.entry(m).or_default() += c;
            }
        }
        factors.push(poly_to_factor(&total, &coords.into_iter().collect::<Vec<_>>()));
    }
    let n = lay.widths.len();
    let base = GaussianFunctional::new(lay.widths.iter().map(|w| Complex64::new(*w, 0.0)).collect(), vec![0.0; n], vec![0.0; n])?;
    let e = ExcitedFunctional { base, factors, time: 0.0 };
    let norm: f64 = e.factors.iter().map(|f| f.norm_sqr()).product();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Invariant(format!("excited state norm^2 {norm} after expansion")));
    }
    Ok(lay.wrap(WaveFunctional::Excited(e)))
}

/// For a one-particle state `Psi = sqrt 2 alpha Psi_0`, the coefficients
/// `gamma_r` with `alpha = sum_r gamma_r x_r` over theory coordinates.
pub fn one_particle_alpha(theory: &TheoryModel, sector_name: &str, psi: &[(usize, Complex64)]) -> Result<Vec<Complex64>> {
    let lay = layout(theory)?;
    let s = sector(theory, sector_name)?;
    let mut gamma = vec![Complex64::new(0.0, 0.0); theory.dim()];
    for &(slot, p) in psi {
        for (r, u) in creation_form(s, slot)? {
            let w = lay.widths[lay.inner(r)?];
            // b_r^dag Psi_0 = sqrt(2 w) x_r Psi_0
            gamma[r] += p * u * w.sqrt();
        }
    }
    Ok(gamma)
}
