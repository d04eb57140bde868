//! Finite-volume, cutoff-limited Fourier modes.
//!
//! A field in a periodic box of side `L` is expanded as
//! `phi(x) = L^{-3/2} sum_k e^{ik.x} q_k` with `k = (2 pi / L) n` for integer
//! triples `n` and `|k| <= cutoff`. Real fields obey `q(-k) = q(k)^*`, so only
//! one amplitude per `{k, -k}` pair is independent. Internally every field is
//! carried by a flat vector of real coordinates:
//!
//! * real kinds: `q_k = (x + i y) / sqrt 2` for the pair representative, and the
//!   zero mode is a single real coordinate `q_0 = x`;
//! * complex kinds: every `k` carries `c_k = (u + i v) / sqrt 2`.
//!
//! With this packing `integral phi^2 = sum_r x_r^2` for real fields.
//!
//! For vector kinds the amplitude along polarization `l` is `q_l(k) = eps^l(k) . A(k)`.
//! Because `eps^3(-k) = -eps^3(k)`, reality reads `q_3(-k) = -q_3(k)^*` for the
//! longitudinal component; [`ModeBasis::pair_sign`] carries that sign.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

pub const DEFAULT_MODE_LIMIT: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    ScalarReal,
    ScalarComplex,
    VectorTransverse,
    VectorFull,
}

impl FieldKind {
    pub fn polarizations(self) -> usize {
        match self {
            FieldKind::ScalarReal | FieldKind::ScalarComplex => 1,
            FieldKind::VectorTransverse => 2,
            FieldKind::VectorFull => 3,
        }
    }

    pub fn is_real(self) -> bool {
        self != FieldKind::ScalarComplex
    }

    pub fn is_vector(self) -> bool {
        matches!(self, FieldKind::VectorTransverse | FieldKind::VectorFull)
    }

    /// Zero mode policy: kept for scalars and the full vector field, dropped for
    /// the transverse field which has no polarization at `k = 0`.
    pub fn default_zero_mode(self) -> bool {
        self != FieldKind::VectorTransverse
    }
}

/// Total order on lattice momenta: compare the third component first, then
/// the second, then the first.
pub fn momentum_order(a: &[i32; 3], b: &[i32; 3]) -> Ordering {
    (a[2], a[1], a[0]).cmp(&(b[2], b[1], b[0]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    /// `sqrt 2 Re q` of a pair representative (or of a complex mode).
    Re,
    /// `sqrt 2 Im q` of a pair representative (or of a complex mode).
    Im,
    /// The single real coordinate of a self-conjugate zero mode.
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Coordinate {
    pub mode: usize,
    pub pol: usize,
    pub part: Part,
}

#[derive(Clone, Copy, Debug)]
pub struct BasisOptions {
    pub zero_mode: Option<bool>,
    pub mode_limit: usize,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions { zero_mode: None, mode_limit: DEFAULT_MODE_LIMIT }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub box_length: f64,
    pub cutoff: f64,
    pub field_kind: FieldKind,
    pub zero_mode: bool,
    /// Integer lattice vectors in canonical order.
    pub momenta: Vec<[i32; 3]>,
}

#[derive(Clone, Debug)]
pub struct ModeBasis {
    box_length: f64,
    cutoff: f64,
    kind: FieldKind,
    zero_mode: bool,
    lattice: Vec<[i32; 3]>,
    lookup: HashMap<[i32; 3], usize>,
    partner: Vec<usize>,
    polarization: Vec<[[f64; 3]; 3]>,
    coords: Vec<Coordinate>,
    coord_lookup: HashMap<Coordinate, usize>,
}

impl PartialEq for ModeBasis {
    fn eq(&self, other: &Self) -> bool {
        self.box_length == other.box_length
            && self.cutoff == other.cutoff
            && self.kind == other.kind
            && self.zero_mode == other.zero_mode
            && self.lattice == other.lattice
    }
}

/// Build the basis with the default zero-mode policy and mode limit.
pub fn build_mode_basis(box_length: f64, cutoff: f64, kind: FieldKind) -> Result<ModeBasis> {
    ModeBasis::build(box_length, cutoff, kind, BasisOptions::default())
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Polarization triple for a pair representative. Gram-Schmidt against the z
/// axis, falling back to the x axis when `k` is parallel to z.
fn polarization_triple(n: [i32; 3]) -> [[f64; 3]; 3] {
    if n == [0, 0, 0] {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let khat = normalize([n[0] as f64, n[1] as f64, n[2] as f64]);
    let reference = if n[0] == 0 && n[1] == 0 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let proj = dot(reference, khat);
    let e1 = normalize([
        reference[0] - proj * khat[0],
        reference[1] - proj * khat[1],
        reference[2] - proj * khat[2],
    ]);
    let e2 = cross(khat, e1);
    [e1, e2, khat]
}

impl ModeBasis {
    pub fn build(box_length: f64, cutoff: f64, kind: FieldKind, opts: BasisOptions) -> Result<ModeBasis> {
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(Error::InvalidParameter(format!("box length must be positive, got {box_length}")));
        }
        if !(cutoff >= 0.0) || !cutoff.is_finite() {
            return Err(Error::InvalidParameter(format!("cutoff must be non-negative, got {cutoff}")));
        }
        let radius = cutoff * box_length / (2.0 * PI);
        let nmax = radius.floor() as i64;
        let estimate = 4.0 / 3.0 * PI * (radius + 1.0).powi(3);
        if estimate > 8.0 * opts.mode_limit as f64 + 64.0 {
            return Err(Error::ModeLimit { count: estimate as usize, limit: opts.mode_limit });
        }
        let zero_mode = opts.zero_mode.unwrap_or(kind.default_zero_mode());
        if zero_mode && kind == FieldKind::VectorTransverse {
            return Err(Error::InvalidParameter("a transverse field has no zero mode".into()));
        }
        let r2 = radius * radius * (1.0 + 1e-12);
        let mut lattice = Vec::new();
        let nmax = nmax as i32;
        for a in -nmax..=nmax {
            for b in -nmax..=nmax {
                for c in -nmax..=nmax {
                    let n2 = (a * a + b * b + c * c) as f64;
                    if n2 <= r2 {
                        if !zero_mode && a == 0 && b == 0 && c == 0 {
                            continue;
                        }
                        lattice.push([a, b, c]);
                    }
                }
            }
        }
        if lattice.len() > opts.mode_limit {
            return Err(Error::ModeLimit { count: lattice.len(), limit: opts.mode_limit });
        }
        lattice.sort_by(momentum_order);
        let lookup: HashMap<[i32; 3], usize> = lattice.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let partner: Vec<usize> = lattice.iter().map(|n| lookup[&[-n[0], -n[1], -n[2]]]).collect();
        let polarization: Vec<[[f64; 3]; 3]> = lattice
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let rep = if momentum_order(n, &lattice[partner[i]]) != Ordering::Less { *n } else { lattice[partner[i]] };
                let mut t = polarization_triple(rep);
                if rep != *n {
                    t[2] = [-t[2][0], -t[2][1], -t[2][2]];
                }
                t
            })
            .collect();
        let npol = kind.polarizations();
        let mut coords = Vec::new();
        for (i, n) in lattice.iter().enumerate() {
            let j = partner[i];
            for pol in 0..npol {
                if !kind.is_real() {
                    coords.push(Coordinate { mode: i, pol, part: Part::Re });
                    coords.push(Coordinate { mode: i, pol, part: Part::Im });
                } else if i == j {
                    coords.push(Coordinate { mode: i, pol, part: Part::Real });
                } else if momentum_order(n, &lattice[j]) == Ordering::Greater {
                    coords.push(Coordinate { mode: i, pol, part: Part::Re });
                    coords.push(Coordinate { mode: i, pol, part: Part::Im });
                }
            }
        }
        let coord_lookup = coords.iter().enumerate().map(|(r, c)| (*c, r)).collect();
        Ok(ModeBasis {
            box_length,
            cutoff,
            kind,
            zero_mode,
            lattice,
            lookup,
            partner,
            polarization,
            coords,
            coord_lookup,
        })
    }

    pub fn from_spec(spec: &BasisSpec) -> Result<ModeBasis> {
        let b = ModeBasis::build(
            spec.box_length,
            spec.cutoff,
            spec.field_kind,
            BasisOptions { zero_mode: Some(spec.zero_mode), ..Default::default() },
        )?;
        if b.lattice != spec.momenta {
            return Err(Error::Invariant("serialized momenta do not match the rebuilt basis".into()));
        }
        Ok(b)
    }

    pub fn to_spec(&self) -> BasisSpec {
        BasisSpec {
            box_length: self.box_length,
            cutoff: self.cutoff,
            field_kind: self.kind,
            zero_mode: self.zero_mode,
            momenta: self.lattice.clone(),
        }
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
    pub fn kind(&self) -> FieldKind {
        self.kind
    }
    pub fn has_zero_mode(&self) -> bool {
        self.zero_mode
    }
    /// Number of momenta (both members of each pair counted).
    pub fn len(&self) -> usize {
        self.lattice.len()
    }
    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }
    pub fn n_pol(&self) -> usize {
        self.kind.polarizations()
    }
    /// Number of (mode, polarization) slots over the full momentum set.
    pub fn n_slots(&self) -> usize {
        self.len() * self.n_pol()
    }
    /// Number of real coordinates.
    pub fn dim(&self) -> usize {
        self.coords.len()
    }
    pub fn lattice(&self, i: usize) -> [i32; 3] {
        self.lattice[i]
    }
    pub fn lattice_vectors(&self) -> &[[i32; 3]] {
        &self.lattice
    }
    pub fn index_of(&self, n: [i32; 3]) -> Option<usize> {
        self.lookup.get(&n).copied()
    }
    pub fn momentum(&self, i: usize) -> [f64; 3] {
        let s = 2.0 * PI / self.box_length;
        let n = self.lattice[i];
        [s * n[0] as f64, s * n[1] as f64, s * n[2] as f64]
    }
    pub fn k2(&self, i: usize) -> f64 {
        let k = self.momentum(i);
        dot(k, k)
    }
    pub fn partner(&self, i: usize) -> usize {
        self.partner[i]
    }
    pub fn is_zero(&self, i: usize) -> bool {
        self.lattice[i] == [0, 0, 0]
    }
    /// True for the larger member of a `{k, -k}` pair and for the zero mode.
    pub fn is_representative(&self, i: usize) -> bool {
        momentum_order(&self.lattice[i], &self.lattice[self.partner[i]]) != Ordering::Less
    }
    /// Rows are `eps^1, eps^2, eps^3`.
    pub fn polarization(&self, i: usize) -> &[[f64; 3]; 3] {
        &self.polarization[i]
    }
    /// Polarization vector used for slot `(i, pol)` of this field kind.
    pub fn pol_vector(&self, i: usize, pol: usize) -> [f64; 3] {
        match self.kind {
            FieldKind::ScalarReal | FieldKind::ScalarComplex => [1.0, 0.0, 0.0],
            _ => self.polarization[i][pol],
        }
    }
    /// `+1` except for the longitudinal component of a nonzero vector mode, where
    /// reality reads `q(-k) = -q(k)^*`.
    pub fn pair_sign(&self, i: usize, pol: usize) -> f64 {
        if self.kind == FieldKind::VectorFull && pol == 2 && !self.is_zero(i) {
            -1.0
        } else {
            1.0
        }
    }
    pub fn coordinate(&self, r: usize) -> Coordinate {
        self.coords[r]
    }
    pub fn coordinates(&self) -> &[Coordinate] {
        &self.coords
    }
    pub fn coord_index(&self, mode: usize, pol: usize, part: Part) -> Option<usize> {
        self.coord_lookup.get(&Coordinate { mode, pol, part }).copied()
    }
    /// Slot index `mode * n_pol + pol`.
    pub fn slot(&self, mode: usize, pol: usize) -> usize {
        mode * self.n_pol() + pol
    }

    /// Full-set complex amplitudes from real coordinates.
    pub fn unpack(&self, coords: &[f64]) -> Vec<Complex64> {
        assert_eq!(coords.len(), self.dim(), "coordinate length mismatch");
        let mut amps = vec![Complex64::new(0.0, 0.0); self.n_slots()];
        let mut r = 0;
        while r < self.coords.len() {
            let c = self.coords[r];
            match c.part {
                Part::Real => {
                    amps[self.slot(c.mode, c.pol)] = Complex64::new(coords[r], 0.0);
                    r += 1;
                }
                Part::Re => {
                    let q = Complex64::new(coords[r], coords[r + 1]) / SQRT_2;
                    amps[self.slot(c.mode, c.pol)] = q;
                    if self.kind.is_real() {
                        let j = self.partner[c.mode];
                        amps[self.slot(j, c.pol)] = q.conj() * self.pair_sign(c.mode, c.pol);
                    }
                    r += 2;
                }
                Part::Im => unreachable!("Im coordinate always follows Re"),
            }
        }
        amps
    }

    /// Real coordinates read off the representative amplitudes. Inverse of
    /// [`ModeBasis::unpack`] on amplitudes that satisfy the reality pairing.
    pub fn pack(&self, amps: &[Complex64]) -> Vec<f64> {
        assert_eq!(amps.len(), self.n_slots(), "amplitude length mismatch");
        self.coords
            .iter()
            .map(|c| {
                let q = amps[self.slot(c.mode, c.pol)];
                match c.part {
                    Part::Real => q.re,
                    Part::Re => SQRT_2 * q.re,
                    Part::Im => SQRT_2 * q.im,
                }
            })
            .collect()
    }

    /// Largest violation of the reality pairing over the full set.
    pub fn reality_residual(&self, amps: &[Complex64]) -> f64 {
        if !self.kind.is_real() {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let j = self.partner[i];
            for pol in 0..self.n_pol() {
                let s = self.pair_sign(i, pol);
                let d = amps[self.slot(j, pol)] - amps[self.slot(i, pol)].conj() * s;
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Real-space value of the field contributed by a unit value of coordinate
    /// `r` at position `x`. Components: one for scalars, three for vectors.
    pub fn mode_function(&self, r: usize, x: [f64; 3]) -> [Complex64; 3] {
        let c = self.coords[r];
        let k = self.momentum(c.mode);
        let norm = self.box_length.powf(-1.5);
        let phase = dot(k, x);
        let e = Complex64::from_polar(1.0, phase);
        let base: Complex64 = match (self.kind.is_real(), c.part) {
            (_, Part::Real) => Complex64::new(norm, 0.0),
            // complex kind: c_k = (u + i v)/sqrt 2, field gets L^{-3/2} e^{ikx} c_k
            (false, Part::Re) => e * norm / SQRT_2,
            (false, Part::Im) => e * Complex64::i() * norm / SQRT_2,
            // real kinds: the pair contributes L^{-3/2} (e^{ikx} q eps(k) + e^{-ikx} s q^* eps(-k)),
            // and eps(-k) = s eps(k), so the sign drops out
            (true, Part::Re) => (e + e.conj()) * norm / SQRT_2,
            (true, Part::Im) => (e - e.conj()) * Complex64::i() * norm / SQRT_2,
        };
        if self.kind.is_vector() {
            let eps = self.polarization[c.mode][c.pol];
            [base * eps[0], base * eps[1], base * eps[2]]
        } else {
            [base, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]
        }
    }
}

/// A beable: a point of the field configuration space of one basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldConfiguration {
    pub basis: Arc<ModeBasis>,
    pub coords: Vec<f64>,
}

impl FieldConfiguration {
    pub fn new(basis: Arc<ModeBasis>, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "expected {} coordinates, got {}",
                basis.dim(),
                coords.len()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invariant("non-finite coordinate".into()));
        }
        Ok(FieldConfiguration { basis, coords })
    }

    pub fn zeros(basis: Arc<ModeBasis>) -> Self {
        let d = basis.dim();
        FieldConfiguration { basis, coords: vec![0.0; d] }
    }

    /// Build from full-set amplitudes; fails if the reality pairing is violated
    /// by more than `tol` (relative to the largest amplitude).
    pub fn from_amplitudes(basis: Arc<ModeBasis>, amps: &[Complex64], tol: f64) -> Result<Self> {
        if amps.len() != basis.n_slots() {
            return Err(Error::BasisMismatch(format!(
                "expected {} amplitudes, got {}",
                basis.n_slots(),
                amps.len()
            )));
        }
        let scale = amps.iter().fold(1.0f64, |m, a| m.max(a.norm()));
        let res = basis.reality_residual(amps);
        if res > tol * scale {
            return Err(Error::Invariant(format!("reality pairing violated by {res:e}")));
        }
        let coords = basis.pack(amps);
        FieldConfiguration::new(basis, coords)
    }

    /// Build a transverse vector configuration from Cartesian amplitudes `A(k)`.
    pub fn from_vector_amplitudes(basis: Arc<ModeBasis>, a: &[[Complex64; 3]], tol: f64) -> Result<Self> {
        if !basis.kind().is_vector() || a.len() != basis.len() {
            return Err(Error::BasisMismatch("vector amplitudes need a vector basis of equal length".into()));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.n_slots()];
        for i in 0..basis.len() {
            let eps = basis.polarization(i);
            if basis.kind() == FieldKind::VectorTransverse {
                let long = a[i][0] * eps[2][0] + a[i][1] * eps[2][1] + a[i][2] * eps[2][2];
                let scale = a[i].iter().fold(1.0f64, |m, z| m.max(z.norm()));
                if long.norm() > tol * scale {
                    return Err(Error::Invariant(format!("k . A(k) = {:e} is not zero", long.norm())));
                }
            }
            for pol in 0..basis.n_pol() {
                let e = eps[pol];
                amps[basis.slot(i, pol)] = a[i][0] * e[0] + a[i][1] * e[1] + a[i][2] * e[2];
            }
        }
        FieldConfiguration::from_amplitudes(basis, &amps, tol)
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.basis.unpack(&self.coords)
    }

    /// Cartesian amplitude `A(k) = sum_l eps^l(k) q_l(k)` of every mode.
    pub fn vector_amplitudes(&self) -> Vec<[Complex64; 3]> {
        let amps = self.amplitudes();
        let b = &self.basis;
        (0..b.len())
            .map(|i| {
                let mut v = [Complex64::new(0.0, 0.0); 3];
                for pol in 0..b.n_pol() {
                    let e = b.pol_vector(i, pol);
                    let q = amps[b.slot(i, pol)];
                    for c in 0..3 {
                        v[c] += q * e[c];
                    }
                }
                v
            })
            .collect()
    }
}

/// Evaluate `phi(x) = L^{-3/2} sum_k e^{ik.x} q_k` (vector fields: `sum_l eps^l q_l`)
/// at every point. Each sample holds one component for scalars and three for
/// vectors.
pub fn synthesize_field(config: &FieldConfiguration, points: &[[f64; 3]]) -> Vec<Vec<Complex64>> {
    let b = &config.basis;
    let amps = config.amplitudes();
    let norm = b.box_length().powf(-1.5);
    let ncomp = if b.kind().is_vector() { 3 } else { 1 };
    points
        .iter()
        .map(|x| {
            let mut out = vec![Complex64::new(0.0, 0.0); ncomp];
            for i in 0..b.len() {
                let e = Complex64::from_polar(norm, dot(b.momentum(i), *x));
                for pol in 0..b.n_pol() {
                    let q = amps[b.slot(i, pol)] * e;
                    if ncomp == 1 {
                        out[0] += q;
                    } else {
                        let eps = b.pol_vector(i, pol);
                        for c in 0..3 {
                            out[c] += q * eps[c];
                        }
                    }
                }
            }
            out
        })
        .collect()
}

/// Nearest amplitudes (least squares) obeying the reality pairing. Identity on
/// complex field kinds.
pub fn reality_project(basis: &ModeBasis, amps: &[Complex64]) -> Vec<Complex64> {
    let mut out = amps.to_vec();
    if !basis.kind().is_real() {
        return out;
    }
    for i in 0..basis.len() {
        let j = basis.partner(i);
        if j < i {
            continue;
        }
        for pol in 0..basis.n_pol() {
            let s = basis.pair_sign(i, pol);
            let a = amps[basis.slot(i, pol)];
            let b = amps[basis.slot(j, pol)];
            // minimise |a' - a|^2 + |s a'^* - b|^2
            let m = (a + b.conj() * s) * 0.5;
            out[basis.slot(i, pol)] = m;
            out[basis.slot(j, pol)] = m.conj() * s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nineteen_momenta_in_unit_ball() {
        let b = build_mode_basis(2.0 * PI, 1.5, FieldKind::ScalarReal).unwrap();
        assert_eq!(b.len(), 19);
        // 9 pairs plus the zero mode
        assert_eq!(b.dim(), 19);
    }

    #[test]
    fn zero_cutoff_keeps_only_zero_mode() {
        let b = build_mode_basis(1.0, 0.0, FieldKind::ScalarReal).unwrap();
        assert_eq!(b.lattice_vectors(), &[[0, 0, 0]]);
    }

    #[test]
    fn order_compares_last_component_first() {
        assert_eq!(momentum_order(&[1, 0, 0], &[0, 0, 1]), Ordering::Less);
        let b = build_mode_basis(2.0 * PI, 1.0, FieldKind::ScalarReal).unwrap();
        let i = b.index_of([1, 0, 0]).unwrap();
        let j = b.index_of([0, 0, 1]).unwrap();
        assert!(i < j);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_mode_basis(0.0, 1.0, FieldKind::ScalarReal).is_err());
        assert!(build_mode_basis(1.0, -1.0, FieldKind::ScalarReal).is_err());
        let r = ModeBasis::build(
            2.0 * PI,
            10.0,
            FieldKind::ScalarReal,
            BasisOptions { mode_limit: 100, ..Default::default() },
        );
        assert!(matches!(r, Err(Error::ModeLimit { .. })));
    }

    #[test]
    fn transverse_drops_zero_mode() {
        let b = build_mode_basis(2.0 * PI, 1.0, FieldKind::VectorTransverse).unwrap();
        assert_eq!(b.len(), 6);
        assert_eq!(b.dim(), 3 * 2 * 2);
    }

    #[test]
    fn projection_example() {
        let b = build_mode_basis(2.0 * PI, 1.0, FieldKind::ScalarReal).unwrap();
        let i = b.index_of([1, 0, 0]).unwrap();
        let j = b.index_of([-1, 0, 0]).unwrap();
        let mut amps = vec![Complex64::new(0.0, 0.0); b.n_slots()];
        amps[i] = Complex64::new(1.0, 0.0);
        let p = reality_project(&b, &amps);
        assert_eq!(p[i], Complex64::new(0.5, 0.0));
        assert_eq!(p[j], Complex64::new(0.5, 0.0));
        assert_eq!(reality_project(&b, &p), p);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let b = build_mode_basis(3.0, 4.5, FieldKind::VectorFull).unwrap();
        let coords: Vec<f64> = (0..b.dim()).map(|r| (r as f64 * 0.37).sin()).collect();
        let amps = b.unpack(&coords);
        assert!(b.reality_residual(&amps) < 1e-15);
        for (a, b) in b.pack(&amps).iter().zip(&coords) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mode_functions_sum_to_synthesized_field() {
        for kind in [FieldKind::ScalarReal, FieldKind::VectorFull, FieldKind::ScalarComplex] {
            let b = Arc::new(build_mode_basis(2.5, 3.0, kind).unwrap());
            let coords: Vec<f64> = (0..b.dim()).map(|r| (r as f64 * 0.71).cos()).collect();
            let cfg = FieldConfiguration::new(b.clone(), coords.clone()).unwrap();
            let x = [0.3, -1.1, 0.8];
            let direct = &synthesize_field(&cfg, &[x])[0];
            for c in 0..direct.len() {
                let sum: Complex64 = (0..b.dim()).map(|r| b.mode_function(r, x)[c] * coords[r]).sum();
                assert!((sum - direct[c]).norm() < 1e-12, "{kind:?} component {c}");
            }
        }
    }
}
