//! Serializable descriptions of wave functionals, resolved against a theory.

use super::{coherent, n_particle, vacuum, SuperpositionFunctional, SymmetricTensor, WaveFunctional};
use crate::error::{Error, Result};
use crate::theories::TheoryModel;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRef {
    /// Integer lattice vector of the mode.
    pub n: [i32; 3],
    #[serde(default)]
    pub pol: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeValue {
    pub n: [i32; 3],
    #[serde(default)]
    pub pol: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub modes: Vec<ModeRef>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub state: FunctionalSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionalSpec {
    Vacuum,
    Coherent {
        #[serde(default)]
        sector: Option<String>,
        #[serde(default)]
        alpha: Vec<ModeValue>,
        /// CSV with columns `n1,n2,n3,re,im` (optional `pol`).
        #[serde(default)]
        alpha_csv: Option<PathBuf>,
    },
    OneParticle {
        #[serde(default)]
        sector: Option<String>,
        psi: Vec<ModeValue>,
    },
    /// Normalized `a^dag_{m1} .. a^dag_{mn} |0>`.
    Product {
        #[serde(default)]
        sector: Option<String>,
        modes: Vec<ModeRef>,
    },
    NParticle {
        #[serde(default)]
        sector: Option<String>,
        entries: Vec<TensorEntry>,
    },
    Superposition {
        components: Vec<Component>,
    },
}

#[derive(Debug, Deserialize)]
struct AlphaRow {
    n1: i32,
    n2: i32,
    n3: i32,
    #[serde(default)]
    pol: usize,
    re: f64,
    im: f64,
}

/// Read a coherent-state alpha table.
pub fn load_alpha_csv(path: &Path) -> Result<Vec<ModeValue>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    rdr.deserialize::<AlphaRow>()
        .map(|row| {
            let r = row.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Ok(ModeValue { n: [r.n1, r.n2, r.n3], pol: r.pol, re: r.re, im: r.im })
        })
        .collect()
}

fn sector_name(theory: &TheoryModel, s: &Option<String>) -> Result<String> {
    match s {
        Some(n) => Ok(n.clone()),
        None => theory
            .space()
            .sectors()
            .first()
            .map(|s| s.name.to_string())
            .ok_or_else(|| Error::Unsupported("theory has no mode-space sectors".into())),
    }
}

fn slot(theory: &TheoryModel, sector: &str, n: [i32; 3], pol: usize) -> Result<usize> {
    let s = theory.space().sector(sector).ok_or_else(|| Error::BasisMismatch(format!("no sector `{sector}`")))?;
    let i = s.basis.index_of(n).ok_or_else(|| Error::InvalidParameter(format!("mode {n:?} is not in the basis")))?;
    if pol >= s.basis.n_pol() {
        return Err(Error::InvalidParameter(format!("polarization {pol} out of range")));
    }
    Ok(s.basis.slot(i, pol))
}

impl FunctionalSpec {
    pub fn build(&self, theory: &TheoryModel) -> Result<WaveFunctional> {
        match self {
            FunctionalSpec::Vacuum => vacuum(theory),
            FunctionalSpec::Coherent { sector, alpha, alpha_csv } => {
                let sec = sector_name(theory, sector)?;
                let mut values = alpha.clone();
                if let Some(p) = alpha_csv {
                    values.extend(load_alpha_csv(p)?);
                }
                let a = values
                    .iter()
                    .map(|v| Ok((slot(theory, &sec, v.n, v.pol)?, Complex64::new(v.re, v.im))))
                    .collect::<Result<Vec<_>>>()?;
                coherent(theory, &sec, &a)
            }
            FunctionalSpec::OneParticle { sector, psi } => {
                let sec = sector_name(theory, sector)?;
                let p = psi
                    .iter()
                    .map(|v| Ok((slot(theory, &sec, v.n, v.pol)?, Complex64::new(v.re, v.im))))
                    .collect::<Result<Vec<_>>>()?;
                n_particle(theory, &sec, &SymmetricTensor::one_particle(&p)?)
            }
            FunctionalSpec::Product { sector, modes } => {
                let sec = sector_name(theory, sector)?;
                let s = modes.iter().map(|m| slot(theory, &sec, m.n, m.pol)).collect::<Result<Vec<_>>>()?;
                n_particle(theory, &sec, &SymmetricTensor::product(&s)?)
            }
            FunctionalSpec::NParticle { sector, entries } => {
                let sec = sector_name(theory, sector)?;
                let rank = entries.first().map(|e| e.modes.len()).unwrap_or(0);
                let e = entries
                    .iter()
                    .map(|t| {
                        let s = t.modes.iter().map(|m| slot(theory, &sec, m.n, m.pol)).collect::<Result<Vec<_>>>()?;
                        Ok((s, Complex64::new(t.re, t.im)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                n_particle(theory, &sec, &SymmetricTensor::new(rank, e)?)
            }
            FunctionalSpec::Superposition { components } => {
                let parts = components
                    .iter()
                    .map(|c| Ok((Complex64::new(c.re, c.im), c.state.build(theory)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(WaveFunctional::Superposition(SuperpositionFunctional::new(parts)?))
            }
        }
    }
}
