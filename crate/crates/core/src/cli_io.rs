//! Experiment configs, runners, and on-disk artifacts.
//!
//! A config is a TOML file naming one experiment. `run_experiment` writes
//! `summary.json`, `bundle.json`, one CSV per table, and returns the bundle.
//! CSV numbers use `{:.16e}` (17 significant digits) so identical seeds give
//! byte-identical files.

use crate::dynamics::Tolerances;
use crate::ensemble_stats::{HConfig, KsConfig};
use crate::error::{Error, Result};
use crate::experiments::{self, QuarticParams};
use crate::holland_angular::{self, alpha_mean, alpha_std, length_scale_criterion, sample_site_alpha, HollandFamily, Spin};
use crate::overlap_lab::{n_particle_overlap_scan, BosonicFamily, OverlapFamily};
use crate::rng::split;
use crate::theories::{higgs_quadratic_spectrum, TheoryKind, TheoryModel, TheoryParams};
use crate::wavefunctionals::{FunctionalSpec, ModeRef};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Overrides the directory under which run outputs are written.
pub const OUTPUT_ROOT_ENV: &str = "PILOT_FIELD_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

/// Experiment names with a one-line description.
pub const EXPERIMENTS: [(&str, &str); 8] = [
    ("equivariance", "transport an equilibrium ensemble and KS-test it at checkpoints"),
    ("relaxation", "coarse-grained H of a nonequilibrium ensemble over time"),
    ("overlap-scan", "Bhattacharyya overlap against n for a family of state pairs"),
    ("holland-sweep", "angular closed forms and the distinguishability sweep"),
    ("appendix-a", "current-based versus Hamilton-Jacobi velocity under quartic dispersion"),
    ("higgs-spectrum", "broken-phase spectrum and the linearized guidance check"),
    ("gauge-equivalence", "Bohm and Valentini electromagnetic trajectories from matched data"),
    ("trajectory", "a single guided trajectory"),
];

const THEORY: [&str; 3] = ["theory.kind", "theory.box_length", "theory.cutoff"];
const RUN: [&str; 3] = ["run.samples", "run.t_final", "run.checkpoints"];

fn required(experiment: &str) -> Option<Vec<&'static str>> {
    let mut v: Vec<&str> = Vec::new();
    match experiment {
        "equivariance" => {
            v.extend(THEORY);
            v.push("functional.kind");
            v.extend(RUN);
        }
        "relaxation" => {
            v.extend(THEORY);
            v.extend(["functional.kind", "initial.kind"]);
            v.extend(RUN);
        }
        "overlap-scan" => v.extend(["overlap.family", "overlap.ns", "overlap.samples"]),
        "holland-sweep" => v.extend(["holland.sites", "holland.fractions", "holland.samples", "holland.closed_form_samples"]),
        "appendix-a" => v.extend([
            "appendix_a.grid_points",
            "appendix_a.extent",
            "appendix_a.sigma",
            "appendix_a.k0",
            "appendix_a.alpha1",
            "appendix_a.alpha2",
            "appendix_a.t_final",
            "appendix_a.checkpoints",
            "appendix_a.particles",
        ]),
        "higgs-spectrum" => {
            v.extend(["higgs.mu", "higgs.lambda", "higgs.charge", "higgs.box_length", "higgs.cutoff", "higgs.epsilons"])
        }
        "gauge-equivalence" => {
            v.extend(["gauge.box_length", "gauge.cutoff", "gauge.t_final", "gauge.checkpoints", "functional.kind"])
        }
        "trajectory" => {
            v.extend(THEORY);
            v.extend(["functional.kind", "trajectory.t_final", "trajectory.points"]);
        }
        _ => return None,
    }
    Some(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    pub kind: String,
    pub box_length: f64,
    pub cutoff: f64,
    #[serde(default)]
    pub params: TheoryParams,
}

impl TheoryConfig {
    pub fn build(&self) -> Result<TheoryModel> {
        let kind = TheoryKind::from_name(&self.kind).ok_or_else(|| Error::Config(format!("theory.kind: unknown theory `{}`", self.kind)))?;
        TheoryModel::from_parts(kind, &self.params, self.box_length, self.cutoff)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub samples: usize,
    pub t_final: f64,
    pub checkpoints: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KsSettings {
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_projections")]
    pub random_projections: usize,
    #[serde(default = "default_reference")]
    pub reference_samples: usize,
}

fn default_level() -> f64 {
    0.01
}
fn default_projections() -> usize {
    4
}
fn default_reference() -> usize {
    100_000
}

impl Default for KsSettings {
    fn default() -> Self {
        KsSettings { level: default_level(), random_projections: default_projections(), reference_samples: default_reference() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HSettings {
    pub bin_fraction: f64,
    pub range_sigmas: f64,
    pub epsilon: f64,
    pub reference_samples: usize,
}

impl Default for HSettings {
    fn default() -> Self {
        HSettings { bin_fraction: 0.05, range_sigmas: 6.0, epsilon: 1e-10, reference_samples: 200_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarticConfig {
    pub grid_points: usize,
    pub extent: f64,
    pub sigma: f64,
    pub k0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub t_final: f64,
    pub checkpoints: usize,
    pub particles: usize,
    #[serde(default)]
    pub steps_per_interval: Option<usize>,
    #[serde(default)]
    pub density_floor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `a^dag_{m1} .. a^dag_{mn} |0>` against the vacuum of `[theory]`.
    Bosonic,
    /// `n` occupied angular sites against `n` empty ones.
    Holland,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapConfig {
    pub family: FamilyKind,
    pub ns: Vec<usize>,
    pub samples: usize,
    #[serde(default)]
    pub sector: Option<String>,
    /// Modes excited one after another by the bosonic family.
    #[serde(default)]
    pub modes: Vec<ModeRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HollandConfig {
    pub sites: Vec<usize>,
    pub fractions: Vec<f64>,
    pub samples: usize,
    pub closed_form_samples: usize,
    #[serde(default)]
    pub margin: Option<f64>,
    /// Lattice spacing and density for the length-scale estimate.
    #[serde(default)]
    pub spacing: Option<f64>,
    #[serde(default)]
    pub density: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiggsConfig {
    pub mu: f64,
    pub lambda: f64,
    pub charge: f64,
    pub box_length: f64,
    pub cutoff: f64,
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfig {
    pub box_length: f64,
    pub cutoff: f64,
    pub t_final: f64,
    pub checkpoints: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub t_final: f64,
    pub points: usize,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    /// Output subdirectory; defaults to the experiment name.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub theory: Option<TheoryConfig>,
    #[serde(default)]
    pub functional: Option<FunctionalSpec>,
    #[serde(default)]
    pub initial: Option<FunctionalSpec>,
    #[serde(default)]
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub ks: Option<KsSettings>,
    #[serde(default)]
    pub h: Option<HSettings>,
    #[serde(default)]
    pub appendix_a: Option<QuarticConfig>,
    #[serde(default)]
    pub overlap: Option<OverlapConfig>,
    #[serde(default)]
    pub holland: Option<HollandConfig>,
    #[serde(default)]
    pub higgs: Option<HiggsConfig>,
    #[serde(default)]
    pub gauge: Option<GaugeConfig>,
    #[serde(default)]
    pub trajectory: Option<TrajectoryConfig>,
}

fn lookup<'a>(v: &'a toml::Value, path: &str) -> Option<&'a toml::Value> {
    path.split('.').try_fold(v, |cur, key| cur.get(key))
}

impl ExperimentConfig {
    /// Parse and validate TOML text. Missing required fields are reported
    /// together, by dotted path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Value = text.parse::<toml::Table>().map(toml::Value::Table).map_err(|e| Error::Config(e.to_string()))?;
        let mut missing: Vec<&str> = ["experiment", "seed"].into_iter().filter(|p| lookup(&value, p).is_none()).collect();
        if let Some(name) = lookup(&value, "experiment").and_then(|v| v.as_str()) {
            let req = required(name).ok_or_else(|| Error::Config(format!("experiment: unknown experiment `{name}`")))?;
            missing.extend(req.into_iter().filter(|p| lookup(&value, p).is_none()));
            if name == "overlap-scan" && lookup(&value, "overlap.family").and_then(|v| v.as_str()) == Some("bosonic") {
                missing.extend(THEORY.into_iter().filter(|p| lookup(&value, p).is_none()));
                if lookup(&value, "overlap.modes").is_none() {
                    missing.push("overlap.modes");
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing fields: {}", missing.join(", "))));
        }
        let cfg: ExperimentConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Range checks that the schema cannot express.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("{field}: {why}")));
        if let Some(r) = &self.run {
            if r.samples == 0 {
                return bad("run.samples", "must be positive");
            }
            if r.checkpoints == 0 {
                return bad("run.checkpoints", "must be positive");
            }
            if !(r.t_final >= 0.0) {
                return bad("run.t_final", "must be non-negative");
            }
        }
        if let Some(t) = &self.theory {
            if TheoryKind::from_name(&t.kind).is_none() {
                return bad("theory.kind", &format!("unknown theory `{}`", t.kind));
            }
        }
        if let Some(k) = &self.ks {
            if !(k.level > 0.0 && k.level < 1.0) {
                return bad("ks.level", "must lie in (0, 1)");
            }
        }
        if let Some(a) = &self.appendix_a {
            if a.grid_points < 16 || a.particles == 0 || a.checkpoints == 0 {
                return bad("appendix_a", "grid_points >= 16, particles and checkpoints positive");
            }
        }
        if let Some(h) = &self.holland {
            if h.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return bad("holland.fractions", "must lie in [0, 1]");
            }
        }
        Ok(())
    }

    fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T> {
        s.as_ref().ok_or_else(|| Error::Config(format!("missing fields: {name}")))
    }

    fn ks_config(&self, seed: u64) -> KsConfig {
        let k = self.ks.clone().unwrap_or_default();
        KsConfig { level: k.level, random_projections: k.random_projections, reference_samples: k.reference_samples, seed }
    }

    fn h_config(&self, seed: u64) -> HConfig {
        let h = self.h.clone().unwrap_or_default();
        HConfig { bin_fraction: h.bin_fraction, range_sigmas: h.range_sigmas, epsilon: h.epsilon, reference_samples: h.reference_samples, seed }
    }

    fn output_dir(&self, root: &Path) -> PathBuf {
        root.join(self.label.clone().unwrap_or_else(|| self.experiment.clone()))
    }
}

/// Output root from the environment, or `runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.into(), pass, detail }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub y_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    /// Plot kind the series belongs to.
    pub plot: String,
    pub name: String,
    pub points: Vec<Point>,
}

fn series(plot: &str, name: &str, pts: impl IntoIterator<Item = (f64, f64, f64)>) -> Series {
    Series { plot: plot.into(), name: name.into(), points: pts.into_iter().map(|(x, y, y_err)| Point { x, y, y_err }).collect() }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    #[serde(with = "nan_safe")]
    pub rows: Vec<Vec<f64>>,
}

/// JSON has no NaN or infinity; those cells are written as strings.
mod nan_safe {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Cell {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let cells: Vec<Vec<Cell>> =
            rows.iter().map(|r| r.iter().map(|x| if x.is_finite() { Cell::Num(*x) } else { Cell::Text(x.to_string()) }).collect()).collect();
        cells.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let cells = Vec::<Vec<Cell>>::deserialize(d)?;
        cells
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|c| match c {
                        Cell::Num(x) => Ok(x),
                        Cell::Text(t) => t.parse().map_err(serde::de::Error::custom),
                    })
                    .collect()
            })
            .collect()
    }
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub experiment: String,
    pub seed: u64,
    /// False when the run stopped on a numerical failure.
    pub complete: bool,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
    pub tables: BTreeMap<String, Table>,
    /// Full typed report of the experiment.
    pub report: serde_json::Value,
}

impl ResultBundle {
    fn new(cfg: &ExperimentConfig) -> Self {
        ResultBundle {
            experiment: cfg.experiment.clone(),
            seed: cfg.seed,
            complete: false,
            error: None,
            checks: Vec::new(),
            series: Vec::new(),
            tables: BTreeMap::new(),
            report: serde_json::Value::Null,
        }
    }

    pub fn pass(&self) -> bool {
        self.complete && self.checks.iter().all(|c| c.pass)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub complete: bool,
    pub pass: bool,
    pub error: Option<String>,
    pub checks: Vec<Check>,
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a numeric table as CSV.
pub fn write_table_csv(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(&table.header).map_err(|e| Error::Io(e.to_string()))?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| fmt_num(*x))).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table_csv(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let header = r.headers().map_err(|e| Error::Io(e.to_string()))?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.map_err(|e| Error::Io(e.to_string()))?
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(Table { header, rows })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Long-format `series,x,y,y_err` CSV of every series tagged with `kind`.
pub fn emit_plot_data(bundle: &ResultBundle, kind: &str) -> Result<String> {
    let chosen: Vec<&Series> = bundle.series.iter().filter(|s| s.plot == kind).collect();
    if chosen.is_empty() {
        let have: std::collections::BTreeSet<&str> = bundle.series.iter().map(|s| s.plot.as_str()).collect();
        return Err(Error::Config(format!(
            "bundle has no series for plot `{kind}` (available: {})",
            have.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["series", "x", "y", "y_err"]).map_err(io)?;
    for s in chosen {
        for p in &s.points {
            w.write_record([s.name.clone(), fmt_num(p.x), fmt_num(p.y), fmt_num(p.y_err)]).map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Run one experiment and write its artifacts under `root`. A numerical
/// failure mid-run still writes the summary (marked incomplete) before the
/// error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<ResultBundle> {
    cfg.validate()?;
    let dir = cfg.output_dir(root);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    let mut bundle = ResultBundle::new(cfg);
    let outcome = execute(cfg, &mut bundle);
    match &outcome {
        Ok(()) => bundle.complete = true,
        Err(e) => bundle.error = Some(e.to_string()),
    }
    for (name, t) in &bundle.tables {
        write_table_csv(&dir.join(format!("{name}.csv")), t)?;
    }
    write_json(&dir.join("bundle.json"), &bundle)?;
    let summary = Summary {
        experiment: bundle.experiment.clone(),
        seed: bundle.seed,
        complete: bundle.complete,
        pass: bundle.pass(),
        error: bundle.error.clone(),
        checks: bundle.checks.clone(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    outcome.map(|_| bundle)
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn execute(cfg: &ExperimentConfig, b: &mut ResultBundle) -> Result<()> {
    let tol = cfg.tolerances.unwrap_or_default();
    let seed = cfg.seed;
    match cfg.experiment.as_str() {
        "equivariance" => {
            let theory = cfg.section(&cfg.theory, "theory")?.build()?;
            let psi = cfg.section(&cfg.functional, "functional")?.build(&theory)?;
            let run = cfg.section(&cfg.run, "run")?;
            let times = experiments::checkpoints(run.t_final, run.checkpoints);
            let r = experiments::equivariance(&theory, &psi, run.samples, &times, &tol, &cfg.ks_config(split(seed, "ks")), seed)?;
            let mut t = Table::new(&["time", "marginal", "statistic", "critical", "pass"]);
            let mut per: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
            for rep in &r.reports {
                for (i, m) in rep.marginals.iter().enumerate() {
                    t.rows.push(vec![rep.time, i as f64, m.statistic, m.critical, m.pass as u8 as f64]);
                    per.entry(m.label.clone()).or_default().push((rep.time, m.statistic, 0.0));
                }
            }
            b.tables.insert("ks".into(), t);
            b.series.extend(per.into_iter().map(|(name, pts)| series("equivariance", &name, pts)));
            if let Some(c) = r.reports.first().and_then(|x| x.marginals.first()) {
                b.series.push(series("equivariance", "critical", r.reports.iter().map(|x| (x.time, c.critical, 0.0))));
            }
            let worst = r.reports.iter().map(|x| x.max_statistic()).fold(0.0, f64::max);
            b.checks.push(check("ks-all-checkpoints", r.pass(), format!("largest statistic {worst:.4e} over {} checkpoints", r.reports.len())));
            b.checks.push(check("flagged-members", r.flagged_members * 100 <= run.samples, format!("{} flagged", r.flagged_members)));
            b.report = to_json(&r);
        }
        "relaxation" => {
            let theory = cfg.section(&cfg.theory, "theory")?.build()?;
            let psi = cfg.section(&cfg.functional, "functional")?.build(&theory)?;
            let init = cfg.section(&cfg.initial, "initial")?.build(&theory)?;
            let run = cfg.section(&cfg.run, "run")?;
            let times = experiments::checkpoints(run.t_final, run.checkpoints);
            let r = experiments::relaxation(&theory, &psi, &init, run.samples, &times, &tol, &cfg.h_config(split(seed, "h")), seed)?;
            let mut t = Table::new(&["time", "h_bar"]);
            t.rows.extend(r.times.iter().zip(&r.h_bar).map(|(a, h)| vec![*a, *h]));
            b.tables.insert("h_bar".into(), t);
            b.series.push(series("relaxation", "h_bar", r.times.iter().zip(&r.h_bar).map(|(a, h)| (*a, *h, 0.0))));
            b.series.push(series("relaxation", "noise_floor", r.times.iter().map(|a| (*a, r.noise_floor, 0.0))));
            b.checks.push(check("h-bar-trend", r.slope <= 0.0, format!("fitted slope {:.4e}", r.slope)));
            b.report = to_json(&r);
        }
        "overlap-scan" => {
            let o = cfg.section(&cfg.overlap, "overlap")?;
            let r = match o.family {
                FamilyKind::Holland => n_particle_overlap_scan(&HollandFamily, &o.ns, o.samples, seed)?,
                FamilyKind::Bosonic => {
                    let theory = cfg.section(&cfg.theory, "theory")?.build()?;
                    let sector = match &o.sector {
                        Some(s) => s.clone(),
                        None => theory.space().sectors().first().map(|s| s.name.to_string()).ok_or_else(|| Error::Config("theory has no sectors".into()))?,
                    };
                    let basis = &theory.space().sector(&sector).ok_or_else(|| Error::Config(format!("overlap.sector: no sector `{sector}`")))?.basis;
                    let slots = o
                        .modes
                        .iter()
                        .map(|m| {
                            let i = basis.index_of(m.n).ok_or_else(|| Error::Config(format!("overlap.modes: {:?} not in the basis", m.n)))?;
                            Ok(basis.slot(i, m.pol))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let fam = BosonicFamily { theory: &theory, sector, slots };
                    n_particle_overlap_scan(&fam as &dyn OverlapFamily, &o.ns, o.samples, seed)?
                }
            };
            let mut t = Table::new(&["n", "overlap", "std_err", "analytic"]);
            t.rows.extend(r.rows.iter().map(|x| vec![x.n as f64, x.overlap, x.std_err, x.analytic.unwrap_or(f64::NAN)]));
            b.tables.insert("overlap".into(), t);
            b.series.push(series("overlap-scan", "estimate", r.rows.iter().map(|x| (x.n as f64, x.overlap, x.std_err))));
            let analytic: Vec<_> = r.rows.iter().filter_map(|x| x.analytic.map(|a| (x.n as f64, a, 0.0))).collect();
            if !analytic.is_empty() {
                b.series.push(series("overlap-scan", "analytic", analytic));
            }
            let agree = r.rows.iter().all(|x| x.analytic.is_none_or(|a| (x.overlap - a).abs() <= 3.0 * x.std_err + 1e-12));
            b.checks.push(check("analytic-within-3-sigma", agree, format!("{} rows", r.rows.len())));
            b.checks.push(check("log-overlap-slope-negative", r.fit.slope < 0.0, format!("slope {:.4e}", r.fit.slope)));
            b.checks.push(check("exponential-fit-r2", r.fit.r_squared > 0.9, format!("R^2 {:.4}", r.fit.r_squared)));
            b.report = to_json(&r);
        }
        "holland-sweep" => {
            let h = cfg.section(&cfg.holland, "holland")?;
            let margin = h.margin.unwrap_or(holland_angular::DEFAULT_MARGIN);
            let mut t = Table::new(&["spin", "mean", "std", "mean_exact", "std_exact"]);
            for (si, spin) in [Spin::Up, Spin::Down].into_iter().enumerate() {
                let a = sample_site_alpha(spin, h.closed_form_samples, split(seed, &format!("closed{si}")));
                let n = a.len() as f64;
                let mean = a.iter().sum::<f64>() / n;
                let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                let (me, se) = (alpha_mean(spin), alpha_std());
                t.rows.push(vec![si as f64, mean, std, me, se]);
                let ok = ((mean - me) / me).abs() < 0.01 && ((std - se) / se).abs() < 0.01;
                b.checks.push(check(&format!("closed-form-{}", if si == 0 { "up" } else { "down" }), ok, format!("mean {mean:.6} vs {me:.6}, std {std:.6} vs {se:.6}")));
            }
            b.tables.insert("closed_forms".into(), t);
            let rows = holland_angular::sweep(&h.sites, &h.fractions, h.samples, margin, split(seed, "sweep"))?;
            let mut t = Table::new(&["n", "n_l", "lhs", "analytic_pass", "empirical_separation", "empirical_pass"]);
            t.rows.extend(rows.iter().map(|r| vec![r.n as f64, r.n_l as f64, r.lhs, r.pass as u8 as f64, r.empirical_separation, r.empirical_pass as u8 as f64]));
            b.tables.insert("sweep".into(), t);
            b.series.push(series("holland-sweep", "empirical_separation", rows.iter().map(|r| (r.lhs, r.empirical_separation, 0.0))));
            let agree = rows.iter().filter(|r| r.agrees()).count();
            b.checks.push(check("sweep-agreement", agree == rows.len(), format!("{agree}/{} cells agree", rows.len())));
            if let (Some(a), Some(rho)) = (h.spacing, h.density) {
                let ls = length_scale_criterion(a, rho, margin)?;
                b.tables.insert("length_scale".into(), Table { header: vec!["threshold".into(), "required".into()], rows: vec![vec![ls.threshold, ls.required]] });
                b.checks.push(check("length-scale", ls.threshold.is_finite(), format!("L >> {:.3e}, L >= {:.3e} at margin {margin}", ls.threshold, ls.required)));
            }
            b.report = to_json(&rows);
        }
        "appendix-a" => {
            let a = cfg.section(&cfg.appendix_a, "appendix_a")?;
            let d = QuarticParams::default();
            let p = QuarticParams {
                grid_points: a.grid_points,
                extent: a.extent,
                sigma: a.sigma,
                k0: a.k0,
                alpha1: a.alpha1,
                alpha2: a.alpha2,
                t_final: a.t_final,
                checkpoints: a.checkpoints,
                particles: a.particles,
                steps_per_interval: a.steps_per_interval.unwrap_or(d.steps_per_interval),
                density_floor: a.density_floor.unwrap_or(d.density_floor),
                level: cfg.ks.clone().unwrap_or_default().level,
                seed,
                ..d
            };
            let r = experiments::quartic_dispersion(&p)?;
            let mut t = Table::new(&["time", "ks_correct", "ks_naive", "critical"]);
            t.rows.extend((0..r.times.len()).map(|i| vec![r.times[i], r.ks_correct[i], r.ks_naive[i], r.critical]));
            b.tables.insert("ks".into(), t);
            b.series.push(series("appendix-a", "correct", r.times.iter().zip(&r.ks_correct).map(|(a, k)| (*a, *k, 0.0))));
            b.series.push(series("appendix-a", "naive", r.times.iter().zip(&r.ks_naive).map(|(a, k)| (*a, *k, 0.0))));
            b.series.push(series("appendix-a", "critical", r.times.iter().map(|a| (*a, r.critical, 0.0))));
            b.checks.push(check("correct-passes-all", r.correct_passes_all(), format!("{:?}", r.ks_correct)));
            b.checks.push(check("naive-fails-final", r.naive_fails_final(), format!("final {:.4e} vs critical {:.4e}", r.ks_naive.last().copied().unwrap_or(0.0), r.critical)));
            b.checks.push(check("plane-wave-agreement", r.plane_wave_disagreement < 1e-10, format!("{:.3e}", r.plane_wave_disagreement)));
            b.report = to_json(&r);
        }
        "higgs-spectrum" => {
            let h = cfg.section(&cfg.higgs, "higgs")?;
            let s = higgs_quadratic_spectrum(h.mu, h.lambda, h.charge, None)?;
            let v = (h.mu * h.mu / h.lambda).sqrt();
            let (ms, mv) = ((2.0 * h.mu * h.mu).sqrt(), h.charge * v);
            b.tables.insert(
                "spectrum".into(),
                Table { header: vec!["v".into(), "scalar_mass".into(), "vector_mass".into()], rows: vec![vec![s.v, s.scalar_mass, s.vector_mass]] },
            );
            let ok = (s.v - v).abs() < 1e-10 && (s.scalar_mass - ms).abs() < 1e-10 && (s.vector_mass - mv).abs() < 1e-10;
            b.checks.push(check("spectrum", ok, format!("v {:.12}, scalar {:.12}, vector {:.12}", s.v, s.scalar_mass, s.vector_mass)));
            let lin = experiments::higgs_linearization(h.box_length, h.cutoff, h.mu, h.lambda, h.charge, &h.epsilons, seed)?;
            let mut t = Table::new(&["epsilon", "relative_error"]);
            t.rows.extend(lin.rows.iter().map(|r| vec![r.epsilon, r.relative_error]));
            b.tables.insert("linearization".into(), t);
            b.series.push(series("higgs-spectrum", "relative_error", lin.rows.iter().map(|r| (r.epsilon, r.relative_error, 0.0))));
            b.checks.push(check("linear-convergence", (lin.order - 1.0).abs() < 0.1, format!("order {:.4}", lin.order)));
            b.report = serde_json::json!({ "spectrum": to_json(&s), "linearization": to_json(&lin) });
        }
        "gauge-equivalence" => {
            let g = cfg.section(&cfg.gauge, "gauge")?;
            let bohm = TheoryModel::free_em_bohm(g.box_length, g.cutoff)?;
            let psi = cfg.section(&cfg.functional, "functional")?.build(&bohm)?;
            let times = experiments::checkpoints(g.t_final, g.checkpoints);
            let r = experiments::gauge_equivalence(g.box_length, g.cutoff, &psi, &times, &tol, seed)?;
            let mut t = Table::new(&["time", "b_difference"]);
            t.rows.extend(r.times.iter().zip(&r.b_difference).map(|(a, d)| vec![*a, *d]));
            b.tables.insert("b_difference".into(), t);
            b.series.push(series("gauge-equivalence", "b_difference", r.times.iter().zip(&r.b_difference).map(|(a, d)| (*a, *d, 0.0))));
            let worst = r.b_difference.iter().cloned().fold(0.0, f64::max);
            b.checks.push(check("b-agreement", worst < 1e-6, format!("max |dB| {worst:.3e}")));
            b.checks.push(check("longitudinal-static", r.longitudinal_velocity <= f64::EPSILON, format!("max |v_L| {:.3e}", r.longitudinal_velocity)));
            b.report = to_json(&r);
        }
        "trajectory" => {
            let theory = cfg.section(&cfg.theory, "theory")?.build()?;
            let psi = cfg.section(&cfg.functional, "functional")?.build(&theory)?;
            let tc = cfg.section(&cfg.trajectory, "trajectory")?;
            let times = experiments::checkpoints(tc.t_final, tc.points);
            let r = experiments::trajectory(&theory, &psi, tc.start.clone(), &times, &tol, seed)?;
            let mut header = vec!["time".to_string()];
            header.extend((0..theory.dim()).map(|i| format!("x{i}")));
            let rows = r.times.iter().zip(&r.states).map(|(t, x)| std::iter::once(*t).chain(x.iter().copied()).collect()).collect();
            b.tables.insert("trajectory".into(), Table { header, rows });
            for i in 0..theory.dim() {
                b.series.push(series("trajectory", &format!("x{i}"), r.times.iter().zip(&r.states).map(|(t, x)| (*t, x[i], 0.0))));
            }
            b.checks.push(check("not-flagged", !r.flagged, format!("{} steps, {} rejections", r.steps, r.rejections)));
            b.report = to_json(&r);
        }
        other => return Err(Error::Config(format!("experiment: unknown experiment `{other}`"))),
    }
    Ok(())
}
