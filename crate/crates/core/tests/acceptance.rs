//! One PASS/FAIL line per acceptance criterion.
//!
//! Runs as a plain binary (`harness = false`). Exit status is 0 unless
//! `ACCEPTANCE_STRICT=1` is set, in which case any FAIL exits 1. Criterion
//! numbers passed as arguments run only those criteria.

use num_complex::Complex64;
use pilot_field::cli_io::{run_experiment, ExperimentConfig};
use pilot_field::dynamics::{energy, evolve_free, grid_current, grid_evolve, GridHamiltonianSpec, Tolerances};
use pilot_field::ensemble_stats::{sample_equilibrium, KsConfig};
use pilot_field::experiments::{quartic_dispersion, checkpoints, equivariance, gauge_equivalence, higgs_linearization, QuarticParams};
use pilot_field::holland_angular::{
    length_scale_criterion, sample_site_alpha, sweep, HollandFamily, Spin, DEFAULT_MARGIN, SITE_BHATTACHARYYA, SWEEP_FRACTIONS, SWEEP_SITES,
};
use pilot_field::overlap_lab::{functional_overlap, n_particle_overlap_scan, BosonicFamily, OverlapFamily};
use pilot_field::rng::{rng, split};
use pilot_field::theories::{higgs_quadratic_spectrum, TheoryModel};
use pilot_field::wavefunctionals::{coherent, n_particle, GaussianFunctional, GridSpec, GridWavefunction, SymmetricTensor, WaveFunctional};
use rand::Rng;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

const SEED: u64 = 20_261_016;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let n = 1_000_000;
    let stats = |spin| {
        let a = sample_site_alpha(spin, n, split(SEED, &format!("{spin:?}")));
        let m = a.iter().sum::<f64>() / n as f64;
        let s = (a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        (m, s)
    };
    // u_+ is the spin-up site state, u_- the spin-down one
    let (m_plus, s_plus) = stats(Spin::Up);
    let (m_minus, s_minus) = stats(Spin::Down);
    let elapsed = start.elapsed();
    let std = (15.0 * PI * PI / 64.0 - 2.0).sqrt();
    let literal = rel(m_plus, 5.0 * PI / 8.0) < 0.01 && rel(m_minus, 3.0 * PI / 8.0) < 0.01;
    let widths = rel(s_plus, std) < 0.01 && rel(s_minus, std) < 0.01;
    let swapped = rel(m_plus, 3.0 * PI / 8.0) < 0.01 && rel(m_minus, 5.0 * PI / 8.0) < 0.01;
    outcome(
        literal && widths && elapsed < Duration::from_secs(60),
        format!(
            "<alpha>_u+ = {m_plus:.6} (target 5pi/8 = {:.6}), <alpha>_u- = {m_minus:.6} (target 3pi/8 = {:.6}), std {s_plus:.6}/{s_minus:.6} vs {std:.6}, \
             means match with labels exchanged: {swapped}, {:.1?}",
            5.0 * PI / 8.0,
            3.0 * PI / 8.0,
            elapsed
        ),
    )
}

fn criterion_2() -> Outcome {
    let rows = sweep(&SWEEP_SITES, &SWEEP_FRACTIONS, 4000, DEFAULT_MARGIN, split(SEED, "sweep")).expect("sweep");
    let agree = rows.iter().filter(|r| r.agrees()).count();
    let constant = (4.0 / PI) * (15.0 * PI * PI / 64.0 - 2.0).sqrt();
    let ls = length_scale_criterion(1e-15, 1e30, DEFAULT_MARGIN).expect("length scale");
    let pass = agree == rows.len() && rows.len() == 25 && (constant - 0.7126).abs() < 1e-4 && rel(ls.threshold, 1e-5) < 1e-12;
    outcome(pass, format!("{agree}/{} cells agree, constant {constant:.4}, L >> {:.3e} m", rows.len(), ls.threshold))
}

fn criterion_3() -> Outcome {
    let l = 2.0 * PI;
    let theories = [
        TheoryModel::schrodinger_field(l, 1.5, 1.0).unwrap(),
        TheoryModel::free_em_bohm(l, 1.5).unwrap(),
        TheoryModel::massive_spin1(l, 1.5, 1.0).unwrap(),
    ];
    let times = checkpoints(4.0, 5);
    let mut ok = true;
    let mut slowest = Duration::ZERO;
    let mut failures = Vec::new();
    let mut runs = 0;
    for th in &theories {
        let sec = th.space().sectors()[0].name;
        let b = &th.space().sectors()[0].basis;
        let s1 = b.slot(b.index_of([1, 0, 0]).unwrap(), 0);
        let s2 = b.slot(b.index_of([1, 1, 0]).unwrap(), 0);
        let s3 = b.slot(b.index_of([0, -1, 0]).unwrap(), b.n_pol() - 1);
        let functionals = [
            ("vacuum", pilot_field::wavefunctionals::vacuum(th).unwrap()),
            ("coherent", coherent(th, sec, &[(s1, Complex64::new(1.0, 0.5)), (s3, Complex64::new(-0.4, 0.3))]).unwrap()),
            (
                "one-particle",
                n_particle(th, sec, &SymmetricTensor::one_particle(&[(s1, Complex64::new(0.8, 0.0)), (s2, Complex64::new(0.0, 0.6))]).unwrap()).unwrap(),
            ),
        ];
        for (name, f) in &functionals {
            let start = Instant::now();
            let ks = KsConfig { seed: split(SEED, &format!("ks-{}-{name}", th.kind.name())), ..KsConfig::default() };
            let r = equivariance(th, f, 10_000, &times, &Tolerances::default(), &ks, split(SEED, &format!("{}-{name}", th.kind.name()))).unwrap();
            let el = start.elapsed();
            slowest = slowest.max(el);
            runs += 1;
            if !r.pass() || el > Duration::from_secs(300) {
                ok = false;
                failures.push(format!("{}/{name}", th.kind.name()));
            }
        }
    }
    outcome(ok, format!("{runs} runs, N = 1e4, 5 checkpoints, slowest {slowest:.1?}, failing: {failures:?}"))
}

fn criterion_4() -> Outcome {
    let r = quartic_dispersion(&QuarticParams { seed: split(SEED, "appendix-a"), ..QuarticParams::default() }).unwrap();
    let pass = r.correct_passes_all() && r.naive_fails_final() && r.plane_wave_disagreement < 1e-10;
    outcome(
        pass,
        format!(
            "critical {:.4e}; correct max {:.4e}; naive final {:.4e}; plane waves {:.2e}",
            r.critical,
            r.ks_correct.iter().cloned().fold(0.0, f64::max),
            r.ks_naive.last().unwrap(),
            r.plane_wave_disagreement
        ),
    )
}

fn criterion_5() -> Outcome {
    let l = 2.0 * PI;
    let bohm = TheoryModel::free_em_bohm(l, 1.5).unwrap();
    let b = &bohm.space().sector("A").unwrap().basis;
    let s1 = b.slot(b.index_of([1, 0, 0]).unwrap(), 0);
    let s2 = b.slot(b.index_of([1, 1, 0]).unwrap(), 1);
    let s3 = b.slot(b.index_of([0, -1, 1]).unwrap(), 0);
    let psi = n_particle(
        &bohm,
        "A",
        &SymmetricTensor::one_particle(&[(s1, Complex64::new(0.6, 0.0)), (s2, Complex64::new(0.0, 0.6)), (s3, Complex64::new(0.28f64.sqrt(), 0.0))]).unwrap(),
    )
    .unwrap();
    let r = gauge_equivalence(l, 1.5, &psi, &checkpoints(5.0, 11), &Tolerances::default(), split(SEED, "gauge")).unwrap();
    let worst = r.b_difference.iter().cloned().fold(0.0, f64::max);
    outcome(worst < 1e-6 && r.longitudinal_velocity == 0.0, format!("max |B_bohm - B_val| {worst:.3e}, max |dA_L/dt| {:.1e}", r.longitudinal_velocity))
}

fn criterion_6() -> Outcome {
    let (mu, lambda, e) = (1.0, 0.5, 0.3);
    let s = higgs_quadratic_spectrum(mu, lambda, e, None).unwrap();
    let v = (mu * mu / lambda).sqrt();
    let spectrum = (s.v - v).abs() < 1e-10 && (s.scalar_mass - (2.0 * mu * mu).sqrt()).abs() < 1e-10 && (s.vector_mass - (e * e * v * v).sqrt()).abs() < 1e-10;
    let lin = higgs_linearization(2.0 * PI, 1.5, mu, lambda, e, &[1e-1, 1e-2, 1e-3], split(SEED, "higgs")).unwrap();
    let decreasing = lin.rows.windows(2).all(|w| w[1].relative_error < w[0].relative_error);
    let pass = spectrum && decreasing && (lin.order - 1.0).abs() < 0.1;
    let errs: Vec<String> = lin.rows.iter().map(|r| format!("{:.1e}:{:.2e}", r.epsilon, r.relative_error)).collect();
    outcome(pass, format!("v {:.10}, m_s {:.10}, m_A {:.10}; errors {errs:?}, order {:.3}", s.v, s.scalar_mass, s.vector_mass, lin.order))
}

fn random_gaussian(r: &mut impl Rng) -> WaveFunctional {
    let d = r.gen_range(1..=4);
    let widths = (0..d).map(|_| Complex64::new(r.gen_range(0.3..2.0), r.gen_range(-1.0..1.0))).collect();
    let centers = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
    let moms = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
    WaveFunctional::Gaussian(GaussianFunctional::new(widths, centers, moms).unwrap())
}

fn criterion_7() -> Outcome {
    let mut r = rng(split(SEED, "pairs"));
    let mut within = 0;
    for i in 0..50 {
        let a = random_gaussian(&mut r);
        let b = match &a {
            WaveFunctional::Gaussian(g) => {
                let d = g.dim();
                WaveFunctional::Gaussian(
                    GaussianFunctional::new(
                        (0..d).map(|_| Complex64::new(r.gen_range(0.3..2.0), r.gen_range(-1.0..1.0))).collect(),
                        (0..d).map(|_| r.gen_range(-1.5..1.5)).collect(),
                        (0..d).map(|_| r.gen_range(-1.0..1.0)).collect(),
                    )
                    .unwrap(),
                )
            }
            _ => unreachable!(),
        };
        let p = functional_overlap(&a, &b, 20_000, split(SEED, &format!("pair{i}"))).unwrap();
        let bh = &p.bhattacharyya;
        if (bh.estimate - bh.analytic.unwrap()).abs() <= 3.0 * bh.std_err {
            within += 1;
        }
    }
    // powi may round differently between builds; compare with a repeated product
    let holland_exact = (1..=16).all(|n| {
        let expect = (0..n).fold(1.0, |acc, _| acc * (PI / 4.0));
        (SITE_BHATTACHARYYA - PI / 4.0).abs() < 1e-16 && HollandFamily.analytic(n).is_some_and(|a| rel(a, expect) < 1e-14)
    });
    let hs = n_particle_overlap_scan(&HollandFamily, &[1, 2, 4, 8], 40_000, split(SEED, "holland")).unwrap();
    let holland_mc = hs.rows.iter().all(|x| (x.overlap - x.analytic.unwrap()).abs() <= 3.0 * x.std_err);

    let th = TheoryModel::schrodinger_field(2.0 * PI, 2.5, 1.0).unwrap();
    let basis = &th.space().sector("phi").unwrap().basis;
    // mode functions along x confined to the left and the right half of the box
    let left: Vec<(usize, Complex64)> = (-2i32..=2)
        .map(|m| {
            let c = if m == 0 { Complex64::new(0.5, 0.0) } else { Complex64::new(0.0, -1.0) * ((1.0 - (-1f64).powi(m)) / (2.0 * PI * m as f64)) };
            (basis.slot(basis.index_of([m, 0, 0]).unwrap(), 0), c)
        })
        .filter(|(_, c)| c.norm() > 0.0)
        .collect();
    let norm = left.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
    let left: Vec<_> = left.into_iter().map(|(s, c)| (s, c / norm)).collect();
    let right: Vec<_> = left
        .iter()
        .map(|(s, c)| {
            let m = basis.lattice(*s / basis.n_pol())[0];
            (*s, c * (-1f64).powi(m))
        })
        .collect();
    let fl = n_particle(&th, "phi", &SymmetricTensor::one_particle(&left).unwrap()).unwrap();
    let fr = n_particle(&th, "phi", &SymmetricTensor::one_particle(&right).unwrap()).unwrap();
    let disjoint = functional_overlap(&fl, &fr, 40_000, split(SEED, "disjoint")).unwrap();

    let reps: Vec<usize> = (0..basis.len()).filter(|&i| !basis.is_zero(i) && basis.is_representative(i)).take(12).map(|i| basis.slot(i, 0)).collect();
    let fam = BosonicFamily { theory: &th, sector: "phi".into(), slots: reps };
    let scan = n_particle_overlap_scan(&fam, &(1..=12).collect::<Vec<_>>(), 20_000, split(SEED, "bosonic")).unwrap();

    let pass = within == 50 && holland_exact && holland_mc && disjoint.bhattacharyya.estimate > 0.1 && scan.fit.slope < 0.0 && scan.fit.r_squared > 0.9;
    outcome(
        pass,
        format!(
            "gaussian pairs within 3 sigma {within}/50; holland exact {holland_exact}, MC {holland_mc}; half-box one-particle overlap {:.4} +- {:.4}; \
             excitation fit slope {:.4}, R^2 {:.4}",
            disjoint.bhattacharyya.estimate, disjoint.bhattacharyya.std_err, scan.fit.slope, scan.fit.r_squared
        ),
    )
}

fn criterion_8() -> Outcome {
    // norm drift of the split-step solver with a potential
    let grid = GridSpec::line(256, 20.0).unwrap();
    let spec = GridHamiltonianSpec::quadratic(&[1.0]).with_potential(&grid, |x| 0.5 * x[0] * x[0]);
    let psi0 = GridWavefunction::from_fn(grid.clone(), |x| Complex64::from_polar((-(x[0] - 1.0).powi(2) / 2.0).exp(), 0.7 * x[0])).unwrap();
    let steps = 8000;
    let psi = grid_evolve(&spec, &psi0, 2.5e-4, steps).unwrap();
    let drift = (psi.norm_sqr() - psi0.norm_sqr()).abs() / psi0.norm_sqr() / steps as f64;
    let e_drift = rel(energy(&spec, &psi).unwrap(), energy(&spec, &psi0).unwrap());

    // continuity under quartic dispersion
    let q = GridHamiltonianSpec::quartic(0.1, 0.5);
    let grid = GridSpec::line(1024, 60.0).unwrap();
    let p0 = GridWavefunction::from_fn(grid.clone(), |x| Complex64::from_polar((-x[0] * x[0] / 4.0).exp(), 0.8 * x[0])).unwrap();
    let (t, h) = (1.0, 1e-4);
    let (pm, pc, pp) = (evolve_free(&q, &p0, t - h).unwrap(), evolve_free(&q, &p0, t).unwrap(), evolve_free(&q, &p0, t + h).unwrap());
    let j: Vec<Complex64> = grid_current(&pc, &q).unwrap()[0].iter().map(|x| Complex64::new(*x, 0.0)).collect();
    let dj = grid.spectral().derivative(&j, 0, 1);
    let mut res: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..grid.len() {
        let drho = (pp.values[i].norm_sqr() - pm.values[i].norm_sqr()) / (2.0 * h);
        res = res.max((drho + dj[i].re).abs());
        scale = scale.max(drho.abs());
    }
    let continuity = res / scale;

    // analytic gradients against central differences
    let l = 2.0 * PI;
    let th = TheoryModel::massive_spin1(l, 1.2, 1.0).unwrap();
    let b = &th.space().sector("A").unwrap().basis;
    let s1 = b.slot(b.index_of([1, 0, 0]).unwrap(), 0);
    let s2 = b.slot(b.index_of([0, 1, 0]).unwrap(), 2);
    let s3 = b.slot(b.index_of([0, 0, -1]).unwrap(), 1);
    let fs = [
        coherent(&th, "A", &[(s1, Complex64::new(0.7, -0.2)), (s2, Complex64::new(0.1, 0.4))]).unwrap(),
        n_particle(&th, "A", &SymmetricTensor::one_particle(&[(s1, Complex64::new(0.6, 0.0)), (s3, Complex64::new(0.0, 0.8))]).unwrap()).unwrap(),
        n_particle(&th, "A", &SymmetricTensor::product(&[s1, s2, s3]).unwrap()).unwrap(),
        n_particle(&th, "A", &SymmetricTensor::product(&[s2, s2]).unwrap()).unwrap(),
    ];
    let mut worst_grad: f64 = 0.0;
    for (fi, f) in fs.iter().enumerate() {
        let pts = sample_equilibrium(f, 25, split(SEED, &format!("probe{fi}"))).unwrap().members;
        for x in pts {
            let (_, g) = f.grad_log_psi(&x).unwrap();
            let hh = 1e-5;
            let mut num = 0.0;
            let mut den = 0.0;
            for r in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[r] += hh;
                xm[r] -= hh;
                let (lp, lm) = (f.log_psi(&xp).unwrap(), f.log_psi(&xm).unwrap());
                let dre = (lp.re - lm.re) / (2.0 * hh);
                let dim = ((lp.im - lm.im + PI).rem_euclid(2.0 * PI) - PI) / (2.0 * hh);
                num += (dre - g[r].re).powi(2) + (dim - g[r].im).powi(2);
                den += g[r].norm_sqr();
            }
            worst_grad = worst_grad.max((num / den.max(1e-300)).sqrt());
        }
    }

    let determinism = byte_determinism();
    let pass = drift < 1e-10 && e_drift < 1e-8 && continuity < 1e-4 && worst_grad < 1e-5 && determinism.is_ok();
    outcome(
        pass,
        format!(
            "norm drift/step {drift:.2e} (energy {e_drift:.1e}), continuity {continuity:.2e}, gradient {worst_grad:.2e} over 100 probes, CSV determinism {}",
            match &determinism {
                Ok(n) => format!("ok ({n} files)"),
                Err(e) => e.clone(),
            }
        ),
    )
}

const DETERMINISM_CONFIGS: [&str; 3] = [
    r#"
experiment = "appendix-a"
seed = 11
[appendix_a]
grid_points = 1024
extent = 60.0
sigma = 1.0
k0 = 0.0
alpha1 = 0.1
alpha2 = 0.5
t_final = 1.0
checkpoints = 3
particles = 2000
steps_per_interval = 20
"#,
    r#"
experiment = "equivariance"
seed = 12
[theory]
kind = "schrodinger-field"
box_length = 6.283185307179586
cutoff = 1.2
params = { mass = 1.0 }
[functional]
kind = "one-particle"
psi = [ { n = [1, 0, 0], re = 0.6 }, { n = [0, 0, 0], im = 0.8, re = 0.0 } ]
[run]
samples = 500
t_final = 1.0
checkpoints = 3
[ks]
reference_samples = 5000
"#,
    r#"
experiment = "overlap-scan"
seed = 13
[overlap]
family = "holland"
ns = [1, 2, 3]
samples = 4000
"#,
];

fn byte_determinism() -> Result<usize, String> {
    let mut files = 0;
    for text in DETERMINISM_CONFIGS {
        let cfg = ExperimentConfig::from_toml(text).map_err(|e| e.to_string())?;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_experiment(&cfg, a.path()).map_err(|e| e.to_string())?;
        run_experiment(&cfg, b.path()).map_err(|e| e.to_string())?;
        let dir = |p: &std::path::Path| p.join(&cfg.experiment);
        for entry in std::fs::read_dir(dir(a.path())).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "csv") {
                let other = dir(b.path()).join(path.file_name().unwrap());
                if std::fs::read(&path).unwrap() != std::fs::read(&other).map_err(|e| e.to_string())? {
                    return Err(format!("{} differs between runs", path.display()));
                }
                files += 1;
            }
        }
    }
    Ok(files)
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "angular closed forms", criterion_1),
        (2, "distinguishability sweep", criterion_2),
        (3, "equivariance", criterion_3),
        (4, "quartic dispersion discrimination", criterion_4),
        (5, "gauge equivalence", criterion_5),
        (6, "Higgs spectrum and linearization", criterion_6),
        (7, "overlap suite", criterion_7),
        (8, "solver hygiene", criterion_8),
    ];
    // optional criterion numbers on the command line select a subset
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        ran += 1;
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {n} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{}/{ran} criteria pass", ran - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
