use num_complex::Complex64;
use pilot_field::ensemble_stats::{equivariance_test, sample_equilibrium, KsConfig};
use pilot_field::mode_basis::Part;
use pilot_field::theories::{coord_of, TheoryModel};
use pilot_field::wavefunctionals::{n_particle, vacuum, SymmetricTensor};
use std::f64::consts::PI;

fn theory() -> TheoryModel {
    TheoryModel::schrodinger_field(2.0 * PI, 1.5, 1.0).unwrap()
}

fn slot(t: &TheoryModel, n: [i32; 3]) -> (usize, usize, usize) {
    let b = &t.space().sector("phi").unwrap().basis;
    let i = b.index_of(n).unwrap();
    let rep = if b.is_representative(i) { i } else { b.partner(i) };
    let x = coord_of(t, "phi", rep, 0, Part::Re).unwrap();
    let y = coord_of(t, "phi", rep, 0, Part::Im).unwrap();
    (b.slot(i, 0), x, y)
}

fn var(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[test]
fn vacuum_sample_passes_ks() {
    let t = theory();
    let v = vacuum(&t).unwrap();
    let e = sample_equilibrium(&v, 10_000, 7).unwrap();
    assert_eq!(e.provenance.method, "exact-gaussian");
    let r = equivariance_test(&e, &v, &KsConfig::default()).unwrap();
    assert!(r.pass, "{:?}", r.max_statistic());
}

#[test]
fn one_particle_second_moment() {
    // density r^2 exp(-w r^2) on the pair: <x^2> = 1/w
    let t = theory();
    let (s, x, y) = slot(&t, [1, 0, 0]);
    let w = t.vacuum_width(x).unwrap();
    let f = n_particle(&t, "phi", &SymmetricTensor::product(&[s]).unwrap()).unwrap();
    let e = sample_equilibrium(&f, 100_000, 11).unwrap();
    assert_eq!(e.provenance.method, "exact-linear-factors");
    for c in [x, y] {
        let xs: Vec<f64> = e.members.iter().map(|m| m[c]).collect();
        assert!((var(&xs) * w - 1.0).abs() < 0.02, "{}", var(&xs) * w);
    }
}

#[test]
fn two_quanta_second_moment_by_mcmc() {
    // density r^4 exp(-w r^2): <x^2> = 3 / (2 w)
    let t = theory();
    let (s, x, _) = slot(&t, [0, 1, 0]);
    let w = t.vacuum_width(x).unwrap();
    let f = n_particle(&t, "phi", &SymmetricTensor::product(&[s, s]).unwrap()).unwrap();
    let e = sample_equilibrium(&f, 40_000, 5).unwrap();
    assert_eq!(e.provenance.method, "metropolis-per-factor");
    assert!(!e.provenance.flagged, "{:?}", e.provenance);
    let xs: Vec<f64> = e.members.iter().map(|m| m[x]).collect();
    assert!((var(&xs) * w / 1.5 - 1.0).abs() < 0.04, "{}", var(&xs) * w);
    let r = equivariance_test(&e, &f, &KsConfig { reference_samples: 40_000, ..Default::default() }).unwrap();
    assert!(r.pass, "{:?}", r.marginals);
}

#[test]
fn superposition_of_lobes_is_sampled_evenly() {
    use pilot_field::wavefunctionals::{GaussianFunctional, SuperpositionFunctional, WaveFunctional};
    let g = |c: f64| WaveFunctional::Gaussian(GaussianFunctional::new(vec![Complex64::new(1.0, 0.0); 2], vec![c, 0.0], vec![0.0; 2]).unwrap());
    let s = WaveFunctional::Superposition(
        SuperpositionFunctional::new(vec![(Complex64::new(1.0, 0.0), g(-4.0)), (Complex64::new(1.0, 0.0), g(4.0))]).unwrap(),
    );
    let e = sample_equilibrium(&s, 20_000, 3).unwrap();
    let right = e.members.iter().filter(|m| m[0] > 0.0).count() as f64 / e.len() as f64;
    assert!((right - 0.5).abs() < 0.02, "{right}");
    assert!(!e.provenance.flagged);
}
