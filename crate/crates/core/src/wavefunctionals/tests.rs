use super::*;
use crate::theories::TheoryModel;
use std::f64::consts::PI;

fn schrodinger() -> TheoryModel {
    TheoryModel::schrodinger_field(2.0 * PI, 1.5, 0.8).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn hermite_functions_are_orthonormal() {
    // Gauss-Hermite style check by dense quadrature
    let n = 6;
    let h = 0.005;
    let mut gram = vec![vec![0.0; n + 1]; n + 1];
    let mut x = -12.0;
    while x < 12.0 {
        let t = hermite_table(x, 1.0, n);
        let wgt = (-x * x).exp() / PI.sqrt() * h;
        for i in 0..=n {
            for j in 0..=n {
                gram[i][j] += t.h[i] * t.h[j] * wgt;
            }
        }
        x += h;
    }
    for i in 0..=n {
        for j in 0..=n {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((gram[i][j] - want).abs() < 1e-9, "{i} {j} {}", gram[i][j]);
        }
    }
}

#[test]
fn vacuum_log_density_is_minus_sum_of_squares() {
    let t = schrodinger();
    let v = vacuum(&t).unwrap();
    let x: Vec<f64> = (0..t.dim()).map(|r| 0.1 * r as f64 - 0.7).collect();
    let zero = vec![0.0; t.dim()];
    let d = 2.0 * (v.evaluate(&x).unwrap().log_r - v.evaluate(&zero).unwrap().log_r);
    // unit widths: sum over real coordinates x_r^2 equals sum_k |q_k|^2
    let want: f64 = -x.iter().map(|a| a * a).sum::<f64>();
    assert!((d - want).abs() < 1e-12);
    assert!(v.phase_gradient(&x).unwrap().iter().all(|g| *g == 0.0));
}

#[test]
fn coherent_evolution_rotates_alpha() {
    let t = schrodinger();
    let b = &t.space().sectors()[0].basis;
    let i = b.index_of([1, 0, 0]).unwrap();
    let alpha = c(0.7, -0.3);
    let psi = coherent(&t, "phi", &[(i, alpha)]).unwrap();
    let dt = 1.3;
    let omega = b.k2(i) / (2.0 * 0.8);
    let evolved = evolve_quadratic(&psi, &t, dt).unwrap();
    let expect = coherent(&t, "phi", &[(i, alpha * Complex64::from_polar(1.0, -omega * dt))]).unwrap();
    let x: Vec<f64> = (0..t.dim()).map(|r| ((r * 37 % 11) as f64 - 5.0) * 0.2).collect();
    let a = evolved.log_psi(&x).unwrap();
    let e = expect.log_psi(&x).unwrap();
    assert!((a.re - e.re).abs() < 1e-10);
    let dphase = (a.im - e.im).rem_euclid(2.0 * PI);
    assert!(dphase.min(2.0 * PI - dphase) < 1e-10, "{a} {e}");
}

#[test]
fn evolution_is_a_group_action() {
    let t = TheoryModel::free_em_bohm(2.0 * PI, 1.2).unwrap();
    let psi = coherent(&t, "A", &[(3, c(0.4, 0.9)), (6, c(-0.2, 0.1))]).unwrap();
    let a = evolve_quadratic(&evolve_quadratic(&psi, &t, 0.7).unwrap(), &t, 2.9).unwrap();
    let b = evolve_quadratic(&psi, &t, 3.6).unwrap();
    let (ga, gb) = (a.as_gaussian().unwrap(), b.as_gaussian().unwrap());
    for r in 0..ga.dim() {
        assert!((ga.width[r] - gb.width[r]).norm() < 1e-10);
        assert!((ga.center[r] - gb.center[r]).abs() < 1e-10);
        assert!((ga.momentum[r] - gb.momentum[r]).abs() < 1e-10);
    }
    assert!((ga.log_prefactor - gb.log_prefactor).norm() < 1e-10);
}

#[test]
fn squeezed_gaussian_keeps_norm_through_many_periods() {
    let g = GaussianFunctional::new(vec![c(3.0, 1.0)], vec![0.4], vec![-1.1]).unwrap();
    let psi = WaveFunctional::Gaussian(g);
    for t in [0.3, 2.0, 7.5, 31.0] {
        let e = psi.evolve_with(&[1.0], &[2.0], t).unwrap();
        let n = inner_product(&e, &e).unwrap();
        assert!((n.re - 1.0).abs() < 1e-12 && n.im.abs() < 1e-12);
        // continuity of the phase: small step from t is close
        let f = psi.evolve_with(&[1.0], &[2.0], t + 1e-6).unwrap();
        let d = (f.log_psi(&[0.2]).unwrap() - e.log_psi(&[0.2]).unwrap()).im;
        assert!(d.abs() < 1e-4, "phase jump {d} at t = {t}");
    }
}

#[test]
fn one_particle_density_matches_alpha_form() {
    let t = schrodinger();
    let b = &t.space().sectors()[0].basis;
    let s1 = b.index_of([1, 0, 0]).unwrap();
    let s2 = b.index_of([0, -1, 0]).unwrap();
    let psi = [(s1, c(0.6, 0.0)), (s2, c(0.0, 0.8))];
    let f = n_particle(&t, "phi", &SymmetricTensor::one_particle(&psi).unwrap()).unwrap();
    let v = vacuum(&t).unwrap();
    let gamma = one_particle_alpha(&t, "phi", &psi).unwrap();
    let x: Vec<f64> = (0..t.dim()).map(|r| ((r * 13 % 7) as f64 - 3.0) * 0.3).collect();
    let alpha: Complex64 = gamma.iter().zip(&x).map(|(g, x)| g * x).sum();
    let lhs = 2.0 * f.evaluate(&x).unwrap().log_r;
    let rhs = (2.0 * alpha.norm_sqr()).ln() + 2.0 * v.evaluate(&x).unwrap().log_r;
    assert!((lhs - rhs).abs() < 1e-10);
    // alpha = sum_k psi_k q_{-k}
    let amps = b.unpack(&x);
    let direct: Complex64 = psi.iter().map(|(s, p)| p * amps[b.slot(b.partner(*s), 0)]).sum();
    assert!((direct - alpha).norm() < 1e-12);
    assert!(inner_product(&f, &v).unwrap().norm() < 1e-12);
    assert!((inner_product(&v, &v).unwrap() - 1.0).norm() < 1e-12);
    let sup = SuperpositionFunctional::new(vec![(c(0.6, 0.0), v.clone()), (c(0.0, 0.8), f.clone())]).unwrap();
    assert!((inner_product(&v, &WaveFunctional::Superposition(sup)).unwrap() - c(0.6, 0.0)).norm() < 1e-12);
}

#[test]
fn tensor_validation() {
    assert!(SymmetricTensor::new(0, vec![]).is_err());
    let bad = SymmetricTensor::new(2, vec![(vec![0, 1], c(0.5, 0.0)), (vec![1, 0], c(0.6, 0.0))]);
    assert!(bad.is_err());
    let missing = SymmetricTensor::new(2, vec![(vec![0, 1], c(1.0, 0.0))]);
    assert!(missing.is_err());
    let ok = SymmetricTensor::product(&[2, 0, 2]).unwrap();
    assert_eq!(ok.canonical().len(), 1);
    assert!((ok.canonical()[0].1.re - (2.0f64 / 6.0).sqrt()).abs() < 1e-15);
}

#[test]
fn product_states_are_normalized_and_factorize() {
    let t = schrodinger();
    let b = &t.space().sectors()[0].basis;
    let slots: Vec<usize> = (0..b.len()).filter(|i| !b.is_zero(*i)).take(5).collect();
    let f = n_particle(&t, "phi", &SymmetricTensor::product(&slots).unwrap()).unwrap();
    match &f {
        WaveFunctional::Excited(e) => {
            assert!(e.factors.len() >= 3);
            let n = inner_product(&f, &f).unwrap();
            assert!((n.re - 1.0).abs() < 1e-10);
        }
        _ => panic!("expected an excited functional"),
    }
    let doubled = n_particle(&t, "phi", &SymmetricTensor::product(&[slots[0], slots[0]]).unwrap()).unwrap();
    assert!((inner_product(&doubled, &doubled).unwrap().re - 1.0).abs() < 1e-10);
}

#[test]
fn superposition_lobe_is_local() {
    let t = schrodinger();
    let b = &t.space().sectors()[0].basis;
    let i = b.index_of([0, 0, 1]).unwrap();
    let a = coherent(&t, "phi", &[(i, c(4.0, 0.0))]).unwrap();
    let bb = coherent(&t, "phi", &[(i, c(-4.0, 0.0))]).unwrap();
    let s = SuperpositionFunctional::new(vec![(c(1.0, 0.0), a.clone()), (c(1.0, 0.0), bb)]).unwrap();
    let s = WaveFunctional::Superposition(s);
    let x = a.as_gaussian().unwrap().center.clone();
    let lhs = s.log_psi(&x).unwrap();
    let rhs = a.log_psi(&x).unwrap() + c(0.5f64.sqrt().ln(), 0.0);
    assert!((lhs - rhs).norm() < 1e-6);
}

#[test]
fn gradients_match_finite_differences() {
    let t = schrodinger();
    let b = &t.space().sectors()[0].basis;
    let s1 = b.index_of([1, 0, 0]).unwrap();
    let s2 = b.index_of([0, 1, 1]).unwrap();
    let states = vec![
        coherent(&t, "phi", &[(s1, c(0.5, 0.4))]).unwrap(),
        n_particle(&t, "phi", &SymmetricTensor::one_particle(&[(s1, c(0.6, 0.0)), (s2, c(0.0, 0.8))]).unwrap()).unwrap(),
        n_particle(&t, "phi", &SymmetricTensor::product(&[s1, s1, s2]).unwrap()).unwrap(),
    ];
    let x: Vec<f64> = (0..t.dim()).map(|r| ((r * 29 % 17) as f64 - 8.0) * 0.11).collect();
    let d: Vec<f64> = (0..t.dim()).map(|r| ((r * 7 % 5) as f64 - 2.0) * 0.3).collect();
    for f in states {
        let h = 1e-5;
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let (lp, lm) = (f.log_psi(&xp).unwrap(), f.log_psi(&xm).unwrap());
        let fd = (lp - lm) / (2.0 * h);
        let (_, g) = f.grad_log_psi(&x).unwrap();
        let an: Complex64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        assert!((fd - an).norm() < 1e-6 * an.norm().max(1.0), "{fd} {an}");
        // second directional derivative
        let l0 = f.log_psi(&x).unwrap();
        let psi_ratio = |l: Complex64| (l - l0).exp();
        let fd2 = (psi_ratio(lp) - 2.0 + psi_ratio(lm)) / (h * h);
        let an2 = f.second_directional(&x, &d).unwrap();
        assert!((fd2 - an2).norm() < 1e-3 * an2.norm().max(1.0), "{fd2} {an2}");
    }
}

#[test]
fn serde_round_trip() {
    let t = schrodinger();
    let f = n_particle(&t, "phi", &SymmetricTensor::product(&[1, 2]).unwrap()).unwrap();
    let s = serde_json::to_string(&f).unwrap();
    let g: WaveFunctional = serde_json::from_str(&s).unwrap();
    assert_eq!(f, g);
}
