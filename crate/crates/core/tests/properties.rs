use num_complex::Complex64;
use pilot_field::cli_io::{read_table_csv, write_table_csv, Table};
use pilot_field::ensemble_stats::{ks_critical, ks_statistic};
use pilot_field::holland_angular::{alpha_pdf, distinguishability, sample_alpha, Spin};
use pilot_field::mode_basis::{build_mode_basis, FieldKind};
use pilot_field::overlap_lab::{exponential_fit, gaussian_bhattacharyya, ScanRow};
use pilot_field::rng::rng;
use pilot_field::theories::{guidance_velocity, TheoryModel};
use pilot_field::wavefunctionals::{coherent, evolve_quadratic, vacuum, GaussianFunctional};
use proptest::prelude::*;
use std::f64::consts::PI;

fn kind() -> impl Strategy<Value = FieldKind> {
    prop_oneof![Just(FieldKind::ScalarReal), Just(FieldKind::ScalarComplex), Just(FieldKind::VectorTransverse), Just(FieldKind::VectorFull)]
}

fn gaussian(d: usize) -> impl Strategy<Value = GaussianFunctional> {
    (
        prop::collection::vec((0.2f64..3.0, -2.0f64..2.0), d),
        prop::collection::vec(-2.0f64..2.0, d),
        prop::collection::vec(-2.0f64..2.0, d),
    )
        .prop_map(|(w, c, p)| GaussianFunctional::new(w.into_iter().map(|(a, b)| Complex64::new(a, b)).collect(), c, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pack_inverts_unpack(kind in kind(), cutoff in 1.0f64..2.2, seed in any::<u64>()) {
        let b = build_mode_basis(2.0 * PI, cutoff, kind).unwrap();
        let mut r = rng(seed);
        let x: Vec<f64> = (0..b.dim()).map(|_| rand::Rng::gen_range(&mut r, -3.0..3.0)).collect();
        let amps = b.unpack(&x);
        prop_assert!(b.reality_residual(&amps) < 1e-12);
        let y = b.pack(&amps);
        for (a, c) in x.iter().zip(&y) {
            prop_assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_statistic_is_bounded(xs in prop::collection::vec(-5.0f64..5.0, 1..200)) {
        let d = ks_statistic(&xs, |x| 0.5 * (1.0 + statrs_erf(x / 2f64.sqrt())));
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn ks_critical_shrinks_with_n(n in 2usize..100_000) {
        prop_assert!(ks_critical(0.01, n + 1) < ks_critical(0.01, n));
        prop_assert!(ks_critical(0.05, n) < ks_critical(0.01, n));
    }

    #[test]
    fn bhattacharyya_is_symmetric_and_bounded(a in gaussian(3), b in gaussian(3)) {
        let ab = gaussian_bhattacharyya(&a, &b).unwrap();
        let ba = gaussian_bhattacharyya(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-14);
        prop_assert!(ab > 0.0 && ab <= 1.0 + 1e-14);
        prop_assert!((gaussian_bhattacharyya(&a, &a).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn angle_samples_stay_in_range(seed in any::<u64>()) {
        let mut r = rng(seed);
        for spin in [Spin::Up, Spin::Down] {
            for _ in 0..100 {
                let a = sample_alpha(spin, &mut r);
                prop_assert!((0.0..=PI).contains(&a));
                prop_assert!(alpha_pdf(spin, a) >= 0.0);
            }
        }
    }

    #[test]
    fn mirror_symmetry_of_angle_density(a in 0.0f64..PI) {
        prop_assert!((alpha_pdf(Spin::Up, a) - alpha_pdf(Spin::Down, PI - a)).abs() < 1e-12);
    }

    #[test]
    fn distinguishability_grows_with_occupation(n_l in 1usize..5000, f in 0.0f64..1.0) {
        let n = (f * n_l as f64) as usize;
        let a = distinguishability(n, n_l, 10.0).unwrap();
        let b = distinguishability((n + 1).min(n_l), n_l, 10.0).unwrap();
        prop_assert!(b.lhs >= a.lhs);
        prop_assert!(!a.pass || b.pass);
    }

    #[test]
    fn geometric_rows_fit_exactly(q in 0.05f64..0.99, len in 3usize..15) {
        let rows: Vec<ScanRow> = (0..len).map(|n| ScanRow { n, overlap: q.powi(n as i32), std_err: 0.0, analytic: None }).collect();
        let f = exponential_fit(&rows);
        prop_assert!((f.slope - q.ln()).abs() < 1e-10);
        prop_assert!(f.r_squared > 1.0 - 1e-9);
    }

    #[test]
    fn csv_tables_round_trip_exactly(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 3), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = Table { header: vec!["a".into(), "b".into(), "c".into()], rows };
        write_table_csv(&path, &t).unwrap();
        prop_assert_eq!(read_table_csv(&path).unwrap(), t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_evolution_composes(t1 in 0.0f64..3.0, t2 in 0.0f64..3.0, re in -1.0f64..1.0, im in -1.0f64..1.0, seed in any::<u64>()) {
        let th = TheoryModel::massive_spin1(2.0 * PI, 1.2, 0.7).unwrap();
        let b = &th.space().sector("A").unwrap().basis;
        let s = b.slot(b.index_of([1, 0, 0]).unwrap(), 2);
        let f = coherent(&th, "A", &[(s, Complex64::new(re, im))]).unwrap();
        let once = evolve_quadratic(&f, &th, t1 + t2).unwrap();
        let twice = evolve_quadratic(&evolve_quadratic(&f, &th, t1).unwrap(), &th, t2).unwrap();
        let mut r = rng(seed);
        let x: Vec<f64> = (0..th.dim()).map(|_| rand::Rng::gen_range(&mut r, -1.0..1.0)).collect();
        let (a, c) = (once.log_psi(&x).unwrap(), twice.log_psi(&x).unwrap());
        prop_assert!((a.re - c.re).abs() < 1e-9);
        let dphase = (a.im - c.im + PI).rem_euclid(2.0 * PI) - PI;
        prop_assert!(dphase.abs() < 1e-9);
    }

    #[test]
    fn vacuum_guidance_vanishes(seed in any::<u64>(), cutoff in 1.0f64..1.8) {
        for th in [TheoryModel::schrodinger_field(2.0 * PI, cutoff, 1.0).unwrap(), TheoryModel::free_em_bohm(2.0 * PI, cutoff).unwrap()] {
            let f = vacuum(&th).unwrap();
            let mut r = rng(seed);
            let x: Vec<f64> = (0..th.dim()).map(|_| rand::Rng::gen_range(&mut r, -2.0..2.0)).collect();
            prop_assert!(guidance_velocity(&th, &f, &x).unwrap().iter().all(|v| *v == 0.0));
        }
    }
}

fn statrs_erf(x: f64) -> f64 {
    statrs::function::erf::erf(x)
}
