use std::f64::consts::PI;
use std::sync::Arc;

use curvkit::chart::{rcc_action, SumField, SymField, DEFAULT_FD_STEPS};
use curvkit::invariants::{invariant_set, lovelock_kronecker, schouten_weyl, space_form_mu_k, thorpe_check};
use curvkit::linearize::{fh_operator, LinearizationPoint};
use curvkit::models::{perturbed_torus, space_form, ChartStyle, TrigTensorField};
use curvkit::sampling::{random_symmetric, rng_from_seed};
use curvkit::suites::{run_suite, Suite, SuiteConfig};
use curvkit::{DoubleForm, MetricAtPoint};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn torus_point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..2.0 * PI, n)
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let s = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn curvature_symmetries(seed in any::<u64>(), amp in 0.01f64..0.3, x in torus_point(5)) {
        let chart = perturbed_torus(5, seed, amp).unwrap();
        let b = chart.geometry(&x, 2).unwrap().curvature().unwrap();
        prop_assert!(b.bianchi_residual() <= 1e-9);
        prop_assert!((&b.r - &b.r.transpose()).coord_norm() <= 1e-10 * b.r.coord_norm().max(1.0));
        let fd = chart.with_fd_jets(DEFAULT_FD_STEPS);
        let bf = fd.geometry(&x, 2).unwrap().curvature().unwrap();
        prop_assert!(bf.bianchi_residual() <= 1e-5);
    }

    #[test]
    fn rcc_on_space_forms(seed in any::<u64>(), mu in prop_oneof![Just(1.0), Just(-1.0), Just(0.5), Just(-2.0)], t in 0.0f64..1.0) {
        let chart = space_form(5, mu, ChartStyle::for_curvature(mu)).unwrap();
        let x: Vec<f64> = (0..5).map(|i| 0.2 * t * (i as f64 - 2.0) / mu.abs().sqrt()).collect();
        let geo = chart.geometry(&x, 2).unwrap();
        let b = geo.curvature().unwrap();
        let m = &geo.metric;
        let h = random_symmetric(5, &mut rng_from_seed(seed));
        let tr = (m.g_inv() * &h).trace();
        let want = (m.g() * tr - &h) * mu;
        let got = rcc_action(&b, m, &h);
        prop_assert!(rel(got.as_slice(), want.as_slice()) <= 1e-8);
    }

    #[test]
    fn thorpe_on_space_forms(mu in prop_oneof![0.3f64..2.0, -2.0f64..-0.3], n in 5usize..=7) {
        let chart = space_form(n, mu, ChartStyle::for_curvature(mu)).unwrap();
        let x = vec![0.1 / mu.abs().sqrt(); n];
        let geo = chart.geometry(&x, 2).unwrap();
        let b = geo.curvature().unwrap();
        for k in 1..=n / 2 {
            if 2 * k - 2 > n || k < 2 {
                continue;
            }
            let (mu_k, res) = thorpe_check(&b.r, &geo.metric, k).unwrap();
            prop_assert!(res <= 1e-8);
            prop_assert!((mu_k - space_form_mu_k(mu, k)).abs() <= 1e-8 * mu_k.abs().max(1.0));
        }
    }

    #[test]
    fn invariant_identities_on_random_metrics(seed in any::<u64>(), n in 5usize..=7, x in torus_point(7)) {
        let chart = perturbed_torus(n, seed, 0.3).unwrap();
        let geo = chart.geometry(&x[..n], 2).unwrap();
        let b = geo.curvature().unwrap();
        let m = &geo.metric;
        for k in 1..=n / 2 {
            let set = invariant_set(&b, m, k).unwrap();
            let scale = set.r2k.coord_norm().max(1e-300);
            prop_assert!(set.trace_residual <= 1e-10 * scale.max(1.0));
            if 2 * k < n {
                prop_assert!(lovelock_kronecker(&b.r, m, k).unwrap().route_misfit <= 1e-8);
            }
        }
        let cd = schouten_weyl(&b, m).unwrap();
        prop_assert!(cd.weyl.contract(m).unwrap().coord_norm() <= 1e-10 * b.r.coord_norm().max(1.0));
    }

    #[test]
    fn closed_forms_are_linear_in_h(s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0, x in torus_point(5)) {
        let chart = perturbed_torus(5, 9, 0.2).unwrap();
        let h1: Arc<dyn SymField> = Arc::new(TrigTensorField::random_periodic(5, s1, 0.5, 2));
        let h2: Arc<dyn SymField> = Arc::new(TrigTensorField::random_periodic(5, s2, 0.5, 2));
        let sum = SumField::new(h1.clone(), h2.clone(), a);
        let p1 = LinearizationPoint::new(&chart, h1.as_ref(), &x).unwrap();
        let p2 = LinearizationPoint::new(&chart, h2.as_ref(), &x).unwrap();
        let ps = LinearizationPoint::new(&chart, &sum, &x).unwrap();
        let r = &p1.riemann().unwrap() + &p2.riemann().unwrap().scaled(a);
        prop_assert!(rel(ps.riemann().unwrap().as_slice(), r.as_slice()) <= 1e-10);
        let ric = p1.ricci() + p2.ricci() * a;
        prop_assert!(rel(ps.ricci().as_slice(), ric.as_slice()) <= 1e-10);
        let sc = p1.scalar().unwrap() + a * p2.scalar().unwrap();
        prop_assert!(rel(&[ps.scalar().unwrap()], &[sc]) <= 1e-10 || (ps.scalar().unwrap() - sc).abs() <= 1e-12);
    }

    /// `F_h` does not depend on the eigenbasis chosen: it is additive in `h`
    /// (also for degenerate `h`) and commutes with changes of coordinates.
    #[test]
    fn fh_is_basis_independent(seed in any::<u64>(), r in 0usize..=3, s in 0usize..=3, c in -2.0f64..2.0) {
        let n = 4;
        let mut rng = rng_from_seed(seed);
        let m = curvkit::sampling::random_metric(n, &mut rng);
        let omega = DoubleForm::random(n, r, s, &mut rng).unwrap();
        let v = DMatrix::from_fn(n, 1, |i, _| (i as f64 + 1.0) * 0.3);
        // eigenvalue c with multiplicity n−1
        let degenerate = m.g() * c + m.g() * &v * v.transpose() * m.g();
        let other = random_symmetric(n, &mut rng);
        let f = |h: &DMatrix<f64>, w: &DoubleForm, m: &MetricAtPoint| fh_operator(h, w, m).unwrap();
        let lhs = f(&(&degenerate + &other), &omega, &m);
        let rhs = &f(&degenerate, &omega, &m) + &f(&other, &omega, &m);
        prop_assert!(rel(lhs.as_slice(), rhs.as_slice()) <= 1e-9);
        let id = f(m.g(), &omega, &m);
        prop_assert!(rel(id.as_slice(), omega.scaled((r + s) as f64).as_slice()) <= 1e-10);
        let a = random_symmetric(n, &mut rng) * 0.3 + DMatrix::identity(n, n);
        let m2 = MetricAtPoint::new(a.transpose() * m.g() * &a).unwrap();
        for h in [&degenerate, &other] {
            let moved = f(&(a.transpose() * h * &a), &omega.change_basis(&a), &m2);
            let back = f(h, &omega, &m).change_basis(&a);
            prop_assert!(rel(moved.as_slice(), back.as_slice()) <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    /// Contraction identities, ċ identities, linearity and FD agreement hold on
    /// random non-Einstein metrics, not only on the class.
    #[test]
    fn linearization_suite_on_random_tori(seed in 0u64..1_000_000) {
        let mut cfg = SuiteConfig { model: "perturbed-torus".into(), quick: true, ..SuiteConfig::default() };
        cfg.params.seed = seed;
        let recs = run_suite(Suite::Linearization, &cfg).unwrap();
        let bad: Vec<_> = recs.iter().filter(|r| !r.pass).map(|r| r.line()).collect();
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }
}
