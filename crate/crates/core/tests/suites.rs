use curvkit::models::{Model, ModelParams, MODEL_NAMES};
use curvkit::suites::{invariants_table, run_suite, Suite, SuiteConfig};
use curvkit::{Error, VerificationReport};

fn cfg(model: &str, quick: bool) -> SuiteConfig {
    SuiteConfig {
        model: model.into(),
        quick,
        ..SuiteConfig::default()
    }
}

fn failures(recs: &[VerificationReport]) -> Vec<&str> {
    recs.iter().filter(|r| !r.pass).map(|r| r.check_id.as_str()).collect()
}

#[test]
fn quick_suites_pass_on_catalog_models() {
    for model in MODEL_NAMES {
        let recs = run_suite(Suite::All, &cfg(model, true)).unwrap();
        assert!(!recs.is_empty());
        let bad = failures(&recs);
        if model == "lovelock" {
            // the slice's S^(2k) varies with r once m != 0 and k >= 2
            assert_eq!(bad, ["curvature.lovelock-constancy", "curvature.lovelock-mass-independence"]);
        } else {
            assert!(bad.is_empty(), "{model}: {bad:?}");
        }
        for r in &recs {
            assert_eq!(r.seed, Some(42));
            assert!(!r.suite.is_empty() && !r.inputs_digest.is_empty());
        }
    }
}

#[test]
fn algebra_suite_in_dimension_seven() {
    let mut c = cfg("sphere", true);
    c.params.n = 7;
    let recs = run_suite(Suite::Algebra, &c).unwrap();
    let ids: Vec<_> = recs.iter().map(|r| r.check_id.as_str()).collect();
    assert_eq!(ids, ["algebra.kulkarni", "algebra.commutation", "algebra.adjointness"]);
    assert!(failures(&recs).is_empty());
}

#[test]
fn unknown_names_are_rejected() {
    assert!(matches!("everything".parse::<Suite>(), Err(Error::Parameter(_))));
    assert!(matches!(Model::named("klein-bottle", &ModelParams::default()), Err(Error::Parameter(_))));
    assert!(run_suite(Suite::Curvature, &cfg("klein-bottle", true)).is_err());
    for name in ["algebra", "curvature", "linearization", "functional", "all"] {
        assert_eq!(name.parse::<Suite>().unwrap().to_string(), name);
    }
}

#[test]
fn functional_suite_needs_periodic_model() {
    assert!(matches!(run_suite(Suite::Functional, &cfg("sphere", true)), Err(Error::Parameter(_))));
    let recs = run_suite(Suite::Functional, &cfg("flat", true)).unwrap();
    assert!(failures(&recs).is_empty());
}

#[test]
fn tolerance_scale_multiplies_every_tolerance() {
    let base = run_suite(Suite::Curvature, &cfg("sphere", true)).unwrap();
    let mut c = cfg("sphere", true);
    c.tol_scale = 1e-30;
    let tight = run_suite(Suite::Curvature, &c).unwrap();
    assert_eq!(base.len(), tight.len());
    for (a, b) in base.iter().zip(&tight) {
        assert_eq!(a.residual, b.residual);
        assert_eq!(b.tolerance, a.tolerance * 1e-30);
        assert_eq!(b.pass, b.residual <= b.tolerance);
    }
    assert!(tight.iter().any(|r| !r.pass));
}

#[test]
fn runs_are_reproducible() {
    let strip = |mut v: Vec<VerificationReport>| {
        for r in &mut v {
            r.duration_ms = 0.0;
        }
        serde_json::to_string(&v).unwrap()
    };
    let c = cfg("perturbed-torus", true);
    let a = strip(run_suite(Suite::Linearization, &c).unwrap());
    let b = strip(run_suite(Suite::Linearization, &c).unwrap());
    assert_eq!(a, b);
}

#[test]
fn invariants_table_on_space_forms() {
    for (model, kappa) in [("sphere", 20.0), ("hyperbolic", -20.0)] {
        let (table, recs) = invariants_table(&cfg(model, false)).unwrap();
        assert_eq!(table.len(), curvkit::models::SAMPLE_COUNT);
        for row in &table {
            assert!((row.kappa - kappa).abs() < 1e-9);
            assert!((row.s2k - 30.0).abs() < 1e-9);
            assert!(row.rigidity.as_ref().unwrap().satisfied);
        }
        assert!(failures(&recs).is_empty(), "{model}: {:?}", failures(&recs));
    }
    let mut c = cfg("lovelock", false);
    c.params.k = 2;
    let (_, recs) = invariants_table(&c).unwrap();
    assert_eq!(failures(&recs), ["invariants.lovelock-constancy"]);
}
