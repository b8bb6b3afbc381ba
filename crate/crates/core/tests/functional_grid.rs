use std::sync::Arc;

use curvkit::chart::SymField;
use curvkit::functional::{
    constancy_consequence, divergence_free_check, divergence_tolerance, gradient_sides, hel_functional, PeriodicGrid,
};
use curvkit::invariants::invariant_set;
use curvkit::models::{flat_torus, perturbed_torus, resonant_direction, Model, ModelParams};

#[test]
fn gradient_residual_shrinks_under_refinement() {
    let c = perturbed_torus(5, 42, 0.05).unwrap();
    let h: Arc<dyn SymField> = Arc::new(resonant_direction(5, 42, 1.0));
    let mut residuals = Vec::new();
    for res in 5..=8 {
        let g = PeriodicGrid::new(&c, res).unwrap();
        let s = gradient_sides(&g, &c, 2, &h).unwrap();
        residuals.push((s.derivative - s.pairing).abs() / s.derivative.abs().max(s.pairing.abs()));
    }
    for w in residuals.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{residuals:?}");
    }
    assert!(residuals[3] <= 1e-2, "{residuals:?}");
}

#[test]
fn k1_divergence_is_the_einstein_regression() {
    let model = Model::named("perturbed-torus", &ModelParams::default()).unwrap();
    let c = &model.chart;
    let g = PeriodicGrid::new(c, 4).unwrap();
    let k1 = divergence_free_check(&g, c, 1).unwrap();
    let k2 = divergence_free_check(&g, c, 2).unwrap();
    assert_eq!(k1.tolerance, divergence_tolerance(c));
    assert_eq!(k1.tolerance, k2.tolerance);
    assert!(k1.pass && k2.pass);
    // J^(2) is a multiple of Ric − κ/2·g
    for x in &model.samples {
        let geo = c.geometry(x, 2).unwrap();
        let b = geo.curvature().unwrap();
        let j = invariant_set(&b, &geo.metric, 1).unwrap().j2k.to_matrix();
        let e = b.ricci_matrix() - geo.metric.g() * (b.kappa / 2.0);
        let ratio = j.dot(&e) / e.dot(&e);
        assert!((&j - &e * ratio).norm() <= 1e-10 * j.norm(), "ratio {ratio}");
    }
}

#[test]
fn constancy_consequence_on_perturbed_torus() {
    let model = Model::named("perturbed-torus", &ModelParams::default()).unwrap();
    for k in [1, 2] {
        assert!(constancy_consequence(&model.chart, &model.samples, k).unwrap() <= 1e-4);
    }
}

#[test]
fn flat_torus_functional_vanishes() {
    let c = flat_torus(5);
    let g = PeriodicGrid::new(&c, 4).unwrap();
    assert_eq!(hel_functional(&g, &c, 2).unwrap(), 0.0);
    assert!(divergence_free_check(&g, &c, 2).unwrap().pass);
}
