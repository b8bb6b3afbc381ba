//! Named verification suites over the model catalog, and the per-point
//! invariant tables behind the `invariants` command.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chart::{compose, s_operators, FieldAtPoint, MetricChart, SumField, SymField, DEFAULT_FD_STEPS};
use crate::dform::{commutation_sides, DoubleForm};
use crate::error::{Error, Result};
use crate::functional::{
    constancy_consequence, divergence_free_check, gradient_identity_check, volume_derivative_check, PeriodicGrid,
};
use crate::invariants::{
    einstein_residuals, gauss_bonnet_2k, gb_sigma_identity, hypersurface_einstein, hypersurface_lovelock_check,
    invariant_set, lovelock_kronecker, newton_tensor, relative_spread, ricci_2k_thorpe_form, rigidity_certificate,
    schouten_weyl, space_form_gauss_bonnet, space_form_mu_k, structure_constants, thorpe_check,
};
use crate::linearize::{
    conformal_operator, contraction_derivative, d2_at, fd_derivative, fd_linearize, fh_operator, Invariant,
    LinearizationPoint, LinearizationRequest, DEFAULT_STEPS,
};
use crate::models::{
    ellipsoid_shape, flat_torus, lovelock_slice, resonant_direction, scalar_times_metric, tt_field, Model,
    ModelParams, TrigScalar, TrigTensorField,
};
use crate::report::{residuals, Measure, VerificationReport};
use crate::sampling::{random_metric, random_symmetric, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Algebra,
    Curvature,
    Linearization,
    Functional,
    All,
}

pub const SUITE_NAMES: [&str; 5] = ["algebra", "curvature", "linearization", "functional", "all"];

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algebra" => Ok(Suite::Algebra),
            "curvature" => Ok(Suite::Curvature),
            "linearization" => Ok(Suite::Linearization),
            "functional" => Ok(Suite::Functional),
            "all" => Ok(Suite::All),
            other => Err(Error::Parameter(format!(
                "unknown suite '{other}' (known: {})",
                SUITE_NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = match self {
            Suite::Algebra => 0,
            Suite::Curvature => 1,
            Suite::Linearization => 2,
            Suite::Functional => 3,
            Suite::All => 4,
        };
        f.write_str(SUITE_NAMES[i])
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub model: String,
    pub params: ModelParams,
    /// Points per axis of functional grids.
    pub res: usize,
    pub quick: bool,
    pub tol_scale: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            model: "sphere".into(),
            params: ModelParams::default(),
            res: 8,
            quick: false,
            tol_scale: 1.0,
        }
    }
}

impl SuiteConfig {
    pub fn seed(&self) -> u64 {
        self.params.seed
    }

    fn model(&self) -> Result<Model> {
        Model::named(&self.model, &self.params)
    }

    fn point_count(&self) -> usize {
        if self.quick {
            1
        } else {
            2
        }
    }
}

struct Collector<'a> {
    suite: &'a str,
    cfg: &'a SuiteConfig,
    records: Vec<VerificationReport>,
}

impl<'a> Collector<'a> {
    fn new(suite: &'a str, cfg: &'a SuiteConfig) -> Self {
        Collector {
            suite,
            cfg,
            records: Vec::new(),
        }
    }

    fn push(&mut self, r: VerificationReport, inputs: &str, start: Instant) {
        let mut r = r.with_suite(self.suite).with_seed(self.cfg.seed()).timed(start);
        if r.inputs_digest.is_empty() {
            r = r.with_inputs(inputs);
        }
        r.scale_tolerance(self.cfg.tol_scale);
        self.records.push(r);
    }
}

/// Keeps the record with the largest residual, relabelled.
fn worst_of(id: &str, anchor: &str, reports: Vec<VerificationReport>, tol: f64) -> Option<VerificationReport> {
    let count = reports.len();
    let mut worst = reports.into_iter().max_by(|a, b| a.residual.total_cmp(&b.residual))?;
    worst.check_id = id.to_string();
    worst.anchor = anchor.to_string();
    worst.tolerance = tol;
    worst.pass = worst.residual <= tol;
    worst.note = Some(format!("worst of {count} cases"));
    Some(worst)
}

fn rel_compare(id: &str, anchor: &str, lhs: &[f64], rhs: &[f64], tol: f64) -> VerificationReport {
    VerificationReport::compare(id, anchor, lhs, rhs, tol, Measure::Rel)
}

/// Relative residual measured against an external scale (for sides that may
/// both vanish).
fn scaled_compare(id: &str, anchor: &str, lhs: &[f64], rhs: &[f64], scale: f64, tol: f64) -> VerificationReport {
    let (abs, _) = residuals(lhs, rhs);
    let rel = if scale > 0.0 { abs / scale } else { abs };
    VerificationReport::from_residuals(id, anchor, lhs, rhs, abs, rel, tol, Measure::Rel)
}

fn describe_point(chart: &MetricChart, x: &[f64]) -> String {
    format!("{} @ {:?}", chart.describe(), x)
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    match suite {
        Suite::Algebra => algebra_suite(cfg),
        Suite::Curvature => curvature_suite(cfg),
        Suite::Linearization => linearization_suite(cfg),
        Suite::Functional => functional_suite(cfg),
        Suite::All => {
            let mut out = algebra_suite(cfg)?;
            out.extend(curvature_suite(cfg)?);
            out.extend(linearization_suite(cfg)?);
            let mut fcfg = cfg.clone();
            if !cfg.model().map(|m| m.periodic).unwrap_or(false) {
                fcfg.model = "perturbed-torus".into();
            }
            out.extend(functional_suite(&fcfg)?);
            Ok(out)
        }
    }
}

/// Largest bidegree power and contraction order exercised by the algebra suite.
pub const ALGEBRA_MAX_LM: usize = 4;

/// Commutation rule for every bidegree of dimension `n` and every `l, m ≤ 4`
/// (one random form and metric per bidegree and repetition).
pub fn commutation_cases(n: usize, seed: u64, reps: usize) -> Result<(Vec<VerificationReport>, Vec<VerificationReport>)> {
    let mut rng = rng_from_seed(seed);
    let mut kulkarni = Vec::new();
    let mut general = Vec::new();
    for r in 0..=n {
        for s in 0..=n {
            for _ in 0..reps {
                let m = random_metric(n, &mut rng);
                let eta = DoubleForm::random(n, r, s, &mut rng)?;
                for l in 0..=ALGEBRA_MAX_LM {
                    for p in 0..=ALGEBRA_MAX_LM {
                        let (lhs, rhs) = match commutation_sides(&eta, l, p, &m) {
                            Ok(sides) => sides,
                            Err(Error::DegreeOverflow { .. }) | Err(Error::DegreeUnderflow { .. }) => continue,
                            Err(e) => return Err(e),
                        };
                        let rep = rel_compare(
                            &format!("commutation n={n} ({r},{s}) l={l} m={p}"),
                            "commutation",
                            lhs.as_slice(),
                            rhs.as_slice(),
                            1e-10,
                        );
                        if l == 1 && p == 1 {
                            kulkarni.push(rep.clone());
                        }
                        general.push(rep);
                    }
                }
            }
        }
    }
    Ok((kulkarni, general))
}

pub fn algebra_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut c = Collector::new("algebra", cfg);
    let n = cfg.params.n;
    let seed = cfg.seed();
    let start = Instant::now();
    let (kul, gen) = commutation_cases(n, seed, if cfg.quick { 1 } else { 2 })?;
    let inputs = format!("random forms n={n} seed={seed}");
    if let Some(r) = worst_of("algebra.kulkarni", "kulkarni", kul, 1e-10) {
        c.push(r, &inputs, start);
    }
    if let Some(r) = worst_of("algebra.commutation", "commutation", gen, 1e-10) {
        c.push(r, &inputs, start);
    }
    // ⟨g·ω, θ⟩ = ⟨ω, c θ⟩
    let start = Instant::now();
    let mut rng = rng_from_seed(seed ^ 0xad1);
    let mut adj = Vec::new();
    for r in 0..n {
        for s in 0..n {
            let m = random_metric(n, &mut rng);
            let w = DoubleForm::random(n, r, s, &mut rng)?;
            let t = DoubleForm::random(n, r + 1, s + 1, &mut rng)?;
            let lhs = w.metric_multiply(&m)?.inner(&t, &m)?;
            let rhs = w.inner(&t.contract(&m)?, &m)?;
            adj.push(rel_compare("adjointness", "contraction adjoint", &[lhs], &[rhs], 1e-10));
        }
    }
    if let Some(r) = worst_of("algebra.adjointness", "contraction is adjoint to metric multiplication", adj, 1e-10) {
        c.push(r, &inputs, start);
    }
    Ok(c.records)
}

fn in_class(bundle: &crate::chart::CurvatureBundle, m: &crate::dform::MetricAtPoint, k: usize) -> Option<f64> {
    let n = m.dim();
    if k < 2 || 2 * k >= n {
        return None;
    }
    let (mu_k, thorpe) = thorpe_check(&bundle.r, m, k).ok()?;
    let set = invariant_set(bundle, m, k).ok()?;
    let er = einstein_residuals(&set, bundle, m).ok()?;
    (thorpe <= 1e-6 && er.einstein <= 1e-6 && mu_k.abs() > 1e-12).then_some(mu_k)
}

pub fn curvature_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut c = Collector::new("curvature", cfg);
    let model = cfg.model()?;
    let chart = &model.chart;
    let n = chart.dim();
    let k = cfg.params.k;
    let samples: Vec<Vec<f64>> = model.samples.iter().take(if cfg.quick { 2 } else { model.samples.len() }).cloned().collect();
    let mut s_values = Vec::new();
    for x in &samples {
        let inputs = describe_point(chart, x);
        let start = Instant::now();
        let order = chart.max_order().min(3);
        let geo = chart.geometry(x, order)?;
        let b = geo.curvature()?;
        let m = &geo.metric;
        c.push(
            VerificationReport::bound("curvature.first-bianchi", "algebraic curvature symmetries", b.bianchi_residual(), 1e-10),
            &inputs,
            start,
        );
        if let Some(mu) = model.mu {
            let start = Instant::now();
            let g2 = m.as_form().power(2)?;
            let dev = (&b.r - &g2.scaled(mu / 2.0)).norm(m) / g2.norm(m);
            c.push(VerificationReport::bound("curvature.space-form", "const", dev, 1e-8), &inputs, start);
            let expect = (n * (n - 1)) as f64 * mu;
            c.push(
                VerificationReport::from_residuals(
                    "curvature.scalar",
                    "space form scalar curvature",
                    &[b.kappa],
                    &[expect],
                    (b.kappa - expect).abs(),
                    (b.kappa - expect).abs(),
                    1e-8,
                    Measure::Abs,
                ),
                &inputs,
                start,
            );
            if k >= 2 && 2 * k - 2 <= n {
                let (mu_k, _) = thorpe_check(&b.r, m, k)?;
                let want = space_form_mu_k(mu, k);
                c.push(
                    VerificationReport::from_residuals(
                        "curvature.thorpe-mu",
                        "thorpe",
                        &[mu_k],
                        &[want],
                        (mu_k - want).abs(),
                        (mu_k - want).abs(),
                        1e-8,
                        Measure::Abs,
                    ),
                    &inputs,
                    start,
                );
            }
        }
        if 2 * k <= n && k >= 1 {
            let start = Instant::now();
            let set = invariant_set(&b, m, k)?;
            s_values.push(set.s2k);
            c.push(
                VerificationReport::bound("curvature.trace-of-r2k", "def", set.trace_residual, 1e-9 * set.s2k.abs().max(1.0)),
                &inputs,
                start,
            );
            if let Some(mu_k) = in_class(&b, m, k) {
                let start = Instant::now();
                let thorpe_form = ricci_2k_thorpe_form(&b, m, k, mu_k)?;
                c.push(rel_compare("curvature.2k-ricci", "2kricci", set.r2k.as_slice(), thorpe_form.as_slice(), 1e-6), &inputs, start);
                let nf = n as f64;
                let s_formula = crate::combinat::factorial(n - 2) / (2.0 * crate::combinat::factorial(n - 2 * k)) * mu_k * b.kappa;
                c.push(rel_compare("curvature.2k-scalar", "2k-scalar curv", &[set.s2k], &[s_formula], 1e-6), &inputs, start);
                let sc = structure_constants(n, k)?;
                let lambda = k as f64 * (nf - 2.0) / nf * sc.c_nk * mu_k * b.kappa;
                c.push(rel_compare("curvature.2k-einstein-constant", "boler", &[set.lambda_est], &[lambda], 1e-6), &inputs, start);
                let start = Instant::now();
                let cert = rigidity_certificate(&b, m, k)?;
                c.push(
                    VerificationReport::bound(
                        "curvature.rigidity-flag",
                        "pinching",
                        if cert.satisfied { 0.0 } else { 1.0 },
                        0.5,
                    )
                    .with_note(format!(
                        "pointwise certificate: Rcc extremes [{:.6}, {:.6}], bounds lower {:.6} upper {:.6}",
                        cert.min_eigenvalue, cert.max_eigenvalue, cert.lower_bound, cert.upper_bound
                    )),
                    &inputs,
                    start,
                );
            }
            if 2 * k < n {
                let start = Instant::now();
                let kl = lovelock_kronecker(&b.r, m, k)?;
                c.push(
                    VerificationReport::bound("curvature.kronecker-route", "local", kl.route_misfit, 1e-8)
                        .with_note(format!("d_nk = {:.12}", kl.d_nk)),
                    &inputs,
                    start,
                );
                let start = Instant::now();
                let mut r = gb_sigma_identity(&b, m, k)?;
                r.check_id = format!("curvature.{}", r.check_id);
                c.push(r, &inputs, start);
                let cd = schouten_weyl(&b, m)?;
                c.push(VerificationReport::observation("curvature.weyl-norm", "schout2", cd.weyl.norm(m)), &inputs, start);
            }
            if b.nabla_r.is_some() {
                let start = Instant::now();
                let div = crate::functional::lovelock_divergence_at(&b, m, k)?;
                c.push(VerificationReport::bound("curvature.lovelock-divergence", "bianchigerlove", div, 1e-6), &inputs, start);
            }
        }
    }
    if model.name == "lovelock" && s_values.len() > 1 {
        let start = Instant::now();
        let inputs = chart.describe();
        c.push(
            VerificationReport::bound("curvature.lovelock-constancy", "loveexamples", relative_spread(&s_values), 1e-6)
                .with_note(format!("S^(2k) along the radial samples: {s_values:?}")),
            &inputs,
            start,
        );
        let x = &samples[0];
        let mut by_mass = Vec::new();
        for mass in [0.0, 0.05, 0.1] {
            let ch = lovelock_slice(n, k, cfg.params.eps, mass)?;
            let geo = ch.geometry(x, 2)?;
            by_mass.push(gauss_bonnet_2k(&geo.curvature()?.r, &geo.metric, k)?);
        }
        c.push(
            VerificationReport::bound("curvature.lovelock-mass-independence", "loveexamples", relative_spread(&by_mass), 1e-5)
                .with_note(format!("S^(2k) for m = 0, 0.05, 0.1: {by_mass:?}")),
            &inputs,
            start,
        );
    }
    // Hypersurfaces: P_2 = −E and J^(2k) ∝ P_2k on ellipsoids.
    let start = Instant::now();
    let mut rng = rng_from_seed(cfg.seed() ^ 0x5ea9e);
    let mut p2 = Vec::new();
    for _ in 0..10 {
        let a = random_symmetric(n, &mut rng);
        let e = hypersurface_einstein(&a)?;
        p2.push(rel_compare("p2", "hyper", newton_tensor(&a, 2).as_slice(), (-e).as_slice(), 1e-10));
    }
    if let Some(r) = worst_of("curvature.newton-p2-einstein", "hyper", p2, 1e-10) {
        c.push(r, &format!("random shape operators n={n}"), start);
    }
    if 2 * k < n {
        let start = Instant::now();
        let axes: Vec<f64> = (0..=n).map(|i| 1.0 + 0.3 * i as f64).collect();
        let shapes = ellipsoid_shape(n, &axes)?.samples(if cfg.quick { 4 } else { 10 }, cfg.seed());
        let (mut r, _) = hypersurface_lovelock_check(&shapes, k)?;
        r.check_id = format!("curvature.{}", r.check_id);
        c.push(r, &format!("ellipsoid axes {axes:?}"), start);
    }
    Ok(c.records)
}

fn fd_request(chart: &MetricChart, h: &Arc<dyn SymField>, x: &[f64], inv: Invariant) -> Result<crate::linearize::FdResult> {
    fd_linearize(&LinearizationRequest {
        chart: chart.clone(),
        h: h.clone(),
        point: x.to_vec(),
        invariant: inv,
        steps: DEFAULT_STEPS.to_vec(),
    })
}

fn order_record(orders: &[Option<f64>]) -> VerificationReport {
    let seen: Vec<f64> = orders.iter().flatten().copied().collect();
    let mut dev = seen.iter().map(|o| (1.8 - o).max(o - 2.5).max(0.0)).fold(0.0, f64::max);
    if seen.is_empty() {
        dev = f64::INFINITY;
    }
    VerificationReport::bound("linearization.fd-order", "lineari", dev, 0.0).with_note(format!(
        "observed orders {seen:?} ({} at roundoff level)",
        orders.len() - seen.len()
    ))
}

/// Directions used by the linearization suite: a generic one and, on space
/// forms, a transverse trace-free one.
pub fn suite_directions(model: &Model, seed: u64) -> (Arc<dyn SymField>, Option<Arc<dyn SymField>>) {
    let n = model.chart.dim();
    let generic: Arc<dyn SymField> = if model.periodic {
        Arc::new(TrigTensorField::random_periodic(n, seed, 0.5, 2))
    } else {
        Arc::new(TrigTensorField::random_smooth(n, seed, 0.5, 2, 1.0))
    };
    let tt = match model.mu {
        Some(mu) if model.name != "flat-torus" => Some(tt_field(n, mu, seed, 2)),
        _ => None,
    };
    (generic, tt)
}

pub fn linearization_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut c = Collector::new("linearization", cfg);
    let model = cfg.model()?;
    let chart = &model.chart;
    let n = chart.dim();
    let k = cfg.params.k;
    let seed = cfg.seed();
    let (h, tt) = suite_directions(&model, seed);
    let h2: Arc<dyn SymField> = Arc::new(TrigTensorField::random_smooth(n, seed + 1, 0.5, 2, 1.0));
    for x in model.samples.iter().take(cfg.point_count()) {
        let inputs = format!("{} | {}", describe_point(chart, x), h.describe());
        let p = LinearizationPoint::new(chart, h.as_ref(), x)?;
        let m = p.metric();
        let mut orders = Vec::new();
        let closed_r = p.riemann()?;
        for (id, anchor, inv, closed) in [
            ("linearization.riemann-fd", "curvlin", Invariant::Riemann, closed_r.as_slice().to_vec()),
            ("linearization.ricci-fd", "ricciline", Invariant::Ricci, p.ricci().as_slice().to_vec()),
            ("linearization.scalar-fd", "curvscarvar", Invariant::Scalar, vec![p.scalar()?]),
        ] {
            let start = Instant::now();
            let fd = fd_request(chart, &h, x, inv)?;
            c.push(rel_compare(id, anchor, &closed, &fd.richardson, 1e-4), &inputs, start);
        }
        // convergence order needs a direction comparable to g, else the
        // truncation term drowns in cancellation error
        let start = Instant::now();
        let amplitude = 0.5 * m.g().norm();
        let strong: Arc<dyn SymField> = if model.periodic {
            Arc::new(TrigTensorField::random_periodic(n, seed + 2, amplitude, 2))
        } else {
            Arc::new(TrigTensorField::random_smooth(n, seed + 2, amplitude, 2, 1.0))
        };
        for inv in [Invariant::Riemann, Invariant::Ricci, Invariant::Scalar] {
            match fd_request(chart, &strong, x, inv) {
                Ok(fd) => orders.push(fd.order),
                Err(Error::NotPositiveDefinite { .. }) => orders.push(None),
                Err(e) => return Err(e),
            }
        }
        c.push(order_record(&orders), &format!("{} | {}", describe_point(chart, x), strong.describe()), start);

        // contraction identities, closed form against closed form
        let start = Instant::now();
        let d2 = d2_at(&p.deriv);
        let fr = fh_operator(p.h(), &p.bundle.r, m)?;
        let ric_h = p.bundle.ric.inner(&DoubleForm::from_bilinear(p.h()), m)?;
        let hs = p.h().norm() * (1.0 + p.bundle.r.coord_norm());
        let item1 = d2.contract(m)?.to_matrix();
        c.push(scaled_compare("linearization.mainlema-1", "mainlema", item1.as_slice(), p.contracted_d2_formula().as_slice(), item1.norm().max(hs), 1e-6), &inputs, start);
        let item2 = d2.contract_n(2, m)?.scalar_value();
        let rhs2 = -4.0 * p.laplacian_trace() - 4.0 * p.delta_delta();
        c.push(scaled_compare("linearization.mainlema-2", "mainlema", &[item2], &[rhs2], item2.abs().max(hs), 1e-6), &inputs, start);
        let item3 = fr.contract(m)?.to_matrix();
        let rhs3 = p.ricci_compose() + p.rcc() * 2.0;
        c.push(scaled_compare("linearization.mainlema-3", "mainlema", item3.as_slice(), rhs3.as_slice(), item3.norm().max(hs), 1e-6), &inputs, start);
        let item4 = fr.contract_n(2, m)?.scalar_value();
        c.push(scaled_compare("linearization.mainlema-4", "mainlema", &[item4], &[4.0 * ric_h], item4.abs().max(hs), 1e-6), &inputs, start);
        let qq = closed_r.contract(m)?.to_matrix();
        c.push(scaled_compare("linearization.maincorollary-qq", "maincorollary", qq.as_slice(), p.contracted_riemann_formula().as_slice(), qq.norm().max(hs), 1e-6), &inputs, start);
        let rr = closed_r.contract_n(2, m)?.scalar_value();
        c.push(scaled_compare("linearization.maincorollary-rr", "maincorollary", &[rr], &[p.double_contracted_riemann_formula()?], rr.abs().max(hs), 1e-6), &inputs, start);
        let g2 = m.as_form().power(2)?.scaled(0.5);
        let cg = contraction_derivative(&g2, p.h(), m)?.to_matrix();
        let want = p.h() - m.g() * p.trace_h();
        c.push(scaled_compare("linearization.dotcgh-metric", "cgh", cg.as_slice(), want.as_slice(), hs, 1e-8), &inputs, start);
        let cr = contraction_derivative(&p.bundle.r, p.h(), m)?.to_matrix();
        c.push(scaled_compare("linearization.dotcgh-curvature", "dotcgh", cr.as_slice(), (-p.rcc()).as_slice(), hs, 1e-8), &inputs, start);
        let lhs = qq + cr;
        c.push(scaled_compare("linearization.contracted-variation", "dotcgh", lhs.as_slice(), p.ricci().as_slice(), lhs.norm().max(hs), 1e-6), &inputs, start);

        // linearity in h
        let start = Instant::now();
        let sum: Arc<dyn SymField> = Arc::new(SumField::new(h.clone(), h2.clone(), 3.0));
        let a = LinearizationPoint::new(chart, sum.as_ref(), x)?.riemann()?;
        let b2 = LinearizationPoint::new(chart, h2.as_ref(), x)?.riemann()?;
        let combo = &closed_r + &b2.scaled(3.0);
        c.push(scaled_compare("linearization.linearity", "curvlin", a.as_slice(), combo.as_slice(), combo.coord_norm().max(hs), 1e-10), &inputs, start);

        // Weitzenböck with finite-difference metric jets; 2h∘Ric is read as the
        // symmetrization h∘Ric + Ric∘h (they agree on Einstein metrics)
        let start = Instant::now();
        let fd_chart = chart.with_fd_jets(DEFAULT_FD_STEPS);
        let weit_h = tt.clone().unwrap_or_else(|| h.clone());
        let lhs = s_operators(weit_h.as_ref(), &fd_chart, x)?;
        let fa = FieldAtPoint::new(&fd_chart, weit_h.as_ref(), x)?;
        let ric = fa.bundle.ricci_matrix();
        let rhs = crate::chart::bochner_at(&fa.geo, &fa.deriv) + crate::chart::rcc_action(&fa.bundle, &fa.geo.metric, &fa.deriv.value) * 2.0
            - compose(&fa.deriv.value, &ric, &fa.geo.metric)
            - compose(&ric, &fa.deriv.value, &fa.geo.metric);
        c.push(rel_compare("linearization.weitzenbock", "weitzen", lhs.as_slice(), rhs.as_slice(), 1e-3), &format!("{} | {}", describe_point(&fd_chart, x), weit_h.describe()), start);

        if in_class(&p.bundle, m, k).is_some() {
            let mut dirs = vec![h.clone(), chart.field().clone()];
            if let Some(t) = &tt {
                dirs.push(t.clone());
            }
            let s_scale = gauss_bonnet_2k(&p.bundle.r, m, k)?.abs();
            for dir in &dirs {
                let inputs = format!("{} | {}", describe_point(chart, x), dir.describe());
                let start = Instant::now();
                let q = LinearizationPoint::new(chart, dir.as_ref(), x)?;
                let closed = q.ricci_2k(k)?;
                let fd = fd_request(chart, dir, x, Invariant::Ricci2k(k))?;
                let lam = q.class_membership(k)?.lambda;
                c.push(scaled_compare("linearization.ricci2k-fd", "ricci2kline", closed.as_slice(), &fd.richardson, closed.norm().max(lam.abs() * q.h().norm()), 1e-3), &inputs, start);
                let start = Instant::now();
                let closed = q.gauss_bonnet_2k(k)?;
                let fd = fd_request(chart, dir, x, Invariant::GaussBonnet2k(k))?;
                c.push(scaled_compare("linearization.gb2k-fd", "linescar2", &[closed], &fd.richardson, s_scale * q.h().norm().max(1e-300), 1e-3), &inputs, start);
            }
            if let Some(t) = &tt {
                let inputs = format!("{} | {}", describe_point(chart, x), t.describe());
                let start = Instant::now();
                let q = LinearizationPoint::new(chart, t.as_ref(), x)?;
                let lam = q.class_membership(k)?.lambda;
                let via_ricci = q.ricci_2k(k)? - q.h() * lam;
                let c2k = q.c2k(k)?;
                c.push(rel_compare("linearization.c2k-restricted", "restrictoper", c2k.as_slice(), via_ricci.as_slice(), 1e-6), &inputs, start);
                if let Some(mu) = model.mu {
                    let pot = q.potential(k);
                    c.push(rel_compare("linearization.potential-space-form", "restrictpot", pot.as_slice(), (q.h() * mu).as_slice(), 1e-8), &inputs, start);
                }
            }
            let start = Instant::now();
            let f = Arc::new(TrigScalar::random(n, seed, 0.3, 2));
            let fg = scalar_times_metric(f.clone(), chart);
            let direct = conformal_operator(f.as_ref(), chart, x, k)?;
            let xs = x.clone();
            let fd = fd_derivative(chart, &fg, &DEFAULT_STEPS, &|ch| Invariant::GaussBonnet2k(k).evaluate(ch, &xs))?;
            c.push(scaled_compare("linearization.conformal-fd", "linescar4", &[direct], &fd.richardson, s_scale * f.value(x).abs().max(0.1), 1e-3), &format!("{} | {}", describe_point(chart, x), fg.describe()), start);
        }
    }
    Ok(c.records)
}

fn periodic_chart(cfg: &SuiteConfig) -> Result<(Model, MetricChart)> {
    if cfg.model == "flat" {
        let mut m = Model::named("flat-torus", &cfg.params)?;
        m.name = "flat".into();
        let c = flat_torus(cfg.params.n);
        return Ok((m, c));
    }
    let m = cfg.model()?;
    if !m.periodic {
        return Err(Error::Parameter(format!(
            "functional checks need a periodic model, '{}' is not",
            cfg.model
        )));
    }
    let c = m.chart.clone();
    Ok((m, c))
}

/// Resolution used for the third-order divergence sweep.
pub fn divergence_res(n: usize, res: usize) -> usize {
    let cap = if n >= 5 { 4 } else { 8 };
    res.min(cap)
}

pub fn functional_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut c = Collector::new("functional", cfg);
    let (model, chart) = periodic_chart(cfg)?;
    let n = chart.dim();
    let k = cfg.params.k;
    if 2 * k >= n {
        return Err(Error::Parameter(format!("functional needs n > 2k (n={n}, k={k})")));
    }
    let res = if cfg.quick { cfg.res.min(6) } else { cfg.res };
    let grid = PeriodicGrid::new(&chart, res)?;
    let seed = cfg.seed();
    let inputs = format!("{} | res={res}", chart.describe());
    let start = Instant::now();
    let h: Arc<dyn SymField> = Arc::new(TrigTensorField::random_periodic(n, seed + 1, 0.5, 2));
    c.push(volume_derivative_check(&grid, &chart, h)?, &inputs, start);
    // the constant part pairs with the mean of J on any torus; the waves
    // additionally resonate with the perturbed torus
    let direction: Arc<dyn SymField> = Arc::new(resonant_direction(n, cfg.params.seed, 1.0));
    let start = Instant::now();
    c.push(gradient_identity_check(&grid, &chart, k, direction.clone())?, &inputs, start);
    if k != 1 {
        let start = Instant::now();
        c.push(gradient_identity_check(&grid, &chart, 1, direction)?, &inputs, start);
    }
    let dgrid = PeriodicGrid::new(&chart, divergence_res(n, res))?;
    for kk in if k == 1 { vec![1] } else { vec![k, 1] } {
        let start = Instant::now();
        c.push(divergence_free_check(&dgrid, &chart, kk)?, &inputs, start);
    }
    let start = Instant::now();
    let worst = constancy_consequence(&chart, &model.samples, k)?;
    c.push(VerificationReport::bound("functional.constancy-consequence", "constante", worst, 1e-4), &inputs, start);
    Ok(c.records)
}

/// One row of the `invariants` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointInvariants {
    pub point: Vec<f64>,
    pub kappa: f64,
    pub s2k: f64,
    pub lambda_estimate: f64,
    pub r2k: Vec<Vec<f64>>,
    pub j2k: Vec<Vec<f64>>,
    pub einstein_residual: f64,
    pub two_k_einstein_residual: f64,
    pub thorpe_mu: Option<f64>,
    pub thorpe_residual: Option<f64>,
    pub weyl_norm: f64,
    pub schouten: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub rigidity: Option<RigidityRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityRow {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub satisfied: bool,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Per-point invariant tables plus the model-level checks (space-form values,
/// flatness, Lovelock constancy).
pub fn invariants_table(cfg: &SuiteConfig) -> Result<(Vec<PointInvariants>, Vec<VerificationReport>)> {
    let model = cfg.model()?;
    let chart = &model.chart;
    let n = chart.dim();
    let k = cfg.params.k;
    if k == 0 || 2 * k > n {
        return Err(Error::Parameter(format!("invariants need 1 <= k <= n/2 (n={n}, k={k})")));
    }
    let mut c = Collector::new("invariants", cfg);
    let mut table = Vec::new();
    for x in &model.samples {
        let geo = chart.geometry(x, 2)?;
        let b = geo.curvature()?;
        let m = &geo.metric;
        let set = invariant_set(&b, m, k)?;
        let er = einstein_residuals(&set, &b, m)?;
        let (mu, thr) = if k >= 2 {
            let (a, t) = thorpe_check(&b.r, m, k)?;
            (Some(a), Some(t))
        } else {
            (None, None)
        };
        let cd = schouten_weyl(&b, m)?;
        let rigidity = if k >= 2 && 2 * k < n {
            let r = rigidity_certificate(&b, m, k)?;
            Some(RigidityRow {
                min_eigenvalue: r.min_eigenvalue,
                max_eigenvalue: r.max_eigenvalue,
                lower_bound: r.lower_bound,
                upper_bound: r.upper_bound,
                satisfied: r.satisfied,
            })
        } else {
            None
        };
        table.push(PointInvariants {
            point: x.clone(),
            kappa: b.kappa,
            s2k: set.s2k,
            lambda_estimate: set.lambda_est,
            r2k: rows(&set.r2k.to_matrix()),
            j2k: rows(&set.j2k.to_matrix()),
            einstein_residual: er.einstein,
            two_k_einstein_residual: er.two_k_einstein,
            thorpe_mu: mu,
            thorpe_residual: thr,
            weyl_norm: cd.weyl.norm(m),
            schouten: rows(&cd.schouten.to_matrix()),
            sigma: cd.sigma.clone(),
            rigidity,
        });
    }
    let s: Vec<f64> = table.iter().map(|r| r.s2k).collect();
    let inputs = chart.describe();
    let start = Instant::now();
    if let Some(mu) = model.mu {
        let want = space_form_gauss_bonnet(n, k, mu);
        let got: Vec<f64> = s.clone();
        let expect = vec![want; got.len()];
        let scale = want.abs();
        c.push(scaled_compare("invariants.s2k-space-form", "2k-scalar curv", &got, &expect, scale * (got.len() as f64).sqrt(), 1e-8), &inputs, start);
        if 2 * k < n {
            let sc = structure_constants(n, k)?;
            let lam = k as f64 * (n as f64 - 2.0) / n as f64 * sc.c_nk * space_form_mu_k(mu, k) * (n * (n - 1)) as f64 * mu;
            let got: Vec<f64> = table.iter().map(|r| r.lambda_estimate).collect();
            let expect = vec![lam; got.len()];
            c.push(scaled_compare("invariants.lambda", "boler", &got, &expect, lam.abs() * (got.len() as f64).sqrt(), 1e-8), &inputs, start);
            if mu != 0.0 {
                let worst = table.iter().map(|r| r.two_k_einstein_residual).fold(0.0, f64::max);
                c.push(VerificationReport::bound("invariants.2k-einstein", "einsteincond", worst, 1e-8), &inputs, start);
            }
        }
    }
    if model.mu == Some(0.0) {
        let worst = table
            .iter()
            .flat_map(|r| [r.kappa.abs(), r.s2k.abs(), r.r2k.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))])
            .fold(0.0, f64::max);
        c.push(VerificationReport::bound("invariants.flat-vanishing", "const", worst, 1e-12), &inputs, start);
    }
    if model.name == "lovelock" {
        c.push(
            VerificationReport::bound("invariants.lovelock-constancy", "loveexamples", relative_spread(&s), 1e-6)
                .with_note(format!("S^(2k) along the radial samples: {s:?}")),
            &inputs,
            start,
        );
    }
    Ok((table, c.records))
}
