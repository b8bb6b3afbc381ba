//! Catalog of metric charts: space forms, flat and perturbed tori, products
//! with tori, conformally flat metrics, the Lovelock black-hole slice and
//! ellipsoid shape operators, plus trigonometric tensor fields.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::chart::{Domain, MetricChart, ScalarField, ScalarTimesField, SymField};
use crate::dform::MetricAtPoint;
use crate::error::{Error, Result};
use crate::jet::{Jet, SymJet};
use crate::sampling::{random_orthonormal_frame, random_symmetric, rng_from_seed};

/// Coordinates used for a constant-curvature chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartStyle {
    Stereographic,
    PoincareBall,
    Euclidean,
}

impl ChartStyle {
    pub fn name(self) -> &'static str {
        match self {
            ChartStyle::Stereographic => "stereographic",
            ChartStyle::PoincareBall => "poincare_ball",
            ChartStyle::Euclidean => "euclidean",
        }
    }

    /// The style matching the sign of `mu`.
    pub fn for_curvature(mu: f64) -> Self {
        if mu > 0.0 {
            ChartStyle::Stereographic
        } else if mu < 0.0 {
            ChartStyle::PoincareBall
        } else {
            ChartStyle::Euclidean
        }
    }
}

/// `Σ a_m cos(k_m·x + φ_m)` with analytic jets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigScalar {
    pub n: usize,
    pub terms: Vec<(f64, Vec<f64>, f64)>,
}

impl TrigScalar {
    /// `amplitude · sin(x_axis)`.
    pub fn sine(n: usize, amplitude: f64, axis: usize) -> Self {
        let mut k = vec![0.0; n];
        k[axis] = 1.0;
        TrigScalar {
            n,
            terms: vec![(amplitude, k, -PI / 2.0)],
        }
    }

    /// A few terms with integer wave vectors in `{-1,0,1}^n`, amplitudes
    /// summing to `amplitude`.
    pub fn random(n: usize, seed: u64, amplitude: f64, nterms: usize) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut terms = Vec::with_capacity(nterms);
        let weights: Vec<f64> = (0..nterms).map(|_| rng.random_range(0.5..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for w in weights {
            terms.push((amplitude * w / total, integer_wave(n, &mut rng), rng.random_range(0.0..2.0 * PI)));
        }
        TrigScalar { n, terms }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(a, k, ph)| a * (dot(k, x) + ph).cos())
            .sum()
    }

    pub fn describe(&self) -> String {
        format!("trig{:?}", self.terms)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn integer_wave(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let k: Vec<f64> = (0..n).map(|_| rng.random_range(-1i32..=1) as f64).collect();
        if k.iter().any(|v| *v != 0.0) {
            return k;
        }
    }
}

/// Jet of `cos(k·x + φ)`.
fn cos_wave_jet(k: &[f64], phase: f64, x: &[f64], order: usize) -> Jet {
    let n = k.len();
    let th = dot(k, x) + phase;
    let (s, c) = th.sin_cos();
    let mut j = Jet::constant(n, order, c);
    if order >= 1 {
        for p in 0..n {
            j.d1[p] = -s * k[p];
        }
    }
    if order >= 2 {
        for p in 0..n {
            for q in 0..n {
                j.d2[p * n + q] = -c * k[p] * k[q];
            }
        }
    }
    if order >= 3 {
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    j.d3[(p * n + q) * n + r] = s * k[p] * k[q] * k[r];
                }
            }
        }
    }
    j
}

impl ScalarField for TrigScalar {
    fn dim(&self) -> usize {
        self.n
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        let mut acc = Jet::constant(self.n, order, 0.0);
        for (a, k, ph) in &self.terms {
            acc = &acc + &cos_wave_jet(k, *ph, x, order).scale(*a);
        }
        Ok(acc)
    }
    fn describe(&self) -> String {
        TrigScalar::describe(self)
    }
}

/// `e^{2f}` for a trigonometric `f`.
pub struct ExpTwice(pub TrigScalar);

impl ScalarField for ExpTwice {
    fn dim(&self) -> usize {
        self.0.n
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        Ok(self.0.jet(x, order)?.scale(2.0).exp())
    }
    fn describe(&self) -> String {
        format!("exp(2*{})", self.0.describe())
    }
}

/// `(2/(1+μ|x|²))^p`: `p = 2` gives the constant-curvature conformal factor.
#[derive(Debug, Clone, Copy)]
pub struct RadialFactor {
    pub n: usize,
    pub mu: f64,
    pub power: f64,
}

impl RadialFactor {
    fn check(&self, x: &[f64]) -> Result<f64> {
        let base = 1.0 + self.mu * dot(x, x);
        if base <= 0.0 {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(base)
    }
}

impl ScalarField for RadialFactor {
    fn dim(&self) -> usize {
        self.n
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        self.check(x)?;
        let n = self.n;
        let mut base = Jet::constant(n, order, 1.0);
        for (i, &xi) in x.iter().enumerate() {
            let v = Jet::variable(n, order, i, xi);
            base = &base + &(&v * &v).scale(self.mu);
        }
        Ok(base.scale(0.5).powf(-self.power))
    }
    fn describe(&self) -> String {
        format!("(2/(1+{}|x|^2))^{}", self.mu, self.power)
    }
}

/// `φ·δ` for a positive scalar field `φ`.
pub struct ConformalDelta {
    n: usize,
    factor: Arc<dyn ScalarField>,
}

impl ConformalDelta {
    pub fn new(factor: Arc<dyn ScalarField>) -> Self {
        ConformalDelta {
            n: factor.dim(),
            factor,
        }
    }
}

impl SymField for ConformalDelta {
    fn dim(&self) -> usize {
        self.n
    }
    fn max_order(&self) -> usize {
        3
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<SymJet> {
        let f = self.factor.jet(x, order)?;
        let zero = Jet::constant(self.n, order, 0.0);
        Ok(SymJet::from_components(self.n, order, |i, j| {
            if i == j {
                f.clone()
            } else {
                zero.clone()
            }
        }))
    }
    fn describe(&self) -> String {
        format!("{} * delta", self.factor.describe())
    }
}

/// Constant symmetric field.
pub struct ConstantField {
    n: usize,
    value: Vec<f64>,
}

impl ConstantField {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        ConstantField {
            n,
            value: (0..n * n).map(|k| m[(k / n, k % n)]).collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        ConstantField::new(&DMatrix::identity(n, n))
    }
}

impl SymField for ConstantField {
    fn dim(&self) -> usize {
        self.n
    }
    fn max_order(&self) -> usize {
        3
    }
    fn jet(&self, _x: &[f64], order: usize) -> Result<SymJet> {
        Ok(SymJet::constant(self.n, order, &self.value))
    }
    fn describe(&self) -> String {
        format!("const{:?}", self.value)
    }
}

/// `B + Σ cos(k_m·x + φ_m) S_m` with constant symmetric `B`, `S_m`.
#[derive(Debug, Clone)]
pub struct TrigTensorField {
    pub n: usize,
    pub base: Vec<f64>,
    pub terms: Vec<(Vec<f64>, f64, Vec<f64>)>,
}

fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

impl TrigTensorField {
    pub fn new(n: usize, base: &DMatrix<f64>, terms: Vec<(Vec<f64>, f64, DMatrix<f64>)>) -> Self {
        TrigTensorField {
            n,
            base: flatten(base),
            terms: terms.into_iter().map(|(k, ph, s)| (k, ph, flatten(&s))).collect(),
        }
    }

    /// Periodic random field: integer wave vectors, coefficient matrices with
    /// Frobenius norms summing to `amplitude`.
    pub fn random_periodic(n: usize, seed: u64, amplitude: f64, nterms: usize) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut raw = Vec::with_capacity(nterms);
        for _ in 0..nterms {
            let k = integer_wave(n, &mut rng);
            let ph = rng.random_range(0.0..2.0 * PI);
            let s = random_symmetric(n, &mut rng);
            let w = rng.random_range(0.5..1.0);
            raw.push((k, ph, s.normalize() * w));
        }
        let total: f64 = raw.iter().map(|(_, _, s)| s.norm()).sum();
        let terms = raw
            .into_iter()
            .map(|(k, ph, s)| (k, ph, s * (amplitude / total)))
            .collect();
        TrigTensorField::new(n, &DMatrix::zeros(n, n), terms)
    }

    /// Random smooth field with real wave vectors of size about `freq`
    /// (not periodic); used on bounded charts.
    pub fn random_smooth(n: usize, seed: u64, amplitude: f64, nterms: usize, freq: f64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut terms = Vec::with_capacity(nterms);
        for _ in 0..nterms {
            let k: Vec<f64> = (0..n).map(|_| freq * rng.random_range(-1.0..1.0)).collect();
            let ph = rng.random_range(0.0..2.0 * PI);
            let s = random_symmetric(n, &mut rng).normalize() * (amplitude / nterms as f64);
            terms.push((k, ph, s));
        }
        let base = random_symmetric(n, &mut rng).normalize() * (amplitude / nterms as f64);
        TrigTensorField::new(n, &base, terms)
    }
}

impl SymField for TrigTensorField {
    fn dim(&self) -> usize {
        self.n
    }
    fn max_order(&self) -> usize {
        3
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<SymJet> {
        let n = self.n;
        let mut out = SymJet::constant(n, order, &self.base);
        for (k, ph, s) in &self.terms {
            let w = cos_wave_jet(k, *ph, x, order);
            for ij in 0..n * n {
                let c = s[ij];
                if c == 0.0 {
                    continue;
                }
                out.val[ij] += c * w.v;
                if order >= 1 {
                    for p in 0..n {
                        out.d1[ij * n + p] += c * w.d1[p];
                    }
                }
                if order >= 2 {
                    let m = n * n;
                    for pq in 0..m {
                        out.d2[ij * m + pq] += c * w.d2[pq];
                    }
                }
                if order >= 3 {
                    let m = n * n * n;
                    for pqr in 0..m {
                        out.d3[ij * m + pqr] += c * w.d3[pqr];
                    }
                }
            }
        }
        Ok(out)
    }
    fn describe(&self) -> String {
        format!("trig-tensor(base {:?}, terms {:?})", self.base, self.terms)
    }
}

/// A base metric on the first `r` coordinates times the flat torus on the rest.
pub struct ProductTorusField {
    base: Arc<dyn SymField>,
    m: usize,
}

impl SymField for ProductTorusField {
    fn dim(&self) -> usize {
        self.base.dim() + self.m
    }
    fn max_order(&self) -> usize {
        self.base.max_order()
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<SymJet> {
        let r = self.base.dim();
        let n = self.dim();
        let b = self.base.jet(&x[..r], order)?;
        let mut out = SymJet::zeros(n, order);
        for i in r..n {
            out.val[i * n + i] = 1.0;
        }
        for i in 0..r {
            for j in 0..r {
                let ij = i * n + j;
                out.val[ij] = b.g(i, j);
                for p in 0..r {
                    if order >= 1 {
                        out.d1[ij * n + p] = b.dg(i, j, p);
                    }
                    for q in 0..r {
                        if order >= 2 {
                            out.d2[(ij * n + p) * n + q] = b.ddg(i, j, p, q);
                        }
                        if order >= 3 {
                            for s in 0..r {
                                out.d3[((ij * n + p) * n + q) * n + s] = b.dddg(i, j, p, q, s);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
    fn describe(&self) -> String {
        format!("({}) x T^{}", self.base.describe(), self.m)
    }
}

/// `F(r)^{-1}dr² + r²σ(y)²|dy|²` with `F = 1 + εr² − 2m r^{2−n/k}` and the unit
/// round sphere in stereographic coordinates `y`.
#[derive(Debug, Clone, Copy)]
pub struct LovelockSliceField {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub mass: f64,
}

impl LovelockSliceField {
    pub fn lapse(&self, r: f64) -> f64 {
        1.0 + self.eps * r * r - 2.0 * self.mass * r.powf(2.0 - self.n as f64 / self.k as f64)
    }
}

impl SymField for LovelockSliceField {
    fn dim(&self) -> usize {
        self.n
    }
    fn max_order(&self) -> usize {
        3
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<SymJet> {
        let n = self.n;
        let r = Jet::variable(n, order, 0, x[0]);
        if x[0] <= 0.0 {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        let f_val = self.lapse(x[0]);
        if f_val <= 0.0 {
            return Err(Error::Horizon { r: x[0], value: f_val });
        }
        let p = 2.0 - n as f64 / self.k as f64;
        let lapse = (&(&r * &r).scale(self.eps) - &r.powf(p).scale(2.0 * self.mass)).add_const(1.0);
        let grr = lapse.recip();
        let mut y2 = Jet::constant(n, order, 1.0);
        for (i, &xi) in x.iter().enumerate().skip(1) {
            let v = Jet::variable(n, order, i, xi);
            y2 = &y2 + &(&v * &v);
        }
        let sigma2 = y2.scale(0.5).powf(-2.0);
        let ang = &(&r * &r) * &sigma2;
        let zero = Jet::constant(n, order, 0.0);
        Ok(SymJet::from_components(n, order, |i, j| {
            if i != j {
                zero.clone()
            } else if i == 0 {
                grr.clone()
            } else {
                ang.clone()
            }
        }))
    }
    fn describe(&self) -> String {
        format!("lovelock-slice(n={}, k={}, eps={}, m={})", self.n, self.k, self.eps, self.mass)
    }
}

/// Constant-curvature chart with analytic jets.
pub fn space_form(n: usize, mu: f64, style: ChartStyle) -> Result<MetricChart> {
    if n < 2 {
        return Err(Error::Parameter(format!("space form of dimension {n}")));
    }
    let ok = match style {
        ChartStyle::Stereographic => mu > 0.0,
        ChartStyle::PoincareBall => mu < 0.0,
        ChartStyle::Euclidean => mu == 0.0,
    };
    if !ok {
        return Err(Error::StyleMismatch {
            style: style.name().into(),
            mu,
        });
    }
    let name = format!("space-form(n={n}, mu={mu}, {})", style.name());
    Ok(match style {
        ChartStyle::Euclidean => MetricChart::new(name, Arc::new(ConstantField::identity(n)), Domain::unbounded(n)),
        ChartStyle::Stereographic => MetricChart::new(
            name,
            Arc::new(ConformalDelta::new(Arc::new(RadialFactor { n, mu, power: 2.0 }))),
            Domain::unbounded(n),
        ),
        ChartStyle::PoincareBall => {
            // a coordinate box strictly inside the ball |x|² < 1/|μ|
            let half = 0.9 / (n as f64 * mu.abs()).sqrt();
            MetricChart::new(
                name,
                Arc::new(ConformalDelta::new(Arc::new(RadialFactor { n, mu, power: 2.0 }))),
                Domain::boxed(vec![-half; n], vec![half; n]),
            )
        }
    })
}

/// `base × T^m` with the flat unit-circle factors appended.
pub fn product_with_torus(base: &MetricChart, m: usize) -> MetricChart {
    let r = base.dim();
    let mut domain = Domain::torus(r + m);
    domain.lo[..r].copy_from_slice(&base.domain.lo);
    domain.hi[..r].copy_from_slice(&base.domain.hi);
    domain.periodic[..r].copy_from_slice(&base.domain.periodic);
    MetricChart::new(
        format!("{} x T^{m}", base.name),
        Arc::new(ProductTorusField {
            base: base.field().clone(),
            m,
        }),
        domain,
    )
}

/// Radial window on which the slice is sampled: outside the unit radius for
/// `ε ≥ 0`, inside it for `ε < 0`.
pub fn lovelock_window(eps: f64) -> (f64, f64) {
    if eps < 0.0 {
        (0.4, 0.8)
    } else {
        (1.2, 3.0)
    }
}

/// The spatial slice of the Lovelock black hole on `[r_lo, r_hi] × S^{n−1}`.
pub fn lovelock_slice(n: usize, k: usize, eps: f64, mass: f64) -> Result<MetricChart> {
    let (lo, hi) = lovelock_window(eps);
    lovelock_slice_on(n, k, eps, mass, lo, hi)
}

pub fn lovelock_slice_on(n: usize, k: usize, eps: f64, mass: f64, r_lo: f64, r_hi: f64) -> Result<MetricChart> {
    if k == 0 || n < 3 || 2 * k > n {
        return Err(Error::Parameter(format!("lovelock slice with n={n}, k={k}")));
    }
    if !(0.0 < r_lo && r_lo < r_hi) {
        return Err(Error::Parameter(format!("radial interval [{r_lo}, {r_hi}]")));
    }
    let field = LovelockSliceField { n, k, eps, mass };
    for i in 0..=200 {
        let r = r_lo + (r_hi - r_lo) * i as f64 / 200.0;
        let f = field.lapse(r);
        if f <= 0.0 {
            return Err(Error::Horizon { r, value: f });
        }
    }
    let mut lo = vec![-1.0; n];
    let mut hi = vec![1.0; n];
    lo[0] = r_lo;
    hi[0] = r_hi;
    Ok(MetricChart::new(
        format!("lovelock-slice(n={n}, k={k}, eps={eps}, m={mass})"),
        Arc::new(field),
        Domain::boxed(lo, hi),
    ))
}

/// `e^{2f}δ` on the torus.
pub fn conformally_flat(n: usize, f: TrigScalar) -> MetricChart {
    let name = format!("conformally-flat(n={n})");
    MetricChart::new(name, Arc::new(ConformalDelta::new(Arc::new(ExpTwice(f)))), Domain::torus(n))
}

/// `δ + amplitude·Σ cos(k_m·x + φ_m) S_m` with `Σ‖S_m‖ = 1`, so SPD for amplitude < 1.
pub fn perturbed_torus(n: usize, seed: u64, amplitude: f64) -> Result<MetricChart> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::Parameter(format!(
            "perturbation amplitude {amplitude} does not keep the metric positive definite"
        )));
    }
    let mut field = TrigTensorField::random_periodic(n, seed, amplitude, 3);
    field.base = flatten(&DMatrix::identity(n, n));
    Ok(MetricChart::new(
        format!("perturbed-torus(n={n}, seed={seed}, a={amplitude})"),
        Arc::new(field),
        Domain::torus(n),
    ))
}

/// Periodic direction whose modes pair with the quadratic curvature terms of
/// `perturbed_torus(n, seed, ·)`: a constant part plus waves `k_a ± k_b` of the
/// metric's own wave vectors. Frobenius norms sum to `amplitude`.
pub fn resonant_direction(n: usize, seed: u64, amplitude: f64) -> TrigTensorField {
    let metric = TrigTensorField::random_periodic(n, seed, 1.0, 3);
    let mut rng = rng_from_seed(seed.wrapping_add(0x9e37_79b9));
    let mut raw = vec![(vec![0.0; n], 0.0, random_symmetric(n, &mut rng).normalize())];
    for a in 0..metric.terms.len() {
        for b in a..metric.terms.len() {
            for sign in [1.0, -1.0] {
                let k: Vec<f64> = metric.terms[a].0.iter().zip(&metric.terms[b].0).map(|(p, q)| p + sign * q).collect();
                if k.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let ph = rng.random_range(0.0..2.0 * PI);
                raw.push((k, ph, random_symmetric(n, &mut rng).normalize()));
            }
        }
    }
    let scale = amplitude / raw.len() as f64;
    let base = raw[0].2.clone() * scale;
    let terms = raw.into_iter().skip(1).map(|(k, ph, m)| (k, ph, m * scale)).collect();
    TrigTensorField::new(n, &base, terms)
}

pub fn flat_torus(n: usize) -> MetricChart {
    MetricChart::new(format!("flat-torus(n={n})"), Arc::new(ConstantField::identity(n)), Domain::torus(n))
}

/// Transverse-traceless field on the chart `(2/(1+μ|x|²))²δ`:
/// `φ^{2−n} Σ c_m (a_m⊗b_m + b_m⊗a_m) cos(k_m·x + θ_m)` with `a_m, b_m, k_m`
/// mutually orthogonal. With `mu = 0` and integer `k` it is periodic.
pub fn tt_field(n: usize, mu: f64, seed: u64, nterms: usize) -> Arc<dyn SymField> {
    assert!(n >= 3, "transverse-traceless builder needs n >= 3");
    let mut rng = rng_from_seed(seed);
    let mut terms = Vec::with_capacity(nterms);
    for _ in 0..nterms {
        let frame = random_orthonormal_frame(&MetricAtPoint::euclidean(n), &mut rng);
        let wave = rng.random_range(0.5..1.5);
        let kvec: Vec<f64> = frame.column(0).iter().map(|v| v * wave).collect();
        let a = frame.column(1).clone_owned();
        let b = frame.column(2).clone_owned();
        let s = (&a * b.transpose() + &b * a.transpose()) * rng.random_range(0.5..1.0);
        terms.push((kvec, rng.random_range(0.0..2.0 * PI), s));
    }
    tt_from_terms(n, mu, terms)
}

/// Periodic transverse-traceless field on the flat torus built from axis-aligned
/// triples (wave along one axis, polarization on two others).
pub fn tt_field_torus(n: usize, seed: u64, nterms: usize) -> Arc<dyn SymField> {
    assert!(n >= 3, "transverse-traceless builder needs n >= 3");
    let mut rng = rng_from_seed(seed);
    let mut terms = Vec::with_capacity(nterms);
    for _ in 0..nterms {
        let mut axes: Vec<usize> = (0..n).collect();
        for i in 0..3 {
            let j = rng.random_range(i..n);
            axes.swap(i, j);
        }
        let mut kvec = vec![0.0; n];
        kvec[axes[0]] = rng.random_range(1..=2) as f64;
        let mut s = DMatrix::zeros(n, n);
        let c = rng.random_range(0.5..1.0);
        s[(axes[1], axes[2])] = c;
        s[(axes[2], axes[1])] = c;
        terms.push((kvec, rng.random_range(0.0..2.0 * PI), s));
    }
    tt_from_terms(n, 0.0, terms)
}

fn tt_from_terms(n: usize, mu: f64, terms: Vec<(Vec<f64>, f64, DMatrix<f64>)>) -> Arc<dyn SymField> {
    let h0: Arc<dyn SymField> = Arc::new(TrigTensorField::new(n, &DMatrix::zeros(n, n), terms));
    if mu == 0.0 {
        return h0;
    }
    Arc::new(ScalarTimesField::new(
        Arc::new(RadialFactor {
            n,
            mu,
            power: 2.0 - n as f64,
        }),
        h0,
    ))
}

/// `f·g` as a tensor field.
pub fn scalar_times_metric(f: Arc<dyn ScalarField>, chart: &MetricChart) -> Arc<dyn SymField> {
    Arc::new(ScalarTimesField::new(f, chart.field().clone()))
}

/// Shape operators of the ellipsoid `Σ x_i²/a_i² = 1` in `R^{n+1}`.
#[derive(Debug, Clone)]
pub struct EllipsoidShape {
    pub axes: Vec<f64>,
}

/// Ellipsoid with `n+1` semi-axes, giving shape operators of a hypersurface of dimension `n`.
pub fn ellipsoid_shape(n: usize, semi_axes: &[f64]) -> Result<EllipsoidShape> {
    if semi_axes.len() != n + 1 {
        return Err(Error::DimensionMismatch(semi_axes.len(), n + 1));
    }
    if semi_axes.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::Parameter("semi-axes must be positive".into()));
    }
    Ok(EllipsoidShape {
        axes: semi_axes.to_vec(),
    })
}

impl EllipsoidShape {
    pub fn dim(&self) -> usize {
        self.axes.len() - 1
    }

    /// Shape operator at the surface point in direction `v`, in an
    /// orthonormal frame of the tangent space.
    pub fn shape_at(&self, v: &[f64]) -> DMatrix<f64> {
        let m = self.axes.len();
        let scale = v
            .iter()
            .zip(&self.axes)
            .map(|(vi, a)| vi * vi / (a * a))
            .sum::<f64>()
            .sqrt();
        let x: Vec<f64> = v.iter().map(|vi| vi / scale).collect();
        let grad = nalgebra::DVector::from_fn(m, |i, _| 2.0 * x[i] / (self.axes[i] * self.axes[i]));
        let gnorm = grad.norm();
        let normal = &grad / gnorm;
        // orthonormal completion of the normal; tangent frame = remaining columns
        let mut full = DMatrix::identity(m, m);
        full.set_column(0, &normal);
        let q = full.qr().q();
        let tangent = q.columns(1, m - 1).clone_owned();
        let hess = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(m, |i, _| {
            2.0 / (self.axes[i] * self.axes[i])
        }));
        let a = tangent.transpose() * hess * &tangent / gnorm;
        (&a + a.transpose()) * 0.5
    }

    /// Shape operators at `count` seeded surface points.
    pub fn samples(&self, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
        let mut rng = rng_from_seed(seed);
        (0..count)
            .map(|_| {
                let v: Vec<f64> = (0..self.axes.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                self.shape_at(&v)
            })
            .collect()
    }
}

/// Fixed low-discrepancy points in the box `[lo, hi]`.
pub fn box_samples(lo: &[f64], hi: &[f64], count: usize) -> Vec<Vec<f64>> {
    const ROOTS: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
    (0..count)
        .map(|i| {
            lo.iter()
                .zip(hi)
                .enumerate()
                .map(|(j, (l, h))| {
                    let alpha = ROOTS[j % ROOTS.len()].sqrt().fract() + 0.1 * (j / ROOTS.len()) as f64;
                    let t = (0.5 + (i + 1) as f64 * alpha).fract();
                    l + (h - l) * t
                })
                .collect()
        })
        .collect()
}

/// Model parameters addressable by name from the command line.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub n: usize,
    pub k: usize,
    pub mu: Option<f64>,
    pub eps: f64,
    pub mass: f64,
    pub seed: u64,
    pub amplitude: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            n: 5,
            k: 2,
            mu: None,
            eps: 1.0,
            mass: 0.1,
            seed: 42,
            amplitude: 0.05,
        }
    }
}

/// A chart with its fixed sample points.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub chart: MetricChart,
    pub samples: Vec<Vec<f64>>,
    /// Sectional curvature for space forms.
    pub mu: Option<f64>,
    pub periodic: bool,
    pub params: BTreeMap<String, f64>,
}

pub const MODEL_NAMES: [&str; 8] = [
    "sphere",
    "hyperbolic",
    "flat",
    "flat-torus",
    "perturbed-torus",
    "conformally-flat",
    "lovelock",
    "product",
];

/// Sample count used for every catalog model.
pub const SAMPLE_COUNT: usize = 6;

impl Model {
    pub fn named(name: &str, p: &ModelParams) -> Result<Model> {
        let n = p.n;
        let mut params = BTreeMap::new();
        params.insert("n".to_string(), n as f64);
        let space = |mu: f64| -> Result<(MetricChart, Vec<Vec<f64>>)> {
            let c = space_form(n, mu, ChartStyle::for_curvature(mu))?;
            let half = if mu < 0.0 { 0.8 / (n as f64 * mu.abs()).sqrt() } else { 0.6 };
            let s = box_samples(&vec![-half; n], &vec![half; n], SAMPLE_COUNT);
            Ok((c, s))
        };
        let torus_samples = || box_samples(&vec![0.0; n], &vec![2.0 * PI; n], SAMPLE_COUNT);
        let (chart, samples, mu, periodic) = match name {
            "sphere" => {
                let mu = p.mu.unwrap_or(1.0);
                if mu <= 0.0 {
                    return Err(Error::StyleMismatch {
                        style: "stereographic".into(),
                        mu,
                    });
                }
                let (c, s) = space(mu)?;
                (c, s, Some(mu), false)
            }
            "hyperbolic" => {
                let mu = p.mu.unwrap_or(-1.0);
                if mu >= 0.0 {
                    return Err(Error::StyleMismatch {
                        style: "poincare_ball".into(),
                        mu,
                    });
                }
                let (c, s) = space(mu)?;
                (c, s, Some(mu), false)
            }
            "flat" => {
                let (c, s) = space(0.0)?;
                (c, s, Some(0.0), false)
            }
            "flat-torus" => (flat_torus(n), torus_samples(), Some(0.0), true),
            "perturbed-torus" => {
                params.insert("seed".into(), p.seed as f64);
                params.insert("amplitude".into(), p.amplitude);
                (perturbed_torus(n, p.seed, p.amplitude)?, torus_samples(), None, true)
            }
            "conformally-flat" => {
                params.insert("seed".into(), p.seed as f64);
                let f = TrigScalar::random(n, p.seed, 0.3, 2);
                (conformally_flat(n, f), torus_samples(), None, true)
            }
            "lovelock" => {
                params.insert("k".into(), p.k as f64);
                params.insert("eps".into(), p.eps);
                params.insert("mass".into(), p.mass);
                let c = lovelock_slice(n, p.k, p.eps, p.mass)?;
                let s = lovelock_samples(n, p.eps, SAMPLE_COUNT);
                (c, s, None, false)
            }
            "product" => {
                if n < 3 {
                    return Err(Error::Parameter("product model needs n >= 3".into()));
                }
                let base = space_form(2, p.mu.unwrap_or(1.0).abs().max(f64::MIN_POSITIVE), ChartStyle::Stereographic)?;
                let c = product_with_torus(&base, n - 2);
                let mut lo = vec![-0.6, -0.6];
                let mut hi = vec![0.6, 0.6];
                lo.extend(std::iter::repeat_n(0.0, n - 2));
                hi.extend(std::iter::repeat_n(2.0 * PI, n - 2));
                (c, box_samples(&lo, &hi, SAMPLE_COUNT), None, false)
            }
            other => {
                return Err(Error::Parameter(format!(
                    "unknown model '{other}' (known: {})",
                    MODEL_NAMES.join(", ")
                )))
            }
        };
        if let Some(mu) = mu {
            params.insert("mu".into(), mu);
        }
        for x in &samples {
            chart.metric_at(x)?;
        }
        Ok(Model {
            name: name.to_string(),
            chart,
            samples,
            mu,
            periodic,
            params,
        })
    }
}

/// Radial sample points of the Lovelock slice with fixed angular coordinates.
pub fn lovelock_samples(n: usize, eps: f64, count: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = lovelock_window(eps);
    let ang = box_samples(&vec![-0.5; n - 1], &vec![0.5; n - 1], count);
    (0..count)
        .map(|i| {
            let r = lo + (hi - lo) * i as f64 / (count.max(2) - 1) as f64;
            let mut x = vec![r];
            x.extend_from_slice(&ang[i]);
            x
        })
        .collect()
}
