//! Coordinate charts with metric jets, the Levi-Civita connection, the
//! curvature double form and the first- and second-order operators acting on
//! symmetric 2-tensors.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dform::{DoubleForm, MetricAtPoint};
use crate::error::{Error, Result};
use crate::jet::{Jet, SymJet};

/// How the jets of a field are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetProvenance {
    Analytic,
    FiniteDifference { steps: [f64; 3] },
}

impl fmt::Display for JetProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetProvenance::Analytic => write!(f, "analytic"),
            JetProvenance::FiniteDifference { steps } => {
                write!(f, "fd(order4+richardson, steps {:?})", steps)
            }
        }
    }
}

/// A symmetric (0,2)-tensor field given by its jets in chart coordinates.
pub trait SymField: Send + Sync {
    fn dim(&self) -> usize;

    /// Highest derivative order the field can supply.
    fn max_order(&self) -> usize;

    fn jet(&self, x: &[f64], order: usize) -> Result<SymJet>;

    fn describe(&self) -> String;

    fn provenance(&self) -> JetProvenance {
        JetProvenance::Analytic
    }
}

/// A scalar field given by its jets.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64], order: usize) -> Result<Jet>;
    fn describe(&self) -> String;
}

/// A 1-form field given by the jets of its components.
pub trait CovectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64], order: usize) -> Result<Vec<Jet>>;
}

pub(crate) fn check_order(required: usize, available: usize) -> Result<()> {
    if required > available {
        Err(Error::JetOrder {
            required,
            available,
        })
    } else {
        Ok(())
    }
}

/// Axis-aligned coordinate box; periodic axes accept any coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl Domain {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let periodic = vec![false; lo.len()];
        Domain { lo, hi, periodic }
    }

    pub fn torus(n: usize) -> Self {
        Domain {
            lo: vec![0.0; n],
            hi: vec![2.0 * std::f64::consts::PI; n],
            periodic: vec![true; n],
        }
    }

    pub fn unbounded(n: usize) -> Self {
        Domain::boxed(vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lo.len()
            && x.iter().enumerate().all(|(i, &v)| {
                v.is_finite() && (self.periodic[i] || (v >= self.lo[i] && v <= self.hi[i]))
            })
    }
}

/// A Riemannian metric on a single coordinate patch.
#[derive(Clone)]
pub struct MetricChart {
    pub name: String,
    field: Arc<dyn SymField>,
    pub domain: Domain,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetricChart({}, n={}, {})", self.name, self.dim(), self.provenance())
    }
}

impl MetricChart {
    pub fn new(name: impl Into<String>, field: Arc<dyn SymField>, domain: Domain) -> Self {
        MetricChart {
            name: name.into(),
            field,
            domain,
        }
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn field(&self) -> &Arc<dyn SymField> {
        &self.field
    }

    pub fn provenance(&self) -> JetProvenance {
        self.field.provenance()
    }

    pub fn max_order(&self) -> usize {
        self.field.max_order()
    }

    pub fn describe(&self) -> String {
        format!("{} [{}]", self.field.describe(), self.provenance())
    }

    /// The same metric with jets recomputed by finite differences of values.
    pub fn with_fd_jets(&self, steps: [f64; 3]) -> Self {
        MetricChart {
            name: format!("{}+fd", self.name),
            field: Arc::new(FdField::new(self.field.clone(), steps)),
            domain: self.domain.clone(),
        }
    }

    /// `g + t·h` on the same domain.
    pub fn perturbed(&self, h: Arc<dyn SymField>, t: f64) -> Self {
        MetricChart {
            name: self.name.clone(),
            field: Arc::new(SumField::new(self.field.clone(), h, t)),
            domain: self.domain.clone(),
        }
    }

    pub fn metric_jet(&self, x: &[f64], order: usize) -> Result<SymJet> {
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        check_order(order, self.field.max_order())?;
        self.field.jet(x, order)
    }

    pub fn metric_at(&self, x: &[f64]) -> Result<MetricAtPoint> {
        let j = self.metric_jet(x, 0)?;
        metric_from_values(&j, x)
    }

    /// Connection data at `x`; `order` 2 gives Γ and ∂Γ, 3 adds ∂²Γ.
    pub fn geometry(&self, x: &[f64], order: usize) -> Result<PointGeometry> {
        let jet = self.metric_jet(x, order.max(1))?;
        PointGeometry::from_jet(x, jet)
    }
}

fn metric_from_values(j: &SymJet, x: &[f64]) -> Result<MetricAtPoint> {
    MetricAtPoint::new(j.value_matrix()).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::NotPositiveDefinite { point: x.to_vec() },
        other => other,
    })
}

/// `a + t·b`.
pub struct SumField {
    a: Arc<dyn SymField>,
    b: Arc<dyn SymField>,
    t: f64,
}

impl SumField {
    pub fn new(a: Arc<dyn SymField>, b: Arc<dyn SymField>, t: f64) -> Self {
        assert_eq!(a.dim(), b.dim(), "summands of different dimension");
        SumField { a, b, t }
    }
}

impl SymField for SumField {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn max_order(&self) -> usize {
        self.a.max_order().min(self.b.max_order())
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<SymJet> {
        Ok(self.a.jet(x, order)?.axpy(self.t, &self.b.jet(x, order)?))
    }
    fn describe(&self) -> String {
        format!("({}) + {:e}*({})", self.a.describe(), self.t, self.b.describe())
    }
    fn provenance(&self) -> JetProvenance {
        match (self.a.provenance(), self.b.provenance()) {
            (JetProvenance::Analytic, p) => p,
            (p, _) => p,
        }
    }
}

/// `f·T` for a scalar field `f` and tensor field `T`.
pub struct ScalarTimesField {
    f: Arc<dyn ScalarField>,
    t: Arc<dyn SymField>,
}

impl ScalarTimesField {
    pub fn new(f: Arc<dyn ScalarField>, t: Arc<dyn SymField>) -> Self {
        ScalarTimesField { f, t }
    }
}

impl SymField for ScalarTimesField {
    fn dim(&self) -> usize {
        self.t.dim()
    }
    fn max_order(&self) -> usize {
        self.t.max_order()
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<SymJet> {
        let f = self.f.jet(x, order)?;
        let t = self.t.jet(x, order)?;
        Ok(crate::jet::scale_sym(&f, &t))
    }
    fn describe(&self) -> String {
        format!("{} * ({})", self.f.describe(), self.t.describe())
    }
    fn provenance(&self) -> JetProvenance {
        self.t.provenance()
    }
}

/// Default per-order steps for finite-difference jets.
pub const DEFAULT_FD_STEPS: [f64; 3] = [1e-2, 1e-2, 2e-2];

/// Jets of an inner field recomputed from its values with fourth-order
/// central stencils and one Richardson step (h, h/2).
pub struct FdField {
    inner: Arc<dyn SymField>,
    steps: [f64; 3],
}

impl FdField {
    pub fn new(inner: Arc<dyn SymField>, steps: [f64; 3]) -> Self {
        FdField { inner, steps }
    }
}

/// Offsets and weights (unit step) of fourth-order central stencils for the
/// first three derivatives.
fn stencil(mult: usize) -> (&'static [i32], &'static [f64], f64) {
    match mult {
        1 => (&[-2, -1, 1, 2], &[1.0, -8.0, 8.0, -1.0], 12.0),
        2 => (&[-2, -1, 0, 1, 2], &[-1.0, 16.0, -30.0, 16.0, -1.0], 12.0),
        3 => (&[-3, -2, -1, 1, 2, 3], &[1.0, -8.0, 13.0, -13.0, 8.0, -1.0], 8.0),
        _ => unreachable!("stencils exist for orders 1..=3"),
    }
}

/// Mixed partial derivative `∂_axes` of a vector-valued function by a
/// tensor-product stencil with step `h`.
fn fd_partial(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    axes: &[usize],
    h: f64,
    out_len: usize,
) -> Result<Vec<f64>> {
    // group axes by multiplicity
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for &a in axes {
        match groups.iter_mut().find(|(ax, _)| *ax == a) {
            Some(g) => g.1 += 1,
            None => groups.push((a, 1)),
        }
    }
    let sten: Vec<_> = groups.iter().map(|&(_, m)| stencil(m)).collect();
    let mut acc = vec![0.0; out_len];
    let mut idx = vec![0usize; groups.len()];
    let mut y = x.to_vec();
    loop {
        let mut w = 1.0;
        y.copy_from_slice(x);
        for (g, &(ax, _)) in groups.iter().enumerate() {
            let (offs, ws, _) = sten[g];
            y[ax] += offs[idx[g]] as f64 * h;
            w *= ws[idx[g]];
        }
        if w != 0.0 {
            let v = f(&y)?;
            for (a, b) in acc.iter_mut().zip(&v) {
                *a += w * b;
            }
        }
        // odometer
        let mut g = 0;
        loop {
            if g == groups.len() {
                let mut denom = 1.0;
                for (k, &(_, m)) in groups.iter().enumerate() {
                    denom *= sten[k].2 * h.powi(m as i32);
                }
                for a in acc.iter_mut() {
                    *a /= denom;
                }
                return Ok(acc);
            }
            idx[g] += 1;
            if idx[g] < sten[g].0.len() {
                break;
            }
            idx[g] = 0;
            g += 1;
        }
    }
}

fn richardson_partial(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    axes: &[usize],
    h: f64,
    out_len: usize,
) -> Result<Vec<f64>> {
    let coarse = fd_partial(f, x, axes, h, out_len)?;
    let fine = fd_partial(f, x, axes, 0.5 * h, out_len)?;
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(a, b)| (16.0 * a - b) / 15.0)
        .collect())
}

/// Finite-difference jets of a vector-valued function of `n` variables.
/// Returns `(value, d1, d2, d3)` with the derivative index last.
pub fn fd_jets(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    order: usize,
    steps: [f64; 3],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let val = f(x)?;
    let m = val.len();
    let mut d1 = vec![0.0; if order >= 1 { m * n } else { 0 }];
    let mut d2 = vec![0.0; if order >= 2 { m * n * n } else { 0 }];
    let mut d3 = vec![0.0; if order >= 3 { m * n * n * n } else { 0 }];
    if order >= 1 {
        for p in 0..n {
            let d = richardson_partial(f, x, &[p], steps[0], m)?;
            for c in 0..m {
                d1[c * n + p] = d[c];
            }
        }
    }
    if order >= 2 {
        for p in 0..n {
            for q in p..n {
                let d = richardson_partial(f, x, &[p, q], steps[1], m)?;
                for c in 0..m {
                    d2[(c * n + p) * n + q] = d[c];
                    d2[(c * n + q) * n + p] = d[c];
                }
            }
        }
    }
    if order >= 3 {
        for p in 0..n {
            for q in p..n {
                for r in q..n {
                    let d = richardson_partial(f, x, &[p, q, r], steps[2], m)?;
                    for c in 0..m {
                        for &(a, b, e) in &[(p, q, r), (p, r, q), (q, p, r), (q, r, p), (r, p, q), (r, q, p)] {
                            d3[((c * n + a) * n + b) * n + e] = d[c];
                        }
                    }
                }
            }
        }
    }
    Ok((val, d1, d2, d3))
}

impl SymField for FdField {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn max_order(&self) -> usize {
        3
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<SymJet> {
        let n = self.dim();
        let f = |y: &[f64]| -> Result<Vec<f64>> { Ok(self.inner.jet(y, 0)?.val) };
        let (val, d1, d2, d3) = fd_jets(&f, x, order, self.steps)?;
        let mut s = SymJet::zeros(n, order);
        s.val = val;
        s.d1 = d1;
        s.d2 = d2;
        s.d3 = d3;
        Ok(s)
    }
    fn describe(&self) -> String {
        self.inner.describe()
    }
    fn provenance(&self) -> JetProvenance {
        JetProvenance::FiniteDifference { steps: self.steps }
    }
}

/// Levi-Civita connection at a point. `gamma[(k*n+i)*n+j] = Γ^k_ij`,
/// `dgamma[((k*n+i)*n+j)*n+p] = ∂_p Γ^k_ij`, `ddgamma` adds a trailing `q`.
#[derive(Debug, Clone)]
pub struct Connection {
    pub n: usize,
    pub gamma: Vec<f64>,
    pub dgamma: Vec<f64>,
    pub ddgamma: Option<Vec<f64>>,
}

impl Connection {
    #[inline]
    pub fn g(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn dg(&self, k: usize, i: usize, j: usize, p: usize) -> f64 {
        let n = self.n;
        self.dgamma[((k * n + i) * n + j) * n + p]
    }

    #[inline]
    pub fn ddg(&self, k: usize, i: usize, j: usize, p: usize, q: usize) -> f64 {
        let n = self.n;
        self.ddgamma.as_ref().expect("second derivatives of the connection")
            [(((k * n + i) * n + j) * n + p) * n + q]
    }
}

/// Metric jets, metric and connection at one point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub x: Vec<f64>,
    pub jet: SymJet,
    pub metric: MetricAtPoint,
    pub conn: Connection,
}

#[inline]
fn i4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

impl PointGeometry {
    pub fn from_jet(x: &[f64], jet: SymJet) -> Result<Self> {
        let metric = metric_from_values(&jet, x)?;
        let conn = connection(&jet, &metric);
        Ok(PointGeometry {
            x: x.to_vec(),
            jet,
            metric,
            conn,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Fully covariant Riemann array `rm[((i*n+j)*n+k)*n+l] = R((∂_i,∂_j),(∂_k,∂_l))`
    /// as a double form: `g(R(∂_i,∂_j)∂_l, ∂_k)`.
    pub fn riemann_array(&self) -> Result<Vec<f64>> {
        check_order(2, self.jet.order)?;
        let n = self.dim();
        let c = &self.conn;
        let g = self.metric.g();
        // R^a_{ijl}
        let mut rup = vec![0.0; n * n * n * n];
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        let mut v = c.dg(a, j, l, i) - c.dg(a, i, l, j);
                        for m in 0..n {
                            v += c.g(a, i, m) * c.g(m, j, l) - c.g(a, j, m) * c.g(m, i, l);
                        }
                        rup[i4(n, a, i, j, l)] = v;
                    }
                }
            }
        }
        let mut rm = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut v = 0.0;
                        for a in 0..n {
                            v += g[(k, a)] * rup[i4(n, a, i, j, l)];
                        }
                        rm[i4(n, i, j, k, l)] = v;
                    }
                }
            }
        }
        Ok(rm)
    }

    pub fn curvature(&self) -> Result<CurvatureBundle> {
        let n = self.dim();
        let rm = self.riemann_array()?;
        let r = DoubleForm::from_four_index(n, &rm);
        let ric = r.contract(&self.metric)?;
        let kappa = ric.contract(&self.metric)?.scalar_value();
        let nabla_r = if self.conn.ddgamma.is_some() {
            Some(self.nabla_riemann(&rm))
        } else {
            None
        };
        Ok(CurvatureBundle {
            point: self.x.clone(),
            n,
            riemann: rm,
            r,
            ric,
            kappa,
            nabla_r,
        })
    }

    /// `∇_m R` as one (2,2) double form per coordinate direction `m`.
    fn nabla_riemann(&self, rm: &[f64]) -> Vec<DoubleForm> {
        let n = self.dim();
        let c = &self.conn;
        let g = self.metric.g();
        let mut out = Vec::with_capacity(n);
        // ∂_m R^a_{ijl}
        for m in 0..n {
            let mut drup = vec![0.0; n * n * n * n];
            for a in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            let mut v = c.ddg(a, j, l, i, m) - c.ddg(a, i, l, j, m);
                            for b in 0..n {
                                v += c.dg(a, i, b, m) * c.g(b, j, l) + c.g(a, i, b) * c.dg(b, j, l, m)
                                    - c.dg(a, j, b, m) * c.g(b, i, l)
                                    - c.g(a, j, b) * c.dg(b, i, l, m);
                            }
                            drup[i4(n, a, i, j, l)] = v;
                        }
                    }
                }
            }
            // R^a_{ijl} = g^{ak} R_{ij k l}; recover it from rm to form ∂_m of the lowered array
            let gi = self.metric.g_inv();
            let mut dr = vec![0.0; n * n * n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let mut v = 0.0;
                            for a in 0..n {
                                let mut rup = 0.0;
                                for b in 0..n {
                                    rup += gi[(a, b)] * rm[i4(n, i, j, b, l)];
                                }
                                v += self.jet.dg(k, a, m) * rup + g[(k, a)] * drup[i4(n, a, i, j, l)];
                            }
                            dr[i4(n, i, j, k, l)] = v;
                        }
                    }
                }
            }
            let mut cov = vec![0.0; n * n * n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let mut v = dr[i4(n, i, j, k, l)];
                            for e in 0..n {
                                v -= c.g(e, m, i) * rm[i4(n, e, j, k, l)]
                                    + c.g(e, m, j) * rm[i4(n, i, e, k, l)]
                                    + c.g(e, m, k) * rm[i4(n, i, j, e, l)]
                                    + c.g(e, m, l) * rm[i4(n, i, j, k, e)];
                            }
                            cov[i4(n, i, j, k, l)] = v;
                        }
                    }
                }
            }
            out.push(DoubleForm::from_four_index(n, &cov));
        }
        out
    }

    /// First and second covariant derivatives of a symmetric tensor at the point.
    pub fn covariant(&self, h: &SymJet) -> Result<TensorDerivatives> {
        check_order(2, h.order)?;
        check_order(2, self.jet.order)?;
        let n = self.dim();
        let c = &self.conn;
        // ∇_y h_cd
        let mut nab = vec![0.0; n * n * n];
        for y in 0..n {
            for cc in 0..n {
                for d in 0..n {
                    let mut v = h.dg(cc, d, y);
                    for m in 0..n {
                        v -= c.g(m, y, cc) * h.g(m, d) + c.g(m, y, d) * h.g(cc, m);
                    }
                    nab[(y * n + cc) * n + d] = v;
                }
            }
        }
        // ∂_x ∇_y h_cd
        let mut dnab = vec![0.0; n * n * n * n];
        for x in 0..n {
            for y in 0..n {
                for cc in 0..n {
                    for d in 0..n {
                        let mut v = h.ddg(cc, d, y, x);
                        for m in 0..n {
                            v -= c.dg(m, y, cc, x) * h.g(m, d)
                                + c.g(m, y, cc) * h.dg(m, d, x)
                                + c.dg(m, y, d, x) * h.g(cc, m)
                                + c.g(m, y, d) * h.dg(cc, m, x);
                        }
                        dnab[i4(n, x, y, cc, d)] = v;
                    }
                }
            }
        }
        let mut hess = vec![0.0; n * n * n * n];
        for x in 0..n {
            for y in 0..n {
                for cc in 0..n {
                    for d in 0..n {
                        let mut v = dnab[i4(n, x, y, cc, d)];
                        for m in 0..n {
                            v -= c.g(m, x, y) * nab[(m * n + cc) * n + d]
                                + c.g(m, x, cc) * nab[(y * n + m) * n + d]
                                + c.g(m, x, d) * nab[(y * n + cc) * n + m];
                        }
                        hess[i4(n, x, y, cc, d)] = v;
                    }
                }
            }
        }
        Ok(TensorDerivatives {
            n,
            value: h.value_matrix(),
            nabla: nab,
            hess,
        })
    }

    /// Covariant gradient and Hessian of a scalar at the point.
    pub fn scalar_derivatives(&self, f: &Jet) -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
        check_order(2, f.order())?;
        let n = self.dim();
        let grad: Vec<f64> = (0..n).map(|i| f.grad(i)).collect();
        let hess = DMatrix::from_fn(n, n, |i, j| {
            let mut v = f.hess(i, j);
            for m in 0..n {
                v -= self.conn.g(m, i, j) * grad[m];
            }
            v
        });
        Ok((f.v, grad, hess))
    }

    /// Positive Laplacian `Δf = −g^{ij}∇²_{ij} f`.
    pub fn laplacian(&self, f: &Jet) -> Result<f64> {
        let (_, _, hess) = self.scalar_derivatives(f)?;
        Ok(-(self.metric.g_inv().component_mul(&hess)).sum())
    }

    /// `(δ*ω)_ij = (∇_iω_j + ∇_jω_i)/2` for a 1-form given by component jets.
    pub fn delta_star(&self, omega: &[Jet]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        for w in omega {
            check_order(1, w.order())?;
        }
        let nab = DMatrix::from_fn(n, n, |i, j| {
            let mut v = omega[j].grad(i);
            for m in 0..n {
                v -= self.conn.g(m, i, j) * omega[m].v;
            }
            v
        });
        Ok((&nab + nab.transpose()) * 0.5)
    }

    /// `δω = −g^{ij}∇_iω_j`.
    pub fn covector_divergence(&self, omega: &[Jet]) -> Result<f64> {
        let n = self.dim();
        let gi = self.metric.g_inv();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut v = omega[j].grad(i);
                for m in 0..n {
                    v -= self.conn.g(m, i, j) * omega[m].v;
                }
                acc -= gi[(i, j)] * v;
            }
        }
        Ok(acc)
    }
}

/// Γ, ∂Γ and (at order 3) ∂²Γ from metric jets.
fn connection(jet: &SymJet, metric: &MetricAtPoint) -> Connection {
    let n = jet.n;
    let gi = metric.g_inv();
    let order = jet.order;
    let mut low = vec![0.0; n * n * n]; // Γ_lij
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                low[(l * n + i) * n + j] = 0.5 * (jet.dg(j, l, i) + jet.dg(i, l, j) - jet.dg(i, j, l));
            }
        }
    }
    let mut gamma = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for l in 0..n {
                    v += gi[(k, l)] * low[(l * n + i) * n + j];
                }
                gamma[(k * n + i) * n + j] = v;
            }
        }
    }
    let gam = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
    let mut dgamma = Vec::new();
    if order >= 2 {
        dgamma = vec![0.0; n * n * n * n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                for p in 0..n {
                    for (l, yl) in y.iter_mut().enumerate() {
                        let dlow = 0.5 * (jet.ddg(j, l, i, p) + jet.ddg(i, l, j, p) - jet.ddg(i, j, l, p));
                        let mut v = dlow;
                        for a in 0..n {
                            v -= jet.dg(l, a, p) * gam(a, i, j);
                        }
                        *yl = v;
                    }
                    for k in 0..n {
                        let mut v = 0.0;
                        for l in 0..n {
                            v += gi[(k, l)] * y[l];
                        }
                        dgamma[i4(n, k, i, j, p)] = v;
                    }
                }
            }
        }
    }
    let mut ddgamma = None;
    if order >= 3 {
        let mut dd = vec![0.0; n * n * n * n * n];
        let dgam = |k: usize, i: usize, j: usize, p: usize| dgamma[i4(n, k, i, j, p)];
        let mut y = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                for p in 0..n {
                    for q in p..n {
                        for (l, yl) in y.iter_mut().enumerate() {
                            let ddlow = 0.5
                                * (jet.dddg(j, l, i, p, q) + jet.dddg(i, l, j, p, q)
                                    - jet.dddg(i, j, l, p, q));
                            let mut v = ddlow;
                            for a in 0..n {
                                v -= jet.ddg(l, a, p, q) * gam(a, i, j)
                                    + jet.dg(l, a, p) * dgam(a, i, j, q)
                                    + jet.dg(l, a, q) * dgam(a, i, j, p);
                            }
                            *yl = v;
                        }
                        for k in 0..n {
                            let mut v = 0.0;
                            for l in 0..n {
                                v += gi[(k, l)] * y[l];
                            }
                            dd[i4(n, k, i, j, p) * n + q] = v;
                            dd[i4(n, k, i, j, q) * n + p] = v;
                        }
                    }
                }
            }
        }
        ddgamma = Some(dd);
    }
    Connection {
        n,
        gamma,
        dgamma,
        ddgamma,
    }
}

/// Curvature at a point: the (2,2) form `R`, Ricci form and scalar curvature.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub point: Vec<f64>,
    pub n: usize,
    /// `R((∂_i,∂_j),(∂_k,∂_l))` for all index tuples.
    pub riemann: Vec<f64>,
    pub r: DoubleForm,
    pub ric: DoubleForm,
    pub kappa: f64,
    /// `∇_m R` for each coordinate direction, when third jets were available.
    pub nabla_r: Option<Vec<DoubleForm>>,
}

impl CurvatureBundle {
    #[inline]
    pub fn rm(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.riemann[i4(self.n, i, j, k, l)]
    }

    /// Largest cyclic sum `R(ij,kl) + R(jk,il) + R(ki,jl)` (first Bianchi identity).
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s = self.rm(i, j, k, l) + self.rm(j, k, i, l) + self.rm(k, i, j, l);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Ricci tensor as a matrix.
    pub fn ricci_matrix(&self) -> DMatrix<f64> {
        self.ric.to_matrix()
    }
}

/// `∇h` and `∇²h` of a symmetric tensor at a point.
/// `nabla[(y*n+c)*n+d] = ∇_y h_cd`, `hess[((x*n+y)*n+c)*n+d] = ∇²_{x,y} h_cd`.
#[derive(Debug, Clone)]
pub struct TensorDerivatives {
    pub n: usize,
    pub value: DMatrix<f64>,
    pub nabla: Vec<f64>,
    pub hess: Vec<f64>,
}

impl TensorDerivatives {
    #[inline]
    pub fn nab(&self, y: usize, c: usize, d: usize) -> f64 {
        self.nabla[(y * self.n + c) * self.n + d]
    }

    #[inline]
    pub fn h2(&self, x: usize, y: usize, c: usize, d: usize) -> f64 {
        self.hess[i4(self.n, x, y, c, d)]
    }
}

/// `(δh)_j = −g^{ik}∇_i h_kj`.
pub fn divergence_at(geo: &PointGeometry, d: &TensorDerivatives) -> Vec<f64> {
    let n = geo.dim();
    let gi = geo.metric.g_inv();
    (0..n)
        .map(|j| {
            let mut v = 0.0;
            for i in 0..n {
                for k in 0..n {
                    v -= gi[(i, k)] * d.nab(i, k, j);
                }
            }
            v
        })
        .collect()
}

/// `d tr_g h`, using `∇g = 0`.
pub fn dtrace_at(geo: &PointGeometry, d: &TensorDerivatives) -> Vec<f64> {
    let n = geo.dim();
    let gi = geo.metric.g_inv();
    (0..n)
        .map(|j| {
            let mut v = 0.0;
            for a in 0..n {
                for b in 0..n {
                    v += gi[(a, b)] * d.nab(j, a, b);
                }
            }
            v
        })
        .collect()
}

/// `β^{(2k)} h = δh + (1/(2k)) d tr h`; `k = 1` is the Bianchi operator.
pub fn bianchi_at(geo: &PointGeometry, d: &TensorDerivatives, k: usize) -> Vec<f64> {
    let div = divergence_at(geo, d);
    let dt = dtrace_at(geo, d);
    div.iter()
        .zip(&dt)
        .map(|(a, b)| a + b / (2.0 * k as f64))
        .collect()
}

/// Bochner Laplacian `∇*∇h = −g^{xy}∇²_{x,y}h`.
pub fn bochner_at(geo: &PointGeometry, d: &TensorDerivatives) -> DMatrix<f64> {
    let n = geo.dim();
    let gi = geo.metric.g_inv();
    DMatrix::from_fn(n, n, |c, dd| {
        let mut v = 0.0;
        for x in 0..n {
            for y in 0..n {
                v -= gi[(x, y)] * d.h2(x, y, c, dd);
            }
        }
        v
    })
}

/// `∇² tr_g h` (the Hessian of the trace).
pub fn hessian_trace_at(geo: &PointGeometry, d: &TensorDerivatives) -> DMatrix<f64> {
    let n = geo.dim();
    let gi = geo.metric.g_inv();
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = 0.0;
        for a in 0..n {
            for b in 0..n {
                v += gi[(a, b)] * d.h2(i, j, a, b);
            }
        }
        v
    })
}

/// `∇_i (δh)_j = −g^{ak}∇²_{i,a} h_kj`.
pub fn nabla_divergence_at(geo: &PointGeometry, d: &TensorDerivatives) -> DMatrix<f64> {
    let n = geo.dim();
    let gi = geo.metric.g_inv();
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = 0.0;
        for a in 0..n {
            for k in 0..n {
                v -= gi[(a, k)] * d.h2(i, a, k, j);
            }
        }
        v
    })
}

/// `δ*δh`.
pub fn delta_star_delta_at(geo: &PointGeometry, d: &TensorDerivatives) -> DMatrix<f64> {
    let m = nabla_divergence_at(geo, d);
    (&m + m.transpose()) * 0.5
}

/// `δδh`.
pub fn delta_delta_at(geo: &PointGeometry, d: &TensorDerivatives) -> f64 {
    let m = nabla_divergence_at(geo, d);
    -(geo.metric.g_inv().component_mul(&m)).sum()
}

/// `Δ tr_g h` with the positive Laplacian.
pub fn laplacian_trace_at(geo: &PointGeometry, d: &TensorDerivatives) -> f64 {
    -(geo.metric.g_inv().component_mul(&hessian_trace_at(geo, d))).sum()
}

/// `δ*(β h)` with `β = δ + (1/2) d tr`.
pub fn delta_star_bianchi_at(geo: &PointGeometry, d: &TensorDerivatives) -> DMatrix<f64> {
    let nd = nabla_divergence_at(geo, d);
    let ht = hessian_trace_at(geo, d);
    let m = &nd + &ht * 0.5;
    (&m + m.transpose()) * 0.5
}

/// `(h∘k)_ab = h_ai g^{ij} k_jb`.
pub fn compose(h: &DMatrix<f64>, k: &DMatrix<f64>, m: &MetricAtPoint) -> DMatrix<f64> {
    h * m.g_inv() * k
}

/// `(Rcc h)(x,y) = Σ h(R(x,e_i)y, e_i)`, normalized so that a space form of
/// curvature `μ` gives `μ((tr h)g − h)`.
pub fn rcc_action(bundle: &CurvatureBundle, m: &MetricAtPoint, h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = bundle.n;
    let gi = m.g_inv();
    let hup = gi * h * gi;
    DMatrix::from_fn(n, n, |a, b| {
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += bundle.rm(a, i, b, j) * hup[(i, j)];
            }
        }
        v
    })
}

/// `Δ_L h = ∇*∇h + Ric∘h + h∘Ric − 2 Rcc h`.
pub fn lichnerowicz_at(
    geo: &PointGeometry,
    bundle: &CurvatureBundle,
    d: &TensorDerivatives,
) -> DMatrix<f64> {
    let ric = bundle.ricci_matrix();
    let m = &geo.metric;
    bochner_at(geo, d) + compose(&ric, &d.value, m) + compose(&d.value, &ric, m)
        - rcc_action(bundle, m, &d.value) * 2.0
}

/// `S₂*S₂h` and `S₁S₁*h` for a symmetric 2-tensor.
pub fn s_operators_at(geo: &PointGeometry, d: &TensorDerivatives) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = geo.dim();
    let gi = geo.metric.g_inv();
    let boch = bochner_at(geo, d);
    let s2s2 = DMatrix::from_fn(n, n, |a, b| {
        let mut v = boch[(a, b)];
        for i in 0..n {
            for j in 0..n {
                v -= gi[(i, j)] * (d.h2(i, a, j, b) + d.h2(i, b, j, a));
            }
        }
        v
    });
    let s1s1 = DMatrix::from_fn(n, n, |a, b| {
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v -= gi[(i, j)] * (d.h2(a, i, j, b) + d.h2(b, i, j, a));
            }
        }
        v
    });
    (s2s2, s1s1)
}

/// Pointwise evaluation of the standard operators of a chart on a tensor field.
pub struct FieldAtPoint {
    pub geo: PointGeometry,
    pub bundle: CurvatureBundle,
    pub deriv: TensorDerivatives,
}

impl FieldAtPoint {
    pub fn new(chart: &MetricChart, field: &dyn SymField, x: &[f64]) -> Result<Self> {
        if field.dim() != chart.dim() {
            return Err(Error::DimensionMismatch(field.dim(), chart.dim()));
        }
        check_order(2, field.max_order())?;
        let geo = chart.geometry(x, 2)?;
        let bundle = geo.curvature()?;
        let deriv = geo.covariant(&field.jet(x, 2)?)?;
        Ok(FieldAtPoint { geo, bundle, deriv })
    }
}

// Spec-level entry points.

pub fn christoffel(chart: &MetricChart, x: &[f64]) -> Result<Connection> {
    Ok(chart.geometry(x, 2)?.conn)
}

pub fn riemann(chart: &MetricChart, x: &[f64]) -> Result<CurvatureBundle> {
    chart.geometry(x, 2)?.curvature()
}

pub fn ricci_scalar(bundle: &CurvatureBundle) -> (DoubleForm, f64) {
    (bundle.ric.clone(), bundle.kappa)
}

pub fn covariant_hessian(field: &dyn SymField, chart: &MetricChart, x: &[f64]) -> Result<TensorDerivatives> {
    check_order(2, field.max_order())?;
    chart.geometry(x, 2)?.covariant(&field.jet(x, 2)?)
}

pub fn divergence(field: &dyn SymField, chart: &MetricChart, x: &[f64]) -> Result<Vec<f64>> {
    let geo = chart.geometry(x, 2)?;
    let d = geo.covariant(&field.jet(x, 2)?)?;
    Ok(divergence_at(&geo, &d))
}

pub fn bochner_laplacian(field: &dyn SymField, chart: &MetricChart, x: &[f64]) -> Result<DMatrix<f64>> {
    let geo = chart.geometry(x, 2)?;
    let d = geo.covariant(&field.jet(x, 2)?)?;
    Ok(bochner_at(&geo, &d))
}

pub fn lichnerowicz_laplacian(field: &dyn SymField, chart: &MetricChart, x: &[f64]) -> Result<DMatrix<f64>> {
    let p = FieldAtPoint::new(chart, field, x)?;
    Ok(lichnerowicz_at(&p.geo, &p.bundle, &p.deriv))
}

pub fn bianchi_operator(field: &dyn SymField, chart: &MetricChart, x: &[f64], k: usize) -> Result<Vec<f64>> {
    let geo = chart.geometry(x, 2)?;
    let d = geo.covariant(&field.jet(x, 2)?)?;
    Ok(bianchi_at(&geo, &d, k))
}

pub fn delta_star(omega: &dyn CovectorField, chart: &MetricChart, x: &[f64]) -> Result<DMatrix<f64>> {
    let geo = chart.geometry(x, 1)?;
    geo.delta_star(&omega.jet(x, 1)?)
}

/// `(S₂*S₂ − S₁S₁*)h` at `x`.
pub fn s_operators(field: &dyn SymField, chart: &MetricChart, x: &[f64]) -> Result<DMatrix<f64>> {
    let geo = chart.geometry(x, 2)?;
    let d = geo.covariant(&field.jet(x, 2)?)?;
    let (a, b) = s_operators_at(&geo, &d);
    Ok(a - b)
}

/// Largest `|∇_k g_ij|` recomputed from the connection (metric compatibility).
pub fn metric_compatibility_residual(geo: &PointGeometry) -> f64 {
    let n = geo.dim();
    let mut worst = 0.0f64;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = geo.jet.dg(i, j, k);
                for m in 0..n {
                    v -= geo.conn.g(m, k, i) * geo.jet.g(m, j) + geo.conn.g(m, k, j) * geo.jet.g(i, m);
                }
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}
