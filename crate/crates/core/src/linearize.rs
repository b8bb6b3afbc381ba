//! Linearizations of curvature quantities in a metric direction `h`: the
//! operators `D²` and `F_h`, closed forms for `Ṙ`, `Ṙic`, `κ̇`, `Ṙ^(2k)`,
//! `Ṡ^(2k)`, and a central-difference oracle along `g + t·h`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::chart::{
    bochner_at, compose, delta_delta_at, delta_star_bianchi_at, delta_star_delta_at, divergence_at,
    hessian_trace_at, laplacian_trace_at, lichnerowicz_at, rcc_action, CurvatureBundle, FieldAtPoint,
    MetricChart, PointGeometry, ScalarField, SymField, TensorDerivatives,
};
use crate::combinat::enumerate_multi_indices;
use crate::dform::{DoubleForm, MetricAtPoint};
use crate::error::{Error, Result};
use crate::report::residuals;
use crate::invariants::{
    einstein_residuals, gauss_bonnet_2k, invariant_set, ricci_2k, structure_constants, thorpe_check,
};

/// Generalized eigen-decomposition of `h` with respect to `g`: ascending
/// eigenvalues and a `g`-orthonormal basis (columns), each column's first
/// nonzero component positive.
pub fn h_eigenbasis(h: &DMatrix<f64>, m: &MetricAtPoint) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.dim();
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch(h.nrows(), n));
    }
    let asym = (h - h.transpose()).amax();
    if asym > 1e-12 * h.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let e = m.orthonormal_frame();
    let on = e.transpose() * h * &e;
    let eig = SymmetricEigen::try_new((&on + on.transpose()) * 0.5, 1e-15, 10_000)
        .ok_or_else(|| Error::Eigen("F_h eigen-decomposition".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut basis = DMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (c, &i) in order.iter().enumerate() {
        let mut v = &e * eig.eigenvectors.column(i);
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v = -v;
            }
        }
        basis.set_column(c, &v);
        vals.push(eig.eigenvalues[i]);
    }
    Ok((vals, basis))
}

/// `F_h ω`: in a `g`-orthonormal basis diagonalizing `h`, each coefficient
/// `ω_{IJ}` is multiplied by the sum of the `h`-eigenvalues over `I` and `J`.
pub fn fh_operator(h: &DMatrix<f64>, omega: &DoubleForm, m: &MetricAtPoint) -> Result<DoubleForm> {
    let n = m.dim();
    if omega.dim() != n {
        return Err(Error::DimensionMismatch(omega.dim(), n));
    }
    let (vals, basis) = h_eigenbasis(h, m)?;
    let (r, s) = omega.bidegree();
    let in_basis = omega.change_basis(&basis);
    let rows = enumerate_multi_indices(n, r as isize)?;
    let cols = enumerate_multi_indices(n, s as isize)?;
    let weight = |i: &crate::combinat::MultiIndex| i.as_slice().iter().map(|&a| vals[a]).sum::<f64>();
    let rw: Vec<f64> = rows.iter().map(weight).collect();
    let cw: Vec<f64> = cols.iter().map(weight).collect();
    let coeffs = DMatrix::from_fn(rows.len(), cols.len(), |a, b| (rw[a] + cw[b]) * in_basis.coeffs()[(a, b)]);
    let scaled = DoubleForm::from_coeffs(n, r, s, coeffs)?;
    let inv = basis
        .try_inverse()
        .ok_or_else(|| Error::Eigen("degenerate eigenbasis".into()))?;
    Ok(scaled.change_basis(&inv))
}

/// `D²h` as a `(2,2)` form from the second covariant derivatives of `h`.
pub fn d2_at(d: &TensorDerivatives) -> DoubleForm {
    let n = d.n;
    let h = |a: usize, b: usize, c: usize, e: usize| d.h2(a, b, c, e);
    let mut w = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    w[((i * n + j) * n + k) * n + l] = h(k, i, j, l) + h(i, k, j, l) + h(l, j, i, k)
                        + h(j, l, i, k)
                        - h(k, j, i, l)
                        - h(j, k, i, l)
                        - h(l, i, j, k)
                        - h(i, l, j, k);
                }
            }
        }
    }
    DoubleForm::from_four_index(n, &w)
}

pub fn d2_operator(h: &dyn SymField, chart: &MetricChart, x: &[f64]) -> Result<DoubleForm> {
    let geo = chart.geometry(x, 2)?;
    let d = geo.covariant(&h.jet(x, 2)?)?;
    Ok(d2_at(&d))
}

/// `(ċ_g h)ω`: the derivative of the contraction in the metric direction `h`.
pub fn contraction_derivative(omega: &DoubleForm, h: &DMatrix<f64>, m: &MetricAtPoint) -> Result<DoubleForm> {
    let gi = m.g_inv();
    omega.contract_with_inverse(&(-(gi * h * gi)))
}

/// Everything the closed forms need at one point.
pub struct LinearizationPoint {
    pub geo: PointGeometry,
    pub bundle: CurvatureBundle,
    pub deriv: TensorDerivatives,
}

impl LinearizationPoint {
    pub fn new(chart: &MetricChart, h: &dyn SymField, x: &[f64]) -> Result<Self> {
        let FieldAtPoint { geo, bundle, deriv } = FieldAtPoint::new(chart, h, x)?;
        Ok(LinearizationPoint { geo, bundle, deriv })
    }

    pub fn metric(&self) -> &MetricAtPoint {
        &self.geo.metric
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.deriv.value
    }

    pub fn trace_h(&self) -> f64 {
        (self.metric().g_inv() * self.h()).trace()
    }

    /// `Ṙh = −D²h/4 + F_h(R)/4`.
    pub fn riemann(&self) -> Result<DoubleForm> {
        let f = fh_operator(self.h(), &self.bundle.r, self.metric())?;
        Ok((f - d2_at(&self.deriv)).scaled(0.25))
    }

    /// `Ṙic h = (Δ_L h − 2δ*(β h))/2`.
    pub fn ricci(&self) -> DMatrix<f64> {
        let dl = lichnerowicz_at(&self.geo, &self.bundle, &self.deriv);
        (dl - delta_star_bianchi_at(&self.geo, &self.deriv) * 2.0) * 0.5
    }

    /// `κ̇h = Δ tr h + δδh − ⟨Ric, h⟩`.
    pub fn scalar(&self) -> Result<f64> {
        let ric_h = self.bundle.ric.inner(&DoubleForm::from_bilinear(self.h()), self.metric())?;
        Ok(laplacian_trace_at(&self.geo, &self.deriv) + delta_delta_at(&self.geo, &self.deriv) - ric_h)
    }

    pub fn bochner(&self) -> DMatrix<f64> {
        bochner_at(&self.geo, &self.deriv)
    }

    pub fn hessian_trace(&self) -> DMatrix<f64> {
        hessian_trace_at(&self.geo, &self.deriv)
    }

    pub fn delta_star_delta(&self) -> DMatrix<f64> {
        delta_star_delta_at(&self.geo, &self.deriv)
    }

    pub fn laplacian_trace(&self) -> f64 {
        laplacian_trace_at(&self.geo, &self.deriv)
    }

    pub fn delta_delta(&self) -> f64 {
        delta_delta_at(&self.geo, &self.deriv)
    }

    pub fn rcc(&self) -> DMatrix<f64> {
        rcc_action(&self.bundle, self.metric(), self.h())
    }

    /// `Ric∘h + h∘Ric`.
    pub fn ricci_compose(&self) -> DMatrix<f64> {
        let ric = self.bundle.ricci_matrix();
        compose(&ric, self.h(), self.metric()) + compose(self.h(), &ric, self.metric())
    }

    /// Right side of the first contraction identity for `D²h`.
    pub fn contracted_d2_formula(&self) -> DMatrix<f64> {
        self.bochner() * -2.0 + self.hessian_trace() * 2.0 + self.delta_star_delta() * 4.0 - self.ricci_compose()
            + self.rcc() * 2.0
    }

    /// `c_g Ṙh = (∇*∇h − ∇²tr h − 2δ*δh + Ric∘h + h∘Ric)/2`.
    pub fn contracted_riemann_formula(&self) -> DMatrix<f64> {
        (self.bochner() - self.hessian_trace() - self.delta_star_delta() * 2.0 + self.ricci_compose()) * 0.5
    }

    /// `c²_g Ṙh = Δ tr h + δδh + ⟨Ric, h⟩`.
    pub fn double_contracted_riemann_formula(&self) -> Result<f64> {
        let ric_h = self.bundle.ric.inner(&DoubleForm::from_bilinear(self.h()), self.metric())?;
        Ok(self.laplacian_trace() + self.delta_delta() + ric_h)
    }

    /// Thorpe constant and class residuals; errors off `H_{n,k}`.
    pub fn class_membership(&self, k: usize) -> Result<ClassMembership> {
        let m = self.metric();
        // k = 1 carries no Thorpe condition: μ_1 = 1.
        let (mu_k, thorpe) = if k == 1 { (1.0, 0.0) } else { thorpe_check(&self.bundle.r, m, k)? };
        let set = invariant_set(&self.bundle, m, k)?;
        let er = einstein_residuals(&set, &self.bundle, m)?;
        let membership = ClassMembership {
            mu_k,
            thorpe_residual: thorpe,
            einstein_residual: er.einstein,
            lambda: er.lambda,
        };
        if thorpe > CLASS_TOLERANCE || er.einstein > CLASS_TOLERANCE || mu_k.abs() < 1e-300 {
            return Err(Error::NotInClass(format!(
                "Thorpe residual {thorpe:e}, Einstein residual {:e}, mu_k {mu_k}",
                er.einstein
            )));
        }
        Ok(membership)
    }

    /// The linearized 2k-Ricci tensor on an `H_{n,k}` point.
    pub fn ricci_2k(&self, k: usize) -> Result<DMatrix<f64>> {
        let n = self.metric().dim();
        check_hnk_range(n, k)?;
        let cm = self.class_membership(k)?;
        let sc = structure_constants(n, k)?;
        let (nf, kf) = (n as f64, k as f64);
        let kappa = self.bundle.kappa;
        let g = self.metric().g();
        let tr = self.trace_h();
        let first = (self.bochner() - self.hessian_trace() - self.delta_star_delta() * 2.0) * (kf * (nf - 2.0 * kf) * 0.5);
        let second = g * (kf * (kf - 1.0) * (self.laplacian_trace() + self.delta_delta()));
        let third = g * (-(kf - 1.0) * (kf + (nf - 2.0 * kf) / (nf - 3.0)) * tr * kappa / nf)
            + self.h() * ((kf * (nf - 2.0) + (kf - 1.0) * (nf - 2.0 * kf) / (nf - 3.0)) * kappa / nf);
        let fourth = self.rcc() * ((nf - 2.0 * kf) * (nf - 2.0 * kf - 1.0) / (nf - 3.0));
        Ok((first + second + third - fourth) * (cm.mu_k * sc.c_nk))
    }

    /// `P_g h = ((k−1)κ/(nk(n−3)))h − ((n−2k−1)/(k(n−3)))Rcc h`.
    pub fn potential(&self, k: usize) -> DMatrix<f64> {
        let (nf, kf) = (self.metric().dim() as f64, k as f64);
        self.h() * ((kf - 1.0) * self.bundle.kappa / (nf * kf * (nf - 3.0)))
            - self.rcc() * ((nf - 2.0 * kf - 1.0) / (kf * (nf - 3.0)))
    }

    /// `C^(2k)h = μ_k k(n−2k)C_{n,k}(∇*∇h/2 + P_g h)` for `h` in `I_g`.
    pub fn c2k(&self, k: usize) -> Result<DMatrix<f64>> {
        let n = self.metric().dim();
        check_hnk_range(n, k)?;
        self.require_tt()?;
        let cm = self.class_membership(k)?;
        let sc = structure_constants(n, k)?;
        let kf = k as f64;
        Ok((self.bochner() * 0.5 + self.potential(k)) * (cm.mu_k * kf * (n as f64 - 2.0 * kf) * sc.c_nk))
    }

    fn require_tt(&self) -> Result<()> {
        let scale = self.h().norm().max(1e-300);
        let tr = self.trace_h().abs() / scale;
        let div: f64 = divergence_at(&self.geo, &self.deriv).iter().map(|v| v * v).sum::<f64>().sqrt() / scale;
        if tr > TT_TOLERANCE || div > TT_TOLERANCE {
            return Err(Error::NotTransverseTraceless(format!(
                "relative trace {tr:e}, relative divergence {div:e}"
            )));
        }
        Ok(())
    }

    /// `Ṡ^(2k)h = D_{n,k}μ_k(Δ tr h + δδh − (κ/n) tr h)` on an `H_{n,k}` point.
    /// `k = 1` is accepted on Einstein points and gives `κ̇/2`.
    pub fn gauss_bonnet_2k(&self, k: usize) -> Result<f64> {
        let n = self.metric().dim();
        if k != 1 {
            check_hnk_range(n, k)?;
        }
        let cm = self.class_membership(k)?;
        let sc = structure_constants(n, k)?;
        Ok(sc.d_nk
            * cm.mu_k
            * (self.laplacian_trace() + self.delta_delta() - self.bundle.kappa / n as f64 * self.trace_h()))
    }
}

fn check_hnk_range(n: usize, k: usize) -> Result<()> {
    if k < 2 || 2 * k >= n || n < 5 {
        return Err(Error::Parameter(format!(
            "class H(n,k) formulas need n >= 5 and 2 <= k < n/2 (n={n}, k={k})"
        )));
    }
    Ok(())
}

/// Residual threshold for the Thorpe and Einstein conditions.
pub const CLASS_TOLERANCE: f64 = 1e-6;
/// Relative trace/divergence threshold for membership in `I_g`.
pub const TT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct ClassMembership {
    pub mu_k: f64,
    pub thorpe_residual: f64,
    pub einstein_residual: f64,
    pub lambda: f64,
}

pub fn riemann_linearization_closed(h: &dyn SymField, chart: &MetricChart, x: &[f64]) -> Result<DoubleForm> {
    LinearizationPoint::new(chart, h, x)?.riemann()
}

pub fn ricci_linearization_closed(h: &dyn SymField, chart: &MetricChart, x: &[f64]) -> Result<DMatrix<f64>> {
    Ok(LinearizationPoint::new(chart, h, x)?.ricci())
}

pub fn scalar_linearization_closed(h: &dyn SymField, chart: &MetricChart, x: &[f64]) -> Result<f64> {
    LinearizationPoint::new(chart, h, x)?.scalar()
}

pub fn ricci2k_linearization_closed(h: &dyn SymField, chart: &MetricChart, x: &[f64], k: usize) -> Result<DMatrix<f64>> {
    LinearizationPoint::new(chart, h, x)?.ricci_2k(k)
}

pub fn c2k_operator(h: &dyn SymField, chart: &MetricChart, x: &[f64], k: usize) -> Result<DMatrix<f64>> {
    LinearizationPoint::new(chart, h, x)?.c2k(k)
}

pub fn gb2k_linearization_closed(h: &dyn SymField, chart: &MetricChart, x: &[f64], k: usize) -> Result<f64> {
    LinearizationPoint::new(chart, h, x)?.gauss_bonnet_2k(k)
}

/// `D′_{n,k}μ_k(Δf − κ/(n−1)·f)`: the linearized `S^(2k)` along `f·g`.
pub fn conformal_operator(f: &dyn ScalarField, chart: &MetricChart, x: &[f64], k: usize) -> Result<f64> {
    let n = chart.dim();
    check_hnk_range(n, k)?;
    let geo = chart.geometry(x, 2)?;
    let bundle = geo.curvature()?;
    let (mu_k, thorpe) = thorpe_check(&bundle.r, &geo.metric, k)?;
    let set = invariant_set(&bundle, &geo.metric, k)?;
    let er = einstein_residuals(&set, &bundle, &geo.metric)?;
    if thorpe > CLASS_TOLERANCE || er.einstein > CLASS_TOLERANCE {
        return Err(Error::NotInClass(format!(
            "Thorpe residual {thorpe:e}, Einstein residual {:e}",
            er.einstein
        )));
    }
    let fj = f.jet(x, 2)?;
    let lap = geo.laplacian(&fj)?;
    let sc = structure_constants(n, k)?;
    Ok(sc.dp_nk * mu_k * (lap - bundle.kappa / (n as f64 - 1.0) * fj.v))
}

/// The quantity differentiated by [`fd_linearize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    /// Coefficients of the `(2,2)` curvature form.
    Riemann,
    /// Ricci tensor components.
    Ricci,
    Scalar,
    /// `R^(2k)` components.
    Ricci2k(usize),
    /// `S^(2k)`.
    GaussBonnet2k(usize),
}

impl Invariant {
    pub fn evaluate(self, chart: &MetricChart, x: &[f64]) -> Result<Vec<f64>> {
        let geo = chart.geometry(x, 2)?;
        let b = geo.curvature()?;
        Ok(match self {
            Invariant::Riemann => b.r.as_slice().to_vec(),
            Invariant::Ricci => b.ric.as_slice().to_vec(),
            Invariant::Scalar => vec![b.kappa],
            Invariant::Ricci2k(k) => ricci_2k(&b.r, &geo.metric, k)?.as_slice().to_vec(),
            Invariant::GaussBonnet2k(k) => vec![gauss_bonnet_2k(&b.r, &geo.metric, k)?],
        })
    }
}

#[derive(Clone)]
pub struct LinearizationRequest {
    pub chart: MetricChart,
    pub h: Arc<dyn SymField>,
    pub point: Vec<f64>,
    pub invariant: Invariant,
    pub steps: Vec<f64>,
}

/// Default step schedule for the central-difference oracle.
pub const DEFAULT_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone)]
pub struct FdResult {
    pub steps: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
    /// Steps at which `g ± t·h` left the positive-definite cone.
    pub rejected: Vec<f64>,
    /// Richardson combination of the two smallest accepted steps.
    pub richardson: Vec<f64>,
    /// Observed order from three accepted steps (`None` when the differences
    /// are at roundoff level or fewer than three steps were accepted).
    pub order: Option<f64>,
}

impl FdResult {
    /// Absolute and relative distance of the Richardson limit from a closed form.
    pub fn residual(&self, closed: &[f64]) -> (f64, f64) {
        residuals(&self.richardson, closed)
    }

    /// Estimate at the smallest accepted step.
    pub fn finest(&self) -> &[f64] {
        self.estimates.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central differences `(B(g+th) − B(g−th))/(2t)` of a vector-valued invariant.
pub fn fd_derivative(
    chart: &MetricChart,
    h: &Arc<dyn SymField>,
    steps: &[f64],
    eval: &dyn Fn(&MetricChart) -> Result<Vec<f64>>,
) -> Result<FdResult> {
    if steps.is_empty() || steps.iter().any(|t| !(*t > 0.0)) || steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::StepSchedule);
    }
    let mut accepted = Vec::new();
    let mut estimates = Vec::new();
    let mut rejected = Vec::new();
    let mut value_scale = 0.0f64;
    for &t in steps {
        let plus = eval(&chart.perturbed(h.clone(), t));
        let minus = eval(&chart.perturbed(h.clone(), -t));
        match (plus, minus) {
            (Ok(p), Ok(m)) => {
                accepted.push(t);
                value_scale = value_scale.max(l2(&p)).max(l2(&m));
                estimates.push(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * t)).collect::<Vec<f64>>());
            }
            (Err(Error::NotPositiveDefinite { .. }), _) | (_, Err(Error::NotPositiveDefinite { .. })) => {
                rejected.push(t)
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    if estimates.is_empty() {
        return Err(Error::NotPositiveDefinite { point: Vec::new() });
    }
    let len = estimates.len();
    let richardson = if len >= 2 {
        let q2 = (accepted[len - 2] / accepted[len - 1]).powi(2);
        estimates[len - 1]
            .iter()
            .zip(&estimates[len - 2])
            .map(|(f, c)| (q2 * f - c) / (q2 - 1.0))
            .collect()
    } else {
        estimates[0].clone()
    };
    let order = if len >= 3 {
        let d = |a: &[f64], b: &[f64]| l2(&a.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
        let d1 = d(&estimates[0], &estimates[1]);
        let d2 = d(&estimates[1], &estimates[2]);
        let scale = l2(&estimates[2]).max(1e-300);
        // cancellation error of the finest difference quotient
        let noise = 4.0 * f64::EPSILON * value_scale / accepted[2];
        let q = accepted[0] / accepted[1];
        let q2 = accepted[1] / accepted[2];
        if d1 > 1e-12 * scale && d2 > noise && (q - q2).abs() < 1e-9 * q {
            Some((d1 / d2).ln() / q.ln())
        } else {
            None
        }
    } else {
        None
    };
    Ok(FdResult {
        steps: accepted,
        estimates,
        rejected,
        richardson,
        order,
    })
}

pub fn fd_linearize(req: &LinearizationRequest) -> Result<FdResult> {
    let x = req.point.clone();
    let inv = req.invariant;
    fd_derivative(&req.chart, &req.h, &req.steps, &move |c: &MetricChart| inv.evaluate(c, &x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::riemann;
    use crate::models::{
        perturbed_torus, space_form, tt_field, ChartStyle, ConstantField, TrigScalar, TrigTensorField,
    };
    use crate::sampling::{random_metric, random_orthonormal_frame, random_symmetric, rng_from_seed};
    use approx::assert_relative_eq;

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        residuals(a, b).1
    }

    #[test]
    fn fh_basic_cases() {
        let mut rng = rng_from_seed(2);
        let m = random_metric(4, &mut rng);
        for r in 0..=3 {
            let w = DoubleForm::random(4, r, r, &mut rng).unwrap();
            let f = fh_operator(m.g(), &w, &m).unwrap();
            assert!((&f - &w.scaled(2.0 * r as f64)).coord_norm() < 1e-11 * w.coord_norm().max(1.0));
        }
        let e = MetricAtPoint::euclidean(3);
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 5.0, 7.0]));
        let w = DoubleForm::from_fn(3, 2, 2, |i, j| if i.as_slice() == [0, 1] && j.as_slice() == [0, 1] { 1.0 } else { 0.0 }).unwrap();
        let f = fh_operator(&h, &w, &e).unwrap();
        assert_relative_eq!(f.get(&[0, 1], &[0, 1]), 14.0, epsilon = 1e-12);
    }

    #[test]
    fn fh_is_the_derivation_and_basis_independent() {
        let mut rng = rng_from_seed(3);
        let m = random_metric(4, &mut rng);
        let h = random_symmetric(4, &mut rng);
        let w = DoubleForm::random(4, 1, 1, &mut rng).unwrap();
        let f = fh_operator(&h, &w, &m).unwrap().to_matrix();
        let gi = m.g_inv();
        let oracle = &h * gi * w.to_matrix() + w.to_matrix() * gi * &h;
        assert!((f - oracle).amax() < 1e-11);
        // a g-orthogonal change of frame applied to all inputs
        let q = random_orthonormal_frame(&m, &mut rng);
        let w2 = DoubleForm::random(4, 2, 2, &mut rng).unwrap();
        let direct = fh_operator(&h, &w2, &m).unwrap().change_basis(&q);
        let m_q = MetricAtPoint::new(q.transpose() * m.g() * &q).unwrap();
        let moved = fh_operator(&(q.transpose() * &h * &q), &w2.change_basis(&q), &m_q).unwrap();
        assert!((&direct - &moved).coord_norm() < 1e-10 * direct.coord_norm());
    }

    #[test]
    fn contraction_derivative_identities() {
        let mut rng = rng_from_seed(4);
        let c = perturbed_torus(5, 3, 0.3).unwrap();
        let x = [0.3, 1.0, 2.0, 4.0, 5.0];
        let b = riemann(&c, &x).unwrap();
        let m = c.metric_at(&x).unwrap();
        let h = random_symmetric(5, &mut rng);
        let g2 = m.as_form().power(2).unwrap().scaled(0.5);
        let lhs = contraction_derivative(&g2, &h, &m).unwrap().to_matrix();
        let tr = (m.g_inv() * &h).trace();
        assert!((lhs - (&h - m.g() * tr)).amax() < 1e-12);
        let lhs = contraction_derivative(&b.r, &h, &m).unwrap().to_matrix();
        assert!((lhs + rcc_action(&b, &m, &h)).amax() < 1e-10);
    }

    #[test]
    fn contraction_lemma_items_on_random_metric() {
        let c = perturbed_torus(5, 8, 0.3).unwrap();
        let h = TrigTensorField::random_periodic(5, 2, 1.0, 3);
        let x = [0.5, 1.5, 2.5, 3.5, 4.5];
        let p = LinearizationPoint::new(&c, &h, &x).unwrap();
        let m = p.metric();
        let d2 = d2_at(&p.deriv);
        let c1 = d2.contract(m).unwrap().to_matrix();
        assert!(rel(c1.as_slice(), p.contracted_d2_formula().as_slice()) < 1e-10);
        let c2 = d2.contract_n(2, m).unwrap().scalar_value();
        let rhs = -4.0 * p.laplacian_trace() - 4.0 * p.delta_delta();
        assert_relative_eq!(c2, rhs, max_relative = 1e-10);
        let f = fh_operator(p.h(), &p.bundle.r, m).unwrap();
        let item3 = p.ricci_compose() + p.rcc() * 2.0;
        assert!(rel(f.contract(m).unwrap().to_matrix().as_slice(), item3.as_slice()) < 1e-10);
        let ric_h = p.bundle.ric.inner(&DoubleForm::from_bilinear(p.h()), m).unwrap();
        assert_relative_eq!(f.contract_n(2, m).unwrap().scalar_value(), 4.0 * ric_h, max_relative = 1e-10);
        let rdot = p.riemann().unwrap();
        let qq = rdot.contract(m).unwrap().to_matrix();
        assert!(rel(qq.as_slice(), p.contracted_riemann_formula().as_slice()) < 1e-10);
        assert_relative_eq!(
            rdot.contract_n(2, m).unwrap().scalar_value(),
            p.double_contracted_riemann_formula().unwrap(),
            max_relative = 1e-10
        );
        // c(Ṙh) + (ċh)R = Ṙic h
        let lhs = qq + contraction_derivative(&p.bundle.r, p.h(), m).unwrap().to_matrix();
        assert!(rel(lhs.as_slice(), p.ricci().as_slice()) < 1e-10);
    }

    #[test]
    fn closed_forms_match_finite_differences() {
        let c = perturbed_torus(4, 5, 0.2).unwrap();
        let h: Arc<dyn SymField> = Arc::new(TrigTensorField::random_periodic(4, 6, 1.0, 2));
        let x = vec![0.4, 1.2, 2.2, 3.1];
        let p = LinearizationPoint::new(&c, h.as_ref(), &x).unwrap();
        for (inv, closed) in [
            (Invariant::Riemann, p.riemann().unwrap().as_slice().to_vec()),
            (Invariant::Ricci, p.ricci().as_slice().to_vec()),
            (Invariant::Scalar, vec![p.scalar().unwrap()]),
        ] {
            let req = LinearizationRequest {
                chart: c.clone(),
                h: h.clone(),
                point: x.clone(),
                invariant: inv,
                steps: DEFAULT_STEPS.to_vec(),
            };
            let fd = fd_linearize(&req).unwrap();
            assert!(rel(&fd.richardson, &closed) < 1e-7, "{inv:?} {}", rel(&fd.richardson, &closed));
            let order = fd.order.unwrap();
            assert!((1.8..2.2).contains(&order), "{order}");
        }
    }

    #[test]
    fn scaling_and_linear_invariants() {
        // κ(cg) = κ(g)/c gives κ̇(g) = −κ
        let c = space_form(5, 1.0, ChartStyle::Stereographic).unwrap();
        let x = vec![0.1, 0.2, -0.1, 0.0, 0.3];
        let g: Arc<dyn SymField> = c.field().clone();
        let fd = fd_derivative(&c, &g, &DEFAULT_STEPS, &|ch| Invariant::Scalar.evaluate(ch, &x)).unwrap();
        assert_relative_eq!(fd.richardson[0], -20.0, max_relative = 1e-8);
        assert_relative_eq!(scalar_linearization_closed(g.as_ref(), &c, &x).unwrap(), -20.0, max_relative = 1e-10);
        // trace of the metric against δ is linear: exact at any step
        let flat = space_form(3, 0.0, ChartStyle::Euclidean).unwrap();
        let h: Arc<dyn SymField> = Arc::new(ConstantField::new(&DMatrix::from_diagonal_element(3, 3, 0.5)));
        let fd = fd_derivative(&flat, &h, &DEFAULT_STEPS, &|ch| {
            Ok(vec![ch.metric_jet(&[0.0; 3], 0)?.value_matrix().trace()])
        })
        .unwrap();
        for e in &fd.estimates {
            assert!((e[0] - 1.5).abs() < 1e-10);
        }
        assert!(fd.order.is_none());
        assert!(matches!(
            fd_derivative(&flat, &h, &[1e-3, 1e-2], &|_| Ok(vec![0.0])),
            Err(Error::StepSchedule)
        ));
    }

    #[test]
    fn higher_order_closed_forms_on_space_forms() {
        for (n, mu, k) in [(5, 1.0, 2), (7, -1.0, 2)] {
            let c = space_form(n, mu, ChartStyle::for_curvature(mu)).unwrap();
            let h = tt_field(n, mu, 17, 2);
            let x: Vec<f64> = (0..n).map(|i| 0.04 * i as f64 - 0.1).collect();
            let p = LinearizationPoint::new(&c, h.as_ref(), &x).unwrap();
            let lam = p.class_membership(k).unwrap().lambda;
            let r2k = p.ricci_2k(k).unwrap();
            let c2k = p.c2k(k).unwrap();
            assert!(rel((r2k - p.h() * lam).as_slice(), c2k.as_slice()) < 1e-10);
            // P_g h = μh for trace-free h
            assert!(rel(p.potential(k).as_slice(), (p.h() * mu).as_slice()) < 1e-10);
        }
        let c = perturbed_torus(5, 1, 0.3).unwrap();
        let h = TrigTensorField::random_periodic(5, 2, 1.0, 2);
        let p = LinearizationPoint::new(&c, &h, &[1.0; 5]).unwrap();
        assert!(matches!(p.ricci_2k(2), Err(Error::NotInClass(_))));
        let s = space_form(5, 1.0, ChartStyle::Stereographic).unwrap();
        let p = LinearizationPoint::new(&s, &h, &[0.1; 5]).unwrap();
        assert!(matches!(p.c2k(2), Err(Error::NotTransverseTraceless(_))));
    }

    #[test]
    fn conformal_reduction() {
        let c = space_form(5, 1.0, ChartStyle::Stereographic).unwrap();
        let f = Arc::new(TrigScalar::random(5, 3, 0.5, 2));
        let fg = crate::models::scalar_times_metric(f.clone(), &c);
        let x = [0.1, -0.2, 0.3, 0.0, 0.1];
        let general = gb2k_linearization_closed(fg.as_ref(), &c, &x, 2).unwrap();
        let direct = conformal_operator(f.as_ref(), &c, &x, 2).unwrap();
        assert_relative_eq!(general, direct, max_relative = 1e-10);
    }

    fn fd_of(c: &MetricChart, h: &Arc<dyn SymField>, x: &[f64], inv: Invariant) -> FdResult {
        fd_linearize(&LinearizationRequest {
            chart: c.clone(),
            h: h.clone(),
            point: x.to_vec(),
            invariant: inv,
            steps: DEFAULT_STEPS.to_vec(),
        })
        .unwrap()
    }

    #[test]
    fn higher_order_closed_forms_match_finite_differences() {
        for (n, mu, k) in [(5, 1.0, 2), (7, 1.0, 3), (7, -1.0, 2)] {
            let c = space_form(n, mu, ChartStyle::for_curvature(mu)).unwrap();
            let x: Vec<f64> = (0..n).map(|i| 0.03 * i as f64 - 0.08).collect();
            let tt = tt_field(n, mu, 5, 2);
            let rough: Arc<dyn SymField> = Arc::new(TrigTensorField::random_smooth(n, 9, 0.5, 2, 1.0));
            for h in [tt, rough, c.field().clone()] {
                let p = LinearizationPoint::new(&c, h.as_ref(), &x).unwrap();
                let closed = p.ricci_2k(k).unwrap();
                let fd = fd_of(&c, &h, &x, Invariant::Ricci2k(k));
                assert!(fd.residual(closed.as_slice()).1 < 1e-6, "{n} {k} {:?}", fd.residual(closed.as_slice()));
                let closed = p.gauss_bonnet_2k(k).unwrap();
                let fd = fd_of(&c, &h, &x, Invariant::GaussBonnet2k(k));
                // Ṡ vanishes on TT directions: compare absolutely against the scale of S
                let scale = gauss_bonnet_2k(&p.bundle.r, p.metric(), k).unwrap().abs();
                assert!(fd.residual(&[closed]).0 < 1e-6 * scale, "{n} {k} {:?}", fd.residual(&[closed]));
            }
        }
    }

    #[test]
    fn first_order_gauss_bonnet_is_half_scalar_variation() {
        let c = space_form(4, 1.0, ChartStyle::Stereographic).unwrap();
        let h = TrigTensorField::random_smooth(4, 4, 0.5, 2, 1.0);
        let p = LinearizationPoint::new(&c, &h, &[0.1, 0.0, -0.2, 0.3]).unwrap();
        assert_relative_eq!(p.gauss_bonnet_2k(1).unwrap(), 0.5 * p.scalar().unwrap(), max_relative = 1e-10);
    }

    #[test]
    fn alpha_reproduces_the_general_restricted_operator() {
        // Ṙ^(2k)h − λh against the display with a single (tr h)g coefficient α(n,k),
        // on directions with nonzero trace.
        for (n, mu, k) in [(5, 1.0, 2), (7, -1.0, 2), (7, 1.0, 3)] {
            let c = space_form(n, mu, ChartStyle::for_curvature(mu)).unwrap();
            let h = TrigTensorField::random_smooth(n, 21, 0.7, 3, 1.0);
            let x: Vec<f64> = (0..n).map(|i| 0.02 * i as f64).collect();
            let p = LinearizationPoint::new(&c, &h, &x).unwrap();
            let cm = p.class_membership(k).unwrap();
            let lhs = p.ricci_2k(k).unwrap() - p.h() * cm.lambda;
            let sc = structure_constants(n, k).unwrap();
            let (nf, kf) = (n as f64, k as f64);
            let kappa = p.bundle.kappa;
            let g = p.metric().g();
            let rhs = ((p.bochner() - p.hessian_trace() - p.delta_star_delta() * 2.0) * (kf * (nf - 2.0 * kf) * 0.5)
                + g * (kf * (kf - 1.0) * (p.laplacian_trace() + p.delta_delta()))
                + (g * (sc.alpha * kappa * p.trace_h()) + p.h() * ((kf - 1.0) * kappa / nf)
                    - p.rcc() * (nf - 2.0 * kf - 1.0))
                    * ((nf - 2.0 * kf) / (nf - 3.0)))
                * (cm.mu_k * sc.c_nk);
            assert!(rel(lhs.as_slice(), rhs.as_slice()) < 1e-10, "{n} {k}");
        }
    }
}
