//! Integral functionals over periodic charts: volume, `∫S^(2k)ν`, the
//! first-variation identity, the volume derivative and `δJ^(2k) = 0`.
//!
//! Integration by parts on the fundamental torus has no boundary terms, so
//! identities stated for closed manifolds apply verbatim.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chart::{CurvatureBundle, MetricChart, ScalarField, SymField};
use crate::combinat::factorial;
use crate::dform::{DoubleForm, MetricAtPoint};
use crate::error::{Error, Result};
use crate::invariants::{gauss_bonnet_2k, invariant_set, ricci_2k};
use crate::linearize::fd_derivative;
use crate::report::{Measure, VerificationReport};

/// Points per work unit; sums are formed per chunk and then in chunk order,
/// so results do not depend on the worker count.
const CHUNK: usize = 256;

/// Env var capping the rayon worker count.
pub const THREADS_ENV: &str = "CURVKIT_THREADS";

/// Installs the global rayon pool sized by `CURVKIT_THREADS` (if set).
/// Later calls, or calls after the pool exists, are no-ops.
pub fn init_threads() {
    if let Some(t) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
}

/// Uniform tensor grid on the fundamental domain of a periodic chart.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    pub n: usize,
    pub res: usize,
    pub lo: Vec<f64>,
    pub spacing: Vec<f64>,
    /// Weight of every node (the cell volume).
    pub weight: f64,
}

impl PeriodicGrid {
    pub fn new(chart: &MetricChart, res: usize) -> Result<Self> {
        let d = &chart.domain;
        if !d.periodic.iter().all(|p| *p) {
            return Err(Error::Parameter(format!("{} is not periodic in every axis", chart.name)));
        }
        if res == 0 {
            return Err(Error::Parameter("grid resolution must be positive".into()));
        }
        let n = chart.dim();
        let spacing: Vec<f64> = (0..n).map(|i| (d.hi[i] - d.lo[i]) / res as f64).collect();
        Ok(PeriodicGrid {
            n,
            res,
            lo: d.lo.clone(),
            weight: spacing.iter().product(),
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.res.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = self.lo[i] + (idx % self.res) as f64 * self.spacing[i];
            idx /= self.res;
        }
        x
    }

    pub fn total_weight(&self) -> f64 {
        self.weight * self.len() as f64
    }

    /// `Σ w·f(x)` over all nodes.
    pub fn sum(&self, f: &(dyn Fn(&[f64]) -> Result<f64> + Sync)) -> Result<f64> {
        let len = self.len();
        let nchunks = len.div_ceil(CHUNK);
        let parts: Vec<f64> = (0..nchunks)
            .into_par_iter()
            .map(|c| {
                let mut s = 0.0;
                for idx in c * CHUNK..((c + 1) * CHUNK).min(len) {
                    s += f(&self.point(idx))?;
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
        Ok(parts.iter().sum::<f64>() * self.weight)
    }

    /// `max f(x)` over all nodes.
    pub fn max(&self, f: &(dyn Fn(&[f64]) -> Result<f64> + Sync)) -> Result<f64> {
        let len = self.len();
        let nchunks = len.div_ceil(CHUNK);
        let parts: Vec<f64> = (0..nchunks)
            .into_par_iter()
            .map(|c| {
                let mut s = 0.0f64;
                for idx in c * CHUNK..((c + 1) * CHUNK).min(len) {
                    s = s.max(f(&self.point(idx))?);
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
        Ok(parts.into_iter().fold(0.0, f64::max))
    }
}

/// `∫ f ν_g`.
pub fn integrate(f: &dyn ScalarField, grid: &PeriodicGrid, chart: &MetricChart) -> Result<f64> {
    grid.sum(&|x| Ok(f.jet(x, 0)?.v * chart.metric_at(x)?.vol_factor()))
}

/// `∫ f(x, g(x)) ν_g` for a pointwise quantity of the metric.
pub fn integrate_with(
    grid: &PeriodicGrid,
    chart: &MetricChart,
    f: &(dyn Fn(&[f64], &MetricAtPoint) -> Result<f64> + Sync),
) -> Result<f64> {
    grid.sum(&|x| {
        let m = chart.metric_at(x)?;
        Ok(f(x, &m)? * m.vol_factor())
    })
}

pub fn volume(grid: &PeriodicGrid, chart: &MetricChart) -> Result<f64> {
    integrate_with(grid, chart, &|_, _| Ok(1.0))
}

/// `F^(2k)(g) = ∫ S^(2k) ν_g`.
pub fn hel_functional(grid: &PeriodicGrid, chart: &MetricChart, k: usize) -> Result<f64> {
    if 2 * k >= chart.dim() {
        return Err(Error::Parameter(format!("functional needs n > 2k (n={}, k={k})", chart.dim())));
    }
    grid.sum(&|x| {
        let geo = chart.geometry(x, 2)?;
        let b = geo.curvature()?;
        Ok(gauss_bonnet_2k(&b.r, &geo.metric, k)? * geo.metric.vol_factor())
    })
}

/// Steps for the derivative of grid functionals along `g + t·h`.
pub const FUNCTIONAL_STEPS: [f64; 2] = [1e-2, 5e-3];

fn ray_derivative(
    chart: &MetricChart,
    h: &Arc<dyn SymField>,
    eval: &(dyn Fn(&MetricChart) -> Result<f64> + Sync),
) -> Result<f64> {
    let fd = fd_derivative(chart, h, &FUNCTIONAL_STEPS, &|c| Ok(vec![eval(c)?]))?;
    if !fd.rejected.is_empty() {
        return Err(Error::NotPositiveDefinite { point: Vec::new() });
    }
    Ok(fd.richardson[0])
}

fn tr_h(h: &DMatrix<f64>, m: &MetricAtPoint) -> f64 {
    (m.g_inv() * h).trace()
}

/// `d/dt vol(g + t·h)` against `½∫ tr_g h ν_g`.
pub fn volume_derivative_check(
    grid: &PeriodicGrid,
    chart: &MetricChart,
    h: Arc<dyn SymField>,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let lhs = ray_derivative(chart, &h, &|c| volume(grid, c))?;
    let rhs = 0.5 * integrate_with(grid, chart, &|x, m| Ok(tr_h(&h.jet(x, 0)?.value_matrix(), m)))?;
    let vol = volume(grid, chart)?;
    // trace-free directions give two zeros; measure against the volume
    let abs = (lhs - rhs).abs();
    Ok(VerificationReport::from_residuals(
        "functional.volume-derivative",
        "liouville",
        &[lhs],
        &[rhs],
        abs,
        abs / vol,
        1e-6,
        Measure::Rel,
    )
    .with_inputs(&format!("{} | {} | res={}", chart.describe(), h.describe(), grid.res))
    .with_note("residual relative to the volume")
    .timed(start))
}

/// Both sides of the first-variation identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSides {
    /// `d/dt F^(2k)(g + t·h)` at `t = 0`.
    pub derivative: f64,
    /// `−½∫⟨J^(2k), h⟩ν_g`.
    pub pairing: f64,
}

pub fn gradient_sides(grid: &PeriodicGrid, chart: &MetricChart, k: usize, h: &Arc<dyn SymField>) -> Result<GradientSides> {
    let derivative = ray_derivative(chart, h, &|c| hel_functional(grid, c, k))?;
    let pairing = -0.5
        * grid.sum(&|x| {
            let geo = chart.geometry(x, 2)?;
            let b = geo.curvature()?;
            let set = invariant_set(&b, &geo.metric, k)?;
            let hv = DoubleForm::from_bilinear(&h.jet(x, 0)?.value_matrix());
            Ok(set.j2k.inner(&hv, &geo.metric)? * geo.metric.vol_factor())
        })?;
    Ok(GradientSides { derivative, pairing })
}

/// Default tolerance of the gradient identity at a given resolution.
pub fn gradient_tolerance(res: usize) -> f64 {
    if res >= 12 {
        3e-3
    } else {
        1e-2
    }
}

/// First variation of `F^(2k)` against `−J^(2k)` under the pairing
/// `(a, h) = ½∫⟨a, h⟩ν_g`.
pub fn gradient_identity_check(
    grid: &PeriodicGrid,
    chart: &MetricChart,
    k: usize,
    h: Arc<dyn SymField>,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let s = gradient_sides(grid, chart, k, &h)?;
    let tol = if k == 1 { 1e-3 } else { gradient_tolerance(grid.res) };
    let mut r = VerificationReport::compare(
        format!("functional.gradient.k{k}"),
        "lovegrad",
        &[s.derivative],
        &[s.pairing],
        tol,
        Measure::Rel,
    );
    // a flat background makes both sides vanish identically
    let scale = hel_scale(grid, chart, k)?;
    if s.derivative.abs().max(s.pairing.abs()) <= 1e-12 * scale.max(1.0) {
        let residual = (s.derivative - s.pairing).abs() / scale.max(1.0);
        r = VerificationReport::bound(format!("functional.gradient.k{k}"), "lovegrad", residual, 1e-12)
            .with_note("both sides vanish; residual relative to |F| + volume");
    }
    Ok(r
        .with_inputs(&format!("{} | {} | res={} k={k}", chart.describe(), h.describe(), grid.res))
        .timed(start))
}

fn hel_scale(grid: &PeriodicGrid, chart: &MetricChart, k: usize) -> Result<f64> {
    Ok(hel_functional(grid, chart, k)?.abs() + volume(grid, chart)?)
}

/// `δR^(2k)` and `dS^(2k)` from the covariant derivative of `R`; their
/// combination `δR^(2k)/(2k−1)! + dS^(2k)` is `δJ^(2k)`.
pub fn lovelock_divergence_parts(bundle: &CurvatureBundle, m: &MetricAtPoint, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let nabla = bundle.nabla_r.as_ref().ok_or(Error::JetOrder {
        required: 3,
        available: 2,
    })?;
    let n = m.dim();
    let rk1 = bundle.r.power(k - 1)?;
    let gi = m.g_inv();
    let mut d_r2k = Vec::with_capacity(n);
    let mut ds = Vec::with_capacity(n);
    for np in nabla {
        let drk = rk1.product(np)?.scaled(k as f64);
        let dr2k = drk.contract_n(2 * k - 1, m)?;
        ds.push(dr2k.contract(m)?.scalar_value() / factorial(2 * k));
        d_r2k.push(dr2k.to_matrix());
    }
    let div = (0..n)
        .map(|j| {
            let mut s = 0.0;
            for p in 0..n {
                for i in 0..n {
                    s -= gi[(p, i)] * d_r2k[p][(i, j)];
                }
            }
            s
        })
        .collect();
    Ok((div, ds))
}

/// `|δ_g J^(2k)|_g` at one point.
pub fn lovelock_divergence_at(bundle: &CurvatureBundle, m: &MetricAtPoint, k: usize) -> Result<f64> {
    let (div, ds) = lovelock_divergence_parts(bundle, m, k)?;
    let f = factorial(2 * k - 1);
    let v = nalgebra::DVector::from_iterator(div.len(), div.iter().zip(&ds).map(|(a, b)| a / f + b));
    Ok((v.transpose() * m.g_inv() * &v)[(0, 0)].max(0.0).sqrt())
}

/// Tolerance of the divergence check for the chart's jet provenance.
pub fn divergence_tolerance(chart: &MetricChart) -> f64 {
    match chart.provenance() {
        crate::chart::JetProvenance::Analytic => 1e-6,
        crate::chart::JetProvenance::FiniteDifference { .. } => 1e-4,
    }
}

/// `max |δ_g J^(2k)|` over the nodes of a grid.
pub fn divergence_free_check(grid: &PeriodicGrid, chart: &MetricChart, k: usize) -> Result<VerificationReport> {
    let start = Instant::now();
    let worst = grid.max(&|x| {
        let geo = chart.geometry(x, 3)?;
        let b = geo.curvature()?;
        lovelock_divergence_at(&b, &geo.metric, k)
    })?;
    Ok(VerificationReport::bound(
        format!("functional.divergence-free.k{k}"),
        "bianchigerlove",
        worst,
        divergence_tolerance(chart),
    )
    .with_inputs(&format!("{} | res={} k={k}", chart.describe(), grid.res))
    .timed(start))
}

/// `max |δR^(2k) + (2k−1)!·dS^(2k)|` over sample points.
pub fn constancy_consequence(chart: &MetricChart, points: &[Vec<f64>], k: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in points {
        let geo = chart.geometry(x, 3)?;
        let b = geo.curvature()?;
        let (div, ds) = lovelock_divergence_parts(&b, &geo.metric, k)?;
        let f = factorial(2 * k - 1);
        for (a, d) in div.iter().zip(&ds) {
            worst = worst.max((a + f * d).abs());
        }
    }
    Ok(worst)
}

/// `R^(2k)` at a point, for callers that need the tensor behind `J^(2k)`.
pub fn ricci_2k_at(chart: &MetricChart, x: &[f64], k: usize) -> Result<DoubleForm> {
    let geo = chart.geometry(x, 2)?;
    let b = geo.curvature()?;
    ricci_2k(&b.r, &geo.metric, k)
}
