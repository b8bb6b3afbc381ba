//! Curvature invariants built from powers of the curvature double form:
//! the 2k-Ricci tensors, 2k-Gauss-Bonnet curvatures, Lovelock tensors,
//! the Thorpe condition, Schouten/Weyl data and hypersurface Newton tensors.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::chart::CurvatureBundle;
use crate::combinat::{factorial, factorial_exact, sort_sign};
use crate::dform::{DoubleForm, MetricAtPoint};
use crate::error::{Error, Result};
use crate::report::{Measure, VerificationReport};

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidDegree { dim: n, degree: 0 });
    }
    if 2 * k > n {
        return Err(Error::DegreeOverflow {
            dim: n,
            r: 2 * k,
            s: 2 * k,
        });
    }
    Ok(())
}

/// Full contraction `c^p ω` of a `(p,p)` form: `p!·Σ C_p(g⁻¹)_{IJ} ω_{IJ}`.
pub fn full_contraction(omega: &DoubleForm, m: &MetricAtPoint) -> Result<f64> {
    let (r, s) = omega.bidegree();
    if r != s {
        return Err(Error::BidegreeMismatch(r, s, s, s));
    }
    Ok(factorial(r) * m.inverse_compound(r).component_mul(omega.coeffs()).sum())
}

/// `R^(2k) = c^{2k−1}(R^k)`.
pub fn ricci_2k(r: &DoubleForm, m: &MetricAtPoint, k: usize) -> Result<DoubleForm> {
    check_k(r.dim(), k)?;
    r.power(k)?.contract_n(2 * k - 1, m)
}

/// `S^(2k) = c^{2k}(R^k)/(2k)!`.
pub fn gauss_bonnet_2k(r: &DoubleForm, m: &MetricAtPoint, k: usize) -> Result<f64> {
    check_k(r.dim(), k)?;
    Ok(full_contraction(&r.power(k)?, m)? / factorial(2 * k))
}

/// `J^(2k) = R^(2k)/(2k−1)! − S^(2k)·g`.
pub fn lovelock_tensor(r2k: &DoubleForm, m: &MetricAtPoint, k: usize, s2k: f64) -> DoubleForm {
    r2k.scaled(1.0 / factorial(2 * k - 1)) - m.as_form().scaled(s2k)
}

/// `R^k` together with its `(2k−1)`-fold and full contractions.
fn power_and_contractions(r: &DoubleForm, m: &MetricAtPoint, k: usize) -> Result<(DoubleForm, f64)> {
    check_k(r.dim(), k)?;
    let rk = r.power(k)?;
    let r2k = rk.contract_n(2 * k - 1, m)?;
    let s2k = r2k.contract(m)?.scalar_value() / factorial(2 * k);
    Ok((r2k, s2k))
}

/// The pointwise invariants of order `k`.
#[derive(Debug, Clone)]
pub struct InvariantSet {
    pub point: Vec<f64>,
    pub k: usize,
    pub r2k: DoubleForm,
    pub s2k: f64,
    pub j2k: DoubleForm,
    /// `(2k)!·S^(2k)/n`, the would-be 2k-Einstein constant.
    pub lambda_est: f64,
    /// `|tr_g R^(2k) − (2k)!·S^(2k)|` with `S^(2k)` from the full contraction.
    pub trace_residual: f64,
}

pub fn invariant_set(bundle: &CurvatureBundle, m: &MetricAtPoint, k: usize) -> Result<InvariantSet> {
    let (r2k, s2k) = power_and_contractions(&bundle.r, m, k)?;
    let s_full = gauss_bonnet_2k(&bundle.r, m, k)?;
    let tr = r2k.inner(&m.as_form(), m)?;
    let f2k = factorial(2 * k);
    Ok(InvariantSet {
        point: bundle.point.clone(),
        k,
        j2k: lovelock_tensor(&r2k, m, k, s2k),
        lambda_est: f2k * s2k / m.dim() as f64,
        trace_residual: (tr - f2k * s_full).abs(),
        r2k,
        s2k,
    })
}

/// Einstein and 2k-Einstein residuals `‖T − λg‖/‖g‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EinsteinResiduals {
    pub einstein: f64,
    pub two_k_einstein: f64,
    pub lambda: f64,
}

pub fn einstein_residuals(set: &InvariantSet, bundle: &CurvatureBundle, m: &MetricAtPoint) -> Result<EinsteinResiduals> {
    let g = m.as_form();
    let gn = g.norm(m);
    let n = m.dim() as f64;
    let ric_dev = &bundle.ric - &g.scaled(bundle.kappa / n);
    let two_k_dev = &set.r2k - &g.scaled(set.lambda_est);
    Ok(EinsteinResiduals {
        einstein: ric_dev.norm(m) / gn,
        two_k_einstein: two_k_dev.norm(m) / gn,
        lambda: set.lambda_est,
    })
}

/// Least-squares fit of `R^{k−1} = μ_k g^{2k−2}`; the residual is the misfit
/// relative to `‖R^{k−1}‖` (zero when both vanish).
pub fn thorpe_check(r: &DoubleForm, m: &MetricAtPoint, k: usize) -> Result<(f64, f64)> {
    let n = r.dim();
    if k < 2 {
        return Err(Error::Parameter(format!("Thorpe condition needs k >= 2, got {k}")));
    }
    if 2 * k - 2 > n {
        return Err(Error::DegreeOverflow {
            dim: n,
            r: 2 * k - 2,
            s: 2 * k - 2,
        });
    }
    let rk = r.power(k - 1)?;
    let gk = m.as_form().power(2 * k - 2)?;
    let mu = rk.inner(&gk, m)? / gk.inner(&gk, m)?;
    let dev = &rk - &gk.scaled(mu);
    let scale = rk.norm(m);
    let residual = if scale == 0.0 { dev.norm(m) } else { dev.norm(m) / scale };
    Ok((mu, residual))
}

/// Closed form `C_{n,k}μ_k((k−1)κg + (n−2k)Ric)` of `R^(2k)` under the Thorpe condition.
pub fn ricci_2k_thorpe_form(bundle: &CurvatureBundle, m: &MetricAtPoint, k: usize, mu_k: f64) -> Result<DoubleForm> {
    let c = structure_constants(m.dim(), k)?.c_nk;
    let kf = k as f64;
    let n = m.dim() as f64;
    Ok((m.as_form().scaled((kf - 1.0) * bundle.kappa) + bundle.ric.scaled(n - 2.0 * kf)).scaled(c * mu_k))
}

/// `S^(2k)` of a metric with constant sectional curvature `μ`:
/// `(n−2)!/(2(n−2k)!)·μ_k·κ`.
pub fn space_form_gauss_bonnet(n: usize, k: usize, mu: f64) -> f64 {
    let mu_k = mu.powi(k as i32 - 1) / 2f64.powi(k as i32 - 1);
    let kappa = (n * (n - 1)) as f64 * mu;
    factorial(n - 2) / (2.0 * factorial(n - 2 * k)) * mu_k * kappa
}

// Lovelock tensor through the generalized Kronecker delta.

/// All sequences of `k` increasing pairs drawn from `avail` without repetition.
fn pair_sequences(avail: &[usize], k: usize) -> Vec<Vec<(usize, usize)>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (ia, &a) in avail.iter().enumerate() {
        for &b in &avail[ia + 1..] {
            let rest: Vec<usize> = avail.iter().copied().filter(|&v| v != a && v != b).collect();
            for mut tail in pair_sequences(&rest, k - 1) {
                tail.insert(0, (a, b));
                out.push(tail);
            }
        }
    }
    out
}

fn pair_rank(a: usize, b: usize, n: usize) -> usize {
    crate::combinat::rank_slice(&[a, b], n)
}

/// `δ^{i i₁…i₂ₖ}_{j j₁…j₂ₖ} R_{i₁i₂}^{j₁j₂}⋯` in an orthonormal frame, with the
/// sum over unordered pairs weighted by `4^k`.
fn kronecker_sum(r_on: &DoubleForm, k: usize) -> DMatrix<f64> {
    let n = r_on.dim();
    let c = r_on.coeffs();
    let weight = 4f64.powi(k as i32);
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&v| v != i).collect();
        for up in pair_sequences(&others, k) {
            let mut useq = vec![i];
            for &(a, b) in &up {
                useq.push(a);
                useq.push(b);
            }
            let (uset, usign) = sort_sign(&useq).expect("distinct");
            let set = uset.as_slice().to_vec();
            for &j in &set {
                let rest: Vec<usize> = set.iter().copied().filter(|&v| v != j).collect();
                for low in pair_sequences(&rest, k) {
                    let mut lseq = vec![j];
                    let mut prod = 1.0;
                    for (&(a, b), &(p, q)) in up.iter().zip(&low) {
                        lseq.push(p);
                        lseq.push(q);
                        prod *= c[(pair_rank(a, b, n), pair_rank(p, q, n))];
                        if prod == 0.0 {
                            break;
                        }
                    }
                    if prod == 0.0 {
                        continue;
                    }
                    let (_, lsign) = sort_sign(&lseq).expect("distinct");
                    out[(i, j)] += (usign * lsign) as f64 * prod;
                }
            }
        }
    }
    out * weight
}

fn d_nk_cache() -> &'static Mutex<HashMap<(usize, usize), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Relative tolerance for the proportionality between the two Lovelock routes.
pub const ROUTE_TOLERANCE: f64 = 1e-8;

/// `d_{n,k}`, calibrated on the unit sphere `R = g²/2` at the identity metric
/// and cached.
pub fn calibrated_d_nk(n: usize, k: usize) -> Result<f64> {
    if 2 * k >= n || k == 0 {
        return Err(Error::Parameter(format!(
            "Lovelock calibration needs 1 <= k < n/2 (n={n}, k={k})"
        )));
    }
    if let Some(d) = d_nk_cache().lock().expect("cache lock").get(&(n, k)) {
        return Ok(*d);
    }
    let m = MetricAtPoint::euclidean(n);
    let r = m.as_form().power(2)?.scaled(0.5);
    let (r2k, s2k) = power_and_contractions(&r, &m, k)?;
    let j = lovelock_tensor(&r2k, &m, k, s2k).to_matrix();
    let raw = kronecker_sum(&r, k);
    let d = j.dot(&raw) / raw.dot(&raw);
    let spread = (&j - &raw * d).norm() / j.norm();
    if !spread.is_finite() || spread > ROUTE_TOLERANCE {
        return Err(Error::Convention(format!(
            "Kronecker route not proportional on the calibration sphere (misfit {spread:e})"
        )));
    }
    d_nk_cache().lock().expect("cache lock").insert((n, k), d);
    Ok(d)
}

/// Lovelock tensor through the Kronecker expansion, with its calibrated `d_{n,k}`.
#[derive(Debug, Clone)]
pub struct KroneckerLovelock {
    /// Coordinate components `L_ij`.
    pub tensor: DMatrix<f64>,
    pub d_nk: f64,
    /// Misfit against `J^(2k)` from the double-form route, relative to `‖J‖`
    /// (absolute when `J` vanishes).
    pub route_misfit: f64,
}

pub fn lovelock_kronecker(r: &DoubleForm, m: &MetricAtPoint, k: usize) -> Result<KroneckerLovelock> {
    let n = r.dim();
    let d = calibrated_d_nk(n, k)?;
    let e = m.orthonormal_frame();
    let r_on = r.change_basis(&e);
    let raw = kronecker_sum(&r_on, k) * d;
    // back to coordinates: T = L T_on Lᵀ with g = L Lᵀ
    let l = m.cholesky_lower();
    let tensor = l * raw * l.transpose();
    let (r2k, s2k) = power_and_contractions(r, m, k)?;
    let j = lovelock_tensor(&r2k, m, k, s2k).to_matrix();
    let diff = (&tensor - &j).norm();
    let scale = j.norm().max(tensor.norm());
    let misfit = if scale > 1e-300 { diff / scale } else { diff };
    if misfit > 1e-6 && scale > 1e-12 {
        return Err(Error::Convention(format!(
            "Kronecker and double-form Lovelock tensors are not proportional with d={d} (misfit {misfit:e})"
        )));
    }
    Ok(KroneckerLovelock {
        tensor,
        d_nk: d,
        route_misfit: misfit,
    })
}

// Conformal data.

#[derive(Debug, Clone)]
pub struct ConformalData {
    pub schouten: DoubleForm,
    pub weyl: DoubleForm,
    /// `σ_1, …, σ_n` of the raised Schouten endomorphism.
    pub sigma: Vec<f64>,
}

pub fn schouten_weyl(bundle: &CurvatureBundle, m: &MetricAtPoint) -> Result<ConformalData> {
    let n = m.dim();
    if n < 3 {
        return Err(Error::Parameter(format!("Schouten tensor needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    let g = m.as_form();
    let a = (&bundle.ric - &g.scaled(bundle.kappa / (2.0 * (nf - 1.0)))).scaled(1.0 / (nf - 2.0));
    let weyl = &bundle.r - &g.product(&a)?;
    let sigma = (1..=n).map(|k| sigma_k(&a, m, k)).collect::<Result<Vec<_>>>()?;
    Ok(ConformalData {
        schouten: a,
        weyl,
        sigma,
    })
}

/// Eigenvalues of `g⁻¹A` for a symmetric `(1,1)` form `A`.
pub fn raised_eigenvalues(a: &DoubleForm, m: &MetricAtPoint) -> Result<Vec<f64>> {
    let e = m.orthonormal_frame();
    let on = e.transpose() * a.to_matrix() * &e;
    let asym = (&on - on.transpose()).amax();
    if asym > 1e-9 * on.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut ev: Vec<f64> = SymmetricEigen::new((&on + on.transpose()) * 0.5).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Elementary symmetric functions `e_0..e_n` of `values`.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (i, &v) in values.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e
}

pub fn sigma_k(a: &DoubleForm, m: &MetricAtPoint, k: usize) -> Result<f64> {
    let ev = raised_eigenvalues(a, m)?;
    if k > ev.len() {
        return Ok(0.0);
    }
    Ok(elementary_symmetric(&ev)[k])
}

/// Sides of the Gauss-Bonnet/σ_k identity.
#[derive(Debug, Clone, Copy)]
pub struct GbSigmaSides {
    pub s2k: f64,
    /// `((n−k)!k!/(n−2k)!)·σ_k(A)`.
    pub sigma_term: f64,
    /// `Σ_{i<k} k!/(i!(k−i)!(n−2k)!)·⟨⋆(g^{n−2k+i}A^i), W^{k−i}⟩`.
    pub weyl_terms: f64,
    pub weyl_norm: f64,
}

pub fn gb_sigma_sides(bundle: &CurvatureBundle, m: &MetricAtPoint, k: usize) -> Result<GbSigmaSides> {
    let n = m.dim();
    check_k(n, k)?;
    let cd = schouten_weyl(bundle, m)?;
    let s2k = gauss_bonnet_2k(&bundle.r, m, k)?;
    let sigma_term = factorial(n - k) * factorial(k) / factorial(n - 2 * k) * sigma_k(&cd.schouten, m, k)?;
    let g = m.as_form();
    let mut weyl_terms = 0.0;
    for i in 0..k {
        let left = g.power(n - 2 * k + i)?.product(&cd.schouten.power(i)?)?.hodge_star(m)?;
        let right = cd.weyl.power(k - i)?;
        let coeff = factorial(k) / (factorial(i) * factorial(k - i) * factorial(n - 2 * k));
        weyl_terms += coeff * left.inner(&right, m)?;
    }
    Ok(GbSigmaSides {
        s2k,
        sigma_term,
        weyl_terms,
        weyl_norm: cd.weyl.norm(m),
    })
}

/// Weyl norms below this count as conformally flat for the σ_k identity.
pub const CONFORMALLY_FLAT_WEYL: f64 = 1e-7;

/// On conformally flat points asserts `S^(2k) = ((n−k)!k!/(n−2k)!)σ_k(A)`;
/// elsewhere reports the residual of the full identity with its Weyl terms.
pub fn gb_sigma_identity(bundle: &CurvatureBundle, m: &MetricAtPoint, k: usize) -> Result<VerificationReport> {
    let sides = gb_sigma_sides(bundle, m, k)?;
    let scale = sides.s2k.abs().max(sides.sigma_term.abs());
    if sides.weyl_norm <= CONFORMALLY_FLAT_WEYL * bundle.r.norm(m).max(1.0) {
        let (abs, rel) = crate::report::residuals(&[sides.s2k], &[sides.sigma_term]);
        let rel = if scale < 1e-12 { abs } else { rel };
        Ok(VerificationReport::from_residuals(
            format!("gb-sigma-k{k}"),
            "gauss-bonnet sigma_k identity (conformally flat)",
            &[sides.s2k],
            &[sides.sigma_term],
            abs,
            rel,
            1e-6,
            Measure::Rel,
        ))
    } else {
        let rhs = sides.sigma_term + sides.weyl_terms;
        let misfit = (sides.s2k - rhs).abs() / scale.max(1e-300);
        Ok(VerificationReport::observation(
            format!("gb-sigma-full-k{k}"),
            "gauss-bonnet sigma_k identity with Weyl terms",
            misfit,
        )
        .with_note(format!(
            "reported, not asserted: S2k={:.6e}, sigma term={:.6e}, Weyl terms={:.6e}",
            sides.s2k, sides.sigma_term, sides.weyl_terms
        )))
    }
}

// Hypersurfaces.

/// Gauss equation `R = A·A/2` for a shape operator given as a bilinear form.
pub fn shape_to_curvature(a: &DMatrix<f64>) -> Result<DoubleForm> {
    let af = DoubleForm::from_bilinear(a);
    Ok(af.product(&af)?.scaled(0.5))
}

/// Newton tensors `P_0 = I`, `P_r = S_r I − P_{r−1}A` for a symmetric matrix in
/// an orthonormal frame.
pub fn newton_tensor(a: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let ev = SymmetricEigen::new(a.clone()).eigenvalues;
    let s = elementary_symmetric(ev.as_slice());
    let mut p = DMatrix::identity(n, n);
    for q in 1..=r {
        let sq = if q <= n { s[q] } else { 0.0 };
        p = DMatrix::identity(n, n) * sq - &p * a;
    }
    p
}

/// Einstein tensor `Ric − (κ/2)g` of the hypersurface metric (orthonormal frame).
pub fn hypersurface_einstein(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = MetricAtPoint::euclidean(n);
    let r = shape_to_curvature(a)?;
    let ric = r.contract(&m)?;
    let kappa = ric.contract(&m)?.scalar_value();
    Ok(ric.to_matrix() - DMatrix::identity(n, n) * (kappa / 2.0))
}

/// `J^(2k) = c·P_{2k}`: fits `c` at every sample and reports the relative
/// spread of the fitted constants.
pub fn hypersurface_lovelock_check(samples: &[DMatrix<f64>], k: usize) -> Result<(VerificationReport, Vec<f64>)> {
    let mut ratios = Vec::with_capacity(samples.len());
    let mut misfit = 0.0f64;
    for a in samples {
        let n = a.nrows();
        let m = MetricAtPoint::euclidean(n);
        let r = shape_to_curvature(a)?;
        let (r2k, s2k) = power_and_contractions(&r, &m, k)?;
        let j = lovelock_tensor(&r2k, &m, k, s2k).to_matrix();
        let p = newton_tensor(a, 2 * k);
        let c = j.dot(&p) / p.dot(&p);
        misfit = misfit.max((&j - &p * c).norm() / j.norm());
        ratios.push(c);
    }
    let spread = relative_spread(&ratios).max(misfit);
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    Ok((
        VerificationReport::from_residuals(
            format!("hypersurface-lovelock-newton-k{k}"),
            "hypersurface Lovelock tensor proportional to Newton tensor",
            &ratios,
            &vec![mean; ratios.len()],
            spread,
            spread,
            1e-6,
            Measure::Rel,
        ),
        ratios,
    ))
}

/// `(max − min)/|mean|` (zero for fewer than two values).
pub fn relative_spread(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean == 0.0 {
        max - min
    } else {
        (max - min) / mean.abs()
    }
}

// Rigidity.

/// Orthonormal basis of trace-free symmetric `n×n` matrices (Frobenius inner product).
pub fn trace_free_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2 - 1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..n {
        for b in a + 1..n {
            let mut e = DMatrix::zeros(n, n);
            e[(a, b)] = s;
            e[(b, a)] = s;
            out.push(e);
        }
    }
    // Helmert-type diagonal basis
    for j in 1..n {
        let mut e = DMatrix::zeros(n, n);
        let c = 1.0 / ((j * (j + 1)) as f64).sqrt();
        for i in 0..j {
            e[(i, i)] = c;
        }
        e[(j, j)] = -(j as f64) * c;
        out.push(e);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidityCertificate {
    pub n: usize,
    pub k: usize,
    pub kappa: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `min > α̲κ` or `max < ᾱκ` at this point.
    pub satisfied: bool,
}

/// Pointwise spectral certificate for the pinching hypothesis: extremes of
/// `Rcc` on trace-free tensors against `α̲κ` and `ᾱκ`. Sufficient, not sharp.
pub fn rigidity_certificate(bundle: &CurvatureBundle, m: &MetricAtPoint, k: usize) -> Result<RigidityCertificate> {
    let n = m.dim();
    let sc = structure_constants(n, k)?;
    if k < 2 {
        return Err(Error::Parameter("rigidity certificate needs k >= 2".into()));
    }
    let e = m.orthonormal_frame();
    let l = m.cholesky_lower();
    let basis = trace_free_basis(n);
    let dim = basis.len();
    // frame matrix H to coordinates: h = L H Lᵀ; back: Eᵀ h E
    let images: Vec<DMatrix<f64>> = basis
        .iter()
        .map(|b| {
            let h = l * b * l.transpose();
            let img = crate::chart::rcc_action(bundle, m, &h);
            e.transpose() * img * &e
        })
        .collect();
    let op = DMatrix::from_fn(dim, dim, |p, q| basis[p].dot(&images[q]));
    let sym = (&op + op.transpose()) * 0.5;
    let ev = SymmetricEigen::try_new(sym, 1e-14, 10_000)
        .ok_or_else(|| Error::Eigen("Rcc on trace-free tensors".into()))?
        .eigenvalues;
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lower = sc.alpha_lower * bundle.kappa;
    let upper = sc.alpha_upper * bundle.kappa;
    Ok(RigidityCertificate {
        n,
        k,
        kappa: bundle.kappa,
        min_eigenvalue: min,
        max_eigenvalue: max,
        lower_bound: lower,
        upper_bound: upper,
        satisfied: min > lower || max < upper,
    })
}

// Constants.

#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    pub n: usize,
    pub k: usize,
    pub c_nk: f64,
    pub d_nk: f64,
    pub dp_nk: f64,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    /// Coefficient of `κ(tr h)g` in the linearized 2k-Ricci operator, in units of
    /// `μ_k C_{n,k}(n−2k)/(n−3)`.
    pub alpha: f64,
    pub d_nk_calibrated: Option<f64>,
}

fn ratio(num: i128, den: i128) -> f64 {
    num as f64 / den as f64
}

pub fn structure_constants(n: usize, k: usize) -> Result<StructureConstants> {
    if k == 0 || 2 * k > n || n < 3 {
        return Err(Error::Parameter(format!(
            "structure constants need n >= 3 and 1 <= k <= n/2 (n={n}, k={k})"
        )));
    }
    let (ni, ki) = (n as i128, k as i128);
    let c_num = factorial_exact(2 * k - 1) * factorial_exact(n - 3);
    let c_den = factorial_exact(n - 2 * k);
    let c_int = (c_num / c_den) as i128;
    let c_nk = if c_num % c_den == 0 {
        c_int as f64
    } else {
        c_num as f64 / c_den as f64
    };
    let d_nk = ratio(ki * ki * (ni - 2) * c_int, factorial_exact(2 * k) as i128);
    let d_nk = if c_num % c_den == 0 {
        d_nk
    } else {
        (k * k * (n - 2)) as f64 * c_nk / factorial(2 * k)
    };
    let alpha_lower = ratio(ki * ni - 5 * ki + 2, ni * (ki * ni + ki + 2 - 2 * ni));
    let alpha_upper = ratio(ki * ni - 2 * ki - 1, ni * (ki * ni - 5 * ki + ni - 1));
    let alpha = if 2 * k < n {
        -ratio((ki - 1) * (ki * (ni - 3) + ni - 2 * ki), ni * (ni - 2 * ki))
    } else {
        f64::NAN
    };
    let d_nk_calibrated = d_nk_cache().lock().expect("cache lock").get(&(n, k)).copied();
    Ok(StructureConstants {
        n,
        k,
        c_nk,
        d_nk,
        dp_nk: (n - 1) as f64 * d_nk,
        alpha_lower,
        alpha_upper,
        alpha,
        d_nk_calibrated,
    })
}

/// `μ_k = μ^{k−1}/2^{k−1}` for constant sectional curvature `μ`.
pub fn space_form_mu_k(mu: f64, k: usize) -> f64 {
    (mu / 2.0).powi(k as i32 - 1)
}
