//! Pointwise algebra of double forms.
//!
//! A double form of bidegree `(r, s)` in dimension `n` is stored densely as a
//! `C(n,r) x C(n,s)` table of its values on coordinate wedges
//! `∂_I ⊗ ∂_J`, rows and columns indexed by increasing multi-indices in
//! lexicographic order. Wedges are evaluated with the determinant
//! convention, so `(e^0∧e^1)(e_0, e_1) = 1`.
//!
//! The product wedges first factors with first factors and second factors
//! with second factors, without a Koszul sign between the two algebras.
//! Under this convention a space form of sectional curvature `μ` has
//! `R = (μ/2) g²`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;

use crate::combinat::{
    binomial, enumerate_multi_indices, factorial, rank_slice, shuffles, sort_sign, MultiIndex,
};
use crate::error::{Error, Result};
use crate::report::{Measure, VerificationReport};

#[derive(Clone, PartialEq)]
pub struct DoubleForm {
    n: usize,
    r: usize,
    s: usize,
    coeffs: DMatrix<f64>,
}

impl fmt::Debug for DoubleForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DoubleForm(n={}, ({},{})) {:?}", self.n, self.r, self.s, self.coeffs.as_slice())
    }
}

/// Metric components at a point, with inverse and volume factor.
#[derive(Clone, Debug)]
pub struct MetricAtPoint {
    n: usize,
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    vol_factor: f64,
    chol_lower: DMatrix<f64>,
    compounds: Vec<OnceLock<DMatrix<f64>>>,
}

/// Whether an `(r,r)` form lies in the symmetric class (invariant under
/// exchanging its two factors).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryClass {
    pub symmetric: bool,
    pub asymmetry: f64,
}

impl MetricAtPoint {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != n {
            return Err(Error::DimensionMismatch(g.nrows(), g.ncols()));
        }
        let scale = g.amax().max(1.0);
        let asym = (&g - g.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let sym = (&g + g.transpose()) * 0.5;
        let chol = nalgebra::Cholesky::new(sym.clone()).ok_or(Error::NotPositiveDefinite {
            point: Vec::new(),
        })?;
        let lower = chol.l();
        let vol_factor = lower.diagonal().iter().product::<f64>();
        let g_inv = chol.inverse();
        Ok(MetricAtPoint {
            n,
            g: sym,
            g_inv,
            vol_factor,
            chol_lower: lower,
            compounds: (0..=n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn euclidean(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn g_inv(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    /// `sqrt(det g)`.
    pub fn vol_factor(&self) -> f64 {
        self.vol_factor
    }

    /// Lower-triangular Cholesky factor `L` with `g = L Lᵀ`.
    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.chol_lower
    }

    /// Orthonormal frame as columns (`Eᵀ g E = I`), from the Cholesky factor.
    pub fn orthonormal_frame(&self) -> DMatrix<f64> {
        self.chol_lower
            .clone()
            .try_inverse()
            .expect("Cholesky factor is invertible")
            .transpose()
    }

    /// The metric itself as a `(1,1)` double form.
    pub fn as_form(&self) -> DoubleForm {
        DoubleForm::from_bilinear(&self.g)
    }

    /// `r`-th compound of the inverse metric (Gram matrix of `Λ^r` on
    /// coordinate coframes).
    pub fn inverse_compound(&self, r: usize) -> &DMatrix<f64> {
        self.compounds[r].get_or_init(|| compound(&self.g_inv, r))
    }
}

/// `r`-th compound matrix: minors `det M[I, J]` over increasing multi-indices.
pub fn compound(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let rows = enumerate_multi_indices(m.nrows(), r as isize).expect("valid degree");
    let cols = enumerate_multi_indices(m.ncols(), r as isize).expect("valid degree");
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    let mut buf = [0.0f64; 64];
    for (a, ri) in rows.iter().enumerate() {
        for (b, ci) in cols.iter().enumerate() {
            for (p, &i) in ri.as_slice().iter().enumerate() {
                for (q, &j) in ci.as_slice().iter().enumerate() {
                    buf[p * r + q] = m[(i, j)];
                }
            }
            out[(a, b)] = small_det(&mut buf[..r * r], r);
        }
    }
    out
}

/// Determinant by Gaussian elimination with partial pivoting (destroys `a`).
pub(crate) fn small_det(a: &mut [f64], r: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..r {
        let mut piv = col;
        for row in col + 1..r {
            if a[row * r + col].abs() > a[piv * r + col].abs() {
                piv = row;
            }
        }
        let p = a[piv * r + col];
        if p == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..r {
                a.swap(piv * r + c, col * r + c);
            }
            det = -det;
        }
        det *= p;
        for row in col + 1..r {
            let f = a[row * r + col] / p;
            if f != 0.0 {
                for c in col..r {
                    a[row * r + c] -= f * a[col * r + c];
                }
            }
        }
    }
    det
}

/// Sign of moving `i` to the front of the increasing tuple `rest ∪ {i}`.
fn insertion_sign(i: usize, rest: &[usize]) -> f64 {
    let below = rest.iter().filter(|&&v| v < i).count();
    if below % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn insert_sorted(i: usize, rest: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(rest.len() + 1);
    let mut placed = false;
    for &x in rest {
        if !placed && i < x {
            v.push(i);
            placed = true;
        }
        v.push(x);
    }
    if !placed {
        v.push(i);
    }
    v
}

impl DoubleForm {
    pub fn zeros(n: usize, r: usize, s: usize) -> Result<Self> {
        if r > n || s > n {
            return Err(Error::DegreeOverflow { dim: n, r, s });
        }
        Ok(DoubleForm {
            n,
            r,
            s,
            coeffs: DMatrix::zeros(binomial(n, r), binomial(n, s)),
        })
    }

    pub fn scalar(n: usize, value: f64) -> Self {
        DoubleForm {
            n,
            r: 0,
            s: 0,
            coeffs: DMatrix::from_element(1, 1, value),
        }
    }

    pub fn from_coeffs(n: usize, r: usize, s: usize, coeffs: DMatrix<f64>) -> Result<Self> {
        if r > n || s > n {
            return Err(Error::DegreeOverflow { dim: n, r, s });
        }
        if coeffs.nrows() != binomial(n, r) || coeffs.ncols() != binomial(n, s) {
            return Err(Error::BidegreeMismatch(coeffs.nrows(), coeffs.ncols(), binomial(n, r), binomial(n, s)));
        }
        Ok(DoubleForm { n, r, s, coeffs })
    }

    pub fn from_fn(
        n: usize,
        r: usize,
        s: usize,
        mut f: impl FnMut(&MultiIndex, &MultiIndex) -> f64,
    ) -> Result<Self> {
        let rows = enumerate_multi_indices(n, r as isize)?;
        let cols = enumerate_multi_indices(n, s as isize)?;
        let mut coeffs = DMatrix::zeros(rows.len(), cols.len());
        for (a, i) in rows.iter().enumerate() {
            for (b, j) in cols.iter().enumerate() {
                coeffs[(a, b)] = f(i, j);
            }
        }
        Ok(DoubleForm { n, r, s, coeffs })
    }

    /// A bilinear form (any square matrix) as a `(1,1)` form.
    pub fn from_bilinear(m: &DMatrix<f64>) -> Self {
        DoubleForm {
            n: m.nrows(),
            r: 1,
            s: 1,
            coeffs: m.clone(),
        }
    }

    /// Builds a `(2,2)` form from a full 4-index array
    /// `w[((i*n + j)*n + k)*n + l] = ω(∂_i∧∂_j, ∂_k∧∂_l)`.
    pub fn from_four_index(n: usize, w: &[f64]) -> Self {
        DoubleForm::from_fn(n, 2, 2, |i, j| {
            let (a, b) = (i.as_slice()[0], i.as_slice()[1]);
            let (c, d) = (j.as_slice()[0], j.as_slice()[1]);
            w[((a * n + b) * n + c) * n + d]
        })
        .expect("n >= 2")
    }

    pub fn random(n: usize, r: usize, s: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut f = DoubleForm::zeros(n, r, s)?;
        for v in f.coeffs.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        Ok(f)
    }

    /// Random element of the symmetric class `(r,r)`.
    pub fn random_symmetric(n: usize, r: usize, rng: &mut impl Rng) -> Result<Self> {
        let f = DoubleForm::random(n, r, r, rng)?;
        Ok(f.symmetrized())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.r, self.s)
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coeffs.as_slice()
    }

    /// Value on the scalar part of a `(0,0)` form.
    pub fn scalar_value(&self) -> f64 {
        assert_eq!((self.r, self.s), (0, 0), "not a scalar double form");
        self.coeffs[(0, 0)]
    }

    /// Evaluation on arbitrary index tuples (antisymmetric in each factor).
    pub fn get(&self, left: &[usize], right: &[usize]) -> f64 {
        assert_eq!((left.len(), right.len()), (self.r, self.s), "arity");
        match (sort_sign(left), sort_sign(right)) {
            (Some((i, si)), Some((j, sj))) => {
                (si * sj) as f64 * self.coeffs[(i.rank(self.n), j.rank(self.n))]
            }
            _ => 0.0,
        }
    }

    pub fn get_sorted(&self, left: &MultiIndex, right: &MultiIndex) -> f64 {
        self.coeffs[(left.rank(self.n), right.rank(self.n))]
    }

    /// Exchanges the two factors.
    pub fn transpose(&self) -> Self {
        DoubleForm {
            n: self.n,
            r: self.s,
            s: self.r,
            coeffs: self.coeffs.transpose(),
        }
    }

    pub fn symmetrized(&self) -> Self {
        assert_eq!(self.r, self.s, "symmetrization needs equal degrees");
        DoubleForm {
            coeffs: (&self.coeffs + self.coeffs.transpose()) * 0.5,
            ..self.clone()
        }
    }

    pub fn symmetry_class(&self, tol: f64) -> SymmetryClass {
        if self.r != self.s {
            return SymmetryClass {
                symmetric: false,
                asymmetry: f64::INFINITY,
            };
        }
        let asym = (&self.coeffs - self.coeffs.transpose()).amax();
        let scale = self.coeffs.amax().max(1.0);
        SymmetryClass {
            symmetric: asym <= tol * scale,
            asymmetry: asym,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        DoubleForm {
            coeffs: &self.coeffs * c,
            ..self.clone()
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        if (self.r, self.s) != (other.r, other.s) {
            return Err(Error::BidegreeMismatch(self.r, self.s, other.r, other.s));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(DoubleForm {
            coeffs: &self.coeffs + &other.coeffs,
            ..self.clone()
        })
    }

    /// Coordinate (Frobenius) norm of the coefficient table.
    pub fn coord_norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// The bigraded product.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        let n = self.n;
        let (r, s) = (self.r + other.r, self.s + other.s);
        if r > n || s > n {
            return Err(Error::DegreeOverflow { dim: n, r, s });
        }
        let left = split_table(n, r, self.r);
        let right = split_table(n, s, self.s);
        let mut out = DoubleForm::zeros(n, r, s)?;
        for (ka, ksplits) in left.iter().enumerate() {
            for (la, lsplits) in right.iter().enumerate() {
                let mut acc = 0.0;
                for &(i, i2, si) in ksplits {
                    for &(j, j2, sj) in lsplits {
                        acc += si * sj * self.coeffs[(i, j)] * other.coeffs[(i2, j2)];
                    }
                }
                out.coeffs[(ka, la)] = acc;
            }
        }
        Ok(out)
    }

    /// `self^k` under the product (`k = 0` gives the scalar 1).
    pub fn power(&self, k: usize) -> Result<Self> {
        let mut acc = DoubleForm::scalar(self.n, 1.0);
        for _ in 0..k {
            acc = acc.product(self)?;
        }
        Ok(acc)
    }

    /// Contraction `c_g`: removes one slot from each factor with `g^{-1}`.
    pub fn contract(&self, m: &MetricAtPoint) -> Result<Self> {
        if self.r == 0 || self.s == 0 {
            return Err(Error::DegreeUnderflow {
                r: self.r,
                s: self.s,
            });
        }
        if m.n != self.n {
            return Err(Error::DimensionMismatch(m.n, self.n));
        }
        self.contract_with_inverse(&m.g_inv)
    }

    /// Contraction with an arbitrary symmetric matrix in place of `g⁻¹`
    /// (the contraction is linear in it).
    pub fn contract_with_inverse(&self, gi: &DMatrix<f64>) -> Result<Self> {
        if self.r == 0 || self.s == 0 {
            return Err(Error::DegreeUnderflow {
                r: self.r,
                s: self.s,
            });
        }
        if gi.nrows() != self.n {
            return Err(Error::DimensionMismatch(gi.nrows(), self.n));
        }
        let n = self.n;
        let (r, s) = (self.r - 1, self.s - 1);
        let rows = enumerate_multi_indices(n, r as isize)?;
        let cols = enumerate_multi_indices(n, s as isize)?;
        let expand = |set: &MultiIndex| -> Vec<(usize, usize, f64)> {
            (0..n)
                .filter(|i| !set.contains(*i))
                .map(|i| {
                    let full = insert_sorted(i, set.as_slice());
                    (i, rank_slice(&full, n), insertion_sign(i, set.as_slice()))
                })
                .collect()
        };
        let row_exp: Vec<_> = rows.iter().map(expand).collect();
        let col_exp: Vec<_> = cols.iter().map(expand).collect();
        let mut out = DoubleForm::zeros(n, r, s)?;
        for (a, re) in row_exp.iter().enumerate() {
            for (b, ce) in col_exp.iter().enumerate() {
                let mut acc = 0.0;
                for &(i, ri, si) in re {
                    for &(j, cj, sj) in ce {
                        acc += gi[(i, j)] * si * sj * self.coeffs[(ri, cj)];
                    }
                }
                out.coeffs[(a, b)] = acc;
            }
        }
        Ok(out)
    }

    /// `c_g^l`.
    pub fn contract_n(&self, l: usize, m: &MetricAtPoint) -> Result<Self> {
        let mut acc = self.clone();
        for _ in 0..l {
            acc = acc.contract(m)?;
        }
        Ok(acc)
    }

    /// Multiplication by the metric, `g·ω`.
    pub fn metric_multiply(&self, m: &MetricAtPoint) -> Result<Self> {
        m.as_form().product(self)
    }

    /// `g^p·ω`.
    pub fn metric_multiply_n(&self, p: usize, m: &MetricAtPoint) -> Result<Self> {
        let mut acc = self.clone();
        for _ in 0..p {
            acc = acc.metric_multiply(m)?;
        }
        Ok(acc)
    }

    /// Both factors raised with the inverse metric compounds.
    fn raised(&self, m: &MetricAtPoint) -> DMatrix<f64> {
        m.inverse_compound(self.r) * &self.coeffs * m.inverse_compound(self.s)
    }

    /// Metric inner product on `Λ^{r,s}`: increasing-index orthonormal frame
    /// wedges are orthonormal, so `⟨h, g⟩ = tr_g h` and `⟨g, g⟩ = n`.
    pub fn inner(&self, other: &Self, m: &MetricAtPoint) -> Result<f64> {
        self.check_same(other)?;
        if m.n != self.n {
            return Err(Error::DimensionMismatch(m.n, self.n));
        }
        Ok(self.raised(m).component_mul(&other.coeffs).sum())
    }

    pub fn norm(&self, m: &MetricAtPoint) -> f64 {
        self.inner(self, m).expect("same bidegree").max(0.0).sqrt()
    }

    /// Factorwise Hodge star with the Riemannian volume form.
    pub fn hodge_star(&self, m: &MetricAtPoint) -> Result<Self> {
        if m.n != self.n {
            return Err(Error::DimensionMismatch(m.n, self.n));
        }
        let n = self.n;
        let raised = self.raised(m);
        let rows = enumerate_multi_indices(n, self.r as isize)?;
        let cols = enumerate_multi_indices(n, self.s as isize)?;
        let complement_sign = |i: &MultiIndex| -> (usize, f64) {
            let c = i.complement(n);
            let mut full = i.as_slice().to_vec();
            full.extend_from_slice(c.as_slice());
            let (_, sign) = sort_sign(&full).expect("disjoint");
            (c.rank(n), sign as f64)
        };
        let vol2 = m.vol_factor * m.vol_factor;
        let mut out = DoubleForm::zeros(n, n - self.r, n - self.s)?;
        let cr: Vec<_> = rows.iter().map(complement_sign).collect();
        let cc: Vec<_> = cols.iter().map(complement_sign).collect();
        for (a, &(ra, sa)) in cr.iter().enumerate() {
            for (b, &(rb, sb)) in cc.iter().enumerate() {
                out.coeffs[(ra, rb)] = vol2 * sa * sb * raised[(a, b)];
            }
        }
        Ok(out)
    }

    /// Values on a new basis: `ω'(b_A, b_B) = ω(B_A, B_B)` where the basis
    /// vectors are the columns of `basis` in current coordinates.
    pub fn change_basis(&self, basis: &DMatrix<f64>) -> Self {
        let cr = compound(basis, self.r);
        let cs = compound(basis, self.s);
        DoubleForm {
            coeffs: cr.transpose() * &self.coeffs * cs,
            ..self.clone()
        }
    }

    /// The coefficient table of a `(1,1)` form as a matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        assert_eq!((self.r, self.s), (1, 1), "not a (1,1) form");
        self.coeffs.clone()
    }
}

/// For each increasing `K` of degree `total`, its shuffles into a part of
/// degree `part` and the remainder, as `(rank part, rank rest, sign)`.
fn split_table(n: usize, total: usize, part: usize) -> Vec<Vec<(usize, usize, f64)>> {
    enumerate_multi_indices(n, total as isize)
        .expect("checked degree")
        .iter()
        .map(|k| {
            shuffles(k.as_slice(), part)
                .into_iter()
                .map(|(a, b, sg)| (rank_slice(&a, n), rank_slice(&b, n), sg as f64))
                .collect()
        })
        .collect()
}

impl Add for &DoubleForm {
    type Output = DoubleForm;
    fn add(self, rhs: &DoubleForm) -> DoubleForm {
        self.try_add(rhs).expect("double form addition")
    }
}

impl Sub for &DoubleForm {
    type Output = DoubleForm;
    fn sub(self, rhs: &DoubleForm) -> DoubleForm {
        self.try_add(&rhs.scaled(-1.0)).expect("double form subtraction")
    }
}

impl Add for DoubleForm {
    type Output = DoubleForm;
    fn add(self, rhs: DoubleForm) -> DoubleForm {
        &self + &rhs
    }
}

impl Sub for DoubleForm {
    type Output = DoubleForm;
    fn sub(self, rhs: DoubleForm) -> DoubleForm {
        &self - &rhs
    }
}

impl Mul<f64> for &DoubleForm {
    type Output = DoubleForm;
    fn mul(self, c: f64) -> DoubleForm {
        self.scaled(c)
    }
}

impl Mul<f64> for DoubleForm {
    type Output = DoubleForm;
    fn mul(self, c: f64) -> DoubleForm {
        self.scaled(c)
    }
}

impl Neg for DoubleForm {
    type Output = DoubleForm;
    fn neg(self) -> DoubleForm {
        self.scaled(-1.0)
    }
}

/// Both sides of the general contraction/multiplication commutation rule
/// `(1/m!) c^l g^m η = (1/m!) g^m c^l η + Σ_q C(l,q) Π_i (n−r−s+l−m−i) g^{m−q}/(m−q)! c^{l−q} η`.
pub fn commutation_sides(
    eta: &DoubleForm,
    l: usize,
    mpow: usize,
    m: &MetricAtPoint,
) -> Result<(DoubleForm, DoubleForm)> {
    let n = eta.n as i64;
    let (r, s) = eta.bidegree();
    if r + mpow > eta.n || s + mpow > eta.n {
        return Err(Error::DegreeOverflow {
            dim: eta.n,
            r: r + mpow,
            s: s + mpow,
        });
    }
    if l > r + mpow || l > s + mpow {
        return Err(Error::DegreeUnderflow {
            r: r + mpow,
            s: s + mpow,
        });
    }
    let lhs = eta
        .metric_multiply_n(mpow, m)?
        .contract_n(l, m)?
        .scaled(1.0 / factorial(mpow));
    let (or, os) = (r + mpow - l, s + mpow - l);
    let mut rhs = DoubleForm::zeros(eta.n, or, os)?;
    // q = 0 term is (1/m!) g^m c^l η
    for q in 0..=l.min(mpow) {
        let lq = l - q;
        if lq > r || lq > s {
            continue;
        }
        let mut coef = binomial(l, q) as f64 / factorial(mpow - q);
        for i in 0..q as i64 {
            coef *= (n - r as i64 - s as i64 + l as i64 - mpow as i64 - i) as f64;
        }
        if coef == 0.0 {
            continue;
        }
        let term = eta.contract_n(lq, m)?.metric_multiply_n(mpow - q, m)?;
        rhs = &rhs + &term.scaled(coef);
    }
    Ok((lhs, rhs))
}

pub fn commutation_check(
    eta: &DoubleForm,
    l: usize,
    mpow: usize,
    m: &MetricAtPoint,
) -> Result<VerificationReport> {
    let (lhs, rhs) = commutation_sides(eta, l, mpow, m)?;
    let (r, s) = eta.bidegree();
    Ok(VerificationReport::compare(
        format!("commutation n={} ({r},{s}) l={l} m={mpow}", eta.n),
        "contraction-metric commutation rule",
        lhs.as_slice(),
        rhs.as_slice(),
        1e-10,
        Measure::Rel,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_metric, rng_from_seed};
    use approx::assert_relative_eq;

    fn max_abs_diff(a: &DoubleForm, b: &DoubleForm) -> f64 {
        (a.coeffs() - b.coeffs()).amax()
    }

    #[test]
    fn scalar_one_is_unit() {
        let mut rng = rng_from_seed(1);
        let w = DoubleForm::random(4, 2, 1, &mut rng).unwrap();
        let one = DoubleForm::scalar(4, 1.0);
        assert_eq!(one.product(&w).unwrap(), w);
        assert_eq!(w.product(&one).unwrap(), w);
    }

    #[test]
    fn half_g_squared_is_one_on_plane_n2() {
        let m = MetricAtPoint::euclidean(2);
        let g2 = m.as_form().power(2).unwrap().scaled(0.5);
        assert_relative_eq!(g2.get(&[0, 1], &[0, 1]), 1.0);
    }

    #[test]
    fn g_squared_brute_force_n3() {
        // g² = Σ_{i,j} (e^i∧e^j)⊗(e^i∧e^j) evaluated on all tuples
        let m = MetricAtPoint::euclidean(3);
        let g2 = m.as_form().power(2).unwrap();
        let wedge = |i: usize, j: usize, a: usize, b: usize| -> f64 {
            (i == a && j == b) as i32 as f64 - (i == b && j == a) as i32 as f64
        };
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        let mut brute = 0.0;
                        for i in 0..3 {
                            for j in 0..3 {
                                brute += wedge(i, j, a, b) * wedge(i, j, c, d);
                            }
                        }
                        assert_relative_eq!(g2.get(&[a, b], &[c, d]), brute);
                    }
                }
            }
        }
        // twice the canonical form with unit diagonal
        assert_relative_eq!(g2.get(&[0, 2], &[0, 2]), 2.0);
        assert_relative_eq!(g2.get(&[0, 2], &[1, 2]), 0.0);
    }

    #[test]
    fn product_degree_overflow_is_an_error() {
        let a = DoubleForm::zeros(3, 2, 1).unwrap();
        let b = DoubleForm::zeros(3, 2, 1).unwrap();
        assert!(matches!(a.product(&b), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn contract_examples() {
        let mut rng = rng_from_seed(3);
        let m = random_metric(5, &mut rng);
        let g = m.as_form();
        assert_relative_eq!(g.contract(&m).unwrap().scalar_value(), 5.0, epsilon = 1e-12);
        let g2 = g.power(2).unwrap().scaled(0.5);
        let c = g2.contract(&m).unwrap();
        assert!(max_abs_diff(&c, &g.scaled(4.0)) < 1e-12);
        assert!(matches!(
            DoubleForm::zeros(5, 0, 2).unwrap().contract(&m),
            Err(Error::DegreeUnderflow { .. })
        ));
    }

    #[test]
    fn kulkarni_bidegree_22_n4() {
        let mut rng = rng_from_seed(11);
        let m = random_metric(4, &mut rng);
        let w = DoubleForm::random(4, 2, 2, &mut rng).unwrap();
        let lhs = &w.metric_multiply(&m).unwrap().contract(&m).unwrap()
            - &w.contract(&m).unwrap().metric_multiply(&m).unwrap();
        // (n - r - s) = 0
        assert!(lhs.coeffs().amax() < 1e-12);
    }

    #[test]
    fn contraction_matches_cholesky_frame_sum() {
        let mut rng = rng_from_seed(5);
        let m = random_metric(5, &mut rng);
        let w = DoubleForm::random(5, 2, 3, &mut rng).unwrap();
        let e = m.orthonormal_frame();
        // (c ω)(x, y) = Σ_a ω(e_a ∧ x, e_a ∧ y), evaluated on coordinate vectors
        let c = w.contract(&m).unwrap();
        let frame_w = |a: usize, x: &[usize], y: &[usize]| -> f64 {
            // ω(e_a∧∂_x, e_a∧∂_y) by multilinearity in the first slot
            let mut acc = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    let mut l = vec![i];
                    l.extend_from_slice(x);
                    let mut r = vec![j];
                    r.extend_from_slice(y);
                    acc += e[(i, a)] * e[(j, a)] * w.get(&l, &r);
                }
            }
            acc
        };
        for x in enumerate_multi_indices(5, 1).unwrap() {
            for y in enumerate_multi_indices(5, 2).unwrap() {
                let sum: f64 = (0..5).map(|a| frame_w(a, x.as_slice(), y.as_slice())).sum();
                assert_relative_eq!(c.get_sorted(&x, &y), sum, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn inner_product_normalization() {
        let mut rng = rng_from_seed(8);
        let m = random_metric(5, &mut rng);
        let h = DoubleForm::random_symmetric(5, 1, &mut rng).unwrap();
        let tr = (m.g_inv() * h.coeffs()).trace();
        assert_relative_eq!(h.inner(&m.as_form(), &m).unwrap(), tr, epsilon = 1e-12);
        let e = MetricAtPoint::euclidean(6);
        assert_relative_eq!(e.as_form().inner(&e.as_form(), &e).unwrap(), 6.0);
        let w = DoubleForm::random(5, 2, 3, &mut rng).unwrap();
        assert!(w.inner(&w, &m).unwrap() > 0.0);
        assert!(w.inner(&h, &m).is_err());
    }

    #[test]
    fn metric_multiply_and_contract_are_adjoint() {
        let mut rng = rng_from_seed(21);
        let m = random_metric(4, &mut rng);
        let w = DoubleForm::random(4, 1, 1, &mut rng).unwrap();
        let t = DoubleForm::random(4, 2, 2, &mut rng).unwrap();
        let a = w.metric_multiply(&m).unwrap().inner(&t, &m).unwrap();
        let b = w.inner(&t.contract(&m).unwrap(), &m).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn iterated_metric_power_matches_direct_product() {
        let mut rng = rng_from_seed(2);
        let m = random_metric(6, &mut rng);
        let g = m.as_form();
        let iter = DoubleForm::scalar(6, 1.0).metric_multiply_n(2, &m).unwrap();
        let direct = g.product(&g).unwrap();
        assert!(max_abs_diff(&iter, &direct) < 1e-12);
        assert_eq!(DoubleForm::scalar(6, 1.0).metric_multiply(&m).unwrap(), g);
    }

    #[test]
    fn star_of_one_is_volume() {
        let m = MetricAtPoint::euclidean(3);
        let v = DoubleForm::scalar(3, 1.0).hodge_star(&m).unwrap();
        assert_eq!(v.bidegree(), (3, 3));
        assert_relative_eq!(v.get(&[0, 1, 2], &[0, 1, 2]), 1.0);
    }

    #[test]
    fn star_involution_sign_and_isometry() {
        let mut rng = rng_from_seed(9);
        let m = random_metric(4, &mut rng);
        let (r, s, n) = (1usize, 2usize, 4usize);
        let w = DoubleForm::random(n, r, s, &mut rng).unwrap();
        let ss = w.hodge_star(&m).unwrap().hodge_star(&m).unwrap();
        let sign = if (r * (n - r) + s * (n - s)) % 2 == 0 { 1.0 } else { -1.0 };
        assert!(max_abs_diff(&ss, &w.scaled(sign)) < 1e-11);
        let t = DoubleForm::random(n, r, s, &mut rng).unwrap();
        let a = w.hodge_star(&m).unwrap().inner(&t.hodge_star(&m).unwrap(), &m).unwrap();
        assert_relative_eq!(a, w.inner(&t, &m).unwrap(), max_relative = 1e-11);
    }

    #[test]
    fn commutation_examples() {
        let mut rng = rng_from_seed(4);
        let m = random_metric(5, &mut rng);
        let eta = DoubleForm::random(5, 2, 2, &mut rng).unwrap();
        assert!(commutation_check(&eta, 1, 1, &m).unwrap().pass);
        let m6 = random_metric(6, &mut rng);
        let eta = DoubleForm::random(6, 1, 1, &mut rng).unwrap();
        assert!(commutation_check(&eta, 3, 2, &m6).unwrap().pass);
        let m7 = random_metric(7, &mut rng);
        let eta = DoubleForm::random_symmetric(7, 2, &mut rng).unwrap();
        assert!(commutation_check(&eta, 3, 2, &m7).unwrap().pass);
    }

    #[test]
    fn symmetric_class_preserved() {
        let mut rng = rng_from_seed(6);
        let m = random_metric(5, &mut rng);
        let a = DoubleForm::random_symmetric(5, 2, &mut rng).unwrap();
        let b = DoubleForm::random_symmetric(5, 1, &mut rng).unwrap();
        assert!(a.product(&b).unwrap().symmetry_class(1e-12).symmetric);
        assert!(a.contract(&m).unwrap().symmetry_class(1e-12).symmetric);
        assert!(!DoubleForm::random(5, 2, 2, &mut rng).unwrap().symmetry_class(1e-12).symmetric);
    }

    #[test]
    fn change_basis_roundtrip() {
        let mut rng = rng_from_seed(12);
        let m = random_metric(5, &mut rng);
        let w = DoubleForm::random(5, 2, 2, &mut rng).unwrap();
        let e = m.orthonormal_frame();
        let einv = e.clone().try_inverse().unwrap();
        let back = w.change_basis(&e).change_basis(&einv);
        assert!(max_abs_diff(&back, &w) < 1e-12);
        // in the orthonormal frame the metric is the identity
        let gf = m.as_form().change_basis(&e);
        assert!((gf.coeffs() - DMatrix::<f64>::identity(5, 5)).amax() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn product_bilinear_and_associative(seed in any::<u64>(), n in 2usize..=6) {
                let mut rng = rng_from_seed(seed);
                let a = DoubleForm::random(n, 1, 0, &mut rng).unwrap();
                let a2 = DoubleForm::random(n, 1, 0, &mut rng).unwrap();
                let b = DoubleForm::random(n, 0, 1, &mut rng).unwrap();
                let c = DoubleForm::random(n, 1, 1, &mut rng).unwrap();
                let lhs = (&a * 2.0 + a2.clone()).product(&b).unwrap();
                let rhs = &a.product(&b).unwrap().scaled(2.0) + &a2.product(&b).unwrap();
                prop_assert!((lhs.coeffs() - rhs.coeffs()).amax() < 1e-12);
                let l = a.product(&b).unwrap().product(&c).unwrap();
                let r = a.product(&b.product(&c).unwrap()).unwrap();
                prop_assert!((l.coeffs() - r.coeffs()).amax() < 1e-12);
            }

            #[test]
            fn adjoint_all_bidegrees(seed in any::<u64>(), n in 1usize..=6, r in 0usize..6, s in 0usize..6) {
                prop_assume!(r < n && s < n);
                let mut rng = rng_from_seed(seed);
                let m = random_metric(n, &mut rng);
                let w = DoubleForm::random(n, r, s, &mut rng).unwrap();
                let t = DoubleForm::random(n, r + 1, s + 1, &mut rng).unwrap();
                let a = w.metric_multiply(&m).unwrap().inner(&t, &m).unwrap();
                let b = w.inner(&t.contract(&m).unwrap(), &m).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
            }

            #[test]
            fn kulkarni_all_bidegrees(seed in any::<u64>(), n in 2usize..=7, r in 1usize..7, s in 1usize..7) {
                prop_assume!(r < n && s < n);
                let mut rng = rng_from_seed(seed);
                let m = random_metric(n, &mut rng);
                let eta = DoubleForm::random(n, r, s, &mut rng).unwrap();
                let rep = commutation_check(&eta, 1, 1, &m).unwrap();
                prop_assert!(rep.residual_rel <= 1e-12, "{}", rep.line());
            }
        }
    }
}
