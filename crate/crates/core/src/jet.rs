//! Truncated Taylor jets up to third order in `n` variables.
//!
//! `Jet` carries a value with its full gradient, Hessian and third
//! derivative tensor (stored densely, symmetric by construction). `SymJet`
//! bundles the jets of all components of a symmetric 2-tensor.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    n: usize,
    order: usize,
    pub v: f64,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl Jet {
    pub fn constant(n: usize, order: usize, v: f64) -> Self {
        Jet {
            n,
            order,
            v,
            d1: vec![0.0; if order >= 1 { n } else { 0 }],
            d2: vec![0.0; if order >= 2 { n * n } else { 0 }],
            d3: vec![0.0; if order >= 3 { n * n * n } else { 0 }],
        }
    }

    /// The coordinate function `x_i` at `value`.
    pub fn variable(n: usize, order: usize, i: usize, value: f64) -> Self {
        let mut j = Jet::constant(n, order, value);
        if order >= 1 {
            j.d1[i] = 1.0;
        }
        j
    }

    /// Affine function `c + Σ a_i x_i` evaluated at `x`.
    pub fn affine(order: usize, c: f64, a: &[f64], x: &[f64]) -> Self {
        let n = a.len();
        let v = c + a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        let mut j = Jet::constant(n, order, v);
        if order >= 1 {
            j.d1.copy_from_slice(a);
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn scale(&self, c: f64) -> Self {
        Jet {
            n: self.n,
            order: self.order,
            v: self.v * c,
            d1: self.d1.iter().map(|x| x * c).collect(),
            d2: self.d2.iter().map(|x| x * c).collect(),
            d3: self.d3.iter().map(|x| x * c).collect(),
        }
    }

    pub fn add_const(&self, c: f64) -> Self {
        let mut j = self.clone();
        j.v += c;
        j
    }

    fn zip(&self, o: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!((self.n, self.order), (o.n, o.order));
        Jet {
            n: self.n,
            order: self.order,
            v: f(self.v, o.v),
            d1: self.d1.iter().zip(&o.d1).map(|(a, b)| f(*a, *b)).collect(),
            d2: self.d2.iter().zip(&o.d2).map(|(a, b)| f(*a, *b)).collect(),
            d3: self.d3.iter().zip(&o.d3).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Leibniz rule.
    pub fn mul_jet(&self, b: &Jet) -> Jet {
        let a = self;
        let n = a.n;
        let mut w = Jet::constant(n, a.order, a.v * b.v);
        if a.order >= 1 {
            for i in 0..n {
                w.d1[i] = a.d1[i] * b.v + a.v * b.d1[i];
            }
        }
        if a.order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    let ij = i * n + j;
                    w.d2[ij] =
                        a.d2[ij] * b.v + a.d1[i] * b.d1[j] + a.d1[j] * b.d1[i] + a.v * b.d2[ij];
                }
            }
        }
        if a.order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let ijk = (i * n + j) * n + k;
                        w.d3[ijk] = a.d3[ijk] * b.v
                            + a.d2[i * n + j] * b.d1[k]
                            + a.d2[i * n + k] * b.d1[j]
                            + a.d2[j * n + k] * b.d1[i]
                            + a.d1[i] * b.d2[j * n + k]
                            + a.d1[j] * b.d2[i * n + k]
                            + a.d1[k] * b.d2[i * n + j]
                            + a.v * b.d3[ijk];
                    }
                }
            }
        }
        w
    }

    /// `f ∘ self` given `f` and its first three derivatives at `self.v`.
    pub fn compose(&self, f: [f64; 4]) -> Jet {
        let u = self;
        let n = u.n;
        let mut h = Jet::constant(n, u.order, f[0]);
        if u.order >= 1 {
            for i in 0..n {
                h.d1[i] = f[1] * u.d1[i];
            }
        }
        if u.order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    h.d2[i * n + j] = f[2] * u.d1[i] * u.d1[j] + f[1] * u.d2[i * n + j];
                }
            }
        }
        if u.order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let ijk = (i * n + j) * n + k;
                        h.d3[ijk] = f[3] * u.d1[i] * u.d1[j] * u.d1[k]
                            + f[2]
                                * (u.d2[i * n + j] * u.d1[k]
                                    + u.d2[i * n + k] * u.d1[j]
                                    + u.d2[j * n + k] * u.d1[i])
                            + f[1] * u.d3[ijk];
                    }
                }
            }
        }
        h
    }

    pub fn recip(&self) -> Jet {
        let x = self.v;
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn exp(&self) -> Jet {
        let e = self.v.exp();
        self.compose([e; 4])
    }

    pub fn ln(&self) -> Jet {
        let x = self.v;
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.compose([c, -s, -c, s])
    }

    /// `self^p` for real `p` (requires a positive base unless `p` is integral).
    pub fn powf(&self, p: f64) -> Jet {
        let x = self.v;
        self.compose([
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
        ])
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn grad(&self, i: usize) -> f64 {
        self.d1[i]
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.n + j]
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        self.d3[(i * self.n + j) * self.n + k]
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        self.mul_jet(o)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Jets of a symmetric 2-tensor field at a point.
///
/// Layout: `val[i*n+j]`, `d1[(i*n+j)*n+p]`, `d2[((i*n+j)*n+p)*n+q]`,
/// `d3[(((i*n+j)*n+p)*n+q)*n+r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymJet {
    pub n: usize,
    pub order: usize,
    pub val: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl SymJet {
    pub fn zeros(n: usize, order: usize) -> Self {
        let n2 = n * n;
        SymJet {
            n,
            order,
            val: vec![0.0; n2],
            d1: vec![0.0; if order >= 1 { n2 * n } else { 0 }],
            d2: vec![0.0; if order >= 2 { n2 * n2 } else { 0 }],
            d3: vec![0.0; if order >= 3 { n2 * n2 * n } else { 0 }],
        }
    }

    /// Constant tensor with vanishing derivatives.
    pub fn constant(n: usize, order: usize, m: &[f64]) -> Self {
        let mut s = SymJet::zeros(n, order);
        s.val.copy_from_slice(m);
        s
    }

    /// Sets component `(i,j)` and `(j,i)` from a scalar jet.
    pub fn set(&mut self, i: usize, j: usize, c: &Jet) {
        let n = self.n;
        for &(a, b) in &[(i, j), (j, i)] {
            let ab = a * n + b;
            self.val[ab] = c.v;
            if self.order >= 1 {
                self.d1[ab * n..ab * n + n].copy_from_slice(&c.d1);
            }
            if self.order >= 2 {
                self.d2[ab * n * n..(ab + 1) * n * n].copy_from_slice(&c.d2);
            }
            if self.order >= 3 {
                let m = n * n * n;
                self.d3[ab * m..(ab + 1) * m].copy_from_slice(&c.d3);
            }
        }
    }

    /// Component `(i,j)` as a scalar jet.
    pub fn component(&self, i: usize, j: usize) -> Jet {
        let n = self.n;
        let ab = i * n + j;
        let mut c = Jet::constant(n, self.order, self.val[ab]);
        if self.order >= 1 {
            c.d1.copy_from_slice(&self.d1[ab * n..ab * n + n]);
        }
        if self.order >= 2 {
            c.d2.copy_from_slice(&self.d2[ab * n * n..(ab + 1) * n * n]);
        }
        if self.order >= 3 {
            let m = n * n * n;
            c.d3.copy_from_slice(&self.d3[ab * m..(ab + 1) * m]);
        }
        c
    }

    pub fn from_components(n: usize, order: usize, mut f: impl FnMut(usize, usize) -> Jet) -> Self {
        let mut s = SymJet::zeros(n, order);
        for i in 0..n {
            for j in i..n {
                let c = f(i, j);
                s.set(i, j, &c);
            }
        }
        s
    }

    #[inline]
    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.val[i * self.n + j]
    }

    #[inline]
    pub fn dg(&self, i: usize, j: usize, p: usize) -> f64 {
        self.d1[(i * self.n + j) * self.n + p]
    }

    #[inline]
    pub fn ddg(&self, i: usize, j: usize, p: usize, q: usize) -> f64 {
        let n = self.n;
        self.d2[((i * n + j) * n + p) * n + q]
    }

    #[inline]
    pub fn dddg(&self, i: usize, j: usize, p: usize, q: usize, r: usize) -> f64 {
        let n = self.n;
        self.d3[(((i * n + j) * n + p) * n + q) * n + r]
    }

    /// `self + t·other`, truncated to the lower of the two orders.
    pub fn axpy(&self, t: f64, other: &SymJet) -> SymJet {
        let order = self.order.min(other.order);
        let mut s = self.truncated(order);
        let o = other.truncated(order);
        for (a, b) in s.val.iter_mut().zip(&o.val) {
            *a += t * b;
        }
        for (a, b) in s.d1.iter_mut().zip(&o.d1) {
            *a += t * b;
        }
        for (a, b) in s.d2.iter_mut().zip(&o.d2) {
            *a += t * b;
        }
        for (a, b) in s.d3.iter_mut().zip(&o.d3) {
            *a += t * b;
        }
        s
    }

    pub fn truncated(&self, order: usize) -> SymJet {
        if order >= self.order {
            return self.clone();
        }
        let mut s = self.clone();
        s.order = order;
        if order < 3 {
            s.d3.clear();
        }
        if order < 2 {
            s.d2.clear();
        }
        if order < 1 {
            s.d1.clear();
        }
        s
    }

    pub fn value_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.val)
    }
}

/// Scalar function `f·T` of a scalar jet and a tensor jet (Leibniz per component).
pub fn scale_sym(f: &Jet, t: &SymJet) -> SymJet {
    let n = t.n;
    let order = f.order().min(t.order);
    let t = t.truncated(order);
    let fo = truncate_jet(f, order);
    SymJet::from_components(n, order, |i, j| fo.mul_jet(&t.component(i, j)))
}

pub fn truncate_jet(j: &Jet, order: usize) -> Jet {
    if order >= j.order {
        return j.clone();
    }
    let mut c = Jet::constant(j.n, order, j.v);
    if order >= 1 {
        c.d1.copy_from_slice(&j.d1);
    }
    if order >= 2 {
        c.d2.copy_from_slice(&j.d2);
    }
    c
}
