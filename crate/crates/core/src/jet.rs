//! Forward-mode jets.
//!
//! `Jet2` carries a value, its gradient and its (symmetric) Hessian with
//! respect to up to `MAX_DIM` chart coordinates. `Jet1` is the first-order
//! truncation used for quantities that are themselves built from first
//! derivatives (Christoffel symbols, Lee forms, ...). Both live on the stack
//! and are `Copy`; the active dimension `n` only bounds the loops, so a
//! constant (n = 0) combines freely with a seeded variable.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Largest chart dimension supported by the fixed-size jet storage.
pub const MAX_DIM: usize = 8;
const HESS_LEN: usize = MAX_DIM * (MAX_DIM + 1) / 2;

#[inline(always)]
fn hidx(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * MAX_DIM - i * (i + 1) / 2 + j
}

/// Common arithmetic surface shared by `f64`, `Jet1` and `Jet2`, so the small
/// dense linear algebra can be written once.
pub trait Scalar:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + Send
    + Sync
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, k: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn recip(self) -> Self;
    /// True when every stored number is finite.
    fn is_finite(&self) -> bool;

    #[inline]
    fn zero() -> Self {
        Self::cst(0.0)
    }
    #[inline]
    fn one() -> Self {
        Self::cst(1.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        if self > 0.0 {
            f64::ln(self)
        } else {
            f64::NAN
        }
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        if self >= 0.0 {
            f64::sqrt(self)
        } else {
            f64::NAN
        }
    }
    #[inline]
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    #[inline]
    fn recip(self) -> Self {
        if self != 0.0 {
            1.0 / self
        } else {
            f64::NAN
        }
    }
    #[inline]
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

/// Value plus gradient.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet1 {
    pub n: usize,
    pub v: f64,
    pub g: [f64; MAX_DIM],
}

/// Value, gradient and Hessian (stored as a packed upper triangle).
#[derive(Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub n: usize,
    pub v: f64,
    pub g: [f64; MAX_DIM],
    h: [f64; HESS_LEN],
}

impl fmt::Debug for Jet1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet1({} | {:?})", self.v, &self.g[..self.n])
    }
}

impl fmt::Debug for Jet2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet2({} | {:?} | ", self.v, &self.g[..self.n])?;
        for i in 0..self.n {
            write!(f, "{:?}", (0..self.n).map(|j| self.hess(i, j)).collect::<Vec<_>>())?;
        }
        write!(f, ")")
    }
}

impl Jet1 {
    #[inline(always)]
    pub fn constant(v: f64) -> Self {
        Jet1 { n: 0, v, g: [0.0; MAX_DIM] }
    }

    /// Jet of the partial derivative along coordinate `k`, as a plain number.
    #[inline]
    pub fn d(&self, k: usize) -> f64 {
        self.g[k]
    }

    #[inline(always)]
    fn chain(self, f0: f64, f1: f64) -> Self {
        let mut r = Jet1 { n: self.n, v: f0, g: [0.0; MAX_DIM] };
        for i in 0..self.n {
            r.g[i] = f1 * self.g[i];
        }
        r
    }
}

impl Jet2 {
    #[inline(always)]
    pub fn constant(v: f64) -> Self {
        Jet2 { n: 0, v, g: [0.0; MAX_DIM], h: [0.0; HESS_LEN] }
    }

    /// The coordinate function x_i evaluated at `v` in an n-dimensional chart.
    #[inline(always)]
    pub fn seed(v: f64, i: usize, n: usize) -> Self {
        assert!(n <= MAX_DIM && i < n, "jet seed index {i} out of range for dimension {n}");
        let mut j = Jet2 { n, v, g: [0.0; MAX_DIM], h: [0.0; HESS_LEN] };
        j.g[i] = 1.0;
        j
    }

    /// Seeds every coordinate of a point.
    pub fn seed_point(p: &[f64]) -> Vec<Jet2> {
        let n = p.len();
        p.iter().enumerate().map(|(i, &x)| Jet2::seed(x, i, n)).collect()
    }

    /// Constant jets (zero derivatives) at a point.
    pub fn constant_point(p: &[f64]) -> Vec<Jet2> {
        p.iter().map(|&x| Jet2::constant(x)).collect()
    }

    /// Builds a jet from explicit derivative data; `hess` must be symmetric.
    pub fn from_parts(v: f64, grad: &[f64], hess: &[Vec<f64>]) -> Self {
        let n = grad.len();
        assert!(n <= MAX_DIM);
        let mut j = Jet2 { n, v, g: [0.0; MAX_DIM], h: [0.0; HESS_LEN] };
        j.g[..n].copy_from_slice(grad);
        for a in 0..n {
            for b in a..n {
                j.h[hidx(a, b)] = 0.5 * (hess[a][b] + hess[b][a]);
            }
        }
        j
    }

    #[inline(always)]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[hidx(i, j)]
    }

    pub fn grad(&self) -> &[f64] {
        &self.g[..self.n]
    }

    pub fn hessian(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.hess(i, j)).collect()).collect()
    }

    /// First-order truncation.
    #[inline]
    pub fn lift(&self) -> Jet1 {
        Jet1 { n: self.n, v: self.v, g: self.g }
    }

    /// First-order jet of the partial derivative along coordinate `k`.
    #[inline]
    pub fn d(&self, k: usize) -> Jet1 {
        let mut g = [0.0; MAX_DIM];
        for (i, gi) in g.iter_mut().enumerate().take(self.n) {
            *gi = self.hess(k, i);
        }
        Jet1 { n: self.n, v: self.g[k], g }
    }

    #[inline(always)]
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.n;
        let mut r = Jet2 { n, v: f0, g: [0.0; MAX_DIM], h: [0.0; HESS_LEN] };
        for i in 0..n {
            r.g[i] = f1 * self.g[i];
        }
        for i in 0..n {
            for j in i..n {
                let k = hidx(i, j);
                r.h[k] = f1 * self.h[k] + f2 * self.g[i] * self.g[j];
            }
        }
        r
    }
}

macro_rules! unary_impls {
    ($ty:ty, $chain:ident) => {
        impl Scalar for $ty {
            #[inline]
            fn cst(v: f64) -> Self {
                <$ty>::constant(v)
            }
            #[inline]
            fn value(&self) -> f64 {
                self.v
            }
            #[inline]
            fn exp(self) -> Self {
                let e = self.v.exp();
                $chain!(self, e, e, e)
            }
            #[inline]
            fn ln(self) -> Self {
                if self.v <= 0.0 {
                    return $chain!(self, f64::NAN, f64::NAN, f64::NAN);
                }
                let r = 1.0 / self.v;
                $chain!(self, self.v.ln(), r, -r * r)
            }
            #[inline]
            fn sin(self) -> Self {
                let (s, c) = self.v.sin_cos();
                $chain!(self, s, c, -s)
            }
            #[inline]
            fn cos(self) -> Self {
                let (s, c) = self.v.sin_cos();
                $chain!(self, c, -s, -c)
            }
            #[inline]
            fn sqrt(self) -> Self {
                if self.v <= 0.0 {
                    return $chain!(self, f64::NAN, f64::NAN, f64::NAN);
                }
                let s = self.v.sqrt();
                $chain!(self, s, 0.5 / s, -0.25 / (s * self.v))
            }
            #[inline]
            fn powi(self, k: i32) -> Self {
                match k {
                    0 => <$ty>::constant(1.0),
                    1 => self,
                    2 => self * self,
                    _ => {
                        let x = self.v;
                        let kf = k as f64;
                        $chain!(self, x.powi(k), kf * x.powi(k - 1), kf * (kf - 1.0) * x.powi(k - 2))
                    }
                }
            }
            #[inline]
            fn powf(self, p: f64) -> Self {
                let x = self.v;
                if x <= 0.0 {
                    return $chain!(self, f64::NAN, f64::NAN, f64::NAN);
                }
                $chain!(self, x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
            }
            #[inline]
            fn recip(self) -> Self {
                let x = self.v;
                if x == 0.0 {
                    return $chain!(self, f64::NAN, f64::NAN, f64::NAN);
                }
                let r = 1.0 / x;
                $chain!(self, r, -r * r, 2.0 * r * r * r)
            }
            fn is_finite(&self) -> bool {
                self.v.is_finite() && self.g.iter().all(|x| x.is_finite()) && finite_tail(self)
            }
        }

        impl Add<f64> for $ty {
            type Output = $ty;
            #[inline]
            fn add(mut self, c: f64) -> $ty {
                self.v += c;
                self
            }
        }
        impl Sub<f64> for $ty {
            type Output = $ty;
            #[inline]
            fn sub(mut self, c: f64) -> $ty {
                self.v -= c;
                self
            }
        }
        impl Add<$ty> for f64 {
            type Output = $ty;
            #[inline]
            fn add(self, j: $ty) -> $ty {
                j + self
            }
        }
        impl Sub<$ty> for f64 {
            type Output = $ty;
            #[inline]
            fn sub(self, j: $ty) -> $ty {
                -j + self
            }
        }
        impl Mul<$ty> for f64 {
            type Output = $ty;
            #[inline]
            fn mul(self, j: $ty) -> $ty {
                j * self
            }
        }
        impl Div<$ty> for f64 {
            type Output = $ty;
            #[inline]
            fn div(self, j: $ty) -> $ty {
                j.recip() * self
            }
        }
        impl Div for $ty {
            type Output = $ty;
            #[inline]
            fn div(self, o: $ty) -> $ty {
                self * o.recip()
            }
        }
        impl Div<f64> for $ty {
            type Output = $ty;
            #[inline]
            fn div(self, c: f64) -> $ty {
                self * (1.0 / c)
            }
        }
        impl AddAssign for $ty {
            #[inline]
            fn add_assign(&mut self, o: $ty) {
                *self = *self + o;
            }
        }
        impl SubAssign for $ty {
            #[inline]
            fn sub_assign(&mut self, o: $ty) {
                *self = *self - o;
            }
        }
        impl MulAssign for $ty {
            #[inline]
            fn mul_assign(&mut self, o: $ty) {
                *self = *self * o;
            }
        }
        impl Default for $ty {
            fn default() -> Self {
                <$ty>::constant(0.0)
            }
        }
    };
}

macro_rules! chain1 {
    ($s:expr, $f0:expr, $f1:expr, $f2:expr) => {{
        let _ = $f2;
        $s.chain($f0, $f1)
    }};
}
macro_rules! chain2 {
    ($s:expr, $f0:expr, $f1:expr, $f2:expr) => {
        $s.chain($f0, $f1, $f2)
    };
}

fn finite_tail<T: HessTail>(x: &T) -> bool {
    x.tail_finite()
}
trait HessTail {
    fn tail_finite(&self) -> bool;
}
impl HessTail for Jet1 {
    fn tail_finite(&self) -> bool {
        true
    }
}
impl HessTail for Jet2 {
    fn tail_finite(&self) -> bool {
        self.h.iter().all(|x| x.is_finite())
    }
}

unary_impls!(Jet1, chain1);
unary_impls!(Jet2, chain2);

impl Add for Jet1 {
    type Output = Jet1;
    #[inline]
    fn add(self, o: Jet1) -> Jet1 {
        let n = self.n.max(o.n);
        let mut r = Jet1 { n, v: self.v + o.v, g: [0.0; MAX_DIM] };
        for i in 0..n {
            r.g[i] = self.g[i] + o.g[i];
        }
        r
    }
}
impl Sub for Jet1 {
    type Output = Jet1;
    #[inline]
    fn sub(self, o: Jet1) -> Jet1 {
        let n = self.n.max(o.n);
        let mut r = Jet1 { n, v: self.v - o.v, g: [0.0; MAX_DIM] };
        for i in 0..n {
            r.g[i] = self.g[i] - o.g[i];
        }
        r
    }
}
impl Mul for Jet1 {
    type Output = Jet1;
    #[inline]
    fn mul(self, o: Jet1) -> Jet1 {
        let n = self.n.max(o.n);
        let mut r = Jet1 { n, v: self.v * o.v, g: [0.0; MAX_DIM] };
        for i in 0..n {
            r.g[i] = self.g[i] * o.v + self.v * o.g[i];
        }
        r
    }
}
impl Mul<f64> for Jet1 {
    type Output = Jet1;
    #[inline]
    fn mul(mut self, c: f64) -> Jet1 {
        self.v *= c;
        for i in 0..self.n {
            self.g[i] *= c;
        }
        self
    }
}
impl Neg for Jet1 {
    type Output = Jet1;
    #[inline]
    fn neg(self) -> Jet1 {
        self * -1.0
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    #[inline]
    fn add(self, o: Jet2) -> Jet2 {
        let n = self.n.max(o.n);
        let mut r = Jet2 { n, v: self.v + o.v, g: [0.0; MAX_DIM], h: [0.0; HESS_LEN] };
        for i in 0..n {
            r.g[i] = self.g[i] + o.g[i];
        }
        for i in 0..n {
            for j in i..n {
                let k = hidx(i, j);
                r.h[k] = self.h[k] + o.h[k];
            }
        }
        r
    }
}
impl Sub for Jet2 {
    type Output = Jet2;
    #[inline]
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}
impl Mul for Jet2 {
    type Output = Jet2;
    #[inline]
    fn mul(self, o: Jet2) -> Jet2 {
        let n = self.n.max(o.n);
        let mut r = Jet2 { n, v: self.v * o.v, g: [0.0; MAX_DIM], h: [0.0; HESS_LEN] };
        for i in 0..n {
            r.g[i] = self.g[i] * o.v + self.v * o.g[i];
        }
        for i in 0..n {
            for j in i..n {
                let k = hidx(i, j);
                r.h[k] = self.h[k] * o.v
                    + self.v * o.h[k]
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i];
            }
        }
        r
    }
}
impl Mul<f64> for Jet2 {
    type Output = Jet2;
    #[inline]
    fn mul(mut self, c: f64) -> Jet2 {
        let n = self.n;
        self.v *= c;
        for i in 0..n {
            self.g[i] *= c;
        }
        for i in 0..n {
            for j in i..n {
                self.h[hidx(i, j)] *= c;
            }
        }
        self
    }
}
impl Neg for Jet2 {
    type Output = Jet2;
    #[inline]
    fn neg(self) -> Jet2 {
        self * -1.0
    }
}

/// Trait for jets that can be differentiated once, dropping one order.
pub trait Differentiable: Scalar {
    type Deriv: Scalar;
    fn partial(&self, k: usize) -> Self::Deriv;
    fn truncate(&self) -> Self::Deriv;
}

impl Differentiable for Jet2 {
    type Deriv = Jet1;
    #[inline]
    fn partial(&self, k: usize) -> Jet1 {
        self.d(k)
    }
    #[inline]
    fn truncate(&self) -> Jet1 {
        self.lift()
    }
}

impl Differentiable for Jet1 {
    type Deriv = f64;
    #[inline]
    fn partial(&self, k: usize) -> f64 {
        self.g[k]
    }
    #[inline]
    fn truncate(&self) -> f64 {
        self.v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy(x: f64, y: f64) -> (Jet2, Jet2) {
        (Jet2::seed(x, 0, 2), Jet2::seed(y, 1, 2))
    }

    #[test]
    fn product_of_monomials() {
        let (x, y) = xy(2.0, 3.0);
        let f = x * y * y;
        assert_eq!(f.v, 18.0);
        assert_eq!(f.grad(), &[9.0, 12.0]);
        assert_eq!(f.hessian(), vec![vec![0.0, 6.0], vec![6.0, 4.0]]);
    }

    #[test]
    fn log_at_one() {
        let x = Jet2::seed(1.0, 0, 1);
        let f = x.ln();
        assert_eq!((f.v, f.g[0], f.hess(0, 0)), (0.0, 1.0, -1.0));
    }

    #[test]
    fn log_of_negative_is_nan() {
        let x = Jet2::seed(-1.0, 0, 1);
        assert!(!x.ln().is_finite());
        assert!(!(Jet2::constant(1.0) / Jet2::seed(0.0, 0, 1)).is_finite());
    }

    #[test]
    fn exp_sin_against_central_differences() {
        let f = |x: f64, y: f64| x.exp() * y.sin();
        let (x, y) = xy(0.3, 0.7);
        let j = Scalar::exp(x) * Scalar::sin(y);
        let p = [0.3, 0.7];
        let eval = |q: &[f64]| f(q[0], q[1]);
        for i in 0..2 {
            let g = richardson_grad(&eval, &p, i);
            assert!((g - j.g[i]).abs() < 1e-7, "grad {i}: {g} vs {}", j.g[i]);
            for k in 0..2 {
                let h = richardson_hess(&eval, &p, i, k);
                assert!((h - j.hess(i, k)).abs() < 1e-7, "hess {i}{k}: {h} vs {}", j.hess(i, k));
            }
        }
    }

    fn richardson_grad(f: &dyn Fn(&[f64]) -> f64, p: &[f64], i: usize) -> f64 {
        let c = |h: f64| {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        };
        let h = 1e-3;
        (4.0 * c(h / 2.0) - c(h)) / 3.0
    }

    fn richardson_hess(f: &dyn Fn(&[f64]) -> f64, p: &[f64], i: usize, k: usize) -> f64 {
        let c = |h: f64| {
            let at = |si: f64, sk: f64| {
                let mut a = p.to_vec();
                a[i] += si * h;
                a[k] += sk * h;
                f(&a)
            };
            (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h)
        };
        let h = 1e-3;
        (4.0 * c(h / 2.0) - c(h)) / 3.0
    }

    #[test]
    fn derivative_jet_matches_hessian_row() {
        let (x, y) = xy(0.4, -1.2);
        let f = x * x * y + Scalar::sin(y);
        let dx = f.d(0);
        assert!((dx.v - 2.0 * 0.4 * -1.2).abs() < 1e-15);
        assert!((dx.g[0] - 2.0 * -1.2).abs() < 1e-15);
        assert!((dx.g[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn constants_mix_with_variables() {
        let x = Jet2::seed(2.0, 1, 3);
        let c = Jet2::constant(5.0);
        let f = c * x + c;
        assert_eq!(f.n, 3);
        assert_eq!(f.v, 15.0);
        assert_eq!(f.grad(), &[0.0, 5.0, 0.0]);
    }

    #[test]
    fn powers_and_roots() {
        let x = Jet2::seed(4.0, 0, 1);
        let s = x.sqrt();
        assert!((s.v - 2.0).abs() < 1e-15 && (s.g[0] - 0.25).abs() < 1e-15);
        assert!((s.hess(0, 0) + 1.0 / 32.0).abs() < 1e-15);
        let c = x.powi(3);
        assert_eq!((c.v, c.g[0], c.hess(0, 0)), (64.0, 48.0, 24.0));
        let q = x.powf(1.5);
        assert!((q.v - 8.0).abs() < 1e-12 && (q.g[0] - 3.0).abs() < 1e-12);
    }
}
