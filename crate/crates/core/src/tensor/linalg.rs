//! Small dense square matrices over any `Scalar`.
//!
//! Endomorphisms are stored with `m[(a, b)] = A^a_b`, so `A * v` is the usual
//! matrix-vector product and a metric `g[(a, b)] = g_ab`.

use std::ops::{Index, IndexMut};

use crate::jet::{Differentiable, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline(always)]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline(always)]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Mat { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Mat { n, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn diag(d: &[T]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { T::zero() })
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn mul(&self, o: &Mat<T>) -> Mat<T> {
        let n = self.n;
        Self::from_fn(n, |i, j| {
            let mut s = T::zero();
            for k in 0..n {
                s += self[(i, k)] * o[(k, j)];
            }
            s
        })
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let mut s = T::zero();
                for k in 0..self.n {
                    s += self[(i, k)] * v[k];
                }
                s
            })
            .collect()
    }

    /// Covector composed with the endomorphism: (a o A)_b = a_k A^k_b.
    pub fn pull_covector(&self, a: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|j| {
                let mut s = T::zero();
                for k in 0..self.n {
                    s += a[k] * self[(k, j)];
                }
                s
            })
            .collect()
    }

    pub fn add(&self, o: &Mat<T>) -> Mat<T> {
        Self::from_fn(self.n, |i, j| self[(i, j)] + o[(i, j)])
    }

    pub fn sub(&self, o: &Mat<T>) -> Mat<T> {
        Self::from_fn(self.n, |i, j| self[(i, j)] - o[(i, j)])
    }

    pub fn scale(&self, c: T) -> Mat<T> {
        Self::from_fn(self.n, |i, j| self[(i, j)] * c)
    }

    pub fn symmetrize(&self) -> Mat<T> {
        Self::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)]) * 0.5)
    }

    /// Bilinear form evaluated on two vectors.
    pub fn form(&self, x: &[T], y: &[T]) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                s += self[(i, j)] * x[i] * y[j];
            }
        }
        s
    }

    pub fn trace(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            s += self[(i, i)];
        }
        s
    }

    pub fn values(&self) -> Mat<f64> {
        Mat { n: self.n, data: self.data.iter().map(|x| x.value()).collect() }
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat { n: self.n, data: self.data.iter().map(f).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.value().abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting on the
    /// value part. Returns `None` when a pivot is negligible relative to the
    /// size of the matrix.
    pub fn inverse(&self) -> Option<Mat<T>> {
        let n = self.n;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[(r, col)].value().abs() > a[(piv, col)].value().abs() {
                    piv = r;
                }
            }
            if a[(piv, col)].value().abs() <= 1e-13 * scale {
                return None;
            }
            if piv != col {
                for k in 0..n {
                    a.data.swap(piv * n + k, col * n + k);
                    inv.data.swap(piv * n + k, col * n + k);
                }
            }
            let p = a[(col, col)].recip();
            for k in 0..n {
                a[(col, k)] = a[(col, k)] * p;
                inv[(col, k)] = inv[(col, k)] * p;
            }
            for r in 0..n {
                if r != col {
                    let f = a[(r, col)];
                    for k in 0..n {
                        let ak = a[(col, k)];
                        let ik = inv[(col, k)];
                        a[(r, k)] -= f * ak;
                        inv[(r, k)] -= f * ik;
                    }
                }
            }
        }
        Some(inv)
    }

    /// Determinant by elimination (value-pivoted, jet-valued).
    pub fn det(&self) -> T {
        let n = self.n;
        let mut a = self.clone();
        let mut det = T::one();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[(r, col)].value().abs() > a[(piv, col)].value().abs() {
                    piv = r;
                }
            }
            if a[(piv, col)].value() == 0.0 {
                return T::zero();
            }
            if piv != col {
                for k in 0..n {
                    a.data.swap(piv * n + k, col * n + k);
                }
                det = -det;
            }
            let p = a[(col, col)];
            det = det * p;
            let pr = p.recip();
            for r in col + 1..n {
                let f = a[(r, col)] * pr;
                for k in col..n {
                    let ak = a[(col, k)];
                    a[(r, k)] -= f * ak;
                }
            }
        }
        det
    }
}

impl<T: Differentiable> Mat<T> {
    /// Componentwise partial derivative along coordinate `k`.
    pub fn partial(&self, k: usize) -> Mat<T::Deriv> {
        Mat { n: self.n, data: self.data.iter().map(|x| x.partial(k)).collect() }
    }

    pub fn truncate(&self) -> Mat<T::Deriv> {
        Mat { n: self.n, data: self.data.iter().map(|x| x.truncate()).collect() }
    }
}

/// Frobenius norm of a plain matrix.
pub fn frobenius(m: &Mat<f64>) -> f64 {
    m.data.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

pub fn values<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.value()).collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Unit coordinate vector as constant scalars.
pub fn basis<T: Scalar>(n: usize, i: usize) -> Vec<T> {
    (0..n).map(|k| if k == i { T::one() } else { T::zero() }).collect()
}
