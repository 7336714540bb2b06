//! Differential forms at a point, stored by strictly increasing index sets.
//!
//! A k-form in dimension n keeps one coefficient per k-subset of 0..n; any
//! other index tuple is recovered through `get` with the permutation sign, so
//! antisymmetry holds by construction.

use crate::error::{GeomError, Result};
use crate::jet::{Differentiable, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Form<T> {
    pub n: usize,
    pub k: usize,
    pub c: Vec<T>,
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// All strictly increasing k-tuples of 0..n in rank order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binom(n, k));
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Rank of a strictly increasing index tuple in the lexicographic order
/// produced by `subsets`.
pub fn rank(n: usize, idx: &[usize]) -> usize {
    let k = idx.len();
    let mut r = 0;
    let mut prev = 0;
    for (pos, &i) in idx.iter().enumerate() {
        for skipped in prev..i {
            r += binom(n - skipped - 1, k - pos - 1);
        }
        prev = i + 1;
    }
    r
}

/// Sorts a tuple and returns the sign of the sorting permutation, or `None`
/// when an index repeats.
pub fn sort_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            } else if v[j] == v[j + 1] {
                return None;
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

impl<T: Scalar> Form<T> {
    pub fn zero(n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(GeomError::DegreeOverflow { degree: k, dim: n });
        }
        Ok(Form { n, k, c: vec![T::zero(); binom(n, k)] })
    }

    /// 0-form.
    pub fn scalar(n: usize, v: T) -> Self {
        Form { n, k: 0, c: vec![v] }
    }

    /// 1-form from covector components.
    pub fn one_form(a: &[T]) -> Self {
        Form { n: a.len(), k: 1, c: a.to_vec() }
    }

    /// 2-form from an antisymmetric matrix (only the upper triangle is read).
    pub fn two_form(m: &crate::tensor::linalg::Mat<T>) -> Self {
        let n = m.n;
        let c = subsets(n, 2).iter().map(|s| m[(s[0], s[1])]).collect();
        Form { n, k: 2, c }
    }

    /// Antisymmetric matrix of a 2-form.
    pub fn to_matrix(&self) -> crate::tensor::linalg::Mat<T> {
        assert_eq!(self.k, 2);
        crate::tensor::linalg::Mat::from_fn(self.n, |i, j| self.get(&[i, j]))
    }

    /// Component on an arbitrary index tuple (antisymmetric extension).
    pub fn get(&self, idx: &[usize]) -> T {
        match sort_sign(idx) {
            None => T::zero(),
            Some((s, sign)) => self.c[rank(self.n, &s)] * sign,
        }
    }

    pub fn set(&mut self, sorted: &[usize], v: T) {
        let r = rank(self.n, sorted);
        self.c[r] = v;
    }

    pub fn add(&self, o: &Form<T>) -> Form<T> {
        assert_eq!((self.n, self.k), (o.n, o.k));
        Form { n: self.n, k: self.k, c: self.c.iter().zip(&o.c).map(|(a, b)| *a + *b).collect() }
    }

    pub fn sub(&self, o: &Form<T>) -> Form<T> {
        assert_eq!((self.n, self.k), (o.n, o.k));
        Form { n: self.n, k: self.k, c: self.c.iter().zip(&o.c).map(|(a, b)| *a - *b).collect() }
    }

    pub fn scale(&self, s: T) -> Form<T> {
        Form { n: self.n, k: self.k, c: self.c.iter().map(|a| *a * s).collect() }
    }

    pub fn values(&self) -> Form<f64> {
        Form { n: self.n, k: self.k, c: self.c.iter().map(|a| a.value()).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.value().abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    pub fn wedge(&self, o: &Form<T>) -> Result<Form<T>> {
        assert_eq!(self.n, o.n);
        let n = self.n;
        let mut out = Form::zero(n, self.k + o.k)?;
        let sa = subsets(n, self.k);
        let sb = subsets(n, o.k);
        for (ia, a) in sa.iter().enumerate() {
            for (ib, b) in sb.iter().enumerate() {
                let mut idx = a.clone();
                idx.extend_from_slice(b);
                if let Some((s, sign)) = sort_sign(&idx) {
                    let r = rank(n, &s);
                    out.c[r] += self.c[ia] * o.c[ib] * sign;
                }
            }
        }
        Ok(out)
    }

    /// Interior product with a vector in the first slot.
    pub fn interior(&self, v: &[T]) -> Form<T> {
        let n = self.n;
        if self.k == 0 {
            return Form { n, k: 0, c: vec![T::zero()] };
        }
        let mut out = Form::zero(n, self.k - 1).expect("degree fits");
        for (r, s) in subsets(n, self.k - 1).iter().enumerate() {
            let mut acc = T::zero();
            for (i, vi) in v.iter().enumerate() {
                let mut idx = vec![i];
                idx.extend_from_slice(s);
                acc += *vi * self.get(&idx);
            }
            out.c[r] = acc;
        }
        out
    }

    /// Evaluates the form on k vectors.
    pub fn eval(&self, vs: &[Vec<T>]) -> T {
        let mut f = self.clone();
        for v in vs {
            f = f.interior(v);
        }
        f.c[0]
    }

    /// Pulls a form on the trailing coordinates of a product chart back to
    /// the full chart: coordinate i of `self` becomes coordinate i + offset.
    pub fn shift(&self, offset: usize, n_total: usize) -> Form<T> {
        let mut out = Form::zero(n_total, self.k).expect("degree fits");
        for (r, s) in subsets(self.n, self.k).iter().enumerate() {
            let t: Vec<usize> = s.iter().map(|i| i + offset).collect();
            out.set(&t, self.c[r]);
        }
        out
    }

    /// Power of a form under the wedge product.
    pub fn wedge_power(&self, m: usize) -> Result<Form<T>> {
        let mut out = Form::scalar(self.n, T::one());
        for _ in 0..m {
            out = out.wedge(self)?;
        }
        Ok(out)
    }
}

/// Exterior derivative: drops one jet order.
pub fn exterior_derivative<T: Differentiable>(w: &Form<T>) -> Result<Form<T::Deriv>> {
    let n = w.n;
    let mut out: Form<T::Deriv> = Form::zero(n, w.k + 1)?;
    for (r, s) in subsets(n, w.k + 1).iter().enumerate() {
        let mut acc = T::Deriv::zero();
        for j in 0..s.len() {
            let mut rest = s.clone();
            let i = rest.remove(j);
            let term = w.c[rank(n, &rest)].partial(i);
            if j % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        out.c[r] = acc;
    }
    Ok(out)
}

/// Drops one jet order without differentiating.
pub fn truncate_form<T: Differentiable>(w: &Form<T>) -> Form<T::Deriv> {
    Form { n: w.n, k: w.k, c: w.c.iter().map(|x| x.truncate()).collect() }
}
