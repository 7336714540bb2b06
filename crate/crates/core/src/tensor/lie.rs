//! Lie derivatives, brackets and the Nijenhuis tensor in coordinates.
//! Each operation differentiates once, so the output is one jet order lower
//! than the input.

use crate::jet::{Differentiable, Scalar};
use crate::tensor::curvature::i3;
use crate::tensor::linalg::Mat;

/// (L_V g)_ab = V^c d_c g_ab + g_cb d_a V^c + g_ac d_b V^c.
pub fn lie_metric<T: Differentiable>(v: &[T], g: &Mat<T>) -> Mat<T::Deriv> {
    let n = g.n;
    let vt: Vec<T::Deriv> = v.iter().map(|x| x.truncate()).collect();
    let gt = g.truncate();
    let dg: Vec<Mat<T::Deriv>> = (0..n).map(|c| g.partial(c)).collect();
    let dv: Vec<Vec<T::Deriv>> = (0..n).map(|a| v.iter().map(|x| x.partial(a)).collect()).collect();
    Mat::from_fn(n, |a, b| {
        let mut s = T::Deriv::zero();
        for c in 0..n {
            s += vt[c] * dg[c][(a, b)] + gt[(c, b)] * dv[a][c] + gt[(a, c)] * dv[b][c];
        }
        s
    })
}

/// [X, Y]^a = X^c d_c Y^a - Y^c d_c X^a.
pub fn bracket<T: Differentiable>(x: &[T], y: &[T]) -> Vec<T::Deriv> {
    let n = x.len();
    (0..n)
        .map(|a| {
            let mut s = T::Deriv::zero();
            for c in 0..n {
                s += x[c].truncate() * y[a].partial(c) - y[c].truncate() * x[a].partial(c);
            }
            s
        })
        .collect()
}

/// (L_V A)^a_b = V^c d_c A^a_b - A^c_b d_c V^a + A^a_c d_b V^c.
pub fn lie_endo<T: Differentiable>(v: &[T], a: &Mat<T>) -> Mat<T::Deriv> {
    let n = a.n;
    let at = a.truncate();
    Mat::from_fn(n, |i, j| {
        let mut s = T::Deriv::zero();
        for c in 0..n {
            s += v[c].truncate() * a[(i, j)].partial(c) - at[(c, j)] * v[i].partial(c)
                + at[(i, c)] * v[c].partial(j);
        }
        s
    })
}

/// Directional derivative X(f).
pub fn directional<T: Differentiable>(x: &[T::Deriv], f: &T) -> T::Deriv {
    let mut s = T::Deriv::zero();
    for (c, xc) in x.iter().enumerate() {
        s += *xc * f.partial(c);
    }
    s
}

/// Nijenhuis tensor N(X,Y) = [JX,JY] - J[JX,Y] - J[X,JY] - [X,Y] in
/// components N^a_bc, stored at `i3(n, a, b, c)`.
pub fn nijenhuis<T: Differentiable>(j: &Mat<T>) -> Vec<T::Deriv> {
    let n = j.n;
    let jt = j.truncate();
    let dj: Vec<Mat<T::Deriv>> = (0..n).map(|k| j.partial(k)).collect();
    let mut out = vec![T::Deriv::zero(); n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in b + 1..n {
                let mut s = T::Deriv::zero();
                for d in 0..n {
                    s += jt[(d, b)] * dj[d][(a, c)] - jt[(d, c)] * dj[d][(a, b)];
                    s -= jt[(a, d)] * (dj[b][(d, c)] - dj[c][(d, b)]);
                }
                out[i3(n, a, b, c)] = s;
                out[i3(n, a, c, b)] = -s;
            }
        }
    }
    out
}
