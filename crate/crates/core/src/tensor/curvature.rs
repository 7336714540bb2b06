//! Levi-Civita connection and curvature from a jet-valued metric.
//!
//! Conventions: R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z,
//! R_abcd = g(R(d_a, d_b) d_c, d_d) and Ric(X,Y) = tr(Z -> R(Z,X)Y). With these
//! the unit sphere has positive sectional curvature R(X,Y,Y,X) > 0.

use crate::error::{GeomError, Result};
use crate::jet::{Differentiable, Jet2, Scalar};
use crate::tensor::fields::MetricField;
use crate::tensor::linalg::Mat;

#[inline(always)]
pub fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

#[inline(always)]
pub fn i4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

/// Christoffel symbols Gamma^k_ij stored at `i3(n, k, i, j)`, one jet order
/// below the metric. `None` when the metric is singular.
pub fn christoffel<T: Differentiable>(g: &Mat<T>) -> Option<(Mat<T::Deriv>, Vec<T::Deriv>)> {
    let n = g.n;
    let ginv = g.truncate().inverse()?;
    let dg: Vec<Mat<T::Deriv>> = (0..n).map(|k| g.partial(k)).collect();
    // first-kind symbols [ij, l] = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    let mut first = vec![T::Deriv::zero(); n * n * n];
    for i in 0..n {
        for j in i..n {
            for l in 0..n {
                let v = (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]) * 0.5;
                first[i3(n, l, i, j)] = v;
                first[i3(n, l, j, i)] = v;
            }
        }
    }
    let mut gamma = vec![T::Deriv::zero(); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut s = T::Deriv::zero();
                for l in 0..n {
                    s += ginv[(k, l)] * first[i3(n, l, i, j)];
                }
                gamma[i3(n, k, i, j)] = s;
                gamma[i3(n, k, j, i)] = s;
            }
        }
    }
    Some((ginv, gamma))
}

/// Everything curvature-related at one point.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub n: usize,
    pub g: Mat<f64>,
    pub ginv: Mat<f64>,
    pub gamma: Vec<f64>,
    /// R^l_ijk at `i4(n, l, i, j, k)`, meaning R(d_i, d_j) d_k = R^l_ijk d_l.
    pub riem_up: Vec<f64>,
    /// R_ijkd = g(R(d_i, d_j) d_k, d_d) at `i4(n, i, j, k, d)`.
    pub riem: Vec<f64>,
    pub ricci: Mat<f64>,
    pub scalar: f64,
}

impl Curvature {
    #[inline]
    pub fn r(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.riem[i4(self.n, a, b, c, d)]
    }

    pub fn max_riemann(&self) -> f64 {
        self.riem.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Full curvature tensor evaluated on four vectors.
    pub fn r_on(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                if y[b] == 0.0 {
                    continue;
                }
                for c in 0..n {
                    if z[c] == 0.0 {
                        continue;
                    }
                    for d in 0..n {
                        s += x[a] * y[b] * z[c] * w[d] * self.riem[i4(n, a, b, c, d)];
                    }
                }
            }
        }
        s
    }

    /// Pointwise g-norm of the Ricci tensor.
    pub fn ricci_norm(&self) -> f64 {
        tensor2_norm(&self.ricci, &self.ginv)
    }

    /// Largest violation of the algebraic curvature identities.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let r = self.r(a, b, c, d);
                        m = m.max((r + self.r(b, a, c, d)).abs());
                        m = m.max((r + self.r(a, b, d, c)).abs());
                        m = m.max((r - self.r(c, d, a, b)).abs());
                        m = m.max((r + self.r(b, c, a, d) + self.r(c, a, b, d)).abs());
                    }
                }
            }
        }
        m
    }
}

/// g-norm of a covariant 2-tensor.
pub fn tensor2_norm(t: &Mat<f64>, ginv: &Mat<f64>) -> f64 {
    let raised = ginv.mul(t).mul(ginv);
    let mut s = 0.0;
    for i in 0..t.n {
        for j in 0..t.n {
            s += raised[(i, j)] * t[(i, j)];
        }
    }
    s.max(0.0).sqrt()
}

/// Curvature from a metric given as second-order jets.
pub fn curvature(g: &Mat<Jet2>, point: &[f64]) -> Result<Curvature> {
    let n = g.n;
    let (ginv, gamma) =
        christoffel(g).ok_or_else(|| GeomError::DegenerateMetric { point: point.to_vec() })?;
    let gv = g.values();
    let gam: Vec<f64> = gamma.iter().map(|x| x.v).collect();
    let mut up = vec![0.0; n * n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in i + 1..n {
                for k in 0..n {
                    let mut s = gamma[i3(n, l, j, k)].g[i] - gamma[i3(n, l, i, k)].g[j];
                    for m in 0..n {
                        s += gam[i3(n, l, i, m)] * gam[i3(n, m, j, k)]
                            - gam[i3(n, l, j, m)] * gam[i3(n, m, i, k)];
                    }
                    up[i4(n, l, i, j, k)] = s;
                    up[i4(n, l, j, i, k)] = -s;
                }
            }
        }
    }
    let mut riem = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for d in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += gv[(d, l)] * up[i4(n, l, i, j, k)];
                    }
                    riem[i4(n, i, j, k, d)] = s;
                }
            }
        }
    }
    let ricci = Mat::from_fn(n, |b, c| (0..n).map(|a| up[i4(n, a, a, b, c)]).sum::<f64>()).symmetrize();
    let ginv_v = ginv.map(|x| x.v);
    let mut scalar = 0.0;
    for b in 0..n {
        for c in 0..n {
            scalar += ginv_v[(b, c)] * ricci[(b, c)];
        }
    }
    Ok(Curvature { n, g: gv, ginv: ginv_v, gamma: gam, riem_up: up, riem, ricci, scalar })
}

pub fn curvature_at(metric: &MetricField, p: &[f64]) -> Result<Curvature> {
    let g = metric.at(p)?;
    curvature(&g, p)
}

/// Christoffel symbols (values only) at a point.
pub fn christoffel_at(metric: &MetricField, p: &[f64]) -> Result<Vec<f64>> {
    let g = metric.at(p)?;
    let (_, gamma) = christoffel(&g).ok_or_else(|| GeomError::DegenerateMetric { point: p.to_vec() })?;
    Ok(gamma.iter().map(|x| x.v).collect())
}

/// Covariant derivative of an endomorphism field from its value and
/// coordinate partials: entry `a` is nabla_{d_a} A.
pub fn covariant_endo(gamma: &[f64], a: &Mat<f64>, da: &[Mat<f64>]) -> Vec<Mat<f64>> {
    let n = a.n;
    (0..n)
        .map(|k| {
            Mat::from_fn(n, |b, c| {
                let mut s = da[k][(b, c)];
                for d in 0..n {
                    s += gamma[i3(n, b, k, d)] * a[(d, c)] - gamma[i3(n, d, k, c)] * a[(b, d)];
                }
                s
            })
        })
        .collect()
}

/// Covariant derivative nabla_X Y of a vector field given its value and
/// coordinate partials `dy[k][a] = d_k Y^a`.
pub fn covariant_vector(gamma: &[f64], x: &[f64], y: &[f64], dy: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|a| {
            let mut s = 0.0;
            for k in 0..n {
                s += x[k] * dy[k][a];
                for b in 0..n {
                    s += gamma[i3(n, a, k, b)] * x[k] * y[b];
                }
            }
            s
        })
        .collect()
}
