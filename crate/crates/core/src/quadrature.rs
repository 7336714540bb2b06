//! Gauss-Legendre quadrature on [0, 1], applied componentwise to anything
//! that supports the jet arithmetic.

use crate::error::GeomError;
use crate::jet::Scalar;

/// Default number of nodes for path integrals.
pub const DEFAULT_ORDER: usize = 32;
const MAX_ORDER: usize = 512;

/// Nodes and weights of an n-point Gauss-Legendre rule mapped to [0, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Result<Self, GeomError> {
        if order == 0 || order > MAX_ORDER {
            return Err(GeomError::InvalidOrder(order));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton iteration on P_n from the usual Chebyshev-like guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integral over [0, 1] of a scalar- or jet-valued integrand.
    pub fn integrate<T: Scalar>(&self, mut f: impl FnMut(f64) -> T) -> T {
        let mut acc = T::zero();
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc += f(t) * w;
        }
        acc
    }

    /// Componentwise integral of a vector-valued integrand.
    pub fn integrate_vec<T: Scalar>(&self, mut f: impl FnMut(f64) -> Vec<T>) -> Vec<T> {
        let mut acc: Option<Vec<T>> = None;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(t);
            match acc.as_mut() {
                None => acc = Some(v.into_iter().map(|x| x * w).collect()),
                Some(a) => {
                    for (ai, vi) in a.iter_mut().zip(v) {
                        *ai += vi * w;
                    }
                }
            }
        }
        acc.unwrap_or_default()
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
