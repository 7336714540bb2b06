//! Hermitian data on a chart: fundamental form, Kaehler verdicts, Ricci
//! form, the operator f -> d(J df) and Lee forms.
//!
//! Sign conventions used throughout:
//! * omega(X, Y) = g(JX, Y), so omega_ab = J^k_a g_kb;
//! * rho(X, Y) = Ric(JX, Y);
//! * J acts on a 1-form by composition, (J a)(X) = a(JX). With this choice
//!   the positively curved disk metric (1 - |z|^2) |dz|^2 has
//!   rho = 1/2 d(J d ln(1 - |z|^2)) and flat space has d(J d |z|^2/2) = -2 dx^dy.

use crate::error::{GeomError, Result};
use crate::foliation::Splitting;
use crate::jet::{Jet1, Jet2, Scalar};
use crate::sampling::SamplePlan;
use crate::tensor::curvature::{curvature, i3};
use crate::tensor::fields::{ChartManifold, EndoField, Field, FormField, MetricField};
use crate::tensor::forms::{exterior_derivative, subsets, Form};
use crate::tensor::lie::nijenhuis;
use crate::tensor::linalg::Mat;

pub const DEFAULT_KAHLER_TOL: f64 = 1e-7;

/// A metric and an endomorphism on a chart, meant to be Hermitian.
#[derive(Clone, Debug)]
pub struct HermitianTriple {
    pub chart: ChartManifold,
    pub g: MetricField,
    pub j: EndoField,
}

/// omega_ab = J^k_a g_kb.
pub fn fundamental_matrix<T: Scalar>(g: &Mat<T>, j: &Mat<T>) -> Mat<T> {
    let n = g.n;
    let w = Mat::from_fn(n, |a, b| {
        let mut s = T::zero();
        for k in 0..n {
            s += j[(k, a)] * g[(k, b)];
        }
        s
    });
    // drop the symmetric roundoff part
    Mat::from_fn(n, |a, b| (w[(a, b)] - w[(b, a)]) * 0.5)
}

/// Largest entry of g(J., J.) - g and of J^2 + 1.
pub fn compatibility_residual(g: &Mat<f64>, j: &Mat<f64>) -> (f64, f64) {
    let n = g.n;
    let jt = j.transpose();
    let herm = jt.mul(g).mul(j).sub(g).max_abs();
    let sq = j.mul(j).add(&Mat::identity(n)).max_abs();
    (herm, sq)
}

impl HermitianTriple {
    pub fn new(chart: ChartManifold, g: MetricField, j: EndoField) -> Result<Self> {
        if g.dim != chart.dim || j.dim != chart.dim || chart.dim % 2 != 0 {
            return Err(GeomError::Invalid("metric, endomorphism and chart dimensions disagree".into()));
        }
        Ok(HermitianTriple { chart, g, j })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    /// Fundamental 2-form as a jet field.
    pub fn omega(&self) -> FormField {
        let (g, j) = (self.g.clone(), self.j.clone());
        Field::new(self.dim(), move |p: &[Jet2]| Form::two_form(&fundamental_matrix(&g.eval(p), &j.eval(p))))
    }

    /// Fundamental form with exact first and second derivatives at a point.
    pub fn omega_at(&self, p: &[f64]) -> Result<Form<Jet2>> {
        self.omega().at(p)
    }

    /// (hermitian residual, J^2 + 1 residual, |d omega|, |N_J|) at a point.
    pub fn residuals_at(&self, p: &[f64]) -> Result<[f64; 4]> {
        let g = self.g.at(p)?;
        let j = self.j.at(p)?;
        let (herm, sq) = compatibility_residual(&g.values(), &j.values());
        let w = Form::two_form(&fundamental_matrix(&g, &j));
        // a 2-form on a surface is automatically closed
        let dw = if w.n > 2 { exterior_derivative(&w)?.max_abs() } else { 0.0 };
        let nj = nijenhuis(&j).iter().fold(0.0f64, |m, x| m.max(x.v.abs()));
        Ok([herm, sq, dw, nj])
    }

    pub fn ricci_form_at(&self, p: &[f64]) -> Result<Form<f64>> {
        let g = self.g.at(p)?;
        let j = self.j.at(p)?.values();
        let c = curvature(&g, p)?;
        Ok(ricci_form(&c.ricci, &j))
    }
}

/// rho_ab = Ric(J d_a, d_b) = J^c_a Ric_cb, antisymmetrized.
pub fn ricci_form(ricci: &Mat<f64>, j: &Mat<f64>) -> Form<f64> {
    Form::two_form(&fundamental_matrix(ricci, j))
}

/// Verdict of the Kaehler test over a sample plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KahlerVerdict {
    /// max of |g(J., J.) - g| and |J^2 + 1|.
    pub compatible: f64,
    /// max |d omega|.
    pub closed: f64,
    /// max |N_J|.
    pub integrable: f64,
    pub is_kahler: bool,
}

pub fn kahler_verdict(t: &HermitianTriple, plan: &SamplePlan, tol: f64) -> Result<KahlerVerdict> {
    let mut r = [0.0f64; 4];
    for p in t.chart.sample(plan)? {
        let q = t.residuals_at(&p)?;
        for i in 0..4 {
            r[i] = r[i].max(q[i]);
        }
    }
    let compatible = r[0].max(r[1]);
    Ok(KahlerVerdict {
        compatible,
        closed: r[2],
        integrable: r[3],
        is_kahler: compatible <= tol && r[2] <= tol && r[3] <= tol,
    })
}

/// The 1-form a o J as first-order jets, from a second-order jet covector.
fn compose_j(a: &[Jet1], j: &Mat<Jet2>) -> Vec<Jet1> {
    let n = j.n;
    (0..n)
        .map(|b| {
            let mut s = Jet1::constant(0.0);
            for k in 0..n {
                s += a[k] * j[(k, b)].lift();
            }
            s
        })
        .collect()
}

/// d(J df) for a scalar jet f and a jet endomorphism J.
pub fn ddc(f: &Jet2, j: &Mat<Jet2>) -> Result<Form<f64>> {
    let n = j.n;
    let df: Vec<Jet1> = (0..n).map(|k| f.d(k)).collect();
    let jdf = compose_j(&df, j);
    exterior_derivative(&Form::one_form(&jdf))
}

/// Splits the fundamental form along a g-orthogonal, J-invariant splitting:
/// omega_plus(X, Y) = omega(P+ X, P+ Y) and likewise for the minus part.
pub fn split_fundamental(t: &HermitianTriple, s: &Splitting) -> (FormField, FormField) {
    let mk = |plus: bool| {
        let (g, j, s) = (t.g.clone(), t.j.clone(), s.clone());
        Field::new(t.dim(), move |p: &[Jet2]| {
            let w = fundamental_matrix(&g.eval(p), &j.eval(p));
            let pr = if plus { s.plus(p) } else { s.minus(p) };
            let prt = pr.transpose();
            Form::two_form(&prt.mul(&w).mul(&pr))
        })
    };
    (mk(true), mk(false))
}

/// Lee form of a Hermitian structure: the theta with d omega = theta ^ omega
/// plus a part orthogonal (in the metric) to everything of that shape.
pub fn lee_form_at(t: &HermitianTriple, p: &[f64]) -> Result<Vec<f64>> {
    let n = t.dim();
    if n < 4 {
        return Err(GeomError::Unsupported("Lee form needs real dimension at least 4".into()));
    }
    let g = t.g.at(p)?;
    let j = t.j.at(p)?;
    let w = Form::two_form(&fundamental_matrix(&g, &j));
    let dw = exterior_derivative(&w)?.values();
    let wv = w.values();
    let ginv = g.values().inverse().ok_or_else(|| GeomError::DegenerateMetric { point: p.to_vec() })?;
    let ip = |a: &Form<f64>, b: &Form<f64>| form_inner(a, b, &ginv);
    let imgs: Vec<Form<f64>> = (0..n)
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            Form::one_form(&e).wedge(&wv)
        })
        .collect::<Result<_>>()?;
    let a = Mat::from_fn(n, |k, l| ip(&imgs[k], &imgs[l]));
    let b: Vec<f64> = imgs.iter().map(|f| ip(f, &dw)).collect();
    let ainv = a.inverse().ok_or_else(|| GeomError::DegenerateMetric { point: p.to_vec() })?;
    Ok(ainv.apply(&b))
}

/// Metric inner product of two k-forms.
pub fn form_inner(a: &Form<f64>, b: &Form<f64>, ginv: &Mat<f64>) -> f64 {
    let subs = subsets(a.n, a.k);
    let mut s = 0.0;
    for (ia, ra) in subs.iter().enumerate() {
        if a.c[ia] == 0.0 {
            continue;
        }
        for (ib, rb) in subs.iter().enumerate() {
            if b.c[ib] == 0.0 {
                continue;
            }
            let m = Mat::from_fn(a.k, |x, y| ginv[(ra[x], rb[y])]);
            s += a.c[ia] * b.c[ib] * m.det();
        }
    }
    s
}

/// Norm of the Nijenhuis tensor values (max entry).
pub fn nijenhuis_max(j: &Mat<Jet2>) -> f64 {
    let n = j.n;
    let nj = nijenhuis(j);
    let mut m: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                m = m.max(nj[i3(n, a, b, c)].v.abs());
            }
        }
    }
    m
}

/// Standard complex structure on R^2m: J d_{x_k} = d_{y_k} with coordinates
/// ordered (x_1, y_1, x_2, y_2, ...).
pub fn standard_j(n: usize) -> Mat<Jet2> {
    let mut j = Mat::zeros(n);
    for k in (0..n).step_by(2) {
        j[(k + 1, k)] = Jet2::constant(1.0);
        j[(k, k + 1)] = Jet2::constant(-1.0);
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> HermitianTriple {
        let chart = ChartManifold::new("flat", vec![-1.0; n], vec![1.0; n]).unwrap();
        let g = Field::new(n, move |_: &[Jet2]| Mat::identity(n));
        let j = Field::new(n, move |_: &[Jet2]| standard_j(n));
        HermitianTriple::new(chart, g, j).unwrap()
    }

    #[test]
    fn flat_space_is_kahler() {
        let v = kahler_verdict(&flat(4), &SamplePlan::new(1, 10), DEFAULT_KAHLER_TOL).unwrap();
        assert!(v.is_kahler);
        assert_eq!(v.compatible, 0.0);
    }

    #[test]
    fn fundamental_form_of_flat_plane() {
        let w = flat(2).omega_at(&[0.1, 0.2]).unwrap();
        assert_eq!(w.get(&[0, 1]).v, 1.0);
    }

    #[test]
    fn ddc_of_half_square_norm() {
        let p = Jet2::seed_point(&[0.3, -0.2]);
        let f = (p[0] * p[0] + p[1] * p[1]) * 0.5;
        let w = ddc(&f, &standard_j(2)).unwrap();
        assert!((w.get(&[0, 1]) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn disk_ricci_form_matches_ddc() {
        // (1 - |z|^2) |dz|^2 has rho = 1/2 d J d ln(1 - |z|^2)
        let chart = ChartManifold::new("disk", vec![-0.6; 2], vec![0.6; 2]).unwrap();
        let g = Field::new(2, |p: &[Jet2]| {
            let c = 1.0 - (p[0] * p[0] + p[1] * p[1]);
            Mat::diag(&[c, c])
        });
        let j = Field::new(2, |_: &[Jet2]| standard_j(2));
        let t = HermitianTriple::new(chart, g, j).unwrap();
        for pt in [[0.1, 0.2], [-0.4, 0.3], [0.5, -0.1]] {
            let rho = t.ricci_form_at(&pt).unwrap();
            let x = Jet2::seed_point(&pt);
            let f = (1.0 - (x[0] * x[0] + x[1] * x[1])).ln();
            let rhs = ddc(&f, &standard_j(2)).unwrap();
            assert!((rho.c[0] - 0.5 * rhs.c[0]).abs() < 1e-12, "{} vs {}", rho.c[0], 0.5 * rhs.c[0]);
        }
    }

    #[test]
    fn rotated_complex_structure_breaks_compatibility() {
        let chart = ChartManifold::new("flat", vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let g = Field::new(2, |_: &[Jet2]| Mat::diag(&[Jet2::constant(1.0), Jet2::constant(4.0)]));
        let j = Field::new(2, |_: &[Jet2]| standard_j(2));
        let t = HermitianTriple::new(chart, g, j).unwrap();
        let v = kahler_verdict(&t, &SamplePlan::new(1, 4), DEFAULT_KAHLER_TOL).unwrap();
        assert!(!v.is_kahler && v.compatible > 1.0);
    }
}
