//! Conformal (homothetic) foliations: the Lee form, the tensor xi measuring
//! the failure of the projected connection to be Levi-Civita, the structure
//! equations of a holomorphic homothetic foliation and a classifier.
//!
//! D+ is the foliation (rank 2 in practice) and D- its g-orthogonal
//! complement. The Lee form theta is defined by
//! (L_V g)|D- = theta(V) g|D- for V in D+, theta|D- = 0.

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::hermitian::{fundamental_matrix, HermitianTriple};
use crate::jet::{Jet1, Jet2, Scalar};
use crate::sampling::SamplePlan;
use crate::tensor::curvature::{christoffel, covariant_endo};
use crate::tensor::fields::{EndoField, Field, Finite, MetricField};
use crate::tensor::forms::{exterior_derivative, Form};
use crate::tensor::lie::{lie_endo, lie_metric};
use crate::tensor::linalg::{basis, Mat};

/// Points where |theta| falls below this are skipped by checks that divide
/// by |theta|.
pub const THETA_FLOOR: f64 = 1e-6;

impl Finite for Vec<Vec<Jet2>> {
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// A g-orthogonal splitting TM = D+ + D-, given by the projector onto D+.
#[derive(Clone, Debug)]
pub struct Splitting {
    pub dim: usize,
    pub rank_plus: usize,
    proj: EndoField,
}

impl Splitting {
    /// D+ spanned by the given vector fields; D- is its g-orthogonal
    /// complement. P+ = V (V^T g V)^-1 V^T g.
    pub fn from_frame(g: &MetricField, frame: Field<Vec<Vec<Jet2>>>, rank_plus: usize) -> Self {
        let g = g.clone();
        let dim = g.dim;
        let proj = Field::new(dim, move |p: &[Jet2]| {
            let gm = g.eval(p);
            let vs = frame.eval(p);
            orthogonal_projector(&gm, &vs)
        });
        Splitting { dim, rank_plus, proj }
    }

    /// D+ spanned by the first coordinate vectors d_0 .. d_{rank-1}.
    pub fn leading_coordinates(g: &MetricField, rank_plus: usize) -> Self {
        let dim = g.dim;
        let frame = Field::new(dim, move |_: &[Jet2]| (0..rank_plus).map(|i| basis::<Jet2>(dim, i)).collect());
        Splitting::from_frame(g, frame, rank_plus)
    }

    pub fn from_projector(dim: usize, rank_plus: usize, proj: EndoField) -> Self {
        Splitting { dim, rank_plus, proj }
    }

    #[inline]
    pub fn plus(&self, p: &[Jet2]) -> Mat<Jet2> {
        self.proj.eval(p)
    }

    pub fn minus(&self, p: &[Jet2]) -> Mat<Jet2> {
        Mat::identity(self.dim).sub(&self.plus(p))
    }

    pub fn plus_at(&self, p: &[f64]) -> Result<Mat<Jet2>> {
        self.proj.at(p)
    }

    /// (idempotence, g-orthogonality, J-invariance) residuals at a point.
    pub fn validate_at(&self, g: &MetricField, j: &EndoField, p: &[f64]) -> Result<[f64; 3]> {
        let pp = self.plus_at(p)?.values();
        let gv = g.at(p)?.values();
        let jv = j.at(p)?.values();
        let idem = pp.mul(&pp).sub(&pp).max_abs();
        let pm = Mat::identity(self.dim).sub(&pp);
        let orth = pp.transpose().mul(&gv).mul(&pm).max_abs();
        let jinv = pp.mul(&jv).sub(&jv.mul(&pp)).max_abs();
        Ok([idem, orth, jinv])
    }
}

/// P = V (V^T g V)^-1 V^T g for a list of spanning vectors.
pub fn orthogonal_projector<T: Scalar>(g: &Mat<T>, vs: &[Vec<T>]) -> Mat<T> {
    let n = g.n;
    let r = vs.len();
    let gv: Vec<Vec<T>> = vs.iter().map(|v| g.apply(v)).collect();
    let gram = Mat::from_fn(r, |a, b| crate::tensor::linalg::dot(&vs[a], &gv[b]));
    let ginv = match gram.inverse() {
        Some(m) => m,
        None => return Mat::from_fn(n, |_, _| T::cst(f64::NAN)),
    };
    Mat::from_fn(n, |a, b| {
        let mut s = T::zero();
        for x in 0..r {
            for y in 0..r {
                s += vs[x][a] * ginv[(x, y)] * gv[y][b];
            }
        }
        s
    })
}

/// The Lee form theta as first-order jets (so that d theta is available).
pub fn lee_form_jet(g: &Mat<Jet2>, pplus: &Mat<Jet2>, rank_plus: usize) -> Option<Vec<Jet1>> {
    let n = g.n;
    let dminus = (n - rank_plus) as f64;
    let ginv = g.truncate().inverse()?;
    let pm = Mat::identity(n).sub(&pplus.truncate());
    // inverse metric on D-* : P- g^-1 P-^T
    let h = pm.mul(&ginv).mul(&pm.transpose());
    let mut theta = Vec::with_capacity(n);
    for i in 0..n {
        let v: Vec<Jet2> = (0..n).map(|a| pplus[(a, i)]).collect();
        let l = lie_metric(&v, g);
        let mut tr = Jet1::constant(0.0);
        for a in 0..n {
            for b in 0..n {
                tr += h[(a, b)] * l[(a, b)];
            }
        }
        theta.push(tr / dminus);
    }
    Some(theta)
}

/// Everything at one point needed by the foliation checks.
struct PointData {
    n: usize,
    g: Mat<f64>,
    ginv: Mat<f64>,
    j: Mat<f64>,
    pp: Mat<f64>,
    pm: Mat<f64>,
    theta: Vec<f64>,
    theta_jet: Vec<Jet1>,
    /// xi[k] = xi_{d_k} as an endomorphism.
    xi: Vec<Mat<f64>>,
}

impl PointData {
    fn new(g: &Mat<Jet2>, j: &Mat<Jet2>, pplus: &Mat<Jet2>, rank_plus: usize, p: &[f64]) -> Result<Self> {
        let n = g.n;
        let degen = || GeomError::DegenerateMetric { point: p.to_vec() };
        let (ginv, gamma) = christoffel(g).ok_or_else(degen)?;
        let gamma: Vec<f64> = gamma.iter().map(|x| x.v).collect();
        let theta_jet = lee_form_jet(g, pplus, rank_plus).ok_or_else(degen)?;
        let pp = pplus.values();
        let pm = Mat::identity(n).sub(&pp);
        let dp: Vec<Mat<f64>> = (0..n).map(|k| pplus.map(|x| x.g[k])).collect();
        let nabla_p = covariant_endo(&gamma, &pp, &dp);
        let sign = pp.sub(&pm);
        let xi = nabla_p.iter().map(|m| sign.mul(m)).collect();
        Ok(PointData {
            n,
            g: g.values(),
            ginv: ginv.map(|x| x.v),
            j: j.values(),
            pp,
            pm,
            theta: theta_jet.iter().map(|x| x.v).collect(),
            theta_jet,
            xi,
        })
    }

    fn zeta(&self) -> Vec<f64> {
        self.ginv.apply(&self.theta)
    }

    fn theta_norm(&self) -> f64 {
        crate::tensor::linalg::dot(&self.theta, &self.zeta()).max(0.0).sqrt()
    }

    fn xi_on(&self, x: &[f64]) -> Mat<f64> {
        let mut m = Mat::zeros(self.n);
        for (k, xk) in x.iter().enumerate() {
            if *xk != 0.0 {
                m = m.add(&self.xi[k].scale(*xk));
            }
        }
        m
    }

    fn plus_frame(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.pp.apply(&basis(self.n, i))).collect()
    }

    fn minus_frame(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.pm.apply(&basis(self.n, i))).collect()
    }

    /// max over frames of |(L_V g)|D- - theta(V) g|D-|.
    fn homothetic(&self, g: &Mat<Jet2>, pplus: &Mat<Jet2>) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for i in 0..n {
            let v: Vec<Jet2> = (0..n).map(|a| pplus[(a, i)]).collect();
            let l = lie_metric(&v, g).values();
            let th = self.theta[i];
            let diff = l.sub(&self.g.scale(th));
            let restricted = self.pm.transpose().mul(&diff).mul(&self.pm);
            m = m.max(restricted.max_abs());
        }
        m
    }

    /// xi_X Y minus its zeta-part for X, Y in D-.
    fn ring(&self) -> f64 {
        let zeta = self.zeta();
        let jzeta = self.j.apply(&zeta);
        let frame = self.minus_frame();
        let mut m: f64 = 0.0;
        for x in &frame {
            let xi = self.xi_on(x);
            let jx = self.j.apply(x);
            for y in &frame {
                let v = xi.apply(y);
                let a = 0.5 * self.g.form(&jx, y);
                let b = 0.5 * self.g.form(x, y);
                for k in 0..self.n {
                    m = m.max((v[k] - a * jzeta[k] - b * zeta[k]).abs());
                }
            }
        }
        m
    }

    fn dplus_geodesic(&self) -> f64 {
        let frame = self.plus_frame();
        let mut m: f64 = 0.0;
        for v in &frame {
            let xi = self.xi_on(v);
            for w in &frame {
                m = m.max(crate::tensor::linalg::max_abs(&xi.apply(w)));
            }
        }
        m
    }

    fn xi_max(&self) -> f64 {
        self.xi.iter().fold(0.0, |m, x| m.max(x.max_abs()))
    }

    /// max |[xi_X, J]| and the diagonal-block parts of xi (both should vanish).
    fn xi_structure(&self) -> f64 {
        let mut m: f64 = 0.0;
        for x in &self.xi {
            m = m.max(x.mul(&self.j).sub(&self.j.mul(x)).max_abs());
            m = m.max(self.pp.mul(x).mul(&self.pp).max_abs());
            m = m.max(self.pm.mul(x).mul(&self.pm).max_abs());
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoliationReport {
    pub homothetic_residual: f64,
    pub dtheta_residual: f64,
    pub theta_norm_min: f64,
    pub theta_norm_max: f64,
    /// xi restricted to D+ x D+ (zero iff D+ is totally geodesic).
    pub dplus_geodesic_residual: f64,
    /// xi on D- x D- minus the zeta-terms.
    pub ring_residual: f64,
    /// [xi_X, J] and the block-diagonal parts of xi.
    pub xi_structure_residual: f64,
    pub xi_max: f64,
    pub points: usize,
}

fn point_data(t: &HermitianTriple, s: &Splitting, p: &[f64]) -> Result<(PointData, Mat<Jet2>, Mat<Jet2>)> {
    let g = t.g.at(p)?;
    let j = t.j.at(p)?;
    let pplus = s.plus_at(p)?;
    let d = PointData::new(&g, &j, &pplus, s.rank_plus, p)?;
    Ok((d, g, pplus))
}

/// Lee form values at a point.
pub fn lee_form_at(t: &HermitianTriple, s: &Splitting, p: &[f64]) -> Result<Vec<f64>> {
    Ok(point_data(t, s, p)?.0.theta)
}

/// Foliation residuals at a single point (`points` = 1).
pub fn foliation_at(t: &HermitianTriple, s: &Splitting, p: &[f64]) -> Result<FoliationReport> {
    let (d, g, pplus) = point_data(t, s, p)?;
    let tn = d.theta_norm();
    Ok(FoliationReport {
        homothetic_residual: d.homothetic(&g, &pplus),
        dtheta_residual: exterior_derivative(&Form::one_form(&d.theta_jet))?.max_abs(),
        theta_norm_min: tn,
        theta_norm_max: tn,
        dplus_geodesic_residual: d.dplus_geodesic(),
        ring_residual: d.ring(),
        xi_structure_residual: d.xi_structure(),
        xi_max: d.xi_max(),
        points: 1,
    })
}

pub fn foliation_report(t: &HermitianTriple, s: &Splitting, plan: &SamplePlan) -> Result<FoliationReport> {
    let pts = t.chart.sample(plan)?;
    let mut r = FoliationReport {
        homothetic_residual: 0.0,
        dtheta_residual: 0.0,
        theta_norm_min: f64::INFINITY,
        theta_norm_max: 0.0,
        dplus_geodesic_residual: 0.0,
        ring_residual: 0.0,
        xi_structure_residual: 0.0,
        xi_max: 0.0,
        points: pts.len(),
    };
    for p in &pts {
        let q = foliation_at(t, s, p)?;
        r.homothetic_residual = r.homothetic_residual.max(q.homothetic_residual);
        r.dtheta_residual = r.dtheta_residual.max(q.dtheta_residual);
        r.theta_norm_min = r.theta_norm_min.min(q.theta_norm_min);
        r.theta_norm_max = r.theta_norm_max.max(q.theta_norm_max);
        r.dplus_geodesic_residual = r.dplus_geodesic_residual.max(q.dplus_geodesic_residual);
        r.ring_residual = r.ring_residual.max(q.ring_residual);
        r.xi_structure_residual = r.xi_structure_residual.max(q.xi_structure_residual);
        r.xi_max = r.xi_max.max(q.xi_max);
    }
    Ok(r)
}

/// Residuals of the structure equations of a holomorphic homothetic
/// foliation. Points with |theta| < `THETA_FLOOR` are excluded from the
/// checks that need theta to be nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureReport {
    /// d omega- - theta ^ omega-.
    pub d_omega_minus: f64,
    /// P- o (L_V J) for V in D+.
    pub holomorphy: f64,
    /// chi_1 read off L_zeta J against -2 |theta|^-2 L_{J zeta} ln|theta|.
    pub chi1: f64,
    /// L_zeta J minus its reconstruction from (chi_1, chi_2).
    pub lzeta_shape: f64,
    pub points_used: usize,
    pub points_excluded: usize,
}

pub fn structure_at(t: &HermitianTriple, s: &Splitting, p: &[f64]) -> Result<(f64, f64, Option<(f64, f64)>)> {
    let n = t.dim();
    let (d, g, pplus) = point_data(t, s, p)?;
    let j = t.j.at(p)?;
    // d omega- = theta ^ omega-
    let w = fundamental_matrix(&g, &j);
    let pm = Mat::identity(n).sub(&pplus);
    let wminus = Form::two_form(&pm.transpose().mul(&w).mul(&pm));
    let dwm = exterior_derivative(&wminus)?;
    let rhs = Form::one_form(&d.theta).wedge(&wminus.values())?;
    let dwm_res = dwm.values().sub(&rhs).max_abs();
    // D+ holomorphic: P- (L_V J) = 0 for V in D+
    let mut holo: f64 = 0.0;
    for i in 0..n {
        let v: Vec<Jet2> = (0..n).map(|a| pplus[(a, i)]).collect();
        let lj = lie_endo(&v, &j).values();
        holo = holo.max(d.pm.mul(&lj).max_abs());
    }
    // chi_1 pieces, needs theta != 0
    let tn = d.theta_norm();
    let chi = if tn < THETA_FLOOR {
        None
    } else {
        let ginv = g.truncate().inverse().ok_or_else(|| GeomError::DegenerateMetric { point: p.to_vec() })?;
        let zeta: Vec<Jet1> = ginv.apply(&d.theta_jet);
        let jl = j.truncate();
        let jzeta = jl.apply(&zeta);
        let norm2 = crate::tensor::linalg::dot(&d.theta_jet, &zeta);
        let n2 = norm2.v;
        let zv: Vec<f64> = zeta.iter().map(|x| x.v).collect();
        let jzv: Vec<f64> = jzeta.iter().map(|x| x.v).collect();
        let lzj = lie_endo(&zeta, &jl);
        let lz_zeta = lzj.apply(&zv);
        let chi1 = d.g.form(&lz_zeta, &zv) / (n2 * n2);
        let chi2 = -d.g.form(&lz_zeta, &jzv) / (n2 * n2);
        let mut dir = 0.0;
        for c in 0..n {
            dir += jzv[c] * norm2.g[c];
        }
        let chi1_formula = -dir / (n2 * n2);
        let chi_res = (chi1 - chi1_formula).abs();
        // L_zeta J = (chi1 theta + chi2 J theta) (x) zeta + (-chi2 theta + chi1 J theta) (x) J zeta
        let jtheta = d.j.pull_covector(&d.theta);
        let recon = Mat::from_fn(n, |a, b| {
            (chi1 * d.theta[b] + chi2 * jtheta[b]) * zv[a] + (-chi2 * d.theta[b] + chi1 * jtheta[b]) * jzv[a]
        });
        let shape = lzj.sub(&recon).max_abs();
        Some((chi_res, shape))
    };
    Ok((dwm_res, holo, chi))
}

pub fn structure_equation_checks(t: &HermitianTriple, s: &Splitting, plan: &SamplePlan) -> Result<StructureReport> {
    let mut r = StructureReport {
        d_omega_minus: 0.0,
        holomorphy: 0.0,
        chi1: 0.0,
        lzeta_shape: 0.0,
        points_used: 0,
        points_excluded: 0,
    };
    for p in t.chart.sample(plan)? {
        let (a, b, c) = structure_at(t, s, &p)?;
        r.d_omega_minus = r.d_omega_minus.max(a);
        r.holomorphy = r.holomorphy.max(b);
        match c {
            Some((x, y)) => {
                r.chi1 = r.chi1.max(x);
                r.lzeta_shape = r.lzeta_shape.max(y);
                r.points_used += 1;
            }
            None => r.points_excluded += 1,
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FoliationVerdict {
    /// theta nonzero, xi has only its zeta-part on D-.
    Holomorphic,
    /// theta = 0 and D+ totally geodesic.
    GeodesicRiemannian,
    /// theta = 0 and xi = 0: a local Kaehler product.
    KahlerProduct,
    Failed,
}

pub fn classify(t: &HermitianTriple, s: &Splitting, plan: &SamplePlan, tol: f64) -> Result<(FoliationVerdict, FoliationReport)> {
    let r = foliation_report(t, s, plan)?;
    let v = if r.homothetic_residual > tol || r.xi_structure_residual > tol {
        FoliationVerdict::Failed
    } else if r.theta_norm_max <= tol {
        if r.xi_max <= tol {
            FoliationVerdict::KahlerProduct
        } else if r.dplus_geodesic_residual <= tol {
            FoliationVerdict::GeodesicRiemannian
        } else {
            FoliationVerdict::Failed
        }
    } else if r.theta_norm_min > THETA_FLOOR && r.dtheta_residual <= tol && r.ring_residual <= tol {
        FoliationVerdict::Holomorphic
    } else {
        FoliationVerdict::Failed
    };
    Ok((v, r))
}
