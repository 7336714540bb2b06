//! Twist deformations along a rank-2 J-invariant distribution D+.
//!
//! A twist is a map w = w1 + i w2 into the open unit disk. With a vector field
//! E in D+ and F = JE, S is the endomorphism with matrix [[w1, w2], [w2, -w1]]
//! in the frame {E, F} and S = 0 on D-. Identifying E with 1 and F with i,
//! S v = w conj(v).
//!
//! Two conjugation orders are supported:
//! * `Converse`: J_w = (1-S)^-1 J (1-S), g_w = g((1+S)^-1 (1-S) ., .);
//! * `Forward`: J_w = (1-S) J (1-S)^-1, g_w = g((1+S) (1-S)^-1 ., .).
//!
//! Both keep the fundamental form fixed. `Forward` with w equals `Converse`
//! with -w.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calabi::{CalabiChart, CalabiProfile, FIBRE};
use crate::error::{GeomError, Result};
use crate::foliation::Splitting;
use crate::hermitian::{ddc, fundamental_matrix, lee_form_at as hermitian_lee_form_at, nijenhuis_max, HermitianTriple};
use crate::jet::{Jet2, Scalar};
use crate::sampling::SamplePlan;
use crate::tensor::fields::{ChartManifold, EndoField, Field, MetricField, VectorField};
use crate::tensor::forms::Form;
use crate::tensor::lie::lie_endo;
use crate::tensor::linalg::{basis, dot, Mat};

/// Twists must stay this far inside the unit disk at sample points.
pub const DISC_MARGIN: f64 = 1e-6;
/// Frames shorter than this are treated as degenerate.
pub const FRAME_FLOOR: f64 = 1e-6;

/// w = -w~ / (1 + w~), so w~ = -w / (1 + w). Maps the unit disk onto the
/// half plane Re w~ > -1/2.
pub fn mobius(w: Complex64) -> Result<Complex64> {
    if !(w.norm() < 1.0) {
        return Err(GeomError::Precondition(format!("|w| = {} is not below 1", w.norm())));
    }
    Ok(-w / (1.0 + w))
}

/// Inverse of [`mobius`], defined for Re w~ > -1/2.
pub fn mobius_inv(wt: Complex64) -> Result<Complex64> {
    if !(wt.re > -0.5) {
        return Err(GeomError::Precondition(format!("Re w~ = {} is not above -1/2", wt.re)));
    }
    Ok(-wt / (1.0 + wt))
}

pub type TwistFn = Arc<dyn Fn(&[Jet2]) -> (Jet2, Jet2) + Send + Sync>;

/// A disk-valued function on a chart, with the coordinates it depends on.
#[derive(Clone)]
pub struct TwistMap {
    pub name: String,
    pub dim: usize,
    /// Coordinate indices w may depend on.
    pub deps: Vec<usize>,
    f: TwistFn,
}

impl std::fmt::Debug for TwistMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TwistMap({}, dim {}, deps {:?})", self.name, self.dim, self.deps)
    }
}

impl TwistMap {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        deps: Vec<usize>,
        f: impl Fn(&[Jet2]) -> (Jet2, Jet2) + Send + Sync + 'static,
    ) -> Self {
        TwistMap { name: name.into(), dim, deps, f: Arc::new(f) }
    }

    pub fn constant(c: Complex64, dim: usize) -> Self {
        TwistMap::new(format!("const({},{})", c.re, c.im), dim, vec![], move |_| {
            (Jet2::constant(c.re), Jet2::constant(c.im))
        })
    }

    /// w = a zeta + b, or a conj(zeta) + b when `conj` is set, where
    /// zeta = p[ix] + i p[iy].
    pub fn affine(name: impl Into<String>, dim: usize, zeta: (usize, usize), a: Complex64, b: Complex64, conj: bool) -> Self {
        let (ix, iy) = zeta;
        let sgn = if conj { -1.0 } else { 1.0 };
        TwistMap::new(name, dim, vec![ix, iy], move |p: &[Jet2]| {
            let (x, y) = (p[ix], p[iy] * sgn);
            (x * a.re - y * a.im + b.re, y * a.re + x * a.im + b.im)
        })
    }

    /// w = zeta.
    pub fn coord_z(dim: usize, zeta: (usize, usize)) -> Self {
        Self::affine("coord_z", dim, zeta, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), false)
    }

    /// w = conj(zeta), a non-holomorphic control.
    pub fn conj_z(dim: usize, zeta: (usize, usize)) -> Self {
        Self::affine("conj_z", dim, zeta, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), true)
    }

    /// w = k zeta.
    pub fn scaled_z(dim: usize, zeta: (usize, usize), k: f64) -> Self {
        Self::affine(format!("scaled_z({k})"), dim, zeta, Complex64::new(k, 0.0), Complex64::new(0.0, 0.0), false)
    }

    /// w = e^(i phi) zeta.
    pub fn rotated_z(dim: usize, zeta: (usize, usize), phi: f64) -> Self {
        Self::affine(format!("rotated_z({phi})"), dim, zeta, Complex64::from_polar(1.0, phi), Complex64::new(0.0, 0.0), false)
    }

    pub fn eval(&self, p: &[Jet2]) -> (Jet2, Jet2) {
        (self.f)(p)
    }

    pub fn at(&self, p: &[f64]) -> Complex64 {
        let (a, b) = self.eval(&Jet2::constant_point(p));
        Complex64::new(a.v, b.v)
    }

    /// Pulls the map back to a chart with `offset` extra leading coordinates.
    pub fn lift(&self, offset: usize, n_total: usize) -> TwistMap {
        let inner = self.clone();
        TwistMap {
            name: self.name.clone(),
            dim: n_total,
            deps: self.deps.iter().map(|d| d + offset).collect(),
            f: Arc::new(move |p: &[Jet2]| inner.eval(&p[offset..offset + inner.dim])),
        }
    }

    /// Largest |w| over the plan; fails if it reaches 1 - `DISC_MARGIN`.
    pub fn check_disc(&self, chart: &ChartManifold, plan: &SamplePlan) -> Result<f64> {
        let mut m: f64 = 0.0;
        for p in chart.sample(plan)? {
            let r = self.at(&p).norm();
            if !(r <= 1.0 - DISC_MARGIN) {
                return Err(GeomError::OutOfDomain { point: p });
            }
            m = m.max(r);
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwistMode {
    Forward,
    Converse,
}

/// The twisted structures together with the data they were built from.
#[derive(Clone, Debug)]
pub struct TwistedTriple {
    /// (g_w, J_w).
    pub triple: HermitianTriple,
    /// I_w, when a second structure was supplied.
    pub i_w: Option<EndoField>,
    pub s: EndoField,
    /// E; the frame of D+ is {E, J E}.
    pub frame: VectorField,
    pub mode: TwistMode,
}

/// S at a jet point.
pub fn s_matrix(g: &Mat<Jet2>, j: &Mat<Jet2>, e: &[Jet2], w: (Jet2, Jet2)) -> Mat<Jet2> {
    let n = g.n;
    let f = j.apply(e);
    let frame = [e.to_vec(), f];
    let gf: Vec<Vec<Jet2>> = frame.iter().map(|v| g.apply(v)).collect();
    let gram = Mat::from_fn(2, |a, b| dot(&frame[a], &gf[b]));
    let gi = gram.inverse().unwrap_or_else(|| Mat::from_fn(2, |_, _| Jet2::constant(f64::NAN)));
    // coframe e^a = sum_b Gi_ab g(E_b, .)
    let co: Vec<Vec<Jet2>> = (0..2)
        .map(|a| (0..n).map(|k| gi[(a, 0)] * gf[0][k] + gi[(a, 1)] * gf[1][k]).collect())
        .collect();
    let (w1, w2) = w;
    let m = [[w1, w2], [w2, -w1]];
    Mat::from_fn(n, |i, k| {
        let mut s = Jet2::constant(0.0);
        for a in 0..2 {
            for b in 0..2 {
                s += m[a][b] * frame[a][i] * co[b][k];
            }
        }
        s
    })
}

/// (1 - sigma S)^-1 for S with S^2 = |w|^2 on D+ and S = 0 on D-:
/// 1 + (sigma S + S^2) / (1 - |w|^2).
fn inv_one_minus(s: &Mat<Jet2>, w2: Jet2, sigma: f64) -> Mat<Jet2> {
    let n = s.n;
    let s2 = s.mul(s);
    Mat::identity(n).add(&s.scale(Jet2::constant(sigma)).add(&s2).scale((1.0 - w2).recip()))
}

struct TwistPoint {
    /// Conjugating map C with J_w = C^-1 J C.
    c: Mat<Jet2>,
    c_inv: Mat<Jet2>,
    /// A with g_w = g(A ., .).
    a: Mat<Jet2>,
}

fn twist_point(s: &Mat<Jet2>, w: (Jet2, Jet2), mode: TwistMode) -> TwistPoint {
    let n = s.n;
    let w2 = w.0 * w.0 + w.1 * w.1;
    let id = Mat::identity(n);
    let one_minus = id.sub(s);
    let one_plus = id.add(s);
    let inv_minus = inv_one_minus(s, w2, 1.0);
    let inv_plus = inv_one_minus(s, w2, -1.0);
    match mode {
        TwistMode::Converse => TwistPoint { a: inv_plus.mul(&one_minus), c: one_minus, c_inv: inv_minus },
        TwistMode::Forward => TwistPoint { a: one_plus.mul(&inv_minus), c: inv_minus, c_inv: one_minus },
    }
}

/// Twists (g, J) and optionally a second structure I along the splitting.
/// `e1` must be a nowhere vanishing field in D+.
pub fn build_twist(
    t: &HermitianTriple,
    split: &Splitting,
    e1: &VectorField,
    i_struct: Option<&EndoField>,
    tw: &TwistMap,
    mode: TwistMode,
    plan: &SamplePlan,
) -> Result<TwistedTriple> {
    if tw.dim != t.dim() || e1.dim != t.dim() || split.rank_plus != 2 {
        return Err(GeomError::Invalid("twist, frame and chart dimensions disagree".into()));
    }
    tw.check_disc(&t.chart, plan)?;
    for p in t.chart.sample(plan)? {
        let g = t.g.at(&p)?.values();
        let e: Vec<f64> = e1.at(&p)?.iter().map(|x| x.v).collect();
        let len = dot(&e, &g.apply(&e)).sqrt();
        let pm = Mat::identity(t.dim()).sub(&split.plus_at(&p)?.values());
        if !(len >= FRAME_FLOOR) || pm.apply(&e).iter().any(|x| x.abs() > 1e-9 * len.max(1.0)) {
            return Err(GeomError::DegenerateFrame { point: p });
        }
    }
    let s_field: EndoField = {
        let (g, j, e1, tw) = (t.g.clone(), t.j.clone(), e1.clone(), tw.clone());
        Field::new(t.dim(), move |p: &[Jet2]| s_matrix(&g.eval(p), &j.eval(p), &e1.eval(p), tw.eval(p)))
    };
    let g_w: MetricField = {
        let (g, sf, tw) = (t.g.clone(), s_field.clone(), tw.clone());
        Field::new(t.dim(), move |p: &[Jet2]| {
            let tp = twist_point(&sf.eval(p), tw.eval(p), mode);
            tp.a.transpose().mul(&g.eval(p)).symmetrize()
        })
    };
    let conj = |j: &EndoField| -> EndoField {
        let (j, sf, tw) = (j.clone(), s_field.clone(), tw.clone());
        Field::new(j.dim, move |p: &[Jet2]| {
            let tp = twist_point(&sf.eval(p), tw.eval(p), mode);
            tp.c_inv.mul(&j.eval(p)).mul(&tp.c)
        })
    };
    let j_w = conj(&t.j);
    let i_w = i_struct.map(conj);
    Ok(TwistedTriple {
        triple: HermitianTriple::new(t.chart.clone(), g_w, j_w)?,
        i_w,
        s: s_field,
        frame: e1.clone(),
        mode,
    })
}

/// The coordinate field d_z of a Calabi chart, spanning D+ together with J0 d_z.
pub fn calabi_frame(c: &CalabiChart) -> VectorField {
    let n = c.dim();
    Field::new(n, move |_: &[Jet2]| basis::<Jet2>(n, 1))
}

/// Twist of a Calabi chart (J0 and I0 both twisted).
pub fn twist_calabi(c: &CalabiChart, tw: &TwistMap, mode: TwistMode, plan: &SamplePlan) -> Result<TwistedTriple> {
    build_twist(&c.total, &c.splitting, &calabi_frame(c), Some(&c.i0), tw, mode, plan)
}

/// |1 + w|^2 / (1 - |w|^2) for `Converse`, |1 - w|^2 / (1 - |w|^2) for
/// `Forward`: the factor by which |theta|^2 grows, theta being dual to the
/// frame vector E.
pub fn norm_factor(w: Complex64, mode: TwistMode) -> f64 {
    let w = if mode == TwistMode::Forward { -w } else { w };
    (1.0 + w).norm_sqr() / (1.0 - w.norm_sqr())
}

/// |theta|^2_{g_w} / |theta|^2_g at a point, for theta = g(E, .).
pub fn measured_norm_factor(t: &HermitianTriple, tt: &TwistedTriple, p: &[f64]) -> Result<f64> {
    let g = t.g.at(p)?.values();
    let gw = tt.triple.g.at(p)?.values();
    let e: Vec<f64> = tt.frame.at(p)?.iter().map(|x| x.v).collect();
    let theta = g.apply(&e);
    let gi = g.inverse().ok_or(GeomError::DegenerateMetric { point: p.to_vec() })?;
    let gwi = gw.inverse().ok_or(GeomError::DegenerateMetric { point: p.to_vec() })?;
    Ok(dot(&theta, &gwi.apply(&theta)) / dot(&theta, &gi.apply(&theta)))
}

/// Largest componentwise change of omega_J (and omega_I when present).
pub fn form_invariance_residual(
    t: &HermitianTriple,
    i_struct: Option<&EndoField>,
    tt: &TwistedTriple,
    p: &[f64],
) -> Result<f64> {
    let g = t.g.at(p)?.values();
    let gw = tt.triple.g.at(p)?.values();
    let mut r = fundamental_matrix(&g, &t.j.at(p)?.values())
        .sub(&fundamental_matrix(&gw, &tt.triple.j.at(p)?.values()))
        .max_abs();
    if let (Some(i), Some(iw)) = (i_struct, &tt.i_w) {
        let d = fundamental_matrix(&g, &i.at(p)?.values()).sub(&fundamental_matrix(&gw, &iw.at(p)?.values()));
        r = r.max(d.max_abs());
    }
    Ok(r)
}

/// Residuals of transverse holomorphy at one point:
/// * `int_w`: max over X in D- of |dw2(X) + dw1(JX)|, i.e. dw o J = i dw on D-;
/// * `in_eq`: max over X in D-, V in {E, JE} of |P+((L_{JX} S) V - J (L_X S) V)|.
pub fn holomorphy_at(
    t: &HermitianTriple,
    split: &Splitting,
    e1: &VectorField,
    tw: &TwistMap,
    p: &[f64],
) -> Result<(f64, f64)> {
    let n = t.dim();
    let x = Jet2::seed_point(p);
    let g = t.g.eval(&x);
    let j = t.j.eval(&x);
    let e = e1.eval(&x);
    let w = tw.eval(&x);
    let s = s_matrix(&g, &j, &e, w);
    let pp = split.plus(&x);
    let pm = Mat::identity(n).sub(&pp);
    let (jv, ppv, pmv) = (j.values(), pp.values(), pm.values());
    let ev: Vec<f64> = e.iter().map(|a| a.v).collect();
    let vs = [ev.clone(), jv.apply(&ev)];
    let (dw1, dw2): (Vec<f64>, Vec<f64>) = ((0..n).map(|k| w.0.g[k]).collect(), (0..n).map(|k| w.1.g[k]).collect());
    let mut int_w: f64 = 0.0;
    let mut in_eq: f64 = 0.0;
    for i in 0..n {
        let xv: Vec<f64> = (0..n).map(|a| pmv[(a, i)]).collect();
        let jx = jv.apply(&xv);
        int_w = int_w.max((dot(&dw2, &xv) + dot(&dw1, &jx)).abs());

        let xj: Vec<Jet2> = (0..n).map(|a| pm[(a, i)]).collect();
        let jxj = j.apply(&xj);
        let lx = lie_endo(&xj, &s).values();
        let ljx = lie_endo(&jxj, &s).values();
        for v in &vs {
            let r = ljx.apply(v);
            let q = jv.apply(&lx.apply(v));
            let diff: Vec<f64> = r.iter().zip(&q).map(|(a, b)| a - b).collect();
            in_eq = in_eq.max(ppv.apply(&diff).iter().fold(0.0f64, |m, y| m.max(y.abs())));
        }
    }
    Ok((int_w, in_eq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolomorphyReport {
    pub int_w: f64,
    pub in_eq: f64,
    pub points: usize,
}

pub fn transverse_holomorphy(
    t: &HermitianTriple,
    split: &Splitting,
    e1: &VectorField,
    tw: &TwistMap,
    plan: &SamplePlan,
) -> Result<HolomorphyReport> {
    let pts = t.chart.sample(plan)?;
    let mut r = HolomorphyReport { int_w: 0.0, in_eq: 0.0, points: pts.len() };
    for p in &pts {
        let (a, b) = holomorphy_at(t, split, e1, tw, p)?;
        r.int_w = r.int_w.max(a);
        r.in_eq = r.in_eq.max(b);
    }
    Ok(r)
}

pub fn calabi_holomorphy(c: &CalabiChart, tw: &TwistMap, plan: &SamplePlan) -> Result<HolomorphyReport> {
    transverse_holomorphy(&c.total, &c.splitting, &calabi_frame(c), tw, plan)
}

/// max |dw ^ theta0| at a point, theta0 being the Lee form of (g0, I0).
pub fn dw_wedge_theta0(c: &CalabiChart, tw: &TwistMap, p: &[f64]) -> Result<f64> {
    let th = Form::one_form(&hermitian_lee_form_at(&c.i_triple(), p)?);
    let (w1, w2) = tw.eval(&Jet2::seed_point(p));
    let n = c.dim();
    let mut m: f64 = 0.0;
    for w in [w1, w2] {
        let dw = Form::one_form(&(0..n).map(|k| w.g[k]).collect::<Vec<_>>());
        m = m.max(dw.wedge(&th)?.max_abs());
    }
    Ok(m)
}

/// The single twist equivalent to twisting by `first` and then by `second`
/// (both in the given mode, with frame `e1`). It is read off the D+ block of
/// the doubly twisted metric in the frame {E, J E}.
pub fn compose_twists(
    t: &HermitianTriple,
    split: &Splitting,
    e1: &VectorField,
    first: &TwistMap,
    second: &TwistMap,
    mode: TwistMode,
    plan: &SamplePlan,
) -> Result<TwistMap> {
    let once = build_twist(t, split, e1, None, first, mode, plan)?;
    let twice = build_twist(&once.triple, split, e1, None, second, mode, plan)?;
    let (g0, j0, g2, e1c) = (t.g.clone(), t.j.clone(), twice.triple.g.clone(), e1.clone());
    let sign = if mode == TwistMode::Forward { -1.0 } else { 1.0 };
    let mut deps: Vec<usize> = first.deps.iter().chain(&second.deps).copied().collect();
    deps.sort_unstable();
    deps.dedup();
    let name = format!("({})*({})", second.name, first.name);
    Ok(TwistMap::new(name, t.dim(), deps, move |p: &[Jet2]| {
        let (g, j, gt) = (g0.eval(p), j0.eval(p), g2.eval(p));
        let e = e1c.eval(p);
        let f = j.apply(&e);
        let norm = dot(&e, &g.apply(&e));
        let g11 = dot(&e, &gt.apply(&e)) / norm;
        let g12 = dot(&e, &gt.apply(&f)) / norm;
        let g22 = dot(&f, &gt.apply(&f)) / norm;
        let tau = (g11 + g22) * 0.5;
        let r2 = (tau - 1.0) / (tau + 1.0);
        let w1 = ((1.0 + r2) - (1.0 - r2) * g11) * 0.5;
        let w2 = -((1.0 - r2) * g12) * 0.5;
        (w1 * sign, w2 * sign)
    }))
}

/// Residuals at a point of two Ricci form identities on a twisted Calabi
/// chart whose twist is invariant along d_s and d_z:
/// * the three-term identity rho(g_w, J_w) = rho_N - 1/2 d(J d ln(1 - |w|^2));
/// * the profile-aware identity
///   rho(g_w, J_w) = rho_N - 1/2 d(J d ln(1 - |w|^2)) - 1/2 d(J_w d ln(q(z) z^(1-m))),
///   which reduces to the first when q(z) z^(1-m) is constant.
pub fn varric_residuals_at(c: &CalabiChart, tt: &TwistedTriple, tw: &TwistMap, p: &[f64]) -> Result<(f64, f64)> {
    let n = c.dim();
    let m = n / 2;
    let rho = tt.triple.ricci_form_at(p)?;
    let rho_n = c.base.triple.ricci_form_at(&p[FIBRE..])?.shift(FIBRE, n);
    let x = Jet2::seed_point(p);
    let j0 = c.total.j.eval(&x);
    let (w1, w2) = tw.eval(&x);
    let lw = (1.0 - (w1 * w1 + w2 * w2)).ln();
    let twist_term = ddc(&lw, &j0)?.scale(0.5);
    let z = x[1];
    let lq = (c.profile.q(m)(z) * z.powi(1 - m as i32)).ln();
    // ln |Psi_0| depends on z, so here the twisted structure matters
    let profile_term = ddc(&lq, &tt.triple.j.eval(&x))?.scale(0.5);
    let three_term = rho.sub(&rho_n).add(&twist_term);
    let full = three_term.add(&profile_term);
    Ok((three_term.max_abs(), full.max_abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarricReport {
    /// Three-term identity.
    pub residual: f64,
    /// Identity including the profile term.
    pub profile_residual: f64,
    pub holomorphy: f64,
    pub points: usize,
}

/// Checks the preconditions (moment-map profile, twist transversely
/// holomorphic and independent of s and z) and then both identities of
/// [`varric_residuals_at`] over the plan.
pub fn varric_check(c: &CalabiChart, tw: &TwistMap, mode: TwistMode, plan: &SamplePlan) -> Result<VarricReport> {
    if matches!(c.profile, CalabiProfile::Profile { .. }) {
        return Err(GeomError::Precondition("the Ricci form identity needs a moment-map profile".into()));
    }
    if tw.deps.iter().any(|&d| d < FIBRE) {
        return Err(GeomError::Precondition(format!("twist {} depends on s or z", tw.name)));
    }
    let hol = calabi_holomorphy(c, tw, plan)?;
    if hol.int_w > 1e-7 {
        return Err(GeomError::Precondition(format!("twist {} is not transversely holomorphic ({:e})", tw.name, hol.int_w)));
    }
    let tt = twist_calabi(c, tw, mode, plan)?;
    let pts = c.total.chart.sample(plan)?;
    let mut r = VarricReport { residual: 0.0, profile_residual: 0.0, holomorphy: hol.int_w, points: pts.len() };
    for p in &pts {
        let (a, b) = varric_residuals_at(c, &tt, tw, p)?;
        r.residual = r.residual.max(a);
        r.profile_residual = r.profile_residual.max(b);
    }
    Ok(r)
}

/// Nijenhuis residual of J_w (and I_w) at a point.
pub fn twisted_nijenhuis_at(tt: &TwistedTriple, p: &[f64]) -> Result<(f64, Option<f64>)> {
    let nj = nijenhuis_max(&tt.triple.j.at(p)?);
    let ni = match &tt.i_w {
        Some(i) => Some(nijenhuis_max(&i.at(p)?)),
        None => None,
    };
    Ok((nj, ni))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{flat_plane, scaled_disk};
    use crate::calabi::build_calabi;
    use crate::hermitian::kahler_verdict;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk_chart(power: u32) -> CalabiChart {
        build_calabi(&scaled_disk(power, 0.5).unwrap(), CalabiProfile::MomentMap { a: -1.0 }, (0.5, 2.0)).unwrap()
    }

    fn plan() -> SamplePlan {
        SamplePlan::new(11, 6)
    }

    #[test]
    fn mobius_roundtrip_and_fixed_points() {
        assert_eq!(mobius(Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
        assert!((mobius_inv(Complex64::new(1.0, 0.0)).unwrap() - Complex64::new(-0.5, 0.0)).norm() < 1e-16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let w = Complex64::from_polar(rng.gen::<f64>().sqrt() * 0.999, rng.gen::<f64>() * 6.3);
            let wt = mobius(w).unwrap();
            assert!(wt.re > -0.5);
            assert!((mobius_inv(wt).unwrap() - w).norm() <= 1e-14);
        }
        assert!(mobius(Complex64::new(1.0, 0.0)).is_err());
        assert!(mobius_inv(Complex64::new(-0.6, 0.0)).is_err());
    }

    #[test]
    fn zero_twist_is_identity() {
        let c = disk_chart(1);
        let tt = twist_calabi(&c, &TwistMap::constant(Complex64::new(0.0, 0.0), 4), TwistMode::Converse, &plan()).unwrap();
        let p = [0.2, 1.0, 0.1, -0.2];
        assert_eq!(tt.triple.g.at(&p).unwrap().values().sub(&c.total.g.at(&p).unwrap().values()).max_abs(), 0.0);
        assert_eq!(tt.triple.j.at(&p).unwrap().values().sub(&c.total.j.at(&p).unwrap().values()).max_abs(), 0.0);
    }

    #[test]
    fn holomorphic_lift_gives_kahler_twist() {
        let c = disk_chart(1);
        let tw = TwistMap::coord_z(2, (0, 1)).lift(FIBRE, 4);
        for mode in [TwistMode::Converse, TwistMode::Forward] {
            let tt = twist_calabi(&c, &tw, mode, &plan()).unwrap();
            let v = kahler_verdict(&tt.triple, &plan(), 1e-7).unwrap();
            assert!(v.is_kahler, "{mode:?}: {v:?}");
            for p in c.total.chart.sample(&plan()).unwrap() {
                assert!(form_invariance_residual(&c.total, Some(&c.i0), &tt, &p).unwrap() < 1e-12);
            }
        }
        let h = calabi_holomorphy(&c, &tw, &plan()).unwrap();
        assert!(h.int_w < 1e-12 && h.in_eq < 1e-9, "{h:?}");
    }

    #[test]
    fn conjugate_lift_is_not_integrable() {
        let c = disk_chart(1);
        let tw = TwistMap::conj_z(2, (0, 1)).lift(FIBRE, 4);
        let h = calabi_holomorphy(&c, &tw, &plan()).unwrap();
        assert!(h.int_w > 1e-2 && h.in_eq > 1e-2, "{h:?}");
        let tt = twist_calabi(&c, &tw, TwistMode::Converse, &plan()).unwrap();
        let (nj, _) = twisted_nijenhuis_at(&tt, &[0.1, 1.0, 0.2, 0.1]).unwrap();
        assert!(nj > 1e-2);
    }

    #[test]
    fn norm_factor_matches_direct_evaluation() {
        let c = build_calabi(&flat_plane(1.0).unwrap(), CalabiProfile::MomentMap { a: -1.0 }, (0.5, 2.0)).unwrap();
        assert!((norm_factor(Complex64::new(0.5, 0.0), TwistMode::Converse) - 3.0).abs() < 1e-15);
        for w in [Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0), Complex64::new(0.3, 0.4)] {
            for mode in [TwistMode::Converse, TwistMode::Forward] {
                let tt = twist_calabi(&c, &TwistMap::constant(w, 4), mode, &plan()).unwrap();
                let got = measured_norm_factor(&c.total, &tt, &[0.1, 1.3, 0.2, -0.3]).unwrap();
                assert!((got - norm_factor(w, mode)).abs() < 1e-12, "{w} {mode:?}: {got}");
            }
        }
    }

    #[test]
    fn double_twist_is_a_twist() {
        let c = disk_chart(1);
        let e1 = calabi_frame(&c);
        let a = TwistMap::scaled_z(2, (0, 1), 0.5).lift(FIBRE, 4);
        let b = TwistMap::constant(Complex64::new(0.2, -0.3), 4);
        for mode in [TwistMode::Converse, TwistMode::Forward] {
            let once = build_twist(&c.total, &c.splitting, &e1, None, &a, mode, &plan()).unwrap();
            let twice = build_twist(&once.triple, &c.splitting, &e1, None, &b, mode, &plan()).unwrap();
            let w = compose_twists(&c.total, &c.splitting, &e1, &a, &b, mode, &plan()).unwrap();
            let single = build_twist(&c.total, &c.splitting, &e1, None, &w, mode, &plan()).unwrap();
            for p in c.total.chart.sample(&plan()).unwrap() {
                let dg = twice.triple.g.at(&p).unwrap().values().sub(&single.triple.g.at(&p).unwrap().values());
                let dj = twice.triple.j.at(&p).unwrap().values().sub(&single.triple.j.at(&p).unwrap().values());
                assert!(dg.max_abs() < 1e-10 && dj.max_abs() < 1e-10, "{mode:?}");
            }
        }
    }

    #[test]
    fn ricci_form_identity() {
        let plan = SamplePlan::new(2, 4);
        let zero = TwistMap::constant(Complex64::new(0.0, 0.0), 4);
        let tw = TwistMap::coord_z(2, (0, 1)).lift(FIBRE, 4);
        // G^2 = A ln r: the three-term identity holds
        let c = build_calabi(&scaled_disk(1, 0.5).unwrap(), CalabiProfile::MomentMapPower { a: -1.0 }, (0.5, 2.0)).unwrap();
        for t in [&zero, &tw] {
            let r = varric_check(&c, t, TwistMode::Converse, &plan).unwrap();
            assert!(r.residual < 1e-8 && r.profile_residual < 1e-8, "{r:?}");
        }
        // G = A ln r: only the profile-aware identity holds
        let c = disk_chart(1);
        for t in [&zero, &tw] {
            let r = varric_check(&c, t, TwistMode::Converse, &plan).unwrap();
            assert!(r.profile_residual < 1e-8, "{r:?}");
            assert!(r.residual > 1e-2, "{r:?}");
        }
        let bad = TwistMap::conj_z(2, (0, 1)).lift(FIBRE, 4);
        assert!(matches!(varric_check(&c, &bad, TwistMode::Converse, &plan), Err(GeomError::Precondition(_))));
    }

    #[test]
    fn frame_outside_the_leaves_is_rejected() {
        let c = disk_chart(1);
        let e: VectorField = Field::new(4, |_: &[Jet2]| basis::<Jet2>(4, 2));
        let tw = TwistMap::constant(Complex64::new(0.1, 0.0), 4);
        let r = build_twist(&c.total, &c.splitting, &e, None, &tw, TwistMode::Converse, &plan());
        assert!(matches!(r, Err(GeomError::DegenerateFrame { .. })));
    }

    #[test]
    fn both_structures_integrable_iff_dw_wedge_theta0_vanishes() {
        let c = disk_chart(1);
        // (twist, expected: J_w integrable, I_w integrable)
        let cases: Vec<(TwistMap, bool, bool)> = vec![
            (TwistMap::new("0.2 z", 4, vec![1], |p: &[Jet2]| (p[1] * 0.2, Jet2::constant(0.0))), true, true),
            (TwistMap::coord_z(2, (0, 1)).lift(FIBRE, 4), true, false),
            (TwistMap::new("0.2 s", 4, vec![0], |p: &[Jet2]| (p[0] * 0.2, Jet2::constant(0.0))), false, false),
            (TwistMap::new("0.2 (s + i ln z)", 4, vec![0, 1], |p: &[Jet2]| (p[0] * 0.2, p[1].ln() * 0.2)), false, false),
        ];
        for (tw, j_int, i_int) in &cases {
            for mode in [TwistMode::Converse, TwistMode::Forward] {
                let tt = twist_calabi(&c, tw, mode, &plan()).unwrap();
                let (mut nj, mut ni, mut wedge) = (0.0f64, 0.0f64, 0.0f64);
                for p in c.total.chart.sample(&SamplePlan::new(3, 4)).unwrap() {
                    let (a, b) = twisted_nijenhuis_at(&tt, &p).unwrap();
                    nj = nj.max(a);
                    ni = ni.max(b.unwrap());
                    wedge = wedge.max(dw_wedge_theta0(&c, tw, &p).unwrap());
                }
                assert_eq!(nj < 1e-10, *j_int, "{} {mode:?}: N_J {nj:e}", tw.name);
                assert_eq!(ni < 1e-10, *i_int, "{} {mode:?}: N_I {ni:e}", tw.name);
                assert_eq!(wedge < 1e-10, *j_int && *i_int, "{} {mode:?}: dw^theta0 {wedge:e}", tw.name);
            }
        }
    }
}
