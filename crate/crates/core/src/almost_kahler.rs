//! Almost-Kaehler products R^2 x Z twisted by a holomorphic map w on Z, the
//! curvature and torsion identities they satisfy, Einstein residuals and the
//! iterated examples whose products are Ricci-flat.
//!
//! Coordinates are (x1, x2, Z...). With g0 + h the product metric, J0 the
//! standard structure on R^2 and I the structure of Z, the Kaehler pair is
//! the twist (g, J) of (g0 + h, J0 + I) along D+ = span{d_x1, d_x2}, and J~
//! is the same twist applied to -J0 + I.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bases::{scaled_disk, KahlerBase};
use crate::calabi::{build_calabi, CalabiChart, CalabiProfile, PrimitiveChoice, FIBRE};
use crate::error::{GeomError, Result};
use crate::foliation::Splitting;
use crate::hermitian::{ddc, fundamental_matrix, kahler_verdict, nijenhuis_max, standard_j, HermitianTriple, DEFAULT_KAHLER_TOL};
use crate::jet::{Jet1, Jet2, Scalar};
use crate::sampling::SamplePlan;
use crate::tensor::curvature::{christoffel, covariant_endo, curvature, i4, tensor2_norm, Curvature};
use crate::tensor::fields::{embed_tail_block, ChartManifold, EndoField, Field, MetricField, VectorField};
use crate::tensor::forms::{exterior_derivative, Form};
use crate::tensor::lie::lie_metric;
use crate::tensor::linalg::{basis, dot, Mat};
use crate::twist::{build_twist, twist_calabi, TwistMap, TwistMode, TwistedTriple};

/// Number of flat R^2 coordinates in front of Z.
pub const PLANE: usize = 2;
/// Points with |dw| below this are left out of the nullity and rank checks.
pub const DW_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct AkProduct {
    pub z_factor: HermitianTriple,
    /// The twist on Z.
    pub tw: TwistMap,
    /// The twist pulled back to R^2 x Z.
    pub tw_total: TwistMap,
    /// (g, J), Kaehler when w is holomorphic.
    pub kahler: HermitianTriple,
    pub j_tilde: EndoField,
    pub splitting: Splitting,
    pub twisted: TwistedTriple,
}

impl AkProduct {
    pub fn dim(&self) -> usize {
        self.kahler.dim()
    }

    /// (g, J~).
    pub fn almost_kahler(&self) -> HermitianTriple {
        HermitianTriple { chart: self.kahler.chart.clone(), g: self.kahler.g.clone(), j: self.j_tilde.clone() }
    }
}

/// Builds R^2 x Z. The twist may be given on Z or on the product; in the
/// latter case it must not depend on x1, x2.
pub fn build_ak_product(z: &HermitianTriple, tw: &TwistMap, mode: TwistMode, plan: &SamplePlan) -> Result<AkProduct> {
    let nz = z.dim();
    let n = nz + PLANE;
    let tw_total = if tw.dim == nz {
        tw.lift(PLANE, n)
    } else if tw.dim == n {
        if tw.deps.iter().any(|&d| d < PLANE) {
            return Err(GeomError::Precondition(format!(
                "twist {} depends on the flat factor, which breaks the Killing fields d_x1, d_x2",
                tw.name
            )));
        }
        tw.clone()
    } else {
        return Err(GeomError::Invalid(format!("twist {} has dimension {}, expected {nz} or {n}", tw.name, tw.dim)));
    };
    let verdict = kahler_verdict(z, &SamplePlan::new(0x2ac7, 6), DEFAULT_KAHLER_TOL)?;
    if !verdict.is_kahler {
        return Err(GeomError::Precondition(format!("Z is not Kaehler: {verdict:?}")));
    }
    let chart = z.chart.prepend(format!("R^2 x {}", z.chart.label), &[-1.0, -1.0], &[1.0, 1.0])?;
    let lead_g = Mat::identity(PLANE);
    let lead_j = standard_j(PLANE);
    let lead_jt = lead_j.scale(Jet2::constant(-1.0));
    let g0: MetricField = {
        let h = z.g.clone();
        Field::new(n, move |p: &[Jet2]| embed_tail_block(&h.eval(&p[PLANE..]), PLANE, &lead_g))
    };
    let j0: EndoField = {
        let i = z.j.clone();
        Field::new(n, move |p: &[Jet2]| embed_tail_block(&i.eval(&p[PLANE..]), PLANE, &lead_j))
    };
    let i_tilde: EndoField = {
        let i = z.j.clone();
        Field::new(n, move |p: &[Jet2]| embed_tail_block(&i.eval(&p[PLANE..]), PLANE, &lead_jt))
    };
    let product = HermitianTriple::new(chart, g0.clone(), j0)?;
    let splitting = Splitting::leading_coordinates(&g0, PLANE);
    let e1: VectorField = Field::new(n, move |_: &[Jet2]| basis::<Jet2>(n, 0));
    let twisted = build_twist(&product, &splitting, &e1, Some(&i_tilde), &tw_total, mode, plan)?;
    let j_tilde = twisted.i_w.clone().expect("second structure was supplied");
    Ok(AkProduct {
        z_factor: z.clone(),
        tw: tw.clone(),
        tw_total,
        kahler: twisted.triple.clone(),
        j_tilde,
        splitting,
        twisted,
    })
}

/// Structural residuals of an AK product at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AkStructure {
    /// |g(J~., .) - (-dx1^dx2 + omega_h)|.
    pub form: f64,
    /// |L_{d_x1} g| and |L_{d_x2} g|.
    pub killing: f64,
    /// |d omega_{J~}|.
    pub d_omega: f64,
    /// |N_{J~}|.
    pub nijenhuis_tilde: f64,
    /// Kaehler residuals of (g, J): max of compatibility, |d omega|, |N_J|.
    pub kahler: f64,
}

pub fn structure_at(a: &AkProduct, p: &[f64]) -> Result<AkStructure> {
    let n = a.dim();
    let g = a.kahler.g.at(p)?;
    let jt = a.j_tilde.at(p)?;
    let w = Form::two_form(&fundamental_matrix(&g, &jt));
    let mut expected = a.z_factor.omega_at(&p[PLANE..])?.values().shift(PLANE, n);
    expected.c[0] -= 1.0;
    let form = w.values().sub(&expected).max_abs();
    let mut killing: f64 = 0.0;
    for k in 0..PLANE {
        let v = basis::<Jet2>(n, k);
        killing = killing.max(lie_metric(&v, &g).values().max_abs());
    }
    let d_omega = exterior_derivative(&w)?.max_abs();
    let nijenhuis_tilde = nijenhuis_max(&jt);
    let r = a.kahler.residuals_at(p)?;
    Ok(AkStructure { form, killing, d_omega, nijenhuis_tilde, kahler: r[0].max(r[1]).max(r[2]).max(r[3]) })
}

/// Largest |R(J~a, J~b, J~c, J~d) - R(a, b, c, d)| over coordinate indices.
pub fn ak3_raw(c: &Curvature, jt: &Mat<f64>) -> f64 {
    let n = c.n;
    // contract one slot at a time: T_{..i..} <- sum_a J~^a_i T_{..a..}
    let mut t = c.riem.clone();
    for slot in 0..4 {
        let mut next = vec![0.0; t.len()];
        for a0 in 0..n {
            for a1 in 0..n {
                for a2 in 0..n {
                    for a3 in 0..n {
                        let idx = [a0, a1, a2, a3];
                        let mut s = 0.0;
                        for m in 0..n {
                            let mut src = idx;
                            src[slot] = m;
                            s += jt[(m, idx[slot])] * t[i4(n, src[0], src[1], src[2], src[3])];
                        }
                        next[i4(n, a0, a1, a2, a3)] = s;
                    }
                }
            }
        }
        t = next;
    }
    t.iter().zip(&c.riem).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Curvature below this size counts as flat, and residuals are reported
/// unnormalised.
pub const FLAT_CURVATURE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ak3Point {
    /// AK3 residual divided by max |R|.
    pub normalized: f64,
    /// max |R(V1, V2, V3, X)| / max |R|, V in D+, X in D-.
    pub block_plus: f64,
    /// max |R(X, Y, Z, V)| / max |R|.
    pub block_minus: f64,
    pub max_riemann: f64,
}

pub fn ak3_at(a: &AkProduct, p: &[f64]) -> Result<Ak3Point> {
    let n = a.dim();
    let g = a.kahler.g.at(p)?;
    let c = curvature(&g, p)?;
    let jt = a.j_tilde.at(p)?.values();
    let rmax = c.max_riemann();
    let scale = if rmax > FLAT_CURVATURE { rmax } else { 1.0 };
    let pp = a.splitting.plus_at(p)?.values();
    let pm = Mat::identity(n).sub(&pp);
    let col = |m: &Mat<f64>, i: usize| -> Vec<f64> { (0..n).map(|r| m[(r, i)]).collect() };
    let plus: Vec<Vec<f64>> = (0..PLANE).map(|i| col(&pp, i)).collect();
    let minus: Vec<Vec<f64>> = (0..n).map(|i| col(&pm, i)).filter(|v| v.iter().any(|x| x.abs() > 1e-12)).collect();
    let mut bp: f64 = 0.0;
    for v1 in &plus {
        for v2 in &plus {
            for v3 in &plus {
                for x in &minus {
                    bp = bp.max(c.r_on(v1, v2, v3, x).abs());
                }
            }
        }
    }
    let mut bm: f64 = 0.0;
    for x in &minus {
        for y in &minus {
            for z in &minus {
                for v in &plus {
                    bm = bm.max(c.r_on(x, y, z, v).abs());
                }
            }
        }
    }
    Ok(Ak3Point {
        normalized: ak3_raw(&c, &jt) / scale,
        block_plus: bp / scale,
        block_minus: bm / scale,
        max_riemann: rmax,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ak3Report {
    pub residual: f64,
    pub block_plus: f64,
    pub block_minus: f64,
    pub max_riemann: f64,
    pub points: usize,
}

pub fn ak3_residual(a: &AkProduct, plan: &SamplePlan) -> Result<Ak3Report> {
    let pts = a.kahler.chart.sample(plan)?;
    let mut r = Ak3Report { residual: 0.0, block_plus: 0.0, block_minus: 0.0, max_riemann: 0.0, points: pts.len() };
    for p in &pts {
        let x = ak3_at(a, p)?;
        r.residual = r.residual.max(x.normalized);
        r.block_plus = r.block_plus.max(x.block_plus);
        r.block_minus = r.block_minus.max(x.block_minus);
        r.max_riemann = r.max_riemann.max(x.max_riemann);
    }
    Ok(r)
}

/// eta at a point: entry k is eta_{d_k} = 1/2 (nabla_k J~) J~.
pub fn eta_at(a: &AkProduct, p: &[f64]) -> Result<Vec<Mat<f64>>> {
    let n = a.dim();
    let g = a.kahler.g.at(p)?;
    let (_, gamma) = christoffel(&g).ok_or_else(|| GeomError::DegenerateMetric { point: p.to_vec() })?;
    let gamma: Vec<f64> = gamma.iter().map(|x| x.v).collect();
    let jt = a.j_tilde.at(p)?;
    let jv = jt.values();
    let djt: Vec<Mat<f64>> = (0..n).map(|k| jt.partial(k).values()).collect();
    Ok(covariant_endo(&gamma, &jv, &djt).into_iter().map(|d| d.mul(&jv).scale(0.5)).collect())
}

fn eta_along(eta: &[Mat<f64>], u: &[f64]) -> Mat<f64> {
    let n = eta.len();
    let mut m = Mat::zeros(n);
    for (k, e) in eta.iter().enumerate() {
        if u[k] != 0.0 {
            m = m.add(&e.scale(u[k]));
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TorsionReport {
    /// max |2 g(eta_{K_i} K_j, X) - X g(K_i, K_j)|.
    pub prelt_residual: f64,
    /// max |eta_X| for X in D-.
    pub nullity_residual: f64,
    /// max |P+ eta_V W| for V, W in D+.
    pub containment_plus_residual: f64,
    /// max |P- eta_V X| for V in D+, X in D-.
    pub containment_minus_residual: f64,
    /// Smallest and largest dimension of span{eta_V X : V in D+, X in D-}.
    pub span_rank_min: usize,
    pub span_rank_max: usize,
    /// max |eta_U J~ + J~ eta_U|.
    pub anticommute_residual: f64,
    /// max |eta_{J~U} - eta_U J~|.
    pub jtilde_shift_residual: f64,
    pub max_eta: f64,
    pub points_used: usize,
    pub points_excluded: usize,
}

/// Numerical rank of a set of vectors: singular values above `rel` times the
/// largest one.
pub fn numerical_rank(vs: &[Vec<f64>], rel: f64) -> usize {
    if vs.is_empty() {
        return 0;
    }
    let n = vs[0].len();
    let m = DMatrix::from_fn(n, vs.len(), |i, j| vs[j][i]);
    let sv = m.singular_values();
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * top).count()
}

/// Torsion residuals at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TorsionPoint {
    pub prelt: f64,
    pub anticommute: f64,
    pub jtilde_shift: f64,
    pub max_eta: f64,
    /// Nullity, containment and rank data; `None` where |dw| < `DW_FLOOR`.
    pub kernel: Option<KernelPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelPoint {
    pub nullity: f64,
    pub containment_plus: f64,
    pub containment_minus: f64,
    pub span_rank: usize,
}

/// Largest |dw| component at a point.
pub fn dw_size(tw: &TwistMap, p: &[f64]) -> f64 {
    let (w1, w2) = tw.eval(&Jet2::seed_point(p));
    (0..p.len()).fold(0.0f64, |m, k| m.max(w1.g[k].abs()).max(w2.g[k].abs()))
}

pub fn torsion_at(a: &AkProduct, p: &[f64]) -> Result<TorsionPoint> {
    let n = a.dim();
    let eta = eta_at(a, p)?;
    let g = a.kahler.g.at(p)?;
    let gv = g.values();
    let jt = a.j_tilde.at(p)?.values();
    let mut r = TorsionPoint { prelt: 0.0, anticommute: 0.0, jtilde_shift: 0.0, max_eta: 0.0, kernel: None };
    for e in &eta {
        r.max_eta = r.max_eta.max(e.max_abs());
    }
    // 2 g(eta_{K_i} K_j, X) = X g(K_i, K_j) for the Killing fields K_i = d_{x_i}
    for i in 0..PLANE {
        for j in 0..PLANE {
            let v = eta[i].apply(&basis::<f64>(n, j));
            let gv_v = gv.apply(&v);
            for x in 0..n {
                r.prelt = r.prelt.max((2.0 * gv_v[x] - g[(i, j)].g[x]).abs());
            }
        }
    }
    for k in 0..n {
        let e = basis::<f64>(n, k);
        let ek = &eta[k];
        r.anticommute = r.anticommute.max(ek.mul(&jt).add(&jt.mul(ek)).max_abs());
        let shifted = eta_along(&eta, &jt.apply(&e));
        r.jtilde_shift = r.jtilde_shift.max(shifted.sub(&ek.mul(&jt)).max_abs());
    }
    if dw_size(&a.tw_total, p) < DW_FLOOR {
        return Ok(r);
    }
    let pp = a.splitting.plus_at(p)?.values();
    let pm = Mat::identity(n).sub(&pp);
    let minus: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|row| pm[(row, i)]).collect()).collect();
    let mut k = KernelPoint { nullity: 0.0, containment_plus: 0.0, containment_minus: 0.0, span_rank: 0 };
    for x in &minus {
        k.nullity = k.nullity.max(eta_along(&eta, x).max_abs());
    }
    let mut span = Vec::new();
    for v in 0..PLANE {
        for w in 0..PLANE {
            let y = eta[v].apply(&basis::<f64>(n, w));
            k.containment_plus = k.containment_plus.max(max_abs(&pp.apply(&y)));
        }
        for x in &minus {
            let y = eta[v].apply(x);
            k.containment_minus = k.containment_minus.max(max_abs(&pm.apply(&y)));
            span.push(y);
        }
    }
    k.span_rank = numerical_rank(&span, 1e-8);
    r.kernel = Some(k);
    Ok(r)
}

pub fn torsion_report(a: &AkProduct, plan: &SamplePlan) -> Result<TorsionReport> {
    let pts = a.kahler.chart.sample(plan)?;
    let mut r = TorsionReport {
        prelt_residual: 0.0,
        nullity_residual: 0.0,
        containment_plus_residual: 0.0,
        containment_minus_residual: 0.0,
        span_rank_min: usize::MAX,
        span_rank_max: 0,
        anticommute_residual: 0.0,
        jtilde_shift_residual: 0.0,
        max_eta: 0.0,
        points_used: 0,
        points_excluded: 0,
    };
    for p in &pts {
        let t = torsion_at(a, p)?;
        r.prelt_residual = r.prelt_residual.max(t.prelt);
        r.anticommute_residual = r.anticommute_residual.max(t.anticommute);
        r.jtilde_shift_residual = r.jtilde_shift_residual.max(t.jtilde_shift);
        r.max_eta = r.max_eta.max(t.max_eta);
        match t.kernel {
            None => r.points_excluded += 1,
            Some(k) => {
                r.points_used += 1;
                r.nullity_residual = r.nullity_residual.max(k.nullity);
                r.containment_plus_residual = r.containment_plus_residual.max(k.containment_plus);
                r.containment_minus_residual = r.containment_minus_residual.max(k.containment_minus);
                r.span_rank_min = r.span_rank_min.min(k.span_rank);
                r.span_rank_max = r.span_rank_max.max(k.span_rank);
            }
        }
    }
    if r.points_used == 0 {
        r.span_rank_min = 0;
    }
    Ok(r)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EinsteinReport {
    /// max |Ric|_g.
    pub ricci_max: f64,
    /// max over points of |Ric - lambda g|_g, and of the spread of lambda.
    pub spread: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
}

/// (|Ric|_g, |Ric - lambda g|_g, lambda) at a point, lambda = scal / n being
/// the least-squares fit of Ric against g.
pub fn einstein_at(g: &MetricField, p: &[f64]) -> Result<(f64, f64, f64)> {
    let c = curvature(&g.at(p)?, p)?;
    let lambda = c.scalar / c.n as f64;
    let defect = c.ricci.sub(&c.g.scale(lambda));
    Ok((c.ricci_norm(), tensor2_norm(&defect, &c.ginv), lambda))
}

/// Ricci norm and Einstein defect over the plan.
pub fn einstein_residual(g: &MetricField, chart: &ChartManifold, plan: &SamplePlan) -> Result<EinsteinReport> {
    let pts = chart.sample(plan)?;
    let mut r = EinsteinReport {
        ricci_max: 0.0,
        spread: 0.0,
        lambda_min: f64::INFINITY,
        lambda_max: f64::NEG_INFINITY,
        points: pts.len(),
    };
    for p in &pts {
        let (ric, defect, lambda) = einstein_at(g, p)?;
        r.ricci_max = r.ricci_max.max(ric);
        r.spread = r.spread.max(defect);
        r.lambda_min = r.lambda_min.min(lambda);
        r.lambda_max = r.lambda_max.max(lambda);
    }
    if !pts.is_empty() {
        r.spread = r.spread.max(r.lambda_max - r.lambda_min);
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    /// Untwisted Calabi iteration over (1 - |zeta|^2) |dzeta|^2.
    Ex0,
    /// Twisted Calabi iteration over (1 - |zeta|^2)^m |dzeta|^2.
    Ex1,
}

/// Which moment map the Calabi steps use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMomentMap {
    /// G(r) = A ln r at every step.
    Log,
    /// G(r)^k = A ln r, k the complex dimension reached at that step.
    LogPower,
}

/// Largest complex dimension an example chain may reach.
pub const MAX_CHAIN_M: usize = 3;

/// Parameters shared by the chain steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct ChainParams {
    pub a: f64,
    pub z_range: (f64, f64),
    pub half_width: f64,
    pub moment_map: ChainMomentMap,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams { a: -1.0, z_range: (0.5, 1.5), half_width: 0.5, moment_map: ChainMomentMap::Log }
    }
}

/// Z_0 = Sigma, Z_1, ... with the twist lifted to each level and the
/// coefficient c_k of the predicted Ricci form c_k d(I_k d) ln(1 - |w|^2).
#[derive(Clone, Debug)]
pub struct ExampleChain {
    pub kind: ExampleKind,
    pub m: usize,
    pub params: ChainParams,
    pub levels: Vec<KahlerBase>,
    pub twists: Vec<TwistMap>,
    pub coefficients: Vec<f64>,
}

fn calabi_step(prev: &KahlerBase, params: &ChainParams, step: usize) -> Result<CalabiChart> {
    let profile = match params.moment_map {
        ChainMomentMap::Log => CalabiProfile::MomentMap { a: params.a },
        ChainMomentMap::LogPower => CalabiProfile::MomentMapPower { a: params.a },
    };
    build_calabi(prev, profile, params.z_range).map_err(|e| match e {
        GeomError::Precondition(s) => GeomError::Precondition(format!("step {step}: {s}")),
        other => other,
    })
}

/// Builds the next level: the Calabi chart over `prev`, twisted by the lifted
/// w for `Ex1`.
fn next_level(kind: ExampleKind, prev: &KahlerBase, tw: &TwistMap, params: &ChainParams, step: usize) -> Result<(KahlerBase, TwistMap)> {
    let c = calabi_step(prev, params, step)?;
    let lifted = tw.lift(FIBRE, c.dim());
    let triple = match kind {
        ExampleKind::Ex0 => c.total.clone(),
        ExampleKind::Ex1 => twist_calabi(&c, &lifted, TwistMode::Converse, &SamplePlan::new(0xc4a1, 6))?.triple,
    };
    let next = c.as_base(triple, PrimitiveChoice::Homotopy)?;
    Ok((next, lifted))
}

pub fn iterate_example(kind: ExampleKind, m: usize, params: ChainParams) -> Result<ExampleChain> {
    if m == 0 || m > MAX_CHAIN_M {
        return Err(GeomError::Precondition(format!("m = {m} must lie in 1..={MAX_CHAIN_M}")));
    }
    let power = match kind {
        ExampleKind::Ex0 => 1,
        ExampleKind::Ex1 => m as u32,
    };
    let sigma = scaled_disk(power, params.half_width)?;
    let mut tw = TwistMap::coord_z(2, (0, 1));
    tw.check_disc(&sigma.triple.chart, &SamplePlan::new(1, 16))?;
    let mut levels = vec![sigma];
    let mut twists = vec![tw.clone()];
    let coef = |k: usize| match kind {
        ExampleKind::Ex0 => 0.5,
        ExampleKind::Ex1 => (m - k) as f64 / 2.0,
    };
    let mut coefficients = vec![coef(0)];
    for k in 1..m {
        let (next, lifted) = next_level(kind, levels.last().expect("nonempty"), &tw, &params, k)?;
        tw = lifted;
        levels.push(next);
        twists.push(tw.clone());
        coefficients.push(coef(k));
    }
    Ok(ExampleChain { kind, m, params, levels, twists, coefficients })
}

impl ExampleChain {
    pub fn last(&self) -> (&KahlerBase, &TwistMap) {
        (self.levels.last().expect("nonempty"), self.twists.last().expect("nonempty"))
    }

    /// The step after the last level (for Ex1 predicted to be Ricci-flat).
    pub fn next_step(&self) -> Result<(KahlerBase, TwistMap)> {
        let (z, tw) = self.last();
        let prev_tw = TwistMap::new(tw.name.clone(), tw.dim, tw.deps.clone(), {
            let t = tw.clone();
            move |p: &[Jet2]| t.eval(p)
        });
        next_level(self.kind, z, &prev_tw, &self.params, self.levels.len())
    }
}

/// |rho - c d(I d) ln(1 - |w|^2)| at a point of a chain level.
pub fn ricci_coefficient_at(z: &KahlerBase, tw: &TwistMap, coefficient: f64, p: &[f64]) -> Result<f64> {
    let rho = z.triple.ricci_form_at(p)?;
    let x = Jet2::seed_point(p);
    let (w1, w2) = tw.eval(&x);
    let f = (1.0 - (w1 * w1 + w2 * w2)).ln();
    let pred = ddc(&f, &z.triple.j.eval(&x))?.scale(coefficient);
    Ok(rho.sub(&pred).max_abs())
}

/// max of [`ricci_coefficient_at`] over the plan.
pub fn ricci_coefficient_residual(z: &KahlerBase, tw: &TwistMap, coefficient: f64, plan: &SamplePlan) -> Result<f64> {
    let mut m: f64 = 0.0;
    for p in z.triple.chart.sample(plan)? {
        m = m.max(ricci_coefficient_at(z, tw, coefficient, &p)?);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelReport {
    /// max |Q (nabla_X P) Y| for X, Y in Ker dw.
    pub second_fundamental_form: f64,
    pub points_used: usize,
    pub points_excluded: usize,
}

/// max |Q (nabla_X P) Y| over X, Y in Ker dw at a point, where P projects
/// onto Ker dw and Q = 1 - P. `None` where |dw| < `DW_FLOOR`.
pub fn kernel_dw_at(t: &HermitianTriple, tw: &TwistMap, p: &[f64]) -> Result<Option<f64>> {
    let n = t.dim();
    let x = Jet2::seed_point(p);
    let g = t.g.at(p)?;
    let (w1, w2) = tw.eval(&x);
    let dws: [Vec<Jet1>; 2] = [(0..n).map(|k| w1.d(k)).collect(), (0..n).map(|k| w2.d(k)).collect()];
    let size = dws.iter().flatten().fold(0.0f64, |m, v| m.max(v.v.abs()));
    if size < DW_FLOOR {
        return Ok(None);
    }
    let (ginv, gamma) = christoffel(&g).ok_or_else(|| GeomError::DegenerateMetric { point: p.to_vec() })?;
    let grads: Vec<Vec<Jet1>> = dws.iter().map(|d| ginv.apply(d)).collect();
    let gram = Mat::from_fn(2, |a, b| dot(&grads[a], &dws[b]));
    let gi = gram.inverse().ok_or_else(|| GeomError::DegenerateFrame { point: p.to_vec() })?;
    // Q projects onto span{grad w1, grad w2}, P = 1 - Q onto Ker dw
    let q = Mat::from_fn(n, |i, j| {
        let mut s = Jet1::constant(0.0);
        for a in 0..2 {
            for b in 0..2 {
                s += grads[a][i] * gi[(a, b)] * dws[b][j];
            }
        }
        s
    });
    let pk = Mat::identity(n).sub(&q);
    let pv = pk.values();
    let qv = q.values();
    let dp: Vec<Mat<f64>> = (0..n).map(|k| pk.partial(k)).collect();
    let gamma: Vec<f64> = gamma.iter().map(|x| x.v).collect();
    let nabla_p = covariant_endo(&gamma, &pv, &dp);
    let mut m: f64 = 0.0;
    for i in 0..n {
        let xv: Vec<f64> = (0..n).map(|row| pv[(row, i)]).collect();
        let nx = eta_along(&nabla_p, &xv);
        m = m.max(qv.mul(&nx).mul(&pv).max_abs());
    }
    Ok(Some(m))
}

/// Second fundamental form of the distribution Ker dw on a Kaehler chart.
pub fn kernel_dw_report(t: &HermitianTriple, tw: &TwistMap, plan: &SamplePlan) -> Result<KernelReport> {
    let mut r = KernelReport { second_fundamental_form: 0.0, points_used: 0, points_excluded: 0 };
    for p in t.chart.sample(plan)? {
        match kernel_dw_at(t, tw, &p)? {
            Some(v) => {
                r.points_used += 1;
                r.second_fundamental_form = r.second_fundamental_form.max(v);
            }
            None => r.points_excluded += 1,
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::flat_plane;
    use num_complex::Complex64;

    fn plan() -> SamplePlan {
        SamplePlan::new(21, 4)
    }

    fn disk_product(tw: TwistMap) -> AkProduct {
        let z = scaled_disk(1, 0.5).unwrap();
        build_ak_product(&z.triple, &tw, TwistMode::Converse, &plan()).unwrap()
    }

    #[test]
    fn flat_factor_with_constant_twist_is_flat_kahler() {
        let z = flat_plane(1.0).unwrap();
        let a = build_ak_product(&z.triple, &TwistMap::constant(Complex64::new(0.0, 0.0), 2), TwistMode::Converse, &plan()).unwrap();
        for p in a.kahler.chart.sample(&plan()).unwrap() {
            let s = structure_at(&a, &p).unwrap();
            assert!(s.form < 1e-15 && s.nijenhuis_tilde == 0.0 && s.kahler < 1e-15, "{s:?}");
            let c = ak3_at(&a, &p).unwrap();
            assert!(c.max_riemann == 0.0 && c.normalized == 0.0);
        }
        let e = einstein_residual(&a.kahler.g, &a.kahler.chart, &plan()).unwrap();
        assert!(e.ricci_max < 1e-11 && e.spread < 1e-11);
        let t = torsion_report(&a, &plan()).unwrap();
        assert_eq!(t.max_eta, 0.0);
    }

    #[test]
    fn disk_product_structure() {
        let a = disk_product(TwistMap::coord_z(2, (0, 1)));
        let mut nij: f64 = 0.0;
        for p in a.kahler.chart.sample(&plan()).unwrap() {
            let s = structure_at(&a, &p).unwrap();
            assert!(s.form < 1e-12 && s.killing < 1e-12 && s.d_omega < 1e-12 && s.kahler < 1e-12, "{s:?}");
            nij = nij.max(s.nijenhuis_tilde);
        }
        assert!(nij > 1e-2);
    }

    #[test]
    fn disk_product_curvature_and_torsion() {
        let a = disk_product(TwistMap::coord_z(2, (0, 1)));
        let r = ak3_residual(&a, &plan()).unwrap();
        assert!(r.residual < 1e-9 && r.block_plus < 1e-9 && r.block_minus < 1e-9, "{r:?}");
        let t = torsion_report(&a, &plan()).unwrap();
        assert!(t.prelt_residual < 1e-10, "{t:?}");
        assert!(t.nullity_residual < 1e-10 && t.containment_plus_residual < 1e-10, "{t:?}");
        assert!(t.containment_minus_residual < 1e-10, "{t:?}");
        assert_eq!((t.span_rank_min, t.span_rank_max), (2, 2));
        assert!(t.anticommute_residual < 1e-10 && t.jtilde_shift_residual < 1e-10, "{t:?}");
        let e = einstein_residual(&a.kahler.g, &a.kahler.chart, &plan()).unwrap();
        assert!(e.ricci_max < 1e-9, "{e:?}");
    }

    #[test]
    fn non_holomorphic_twist_breaks_ak3() {
        let conj = disk_product(TwistMap::conj_z(2, (0, 1)));
        // zeta-bar swaps the roles: J~ becomes integrable and J does not
        let s = structure_at(&conj, &[0.1, 0.2, 0.3, -0.2]).unwrap();
        assert!(s.nijenhuis_tilde < 1e-12 && s.kahler > 1e-2, "{s:?}");
        let mixed = TwistMap::new("0.5x + 0.2iy", 2, vec![0, 1], |p: &[Jet2]| (p[0] * 0.5, p[1] * 0.2));
        let a = disk_product(mixed);
        let r = ak3_residual(&a, &plan()).unwrap();
        assert!(r.residual > 1e-3, "{r:?}");
    }

    #[test]
    fn twist_depending_on_the_plane_is_rejected() {
        let z = scaled_disk(1, 0.5).unwrap();
        let tw = TwistMap::coord_z(4, (0, 1));
        assert!(matches!(
            build_ak_product(&z.triple, &tw, TwistMode::Converse, &plan()),
            Err(GeomError::Precondition(_))
        ));
    }

    #[test]
    fn numerical_rank_counts_directions() {
        let vs = vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        assert_eq!(numerical_rank(&vs, 1e-10), 2);
    }

    #[test]
    fn chain_levels_have_predicted_ricci_forms() {
        for mm in [ChainMomentMap::Log, ChainMomentMap::LogPower] {
            let params = ChainParams { moment_map: mm, ..ChainParams::default() };
            for kind in [ExampleKind::Ex0, ExampleKind::Ex1] {
                let ch = iterate_example(kind, 2, params).unwrap();
                let res: Vec<f64> = (0..2)
                    .map(|k| ricci_coefficient_residual(&ch.levels[k], &ch.twists[k], ch.coefficients[k], &SamplePlan::new(3, 3)).unwrap())
                    .collect();
                assert!(res[0] < 1e-12, "{mm:?} {kind:?} {res:?}");
                // only G^k = A ln r keeps the predicted coefficient past the first step
                assert_eq!(res[1] < 1e-9, mm == ChainMomentMap::LogPower, "{mm:?} {kind:?} {res:?}");
            }
        }
    }

    #[test]
    fn power_moment_map_chain_ends_ricci_flat() {
        let plan = SamplePlan::new(5, 3);
        let mut flat = Vec::new();
        for mm in [ChainMomentMap::Log, ChainMomentMap::LogPower] {
            let params = ChainParams { moment_map: mm, ..ChainParams::default() };
            let ch = iterate_example(ExampleKind::Ex1, 2, params).unwrap();
            let (z, _) = ch.next_step().unwrap();
            let next = einstein_residual(&z.triple.g, &z.triple.chart, &plan).unwrap();
            let (zl, twl) = ch.last();
            let a = build_ak_product(&zl.triple, twl, TwistMode::Converse, &plan).unwrap();
            let prod = einstein_residual(&a.kahler.g, &a.kahler.chart, &plan).unwrap();
            flat.push((next.ricci_max, prod.ricci_max));
        }
        assert!(flat[0].0 > 1e-1 && flat[0].1 > 1e-1, "{flat:?}");
        assert!(flat[1].0 < 1e-9 && flat[1].1 < 1e-9, "{flat:?}");
    }

    #[test]
    fn kernel_of_dw_is_totally_geodesic_only_without_twist() {
        for mm in [ChainMomentMap::Log, ChainMomentMap::LogPower] {
            let params = ChainParams { moment_map: mm, ..ChainParams::default() };
            let sff = |kind| {
                let ch = iterate_example(kind, 2, params).unwrap();
                let (z, tw) = ch.last();
                kernel_dw_report(&z.triple, tw, &SamplePlan::new(3, 6)).unwrap().second_fundamental_form
            };
            let (ex0, ex1) = (sff(ExampleKind::Ex0), sff(ExampleKind::Ex1));
            assert!(ex0 < 1e-7 && ex1 > 1e-3, "{mm:?}: {ex0:e} {ex1:e}");
        }
    }
}
