//! Named constructions and the checks attached to each.

use num_complex::Complex64;

use super::check::{verdict_outcome, Check, Outcome};
use super::scenario::{BuilderParams, Scenario};
use super::CliError;
use crate::almost_kahler::{
    ak3_at, build_ak_product, einstein_at, iterate_example, kernel_dw_at, ricci_coefficient_at, structure_at,
    torsion_at, AkProduct, ChainMomentMap, ChainParams, ExampleKind, MAX_CHAIN_M,
};
use crate::bases::{flat, flat_metric, flat_plane, hyperbolic_plane, round_sphere, scaled_disk, KahlerBase};
use crate::calabi::{
    build_calabi, theta0_dr_coefficient, theta0_norm2, volume_residual, CalabiChart, CalabiProfile, FIBRE,
};
use crate::foliation::{classify, foliation_at, lee_form_at, FoliationVerdict, Splitting};
use crate::hermitian::{nijenhuis_max, standard_j, HermitianTriple, DEFAULT_KAHLER_TOL};
use crate::jet::{Jet2, Scalar};
use crate::tensor::curvature::curvature_at;
use crate::tensor::fields::{embed_tail_block, ChartManifold, EndoField, Field, MetricField};
use crate::tensor::linalg::Mat;
use crate::twist::{
    calabi_frame, form_invariance_residual, holomorphy_at, measured_norm_factor, norm_factor, twist_calabi,
    varric_residuals_at, TwistMap, TwistMode,
};

/// A parameter a builder accepts, with its default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamInfo {
    pub name: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuilderInfo {
    pub id: &'static str,
    pub summary: &'static str,
    /// The defining formula of the construction.
    pub anchor: &'static str,
    pub params: &'static [ParamInfo],
}

const P_A: ParamInfo = ParamInfo { name: "a", default: "-1", doc: "moment map constant A < 0" };
const P_MOMENT: ParamInfo = ParamInfo {
    name: "moment_map",
    default: "log_power",
    doc: "log: G = A ln r; log_power: G^k = A ln r at complex dimension k",
};
const P_MODE: ParamInfo = ParamInfo { name: "mode", default: "converse", doc: "converse or forward twist" };

/// Registry in listing order.
pub const BUILDERS: &[BuilderInfo] = &[
    BuilderInfo {
        id: "flat",
        summary: "flat metric on a box in R^n",
        anchor: "g = sum dx_i^2",
        params: &[ParamInfo { name: "n", default: "4", doc: "dimension, 1..=8 (Kaehler checks for even n)" }],
    },
    BuilderInfo { id: "round_sphere", summary: "unit round 2-sphere", anchor: "g = dth^2 + sin^2(th) dph^2", params: &[] },
    BuilderInfo { id: "hyperbolic_plane", summary: "upper half plane", anchor: "g = (dx^2 + dy^2) / y^2", params: &[] },
    BuilderInfo {
        id: "product",
        summary: "round sphere times flat plane, leaves along the sphere",
        anchor: "g = g_S2 + g_R2",
        params: &[],
    },
    BuilderInfo {
        id: "calabi_flat",
        summary: "Calabi-type metric over the flat complex plane",
        anchor: "g0 = q dz^2 + (ds + alpha)^2 / q + z g_N",
        params: &[P_A, ParamInfo { name: "z_range", default: "[0.1, 1.25]", doc: "z interval of the chart" }],
    },
    BuilderInfo {
        id: "broken",
        summary: "Calabi-type metric over C with the base block rescaled by 1 + 0.3 s x (negative control)",
        anchor: "g = g0 + 0.3 s x z g_N",
        params: &[],
    },
    BuilderInfo {
        id: "twisted_calabi",
        summary: "Calabi-type chart twisted along the leaves by w",
        anchor: "g_w = g0((1 + S)^-1 (1 - S) ., .), S v = w v-bar on D+",
        params: &[
            ParamInfo { name: "base", default: "disk1", doc: "flat | disk1 | disk2 | disk3" },
            ParamInfo { name: "twist", default: "zeta", doc: "zero | zeta | zeta_bar | half | mixed | z_only" },
            P_MODE,
            ParamInfo { name: "moment_map", default: "log", doc: "log: G = A ln r; log_power: G^m = A ln r" },
            P_A,
            ParamInfo { name: "z_range", default: "[0.5, 2.0]", doc: "z interval of the chart" },
        ],
    },
    BuilderInfo {
        id: "ak_flat",
        summary: "R^2 x C with the zero twist",
        anchor: "g(J~., .) = -dx1 ^ dx2 + omega_h",
        params: &[],
    },
    BuilderInfo {
        id: "ak_disk_ex0",
        summary: "R^2 x (1 - |zeta|^2)|dzeta|^2 twisted by w",
        anchor: "g(J~., .) = -dx1 ^ dx2 + omega_h, w holomorphic on Z",
        params: &[ParamInfo { name: "twist", default: "zeta", doc: "zero | zeta | zeta_bar | half | mixed | mixed_linear" }, P_MODE],
    },
    BuilderInfo {
        id: "ak_disk_ex1_m2",
        summary: "R^2 x Z_1, Z_1 the twisted Calabi step over (1 - |zeta|^2)^2 |dzeta|^2",
        anchor: "(1 - |w|^2)^-m g_Sigma flat, M = R^2 x Z_{m-1}",
        params: &[P_MOMENT, P_A],
    },
    BuilderInfo {
        id: "calabi_chain_ex0_n",
        summary: "untwisted Calabi iteration over (1 - |zeta|^2)|dzeta|^2",
        anchor: "rho_k = 1/2 d I_k d ln(1 - |w|^2)",
        params: &[ParamInfo { name: "m", default: "2", doc: "number of levels, 1..=3" }, P_MOMENT, P_A],
    },
    BuilderInfo {
        id: "calabi_chain_ex1_m",
        summary: "twisted Calabi iteration over (1 - |zeta|^2)^m |dzeta|^2",
        anchor: "rho_k = (m - k)/2 d I_k d ln(1 - |w|^2)",
        params: &[ParamInfo { name: "m", default: "2", doc: "complex dimension of the last level, 1..=3" }, P_MOMENT, P_A],
    },
];

pub fn builder_info(id: &str) -> Option<&'static BuilderInfo> {
    BUILDERS.iter().find(|b| b.id == id)
}

/// A built scenario: the metric used by `curvature` and the checks used by
/// `verify`.
pub struct Built {
    pub chart: ChartManifold,
    pub metric: MetricField,
    pub checks: Vec<Check>,
}

fn allow(id: &str, p: &BuilderParams) -> Result<(), CliError> {
    let info = builder_info(id).ok_or_else(|| CliError::UnknownBuilder(id.into()))?;
    for name in p.set_names() {
        if !info.params.iter().any(|q| q.name == name) {
            return Err(CliError::Param(format!("builder {id} does not take parameter {name}")));
        }
    }
    Ok(())
}

/// Twists by id. Ids other than `z_only` live on a surface with the disk
/// coordinate at `zeta`; `z_only` lives on a Calabi chart of dimension `dim`.
pub fn resolve_twist(id: &str, dim: usize, zeta: (usize, usize)) -> Result<TwistMap, CliError> {
    let c = |re, im| Complex64::new(re, im);
    Ok(match id {
        "zero" => TwistMap::constant(c(0.0, 0.0), dim),
        "zeta" => TwistMap::coord_z(dim, zeta),
        "zeta_bar" => TwistMap::conj_z(dim, zeta),
        "half" => TwistMap::constant(c(0.5, 0.0), dim),
        "mixed" => TwistMap::constant(c(0.3, 0.4), dim),
        "mixed_linear" => {
            let (i, j) = zeta;
            TwistMap::new("0.5 x + 0.2 i y", dim, vec![i, j], move |p: &[Jet2]| (p[i] * 0.5, p[j] * 0.2))
        }
        "z_only" => TwistMap::new("0.2 z", dim, vec![1], |p: &[Jet2]| (p[1] * 0.2, Jet2::constant(0.0))),
        other => return Err(CliError::UnknownTwist(other.into())),
    })
}

fn geom(e: crate::GeomError) -> CliError {
    CliError::Build(e.to_string())
}

pub fn build(s: &Scenario) -> Result<Built, CliError> {
    let p = &s.params;
    allow(&s.builder, p)?;
    match s.builder.as_str() {
        "flat" => build_flat(p.n.unwrap_or(4)),
        "round_sphere" => {
            let t = round_sphere().map_err(geom)?;
            let mut checks = vec![scalar_check("sphere-scalar-curvature", "scal = 2", 2.0, &t)];
            let g = t.g.clone();
            checks.push(Check::at_most("sphere-sectional-curvature", "R(e1, e2, e2, e1) = |e1 ^ e2|^2", 1e-9, &t.chart, move |q| {
                let c = curvature_at(&g, q)?;
                Ok(Some((c.r(0, 1, 1, 0) / (c.g[(0, 0)] * c.g[(1, 1)]) - 1.0).abs()))
            }));
            checks.push(kahler_check("kahler-structure", &t, 1e-9));
            Ok(Built { chart: t.chart.clone(), metric: t.g.clone(), checks })
        }
        "hyperbolic_plane" => {
            let t = hyperbolic_plane().map_err(geom)?;
            let checks = vec![scalar_check("hyperbolic-scalar-curvature", "scal = -2", -2.0, &t), kahler_check("kahler-structure", &t, 1e-9)];
            Ok(Built { chart: t.chart.clone(), metric: t.g.clone(), checks })
        }
        "product" => build_product(),
        "calabi_flat" => {
            let z = p.z_range.unwrap_or([0.1, 1.25]);
            let c = build_calabi(&flat_plane(1.0).map_err(geom)?, CalabiProfile::MomentMap { a: p.a.unwrap_or(-1.0) }, (z[0], z[1])).map_err(geom)?;
            build_calabi_flat(c)
        }
        "broken" => build_broken(),
        "twisted_calabi" => build_twisted_calabi(p),
        "ak_flat" => {
            let z = flat_plane(1.0).map_err(geom)?;
            let a = build_ak_product(&z.triple, &TwistMap::constant(Complex64::new(0.0, 0.0), 2), TwistMode::Converse, &probe())
                .map_err(geom)?;
            Ok(ak_built(a, AkChecks::Flat))
        }
        "ak_disk_ex0" => {
            let z = scaled_disk(1, 0.5).map_err(geom)?;
            let tw = resolve_twist(p.twist.as_deref().unwrap_or("zeta"), 2, (0, 1))?;
            let a = build_ak_product(&z.triple, &tw, p.mode.unwrap_or(TwistMode::Converse), &probe()).map_err(geom)?;
            Ok(ak_built(a, AkChecks::Full))
        }
        "ak_disk_ex1_m2" => {
            let ch = iterate_example(ExampleKind::Ex1, 2, chain_params(p)).map_err(geom)?;
            let (z, tw) = ch.last();
            let a = build_ak_product(&z.triple, tw, TwistMode::Converse, &probe()).map_err(geom)?;
            Ok(ak_built(a, AkChecks::Product))
        }
        "calabi_chain_ex0_n" => build_chain(ExampleKind::Ex0, p),
        "calabi_chain_ex1_m" => build_chain(ExampleKind::Ex1, p),
        other => Err(CliError::UnknownBuilder(other.into())),
    }
}

/// Small fixed plan used by builders for their own precondition checks.
fn probe() -> crate::sampling::SamplePlan {
    crate::sampling::SamplePlan::new(0x5eed, 6)
}

fn chain_params(p: &BuilderParams) -> ChainParams {
    ChainParams {
        a: p.a.unwrap_or(-1.0),
        moment_map: p.moment_map.unwrap_or(ChainMomentMap::LogPower),
        ..ChainParams::default()
    }
}

fn kahler_check(name: &str, t: &HermitianTriple, tol: f64) -> Check {
    let t2 = t.clone();
    Check::at_most(name, "g(J., J.) = g, J^2 = -1, d omega = 0, N_J = 0", tol, &t.chart, move |q| {
        Ok(Some(t2.residuals_at(q)?.iter().fold(0.0f64, |m, x| m.max(*x))))
    })
}

fn scalar_check(name: &str, anchor: &str, expected: f64, t: &HermitianTriple) -> Check {
    let g = t.g.clone();
    Check::at_most(name, anchor, 1e-9, &t.chart, move |q| Ok(Some((curvature_at(&g, q)?.scalar - expected).abs())))
}

fn ricci_flat_check(name: &str, tol: f64, chart: &ChartManifold, g: &MetricField) -> Check {
    let g = g.clone();
    Check::at_most(name, "Ric = 0", tol, chart, move |q| Ok(Some(einstein_at(&g, q)?.0)))
}

fn verdict_check(name: &str, t: &HermitianTriple, s: &Splitting, expected: FoliationVerdict) -> Check {
    let (t, s) = (t.clone(), s.clone());
    let anchor = format!("verdict = {}", serde_json::to_value(expected).expect("enum serializes").as_str().unwrap_or("?"));
    Check::exact(name, &anchor, move |plan| {
        let (v, _) = classify(&t, &s, plan, DEFAULT_KAHLER_TOL)?;
        Ok(verdict_outcome(plan.count, v == expected, format!("classified as {v:?}")))
    })
}

fn build_flat(n: usize) -> Result<Built, CliError> {
    if n == 0 || n > crate::jet::MAX_DIM {
        return Err(CliError::Param(format!("n = {n} must lie in 1..={}", crate::jet::MAX_DIM)));
    }
    let chart = ChartManifold::new(format!("flat R^{n}"), vec![-1.0; n], vec![1.0; n]).map_err(geom)?;
    let metric = flat_metric(n);
    let g = metric.clone();
    let mut checks = vec![Check::at_most("flat-riemann-vanishes", "R_abcd = 0", 1e-11, &chart, move |q| {
        Ok(Some(curvature_at(&g, q)?.max_riemann()))
    })];
    if n % 2 == 0 {
        checks.push(kahler_check("kahler-structure", &flat(n, 1.0).map_err(geom)?, 1e-11));
    }
    Ok(Built { chart, metric, checks })
}

fn build_product() -> Result<Built, CliError> {
    let chart = ChartManifold::new("S2 x R2", vec![0.5, -1.0, -1.0, -1.0], vec![2.5, 1.0, 1.0, 1.0]).map_err(geom)?;
    let g: MetricField = Field::new(4, |p: &[Jet2]| {
        let s = p[0].sin();
        Mat::diag(&[Jet2::constant(1.0), s * s, Jet2::constant(1.0), Jet2::constant(1.0)])
    });
    let j: EndoField = Field::new(4, |p: &[Jet2]| {
        let s = p[0].sin();
        let mut m = standard_j(4);
        m[(1, 0)] = s.recip();
        m[(0, 1)] = -s;
        m
    });
    let split = Splitting::leading_coordinates(&g, 2);
    let t = HermitianTriple::new(chart, g, j).map_err(geom)?;
    let checks = vec![
        kahler_check("kahler-structure", &t, 1e-9),
        verdict_check("foliation-classified-kahler-product", &t, &split, FoliationVerdict::KahlerProduct),
    ];
    Ok(Built { chart: t.chart.clone(), metric: t.g.clone(), checks })
}

fn build_calabi_flat(c: CalabiChart) -> Result<Built, CliError> {
    let t = c.total.clone();
    let chart = t.chart.clone();
    let mut checks = vec![kahler_check("kahler-structure", &t, 1e-7)];
    let (t1, s1) = (t.clone(), c.splitting.clone());
    checks.push(Check::at_most("lee-form-homothetic", "L_V g = theta(V) g on D-, V in D+", 1e-7, &chart, move |q| {
        Ok(Some(foliation_at(&t1, &s1, q)?.homothetic_residual))
    }));
    let (t1, s1, c1) = (t.clone(), c.splitting.clone(), c.clone());
    checks.push(Check::at_most("lee-form-is-dlnz", "theta = d ln z", 1e-7, &chart, move |q| {
        let th = lee_form_at(&t1, &s1, q)?;
        let ex = c1.expected_theta(q);
        Ok(Some(th.iter().zip(&ex).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))))
    }));
    let (t1, s1) = (t.clone(), c.splitting.clone());
    checks.push(Check::at_most("lee-form-closed", "d theta = 0", 1e-7, &chart, move |q| {
        Ok(Some(foliation_at(&t1, &s1, q)?.dtheta_residual))
    }));
    let i0 = c.i0.clone();
    checks.push(Check::at_most("i0-integrable", "N_{I0} = 0", 1e-7, &chart, move |q| Ok(Some(nijenhuis_max(&i0.at(q)?)))));
    let (t1, s1) = (t.clone(), c.splitting.clone());
    checks.push(Check::at_most("dplus-totally-geodesic", "xi(D+, D+) = 0", 1e-7, &chart, move |q| {
        Ok(Some(foliation_at(&t1, &s1, q)?.dplus_geodesic_residual))
    }));
    let c1 = c.clone();
    checks.push(Check::at_most(
        "volume-identity",
        "omega0^m = -m G^(m-1) G' omega_N^(m-1) ^ Theta ^ dr",
        1e-9,
        &chart,
        move |q| Ok(Some(volume_residual(&c1, q)?)),
    ));
    let a = match c.profile {
        CalabiProfile::MomentMap { a } => a,
        _ => unreachable!("calabi_flat uses G = A ln r"),
    };
    let r_chart = ChartManifold::new("r", vec![0.3], vec![0.9]).map_err(geom)?;
    let c1 = c.clone();
    checks.push(
        Check::at_most("theta0-dr-coefficient", "theta0(d_r) = 2 G'(r) / G(r)", 1e-8, &r_chart, move |q| {
            let (coef, _) = c1.theta0_from_chart(q[0], 0.2, &[0.1, -0.3])?;
            Ok(Some((coef - theta0_dr_coefficient(a, q[0])).abs()))
        })
        .with_margin(0.0),
    );
    let c1 = c.clone();
    checks.push(
        Check::at_most("theta0-norm", "|theta0|^2 = -4 r G'(r) / G(r)^2", 1e-8, &r_chart, move |q| {
            let (_, n2) = c1.theta0_from_chart(q[0], 0.2, &[0.1, -0.3])?;
            Ok(Some((n2 - theta0_norm2(a, q[0])).abs()))
        })
        .with_margin(0.0),
    );
    checks.push(verdict_check("foliation-classified-holomorphic", &t, &c.splitting, FoliationVerdict::Holomorphic));
    Ok(Built { chart, metric: t.g.clone(), checks })
}

fn build_broken() -> Result<Built, CliError> {
    let base = flat_plane(1.0).map_err(geom)?;
    let c = build_calabi(&base, CalabiProfile::MomentMap { a: -1.0 }, (0.1, 1.25)).map_err(geom)?;
    let n = c.dim();
    let (g0, gn) = (c.total.g.clone(), base.triple.g.clone());
    let zero = Mat::zeros(FIBRE);
    // the base block is J0-invariant, so the perturbed metric stays Hermitian
    let g: MetricField = Field::new(n, move |p: &[Jet2]| {
        let bump = embed_tail_block(&gn.eval(&p[FIBRE..]), FIBRE, &zero).scale(p[0] * p[2] * p[1] * 0.3);
        g0.eval(p).add(&bump)
    });
    let t = HermitianTriple::new(c.total.chart.clone(), g.clone(), c.total.j.clone()).map_err(geom)?;
    let split = Splitting::leading_coordinates(&g, FIBRE);
    let (t1, s1) = (t.clone(), split.clone());
    let checks = vec![
        Check::at_least("homothety-defect-detected", "d theta != 0", 1e-3, &t.chart, move |q| {
            Ok(Some(foliation_at(&t1, &s1, q)?.dtheta_residual))
        }),
        verdict_check("foliation-classified-failed", &t, &split, FoliationVerdict::Failed),
    ];
    Ok(Built { chart: t.chart.clone(), metric: g, checks })
}

fn disk_base(id: &str) -> Result<KahlerBase, CliError> {
    match id {
        "flat" => flat_plane(0.6).map_err(geom),
        "disk1" => scaled_disk(1, 0.5).map_err(geom),
        "disk2" => scaled_disk(2, 0.5).map_err(geom),
        "disk3" => scaled_disk(3, 0.5).map_err(geom),
        other => Err(CliError::Param(format!("unknown base {other}"))),
    }
}

fn build_twisted_calabi(p: &BuilderParams) -> Result<Built, CliError> {
    let base = disk_base(p.base.as_deref().unwrap_or("disk1"))?;
    let a = p.a.unwrap_or(-1.0);
    let profile = match p.moment_map.unwrap_or(ChainMomentMap::Log) {
        ChainMomentMap::Log => CalabiProfile::MomentMap { a },
        ChainMomentMap::LogPower => CalabiProfile::MomentMapPower { a },
    };
    let z = p.z_range.unwrap_or([0.5, 2.0]);
    let c = build_calabi(&base, profile, (z[0], z[1])).map_err(geom)?;
    let n = c.dim();
    let id = p.twist.as_deref().unwrap_or("zeta");
    let tw = if id == "z_only" {
        resolve_twist(id, n, (0, 1))?
    } else {
        resolve_twist(id, 2, base.zeta.unwrap_or((0, 1)))?.lift(FIBRE, n)
    };
    let mode = p.mode.unwrap_or(TwistMode::Converse);
    let tt = twist_calabi(&c, &tw, mode, &probe()).map_err(geom)?;
    let chart = c.total.chart.clone();
    let mut checks = Vec::new();
    let (t0, i0, tt1) = (c.total.clone(), c.i0.clone(), tt.clone());
    checks.push(Check::at_most(
        "twist-preserves-fundamental-forms",
        "g_w(J_w., .) = g(J., .), g_w(I_w., .) = g(I., .)",
        1e-9,
        &chart,
        move |q| Ok(Some(form_invariance_residual(&t0, Some(&i0), &tt1, q)?)),
    ));
    let (t0, tt1, tw1) = (c.total.clone(), tt.clone(), tw.clone());
    let anchor = match mode {
        TwistMode::Converse => "|theta|_w^2 / |theta|^2 = |1 + w|^2 / (1 - |w|^2)",
        TwistMode::Forward => "|theta|_w^2 / |theta|^2 = |1 - w|^2 / (1 - |w|^2)",
    };
    checks.push(Check::at_most("twist-norm-factor", anchor, 1e-9, &chart, move |q| {
        Ok(Some((measured_norm_factor(&t0, &tt1, q)? - norm_factor(tw1.at(q), mode)).abs()))
    }));
    let jw = tt.triple.j.clone();
    checks.push(Check::at_most("twisted-nijenhuis", "N_{J_w} = 0", 1e-7, &chart, move |q| Ok(Some(nijenhuis_max(&jw.at(q)?)))));
    let (t0, s0, e0, tw1) = (c.total.clone(), c.splitting.clone(), calabi_frame(&c), tw.clone());
    checks.push(Check::at_most("transverse-holomorphy", "dw2(X) + dw1(J X) = 0, X in D-", 1e-7, &chart, move |q| {
        Ok(Some(holomorphy_at(&t0, &s0, &e0, &tw1, q)?.0))
    }));
    if tw.deps.iter().all(|&d| d >= FIBRE) {
        let (c1, tt1, tw1) = (c.clone(), tt.clone(), tw.clone());
        checks.push(Check::at_most(
            "twisted-ricci-form-identity",
            "rho_w = rho_N - 1/2 d J d ln(1 - |w|^2)",
            1e-6,
            &chart,
            move |q| Ok(Some(varric_residuals_at(&c1, &tt1, &tw1, q)?.0)),
        ));
        let (c1, tt1, tw1) = (c.clone(), tt.clone(), tw.clone());
        checks.push(Check::at_most(
            "twisted-ricci-form-identity-with-profile",
            "rho_w = rho_N - 1/2 d J d ln(1 - |w|^2) - 1/2 d J_w d ln(q(z) z^(1-m))",
            1e-6,
            &chart,
            move |q| Ok(Some(varric_residuals_at(&c1, &tt1, &tw1, q)?.1)),
        ));
    }
    checks.push(verdict_check("foliation-classified-holomorphic", &tt.triple, &c.splitting, FoliationVerdict::Holomorphic));
    Ok(Built { chart, metric: tt.triple.g.clone(), checks })
}

#[derive(Clone, Copy, PartialEq)]
enum AkChecks {
    /// Zero twist: everything Kaehler and flat.
    Flat,
    /// Surface factor: structure, curvature and torsion.
    Full,
    /// Higher-dimensional factor: structure, AK3 and Ricci-flatness.
    Product,
}

fn ak_built(a: AkProduct, which: AkChecks) -> Built {
    let chart = a.kahler.chart.clone();
    let ricci_tol = if which == AkChecks::Product { 1e-5 } else { 1e-6 };
    let mut checks = Vec::new();
    let field = |name: &str, anchor: &str, tol: f64, f: fn(&crate::almost_kahler::AkStructure) -> f64| {
        let a1 = a.clone();
        Check::at_most(name, anchor, tol, &chart, move |q| Ok(Some(f(&structure_at(&a1, q)?))))
    };
    checks.push(field("ak-fundamental-form", "g(J~., .) = -dx1 ^ dx2 + omega_h", 1e-9, |s| s.form));
    checks.push(field("plane-killing-fields", "L_{d_x1} g = L_{d_x2} g = 0", 1e-9, |s| s.killing));
    checks.push(field("ak-form-closed", "d omega_{J~} = 0", 1e-9, |s| s.d_omega));
    checks.push(field("twisted-pair-kahler", "(g, J) Kaehler", 1e-9, |s| s.kahler));
    if which == AkChecks::Flat {
        let a1 = a.clone();
        checks.push(Check::at_most("intrinsic-torsion-vanishes", "eta = 1/2 (nabla J~) J~ = 0", 1e-9, &chart, move |q| {
            Ok(Some(torsion_at(&a1, q)?.max_eta))
        }));
    } else {
        let a1 = a.clone();
        checks.push(Check::at_least("jtilde-not-integrable", "N_{J~} != 0", 1e-3, &chart, move |q| {
            Ok(Some(structure_at(&a1, q)?.nijenhuis_tilde))
        }));
    }
    let a1 = a.clone();
    checks.push(Check::at_most("ak3-curvature", "R(J~X, J~Y, J~Z, J~U) = R(X, Y, Z, U)", 1e-6, &chart, move |q| {
        Ok(Some(ak3_at(&a1, q)?.normalized))
    }));
    if which == AkChecks::Full {
        let a1 = a.clone();
        checks.push(Check::at_most("ak3-block-plus", "R(V1, V2, V3, X) = 0, V in D+, X in D-", 1e-6, &chart, move |q| {
            Ok(Some(ak3_at(&a1, q)?.block_plus))
        }));
        let a1 = a.clone();
        checks.push(Check::at_most("ak3-block-minus", "R(X, Y, Z, V) = 0, X in D-, V in D+", 1e-6, &chart, move |q| {
            Ok(Some(ak3_at(&a1, q)?.block_minus))
        }));
        let torsion = |name: &str, anchor: &str, f: fn(&crate::almost_kahler::TorsionPoint) -> Option<f64>| {
            let a1 = a.clone();
            Check::at_most(name, anchor, 1e-8, &chart, move |q| Ok(f(&torsion_at(&a1, q)?)))
        };
        checks.push(torsion("killing-torsion-identity", "2 g(eta_{K_i} K_j, X) = X g(K_i, K_j)", |t| Some(t.prelt)));
        checks.push(torsion("kahler-nullity", "eta_X = 0, X in D-", |t| t.kernel.map(|k| k.nullity)));
        checks.push(torsion("torsion-dplus-into-dminus", "eta_{D+} D+ in D-", |t| t.kernel.map(|k| k.containment_plus)));
        checks.push(torsion("torsion-dminus-into-dplus", "eta_{D+} D- in D+", |t| t.kernel.map(|k| k.containment_minus)));
        checks.push(torsion("torsion-anticommutes", "eta_U J~ = -J~ eta_U", |t| Some(t.anticommute)));
        checks.push(torsion("torsion-jtilde-shift", "eta_{J~U} = eta_U J~", |t| Some(t.jtilde_shift)));
        let a1 = a.clone();
        checks.push(Check::exact("torsion-span-rank", "dim eta_{D+} D- = 2 where dw != 0", move |plan| span_rank_outcome(&a1, plan)));
    }
    checks.push(ricci_flat_check("ricci-flat", ricci_tol, &chart, &a.kahler.g));
    Built { chart: chart.clone(), metric: a.kahler.g.clone(), checks }
}

fn span_rank_outcome(a: &AkProduct, plan: &crate::sampling::SamplePlan) -> crate::Result<Outcome> {
    let mut o = Outcome { used: 0, excluded: 0, max: 0.0, mean: 0.0, note: None };
    let mut ranks = std::collections::BTreeSet::new();
    for q in a.kahler.chart.sample(plan)? {
        match torsion_at(a, &q)?.kernel {
            None => o.excluded += 1,
            Some(k) => {
                o.used += 1;
                ranks.insert(k.span_rank);
                if k.span_rank != 2 {
                    o.max = 1.0;
                }
            }
        }
    }
    o.mean = o.max;
    o.note = Some(format!("ranks {ranks:?}"));
    Ok(o)
}

fn build_chain(kind: ExampleKind, p: &BuilderParams) -> Result<Built, CliError> {
    let m = p.m.unwrap_or(2);
    if m == 0 || m > MAX_CHAIN_M {
        return Err(CliError::Param(format!("m = {m} must lie in 1..={MAX_CHAIN_M}")));
    }
    let ch = iterate_example(kind, m, chain_params(p)).map_err(geom)?;
    let mut checks = Vec::new();
    for (k, (z, tw)) in ch.levels.iter().zip(&ch.twists).enumerate() {
        checks.push(kahler_check(&format!("level-{k}-kahler"), &z.triple, 1e-7));
        let (z1, tw1, coef) = (z.clone(), tw.clone(), ch.coefficients[k]);
        let anchor = format!("rho_{k} = {coef} d I_{k} d ln(1 - |w|^2)");
        checks.push(Check::at_most(&format!("level-{k}-ricci-form"), &anchor, 1e-6, &z.triple.chart, move |q| {
            Ok(Some(ricci_coefficient_at(&z1, &tw1, coef, q)?))
        }));
    }
    let (last, tw) = ch.last();
    let (t1, tw1) = (last.triple.clone(), tw.clone());
    let sff = move |q: &[f64]| kernel_dw_at(&t1, &tw1, q);
    let (chart, metric) = match kind {
        ExampleKind::Ex0 => {
            checks.push(Check::at_most("kernel-dw-totally-geodesic", "Q (nabla_X P) Y = 0 on Ker dw", 1e-7, &last.triple.chart, sff));
            (last.triple.chart.clone(), last.triple.g.clone())
        }
        ExampleKind::Ex1 => {
            checks.push(Check::at_least("kernel-dw-not-totally-geodesic", "Q (nabla_X P) Y != 0 on Ker dw", 1e-3, &last.triple.chart, sff));
            let (next, tw_next) = ch.next_step().map_err(geom)?;
            let chart = next.triple.chart.clone();
            checks.push(ricci_flat_check("next-step-ricci-flat", 1e-5, &chart, &next.triple.g));
            let tw2 = tw_next.clone();
            checks.push(Check::at_most("next-step-twist-defined", "|w| < 1", 1.0 - 1e-9, &chart, move |q| Ok(Some(tw2.at(q).norm()))));
            (chart, next.triple.g.clone())
        }
    };
    Ok(Built { chart, metric, checks })
}
