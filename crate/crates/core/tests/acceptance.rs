//! Acceptance suite: one line per criterion with the measured figures.
//!
//! Two criteria are pinned as expected failures because their premise, the
//! moment map G = A ln r, does not produce the stated Ricci form in complex
//! dimension 2 and higher. They are still run and printed as FAIL, together
//! with the corrected moment map G^m = A ln r for comparison. The process
//! fails if any other criterion fails or if a pinned one starts passing.

use std::f64::consts::FRAC_PI_3;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use kahlerfol::almost_kahler::{
    ak3_residual, build_ak_product, einstein_residual, iterate_example, torsion_report, ChainMomentMap, ChainParams,
    ExampleKind,
};
use kahlerfol::bases::{flat_metric, flat_plane, hyperbolic_plane, round_sphere, scaled_disk};
use kahlerfol::calabi::{build_calabi, theta0_dr_coefficient, theta0_norm2, CalabiProfile, FIBRE};
use kahlerfol::cli::check::{run_checks, CheckRecord, RunOptions};
use kahlerfol::cli::{build, Scenario, BUILDERS};
use kahlerfol::foliation::classify;
use kahlerfol::hermitian::{kahler_verdict, nijenhuis_max, DEFAULT_KAHLER_TOL};
use kahlerfol::sampling::SamplePlan;
use kahlerfol::tensor::curvature::curvature_at;
use kahlerfol::tensor::fields::ChartManifold;
use kahlerfol::twist::{
    calabi_frame, form_invariance_residual, holomorphy_at, measured_norm_factor, norm_factor, twist_calabi, varric_check,
    TwistMap, TwistMode,
};

const FLAT_TOL: f64 = 1e-11;
const SCALAR_TOL: f64 = 1e-9;
const CALABI_TOL: f64 = 1e-7;
const VOLUME_TOL: f64 = 1e-9;
const THETA0_TOL: f64 = 1e-8;
const INVARIANCE_TOL: f64 = 1e-9;
const NORM_FACTOR_TOL: f64 = 1e-9;
const INTEGRABILITY_TOL: f64 = 1e-7;
const RICCI_FORM_TOL: f64 = 1e-6;
const AK3_TOL: f64 = 1e-6;
const PRELT_TOL: f64 = 1e-8;
const RICCI_FLAT_4_TOL: f64 = 1e-6;
const RICCI_FLAT_6_TOL: f64 = 1e-5;

/// Criteria expected to fail, with the reason printed beside them.
const EXPECTED_FAILURES: &[(u32, &str)] = &[
    (5, "with G = A ln r, rho_w - rho_N + 1/2 d J d ln(1-|w|^2) = 1/2 d J_w d ln z in complex dimension 2"),
    (7, "the 6-dim metric over the G = A ln r step is not Ricci-flat; G^m = A ln r is"),
];

struct Outcome {
    pass: bool,
    summary: String,
    notes: Vec<String>,
}

fn outcome(pass: bool, summary: String) -> Outcome {
    Outcome { pass, summary, notes: Vec::new() }
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn run_builder(builder: &str, params: &str, samples: usize, seed: u64) -> Res<Vec<CheckRecord>> {
    let text = format!(r#"{{"name": "{builder}", "builder": "{builder}", "params": {params}, "plan": {{"seed": {seed}, "samples": {samples}}}}}"#);
    let s = Scenario::from_json(&text, "acceptance")?;
    let b = build(&s)?;
    Ok(run_checks(&s, &b.checks, RunOptions::default()).checks)
}

fn record<'a>(rs: &'a [CheckRecord], name: &str) -> &'a CheckRecord {
    rs.iter().find(|r| r.name == name).unwrap_or_else(|| panic!("no check {name}"))
}

fn max_of(rs: &[CheckRecord], name: &str) -> f64 {
    record(rs, name).max_residual.unwrap_or(f64::NAN)
}

fn criterion_1() -> Res<Outcome> {
    let plan = SamplePlan::new(101, 20);
    let mut flat_max: f64 = 0.0;
    for n in 2..=4 {
        let chart = ChartManifold::new("box", vec![-1.0; n], vec![1.0; n])?;
        let g = flat_metric(n);
        for p in chart.sample(&plan)? {
            flat_max = flat_max.max(curvature_at(&g, &p)?.max_riemann());
        }
    }
    let sphere = round_sphere()?;
    let s_scal = curvature_at(&sphere.g, &[FRAC_PI_3, 0.0])?.scalar;
    let mut s_dev = (s_scal - 2.0).abs();
    for p in sphere.chart.sample(&plan)? {
        s_dev = s_dev.max((curvature_at(&sphere.g, &p)?.scalar - 2.0).abs());
    }
    let hyp = hyperbolic_plane()?;
    let mut h_dev: f64 = 0.0;
    for p in hyp.chart.sample(&plan)? {
        h_dev = h_dev.max((curvature_at(&hyp.g, &p)?.scalar + 2.0).abs());
    }
    let pass = flat_max <= FLAT_TOL && s_dev <= SCALAR_TOL && h_dev <= SCALAR_TOL;
    Ok(outcome(
        pass,
        format!(
            "flat R^2..R^4 max|R| {flat_max:.1e} <= {FLAT_TOL:.0e}; sphere scal(pi/3, 0) = {s_scal:.12} (max dev {s_dev:.1e}); hyperbolic max |scal + 2| {h_dev:.1e} <= {SCALAR_TOL:.0e}"
        ),
    ))
}

fn criterion_2() -> Res<Outcome> {
    let rs = run_builder("calabi_flat", r#"{"a": -1.0}"#, 50, 202)?;
    let c = build_calabi(&flat_plane(1.0)?, CalabiProfile::MomentMap { a: -1.0 }, (0.1, 1.25))?;
    let v = kahler_verdict(&c.total, &SamplePlan::new(202, 50), CALABI_TOL)?;
    let items = [
        ("lee-form-homothetic", CALABI_TOL),
        ("lee-form-is-dlnz", CALABI_TOL),
        ("i0-integrable", CALABI_TOL),
        ("dplus-totally-geodesic", CALABI_TOL),
        ("volume-identity", VOLUME_TOL),
    ];
    let mut pass = v.is_kahler && v.compatible <= CALABI_TOL && v.closed <= CALABI_TOL && v.integrable <= CALABI_TOL;
    let mut parts = vec![format!("kahler (compat {:.1e}, d omega {:.1e}, N_J {:.1e})", v.compatible, v.closed, v.integrable)];
    for (name, tol) in items {
        let m = max_of(&rs, name);
        pass &= m <= tol && record(&rs, name).points_used == 50;
        parts.push(format!("{name} {m:.1e}"));
    }
    Ok(outcome(pass, format!("{} at 50 samples", parts.join(", "))))
}

fn criterion_3() -> Res<Outcome> {
    let a = -1.0;
    let c = build_calabi(&flat_plane(1.0)?, CalabiProfile::MomentMap { a }, (0.1, 1.25))?;
    let (mut dc, mut dn) = (0.0f64, 0.0f64);
    for k in 0..20 {
        let r = 0.3 + 0.6 * k as f64 / 19.0;
        let (coef, n2) = c.theta0_from_chart(r, 0.2, &[0.1, -0.3])?;
        dc = dc.max((coef - theta0_dr_coefficient(a, r)).abs());
        dn = dn.max((n2 - theta0_norm2(a, r)).abs());
    }
    let (c5, n5) = c.theta0_from_chart(0.5, 0.2, &[0.1, -0.3])?;
    let mut o = outcome(
        dc <= THETA0_TOL && dn <= THETA0_TOL,
        format!("20 r in [0.3, 0.9]: dr-coefficient dev {dc:.1e}, |theta0|^2 dev {dn:.1e} <= {THETA0_TOL:.0e}"),
    );
    o.notes.push(format!("r = 0.5: dr-coefficient {c5:.10} (formula {:.10}), |theta0|^2 {n5:.10} (formula {:.10})", theta0_dr_coefficient(a, 0.5), theta0_norm2(a, 0.5)));
    Ok(o)
}

fn criterion_4() -> Res<Outcome> {
    let plan = SamplePlan::new(404, 20);
    let base = scaled_disk(1, 0.5)?;
    let c = build_calabi(&base, CalabiProfile::MomentMap { a: -1.0 }, (0.5, 2.0))?;
    let n = c.dim();
    let frame = calabi_frame(&c);
    let pts = c.total.chart.sample(&plan)?;
    let mut pass = true;
    let mut inv: f64 = 0.0;
    let mut factor: f64 = 0.0;
    for mode in [TwistMode::Converse, TwistMode::Forward] {
        for w in [Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0), Complex64::new(0.3, 0.4)] {
            let tt = twist_calabi(&c, &TwistMap::constant(w, n), mode, &plan)?;
            for p in &pts {
                inv = inv.max(form_invariance_residual(&c.total, Some(&c.i0), &tt, p)?);
                factor = factor.max((measured_norm_factor(&c.total, &tt, p)? - norm_factor(w, mode)).abs());
            }
        }
    }
    pass &= inv <= INVARIANCE_TOL && factor <= NORM_FACTOR_TOL;
    // integrability of J_w against transverse holomorphy
    let z_only = TwistMap::new("0.2 z", n, vec![1], |p: &[kahlerfol::jet::Jet2]| (p[1] * 0.2, kahlerfol::jet::Jet2::constant(0.0)));
    let zeta = || TwistMap::coord_z(2, (0, 1)).lift(FIBRE, n);
    let twists = vec![
        TwistMap::constant(Complex64::new(0.3, 0.4), n),
        zeta(),
        z_only,
        TwistMap::affine("0.4 zeta + 0.1", 2, (0, 1), Complex64::new(0.4, 0.0), Complex64::new(0.1, 0.0), false).lift(FIBRE, n),
        TwistMap::conj_z(2, (0, 1)).lift(FIBRE, n),
    ];
    let mut agree = 0;
    let mut conj = (0.0f64, 0.0f64);
    let total = twists.len() * 2;
    for (i, tw) in twists.iter().enumerate() {
        for mode in [TwistMode::Converse, TwistMode::Forward] {
            let tt = twist_calabi(&c, tw, mode, &plan)?;
            let (mut nj, mut hol) = (0.0f64, 0.0f64);
            for p in &pts {
                nj = nj.max(nijenhuis_max(&tt.triple.j.at(p)?));
                hol = hol.max(holomorphy_at(&c.total, &c.splitting, &frame, tw, p)?.0);
            }
            if (nj <= INTEGRABILITY_TOL) == (hol <= INTEGRABILITY_TOL) {
                agree += 1;
            }
            // the last twist is zeta-bar, the negative control
            if i + 1 == twists.len() {
                conj = (conj.0.max(nj), conj.1.max(hol));
            }
        }
    }
    let conj_fails = conj.0 > INTEGRABILITY_TOL && conj.1 > INTEGRABILITY_TOL;
    pass &= agree == total && conj_fails;
    Ok(outcome(
        pass,
        format!(
            "form invariance {inv:.1e} <= {INVARIANCE_TOL:.0e}; norm factor dev {factor:.1e} <= {NORM_FACTOR_TOL:.0e} (w = 0, 0.5, 0.3+0.4i, both modes); N_J <= 1e-7 iff holomorphic in {agree}/{total}; zeta-bar N_J {:.1e}, holomorphy {:.1e}",
            conj.0, conj.1
        ),
    ))
}

fn criterion_5() -> Res<Outcome> {
    let plan = SamplePlan::new(505, 30);
    let base = scaled_disk(1, 0.5)?;
    let zero = TwistMap::constant(Complex64::new(0.0, 0.0), 4);
    let zeta = TwistMap::coord_z(2, (0, 1)).lift(FIBRE, 4);
    let literal = build_calabi(&base, CalabiProfile::MomentMap { a: -1.0 }, (0.5, 2.0))?;
    let power = build_calabi(&base, CalabiProfile::MomentMapPower { a: -1.0 }, (0.5, 2.0))?;
    let (mut three_term, mut aware, mut corrected) = (0.0f64, 0.0f64, 0.0f64);
    for tw in [&zero, &zeta] {
        let r = varric_check(&literal, tw, TwistMode::Converse, &plan)?;
        three_term = three_term.max(r.residual);
        aware = aware.max(r.profile_residual);
        corrected = corrected.max(varric_check(&power, tw, TwistMode::Converse, &plan)?.residual);
    }
    let mut o = outcome(
        three_term <= RICCI_FORM_TOL,
        format!("G = A ln r, w in {{0, zeta}}, 30 samples: three-term residual {three_term:.3e} vs {RICCI_FORM_TOL:.0e}"),
    );
    o.notes.push(format!("same charts, identity with the profile term -1/2 d J_w d ln(q z^(1-m)): {aware:.1e}"));
    o.notes.push(format!("moment map G^2 = A ln r, three-term identity: {corrected:.1e}"));
    Ok(o)
}

fn criterion_6() -> Res<Outcome> {
    let plan = SamplePlan::new(606, 30);
    let z = scaled_disk(1, 0.5)?;
    let a = build_ak_product(&z.triple, &TwistMap::coord_z(2, (0, 1)), TwistMode::Converse, &plan)?;
    let r = ak3_residual(&a, &plan)?;
    let t = torsion_report(&a, &plan)?;
    let pass = r.residual <= AK3_TOL
        && r.block_plus <= AK3_TOL
        && r.block_minus <= AK3_TOL
        && t.prelt_residual <= PRELT_TOL
        && t.points_used > 0
        && t.span_rank_min == 2
        && t.span_rank_max == 2;
    Ok(outcome(
        pass,
        format!(
            "AK3 {:.1e}, blocks {:.1e}/{:.1e} <= {AK3_TOL:.0e} (max|R| {:.2}); torsion identity {:.1e} <= {PRELT_TOL:.0e}; span rank {}..{} at {} points ({} excluded)",
            r.residual, r.block_plus, r.block_minus, r.max_riemann, t.prelt_residual, t.span_rank_min, t.span_rank_max, t.points_used, t.points_excluded
        ),
    ))
}

fn six_dim_ricci(mm: ChainMomentMap, plan: &SamplePlan) -> Res<f64> {
    let ch = iterate_example(ExampleKind::Ex1, 2, ChainParams { moment_map: mm, ..ChainParams::default() })?;
    let (z, tw) = ch.last();
    let a = build_ak_product(&z.triple, tw, TwistMode::Converse, plan)?;
    Ok(einstein_residual(&a.kahler.g, &a.kahler.chart, plan)?.ricci_max)
}

fn criterion_7() -> Res<Outcome> {
    let plan30 = SamplePlan::new(707, 30);
    let z = scaled_disk(1, 0.5)?;
    let a = build_ak_product(&z.triple, &TwistMap::coord_z(2, (0, 1)), TwistMode::Converse, &plan30)?;
    let four = einstein_residual(&a.kahler.g, &a.kahler.chart, &plan30)?.ricci_max;
    let plan15 = SamplePlan::new(707, 15);
    let six = six_dim_ricci(ChainMomentMap::Log, &plan15)?;
    let six_power = six_dim_ricci(ChainMomentMap::LogPower, &plan15)?;
    let mut o = outcome(
        four <= RICCI_FLAT_4_TOL && six <= RICCI_FLAT_6_TOL,
        format!("4-dim max|Ric| {four:.1e} <= {RICCI_FLAT_4_TOL:.0e} (30 samples); 6-dim with G = A ln r max|Ric| {six:.3e} vs {RICCI_FLAT_6_TOL:.0e} (15 samples)"),
    );
    o.notes.push(format!("6-dim with G^2 = A ln r: max|Ric| {six_power:.1e}"));
    Ok(o)
}

fn criterion_8() -> Res<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (builder, check) in [
        ("twisted_calabi", "foliation-classified-holomorphic"),
        ("product", "foliation-classified-kahler-product"),
        ("broken", "foliation-classified-failed"),
    ] {
        let mut notes = Vec::new();
        for samples in [50, 200] {
            let rs = run_builder(builder, "{}", samples, 808)?;
            let r = record(&rs, check);
            pass &= r.pass;
            notes.push(r.note.clone().unwrap_or_default());
        }
        pass &= notes[0] == notes[1];
        parts.push(format!("{builder}: {} / {}", notes[0].trim_start_matches("classified as "), notes[1].trim_start_matches("classified as ")));
    }
    // the same verdict through the library entry point
    let c = build_calabi(&scaled_disk(1, 0.5)?, CalabiProfile::MomentMap { a: -1.0 }, (0.5, 2.0))?;
    let tt = twist_calabi(&c, &TwistMap::coord_z(2, (0, 1)).lift(FIBRE, 4), TwistMode::Converse, &SamplePlan::new(1, 4))?;
    let (v, _) = classify(&tt.triple, &c.splitting, &SamplePlan::new(808, 50), DEFAULT_KAHLER_TOL)?;
    parts.push(format!("library {v:?}"));
    Ok(outcome(pass, format!("{} (50 / 200 samples)", parts.join("; "))))
}

fn criterion_9() -> Res<Outcome> {
    let mut same = 0;
    for b in BUILDERS {
        let a = serde_json::to_string(&run_builder(b.id, "{}", 4, 909)?)?;
        let c = serde_json::to_string(&run_builder(b.id, "{}", 4, 909)?)?;
        if a == c {
            same += 1;
        }
    }
    Ok(outcome(same == BUILDERS.len(), format!("{same}/{} builders give byte-identical check records across two runs", BUILDERS.len())))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Res<Outcome>); 9] = [
        (1, "curvature engine oracles", Duration::from_secs(1), criterion_1),
        (2, "Calabi builder over flat C", Duration::from_secs(10), criterion_2),
        (3, "theta0 closed forms", Duration::from_secs(10), criterion_3),
        (4, "twist invariants and integrability", Duration::from_secs(10), criterion_4),
        (5, "three-term Ricci form identity", Duration::from_secs(30), criterion_5),
        (6, "AK3 curvature and torsion", Duration::from_secs(60), criterion_6),
        (7, "Ricci-flat examples", Duration::from_secs(300), criterion_7),
        (8, "foliation classifier", Duration::from_secs(60), criterion_8),
        (9, "deterministic reports", Duration::from_secs(60), criterion_9),
    ];
    let mut unexpected = Vec::new();
    for (id, title, budget, f) in criteria {
        let t0 = Instant::now();
        let res = f();
        let dt = t0.elapsed();
        let (pass, summary, notes) = match res {
            Ok(o) => (o.pass && dt <= budget, o.summary, o.notes),
            Err(e) => (false, format!("error: {e}"), Vec::new()),
        };
        let expected = EXPECTED_FAILURES.iter().find(|(k, _)| *k == id);
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {tag} {title}: {summary} [{:.2}s, budget {}s]", dt.as_secs_f64(), budget.as_secs());
        for n in notes {
            println!("    note: {n}");
        }
        match (pass, expected) {
            (false, Some((_, why))) => println!("    expected failure: {why}"),
            (true, Some(_)) => {
                println!("    pinned as an expected failure but passed");
                unexpected.push(id);
            }
            (false, None) => unexpected.push(id),
            (true, None) => {}
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected outcomes for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
