//! Kaehler metrics of Calabi type in the reduced chart (s, z, base).
//!
//! With Theta = ds + alpha and d alpha = omega_N the metric is
//! g0 = q(z) dz^2 + Theta^2 / q(z) + z g_N, with complex structure
//! J0 d_z = q d_s on the fibre directions and the horizontal lift of the base
//! structure. I0 agrees with J0 on the base and is reversed on span{d_s, d_z}.
//! The Kaehler form is omega0 = z omega_N + dz ^ Theta, and the leaves of
//! span{d_s, d_z} form a homothetic foliation with Lee form d ln z.
//!
//! For a moment map G(r) = A ln r (A < 0, 0 < r < 1) one has z = G(r) and a
//! constant profile q = -1/A.

use std::sync::Arc;

use crate::bases::KahlerBase;
use crate::error::{GeomError, Result};
use crate::foliation::Splitting;
use crate::hermitian::{kahler_verdict, lee_form_at as hermitian_lee_form_at, HermitianTriple, DEFAULT_KAHLER_TOL};
use crate::jet::{Jet2, Scalar};
use crate::quadrature::DEFAULT_ORDER;
use crate::sampling::SamplePlan;
use crate::tensor::fields::{EndoField, Field, FormField, MetricField, ScalarField};
use crate::tensor::forms::Form;
use crate::tensor::homotopy::homotopy_primitive;
use crate::tensor::linalg::{basis, Mat};

/// Number of leading fibre coordinates (s, z).
pub const FIBRE: usize = 2;

pub type ProfileFn = Arc<dyn Fn(Jet2) -> Jet2 + Send + Sync>;

#[derive(Clone)]
pub enum CalabiProfile {
    /// G(r) = A ln r with A < 0, giving q = -1/A.
    MomentMap { a: f64 },
    /// G(r)^m = A ln r with A < 0 and m the complex dimension of the total
    /// space, giving q = -m z^(m-1) / A. This is the moment map for which
    /// q(z) z^(1-m) is constant, so the Ricci form of the total space equals
    /// the lifted Ricci form of the base.
    MomentMapPower { a: f64 },
    /// An arbitrary positive profile q(z).
    Profile { q: ProfileFn, label: String },
}

impl std::fmt::Debug for CalabiProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CalabiProfile::MomentMap { a } => write!(f, "MomentMap {{ a: {a} }}"),
            CalabiProfile::MomentMapPower { a } => write!(f, "MomentMapPower {{ a: {a} }}"),
            CalabiProfile::Profile { label, .. } => write!(f, "Profile({label})"),
        }
    }
}

impl CalabiProfile {
    /// q as a function of z, for a total space of complex dimension m.
    pub fn q(&self, m: usize) -> ProfileFn {
        match self {
            CalabiProfile::MomentMap { a } => {
                let q = -1.0 / a;
                Arc::new(move |_| Jet2::constant(q))
            }
            CalabiProfile::MomentMapPower { a } => {
                let c = -(m as f64) / a;
                Arc::new(move |z: Jet2| z.powi(m as i32 - 1) * c)
            }
            CalabiProfile::Profile { q, .. } => q.clone(),
        }
    }

    fn moment_constant(&self) -> Option<f64> {
        match self {
            CalabiProfile::MomentMap { a } | CalabiProfile::MomentMapPower { a } => Some(*a),
            CalabiProfile::Profile { .. } => None,
        }
    }

    /// (r, G'(r)) at a given z = G(r), for moment-map profiles.
    pub fn r_and_slope(&self, z: f64, m: usize) -> Option<(f64, f64)> {
        match self {
            CalabiProfile::MomentMap { a } => {
                let r = r_of_z(*a, z);
                Some((r, a / r))
            }
            CalabiProfile::MomentMapPower { a } => {
                let r = (z.powi(m as i32) / a).exp();
                Some((r, a / (m as f64 * r * z.powi(m as i32 - 1))))
            }
            CalabiProfile::Profile { .. } => None,
        }
    }
}

/// z = G(r) = A ln r.
pub fn z_of_r(a: f64, r: f64) -> f64 {
    a * r.ln()
}

/// Inverse of [`z_of_r`].
pub fn r_of_z(a: f64, z: f64) -> f64 {
    (z / a).exp()
}

/// dr/dz at a given r.
pub fn dr_dz(a: f64, r: f64) -> f64 {
    r / a
}

/// dr-coefficient of the Lee form of I0 predicted from H = 1/G:
/// -2 H'/H = 2 G'/G.
pub fn theta0_dr_coefficient(a: f64, r: f64) -> f64 {
    let g = a * r.ln();
    let gp = a / r;
    2.0 * gp / g
}

/// |theta0|^2 predicted from H = 1/G: 4 r H'(r) = -4 r G'/G^2.
pub fn theta0_norm2(a: f64, r: f64) -> f64 {
    let g = a * r.ln();
    let gp = a / r;
    -4.0 * r * gp / (g * g)
}

/// A Calabi-type metric on R_s x (z-interval) x N.
#[derive(Clone, Debug)]
pub struct CalabiChart {
    pub base: KahlerBase,
    pub profile: CalabiProfile,
    pub z_range: (f64, f64),
    /// (g0, J0).
    pub total: HermitianTriple,
    pub i0: EndoField,
    /// D+ = span{d_s, d_z}.
    pub splitting: Splitting,
    /// Theta = ds + alpha.
    pub theta_form: FormField,
    /// omega0 = z omega_N + dz ^ Theta.
    pub omega: FormField,
}

pub fn build_calabi(base: &KahlerBase, profile: CalabiProfile, z_range: (f64, f64)) -> Result<CalabiChart> {
    let (zlo, zhi) = z_range;
    if !(zlo < zhi) || zlo <= 0.0 {
        return Err(GeomError::Precondition(format!("z-interval [{zlo}, {zhi}] must be nonempty and positive")));
    }
    if let Some(a) = profile.moment_constant() {
        if a >= 0.0 {
            return Err(GeomError::Precondition(format!("moment map G = A ln r needs A < 0, got {a}")));
        }
    }
    let q = profile.q(base.dim() / 2 + 1);
    for k in 0..=64 {
        let z = zlo + (zhi - zlo) * k as f64 / 64.0;
        let v = q(Jet2::constant(z)).v;
        if !(v > 0.0) {
            return Err(GeomError::Precondition(format!("profile q({z}) = {v} is not positive")));
        }
    }
    let verdict = kahler_verdict(&base.triple, &SamplePlan::new(0xba5e, 6), DEFAULT_KAHLER_TOL)?;
    if !verdict.is_kahler {
        return Err(GeomError::Precondition(format!("base is not Kaehler: {verdict:?}")));
    }

    let nb = base.dim();
    let n = nb + FIBRE;
    let chart = base.triple.chart.prepend(
        format!("calabi over {}", base.label),
        &[-1.0, zlo],
        &[1.0, zhi],
    )?;

    let theta_form: FormField = {
        let alpha = base.alpha.clone();
        Field::new(n, move |p: &[Jet2]| {
            let a = alpha.eval(&p[FIBRE..]);
            let mut c = vec![Jet2::constant(0.0); n];
            c[0] = Jet2::constant(1.0);
            c[FIBRE..].copy_from_slice(&a.c);
            Form::one_form(&c)
        })
    };

    let g: MetricField = {
        let (alpha, gn, q) = (base.alpha.clone(), base.triple.g.clone(), q.clone());
        Field::new(n, move |p: &[Jet2]| {
            let z = p[1];
            let qz = q(z);
            let iq = qz.recip();
            let al = alpha.eval(&p[FIBRE..]).c;
            let gb = gn.eval(&p[FIBRE..]);
            let mut m = Mat::zeros(n);
            m[(0, 0)] = iq;
            m[(1, 1)] = qz;
            for i in 0..nb {
                m[(0, FIBRE + i)] = al[i] * iq;
                m[(FIBRE + i, 0)] = al[i] * iq;
                for j in 0..nb {
                    m[(FIBRE + i, FIBRE + j)] = al[i] * al[j] * iq + z * gb[(i, j)];
                }
            }
            m
        })
    };

    let j0 = fibred_structure(base, q.clone(), n, false);
    let i0 = fibred_structure(base, q, n, true);

    let omega: FormField = {
        let (omega_n, theta) = (base.omega.clone(), theta_form.clone());
        Field::new(n, move |p: &[Jet2]| {
            let wn = omega_n.eval(&p[FIBRE..]).shift(FIBRE, n).scale(p[1]);
            let mut dz = vec![Jet2::constant(0.0); n];
            dz[1] = Jet2::constant(1.0);
            let dzt = Form::one_form(&dz).wedge(&theta.eval(p)).expect("1-forms on the same chart");
            wn.add(&dzt)
        })
    };

    let frame = Field::new(n, move |_: &[Jet2]| vec![basis::<Jet2>(n, 0), basis::<Jet2>(n, 1)]);
    let splitting = Splitting::from_frame(&g, frame, FIBRE);
    let total = HermitianTriple::new(chart, g, j0)?;
    Ok(CalabiChart { base: base.clone(), profile, z_range, total, i0, splitting, theta_form, omega })
}

/// J0 (or I0 when `flip` is set) in the (s, z, base) chart. Columns are the
/// images of the coordinate vectors.
fn fibred_structure(base: &KahlerBase, q: ProfileFn, n: usize, flip: bool) -> EndoField {
    let nb = n - FIBRE;
    let (alpha, jn) = (base.alpha.clone(), base.triple.j.clone());
    let sgn = if flip { -1.0 } else { 1.0 };
    Field::new(n, move |p: &[Jet2]| {
        let qz = q(p[1]);
        let iq = qz.recip();
        let al = alpha.eval(&p[FIBRE..]).c;
        let ib = jn.eval(&p[FIBRE..]);
        let mut m = Mat::zeros(n);
        // J d_s = -(1/q) d_z, J d_z = q d_s
        m[(1, 0)] = -(iq * sgn);
        m[(0, 1)] = qz * sgn;
        for i in 0..nb {
            let mut alpha_i = Jet2::constant(0.0);
            for k in 0..nb {
                m[(FIBRE + k, FIBRE + i)] = ib[(k, i)];
                alpha_i += ib[(k, i)] * al[k];
            }
            // horizontal lift of I d_i, plus alpha_i times J d_s
            m[(0, FIBRE + i)] = -alpha_i;
            m[(1, FIBRE + i)] = -(al[i] * iq * sgn);
        }
        m
    })
}

/// How the primitive of the total Kaehler form is chosen when a Calabi chart
/// becomes the base of the next construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimitiveChoice {
    /// Radial homotopy primitive about the chart centre.
    Homotopy,
    /// z Theta, whose differential is dz ^ Theta + z omega_N.
    ClosedForm,
}

impl CalabiChart {
    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    /// (g0, I0).
    pub fn i_triple(&self) -> HermitianTriple {
        HermitianTriple { chart: self.total.chart.clone(), g: self.total.g.clone(), j: self.i0.clone() }
    }

    /// The Lee form d ln z expected for the foliation.
    pub fn expected_theta(&self, p: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; self.dim()];
        t[1] = 1.0 / p[1];
        t
    }

    /// ln z, a potential for the Lee form.
    pub fn theta_potential(&self) -> ScalarField {
        Field::new(self.dim(), |p: &[Jet2]| p[1].ln())
    }

    /// The Kaehler chart as a base for a further construction, with the
    /// structure (g, J) given (J0 or a twisted pair with the same Kaehler form).
    pub fn as_base(&self, triple: HermitianTriple, choice: PrimitiveChoice) -> Result<KahlerBase> {
        let alpha = match choice {
            PrimitiveChoice::Homotopy => homotopy_primitive(&self.omega, &self.total.chart, DEFAULT_ORDER)?,
            PrimitiveChoice::ClosedForm => {
                let theta = self.theta_form.clone();
                Field::new(self.dim(), move |p: &[Jet2]| theta.eval(p).scale(p[1]))
            }
        };
        Ok(KahlerBase {
            triple,
            omega: self.omega.clone(),
            alpha,
            zeta: self.base.zeta.map(|(a, b)| (a + FIBRE, b + FIBRE)),
            label: format!("calabi({})", self.base.label),
        })
    }

    /// Lee form of (g0, I0) at a point, in coordinates.
    pub fn i0_lee_form_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        hermitian_lee_form_at(&self.i_triple(), p)
    }

    /// (dr-coefficient of theta0, |theta0|^2) computed from the chart at a
    /// point with the given r; s and the base point are taken from `rest`.
    pub fn theta0_from_chart(&self, r: f64, s: f64, base_point: &[f64]) -> Result<(f64, f64)> {
        let a = match self.profile {
            CalabiProfile::MomentMap { a } => a,
            _ => return Err(GeomError::Unsupported("the H-formulas are stated for G = A ln r".into())),
        };
        let mut p = vec![s, z_of_r(a, r)];
        p.extend_from_slice(base_point);
        self.total.chart.check(&p)?;
        let th = self.i0_lee_form_at(&p)?;
        let ginv = self.total.g.at(&p)?.values().inverse().ok_or(GeomError::DegenerateMetric { point: p.clone() })?;
        let norm2 = crate::tensor::linalg::dot(&th, &ginv.apply(&th));
        Ok((th[1] / dr_dz(a, r), norm2))
    }
}

/// Difference between omega0^m and -m G^(m-1) G' omega_N^(m-1) ^ Theta ^ dr
/// (top-degree coefficients) at a point of a moment-map chart.
pub fn volume_residual(c: &CalabiChart, p: &[f64]) -> Result<f64> {
    c.total.chart.check(p)?;
    let n = c.dim();
    let m = n / 2;
    let z = p[1];
    let (_, gp) = c
        .profile
        .r_and_slope(z, m)
        .ok_or_else(|| GeomError::Unsupported("volume identity needs a moment-map profile".into()))?;
    let g = z;
    let lhs = c.total.omega_at(p)?.values().wedge_power(m)?;
    let wn = c.base.omega.at(&p[FIBRE..])?.values().shift(FIBRE, n);
    let theta = c.theta_form.at(p)?.values();
    // dr = dz / G'
    let mut dr = vec![0.0; n];
    dr[1] = 1.0 / gp;
    let rhs = wn
        .wedge_power(m - 1)?
        .wedge(&theta)?
        .wedge(&Form::one_form(&dr))?
        .scale(-(m as f64) * g.powi(m as i32 - 1) * gp);
    Ok(lhs.sub(&rhs).max_abs())
}

/// Tolerance on the bi-axial constraint b' + b = a.
pub const BIAXIAL_TOL: f64 = 1e-9;

/// g^ = a(t) g|D+ + b(t) g|D-, where t is a potential of the Lee form
/// (dt = theta) and a, b are functions of t. The fundamental form stays closed
/// exactly when b' + b = a, which is enforced at the sample points.
pub fn rescale_biaxial(
    t: &HermitianTriple,
    s: &Splitting,
    potential: &ScalarField,
    a: ProfileFn,
    b: ProfileFn,
    plan: &SamplePlan,
) -> Result<HermitianTriple> {
    for p in t.chart.sample(plan)? {
        let tv = potential.at(&p)?.v;
        let av = a(Jet2::constant(tv)).v;
        let bj = b(Jet2::seed(tv, 0, 1));
        if !(av > 0.0 && bj.v > 0.0) {
            return Err(GeomError::Constraint(format!("a = {av}, b = {} must be positive at {p:?}", bj.v)));
        }
        let bp = bj.g[0];
        let scale = av.abs().max(1.0);
        if (bp + bj.v - av).abs() > BIAXIAL_TOL * scale {
            let hint = if (bp + bj.v + av).abs() <= BIAXIAL_TOL * scale {
                "; b' + b = -a does not give a closed fundamental form, b' + b = a does"
            } else {
                ""
            };
            return Err(GeomError::Constraint(format!(
                "b' + b - a = {:e} at {p:?}{hint}",
                bp + bj.v - av
            )));
        }
    }
    let (g, split, pot) = (t.g.clone(), s.clone(), potential.clone());
    let g_hat: MetricField = Field::new(t.dim(), move |p: &[Jet2]| {
        let gm = g.eval(p);
        let tv = pot.eval(p);
        let pp = split.plus(p);
        let pm = split.minus(p);
        let gp = pp.transpose().mul(&gm).mul(&pp).scale(a(tv));
        let gmn = pm.transpose().mul(&gm).mul(&pm).scale(b(tv));
        gp.add(&gmn)
    });
    HermitianTriple::new(t.chart.clone(), g_hat, t.j.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{flat_plane, scaled_disk};
    use crate::foliation::{classify, lee_form_at, FoliationVerdict};
    use crate::hermitian::nijenhuis_max;

    fn flat_chart() -> CalabiChart {
        build_calabi(&flat_plane(1.0).unwrap(), CalabiProfile::MomentMap { a: -1.0 }, (0.5, 2.0)).unwrap()
    }

    #[test]
    fn flat_base_chart_is_kahler_with_holomorphic_foliation() {
        let c = flat_chart();
        let plan = SamplePlan::new(3, 12);
        let v = kahler_verdict(&c.total, &plan, 1e-7).unwrap();
        assert!(v.is_kahler, "{v:?}");
        let (verdict, rep) = classify(&c.total, &c.splitting, &plan, 1e-7).unwrap();
        assert_eq!(verdict, FoliationVerdict::Holomorphic, "{rep:?}");
        assert!(rep.dplus_geodesic_residual < 1e-7);
        for p in c.total.chart.sample(&plan).unwrap() {
            let th = lee_form_at(&c.total, &c.splitting, &p).unwrap();
            let want = c.expected_theta(&p);
            for k in 0..4 {
                assert!((th[k] - want[k]).abs() < 1e-10, "{th:?} vs {want:?}");
            }
            assert!(nijenhuis_max(&c.i0.at(&p).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn closed_form_kahler_form_matches_fundamental_form() {
        let c = build_calabi(&scaled_disk(2, 0.6).unwrap(), CalabiProfile::MomentMap { a: -2.0 }, (0.5, 2.0)).unwrap();
        for p in c.total.chart.sample(&SamplePlan::new(1, 10)).unwrap() {
            let a = c.omega.at(&p).unwrap().values();
            let b = c.total.omega_at(&p).unwrap().values();
            assert!(a.sub(&b).max_abs() < 1e-13);
        }
    }

    #[test]
    fn theta0_formulas_at_half() {
        // dr-coefficient 2 / (r ln r) and norm 4 / ln(r)^2 for A = -1
        assert!((theta0_dr_coefficient(-1.0, 0.5) + 5.770780163555854).abs() < 1e-12);
        assert!((theta0_norm2(-1.0, 0.5) - 8.325475924022431).abs() < 1e-12);
        let c = build_calabi(&flat_plane(1.0).unwrap(), CalabiProfile::MomentMap { a: -1.0 }, (0.1, 1.25)).unwrap();
        let (coef, norm2) = c.theta0_from_chart(0.5, 0.2, &[0.1, -0.3]).unwrap();
        assert!((coef - theta0_dr_coefficient(-1.0, 0.5)).abs() < 1e-9, "{coef} {norm2}");
        assert!((norm2 - theta0_norm2(-1.0, 0.5)).abs() < 1e-9);
    }

    #[test]
    fn volume_identity_in_two_and_three_complex_dimensions() {
        let c = flat_chart();
        let v = volume_residual(&c, &[0.1, z_of_r(-1.0, 0.5), 0.2, -0.4]).unwrap();
        assert!(v < 1e-12, "{v}");
        let b3 = KahlerBase::from_triple(crate::bases::flat(4, 1.0).unwrap(), None, "C^2").unwrap();
        let c3 = build_calabi(&b3, CalabiProfile::MomentMap { a: -1.5 }, (0.5, 2.0)).unwrap();
        assert!(volume_residual(&c3, &[0.1, 1.2, 0.2, -0.4, 0.3, 0.1]).unwrap() < 1e-10);
    }

    #[test]
    fn profile_mode_rejects_volume_check_and_bad_inputs() {
        let base = flat_plane(1.0).unwrap();
        let prof = CalabiProfile::Profile { q: Arc::new(|z: Jet2| z * z + 1.0), label: "1+z^2".into() };
        let c = build_calabi(&base, prof, (0.5, 2.0)).unwrap();
        assert!(kahler_verdict(&c.total, &SamplePlan::new(5, 6), 1e-7).unwrap().is_kahler);
        assert!(matches!(volume_residual(&c, &[0.0, 1.0, 0.0, 0.0]), Err(GeomError::Unsupported(_))));
        assert!(build_calabi(&base, CalabiProfile::MomentMap { a: 1.0 }, (0.5, 2.0)).is_err());
        assert!(build_calabi(&base, CalabiProfile::MomentMap { a: -1.0 }, (-0.5, 2.0)).is_err());
        let neg = CalabiProfile::Profile { q: Arc::new(|z: Jet2| 1.0 - z), label: "1-z".into() };
        assert!(build_calabi(&base, neg, (0.5, 2.0)).is_err());
    }

    #[test]
    fn biaxial_rescale() {
        let c = flat_chart();
        let plan = SamplePlan::new(9, 8);
        let pot = c.theta_potential();
        let one: ProfileFn = Arc::new(|_| Jet2::constant(1.0));
        let same = rescale_biaxial(&c.total, &c.splitting, &pot, one.clone(), one.clone(), &plan).unwrap();
        let p = [0.1, 1.1, 0.2, 0.3];
        assert!(same.g.at(&p).unwrap().values().sub(&c.total.g.at(&p).unwrap().values()).max_abs() < 1e-13);

        let a: ProfileFn = Arc::new(|t: Jet2| t.exp() * 2.0);
        let b: ProfileFn = Arc::new(|t: Jet2| t.exp());
        let r = rescale_biaxial(&c.total, &c.splitting, &pot, a, b, &plan).unwrap();
        assert!(kahler_verdict(&r, &plan, 1e-7).unwrap().is_kahler);
        let split = Splitting::from_frame(
            &r.g,
            Field::new(4, |_: &[Jet2]| vec![basis::<Jet2>(4, 0), basis::<Jet2>(4, 1)]),
            2,
        );
        let th = lee_form_at(&r, &split, &p).unwrap();
        assert!((th[1] - 2.0 / p[1]).abs() < 1e-10);

        // the printed sign b' + b = -a cannot hold with a, b > 0; a pair
        // solving it with negative a is rejected as nonpositive
        let bad_a: ProfileFn = Arc::new(|t: Jet2| t.exp() * 3.0);
        let err = rescale_biaxial(&c.total, &c.splitting, &pot, bad_a, one, &plan).unwrap_err();
        assert!(matches!(err, GeomError::Constraint(_)));
    }
}
