//! Model Kaehler manifolds used as bases and as curvature oracles.

use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::quadrature::DEFAULT_ORDER;
use crate::sampling::SamplePlan;
use crate::tensor::forms::exterior_derivative;
use crate::tensor::homotopy::homotopy_primitive;
use crate::hermitian::{fundamental_matrix, standard_j, HermitianTriple};
use crate::jet::{Jet2, Scalar};
use crate::tensor::fields::{ChartManifold, Field, FormField, MetricField};
use crate::tensor::forms::Form;
use crate::tensor::linalg::Mat;

/// A Kaehler chart together with a primitive of its Kaehler form and,
/// optionally, the position of a disk coordinate zeta = x + iy that twist
/// functions are written in.
#[derive(Clone, Debug)]
pub struct KahlerBase {
    pub triple: HermitianTriple,
    /// Kaehler form; kept separately so constructions that preserve it can
    /// reuse a cheap expression.
    pub omega: FormField,
    /// 1-form with d alpha = omega.
    pub alpha: FormField,
    /// Chart indices of (Re zeta, Im zeta).
    pub zeta: Option<(usize, usize)>,
    pub label: String,
}

impl KahlerBase {
    /// Wraps a Kaehler triple. A supplied primitive is checked against the
    /// Kaehler form; without one the radial homotopy primitive is used.
    pub fn from_triple(triple: HermitianTriple, alpha: Option<FormField>, label: impl Into<String>) -> Result<Self> {
        let omega = omega_field(&triple);
        let alpha = match alpha {
            Some(a) => {
                let plan = SamplePlan::new(0xa1fa, 8);
                let mut worst: f64 = 0.0;
                for p in triple.chart.sample(&plan)? {
                    let da = exterior_derivative(&a.at(&p)?)?;
                    worst = worst.max(da.values().sub(&omega.at(&p)?.values()).max_abs());
                }
                if worst > PRIMITIVE_TOL {
                    return Err(GeomError::Precondition(format!("d alpha differs from omega by {worst:e}")));
                }
                a
            }
            None => homotopy_primitive(&omega, &triple.chart, DEFAULT_ORDER)?,
        };
        Ok(KahlerBase { triple, omega, alpha, zeta: None, label: label.into() })
    }

    pub fn dim(&self) -> usize {
        self.triple.dim()
    }
}

/// Accepted mismatch between d alpha and omega for a supplied primitive.
pub const PRIMITIVE_TOL: f64 = 1e-7;

/// Flat metric on a box in R^n (n even), standard complex structure.
pub fn flat(n: usize, half_width: f64) -> Result<HermitianTriple> {
    let chart = ChartManifold::new(format!("flat R^{n}"), vec![-half_width; n], vec![half_width; n])?;
    let g: MetricField = Field::new(n, move |_: &[Jet2]| Mat::identity(n));
    let j = Field::new(n, move |_: &[Jet2]| standard_j(n));
    HermitianTriple::new(chart, g, j)
}

/// Flat metric on R^n in any dimension (odd allowed), metric only.
pub fn flat_metric(n: usize) -> MetricField {
    Field::new(n, move |_: &[Jet2]| Mat::identity(n))
}

/// Conformally flat surface (1 - |zeta|^2)^p |dzeta|^2 on a square inside
/// the unit disk, with the radial primitive of its area form.
pub fn scaled_disk(power: u32, half_width: f64) -> Result<KahlerBase> {
    assert!(half_width < std::f64::consts::FRAC_1_SQRT_2, "square must sit inside the unit disk");
    let chart = ChartManifold::new(format!("disk (1-|z|^2)^{power}"), vec![-half_width; 2], vec![half_width; 2])?;
    let p = power as i32;
    let conf = move |x: Jet2, y: Jet2| (1.0 - (x * x + y * y)).powi(p);
    let g: MetricField = Field::new(2, move |q: &[Jet2]| {
        let c = conf(q[0], q[1]);
        Mat::diag(&[c, c])
    });
    let j = Field::new(2, |_: &[Jet2]| standard_j(2));
    let omega: FormField = Field::new(2, move |q: &[Jet2]| {
        let mut w = Form::zero(2, 2).expect("2-form on a surface");
        w.c[0] = conf(q[0], q[1]);
        w
    });
    // alpha = phi(u) (x dy - y dx), u = |zeta|^2, with
    // 2 phi + 2 u phi' = (1 - u)^p, i.e. phi(u) = (1 - (1 - u)^(p+1)) / (2 (p+1) u)
    // written as a polynomial to stay regular at the origin.
    let coeffs: Vec<f64> = {
        let m = power as usize + 1;
        let mut c = Vec::with_capacity(m);
        let mut binom = 1.0;
        for k in 1..=m {
            binom = binom * (m - k + 1) as f64 / k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            c.push(sign * binom / (2.0 * m as f64));
        }
        c
    };
    let alpha: FormField = Field::new(2, move |q: &[Jet2]| {
        let (x, y) = (q[0], q[1]);
        let u = x * x + y * y;
        let mut phi = Jet2::constant(0.0);
        for c in coeffs.iter().rev() {
            phi = phi * u + *c;
        }
        Form::one_form(&[-(phi * y), phi * x])
    });
    let triple = HermitianTriple::new(chart, g, j)?;
    Ok(KahlerBase { triple, omega, alpha, zeta: Some((0, 1)), label: format!("disk{power}") })
}

/// Flat complex plane on a square, alpha = (x dy - y dx) / 2.
pub fn flat_plane(half_width: f64) -> Result<KahlerBase> {
    let triple = flat(2, half_width)?;
    let omega: FormField = Field::new(2, |_: &[Jet2]| {
        let mut w = Form::zero(2, 2).expect("2-form on a surface");
        w.c[0] = Jet2::constant(1.0);
        w
    });
    let alpha: FormField = Field::new(2, |q: &[Jet2]| Form::one_form(&[-(q[1] * 0.5), q[0] * 0.5]));
    Ok(KahlerBase { triple, omega, alpha, zeta: Some((0, 1)), label: "flat C".into() })
}

/// Unit round sphere in (polar angle, azimuth), J d_theta = d_phi / sin(theta).
pub fn round_sphere() -> Result<HermitianTriple> {
    let chart = ChartManifold::new("round S^2", vec![0.2, -3.0], vec![std::f64::consts::PI - 0.2, 3.0])?;
    let g: MetricField = Field::new(2, |p: &[Jet2]| {
        let s = p[0].sin();
        Mat::diag(&[Jet2::constant(1.0), s * s])
    });
    let j = Field::new(2, |p: &[Jet2]| {
        let s = p[0].sin();
        let mut m = Mat::zeros(2);
        m[(1, 0)] = s.recip();
        m[(0, 1)] = -s;
        m
    });
    HermitianTriple::new(chart, g, j)
}

/// Upper half plane with |dz|^2 / y^2.
pub fn hyperbolic_plane() -> Result<HermitianTriple> {
    let chart = ChartManifold::new("hyperbolic H^2", vec![-2.0, 0.2], vec![2.0, 3.0])?;
    let g: MetricField = Field::new(2, |p: &[Jet2]| {
        let w = p[1].powi(2).recip();
        Mat::diag(&[w, w])
    });
    let j = Field::new(2, |_: &[Jet2]| standard_j(2));
    HermitianTriple::new(chart, g, j)
}

/// Flat plane in polar coordinates (r, phi).
pub fn polar_plane() -> Result<HermitianTriple> {
    let chart = ChartManifold::new("polar R^2", vec![0.2, -3.0], vec![3.0, 3.0])?;
    let g: MetricField = Field::new(2, |p: &[Jet2]| Mat::diag(&[Jet2::constant(1.0), p[0] * p[0]]));
    let j = Field::new(2, |p: &[Jet2]| {
        let mut m = Mat::zeros(2);
        m[(1, 0)] = p[0].recip();
        m[(0, 1)] = -p[0];
        m
    });
    HermitianTriple::new(chart, g, j)
}

/// Kaehler form of a triple as a field (generic, for bases without a
/// cheaper expression).
pub fn omega_field(t: &HermitianTriple) -> FormField {
    let (g, j) = (t.g.clone(), t.j.clone());
    Field::new(t.dim(), move |p: &[Jet2]| Form::two_form(&fundamental_matrix(&g.eval(p), &j.eval(p))))
}

/// Shared closure type for complex-valued functions of a jet point.
pub type ComplexFn = Arc<dyn Fn(&[Jet2]) -> (Jet2, Jet2) + Send + Sync>;
