//! Primitives of closed forms on star-shaped charts via the radial homotopy
//! operator (H w)(x) = int_0^1 t^(k-1) i_{x-c} w(c + t (x - c)) dt.
//!
//! The integrand is evaluated at jet-valued points, so the primitive comes out
//! with exact first and second derivatives and can feed curvature code.

use crate::error::{GeomError, Result};
use crate::jet::Jet2;
use crate::quadrature::{GaussLegendre, DEFAULT_ORDER};
use crate::sampling::SamplePlan;
use crate::tensor::fields::{ChartManifold, Field, FormField};
use crate::tensor::forms::{exterior_derivative, Form};

/// Closedness residual threshold for accepting a form.
pub const CLOSED_TOL: f64 = 1e-8;

/// Largest |d w| component over the plan's sample points.
pub fn closedness_residual(w: &FormField, chart: &ChartManifold, plan: &SamplePlan) -> Result<f64> {
    let mut m: f64 = 0.0;
    for p in chart.sample(plan)? {
        let form = w.at(&p)?;
        if form.k >= form.n {
            // top-degree forms are closed
            return Ok(0.0);
        }
        let dw = exterior_derivative(&form)?;
        m = m.max(dw.max_abs());
    }
    Ok(m)
}

/// Primitive of a closed k-form (k >= 1), centred at the chart's centre.
/// The form is checked for closedness at a few sample points first.
pub fn homotopy_primitive(w: &FormField, chart: &ChartManifold, order: usize) -> Result<FormField> {
    let residual = closedness_residual(w, chart, &SamplePlan::new(0x5eed, 8))?;
    if residual > CLOSED_TOL {
        return Err(GeomError::NotClosed { residual });
    }
    homotopy_primitive_unchecked(w, chart.center(), order)
}

/// Same as [`homotopy_primitive`] without the closedness check, for callers
/// that already know the form is closed.
pub fn homotopy_primitive_unchecked(w: &FormField, center: Vec<f64>, order: usize) -> Result<FormField> {
    let quad = GaussLegendre::new(order)?;
    let w = w.clone();
    let n = w.dim;
    Ok(Field::new(n, move |x: &[Jet2]| {
        let rel: Vec<Jet2> = x.iter().zip(&center).map(|(xi, ci)| *xi - *ci).collect();
        let mut acc: Option<Form<Jet2>> = None;
        for (&t, &wt) in quad.nodes.iter().zip(&quad.weights) {
            let y: Vec<Jet2> = rel.iter().zip(&center).map(|(r, c)| *r * t + *c).collect();
            let form = w.eval(&y);
            let k = form.k;
            let term = form.interior(&rel).scale(Jet2::constant(t.powi(k as i32 - 1) * wt));
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term),
            });
        }
        acc.expect("quadrature has nodes")
    }))
}

/// Convenience wrapper with the default quadrature order.
pub fn primitive(w: &FormField, chart: &ChartManifold) -> Result<FormField> {
    homotopy_primitive(w, chart, DEFAULT_ORDER)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> ChartManifold {
        ChartManifold::new("square", vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
    }

    fn area(f: impl Fn(Jet2, Jet2) -> Jet2 + Send + Sync + 'static) -> FormField {
        Field::new(2, move |p: &[Jet2]| {
            let mut w = Form::zero(2, 2).unwrap();
            w.c[0] = f(p[0], p[1]);
            w
        })
    }

    #[test]
    fn primitive_of_area_form() {
        let a = primitive(&area(|_, _| Jet2::constant(1.0)), &chart()).unwrap();
        let v = a.at(&[0.4, -0.3]).unwrap();
        // (x dy - y dx) / 2
        assert!((v.c[0].v - 0.15).abs() < 1e-14);
        assert!((v.c[1].v - 0.2).abs() < 1e-14);
    }

    #[test]
    fn d_of_primitive_recovers_form() {
        let w = area(|x, _| x * x + 1.0);
        let a = primitive(&w, &chart()).unwrap();
        for p in [[0.4, -0.3], [-0.7, 0.1], [0.05, 0.9]] {
            let da = exterior_derivative(&a.at(&p).unwrap()).unwrap();
            let target = 1.0 + p[0] * p[0];
            assert!((da.c[0].v - target).abs() < 1e-8);
        }
    }

    #[test]
    fn non_closed_form_is_rejected() {
        let c = ChartManifold::new("cube", vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let w: FormField = Field::new(3, |p: &[Jet2]| {
            let mut w = Form::zero(3, 2).unwrap();
            w.c[0] = p[2]; // z dx^dy
            w
        });
        assert!(matches!(primitive(&w, &c), Err(GeomError::NotClosed { .. })));
    }
}
