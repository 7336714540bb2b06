//! Coordinate charts and jet-valued tensor fields on them.
//!
//! A field is a closure from a jet-valued point to jet-valued components.
//! Seeding the point with coordinate jets yields exact first and second
//! derivatives; passing an already-composed jet point (as the homotopy
//! operator does) applies the chain rule automatically.

use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::jet::{Jet2, Scalar};
use crate::sampling::{sample_box, SamplePlan};
use crate::tensor::forms::Form;
use crate::tensor::linalg::Mat;

/// An open coordinate box.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartManifold {
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub label: String,
}

impl ChartManifold {
    pub fn new(label: impl Into<String>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > crate::jet::MAX_DIM {
            return Err(GeomError::Invalid(format!("chart box of dimension {} is not supported", lo.len())));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(GeomError::Invalid("chart box has an empty side".into()));
        }
        Ok(ChartManifold { dim: lo.len(), lo, hi, label: label.into() })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| a < x && x < b)
    }

    pub fn check(&self, p: &[f64]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(GeomError::OutOfDomain { point: p.to_vec() })
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn sample(&self, plan: &SamplePlan) -> Result<Vec<Vec<f64>>> {
        sample_box(&self.lo, &self.hi, plan)
    }

    /// Product chart: `first` coordinates come before `self`'s.
    pub fn prepend(&self, label: impl Into<String>, lo: &[f64], hi: &[f64]) -> Result<Self> {
        let mut l = lo.to_vec();
        l.extend_from_slice(&self.lo);
        let mut h = hi.to_vec();
        h.extend_from_slice(&self.hi);
        ChartManifold::new(label, l, h)
    }
}

/// Values that can report whether all their jets are finite.
pub trait Finite {
    fn all_finite(&self) -> bool;
}

impl Finite for Jet2 {
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}
impl Finite for Vec<Jet2> {
    fn all_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}
impl Finite for Mat<Jet2> {
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}
impl Finite for Form<Jet2> {
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}
impl Finite for (Jet2, Jet2) {
    fn all_finite(&self) -> bool {
        self.0.is_finite() && self.1.is_finite()
    }
}

type FieldFn<T> = dyn Fn(&[Jet2]) -> T + Send + Sync;

/// A jet-valued field over an n-dimensional chart.
pub struct Field<T> {
    pub dim: usize,
    f: Arc<FieldFn<T>>,
}

impl<T> Clone for Field<T> {
    fn clone(&self) -> Self {
        Field { dim: self.dim, f: self.f.clone() }
    }
}

impl<T> std::fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Field(dim {})", self.dim)
    }
}

impl<T: Finite + 'static> Field<T> {
    pub fn new(dim: usize, f: impl Fn(&[Jet2]) -> T + Send + Sync + 'static) -> Self {
        Field { dim, f: Arc::new(f) }
    }

    /// Evaluates at a jet point without any checking.
    #[inline]
    pub fn eval(&self, p: &[Jet2]) -> T {
        (self.f)(p)
    }

    /// Evaluates with seeded coordinates, turning non-finite output into a
    /// domain error that carries the point.
    pub fn at(&self, p: &[f64]) -> Result<T> {
        if p.len() != self.dim {
            return Err(GeomError::Invalid(format!("point has {} coordinates, field expects {}", p.len(), self.dim)));
        }
        let v = self.eval(&Jet2::seed_point(p));
        if v.all_finite() {
            Ok(v)
        } else {
            Err(GeomError::Domain { point: p.to_vec(), what: "non-finite field value".into() })
        }
    }

    /// Pulls the field back along the projection that drops the first
    /// `offset` coordinates of a `dim_total`-dimensional chart. The values
    /// are still expressed in the old components; callers embed them.
    pub fn on_tail<U: Finite + 'static>(
        &self,
        offset: usize,
        dim_total: usize,
        embed: impl Fn(T) -> U + Send + Sync + 'static,
    ) -> Field<U>
    where
        T: 'static,
    {
        let inner = self.clone();
        Field::new(dim_total, move |p: &[Jet2]| embed(inner.eval(&p[offset..offset + inner.dim])))
    }
}

pub type ScalarField = Field<Jet2>;
pub type VectorField = Field<Vec<Jet2>>;
pub type MetricField = Field<Mat<Jet2>>;
pub type EndoField = Field<Mat<Jet2>>;
pub type FormField = Field<Form<Jet2>>;
/// A complex-valued function as (real part, imaginary part).
pub type ComplexField = Field<(Jet2, Jet2)>;

/// Embeds an n-by-n block into the trailing corner of a larger matrix;
/// the leading block is filled by `lead`.
pub fn embed_tail_block(block: &Mat<Jet2>, offset: usize, lead: &Mat<Jet2>) -> Mat<Jet2> {
    let n = offset + block.n;
    Mat::from_fn(n, |i, j| {
        if i < offset && j < offset {
            lead[(i, j)]
        } else if i >= offset && j >= offset {
            block[(i - offset, j - offset)]
        } else {
            Jet2::constant(0.0)
        }
    })
}

/// Extends a vector on the trailing coordinates by zeros in front.
pub fn embed_tail_vector(v: &[Jet2], offset: usize) -> Vec<Jet2> {
    let mut out = vec![Jet2::constant(0.0); offset];
    out.extend_from_slice(v);
    out
}

/// Converts a point to constant jets sized for the chart.
pub fn constant_jets(p: &[f64]) -> Vec<Jet2> {
    Jet2::constant_point(p)
}
