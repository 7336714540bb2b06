//! Charts, jet-valued tensor fields and the differential operators on them.

pub mod curvature;
pub mod fields;
pub mod forms;
pub mod homotopy;
pub mod lie;
pub mod linalg;

pub use curvature::{christoffel_at, curvature, curvature_at, Curvature};
pub use fields::{ChartManifold, ComplexField, EndoField, Field, FormField, MetricField, ScalarField, VectorField};
pub use forms::{exterior_derivative, Form};
pub use linalg::Mat;
