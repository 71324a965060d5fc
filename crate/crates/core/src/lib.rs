//! Numerical laboratory for the split-signature X-ray/Penrose correspondence.
//!
//! Homogeneous functions of degree −2 on ℝ⁴∖0 are integrated over the circle
//! of lines inside a real 2-plane. The result is a field on the Grassmannian
//! Gr(2, ℝ⁴) that solves the ultrahyperbolic (John) equation. Around that
//! engine live the twistor incidence geometry, a contour-integral transform
//! for rational twistor functions, finite-basis inversion experiments, and
//! split self-dual Yang–Mills data with the coupled wave operator.

pub mod error;
pub mod fields;
pub mod geometry;
pub mod instanton;
pub mod inversion;
pub mod operators;
pub mod penrose;
pub mod quadrature;
pub mod sampling;
pub mod xray;

pub use error::{Error, Result};
pub use fields::{HarmonicPolynomial, HomogeneousFunction, WeightedField};
pub use geometry::{ComplexProjectivePoint, FlagPoint, Frame, GPoint, PlueckerPoint, RealProjectivePoint};
pub use quadrature::QuadratureSpec;
