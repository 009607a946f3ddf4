//! Numerical toolkit for operator-valued measures on the real line and
//! finite-dimensional scattering models `H1 = H0 + G* J G`.
//!
//! Modules, bottom-up:
//! - [`dyadic`]: exact dyadic intervals and half-open intervals.
//! - [`schatten`]: complex matrices, singular values, Schatten norms, `Det_q`.
//! - [`opmeasure`]: simple, density and scalar measures; variation; discretization.
//! - [`transforms`]: Cauchy and Hilbert transforms, maximal functions, weak-L¹ quasi-norms.
//! - [`czd`]: dyadic Calderón–Zygmund decomposition and its verifier.
//! - [`scattering`]: models, spectral data, sandwiched resolvents and probes.
//! - [`ensemble`]: seeded random measures and models.

pub mod czd;
pub mod dyadic;
pub mod ensemble;
pub mod error;
pub mod opmeasure;
pub mod quadrature;
pub mod scattering;
pub mod schatten;
pub mod transforms;

pub use dyadic::{DyadicInterval, Interval};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use opmeasure::{Atom, DensityCell, DensityOpMeasure, OpMeasure, ScalarMeasure, SimpleOpMeasure};
pub use scattering::{ScatteringModel, Which};
pub use schatten::{ComplexMatrix, SchattenIndex};
