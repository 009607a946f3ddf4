//! Seeded random measures and models.
//!
//! Item `i` of an ensemble is drawn from ChaCha8 stream `i` of the master
//! seed, so items are reproducible individually and independent of the order
//! (or thread) in which they are generated.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::opmeasure::{Atom, SimpleOpMeasure};
use crate::scattering::ScatteringModel;
use crate::schatten::{ComplexMatrix, SchattenIndex};

/// Generator for item `index` under `master`.
pub fn stream(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

pub fn gaussian_complex<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

/// Sample from the Gaussian unitary ensemble scaled so the spectrum lies
/// roughly in `[-2, 2]`.
pub fn gaussian_hermitian<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    gaussian_matrix(rng, n, n).hermitian_part().scale_real(1.0 / (n as f64).sqrt())
}

/// Shape and size limits for random simple measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureSpec {
    pub max_atoms: usize,
    pub max_dim: usize,
    /// Atoms are placed uniformly in `(-support, support)`.
    pub support: f64,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        Self { max_atoms: 200, max_dim: 16, support: 1.0 }
    }
}

/// Random simple measure with `1..=max_atoms` atoms of a random shape up to
/// `max_dim x max_dim`, each weight drawn Gaussian and scaled by a random
/// magnitude spanning two decades.
pub fn random_simple_measure<R: Rng>(rng: &mut R, spec: &MeasureSpec) -> Result<SimpleOpMeasure> {
    let n = rng.random_range(1..=spec.max_atoms.max(1));
    let rows = rng.random_range(1..=spec.max_dim.max(1));
    let cols = rng.random_range(1..=spec.max_dim.max(1));
    let atoms = (0..n)
        .map(|_| {
            let x = rng.random_range(-spec.support..spec.support);
            let mag = 10f64.powf(rng.random_range(-1.0..1.0));
            Atom { x, value: gaussian_matrix(rng, rows, cols).scale_real(mag) }
        })
        .collect();
    SimpleOpMeasure::new(rows, cols, atoms)
}

/// The norm used for ensemble item `index`: cycles through `S₁`, `S₂`, operator.
pub fn norm_for_index(index: usize) -> SchattenIndex {
    match index % 3 {
        0 => SchattenIndex::TRACE,
        1 => SchattenIndex::HILBERT_SCHMIDT,
        _ => SchattenIndex::OPERATOR,
    }
}

/// Gaussian Hermitian `H₀` (n x n), Gaussian `G` (k x n), `J = diag(±1)`.
pub fn random_model<R: Rng>(rng: &mut R, n: usize, k: usize) -> Result<ScatteringModel> {
    let h0 = gaussian_hermitian(rng, n);
    let g = gaussian_matrix(rng, k, n).scale_real(1.0 / (n as f64).sqrt());
    let signs: Vec<f64> = (0..k).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    ScatteringModel::new(h0, g, ComplexMatrix::from_real_diagonal(&signs))
}
