//! Finite-dimensional scattering models `H₁ = H₀ + G*JG`.
//!
//! Everything is computed from cached eigendecompositions of `H₀` and `H₁`,
//! except [`ScatteringModel::sandwiched_resolvent`], which solves the linear
//! system directly and so serves as an independent check on the spectral path.
//!
//! At finite dimension `GR₀(z)` is always compact, so that hypothesis of the
//! abstract theory holds automatically and is not checked.

mod example;
mod probes;

use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::Interval;
use crate::error::{Error, Result};
use crate::opmeasure::{Atom, SimpleOpMeasure};
use crate::schatten::{schatten_norm, singular_values, ComplexMatrix, SchattenIndex};

pub use example::{build_example_e1, corollary_inequality, remark_model, CorollarySides};
pub use probes::{
    boundary_floor, boundary_ladder, decreasing_window, det_probe, hypothesis_check, kato_smoothness_constant,
    wave_probe, DetProbe, EpsilonLadder, HypothesisReport, IntervalMargin, WaveProbe, HYPOTHESIS_TOL,
};

/// Relative tolerance for the Hermitian checks on `H₀`, `J` and `H₁`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative reconstruction tolerance for eigendecompositions.
pub const SPECTRAL_TOL: f64 = 1e-10;
/// `I + B₀(z)J` is treated as singular below this smallest singular value.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Selects `H₀` or `H₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Which {
    H0,
    H1,
}

/// Eigendecomposition `H = U Λ U*` with eigenvalues ascending, plus the
/// columns `G u_m` that the sandwiched quantities are built from.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
    /// `G U`, one column per eigenvalue.
    pub visible: DMatrix<Complex64>,
    /// `‖H - UΛU*‖_F / ‖H‖_F`.
    pub residual: f64,
}

impl SpectralData {
    pub fn new(h: &ComplexMatrix, g: &ComplexMatrix) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::NotSquare { rows: h.rows(), cols: h.cols() });
        }
        let n = h.rows();
        let (vals, vecs) = if h.inner().iter().all(|z| z.im == 0.0) {
            let re = h.inner().map(|z| z.re);
            let e = re.symmetric_eigen();
            (e.eigenvalues, e.eigenvectors.map(|x| Complex64::new(x, 0.0)))
        } else {
            let e = h.inner().clone().symmetric_eigen();
            (e.eigenvalues, e.eigenvectors)
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);

        let lam = DVector::from_iterator(n, eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)));
        let mut scaled = vectors.clone();
        for (c, mut col) in scaled.column_iter_mut().enumerate() {
            col *= lam[c];
        }
        let recon = &scaled * vectors.adjoint();
        let hn = h.frobenius_norm();
        let residual = if hn == 0.0 { (recon).norm() } else { (h.inner() - recon).norm() / hn };
        if !(residual <= SPECTRAL_TOL) {
            return Err(Error::Decomposition(format!("eigendecomposition residual {residual:e}")));
        }
        let visible = g.inner() * &vectors;
        Ok(Self { eigenvalues, vectors, visible, residual })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Index range of the eigenvalues in `(lo, hi]`.
    pub fn range(&self, delta: &Interval) -> (usize, usize) {
        let a = self.eigenvalues.partition_point(|&l| l <= delta.lo);
        let b = self.eigenvalues.partition_point(|&l| l <= delta.hi);
        (a, b.max(a))
    }

    /// Orthogonal projection onto the eigenvectors with eigenvalue in `δ`.
    pub fn projection(&self, delta: &Interval) -> ComplexMatrix {
        let (a, b) = self.range(delta);
        let u = self.vectors.columns(a, b - a);
        ComplexMatrix::from_inner(&u * u.adjoint())
    }

    /// `G E(δ) G* = Σ_{λ_m ∈ δ} (G u_m)(G u_m)*`.
    pub fn sandwiched(&self, delta: &Interval) -> ComplexMatrix {
        let (a, b) = self.range(delta);
        let v = self.visible.columns(a, b - a);
        ComplexMatrix::from_inner(&v * v.adjoint())
    }

    /// `Σ_m (G u_m)(G u_m)*/(λ_m - z)`.
    pub fn resolvent(&self, z: Complex64) -> ComplexMatrix {
        let k = self.visible.nrows();
        let mut scaled = self.visible.clone();
        for (m, mut col) in scaled.column_iter_mut().enumerate() {
            col *= 1.0 / (Complex64::new(self.eigenvalues[m], 0.0) - z);
        }
        let out = &scaled * self.visible.adjoint();
        assert_eq!(out.nrows(), k);
        ComplexMatrix::from_inner(out)
    }

    /// `f(H) x` for a scalar function of the eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> Complex64, x: &DVector<Complex64>) -> DVector<Complex64> {
        let mut c = self.vectors.adjoint() * x;
        for (m, v) in c.iter_mut().enumerate() {
            *v *= f(self.eigenvalues[m]);
        }
        &self.vectors * c
    }
}

/// `H₁ = H₀ + G*JG` on `ℂⁿ` with `G: ℂⁿ → ℂᵏ`.
#[derive(Debug)]
pub struct ScatteringModel {
    h0: ComplexMatrix,
    g: ComplexMatrix,
    j: ComplexMatrix,
    v: ComplexMatrix,
    h1: ComplexMatrix,
    spectral0: OnceLock<SpectralData>,
    spectral1: OnceLock<SpectralData>,
}

impl Clone for ScatteringModel {
    fn clone(&self) -> Self {
        Self {
            h0: self.h0.clone(),
            g: self.g.clone(),
            j: self.j.clone(),
            v: self.v.clone(),
            h1: self.h1.clone(),
            spectral0: self.spectral0.clone(),
            spectral1: self.spectral1.clone(),
        }
    }
}

impl ScatteringModel {
    pub fn new(h0: ComplexMatrix, g: ComplexMatrix, j: ComplexMatrix) -> Result<Self> {
        if !h0.is_square() {
            return Err(Error::NotSquare { rows: h0.rows(), cols: h0.cols() });
        }
        if !j.is_square() {
            return Err(Error::NotSquare { rows: j.rows(), cols: j.cols() });
        }
        if g.cols() != h0.rows() || g.rows() != j.rows() {
            return Err(Error::ShapeMismatch(format!(
                "H0 is {n}x{n}, G is {}x{}, J is {k}x{k}",
                g.rows(),
                g.cols(),
                n = h0.rows(),
                k = j.rows()
            )));
        }
        if !h0.is_finite() || !g.is_finite() || !j.is_finite() {
            return Err(Error::NonFinite("scattering model"));
        }
        if !h0.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::NotHermitian("H0"));
        }
        if !j.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::NotHermitian("J"));
        }
        let v = (g.adjoint() * &j * &g).hermitian_part();
        let h1 = &h0 + &v;
        if !h1.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::NotHermitian("H1"));
        }
        Ok(Self {
            h0,
            g,
            j,
            v,
            h1,
            spectral0: OnceLock::new(),
            spectral1: OnceLock::new(),
        })
    }

    pub fn h0(&self) -> &ComplexMatrix {
        &self.h0
    }

    pub fn g(&self) -> &ComplexMatrix {
        &self.g
    }

    pub fn j(&self) -> &ComplexMatrix {
        &self.j
    }

    /// `V = G*JG`.
    pub fn v(&self) -> &ComplexMatrix {
        &self.v
    }

    pub fn h1(&self) -> &ComplexMatrix {
        &self.h1
    }

    pub fn h(&self, which: Which) -> &ComplexMatrix {
        match which {
            Which::H0 => &self.h0,
            Which::H1 => &self.h1,
        }
    }

    /// Dimension of the state space.
    pub fn dim(&self) -> usize {
        self.h0.rows()
    }

    /// Dimension of the auxiliary space.
    pub fn channels(&self) -> usize {
        self.g.rows()
    }

    /// Cached eigendecomposition.
    pub fn spectral(&self, which: Which) -> Result<&SpectralData> {
        let cell = match which {
            Which::H0 => &self.spectral0,
            Which::H1 => &self.spectral1,
        };
        if let Some(s) = cell.get() {
            return Ok(s);
        }
        let s = SpectralData::new(self.h(which), &self.g)?;
        Ok(cell.get_or_init(|| s))
    }

    /// `μ_j(δ) = G E_{H_j}(δ) G*`.
    pub fn sandwiched_measure(&self, which: Which, delta: &Interval) -> Result<ComplexMatrix> {
        Ok(self.spectral(which)?.sandwiched(delta))
    }

    /// `μ_j` as a simple measure: one atom per distinct eigenvalue.
    pub fn spectral_measure(&self, which: Which) -> Result<SimpleOpMeasure> {
        let s = self.spectral(which)?;
        let k = self.channels();
        let atoms = (0..s.dim())
            .map(|m| {
                let c = s.visible.column(m);
                Atom {
                    x: s.eigenvalues[m],
                    value: ComplexMatrix::from_inner(&c * c.adjoint()),
                }
            })
            .collect();
        SimpleOpMeasure::new(k, k, atoms)
    }

    /// `B_j(z) = G (H_j - z)⁻¹ G*` by a direct LU solve.
    pub fn sandwiched_resolvent(&self, which: Which, z: Complex64) -> Result<ComplexMatrix> {
        if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::OnRealAxis(z));
        }
        let n = self.dim();
        let mut a = self.h(which).inner().clone();
        for i in 0..n {
            a[(i, i)] -= z;
        }
        let x = a
            .lu()
            .solve(&self.g.inner().adjoint())
            .ok_or_else(|| Error::Decomposition("resolvent solve failed".into()))?;
        Ok(ComplexMatrix::from_inner(self.g.inner() * x))
    }

    /// `B_j(z)` from the cached eigendecomposition.
    pub fn sandwiched_resolvent_spectral(&self, which: Which, z: Complex64) -> Result<ComplexMatrix> {
        if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::OnRealAxis(z));
        }
        Ok(self.spectral(which)?.resolvent(z))
    }

    /// Residuals of `(I - B₁J)(I + B₀J) = (I + B₀J)(I - B₁J) = I` and of
    /// `B₁ = (I + B₀J)⁻¹ B₀`, in operator norm.
    pub fn resolvent_identity_residuals(&self, z: Complex64) -> Result<IdentityResiduals> {
        let b0 = self.sandwiched_resolvent(Which::H0, z)?;
        let b1 = self.sandwiched_resolvent(Which::H1, z)?;
        let k = self.channels();
        let id = ComplexMatrix::identity(k);
        let plus = &id + &(&b0 * &self.j);
        let minus = &id - &(&b1 * &self.j);
        let sigma_min = singular_values(&plus)?.last().copied().unwrap_or(1.0);
        if sigma_min <= SINGULAR_TOL {
            return Err(Error::SingularPerturbation { z, sigma_min });
        }
        let op = SchattenIndex::OPERATOR;
        let left = schatten_norm(&(&(&plus * &minus) - &id), op)?;
        let right = schatten_norm(&(&(&minus * &plus) - &id), op)?;
        let solved = plus
            .inner()
            .clone()
            .lu()
            .solve(b0.inner())
            .ok_or_else(|| Error::Decomposition("I + B0 J solve failed".into()))?;
        let r2 = schatten_norm(&(&b1 - &ComplexMatrix::from_inner(solved)), op)?;
        let scale = (1.0 + schatten_norm(&b0, op)?) * (1.0 + schatten_norm(&b1, op)?);
        Ok(IdentityResiduals { r1: left.max(right), r1_left: left, r1_right: right, r2, scale, sigma_min })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    #[serde(rename = "H0")]
    h0: ComplexMatrix,
    #[serde(rename = "G")]
    g: ComplexMatrix,
    #[serde(rename = "J")]
    j: ComplexMatrix,
}

impl Serialize for ScatteringModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelRepr { h0: self.h0.clone(), g: self.g.clone(), j: self.j.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScatteringModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ModelRepr::deserialize(d)?;
        ScatteringModel::new(r.h0, r.g, r.j).map_err(serde::de::Error::custom)
    }
}

/// Output of [`ScatteringModel::resolvent_identity_residuals`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// Larger of the two orderings of the product identity.
    pub r1: f64,
    /// `‖(I + B₀J)(I - B₁J) - I‖`.
    pub r1_left: f64,
    /// `‖(I - B₁J)(I + B₀J) - I‖`.
    pub r1_right: f64,
    /// `‖B₁ - (I + B₀J)⁻¹B₀‖`.
    pub r2: f64,
    /// `(1 + ‖B₀‖)(1 + ‖B₁‖)`.
    pub scale: f64,
    /// Smallest singular value of `I + B₀J`.
    pub sigma_min: f64,
}

impl IdentityResiduals {
    pub fn within(&self, tol: f64) -> bool {
        self.r1 <= tol * self.scale && self.r2 <= tol * self.scale
    }
}

/// Orthogonal spectral projection of a Hermitian matrix onto `(lo, hi]`.
pub fn spectral_projection(h: &ComplexMatrix, delta: &Interval) -> Result<ComplexMatrix> {
    if !h.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::NotHermitian("H"));
    }
    let empty = ComplexMatrix::zeros(0, h.rows());
    Ok(SpectralData::new(h, &empty)?.projection(delta))
}
