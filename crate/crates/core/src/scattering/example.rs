//! The discretized multiplication-operator model and the Schatten-norm
//! inequality `‖G‖_{2p}² <= ∫‖G(x)‖_{2p}² dx` that makes it a valid example.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::ScatteringModel;
use crate::error::{Error, Result};
use crate::schatten::{schatten_norm, ComplexMatrix, SchattenIndex};

/// `H₀` = multiplication by `x` on `L²((0,1); ℂᶜ)`, discretized on `grid_n`
/// cells with midpoints `x_m`; `G f = ∫ G(x) f(x) dx` becomes the block row
/// `[G(x_1)√h, …, G(x_n)√h]`, so that `GG* = Σ G(x_m)G(x_m)* h`.
pub fn build_example_e1(grid_n: usize, channels: usize, g_samples: &[ComplexMatrix], j: &ComplexMatrix) -> Result<ScatteringModel> {
    if grid_n == 0 || channels == 0 {
        return Err(Error::InvalidArgument("grid size and channel count must be positive".into()));
    }
    if g_samples.len() != grid_n {
        return Err(Error::ShapeMismatch(format!("{} G samples for {grid_n} cells", g_samples.len())));
    }
    let k = j.rows();
    if let Some(bad) = g_samples.iter().find(|g| g.shape() != (k, channels)) {
        return Err(Error::ShapeMismatch(format!("G sample is {:?}, expected {k}x{channels}", bad.shape())));
    }
    let h = 1.0 / grid_n as f64;
    let n = grid_n * channels;
    let diag: Vec<f64> = (0..n).map(|i| ((i / channels) as f64 + 0.5) * h).collect();
    let w = h.sqrt();
    let g = DMatrix::from_fn(k, n, |r, c| g_samples[c / channels][(r, c % channels)] * w);
    ScatteringModel::new(ComplexMatrix::from_real_diagonal(&diag), ComplexMatrix::from_inner(g), j.clone())
}

/// Both sides of `‖G‖_{2p}² <= Σ_m ‖G(x_m)‖_{2p}² h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorollarySides {
    pub lhs: f64,
    pub rhs: f64,
}

impl CorollarySides {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

/// `lhs = ‖G‖_{2p}² = ‖GG*‖_p` for the discretized operator and
/// `rhs = Σ ‖G(x_m)‖_{2p}² · cell_width`.
pub fn corollary_inequality(g_samples: &[ComplexMatrix], cell_width: f64, p: f64) -> Result<CorollarySides> {
    if !(cell_width > 0.0) {
        return Err(Error::InvalidArgument(format!("cell width must be positive, got {cell_width}")));
    }
    let sp = SchattenIndex::new(p)?;
    let s2p = SchattenIndex::new(2.0 * p)?;
    let Some(first) = g_samples.first() else {
        return Ok(CorollarySides { lhs: 0.0, rhs: 0.0 });
    };
    let k = first.rows();
    let mut gram = ComplexMatrix::zeros(k, k);
    let mut rhs = 0.0;
    for g in g_samples {
        if g.shape() != first.shape() {
            return Err(Error::ShapeMismatch("G samples differ in shape".into()));
        }
        gram += &(g * &g.adjoint());
        rhs += schatten_norm(g, s2p)?.powi(2);
    }
    let gram = gram.scale_real(cell_width).hermitian_part();
    Ok(CorollarySides { lhs: schatten_norm(&gram, sp)?, rhs: rhs * cell_width })
}

/// `H₀ = 0`, `G = |V|^{1/2}`, `J = sign(V)`, so that `G*JG = V` and
/// `μ₀ = |V| δ₀`.
pub fn remark_model(v: &ComplexMatrix) -> Result<ScatteringModel> {
    if !v.is_hermitian(super::HERMITIAN_TOL) {
        return Err(Error::NotHermitian("V"));
    }
    let n = v.rows();
    let e = v.hermitian_part().into_inner().symmetric_eigen();
    let u = &e.eigenvectors;
    let func = |f: &dyn Fn(f64) -> f64| {
        let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| Complex64::new(f(l), 0.0)));
        ComplexMatrix::from_inner(u * d * u.adjoint()).hermitian_part()
    };
    let g = func(&|l: f64| l.abs().sqrt());
    let j = func(&|l: f64| if l > 0.0 { 1.0 } else if l < 0.0 { -1.0 } else { 0.0 });
    ScatteringModel::new(ComplexMatrix::zeros(n, n), g, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Interval;
    use crate::scattering::Which;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn e1_small_grid() {
        let samples = vec![ComplexMatrix::scalar(c(1.0)); 4];
        let m = build_example_e1(4, 1, &samples, &ComplexMatrix::identity(1)).unwrap();
        assert_eq!(m.h0(), &ComplexMatrix::from_real_diagonal(&[0.125, 0.375, 0.625, 0.875]));
        assert_eq!(m.g(), &ComplexMatrix::from_fn(1, 4, |_, _| c(0.5)));
        let zero = vec![ComplexMatrix::zeros(1, 1); 4];
        let m = build_example_e1(4, 1, &zero, &ComplexMatrix::identity(1)).unwrap();
        assert_eq!(m.h1(), m.h0());
        assert!(build_example_e1(4, 1, &samples[..3], &ComplexMatrix::identity(1)).is_err());
    }

    #[test]
    fn e1_refinement() {
        let g = |x: f64| ComplexMatrix::from_fn(2, 2, |i, j| c((1.0 + i as f64) * (x * (1.0 + j as f64)).cos()));
        let delta = Interval::new(0.2, 0.7).unwrap();
        let mut prev: Option<ComplexMatrix> = None;
        for n in [64, 128, 256] {
            let samples: Vec<_> = (0..n).map(|m| g((m as f64 + 0.5) / n as f64)).collect();
            let model = build_example_e1(n, 2, &samples, &ComplexMatrix::identity(2)).unwrap();
            let mu = model.sandwiched_measure(Which::H0, &delta).unwrap();
            if let Some(p) = prev {
                // Each cell carries at most 8h; the two grids can disagree on
                // one cell at each end of δ.
                let diff = (mu.clone() - p).max_abs();
                assert!(diff <= 16.0 / n as f64, "n={n}: {diff}");
            }
            prev = Some(mu);
        }
    }

    #[test]
    fn corollary_examples() {
        let first = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]);
        let second = ComplexMatrix::from_real_diagonal(&[0.0, 1.0]);
        let samples = vec![first.clone(), first, second.clone(), second];
        let s = corollary_inequality(&samples, 0.25, 2.0).unwrap();
        assert!((s.lhs - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((s.rhs - 1.0).abs() < 1e-12);
        let s = corollary_inequality(&samples, 0.25, 1.0).unwrap();
        assert!((s.lhs - 1.0).abs() < 1e-12 && (s.rhs - 1.0).abs() < 1e-12);

        let scalar: Vec<_> = (0..10).map(|m| ComplexMatrix::scalar(Complex64::new(m as f64, 1.0))).collect();
        let s = corollary_inequality(&scalar, 0.1, 4.0).unwrap();
        let direct: f64 = (0..10).map(|m| (m * m + 1) as f64 * 0.1).sum();
        assert!((s.lhs - direct).abs() < 1e-10 && (s.rhs - direct).abs() < 1e-10);
    }

    /// For diagonal samples the left side reduces to `(Σ_n (Σ_m |g_n(x_m)|² h)^p)^{1/p}`.
    #[test]
    fn corollary_diagonal_closed_form() {
        let h = 1.0 / 16.0;
        let samples: Vec<ComplexMatrix> = (0..16)
            .map(|m| ComplexMatrix::from_real_diagonal(&[(m as f64 * 0.3).sin(), 1.0 / (1.0 + m as f64), (m % 3) as f64]))
            .collect();
        for p in [1.0, 1.5, 2.0, 4.0] {
            let cols: Vec<f64> = (0..3).map(|n| samples.iter().map(|g| g[(n, n)].norm_sqr() * h).sum()).collect();
            let e6 = cols.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p);
            let s = corollary_inequality(&samples, h, p).unwrap();
            assert!((s.lhs - e6).abs() < 1e-12, "p={p}");
            assert!(s.holds(1e-10));
        }
    }
}
