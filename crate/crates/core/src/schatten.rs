//! Dense complex matrices as finite-dimensional stand-ins for `S_p` and
//! `B(N, K)`: singular values, Schatten norms and regularized determinants.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which `|Det_q(I + A)|` is read as zero.
pub const DET_ZERO_TOL: f64 = 1e-10;

/// Dense `rows x cols` complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ComplexMatrix(DMatrix<Complex64>);

/// JSON form: real and imaginary parts as nested row-major arrays.
#[derive(Serialize, Deserialize)]
pub(crate) struct MatrixRepr {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub im: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for ComplexMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        ComplexMatrix::from_parts(&r.re, &r.im)
    }
}

impl From<ComplexMatrix> for MatrixRepr {
    fn from(m: ComplexMatrix) -> Self {
        let re = (0..m.rows())
            .map(|i| (0..m.cols()).map(|j| m[(i, j)].re).collect())
            .collect();
        let all_real = m.0.iter().all(|z| z.im == 0.0);
        let im = if all_real {
            Vec::new()
        } else {
            (0..m.rows())
                .map(|i| (0..m.cols()).map(|j| m[(i, j)].im).collect())
                .collect()
        };
        MatrixRepr { re, im }
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn scalar(c: Complex64) -> Self {
        Self(DMatrix::from_element(1, 1, c))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_diagonal(d: &[Complex64]) -> Self {
        let n = d.len();
        Self::from_fn(n, n, |i, j| if i == j { d[i] } else { Complex64::new(0.0, 0.0) })
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_fn(n, n, |i, j| if i == j { Complex64::new(d[i], 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    /// Real rows; `im` may be empty (all zero) or match `re` in shape.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let rows = re.len();
        let cols = re.first().map_or(0, |r| r.len());
        if rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch("matrix must be non-empty".into()));
        }
        if re.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged real part".into()));
        }
        if !im.is_empty() && (im.len() != rows || im.iter().any(|r| r.len() != cols)) {
            return Err(Error::ShapeMismatch("imaginary part does not match real part".into()));
        }
        let m = Self::from_fn(rows, cols, |i, j| {
            Complex64::new(re[i][j], if im.is_empty() { 0.0 } else { im[i][j] })
        });
        if !m.is_finite() {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(m)
    }

    pub fn from_inner(m: DMatrix<Complex64>) -> Self {
        Self(m)
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn inner_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self(&self.0 * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self(self.0.map(|z| z * c))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &ComplexMatrix) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += c * b;
        }
    }

    pub fn set_zero(&mut self) {
        self.0.fill(Complex64::new(0.0, 0.0));
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Hermitian up to `tol` relative to the largest entry.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let n = self.rows();
        for i in 0..n {
            for j in i..n {
                if (self.0[(i, j)] - self.0[(j, i)].conj()).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// `(A + A*)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// Inverse via LU; `None` when numerically singular.
    pub fn try_inverse(&self) -> Option<Self> {
        self.0.clone().try_inverse().map(Self)
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        self.0.column(j).iter().copied().collect()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, ij: (usize, usize)) -> &Complex64 {
        &self.0[ij]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, ij: (usize, usize)) -> &mut Complex64 {
        &mut self.0[ij]
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(&self.0 $op &rhs.0)
            }
        }
        impl $tr<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(self.0 $op rhs.0)
            }
        }
        impl $tr<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(self.0 $op &rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 -= &rhs.0;
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-self.0)
    }
}

impl Mul<Complex64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, c: Complex64) -> ComplexMatrix {
        self.scale(c)
    }
}

impl fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Schatten index `p ∈ [1, ∞]`; `p = ∞` is the operator norm.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct SchattenIndex(f64);

impl SchattenIndex {
    pub const TRACE: SchattenIndex = SchattenIndex(1.0);
    pub const HILBERT_SCHMIDT: SchattenIndex = SchattenIndex(2.0);
    pub const OPERATOR: SchattenIndex = SchattenIndex(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidSchattenIndex(p));
        }
        Ok(Self(p))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_operator(&self) -> bool {
        self.0.is_infinite()
    }

    /// Default determinant order `q = ceil(p)` for finite `p`.
    pub fn default_det_order(&self) -> Option<u32> {
        if self.is_operator() {
            None
        } else {
            Some(self.0.ceil() as u32)
        }
    }
}

impl fmt::Display for SchattenIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_operator() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

// JSON: a number >= 1, or the string "inf" / "operator".
impl Serialize for SchattenIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_operator() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for SchattenIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(p) => p,
            Raw::Str(s) => match s.as_str() {
                "inf" | "infinity" | "operator" | "op" => f64::INFINITY,
                other => other
                    .parse::<f64>()
                    .map_err(|_| serde::de::Error::custom(format!("bad Schatten index {other:?}")))?,
            },
        };
        SchattenIndex::new(p).map_err(serde::de::Error::custom)
    }
}

/// Singular values in nonincreasing order; length `min(rows, cols)`.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    if !a.is_finite() {
        return Err(Error::NonFinite("singular_values"));
    }
    let mut s: Vec<f64> = a
        .0
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Decomposition("SVD did not converge".into()))?
        .singular_values
        .iter()
        .map(|v| v.max(0.0))
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// `(Σ σ_k^p)^{1/p}`, or `σ_1` for `p = ∞`.
pub fn schatten_norm(a: &ComplexMatrix, p: SchattenIndex) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("schatten_norm"));
    }
    // Vectors have a single singular value; p = 2 is the Frobenius norm.
    if a.rows() == 1 || a.cols() == 1 || p.0 == 2.0 {
        return Ok(a.frobenius_norm());
    }
    let s = singular_values(a)?;
    Ok(lp_norm(&s, p))
}

/// `ℓ^p` norm of nonnegative values; `p = ∞` is the maximum.
pub(crate) fn lp_norm(s: &[f64], p: SchattenIndex) -> f64 {
    if p.is_operator() {
        return s.iter().copied().fold(0.0, f64::max);
    }
    if p.0 == 1.0 {
        return s.iter().sum();
    }
    let top = s.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    // Scale by the largest value to avoid overflow in σ^p.
    top * s.iter().map(|v| (v / top).powf(p.0)).sum::<f64>().powf(1.0 / p.0)
}

/// Eigenvalues of a square matrix, read off the diagonal of its complex Schur form.
pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("eigenvalues"));
    }
    if a.rows() == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let schur = a
        .0
        .clone()
        .try_schur(f64::EPSILON, 0)
        .ok_or_else(|| Error::Decomposition("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Regularized determinant `Det_q(I + A)` together with the data needed to
/// decide whether it vanishes.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedDet {
    pub value: Complex64,
    pub q: u32,
    /// `|Π (1 + λ_k)|`, the modulus without the exponential regularizer.
    pub raw_modulus: f64,
    /// `Π (1 + |λ_k|)`, the reference scale for zero detection.
    pub reference: f64,
}

impl RegularizedDet {
    /// `|Π(1 + λ_k)| <= DET_ZERO_TOL · Π(1 + |λ_k|)`.
    pub fn is_zero(&self) -> bool {
        self.raw_modulus <= DET_ZERO_TOL * self.reference
    }

    pub fn relative_modulus(&self) -> f64 {
        self.raw_modulus / self.reference
    }
}

/// `Det_q(I + A) = Π_k (1 + λ_k) exp(Σ_{j=1}^{q-1} (-1)^j λ_k^j / j)`.
pub fn det_regularized(a: &ComplexMatrix, q: u32) -> Result<RegularizedDet> {
    if q == 0 {
        return Err(Error::InvalidArgument("determinant order q must be >= 1".into()));
    }
    let lambdas = eigenvalues(a)?;
    let one = Complex64::new(1.0, 0.0);
    let mut prod = one;
    let mut exponent = Complex64::new(0.0, 0.0);
    let mut raw = 1.0;
    let mut reference = 1.0;
    for &l in &lambdas {
        prod *= one + l;
        raw *= (one + l).norm();
        reference *= 1.0 + l.norm();
        let mut pow = one;
        for j in 1..q {
            pow *= l;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            exponent += pow * (sign / j as f64);
        }
    }
    Ok(RegularizedDet {
        value: prod * exponent.exp(),
        q,
        raw_modulus: raw,
        reference,
    })
}

/// Smallest singular value of a square matrix.
pub fn smallest_singular_value(a: &ComplexMatrix) -> Result<f64> {
    Ok(singular_values(a)?.last().copied().unwrap_or(0.0))
}
