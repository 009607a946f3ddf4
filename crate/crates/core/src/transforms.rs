//! Cauchy and Hilbert transforms of operator-valued measures, the associated
//! maximal functions, and the weak-L¹ quasi-norm of sampled functions.
//!
//! Sign conventions differ between the two Hilbert-type transforms and are kept
//! as stated:
//! - [`hilbert`] uses the kernel `1/(y - x)` (principal value),
//! - [`hilbert_truncated`] uses the kernel `1/(x - y)` over `|y - x| >= r`,
//!
//! so `hilbert(μ, x) = -lim_{r→0} hilbert_truncated(μ, x, r)`. Every norm-level
//! quantity is insensitive to the sign.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::Interval;
use crate::error::{Error, Result};
use crate::opmeasure::{DensityOpMeasure, OpMeasure, ScalarMeasure, SimpleOpMeasure};
use crate::schatten::{lp_norm, schatten_norm, singular_values, ComplexMatrix, SchattenIndex};

/// Constants of the weak-type and pointwise estimates being audited.
pub mod bounds {
    use std::f64::consts::PI;

    /// Default UMD constant for Hilbert-space (matrix) values.
    pub const DEFAULT_CX: f64 = PI * PI;

    /// `‖Mν‖_{L^{1,∞}} <= 3 ν(ℝ)`.
    pub const HARDY_LITTLEWOOD: f64 = 3.0;

    /// `‖Hμ‖_{L^{1,∞}} <= (30 + 4 C_X) ‖μ‖(ℝ)`.
    pub fn hilbert(cx: f64) -> f64 {
        30.0 + 4.0 * cx
    }

    /// `‖H♯μ‖_{L^{1,∞}} <= (17592 + 2304 C_X) ‖μ‖(ℝ)`.
    pub fn hilbert_maximal(cx: f64) -> f64 {
        17592.0 + 2304.0 * cx
    }

    /// `‖T^<μ‖_{L^{1,∞}}` for simple measures.
    pub fn nontangential_simple(cx: f64) -> f64 {
        35274.0 + 4608.0 * cx
    }

    /// `‖T^<μ‖_{L^{1,∞}}` for general measures of bounded support.
    pub fn nontangential(cx: f64) -> f64 {
        70548.0 + 9216.0 * cx
    }

    /// `‖M_β g‖_{L^{1,∞}} <= 6^{1/β}/(1-β) ‖g‖_{L^{1,∞}}`.
    pub fn mbeta(beta: f64) -> f64 {
        6f64.powf(1.0 / beta) / (1.0 - beta)
    }

    /// `‖Cμ(λ+x+ir) - H_{2r}μ(λ)‖ <= (2 + 4π) M‖μ‖(λ)` for `|x| < r`.
    pub const CAUCHY_HILBERT_GAP: f64 = 2.0 + 4.0 * PI;

    /// `∫_{(∪2Q_ℓ)^c} ‖Hν‖ <= 4π ‖μ‖(ℝ)`.
    pub const BAD_PART_INTEGRAL: f64 = 4.0 * PI;
}

/// Anything whose Cauchy and Hilbert transforms can be evaluated exactly.
pub trait TransformSource {
    fn shape(&self) -> (usize, usize);

    /// Kernel sources: atoms `1/(x_i - z)` and cells `log(hi - z) - log(lo - z)`.
    fn sources(&self) -> Vec<(Source, &ComplexMatrix)>;

    fn variation(&self, p: SchattenIndex) -> Result<ScalarMeasure>;

    fn hull(&self) -> Option<(f64, f64)>;
}

/// One term of a measure as seen by the Cauchy kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Source {
    Atom(f64),
    Cell(f64, f64),
}

impl Source {
    /// `∫ dμ_s(t)/(t - z)` for a unit source.
    fn cauchy_weight(&self, z: Complex64) -> Complex64 {
        match *self {
            Source::Atom(x) => 1.0 / (Complex64::new(x, 0.0) - z),
            // For Im z > 0 the segment t - z stays in the lower half-plane, so the
            // principal logarithm is continuous along it.
            Source::Cell(lo, hi) => (Complex64::new(hi, 0.0) - z).ln() - (Complex64::new(lo, 0.0) - z).ln(),
        }
    }

    /// Principal value of `∫ dμ_s(y)/(y - x)`; `None` where it diverges.
    fn hilbert_weight(&self, x: f64) -> Option<f64> {
        match *self {
            Source::Atom(a) => (a != x).then(|| 1.0 / (a - x)),
            Source::Cell(lo, hi) => {
                if lo == x || hi == x {
                    None
                } else if x < lo || x > hi {
                    // (hi - x)/(lo - x) = 1 + (hi - lo)/(lo - x), accurate far away.
                    Some(((hi - lo) / (lo - x)).ln_1p())
                } else {
                    Some(((hi - x) / (x - lo)).ln())
                }
            }
        }
    }
}

impl TransformSource for SimpleOpMeasure {
    fn shape(&self) -> (usize, usize) {
        SimpleOpMeasure::shape(self)
    }

    fn sources(&self) -> Vec<(Source, &ComplexMatrix)> {
        self.atoms().iter().map(|a| (Source::Atom(a.x), &a.value)).collect()
    }

    fn variation(&self, p: SchattenIndex) -> Result<ScalarMeasure> {
        self.variation_measure(p)
    }

    fn hull(&self) -> Option<(f64, f64)> {
        self.support_hull()
    }
}

impl TransformSource for DensityOpMeasure {
    fn shape(&self) -> (usize, usize) {
        DensityOpMeasure::shape(self)
    }

    fn sources(&self) -> Vec<(Source, &ComplexMatrix)> {
        self.cells()
            .iter()
            .map(|c| (Source::Cell(c.cell.lo, c.cell.hi), &c.value))
            .collect()
    }

    fn variation(&self, p: SchattenIndex) -> Result<ScalarMeasure> {
        self.variation_measure(p)
    }

    fn hull(&self) -> Option<(f64, f64)> {
        self.support_hull()
    }
}

impl TransformSource for OpMeasure {
    fn shape(&self) -> (usize, usize) {
        OpMeasure::shape(self)
    }

    fn sources(&self) -> Vec<(Source, &ComplexMatrix)> {
        let mut s = self.simple.sources();
        s.extend(self.density.sources());
        s
    }

    fn variation(&self, p: SchattenIndex) -> Result<ScalarMeasure> {
        self.variation_measure(p)
    }

    fn hull(&self) -> Option<(f64, f64)> {
        self.support_hull()
    }
}

fn check_upper(z: Complex64) -> Result<()> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::NotUpperHalfPlane(z));
    }
    Ok(())
}

/// `Cμ(z) = ∫ dμ(t)/(t - z)` for `Im z > 0`.
pub fn cauchy<M: TransformSource + ?Sized>(mu: &M, z: Complex64) -> Result<ComplexMatrix> {
    check_upper(z)?;
    let (r, c) = mu.shape();
    let mut acc = ComplexMatrix::zeros(r, c);
    for (s, m) in mu.sources() {
        acc.add_scaled(s.cauchy_weight(z), m);
    }
    Ok(acc)
}

/// `Hμ(x) = lim_{r→0+} ∫_{|x-y|>r} dμ(y)/(y - x)`.
pub fn hilbert<M: TransformSource + ?Sized>(mu: &M, x: f64) -> Result<ComplexMatrix> {
    let (r, c) = mu.shape();
    let mut acc = ComplexMatrix::zeros(r, c);
    for (s, m) in mu.sources() {
        let w = s.hilbert_weight(x).ok_or_else(|| Error::UndefinedAtAtom(x))?;
        acc.add_scaled(Complex64::new(w, 0.0), m);
    }
    Ok(acc)
}

/// `H_rμ(x) = ∫_{|y-x| >= r} dμ(y)/(x - y)`.
pub fn hilbert_truncated(mu: &SimpleOpMeasure, x: f64, r: f64) -> Result<ComplexMatrix> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation radius must be positive, got {r}")));
    }
    let (rows, cols) = mu.shape();
    let mut acc = ComplexMatrix::zeros(rows, cols);
    for a in mu.atoms().iter().filter(|a| (a.x - x).abs() >= r) {
        acc.add_scaled(Complex64::new(1.0 / (x - a.x), 0.0), &a.value);
    }
    Ok(acc)
}

/// `H♯μ(x) = sup_{r>0} ‖H_rμ(x)‖`, exact.
///
/// `H_r` only changes when `r` crosses an atom distance `d_i = |x_i - x|`, and the
/// cutoff `|y - x| >= r` is inclusive, so the plateaus are "all atoms with
/// `d_i >= D`" for each distinct distance `D > 0`.
pub fn hilbert_maximal(mu: &SimpleOpMeasure, x: f64, p: SchattenIndex) -> Result<f64> {
    let mut by_dist: Vec<(f64, usize)> = mu
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| ((a.x - x).abs(), i))
        .filter(|(d, _)| *d > 0.0)
        .collect();
    by_dist.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (rows, cols) = mu.shape();
    let mut acc = ComplexMatrix::zeros(rows, cols);
    let mut plateaus = Vec::new();
    let mut k = 0;
    while k < by_dist.len() {
        let d = by_dist[k].0;
        while k < by_dist.len() && by_dist[k].0 == d {
            let a = &mu.atoms()[by_dist[k].1];
            acc.add_scaled(Complex64::new(1.0 / (x - a.x), 0.0), &a.value);
            k += 1;
        }
        plateaus.push(acc.clone());
    }
    max_norm(plateaus.iter(), p).map(|(v, _)| v)
}

// ---------------------------------------------------------------------------
// Norm evaluation with cheap Frobenius bounds.

/// Bounds `lo <= ‖A‖_p <= hi` from the Frobenius norm and the rank bound `r`.
fn frobenius_bounds(fro: f64, rank: usize, p: SchattenIndex) -> (f64, f64) {
    let r = rank.max(1) as f64;
    if p.is_operator() {
        (fro / r.sqrt(), fro)
    } else if p.value() >= 2.0 {
        (fro * r.powf(1.0 / p.value() - 0.5), fro)
    } else {
        (fro, fro * r.powf(1.0 / p.value() - 0.5))
    }
}

/// Maximum of `‖A_i‖_p` and its index; exact norms are computed only for
/// candidates whose Frobenius upper bound can beat the current best.
pub fn max_norm<'a>(
    mats: impl Iterator<Item = &'a ComplexMatrix>,
    p: SchattenIndex,
) -> Result<(f64, Option<usize>)> {
    let mats: Vec<&ComplexMatrix> = mats.collect();
    let fro: Vec<f64> = mats.iter().map(|m| m.frobenius_norm()).collect();
    max_norm_with(&fro, p, mats.first().map_or(1, |m| m.rows().min(m.cols())), |i| {
        schatten_norm(mats[i], p)
    })
}

fn max_norm_with(
    fro: &[f64],
    p: SchattenIndex,
    rank: usize,
    mut exact: impl FnMut(usize) -> Result<f64>,
) -> Result<(f64, Option<usize>)> {
    if fro.is_empty() {
        return Ok((0.0, None));
    }
    if rank <= 1 || p.value() == 2.0 {
        let (i, v) = fro
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        return Ok((v, Some(i)));
    }
    let mut order: Vec<usize> = (0..fro.len()).collect();
    order.sort_by(|&a, &b| fro[b].total_cmp(&fro[a]));
    let mut best = f64::NEG_INFINITY;
    let mut arg = None;
    for i in order {
        let (lo, hi) = frobenius_bounds(fro[i], rank, p);
        if hi <= best {
            break;
        }
        if lo > best || arg.is_none() || hi > best {
            let v = exact(i)?;
            if v > best {
                best = v;
                arg = Some(i);
            }
        }
    }
    Ok((best, arg))
}

// ---------------------------------------------------------------------------
// Batched Cauchy evaluation.

/// Precomputed Cauchy transform of a fixed measure, evaluated in batches.
pub struct CauchyEvaluator {
    sources: Vec<Source>,
    shape: (usize, usize),
    /// Scalar weights when the measure is 1x1.
    scalar: Option<Vec<Complex64>>,
    /// Real and imaginary parts, one row per source, entries column-major.
    re: DMatrix<f64>,
    im: DMatrix<f64>,
    singular_points: Vec<f64>,
}

impl CauchyEvaluator {
    pub fn new<M: TransformSource + ?Sized>(mu: &M) -> Self {
        let shape = mu.shape();
        let src = mu.sources();
        let d = shape.0 * shape.1;
        let n = src.len();
        let mut re = DMatrix::zeros(n, d);
        let mut im = DMatrix::zeros(n, d);
        for (i, (_, m)) in src.iter().enumerate() {
            for (k, z) in m.inner().iter().enumerate() {
                re[(i, k)] = z.re;
                im[(i, k)] = z.im;
            }
        }
        let scalar = (d == 1).then(|| src.iter().map(|(_, m)| m[(0, 0)]).collect());
        let mut singular_points = Vec::new();
        for (s, _) in &src {
            match *s {
                Source::Atom(x) => singular_points.push(x),
                Source::Cell(lo, hi) => singular_points.extend([lo, hi]),
            }
        }
        Self {
            sources: src.iter().map(|(s, _)| *s).collect(),
            shape,
            scalar,
            re,
            im,
            singular_points,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Whether the transform blows up as `z → x` non-tangentially.
    pub fn singular_at(&self, x: f64) -> bool {
        self.singular_points.contains(&x)
    }

    pub fn eval(&self, z: Complex64) -> ComplexMatrix {
        let (r, c) = self.shape;
        let n = self.sources.len();
        let mut wr = DVector::zeros(n);
        let mut wi = DVector::zeros(n);
        for (i, s) in self.sources.iter().enumerate() {
            let w = s.cauchy_weight(z);
            wr[i] = w.re;
            wi[i] = w.im;
        }
        // Columns of `re`/`im` are entries, so each entry is one dot product.
        let cr = self.re.tr_mul(&wr) - self.im.tr_mul(&wi);
        let ci = self.im.tr_mul(&wr) + self.re.tr_mul(&wi);
        ComplexMatrix::from_inner(DMatrix::from_fn(r, c, |i, j| {
            let k = i + j * r;
            Complex64::new(cr[k], ci[k])
        }))
    }

    pub fn eval_norm(&self, z: Complex64, p: SchattenIndex) -> Result<f64> {
        if let Some(w) = &self.scalar {
            let v: Complex64 = self.sources.iter().zip(w).map(|(s, e)| s.cauchy_weight(z) * e).sum();
            return Ok(v.norm());
        }
        schatten_norm(&self.eval(z), p)
    }

    /// `max_i ‖Cμ(z_i)‖_p` and its index.
    pub fn max_norm(&self, zs: &[Complex64], p: SchattenIndex) -> Result<(f64, Option<usize>)> {
        if zs.is_empty() {
            return Ok((0.0, None));
        }
        if self.sources.is_empty() {
            return Ok((0.0, Some(0)));
        }
        if let Some(w) = &self.scalar {
            let mut best = (f64::NEG_INFINITY, None);
            for (i, &z) in zs.iter().enumerate() {
                let v: Complex64 = self.sources.iter().zip(w).map(|(s, e)| s.cauchy_weight(z) * e).sum();
                let v = v.norm();
                if v > best.0 {
                    best = (v, Some(i));
                }
            }
            return Ok(best);
        }
        let (r, c) = self.shape;
        let d = r * c;
        let n = self.sources.len();
        let mut out = (f64::NEG_INFINITY, None);
        const CHUNK: usize = 512;
        for (chunk_idx, chunk) in zs.chunks(CHUNK).enumerate() {
            let m = chunk.len();
            let mut wr = DMatrix::zeros(m, n);
            let mut wi = DMatrix::zeros(m, n);
            for (a, &z) in chunk.iter().enumerate() {
                for (b, s) in self.sources.iter().enumerate() {
                    let w = s.cauchy_weight(z);
                    wr[(a, b)] = w.re;
                    wi[(a, b)] = w.im;
                }
            }
            // (Wr + i Wi)(Er + i Ei)
            let cr = &wr * &self.re - &wi * &self.im;
            let ci = &wr * &self.im + &wi * &self.re;
            let fro: Vec<f64> = (0..m)
                .map(|a| (0..d).map(|k| cr[(a, k)].powi(2) + ci[(a, k)].powi(2)).sum::<f64>().sqrt())
                .collect();
            let build = |a: usize| {
                ComplexMatrix::from_inner(DMatrix::from_fn(r, c, |i, j| {
                    let k = i + j * r;
                    Complex64::new(cr[(a, k)], ci[(a, k)])
                }))
            };
            let (v, arg) = max_norm_with(&fro, p, r.min(c), |a| {
                let s = singular_values(&build(a))?;
                Ok(lp_norm(&s, p))
            })?;
            if v > out.0 {
                out = (v, arg.map(|a| a + chunk_idx * CHUNK));
            }
        }
        Ok(out)
    }
}

/// Precomputed principal-value Hilbert transform of a fixed measure.
pub struct HilbertEvaluator {
    sources: Vec<Source>,
    shape: (usize, usize),
    /// One row per source: real parts of the entries, then imaginary parts.
    coef: DMatrix<f64>,
}

impl HilbertEvaluator {
    pub fn new<M: TransformSource + ?Sized>(mu: &M) -> Self {
        let shape = mu.shape();
        let src = mu.sources();
        let d = shape.0 * shape.1;
        let mut coef = DMatrix::zeros(src.len(), 2 * d);
        for (i, (_, m)) in src.iter().enumerate() {
            for (k, z) in m.inner().iter().enumerate() {
                coef[(i, k)] = z.re;
                coef[(i, d + k)] = z.im;
            }
        }
        Self {
            sources: src.iter().map(|(s, _)| *s).collect(),
            shape,
            coef,
        }
    }

    /// `Hμ(x_i)` in row `i`, laid out like `coef`.
    fn values(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.sources.len();
        let mut w = DMatrix::zeros(xs.len(), n);
        for (b, s) in self.sources.iter().enumerate() {
            for (a, &x) in xs.iter().enumerate() {
                w[(a, b)] = s.hilbert_weight(x).ok_or_else(|| Error::UndefinedAtAtom(x))?;
            }
        }
        Ok(&w * &self.coef)
    }

    fn entry_matrix(&self, h: &DMatrix<f64>, a: usize) -> ComplexMatrix {
        let (r, c) = self.shape;
        let d = r * c;
        ComplexMatrix::from_inner(DMatrix::from_fn(r, c, |i, j| {
            let k = i + j * r;
            Complex64::new(h[(a, k)], h[(a, d + k)])
        }))
    }

    fn frobenius(h: &DMatrix<f64>, a: usize) -> f64 {
        h.row(a).norm()
    }

    /// `‖Hμ(x_i)‖_p` for every node; errors at atoms and density edges.
    pub fn norms(&self, xs: &[f64], p: SchattenIndex, out: &mut [f64]) -> Result<()> {
        let (r, c) = self.shape;
        if self.sources.is_empty() {
            out.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let h = self.values(xs)?;
        let fro_only = r.min(c) <= 1 || p.value() == 2.0;
        for (a, v) in out.iter_mut().enumerate() {
            *v = if fro_only {
                Self::frobenius(&h, a)
            } else {
                schatten_norm(&self.entry_matrix(&h, a), p)?
            };
        }
        Ok(())
    }

    /// `max_i scale_i · ‖Hμ(x_i)‖_p`; singular values are computed only where
    /// the Frobenius bounds cannot settle the comparison.
    pub fn max_scaled_norm(&self, xs: &[f64], p: SchattenIndex, scale: &[f64]) -> Result<(f64, Option<usize>)> {
        if xs.len() != scale.len() {
            return Err(Error::InvalidArgument("one scale per node expected".into()));
        }
        if self.sources.is_empty() {
            return Ok((0.0, (!xs.is_empty()).then_some(0)));
        }
        let h = self.values(xs)?;
        let fro: Vec<f64> = (0..xs.len()).map(|a| scale[a] * Self::frobenius(&h, a)).collect();
        let (r, c) = self.shape;
        max_norm_with(&fro, p, r.min(c), |a| Ok(scale[a] * schatten_norm(&self.entry_matrix(&h, a), p)?))
    }
}

// ---------------------------------------------------------------------------
// Non-tangential maximal function.

/// A point `x + iy` of the cone `{y > 0, |x - λ| < y}` with vertex `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub lambda: f64,
    pub x: f64,
    pub y: f64,
}

impl ConePoint {
    pub fn new(lambda: f64, x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !((x - lambda).abs() < y) {
            return Err(Error::InvalidArgument(format!(
                "({x}, {y}) is outside the cone with vertex {lambda}"
            )));
        }
        Ok(Self { lambda, x, y })
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

/// Resolution of the cone supremum estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeSampling {
    /// Ratio of the geometric ladder in `y`.
    pub y_ratio: f64,
    /// Samples of `(x - λ)/y` on the bottom edge of the truncated cone.
    pub x_samples: usize,
    /// Golden-section refinement effort (24 iterations per pass).
    pub refine_passes: usize,
    /// Ladder bottom relative to the measure's span.
    pub y_floor_rel: f64,
    /// Ladder top relative to the measure's span.
    pub y_top_rel: f64,
}

impl Default for ConeSampling {
    fn default() -> Self {
        Self {
            y_ratio: 1.05,
            x_samples: 64,
            refine_passes: 1,
            y_floor_rel: 1e-6,
            y_top_rel: 10.0,
        }
    }
}

impl ConeSampling {
    /// Coarse settings for ensemble audits of large matrix-valued measures.
    pub fn coarse() -> Self {
        Self {
            y_ratio: 1.5,
            x_samples: 9,
            refine_passes: 1,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.y_ratio > 1.0) || self.x_samples < 2 || !(self.y_floor_rel > 0.0) || !(self.y_top_rel > 0.0) {
            return Err(Error::InvalidArgument(format!("bad cone sampling {self:?}")));
        }
        Ok(())
    }
}

/// Estimated cone supremum together with the evidence needed to audit it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeSup {
    pub value: f64,
    pub samples: usize,
    /// Location of the best sample (on the closed cone).
    pub x: f64,
    pub y: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximization of `f` on `[a, b]`; returns the best point seen.
fn golden_max(mut f: impl FnMut(f64) -> Result<f64>, a: f64, b: f64, iters: usize, count: &mut usize) -> Result<(f64, f64)> {
    let (mut a, mut b) = (a, b);
    let mut best = {
        let fa = f(a)?;
        let fb = f(b)?;
        *count += 2;
        if fa >= fb {
            (a, fa)
        } else {
            (b, fb)
        }
    };
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    *count += 2;
    for _ in 0..iters {
        if fc > best.1 {
            best = (c, fc);
        }
        if fd > best.1 {
            best = (d, fd);
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
        *count += 1;
    }
    if fc > best.1 {
        best = (c, fc);
    }
    if fd > best.1 {
        best = (d, fd);
    }
    Ok(best)
}

/// Scale used to bound the `y` ladder: the larger of the support diameter and
/// the distance from `λ` to the far end of the support.
fn cone_span(hull: Option<(f64, f64)>, lambda: f64) -> f64 {
    match hull {
        None => 0.0,
        Some((a, b)) => (b - a).max((lambda - a).abs()).max((lambda - b).abs()),
    }
}

/// `T_r^<μ(λ) = sup{‖Cμ(x+iy)‖ : y > r, |x - λ| < y}`; `r_min = 0` gives `T^<μ(λ)`.
///
/// `z ↦ ‖Cμ(z)‖_p` is subharmonic in the upper half-plane (a norm of a
/// holomorphic function) and decays like `1/y` inside the cone, so by the
/// maximum principle its supremum over the truncated cone `{y >= y₀}` is
/// attained on the boundary: the two edge rays `λ ± y + iy` and the bottom
/// segment at height `y₀`. The estimator samples a geometric ladder on both
/// rays and a uniform grid on the segment, then refines the best sample by
/// golden-section search along its edge. With `r_min = 0` the bottom is the
/// ladder floor `y_floor_rel · span`.
pub fn nontangential_maximal_with(
    eval: &CauchyEvaluator,
    hull: Option<(f64, f64)>,
    lambda: f64,
    r_min: f64,
    p: SchattenIndex,
    sampling: &ConeSampling,
) -> Result<ConeSup> {
    sampling.validate()?;
    if !(r_min >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("bad cone parameters λ={lambda}, r={r_min}")));
    }
    if eval.is_empty() {
        return Ok(ConeSup { value: 0.0, samples: 0, x: lambda, y: r_min.max(1.0) });
    }
    if r_min == 0.0 && eval.singular_at(lambda) {
        return Ok(ConeSup { value: f64::INFINITY, samples: 0, x: lambda, y: 0.0 });
    }
    let span = cone_span(hull, lambda).max(r_min);
    let span = if span > 0.0 { span } else { 1.0 };
    let y_lo = r_min.max(sampling.y_floor_rel * span);
    let y_hi = (sampling.y_top_rel * span).max(y_lo);

    let mut ys = vec![y_lo];
    while let Some(&last) = ys.last() {
        if last >= y_hi {
            break;
        }
        ys.push((last * sampling.y_ratio).min(y_hi));
    }
    // Bottom segment first (its end points are the ray feet), then both rays.
    let nx = sampling.x_samples;
    let mut pts: Vec<(f64, f64)> = (0..nx).map(|i| (-1.0 + 2.0 * i as f64 / (nx - 1) as f64, y_lo)).collect();
    for &y in &ys[1..] {
        pts.push((-1.0, y));
        pts.push((1.0, y));
    }
    let zs: Vec<Complex64> = pts.iter().map(|&(t, y)| Complex64::new(lambda + t * y, y)).collect();
    let (mut best, arg) = eval.max_norm(&zs, p)?;
    let mut samples = zs.len();
    let (mut theta_b, mut y_b) = pts[arg.unwrap_or(0)];

    if sampling.refine_passes > 0 {
        let iters = 24 * sampling.refine_passes;
        if y_b == y_lo && theta_b.abs() < 1.0 {
            let dtheta = 2.0 / (nx - 1) as f64;
            let (t, v) = golden_max(
                |t| eval.eval_norm(Complex64::new(lambda + t * y_lo, y_lo), p),
                (theta_b - dtheta).max(-1.0),
                (theta_b + dtheta).min(1.0),
                iters,
                &mut samples,
            )?;
            if v > best {
                best = v;
                theta_b = t;
            }
        } else {
            let step = sampling.y_ratio.ln();
            let (ly, v) = golden_max(
                |ly| {
                    let y = ly.exp();
                    eval.eval_norm(Complex64::new(lambda + theta_b * y, y), p)
                },
                (y_b.ln() - step).max(y_lo.ln()),
                (y_b.ln() + step).min(y_hi.ln()),
                iters,
                &mut samples,
            )?;
            if v > best {
                best = v;
                y_b = ly.exp();
            }
        }
    }
    Ok(ConeSup {
        value: best,
        samples,
        x: lambda + theta_b * y_b,
        y: y_b,
    })
}

/// Convenience wrapper building the evaluator for a single vertex.
pub fn nontangential_maximal<M: TransformSource + ?Sized>(
    mu: &M,
    lambda: f64,
    r_min: f64,
    p: SchattenIndex,
    sampling: &ConeSampling,
) -> Result<ConeSup> {
    nontangential_maximal_with(&CauchyEvaluator::new(mu), mu.hull(), lambda, r_min, p, sampling)
}

// ---------------------------------------------------------------------------
// Scalar maximal functions.

/// `Mν(x) = sup_{r>0} ν(B(x, r))/(2r)` over open balls, exact.
///
/// Between consecutive critical radii (atom distances and cell-edge distances)
/// the ball mass is affine in `r`, so `ν(B)/(2r)` is monotone there and the
/// supremum is a one-sided limit at a critical radius.
pub fn hl_maximal(nu: &ScalarMeasure, x: f64) -> f64 {
    if nu.has_atom_at(x) {
        return f64::INFINITY;
    }
    let mut radii: Vec<f64> = nu.atoms().iter().map(|&(a, _)| (a - x).abs()).collect();
    for &(c, _) in nu.cells() {
        radii.push((c.lo - x).abs());
        radii.push((c.hi - x).abs());
    }
    radii.retain(|&r| r > 0.0);
    radii.sort_by(|a, b| a.total_cmp(b));
    radii.dedup();
    // Atoms are classified by their distance to x rather than by the float
    // endpoints x ± r, which may round across an atom.
    let cell_mass = |r: f64| -> f64 {
        nu.cells()
            .iter()
            .map(|&(c, d)| d * ((x + r).min(c.hi) - (x - r).max(c.lo)).max(0.0))
            .sum()
    };
    let mut best: f64 = 0.0;
    for &r in &radii {
        let (mut inside, mut sphere) = (0.0, 0.0);
        for &(a, w) in nu.atoms() {
            let d = (a - x).abs();
            if d < r {
                inside += w;
            } else if d == r {
                sphere += w;
            }
        }
        let cells = cell_mass(r);
        // r → r⁻ excludes atoms at distance r; r → r⁺ includes them.
        best = best.max((inside + cells) / (2.0 * r));
        best = best.max((inside + sphere + cells) / (2.0 * r));
    }
    best
}

/// `(1/π) ∫ r/((x-y)² + r²) dν(y)`, exact.
pub fn poisson_average(nu: &ScalarMeasure, x: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("Poisson scale must be positive, got {r}")));
    }
    let atoms: f64 = nu
        .atoms()
        .iter()
        .map(|&(a, w)| w * r / ((x - a).powi(2) + r * r))
        .sum();
    let cells: f64 = nu
        .cells()
        .iter()
        .map(|&(c, d)| d * (((c.hi - x) / r).atan() - ((c.lo - x) / r).atan()))
        .sum();
    Ok((atoms + cells) / PI)
}

/// `M_β g(x) = (M|g|^β(x))^{1/β}` for a step function `g`.
pub fn mbeta_maximal(g: &GridFunction, beta: f64, x: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("β must lie in (0, 1), got {beta}")));
    }
    let nu = g.power_density(beta)?;
    Ok(hl_maximal(&nu, x).powf(1.0 / beta))
}

// ---------------------------------------------------------------------------
// Grid functions and the weak-L¹ quasi-norm.

/// Step function on the uniform cells `(start + k·step, start + (k+1)·step]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !step.is_finite() {
            return Err(Error::InvalidArgument(format!("bad grid start={start}, step={step}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid samples"));
        }
        Ok(Self { start, step, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell(&self, k: usize) -> Interval {
        Interval {
            lo: self.start + k as f64 * self.step,
            hi: self.start + (k + 1) as f64 * self.step,
        }
    }

    /// The scalar measure `|g|^β dx`.
    pub fn power_density(&self, beta: f64) -> Result<ScalarMeasure> {
        let cells = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| (self.cell(k), v.abs().powf(beta)))
            .collect();
        ScalarMeasure::new(Vec::new(), cells)
    }
}

/// `sup_t t·|{|f| > t}|` of the step function, exactly: `max_k v_(k)·k·step`
/// over the samples sorted in decreasing order.
pub fn weak_quasinorm(f: &GridFunction) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut v: Vec<f64> = f.values.iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v
        .iter()
        .enumerate()
        .map(|(k, &x)| x * (k + 1) as f64 * f.step)
        .fold(0.0, f64::max))
}

/// Evaluation grid: the `count + 1` nodes `start + k·step`, `k = 0..=count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl SweepGrid {
    /// `count` cells covering `[center - span/2, center + span/2]`.
    pub fn centered(center: f64, span: f64, count: usize) -> Result<Self> {
        if count == 0 || !(span > 0.0) {
            return Err(Error::EmptyGrid);
        }
        Ok(Self {
            start: center - 0.5 * span,
            step: span / count as f64,
            count,
        })
    }

    pub fn end(&self) -> f64 {
        self.node(self.count)
    }

    pub fn node(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.count).map(|k| self.node(k)).collect()
    }
}

/// Step function on the cells `(edges[i], edges[i+1]]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellFunction {
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl CellFunction {
    pub fn new(edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || edges.len() != values.len() + 1 {
            return Err(Error::ShapeMismatch(format!("{} edges for {} cells", edges.len(), values.len())));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("cell edges must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cell values"));
        }
        Ok(Self { edges, values })
    }

    /// `sup_t t·|{|f| > t}|`, exactly: cells sorted by decreasing `|value|`,
    /// each level weighted by the total width of the cells at or above it.
    pub fn weak_quasinorm(&self) -> f64 {
        let mut v: Vec<(f64, f64)> = self
            .values
            .iter()
            .zip(self.edges.windows(2))
            .map(|(x, w)| (x.abs(), w[1] - w[0]))
            .collect();
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut width = 0.0;
        let mut best = 0.0f64;
        for (x, w) in v {
            width += w;
            best = best.max(x * width);
        }
        best
    }
}

/// The maximal operators audited on grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaximalOperator {
    /// `M‖μ‖`
    #[serde(rename = "M")]
    HardyLittlewood,
    /// `‖Hμ‖`
    #[serde(rename = "H")]
    Hilbert,
    /// `H♯μ`
    #[serde(rename = "Hsharp")]
    HilbertMaximal,
    /// `T^<μ`
    #[serde(rename = "T")]
    Nontangential,
}

impl MaximalOperator {
    pub const ALL: [MaximalOperator; 4] = [
        MaximalOperator::HardyLittlewood,
        MaximalOperator::Hilbert,
        MaximalOperator::HilbertMaximal,
        MaximalOperator::Nontangential,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MaximalOperator::HardyLittlewood => "M",
            MaximalOperator::Hilbert => "H",
            MaximalOperator::HilbertMaximal => "Hsharp",
            MaximalOperator::Nontangential => "T",
        }
    }

    /// Weak-type constant for a measure of total variation one.
    pub fn bound(&self, cx: f64) -> f64 {
        match self {
            MaximalOperator::HardyLittlewood => bounds::HARDY_LITTLEWOOD,
            MaximalOperator::Hilbert => bounds::hilbert(cx),
            MaximalOperator::HilbertMaximal => bounds::hilbert_maximal(cx),
            MaximalOperator::Nontangential => bounds::nontangential(cx),
        }
    }

    /// Smallest `C_X >= 0` for which `ratio <= bound(C_X)`; `None` when the
    /// bound does not depend on `C_X`.
    pub fn minimal_feasible_cx(&self, ratio: f64) -> Option<f64> {
        let (a, b) = match self {
            MaximalOperator::HardyLittlewood => return None,
            MaximalOperator::Hilbert => (30.0, 4.0),
            MaximalOperator::HilbertMaximal => (17592.0, 2304.0),
            MaximalOperator::Nontangential => (70548.0, 9216.0),
        };
        Some(((ratio - a) / b).max(0.0))
    }
}

/// A maximal function sampled on a [`SweepGrid`] refined at the atoms.
///
/// The breakpoints are the grid nodes together with every atom inside the
/// grid. The function is `+∞` (or undefined) at an atom and blows up toward
/// it, so each cell takes the smallest of its endpoint values; when both
/// endpoints lie closer to an atom than half the cell width, the midpoint
/// (which is at least that far from every atom) is evaluated as well.
/// Charging a node that happens to lie very close to an atom for a whole
/// cell would otherwise inflate the quasi-norm by the ratio of the cell
/// width to that distance.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub operator: MaximalOperator,
    /// Sorted breakpoints.
    pub points: Vec<f64>,
    /// Value at each breakpoint; `+∞` at atoms.
    pub samples: Vec<f64>,
    pub cells: CellFunction,
    /// Number of breakpoints that are atoms.
    pub atoms: usize,
}

impl Sweep {
    pub fn quasinorm(&self) -> Result<f64> {
        Ok(self.cells.weak_quasinorm())
    }
}

/// Samples a maximal function of `μ` over `grid` in parallel; point order and
/// all reductions are independent of the thread count.
pub fn sweep(
    op: MaximalOperator,
    mu: &SimpleOpMeasure,
    p: SchattenIndex,
    grid: &SweepGrid,
    sampling: &ConeSampling,
) -> Result<Sweep> {
    let (lo, hi) = (grid.start, grid.end());
    let mut atoms: Vec<f64> = mu.positions().collect();
    atoms.sort_by(|a, b| a.total_cmp(b));
    atoms.dedup();
    let mut points = grid.nodes();
    points.extend(atoms.iter().copied().filter(|&x| x > lo && x < hi));
    points.sort_by(|a, b| a.total_cmp(b));
    points.dedup();
    let is_atom: Vec<bool> = points.iter().map(|&x| mu.has_atom_at(x)).collect();
    let to_atom = |x: f64| {
        let i = atoms.partition_point(|&a| a < x);
        let right = atoms.get(i).map_or(f64::INFINITY, |a| a - x);
        let left = i.checked_sub(1).map_or(f64::INFINITY, |j| x - atoms[j]);
        left.min(right)
    };
    let dist: Vec<f64> = points.iter().map(|&x| to_atom(x)).collect();
    let mids: Vec<usize> = (0..points.len() - 1)
        .filter(|&i| {
            let half = 0.5 * (points[i + 1] - points[i]);
            dist[i] < half && dist[i + 1] < half
        })
        .collect();
    let mut targets: Vec<f64> = points.iter().zip(&is_atom).filter(|(_, a)| !**a).map(|(x, _)| *x).collect();
    targets.extend(mids.iter().map(|&i| 0.5 * (points[i] + points[i + 1])));

    let variation = mu.variation_measure(p)?;
    let evaluator = matches!(op, MaximalOperator::Nontangential).then(|| CauchyEvaluator::new(mu));
    let hull = mu.support_hull();
    let values: Vec<f64> = targets
        .par_iter()
        .map(|&x| -> Result<f64> {
            Ok(match op {
                MaximalOperator::HardyLittlewood => hl_maximal(&variation, x),
                MaximalOperator::Hilbert => schatten_norm(&hilbert(mu, x)?, p)?,
                MaximalOperator::HilbertMaximal => hilbert_maximal(mu, x, p)?,
                MaximalOperator::Nontangential => {
                    nontangential_maximal_with(evaluator.as_ref().unwrap(), hull, x, 0.0, p, sampling)?.value
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut it = values.iter();
    let samples: Vec<f64> = is_atom.iter().map(|&a| if a { f64::INFINITY } else { *it.next().unwrap() }).collect();
    let mut cell_values: Vec<f64> = samples.windows(2).map(|w| w[0].min(w[1])).collect();
    for (&i, &v) in mids.iter().zip(it) {
        cell_values[i] = cell_values[i].min(v);
    }
    let cells = CellFunction::new(points.clone(), cell_values)?;
    Ok(Sweep {
        operator: op,
        atoms: is_atom.iter().filter(|&&a| a).count(),
        points,
        samples,
        cells,
    })
}

/// Both sides of `‖Cμ(λ+x+ir) - H_{2r}μ(λ)‖ <= (2+4π) M‖μ‖(λ)` for `|x| < r`.
///
/// The truncated Hilbert term is taken with the kernel `1/(t - λ)` of the
/// principal-value transform, which is the orientation in which `Cμ(λ+iy)`
/// approaches it as `y → 0`.
pub fn cauchy_hilbert_gap(mu: &SimpleOpMeasure, lambda: f64, r: f64, x: f64, p: SchattenIndex) -> Result<(f64, f64)> {
    if !(x.abs() < r) {
        return Err(Error::InvalidArgument(format!("need |x| < r, got x={x}, r={r}")));
    }
    let c = cauchy(mu, Complex64::new(lambda + x, r))?;
    let h = hilbert_truncated(mu, lambda, 2.0 * r)?;
    // C - (-H_{2r}) with H_{2r} in the 1/(x - y) orientation.
    let lhs = schatten_norm(&(c + h), p)?;
    let rhs = bounds::CAUCHY_HILBERT_GAP * hl_maximal(&mu.variation_measure(p)?, lambda);
    Ok((lhs, rhs))
}
