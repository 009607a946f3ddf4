//! Hypothesis checks, the determinant probe, boundary-value ladders and wave
//! probes for a [`ScatteringModel`].

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use super::{ScatteringModel, SpectralData, Which};
use crate::dyadic::Interval;
use crate::error::{Error, Result};
use crate::opmeasure::ScalarMeasure;
use crate::schatten::{det_regularized, schatten_norm, singular_values, ComplexMatrix, RegularizedDet, SchattenIndex};

/// One probed interval with `ν₀(δ) - ‖μ₀(δ)‖_p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalMargin {
    pub lo: f64,
    pub hi: f64,
    pub norm: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub intervals_checked: usize,
    pub worst: Option<IntervalMargin>,
    /// First interval (in probing order) that violates the inequality.
    pub violation: Option<IntervalMargin>,
    pub pass: bool,
}

/// Relative slack allowed in [`hypothesis_check`] for rounding in the norms.
pub const HYPOTHESIS_TOL: f64 = 1e-12;

fn subintervals(delta: &Interval, depth: u32) -> Result<Vec<Interval>> {
    if !delta.is_bounded() || delta.is_empty() {
        return Err(Error::InvalidArgument(format!("probe interval {delta} must be bounded and nonempty")));
    }
    if depth > 24 {
        return Err(Error::InvalidArgument(format!("probe depth {depth} is too large")));
    }
    let mut out = Vec::new();
    for d in 0..=depth {
        let parts = 1usize << d;
        let h = delta.length() / parts as f64;
        for i in 0..parts {
            let lo = delta.lo + i as f64 * h;
            let hi = if i + 1 == parts { delta.hi } else { delta.lo + (i + 1) as f64 * h };
            out.push(Interval { lo, hi });
        }
    }
    Ok(out)
}

/// Distinct eigenvalues in `δ`, each paired with the widest half-open
/// interval inside `δ` that contains it and no other eigenvalue.
fn single_eigenvalue_intervals(s: &SpectralData, delta: &Interval) -> Vec<Interval> {
    let (a, b) = s.range(delta);
    let mut out = Vec::new();
    let mut prev = if a > 0 { s.eigenvalues[a - 1].max(delta.lo) } else { delta.lo };
    for m in a..b {
        let l = s.eigenvalues[m];
        if m + 1 < b && s.eigenvalues[m + 1] == l {
            continue;
        }
        out.push(Interval { lo: prev, hi: l });
        prev = l;
    }
    out
}

/// Checks `‖G E_{H₀}(δ) G*‖_p <= ν₀(δ)` on all dyadic subdivisions of `Δ` down
/// to `depth` and on every single-eigenvalue interval of `H₀` in `Δ`.
pub fn hypothesis_check(
    model: &ScatteringModel,
    p: SchattenIndex,
    delta: &Interval,
    nu0: &ScalarMeasure,
    depth: u32,
) -> Result<HypothesisReport> {
    let s = model.spectral(Which::H0)?;
    let mut intervals = subintervals(delta, depth)?;
    intervals.extend(single_eigenvalue_intervals(s, delta));
    let mut worst: Option<IntervalMargin> = None;
    let mut violation = None;
    for d in &intervals {
        let norm = schatten_norm(&s.sandwiched(d), p)?;
        let bound = nu0.measure(d);
        let margin = bound - norm;
        let entry = IntervalMargin { lo: d.lo, hi: d.hi, norm, bound, margin };
        if violation.is_none() && margin < -HYPOTHESIS_TOL * bound.max(norm).max(1.0) {
            violation = Some(entry.clone());
        }
        if worst.as_ref().is_none_or(|w| margin < w.margin) {
            worst = Some(entry);
        }
    }
    Ok(HypothesisReport {
        intervals_checked: intervals.len(),
        pass: violation.is_none(),
        worst,
        violation,
    })
}

/// Smallest `C` with `‖G E_H(δ) G*‖ <= C|δ|` over the dyadic subdivisions of
/// `Δ` down to `depth`.
///
/// Returns `+∞` when some finest-level probe isolates a single eigenvalue with
/// nonzero weight: a point mass is not smooth at any resolution, and the ratio
/// would only grow under further refinement.
pub fn kato_smoothness_constant(model: &ScatteringModel, which: Which, delta: &Interval, depth: u32) -> Result<f64> {
    let s = model.spectral(which)?;
    let op = SchattenIndex::OPERATOR;
    let mut best = 0.0f64;
    let finest = 1usize << depth;
    let all = subintervals(delta, depth)?;
    let first_finest = all.len() - finest;
    for (idx, d) in all.iter().enumerate() {
        let mu = s.sandwiched(d);
        let norm = schatten_norm(&mu, op)?;
        if idx >= first_finest && norm > 0.0 {
            let (a, b) = s.range(d);
            if b > a && s.eigenvalues[a] == s.eigenvalues[b - 1] {
                return Ok(f64::INFINITY);
            }
        }
        best = best.max(norm / d.length());
    }
    Ok(best)
}

/// `d(λ + iε) = Det_q(I + B₀(λ + iε) J)` together with the smallest singular
/// value of `I + B₀J` as an independent singularity test.
#[derive(Clone, Debug, PartialEq)]
pub struct DetProbe {
    pub det: RegularizedDet,
    pub sigma_min: f64,
}

impl DetProbe {
    pub fn det_zero(&self) -> bool {
        self.det.is_zero()
    }

    pub fn sigma_zero(&self) -> bool {
        self.sigma_min <= super::SINGULAR_TOL
    }
}

pub fn det_probe(model: &ScatteringModel, lambda: f64, eps: f64, q: u32) -> Result<DetProbe> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    let z = Complex64::new(lambda, eps);
    let b0 = model.sandwiched_resolvent_spectral(Which::H0, z)?;
    let a = &b0 * model.j();
    let det = det_regularized(&a, q)?;
    let plus = &ComplexMatrix::identity(model.channels()) + &a;
    let sigma_min = singular_values(&plus)?.last().copied().unwrap_or(1.0);
    Ok(DetProbe { det, sigma_min })
}

/// `B_j(λ + iε_k)` along a decreasing ladder of `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonLadder {
    pub lambda: f64,
    pub epsilons: Vec<f64>,
    pub values: Vec<ComplexMatrix>,
    /// Smallest admissible `ε` at `λ`.
    pub floor: f64,
    /// `‖B(λ+iε_{k+1}) - B(λ+iε_k)‖`.
    pub differences: Vec<f64>,
    /// Least-squares slope of `log‖B‖` against `log(1/ε)`; near 1 at a pole.
    pub growth_exponent: f64,
}

impl EpsilonLadder {
    pub fn max_difference(&self) -> f64 {
        self.differences.iter().copied().fold(0.0, f64::max)
    }

    /// `Im B` along the ladder.
    pub fn imaginary_parts(&self) -> Vec<ComplexMatrix> {
        self.values
            .iter()
            .map(|b| ComplexMatrix::from_fn(b.rows(), b.cols(), |i, j| (b[(i, j)] - b[(j, i)].conj()) / Complex64::new(0.0, 2.0)))
            .collect()
    }
}

/// Four times the mean gap between distinct eigenvalues in a window of four
/// neighbours on either side of `λ`; below it `B(λ+iε)` resolves individual
/// poles of the discretization. Zero when there is only one distinct eigenvalue.
pub fn boundary_floor(s: &SpectralData, lambda: f64) -> f64 {
    let mut distinct = s.eigenvalues.clone();
    distinct.dedup();
    if distinct.len() < 2 {
        return 0.0;
    }
    let pos = distinct.partition_point(|&l| l < lambda);
    let lo = pos.saturating_sub(4);
    let hi = (pos + 4).min(distinct.len() - 1);
    let lo = lo.min(hi.saturating_sub(1));
    4.0 * (distinct[hi] - distinct[lo]) / (hi - lo) as f64
}

pub fn boundary_ladder(model: &ScatteringModel, which: Which, lambda: f64, eps: &[f64], p: SchattenIndex) -> Result<EpsilonLadder> {
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("ε ladder must be positive and strictly decreasing".into()));
    }
    let s = model.spectral(which)?;
    let floor = boundary_floor(s, lambda);
    let min = *eps.last().unwrap();
    if min < floor {
        return Err(Error::BelowFloor { eps: min, floor });
    }
    let values: Vec<ComplexMatrix> = eps.iter().map(|&e| s.resolvent(Complex64::new(lambda, e))).collect();
    let differences = values
        .windows(2)
        .map(|w| schatten_norm(&(&w[1] - &w[0]), p))
        .collect::<Result<Vec<_>>>()?;
    let norms = values.iter().map(|v| schatten_norm(v, p)).collect::<Result<Vec<_>>>()?;
    let growth_exponent = slope(
        &eps.iter().map(|e| -e.ln()).collect::<Vec<_>>(),
        &norms.iter().map(|n| n.max(f64::MIN_POSITIVE).ln()).collect::<Vec<_>>(),
    );
    Ok(EpsilonLadder { lambda, epsilons: eps.to_vec(), values, floor, differences, growth_exponent })
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// `W(t)ψ = e^{itH₁} e^{-itH₀} E_{H₀}(Δ) ψ` along a time ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveProbe {
    pub times: Vec<f64>,
    pub states: Vec<DVector<Complex64>>,
    /// `‖W(t_{m+1})ψ - W(t_m)ψ‖`.
    pub increments: Vec<f64>,
    /// `|‖W(t)ψ‖ - ‖E(Δ)ψ‖|`.
    pub isometry_defects: Vec<f64>,
    /// `‖H₁W(t)ψ - W(t)H₀ψ‖`.
    pub intertwining_residuals: Vec<f64>,
    pub reference_norm: f64,
}

impl WaveProbe {
    pub fn max_isometry_defect(&self) -> f64 {
        self.isometry_defects.iter().copied().fold(0.0, f64::max)
    }

    /// Length of the initial strictly decreasing run of increments.
    pub fn window(&self) -> usize {
        decreasing_window(&self.increments)
    }
}

/// Number of leading entries of `v` that form a strictly decreasing run.
pub fn decreasing_window(v: &[f64]) -> usize {
    if v.is_empty() {
        return 0;
    }
    1 + v.windows(2).take_while(|w| w[1] < w[0]).count()
}

pub fn wave_probe(model: &ScatteringModel, psi: &[Complex64], times: &[f64], delta: Option<&Interval>) -> Result<WaveProbe> {
    let n = model.dim();
    if psi.len() != n {
        return Err(Error::ShapeMismatch(format!("ψ has length {}, model dimension is {n}", psi.len())));
    }
    let psi = DVector::from_column_slice(psi);
    if (psi.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("ψ must be normalized, ‖ψ‖ = {}", psi.norm())));
    }
    if times.iter().any(|&t| !(t > 0.0)) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("times must be positive and increasing".into()));
    }
    let s0 = model.spectral(Which::H0)?;
    let s1 = model.spectral(Which::H1)?;
    let start = match delta {
        Some(d) => s0.apply(|l| if d.contains(l) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }, &psi),
        None => psi,
    };
    let reference_norm = start.norm();
    let h0_start = s0.apply(|l| Complex64::new(l, 0.0), &start);
    let evolve = |t: f64, x: &DVector<Complex64>| {
        let free = s0.apply(|l| Complex64::from_polar(1.0, -t * l), x);
        s1.apply(|l| Complex64::from_polar(1.0, t * l), &free)
    };
    let h1 = model.h1().inner();
    let mut states = Vec::with_capacity(times.len());
    let mut isometry_defects = Vec::with_capacity(times.len());
    let mut intertwining_residuals = Vec::with_capacity(times.len());
    for &t in times {
        let w = evolve(t, &start);
        let wh = evolve(t, &h0_start);
        intertwining_residuals.push((h1 * &w - wh).norm());
        isometry_defects.push((w.norm() - reference_norm).abs());
        states.push(w);
    }
    let increments = states.windows(2).map(|w| (&w[1] - &w[0]).norm()).collect();
    Ok(WaveProbe {
        times: times.to_vec(),
        states,
        increments,
        isometry_defects,
        intertwining_residuals,
        reference_norm,
    })
}
