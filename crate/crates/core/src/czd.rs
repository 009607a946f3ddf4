//! Level-`s` dyadic Calderón–Zygmund decomposition of a simple measure.
//!
//! The stopping rule is strict: a dyadic `Q` is selected when
//! `‖μ‖(Q)/|Q| > s`; a density exactly equal to `s` does not stop.

use num_complex::Complex64;
use serde::Serialize;

use crate::dyadic::{DyadicInterval, Interval, MAX_SCALE};
use crate::error::{Error, Result};
use crate::opmeasure::{DensityCell, DensityOpMeasure, OpMeasure, SimpleOpMeasure};
use crate::quadrature::{integrate_complement, Hole, Tolerance};
use crate::schatten::{schatten_norm, ComplexMatrix, SchattenIndex};
use crate::transforms::{bounds, HilbertEvaluator};

/// `μ = f·dx + Σ ν_ℓ`, with `ν_ℓ` supported on `Q_ℓ` and of zero mass there.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CZDecomposition {
    pub s: f64,
    pub p: SchattenIndex,
    pub intervals: Vec<DyadicInterval>,
    #[serde(skip)]
    pub good: DensityOpMeasure,
    #[serde(skip)]
    pub bad_parts: Vec<OpMeasure>,
}

/// Atom positions with their norms, sorted by position.
struct Weights {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Weights {
    fn new(mu: &SimpleOpMeasure, p: SchattenIndex) -> Result<Self> {
        let mut x = Vec::with_capacity(mu.len());
        let mut w = Vec::with_capacity(mu.len());
        for a in mu.atoms() {
            x.push(a.x);
            w.push(schatten_norm(&a.value, p)?);
        }
        Ok(Self { x, w })
    }

    /// Index range of the atoms in `q`.
    fn range(&self, q: &DyadicInterval) -> (usize, usize) {
        let (lo, hi) = (q.left(), q.right());
        (self.x.partition_point(|&x| x <= lo), self.x.partition_point(|&x| x <= hi))
    }

    fn mass(&self, q: &DyadicInterval) -> f64 {
        let (a, b) = self.range(q);
        self.w[a..b].iter().sum()
    }

    fn density(&self, q: &DyadicInterval) -> f64 {
        self.mass(q) / q.length()
    }
}

/// Maximal dyadic intervals with `‖μ‖(Q)/|Q| > s`, sorted and pairwise disjoint.
///
/// The search starts from the nonempty cells of the finest scale `n <= 0` at
/// which no cell stops; every ancestor of such a cell is then an average of
/// non-stopping cells and fails the test too, so stopping children found on
/// the way down are maximal.
pub fn maximal_intervals(mu: &SimpleOpMeasure, s: f64, p: SchattenIndex) -> Result<Vec<DyadicInterval>> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("level s must be positive, got {s}")));
    }
    let wts = Weights::new(mu, p)?;
    if wts.w.iter().all(|&w| w == 0.0) {
        return Err(Error::EmptyMeasure);
    }
    let mut n = 0;
    let roots = loop {
        let mut roots: Vec<DyadicInterval> = Vec::new();
        for &x in &wts.x {
            let q = DyadicInterval::containing(x, n)?;
            if roots.last() != Some(&q) {
                roots.push(q);
            }
        }
        if roots.iter().all(|q| wts.density(q) <= s) {
            break roots;
        }
        n -= 1;
        if n < -MAX_SCALE {
            return Err(Error::ScaleOutOfRange(n as i64));
        }
    };
    let mut out = Vec::new();
    let mut stack: Vec<DyadicInterval> = roots.into_iter().rev().collect();
    while let Some(q) = stack.pop() {
        for c in q.children()? {
            let m = wts.mass(&c);
            if m == 0.0 {
                continue;
            }
            if m / c.length() > s {
                out.push(c);
            } else {
                stack.push(c);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn check_disjoint(intervals: &[DyadicInterval]) -> Result<()> {
    let mut sorted = intervals.to_vec();
    sorted.sort();
    for w in sorted.windows(2) {
        if !w[0].is_disjoint(&w[1]) {
            return Err(Error::OverlappingIntervals(w[0].to_string(), w[1].to_string()));
        }
    }
    Ok(())
}

/// `f = Σ_ℓ μ(Q_ℓ)/|Q_ℓ| · 1_{Q_ℓ}`.
pub fn good_part(mu: &SimpleOpMeasure, intervals: &[DyadicInterval]) -> Result<DensityOpMeasure> {
    check_disjoint(intervals)?;
    let (r, c) = mu.shape();
    let cells = intervals
        .iter()
        .map(|q| DensityCell {
            cell: q.as_interval(),
            value: mu.mass(&q.as_interval()).scale_real(1.0 / q.length()),
        })
        .collect();
    DensityOpMeasure::new(r, c, cells)
}

/// `ν_ℓ = (μ - f·dx)|_{Q_ℓ}` for each stopping interval.
pub fn bad_part(mu: &SimpleOpMeasure, f: &DensityOpMeasure, intervals: &[DyadicInterval]) -> Result<Vec<OpMeasure>> {
    let (r, c) = mu.shape();
    if f.shape() != (r, c) || f.cells().len() != intervals.len() {
        return Err(Error::MismatchedGoodPart);
    }
    intervals
        .iter()
        .map(|q| {
            let cell = q.as_interval();
            let fq = f
                .cells()
                .iter()
                .find(|d| d.cell == cell)
                .ok_or(Error::MismatchedGoodPart)?;
            OpMeasure::new(
                mu.restrict(&cell),
                DensityOpMeasure::new(r, c, vec![DensityCell { cell, value: -fq.value.clone() }])?,
            )
        })
        .collect()
}

pub fn decompose(mu: &SimpleOpMeasure, s: f64, p: SchattenIndex) -> Result<CZDecomposition> {
    let intervals = maximal_intervals(mu, s, p)?;
    let good = good_part(mu, &intervals)?;
    let bad_parts = bad_part(mu, &good, &intervals)?;
    Ok(CZDecomposition { s, p, intervals, good, bad_parts })
}

/// Outcome of each structural check, with the quantities behind it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzChecks {
    pub maximal: bool,
    pub parent_bound: bool,
    pub good_bound: bool,
    pub bad_zero_mass: bool,
    pub bad_variation: bool,
    pub total_length: bool,
    pub coverage: bool,
    pub disjoint: bool,
    pub reconstruction: bool,
    pub min_density_ratio: f64,
    pub max_parent_density_ratio: f64,
    pub max_good_norm: f64,
    pub max_bad_mass: f64,
    pub max_bad_variation_ratio: f64,
    pub total_length_value: f64,
    pub total_length_bound: f64,
    pub max_reconstruction_error: f64,
}

impl CzChecks {
    pub fn all_pass(&self) -> bool {
        self.maximal
            && self.parent_bound
            && self.good_bound
            && self.bad_zero_mass
            && self.bad_variation
            && self.total_length
            && self.coverage
            && self.disjoint
            && self.reconstruction
    }
}

/// Tolerance for identities that hold exactly in exact arithmetic.
pub const CZ_TOL: f64 = 1e-12;

/// Checks every structural property of `dec` against `μ`; failures are
/// reported, never raised.
pub fn verify(mu: &SimpleOpMeasure, dec: &CZDecomposition) -> Result<CzChecks> {
    let p = dec.p;
    let s = dec.s;
    let wts = Weights::new(mu, p)?;
    let total: f64 = wts.w.iter().sum();
    let scale_tol = CZ_TOL * total.max(1.0);

    let mut min_density_ratio = f64::INFINITY;
    let mut max_parent = 0.0f64;
    for q in &dec.intervals {
        min_density_ratio = min_density_ratio.min(wts.density(q) / s);
        max_parent = max_parent.max(wts.density(&q.parent()?) / s);
    }
    if dec.intervals.is_empty() {
        min_density_ratio = f64::NAN;
    }
    let maximal = dec.intervals.iter().all(|q| wts.density(q) > s);
    let parent_bound = dec
        .intervals
        .iter()
        .all(|q| q.parent().map(|pq| wts.density(&pq) <= s).unwrap_or(false));

    let max_good_norm = dec.good.sup_norm(p)?;
    let good_bound = max_good_norm <= 2.0 * s * (1.0 + CZ_TOL);

    let mut max_bad_mass = 0.0f64;
    let mut max_bad_ratio = 0.0f64;
    let mut bad_zero_mass = dec.bad_parts.len() == dec.intervals.len();
    let mut bad_variation = bad_zero_mass;
    for (q, nu) in dec.intervals.iter().zip(&dec.bad_parts) {
        let cell = q.as_interval();
        let mq = wts.mass(q);
        let m = nu.mass(&cell).max_abs();
        max_bad_mass = max_bad_mass.max(m);
        bad_zero_mass &= m <= CZ_TOL * mq.max(1.0);
        let tv = nu.total_variation(&Interval::real_line(), p)?;
        let ratio = if mq > 0.0 { tv / (2.0 * mq) } else { f64::INFINITY };
        max_bad_ratio = max_bad_ratio.max(ratio);
        bad_variation &= tv <= 2.0 * mq * (1.0 + CZ_TOL);
    }

    let total_length_value: f64 = dec.intervals.iter().map(|q| q.length()).sum();
    let total_length_bound = total / s;
    let total_length = total_length_value <= total_length_bound * (1.0 + CZ_TOL);

    let disjoint = check_disjoint(&dec.intervals).is_ok();
    let coverage = mu.atoms().iter().zip(&wts.w).all(|(a, &w)| {
        w == 0.0 || dec.intervals.iter().filter(|q| q.contains(a.x)).count() == 1
    });

    let max_reconstruction_error = reconstruction_error(mu, dec)?;
    let reconstruction = max_reconstruction_error <= scale_tol;

    Ok(CzChecks {
        maximal,
        parent_bound,
        good_bound,
        bad_zero_mass,
        bad_variation,
        total_length,
        coverage,
        disjoint,
        reconstruction,
        min_density_ratio,
        max_parent_density_ratio: max_parent,
        max_good_norm,
        max_bad_mass,
        max_bad_variation_ratio: max_bad_ratio,
        total_length_value,
        total_length_bound,
        max_reconstruction_error,
    })
}

/// `max_D ‖μ(D) - f(D) - Σ ν_ℓ(D)‖` over each `Q_ℓ` and every atom-containing
/// dyadic cell from just above the coarsest `Q_ℓ` down to the scale that
/// separates all atoms.
fn reconstruction_error(mu: &SimpleOpMeasure, dec: &CZDecomposition) -> Result<f64> {
    if mu.is_empty() {
        return Ok(0.0);
    }
    let coarse = dec.intervals.iter().map(|q| q.n).min().unwrap_or(0) - 1;
    let mut fine = dec.intervals.iter().map(|q| q.n).max().unwrap_or(0);
    if let Some(gap) = mu.min_gap() {
        fine = fine.max((-gap.log2()).ceil() as i32 + 1);
    }
    let fine = fine.min(MAX_SCALE);
    let coarse = coarse.max(-MAX_SCALE);
    let residual = |cell: &Interval| -> ComplexMatrix {
        let mut r = mu.mass(cell) - dec.good.mass(cell);
        for (q, nu) in dec.intervals.iter().zip(&dec.bad_parts) {
            if q.as_interval().intersect(cell).length() > 0.0 {
                r -= &nu.mass(cell);
            }
        }
        r
    };
    let mut worst = 0.0f64;
    for q in &dec.intervals {
        worst = worst.max(residual(&q.as_interval()).max_abs());
    }
    for n in coarse..=fine {
        let mut last = None;
        for x in mu.positions() {
            let d = DyadicInterval::containing(x, n)?;
            if last == Some(d) {
                continue;
            }
            last = Some(d);
            worst = worst.max(residual(&d.as_interval()).max_abs());
        }
    }
    Ok(worst)
}

/// Off-support decay of each bad part,
/// `‖Hν_ℓ(x)‖ <= 4‖μ‖(Q_ℓ)|Q_ℓ|/(|x-c_ℓ|² + |Q_ℓ|²)` for `x ∉ 2Q_ℓ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffSupportCheck {
    pub samples: usize,
    /// Largest `lhs/rhs` over all samples.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Sample offsets `|x - c_ℓ| = |Q_ℓ|(1 + t)`, `t` log-spaced on `[1e-3, 1e3]`,
/// on both sides of each interval.
pub fn off_support_check(mu: &SimpleOpMeasure, dec: &CZDecomposition, per_interval: usize) -> Result<OffSupportCheck> {
    let p = dec.p;
    let half = per_interval.div_ceil(2).max(1);
    let mut samples = 0;
    let mut worst = 0.0f64;
    let mut xs = Vec::with_capacity(2 * half);
    let mut inv_rhs = Vec::with_capacity(2 * half);
    for (q, nu) in dec.intervals.iter().zip(&dec.bad_parts) {
        let mq = mu.total_variation(&q.as_interval(), p)?;
        let (c, l) = (q.center(), q.length());
        xs.clear();
        for k in 0..half {
            let e = if half == 1 { 0.0 } else { -3.0 + 6.0 * k as f64 / (half - 1) as f64 };
            let off = l * (1.0 + 10f64.powf(e));
            xs.push(c + off);
            xs.push(c - off);
        }
        inv_rhs.clear();
        inv_rhs.extend(xs.iter().map(|&x| ((x - c).powi(2) + l * l) / (4.0 * mq * l)));
        let (ratio, _) = HilbertEvaluator::new(nu).max_scaled_norm(&xs, p, &inv_rhs)?;
        worst = worst.max(ratio);
        samples += xs.len();
    }
    Ok(OffSupportCheck { samples, worst_ratio: worst, pass: worst <= 1.0 + CZ_TOL })
}

/// `∫_{(∪2Q_ℓ)^c} ‖Hν(x)‖ dx` against `4π‖μ‖(ℝ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralCheck {
    pub integral: f64,
    pub error_estimate: f64,
    pub bound: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub pass: bool,
}

pub fn bad_part_integral(mu: &SimpleOpMeasure, dec: &CZDecomposition, tol: Tolerance) -> Result<IntegralCheck> {
    let p = dec.p;
    let nu = OpMeasure::new(mu.clone(), dec.good.scale(Complex64::new(-1.0, 0.0)))?;
    let bound = bounds::BAD_PART_INTEGRAL * mu.total_variation(&Interval::real_line(), p)?;
    // Atoms and cell edges of ν_ℓ lie in Q_ℓ, half a length inside 2Q_ℓ.
    let holes: Vec<Hole> = dec
        .intervals
        .iter()
        .map(|q| {
            let d = q.scaled_double();
            Hole { lo: d.lo, hi: d.hi, clearance: 0.5 * q.length() }
        })
        .collect();
    let ev = HilbertEvaluator::new(&nu);
    let q = integrate_complement(|xs, ys| ev.norms(xs, p, ys), &holes, tol)?;
    Ok(IntegralCheck {
        integral: q.value,
        error_estimate: q.error,
        bound,
        evaluations: q.evaluations,
        converged: q.converged,
        pass: q.value + q.error <= bound,
    })
}

/// Full audit of one decomposition, as written by the command-line runner.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzReport {
    pub s: f64,
    pub intervals: Vec<DyadicInterval>,
    pub checks: CzChecks,
    pub off_support: OffSupportCheck,
    pub integral: IntegralCheck,
}

impl CzReport {
    pub fn all_pass(&self) -> bool {
        self.checks.all_pass() && self.off_support.pass && self.integral.pass
    }
}

pub fn audit(mu: &SimpleOpMeasure, s: f64, p: SchattenIndex, samples_per_interval: usize) -> Result<(CZDecomposition, CzReport)> {
    let dec = decompose(mu, s, p)?;
    let checks = verify(mu, &dec)?;
    let off_support = off_support_check(mu, &dec, samples_per_interval)?;
    let integral = bad_part_integral(mu, &dec, Tolerance { abs: 1e-9, rel: 1e-5, max_intervals: 4000 })?;
    let report = CzReport {
        s,
        intervals: dec.intervals.clone(),
        checks,
        off_support,
        integral,
    };
    Ok((dec, report))
}
