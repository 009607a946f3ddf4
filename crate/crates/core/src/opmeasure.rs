//! Operator-valued measures on the real line.
//!
//! Three concrete classes are supported: finite sums of point masses
//! ([`SimpleOpMeasure`]), piecewise-constant densities ([`DensityOpMeasure`]),
//! and their sum ([`OpMeasure`]), which is the form taken by the bad part of a
//! Calderón–Zygmund decomposition. Scalar nonnegative measures
//! ([`ScalarMeasure`]) carry total variations and reference measures.
//!
//! All interval operations use the half-open convention `(a, b]`.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicInterval, Interval};
use crate::error::{Error, Result};
use crate::schatten::{schatten_norm, ComplexMatrix, MatrixRepr, SchattenIndex};

/// A point mass `δ_x · value`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub value: ComplexMatrix,
}

/// `μ = Σ δ_{x_i} e_i` with strictly increasing positions.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleOpMeasure {
    rows: usize,
    cols: usize,
    atoms: Vec<Atom>,
}

/// A constant matrix density on one cell `(lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityCell {
    pub cell: Interval,
    pub value: ComplexMatrix,
}

/// `μ = f(x) dx` with `f` constant on disjoint cells and zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOpMeasure {
    rows: usize,
    cols: usize,
    cells: Vec<DensityCell>,
}

/// Atomic part plus density part.
#[derive(Clone, Debug, PartialEq)]
pub struct OpMeasure {
    pub simple: SimpleOpMeasure,
    pub density: DensityOpMeasure,
}

/// Nonnegative scalar measure: weighted atoms plus a nonnegative step density.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarMeasure {
    atoms: Vec<(f64, f64)>,
    cells: Vec<(Interval, f64)>,
}

fn check_shape(shape: (usize, usize), m: &ComplexMatrix) -> Result<()> {
    if m.shape() != shape {
        return Err(Error::ShapeMismatch(format!(
            "expected {}x{}, got {}x{}",
            shape.0,
            shape.1,
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("measure value"));
    }
    Ok(())
}

impl SimpleOpMeasure {
    /// Sorts atoms by position and merges bitwise-equal positions by summation.
    pub fn new(rows: usize, cols: usize, atoms: Vec<Atom>) -> Result<Self> {
        let mut atoms = atoms;
        for a in &atoms {
            if !a.x.is_finite() {
                return Err(Error::NonFinite("atom position"));
            }
            check_shape((rows, cols), &a.value)?;
        }
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.x == a.x => last.value += &a.value,
                _ => merged.push(a),
            }
        }
        Ok(Self {
            rows,
            cols,
            atoms: merged,
        })
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            atoms: Vec::new(),
        }
    }

    /// Convenience constructor for scalar (1x1) measures.
    pub fn scalar(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            1,
            1,
            points
                .iter()
                .map(|&(x, w)| Atom {
                    x,
                    value: ComplexMatrix::scalar(Complex64::new(w, 0.0)),
                })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.x)
    }

    pub fn has_atom_at(&self, x: f64) -> bool {
        self.atoms.binary_search_by(|a| a.x.total_cmp(&x)).is_ok()
            || self.atoms.iter().any(|a| a.x == x)
    }

    /// `μ(Δ)`.
    pub fn mass(&self, delta: &Interval) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.rows, self.cols);
        for a in self.atoms.iter().filter(|a| delta.contains(a.x)) {
            acc += &a.value;
        }
        acc
    }

    /// `Σ_{x_i ∈ Δ} ‖e_i‖`; the supremum in the variation is attained because
    /// distinct atoms are separated by disjoint intervals.
    pub fn total_variation(&self, delta: &Interval, p: SchattenIndex) -> Result<f64> {
        self.atoms
            .iter()
            .filter(|a| delta.contains(a.x))
            .map(|a| schatten_norm(&a.value, p))
            .sum()
    }

    pub fn variation_measure(&self, p: SchattenIndex) -> Result<ScalarMeasure> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Ok((a.x, schatten_norm(&a.value, p)?)))
            .collect::<Result<Vec<_>>>()?;
        ScalarMeasure::new(atoms, Vec::new())
    }

    pub fn restrict(&self, delta: &Interval) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            atoms: self.atoms.iter().filter(|a| delta.contains(a.x)).cloned().collect(),
        }
    }

    /// `[min x_i, max x_i]`, or `None` for the zero measure.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        Some((self.atoms.first()?.x, self.atoms.last()?.x))
    }

    /// Smallest distance between distinct atom positions.
    pub fn min_gap(&self) -> Option<f64> {
        self.atoms
            .windows(2)
            .map(|w| w[1].x - w[0].x)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// `μ_n = Σ_ℓ δ_{c(Q_ℓ)} μ(Q_ℓ)` over the dyadic cells of scale `n`.
    pub fn discretize(&self, n: i32) -> Result<Self> {
        let mut cells: BTreeMap<i64, ComplexMatrix> = BTreeMap::new();
        for a in &self.atoms {
            let q = DyadicInterval::containing(a.x, n)?;
            cells
                .entry(q.j)
                .and_modify(|m| *m += &a.value)
                .or_insert_with(|| a.value.clone());
        }
        let atoms = cells
            .into_iter()
            .map(|(j, value)| Atom {
                x: DyadicInterval { j, n }.center(),
                value,
            })
            .collect();
        Self::new(self.rows, self.cols, atoms)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    x: a.x,
                    value: a.value.scale(c),
                })
                .collect(),
        }
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let m = OpMeasure::load_json(path)?;
        if !m.density.is_empty() {
            return Err(Error::InvalidArgument(
                "fixture has density cells; a simple measure was expected".into(),
            ));
        }
        Ok(m.simple)
    }
}

impl DensityOpMeasure {
    /// Cells are sorted; overlapping or degenerate cells are rejected.
    pub fn new(rows: usize, cols: usize, cells: Vec<DensityCell>) -> Result<Self> {
        let mut cells = cells;
        for c in &cells {
            if !c.cell.is_bounded() || c.cell.is_empty() {
                return Err(Error::InvalidArgument(format!("bad density cell {}", c.cell)));
            }
            check_shape((rows, cols), &c.value)?;
        }
        cells.sort_by(|a, b| a.cell.lo.total_cmp(&b.cell.lo));
        for w in cells.windows(2) {
            if w[1].cell.lo < w[0].cell.hi {
                return Err(Error::OverlappingIntervals(
                    w[0].cell.to_string(),
                    w[1].cell.to_string(),
                ));
            }
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: Vec::new(),
        }
    }

    pub fn cells(&self) -> &[DensityCell] {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Density at `x` (zero off the cells).
    pub fn density_at(&self, x: f64) -> ComplexMatrix {
        self.cells
            .iter()
            .find(|c| c.cell.contains(x))
            .map(|c| c.value.clone())
            .unwrap_or_else(|| ComplexMatrix::zeros(self.rows, self.cols))
    }

    pub fn mass(&self, delta: &Interval) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.rows, self.cols);
        for c in &self.cells {
            let len = c.cell.intersect(delta).length();
            if len > 0.0 {
                acc.add_scaled(Complex64::new(len, 0.0), &c.value);
            }
        }
        acc
    }

    /// `∫_Δ ‖f(x)‖ dx`, exact on the step grid.
    pub fn total_variation(&self, delta: &Interval, p: SchattenIndex) -> Result<f64> {
        let mut total = 0.0;
        for c in &self.cells {
            let len = c.cell.intersect(delta).length();
            if len > 0.0 {
                total += len * schatten_norm(&c.value, p)?;
            }
        }
        Ok(total)
    }

    pub fn variation_measure(&self, p: SchattenIndex) -> Result<ScalarMeasure> {
        let cells = self
            .cells
            .iter()
            .map(|c| Ok((c.cell, schatten_norm(&c.value, p)?)))
            .collect::<Result<Vec<_>>>()?;
        ScalarMeasure::new(Vec::new(), cells)
    }

    pub fn restrict(&self, delta: &Interval) -> Self {
        let cells = self
            .cells
            .iter()
            .filter_map(|c| {
                let cut = c.cell.intersect(delta);
                (cut.length() > 0.0).then(|| DensityCell {
                    cell: cut,
                    value: c.value.clone(),
                })
            })
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            cells,
        }
    }

    /// `sup ‖f(x)‖`.
    pub fn sup_norm(&self, p: SchattenIndex) -> Result<f64> {
        self.cells
            .iter()
            .map(|c| schatten_norm(&c.value, p))
            .try_fold(0.0, |m, v| Ok(f64::max(m, v?)))
    }

    pub fn support_hull(&self) -> Option<(f64, f64)> {
        Some((self.cells.first()?.cell.lo, self.cells.last()?.cell.hi))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            cells: self
                .cells
                .iter()
                .map(|d| DensityCell {
                    cell: d.cell,
                    value: d.value.scale(c),
                })
                .collect(),
        }
    }
}

impl OpMeasure {
    pub fn new(simple: SimpleOpMeasure, density: DensityOpMeasure) -> Result<Self> {
        if simple.shape() != density.shape() {
            return Err(Error::ShapeMismatch("atomic and density parts differ in shape".into()));
        }
        Ok(Self { simple, density })
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            simple: SimpleOpMeasure::zero(rows, cols),
            density: DensityOpMeasure::zero(rows, cols),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.simple.shape()
    }

    pub fn mass(&self, delta: &Interval) -> ComplexMatrix {
        self.simple.mass(delta) + self.density.mass(delta)
    }

    /// Atoms and the density part are mutually singular, so variations add.
    pub fn total_variation(&self, delta: &Interval, p: SchattenIndex) -> Result<f64> {
        Ok(self.simple.total_variation(delta, p)? + self.density.total_variation(delta, p)?)
    }

    pub fn variation_measure(&self, p: SchattenIndex) -> Result<ScalarMeasure> {
        let a = self.simple.variation_measure(p)?;
        let d = self.density.variation_measure(p)?;
        ScalarMeasure::new(a.atoms, d.cells)
    }

    pub fn restrict(&self, delta: &Interval) -> Self {
        Self {
            simple: self.simple.restrict(delta),
            density: self.density.restrict(delta),
        }
    }

    pub fn support_hull(&self) -> Option<(f64, f64)> {
        match (self.simple.support_hull(), self.density.support_hull()) {
            (None, None) => None,
            (Some(h), None) | (None, Some(h)) => Some(h),
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.simple.is_empty() && self.density.is_empty()
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

impl From<SimpleOpMeasure> for OpMeasure {
    fn from(simple: SimpleOpMeasure) -> Self {
        let (r, c) = simple.shape();
        Self {
            simple,
            density: DensityOpMeasure::zero(r, c),
        }
    }
}

impl From<DensityOpMeasure> for OpMeasure {
    fn from(density: DensityOpMeasure) -> Self {
        let (r, c) = density.shape();
        Self {
            simple: SimpleOpMeasure::zero(r, c),
            density,
        }
    }
}

impl ScalarMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, cells: Vec<(Interval, f64)>) -> Result<Self> {
        let mut atoms = atoms;
        let mut cells = cells;
        if atoms.iter().any(|&(x, w)| !x.is_finite() || !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("scalar atoms need finite x and weight >= 0".into()));
        }
        if cells
            .iter()
            .any(|&(c, d)| !c.is_bounded() || c.is_empty() || !(d >= 0.0) || !d.is_finite())
        {
            return Err(Error::InvalidArgument("scalar cells need bounded support and density >= 0".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        cells.sort_by(|a, b| a.0.lo.total_cmp(&b.0.lo));
        for w in cells.windows(2) {
            if w[1].0.lo < w[0].0.hi {
                return Err(Error::OverlappingIntervals(w[0].0.to_string(), w[1].0.to_string()));
            }
        }
        Ok(Self {
            atoms: merged,
            cells,
        })
    }

    pub fn dirac(x: f64, w: f64) -> Result<Self> {
        Self::new(vec![(x, w)], Vec::new())
    }

    /// `density` on `cell`, zero elsewhere.
    pub fn uniform(cell: Interval, density: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![(cell, density)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn cells(&self) -> &[(Interval, f64)] {
        &self.cells
    }

    /// `ν(Δ)` for half-open `Δ = (a, b]`.
    pub fn measure(&self, delta: &Interval) -> f64 {
        let a: f64 = self
            .atoms
            .iter()
            .filter(|(x, _)| delta.contains(*x))
            .map(|(_, w)| w)
            .sum();
        a + self.density_mass(delta.lo, delta.hi)
    }

    /// `ν((a, b))`, the open interval.
    pub fn measure_open(&self, lo: f64, hi: f64) -> f64 {
        let a: f64 = self
            .atoms
            .iter()
            .filter(|(x, _)| lo < *x && *x < hi)
            .map(|(_, w)| w)
            .sum();
        a + self.density_mass(lo, hi)
    }

    fn density_mass(&self, lo: f64, hi: f64) -> f64 {
        self.cells
            .iter()
            .map(|(c, d)| {
                let len = c.hi.min(hi) - c.lo.max(lo);
                if len > 0.0 {
                    d * len
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.measure(&Interval::real_line())
    }

    pub fn has_atom_at(&self, x: f64) -> bool {
        self.atoms.iter().any(|&(a, w)| a == x && w > 0.0)
    }

    pub fn restrict(&self, delta: &Interval) -> Self {
        Self {
            atoms: self.atoms.iter().copied().filter(|(x, _)| delta.contains(*x)).collect(),
            cells: self
                .cells
                .iter()
                .filter_map(|&(c, d)| {
                    let cut = c.intersect(delta);
                    (cut.length() > 0.0).then_some((cut, d))
                })
                .collect(),
        }
    }

    pub fn support_hull(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(x, _) in &self.atoms {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        for &(c, _) in &self.cells {
            lo = lo.min(c.lo);
            hi = hi.max(c.hi);
        }
        (lo <= hi).then_some((lo, hi))
    }
}

// ---------------------------------------------------------------------------
// JSON documents: {"atoms": [{"x", "re", "im"}], "cells": [{"lo", "hi", "re", "im"}]}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    x: f64,
    #[serde(flatten)]
    value: MatrixRepr,
}

#[derive(Serialize, Deserialize)]
struct CellRepr {
    lo: f64,
    hi: f64,
    #[serde(flatten)]
    value: MatrixRepr,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    #[serde(default)]
    atoms: Vec<AtomRepr>,
    #[serde(default)]
    cells: Vec<CellRepr>,
    /// Needed only for the empty measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shape: Option<(usize, usize)>,
}

impl Serialize for OpMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = MeasureRepr {
            atoms: self
                .simple
                .atoms
                .iter()
                .map(|a| AtomRepr {
                    x: a.x,
                    value: a.value.clone().into(),
                })
                .collect(),
            cells: self
                .density
                .cells
                .iter()
                .map(|c| CellRepr {
                    lo: c.cell.lo,
                    hi: c.cell.hi,
                    value: c.value.clone().into(),
                })
                .collect(),
            shape: self.is_zero().then(|| self.shape()),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OpMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = MeasureRepr::deserialize(d)?;
        let atoms = repr
            .atoms
            .into_iter()
            .map(|a| {
                Ok(Atom {
                    x: a.x,
                    value: ComplexMatrix::try_from(a.value)?,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let cells = repr
            .cells
            .into_iter()
            .map(|c| {
                Ok(DensityCell {
                    cell: Interval::new(c.lo, c.hi)?,
                    value: ComplexMatrix::try_from(c.value)?,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let shape = atoms
            .first()
            .map(|a| a.value.shape())
            .or_else(|| cells.first().map(|c| c.value.shape()))
            .or(repr.shape)
            .ok_or_else(|| D::Error::custom("empty measure needs an explicit \"shape\""))?;
        let simple = SimpleOpMeasure::new(shape.0, shape.1, atoms).map_err(D::Error::custom)?;
        let density = DensityOpMeasure::new(shape.0, shape.1, cells).map_err(D::Error::custom)?;
        OpMeasure::new(simple, density).map_err(D::Error::custom)
    }
}

impl Serialize for SimpleOpMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OpMeasure::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SimpleOpMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = OpMeasure::deserialize(d)?;
        if !m.density.is_empty() {
            return Err(serde::de::Error::custom("simple measure cannot carry density cells"));
        }
        Ok(m.simple)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn two_atoms() -> SimpleOpMeasure {
        // ‖A‖ = 1, ‖B‖ = 2 in every Schatten norm (rank one).
        SimpleOpMeasure::new(
            2,
            2,
            vec![
                Atom {
                    x: 0.0,
                    value: ComplexMatrix::from_real_diagonal(&[1.0, 0.0]),
                },
                Atom {
                    x: 1.0,
                    value: ComplexMatrix::from_real_diagonal(&[0.0, 2.0]),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn total_variation_examples() {
        let mu = two_atoms();
        let op = SchattenIndex::OPERATOR;
        assert_eq!(mu.total_variation(&Interval::real_line(), op).unwrap(), 3.0);
        assert_eq!(mu.total_variation(&Interval::new(0.5, 2.0).unwrap(), op).unwrap(), 2.0);
        let dens = DensityOpMeasure::new(
            2,
            2,
            vec![DensityCell {
                cell: Interval::new(0.0, 1.0).unwrap(),
                value: ComplexMatrix::from_real_diagonal(&[1.0, 0.0]),
            }],
        )
        .unwrap();
        assert_eq!(dens.total_variation(&Interval::real_line(), op).unwrap(), 1.0);
    }

    #[test]
    fn variation_measure_examples() {
        let mu = SimpleOpMeasure::new(
            2,
            2,
            vec![Atom {
                x: 0.0,
                value: ComplexMatrix::from_real_diagonal(&[3.0, 4.0]),
            }],
        )
        .unwrap();
        assert_eq!(mu.variation_measure(SchattenIndex::OPERATOR).unwrap().atoms(), &[(0.0, 4.0)]);
        let s1 = mu.variation_measure(SchattenIndex::TRACE).unwrap();
        assert!((s1.atoms()[0].1 - 7.0).abs() < 1e-14);
        assert_eq!(
            two_atoms().variation_measure(SchattenIndex::OPERATOR).unwrap().atoms(),
            &[(0.0, 1.0), (1.0, 2.0)]
        );
    }

    #[test]
    fn discretize_examples() {
        let e = ComplexMatrix::from_real_diagonal(&[1.0, -2.0]);
        let mu = SimpleOpMeasure::new(2, 2, vec![Atom { x: 0.3, value: e.clone() }]).unwrap();
        let d = mu.discretize(1).unwrap();
        assert_eq!(d.atoms(), &[Atom { x: 0.25, value: e.clone() }]);

        let mu2 = SimpleOpMeasure::new(
            2,
            2,
            vec![Atom { x: 0.3, value: e.clone() }, Atom { x: 0.4, value: e.clone() }],
        )
        .unwrap();
        let d = mu2.discretize(1).unwrap();
        assert_eq!(d.atoms(), &[Atom { x: 0.25, value: e.scale(c(2.0)) }]);

        // Fine enough to separate: values unchanged, positions at centers.
        let d = mu2.discretize(6).unwrap();
        assert_eq!(d.len(), 2);
        for (a, b) in d.atoms().iter().zip(mu2.atoms()) {
            assert_eq!(a.value, b.value);
            let q = DyadicInterval::containing(b.x, 6).unwrap();
            assert_eq!(a.x, q.center());
        }
    }

    #[test]
    fn restrict_examples() {
        let e = ComplexMatrix::scalar(c(1.0));
        let mu = SimpleOpMeasure::scalar(&[(0.0, 1.0), (1.0, 1.0)]).unwrap();
        let r = mu.restrict(&Interval::new(0.5, 1.0).unwrap());
        assert_eq!(r.atoms(), &[Atom { x: 1.0, value: e.clone() }]);
        let one = SimpleOpMeasure::scalar(&[(1.0, 1.0)]).unwrap();
        assert_eq!(one.restrict(&Interval::new(0.0, 1.0).unwrap()).len(), 1);
        let zero = SimpleOpMeasure::scalar(&[(0.0, 1.0)]).unwrap();
        assert!(zero.restrict(&Interval::new(0.0, 1.0).unwrap()).is_empty());
    }

    #[test]
    fn merges_equal_positions_only() {
        let mu = SimpleOpMeasure::scalar(&[(0.5, 1.0), (0.5, 2.0), (0.5 + 1e-15, 1.0)]).unwrap();
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.atoms()[0].value[(0, 0)], c(3.0));
    }

    #[test]
    fn rejects_bad_input() {
        let bad = Atom {
            x: f64::NAN,
            value: ComplexMatrix::scalar(c(1.0)),
        };
        assert!(SimpleOpMeasure::new(1, 1, vec![bad]).is_err());
        let wrong = Atom {
            x: 0.0,
            value: ComplexMatrix::zeros(2, 2),
        };
        assert!(SimpleOpMeasure::new(1, 1, vec![wrong]).is_err());
        let overlapping = vec![
            DensityCell { cell: Interval::new(0.0, 1.0).unwrap(), value: ComplexMatrix::scalar(c(1.0)) },
            DensityCell { cell: Interval::new(0.5, 2.0).unwrap(), value: ComplexMatrix::scalar(c(1.0)) },
        ];
        assert!(DensityOpMeasure::new(1, 1, overlapping).is_err());
        assert!(ScalarMeasure::dirac(0.0, -1.0).is_err());
    }

    #[test]
    fn json_document_round_trip() {
        let mu = OpMeasure::new(
            two_atoms(),
            DensityOpMeasure::new(
                2,
                2,
                vec![DensityCell {
                    cell: Interval::new(2.0, 3.0).unwrap(),
                    value: ComplexMatrix::from_diagonal(&[Complex64::new(0.0, 1.0), c(0.5)]),
                }],
            )
            .unwrap(),
        )
        .unwrap();
        let text = serde_json::to_string(&mu).unwrap();
        assert!(text.contains("\"atoms\"") && text.contains("\"cells\""));
        let back: OpMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mu);
        let doc = r#"{"atoms": [{"x": 0.25, "re": [[1.0]]}]}"#;
        let s: SimpleOpMeasure = serde_json::from_str(doc).unwrap();
        assert_eq!(s.atoms()[0].x, 0.25);
        assert!(serde_json::from_str::<OpMeasure>(r#"{"atoms": [{"x": 0.0, "re": [[1.0], [1.0, 2.0]]}]}"#).is_err());
        assert!(serde_json::from_str::<OpMeasure>("{\"atoms\": [").is_err());
    }

    fn random_measure(seed: u64) -> SimpleOpMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..20);
        let atoms = (0..n)
            .map(|_| Atom {
                x: rng.random_range(-2.0..2.0),
                value: ComplexMatrix::from_fn(2, 3, |_, _| {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }),
            })
            .collect();
        SimpleOpMeasure::new(2, 3, atoms).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn variation_additive_over_dyadic_partitions(seed in any::<u64>(), n in 0i32..5) {
            let mu = random_measure(seed);
            let p = SchattenIndex::TRACE;
            let delta = Interval::new(-2.0, 2.0).unwrap();
            let whole = mu.total_variation(&delta, p).unwrap();
            let parts: f64 = (-2i64 << n..2i64 << n)
                .map(|j| mu.total_variation(&DyadicInterval { j, n }.as_interval(), p).unwrap())
                .sum();
            prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1.0));
        }

        #[test]
        fn discretize_preserves_coarse_masses(seed in any::<u64>(), n in 0i32..8, coarse in -2i32..8) {
            let mu = random_measure(seed);
            let mu_n = mu.discretize(n).unwrap();
            let coarse = coarse.min(n);
            for j in (-2i64 << coarse.max(0))..(2i64 << coarse.max(0)) {
                let q = DyadicInterval { j, n: coarse }.as_interval();
                let diff = (mu.mass(&q) - mu_n.mass(&q)).max_abs();
                prop_assert!(diff <= 1e-12);
            }
            let op = SchattenIndex::OPERATOR;
            prop_assert!(
                mu_n.total_variation(&Interval::real_line(), op).unwrap()
                    <= mu.total_variation(&Interval::real_line(), op).unwrap() * (1.0 + 1e-12)
            );
        }

        #[test]
        fn variation_measure_commutes_with_restrict(seed in any::<u64>(), lo in -2.0f64..2.0, len in 0.0f64..2.0) {
            let mu = random_measure(seed);
            let delta = Interval::new(lo, lo + len).unwrap();
            let p = SchattenIndex::OPERATOR;
            let a = mu.restrict(&delta).variation_measure(p).unwrap();
            let b = mu.variation_measure(p).unwrap().restrict(&delta);
            prop_assert_eq!(a, b);
            for j in -8i64..8 {
                let q = DyadicInterval { j, n: 2 }.as_interval();
                let tv = mu.total_variation(&q, p).unwrap();
                let vm = mu.variation_measure(p).unwrap().measure(&q);
                prop_assert!((tv - vm).abs() <= 1e-12 * tv.max(1.0));
            }
        }
    }
}
