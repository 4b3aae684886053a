//! Kronecker flows on the p-torus and their cell grids.
//!
//! Torus angles use unit period: a point is a vector in `[0,1)^p` and the
//! flow is `ω·t = (ω + γ t) mod 1`. Distances use the max over coordinates of
//! the wrap-around distance `min(|a-b|, 1-|a-b|)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DrivingError {
    #[error("driving flow needs at least one frequency")]
    Empty,
    #[error("frequency {index} is {value}; frequencies must be finite and nonzero")]
    BadFrequency { index: usize, value: f64 },
    #[error("grid needs at least one cell per dimension (got {0:?})")]
    BadGrid(Vec<usize>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Reduces a real number to `[0,1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Wrap-around distance of two angles on the unit circle.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = wrap_unit(a - b);
    d.min(1.0 - d)
}

/// Max-metric distance on the torus.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| circle_distance(*x, *y)).fold(0.0, f64::max)
}

/// A point of the torus, every coordinate in `[0,1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", from = "Vec<f64>")]
pub struct DrivingPoint(Vec<f64>);

impl DrivingPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        let mut coords = coords.into();
        for c in &mut coords {
            *c = wrap_unit(*c);
        }
        DrivingPoint(coords)
    }

    pub fn origin(p: usize) -> Self {
        DrivingPoint(vec![0.0; p])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &DrivingPoint) -> f64 {
        torus_distance(&self.0, &other.0)
    }
}

impl From<Vec<f64>> for DrivingPoint {
    fn from(v: Vec<f64>) -> Self {
        DrivingPoint::new(v)
    }
}

impl From<DrivingPoint> for Vec<f64> {
    fn from(p: DrivingPoint) -> Self {
        p.0
    }
}

/// Frequency vector of a Kronecker flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivingFlowSpec {
    frequencies: Vec<f64>,
    periodic: bool,
}

impl DrivingFlowSpec {
    pub fn new(frequencies: Vec<f64>) -> Result<Self, DrivingError> {
        if frequencies.is_empty() {
            return Err(DrivingError::Empty);
        }
        for (index, &value) in frequencies.iter().enumerate() {
            if !value.is_finite() || value == 0.0 {
                return Err(DrivingError::BadFrequency { index, value });
            }
        }
        let periodic = frequencies.len() == 1;
        Ok(DrivingFlowSpec { frequencies, periodic })
    }

    /// The one-dimensional unit-speed flow used for autonomous systems.
    pub fn trivial() -> Self {
        DrivingFlowSpec { frequencies: vec![1.0], periodic: true }
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn dim(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Largest coordinate speed; bounds how fast the driving moves in the
    /// torus metric.
    pub fn max_speed(&self) -> f64 {
        self.frequencies.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// `ω·t`.
    pub fn advance(&self, omega: &DrivingPoint, t: f64) -> DrivingPoint {
        let mut out = vec![0.0; omega.dim()];
        self.advance_into(omega.coords(), t, &mut out);
        DrivingPoint(out)
    }

    /// Allocation-free form of [`DrivingFlowSpec::advance`].
    #[inline]
    pub fn advance_into(&self, omega: &[f64], t: f64, out: &mut [f64]) {
        for ((o, w), g) in out.iter_mut().zip(omega).zip(&self.frequencies) {
            *o = wrap_unit(w + g * t);
        }
    }

    /// Heuristic check that no integer relation `Σ kᵢγᵢ = 0` exists with
    /// small coefficients: every ratio `γᵢ/γ₀` must have no continued-fraction
    /// convergent with denominator `<= max_denominator` that reproduces it to
    /// machine precision.
    pub fn looks_rationally_independent(&self, max_denominator: u64) -> bool {
        if self.frequencies.len() < 2 {
            return true;
        }
        let base = self.frequencies[0];
        let ratios: Vec<f64> = self.frequencies[1..].iter().map(|g| g / base).collect();
        if ratios.iter().any(|r| rational_approximation(*r, max_denominator).is_some()) {
            return false;
        }
        for i in 0..ratios.len() {
            for j in i + 1..ratios.len() {
                if rational_approximation(ratios[j] / ratios[i], max_denominator).is_some() {
                    return false;
                }
            }
        }
        true
    }
}

/// Returns `(p, q)` when `x` equals `p/q` to about 1e-12 relative precision
/// for some `q <= max_denominator`.
pub fn rational_approximation(x: f64, max_denominator: u64) -> Option<(i64, u64)> {
    let tol = 1e-12 * x.abs().max(1.0);
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_denominator as i128 {
            return None;
        }
        if ((h2 as f64) / (k2 as f64) - x).abs() <= tol {
            return Some((h2 as i64, k2 as u64));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-15 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Uniform grid of half-open cells on the torus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrivingGrid {
    cells_per_dim: Vec<usize>,
}

impl DrivingGrid {
    pub fn new(cells_per_dim: Vec<usize>) -> Result<Self, DrivingError> {
        if cells_per_dim.is_empty() || cells_per_dim.contains(&0) {
            return Err(DrivingError::BadGrid(cells_per_dim));
        }
        Ok(DrivingGrid { cells_per_dim })
    }

    pub fn single(p: usize) -> Self {
        DrivingGrid { cells_per_dim: vec![1; p] }
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells_per_dim
    }

    pub fn dim(&self) -> usize {
        self.cells_per_dim.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_dim.iter().product()
    }

    pub fn side(&self, k: usize) -> f64 {
        1.0 / self.cells_per_dim[k] as f64
    }

    /// Torus-metric diameter of one cell (a single cell spans the circle,
    /// whose diameter is 1/2).
    pub fn cell_diameter(&self) -> f64 {
        self.cells_per_dim.iter().map(|&n| (1.0 / n as f64).min(0.5)).fold(0.0, f64::max)
    }

    /// Multi-index of the cell containing `omega`.
    pub fn cell_of(&self, omega: &DrivingPoint) -> Vec<usize> {
        omega.coords().iter().zip(&self.cells_per_dim).map(|(&w, &n)| coord_cell(w, n)).collect()
    }

    /// Linear cell index, row-major with the last coordinate fastest.
    #[inline]
    pub fn linear_cell_of(&self, omega: &[f64]) -> usize {
        let mut idx = 0;
        for (&w, &n) in omega.iter().zip(&self.cells_per_dim) {
            idx = idx * n + coord_cell(w, n);
        }
        idx
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.cells_per_dim).fold(0, |acc, (&k, &n)| acc * n + k)
    }

    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        let mut out = vec![0; self.cells_per_dim.len()];
        for (slot, &n) in out.iter_mut().zip(&self.cells_per_dim).rev() {
            *slot = linear % n;
            linear /= n;
        }
        out
    }

    pub fn center(&self, linear: usize) -> DrivingPoint {
        let multi = self.multi_index(linear);
        DrivingPoint(
            multi
                .iter()
                .zip(&self.cells_per_dim)
                .map(|(&k, &n)| (k as f64 + 0.5) / n as f64)
                .collect(),
        )
    }

    /// Cells whose multi-index differs by at most one (cyclically) in every
    /// coordinate, including `linear` itself. Sorted and deduplicated.
    pub fn neighbors(&self, linear: usize) -> Vec<usize> {
        let multi = self.multi_index(linear);
        let mut out = vec![Vec::new()];
        for (&k, &n) in multi.iter().zip(&self.cells_per_dim) {
            let mut options = vec![k];
            if n > 1 {
                options.push((k + 1) % n);
                options.push((k + n - 1) % n);
            }
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<usize>| {
                    options.iter().map(move |&o| {
                        let mut p = prefix.clone();
                        p.push(o);
                        p
                    })
                })
                .collect();
        }
        let mut lin: Vec<usize> = out.iter().map(|m| self.linear_index(m)).collect();
        lin.sort_unstable();
        lin.dedup();
        lin
    }

    /// Distance from a point to the closed cell region.
    pub fn distance_to_cell(&self, omega: &[f64], linear: usize) -> f64 {
        let multi = self.multi_index(linear);
        let mut d: f64 = 0.0;
        for ((&w, &k), &n) in omega.iter().zip(&multi).zip(&self.cells_per_dim) {
            if n == 1 {
                continue;
            }
            let lo = k as f64 / n as f64;
            let hi = (k + 1) as f64 / n as f64;
            let inside = w >= lo && w < hi;
            if !inside {
                d = d.max(circle_distance(w, lo).min(circle_distance(w, hi)));
            }
        }
        d
    }
}

#[inline]
fn coord_cell(w: f64, n: usize) -> usize {
    let k = (w * n as f64).floor();
    if k < 0.0 {
        0
    } else {
        (k as usize).min(n - 1)
    }
}

/// Fraction of grid cells visited by `{origin·(j·step) : 0 <= j < n_steps}`.
pub fn orbit_coverage(spec: &DrivingFlowSpec, grid: &DrivingGrid, step: f64, n_steps: usize) -> f64 {
    let mut visited = vec![false; grid.cell_count()];
    let origin = vec![0.0; spec.dim()];
    let mut w = vec![0.0; spec.dim()];
    let mut count = 0usize;
    for j in 0..n_steps.max(1) {
        spec.advance_into(&origin, j as f64 * step, &mut w);
        let c = grid.linear_cell_of(&w);
        if !visited[c] {
            visited[c] = true;
            count += 1;
        }
    }
    count as f64 / grid.cell_count() as f64
}
