//! Hyperplane transversality along ordered arc samples.
//!
//! Splitting a sample at an interior index `i` gives the plus part (points
//! after `i`) and the minus part (points before `i`). An oriented normal `n`
//! is weakly transverse at `i` when `⟨n, p − x_i⟩ ≥ −tol` on the plus part and
//! `≤ tol` on the minus part; the split point itself lies on the hyperplane.
//! For one normal the test at every index follows from prefix maxima and
//! suffix minima of the projections, so a whole grid costs `O(N·G)`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::digraph::VertexId;
use crate::gdifs::GdSystem;
use crate::geometry::{cos_sin_deg, Vector, UNIT_NORMAL_TOLERANCE};
use crate::multizipper::{Multizipper, ZipperError};

/// Angles in the default planar grid.
pub const DEFAULT_PLANAR_GRID: usize = 3600;

/// Points in the default grid for `d ≥ 3`.
pub const DEFAULT_SPHERE_GRID: usize = 4000;

/// Minimum samples per dyadic subarc in a density report.
pub const MIN_SAMPLES_PER_SUBARC: usize = 8;

/// Singular values below this span the common eigenspaces.
pub const EIGENSPACE_TOLERANCE: f64 = 1e-10;

// Dot products this close to zero count as orthogonal.
const ORTHOGONAL_SLACK: f64 = 1e-12;

const RANDOM_GRID_SEED: u64 = 0x006e_6f72_6d61_6c73;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransversalityError {
    #[error("normal has norm {norm}, expected a unit vector")]
    NotUnit { norm: f64 },
    #[error("index {index} is not interior to a sample of {len} points")]
    BoundaryIndex { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sample needs at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("dyadic depth {depth} needs {needed} samples per subarc, the sample gives {available}")]
    InsufficientDensity { depth: usize, needed: usize, available: usize },
    #[error("dyadic depth must be at least 1")]
    ZeroDyadicDepth,
    #[error("normal grid is empty")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// `±1` on the line.
    Signs,
    /// Uniform angles `360°·j/G`.
    Angles,
    /// Fibonacci lattice on `S²`.
    Fibonacci,
    /// Seeded Gaussian directions on `S^{d−1}`, `d ≥ 4`.
    Random,
}

/// Grid resolution, as declared in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridDescription {
    pub kind: GridKind,
    pub dimension: usize,
    pub count: usize,
}

/// Finite set of unit normals standing in for the sphere of oriented hyperplane directions.
#[derive(Debug)]
pub struct NormalGrid {
    description: GridDescription,
    normals: Vec<Vector>,
    neighbors: OnceLock<Vec<Vec<usize>>>,
}

impl Clone for NormalGrid {
    fn clone(&self) -> Self {
        Self { description: self.description, normals: self.normals.clone(), neighbors: OnceLock::new() }
    }
}

impl PartialEq for NormalGrid {
    fn eq(&self, other: &Self) -> bool {
        self.description == other.description && self.normals == other.normals
    }
}

impl NormalGrid {
    /// `count` uniform angles; multiples of 90° are exact axis directions.
    pub fn planar(count: usize) -> Result<Self, TransversalityError> {
        if count == 0 {
            return Err(TransversalityError::EmptyGrid);
        }
        let normals = (0..count)
            .map(|j| {
                let (c, s) = cos_sin_deg(360.0 * j as f64 / count as f64);
                Vector::from_vec(vec![c, s])
            })
            .collect();
        Ok(Self::from_parts(GridKind::Angles, 2, normals))
    }

    /// Fibonacci lattice on the unit sphere in `R³`.
    pub fn fibonacci(count: usize) -> Result<Self, TransversalityError> {
        if count == 0 {
            return Err(TransversalityError::EmptyGrid);
        }
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let normals = (0..count)
            .map(|j| {
                let z = 1.0 - (2.0 * j as f64 + 1.0) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * j as f64;
                Vector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
            })
            .collect();
        Ok(Self::from_parts(GridKind::Fibonacci, 3, normals))
    }

    /// The default grid for `R^d`: `±1`, 3600 angles, 4000 Fibonacci points,
    /// or 4000 seeded random directions beyond three dimensions.
    pub fn default_for(dim: usize) -> Result<Self, TransversalityError> {
        Self::with_count(dim, if dim == 2 { DEFAULT_PLANAR_GRID } else { DEFAULT_SPHERE_GRID })
    }

    pub fn with_count(dim: usize, count: usize) -> Result<Self, TransversalityError> {
        match dim {
            0 => Err(TransversalityError::EmptyGrid),
            1 => Ok(Self::from_parts(
                GridKind::Signs,
                1,
                vec![Vector::from_element(1, 1.0), Vector::from_element(1, -1.0)],
            )),
            2 => Self::planar(count),
            3 => Self::fibonacci(count),
            _ => {
                if count == 0 {
                    return Err(TransversalityError::EmptyGrid);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_GRID_SEED);
                let normals = (0..count)
                    .map(|_| {
                        let v = Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
                        let n = v.norm();
                        v / n
                    })
                    .collect();
                Ok(Self::from_parts(GridKind::Random, dim, normals))
            }
        }
    }

    fn from_parts(kind: GridKind, dimension: usize, normals: Vec<Vector>) -> Self {
        let description = GridDescription { kind, dimension, count: normals.len() };
        Self { description, normals, neighbors: OnceLock::new() }
    }

    pub fn description(&self) -> GridDescription {
        self.description
    }

    pub fn normals(&self) -> &[Vector] {
        &self.normals
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.description.dimension
    }

    fn quarter_turn(&self) -> Option<usize> {
        (self.description.kind == GridKind::Angles && self.len().is_multiple_of(4)).then_some(self.len() / 4)
    }

    /// Grid normals one step away from `g`: adjacent angles in the plane,
    /// otherwise those within the largest nearest-neighbour angle.
    pub fn neighbors(&self, g: usize) -> &[usize] {
        &self.neighbors.get_or_init(|| self.build_neighbors())[g]
    }

    fn build_neighbors(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        if self.description.kind == GridKind::Angles {
            return (0..n).map(|g| vec![(g + n - 1) % n, (g + 1) % n]).collect();
        }
        let nearest: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|g| (0..n).filter(|&h| h != g).map(|h| self.normals[g].dot(&self.normals[h])).fold(-1.0, f64::max))
            .collect();
        // Largest gap to a nearest neighbour, as a cosine.
        let step = nearest.iter().copied().fold(1.0, f64::min) - 1e-12;
        (0..n)
            .into_par_iter()
            .map(|g| (0..n).filter(|&h| h != g && self.normals[g].dot(&self.normals[h]) >= step).collect())
            .collect()
    }

    /// Grid angle in degrees of a planar normal.
    pub fn angle_deg(&self, g: usize) -> Option<f64> {
        (self.description.kind == GridKind::Angles).then(|| 360.0 * g as f64 / self.len() as f64)
    }
}

fn check_normal(points: &[Vector], n: &Vector) -> Result<(), TransversalityError> {
    let dim = points.first().map_or(n.len(), |p| p.len());
    if n.len() != dim {
        return Err(TransversalityError::DimensionMismatch { expected: dim, found: n.len() });
    }
    let norm = n.norm();
    if (norm - 1.0).abs() > UNIT_NORMAL_TOLERANCE {
        return Err(TransversalityError::NotUnit { norm });
    }
    Ok(())
}

fn check_interior(points: &[Vector], index: usize) -> Result<(), TransversalityError> {
    if index == 0 || index + 1 >= points.len() {
        return Err(TransversalityError::BoundaryIndex { index, len: points.len() });
    }
    Ok(())
}

fn check_grid(points: &[Vector], grid: &NormalGrid) -> Result<(), TransversalityError> {
    if grid.is_empty() {
        return Err(TransversalityError::EmptyGrid);
    }
    match points.first() {
        Some(p) if p.len() != grid.dim() => {
            Err(TransversalityError::DimensionMismatch { expected: p.len(), found: grid.dim() })
        }
        _ => Ok(()),
    }
}

fn projections(points: &[Vector], n: &Vector) -> Vec<f64> {
    points.iter().map(|p| n.dot(p)).collect()
}

/// `γ⁺` in the closed half-space `⟨n, · − x⟩ ≥ −tol`, `γ⁻` in `≤ tol`.
pub fn is_weakly_transverse(
    points: &[Vector],
    index: usize,
    n: &Vector,
    tol: f64,
) -> Result<bool, TransversalityError> {
    check_interior(points, index)?;
    check_normal(points, n)?;
    let t = projections(points, n);
    Ok(t[index + 1..].iter().all(|&s| s - t[index] >= -tol) && t[..index].iter().all(|&s| s - t[index] <= tol))
}

/// Strict form: `> tol` on `γ⁺`, `< −tol` on `γ⁻`.
pub fn is_transverse(points: &[Vector], index: usize, n: &Vector, tol: f64) -> Result<bool, TransversalityError> {
    check_interior(points, index)?;
    check_normal(points, n)?;
    let t = projections(points, n);
    Ok(t[index + 1..].iter().all(|&s| s - t[index] > tol) && t[..index].iter().all(|&s| s - t[index] < -tol))
}

/// Weakly transverse grid normals at one index: the finite-resolution `Σ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeApprox {
    pub index: usize,
    /// Grid indices of oriented normals, plus side facing `γ⁺`.
    pub normals_plus: Vec<usize>,
    pub resolution: GridDescription,
}

impl ConeApprox {
    pub fn is_empty(&self) -> bool {
        self.normals_plus.is_empty()
    }

    /// `Q⁺(x)` translated to the origin, as the grid directions `v` with
    /// `⟨n, v⟩ ≥ 0` for every `n` in the cone.
    pub fn q_plus_directions(&self, grid: &NormalGrid) -> Vec<usize> {
        let member = mask(grid.len(), &self.normals_plus);
        q_plus_mask(grid, &member).iter().enumerate().filter(|(_, &b)| b).map(|(g, _)| g).collect()
    }
}

fn mask(len: usize, indices: &[usize]) -> Vec<bool> {
    let mut m = vec![false; len];
    for &i in indices {
        m[i] = true;
    }
    m
}

/// Directions `v` with `⟨n, v⟩ ≥ 0` for every `n` in `sigma`. In a planar
/// grid of `4k` angles this means no member lies strictly more than a
/// quarter turn from `v`, which circular prefix counts answer in `O(G)`.
fn q_plus_mask(grid: &NormalGrid, sigma: &[bool]) -> Vec<bool> {
    let g = grid.len();
    if let Some(quarter) = grid.quarter_turn() {
        let mut prefix = vec![0usize; 2 * g + 1];
        for j in 0..2 * g {
            prefix[j + 1] = prefix[j] + usize::from(sigma[j % g]);
        }
        // Members at offsets quarter+1 ..= 3·quarter−1 from v.
        return (0..g)
            .map(|v| {
                let lo = v + quarter + 1;
                let hi = v + 3 * quarter;
                prefix[hi] - prefix[lo] == 0
            })
            .collect();
    }
    let members: Vec<&Vector> = sigma.iter().zip(grid.normals()).filter(|(&b, _)| b).map(|(_, n)| n).collect();
    grid.normals().iter().map(|v| members.iter().all(|n| n.dot(v) >= -ORTHOGONAL_SLACK)).collect()
}

/// `a ⊆ N₁(b)`: every member of `a` is a member of `b` or a grid neighbour of one.
fn within_one_step(grid: &NormalGrid, a: &[bool], b: &[bool]) -> bool {
    a.iter().enumerate().all(|(g, &inside)| !inside || b[g] || grid.neighbors(g).iter().any(|&h| b[h]))
}

pub fn transverse_normals(
    points: &[Vector],
    index: usize,
    grid: &NormalGrid,
    tol: f64,
) -> Result<ConeApprox, TransversalityError> {
    check_interior(points, index)?;
    check_grid(points, grid)?;
    let normals_plus = grid
        .normals()
        .par_iter()
        .enumerate()
        .filter(|(_, n)| {
            let t = projections(points, n);
            t[index + 1..].iter().all(|&s| s - t[index] >= -tol) && t[..index].iter().all(|&s| s - t[index] <= tol)
        })
        .map(|(g, _)| g)
        .collect();
    Ok(ConeApprox { index, normals_plus, resolution: grid.description() })
}

/// Intersection of closed half-spaces `{p : ⟨n, p⟩ ≥ c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaces {
    pub constraints: Vec<(Vector, f64)>,
}

impl HalfSpaces {
    pub fn contains(&self, p: &Vector, tol: f64) -> bool {
        self.constraints.iter().all(|(n, c)| n.dot(p) - c >= -tol)
    }
}

/// Weak-transversality table for every interior index and grid normal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeField {
    len: usize,
    grid_len: usize,
    tol: f64,
    bits: Vec<bool>,
}

impl ConeField {
    pub fn compute(points: &[Vector], grid: &NormalGrid, tol: f64) -> Result<Self, TransversalityError> {
        check_grid(points, grid)?;
        let n = points.len();
        if n < 3 {
            return Err(TransversalityError::TooFewPoints { needed: 3, found: n });
        }
        let columns: Vec<Vec<bool>> = grid
            .normals()
            .par_iter()
            .map(|normal| {
                let t = projections(points, normal);
                let mut suffix_min = vec![f64::INFINITY; n + 1];
                for j in (0..n).rev() {
                    suffix_min[j] = suffix_min[j + 1].min(t[j]);
                }
                let mut column = vec![false; n];
                let mut prefix_max = t[0];
                for i in 1..n - 1 {
                    column[i] = suffix_min[i + 1] - t[i] >= -tol && prefix_max - t[i] <= tol;
                    prefix_max = prefix_max.max(t[i]);
                }
                column
            })
            .collect();
        let g = grid.len();
        let mut bits = vec![false; n * g];
        for (gi, column) in columns.iter().enumerate() {
            for (i, &b) in column.iter().enumerate() {
                bits[i * g + gi] = b;
            }
        }
        Ok(Self { len: n, grid_len: g, tol, bits })
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Row of `Σ(x_i)` membership flags; all false at the endpoints.
    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.grid_len..(i + 1) * self.grid_len]
    }

    pub fn has_transverse_normal(&self, i: usize) -> bool {
        self.row(i).iter().any(|&b| b)
    }

    pub fn cone(&self, i: usize, grid: &NormalGrid) -> ConeApprox {
        let normals_plus = self.row(i).iter().enumerate().filter(|(_, &b)| b).map(|(g, _)| g).collect();
        ConeApprox { index: i, normals_plus, resolution: grid.description() }
    }
}

/// Strict monotonicity of `t ↦ ⟨n, γ(t)⟩` along the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monotonicity {
    pub monotone: bool,
    /// `Some(true)` when increasing, `Some(false)` when decreasing.
    pub increasing: Option<bool>,
    /// Earliest adjacent pair breaking the direction set by the first step.
    pub violation: Option<(usize, usize)>,
}

pub fn projection_monotone(points: &[Vector], n: &Vector) -> Result<Monotonicity, TransversalityError> {
    if points.len() < 2 {
        return Err(TransversalityError::TooFewPoints { needed: 2, found: points.len() });
    }
    check_normal(points, n)?;
    Ok(monotonicity(&projections(points, n)))
}

fn monotonicity(t: &[f64]) -> Monotonicity {
    let increasing = match t[1].partial_cmp(&t[0]) {
        Some(std::cmp::Ordering::Greater) => true,
        Some(std::cmp::Ordering::Less) => false,
        _ => return Monotonicity { monotone: false, increasing: None, violation: Some((0, 1)) },
    };
    let broken = t.windows(2).position(|w| if increasing { w[1] <= w[0] } else { w[1] >= w[0] });
    Monotonicity { monotone: broken.is_none(), increasing: Some(increasing), violation: broken.map(|j| (j, j + 1)) }
}

/// Grid directions whose projection is strictly monotone along the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionScan {
    pub grid: GridDescription,
    pub monotone: Vec<usize>,
}

pub fn direction_scan(points: &[Vector], grid: &NormalGrid) -> Result<DirectionScan, TransversalityError> {
    check_grid(points, grid)?;
    if points.len() < 2 {
        return Err(TransversalityError::TooFewPoints { needed: 2, found: points.len() });
    }
    let monotone = grid
        .normals()
        .par_iter()
        .enumerate()
        .filter(|(_, n)| monotonicity(&projections(points, n)).monotone)
        .map(|(g, _)| g)
        .collect();
    Ok(DirectionScan { grid: grid.description(), monotone })
}

/// Grid normals transverse (strictly, tolerance 0) at every interior index:
/// the directions along which the projection is strictly increasing.
pub fn uniform_transverse_normals(points: &[Vector], grid: &NormalGrid) -> Result<Vec<usize>, TransversalityError> {
    let scan = direction_scan(points, grid)?;
    Ok(scan
        .monotone
        .into_iter()
        .filter(|&g| {
            let t = projections(points, &grid.normals()[g]);
            t[1] > t[0]
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicSubarc {
    pub depth: usize,
    pub position: usize,
    /// Sample index range, inclusive.
    pub first: usize,
    pub last: usize,
    pub has_non_transverse: bool,
}

/// Whether points admitting a weakly transverse normal are nowhere dense,
/// certified at the tested sample, grid and dyadic depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub grid: GridDescription,
    pub tol: f64,
    pub dyadic_depth: usize,
    pub interior_points: usize,
    pub transverse_indices: Vec<usize>,
    pub dyadic_table: Vec<DyadicSubarc>,
    pub verdict: bool,
}

/// Scanning state for one sample: cone fields at `tol` and at the `2·tol`
/// slack used by the limit and semicontinuity checks.
#[derive(Debug)]
pub struct Scan<'a> {
    points: &'a [Vector],
    grid: &'a NormalGrid,
    field: ConeField,
    slack: OnceLock<ConeField>,
    q_plus: OnceLock<Vec<Vec<bool>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCheck {
    pub index: usize,
    pub window: usize,
    /// `(window size, side, normal)` with the normal weakly transverse across
    /// the one-sided window but not at the index with slack `2·tol`.
    pub counterexamples: Vec<(usize, Side, usize)>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Before,
    After,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemicontinuityCheck {
    pub index: usize,
    pub window: usize,
    /// Largest `h ≤ window` such that `Q⁺(x_i)` at slack `2·tol` lies within one
    /// grid step of `Q⁺(x_j)` at `tol` for every interior `0 < |j − i| ≤ h`.
    pub stable_radius: usize,
    pub pass: bool,
}

impl<'a> Scan<'a> {
    pub fn new(points: &'a [Vector], grid: &'a NormalGrid, tol: f64) -> Result<Self, TransversalityError> {
        let field = ConeField::compute(points, grid, tol)?;
        Ok(Self { points, grid, field, slack: OnceLock::new(), q_plus: OnceLock::new() })
    }

    pub fn field(&self) -> &ConeField {
        &self.field
    }

    pub fn tol(&self) -> f64 {
        self.field.tol
    }

    fn slack(&self) -> &ConeField {
        self.slack
            .get_or_init(|| ConeField::compute(self.points, self.grid, 2.0 * self.field.tol).expect("checked by new"))
    }

    fn q_plus(&self, i: usize) -> &[bool] {
        &self.q_plus.get_or_init(|| {
            (0..self.field.len).into_par_iter().map(|j| q_plus_mask(self.grid, self.field.row(j))).collect()
        })[i]
    }

    fn interior(&self, i: usize) -> Result<(), TransversalityError> {
        check_interior(self.points, i)
    }

    pub fn cone(&self, i: usize) -> Result<ConeApprox, TransversalityError> {
        self.interior(i)?;
        Ok(self.field.cone(i, self.grid))
    }

    pub fn density_report(&self, dyadic_depth: usize) -> Result<DensityReport, TransversalityError> {
        if dyadic_depth == 0 {
            return Err(TransversalityError::ZeroDyadicDepth);
        }
        let n = self.field.len;
        let spans = 1usize.checked_shl(dyadic_depth as u32).unwrap_or(usize::MAX);
        let available = (n - 1) / spans;
        if available < MIN_SAMPLES_PER_SUBARC {
            return Err(TransversalityError::InsufficientDensity {
                depth: dyadic_depth,
                needed: MIN_SAMPLES_PER_SUBARC,
                available,
            });
        }
        let transverse: Vec<bool> = (0..n).map(|i| self.field.has_transverse_normal(i)).collect();
        let mut dyadic_table = Vec::new();
        for depth in 1..=dyadic_depth {
            let parts = 1usize << depth;
            for position in 0..parts {
                let first = (position * (n - 1) / parts).max(1);
                let last = ((position + 1) * (n - 1) / parts).min(n - 2);
                let has_non_transverse = (first..=last).any(|i| !transverse[i]);
                dyadic_table.push(DyadicSubarc { depth, position, first, last, has_non_transverse });
            }
        }
        let verdict = dyadic_table.iter().all(|d| d.has_non_transverse);
        Ok(DensityReport {
            grid: self.grid.description(),
            tol: self.field.tol,
            dyadic_depth,
            interior_points: n - 2,
            transverse_indices: (1..n - 1).filter(|&i| transverse[i]).collect(),
            dyadic_table,
            verdict,
        })
    }

    /// Normals weakly transverse at every point of a one-sided window
    /// `1..=h` steps from `index` must be weakly transverse at `index`
    /// within `2·tol`, for every `h ≤ window`.
    pub fn limit_check(&self, index: usize, window: usize) -> Result<LimitCheck, TransversalityError> {
        self.interior(index)?;
        let n = self.field.len;
        let at_index = self.slack().row(index);
        let mut counterexamples = Vec::new();
        for side in [Side::Before, Side::After] {
            let mut common = vec![true; self.grid.len()];
            for h in 1..=window {
                let j = match side {
                    Side::Before if index > h => index - h,
                    Side::After if index + h < n - 1 => index + h,
                    _ => break,
                };
                for (c, &b) in common.iter_mut().zip(self.field.row(j)) {
                    *c &= b;
                }
                counterexamples.extend(
                    common.iter().zip(at_index).enumerate().filter(|(_, (&c, &a))| c && !a).map(|(g, _)| (h, side, g)),
                );
            }
        }
        Ok(LimitCheck { index, window, pass: counterexamples.is_empty(), counterexamples })
    }

    pub fn semicontinuity_check(
        &self,
        index: usize,
        window: usize,
    ) -> Result<SemicontinuityCheck, TransversalityError> {
        self.interior(index)?;
        let n = self.field.len;
        let at_index = q_plus_mask(self.grid, self.slack().row(index));
        let mut stable_radius = 0;
        for h in 1..=window {
            let neighbours = [index.checked_sub(h).filter(|&j| j >= 1), Some(index + h).filter(|&j| j < n - 1)];
            if neighbours.iter().all(|j| j.is_none()) {
                stable_radius = window;
                break;
            }
            if !neighbours.iter().flatten().all(|&j| within_one_step(self.grid, &at_index, self.q_plus(j))) {
                break;
            }
            stable_radius = h;
        }
        Ok(SemicontinuityCheck { index, window, stable_radius, pass: stable_radius >= 1.min(window) })
    }

    /// `Q⁺(x_first, x_last)`: half-spaces on the plus side of every weakly
    /// transverse hyperplane through each point of the subarc.
    pub fn q_plus_subarc(&self, first: usize, last: usize) -> Result<HalfSpaces, TransversalityError> {
        self.subarc(first, last, 1.0)
    }

    /// `Q⁻(x_first, x_last)`, the minus-side counterpart.
    pub fn q_minus_subarc(&self, first: usize, last: usize) -> Result<HalfSpaces, TransversalityError> {
        self.subarc(first, last, -1.0)
    }

    fn subarc(&self, first: usize, last: usize, sign: f64) -> Result<HalfSpaces, TransversalityError> {
        self.interior(first)?;
        self.interior(last)?;
        let mut constraints = Vec::new();
        for z in first..=last {
            for (g, &b) in self.field.row(z).iter().enumerate() {
                if b {
                    let n = &self.grid.normals()[g] * sign;
                    let c = n.dot(&self.points[z]);
                    constraints.push((n, c));
                }
            }
        }
        Ok(HalfSpaces { constraints })
    }
}

/// Report over a whole sample at the given tolerance.
pub fn transverse_point_report(
    points: &[Vector],
    grid: &NormalGrid,
    tol: f64,
    dyadic_depth: usize,
) -> Result<DensityReport, TransversalityError> {
    Scan::new(points, grid, tol)?.density_report(dyadic_depth)
}

pub fn limit_transversality_check(
    points: &[Vector],
    grid: &NormalGrid,
    tol: f64,
    index: usize,
    window: usize,
) -> Result<bool, TransversalityError> {
    Ok(Scan::new(points, grid, tol)?.limit_check(index, window)?.pass)
}

pub fn semicontinuity_check(
    points: &[Vector],
    grid: &NormalGrid,
    tol: f64,
    index: usize,
    window: usize,
) -> Result<bool, TransversalityError> {
    Ok(Scan::new(points, grid, tol)?.semicontinuity_check(index, window)?.pass)
}

/// Cell-diameter tolerance for a depth-`k` sample of `γ^(u)`:
/// `q_max^k · diam γ^(u)`.
pub fn cell_tolerance(zipper: &Multizipper, u: VertexId, depth: usize) -> Result<f64, ZipperError> {
    let q_max = zipper.system().ratios().into_iter().fold(0.0, f64::max);
    let diameters = zipper.component_diameters()?;
    Ok(q_max.powi(depth as i32) * diameters[u])
}

/// Normals `n` with `O_e·n = ±n` for every edge, grouped into the common
/// eigenspaces of one sign pattern. Distinct patterns give orthogonal spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantNormals {
    pub dim: usize,
    /// Orthonormal bases, one per nonzero common eigenspace.
    pub subspaces: Vec<Vec<Vector>>,
}

impl InvariantNormals {
    /// Every direction qualifies.
    pub fn is_all(&self) -> bool {
        self.subspaces.iter().any(|s| s.len() == self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.subspaces.is_empty()
    }

    pub fn contains(&self, n: &Vector) -> bool {
        self.subspaces.iter().any(|basis| {
            let projected: f64 = basis.iter().map(|b| b.dot(n).powi(2)).sum();
            (n.norm_squared() - projected).abs() <= EIGENSPACE_TOLERANCE
        })
    }

    /// One unit normal per subspace.
    pub fn representatives(&self) -> Vec<Vector> {
        self.subspaces.iter().map(|s| s[0].clone()).collect()
    }
}

/// Orthonormal basis of `{B·y : M·B·y = 0}` for an orthonormal `B` with
/// at most as many columns as rows, so the thin SVD keeps every right
/// singular vector.
fn restrict_kernel(basis: &DMatrix<f64>, m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = (m * basis).svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let kernel: Vec<_> = v_t
        .row_iter()
        .zip(svd.singular_values.iter())
        .filter(|(_, &sigma)| sigma <= EIGENSPACE_TOLERANCE)
        .map(|(row, _)| row.transpose())
        .collect();
    (!kernel.is_empty()).then(|| basis * DMatrix::from_columns(&kernel))
}

pub fn invariant_hyperplanes(system: &GdSystem) -> InvariantNormals {
    let d = system.dim();
    let mut distinct: Vec<&DMatrix<f64>> = Vec::new();
    for map in system.maps() {
        let o = map.orthogonal().matrix();
        if !distinct.iter().any(|m| (*m - o).amax() <= EIGENSPACE_TOLERANCE) {
            distinct.push(o);
        }
    }
    let mut spaces = vec![DMatrix::<f64>::identity(d, d)];
    for o in distinct {
        let identity = DMatrix::<f64>::identity(d, d);
        spaces = spaces
            .iter()
            .flat_map(|basis| {
                [o - &identity, o + &identity]
                    .into_iter()
                    .filter_map(|m| restrict_kernel(basis, &m))
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    let subspaces = spaces.into_iter().map(|b| b.column_iter().map(|c| c.into_owned()).collect()).collect();
    InvariantNormals { dim: d, subspaces }
}
