//! Perron root of nonnegative irreducible matrices by shifted power iteration.
//!
//! Iterating `M + σI` instead of `M` removes the periodicity that stalls plain
//! power iteration on cyclic patterns such as `[[0,1],[1,0]]`: the shifted
//! matrix is primitive whenever `M` is irreducible. The shift `σ` is the
//! largest row sum, so it scales with `M`. Every step also yields the
//! Collatz–Wielandt bracket `min_u (Ax)_u/x_u ≤ r(A) ≤ max_u (Ax)_u/x_u`, which
//! doubles as the stopping certificate. Nearly decoupled blocks leave a tiny
//! spectral gap; when the iteration stalls the root comes from a Schur
//! decomposition instead.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

pub const MAX_POWER_ITERATIONS: usize = 20_000;

/// Relative width of the final Collatz–Wielandt bracket.
pub const SPECTRAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix is {rows}x{cols}, expected a nonempty square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) = {value} is negative or non-finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("weight vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("weight l[{index}] = {value} is not positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("power iteration did not converge after {iterations} steps (bracket width {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Converged Perron root with its certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerronEstimate {
    pub radius: f64,
    /// Collatz–Wielandt lower bound at the final iterate.
    pub lower: f64,
    /// Collatz–Wielandt upper bound at the final iterate.
    pub upper: f64,
    pub iterations: usize,
    /// Positive eigenvector estimate, 1-norm normalized.
    #[serde(skip)]
    pub vector: DVector<f64>,
}

fn check_matrix(m: &DMatrix<f64>) -> Result<(), SpectralError> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(SpectralError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            let value = m[(row, col)];
            if !(value.is_finite() && value >= 0.0) {
                return Err(SpectralError::InvalidEntry { row, col, value });
            }
        }
    }
    Ok(())
}

fn check_weights(m: &DMatrix<f64>, l: &DVector<f64>) -> Result<(), SpectralError> {
    check_matrix(m)?;
    if l.len() != m.nrows() {
        return Err(SpectralError::DimensionMismatch { expected: m.nrows(), found: l.len() });
    }
    match l.iter().enumerate().find(|(_, &v)| !(v.is_finite() && v > 0.0)) {
        Some((index, &value)) => Err(SpectralError::NonPositiveWeight { index, value }),
        None => Ok(()),
    }
}

fn ratio_range(m: &DMatrix<f64>, l: &DVector<f64>) -> (f64, f64) {
    let ml = m * l;
    ml.iter().zip(l.iter()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
        let r = a / b;
        (lo.min(r), hi.max(r))
    })
}

/// `min_u (M·l)_u / l_u`, a lower bound on `r(M)` for positive `l`.
pub fn collatz_wielandt_lower(m: &DMatrix<f64>, l: &DVector<f64>) -> Result<f64, SpectralError> {
    check_weights(m, l)?;
    Ok(ratio_range(m, l).0)
}

/// `max_u (M·l)_u / l_u`, an upper bound on `r(M)` for positive `l`.
pub fn collatz_wielandt_upper(m: &DMatrix<f64>, l: &DVector<f64>) -> Result<f64, SpectralError> {
    check_weights(m, l)?;
    Ok(ratio_range(m, l).1)
}

/// Spectral radius of a nonnegative irreducible matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<PerronEstimate, SpectralError> {
    check_matrix(m)?;
    let n = m.nrows();
    let shift = m.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    if shift == 0.0 {
        return Ok(PerronEstimate {
            radius: 0.0,
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
            vector: DVector::from_element(n, 1.0 / n as f64),
        });
    }
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += shift;
    }
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_POWER_ITERATIONS {
        let y = &shifted * &x;
        let (lo, hi) = ratio_range(&shifted, &x);
        let (lower, upper) = (lo - shift, hi - shift);
        residual = upper - lower;
        // The floor absorbs rounding in (Ax)_u/x_u near the shift.
        if residual <= SPECTRAL_TOLERANCE * upper.abs() + 4.0 * f64::EPSILON * hi {
            let radius = (0.5 * (lower + upper)).max(0.0);
            return Ok(PerronEstimate { radius, lower, upper, iterations: iteration, vector: x });
        }
        let norm = y.iter().sum::<f64>();
        x = y / norm;
        if x.iter().any(|&c| c <= 0.0 || !c.is_finite()) {
            break;
        }
    }
    schur_estimate(m).ok_or(SpectralError::NotConverged { iterations: MAX_POWER_ITERATIONS, residual })
}

/// Perron root as the largest eigenvalue modulus, with the eigenvector taken
/// from the smallest singular direction of `M − rI`.
fn schur_estimate(m: &DMatrix<f64>) -> Option<PerronEstimate> {
    let n = m.nrows();
    let radius = m.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let svd = (m - DMatrix::identity(n, n) * radius).svd(false, true);
    let v_t = svd.v_t?;
    let smallest = svd.singular_values.imin();
    let mut vector: DVector<f64> = v_t.row(smallest).transpose().map(f64::abs);
    let total = vector.sum();
    if !(total > 0.0 && vector.iter().all(|&c| c > 0.0)) {
        return None;
    }
    vector /= total;
    let (lower, upper) = ratio_range(m, &vector);
    Some(PerronEstimate { radius, lower, upper, iterations: MAX_POWER_ITERATIONS, vector })
}
