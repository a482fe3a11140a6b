//! Contraction similarities, orthogonal maps and hyperplanes in `R^d`.
//!
//! A similarity is stored in affine form `x ↦ q·O·x + b`; its fixed point is
//! derived on demand by solving `(I − qO)·x₀ = b`. Affine form is closed under
//! composition, which is what path maps `S_σ = S_{e₁}∘…∘S_{e_k}` need.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// A point or direction in `R^d`.
pub type Vector = DVector<f64>;

/// Tolerance for `OᵀO = I` and `|det O| = 1` at construction.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;

/// Tolerance for `‖n‖ = 1` on hyperplane normals.
pub const UNIT_NORMAL_TOLERANCE: f64 = 1e-12;

// Deviations at or below this are rounding noise; leaving such matrices
// untouched keeps parse → emit → parse bit-exact.
const REORTHONORMALIZE_THRESHOLD: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("matrix is not orthogonal (max |OᵀO − I| = {deviation:e})")]
    NotOrthogonal { deviation: f64 },
    #[error("contraction ratio {ratio} is outside (0, 1)")]
    NotContraction { ratio: f64 },
    #[error("linear part is not a scaled orthogonal map (column norm {column_norm} vs ratio {ratio})")]
    NotSimilarity { ratio: f64, column_norm: f64 },
    #[error("normal has norm {norm}, expected a unit vector")]
    NotUnit { norm: f64 },
    #[error("source points coincide; the map is undetermined")]
    CoincidentPoints,
}

/// Exact `(cos, sin)` of an angle in degrees; multiples of 90° come out as
/// exact `0`/`±1` so that axis directions stay axis-aligned.
pub fn cos_sin_deg(degrees: f64) -> (f64, f64) {
    let reduced = degrees.rem_euclid(360.0);
    let quarter = reduced / 90.0;
    if quarter.fract() == 0.0 {
        return match quarter as u32 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let r = reduced.to_radians();
    (r.cos(), r.sin())
}

fn check_finite(v: &Vector) -> Result<(), GeometryError> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite)
    }
}

fn orthogonality_deviation(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    let d = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Modified Gram–Schmidt over the columns, run twice for stability.
fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone();
    let d = q.ncols();
    for _pass in 0..2 {
        for j in 0..d {
            for k in 0..j {
                let proj = q.column(k).dot(&q.column(j));
                let ck = q.column(k).clone_owned();
                q.column_mut(j).axpy(-proj, &ck, 1.0);
            }
            let norm = q.column(j).norm();
            q.column_mut(j).unscale_mut(norm);
        }
    }
    q
}

/// Orthogonal part `O` of a similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMap {
    matrix: DMatrix<f64>,
}

impl OrthogonalMap {
    /// Validates `MᵀM = I` and `|det M| = 1` within [`ORTHOGONALITY_TOLERANCE`],
    /// then re-orthonormalizes whatever drift remains.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, GeometryError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(GeometryError::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        if matrix.nrows() == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        if matrix.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let deviation = orthogonality_deviation(&matrix);
        let det_error = (matrix.determinant().abs() - 1.0).abs();
        if deviation > ORTHOGONALITY_TOLERANCE || det_error > ORTHOGONALITY_TOLERANCE {
            return Err(GeometryError::NotOrthogonal { deviation: deviation.max(det_error) });
        }
        let matrix = if deviation > REORTHONORMALIZE_THRESHOLD { orthonormalize(&matrix) } else { matrix };
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    /// Planar map `R(θ)·F` where `F = diag(1, −1)` when `reflect` is set,
    /// i.e. reflect across the x-axis first, then rotate by `angle_deg`.
    pub fn planar(angle_deg: f64, reflect: bool) -> Self {
        let (c, s) = cos_sin_deg(angle_deg);
        let flip = if reflect { -1.0 } else { 1.0 };
        Self { matrix: DMatrix::from_row_slice(2, 2, &[c, -s * flip, s, c * flip]) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.matrix * x
    }

    /// `self ∘ other`. Products of orthonormal matrices stay orthonormal up to
    /// rounding, so no re-validation happens here.
    pub fn compose(&self, other: &OrthogonalMap) -> OrthogonalMap {
        OrthogonalMap { matrix: &self.matrix * &other.matrix }
    }
}

/// Contraction similarity `x ↦ q·O·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Similarity {
    ratio: f64,
    orthogonal: OrthogonalMap,
    translation: Vector,
}

impl Similarity {
    pub fn new(ratio: f64, orthogonal: OrthogonalMap, translation: Vector) -> Result<Self, GeometryError> {
        if !(ratio.is_finite() && ratio > 0.0 && ratio < 1.0) {
            return Err(GeometryError::NotContraction { ratio });
        }
        if translation.len() != orthogonal.dim() {
            return Err(GeometryError::DimensionMismatch { expected: orthogonal.dim(), found: translation.len() });
        }
        check_finite(&translation)?;
        Ok(Self { ratio, orthogonal, translation })
    }

    /// Splits a linear part `A = q·O`: `q` is the `d`-th root of `|det A|`,
    /// cross-checked against every column norm.
    pub fn from_linear(linear: DMatrix<f64>, translation: Vector) -> Result<Self, GeometryError> {
        if linear.nrows() != linear.ncols() {
            return Err(GeometryError::NotSquare { rows: linear.nrows(), cols: linear.ncols() });
        }
        let d = linear.nrows();
        if d == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        let ratio = linear.determinant().abs().powf(1.0 / d as f64);
        if !(ratio.is_finite() && ratio > 0.0 && ratio < 1.0) {
            return Err(GeometryError::NotContraction { ratio });
        }
        for column in linear.column_iter() {
            let column_norm = column.norm();
            if (column_norm - ratio).abs() > ORTHOGONALITY_TOLERANCE * ratio.max(1.0) {
                return Err(GeometryError::NotSimilarity { ratio, column_norm });
            }
        }
        let orthogonal = OrthogonalMap::new(linear / ratio)?;
        Self::new(ratio, orthogonal, translation)
    }

    /// The planar similarity sending `from.0 ↦ to.0` and `from.1 ↦ to.1`,
    /// orientation-reversing when `reflect` is set.
    pub fn mapping_2d(from: (&Vector, &Vector), to: (&Vector, &Vector), reflect: bool) -> Result<Self, GeometryError> {
        for p in [from.0, from.1, to.0, to.1] {
            if p.len() != 2 {
                return Err(GeometryError::DimensionMismatch { expected: 2, found: p.len() });
            }
            check_finite(p)?;
        }
        let src = from.1 - from.0;
        let dst = to.1 - to.0;
        let src_len = src.norm();
        if src_len == 0.0 {
            return Err(GeometryError::CoincidentPoints);
        }
        let ratio = dst.norm() / src_len;
        let src_angle = src[1].atan2(src[0]);
        let dst_angle = dst[1].atan2(dst[0]);
        // R(φ)F·src must point along dst; F negates the source angle.
        let angle = if reflect { dst_angle + src_angle } else { dst_angle - src_angle };
        let (c, s) = (angle.cos(), angle.sin());
        let flip = if reflect { -1.0 } else { 1.0 };
        let orthogonal = OrthogonalMap::new(DMatrix::from_row_slice(2, 2, &[c, -s * flip, s, c * flip]))?;
        let translation = to.0 - orthogonal.apply(from.0) * ratio;
        Self::new(ratio, orthogonal, translation)
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn orthogonal(&self) -> &OrthogonalMap {
        &self.orthogonal
    }

    pub fn translation(&self) -> &Vector {
        &self.translation
    }

    /// `q·O` as a matrix.
    pub fn linear_part(&self) -> DMatrix<f64> {
        self.orthogonal.matrix() * self.ratio
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector, GeometryError> {
        if x.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(self.map_point(x))
    }

    /// Unchecked [`Similarity::apply`] for callers that already matched dimensions.
    pub(crate) fn map_point(&self, x: &Vector) -> Vector {
        let mut y = self.orthogonal.apply(x) * self.ratio;
        y += &self.translation;
        y
    }

    /// `self ∘ other`: ratio `q₁q₂`, orthogonal part `O₁O₂`.
    pub fn compose(&self, other: &Similarity) -> Result<Similarity, GeometryError> {
        if other.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(self.then_after(other))
    }

    pub(crate) fn then_after(&self, other: &Similarity) -> Similarity {
        Similarity {
            ratio: self.ratio * other.ratio,
            orthogonal: self.orthogonal.compose(&other.orthogonal),
            translation: self.map_point(&other.translation),
        }
    }

    /// Solves `(I − qO)·x₀ = b`; `q < 1` keeps the system nonsingular.
    pub fn fixed_point(&self) -> Vector {
        let d = self.dim();
        let system = DMatrix::identity(d, d) - self.linear_part();
        system.lu().solve(&self.translation).expect("I - qO is invertible for q < 1")
    }
}

/// Hyperplane `{x : ⟨n, x⟩ = c}` with unit normal `n`.
///
/// `V⁺` is the open side where `⟨n, x⟩ > c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    normal: Vector,
    offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Vector, offset: f64) -> Result<Self, GeometryError> {
        check_finite(&normal)?;
        if !offset.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let norm = normal.norm();
        if (norm - 1.0).abs() > UNIT_NORMAL_TOLERANCE {
            return Err(GeometryError::NotUnit { norm });
        }
        Ok(Self { normal, offset })
    }

    /// The parallel copy `σ(x) = σ + x` of the hyperplane through the origin with this normal.
    pub fn through(normal: Vector, point: &Vector) -> Result<Self, GeometryError> {
        if normal.len() != point.len() {
            return Err(GeometryError::DimensionMismatch { expected: normal.len(), found: point.len() });
        }
        check_finite(point)?;
        let offset = normal.dot(point);
        Self::new(normal, offset)
    }

    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `⟨n, x⟩ − c`: positive in `V⁺`, negative in `V⁻`.
    pub fn signed_distance(&self, x: &Vector) -> Result<f64, GeometryError> {
        if x.len() != self.normal.len() {
            return Err(GeometryError::DimensionMismatch { expected: self.normal.len(), found: x.len() });
        }
        Ok(self.normal.dot(x) - self.offset)
    }
}

/// Brute-force Hausdorff distance between two finite point sets.
pub fn hausdorff_distance(a: &[Vector], b: &[Vector]) -> f64 {
    fn directed(from: &[Vector], to: &[Vector]) -> f64 {
        from.iter().map(|p| to.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    }
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::from_column_slice(c)
    }

    fn sim(q: f64, angle: f64, b: &[f64]) -> Similarity {
        Similarity::new(q, OrthogonalMap::planar(angle, false), v(b)).unwrap()
    }

    #[test]
    fn apply_examples() {
        let s = sim(0.5, 0.0, &[0.0, 0.0]);
        assert_eq!(s.apply(&v(&[1.0, 0.0])).unwrap(), v(&[0.5, 0.0]));
        let s = sim(0.5, 0.0, &[0.5, 0.0]);
        assert_eq!(s.apply(&v(&[1.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
        // rotation by 60° of (1/3, 0): (1/6, √3/6); plus b = (1/3, 0)
        let s = sim(1.0 / 3.0, 60.0, &[1.0 / 3.0, 0.0]);
        let y = s.apply(&v(&[1.0, 0.0])).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15);
        assert!((y[1] - 3f64.sqrt() / 6.0).abs() < 1e-15);
    }

    #[test]
    fn apply_rejects_dimension_mismatch() {
        let s = sim(0.5, 0.0, &[0.0, 0.0]);
        assert!(matches!(
            s.apply(&v(&[1.0, 2.0, 3.0])),
            Err(GeometryError::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn compose_examples() {
        let s = sim(0.5, 0.0, &[0.0, 0.0]);
        let ss = s.compose(&s).unwrap();
        assert_eq!(ss.ratio(), 0.25);
        assert_eq!(ss.orthogonal().matrix(), &DMatrix::identity(2, 2));
        assert_eq!(ss.translation(), &v(&[0.0, 0.0]));

        let up = sim(1.0 / 3.0, 60.0, &[1.0 / 3.0, 0.0]);
        let down = sim(1.0 / 3.0, -60.0, &[0.5, 3f64.sqrt() / 6.0]);
        let c = up.compose(&down).unwrap();
        assert!((c.ratio() - 1.0 / 9.0).abs() < 1e-16);
        assert!((c.orthogonal().matrix() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn fixed_point_examples() {
        assert_eq!(sim(0.5, 0.0, &[0.0, 0.0]).fixed_point(), v(&[0.0, 0.0]));
        let x = sim(0.5, 0.0, &[0.5, 0.0]).fixed_point();
        assert!((x - v(&[1.0, 0.0])).norm() < 1e-15);
        let s = sim(1.0 / 3.0, 60.0, &[1.0 / 3.0, 0.0]);
        let x0 = s.fixed_point();
        assert!((s.apply(&x0).unwrap() - &x0).norm() < 1e-12);
    }

    #[test]
    fn signed_distance_examples() {
        let h = Hyperplane::new(v(&[0.0, 1.0]), 0.0).unwrap();
        assert_eq!(h.signed_distance(&v(&[5.0, 1.0])).unwrap(), 1.0);
        assert_eq!(h.signed_distance(&v(&[5.0, 0.0])).unwrap(), 0.0);
        let r = 0.5f64.sqrt();
        let h = Hyperplane::new(v(&[r, r]), 0.0).unwrap();
        assert!((h.signed_distance(&v(&[1.0, 1.0])).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hyperplane_rejects_non_unit_normal() {
        assert!(matches!(Hyperplane::new(v(&[1.0, 1.0]), 0.0), Err(GeometryError::NotUnit { .. })));
        let h = Hyperplane::through(v(&[1.0, 0.0]), &v(&[2.0, 7.0])).unwrap();
        assert_eq!(h.offset(), 2.0);
    }

    #[test]
    fn constructor_errors() {
        let o = OrthogonalMap::identity(2);
        assert!(matches!(Similarity::new(1.0, o.clone(), v(&[0.0, 0.0])), Err(GeometryError::NotContraction { .. })));
        assert!(matches!(Similarity::new(0.0, o.clone(), v(&[0.0, 0.0])), Err(GeometryError::NotContraction { .. })));
        assert!(matches!(Similarity::new(0.5, o, v(&[0.0])), Err(GeometryError::DimensionMismatch { .. })));
        let shear = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(OrthogonalMap::new(shear), Err(GeometryError::NotOrthogonal { .. })));
    }

    #[test]
    fn orthogonal_drift_within_tolerance_is_repaired() {
        let mut m = OrthogonalMap::planar(30.0, false).matrix().clone();
        m[(0, 0)] += 5e-11;
        let o = OrthogonalMap::new(m).unwrap();
        assert!(orthogonality_deviation(o.matrix()) < 1e-15);
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = 1e-6;
        assert!(OrthogonalMap::new(m).is_err());
    }

    #[test]
    fn planar_quarter_turns_are_exact() {
        let o = OrthogonalMap::planar(90.0, false);
        assert_eq!(o.apply(&v(&[1.0, 0.0])), v(&[0.0, 1.0]));
        let r = OrthogonalMap::planar(0.0, true);
        assert_eq!(r.apply(&v(&[0.3, 0.7])), v(&[0.3, -0.7]));
        assert_eq!(r.determinant(), -1.0);
    }

    #[test]
    fn from_linear_splits_ratio() {
        let s = sim(0.25, 40.0, &[1.0, 2.0]);
        let back = Similarity::from_linear(s.linear_part(), s.translation().clone()).unwrap();
        assert!((back.ratio() - 0.25).abs() < 1e-15);
        assert!((back.orthogonal().matrix() - s.orthogonal().matrix()).amax() < 1e-14);
        let skewed = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]);
        assert!(matches!(Similarity::from_linear(skewed, v(&[0.0, 0.0])), Err(GeometryError::NotSimilarity { .. })));
    }

    #[test]
    fn mapping_2d_hits_targets() {
        let (a, b) = (v(&[0.0, 0.0]), v(&[1.0, 0.0]));
        let (c, d) = (v(&[0.3, -0.3]), v(&[0.8, 0.2]));
        for reflect in [false, true] {
            let s = Similarity::mapping_2d((&a, &b), (&c, &d), reflect).unwrap();
            assert!((s.apply(&a).unwrap() - &c).norm() < 1e-15);
            assert!((s.apply(&b).unwrap() - &d).norm() < 1e-15);
            let det = s.orthogonal().determinant();
            assert!((det - if reflect { -1.0 } else { 1.0 }).abs() < 1e-15);
        }
        assert_eq!(Similarity::mapping_2d((&a, &a), (&c, &d), false), Err(GeometryError::CoincidentPoints));
    }

    #[test]
    fn hausdorff_of_shifted_sets() {
        let a = vec![v(&[0.0, 0.0]), v(&[1.0, 0.0])];
        let b = vec![v(&[0.0, 0.5]), v(&[1.0, 0.0])];
        assert_eq!(hausdorff_distance(&a, &b), 0.5);
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
    }

    fn arb_similarity() -> impl Strategy<Value = Similarity> {
        (0.01f64..0.99, -180.0f64..180.0, any::<bool>(), -5.0f64..5.0, -5.0f64..5.0).prop_map(
            |(q, angle, reflect, bx, by)| {
                Similarity::new(q, OrthogonalMap::planar(angle, reflect), v(&[bx, by])).unwrap()
            },
        )
    }

    fn arb_point() -> impl Strategy<Value = Vector> {
        (-10.0f64..10.0, -10.0f64..10.0).prop_map(|(x, y)| v(&[x, y]))
    }

    proptest! {
        #[test]
        fn orthogonal_part_is_isometry(s in arb_similarity(), x in arb_point()) {
            let y = s.orthogonal().apply(&x);
            prop_assert!((y.norm() - x.norm()).abs() <= 1e-10 * x.norm().max(1.0));
        }

        #[test]
        fn contraction_is_exact(s in arb_similarity(), x in arb_point(), y in arb_point()) {
            let lhs = (s.apply(&x).unwrap() - s.apply(&y).unwrap()).norm();
            let rhs = s.ratio() * (x - y).norm();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300) + 1e-14);
        }

        #[test]
        fn fixed_point_is_fixed(s in arb_similarity()) {
            let x0 = s.fixed_point();
            let residual = (s.apply(&x0).unwrap() - &x0).norm();
            prop_assert!(residual <= 1e-12 * (1.0 + x0.norm()));
        }

        #[test]
        fn composition_multiplies_ratios(a in arb_similarity(), b in arb_similarity(), x in arb_point()) {
            let c = a.compose(&b).unwrap();
            prop_assert!((c.ratio() - a.ratio() * b.ratio()).abs() <= 1e-15);
            let direct = a.apply(&b.apply(&x).unwrap()).unwrap();
            prop_assert!((c.apply(&x).unwrap() - direct).norm() <= 1e-10);
        }

        #[test]
        fn composition_is_associative(a in arb_similarity(), b in arb_similarity(), c in arb_similarity()) {
            let left = a.compose(&b).unwrap().compose(&c).unwrap();
            let right = a.compose(&b.compose(&c).unwrap()).unwrap();
            prop_assert!((left.ratio() - right.ratio()).abs() <= 1e-10);
            prop_assert!((left.orthogonal().matrix() - right.orthogonal().matrix()).amax() <= 1e-10);
            prop_assert!((left.translation() - right.translation()).amax() <= 1e-10);
        }
    }
}
