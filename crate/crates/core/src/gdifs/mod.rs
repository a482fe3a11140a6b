//! Graph-directed systems of contraction similarities.
//!
//! A system assigns a similarity `S_e : X_{ω(e)} → X_{α(e)}` to every edge of
//! its structural digraph. Its similarity dimension is the unique `s₁ ≥ 0` with
//! `Φ(s₁) = r(B(s₁)) = 1`, where `B_uv(s) = Σ_{e∈E_uv} q_e^s`.

mod attractor;
pub mod spectral;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::digraph::{Digraph, EdgeId, GraphError, Path, VertexId};
use crate::geometry::{GeometryError, Similarity};

pub use attractor::{AttractorApproximation, Seeds};
pub use spectral::{collatz_wielandt_lower, collatz_wielandt_upper, spectral_radius, PerronEstimate, SpectralError};

/// Required accuracy of `Φ(s₁) = 1`.
pub const DIMENSION_TOLERANCE: f64 = 1e-10;

/// Iteration cap for the dimension bisection.
pub const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("{maps} maps supplied for {edges} edges")]
    MapCountMismatch { edges: usize, maps: usize },
    #[error("map of edge {edge} has dimension {found}, expected {expected}")]
    MapDimension { edge: EdgeId, expected: usize, found: usize },
    #[error("vertex {vertex} has no outgoing edge")]
    NoOutgoingEdge { vertex: VertexId },
    #[error("structural graph is not strongly connected: no path from vertex {from} to vertex {to}")]
    NotRegular { from: VertexId, to: VertexId },
    #[error("exponent {s} must be finite and nonnegative")]
    InvalidExponent { s: f64 },
    #[error("Φ does not bracket 1: Φ(0) = {phi_at_zero}, Φ({s_max}) = {phi_at_max}")]
    BracketFailure { phi_at_zero: f64, s_max: f64, phi_at_max: f64 },
    #[error("bisection ended with |Φ(s) − 1| = {residual:e}")]
    DimensionNotConverged { residual: f64 },
    #[error("vertex {vertex} lies on no cycle, so it has no loop fixed point")]
    NoCycle { vertex: VertexId },
    #[error("{count} seeds supplied for {vertices} vertices")]
    SeedCount { vertices: usize, count: usize },
}

/// Result of [`GdSystem::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub regular: bool,
    /// Ordered pair with no connecting path, when the graph is not strongly connected.
    pub unreachable: Option<(VertexId, VertexId)>,
    pub out_degrees: Vec<usize>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl ValidationReport {
    /// Accepted iff regular; ratios are already in `(0, 1)` by construction.
    pub fn accepted(&self) -> bool {
        self.regular && self.min_ratio > 0.0 && self.max_ratio < 1.0
    }
}

/// `B(s)` with the exponent it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMatrix {
    entries: DMatrix<f64>,
    exponent: f64,
}

impl RatioMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn spectral_radius(&self) -> Result<f64, SpectralError> {
        spectral_radius(&self.entries).map(|e| e.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionResult {
    pub s1: f64,
    pub phi_at_s1: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdSystem {
    graph: Digraph,
    maps: Vec<Similarity>,
    dim: usize,
}

impl GdSystem {
    /// `maps[e]` is the similarity of edge `e`. Every vertex needs an outgoing
    /// edge; regularity is checked separately by [`GdSystem::validate`].
    pub fn new(graph: Digraph, maps: Vec<Similarity>) -> Result<Self, SystemError> {
        if maps.len() != graph.edge_count() {
            return Err(SystemError::MapCountMismatch { edges: graph.edge_count(), maps: maps.len() });
        }
        let Some(first) = maps.first() else {
            return Err(SystemError::NoOutgoingEdge { vertex: 0 });
        };
        let dim = first.dim();
        if let Some((edge, map)) = maps.iter().enumerate().find(|(_, m)| m.dim() != dim) {
            return Err(SystemError::MapDimension { edge, expected: dim, found: map.dim() });
        }
        if let Some(vertex) = graph.out_degrees().iter().position(|&d| d == 0) {
            return Err(SystemError::NoOutgoingEdge { vertex });
        }
        Ok(Self { graph, maps, dim })
    }

    pub fn graph(&self) -> &Digraph {
        &self.graph
    }

    pub fn maps(&self) -> &[Similarity] {
        &self.maps
    }

    pub fn map(&self, e: EdgeId) -> &Similarity {
        &self.maps[e]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// `q_e = Lip(S_e)` per edge.
    pub fn ratios(&self) -> Vec<f64> {
        self.maps.iter().map(Similarity::ratio).collect()
    }

    pub fn validate(&self) -> ValidationReport {
        let unreachable = self.graph.unreachable_pair();
        let ratios = self.ratios();
        ValidationReport {
            regular: unreachable.is_none(),
            unreachable,
            out_degrees: self.graph.out_degrees(),
            min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
            max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        }
    }

    /// [`GdSystem::validate`] as a `Result`, carrying the unreachable pair.
    pub fn ensure_regular(&self) -> Result<(), SystemError> {
        match self.graph.unreachable_pair() {
            Some((from, to)) => Err(SystemError::NotRegular { from, to }),
            None => Ok(()),
        }
    }

    pub fn ratio_matrix(&self, s: f64) -> Result<RatioMatrix, SystemError> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(SystemError::InvalidExponent { s });
        }
        let n = self.vertex_count();
        let mut entries = DMatrix::zeros(n, n);
        for (edge, map) in self.graph.edges().iter().zip(&self.maps) {
            entries[(edge.source, edge.target)] += map.ratio().powf(s);
        }
        Ok(RatioMatrix { entries, exponent: s })
    }

    /// `Φ(s) = r(B(s))`.
    pub fn phi(&self, s: f64) -> Result<f64, SystemError> {
        Ok(self.ratio_matrix(s)?.spectral_radius()?)
    }

    /// Bisection for `Φ(s₁) = 1` on `[0, s_max]`, `s_max = ln(#E)/ln(1/q_max) + 1`.
    ///
    /// `Φ` is strictly decreasing on regular systems; at `s_max` every row sum
    /// of `B` is below one, so the bracket always closes.
    pub fn similarity_dimension(&self) -> Result<DimensionResult, SystemError> {
        self.ensure_regular()?;
        let q_max = self.ratios().into_iter().fold(0.0, f64::max);
        let s_max = (self.edge_count() as f64).ln() / (1.0 / q_max).ln() + 1.0;
        let phi_at_zero = self.phi(0.0)?;
        let phi_at_max = self.phi(s_max)?;
        if !(phi_at_zero >= 1.0 && phi_at_max <= 1.0) {
            return Err(SystemError::BracketFailure { phi_at_zero, s_max, phi_at_max });
        }
        let (mut lo, mut hi) = (0.0_f64, s_max);
        let width_goal = 1e-14 * s_max.max(1.0);
        let mut iterations = 0;
        while iterations < MAX_BISECTION_STEPS && hi - lo > width_goal {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let phi = self.phi(mid)?;
            if phi > 1.0 {
                lo = mid;
            } else if phi < 1.0 {
                hi = mid;
            } else {
                lo = mid;
                hi = mid;
            }
        }
        let s1 = 0.5 * (lo + hi);
        let phi_at_s1 = self.phi(s1)?;
        if (phi_at_s1 - 1.0).abs() > DIMENSION_TOLERANCE {
            return Err(SystemError::DimensionNotConverged { residual: (phi_at_s1 - 1.0).abs() });
        }
        Ok(DimensionResult { s1, phi_at_s1, iterations, bracket: (lo, hi) })
    }

    /// `S_σ = S_{e₁}∘…∘S_{e_k}`; the empty path gives `None`.
    pub fn path_map(&self, path: &Path) -> Option<Similarity> {
        let (&first, rest) = path.edges().split_first()?;
        Some(rest.iter().fold(self.maps[first].clone(), |acc, &e| acc.then_after(&self.maps[e])))
    }

    /// The system whose edges are all length-`k` paths of this one, with
    /// composed maps. Its `Φ` is `Φ^k`, so the dimension is unchanged.
    pub fn path_system(&self, k: usize, cap: usize) -> Result<GdSystem, SystemError> {
        let mut edges = Vec::new();
        let mut maps = Vec::new();
        for u in 0..self.vertex_count() {
            for path in self.graph.paths_from(u, k, cap)? {
                edges.push((u, self.graph.path_end(u, &path)));
                maps.push(self.path_map(&path).expect("k ≥ 1"));
                if maps.len() > cap {
                    return Err(GraphError::CapExceeded { cap }.into());
                }
            }
        }
        GdSystem::new(Digraph::new(self.vertex_count(), edges)?, maps)
    }

    /// Upper bounds on `diam K_u`, from balls `B(c_u, R_u)` that every `S_e`
    /// maps into `B(c_{α(e)}, R_{α(e)})`: `R_u ≥ q_e·R_{ω(e)} + ‖S_e(c_{ω(e)}) − c_u‖`.
    pub fn diameter_bounds(&self, centers: &Seeds) -> Result<Vec<f64>, SystemError> {
        let centers = centers.points();
        if centers.len() != self.vertex_count() {
            return Err(SystemError::SeedCount { vertices: self.vertex_count(), count: centers.len() });
        }
        let offsets: Vec<f64> = self
            .graph
            .edges()
            .iter()
            .zip(&self.maps)
            .map(|(e, s)| (s.map_point(&centers[e.target]) - &centers[e.source]).norm())
            .collect();
        let q_max = self.ratios().into_iter().fold(0.0, f64::max);
        let mut radii = vec![0.0; self.vertex_count()];
        let mut step = f64::INFINITY;
        for _ in 0..100_000 {
            let mut next = vec![0.0_f64; radii.len()];
            for ((e, s), off) in self.graph.edges().iter().zip(&self.maps).zip(&offsets) {
                next[e.source] = next[e.source].max(s.ratio() * radii[e.target] + off);
            }
            step = next.iter().zip(&radii).map(|(a, b)| a - b).fold(0.0, f64::max);
            radii = next;
            let scale = radii.iter().copied().fold(0.0, f64::max);
            if step <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        // The iteration climbs monotonically; the geometric tail closes the gap.
        let tail = step * q_max / (1.0 - q_max);
        Ok(radii.into_iter().map(|r| 2.0 * (r + tail)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{OrthogonalMap, Vector};

    pub(crate) fn planar(q: f64, angle: f64, b: [f64; 2]) -> Similarity {
        Similarity::new(q, OrthogonalMap::planar(angle, false), Vector::from_column_slice(&b)).unwrap()
    }

    pub(crate) fn koch() -> GdSystem {
        let h = 3f64.sqrt() / 6.0;
        let maps = vec![
            planar(1.0 / 3.0, 0.0, [0.0, 0.0]),
            planar(1.0 / 3.0, 60.0, [1.0 / 3.0, 0.0]),
            planar(1.0 / 3.0, -60.0, [0.5, h]),
            planar(1.0 / 3.0, 0.0, [2.0 / 3.0, 0.0]),
        ];
        GdSystem::new(Digraph::new(1, vec![(0, 0); 4]).unwrap(), maps).unwrap()
    }

    fn segment() -> GdSystem {
        let maps = vec![planar(0.5, 0.0, [0.0, 0.0]), planar(0.5, 0.0, [0.5, 0.0])];
        GdSystem::new(Digraph::new(1, [(0, 0), (0, 0)]).unwrap(), maps).unwrap()
    }

    fn two_vertex() -> GdSystem {
        let maps = vec![
            planar(0.5, 0.0, [0.0, 0.0]),
            planar(0.5, 0.0, [0.5, 0.0]),
            planar(0.5, 0.0, [0.0, 0.0]),
            planar(0.5, 0.0, [0.5, 0.0]),
        ];
        let g = Digraph::new(2, [(0, 1), (0, 1), (1, 0), (1, 0)]).unwrap();
        GdSystem::new(g, maps).unwrap()
    }

    fn two_vertex_with_loops() -> GdSystem {
        let maps = vec![
            planar(0.5, 0.0, [0.0, 0.0]),
            planar(0.4, 90.0, [0.5, 0.0]),
            planar(0.6, 0.0, [0.0, 0.0]),
            planar(0.3, 180.0, [0.5, 0.0]),
        ];
        let g = Digraph::new(2, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        GdSystem::new(g, maps).unwrap()
    }

    #[test]
    fn validate_examples() {
        let report = koch().validate();
        assert!(report.accepted());
        assert_eq!(report.out_degrees, vec![4]);

        let g = Digraph::new(2, [(0, 1), (0, 1), (1, 1)]).unwrap();
        let maps = vec![planar(0.5, 0.0, [0.0, 0.0]); 3];
        let sys = GdSystem::new(g, maps).unwrap();
        let report = sys.validate();
        assert!(!report.accepted());
        assert_eq!(report.unreachable, Some((1, 0)));
        assert_eq!(sys.ensure_regular(), Err(SystemError::NotRegular { from: 1, to: 0 }));
        assert!(matches!(sys.similarity_dimension(), Err(SystemError::NotRegular { .. })));
    }

    #[test]
    fn ratio_one_is_rejected_at_construction() {
        let err = Similarity::new(1.0, OrthogonalMap::identity(2), Vector::zeros(2)).unwrap_err();
        assert!(matches!(err, GeometryError::NotContraction { ratio } if ratio == 1.0));
    }

    #[test]
    fn construction_errors() {
        let g = Digraph::new(2, [(0, 0)]).unwrap();
        assert_eq!(
            GdSystem::new(g, vec![planar(0.5, 0.0, [0.0, 0.0])]),
            Err(SystemError::NoOutgoingEdge { vertex: 1 })
        );
        let g = Digraph::new(1, [(0, 0), (0, 0)]).unwrap();
        assert!(matches!(
            GdSystem::new(g, vec![planar(0.5, 0.0, [0.0, 0.0])]),
            Err(SystemError::MapCountMismatch { edges: 2, maps: 1 })
        ));
    }

    #[test]
    fn ratio_matrix_examples() {
        let b1 = koch().ratio_matrix(1.0).unwrap();
        assert!((b1.entries()[(0, 0)] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(koch().ratio_matrix(0.0).unwrap().entries()[(0, 0)], 4.0);
        let b = two_vertex().ratio_matrix(1.0).unwrap();
        assert_eq!(b.entries(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(matches!(koch().ratio_matrix(-1.0), Err(SystemError::InvalidExponent { .. })));
    }

    #[test]
    fn dimension_examples() {
        let d = koch().similarity_dimension().unwrap();
        assert!((d.s1 - 4f64.ln() / 3f64.ln()).abs() < 1e-9);
        assert!((d.phi_at_s1 - 1.0).abs() <= DIMENSION_TOLERANCE);
        assert!(d.bracket.0 <= d.s1 && d.s1 <= d.bracket.1);
        assert!((segment().similarity_dimension().unwrap().s1 - 1.0).abs() < 1e-10);
        assert!((two_vertex().similarity_dimension().unwrap().s1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phi_is_strictly_decreasing() {
        for sys in [koch(), segment(), two_vertex(), two_vertex_with_loops()] {
            let values: Vec<f64> = (0..50).map(|i| sys.phi(0.1 * i as f64).unwrap()).collect();
            assert!(values.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn dimension_survives_path_refinement() {
        // The periodic two-cycle would split into two components when squared.
        for sys in [koch(), two_vertex_with_loops()] {
            let s1 = sys.similarity_dimension().unwrap().s1;
            let squared = sys.path_system(2, 1000).unwrap();
            assert!((squared.similarity_dimension().unwrap().s1 - s1).abs() < 1e-9);
            // one vertex: Φ² pointwise
            if sys.vertex_count() == 1 {
                for s in [0.3, 1.0, 1.7] {
                    assert!((squared.phi(s).unwrap() - sys.phi(s).unwrap().powi(2)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn koch_diameter_bound_is_tight() {
        let centers = Seeds::from_points(vec![Vector::from_column_slice(&[0.5, 0.0])]);
        let d = koch().diameter_bounds(&centers).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-12);
    }
}
