//! Finite approximations of the attractor components `K_u = ⋃_{α(e)=u} S_e(K_{ω(e)})`.

use rayon::prelude::*;

use super::{GdSystem, SystemError};
use crate::digraph::{GraphError, Path, VertexId};
use crate::geometry::{Similarity, Vector};

/// One seed point per vertex, pushed through depth-`k` path maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Seeds(Vec<Vector>);

impl Seeds {
    pub fn from_points(points: Vec<Vector>) -> Self {
        Self(points)
    }

    /// Fixed point of the shortest cycle through each vertex. Such a point
    /// lies in `K_v`, so every sample point lies on the attractor.
    pub fn loop_fixed_points(system: &GdSystem) -> Result<Self, SystemError> {
        (0..system.vertex_count())
            .map(|v| {
                let cycle = system.graph().shortest_cycle(v)?.ok_or(SystemError::NoCycle { vertex: v })?;
                Ok(system.path_map(&cycle).expect("cycles are nonempty").fixed_point())
            })
            .collect::<Result<Vec<_>, SystemError>>()
            .map(Self)
    }

    pub fn points(&self) -> &[Vector] {
        &self.0
    }
}

/// Points `S_σ(seed_{ω(σ)})` for every `σ ∈ E^(k)_{u,·}`, ordered by address.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorApproximation {
    pub component: VertexId,
    pub depth: usize,
    pub points: Vec<Vector>,
    pub addresses: Vec<Path>,
}

impl GdSystem {
    /// Number of length-`k` paths leaving `u`, saturating.
    pub(crate) fn path_count(&self, u: VertexId, k: usize) -> u64 {
        let n = self.vertex_count();
        let counts = self.graph().count_matrix();
        let mut row = vec![0u64; n];
        row[u] = 1;
        for _ in 0..k {
            let mut next = vec![0u64; n];
            for (x, &c) in row.iter().enumerate() {
                for (y, &m) in counts[x].iter().enumerate() {
                    next[y] = next[y].saturating_add(c.saturating_mul(m));
                }
            }
            row = next;
        }
        row.into_iter().fold(0u64, u64::saturating_add)
    }

    pub fn approximate_attractor(
        &self,
        u: VertexId,
        depth: usize,
        seeds: &Seeds,
        cap: usize,
    ) -> Result<AttractorApproximation, SystemError> {
        self.graph().edges_from(u)?;
        if seeds.points().len() != self.vertex_count() {
            return Err(SystemError::SeedCount { vertices: self.vertex_count(), count: seeds.points().len() });
        }
        if self.path_count(u, depth) > cap as u64 {
            return Err(GraphError::CapExceeded { cap }.into());
        }
        if depth == 0 {
            return Ok(AttractorApproximation {
                component: u,
                depth,
                points: vec![seeds.points()[u].clone()],
                addresses: vec![Path::empty()],
            });
        }
        // Subtrees under distinct first edges are independent; collecting them
        // in edge order keeps the output lexicographic.
        let first_edges = self.graph().edges_from(u)?.to_vec();
        let chunks: Vec<Vec<(Path, Vector)>> = first_edges
            .par_iter()
            .map(|&e| {
                let mut out = Vec::new();
                let path = Path::from_edges_unchecked(vec![e]);
                self.expand(&path, self.map(e).clone(), depth - 1, seeds, &mut out);
                out
            })
            .collect();
        let (addresses, points) = chunks.into_iter().flatten().unzip();
        Ok(AttractorApproximation { component: u, depth, points, addresses })
    }

    fn expand(&self, path: &Path, map: Similarity, remaining: usize, seeds: &Seeds, out: &mut Vec<(Path, Vector)>) {
        let last = *path.edges().last().expect("nonempty");
        let at = self.graph().edges()[last].target;
        if remaining == 0 {
            out.push((path.clone(), map.map_point(&seeds.points()[at])));
            return;
        }
        for &e in self.graph().edges_from(at).expect("valid vertex") {
            self.expand(&path.extended(e), map.then_after(self.map(e)), remaining - 1, seeds, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::koch;
    use super::*;
    use crate::digraph::Digraph;
    use crate::geometry::{hausdorff_distance, OrthogonalMap};

    #[test]
    fn depth_zero_is_the_seed() {
        let sys = koch();
        let seeds = Seeds::loop_fixed_points(&sys).unwrap();
        let a = sys.approximate_attractor(0, 0, &seeds, 10).unwrap();
        assert_eq!(a.points, vec![seeds.points()[0].clone()]);
        assert!(a.addresses[0].is_empty());
    }

    #[test]
    fn koch_counts_and_distinctness() {
        let sys = koch();
        let seeds = Seeds::loop_fixed_points(&sys).unwrap();
        for k in 1..=4 {
            let a = sys.approximate_attractor(0, k, &seeds, 1 << 20).unwrap();
            assert_eq!(a.points.len(), 4usize.pow(k as u32));
            let mut sorted = a.addresses.clone();
            sorted.sort();
            assert_eq!(sorted, a.addresses);
            for i in 0..a.points.len() {
                for j in 0..i {
                    assert!((&a.points[i] - &a.points[j]).norm() > 1e-12);
                }
            }
        }
        assert!(matches!(
            sys.approximate_attractor(0, 5, &seeds, 1000),
            Err(SystemError::Graph(GraphError::CapExceeded { .. }))
        ));
    }

    #[test]
    fn nested_refinement_stays_within_cell_diameter() {
        let sys = koch();
        let seeds = Seeds::loop_fixed_points(&sys).unwrap();
        let diam = sys.diameter_bounds(&seeds).unwrap()[0];
        for k in 0..4 {
            let coarse = sys.approximate_attractor(0, k, &seeds, 1 << 20).unwrap();
            let fine = sys.approximate_attractor(0, k + 1, &seeds, 1 << 20).unwrap();
            let bound = diam * (1.0f64 / 3.0).powi(k as i32);
            for p in &coarse.points {
                let nearest = fine.points.iter().map(|f| (f - p).norm()).fold(f64::INFINITY, f64::min);
                assert!(nearest <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn edge_images_land_in_next_depth() {
        let sys = koch();
        let seeds = Seeds::loop_fixed_points(&sys).unwrap();
        let coarse = sys.approximate_attractor(0, 2, &seeds, 1 << 20).unwrap();
        let fine = sys.approximate_attractor(0, 3, &seeds, 1 << 20).unwrap();
        for map in sys.maps() {
            let image: Vec<Vector> = coarse.points.iter().map(|p| map.apply(p).unwrap()).collect();
            for p in &image {
                let nearest = fine.points.iter().map(|f| (f - p).norm()).fold(f64::INFINITY, f64::min);
                assert!(nearest <= 1e-10);
            }
        }
        assert!(hausdorff_distance(&coarse.points, &fine.points) < 0.5);
    }

    #[test]
    fn loop_seeds_need_cycles() {
        let s = Similarity::new(0.5, OrthogonalMap::identity(1), Vector::zeros(1)).unwrap();
        let sys = GdSystem::new(Digraph::new(2, [(0, 1), (1, 1)]).unwrap(), vec![s.clone(), s]).unwrap();
        assert_eq!(Seeds::loop_fixed_points(&sys), Err(SystemError::NoCycle { vertex: 0 }));
    }
}
