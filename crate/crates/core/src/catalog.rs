//! Built-in example multizippers, all planar with chains starting at the origin.

use std::collections::BTreeMap;

use crate::geometry::cos_sin_deg;
use crate::specfile::{EdgeSpec, OrthogonalSpec, SystemSpec, FORMAT_VERSION};

/// Apex angle of the default Cesàro curve.
pub const DEFAULT_CESARO_APEX_DEG: f64 = 85.0;

struct CellSpec {
    to: &'static str,
    ratio: f64,
    angle_deg: f64,
    reflect: bool,
    reversed: bool,
}

fn cell(to: &'static str, ratio: f64, angle_deg: f64) -> CellSpec {
    CellSpec { to, ratio, angle_deg, reflect: false, reversed: false }
}

/// Vertex name, node chain and one cell per consecutive node pair.
type Chain = (&'static str, Vec<[f64; 2]>, Vec<CellSpec>);

/// Every chain starts at the origin, so `S_e(0) = b_e` is the cell's first
/// node, or its last node when the cell is reversed.
fn zipper(name: &str, chains: Vec<Chain>) -> SystemSpec {
    let mut edges = Vec::new();
    let mut nodes = BTreeMap::new();
    let mut assignment = BTreeMap::new();
    for (vertex, chain, cells) in &chains {
        let mut ids = Vec::new();
        for (i, c) in cells.iter().enumerate() {
            let id = format!("{vertex}{}", i + 1);
            let start = if c.reversed { chain[i + 1] } else { chain[i] };
            edges.push(EdgeSpec {
                id: Some(id.clone()),
                from: vertex.to_string(),
                to: c.to.to_string(),
                ratio: c.ratio,
                orthogonal: OrthogonalSpec::Planar { angle_deg: c.angle_deg, reflect: c.reflect },
                translation: start.to_vec(),
                reversed: c.reversed,
            });
            ids.push(id);
        }
        nodes.insert(vertex.to_string(), chain.iter().map(|p| p.to_vec()).collect());
        assignment.insert(vertex.to_string(), ids);
    }
    SystemSpec {
        version: FORMAT_VERSION.to_string(),
        name: Some(name.to_string()),
        dimension: 2,
        vertices: chains.iter().map(|(v, _, _)| v.to_string()).collect(),
        edges,
        nodes: Some(nodes),
        assignment: Some(assignment),
    }
}

pub fn segment() -> SystemSpec {
    zipper(
        "segment",
        vec![("I", vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]], vec![cell("I", 0.5, 0.0), cell("I", 0.5, 0.0)])],
    )
}

pub fn koch() -> SystemSpec {
    let third = 1.0 / 3.0;
    let h = 3f64.sqrt() / 6.0;
    zipper(
        "koch",
        vec![(
            "K",
            vec![[0.0, 0.0], [third, 0.0], [0.5, h], [2.0 * third, 0.0], [1.0, 0.0]],
            vec![cell("K", third, 0.0), cell("K", third, 60.0), cell("K", third, -60.0), cell("K", third, 0.0)],
        )],
    )
}

pub fn levy() -> SystemSpec {
    let q = 0.5f64.sqrt();
    zipper("levy", vec![("L", vec![[0.0, 0.0], [0.5, 0.5], [1.0, 0.0]], vec![cell("L", q, 45.0), cell("L", q, -45.0)])])
}

/// Cesàro curve with the given apex angle: four copies of ratio
/// `r = 1/(2 + 2cos α)`, `α = (180° − θ)/2`, the middle two tilted by `±α`.
pub fn cesaro(apex_deg: f64) -> SystemSpec {
    let alpha = (180.0 - apex_deg) / 2.0;
    let (c, s) = cos_sin_deg(alpha);
    let r = 1.0 / (2.0 + 2.0 * c);
    zipper(
        "cesaro",
        vec![(
            "C",
            vec![[0.0, 0.0], [r, 0.0], [0.5, r * s], [1.0 - r, 0.0], [1.0, 0.0]],
            vec![cell("C", r, 0.0), cell("C", r, alpha), cell("C", r, -alpha), cell("C", r, 0.0)],
        )],
    )
}

/// Two collinear components, `B(1)·l = l` for `l = (1, 0.8)`, so `s₁ = 1`.
pub fn two_vertex() -> SystemSpec {
    zipper(
        "two_vertex",
        vec![
            ("A", vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]], vec![cell("B", 0.625, 0.0), cell("A", 0.5, 0.0)]),
            (
                "B",
                vec![[0.0, 0.0], [0.3, 0.0], [0.8, 0.0]],
                vec![
                    cell("A", 0.3, 0.0),
                    CellSpec { to: "B", ratio: 0.625, angle_deg: 180.0, reflect: false, reversed: true },
                ],
            ),
        ],
    )
}

/// Zigzag over the chord `(0,0) → (1,1)` whose orthogonal parts are the
/// identity and the reflection `diag(1, −1)`.
pub fn reflectzip() -> SystemSpec {
    let mirror = |ratio, reversed| CellSpec { to: "R", ratio, angle_deg: 0.0, reflect: true, reversed };
    zipper(
        "reflectzip",
        vec![(
            "R",
            vec![[0.0, 0.0], [0.3, -0.3], [0.8, 0.2], [0.5, 0.5], [1.0, 1.0]],
            vec![mirror(0.3, false), cell("R", 0.5, 0.0), mirror(0.3, true), cell("R", 0.5, 0.0)],
        )],
    )
}

pub fn skew_segment() -> SystemSpec {
    zipper(
        "skew_segment",
        vec![("S", vec![[0.0, 0.0], [0.3, 0.0], [1.0, 0.0]], vec![cell("S", 0.3, 0.0), cell("S", 0.7, 0.0)])],
    )
}

/// The fixed catalog, in listing order.
pub fn catalog() -> Vec<SystemSpec> {
    vec![segment(), koch(), levy(), cesaro(DEFAULT_CESARO_APEX_DEG), two_vertex(), reflectzip(), skew_segment()]
}
