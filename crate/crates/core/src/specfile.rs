//! JSON system specs, format tag `multizip/1`.
//!
//! Vertices and edges are referenced by name. A spec with `nodes` describes a
//! multizipper; without them it is a bare graph-directed system.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digraph::{Digraph, EdgeId, VertexId};
use crate::gdifs::GdSystem;
use crate::geometry::{GeometryError, OrthogonalMap, Similarity, Vector};
use crate::multizipper::{Multizipper, ZipperError};

pub const FORMAT_VERSION: &str = "multizip/1";

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("unsupported format version {found:?}, expected {FORMAT_VERSION:?}")]
    Version { found: String },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Zipper(#[from] ZipperError),
}

impl From<serde_json::Error> for SpecError {
    fn from(e: serde_json::Error) -> Self {
        SpecError::Json { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

fn field_error(field: impl Into<String>, message: impl ToString) -> SpecError {
    SpecError::Field { field: field.into(), message: message.to_string() }
}

/// Orthogonal part: explicit rows, or an angle and reflection flag in 2D
/// meaning `R(θ)` or `R(θ)·diag(1, −1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrthogonalSpec {
    Planar {
        angle_deg: f64,
        #[serde(default)]
        reflect: bool,
    },
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub from: String,
    pub to: String,
    pub ratio: f64,
    pub orthogonal: OrthogonalSpec,
    pub translation: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<BTreeMap<String, Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<BTreeMap<String, Vec<String>>>,
}

/// A parsed spec with its name tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub system: GdSystem,
    pub zipper: Option<Multizipper>,
    pub vertex_names: Vec<String>,
    pub edge_names: Vec<String>,
}

impl Loaded {
    pub fn vertex(&self, name: &str) -> Option<VertexId> {
        self.vertex_names.iter().position(|n| n == name)
    }
}

impl SystemSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: SystemSpec = serde_json::from_str(text)?;
        if spec.version != FORMAT_VERSION {
            return Err(SpecError::Version { found: spec.version });
        }
        Ok(spec)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("specs serialize");
        text.push('\n');
        text
    }

    /// Edge ids, defaulting to `e1, e2, …` by declaration position.
    pub fn edge_names(&self) -> Vec<String> {
        self.edges.iter().enumerate().map(|(i, e)| e.id.clone().unwrap_or_else(|| format!("e{}", i + 1))).collect()
    }

    pub fn load(&self) -> Result<Loaded, SpecError> {
        let d = self.dimension;
        if d == 0 {
            return Err(field_error("dimension", "must be at least 1"));
        }
        let vertex_index = index_names(&self.vertices, "vertices")?;
        let edge_names = self.edge_names();
        let edge_index = index_names(&edge_names, "edges[].id")?;
        let vertex = |field: String, name: &str| {
            vertex_index.get(name).copied().ok_or_else(|| field_error(field, format!("unknown vertex {name:?}")))
        };

        let mut pairs = Vec::with_capacity(self.edges.len());
        let mut maps = Vec::with_capacity(self.edges.len());
        for (i, e) in self.edges.iter().enumerate() {
            let at = |f: &str| format!("edges[{i}].{f}");
            pairs.push((vertex(at("from"), &e.from)?, vertex(at("to"), &e.to)?));
            let orthogonal = build_orthogonal(&e.orthogonal, d).map_err(|m| field_error(at("orthogonal"), m))?;
            if e.translation.len() != d {
                return Err(field_error(
                    at("translation"),
                    format!("has {} coordinates, expected {d}", e.translation.len()),
                ));
            }
            let map = Similarity::new(e.ratio, orthogonal, Vector::from_vec(e.translation.clone())).map_err(|m| {
                let f = if matches!(m, GeometryError::NotContraction { .. }) { "ratio" } else { "translation" };
                field_error(at(f), m)
            })?;
            maps.push(map);
        }
        let graph = Digraph::new(self.vertices.len(), pairs).map_err(|m| field_error("vertices", m))?;
        let system = GdSystem::new(graph, maps).map_err(|m| field_error("edges", m))?;

        let zipper = match &self.nodes {
            None => {
                if self.assignment.is_some() {
                    return Err(field_error("assignment", "given without nodes"));
                }
                None
            }
            Some(node_map) => {
                let mut nodes = Vec::with_capacity(self.vertices.len());
                for name in &self.vertices {
                    let chain =
                        node_map.get(name).ok_or_else(|| field_error(format!("nodes.{name}"), "missing node chain"))?;
                    nodes.push(chain.iter().map(|p| Vector::from_vec(p.clone())).collect());
                }
                if let Some(extra) = node_map.keys().find(|k| !vertex_index.contains_key(k.as_str())) {
                    return Err(field_error(format!("nodes.{extra}"), "unknown vertex"));
                }
                let assignment = self.assignment_ids(&vertex_index, &edge_index)?;
                let reversed = self.edges.iter().map(|e| e.reversed).collect();
                Some(Multizipper::new(system.clone(), nodes, assignment, reversed)?)
            }
        };
        Ok(Loaded { system, zipper, vertex_names: self.vertices.clone(), edge_names })
    }

    fn assignment_ids(
        &self,
        vertex_index: &HashMap<&str, VertexId>,
        edge_index: &HashMap<&str, EdgeId>,
    ) -> Result<Vec<Vec<EdgeId>>, SpecError> {
        match &self.assignment {
            None => Ok((0..self.vertices.len())
                .map(|u| {
                    self.edges
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| vertex_index.get(e.from.as_str()) == Some(&u))
                        .map(|(i, _)| i)
                        .collect()
                })
                .collect()),
            Some(table) => {
                if let Some(extra) = table.keys().find(|k| !vertex_index.contains_key(k.as_str())) {
                    return Err(field_error(format!("assignment.{extra}"), "unknown vertex"));
                }
                self.vertices
                    .iter()
                    .map(|name| {
                        let ids =
                            table.get(name).ok_or_else(|| field_error(format!("assignment.{name}"), "missing"))?;
                        ids.iter()
                            .map(|id| {
                                edge_index.get(id.as_str()).copied().ok_or_else(|| {
                                    field_error(format!("assignment.{name}"), format!("unknown edge {id:?}"))
                                })
                            })
                            .collect()
                    })
                    .collect()
            }
        }
    }

    /// Spec of an existing multizipper, orthogonal parts written as rows.
    pub fn from_zipper(
        zipper: &Multizipper,
        vertex_names: &[String],
        edge_names: &[String],
        name: Option<String>,
    ) -> Self {
        let system = zipper.system();
        let edges = system
            .graph()
            .edges()
            .iter()
            .zip(system.maps())
            .enumerate()
            .map(|(i, (edge, map))| {
                let m = map.orthogonal().matrix();
                EdgeSpec {
                    id: Some(edge_names[i].clone()),
                    from: vertex_names[edge.source].clone(),
                    to: vertex_names[edge.target].clone(),
                    ratio: map.ratio(),
                    orthogonal: OrthogonalSpec::Rows(m.row_iter().map(|r| r.iter().copied().collect()).collect()),
                    translation: map.translation().iter().copied().collect(),
                    reversed: zipper.reversed()[i],
                }
            })
            .collect();
        let nodes = vertex_names
            .iter()
            .enumerate()
            .map(|(u, n)| (n.clone(), zipper.nodes(u).iter().map(|p| p.iter().copied().collect()).collect()))
            .collect();
        let assignment = vertex_names
            .iter()
            .enumerate()
            .map(|(u, n)| (n.clone(), zipper.assignment(u).iter().map(|&e| edge_names[e].clone()).collect()))
            .collect();
        SystemSpec {
            version: FORMAT_VERSION.to_string(),
            name,
            dimension: system.dim(),
            vertices: vertex_names.to_vec(),
            edges,
            nodes: Some(nodes),
            assignment: Some(assignment),
        }
    }
}

fn index_names<'a>(names: &'a [String], field: &str) -> Result<HashMap<&'a str, usize>, SpecError> {
    let mut index = HashMap::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if index.insert(n.as_str(), i).is_some() {
            return Err(field_error(field, format!("duplicate name {n:?}")));
        }
    }
    Ok(index)
}

fn build_orthogonal(spec: &OrthogonalSpec, d: usize) -> Result<OrthogonalMap, String> {
    match spec {
        OrthogonalSpec::Planar { angle_deg, reflect } => {
            if d != 2 {
                return Err(format!("angle form needs dimension 2, spec has {d}"));
            }
            if !angle_deg.is_finite() {
                return Err("angle is not finite".into());
            }
            Ok(OrthogonalMap::planar(*angle_deg, *reflect))
        }
        OrthogonalSpec::Rows(rows) => {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(format!("expected a {d}x{d} matrix"));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            OrthogonalMap::new(DMatrix::from_row_slice(d, d, &flat)).map_err(|e| e.to_string())
        }
    }
}
