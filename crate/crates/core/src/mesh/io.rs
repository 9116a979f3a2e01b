//! Native JSON mesh format.
//!
//! ```json
//! {
//!   "vertices": [[x, y, z], ...],
//!   "faces": [[v0, v1, v2, ...], ...],
//!   "cells": [[+1, -2, ...], ...],
//!   "boundary_tags": {"top": [4, 9]},
//!   "edges": [[v0, v1], ...],
//!   "curved": {
//!     "faces": {"12": {"type": "cylinder", "radius": 1.0, "theta_range": [0.0, 0.5], "z_range": [0.0, 1.0]}},
//!     "edges": {"40": {"type": "arc", "center": [0, 0, 0], "radius": 1.0, "angle_range": [0.0, 0.5]}}
//!   }
//! }
//! ```
//!
//! Vertex, face and edge indices are 0-based. Cell entries reference faces by
//! 1-based index, positive when the face normal points out of the cell. Curved
//! descriptors are keyed by face index (`cylinder`) or edge index (`arc`).
//! `edges` is optional; without it, edges are numbered in order of first
//! appearance while walking the face loops.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FaceSpec, Mesh, MeshBuilder, MeshError};
use crate::curved::{CircularArc, CylinderPatch};
use crate::geometry::Vec3;
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Json,
    Vtk,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "json" => Some(MeshFormat::Json),
            "vtk" => Some(MeshFormat::Vtk),
            _ => None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum CurvedEntry {
    Cylinder {
        radius: f64,
        theta_range: [f64; 2],
        z_range: [f64; 2],
    },
    Arc {
        center: [f64; 3],
        radius: f64,
        angle_range: [f64; 2],
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<[f64; 3]>,
    faces: Vec<Vec<usize>>,
    cells: Vec<Vec<i64>>,
    #[serde(default)]
    boundary_tags: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Curved::is_empty")]
    curved: Curved,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Curved {
    #[serde(default)]
    faces: BTreeMap<String, CurvedEntry>,
    #[serde(default)]
    edges: BTreeMap<String, CurvedEntry>,
}

impl Curved {
    fn is_empty(&self) -> bool {
        self.faces.is_empty() && self.edges.is_empty()
    }
}

fn field(field: &str, message: impl Into<String>) -> MeshError {
    MeshError::Field {
        field: field.into(),
        message: message.into(),
    }
}

pub fn mesh_from_json<T: Real>(text: &str) -> Result<Mesh<T>, MeshError> {
    let file: MeshFile = serde_json::from_str(text).map_err(|e| MeshError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut b = MeshBuilder::new();
    b.vertices = file
        .vertices
        .iter()
        .map(|p| Vec3::new(lit(p[0]), lit(p[1]), lit(p[2])))
        .collect();
    b.faces = file
        .faces
        .into_iter()
        .map(|vertices| FaceSpec {
            vertices,
            surface: None,
        })
        .collect();
    for (ci, refs) in file.cells.iter().enumerate() {
        let mut cell = Vec::with_capacity(refs.len());
        for &r in refs {
            if r == 0 {
                return Err(field("cells", format!("cell {ci}: face references are 1-based, got 0")));
            }
            cell.push(((r.unsigned_abs() - 1) as usize, r > 0));
        }
        b.cells.push(cell);
    }
    if let Some(edges) = file.edges {
        b.edges = edges;
    }
    let entries = file
        .curved
        .faces
        .into_iter()
        .map(|e| (true, e))
        .chain(file.curved.edges.into_iter().map(|e| (false, e)));
    for (on_face, (key, entry)) in entries {
        let idx: usize = key
            .parse()
            .map_err(|_| field("curved", format!("key `{key}` is not an index")))?;
        if on_face != matches!(entry, CurvedEntry::Cylinder { .. }) {
            return Err(field("curved", format!("entry `{key}` has the wrong type for its section")));
        }
        match entry {
            CurvedEntry::Cylinder {
                radius,
                theta_range,
                z_range,
            } => {
                let face = b
                    .faces
                    .get_mut(idx)
                    .ok_or_else(|| field("curved", format!("face {idx} does not exist")))?;
                face.surface = Some(CylinderPatch::new(
                    lit(radius),
                    [lit(theta_range[0]), lit(theta_range[1])],
                    [lit(z_range[0]), lit(z_range[1])],
                ));
            }
            CurvedEntry::Arc {
                center,
                radius,
                angle_range,
            } => {
                b.arcs_by_edge.insert(
                    idx,
                    CircularArc::new(
                        [lit(center[0]), lit(center[1]), lit(center[2])],
                        lit(radius),
                        [lit(angle_range[0]), lit(angle_range[1])],
                    ),
                );
            }
        }
    }
    b.boundary_tags = file.boundary_tags;
    b.build()
}

pub fn mesh_to_json<T: Real>(mesh: &Mesh<T>) -> String {
    let mut curved = Curved::default();
    for (fi, f) in mesh.faces().iter().enumerate() {
        if let Some(p) = &f.surface {
            curved.faces.insert(
                fi.to_string(),
                CurvedEntry::Cylinder {
                    radius: to_f64(p.radius),
                    theta_range: p.theta_range.map(to_f64),
                    z_range: p.z_range.map(to_f64),
                },
            );
        }
    }
    for (ei, e) in mesh.edges().iter().enumerate() {
        if let Some(a) = &e.arc {
            curved.edges.insert(
                ei.to_string(),
                CurvedEntry::Arc {
                    center: a.center.map(to_f64),
                    radius: to_f64(a.radius),
                    angle_range: a.angle_range.map(to_f64),
                },
            );
        }
    }
    let file = MeshFile {
        vertices: mesh.vertices().iter().map(|v| [to_f64(v.x), to_f64(v.y), to_f64(v.z)]).collect(),
        faces: mesh.faces().iter().map(|f| f.vertices.clone()).collect(),
        cells: mesh
            .cells()
            .iter()
            .map(|c| {
                c.faces
                    .iter()
                    .map(|&(f, out)| if out { f as i64 + 1 } else { -(f as i64 + 1) })
                    .collect()
            })
            .collect(),
        boundary_tags: mesh.boundary_tags(),
        edges: Some(mesh.edges().iter().map(|e| e.vertices).collect()),
        curved,
    };
    serde_json::to_string_pretty(&file).expect("mesh serialization cannot fail")
}

/// Loads a mesh, choosing the format from the file extension (`.json` or `.vtk`).
pub fn load_mesh<T: Real>(path: &Path) -> Result<Mesh<T>, MeshError> {
    let text = std::fs::read_to_string(path)?;
    match MeshFormat::from_path(path) {
        Some(MeshFormat::Vtk) => super::vtk::mesh_from_vtk(&text),
        Some(MeshFormat::Json) => mesh_from_json(&text),
        None => Err(field("path", format!("unknown mesh extension: {}", path.display()))),
    }
}

pub fn save_mesh<T: Real>(mesh: &Mesh<T>, path: &Path) -> Result<(), MeshError> {
    match MeshFormat::from_path(path) {
        Some(MeshFormat::Vtk) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            super::vtk::write_vtk(mesh, &[], &mut f)?;
            Ok(())
        }
        Some(MeshFormat::Json) => Ok(std::fs::write(path, mesh_to_json(mesh))?),
        None => Err(field("path", format!("unknown mesh extension: {}", path.display()))),
    }
}
