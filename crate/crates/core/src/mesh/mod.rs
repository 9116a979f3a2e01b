//! Polyhedral mesh data model.
//!
//! A [`Mesh`] is immutable once built. Construction goes through [`MeshBuilder`],
//! which derives the edge list from the face loops, checks the topological and
//! geometric invariants and caches per-face and per-cell geometry.

mod generate;
mod io;
mod validate;
mod vtk;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::curved::{CircularArc, CurveMap, CylinderPatch, SurfaceMap};
use crate::geometry::{diameter_of, mean_point, newell_normal, plane_frame, EdgeShape, FaceShape, Vec3};
use crate::quadrature::{cell_rule, face_rule, FaceRule, QuadratureError, QuadratureRule};
use crate::scalar::{lit, to_f64, Real};

pub use generate::{generate_box, generate_cylinder, generate_prism};
pub use io::{load_mesh, mesh_from_json, mesh_to_json, save_mesh, MeshFormat};
pub use validate::{validate, GeometryQualityReport};
pub use vtk::{mesh_from_vtk, write_vtk, PointField};

/// Label that selects every interior face in a [`KindRule`].
pub const INTERIOR_LABEL: &str = "interior";

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("topology error at {entity} {index}: {message}")]
    Topology {
        entity: &'static str,
        index: usize,
        message: String,
    },
    #[error("geometry error at {entity} {index}: {message}")]
    Geometry {
        entity: &'static str,
        index: usize,
        message: String,
    },
    #[error("unknown boundary label `{0}`")]
    UnknownLabel(String),
    #[error("degenerate bounds: {0}")]
    DegenerateBounds(String),
    #[error("invalid generator argument: {0}")]
    BadArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MeshError {
    fn topo(entity: &'static str, index: usize, message: impl Into<String>) -> Self {
        MeshError::Topology {
            entity,
            index,
            message: message.into(),
        }
    }

    fn geom(entity: &'static str, index: usize, message: impl Into<String>) -> Self {
        MeshError::Geometry {
            entity,
            index,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaceKind {
    Conforming,
    Nonconforming,
}

/// Edge from `vertices[0]` to `vertices[1]`; an attached arc satisfies
/// `arc(0) = vertices[0]`, `arc(1) = vertices[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge<T: Real> {
    pub vertices: [usize; 2],
    pub arc: Option<CircularArc<T>>,
}

/// Face loop. `edges[i]` joins `vertices[i]` to `vertices[i + 1]`; its flag is
/// `true` when the loop runs against the edge's own direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Face<T: Real> {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, bool)>,
    pub surface: Option<CylinderPatch<T>>,
}

/// Cell as a list of faces; the flag is `true` when the stored face normal points out of the cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub faces: Vec<(usize, bool)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceGeometry<T: Real> {
    pub centroid: Vec3<T>,
    pub area: T,
    pub diameter: T,
    /// Plane normal (planar faces) or normal at the parametric center (curved faces).
    pub normal: Vec3<T>,
    /// In-plane orthonormal axes; meaningful for planar faces.
    pub frame: (Vec3<T>, Vec3<T>),
    pub planar: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry<T: Real> {
    pub centroid: Vec3<T>,
    pub volume: T,
    pub diameter: T,
}

/// Which faces become nonconforming: those carrying one of `labels`; the reserved
/// label [`INTERIOR_LABEL`] selects all interior faces.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KindRule {
    pub labels: BTreeSet<String>,
}

impl KindRule {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }

    pub fn conforming() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh<T: Real> {
    vertices: Vec<Vec3<T>>,
    edges: Vec<Edge<T>>,
    faces: Vec<Face<T>>,
    cells: Vec<Cell>,
    face_labels: Vec<Option<String>>,
    face_kinds: Vec<FaceKind>,
    face_cells: Vec<Vec<usize>>,
    face_geometry: Vec<FaceGeometry<T>>,
    cell_geometry: Vec<CellGeometry<T>>,
}

/// Face description handed to [`MeshBuilder`].
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSpec<T: Real> {
    pub vertices: Vec<usize>,
    pub surface: Option<CylinderPatch<T>>,
}

/// Collects raw mesh data and builds a validated [`Mesh`].
#[derive(Debug, Clone, Default)]
pub struct MeshBuilder<T: Real> {
    pub vertices: Vec<Vec3<T>>,
    pub faces: Vec<FaceSpec<T>>,
    pub cells: Vec<Vec<(usize, bool)>>,
    /// Optional explicit edge numbering (vertex pairs); derived from faces when empty.
    pub edges: Vec<[usize; 2]>,
    /// Arcs keyed by edge index (after numbering).
    pub arcs_by_edge: BTreeMap<usize, CircularArc<T>>,
    /// Arcs keyed by unordered vertex pair.
    pub arcs_by_vertices: HashMap<(usize, usize), CircularArc<T>>,
    pub boundary_tags: BTreeMap<String, Vec<usize>>,
}

fn pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<T: Real> MeshBuilder<T> {
    pub fn new() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            cells: Vec::new(),
            edges: Vec::new(),
            arcs_by_edge: BTreeMap::new(),
            arcs_by_vertices: HashMap::new(),
            boundary_tags: BTreeMap::new(),
        }
    }

    pub fn build(self) -> Result<Mesh<T>, MeshError> {
        let nv = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(&v) = f.vertices.iter().find(|&&v| v >= nv) {
                return Err(MeshError::topo("face", fi, format!("vertex {v} out of range")));
            }
            let distinct: BTreeSet<_> = f.vertices.iter().collect();
            if distinct.len() != f.vertices.len() || f.vertices.len() < 3 && f.surface.is_none() {
                return Err(MeshError::topo(
                    "face",
                    fi,
                    "face loop needs at least 3 distinct vertices",
                ));
            }
            if f.vertices.len() < 2 {
                return Err(MeshError::topo("face", fi, "face loop too short"));
            }
        }

        // edge numbering
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge<T>> = Vec::new();
        for (ei, e) in self.edges.iter().enumerate() {
            if e[0] >= nv || e[1] >= nv || e[0] == e[1] {
                return Err(MeshError::topo("edge", ei, "invalid vertex pair"));
            }
            if edge_index.insert(pair(e[0], e[1]), ei).is_some() {
                return Err(MeshError::topo("edge", ei, "duplicate edge"));
            }
            edges.push(Edge {
                vertices: *e,
                arc: None,
            });
        }
        for f in &self.faces {
            let n = f.vertices.len();
            for i in 0..n {
                let (a, b) = (f.vertices[i], f.vertices[(i + 1) % n]);
                if !edge_index.contains_key(&pair(a, b)) {
                    edge_index.insert(pair(a, b), edges.len());
                    let (lo, hi) = pair(a, b);
                    edges.push(Edge {
                        vertices: [lo, hi],
                        arc: None,
                    });
                }
            }
        }

        // attach arcs, orienting each edge with its arc
        let mut arcs: Vec<(usize, CircularArc<T>)> = self.arcs_by_edge.into_iter().collect();
        for ((a, b), arc) in self.arcs_by_vertices {
            let ei = *edge_index
                .get(&pair(a, b))
                .ok_or_else(|| MeshError::topo("edge", a, format!("arc between {a} and {b} matches no edge")))?;
            arcs.push((ei, arc));
        }
        arcs.sort_by_key(|(ei, _)| *ei);
        for (ei, arc) in arcs {
            let edge = edges
                .get_mut(ei)
                .ok_or_else(|| MeshError::topo("edge", ei, "curved descriptor references missing edge"))?;
            let p0 = arc.point(T::zero());
            let [a, b] = edge.vertices;
            let scale = arc.radius.max(T::one()) * lit::<T>(1e-8);
            let da = (p0 - self.vertices[a]).norm();
            let db = (p0 - self.vertices[b]).norm();
            let (s, e) = if da <= db { (a, b) } else { (b, a) };
            if (arc.point(T::zero()) - self.vertices[s]).norm() > scale
                || (arc.point(T::one()) - self.vertices[e]).norm() > scale
            {
                return Err(MeshError::geom("edge", ei, "arc endpoints do not match edge vertices"));
            }
            edge.vertices = [s, e];
            edge.arc = Some(arc);
        }

        let faces: Vec<Face<T>> = self
            .faces
            .into_iter()
            .map(|f| {
                let n = f.vertices.len();
                let fe = (0..n)
                    .map(|i| {
                        let (a, b) = (f.vertices[i], f.vertices[(i + 1) % n]);
                        let ei = edge_index[&pair(a, b)];
                        (ei, edges[ei].vertices[0] != a)
                    })
                    .collect();
                Face {
                    vertices: f.vertices,
                    edges: fe,
                    surface: f.surface,
                }
            })
            .collect();

        // cell/face incidence
        let mut face_cells = vec![Vec::new(); faces.len()];
        let mut face_orient: Vec<Vec<bool>> = vec![Vec::new(); faces.len()];
        for (ci, c) in self.cells.iter().enumerate() {
            if c.len() < 2 {
                return Err(MeshError::topo("cell", ci, "cell needs at least 2 faces"));
            }
            let mut seen = BTreeSet::new();
            for &(fi, out) in c {
                if fi >= faces.len() {
                    return Err(MeshError::topo("cell", ci, format!("face {fi} out of range")));
                }
                if !seen.insert(fi) {
                    return Err(MeshError::topo("face", fi, format!("face repeated in cell {ci}")));
                }
                face_cells[fi].push(ci);
                face_orient[fi].push(out);
            }
        }
        for (fi, cells) in face_cells.iter().enumerate() {
            match cells.len() {
                0 => return Err(MeshError::topo("face", fi, "dangling face (no cell)")),
                1 => {}
                2 => {
                    if face_orient[fi][0] == face_orient[fi][1] {
                        return Err(MeshError::topo("face", fi, "interior face has equal orientation in both cells"));
                    }
                }
                _ => return Err(MeshError::topo("face", fi, "face shared by more than two cells")),
            }
        }
        // closed cells: every edge of a cell appears in exactly two of its faces
        for (ci, c) in self.cells.iter().enumerate() {
            let mut count: HashMap<usize, usize> = HashMap::new();
            for &(fi, _) in c {
                for &(ei, _) in &faces[fi].edges {
                    *count.entry(ei).or_default() += 1;
                }
            }
            if let Some((ei, _)) = count.iter().find(|(_, n)| **n != 2) {
                return Err(MeshError::topo("cell", ci, format!("open cell: edge {ei} is not shared by exactly two faces")));
            }
        }

        let mut face_labels = vec![None; faces.len()];
        for (label, list) in &self.boundary_tags {
            if label == INTERIOR_LABEL {
                return Err(MeshError::Field {
                    field: "boundary_tags".into(),
                    message: format!("`{INTERIOR_LABEL}` is reserved"),
                });
            }
            for &fi in list {
                if fi >= faces.len() {
                    return Err(MeshError::topo("face", fi, format!("tag `{label}` references missing face")));
                }
                if face_cells[fi].len() != 1 {
                    return Err(MeshError::topo("face", fi, format!("tag `{label}` on an interior face")));
                }
                if let Some(prev) = &face_labels[fi] {
                    return Err(MeshError::topo("face", fi, format!("face tagged both `{prev}` and `{label}`")));
                }
                face_labels[fi] = Some(label.clone());
            }
        }

        let cells: Vec<Cell> = self.cells.into_iter().map(|faces| Cell { faces }).collect();
        let mut mesh = Mesh {
            vertices: self.vertices,
            edges,
            face_kinds: vec![FaceKind::Conforming; faces.len()],
            faces,
            cells,
            face_labels,
            face_cells,
            face_geometry: Vec::new(),
            cell_geometry: Vec::new(),
        };
        mesh.compute_geometry()?;
        Ok(mesh)
    }
}

impl<T: Real> Mesh<T> {
    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn faces(&self) -> &[Face<T>] {
        &self.faces
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn face_label(&self, face: usize) -> Option<&str> {
        self.face_labels[face].as_deref()
    }

    pub fn face_kind(&self, face: usize) -> FaceKind {
        self.face_kinds[face]
    }

    pub fn face_kinds(&self) -> &[FaceKind] {
        &self.face_kinds
    }

    pub fn face_cells(&self, face: usize) -> &[usize] {
        &self.face_cells[face]
    }

    pub fn is_boundary_face(&self, face: usize) -> bool {
        self.face_cells[face].len() == 1
    }

    pub fn face_geometry(&self, face: usize) -> &FaceGeometry<T> {
        &self.face_geometry[face]
    }

    pub fn cell_geometry(&self, cell: usize) -> &CellGeometry<T> {
        &self.cell_geometry[cell]
    }

    /// Sorted set of boundary labels present in the mesh.
    pub fn boundary_labels(&self) -> BTreeSet<&str> {
        self.face_labels.iter().flatten().map(|s| s.as_str()).collect()
    }

    /// Boundary tags as label → sorted face list.
    pub fn boundary_tags(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (fi, l) in self.face_labels.iter().enumerate() {
            if let Some(l) = l {
                out.entry(l.clone()).or_default().push(fi);
            }
        }
        out
    }

    pub fn is_face_curved(&self, face: usize) -> bool {
        self.faces[face].surface.is_some()
    }

    pub fn edge_shape(&self, edge: usize) -> EdgeShape<T> {
        let e = &self.edges[edge];
        match &e.arc {
            Some(arc) => EdgeShape::Arc {
                arc: arc.clone(),
                reversed: false,
            },
            None => EdgeShape::Straight {
                a: self.vertices[e.vertices[0]],
                b: self.vertices[e.vertices[1]],
            },
        }
    }

    /// Position at parameter `t` of an edge, in the edge's own direction.
    pub fn edge_point(&self, edge: usize, t: T) -> Vec3<T> {
        self.edge_shape(edge).point(t)
    }

    /// Face shape oriented by the stored face normal.
    pub fn face_shape(&self, face: usize) -> FaceShape<T> {
        let f = &self.faces[face];
        match &f.surface {
            Some(patch) => {
                let loop_pts: Vec<_> = f.vertices.iter().map(|&v| self.vertices[v]).collect();
                let n = newell_normal(&loop_pts);
                let [[u0, u1], [v0, v1]] = patch.reference_box();
                let half = lit::<T>(0.5);
                let radial = patch.unit_normal([(u0 + u1) * half, (v0 + v1) * half]);
                let outward = if n.dot(&radial) >= T::zero() { T::one() } else { -T::one() };
                FaceShape::Cylinder {
                    patch: patch.clone(),
                    outward,
                }
            }
            None => {
                let boundary = f
                    .edges
                    .iter()
                    .map(|&(ei, rev)| {
                        let s = self.edge_shape(ei);
                        if rev {
                            s.reversed()
                        } else {
                            s
                        }
                    })
                    .collect();
                let loop_pts: Vec<_> = f.vertices.iter().map(|&v| self.vertices[v]).collect();
                FaceShape::Planar {
                    boundary,
                    normal: newell_normal(&loop_pts),
                }
            }
        }
    }

    /// Face rule with normals along the stored face orientation.
    pub fn face_rule(&self, face: usize, exactness: usize) -> Result<FaceRule<T>, QuadratureError> {
        face_rule(&self.face_shape(face), exactness)
    }

    /// Cell rule (cone from the mean of the cell's vertices).
    pub fn cell_rule(&self, cell: usize, exactness: usize) -> Result<QuadratureRule<T>, QuadratureError> {
        let mut rules = Vec::with_capacity(self.cells[cell].faces.len());
        for &(fi, out) in &self.cells[cell].faces {
            let r = self.face_rule(fi, exactness)?;
            rules.push(if out { r } else { r.flipped() });
        }
        let apex = mean_point(&self.cell_vertex_points(cell));
        Ok(cell_rule(&rules, &apex, exactness))
    }

    /// Sorted vertex indices of a cell.
    pub fn cell_vertices(&self, cell: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.cells[cell]
            .faces
            .iter()
            .flat_map(|&(fi, _)| self.faces[fi].vertices.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// Sorted edge indices of a cell.
    pub fn cell_edges(&self, cell: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.cells[cell]
            .faces
            .iter()
            .flat_map(|&(fi, _)| self.faces[fi].edges.iter().map(|&(e, _)| e))
            .collect();
        set.into_iter().collect()
    }

    fn cell_vertex_points(&self, cell: usize) -> Vec<Vec3<T>> {
        self.cell_vertices(cell).iter().map(|&v| self.vertices[v]).collect()
    }

    /// Boundary points used for diameters: vertices plus samples along arcs.
    fn sample_points(&self, edges: &[usize], vertices: &[usize]) -> Vec<Vec3<T>> {
        let mut pts: Vec<Vec3<T>> = vertices.iter().map(|&v| self.vertices[v]).collect();
        for &e in edges {
            if self.edges[e].arc.is_some() {
                let shape = self.edge_shape(e);
                for i in 1..16 {
                    pts.push(shape.point(lit::<T>(i as f64 / 16.0)));
                }
            }
        }
        pts
    }

    fn compute_geometry(&mut self) -> Result<(), MeshError> {
        let mut fg = Vec::with_capacity(self.faces.len());
        for fi in 0..self.faces.len() {
            let shape = self.face_shape(fi);
            let curved = self.faces[fi].surface.is_some() || self.faces[fi].edges.iter().any(|&(e, _)| self.edges[e].arc.is_some());
            let rule = face_rule(&shape, if curved { 10 } else { 1 }).map_err(|e| MeshError::geom("face", fi, e.to_string()))?;
            let area = rule.rule.measure();
            if !(area > T::zero()) {
                return Err(MeshError::geom("face", fi, "non-positive area"));
            }
            let centroid = rule
                .rule
                .points
                .iter()
                .zip(&rule.rule.weights)
                .fold(Vec3::zeros(), |acc, (p, w)| acc + p * *w)
                / area;
            let f = &self.faces[fi];
            let edges: Vec<usize> = f.edges.iter().map(|e| e.0).collect();
            let diameter = diameter_of(&self.sample_points(&edges, &f.vertices));
            let (normal, planar) = match &shape {
                FaceShape::Planar { normal, .. } => (*normal, true),
                FaceShape::Cylinder { patch, outward } => {
                    let [[u0, u1], [v0, v1]] = patch.reference_box();
                    let half = lit::<T>(0.5);
                    (patch.unit_normal([(u0 + u1) * half, (v0 + v1) * half]) * *outward, false)
                }
            };
            if planar {
                let tol = lit::<T>(1e-9) * diameter;
                for &v in &f.vertices {
                    let d = (self.vertices[v] - centroid).dot(&normal).abs();
                    if d > tol {
                        return Err(MeshError::geom(
                            "face",
                            fi,
                            format!("vertex {v} is {:e} off the face plane", to_f64(d)),
                        ));
                    }
                }
            }
            let hint = self.vertices[f.vertices[1]] - self.vertices[f.vertices[0]];
            let frame = plane_frame(&normal, &hint);
            fg.push(FaceGeometry {
                centroid,
                area,
                diameter,
                normal,
                frame,
                planar,
            });
        }
        self.face_geometry = fg;

        let mut cg = Vec::with_capacity(self.cells.len());
        for ci in 0..self.cells.len() {
            // watertightness: Σ ± ∫_F n = 0
            let curved = self.cells[ci].faces.iter().any(|&(fi, _)| {
                self.faces[fi].surface.is_some() || self.faces[fi].edges.iter().any(|&(e, _)| self.edges[e].arc.is_some())
            });
            let exactness = if curved { 10 } else { 0 };
            let mut flux = Vec3::zeros();
            for &(fi, out) in &self.cells[ci].faces {
                let r = self.face_rule(fi, exactness).map_err(|e| MeshError::geom("face", fi, e.to_string()))?;
                let s = if out { T::one() } else { -T::one() };
                for (n, w) in r.normals.iter().zip(&r.rule.weights) {
                    flux += n * (*w * s);
                }
            }
            let verts = self.cell_vertices(ci);
            let edges = self.cell_edges(ci);
            let diameter = diameter_of(&self.sample_points(&edges, &verts));
            // curved faces are integrated by quadrature, so the flux balance is only as exact as the rule
            let tol = if curved { lit::<T>(1e-9) } else { lit::<T>(1e-12) } * diameter * diameter;
            if flux.norm() > tol {
                return Err(MeshError::topo(
                    "cell",
                    ci,
                    format!("cell is not watertight (net flux {:e})", to_f64(flux.norm())),
                ));
            }
            let rule = self.cell_rule(ci, if curved { 10 } else { 1 }).map_err(|e| MeshError::geom("cell", ci, e.to_string()))?;
            let volume = rule.measure();
            let centroid = if volume != T::zero() {
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .fold(Vec3::zeros(), |acc, (p, w)| acc + p * *w)
                    / volume
            } else {
                mean_point(&self.cell_vertex_points(ci))
            };
            cg.push(CellGeometry {
                centroid,
                volume,
                diameter,
            });
        }
        self.cell_geometry = cg;
        Ok(())
    }

    /// Marks faces nonconforming according to `rule`; all other faces become conforming.
    pub fn tag_face_kinds(&self, rule: &KindRule) -> Result<Mesh<T>, MeshError> {
        let labels = self.boundary_labels();
        for l in &rule.labels {
            if l != INTERIOR_LABEL && !labels.contains(l.as_str()) {
                return Err(MeshError::UnknownLabel(l.clone()));
            }
        }
        let interior = rule.labels.contains(INTERIOR_LABEL);
        let mut out = self.clone();
        for fi in 0..self.faces.len() {
            let nc = match &self.face_labels[fi] {
                Some(l) => rule.labels.contains(l),
                None => interior && !self.is_boundary_face(fi),
            };
            out.face_kinds[fi] = if nc {
                FaceKind::Nonconforming
            } else {
                FaceKind::Conforming
            };
        }
        Ok(out)
    }

    /// Replaces the kind of every face (used by tests and tools that tag directly).
    pub fn with_face_kinds(&self, kinds: Vec<FaceKind>) -> Mesh<T> {
        assert_eq!(kinds.len(), self.faces.len());
        let mut out = self.clone();
        out.face_kinds = kinds;
        out
    }

    /// Largest cell diameter.
    pub fn max_cell_diameter(&self) -> T {
        self.cell_geometry.iter().fold(T::zero(), |a, g| a.max(g.diameter))
    }

    /// Applies `x ↦ scale·x + shift` to a straight-sided mesh.
    pub fn transformed(&self, scale: T, shift: Vec3<T>) -> Result<Mesh<T>, MeshError> {
        if self.edges.iter().any(|e| e.arc.is_some()) || self.faces.iter().any(|f| f.surface.is_some()) {
            return Err(MeshError::BadArgument("cannot transform a curved mesh".into()));
        }
        let mut b = MeshBuilder::new();
        b.vertices = self.vertices.iter().map(|v| v * scale + shift).collect();
        b.faces = self
            .faces
            .iter()
            .map(|f| FaceSpec {
                vertices: f.vertices.clone(),
                surface: None,
            })
            .collect();
        b.cells = self.cells.iter().map(|c| c.faces.clone()).collect();
        b.edges = self.edges.iter().map(|e| e.vertices).collect();
        b.boundary_tags = self.boundary_tags();
        Ok(b.build()?.with_face_kinds(self.face_kinds.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_counts() {
        let m = generate_box::<f64>([1, 1, 1], [0.0; 3], [1.0; 3]).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.edges().len(), 12);
        assert_eq!(m.faces().len(), 6);
        assert_eq!(m.num_cells(), 1);
        assert!((0..6).all(|f| m.is_boundary_face(f)));
        assert!((m.cell_geometry(0).volume - 1.0).abs() < 1e-14);
        assert!((m.cell_geometry(0).centroid - Vec3::new(0.5, 0.5, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn repeated_face_is_a_topology_error() {
        let m = generate_box::<f64>([1, 1, 1], [0.0; 3], [1.0; 3]).unwrap();
        let mut b = MeshBuilder::new();
        b.vertices = m.vertices().to_vec();
        b.faces = m
            .faces()
            .iter()
            .map(|f| FaceSpec {
                vertices: f.vertices.clone(),
                surface: None,
            })
            .collect();
        let mut cell = m.cells()[0].faces.clone();
        cell.push(cell[2]);
        b.cells = vec![cell];
        match b.build() {
            Err(MeshError::Topology { entity: "face", index, .. }) => assert_eq!(index, m.cells()[0].faces[2].0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn open_cell_is_rejected() {
        let m = generate_box::<f64>([1, 1, 1], [0.0; 3], [1.0; 3]).unwrap();
        let mut b = MeshBuilder::new();
        b.vertices = m.vertices().to_vec();
        b.faces = m.faces()[..5]
            .iter()
            .map(|f| FaceSpec {
                vertices: f.vertices.clone(),
                surface: None,
            })
            .collect();
        b.cells = vec![m.cells()[0].faces.iter().copied().filter(|(f, _)| *f < 5).collect()];
        assert!(matches!(b.build(), Err(MeshError::Topology { entity: "cell", .. })));
    }

    #[test]
    fn tagging_rules() {
        let m = generate_box::<f64>([2, 2, 2], [0.0; 3], [1.0; 3]).unwrap();
        let t = m.tag_face_kinds(&KindRule::new(["z1"])).unwrap();
        for fi in 0..m.faces().len() {
            let on_top = m.face_label(fi) == Some("z1");
            assert_eq!(t.face_kind(fi) == FaceKind::Nonconforming, on_top);
            if on_top {
                assert!((m.face_geometry(fi).centroid.z - 1.0).abs() < 1e-14);
            }
        }
        let all_c = m.tag_face_kinds(&KindRule::conforming()).unwrap();
        assert!(all_c.face_kinds().iter().all(|k| *k == FaceKind::Conforming));
        assert!(matches!(
            m.tag_face_kinds(&KindRule::new(["nope"])),
            Err(MeshError::UnknownLabel(_))
        ));
        let interior = m.tag_face_kinds(&KindRule::new([INTERIOR_LABEL])).unwrap();
        for fi in 0..m.faces().len() {
            assert_eq!(interior.face_kind(fi) == FaceKind::Nonconforming, !m.is_boundary_face(fi));
        }
    }

    #[test]
    fn tagging_is_idempotent() {
        let m = generate_cylinder::<f64>(2, 6, 2, 1.0, 2.0).unwrap();
        let rule = KindRule::new(["lateral"]);
        let once = m.tag_face_kinds(&rule).unwrap();
        let twice = once.tag_face_kinds(&rule).unwrap();
        assert_eq!(once.face_kinds(), twice.face_kinds());
    }

    #[test]
    fn cells_are_watertight() {
        let m = generate_box::<f64>([2, 3, 1], [0.0; 3], [1.0, 2.0, 0.5]).unwrap();
        for c in 0..m.num_cells() {
            let mut flux = Vec3::zeros();
            for &(fi, out) in &m.cells()[c].faces {
                let g = m.face_geometry(fi);
                flux += g.normal * g.area * if out { 1.0 } else { -1.0 };
            }
            let h = m.cell_geometry(c).diameter;
            assert!(flux.norm() <= 1e-12 * h * h);
        }
    }
}
