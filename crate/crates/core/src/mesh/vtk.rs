//! Legacy ASCII VTK unstructured grids with polyhedron cells (cell type 42).
//!
//! Only the vertex loops travel through VTK: curved faces and edges are written
//! as their polygonal approximation and a mesh read from VTK is straight-sided.
//! Faces are expected to be oriented outward from each cell, and every boundary
//! face read from a file receives the label `boundary`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use super::{FaceSpec, Mesh, MeshBuilder, MeshError};
use crate::geometry::Vec3;
use crate::scalar::{lit, to_f64, Real};

const VTK_POLYHEDRON: usize = 42;

/// Per-vertex data written to the `POINT_DATA` section.
#[derive(Debug, Clone, PartialEq)]
pub struct PointField {
    pub name: String,
    /// 1 for scalars, 3 for vectors.
    pub components: usize,
    /// `components` values per vertex.
    pub values: Vec<f64>,
}

pub fn write_vtk<T: Real, W: Write>(mesh: &Mesh<T>, fields: &[PointField], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "cnc-vem mesh")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.vertices().len())?;
    for v in mesh.vertices() {
        writeln!(out, "{:.17e} {:.17e} {:.17e}", to_f64(v.x), to_f64(v.y), to_f64(v.z))?;
    }
    let mut lines = Vec::with_capacity(mesh.num_cells());
    let mut total = 0;
    for c in mesh.cells() {
        let mut entries = vec![c.faces.len()];
        for &(fi, out) in &c.faces {
            let mut loop_v = mesh.faces()[fi].vertices.clone();
            if !out {
                loop_v.reverse();
            }
            entries.push(loop_v.len());
            entries.extend(loop_v);
        }
        total += entries.len() + 1;
        lines.push(entries);
    }
    writeln!(out, "CELLS {} {}", mesh.num_cells(), total)?;
    for entries in &lines {
        write!(out, "{}", entries.len())?;
        for e in entries {
            write!(out, " {e}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.num_cells())?;
    for _ in 0..mesh.num_cells() {
        writeln!(out, "{VTK_POLYHEDRON}")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.vertices().len())?;
        for f in fields {
            match f.components {
                1 => {
                    writeln!(out, "SCALARS {} double 1", f.name)?;
                    writeln!(out, "LOOKUP_TABLE default")?;
                }
                _ => writeln!(out, "VECTORS {} double", f.name)?,
            }
            for chunk in f.values.chunks(f.components) {
                let s: Vec<String> = chunk.iter().map(|x| format!("{x:.17e}")).collect();
                writeln!(out, "{}", s.join(" "))?;
            }
        }
    }
    Ok(())
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
            .collect();
        Self { items, pos: 0 }
    }

    fn line(&self) -> usize {
        self.items.get(self.pos).or(self.items.last()).map_or(0, |t| t.0)
    }

    fn err(&self, message: impl Into<String>) -> MeshError {
        MeshError::Parse {
            line: self.line(),
            column: 0,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<&'a str, MeshError> {
        let t = self.items.get(self.pos).ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += 1;
        Ok(t.1)
    }

    fn parse<N: std::str::FromStr>(&mut self) -> Result<N, MeshError> {
        let t = self.next()?;
        t.parse().map_err(|_| {
            self.pos -= 1;
            self.err(format!("cannot parse `{t}`"))
        })
    }

    fn seek(&mut self, keyword: &str) -> Result<(), MeshError> {
        while self.pos < self.items.len() {
            if self.items[self.pos].1 == keyword {
                self.pos += 1;
                return Ok(());
            }
            self.pos += 1;
        }
        Err(self.err(format!("missing section {keyword}")))
    }
}

fn same_direction(a: &[usize], b: &[usize]) -> bool {
    let n = a.len();
    let start = b.iter().position(|&v| v == a[0]).unwrap_or(0);
    b[(start + 1) % n] == a[1]
}

pub fn mesh_from_vtk<T: Real>(text: &str) -> Result<Mesh<T>, MeshError> {
    let mut tk = Tokens::new(text);
    tk.seek("UNSTRUCTURED_GRID")?;
    tk.seek("POINTS")?;
    let np: usize = tk.parse()?;
    tk.next()?;
    let mut b = MeshBuilder::<T>::new();
    for _ in 0..np {
        let x: f64 = tk.parse()?;
        let y: f64 = tk.parse()?;
        let z: f64 = tk.parse()?;
        b.vertices.push(Vec3::new(lit(x), lit(y), lit(z)));
    }
    tk.seek("CELLS")?;
    let nc: usize = tk.parse()?;
    let _size: usize = tk.parse()?;
    let mut face_index: HashMap<Vec<usize>, usize> = HashMap::new();
    for ci in 0..nc {
        let _count: usize = tk.parse()?;
        let nf: usize = tk.parse()?;
        let mut cell = Vec::with_capacity(nf);
        for _ in 0..nf {
            let nv: usize = tk.parse()?;
            let mut loop_v = Vec::with_capacity(nv);
            for _ in 0..nv {
                let v: usize = tk.parse()?;
                if v >= np {
                    return Err(tk.err(format!("cell {ci} references vertex {v} out of range")));
                }
                loop_v.push(v);
            }
            if nv < 3 {
                return Err(tk.err(format!("cell {ci} has a face with {nv} vertices")));
            }
            let mut key = loop_v.clone();
            key.sort_unstable();
            match face_index.get(&key) {
                Some(&fi) => {
                    let out = same_direction(&b.faces[fi].vertices, &loop_v);
                    cell.push((fi, out));
                }
                None => {
                    face_index.insert(key, b.faces.len());
                    cell.push((b.faces.len(), true));
                    b.faces.push(FaceSpec {
                        vertices: loop_v,
                        surface: None,
                    });
                }
            }
        }
        b.cells.push(cell);
    }
    if let Ok(()) = tk.seek("CELL_TYPES") {
        let n: usize = tk.parse()?;
        for _ in 0..n {
            let t: usize = tk.parse()?;
            if t != VTK_POLYHEDRON {
                return Err(tk.err(format!("unsupported cell type {t}; expected {VTK_POLYHEDRON}")));
            }
        }
    }
    let mut uses = vec![0usize; b.faces.len()];
    for c in &b.cells {
        for &(f, _) in c {
            uses[f] += 1;
        }
    }
    let boundary: Vec<usize> = (0..uses.len()).filter(|&f| uses[f] == 1).collect();
    b.boundary_tags = BTreeMap::from([("boundary".to_string(), boundary)]);
    b.build()
}
