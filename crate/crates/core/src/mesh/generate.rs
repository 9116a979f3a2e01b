//! Structured mesh generators: axis-aligned boxes and cylinders.

use std::collections::BTreeMap;

use super::{FaceSpec, Mesh, MeshBuilder, MeshError};
use crate::curved::{CircularArc, CylinderPatch};
use crate::geometry::Vec3;
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Tensor-product hexahedral mesh of `[lo, hi]` with `n[d]` cells per axis.
///
/// Boundary labels are `x0, x1, y0, y1, z0, z1`.
pub fn generate_box<T: Real>(n: [usize; 3], lo: [T; 3], hi: [T; 3]) -> Result<Mesh<T>, MeshError> {
    if n.iter().any(|&k| k == 0) {
        return Err(MeshError::BadArgument(format!("cell counts must be positive, got {n:?}")));
    }
    for d in 0..3 {
        if !(hi[d] > lo[d]) {
            return Err(MeshError::DegenerateBounds(format!(
                "axis {d}: lo {} >= hi {}",
                to_f64(lo[d]),
                to_f64(hi[d])
            )));
        }
    }
    let [nx, ny, nz] = n;
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let coord = |d: usize, i: usize| lo[d] + (hi[d] - lo[d]) * from_usize::<T>(i) / from_usize::<T>(n[d]);

    let mut b = MeshBuilder::new();
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                b.vertices.push(Vec3::new(coord(0, i), coord(1, j), coord(2, k)));
            }
        }
    }

    let mut tags: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let push = |b: &mut MeshBuilder<T>, verts: Vec<usize>| {
        b.faces.push(FaceSpec {
            vertices: verts,
            surface: None,
        });
        b.faces.len() - 1
    };

    // x-normal faces, indexed by (i, j, k) with i in 0..=nx
    let mut fx = vec![0; (nx + 1) * ny * nz];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..=nx {
                let f = push(&mut b, vec![vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)]);
                fx[i + (nx + 1) * (j + ny * k)] = f;
                if i == 0 {
                    tags.entry("x0".into()).or_default().push(f);
                } else if i == nx {
                    tags.entry("x1".into()).or_default().push(f);
                }
            }
        }
    }
    let mut fy = vec![0; nx * (ny + 1) * nz];
    for k in 0..nz {
        for j in 0..=ny {
            for i in 0..nx {
                let f = push(&mut b, vec![vid(i, j, k), vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j, k)]);
                fy[i + nx * (j + (ny + 1) * k)] = f;
                if j == 0 {
                    tags.entry("y0".into()).or_default().push(f);
                } else if j == ny {
                    tags.entry("y1".into()).or_default().push(f);
                }
            }
        }
    }
    let mut fz = vec![0; nx * ny * (nz + 1)];
    for k in 0..=nz {
        for j in 0..ny {
            for i in 0..nx {
                let f = push(&mut b, vec![vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)]);
                fz[i + nx * (j + ny * k)] = f;
                if k == 0 {
                    tags.entry("z0".into()).or_default().push(f);
                } else if k == nz {
                    tags.entry("z1".into()).or_default().push(f);
                }
            }
        }
    }

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                b.cells.push(vec![
                    (fx[i + (nx + 1) * (j + ny * k)], false),
                    (fx[i + 1 + (nx + 1) * (j + ny * k)], true),
                    (fy[i + nx * (j + (ny + 1) * k)], false),
                    (fy[i + nx * (j + 1 + (ny + 1) * k)], true),
                    (fz[i + nx * (j + ny * k)], false),
                    (fz[i + nx * (j + ny * (k + 1))], true),
                ]);
            }
        }
    }
    b.boundary_tags = tags;
    b.build()
}

/// Cylinder `x² + y² ≤ radius²`, `0 ≤ z ≤ height`, split into `n_r` rings,
/// `n_theta` sectors and `n_z` layers.
///
/// The innermost ring consists of wedges around the axis, intermediate rings of
/// hexahedra with flat chord faces, and the outermost ring carries the exact
/// cylindrical lateral surface and circular-arc edges. Labels: `lateral`, `top`, `bottom`.
pub fn generate_cylinder<T: Real>(
    n_r: usize,
    n_theta: usize,
    n_z: usize,
    radius: T,
    height: T,
) -> Result<Mesh<T>, MeshError> {
    if n_r == 0 || n_z == 0 || n_theta < 3 {
        return Err(MeshError::BadArgument(format!(
            "need n_r >= 1, n_theta >= 3, n_z >= 1 (got {n_r}, {n_theta}, {n_z})"
        )));
    }
    if !(radius > T::zero()) || !(height > T::zero()) {
        return Err(MeshError::DegenerateBounds("radius and height must be positive".into()));
    }
    let two_pi = T::two_pi();
    let angle = |j: usize| two_pi * from_usize::<T>(j) / from_usize::<T>(n_theta);
    let rad = |i: usize| radius * from_usize::<T>(i) / from_usize::<T>(n_r);
    let zl = |l: usize| height * from_usize::<T>(l) / from_usize::<T>(n_z);

    // vertex (i, j, l): i = 0 is the axis (independent of j)
    let axis = |l: usize| l;
    let ring = |i: usize, j: usize, l: usize| (n_z + 1) + ((i - 1) * n_theta + j % n_theta) * (n_z + 1) + l;
    let vid = |i: usize, j: usize, l: usize| if i == 0 { axis(l) } else { ring(i, j, l) };

    let mut b = MeshBuilder::new();
    for l in 0..=n_z {
        b.vertices.push(Vec3::new(T::zero(), T::zero(), zl(l)));
    }
    for i in 1..=n_r {
        for j in 0..n_theta {
            let (s, c) = angle(j).sin_cos();
            for l in 0..=n_z {
                b.vertices.push(Vec3::new(rad(i) * c, rad(i) * s, zl(l)));
            }
        }
    }
    // exact values at quarter turns keep axis-aligned points on the axes
    for v in b.vertices.iter_mut() {
        for d in 0..2 {
            if v[d].abs() < lit::<T>(1e-15) * radius {
                v[d] = T::zero();
            }
        }
    }

    for j in 0..n_theta {
        for l in 0..=n_z {
            let arc = CircularArc::new([T::zero(), T::zero(), zl(l)], radius, [angle(j), angle(j + 1)]);
            b.arcs_by_vertices.insert((vid(n_r, j, l), vid(n_r, j + 1, l)), arc);
        }
    }

    let mut tags: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let add = |b: &mut MeshBuilder<T>, vertices: Vec<usize>, surface: Option<CylinderPatch<T>>| {
        b.faces.push(FaceSpec { vertices, surface });
        b.faces.len() - 1
    };

    // horizontal faces (i, j, l), normal +z
    let mut horiz = vec![0; n_r * n_theta * (n_z + 1)];
    for l in 0..=n_z {
        for i in 0..n_r {
            for j in 0..n_theta {
                let verts = if i == 0 {
                    vec![axis(l), vid(1, j, l), vid(1, j + 1, l)]
                } else {
                    vec![vid(i, j, l), vid(i + 1, j, l), vid(i + 1, j + 1, l), vid(i, j + 1, l)]
                };
                let f = add(&mut b, verts, None);
                horiz[(l * n_r + i) * n_theta + j] = f;
                if l == 0 {
                    tags.entry("bottom".into()).or_default().push(f);
                } else if l == n_z {
                    tags.entry("top".into()).or_default().push(f);
                }
            }
        }
    }
    // radial faces at angle j for ring i, layer l; stored normal points toward decreasing angle
    let mut radial = vec![0; n_r * n_theta * n_z];
    for l in 0..n_z {
        for i in 0..n_r {
            for j in 0..n_theta {
                let verts = if i == 0 {
                    vec![axis(l), vid(1, j, l), vid(1, j, l + 1), axis(l + 1)]
                } else {
                    vec![vid(i, j, l), vid(i + 1, j, l), vid(i + 1, j, l + 1), vid(i, j, l + 1)]
                };
                radial[(l * n_r + i) * n_theta + j] = add(&mut b, verts, None);
            }
        }
    }
    // ring faces at radius index i (1..=n_r), outward radial normal
    let mut ringf = vec![0; n_r * n_theta * n_z];
    for l in 0..n_z {
        for i in 1..=n_r {
            for j in 0..n_theta {
                let verts = vec![vid(i, j, l), vid(i, j + 1, l), vid(i, j + 1, l + 1), vid(i, j, l + 1)];
                let surface = (i == n_r).then(|| CylinderPatch::new(radius, [angle(j), angle(j + 1)], [zl(l), zl(l + 1)]));
                let f = add(&mut b, verts, surface);
                ringf[(l * n_r + i - 1) * n_theta + j] = f;
                if i == n_r {
                    tags.entry("lateral".into()).or_default().push(f);
                }
            }
        }
    }

    for l in 0..n_z {
        for i in 0..n_r {
            for j in 0..n_theta {
                let mut cell = vec![
                    (horiz[(l * n_r + i) * n_theta + j], false),
                    (horiz[((l + 1) * n_r + i) * n_theta + j], true),
                    (radial[(l * n_r + i) * n_theta + j], true),
                    (radial[(l * n_r + i) * n_theta + (j + 1) % n_theta], false),
                    (ringf[(l * n_r + i) * n_theta + j], true),
                ];
                if i > 0 {
                    cell.push((ringf[(l * n_r + i - 1) * n_theta + j], false));
                }
                b.cells.push(cell);
            }
        }
    }
    b.boundary_tags = tags;
    b.build()
}

/// Single prism over a counterclockwise polygon in the `xy` plane, extruded to
/// `height` with the top face shifted by `shear`. Labels: `bottom`, `top`, `side0`, `side1`, ...
pub fn generate_prism<T: Real>(base: &[[T; 2]], height: T, shear: [T; 2]) -> Result<Mesh<T>, MeshError> {
    let n = base.len();
    if n < 3 {
        return Err(MeshError::BadArgument("prism base needs at least 3 vertices".into()));
    }
    if !(height > T::zero()) {
        return Err(MeshError::DegenerateBounds("prism height must be positive".into()));
    }
    let mut b = MeshBuilder::new();
    for p in base {
        b.vertices.push(Vec3::new(p[0], p[1], T::zero()));
    }
    for p in base {
        b.vertices.push(Vec3::new(p[0] + shear[0], p[1] + shear[1], height));
    }
    let mut tags: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    b.faces.push(FaceSpec {
        vertices: (0..n).rev().collect(),
        surface: None,
    });
    b.faces.push(FaceSpec {
        vertices: (n..2 * n).collect(),
        surface: None,
    });
    tags.insert("bottom".into(), vec![0]);
    tags.insert("top".into(), vec![1]);
    for i in 0..n {
        let j = (i + 1) % n;
        b.faces.push(FaceSpec {
            vertices: vec![i, j, n + j, n + i],
            surface: None,
        });
        tags.insert(format!("side{i}"), vec![2 + i]);
    }
    b.cells.push((0..n + 2).map(|f| (f, true)).collect());
    b.boundary_tags = tags;
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate;
    use std::f64::consts::PI;

    #[test]
    fn box_volume_and_tags() {
        let m = generate_box::<f64>([3, 2, 4], [0.0, -1.0, 0.0], [1.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.num_cells(), 24);
        let vol: f64 = (0..m.num_cells()).map(|c| m.cell_geometry(c).volume).sum();
        assert!((vol - 4.0).abs() < 1e-13);
        let tags = m.boundary_tags();
        assert_eq!(tags["x0"].len(), 8);
        assert_eq!(tags["z1"].len(), 6);
        assert_eq!(tags.len(), 6);
    }

    #[test]
    fn prism_volume() {
        let hex = [[0.0, 0.0], [2.0, 0.0], [3.0, 1.0], [2.0, 2.0], [0.0, 2.0], [-1.0, 1.0]];
        let m = generate_prism::<f64>(&hex, 0.5, [0.3, -0.2]).unwrap();
        assert!((m.cell_geometry(0).volume - 0.5 * 6.0).abs() < 1e-13);
        assert_eq!(m.boundary_labels().len(), 8);
    }

    #[test]
    fn degenerate_box_bounds() {
        assert!(matches!(
            generate_box::<f64>([1, 1, 1], [0.0; 3], [1.0, 0.0, 1.0]),
            Err(MeshError::DegenerateBounds(_))
        ));
    }

    #[test]
    fn cylinder_volume_and_lateral_area() {
        for &(nr, nt, nz) in &[(1, 4, 1), (2, 8, 4), (3, 12, 2)] {
            let m = generate_cylinder::<f64>(nr, nt, nz, 1.0, 2.0).unwrap();
            assert_eq!(m.num_cells(), nr * nt * nz);
            let vol: f64 = (0..m.num_cells()).map(|c| m.cell_geometry(c).volume).sum();
            // chord faces split the disk, so the cells still tile it exactly
            assert!((vol - 2.0 * PI).abs() < 1e-10, "{vol}");
            let lateral: f64 = m.boundary_tags()["lateral"].iter().map(|&f| m.face_geometry(f).area).sum();
            assert!((lateral - 4.0 * PI).abs() < 1e-11);
            let report = validate(&m, 0.1);
            assert!(report.is_ok(), "{report:?}");
        }
    }

    #[test]
    fn cylinder_arc_edges_follow_the_boundary() {
        let m = generate_cylinder::<f64>(2, 6, 1, 1.5, 1.0).unwrap();
        let arcs = m.edges().iter().filter(|e| e.arc.is_some()).count();
        assert_eq!(arcs, 12);
        for (ei, e) in m.edges().iter().enumerate() {
            if e.arc.is_some() {
                let p = m.edge_point(ei, 0.3);
                assert!(((p.x * p.x + p.y * p.y).sqrt() - 1.5).abs() < 1e-13);
            }
        }
    }
}
