//! Mesh quality checks.

use super::Mesh;
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeometryQualityReport {
    pub min_cell_diameter: f64,
    pub max_cell_diameter: f64,
    pub min_volume: f64,
    /// Smallest `h_F / h_E` over all cell/face pairs.
    pub min_face_ratio: f64,
    /// Cells with a face smaller than `rho_min · h_E`.
    pub small_face_cells: Vec<usize>,
    /// Cells with volume below `1e-14 · h_E³`.
    pub degenerate_cells: Vec<usize>,
    /// Cells whose faces are not all visible from the centroid.
    pub non_star_cells: Vec<usize>,
}

impl GeometryQualityReport {
    pub fn is_ok(&self) -> bool {
        self.small_face_cells.is_empty() && self.degenerate_cells.is_empty() && self.non_star_cells.is_empty()
    }
}

/// Checks per-cell size ratios, degeneracy and star-shapedness with respect to
/// the cell centroid. Star-shapedness is tested on face quadrature points, which
/// also covers the sub-triangles used by the face rules.
pub fn validate<T: Real>(mesh: &Mesh<T>, rho_min: f64) -> GeometryQualityReport {
    let mut r = GeometryQualityReport {
        min_cell_diameter: f64::INFINITY,
        min_volume: f64::INFINITY,
        min_face_ratio: f64::INFINITY,
        ..Default::default()
    };
    for c in 0..mesh.num_cells() {
        let g = mesh.cell_geometry(c);
        let h = to_f64(g.diameter);
        r.min_cell_diameter = r.min_cell_diameter.min(h);
        r.max_cell_diameter = r.max_cell_diameter.max(h);
        r.min_volume = r.min_volume.min(to_f64(g.volume));
        if to_f64(g.volume) < 1e-14 * h * h * h {
            r.degenerate_cells.push(c);
        }
        let mut small = false;
        let mut star = true;
        for &(fi, out) in &mesh.cells()[c].faces {
            let ratio = to_f64(mesh.face_geometry(fi).diameter) / h;
            r.min_face_ratio = r.min_face_ratio.min(ratio);
            small |= ratio < rho_min;
            let Ok(rule) = mesh.face_rule(fi, 2) else {
                star = false;
                continue;
            };
            let sign = if out { T::one() } else { -T::one() };
            let tol = lit::<T>(1e-12) * g.diameter;
            for (x, n) in rule.rule.points.iter().zip(&rule.normals) {
                if (x - g.centroid).dot(n) * sign <= tol {
                    star = false;
                }
            }
            for &v in &mesh.faces()[fi].vertices {
                let n = mesh.face_geometry(fi).normal;
                if mesh.face_geometry(fi).planar && (mesh.vertices()[v] - g.centroid).dot(&n) * sign <= tol {
                    star = false;
                }
            }
        }
        if small {
            r.small_face_cells.push(c);
        }
        if !star {
            r.non_star_cells.push(c);
        }
    }
    r
}
