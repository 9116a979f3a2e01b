//! Local conforming/nonconforming virtual element space on a cell.
//!
//! Scalar DoFs are grouped as: vertices and edge points lying on conforming
//! faces, moments on conforming faces (`P_{k-2}`), moments on nonconforming
//! faces (`P_{k-1}`), and cell moments (`P_{k-2}`). Face contributions enter the
//! projectors through the face projections of [`FaceSpace`].

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};

use crate::face_space::{edge_nodes, FaceDof, FaceSpace, SpaceError};
use crate::geometry::{mean_point, Vec3};
use crate::mesh::{FaceKind, Mesh};
use crate::polybasis::{dim_poly, MonomialBasis};
use crate::quadrature::{cell_rule, FaceRule, QuadratureRule};
use crate::scalar::Real;

/// Global identity of a scalar degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DofKey {
    Vertex(usize),
    EdgePoint { edge: usize, index: usize },
    FaceMoment { face: usize, index: usize },
    CellMoment { cell: usize, index: usize },
}

impl DofKey {
    pub fn from_face(face: usize, d: FaceDof) -> Self {
        match d {
            FaceDof::Vertex(v) => DofKey::Vertex(v),
            FaceDof::EdgePoint { edge, index } => DofKey::EdgePoint { edge, index },
            FaceDof::Moment(index) => DofKey::FaceMoment { face, index },
        }
    }
}

/// Sizes of the five DoF groups, in local order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DofGroups {
    pub vertices: usize,
    pub edge_points: usize,
    pub conforming_moments: usize,
    pub nonconforming_moments: usize,
    pub cell_moments: usize,
}

impl DofGroups {
    pub fn total(&self) -> usize {
        self.vertices + self.edge_points + self.conforming_moments + self.nonconforming_moments + self.cell_moments
    }
}

#[derive(Debug, Clone)]
pub struct ElementSpace<T: Real> {
    pub cell: usize,
    pub degree: usize,
    pub keys: Vec<DofKey>,
    pub groups: DofGroups,
    /// Scaled monomials of degree `k` centered at the centroid.
    pub basis: MonomialBasis<T>,
    pub volume: T,
    pub diameter: T,
    /// `Π∇_k`, `dim P_k × n`.
    pub pi_nabla: DMatrix<T>,
    /// Gram matrix of `Π∇_k` (gradient inner products, first row replaced by the boundary mean).
    pub g_nabla: DMatrix<T>,
    /// Right-hand side of `Π∇_k`, so that `Π∇_k = G⁻¹ B`.
    pub b_nabla: DMatrix<T>,
    /// Enhanced `Π⁰_k`, `dim P_k × n`.
    pub pi0: DMatrix<T>,
    /// `Π⁰_{k-1} ∂_i`, `dim P_{k-1} × n` per axis.
    pub grad: [DMatrix<T>; 3],
    /// Mass matrix of the degree `k` basis.
    pub mass: DMatrix<T>,
    /// DoFs of the basis monomials, `n × dim P_k`.
    pub dof_matrix: DMatrix<T>,
    /// Cell rule of exactness `2k`.
    pub rule: QuadratureRule<T>,
    /// Face rules with outward normals, in cell face order.
    pub face_rules: Vec<FaceRule<T>>,
}

impl<T: Real> ElementSpace<T> {
    pub fn new(mesh: &Mesh<T>, cell: usize, degree: usize, faces: &[FaceSpace<T>]) -> Result<Self, SpaceError> {
        if degree == 0 {
            return Err(SpaceError::BadDegree);
        }
        let k = degree;
        let geo = mesh.cell_geometry(cell);
        let cell_faces = &mesh.cells()[cell].faces;

        // local numbering
        let mut verts = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for &(f, _) in cell_faces {
            if mesh.face_kind(f) == FaceKind::Conforming {
                verts.extend(mesh.faces()[f].vertices.iter().copied());
                edges.extend(mesh.faces()[f].edges.iter().map(|e| e.0));
            }
        }
        let points_per_edge = k - 1;
        let mut keys: Vec<DofKey> = verts.iter().map(|&v| DofKey::Vertex(v)).collect();
        for &e in &edges {
            keys.extend((0..points_per_edge).map(|index| DofKey::EdgePoint { edge: e, index }));
        }
        let mut groups = DofGroups {
            vertices: verts.len(),
            edge_points: edges.len() * points_per_edge,
            ..Default::default()
        };
        for kind in [FaceKind::Conforming, FaceKind::Nonconforming] {
            for &(f, _) in cell_faces {
                if mesh.face_kind(f) == kind {
                    let n = faces[f].moment_count;
                    keys.extend((0..n).map(|index| DofKey::FaceMoment { face: f, index }));
                    match kind {
                        FaceKind::Conforming => groups.conforming_moments += n,
                        FaceKind::Nonconforming => groups.nonconforming_moments += n,
                    }
                }
            }
        }
        let n_cell = dim_poly(3, k as isize - 2);
        groups.cell_moments = n_cell;
        let cell_start = keys.len();
        keys.extend((0..n_cell).map(|index| DofKey::CellMoment { cell, index }));
        let local: HashMap<DofKey, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let n = keys.len();

        let c = geo.centroid;
        let basis = MonomialBasis::new(3, k, &[c.x, c.y, c.z], geo.diameter).expect("valid cell basis");
        let nk = basis.len();
        let nk1 = dim_poly(3, k as isize - 1);
        let volume = geo.volume;

        let face_rules: Vec<FaceRule<T>> = cell_faces
            .iter()
            .map(|&(f, out)| if out { faces[f].rule.clone() } else { faces[f].rule.flipped() })
            .collect();
        let apex = mean_point(&mesh.cell_vertices(cell).iter().map(|&v| mesh.vertices()[v]).collect::<Vec<_>>());
        let rule = cell_rule(&face_rules, &apex, 2 * k);

        let rel = |x: &Vec3<T>| [x.x, x.y, x.z];
        let mut vals = vec![T::zero(); nk];
        let mut grads = vec![[T::zero(); 3]; nk];
        let mut mass = DMatrix::zeros(nk, nk);
        let mut stiff = DMatrix::zeros(nk, nk);
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            basis.eval_into(&rel(x), &mut vals);
            basis.grad_into(&rel(x), &mut grads);
            for a in 0..nk {
                for b in 0..nk {
                    mass[(a, b)] += *w * vals[a] * vals[b];
                    stiff[(a, b)] +=
                        *w * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1] + grads[a][2] * grads[b][2]);
                }
            }
        }

        let mut b_nabla = DMatrix::zeros(nk, n);
        let mut grad_rhs = [DMatrix::zeros(nk1, n), DMatrix::zeros(nk1, n), DMatrix::zeros(nk1, n)];
        let mut boundary_g0 = vec![T::zero(); nk];
        let mut dof_matrix = DMatrix::zeros(n, nk);

        for (&(f, _), fr) in cell_faces.iter().zip(&face_rules) {
            let fs = &faces[f];
            let map: Vec<usize> = fs.dofs.iter().map(|d| local[&DofKey::from_face(f, *d)]).collect();
            let mut fvals = vec![T::zero(); fs.basis.len()];
            for ((x, w), nrm) in fr.rule.points.iter().zip(&fr.rule.weights).zip(&fr.normals) {
                let row = fs.projection_row(x);
                basis.eval_into(&rel(x), &mut vals);
                basis.grad_into(&rel(x), &mut grads);
                for a in 0..nk {
                    let dn = grads[a][0] * nrm.x + grads[a][1] * nrm.y + grads[a][2] * nrm.z;
                    boundary_g0[a] += *w * vals[a];
                    for (l, &d) in map.iter().enumerate() {
                        b_nabla[(a, d)] += *w * dn * row[l];
                    }
                }
                for (l, &d) in map.iter().enumerate() {
                    b_nabla[(0, d)] += *w * row[l];
                }
                for axis in 0..3 {
                    let ni = nrm[axis];
                    for a in 0..nk1 {
                        let s = *w * vals[a] * ni;
                        for (l, &d) in map.iter().enumerate() {
                            grad_rhs[axis][(a, d)] += s * row[l];
                        }
                    }
                }
                // face moments of the monomials
                fs.eval_basis(x, &mut fvals);
                for j in 0..fs.moment_count {
                    let d = local[&DofKey::FaceMoment { face: f, index: j }];
                    for a in 0..nk {
                        dof_matrix[(d, a)] += *w * vals[a] * fvals[j] / fs.area;
                    }
                }
            }
        }
        if n_cell > 0 {
            let lap = basis.laplacian_map();
            for a in 1..nk {
                for beta in 0..n_cell {
                    b_nabla[(a, cell_start + beta)] -= volume * lap[(beta, a)];
                }
            }
            let lower = basis.with_degree(k - 1);
            for axis in 0..3 {
                let dmap = lower.derivative_map(axis);
                for a in 0..nk1 {
                    for beta in 0..n_cell {
                        grad_rhs[axis][(a, cell_start + beta)] -= volume * dmap[(beta, a)];
                    }
                }
            }
        }

        let mut g = stiff;
        for b in 0..nk {
            g[(0, b)] = boundary_g0[b];
        }
        let pi_nabla = g
            .clone()
            .lu()
            .solve(&b_nabla)
            .ok_or(SpaceError::Singular { entity: "cell", index: cell })?;

        let chol = mass
            .clone()
            .cholesky()
            .ok_or(SpaceError::Singular { entity: "cell", index: cell })?;
        let mut rhs = &mass * &pi_nabla;
        for beta in 0..n_cell {
            for d in 0..n {
                rhs[(beta, d)] = T::zero();
            }
            rhs[(beta, cell_start + beta)] = volume;
        }
        let pi0 = chol.solve(&rhs);

        let mass_k1 = mass.view((0, 0), (nk1, nk1)).into_owned();
        let chol1 = mass_k1
            .cholesky()
            .ok_or(SpaceError::Singular { entity: "cell", index: cell })?;
        let grad = grad_rhs.map(|r| chol1.solve(&r));

        // remaining rows of the DoF matrix
        let nodes = edge_nodes::<T>(k);
        for (i, key) in keys.iter().enumerate() {
            let x = match *key {
                DofKey::Vertex(v) => mesh.vertices()[v],
                DofKey::EdgePoint { edge, index } => mesh.edge_point(edge, nodes[index]),
                _ => continue,
            };
            basis.eval_into(&rel(&x), &mut vals);
            for a in 0..nk {
                dof_matrix[(i, a)] = vals[a];
            }
        }
        for beta in 0..n_cell {
            for a in 0..nk {
                dof_matrix[(cell_start + beta, a)] = mass[(beta, a)] / volume;
            }
        }

        Ok(ElementSpace {
            cell,
            degree,
            keys,
            groups,
            basis,
            volume,
            diameter: geo.diameter,
            pi_nabla,
            g_nabla: g,
            b_nabla,
            pi0,
            grad,
            mass,
            dof_matrix,
            rule,
            face_rules,
        })
    }

    pub fn ndofs(&self) -> usize {
        self.keys.len()
    }

    /// Mass matrix of the degree `k - 1` basis (leading block of [`Self::mass`]).
    pub fn mass_lower(&self) -> DMatrix<T> {
        let m = self.grad[0].nrows();
        self.mass.view((0, 0), (m, m)).into_owned()
    }

    /// Values of the basis monomials at `x`.
    pub fn eval_basis(&self, x: &Vec3<T>) -> DVector<T> {
        let mut v = DVector::zeros(self.basis.len());
        self.basis.eval_into(&[x.x, x.y, x.z], v.as_mut_slice());
        v
    }

    /// DoF values of a scalar function.
    pub fn interpolate<F: Fn(&Vec3<T>) -> T>(&self, mesh: &Mesh<T>, faces: &[FaceSpace<T>], f: F) -> DVector<T> {
        let nodes = edge_nodes::<T>(self.degree);
        let mut face_moments: HashMap<usize, Vec<T>> = HashMap::new();
        let n_cell = self.groups.cell_moments;
        let mut cell_moments = vec![T::zero(); n_cell];
        if n_cell > 0 {
            let rule = mesh.cell_rule(self.cell, 2 * self.degree + 2).unwrap_or_else(|_| self.rule.clone());
            let mut vals = vec![T::zero(); self.basis.len()];
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                self.basis.eval_into(&[x.x, x.y, x.z], &mut vals);
                let fx = f(x);
                for (b, m) in cell_moments.iter_mut().enumerate() {
                    *m += *w * fx * vals[b];
                }
            }
            cell_moments.iter_mut().for_each(|m| *m /= self.volume);
        }
        DVector::from_iterator(
            self.keys.len(),
            self.keys.iter().map(|key| match *key {
                DofKey::Vertex(v) => f(&mesh.vertices()[v]),
                DofKey::EdgePoint { edge, index } => f(&mesh.edge_point(edge, nodes[index])),
                DofKey::FaceMoment { face, index } => face_moments
                    .entry(face)
                    .or_insert_with(|| faces[face].moments_of(mesh, &f, 2 * self.degree + 4))[index],
                DofKey::CellMoment { index, .. } => cell_moments[index],
            }),
        )
    }

    /// Stabilization kernel `(I - D Π⁰_k)ᵀ (I - D Π⁰_k)` for one scalar component.
    pub fn stabilization(&self) -> DMatrix<T> {
        let n = self.ndofs();
        let m = DMatrix::identity(n, n) - &self.dof_matrix * &self.pi0;
        m.tr_mul(&m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face_space::build_face_spaces;
    use crate::mesh::{generate_box, generate_prism, KindRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(mesh: &Mesh<f64>, k: usize) -> (Vec<FaceSpace<f64>>, ElementSpace<f64>) {
        let faces = build_face_spaces(mesh, k).unwrap();
        let e = ElementSpace::new(mesh, 0, k, &faces).unwrap();
        (faces, e)
    }

    #[test]
    fn hexahedron_dof_counts() {
        let m = generate_box::<f64>([1, 1, 1], [0.0; 3], [1.0; 3]).unwrap();
        assert_eq!(space(&m, 2).1.ndofs(), 27);
        let top = m.tag_face_kinds(&KindRule::new(["z1"])).unwrap();
        let (_, e) = space(&top, 2);
        assert_eq!(e.ndofs(), 29);
        assert_eq!(
            e.groups,
            DofGroups {
                vertices: 8,
                edge_points: 12,
                conforming_moments: 5,
                nonconforming_moments: 3,
                cell_moments: 1
            }
        );
        let all = m.tag_face_kinds(&KindRule::new(["x0", "x1", "y0", "y1", "z0", "z1"])).unwrap();
        assert_eq!(space(&all, 1).1.ndofs(), 6);
    }

    fn check_projectors(mesh: &Mesh<f64>, k: usize, seed: u64) {
        let (faces, e) = space(mesh, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef = DVector::from_fn(e.basis.len(), |_, _| rng.gen_range(-1.0..1.0));
        let p = |x: &Vec3<f64>| e.eval_basis(x).dot(&coef);
        let dofs = e.interpolate(mesh, &faces, p);
        assert!((&e.pi_nabla * &dofs - &coef).norm() < 1e-10, "Π∇ k={k}");
        assert!((&e.b_nabla * &e.dof_matrix - &e.g_nabla).amax() < 1e-10 * e.g_nabla.amax(), "G = B D k={k}");
        assert!((&e.pi0 * &dofs - &coef).norm() < 1e-10, "Π⁰ k={k}");
        for axis in 0..3 {
            let exact = e.basis.derivative_map(axis) * &coef;
            assert!((&e.grad[axis] * &dofs - exact).norm() < 1e-10, "grad {axis} k={k}");
        }
        // the stabilization vanishes on polynomials
        assert!((e.stabilization() * &dofs).norm() < 1e-10);
    }

    #[test]
    fn projectors_are_exact_on_polynomials() {
        let base = [[0.0, 0.0], [1.0, 0.1], [1.3, 0.9], [0.4, 1.4], [-0.3, 0.7]];
        let prism = generate_prism::<f64>(&base, 0.8, [0.2, 0.1]).unwrap();
        let labels: Vec<String> = prism.boundary_labels().iter().map(|s| s.to_string()).collect();
        for k in 1..=3 {
            for mask in [0u32, 1, 0b101, 0b1111111] {
                let nc: Vec<&str> = labels
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, s)| s.as_str())
                    .collect();
                let m = prism.tag_face_kinds(&KindRule::new(nc)).unwrap();
                check_projectors(&m, k, mask as u64);
            }
        }
    }
}
