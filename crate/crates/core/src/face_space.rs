//! Local virtual element spaces on faces.
//!
//! A conforming face carries vertex values, `k - 1` Gauss-Lobatto values per
//! edge and moments against `P_{k-2}(F)`; its projection is the enhanced `Π⁰_k`
//! built from `Π∇_k`. A nonconforming face carries moments against `P_{k-1}(F)`
//! only and is projected by the plain `L²` projection onto that space.
//!
//! Everything is computed in a 2D chart of the face. Planar faces use an
//! orthonormal frame at the centroid. Cylindrical patches are developed onto the
//! plane with `(r (θ - θ_c), z - z_c)`; the chart is an isometry, so polynomials
//! in the chart span the mapped space `P̃(F)` built on `(θ, z)` and all surface
//! integrals become plain chart integrals.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::curved::CylinderPatch;
use crate::geometry::Vec3;
use crate::mesh::{FaceKind, Mesh};
use crate::polybasis::{dim_poly, MonomialBasis};
use crate::quadrature::{edge_rule, gauss_lobatto_interior, FaceRule, QuadratureError};
use crate::scalar::{lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("face {face}: {source}")]
    Quadrature {
        face: usize,
        #[source]
        source: QuadratureError,
    },
    #[error("{entity} {index}: singular local matrix")]
    Singular { entity: &'static str, index: usize },
    #[error("polynomial degree must be at least 1")]
    BadDegree,
}

/// Face coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Chart<T: Real> {
    Planar { origin: Vec3<T>, e1: Vec3<T>, e2: Vec3<T> },
    /// `sign` makes the chart orientation agree with the stored face normal.
    Developed {
        radius: T,
        theta_c: T,
        z_c: T,
        sign: T,
    },
}

impl<T: Real> Chart<T> {
    fn for_face(mesh: &Mesh<T>, face: usize) -> Self {
        let g = mesh.face_geometry(face);
        match &mesh.faces()[face].surface {
            None => Chart::Planar {
                origin: g.centroid,
                e1: g.frame.0,
                e2: g.frame.1,
            },
            Some(p) => Self::developed(p, g.normal, g.centroid),
        }
    }

    fn developed(p: &CylinderPatch<T>, normal: Vec3<T>, centroid: Vec3<T>) -> Self {
        let half = lit::<T>(0.5);
        let theta_c = (p.theta_range[0] + p.theta_range[1]) * half;
        let radial = Vec3::new(theta_c.cos(), theta_c.sin(), T::zero());
        Chart::Developed {
            radius: p.radius,
            theta_c,
            z_c: centroid.z,
            sign: if normal.dot(&radial) >= T::zero() { T::one() } else { -T::one() },
        }
    }

    pub fn coords(&self, x: &Vec3<T>) -> [T; 2] {
        match self {
            Chart::Planar { origin, e1, e2 } => {
                let d = x - origin;
                [d.dot(e1), d.dot(e2)]
            }
            Chart::Developed {
                radius,
                theta_c,
                z_c,
                sign,
            } => {
                let mut dt = x.y.atan2(x.x) - *theta_c;
                let pi = T::pi();
                while dt > pi {
                    dt -= T::two_pi();
                }
                while dt <= -pi {
                    dt += T::two_pi();
                }
                [*sign * *radius * dt, x.z - *z_c]
            }
        }
    }

    /// Chart components of a tangent vector `v` at surface point `x`.
    pub fn tangent(&self, x: &Vec3<T>, v: &Vec3<T>) -> [T; 2] {
        match self {
            Chart::Planar { e1, e2, .. } => [v.dot(e1), v.dot(e2)],
            Chart::Developed { sign, .. } => {
                let rho = (x.x * x.x + x.y * x.y).sqrt();
                let e_theta = Vec3::new(-x.y / rho, x.x / rho, T::zero());
                [*sign * v.dot(&e_theta), v.z]
            }
        }
    }
}

/// Degree of freedom of a face space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaceDof {
    /// Value at a mesh vertex.
    Vertex(usize),
    /// Value at Gauss-Lobatto point `index` of a mesh edge, counted in the edge's own direction.
    EdgePoint { edge: usize, index: usize },
    /// Scaled moment `(1/|F|) ∫_F v m_j`.
    Moment(usize),
}

#[derive(Debug, Clone)]
pub struct FaceSpace<T: Real> {
    pub face: usize,
    pub kind: FaceKind,
    pub degree: usize,
    pub chart: Chart<T>,
    /// Basis of the projection range: degree `k` (conforming) or `k - 1` (nonconforming).
    pub basis: MonomialBasis<T>,
    /// Number of moment DoFs; the moment functions are the leading basis members.
    pub moment_count: usize,
    pub dofs: Vec<FaceDof>,
    /// Coefficients of the face projection, `basis.len() × dofs.len()`.
    pub projection: DMatrix<T>,
    /// `Π∇_k` coefficients (conforming faces only).
    pub pi_nabla: Option<DMatrix<T>>,
    pub area: T,
    /// Quadrature of exactness `2k`, normals along the stored face orientation.
    pub rule: FaceRule<T>,
}

fn lagrange<T: Real>(nodes: &[T], t: T, out: &mut [T]) {
    for (j, o) in out.iter_mut().enumerate() {
        let mut v = T::one();
        for (m, tm) in nodes.iter().enumerate() {
            if m != j {
                v *= (t - *tm) / (nodes[j] - *tm);
            }
        }
        *o = v;
    }
}

/// Interior Gauss-Lobatto parameters of an edge for degree `k`.
pub fn edge_nodes<T: Real>(k: usize) -> Vec<T> {
    gauss_lobatto_interior(k).into_iter().map(lit).collect()
}

impl<T: Real> FaceSpace<T> {
    pub fn new(mesh: &Mesh<T>, face: usize, degree: usize) -> Result<Self, SpaceError> {
        if degree == 0 {
            return Err(SpaceError::BadDegree);
        }
        let kind = mesh.face_kind(face);
        let chart = Chart::for_face(mesh, face);
        let g = mesh.face_geometry(face);
        let rule = mesh
            .face_rule(face, 2 * degree)
            .map_err(|source| SpaceError::Quadrature { face, source })?;
        let area = rule.rule.measure();
        let range_degree = match kind {
            FaceKind::Conforming => degree,
            FaceKind::Nonconforming => degree - 1,
        };
        let basis = MonomialBasis::new(2, range_degree, &[T::zero(), T::zero()], g.diameter)
            .expect("valid face basis");
        let nb = basis.len();

        let mut mass = DMatrix::zeros(nb, nb);
        let mut vals = vec![T::zero(); nb];
        for (x, w) in rule.rule.points.iter().zip(&rule.rule.weights) {
            basis.eval_into(&chart.coords(x), &mut vals);
            for a in 0..nb {
                for b in 0..nb {
                    mass[(a, b)] += *w * vals[a] * vals[b];
                }
            }
        }
        let mass_inv = mass
            .clone()
            .cholesky()
            .ok_or(SpaceError::Singular { entity: "face", index: face })?;

        let mut space = FaceSpace {
            face,
            kind,
            degree,
            chart,
            basis,
            moment_count: 0,
            dofs: Vec::new(),
            projection: DMatrix::zeros(0, 0),
            pi_nabla: None,
            area,
            rule,
        };
        match kind {
            FaceKind::Nonconforming => {
                space.moment_count = nb;
                space.dofs = (0..nb).map(FaceDof::Moment).collect();
                space.projection = mass_inv.solve(&DMatrix::from_diagonal_element(nb, nb, area));
            }
            FaceKind::Conforming => space.build_conforming(mesh, &mass, &mass_inv)?,
        }
        Ok(space)
    }

    fn build_conforming(
        &mut self,
        mesh: &Mesh<T>,
        mass: &DMatrix<T>,
        mass_inv: &nalgebra::Cholesky<T, nalgebra::Dyn>,
    ) -> Result<(), SpaceError> {
        let k = self.degree;
        let f = &mesh.faces()[self.face];
        let nodes = edge_nodes::<T>(k);
        let nv = f.vertices.len();
        self.moment_count = dim_poly(2, k as isize - 2);
        let mut dofs: Vec<FaceDof> = f.vertices.iter().map(|&v| FaceDof::Vertex(v)).collect();
        for &(e, _) in &f.edges {
            for j in 0..nodes.len() {
                dofs.push(FaceDof::EdgePoint { edge: e, index: j });
            }
        }
        let moment_start = dofs.len();
        dofs.extend((0..self.moment_count).map(FaceDof::Moment));
        let nd = dofs.len();
        let nb = self.basis.len();

        let mut stiff = DMatrix::zeros(nb, nb);
        let mut grads = vec![[T::zero(); 3]; nb];
        for (x, w) in self.rule.rule.points.iter().zip(&self.rule.rule.weights) {
            self.basis.grad_into(&self.chart.coords(x), &mut grads);
            for a in 0..nb {
                for b in 0..nb {
                    stiff[(a, b)] += *w * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                }
            }
        }

        let mut b_mat = DMatrix::zeros(nb, nd);
        if self.moment_count > 0 {
            let lap = self.basis.laplacian_map();
            for a in 0..nb {
                for beta in 0..self.moment_count {
                    b_mat[(a, moment_start + beta)] -= self.area * lap[(beta, a)];
                }
            }
        }

        // boundary integrals, with v interpolated from its edge nodes
        let mut all_nodes = vec![T::zero()];
        all_nodes.extend(nodes.iter().copied());
        all_nodes.push(T::one());
        let mut ell = vec![T::zero(); all_nodes.len()];
        let mut vals = vec![T::zero(); nb];
        let mut boundary_mean = vec![T::zero(); nb];
        let mut boundary_row = vec![T::zero(); nd];
        let face_shape = mesh.face_shape(self.face);
        let loop_edges: Vec<_> = match &face_shape {
            crate::geometry::FaceShape::Planar { boundary, .. } => boundary.clone(),
            crate::geometry::FaceShape::Cylinder { .. } => f
                .edges
                .iter()
                .map(|&(e, rev)| {
                    let s = mesh.edge_shape(e);
                    if rev {
                        s.reversed()
                    } else {
                        s
                    }
                })
                .collect(),
        };
        for (i, (&(_, rev), shape)) in f.edges.iter().zip(&loop_edges).enumerate() {
            let m = nodes.len();
            let mut local = Vec::with_capacity(m + 2);
            local.push(i);
            for j in 0..m {
                let own = if rev { m - 1 - j } else { j };
                local.push(nv + i * m + own);
            }
            local.push((i + 1) % nv);
            let er = edge_rule(shape, 2 * k);
            for ((x, w), (t, tau)) in er
                .rule
                .points
                .iter()
                .zip(&er.rule.weights)
                .zip(er.params.iter().zip(&er.tangents))
            {
                lagrange(&all_nodes, *t, &mut ell);
                let tc = self.chart.tangent(x, tau);
                let len = (tc[0] * tc[0] + tc[1] * tc[1]).sqrt();
                let nu = [tc[1] / len, -tc[0] / len];
                let xi = self.chart.coords(x);
                self.basis.grad_into(&xi, &mut grads);
                self.basis.eval_into(&xi, &mut vals);
                for a in 0..nb {
                    let dn = grads[a][0] * nu[0] + grads[a][1] * nu[1];
                    boundary_mean[a] += *w * vals[a];
                    for (l, &d) in local.iter().enumerate() {
                        b_mat[(a, d)] += *w * ell[l] * dn;
                    }
                }
                for (l, &d) in local.iter().enumerate() {
                    boundary_row[d] += *w * ell[l];
                }
            }
        }

        // fix the constant: boundary mean for k = 1, the zeroth moment otherwise
        let mut g = stiff;
        if self.moment_count == 0 {
            for b in 0..nb {
                g[(0, b)] = boundary_mean[b];
            }
            for d in 0..nd {
                b_mat[(0, d)] = boundary_row[d];
            }
        } else {
            for b in 0..nb {
                g[(0, b)] = mass[(0, b)] / self.area;
            }
            for d in 0..nd {
                b_mat[(0, d)] = T::zero();
            }
            b_mat[(0, moment_start)] = T::one();
        }
        let pi_nabla = g
            .lu()
            .solve(&b_mat)
            .ok_or(SpaceError::Singular { entity: "face", index: self.face })?;

        // enhanced L² projection: true moments below degree k-1, Π∇ above
        let mut rhs = mass * &pi_nabla;
        for beta in 0..self.moment_count {
            for d in 0..nd {
                rhs[(beta, d)] = T::zero();
            }
            rhs[(beta, moment_start + beta)] = self.area;
        }
        self.projection = mass_inv.solve(&rhs);
        self.pi_nabla = Some(pi_nabla);
        self.dofs = dofs;
        Ok(())
    }

    pub fn eval_basis(&self, x: &Vec3<T>, out: &mut [T]) {
        self.basis.eval_into(&self.chart.coords(x), out);
    }

    /// Row vector mapping face DoFs to the value of the face projection at `x`.
    pub fn projection_row(&self, x: &Vec3<T>) -> DVector<T> {
        let mut vals = vec![T::zero(); self.basis.len()];
        self.eval_basis(x, &mut vals);
        self.projection.tr_mul(&DVector::from_vec(vals))
    }

    /// Scaled moments `(1/|F|) ∫_F f m_j` for `j < moment_count`.
    pub fn moments_of<F: Fn(&Vec3<T>) -> T>(&self, mesh: &Mesh<T>, f: F, exactness: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.moment_count];
        if self.moment_count == 0 {
            return out;
        }
        let rule = mesh.face_rule(self.face, exactness).unwrap_or_else(|_| self.rule.clone());
        let mut vals = vec![T::zero(); self.basis.len()];
        for (x, w) in rule.rule.points.iter().zip(&rule.rule.weights) {
            self.eval_basis(x, &mut vals);
            let fx = f(x);
            for j in 0..self.moment_count {
                out[j] += *w * fx * vals[j];
            }
        }
        out.iter_mut().for_each(|v| *v /= self.area);
        out
    }

    /// DoF values of a function.
    pub fn interpolate<F: Fn(&Vec3<T>) -> T>(&self, mesh: &Mesh<T>, f: F) -> DVector<T> {
        let nodes = edge_nodes::<T>(self.degree);
        let moments = self.moments_of(mesh, &f, 2 * self.degree + 4);
        DVector::from_iterator(
            self.dofs.len(),
            self.dofs.iter().map(|d| match *d {
                FaceDof::Vertex(v) => f(&mesh.vertices()[v]),
                FaceDof::EdgePoint { edge, index } => f(&mesh.edge_point(edge, nodes[index])),
                FaceDof::Moment(j) => moments[j],
            }),
        )
    }
}

/// Face spaces for every face of the mesh, built in parallel.
pub fn build_face_spaces<T: Real>(mesh: &Mesh<T>, degree: usize) -> Result<Vec<FaceSpace<T>>, SpaceError> {
    (0..mesh.faces().len())
        .into_par_iter()
        .map(|f| FaceSpace::new(mesh, f, degree))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box, generate_cylinder, KindRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random polynomial of degree `deg` in the chart coordinates of a face.
    fn chart_poly(space: &FaceSpace<f64>, deg: usize, seed: u64) -> impl Fn(&Vec3<f64>) -> f64 + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = MonomialBasis::new(2, deg, &[0.0, 0.0], space.basis.diameter()).unwrap();
        let coef: Vec<f64> = (0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        move |x| {
            let mut v = vec![0.0; b.len()];
            b.eval_into(&space.chart.coords(x), &mut v);
            v.iter().zip(&coef).map(|(a, c)| a * c).sum()
        }
    }

    fn check_reproduction(mesh: &Mesh<f64>, k: usize, tol: f64) {
        for f in 0..mesh.faces().len() {
            let s = FaceSpace::new(mesh, f, k).unwrap();
            let deg = s.basis.degree();
            let p = chart_poly(&s, deg, f as u64);
            let dofs = s.interpolate(mesh, &p);
            for (x, _) in s.rule.rule.points.iter().zip(&s.rule.rule.weights) {
                let v = s.projection_row(x).dot(&dofs);
                assert!((v - p(x)).abs() < tol, "face {f} k {k}: {v} vs {}", p(x));
            }
        }
    }

    #[test]
    fn conforming_faces_reproduce_polynomials() {
        let m = generate_box::<f64>([1, 1, 1], [0.0; 3], [1.0, 2.0, 0.5]).unwrap();
        for k in 1..=3 {
            check_reproduction(&m, k, 1e-11);
        }
    }

    #[test]
    fn nonconforming_faces_reproduce_polynomials() {
        let m = generate_box::<f64>([1, 1, 1], [0.0; 3], [1.0; 3])
            .unwrap()
            .tag_face_kinds(&KindRule::new(["x0", "x1", "y0", "y1", "z0", "z1"]))
            .unwrap();
        for k in 1..=3 {
            check_reproduction(&m, k, 1e-11);
        }
    }

    #[test]
    fn developed_cylinder_faces_reproduce_chart_polynomials() {
        let m = generate_cylinder::<f64>(1, 6, 1, 1.0, 1.0).unwrap();
        for k in 1..=3 {
            for f in m.boundary_tags()["lateral"].clone() {
                for kind in [KindRule::conforming(), KindRule::new(["lateral"])] {
                    let mt = m.tag_face_kinds(&kind).unwrap();
                    let s = FaceSpace::new(&mt, f, k).unwrap();
                    let p = chart_poly(&s, s.basis.degree(), 3);
                    let dofs = s.interpolate(&mt, &p);
                    for x in &s.rule.rule.points {
                        assert!((s.projection_row(x).dot(&dofs) - p(x)).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn pi_nabla_is_a_projection() {
        let m = generate_box::<f64>([1, 1, 1], [0.0; 3], [1.0; 3]).unwrap();
        let s = FaceSpace::new(&m, 0, 2).unwrap();
        let pn = s.pi_nabla.clone().unwrap();
        // DoFs of Π∇ v, then project again
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = DVector::from_fn(s.dofs.len(), |_, _| rng.gen_range(-1.0..1.0));
        let c = &pn * &v;
        let poly = |x: &Vec3<f64>| {
            let mut vals = vec![0.0; s.basis.len()];
            s.eval_basis(x, &mut vals);
            vals.iter().zip(c.iter()).map(|(a, b)| a * b).sum::<f64>()
        };
        let again = &pn * s.interpolate(&m, poly);
        assert!((again - c).norm() < 1e-12);
    }

    #[test]
    fn chart_of_developed_face_is_isometric() {
        let m = generate_cylinder::<f64>(1, 4, 1, 2.0, 1.0).unwrap();
        let f = m.boundary_tags()["lateral"][0];
        let s = FaceSpace::new(&m, f, 1).unwrap();
        // chart area equals surface area: ∫ 1 dA = |F| = r Δθ Δz
        assert!((s.area - 2.0 * std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let c: Vec<[f64; 2]> = m.faces()[f].vertices.iter().map(|&v| s.chart.coords(&m.vertices()[v])).collect();
        let shoelace: f64 = (0..4).map(|i| c[i][0] * c[(i + 1) % 4][1] - c[(i + 1) % 4][0] * c[i][1]).sum::<f64>() / 2.0;
        assert!((shoelace - s.area).abs() < 1e-12);
    }
}
