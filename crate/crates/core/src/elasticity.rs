//! Linear elasticity: local matrices, global assembly and solution.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::element_space::{DofKey, ElementSpace};
use crate::face_space::{build_face_spaces, FaceSpace, SpaceError};
use crate::geometry::Vec3;
use crate::mesh::{FaceKind, Mesh};
use crate::quadrature::QuadratureRule;
use crate::scalar::Real;
use crate::sparse::{solve, CsrMatrix, SolveError, SolverKind};

#[derive(Debug, Error)]
pub enum ElasticityError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("boundary face {face} has no label")]
    UntaggedBoundary { face: usize },
    #[error("no boundary condition for label `{0}`")]
    MissingCondition(String),
    #[error("material parameters must satisfy mu > 0 and lambda >= 0")]
    BadMaterial,
    #[error("quadrature failed on cell {0}")]
    Quadrature(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material<T: Real> {
    pub lambda: T,
    pub mu: T,
}

impl<T: Real> Material<T> {
    pub fn new(lambda: T, mu: T) -> Result<Self, ElasticityError> {
        if !(mu > T::zero()) || lambda < T::zero() {
            return Err(ElasticityError::BadMaterial);
        }
        Ok(Self { lambda, mu })
    }

    /// `σ(∇u) = 2μ ε(u) + λ tr ε(u) I`.
    pub fn stress(&self, grad: &[[T; 3]; 3]) -> [[T; 3]; 3] {
        let div = grad[0][0] + grad[1][1] + grad[2][2];
        let mut s = [[T::zero(); 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                s[a][b] = self.mu * (grad[a][b] + grad[b][a]);
            }
            s[a][a] += self.lambda * div;
        }
        s
    }
}

pub type VectorFn<T> = Arc<dyn Fn(&Vec3<T>) -> [T; 3] + Send + Sync>;
/// Traction as a function of position and outward unit normal.
pub type TractionFn<T> = Arc<dyn Fn(&Vec3<T>, &Vec3<T>) -> [T; 3] + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition<T: Real> {
    Dirichlet(VectorFn<T>),
    Neumann(TractionFn<T>),
}

/// How the Neumann load `∫_F h · v` sees the discrete function on a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeumannMode {
    /// Through the element projection `Π⁰_k v`.
    Element,
    /// Through the face projection (`Π⁰_k` on conforming, `Π⁰_{k-1}` on nonconforming faces).
    #[default]
    Face,
}

#[derive(Clone)]
pub struct Problem<T: Real> {
    pub material: Material<T>,
    pub body_force: VectorFn<T>,
    pub boundary: BTreeMap<String, BoundaryCondition<T>>,
    pub neumann: NeumannMode,
}

/// Face and element spaces of a mesh together with the global DoF numbering.
pub struct Discretization<T: Real> {
    pub mesh: Mesh<T>,
    pub degree: usize,
    pub faces: Vec<FaceSpace<T>>,
    pub elements: Vec<ElementSpace<T>>,
    /// Sorted global scalar DoFs; vector DoF `3 i + c` is component `c` of scalar DoF `i`.
    pub keys: Vec<DofKey>,
    pub index: HashMap<DofKey, usize>,
}

impl<T: Real> Discretization<T> {
    pub fn new(mesh: Mesh<T>, degree: usize) -> Result<Self, ElasticityError> {
        let faces = build_face_spaces(&mesh, degree)?;
        let elements = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| ElementSpace::new(&mesh, c, degree, &faces))
            .collect::<Result<Vec<_>, _>>()?;
        let mut keys: Vec<DofKey> = elements.iter().flat_map(|e| e.keys.iter().copied()).collect();
        keys.sort_unstable();
        keys.dedup();
        let index = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        Ok(Self {
            mesh,
            degree,
            faces,
            elements,
            keys,
            index,
        })
    }

    pub fn num_scalar_dofs(&self) -> usize {
        self.keys.len()
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.keys.len()
    }

    /// Global vector DoF indices of an element, in local order.
    pub fn element_dofs(&self, cell: usize) -> Vec<usize> {
        self.elements[cell]
            .keys
            .iter()
            .flat_map(|k| {
                let i = self.index[k];
                [3 * i, 3 * i + 1, 3 * i + 2]
            })
            .collect()
    }

    /// Vector DoF values of a function.
    pub fn interpolate(&self, f: &(dyn Fn(&Vec3<T>) -> [T; 3] + Sync)) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_dofs()];
        for e in &self.elements {
            for c in 0..3 {
                let vals = e.interpolate(&self.mesh, &self.faces, |x| f(x)[c]);
                for (k, v) in e.keys.iter().zip(vals.iter()) {
                    out[3 * self.index[k] + c] = *v;
                }
            }
        }
        out
    }

    /// Local vector DoFs of a cell extracted from a global vector.
    pub fn local_values(&self, cell: usize, global: &[T]) -> DVector<T> {
        let idx = self.element_dofs(cell);
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| global[i]))
    }

    /// Coefficients of `Π⁰_k u_h` per component on a cell.
    pub fn projected(&self, cell: usize, global: &[T]) -> [DVector<T>; 3] {
        let e = &self.elements[cell];
        let local = self.local_values(cell, global);
        let n = e.ndofs();
        std::array::from_fn(|c| {
            let comp = DVector::from_iterator(n, (0..n).map(|s| local[3 * s + c]));
            &e.pi0 * comp
        })
    }
}

/// Local stiffness matrix, DoFs interleaved as `3 s + c`.
pub fn local_stiffness<T: Real>(e: &ElementSpace<T>, material: &Material<T>) -> DMatrix<T> {
    let n = e.ndofs();
    let h1 = e.mass_lower();
    let nk1 = h1.nrows();
    let half = T::one() / (T::one() + T::one());
    // strain operators ε_ab, nk1 × 3n
    let strain = |a: usize, b: usize| {
        let mut m = DMatrix::zeros(nk1, 3 * n);
        for s in 0..n {
            for r in 0..nk1 {
                m[(r, 3 * s + a)] += half * e.grad[b][(r, s)];
                m[(r, 3 * s + b)] += half * e.grad[a][(r, s)];
            }
        }
        m
    };
    let mut k = DMatrix::zeros(3 * n, 3 * n);
    let mut trace = DMatrix::zeros(nk1, 3 * n);
    let two_mu = material.mu + material.mu;
    for a in 0..3 {
        for b in a..3 {
            let eps = strain(a, b);
            let weight = if a == b { two_mu } else { two_mu + two_mu };
            k += (eps.tr_mul(&(&h1 * &eps))) * weight;
            if a == b {
                trace += eps;
            }
        }
    }
    k += trace.tr_mul(&(&h1 * &trace)) * material.lambda;

    let s = e.stabilization() * (material.mu * e.diameter);
    for i in 0..n {
        for j in 0..n {
            for c in 0..3 {
                k[(3 * i + c, 3 * j + c)] += s[(i, j)];
            }
        }
    }
    k
}

/// Local load `∫_E f · Π⁰_k v`.
pub fn local_load<T: Real>(e: &ElementSpace<T>, rule: &QuadratureRule<T>, f: &(dyn Fn(&Vec3<T>) -> [T; 3] + Sync)) -> DVector<T> {
    let n = e.ndofs();
    let nk = e.basis.len();
    let mut moments = [DVector::zeros(nk), DVector::zeros(nk), DVector::zeros(nk)];
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        let m = e.eval_basis(x);
        let fx = f(x);
        for c in 0..3 {
            moments[c].axpy(*w * fx[c], &m, T::one());
        }
    }
    let mut out = DVector::zeros(3 * n);
    for c in 0..3 {
        let g = e.pi0.tr_mul(&moments[c]);
        for s in 0..n {
            out[3 * s + c] = g[s];
        }
    }
    out
}

/// Neumann load of one face of an element, with normals of `rule` pointing out of the element.
pub fn neumann_load<T: Real>(
    e: &ElementSpace<T>,
    face: &FaceSpace<T>,
    rule: &crate::quadrature::FaceRule<T>,
    traction: &(dyn Fn(&Vec3<T>, &Vec3<T>) -> [T; 3] + Sync),
    mode: NeumannMode,
) -> DVector<T> {
    let n = e.ndofs();
    let mut out = DVector::zeros(3 * n);
    match mode {
        NeumannMode::Element => {
            let nk = e.basis.len();
            let mut moments = [DVector::zeros(nk), DVector::zeros(nk), DVector::zeros(nk)];
            for ((x, w), nrm) in rule.rule.points.iter().zip(&rule.rule.weights).zip(&rule.normals) {
                let m = e.eval_basis(x);
                let h = traction(x, nrm);
                for c in 0..3 {
                    moments[c].axpy(*w * h[c], &m, T::one());
                }
            }
            for c in 0..3 {
                let g = e.pi0.tr_mul(&moments[c]);
                for s in 0..n {
                    out[3 * s + c] = g[s];
                }
            }
        }
        NeumannMode::Face => {
            let local: HashMap<DofKey, usize> = e.keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
            let map: Vec<usize> = face
                .dofs
                .iter()
                .map(|d| local[&DofKey::from_face(face.face, *d)])
                .collect();
            for ((x, w), nrm) in rule.rule.points.iter().zip(&rule.rule.weights).zip(&rule.normals) {
                let row = face.projection_row(x);
                let h = traction(x, nrm);
                for (l, &s) in map.iter().enumerate() {
                    for c in 0..3 {
                        out[3 * s + c] += *w * h[c] * row[l];
                    }
                }
            }
        }
    }
    out
}

/// Global stiffness matrix and load vector before boundary elimination.
pub struct AssembledSystem<T: Real> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    /// Prescribed values of Dirichlet DoFs.
    pub dirichlet: BTreeMap<usize, T>,
}

/// Exactness used for loads and errors.
pub fn load_exactness(degree: usize) -> usize {
    2 * degree + 2
}

pub fn assemble<T: Real>(disc: &Discretization<T>, problem: &Problem<T>) -> Result<AssembledSystem<T>, ElasticityError> {
    let mesh = &disc.mesh;
    for f in 0..mesh.faces().len() {
        if mesh.is_boundary_face(f) {
            let label = mesh.face_label(f).ok_or(ElasticityError::UntaggedBoundary { face: f })?;
            if !problem.boundary.contains_key(label) {
                return Err(ElasticityError::MissingCondition(label.to_string()));
            }
        }
    }
    let ex = load_exactness(disc.degree);
    let locals = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let e = &disc.elements[c];
            let k = local_stiffness(e, &problem.material);
            let rule = mesh.cell_rule(c, ex).map_err(|_| ElasticityError::Quadrature(c))?;
            let mut f = local_load(e, &rule, problem.body_force.as_ref());
            for &(fi, out) in &mesh.cells()[c].faces {
                let Some(label) = mesh.face_label(fi) else { continue };
                if let Some(BoundaryCondition::Neumann(h)) = problem.boundary.get(label) {
                    let r = mesh.face_rule(fi, ex).map_err(|_| ElasticityError::Quadrature(c))?;
                    let r = if out { r } else { r.flipped() };
                    f += neumann_load(e, &disc.faces[fi], &r, h.as_ref(), problem.neumann);
                }
            }
            Ok((k, f))
        })
        .collect::<Result<Vec<_>, ElasticityError>>()?;

    let n = disc.num_dofs();
    let mut triplets = Vec::new();
    let mut rhs = vec![T::zero(); n];
    for (c, (k, f)) in locals.iter().enumerate() {
        let idx = disc.element_dofs(c);
        for (i, &gi) in idx.iter().enumerate() {
            rhs[gi] += f[i];
            for (j, &gj) in idx.iter().enumerate() {
                triplets.push((gi, gj, k[(i, j)]));
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(n, triplets);

    let mut dirichlet = BTreeMap::new();
    for f in 0..mesh.faces().len() {
        let Some(label) = mesh.face_label(f) else { continue };
        if let Some(BoundaryCondition::Dirichlet(g)) = problem.boundary.get(label) {
            let fs = &disc.faces[f];
            for c in 0..3 {
                let vals = fs.interpolate(mesh, |x| g(x)[c]);
                for (d, v) in fs.dofs.iter().zip(vals.iter()) {
                    dirichlet.insert(3 * disc.index[&DofKey::from_face(f, *d)] + c, *v);
                }
            }
        }
    }
    Ok(AssembledSystem { matrix, rhs, dirichlet })
}

/// Eliminates Dirichlet DoFs symmetrically and solves; returns the full DoF vector.
pub fn solve_system<T: Real>(sys: &AssembledSystem<T>, kind: SolverKind) -> Result<Vec<T>, ElasticityError> {
    let n = sys.matrix.n;
    let mut reduced_index = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        if !sys.dirichlet.contains_key(&i) {
            reduced_index[i] = free.len();
            free.push(i);
        }
    }
    let mut triplets = Vec::with_capacity(sys.matrix.nnz());
    let mut rhs: Vec<T> = free.iter().map(|&i| sys.rhs[i]).collect();
    for (ri, &i) in free.iter().enumerate() {
        for (j, v) in sys.matrix.row(i) {
            match sys.dirichlet.get(&j) {
                Some(g) => rhs[ri] -= v * *g,
                None => triplets.push((ri, reduced_index[j], v)),
            }
        }
    }
    let reduced = CsrMatrix::from_triplets(free.len(), triplets);
    let x = solve(&reduced, &rhs, kind)?;
    let mut u = vec![T::zero(); n];
    for (ri, &i) in free.iter().enumerate() {
        u[i] = x[ri];
    }
    for (&i, &g) in &sys.dirichlet {
        u[i] = g;
    }
    Ok(u)
}

/// Builds the discretization, assembles and solves.
pub fn solve_problem<T: Real>(
    mesh: Mesh<T>,
    degree: usize,
    problem: &Problem<T>,
    kind: SolverKind,
) -> Result<(Discretization<T>, Vec<T>), ElasticityError> {
    let disc = Discretization::new(mesh, degree)?;
    let sys = assemble(&disc, problem)?;
    let u = solve_system(&sys, kind)?;
    Ok((disc, u))
}

/// Counts of faces by kind (handy for reporting).
pub fn face_kind_counts<T: Real>(mesh: &Mesh<T>) -> (usize, usize) {
    let nc = mesh.face_kinds().iter().filter(|k| **k == FaceKind::Nonconforming).count();
    (mesh.faces().len() - nc, nc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{manufactured_problem, max_vertex_error, ExactSolution, PolynomialSolution};
    use crate::mesh::{generate_box, generate_prism, KindRule};

    fn hex(nc: &[&str]) -> Mesh<f64> {
        generate_box::<f64>([1, 1, 1], [0.0; 3], [1.0, 0.8, 1.2])
            .unwrap()
            .tag_face_kinds(&KindRule::new(nc.iter().copied()))
            .unwrap()
    }

    #[test]
    fn material_validation() {
        assert!(Material::new(1.0, 0.0).is_err());
        assert!(Material::new(-1.0, 1.0).is_err());
        let m = Material::new(2.0, 1.0).unwrap();
        // uniaxial strain: σ_xx = λ + 2μ, σ_yy = λ
        let s = m.stress(&[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!((s[0][0], s[1][1], s[0][1]), (4.0, 2.0, 0.0));
    }

    #[test]
    fn local_stiffness_has_rigid_body_kernel() {
        let mat = Material { lambda: 2.0, mu: 1.0 };
        for k in 1..=2 {
            for nc in [&[][..], &["z1"][..], &["x0", "x1", "y0", "y1", "z0", "z1"][..]] {
                let disc = Discretization::new(hex(nc), k).unwrap();
                let a = local_stiffness(&disc.elements[0], &mat);
                assert!((&a - a.transpose()).amax() < 1e-12 * a.amax());
                let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                let norm = ev[ev.len() - 1];
                assert!(ev[5].abs() <= 1e-10 * norm, "k={k} nc={nc:?} λ6={}", ev[5]);
                assert!(ev[6] >= 1e4 * ev[5].abs().max(1e-300), "k={k} nc={nc:?}");
            }
        }
    }

    #[test]
    fn mixed_boundary_patch_test() {
        let base = [[0.0, 0.0], [1.0, 0.0], [1.2, 0.8], [0.1, 1.0]];
        let prism = generate_prism::<f64>(&base, 0.9, [0.1, -0.2]).unwrap();
        for k in 1..=2 {
            let mesh = generate_box::<f64>([2, 2, 2], [0.0; 3], [1.0; 3])
                .unwrap()
                .tag_face_kinds(&KindRule::new(["z1", "y0"]))
                .unwrap();
            let exact: Arc<PolynomialSolution> = Arc::new(PolynomialSolution::random(k, 11 + k as u64));
            let labels = ["x0", "x1", "y0", "y1", "z0", "z1"];
            let problem = manufactured_problem(exact.clone(), Material { lambda: 1.5, mu: 0.7 }, &labels, &["x0"], NeumannMode::Face);
            let (disc, u) = solve_problem(mesh, k, &problem, SolverKind::Direct).unwrap();
            let reference = disc.interpolate(&|x| exact.value(x));
            let err = u.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-8, "k={k} err={err}");

            let labels: Vec<String> = prism.boundary_labels().iter().map(|s| s.to_string()).collect();
            let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
            let single = prism.tag_face_kinds(&KindRule::new(["top", "side1"])).unwrap();
            let mode = NeumannMode::Face;
            let problem = manufactured_problem(exact.clone(), Material { lambda: 1.0, mu: 1.0 }, &refs, &["bottom"], mode);
            let (disc, u) = solve_problem(single.clone(), k, &problem, SolverKind::Cg).unwrap();
            assert!(max_vertex_error(&disc, &u, exact.as_ref()) < 1e-8, "prism k={k}");
            let problem = manufactured_problem(exact.clone(), Material { lambda: 1.0, mu: 1.0 }, &refs, &["bottom"], NeumannMode::Element);
            let (disc, u) = solve_problem(single, k, &problem, SolverKind::Cg).unwrap();
            // the element-trace load sees Π⁰ v instead of the face trace of v, so it is not polynomial exact
            assert!(max_vertex_error(&disc, &u, exact.as_ref()) > 1e-6, "prism k={k} element mode");
        }
    }

    #[test]
    fn missing_boundary_condition_is_reported() {
        let mesh = hex(&[]);
        let exact = Arc::new(PolynomialSolution::random(1, 1));
        let problem = manufactured_problem(exact, Material { lambda: 1.0, mu: 1.0 }, &["x0", "x1"], &["x0"], NeumannMode::Face);
        let disc = Discretization::new(mesh, 1).unwrap();
        match assemble(&disc, &problem) {
            Err(ElasticityError::MissingCondition(l)) => assert!(l.starts_with('y') || l.starts_with('z')),
            other => panic!("unexpected {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn dirichlet_dofs_cover_boundary_faces() {
        let mesh = hex(&["z1"]);
        let exact = Arc::new(PolynomialSolution::random(2, 4));
        let labels = ["x0", "x1", "y0", "y1", "z0", "z1"];
        let problem = manufactured_problem(exact, Material { lambda: 1.0, mu: 1.0 }, &labels, &labels, NeumannMode::Face);
        let disc = Discretization::new(mesh, 2).unwrap();
        let sys = assemble(&disc, &problem).unwrap();
        // everything but the single cell moment is on the boundary
        assert_eq!(sys.dirichlet.len(), disc.num_dofs() - 3);
    }
}
