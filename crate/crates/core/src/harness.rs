//! Manufactured-solution cases, error evaluation and convergence studies.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::elasticity::{
    assemble, load_exactness, solve_system, BoundaryCondition, Discretization, ElasticityError, Material,
    NeumannMode, Problem,
};
use crate::geometry::Vec3;
use crate::mesh::{generate_box, generate_cylinder, load_mesh, KindRule, Mesh, MeshError, PointField};
use crate::polybasis::MonomialBasis;
use crate::sparse::SolverKind;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Elasticity(#[from] ElasticityError),
    #[error("invalid mesh specification `{0}`")]
    MeshSpec(String),
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Smooth vector field with analytic first and second derivatives.
pub trait ExactSolution: Send + Sync {
    fn value(&self, x: &Vec3<f64>) -> [f64; 3];
    /// `g[a][b] = ∂_b u_a`.
    fn gradient(&self, x: &Vec3<f64>) -> [[f64; 3]; 3];
    /// `h[a][b][c] = ∂_b ∂_c u_a`.
    fn hessian(&self, x: &Vec3<f64>) -> [[[f64; 3]; 3]; 3];
}

/// `u_a = e^{x_a} + sin x_b + sin x_c` with a cyclic choice of the exponential variable.
pub struct CubeSolution;

impl CubeSolution {
    // component a: e^{x_{e(a)}} + sin of the other two
    const EXP_AXIS: [usize; 3] = [2, 1, 0];
}

impl ExactSolution for CubeSolution {
    fn value(&self, x: &Vec3<f64>) -> [f64; 3] {
        std::array::from_fn(|a| {
            let e = Self::EXP_AXIS[a];
            (0..3).map(|b| if b == e { x[b].exp() } else { x[b].sin() }).sum()
        })
    }

    fn gradient(&self, x: &Vec3<f64>) -> [[f64; 3]; 3] {
        std::array::from_fn(|a| {
            let e = Self::EXP_AXIS[a];
            std::array::from_fn(|b| if b == e { x[b].exp() } else { x[b].cos() })
        })
    }

    fn hessian(&self, x: &Vec3<f64>) -> [[[f64; 3]; 3]; 3] {
        std::array::from_fn(|a| {
            let e = Self::EXP_AXIS[a];
            let mut h = [[0.0; 3]; 3];
            for b in 0..3 {
                h[b][b] = if b == e { x[b].exp() } else { -x[b].sin() };
            }
            h
        })
    }
}

/// `u_a = e^{x_a} sin(x_b + x_c)` with `{a, b, c} = {0, 1, 2}`.
pub struct CylinderSolution;

impl ExactSolution for CylinderSolution {
    fn value(&self, x: &Vec3<f64>) -> [f64; 3] {
        std::array::from_fn(|a| x[a].exp() * (x.sum() - x[a]).sin())
    }

    fn gradient(&self, x: &Vec3<f64>) -> [[f64; 3]; 3] {
        std::array::from_fn(|a| {
            let (e, q) = (x[a].exp(), x.sum() - x[a]);
            std::array::from_fn(|b| if b == a { e * q.sin() } else { e * q.cos() })
        })
    }

    fn hessian(&self, x: &Vec3<f64>) -> [[[f64; 3]; 3]; 3] {
        std::array::from_fn(|a| {
            let (e, q) = (x[a].exp(), x.sum() - x[a]);
            std::array::from_fn(|b| {
                std::array::from_fn(|c| match (b == a, c == a) {
                    (true, true) => e * q.sin(),
                    (true, false) | (false, true) => e * q.cos(),
                    (false, false) => -e * q.sin(),
                })
            })
        })
    }
}

/// Divergence-free field `u_a = e^{x_c} sin x_b` with `(a, b, c)` cyclic, so `u_a` never depends on `x_a`.
pub struct SolenoidalSolution;

impl SolenoidalSolution {
    // (sin variable, exp variable) per component
    const AXES: [(usize, usize); 3] = [(1, 2), (2, 0), (0, 1)];
}

impl ExactSolution for SolenoidalSolution {
    fn value(&self, x: &Vec3<f64>) -> [f64; 3] {
        Self::AXES.map(|(s, e)| x[e].exp() * x[s].sin())
    }

    fn gradient(&self, x: &Vec3<f64>) -> [[f64; 3]; 3] {
        Self::AXES.map(|(s, e)| {
            let mut g = [0.0; 3];
            g[s] = x[e].exp() * x[s].cos();
            g[e] = x[e].exp() * x[s].sin();
            g
        })
    }

    fn hessian(&self, x: &Vec3<f64>) -> [[[f64; 3]; 3]; 3] {
        Self::AXES.map(|(s, e)| {
            let (ex, sn, cs) = (x[e].exp(), x[s].sin(), x[s].cos());
            let mut h = [[0.0; 3]; 3];
            h[s][s] = -ex * sn;
            h[e][e] = ex * sn;
            h[s][e] = ex * cs;
            h[e][s] = ex * cs;
            h
        })
    }
}

/// Random vector polynomial of total degree `k` (seeded).
pub struct PolynomialSolution {
    basis: MonomialBasis<f64>,
    coef: [Vec<f64>; 3],
}

impl PolynomialSolution {
    pub fn random(degree: usize, seed: u64) -> Self {
        let basis = MonomialBasis::new(3, degree, &[0.5, 0.5, 0.5], 1.0).expect("valid basis");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef = std::array::from_fn(|_| (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        Self { basis, coef }
    }

    fn eval(&self, coef: &[f64], x: &Vec3<f64>) -> f64 {
        let mut v = vec![0.0; self.basis.len()];
        self.basis.eval_into(&[x.x, x.y, x.z], &mut v);
        v.iter().zip(coef).map(|(a, b)| a * b).sum()
    }

    /// Coefficients of `∂_axis p` in the same basis.
    fn derivative(&self, coef: &[f64], axis: usize) -> Vec<f64> {
        let d = self.basis.derivative_map(axis);
        let lower = d.nrows();
        let mut out = vec![0.0; self.basis.len()];
        for i in 0..lower {
            out[i] = (0..coef.len()).map(|j| d[(i, j)] * coef[j]).sum();
        }
        out
    }
}

impl ExactSolution for PolynomialSolution {
    fn value(&self, x: &Vec3<f64>) -> [f64; 3] {
        std::array::from_fn(|a| self.eval(&self.coef[a], x))
    }

    fn gradient(&self, x: &Vec3<f64>) -> [[f64; 3]; 3] {
        std::array::from_fn(|a| std::array::from_fn(|b| self.eval(&self.derivative(&self.coef[a], b), x)))
    }

    fn hessian(&self, x: &Vec3<f64>) -> [[[f64; 3]; 3]; 3] {
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let db = self.derivative(&self.coef[a], b);
                std::array::from_fn(|c| self.eval(&self.derivative(&db, c), x))
            })
        })
    }
}

/// `f = -div σ(u) = -(μ Δu + (λ + μ) ∇ div u)`.
pub fn body_force(exact: &dyn ExactSolution, m: &Material<f64>, x: &Vec3<f64>) -> [f64; 3] {
    let h = exact.hessian(x);
    std::array::from_fn(|a| {
        let lap: f64 = (0..3).map(|b| h[a][b][b]).sum();
        let grad_div: f64 = (0..3).map(|b| h[b][a][b]).sum();
        -(m.mu * lap + (m.lambda + m.mu) * grad_div)
    })
}

/// `σ(u) n`.
pub fn traction(exact: &dyn ExactSolution, m: &Material<f64>, x: &Vec3<f64>, n: &Vec3<f64>) -> [f64; 3] {
    let s = m.stress(&exact.gradient(x));
    std::array::from_fn(|a| (0..3).map(|b| s[a][b] * n[b]).sum())
}

/// Builds a problem with Dirichlet data on `dirichlet` labels and tractions elsewhere.
pub fn manufactured_problem(
    exact: Arc<dyn ExactSolution>,
    material: Material<f64>,
    labels: &[&str],
    dirichlet: &[&str],
    neumann: NeumannMode,
) -> Problem<f64> {
    let mut boundary = BTreeMap::new();
    for &l in labels {
        let bc = if dirichlet.contains(&l) {
            let e = exact.clone();
            BoundaryCondition::Dirichlet(Arc::new(move |x: &Vec3<f64>| e.value(x)))
        } else {
            let e = exact.clone();
            BoundaryCondition::Neumann(Arc::new(move |x: &Vec3<f64>, n: &Vec3<f64>| traction(e.as_ref(), &material, x, n)))
        };
        boundary.insert(l.to_string(), bc);
    }
    let e = exact.clone();
    Problem {
        material,
        body_force: Arc::new(move |x: &Vec3<f64>| body_force(e.as_ref(), &material, x)),
        boundary,
        neumann,
    }
}

/// Predefined test problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Unit cube, Neumann on `z = 0` and `z = 1`, nonconforming faces on `z = 1`.
    Cube,
    /// Cylinder of radius 1 and height 2, Neumann and nonconforming on the lateral surface.
    Cylinder,
    /// Random polynomial of degree `k` with Dirichlet data everywhere.
    Patch,
}

impl FromStr for Case {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cube" => Ok(Case::Cube),
            "cylinder" => Ok(Case::Cylinder),
            "patch" | "patch-k" => Ok(Case::Patch),
            _ => Err(HarnessError::UnknownCase(s.to_string())),
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Cube => "cube",
            Case::Cylinder => "cylinder",
            Case::Patch => "patch-k",
        })
    }
}

/// Seed of the patch-test polynomial.
pub const PATCH_SEED: u64 = 2024;

#[derive(Clone)]
pub struct CaseSetup {
    pub exact: Arc<dyn ExactSolution>,
    pub material: Material<f64>,
    pub dirichlet: Vec<&'static str>,
    /// Labels whose faces are made nonconforming.
    pub nonconforming: Vec<String>,
}

impl Case {
    pub fn setup(&self, degree: usize) -> CaseSetup {
        match self {
            Case::Cube => CaseSetup {
                exact: Arc::new(CubeSolution),
                material: Material { lambda: 2.0, mu: 1.0 },
                dirichlet: vec!["x0", "x1", "y0", "y1"],
                nonconforming: vec!["z1".into()],
            },
            Case::Cylinder => CaseSetup {
                exact: Arc::new(CylinderSolution),
                material: Material { lambda: 1.0, mu: 1.0 },
                dirichlet: vec!["top", "bottom"],
                nonconforming: vec!["lateral".into()],
            },
            Case::Patch => CaseSetup {
                exact: Arc::new(PolynomialSolution::random(degree, PATCH_SEED)),
                material: Material { lambda: 1.0, mu: 1.0 },
                dirichlet: vec!["x0", "x1", "y0", "y1", "z0", "z1", "bottom", "top", "lateral", "boundary"],
                nonconforming: vec!["z1".into()],
            },
        }
    }

    /// Mesh used when no explicit mesh is given.
    pub fn default_meshes(&self) -> Vec<MeshSpec> {
        match self {
            Case::Cube => [4, 6, 8, 12].into_iter().map(MeshSpec::Box).collect(),
            Case::Cylinder => [(2, 8, 4), (3, 12, 6), (4, 16, 8), (6, 24, 12)]
                .into_iter()
                .map(|(a, b, c)| MeshSpec::Cylinder(a, b, c))
                .collect(),
            Case::Patch => vec![MeshSpec::Box(3)],
        }
    }
}

/// Mesh source for a convergence run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshSpec {
    /// `n³` cells on the unit cube.
    Box(usize),
    /// `(n_r, n_θ, n_z)` cylinder of radius 1 and height 2.
    Cylinder(usize, usize, usize),
    File(std::path::PathBuf),
}

impl MeshSpec {
    /// Parses `box:4,6,8`, `cyl:2x8x4,3x12x6` or a comma separated list of mesh files.
    pub fn parse_list(s: &str) -> Result<Vec<MeshSpec>, HarnessError> {
        let bad = || HarnessError::MeshSpec(s.to_string());
        if let Some(rest) = s.strip_prefix("box:") {
            rest.split(',')
                .map(|t| t.trim().parse().map(MeshSpec::Box).map_err(|_| bad()))
                .collect()
        } else if let Some(rest) = s.strip_prefix("cyl:") {
            rest.split(',')
                .map(|t| {
                    let v: Vec<usize> = t.trim().split('x').map(|p| p.parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
                    match v[..] {
                        [a, b, c] => Ok(MeshSpec::Cylinder(a, b, c)),
                        _ => Err(bad()),
                    }
                })
                .collect()
        } else if s.is_empty() {
            Err(bad())
        } else {
            Ok(s.split(',').map(|p| MeshSpec::File(p.trim().into())).collect())
        }
    }

    pub fn build(&self) -> Result<Mesh<f64>, HarnessError> {
        Ok(match self {
            MeshSpec::Box(n) => generate_box([*n; 3], [0.0; 3], [1.0; 3])?,
            MeshSpec::Cylinder(a, b, c) => generate_cylinder(*a, *b, *c, 1.0, 2.0)?,
            MeshSpec::File(p) => load_mesh(p)?,
        })
    }
}

impl fmt::Display for MeshSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshSpec::Box(n) => write!(f, "box{n}"),
            MeshSpec::Cylinder(a, b, c) => write!(f, "cyl{a}x{b}x{c}"),
            MeshSpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Run options shared by `solve` and `converge`.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub degree: usize,
    pub solver: SolverKind,
    pub neumann: NeumannMode,
    /// Overrides the case's nonconforming labels when set.
    pub nonconforming: Option<Vec<String>>,
    /// Overrides the case's first Lamé parameter when set.
    pub lambda: Option<f64>,
}

impl RunOptions {
    pub fn new(degree: usize) -> Self {
        Self {
            degree,
            solver: SolverKind::Direct,
            neumann: NeumannMode::default(),
            nonconforming: None,
            lambda: None,
        }
    }
}

/// Discrete solution together with its discretization.
pub struct Solution {
    pub disc: Discretization<f64>,
    pub u: Vec<f64>,
    pub exact: Arc<dyn ExactSolution>,
}

/// Tags the mesh, assembles and solves a case.
pub fn solve_case(case: Case, mesh: Mesh<f64>, opts: &RunOptions) -> Result<Solution, HarnessError> {
    solve_setup(case.setup(opts.degree), mesh, opts)
}

/// Same as [`solve_case`] for a custom setup.
pub fn solve_setup(setup: CaseSetup, mesh: Mesh<f64>, opts: &RunOptions) -> Result<Solution, HarnessError> {
    let nc = opts.nonconforming.clone().unwrap_or(setup.nonconforming.clone());
    let present = mesh.boundary_labels();
    let nc: Vec<String> = nc
        .into_iter()
        .filter(|l| present.contains(l.as_str()) || l == crate::mesh::INTERIOR_LABEL || opts.nonconforming.is_some())
        .collect();
    let mesh = mesh.tag_face_kinds(&KindRule::new(nc))?;
    let material = Material {
        lambda: opts.lambda.unwrap_or(setup.material.lambda),
        ..setup.material
    };
    let labels: Vec<String> = mesh.boundary_labels().iter().map(|s| s.to_string()).collect();
    let label_refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    let problem = manufactured_problem(setup.exact.clone(), material, &label_refs, &setup.dirichlet, opts.neumann);
    let disc = Discretization::new(mesh, opts.degree)?;
    let sys = assemble(&disc, &problem)?;
    let u = solve_system(&sys, opts.solver)?;
    Ok(Solution {
        disc,
        u,
        exact: setup.exact,
    })
}

/// `(‖u - Π⁰_k u_h‖_{L²}, |u - Π⁰_{k-1}∇u_h|_{H¹,h})`.
pub fn compute_errors(disc: &Discretization<f64>, u: &[f64], exact: &dyn ExactSolution) -> Result<(f64, f64), HarnessError> {
    let ex = load_exactness(disc.degree);
    let parts = (0..disc.mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let e = &disc.elements[c];
            let rule = disc.mesh.cell_rule(c, ex).map_err(|_| ElasticityError::Quadrature(c))?;
            let coef = disc.projected(c, u);
            let local = disc.local_values(c, u);
            let n = e.ndofs();
            let grads: [[nalgebra::DVector<f64>; 3]; 3] = std::array::from_fn(|comp| {
                let v = nalgebra::DVector::from_iterator(n, (0..n).map(|s| local[3 * s + comp]));
                std::array::from_fn(|axis| &e.grad[axis] * &v)
            });
            let nk1 = e.grad[0].nrows();
            let (mut l2, mut h1) = (0.0, 0.0);
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let m = e.eval_basis(x);
                let uv = exact.value(x);
                let g = exact.gradient(x);
                for comp in 0..3 {
                    l2 += w * (uv[comp] - m.dot(&coef[comp])).powi(2);
                    for axis in 0..3 {
                        let gh: f64 = (0..nk1).map(|r| m[r] * grads[comp][axis][r]).sum();
                        h1 += w * (g[comp][axis] - gh).powi(2);
                    }
                }
            }
            Ok((l2, h1))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let (l2, h1) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Largest nodal error `max |u(x_v) - u_h(x_v)|` over vertex DoFs.
pub fn max_vertex_error(disc: &Discretization<f64>, u: &[f64], exact: &dyn ExactSolution) -> f64 {
    let mut err: f64 = 0.0;
    for (i, key) in disc.keys.iter().enumerate() {
        if let crate::element_space::DofKey::Vertex(v) = key {
            let ue = exact.value(&disc.mesh.vertices()[*v]);
            for c in 0..3 {
                err = err.max((u[3 * i + c] - ue[c]).abs());
            }
        }
    }
    err
}

/// `Π⁰_k u_h` sampled at mesh vertices, averaged over the cells sharing each vertex.
pub fn vertex_field(disc: &Discretization<f64>, u: &[f64]) -> PointField {
    let nv = disc.mesh.vertices().len();
    let mut sum = vec![0.0; 3 * nv];
    let mut count = vec![0usize; nv];
    for c in 0..disc.mesh.num_cells() {
        let coef = disc.projected(c, u);
        let e = &disc.elements[c];
        for v in disc.mesh.cell_vertices(c) {
            let m = e.eval_basis(&disc.mesh.vertices()[v]);
            for comp in 0..3 {
                sum[3 * v + comp] += m.dot(&coef[comp]);
            }
            count[v] += 1;
        }
    }
    for (v, n) in count.iter().enumerate() {
        for comp in 0..3 {
            sum[3 * v + comp] /= (*n).max(1) as f64;
        }
    }
    PointField {
        name: "displacement".into(),
        components: 3,
        values: sum,
    }
}

/// Exact displacement at the vertices, for side-by-side inspection.
pub fn exact_vertex_field(mesh: &Mesh<f64>, exact: &dyn ExactSolution) -> PointField {
    PointField {
        name: "exact".into(),
        components: 3,
        values: mesh.vertices().iter().flat_map(|x| exact.value(x)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub mesh: String,
    pub h: f64,
    pub dofs: usize,
    pub e_l2: f64,
    pub e_h1: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    /// Least-squares slope of `log e` against `log h`.
    pub l2: f64,
    pub h1: f64,
    /// Slopes between consecutive meshes.
    pub pairwise_l2: Vec<f64>,
    pub pairwise_h1: Vec<f64>,
}

pub fn fit_slope(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn rates(rows: &[ConvergenceRow]) -> Rates {
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.e_l2).collect();
    let h1: Vec<f64> = rows.iter().map(|r| r.e_h1).collect();
    let pair = |e: &[f64]| {
        (1..rows.len())
            .map(|i| (e[i] / e[i - 1]).ln() / (h[i] / h[i - 1]).ln())
            .collect()
    };
    Rates {
        l2: fit_slope(&h, &l2),
        h1: fit_slope(&h, &h1),
        pairwise_l2: pair(&l2),
        pairwise_h1: pair(&h1),
    }
}

pub fn run_convergence(case: Case, meshes: &[MeshSpec], opts: &RunOptions) -> Result<Vec<ConvergenceRow>, HarnessError> {
    let mut rows = Vec::with_capacity(meshes.len());
    for spec in meshes {
        let start = Instant::now();
        let mesh = spec.build()?;
        let h = mesh.max_cell_diameter();
        let sol = solve_case(case, mesh, opts)?;
        let (e_l2, e_h1) = compute_errors(&sol.disc, &sol.u, sol.exact.as_ref())?;
        let row = ConvergenceRow {
            mesh: spec.to_string(),
            h,
            dofs: sol.disc.num_dofs(),
            e_l2,
            e_h1,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!("{} h={:.4} dofs={} e_l2={:.3e} e_h1={:.3e}", row.mesh, row.h, row.dofs, row.e_l2, row.e_h1);
        rows.push(row);
    }
    Ok(rows)
}

/// Writes `mesh,h,dofs,e_l2,e_h1,seconds`; with `timing == false` the time column is 0.
pub fn write_csv<W: Write>(rows: &[ConvergenceRow], timing: bool, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "mesh,h,dofs,e_l2,e_h1,seconds")?;
    for r in rows {
        let secs = if timing { r.seconds } else { 0.0 };
        writeln!(out, "{},{:.16e},{},{:.16e},{:.16e},{:.3}", r.mesh, r.h, r.dofs, r.e_l2, r.e_h1, secs)?;
    }
    Ok(())
}
