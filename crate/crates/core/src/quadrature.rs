//! Quadrature on straight and curved edges, planar and parametrized faces, and
//! star-shaped cells.
//!
//! Planar faces are split into sectors joining an interior apex to each boundary
//! edge; every sector is integrated with a collapsed (Duffy) tensor Gauss rule, so
//! straight and curved edges share one code path. Cells are integrated as cones
//! from an apex over the face rules. For straight-sided entities the rules are
//! exact up to the requested degree.

use thiserror::Error;

use crate::curved::SurfaceMap;
use crate::geometry::{mean_point, EdgeShape, FaceShape, Vec3};
use crate::scalar::{lit, Real};

/// Extra polynomial degree requested along curved edges.
pub const CURVE_BOOST: usize = 2;
/// Extra polynomial degree requested in the parameter space of curved faces.
pub const SURFACE_BOOST: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("polygon is not simple (edges {0} and {1} intersect)")]
    NonSimplePolygon(usize, usize),
    #[error("face has non-positive area")]
    DegenerateFace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T: Real> {
    pub points: Vec<Vec3<T>>,
    pub weights: Vec<T>,
    pub exactness: usize,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn measure(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, w| a + *w)
    }

    pub fn integrate<F: FnMut(&Vec3<T>) -> T>(&self, mut f: F) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (p, w)| acc + f(p) * *w)
    }
}

/// Edge rule with arc-length weights, curve parameters and unit tangents.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule<T: Real> {
    pub rule: QuadratureRule<T>,
    pub params: Vec<T>,
    pub tangents: Vec<Vec3<T>>,
}

/// Face rule with the unit normal at every point.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceRule<T: Real> {
    pub rule: QuadratureRule<T>,
    pub normals: Vec<Vec3<T>>,
}

impl<T: Real> FaceRule<T> {
    pub fn flipped(&self) -> Self {
        Self {
            rule: self.rule.clone(),
            normals: self.normals.iter().map(|n| -n).collect(),
        }
    }
}

/// Number of Gauss-Legendre points integrating degree `exactness` exactly.
pub fn gauss_points_for(exactness: usize) -> usize {
    exactness / 2 + 1
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Interior Gauss-Lobatto nodes on `[0, 1]` for `k + 1` total nodes (`k - 1` interior),
/// i.e. the roots of `P'_k`, ascending.
pub fn gauss_lobatto_interior(k: usize) -> Vec<f64> {
    if k < 2 {
        return Vec::new();
    }
    let m = k - 1;
    (0..m)
        .map(|i| {
            // Chebyshev-Gauss-Lobatto initial guess
            let mut x = -(std::f64::consts::PI * (i as f64 + 1.0) / k as f64).cos();
            for _ in 0..100 {
                // q = P'_k, q' = P''_k from the Legendre ODE
                let (p, dp) = legendre(k, x);
                let kk = (k * (k + 1)) as f64;
                let ddp = (2.0 * x * dp - kk * p) / (1.0 - x * x);
                let dx = dp / ddp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            0.5 * (x + 1.0)
        })
        .collect()
}

fn gauss_t<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre(n);
    (x.into_iter().map(lit).collect(), w.into_iter().map(lit).collect())
}

/// Gauss-Legendre in the curve parameter with arc-length weights.
pub fn edge_rule<T: Real>(edge: &EdgeShape<T>, exactness: usize) -> EdgeRule<T> {
    let boost = if edge.is_curved() { CURVE_BOOST } else { 0 };
    let e = exactness + boost;
    let (ts, ws) = gauss_t::<T>(gauss_points_for(e));
    let mut points = Vec::with_capacity(ts.len());
    let mut weights = Vec::with_capacity(ts.len());
    let mut tangents = Vec::with_capacity(ts.len());
    for (t, w) in ts.iter().zip(&ws) {
        let d = edge.derivative(*t);
        let speed = d.norm();
        points.push(edge.point(*t));
        weights.push(*w * speed);
        tangents.push(d / speed);
    }
    EdgeRule {
        rule: QuadratureRule {
            points,
            weights,
            exactness: e,
        },
        params: ts,
        tangents,
    }
}

/// Tensor Gauss rule on the parameter box of a surface, with the surface area
/// element folded into the weights. Reference coordinates are returned alongside.
pub fn surface_rule<T: Real, S: SurfaceMap<T> + ?Sized>(
    param: &S,
    exactness: usize,
) -> (QuadratureRule<T>, Vec<[T; 2]>) {
    let [[u0, u1], [v0, v1]] = param.reference_box();
    let (ts, ws) = gauss_t::<T>(gauss_points_for(exactness));
    let du = u1 - u0;
    let dv = v1 - v0;
    let scale = (du * dv).abs();
    let mut points = Vec::with_capacity(ts.len() * ts.len());
    let mut weights = Vec::with_capacity(ts.len() * ts.len());
    let mut refs = Vec::with_capacity(ts.len() * ts.len());
    for (a, wa) in ts.iter().zip(&ws) {
        for (b, wb) in ts.iter().zip(&ws) {
            let u = [u0 + *a * du, v0 + *b * dv];
            points.push(param.map(u));
            weights.push(*wa * *wb * scale * param.area_element(u));
            refs.push(u);
        }
    }
    (
        QuadratureRule {
            points,
            weights,
            exactness,
        },
        refs,
    )
}

fn segments_intersect<T: Real>(p1: [T; 2], p2: [T; 2], q1: [T; 2], q2: [T; 2]) -> bool {
    let orient = |a: [T; 2], b: [T; 2], c: [T; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 > T::zero()) != (d2 > T::zero())
        && (d3 > T::zero()) != (d4 > T::zero())
        && d1 != T::zero()
        && d2 != T::zero()
        && d3 != T::zero()
        && d4 != T::zero()
}

fn check_simple<T: Real>(boundary: &[EdgeShape<T>], normal: &Vec3<T>) -> Result<(), QuadratureError> {
    let n = boundary.len();
    if n < 4 {
        return Ok(());
    }
    let (e1, e2) = crate::geometry::plane_frame(normal, &(boundary[0].end() - boundary[0].start()));
    let flat = |p: Vec3<T>| [p.dot(&e1), p.dot(&e2)];
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b) = (flat(boundary[i].start()), flat(boundary[i].end()));
            let (c, d) = (flat(boundary[j].start()), flat(boundary[j].end()));
            if segments_intersect(a, b, c, d) {
                return Err(QuadratureError::NonSimplePolygon(i, j));
            }
        }
    }
    Ok(())
}

/// Sector rule for the region swept by segments from `apex` to points of `edge`.
/// Weights carry the sign of `(e(t) - apex) × e'(t) · normal`.
fn sector_rule<T: Real>(
    apex: &Vec3<T>,
    edge: &EdgeShape<T>,
    normal: &Vec3<T>,
    exactness: usize,
    points: &mut Vec<Vec3<T>>,
    weights: &mut Vec<T>,
) {
    let boost = if edge.is_curved() { CURVE_BOOST } else { 0 };
    let e = exactness + boost;
    let (ts, wt) = gauss_t::<T>(gauss_points_for(e));
    let (ss, wsv) = gauss_t::<T>(gauss_points_for(e + 1));
    for (t, w_t) in ts.iter().zip(&wt) {
        let x = edge.point(*t);
        let r = x - apex;
        let jac = r.cross(&edge.derivative(*t)).dot(normal);
        for (s, w_s) in ss.iter().zip(&wsv) {
            points.push(apex + r * *s);
            weights.push(*w_t * *w_s * *s * jac);
        }
    }
}

/// Face quadrature. Planar faces use sector rules from the mean of the loop
/// vertices (raised by [`CURVE_BOOST`] on curved edges); cylindrical patches use
/// a tensor rule raised by [`SURFACE_BOOST`].
pub fn face_rule<T: Real>(face: &FaceShape<T>, exactness: usize) -> Result<FaceRule<T>, QuadratureError> {
    match face {
        FaceShape::Planar { boundary, normal } => {
            if !(normal.norm() > T::zero()) {
                return Err(QuadratureError::DegenerateFace);
            }
            if boundary.iter().all(|e| !e.is_curved()) {
                check_simple(boundary, normal)?;
            }
            let apex = mean_point(&face.loop_vertices());
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for edge in boundary {
                sector_rule(&apex, edge, normal, exactness, &mut points, &mut weights);
            }
            let n = points.len();
            let rule = QuadratureRule {
                points,
                weights,
                exactness,
            };
            if !(rule.measure() > T::zero()) {
                return Err(QuadratureError::DegenerateFace);
            }
            Ok(FaceRule {
                rule,
                normals: vec![*normal; n],
            })
        }
        FaceShape::Cylinder { patch, outward } => {
            let (rule, refs) = surface_rule(patch, exactness + SURFACE_BOOST);
            let normals = refs.iter().map(|u| patch.unit_normal(*u) * *outward).collect();
            Ok(FaceRule { rule, normals })
        }
    }
}

/// Cone rule over a closed surface given by face rules with outward normals.
///
/// Exact up to `exactness` when the faces are planar, the face rules are exact
/// to `exactness`, and the cell is star-shaped with respect to `apex` (for
/// non-star-shaped cells the weights become signed but the rule stays exact).
pub fn cell_rule<T: Real>(faces: &[FaceRule<T>], apex: &Vec3<T>, exactness: usize) -> QuadratureRule<T> {
    let (ss, ws) = gauss_t::<T>(gauss_points_for(exactness + 2));
    let total: usize = faces.iter().map(|f| f.rule.len()).sum::<usize>() * ss.len();
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for f in faces {
        for ((x, w), n) in f.rule.points.iter().zip(&f.rule.weights).zip(&f.normals) {
            let r = x - apex;
            let height = r.dot(n);
            for (s, w_s) in ss.iter().zip(&ws) {
                points.push(apex + r * *s);
                weights.push(*w * *w_s * *s * *s * height);
            }
        }
    }
    QuadratureRule {
        points,
        weights,
        exactness,
    }
}
