//! Geometric entity descriptions consumed by the quadrature and space builders.

use nalgebra::Vector3;

use crate::curved::{CircularArc, CurveMap, CylinderPatch};
use crate::scalar::{from_usize, lit, Real};

pub type Vec3<T> = Vector3<T>;

/// An edge traversed from `point(0)` to `point(1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeShape<T: Real> {
    Straight { a: Vec3<T>, b: Vec3<T> },
    /// Arc traversed forward (`reversed == false`) or backward in its own parameter.
    Arc { arc: CircularArc<T>, reversed: bool },
}

impl<T: Real> EdgeShape<T> {
    pub fn point(&self, t: T) -> Vec3<T> {
        match self {
            EdgeShape::Straight { a, b } => a + (b - a) * t,
            EdgeShape::Arc { arc, reversed } => arc.point(if *reversed { T::one() - t } else { t }),
        }
    }

    /// `dx/dt`.
    pub fn derivative(&self, t: T) -> Vec3<T> {
        match self {
            EdgeShape::Straight { a, b } => b - a,
            EdgeShape::Arc { arc, reversed } => {
                if *reversed {
                    -arc.derivative(T::one() - t)
                } else {
                    arc.derivative(t)
                }
            }
        }
    }

    pub fn is_curved(&self) -> bool {
        matches!(self, EdgeShape::Arc { .. })
    }

    pub fn start(&self) -> Vec3<T> {
        self.point(T::zero())
    }

    pub fn end(&self) -> Vec3<T> {
        self.point(T::one())
    }

    pub fn reversed(&self) -> Self {
        match self {
            EdgeShape::Straight { a, b } => EdgeShape::Straight { a: *b, b: *a },
            EdgeShape::Arc { arc, reversed } => EdgeShape::Arc {
                arc: arc.clone(),
                reversed: !reversed,
            },
        }
    }
}

/// A face as seen by quadrature: either a planar region bounded by a loop of
/// (possibly curved) edges, or a parametrized cylindrical patch.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceShape<T: Real> {
    /// Edges are ordered and oriented along the loop, counterclockwise about `normal`.
    Planar { boundary: Vec<EdgeShape<T>>, normal: Vec3<T> },
    /// `outward` is `+1` when the face normal points away from the axis, `-1` otherwise.
    Cylinder { patch: CylinderPatch<T>, outward: T },
}

impl<T: Real> FaceShape<T> {
    pub fn loop_vertices(&self) -> Vec<Vec3<T>> {
        match self {
            FaceShape::Planar { boundary, .. } => boundary.iter().map(|e| e.start()).collect(),
            FaceShape::Cylinder { patch, .. } => patch.corners().to_vec(),
        }
    }
}

/// Unit normal of a vertex loop by Newell's method (counterclockwise loops give the right-hand normal).
pub fn newell_normal<T: Real>(loop_pts: &[Vec3<T>]) -> Vec3<T> {
    let mut n = Vec3::zeros();
    for i in 0..loop_pts.len() {
        let a = loop_pts[i];
        let b = loop_pts[(i + 1) % loop_pts.len()];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    let len = n.norm();
    if len > T::zero() {
        n / len
    } else {
        n
    }
}

pub fn mean_point<T: Real>(pts: &[Vec3<T>]) -> Vec3<T> {
    let mut c = Vec3::zeros();
    for p in pts {
        c += p;
    }
    c / from_usize::<T>(pts.len().max(1))
}

/// Largest pairwise distance.
pub fn diameter_of<T: Real>(pts: &[Vec3<T>]) -> T {
    let mut d = T::zero();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max((pts[i] - pts[j]).norm());
        }
    }
    d
}

/// Orthonormal in-plane frame `(e1, e2)` with `e1 × e2 = normal`.
pub fn plane_frame<T: Real>(normal: &Vec3<T>, hint: &Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let mut e1 = hint - normal * normal.dot(hint);
    if e1.norm() <= T::default_epsilon() * lit::<T>(100.0) {
        let trial = if normal.x.abs() < lit::<T>(0.5) {
            Vec3::x()
        } else {
            Vec3::y()
        };
        e1 = trial - normal * normal.dot(&trial);
    }
    let e1 = e1.normalize();
    let e2 = normal.cross(&e1);
    (e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newell_normal_of_ccw_square_points_up() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        assert_eq!(newell_normal(&pts), Vec3::new(0.0, 0.0, 1.0));
        assert!((diameter_of(&pts) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn frame_is_right_handed() {
        let n = Vec3::<f64>::new(1.0, 1.0, 1.0).normalize();
        let (e1, e2) = plane_frame(&n, &Vec3::new(1.0, 0.0, 0.0));
        assert!((e1.cross(&e2) - n).norm() < 1e-15);
        assert!(e1.dot(&n).abs() < 1e-15);
    }
}
