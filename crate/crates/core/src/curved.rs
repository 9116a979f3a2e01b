//! Exact parametrizations of curved boundary entities and the mapped polynomial
//! spaces built on them.
//!
//! Two kinds are built in: cylindrical surface patches (axis = z axis through the
//! origin) and circular arcs lying in a plane `z = const`. Anything implementing
//! [`SurfaceMap`] (forward map, closed-form inverse, tangents) can drive the mapped
//! projector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::polybasis::{BasisError, MonomialBasis};
use crate::quadrature::{self, QuadratureRule};
use crate::scalar::{lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvedError {
    #[error("point is {distance:e} away from the surface (tolerance {tolerance:e})")]
    OffSurface { distance: f64, tolerance: f64 },
    #[error("point lies outside the parameter range")]
    OutOfRange,
    #[error("mapped Gram matrix is singular (degenerate parametrization)")]
    SingularGram,
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// Parametrized surface `γ: [u0,u1]×[v0,v1] → R³`.
pub trait SurfaceMap<T: Real> {
    /// `[[u0, u1], [v0, v1]]`.
    fn reference_box(&self) -> [[T; 2]; 2];
    fn map(&self, u: [T; 2]) -> Vec3<T>;
    fn inverse(&self, p: &Vec3<T>) -> Result<[T; 2], CurvedError>;
    /// `(∂γ/∂u, ∂γ/∂v)`.
    fn tangents(&self, u: [T; 2]) -> (Vec3<T>, Vec3<T>);

    fn area_element(&self, u: [T; 2]) -> T {
        let (a, b) = self.tangents(u);
        a.cross(&b).norm()
    }

    /// Unit normal `∂γ/∂u × ∂γ/∂v`, normalized.
    fn unit_normal(&self, u: [T; 2]) -> Vec3<T> {
        let (a, b) = self.tangents(u);
        a.cross(&b).normalize()
    }
}

/// Parametrized curve on `t ∈ [0, 1]`.
pub trait CurveMap<T: Real> {
    fn point(&self, t: T) -> Vec3<T>;
    fn derivative(&self, t: T) -> Vec3<T>;
}

/// Patch of the cylinder `x² + y² = r²`, `(θ, z) ↦ (r cos θ, r sin θ, z)`.
///
/// The θ-range is a connected interval; patches never straddle the branch cut of
/// the inverse because the inverse shifts `atan2` by `2π` into the stored range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderPatch<T: Real> {
    pub radius: T,
    pub theta_range: [T; 2],
    pub z_range: [T; 2],
}

impl<T: Real> CylinderPatch<T> {
    pub fn new(radius: T, theta_range: [T; 2], z_range: [T; 2]) -> Self {
        Self {
            radius,
            theta_range,
            z_range,
        }
    }

    /// Corners in the order `(θ0,z0), (θ1,z0), (θ1,z1), (θ0,z1)`, counterclockwise
    /// about the outward (away from the axis) normal.
    pub fn corners(&self) -> [Vec3<T>; 4] {
        let [t0, t1] = self.theta_range;
        let [z0, z1] = self.z_range;
        [
            self.map([t0, z0]),
            self.map([t1, z0]),
            self.map([t1, z1]),
            self.map([t0, z1]),
        ]
    }

    /// Exact area `r |Δθ| |Δz|`.
    pub fn area(&self) -> T {
        self.radius
            * (self.theta_range[1] - self.theta_range[0]).abs()
            * (self.z_range[1] - self.z_range[0]).abs()
    }

    fn tolerance(&self) -> T {
        lit::<T>(1e-9) * self.radius.max(T::one())
    }
}

impl<T: Real> SurfaceMap<T> for CylinderPatch<T> {
    fn reference_box(&self) -> [[T; 2]; 2] {
        [self.theta_range, self.z_range]
    }

    fn map(&self, u: [T; 2]) -> Vec3<T> {
        Vec3::new(self.radius * u[0].cos(), self.radius * u[0].sin(), u[1])
    }

    fn inverse(&self, p: &Vec3<T>) -> Result<[T; 2], CurvedError> {
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        let tol = self.tolerance();
        if (rho - self.radius).abs() > tol {
            return Err(CurvedError::OffSurface {
                distance: crate::scalar::to_f64((rho - self.radius).abs()),
                tolerance: crate::scalar::to_f64(tol),
            });
        }
        let two_pi = T::two_pi();
        let lo = self.theta_range[0].min(self.theta_range[1]);
        let hi = self.theta_range[0].max(self.theta_range[1]);
        let mut theta = p.y.atan2(p.x);
        while theta < lo - tol {
            theta += two_pi;
        }
        while theta > hi + tol {
            theta -= two_pi;
        }
        if theta < lo - tol {
            return Err(CurvedError::OutOfRange);
        }
        Ok([theta, p.z])
    }

    fn tangents(&self, u: [T; 2]) -> (Vec3<T>, Vec3<T>) {
        (
            Vec3::new(-self.radius * u[0].sin(), self.radius * u[0].cos(), T::zero()),
            Vec3::new(T::zero(), T::zero(), T::one()),
        )
    }

    fn area_element(&self, _u: [T; 2]) -> T {
        self.radius
    }

    fn unit_normal(&self, u: [T; 2]) -> Vec3<T> {
        Vec3::new(u[0].cos(), u[0].sin(), T::zero())
    }
}

/// Circular arc in the plane `z = center.z`, `t ↦ center + r (cos φ, sin φ, 0)` with
/// `φ = φ0 + t (φ1 - φ0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularArc<T: Real> {
    pub center: [T; 3],
    pub radius: T,
    pub angle_range: [T; 2],
}

impl<T: Real> CircularArc<T> {
    pub fn new(center: [T; 3], radius: T, angle_range: [T; 2]) -> Self {
        Self {
            center,
            radius,
            angle_range,
        }
    }

    fn angle(&self, t: T) -> T {
        self.angle_range[0] + t * (self.angle_range[1] - self.angle_range[0])
    }

    /// Arc-length element with respect to the angle, `ds/dφ = r`.
    pub fn length_element(&self) -> T {
        self.radius
    }

    pub fn length(&self) -> T {
        self.radius * (self.angle_range[1] - self.angle_range[0]).abs()
    }

    /// Parameter `t` of a point on the arc.
    pub fn inverse(&self, p: &Vec3<T>) -> Result<T, CurvedError> {
        let c = Vec3::new(self.center[0], self.center[1], self.center[2]);
        let d = p - c;
        let tol = lit::<T>(1e-9) * self.radius.max(T::one());
        let off = ((d.x * d.x + d.y * d.y).sqrt() - self.radius).abs() + d.z.abs();
        if off > tol {
            return Err(CurvedError::OffSurface {
                distance: crate::scalar::to_f64(off),
                tolerance: crate::scalar::to_f64(tol),
            });
        }
        let [a0, a1] = self.angle_range;
        let lo = a0.min(a1);
        let hi = a0.max(a1);
        let mut phi = d.y.atan2(d.x);
        while phi < lo - tol {
            phi += T::two_pi();
        }
        while phi > hi + tol {
            phi -= T::two_pi();
        }
        if phi < lo - tol {
            return Err(CurvedError::OutOfRange);
        }
        Ok((phi - a0) / (a1 - a0))
    }
}

impl<T: Real> CurveMap<T> for CircularArc<T> {
    fn point(&self, t: T) -> Vec3<T> {
        let phi = self.angle(t);
        Vec3::new(
            self.center[0] + self.radius * phi.cos(),
            self.center[1] + self.radius * phi.sin(),
            self.center[2],
        )
    }

    fn derivative(&self, t: T) -> Vec3<T> {
        let phi = self.angle(t);
        let s = (self.angle_range[1] - self.angle_range[0]) * self.radius;
        Vec3::new(-s * phi.sin(), s * phi.cos(), T::zero())
    }
}

/// Surface area element at a reference point.
pub fn surface_jacobian<T: Real, S: SurfaceMap<T> + ?Sized>(param: &S, u: [T; 2]) -> T {
    param.area_element(u)
}

/// Mapped polynomials `q ∘ γ⁻¹` with `q` a scaled monomial on the reference box.
#[derive(Debug, Clone)]
pub struct MappedBasis<T: Real> {
    reference: MonomialBasis<T>,
}

impl<T: Real> MappedBasis<T> {
    pub fn new<S: SurfaceMap<T> + ?Sized>(param: &S, degree: usize) -> Result<Self, CurvedError> {
        let [[u0, u1], [v0, v1]] = param.reference_box();
        let half = lit::<T>(0.5);
        let center = [(u0 + u1) * half, (v0 + v1) * half];
        let diam = ((u1 - u0) * (u1 - u0) + (v1 - v0) * (v1 - v0)).sqrt();
        Ok(Self {
            reference: MonomialBasis::new(2, degree, &center, diam)?,
        })
    }

    pub fn reference(&self) -> &MonomialBasis<T> {
        &self.reference
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn eval_reference(&self, u: [T; 2], out: &mut [T]) {
        self.reference.eval_into(&u, out);
    }

    /// Values at a physical point (through the inverse map).
    pub fn eval_physical<S: SurfaceMap<T> + ?Sized>(
        &self,
        param: &S,
        p: &Vec3<T>,
    ) -> Result<DVector<T>, CurvedError> {
        let u = param.inverse(p)?;
        Ok(self.reference.eval_point(&u)?)
    }
}

/// `L²(F)` projector onto a mapped polynomial space, in moment form.
///
/// `coefficients = matrix · μ` where `μ_j = (1/|F|) ∫_F v φ̃_j dF`.
#[derive(Debug, Clone)]
pub struct MappedProjector<T: Real> {
    pub basis: MappedBasis<T>,
    pub gram: DMatrix<T>,
    pub matrix: DMatrix<T>,
    pub area: T,
    /// Quadrature on the physical face with reference coordinates kept alongside.
    pub rule: QuadratureRule<T>,
    pub reference_points: Vec<[T; 2]>,
}

impl<T: Real> MappedProjector<T> {
    /// Scaled moments `(1/|F|) ∫_F f φ̃_j` of a field.
    pub fn moments<F: Fn(&Vec3<T>) -> T>(&self, f: F) -> DVector<T> {
        let n = self.basis.len();
        let mut out = DVector::zeros(n);
        let mut vals = vec![T::zero(); n];
        for ((p, w), u) in self.rule.points.iter().zip(&self.rule.weights).zip(&self.reference_points) {
            self.basis.eval_reference(*u, &mut vals);
            let fv = f(p) * *w;
            for j in 0..n {
                out[j] += fv * vals[j];
            }
        }
        out / self.area
    }

    pub fn project<F: Fn(&Vec3<T>) -> T>(&self, f: F) -> DVector<T> {
        &self.matrix * self.moments(f)
    }
}

/// Builds `Π̃⁰_m` on a parametrized face using a tensor Gauss rule of the given
/// exactness in parameter space.
pub fn mapped_l2_projector<T: Real, S: SurfaceMap<T> + ?Sized>(
    param: &S,
    degree: usize,
    exactness: usize,
) -> Result<MappedProjector<T>, CurvedError> {
    let basis = MappedBasis::new(param, degree)?;
    let (rule, reference_points) = quadrature::surface_rule(param, exactness);
    let n = basis.len();
    let mut gram = DMatrix::zeros(n, n);
    let mut vals = vec![T::zero(); n];
    let mut area = T::zero();
    for (w, u) in rule.weights.iter().zip(&reference_points) {
        basis.eval_reference(*u, &mut vals);
        area += *w;
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] += *w * vals[i] * vals[j];
            }
        }
    }
    let lu = gram.clone().full_piv_lu();
    let inv = lu.try_inverse().ok_or(CurvedError::SingularGram)?;
    if !inv.iter().all(|v: &T| v.is_finite()) {
        return Err(CurvedError::SingularGram);
    }
    let matrix = inv * area;
    Ok(MappedProjector {
        basis,
        gram,
        matrix,
        area,
        rule,
        reference_points,
    })
}
