//! Scaled monomial bases on edges (1D), faces (2D, in-plane coordinates) and cells (3D).
//!
//! Member `α` evaluates to `((x - c) / h)^α`. Members are stored in graded
//! lexicographic order: by total degree, then by decreasing power of the first
//! coordinate, then the second. In 2D with degree 2 this gives
//! `1, x, y, x², xy, y²`; in 3D with degree 1, `1, x, y, z`.
//!
//! Because the ordering is graded, the members of degree `≤ m` always form a
//! prefix of the basis of degree `k ≥ m`, so lower-degree bases are slices of
//! higher-degree ones with the same center and diameter.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::{from_usize, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("basis dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("point has {got} coordinates, basis expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis diameter must be positive")]
    NonPositiveDiameter,
}

/// Number of monomials of total degree `≤ degree` in `dim` variables.
pub fn dim_poly(dim: usize, degree: isize) -> usize {
    if degree < 0 {
        return 0;
    }
    let k = degree as usize;
    // C(k + dim, dim)
    let mut num = 1usize;
    let mut den = 1usize;
    for i in 1..=dim {
        num *= k + i;
        den *= i;
    }
    num / den
}

/// Graded lexicographic exponents for `dim` variables up to `degree`.
pub fn graded_exponents(dim: usize, degree: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::with_capacity(dim_poly(dim, degree as isize));
    for d in 0..=degree as u32 {
        match dim {
            1 => out.push([d, 0, 0]),
            2 => {
                for a in (0..=d).rev() {
                    out.push([a, d - a, 0]);
                }
            }
            3 => {
                for a in (0..=d).rev() {
                    for b in (0..=d - a).rev() {
                        out.push([a, b, d - a - b]);
                    }
                }
            }
            _ => unreachable!("dimension validated by caller"),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis<T: Real> {
    dim: usize,
    degree: usize,
    center: [T; 3],
    diameter: T,
    exponents: Vec<[u32; 3]>,
}

impl<T: Real> MonomialBasis<T> {
    pub fn new(dim: usize, degree: usize, center: &[T], diameter: T) -> Result<Self, BasisError> {
        if !(1..=3).contains(&dim) {
            return Err(BasisError::BadDimension(dim));
        }
        if center.len() != dim {
            return Err(BasisError::DimensionMismatch {
                expected: dim,
                got: center.len(),
            });
        }
        if !(diameter > T::zero()) {
            return Err(BasisError::NonPositiveDiameter);
        }
        let mut c = [T::zero(); 3];
        c[..dim].copy_from_slice(center);
        Ok(Self {
            dim,
            degree,
            center: c,
            diameter,
            exponents: graded_exponents(dim, degree),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn center(&self) -> &[T] {
        &self.center[..self.dim]
    }

    pub fn diameter(&self) -> T {
        self.diameter
    }

    pub fn exponents(&self) -> &[[u32; 3]] {
        &self.exponents
    }

    /// Number of leading members with total degree `≤ degree` (zero for negative degree).
    pub fn count_up_to(&self, degree: isize) -> usize {
        dim_poly(self.dim, degree.min(self.degree as isize))
    }

    /// Same center and diameter, different degree.
    pub fn with_degree(&self, degree: usize) -> Self {
        Self {
            dim: self.dim,
            degree,
            center: self.center,
            diameter: self.diameter,
            exponents: graded_exponents(self.dim, degree),
        }
    }

    pub fn index_of(&self, exponent: [u32; 3]) -> Option<usize> {
        self.exponents.iter().position(|e| *e == exponent)
    }

    fn check(&self, x: &[T]) -> Result<(), BasisError> {
        if x.len() != self.dim {
            return Err(BasisError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Scaled powers `((x_i - c_i)/h)^p` for `p = 0..=degree`, per axis.
    fn powers(&self, x: &[T]) -> [Vec<T>; 3] {
        let mut pw: [Vec<T>; 3] = Default::default();
        for (i, p) in pw.iter_mut().enumerate() {
            p.reserve(self.degree + 1);
            p.push(T::one());
            if i < self.dim {
                let s = (x[i] - self.center[i]) / self.diameter;
                for j in 0..self.degree {
                    let prev = p[j];
                    p.push(prev * s);
                }
            }
        }
        pw
    }

    /// Writes the values of all members at `x` into `out`. Panics on length mismatch.
    pub fn eval_into(&self, x: &[T], out: &mut [T]) {
        let pw = self.powers(x);
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            let mut v = pw[0][e[0] as usize];
            if self.dim > 1 {
                v *= pw[1][e[1] as usize];
            }
            if self.dim > 2 {
                v *= pw[2][e[2] as usize];
            }
            *o = v;
        }
    }

    pub fn eval_point(&self, x: &[T]) -> Result<DVector<T>, BasisError> {
        self.check(x)?;
        let mut out = DVector::zeros(self.len());
        self.eval_into(x, out.as_mut_slice());
        Ok(out)
    }

    /// Value matrix with entry `(i, j) = m_j(p_i)`.
    pub fn eval<P: AsRef<[T]>>(&self, points: &[P]) -> Result<DMatrix<T>, BasisError> {
        let mut m = DMatrix::zeros(points.len(), self.len());
        let mut row = vec![T::zero(); self.len()];
        for (i, p) in points.iter().enumerate() {
            let p = p.as_ref();
            self.check(p)?;
            self.eval_into(p, &mut row);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    /// Writes `∂m_j/∂x_axis` for every member into `out`.
    pub fn grad_into(&self, x: &[T], out: &mut [[T; 3]]) {
        let pw = self.powers(x);
        let inv_h = T::one() / self.diameter;
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = [T::zero(); 3];
            for axis in 0..self.dim {
                if e[axis] == 0 {
                    continue;
                }
                let mut v = from_usize::<T>(e[axis] as usize) * inv_h;
                for other in 0..self.dim {
                    let p = if other == axis { e[other] - 1 } else { e[other] };
                    v *= pw[other][p as usize];
                }
                o[axis] = v;
            }
        }
    }

    /// Gradient tensor as one `(point × member)` matrix per coordinate axis.
    pub fn eval_grad<P: AsRef<[T]>>(&self, points: &[P]) -> Result<Vec<DMatrix<T>>, BasisError> {
        let mut out = vec![DMatrix::zeros(points.len(), self.len()); self.dim];
        let mut g = vec![[T::zero(); 3]; self.len()];
        for (i, p) in points.iter().enumerate() {
            let p = p.as_ref();
            self.check(p)?;
            self.grad_into(p, &mut g);
            for (j, gj) in g.iter().enumerate() {
                for (axis, m) in out.iter_mut().enumerate() {
                    m[(i, j)] = gj[axis];
                }
            }
        }
        Ok(out)
    }

    /// Maps coefficients of `p ∈ P_k` to coefficients of `∂p/∂x_axis ∈ P_{k-1}`.
    ///
    /// For `k = 0` the target is `P_0` and the map is zero.
    pub fn derivative_map(&self, axis: usize) -> DMatrix<T> {
        let target = self.with_degree(self.degree.saturating_sub(1));
        let mut m = DMatrix::zeros(target.len(), self.len());
        let inv_h = T::one() / self.diameter;
        for (j, e) in self.exponents.iter().enumerate() {
            if e[axis] == 0 {
                continue;
            }
            let mut lower = *e;
            lower[axis] -= 1;
            let i = target.index_of(lower).expect("lower exponent in target basis");
            m[(i, j)] = from_usize::<T>(e[axis] as usize) * inv_h;
        }
        m
    }

    /// Maps coefficients of `p ∈ P_k` to coefficients of `Δp ∈ P_{max(k-2, 0)}`.
    pub fn laplacian_map(&self) -> DMatrix<T> {
        let target = self.with_degree(self.degree.saturating_sub(2));
        let mut m = DMatrix::zeros(target.len(), self.len());
        let inv_h2 = T::one() / (self.diameter * self.diameter);
        for (j, e) in self.exponents.iter().enumerate() {
            for axis in 0..self.dim {
                let a = e[axis];
                if a < 2 {
                    continue;
                }
                let mut lower = *e;
                lower[axis] -= 2;
                let i = target.index_of(lower).expect("lower exponent in target basis");
                m[(i, j)] += from_usize::<T>((a * (a - 1)) as usize) * inv_h2;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sizes_follow_binomials() {
        assert_eq!(dim_poly(3, 2), 10);
        assert_eq!(dim_poly(2, 2), 6);
        assert_eq!(dim_poly(1, 4), 5);
        assert_eq!(dim_poly(3, -1), 0);
        let b = MonomialBasis::new(3, 2, &[0.0, 0.0, 0.0], 1.0).unwrap();
        assert_eq!(b.len(), 10);
        assert_eq!(b.count_up_to(0), 1);
        assert_eq!(b.count_up_to(1), 4);
    }

    #[test]
    fn eval_examples() {
        let b3 = MonomialBasis::new(3, 1, &[0.3, -0.2, 1.0], 0.7).unwrap();
        let v = b3.eval_point(&[0.3, -0.2, 1.0]).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 0.0, 0.0, 0.0]);

        let b1 = MonomialBasis::new(1, 2, &[0.0], 1.0).unwrap();
        assert_eq!(b1.eval_point(&[1.0]).unwrap().as_slice(), &[1.0, 1.0, 1.0]);

        let h = 0.5;
        let b2 = MonomialBasis::new(2, 2, &[1.0, 2.0], h).unwrap();
        let v = b2.eval_point(&[1.0 + h, 2.0]).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn eval_rejects_wrong_dimension() {
        let b = MonomialBasis::new(3, 1, &[0.0, 0.0, 0.0], 1.0).unwrap();
        assert_eq!(
            b.eval(&[[0.0, 0.0]]),
            Err(BasisError::DimensionMismatch { expected: 3, got: 2 })
        );
        assert!(MonomialBasis::new(4, 1, &[0.0; 4], 1.0).is_err());
        assert!(MonomialBasis::new(2, 1, &[0.0; 2], 0.0).is_err());
    }

    #[test]
    fn gradient_examples() {
        let h = 0.25;
        let b = MonomialBasis::new(3, 2, &[0.1, 0.2, 0.3], h).unwrap();
        let g = b.eval_grad(&[[0.4, -0.3, 0.9]]).unwrap();
        for axis in 0..3 {
            assert_eq!(g[axis][(0, 0)], 0.0);
        }
        // member x̂
        assert_relative_eq!(g[0][(0, 1)], 1.0 / h);
        assert_eq!(g[1][(0, 1)], 0.0);
        assert_eq!(g[2][(0, 1)], 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 0.8;
        let c = [0.2, -0.1, 0.4];
        let b = MonomialBasis::new(3, 4, &c, h).unwrap();
        let step = 1e-6 * h;
        let mut g = vec![[0.0; 3]; b.len()];
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|i| c[i] + h * rng.gen_range(-0.5..0.5)).collect();
            b.grad_into(&x, &mut g);
            for axis in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[axis] += step;
                xm[axis] -= step;
                let vp = b.eval_point(&xp).unwrap();
                let vm = b.eval_point(&xm).unwrap();
                for j in 0..b.len() {
                    let fd = (vp[j] - vm[j]) / (2.0 * step);
                    // gradients are O(1/h); compare on the scale of h·∇m
                    assert!((g[j][axis] - fd).abs() * h <= 1e-8, "member {j} axis {axis}");
                }
            }
        }
    }

    #[test]
    fn laplacian_map_examples() {
        let h = 0.3;
        let b1 = MonomialBasis::new(3, 1, &[0.0; 3], h).unwrap();
        assert!(b1.laplacian_map().iter().all(|v| *v == 0.0));

        let b2 = MonomialBasis::new(3, 2, &[0.0; 3], h).unwrap();
        let mut p = DVector::zeros(b2.len());
        for e in [[2, 0, 0], [0, 2, 0], [0, 0, 2]] {
            p[b2.index_of(e).unwrap()] = 1.0;
        }
        let lap = b2.laplacian_map() * p;
        assert_eq!(lap.len(), 1);
        assert_relative_eq!(lap[0], 6.0 / (h * h), max_relative = 1e-14);
    }

    #[test]
    fn laplacian_map_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1.3;
        let c = [0.5, 0.5, 0.5];
        let b = MonomialBasis::new(3, 5, &c, h).unwrap();
        let coeffs = DVector::from_fn(b.len(), |_, _| rng.gen_range(-1.0..1.0));
        let lap_coeffs = b.laplacian_map() * &coeffs;
        let lower = b.with_degree(3);
        let eval = |x: &[f64]| b.eval_point(x).unwrap().dot(&coeffs);
        let step = 1e-3;
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|i| c[i] + rng.gen_range(-0.4..0.4)).collect();
            let mut fd = 0.0;
            for axis in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[axis] += step;
                xm[axis] -= step;
                fd += (eval(&xp) - 2.0 * eval(&x) + eval(&xm)) / (step * step);
            }
            let exact = lower.eval_point(&x).unwrap().dot(&lap_coeffs);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn derivative_map_is_consistent_with_gradient() {
        let b = MonomialBasis::new(2, 3, &[0.1, 0.2], 0.6).unwrap();
        let lower = b.with_degree(2);
        let x = [0.35, -0.05];
        let mut g = vec![[0.0; 3]; b.len()];
        b.grad_into(&x, &mut g);
        let vals = lower.eval_point(&x).unwrap();
        for axis in 0..2 {
            let d = b.derivative_map(axis);
            for j in 0..b.len() {
                let via_map = vals.dot(&d.column(j));
                assert_relative_eq!(via_map, g[j][axis], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn enhancement_members_form_the_suffix() {
        let b = MonomialBasis::new(3, 3, &[0.0; 3], 1.0).unwrap();
        let low = b.count_up_to(1);
        for (i, e) in b.exponents().iter().enumerate() {
            let d = e.iter().sum::<u32>();
            assert_eq!(i < low, d <= 1);
        }
    }

    #[test]
    fn single_precision_evaluation() {
        let b = MonomialBasis::<f32>::new(2, 2, &[1.0, 2.0], 0.5).unwrap();
        let v = b.eval_point(&[1.5, 2.0]).unwrap();
        assert_eq!(v.as_slice(), &[1.0f32, 1.0, 0.0, 1.0, 0.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn scaling_invariance(s in 0.1f64..10.0, tx in -5.0f64..5.0, px in -0.5f64..0.5, py in -0.5f64..0.5, pz in -0.5f64..0.5) {
            let b = MonomialBasis::new(3, 3, &[0.0, 0.0, 0.0], 1.0).unwrap();
            let bs = MonomialBasis::new(3, 3, &[tx, tx, tx], s).unwrap();
            let v = b.eval_point(&[px, py, pz]).unwrap();
            let vs = bs.eval_point(&[tx + s * px, tx + s * py, tx + s * pz]).unwrap();
            for j in 0..v.len() {
                proptest::prop_assert!((v[j] - vs[j]).abs() <= 1e-12 * (1.0 + v[j].abs()));
            }
        }

        #[test]
        fn bounded_by_one_inside_the_entity(px in -1.0f64..1.0, py in -1.0f64..1.0, pz in -1.0f64..1.0) {
            let n = (px * px + py * py + pz * pz).sqrt().max(1.0);
            let b = MonomialBasis::new(3, 4, &[0.0; 3], 1.0).unwrap();
            let v = b.eval_point(&[px / n, py / n, pz / n]).unwrap();
            proptest::prop_assert!(v.iter().all(|x| x.abs() <= 1.0 + 1e-15));
        }
    }
}
