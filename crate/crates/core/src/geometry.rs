//! Frame and orientation math plus the small dense kernels shared by the
//! observer and the planner.
//!
//! Quaternions use the scalar-first convention `q = (q0, qv)` with the
//! Hamilton product. `rotation_from_quaternion(q)` maps vectors expressed in
//! the rotated (child) frame into the reference (parent) frame, so for
//! `q_c_g` the matrix `R_c_g` takes goal-frame vectors into the camera frame.

use std::ops::Mul;

use nalgebra::{DMatrix, Matrix3, Matrix4x3, SMatrix, SymmetricEigen, Vector3, Vector4};

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted by [`SymPosDef::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Ratio below which the smallest singular value is treated as zero.
pub const SINGULAR_RATIO: f64 = 1e-15;

/// Skew-symmetric cross-product matrix, `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    q0: f64,
    qv: Vector3<f64>,
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            q0: 1.0,
            qv: Vector3::zeros(),
        }
    }

    /// Normalizes `(q0, qv)` onto the unit sphere.
    pub fn new_normalize(q0: f64, qv: Vector3<f64>) -> Result<Self> {
        let n = (q0 * q0 + qv.norm_squared()).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::DegenerateGeometry(format!(
                "quaternion ({q0}, {qv:?}) cannot be normalized"
            )));
        }
        Ok(Self {
            q0: q0 / n,
            qv: qv / n,
        })
    }

    pub(crate) fn from_vector4_normalize(v: &Vector4<f64>) -> Self {
        let n = v.norm();
        Self {
            q0: v[0] / n,
            qv: Vector3::new(v[1], v[2], v[3]) / n,
        }
    }

    /// Rotation by `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if n < 1e-12 {
            if angle == 0.0 {
                return Ok(Self::identity());
            }
            return Err(Error::DegenerateGeometry("zero rotation axis".into()));
        }
        let half = 0.5 * angle;
        Ok(Self {
            q0: half.cos(),
            qv: axis / n * half.sin(),
        })
    }

    /// Exponential map of a rotation vector (axis times angle).
    pub fn from_rotation_vector(rv: &Vector3<f64>) -> Self {
        let angle = rv.norm();
        if angle < 1e-300 {
            return Self::identity();
        }
        Self::from_axis_angle(rv, angle).expect("nonzero axis")
    }

    pub fn scalar(&self) -> f64 {
        self.q0
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.qv
    }

    pub fn to_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.q0, self.qv.x, self.qv.y, self.qv.z)
    }

    pub fn norm(&self) -> f64 {
        (self.q0 * self.q0 + self.qv.norm_squared()).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self {
            q0: self.q0,
            qv: -self.qv,
        }
    }

    /// Renormalizes; products of unit quaternions drift by rounding only.
    fn renormalized(self) -> Self {
        let n = self.norm();
        Self {
            q0: self.q0 / n,
            qv: self.qv / n,
        }
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion {
            q0: self.q0 * rhs.q0 - self.qv.dot(&rhs.qv),
            qv: rhs.qv * self.q0 + self.qv * rhs.q0 + self.qv.cross(&rhs.qv),
        }
        .renormalized()
    }
}

/// `B(q) = [-qvᵀ ; q0·I + [qv]×]`, so that `q̇ = ½ B(q) ω`.
///
/// Linear in the quaternion components, which lets the RK4 stages in
/// [`integrate_quaternion`] evaluate it on non-unit intermediate values.
pub fn b_matrix(q: &UnitQuaternion) -> Matrix4x3<f64> {
    b_matrix_raw(&q.to_vector4())
}

fn b_matrix_raw(q: &Vector4<f64>) -> Matrix4x3<f64> {
    let qv = Vector3::new(q[1], q[2], q[3]);
    let lower = Matrix3::identity() * q[0] + skew(&qv);
    let mut b = Matrix4x3::zeros();
    b.fixed_view_mut::<1, 3>(0, 0).copy_from(&(-qv.transpose()));
    b.fixed_view_mut::<3, 3>(1, 0).copy_from(&lower);
    b
}

/// One RK4 step of `q̇ = ½ B(q) ω` with `ω` held constant, then renormalized.
pub fn integrate_quaternion(q: &UnitQuaternion, omega: &Vector3<f64>, dt: f64) -> UnitQuaternion {
    if omega.iter().all(|w| *w == 0.0) {
        return *q;
    }
    let f = |x: &Vector4<f64>| b_matrix_raw(x) * omega * 0.5;
    let x = q.to_vector4();
    let k1 = f(&x);
    let k2 = f(&(x + k1 * (0.5 * dt)));
    let k3 = f(&(x + k2 * (0.5 * dt)));
    let k4 = f(&(x + k3 * dt));
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    UnitQuaternion::from_vector4_normalize(&next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Max-abs deviation of `RᵀR` from identity and of `det R` from 1.
    pub fn orthonormality_error(&self) -> f64 {
        let e = (self.0.transpose() * self.0 - Matrix3::identity()).abs().max();
        e.max((self.0.determinant() - 1.0).abs())
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

pub fn rotation_from_quaternion(q: &UnitQuaternion) -> RotationMatrix {
    let (w, v) = (q.q0, q.qv);
    let vvt = v * v.transpose();
    RotationMatrix(
        Matrix3::identity() * (w * w - v.norm_squared()) + vvt * 2.0 + skew(&v) * (2.0 * w),
    )
}

/// Inverse of [`rotation_from_quaternion`] (Shepperd's method), `q0 ≥ 0`.
pub fn quaternion_from_rotation(r: &RotationMatrix) -> UnitQuaternion {
    let m = &r.0;
    let tr = m.trace();
    let v = if tr > m[(0, 0)].max(m[(1, 1)]).max(m[(2, 2)]) {
        let s = (1.0 + tr).sqrt() * 2.0;
        Vector4::new(0.25 * s, (m[(2, 1)] - m[(1, 2)]) / s, (m[(0, 2)] - m[(2, 0)]) / s, (m[(1, 0)] - m[(0, 1)]) / s)
    } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        Vector4::new((m[(2, 1)] - m[(1, 2)]) / s, 0.25 * s, (m[(0, 1)] + m[(1, 0)]) / s, (m[(0, 2)] + m[(2, 0)]) / s)
    } else if m[(1, 1)] >= m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        Vector4::new((m[(0, 2)] - m[(2, 0)]) / s, (m[(0, 1)] + m[(1, 0)]) / s, 0.25 * s, (m[(1, 2)] + m[(2, 1)]) / s)
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        Vector4::new((m[(1, 0)] - m[(0, 1)]) / s, (m[(0, 2)] + m[(2, 0)]) / s, (m[(1, 2)] + m[(2, 1)]) / s, 0.25 * s)
    };
    let v = if v[0] < 0.0 { -v } else { v };
    UnitQuaternion::from_vector4_normalize(&v)
}

/// A symmetric positive definite 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymPosDef(Matrix3<f64>);

impl SymPosDef {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        let scale = m.abs().max().max(f64::MIN_POSITIVE);
        let asym = (m - m.transpose()).abs().max();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSpd(format!("asymmetry {asym:e} exceeds tolerance")));
        }
        let sym = (m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let min = eig.eigenvalues.min();
        if min <= 0.0 {
            return Err(Error::NotSpd(format!("eigenvalue {min:e} is not positive")));
        }
        Ok(Self(sym))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn eigenvalues(&self) -> Vector3<f64> {
        SymmetricEigen::new(self.0).eigenvalues
    }

    pub fn inverse(&self) -> Matrix3<f64> {
        let inv = self
            .0
            .cholesky()
            .expect("SPD invariant guarantees a Cholesky factor")
            .inverse();
        (inv + inv.transpose()) * 0.5
    }
}

/// Principal square root through the symmetric eigendecomposition.
pub fn spd_sqrt(m: &SymPosDef) -> SymPosDef {
    let eig = SymmetricEigen::new(m.0);
    let root = eig.eigenvalues.map(f64::sqrt);
    let x = eig.eigenvectors * Matrix3::from_diagonal(&root) * eig.eigenvectors.transpose();
    SymPosDef((x + x.transpose()) * 0.5)
}

/// Ratio of largest to smallest singular value, `+∞` when numerically singular.
pub fn condition_number<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> f64 {
    let d = DMatrix::from_column_slice(R, C, m.as_slice());
    let sv = d.singular_values();
    let max = sv.max();
    let min = sv.min();
    if max == 0.0 || !max.is_finite() || min < SINGULAR_RATIO * max {
        return f64::INFINITY;
    }
    max / min
}

/// Unit normal `(p1 - p2) × (p3 - p2) / ‖·‖` of the plane through three points.
pub fn plane_normal(p1: &Vector3<f64>, p2: &Vector3<f64>, p3: &Vector3<f64>) -> Result<Vector3<f64>> {
    let n = (p1 - p2).cross(&(p3 - p2));
    let len = n.norm();
    if len < 1e-12 {
        return Err(Error::DegenerateGeometry("plane points are collinear".into()));
    }
    Ok(n / len)
}
