use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};

use crate::Scalar;

/// Rigid transform: rotation (unit quaternion) followed by translation.
///
/// A pose `p` maps points from its local frame into the parent frame:
/// `x_parent = R x_local + t`. Camera poses are camera-to-world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose<T: Scalar> {
    pub rotation: UnitQuaternion<T>,
    pub translation: Vector3<T>,
}

impl<T: Scalar> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Scalar> Pose<T> {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation: renormalize(rotation),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    /// Rotation by `angle` radians about `axis` with zero translation.
    pub fn from_axis_angle(axis: Vector3<T>, angle: T) -> Self {
        Self::new(
            UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle),
            Vector3::zeros(),
        )
    }

    pub fn rot_x(angle: T) -> Self {
        Self::from_axis_angle(Vector3::x(), angle)
    }

    pub fn rot_y(angle: T) -> Self {
        Self::from_axis_angle(Vector3::y(), angle)
    }

    pub fn rot_z(angle: T) -> Self {
        Self::from_axis_angle(Vector3::z(), angle)
    }

    /// Builds a pose from an orthonormal rotation matrix whose columns are the
    /// local axes expressed in the parent frame. The conversion is closed
    /// form, so it is exact near half turns.
    pub fn from_matrix(rotation: &Matrix3<T>, translation: Vector3<T>) -> Self {
        let r = Rotation3::from_matrix_unchecked(*rotation);
        Self::new(UnitQuaternion::from_rotation_matrix(&r), translation)
    }

    /// Quaternion components in `(w, x, y, z)` order.
    pub fn quaternion_wxyz(&self) -> [T; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn from_wxyz(wxyz: [T; 4], translation: Vector3<T>) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self::new(UnitQuaternion::from_quaternion(q), translation)
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose<T>) -> Pose<T> {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose<T> {
        let inv = self.rotation.inverse();
        Pose::new(inv, -(inv * self.translation))
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vector3<T>) -> Vector3<T> {
        self.rotation * v
    }

    pub fn rotation_matrix(&self) -> Matrix3<T> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Geodesic angle between the two rotations, in [0, pi].
    ///
    /// Uses 4 atan2(|a - b|, |a + b|) on the quaternions with the nearer sign
    /// of `b`, which is exact for equal rotations and well conditioned near 0.
    pub fn rotation_angle_to(&self, other: &Pose<T>) -> T {
        let a = self.rotation.coords;
        let b = other.rotation.coords;
        let (d, s) = ((a - b).norm(), (a + b).norm());
        let (d, s) = if d <= s { (d, s) } else { (s, d) };
        d.atan2(s) * T::lit(4.0)
    }

    pub fn translation_distance(&self, other: &Pose<T>) -> T {
        (self.translation - other.translation).norm()
    }

    pub fn cast<U: Scalar>(&self) -> Pose<U> {
        let [w, x, y, z] = self.quaternion_wxyz();
        Pose::from_wxyz(
            [U::lit(w.as_f64()), U::lit(x.as_f64()), U::lit(y.as_f64()), U::lit(z.as_f64())],
            Vector3::new(
                U::lit(self.translation.x.as_f64()),
                U::lit(self.translation.y.as_f64()),
                U::lit(self.translation.z.as_f64()),
            ),
        )
    }
}

fn renormalize<T: Scalar>(q: UnitQuaternion<T>) -> UnitQuaternion<T> {
    let mut q = q.into_inner();
    // Canonical hemisphere keeps serialized quaternions stable.
    if q.w < T::zero() {
        q = -q;
    }
    UnitQuaternion::new_normalize(q)
}

/// Composes two poses; free-function form of [`Pose::compose`].
pub fn compose<T: Scalar>(a: &Pose<T>, b: &Pose<T>) -> Pose<T> {
    a.compose(b)
}
