use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

/// Rigid transform in SE(3), stored as a unit quaternion plus translation.
///
/// A `Pose3` named `a_from_b` maps coordinates expressed in frame `b` into
/// frame `a`: `p_a = R * p_b + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose3 {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose3 {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: renormalize(rotation),
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::new(x, y, z))
    }

    /// Rotation of `angle` radians about the z axis, no translation.
    pub fn rot_z(angle: f64) -> Self {
        Self::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle),
            Vector3::zeros(),
        )
    }

    /// Builds a pose from a rotation matrix, projecting it onto SO(3) first.
    pub fn from_matrix(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_matrix(rotation);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    /// Quaternion components in `(qx, qy, qz, qw)` order.
    pub fn from_parts(t: [f64; 3], q: [f64; 4]) -> Self {
        let quat = Quaternion::new(q[3], q[0], q[1], q[2]);
        Self::new(UnitQuaternion::from_quaternion(quat), Vector3::from(t))
    }

    /// `(qx, qy, qz, qw)`.
    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose3) -> Pose3 {
        Pose3::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose3 {
        let inv = self.rotation.inverse();
        Pose3::new(inv, -(inv * self.translation))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }

    /// Rotation angle and translation distance of `self⁻¹ ∘ other`.
    pub fn distance_to(&self, other: &Pose3) -> (f64, f64) {
        let delta = self.inverse().compose(other);
        (delta.rotation_angle(), delta.translation.norm())
    }

    /// Heading (atan2 of y, x) of a body axis after rotation into the parent frame.
    pub fn yaw_of_axis(&self, axis: &Vector3<f64>) -> f64 {
        let v = self.rotation * axis;
        v.y.atan2(v.x)
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let mut q = UnitQuaternion::new_normalize(q.into_inner());
    // keep w ≥ 0 so the same rotation always serializes the same way
    if q.w < 0.0 {
        q = UnitQuaternion::new_unchecked(-q.into_inner());
    }
    q
}
