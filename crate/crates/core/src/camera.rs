//! Framing camera for catalog previews: a bounding-sphere fit aimed at the
//! box center.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Transform, Vec3};

/// Radius substituted for zero-extent boxes, meters.
pub const MIN_FRAMING_RADIUS: f64 = 1e-3;

/// Margin shared with the DCC adapter for preview renders.
pub const PREVIEW_MARGIN: f64 = 1.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("vertical field of view must lie in (0, 180) degrees, got {0}")]
    InvalidFov(f64),
    #[error("margin must be >= 1, got {0}")]
    InvalidMargin(f64),
    #[error("view direction has zero length")]
    ZeroViewDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramingCamera {
    pub transform: Transform,
    pub target: Vec3,
    pub distance: f64,
    /// Radius actually used; differs from the box's when it was degenerate.
    pub radius: f64,
}

/// Places a camera at `center - view_dir * d` with
/// `d = margin * r / sin(fov / 2)`, `r` the box's bounding-sphere radius.
///
/// Orientation follows the DCC camera convention: the camera looks down its
/// local -Z with +Y up, and the returned rotation is Euler XYZ in degrees
/// with zero roll.
pub fn compute_framing_camera(
    aabb: &Aabb,
    vertical_fov_deg: f64,
    margin: f64,
    view_dir: Vec3,
) -> Result<FramingCamera, CameraError> {
    if !(vertical_fov_deg > 0.0 && vertical_fov_deg < 180.0) {
        return Err(CameraError::InvalidFov(vertical_fov_deg));
    }
    if !(margin >= 1.0) || !margin.is_finite() {
        return Err(CameraError::InvalidMargin(margin));
    }
    let dir = view_dir.normalized().ok_or(CameraError::ZeroViewDirection)?;
    let target = aabb.center();
    let mut radius = aabb.bounding_radius();
    if !(radius > 0.0) {
        radius = MIN_FRAMING_RADIUS;
    }
    let distance = margin * radius / (vertical_fov_deg.to_radians() * 0.5).sin();
    let position = target - dir.scale(distance);
    let transform = Transform { position, rotation: look_rotation(dir), scale: Vec3::ONE };
    Ok(FramingCamera { transform, target, distance, radius })
}

/// Euler XYZ (degrees) turning the camera's -Z axis onto `dir`, no roll.
pub fn look_rotation(dir: Vec3) -> Vec3 {
    let tilt = (-dir.z).clamp(-1.0, 1.0).acos();
    let heading = if dir.x == 0.0 && dir.y == 0.0 { 0.0 } else { (-dir.x).atan2(dir.y) };
    Vec3::new(tilt.to_degrees(), 0.0, heading.to_degrees())
}

/// Camera basis `(right, up, forward)` for an Euler XYZ rotation in degrees,
/// where `forward` is the viewing direction (local -Z).
pub fn camera_basis(rotation: Vec3) -> (Vec3, Vec3, Vec3) {
    let apply = |v: Vec3| rotate_xyz(v, rotation);
    (apply(Vec3::new(1.0, 0.0, 0.0)), apply(Vec3::new(0.0, 1.0, 0.0)), apply(Vec3::new(0.0, 0.0, -1.0)))
}

/// Applies `Rz * Ry * Rx` (Euler XYZ, degrees) to `v`.
pub fn rotate_xyz(v: Vec3, rotation: Vec3) -> Vec3 {
    let (sx, cx) = rotation.x.to_radians().sin_cos();
    let (sy, cy) = rotation.y.to_radians().sin_cos();
    let (sz, cz) = rotation.z.to_radians().sin_cos();
    let v = Vec3::new(v.x, cx * v.y - sx * v.z, sx * v.y + cx * v.z);
    let v = Vec3::new(cy * v.x + sy * v.z, v.y, -sy * v.x + cy * v.z);
    Vec3::new(cz * v.x - sz * v.y, sz * v.x + cz * v.y, v.z)
}
