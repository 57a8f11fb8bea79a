//! Poses, yaw-rotated bounding boxes, separating-axis overlap tests and the
//! SE(3) distance used to turn pose-valued variations into scalars.
//!
//! Conventions: positions in meters, world `+z` is up, quaternions are stored
//! as `(w, x, y, z)` and normalized on construction. Boxes rotate about the
//! vertical axis only.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Quaternions whose norm is within this distance of 1 are accepted verbatim.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Serialize for Vec3 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        <[f64; 3]>::deserialize(d).map(Vec3::from)
    }
}

/// Quaternion in `(w, x, y, z)` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        let (s, c) = (angle / 2.0).sin_cos();
        let a = axis * (1.0 / n);
        Quat::new(c, a.x * s, a.y * s, a.z * s)
    }

    /// Rotation about world `+z`.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (yaw / 2.0).sin_cos();
        Quat::new(c, 0.0, 0.0, s)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalized(self) -> Result<Quat, GeometryError> {
        if !self.is_finite() {
            return Err(GeometryError::InvalidInput(format!("non-finite quaternion {self:?}")));
        }
        let n = self.norm();
        if n == 0.0 {
            return Err(GeometryError::InvalidInput("zero quaternion".into()));
        }
        Ok(Quat::new(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    pub fn neg(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Heading of the rotated `+x` axis in the horizontal plane.
    pub fn yaw(self) -> f64 {
        let siny = 2.0 * (self.w * self.z + self.x * self.y);
        let cosy = 1.0 - 2.0 * (self.y * self.y + self.z * self.z);
        siny.atan2(cosy)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Position plus unit orientation of a placed object, camera or end effector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    orientation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quat) -> Result<Self, GeometryError> {
        if !position.is_finite() {
            return Err(GeometryError::InvalidInput(format!("non-finite position {position:?}")));
        }
        let n = orientation.norm();
        // Already-unit quaternions are kept bit-for-bit so serialized scenes round-trip.
        let orientation = if orientation.is_finite() && (n - 1.0).abs() <= UNIT_NORM_TOLERANCE {
            orientation
        } else {
            orientation.normalized()?
        };
        Ok(Self { position, orientation })
    }

    pub fn from_position_yaw(position: Vec3, yaw: f64) -> Self {
        Self { position, orientation: Quat::from_yaw(yaw) }
    }

    pub fn identity() -> Self {
        Self { position: Vec3::ZERO, orientation: Quat::IDENTITY }
    }

    pub fn orientation(&self) -> Quat {
        self.orientation
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseWire {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseWire { position: self.position.to_array(), orientation: self.orientation.to_array() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = PoseWire::deserialize(d)?;
        let [qw, qx, qy, qz] = w.orientation;
        Pose::new(w.position.into(), Quat::new(qw, qx, qy, qz)).map_err(serde::de::Error::custom)
    }
}

/// Geodesic angle between two rotations, in `[0, π]`. Insensitive to the
/// quaternion double cover.
pub fn quat_geodesic(q1: Quat, q2: Quat) -> Result<f64, GeometryError> {
    if !q1.is_finite() || !q2.is_finite() {
        return Err(GeometryError::InvalidInput("non-finite quaternion component".into()));
    }
    Ok(2.0 * q1.dot(q2).abs().min(1.0).acos())
}

/// `‖p − p_ref‖ + beta · geodesic(q, q_ref)`.
pub fn pose_distance(t: &Pose, t_ref: &Pose, beta: f64) -> Result<f64, GeometryError> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(GeometryError::InvalidInput(format!("beta must be finite and >= 0, got {beta}")));
    }
    let rot = quat_geodesic(t.orientation, t_ref.orientation)?;
    Ok(t.position.distance(t_ref.position) + beta * rot)
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Box rotated about the vertical axis by `yaw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    center: Vec3,
    half_extents: Vec3,
    yaw: f64,
}

impl Obb {
    pub fn new(center: Vec3, half_extents: Vec3, yaw: f64) -> Result<Self, GeometryError> {
        if !center.is_finite() || !yaw.is_finite() {
            return Err(GeometryError::InvalidInput("non-finite box pose".into()));
        }
        if !(half_extents.x > 0.0 && half_extents.y > 0.0 && half_extents.z > 0.0) {
            return Err(GeometryError::InvalidInput(format!(
                "half extents must be strictly positive, got {half_extents:?}"
            )));
        }
        Ok(Self { center, half_extents, yaw: wrap_angle(yaw) })
    }

    /// Box from full dimensions.
    pub fn from_dims(center: Vec3, dims: Vec3, yaw: f64) -> Result<Self, GeometryError> {
        Self::new(center, dims * 0.5, yaw)
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn half_extents(&self) -> Vec3 {
        self.half_extents
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn bottom(&self) -> f64 {
        self.center.z - self.half_extents.z
    }

    pub fn top(&self) -> f64 {
        self.center.z + self.half_extents.z
    }

    pub fn with_center(mut self, center: Vec3) -> Self {
        self.center = center;
        self
    }

    /// Unit axes of the box in the horizontal plane.
    pub fn axes(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.yaw.sin_cos();
        [[c, s], [-s, c]]
    }

    pub fn footprint_corners(&self) -> [[f64; 2]; 4] {
        let [u, v] = self.axes();
        let (hx, hy) = (self.half_extents.x, self.half_extents.y);
        let (cx, cy) = (self.center.x, self.center.y);
        let corner = |sx: f64, sy: f64| {
            [cx + sx * hx * u[0] + sy * hy * v[0], cy + sx * hx * u[1] + sy * hy * v[1]]
        };
        [corner(1.0, 1.0), corner(-1.0, 1.0), corner(-1.0, -1.0), corner(1.0, -1.0)]
    }

    /// Half-widths of the footprint's world-axis-aligned bounding rectangle.
    pub fn footprint_aabb_half(&self) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let (hx, hy) = (self.half_extents.x, self.half_extents.y);
        [c.abs() * hx + s.abs() * hy, s.abs() * hx + c.abs() * hy]
    }

    fn projected_radius(&self, axis: [f64; 2]) -> f64 {
        let [u, v] = self.axes();
        self.half_extents.x * (u[0] * axis[0] + u[1] * axis[1]).abs()
            + self.half_extents.y * (v[0] * axis[0] + v[1] * axis[1]).abs()
    }

    /// Copy with every half extent grown by `d` (shrunk when negative).
    pub fn inflated(&self, d: f64) -> Self {
        Self {
            center: self.center,
            half_extents: Vec3::new(
                self.half_extents.x + d,
                self.half_extents.y + d,
                self.half_extents.z + d,
            ),
            yaw: self.yaw,
        }
    }

    /// Penetration depth of the footprints along `axis` (unit vector); negative
    /// when they are separated along it.
    pub fn penetration_along(&self, other: &Obb, axis: [f64; 2]) -> f64 {
        let d = [other.center.x - self.center.x, other.center.y - self.center.y];
        let dist = (d[0] * axis[0] + d[1] * axis[1]).abs();
        self.projected_radius(axis) + other.projected_radius(axis) - dist
    }
}

/// SAT test of two yaw-rotated boxes, each inflated by `margin / 2`. Boxes
/// that exactly touch after inflation do not overlap.
pub fn obb_overlap(a: &Obb, b: &Obb, margin: f64) -> bool {
    let a = a.inflated(margin / 2.0);
    let b = b.inflated(margin / 2.0);
    let dz = (a.center.z - b.center.z).abs();
    if dz >= a.half_extents.z + b.half_extents.z {
        return false;
    }
    let [au, av] = a.axes();
    let [bu, bv] = b.axes();
    [au, av, bu, bv].into_iter().all(|axis| a.penetration_along(&b, axis) > 0.0)
}

/// Planar rectangle at fixed height, e.g. a support's top face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRegion {
    pub center: [f64; 2],
    pub half_extents: [f64; 2],
    pub yaw: f64,
    pub z: f64,
}

impl SurfaceRegion {
    /// Point expressed in the region's local frame.
    pub fn to_local(&self, x: f64, y: f64) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn to_world(&self, lx: f64, ly: f64) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [self.center[0] + c * lx - s * ly, self.center[1] + s * lx + c * ly]
    }

    /// Inclusive containment of a point after shrinking every side by `inset`.
    pub fn contains(&self, x: f64, y: f64, inset: f64) -> bool {
        let [lx, ly] = self.to_local(x, y);
        lx.abs() <= self.half_extents[0] - inset && ly.abs() <= self.half_extents[1] - inset
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_extents[0] * self.half_extents[1]
    }
}

/// Top face of a box.
pub fn top_surface_region(o: &Obb) -> SurfaceRegion {
    SurfaceRegion {
        center: [o.center.x, o.center.y],
        half_extents: [o.half_extents.x, o.half_extents.y],
        yaw: o.yaw,
        z: o.top(),
    }
}

/// Rectangular table top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_top: f64,
}

impl Default for TableBounds {
    /// The planner prompt's coordinate frame: X in [0.25, 0.85], Y in [-0.4, 0.4].
    fn default() -> Self {
        Self { x_min: 0.25, x_max: 0.85, y_min: -0.40, y_max: 0.40, z_top: 0.0 }
    }
}

impl TableBounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, z_top: f64) -> Result<Self, GeometryError> {
        let b = Self { x_min, x_max, y_min, y_max, z_top };
        b.check()?;
        Ok(b)
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        let all = [self.x_min, self.x_max, self.y_min, self.y_max, self.z_top];
        if all.iter().any(|v| !v.is_finite()) || !(self.x_min < self.x_max) || !(self.y_min < self.y_max) {
            return Err(GeometryError::InvalidInput(format!("degenerate table bounds {self:?}")));
        }
        Ok(())
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0]
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn depth(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.depth()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Clamps a footprint center so the footprint's bounding rectangle stays on
    /// the table; when the footprint is wider than the table along an axis the
    /// center goes to the table's midline on that axis.
    pub fn clamp_center(&self, x: f64, y: f64, aabb_half: [f64; 2]) -> [f64; 2] {
        let clamp_axis = |v: f64, lo: f64, hi: f64, h: f64| {
            if hi - lo <= 2.0 * h {
                (lo + hi) / 2.0
            } else {
                v.clamp(lo + h, hi - h)
            }
        };
        [
            clamp_axis(x, self.x_min, self.x_max, aabb_half[0]),
            clamp_axis(y, self.y_min, self.y_max, aabb_half[1]),
        ]
    }
}
