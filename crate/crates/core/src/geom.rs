//! Small fixed-size vector algebra, axis-aligned boxes, camera poses and the
//! pinhole camera model.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Unit vector in the same direction; the zero vector is returned as is.
    #[inline]
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self / n
        } else {
            self
        }
    }

    #[inline]
    pub fn abs(self) -> Self {
        Self::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    #[inline]
    pub fn max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    #[inline]
    pub fn min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max_element(self) -> T {
        self.x.max(self.y).max(self.z)
    }

    #[inline]
    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Axis-aligned box given by its two extreme corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Self {
        Self { min, max }
    }

    pub fn size(&self) -> Vec3<T> {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn is_valid(&self) -> bool {
        self.min.x < self.max.x && self.min.y < self.max.y && self.min.z < self.max.z
    }
}

/// Camera pose: position plus yaw (about +z) and pitch (elevation above the
/// xy-plane), both in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint<T> {
    pub position: Vec3<T>,
    pub yaw: T,
    pub pitch: T,
}

impl<T: Real> Viewpoint<T> {
    /// Builds a pose, wrapping yaw into `[0, 2π)` and clamping pitch to
    /// `[-π/2, π/2]`.
    pub fn new(position: Vec3<T>, yaw: T, pitch: T) -> Self {
        let tau = T::TAU();
        let mut yaw = yaw % tau;
        if yaw < T::zero() {
            yaw = yaw + tau;
        }
        if yaw >= tau {
            yaw = T::zero();
        }
        let half_pi = T::FRAC_PI_2();
        Self {
            position,
            yaw,
            pitch: pitch.max(-half_pi).min(half_pi),
        }
    }

    /// Unit viewing direction.
    #[inline]
    pub fn direction(&self) -> Vec3<T> {
        direction_from_angles(self.yaw, self.pitch)
    }

    /// Orthonormal camera frame `(forward, right, up)`.
    pub fn frame(&self) -> CameraFrame<T> {
        let forward = self.direction();
        // The right vector depends on yaw only, so it stays defined when
        // looking straight up or down.
        let right = Vec3::new(self.yaw.sin(), -self.yaw.cos(), T::zero());
        let up = right.cross(forward);
        CameraFrame { forward, right, up }
    }
}

#[inline]
pub fn direction_from_angles<T: Real>(yaw: T, pitch: T) -> Vec3<T> {
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    Vec3::new(cp * cy, cp * sy, sp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrame<T> {
    pub forward: Vec3<T>,
    pub right: Vec3<T>,
    pub up: Vec3<T>,
}

/// Pinhole intrinsics with square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    /// Vertical field of view in radians.
    pub vfov: f64,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self {
            width: 80,
            height: 60,
            vfov: 60f64.to_radians(),
        }
    }
}

impl Intrinsics {
    #[inline]
    pub fn tan_half_v(&self) -> f64 {
        (0.5 * self.vfov).tan()
    }

    #[inline]
    pub fn tan_half_h(&self) -> f64 {
        self.tan_half_v() * self.width as f64 / self.height as f64
    }

    /// Unit ray direction through normalised image coordinates
    /// `(sx, sy) ∈ [0,1]²`, `(0,0)` being the top-left corner.
    pub fn ray_at<T: Real>(&self, frame: &CameraFrame<T>, sx: f64, sy: f64) -> Vec3<T> {
        let x = T::lit((2.0 * sx - 1.0) * self.tan_half_h());
        let y = T::lit((1.0 - 2.0 * sy) * self.tan_half_v());
        (frame.forward + frame.right * x + frame.up * y).normalized()
    }

    /// Ray through the centre of pixel `(u, v)`.
    pub fn pixel_ray<T: Real>(&self, frame: &CameraFrame<T>, u: usize, v: usize) -> Vec3<T> {
        self.ray_at(
            frame,
            (u as f64 + 0.5) / self.width as f64,
            (v as f64 + 0.5) / self.height as f64,
        )
    }

    /// Pixel containing the projection of camera-relative offset `d`, or
    /// `None` when it is behind the camera or outside the image.
    pub fn project(&self, frame: &CameraFrame<f64>, d: Vec3<f64>) -> Option<(usize, usize)> {
        let z = d.dot(frame.forward);
        if z <= 1e-9 {
            return None;
        }
        let xc = d.dot(frame.right) / z / self.tan_half_h();
        let yc = d.dot(frame.up) / z / self.tan_half_v();
        let u = ((xc + 1.0) * 0.5 * self.width as f64).floor();
        let v = ((1.0 - yc) * 0.5 * self.height as f64).floor();
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }

    /// Normalised image coordinates of a `side × side` sub-grid of cell
    /// centres, row-major, truncated to `count` entries.
    pub fn subgrid(count: usize) -> Vec<(f64, f64)> {
        let side = (count as f64).sqrt().ceil().max(1.0) as usize;
        (0..side * side)
            .take(count)
            .map(|k| {
                let (row, col) = (k / side, k % side);
                (
                    (col as f64 + 0.5) / side as f64,
                    (row as f64 + 0.5) / side as f64,
                )
            })
            .collect()
    }
}
