//! Synthetic ground-truth scenes and the depth sensor simulator.
//!
//! A scene is a union of signed-distance primitives. Depth images are
//! produced by sphere tracing each pixel ray and adding zero-mean Gaussian
//! noise whose standard deviation grows with the square of the depth.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Intrinsics, Vec3, Viewpoint};
use crate::num::Real;

/// Surface hit tolerance for sphere tracing (m).
pub const HIT_EPS: f64 = 1e-4;
const MAX_MARCH_STEPS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive<T> {
    Sphere {
        center: Vec3<T>,
        radius: T,
    },
    /// Axis-aligned box.
    Box {
        center: Vec3<T>,
        half_extents: Vec3<T>,
    },
    /// Half-space `normal · x <= offset` is solid.
    Plane {
        normal: Vec3<T>,
        offset: T,
    },
}

impl<T: Real> Primitive<T> {
    pub fn sphere(center: Vec3<T>, radius: T) -> Self {
        Self::Sphere { center, radius }
    }

    pub fn cuboid(center: Vec3<T>, half_extents: Vec3<T>) -> Self {
        Self::Box {
            center,
            half_extents,
        }
    }

    /// Plane with the given (not necessarily unit) outward normal.
    pub fn plane(normal: Vec3<T>, offset: T) -> Self {
        let n = normal.norm();
        Self::Plane {
            normal: normal / n,
            offset: offset / n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Sphere { center, radius } => center.is_finite() && radius > T::zero(),
            Self::Box {
                center,
                half_extents,
            } => {
                center.is_finite()
                    && half_extents.x > T::zero()
                    && half_extents.y > T::zero()
                    && half_extents.z > T::zero()
            }
            Self::Plane { normal, offset } => {
                offset.is_finite() && (normal.norm() - T::one()).abs() < T::lit(1e-6)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "degenerate primitive {self:?}"
            )))
        }
    }

    #[inline]
    pub fn sdf(&self, x: Vec3<T>) -> T {
        match *self {
            Self::Sphere { center, radius } => (x - center).norm() - radius,
            Self::Box {
                center,
                half_extents,
            } => {
                let q = (x - center).abs() - half_extents;
                q.max(Vec3::zero()).norm() + q.max_element().min(T::zero())
            }
            Self::Plane { normal, offset } => normal.dot(x) - offset,
        }
    }
}

/// Union of primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene<T> {
    pub primitives: Vec<Primitive<T>>,
}

impl<T: Real> Scene<T> {
    pub fn new(primitives: Vec<Primitive<T>>) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::EmptyScene);
        }
        for p in &primitives {
            p.validate()?;
        }
        Ok(Self { primitives })
    }

    /// Signed distance: negative inside, positive outside.
    #[inline]
    pub fn sdf(&self, x: Vec3<T>) -> T {
        self.primitives
            .iter()
            .fold(T::infinity(), |d, p| d.min(p.sdf(x)))
    }

    /// Central-difference gradient of the scene SDF.
    pub fn gradient(&self, x: Vec3<T>) -> Vec3<T> {
        let h = T::lit(1e-5);
        let two_h = h + h;
        let e = |i: usize| {
            let mut v = Vec3::zero();
            match i {
                0 => v.x = h,
                1 => v.y = h,
                _ => v.z = h,
            }
            v
        };
        Vec3::new(
            (self.sdf(x + e(0)) - self.sdf(x - e(0))) / two_h,
            (self.sdf(x + e(1)) - self.sdf(x - e(1))) / two_h,
            (self.sdf(x + e(2)) - self.sdf(x - e(2))) / two_h,
        )
    }

    /// First hit distance along a unit ray, marching by the SDF bound, or
    /// `None` when nothing is hit before `max_dist`.
    pub fn sphere_trace(&self, origin: Vec3<T>, dir: Vec3<T>, max_dist: T) -> Option<T> {
        let eps = T::lit(HIT_EPS);
        let mut t = T::zero();
        for _ in 0..MAX_MARCH_STEPS {
            let s = self.sdf(origin + dir * t);
            if s < eps {
                return Some(t);
            }
            t = t + s;
            if t > max_dist {
                return None;
            }
        }
        None
    }
}

/// Scene-dependent parameters. Field names follow the usual notation:
/// sampling radius `l_s`, voxel resolution `l_res`, planner step `l_step`,
/// near and far field `d_n`/`d_f`, preferred depth band `d_min`/`d_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub name: String,
    pub bounds: Aabb<f64>,
    /// Initial camera position.
    pub start: Vec3<f64>,
    pub l_s: f64,
    pub l_res: f64,
    pub l_step: f64,
    pub d_n: f64,
    pub d_f: f64,
    pub n_pitch: usize,
    pub n_yaw: usize,
    pub d_min: f64,
    pub d_max: f64,
    /// Number of planned views (pipeline steps) per run.
    pub view_budget: usize,
    /// Locations sampled per step.
    pub n_loc: usize,
    pub camera: Intrinsics,
    /// Depth noise coefficient: σ = k_noise · depth² (1/m).
    pub k_noise: f64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(format!("{}: {m}", self.name)));
        if !self.bounds.is_valid() {
            return fail("bounds must have positive extent on every axis");
        }
        if !(0.0 < self.d_n
            && self.d_n < self.d_min
            && self.d_min < self.d_max
            && self.d_max <= self.d_f)
        {
            return fail("require 0 < d_n < d_min < d_max <= d_f");
        }
        if !(self.l_res > 0.0) {
            return fail("l_res must be positive");
        }
        if !(self.l_step > 0.0 && self.l_step <= self.l_s) {
            return fail("require 0 < l_step <= l_s");
        }
        if self.n_pitch == 0 || self.n_yaw == 0 {
            return fail("N_pitch and N_yaw must be at least 1");
        }
        if self.n_loc == 0 {
            return fail("N_loc must be at least 1");
        }
        if self.camera.width == 0 || self.camera.height == 0 {
            return fail("camera resolution must be non-zero");
        }
        if !(self.camera.vfov > 0.0 && self.camera.vfov < std::f64::consts::PI) {
            return fail("vertical field of view must lie in (0, π)");
        }
        if !(self.k_noise >= 0.0) {
            return fail("k_noise must be non-negative");
        }
        if !self.bounds.contains(self.start) {
            return fail("start position outside bounds");
        }
        Ok(())
    }

    /// Noise standard deviation at the given depth.
    #[inline]
    pub fn noise_sigma(&self, depth: f64) -> f64 {
        self.k_noise * depth * depth
    }
}

/// Row-major depth image in metres, measured along each pixel ray.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

impl DepthImage {
    /// No surface within the far field. Fusion treats such pixels as free
    /// space up to `d_f`.
    pub const NO_RETURN: f64 = f64::INFINITY;
    /// Return closer than the near field; carries no information.
    pub const INVALID: f64 = f64::NAN;

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            depth: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.depth[v * self.width + u]
    }

    #[inline]
    pub fn is_valid_depth(d: f64) -> bool {
        d.is_finite()
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }

    /// Writes a 16-bit binary PGM with depth in millimetres; sentinels are 0.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n65535\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.depth.len() * 2);
        for &d in &self.depth {
            let mm = if d.is_finite() {
                (d * 1000.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            buf.extend_from_slice(&mm.to_be_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }
}

/// Renders a depth image from `view`. Depths outside `[d_n, d_f]` become
/// sentinels: [`DepthImage::NO_RETURN`] beyond the far field or without a hit,
/// [`DepthImage::INVALID`] inside the near field.
pub fn render_depth(
    scene: &Scene<f64>,
    view: &Viewpoint<f64>,
    cfg: &SceneConfig,
    seed: u64,
) -> Result<DepthImage> {
    let origin = view.position;
    if scene.sdf(origin) <= 0.0 {
        return Err(Error::InsideGeometry {
            x: origin.x,
            y: origin.y,
            z: origin.z,
        });
    }
    let cam = cfg.camera;
    let frame = view.frame();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = DepthImage::filled(cam.width, cam.height, DepthImage::NO_RETURN);
    for v in 0..cam.height {
        for u in 0..cam.width {
            let dir = cam.pixel_ray(&frame, u, v);
            let Some(hit) = scene.sphere_trace(origin, dir, cfg.d_f) else {
                continue;
            };
            let sigma = cfg.noise_sigma(hit);
            let measured = if sigma > 0.0 {
                hit + Normal::new(0.0, sigma)
                    .expect("finite sigma")
                    .sample(&mut rng)
            } else {
                hit
            };
            img.depth[v * cam.width + u] = if measured < cfg.d_n {
                DepthImage::INVALID
            } else if measured > cfg.d_f {
                DepthImage::NO_RETURN
            } else {
                measured
            };
        }
    }
    Ok(img)
}

/// Names of the scenes shipped with the crate.
pub const BUILTIN_SCENES: [&str; 5] = ["cabin", "room", "landmark", "pillars", "gallery"];

/// Built-in scene geometry and parameters.
pub fn builtin(name: &str) -> Option<(Scene<f64>, SceneConfig)> {
    let v = Vec3::new;
    let floor = Primitive::plane(v(0.0, 0.0, 1.0), 0.0);
    let cabin_like = |name: &str, bounds: Aabb<f64>, start| SceneConfig {
        name: name.to_string(),
        bounds,
        start,
        l_s: 3.0,
        l_res: 0.1,
        l_step: 0.2,
        d_n: 0.5,
        d_f: 6.0,
        n_pitch: 3,
        n_yaw: 5,
        d_min: 2.5,
        d_max: 4.5,
        view_budget: 28,
        n_loc: 32,
        camera: Intrinsics::default(),
        k_noise: 0.001,
    };
    let room_like = |name: &str, bounds: Aabb<f64>, start| SceneConfig {
        l_s: 1.0,
        n_pitch: 5,
        n_yaw: 12,
        d_min: 1.5,
        d_max: 3.5,
        view_budget: 40,
        ..cabin_like(name, bounds, start)
    };
    // Walls and ceiling of a closed box-shaped room.
    let enclosure = |b: Aabb<f64>| {
        vec![
            floor,
            Primitive::plane(v(0.0, 0.0, -1.0), -b.max.z),
            Primitive::plane(v(1.0, 0.0, 0.0), b.min.x),
            Primitive::plane(v(-1.0, 0.0, 0.0), -b.max.x),
            Primitive::plane(v(0.0, 1.0, 0.0), b.min.y),
            Primitive::plane(v(0.0, -1.0, 0.0), -b.max.y),
        ]
    };
    let built = match name {
        "cabin" => {
            let b = Aabb::new(v(-2.5, -2.5, 0.0), v(2.5, 2.5, 3.0));
            let prims = vec![
                floor,
                Primitive::cuboid(v(0.4, -0.3, 0.5), v(0.5, 0.5, 0.6)),
                Primitive::cuboid(v(0.4, -0.3, 1.25), v(0.6, 0.6, 0.15)),
                Primitive::sphere(v(-0.7, 0.8, 0.45), 0.55),
            ];
            (prims, cabin_like("cabin", b, v(-2.0, -2.0, 1.5)))
        }
        "pillars" => {
            let b = Aabb::new(v(-3.0, -3.0, 0.0), v(3.0, 3.0, 3.0));
            let mut prims = vec![floor];
            for (x, y) in [(-1.2, -1.2), (1.2, -1.2), (1.2, 1.2), (-1.2, 1.2)] {
                prims.push(Primitive::cuboid(v(x, y, 1.1), v(0.15, 0.15, 1.2)));
            }
            prims.push(Primitive::sphere(v(0.0, 0.0, 0.6), 0.7));
            (prims, cabin_like("pillars", b, v(-2.5, 0.0, 1.5)))
        }
        "room" => {
            let b = Aabb::new(v(0.0, 0.0, 0.0), v(6.0, 6.0, 3.0));
            let mut prims = enclosure(b);
            prims.extend([
                // Interior wall with a doorway-sized gap near y = 6.
                Primitive::cuboid(v(3.0, 2.0, 1.2), v(0.08, 2.0, 1.2)),
                Primitive::cuboid(v(1.2, 4.6, 0.35), v(0.5, 0.4, 0.45)),
                Primitive::cuboid(v(4.8, 1.5, 0.4), v(0.4, 0.6, 0.5)),
                Primitive::sphere(v(4.6, 4.4, 0.4), 0.5),
            ]);
            (prims, room_like("room", b, v(1.0, 1.0, 1.4)))
        }
        "gallery" => {
            let b = Aabb::new(v(0.0, 0.0, 0.0), v(7.0, 5.0, 3.0));
            let mut prims = enclosure(b);
            prims.extend([
                Primitive::cuboid(v(2.3, 3.0, 1.4), v(0.08, 2.0, 1.4)),
                Primitive::cuboid(v(4.7, 2.0, 1.4), v(0.08, 2.0, 1.4)),
                Primitive::cuboid(v(1.0, 4.2, 0.5), v(0.4, 0.4, 0.6)),
                Primitive::sphere(v(6.0, 4.0, 0.5), 0.6),
            ]);
            (prims, room_like("gallery", b, v(1.0, 1.0, 1.4)))
        }
        "landmark" => {
            let b = Aabb::new(v(-25.0, -20.0, 0.0), v(25.0, 20.0, 30.0));
            let prims = vec![
                floor,
                Primitive::cuboid(v(0.0, 0.0, 7.0), v(4.0, 4.0, 7.5)),
                Primitive::sphere(v(0.0, 0.0, 17.0), 3.5),
                Primitive::cuboid(v(10.0, -6.0, 2.5), v(3.0, 2.0, 3.0)),
            ];
            let cfg = SceneConfig {
                name: "landmark".into(),
                bounds: b,
                start: v(-20.0, -15.0, 8.0),
                l_s: 30.0,
                l_res: 1.0,
                l_step: 2.0,
                d_n: 0.5,
                d_f: 80.0,
                n_pitch: 3,
                n_yaw: 5,
                d_min: 30.0,
                d_max: 50.0,
                view_budget: 28,
                n_loc: 32,
                camera: Intrinsics::default(),
                k_noise: 0.0002,
            };
            (prims, cfg)
        }
        _ => return None,
    };
    let (prims, cfg) = built;
    Some((Scene::new(prims).expect("built-in scene is valid"), cfg))
}
