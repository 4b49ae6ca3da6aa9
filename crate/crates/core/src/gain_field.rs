//! Per-point uncertainty field, its integration into a per-viewpoint
//! uncertainty, and the depth-band decay that turns it into a gain.
//!
//! The uncertainty of a cell decays with the number of times it has been
//! observed, σ² = 1 / (1 + n_obs). Unseen cells stay at 1, so frontiers
//! attract views and repeatedly imaged regions lose value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Intrinsics, Vec3, Viewpoint};
use crate::num::Real;
use crate::scene::SceneConfig;
use crate::voxel_map::{OccupancyLabel, VoxelMap};

/// Prior uncertainty of an unobserved cell.
pub const PRIOR_SIGMA2: f64 = 1.0;

/// Default rays per viewpoint (a 10×10 pixel sub-grid).
pub const DEFAULT_RAYS: usize = 100;
/// Default samples per ray.
pub const DEFAULT_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyField {
    dims: [usize; 3],
    sigma2: Vec<f64>,
    counts: Vec<u32>,
}

impl UncertaintyField {
    /// Field aligned with `map`, every cell at the prior.
    pub fn new(map: &VoxelMap) -> Self {
        let n = map.len();
        Self {
            dims: map.dims(),
            sigma2: vec![PRIOR_SIGMA2; n],
            counts: vec![0; n],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// σ² of the cell at linear index `i`.
    #[inline]
    pub fn at_linear(&self, i: usize) -> f64 {
        self.sigma2[i]
    }

    /// σ² at `x`; outside the grid the prior applies.
    pub fn at(&self, map: &VoxelMap, x: Vec3<f64>) -> f64 {
        map.cell_of(x)
            .map_or(PRIOR_SIGMA2, |c| self.sigma2[map.linear(c)])
    }

    /// Sets σ² of one cell directly.
    pub fn set_linear(&mut self, i: usize, sigma2: f64) {
        assert!((0.0..=1.0).contains(&sigma2), "σ² must lie in [0, 1]");
        self.sigma2[i] = sigma2;
    }

    /// Refreshes every cell from the map's observation counts.
    pub fn decay(&mut self, map: &VoxelMap) {
        assert_eq!(self.dims, map.dims(), "field and map grids differ");
        for (i, v) in map.voxels().iter().enumerate() {
            self.counts[i] = v.count;
            self.sigma2[i] = if v.is_observed() {
                decayed_sigma2(v.count)
            } else {
                PRIOR_SIGMA2
            };
        }
    }

    /// Horizontal slices at the given z indices, for plotting.
    pub fn slices(&self, map: &VoxelMap, z_indices: &[usize]) -> FieldSlices {
        let [nx, ny, nz] = self.dims;
        let slices = z_indices
            .iter()
            .filter(|z| **z < nz)
            .map(|&z| {
                let rows = (0..ny)
                    .map(|y| {
                        (0..nx)
                            .map(|x| self.sigma2[map.linear([x, y, z])])
                            .collect()
                    })
                    .collect();
                FieldSlice {
                    z_index: z,
                    z: map.center([0, 0, z]).z,
                    sigma2: rows,
                }
            })
            .collect();
        FieldSlices {
            origin: map.origin().to_array(),
            dims: self.dims,
            l_res: map.resolution(),
            slices,
        }
    }
}

/// Radius of voxel centres to clear so that every blind-zone probe around a
/// camera lands in a cleared voxel.
pub fn blind_zone_radius(cfg: &SceneConfig) -> f64 {
    cfg.d_n + 0.5 * 3f64.sqrt() * cfg.l_res
}

/// σ²₀ / (1 + n).
#[inline]
pub fn decayed_sigma2(n_obs: u32) -> f64 {
    PRIOR_SIGMA2 / (1.0 + n_obs as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSlices {
    pub origin: [f64; 3],
    pub dims: [usize; 3],
    pub l_res: f64,
    pub slices: Vec<FieldSlice>,
}

/// `sigma2[y][x]` at one height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSlice {
    pub z_index: usize,
    pub z: f64,
    pub sigma2: Vec<Vec<f64>>,
}

/// Hit-and-stop volume rendering weights: `W_i = α_i · Π_{j<i} (1 − α_j)`.
pub fn transmittance_weights<T: Real>(alphas: &[T]) -> Vec<T> {
    let mut transmittance = T::one();
    alphas
        .iter()
        .map(|&a| {
            let w = transmittance * a;
            transmittance = transmittance * (T::one() - a);
            w
        })
        .collect()
}

/// `(1/R) Σ_r Σ_i W_ri σ²_ri` over per-ray `(weight, σ²)` samples.
pub fn mean_ray_uncertainty<T: Real>(rays: &[Vec<(T, T)>]) -> T {
    if rays.is_empty() {
        return T::zero();
    }
    let total: T = rays
        .iter()
        .map(|r| r.iter().map(|&(w, s)| w * s).sum::<T>())
        .sum();
    total / T::lit(rays.len() as f64)
}

/// Preferred depth band of the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthBand<T> {
    pub d_min: T,
    pub d_max: T,
    /// Depth assumed when no ray returns a surface.
    pub d_f: T,
}

impl<T: Real> DepthBand<T> {
    pub fn new(d_min: T, d_max: T, d_f: T) -> Self {
        Self { d_min, d_max, d_f }
    }

    /// Band centre d_u.
    pub fn center(&self) -> T {
        (self.d_min + self.d_max) * T::lit(0.5)
    }

    /// Decay rate |α| = 2 / (d_max − d_min).
    pub fn decay_rate(&self) -> T {
        T::lit(2.0) / (self.d_max - self.d_min)
    }

    /// Multiplier applied to σ²_v for view depth `d_v`.
    pub fn factor(&self, d_v: Option<T>) -> T {
        let d = d_v.unwrap_or(self.d_f);
        if self.d_min < d && d < self.d_max {
            T::one()
        } else {
            (-self.decay_rate() * (d - self.center()).abs()).exp()
        }
    }
}

impl DepthBand<f64> {
    pub fn from_config(cfg: &SceneConfig) -> Self {
        Self::new(cfg.d_min, cfg.d_max, cfg.d_f)
    }
}

/// Gain of a view: σ²_v inside the depth band, exponentially decayed
/// outside it. A view with no valid depth is treated as looking at the far
/// field.
#[inline]
pub fn information_gain<T: Real>(sigma2: T, d_v: Option<T>, band: &DepthBand<T>) -> T {
    band.factor(d_v) * sigma2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewpointGain {
    pub sigma2: f64,
    /// `None` when no ray returned a depth within range.
    pub depth: Option<f64>,
    pub gain: f64,
}

/// Ray and sample budget for the exact per-view evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEvaluator {
    pub rays: usize,
    pub samples: usize,
}

impl Default for GainEvaluator {
    fn default() -> Self {
        Self {
            rays: DEFAULT_RAYS,
            samples: DEFAULT_SAMPLES,
        }
    }
}

impl GainEvaluator {
    pub fn new(rays: usize, samples: usize) -> Result<Self> {
        if rays == 0 || samples == 0 {
            return Err(Error::InvalidArgument(format!(
                "ray count ({rays}) and samples per ray ({samples}) must be positive"
            )));
        }
        Ok(Self { rays, samples })
    }

    /// Unit ray directions on the pixel sub-grid.
    pub fn ray_directions(&self, view: &Viewpoint<f64>, camera: &Intrinsics) -> Vec<Vec3<f64>> {
        let frame = view.frame();
        Intrinsics::subgrid(self.rays)
            .into_iter()
            .map(|(sx, sy)| camera.ray_at(&frame, sx, sy))
            .collect()
    }

    /// Sample distances along each ray: centres of `samples` equal bins of
    /// `[d_n, d_f]`.
    pub fn sample_depths(&self, cfg: &SceneConfig) -> Vec<f64> {
        let span = cfg.d_f - cfg.d_n;
        (0..self.samples)
            .map(|i| cfg.d_n + (i as f64 + 0.5) * span / self.samples as f64)
            .collect()
    }

    /// Blind-zone probe distances: centres of `⌈2·d_n / l_res⌉` equal bins
    /// of `[0, d_n)`.
    pub fn near_depths(cfg: &SceneConfig, l_res: f64) -> Vec<f64> {
        let m = (2.0 * cfg.d_n / l_res).ceil().max(1.0) as usize;
        (0..m).map(|k| (k as f64 + 0.5) * cfg.d_n / m as f64).collect()
    }

    /// Integrated uncertainty σ²_v of a view. A sample blocks the ray
    /// (α = 1) when its voxel is occupied or unobserved; samples outside the
    /// scene bounds are transparent. Transmittance starts at the camera:
    /// a blocking probe inside the blind zone `[0, d_n)` zeroes the ray
    /// without contributing uncertainty of its own.
    pub fn viewpoint_uncertainty(
        &self,
        field: &UncertaintyField,
        map: &VoxelMap,
        view: &Viewpoint<f64>,
        cfg: &SceneConfig,
    ) -> f64 {
        let depths = self.sample_depths(cfg);
        let near = Self::near_depths(cfg, map.resolution());
        let origin = view.position;
        let inv = 1.0 / map.resolution();
        let o = map.origin();
        let [nx, ny, nz] = map.dims();
        let labels = map.labels();
        let index = |p: Vec3<f64>| -> Option<usize> {
            if !cfg.bounds.contains(p) {
                return None;
            }
            let fx = ((p.x - o.x) * inv).floor();
            let fy = ((p.y - o.y) * inv).floor();
            let fz = ((p.z - o.z) * inv).floor();
            if fx < 0.0 || fy < 0.0 || fz < 0.0 || fx >= nx as f64 || fy >= ny as f64 || fz >= nz as f64 {
                return None;
            }
            Some((fz as usize * ny + fy as usize) * nx + fx as usize)
        };
        let blocks = |i: usize| labels[i] != OccupancyLabel::Empty;
        let mut total = 0.0;
        for dir in self.ray_directions(view, &cfg.camera) {
            if near.iter().any(|&t| index(origin + dir * t).is_some_and(blocks)) {
                continue;
            }
            let mut transmittance = 1.0;
            let mut ray_sum = 0.0;
            for &t in &depths {
                let Some(i) = index(origin + dir * t) else {
                    continue;
                };
                let alpha = if blocks(i) { 1.0 } else { 0.0 };
                ray_sum += transmittance * alpha * field.at_linear(i);
                transmittance *= 1.0 - alpha;
            }
            total += ray_sum;
        }
        total / self.rays as f64
    }

    /// Mean surface depth d_v over the rays whose depth lies in
    /// `[d_n, d_f]`, or `None` if there are none.
    pub fn view_depth(
        &self,
        map: &VoxelMap,
        view: &Viewpoint<f64>,
        cfg: &SceneConfig,
    ) -> Option<f64> {
        let (sum, n) = self
            .ray_directions(view, &cfg.camera)
            .into_iter()
            .filter_map(|d| map.ray_depth(view.position, d, cfg.d_n, cfg.d_f))
            .filter(|d| (cfg.d_n..=cfg.d_f).contains(d))
            .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Full evaluation: uncertainty, view depth and decayed gain.
    pub fn evaluate(
        &self,
        field: &UncertaintyField,
        map: &VoxelMap,
        view: &Viewpoint<f64>,
        cfg: &SceneConfig,
    ) -> ViewpointGain {
        let sigma2 = self.viewpoint_uncertainty(field, map, view, cfg);
        let depth = self.view_depth(map, view, cfg);
        let gain = information_gain(sigma2, depth, &DepthBand::from_config(cfg));
        ViewpointGain {
            sigma2,
            depth,
            gain,
        }
    }
}
