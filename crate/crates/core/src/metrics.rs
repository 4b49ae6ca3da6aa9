//! Geometry metrics between reconstructed and ground-truth surface samples.

use std::collections::HashMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::num::Real;
use crate::scene::Scene;
use crate::voxel_map::{OccupancyLabel, VoxelMap};

/// Default number of surface samples per side.
pub const DEFAULT_SAMPLES: usize = 20_000;
/// Completion threshold in voxels.
pub const THRESHOLD_VOXELS: f64 = 2.0;
/// Ground-truth samples must satisfy `|sdf| <` this.
pub const SURFACE_TOLERANCE: f64 = 1e-3;
const NEWTON_ITERS: usize = 32;
const ATTEMPTS_PER_SAMPLE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceSource {
    GroundTruth,
    Reconstructed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSampleSet<T> {
    pub source: SurfaceSource,
    pub points: Vec<Vec3<T>>,
}

impl<T> SurfaceSampleSet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Projects `p` onto the zero set by Newton steps along the gradient.
fn project<T: Real>(scene: &Scene<T>, mut p: Vec3<T>) -> Option<Vec3<T>> {
    let tol = T::lit(SURFACE_TOLERANCE * 0.1);
    for _ in 0..NEWTON_ITERS {
        let d = scene.sdf(p);
        if d.abs() < tol {
            return Some(p);
        }
        let g = scene.gradient(p);
        let g2 = g.norm_squared();
        if !(g2 > T::lit(1e-12)) {
            return None;
        }
        p = p - g * (d / g2);
    }
    (scene.sdf(p).abs() < tol).then_some(p)
}

/// Samples the scene surface inside `bounds`: uniform points within
/// `shell` of the surface are kept and projected onto it, which spreads the
/// samples roughly uniformly over surface area.
pub fn sample_gt_surface<T: Real>(
    scene: &Scene<T>,
    bounds: &Aabb<T>,
    shell: T,
    count: usize,
    seed: u64,
) -> Result<SurfaceSampleSet<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (bounds.min, bounds.max);
    let mut points = Vec::with_capacity(count);
    let attempts = ATTEMPTS_PER_SAMPLE * count.max(1);
    let slack = Vec3::splat(T::lit(SURFACE_TOLERANCE));
    let loose = Aabb::new(lo - slack, hi + slack);
    for _ in 0..attempts {
        if points.len() == count {
            break;
        }
        let u = Vec3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()).cast::<T>();
        let p = Vec3::new(lo.x + u.x * (hi.x - lo.x), lo.y + u.y * (hi.y - lo.y), lo.z + u.z * (hi.z - lo.z));
        if scene.sdf(p).abs() > shell {
            continue;
        }
        if let Some(q) = project(scene, p) {
            // Surfaces on the boundary itself land a rounding error outside.
            if loose.contains(q) && scene.sdf(q).abs() < T::lit(SURFACE_TOLERANCE) {
                points.push(q.max(lo).min(hi));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::NoSurface);
    }
    if points.len() < count {
        warn!("ground-truth surface sampling returned {} of {count} points", points.len());
    }
    Ok(SurfaceSampleSet { source: SurfaceSource::GroundTruth, points })
}

/// Samples TSDF zero crossings inside `bounds` by casting rays in random
/// directions from random empty voxels.
pub fn sample_reconstructed_surface(
    map: &VoxelMap,
    bounds: &Aabb<f64>,
    count: usize,
    seed: u64,
) -> Result<SurfaceSampleSet<f64>> {
    let empty: Vec<usize> = map
        .labels()
        .iter()
        .enumerate()
        .filter(|(i, l)| **l == OccupancyLabel::Empty && bounds.contains(map.center(map.cell_of_linear(*i))))
        .map(|(i, _)| i)
        .collect();
    if empty.is_empty() {
        return Err(Error::NoSurface);
    }
    let reach = map.extent().size().norm();
    let res = map.resolution();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..ATTEMPTS_PER_SAMPLE * count.max(1) {
        if points.len() == count {
            break;
        }
        let c = map.cell_of_linear(empty[rng.random_range(0..empty.len())]);
        let jitter = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * res;
        let origin = map.center(c) + jitter;
        let dir = Vec3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
        .normalized();
        if let Some(d) = map.ray_depth(origin, dir, 0.0, reach) {
            let p = origin + dir * d;
            if bounds.contains(p) {
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::NoSurface);
    }
    if points.len() < count {
        warn!("reconstructed surface sampling returned {} of {count} points", points.len());
    }
    Ok(SurfaceSampleSet { source: SurfaceSource::Reconstructed, points })
}

/// Exact nearest-neighbour index over a uniform grid hash.
pub struct GridIndex<'a, T> {
    points: &'a [Vec3<T>],
    cell: T,
    cells: HashMap<[i64; 3], Vec<u32>>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl<'a, T: Real> GridIndex<'a, T> {
    /// Builds the index with roughly two points per occupied cell. Panics on
    /// an empty point set.
    pub fn new(points: &'a [Vec3<T>]) -> Self {
        assert!(!points.is_empty(), "nearest-neighbour index needs points");
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = lo.min(*p);
            hi = hi.max(*p);
        }
        let ext = hi - lo;
        let n = T::lit(points.len() as f64);
        // Surface samples fill a 2-D set, so size cells from the area.
        let area = ext.x * ext.y + ext.y * ext.z + ext.x * ext.z;
        let mut cell = (area / n * T::lit(2.0)).sqrt();
        if !(cell > T::zero()) || !cell.is_finite() {
            cell = ext.max_element().max(T::one());
        }
        let mut index = Self { points, cell, cells: HashMap::new(), lo: [i64::MAX; 3], hi: [i64::MIN; 3] };
        for (i, p) in points.iter().enumerate() {
            let k = index.key(*p);
            for a in 0..3 {
                index.lo[a] = index.lo[a].min(k[a]);
                index.hi[a] = index.hi[a].max(k[a]);
            }
            index.cells.entry(k).or_default().push(i as u32);
        }
        index
    }

    fn key(&self, p: Vec3<T>) -> [i64; 3] {
        p.to_array().map(|x| (x / self.cell).floor().to_i64().unwrap_or(0))
    }

    /// Index and distance of the closest point.
    pub fn nearest(&self, q: Vec3<T>) -> (usize, T) {
        let k = self.key(q);
        let mut best = (usize::MAX, T::infinity());
        let max_ring = (0..3).map(|a| (k[a] - self.lo[a]).abs().max((self.hi[a] - k[a]).abs())).max().unwrap_or(0);
        let visit = |c: [i64; 3], best: &mut (usize, T)| {
            if let Some(ids) = self.cells.get(&c) {
                for &i in ids {
                    let d = self.points[i as usize].distance(q);
                    if d < best.1 || (d == best.1 && (i as usize) < best.0) {
                        *best = (i as usize, d);
                    }
                }
            }
        };
        for r in 0..=max_ring {
            for dz in -r..=r {
                for dy in -r..=r {
                    let on_face = dz.abs() == r || dy.abs() == r;
                    let step = if on_face { 1 } else { (2 * r).max(1) as usize };
                    for dx in (-r..=r).step_by(step) {
                        visit([k[0] + dx, k[1] + dy, k[2] + dz], &mut best);
                    }
                }
            }
            // Anything outside ring r is at least r cells away.
            if best.1 <= self.cell * T::lit(r as f64) {
                break;
            }
        }
        best
    }
}

/// Brute-force reference for [`GridIndex::nearest`].
pub fn nearest_brute<T: Real>(points: &[Vec3<T>], q: Vec3<T>) -> (usize, T) {
    let mut best = (usize::MAX, T::infinity());
    for (i, p) in points.iter().enumerate() {
        let d = p.distance(q);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryMetrics {
    /// Mean distance from reconstructed to ground-truth samples (m).
    pub accuracy: f64,
    /// Mean distance from ground-truth to reconstructed samples (m).
    pub completion: f64,
    /// Fraction of ground-truth samples closer than `threshold` to the
    /// reconstruction.
    pub completion_ratio: f64,
    pub threshold: f64,
    pub reconstructed_points: usize,
    pub ground_truth_points: usize,
}

fn nn_distances<T: Real>(queries: &[Vec3<T>], targets: &[Vec3<T>]) -> Vec<T> {
    let index = GridIndex::new(targets);
    queries.par_iter().map(|q| index.nearest(*q).1).collect()
}

pub fn geometry_metrics<T: Real>(
    rec: &SurfaceSampleSet<T>,
    gt: &SurfaceSampleSet<T>,
    threshold: T,
) -> Result<GeometryMetrics> {
    if rec.is_empty() || gt.is_empty() {
        return Err(Error::InvalidArgument("metric inputs must be non-empty".into()));
    }
    let mean = |v: &[T]| v.iter().map(|d| d.as_f64()).sum::<f64>() / v.len() as f64;
    let to_gt = nn_distances(&rec.points, &gt.points);
    let to_rec = nn_distances(&gt.points, &rec.points);
    let completed = to_rec.iter().filter(|d| **d < threshold).count();
    Ok(GeometryMetrics {
        accuracy: mean(&to_gt),
        completion: mean(&to_rec),
        completion_ratio: completed as f64 / to_rec.len() as f64,
        threshold: threshold.as_f64(),
        reconstructed_points: rec.len(),
        ground_truth_points: gt.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Primitive;

    fn set(points: Vec<Vec3<f64>>) -> SurfaceSampleSet<f64> {
        SurfaceSampleSet { source: SurfaceSource::GroundTruth, points }
    }

    fn grid_plane(n: usize, spacing: f64, z: f64) -> Vec<Vec3<f64>> {
        (0..n * n).map(|i| Vec3::new((i % n) as f64 * spacing, (i / n) as f64 * spacing, z)).collect()
    }

    #[test]
    fn sphere_samples_lie_on_sphere() {
        let scene: Scene<f64> = Scene::new(vec![Primitive::sphere(Vec3::zero(), 1.0)]).unwrap();
        let b = Aabb::new(Vec3::splat(-2.0), Vec3::splat(2.0));
        let s = sample_gt_surface(&scene, &b, 0.1, 2000, 1).unwrap();
        assert_eq!(s.len(), 2000);
        assert!(s.points.iter().all(|p| (p.norm() - 1.0).abs() < 1e-3));
        assert_eq!(s, sample_gt_surface(&scene, &b, 0.1, 2000, 1).unwrap());
    }

    #[test]
    fn plane_samples_coplanar() {
        let scene: Scene<f64> = Scene::new(vec![Primitive::plane(Vec3::new(0.0, 0.0, 1.0), 0.5)]).unwrap();
        let b = Aabb::new(Vec3::splat(-2.0), Vec3::splat(2.0));
        let s = sample_gt_surface(&scene, &b, 0.1, 1000, 2).unwrap();
        assert!(s.points.iter().all(|p| (p.z - 0.5).abs() < 1e-3));
    }

    #[test]
    fn disjoint_spheres_share_samples() {
        let scene = Scene::new(vec![
            Primitive::sphere(Vec3::new(-2.0, 0.0, 0.0), 0.5),
            Primitive::sphere(Vec3::new(2.0, 0.0, 0.0), 1.0),
        ])
        .unwrap();
        let b = Aabb::new(Vec3::new(-4.0, -2.0, -2.0), Vec3::new(4.0, 2.0, 2.0));
        let mut left = 0.0;
        for seed in 0..5 {
            let s = sample_gt_surface(&scene, &b, 0.1, 1000, seed).unwrap();
            left += s.points.iter().filter(|p| p.x < 0.0).count() as f64 / s.len() as f64;
        }
        let frac = left / 5.0;
        // Area ratio 1:4 gives 0.2.
        assert!((0.1..0.9).contains(&frac), "{frac}");
        assert!((frac - 0.2).abs() < 0.05, "{frac}");
    }

    #[test]
    fn no_surface_in_bounds() {
        let scene = Scene::new(vec![Primitive::sphere(Vec3::splat(10.0), 1.0)]).unwrap();
        let b = Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0));
        assert!(matches!(sample_gt_surface(&scene, &b, 0.1, 100, 0), Err(Error::NoSurface)));
    }

    #[test]
    fn identical_sets() {
        let s = set(grid_plane(30, 0.05, 0.0));
        let m = geometry_metrics(&s, &s, 0.01).unwrap();
        assert_eq!((m.accuracy, m.completion, m.completion_ratio), (0.0, 0.0, 1.0));
    }

    #[test]
    fn shifted_plane() {
        let gt = set(grid_plane(40, 0.05, 0.0));
        let rec = set(grid_plane(40, 0.05, 0.02));
        let m = geometry_metrics(&rec, &gt, 0.05).unwrap();
        assert!((m.accuracy - 0.02).abs() < 1e-12);
        assert!((m.completion - 0.02).abs() < 1e-12);
        assert_eq!(m.completion_ratio, 1.0);
    }

    #[test]
    fn half_coverage() {
        let gt = set(grid_plane(40, 0.05, 0.0));
        let rec = set(gt.points.iter().copied().filter(|p| p.x < 0.975).collect());
        let m = geometry_metrics(&rec, &gt, 1e-6).unwrap();
        assert!((m.completion_ratio - 0.5).abs() < 1e-12);
        assert_eq!(m.accuracy, 0.0);
    }

    #[test]
    fn grid_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let pts: Vec<Vec3<f64>> =
                (0..500).map(|_| Vec3::new(rng.random(), rng.random::<f64>() * 3.0, rng.random::<f64>() * 0.1)).collect();
            let index = GridIndex::new(&pts);
            for _ in 0..200 {
                let q = Vec3::new(rng.random::<f64>() * 2.0 - 0.5, rng.random::<f64>() * 4.0, rng.random::<f64>() - 0.5);
                assert_eq!(index.nearest(q), nearest_brute(&pts, q));
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let pts: Vec<Vec3<f32>> = grid_plane(10, 0.1, 0.0).into_iter().map(|p| p.cast()).collect();
        let s = SurfaceSampleSet { source: SurfaceSource::GroundTruth, points: pts };
        assert_eq!(geometry_metrics(&s, &s, 0.01f32).unwrap().completion_ratio, 1.0);
    }
}
