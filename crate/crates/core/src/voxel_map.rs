//! Coarse TSDF grid, the occupancy map derived from it, and the voxel
//! traversal queries used for planning and gain evaluation.
//!
//! Storage is a dense array. The grid is padded by a few voxels around the
//! scene bounds so that surfaces lying on the bounds still produce a zero
//! crossing inside the grid.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3, Viewpoint};
use crate::scene::{DepthImage, SceneConfig};

/// Consecutive unobserved voxels a depth ray may cross before giving up.
pub const MAX_UNOBSERVED_RUN: usize = 2;

/// Padding around the scene bounds: the truncation band (3 voxels) plus one.
const PAD_VOXELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TsdfVoxel {
    /// Truncated signed distance (m), within ±τ.
    pub value: f32,
    pub weight: f32,
    pub count: u32,
}

impl TsdfVoxel {
    #[inline]
    pub fn is_observed(&self) -> bool {
        self.weight > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OccupancyLabel {
    Occupied,
    Empty,
    Unobserved,
}

/// Label counts over the whole grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OccupancyHistogram {
    pub occupied: usize,
    pub empty: usize,
    pub unobserved: usize,
    pub total: usize,
}

/// One voxel visited by [`Traversal`], with the ray parameter interval
/// spent inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelVisit {
    pub cell: [usize; 3],
    pub t_enter: f64,
    pub t_exit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMap {
    origin: Vec3<f64>,
    dims: [usize; 3],
    res: f64,
    voxels: Vec<TsdfVoxel>,
    labels: Vec<OccupancyLabel>,
}

impl VoxelMap {
    /// Empty map of unobserved voxels covering `bounds` plus padding.
    pub fn new(bounds: Aabb<f64>, l_res: f64) -> Self {
        let pad = PAD_VOXELS;
        let size = bounds.size();
        let n = |s: f64| (s / l_res - 1e-9).ceil().max(1.0) as usize + 2 * pad;
        let dims = [n(size.x), n(size.y), n(size.z)];
        let origin = bounds.min - Vec3::splat(pad as f64 * l_res);
        Self::with_geometry(origin, dims, l_res)
    }

    /// Unpadded map with explicit geometry.
    pub fn with_geometry(origin: Vec3<f64>, dims: [usize; 3], l_res: f64) -> Self {
        assert!(l_res > 0.0, "voxel resolution must be positive");
        let len = dims[0] * dims[1] * dims[2];
        Self {
            origin,
            dims,
            res: l_res,
            voxels: vec![TsdfVoxel::default(); len],
            labels: vec![OccupancyLabel::Unobserved; len],
        }
    }

    pub fn origin(&self) -> Vec3<f64> {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn resolution(&self) -> f64 {
        self.res
    }

    /// Truncation distance τ = 3·l_res.
    pub fn truncation(&self) -> f64 {
        3.0 * self.res
    }

    /// Fused values below this are occupied.
    pub fn occupancy_margin(&self) -> f64 {
        -0.5 * self.res
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn extent(&self) -> Aabb<f64> {
        let d = Vec3::new(
            self.dims[0] as f64,
            self.dims[1] as f64,
            self.dims[2] as f64,
        );
        Aabb::new(self.origin, self.origin + d * self.res)
    }

    #[inline]
    pub fn linear(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    #[inline]
    pub fn cell_of_linear(&self, i: usize) -> [usize; 3] {
        let x = i % self.dims[0];
        let y = (i / self.dims[0]) % self.dims[1];
        let z = i / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    /// Cell containing `p`, or `None` outside the grid.
    #[inline]
    pub fn cell_of(&self, p: Vec3<f64>) -> Option<[usize; 3]> {
        let r = (p - self.origin) / self.res;
        let f = [r.x.floor(), r.y.floor(), r.z.floor()];
        let mut c = [0usize; 3];
        for a in 0..3 {
            if !(f[a] >= 0.0 && f[a] < self.dims[a] as f64) {
                return None;
            }
            c[a] = f[a] as usize;
        }
        Some(c)
    }

    #[inline]
    pub fn center(&self, c: [usize; 3]) -> Vec3<f64> {
        self.origin + Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * self.res
    }

    #[inline]
    pub fn voxel(&self, c: [usize; 3]) -> &TsdfVoxel {
        &self.voxels[self.linear(c)]
    }

    pub fn voxels(&self) -> &[TsdfVoxel] {
        &self.voxels
    }

    pub fn labels(&self) -> &[OccupancyLabel] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, c: [usize; 3]) -> OccupancyLabel {
        self.labels[self.linear(c)]
    }

    /// Overwrites one voxel and refreshes its label.
    pub fn set_voxel(&mut self, c: [usize; 3], v: TsdfVoxel) {
        let i = self.linear(c);
        self.voxels[i] = v;
        self.labels[i] = self.classify(&v);
    }

    #[inline]
    fn classify(&self, v: &TsdfVoxel) -> OccupancyLabel {
        if !v.is_observed() {
            OccupancyLabel::Unobserved
        } else if (v.value as f64) < self.occupancy_margin() {
            OccupancyLabel::Occupied
        } else {
            OccupancyLabel::Empty
        }
    }

    /// Label of the voxel containing `x`; outside the grid is unobserved.
    #[inline]
    pub fn occupancy(&self, x: Vec3<f64>) -> OccupancyLabel {
        match self.cell_of(x) {
            Some(c) => self.label(c),
            None => OccupancyLabel::Unobserved,
        }
    }

    #[inline]
    fn fuse(&mut self, i: usize, sdf: f64) {
        let tau = self.truncation();
        // Observations are quantised before averaging so that fusing two views
        // is independent of their order.
        let obs = sdf.clamp(-tau, tau) as f32 as f64;
        let v = &mut self.voxels[i];
        let w = v.weight as f64;
        v.value = ((v.value as f64 * w + obs) / (w + 1.0)) as f32;
        v.weight += 1.0;
        v.count += 1;
    }

    /// Projective TSDF update from one depth image.
    pub fn integrate_depth(&mut self, view: &Viewpoint<f64>, img: &DepthImage, cfg: &SceneConfig) {
        let cam = cfg.camera;
        debug_assert_eq!((img.width, img.height), (cam.width, cam.height));
        let frame = view.frame();
        let eye = view.position;
        let tau = self.truncation();
        let Some((lo, hi)) = self.frustum_cells(view, cfg) else {
            return;
        };
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let c = [x, y, z];
                    let d = self.center(c) - eye;
                    let r = d.norm();
                    if r < cfg.d_n || r > cfg.d_f {
                        continue;
                    }
                    let Some((u, v)) = cam.project(&frame, d) else {
                        continue;
                    };
                    let measured = img.get(u, v);
                    let sdf = if measured.is_nan() {
                        continue;
                    } else if measured.is_infinite() {
                        tau
                    } else {
                        measured - r
                    };
                    if sdf < -tau {
                        continue;
                    }
                    let i = self.linear(c);
                    self.fuse(i, sdf);
                    self.labels[i] = self.classify(&self.voxels[i]);
                }
            }
        }
    }

    /// Inclusive cell range bounding the view frustum clipped to the grid.
    pub(crate) fn frustum_cells(
        &self,
        view: &Viewpoint<f64>,
        cfg: &SceneConfig,
    ) -> Option<([usize; 3], [usize; 3])> {
        let frame = view.frame();
        let mut lo = view.position;
        let mut hi = view.position;
        for (sx, sy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let corner = view.position + cfg.camera.ray_at(&frame, sx, sy) * cfg.d_f;
            lo = lo.min(corner);
            hi = hi.max(corner);
        }
        // The far cap bulges beyond the corner rays.
        let far = view.position + frame.forward * cfg.d_f;
        lo = lo.min(far);
        hi = hi.max(far);
        self.clip_cells(lo, hi)
    }

    /// Cell range of the box `[lo, hi]` clipped to the grid.
    pub fn clip_cells(&self, lo: Vec3<f64>, hi: Vec3<f64>) -> Option<([usize; 3], [usize; 3])> {
        let a = (lo - self.origin) / self.res;
        let b = (hi - self.origin) / self.res;
        let mut l = [0usize; 3];
        let mut h = [0usize; 3];
        for ax in 0..3 {
            let (fa, fb) = (a[ax].floor(), b[ax].floor());
            if fb < 0.0 || fa >= self.dims[ax] as f64 {
                return None;
            }
            l[ax] = fa.max(0.0) as usize;
            h[ax] = (fb as usize).min(self.dims[ax] - 1);
        }
        Some((l, h))
    }

    /// Marks unobserved voxels whose centres lie within `radius` of `center`
    /// as free space. Used for the space the camera itself occupies.
    pub fn mark_free_sphere(&mut self, center: Vec3<f64>, radius: f64) {
        let r = Vec3::splat(radius);
        let Some((lo, hi)) = self.clip_cells(center - r, center + r) else {
            return;
        };
        let tau = self.truncation();
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let c = [x, y, z];
                    let i = self.linear(c);
                    if self.voxels[i].is_observed() || self.center(c).distance(center) > radius {
                        continue;
                    }
                    self.fuse(i, tau);
                    self.labels[i] = self.classify(&self.voxels[i]);
                }
            }
        }
    }

    pub fn histogram(&self) -> OccupancyHistogram {
        let mut h = OccupancyHistogram {
            total: self.labels.len(),
            ..Default::default()
        };
        for l in &self.labels {
            match l {
                OccupancyLabel::Occupied => h.occupied += 1,
                OccupancyLabel::Empty => h.empty += 1,
                OccupancyLabel::Unobserved => h.unobserved += 1,
            }
        }
        h
    }

    /// `(unobserved, total)` over voxels whose centres lie inside `bounds`.
    pub fn unobserved_within(&self, bounds: &Aabb<f64>) -> (usize, usize) {
        let Some((lo, hi)) = self.clip_cells(bounds.min, bounds.max) else {
            return (0, 0);
        };
        let mut unobserved = 0;
        let mut total = 0;
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let c = [x, y, z];
                    if !bounds.contains(self.center(c)) {
                        continue;
                    }
                    total += 1;
                    if self.label(c) == OccupancyLabel::Unobserved {
                        unobserved += 1;
                    }
                }
            }
        }
        (unobserved, total)
    }

    /// Voxels crossed by the ray `origin + t·dir`, `t ∈ [t_start, t_end]`.
    pub fn traverse(
        &self,
        origin: Vec3<f64>,
        dir: Vec3<f64>,
        t_start: f64,
        t_end: f64,
    ) -> Traversal {
        Traversal::new(self, origin, dir, t_start, t_end)
    }

    /// Distance along a unit ray to the first positive-to-negative crossing
    /// of the fused TSDF, or `None` when the ray leaves the grid, crosses
    /// more than [`MAX_UNOBSERVED_RUN`] consecutive unobserved voxels, or
    /// travels beyond `max_dist`. Unobserved voxels lying entirely within
    /// `near` of the origin (the sensor's blind zone) are skipped.
    pub fn ray_depth(
        &self,
        origin: Vec3<f64>,
        dir: Vec3<f64>,
        near: f64,
        max_dist: f64,
    ) -> Option<f64> {
        let mut prev: Option<(f64, f64)> = None;
        let mut unobserved_run = 0;
        let mut first = true;
        for visit in self.traverse(origin, dir, 0.0, max_dist) {
            let vox = self.voxel(visit.cell);
            if first && visit.t_enter <= 0.0 && vox.is_observed() && vox.value < 0.0 {
                return Some(0.0);
            }
            first = false;
            if !vox.is_observed() {
                if visit.t_exit <= near {
                    continue;
                }
                unobserved_run += 1;
                if unobserved_run > MAX_UNOBSERVED_RUN {
                    return None;
                }
                continue;
            }
            unobserved_run = 0;
            let value = vox.value as f64;
            let tc = (self.center(visit.cell) - origin).dot(dir);
            if value < 0.0 {
                let t = match prev {
                    Some((tp, vp)) => tp + (tc - tp) * vp / (vp - value),
                    None => visit.t_enter,
                };
                let t = t.max(0.0);
                return (t <= max_dist).then_some(t);
            }
            prev = Some((tc, value));
        }
        None
    }

    /// True iff every voxel crossed by segment `ab` is empty.
    pub fn is_path_free(&self, a: Vec3<f64>, b: Vec3<f64>) -> bool {
        let Some(ca) = self.cell_of(a) else {
            return false;
        };
        let len = a.distance(b);
        if len == 0.0 {
            return self.label(ca) == OccupancyLabel::Empty;
        }
        if self.cell_of(b).is_none() {
            return false;
        }
        let dir = (b - a) / len;
        self.traverse(a, dir, 0.0, len)
            .all(|v| self.label(v.cell) == OccupancyLabel::Empty)
    }

    /// Little-endian dump: origin (3×f64), dims (3×u32), l_res (f64), then
    /// value f32, weight f32, count u32 per voxel in x-fastest order.
    pub fn write_blob<W: Write>(&self, mut w: W) -> Result<()> {
        for a in 0..3 {
            w.write_f64::<LittleEndian>(self.origin[a])?;
        }
        for d in self.dims {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        w.write_f64::<LittleEndian>(self.res)?;
        for v in &self.voxels {
            w.write_f32::<LittleEndian>(v.value)?;
            w.write_f32::<LittleEndian>(v.weight)?;
            w.write_u32::<LittleEndian>(v.count)?;
        }
        Ok(())
    }

    pub fn read_blob<R: Read>(mut r: R) -> Result<Self> {
        let mut o = [0.0; 3];
        for v in &mut o {
            *v = r.read_f64::<LittleEndian>()?;
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = r.read_u32::<LittleEndian>()? as usize;
        }
        let res = r.read_f64::<LittleEndian>()?;
        if !(res > 0.0) || dims.iter().any(|d| *d == 0) {
            return Err(Error::CorruptBlob(format!(
                "bad header: dims {dims:?}, l_res {res}"
            )));
        }
        let mut map = Self::with_geometry(Vec3::from_array(o), dims, res);
        for i in 0..map.voxels.len() {
            let value = r.read_f32::<LittleEndian>()?;
            let weight = r.read_f32::<LittleEndian>()?;
            let count = r.read_u32::<LittleEndian>()?;
            let v = TsdfVoxel {
                value,
                weight,
                count,
            };
            map.voxels[i] = v;
            map.labels[i] = map.classify(&v);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::CorruptBlob("trailing bytes after payload".into()));
        }
        Ok(map)
    }
}

/// Amanatides–Woo voxel walk.
#[derive(Debug, Clone)]
pub struct Traversal {
    cell: [i64; 3],
    step: [i64; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    t: f64,
    t_end: f64,
    dims: [i64; 3],
    done: bool,
}

impl Traversal {
    fn new(map: &VoxelMap, origin: Vec3<f64>, dir: Vec3<f64>, t_start: f64, t_end: f64) -> Self {
        let dims = [map.dims[0] as i64, map.dims[1] as i64, map.dims[2] as i64];
        let ext = map.extent();
        let mut t0 = t_start;
        let mut t1 = t_end;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < ext.min[a] || origin[a] >= ext.max[a] {
                    t1 = f64::NEG_INFINITY;
                }
            } else {
                let ta = (ext.min[a] - origin[a]) / dir[a];
                let tb = (ext.max[a] - origin[a]) / dir[a];
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
        }
        let empty = Self {
            cell: [0; 3],
            step: [0; 3],
            t_max: [0.0; 3],
            t_delta: [0.0; 3],
            t: 0.0,
            t_end: 0.0,
            dims,
            done: true,
        };
        if !(t0 <= t1) {
            return empty;
        }
        let p = origin + dir * t0;
        let rel = (p - map.origin) / map.res;
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            cell[a] = (rel[a].floor() as i64).clamp(0, dims[a] - 1);
            if dir[a] > 0.0 {
                step[a] = 1;
                let boundary = map.origin[a] + (cell[a] + 1) as f64 * map.res;
                t_max[a] = (boundary - origin[a]) / dir[a];
                t_delta[a] = map.res / dir[a];
            } else if dir[a] < 0.0 {
                step[a] = -1;
                let boundary = map.origin[a] + cell[a] as f64 * map.res;
                t_max[a] = (boundary - origin[a]) / dir[a];
                t_delta[a] = -map.res / dir[a];
            }
        }
        Self {
            cell,
            step,
            t_max,
            t_delta,
            t: t0,
            t_end: t1,
            dims,
            done: false,
        }
    }
}

impl Iterator for Traversal {
    type Item = VoxelVisit;

    fn next(&mut self) -> Option<VoxelVisit> {
        if self.done {
            return None;
        }
        let axis = if self.t_max[0] <= self.t_max[1] && self.t_max[0] <= self.t_max[2] {
            0
        } else if self.t_max[1] <= self.t_max[2] {
            1
        } else {
            2
        };
        let t_next = self.t_max[axis];
        let visit = VoxelVisit {
            cell: [
                self.cell[0] as usize,
                self.cell[1] as usize,
                self.cell[2] as usize,
            ],
            t_enter: self.t,
            t_exit: t_next.min(self.t_end),
        };
        if t_next > self.t_end {
            self.done = true;
        } else {
            self.cell[axis] += self.step[axis];
            self.t = t_next;
            self.t_max[axis] += self.t_delta[axis];
            if self.cell[axis] < 0 || self.cell[axis] >= self.dims[axis] {
                self.done = true;
            }
        }
        Some(visit)
    }
}
