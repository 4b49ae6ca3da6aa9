//! Viewpoint sampling and filtering.
//!
//! Each step samples locations in free space around the camera, scores every
//! candidate direction with a cheap visibility cost on the coarse TSDF,
//! keeps the best three, and evaluates the full gain only for those. The
//! winning direction's gain is normalised across locations to `[0, 1]`.

use std::f64::consts::{FRAC_PI_4, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain_field::{GainEvaluator, UncertaintyField};
use crate::geom::{Vec3, Viewpoint};
use crate::scene::SceneConfig;
use crate::voxel_map::{OccupancyLabel, VoxelMap};

/// Directions kept by the cheap filter per location.
pub const FILTER_KEEP: usize = 3;
/// Rejections allowed per requested location.
pub const REJECTIONS_PER_LOCATION: usize = 100;
/// Upper bound on frustum voxels inspected by [`tsdf_view_cost`].
pub const VIEW_COST_VOXEL_BUDGET: usize = 4096;

/// Uniform yaw grid over `[0, 2π)` crossed with a uniform pitch grid over
/// `[-π/4, π/4]` (a single pitch is level). Pitch-major order.
pub fn direction_candidates(n_yaw: usize, n_pitch: usize) -> Vec<(f64, f64)> {
    let pitches: Vec<f64> = if n_pitch == 1 {
        vec![0.0]
    } else {
        (0..n_pitch)
            .map(|j| -FRAC_PI_4 + j as f64 * 2.0 * FRAC_PI_4 / (n_pitch - 1) as f64)
            .collect()
    };
    pitches
        .into_iter()
        .flat_map(|p| (0..n_yaw).map(move |k| (k as f64 * TAU / n_yaw as f64, p)))
        .collect()
}

/// Minimum fused distance at a sampled location: half a voxel diagonal, so
/// the camera centre cannot sit inside a surface voxel.
fn min_clearance(map: &VoxelMap) -> f64 {
    0.5 * 3f64.sqrt() * map.resolution()
}

/// Whether `p` is an admissible camera location seen from `p_s`.
pub fn is_admissible(map: &VoxelMap, cfg: &SceneConfig, p_s: Vec3<f64>, p: Vec3<f64>) -> bool {
    if !cfg.bounds.contains(p) {
        return false;
    }
    let Some(c) = map.cell_of(p) else {
        return false;
    };
    map.label(c) == OccupancyLabel::Empty
        && map.voxel(c).value as f64 >= min_clearance(map).min(map.truncation())
        && map.is_path_free(p_s, p)
}

/// Draws `n_loc` positions uniformly in the ball of radius `l_s` around
/// `p_s`, keeping those in empty space that are reachable from `p_s` by a
/// straight collision-free segment.
pub fn sample_locations(
    map: &VoxelMap,
    cfg: &SceneConfig,
    p_s: Vec3<f64>,
    l_s: f64,
    n_loc: usize,
    seed: u64,
) -> Result<Vec<Vec3<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_rejections = REJECTIONS_PER_LOCATION * n_loc;
    let mut out = Vec::with_capacity(n_loc);
    let mut rejections = 0;
    while out.len() < n_loc {
        let dir = Vec3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
        .normalized();
        let radius = l_s * rng.random::<f64>().cbrt();
        let p = p_s + dir * radius;
        if is_admissible(map, cfg, p_s, p) {
            out.push(p);
        } else {
            rejections += 1;
            if rejections >= max_rejections {
                return Err(Error::SamplingExhausted {
                    requested: n_loc,
                    accepted: out.len(),
                    attempts: rejections,
                });
            }
        }
    }
    Ok(out)
}

/// Fraction of frustum voxels (within `[d_n, d_f]`) that are unobserved and
/// not hidden behind an occupied voxel. Large frusta are inspected on a
/// regular sub-lattice of at most [`VIEW_COST_VOXEL_BUDGET`] cells.
pub fn tsdf_view_cost(map: &VoxelMap, view: &Viewpoint<f64>, cfg: &SceneConfig) -> f64 {
    let Some((lo, hi)) = map.frustum_cells(view, cfg) else {
        return 0.0;
    };
    let span: usize = (0..3).map(|a| hi[a] - lo[a] + 1).product();
    let stride = ((span as f64 / VIEW_COST_VOXEL_BUDGET as f64).cbrt().ceil() as usize).max(1);
    let frame = view.frame();
    let eye = view.position;
    let (mut total, mut unseen) = (0usize, 0usize);
    for z in (lo[2]..=hi[2]).step_by(stride) {
        for y in (lo[1]..=hi[1]).step_by(stride) {
            for x in (lo[0]..=hi[0]).step_by(stride) {
                let c = [x, y, z];
                let d = map.center(c) - eye;
                let r = d.norm();
                if r < cfg.d_n || r > cfg.d_f || cfg.camera.project(&frame, d).is_none() {
                    continue;
                }
                total += 1;
                if map.label(c) == OccupancyLabel::Unobserved && is_visible(map, eye, c, r) {
                    unseen += 1;
                }
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        unseen as f64 / total as f64
    }
}

fn is_visible(map: &VoxelMap, eye: Vec3<f64>, target: [usize; 3], dist: f64) -> bool {
    let dir = (map.center(target) - eye) / dist;
    for v in map.traverse(eye, dir, 0.0, dist) {
        if v.cell == target {
            return true;
        }
        if map.label(v.cell) == OccupancyLabel::Occupied {
            return false;
        }
    }
    true
}

/// Sampled positions with their chosen directions and gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSampleSet {
    pub positions: Vec<Vec3<f64>>,
    /// Chosen `(yaw, pitch)` per position.
    pub directions: Vec<(f64, f64)>,
    pub raw_gains: Vec<f64>,
    /// Min–max normalised gains in `[0, 1]`; all zero when the raw gains
    /// are all equal.
    pub gains: Vec<f64>,
    /// Cheap TSDF view-cost evaluations.
    pub cheap_evals: usize,
    /// Full gain evaluations.
    pub expensive_evals: usize,
}

impl GainSampleSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn viewpoint(&self, i: usize) -> Viewpoint<f64> {
        let (yaw, pitch) = self.directions[i];
        Viewpoint::new(self.positions[i], yaw, pitch)
    }

    /// Indices sorted by descending normalised gain, ties by index.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.raw_gains[b]
                .total_cmp(&self.raw_gains[a])
                .then(a.cmp(&b))
        });
        idx
    }

    pub fn raw_range(&self) -> (f64, f64) {
        let lo = self.raw_gains.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .raw_gains
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Maps a raw gain onto this set's normalised scale, clamped to `[0, 1]`.
    pub fn normalize(&self, raw: f64) -> f64 {
        let (lo, hi) = self.raw_range();
        if hi > lo {
            ((raw - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Min–max normalisation; degenerate input maps to zeros.
pub fn normalize_gains(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|g| (g - lo) / (hi - lo)).collect()
}

/// Index of the first maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) struct LocationChoice {
    pub(crate) direction: (f64, f64),
    pub(crate) gain: f64,
    pub(crate) cheap: usize,
    pub(crate) expensive: usize,
}

pub(crate) fn choose_direction(
    map: &VoxelMap,
    field: &UncertaintyField,
    cfg: &SceneConfig,
    evaluator: &GainEvaluator,
    candidates: &[(f64, f64)],
    p: Vec3<f64>,
    use_filter: bool,
) -> LocationChoice {
    let view = |&(yaw, pitch): &(f64, f64)| Viewpoint::new(p, yaw, pitch);
    let (shortlist, cheap): (Vec<usize>, usize) = if use_filter {
        let costs: Vec<f64> = candidates
            .iter()
            .map(|d| tsdf_view_cost(map, &view(d), cfg))
            .collect();
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| costs[b].total_cmp(&costs[a]).then(a.cmp(&b)));
        order.truncate(FILTER_KEEP);
        (order, candidates.len())
    } else {
        ((0..candidates.len()).collect(), 0)
    };
    let gains: Vec<f64> = shortlist
        .iter()
        .map(|&k| {
            evaluator
                .evaluate(field, map, &view(&candidates[k]), cfg)
                .gain
        })
        .collect();
    let best = argmax(&gains);
    LocationChoice {
        direction: candidates[shortlist[best]],
        gain: gains[best],
        cheap,
        expensive: shortlist.len(),
    }
}

/// Samples locations around `p_s` and picks one direction per location.
/// With `use_filter` off, every direction gets the full gain evaluation.
pub fn select_views(
    map: &VoxelMap,
    field: &UncertaintyField,
    p_s: Vec3<f64>,
    cfg: &SceneConfig,
    evaluator: &GainEvaluator,
    use_filter: bool,
    seed: u64,
) -> Result<GainSampleSet> {
    let positions = sample_locations(map, cfg, p_s, cfg.l_s, cfg.n_loc, seed)?;
    let candidates = direction_candidates(cfg.n_yaw, cfg.n_pitch);
    let choices: Vec<LocationChoice> = positions
        .par_iter()
        .map(|&p| choose_direction(map, field, cfg, evaluator, &candidates, p, use_filter))
        .collect();
    let raw_gains: Vec<f64> = choices.iter().map(|c| c.gain).collect();
    Ok(GainSampleSet {
        gains: normalize_gains(&raw_gains),
        directions: choices.iter().map(|c| c.direction).collect(),
        cheap_evals: choices.iter().map(|c| c.cheap).sum(),
        expensive_evals: choices.iter().map(|c| c.expensive).sum(),
        raw_gains,
        positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;
    use crate::scene::builtin;
    use crate::voxel_map::TsdfVoxel;

    const FREE: TsdfVoxel = TsdfVoxel {
        value: 0.3,
        weight: 1.0,
        count: 1,
    };
    const SOLID: TsdfVoxel = TsdfVoxel {
        value: -0.3,
        weight: 1.0,
        count: 1,
    };

    fn cfg() -> SceneConfig {
        let mut c = builtin("cabin").unwrap().1;
        c.bounds = Aabb::new(Vec3::zero(), Vec3::splat(4.0));
        c.d_f = 3.0;
        c.d_min = 1.5;
        c.d_max = 2.5;
        c
    }

    /// 4 m cube at 0.1 m resolution filled by `f(cell)`.
    fn map_with(f: impl Fn([usize; 3]) -> TsdfVoxel) -> VoxelMap {
        let mut m = VoxelMap::with_geometry(Vec3::zero(), [40, 40, 40], 0.1);
        for i in 0..m.len() {
            let c = m.cell_of_linear(i);
            m.set_voxel(c, f(c));
        }
        m
    }

    #[test]
    fn candidate_counts() {
        assert_eq!(direction_candidates(5, 3).len(), 15);
        assert_eq!(direction_candidates(12, 5).len(), 60);
        assert_eq!(direction_candidates(1, 1), vec![(0.0, 0.0)]);
        let c = direction_candidates(4, 3);
        assert!((c[0].1 + FRAC_PI_4).abs() < 1e-15);
        assert!((c[11].1 - FRAC_PI_4).abs() < 1e-15);
        assert!(c.iter().all(|(y, _)| (0.0..TAU).contains(y)));
    }

    #[test]
    fn samples_stay_in_ball_on_free_map() {
        let map = map_with(|_| FREE);
        let p_s = Vec3::splat(2.05);
        let pts = sample_locations(&map, &cfg(), p_s, 1.5, 50, 3).unwrap();
        assert_eq!(pts.len(), 50);
        assert!(pts.iter().all(|p| p.distance(p_s) <= 1.5));
        assert_eq!(
            pts,
            sample_locations(&map, &cfg(), p_s, 1.5, 50, 3).unwrap()
        );
    }

    #[test]
    fn tiny_radius_stays_in_start_voxel() {
        let map = map_with(|_| FREE);
        let p_s = Vec3::splat(2.05);
        let pts = sample_locations(&map, &cfg(), p_s, 0.04, 20, 9).unwrap();
        let c = map.cell_of(p_s);
        assert!(pts.iter().all(|p| map.cell_of(*p) == c));
    }

    #[test]
    fn never_samples_occupied_half_space() {
        let map = map_with(|c| if c[0] >= 25 { SOLID } else { FREE });
        for seed in 0..10 {
            let pts =
                sample_locations(&map, &cfg(), Vec3::new(2.0, 2.05, 2.05), 1.5, 30, seed).unwrap();
            assert!(pts
                .iter()
                .all(|p| map.occupancy(*p) == OccupancyLabel::Empty));
        }
    }

    #[test]
    fn sampling_fails_when_space_is_sealed() {
        let map = map_with(|c| if c == [20, 20, 20] { FREE } else { SOLID });
        let err = sample_locations(&map, &cfg(), Vec3::splat(2.05), 1.5, 5, 0).unwrap_err();
        assert!(matches!(err, Error::SamplingExhausted { requested: 5, .. }));
    }

    #[test]
    fn view_cost_extremes() {
        let c = cfg();
        let v = Viewpoint::new(Vec3::new(0.5, 2.0, 2.0), 0.0, 0.0);
        assert_eq!(tsdf_view_cost(&map_with(|_| FREE), &v, &c), 0.0);
        let unseen = VoxelMap::with_geometry(Vec3::zero(), [40, 40, 40], 0.1);
        assert_eq!(tsdf_view_cost(&unseen, &v, &c), 1.0);
    }

    #[test]
    fn wall_hides_space_behind_it() {
        // Observed free space up to a wall at x ≈ 1.5 covering the lower
        // half of the view; unobserved beyond x = 1.6.
        let map = map_with(|c| {
            if c[0] >= 16 {
                TsdfVoxel::default()
            } else if c[0] >= 14 && c[2] < 20 {
                SOLID
            } else {
                FREE
            }
        });
        let v = Viewpoint::new(Vec3::new(0.5, 2.0, 2.0), 0.0, 0.0);
        let open = map_with(|c| {
            if c[0] >= 16 {
                TsdfVoxel::default()
            } else {
                FREE
            }
        });
        let blocked = tsdf_view_cost(&map, &v, &cfg());
        let unblocked = tsdf_view_cost(&open, &v, &cfg());
        assert!(blocked < 0.5, "{blocked}");
        assert!(blocked < unblocked);
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_gains(&[0.3, 0.3, 0.3]), vec![0.0; 3]);
        let n = normalize_gains(&[0.1, 0.5, 0.3]);
        assert_eq!(&n[..2], &[0.0, 1.0]);
        assert!((n[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn filtered_selection_counts_and_normalises() {
        let map = map_with(|c| {
            if c[0] >= 30 {
                TsdfVoxel::default()
            } else {
                FREE
            }
        });
        let field = UncertaintyField::new(&map);
        let mut c = cfg();
        c.n_loc = 10;
        let ev = GainEvaluator::new(16, 16).unwrap();
        let set = select_views(&map, &field, Vec3::new(1.5, 2.0, 2.0), &c, &ev, true, 5).unwrap();
        assert_eq!(set.len(), 10);
        assert_eq!(set.gains.len(), 10);
        assert_eq!(set.expensive_evals, 30);
        assert_eq!(set.cheap_evals, 10 * 15);
        assert!(set.gains.iter().all(|g| (0.0..=1.0).contains(g)));
        assert_eq!(set.gains[set.ranked()[0]], 1.0);
        let again = select_views(&map, &field, Vec3::new(1.5, 2.0, 2.0), &c, &ev, true, 5).unwrap();
        assert_eq!(set, again);
        let unfiltered =
            select_views(&map, &field, Vec3::new(1.5, 2.0, 2.0), &c, &ev, false, 5).unwrap();
        assert_eq!(unfiltered.positions, set.positions);
        assert_eq!(unfiltered.expensive_evals, 150);
        assert_eq!(unfiltered.cheap_evals, 0);
    }
}
