//! Step-by-step reconstruction loop.
//!
//! A run starts with a yaw sweep at the start pose. Each step then fuses the
//! pending captures, decays the uncertainty field, samples and scores
//! candidate views, fits the gain model, picks the best view as goal, plans a
//! path there and captures depth images along it.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::approximator::NetworkConfig;
use crate::error::{Error, Result};
use crate::gain_field::{blind_zone_radius, GainEvaluator, UncertaintyField};
use crate::geom::{Vec3, Viewpoint};
use crate::metrics::{
    geometry_metrics, sample_gt_surface, sample_reconstructed_surface, GeometryMetrics, DEFAULT_SAMPLES,
    THRESHOLD_VOXELS,
};
use crate::planner::{plan, CountingOracle, GainOracle, PlannerConfig, PlannerKind, ViewPath};
use crate::sampler::{choose_direction, direction_candidates, select_views, GainSampleSet};
use crate::scene::{render_depth, DepthImage, Scene, SceneConfig};
use crate::voxel_map::{OccupancyHistogram, VoxelMap};
use crate::ServedModel;

pub const RUN_SCHEMA_VERSION: u32 = 1;
/// Goals tried per step before the run is aborted.
pub const MAX_GOAL_ATTEMPTS: usize = 3;

/// Feature flags distinguishing the ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub use_approximator: bool,
    pub use_filter: bool,
    pub planner: PlannerKind,
}

impl Variant {
    pub const V2: Self = Self { use_approximator: false, use_filter: false, planner: PlannerKind::Rrt };
    pub const V3: Self = Self { use_approximator: false, use_filter: false, planner: PlannerKind::Astar };
    pub const V4: Self = Self { use_approximator: true, use_filter: false, planner: PlannerKind::Rrt };
    pub const V5: Self = Self { use_approximator: true, use_filter: false, planner: PlannerKind::Astar };
    pub const V6: Self = Self { use_approximator: true, use_filter: true, planner: PlannerKind::Astar };

    /// `V2`..`V6` for the named variants, otherwise a flag summary such as
    /// `rrt+approx+filter`.
    pub fn label(&self) -> String {
        let named = [("V2", Self::V2), ("V3", Self::V3), ("V4", Self::V4), ("V5", Self::V5), ("V6", Self::V6)];
        if let Some((name, _)) = named.iter().find(|(_, v)| v == self) {
            return (*name).to_string();
        }
        let mut s = self.planner.to_string();
        if self.use_approximator {
            s.push_str("+approx");
        }
        if self.use_filter {
            s.push_str("+filter");
        }
        s
    }
}

impl Default for Variant {
    fn default() -> Self {
        Self::V6
    }
}

/// Everything a run needs besides the scene geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub variant: Variant,
    pub network: NetworkConfig,
    /// `l_step` is taken from the scene.
    pub planner: PlannerConfig,
    pub evaluator: GainEvaluator,
    pub metric_samples: usize,
    /// Spacing of captures along a path (m); defaults to
    /// `max(2·l_step, l_s/3)`.
    pub capture_interval: Option<f64>,
}

impl RunConfig {
    pub fn new(scene: SceneConfig, variant: Variant) -> Self {
        Self {
            scene,
            variant,
            network: NetworkConfig::default(),
            planner: PlannerConfig::default(),
            evaluator: GainEvaluator::default(),
            metric_samples: DEFAULT_SAMPLES,
            capture_interval: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.network.validate()?;
        self.planner_config(0).validate()?;
        GainEvaluator::new(self.evaluator.rays, self.evaluator.samples)?;
        if self.metric_samples == 0 {
            return Err(Error::InvalidConfig("metric_samples must be positive".into()));
        }
        if let Some(c) = self.capture_interval {
            if !(c > 0.0) {
                return Err(Error::InvalidConfig(format!("capture_interval must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn capture_interval(&self) -> f64 {
        self.capture_interval.unwrap_or((2.0 * self.scene.l_step).max(self.scene.l_s / 3.0))
    }

    fn planner_config(&self, seed: u64) -> PlannerConfig {
        PlannerConfig { l_step: self.scene.l_step, seed, ..self.planner.clone() }
    }
}

/// Deterministic per-purpose seed derivation (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, step: usize, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add((step as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(stream.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_SAMPLE: u64 = 1;
const STREAM_FIT: u64 = 2;
const STREAM_PLAN: u64 = 3;
const STREAM_RENDER: u64 = 4;
const STREAM_METRICS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureRecord {
    /// Step that took the image; `None` for the start sweep.
    pub step: Option<usize>,
    pub view: Viewpoint<f64>,
    pub valid_pixels: usize,
}

/// Wall-clock timings in seconds. Not reproducible between runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTimings {
    pub t_train: f64,
    pub t_query: f64,
    /// Planner time excluding gain queries.
    pub t_planner: f64,
    /// `t_train + t_query + t_planner`.
    pub t_sp: f64,
    /// View sampling and gain evaluation.
    pub t_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub start: Vec3<f64>,
    pub goal: Viewpoint<f64>,
    pub goal_gain: f64,
    pub goal_raw_gain: f64,
    /// Goals abandoned because no path was found.
    pub failed_goals: usize,
    pub path: ViewPath,
    pub path_length: f64,
    /// Gain queries counted by the planner on the successful attempt.
    pub n_query: usize,
    /// The same calls counted by an independent wrapper.
    pub n_query_hook: u64,
    pub cheap_evals: usize,
    pub expensive_evals: usize,
    pub captures: usize,
    /// Unobserved voxels inside the scene bounds at the start of the step.
    pub unobserved: usize,
    pub bounded_voxels: usize,
    pub samples: GainSampleSet,
    pub timings: StepTimings,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTotals {
    pub path_length: f64,
    pub n_query: u64,
    pub captures: usize,
    pub cheap_evals: usize,
    pub expensive_evals: usize,
    pub t_train: f64,
    pub t_query: f64,
    pub t_planner: f64,
    pub t_sp: f64,
    pub t_s: f64,
    /// Σ (t_s + t_sp).
    pub t_gp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub histogram: OccupancyHistogram,
    pub bounded_unobserved: usize,
    pub bounded_voxels: usize,
}

impl MapSummary {
    pub fn of(map: &VoxelMap, cfg: &SceneConfig) -> Self {
        let (bounded_unobserved, bounded_voxels) = map.unobserved_within(&cfg.bounds);
        Self { histogram: map.histogram(), bounded_unobserved, bounded_voxels }
    }

    pub fn unobserved_fraction(&self) -> f64 {
        self.bounded_unobserved as f64 / self.bounded_voxels.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub scene: String,
    pub variant: Variant,
    pub label: String,
    pub seed: u64,
    pub view_budget: usize,
    pub config: RunConfig,
    pub bootstrap_captures: usize,
    pub steps: Vec<StepReport>,
    pub history: Vec<CaptureRecord>,
    pub totals: RunTotals,
    pub final_map: MapSummary,
    pub metrics: GeometryMetrics,
}

impl RunRecord {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// One row per step with the timing and bookkeeping columns.
    pub fn write_steps_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "step",
            "T_train",
            "T_query",
            "T_planner",
            "T_SP",
            "T_s",
            "N_query",
            "P.L.",
            "goal_gain",
            "captures",
            "unobserved",
            "expensive_evals",
        ])?;
        for s in &self.steps {
            let t = &s.timings;
            out.write_record([
                s.step.to_string(),
                t.t_train.to_string(),
                t.t_query.to_string(),
                t.t_planner.to_string(),
                t.t_sp.to_string(),
                t.t_s.to_string(),
                s.n_query.to_string(),
                s.path_length.to_string(),
                s.goal_gain.to_string(),
                s.captures.to_string(),
                s.unobserved.to_string(),
                s.expensive_evals.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Mutable state carried between steps.
#[derive(Debug, Clone)]
pub struct ReconstructionState {
    pub map: VoxelMap,
    pub field: UncertaintyField,
    pub p_s: Vec3<f64>,
    pub history: Vec<CaptureRecord>,
    pending: Vec<(Viewpoint<f64>, DepthImage)>,
    pub step: usize,
    pub path_length: f64,
    pub n_query: u64,
}

impl ReconstructionState {
    /// Empty map plus a level yaw sweep of `n_yaw` images at the start pose.
    /// The sensor's blind zone around the start is then marked free.
    pub fn bootstrap(scene: &Scene<f64>, cfg: &SceneConfig, seed: u64) -> Result<Self> {
        let mut map = VoxelMap::new(cfg.bounds, cfg.l_res);
        let mut history = Vec::new();
        for (k, (yaw, _)) in direction_candidates(cfg.n_yaw, 1).into_iter().enumerate() {
            let view = Viewpoint::new(cfg.start, yaw, 0.0);
            let img = render_depth(scene, &view, cfg, derive_seed(seed, k, STREAM_RENDER))?;
            map.integrate_depth(&view, &img, cfg);
            history.push(CaptureRecord { step: None, view, valid_pixels: img.valid_count() });
        }
        map.mark_free_sphere(cfg.start, blind_zone_radius(cfg));
        let mut field = UncertaintyField::new(&map);
        field.decay(&map);
        Ok(Self {
            map,
            field,
            p_s: cfg.start,
            history,
            pending: Vec::new(),
            step: 0,
            path_length: 0.0,
            n_query: 0,
        })
    }

    /// Fuses pending captures and refreshes the uncertainty field.
    pub fn integrate_pending(&mut self, cfg: &SceneConfig) {
        for (view, img) in self.pending.drain(..) {
            self.map.integrate_depth(&view, &img, cfg);
        }
        self.field.decay(&self.map);
    }

    pub fn pending_captures(&self) -> usize {
        self.pending.len()
    }
}

/// Exact gain at a position: best direction's gain, on the scale of the
/// step's sample set.
struct ExactOracle<'a> {
    map: &'a VoxelMap,
    field: &'a UncertaintyField,
    cfg: &'a SceneConfig,
    evaluator: &'a GainEvaluator,
    candidates: Vec<(f64, f64)>,
    use_filter: bool,
    samples: &'a GainSampleSet,
    nanos: AtomicU64,
}

impl GainOracle for ExactOracle<'_> {
    fn gain(&self, p: Vec3<f64>) -> f64 {
        let t0 = Instant::now();
        let c = choose_direction(self.map, self.field, self.cfg, self.evaluator, &self.candidates, p, self.use_filter);
        self.nanos.fetch_add(t0.elapsed().as_nanos() as u64, Ordering::Relaxed);
        self.samples.normalize(c.gain)
    }
}

/// Hands out intermediate capture poses along `path`: every `interval`
/// metres of arc length, looking in the chosen direction of the nearest
/// sampled location.
fn intermediate_captures(path: &ViewPath, samples: &GainSampleSet, interval: f64) -> Vec<Viewpoint<f64>> {
    let mut out = Vec::new();
    let mut arc = 0.0;
    let mut next = interval;
    let inner = path.nodes.len().saturating_sub(1);
    for i in 1..inner {
        arc += path.nodes[i - 1].distance(path.nodes[i]);
        if arc + 1e-9 >= next {
            let p = path.nodes[i];
            let nearest = (0..samples.len())
                .min_by(|&a, &b| {
                    samples.positions[a].distance(p).total_cmp(&samples.positions[b].distance(p)).then(a.cmp(&b))
                })
                .expect("non-empty sample set");
            let (yaw, pitch) = samples.directions[nearest];
            out.push(Viewpoint::new(p, yaw, pitch));
            while next <= arc + 1e-9 {
                next += interval;
            }
        }
    }
    out
}

/// Runs one planning step and queues its captures.
pub fn run_step(
    state: &mut ReconstructionState,
    scene: &Scene<f64>,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(StepReport, Option<ServedModel>)> {
    let sc = &cfg.scene;
    let step = state.step;
    let abort = |reason: String| Error::RunAborted { step, reason };
    state.integrate_pending(sc);
    let (unobserved, bounded_voxels) = state.map.unobserved_within(&sc.bounds);

    let t0 = Instant::now();
    let samples = select_views(
        &state.map,
        &state.field,
        state.p_s,
        sc,
        &cfg.evaluator,
        cfg.variant.use_filter,
        derive_seed(seed, step, STREAM_SAMPLE),
    )
    .map_err(|e| abort(e.to_string()))?;
    let t_s = t0.elapsed();

    let model = if cfg.variant.use_approximator {
        let net = NetworkConfig { seed: derive_seed(seed, step, STREAM_FIT), ..cfg.network.clone() };
        Some(ServedModel::fit_samples(&samples, state.p_s, sc.l_s, &net).map_err(|e| abort(e.to_string()))?)
    } else {
        None
    };
    let t_train = model.as_ref().map_or(Duration::ZERO, |m| m.train_time());

    let exact = ExactOracle {
        map: &state.map,
        field: &state.field,
        cfg: sc,
        evaluator: &cfg.evaluator,
        candidates: direction_candidates(sc.n_yaw, sc.n_pitch),
        use_filter: cfg.variant.use_filter,
        samples: &samples,
        nanos: AtomicU64::new(0),
    };
    let oracle: &dyn GainOracle = match &model {
        Some(m) => m,
        None => &exact,
    };
    let pcfg = cfg.planner_config(derive_seed(seed, step, STREAM_PLAN));
    let t_plan = Instant::now();
    let mut planned = None;
    let mut failed_goals = 0;
    for &goal_idx in samples.ranked().iter().take(MAX_GOAL_ATTEMPTS) {
        let hook = CountingOracle::new(oracle);
        match plan(cfg.variant.planner, &state.map, &hook, state.p_s, samples.positions[goal_idx], &pcfg) {
            Ok(path) => {
                planned = Some((goal_idx, path, hook.calls()));
                break;
            }
            Err(Error::NoPath { expansions }) => {
                failed_goals += 1;
                warn!("step {step}: no path to goal {goal_idx} after {expansions} expansions");
            }
            Err(e) => return Err(e),
        }
    }
    let planner_wall = t_plan.elapsed();
    let Some((goal_idx, path, n_query_hook)) = planned else {
        return Err(abort(format!("no path to any of the top {MAX_GOAL_ATTEMPTS} goals")));
    };
    let t_query = match &model {
        Some(m) => m.counters().elapsed(),
        None => Duration::from_nanos(exact.nanos.load(Ordering::Relaxed)),
    };
    let t_planner = planner_wall.saturating_sub(t_query);

    let goal = samples.viewpoint(goal_idx);
    let mut views = intermediate_captures(&path, &samples, cfg.capture_interval());
    views.push(goal);
    let mut captures = 0;
    for (k, view) in views.into_iter().enumerate() {
        let render_seed = derive_seed(seed, 1_000 + step * 1_000 + k, STREAM_RENDER);
        match render_depth(scene, &view, sc, render_seed) {
            Ok(img) => {
                state.history.push(CaptureRecord { step: Some(step), view, valid_pixels: img.valid_count() });
                state.pending.push((view, img));
                captures += 1;
            }
            Err(Error::InsideGeometry { .. }) => warn!("step {step}: capture pose inside geometry, skipped"),
            Err(e) => return Err(e),
        }
    }

    state.p_s = goal.position;
    state.path_length += path.length;
    state.n_query += path.counters.queries as u64;
    state.step += 1;
    let timings = StepTimings {
        t_train: t_train.as_secs_f64(),
        t_query: t_query.as_secs_f64(),
        t_planner: t_planner.as_secs_f64(),
        t_sp: (t_train + t_query + t_planner).as_secs_f64(),
        t_s: t_s.as_secs_f64(),
    };
    debug!("step {step}: goal gain {:.3}, path {:.2} m, {captures} captures", samples.gains[goal_idx], path.length);
    let report = StepReport {
        step,
        start: path.nodes[0],
        goal,
        goal_gain: samples.gains[goal_idx],
        goal_raw_gain: samples.raw_gains[goal_idx],
        failed_goals,
        path_length: path.length,
        n_query: path.counters.queries,
        n_query_hook,
        cheap_evals: samples.cheap_evals,
        expensive_evals: samples.expensive_evals,
        captures,
        unobserved,
        bounded_voxels,
        samples,
        timings,
        path,
    };
    Ok((report, model))
}

/// Result of a complete run.
pub struct RunOutput {
    pub record: RunRecord,
    pub state: ReconstructionState,
}

/// Observer called after each step with the post-step state (captures of
/// the step not yet fused) and the fitted model, if any.
pub type StepHook<'a> = dyn FnMut(&ReconstructionState, &StepReport, Option<&ServedModel>) -> Result<()> + 'a;

pub fn run_experiment(scene: &Scene<f64>, cfg: &RunConfig, seed: u64) -> Result<RunOutput> {
    run_experiment_with(scene, cfg, seed, &mut |_, _, _| Ok(()))
}

/// Runs `view_budget` steps, fuses the last captures and computes the
/// geometry metrics.
pub fn run_experiment_with(
    scene: &Scene<f64>,
    cfg: &RunConfig,
    seed: u64,
    hook: &mut StepHook<'_>,
) -> Result<RunOutput> {
    cfg.validate()?;
    let sc = &cfg.scene;
    let mut state = ReconstructionState::bootstrap(scene, sc, seed)?;
    let bootstrap_captures = state.history.len();
    let mut steps = Vec::with_capacity(sc.view_budget);
    for _ in 0..sc.view_budget {
        let (report, model) = run_step(&mut state, scene, cfg, seed)?;
        hook(&state, &report, model.as_ref())?;
        steps.push(report);
    }
    state.integrate_pending(sc);

    let mut totals = RunTotals::default();
    for s in &steps {
        totals.path_length += s.path_length;
        totals.n_query += s.n_query as u64;
        totals.captures += s.captures;
        totals.cheap_evals += s.cheap_evals;
        totals.expensive_evals += s.expensive_evals;
        totals.t_train += s.timings.t_train;
        totals.t_query += s.timings.t_query;
        totals.t_planner += s.timings.t_planner;
        totals.t_sp += s.timings.t_sp;
        totals.t_s += s.timings.t_s;
        totals.t_gp += s.timings.t_s + s.timings.t_sp;
    }
    let metrics = evaluate_geometry(scene, &state.map, sc, cfg.metric_samples, derive_seed(seed, 0, STREAM_METRICS))?;
    info!(
        "{} {} seed {seed}: P.L. {:.2} m, C.R. {:.3}, acc {:.4} m",
        sc.name,
        cfg.variant.label(),
        totals.path_length,
        metrics.completion_ratio,
        metrics.accuracy
    );
    let record = RunRecord {
        schema_version: RUN_SCHEMA_VERSION,
        scene: sc.name.clone(),
        variant: cfg.variant,
        label: cfg.variant.label(),
        seed,
        view_budget: sc.view_budget,
        config: cfg.clone(),
        bootstrap_captures,
        steps,
        history: state.history.clone(),
        totals,
        final_map: MapSummary::of(&state.map, sc),
        metrics,
    };
    Ok(RunOutput { record, state })
}

/// Accuracy, completion and completion ratio at `2·l_res`.
pub fn evaluate_geometry(
    scene: &Scene<f64>,
    map: &VoxelMap,
    cfg: &SceneConfig,
    samples: usize,
    seed: u64,
) -> Result<GeometryMetrics> {
    let gt = sample_gt_surface(scene, &cfg.bounds, cfg.l_res, samples, seed)?;
    let rec = sample_reconstructed_surface(map, &cfg.bounds, samples, seed ^ 1)?;
    geometry_metrics(&rec, &gt, THRESHOLD_VOXELS * cfg.l_res)
}
