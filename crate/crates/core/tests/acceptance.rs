//! Acceptance criteria 1–11. Prints one PASS/FAIL line per criterion and
//! exits non-zero when a criterion fails that is not listed in
//! `KNOWN_UNATTAINABLE`.

use std::collections::{BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nbv_core::approximator::NetworkConfig;
use nbv_core::bench::{run_bench, BenchConfig};
use nbv_core::gain_field::{information_gain, DepthBand, GainEvaluator, UncertaintyField};
use nbv_core::geom::{Aabb, Vec3, Viewpoint};
use nbv_core::pipeline::{run_experiment, run_experiment_with, RunConfig, RunRecord, Variant};
use nbv_core::planner::{plan_astar, plan_rrt, PlannerConfig};
use nbv_core::sampler::FILTER_KEEP;
use nbv_core::scene::{builtin, BUILTIN_SCENES};
use nbv_core::voxel_map::{OccupancyLabel, TsdfVoxel, VoxelMap};
use nbv_core::{CheckedModel, Error, ServedModel};

/// Criteria whose literal wording cannot hold together with the gain
/// formula; they still print FAIL.
const KNOWN_UNATTAINABLE: &[u32] = &[2];

const FREE: TsdfVoxel = TsdfVoxel { value: 0.3, weight: 1.0, count: 1 };
const SOLID: TsdfVoxel = TsdfVoxel { value: -0.9, weight: 1.0, count: 1 };

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

// 1 ---------------------------------------------------------------------

fn brute_force_uncertainty(
    ev: &GainEvaluator,
    field: &UncertaintyField,
    map: &VoxelMap,
    view: &Viewpoint<f64>,
    cfg: &nbv_core::scene::SceneConfig,
) -> f64 {
    let lookup = |p: Vec3<f64>| -> Option<(bool, f64)> {
        if !cfg.bounds.contains(p) {
            return None;
        }
        map.cell_of(p).map(|c| (map.label(c) != OccupancyLabel::Empty, field.at(map, p)))
    };
    let m = (2.0 * cfg.d_n / map.resolution()).ceil().max(1.0) as usize;
    let n = ev.samples;
    let t_at = |i: usize| cfg.d_n + (i as f64 + 0.5) * (cfg.d_f - cfg.d_n) / n as f64;
    let mut total = 0.0;
    for d in ev.ray_directions(view, &cfg.camera) {
        let blind = (0..m).any(|k| {
            let t = (k as f64 + 0.5) * cfg.d_n / m as f64;
            lookup(view.position + d * t).is_some_and(|(b, _)| b)
        });
        if blind {
            continue;
        }
        let alpha = |i: usize| lookup(view.position + d * t_at(i)).map_or(0.0, |(b, _)| if b { 1.0 } else { 0.0 });
        for i in 0..n {
            let mut transmittance = 1.0;
            for j in 0..i {
                transmittance *= 1.0 - alpha(j);
            }
            let sigma2 = lookup(view.position + d * t_at(i)).map_or(0.0, |(_, s)| s);
            total += transmittance * alpha(i) * sigma2;
        }
    }
    total / ev.rays as f64
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let (_, base) = builtin("cabin").unwrap();
    let mut worst: f64 = 0.0;
    let mut nonzero = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map = VoxelMap::with_geometry(Vec3::zero(), [8, 8, 8], 0.5);
        for i in 0..map.len() {
            let u: f64 = rng.random();
            let v = if u < 0.6 { FREE } else if u < 0.8 { SOLID } else { TsdfVoxel::default() };
            map.set_voxel(map.cell_of_linear(i), v);
        }
        let mut field = UncertaintyField::new(&map);
        for i in 0..map.len() {
            field.set_linear(i, rng.random());
        }
        let mut cfg = base.clone();
        let lo = Vec3::new(rng.random_range(0.0..0.8), rng.random_range(0.0..0.8), rng.random_range(0.0..0.8));
        cfg.bounds = Aabb::new(lo, Vec3::splat(rng.random_range(3.2..4.0)));
        cfg.l_res = 0.5;
        cfg.d_n = rng.random_range(0.05..0.6);
        cfg.d_f = cfg.d_n + rng.random_range(1.0..4.0);
        let p = Vec3::new(rng.random_range(1.0..3.0), rng.random_range(1.0..3.0), rng.random_range(1.0..3.0));
        let view = Viewpoint::new(p, rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(-0.8..0.8));
        let ev = GainEvaluator::new(rng.random_range(1..=4), rng.random_range(1..=8)).unwrap();
        let fast = ev.viewpoint_uncertainty(&field, &map, &view, &cfg);
        let slow = brute_force_uncertainty(&ev, &field, &map, &view, &cfg);
        worst = worst.max((fast - slow).abs());
        nonzero += usize::from(slow > 0.0);
    }
    let elapsed = t0.elapsed();
    outcome(
        worst <= 1e-12 && nonzero >= 10 && elapsed < Duration::from_secs(1),
        format!("max |Δ| = {worst:.1e} over 50 configs ({nonzero} non-zero), {:.3} s", secs(elapsed)),
    )
}

// 2 ---------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let (_, cfg) = builtin("cabin").unwrap();
    let band = DepthBand::from_config(&cfg);
    let sigma2 = 0.6;
    let alpha = 2.0 / (cfg.d_max - cfg.d_min);
    let d_u = 0.5 * (cfg.d_min + cfg.d_max);
    let ratio = |d: f64| information_gain(sigma2, Some(d), &band) / sigma2;
    let direct = |d: f64| if cfg.d_min < d && d < cfg.d_max { 1.0 } else { (-alpha * (d - d_u).abs()).exp() };
    let mut sweep_err: f64 = 0.0;
    for k in 0..100 {
        let d = 8.0 * k as f64 / 99.0;
        sweep_err = sweep_err.max((ratio(d) - direct(d)).abs());
    }
    let eps = 1e-12;
    let jump = |edge: f64| (ratio(edge - eps) - ratio(edge + eps)).abs();
    let (j_min, j_max) = (jump(cfg.d_min), jump(cfg.d_max));
    let sweep_ok = sweep_err <= 1e-12;
    let continuous = j_min <= 1e-12 && j_max <= 1e-12;
    outcome(
        sweep_ok && continuous,
        format!(
            "sweep max |Δ| = {sweep_err:.1e} ({}); edge jumps {j_min:.4} at d_min, {j_max:.4} at d_max (1 − e^-1 = {:.4})",
            if sweep_ok { "ok" } else { "bad" },
            1.0 - (-1f64).exp()
        ),
    )
}

// 3 ---------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let (scene, cfg) = builtin("cabin").unwrap();
    let bench = BenchConfig { rays: 100, samples: 64, views: 100, repetitions: 10, seed: 0 };
    let r = run_bench(&scene, &cfg, &bench).unwrap();
    let elapsed = t0.elapsed();
    let exact = r.repetitions.iter().map(|x| x.exact_median_s).sum::<f64>() / r.repetitions.len() as f64;
    let query = r.repetitions.iter().map(|x| x.query_median_s).sum::<f64>() / r.repetitions.len() as f64;
    outcome(
        r.median_ratio >= 50.0 && elapsed < Duration::from_secs(120),
        format!(
            "median ratio {:.1} (exact {:.1} µs, query {:.2} µs, spread {:.2}), {:.1} s",
            r.median_ratio,
            exact * 1e6,
            query * 1e6,
            r.ratio_spread,
            secs(elapsed)
        ),
    )
}

// 4 ---------------------------------------------------------------------

fn smooth_field(p: Vec3<f64>) -> f64 {
    let bump = |c: Vec3<f64>, w: f64, s: f64| w * (-(p.distance(c).powi(2)) / (2.0 * s * s)).exp();
    bump(Vec3::new(0.8, -0.5, 0.3), 1.0, 0.9) + bump(Vec3::new(-1.2, 1.0, -0.4), 0.6, 0.7) + 0.1 * p.z
}

fn ball_points(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<Vec3<f64>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r));
        if p.norm() <= r {
            out.push(p);
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let l_s = 3.0;
    let mut worst_rmse: f64 = 0.0;
    let mut hits = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let train = ball_points(&mut rng, 150, l_s);
        let test = ball_points(&mut rng, 100, l_s);
        let raw: Vec<f64> = train.iter().map(|&p| smooth_field(p)).collect();
        let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        let norm = |x: f64| (x - lo) / (hi - lo);
        let targets: Vec<f64> = raw.iter().map(|&x| norm(x)).collect();
        let cfg = NetworkConfig { seed, ..NetworkConfig::default() };
        let model = ServedModel::fit(&train, &targets, Vec3::zero(), l_s, &cfg).unwrap();
        let se: f64 = test.iter().map(|&p| (model.query(p) - norm(smooth_field(p))).powi(2)).sum();
        worst_rmse = worst_rmse.max((se / test.len() as f64).sqrt());
        let best = (0..train.len()).max_by(|&a, &b| model.query(train[a]).total_cmp(&model.query(train[b]))).unwrap();
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.sort_by(|&a, &b| targets[b].total_cmp(&targets[a]));
        hits += usize::from(order[..3].contains(&best));
    }
    let elapsed = t0.elapsed();
    outcome(
        worst_rmse <= 0.1 && hits >= 8 && elapsed < Duration::from_secs(60),
        format!("worst held-out RMSE {worst_rmse:.4}, argmax in top-3 for {hits}/10 seeds, {:.1} s", secs(elapsed)),
    )
}

// 5 ---------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let cfg = NetworkConfig { seed: 5, ..NetworkConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let train = ball_points(&mut rng, 120, 2.0);
    let targets: Vec<f64> = train.iter().map(|&p| (0.5 + 0.4 * (p.x - 0.5 * p.y).sin()).clamp(0.0, 1.0)).collect();
    let fresh = CheckedModel::new(&cfg, Vec3::zero(), 2.0).unwrap();
    let fitted = CheckedModel::fit(&train, &targets, Vec3::zero(), 2.0, &cfg).unwrap();
    let mut before: f64 = 0.0;
    let mut after: f64 = 0.0;
    for k in 0..5 {
        let p = train[k * 7];
        before = before.max(fresh.gradient_check(p, targets[k * 7], 60, k as u64));
        after = after.max(fitted.gradient_check(p, targets[k * 7], 60, 100 + k as u64));
    }
    outcome(
        before <= 1e-4 && after <= 1e-4,
        format!("max relative error {before:.1e} before, {after:.1e} after fitting (5 points × 60 parameters)"),
    )
}

// 6 ---------------------------------------------------------------------

fn grid_map(dims: [usize; 3], solid: impl Fn([usize; 3]) -> bool) -> VoxelMap {
    let mut m = VoxelMap::with_geometry(Vec3::zero(), dims, 1.0);
    for i in 0..m.len() {
        let c = m.cell_of_linear(i);
        m.set_voxel(c, if solid(c) { SOLID } else { FREE });
    }
    m
}

/// Shortest lattice path over voxel centres with 26-connectivity.
fn dijkstra(map: &VoxelMap, start: [usize; 3], goal: [usize; 3]) -> Option<f64> {
    let [nx, ny, nz] = map.dims();
    let mut dist: HashMap<[usize; 3], f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(start, 0.0);
    heap.push((Reverse(OrdF(0.0)), start));
    while let Some((Reverse(OrdF(d)), c)) = heap.pop() {
        if c == goal {
            return Some(d);
        }
        if d > dist[&c] {
            continue;
        }
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if (dx, dy, dz) == (0, 0, 0) {
                        continue;
                    }
                    let n = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                    if n.iter().zip([nx, ny, nz]).any(|(&v, m)| v < 0 || v >= m as i64) {
                        continue;
                    }
                    let n = [n[0] as usize, n[1] as usize, n[2] as usize];
                    if !map.is_path_free(map.center(c), map.center(n)) {
                        continue;
                    }
                    let nd = d + ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    if dist.get(&n).is_none_or(|&old| nd < old) {
                        dist.insert(n, nd);
                        heap.push((Reverse(OrdF(nd)), n));
                    }
                }
            }
        }
    }
    None
}

#[derive(PartialEq, PartialOrd)]
struct OrdF(f64);
impl Eq for OrdF {}
impl Ord for OrdF {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

fn criterion_6() -> Outcome {
    let zero = |_: Vec3<f64>| 0.0;
    let cfg = PlannerConfig { lambda_gain: 0.0, lambda_rank: 1.0, l_step: 1.0, ..PlannerConfig::default() };
    let mut worst: f64 = 0.0;
    let mut agree = 0;
    let mut reachable = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let solid: Vec<bool> = (0..20 * 20 * 5).map(|_| rng.random::<f64>() < 0.25).collect();
        let map = grid_map([20, 20, 5], |c| solid[(c[2] * 20 + c[1]) * 20 + c[0]]);
        let free_cell = |rng: &mut ChaCha8Rng| loop {
            let c = [rng.random_range(0..20), rng.random_range(0..20), rng.random_range(0..5)];
            if map.label(c) == OccupancyLabel::Empty {
                return c;
            }
        };
        let (a, b) = (free_cell(&mut rng), free_cell(&mut rng));
        let oracle = dijkstra(&map, a, b);
        let got = plan_astar(&map, &zero, map.center(a), map.center(b), &cfg);
        match (oracle, got) {
            (Some(d), Ok(path)) => {
                reachable += 1;
                let err = (path.length - d).abs();
                worst = worst.max(err);
                agree += usize::from(err <= 1e-9);
            }
            (None, Err(Error::NoPath { .. })) => agree += 1,
            _ => {}
        }
    }
    outcome(agree == 10, format!("{agree}/10 grids agree ({reachable} reachable), max |Δ length| = {worst:.1e}"))
}

// 7 ---------------------------------------------------------------------

/// Two equal corridors around a central block, forking one step from the
/// start. The rich corridor's gain covers its whole side of the divider.
/// Returns whether A* and RRT each took the rich corridor.
fn corridor_choice(seed: u64) -> (bool, bool, bool) {
    let map = grid_map([13, 9, 3], |c| {
        c[2] != 1 || c[1] == 0 || c[1] == 8 || ((3..=9).contains(&c[0]) && (3..=5).contains(&c[1]))
    });
    let upper_is_rich = seed % 2 == 0;
    let oracle = move |p: Vec3<f64>| {
        let upper = p.y > 4.5;
        if upper == upper_is_rich && (p.y - 4.5).abs() > 0.5 { 0.9 } else { 0.0 }
    };
    let (a, b) = (Vec3::new(1.5, 4.5, 1.5), Vec3::new(11.5, 4.5, 1.5));
    let cfg = PlannerConfig { lambda_gain: 0.5, l_step: 1.0, seed, ..PlannerConfig::default() };
    let side = |nodes: &[Vec3<f64>]| nodes.iter().filter(|p| (4.0..=9.0).contains(&p.x)).all(|p| p.y > 4.5);
    let astar = plan_astar(&map, &oracle, a, b, &cfg).map(|p| side(&p.nodes) == upper_is_rich).unwrap_or(false);
    let rrt = plan_rrt(&map, &oracle, a, b, &cfg).map(|p| side(&p.nodes) == upper_is_rich).unwrap_or(false);
    (astar, rrt, upper_is_rich)
}

fn criterion_7() -> Outcome {
    let (mut astar, mut rrt) = (0, 0);
    for seed in 0..10 {
        let (a, r, _) = corridor_choice(seed);
        astar += usize::from(a);
        rrt += usize::from(r);
    }
    outcome(astar == 10 && rrt >= 6, format!("high-gain corridor: A* {astar}/10, RRT {rrt}/10"))
}

// 8 ---------------------------------------------------------------------

struct Runs {
    records: Vec<RunRecord>,
}

fn run(name: &str, variant: Variant, seed: u64) -> RunRecord {
    let (scene, sc) = builtin(name).unwrap();
    run_experiment(&scene, &RunConfig::new(sc, variant), seed).unwrap().record
}

fn criterion_8() -> (Outcome, Runs) {
    let t0 = Instant::now();
    let mut records = Vec::new();
    let mut wins = 0;
    let mut lines = Vec::new();
    for name in BUILTIN_SCENES {
        let mut pl = Vec::new();
        for seed in 0..4 {
            let a = run(name, Variant::V5, seed);
            let r = run(name, Variant::V4, seed);
            wins += usize::from(a.totals.path_length <= r.totals.path_length);
            pl.push((a.totals.path_length, r.totals.path_length));
            records.push(a);
            records.push(r);
        }
        let med = |f: fn(&(f64, f64)) -> f64| nbv_core::bench::median(&pl.iter().map(f).collect::<Vec<_>>());
        lines.push(format!("{name} {:.1}/{:.1}", med(|p| p.0), med(|p| p.1)));
    }
    let elapsed = t0.elapsed();
    let o = outcome(
        wins >= 16 && elapsed < Duration::from_secs(15 * 60),
        format!("A* ≤ RRT in {wins}/20 pairings; median P.L. A*/RRT: {}; {:.0} s", lines.join(", "), secs(elapsed)),
    );
    (o, Runs { records })
}

// 9 ---------------------------------------------------------------------

fn criterion_9(runs: &Runs) -> Outcome {
    let unfiltered = runs
        .records
        .iter()
        .find(|r| r.scene == "room" && r.variant == Variant::V5 && r.seed == 0)
        .cloned()
        .unwrap_or_else(|| run("room", Variant::V5, 0));
    let filtered = run("room", Variant::V6, 0);
    let n_loc = filtered.config.scene.n_loc;
    let exact = filtered.steps.iter().all(|s| s.expensive_evals == FILTER_KEEP * n_loc);
    let per_step_v5 = unfiltered.totals.expensive_evals as f64 / unfiltered.steps.len() as f64;
    let per_step_v6 = filtered.totals.expensive_evals as f64 / filtered.steps.len() as f64;
    let d_cr = (filtered.metrics.completion_ratio - unfiltered.metrics.completion_ratio).abs();
    outcome(
        exact && per_step_v6 < per_step_v5 && d_cr <= 0.05,
        format!(
            "expensive evals/step {per_step_v6:.0} (3·N_loc = {}) vs {per_step_v5:.0} unfiltered; C.R. {:.3} vs {:.3} (|Δ| {d_cr:.3})",
            FILTER_KEEP * n_loc,
            filtered.metrics.completion_ratio,
            unfiltered.metrics.completion_ratio
        ),
    )
}

// 10, 11 ----------------------------------------------------------------

struct Bookkeeping {
    partition_ok: bool,
    checked_steps: usize,
}

fn criterion_10() -> (Outcome, RunRecord, Bookkeeping) {
    let t0 = Instant::now();
    let (scene, sc) = builtin("cabin").unwrap();
    let cfg = RunConfig::new(sc, Variant::V6);
    let mut book = Bookkeeping { partition_ok: true, checked_steps: 0 };
    let out = run_experiment_with(&scene, &cfg, 0, &mut |state, _, _| {
        let h = state.map.histogram();
        let [nx, ny, nz] = state.map.dims();
        book.partition_ok &= h.occupied + h.empty + h.unobserved == nx * ny * nz && h.total == nx * ny * nz;
        book.checked_steps += 1;
        Ok(())
    })
    .unwrap();
    let elapsed = t0.elapsed();
    let r = out.record;
    let frac = r.final_map.unobserved_fraction();
    let o = outcome(
        r.steps.len() == 28 && r.metrics.completion_ratio >= 0.7 && frac <= 0.1 && elapsed < Duration::from_secs(300),
        format!(
            "{} steps, C.R. {:.3} at {:.2} m, |V_u| {:.1}% of bounded voxels, P.L. {:.1} m, {:.1} s",
            r.steps.len(),
            r.metrics.completion_ratio,
            r.metrics.threshold,
            100.0 * frac,
            r.totals.path_length,
            secs(elapsed)
        ),
    );
    (o, r, book)
}

fn bookkeeping_violations(r: &RunRecord) -> Vec<String> {
    let mut v = Vec::new();
    let tag = format!("{} {} seed {}", r.scene, r.label, r.seed);
    if r.steps.len() != r.view_budget || r.view_budget != r.config.scene.view_budget {
        v.push(format!("{tag}: {} steps for budget {}", r.steps.len(), r.view_budget));
    }
    let sum: f64 = r.steps.iter().map(|s| s.path_length).sum();
    if (sum - r.totals.path_length).abs() > 1e-9 {
        v.push(format!("{tag}: P.L. {} ≠ Σ steps {sum}", r.totals.path_length));
    }
    for s in &r.steps {
        if (s.path.recomputed_length() - s.path_length).abs() > 1e-9 {
            v.push(format!("{tag}: step {} length mismatch", s.step));
        }
        if s.n_query as u64 != s.n_query_hook {
            v.push(format!("{tag}: step {} N_query {} vs hook {}", s.step, s.n_query, s.n_query_hook));
        }
    }
    if r.steps.iter().map(|s| s.n_query as u64).sum::<u64>() != r.totals.n_query {
        v.push(format!("{tag}: N_query total mismatch"));
    }
    for w in r.steps.windows(2) {
        if w[1].start != w[0].goal.position {
            v.push(format!("{tag}: step {} does not start at the previous goal", w[1].step));
        }
        if w[1].unobserved > w[0].unobserved {
            v.push(format!("{tag}: |V_u| grew at step {}", w[1].step));
        }
    }
    let h = r.final_map.histogram;
    if h.occupied + h.empty + h.unobserved != h.total {
        v.push(format!("{tag}: final label partition broken"));
    }
    v
}

fn criterion_11(cabin: &RunRecord, book: &Bookkeeping, runs: &Runs) -> Outcome {
    let mut violations = bookkeeping_violations(cabin);
    for r in &runs.records {
        violations.extend(bookkeeping_violations(r));
    }
    if !book.partition_ok || book.checked_steps != cabin.steps.len() {
        violations.push("per-step label partition".into());
    }
    let n = runs.records.len() + 1;
    outcome(
        violations.is_empty(),
        if violations.is_empty() {
            format!("{n} runs: budget, P.L. additivity, N_query hook, start = previous goal, |V_u| monotone, partition")
        } else {
            violations.join("; ")
        },
    )
}

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |n: u32| only.is_empty() || only.contains(&n);
    let t0 = Instant::now();
    let quick: [(u32, &str, fn() -> Outcome); 7] = [
        (1, "gain integral matches brute force", criterion_1),
        (2, "depth-band branches", criterion_2),
        (3, "approximator speedup", criterion_3),
        (4, "approximator fidelity", criterion_4),
        (5, "gradient correctness", criterion_5),
        (6, "A* shortest-path degeneracy", criterion_6),
        (7, "gain attraction", criterion_7),
    ];
    let mut results: Vec<(u32, &str, Outcome)> =
        quick.into_iter().filter(|q| want(q.0)).map(|(n, name, f)| (n, name, f())).collect();
    let runs = if want(8) {
        let (o8, runs) = criterion_8();
        results.push((8, "A* vs RRT path length", o8));
        runs
    } else {
        Runs { records: Vec::new() }
    };
    if want(9) {
        results.push((9, "filter efficiency", criterion_9(&runs)));
    }
    if want(10) || want(11) {
        let (o10, cabin, book) = criterion_10();
        if want(10) {
            results.push((10, "end-to-end reconstruction", o10));
        }
        if want(11) {
            results.push((11, "bookkeeping invariants", criterion_11(&cabin, &book, &runs)));
        }
    }

    let mut unexpected = 0;
    for (n, name, o) in &results {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_UNATTAINABLE.contains(n) { " [known unattainable]" } else { "" };
        println!("criterion {n:>2} {status} {name}: {}{note}", o.detail);
        if !o.pass && !KNOWN_UNATTAINABLE.contains(n) {
            unexpected += 1;
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("{passed}/{} criteria passed in {:.0} s", results.len(), secs(t0.elapsed()));
    if unexpected > 0 {
        std::process::exit(1);
    }
}
