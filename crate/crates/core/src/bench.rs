//! Paired timing of exact view gains against g_φ queries.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::{GainApproximator, NetworkConfig};
use crate::error::{Error, Result};
use crate::gain_field::GainEvaluator;
use crate::geom::Viewpoint;
use crate::pipeline::{derive_seed, ReconstructionState};
use crate::sampler::{sample_locations, select_views};
use crate::scene::{Scene, SceneConfig};

pub const MIN_REPETITIONS: usize = 10;
pub const DEFAULT_VIEWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub rays: usize,
    pub samples: usize,
    /// Viewpoints timed per repetition.
    pub views: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < MIN_REPETITIONS {
            return Err(Error::InvalidArgument(format!(
                "at least {MIN_REPETITIONS} repetitions required, got {}",
                self.repetitions
            )));
        }
        if self.views == 0 {
            return Err(Error::InvalidArgument("views must be positive".into()));
        }
        GainEvaluator::new(self.rays, self.samples).map(|_| ())
    }
}

/// One repetition: medians over the viewpoint set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRepetition {
    pub exact_median_s: f64,
    pub query_median_s: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scene: String,
    pub config: BenchConfig,
    pub param_count: usize,
    pub repetitions: Vec<BenchRepetition>,
    /// Median of the per-repetition ratios.
    pub median_ratio: f64,
    /// (max − min) / median of the per-repetition ratios.
    pub ratio_spread: f64,
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty set");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Builds the map seen after the start sweep, fits the default g_φ to one
/// step's samples, then times `evaluate` and `predict` on the same random
/// viewpoints. Each repetition runs the exact pass, then the query pass, as
/// the planner issues its queries in bursts.
pub fn run_bench(scene: &Scene<f64>, cfg: &SceneConfig, bench: &BenchConfig) -> Result<BenchReport> {
    bench.validate()?;
    let evaluator = GainEvaluator::new(bench.rays, bench.samples)?;
    let state = ReconstructionState::bootstrap(scene, cfg, bench.seed)?;
    let samples = select_views(&state.map, &state.field, state.p_s, cfg, &evaluator, true, derive_seed(bench.seed, 0, 1))?;
    let net = NetworkConfig { seed: bench.seed, ..NetworkConfig::default() };
    let model = GainApproximator::<f32>::fit_samples(&samples, state.p_s, cfg.l_s, &net)?;

    let positions = sample_locations(&state.map, cfg, state.p_s, cfg.l_s, bench.views, derive_seed(bench.seed, 0, 9))?;
    let mut rng = ChaCha8Rng::seed_from_u64(bench.seed);
    let views: Vec<Viewpoint<f64>> = positions
        .iter()
        .map(|&p| {
            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
            let pitch = rng.random_range(-0.5..0.5);
            Viewpoint::new(p, yaw, pitch)
        })
        .collect();

    let mut reps = Vec::with_capacity(bench.repetitions);
    for _ in 0..bench.repetitions {
        let mut exact = Vec::with_capacity(views.len());
        let mut query = Vec::with_capacity(views.len());
        for v in &views {
            let t0 = Instant::now();
            black_box(evaluator.evaluate(&state.field, &state.map, black_box(v), cfg));
            exact.push(t0.elapsed().as_secs_f64());
        }
        for v in &views {
            let t0 = Instant::now();
            black_box(model.predict(black_box(v.position)));
            query.push(t0.elapsed().as_secs_f64());
        }
        let (e, q) = (median(&exact), median(&query));
        reps.push(BenchRepetition { exact_median_s: e, query_median_s: q, ratio: e / q.max(1e-12) });
    }
    let ratios: Vec<f64> = reps.iter().map(|r| r.ratio).collect();
    let median_ratio = median(&ratios);
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    Ok(BenchReport {
        scene: cfg.name.clone(),
        config: *bench,
        param_count: model.param_count(),
        repetitions: reps,
        median_ratio,
        ratio_spread: (hi - lo) / median_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::builtin;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn too_few_repetitions() {
        let (scene, cfg) = builtin("cabin").unwrap();
        let b = BenchConfig { rays: 4, samples: 4, views: 4, repetitions: 3, seed: 0 };
        assert!(matches!(run_bench(&scene, &cfg, &b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degenerate_workload_reports() {
        let (scene, cfg) = builtin("cabin").unwrap();
        let b = BenchConfig { rays: 1, samples: 1, views: 8, repetitions: 10, seed: 0 };
        let r = run_bench(&scene, &cfg, &b).unwrap();
        assert_eq!(r.repetitions.len(), 10);
        assert!(r.median_ratio.is_finite() && r.median_ratio > 0.0);
    }
}
