//! Small fully connected network approximating the local gain field.
//!
//! The network maps a position, normalised by the sampling centre and
//! radius, to a gain in `(0, 1)`. Hidden layers use ReLU, the output a
//! sigmoid. Training minimises the squared error with Adam on shuffled
//! mini-batches.

use std::any::Any;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::num::{dot, Real};
use crate::sampler::GainSampleSet;
use crate::simd::forward_f32;

/// Hidden layer counts supported by [`NetworkConfig`].
pub const LAYER_CHOICES: [usize; 4] = [4, 6, 8, 10];
/// Minimum training set size.
pub const MIN_SAMPLES: usize = 8;
/// Normalised inputs are clamped to this box.
pub const INPUT_CLAMP: f64 = 2.0;
pub const MODEL_SCHEMA_VERSION: u32 = 1;
/// Widest supported layer.
pub const MAX_WIDTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop when the loss has improved by less than `min_improvement`
    /// over this many epochs.
    pub patience: usize,
    pub min_improvement: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 6,
            width: 64,
            learning_rate: 2e-3,
            epochs: 500,
            batch_size: 32,
            patience: 50,
            min_improvement: 1e-6,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !LAYER_CHOICES.contains(&self.hidden_layers) {
            return Err(Error::InvalidConfig(format!(
                "hidden_layers must be one of {LAYER_CHOICES:?}, got {}",
                self.hidden_layers
            )));
        }
        if !(8..=MAX_WIDTH).contains(&self.width) {
            return Err(Error::InvalidConfig(format!(
                "width must be in [8, {MAX_WIDTH}], got {}",
                self.width
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Dense layer. Weights are stored input-major: `weights[i * outputs + o]`
/// connects input `i` to output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Layer<T> {
    fn he(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| T::lit(std * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![T::zero(); outputs],
        }
    }

    /// Outgoing weights of input `i`.
    fn row(&self, i: usize) -> &[T] {
        &self.weights[i * self.outputs..(i + 1) * self.outputs]
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn matvec(&self, x: &[T], out: &mut [T]) {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU feature was detected at runtime.
            return unsafe { self.matvec_avx2(x, out) };
        }
        self.matvec_generic(x, out)
    }

    /// Same arithmetic in the same order, compiled with wider vectors.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    fn matvec_avx2(&self, x: &[T], out: &mut [T]) {
        self.matvec_generic(x, out)
    }

    /// `out = Wᵀx + b`, skipping zero inputs and folding four input rows per
    /// pass over `out`.
    #[inline(always)]
    fn matvec_generic(&self, x: &[T], out: &mut [T]) {
        let n = self.outputs;
        let out = &mut out[..n];
        out.copy_from_slice(&self.bias);
        let mut active = [0u16; MAX_WIDTH];
        let mut k = 0;
        for (i, &xi) in x.iter().enumerate() {
            if xi != T::zero() {
                active[k] = i as u16;
                k += 1;
            }
        }
        let mut quads = active[..k].chunks_exact(4);
        for q in &mut quads {
            let q = [q[0], q[1], q[2], q[3]].map(usize::from);
            let (x0, x1, x2, x3) = (x[q[0]], x[q[1]], x[q[2]], x[q[3]]);
            let (r0, r1, r2, r3) =
                (&self.row(q[0])[..n], &self.row(q[1])[..n], &self.row(q[2])[..n], &self.row(q[3])[..n]);
            for o in 0..n {
                out[o] = out[o] + (x0 * r0[o] + x1 * r1[o]) + (x2 * r2[o] + x3 * r3[o]);
            }
        }
        for &i in quads.remainder() {
            let i = usize::from(i);
            let xi = x[i];
            for (y, &w) in out.iter_mut().zip(self.row(i)) {
                *y = *y + xi * w;
            }
        }
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[inline]
fn relu_inplace<T: Real>(v: &mut [T]) {
    for x in v {
        *x = x.max(T::zero());
    }
}

/// Query instrumentation shared by concurrent readers.
#[derive(Debug, Default)]
pub struct QueryCounters {
    queries: AtomicU64,
    matvecs: AtomicU64,
    nanos: AtomicU64,
}

impl QueryCounters {
    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn matvecs(&self) -> u64 {
        self.matvecs.load(Ordering::Relaxed)
    }

    pub fn elapsed(&self) -> Duration {
        Duration::from_nanos(self.nanos.load(Ordering::Relaxed))
    }

    pub fn reset(&self) {
        self.queries.store(0, Ordering::Relaxed);
        self.matvecs.store(0, Ordering::Relaxed);
        self.nanos.store(0, Ordering::Relaxed);
    }
}

impl Clone for QueryCounters {
    fn clone(&self) -> Self {
        let c = Self::default();
        c.queries.store(self.queries(), Ordering::Relaxed);
        c.matvecs.store(self.matvecs(), Ordering::Relaxed);
        c.nanos
            .store(self.nanos.load(Ordering::Relaxed), Ordering::Relaxed);
        c
    }
}

/// Fitted gain model.
#[derive(Debug, Clone)]
pub struct GainApproximator<T> {
    layers: Vec<Layer<T>>,
    center: Vec3<f64>,
    scale: f64,
    initial_loss: Option<f64>,
    loss_history: Vec<f64>,
    train_time: Duration,
    counters: QueryCounters,
}

/// Per-layer parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    fn zeros(layers: &[Layer<T>]) -> Self {
        Self {
            weights: layers
                .iter()
                .map(|l| vec![T::zero(); l.weights.len()])
                .collect(),
            bias: layers
                .iter()
                .map(|l| vec![T::zero(); l.bias.len()])
                .collect(),
        }
    }

    fn clear(&mut self) {
        self.weights
            .iter_mut()
            .chain(self.bias.iter_mut())
            .for_each(|g| g.fill(T::zero()));
    }
}

/// Scratch buffers for one forward/backward pass.
struct Workspace<T> {
    acts: Vec<Vec<T>>,
    delta: Vec<T>,
    next_delta: Vec<T>,
}

impl<T: Real> GainApproximator<T> {
    /// He-initialised network for inputs normalised by `center` and `scale`.
    pub fn new(cfg: &NetworkConfig, center: Vec3<f64>, scale: f64) -> Result<Self> {
        cfg.validate()?;
        if !(scale > 0.0 && scale.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bad input normalisation: center {center:?}, scale {scale}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut dims = vec![3];
        dims.extend(std::iter::repeat_n(cfg.width, cfg.hidden_layers));
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| Layer::he(w[0], w[1], &mut rng))
            .collect();
        Ok(Self {
            layers,
            center,
            scale,
            initial_loss: None,
            loss_history: Vec::new(),
            train_time: Duration::ZERO,
            counters: QueryCounters::default(),
        })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Number of weight matrices, which is also the matrix–vector products
    /// per query.
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn center(&self) -> Vec3<f64> {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Mean squared error before the first epoch, if trained.
    pub fn initial_loss(&self) -> Option<f64> {
        self.initial_loss
    }

    /// Mean squared error after each completed epoch.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn train_time(&self) -> Duration {
        self.train_time
    }

    pub fn counters(&self) -> &QueryCounters {
        &self.counters
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    /// Normalised, clamped network input.
    pub fn normalize(&self, p: Vec3<f64>) -> [T; 3] {
        let q = (p - self.center) / self.scale;
        q.to_array()
            .map(|x| T::lit(x.clamp(-INPUT_CLAMP, INPUT_CLAMP)))
    }

    fn workspace(&self) -> Workspace<T> {
        let mut acts = vec![vec![T::zero(); 3]];
        acts.extend(self.layers.iter().map(|l| vec![T::zero(); l.outputs]));
        let widest = self
            .layers
            .iter()
            .map(|l| l.inputs.max(l.outputs))
            .max()
            .unwrap_or(1);
        Workspace {
            acts,
            delta: vec![T::zero(); widest],
            next_delta: vec![T::zero(); widest],
        }
    }

    fn forward_into(&self, x: [T; 3], ws: &mut Workspace<T>) -> T {
        ws.acts[0].copy_from_slice(&x);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = ws.acts.split_at_mut(i + 1);
            let out = &mut rest[0];
            layer.matvec(&prev[i], out);
            if i < last {
                relu_inplace(out);
            }
        }
        sigmoid(ws.acts[last + 1][0])
    }

    /// Network output without touching the counters.
    pub fn predict(&self, p: Vec3<f64>) -> T {
        if let Some(net) = (self as &dyn Any).downcast_ref::<GainApproximator<f32>>() {
            if let Some(z) = forward_f32(&net.layers, &net.normalize(p)) {
                return T::lit(sigmoid(z) as f64);
            }
        }
        let mut buf_a = [T::zero(); MAX_WIDTH];
        let mut buf_b = [T::zero(); MAX_WIDTH];
        buf_a[..3].copy_from_slice(&self.normalize(p));
        let (mut a, mut b) = (&mut buf_a, &mut buf_b);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let out = &mut b[..layer.outputs];
            layer.matvec(&a[..layer.inputs], out);
            if i < last {
                relu_inplace(out);
            }
            std::mem::swap(&mut a, &mut b);
        }
        sigmoid(a[0])
    }

    /// Instrumented single forward pass.
    pub fn query(&self, p: Vec3<f64>) -> f64 {
        let t0 = Instant::now();
        let g = self.predict(p).as_f64();
        self.counters
            .nanos
            .fetch_add(t0.elapsed().as_nanos() as u64, Ordering::Relaxed);
        self.counters.queries.fetch_add(1, Ordering::Relaxed);
        self.counters
            .matvecs
            .fetch_add(self.layers.len() as u64, Ordering::Relaxed);
        g
    }

    /// Adds `∂(g(x) − target)² / ∂φ` to `grads` and returns the squared error.
    fn accumulate(
        &self,
        x: [T; 3],
        target: T,
        ws: &mut Workspace<T>,
        grads: &mut Gradients<T>,
    ) -> T {
        let g = self.forward_into(x, ws);
        let err = g - target;
        let two = T::lit(2.0);
        ws.delta[0] = two * err * g * (T::one() - g);
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let n = layer.outputs;
            let a_prev = &ws.acts[i];
            let delta = &ws.delta[..n];
            for (b, &d) in grads.bias[i].iter_mut().zip(delta) {
                *b = *b + d;
            }
            let gw = &mut grads.weights[i];
            for (j, &a) in a_prev.iter().enumerate() {
                if a != T::zero() {
                    for (w, &d) in gw[j * n..(j + 1) * n].iter_mut().zip(delta) {
                        *w = *w + a * d;
                    }
                }
            }
            if i == 0 {
                break;
            }
            // Hidden activations are post-ReLU, so zero marks an inactive unit.
            for (j, nd) in ws.next_delta[..layer.inputs].iter_mut().enumerate() {
                *nd = if a_prev[j] > T::zero() {
                    dot(layer.row(j), delta)
                } else {
                    T::zero()
                };
            }
            std::mem::swap(&mut ws.delta, &mut ws.next_delta);
        }
        err * err
    }

    /// Analytic gradient of the squared error at a single sample.
    pub fn gradient(&self, p: Vec3<f64>, target: f64) -> Gradients<T> {
        let mut grads = Gradients::zeros(&self.layers);
        let mut ws = self.workspace();
        self.accumulate(self.normalize(p), T::lit(target), &mut ws, &mut grads);
        grads
    }

    /// Squared error at a single sample.
    pub fn sample_loss(&self, p: Vec3<f64>, target: f64) -> f64 {
        let e = self.predict(p).as_f64() - target;
        e * e
    }

    /// Mean squared error over a data set.
    pub fn mse(&self, points: &[Vec3<f64>], targets: &[f64]) -> f64 {
        let mut ws = self.workspace();
        let total: f64 = points
            .iter()
            .zip(targets)
            .map(|(p, t)| {
                let e = self.forward_into(self.normalize(*p), &mut ws).as_f64() - t;
                e * e
            })
            .sum();
        total / points.len().max(1) as f64
    }

    /// Trains a fresh network on `points` → `targets`.
    pub fn fit(
        points: &[Vec3<f64>],
        targets: &[f64],
        center: Vec3<f64>,
        scale: f64,
        cfg: &NetworkConfig,
    ) -> Result<Self> {
        if points.len() != targets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} points but {} targets",
                points.len(),
                targets.len()
            )));
        }
        if points.len() < MIN_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                points.len()
            )));
        }
        let start = Instant::now();
        let mut model = Self::new(cfg, center, scale)?;
        let xs: Vec<[T; 3]> = points.iter().map(|p| model.normalize(*p)).collect();
        let ys: Vec<T> = targets.iter().map(|&t| T::lit(t)).collect();
        model.initial_loss = Some(model.mse(points, targets));

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut adam = Adam::new(&model.layers, cfg.learning_rate);
        let mut grads = Gradients::zeros(&model.layers);
        let mut ws = model.workspace();
        let mut order: Vec<usize> = (0..xs.len()).collect();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                grads.clear();
                for &i in batch {
                    total += model.accumulate(xs[i], ys[i], &mut ws, &mut grads).as_f64();
                }
                adam.step(
                    &mut model.layers,
                    &grads,
                    T::one() / T::lit(batch.len() as f64),
                );
            }
            // Loss accumulated during the epoch mixes parameter versions; the
            // history records the end-of-epoch loss instead.
            let loss = if total.is_finite() {
                model.mse(points, targets)
            } else {
                total
            };
            if !loss.is_finite() || !model.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            model.loss_history.push(loss);
            let h = &model.loss_history;
            if cfg.patience > 0
                && h.len() > cfg.patience
                && h[h.len() - 1 - cfg.patience] - loss < cfg.min_improvement
            {
                break;
            }
        }
        model.train_time = start.elapsed();
        Ok(model)
    }

    /// Trains on a sampler output, normalised around `p_s` with radius `l_s`.
    pub fn fit_samples(
        samples: &GainSampleSet,
        p_s: Vec3<f64>,
        l_s: f64,
        cfg: &NetworkConfig,
    ) -> Result<Self> {
        Self::fit(&samples.positions, &samples.gains, p_s, l_s, cfg)
    }

    fn param_mut(&mut self, idx: usize) -> &mut T {
        let mut k = idx;
        for l in &mut self.layers {
            if k < l.weights.len() {
                return &mut l.weights[k];
            }
            k -= l.weights.len();
            if k < l.bias.len() {
                return &mut l.bias[k];
            }
            k -= l.bias.len();
        }
        panic!("parameter index {idx} out of range")
    }

    fn grad_at(grads: &Gradients<T>, idx: usize) -> T {
        let mut k = idx;
        for (w, b) in grads.weights.iter().zip(&grads.bias) {
            if k < w.len() {
                return w[k];
            }
            k -= w.len();
            if k < b.len() {
                return b[k];
            }
            k -= b.len();
        }
        panic!("parameter index {idx} out of range")
    }

    /// Largest relative error between analytic and central-difference
    /// gradients over `count` random parameters (`h = 1e-5`). Differences
    /// below `floor` in magnitude are compared absolutely.
    pub fn gradient_check(&self, p: Vec3<f64>, target: f64, count: usize, seed: u64) -> f64 {
        const H: f64 = 1e-5;
        const FLOOR: f64 = 1e-6;
        let analytic = self.gradient(p, target);
        let mut probe = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.param_count();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx.truncate(count.min(n));
        let mut worst: f64 = 0.0;
        for k in idx {
            let orig = *probe.param_mut(k);
            *probe.param_mut(k) = orig + T::lit(H);
            let up = probe.sample_loss(p, target);
            *probe.param_mut(k) = orig - T::lit(H);
            let down = probe.sample_loss(p, target);
            *probe.param_mut(k) = orig;
            let numeric = (up - down) / (2.0 * H);
            let a = Self::grad_at(&analytic, k).as_f64();
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(err);
        }
        worst
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            version: MODEL_SCHEMA_VERSION,
            center: self.center,
            scale: self.scale,
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.iter().map(|w| w.as_f64()).collect(),
                    bias: l.bias.iter().map(|b| b.as_f64()).collect(),
                })
                .collect(),
            initial_loss: self.initial_loss,
            loss_history: self.loss_history.clone(),
        }
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        if f.version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "model schema version {} (expected {MODEL_SCHEMA_VERSION})",
                f.version
            )));
        }
        let mut prev = 3;
        for l in &f.layers {
            if l.inputs != prev
                || l.outputs > MAX_WIDTH
                || l.weights.len() != l.inputs * l.outputs
                || l.bias.len() != l.outputs
            {
                return Err(Error::InvalidArgument(
                    "inconsistent layer dimensions".into(),
                ));
            }
            prev = l.outputs;
        }
        if prev != 1 || f.layers.is_empty() {
            return Err(Error::InvalidArgument(
                "network must end in a single output".into(),
            ));
        }
        Ok(Self {
            layers: f
                .layers
                .iter()
                .map(|l| Layer {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.iter().map(|&w| T::lit(w)).collect(),
                    bias: l.bias.iter().map(|&b| T::lit(b)).collect(),
                })
                .collect(),
            center: f.center,
            scale: f.scale,
            initial_loss: f.initial_loss,
            loss_history: f.loss_history.clone(),
            train_time: Duration::ZERO,
            counters: QueryCounters::default(),
        })
    }

    pub fn save_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &self.to_file())?;
        Ok(())
    }

    pub fn load_json<R: Read>(r: R) -> Result<Self> {
        Self::from_file(&serde_json::from_reader(r)?)
    }

    /// `epoch,loss` rows.
    pub fn write_loss_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "loss"])?;
        for (i, l) in self.loss_history.iter().enumerate() {
            out.write_record([i.to_string(), l.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Serialised model: layer dimensions plus row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub center: Vec3<f64>,
    pub scale: f64,
    pub layers: Vec<Layer<f64>>,
    pub initial_loss: Option<f64>,
    pub loss_history: Vec<f64>,
}

struct Adam<T> {
    lr: T,
    t: i32,
    m: Gradients<T>,
    v: Gradients<T>,
}

impl<T: Real> Adam<T> {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(layers: &[Layer<T>], lr: f64) -> Self {
        Self {
            lr: T::lit(lr),
            t: 0,
            m: Gradients::zeros(layers),
            v: Gradients::zeros(layers),
        }
    }

    fn step(&mut self, layers: &mut [Layer<T>], g: &Gradients<T>, scale: T) {
        self.t += 1;
        let (b1, b2, eps) = (T::lit(Self::B1), T::lit(Self::B2), T::lit(Self::EPS));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
            for k in 0..p.len() {
                let gk = g[k] * scale;
                m[k] = b1 * m[k] + (T::one() - b1) * gk;
                v[k] = b2 * v[k] + (T::one() - b2) * gk * gk;
                p[k] = p[k] - lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        };
        for (i, l) in layers.iter_mut().enumerate() {
            update(
                &mut l.weights,
                &g.weights[i],
                &mut self.m.weights[i],
                &mut self.v.weights[i],
            );
            update(
                &mut l.bias,
                &g.bias[i],
                &mut self.m.bias[i],
                &mut self.v.bias[i],
            );
        }
    }
}
