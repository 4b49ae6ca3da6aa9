//! Informative view-path planning.
//!
//! Both planners score a path from `p_s` to a node `p` by the informative
//! path cost `IP = f_d − λ_gain·f_d·G`, where `f_d` is the path length and
//! `G` the mean gain of the nodes after `p_s`. A* expands lattice nodes in
//! order of `Rank = IP + λ_rank·h_d`; the RRT baseline grows a tree whose
//! parents are chosen by the same cost.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::GainApproximator;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::num::Real;
use crate::voxel_map::VoxelMap;

pub fn ip_cost<T: Real>(f_d: T, g: T, lambda_gain: T) -> T {
    f_d - lambda_gain * f_d * g
}

/// Mean of the node gains; zero for an empty path.
pub fn path_gain<T: Real>(gains: &[T]) -> T {
    if gains.is_empty() {
        return T::zero();
    }
    gains.iter().copied().sum::<T>() / T::lit(gains.len() as f64)
}

pub fn rank_priority<T: Real>(ip: T, h_d: T, lambda_rank: T) -> T {
    ip + lambda_rank * h_d
}

/// Source of gain values at positions.
pub trait GainOracle: Sync {
    fn gain(&self, p: Vec3<f64>) -> f64;
}

impl<T: Real> GainOracle for GainApproximator<T> {
    fn gain(&self, p: Vec3<f64>) -> f64 {
        self.query(p)
    }
}

impl<F: Fn(Vec3<f64>) -> f64 + Sync> GainOracle for F {
    fn gain(&self, p: Vec3<f64>) -> f64 {
        self(p)
    }
}

/// Wraps an oracle and counts calls independently of the planner.
pub struct CountingOracle<'a, O: ?Sized> {
    inner: &'a O,
    calls: AtomicU64,
}

impl<'a, O: GainOracle + ?Sized> CountingOracle<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Self { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(AtomicOrdering::Relaxed)
    }
}

impl<O: GainOracle + ?Sized> GainOracle for CountingOracle<'_, O> {
    fn gain(&self, p: Vec3<f64>) -> f64 {
        self.calls.fetch_add(1, AtomicOrdering::Relaxed);
        self.inner.gain(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Astar,
    Rrt,
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Astar => "astar",
            Self::Rrt => "rrt",
        })
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "astar" => Ok(Self::Astar),
            "rrt" => Ok(Self::Rrt),
            other => Err(Error::InvalidConfig(format!("unknown planner '{other}' (expected astar or rrt)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub lambda_gain: f64,
    pub lambda_rank: f64,
    /// Lattice spacing for A*, extension length for RRT (m).
    pub l_step: f64,
    pub max_expansions: usize,
    /// RRT goal-sampling probability.
    pub goal_bias: f64,
    /// RRT parent-selection radius in units of `l_step`.
    pub parent_radius: f64,
    /// RRT iterations run before the cheapest goal path is taken, if the
    /// goal was connected by then.
    pub min_iterations: usize,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            lambda_gain: 0.5,
            lambda_rank: 1.5,
            l_step: 0.2,
            max_expansions: 50_000,
            goal_bias: 0.1,
            parent_radius: 1.7,
            min_iterations: 2000,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_gain) {
            return Err(Error::InvalidConfig(format!("lambda_gain must lie in [0, 1], got {}", self.lambda_gain)));
        }
        if !(self.lambda_rank >= 0.0 && self.lambda_rank.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda_rank must be non-negative, got {}", self.lambda_rank)));
        }
        if !(self.l_step > 0.0 && self.l_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("l_step must be positive, got {}", self.l_step)));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::InvalidConfig(format!("goal_bias must lie in [0, 1], got {}", self.goal_bias)));
        }
        if !(1.0..=3f64.sqrt()).contains(&self.parent_radius) {
            return Err(Error::InvalidConfig(format!("parent_radius must lie in [1, √3], got {}", self.parent_radius)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerCounters {
    pub expansions: usize,
    /// Gain oracle calls.
    pub queries: usize,
    /// Planner wall time in seconds, oracle calls included.
    pub elapsed_s: f64,
}

/// Planned path from `p_s` to `p_g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPath {
    pub planner: PlannerKind,
    pub nodes: Vec<Vec3<f64>>,
    /// Gain of every node after the first.
    pub gains: Vec<f64>,
    pub length: f64,
    pub mean_gain: f64,
    pub ip: f64,
    pub counters: PlannerCounters,
}

impl ViewPath {
    fn single(planner: PlannerKind, p: Vec3<f64>, elapsed: Duration) -> Self {
        Self {
            planner,
            nodes: vec![p],
            gains: Vec::new(),
            length: 0.0,
            mean_gain: 0.0,
            ip: 0.0,
            counters: PlannerCounters { elapsed_s: elapsed.as_secs_f64(), ..Default::default() },
        }
    }

    pub fn goal(&self) -> Vec3<f64> {
        *self.nodes.last().expect("paths have at least one node")
    }

    /// Sum of segment lengths recomputed from the nodes.
    pub fn recomputed_length(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Search state shared by both planners.
#[derive(Debug, Clone, Copy)]
struct Node {
    pos: Vec3<f64>,
    parent: Option<usize>,
    f_d: f64,
    gain_sum: f64,
    count: usize,
    gain: f64,
    ip: f64,
}

impl Node {
    fn root(pos: Vec3<f64>) -> Self {
        Self { pos, parent: None, f_d: 0.0, gain_sum: 0.0, count: 0, gain: 0.0, ip: 0.0 }
    }

    fn child(&self, idx: usize, pos: Vec3<f64>, gain: f64, lambda_gain: f64) -> Self {
        let f_d = self.f_d + self.pos.distance(pos);
        let gain_sum = self.gain_sum + gain;
        let count = self.count + 1;
        let ip = ip_cost(f_d, gain_sum / count as f64, lambda_gain);
        Self { pos, parent: Some(idx), f_d, gain_sum, count, gain, ip }
    }
}

fn trace(nodes: &[Node], last: usize, planner: PlannerKind, counters: PlannerCounters) -> ViewPath {
    let mut chain = vec![last];
    while let Some(p) = nodes[*chain.last().unwrap()].parent {
        chain.push(p);
    }
    chain.reverse();
    let end = &nodes[last];
    ViewPath {
        planner,
        nodes: chain.iter().map(|&i| nodes[i].pos).collect(),
        gains: chain[1..].iter().map(|&i| nodes[i].gain).collect(),
        length: end.f_d,
        mean_gain: if end.count == 0 { 0.0 } else { end.gain_sum / end.count as f64 },
        ip: end.ip,
        counters,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Key {
    Lattice([i32; 3]),
    Goal,
}

struct OpenEntry {
    rank: f64,
    f_d: f64,
    key: Key,
    node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for OpenEntry {
    /// Reversed for the max-heap: lower rank first, then lower `f_d`, then
    /// the lexicographically smaller lattice index.
    fn cmp(&self, o: &Self) -> Ordering {
        o.rank
            .total_cmp(&self.rank)
            .then(o.f_d.total_cmp(&self.f_d))
            .then(o.key.cmp(&self.key))
            .then(o.node.cmp(&self.node))
    }
}

fn neighbour_offsets() -> Vec<[i32; 3]> {
    let mut v = Vec::with_capacity(26);
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    v.push([dx, dy, dz]);
                }
            }
        }
    }
    v
}

/// Best-first search on the 26-connected lattice of spacing `l_step`
/// anchored at `p_s`. Any node within `l_step` of `p_g` with a free segment
/// to it may finish the path at `p_g` exactly.
pub fn plan_astar<O: GainOracle + ?Sized>(
    map: &VoxelMap,
    oracle: &O,
    p_s: Vec3<f64>,
    p_g: Vec3<f64>,
    cfg: &PlannerConfig,
) -> Result<ViewPath> {
    cfg.validate()?;
    let start = Instant::now();
    if p_s == p_g {
        return Ok(ViewPath::single(PlannerKind::Astar, p_s, start.elapsed()));
    }
    let step = cfg.l_step;
    let lattice = |k: [i32; 3]| p_s + Vec3::new(k[0] as f64, k[1] as f64, k[2] as f64) * step;
    let offsets = neighbour_offsets();
    let mut gain_cache: HashMap<Key, f64> = HashMap::new();
    let mut queries = 0usize;
    let mut gain_at = |key: Key, p: Vec3<f64>| -> f64 {
        *gain_cache.entry(key).or_insert_with(|| {
            queries += 1;
            oracle.gain(p)
        })
    };

    let mut nodes = vec![Node::root(p_s)];
    let mut open = BinaryHeap::new();
    let mut closed: HashMap<Key, ()> = HashMap::new();
    let mut best_ip: HashMap<Key, f64> = HashMap::new();
    let root_key = Key::Lattice([0, 0, 0]);
    open.push(OpenEntry { rank: cfg.lambda_rank * p_s.distance(p_g), f_d: 0.0, key: root_key, node: 0 });
    best_ip.insert(root_key, 0.0);
    let mut expansions = 0usize;

    while let Some(entry) = open.pop() {
        if let Entry::Vacant(v) = closed.entry(entry.key) {
            v.insert(());
        } else {
            continue;
        }
        let Key::Lattice(k) = entry.key else {
            let counters = PlannerCounters { expansions, queries, elapsed_s: start.elapsed().as_secs_f64() };
            return Ok(trace(&nodes, entry.node, PlannerKind::Astar, counters));
        };
        if expansions >= cfg.max_expansions {
            break;
        }
        expansions += 1;
        let parent = nodes[entry.node];
        let mut push = |key: Key, pos: Vec3<f64>, gain: f64, nodes: &mut Vec<Node>| {
            let child = parent.child(entry.node, pos, gain, cfg.lambda_gain);
            let better = best_ip.get(&key).is_none_or(|&b| child.ip < b);
            if better {
                best_ip.insert(key, child.ip);
                let rank = rank_priority(child.ip, pos.distance(p_g), cfg.lambda_rank);
                nodes.push(child);
                open.push(OpenEntry { rank, f_d: child.f_d, key, node: nodes.len() - 1 });
            }
        };
        if parent.pos.distance(p_g) <= step && !closed.contains_key(&Key::Goal) && map.is_path_free(parent.pos, p_g) {
            let g = gain_at(Key::Goal, p_g);
            push(Key::Goal, p_g, g, &mut nodes);
        }
        for off in &offsets {
            let nk = [k[0] + off[0], k[1] + off[1], k[2] + off[2]];
            let key = Key::Lattice(nk);
            if closed.contains_key(&key) {
                continue;
            }
            let pos = lattice(nk);
            if !map.is_path_free(parent.pos, pos) {
                continue;
            }
            let g = gain_at(key, pos);
            push(key, pos, g, &mut nodes);
        }
    }
    Err(Error::NoPath { expansions })
}

/// RRT grown toward uniform samples in the map extent (goal-biased). Each
/// new node takes the parent within `parent_radius·l_step` that minimises
/// its informative path cost. After the first goal connection the tree keeps
/// growing for as many iterations again, and for at least `min_iterations`
/// in total; the cheapest goal path wins.
pub fn plan_rrt<O: GainOracle + ?Sized>(
    map: &VoxelMap,
    oracle: &O,
    p_s: Vec3<f64>,
    p_g: Vec3<f64>,
    cfg: &PlannerConfig,
) -> Result<ViewPath> {
    cfg.validate()?;
    let start = Instant::now();
    if p_s == p_g {
        return Ok(ViewPath::single(PlannerKind::Rrt, p_s, start.elapsed()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ext = map.extent();
    let step = cfg.l_step;
    let radius = cfg.parent_radius * step;
    let mut nodes = vec![Node::root(p_s)];
    let mut goals: Vec<usize> = Vec::new();
    let mut queries = 0usize;
    let mut budget = cfg.max_expansions;
    let mut iter = 0usize;
    let mut gain = |p: Vec3<f64>| {
        queries += 1;
        oracle.gain(p)
    };

    while iter < budget {
        iter += 1;
        let target = if rng.random::<f64>() < cfg.goal_bias {
            p_g
        } else {
            Vec3::new(
                rng.random_range(ext.min.x..ext.max.x),
                rng.random_range(ext.min.y..ext.max.y),
                rng.random_range(ext.min.z..ext.max.z),
            )
        };
        let nearest = nodes
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.pos.distance(target).total_cmp(&b.1.pos.distance(target)))
            .map(|(i, _)| i)
            .expect("tree has a root");
        let from = nodes[nearest].pos;
        let d = from.distance(target);
        if d < 1e-12 {
            continue;
        }
        let pos = if d <= step { target } else { from + (target - from) * (step / d) };
        if !map.is_path_free(from, pos) {
            continue;
        }
        let g = gain(pos);
        let mut best = nodes[nearest].child(nearest, pos, g, cfg.lambda_gain);
        for (i, n) in nodes.iter().enumerate() {
            if i != nearest && n.pos.distance(pos) <= radius {
                let cand = n.child(i, pos, g, cfg.lambda_gain);
                if cand.ip < best.ip && map.is_path_free(n.pos, pos) {
                    best = cand;
                }
            }
        }
        nodes.push(best);
        let idx = nodes.len() - 1;
        if pos == p_g {
            goals.push(idx);
        } else if pos.distance(p_g) <= step && map.is_path_free(pos, p_g) {
            let gg = gain(p_g);
            let goal = nodes[idx].child(idx, p_g, gg, cfg.lambda_gain);
            nodes.push(goal);
            goals.push(nodes.len() - 1);
        }
        if goals.len() == 1 && budget == cfg.max_expansions {
            budget = (2 * iter).max(cfg.min_iterations).min(cfg.max_expansions);
        }
    }
    let counters = PlannerCounters { expansions: iter, queries, elapsed_s: start.elapsed().as_secs_f64() };
    goals
        .into_iter()
        .min_by(|&a, &b| nodes[a].ip.total_cmp(&nodes[b].ip).then(a.cmp(&b)))
        .map(|g| trace(&nodes, g, PlannerKind::Rrt, counters))
        .ok_or(Error::NoPath { expansions: iter })
}

/// Dispatches on the planner kind.
pub fn plan<O: GainOracle + ?Sized>(
    kind: PlannerKind,
    map: &VoxelMap,
    oracle: &O,
    p_s: Vec3<f64>,
    p_g: Vec3<f64>,
    cfg: &PlannerConfig,
) -> Result<ViewPath> {
    match kind {
        PlannerKind::Astar => plan_astar(map, oracle, p_s, p_g, cfg),
        PlannerKind::Rrt => plan_rrt(map, oracle, p_s, p_g, cfg),
    }
}
