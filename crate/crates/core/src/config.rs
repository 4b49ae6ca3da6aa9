//! TOML scene configs and run manifests.
//!
//! Scene keys use the customary parameter names verbatim (`l_s`, `l_res`,
//! `l_step`, `d_f`, `N_pitch`, `N_yaw`, `d_min`, `d_max`, ...). Geometry is
//! either a built-in scene named by `geometry` or a list of `[[primitive]]`
//! tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::approximator::NetworkConfig;
use crate::error::{Error, Result};
use crate::gain_field::GainEvaluator;
use crate::geom::{Aabb, Intrinsics, Vec3};
use crate::metrics::DEFAULT_SAMPLES;
use crate::pipeline::{RunConfig, Variant};
use crate::planner::{PlannerConfig, PlannerKind};
use crate::scene::{builtin, Primitive, Scene, SceneConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneSection {
    name: String,
    geometry: Option<String>,
    bounds_min: [f64; 3],
    bounds_max: [f64; 3],
    start: [f64; 3],
    l_s: f64,
    l_res: f64,
    l_step: f64,
    d_n: f64,
    d_f: f64,
    #[serde(rename = "N_pitch")]
    n_pitch: usize,
    #[serde(rename = "N_yaw")]
    n_yaw: usize,
    d_min: f64,
    d_max: f64,
    view_budget: usize,
    #[serde(rename = "N_loc")]
    n_loc: usize,
    k_noise: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraSection {
    width: usize,
    height: usize,
    vfov_deg: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PrimitiveSpec {
    Sphere { center: [f64; 3], radius: f64 },
    Box { center: [f64; 3], half_extents: [f64; 3] },
    Plane { normal: [f64; 3], offset: f64 },
}

impl PrimitiveSpec {
    fn build(&self) -> Primitive<f64> {
        let v = Vec3::from_array;
        match *self {
            Self::Sphere { center, radius } => Primitive::sphere(v(center), radius),
            Self::Box { center, half_extents } => Primitive::cuboid(v(center), v(half_extents)),
            Self::Plane { normal, offset } => Primitive::plane(v(normal), offset),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainSection {
    rays: usize,
    samples: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    metric_samples: Option<usize>,
    capture_interval: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scene: SceneSection,
    camera: Option<CameraSection>,
    #[serde(default)]
    primitive: Vec<PrimitiveSpec>,
    gain: Option<GainSection>,
    #[serde(default)]
    network: NetworkConfig,
    #[serde(default)]
    planner: PlannerConfig,
    #[serde(default)]
    run: RunSection,
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let message = match e.span() {
            Some(span) => format!("line {}: {}", line_of(text, span.start), e.message()),
            None => e.message().to_string(),
        };
        Error::ConfigParse { path: path.to_path_buf(), message }
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::ConfigParse { path: path.to_path_buf(), message: e.to_string() })
}

/// Parses a scene config from text. `path` is only used in messages.
pub fn parse_run_config(text: &str, path: &Path) -> Result<(Scene<f64>, RunConfig)> {
    let file: ConfigFile = parse_toml(text, path)?;
    let invalid = |message: String| Error::ConfigParse { path: path.to_path_buf(), message };
    let s = file.scene;
    let scene = match (&s.geometry, file.primitive.is_empty()) {
        (Some(_), false) => return Err(invalid("`geometry` and [[primitive]] are mutually exclusive".into())),
        (Some(g), true) => builtin(g).ok_or_else(|| invalid(format!("unknown built-in geometry `{g}`")))?.0,
        (None, _) => Scene::new(file.primitive.iter().map(PrimitiveSpec::build).collect())
            .map_err(|e| invalid(e.to_string()))?,
    };
    let camera = match file.camera {
        Some(c) => Intrinsics { width: c.width, height: c.height, vfov: c.vfov_deg.to_radians() },
        None => Intrinsics::default(),
    };
    let sc = SceneConfig {
        name: s.name,
        bounds: Aabb::new(Vec3::from_array(s.bounds_min), Vec3::from_array(s.bounds_max)),
        start: Vec3::from_array(s.start),
        l_s: s.l_s,
        l_res: s.l_res,
        l_step: s.l_step,
        d_n: s.d_n,
        d_f: s.d_f,
        n_pitch: s.n_pitch,
        n_yaw: s.n_yaw,
        d_min: s.d_min,
        d_max: s.d_max,
        view_budget: s.view_budget,
        n_loc: s.n_loc,
        camera,
        k_noise: s.k_noise,
    };
    let mut cfg = RunConfig::new(sc, Variant::default());
    cfg.network = file.network;
    cfg.planner = PlannerConfig { l_step: cfg.scene.l_step, ..file.planner };
    if let Some(g) = file.gain {
        cfg.evaluator = GainEvaluator::new(g.rays, g.samples).map_err(|e| invalid(e.to_string()))?;
    }
    cfg.metric_samples = file.run.metric_samples.unwrap_or(DEFAULT_SAMPLES);
    cfg.capture_interval = file.run.capture_interval;
    cfg.validate().map_err(|e| invalid(e.to_string()))?;
    Ok((scene, cfg))
}

pub fn load_run_config(path: &Path) -> Result<(Scene<f64>, RunConfig)> {
    parse_run_config(&read(path)?, path)
}

/// Which per-step artefacts to write next to the run records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DumpToggles {
    /// Horizontal slices of the uncertainty field plus g_φ predictions.
    pub gain_field: bool,
    /// Binary voxel map blob.
    pub map: bool,
    /// Planned path with per-node gains.
    pub paths: bool,
}

/// One batch of runs: a scene config, a variant and a list of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Scene config path, relative to the manifest.
    pub scene: PathBuf,
    pub planner: PlannerKind,
    pub use_approximator: bool,
    pub use_filter: bool,
    pub seeds: Vec<u64>,
    /// Output directory, relative to the manifest.
    pub output: PathBuf,
    #[serde(default)]
    pub dump: DumpToggles,
    /// Optional view budget override.
    pub view_budget: Option<usize>,
}

impl RunManifest {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut m: Self = parse_toml(text, path)?;
        if m.seeds.is_empty() {
            return Err(Error::ConfigParse { path: path.to_path_buf(), message: "seeds must not be empty".into() });
        }
        if m.view_budget == Some(0) {
            return Err(Error::ConfigParse { path: path.to_path_buf(), message: "view_budget must be positive".into() });
        }
        let base = path.parent().unwrap_or(Path::new(""));
        m.scene = base.join(&m.scene);
        m.output = base.join(&m.output);
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?, path)
    }

    pub fn variant(&self) -> Variant {
        Variant { use_approximator: self.use_approximator, use_filter: self.use_filter, planner: self.planner }
    }
}
