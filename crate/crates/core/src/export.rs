//! Files consumed by plotting scripts and table assembly: per-step dumps
//! and the per-variant summary table.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::approximator::GainApproximator;
use crate::bench::median;
use crate::error::{Error, Result};
use crate::gain_field::FieldSlices;
use crate::pipeline::{ReconstructionState, RunRecord, StepReport, RUN_SCHEMA_VERSION};
use crate::planner::PlannerKind;

/// Uncertainty slices at the heights of the step's start and goal, with
/// g_φ evaluated at the same voxel centres inside the sampling ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainFieldDump {
    pub schema_version: u32,
    pub step: usize,
    pub p_s: [f64; 3],
    pub l_s: f64,
    pub field: FieldSlices,
    /// `predictions[k][y][x]`, aligned with `field.slices[k]`; `None` outside
    /// the sampling ball or when no model was fitted.
    pub predictions: Vec<Vec<Vec<Option<f64>>>>,
    pub sample_positions: Vec<[f64; 3]>,
    pub sample_gains: Vec<f64>,
}

impl GainFieldDump {
    pub fn new(
        state: &ReconstructionState,
        report: &StepReport,
        model: Option<&GainApproximator<f32>>,
        l_s: f64,
    ) -> Self {
        let map = &state.map;
        let mut z_indices: Vec<usize> = [report.start, report.goal.position]
            .iter()
            .filter_map(|p| map.cell_of(*p).map(|c| c[2]))
            .collect();
        z_indices.dedup();
        let field = state.field.slices(map, &z_indices);
        let [nx, ny, _] = map.dims();
        let predictions = field
            .slices
            .iter()
            .map(|s| {
                (0..ny)
                    .map(|y| {
                        (0..nx)
                            .map(|x| {
                                let c = map.center([x, y, s.z_index]);
                                model.filter(|_| c.distance(report.start) <= l_s).map(|m| m.predict(c) as f64)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            schema_version: RUN_SCHEMA_VERSION,
            step: report.step,
            p_s: report.start.to_array(),
            l_s,
            field,
            predictions,
            sample_positions: report.samples.positions.iter().map(|p| p.to_array()).collect(),
            sample_gains: report.samples.gains.clone(),
        }
    }
}

/// Planned path of one step with per-node gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDump {
    pub schema_version: u32,
    pub step: usize,
    pub planner: PlannerKind,
    pub nodes: Vec<[f64; 3]>,
    /// Gain at every node after the first.
    pub gains: Vec<f64>,
    pub length: f64,
    pub goal_yaw: f64,
    pub goal_pitch: f64,
}

impl PathDump {
    pub fn new(report: &StepReport) -> Self {
        Self {
            schema_version: RUN_SCHEMA_VERSION,
            step: report.step,
            planner: report.path.planner,
            nodes: report.path.nodes.iter().map(|p| p.to_array()).collect(),
            gains: report.path.gains.clone(),
            length: report.path.length,
            goal_yaw: report.goal.yaw,
            goal_pitch: report.goal.pitch,
        }
    }
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush()?;
    Ok(())
}

/// Reads a run record, rejecting other schema versions by file name.
pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != RUN_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch { path: path.to_path_buf(), found, expected: RUN_SCHEMA_VERSION });
    }
    serde_json::from_value(value).map_err(|e| Error::ConfigParse { path: path.to_path_buf(), message: e.to_string() })
}

/// Medians across seeds for one scene and variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scene: String,
    pub variant: String,
    pub runs: usize,
    pub accuracy: f64,
    pub completion: f64,
    pub completion_ratio: f64,
    pub n_query: f64,
    pub t_sp: f64,
    pub t_gp: f64,
    pub path_length: f64,
}

pub const SUMMARY_HEADER: [&str; 10] = ["scene", "variant", "runs", "Acc", "Comp", "C.R.", "N_query", "T_SP", "T_GP", "P.L."];

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.scene.clone(), r.label.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((scene, variant), rs)| {
            let m = |f: &dyn Fn(&RunRecord) -> f64| median(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                scene,
                variant,
                runs: rs.len(),
                accuracy: m(&|r| r.metrics.accuracy),
                completion: m(&|r| r.metrics.completion),
                completion_ratio: m(&|r| r.metrics.completion_ratio),
                n_query: m(&|r| r.totals.n_query as f64),
                t_sp: m(&|r| r.totals.t_sp),
                t_gp: m(&|r| r.totals.t_gp),
                path_length: m(&|r| r.totals.path_length),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        out.write_record([
            r.scene.clone(),
            r.variant.clone(),
            r.runs.to_string(),
            r.accuracy.to_string(),
            r.completion.to_string(),
            r.completion_ratio.to_string(),
            r.n_query.to_string(),
            r.t_sp.to_string(),
            r.t_gp.to_string(),
            r.path_length.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads every record and summarises them; fails on the first bad file.
pub fn summarize_files(paths: &[PathBuf]) -> Result<Vec<SummaryRow>> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no run records matched".into()));
    }
    let records = paths.iter().map(|p| read_record(p)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(&records))
}

/// File name stem shared by every artefact of one run.
pub fn run_stem(scene: &str, label: &str, seed: u64) -> String {
    let label: String = label.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    format!("{scene}_{label}_seed{seed}")
}
