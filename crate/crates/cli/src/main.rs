use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};
use rayon::prelude::*;

use nbv_core::bench::{run_bench, BenchConfig, DEFAULT_VIEWS};
use nbv_core::config::{load_run_config, RunManifest};
use nbv_core::export::{run_stem, summarize_files, write_json_file, write_summary_csv, GainFieldDump, PathDump};
use nbv_core::pipeline::run_experiment_with;
use nbv_core::Error;

const EXIT_ABORT: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "nbv", version, about = "Next-best-view reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one variant of one scene for every seed in a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Summarise run records into per-variant medians.
    Table {
        /// Glob matching run record JSON files.
        pattern: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time exact view gains against gain-model queries.
    Bench {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 100)]
        rays: usize,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_VIEWS)]
        views: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConfigParse { .. }
        | Error::InvalidConfig(_)
        | Error::InvalidArgument(_)
        | Error::SchemaMismatch { .. }
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_) => EXIT_CONFIG,
        _ => EXIT_ABORT,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("NBV_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("NBV_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn step_dir(out: &Path, stem: &str) -> Result<PathBuf, Error> {
    let dir = out.join(stem);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn cmd_run(manifest_path: &Path) -> Result<(), Error> {
    let manifest = RunManifest::load(manifest_path)?;
    let (scene, mut cfg) = load_run_config(&manifest.scene)?;
    cfg.variant = manifest.variant();
    if let Some(b) = manifest.view_budget {
        cfg.scene.view_budget = b;
    }
    cfg.validate()?;
    fs::create_dir_all(&manifest.output)?;
    let label = cfg.variant.label();
    info!("{}: {label}, {} seed(s) -> {}", cfg.scene.name, manifest.seeds.len(), manifest.output.display());

    let results: Vec<(u64, Result<(), Error>)> = manifest
        .seeds
        .par_iter()
        .map(|&seed| {
            let stem = run_stem(&cfg.scene.name, &label, seed);
            let dump = manifest.dump;
            let out = &manifest.output;
            let result = (|| {
                let mut hook = |state: &nbv_core::pipeline::ReconstructionState,
                                report: &nbv_core::pipeline::StepReport,
                                model: Option<&nbv_core::ServedModel>|
                 -> Result<(), Error> {
                    if !(dump.gain_field || dump.map || dump.paths) {
                        return Ok(());
                    }
                    let dir = step_dir(out, &stem)?;
                    let step = format!("step{:03}", report.step);
                    if dump.gain_field {
                        let g = GainFieldDump::new(state, report, model, cfg.scene.l_s);
                        write_json_file(&dir.join(format!("{step}_gain_field.json")), &g)?;
                    }
                    if dump.map {
                        state.map.write_blob(BufWriter::new(File::create(dir.join(format!("{step}_map.bin")))?))?;
                    }
                    if dump.paths {
                        write_json_file(&dir.join(format!("{step}_path.json")), &PathDump::new(report))?;
                    }
                    Ok(())
                };
                let run = run_experiment_with(&scene, &cfg, seed, &mut hook)?;
                write_json_file(&out.join(format!("{stem}.json")), &run.record)?;
                run.record.write_steps_csv(BufWriter::new(File::create(out.join(format!("{stem}_steps.csv")))?))?;
                let m = &run.record.metrics;
                info!(
                    "seed {seed}: P.L. {:.2} m, Acc {:.4}, Comp {:.4}, C.R. {:.3}",
                    run.record.totals.path_length, m.accuracy, m.completion, m.completion_ratio
                );
                Ok(())
            })();
            (seed, result)
        })
        .collect();

    let mut worst = None;
    for (seed, r) in results {
        if let Err(e) = r {
            error!("seed {seed}: {e}");
            let code = exit_code(&e);
            if worst.as_ref().is_none_or(|w: &Error| exit_code(w) < code) {
                worst = Some(e);
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

fn cmd_table(pattern: &str, out: &Path) -> Result<(), Error> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::InvalidArgument(format!("bad pattern `{pattern}`: {e}")))?
        .collect::<Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    paths.sort();
    let rows = summarize_files(&paths)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_summary_csv(&rows, BufWriter::new(File::create(out)?))?;
    info!("{} record(s), {} row(s) -> {}", paths.len(), rows.len(), out.display());
    Ok(())
}

fn cmd_bench(scene_path: &Path, bench: BenchConfig, json: Option<&Path>) -> Result<(), Error> {
    bench.validate()?;
    let (scene, cfg) = load_run_config(scene_path)?;
    let report = run_bench(&scene, &cfg.scene, &bench)?;
    println!("scene {} R={} N={} views={} reps={}", report.scene, bench.rays, bench.samples, bench.views, bench.repetitions);
    println!("rep,exact_median_us,query_median_us,ratio");
    for (i, r) in report.repetitions.iter().enumerate() {
        println!("{i},{:.3},{:.3},{:.2}", r.exact_median_s * 1e6, r.query_median_s * 1e6, r.ratio);
    }
    println!("median ratio {:.2} (spread {:.2}, {} parameters)", report.median_ratio, report.ratio_spread, report.param_count);
    if let Some(p) = json {
        write_json_file(p, &report)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Run { manifest } => cmd_run(manifest),
        Command::Table { pattern, out } => cmd_table(pattern, out),
        Command::Bench { scene, rays, samples, reps, views, seed, json } => cmd_bench(
            scene,
            BenchConfig { rays: *rays, samples: *samples, views: *views, repetitions: *reps, seed: *seed },
            json.as_deref(),
        ),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
