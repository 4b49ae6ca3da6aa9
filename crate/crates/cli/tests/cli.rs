use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nbv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbv")).args(args).env("NBV_THREADS", "1").output().unwrap()
}

fn small_cabin(dir: &Path) -> String {
    let cabin = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/cabin.toml");
    let text = fs::read_to_string(cabin)
        .unwrap()
        .replace("view_budget = 28", "view_budget = 2")
        .replace("N_loc = 32", "N_loc = 12");
    let text = format!("{text}\n[gain]\nrays = 16\nsamples = 16\n\n[network]\nepochs = 20\n\n[run]\nmetric_samples = 400\n");
    let path = dir.join("cabin.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_then_table() {
    let dir = tempfile::tempdir().unwrap();
    small_cabin(dir.path());
    let manifest = dir.path().join("m.toml");
    fs::write(
        &manifest,
        "scene = \"cabin.toml\"\nplanner = \"astar\"\nuse_approximator = true\nuse_filter = true\nseeds = [0, 1]\noutput = \"out\"\n\n[dump]\ngain_field = true\nmap = true\npaths = true\n",
    )
    .unwrap();
    let out = nbv(&["run", "--manifest", manifest.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let runs = dir.path().join("out");
    for seed in [0, 1] {
        let stem = format!("cabin_V6_seed{seed}");
        let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(runs.join(format!("{stem}.json"))).unwrap()).unwrap();
        assert_eq!(record["seed"], seed);
        assert_eq!(record["steps"].as_array().unwrap().len(), 2);
        let csv = fs::read_to_string(runs.join(format!("{stem}_steps.csv"))).unwrap();
        assert!(csv.starts_with("step,T_train,T_query,T_planner,T_SP,T_s,N_query,P.L.,"));
        assert_eq!(csv.lines().count(), 3);
        for f in ["step000_gain_field.json", "step000_map.bin", "step001_path.json"] {
            assert!(runs.join(&stem).join(f).is_file(), "{stem}/{f}");
        }
    }

    let table = dir.path().join("table.csv");
    let pattern = format!("{}/*.json", runs.display());
    let out = nbv(&["table", &pattern, "--out", table.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(table).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "scene,variant,runs,Acc,Comp,C.R.,N_query,T_SP,T_GP,P.L.");
    assert!(lines[1].starts_with("cabin,V6,2,"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "scene = \"missing.toml\"\nplanner = \"astar\"\nuse_approximator = true\nuse_filter = true\nseeds = [0]\noutput = \"out\"\n").unwrap();
    let out = nbv(&["run", "--manifest", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));

    fs::write(&bad, "scene = \"x.toml\"\nplanner = \"dijkstra\"\n").unwrap();
    assert_eq!(nbv(&["run", "--manifest", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn table_rejects_empty_glob() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = format!("{}/*.json", dir.path().display());
    let out = nbv(&["table", &pattern, "--out", dir.path().join("t.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_reports_and_checks_repetitions() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_cabin(dir.path());
    let out = nbv(&["bench", "--scene", &scene, "--rays", "8", "--samples", "8", "--reps", "3"]);
    assert_eq!(out.status.code(), Some(2));

    let json = dir.path().join("bench.json");
    let out = nbv(&["bench", "--scene", &scene, "--rays", "8", "--samples", "8", "--reps", "10", "--views", "10", "--json", json.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("median ratio"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(report["repetitions"].as_array().unwrap().len(), 10);
}

#[test]
fn bad_thread_count_exits_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_nbv")).args(["table", "x", "--out", "y"]).env("NBV_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
