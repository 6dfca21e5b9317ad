use std::path::Path;
use std::process::{Command, Output};

use capdyn_cli::config::{ConfigError, RunConfig};
use capdyn_cli::experiment::bundled_data_dir;
use capdyn_cli::ingest::{read_adoption, read_deskill, read_pisa, IngestError};
use serde_json::Value;

fn capdyn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capdyn"))
        .args(args)
        .arg("--data-dir")
        .arg(bundled_data_dir())
        .current_dir(dir)
        .env_remove("CAPDYN_THREADS")
        .output()
        .expect("spawn capdyn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn flag_beats_file_beats_default() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("run.toml"), "seed = 7\n[params]\nbeta = 0.05\n").unwrap();
    let o = capdyn(&["--config", "run.toml", "--seed", "9", "--print-config", "calibrate"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg: toml::Table = stdout(&o).parse().unwrap();
    assert_eq!(cfg["seed"].as_integer(), Some(9));
    assert_eq!(cfg["params"]["beta"].as_float(), Some(0.05));
    assert_eq!(cfg["params"]["alpha"].as_float(), Some(0.05));

    // `--set` sits between the file and explicit flags.
    let o = capdyn(&["--config", "run.toml", "--set", "seed=8", "--print-config", "calibrate"], tmp.path());
    let cfg: toml::Table = stdout(&o).parse().unwrap();
    assert_eq!(cfg["seed"].as_integer(), Some(8));
    let o = capdyn(&["--set", "seed=8", "--seed", "9", "--print-config", "calibrate"], tmp.path());
    let cfg: toml::Table = stdout(&o).parse().unwrap();
    assert_eq!(cfg["seed"].as_integer(), Some(9));
}

#[test]
fn out_of_range_override_names_key_and_range() {
    let tmp = tempfile::tempdir().unwrap();
    let o = capdyn(&["--set", "params.k_ai=1.5", "calibrate"], tmp.path());
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("params.k_ai") && err.contains("[0, 1.2]"), "{err}");
    assert!(err.contains("stage `config`"), "{err}");

    let err = RunConfig::resolve(None, &["params.betta=0.1".into()]).unwrap_err();
    assert!(matches!(err, ConfigError::UnknownKey { ref key } if key == "params.betta"), "{err}");
}

#[test]
fn empty_config_is_the_baseline() {
    let cfg = RunConfig::resolve(None, &[]).unwrap();
    let p = cfg.params;
    assert_eq!((p.alpha, p.beta, p.gamma, p.delta, p.epsilon, p.scope), (0.05, 0.03, 0.5, 0.5, 0.01, 0.7));
    assert_eq!((cfg.abm.n_agents, cfg.abm.t_steps, cfg.seed), (100, 200, 42));
}

#[test]
fn bundled_data_parses() {
    let data = bundled_data_dir();
    let pisa = read_pisa(&data.join("pisa.csv")).unwrap();
    let anchor = pisa.iter().find(|o| o.country == "OECD" && o.year == 2003).unwrap();
    assert_eq!(anchor.score, 500.0);
    let countries: std::collections::BTreeSet<_> = pisa.iter().filter(|o| o.country != "OECD").map(|o| &o.country).collect();
    assert_eq!(countries.len(), 15);
    assert_eq!(pisa.iter().filter(|o| o.country != "OECD").count(), 102);
    let deskill = read_deskill(&data.join("deskill.csv")).unwrap();
    let domains: Vec<&str> = deskill.iter().map(|d| d.domain.as_str()).collect();
    assert_eq!(domains, ["education", "endoscopy", "spatial-navigation", "aviation"]);
    assert!(!read_adoption(&data.join("adoption.csv")).unwrap().is_empty());
}

#[test]
fn invalid_adoption_row_is_rejected_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("adoption.csv");
    std::fs::write(&path, "country,year,fraction\nX,2003,0.2\nX,2006,1.5\n").unwrap();
    let err = read_adoption(&path).unwrap_err();
    let IngestError::Rows { diagnostics, .. } = &err else { panic!("{err}") };
    assert_eq!(diagnostics.len(), 1);
    assert_eq!(diagnostics[0].line, 3);
}

#[test]
fn policy_preset_table_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let o = capdyn(&["--out", "res", "--set", "replicates=5", "reproduce", "fig6-policy"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("res/fig6-policy/policy.csv")).unwrap();
    let lines: Vec<&str> = text.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines[0], "practice_fraction,median_h,iqr_lo,iqr_hi");
    assert_eq!(lines.len(), 6);
}

#[test]
fn kbar_preset_has_five_rows_and_matching_json() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(capdyn(&["--out", "csv", "reproduce", "tab1-kbar"], tmp.path()).status.success());
    assert!(capdyn(&["--out", "json", "--format", "json", "reproduce", "tab1-kbar"], tmp.path()).status.success());

    let mut csv = csv::Reader::from_path(tmp.path().join("csv/tab1-kbar/kbar.csv")).unwrap();
    let header = csv.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = csv.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);

    let json: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("json/tab1-kbar/kbar.json")).unwrap()).unwrap();
    let jrows = json["rows"].as_array().unwrap();
    assert_eq!(jrows.len(), 5);
    for (r, j) in rows.iter().zip(jrows) {
        for (col, cell) in header.iter().zip(r.iter()) {
            match &j[col] {
                Value::Number(n) => assert_eq!(n.as_f64().unwrap(), cell.parse::<f64>().unwrap(), "{col}"),
                Value::String(s) => assert_eq!(s, cell),
                Value::Bool(b) => assert_eq!(b.to_string(), cell),
                other => panic!("{col}: {other}"),
            }
        }
    }
    assert_eq!(manifest(&tmp.path().join("json/tab1-kbar"))["format"], "json");
}

#[test]
fn manifest_lists_every_file_with_its_row_count() {
    let tmp = tempfile::tempdir().unwrap();
    let o = capdyn(&["--out", "res", "--seed", "5", "reproduce", "fig1-calibration"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("res/fig1-calibration");
    let m = manifest(&dir);
    assert_eq!(m["experiment"], "fig1-calibration");
    assert_eq!(m["seed"], 5);
    assert!(m["toolkit_version"].as_str().unwrap().split('.').count() == 3);
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let text = std::fs::read_to_string(dir.join(f["path"].as_str().unwrap())).unwrap();
        let data_lines = text.split("\r\n").filter(|l| !l.is_empty()).count() - 1;
        assert_eq!(f["rows"].as_u64().unwrap() as usize, data_lines);
    }
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["--out", out, "--set", "replicates=4", "--set", "abm.t_steps=60", "sweep", "--axis", "k_ai:0.6:0.95:8"];
    assert!(capdyn(&args("a"), tmp.path()).status.success());
    assert!(capdyn(&args("b"), tmp.path()).status.success());
    let a = std::fs::read(tmp.path().join("a/sweep/sweep.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/sweep/sweep.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn thread_env_var_is_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_capdyn"))
        .args(["--out", "res", "two-skill"])
        .current_dir(tmp.path())
        .env("CAPDYN_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest(&tmp.path().join("res/two-skill"))["threads"], 3);
}

#[test]
fn unknown_preset_lists_valid_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let o = capdyn(&["reproduce", "fig7-nothing"], tmp.path());
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("fig7-nothing"));
    for p in capdyn_cli::Preset::names() {
        assert!(err.contains(p), "{p} missing from: {err}");
    }
}

#[test]
fn unwritable_output_fails_before_computing() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("blocker"), b"").unwrap();
    let o = capdyn(&["--out", "blocker/res", "reproduce", "fig4-threshold"], tmp.path());
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("stage `output`") && err.contains("not writable"), "{err}");
}

#[test]
fn failing_stage_is_named_and_nothing_is_left_behind() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_capdyn"))
        .args(["--out", "res", "--data-dir", "missing", "calibrate"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stage `ingest`"), "{}", stderr(&o));
    assert!(!tmp.path().join("res/calibrate").exists());
}
