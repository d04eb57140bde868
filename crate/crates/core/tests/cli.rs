use pilot_field::cli_io::{emit_plot_data, output_root, read_table_csv, run_experiment, ExperimentConfig, ResultBundle, OUTPUT_ROOT_ENV};
use pilot_field::Error;
use std::process::Command;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

const HOLLAND_SCAN: &str = r#"
experiment = "overlap-scan"
seed = 5
[overlap]
family = "holland"
ns = [1, 2, 3, 4]
samples = 4000
"#;

const HIGGS: &str = r#"
experiment = "higgs-spectrum"
seed = 3
[higgs]
mu = 1.0
lambda = 0.5
charge = 0.3
box_length = 6.283185307179586
cutoff = 1.2
epsilons = [0.1, 0.01, 0.001]
"#;

#[test]
fn empty_config_names_missing_fields() {
    match ExperimentConfig::from_toml("") {
        Err(Error::Config(msg)) => {
            assert!(msg.contains("experiment") && msg.contains("seed"), "{msg}");
        }
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn experiment_fields_are_required() {
    let err = ExperimentConfig::from_toml("experiment = \"appendix-a\"\nseed = 1\n").unwrap_err().to_string();
    for f in ["appendix_a.grid_points", "appendix_a.alpha1", "appendix_a.particles"] {
        assert!(err.contains(f), "{err}");
    }
    let err = ExperimentConfig::from_toml("experiment = \"overlap-scan\"\nseed = 1\n[overlap]\nfamily = \"bosonic\"\nns = [1]\nsamples = 10\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("theory.kind") && err.contains("overlap.modes"), "{err}");
}

#[test]
fn unknown_names_are_rejected() {
    assert!(ExperimentConfig::from_toml("experiment = \"nope\"\nseed = 1\n").unwrap_err().to_string().contains("nope"));
    let text = format!("{HOLLAND_SCAN}\n[run]\nsamples = 3\nt_final = 1.0\ncheckpoints = 2\nextra = 4\n");
    assert!(ExperimentConfig::from_toml(&text).unwrap_err().to_string().contains("extra"));
}

#[test]
fn config_round_trips_through_toml() {
    for text in [HOLLAND_SCAN, HIGGS] {
        let c = config(text);
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }
}

#[test]
fn higgs_summary_reports_masses() {
    let dir = tempfile::tempdir().unwrap();
    let b = run_experiment(&config(HIGGS), dir.path()).unwrap();
    assert!(b.pass(), "{:?}", b.checks);
    let row = &b.tables["spectrum"].rows[0];
    let s2 = 2f64.sqrt();
    assert!((row[1] - s2).abs() < 1e-12 && (row[2] - 0.3 * s2).abs() < 1e-12);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("higgs-spectrum/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], serde_json::Value::Bool(true));
}

#[test]
fn artifacts_reload_equal() {
    let dir = tempfile::tempdir().unwrap();
    let b = run_experiment(&config(HOLLAND_SCAN), dir.path()).unwrap();
    let out = dir.path().join("overlap-scan");
    assert_eq!(ResultBundle::load(&out.join("bundle.json")).unwrap(), b);
    assert_eq!(read_table_csv(&out.join("overlap.csv")).unwrap(), b.tables["overlap"]);
    let text = std::fs::read_to_string(out.join("overlap.csv")).unwrap();
    assert!(!text.contains('\r') && text.starts_with("n,overlap,std_err,analytic\n"));
}

#[test]
fn plot_data_is_long_format() {
    let dir = tempfile::tempdir().unwrap();
    let b = run_experiment(&config(HOLLAND_SCAN), dir.path()).unwrap();
    let csv = emit_plot_data(&b, "overlap-scan").unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("series,x,y,y_err"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("estimate,")).count(), 4);
    assert_eq!(csv.lines().filter(|l| l.starts_with("analytic,")).count(), 4);
    let err = emit_plot_data(&b, "relaxation").unwrap_err().to_string();
    assert!(err.contains("relaxation") && err.contains("overlap-scan"), "{err}");
}

#[test]
fn appendix_a_summary_has_both_series() {
    let text = r#"
experiment = "appendix-a"
seed = 9
label = "quartic"
[appendix_a]
grid_points = 1024
extent = 60.0
sigma = 1.0
k0 = 0.0
alpha1 = 0.1
alpha2 = 0.5
t_final = 4.0
checkpoints = 5
particles = 10000
"#;
    let dir = tempfile::tempdir().unwrap();
    let b = run_experiment(&config(text), dir.path()).unwrap();
    let names: Vec<&str> = b.series.iter().map(|s| s.name.as_str()).collect();
    assert!(names.contains(&"correct") && names.contains(&"naive"));
    assert!(b.pass(), "{:?}", b.checks);
    assert!(dir.path().join("quartic/ks.csv").exists());
}

#[test]
fn output_root_follows_environment() {
    std::env::set_var(OUTPUT_ROOT_ENV, "/tmp/somewhere");
    assert_eq!(output_root(), std::path::PathBuf::from("/tmp/somewhere"));
    std::env::remove_var(OUTPUT_ROOT_ENV);
    assert_eq!(output_root(), std::path::PathBuf::from("runs"));
}

#[test]
fn binary_lists_and_validates() {
    let exe = env!("CARGO_BIN_EXE_pilot-field");
    let out = Command::new(exe).arg("list-experiments").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success());
    assert_eq!(text.lines().count(), 8);
    assert!(text.contains("gauge-equivalence"));

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "").unwrap();
    let out = Command::new(exe).arg("validate").arg(&empty).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("missing fields"));

    let good = dir.path().join("scan.toml");
    std::fs::write(&good, HOLLAND_SCAN).unwrap();
    let out = Command::new(exe).args(["run", good.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bundle = dir.path().join("overlap-scan/bundle.json");
    let out = Command::new(exe).args(["emit-plots", bundle.to_str().unwrap(), "overlap-scan"]).output().unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("series,x,y,y_err"));
}
