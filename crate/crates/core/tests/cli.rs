use std::path::Path;
use std::process::{Command, Output};

use ood_lab::config::ExperimentConfig;
use ood_lab::report::{load_summary, load_verdicts};

fn ood_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ood-lab")).args(args).output().unwrap()
}

fn repo_config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn quick_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("quick.conf");
    std::fs::write(
        &path,
        format!("train.epochs=60\neval_samples_per_distribution=400\nverify.lemma1_epochs=20\n{extra}"),
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn shipped_config_is_the_default_protocol() {
    let cfg = ExperimentConfig::load(Path::new(&repo_config("default.conf"))).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    assert!(ExperimentConfig::load(Path::new(&repo_config("custom_example.conf")))
        .unwrap()
        .custom_scenario
        .is_some());
}

#[test]
fn table1_writes_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = quick_config(dir.path(), "");
    let o = ood_lab(&["run", "--suite", "table1", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "suite,scenario,detector,seed,auroc");
    // 6 scenarios × 3 detectors × 3 seeds
    assert_eq!(lines.len() - 1, 54);
    for seed in 1..=3 {
        assert!(out.join(format!("trace_{seed}.csv")).exists());
    }

    let summary = load_summary(&out).unwrap();
    assert_eq!(summary.cells.len(), 18);
    for cell in &summary.cells {
        let values: Vec<f64> = lines[1..]
            .iter()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[1] == cell.scenario && f[2] == cell.detector)
            .map(|f| f[4].parse().unwrap())
            .collect();
        assert_eq!(values.len(), 3);
        let mean = values.iter().sum::<f64>() / 3.0;
        // CSV values carry six significant digits.
        assert!((mean - cell.mean).abs() < 1e-5, "{cell:?}");
    }

    let report = ood_lab(&["report", "--in", out.to_str().unwrap()]);
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("shift/c_mm") && text.contains("GradNorm"));
}

#[test]
fn seeds_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = quick_config(dir.path(), "");
    let o = ood_lab(&[
        "run", "--suite", "table2", "--config", &cfg, "--out", out.to_str().unwrap(), "--seeds", "5,9",
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count() - 1, 4 * 3 * 2);
    assert!(csv.lines().skip(1).all(|l| l.contains(",5,") || l.contains(",9,")));
}

#[test]
fn verify_exit_code_tracks_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero");
    let cfg = quick_config(dir.path(), "train.epochs=0\nseeds=1\n");
    let o = ood_lab(&["run", "--suite", "verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(load_verdicts(&out).unwrap().iter().all(|v| v.pass));

    // Without weight decay and with a large step the covariate weights never settle.
    let out = dir.path().join("loose");
    let cfg = quick_config(
        dir.path(),
        "seeds=1\ntrain.weight_decay=0\ntrain.learning_rate=0.5\ntrain.momentum=0\ntrain.samples_per_class_per_epoch=5\n",
    );
    let o = ood_lab(&["run", "--suite", "verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let verdicts = load_verdicts(&out).unwrap();
    let prop2 = verdicts.iter().find(|v| v.name.starts_with("prop2")).unwrap();
    assert!(!prop2.pass);
    assert!(prop2.warning.as_deref().unwrap().contains("unsupported config"));
}

#[test]
fn bad_input_exits_with_usage_or_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "sigma=2\nnot_a_key=1\n").unwrap();
    let o = ood_lab(&["run", "--suite", "table1", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = ood_lab(&["run", "--suite", "table9"]);
    assert!(!o.status.success());

    let o = ood_lab(&["report", "--in", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn custom_suite_runs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = quick_config(
        dir.path(),
        "seeds=1\nscenario.label=far\nscenario.ood_semantic=-4,4,0,0\nscenario.ood_covariate=0,0,2,2\n",
    );
    let o = ood_lab(&["run", "--suite", "custom", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count() - 1, 3);
    assert!(csv.contains("custom,far,MSP,1,"));
}
