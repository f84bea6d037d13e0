use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn qh_in(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qh"))
        .args(args)
        .current_dir(cwd)
        .env_remove("QH_OUTPUT_DIR")
        .env("RUST_LOG", "error")
        .output()
        .expect("run qh")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Rows of a CSV file without the header.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn mode_choice(path: &Path) -> String {
    rows(path)
        .into_iter()
        .max_by(|a, b| a[4].parse::<f64>().unwrap().total_cmp(&b[4].parse::<f64>().unwrap()))
        .unwrap()[3]
        .clone()
}

#[test]
fn predict_examples() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();

    let r = qh_in(dir.path(), &["predict", "--game", "ultimatum:0-50", "--model", "nash", "--out", o]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(mode_choice(&out.join("prediction.csv")), "49");

    let r = qh_in(dir.path(), &["predict", "--game", "ultimatum:10-10", "--model", "nash", "--out", o]);
    assert!(r.status.success());
    assert_eq!(mode_choice(&out.join("prediction.csv")), "89");

    let r = qh_in(dir.path(), &["predict", "--game", "beauty:lab", "--model", "levelk:k=1", "--out", o]);
    assert!(r.status.success());
    let pred = rows(&out.join("prediction.csv"));
    assert_eq!(pred.len(), 101);
    for row in &pred {
        let p: f64 = row[4].parse().unwrap();
        assert_eq!(p, if row[3] == "33" { 1.0 } else { 0.0 });
    }

    let r = qh_in(
        dir.path(),
        &["predict", "--game", "centipede:4", "--model", "qh:beta=0,gamma=0.5", "--out", o],
    );
    assert!(r.status.success());
    let policy = rows(&out.join("policy.csv"));
    assert_eq!(policy.len(), 8);
    assert!(policy.iter().all(|row| row[4].parse::<f64>().unwrap() == 0.5));
}

#[test]
fn config_errors_exit_2_before_any_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    for args in [
        vec!["predict", "--game", "chess:1", "--model", "nash", "--out", o],
        vec!["predict", "--game", "beauty:lab", "--model", "qh:beta=1,gama=0.5", "--out", o],
        vec!["predict", "--game", "beauty:lab", "--model", "qh:beta=-1,gamma=0.5", "--out", o],
        vec!["predict", "--game", "market:block1", "--model", "aqre:lambda=1", "--out", o],
        vec!["sensitivity", "--game", "centipede:4", "--model", "qh:beta=1,gamma=0.5", "--out", o],
        vec!["sensitivity", "--game", "ultimatum:10-10", "--model", "qh:beta=1,gamma=0.5", "--out", o],
        vec!["evaluate", "--out", o],
        vec!["evaluate", "--data", "x.csv", "--models", "qh,foo", "--out", o],
        vec!["predict", "--no-such-flag"],
    ] {
        let r = qh_in(dir.path(), &args);
        assert_eq!(r.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(!r.stderr.is_empty());
    }
    assert!(!out.exists());
}

#[test]
fn negative_count_exits_4_naming_the_record() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(
        &data,
        "game,role,choice,count\nbeauty:lab,player,30,4\nbeauty:lab,player,40,-2\n",
    )
    .unwrap();
    let r = qh_in(dir.path(), &["evaluate", "--data", data.to_str().unwrap(), "--out", "out"]);
    assert_eq!(r.status.code(), Some(4));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("record 2"), "{err}");
}

#[test]
fn single_game_single_model_report() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("obs.csv");
    fs::write(
        &data,
        "game,role,choice,count\ncentipede:4,outcome,take1,5\ncentipede:4,outcome,take2,9\n\
         centipede:4,outcome,take3,4\ncentipede:4,outcome,pass,2\n",
    )
    .unwrap();
    let r = qh_in(
        dir.path(),
        &["evaluate", "--data", data.to_str().unwrap(), "--models", "qh", "--budget", "50", "--out", "out"],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let report = rows(&dir.path().join("out/report.csv"));
    assert_eq!(report.len(), 3);
    assert!(report.iter().all(|row| row[5] == "1"));
    assert_eq!(report[0][0], "Centipede");
    assert_eq!(rows(&dir.path().join("out/folds.csv")).len(), 10);
}

#[test]
fn fixture_bundle_matches_frozen_report() {
    let dir = TempDir::new().unwrap();
    let data = fixtures().join("observations.csv");
    let r = qh_in(
        dir.path(),
        &["evaluate", "--seed", "7", "--budget", "200", "--data", data.to_str().unwrap(), "--out", "out"],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let got = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    let want = fs::read_to_string(fixtures().join("expected/report.csv")).unwrap();
    assert_eq!(got, want);
    let header = got.lines().next().unwrap();
    assert_eq!(header, "game_class,experiment,model,rmse_mean,rmse_std,rank");
    let report = rows(&dir.path().join("out/report.csv"));
    let models: std::collections::BTreeSet<&str> = report.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(models.len(), 5);
    // tie-averaged ranks survive into the report
    assert!(report.iter().any(|r| r[5] == "3.5"));
}

#[test]
fn sensitivity_trivial_cases_have_zero_deviation() {
    let dir = TempDir::new().unwrap();
    for model in ["qh:beta=0,gamma=0.7", "qh:beta=0.4,gamma=0"] {
        let r = qh_in(dir.path(), &["sensitivity", "--game", "beauty:lab", "--model", model, "--out", "out"]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let sweep = rows(&dir.path().join("out/sensitivity.csv"));
        assert_eq!(sweep.len(), 1000);
        for row in &sweep {
            let e: f64 = row[1].parse().unwrap();
            assert!((1e-9..=1e-7).contains(&e));
            assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn export_plot_data() {
    let dir = TempDir::new().unwrap();
    let r = qh_in(
        dir.path(),
        &["export-plot-data", "--game", "ultimatum:0-50", "--game", "market:block2", "--game", "beauty:lab", "--out", "out"],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let out = dir.path().join("out");

    let heat = rows(&out.join("heatmap.csv"));
    let zero: Vec<f64> = heat
        .iter()
        .filter(|r| r[1] == "false" && r[2] == "0")
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert_eq!(zero.len(), 11);
    assert!(zero.iter().all(|v| (v - zero[0]).abs() < 1e-12));

    let meta = rows(&out.join("metadata.csv"));
    assert!(meta
        .iter()
        .any(|r| r[0] == "ultimatum:0-50" && r[1] == "nash_mode" && r[2] == "49"));

    let series = rows(&out.join("series.csv"));
    let market: Vec<&Vec<String>> = series.iter().filter(|r| r[0] == "market:block2").collect();
    let models: std::collections::BTreeSet<&str> = market.iter().map(|r| r[1].as_str()).collect();
    assert!(!models.is_empty());
    for m in &models {
        assert_eq!(market.iter().filter(|r| r[1] == *m).count(), 10);
    }
    let overlay = rows(&out.join("sensitivity_overlay.csv"));
    assert!(overlay.iter().any(|r| r[0] == "beauty:lab"));
}

#[test]
fn writes_stay_inside_the_output_directory() {
    let dir = TempDir::new().unwrap();
    let data = fixtures().join("observations.csv");
    let d = data.to_str().unwrap();
    for args in [
        vec!["predict", "--game", "twostage:D0.9", "--model", "nash"],
        vec!["fit", "--data", d, "--game", "beauty:lab", "--budget", "20"],
        vec!["export-plot-data", "--data", d, "--game", "centipede:4", "--budget", "20"],
        vec!["synth", "--game", "beauty:lab", "--model", "nash"],
        vec!["list-games"],
    ] {
        let r = Command::new(env!("CARGO_BIN_EXE_qh"))
            .args(&args)
            .current_dir(dir.path())
            .env("QH_OUTPUT_DIR", "from-env")
            .env("RUST_LOG", "error")
            .output()
            .unwrap();
        assert!(r.status.success(), "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
    }
    let entries: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(entries, vec!["from-env".to_string()]);
    assert!(dir.path().join("from-env/fit.csv").exists());
}

#[test]
fn help_lists_every_game_key_and_family() {
    let r = qh_in(Path::new("."), &["--help"]);
    assert!(r.status.success());
    let text = String::from_utf8_lossy(&r.stdout);
    for key in ["market:block", "beauty:", "centipede:", "ultimatum:", "twostage:", "lab", "theorists"] {
        assert!(text.contains(key), "missing {key}");
    }
    for fam in ["qh:", "levelk:", "ch:", "qre:", "aqre:", "nash"] {
        assert!(text.contains(fam), "missing {fam}");
    }
    let sub = qh_in(Path::new("."), &["evaluate", "--help"]);
    assert!(String::from_utf8_lossy(&sub.stdout).contains("twostage:"));
}

#[test]
fn synth_then_fit_round_trip() {
    let dir = TempDir::new().unwrap();
    let r = qh_in(
        dir.path(),
        &["synth", "--game", "market:block3", "--model", "levelk:k=2", "--units", "50", "--out", "out"],
    );
    assert!(r.status.success());
    let data = dir.path().join("out/observations.csv");
    let r = qh_in(
        dir.path(),
        &["fit", "--data", data.to_str().unwrap(), "--models", "levelk", "--out", "out"],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let fit = rows(&dir.path().join("out/fit.csv"));
    assert_eq!(fit.len(), 1);
    assert_eq!(fit[0][2], "levelk:k=2");
}
