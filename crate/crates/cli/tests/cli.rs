use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointshrink")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read_matrix(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const FIXTURE: &str = "x,y,group\n1,0,a\n-1,0,a\n0,1,a\n0,-1,a\n10,0,b\n12,0,b\n11,2,b\n11,-2,b\n";

#[test]
fn estimate_at_beta_one_gives_sample_scatter() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "train.csv", FIXTURE);
    let out = dir.path().join("out");
    let status = run(&[
        "estimate", "--input", input.to_str().unwrap(), "--proposal", "prop1", "--beta", "1",
        "--out-dir", out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", stderr(&status));
    let expected = [[[0.5, 0.0], [0.0, 0.5]], [[0.5, 0.0], [0.0, 2.0]]];
    for (k, e) in expected.iter().enumerate() {
        let path = out.join(format!("sigma_{}.csv", k + 1));
        let m = read_matrix(&path);
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[i][j] - e[i][j]).abs() < 1e-12, "sigma_{} ({i},{j}) = {}", k + 1, m[i][j]);
            }
        }
        // Every entry carries 17 significant digits and survives a reprint.
        for cell in fs::read_to_string(&path).unwrap().trim().split([',', '\n']) {
            let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
            let v: f64 = cell.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), cell);
        }
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["labels"], serde_json::json!(["a", "b"]));
}

#[test]
fn tyler_without_enough_points_is_a_solver_failure() {
    let dir = TempDir::new().unwrap();
    let input = write(
        dir.path(),
        "small.csv",
        "x,y,z,group\n1,0,0,a\n0,1,0,a\n1,2,3,b\n3,1,2,b\n2,3,1,b\n-1,2,-3,b\n2,-1,1,b\n",
    );
    let out = dir.path().join("out");
    let status = run(&[
        "estimate", "--input", input.to_str().unwrap(), "--loss", "tyler", "--proposal", "prop1",
        "--penalty", "ellipticity", "--beta", "1", "--center", "none", "--out-dir", out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(3), "{}", stderr(&status));
    assert!(stderr(&status).contains("condition"), "{}", stderr(&status));
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn malformed_input_exits_with_code_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let bad_value = write(dir.path(), "bad.csv", "x,y,group\n1,oops,a\n2,3,a\n");
    let status = run(&["estimate", "--input", bad_value.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(2));
    assert!(stderr(&status).contains("'y'"), "{}", stderr(&status));

    let no_group = write(dir.path(), "nogroup.csv", "x,y\n1,2\n3,4\n");
    let status = run(&["estimate", "--input", no_group.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(2));
    assert!(stderr(&status).contains("group"));

    let good = write(dir.path(), "good.csv", FIXTURE);
    let status = run(&["estimate", "--input", good.to_str().unwrap(), "--loss", "cauchy", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(2));
    assert!(stderr(&status).contains("--loss"));

    let status = run(&["estimate", "--input", good.to_str().unwrap(), "--beta", "1.5", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn cross_validation_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("x,y,group\n");
    for i in 0..12 {
        let t = i as f64;
        csv.push_str(&format!("{},{},a\n", (t * 1.7).sin() * 2.0, (t * 0.9).cos()));
        csv.push_str(&format!("{},{},b\n", 5.0 + (t * 1.3).cos(), (t * 2.1).sin() * 3.0));
    }
    let input = write(dir.path(), "cv.csv", &csv);
    let cv = |out: &Path, grid: &str| {
        run(&[
            "cv", "--input", input.to_str().unwrap(), "--loss", "huber", "--beta-grid", grid, "--folds", "3",
            "--seed", "7", "--out-dir", out.to_str().unwrap(),
        ])
    };
    let single = dir.path().join("single");
    assert!(cv(&single, "0.4").status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(single.join("cv_report.json")).unwrap()).unwrap();
    assert_eq!(report["chosen_beta"], 0.4);

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(cv(&a, "0.2,0.5,0.9").status.success());
    assert!(cv(&b, "0.2,0.5,0.9").status.success());
    assert_eq!(fs::read(a.join("cv_report.json")).unwrap(), fs::read(b.join("cv_report.json")).unwrap());
    assert_eq!(fs::read(a.join("cv_curve.csv")).unwrap(), fs::read(b.join("cv_curve.csv")).unwrap());
}

#[test]
fn train_and_predict() {
    let dir = TempDir::new().unwrap();
    let train = write(dir.path(), "train.csv", FIXTURE);
    let model_dir = dir.path().join("model");
    let status = run(&[
        "rda-train", "--input", train.to_str().unwrap(), "--proposal", "prop1", "--beta", "1",
        "--out-dir", model_dir.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", stderr(&status));
    let model = model_dir.join("model.json");

    let pred_dir = dir.path().join("pred");
    let status = run(&[
        "rda-predict", "--model", model.to_str().unwrap(), "--input", train.to_str().unwrap(),
        "--out-dir", pred_dir.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    assert!(String::from_utf8_lossy(&status.stdout).contains("misclassified 0 of 8"));

    // Class a: mean 0, scatter diag(0.5, 0.5); class b: mean (11, 0), scatter diag(0.5, 2).
    let queries = write(dir.path(), "queries.csv", "x,y\n0,0\n11,0\n5,1\n6,2\n");
    let status = run(&[
        "rda-predict", "--model", model.to_str().unwrap(), "--input", queries.to_str().unwrap(),
        "--out-dir", pred_dir.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let ln = 0.25f64.ln();
    let expected = [("a", ln, 242.0), ("b", 242.0 + ln, 0.0), ("a", 52.0 + ln, 72.5), ("b", 80.0 + ln, 52.0)];
    let text = fs::read_to_string(pred_dir.join("predictions.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,predicted,score_a,score_b"));
    for ((label, sa, sb), line) in expected.iter().zip(lines) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[1], *label);
        let (a, b): (f64, f64) = (cells[2].parse().unwrap(), cells[3].parse().unwrap());
        assert!((a - sa).abs() < 1e-10 && (b - sb).abs() < 1e-10, "{line}");
    }

    let wide = write(dir.path(), "wide.csv", "x,y,z\n1,2,3\n");
    let status = run(&[
        "rda-predict", "--model", model.to_str().unwrap(), "--input", wide.to_str().unwrap(),
        "--out-dir", pred_dir.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn reproduce_smoke_run_is_repeatable() {
    let dir = TempDir::new().unwrap();
    let go = |out: &Path| {
        run(&[
            "reproduce", "table1", "--trials", "1", "--seed", "3", "--k", "5", "--p", "20",
            "--out-dir", out.to_str().unwrap(),
        ])
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let status = go(&a);
    assert!(status.status.success(), "{}", stderr(&status));
    assert!(go(&b).status.success());
    for name in ["table1_gaussian_k5_p20.csv", "table1_t2_k5_p20.csv"] {
        let text = fs::read_to_string(a.join(name)).unwrap();
        assert_eq!(text.as_bytes(), fs::read(b.join(name)).unwrap().as_slice());
        assert_eq!(text.lines().count(), 12);
        let qda = text.lines().find(|l| l.starts_with("QDA,")).unwrap();
        assert!(qda.contains("n_k"), "{qda}");
        let lda = text.lines().find(|l| l.starts_with("LDA,")).unwrap();
        assert!(lda.split(',').nth(1).is_some_and(|m| !m.is_empty()));
    }
    let provenance: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("table1_provenance.json")).unwrap()).unwrap();
    assert_eq!(provenance[0]["defaults"]["huber_quantile"], 0.9);
}

#[test]
fn reproduce_iris_smoke_run() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("iris");
    let status = run(&["reproduce", "table3", "--trials", "1", "--out-dir", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", stderr(&status));
    let text = fs::read_to_string(out.join("table3.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 9 * 4);
}
