mod common;

use std::path::Path;
use std::process::{Command, Output};

fn milo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_milo"))
        .args(args)
        .env_remove("MILO_STREAM_KEY")
        .output()
        .expect("run milo")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_golden_csv(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("train.csv");
    std::fs::write(&path, "x1,x2,y\n1,1,6\n1,2,8\n2,2,9\n2,3,11\n").unwrap();
    path
}

#[test]
fn train_then_predict_gives_sixteen() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_golden_csv(dir.path());
    let model = dir.path().join("lr.json");
    let o = milo(&["train", "--model", "LinearRegression", "--data", p(&train), "--target", "y", "--out", p(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let query = dir.path().join("query.csv");
    std::fs::write(&query, "x1,x2\n3,5\n").unwrap();
    let o = milo(&["predict", "--model", p(&model), "--data", p(&query)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("prediction"));
    let y: f64 = lines.next().unwrap().parse().unwrap();
    assert!((y - 16.0).abs() <= 1e-9, "{out}");
}

#[test]
fn predict_writes_csv_and_drops_the_target_column() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("tree.json");
    let labels = dir.path().join("labels.csv");
    std::fs::write(&labels, "a,b,label\n0,0,2\n0,1,2\n5,5,7\n5,6,7\n").unwrap();
    assert_eq!(
        milo(&["train", "--model", "decision-tree-classifier", "--data", p(&labels), "--target", "label", "--out", p(&model)])
            .status
            .code(),
        Some(0)
    );
    let out = dir.path().join("pred.csv");
    let o = milo(&["predict", "--model", p(&model), "--data", p(&labels), "--target", "label", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "prediction\n2\n2\n7\n7\n");
}

#[test]
fn validate_accepts_the_reference_file_and_rejects_executable_content() {
    let dir = tempfile::tempdir().unwrap();
    let good = common::fixture("golden_linear_regression.json");
    assert_eq!(milo(&["validate", p(&good)]).status.code(), Some(0));

    let bad = dir.path().join("bad.json");
    let text = common::golden_text().replacen("\"rank_\": 2", "\"rank_\": {\"py/reduce\": []}", 1);
    std::fs::write(&bad, text).unwrap();
    let o = milo(&["validate", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("py/reduce") || String::from_utf8_lossy(&o.stderr).contains("py/reduce"));
}

#[test]
fn inspect_summarizes_a_model() {
    let o = milo(&["inspect", p(&common::fixture("golden_linear_regression.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("LinearRegression"), "{out}");
    assert!(out.contains("coef_"), "{out}");
}

#[test]
fn keygen_sign_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (secret, public) = (dir.path().join("k.sec"), dir.path().join("k.pub"));
    assert_eq!(milo(&["keygen", "--secret", p(&secret), "--public", p(&public)]).status.code(), Some(0));

    let model = dir.path().join("m.json");
    std::fs::write(&model, common::golden_text()).unwrap();
    let signed = dir.path().join("m.signed.json");
    assert_eq!(milo(&["sign", p(&model), "--key", p(&secret), "--out", p(&signed)]).status.code(), Some(0));
    assert_eq!(milo(&["verify", p(&signed), "--key", p(&public)]).status.code(), Some(0));

    let text = std::fs::read_to_string(&signed).unwrap();
    std::fs::write(&signed, text.replacen("\"rank_\": 2", "\"rank_\": 3", 1)).unwrap();
    assert_eq!(milo(&["verify", p(&signed), "--key", p(&public)]).status.code(), Some(1));
}

#[test]
fn qc_exits_zero_and_reports() {
    let o = milo(&["qc", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("passed"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_golden_csv(dir.path());
    let out = dir.path().join("x.json");
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["frobnicate"],
        vec!["train", "--data", p(&train)],
        vec!["train", "--model", "Perceptron", "--data", p(&train), "--target", "y", "--out", p(&out)],
        vec!["train", "--model", "LinearRegression", "--data", p(&train), "--out", p(&out)],
        vec!["serve", "--port", "0"],
        vec!["qc", "--seed", "minus-one"],
    ];
    for args in cases {
        assert_eq!(milo(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn operational_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(milo(&["inspect", p(&missing)]).status.code(), Some(1));
    let query = dir.path().join("q.csv");
    std::fs::write(&query, "a\n1\n").unwrap();
    assert_eq!(milo(&["predict", "--model", p(&missing), "--data", p(&query)]).status.code(), Some(1));
}

#[test]
fn serve_and_call_over_loopback() {
    use std::io::{BufRead, BufReader};
    use std::process::Stdio;

    let key = "11".repeat(32);
    let mut server = Command::new(env!("CARGO_BIN_EXE_milo"))
        .args(["serve", "--model", p(&common::fixture("golden_linear_regression.json")), "--port", "0"])
        .env("MILO_STREAM_KEY", &key)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").expect(&line).to_owned();

    let dir = tempfile::tempdir().unwrap();
    let query = dir.path().join("q.csv");
    std::fs::write(&query, "x1,x2\n3,5\n").unwrap();
    let call = |key: &str| {
        Command::new(env!("CARGO_BIN_EXE_milo"))
            .args(["call", "predict", "--url", &url, "--data", p(&query)])
            .env("MILO_STREAM_KEY", key)
            .output()
            .unwrap()
    };
    let ok = call(&key);
    let wrong = call(&"22".repeat(32));
    server.kill().unwrap();
    server.wait().unwrap();

    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let y: f64 = stdout(&ok).lines().nth(1).unwrap().parse().unwrap();
    assert!((y - 16.0).abs() <= 1e-9);
    assert_eq!(wrong.status.code(), Some(1));
}
