use std::path::Path;
use std::process::{Command, Output};

fn arim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arim")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path) {
    let out = arim(&["synth", "--out", dir.to_str().unwrap(), "--length", "400", "--seed", "3"]);
    assert!(stdout(&out).contains("400 rows"));
}

#[test]
fn synth_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let prices = std::fs::read_to_string(dir.path().join("prices.csv")).unwrap();
    let sentiment = std::fs::read_to_string(dir.path().join("sentiment.csv")).unwrap();
    assert_eq!(prices.lines().count(), 401);
    assert_eq!(sentiment.lines().count(), 401);
}

#[test]
fn train_then_report_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let (prices, sentiment, report, ckpt) = (path("prices.csv"), path("sentiment.csv"), path("report.json"), path("rnn.ckpt"));
    let common = ["--prices", &prices, "--sentiment", &sentiment, "--bivariate", "--lookback", "5", "--epochs", "2", "--seed", "1"];

    let mut args = vec!["train"];
    args.extend(common);
    args.extend(["--model", "rnn,alpha_t_rim", "--report", &report]);
    let table = stdout(&arim(&args));
    assert!(table.contains("alpha_t-RIM"));
    assert!(table.contains("RNN"));

    let rendered = stdout(&arim(&["report", "--input", &report]));
    assert_eq!(rendered, table);
    let json = stdout(&arim(&["report", "--input", &report, "--format", "json"]));
    assert_eq!(json, std::fs::read_to_string(&report).unwrap());

    let mut args = vec!["train"];
    args.extend(common);
    args.extend(["--model", "rnn", "--checkpoint", &ckpt]);
    stdout(&arim(&args));
    let mut args = vec!["evaluate", "--checkpoint", &ckpt];
    args.extend(common);
    assert!(stdout(&arim(&args)).contains("RNN"));
}

#[test]
fn gradcheck_passes_for_every_model() {
    let text = stdout(&arim(&["gradcheck"]));
    assert_eq!(text.lines().filter(|l| l.ends_with("PASS")).count(), 3, "{text}");
}

#[test]
fn gradcheck_fails_below_attainable_tolerance() {
    let out = arim(&["gradcheck", "--model", "lstm", "--tolerance", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn rejects_misspelled_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[training]\nepoch = 3\n").unwrap();
    let out = arim(&["train", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));
}

#[test]
fn rejects_unsupported_lookback() {
    let out = arim(&["train", "--lookback", "7"]);
    assert!(!out.status.success());
}

#[test]
fn checkpoint_needs_single_model() {
    let out = arim(&["train", "--model", "rnn,lstm", "--checkpoint", "x.ckpt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("single"));
}
