//! The `pscdn` binary end to end.

use std::fs;
use std::process::{Command, Output};

fn pscdn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pscdn")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn count_params_default_network() {
    let o = pscdn(&["count-params"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "88833");
    let o = pscdn(&["count-params", "--model", "pscn-a", "--n", "60"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).trim().parse::<usize>().unwrap() > 0);
}

#[test]
fn generate_train_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("test.qps");
    let out = dir.path().join("run");
    let o = pscdn(&["generate-data", "--count", "300", "--seed", "4", "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");

    let config = dir.path().join("cfg.txt");
    fs::write(&config, "n = 8\nepochs = 2\nbatch_size = 50\ntrain_size = 200\nval_size = 50\ntest_size = 100\nsnr_grid = 10\n")
        .unwrap();
    let o = pscdn(&["train", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--cr", "3/9"]);
    assert!(o.status.success(), "{o:?}");
    let weights = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "pscd"))
        .expect("weights written");

    let args = ["eval", "--weights", weights.to_str().unwrap(), "--data", data.to_str().unwrap(), "--snr-db", "-5"];
    let o = pscdn(&args);
    assert!(o.status.success(), "{o:?}");
    let line = stdout(&o);
    assert!(line.contains("C=3") && line.contains("NMSE"), "{line}");
    assert_eq!(pscdn(&args).stdout, o.stdout, "evaluation is deterministic");
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "unknown_key = 1\n").unwrap();
    let o = pscdn(&["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown_key"));

    assert_eq!(pscdn(&["train", "--cr", "9/9"]).status.code(), Some(1));
    assert_eq!(pscdn(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(pscdn(&["eval", "--weights", "/nonexistent.pscd"]).status.code(), Some(3));
    assert_eq!(pscdn(&["--help"]).status.code(), Some(0));
}
