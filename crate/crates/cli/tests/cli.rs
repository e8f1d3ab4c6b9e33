use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn worknet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_worknet"))
        .args(args)
        .output()
        .expect("binary runs")
}

const MODEL: [&str; 14] = [
    "--d", "1", "--L", "30", "--Lz", "60", "--Q", "60", "--beta", "0.1", "--gamma", "0.3",
    "--iters", "200",
];

fn with_model<'a>(command: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![command];
    args.extend(MODEL);
    args.extend(extra);
    args
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = worknet(&with_model("run", &["--seed", "1", "--out-dir", out_dir]));
    assert!(out.status.success(), "{}", stderr(&out));
    for name in [
        "timeseries.csv",
        "profile.csv",
        "snapshot.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let ts = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    assert_eq!(ts.lines().count(), 201);
}

#[test]
fn invalid_gamma_exits_one_and_names_it() {
    let mut args = with_model("run", &[]);
    let at = args.iter().position(|a| *a == "0.3").unwrap();
    args[at] = "1.5";
    let out = worknet(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("gamma"));
}

#[test]
fn validation_failures_exit_one() {
    for args in [
        vec!["figure", "9"],
        with_model("run", &["--variant", "lazy"]),
        with_model("run", &["--seed", "1,2"]),
        vec!["run", "--d", "1"],
        vec!["run", "--no-such-flag"],
    ] {
        let out = worknet(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn io_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = worknet(&with_model(
        "run",
        &["--out-dir", blocker.to_str().unwrap()],
    ));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("file"));
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("sweep.conf");
    fs::write(
        &conf,
        "d = 1\nL = 20\nLz = 30\nQ = 20\nbeta = 0.05, 0.5\ngamma = 0.3\niters = 50\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = worknet(&[
        "sweep",
        "--config",
        conf.to_str().unwrap(),
        "--seeds",
        "1..3",
        "--observables",
        "depth,n_t",
        "--workers",
        "2",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let sweep = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(
        lines[0],
        "beta,depth_mean,depth_sd,n_t_mean,n_t_sd,n_seeds,n_errors"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",3,0"));
}

#[test]
fn figure_with_reduced_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let out = worknet(&[
        "figure",
        "3",
        "--iters",
        "50",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(Path::new(&dir.path().join("runs/p0002-s1/profile.csv")).exists());
}
