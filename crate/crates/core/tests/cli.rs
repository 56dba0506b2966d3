use std::path::Path;
use std::process::{Command, Output};

fn fock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fock-metrology")).args(args).output().expect("binary runs")
}

fn run_config(dir: &Path, config: &str, out: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("scenario.cfg");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join(out);
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    fock(&args)
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = "kind = mle-sim\nm = 3\nN_c = 1.0\nM = 200\ntrials = 40\nseed = 7\n";
    assert!(run_config(dir.path(), config, "a.csv", &[]).status.success());
    assert!(run_config(dir.path(), config, "b.csv", &[]).status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);

    assert!(run_config(dir.path(), config, "c.csv", &["--seed", "8"]).status.success());
    let c = std::fs::read(dir.path().join("c.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn output_starts_with_metadata_then_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), "kind = fisher-scan\nm = 0,1,2\nN_c = 0.5\n", "f.csv", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    let header = lines.next().unwrap();
    assert!(header.contains(','), "{header}");
    assert_eq!(lines.count(), 3);
    assert!(text.contains("# scenario.seed: 42"));
}

#[test]
fn unknown_preset_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let res = fock(&["run", "--preset", "fig99", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("fig1a") && err.contains("flucC"), "{err}");
    assert!(!out.exists());
}

#[test]
fn config_errors_report_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_config(dir.path(), "kind = moments\n\nbogus = 1\n", "x.csv", &[]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3") && err.contains("bogus"), "{err}");

    let res = run_config(dir.path(), "kind = moments\nm = -1\n", "x.csv", &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains('m'));

    let res = run_config(dir.path(), "m = 3\n", "x.csv", &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("kind"));
}

#[test]
fn trials_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), "kind = mle-sim\nm = 1\nN_c = 0.5\nM = 100\n", "t.csv", &["--trials", "12"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(text.contains("# scenario.trials: 12"), "{text}");
}
