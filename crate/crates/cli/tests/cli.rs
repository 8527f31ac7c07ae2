use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"users = 2
antennas = 4
alpha_s = 4
alpha_x = 4
snr_grid_db = [0, 10]
methods = ["QMSEP-UQ", "QMSEP-BnB"]
trials = 20
symbols_per_channel = 5
seed = 7
"#;

fn msep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msep")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_prints_header_and_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = msep(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,snr_db,ser,std_err,errors,decisions,seed");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("QMSEP-UQ,0,"));
    assert!(lines.iter().skip(1).all(|l| l.ends_with(",200,7")), "{text}");
    assert!(stderr(&o).contains("QMSEP-BnB"));
}

#[test]
fn reruns_are_byte_identical_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = msep(&["run", &cfg, "--out", p.to_str().unwrap(), "--threads", "1"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = msep(&["run", &cfg, "--seed", "8", "--trials", "4"]);
    let text = stdout(&o);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",40,8")), "{text}");
}

#[test]
fn unknown_config_key_exits_2_and_names_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{CONFIG}antenas = 5\n"));
    let o = msep(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("antenas") && err.contains("line 10"), "{err}");
}

#[test]
fn missing_config_and_bad_arguments_exit_2() {
    assert_eq!(msep(&["run", "/nonexistent/run.toml"]).status.code(), Some(2));
    assert_eq!(msep(&["launch"]).status.code(), Some(2));
    assert_eq!(msep(&["verify", "gradient"]).status.code(), Some(2));
    assert_eq!(msep(&["verify", "gradients", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn unknown_figure_exits_2() {
    let o = msep(&["figure", "fig-9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fig-qpsk-k2m5"));
}

#[test]
fn small_figure_run_is_skipped_not_judged() {
    let o = msep(&["figure", "fig-qpsk-k2m5", "--trials", "30"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("insufficient samples, skipped"));
}

#[test]
fn verify_suite_reports_each_property() {
    let o = msep(&["verify", "gradients", "--trials", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS ")).count(), 2, "{text}");
}
