//! End-to-end checks of the `mvl` binary: exit codes, configuration
//! layering, and output shapes.

use std::io::Write;
use std::process::Command;

fn corpus(name: &str) -> String {
    mvl::corpus::default_corpus_dir()
        .join(name)
        .to_str()
        .unwrap()
        .to_string()
}

struct Run {
    stdout: String,
    stderr: String,
    code: i32,
}

fn mvl_with(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mvl"));
    cmd.args(args).env_remove("MVL_CONFIG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("run mvl");
    Run {
        stdout: String::from_utf8(out.stdout).expect("utf8"),
        stderr: String::from_utf8(out.stderr).expect("utf8"),
        code: out.status.code().unwrap_or(-1),
    }
}

fn mvl(args: &[&str]) -> Run {
    mvl_with(args, &[])
}

// The .mvl CONFIG header only drives corpus evaluation; direct commands
// take the universe from flags, so tests pin the same universe the
// corpus expectations were recorded under.
const FIG1: &[&str] = &["--ints", "0..1", "--refs", "2", "--gran", "2"];
const FIG2: &[&str] = &["--ints", "0..1", "--refs", "1", "--gran", "2"];

fn with_flags(args: &[&str], flags: &[&str]) -> Vec<String> {
    args.iter().chain(flags).map(|s| s.to_string()).collect()
}

fn mvl_flags(args: &[&str], flags: &[&str]) -> Run {
    let owned = with_flags(args, flags);
    mvl(&owned.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn verify_exit_codes() {
    assert_eq!(mvl_flags(&["verify", &corpus("fig1_annotated.mvl")], FIG1).code, 0);
    assert_eq!(mvl_flags(&["verify", &corpus("fig1.mvl")], FIG1).code, 1);
    let r = mvl(&["verify", "/nonexistent/nope.mvl"]);
    assert_eq!(r.code, 3);
}

#[test]
fn inline_exit_codes_and_output() {
    let ok = mvl_flags(&["inline", &corpus("fig1_bounded.mvl"), "--bound", "1"], FIG1);
    assert_eq!(ok.code, 0, "{}", ok.stdout);
    let bad = mvl_flags(&["inline", &corpus("fig1_annotated.mvl"), "--bound", "1"], FIG1);
    assert_eq!(bad.code, 1);

    // The printed inlined program is itself parseable.
    let json = mvl_flags(&["inline", &corpus("fig9.mvl"), "--bound", "1", "--json"], FIG2);
    assert_eq!(json.code, 0);
    let v: serde_json::Value = serde_json::from_str(&json.stdout).expect("json");
    let text = v["inlined"].as_str().expect("inlined text");
    mvl_core::lang::parse(text).expect("inlined output parses");
}

#[test]
fn check_pc_exit_codes() {
    assert_eq!(
        mvl_flags(&["check-pc", &corpus("fig1_bounded.mvl"), "--bound", "1"], FIG1).code,
        0
    );
    assert_eq!(mvl_flags(&["check-pc", &corpus("fig2.mvl"), "--bound", "1"], FIG2).code, 2);
    assert_eq!(
        mvl(&["check-pc", &corpus("fig5.mvl"), "--mode", "syntactic"]).code,
        2
    );
    assert_eq!(mvl(&["check-pc", &corpus("fig2.mvl"), "--mode", "bogus"]).code, 3);
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(mvl(&["--help"]).code, 0);
    assert_eq!(mvl(&["--version"]).code, 0);
    assert_eq!(mvl(&["frobnicate"]).code, 3);
    assert_eq!(mvl(&["verify"]).code, 3);
    assert_eq!(mvl(&["verify", &corpus("fig2.mvl"), "--no-such-flag"]).code, 3);
    assert_eq!(mvl(&["verify", &corpus("fig2.mvl"), "--ints", "5..1"]).code, 3);
}

#[test]
fn corpus_failure_names_the_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("wrong.mvl");
    let mut f = std::fs::File::create(&path).expect("create");
    writeln!(f, "// EXPECT: verify=pass").unwrap();
    writeln!(f, "init {{ assert false }}").unwrap();
    drop(f);
    let r = mvl(&["corpus", dir.path().to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.contains("wrong.mvl"), "output: {}", r.stdout);

    // An empty directory is an error, not a silent pass.
    let empty = tempfile::tempdir().expect("tempdir");
    assert_eq!(mvl(&["corpus", empty.path().to_str().unwrap()]).code, 3);
}

#[test]
fn config_file_layering() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("mvl.toml");
    std::fs::write(&cfg, "gran = 4\nseed = 11\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let r = mvl_with(&["verify", &corpus("pattern33.mvl"), "--json"], &[("MVL_CONFIG", cfg)]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).expect("json");
    assert_eq!(v["config"]["gran"], 4);
    assert_eq!(v["config"]["seed"], 11);

    // A command-line flag beats the file.
    let r = mvl_with(
        &["verify", &corpus("pattern33.mvl"), "--json", "--gran", "2"],
        &[("MVL_CONFIG", cfg)],
    );
    let v: serde_json::Value = serde_json::from_str(&r.stdout).expect("json");
    assert_eq!(v["config"]["gran"], 2);
    assert_eq!(v["config"]["seed"], 11);

    // A broken config file is a usage error.
    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "granularity = 4\n").unwrap();
    let r = mvl_with(&["verify", &corpus("fig2.mvl")], &[("MVL_CONFIG", broken.to_str().unwrap())]);
    assert_eq!(r.code, 3);
}

#[test]
fn json_reports_validate_against_schema() {
    let schema = mvl::schema::report_schema();
    for args in [
        vec!["verify", &*corpus("fig1.mvl"), "--json"],
        vec!["check-pc", &*corpus("fig1_annotated.mvl"), "--bound", "1", "--json"],
        vec!["harness", "T1", "--budget", "16", "--json"],
        vec!["corpus", "--json"],
        vec!["verify", "/nonexistent/nope.mvl", "--json"],
    ] {
        let r = mvl(&args);
        let v: serde_json::Value =
            serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("{args:?}: {e}\n{}", r.stdout));
        mvl::schema::validate(&schema, &v).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    }
}

#[test]
fn harness_exit_codes() {
    assert_eq!(mvl(&["harness", "T1", "--budget", "8"]).code, 0);
    assert_eq!(mvl(&["harness", "nope", "--budget", "8"]).code, 3);
}
