use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn swarmlang(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmlang"))
        .args(args)
        .env("SWARMLANG_THREADS", "2")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn script(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn compile_writes_an_image() {
    let dir = TempDir::new().unwrap();
    let src = script(&dir, "ok.swl", "x = 1 + 2\n");
    let out = dir.path().join("ok.bo");
    let o = swarmlang(&["compile", &src, "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(std::fs::read(&out).unwrap().starts_with(b"SWBC"));
}

#[test]
fn compile_defaults_output_next_to_source() {
    let dir = TempDir::new().unwrap();
    let src = script(&dir, "a.swl", "x = 1\n");
    assert_eq!(code(&swarmlang(&["compile", &src])), 0);
    assert!(dir.path().join("a.bo").exists());
}

#[test]
fn syntax_error_reports_position() {
    let dir = TempDir::new().unwrap();
    let src = script(&dir, "bad.swl", "x = 1\ny = (2 +\n");
    let o = swarmlang(&["compile", &src, "-o", dir.path().join("b.bo").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains(&format!("{src}:")), "{err}");
    assert!(err.contains("syntax error"), "{err}");
    assert!(stdout(&o).is_empty());
}

#[test]
fn missing_file_is_io_error() {
    let o = swarmlang(&["compile", "/nonexistent/x.swl"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(code(&swarmlang(&["compile", "--frobnicate", "x"])), 2);
    assert_eq!(code(&swarmlang(&["sweep", "--script", "consensus", "--bogus"])), 2);
}

#[test]
fn run_prints_output_then_globals() {
    let dir = TempDir::new().unwrap();
    let src = script(&dir, "hi.swl", "print(\"hi\")\nx = 5\n");
    let o = swarmlang(&["run", &src, "--steps", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("hi"));
    assert_eq!(lines.next(), Some("# globals"));
    assert!(out.lines().any(|l| l == "x = 5"), "{out}");
}

#[test]
fn run_accepts_images_and_bindings() {
    let dir = TempDir::new().unwrap();
    let src = script(&dir, "g.swl", "function step() { goto(K, id) }\n");
    let img = dir.path().join("g.bo");
    assert_eq!(code(&swarmlang(&["compile", &src, "-o", img.to_str().unwrap()])), 0);
    let o = swarmlang(&["run", img.to_str().unwrap(), "--robot-id", "3", "--steps", "2", "--bind", "goto", "--bind", "K=1.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let calls: Vec<&str> = out.lines().filter(|l| l.starts_with('>')).collect();
    assert_eq!(calls, ["> goto(1.5, 3)", "> goto(1.5, 3)"]);
}

#[test]
fn run_zero_steps_only_initializes() {
    let dir = TempDir::new().unwrap();
    let src = script(&dir, "i.swl", "a = 1\nfunction init() { b = 2 }\nfunction step() { c = 3 }\n");
    let o = swarmlang(&["run", &src, "--steps", "0"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("a = 1") && out.contains("b = 2"));
    assert!(!out.contains("c = 3"));
}

#[test]
fn runtime_fault_exits_4_with_position() {
    let dir = TempDir::new().unwrap();
    let src = script(&dir, "f.swl", "x = 1\nnothing_here()\n");
    let o = swarmlang(&["run", &src]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("2:"), "{}", stderr(&o));
}

#[test]
fn disasm_and_asm_round_trip() {
    let dir = TempDir::new().unwrap();
    let src = script(&dir, "r.swl", "function f(a) { return a * 2 }\nx = f(21)\n");
    let img = dir.path().join("r.bo");
    assert_eq!(code(&swarmlang(&["compile", &src, "-o", img.to_str().unwrap()])), 0);
    let listing = stdout(&swarmlang(&["disasm", img.to_str().unwrap()]));
    let lst = script(&dir, "r.lst", &listing);
    let back = dir.path().join("back.bo");
    assert_eq!(code(&swarmlang(&["asm", &lst, "-o", back.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read(&img).unwrap(), std::fs::read(&back).unwrap());
}

fn sweep_csv(dir: &Path, name: &str, extra: &[&str]) -> (i32, String) {
    let out = dir.join(name);
    let mut args = vec!["sweep", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = swarmlang(&args);
    let text = std::fs::read_to_string(&out).unwrap_or_default();
    (code(&o), text)
}

#[test]
fn sweep_writes_one_row_per_run() {
    let dir = TempDir::new().unwrap();
    let summary = dir.path().join("s.csv");
    let (c, text) = sweep_csv(
        dir.path(),
        "d.csv",
        &["--script", "consensus", "--robots", "10,100", "--drop-prob", "0,0.75", "--reps", "20", "--summary", summary.to_str().unwrap()],
    );
    assert_eq!(c, 0);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "experiment,N,P,rep,seed,converged,steps");
    assert_eq!(lines.len(), 1 + 80);
    assert_eq!(std::fs::read_to_string(summary).unwrap().lines().count(), 1 + 4);
}

#[test]
fn sweep_zero_reps_is_header_only() {
    let dir = TempDir::new().unwrap();
    let (c, text) = sweep_csv(dir.path(), "d.csv", &["--script", "gradient", "--robots", "10", "--reps", "0"]);
    assert_eq!(c, 0);
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn same_seed_gives_identical_csv_for_any_thread_count() {
    let dir = TempDir::new().unwrap();
    let args = ["--script", "gradient", "--robots", "10,30", "--drop-prob", "0,0.5", "--reps", "3", "--seed", "9"];
    let (_, a) = sweep_csv(dir.path(), "a.csv", &args);
    let out = dir.path().join("b.csv");
    let mut b_args = vec!["sweep", "--out", out.to_str().unwrap()];
    b_args.extend_from_slice(&args);
    let o = Command::new(env!("CARGO_BIN_EXE_swarmlang")).args(&b_args).env("SWARMLANG_THREADS", "1").output().unwrap();
    assert!(o.status.success());
    assert_eq!(a, std::fs::read_to_string(out).unwrap());
    let (_, c) = sweep_csv(dir.path(), "c.csv", &["--script", "gradient", "--robots", "10,30", "--drop-prob", "0,0.5", "--reps", "3", "--seed", "10"]);
    assert_ne!(a, c);
}

#[test]
fn invalid_grid_is_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(sweep_csv(dir.path(), "d.csv", &["--script", "consensus", "--drop-prob", "1.5"]).0, 2);
    assert_eq!(sweep_csv(dir.path(), "d.csv", &["--script", "consensus", "--density", "0"]).0, 2);
    assert_eq!(sweep_csv(dir.path(), "d.csv", &["--script", "no_such_script"]).0, 2);
}

#[test]
fn sim_writes_a_series() {
    let o = swarmlang(&["sim", "--script", "consensus", "--robots", "10", "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let last = out.lines().last().unwrap();
    assert!(out.starts_with("step,numeric,min,max,converged\n"));
    assert!(last.ends_with(",10,9,9,1"), "{last}");
}

#[test]
fn user_script_with_predicate() {
    let dir = TempDir::new().unwrap();
    let src = script(&dir, "p.swl", "passed = 1\n");
    let o = swarmlang(&["sim", "--script", &src, "--predicate", "barrier", "--robots", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 2);
    assert_eq!(code(&swarmlang(&["sim", "--script", &src, "--predicate", "nope"])), 2);
}
