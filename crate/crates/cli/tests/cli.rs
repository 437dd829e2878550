use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lf_core::interp::mif::{bank_from_mif, bank_to_mif};
use lf_core::interp::{Bank, ScalarKind};
use lf_core::ir::cfg::Cfg;
use lf_core::{parse_module, validate};
use tempfile::TempDir;

fn lf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lf")).args(args).current_dir(cwd).output().expect("lf runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn generated(dir: &TempDir, case: &str) -> String {
    let name = format!("{case}.ll");
    let o = lf(&["generate", case, "-o", &name], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    name
}

fn cycles(o: &Output) -> u64 {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("cycles total="))
        .expect("cycles line")
        .parse()
        .unwrap()
}

#[test]
fn check_accepts_a_generated_kernel() {
    let dir = TempDir::new().unwrap();
    let f = generated(&dir, "softmax_a");
    let o = lf(&["check", &f], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("ok"));
}

#[test]
fn parse_errors_carry_file_and_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.ll"), "define void @main() {\nentry:\n  %x = frobnicate i32 1\n  ret void\n}\n").unwrap();
    let o = lf(&["check", "bad.ll"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("bad.ll:3: error: "), "{}", stderr(&o));
}

#[test]
fn illegal_kernels_are_reported_with_their_line() {
    let dir = TempDir::new().unwrap();
    let src = "declare i32 @printf(i8*)\n@s = global [1 x i8] zeroinitializer\ndefine void @main() {\nentry:\n  %p = getelementptr inbounds [1 x i8]* @s, i64 0, i64 0\n  %r = call i32 @printf(i8* %p)\n  ret void\n}\n";
    fs::write(dir.path().join("k.ll"), src).unwrap();
    let o = lf(&["check", "k.ll"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("k.ll:6: error:"), "{}", stderr(&o));
    assert!(stderr(&o).contains("[unsupported-kernel]"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(lf(&["transform"], dir.path()).status.code(), Some(2));
    assert_eq!(lf(&["frob"], dir.path()).status.code(), Some(2));
    assert_eq!(lf(&["schedule", "x.ll", "--partition", "a:diagonal"], dir.path()).status.code(), Some(2));
    assert_eq!(lf(&["schedule", "x.ll", "--lat", "fmul"], dir.path()).status.code(), Some(2));
    assert_eq!(lf(&["bench", "--format", "json"], dir.path()).status.code(), Some(2));
}

#[test]
fn full_unroll_leaves_no_back_edges() {
    let dir = TempDir::new().unwrap();
    let f = generated(&dir, "vecmul_b");
    let o = lf(&["transform", &f, "--unroll-threshold", "10000", "-o", "out.ll"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out.ll")).unwrap();
    let m = parse_module(&text).unwrap().module;
    assert!(validate(&m).is_empty());
    let main = m.function("main").unwrap();
    assert!(main.params.is_empty());
    assert!(!Cfg::new(main).has_back_edges());
}

#[test]
fn run_reads_and_writes_mif_directories() {
    let dir = TempDir::new().unwrap();
    let f = generated(&dir, "vecmul_a");
    assert!(lf(&["transform", &f, "-o", "t.ll"], dir.path()).status.success());
    fs::create_dir(dir.path().join("in")).unwrap();
    let a: Vec<f32> = (1..=8).map(|x| x as f32).collect();
    let b: Vec<f32> = (0..8).map(|x| 0.5 * x as f32).collect();
    fs::write(dir.path().join("in/arg0.mif"), bank_to_mif(&Bank::from_f32(&a))).unwrap();
    fs::write(dir.path().join("in/arg1.mif"), bank_to_mif(&Bank::from_f32(&b))).unwrap();
    let o = lf(&["run", "t.ll", "--mem", "in", "--emit-mem", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let files: Vec<_> = fs::read_dir(dir.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files, vec!["retval.mif"]);
    let text = fs::read_to_string(dir.path().join("out/retval.mif")).unwrap();
    let got = bank_from_mif(&text, ScalarKind::F32, Some(8)).unwrap().to_f32();
    let want: Vec<f32> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    assert_eq!(got, want);
}

#[test]
fn missing_mif_means_zeros() {
    let dir = TempDir::new().unwrap();
    let f = generated(&dir, "vecmul_a");
    assert!(lf(&["transform", &f, "-o", "t.ll"], dir.path()).status.success());
    fs::create_dir(dir.path().join("in")).unwrap();
    fs::write(dir.path().join("in/arg0.mif"), bank_to_mif(&Bank::from_f32(&[3.0; 8]))).unwrap();
    let o = lf(&["run", "t.ll", "--mem", "in"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("@retval = [0, 0, 0, 0, 0, 0, 0, 0]"), "{}", stdout(&o));
}

#[test]
fn bad_mif_is_reported_with_its_line() {
    let dir = TempDir::new().unwrap();
    let f = generated(&dir, "vecmul_a");
    assert!(lf(&["transform", &f, "-o", "t.ll"], dir.path()).status.success());
    fs::create_dir(dir.path().join("in")).unwrap();
    fs::write(dir.path().join("in/arg0.mif"), "DEPTH=8;\nWIDTH=32;\nCONTENT BEGIN\n0 : zz;\nEND;\n").unwrap();
    let o = lf(&["run", "t.ll", "--mem", "in"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("arg0.mif:4: error:"), "{}", stderr(&o));
}

#[test]
fn schedule_prints_gantt_and_total() {
    let dir = TempDir::new().unwrap();
    let f = generated(&dir, "vecmul_a");
    assert!(lf(&["transform", &f, "-o", "out.ll"], dir.path()).status.success());
    let o = lf(&["schedule", "out.ll", "--partition", "arg0:cyclic:factor=4", "--gantt"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("[arg0_p3]"), "{text}");
    assert!(text.contains('#'));
    assert!(text.lines().last().unwrap().starts_with("cycles total="));
}

#[test]
fn resource_flags_change_the_count() {
    let dir = TempDir::new().unwrap();
    let f = generated(&dir, "vecmul_a");
    let base = cycles(&lf(&["schedule", &f, "--transform"], dir.path()));
    let slow = cycles(&lf(&["schedule", &f, "--transform", "--lat", "fmul=20"], dir.path()));
    let narrow = cycles(&lf(&["schedule", &f, "--transform", "--ports", "1"], dir.path()));
    assert!(slow > base);
    assert!(narrow > base);
}

#[test]
fn separate_steps_match_one_invocation() {
    let dir = TempDir::new().unwrap();
    let f = generated(&dir, "conv2d_a");
    let t = lf(&["transform", &f, "--unroll-threshold", "300", "-o", "t.ll"], dir.path());
    assert!(t.status.success(), "{}", stderr(&t));
    let p = lf(&["partition", "t.ll", "--partition", "arg0:cyclic:factor=2", "--partition", "retval:block:factor=4", "-o", "p.ll"], dir.path());
    assert!(p.status.success(), "{}", stderr(&p));
    let split = lf(&["schedule", "p.ll", "--format", "machine"], dir.path());
    let joined = lf(
        &[
            "schedule",
            &f,
            "--transform",
            "--unroll-threshold",
            "300",
            "--partition",
            "arg0:cyclic:factor=2",
            "--partition",
            "retval:block:factor=4",
            "--format",
            "machine",
        ],
        dir.path(),
    );
    assert!(split.status.success() && joined.status.success());
    assert_eq!(cycles(&split), cycles(&joined));
    assert_eq!(stdout(&split), stdout(&joined));
}

#[test]
fn partitioned_mifs_feed_the_partitioned_module() {
    let dir = TempDir::new().unwrap();
    let f = generated(&dir, "vecmul_a");
    assert!(lf(&["transform", &f, "-o", "t.ll"], dir.path()).status.success());
    fs::create_dir(dir.path().join("in")).unwrap();
    let a: Vec<f32> = (1..=8).map(|x| x as f32).collect();
    fs::write(dir.path().join("in/arg0.mif"), bank_to_mif(&Bank::from_f32(&a))).unwrap();
    fs::write(dir.path().join("in/arg1.mif"), bank_to_mif(&Bank::from_f32(&[2.0; 8]))).unwrap();
    let p = lf(
        &["partition", "t.ll", "--partition", "arg0:cyclic:factor=2", "--partition", "retval:block:factor=2", "-o", "p.ll", "--mem", "in", "--emit-mem", "banks"],
        dir.path(),
    );
    assert!(p.status.success(), "{}", stderr(&p));
    let o = lf(&["run", "p.ll", "--mem", "banks"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("@retval_p0 = [2, 4, 6, 8]"), "{text}");
    assert!(text.contains("@retval_p1 = [10, 12, 14, 16]"), "{text}");
}

#[test]
fn unpartitionable_arrays_are_diagnosed() {
    let dir = TempDir::new().unwrap();
    let f = generated(&dir, "vecmul_a");
    let o = lf(&["partition", &f, "--transform", "--partition", "nothere:cyclic:factor=2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[unknown-array]"), "{}", stderr(&o));
}

#[test]
fn bench_machine_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = ["bench", "--case", "vecmul_a", "--case", "softmax_a", "--case", "maxp_a", "--seed", "11", "--format", "machine"];
    let a = lf(&args, dir.path());
    let b = lf(&args, dir.path());
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<_> = stdout(&a).lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("case=vecmul_a status=pass worst_rel_err="));
    assert!(lines[2].starts_with("case=maxp_a "));
}

#[test]
fn bench_unknown_case_fails() {
    let dir = TempDir::new().unwrap();
    let o = lf(&["bench", "--case", "resnet"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[unknown-benchmark]"));
}
