//! The `dsp` command line, driven in process.

use std::path::{Path, PathBuf};

use demand_strip::cli::{run_cli_with, BenchRow, Solved};
use demand_strip::model::validate_schedule;
use demand_strip::Instance;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("dsp").chain(args.iter().copied()).map(String::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli_with(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn tmp(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn solve_two_approx_on_fig1a() {
    let (code, out, _) = run(&["solve", "--algo", "two-approx", &data("fig1a.json")]);
    assert_eq!(code, 0);
    let solved: Solved = serde_json::from_str(&out).unwrap();
    assert!(solved.report.ratio_value <= 2.0);
    assert_eq!(solved.report.lower_bound, 4);
}

#[test]
fn verify_accepts_the_peak_four_schedule() {
    assert_eq!(run(&["verify", &data("fig1a.json"), &data("fig1a.sched.json"), "--max-peak", "4"]).0, 0);
    assert_eq!(run(&["verify", &data("fig1a.json"), &data("fig1a.sched.json"), "--max-peak", "3"]).0, 1);
}

#[test]
fn every_emitted_schedule_reverifies_at_its_reported_peak() {
    let dir = tempfile::tempdir().unwrap();
    let inst = Instance::from_json(&std::fs::read_to_string(data("fig1b.json")).unwrap()).unwrap();
    for algo in ["two-approx", "five-thirds", "square", "exact-dsp"] {
        let path = tmp(&dir, &format!("{algo}.json"));
        let (code, _, err) = run(&["solve", "--algo", algo, &data("fig1b.json"), "--out", path.to_str().unwrap()]);
        assert_eq!(code, 0, "{algo}: {err}");
        let solved: Solved = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(validate_schedule(&inst, &solved.schedule, true).unwrap(), solved.report.peak);
        let peak = solved.report.peak.to_string();
        assert_eq!(run(&["verify", &data("fig1b.json"), path.to_str().unwrap(), "--max-peak", &peak]).0, 0, "{algo}");
    }
}

#[test]
fn gsp_output_carries_a_placement() {
    let (code, out, _) = run(&["solve", "--algo", "exact-gsp", "fig1a"]);
    assert_eq!(code, 0);
    let solved: Solved = serde_json::from_str(&out).unwrap();
    assert_eq!(solved.report.peak, 5);
    assert_eq!(solved.placement.unwrap().positions.len(), 8);
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = tmp(&dir, "bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run(&["solve", bad.to_str().unwrap()]).0, 2);
    assert_eq!(run(&["solve", "--algo", "nope", "fig1a"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["solve", "fig1a", "--eps", "x/y", "--algo", "five-thirds"]).0, 2);
}

#[test]
fn invalid_instance_and_precondition_fail_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let inv = tmp(&dir, "inv.json");
    std::fs::write(&inv, r#"{"W": 3, "tasks": [{"id": 1, "w": 5, "h": 1}]}"#).unwrap();
    assert_eq!(run(&["solve", inv.to_str().unwrap()]).0, 1);
    let (code, _, err) = run(&["solve", "--algo", "square", "fig1a"]);
    assert_eq!(code, 1);
    assert!(err.contains("precondition"));
}

#[test]
fn bench_csv_has_frozen_header_and_sorted_rows() {
    let (code, out, _) = run(&["bench", "fig1b", "fig1a", "--algo", "two-approx,square", "--random", "2", "--jobs", "2"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], BenchRow::HEADER);
    assert_eq!(lines.len(), 1 + 4 * 2);
    let keys: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    // fig1a is not square: the row is kept with empty peak and ratio.
    let skipped = lines.iter().find(|l| l.starts_with("fig1a,square")).unwrap();
    assert!(skipped.contains(",,4,4,,") && skipped.contains("skipped="));
    let fig1b = lines.iter().find(|l| l.starts_with("fig1b,two-approx")).unwrap();
    let cols: Vec<&str> = fig1b.split(',').collect();
    assert_eq!(cols.len(), 9);
    assert_eq!(cols[4], "11");
}

#[test]
fn gen_is_deterministic_and_loadable() {
    let a = run(&["gen", "--n", "6", "--seed", "42"]).1;
    assert_eq!(a, run(&["gen", "--n", "6", "--seed", "42"]).1);
    let inst = Instance::from_json(&a).unwrap();
    assert_eq!(inst.len(), 6);
    let h = run(&["gen", "--hardness", "1,1,2,2", "--inv-eps", "4"]).1;
    let red = Instance::from_json(&h).unwrap();
    assert_eq!(red.width(), 2 * 24 + 3);
    let sq = Instance::from_json(&run(&["gen", "--beta", "1", "--task-height", "1..5"]).1).unwrap();
    assert!(sq.tasks().iter().all(|t| t.width == t.height));
}

#[test]
fn render_writes_svg_with_one_rect_per_task_piece() {
    let dir = tempfile::tempdir().unwrap();
    let svg = tmp(&dir, "f.svg");
    let (code, _, _) = run(&["render", &data("fig1a.json"), &data("fig1a.sched.json"), "--out", svg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("<polyline"));
    for id in 1..=8 {
        assert!(text.contains(&format!("<title>task {id}</title>")));
    }
}
