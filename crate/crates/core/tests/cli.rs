use std::path::Path;
use std::process::{Command, Output};

use irrlyap::cli::BenchRow;
use irrlyap::irr::RunSummary;
use irrlyap::problems::{write_symmetric, SpdSparseMatrix};
use irrlyap::tnewton::SolveTrace;

fn irrlyap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irrlyap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_summary(p: &Path) -> RunSummary {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn solve_writes_consistent_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, summary) = (dir.path().join("t.csv"), dir.path().join("s.json"));
    let out = irrlyap(&[
        "solve", "--gen", "poisson", "--n", "200", "--tol", "1e-6", "--metric", "1", "--precond", "proposed", "--seed",
        "7", "--trace-out", path_str(&trace), "--summary-out", path_str(&summary),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = read_summary(&summary);
    assert!(s.rel_res <= 1e-6);
    assert_eq!(s.final_rank, *s.ranks_visited.last().unwrap());
    let t = SolveTrace::read_csv(&trace).unwrap();
    assert_eq!(t.last().unwrap().nh, s.total_nh);
    assert_eq!(t.last().unwrap().p, s.final_rank);
}

#[test]
fn usage_errors_exit_2() {
    let out = irrlyap(&["solve", "--metric", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(irrlyap(&["solve", "--gen", "poisson", "--n", "20", "--metric", "4"]).status.code(), Some(2));
    assert_eq!(irrlyap(&["solve", "--gen", "poisson"]).status.code(), Some(2));
    assert_eq!(irrlyap(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_with_json() {
    let out = irrlyap(&["solve", "--gen", "poisson", "--n", "20", "--p-max", "40"]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kind"], "invalid_argument");
    let out = irrlyap(&["oracle-check", "--gen", "poisson", "--n", "50", "--dense-limit", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kind"], "dense_limit");
    let out = irrlyap(&["solve", "--manifest", "/nonexistent/problem.manifest"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreached_tolerance_exits_1() {
    let out = irrlyap(&["solve", "--gen", "poisson", "--n", "60", "--tol", "1e-12", "--p-max", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    let last = text.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(last).unwrap();
    assert_eq!(v["kind"], "not_converged");
}

#[test]
fn generated_files_reproduce_builtin_problem() {
    let dir = tempfile::tempdir().unwrap();
    let gen = irrlyap(&["generate", "--n", "80", "--seed", "3", "--out-dir", path_str(dir.path())]);
    assert_eq!(gen.status.code(), Some(0));
    let manifest = dir.path().join("problem.manifest");
    for f in ["A.mtx", "M.mtx", "B.mtx"] {
        assert!(dir.path().join(f).exists());
    }
    let (s1, s2) = (dir.path().join("1.json"), dir.path().join("2.json"));
    let a = irrlyap(&["solve", "--manifest", path_str(&manifest), "--seed", "3", "--summary-out", path_str(&s1)]);
    let b = irrlyap(&["solve", "--gen", "poisson", "--n", "80", "--seed", "3", "--summary-out", path_str(&s2)]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let (x, y) = (read_summary(&s1), read_summary(&s2));
    assert_eq!(x.ranks_visited, y.ranks_visited);
    assert!((x.rel_res - y.rel_res).abs() <= 1e-12 * x.rel_res);
}

fn bench_rows(args: &[&str]) -> Vec<BenchRow> {
    let out = irrlyap(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    csv::Reader::from_reader(out.stdout.as_slice())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn bench_table_layout_and_reproducibility() {
    let args = [
        "bench", "--gen", "poisson", "--n", "300", "--p", "2", "--metrics", "1,3", "--preconds", "none,proposed",
        "--instances", "2", "--grad-tol", "1e-8",
    ];
    let a = bench_rows(&args);
    let b = bench_rows(&args);
    assert_eq!(a.len(), 2 * 2 * 2);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.iter, x.nh, x.seed, x.metric, &x.precond), (y.iter, y.nh, y.seed, y.metric, &y.precond));
        assert!(x.iter.is_finite() && x.nh.is_finite());
    }
    for seed in [0u64, 1] {
        let get = |pc: &str| a.iter().find(|r| r.seed == seed && r.metric == 1 && r.precond == pc).unwrap().nh;
        assert!(get("none") > get("proposed"));
    }
}

#[test]
fn oracle_check_reports_one_row_per_rank() {
    let dir = tempfile::tempdir().unwrap();
    let (report, summary) = (dir.path().join("r.csv"), dir.path().join("s.json"));
    let out = irrlyap(&[
        "oracle-check", "--gen", "poisson", "--n", "150", "--tol", "1e-5", "--out", path_str(&report), "--summary-out",
        path_str(&summary),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let s = read_summary(&summary);
    let mut rdr = csv::Reader::from_path(&report).unwrap();
    let rows: Vec<irrlyap::cli::OracleRow> = rdr.deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.iter().map(|r| r.p).collect::<Vec<_>>(), s.ranks_visited);
    let last = rows.last().unwrap();
    assert!(last.irr_rel_res <= 10.0 * last.best_rel_res);
}

#[test]
fn bart_matches_proposed_on_identity_mass() {
    let dir = tempfile::tempdir().unwrap();
    let gen = irrlyap(&["generate", "--n", "150", "--seed", "2", "--out-dir", path_str(dir.path())]);
    assert_eq!(gen.status.code(), Some(0));
    write_symmetric(dir.path().join("M.mtx"), &SpdSparseMatrix::identity(150)).unwrap();
    let manifest = dir.path().join("problem.manifest");
    let run = |pc: &str| {
        let s = dir.path().join(format!("{pc}.json"));
        let out = irrlyap(&[
            "solve", "--manifest", path_str(&manifest), "--metric", "1", "--precond", pc, "--summary-out", path_str(&s),
        ]);
        assert_eq!(out.status.code(), Some(0));
        read_summary(&s).total_nh as f64
    };
    let (bart, proposed) = (run("bart"), run("proposed"));
    assert!((bart - proposed).abs() <= 0.05 * proposed, "bart {bart}, proposed {proposed}");
}
