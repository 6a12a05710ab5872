use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toy5() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances/toy5.npp")
}

fn npp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npp"))
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = npp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn line_value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(str::trim))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{text}"))
}

#[test]
fn enumerate_prints_toy5_paths_in_cost_order() {
    let f = toy5();
    let f = f.to_str().unwrap();
    assert_eq!(
        stdout_of(&["enumerate", "--instance", f, "--commodity", "0"]),
        "3\t0,1,2,4\n4\t0,1,4\n6\t0,1,2,3,4\n10\t0,4\n"
    );
    assert_eq!(
        stdout_of(&["enumerate", "--instance", f, "--filter"]),
        "3\t0,1,2,4\n4\t0,1,4\n10\t0,4\n"
    );
    assert_eq!(stdout_of(&["enumerate", "--instance", f, "--cap", "2"]), "3\t0,1,2,4\n4\t0,1,4\n");
}

#[test]
fn reduce_reports_counts_before_and_after() {
    let f = toy5();
    let f = f.to_str().unwrap();
    let paths = stdout_of(&["reduce", "--instance", f, "--method", "paths", "--report"]);
    assert_eq!(
        paths,
        "commodity\tnodes\tarcs\ttolled\tnodes_after\tarcs_after\ttolled_after\n0\t5\t7\t3\t4\t5\t3\n"
    );
    let spgm = stdout_of(&["reduce", "--instance", f, "--method", "spgm", "--report"]);
    assert!(spgm.ends_with("0\t5\t7\t3\t4\t6\t3\n"), "{spgm}");
}

#[test]
fn oracle_and_solve_agree_on_toy5() {
    let f = toy5();
    let f = f.to_str().unwrap();
    let oracle = stdout_of(&["oracle", "--instance", f]);
    assert_eq!(line_value(&oracle, "revenue"), "7");
    assert_eq!(line_value(&oracle, "T[0]"), "7");
    for kind in ["STD", "PCS2", "VFCS1"] {
        let out = stdout_of(&["solve", "--instance", f, "--kind", kind]);
        assert_eq!(line_value(&out, "status"), "optimal");
        let v: f64 = line_value(&out, "objective").parse().unwrap();
        assert!((v - 7.0).abs() < 1e-6, "{kind}: {v}");
    }
}

#[test]
fn built_lp_solves_through_solve_lp() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("m.lp");
    let sol = dir.path().join("m.sol");
    let f = toy5();
    stdout_of(&["build", "--instance", f.to_str().unwrap(), "--kind", "CS2", "--out", lp.to_str().unwrap()]);
    let text = fs::read_to_string(&lp).unwrap();
    assert!(text.starts_with("Maximize\n obj:"));
    assert!(text.ends_with("End\n"));
    stdout_of(&["solve-lp", lp.to_str().unwrap(), sol.to_str().unwrap()]);
    let sol = fs::read_to_string(&sol).unwrap();
    assert_eq!(line_value(&sol, "status"), "optimal");
    assert!((line_value(&sol, "objective").parse::<f64>().unwrap() - 7.0).abs() < 1e-6);
}

#[test]
fn config_selects_external_solver() {
    let dir = tempfile::tempdir().unwrap();
    let f = toy5();
    let f = f.to_str().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(
        &good,
        format!("[solver]\ncmd = \"'{}' solve-lp {{lp}} {{sol}} --budget {{budget}}\"\n", env!("CARGO_BIN_EXE_npp")),
    )
    .unwrap();
    let out = stdout_of(&["--config", good.to_str().unwrap(), "solve", "--instance", f, "--kind", "PACS1"]);
    assert!((line_value(&out, "objective").parse::<f64>().unwrap() - 7.0).abs() < 1e-6);

    let missing = dir.path().join("missing.toml");
    fs::write(&missing, "[solver]\ncmd = \"no-such-solver-binary {lp} {sol}\"\n").unwrap();
    let out = npp(&["--config", missing.to_str().unwrap(), "solve", "--instance", f]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.npp");
    let b = dir.path().join("b.npp");
    for out in [&a, &b] {
        npp(&["generate", "--topology", "grid:5x12", "--commodities", "30", "--seed", "7", "--out", out.to_str().unwrap()]);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("# label: grid5x12_k30_s7\nnpp 60 206 30\n"), "{}", &text[..60]);
}

#[test]
fn sweep_writes_the_csv_header_and_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(toy5(), dir.path().join("toy5.npp")).unwrap();
    let csv = dir.path().join("out.csv");
    let summary = dir.path().join("summary.csv");
    let out = npp(&[
        "sweep",
        "--instances",
        dir.path().to_str().unwrap(),
        "--kinds",
        "STD,PCS2",
        "--breakpoints",
        "1,10",
        "--budget",
        "30",
        "--out",
        csv.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "instance,kind,N,status,objective,gap_pct,enum_s,solve_s,total_s");
    assert_eq!(lines.len(), 5);
    for row in &lines[1..] {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[0], "toy5");
        assert_eq!(f[3], "optimal");
        assert!((f[4].parse::<f64>().unwrap() - 7.0).abs() < 1e-6);
    }
    assert!(fs::read_to_string(&summary).unwrap().starts_with("kind,N,runs,solved"));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = npp(&["solve", "--instance", "/nonexistent/x.npp"]);
    assert!(!out.status.success());
    let out = npp(&["enumerate", "--instance", toy5().to_str().unwrap(), "--commodity", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("commodity 3"));
}
