use std::path::PathBuf;
use std::process::{Command, Output};

fn hopdof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopdof")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hopdof-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn dof_table_prints_exact_fractions() {
    let o = hopdof(&["dof-table", "3,5,10,20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    for f in ["15/11", "18/11", "315/193", "300/137", "92378/43191", "25200/7381", "156/59", "62078016/11167027"] {
        assert!(s.contains(f), "missing {f} in\n{s}");
    }
}

#[test]
fn dof_table_json_and_csv_outputs() {
    let path = scratch("table.json");
    let o = hopdof(&["dof-table", "3,4", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v.as_array().map(Vec::len), Some(2));

    let path = scratch("table.csv");
    let o = hopdof(&["dof-table", "3,4", "--out", path.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
}

#[test]
fn usage_errors_exit_64() {
    for args in [
        vec!["dof-table", ""],
        vec!["dof-table", "2"],
        vec!["dof-table", "abc"],
        vec!["hops", "--k", "3", "--l", "5"],
        vec!["hops", "--k", "3", "--l", "3", "--q", "2"],
        vec!["nonsense"],
        vec!["simulate", "x4"],
        vec!["verify", "psin-rank", "--trials", "0"],
        vec!["simulate", "x3", "--tol", "-1"],
    ] {
        let o = hopdof(&args);
        assert_eq!(o.status.code(), Some(64), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn help_exits_zero() {
    assert_eq!(hopdof(&["--help"]).status.code(), Some(0));
    assert_eq!(hopdof(&["simulate", "--help"]).status.code(), Some(0));
}

#[test]
fn hops_for_three_users() {
    let o = hopdof(&["hops", "--k", "3", "--l", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    for f in ["53/90", "23/45", "11/15"] {
        assert!(s.contains(f), "missing {f} in\n{s}");
    }
    assert!(s.contains("interior<=first+last=true"));
    let q = hopdof(&["hops", "--k", "3", "--q", "2"]);
    assert_eq!(stdout(&q), s);
}

#[test]
fn scaling_default_list() {
    let o = hopdof(&["scaling"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert_eq!(s.lines().count(), 5, "{s}");
    assert!(s.lines().nth(4).unwrap().starts_with("10000,"));
}

#[test]
fn simulate_rounds_n1_and_reports_decode_failure() {
    let o = hopdof(&["simulate", "x3", "--n1", "90", "--seed", "7"]);
    assert!(stderr(&o).contains("notice: N1 = 90 rounded to 270"), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("hop slots: (159, 138, 198)"), "{s}");
    assert!(s.contains("measured DoF: 15/11"));
    assert!(s.contains("causality violations: 0"));
    // The scheme leaves a kernel in every destination's equations.
    assert_eq!(o.status.code(), Some(3));
    assert!(s.contains("decode: FAILED"));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let a = scratch("a.json");
    let b = scratch("b.json");
    hopdof(&["simulate", "x3", "--seed", "3", "--out", a.to_str().unwrap()]);
    hopdof(&["simulate", "x3", "--seed", "3", "--out", b.to_str().unwrap()]);
    let (a, b) = (std::fs::read_to_string(a).unwrap(), std::fs::read_to_string(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["variant"], "x3");
}

#[test]
fn simulate_ic6_has_six_hops() {
    let o = hopdof(&["simulate", "ic6", "--seed", "1"]);
    let s = stdout(&o);
    assert!(s.contains("hop slots: (159, 138, 198, 159, 138, 198)"), "{s}");
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_suites_pass() {
    for (suite, extra) in [
        ("psin-rank", vec!["--trials", "50"]),
        ("causality", vec!["--trials", "1"]),
        ("gamma-vs-sum", vec![]),
        ("two-hop", vec!["--trials", "1"]),
    ] {
        let mut args = vec!["verify", suite];
        args.extend(extra);
        let o = hopdof(&args);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["pass"], true, "{suite}");
        assert_eq!(v["suite"], suite);
    }
}

#[test]
fn verify_gamma_with_impossible_tolerance_fails() {
    let o = hopdof(&["verify", "gamma-vs-sum", "--tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_csv_report() {
    let path = scratch("verify.csv");
    let o = hopdof(&["verify", "two-hop", "--trials", "1", "--out", path.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("suite,check,pass,informational,detail"), "{text}");
}
