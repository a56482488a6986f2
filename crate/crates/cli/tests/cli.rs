use std::fs;
use std::process::{Command, Output};

fn securecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_securecast")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_three_t_against_equivocator() {
    let o = securecast(&["simulate", "--protocol", "3t", "--n", "31", "--t", "10", "--adversary", "equivocate", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("conflicts: 0"));
    assert!(stdout(&o).contains("quiescent: true"));
}

#[test]
fn probe_budget_is_a_config_error() {
    let o = securecast(&["simulate", "--protocol", "act", "--n", "10", "--t", "3", "--kappa", "4", "--delta", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n−t ≥ κδ violated"), "{}", stderr(&o));
}

#[test]
fn unknown_flags_and_values_exit_one() {
    assert_eq!(securecast(&["simulate", "--bogus"]).status.code(), Some(1));
    let o = securecast(&["simulate", "--protocol", "zz"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("protocol"));
    assert_eq!(securecast(&["simulate", "--set", "nokey"]).status.code(), Some(1));
}

#[test]
fn traces_are_reproducible_and_check_clean() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.trace");
    let b = dir.path().join("b.trace");
    for p in [&a, &b] {
        let o = securecast(&[
            "simulate", "--protocol", "e", "--n", "4", "--t", "1", "--messages", "1", "--seed", "0", "--trace-out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let o = securecast(&["trace-check", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn duplicated_deliver_is_an_integrity_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.trace");
    securecast(&["simulate", "--protocol", "e", "--n", "4", "--t", "1", "--trace-out", path.to_str().unwrap()]);
    let text = fs::read_to_string(&path).unwrap();
    let mut out = String::new();
    let mut done = false;
    for line in text.lines() {
        out.push_str(line);
        out.push('\n');
        if !done && line.split('\t').nth(1) == Some("deliver") {
            out.push_str(line);
            out.push('\n');
            done = true;
        }
    }
    fs::write(&path, out).unwrap();
    let o = securecast(&["trace-check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("Integrity violation"), "{}", stdout(&o));
    assert!(stdout(&o).contains("line "));
}

#[test]
fn trace_check_parse_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.trace");
    fs::write(&path, "# protocol=e\n# n=4\n# faulty=\n3\tfly\n").unwrap();
    let o = securecast(&["trace-check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"));
    assert_eq!(securecast(&["trace-check", "/nonexistent/x.trace"]).status.code(), Some(1));
}

#[test]
fn successful_act_attack_is_not_an_absolute_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("act.trace");
    let o = securecast(&[
        "simulate", "--protocol", "act", "--n", "31", "--t", "10", "--adversary", "regime-split", "--workload", "faulty",
        "--messages", "200", "--seed", "1", "--trace-out", path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("conflicts: 0"), "{}", stdout(&o));
    let o = securecast(&["trace-check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("conflicts: 0"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, "# a comment\nprotocol=3t\nn=7\nt=2\nmessages=3\nseed=4\n").unwrap();
    let o = securecast(&["simulate", "--config", path.to_str().unwrap(), "--messages", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("protocol: 3t"));
    assert!(stdout(&o).contains("multicasts: 5"));
}

#[test]
fn analyze_row_and_epsilon() {
    let o = securecast(&["analyze", "--n", "100", "--t", "10", "--kappa", "3", "--delta", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("p_faulty_active"), "0.001");
    assert_eq!(col("probe_miss"), "0.111774");
    assert_eq!(col("overall_conflict"), "0.112662");
    assert_eq!(col("load_free_act"), "0.18");
    assert_eq!(col("load_free_3t"), "0.21");
    assert_eq!(col("load_fail_act"), "0.49");
    assert_eq!(col("load_fail_3t"), "0.31");

    let o = securecast(&["analyze", "--epsilon", "0.001", "--n", "100", "--t", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let solved = out.lines().last().unwrap();
    let bound: f64 = solved.split(',').nth(3).unwrap().parse().unwrap();
    assert!(bound <= 0.001, "{solved}");

    let o = securecast(&["analyze", "--n", "3", "--t", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("3t+1"));
}

#[test]
fn montecarlo_verdicts() {
    let o = securecast(&["montecarlo", "--protocol", "act", "--n", "31", "--t", "10", "--trials", "10", "--adversary", "regime-split", "--workload", "faulty"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("insufficient trials"));
    let o = securecast(&["montecarlo", "--protocol", "act", "--n", "31", "--t", "10", "--trials", "20", "--parallel", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.contains(",none,20,0,0,0,"), "{row}");
    assert!(row.ends_with("PASS"));
}

#[test]
fn sweep_grid() {
    let o = securecast(&["sweep", "--grid", "kappa=1..4,delta=1..6"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<Vec<String>> = out.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 24);
    let bound = |k: usize, d: usize| -> f64 {
        rows.iter().find(|r| r[2] == k.to_string() && r[3] == d.to_string()).unwrap()[9].parse().unwrap()
    };
    for k in 1..=4 {
        for d in 1..=6 {
            if k < 4 {
                assert!(bound(k + 1, d) < bound(k, d));
            }
            if d < 6 {
                assert!(bound(k, d + 1) < bound(k, d));
            }
        }
    }

    let o = securecast(&["sweep"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
    assert!(stdout(&o).starts_with("n,t,kappa"));

    assert_eq!(securecast(&["sweep", "--grid", "kappa=x"]).status.code(), Some(1));
    assert_eq!(securecast(&["sweep", "--grid", "zeta=1"]).status.code(), Some(1));
}

#[test]
fn sweep_with_montecarlo_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let o = securecast(&[
        "sweep", "--n", "31", "--t", "10", "--grid", "kappa=2|3", "--montecarlo", "--trials", "100", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().next().unwrap().ends_with(",verdict"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with("PASS")), "{csv}");
}
