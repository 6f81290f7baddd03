use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use claw_core::sim::{gen_grouped, gen_ordinal, SimModel};
use claw_core::{Covariate, Dataset};
use serde_json::Value;

fn claw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_claw"))
        .args(args)
        .env_remove("CLAW_SEED")
        .output()
        .expect("binary runs")
}

fn dataset_csv(d: &Dataset, with_cal: bool) -> String {
    let mut out = String::new();
    let dim = match &d.units[0].s {
        Covariate::Real(v) => Some(v.len()),
        Covariate::Label(_) => None,
    };
    out.push('t');
    match dim {
        Some(k) => (1..=k).for_each(|j| write!(out, ",s{j}").unwrap()),
        None => out.push_str(",s"),
    }
    out.push_str(if with_cal { ",t_cal\n" } else { "\n" });
    for u in &d.units {
        write!(out, "{:?}", u.t).unwrap();
        match &u.s {
            Covariate::Label(l) => write!(out, ",{l}").unwrap(),
            Covariate::Real(v) => v.iter().for_each(|x| write!(out, ",{x:?}").unwrap()),
        }
        if with_cal {
            write!(out, ",{:?}", u.t_cal).unwrap();
        }
        out.push('\n');
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_grouped_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "data.csv",
        &dataset_csv(&gen_grouped(1, 3.0, 5).unwrap(), true),
    );
    let out = dir.path().join("out");
    let o = claw(&["run", "--input", s(&input), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let report = json(&out.join("report.json"));
    assert_eq!(report["m"], 4500);
    assert_eq!(report["seed"], 0);
    assert_eq!(report["config"]["alpha"], 0.05);
    assert_eq!(report["config"]["f0"], "standard_normal");
    let rejected = report["rejected"].as_array().unwrap();
    assert_eq!(
        report["n_rejected"].as_u64().unwrap() as usize,
        rejected.len()
    );
    assert!(!rejected.is_empty());
    assert!(report["fdp_bound"].as_f64().unwrap() <= 0.05);

    let rows = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = rows.lines();
    assert_eq!(
        lines.next().unwrap(),
        "index,t,s,t_cal,u,u_cal,evalue,rejected"
    );
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 4500);
    let flagged = body.iter().filter(|l| l.ends_with(",1")).count();
    assert_eq!(flagged, rejected.len());
}

#[test]
fn report_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_ordinal(1, 3.0, 2).unwrap();
    let input = write(dir.path(), "data.csv", &dataset_csv(&data, true));
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"alpha": 0.1, "weights": {"kind": "gaussian", "scale": 150.0}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(claw(&[
        "run",
        "--input",
        s(&input),
        "--config",
        s(&cfg),
        "--out",
        s(&a)
    ])
    .status
    .success());
    let echoed = write(
        dir.path(),
        "echo.json",
        &serde_json::to_string(&json(&a.join("report.json"))["config"]).unwrap(),
    );
    let again = claw(&[
        "run",
        "--input",
        s(&a.join("report.csv")),
        "--config",
        s(&echoed),
        "--out",
        s(&b),
    ]);
    assert!(
        again.status.success(),
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    assert_eq!(
        json(&a.join("report.json"))["rejected"],
        json(&b.join("report.json"))["rejected"]
    );
}

#[test]
fn identical_inputs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "data.csv",
        &dataset_csv(&gen_grouped(2, 0.3, 9).unwrap(), true),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    claw(&["run", "--input", s(&input), "--out", s(&a)]);
    claw(&["run", "--input", s(&input), "--out", s(&b)]);
    for f in ["report.json", "report.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap()
        );
    }
}

#[test]
fn missing_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", "t,s\n1.0,a\n2.0,b\n");
    let o = claw(&[
        "run",
        "--input",
        s(&input),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("t_cal"));
}

#[test]
fn parse_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", "t,s,t_cal\n1.0,a,0.2\n2.0,b,oops\n");
    let o = claw(&[
        "run",
        "--input",
        s(&input),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("data.csv:3"));
}

#[test]
fn config_error_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", "t,s,t_cal\n1.0,a,0.2\n");
    let cfg = write(dir.path(), "cfg.json", r#"{"lambda": 1.5}"#);
    let o = claw(&[
        "run",
        "--input",
        s(&input),
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda"));
}

#[test]
fn degenerate_sample_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "data.csv",
        "t,s,t_cal\n1.0,a,1.0\n1.0,a,1.0\n1.0,a,1.0\n",
    );
    let o = claw(&[
        "run",
        "--input",
        s(&input),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "data.csv",
        "t,s,t_cal\n1.0,a,0.2\n-0.5,a,0.3\n2.5,b,-1\n0.1,b,0.4\n",
    );
    let cfg = write(dir.path(), "cfg.json", r#"{"seed": 7}"#);
    let seed_of = |extra: &[&str], env: Option<&str>| {
        let out = dir.path().join("o");
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_claw"));
        cmd.args([
            "run",
            "--input",
            s(&input),
            "--config",
            s(&cfg),
            "--out",
            s(&out),
        ])
        .args(extra);
        match env {
            Some(v) => cmd.env("CLAW_SEED", v),
            None => cmd.env_remove("CLAW_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        json(&out.join("report.json"))["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&[], None), 7);
    assert_eq!(seed_of(&[], Some("11")), 11);
    assert_eq!(seed_of(&["--seed", "13"], Some("11")), 13);
}

#[test]
fn tabulated_null_matches_standard_normal() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "data.csv",
        &dataset_csv(&gen_grouped(1, 3.0, 4).unwrap(), true),
    );
    let mut table = String::from("t,cdf,pdf\n");
    for k in -1200..=1200 {
        let t = k as f64 / 100.0;
        let cdf = claw_core::normal::cdf(t);
        writeln!(table, "{t:?},{cdf:?},{:?}", claw_core::normal::pdf(t)).unwrap();
    }
    write(dir.path(), "null.csv", &table);
    let cfg = write(dir.path(), "cfg.json", r#"{"f0": {"table": "null.csv"}}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(claw(&["run", "--input", s(&input), "--out", s(&a)])
        .status
        .success());
    let o = claw(&[
        "run",
        "--input",
        s(&input),
        "--config",
        s(&cfg),
        "--out",
        s(&b),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (ra, rb) = (json(&a.join("report.json")), json(&b.join("report.json")));
    let (x, y) = (
        ra["rejected"].as_array().unwrap(),
        rb["rejected"].as_array().unwrap(),
    );
    let common = x.iter().filter(|i| y.contains(i)).count();
    assert!(common as f64 >= 0.98 * x.len().max(y.len()) as f64);
}

fn semisup_inputs(dir: &Path, pool_len: usize) -> (PathBuf, PathBuf, usize) {
    let data = gen_grouped(1, 3.0, 3).unwrap();
    let m = data.m();
    let input = write(dir, "data.csv", &dataset_csv(&data, false));
    let pool: String = SimModel::null_pool(77, pool_len)
        .iter()
        .map(|x| format!("{x:?}\n"))
        .collect();
    let pool = write(dir, "pool.csv", &format!("t\n{pool}"));
    (input, pool, m)
}

#[test]
fn semisup_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (input, pool, m) = semisup_inputs(dir.path(), 4510);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = claw(&[
        "semisup",
        "--input",
        s(&input),
        "--null-pool",
        s(&pool),
        "--seed",
        "4",
        "--out",
        s(&a),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    claw(&[
        "semisup",
        "--input",
        s(&input),
        "--null-pool",
        s(&pool),
        "--seed",
        "4",
        "--out",
        s(&b),
    ]);
    let report = json(&a.join("report.json"));
    assert_eq!(
        report["null_split"]["calibration_indices"]
            .as_array()
            .unwrap()
            .len(),
        m
    );
    assert_eq!(report["null_split"]["pool_size"], 4510);
    assert_eq!(
        std::fs::read(a.join("report.json")).unwrap(),
        std::fs::read(b.join("report.json")).unwrap()
    );
}

#[test]
fn semisup_small_pool_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (input, pool, _) = semisup_inputs(dir.path(), 4499);
    let o = claw(&[
        "semisup",
        "--input",
        s(&input),
        "--null-pool",
        s(&pool),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("null samples"));
}

#[test]
fn simulate_writes_one_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("summary.csv");
    let o = claw(&[
        "simulate",
        "--family",
        "grouped",
        "--setting",
        "1",
        "--param",
        "mu=3",
        "--reps",
        "3",
        "--methods",
        "claw,bh",
        "--seed",
        "1",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 2);
}

#[test]
fn simulate_flag_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let base = [
        "simulate",
        "--family",
        "grouped",
        "--setting",
        "1",
        "--out",
        s(&out),
    ];
    let run = |extra: &[&str]| claw(&[&base[..], extra].concat()).status.code();
    assert_eq!(run(&["--param", "mu=3", "--reps", "0"]), Some(2));
    assert_eq!(run(&["--param", "pi=3", "--reps", "1"]), Some(2));
    let o = claw(&[
        "simulate",
        "--family",
        "grouped",
        "--setting",
        "9",
        "--param",
        "1",
        "--reps",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown setting"));
}

#[test]
fn aggregate_example_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let panel = write(dir.path(), "panel.csv", "src1,src2\n4,2\n0,2\n");
    let out = dir.path().join("agg.json");
    let o = claw(&[
        "aggregate",
        "--panel",
        s(&panel),
        "--alpha",
        "0.6666666666666666",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["evalues"], serde_json::json!([3.0, 1.0]));
    assert_eq!(r["rejected"], serde_json::json!([0]));

    let single = write(dir.path(), "single.csv", "1\n25\n0.5\n40\n");
    let o = claw(&["aggregate", "--panel", s(&single), "--alpha", "0.1"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let expected = claw_core::mirror::ebh(&[1.0, 25.0, 0.5, 40.0], 0.1);
    assert_eq!(r["rejected"], serde_json::json!(expected));

    let ragged = write(dir.path(), "ragged.csv", "1,2\n3,4\n5\n");
    let o = claw(&["aggregate", "--panel", s(&ragged), "--alpha", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ragged.csv:3"));

    let bad = write(dir.path(), "bad.csv", "1,2\n3,x\n");
    assert_eq!(
        claw(&["aggregate", "--panel", s(&bad), "--alpha", "0.1"])
            .status
            .code(),
        Some(2)
    );
}
