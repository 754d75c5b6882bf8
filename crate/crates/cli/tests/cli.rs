use std::fs;
use std::process::{Command, Output};

use ge_aoi::analytic::{self, ArrivalModel, Policy};
use ge_aoi::ChannelParams;

fn ge_aoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ge-aoi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn analytic_plgfs_bernoulli() {
    let out = ge_aoi(&[
        "analytic",
        "--eta",
        "0",
        "--arrival",
        "bernoulli",
        "--lambda",
        "0.333333333333",
        "--policy",
        "plgfs",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 4.0).abs() < 1e-10);
    // At least 12 significant digits.
    assert!(stdout(&out).trim().len() >= 13);
}

#[test]
fn analytic_periodic_fcfs_uses_solver() {
    let out = ge_aoi(&[
        "analytic",
        "--p",
        "0.5",
        "--r",
        "0.5",
        "--arrival",
        "periodic",
        "--K",
        "3",
        "--policy",
        "fcfs",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - (5.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9);
}

#[test]
fn fractions_are_exact() {
    let exact = ge_aoi(&[
        "analytic",
        "--eta",
        "0.4",
        "--arrival",
        "bernoulli",
        "--lambda",
        "1/3",
        "--policy",
        "fcfs",
    ]);
    assert!(exact.status.success());
    let ch = ChannelParams::symmetric(0.4).unwrap();
    let want = analytic::aoi_fcfs_bernoulli(&ch, 1.0 / 3.0).unwrap();
    assert_eq!(stdout(&exact).trim(), format!("{want:.12}"));
}

#[test]
fn instability_exits_two_naming_the_condition() {
    let out = ge_aoi(&[
        "analytic",
        "--eta",
        "0",
        "--arrival",
        "bernoulli",
        "--lambda",
        "0.5",
        "--policy",
        "fcfs",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert_eq!(msg.trim().lines().count(), 1);
    assert!(msg.contains("lambda < r/(p+r)"), "{msg}");

    let out = ge_aoi(&[
        "analytic",
        "--p",
        "0.9",
        "--r",
        "0.1",
        "--arrival",
        "periodic",
        "--K",
        "5",
        "--policy",
        "fcfs",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("K > (p+r)/r"), "{}", stderr(&out));
}

#[test]
fn erasures_are_refused_by_analytic() {
    let out = ge_aoi(&[
        "analytic",
        "--eta",
        "0.5",
        "--pe-good",
        "0.2",
        "--pe-bad",
        "0.8",
        "--arrival",
        "gaw",
        "--policy",
        "plgfs",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_flags_exit_one_with_usage() {
    for args in [
        vec![
            "analytic",
            "--eta",
            "0",
            "--arrival",
            "bursty",
            "--policy",
            "fcfs",
        ],
        vec![
            "analytic",
            "--eta",
            "0",
            "--arrival",
            "bernoulli",
            "--policy",
            "fcfs",
        ],
        vec![
            "analytic",
            "--eta",
            "0",
            "--p",
            "0.5",
            "--r",
            "0.5",
            "--arrival",
            "gaw",
            "--policy",
            "fcfs",
        ],
        vec![
            "simulate",
            "--eta",
            "0",
            "--arrival",
            "gaw",
            "--policy",
            "fcfs",
            "--slots",
            "many",
        ],
        vec!["frobnicate"],
    ] {
        let out = ge_aoi(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(stderr(&out).contains("Usage"), "{args:?}: {}", stderr(&out));
    }
    let help = ge_aoi(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let args = [
        "simulate",
        "--eta",
        "0.5",
        "--arrival",
        "periodic",
        "--K",
        "3",
        "--policy",
        "fcfs",
        "--pe-good",
        "0.2",
        "--pe-bad",
        "0.8",
        "--iters",
        "30",
        "--slots",
        "2000",
        "--seed",
        "42",
    ];
    let a = ge_aoi(&args);
    let b = ge_aoi(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);

    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "p,r,pe_good,pe_bad,eta,arrival,arrival_param,policy,sim_mean,sim_stderr,iters,slots,seed"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        row[..8],
        ["0.25", "0.25", "0.2", "0.8", "0.5", "periodic", "3", "fcfs"]
    );
    assert_eq!(row[10..], ["30", "2000", "42"]);

    let other = ge_aoi(&[
        "simulate",
        "--eta",
        "0.5",
        "--arrival",
        "periodic",
        "--K",
        "3",
        "--policy",
        "fcfs",
        "--pe-good",
        "0.2",
        "--pe-bad",
        "0.8",
        "--iters",
        "30",
        "--slots",
        "2000",
        "--seed",
        "43",
    ]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn simulate_json_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = ge_aoi(&[
        "simulate",
        "--p",
        "0",
        "--r",
        "1",
        "--arrival",
        "periodic",
        "--K",
        "3",
        "--policy",
        "fcfs",
        "--iters",
        "2",
        "--slots",
        "9",
        "--format",
        "json",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let record: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    // The virtual slot-0 packet gives AoI 1 in slot 2 as well; afterwards
    // the sawtooth cycles 3, 1, 2.
    assert_eq!(record["sim_mean"], 16.0 / 9.0);
    assert_eq!(record["arrival"], "periodic");
    let text = fs::read_to_string(&trace).unwrap();
    let aoi: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(aoi, ["1", "1", "2", "3", "1", "2", "3", "1", "2"]);
    assert!(text.starts_with("slot,state,queue_len,aoi\n1,G,1,1\n"));
}

fn parse_sweep(text: &str) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        [
            "eta",
            "p",
            "r",
            "pe_good",
            "pe_bad",
            "arrival",
            "arrival_param",
            "policy",
            "analytic",
            "sim_mean",
            "sim_stderr",
            "status"
        ]
    );
    rdr.records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn sweep_rows_round_trip_and_match_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig.csv");
    let out = ge_aoi(&[
        "sweep",
        "--iters",
        "200",
        "--slots",
        "10000",
        "--seed",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = parse_sweep(&fs::read_to_string(&path).unwrap());
    assert_eq!(rows.len(), 60);

    let mut keys = Vec::new();
    for row in &rows {
        assert_eq!(row[11], "ok", "{row:?}");
        let (p, r): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
        let ch = ChannelParams::on_off(p, r).unwrap();
        let param: f64 = row[6].parse().unwrap_or(f64::NAN);
        let arrival = match row[5].as_str() {
            "bernoulli" => ArrivalModel::Bernoulli { lambda: param },
            "periodic" => ArrivalModel::Periodic {
                period: param as usize,
            },
            "gaw" => ArrivalModel::GenerateAtWill,
            other => panic!("unknown arrival {other}"),
        };
        let policy = match row[7].as_str() {
            "fcfs" => Policy::Fcfs,
            "plgfs" => Policy::Plgfs,
            other => panic!("unknown policy {other}"),
        };
        let analytic_value: f64 = row[8].parse().unwrap();
        assert_eq!(
            analytic::average_aoi(&ch, arrival, policy)
                .unwrap()
                .to_bits(),
            analytic_value.to_bits(),
            "{row:?}"
        );
        let sim: f64 = row[9].parse().unwrap();
        let se: f64 = row[10].parse().unwrap();
        assert!(
            (sim - analytic_value).abs() <= (0.02 * analytic_value).max(3.0 * se),
            "{row:?}"
        );
        let eta: f64 = row[0].parse().unwrap();
        keys.push((row[5].clone(), row[7].clone(), eta));
    }
    let order = |a: &str| {
        ["bernoulli", "periodic", "gaw"]
            .iter()
            .position(|x| *x == a)
            .unwrap()
    };
    for w in keys.windows(2) {
        let a = (order(&w[0].0), w[0].1.clone(), w[0].2);
        let b = (order(&w[1].0), w[1].1.clone(), w[1].2);
        assert!(a < b, "{a:?} !< {b:?}");
    }
}

#[test]
fn sweep_marks_unstable_and_unsupported_rows() {
    let out = ge_aoi(&[
        "sweep",
        "--lambda",
        "0.6",
        "--arrivals",
        "bernoulli",
        "--policies",
        "fcfs",
        "--eta-min",
        "0.5",
        "--eta-max",
        "0.5",
        "--iters",
        "4",
        "--slots",
        "500",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = parse_sweep(&stdout(&out));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][11], "unstable");
    assert_eq!(rows[0][8], "");
    assert!(!rows[0][9].is_empty());

    let out = ge_aoi(&[
        "sweep",
        "--pe-good",
        "0.2",
        "--pe-bad",
        "0.8",
        "--eta-max",
        "0.2",
        "--iters",
        "4",
        "--slots",
        "500",
    ]);
    let rows = parse_sweep(&stdout(&out));
    assert_eq!(rows.len(), 18);
    assert!(rows
        .iter()
        .all(|r| r[11] == "unsupported" && r[8].is_empty()));
}

#[test]
fn empty_sweep_grid_exits_one() {
    let out = ge_aoi(&["sweep", "--eta-min", "0.6", "--eta-max", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ge_aoi(&["sweep", "--eta-step", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "eta = 0.0\narrival = \"bernoulli\"\nlambda = \"1/3\"\npolicy = \"plgfs\"\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = ge_aoi(&["analytic", "--config", cfg]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    assert_eq!(stdout(&from_file).trim(), "4.000000000000");

    let overridden = ge_aoi(&["--config", cfg, "analytic", "--lambda", "0.5"]);
    assert!(overridden.status.success(), "{}", stderr(&overridden));
    assert_eq!(stdout(&overridden).trim(), "3.000000000000");

    let missing = ge_aoi(&["analytic", "--config", "/nonexistent/run.toml"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn solver_reports_boundary_solution() {
    let out = ge_aoi(&["solve-periodic-fcfs", "--eta", "0", "--K", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = stdout(&out);
    let mut rdr = csv::Reader::from_reader(rows.as_bytes());
    let rec = rdr.records().next().unwrap().unwrap();
    let beta: f64 = rec[1].parse().unwrap();
    assert!((beta - (5f64.sqrt() - 2.0)).abs() < 1e-9);
}
