use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcmc-cert")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn records(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("bad JSON line `{l}`: {e}")))
        .collect()
}

fn of_kind<'a>(recs: &'a [Value], kind: &str) -> Vec<&'a Value> {
    recs.iter().filter(|r| r["kind"] == kind).collect()
}

#[test]
fn json_records_carry_the_header() {
    let o = run(&["--json", "--seed", "5", "rates", "--preset", "contracting-normals", "--gamma", "0.9,0.95,0.97"]);
    assert_eq!(code(&o), 0);
    let recs = records(&o);
    let hash = recs[0]["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    for r in &recs {
        assert_eq!(r["schema_version"], 1);
        assert_eq!(r["command"], "rates");
        assert_eq!(r["seed"], 5);
        assert_eq!(r["config_hash"], hash.as_str());
    }
    let rates = of_kind(&recs, "rate");
    assert_eq!(rates.len(), 3);
    let gammas: Vec<f64> = rates.iter().map(|r| r["gamma"].as_f64().unwrap()).collect();
    assert_eq!(gammas, vec![0.9, 0.95, 0.97]);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&run(&["rates", "--preset", "contracting-normals"])), 0);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["plan", "--preset", "table55", "--eps", "0"])), 2);
    assert_eq!(code(&run(&["plan", "--theta", "0.5"])), 2);
    assert_eq!(code(&run(&["rates", "--no-such-flag"])), 2);
    assert_eq!(code(&run(&["--workers", "0", "rates", "--preset", "contracting-normals"])), 2);
    assert_eq!(code(&run(&["hrem", "--synthetic", "--target", "lambda_e", "--sampler", "block"])), 2);
    // The fixed-scan minorization constant underflows on the synthetic data.
    assert_eq!(code(&run(&["hrem", "--synthetic", "--target", "lambda_e", "--sampler", "fixed-scan"])), 3);
    let o = run(&["--quick", "verify", "--criteria", "1"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn same_seed_same_output_any_worker_count() {
    let args = |w: &'static str, seed: &'static str| {
        vec!["--json", "--seed", seed, "--workers", w, "simulate", "--scheme", "median", "--m", "5", "--n", "20000"]
    };
    let a = run(&args("1", "9"));
    let b = run(&args("4", "9"));
    let c = run(&args("4", "10"));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn budget_refusal_and_force() {
    let o = run(&["--json", "simulate", "--n", "100000", "--max-steps", "1000"]);
    assert_eq!(code(&o), 2);
    let recs = records(&o);
    let cost = of_kind(&recs, "cost");
    assert_eq!(cost.len(), 1);
    assert_eq!(cost[0]["steps"], 100000);
    assert!(of_kind(&recs, "simulate").is_empty());
    let o = run(&["--json", "--force", "simulate", "--n", "100000", "--max-steps", "1000"]);
    assert_eq!(code(&o), 0);
    assert_eq!(of_kind(&records(&o), "simulate").len(), 1);
    // A planned run at the table tolerances is far over the default budget.
    let o = run(&["--json", "simulate", "--eps", "0.1", "--alpha", "0.1"]);
    assert_eq!(code(&o), 2);
    assert_eq!(of_kind(&records(&o), "plan").len(), 1);
}

#[test]
fn long_walk_estimate_is_within_three_standard_errors() {
    let o = run(&["--json", "simulate", "--n", "1000000"]);
    assert_eq!(code(&o), 0);
    let r = &of_kind(&records(&o), "simulate")[0].clone();
    let est = r["estimate"].as_f64().unwrap();
    assert!(est.abs() <= 3.0 * (3.0f64 / 1e6).sqrt(), "estimate {est}");
    let (bm, rs) = (r["bm_var"].as_f64().unwrap(), r["rs_var"].as_f64().unwrap());
    assert!((bm / 3.0 - 1.0).abs() < 0.15 && (rs / 3.0 - 1.0).abs() < 0.15, "bm {bm}, rs {rs}");
}

#[test]
fn malformed_data_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "group,y\ng1,0.1\ng2,0.2\ng3,oops\n").unwrap();
    let o = run(&["hrem", "--data", p.to_str().unwrap(), "--m0", "0", "--s0", "1", "--a1", "2", "--b1", "2", "--a2", "2", "--b2", "2"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.conf");
    std::fs::write(&cfg, "# table row\npreset = table55\nrow = 1\neps = 0.2\nworkers = 2\n").unwrap();
    let c = cfg.to_str().unwrap();
    let plan = |o: &Output| of_kind(&records(o), "plan")[0].clone();
    let from_file = run(&["--json", "--config", c, "plan"]);
    let overridden = run(&["--json", "--config", c, "plan", "--eps", "0.1"]);
    let flags = run(&["--json", "plan", "--preset", "table55", "--row", "1", "--eps", "0.1"]);
    for o in [&from_file, &overridden, &flags] {
        assert_eq!(code(o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(plan(&from_file)["meta"]["eps"], 0.2);
    assert_eq!(plan(&overridden)["meta"]["eps"], 0.1);
    // Worker count is an output setting and stays out of the hash.
    assert_eq!(plan(&overridden)["config_hash"], plan(&flags)["config_hash"]);
    assert_ne!(plan(&from_file)["config_hash"], plan(&flags)["config_hash"]);
    assert_eq!(plan(&flags)["n"], 6459458862u64);
}

#[test]
fn out_file_and_trace_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.jsonl");
    let trace = dir.path().join("trace.csv");
    let o = run(&[
        "--json",
        "--out",
        out.to_str().unwrap(),
        "--dump-trace",
        trace.to_str().unwrap(),
        "simulate",
        "--chain",
        "five-state",
        "--f",
        "0,1,-1,1,-1",
        "--n",
        "500",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let report = std::fs::read_to_string(&out).unwrap();
    assert!(report.lines().any(|l| l.contains("\"kind\":\"simulate\"")));
    let csv = std::fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("run,index,") && header.ends_with(",bell"), "{header}");
    assert_eq!(lines.count(), 500);
}

#[test]
fn adaptive_demo_writes_frequency_table() {
    let o = run(&["adaptive-demo", "--example", "trap", "--n", "20", "--reps", "2000"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "step,p_one,tv_to_uniform,stationary_p_one");
    assert_eq!(rows.len(), 22);
}
