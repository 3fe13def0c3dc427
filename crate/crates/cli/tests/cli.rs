use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sdami(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdami"))
        .current_dir(dir)
        .env_remove("SDAMI_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data lines of a provenance-prefixed CSV, header included.
fn csv_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

/// Short training so the end-to-end tests stay fast.
const FAST_CONFIG: &str = r#"{
  "pipeline": { "net": { "hidden_layers": [8, 6], "optimizer": { "epochs": 150 } } }
}"#;

#[test]
fn simulate_case3_shape_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdami(
        dir.path(),
        &[
            "simulate",
            "--case",
            "3",
            "--n",
            "300",
            "--k",
            "150",
            "--sigma",
            "0.5",
            "--seed",
            "7",
            "-o",
            "case3.csv",
        ],
    );
    ok(&out);
    let text = fs::read_to_string(dir.path().join("case3.csv")).unwrap();
    assert!(text.starts_with("# config_hash="));
    assert!(text.lines().next().unwrap().ends_with("seed=7"));
    let lines = csv_lines(&dir.path().join("case3.csv"));
    assert_eq!(lines.len(), 301);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header.len(), 151);
    assert_eq!(*header.last().unwrap(), "y");
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 151));

    let truth = read_json(&dir.path().join("case3.truth.json"));
    assert_eq!(truth["main"], serde_json::json!([1, 2, 3]));
    assert_eq!(truth["interactions"], serde_json::json!([[4, 5]]));
    assert_eq!(truth["sigma"], serde_json::json!(0.5));
    assert_eq!(truth["case_id"], serde_json::json!(3));
    assert_eq!(truth["seed"], serde_json::json!(7));
}

#[test]
fn simulate_is_deterministic_in_seed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        ok(&sdami(
            dir.path(),
            &[
                "simulate", "--case", "1", "--n", "50", "--k", "10", "--seed", "3", "-o", name,
            ],
        ));
    }
    ok(&sdami(
        dir.path(),
        &[
            "simulate", "--case", "1", "--n", "50", "--k", "10", "--seed", "4", "-o", "c.csv",
        ],
    ));
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn simulate_chip_has_physical_and_noise_columns() {
    let dir = tempfile::tempdir().unwrap();
    ok(&sdami(
        dir.path(),
        &[
            "simulate",
            "--chip",
            "--noise-features",
            "21",
            "--n",
            "100",
            "-o",
            "chip.csv",
        ],
    ));
    let lines = csv_lines(&dir.path().join("chip.csv"));
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0].split(',').count(), 31);
}

#[test]
fn fit_then_predict_reproduces_training_mse() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), FAST_CONFIG).unwrap();
    ok(&sdami(
        dir.path(),
        &[
            "simulate",
            "--case",
            "1",
            "--n",
            "120",
            "--k",
            "12",
            "--seed",
            "11",
            "-o",
            "train.csv",
        ],
    ));
    ok(&sdami(
        dir.path(),
        &[
            "--config",
            "cfg.json",
            "fit",
            "--data",
            "train.csv",
            "--model",
            "model.json",
            "--report",
            "report.json",
        ],
    ));
    ok(&sdami(
        dir.path(),
        &[
            "predict",
            "--data",
            "train.csv",
            "--model",
            "model.json",
            "-o",
            "pred.csv",
        ],
    ));

    let report = read_json(&dir.path().join("report.json"));
    let train_mse = report["train_mse"].as_f64().unwrap();
    let hash = report["config_hash"].as_str().unwrap().to_string();
    assert_eq!(report["seed"], serde_json::json!(0));

    let data = csv_lines(&dir.path().join("train.csv"));
    let ys: Vec<f64> = data[1..]
        .iter()
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let pred_text = fs::read_to_string(dir.path().join("pred.csv")).unwrap();
    assert_eq!(
        pred_text.lines().next().unwrap(),
        format!("# config_hash={hash} seed=0")
    );
    let preds: Vec<f64> = csv_lines(&dir.path().join("pred.csv"))[1..]
        .iter()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(preds.len(), ys.len());
    let mse = ys
        .iter()
        .zip(&preds)
        .map(|(y, p)| (y - p) * (y - p))
        .sum::<f64>()
        / ys.len() as f64;
    assert!((mse - train_mse).abs() <= 1e-12, "{mse} vs {train_mse}");

    ok(&sdami(
        dir.path(),
        &[
            "evaluate",
            "--data",
            "train.csv",
            "--model",
            "model.json",
            "--truth",
            "train.truth.json",
            "-o",
            "eval.json",
        ],
    ));
    let eval = read_json(&dir.path().join("eval.json"));
    assert!((eval["mse"].as_f64().unwrap() - train_mse).abs() <= 1e-12);
    assert_eq!(eval["config_hash"].as_str().unwrap(), hash);
    assert!(eval["selection"]["fpr"].as_f64().is_some());

    let plots = dir.path().join("plots");
    ok(&sdami(
        dir.path(),
        &[
            "plot",
            "--model",
            "model.json",
            "--out-dir",
            plots.to_str().unwrap(),
            "--case",
            "1",
        ],
    ));
    let model = read_json(&dir.path().join("model.json"));
    let n_components = model["components"].as_array().unwrap().len();
    let svgs: Vec<_> = fs::read_dir(&plots).unwrap().collect();
    assert_eq!(svgs.len(), n_components);
    for e in svgs {
        let text = fs::read_to_string(e.unwrap().path()).unwrap();
        assert!(text.contains(r#"version="1.1""#));
        assert!(text.contains(&format!("config_hash={hash}")));
    }
}

#[test]
fn screen_and_partition_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    ok(&sdami(
        dir.path(),
        &[
            "simulate", "--case", "3", "--n", "150", "--k", "10", "--seed", "5", "-o", "d.csv",
        ],
    ));
    ok(&sdami(
        dir.path(),
        &[
            "screen",
            "--data",
            "d.csv",
            "--table",
            "cp.csv",
            "-o",
            "active.json",
        ],
    ));
    let cp = csv_lines(&dir.path().join("cp.csv"));
    assert_eq!(cp[0], "lambda,train_mse,df,cp");
    assert_eq!(cp.len(), 31);
    let active = read_json(&dir.path().join("active.json"));
    let set: Vec<u64> = active["active"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    for j in [1, 2, 3] {
        assert!(set.contains(&j), "{set:?}");
    }

    ok(&sdami(
        dir.path(),
        &[
            "partition",
            "--data",
            "d.csv",
            "--table",
            "cv.csv",
            "-o",
            "part.json",
        ],
    ));
    let cv = csv_lines(&dir.path().join("cv.csv"));
    assert_eq!(cv[0], "lambda,mean_cv_err,se_cv_err,n_active_groups");
    assert_eq!(cv.len(), 31);
    let part = read_json(&dir.path().join("part.json"));
    assert!(part["converged"].as_bool().unwrap());
    assert!(part["kkt_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn benchmark_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, js: &'static str| {
        vec![
            "--seed",
            "9",
            "benchmark",
            "--case",
            "1",
            "--n",
            "80",
            "--k",
            "10",
            "--n-test",
            "200",
            "--reps",
            "3",
            "--methods",
            "lasso,fspam",
            "-o",
            out,
            "--json",
            js,
        ]
    };
    ok(&sdami(dir.path(), &args("a.csv", "a.json")));
    ok(&sdami(
        dir.path(),
        &["--jobs", "1"]
            .iter()
            .copied()
            .chain(args("b.csv", "b.json"))
            .collect::<Vec<_>>(),
    ));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    let lines = csv_lines(&dir.path().join("a.csv"));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("lasso,3,0,"));
    assert!(lines[2].starts_with("fspam,3,0,"));
    let strip = |p: &str| {
        let mut v = read_json(&dir.path().join(p));
        v.as_object_mut().unwrap().remove("timings");
        v
    };
    assert_eq!(strip("a.json"), strip("b.json"));
}

#[test]
fn footprint_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    ok(&sdami(
        dir.path(),
        &[
            "footprint",
            "--function",
            "xor",
            "--variable",
            "2",
            "--n-mc",
            "4000",
            "-o",
            "xor.csv",
            "--verdict",
            "xor.json",
        ],
    ));
    assert!(read_json(&dir.path().join("xor.json"))["is_constant"]
        .as_bool()
        .unwrap());
    let lines = csv_lines(&dir.path().join("xor.csv"));
    assert_eq!(lines[0], "x,m_hat,mc_se");

    ok(&sdami(
        dir.path(),
        &[
            "footprint",
            "--function",
            "f5",
            "--n-mc",
            "4000",
            "-o",
            "f5.csv",
            "--verdict",
            "f5.json",
        ],
    ));
    assert!(!read_json(&dir.path().join("f5.json"))["is_constant"]
        .as_bool()
        .unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| sdami(dir.path(), args).status.code();

    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&[]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["simulate", "--case", "1"]), Some(1));
    assert_eq!(
        code(&["footprint", "--function", "nope", "-o", "f.csv"]),
        Some(1)
    );
    assert_eq!(
        code(&[
            "footprint",
            "--function",
            "f1",
            "--variable",
            "2",
            "-o",
            "f.csv"
        ]),
        Some(1)
    );

    assert_eq!(code(&["simulate", "--case", "9", "-o", "x.csv"]), Some(2));
    assert_eq!(
        code(&[
            "fit",
            "--data",
            "missing.csv",
            "--model",
            "m.json",
            "--report",
            "r.json"
        ]),
        Some(2)
    );
    fs::write(dir.path().join("bad.csv"), "a,b,y\n1,2,3\n1,oops,3\n").unwrap();
    assert_eq!(
        code(&["screen", "--data", "bad.csv", "--table", "t.csv", "-o", "a.json"]),
        Some(2)
    );
    fs::write(
        dir.path().join("model.json"),
        "{\"schema\": \"sdami-model\"",
    )
    .unwrap();
    assert_eq!(
        code(&[
            "predict",
            "--data",
            "bad.csv",
            "--model",
            "model.json",
            "-o",
            "p.csv"
        ]),
        Some(2)
    );

    // A three-level column cannot carry a degree-4 polynomial block.
    let rows: String = (0..60)
        .map(|i| format!("{},{},{}\n", i % 3, i, 0.5 * i as f64))
        .collect();
    fs::write(dir.path().join("levels.csv"), format!("a,b,y\n{rows}")).unwrap();
    let out = sdami(
        dir.path(),
        &[
            "screen",
            "--data",
            "levels.csv",
            "--table",
            "t.csv",
            "-o",
            "a.json",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank deficient"));
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"simulation": {"cases": 2}}"#,
    )
    .unwrap();
    let run = |cfg: &str| {
        Command::new(env!("CARGO_BIN_EXE_sdami"))
            .current_dir(dir.path())
            .env("SDAMI_CONFIG", cfg)
            .args(["simulate", "-o", "d.csv"])
            .output()
            .unwrap()
    };
    assert_eq!(run("bad.json").status.code(), Some(2));

    fs::write(
        dir.path().join("good.json"),
        r#"{"seed": 21, "simulation": {"n": 40, "k": 6}}"#,
    )
    .unwrap();
    ok(&run("good.json"));
    let lines = csv_lines(&dir.path().join("d.csv"));
    assert_eq!(lines.len(), 41);
    assert_eq!(lines[0].split(',').count(), 7);
    let first = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert!(first.lines().next().unwrap().ends_with("seed=21"));
}
