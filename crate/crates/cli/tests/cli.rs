use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ringage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringage")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json_stdout(out: &Output) -> Value {
    assert_eq!(code(out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&ringage(&["--help"])), 0);
    assert_eq!(code(&ringage(&["--version"])), 0);
    assert_eq!(code(&ringage(&["sweep", "--help"])), 0);
}

#[test]
fn invalid_arguments_exit_one() {
    assert_eq!(code(&ringage(&[])), 1);
    assert_eq!(code(&ringage(&["sweep", "--bogus"])), 1);
    assert_eq!(code(&ringage(&["sweep", "--alpha", "1.5"])), 1);
    assert_eq!(code(&ringage(&["sweep", "--placements", "clustered"])), 1);
    assert_eq!(code(&ringage(&["sweep", "--n-min", "100", "--n-max", "120"])), 1);
    assert_eq!(code(&ringage(&["age", "--n", "8", "--cuts", "9"])), 1);
    assert_eq!(code(&ringage(&["age", "--n", "8", "--lambda", "0"])), 1);
    assert_eq!(
        code(&ringage(&["sweep", "--engines", "simulate", "--horizon", "-1"])),
        1
    );
    assert_eq!(code(&ringage(&["fit", "--input", "/nonexistent/sweep.csv"])), 1);
}

#[test]
fn age_of_two_node_ring() {
    let doc = json_stdout(&ringage(&["age", "--n", "2", "--jammers", "0", "--per-node"]));
    assert_eq!(doc["partition"], "[Ring(2)]");
    let age = doc["system_age"].as_f64().unwrap();
    assert!((age - 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(doc["segments"][0]["ages"].as_array().unwrap().len(), 2);
    assert_eq!(doc["metadata"]["command"], "age");
}

#[test]
fn age_with_explicit_cuts_on_both_models() {
    let line = json_stdout(&ringage(&["age", "--n", "8", "--cuts", "0,4"]));
    let ring = json_stdout(&ringage(&["age", "--n", "8", "--cuts", "4,0", "--model", "miniring"]));
    assert_eq!(line["partition"], "[Line(4), Line(4)]");
    assert_eq!(ring["partition"], "[Ring(4), Ring(4)]");
    let (l, r) = (
        line["system_age"].as_f64().unwrap(),
        ring["system_age"].as_f64().unwrap(),
    );
    assert!(r <= l && l <= 2.0 * r);
}

#[test]
fn sweep_writes_csv_plot_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = ringage(&[
        "sweep",
        "--n-min",
        "16",
        "--n-max",
        "256",
        "--alpha",
        "0.8",
        "--seed",
        "5",
        "--plot",
        "--out-dir",
        out,
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));

    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("n,jammers,alpha,placement,model,engine,system_age,ci_halfwidth")
    );
    assert_eq!(lines.count(), 5 * 3 * 2);
    assert!(std::fs::read_to_string(dir.path().join("sweep.svg"))
        .unwrap()
        .starts_with("<svg"));

    let meta = read_json(&dir.path().join("metadata.json"));
    let m = &meta["metadata"];
    assert_eq!(m["seed"], 5);
    assert_eq!(m["lambda_s"], 1.0);
    assert_eq!(m["lambda"], 1.0);
    assert!(m["ringage_version"].is_string() && m["cli_version"].is_string());
    assert!(m["rng"].as_str().unwrap().contains("ChaCha8"));
    assert_eq!(meta["n_values"], serde_json::json!([16, 32, 64, 128, 256]));
    assert_eq!(meta["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn seeded_simulation_sweeps_are_byte_identical() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (i, dir) in dirs.iter().enumerate() {
        let mut args = vec![
            "sweep",
            "--n-min",
            "8",
            "--n-max",
            "32",
            "--engines",
            "analytic,simulate",
            "--horizon",
            "300",
            "--replications",
            "3",
            "--seed",
            "11",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ];
        if i == 2 {
            args.push("--sequential");
        }
        assert_eq!(code(&ringage(&args)), 0);
    }
    let csv: Vec<Vec<u8>> = dirs
        .iter()
        .map(|d| std::fs::read(d.path().join("sweep.csv")).unwrap())
        .collect();
    assert_eq!(csv[0], csv[1]);
    assert_eq!(csv[0], csv[2]);
    let text = String::from_utf8(csv[0].clone()).unwrap();
    assert!(text
        .lines()
        .filter(|l| l.contains(",simulate,"))
        .all(|l| !l.ends_with(',')));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "n_min = 32\nn_max = 64\nalpha = 0.5\nplacements = [\"adjacent\"]\nmodels = [\"miniring\"]\nseed = 9\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = ringage(&[
        "--config",
        config.to_str().unwrap(),
        "sweep",
        "--alpha",
        "0.3",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let settings = &read_json(&out.join("metadata.json"))["metadata"]["settings"];
    assert_eq!(settings["alpha"], 0.3);
    assert_eq!(settings["n_min"], 32);
    assert_eq!(settings["seed"], 9);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
    assert!(csv.contains("64,3,0.3,adjacent,miniring,analytic,"));

    std::fs::write(&config, "alhpa = 0.5\n").unwrap();
    assert_eq!(code(&ringage(&["--config", config.to_str().unwrap(), "sweep"])), 1);
}

#[test]
fn fit_reports_slopes_and_partial_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let sweep = ringage(&[
        "sweep",
        "--n-min",
        "64",
        "--n-max",
        "4096",
        "--models",
        "miniring",
        "--out-dir",
        out,
    ]);
    assert_eq!(code(&sweep), 0);
    let csv = dir.path().join("sweep.csv");

    let fit = ringage(&["fit", "--input", csv.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(code(&fit), 0, "{}", String::from_utf8_lossy(&fit.stderr));
    let doc = read_json(&dir.path().join("fit.json"));
    assert_eq!(doc["window"], "decade");
    for f in doc["fits"].as_array().unwrap() {
        assert_eq!(f["points"], 4);
        let slope = f["slope"].as_f64().unwrap();
        assert!((0.42..=0.58).contains(&slope), "{f}");
    }

    // drop most equidistant rows so that series cannot be fitted
    let text = std::fs::read_to_string(&csv).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| !l.contains("equidistant") || l.starts_with("4096,"))
        .collect();
    let short = dir.path().join("short.csv");
    std::fs::write(&short, kept.join("\n") + "\n").unwrap();
    let partial = ringage(&["fit", "--input", short.to_str().unwrap(), "--window", "all"]);
    assert_eq!(code(&partial), 2);
    assert!(String::from_utf8_lossy(&partial.stderr).contains("equidistant/miniring/analytic"));
}

#[test]
fn simulate_reports_estimate_and_exact_value() {
    let doc = json_stdout(&ringage(&[
        "simulate",
        "--n",
        "12",
        "--jammers",
        "3",
        "--placement",
        "adjacent",
        "--horizon",
        "3000",
        "--replications",
        "8",
        "--seed",
        "4",
    ]));
    let sim = doc["system_age"].as_f64().unwrap();
    let exact = doc["analytic_system_age"].as_f64().unwrap();
    let se = doc["std_error"].as_f64().unwrap();
    assert!(
        se > 0.0 && (sim - exact).abs() <= 4.0 * se,
        "{sim} vs {exact} (se {se})"
    );
    assert_eq!(doc["partition"], "[Line(1), Line(1), Line(10)]");
    assert_eq!(doc["metadata"]["seed"], 4);
    assert_eq!(doc["warmup"], 300.0);
}
