use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use casecontrol::oracle::{random_population, PopulationConstraints};
use casecontrol::synthetic::{draw_mc_sample, sample_from_population, McDesign};
use casecontrol::{Design, RngSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_casecontrol"));
    c.env_remove("CASECONTROL_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--format", "structured"];
    full.extend_from_slice(args);
    let o = run(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn university_csv(dir: &Path) -> String {
    let mut body = String::from("y,t\n");
    for (y, t, count) in [(0, 0, 151), (0, 1, 332), (1, 0, 51), (1, 1, 155)] {
        for _ in 0..count {
            body.push_str(&format!("{y},{t}\n"));
        }
    }
    let path = dir.join("university.csv");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

/// Case-population sample from a random monotone population; the single
/// covariate is a cell label.
fn case_population_csv(dir: &Path) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pop = random_population(
        &mut rng,
        3,
        PopulationConstraints {
            mtr: true,
            mts: true,
            unconfounded: false,
        },
    );
    let data = sample_from_population(&pop, Design::CasePopulation, 0.5, 3000, &mut rng).unwrap();
    let path = dir.join("cp.csv");
    data.write_csv(std::fs::File::create(&path).unwrap())
        .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn demo_prints_table_odds_ratios_quickly() {
    let start = Instant::now();
    let o = run(&["demo"]);
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!(o.status.success());
    let out = stdout(&o);
    for v in ["2.1852", "2.1874", "2.0927", "1.3823"] {
        assert!(out.contains(v), "{v} missing:\n{out}");
    }
}

#[test]
fn rr_without_covariates_gives_table_odds_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let input = university_csv(dir.path());
    let v = json(&["rr", "--input", &input, "--pbar", "0.15"]);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "rr");
    let rows = v["rows"].as_array().unwrap();
    let exp0 = rows.iter().find(|r| r["label"] == "exp[beta(0)]").unwrap();
    assert!((exp0["value"].as_f64().unwrap() - 1.38).abs() < 0.005);
    assert_eq!(v["band"]["rows"].as_array().unwrap().len(), 16);
}

#[test]
fn rr_case_population_layout_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = case_population_csv(dir.path());
    let out = dir.path().join("out");
    let o = run(&[
        "rr",
        "--input",
        &input,
        "--design",
        "cp",
        "--basis",
        "categorical",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let labels: Vec<&str> = text
        .lines()
        .map(|l| l.split_whitespace().next().unwrap_or(""))
        .filter(|w| w.starts_with("beta") || w.starts_with("exp") || *w == "95%")
        .collect();
    assert_eq!(labels, ["beta(0)", "95%", "exp[beta(0)]", "95%"]);
    let band = std::fs::read_to_string(out.join("rr_band.csv")).unwrap();
    let uppers: Vec<&str> = band
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(uppers.len(), 101);
    assert!(uppers.iter().all(|u| *u == uppers[0]));
    assert!(out.join("rr_report.json").exists());
}

#[test]
fn ar_case_population_grid_and_linearity() {
    let dir = tempfile::tempdir().unwrap();
    let input = case_population_csv(dir.path());
    let v = json(&[
        "ar",
        "--input",
        &input,
        "--design",
        "cp",
        "--basis",
        "categorical",
        "--pbar",
        "0.15",
        "-B",
        "200",
    ]);
    let rows = v["curve"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 16);
    assert_eq!(rows[0]["point"].as_f64().unwrap(), 0.0);
    let last = &rows[15];
    let slope = last["upper"].as_f64().unwrap() / last["p"].as_f64().unwrap();
    for r in rows {
        let (p, up) = (r["p"].as_f64().unwrap(), r["upper"].as_f64().unwrap());
        assert!((up - slope * p).abs() < 1e-12);
    }
    assert_eq!(v["diagnostics"]["resample_mode"], "PlainIid");
}

#[test]
fn ar_output_is_deterministic_and_seed_comes_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = RngSpec::new(3).stream(99, 0);
    let design = McDesign {
        n_per_stratum: 300,
        ..Default::default()
    };
    let data = draw_mc_sample(&design, &mut rng).unwrap();
    let input = dir.path().join("cc.csv");
    data.write_csv(std::fs::File::create(&input).unwrap())
        .unwrap();
    let args = [
        "ar",
        "--input",
        input.to_str().unwrap(),
        "--basis",
        "linear",
        "--pbar",
        "0.1",
        "-B",
        "200",
    ];
    let a = stdout(&run(&args));
    let b = stdout(&run(&args));
    assert_eq!(a, b);
    let c = bin()
        .args(args)
        .env("CASECONTROL_SEED", "11")
        .output()
        .unwrap();
    assert!(c.status.success());
    assert!(stdout(&c).contains("seed=11"));
}

#[test]
fn validation_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = university_csv(dir.path());
    let code = |args: &[&str]| run(args).status.code().unwrap();
    assert_eq!(code(&["rr", "--input", &input, "--alpha", "0.7"]), 2);
    assert_eq!(code(&["rr", "--input", &input, "--pbar", "1.5"]), 2);
    assert_eq!(code(&["ar", "--input", &input, "-B", "100"]), 2);
    assert_eq!(code(&["rr", "--input", &input, "--y", "outcome"]), 10);
    assert_eq!(code(&["rr", "--input", "/nonexistent/file.csv"]), 3);
    assert_eq!(code(&["rr", "--input", &input, "--design", "bogus"]), 2);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,t\n0,1\n2,0\n1,1\n").unwrap();
    assert_eq!(code(&["rr", "--input", bad.to_str().unwrap()]), 11);
}

#[test]
fn oracle_suite_passes_and_negative_control_fails() {
    let o = run(&["oracle", "--populations", "25"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("PASS theorem_rr_containment_mtr_mts"));
    assert!(!out.contains("FAIL"));

    // MTR holds but the treated have lower baseline risk: MTS fails
    let dir = tempfile::tempdir().unwrap();
    let pop = dir.path().join("pop.csv");
    std::fs::write(
        &pop,
        "x,t,y0,y1,mass\n0,0,0,0,0.05\n0,0,0,1,0.2\n0,0,1,1,0.25\n0,1,0,0,0.45\n0,1,0,1,0.025\n0,1,1,1,0.025\n",
    )
    .unwrap();
    let v = json(&["oracle", "--population", pop.to_str().unwrap()]);
    assert_eq!(v["assumptions"]["mts"], false);
    assert_eq!(v["all_passed"], false);
    let checks = v["checks"].as_array().unwrap();
    let thm = checks
        .iter()
        .find(|c| c["name"] == "theorem_rr_containment_mtr_mts")
        .unwrap();
    assert!(thm["failures"].as_u64().unwrap() > 0);
    assert!(thm["counterexample"]
        .as_str()
        .unwrap()
        .contains("x,t,y0,y1,mass"));
}

#[test]
fn mc_smoke_run_is_deterministic() {
    let args = ["mc", "-R", "20", "--n-per-stratum", "300", "--seed", "4"];
    let start = Instant::now();
    let a = run(&args);
    assert!(start.elapsed().as_secs() < 60);
    assert!(a.status.success());
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    assert_eq!(
        out.lines()
            .filter(|l| l.starts_with("parametric") || l.starts_with("sieve"))
            .count(),
        4
    );
}

#[test]
fn help_documents_seed_environment_variable() {
    let out = stdout(&run(&["mc", "--help"]));
    assert!(out.contains("CASECONTROL_SEED"));
}
