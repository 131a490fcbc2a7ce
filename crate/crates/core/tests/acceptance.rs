//! Acceptance criteria, one test per criterion. Each test writes a single
//! `criterion N ... PASS|FAIL` line straight to stderr so it shows up even
//! when output capture is on.

use std::io::Write;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use casecontrol::ar::{ar_curve, bc_nu_star, estimate_beta_ar, estimate_ub_ar, ArConfig};
use casecontrol::cli::cmd_demo;
use casecontrol::oracle::suite::{run_suite, SuiteConfig};
use casecontrol::oracle::{project, random_population, PopulationConstraints};
use casecontrol::rr::{estimate_beta_combined, estimate_beta_plugin, rr_band, Method, PGrid};
use casecontrol::synthetic::{
    draw_mc_sample, mc_design_fixture, run_mc_study, sample_from_population, table_fixtures,
    McEstimator, McRow, McSummary,
};
use casecontrol::{odds_ratio_2x2, BasisSpec, Design, LogitOptions, RngSpec};
use rayon::prelude::*;

const SEED: u64 = 20240601;

fn report(criterion: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {criterion:<28} {status}  {detail}");
}

/// The R=1000 study is shared by criteria 2 and 6.
fn mc_study() -> &'static (McSummary, Duration) {
    static STUDY: OnceLock<(McSummary, Duration)> = OnceLock::new();
    STUDY.get_or_init(|| {
        let start = Instant::now();
        let s = run_mc_study(
            &mc_design_fixture(),
            &[McEstimator::parametric(), McEstimator::sieve()],
            1000,
            SEED,
        )
        .expect("study runs");
        (s, start.elapsed())
    })
}

fn row<'a>(s: &'a McSummary, estimator: &str, target: &str) -> &'a McRow {
    s.rows
        .iter()
        .find(|r| r.estimator == estimator && r.target == target)
        .expect("row present")
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

#[test]
fn criterion_1_toy_tables() {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_casecontrol"))
        .arg("demo")
        .output()
        .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(out.status.success());
    let demo = cmd_demo().unwrap();
    let mut details = Vec::new();
    let mut pass = elapsed < 1.0;
    for f in table_fixtures() {
        // table3 is the case-population reweighting of the population table;
        // its exact ratio comes from the population itself
        let exact = if f.name == "table3" {
            demo.case_population_exact
        } else {
            odds_ratio_2x2(&f.table()).unwrap()
        };
        let ok = (f.published_odds_ratio - exact).abs() <= 0.005;
        pass &= ok;
        details.push(format!(
            "{} {:.2}~{:.4}",
            f.name, f.published_odds_ratio, exact
        ));
    }
    report(
        "1 toy tables",
        pass,
        &format!("{}; demo {:.3}s", details.join(", "), elapsed),
    );
    assert!(pass);
}

#[test]
fn criterion_2_monte_carlo() {
    let (s, elapsed) = mc_study();
    let p1 = row(s, "parametric", "beta(1)");
    let p0 = row(s, "parametric", "beta(0)");
    let s1 = row(s, "sieve", "beta(1)");
    let s0 = row(s, "sieve", "beta(0)");
    let checks = [
        (
            "parametric |bias| beta(1)",
            p1.mean_bias.abs() <= 0.03,
            p1.mean_bias,
        ),
        (
            "parametric |bias| beta(0)",
            p0.mean_bias.abs() <= 0.03,
            p0.mean_bias,
        ),
        (
            "parametric coverage beta(1)",
            within(p1.coverage, 0.92, 0.97),
            p1.coverage,
        ),
        (
            "parametric coverage beta(0)",
            within(p0.coverage, 0.92, 0.97),
            p0.coverage,
        ),
        (
            "sieve bias beta(1)",
            within(s1.mean_bias, 0.02, 0.12),
            s1.mean_bias,
        ),
        (
            "sieve bias beta(0)",
            within(s0.mean_bias, 0.01, 0.09),
            s0.mean_bias,
        ),
        (
            "sieve coverage beta(1)",
            within(s1.coverage, 0.93, 0.99),
            s1.coverage,
        ),
        (
            "sieve coverage beta(0)",
            within(s0.coverage, 0.93, 0.99),
            s0.coverage,
        ),
        (
            "runtime seconds",
            elapsed.as_secs_f64() <= 900.0,
            elapsed.as_secs_f64(),
        ),
    ];
    let pass = checks.iter().all(|c| c.1);
    let detail: Vec<String> = checks
        .iter()
        .map(|(n, ok, v)| format!("{n}={v:.4}{}", if *ok { "" } else { "(!)" }))
        .collect();
    report("2 monte carlo", pass, &detail.join(", "));
    // the published error row matches the mean squared error
    let _ = writeln!(
        std::io::stderr().lock(),
        "    note: parametric MSE beta(1)={:.4} beta(0)={:.4}, RMSE beta(1)={:.4} beta(0)={:.4}",
        p1.mse,
        p0.mse,
        p1.rmse,
        p0.rmse
    );
    assert!(pass, "{detail:?}");
}

#[test]
fn criterion_2_parametric_rmse_windows() {
    let (s, _) = mc_study();
    let p1 = row(s, "parametric", "beta(1)");
    let p0 = row(s, "parametric", "beta(0)");
    let pass = within(p1.rmse, 0.04, 0.08) && within(p0.rmse, 0.02, 0.05);
    report(
        "2 parametric RMSE windows",
        pass,
        &format!(
            "RMSE beta(1)={:.4} in [0.04,0.08], beta(0)={:.4} in [0.02,0.05]",
            p1.rmse, p0.rmse
        ),
    );
    assert!(pass, "RMSE beta(1)={} beta(0)={}", p1.rmse, p0.rmse);
}

#[test]
fn criterion_3_oracle_identities() {
    let res = run_suite(&SuiteConfig {
        populations: 200,
        seed: SEED,
        tol: 1e-10,
        ..Default::default()
    })
    .unwrap();
    let pass = res.iter().all(|c| c.passed() && c.cases >= 200);
    let detail: Vec<String> = res
        .iter()
        .map(|c| format!("{}:{}/{}", c.name, c.cases - c.failures, c.cases))
        .collect();
    report("3 oracle identities", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_4_estimator_equivalence() {
    let design = mc_design_fixture();
    let spec = BasisSpec::linear();
    let opts = LogitOptions::default();
    let rng = RngSpec::new(SEED ^ 4);
    let max_gap = (0..50u64)
        .into_par_iter()
        .map(|r| {
            let data = draw_mc_sample(&design, &mut rng.stream(4, r)).unwrap();
            (0..2u8)
                .map(|y| {
                    let a = estimate_beta_combined(&data, &spec, y, &opts).unwrap();
                    let b = estimate_beta_plugin(&data, &spec, y, &opts).unwrap();
                    (a.value - b.value).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let pass = max_gap <= 1e-6;
    report(
        "4 estimator equivalence",
        pass,
        &format!("max |combined - plugin| = {max_gap:.2e} over 50 draws"),
    );
    assert!(pass);
}

#[test]
fn criterion_5_eif_calibration() {
    let est = McEstimator {
        name: "parametric-plugin".into(),
        spec: BasisSpec::linear(),
        method: Method::PlugIn,
    };
    let design = mc_design_fixture();
    assert_eq!(2 * design.n_per_stratum, 2000);
    let s = run_mc_study(&design, &[est], 1000, SEED ^ 5).unwrap();
    let ratios: Vec<(String, f64)> = s
        .rows
        .iter()
        .map(|r| (r.target.clone(), r.mean_se / r.sd))
        .collect();
    let pass = ratios.iter().all(|(_, q)| (q - 1.0).abs() <= 0.15);
    let detail: Vec<String> = ratios
        .iter()
        .map(|(t, q)| format!("{t} se/sd={q:.3}"))
        .collect();
    report("5 EIF calibration", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_6_band_coverage() {
    let (s, _) = mc_study();
    let design = mc_design_fixture();
    let truth = [design.beta(0), design.beta(1)];
    assert!(truth.iter().all(|b| (b - 0.5).abs() < 1e-12));
    let grid = PGrid::new(1.0, 0.01).unwrap();
    let parametric = &s.draws[0];
    let usable: Vec<_> = parametric.iter().take(500).flatten().collect();
    let covered = usable
        .iter()
        .filter(|[b0, b1]| {
            let band = rr_band(b0, Some(b1), 0.05, Design::CaseControl, &grid).unwrap();
            band.rows.iter().all(|r| {
                r.lower <= (0.5f64).exp() && r.upper.ln() >= (1.0 - r.p) * truth[0] + r.p * truth[1]
            })
        })
        .count();
    let rate = covered as f64 / usable.len() as f64;
    let pass = usable.len() == 500 && rate >= 0.93;
    report(
        "6 band coverage",
        pass,
        &format!(
            "{covered}/{} replications covered ({rate:.3})",
            usable.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_attributable_risk() {
    let mut rng = RngSpec::new(SEED).stream(7, 0);
    let pop = random_population(
        &mut rng,
        3,
        PopulationConstraints {
            mtr: true,
            mts: true,
            unconfounded: false,
        },
    );
    let law = project(&pop, Design::CaseControl, 0.5).unwrap();
    let cat = BasisSpec::categorical();

    // structural checks on one sample per design
    let cc = sample_from_population(&pop, Design::CaseControl, 0.5, 2000, &mut rng).unwrap();
    let cp = sample_from_population(&pop, Design::CasePopulation, 0.5, 2000, &mut rng).unwrap();
    let mut structure = true;
    for y in 0..2 {
        structure &= estimate_beta_ar(&cc, &cat, &cat, 0.0, y).unwrap() == 0.0;
    }
    structure &= estimate_ub_ar(&cc, &cat, &cat, 0.0).unwrap() == 0.0;
    structure &= estimate_ub_ar(&cc, &cat, &cat, 1.0).unwrap() == 0.0;
    let cfg = ArConfig {
        retro_spec: cat.clone(),
        pro_spec: cat.clone(),
        grid: PGrid::new(0.15, 0.01).unwrap(),
        b: 300,
        seed: SEED,
        ..Default::default()
    };
    let (cp_curve, _) = ar_curve(&cp, &cfg).unwrap();
    structure &= cp_curve.rows[0].point == 0.0;
    let slope = cp_curve.rows.last().map(|r| r.upper / r.p).unwrap();
    structure &= cp_curve
        .rows
        .iter()
        .all(|r| (r.upper - slope * r.p).abs() <= 1e-12 * slope.abs().max(1.0));
    structure &= [0.01, 0.05, 0.1, 0.5]
        .iter()
        .all(|&a| bc_nu_star(0.5, a, 300) == 1.0 - a);

    // pointwise coverage of the oracle bound at interior grid points
    let cfg = ArConfig {
        grid: PGrid::new(1.0, 0.1).unwrap(),
        ..cfg
    };
    let reps = 300u64;
    let hits: Vec<Vec<bool>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngSpec::new(SEED).stream(70, r);
            let data =
                sample_from_population(&pop, Design::CaseControl, 0.5, 2000, &mut rng).unwrap();
            let (curve, _) = ar_curve(
                &data,
                &ArConfig {
                    seed: SEED + r,
                    ..cfg.clone()
                },
            )
            .unwrap();
            curve.rows[1..curve.rows.len() - 1]
                .iter()
                .map(|row| row.upper >= law.ub_ar(row.p))
                .collect()
        })
        .collect();
    let points = hits[0].len();
    let rates: Vec<f64> = (0..points)
        .map(|j| hits.iter().filter(|h| h[j]).count() as f64 / reps as f64)
        .collect();
    let min_rate = rates.iter().copied().fold(1.0, f64::min);
    let pass = structure && min_rate >= 0.93;
    let rates_txt: Vec<String> = rates.iter().map(|r| format!("{r:.3}")).collect();
    report(
        "7 attributable risk",
        pass,
        &format!(
            "structure {}; coverage at p=0.1..0.9: {}",
            if structure { "ok" } else { "broken" },
            rates_txt.join(" ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_documentation_only() {
    // empirical headline numbers cannot be recomputed without microdata; the
    // embedded fixtures must still load and feed the pipeline
    let tables = table_fixtures();
    let pop = casecontrol::synthetic::acs_population();
    let pass =
        tables.len() == 4 && pop.n_cells() == 1 && (pop.p0() - 921.0 / 17816.0).abs() < 1e-12;
    report(
        "8 empirical headline data",
        pass,
        "documentation only; fixture-driven pipeline tests above",
    );
    assert!(pass);
}
