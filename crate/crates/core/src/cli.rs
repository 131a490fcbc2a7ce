//! Command-line front end: argument types, the five commands and their
//! tabular / JSON rendering.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::ar::{ar_curve, ArConfig, ArCurve, BootstrapDiagnostics, ResampleMode};
use crate::data::{ingest_csv, odds_ratio_2x2, CsvSchema, Design, ObservedDataset, H0};
use crate::error::{Error, Result};
use crate::glm::{BasisSpec, LogitOptions};
use crate::oracle::suite::{check_population, run_suite, CheckResult, SuiteConfig};
use crate::oracle::{check_assumptions, gamma, project, AssumptionReport, DiscretePopulation};
use crate::rr::{
    estimate_betas, report_rows, rr_band, BetaEstimate, ClipOptions, Method, PGrid, RRBand,
    ReportRow,
};
use crate::synthetic::{
    acs_population, mc_design_fixture, run_mc_study, table_fixtures, McDesign, McEstimator, McRow,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Parser)]
#[command(
    name = "casecontrol",
    version,
    about = "Relative and attributable risk bounds from case-control and case-population samples"
)]
pub struct Cli {
    /// Output format on stdout.
    #[arg(long, value_enum, global = true, default_value_t = Format::Tabular)]
    pub format: Format,
    /// Directory for CSV/JSON result files (created if missing).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tabular,
    /// JSON document carrying a `schema_version` field.
    Structured,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate β(y) and the relative-risk upper-bound band.
    Rr(RrArgs),
    /// Attributable-risk upper bound with bias-corrected bootstrap limits.
    Ar(ArArgs),
    /// Check identification identities on finite populations.
    Oracle(OracleArgs),
    /// Monte Carlo study of the β(y) estimators on the Gaussian design.
    Mc(McArgs),
    /// Odds ratios of the embedded 2×2 tables.
    Demo,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Outcome column (0/1).
    #[arg(long, default_value = "y")]
    pub y: String,
    /// Treatment column (0/1).
    #[arg(long, default_value = "t")]
    pub t: String,
    /// Comma-separated covariate columns; all other columns when omitted.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Sampling design: cc (case-control) or cp (case-population).
    #[arg(long, default_value = "cc")]
    pub design: Design,
    /// Sampling probability of the case stratum; the sample share when omitted.
    #[arg(long)]
    pub h0: Option<f64>,
    /// Basis for both nuisance logits, e.g. poly2, poly2+int, spline3, linear,
    /// categorical, or a comma-separated list with one entry per covariate.
    #[arg(long, default_value = "poly2")]
    pub basis: BasisSpec,
    /// Basis of the prospective logit Y ~ X (defaults to --basis).
    #[arg(long)]
    pub pro_basis: Option<BasisSpec>,
    /// Basis of the retrospective logits T ~ X (defaults to --basis).
    #[arg(long)]
    pub retro_basis: Option<BasisSpec>,
    /// Refit with a tiny ridge penalty instead of failing on separation.
    #[arg(long)]
    pub ridge_fallback: bool,
    /// Fail when fitted probabilities need clipping instead of clipping them.
    #[arg(long)]
    pub strict_clip: bool,
    /// Level of the one-sided intervals, in (0, 0.5].
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Known upper bound on the population case probability, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub pbar: f64,
    /// Step of the p-grid.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
}

impl DataArgs {
    fn load(&self) -> Result<(ObservedDataset, usize)> {
        let schema = CsvSchema {
            y: self.y.clone(),
            t: self.t.clone(),
            covariates: self.covariates.clone(),
        };
        let h0 = self.h0.map_or(H0::Estimate, H0::Known);
        let ing = ingest_csv(&self.input, &schema, self.design, h0)?;
        Ok((ing.dataset, ing.dropped_rows.len()))
    }

    fn specs(&self) -> (BasisSpec, BasisSpec) {
        (
            self.pro_basis.clone().unwrap_or_else(|| self.basis.clone()),
            self.retro_basis
                .clone()
                .unwrap_or_else(|| self.basis.clone()),
        )
    }

    fn logit(&self) -> LogitOptions {
        LogitOptions {
            ridge_fallback: self.ridge_fallback,
            ..Default::default()
        }
    }

    fn clip(&self) -> ClipOptions {
        ClipOptions {
            strict: self.strict_clip,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Single pooled logit with stratum-demeaned interactions.
    Combined,
    /// Stratum average of the fitted log odds ratio.
    Plugin,
}

#[derive(Debug, Args)]
pub struct RrArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Combined)]
    pub method: MethodArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResampleArg {
    Plain,
    Stratified,
}

#[derive(Debug, Args)]
pub struct ArArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Bootstrap replications (at least 200).
    #[arg(long = "bootstrap", short = 'B', default_value_t = 1000)]
    pub b: usize,
    #[arg(long, env = "CASECONTROL_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ResampleArg::Plain)]
    pub resample: ResampleArg,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Population file (x,t,y0,y1,mass); random populations when omitted.
    #[arg(long)]
    pub population: Option<PathBuf>,
    /// Check the embedded income/education population.
    #[arg(long, conflicts_with = "population")]
    pub acs: bool,
    /// Random populations per family.
    #[arg(long, default_value_t = 200)]
    pub populations: usize,
    /// Covariate cells per random population.
    #[arg(long, default_value_t = 3)]
    pub cells: usize,
    /// Case share used when projecting onto the sampling designs.
    #[arg(long, default_value_t = 0.5)]
    pub h0: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, env = "CASECONTROL_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Replications.
    #[arg(long, short = 'R', default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, env = "CASECONTROL_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// JSON design file; the embedded default design when omitted.
    #[arg(long)]
    pub design_file: Option<PathBuf>,
    /// Override the per-stratum sample size.
    #[arg(long)]
    pub n_per_stratum: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct RrReport {
    pub design: Design,
    pub method: Method,
    pub n: usize,
    pub n_cases: usize,
    pub dropped_rows: usize,
    pub h0: f64,
    pub h0_estimated: bool,
    pub pro_basis: String,
    pub retro_basis: String,
    pub alpha: f64,
    pub estimates: Vec<BetaEstimate>,
    pub rows: Vec<ReportRow>,
    pub band: RRBand,
}

#[derive(Debug, Serialize)]
pub struct ArReport {
    pub n: usize,
    pub dropped_rows: usize,
    pub seed: u64,
    pub curve: ArCurve,
    pub diagnostics: BootstrapDiagnostics,
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub source: String,
    pub h0: f64,
    pub tol: f64,
    pub assumptions: Option<AssumptionReport>,
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Serialize)]
pub struct McReport {
    pub reps: usize,
    pub seed: u64,
    pub design: McDesign,
    pub rows: Vec<McRow>,
}

#[derive(Debug, Serialize)]
pub struct DemoRow {
    pub name: String,
    pub description: String,
    pub counts: [u64; 4],
    pub odds_ratio: f64,
    pub published: f64,
}

#[derive(Debug, Serialize)]
pub struct DemoReport {
    pub tables: Vec<DemoRow>,
    /// Odds ratio of the income/education population under exact
    /// case-population sampling, without rounding of the counts.
    pub case_population_exact: f64,
}

#[derive(Debug, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Report {
    Rr(RrReport),
    Ar(ArReport),
    Oracle(OracleReport),
    Mc(McReport),
    Demo(DemoReport),
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a Report,
}

pub fn cmd_rr(args: &RrArgs) -> Result<RrReport> {
    let d = &args.data;
    let (data, dropped) = d.load()?;
    let (pro, retro) = d.specs();
    let grid = PGrid::new(d.pbar, d.step)?;
    let method = match args.method {
        MethodArg::Combined => Method::Combined,
        MethodArg::Plugin => Method::PlugIn,
    };
    let estimates = estimate_betas(&data, &pro, &retro, method, &d.logit(), &d.clip())?;
    let band = rr_band(
        &estimates[0],
        estimates.get(1),
        d.alpha,
        data.design(),
        &grid,
    )?;
    let mut rows = Vec::new();
    for e in &estimates {
        rows.extend(report_rows(e, d.alpha)?);
    }
    Ok(RrReport {
        design: data.design(),
        method,
        n: data.n(),
        n_cases: data.n_cases(),
        dropped_rows: dropped,
        h0: data.h0(),
        h0_estimated: data.h0_estimated(),
        pro_basis: pro.to_string(),
        retro_basis: retro.to_string(),
        alpha: d.alpha,
        estimates,
        rows,
        band,
    })
}

pub fn cmd_ar(args: &ArArgs) -> Result<ArReport> {
    let d = &args.data;
    let (data, dropped) = d.load()?;
    let (pro_spec, retro_spec) = d.specs();
    let cfg = ArConfig {
        retro_spec,
        pro_spec,
        grid: PGrid::new(d.pbar, d.step)?,
        alpha: d.alpha,
        b: args.b,
        seed: args.seed,
        resample: match args.resample {
            ResampleArg::Plain => ResampleMode::PlainIid,
            ResampleArg::Stratified => ResampleMode::StratifiedByY,
        },
        logit: d.logit(),
        clip: d.clip(),
    };
    let (curve, diagnostics) = ar_curve(&data, &cfg)?;
    Ok(ArReport {
        n: data.n(),
        dropped_rows: dropped,
        seed: args.seed,
        curve,
        diagnostics,
    })
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<OracleReport> {
    let single = match (&args.population, args.acs) {
        (Some(path), _) => Some((
            path.display().to_string(),
            DiscretePopulation::read_csv(fs::File::open(path)?)?,
        )),
        (None, true) => Some((
            "embedded income/education population".to_string(),
            acs_population(),
        )),
        (None, false) => None,
    };
    let (source, assumptions, checks) = match single {
        Some((source, pop)) => {
            let checks = check_population(&pop, args.h0, args.tol)?;
            (source, Some(check_assumptions(&pop)), checks)
        }
        None => {
            let cfg = SuiteConfig {
                populations: args.populations,
                cells: args.cells,
                h0: args.h0,
                seed: args.seed,
                tol: args.tol,
            };
            let source = format!(
                "{} random populations per family, seed {}",
                args.populations, args.seed
            );
            (source, None, run_suite(&cfg)?)
        }
    };
    Ok(OracleReport {
        source,
        h0: args.h0,
        tol: args.tol,
        assumptions,
        all_passed: checks.iter().all(CheckResult::passed),
        checks,
    })
}

pub fn cmd_mc(args: &McArgs) -> Result<McReport> {
    let mut design = match &args.design_file {
        Some(path) => serde_json::from_reader(fs::File::open(path)?)?,
        None => mc_design_fixture(),
    };
    if let Some(n) = args.n_per_stratum {
        design.n_per_stratum = n;
    }
    let summary = run_mc_study(
        &design,
        &[McEstimator::parametric(), McEstimator::sieve()],
        args.reps,
        args.seed,
    )?;
    Ok(McReport {
        reps: args.reps,
        seed: args.seed,
        design,
        rows: summary.rows,
    })
}

pub fn cmd_demo() -> Result<DemoReport> {
    let tables = table_fixtures()
        .into_iter()
        .map(|f| {
            Ok(DemoRow {
                odds_ratio: odds_ratio_2x2(&f.table())?,
                counts: [f.y0t0, f.y0t1, f.y1t0, f.y1t1],
                name: f.name,
                description: f.description,
                published: f.published_odds_ratio,
            })
        })
        .collect::<Result<_>>()?;
    let law = project(&acs_population(), Design::CasePopulation, 0.5)?;
    Ok(DemoReport {
        tables,
        case_population_exact: gamma(&law, 0, 0.0)?,
    })
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Envelope {
            schema_version: SCHEMA_VERSION,
            report: self,
        })?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self {
            Report::Rr(r) => {
                let _ = writeln!(
                    s,
                    "design {}  method {:?}  n={} (cases {})  h0={:.4}{}",
                    r.design,
                    r.method,
                    r.n,
                    r.n_cases,
                    r.h0,
                    if r.h0_estimated { " (estimated)" } else { "" }
                );
                let _ = writeln!(
                    s,
                    "basis: prospective {}, retrospective {}",
                    r.pro_basis, r.retro_basis
                );
                if r.dropped_rows > 0 {
                    let _ = writeln!(s, "dropped {} rows with missing fields", r.dropped_rows);
                }
                let level = format!("{:.0}% CI", 100.0 * (1.0 - r.alpha));
                for (row, est) in r.rows.iter().zip(r.estimates.iter().flat_map(|e| [e, e])) {
                    let _ = writeln!(s, "{:<14} {:>10.4}", row.label, row.value);
                    if row.label.starts_with("beta") {
                        let _ = writeln!(s, "{:<14} {:>10.4}", "  se", est.se);
                    }
                    let _ = writeln!(
                        s,
                        "{:<14} [{:.4}, {:.4}]",
                        format!("  {level}"),
                        row.ci_lower,
                        row.ci_upper
                    );
                }
                let _ = writeln!(s, "\nrelative-risk upper band (u = {:.4})", r.band.u);
                let _ = writeln!(s, "{:>6} {:>10} {:>10}", "p", "point", "upper");
                for b in &r.band.rows {
                    let _ = writeln!(s, "{:>6.3} {:>10.4} {:>10.4}", b.p, b.point, b.upper);
                }
            }
            Report::Ar(r) => {
                let d = &r.diagnostics;
                let _ = writeln!(
                    s,
                    "design {}  n={}  B={}  alpha={}  seed={}",
                    r.curve.design, r.n, r.curve.b, r.curve.alpha, r.seed
                );
                let _ = writeln!(
                    s,
                    "failed replicates {}, degenerate points {}, clipped probabilities {}",
                    d.failed_replicates,
                    d.degenerate_points.len(),
                    d.clipped
                );
                let _ = writeln!(s, "{:>6} {:>10} {:>10}", "p", "UB_AR", "upper");
                for row in &r.curve.rows {
                    let _ = writeln!(s, "{:>6.3} {:>10.5} {:>10.5}", row.p, row.point, row.upper);
                }
            }
            Report::Oracle(r) => {
                let _ = writeln!(s, "source: {}", r.source);
                if let Some(a) = &r.assumptions {
                    let _ = writeln!(
                        s,
                        "overlap {}  unconfounded {}  MTR {}  MTS {}",
                        a.overlap, a.unconfounded, a.mtr, a.mts
                    );
                }
                for c in &r.checks {
                    let status = match (c.cases, c.passed()) {
                        (0, _) => "SKIP",
                        (_, true) => "PASS",
                        (_, false) => "FAIL",
                    };
                    let _ = writeln!(
                        s,
                        "{status} {:<44} cases {:>6}  failures {:>5}  max err {:.2e}",
                        c.name, c.cases, c.failures, c.max_error
                    );
                    if let Some(ce) = &c.counterexample {
                        for line in ce.lines() {
                            let _ = writeln!(s, "     | {line}");
                        }
                    }
                }
            }
            Report::Mc(r) => {
                let _ = writeln!(
                    s,
                    "R={}  seed={}  n per stratum={}",
                    r.reps, r.seed, r.design.n_per_stratum
                );
                let _ = writeln!(
                    s,
                    "{:<11} {:<8} {:>8} {:>9} {:>9} {:>8} {:>8} {:>9} {:>9} {:>8} {:>8}",
                    "estimator",
                    "target",
                    "truth",
                    "mean bias",
                    "med bias",
                    "RMSE",
                    "MSE",
                    "mean AD",
                    "med AD",
                    "coverage",
                    "failed"
                );
                for m in &r.rows {
                    let _ = writeln!(
                        s,
                        "{:<11} {:<8} {:>8.4} {:>9.4} {:>9.4} {:>8.4} {:>8.4} {:>9.4} {:>9.4} {:>8.3} {:>8}",
                        m.estimator,
                        m.target,
                        m.truth,
                        m.mean_bias,
                        m.median_bias,
                        m.rmse,
                        m.mse,
                        m.mean_ad,
                        m.median_ad,
                        m.coverage,
                        m.failures
                    );
                }
            }
            Report::Demo(r) => {
                let _ = writeln!(
                    s,
                    "{:<8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>9}  description",
                    "table", "y0t0", "y0t1", "y1t0", "y1t1", "OR", "published"
                );
                for t in &r.tables {
                    let [a, b, c, d] = t.counts;
                    let _ = writeln!(
                        s,
                        "{:<8} {a:>8} {b:>8} {c:>8} {d:>8} {:>9.4} {:>9.2}  {}",
                        t.name, t.odds_ratio, t.published, t.description
                    );
                }
                let _ = writeln!(
                    s,
                    "exact case-population odds ratio of the underlying population: {:.4}",
                    r.case_population_exact
                );
            }
        }
        s
    }

    /// Writes the plot-ready CSV files and a JSON copy of the report.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let (stem, tables): (&str, Vec<(&str, Vec<u8>)>) = match self {
            Report::Rr(r) => (
                "rr",
                vec![
                    ("rr_estimates.csv", to_csv(&r.rows)?),
                    ("rr_band.csv", to_csv(&r.band.rows)?),
                ],
            ),
            Report::Ar(r) => ("ar", vec![("ar_curve.csv", to_csv(&r.curve.rows)?)]),
            Report::Oracle(r) => {
                let mut files = vec![(
                    "oracle_checks.csv",
                    to_csv(&r.checks.iter().map(CheckRow::from).collect::<Vec<_>>())?,
                )];
                for c in &r.checks {
                    if let Some(ce) = &c.counterexample {
                        files.push((c.name, ce.clone().into_bytes()));
                    }
                }
                ("oracle", files)
            }
            Report::Mc(r) => ("mc", vec![("mc_summary.csv", to_csv(&r.rows)?)]),
            Report::Demo(r) => (
                "demo",
                vec![(
                    "demo_tables.csv",
                    to_csv(&r.tables.iter().map(DemoCsvRow::from).collect::<Vec<_>>())?,
                )],
            ),
        };
        for (name, bytes) in tables {
            let path = if name.ends_with(".csv") {
                dir.join(name)
            } else {
                dir.join(format!("counterexample_{name}.txt"))
            };
            fs::write(&path, bytes)?;
            written.push(path);
        }
        let path = dir.join(format!("{stem}_report.json"));
        fs::write(&path, self.to_json()?)?;
        written.push(path);
        Ok(written)
    }
}

#[derive(Serialize)]
struct CheckRow<'a> {
    name: &'a str,
    cases: usize,
    failures: usize,
    max_error: f64,
}

impl<'a> From<&'a CheckResult> for CheckRow<'a> {
    fn from(c: &'a CheckResult) -> Self {
        Self {
            name: c.name,
            cases: c.cases,
            failures: c.failures,
            max_error: c.max_error,
        }
    }
}

#[derive(Serialize)]
struct DemoCsvRow<'a> {
    name: &'a str,
    y0t0: u64,
    y0t1: u64,
    y1t0: u64,
    y1t1: u64,
    odds_ratio: f64,
    published: f64,
}

impl<'a> From<&'a DemoRow> for DemoCsvRow<'a> {
    fn from(r: &'a DemoRow) -> Self {
        let [y0t0, y0t1, y1t0, y1t1] = r.counts;
        Self {
            name: &r.name,
            y0t0,
            y0t1,
            y1t0,
            y1t1,
            odds_ratio: r.odds_ratio,
            published: r.published,
        }
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Runs one parsed command line and returns what goes to stdout.
pub fn run(cli: &Cli) -> Result<String> {
    let report = match &cli.command {
        Command::Rr(a) => Report::Rr(cmd_rr(a)?),
        Command::Ar(a) => Report::Ar(cmd_ar(a)?),
        Command::Oracle(a) => Report::Oracle(cmd_oracle(a)?),
        Command::Mc(a) => Report::Mc(cmd_mc(a)?),
        Command::Demo => Report::Demo(cmd_demo()?),
    };
    if let Some(dir) = &cli.out_dir {
        report.write_files(dir)?;
    }
    match cli.format {
        Format::Tabular => Ok(report.to_text()),
        Format::Structured => report.to_json(),
    }
}
