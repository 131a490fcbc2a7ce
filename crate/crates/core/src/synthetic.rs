//! Data-generating processes and embedded count tables.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CountTable2x2, Design, ObservedDataset, H0};
use crate::error::{Error, Result};
use crate::glm::{sigmoid, BasisSpec, LogitOptions};
use crate::oracle::{DiscretePopulation, ObservedLaw};
use crate::rng::tag;
use crate::rr::{estimate_beta_combined, estimate_beta_plugin, z, BetaEstimate, Method};

pub use crate::rng::RngSpec;

/// Gaussian-covariate logit design: X | Y=y ~ N(μ_y, Σ) with
/// Σ_jk = ρ^|j−k|, and Pr(T=1 | X, Y=y) = G(α₀(y) + X'α₁(y)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McDesign {
    pub dx: usize,
    pub mu1: Vec<f64>,
    pub mu0: Vec<f64>,
    pub rho: f64,
    /// Intercepts indexed by stratum.
    pub alpha0: [f64; 2],
    /// Slopes indexed by stratum.
    pub alpha1: [Vec<f64>; 2],
    pub n_per_stratum: usize,
}

impl Default for McDesign {
    fn default() -> Self {
        Self {
            dx: 5,
            mu1: vec![1.0; 5],
            mu0: vec![0.0; 5],
            rho: 0.5,
            alpha0: [0.0, 0.5],
            alpha1: [vec![0.0, 0.0, 1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0, 0.0, 0.0]],
            n_per_stratum: 1000,
        }
    }
}

impl McDesign {
    /// The same covariate law in both strata and identical logits: OR ≡ 1.
    pub fn null() -> Self {
        let slope = vec![0.5, 0.0, -0.5, 0.0, 0.3];
        Self {
            alpha0: [0.2, 0.2],
            alpha1: [slope.clone(), slope],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu1.len() != self.dx
            || self.mu0.len() != self.dx
            || self.alpha1.iter().any(|a| a.len() != self.dx)
        {
            return Err(Error::InvalidArgument(
                "design vectors must have length dx".into(),
            ));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidArgument("rho must lie in (-1, 1)".into()));
        }
        if self.n_per_stratum < 2 {
            return Err(Error::InvalidArgument(
                "need at least 2 rows per stratum".into(),
            ));
        }
        Ok(())
    }

    pub fn sigma(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dx, self.dx, |j, k| {
            self.rho.powi((j as i32 - k as i32).abs())
        })
    }

    /// β(y) = {α₀(1) − α₀(0)} + E(X | Y=y)'{α₁(1) − α₁(0)}.
    pub fn beta(&self, y: u8) -> f64 {
        let mu = if y == 1 { &self.mu1 } else { &self.mu0 };
        self.alpha0[1] - self.alpha0[0]
            + (0..self.dx)
                .map(|j| mu[j] * (self.alpha1[1][j] - self.alpha1[0][j]))
                .sum::<f64>()
    }
}

/// One sample of the Gaussian design: `n_per_stratum` rows per stratum, cases
/// first. Normals come from the ziggurat sampler of `rand_distr` applied to
/// the Cholesky factor of Σ.
pub fn draw_mc_sample<R: Rng + ?Sized>(design: &McDesign, rng: &mut R) -> Result<ObservedDataset> {
    design.validate()?;
    let chol = design
        .sigma()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?;
    let l = chol.l();
    let m = design.n_per_stratum;
    let n = 2 * m;
    let mut x = DMatrix::zeros(n, design.dx);
    let mut y = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    for i in 0..n {
        let yi: u8 = u8::from(i < m);
        let mu = if yi == 1 { &design.mu1 } else { &design.mu0 };
        let zv = DVector::from_fn(design.dx, |_, _| StandardNormal.sample(rng));
        let xv = &l * zv;
        let mut eta = design.alpha0[yi as usize];
        for j in 0..design.dx {
            let v = mu[j] + xv[j];
            x[(i, j)] = v;
            eta += v * design.alpha1[yi as usize][j];
        }
        y.push(yi);
        t.push(u8::from(rng.random::<f64>() < sigmoid(eta)));
    }
    let names = (1..=design.dx).map(|j| format!("x{j}")).collect();
    ObservedDataset::new(y, t, x, names, Design::CaseControl, H0::Estimate)
}

fn bernoulli_sample<R: Rng + ?Sized>(
    h0: f64,
    n: usize,
    rng: &mut R,
    design: Design,
    strata: [&WeightedIndex<f64>; 2],
    outcomes: &[(usize, u8)],
) -> Result<ObservedDataset> {
    let mut y = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for _ in 0..n {
        let yi = u8::from(rng.random::<f64>() < h0);
        let (cell, ti) = outcomes[strata[yi as usize].sample(rng)];
        y.push(yi);
        t.push(ti);
        x.push(cell as f64);
    }
    let h = if h0 > 0.0 && h0 < 1.0 {
        H0::Known(h0)
    } else {
        H0::Estimate
    };
    ObservedDataset::new(
        y,
        t,
        DMatrix::from_column_slice(n, 1, &x),
        vec!["x".into()],
        design,
        h,
    )
}

/// Bernoulli sampling from a finite population. The covariate column holds
/// the cell index.
pub fn sample_from_population<R: Rng + ?Sized>(
    pop: &DiscretePopulation,
    design: Design,
    h0: f64,
    n: usize,
    rng: &mut R,
) -> Result<ObservedDataset> {
    if !(0.0..=1.0).contains(&h0) {
        return Err(Error::InvalidArgument(format!(
            "h0 must lie in [0,1], got {h0}"
        )));
    }
    let k = pop.n_cells();
    for x in 0..k {
        let pt = pop.prob_treated(x);
        if !(pt > 0.0 && pt < 1.0) {
            return Err(Error::OverlapViolation(x));
        }
    }
    let outcomes: Vec<(usize, u8)> = (0..k).flat_map(|x| [(x, 0), (x, 1)]).collect();
    let weights = |y: usize| -> Vec<f64> {
        outcomes
            .iter()
            .map(|&(x, t)| match (design, y) {
                (Design::CasePopulation, 0) => {
                    pop.joint_observed(x, t as usize, 0) + pop.joint_observed(x, t as usize, 1)
                }
                _ => pop.joint_observed(x, t as usize, y),
            })
            .collect()
    };
    let bad = |_| Error::InvalidPopulation("stratum has no mass".into());
    let w0 = WeightedIndex::new(weights(0)).map_err(bad)?;
    let w1 = WeightedIndex::new(weights(1)).map_err(bad)?;
    bernoulli_sample(h0, n, rng, design, [&w0, &w1], &outcomes)
}

/// Bernoulli sampling from an observed law directly.
pub fn sample_from_law<R: Rng + ?Sized>(
    law: &ObservedLaw,
    n: usize,
    rng: &mut R,
) -> Result<ObservedDataset> {
    let k = law.n_cells();
    let outcomes: Vec<(usize, u8)> = (0..k).flat_map(|x| [(x, 0), (x, 1)]).collect();
    let weights = |y: usize| -> Vec<f64> {
        outcomes
            .iter()
            .map(|&(x, t)| law.fxy(y, x) * law.pi(t as usize, y, x))
            .collect()
    };
    let bad = |_| Error::InvalidArgument("law has no mass".into());
    let w0 = WeightedIndex::new(weights(0)).map_err(bad)?;
    let w1 = WeightedIndex::new(weights(1)).map_err(bad)?;
    bernoulli_sample(law.h0(), n, rng, law.design(), [&w0, &w1], &outcomes)
}

/// Deterministic dataset whose cell frequencies approximate `law` with about
/// `n` rows; every (y, x, t) cell receives at least one row. Its empirical
/// law, [`cell_counts`], is the exact target for saturated fits.
pub fn expand_law(law: &ObservedLaw, n: usize) -> Result<ObservedDataset> {
    let mut y = Vec::new();
    let mut t = Vec::new();
    let mut x = Vec::new();
    for yy in 0..2u8 {
        let hy = if yy == 1 { law.h0() } else { 1.0 - law.h0() };
        for cell in 0..law.n_cells() {
            for tt in 0..2u8 {
                let mass = hy * law.fxy(yy as usize, cell) * law.pi(tt as usize, yy as usize, cell);
                let count = ((mass * n as f64).round() as usize).max(1);
                for _ in 0..count {
                    y.push(yy);
                    t.push(tt);
                    x.push(cell as f64);
                }
            }
        }
    }
    let rows = y.len();
    ObservedDataset::new(
        y,
        t,
        DMatrix::from_column_slice(rows, 1, &x),
        vec!["x".into()],
        law.design(),
        H0::Estimate,
    )
}

/// Counts `[y][cell][t]` for a dataset whose first covariate is a cell index.
pub fn cell_counts(data: &ObservedDataset) -> Result<[Vec<[u64; 2]>; 2]> {
    if data.n_covariates() == 0 {
        let mut c = [vec![[0u64; 2]], vec![[0u64; 2]]];
        for i in 0..data.n() {
            c[data.y()[i] as usize][0][data.t()[i] as usize] += 1;
        }
        return Ok(c);
    }
    let col = data.x().column(0);
    if col.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
        return Err(Error::InvalidArgument(
            "cell column must hold nonnegative integers".into(),
        ));
    }
    let k = col.iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1;
    let mut c = [vec![[0u64; 2]; k], vec![[0u64; 2]; k]];
    for i in 0..data.n() {
        c[data.y()[i] as usize][col[i] as usize][data.t()[i] as usize] += 1;
    }
    Ok(c)
}

/// An estimator evaluated by [`run_mc_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimator {
    pub name: String,
    pub spec: BasisSpec,
    pub method: Method,
}

impl McEstimator {
    pub fn parametric() -> Self {
        Self {
            name: "parametric".into(),
            spec: BasisSpec::linear(),
            method: Method::Combined,
        }
    }

    pub fn sieve() -> Self {
        Self {
            name: "sieve".into(),
            spec: BasisSpec::quadratic_sieve(),
            method: Method::Combined,
        }
    }

    fn estimate(&self, data: &ObservedDataset, y: u8) -> Result<BetaEstimate> {
        let opts = LogitOptions::default();
        match self.method {
            Method::Combined => estimate_beta_combined(data, &self.spec, y, &opts),
            Method::PlugIn => estimate_beta_plugin(data, &self.spec, y, &opts),
        }
    }
}

/// Summary statistics for one estimator and one target β(y).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub estimator: String,
    pub target: String,
    pub truth: f64,
    pub mean_bias: f64,
    pub median_bias: f64,
    pub rmse: f64,
    pub mse: f64,
    /// Mean absolute deviation from the truth.
    pub mean_ad: f64,
    /// Median absolute deviation from the truth.
    pub median_ad: f64,
    /// Mean absolute deviation from the sample median of the estimates.
    pub mean_ad_median: f64,
    /// Median absolute deviation from the sample median of the estimates.
    pub median_ad_median: f64,
    /// Share of one-sided 95% upper intervals β̂ + z(0.95)·se that reach β.
    pub coverage: f64,
    pub mean_se: f64,
    pub sd: f64,
    pub replications: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub rows: Vec<McRow>,
    /// Raw estimates per estimator and replicate, `[estimator][rep]`,
    /// `None` when the fit failed.
    #[serde(skip)]
    pub draws: Vec<Vec<Option<[BetaEstimate; 2]>>>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summarise(name: &str, y: u8, truth: f64, est: &[BetaEstimate], failures: usize) -> McRow {
    let r = est.len() as f64;
    let values: Vec<f64> = est.iter().map(|e| e.value).collect();
    let dev: Vec<f64> = values.iter().map(|v| v - truth).collect();
    let mean = values.iter().sum::<f64>() / r;
    let mse = dev.iter().map(|d| d * d).sum::<f64>() / r;
    let med = median(&mut values.clone());
    let mut abs_dev: Vec<f64> = dev.iter().map(|d| d.abs()).collect();
    let mut abs_med: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    let z95 = z(0.95);
    McRow {
        estimator: name.to_string(),
        target: format!("beta({y})"),
        truth,
        mean_bias: mean - truth,
        median_bias: med - truth,
        rmse: mse.sqrt(),
        mse,
        mean_ad: abs_dev.iter().sum::<f64>() / r,
        median_ad: median(&mut abs_dev),
        mean_ad_median: abs_med.iter().sum::<f64>() / r,
        median_ad_median: median(&mut abs_med),
        coverage: est.iter().filter(|e| truth <= e.value + z95 * e.se).count() as f64 / r,
        mean_se: est.iter().map(|e| e.se).sum::<f64>() / r,
        sd: (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt(),
        replications: est.len(),
        failures,
    }
}

/// Monte Carlo study over `reps` samples of `design`. Replicate r uses its own
/// stream derived from `seed`, so results do not depend on thread count.
pub fn run_mc_study(
    design: &McDesign,
    estimators: &[McEstimator],
    reps: usize,
    seed: u64,
) -> Result<McSummary> {
    design.validate()?;
    if reps < 2 {
        return Err(Error::InvalidArgument(
            "need at least two replications".into(),
        ));
    }
    let spec = RngSpec::new(seed);
    let per_rep: Vec<Vec<Option<[BetaEstimate; 2]>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = spec.stream(tag::MC_SAMPLE, r);
            let data = draw_mc_sample(design, &mut rng)?;
            Ok(estimators
                .iter()
                .map(|e| Some([e.estimate(&data, 0).ok()?, e.estimate(&data, 1).ok()?]))
                .collect())
        })
        .collect::<Result<_>>()?;
    let draws: Vec<Vec<Option<[BetaEstimate; 2]>>> = (0..estimators.len())
        .map(|k| per_rep.iter().map(|rep| rep[k]).collect())
        .collect();
    let mut rows = Vec::new();
    for (k, e) in estimators.iter().enumerate() {
        let ok: Vec<[BetaEstimate; 2]> = draws[k].iter().flatten().copied().collect();
        let failures = reps - ok.len();
        if ok.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "estimator {} failed in almost every replication",
                e.name
            )));
        }
        for y in [1u8, 0] {
            let est: Vec<BetaEstimate> = ok.iter().map(|pair| pair[y as usize]).collect();
            rows.push(summarise(&e.name, y, design.beta(y), &est, failures));
        }
    }
    Ok(McSummary { rows, draws })
}

/// A published 2×2 count table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFixture {
    pub name: String,
    pub description: String,
    pub y0t0: u64,
    pub y0t1: u64,
    pub y1t0: u64,
    pub y1t1: u64,
    pub published_odds_ratio: f64,
}

impl TableFixture {
    pub fn table(&self) -> CountTable2x2 {
        CountTable2x2::new(self.y0t0, self.y0t1, self.y1t0, self.y1t1)
    }
}

const TABLES_CSV: &str = include_str!("../data/tables.csv");
const MC_DESIGN_JSON: &str = include_str!("../data/mc_design.json");
const ACS_POPULATION_CSV: &str = include_str!("../data/acs_population.csv");

/// The four embedded count tables.
pub fn table_fixtures() -> Vec<TableFixture> {
    csv::Reader::from_reader(TABLES_CSV.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .expect("embedded table fixture parses")
}

/// The Gaussian design as shipped in the data directory.
pub fn mc_design_fixture() -> McDesign {
    serde_json::from_str(MC_DESIGN_JSON).expect("embedded design fixture parses")
}

/// Single-cell population behind the toy income/education tables, with no
/// causal effect (Y*(0) = Y*(1)).
pub fn acs_population() -> DiscretePopulation {
    DiscretePopulation::read_csv(ACS_POPULATION_CSV.as_bytes())
        .expect("embedded population fixture parses")
}
