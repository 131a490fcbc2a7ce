//! Attributable-risk upper-bound curves with bias-corrected bootstrap limits.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Design, ObservedDataset};
use crate::error::{Error, Result};
use crate::glm::{build_basis, BasisSpec, LogitOptions};
use crate::oracle::{gamma_ar_value, r_value};
use crate::rng::{tag, RngSpec};
use crate::rr::{fit_nuisances_on, phi, z, ClipOptions, Nuisances, PGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ResampleMode {
    #[default]
    PlainIid,
    StratifiedByY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandMode {
    /// Pointwise limits (case-control samples).
    PointwiseBc,
    /// One limit scaled linearly in p (case-population samples).
    UniformBc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArConfig {
    pub retro_spec: BasisSpec,
    pub pro_spec: BasisSpec,
    pub grid: PGrid,
    pub alpha: f64,
    pub b: usize,
    pub seed: u64,
    pub resample: ResampleMode,
    pub logit: LogitOptions,
    pub clip: ClipOptions,
}

impl Default for ArConfig {
    fn default() -> Self {
        Self {
            retro_spec: BasisSpec::default(),
            pro_spec: BasisSpec::default(),
            grid: PGrid::default(),
            alpha: 0.05,
            b: 1000,
            seed: 0,
            resample: ResampleMode::PlainIid,
            logit: LogitOptions::default(),
            clip: ClipOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArRow {
    pub p: f64,
    pub point: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArCurve {
    pub design: Design,
    pub mode: BandMode,
    pub alpha: f64,
    pub b: usize,
    pub rows: Vec<ArRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapDiagnostics {
    pub resample_mode: ResampleMode,
    pub mu_star: Vec<f64>,
    pub nu_star: Vec<f64>,
    /// Replicates whose refit failed and were dropped.
    pub failed_replicates: usize,
    /// Grid points at which every bootstrap estimate was identical.
    pub degenerate_points: Vec<f64>,
    /// Fitted probabilities clipped in the full-sample fit.
    pub clipped: usize,
}

/// Nuisance fits together with the sampling quantities the AR formulas need.
struct ArFit {
    h0: f64,
    y: Vec<u8>,
    nuis: Nuisances,
}

fn fit(data: &ObservedDataset, cfg: &ArConfig) -> Result<ArFit> {
    let phi_r = build_basis(data.x(), &cfg.retro_spec)?;
    let phi_p: DMatrix<f64> = if cfg.pro_spec == cfg.retro_spec {
        phi_r.clone()
    } else {
        build_basis(data.x(), &cfg.pro_spec)?
    };
    let nuis = fit_nuisances_on(data, &phi_r, &phi_p, &cfg.logit, &cfg.clip)?;
    Ok(ArFit {
        h0: data.h0(),
        y: data.y().to_vec(),
        nuis,
    })
}

impl ArFit {
    fn beta_ar(&self, p: f64, y: u8) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, &yi) in self.y.iter().enumerate() {
            if yi != y {
                continue;
            }
            let r = r_value(Design::CaseControl, self.h0, self.nuis.pyx[i], p);
            if r != 0.0 {
                sum += r * gamma_ar_value(self.nuis.pi1[0][i], self.nuis.pi1[1][i], r);
            }
            count += 1;
        }
        sum / count as f64
    }

    fn ub(&self, p: f64) -> f64 {
        (1.0 - p) * self.beta_ar(p, 0) + p * self.beta_ar(p, 1)
    }

    fn xi_cp(&self) -> f64 {
        let mut sum = 0.0;
        let mut cases = 0usize;
        for (i, &yi) in self.y.iter().enumerate() {
            if yi == 1 {
                cases += 1;
                continue;
            }
            let pr = self.nuis.pyx[i];
            let (a, b) = (self.nuis.pi1[0][i], self.nuis.pi1[1][i]);
            sum += pr / (1.0 - pr) * (b / a - (1.0 - b) / (1.0 - a));
        }
        sum / cases as f64
    }
}

fn require(data: &ObservedDataset, design: Design) -> Result<()> {
    if data.design() != design {
        return Err(Error::InvalidArgument(format!(
            "estimator needs a {design} sample, got {}",
            data.design()
        )));
    }
    Ok(())
}

/// β̂_AR(p, y): stratum-y sample mean of r̂(X, p) Γ̂_AR(X, p).
pub fn estimate_beta_ar(
    data: &ObservedDataset,
    pro_spec: &BasisSpec,
    retro_spec: &BasisSpec,
    p: f64,
    y_stratum: u8,
) -> Result<f64> {
    require(data, Design::CaseControl)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "p must lie in [0,1], got {p}"
        )));
    }
    let cfg = ArConfig {
        retro_spec: retro_spec.clone(),
        pro_spec: pro_spec.clone(),
        ..Default::default()
    };
    Ok(fit(data, &cfg)?.beta_ar(p, y_stratum))
}

/// Case-control upper bound (1−p)β̂_AR(p,0) + pβ̂_AR(p,1).
pub fn estimate_ub_ar(
    data: &ObservedDataset,
    pro_spec: &BasisSpec,
    retro_spec: &BasisSpec,
    p: f64,
) -> Result<f64> {
    Ok(
        (1.0 - p) * estimate_beta_ar(data, pro_spec, retro_spec, p, 0)?
            + p * estimate_beta_ar(data, pro_spec, retro_spec, p, 1)?,
    )
}

/// ξ̂_CP, the slope of the case-population attributable-risk bound.
pub fn estimate_xi_cp(
    data: &ObservedDataset,
    pro_spec: &BasisSpec,
    retro_spec: &BasisSpec,
) -> Result<f64> {
    require(data, Design::CasePopulation)?;
    let cfg = ArConfig {
        retro_spec: retro_spec.clone(),
        pro_spec: pro_spec.clone(),
        ..Default::default()
    };
    Ok(fit(data, &cfg)?.xi_cp())
}

/// ν* = Φ[Φ⁻¹(1−α) + 2Φ⁻¹(μ*)] after clamping μ* into [1/(B+1), B/(B+1)].
pub fn bc_nu_star(mu_star: f64, alpha: f64, b: usize) -> f64 {
    let lo = 1.0 / (b as f64 + 1.0);
    let mu = mu_star.clamp(lo, 1.0 - lo);
    let shift = 2.0 * z(mu);
    if shift == 0.0 {
        // Φ∘Φ⁻¹ is not the identity in floating point
        return 1.0 - alpha;
    }
    phi(z(1.0 - alpha) + shift)
}

/// Bias-corrected percentile limit from bootstrap draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcLimit {
    pub mu_star: f64,
    pub nu_star: f64,
    pub quantile: f64,
    pub degenerate: bool,
}

/// Smallest order statistic whose empirical cdf reaches ν*.
pub fn bc_limit(point: f64, draws: &[f64], alpha: f64) -> BcLimit {
    let b = draws.len();
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mu_star = draws.iter().filter(|&&v| v <= point).count() as f64 / b as f64;
    let nu_star = bc_nu_star(mu_star, alpha, b);
    let k = ((nu_star * b as f64).ceil() as usize).clamp(1, b);
    BcLimit {
        mu_star,
        nu_star,
        quantile: sorted[k - 1],
        degenerate: sorted[0] == sorted[b - 1],
    }
}

fn resample<R: Rng>(data: &ObservedDataset, mode: ResampleMode, rng: &mut R) -> Vec<usize> {
    let n = data.n();
    match mode {
        ResampleMode::PlainIid => (0..n).map(|_| rng.random_range(0..n)).collect(),
        ResampleMode::StratifiedByY => {
            let mut idx = Vec::with_capacity(n);
            for y in 0..2 {
                let rows = data.stratum(y);
                idx.extend((0..rows.len()).map(|_| rows[rng.random_range(0..rows.len())]));
            }
            idx
        }
    }
}

/// Runs `stat` on B bootstrap resamples in parallel. Each replicate has its
/// own stream, so the output does not depend on the number of workers.
fn bootstrap<T: Send>(
    data: &ObservedDataset,
    cfg: &ArConfig,
    stat: impl Fn(&ArFit) -> T + Sync,
) -> (Vec<T>, usize) {
    let spec = RngSpec::new(cfg.seed);
    let draws: Vec<Option<T>> = (0..cfg.b as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = spec.stream(tag::BOOTSTRAP, b);
            let rows = resample(data, cfg.resample, &mut rng);
            let sample = data.select_rows(&rows).ok()?;
            fit(&sample, cfg).ok().map(|f| stat(&f))
        })
        .collect();
    let failed = draws.iter().filter(|d| d.is_none()).count();
    (draws.into_iter().flatten().collect(), failed)
}

fn validate(cfg: &ArConfig) -> Result<()> {
    if !(cfg.alpha > 0.0 && cfg.alpha <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 0.5], got {}",
            cfg.alpha
        )));
    }
    if cfg.b < 200 {
        return Err(Error::InvalidArgument(format!(
            "need at least 200 bootstrap replications, got {}",
            cfg.b
        )));
    }
    PGrid::new(cfg.grid.pbar, cfg.grid.step)?;
    Ok(())
}

/// Upper-bound curve and bias-corrected limits over `cfg.grid`.
pub fn ar_curve(data: &ObservedDataset, cfg: &ArConfig) -> Result<(ArCurve, BootstrapDiagnostics)> {
    validate(cfg)?;
    let grid = cfg.grid.points();
    let full = fit(data, cfg)?;
    let unit = |v: f64| v.clamp(0.0, 1.0);
    let mut rows = Vec::with_capacity(grid.len());
    let mut diag = BootstrapDiagnostics {
        resample_mode: cfg.resample,
        mu_star: Vec::with_capacity(grid.len()),
        nu_star: Vec::with_capacity(grid.len()),
        failed_replicates: 0,
        degenerate_points: Vec::new(),
        clipped: full.nuis.clipped,
    };
    let mode = match data.design() {
        Design::CaseControl => {
            let points: Vec<f64> = grid.iter().map(|&p| full.ub(p)).collect();
            let (draws, failed) = bootstrap(data, cfg, |f| {
                grid.iter().map(|&p| f.ub(p)).collect::<Vec<_>>()
            });
            diag.failed_replicates = failed;
            if draws.len() < 2 {
                return Err(Error::BootstrapDegenerate);
            }
            let mut interior_ok = false;
            for (k, &p) in grid.iter().enumerate() {
                let column: Vec<f64> = draws.iter().map(|d| d[k]).collect();
                let lim = bc_limit(points[k], &column, cfg.alpha);
                if lim.degenerate {
                    diag.degenerate_points.push(p);
                } else if p > 0.0 && p < 1.0 {
                    interior_ok = true;
                }
                diag.mu_star.push(lim.mu_star);
                diag.nu_star.push(lim.nu_star);
                rows.push(ArRow {
                    p,
                    point: unit(points[k]),
                    upper: unit(lim.quantile.max(points[k])),
                });
            }
            if !interior_ok {
                return Err(Error::BootstrapDegenerate);
            }
            BandMode::PointwiseBc
        }
        Design::CasePopulation => {
            let xi = full.xi_cp();
            let (draws, failed) = bootstrap(data, cfg, ArFit::xi_cp);
            diag.failed_replicates = failed;
            if draws.len() < 2 {
                return Err(Error::BootstrapDegenerate);
            }
            let lim = bc_limit(xi, &draws, cfg.alpha);
            if lim.degenerate {
                return Err(Error::BootstrapDegenerate);
            }
            let slope = lim.quantile.max(xi);
            for &p in &grid {
                diag.mu_star.push(lim.mu_star);
                diag.nu_star.push(lim.nu_star);
                rows.push(ArRow {
                    p,
                    point: unit(p * xi),
                    upper: unit(p * slope),
                });
            }
            BandMode::UniformBc
        }
    };
    Ok((
        ArCurve {
            design: data.design(),
            mode,
            alpha: cfg.alpha,
            b: cfg.b,
            rows,
        },
        diag,
    ))
}
