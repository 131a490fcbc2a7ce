//! Aggregated log odds ratio β(y), its level-scale analogue κ(y), efficient
//! influence function variances, and relative-risk bands over p.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Design, ObservedDataset};
use crate::error::{Error, Result};
use crate::glm::{build_basis, fit_logit, with_intercept, BasisSpec, LogitFit, LogitOptions};

/// Standard normal quantile.
pub fn z(q: f64) -> f64 {
    Normal::standard().inverse_cdf(q)
}

/// Standard normal cdf.
pub fn phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Combined,
    PlugIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Log,
    Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub y_stratum: u8,
    pub value: f64,
    pub se: f64,
    pub method: Method,
    pub scale: Scale,
}

impl BetaEstimate {
    /// Log-scale value: β̂ itself, or log κ̂.
    pub fn log_value(&self) -> f64 {
        match self.scale {
            Scale::Log => self.value,
            Scale::Level => self.value.ln(),
        }
    }
}

/// Grid p = 0, step, 2·step, …, pbar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PGrid {
    pub pbar: f64,
    pub step: f64,
}

impl Default for PGrid {
    fn default() -> Self {
        Self {
            pbar: 1.0,
            step: 0.01,
        }
    }
}

impl PGrid {
    pub fn new(pbar: f64, step: f64) -> Result<Self> {
        if !(pbar > 0.0 && pbar <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pbar must lie in (0,1], got {pbar}"
            )));
        }
        if !(step > 0.0 && step <= pbar) {
            return Err(Error::InvalidArgument(format!(
                "grid step {step} not in (0, pbar]"
            )));
        }
        Ok(Self { pbar, step })
    }

    pub fn points(&self) -> Vec<f64> {
        let m = (self.pbar / self.step - 1e-9).ceil() as usize;
        (0..=m)
            .map(|i| {
                if i == m {
                    self.pbar
                } else {
                    i as f64 * self.step
                }
            })
            .collect()
    }
}

/// Probability clipping applied before ratios of fitted probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipOptions {
    pub eps: f64,
    /// Fail instead of clipping.
    pub strict: bool,
}

impl Default for ClipOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            strict: false,
        }
    }
}

/// Fitted retrospective logits T ~ [1, φ(X)] in each Y stratum and the
/// prospective logit Y ~ [1, φ(X)], evaluated at every sample row.
#[derive(Debug, Clone)]
pub struct Nuisances {
    /// Π̂(1 | y, X_i) for y = 0, 1.
    pub pi1: [DVector<f64>; 2],
    /// P̂r(Y=1 | X_i).
    pub pyx: DVector<f64>,
    /// Stratum logit coefficients μ̂_y.
    pub retro: [LogitFit; 2],
    /// Number of fitted probabilities moved to [eps, 1 − eps].
    pub clipped: usize,
}

impl Nuisances {
    /// log OR̂(X_i) = [1, φ_i]'(μ̂_1 − μ̂_0).
    pub fn log_or(&self) -> DVector<f64> {
        let logit = |p: f64| (p / (1.0 - p)).ln();
        DVector::from_fn(self.pyx.len(), |i, _| {
            logit(self.pi1[1][i]) - logit(self.pi1[0][i])
        })
    }
}

fn clip(v: &mut DVector<f64>, clip: &ClipOptions) -> Result<usize> {
    let mut count = 0;
    for p in v.iter_mut() {
        if *p < clip.eps || *p > 1.0 - clip.eps {
            count += 1;
            *p = p.clamp(clip.eps, 1.0 - clip.eps);
        }
    }
    if clip.strict && count > 0 {
        return Err(Error::NuisanceProbabilityOutOfRange { count });
    }
    Ok(count)
}

fn stratum_rows(data: &ObservedDataset, y: u8) -> Vec<usize> {
    (0..data.n()).filter(|&i| data.y()[i] == y).collect()
}

/// Fits all nuisance functions on the basis matrix `phi` (rows aligned with
/// `data`). The prospective fit uses `phi_pro`.
pub fn fit_nuisances_on(
    data: &ObservedDataset,
    phi_retro: &DMatrix<f64>,
    phi_pro: &DMatrix<f64>,
    opts: &LogitOptions,
    clip_opts: &ClipOptions,
) -> Result<Nuisances> {
    let xr = with_intercept(phi_retro);
    let mut fits = Vec::with_capacity(2);
    let mut pi1 = Vec::with_capacity(2);
    for y in 0..2u8 {
        let rows = stratum_rows(data, y);
        let xs = xr.select_rows(&rows);
        let ts: Vec<u8> = rows.iter().map(|&i| data.t()[i]).collect();
        let fit = fit_logit(&ts, &xs, None, opts)?;
        pi1.push(fit.fitted(&xr));
        fits.push(fit);
    }
    let xp = with_intercept(phi_pro);
    let pyx = fit_logit(data.y(), &xp, None, opts)?.fitted(&xp);
    let mut pi1: [DVector<f64>; 2] = [pi1.remove(0), pi1.remove(0)];
    let mut pyx = pyx;
    let mut clipped = clip(&mut pi1[0], clip_opts)?;
    clipped += clip(&mut pi1[1], clip_opts)?;
    clipped += clip(&mut pyx, clip_opts)?;
    let retro: [LogitFit; 2] = [fits.remove(0), fits.remove(0)];
    Ok(Nuisances {
        pi1,
        pyx,
        retro,
        clipped,
    })
}

pub fn fit_nuisances(
    data: &ObservedDataset,
    retro_spec: &BasisSpec,
    pro_spec: &BasisSpec,
    opts: &LogitOptions,
    clip_opts: &ClipOptions,
) -> Result<Nuisances> {
    let phi_r = build_basis(data.x(), retro_spec)?;
    let phi_p = if pro_spec == retro_spec {
        phi_r.clone()
    } else {
        build_basis(data.x(), pro_spec)?
    };
    fit_nuisances_on(data, &phi_r, &phi_p, opts, clip_opts)
}

/// Algorithm-1 estimator: one fully interacted logit of T on
/// [1, Y, φ̃, Y·φ̃] with φ̃ centred at its stratum-y mean; β̂(y) is the
/// coefficient on Y and its standard error is read off the fit.
pub fn estimate_beta_combined(
    data: &ObservedDataset,
    spec: &BasisSpec,
    y_stratum: u8,
    opts: &LogitOptions,
) -> Result<BetaEstimate> {
    let phi = build_basis(data.x(), spec)?;
    let (n, j) = phi.shape();
    let rows = stratum_rows(data, y_stratum);
    let means: Vec<f64> = (0..j)
        .map(|c| rows.iter().map(|&i| phi[(i, c)]).sum::<f64>() / rows.len() as f64)
        .collect();
    let mut design = DMatrix::zeros(n, 2 + 2 * j);
    for i in 0..n {
        let yi = f64::from(data.y()[i]);
        design[(i, 0)] = 1.0;
        design[(i, 1)] = yi;
        for c in 0..j {
            let centred = phi[(i, c)] - means[c];
            design[(i, 2 + c)] = centred;
            design[(i, 2 + j + c)] = yi * centred;
        }
    }
    let fit = fit_logit(data.t(), &design, None, opts)?;
    Ok(BetaEstimate {
        y_stratum,
        value: fit.coef[1],
        se: fit.se(1),
        method: Method::Combined,
        scale: Scale::Log,
    })
}

/// Per-observation efficient influence function values and their parts.
#[derive(Debug, Clone, PartialEq)]
pub struct EifRecord {
    pub values: Vec<f64>,
    /// Stratum-weighted centred log OR (or OR) term.
    pub centred: Vec<f64>,
    /// −Δ₀ / {(1−h) w^y}, times OR on the level scale.
    pub adj0: Vec<f64>,
    /// w^{1−y} Δ₁ / h, times OR on the level scale.
    pub adj1: Vec<f64>,
}

impl EifRecord {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Variance of the estimator: mean(F²) / n.
    pub fn variance(&self) -> f64 {
        let n = self.values.len() as f64;
        self.values.iter().map(|v| v * v).sum::<f64>() / n / n
    }
}

/// Plug-in F̂_y (log scale) or K̂_y (level scale) at the estimate `target`.
pub fn eif(
    data: &ObservedDataset,
    nuis: &Nuisances,
    y_stratum: u8,
    scale: Scale,
    target: f64,
) -> EifRecord {
    let n = data.n();
    let h = data.h0();
    let hy = if y_stratum == 1 { h } else { 1.0 - h };
    let log_or = nuis.log_or();
    let mut rec = EifRecord {
        values: Vec::with_capacity(n),
        centred: Vec::with_capacity(n),
        adj0: Vec::with_capacity(n),
        adj1: Vec::with_capacity(n),
    };
    for i in 0..n {
        let yi = data.y()[i];
        let ti = f64::from(data.t()[i]);
        let w = h / (1.0 - h) * (1.0 - nuis.pyx[i]) / nuis.pyx[i];
        let delta = |s: usize| {
            if usize::from(yi) != s {
                return 0.0;
            }
            let p = nuis.pi1[s][i];
            (ti - p) / (p * (1.0 - p))
        };
        let (level, mult) = match scale {
            Scale::Log => (log_or[i], 1.0),
            Scale::Level => {
                let or = log_or[i].exp();
                (or, or)
            }
        };
        let centred = if yi == y_stratum {
            (level - target) / hy
        } else {
            0.0
        };
        let w_y = if y_stratum == 1 { w } else { 1.0 };
        let w_1my = if y_stratum == 1 { 1.0 } else { w };
        let adj0 = -mult * delta(0) / ((1.0 - h) * w_y);
        let adj1 = mult * w_1my * delta(1) / h;
        rec.values.push(centred + adj0 + adj1);
        rec.centred.push(centred);
        rec.adj0.push(adj0);
        rec.adj1.push(adj1);
    }
    rec
}

/// EIF-based variance of the β̂(y) or κ̂(y) estimator.
pub fn eif_variance(
    data: &ObservedDataset,
    nuis: &Nuisances,
    y_stratum: u8,
    scale: Scale,
    target: f64,
) -> f64 {
    eif(data, nuis, y_stratum, scale, target).variance()
}

fn stratum_mean(data: &ObservedDataset, v: &DVector<f64>, y: u8) -> f64 {
    let rows = stratum_rows(data, y);
    rows.iter().map(|&i| v[i]).sum::<f64>() / rows.len() as f64
}

/// Plug-in estimate from already fitted nuisances.
pub fn beta_from_nuisances(
    data: &ObservedDataset,
    nuis: &Nuisances,
    y_stratum: u8,
    scale: Scale,
) -> BetaEstimate {
    let log_or = nuis.log_or();
    let value = match scale {
        Scale::Log => stratum_mean(data, &log_or, y_stratum),
        Scale::Level => stratum_mean(data, &log_or.map(f64::exp), y_stratum),
    };
    let se = eif_variance(data, nuis, y_stratum, scale, value).sqrt();
    BetaEstimate {
        y_stratum,
        value,
        se,
        method: Method::PlugIn,
        scale,
    }
}

/// β̂(y) for every identified stratum: y = 0, 1 for case-control samples,
/// y = 0 only for case-population samples. The combined estimator needs
/// `pro_spec == retro_spec`.
pub fn estimate_betas(
    data: &ObservedDataset,
    pro_spec: &BasisSpec,
    retro_spec: &BasisSpec,
    method: Method,
    opts: &LogitOptions,
    clip: &ClipOptions,
) -> Result<Vec<BetaEstimate>> {
    let strata: &[u8] = match data.design() {
        Design::CaseControl => &[0, 1],
        Design::CasePopulation => &[0],
    };
    match method {
        Method::Combined => {
            if pro_spec != retro_spec {
                return Err(Error::InvalidArgument(
                    "the combined estimator uses one basis for both logits".into(),
                ));
            }
            strata
                .iter()
                .map(|&y| estimate_beta_combined(data, retro_spec, y, opts))
                .collect()
        }
        Method::PlugIn => {
            let nuis = fit_nuisances(data, retro_spec, pro_spec, opts, clip)?;
            Ok(strata
                .iter()
                .map(|&y| beta_from_nuisances(data, &nuis, y, Scale::Log))
                .collect())
        }
    }
}

/// Stratum-y sample mean of the fitted log odds ratio, with EIF standard error.
pub fn estimate_beta_plugin(
    data: &ObservedDataset,
    spec: &BasisSpec,
    y_stratum: u8,
    opts: &LogitOptions,
) -> Result<BetaEstimate> {
    let nuis = fit_nuisances(data, spec, spec, opts, &ClipOptions::default())?;
    Ok(beta_from_nuisances(data, &nuis, y_stratum, Scale::Log))
}

/// κ̂(y): stratum-y sample mean of the fitted odds ratio.
pub fn estimate_kappa(
    data: &ObservedDataset,
    spec: &BasisSpec,
    y_stratum: u8,
    opts: &LogitOptions,
) -> Result<BetaEstimate> {
    let nuis = fit_nuisances(data, spec, spec, opts, &ClipOptions::default())?;
    Ok(beta_from_nuisances(data, &nuis, y_stratum, Scale::Level))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandRow {
    pub p: f64,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RRBand {
    pub design: Design,
    pub alpha: f64,
    /// Log-scale half width added to the point.
    pub u: f64,
    pub rows: Vec<BandRow>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 0.5], got {alpha}"
        )));
    }
    Ok(())
}

/// Relative-risk upper-bound band over `grid`. Case-control samples use the
/// uniform band exp{pβ̂(1) + (1−p)β̂(0) + u}; case-population samples only
/// need β̂(0), giving a band constant in p. Both are truncated below at 1.
pub fn rr_band(
    beta0: &BetaEstimate,
    beta1: Option<&BetaEstimate>,
    alpha: f64,
    design: Design,
    grid: &PGrid,
) -> Result<RRBand> {
    check_alpha(alpha)?;
    let b0 = beta0.log_value();
    let (u, line): (f64, Box<dyn Fn(f64) -> f64>) = match design {
        Design::CaseControl => {
            let beta1 = beta1.ok_or_else(|| {
                Error::InvalidArgument("case-control band needs both strata".into())
            })?;
            let b1 = beta1.log_value();
            let u = z(1.0 - alpha / 2.0) * beta0.se.max(beta1.se);
            (u, Box::new(move |p| p * b1 + (1.0 - p) * b0))
        }
        Design::CasePopulation => (z(1.0 - alpha) * beta0.se, Box::new(move |_| b0)),
    };
    let rows = grid
        .points()
        .into_iter()
        .map(|p| {
            let c = line(p);
            BandRow {
                p,
                point: c.exp().max(1.0),
                lower: 1.0,
                upper: (c + u).exp().max(1.0),
            }
        })
        .collect();
    Ok(RRBand {
        design,
        alpha,
        u,
        rows,
    })
}

/// One row of the estimate table: value with its one-sided interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// "β(y)", "exp[β(y)]" rows with one-sided (1−α) intervals bounded below by
/// the MTR limits 0 and 1.
pub fn report_rows(est: &BetaEstimate, alpha: f64) -> Result<Vec<ReportRow>> {
    check_alpha(alpha)?;
    let b = est.log_value();
    let up = b + z(1.0 - alpha) * est.se_log();
    let y = est.y_stratum;
    Ok(vec![
        ReportRow {
            label: format!("beta({y})"),
            value: b,
            ci_lower: 0.0,
            ci_upper: up.max(0.0),
        },
        ReportRow {
            label: format!("exp[beta({y})]"),
            value: b.exp(),
            ci_lower: 1.0,
            ci_upper: up.exp().max(1.0),
        },
    ])
}

impl BetaEstimate {
    /// Standard error on the log scale (delta method for κ̂).
    pub fn se_log(&self) -> f64 {
        match self.scale {
            Scale::Log => self.se,
            Scale::Level => self.se / self.value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CountTable2x2, H0};
    use crate::glm::sigmoid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table2() -> ObservedDataset {
        CountTable2x2::new(527, 318, 397, 524)
            .to_dataset(Design::CaseControl, H0::Estimate)
            .unwrap()
    }

    fn or2() -> f64 {
        (524.0f64 * 527.0 / (318.0 * 397.0)).ln()
    }

    /// Two-stratum data with one covariate and logit T = a_y + b_y x.
    fn simulated(n: usize, seed: u64, a: [f64; 2], b: [f64; 2]) -> ObservedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = Vec::new();
        let mut t = Vec::new();
        let mut x = Vec::new();
        for i in 0..n {
            let yi = u8::from(i % 2 == 0);
            let xi: f64 = rng.random::<f64>() * 2.0 + f64::from(yi) * 0.5;
            let p = sigmoid(a[yi as usize] + b[yi as usize] * xi);
            y.push(yi);
            t.push(u8::from(rng.random::<f64>() < p));
            x.push(xi);
        }
        ObservedDataset::new(
            y,
            t,
            DMatrix::from_column_slice(n, 1, &x),
            vec!["x".into()],
            Design::CaseControl,
            H0::Estimate,
        )
        .unwrap()
    }

    #[test]
    fn no_covariates_recover_table_log_odds_ratio() {
        let d = table2();
        let spec = BasisSpec::linear();
        let opts = LogitOptions::default();
        for y in 0..2 {
            let c = estimate_beta_combined(&d, &spec, y, &opts).unwrap();
            let p = estimate_beta_plugin(&d, &spec, y, &opts).unwrap();
            assert!((c.value - or2()).abs() < 1e-9);
            assert!((p.value - or2()).abs() < 1e-9);
            assert!((c.value - 0.783).abs() < 0.005);
            let k = estimate_kappa(&d, &spec, y, &opts).unwrap();
            assert!((k.value - or2().exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn no_covariate_se_matches_woolf() {
        let d = table2();
        let woolf = (1.0 / 527.0 + 1.0 / 318.0 + 1.0 / 397.0 + 1.0 / 524.0f64).sqrt();
        let c =
            estimate_beta_combined(&d, &BasisSpec::linear(), 1, &LogitOptions::default()).unwrap();
        assert!((c.se - woolf).abs() < 1e-8);
        let p =
            estimate_beta_plugin(&d, &BasisSpec::linear(), 1, &LogitOptions::default()).unwrap();
        assert!((p.se - woolf).abs() < 1e-8);
    }

    #[test]
    fn combined_equals_plugin() {
        let d = simulated(1500, 11, [0.2, -0.3], [0.8, -0.4]);
        let opts = LogitOptions::default();
        for spec in [BasisSpec::linear(), "poly3".parse().unwrap()] {
            for y in 0..2 {
                let c = estimate_beta_combined(&d, &spec, y, &opts).unwrap();
                let p = estimate_beta_plugin(&d, &spec, y, &opts).unwrap();
                assert!(
                    (c.value - p.value).abs() < 1e-6,
                    "{} vs {}",
                    c.value,
                    p.value
                );
            }
        }
    }

    #[test]
    fn plugin_matches_coefficient_formula() {
        let d = simulated(800, 12, [0.0, 0.4], [0.5, 1.0]);
        let nuis = fit_nuisances(
            &d,
            &BasisSpec::linear(),
            &BasisSpec::linear(),
            &LogitOptions::default(),
            &ClipOptions::default(),
        )
        .unwrap();
        let mu = |y: usize| nuis.retro[y].coef.clone();
        for y in 0..2u8 {
            let rows = stratum_rows(&d, y);
            let xbar = rows.iter().map(|&i| d.x()[(i, 0)]).sum::<f64>() / rows.len() as f64;
            let direct = (mu(1)[0] - mu(0)[0]) + xbar * (mu(1)[1] - mu(0)[1]);
            let est = beta_from_nuisances(&d, &nuis, y, Scale::Log);
            assert!((est.value - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn eif_centred_term_has_zero_mean_and_jensen_holds() {
        let d = simulated(1000, 13, [0.1, 0.5], [0.3, -0.7]);
        let nuis = fit_nuisances(
            &d,
            &BasisSpec::linear(),
            &BasisSpec::linear(),
            &LogitOptions::default(),
            &ClipOptions::default(),
        )
        .unwrap();
        for y in 0..2 {
            let b = beta_from_nuisances(&d, &nuis, y, Scale::Log);
            let rec = eif(&d, &nuis, y, Scale::Log, b.value);
            assert!(rec.centred.iter().sum::<f64>().abs() < 1e-9);
            let k = beta_from_nuisances(&d, &nuis, y, Scale::Level);
            assert!(k.value.ln() >= b.value);
        }
    }

    #[test]
    fn eif_mean_is_zero_for_saturated_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 3000;
        let mut y = Vec::new();
        let mut t = Vec::new();
        let mut x = Vec::new();
        for i in 0..n {
            let yi = u8::from(i % 3 == 0);
            let xi = rng.random_range(0..3) as f64;
            let p = sigmoid(-0.5 + 0.4 * xi + 0.6 * f64::from(yi) - 0.2 * xi * f64::from(yi));
            y.push(yi);
            t.push(u8::from(rng.random::<f64>() < p));
            x.push(xi);
        }
        let d = ObservedDataset::new(
            y,
            t,
            DMatrix::from_column_slice(n, 1, &x),
            vec!["x".into()],
            Design::CaseControl,
            H0::Estimate,
        )
        .unwrap();
        let spec = BasisSpec::categorical();
        let nuis = fit_nuisances(
            &d,
            &spec,
            &spec,
            &LogitOptions::default(),
            &ClipOptions::default(),
        )
        .unwrap();
        for y in 0..2 {
            for scale in [Scale::Log, Scale::Level] {
                let b = beta_from_nuisances(&d, &nuis, y, scale);
                let rec = eif(&d, &nuis, y, scale, b.value);
                assert!(rec.mean().abs() < 1e-6, "mean {}", rec.mean());
            }
        }
    }

    #[test]
    fn eif_variance_dominates_centred_term() {
        let d = simulated(2000, 15, [0.0, 0.5], [0.4, 0.4]);
        let nuis = fit_nuisances(
            &d,
            &BasisSpec::linear(),
            &BasisSpec::linear(),
            &LogitOptions::default(),
            &ClipOptions::default(),
        )
        .unwrap();
        for y in 0..2 {
            let b = beta_from_nuisances(&d, &nuis, y, Scale::Log);
            let rec = eif(&d, &nuis, y, Scale::Log, b.value);
            let centred: f64 = rec.centred.iter().map(|v| v * v).sum();
            let full: f64 = rec.values.iter().map(|v| v * v).sum();
            assert!(full >= centred);
        }
    }

    #[test]
    fn strict_clipping_errors() {
        let mut v = DVector::from_vec(vec![0.5, 1e-9, 0.999_999_9]);
        let strict = ClipOptions {
            strict: true,
            ..Default::default()
        };
        assert!(matches!(
            clip(&mut v.clone(), &strict),
            Err(Error::NuisanceProbabilityOutOfRange { count: 2 })
        ));
        assert_eq!(clip(&mut v, &ClipOptions::default()).unwrap(), 2);
        assert_eq!(v[1], 1e-6);
    }

    fn est(y: u8, value: f64, se: f64) -> BetaEstimate {
        BetaEstimate {
            y_stratum: y,
            value,
            se,
            method: Method::Combined,
            scale: Scale::Log,
        }
    }

    #[test]
    fn band_half_width() {
        let band = rr_band(
            &est(0, 0.3, 0.1),
            Some(&est(1, 0.3, 0.1)),
            0.05,
            Design::CaseControl,
            &PGrid::default(),
        )
        .unwrap();
        assert!((band.u - 0.195_996_4).abs() < 1e-6);
        assert_eq!(band.rows.len(), 101);
        for r in &band.rows {
            assert!((r.upper - (0.3f64 + band.u).exp()).abs() < 1e-12);
            assert!(r.upper >= r.point && r.point >= r.lower && r.lower == 1.0);
        }
    }

    #[test]
    fn case_population_band_is_constant() {
        let band = rr_band(
            &est(0, 0.5, 0.2),
            None,
            0.05,
            Design::CasePopulation,
            &PGrid::new(0.15, 0.01).unwrap(),
        )
        .unwrap();
        assert_eq!(band.rows.len(), 16);
        let up = (0.5 + z(0.95) * 0.2f64).exp();
        assert!(band.rows.iter().all(|r| (r.upper - up).abs() < 1e-12));
    }

    #[test]
    fn band_truncated_at_one_and_widens_with_stringency() {
        let b0 = est(0, -0.8, 0.1);
        let b1 = est(1, -0.2, 0.3);
        let g = PGrid::default();
        let wide = rr_band(&b0, Some(&b1), 0.01, Design::CaseControl, &g).unwrap();
        let narrow = rr_band(&b0, Some(&b1), 0.10, Design::CaseControl, &g).unwrap();
        for (w, n) in wide.rows.iter().zip(&narrow.rows) {
            assert!(w.upper >= n.upper);
            assert_eq!(w.point, 1.0);
        }
        assert!(rr_band(&b0, Some(&b1), 0.6, Design::CaseControl, &g).is_err());
        assert!(rr_band(&b0, None, 0.05, Design::CaseControl, &g).is_err());
    }

    #[test]
    fn report_rows_one_sided() {
        let rows = report_rows(&est(1, 0.5, 0.1), 0.05).unwrap();
        assert_eq!(rows[0].label, "beta(1)");
        assert!((rows[0].ci_upper - (0.5 + 1.644_853_6 * 0.1)).abs() < 1e-6);
        assert_eq!(rows[1].ci_lower, 1.0);
        assert!((rows[1].value - 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn grid_points_end_at_pbar() {
        let p = PGrid::new(0.15, 0.01).unwrap().points();
        assert_eq!(p.len(), 16);
        assert_eq!(p[15], 0.15);
        assert!(PGrid::new(0.0, 0.01).is_err());
    }
}
