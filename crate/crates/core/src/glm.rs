//! Sieve bases and binary logistic maximum likelihood.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Terms generated from one covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermKind {
    Linear,
    /// x, x², …, x^degree.
    Polynomial(usize),
    /// Cubic B-spline with knots at empirical quantiles. Without `intercept`
    /// the first basis function is dropped so the columns do not span the
    /// constant.
    CubicSpline {
        inner_knots: usize,
        intercept: bool,
    },
    /// Indicators for every level except the smallest.
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    /// Either one entry applied to every covariate or one entry per covariate.
    pub terms: Vec<TermKind>,
    /// Adds x_j·x_k for j < k after the per-covariate terms.
    pub interactions: bool,
}

impl BasisSpec {
    pub fn uniform(kind: TermKind, interactions: bool) -> Self {
        Self {
            terms: vec![kind],
            interactions,
        }
    }

    pub fn linear() -> Self {
        Self::uniform(TermKind::Linear, false)
    }

    /// Linear, quadratic and pairwise interaction terms.
    pub fn quadratic_sieve() -> Self {
        Self::uniform(TermKind::Polynomial(2), true)
    }

    pub fn categorical() -> Self {
        Self::uniform(TermKind::Categorical, false)
    }

    fn kind_for(&self, k: usize, n_cov: usize) -> Result<TermKind> {
        match self.terms.len() {
            1 => Ok(self.terms[0]),
            m if m == n_cov => Ok(self.terms[k]),
            m => Err(Error::InvalidArgument(format!(
                "basis lists {m} term kinds for {n_cov} covariates"
            ))),
        }
    }
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self::uniform(TermKind::Polynomial(2), false)
    }
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermKind::Linear => write!(f, "linear"),
            TermKind::Polynomial(d) => write!(f, "poly{d}"),
            TermKind::CubicSpline {
                inner_knots,
                intercept: false,
            } => write!(f, "spline{inner_knots}"),
            TermKind::CubicSpline {
                inner_knots,
                intercept: true,
            } => write!(f, "spline{inner_knots}i"),
            TermKind::Categorical => write!(f, "categorical"),
        }
    }
}

impl FromStr for TermKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown basis term `{s}`"));
        let s = s.trim();
        if s == "linear" {
            return Ok(TermKind::Linear);
        }
        if s == "categorical" || s == "cat" {
            return Ok(TermKind::Categorical);
        }
        if let Some(d) = s.strip_prefix("poly") {
            let d: usize = d.parse().map_err(|_| bad())?;
            return if d == 0 {
                Err(bad())
            } else {
                Ok(TermKind::Polynomial(d))
            };
        }
        if let Some(k) = s.strip_prefix("spline") {
            let (k, intercept) = match k.strip_suffix('i') {
                Some(k) => (k, true),
                None => (k, false),
            };
            let inner_knots = k.parse().map_err(|_| bad())?;
            return Ok(TermKind::CubicSpline {
                inner_knots,
                intercept,
            });
        }
        Err(bad())
    }
}

/// Text form: comma-separated term kinds, optionally suffixed with `+int`,
/// e.g. `poly2+int`, `linear`, `spline3,linear`.
impl FromStr for BasisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (body, interactions) = match s.trim().strip_suffix("+int") {
            Some(b) => (b, true),
            None => (s.trim(), false),
        };
        let terms = body
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<TermKind>>>()?;
        Ok(Self {
            terms,
            interactions,
        })
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(","))?;
        if self.interactions {
            write!(f, "+int")?;
        }
        Ok(())
    }
}

/// R's default (type 7) sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Full knot vector for a cubic B-spline on [min, max] with `inner` knots at
/// empirical quantiles.
pub fn spline_knots(values: &[f64], inner: usize) -> Result<Vec<f64>> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let mut knots = vec![lo; 4];
    for i in 1..=inner {
        knots.push(quantile_sorted(&sorted, i as f64 / (inner + 1) as f64));
    }
    knots.extend([hi; 4]);
    if knots[3..knots.len() - 3].windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "spline knots are not strictly increasing; use fewer knots".into(),
        ));
    }
    Ok(knots)
}

/// Evaluates all order-4 B-spline basis functions at `x` by the Cox–de Boor
/// recursion. The right boundary is closed.
pub fn bspline_row(knots: &[f64], x: f64) -> Vec<f64> {
    const ORDER: usize = 4;
    let m = knots.len();
    let n_basis = m - ORDER;
    let last = knots[m - 1];
    let mut b: Vec<f64> = (0..m - 1)
        .map(|i| {
            let inside = knots[i] <= x && x < knots[i + 1];
            let right_end = x >= last && knots[i] < knots[i + 1] && knots[i + 1] == last;
            if inside || right_end {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for k in 2..=ORDER {
        for i in 0..m - k {
            let d1 = knots[i + k - 1] - knots[i];
            let d2 = knots[i + k] - knots[i + 1];
            let a = if d1 > 0.0 {
                (x - knots[i]) / d1 * b[i]
            } else {
                0.0
            };
            let c = if d2 > 0.0 {
                (knots[i + k] - x) / d2 * b[i + 1]
            } else {
                0.0
            };
            b[i] = a + c;
        }
    }
    b.truncate(n_basis);
    b
}

/// Basis matrix φ(X) (n × J, no intercept column).
pub fn build_basis(x: &DMatrix<f64>, spec: &BasisSpec) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..k {
        let xj: Vec<f64> = x.column(j).iter().copied().collect();
        match spec.kind_for(j, k)? {
            TermKind::Linear => cols.push(xj),
            TermKind::Polynomial(d) => {
                for p in 1..=d as i32 {
                    cols.push(xj.iter().map(|v| v.powi(p)).collect());
                }
            }
            TermKind::CubicSpline {
                inner_knots,
                intercept,
            } => {
                let knots = spline_knots(&xj, inner_knots)?;
                let rows: Vec<Vec<f64>> = xj.iter().map(|&v| bspline_row(&knots, v)).collect();
                let skip = usize::from(!intercept);
                for b in skip..rows[0].len() {
                    cols.push(rows.iter().map(|r| r[b]).collect());
                }
            }
            TermKind::Categorical => {
                let mut levels = xj.clone();
                levels.sort_by(f64::total_cmp);
                levels.dedup();
                for &lev in &levels[1..] {
                    cols.push(xj.iter().map(|&v| f64::from(u8::from(v == lev))).collect());
                }
            }
        }
    }
    if spec.interactions {
        for a in 0..k {
            for b in a + 1..k {
                cols.push((0..n).map(|i| x[(i, a)] * x[(i, b)]).collect());
            }
        }
    }
    for (c, col) in cols.iter().enumerate() {
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::DegenerateColumn(c));
        }
    }
    Ok(DMatrix::from_fn(n, cols.len(), |i, c| cols[c][i]))
}

/// Prepends a column of ones.
pub fn with_intercept(phi: &DMatrix<f64>) -> DMatrix<f64> {
    phi.clone().insert_column(0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitOptions {
    pub max_iter: usize,
    /// Convergence when max |gradient| ≤ tol · n.
    pub tol: f64,
    /// On separation or a singular information matrix, refit with a tiny
    /// ridge instead of failing.
    pub ridge_fallback: bool,
}

impl Default for LogitOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
            ridge_fallback: false,
        }
    }
}

const RIDGE: f64 = 1e-8;
const ETA_LIMIT: f64 = 30.0;
const COEF_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub coef: DVector<f64>,
    /// Inverse observed information at `coef`.
    pub cov: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
    pub gradient_max: f64,
    pub ridge_used: bool,
}

impl LogitFit {
    pub fn se(&self, j: usize) -> f64 {
        self.cov[(j, j)].max(0.0).sqrt()
    }

    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * &self.coef
    }

    pub fn fitted(&self, x: &DMatrix<f64>) -> DVector<f64> {
        self.linear_predictor(x).map(sigmoid)
    }
}

#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^u) without overflow.
#[inline]
fn log1pexp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn loglik(y: &[u8], w: &[f64], eta: &DVector<f64>) -> f64 {
    eta.iter()
        .zip(y)
        .zip(w)
        .map(|((&e, &yi), &wi)| wi * (f64::from(yi) * e - log1pexp(e)))
        .sum()
}

/// Maximum-likelihood logistic regression of `y` on the columns of `x`
/// (include an intercept column yourself).
pub fn fit_logit(
    y: &[u8],
    x: &DMatrix<f64>,
    weights: Option<&[f64]>,
    opts: &LogitOptions,
) -> Result<LogitFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument(
            "response and design lengths differ".into(),
        ));
    }
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "weights must be finite, nonnegative, length n".into(),
            ));
        }
    }
    if n <= p {
        return Err(Error::InvalidArgument(format!(
            "need more rows ({n}) than columns ({p})"
        )));
    }
    if y.iter().all(|&v| v == 1) || y.iter().all(|&v| v == 0) {
        return Err(Error::SeparationDetected);
    }
    let ones;
    let w = match weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; n];
            &ones
        }
    };
    match newton(y, x, w, opts, 0.0) {
        Err(Error::SeparationDetected | Error::Singular) if opts.ridge_fallback => {
            newton(y, x, w, opts, RIDGE)
        }
        other => other,
    }
}

fn newton(
    y: &[u8],
    x: &DMatrix<f64>,
    w: &[f64],
    opts: &LogitOptions,
    ridge: f64,
) -> Result<LogitFit> {
    let (n, p) = x.shape();
    let scale: f64 = w.iter().sum::<f64>().max(1.0);
    let penalised = |beta: &DVector<f64>, eta: &DVector<f64>| {
        loglik(y, w, eta) - 0.5 * ridge * beta.norm_squared()
    };
    let mut beta = DVector::zeros(p);
    let mut eta = DVector::zeros(n);
    let mut ll = penalised(&beta, &eta);
    let mut iterations = 0;
    let mut polish = 0;

    loop {
        let prob = eta.map(sigmoid);
        let resid = DVector::from_fn(n, |i, _| w[i] * (f64::from(y[i]) - prob[i]));
        let grad = x.tr_mul(&resid) - &beta * ridge;
        let gmax = grad.amax();
        let info = information(x, w, &prob, ridge);
        let guarded = ridge == 0.0;
        let chol = info.cholesky().ok_or(Error::Singular)?;
        let step = chol.solve(&grad);
        // the gradient bound is the contract; the step bound polishes to
        // full precision, which costs one extra Newton iteration at most
        let small_step = step.amax() <= 1e-10 * (1.0 + beta.amax());
        if gmax <= opts.tol * scale {
            polish += 1;
        }
        if gmax <= opts.tol * scale && (small_step || polish > 2 || iterations >= opts.max_iter) {
            if guarded && separated(&beta, &eta) {
                return Err(Error::SeparationDetected);
            }
            let cov = chol.inverse();
            let cov = (&cov + cov.transpose()) * 0.5;
            return Ok(LogitFit {
                coef: beta,
                cov,
                converged: true,
                iterations,
                loglik: loglik(y, w, &eta),
                gradient_max: gmax,
                ridge_used: ridge > 0.0,
            });
        }
        if iterations >= opts.max_iter {
            if guarded && separated(&beta, &eta) {
                return Err(Error::SeparationDetected);
            }
            return Err(Error::NotConverged(iterations));
        }
        iterations += 1;
        // step-halving keeps the log-likelihood non-decreasing
        let mut t = 1.0;
        let (new_beta, new_eta, new_ll) = loop {
            let b = &beta + &step * t;
            let e = x * &b;
            let l = penalised(&b, &e);
            if l >= ll - 1e-12 * ll.abs().max(1.0) || t < 1e-10 {
                break (b, e, l);
            }
            t *= 0.5;
        };
        beta = new_beta;
        eta = new_eta;
        ll = new_ll;
        if guarded && separated(&beta, &eta) {
            return Err(Error::SeparationDetected);
        }
    }
}

fn separated(beta: &DVector<f64>, eta: &DVector<f64>) -> bool {
    eta.amax() > ETA_LIMIT || beta.amax() > COEF_LIMIT
}

/// X' diag(w p (1-p)) X + ridge·I.
fn information(x: &DMatrix<f64>, w: &[f64], prob: &DVector<f64>, ridge: f64) -> DMatrix<f64> {
    let mut xs = x.clone();
    for (i, mut row) in xs.row_iter_mut().enumerate() {
        row *= (w[i] * prob[i] * (1.0 - prob[i])).sqrt();
    }
    let mut info = xs.tr_mul(&xs);
    for j in 0..info.nrows() {
        info[(j, j)] += ridge;
    }
    info
}
