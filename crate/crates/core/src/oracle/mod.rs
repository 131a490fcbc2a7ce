//! Exact identification objects on finite-support populations.
//!
//! A [`DiscretePopulation`] is the joint law of (X*, T*, Y*(0), Y*(1)) over a
//! finite set of covariate cells. [`project`] pushes it through one of the two
//! sampling designs to get the [`ObservedLaw`] of (Y, T, X), from which the
//! bound functions `r`, `Γ` and `Γ_AR` are evaluated. Everything here is closed
//! form, so these routines double as the reference values the estimators are
//! checked against.

pub mod suite;

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::data::Design;
use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// Index of a (t, y0, y1) state inside one covariate cell.
#[inline]
fn state(t: usize, y0: usize, y1: usize) -> usize {
    t * 4 + y0 * 2 + y1
}

/// Finite joint distribution of (X*, T*, Y*(0), Y*(1)).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePopulation {
    /// `mass[x][state(t, y0, y1)]`.
    mass: Vec<[f64; 8]>,
}

/// One line of a population file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationCell {
    pub x: usize,
    pub t: u8,
    pub y0: u8,
    pub y1: u8,
    pub mass: f64,
}

impl DiscretePopulation {
    pub fn new(mass: Vec<[f64; 8]>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InvalidPopulation("no covariate cells".into()));
        }
        if mass.iter().flatten().any(|&m| m < 0.0 || !m.is_finite()) {
            return Err(Error::InvalidPopulation(
                "negative or non-finite mass".into(),
            ));
        }
        let total: f64 = mass.iter().flatten().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidPopulation(format!(
                "mass sums to {total}, not 1"
            )));
        }
        Ok(Self { mass })
    }

    pub fn from_cells(cells: &[PopulationCell]) -> Result<Self> {
        let n_cells = cells.iter().map(|c| c.x + 1).max().unwrap_or(0);
        let mut mass = vec![[0.0; 8]; n_cells];
        for c in cells {
            if c.t > 1 || c.y0 > 1 || c.y1 > 1 {
                return Err(Error::InvalidPopulation("t, y0, y1 must be 0/1".into()));
            }
            mass[c.x][state(c.t as usize, c.y0 as usize, c.y1 as usize)] += c.mass;
        }
        Self::new(mass)
    }

    pub fn cells(&self) -> Vec<PopulationCell> {
        let mut out = Vec::new();
        for (x, m) in self.mass.iter().enumerate() {
            for t in 0..2 {
                for y0 in 0..2 {
                    for y1 in 0..2 {
                        out.push(PopulationCell {
                            x,
                            t: t as u8,
                            y0: y0 as u8,
                            y1: y1 as u8,
                            mass: m[state(t, y0, y1)],
                        });
                    }
                }
            }
        }
        out
    }

    /// Reads the tabular `x,t,y0,y1,mass` population format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let cells = rdr
            .deserialize::<PopulationCell>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_cells(&cells)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for c in self.cells() {
            w.serialize(c)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self, x: usize, t: usize, y0: usize, y1: usize) -> f64 {
        self.mass[x][state(t, y0, y1)]
    }

    fn check_cell(&self, x: usize) -> Result<()> {
        if x >= self.n_cells() {
            return Err(Error::InvalidArgument(format!(
                "covariate cell {x} not in support"
            )));
        }
        Ok(())
    }

    /// Pr(X*=x).
    pub fn px(&self, x: usize) -> f64 {
        self.mass[x].iter().sum()
    }

    /// Pr(X*=x, T*=t, Y*=y) where Y* is the realised outcome.
    pub fn joint_observed(&self, x: usize, t: usize, y: usize) -> f64 {
        let mut s = 0.0;
        for y0 in 0..2 {
            for y1 in 0..2 {
                let realised = if t == 1 { y1 } else { y0 };
                if realised == y {
                    s += self.mass(x, t, y0, y1);
                }
            }
        }
        s
    }

    /// Pr(Y*=1), the population case probability.
    pub fn p0(&self) -> f64 {
        (0..self.n_cells())
            .map(|x| self.joint_observed(x, 0, 1) + self.joint_observed(x, 1, 1))
            .sum()
    }

    /// Pr(T*=1 | X*=x).
    pub fn prob_treated(&self, x: usize) -> f64 {
        let treated: f64 = self.mass[x][4..].iter().sum();
        treated / self.px(x)
    }

    /// Pr{Y*(s)=1 | X*=x}.
    pub fn prob_potential(&self, s: usize, x: usize) -> f64 {
        let mut num = 0.0;
        for t in 0..2 {
            for y0 in 0..2 {
                for y1 in 0..2 {
                    if [y0, y1][s] == 1 {
                        num += self.mass(x, t, y0, y1);
                    }
                }
            }
        }
        num / self.px(x)
    }

    /// Pr{Y*(s)=1 | T*=t, X*=x}.
    pub fn prob_potential_given_t(&self, s: usize, t: usize, x: usize) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for y0 in 0..2 {
            for y1 in 0..2 {
                let m = self.mass(x, t, y0, y1);
                den += m;
                if [y0, y1][s] == 1 {
                    num += m;
                }
            }
        }
        num / den
    }

    /// Pr(Y*=1 | T*=t, X*=x).
    pub fn prob_case_given_t(&self, t: usize, x: usize) -> f64 {
        let a = self.joint_observed(x, t, 1);
        a / (a + self.joint_observed(x, t, 0))
    }

    /// Pr(Y*=1 | X*=x).
    pub fn prob_case(&self, x: usize) -> f64 {
        (self.joint_observed(x, 0, 1) + self.joint_observed(x, 1, 1)) / self.px(x)
    }

    /// Prospective odds ratio of (Y*, T*) within cell x.
    pub fn prospective_odds_ratio(&self, x: usize) -> f64 {
        let p1 = self.prob_case_given_t(1, x);
        let p0 = self.prob_case_given_t(0, x);
        (p1 / (1.0 - p1)) / (p0 / (1.0 - p0))
    }
}

/// Causal relative risk θ(x) = Pr{Y*(1)=1|x} / Pr{Y*(0)=1|x}.
pub fn theta(pop: &DiscretePopulation, x: usize) -> Result<f64> {
    pop.check_cell(x)?;
    let den = pop.prob_potential(0, x);
    if den <= 0.0 {
        return Err(Error::ZeroDenominator("theta"));
    }
    Ok(pop.prob_potential(1, x) / den)
}

/// Causal attributable risk θ_AR(x) = Pr{Y*(1)=1|x} − Pr{Y*(0)=1|x}.
pub fn theta_ar(pop: &DiscretePopulation, x: usize) -> Result<f64> {
    pop.check_cell(x)?;
    Ok(pop.prob_potential(1, x) - pop.prob_potential(0, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AssumptionReport {
    pub overlap: bool,
    pub unconfounded: bool,
    pub mtr: bool,
    pub mts: bool,
}

/// Evaluates overlap, unconfoundedness, MTR and MTS cell by cell.
pub fn check_assumptions(pop: &DiscretePopulation) -> AssumptionReport {
    const TOL: f64 = 1e-12;
    let mut overlap = true;
    let mut unconfounded = true;
    let mut mtr = true;
    let mut mts = true;
    for x in 0..pop.n_cells() {
        let px = pop.px(x);
        if px <= 0.0 {
            overlap = false;
            continue;
        }
        let pt = pop.prob_treated(x);
        if !(pt > 0.0 && pt < 1.0) {
            overlap = false;
        }
        for s in 0..2 {
            let q = pop.prob_potential(s, x);
            if !(q > 0.0 && q < 1.0) {
                overlap = false;
            }
        }
        for t in 0..2 {
            if pop.mass(x, t, 1, 0) > 0.0 {
                mtr = false;
            }
        }
        if pt > 0.0 && pt < 1.0 {
            for s in 0..2 {
                let treated = pop.prob_potential_given_t(s, 1, x);
                let untreated = pop.prob_potential_given_t(s, 0, x);
                if (treated - untreated).abs() > TOL {
                    unconfounded = false;
                }
                if treated < untreated - TOL {
                    mts = false;
                }
            }
        }
    }
    AssumptionReport {
        overlap,
        unconfounded,
        mtr,
        mts,
    }
}

/// Law of the observed (Y, T, X) under Bernoulli sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedLaw {
    design: Design,
    h0: f64,
    /// Π(1 | y, x), indexed `[y][x]`.
    pi1: [Vec<f64>; 2],
    /// f_{X|Y}(x | y), indexed `[y][x]`.
    fxy: [Vec<f64>; 2],
    /// Pr(Y=1 | X=x).
    pyx: Vec<f64>,
}

impl ObservedLaw {
    pub fn new(design: Design, h0: f64, pi1: [Vec<f64>; 2], fxy: [Vec<f64>; 2]) -> Result<Self> {
        if !(h0 > 0.0 && h0 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "h0 must lie in (0,1), got {h0}"
            )));
        }
        let k = pi1[0].len();
        if pi1[1].len() != k || fxy[0].len() != k || fxy[1].len() != k || k == 0 {
            return Err(Error::InvalidArgument(
                "law arrays must share one cell count".into(),
            ));
        }
        for y in 0..2 {
            let s: f64 = fxy[y].iter().sum();
            if (s - 1.0).abs() > 1e-10 || fxy[y].iter().any(|&f| f <= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "f(x|y={y}) must be a positive pmf summing to 1"
                )));
            }
            for (x, &p) in pi1[y].iter().enumerate() {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::ZeroRetroProb(x));
                }
            }
        }
        let pyx = (0..k)
            .map(|x| {
                let a = h0 * fxy[1][x];
                a / (a + (1.0 - h0) * fxy[0][x])
            })
            .collect();
        Ok(Self {
            design,
            h0,
            pi1,
            fxy,
            pyx,
        })
    }

    /// Empirical law of a discrete sample given its cell counts
    /// `counts[y][x][t]`, with h0 equal to the case share.
    pub fn from_cell_counts(design: Design, counts: &[Vec<[u64; 2]>; 2]) -> Result<Self> {
        let k = counts[0].len();
        let ny: [f64; 2] = [0, 1].map(|y| counts[y].iter().map(|c| (c[0] + c[1]) as f64).sum());
        let mut pi1 = [vec![0.0; k], vec![0.0; k]];
        let mut fxy = [vec![0.0; k], vec![0.0; k]];
        for y in 0..2 {
            for x in 0..k {
                let c = counts[y][x];
                let tot = (c[0] + c[1]) as f64;
                pi1[y][x] = c[1] as f64 / tot;
                fxy[y][x] = tot / ny[y];
            }
        }
        Self::new(design, ny[1] / (ny[0] + ny[1]), pi1, fxy)
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn n_cells(&self) -> usize {
        self.pyx.len()
    }

    /// Π(t | y, x).
    pub fn pi(&self, t: usize, y: usize, x: usize) -> f64 {
        if t == 1 {
            self.pi1[y][x]
        } else {
            1.0 - self.pi1[y][x]
        }
    }

    /// f_{X|Y}(x | y).
    pub fn fxy(&self, y: usize, x: usize) -> f64 {
        self.fxy[y][x]
    }

    /// Pr(Y=1 | X=x).
    pub fn pyx(&self, x: usize) -> f64 {
        self.pyx[x]
    }

    fn check_cell(&self, x: usize) -> Result<()> {
        if x >= self.n_cells() {
            return Err(Error::InvalidArgument(format!(
                "covariate cell {x} not in support"
            )));
        }
        Ok(())
    }

    /// Aggregated log odds ratio β(y) = Σ_x f(x|y) log Γ(x, 0).
    pub fn beta(&self, y: usize) -> f64 {
        (0..self.n_cells())
            .map(|x| self.fxy[y][x] * gamma_unchecked(self, x, 0.0).ln())
            .sum()
    }

    /// κ(y) = Σ_x f(x|y) Γ(x, 0).
    pub fn kappa(&self, y: usize) -> f64 {
        (0..self.n_cells())
            .map(|x| self.fxy[y][x] * gamma_unchecked(self, x, 0.0))
            .sum()
    }

    /// β_AR(p, y) = E{ r(X,p) Γ_AR(X,p) | Y=y }.
    pub fn beta_ar(&self, p: f64, y: usize) -> f64 {
        (0..self.n_cells())
            .map(|x| self.fxy[y][x] * r_unchecked(self, x, p) * gamma_ar_unchecked(self, x, p))
            .sum()
    }

    /// Case-control attributable-risk upper bound (1−p)β_AR(p,0) + pβ_AR(p,1).
    pub fn ub_ar(&self, p: f64) -> f64 {
        (1.0 - p) * self.beta_ar(p, 0) + p * self.beta_ar(p, 1)
    }

    /// ξ_CP, the slope in p of the case-population attributable-risk bound.
    pub fn xi_cp(&self) -> f64 {
        let s: f64 = (0..self.n_cells())
            .map(|x| {
                let odds = self.pyx[x] / (1.0 - self.pyx[x]);
                let diff =
                    self.pi(1, 1, x) / self.pi(1, 0, x) - self.pi(0, 1, x) / self.pi(0, 0, x);
                self.fxy[0][x] * odds * diff
            })
            .sum();
        (1.0 - self.h0) / self.h0 * s
    }
}

/// Observed law produced by sampling `pop` under `design` with case share `h0`.
pub fn project(pop: &DiscretePopulation, design: Design, h0: f64) -> Result<ObservedLaw> {
    let k = pop.n_cells();
    let p0 = pop.p0();
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidPopulation(format!(
            "case probability {p0} not in (0,1)"
        )));
    }
    let mut pi1 = [vec![0.0; k], vec![0.0; k]];
    let mut fxy = [vec![0.0; k], vec![0.0; k]];
    for x in 0..k {
        let px = pop.px(x);
        let pt = if px > 0.0 {
            pop.prob_treated(x)
        } else {
            f64::NAN
        };
        if !(pt > 0.0 && pt < 1.0) {
            return Err(Error::OverlapViolation(x));
        }
        for y in 0..2 {
            let a1 = pop.joint_observed(x, 1, y);
            let a0 = pop.joint_observed(x, 0, y);
            if a1 + a0 <= 0.0 {
                return Err(Error::OverlapViolation(x));
            }
        }
        // stratum 1 is always the case subpopulation
        let a1 = pop.joint_observed(x, 1, 1);
        let a0 = pop.joint_observed(x, 0, 1);
        pi1[1][x] = a1 / (a1 + a0);
        fxy[1][x] = (a1 + a0) / p0;
        match design {
            Design::CaseControl => {
                let a1 = pop.joint_observed(x, 1, 0);
                let a0 = pop.joint_observed(x, 0, 0);
                pi1[0][x] = a1 / (a1 + a0);
                fxy[0][x] = (a1 + a0) / (1.0 - p0);
            }
            Design::CasePopulation => {
                pi1[0][x] = pt;
                fxy[0][x] = px;
            }
        }
    }
    ObservedLaw::new(design, h0, pi1, fxy)
}

/// r as a function of Pr(Y=1|X=x) alone; shared with the sample estimators.
pub fn r_value(design: Design, h0: f64, pyx: f64, p: f64) -> f64 {
    match design {
        Design::CaseControl => {
            let a = p * (1.0 - h0) * pyx;
            let b = h0 * (1.0 - p) * (1.0 - pyx);
            if a == 0.0 {
                0.0
            } else {
                a / (a + b)
            }
        }
        Design::CasePopulation => p * (1.0 - h0) / h0 * pyx / (1.0 - pyx),
    }
}

fn r_unchecked(law: &ObservedLaw, x: usize, p: f64) -> f64 {
    r_value(law.design, law.h0, law.pyx[x], p)
}

/// r(x, p); equals Pr(Y*=1 | X*=x) at p = p0.
pub fn r(law: &ObservedLaw, x: usize, p: f64) -> Result<f64> {
    law.check_cell(x)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "p must lie in [0,1], got {p}"
        )));
    }
    Ok(r_unchecked(law, x, p))
}

/// (1−r)a + rb with exact endpoints at r=0 and r=1.
#[inline]
fn mix_value(a: f64, b: f64, r: f64) -> f64 {
    if a == b {
        return a;
    }
    (1.0 - r) * a + r * b
}

#[inline]
fn mix(law: &ObservedLaw, t: usize, x: usize, r: f64) -> f64 {
    mix_value(law.pi(t, 0, x), law.pi(t, 1, x), r)
}

/// Γ_AR given Π(1|0,x), Π(1|1,x) and r.
pub fn gamma_ar_value(pi1_0: f64, pi1_1: f64, r: f64) -> f64 {
    pi1_1 / mix_value(pi1_0, pi1_1, r) - (1.0 - pi1_1) / mix_value(1.0 - pi1_0, 1.0 - pi1_1, r)
}

fn gamma_unchecked(law: &ObservedLaw, x: usize, p: f64) -> f64 {
    let rr = r_unchecked(law, x, p);
    law.pi(1, 1, x) / law.pi(0, 1, x) * mix(law, 0, x, rr) / mix(law, 1, x, rr)
}

fn gamma_ar_unchecked(law: &ObservedLaw, x: usize, p: f64) -> f64 {
    gamma_ar_value(law.pi1[0][x], law.pi1[1][x], r_unchecked(law, x, p))
}

/// Γ(x, p). Γ(x, 0) is the odds ratio OR(x).
pub fn gamma(law: &ObservedLaw, x: usize, p: f64) -> Result<f64> {
    let rr = r(law, x, p)?;
    let den = mix(law, 1, x, rr);
    if den <= 0.0 || mix(law, 0, x, rr) < 0.0 {
        return Err(Error::ZeroDenominator("gamma"));
    }
    Ok(gamma_unchecked(law, x, p))
}

/// Γ_AR(x, p), a difference of two probability ratios.
pub fn gamma_ar(law: &ObservedLaw, x: usize, p: f64) -> Result<f64> {
    let rr = r(law, x, p)?;
    if mix(law, 1, x, rr) <= 0.0 || mix(law, 0, x, rr) <= 0.0 {
        return Err(Error::ZeroDenominator("gamma_ar"));
    }
    Ok(gamma_ar_unchecked(law, x, p))
}

/// Right derivative of Γ(x, ·) at 0 under case-control sampling.
pub fn rare_disease_slope(law: &ObservedLaw, x: usize) -> Result<f64> {
    law.check_cell(x)?;
    if law.design != Design::CaseControl {
        return Err(Error::InvalidArgument(
            "rare-disease slope is defined for case-control laws".into(),
        ));
    }
    let (p11, p10, p01) = (law.pi(1, 1, x), law.pi(1, 0, x), law.pi(0, 1, x));
    Ok(p11 * (p10 - p11) / (p01 * p10 * p10) * law.fxy(1, x) / law.fxy(0, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssumptionSet {
    /// Overlap plus unconfoundedness.
    Ignorability,
    /// Monotone treatment response and monotone treatment selection.
    MtrMts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }
}

/// Sharp bounds on θ(x) given p0 ∈ [0, p̄].
pub fn bounds_rr(law: &ObservedLaw, x: usize, pbar: f64, set: AssumptionSet) -> Result<Interval> {
    let or = gamma(law, x, 0.0)?;
    Ok(match (set, law.design) {
        (AssumptionSet::MtrMts, _) => Interval { lo: 1.0, hi: or },
        (AssumptionSet::Ignorability, Design::CasePopulation) => Interval { lo: or, hi: or },
        (AssumptionSet::Ignorability, Design::CaseControl) => {
            let g = gamma(law, x, pbar)?;
            Interval {
                lo: or.min(g),
                hi: or.max(g),
            }
        }
    })
}

/// Default step of the p-grid used to locate the attributable-risk extrema.
pub const AR_SCAN_STEP: f64 = 1e-3;

/// Min and max of `f` over [0, pbar]: grid scan followed by golden-section
/// refinement in the bracket around each grid extremum.
pub fn scan_extrema(f: impl Fn(f64) -> f64, pbar: f64, step: f64) -> (f64, f64) {
    let m = ((pbar / step).ceil() as usize).max(1);
    let grid: Vec<f64> = (0..=m)
        .map(|i| (i as f64 * pbar / m as f64).min(pbar))
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&p| f(p)).collect();
    // sign=+1 locates the maximum, sign=-1 the minimum
    let refine = |sign: f64| {
        let (i, &best) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| (sign * a.1).total_cmp(&(sign * b.1)))
            .expect("nonempty grid");
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(m)];
        let refined = sign * golden_section(|p| sign * f(p), lo, hi, 60);
        if sign > 0.0 {
            best.max(refined)
        } else {
            best.min(refined)
        }
    };
    (refine(-1.0), refine(1.0))
}

/// Maximum of `f` on [a, b] by golden-section search (value returned).
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Bounds on θ_AR(x) given p0 ∈ [0, p̄].
pub fn bounds_ar(law: &ObservedLaw, x: usize, pbar: f64, set: AssumptionSet) -> Result<Interval> {
    if !(0.0..=1.0).contains(&pbar) {
        return Err(Error::InvalidArgument(format!(
            "pbar must lie in [0,1], got {pbar}"
        )));
    }
    // validates the denominators on the endpoints
    gamma_ar(law, x, 0.0)?;
    gamma_ar(law, x, pbar)?;
    if pbar == 0.0 {
        return Ok(Interval { lo: 0.0, hi: 0.0 });
    }
    let g0 = gamma_ar_unchecked(law, x, 0.0);
    let (lo, hi) = match law.design {
        Design::CaseControl => scan_extrema(
            |p| r_unchecked(law, x, p) * gamma_ar_unchecked(law, x, p),
            pbar,
            AR_SCAN_STEP,
        ),
        Design::CasePopulation => scan_extrema(|p| r_unchecked(law, x, p) * g0, pbar, AR_SCAN_STEP),
    };
    Ok(match set {
        AssumptionSet::MtrMts => Interval { lo: 0.0, hi },
        AssumptionSet::Ignorability => Interval { lo, hi },
    })
}

/// Constraints imposed when drawing a random population.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PopulationConstraints {
    /// Zero mass on Y*(0)=1, Y*(1)=0.
    pub mtr: bool,
    /// Enforced by per-cell rejection.
    pub mts: bool,
    /// Potential outcomes independent of T* within each cell.
    pub unconfounded: bool,
}

fn dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|a| *a /= s);
    v
}

/// Draws a random overlap-valid population with `n_cells` covariate cells.
/// Every admissible state receives positive mass.
pub fn random_population<R: Rng + ?Sized>(
    rng: &mut R,
    n_cells: usize,
    constraints: PopulationConstraints,
) -> DiscretePopulation {
    // states (y0, y1) allowed in each treatment arm
    let outcome_states: &[(usize, usize)] = if constraints.mtr {
        &[(0, 0), (0, 1), (1, 1)]
    } else {
        &[(0, 0), (0, 1), (1, 0), (1, 1)]
    };
    let px = dirichlet(rng, n_cells);
    let mut mass = vec![[0.0; 8]; n_cells];
    for x in 0..n_cells {
        let pt = 0.1 + 0.8 * rng.random::<f64>();
        loop {
            let q1 = dirichlet(rng, outcome_states.len());
            let q0 = if constraints.unconfounded {
                q1.clone()
            } else {
                dirichlet(rng, outcome_states.len())
            };
            if constraints.mts {
                let p_pot = |q: &[f64], s: usize| -> f64 {
                    outcome_states
                        .iter()
                        .zip(q)
                        .filter(|((y0, y1), _)| [*y0, *y1][s] == 1)
                        .map(|(_, m)| m)
                        .sum()
                };
                if (0..2).any(|s| p_pot(&q1, s) < p_pot(&q0, s)) {
                    continue;
                }
            }
            for (i, &(y0, y1)) in outcome_states.iter().enumerate() {
                mass[x][state(1, y0, y1)] = px[x] * pt * q1[i];
                mass[x][state(0, y0, y1)] = px[x] * (1.0 - pt) * q0[i];
            }
            break;
        }
    }
    // renormalise away rounding so the pmf sums to one within tolerance
    let total: f64 = mass.iter().flatten().sum();
    mass.iter_mut().flatten().for_each(|m| *m /= total);
    DiscretePopulation::new(mass).expect("generated population is valid")
}
