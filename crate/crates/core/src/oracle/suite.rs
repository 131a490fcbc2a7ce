//! Identity and containment checks over many finite populations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    bounds_ar, bounds_rr, check_assumptions, gamma, project, r, random_population, theta, theta_ar,
    AssumptionSet, DiscretePopulation, PopulationConstraints,
};
use crate::data::Design;
use crate::error::Result;
use crate::rng::{tag, RngSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub max_error: f64,
    /// Population file contents and cell of the first failure.
    pub counterexample: Option<String>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            max_error: 0.0,
            counterexample: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    /// Records |a − b| on a relative scale.
    fn equal(&mut self, a: f64, b: f64, tol: f64, pop: &DiscretePopulation, x: usize) {
        let err = (a - b).abs() / 1f64.max(a.abs()).max(b.abs());
        self.record(err <= tol && err.is_finite(), err, pop, x);
    }

    /// Records a ≤ b up to `tol`; the error is the size of any excess.
    fn at_most(&mut self, a: f64, b: f64, tol: f64, pop: &DiscretePopulation, x: usize) {
        let excess = (a - b).max(0.0) / 1f64.max(b.abs());
        self.record(excess <= tol, excess, pop, x);
    }

    fn record(&mut self, ok: bool, err: f64, pop: &DiscretePopulation, x: usize) {
        self.cases += 1;
        if err.is_finite() {
            self.max_error = self.max_error.max(err);
        }
        if !ok {
            self.failures += 1;
            if self.counterexample.is_none() {
                let mut buf = Vec::new();
                let dump = pop
                    .write_csv(&mut buf)
                    .map(|_| String::from_utf8_lossy(&buf).into_owned())
                    .unwrap_or_default();
                self.counterexample = Some(format!("cell {x}\n{dump}"));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub populations: usize,
    pub cells: usize,
    pub h0: f64,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            populations: 200,
            cells: 3,
            h0: 0.5,
            seed: 0,
            tol: 1e-10,
        }
    }
}

/// Named checks in report order.
pub const CHECKS: [&str; 10] = [
    "lemma_r_at_p0",
    "lemma_gamma_is_prospective_rr",
    "bayes_odds_ratio_invariance",
    "lemma_gamma_ordering_mtr_mts",
    "theorem_rr_containment_mtr_mts",
    "theorem_ar_containment_mtr_mts",
    "theorem_point_identification_unconfounded",
    "theorem_rr_interval_unconfounded_mtr",
    "aggregation_identity",
    "rare_disease_sharpness",
];

fn slot<'a>(results: &'a mut [CheckResult], name: &str) -> &'a mut CheckResult {
    results
        .iter_mut()
        .find(|c| c.name == name)
        .expect("known check name")
}

fn fresh() -> Vec<CheckResult> {
    CHECKS.iter().map(|&n| CheckResult::new(n)).collect()
}

/// Identities that hold for every overlap-valid population.
fn exact_identities(
    pop: &DiscretePopulation,
    h0: f64,
    tol: f64,
    out: &mut [CheckResult],
) -> Result<()> {
    let p0 = pop.p0();
    let d1 = project(pop, Design::CaseControl, h0)?;
    let d2 = project(pop, Design::CasePopulation, h0)?;
    for x in 0..pop.n_cells() {
        let truth = pop.prob_case(x);
        slot(out, "lemma_r_at_p0").equal(r(&d1, x, p0)?, truth, tol, pop, x);
        slot(out, "lemma_r_at_p0").equal(r(&d2, x, p0)?, truth, tol, pop, x);
        let rr = pop.prob_case_given_t(1, x) / pop.prob_case_given_t(0, x);
        slot(out, "lemma_gamma_is_prospective_rr").equal(gamma(&d1, x, p0)?, rr, tol, pop, x);
        slot(out, "lemma_gamma_is_prospective_rr").equal(gamma(&d2, x, 0.0)?, rr, tol, pop, x);
        slot(out, "bayes_odds_ratio_invariance").equal(
            pop.prospective_odds_ratio(x),
            gamma(&d1, x, 0.0)?,
            tol,
            pop,
            x,
        );
    }
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for x in 0..pop.n_cells() {
        e1 += pop.px(x) * gamma(&d1, x, 0.0)?.ln();
        e2 += pop.px(x) * gamma(&d2, x, 0.0)?.ln();
    }
    let agg = slot(out, "aggregation_identity");
    agg.equal(e1, (1.0 - p0) * d1.beta(0) + p0 * d1.beta(1), tol, pop, 0);
    agg.equal(e2, d2.beta(0), tol, pop, 0);
    Ok(())
}

/// Containments implied by MTR and MTS. Run unconditionally so a population
/// violating the premises shows up as a failure.
fn mtr_mts_checks(
    pop: &DiscretePopulation,
    h0: f64,
    tol: f64,
    out: &mut [CheckResult],
) -> Result<()> {
    let p0 = pop.p0();
    for design in [Design::CaseControl, Design::CasePopulation] {
        let law = project(pop, design, h0)?;
        for x in 0..pop.n_cells() {
            let th = theta(pop, x)?;
            let b = bounds_rr(&law, x, p0, AssumptionSet::MtrMts)?;
            let c = slot(out, "theorem_rr_containment_mtr_mts");
            c.at_most(b.lo, th, tol, pop, x);
            c.at_most(th, b.hi, tol, pop, x);
            let ta = theta_ar(pop, x)?;
            let b = bounds_ar(&law, x, p0, AssumptionSet::MtrMts)?;
            let c = slot(out, "theorem_ar_containment_mtr_mts");
            c.at_most(b.lo, ta, tol, pop, x);
            c.at_most(ta, b.hi, tol, pop, x);
            if design == Design::CaseControl {
                slot(out, "lemma_gamma_ordering_mtr_mts").at_most(
                    gamma(&law, x, p0)?,
                    gamma(&law, x, 0.0)?,
                    tol,
                    pop,
                    x,
                );
            }
        }
    }
    Ok(())
}

fn unconfounded_checks(
    pop: &DiscretePopulation,
    h0: f64,
    tol: f64,
    out: &mut [CheckResult],
) -> Result<()> {
    let p0 = pop.p0();
    let d1 = project(pop, Design::CaseControl, h0)?;
    let d2 = project(pop, Design::CasePopulation, h0)?;
    for x in 0..pop.n_cells() {
        let th = theta(pop, x)?;
        let c = slot(out, "theorem_point_identification_unconfounded");
        c.equal(gamma(&d1, x, p0)?, th, tol, pop, x);
        c.equal(gamma(&d2, x, 0.0)?, th, tol, pop, x);
        let pts = bounds_rr(&d2, x, 1.0, AssumptionSet::Ignorability)?;
        c.equal(pts.lo, th, tol, pop, x);
        c.equal(pts.hi, th, tol, pop, x);
        let c = slot(out, "theorem_rr_interval_unconfounded_mtr");
        for pbar in [p0, (2.0 * p0).min(1.0), 1.0] {
            let b = bounds_rr(&d1, x, pbar, AssumptionSet::Ignorability)?;
            c.at_most(b.lo, th, tol, pop, x);
            c.at_most(th, b.hi, tol, pop, x);
            c.at_most(gamma(&d1, x, pbar)?, th, tol, pop, x);
        }
    }
    Ok(())
}

/// Unconfounded MTR population with cell risks c·a_x (untreated) and c·b_x
/// (treated), c chosen so that Pr(Y*=1) = `p0`.
pub fn rare_population(
    px: &[f64],
    pt: &[f64],
    a: &[f64],
    b: &[f64],
    p0: f64,
) -> Result<DiscretePopulation> {
    let base: f64 = (0..px.len())
        .map(|x| px[x] * (pt[x] * b[x] + (1.0 - pt[x]) * a[x]))
        .sum();
    let c = p0 / base;
    let mut mass = vec![[0.0; 8]; px.len()];
    for x in 0..px.len() {
        for (t, share) in [(0usize, 1.0 - pt[x]), (1, pt[x])] {
            let m = px[x] * share;
            mass[x][t * 4] = m * (1.0 - c * b[x]);
            mass[x][t * 4 + 1] = m * c * (b[x] - a[x]);
            mass[x][t * 4 + 3] = m * c * a[x];
        }
    }
    let total: f64 = mass.iter().flatten().sum();
    mass.iter_mut().flatten().for_each(|v| *v /= total);
    DiscretePopulation::new(mass)
}

fn sharpness_check<R: Rng>(
    rng: &mut R,
    cells: usize,
    h0: f64,
    out: &mut [CheckResult],
) -> Result<()> {
    let px: Vec<f64> = (0..cells).map(|_| rng.random::<f64>() + 0.1).collect();
    let s: f64 = px.iter().sum();
    let px: Vec<f64> = px.iter().map(|v| v / s).collect();
    let pt: Vec<f64> = (0..cells)
        .map(|_| 0.1 + 0.8 * rng.random::<f64>())
        .collect();
    let a: Vec<f64> = (0..cells).map(|_| 0.2 + rng.random::<f64>()).collect();
    let b: Vec<f64> = a
        .iter()
        .map(|v| v * (1.0 + 2.0 * rng.random::<f64>()))
        .collect();
    let mut prev = vec![f64::INFINITY; cells];
    for p0 in [0.1, 0.01, 0.001] {
        let pop = rare_population(&px, &pt, &a, &b, p0)?;
        let law = project(&pop, Design::CaseControl, h0)?;
        for (x, last) in prev.iter_mut().enumerate() {
            let gap = 1.0 - theta(&pop, x)? / gamma(&law, x, 0.0)?;
            // the gap must shrink monotonically towards zero
            let cap = if p0 < 0.005 { 0.05 } else { *last };
            slot(out, "rare_disease_sharpness").at_most(gap, cap, 0.0, &pop, x);
            *last = gap;
        }
    }
    Ok(())
}

/// Runs every check on `cfg.populations` seeded random populations per family.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    let spec = RngSpec::new(cfg.seed);
    let mut out = fresh();
    for i in 0..cfg.populations as u64 {
        let mut rng = spec.stream(tag::POPULATION, i);
        let general = random_population(&mut rng, cfg.cells, PopulationConstraints::default());
        exact_identities(&general, cfg.h0, cfg.tol, &mut out)?;
        let mono = random_population(
            &mut rng,
            cfg.cells,
            PopulationConstraints {
                mtr: true,
                mts: true,
                unconfounded: false,
            },
        );
        exact_identities(&mono, cfg.h0, cfg.tol, &mut out)?;
        mtr_mts_checks(&mono, cfg.h0, cfg.tol, &mut out)?;
        let ign = random_population(
            &mut rng,
            cfg.cells,
            PopulationConstraints {
                mtr: true,
                mts: true,
                unconfounded: true,
            },
        );
        unconfounded_checks(&ign, cfg.h0, cfg.tol, &mut out)?;
        let mut local = ChaCha8Rng::seed_from_u64(rng.random());
        sharpness_check(&mut local, cfg.cells, cfg.h0, &mut out)?;
    }
    Ok(out)
}

/// Checks one user-supplied population. Premise-dependent checks are run
/// only when `check_assumptions` confirms their premises, except the
/// MTR+MTS containments, which are always evaluated.
pub fn check_population(pop: &DiscretePopulation, h0: f64, tol: f64) -> Result<Vec<CheckResult>> {
    let rep = check_assumptions(pop);
    let mut out = fresh();
    exact_identities(pop, h0, tol, &mut out)?;
    mtr_mts_checks(pop, h0, tol, &mut out)?;
    if rep.unconfounded && rep.mtr {
        unconfounded_checks(pop, h0, tol, &mut out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_random_populations() {
        let res = run_suite(&SuiteConfig {
            populations: 40,
            ..Default::default()
        })
        .unwrap();
        for c in &res {
            assert!(c.passed(), "{} failed: {:?}", c.name, c.counterexample);
            assert!(c.cases > 0, "{} never ran", c.name);
        }
    }

    /// MTR holds but treated units have lower baseline risk, so the odds
    /// ratio understates the causal relative risk.
    fn negative_selection() -> DiscretePopulation {
        let mut m = [0.0; 8];
        // untreated: risk 0.5 under no treatment, 0.9 under treatment
        m[0] = 0.5 * 0.1;
        m[1] = 0.5 * 0.4;
        m[3] = 0.5 * 0.5;
        // treated: risk 0.05 untreated, 0.1 treated
        m[4] = 0.5 * 0.9;
        m[5] = 0.5 * 0.05;
        m[7] = 0.5 * 0.05;
        DiscretePopulation::new(vec![m]).unwrap()
    }

    #[test]
    fn mts_violation_is_reported() {
        let pop = negative_selection();
        let rep = check_assumptions(&pop);
        assert!(rep.mtr && !rep.mts);
        let res = check_population(&pop, 0.5, 1e-10).unwrap();
        let c = res
            .iter()
            .find(|c| c.name == "theorem_rr_containment_mtr_mts")
            .unwrap();
        assert!(!c.passed());
        assert!(c
            .counterexample
            .as_ref()
            .unwrap()
            .contains("x,t,y0,y1,mass"));
        let bayes = res
            .iter()
            .find(|c| c.name == "bayes_odds_ratio_invariance")
            .unwrap();
        assert!(bayes.passed());
    }

    #[test]
    fn rare_population_hits_target_case_share() {
        let pop =
            rare_population(&[0.4, 0.6], &[0.3, 0.7], &[1.0, 0.5], &[2.0, 1.5], 0.01).unwrap();
        assert!((pop.p0() - 0.01).abs() < 1e-12);
        let rep = check_assumptions(&pop);
        assert!(rep.mtr && rep.unconfounded);
    }
}
