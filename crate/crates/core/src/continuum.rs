//! Continuous (large-N) approximation of the venue.
//!
//! A threshold strategy fixes who enters the lottery; the surviving mass sets
//! the effective review noise; the acceptance cutoff is the score level at
//! which the survive-and-accept mass equals the slot fraction `alpha` of all
//! original submissions. Everything is deterministic quadrature on the
//! quality grid.
//!
//! A unilateral deviation by one scientist is modelled as an atom of mass
//! `1/N` at the deviator's quality carrying its own participation. The atom
//! shifts both the surviving load (and therefore the noise) and the
//! composition of the reviewed pool.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::model::{survival_unchecked, ModelParams, ThresholdStrategy};
use crate::quadrature::QualityGrid;

const BISECTION_WIDTH: f64 = 1e-10;
const BISECTION_RESIDUAL: f64 = 1e-9;
const MIN_ACCEPTED_MASS: f64 = 1e-12;

/// How the acceptance cutoff responds to a single scientist's deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CutoffUnderDeviation {
    /// Re-solve the cutoff under the deviated population.
    #[default]
    Resolve,
    /// Keep the population cutoff; only noise and composition move.
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumSolution {
    pub cutoff_t: f64,
    pub w_bar: f64,
    pub sigma_eff: f64,
    pub q_bar: f64,
    /// Fewer survivors than slots: every survivor is accepted.
    pub accept_all_survivors: bool,
    /// Survive-and-accept mass at the solved cutoff.
    pub accepted_mass: f64,
}

impl ContinuumSolution {
    /// Acceptance probability of a paper of quality `q` that survived the lottery.
    pub fn acceptance_prob(&self, q: f64) -> f64 {
        if self.accept_all_survivors {
            1.0
        } else {
            survival_unchecked(self.cutoff_t, q.clamp(0.0, 1.0), self.sigma_eff)
        }
    }
}

/// One scientist at quality `q` playing `p_dev` instead of the population rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub q: f64,
    pub p_dev: f64,
}

/// Population description handed to the solver.
#[derive(Debug, Clone, Copy)]
struct Population {
    tau: f64,
    /// Change in surviving mass at a single quality, from a deviating atom.
    atom: Option<(f64, f64)>,
}

impl Population {
    fn survive_weight(&self, q: f64, lottery_rate: f64) -> f64 {
        if q <= self.tau {
            1.0 - lottery_rate
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumSolver {
    pub grid: QualityGrid,
    /// Snap thresholds to the nearest grid node before integrating.
    pub snap_threshold: bool,
    pub deviation_cutoff: CutoffUnderDeviation,
}

impl Default for ContinuumSolver {
    fn default() -> Self {
        ContinuumSolver {
            grid: QualityGrid::default(),
            snap_threshold: false,
            deviation_cutoff: CutoffUnderDeviation::Resolve,
        }
    }
}

impl ContinuumSolver {
    pub fn with_grid(nodes: usize) -> Self {
        ContinuumSolver { grid: QualityGrid::new(nodes), ..Default::default() }
    }

    fn effective_tau(&self, strategy: &ThresholdStrategy) -> f64 {
        if self.snap_threshold {
            self.grid.snap(strategy.tau)
        } else {
            strategy.tau
        }
    }

    fn population(
        &self,
        strategy: &ThresholdStrategy,
        params: &ModelParams,
        dev: Option<Deviation>,
    ) -> Result<Population> {
        let tau = self.effective_tau(strategy);
        let atom = match dev {
            None => None,
            Some(d) => {
                if !(0.0..=1.0).contains(&d.q) || !(0.0..=1.0).contains(&d.p_dev) {
                    return Err(param_err(format!("deviation ({}, {}) outside [0, 1]", d.q, d.p_dev)));
                }
                let p_own = if d.q <= tau { 1.0 } else { 0.0 };
                let delta = (p_own - d.p_dev) * params.lottery_rate / params.n_scientists as f64;
                if delta == 0.0 {
                    None
                } else {
                    Some((d.q, delta))
                }
            }
        };
        Ok(Population { tau, atom })
    }

    /// `w_bar = integral of (1 - L p(q)) f(q) dq`.
    pub fn aggregate_survival(&self, strategy: &ThresholdStrategy, params: &ModelParams) -> Result<f64> {
        params.validate()?;
        let pop = self.population(strategy, params, None)?;
        Ok(self.w_bar(&pop, params))
    }

    fn w_bar(&self, pop: &Population, params: &ModelParams) -> f64 {
        let f = params.quality_dist;
        let l = params.lottery_rate;
        let base =
            self.grid.integrate_density(&[pop.tau], f.endpoint_exponents(), |q| pop.survive_weight(q, l) * f.pdf(q));
        // A non-participating deviator under tau = 0 pushes this above 1.
        let atom = pop.atom.map_or(0.0, |(_, m)| m);
        (base + atom).max(0.0)
    }

    fn breakpoints(&self, pop: &Population, t: f64, sigma_eff: f64) -> Vec<f64> {
        let mut bps = vec![pop.tau, t];
        for k in [1.0, 2.0, 4.0, 8.0] {
            bps.push(t - k * sigma_eff);
            bps.push(t + k * sigma_eff);
        }
        bps
    }

    /// Survive-and-accept mass at cutoff `t`.
    fn accepted_mass(&self, pop: &Population, params: &ModelParams, t: f64, sigma_eff: f64) -> f64 {
        let f = params.quality_dist;
        let l = params.lottery_rate;
        let bps = self.breakpoints(pop, t, sigma_eff);
        let base = self.grid.integrate_density(&bps, f.endpoint_exponents(), |q| {
            pop.survive_weight(q, l) * f.pdf(q) * survival_unchecked(t, q, sigma_eff)
        });
        let atom = pop.atom.map_or(0.0, |(q0, m)| m * survival_unchecked(t, q0, sigma_eff));
        base + atom
    }

    fn solve_cutoff(&self, pop: &Population, params: &ModelParams, sigma_eff: f64) -> f64 {
        let g = |t: f64| self.accepted_mass(pop, params, t, sigma_eff) - params.alpha;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > BISECTION_WIDTH {
            let mid = 0.5 * (lo + hi);
            let r = g(mid);
            if r.abs() <= BISECTION_RESIDUAL {
                return mid;
            }
            if r > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn solve_population(
        &self,
        pop: &Population,
        params: &ModelParams,
        fixed_cutoff: Option<f64>,
    ) -> Result<ContinuumSolution> {
        let w_bar = self.w_bar(pop, params);
        let sigma_eff = params.sigma * w_bar.powf(params.beta);
        let accept_all = w_bar < params.alpha;
        let cutoff_t = if accept_all {
            0.0
        } else if let Some(t) = fixed_cutoff {
            t
        } else {
            self.solve_cutoff(pop, params, sigma_eff)
        };

        let f = params.quality_dist;
        let l = params.lottery_rate;
        let accept = |q: f64| if accept_all { 1.0 } else { survival_unchecked(cutoff_t, q, sigma_eff) };
        let bps = self.breakpoints(pop, cutoff_t, sigma_eff);
        let ends = f.endpoint_exponents();
        let mut num = self.grid.integrate_density(&bps, ends, |q| q * pop.survive_weight(q, l) * f.pdf(q) * accept(q));
        let mut den = self.grid.integrate_density(&bps, ends, |q| pop.survive_weight(q, l) * f.pdf(q) * accept(q));
        if let Some((q0, m)) = pop.atom {
            num += m * q0 * accept(q0);
            den += m * accept(q0);
        }
        if !(den > MIN_ACCEPTED_MASS) {
            return Err(Error::Resolution { mass: den });
        }
        Ok(ContinuumSolution {
            cutoff_t,
            w_bar,
            sigma_eff,
            q_bar: (num / den).clamp(0.0, 1.0),
            accept_all_survivors: accept_all,
            accepted_mass: den,
        })
    }

    /// Solves the venue under `strategy`: survival, noise, cutoff and mean accepted quality.
    pub fn acceptance_cutoff(&self, strategy: &ThresholdStrategy, params: &ModelParams) -> Result<ContinuumSolution> {
        params.validate()?;
        let pop = self.population(strategy, params, None)?;
        self.solve_population(&pop, params, None)
    }

    /// Solves the venue with one scientist deviating from `strategy`.
    pub fn solve_deviated(
        &self,
        strategy: &ThresholdStrategy,
        params: &ModelParams,
        dev: Deviation,
    ) -> Result<ContinuumSolution> {
        params.validate()?;
        let pop = self.population(strategy, params, Some(dev))?;
        if pop.atom.is_none() {
            return self.solve_population(&pop, params, None);
        }
        let fixed = match self.deviation_cutoff {
            CutoffUnderDeviation::Resolve => None,
            CutoffUnderDeviation::Hold => {
                let base = self.population(strategy, params, None)?;
                Some(self.solve_population(&base, params, None)?.cutoff_t)
            }
        };
        self.solve_population(&pop, params, fixed)
    }

    pub fn accepted_mean_quality(&self, strategy: &ThresholdStrategy, params: &ModelParams) -> Result<f64> {
        Ok(self.acceptance_cutoff(strategy, params)?.q_bar)
    }

    /// Utility of a scientist at quality `q` who plays `p_dev` while everyone
    /// else follows `strategy`.
    pub fn scientist_payoff(
        &self,
        q: f64,
        p_dev: f64,
        strategy: &ThresholdStrategy,
        params: &ModelParams,
    ) -> Result<f64> {
        let sol = self.solve_deviated(strategy, params, Deviation { q, p_dev })?;
        Ok(payoff_at(q, p_dev, &sol, params))
    }

    /// `U(p = 1) - U(p = 0)` for a scientist at quality `q`.
    pub fn participation_incentive(&self, q: f64, strategy: &ThresholdStrategy, params: &ModelParams) -> Result<f64> {
        Ok(self.scientist_payoff(q, 1.0, strategy, params)? - self.scientist_payoff(q, 0.0, strategy, params)?)
    }

    /// Journal payoff `q_bar - w_bar (1 + sigma)^-k` at baseline noise `sigma`.
    pub fn journal_payoff(&self, sigma: f64, strategy: &ThresholdStrategy, params: &ModelParams) -> Result<f64> {
        if !(sigma > 0.0) {
            return Err(param_err(format!("journal noise must be > 0, got {sigma}")));
        }
        let sol = self.acceptance_cutoff(strategy, &params.with_sigma(sigma))?;
        Ok(sol.q_bar - sol.w_bar * (1.0 + sigma).powf(-params.k))
    }
}

/// Scientist utility evaluated against an already solved (possibly deviated) venue.
pub fn payoff_at(q: f64, p: f64, sol: &ContinuumSolution, params: &ModelParams) -> f64 {
    let a = sol.acceptance_prob(q);
    let published = (1.0 - params.lottery_rate * p) * a;
    params.b * published * sol.q_bar + params.s * sol.q_bar - params.c * q * (1.0 - published)
}
