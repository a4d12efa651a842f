//! Optimisers over threshold strategies: the planner's optimum, the
//! scientists' Nash threshold at fixed journal noise, the journal's best
//! response, and their joint fixed point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::{payoff_at, ContinuumSolution, ContinuumSolver, Deviation};
use crate::error::Result;
use crate::model::{ModelParams, ThresholdStrategy};
use crate::optimize::golden_max;

/// Payoff differences at or below this are indifference.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// A threshold is an equilibrium when no scientist gains more than this by deviating.
pub const NASH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Planner,
    NashFixedSigma,
    JointFixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ResponseOrder {
    #[default]
    ScientistsFirst,
    JournalFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub tau_star: f64,
    /// `tau_star` snapped to the quality grid.
    pub tau_grid: f64,
    pub sigma_star: f64,
    pub q_bar: f64,
    pub mode: Mode,
    pub converged: bool,
    /// Largest payoff gain available to a unilateral deviator at `tau_star`.
    pub deviation_gap: f64,
    pub iterations: usize,
    /// Every grid threshold that passed the deviation check.
    pub verified_thresholds: Vec<f64>,
    /// `(tau, sigma)` pairs visited by the joint iteration.
    pub trajectory: Vec<(f64, f64)>,
    /// Nobody enters the lottery (reported with `tau_star = 0`).
    pub empty_participation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JournalResponse {
    pub sigma_star: f64,
    pub payoff: f64,
    /// The coarse scan saw less than `1e-9` of variation.
    pub flat: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolver {
    pub continuum: ContinuumSolver,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub journal_scan: usize,
    pub journal_tol: f64,
    pub order: ResponseOrder,
    pub max_iterations: usize,
}

impl Default for EquilibriumSolver {
    fn default() -> Self {
        EquilibriumSolver {
            continuum: ContinuumSolver::default(),
            sigma_min: 0.01,
            sigma_max: 1.0,
            journal_scan: 32,
            journal_tol: 1e-5,
            order: ResponseOrder::ScientistsFirst,
            max_iterations: 100,
        }
    }
}

/// Per-quality incentives `U(1) - U(0)` at one candidate threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct IncentiveProfile {
    pub tau: f64,
    pub qualities: Vec<f64>,
    pub incentives: Vec<f64>,
}

impl IncentiveProfile {
    /// Largest gain from deviating away from the threshold rule.
    pub fn deviation_gap(&self) -> f64 {
        self.qualities
            .iter()
            .zip(&self.incentives)
            .map(|(&q, &d)| if q <= self.tau { (-d).max(0.0) } else { d.max(0.0) })
            .fold(0.0, f64::max)
    }

    pub fn best_responses(&self) -> Vec<bool> {
        self.qualities.iter().zip(&self.incentives).map(|(&q, &d)| resolve_response(d, q <= self.tau)).collect()
    }
}

fn resolve_response(incentive: f64, prescribed: bool) -> bool {
    if incentive.abs() <= TIE_TOLERANCE {
        prescribed
    } else {
        incentive > 0.0
    }
}

impl EquilibriumSolver {
    fn grid_thresholds(&self) -> Vec<f64> {
        self.continuum.grid.iter().collect()
    }

    fn q_bar(&self, tau: f64, params: &ModelParams) -> Result<f64> {
        self.continuum.accepted_mean_quality(&ThresholdStrategy { tau }, params)
    }

    /// Threshold maximising mean accepted quality: grid scan plus one
    /// golden-section refinement between the best node's neighbours.
    pub fn planner_optimum(&self, params: &ModelParams) -> Result<EquilibriumResult> {
        let taus = self.grid_thresholds();
        let values = taus.par_iter().map(|&tau| self.q_bar(tau, params)).collect::<Result<Vec<_>>>()?;
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Ties go to the smallest threshold.
        let i = values.iter().position(|&v| v >= best - 1e-12).unwrap_or(0);
        let mut tau_star = taus[i];
        let mut q_bar = values[i];

        let lo = taus[i.saturating_sub(1)];
        let hi = taus[(i + 1).min(taus.len() - 1)];
        let mut failure = None;
        let (x, v) = golden_max(
            |tau| match self.q_bar(tau, params) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            lo,
            hi,
            1e-6,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        if v > q_bar + 1e-12 {
            tau_star = x;
            q_bar = v;
        }
        let verified = vec![tau_star];
        Ok(EquilibriumResult {
            tau_star,
            tau_grid: self.continuum.grid.snap(tau_star),
            sigma_star: params.sigma,
            q_bar,
            mode: Mode::Planner,
            converged: true,
            deviation_gap: 0.0,
            iterations: 1,
            verified_thresholds: verified,
            trajectory: Vec::new(),
            empty_participation: false,
        })
    }

    /// Incentive of each grid quality to enter the lottery when everyone else plays `strategy`.
    pub fn incentive_profile(&self, strategy: &ThresholdStrategy, params: &ModelParams) -> Result<IncentiveProfile> {
        let base = self.continuum.acceptance_cutoff(strategy, params)?;
        let qualities: Vec<f64> = self.continuum.grid.iter().collect();
        let incentives = qualities
            .iter()
            .map(|&q| self.incentive_with_base(q, strategy, params, &base))
            .collect::<Result<Vec<_>>>()?;
        Ok(IncentiveProfile { tau: strategy.tau, qualities, incentives })
    }

    fn incentive_with_base(
        &self,
        q: f64,
        strategy: &ThresholdStrategy,
        params: &ModelParams,
        base: &ContinuumSolution,
    ) -> Result<f64> {
        let own = strategy.participation(q);
        let other = 1.0 - own;
        let dev = self.continuum.solve_deviated(strategy, params, Deviation { q, p_dev: other })?;
        let u_own = payoff_at(q, own, base, params);
        let u_other = payoff_at(q, other, &dev, params);
        Ok(if own == 1.0 { u_own - u_other } else { u_other - u_own })
    }

    /// All-or-nothing best response of a scientist at quality `q`.
    /// Indifference keeps the strategy's prescription.
    pub fn scientist_best_response(&self, q: f64, strategy: &ThresholdStrategy, params: &ModelParams) -> Result<bool> {
        let base = self.continuum.acceptance_cutoff(strategy, params)?;
        let d = self.incentive_with_base(q, strategy, params, &base)?;
        Ok(resolve_response(d, strategy.participation(q) == 1.0))
    }

    /// Scientist-side equilibrium at journal noise `sigma`.
    ///
    /// Candidates are the empty rule and every grid threshold; a candidate is
    /// verified when no grid scientist gains more than [`NASH_TOLERANCE`] by
    /// deviating. The largest verified grid threshold is then refined inside
    /// its grid cell to the quality at which the marginal scientist is
    /// indifferent, and kept only if it verifies on the grid as well.
    pub fn nash_threshold_fixed_sigma(&self, params: &ModelParams, sigma: f64) -> Result<EquilibriumResult> {
        let params = params.with_sigma(sigma);
        params.validate()?;
        let mut candidates = vec![ThresholdStrategy::none()];
        candidates.extend(self.grid_thresholds().into_iter().map(|tau| ThresholdStrategy { tau }));
        let gaps = candidates
            .par_iter()
            .map(|st| Ok(self.incentive_profile(st, &params)?.deviation_gap()))
            .collect::<Result<Vec<f64>>>()?;

        let verified: Vec<usize> = (0..candidates.len()).filter(|&i| gaps[i] <= NASH_TOLERANCE).collect();
        let (strategy, grid_tau, gap, converged) = match verified.last() {
            Some(&i) => {
                let (st, gap) = self.refine_nash(i.checked_sub(1).unwrap_or(usize::MAX), gaps[i], &params)?;
                (st, candidates[i].tau, gap, true)
            }
            None => {
                let (i, g) =
                    gaps.iter()
                        .copied()
                        .enumerate()
                        .fold((0, f64::INFINITY), |acc, (i, g)| if g < acc.1 { (i, g) } else { acc });
                (candidates[i], candidates[i].tau, g, false)
            }
        };
        let q_bar = self.q_bar(strategy.tau, &params)?;
        Ok(EquilibriumResult {
            tau_star: strategy.tau.max(0.0),
            tau_grid: grid_tau.max(0.0),
            sigma_star: sigma,
            q_bar,
            mode: Mode::NashFixedSigma,
            converged,
            deviation_gap: gap,
            iterations: candidates.len(),
            verified_thresholds: verified.iter().map(|&i| candidates[i].tau.max(0.0)).collect(),
            trajectory: Vec::new(),
            empty_participation: strategy.is_empty(),
        })
    }

    /// Marginal incentive `U(1) - U(0)` of the scientist sitting exactly at the threshold.
    fn marginal_incentive(&self, tau: f64, params: &ModelParams) -> Result<f64> {
        let st = ThresholdStrategy { tau };
        let base = self.continuum.acceptance_cutoff(&st, params)?;
        self.incentive_with_base(tau, &st, params, &base)
    }

    /// Refines grid threshold `index` (an index into the grid, or `usize::MAX`
    /// for the empty rule) towards the next grid node.
    fn refine_nash(&self, index: usize, grid_gap: f64, params: &ModelParams) -> Result<(ThresholdStrategy, f64)> {
        let grid = self.continuum.grid;
        if index == usize::MAX {
            return Ok((ThresholdStrategy::none(), grid_gap));
        }
        let fallback = (ThresholdStrategy { tau: grid.node(index) }, grid_gap);
        if index + 1 >= grid.nodes() {
            return Ok(fallback);
        }
        let (mut lo, mut hi) = (grid.node(index), grid.node(index + 1));
        // The node just above stays out of the lottery for any threshold in [lo, hi).
        let top = hi - 1e-9 * (hi - lo);
        if self.marginal_incentive(lo, params)? <= 0.0 {
            return Ok(fallback);
        }
        if self.marginal_incentive(top, params)? > 0.0 {
            lo = top;
        } else {
            while hi - lo > 1e-7 {
                let mid = 0.5 * (lo + hi);
                if self.marginal_incentive(mid, params)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let refined = ThresholdStrategy { tau: lo };
        let gap = self.incentive_profile(&refined, params)?.deviation_gap();
        if gap <= NASH_TOLERANCE {
            Ok((refined, gap))
        } else {
            Ok(fallback)
        }
    }

    /// Journal noise maximising its payoff against `strategy`.
    pub fn journal_best_response(&self, strategy: &ThresholdStrategy, params: &ModelParams) -> Result<JournalResponse> {
        let n = self.journal_scan.max(2);
        let step = (self.sigma_max - self.sigma_min) / (n - 1) as f64;
        let sigmas: Vec<f64> = (0..n).map(|i| self.sigma_min + i as f64 * step).collect();
        let values = sigmas
            .par_iter()
            .map(|&s| self.continuum.journal_payoff(s, strategy, params))
            .collect::<Result<Vec<_>>>()?;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let i = values.iter().position(|&v| v == max).unwrap_or(0);
        let lo = sigmas[i.saturating_sub(1)];
        let hi = sigmas[(i + 1).min(n - 1)];
        let mut failure = None;
        let (x, v) = golden_max(
            |s| match self.continuum.journal_payoff(s, strategy, params) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            lo,
            hi,
            self.journal_tol,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let (sigma_star, payoff) = if v >= max { (x, v) } else { (sigmas[i], max) };
        Ok(JournalResponse { sigma_star, payoff, flat: max - min < 1e-9 })
    }

    /// Alternating best response between scientists and the journal.
    ///
    /// Stops once the threshold repeats and the journal's noise moves by less
    /// than `1e-4`; the reported noise is the one the threshold was verified at.
    pub fn joint_equilibrium(&self, params: &ModelParams) -> Result<EquilibriumResult> {
        params.validate()?;
        let mut sigma = params.sigma;
        if self.order == ResponseOrder::JournalFirst {
            sigma = self.journal_best_response(&ThresholdStrategy::none(), params)?.sigma_star;
        }
        let mut trajectory = Vec::new();
        let mut prev_tau: Option<f64> = None;
        let mut last = None;
        for it in 1..=self.max_iterations {
            let nash = self.nash_threshold_fixed_sigma(params, sigma)?;
            let strategy = if nash.empty_participation {
                ThresholdStrategy::none()
            } else {
                ThresholdStrategy { tau: nash.tau_star }
            };
            let next_sigma = self.journal_best_response(&strategy, params)?.sigma_star;
            trajectory.push((nash.tau_star, next_sigma));
            if prev_tau == Some(strategy.tau) && (next_sigma - sigma).abs() < 1e-4 {
                return Ok(EquilibriumResult { mode: Mode::JointFixedPoint, iterations: it, trajectory, ..nash });
            }
            prev_tau = Some(strategy.tau);
            sigma = next_sigma;
            last = Some(nash);
        }
        let nash = last.expect("at least one iteration");
        Ok(EquilibriumResult {
            mode: Mode::JointFixedPoint,
            converged: false,
            iterations: self.max_iterations,
            trajectory,
            ..nash
        })
    }
}
