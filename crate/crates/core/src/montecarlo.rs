//! Finite-N simulation of the venue.
//!
//! Every replication owns a fixed block of uniforms drawn from a generator
//! seeded by `(base_seed, replication index)`: one quality, one lottery and
//! one score uniform per scientist, followed by a tie-breaking permutation.
//! The layout does not depend on who participates, so two strategies run on
//! the same seed share all of their randomness.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::ContinuumSolver;
use crate::equilibrium::EquilibriumSolver;
use crate::error::{param_err, Result};
use crate::model::{score_from_uniform, ModelParams, ThresholdStrategy};
use crate::quadrature::QualityGrid;

/// Seed of replication `index` under `base_seed` (SplitMix64 over a counter).
pub fn replication_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Slots filled per replication: `round(alpha * N)`, half away from zero.
pub fn slot_count(alpha: f64, n: usize) -> usize {
    (alpha * n as f64).round() as usize
}

/// The random inputs of one replication.
#[derive(Debug, Clone)]
pub struct Draws {
    pub quality_u: Vec<f64>,
    pub lottery_u: Vec<f64>,
    pub score_u: Vec<f64>,
    pub order: Vec<usize>,
}

impl Draws {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let block = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
        let quality_u = block(&mut rng);
        let lottery_u = block(&mut rng);
        let score_u = block(&mut rng);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Draws { quality_u, lottery_u, score_u, order }
    }
}

/// A scientist at a fixed quality playing a fixed participation, placed at index 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Focal {
    pub q: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub accepted_qualities: Vec<f64>,
    /// Mean accepted quality; `None` when nobody survived the lottery.
    pub q_bar: Option<f64>,
    pub survivors: usize,
    pub sigma_eff: f64,
    pub focal_accepted: bool,
}

/// Plays out one replication from its draws.
pub fn play(draws: &Draws, strategy: &ThresholdStrategy, params: &ModelParams, focal: Option<Focal>) -> Replication {
    let n = draws.quality_u.len();
    let dist = params.quality_dist;
    let mut quality = Vec::with_capacity(n);
    let mut survived = Vec::with_capacity(n);
    for i in 0..n {
        let (q, p) = match focal {
            Some(f) if i == 0 => (f.q, f.p),
            _ => {
                let q = dist.quantile(draws.quality_u[i]);
                (q, strategy.participation(q))
            }
        };
        quality.push(q);
        survived.push(draws.lottery_u[i] >= params.lottery_rate * p);
    }
    let survivors = survived.iter().filter(|&&s| s).count();
    let sigma_eff = params.sigma * (survivors as f64 / n as f64).powf(params.beta);

    let mut pool: Vec<(usize, f64)> = draws
        .order
        .iter()
        .filter(|&&i| survived[i])
        .map(|&i| (i, score_from_uniform(quality[i], sigma_eff, draws.score_u[i])))
        .collect();
    // Stable sort keeps the shuffled order among equal scores.
    pool.sort_by(|a, b| b.1.total_cmp(&a.1));
    let k = slot_count(params.alpha, n).min(pool.len());
    let accepted = &pool[..k];
    let accepted_qualities: Vec<f64> = accepted.iter().map(|&(i, _)| quality[i]).collect();
    let q_bar = if k == 0 { None } else { Some(accepted_qualities.iter().sum::<f64>() / k as f64) };
    Replication {
        focal_accepted: focal.is_some() && accepted.iter().any(|&(i, _)| i == 0),
        accepted_qualities,
        q_bar,
        survivors,
        sigma_eff,
    }
}

/// Aggregate of many replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCResult {
    pub q_bar_mean: f64,
    pub q_bar_se: f64,
    pub replications: usize,
    pub seed: u64,
    pub accepted_per_rep: Vec<usize>,
    pub survivors_mean: f64,
    /// Replications with no survivors, excluded from the mean.
    pub undefined_replications: usize,
}

/// Result of the simulated best-response iteration on the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEquilibrium {
    pub tau_hat: f64,
    pub start_tau: f64,
    pub converged: bool,
    pub visited: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub grid: QualityGrid,
    pub max_iterations: usize,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo { grid: QualityGrid::default(), max_iterations: 20 }
    }
}

impl MonteCarlo {
    pub fn simulate_once(&self, strategy: &ThresholdStrategy, params: &ModelParams, seed: u64) -> Result<Replication> {
        params.validate()?;
        Ok(play(&Draws::new(params.n_scientists, seed), strategy, params, None))
    }

    /// Runs `m` replications with seeds derived from `base_seed`. Results do
    /// not depend on how the replications are scheduled.
    pub fn simulate(
        &self,
        strategy: &ThresholdStrategy,
        params: &ModelParams,
        m: usize,
        base_seed: u64,
    ) -> Result<MCResult> {
        params.validate()?;
        if m == 0 {
            return Err(param_err("replication count must be >= 1"));
        }
        let reps: Vec<Replication> = (0..m as u64)
            .into_par_iter()
            .map(|i| play(&Draws::new(params.n_scientists, replication_seed(base_seed, i)), strategy, params, None))
            .collect();

        let defined: Vec<f64> = reps.iter().filter_map(|r| r.q_bar).collect();
        let count = defined.len();
        let mean = if count > 0 { defined.iter().sum::<f64>() / count as f64 } else { f64::NAN };
        let se = if count > 1 {
            let var = defined.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            f64::NAN
        };
        Ok(MCResult {
            q_bar_mean: mean,
            q_bar_se: se,
            replications: m,
            seed: base_seed,
            accepted_per_rep: reps.iter().map(|r| r.accepted_qualities.len()).collect(),
            survivors_mean: reps.iter().map(|r| r.survivors as f64).sum::<f64>() / m as f64,
            undefined_replications: m - count,
        })
    }

    /// Per-replication payoff differences `U(p=1) - U(p=0)` of a focal
    /// scientist at quality `q`, both worlds run on the same draws.
    pub fn paired_incentives(
        &self,
        q: f64,
        strategy: &ThresholdStrategy,
        params: &ModelParams,
        draws: &[Draws],
    ) -> Vec<f64> {
        draws
            .iter()
            .map(|d| {
                // The worlds only differ when the focal paper loses the lottery.
                if d.lottery_u[0] >= params.lottery_rate {
                    return 0.0;
                }
                let enter = play(d, strategy, params, Some(Focal { q, p: 1.0 }));
                let stay = play(d, strategy, params, Some(Focal { q, p: 0.0 }));
                realized_payoff(q, &enter, params) - realized_payoff(q, &stay, params)
            })
            .collect()
    }

    /// Same estimator with the two worlds on independent seeds.
    pub fn unpaired_incentives(
        &self,
        q: f64,
        strategy: &ThresholdStrategy,
        params: &ModelParams,
        m: usize,
        seed_enter: u64,
        seed_stay: u64,
    ) -> Vec<f64> {
        let n = params.n_scientists;
        (0..m as u64)
            .map(|i| {
                let enter =
                    play(&Draws::new(n, replication_seed(seed_enter, i)), strategy, params, Some(Focal { q, p: 1.0 }));
                let stay =
                    play(&Draws::new(n, replication_seed(seed_stay, i)), strategy, params, Some(Focal { q, p: 0.0 }));
                realized_payoff(q, &enter, params) - realized_payoff(q, &stay, params)
            })
            .collect()
    }

    /// Simulated best-response iteration on the threshold, started from the
    /// continuum Nash threshold at `sigma_fixed`.
    ///
    /// Each round estimates the entry incentive of a scientist at every grid
    /// quality (paired replications, common random numbers) and moves the
    /// threshold to the grid point maximising the cumulative incentive, i.e.
    /// the indifference point of the estimated incentive curve.
    pub fn mc_equilibrium_threshold(
        &self,
        params: &ModelParams,
        sigma_fixed: f64,
        m: usize,
        base_seed: u64,
    ) -> Result<McEquilibrium> {
        let params = params.with_sigma(sigma_fixed);
        params.validate()?;
        if m == 0 {
            return Err(param_err("replication count must be >= 1"));
        }
        let solver = EquilibriumSolver {
            continuum: ContinuumSolver { grid: self.grid, ..Default::default() },
            ..Default::default()
        };
        let start_tau = solver.nash_threshold_fixed_sigma(&params, sigma_fixed)?.tau_star;

        let draws: Vec<Draws> = (0..m as u64)
            .into_par_iter()
            .map(|i| Draws::new(params.n_scientists, replication_seed(base_seed, i)))
            .collect();
        let qualities: Vec<f64> = self.grid.iter().collect();

        let mut tau = start_tau;
        let mut visited = vec![tau];
        for it in 1..=self.max_iterations {
            let strategy = ThresholdStrategy { tau };
            let means: Vec<f64> = qualities
                .par_iter()
                .map(|&q| {
                    let d = self.paired_incentives(q, &strategy, &params, &draws);
                    d.iter().sum::<f64>() / m as f64
                })
                .collect();
            let next = qualities[argmax_cumulative(&means)];
            let moved = self.grid.nearest_index(next) != self.grid.nearest_index(tau);
            visited.push(next);
            tau = next;
            if !moved {
                return Ok(McEquilibrium { tau_hat: tau, start_tau, converged: true, visited, iterations: it });
            }
        }
        Ok(McEquilibrium { tau_hat: tau, start_tau, converged: false, visited, iterations: self.max_iterations })
    }
}

/// Index `j` maximising `sum(incentives[..=j])`; ties go to the larger index.
fn argmax_cumulative(incentives: &[f64]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    let mut acc = 0.0;
    for (j, d) in incentives.iter().enumerate() {
        acc += d;
        if acc >= best.1 {
            best = (j, acc);
        }
    }
    best.0
}

/// Realised utility of the focal scientist in one replication.
pub fn realized_payoff(q: f64, rep: &Replication, params: &ModelParams) -> f64 {
    let q_bar = rep.q_bar.unwrap_or(0.0);
    let published = if rep.focal_accepted { 1.0 } else { 0.0 };
    params.b * published * q_bar + params.s * q_bar - params.c * q * (1.0 - published)
}
