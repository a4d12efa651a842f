//! Numerical validation of the solvers against independent oracles:
//! grid refinement, finite-N simulation and brute-force re-solves.

use approx::assert_abs_diff_eq;

use review_lottery::continuum::Deviation;
use review_lottery::equilibrium::EquilibriumSolver;
use review_lottery::montecarlo::{replication_seed, Draws};
use review_lottery::{ContinuumSolver, ModelParams, MonteCarlo, ThresholdStrategy};

const SEED: u64 = 20240601;

/// Reference point: sigma 0.3, beta 8, L 0.1, alpha 0.1, c 0.1, b 1.
fn base(r: f64) -> ModelParams {
    ModelParams::default().with_ratio(r).unwrap()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn doubling_the_grid_barely_moves_q_bar() {
    let p = base(0.33);
    let tau = EquilibriumSolver::default().nash_threshold_fixed_sigma(&p, p.sigma).unwrap().tau_star;
    for st in [ThresholdStrategy::none(), ThresholdStrategy { tau }, ThresholdStrategy::full()] {
        let coarse = ContinuumSolver::with_grid(50).accepted_mean_quality(&st, &p).unwrap();
        let fine = ContinuumSolver::with_grid(100).accepted_mean_quality(&st, &p).unwrap();
        assert!((coarse - fine).abs() < 1e-4, "tau {}: {coarse} vs {fine}", st.tau);
    }
}

#[test]
fn cutoff_root_against_fine_quadrature() {
    let p = ModelParams { sigma: 0.3, ..Default::default() };
    let sol = ContinuumSolver::default().acceptance_cutoff(&ThresholdStrategy::none(), &p).unwrap();
    // Midpoint rule with 200k cells, independent of the solver's grid.
    let n = 200_000;
    let mass: f64 = (0..n)
        .map(|i| {
            let q = (i as f64 + 0.5) / n as f64;
            review_lottery::score_survival(sol.cutoff_t, q, 0.3).unwrap()
        })
        .sum::<f64>()
        / n as f64;
    assert_abs_diff_eq!(mass, 0.1, epsilon = 1e-6);
}

#[test]
fn quality_degrades_monotonically_with_noise() {
    let cs = ContinuumSolver::default();
    let q: Vec<f64> = (1..=12)
        .map(|i| {
            let p = ModelParams { sigma: 0.05 * i as f64, ..Default::default() };
            cs.accepted_mean_quality(&ThresholdStrategy::none(), &p).unwrap()
        })
        .collect();
    assert!(q.windows(2).all(|w| w[1] <= w[0]), "{q:?}");
}

#[test]
fn noiseless_mean_of_top_half() {
    let p = ModelParams { sigma: 1e-9, alpha: 0.5, ..Default::default() };
    let q = ContinuumSolver::default().accepted_mean_quality(&ThresholdStrategy::none(), &p).unwrap();
    assert_abs_diff_eq!(q, 0.75, epsilon = 1e-4);
}

#[test]
fn continuum_within_two_standard_errors_of_simulation() {
    // Finite-N simulation at N = 100, M = 5000 with no lottery.
    let p = ModelParams { sigma: 0.3, beta: 8.0, ..Default::default() };
    let st = ThresholdStrategy::none();
    let cont = ContinuumSolver::default().accepted_mean_quality(&st, &p).unwrap();
    let mc = MonteCarlo::default().simulate(&st, &p, 5_000, SEED).unwrap();
    let z = (mc.q_bar_mean - cont) / mc.q_bar_se;
    assert!(z.abs() <= 2.0, "continuum {cont:.6}, MC {:.6} +- {:.6}, z = {z:.2}", mc.q_bar_mean, mc.q_bar_se);
}

#[test]
fn payoff_is_linear_in_participation_under_full_resolve() {
    // q = 0.3, tau = 0.4, sigma 0.3, beta 8, L 0.1, N 100.
    let cs = ContinuumSolver::default();
    let p = base(0.33);
    let st = ThresholdStrategy { tau: 0.4 };
    let u = |pd: f64| cs.scientist_payoff(0.3, pd, &st, &p).unwrap();
    let secant = u(1.0) - u(0.0);
    let h = 1e-3;
    let local = (u(0.5 + h) - u(0.5 - h)) / (2.0 * h);
    assert!((local - secant).abs() <= 1e-4, "local {local:.3e} vs secant {secant:.3e}");
    assert_eq!(local.signum(), secant.signum());
}

#[test]
fn resolve_and_hold_agree_without_a_deviation() {
    use review_lottery::CutoffUnderDeviation;
    let p = base(0.33);
    let st = ThresholdStrategy { tau: 0.4 };
    let resolve = ContinuumSolver::default();
    let hold = ContinuumSolver { deviation_cutoff: CutoffUnderDeviation::Hold, ..Default::default() };
    let dev = Deviation { q: 0.3, p_dev: 1.0 };
    assert_eq!(resolve.solve_deviated(&st, &p, dev).unwrap(), hold.solve_deviated(&st, &p, dev).unwrap());
}

#[test]
fn common_random_numbers_reduce_variance() {
    let p = base(0.33);
    let mc = MonteCarlo::default();
    let st = ThresholdStrategy { tau: 0.4 };
    let m = 2_000;
    let draws: Vec<Draws> = (0..m as u64).map(|i| Draws::new(p.n_scientists, replication_seed(SEED, i))).collect();
    for q in [0.2, 0.5, 0.85] {
        let (_, paired) = mean_var(&mc.paired_incentives(q, &st, &p, &draws));
        let (_, unpaired) = mean_var(&mc.unpaired_incentives(q, &st, &p, m, SEED, SEED + 1));
        assert!(paired < unpaired, "q {q}: paired {paired:.3e} vs unpaired {unpaired:.3e}");
    }
}

#[test]
fn noiseless_selfish_authors_never_gain_from_entry() {
    // sigma -> 0, c = 0, r = 1: entry can only cost the paper its slot.
    let p = ModelParams { sigma: 1e-7, c: 0.0, s: 0.0, ..Default::default() };
    let mc = MonteCarlo::default();
    let draws: Vec<Draws> = (0..400u64).map(|i| Draws::new(p.n_scientists, replication_seed(SEED, i))).collect();
    for tau in [0.0, 0.5, 1.0] {
        let st = ThresholdStrategy { tau };
        for q in mc.grid.iter() {
            let worst = mc.paired_incentives(q, &st, &p, &draws).into_iter().fold(f64::NEG_INFINITY, f64::max);
            assert!(worst <= 0.0, "tau {tau}, q {q}: incentive {worst}");
        }
    }
}

#[test]
fn zero_survivor_replications_do_not_occur_at_reference_parameters() {
    let mc = MonteCarlo::default();
    for l in [0.1, 0.2] {
        let p = ModelParams { lottery_rate: l, ..Default::default() };
        let res = mc.simulate(&ThresholdStrategy::full(), &p, 5_000, SEED).unwrap();
        assert_eq!(res.undefined_replications, 0);
        // Survivors are Binomial(100, 1 - L).
        let expected = 100.0 * (1.0 - l);
        let se = (100.0 * l * (1.0 - l) / 5_000.0).sqrt();
        assert!((res.survivors_mean - expected).abs() <= 3.0 * se, "{} vs {expected}", res.survivors_mean);
    }
}

#[test]
fn joint_noise_shifts_when_the_lottery_cuts_review_load() {
    // k = 8: at k = 2 the journal sits at the top of its noise interval for both L.
    let solver = EquilibriumSolver::default();
    let p = ModelParams { k: 8.0, ..base(0.33) };
    let off = solver.joint_equilibrium(&ModelParams { lottery_rate: 0.0, ..p }).unwrap();
    let on = solver.joint_equilibrium(&p).unwrap();
    assert!(off.converged && on.converged);
    assert!((on.sigma_star - off.sigma_star).abs() > 1e-3, "{} vs {}", on.sigma_star, off.sigma_star);
    // The shift is the journal's best response to the lower surviving load.
    let cs = &solver.continuum;
    let st = ThresholdStrategy { tau: on.tau_star };
    let at_on = cs.journal_payoff(on.sigma_star, &st, &p).unwrap();
    let at_off = cs.journal_payoff(off.sigma_star, &st, &p).unwrap();
    assert!(at_on >= at_off - 1e-9);
}

#[test]
fn under_participation_across_noise_and_ratio() {
    let solver = EquilibriumSolver::default();
    let step = 1.0 / 49.0;
    for sigma in [0.2, 0.3, 0.4] {
        for r in [0.33, 0.5, 0.67] {
            let p = base(r).with_sigma(sigma);
            let planner = solver.planner_optimum(&p).unwrap();
            let nash = solver.nash_threshold_fixed_sigma(&p, sigma).unwrap();
            assert!(
                nash.tau_star <= planner.tau_star + step,
                "sigma {sigma} r {r}: {} vs {}",
                nash.tau_star,
                planner.tau_star
            );
        }
    }
}

#[test]
fn gain_fraction_falls_with_self_interest() {
    let solver = EquilibriumSolver::default();
    let mut prev = f64::INFINITY;
    for i in 1..=9 {
        let r = i as f64 / 10.0;
        let p = base(r);
        let none = solver.continuum.accepted_mean_quality(&ThresholdStrategy::none(), &p).unwrap();
        let planner = solver.planner_optimum(&p).unwrap().q_bar;
        let nash = solver.nash_threshold_fixed_sigma(&p, p.sigma).unwrap().q_bar;
        let frac = (nash - none) / (planner - none);
        assert!(frac <= prev + 0.02, "r {r}: {frac} after {prev}");
        prev = frac;
    }
}

#[test]
fn planner_threshold_above_nash_at_reference_point() {
    let solver = EquilibriumSolver::default();
    let p = base(0.33);
    let planner = solver.planner_optimum(&p).unwrap();
    let nash = solver.nash_threshold_fixed_sigma(&p, p.sigma).unwrap();
    assert!(planner.tau_star >= nash.tau_star);
    let thresholds: Vec<f64> =
        [0.67, 0.5, 0.33].iter().map(|&r| solver.nash_threshold_fixed_sigma(&base(r), 0.3).unwrap().tau_star).collect();
    assert!(thresholds.windows(2).all(|w| w[0] <= w[1]), "{thresholds:?}");
}
