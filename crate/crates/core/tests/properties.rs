use proptest::prelude::*;

use review_lottery::continuum::Deviation;
use review_lottery::equilibrium::{EquilibriumSolver, NASH_TOLERANCE};
use review_lottery::experiments::output::{fmt_num, round12};
use review_lottery::experiments::{parse_config, parse_override, Experiment, ExperimentConfig};
use review_lottery::{
    effective_noise, score_survival, survival_prob, ContinuumSolver, ModelParams, MonteCarlo, QualityDistribution,
    ThresholdStrategy,
};

fn params() -> impl Strategy<Value = ModelParams> {
    (
        0.02..0.8f64,
        0.0..12.0f64,
        0.03..0.5f64,
        0.0..0.5f64,
        prop_oneof![Just(None), Just(Some((2.0, 2.0))), Just(Some((0.7, 1.3)))],
    )
        .prop_map(|(sigma, beta, alpha, lottery_rate, shape)| ModelParams {
            sigma,
            beta,
            alpha,
            lottery_rate,
            quality_dist: match shape {
                None => QualityDistribution::Uniform01,
                Some((a, b_shape)) => QualityDistribution::Beta { a, b_shape },
            },
            ..Default::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_survival_is_a_monotone_probability(t in 0.0..1.0f64, q1 in 0.0..1.0f64, q2 in 0.0..1.0f64, s in 1e-4..3.0f64, dt in 0.0..0.5f64) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let a = score_survival(t, lo, s).unwrap();
        let b = score_survival(t, hi, s).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(a <= b + 1e-12);
        prop_assert!(score_survival((t + dt).min(1.0), hi, s).unwrap() <= b + 1e-12);
    }

    #[test]
    fn noise_law_is_exact_under_full_adoption(sigma in 0.01..1.0f64, beta in 0.0..12.0f64, l in 0.0..0.6f64) {
        let p = ModelParams { sigma, beta, lottery_rate: l, alpha: 0.05, ..Default::default() };
        let sol = ContinuumSolver::default().acceptance_cutoff(&ThresholdStrategy::full(), &p).unwrap();
        let expected = sigma * (1.0 - l).powf(beta);
        prop_assert!((sol.sigma_eff - expected).abs() <= 1e-12 * expected.max(1e-300) + 1e-15);
        prop_assert!((effective_noise(sigma, 1.0 - l, beta).unwrap() - expected).abs() <= 1e-15);
        prop_assert!((survival_prob(1.0, l).unwrap() - (1.0 - l)).abs() == 0.0);
    }

    #[test]
    fn accepted_mass_is_conserved(p in params(), tau in 0.0..1.0f64) {
        let sol = ContinuumSolver::default().acceptance_cutoff(&ThresholdStrategy { tau }, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&sol.q_bar));
        if !sol.accept_all_survivors {
            prop_assert!((sol.accepted_mass - p.alpha).abs() <= 1e-6, "mass {} alpha {}", sol.accepted_mass, p.alpha);
        }
    }

    #[test]
    fn noiseless_full_adoption_matches_closed_form(alpha in 0.03..0.4f64, l in 0.0..0.5f64) {
        let p = ModelParams { sigma: 1e-7, alpha, lottery_rate: l, ..Default::default() };
        let cs = ContinuumSolver::default();
        let none = cs.accepted_mean_quality(&ThresholdStrategy::none(), &p).unwrap();
        let full = cs.accepted_mean_quality(&ThresholdStrategy::full(), &p).unwrap();
        prop_assert!((none - (1.0 - alpha / 2.0)).abs() <= 1e-4);
        prop_assert!((full - (1.0 - alpha / (2.0 * (1.0 - l)))).abs() <= 1e-4);
    }

    #[test]
    fn non_deviation_reproduces_the_population(p in params(), tau in 0.0..1.0f64, q in 0.0..1.0f64) {
        let cs = ContinuumSolver::default();
        let st = ThresholdStrategy { tau };
        let base = cs.acceptance_cutoff(&st, &p).unwrap();
        let same = cs.solve_deviated(&st, &p, Deviation { q, p_dev: st.participation(q) }).unwrap();
        prop_assert_eq!(base, same);
    }

    #[test]
    fn monte_carlo_is_reproducible(seed in any::<u64>(), tau in 0.0..1.0f64, l in 0.0..0.5f64) {
        let p = ModelParams { lottery_rate: l, ..Default::default() };
        let mc = MonteCarlo::default();
        let a = mc.simulate(&ThresholdStrategy { tau }, &p, 20, seed).unwrap();
        let b = mc.simulate(&ThresholdStrategy { tau }, &p, 20, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.accepted_per_rep.iter().all(|&k| k <= 10));
    }

    #[test]
    fn disabled_lottery_makes_participation_irrelevant(seed in any::<u64>(), tau in 0.0..1.0f64) {
        let p = ModelParams { lottery_rate: 0.0, ..Default::default() };
        let mc = MonteCarlo::default();
        let a = mc.simulate_once(&ThresholdStrategy { tau }, &p, seed).unwrap();
        let b = mc.simulate_once(&ThresholdStrategy::none(), &p, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn twelve_digit_formatting_round_trips(x in -1e6..1e6f64) {
        let back: f64 = fmt_num(x).parse().unwrap();
        prop_assert_eq!(Some(back), round12(x));
        prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(1e-300));
    }

    #[test]
    fn config_parser_never_panics(text in "\\PC*") {
        let _ = parse_config(&text);
        let _ = parse_override(&text);
    }

    #[test]
    fn resolved_configs_round_trip(
        sigma in 0.01..2.0f64,
        seed in any::<u64>(),
        grid in 3usize..400,
        sweep in prop::collection::vec(0.01..1.0f64, 1..6),
        which in 0usize..Experiment::ALL.len(),
    ) {
        let exp = Experiment::ALL[which];
        let sets = [
            format!("params.sigma={sigma}"),
            format!("mc.base_seed={seed}"),
            format!("grid={grid}"),
            format!("sweep.sigma={}", sweep.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")),
        ];
        let over: Vec<_> = sets.iter().map(|s| parse_override(s).unwrap()).collect();
        let cfg = ExperimentConfig::resolve(Some(exp), &[], &over).unwrap();
        let again = ExperimentConfig::resolve(None, &parse_config(&cfg.render()).unwrap(), &[]).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.hash(), cfg.hash());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn best_response_set_is_a_down_set(r in 0.05..1.0f64, tau in 0.0..1.0f64, sigma in 0.05..0.6f64) {
        let p = ModelParams::default().with_ratio(r).unwrap().with_sigma(sigma);
        let prof = EquilibriumSolver::default().incentive_profile(&ThresholdStrategy { tau }, &p).unwrap();
        let mut abstained = false;
        for (&q, &d) in prof.qualities.iter().zip(&prof.incentives) {
            if d < -NASH_TOLERANCE {
                abstained = true;
            }
            prop_assert!(!(abstained && d > NASH_TOLERANCE), "participant at q={q} above an abstainer");
        }
    }

    #[test]
    fn planner_dominates_nash_and_no_lottery(r in 0.1..0.9f64) {
        let solver = EquilibriumSolver::default();
        let p = ModelParams::default().with_ratio(r).unwrap();
        let none = solver.continuum.accepted_mean_quality(&ThresholdStrategy::none(), &p).unwrap();
        let planner = solver.planner_optimum(&p).unwrap();
        let nash = solver.nash_threshold_fixed_sigma(&p, p.sigma).unwrap();
        prop_assert!(planner.q_bar >= nash.q_bar);
        prop_assert!(nash.q_bar >= none - 1e-6);
        prop_assert!(!nash.converged || nash.deviation_gap <= NASH_TOLERANCE);
        prop_assert!((0.0..=1.0).contains(&nash.tau_star));
    }
}
