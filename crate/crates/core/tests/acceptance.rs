//! Acceptance gates. Runs every primary criterion at its stated tolerance,
//! prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use review_lottery::equilibrium::{EquilibriumSolver, NASH_TOLERANCE};
use review_lottery::experiments::{self, parse_override, Experiment, ExperimentConfig, Report};
use review_lottery::{effective_noise, ContinuumSolver, ModelParams, MonteCarlo, ThresholdStrategy};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn run(experiment: Experiment, overrides: &[&str]) -> Report {
    let over: Vec<_> = overrides.iter().map(|s| parse_override(s).unwrap()).collect();
    let cfg = ExperimentConfig::resolve(Some(experiment), &[], &over).unwrap();
    experiments::run(&cfg).unwrap()
}

fn column(report: &Report, table: &str, col: &str) -> Vec<f64> {
    let t = report.table(table).unwrap();
    (0..t.rows.len()).map(|i| t.num(i, col).unwrap_or(f64::NAN)).collect()
}

fn noiseless_oracles() -> Outcome {
    let start = Instant::now();
    let p = ModelParams { sigma: 1e-7, lottery_rate: 0.0, ..Default::default() };
    let cont = ContinuumSolver::default().accepted_mean_quality(&ThresholdStrategy::none(), &p).unwrap();
    let mc = MonteCarlo::default().simulate(&ThresholdStrategy::none(), &p, 5_000, 11).unwrap();
    // Mean of the top 10 of 100 uniform order statistics: (91 + ... + 100) / (10 * 101).
    let order_stat = 95.5 / 101.0;
    let elapsed = start.elapsed().as_secs_f64();
    let z = (mc.q_bar_mean - order_stat) / mc.q_bar_se;
    outcome(
        (cont - 0.95).abs() <= 1e-4 && z.abs() <= 3.0 && elapsed < 1.0,
        format!("continuum {cont:.8}, MC {:.6} vs {order_stat:.6} (z = {z:.2}), {elapsed:.2}s", mc.q_bar_mean),
    )
}

fn noise_law() -> Outcome {
    let p = ModelParams { sigma: 0.3, beta: 8.0, lottery_rate: 0.2, ..Default::default() };
    let sol = ContinuumSolver::default().acceptance_cutoff(&ThresholdStrategy::full(), &p).unwrap();
    let direct = effective_noise(0.3, 0.8, 8.0).unwrap();
    let target = 0.050331648;
    outcome(
        (sol.sigma_eff - target).abs() <= 1e-12 && (direct - target).abs() <= 1e-12,
        format!("sigma_eff(tau=1) = {:.12}, law = {direct:.12}", sol.sigma_eff),
    )
}

fn continuum_mc_agreement() -> Outcome {
    let start = Instant::now();
    let report = run(Experiment::McValidate, &[]);
    let z = column(&report, "mc_validate", "z");
    let within = z.iter().filter(|z| z.abs() <= 3.0).count();
    let frac = within as f64 / z.len() as f64;
    let tol = column(&report, "mc_validate", "abs_diff");
    let se = column(&report, "mc_validate", "q_bar_mc_se");
    let loose = tol.iter().zip(&se).filter(|(d, s)| **d <= f64::max(0.02, 3.0 * **s)).count();
    outcome(
        frac >= 0.95,
        format!(
            "{within}/{} points with |z| <= 3 (max |z| {:.1}); {loose}/{} within max(0.02, 3 SE); {:.1}s",
            z.len(),
            z.iter().fold(0.0_f64, |m, z| m.max(z.abs())),
            z.len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn threshold_structure() -> Outcome {
    let solver = EquilibriumSolver::default();
    let mut points = 0;
    let mut violations = 0;
    for r in [0.1, 0.33, 0.5, 0.67, 0.9] {
        for sigma in [0.1, 0.3, 0.5] {
            let p = ModelParams::default().with_ratio(r).unwrap().with_sigma(sigma);
            for tau in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
                let prof = solver.incentive_profile(&ThresholdStrategy { tau }, &p).unwrap();
                points += 1;
                // A strict participant above a strict abstainer breaks the down-set.
                let mut abstained = false;
                for &d in &prof.incentives {
                    if d < -NASH_TOLERANCE {
                        abstained = true;
                    } else if d > NASH_TOLERANCE && abstained {
                        violations += 1;
                        break;
                    }
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations over {points} strategy/parameter points"))
}

fn under_participation() -> Outcome {
    let report = run(Experiment::PlannerVsNash, &[]);
    let t = "planner_vs_nash";
    let (sig, none, pl, ne) = (
        column(&report, t, "sigma"),
        column(&report, t, "q_bar_none"),
        column(&report, t, "q_bar_planner"),
        column(&report, t, "q_bar_nash"),
    );
    let (tp, tn) = (column(&report, t, "tau_planner"), column(&report, t, "tau_nash"));
    let mut bad = Vec::new();
    for i in 0..sig.len() {
        if !(tn[i] <= tp[i] && pl[i] >= ne[i] && ne[i] >= none[i]) {
            bad.push(format!("order at sigma {}", sig[i]));
        }
        if i > 0 && pl[i] - ne[i] < pl[i - 1] - ne[i - 1] {
            bad.push(format!("gap shrinks at sigma {}", sig[i]));
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} sigma points, gap {:.4} -> {:.4}{}",
            sig.len(),
            pl[0] - ne[0],
            pl[sig.len() - 1] - ne[sig.len() - 1],
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }
        ),
    )
}

fn prosociality() -> Outcome {
    let report = run(Experiment::ProsocialitySweep, &["sweep.r=0.1,0.2,0.33,0.5,0.67,0.9"]);
    let t = "prosociality_sweep";
    let (r, frac, tau) = (column(&report, t, "r"), column(&report, t, "gain_fraction"), column(&report, t, "tau_nash"));
    let at = |x: f64| frac[r.iter().position(|&v| v == x).unwrap()];
    let monotone = tau.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        at(0.9) <= 0.1 && at(0.1) >= 0.8 && monotone,
        format!("gain fraction {:.4} at r=0.1, {:.4} at r=0.9; tau* nonincreasing: {monotone}", at(0.1), at(0.9)),
    )
}

fn ai_scenario() -> Outcome {
    let report = run(Experiment::AiScenario, &["sweep.multiplier=1,2"]);
    let loss = column(&report, "ai_scenario", "relative_loss")[1];
    let planner = column(&report, "ai_scenario", "q_bar_planner")[1];
    let baseline = column(&report, "ai_scenario", "q_bar_none")[0];
    outcome(
        (loss - 0.22).abs() <= 0.08 && planner >= baseline,
        format!("relative loss {:.2}%, planner at 2 sigma {planner:.4} vs baseline {baseline:.4}", 100.0 * loss),
    )
}

fn community_size() -> Outcome {
    let report = run(Experiment::SizeEffect, &["sweep.n=100,500", "sweep.r=0.3,0.5,0.99"]);
    let t = "size_effect";
    let (n, r, gain) = (column(&report, t, "n"), column(&report, t, "r"), column(&report, t, "gain"));
    let g = |nn: f64, rr: f64| gain[(0..n.len()).find(|&i| n[i] == nn && r[i] == rr).unwrap()];
    let size = g(500.0, 0.5) / g(100.0, 0.5);
    let shift = g(500.0, 0.3) / g(500.0, 0.5);
    let selfish = g(100.0, 0.99).max(g(500.0, 0.99));
    outcome(
        (0.3..=0.7).contains(&size) && (1.5..=2.5).contains(&shift) && selfish <= 0.005,
        format!(
            "gain(500)/gain(100) = {size:.3}, gain(0.3)/gain(0.5) at N=500 = {shift:.3}, gain at r=0.99 = {selfish:.4}"
        ),
    )
}

fn finite_n_conservatism() -> Outcome {
    let start = Instant::now();
    let report = run(Experiment::ProsocialitySweep, &["sweep.r=0.33,0.5", "mc.enabled=true", "mc.eq_r=0.33,0.5"]);
    let t = "prosociality_mc";
    let (r, cont, hat) = (column(&report, t, "r"), column(&report, t, "tau_continuum"), column(&report, t, "tau_mc"));
    let step = 1.0 / 49.0;
    let ok = (0..r.len()).all(|i| hat[i] >= cont[i] - step);
    let detail = (0..r.len())
        .map(|i| format!("r={}: tau_mc {:.4} vs tau* {:.4}", r[i], hat[i], cont[i]))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(ok, format!("{detail}; {:.1}s", start.elapsed().as_secs_f64()))
}

fn same_files(a: &Path, b: &Path) -> Result<usize, String> {
    let mut compared = 0;
    for entry in std::fs::read_dir(a).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_owned();
        if name == "manifest.cfg" {
            continue;
        }
        let other = b.join(&name);
        if std::fs::read(&path).ok() != std::fs::read(&other).ok() {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
        compared += 1;
    }
    Ok(compared)
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_review-lottery");
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[&str])] = &[
        ("scale-sweep", &["sweep.n=50,100", "sweep.beta=2", "mc.m=300"]),
        ("phase-diagram", &[]),
        ("optimal-profiles", &[]),
        ("planner-vs-nash", &["sweep.sigma=0.2,0.3", "mc.enabled=true", "mc.m=300"]),
        ("prosociality-sweep", &["sweep.r=0.5", "mc.enabled=true", "mc.eq_m=200", "mc.eq_r=0.5"]),
        ("ai-scenario", &[]),
        ("size-effect", &["sweep.r=0.5"]),
        ("mc-validate", &["mc.m=300"]),
        ("planner", &[]),
        ("nash", &[]),
        ("joint", &[]),
    ];
    let mut files = 0;
    let mut failures = Vec::new();
    for (name, sets) in cases {
        let first = tmp.path().join(format!("{name}-a"));
        let second = tmp.path().join(format!("{name}-b"));
        let mut cmd = Command::new(bin);
        cmd.arg(name).arg("--out").arg(&first);
        for s in *sets {
            cmd.arg("--set").arg(s);
        }
        let st1 = cmd.output().unwrap().status;
        let st2 = Command::new(bin)
            .arg(name)
            .arg("--config")
            .arg(first.join("manifest.cfg"))
            .arg("--out")
            .arg(&second)
            .args(["--threads", "2"])
            .output()
            .unwrap()
            .status;
        if st1.code() != st2.code() || !matches!(st1.code(), Some(0 | 3)) {
            failures.push(format!("{name}: exit {:?}/{:?}", st1.code(), st2.code()));
            continue;
        }
        match same_files(&first, &second) {
            Ok(n) => files += n,
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{files} output files over {} experiments byte-identical{}",
            cases.len(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join(", ")) }
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("noiseless oracles", noiseless_oracles),
        ("full-adoption noise law", noise_law),
        ("continuum-MC agreement", continuum_mc_agreement),
        ("threshold structure", threshold_structure),
        ("under-participation", under_participation),
        ("prosociality curve", prosociality),
        ("AI scenario", ai_scenario),
        ("community size", community_size),
        ("finite-N conservatism", finite_n_conservatism),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
