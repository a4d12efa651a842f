use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use review_lottery::experiments::{self, parse_config, parse_override, Entry, Experiment, ExperimentConfig};
use review_lottery::Error;

const PRECEDENCE: &str = "\
Settings are resolved in this order, later sources winning:
  1. built-in defaults of the experiment
  2. the --config file (flat `key = value` lines, `#` comments)
  3. --set key=value overrides, in the order given
  4. the dedicated flags --out, --mc, --seed and --threads

Every run writes manifest.cfg with the fully resolved settings; passing it
back with --config reproduces the outputs byte for byte.

Exit status: 0 success, 2 configuration error, 3 results flagged as not
converged, 1 any other failure.";

#[derive(Debug, Parser)]
#[command(name = "review-lottery", version, about = "Voluntary pre-review lottery experiments", after_help = PRECEDENCE)]
struct Cli {
    /// scale-sweep, phase-diagram, optimal-profiles, planner-vs-nash,
    /// prosociality-sweep, ai-scenario, size-effect, mc-validate, planner,
    /// nash or joint.
    experiment: String,

    /// Config file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one setting, e.g. `--set params.sigma=0.4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Add Monte Carlo estimates where the experiment supports them.
    #[arg(long)]
    mc: bool,

    /// Base seed for Monte Carlo replications.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (0 = one per core).
    #[arg(long)]
    threads: Option<usize>,
}

fn flag(key: &str, value: impl ToString) -> Entry {
    Entry { line: 0, key: key.to_string(), value: value.to_string() }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let experiment: Experiment = cli.experiment.parse()?;
    let file = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => Vec::new(),
    };
    let mut overrides = cli.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    if let Some(out) = &cli.out {
        overrides.push(flag("output", out.display()));
    }
    if cli.mc {
        overrides.push(flag("mc.enabled", true));
    }
    if let Some(seed) = cli.seed {
        overrides.push(flag("mc.base_seed", seed));
    }
    if let Some(threads) = cli.threads {
        overrides.push(flag("threads", threads));
    }
    ExperimentConfig::resolve(Some(experiment), &file, &overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            eprintln!("warning: thread pool: {e}");
        }
    }
    match experiments::run_to_dir(&cfg, &cfg.output) {
        Ok((report, written)) => {
            for path in written {
                eprintln!("wrote {}", path.display());
            }
            if report.nonconverged > 0 {
                eprintln!("{} result(s) flagged as not converged", report.nonconverged);
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config { .. } | Error::Usage(_) | Error::Param(_)) { 2 } else { 1 })
        }
    }
}
