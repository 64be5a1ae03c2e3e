//! `fepheal`: run, report on and replay seeded self-healing experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fepheal::harness::{report, replay, run_experiment, ExperimentConfig, HarnessError, MetricsSummary};

#[derive(Parser)]
#[command(name = "fepheal", version, about = "Active-inference self-healing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifact directory.
    Run(RunArgs),
    /// Summarise an artifact directory and draw its plots.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Re-run a stored experiment and byte-compare the artifacts.
    Replay {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Equivalent sample size of the BDeu prior.
    #[arg(long)]
    ess: Option<f64>,
    /// Weight of the structural prior.
    #[arg(long)]
    lambda: Option<f64>,
    /// Bins per metric.
    #[arg(long)]
    k: Option<usize>,
    /// Evidence window in rounds (0 keeps all).
    #[arg(long)]
    window: Option<u64>,
    /// Mean-field convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    epsilon_g: Option<f64>,
    /// Suspicion threshold for proposing actions.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Skip the do-nothing comparator.
    #[arg(long)]
    no_baseline: bool,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let missing = |flag: &str| HarnessError::Config(format!("--{flag} is required without --config"));
                let scenario = self.scenario.clone().ok_or_else(|| missing("scenario"))?;
                let out = self.out.clone().ok_or_else(|| missing("out"))?;
                ExperimentConfig::new(scenario, self.rounds.unwrap_or(20), out)
            }
        };
        if let Some(v) = self.scenario {
            cfg.scenario = v;
        }
        if let Some(v) = self.rounds {
            cfg.rounds = v;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        cfg.seed = self.seed.or(cfg.seed);
        let a = &mut cfg.agent;
        if let Some(v) = self.ess {
            a.climb.ess = v;
        }
        if let Some(v) = self.lambda {
            a.climb.lambda = v;
        }
        if let Some(v) = self.restarts {
            a.climb.restarts = v;
        }
        if let Some(v) = self.k {
            a.k = v;
        }
        if let Some(v) = self.window {
            a.window = v;
        }
        if let Some(v) = self.tol {
            a.mean_field.tol = v;
        }
        if let Some(v) = self.epsilon_g {
            a.epsilon_g = v;
        }
        if let Some(v) = self.threshold {
            a.catalog.threshold = v;
        }
        if self.no_baseline {
            cfg.baseline = false;
        }
        Ok(cfg)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "absent".into(), |v| format!("{v:.4}"))
}

fn print_summary(s: &MetricsSummary) {
    println!("rounds                 {}", s.rounds);
    println!("deadline-hit rate      {}", fmt_opt(s.deadline_hit_rate));
    println!("baseline hit rate      {}", fmt_opt(s.baseline_hit_rate));
    println!("mean time-to-recovery  {}", fmt_opt(s.mean_time_to_recovery));
    println!("detection precision    {}", fmt_opt(s.detection_precision));
    println!("detection recall       {}", fmt_opt(s.detection_recall));
    println!("skeleton F1            {}", fmt_opt(s.skeleton_f1));
    let actions: Vec<String> = s.actions.iter().map(|(k, n)| format!("{k}={n}")).collect();
    println!("actions                {}", actions.join(" "));
}

fn exit_code(e: &HarnessError) -> ExitCode {
    match e {
        HarnessError::Config(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors count as configuration errors; help and version exit cleanly.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => args.into_config().and_then(|cfg| {
            let summary = run_experiment(&cfg)?;
            print_summary(&summary);
            println!("artifacts              {}", cfg.out.display());
            Ok(ExitCode::SUCCESS)
        }),
        Command::Report { input, format } => report(&input).map(|(summary, plots)| {
            match format {
                Format::Text => {
                    print_summary(&summary);
                    for p in plots {
                        println!("plot                   {}", p.display());
                    }
                }
                Format::Json => print!("{}", summary.to_json()),
            }
            ExitCode::SUCCESS
        }),
        Command::Replay { input } => replay(&input).map(|verdict| match verdict.divergence {
            None => {
                println!("replay: pass ({} files identical)", verdict.files);
                ExitCode::SUCCESS
            }
            Some(d) => {
                let round = d.round.map_or_else(String::new, |r| format!(", round {r}"));
                let line = d.line.map_or_else(|| " (missing on one side)".to_string(), |l| format!(", line {l}"));
                println!("replay: FAIL at {}{round}{line}", d.file);
                ExitCode::from(3)
            }
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}
