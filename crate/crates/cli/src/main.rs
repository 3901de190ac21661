use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Parser, Subcommand};

use wwrouter::bench::{self, PolicyChoice, Profile};
use wwrouter::config::Config;
use wwrouter::cql;
use wwrouter::datagen::{self, CollectConfig};
use wwrouter::grid::load_design;
use wwrouter::infer::{load_bundle, save_bundle};
use wwrouter::router::Trajectory;

#[derive(Parser, Debug)]
#[command(name = "wwrouter", version)]
#[command(about = "Grid detailed router with learned per-iteration cost weights")]
struct Cli {
    /// TOML file with reward, router and training settings
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a corpus of synthetic designs
    GenDesigns {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// easy or congested
        #[arg(long, default_value = "congested")]
        profile: Profile,
    },
    /// Run perturbed and Sobol-sampled flows and record transitions
    Collect {
        #[arg(long)]
        designs: PathBuf,
        /// Runs per design
        #[arg(long)]
        runs: usize,
        #[arg(long, default_value_t = 0.6)]
        perturb_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy offline and write a bundle plus a metrics table
    Train {
        /// Dataset directory written by `collect`
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics table path [default: <out>.metrics.tsv]
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Route one design with the baseline schedule or a trained policy
    #[command(group(ArgGroup::new("weights").required(true).args(["policy", "baseline"])))]
    Route {
        #[arg(long)]
        design: PathBuf,
        /// Policy bundle
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Trajectory output
        #[arg(long, default_value = "trajectory.json")]
        out: PathBuf,
        /// Per-iteration weight log [default: <out>.weights.tsv]
        #[arg(long)]
        weights_log: Option<PathBuf>,
    },
    /// Compare baseline and policy on every design in a directory
    Bench {
        #[arg(long)]
        designs: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 10)]
        repeat: usize,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
    },
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn weight_log(t: &Trajectory) -> String {
    let mut out = String::from("iteration\tdrc_cost\tmarker_cost\tfixed_shape_cost\tmarker_decay\ttotal_drvs\n");
    for s in &t.states {
        let w = &s.weights;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            s.iteration, w.drc_cost, w.marker_cost, w.fixed_shape_cost, w.marker_decay, s.total_drvs
        )
        .unwrap();
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => Config::default(),
    };
    bench::init_thread_pool()?;

    match cli.command {
        Command::GenDesigns {
            out,
            count,
            seed,
            profile,
        } => {
            let designs = bench::generate_corpus(count, seed, profile, cfg.router.max_iterations)?;
            let paths = bench::save_corpus(&designs, &out)?;
            println!("wrote {} designs to {}", paths.len(), out.display());
        }
        Command::Collect {
            designs,
            runs,
            perturb_frac,
            seed,
            out,
        } => {
            let corpus = bench::load_corpus(&designs)
                .with_context(|| format!("loading designs from {}", designs.display()))?;
            if corpus.is_empty() {
                bail!("no designs found in {}", designs.display());
            }
            let cc = CollectConfig {
                runs_per_design: runs,
                perturb_fraction: perturb_frac,
                seed,
                max_iterations: cfg.router.max_iterations,
                rewards: cfg.reward,
            };
            let (dataset, records) = datagen::collect(&corpus, &cc)?;
            datagen::save_dataset(&dataset, &out)?;
            let converged = records.iter().filter(|r| r.converged).count();
            println!(
                "runs {} transitions {} converged {:.3}",
                records.len(),
                dataset.transitions.len(),
                converged as f64 / records.len().max(1) as f64
            );
        }
        Command::Train {
            dataset,
            out,
            epochs,
            seed,
            metrics,
        } => {
            let data = datagen::load_dataset(&dataset)
                .with_context(|| format!("loading dataset {}", dataset.display()))?;
            let mut tc = cfg.cql.clone();
            if let Some(e) = epochs {
                tc.max_epochs = e;
            }
            if let Some(s) = seed {
                tc.seed = s;
            }
            let (bundle, outcome) = cql::train(&data, &tc)?;
            save_bundle(&bundle, &out)?;
            let metrics = metrics.unwrap_or_else(|| with_suffix(&out, ".metrics.tsv"));
            cql::write_metrics(&metrics, &outcome.history, outcome.stop_reason)?;
            println!("epochs {} stop_reason {}", outcome.history.len(), outcome.stop_reason);
        }
        Command::Route {
            design,
            policy,
            baseline: _,
            max_iters,
            out,
            weights_log,
        } => {
            let d = load_design(&design).with_context(|| format!("loading design {}", design.display()))?;
            let bundle = policy.as_ref().map(load_bundle).transpose()?;
            let choice = match &bundle {
                Some(b) => PolicyChoice::Learned(b),
                None => PolicyChoice::Baseline,
            };
            let (t, secs) = bench::timed_run(&d, choice, max_iters.unwrap_or(cfg.router.max_iterations))
                .with_context(|| format!("routing {}", d.name))?;
            let json = serde_json::to_string_pretty(&t)? + "\n";
            std::fs::write(&out, json).with_context(|| format!("writing {}", out.display()))?;
            let log_path = weights_log.unwrap_or_else(|| with_suffix(&out, ".weights.tsv"));
            std::fs::write(&log_path, weight_log(&t))
                .with_context(|| format!("writing {}", log_path.display()))?;
            println!(
                "design {} iterations {} drvs {} converged {} runtime_s {:.6}",
                d.name,
                t.iterations(),
                t.final_drvs(),
                t.converged,
                secs
            );
        }
        Command::Bench {
            designs,
            policy,
            repeat,
            report,
            max_iters,
        } => {
            let corpus = bench::load_corpus(&designs)
                .with_context(|| format!("loading designs from {}", designs.display()))?;
            let bundle = load_bundle(&policy)?;
            let r = bench::run_bench(&corpus, &bundle, repeat, max_iters.unwrap_or(cfg.router.max_iterations))?;
            r.write(&report)?;
            print!("{}", r.to_tsv());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
