use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use forge_twin::env::Mode;
use forge_twin::harness::{self, RunConfig};

#[derive(Parser)]
#[command(
    name = "forge-twin",
    version,
    about = "Induction-heating line twin with PPO power control"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults are used for anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set ppo.epochs=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Maximum power of each learnable zone, W (same as `--set zones.p_max=...`).
    #[arg(long, global = true)]
    p_max: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a policy; writes checkpoints and metrics.csv.
    Train {
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint; writes pieces.csv and summary.csv.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        /// Use the mean action instead of sampling.
        #[arg(long)]
        deterministic: bool,
        /// Also write steps.csv.
        #[arg(long)]
        steps: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid-search warm-holding turn patterns; writes ranking.csv.
    PatternSearch {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Open-loop run from a power schedule CSV; writes trajectory.csv.
    Simulate {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn overrides(common: &Common) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for s in &common.sets {
        let Some((k, v)) = s.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{s}`");
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(p) = common.p_max {
        out.push(("zones.p_max".into(), format!("{p:?}")));
    }
    Ok(out)
}

fn load_config(common: &Common, extra: Vec<(String, String)>) -> Result<RunConfig> {
    let mut ov = overrides(common)?;
    ov.extend(extra);
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path, &ov),
        None => RunConfig::from_toml_str("", &ov),
    };
    cfg.context("loading configuration")
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.unwrap_or_else(|| cfg.run.out_dir.clone())
}

fn announce(path: &Path, name: &str) {
    eprintln!("wrote {}", path.join(name).display());
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let common = &cli.common;
    match cli.cmd {
        Cmd::Train { mode, seed, out } => {
            let mut extra = Vec::new();
            if let Some(m) = mode {
                extra.push(("run.mode".into(), m.to_string()));
            }
            if let Some(s) = seed {
                extra.push(("run.seed".into(), s.to_string()));
            }
            let cfg = load_config(common, extra)?;
            let out = out_dir(out, &cfg);
            let report = harness::cmd_train(&cfg, cfg.run.mode, &out, |m| {
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
                eprintln!(
                    "epoch {:>4}  return {:>10}  trailing100 {:>10}  kl {:+.5}  clip {:.3}",
                    m.epoch,
                    fmt(m.mean_return),
                    fmt(m.trailing100_return),
                    m.kl,
                    m.clip_frac
                );
            })?;
            for name in [
                harness::METRICS_CSV,
                harness::CHECKPOINT,
                harness::BEST_CHECKPOINT,
            ] {
                announce(&out, name);
            }
            if let (Some(first), Some(last)) = (report.metrics.first(), report.metrics.last()) {
                println!(
                    "trailing100 return: first epoch {:?}, last epoch {:?}",
                    first.trailing100_return, last.trailing100_return
                );
            }
        }
        Cmd::Eval {
            checkpoint,
            episodes,
            deterministic,
            steps,
            seed,
            out,
        } => {
            let mut extra = Vec::new();
            if steps {
                extra.push(("eval.write_steps".into(), "true".into()));
            }
            if let Some(s) = seed {
                extra.push(("run.seed".into(), s.to_string()));
            }
            let cfg = load_config(common, extra)?;
            let ck = harness::load_checkpoint(&checkpoint)?;
            let out = out_dir(out, &cfg);
            let n = episodes.unwrap_or(cfg.eval.episodes);
            let s = harness::cmd_eval(&cfg, &ck, n, deterministic || cfg.eval.deterministic, &out)?;
            announce(&out, harness::PIECES_CSV);
            announce(&out, harness::SUMMARY_CSV);
            println!(
                "{} mode, {} episodes, {} pieces: {:.1}% in required band, {:.1}% in desired band, {} overheated pieces",
                s.mode,
                s.episodes,
                s.pieces,
                100.0 * s.frac_required,
                100.0 * s.frac_desired,
                s.overheat_pieces
            );
        }
        Cmd::PatternSearch { out } => {
            let cfg = load_config(common, Vec::new())?;
            let out = out_dir(out, &cfg);
            let res = harness::cmd_pattern_search(&cfg, &out)?;
            announce(&out, harness::RANKING_CSV);
            match res.best {
                Some(b) => println!(
                    "best pattern {:?}: {:.3} °C mean deviation ({} candidates)",
                    b.turn_durations,
                    b.score.unwrap_or(f64::NAN),
                    res.ranking.len()
                ),
                None => println!("no feasible pattern among {} candidates", res.ranking.len()),
            }
        }
        Cmd::Simulate {
            schedule,
            mode,
            out,
        } => {
            let mut extra = Vec::new();
            if let Some(m) = mode {
                extra.push(("run.mode".into(), m.to_string()));
            }
            let cfg = load_config(common, extra)?;
            let rows = harness::read_schedule(&schedule, &cfg)
                .with_context(|| format!("reading schedule {}", schedule.display()))?;
            let out = out_dir(out, &cfg);
            let traj = harness::cmd_simulate(&cfg, cfg.run.mode, &rows, &out)?;
            announce(&out, harness::TRAJECTORY_CSV);
            println!("{} steps simulated", traj.len() - 1);
        }
    }
    Ok(())
}
