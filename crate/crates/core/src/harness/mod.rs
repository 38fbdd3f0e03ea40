//! Configuration, commands and CSV output.

mod config;
pub mod csvio;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{set_dotted, Bands, EvalSection, RunConfig, RunSection};
use csvio::{MetricsRow, PieceRow, RankingRow, StepRow, SummaryRow, TrajectoryRow};

use crate::env::{EnvError, EpisodeOutcome, Mode};
use crate::nn::{Checkpoint, CheckpointError};
use crate::patterns::{self, PatternError, SearchResult};
use crate::ppo::{self, EpochMetrics, PpoError};
use crate::twin::TwinError;

pub const METRICS_CSV: &str = "metrics.csv";
pub const PIECES_CSV: &str = "pieces.csv";
pub const STEPS_CSV: &str = "steps.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const RANKING_CSV: &str = "ranking.csv";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const CHECKPOINT: &str = "checkpoint.ftck";
pub const BEST_CHECKPOINT: &str = "best.ftck";
pub const RESOLVED_CONFIG: &str = "config.toml";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv schema: {0}")]
    Schema(String),
    #[error("csv line {line}: {reason}")]
    Row { line: u64, reason: String },
    #[error("checkpoint {}: {source}", path.display())]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: CheckpointError,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(io_err(&path))
}

fn open(path: &Path) -> Result<File, HarnessError> {
    File::open(path).map_err(io_err(path))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    csvio::read_records(open(path)?)
}

pub fn read_pieces(path: &Path) -> Result<Vec<PieceRow>, HarnessError> {
    csvio::read_records(open(path)?)
}

pub fn read_ranking(path: &Path) -> Result<Vec<RankingRow>, HarnessError> {
    csvio::read_records(open(path)?)
}

pub fn read_summary(path: &Path) -> Result<SummaryRow, HarnessError> {
    let mut rows: Vec<SummaryRow> = csvio::read_records(open(path)?)?;
    match rows.len() {
        1 => Ok(rows.remove(0)),
        n => Err(HarnessError::Schema(format!(
            "summary must have one row, found {n}"
        ))),
    }
}

pub fn read_schedule(path: &Path, cfg: &RunConfig) -> Result<Vec<Vec<f64>>, HarnessError> {
    csvio::read_schedule(open(path)?, cfg.zones.n_learnable(), cfg.zones.p_max)
}

impl From<&EpochMetrics> for MetricsRow {
    fn from(m: &EpochMetrics) -> Self {
        Self {
            epoch: m.epoch,
            steps: m.steps,
            mean_return: m.mean_return,
            trailing100_return: m.trailing100_return,
            pi_loss: m.pi_loss,
            v_loss: m.v_loss,
            kl: m.kl,
            clip_frac: m.clip_frac,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub metrics: Vec<EpochMetrics>,
    pub checkpoint: Checkpoint,
    pub best: Checkpoint,
}

/// Trains one model and writes the checkpoints, metrics and resolved config to `out`.
pub fn cmd_train(
    cfg: &RunConfig,
    mode: Mode,
    out: &Path,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainReport, HarnessError> {
    let env_cfg = cfg.env_config(mode);
    let mut env = crate::env::ForgeEnv::new(env_cfg)?;
    let res = ppo::train(&mut env, &cfg.ppo, cfg.run.seed, on_epoch)?;
    let rows: Vec<MetricsRow> = res.metrics.iter().map(MetricsRow::from).collect();
    csvio::write_records(create(out, METRICS_CSV)?, &rows)?;
    let checkpoint = res.last.to_checkpoint(mode);
    let best = res.best.to_checkpoint(mode);
    for (ck, name) in [(&checkpoint, CHECKPOINT), (&best, BEST_CHECKPOINT)] {
        let path = out.join(name);
        ck.save(&path)
            .map_err(|source| HarnessError::Checkpoint { path, source })?;
    }
    let cfg_path = out.join(RESOLVED_CONFIG);
    std::fs::write(&cfg_path, cfg.to_toml_string()).map_err(io_err(&cfg_path))?;
    Ok(TrainReport {
        metrics: res.metrics,
        checkpoint,
        best,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, HarnessError> {
    Checkpoint::load(path).map_err(|source| HarnessError::Checkpoint {
        path: path.to_path_buf(),
        source,
    })
}

/// Classifies pieces by mean temperature against the bands; overheat is any segment above `hard_max`.
pub fn summarize(
    mode: Mode,
    outcomes: &[EpisodeOutcome],
    bands: &Bands,
    hard_max: f64,
) -> SummaryRow {
    let [rlo, rhi] = bands.required;
    let [dlo, dhi] = bands.desired;
    let (mut below, mut inside, mut above, mut desired, mut hot) = (0, 0, 0, 0, 0);
    for p in outcomes.iter().flat_map(|o| &o.pieces) {
        let m = p.mean_temp();
        if m < rlo {
            below += 1;
        } else if m > rhi {
            above += 1;
        } else {
            inside += 1;
        }
        if (dlo..=dhi).contains(&m) {
            desired += 1;
        }
        if p.max_temp() > hard_max {
            hot += 1;
        }
    }
    let n = below + inside + above;
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let mean_return = if outcomes.is_empty() {
        0.0
    } else {
        outcomes.iter().map(|o| o.total_reward).sum::<f64>() / outcomes.len() as f64
    };
    SummaryRow {
        mode: mode.to_string(),
        episodes: outcomes.len(),
        pieces: n,
        frac_below: frac(below),
        frac_required: frac(inside),
        frac_above: frac(above),
        frac_desired: frac(desired),
        overheat_pieces: hot,
        overheat_episodes: outcomes.iter().filter(|o| o.overheat).count(),
        mean_return,
    }
}

/// Runs `episodes` evaluation episodes of a checkpoint; writes pieces, summary and optionally steps.
pub fn cmd_eval(
    cfg: &RunConfig,
    checkpoint: &Checkpoint,
    episodes: usize,
    deterministic: bool,
    out: &Path,
) -> Result<SummaryRow, HarnessError> {
    let mode = checkpoint.mode;
    let env_cfg = cfg.env_config(mode);
    let zone_idx: Vec<usize> = env_cfg
        .zones
        .learnable
        .iter()
        .enumerate()
        .filter(|(_, l)| **l)
        .map(|(i, _)| i)
        .collect();
    let mut steps = Vec::new();
    let outcomes = ppo::evaluate(
        checkpoint,
        &env_cfg,
        episodes,
        !deterministic,
        cfg.run.seed,
        |ep, info, r| {
            if cfg.eval.write_steps {
                steps.push(StepRow {
                    episode: ep,
                    t: info.time,
                    r_total: r,
                    r_even: info.parts.even,
                    r_heat: info.parts.heat,
                    r_move: info.parts.movement,
                    powers: info.powers.clone(),
                    max_temp: info.max_temp(),
                });
            }
        },
    )?;
    let pieces: Vec<PieceRow> = outcomes
        .iter()
        .enumerate()
        .flat_map(|(ep, o)| {
            o.pieces.iter().map(move |p| PieceRow {
                episode: ep,
                piece_index: p.piece_index,
                exit_time: p.exit_time,
                min_temp: p.min_temp(),
                mean_temp: p.mean_temp(),
                max_temp: p.max_temp(),
            })
        })
        .collect();
    csvio::write_records(create(out, PIECES_CSV)?, &pieces)?;
    if cfg.eval.write_steps {
        csvio::write_steps(create(out, STEPS_CSV)?, &zone_idx, &steps)?;
    }
    let summary = summarize(mode, &outcomes, &cfg.bands, cfg.reward.hard_max_temp);
    csvio::write_records(create(out, SUMMARY_CSV)?, std::slice::from_ref(&summary))?;
    Ok(summary)
}

pub fn cmd_pattern_search(cfg: &RunConfig, out: &Path) -> Result<SearchResult, HarnessError> {
    let res = patterns::grid_search(&cfg.patterns, &cfg.env_config(Mode::WarmHolding))?;
    let rows: Vec<RankingRow> = res
        .ranking
        .iter()
        .map(|c| RankingRow {
            pattern: csvio::format_pattern(&c.turn_durations),
            feasible: c.is_feasible(),
            score_c: c.score,
        })
        .collect();
    csvio::write_records(create(out, RANKING_CSV)?, &rows)?;
    Ok(res)
}

/// Open-loop run of one bar under a per-step schedule of learnable-zone powers.
///
/// The bar starts at the mode's entry position with the profile mean in
/// every segment; no safety mask is applied. Stops early once the bar has
/// left the line.
pub fn cmd_simulate(
    cfg: &RunConfig,
    mode: Mode,
    schedule: &[Vec<f64>],
    out: &Path,
) -> Result<Vec<TrajectoryRow>, HarnessError> {
    let env_cfg = cfg.env_config(mode);
    let mut line = env_cfg.build_line()?;
    let n = env_cfg.line.n_segments;
    let id = line
        .add_bar(
            env_cfg.initial_head_pos(),
            vec![env_cfg.initial_profile().mean; n],
        )
        .map_err(EnvError::from)?;
    let snap = |line: &crate::twin::LineState| {
        line.bar(id).map(|b| TrajectoryRow {
            t: line.time,
            head_pos: b.head_pos,
            powers: line.zone_powers(),
            temps: b.temps.clone(),
        })
    };
    let mut rows = vec![snap(&line).expect("bar just added")];
    for p in schedule {
        let powers = line.powers_with(p);
        line.step(&powers)
            .map_err(|e: TwinError| EnvError::from(e))?;
        rows.push(snap(&line).expect("sheared bars are kept"));
        if line.bars.iter().all(|b| b.id != id) {
            break;
        }
    }
    csvio::write_trajectory(create(out, TRAJECTORY_CSV)?, &rows)?;
    Ok(rows)
}
