//! MDP wrapper over the line simulator.

mod codec;
mod reward;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{Environment, MaterialParams};
use crate::twin::{
    BarId, LineConfig, LineState, MovementMode, Piece, TurnPattern, TwinError, ZoneLayout,
};

pub use codec::{decode_action, encode_state, safety_mask};
pub use reward::{mean_abs_error, reward, RewardConfig, RewardParts};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
    #[error("step called on a finished episode")]
    StepAfterDone,
    #[error("step called before reset")]
    NotReset,
    #[error("expected an action of length {expected}, got {got}")]
    ActionDim { expected: usize, got: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
}

/// Minimal episodic interface the learner needs.
pub trait Env {
    type Info;

    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>, EnvError>;
    fn step(&mut self, action: &[f64]) -> Result<Step<Self::Info>, EnvError>;
}

#[derive(Debug, Clone)]
pub struct Step<I> {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: I,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Normal,
    WarmHolding,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Mode::Normal),
            "warm-holding" | "warm_holding" => Ok(Mode::WarmHolding),
            other => Err(format!("unknown mode `{other}` (normal | warm-holding)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Normal => "normal",
            Mode::WarmHolding => "warm-holding",
        })
    }
}

/// Per-segment truncated normal, °C. `std = 0` gives a uniform profile at `mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialProfile {
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
}

impl InitialProfile {
    pub fn validate(&self, name: &str) -> Result<(), String> {
        let ok = self.lo <= self.mean
            && self.mean <= self.hi
            && self.std >= 0.0
            && [self.mean, self.std, self.lo, self.hi]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(format!("{name}: need finite lo <= mean <= hi and std >= 0"))
        }
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        if self.std == 0.0 {
            return vec![self.mean; n];
        }
        let dist = Normal::new(self.mean, self.std).expect("validated std");
        (0..n)
            .map(|_| loop {
                let t = dist.sample(rng);
                if (self.lo..=self.hi).contains(&t) {
                    break t;
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub horizon_steps: u64,
    /// Head position of a fresh bar in normal mode, m.
    pub normal_head_pos: f64,
    pub normal_profile: InitialProfile,
    /// Head position at the start of a hold, m.
    pub hold_head_pos: f64,
    pub hold_profile: InitialProfile,
    pub safety_mask: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 1200,
            normal_head_pos: 25.5,
            normal_profile: InitialProfile {
                mean: 1080.0,
                std: 5.0,
                lo: 1010.0,
                hi: 1090.0,
            },
            hold_head_pos: 29.9,
            hold_profile: InitialProfile {
                mean: 1050.0,
                std: 15.0,
                lo: 950.0,
                hi: 1090.0,
            },
            safety_mask: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoldConfig {
    /// m/s
    pub speed: f64,
    /// s
    pub hold_duration: f64,
    /// s per turn; the first turn moves backward.
    pub pattern: Vec<f64>,
    pub cyclic: bool,
}

impl Default for HoldConfig {
    fn default() -> Self {
        Self {
            speed: 0.01,
            hold_duration: 540.0,
            pattern: vec![64.0, 60.0, 60.0, 64.0, 64.0, 60.0, 60.0, 64.0],
            cyclic: false,
        }
    }
}

impl HoldConfig {
    pub fn turn_pattern(&self) -> Result<TurnPattern, String> {
        TurnPattern::new(self.pattern.clone(), self.cyclic)
            .ok_or_else(|| "hold.pattern must be non-empty with positive durations".to_string())
    }
}

/// Everything needed to build an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub mode: Mode,
    pub line: LineConfig,
    pub material: MaterialParams,
    pub ambient: Environment,
    pub zones: ZoneLayout,
    pub reward: RewardConfig,
    pub episode: EpisodeConfig,
    pub hold: HoldConfig,
}

impl EnvConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            line: LineConfig::default(),
            material: MaterialParams::default(),
            ambient: Environment::default(),
            zones: ZoneLayout::default(),
            reward: RewardConfig::default(),
            episode: EpisodeConfig::default(),
            hold: HoldConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = EnvError::InvalidConfig;
        self.reward.validate().map_err(bad)?;
        self.episode
            .normal_profile
            .validate("episode.normal_profile")
            .map_err(bad)?;
        self.episode
            .hold_profile
            .validate("episode.hold_profile")
            .map_err(bad)?;
        if self.episode.horizon_steps == 0 {
            return Err(bad("episode.horizon_steps must be positive".into()));
        }
        if self.zones.n_learnable() == 0 {
            return Err(bad("at least one zone must be learnable".into()));
        }
        if !(self.zones.p_max > 0.0 && self.zones.p_max.is_finite()) {
            return Err(bad("zones.p_max must be positive".into()));
        }
        if self.mode == Mode::WarmHolding {
            let h = self.episode.hold_head_pos;
            if !(h > self.line.bar_length && h < self.line.band_length) {
                return Err(bad(
                    "episode.hold_head_pos must lie strictly between bar_length and band_length"
                        .into(),
                ));
            }
            self.hold.turn_pattern().map_err(bad)?;
            if !(self.hold.speed > 0.0 && self.hold.hold_duration >= 0.0) {
                return Err(bad(
                    "hold.speed must be positive and hold.hold_duration >= 0".into(),
                ));
            }
        }
        let probe = self.build_line()?;
        drop(probe);
        Ok(())
    }

    pub fn movement(&self) -> Result<MovementMode, EnvError> {
        Ok(match self.mode {
            Mode::Normal => MovementMode::Normal {
                speed: self.line.speed,
            },
            Mode::WarmHolding => MovementMode::WarmHolding {
                speed: self.hold.speed,
                pattern: self.hold.turn_pattern().map_err(EnvError::InvalidConfig)?,
                hold_duration: self.hold.hold_duration,
                resume_speed: self.line.speed,
            },
        })
    }

    /// An empty line in this configuration's mode.
    pub fn build_line(&self) -> Result<LineState, EnvError> {
        Ok(LineState::new(
            self.line,
            self.material,
            self.ambient,
            self.zones.to_zones()?,
            self.movement()?,
        )?)
    }

    pub fn initial_head_pos(&self) -> f64 {
        match self.mode {
            Mode::Normal => self.episode.normal_head_pos,
            Mode::WarmHolding => self.episode.hold_head_pos,
        }
    }

    pub fn initial_profile(&self) -> InitialProfile {
        match self.mode {
            Mode::Normal => self.episode.normal_profile,
            Mode::WarmHolding => self.episode.hold_profile,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.line.n_segments + 3
    }

    pub fn act_dim(&self) -> usize {
        self.zones.n_learnable()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub parts: RewardParts,
    /// Powers applied to the learnable zones after masking, W.
    pub powers: Vec<f64>,
    /// Powers before masking, W.
    pub requested: Vec<f64>,
    pub temps: Vec<f64>,
    pub head_pos: f64,
    pub time: f64,
    pub pieces: Vec<Piece>,
}

impl StepInfo {
    pub fn max_temp(&self) -> f64 {
        self.temps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub pieces: Vec<Piece>,
    pub total_reward: f64,
    pub step_count: u64,
    pub overheat: bool,
}

/// The forging line as an episodic environment.
#[derive(Debug, Clone)]
pub struct ForgeEnv {
    cfg: EnvConfig,
    state: Option<LineState>,
    bar: BarId,
    done: bool,
    total_reward: f64,
    peak_temp: f64,
}

impl ForgeEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: None,
            bar: 0,
            done: false,
            total_reward: 0.0,
            peak_temp: f64::NEG_INFINITY,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn line(&self) -> Option<&LineState> {
        self.state.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Starts an episode from an explicit head-first temperature profile.
    pub fn reset_with(&mut self, temps: Vec<f64>) -> Result<Vec<f64>, EnvError> {
        let mut line = self.cfg.build_line()?;
        self.peak_temp = temps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.bar = line.add_bar(self.cfg.initial_head_pos(), temps)?;
        self.state = Some(line);
        self.done = false;
        self.total_reward = 0.0;
        self.observation()
    }

    fn observation(&self) -> Result<Vec<f64>, EnvError> {
        let line = self.state.as_ref().ok_or(EnvError::NotReset)?;
        let obs = line.observe_bar(self.bar)?;
        encode_state(
            &obs,
            self.cfg.reward.hard_max_temp,
            self.cfg.line.band_length,
            self.cfg.episode.horizon_steps,
        )
    }

    /// Summary of the current episode; pieces are those sheared so far.
    pub fn outcome(&self) -> Option<EpisodeOutcome> {
        let line = self.state.as_ref()?;
        Some(EpisodeOutcome {
            pieces: line.pieces.clone(),
            total_reward: self.total_reward,
            step_count: line.step_index,
            overheat: self.peak_temp > self.cfg.reward.hard_max_temp,
        })
    }
}

impl Env for ForgeEnv {
    type Info = StepInfo;

    fn obs_dim(&self) -> usize {
        self.cfg.obs_dim()
    }

    fn act_dim(&self) -> usize {
        self.cfg.act_dim()
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let temps = self
            .cfg
            .initial_profile()
            .sample(self.cfg.line.n_segments, &mut rng);
        self.reset_with(temps)
    }

    fn step(&mut self, action: &[f64]) -> Result<Step<StepInfo>, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        let expected = self.cfg.act_dim();
        if action.len() != expected {
            return Err(EnvError::ActionDim {
                expected,
                got: action.len(),
            });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(EnvError::NonFinite("action"));
        }
        let line = self.state.as_mut().ok_or(EnvError::NotReset)?;
        let requested = decode_action(action, self.cfg.zones.p_max);
        let powers = if self.cfg.episode.safety_mask {
            let bar = line.bar(self.bar).ok_or(TwinError::UnknownBar(self.bar))?;
            safety_mask(&requested, line, bar, &self.cfg.reward)
        } else {
            requested.clone()
        };
        let before = line.pieces.len();
        let full = line.powers_with(&powers);
        line.step(&full)?;
        let bar = line.bar(self.bar).ok_or(TwinError::UnknownBar(self.bar))?;
        let parts = reward(
            &bar.temps,
            bar.head_pos,
            self.cfg.line.band_length,
            &self.cfg.reward,
        );
        let exited = bar.is_consumed() || bar.tail_pos() > self.cfg.line.band_length;
        self.done = exited || line.step_index >= self.cfg.episode.horizon_steps;
        let info = StepInfo {
            parts,
            powers,
            requested,
            temps: bar.temps.clone(),
            head_pos: bar.head_pos,
            time: line.time,
            pieces: line.pieces[before..].to_vec(),
        };
        self.peak_temp = self.peak_temp.max(info.max_temp());
        self.total_reward += parts.total;
        Ok(Step {
            obs: self.observation()?,
            reward: parts.total,
            done: self.done,
            info,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parses() {
        assert_eq!("normal".parse::<Mode>().unwrap(), Mode::Normal);
        assert_eq!("warm-holding".parse::<Mode>().unwrap(), Mode::WarmHolding);
        assert!("idle".parse::<Mode>().is_err());
    }

    #[test]
    fn same_seed_same_start() {
        let mut a = ForgeEnv::new(EnvConfig::new(Mode::Normal)).unwrap();
        let mut b = ForgeEnv::new(EnvConfig::new(Mode::Normal)).unwrap();
        assert_eq!(a.reset(7).unwrap(), b.reset(7).unwrap());
        assert_ne!(a.reset(8).unwrap(), b.reset(7).unwrap());
    }

    #[test]
    fn step_before_reset_and_after_done() {
        let mut e = ForgeEnv::new(EnvConfig::new(Mode::Normal)).unwrap();
        assert!(matches!(e.step(&[0.0; 3]), Err(EnvError::NotReset)));
        e.reset(1).unwrap();
        assert!(matches!(e.step(&[0.0; 2]), Err(EnvError::ActionDim { .. })));
        loop {
            if e.step(&[0.0; 3]).unwrap().done {
                break;
            }
        }
        assert!(matches!(e.step(&[0.0; 3]), Err(EnvError::StepAfterDone)));
    }

    #[test]
    fn hold_head_must_be_inside_band() {
        let mut cfg = EnvConfig::new(Mode::WarmHolding);
        cfg.episode.hold_head_pos = 3.0;
        assert!(ForgeEnv::new(cfg).is_err());
    }

    #[test]
    fn reward_matches_info() {
        let mut e = ForgeEnv::new(EnvConfig::new(Mode::WarmHolding)).unwrap();
        e.reset(3).unwrap();
        for _ in 0..20 {
            let s = e.step(&[0.2, -0.4, 0.9]).unwrap();
            let cfg = e.config();
            let r = reward(
                &s.info.temps,
                s.info.head_pos,
                cfg.line.band_length,
                &cfg.reward,
            );
            assert_eq!(r.total, s.reward);
        }
    }
}
