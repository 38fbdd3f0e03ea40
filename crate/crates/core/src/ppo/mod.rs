//! Clipped-surrogate policy optimisation with a learned value baseline.

mod gae;
mod objective;
pub mod toy;

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, EnvConfig, EnvError, EpisodeOutcome, ForgeEnv, Mode, StepInfo};
use crate::nn::{self, Adam, Checkpoint, GaussianPolicy, Mlp, NnError, ValueNorm};
use crate::seed;

pub use gae::{compute_gae, normalize};
pub use objective::{clipped_objective, ClipStats};

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("length mismatch: {rewards} rewards, {values} values, {dones} done flags")]
    Length {
        rewards: usize,
        values: usize,
        dones: usize,
    },
    #[error("environment failed in epoch {epoch}, episode {episode}: {source}")]
    Env {
        epoch: usize,
        episode: u64,
        #[source]
        source: EnvError,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("non-finite {what} in epoch {epoch} (policy iteration {iter})")]
    NonFinite {
        what: &'static str,
        epoch: usize,
        iter: usize,
    },
    #[error("invalid ppo configuration: {0}")]
    Config(String),
    #[error("checkpoint does not fit this environment: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub clip_ratio: f64,
    pub lr_pi: f64,
    pub lr_v: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub steps_per_epoch: usize,
    pub epochs: usize,
    pub train_pi_iters: usize,
    pub train_v_iters: usize,
    pub target_kl: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_ratio: 0.02,
            lr_pi: 1e-4,
            lr_v: 1e-3,
            gamma: 0.99,
            lambda: 0.97,
            steps_per_epoch: 4000,
            epochs: 50,
            train_pi_iters: 80,
            train_v_iters: 80,
            target_kl: 0.01,
            hidden: vec![64, 64],
            init_log_std: 0.5f64.ln(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::Config(m.into()));
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return bad("ppo.clip_ratio must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("ppo.gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("ppo.lambda must lie in [0, 1]");
        }
        if !(self.lr_pi > 0.0 && self.lr_v > 0.0) {
            return bad("ppo learning rates must be positive");
        }
        if self.steps_per_epoch == 0 {
            return bad("ppo.steps_per_epoch must be positive");
        }
        if !(self.target_kl > 0.0) {
            return bad("ppo.target_kl must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("ppo.hidden sizes must be positive");
        }
        if !self.init_log_std.is_finite() {
            return bad("ppo.init_log_std must be finite");
        }
        Ok(())
    }
}

/// Policy and critic with their optimisers.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub policy: GaussianPolicy,
    /// Predicts standardised value targets; see `value_norm`.
    pub critic: Mlp,
    pub value_norm: ValueNorm,
    pub pi_opt: Adam,
    pub v_opt: Adam,
}

impl Agent {
    pub fn new<R: Rng>(
        obs_dim: usize,
        act_dim: usize,
        cfg: &PpoConfig,
        rng: &mut R,
    ) -> Result<Self, PpoError> {
        let policy = GaussianPolicy::new(obs_dim, &cfg.hidden, act_dim, cfg.init_log_std, rng)?;
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let critic = Mlp::init(&sizes, 1.0, rng)?;
        Ok(Self {
            pi_opt: Adam::new(policy.n_params(), cfg.lr_pi),
            v_opt: Adam::new(critic.n_params(), cfg.lr_v),
            policy,
            critic,
            value_norm: ValueNorm::default(),
        })
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64, PpoError> {
        Ok(self
            .value_norm
            .denormalize(self.critic.forward_one(obs)?[0]))
    }

    /// Folds new value targets into the normaliser, adjusting the critic's
    /// output layer so its predictions in return units are unchanged.
    pub fn observe_returns(&mut self, ret: &[f64]) {
        let old = self.value_norm;
        self.value_norm.extend(ret);
        let (s0, s1) = (old.std(), self.value_norm.std());
        self.critic
            .affine_output(s0 / s1, (old.mean - self.value_norm.mean) / s1);
    }

    pub fn to_checkpoint(&self, mode: Mode) -> Checkpoint {
        Checkpoint {
            mode,
            obs_dim: self.critic.input_dim(),
            act_dim: self.policy.act_dim(),
            policy: self.policy.clone(),
            critic: self.critic.clone(),
            value_norm: self.value_norm,
            pi_opt: self.pi_opt.clone(),
            v_opt: self.v_opt.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Self {
        Self {
            policy: ck.policy,
            critic: ck.critic,
            value_norm: ck.value_norm,
            pi_opt: ck.pi_opt,
            v_opt: ck.v_opt,
        }
    }

    /// Action for one observation: the mean, or a draw from `rng` when `stochastic`.
    pub fn act<R: Rng>(
        &self,
        obs: &[f64],
        stochastic: bool,
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64), PpoError> {
        let mu = self.policy.mean_action(obs)?;
        let noise: Vec<f64> = if stochastic {
            (0..mu.len()).map(|_| rng.sample(StandardNormal)).collect()
        } else {
            vec![0.0; mu.len()]
        };
        Ok(nn::gaussian_sample_and_logprob(
            &mu,
            &self.policy.log_std,
            &noise,
        ))
    }
}

/// One epoch of experience, ready for an update.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub act: Array2<f64>,
    pub logp: Vec<f64>,
    pub adv: Vec<f64>,
    pub ret: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Policy loss before the first gradient step.
    pub pi_loss: f64,
    /// Value loss before the first gradient step.
    pub v_loss: f64,
    /// Value loss after the last gradient step.
    pub v_loss_after: f64,
    /// KL estimate at the last evaluated policy.
    pub kl: f64,
    pub clip_frac: f64,
    pub pi_iters: usize,
}

/// Mean squared error in standardised units.
fn value_loss(critic: &Mlp, norm: &ValueNorm, batch: &Batch) -> Result<(f64, Vec<f64>), PpoError> {
    let cache = critic.forward(batch.obs.view())?;
    let v = nn::column(cache.output());
    let n = batch.ret.len() as f64;
    let target: Array1<f64> = batch.ret.iter().map(|r| norm.normalize(*r)).collect();
    let diff: Array1<f64> = &v - &target;
    let loss = diff.mapv(|d| d * d).sum() / n;
    let up = diff.mapv(|d| 2.0 * d / n).insert_axis(ndarray::Axis(1));
    let (g, _) = critic.backward(&cache, up.view())?;
    Ok((loss, g))
}

/// Policy steps on the clipped surrogate with KL early stopping, then value regression.
pub fn update(
    agent: &mut Agent,
    batch: &Batch,
    cfg: &PpoConfig,
    epoch: usize,
) -> Result<UpdateStats, PpoError> {
    let mut stats = UpdateStats {
        pi_loss: 0.0,
        v_loss: 0.0,
        v_loss_after: 0.0,
        kl: 0.0,
        clip_frac: 0.0,
        pi_iters: 0,
    };
    for iter in 0..cfg.train_pi_iters {
        let (logp, cache) = agent
            .policy
            .logprob_batch(batch.obs.view(), batch.act.view())?;
        let logp = logp.to_vec();
        let clip = clipped_objective(&logp, &batch.logp, &batch.adv, cfg.clip_ratio);
        if !clip.loss.is_finite() {
            return Err(PpoError::NonFinite {
                what: "policy loss",
                epoch,
                iter,
            });
        }
        if iter == 0 {
            stats.pi_loss = clip.loss;
        }
        stats.kl = clip.approx_kl;
        stats.clip_frac = clip.clip_frac;
        if clip.approx_kl > cfg.target_kl {
            break;
        }
        let grads = agent
            .policy
            .logprob_backward(&cache, ndarray::ArrayView1::from(clip.grad.as_slice()))?;
        agent
            .pi_opt
            .update_parts(&mut agent.policy.param_parts(), &grads)
            .map_err(|_| PpoError::NonFinite {
                what: "policy gradient",
                epoch,
                iter,
            })?;
        stats.pi_iters += 1;
    }
    for iter in 0..cfg.train_v_iters {
        let (loss, g) = value_loss(&agent.critic, &agent.value_norm, batch)?;
        if !loss.is_finite() {
            return Err(PpoError::NonFinite {
                what: "value loss",
                epoch,
                iter,
            });
        }
        if iter == 0 {
            stats.v_loss = loss;
        }
        agent.v_opt.update(&mut agent.critic.params, &g)?;
    }
    stats.v_loss_after = value_loss(&agent.critic, &agent.value_norm, batch)?.0;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Environment steps so far.
    pub steps: usize,
    /// Mean return of episodes finished this epoch.
    pub mean_return: Option<f64>,
    /// Mean return of the last 100 finished episodes.
    pub trailing100_return: Option<f64>,
    pub pi_loss: f64,
    pub v_loss: f64,
    pub kl: f64,
    pub clip_frac: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub last: Agent,
    /// Agent after the epoch with the highest trailing return.
    pub best: Agent,
    pub metrics: Vec<EpochMetrics>,
    pub episode_returns: Vec<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Collects `steps_per_epoch` transitions per epoch and updates after each.
pub fn train<E: Env>(
    env: &mut E,
    cfg: &PpoConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutput, PpoError> {
    cfg.validate()?;
    let (obs_dim, act_dim) = (env.obs_dim(), env.act_dim());
    let mut init_rng = seed::stream(seed, "init");
    let mut noise_rng = seed::stream(seed, "rollout-0");
    let mut reset_rng = seed::stream(seed, "reset");
    let mut agent = Agent::new(obs_dim, act_dim, cfg, &mut init_rng)?;
    let mut best: Option<(f64, Agent)> = None;
    let mut trailing: VecDeque<f64> = VecDeque::with_capacity(100);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut all_returns = Vec::new();
    let mut episode = 0u64;
    let n = cfg.steps_per_epoch;

    for epoch in 0..cfg.epochs {
        let env_err = |source, episode| PpoError::Env {
            epoch,
            episode,
            source,
        };
        let mut obs_rows = Vec::with_capacity(n);
        let mut act_rows = Vec::with_capacity(n);
        let (mut logps, mut rews, mut vals, mut dones) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        let mut finished = Vec::new();
        let mut obs = env
            .reset(reset_rng.next_u64())
            .map_err(|e| env_err(e, episode))?;
        let mut ep_ret = 0.0;
        let mut last_value = 0.0;
        for t in 0..n {
            let (a, lp) = agent.act(&obs, true, &mut noise_rng)?;
            let v = agent.value(&obs)?;
            let step = env.step(&a).map_err(|e| env_err(e, episode))?;
            obs_rows.push(std::mem::replace(&mut obs, step.obs));
            act_rows.push(a);
            logps.push(lp);
            rews.push(step.reward);
            vals.push(v);
            dones.push(step.done);
            ep_ret += step.reward;
            if step.done {
                finished.push(ep_ret);
                episode += 1;
                ep_ret = 0.0;
                if t + 1 < n {
                    obs = env
                        .reset(reset_rng.next_u64())
                        .map_err(|e| env_err(e, episode))?;
                }
            } else if t + 1 == n {
                last_value = agent.value(&obs)?;
            }
        }
        let (mut adv, ret) = compute_gae(&rews, &vals, &dones, last_value, cfg.gamma, cfg.lambda)?;
        normalize(&mut adv);
        agent.observe_returns(&ret);
        let batch = Batch {
            obs: nn::rows(&obs_rows),
            act: nn::rows(&act_rows),
            logp: logps,
            adv,
            ret,
        };
        let stats = update(&mut agent, &batch, cfg, epoch)?;

        for r in &finished {
            if trailing.len() == 100 {
                trailing.pop_front();
            }
            trailing.push_back(*r);
        }
        all_returns.extend_from_slice(&finished);
        let m = EpochMetrics {
            epoch,
            steps: (epoch + 1) * n,
            mean_return: mean(finished.iter().copied()),
            trailing100_return: mean(trailing.iter().copied()),
            pi_loss: stats.pi_loss,
            v_loss: stats.v_loss,
            kl: stats.kl,
            clip_frac: stats.clip_frac,
        };
        if let Some(score) = m.trailing100_return {
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, agent.clone()));
            }
        }
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(TrainOutput {
        best: best.map_or_else(|| agent.clone(), |(_, a)| a),
        last: agent,
        metrics,
        episode_returns: all_returns,
    })
}

/// Runs one episode of `env` under `agent`, calling `on_step` after every transition.
pub fn run_episode<R: Rng>(
    agent: &Agent,
    env: &mut ForgeEnv,
    reset_seed: u64,
    stochastic: bool,
    rng: &mut R,
    mut on_step: impl FnMut(&StepInfo, f64),
) -> Result<EpisodeOutcome, EnvError> {
    let mut obs = env.reset(reset_seed)?;
    loop {
        let (a, _) = agent
            .act(&obs, stochastic, rng)
            .map_err(|_| EnvError::NonFinite("policy output"))?;
        let step = env.step(&a)?;
        on_step(&step.info, step.reward);
        obs = step.obs;
        if step.done {
            break;
        }
    }
    Ok(env.outcome().expect("episode was reset"))
}

/// Evaluates a checkpoint over `n_episodes` fresh episodes.
pub fn evaluate(
    ck: &Checkpoint,
    cfg: &EnvConfig,
    n_episodes: usize,
    stochastic: bool,
    seed: u64,
    mut on_step: impl FnMut(usize, &StepInfo, f64),
) -> Result<Vec<EpisodeOutcome>, PpoError> {
    if ck.mode != cfg.mode {
        return Err(PpoError::Mismatch(format!(
            "checkpoint trained for {} mode, environment is {}",
            ck.mode, cfg.mode
        )));
    }
    if ck.obs_dim != cfg.obs_dim() || ck.act_dim != cfg.act_dim() {
        return Err(PpoError::Mismatch(format!(
            "checkpoint has obs/act dims {}/{}, environment {}/{}",
            ck.obs_dim,
            ck.act_dim,
            cfg.obs_dim(),
            cfg.act_dim()
        )));
    }
    let agent = Agent::from_checkpoint(ck.clone());
    let mut env = ForgeEnv::new(cfg.clone()).map_err(|source| PpoError::Env {
        epoch: 0,
        episode: 0,
        source,
    })?;
    let mut reset_rng = seed::stream(seed, "eval-reset");
    let mut noise_rng = seed::stream(seed, "eval-noise");
    (0..n_episodes)
        .map(|ep| {
            run_episode(
                &agent,
                &mut env,
                reset_rng.next_u64(),
                stochastic,
                &mut noise_rng,
                |info, r| on_step(ep, info, r),
            )
            .map_err(|source| PpoError::Env {
                epoch: 0,
                episode: ep as u64,
                source,
            })
        })
        .collect()
}
