mod common;

use forge_twin::env::{Env, EnvConfig, ForgeEnv, Mode};
use forge_twin::ppo::{
    self, clipped_objective, compute_gae, toy::PointMass, update, Agent, Batch, PpoConfig,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::brute_gae;

fn episode() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-7.0f64..4.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(prop::bool::weighted(0.1), n),
        )
    })
}

proptest! {
    #[test]
    fn gae_matches_direct_sum(
        (r, v, d) in episode(),
        last in -100.0f64..100.0,
        gamma in 0.5f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let (adv, ret) = compute_gae(&r, &v, &d, last, gamma, lambda).unwrap();
        let want = brute_gae(&r, &v, &d, last, gamma, lambda);
        for t in 0..r.len() {
            prop_assert!((adv[t] - want[t]).abs() <= 1e-9 * (1.0 + want[t].abs()));
            prop_assert!((ret[t] - adv[t] - v[t]).abs() <= 1e-9 * (1.0 + ret[t].abs()));
        }
    }

    #[test]
    fn zero_lambda_is_td_residual((r, v, d) in episode(), last in -10.0f64..10.0) {
        let (adv, _) = compute_gae(&r, &v, &d, last, 0.99, 0.0).unwrap();
        for t in 0..r.len() {
            let next = if d[t] { 0.0 } else { v.get(t + 1).copied().unwrap_or(last) };
            prop_assert!((adv[t] - (r[t] + 0.99 * next - v[t])).abs() < 1e-9);
        }
    }

    #[test]
    fn surrogate_is_pessimistic(
        pairs in prop::collection::vec((-3.0f64..0.0, -0.5f64..0.5, -3.0f64..3.0), 1..30),
        eps in 0.01f64..0.5,
    ) {
        let old: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let new: Vec<f64> = pairs.iter().map(|p| p.0 + p.1).collect();
        let adv: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        let s = clipped_objective(&new, &old, &adv, eps);
        let unclipped = new.iter().zip(&old).zip(&adv)
            .map(|((a, b), c)| (a - b).exp() * c).sum::<f64>() / adv.len() as f64;
        prop_assert!(-s.loss <= unclipped + 1e-12);
        prop_assert!((0.0..=1.0).contains(&s.clip_frac));
    }
}

#[test]
fn surrogate_at_old_policy() {
    let lp = [-1.0, -2.0, -0.5];
    let adv = [1.0, -2.0, 0.5];
    let s = clipped_objective(&lp, &lp, &adv, 0.2);
    assert!((s.loss - 0.5 / 3.0).abs() < 1e-15);
    assert_eq!((s.clip_frac, s.approx_kl), (0.0, 0.0));
    assert_eq!(s.grad, vec![-1.0 / 3.0, 2.0 / 3.0, -0.5 / 3.0]);
}

fn batch(agent: &Agent, n: usize, rng: &mut ChaCha8Rng) -> Batch {
    let obs = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
    let mut act = Array2::zeros((n, 2));
    let mut logp = Vec::new();
    for i in 0..n {
        let o: Vec<f64> = obs.row(i).to_vec();
        let (a, lp) = agent.act(&o, true, rng).unwrap();
        act.row_mut(i).assign(&ndarray::ArrayView1::from(&a));
        logp.push(lp);
    }
    let adv: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ret: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    Batch {
        obs,
        act,
        logp,
        adv,
        ret,
    }
}

#[test]
fn kl_stop_bounds_policy_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = PpoConfig {
        hidden: vec![8],
        lr_pi: 1e-2,
        ..PpoConfig::default()
    };
    let mut agent = Agent::new(4, 2, &cfg, &mut rng).unwrap();
    let fresh = agent.clone();
    let b = batch(&agent, 64, &mut rng);
    let s = update(&mut agent, &b, &cfg, 0).unwrap();
    assert!(s.pi_iters <= cfg.train_pi_iters);

    let tight = PpoConfig {
        target_kl: 1e-12,
        ..cfg.clone()
    };
    let mut agent = fresh;
    let s = update(&mut agent, &b, &tight, 0).unwrap();
    assert!(s.pi_iters >= 1 && s.pi_iters < tight.train_pi_iters);
    assert!(s.kl > tight.target_kl);
}

#[test]
fn value_regression_reduces_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = PpoConfig {
        hidden: vec![16, 16],
        ..PpoConfig::default()
    };
    let mut agent = Agent::new(4, 2, &cfg, &mut rng).unwrap();
    let b = batch(&agent, 128, &mut rng);
    agent.observe_returns(&b.ret);
    let s = update(&mut agent, &b, &cfg, 0).unwrap();
    assert!(s.v_loss_after < s.v_loss);
}

#[test]
fn return_statistics_preserve_value_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = PpoConfig::default();
    let mut agent = Agent::new(4, 2, &cfg, &mut rng).unwrap();
    let obs = [0.3, -0.2, 0.9, 0.1];
    let before = agent.value(&obs).unwrap();
    agent.observe_returns(&[120.0, -340.0, 55.5, 10.0]);
    agent.observe_returns(&[900.0, 901.0]);
    let after = agent.value(&obs).unwrap();
    assert!((before - after).abs() < 1e-9 * (1.0 + before.abs()));
}

#[test]
fn checkpoint_round_trip_keeps_behaviour() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut agent = Agent::new(43, 3, &PpoConfig::default(), &mut rng).unwrap();
    agent.observe_returns(&[3.0, -4.0, 8.0]);
    let ck = agent.to_checkpoint(Mode::Normal);
    let back = Agent::from_checkpoint(ck.clone());
    assert_eq!(back.to_checkpoint(Mode::Normal), ck);
    let obs = vec![0.9; 43];
    assert_eq!(agent.value(&obs).unwrap(), back.value(&obs).unwrap());
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(
        agent.act(&obs, true, &mut r1).unwrap(),
        back.act(&obs, true, &mut r2).unwrap()
    );
}

#[test]
fn short_forge_run_reports_every_epoch() {
    let mut env = ForgeEnv::new(EnvConfig::new(Mode::Normal)).unwrap();
    let cfg = PpoConfig {
        epochs: 2,
        steps_per_epoch: 200,
        ..PpoConfig::default()
    };
    let mut seen = 0;
    let out = ppo::train(&mut env, &cfg, 3, |_| seen += 1).unwrap();
    assert_eq!(seen, 2);
    let steps: Vec<usize> = out.metrics.iter().map(|m| m.steps).collect();
    assert_eq!(steps, vec![200, 400]);
    assert!(out
        .metrics
        .iter()
        .all(|m| m.kl.is_finite() && m.v_loss.is_finite()));
}

#[test]
fn training_is_seed_deterministic() {
    let cfg = PpoConfig {
        epochs: 2,
        steps_per_epoch: 300,
        ..PpoConfig::default()
    };
    let run = |seed| {
        let mut env = PointMass::default();
        ppo::train(&mut env, &cfg, seed, |_| {}).unwrap()
    };
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.episode_returns, b.episode_returns);
    assert_ne!(a.episode_returns, c.episode_returns);
}

#[test]
fn eval_rejects_wrong_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let env = ForgeEnv::new(EnvConfig::new(Mode::Normal)).unwrap();
    let agent = Agent::new(
        env.obs_dim(),
        env.act_dim(),
        &PpoConfig::default(),
        &mut rng,
    )
    .unwrap();
    let ck = agent.to_checkpoint(Mode::WarmHolding);
    assert!(ppo::evaluate(
        &ck,
        &EnvConfig::new(Mode::Normal),
        1,
        false,
        1,
        |_, _, _| {}
    )
    .is_err());
}
