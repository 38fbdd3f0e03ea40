use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use rand::Rng;

use super::{Cache, Mlp, NnError};

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

/// Log-density of a diagonal Gaussian.
pub fn gaussian_logprob(mu: &[f64], log_std: &[f64], a: &[f64]) -> f64 {
    mu.iter()
        .zip(log_std)
        .zip(a)
        .map(|((m, ls), x)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LOG_2PI
        })
        .sum()
}

/// Draws `mu + exp(log_std) * noise` and returns it with its log-density.
pub fn gaussian_sample_and_logprob(mu: &[f64], log_std: &[f64], noise: &[f64]) -> (Vec<f64>, f64) {
    let a: Vec<f64> = mu
        .iter()
        .zip(log_std)
        .zip(noise)
        .map(|((m, ls), n)| m + ls.exp() * n)
        .collect();
    let lp = gaussian_logprob(mu, log_std, &a);
    (a, lp)
}

/// Diagonal Gaussian policy: state-dependent mean, state-independent log-std.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    pub log_std: Vec<f64>,
}

/// Forward state needed to differentiate a batch of log-probabilities.
#[derive(Debug)]
pub struct PolicyCache {
    net: Cache,
    actions: Array2<f64>,
}

impl PolicyCache {
    pub fn means(&self) -> &Array2<f64> {
        self.net.output()
    }
}

impl GaussianPolicy {
    pub fn new<R: Rng>(
        obs_dim: usize,
        hidden: &[usize],
        act_dim: usize,
        init_log_std: f64,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(act_dim);
        Ok(Self {
            mean: Mlp::init(&sizes, 0.01, rng)?,
            log_std: vec![init_log_std; act_dim],
        })
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn n_params(&self) -> usize {
        self.mean.n_params() + self.log_std.len()
    }

    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>, NnError> {
        self.mean.forward_one(obs)
    }

    /// Samples an action for one observation using the supplied standard-normal noise.
    pub fn sample(&self, obs: &[f64], noise: &[f64]) -> Result<(Vec<f64>, f64), NnError> {
        let mu = self.mean_action(obs)?;
        if noise.len() != mu.len() {
            return Err(NnError::Shape {
                what: "noise",
                expected: mu.len(),
                got: noise.len(),
            });
        }
        Ok(gaussian_sample_and_logprob(&mu, &self.log_std, noise))
    }

    /// Log-probabilities of `actions` (one row per sample).
    pub fn logprob_batch(
        &self,
        obs: ArrayView2<'_, f64>,
        actions: ArrayView2<'_, f64>,
    ) -> Result<(Array1<f64>, PolicyCache), NnError> {
        if actions.ncols() != self.act_dim() || actions.nrows() != obs.nrows() {
            return Err(NnError::Shape {
                what: "action batch",
                expected: obs.nrows() * self.act_dim(),
                got: actions.len(),
            });
        }
        let net = self.mean.forward(obs)?;
        let mu = net.output();
        let inv_var: Array1<f64> = self.log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
        let log_norm: f64 = self.log_std.iter().map(|ls| ls + HALF_LOG_2PI).sum();
        let mut lp = Array1::zeros(obs.nrows());
        Zip::from(&mut lp)
            .and(mu.rows())
            .and(actions.rows())
            .for_each(|out, m, a| {
                let mut acc = 0.0;
                for j in 0..m.len() {
                    let d = a[j] - m[j];
                    acc += d * d * inv_var[j];
                }
                *out = -0.5 * acc - log_norm;
            });
        Ok((
            lp,
            PolicyCache {
                net,
                actions: actions.to_owned(),
            },
        ))
    }

    /// Gradient of `sum(upstream * logp)` as a flat vector: mean-net parameters then log-std.
    pub fn logprob_backward(
        &self,
        cache: &PolicyCache,
        upstream: ArrayView1<'_, f64>,
    ) -> Result<Vec<f64>, NnError> {
        let mu = cache.net.output();
        if upstream.len() != mu.nrows() {
            return Err(NnError::Shape {
                what: "upstream gradient",
                expected: mu.nrows(),
                got: upstream.len(),
            });
        }
        let inv_var: Vec<f64> = self.log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
        let mut d_mu = Array2::zeros(mu.dim());
        let mut d_log_std = vec![0.0; self.act_dim()];
        Zip::from(d_mu.rows_mut())
            .and(mu.rows())
            .and(cache.actions.rows())
            .and(&upstream)
            .for_each(|mut g, m, a, &u| {
                for j in 0..m.len() {
                    let d = a[j] - m[j];
                    g[j] = u * d * inv_var[j];
                    d_log_std[j] += u * (d * d * inv_var[j] - 1.0);
                }
            });
        let (mut grads, _) = self.mean.backward(&cache.net, d_mu.view())?;
        grads.extend(d_log_std);
        Ok(grads)
    }

    /// Per-dimension entropy of the policy in nats, summed.
    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|ls| 0.5 + 0.5 * (2.0 * PI).ln() + ls)
            .sum()
    }

    /// Mutable views of all trainable parameters in gradient order.
    pub fn param_parts(&mut self) -> [&mut [f64]; 2] {
        [&mut self.mean.params, &mut self.log_std]
    }
}
