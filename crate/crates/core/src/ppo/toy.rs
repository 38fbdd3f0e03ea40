//! A point mass on a line that should be steered to the origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Env, EnvError, Step};

#[derive(Debug, Clone)]
pub struct PointMass {
    pub max_steps: u32,
    /// Displacement per step at full action.
    pub gain: f64,
    pub start_range: f64,
    x: f64,
    t: u32,
    done: bool,
}

impl Default for PointMass {
    fn default() -> Self {
        Self {
            max_steps: 40,
            gain: 0.2,
            start_range: 2.0,
            x: 0.0,
            t: 0,
            done: true,
        }
    }
}

impl PointMass {
    pub fn position(&self) -> f64 {
        self.x
    }
}

impl Env for PointMass {
    type Info = ();

    fn obs_dim(&self) -> usize {
        1
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.x = rng.gen_range(-self.start_range..self.start_range);
        self.t = 0;
        self.done = false;
        Ok(vec![self.x])
    }

    fn step(&mut self, action: &[f64]) -> Result<Step<()>, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        let a = *action.first().ok_or(EnvError::ActionDim {
            expected: 1,
            got: 0,
        })?;
        if !a.is_finite() {
            return Err(EnvError::NonFinite("action"));
        }
        self.x += self.gain * a.clamp(-1.0, 1.0);
        self.t += 1;
        self.done = self.t >= self.max_steps;
        Ok(Step {
            obs: vec![self.x],
            reward: -self.x.abs(),
            done: self.done,
            info: (),
        })
    }
}
