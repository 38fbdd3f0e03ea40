use crate::twin::{LineState, RawObservation, SteelBar};

use super::{EnvError, RewardConfig};

/// `[temps / hard_max..., head / band, tail / band, step / horizon]`.
pub fn encode_state(
    obs: &RawObservation,
    hard_max_temp: f64,
    band_length: f64,
    horizon_steps: u64,
) -> Result<Vec<f64>, EnvError> {
    let finite = obs.temps.iter().all(|t| t.is_finite())
        && obs.head_pos.is_finite()
        && obs.tail_pos.is_finite();
    if !finite {
        return Err(EnvError::NonFinite("observation"));
    }
    let mut v = Vec::with_capacity(obs.temps.len() + 3);
    v.extend(obs.temps.iter().map(|t| t / hard_max_temp));
    v.push(obs.head_pos / band_length);
    v.push(obs.tail_pos / band_length);
    v.push(obs.step_index as f64 / horizon_steps as f64);
    Ok(v)
}

/// Maps network outputs in [-1, 1] to powers in [0, p_max]; anything outside is clamped.
pub fn decode_action(action: &[f64], p_max: f64) -> Vec<f64> {
    action
        .iter()
        .map(|a| ((a + 1.0) / 2.0 * p_max).clamp(0.0, p_max))
        .collect()
}

/// Zeroes the power of any learnable zone that currently covers a segment
/// within `hard_mask_margin` of `hard_max_temp`. `powers` holds one entry
/// per learnable zone.
pub fn safety_mask(
    powers: &[f64],
    state: &LineState,
    bar: &SteelBar,
    cfg: &RewardConfig,
) -> Vec<f64> {
    let limit = cfg.hard_max_temp - cfg.hard_mask_margin;
    let mut out = powers.to_vec();
    let learnable = state
        .zones
        .iter()
        .enumerate()
        .filter(|(_, z)| z.learnable)
        .map(|(k, _)| k);
    for (slot, zone) in learnable.enumerate() {
        let hot = state
            .segments_under_zone(bar, zone)
            .into_iter()
            .any(|i| bar.temps[i] >= limit);
        if hot {
            out[slot] = 0.0;
        }
    }
    out
}
