use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// °C, applied to every segment.
    pub t_target: f64,
    /// [low, high] clip of the evenness term.
    pub even_clip: [f64; 2],
    /// MAE floor before taking the log, °C.
    pub mae_floor: f64,
    pub move_scale: f64,
    pub heat_penalty: f64,
    /// °C; the heat penalty fires strictly above this.
    pub heat_threshold: f64,
    /// °C
    pub hard_max_temp: f64,
    /// °C below `hard_max_temp` at which a zone is switched off.
    pub hard_mask_margin: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            t_target: 1070.0,
            even_clip: [-2.0, 1.0],
            mae_floor: 0.1,
            move_scale: 3.0,
            heat_penalty: -5.0,
            heat_threshold: 1090.0,
            hard_max_temp: 1100.0,
            hard_mask_margin: 5.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.even_clip[0] < self.even_clip[1]) {
            return Err("reward.even_clip: low must be below high".into());
        }
        if !(self.mae_floor > 0.0) {
            return Err("reward.mae_floor must be positive".into());
        }
        if !(self.move_scale >= 0.0) {
            return Err("reward.move_scale must be non-negative".into());
        }
        if !(self.heat_penalty <= 0.0) {
            return Err("reward.heat_penalty must be non-positive".into());
        }
        if !(self.heat_threshold <= self.hard_max_temp) {
            return Err("reward.heat_threshold must not exceed reward.hard_max_temp".into());
        }
        if !(self.hard_mask_margin >= 0.0) {
            return Err("reward.hard_mask_margin must be non-negative".into());
        }
        if ![self.t_target, self.heat_threshold, self.hard_max_temp]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err("reward temperatures must be finite".into());
        }
        Ok(())
    }

    /// Smallest and largest possible total reward.
    pub fn bounds(&self) -> (f64, f64) {
        (
            self.even_clip[0] + self.heat_penalty,
            self.even_clip[1] + self.move_scale,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardParts {
    pub even: f64,
    pub heat: f64,
    pub movement: f64,
    pub total: f64,
}

pub fn mean_abs_error(temps: &[f64], target: f64) -> f64 {
    temps.iter().map(|t| (t - target).abs()).sum::<f64>() / temps.len() as f64
}

/// Reward for the bar state after a step.
pub fn reward(temps: &[f64], head_pos: f64, band_length: f64, cfg: &RewardConfig) -> RewardParts {
    let mae = mean_abs_error(temps, cfg.t_target).max(cfg.mae_floor);
    let even = (-mae.log10()).clamp(cfg.even_clip[0], cfg.even_clip[1]);
    let movement = cfg.move_scale * (head_pos / band_length).clamp(0.0, 1.0);
    let max_t = temps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let heat = if max_t > cfg.heat_threshold {
        cfg.heat_penalty
    } else {
        0.0
    };
    RewardParts {
        even,
        heat,
        movement,
        total: even + heat + movement,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_mae(mae: f64) -> f64 {
        let cfg = RewardConfig::default();
        reward(&[1070.0 + mae; 4], 0.0, 30.0, &cfg).even
    }

    #[test]
    fn evenness_term() {
        assert!(at_mae(1.0).abs() < 1e-12);
        assert_eq!(at_mae(100.0), -2.0);
        assert_eq!(at_mae(500.0), -2.0);
        assert!((at_mae(10.0) + 1.0).abs() < 1e-12);
        assert_eq!(at_mae(0.0), 1.0);
        assert_eq!(at_mae(0.01), 1.0);
    }

    #[test]
    fn head_at_band_end_with_unit_mae() {
        let cfg = RewardConfig::default();
        let temps = [1069.0, 1071.0];
        let r = reward(&temps, 30.0, 30.0, &cfg);
        assert!((r.total - 3.0).abs() < 1e-12);
        assert_eq!(r.heat, 0.0);
    }

    #[test]
    fn movement_is_clamped() {
        let cfg = RewardConfig::default();
        assert_eq!(reward(&[1070.0], -2.0, 30.0, &cfg).movement, 0.0);
        assert_eq!(reward(&[1070.0], 34.0, 30.0, &cfg).movement, 3.0);
        assert!((reward(&[1070.0], 15.0, 30.0, &cfg).movement - 1.5).abs() < 1e-12);
    }

    #[test]
    fn heat_penalty_fires_above_threshold() {
        let cfg = RewardConfig::default();
        assert_eq!(reward(&[1090.0, 1000.0], 0.0, 30.0, &cfg).heat, 0.0);
        assert_eq!(reward(&[1090.5, 1000.0], 0.0, 30.0, &cfg).heat, -5.0);
    }

    #[test]
    fn bounds_match_defaults() {
        assert_eq!(RewardConfig::default().bounds(), (-7.0, 4.0));
    }
}
