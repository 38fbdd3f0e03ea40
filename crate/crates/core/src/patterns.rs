//! Grid search over warm-holding turn patterns at constant zone power.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{mean_abs_error, EnvConfig, EnvError, Mode};
use crate::twin::TwinError;

/// Patterns enumerated beyond this count are refused.
pub const MAX_CANDIDATES: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("candidate duration set is empty")]
    NoDurations,
    #[error("turn durations must be positive and finite, got {0}")]
    BadDuration(f64),
    #[error("n_turns must be at least 1")]
    NoTurns,
    #[error("constant power must be within [0, p_max], got {0} W")]
    BadPower(f64),
    #[error("grid of {0} patterns exceeds the limit of {MAX_CANDIDATES}")]
    TooLarge(u128),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// s
    pub durations: Vec<f64>,
    pub n_turns: usize,
    /// Only enumerate patterns that read the same reversed.
    pub palindromic: bool,
    /// W, applied to every learnable zone.
    pub constant_power: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            durations: vec![56.0, 60.0, 64.0, 68.0],
            n_turns: 8,
            palindromic: true,
            constant_power: 0.2e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternCandidate {
    pub turn_durations: Vec<f64>,
    /// Mean |T - T_target| over the bar at hold end, °C; `None` when infeasible.
    pub score: Option<f64>,
}

impl PatternCandidate {
    pub fn is_feasible(&self) -> bool {
        self.score.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Option<PatternCandidate>,
    /// Feasible candidates by ascending score, then infeasible ones.
    pub ranking: Vec<PatternCandidate>,
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Ranking order: feasible before infeasible, lower score first, then lexicographic.
pub fn rank_order(a: &PatternCandidate, b: &PatternCandidate) -> Ordering {
    match (a.score, b.score) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| lex(&a.turn_durations, &b.turn_durations))
}

/// Every assignment of `durations` to `n_turns` turns, in lexicographic order.
pub fn enumerate(
    durations: &[f64],
    n_turns: usize,
    palindromic: bool,
) -> Result<Vec<Vec<f64>>, PatternError> {
    if durations.is_empty() {
        return Err(PatternError::NoDurations);
    }
    if let Some(d) = durations.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(PatternError::BadDuration(*d));
    }
    if n_turns == 0 {
        return Err(PatternError::NoTurns);
    }
    let mut set = durations.to_vec();
    set.sort_by(f64::total_cmp);
    set.dedup();
    let free = if palindromic {
        n_turns.div_ceil(2)
    } else {
        n_turns
    };
    let total = (set.len() as u128)
        .checked_pow(free as u32)
        .unwrap_or(u128::MAX);
    if total > MAX_CANDIDATES as u128 {
        return Err(PatternError::TooLarge(total));
    }
    let k = set.len();
    let mut out = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; free];
    loop {
        let half: Vec<f64> = idx.iter().map(|&i| set[i]).collect();
        let full = if palindromic {
            let mut p = half.clone();
            p.extend(half[..n_turns / 2].iter().rev());
            p
        } else {
            half
        };
        out.push(full);
        // odometer, last position fastest
        let mut pos = free;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Holds one bar at the hold-profile mean for `hold_duration` under `pattern`.
///
/// Returns `None` when the bar leaves the band (reaches the shear or backs
/// past the entry) at any step.
pub fn score_pattern(
    pattern: &[f64],
    cfg: &EnvConfig,
    constant_power: f64,
) -> Result<Option<f64>, PatternError> {
    if !(0.0..=cfg.zones.p_max).contains(&constant_power) {
        return Err(PatternError::BadPower(constant_power));
    }
    let mut c = cfg.clone();
    c.mode = Mode::WarmHolding;
    c.hold.pattern = pattern.to_vec();
    let mut line = c.build_line()?;
    let n = c.line.n_segments;
    let id = line
        .add_bar(
            c.episode.hold_head_pos,
            vec![c.episode.hold_profile.mean; n],
        )
        .map_err(EnvError::from)?;
    let powers = line.powers_with(&vec![constant_power; c.zones.n_learnable()]);
    let steps = (c.hold.hold_duration / c.line.dt).round() as u64;
    let band = c.line.band_length;
    for _ in 0..steps {
        match line.step(&powers) {
            Ok(_) => {}
            Err(TwinError::BehindEntry { .. }) => return Ok(None),
            Err(e) => return Err(EnvError::from(e).into()),
        }
        match line.bar(id) {
            Some(bar) if bar.head_pos <= band && line.pieces.is_empty() => {}
            _ => return Ok(None),
        }
    }
    let bar = line.bar(id).expect("checked every step");
    Ok(Some(mean_abs_error(&bar.temps, c.reward.t_target)))
}

pub fn grid_search(search: &SearchConfig, cfg: &EnvConfig) -> Result<SearchResult, PatternError> {
    let patterns = enumerate(&search.durations, search.n_turns, search.palindromic)?;
    let mut ranking = patterns
        .into_iter()
        .map(|p| {
            let score = score_pattern(&p, cfg, search.constant_power)?;
            Ok(PatternCandidate {
                turn_durations: p,
                score,
            })
        })
        .collect::<Result<Vec<_>, PatternError>>()?;
    ranking.sort_by(rank_order);
    let best = ranking.first().filter(|c| c.is_feasible()).cloned();
    Ok(SearchResult { best, ranking })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_sizes_and_order() {
        let all = enumerate(&[64.0, 60.0], 3, false).unwrap();
        assert_eq!(all.len(), 8);
        assert_eq!(all[0], vec![60.0, 60.0, 60.0]);
        assert_eq!(all[1], vec![60.0, 60.0, 64.0]);
        assert_eq!(all[7], vec![64.0, 64.0, 64.0]);
        let pal = enumerate(&[60.0, 64.0], 8, true).unwrap();
        assert_eq!(pal.len(), 16);
        assert!(pal.iter().all(|p| p.iter().eq(p.iter().rev())));
        assert!(pal.contains(&vec![64.0, 60.0, 60.0, 64.0, 64.0, 60.0, 60.0, 64.0]));
        assert_eq!(enumerate(&[60.0, 64.0], 5, true).unwrap().len(), 8);
    }

    #[test]
    fn enumeration_errors() {
        assert!(matches!(
            enumerate(&[], 3, false),
            Err(PatternError::NoDurations)
        ));
        assert!(matches!(
            enumerate(&[60.0], 0, false),
            Err(PatternError::NoTurns)
        ));
        assert!(matches!(
            enumerate(&[-1.0], 2, false),
            Err(PatternError::BadDuration(_))
        ));
        assert!(matches!(
            enumerate(&[1.0, 2.0, 3.0, 4.0], 40, false),
            Err(PatternError::TooLarge(_))
        ));
    }

    #[test]
    fn single_candidate_is_trivial() {
        let search = SearchConfig {
            durations: vec![60.0],
            ..SearchConfig::default()
        };
        let res = grid_search(&search, &EnvConfig::new(Mode::WarmHolding)).unwrap();
        assert_eq!(res.ranking.len(), 1);
        assert_eq!(res.best.unwrap().turn_durations, vec![60.0; 8]);
    }

    #[test]
    fn drifting_pattern_is_infeasible() {
        let cfg = EnvConfig::new(Mode::WarmHolding);
        // Forward turns longer than backward ones walk the head past the shear.
        let p = [20.0, 120.0, 20.0, 120.0];
        assert_eq!(score_pattern(&p, &cfg, 0.2e6).unwrap(), None);
        assert!(score_pattern(&[64.0, 60.0, 60.0, 64.0], &cfg, 0.2e6)
            .unwrap()
            .is_some());
    }

    #[test]
    fn scoring_is_deterministic() {
        let cfg = EnvConfig::new(Mode::WarmHolding);
        let p = [64.0, 60.0, 60.0, 64.0, 64.0, 60.0, 60.0, 64.0];
        let a = score_pattern(&p, &cfg, 0.2e6).unwrap().unwrap();
        let b = score_pattern(&p, &cfg, 0.2e6).unwrap().unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a >= 0.0);
    }

    #[test]
    fn rejects_power_outside_range() {
        let cfg = EnvConfig::new(Mode::WarmHolding);
        assert!(matches!(
            score_pattern(&[60.0], &cfg, 1e9),
            Err(PatternError::BadPower(_))
        ));
    }

    #[test]
    fn ranking_breaks_ties_lexicographically() {
        let c = |d: Vec<f64>, s| PatternCandidate {
            turn_durations: d,
            score: s,
        };
        let mut v = [
            c(vec![64.0], None),
            c(vec![64.0, 60.0], Some(1.0)),
            c(vec![60.0, 64.0], Some(1.0)),
            c(vec![68.0], Some(0.5)),
        ];
        v.sort_by(rank_order);
        assert_eq!(v[0].turn_durations, vec![68.0]);
        assert_eq!(v[1].turn_durations, vec![60.0, 64.0]);
        assert_eq!(v[3].score, None);
    }
}
