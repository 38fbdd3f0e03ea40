use serde::{Deserialize, Serialize};

/// Alternating back-and-forth schedule used while the line is on hold.
///
/// Turn `i` lasts `turn_durations[i]` seconds; even turns move backward and
/// odd turns forward. A non-cyclic pattern leaves the bar stationary once
/// the last turn ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnPattern {
    pub turn_durations: Vec<f64>,
    pub cyclic: bool,
}

impl TurnPattern {
    pub fn new(turn_durations: Vec<f64>, cyclic: bool) -> Option<Self> {
        let ok =
            !turn_durations.is_empty() && turn_durations.iter().all(|d| d.is_finite() && *d > 0.0);
        ok.then_some(Self {
            turn_durations,
            cyclic,
        })
    }

    pub fn period(&self) -> f64 {
        self.turn_durations.iter().sum()
    }

    /// Direction of travel at `elapsed` seconds into the hold: -1 backward, +1 forward, 0 idle.
    pub fn direction_at(&self, elapsed: f64) -> f64 {
        let period = self.period();
        let mut t = elapsed;
        if self.cyclic {
            t = t.rem_euclid(period);
        } else if t >= period {
            return 0.0;
        }
        let mut edge = 0.0;
        for (i, d) in self.turn_durations.iter().enumerate() {
            edge += d;
            if t < edge {
                return turn_sign(i);
            }
        }
        0.0
    }

    /// Signed travel in units of speed·s between `from` and `to` seconds into the hold.
    pub fn signed_time(&self, from: f64, to: f64) -> f64 {
        if to <= from {
            return 0.0;
        }
        let period = self.period();
        if !self.cyclic {
            return self.signed_time_in_period(from.min(period), to.min(period));
        }
        let first = (from / period).floor();
        let last = (to / period).floor();
        let mut total = 0.0;
        let mut k = first;
        while k <= last {
            let base = k * period;
            let a = (from - base).clamp(0.0, period);
            let b = (to - base).clamp(0.0, period);
            total += self.signed_time_in_period(a, b);
            k += 1.0;
        }
        total
    }

    fn signed_time_in_period(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        let mut lo = 0.0;
        for (i, d) in self.turn_durations.iter().enumerate() {
            let hi = lo + d;
            let overlap = b.min(hi) - a.max(lo);
            if overlap > 0.0 {
                total += turn_sign(i) * overlap;
            }
            lo = hi;
        }
        total
    }
}

fn turn_sign(turn: usize) -> f64 {
    if turn.is_multiple_of(2) {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MovementMode {
    Normal {
        speed: f64,
    },
    WarmHolding {
        speed: f64,
        pattern: TurnPattern,
        hold_duration: f64,
        /// Roller speed once the hold ends.
        resume_speed: f64,
    },
}

impl MovementMode {
    pub fn is_holding(&self) -> bool {
        matches!(self, MovementMode::WarmHolding { .. })
    }

    /// Displacement over `[elapsed, elapsed + dt]` of mode time, plus the
    /// follow-up mode if the hold ends within the interval.
    pub(crate) fn displacement(&self, elapsed: f64, dt: f64) -> (f64, Option<MovementMode>) {
        match self {
            MovementMode::Normal { speed } => (speed * dt, None),
            MovementMode::WarmHolding {
                speed,
                pattern,
                hold_duration,
                resume_speed,
            } => {
                let end = elapsed + dt;
                let held_until = end.min(*hold_duration);
                let mut dx = speed * pattern.signed_time(elapsed, held_until);
                if end >= *hold_duration {
                    dx += resume_speed * (end - hold_duration.max(elapsed));
                    (
                        dx,
                        Some(MovementMode::Normal {
                            speed: *resume_speed,
                        }),
                    )
                } else {
                    (dx, None)
                }
            }
        }
    }
}
