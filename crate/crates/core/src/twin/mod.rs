//! Discrete-time simulator of the heating line.

mod bar;
mod movement;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{self, Environment, MaterialParams};

pub use bar::{BarId, Piece, Snapshot, SteelBar};
pub use movement::{MovementMode, TurnPattern};

const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TwinError {
    #[error("invalid line configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} zone powers, got {got}")]
    PowerCount { expected: usize, got: usize },
    #[error("zone {zone}: power {power} W outside [0, {p_max}] W")]
    PowerOutOfRange { zone: usize, power: f64, p_max: f64 },
    #[error("zone {zone} is fixed at {expected} W, got {got} W")]
    FixedPowerChanged {
        zone: usize,
        expected: f64,
        got: f64,
    },
    #[error("bar {bar}: backward move would put its tail at {tail:.4} m, behind the line entry")]
    BehindEntry { bar: BarId, tail: f64 },
    #[error("bar overlaps another bar on the line")]
    Overlap,
    #[error("no bar on the line")]
    EmptyLine,
    #[error("unknown bar {0}")]
    UnknownBar(BarId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineConfig {
    /// m
    pub band_length: f64,
    /// s
    pub dt: f64,
    /// m
    pub bar_length: f64,
    pub n_segments: usize,
    /// m; must be a whole number of segments
    pub piece_length: f64,
    /// Normal roller speed, m/s.
    pub speed: f64,
}

impl Default for LineConfig {
    fn default() -> Self {
        Self {
            band_length: 30.0,
            dt: 1.0,
            bar_length: 4.0,
            n_segments: 40,
            piece_length: 0.5,
            speed: 0.04,
        }
    }
}

impl LineConfig {
    pub fn segment_length(&self) -> f64 {
        self.bar_length / self.n_segments as f64
    }

    pub fn segments_per_piece(&self) -> usize {
        (self.piece_length / self.segment_length()).round() as usize
    }

    pub fn pieces_per_bar(&self) -> usize {
        self.n_segments.div_ceil(self.segments_per_piece())
    }

    pub fn validate(&self) -> Result<(), TwinError> {
        let bad = |m: &str| Err(TwinError::InvalidConfig(m.to_string()));
        if !(self.band_length > 0.0 && self.band_length.is_finite()) {
            return bad("band_length must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.bar_length > 0.0 && self.bar_length.is_finite()) {
            return bad("bar_length must be positive");
        }
        if self.n_segments == 0 {
            return bad("n_segments must be at least 1");
        }
        if !(self.piece_length > 0.0 && self.piece_length.is_finite()) {
            return bad("piece_length must be positive");
        }
        let ratio = self.piece_length / self.segment_length();
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-6 {
            return bad("piece_length must be a whole number of segments");
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return bad("speed must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zone {
    /// 1-based.
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub power: f64,
    pub p_max: f64,
    pub learnable: bool,
}

impl Zone {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn overlap(&self, lo: f64, hi: f64) -> f64 {
        (hi.min(self.end) - lo.max(self.start)).max(0.0)
    }
}

/// Zone geometry and power limits as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZoneLayout {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub learnable: Vec<bool>,
    /// Power of each fixed zone, W; ignored for learnable zones.
    pub fixed_power: Vec<f64>,
    /// Upper power bound of each learnable zone, W.
    pub p_max: f64,
}

impl Default for ZoneLayout {
    fn default() -> Self {
        Self {
            start: vec![9.5, 15.5, 25.5, 27.0, 28.5],
            end: vec![15.5, 21.5, 27.0, 28.5, 30.0],
            learnable: vec![false, false, true, true, true],
            fixed_power: vec![2.0e6, 4.2e6, 0.0, 0.0, 0.0],
            p_max: 0.4e6,
        }
    }
}

impl ZoneLayout {
    pub fn to_zones(&self) -> Result<Vec<Zone>, TwinError> {
        let n = self.start.len();
        if self.end.len() != n || self.learnable.len() != n || self.fixed_power.len() != n {
            return Err(TwinError::InvalidConfig(
                "zones.start, zones.end, zones.learnable and zones.fixed_power must have equal length"
                    .into(),
            ));
        }
        let zones = (0..n)
            .map(|i| {
                let learnable = self.learnable[i];
                Zone {
                    index: i + 1,
                    start: self.start[i],
                    end: self.end[i],
                    power: if learnable { 0.0 } else { self.fixed_power[i] },
                    p_max: if learnable {
                        self.p_max
                    } else {
                        self.fixed_power[i]
                    },
                    learnable,
                }
            })
            .collect();
        Ok(zones)
    }

    pub fn n_learnable(&self) -> usize {
        self.learnable.iter().filter(|l| **l).count()
    }
}

fn validate_zones(zones: &[Zone], band_length: f64) -> Result<(), TwinError> {
    let mut prev_end = 0.0;
    for z in zones {
        let ctx = |m: &str| TwinError::InvalidConfig(format!("zone {}: {m}", z.index));
        if !(z.start >= 0.0 && z.start < z.end && z.end <= band_length + GEOM_EPS) {
            return Err(ctx("need 0 <= start < end <= band_length"));
        }
        if z.start < prev_end - GEOM_EPS {
            return Err(ctx("zones must be ordered and non-overlapping"));
        }
        if !(z.p_max >= 0.0 && z.p_max.is_finite()) {
            return Err(ctx("p_max must be non-negative"));
        }
        if !(0.0..=z.p_max).contains(&z.power) {
            return Err(ctx("power outside [0, p_max]"));
        }
        prev_end = z.end;
    }
    Ok(())
}

/// What a controller can see of one bar.
#[derive(Debug, Clone, PartialEq)]
pub struct RawObservation {
    pub bar: BarId,
    pub temps: Vec<f64>,
    pub head_pos: f64,
    pub tail_pos: f64,
    pub time: f64,
    pub step_index: u64,
}

#[derive(Debug, Clone)]
pub struct LineState {
    pub line: LineConfig,
    pub material: MaterialParams,
    pub env: Environment,
    pub zones: Vec<Zone>,
    pub mode: MovementMode,
    /// Seconds spent in the current movement mode.
    pub mode_elapsed: f64,
    pub time: f64,
    pub step_index: u64,
    /// Active bars, leading bar first.
    pub bars: Vec<SteelBar>,
    /// Fully sheared bars with their history.
    pub finished: Vec<SteelBar>,
    pub pieces: Vec<Piece>,
    next_bar: BarId,
}

impl LineState {
    pub fn new(
        line: LineConfig,
        material: MaterialParams,
        env: Environment,
        zones: Vec<Zone>,
        mode: MovementMode,
    ) -> Result<Self, TwinError> {
        line.validate()?;
        material
            .validate()
            .map_err(|e| TwinError::InvalidConfig(e.to_string()))?;
        env.validate()
            .map_err(|e| TwinError::InvalidConfig(e.to_string()))?;
        validate_zones(&zones, line.band_length)?;
        match &mode {
            MovementMode::Normal { speed } if !(*speed > 0.0) => {
                return Err(TwinError::InvalidConfig("speed must be positive".into()))
            }
            MovementMode::WarmHolding {
                speed,
                hold_duration,
                resume_speed,
                ..
            } if !(*speed > 0.0 && *hold_duration >= 0.0 && *resume_speed > 0.0) => {
                return Err(TwinError::InvalidConfig(
                    "hold speeds must be positive and hold_duration non-negative".into(),
                ))
            }
            _ => {}
        }
        Ok(Self {
            line,
            material,
            env,
            zones,
            mode,
            mode_elapsed: 0.0,
            time: 0.0,
            step_index: 0,
            bars: Vec::new(),
            finished: Vec::new(),
            pieces: Vec::new(),
            next_bar: 0,
        })
    }

    /// Places a new bar with its head at `head_pos`; `temps[0]` is the head segment.
    pub fn add_bar(&mut self, head_pos: f64, temps: Vec<f64>) -> Result<BarId, TwinError> {
        if temps.len() != self.line.n_segments {
            return Err(TwinError::InvalidConfig(format!(
                "bar needs {} segment temperatures, got {}",
                self.line.n_segments,
                temps.len()
            )));
        }
        if temps
            .iter()
            .any(|t| !t.is_finite() || *t < self.env.ambient_temp)
        {
            return Err(TwinError::InvalidConfig(
                "segment temperatures must be finite and not below ambient".into(),
            ));
        }
        if !head_pos.is_finite() {
            return Err(TwinError::InvalidConfig("head_pos must be finite".into()));
        }
        let tail = head_pos - self.line.bar_length;
        for b in &self.bars {
            if head_pos > b.tail_pos() + GEOM_EPS && tail < b.front_pos() - GEOM_EPS {
                return Err(TwinError::Overlap);
            }
        }
        let id = self.next_bar;
        self.next_bar += 1;
        let mut bar = SteelBar {
            id,
            length: self.line.bar_length,
            head_pos,
            temps,
            segment_mass: self.material.bar_mass / self.line.n_segments as f64,
            cut: 0,
            history: Vec::new(),
        };
        bar.snapshot(self.time);
        self.bars.push(bar);
        self.bars.sort_by(|a, b| {
            b.head_pos
                .partial_cmp(&a.head_pos)
                .expect("finite positions")
        });
        Ok(id)
    }

    pub fn zone_powers(&self) -> Vec<f64> {
        self.zones.iter().map(|z| z.power).collect()
    }

    /// Full power vector with fixed zones at their fixed values and
    /// learnable zones taken in order from `learnable`.
    pub fn powers_with(&self, learnable: &[f64]) -> Vec<f64> {
        let mut it = learnable.iter();
        self.zones
            .iter()
            .map(|z| {
                if z.learnable {
                    *it.next().unwrap_or(&0.0)
                } else {
                    z.power
                }
            })
            .collect()
    }

    pub fn set_powers(&mut self, powers: &[f64]) -> Result<(), TwinError> {
        if powers.len() != self.zones.len() {
            return Err(TwinError::PowerCount {
                expected: self.zones.len(),
                got: powers.len(),
            });
        }
        for (z, &p) in self.zones.iter().zip(powers) {
            if !z.learnable {
                if p != z.power {
                    return Err(TwinError::FixedPowerChanged {
                        zone: z.index,
                        expected: z.power,
                        got: p,
                    });
                }
            } else if !(p.is_finite() && (0.0..=z.p_max).contains(&p)) {
                return Err(TwinError::PowerOutOfRange {
                    zone: z.index,
                    power: p,
                    p_max: z.p_max,
                });
            }
        }
        for (z, &p) in self.zones.iter_mut().zip(powers) {
            z.power = p;
        }
        Ok(())
    }

    pub fn advance_movement(&mut self) -> Result<(), TwinError> {
        let (dx, next) = self.mode.displacement(self.mode_elapsed, self.line.dt);
        if dx < 0.0 {
            for b in &self.bars {
                let tail = b.tail_pos() + dx;
                if tail < -GEOM_EPS {
                    return Err(TwinError::BehindEntry { bar: b.id, tail });
                }
            }
        }
        for b in &mut self.bars {
            b.head_pos += dx;
        }
        match next {
            Some(mode) => {
                let held = match &self.mode {
                    MovementMode::WarmHolding { hold_duration, .. } => *hold_duration,
                    MovementMode::Normal { .. } => 0.0,
                };
                self.mode_elapsed = self.mode_elapsed + self.line.dt - held;
                self.mode = mode;
            }
            None => self.mode_elapsed += self.line.dt,
        }
        Ok(())
    }

    /// Coil power reaching segment `i` of `bar`, W.
    pub fn power_share(&self, bar: &SteelBar, i: usize) -> f64 {
        let (lo, hi) = bar.segment_span(i);
        self.zones
            .iter()
            .map(|z| z.power * z.overlap(lo, hi) / z.length())
            .sum()
    }

    /// Indices of the uncut segments of `bar` that overlap zone `zone` (0-based position in `zones`).
    pub fn segments_under_zone(&self, bar: &SteelBar, zone: usize) -> Vec<usize> {
        let z = &self.zones[zone];
        (bar.cut..bar.n_segments())
            .filter(|&i| {
                let (lo, hi) = bar.segment_span(i);
                z.overlap(lo, hi) > 0.0
            })
            .collect()
    }

    pub fn apply_heating(&mut self) {
        let dt = self.line.dt;
        for k in 0..self.bars.len() {
            let (cut, n) = (self.bars[k].cut, self.bars[k].n_segments());
            for i in cut..n {
                let share = self.power_share(&self.bars[k], i);
                let seg = self.bars[k].segment(i);
                let next = physics::step_segment(seg, share, &self.material, &self.env, dt);
                self.bars[k].temps[i] = next.temperature;
            }
        }
    }

    /// Cuts every piece that protrudes a full piece length past the band end
    /// (or the whole remainder once it has fully left). Returns ids of bars
    /// consumed by this call.
    pub fn shear_and_remove(&mut self) -> Vec<BarId> {
        let per_piece = self.line.segments_per_piece();
        let band = self.line.band_length;
        let exit_time = self.time + self.line.dt;
        let mut consumed = Vec::new();
        for b in &mut self.bars {
            while !b.is_consumed() {
                let take = per_piece.min(b.n_segments() - b.cut);
                let needed = take as f64 * b.segment_length();
                if b.front_pos() - band < needed - GEOM_EPS {
                    break;
                }
                let piece_index = self.pieces.len();
                self.pieces.push(Piece {
                    bar: b.id,
                    piece_index,
                    exit_time,
                    temps: b.temps[b.cut..b.cut + take].to_vec(),
                });
                b.cut += take;
            }
            if b.is_consumed() {
                consumed.push(b.id);
            }
        }
        if !consumed.is_empty() {
            let (done, active): (Vec<_>, Vec<_>) =
                self.bars.drain(..).partition(|b| b.is_consumed());
            self.bars = active;
            self.finished.extend(done);
        }
        consumed
    }

    /// One simulator tick: set powers, move, heat, shear, advance the clock and record history.
    pub fn step(&mut self, powers: &[f64]) -> Result<Vec<BarId>, TwinError> {
        self.set_powers(powers)?;
        self.advance_movement()?;
        self.apply_heating();
        let consumed = self.shear_and_remove();
        self.step_index += 1;
        self.time = self.step_index as f64 * self.line.dt;
        let t = self.time;
        for b in &mut self.bars {
            b.snapshot(t);
        }
        for b in self
            .finished
            .iter_mut()
            .filter(|b| consumed.contains(&b.id))
        {
            b.snapshot(t);
        }
        Ok(consumed)
    }

    pub fn bar(&self, id: BarId) -> Option<&SteelBar> {
        self.bars
            .iter()
            .chain(self.finished.iter())
            .find(|b| b.id == id)
    }

    fn raw(&self, b: &SteelBar) -> RawObservation {
        RawObservation {
            bar: b.id,
            temps: b.temps.clone(),
            head_pos: b.head_pos,
            tail_pos: b.tail_pos(),
            time: self.time,
            step_index: self.step_index,
        }
    }

    /// Observation of the leading active bar.
    pub fn observe(&self) -> Result<RawObservation, TwinError> {
        self.bars
            .first()
            .map(|b| self.raw(b))
            .ok_or(TwinError::EmptyLine)
    }

    /// Observation of a specific bar, whether still on the line or already sheared.
    pub fn observe_bar(&self, id: BarId) -> Result<RawObservation, TwinError> {
        self.bar(id)
            .map(|b| self.raw(b))
            .ok_or(TwinError::UnknownBar(id))
    }
}
