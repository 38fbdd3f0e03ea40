use crate::physics::Segment;

pub type BarId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub head_pos: f64,
    pub temps: Vec<f64>,
}

/// A sheared piece of bar, recorded at the instant of the cut.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub bar: BarId,
    pub piece_index: usize,
    pub exit_time: f64,
    pub temps: Vec<f64>,
}

impl Piece {
    pub fn min_temp(&self) -> f64 {
        self.temps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_temp(&self) -> f64 {
        self.temps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_temp(&self) -> f64 {
        self.temps.iter().sum::<f64>() / self.temps.len() as f64
    }
}

/// A bar discretised into equal segments; segment 0 is at the head.
///
/// `head_pos` always refers to the original leading end, so sheared
/// segments keep their place (beyond the shear line) and their temperature
/// at the cut. Only the first `cut` segments have been sheared off.
#[derive(Debug, Clone, PartialEq)]
pub struct SteelBar {
    pub id: BarId,
    pub length: f64,
    pub head_pos: f64,
    pub temps: Vec<f64>,
    pub segment_mass: f64,
    pub cut: usize,
    pub history: Vec<Snapshot>,
}

impl SteelBar {
    pub fn n_segments(&self) -> usize {
        self.temps.len()
    }

    pub fn segment_length(&self) -> f64 {
        self.length / self.temps.len() as f64
    }

    pub fn tail_pos(&self) -> f64 {
        self.head_pos - self.length
    }

    /// Position of the current leading end (after any cuts).
    pub fn front_pos(&self) -> f64 {
        self.head_pos - self.cut as f64 * self.segment_length()
    }

    pub fn remaining_length(&self) -> f64 {
        (self.n_segments() - self.cut) as f64 * self.segment_length()
    }

    pub fn is_consumed(&self) -> bool {
        self.cut == self.n_segments()
    }

    /// `[lo, hi)` occupied by segment `i`.
    pub fn segment_span(&self, i: usize) -> (f64, f64) {
        let l = self.segment_length();
        let hi = self.head_pos - i as f64 * l;
        (hi - l, hi)
    }

    pub fn segment(&self, i: usize) -> Segment {
        Segment {
            temperature: self.temps[i],
            length: self.segment_length(),
            mass: self.segment_mass,
        }
    }

    pub(crate) fn snapshot(&mut self, time: f64) {
        self.history.push(Snapshot {
            time,
            head_pos: self.head_pos,
            temps: self.temps.clone(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar() -> SteelBar {
        SteelBar {
            id: 0,
            length: 4.0,
            head_pos: 10.0,
            temps: vec![20.0; 40],
            segment_mass: 1.0,
            cut: 0,
            history: Vec::new(),
        }
    }

    #[test]
    fn geometry() {
        let mut b = bar();
        assert_eq!(b.tail_pos(), 6.0);
        let (lo, hi) = b.segment_span(0);
        assert!((hi - 10.0).abs() < 1e-12 && (lo - 9.9).abs() < 1e-12);
        b.cut = 5;
        assert!((b.front_pos() - 9.5).abs() < 1e-12);
        assert!((b.remaining_length() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn piece_stats() {
        let p = Piece {
            bar: 0,
            piece_index: 0,
            exit_time: 1.0,
            temps: vec![1000.0, 1010.0, 1030.0],
        };
        assert_eq!(p.min_temp(), 1000.0);
        assert_eq!(p.max_temp(), 1030.0);
        assert!((p.mean_temp() - 1013.333333333333).abs() < 1e-9);
    }
}
