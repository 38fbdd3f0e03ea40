/// Running mean and variance of value targets (Welford, merged per batch).
///
/// The critic predicts targets in standardised units; `denormalize` maps
/// them back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueNorm {
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations from `mean`.
    pub m2: f64,
}

const MIN_STD: f64 = 1e-4;

impl Default for ValueNorm {
    fn default() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }
}

impl ValueNorm {
    pub fn std(&self) -> f64 {
        if self.count < 2 {
            return 1.0;
        }
        (self.m2 / self.count as f64).sqrt().max(MIN_STD)
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std()
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        self.mean + self.std() * z
    }

    /// Folds `xs` into the statistics (Chan et al. parallel merge).
    pub fn extend(&mut self, xs: &[f64]) {
        if xs.is_empty() {
            return;
        }
        let nb = xs.len() as f64;
        let mb = xs.iter().sum::<f64>() / nb;
        let m2b: f64 = xs.iter().map(|x| (x - mb) * (x - mb)).sum();
        let na = self.count as f64;
        let n = na + nb;
        let delta = mb - self.mean;
        self.mean += delta * nb / n;
        self.m2 += m2b + delta * delta * na * nb / n;
        self.count += xs.len() as u64;
    }

    pub fn is_valid(&self) -> bool {
        self.mean.is_finite() && self.m2.is_finite() && self.m2 >= 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batched_merge_matches_two_pass() {
        let xs: Vec<f64> = (0..57)
            .map(|i| ((i * 37) % 11) as f64 * 1.5 - 4.0)
            .collect();
        let mut vn = ValueNorm::default();
        for chunk in xs.chunks(10) {
            vn.extend(chunk);
        }
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        assert_eq!(vn.count, 57);
        assert!((vn.mean - m).abs() < 1e-12);
        assert!((vn.std() - var.sqrt()).abs() < 1e-12);
        assert!((vn.denormalize(vn.normalize(3.3)) - 3.3).abs() < 1e-12);
    }

    #[test]
    fn empty_is_identity() {
        let vn = ValueNorm::default();
        assert_eq!(vn.normalize(2.5), 2.5);
        assert_eq!(vn.std(), 1.0);
    }
}
