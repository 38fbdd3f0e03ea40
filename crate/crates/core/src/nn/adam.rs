use super::NnError;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        self.update_parts(&mut [params], grads)
    }

    /// Descends along `grads`, whose entries follow `parts` concatenated in order.
    pub fn update_parts(&mut self, parts: &mut [&mut [f64]], grads: &[f64]) -> Result<(), NnError> {
        let total: usize = parts.iter().map(|p| p.len()).sum();
        if total != self.m.len() || grads.len() != total {
            return Err(NnError::Shape {
                what: "optimiser gradient",
                expected: self.m.len(),
                got: grads.len().max(total),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient);
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let mut k = 0;
        for part in parts.iter_mut() {
            for p in part.iter_mut() {
                let g = grads[k];
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                k += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut opt = Adam::new(2, 0.1);
        let mut p = vec![1.0, -2.0];
        opt.update(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(opt.t, 1);
    }

    #[test]
    fn first_step_is_sign_like() {
        let mut opt = Adam::new(3, 0.01);
        let mut p = vec![0.0; 3];
        opt.update(&mut p, &[5.0, -0.001, 300.0]).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-8);
        assert!((p[1] - 0.01).abs() < 1e-4);
        assert!((p[2] + 0.01).abs() < 1e-8);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut opt = Adam::new(1, 0.1);
        let mut w = vec![0.0];
        for _ in 0..200 {
            let g = 2.0 * (w[0] - 3.0);
            opt.update(&mut w, &[g]).unwrap();
        }
        // Independent scalar recurrence.
        let (mut x, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=200 {
            let g = 2.0 * (x - 3.0);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.1 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((w[0] - x).abs() < 1e-12);
        assert!((w[0] - 3.0).abs() < 0.01, "w = {}", w[0]);
    }

    #[test]
    fn rejects_nan_and_shape() {
        let mut opt = Adam::new(1, 0.1);
        let mut p = vec![0.0];
        assert!(matches!(
            opt.update(&mut p, &[f64::NAN]),
            Err(NnError::NonFiniteGradient)
        ));
        assert!(opt.update(&mut p, &[1.0, 2.0]).is_err());
        assert_eq!(opt.t, 0);
    }
}
