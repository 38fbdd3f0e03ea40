/// Value, gradient and clip statistics of the clipped surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipStats {
    /// Negated mean surrogate (to be minimised).
    pub loss: f64,
    /// d loss / d logp_new per sample.
    pub grad: Vec<f64>,
    pub clip_frac: f64,
    /// mean(logp_old - logp_new)
    pub approx_kl: f64,
}

pub fn clipped_objective(logp_new: &[f64], logp_old: &[f64], adv: &[f64], eps: f64) -> ClipStats {
    let n = logp_new.len() as f64;
    let mut sum = 0.0;
    let mut clipped = 0usize;
    let mut kl = 0.0;
    let grad = logp_new
        .iter()
        .zip(logp_old)
        .zip(adv)
        .map(|((lp, lo), a)| {
            let r = (lp - lo).exp();
            let rc = r.clamp(1.0 - eps, 1.0 + eps);
            let (raw, cut) = (r * a, rc * a);
            if r > 1.0 + eps || r < 1.0 - eps {
                clipped += 1;
            }
            kl += lo - lp;
            if raw <= cut {
                sum += raw;
                -raw / n
            } else {
                sum += cut;
                0.0
            }
        })
        .collect();
    ClipStats {
        loss: -sum / n,
        grad,
        clip_frac: clipped as f64 / n,
        approx_kl: kl / n,
    }
}
