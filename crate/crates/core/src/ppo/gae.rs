use super::PpoError;

/// Generalised advantage estimation over a rollout that may span several
/// episodes. `last_value` bootstraps the step after the final transition
/// unless that transition is terminal. Returns `(advantages, returns)` with
/// `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(PpoError::Length {
            rewards: n,
            values: values.len(),
            dones: dones.len(),
        });
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let next_v = if t + 1 < n { values[t + 1] } else { last_value };
        let delta = rewards[t] + gamma * next_v * cont - values[t];
        next_adv = delta + gamma * lambda * cont * next_adv;
        adv[t] = next_adv;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Rescales to zero mean and unit (population) standard deviation.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for x in xs {
        *x = (*x - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_terminal_step() {
        let (a, r) = compute_gae(&[2.0], &[0.5], &[true], 99.0, 0.99, 0.97).unwrap();
        assert_eq!(a, vec![1.5]);
        assert_eq!(r, vec![2.0]);
    }

    #[test]
    fn undiscounted_zero_values_are_suffix_sums() {
        let r = [1.0, -2.0, 3.0, 0.5];
        let (a, _) =
            compute_gae(&r, &[0.0; 4], &[false, false, false, true], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a, vec![2.5, 1.5, 3.5, 0.5]);
    }

    #[test]
    fn episodes_do_not_leak() {
        let (a, _) = compute_gae(&[1.0, 1.0], &[0.0, 0.0], &[true, true], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a, vec![1.0, 1.0]);
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_gae(&[1.0], &[], &[true], 0.0, 0.9, 0.9).is_err());
    }

    #[test]
    fn normalize_moments() {
        let mut v = vec![1.0, 2.0, 3.0, 10.0];
        normalize(&mut v);
        let m: f64 = v.iter().sum::<f64>() / 4.0;
        let s: f64 = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
    }
}
