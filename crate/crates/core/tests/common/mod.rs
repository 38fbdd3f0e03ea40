//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

/// One explicit-Euler step of a segment, written out from the heat balance
/// without touching the library's helpers.
#[allow(clippy::too_many_arguments)]
pub fn direct_step(
    t: f64,
    share: f64,
    c_v: f64,
    eps: f64,
    t_curie: f64,
    k_lo: f64,
    k_hi: f64,
    d: f64,
    l: f64,
    m: f64,
    t_a: f64,
    dt: f64,
) -> f64 {
    let k = if t >= t_curie { k_hi } else { k_lo };
    let area = std::f64::consts::PI * d * l;
    let (conv, rad) = if t > t_a {
        let sigma = 5.670374419e-8;
        (
            area * 1.86 * (t - t_a).powf(1.3),
            area * sigma * eps * ((t + 273.0).powi(4) - (t_a + 273.0).powi(4)),
        )
    } else {
        (0.0, 0.0)
    };
    let next = t + (k * share - conv - rad) * dt / (m * c_v);
    if next < t_a {
        t_a
    } else {
        next
    }
}

/// O(T^2) advantage: explicit discounted sum of TD residuals up to the
/// episode boundary.
pub fn brute_gae(
    r: &[f64],
    v: &[f64],
    done: &[bool],
    last_v: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = r.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let next = if done[t] {
                0.0
            } else if t + 1 < n {
                v[t + 1]
            } else {
                last_v
            };
            r[t] + gamma * next - v[t]
        })
        .collect();
    (0..n)
        .map(|t| {
            let mut acc = 0.0;
            let mut w = 1.0;
            for (k, dk) in delta.iter().enumerate().skip(t) {
                acc += w * dk;
                if done[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            acc
        })
        .collect()
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_grad(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between two gradients; entries below `floor` in
/// magnitude are compared against `floor`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
