//! Generalized advantage estimation.

use crate::TrainError;

/// Backward-recursion GAE: A_t = delta_t + gamma*lambda*A_{t+1} with
/// delta_t = r_t + gamma*V_{t+1} - V_t and V_T = bootstrap (zero on true
/// termination, V(s_T) on time-limit truncation).
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>, TrainError> {
    if rewards.len() != values.len() {
        return Err(TrainError::LengthMismatch {
            what: "rewards vs values",
            left: rewards.len(),
            right: values.len(),
        });
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(TrainError::BadHyper(format!(
            "gamma and lambda must lie in [0, 1]; got {gamma}, {lambda}"
        )));
    }
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_value - values[t];
        carry = delta + gamma * lambda * carry;
        advantages[t] = carry;
    }
    Ok(advantages)
}

/// Value-regression targets R_t = A_t + V_t.
pub fn gae_returns(advantages: &[f64], values: &[f64]) -> Vec<f64> {
    advantages.iter().zip(values).map(|(a, v)| a + v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: the truncated double sum A_t = sum_l (gamma*lambda)^l delta_{t+l}.
    fn gae_double_sum(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
        let n = rewards.len();
        let delta: Vec<f64> = (0..n)
            .map(|t| {
                let next = if t + 1 < n { values[t + 1] } else { bootstrap };
                rewards[t] + gamma * next - values[t]
            })
            .collect();
        (0..n)
            .map(|t| {
                let mut acc = 0.0;
                for l in 0..n - t {
                    acc += (gamma * lambda).powi(l as i32) * delta[t + l];
                }
                acc
            })
            .collect()
    }

    #[test]
    fn single_step_reduces_to_one_delta() {
        let adv = compute_gae(&[1.5], &[0.4], 0.7, 0.9, 0.3).unwrap();
        assert!((adv[0] - (1.5 + 0.9 * 0.7 - 0.4)).abs() < 1e-15);
    }

    #[test]
    fn two_step_hand_expansion() {
        // delta = [0.68, -0.2]; A_1 = -0.2, A_0 = 0.68 + 0.45*(-0.2) = 0.59.
        let adv = compute_gae(&[1.0, 0.0], &[0.5, 0.2], 0.0, 0.9, 0.5).unwrap();
        assert!((adv[1] + 0.2).abs() < 1e-12);
        assert!((adv[0] - 0.59).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_gives_one_step_advantages() {
        let rewards = [0.3, -0.1, 0.7];
        let values = [0.2, 0.1, -0.4];
        let adv = compute_gae(&rewards, &values, 0.5, 0.99, 0.0).unwrap();
        for t in 0..3 {
            let next = if t + 1 < 3 { values[t + 1] } else { 0.5 };
            let delta = rewards[t] + 0.99 * next - values[t];
            assert!((adv[t] - delta).abs() < 1e-15);
        }
    }

    #[test]
    fn recursion_matches_the_double_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let n = rng.gen_range(1..=10);
            let rewards: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bootstrap = rng.gen_range(-1.0..1.0);
            let gamma = rng.gen_range(0.0..=1.0);
            let lambda = rng.gen_range(0.0..=1.0);
            let fast = compute_gae(&rewards, &values, bootstrap, gamma, lambda).unwrap();
            let slow = gae_double_sum(&rewards, &values, bootstrap, gamma, lambda);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(compute_gae(&[1.0], &[0.5, 0.2], 0.0, 0.9, 0.5).is_err());
    }
}
