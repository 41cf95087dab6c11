/// Generalized advantage estimates and return targets.
///
/// `last_value` bootstraps the state after the final transition and is
/// ignored when that transition ended an episode.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "rollout columns differ in length");
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        adv[t] = delta + gamma * lambda * live * next_adv;
        next_adv = adv[t];
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit variance. Constant input is only
/// centred.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    // Second pass removes the rounding left by the first.
    for _ in 0..2 {
        let mean = adv.iter().sum::<f64>() / n;
        adv.iter_mut().for_each(|a| *a -= mean);
    }
    let var = adv.iter().map(|a| a * a).sum::<f64>() / n;
    if var > 0.0 {
        let sd = var.sqrt();
        adv.iter_mut().for_each(|a| *a /= sd);
    }
}
