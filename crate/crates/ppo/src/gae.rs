//! Generalized advantage estimation over time-major rollouts.

/// One environment's segment of a rollout, indexed by time.
#[derive(Clone, Copy, Debug)]
pub struct GaeInput<'a> {
    pub rewards: &'a [f64],
    pub values: &'a [f64],
    /// Value of the observation that follows each step: the next stored
    /// value, the final observation's value on truncation, or the bootstrap
    /// value after the last step.
    pub next_values: &'a [f64],
    pub terminated: &'a [bool],
    pub truncated: &'a [bool],
}

/// Returns `(advantages, returns)` with
/// `delta_t = r_t + gamma * V'_t * (1 - terminated_t) - V_t` and
/// `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`.
pub fn compute_gae(input: GaeInput<'_>, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = input.rewards.len();
    assert!(
        [input.values.len(), input.next_values.len(), input.terminated.len(), input.truncated.len()].iter().all(|&l| l == n),
        "rollout columns must have equal length"
    );
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if input.terminated[t] { 0.0 } else { 1.0 };
        let delta = input.rewards[t] + gamma * input.next_values[t] * live - input.values[t];
        let carry = if input.terminated[t] || input.truncated[t] { 0.0 } else { 1.0 };
        next_adv = delta + gamma * lambda * carry * next_adv;
        adv[t] = next_adv;
    }
    let returns = adv.iter().zip(input.values).map(|(a, v)| a + v).collect();
    (adv, returns)
}
