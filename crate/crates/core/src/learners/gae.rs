use super::rollout::{fill_values, TrajectoryBatch};
use crate::error::Result;
use crate::numerics::Network;

/// Evaluate `critic` on the batch, then fill advantages and returns.
pub fn compute_gae(batch: &mut TrajectoryBatch, critic: &Network, gamma: f64, lambda: f64) -> Result<()> {
    fill_values(batch, critic)?;
    let (adv, ret) = gae_from_values(batch, gamma, lambda);
    batch.advantages = adv;
    batch.returns = ret;
    Ok(())
}

/// Backward GAE recursion over the values already stored in `batch`.
pub(crate) fn gae_from_values(batch: &TrajectoryBatch, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = batch.len();
    let mut adv = vec![0.0; n];
    let mut ret = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        if batch.episode_ends[i] {
            acc = 0.0;
        }
        let next = if batch.terminals[i] { 0.0 } else { batch.next_values[i] };
        let delta = batch.rewards[i] + gamma * next - batch.values[i];
        acc = delta + gamma * lambda * acc;
        adv[i] = acc;
        ret[i] = acc + batch.values[i];
    }
    (adv, ret)
}
