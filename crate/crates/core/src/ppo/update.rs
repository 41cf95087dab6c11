use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gae::{compute_gae, normalize_advantages};
use super::rollout::{log_density_offset, RolloutBuffer};
use super::PPOConfig;
use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, Adam, AdamConfig, Graph, ObsBatch, ParamSet, PolicyParams, Tensor, ValueParams, Var};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// One minibatch with its fixed targets.
#[derive(Debug, Clone)]
pub struct PpoBatch {
    pub obs: ObsBatch,
    /// Pre-squash actions `[B, 2]`.
    pub raw: Tensor,
    /// Behaviour-policy log densities `[B]`.
    pub old_log_prob: Tensor,
    pub advantages: Tensor,
    pub returns: Tensor,
}

impl PpoBatch {
    pub fn from_buffer(buffer: &RolloutBuffer, rows: &[usize], advantages: &[f64], returns: &[f64], raster_size: usize) -> Result<Self> {
        let pick = |v: &[f64]| Tensor::vector(rows.iter().map(|&r| v[r]).collect());
        let t = &buffer.transitions;
        Ok(PpoBatch {
            obs: buffer.batch(rows, raster_size)?,
            raw: Tensor::new(vec![rows.len(), 2], rows.iter().flat_map(|&r| t[r].raw).collect())?,
            old_log_prob: Tensor::vector(rows.iter().map(|&r| t[r].log_prob).collect()),
            advantages: pick(advantages),
            returns: pick(returns),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossTerms {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LossGradients {
    pub terms: LossTerms,
    pub policy: Vec<Tensor>,
    pub value: Vec<Tensor>,
}

/// Log densities `[B]` of the batch's raw actions under the actor.
fn log_prob_node<'a>(g: &mut Graph<'a>, policy: &'a PolicyParams, vp: &[Var], batch: &PpoBatch) -> Result<(Var, Var)> {
    let (mu, log_std) = policy.build(g, vp, &batch.obs)?;
    let raw = g.input(batch.raw.clone());
    let diff = g.sub(raw, mu)?;
    let neg_log_std = g.scale(log_std, -1.0);
    let inv_std = g.exp(neg_log_std);
    let z = g.mul_row(diff, inv_std)?;
    let sq = g.square(z);
    let half = g.scale(sq, -0.5);
    let terms = g.add_row(half, neg_log_std)?;
    let rows = g.sum_cols(terms);
    let dim = batch.raw.shape()[1];
    Ok((g.add_scalar(rows, log_density_offset(dim)), log_std))
}

/// Clipped-surrogate loss plus weighted value error minus weighted entropy,
/// with gradients for both networks.
pub fn ppo_loss(policy: &PolicyParams, value: &ValueParams, batch: &PpoBatch, cfg: &PPOConfig) -> Result<LossGradients> {
    let mut g = Graph::new();
    let vp = policy.bind(&mut g);
    let vv = value.bind(&mut g);
    let (logp, log_std) = log_prob_node(&mut g, policy, &vp, batch)?;
    let old = g.input(batch.old_log_prob.clone());
    let log_ratio = g.sub(logp, old)?;
    let ratio = g.exp(log_ratio);
    let adv = g.input(batch.advantages.clone());
    let unclipped = g.mul(ratio, adv)?;
    let clipped_ratio = g.clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
    let clipped = g.mul(clipped_ratio, adv)?;
    let surrogate = g.minimum(unclipped, clipped)?;
    let surrogate = g.mean(surrogate);
    let policy_loss = g.scale(surrogate, -1.0);

    let v = value.build(&mut g, &vv, &batch.obs)?;
    let v = g.reshape(v, &[batch.returns.len()])?;
    let ret = g.input(batch.returns.clone());
    let err = g.sub(v, ret)?;
    let sq = g.square(err);
    let value_loss = g.mean(sq);

    let ls = g.sum(log_std);
    let dim = batch.raw.shape()[1] as f64;
    let entropy = g.add_scalar(ls, 0.5 * (LN_2PI + 1.0) * dim);

    let weighted_value = g.scale(value_loss, cfg.value_coef);
    let weighted_entropy = g.scale(entropy, -cfg.entropy_coef);
    let partial = g.add(policy_loss, weighted_value)?;
    let loss = g.add(partial, weighted_entropy)?;

    let scalar = |v: Var| g.value(v).data()[0];
    let terms = LossTerms {
        loss: scalar(loss),
        policy_loss: scalar(policy_loss),
        value_loss: scalar(value_loss),
        entropy: scalar(entropy),
        ratios: g.value(ratio).data().to_vec(),
    };
    if !terms.loss.is_finite() {
        return Err(Error::NonFiniteLoss(format!(
            "policy {} value {} entropy {}",
            terms.policy_loss, terms.value_loss, terms.entropy
        )));
    }
    let mut grads = g.backward(loss)?;
    let policy_grads = vp.iter().map(|&v| grads.take_or_zeros(v, g.value(v))).collect();
    let value_grads = vv.iter().map(|&v| grads.take_or_zeros(v, g.value(v))).collect();
    Ok(LossGradients {
        terms,
        policy: policy_grads,
        value: value_grads,
    })
}

/// Gradient of `-mean(A · log π(a|s))`, the plain policy-gradient estimator.
pub fn vanilla_policy_gradient(policy: &PolicyParams, batch: &PpoBatch) -> Result<Vec<Tensor>> {
    let mut g = Graph::new();
    let vp = policy.bind(&mut g);
    let (logp, _) = log_prob_node(&mut g, policy, &vp, batch)?;
    let adv = g.input(batch.advantages.clone());
    let weighted = g.mul(logp, adv)?;
    let m = g.mean(weighted);
    let loss = g.scale(m, -1.0);
    let mut grads = g.backward(loss)?;
    Ok(vp.iter().map(|&v| grads.take_or_zeros(v, g.value(v))).collect())
}

/// Probability ratios of the batch actions under `policy` against the
/// stored behaviour densities.
pub fn probability_ratios(policy: &PolicyParams, batch: &PpoBatch) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let vp = policy.bind(&mut g);
    let (logp, _) = log_prob_node(&mut g, policy, &vp, batch)?;
    Ok(g
        .value(logp)
        .data()
        .iter()
        .zip(batch.old_log_prob.data())
        .map(|(l, o)| (l - o).exp())
        .collect())
}

/// Optimiser state for the actor and the critic.
#[derive(Debug, Clone)]
pub struct PpoOptimizer {
    pub actor: Adam,
    pub critic: Adam,
}

impl PpoOptimizer {
    pub fn new(policy: &PolicyParams, value: &ValueParams, step_size: f64) -> Self {
        let config = AdamConfig {
            step_size,
            ..AdamConfig::default()
        };
        PpoOptimizer {
            actor: Adam::new(config, &policy.tensors()),
            critic: Adam::new(config, &value.tensors()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub transitions: usize,
    /// Means over all minibatch steps.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Mean actor gradient norm before clipping.
    pub grad_norm: f64,
    /// Mean value loss seen during each epoch.
    pub value_loss_by_epoch: Vec<f64>,
    /// Mean `|ratio - 1|` over the whole buffer after the update.
    pub ratio_deviation: f64,
}

/// Epochs of shuffled minibatch steps on one rollout.
pub fn ppo_update<R: Rng>(
    policy: &mut PolicyParams,
    value: &mut ValueParams,
    opt: &mut PpoOptimizer,
    buffer: &RolloutBuffer,
    cfg: &PPOConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if buffer.is_empty() {
        return Err(Error::InvalidArgument("cannot update on an empty rollout".into()));
    }
    let (mut adv, ret) = compute_gae(
        &buffer.rewards(),
        &buffer.values(),
        &buffer.dones(),
        buffer.last_value,
        cfg.gamma,
        cfg.gae_lambda,
    );
    normalize_advantages(&mut adv);
    let n = buffer.len();
    let size = policy.arch.raster_size;
    let mb = cfg.minibatch_size.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let (mut sums, mut count) = ([0.0; 5], 0usize);
    let mut by_epoch = Vec::with_capacity(cfg.epochs_per_update);
    for epoch in 0..cfg.epochs_per_update {
        order.shuffle(rng);
        let (mut epoch_sum, mut epoch_count) = (0.0, 0usize);
        for (k, rows) in order.chunks(mb).enumerate() {
            let batch = PpoBatch::from_buffer(buffer, rows, &adv, &ret, size)?;
            let out = ppo_loss(policy, value, &batch, cfg).map_err(|e| match e {
                Error::NonFiniteLoss(m) => Error::NonFiniteLoss(format!("epoch {epoch} minibatch {k}: {m}")),
                other => other,
            })?;
            let (mut pg, mut vg) = (out.policy, out.value);
            let norm = clip_global_norm(&mut pg, cfg.max_grad_norm);
            clip_global_norm(&mut vg, cfg.max_grad_norm);
            opt.actor.step(policy.tensors_mut(), &pg);
            opt.critic.step(value.tensors_mut(), &vg);

            let t = &out.terms;
            let clipped = t.ratios.iter().filter(|r| (*r - 1.0).abs() > cfg.clip_epsilon).count();
            for (s, x) in sums.iter_mut().zip([
                t.policy_loss,
                t.value_loss,
                t.entropy,
                clipped as f64 / t.ratios.len() as f64,
                norm,
            ]) {
                *s += x;
            }
            count += 1;
            epoch_sum += t.value_loss;
            epoch_count += 1;
        }
        by_epoch.push(epoch_sum / epoch_count as f64);
    }
    if !policy.is_finite() || !value.is_finite() {
        return Err(Error::NonFiniteLoss("parameters became non-finite".into()));
    }
    let mut deviation = 0.0;
    for rows in (0..n).collect::<Vec<_>>().chunks(mb) {
        let batch = PpoBatch::from_buffer(buffer, rows, &adv, &ret, size)?;
        deviation += probability_ratios(policy, &batch)?.iter().map(|r| (r - 1.0).abs()).sum::<f64>();
    }
    let c = count.max(1) as f64;
    Ok(UpdateStats {
        transitions: n,
        policy_loss: sums[0] / c,
        value_loss: sums[1] / c,
        entropy: sums[2] / c,
        clip_fraction: sums[3] / c,
        grad_norm: sums[4] / c,
        value_loss_by_epoch: by_epoch,
        ratio_deviation: deviation / n as f64,
    })
}
