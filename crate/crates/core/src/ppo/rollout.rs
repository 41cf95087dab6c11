use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::env::{DoneReason, Environment, Observation, SparseRaster, SELF_OBS_DIM};
use crate::error::Result;
use crate::nn::{squash, squash_log_jacobian, ImageInput, ObsBatch, PolicyParams, Tensor, ValueParams};
use crate::nn::{Graph, ParamSet};
use crate::reward::RewardBreakdown;

/// `-0.5 ln(2π)` per action dimension.
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of `raw` under `N(mu, diag exp(log_std)²)`, evaluated with the
/// same operations, in the same order, as the training graph so that an
/// unchanged policy reproduces it bit for bit.
pub fn policy_log_density(raw: &[f64], mu: &[f64], log_std: &[f64]) -> f64 {
    let terms: Vec<f64> = raw
        .iter()
        .zip(mu)
        .zip(log_std)
        .map(|((u, m), l)| {
            let z = (u - m) * (l * -1.0).exp();
            let mut t = (z * z) * -0.5;
            t += l * -1.0;
            t
        })
        .collect();
    terms.iter().sum::<f64>() + log_density_offset(raw.len())
}

pub(crate) fn log_density_offset(dim: usize) -> f64 {
    -HALF_LN_2PI * dim as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub self_obs: [f64; SELF_OBS_DIM],
    /// Index into [`RolloutBuffer::rasters`].
    pub raster: usize,
    /// Pre-squash draw.
    pub raw: [f64; 2],
    pub action: Action,
    /// Pre-squash Gaussian log density of `raw`.
    pub log_prob: f64,
    /// Log-Jacobian of the squash; the action's log density is
    /// `log_prob - log_jacobian`.
    pub log_jacobian: f64,
    /// Step reward including any out-of-region penalty.
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub value: f64,
    pub done: bool,
    pub episode: usize,
}

/// Transitions plus the distinct rasters they reference.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub rasters: Vec<SparseRaster>,
    /// Value of the state after the last transition; 0 when it ended an episode.
    pub last_value: f64,
    index: HashMap<Vec<(u32, [u64; 3])>, usize>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Id of `raster`, adding it if unseen.
    pub fn intern(&mut self, raster: &SparseRaster) -> usize {
        let key: Vec<(u32, [u64; 3])> = raster
            .cells
            .iter()
            .map(|(i, v)| (*i, v.map(f64::to_bits)))
            .collect();
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        self.rasters.push(raster.clone());
        self.index.insert(key, self.rasters.len() - 1);
        self.rasters.len() - 1
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.value).collect()
    }

    pub fn dones(&self) -> Vec<bool> {
        self.transitions.iter().map(|t| t.done).collect()
    }

    /// Observation batch for `rows`, with each distinct raster once.
    pub fn batch(&self, rows: &[usize], raster_size: usize) -> Result<ObsBatch> {
        let mut local: HashMap<usize, usize> = HashMap::new();
        let mut order = Vec::new();
        let image_of = rows
            .iter()
            .map(|&r| {
                let id = self.transitions[r].raster;
                *local.entry(id).or_insert_with(|| {
                    order.push(id);
                    order.len() - 1
                })
            })
            .collect();
        let per = raster_size * raster_size * crate::env::CHANNELS;
        let mut images = Vec::with_capacity(order.len() * per);
        for id in &order {
            images.extend(self.rasters[*id].to_dense().data);
        }
        let self_obs = rows.iter().flat_map(|&r| self.transitions[r].self_obs).collect();
        Ok(ObsBatch {
            self_obs: Tensor::new(vec![rows.len(), SELF_OBS_DIM], self_obs)?,
            images: ImageInput::Raw(Tensor::new(
                vec![order.len(), raster_size, raster_size, crate::env::CHANNELS],
                images,
            )?),
            image_of,
        })
    }
}

/// One finished training episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub reward: f64,
    /// Goal radius the episode ran with, nm.
    pub threshold: f64,
    pub steps: usize,
    pub reason: DoneReason,
    pub fuel: f64,
    pub safety: f64,
}

/// An environment plus the bookkeeping that carries across rollouts.
pub struct RolloutWorker {
    pub env: Environment,
    obs: Observation,
    episode: usize,
    limit: usize,
    acc: EpisodeSummary,
    pub finished: Vec<EpisodeSummary>,
}

impl RolloutWorker {
    /// Starts episode 0. No new episode is started once `limit` have finished.
    pub fn new(mut env: Environment, limit: usize) -> Result<Self> {
        let obs = env.reset(0)?;
        let acc = fresh_summary(&env, 0);
        Ok(RolloutWorker {
            env,
            obs,
            episode: 0,
            limit,
            acc,
            finished: Vec::new(),
        })
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn episodes_finished(&self) -> usize {
        self.episode
    }

    pub fn exhausted(&self) -> bool {
        self.episode >= self.limit
    }
}

fn fresh_summary(env: &Environment, episode: usize) -> EpisodeSummary {
    EpisodeSummary {
        episode,
        reward: 0.0,
        threshold: env.state().map_or(0.0, |s| s.omega),
        steps: 0,
        reason: DoneReason::Deadline,
        fuel: 0.0,
        safety: 0.0,
    }
}

/// Actor mean and critic value for one observation, reusing the image
/// projections cached for its raster.
struct Evaluator<'p> {
    policy: &'p PolicyParams,
    value: &'p ValueParams,
    cache: HashMap<usize, (Tensor, Tensor)>,
}

impl<'p> Evaluator<'p> {
    fn evaluate(&mut self, self_obs: &[f64], raster_id: usize, raster: &SparseRaster) -> Result<(Vec<f64>, f64)> {
        if !self.cache.contains_key(&raster_id) {
            let arch = &self.policy.arch;
            let dense = Tensor::new(
                vec![1, arch.raster_size, arch.raster_size, arch.raster_channels],
                raster.to_dense().data,
            )?;
            let pa = self.policy.image_projection(&dense)?;
            let pv = self.value.image_projection(&dense)?;
            self.cache.insert(raster_id, (pa, pv));
        }
        let (pa, pv) = &self.cache[&raster_id];
        let obs = Tensor::new(vec![1, self_obs.len()], self_obs.to_vec())?;
        let batch = |proj: &Tensor| ObsBatch {
            self_obs: obs.clone(),
            images: ImageInput::Projected(proj.clone()),
            image_of: vec![0],
        };
        let mut g = Graph::new();
        let vp = self.policy.bind(&mut g);
        let (mu, _) = self.policy.build(&mut g, &vp, &batch(pa))?;
        let mu = g.value(mu).data().to_vec();
        let mut g = Graph::new();
        let vv = self.value.bind(&mut g);
        let v = self.value.build(&mut g, &vv, &batch(pv))?;
        Ok((mu, g.value(v).data()[0]))
    }
}

/// Runs the current policy for up to `horizon` steps, resetting the
/// environment with the next episode index whenever an episode ends. Stops
/// early only when the worker's episode limit is reached.
pub fn collect_rollout<R: Rng>(
    worker: &mut RolloutWorker,
    policy: &PolicyParams,
    value: &ValueParams,
    horizon: usize,
    rng: &mut R,
) -> Result<RolloutBuffer> {
    let mut buf = RolloutBuffer::default();
    let mut eval = Evaluator {
        policy,
        value,
        cache: HashMap::new(),
    };
    let log_std = policy.log_std.data().to_vec();
    let sigma = policy.sigma();
    let bounds = worker.env.scenario().bounds;
    while buf.len() < horizon && !worker.exhausted() {
        let obs = worker.obs.clone();
        let raster = buf.intern(&obs.raster);
        let (mu, v) = eval.evaluate(&obs.self_obs.0, raster, &obs.raster)?;
        let raw: Vec<f64> = mu
            .iter()
            .zip(&sigma)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect();
        let action = squash(&raw, &bounds);
        let out = worker.env.step(action)?;

        let a = &mut worker.acc;
        a.reward += out.total;
        a.steps += 1;
        a.fuel += out.fcr * worker.env.scenario().timestep;
        a.safety += out.reward.s;
        buf.transitions.push(Transition {
            self_obs: obs.self_obs.0,
            raster,
            raw: [raw[0], raw[1]],
            action,
            log_prob: policy_log_density(&raw, &mu, &log_std),
            log_jacobian: squash_log_jacobian(&raw, &bounds),
            reward: out.total,
            breakdown: out.reward,
            value: v,
            done: out.done,
            episode: worker.episode,
        });
        if out.done {
            a.reason = out.reason.unwrap_or(DoneReason::Deadline);
            worker.finished.push(worker.acc.clone());
            worker.episode += 1;
            if !worker.exhausted() {
                worker.obs = worker.env.reset(worker.episode)?;
                worker.acc = fresh_summary(&worker.env, worker.episode);
            }
        } else {
            worker.obs = out.observation;
        }
    }
    buf.last_value = match buf.transitions.last() {
        Some(t) if !t.done => {
            let obs = worker.obs.clone();
            let raster = buf.intern(&obs.raster);
            eval.evaluate(&obs.self_obs.0, raster, &obs.raster)?.1
        }
        _ => 0.0,
    };
    Ok(buf)
}
