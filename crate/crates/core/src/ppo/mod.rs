//! Curriculum PPO: rollouts, advantage estimation, clipped-surrogate updates
//! and the training loop.

mod gae;
mod rollout;
mod update;

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gae::{compute_gae, normalize_advantages};
pub use rollout::{collect_rollout, policy_log_density, EpisodeSummary, RolloutBuffer, RolloutWorker, Transition};
pub use update::{
    ppo_loss, ppo_update, probability_ratios, vanilla_policy_gradient, LossGradients, LossTerms,
    PpoBatch, PpoOptimizer, UpdateStats,
};

use crate::env::{Environment, Scenario};
use crate::error::{read_file, write_file, Error, Result};
use crate::fuel::FuelRateModel;
use crate::nn::{Architecture, Checkpoint, PolicyParams, Tensor, ValueParams, INITIAL_STD};
use crate::reward::{CurriculumSchedule, RewardConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PPOConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    /// Transitions collected per update.
    pub horizon: usize,
    pub step_size: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    /// Standard deviation of the untrained policy, per action dimension.
    pub initial_std: f64,
    /// Shrink the step size linearly to zero over the training episodes.
    pub anneal_step_size: bool,
    /// Training episodes; also the length of the curriculum.
    pub total_episodes: usize,
    pub curriculum: bool,
}

impl Default for PPOConfig {
    fn default() -> Self {
        PPOConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs_per_update: 4,
            minibatch_size: 64,
            horizon: 2048,
            step_size: 3e-4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            initial_std: INITIAL_STD,
            anneal_step_size: false,
            total_episodes: 1000,
            curriculum: true,
        }
    }
}

impl PPOConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.gamma) || !unit(self.gae_lambda) {
            return Err(Error::InvalidArgument(format!(
                "gamma {} and gae_lambda {} must lie in [0, 1]",
                self.gamma, self.gae_lambda
            )));
        }
        if !(self.clip_epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("clip_epsilon {} must be positive", self.clip_epsilon)));
        }
        if self.minibatch_size == 0 || self.horizon == 0 || self.epochs_per_update == 0 {
            return Err(Error::InvalidArgument("horizon, minibatch_size and epochs_per_update must be positive".into()));
        }
        if !(self.step_size > 0.0 && self.max_grad_norm > 0.0 && self.initial_std > 0.0) {
            return Err(Error::InvalidArgument("step_size, max_grad_norm and initial_std must be positive".into()));
        }
        Ok(())
    }
}

/// Goal radii of the curriculum; its length is the training episode count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumRadii {
    pub omega_0: f64,
    pub omega_f: f64,
}

impl Default for CurriculumRadii {
    fn default() -> Self {
        let d = CurriculumSchedule::default();
        CurriculumRadii {
            omega_0: d.omega_0,
            omega_f: d.omega_f,
        }
    }
}

/// Everything a training run needs besides the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub ppo: PPOConfig,
    pub curriculum: CurriculumRadii,
    pub reward: RewardConfig,
    pub architecture: Architecture,
    /// Window of the reward moving average, episodes.
    pub moving_average_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            ppo: PPOConfig::default(),
            curriculum: CurriculumRadii::default(),
            reward: RewardConfig::default(),
            architecture: Architecture::default(),
            moving_average_window: 50,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> CurriculumSchedule {
        CurriculumSchedule {
            omega_0: self.curriculum.omega_0,
            omega_f: self.curriculum.omega_f,
            total_episodes: self.ppo.total_episodes.max(1),
            enabled: self.ppo.curriculum,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.schedule().validate()?;
        self.architecture.validate()?;
        if self.moving_average_window == 0 {
            return Err(Error::InvalidArgument("moving_average_window must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: TrainConfig = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("training config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        TrainConfig::from_toml(&read_file(path)?).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::parse(path, m),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}

/// Trailing mean over at most `window` episodes ending at each index.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub curriculum: bool,
    pub episodes: Vec<EpisodeSummary>,
    pub moving_average: Vec<f64>,
    pub updates: Vec<UpdateStats>,
}

impl TrainReport {
    pub fn episode_rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.reward).collect()
    }

    /// `episode,reward,moving_average,threshold,steps,reason` rows.
    pub fn reward_curve_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["episode", "reward", "moving_average", "threshold", "steps", "reason"])
            .expect("in-memory write");
        for (e, ma) in self.episodes.iter().zip(&self.moving_average) {
            let reason = serde_json::to_value(e.reason).expect("serialises");
            w.write_record([
                e.episode.to_string(),
                e.reward.to_string(),
                ma.to_string(),
                e.threshold.to_string(),
                e.steps.to_string(),
                reason.as_str().unwrap_or_default().to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn save_reward_curve(&self, path: &Path) -> Result<()> {
        write_file(path, &self.reward_curve_csv())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// A training run that can be advanced one rollout/update cycle at a time.
pub struct Trainer {
    config: TrainConfig,
    worker: RolloutWorker,
    policy: PolicyParams,
    value: ValueParams,
    opt: PpoOptimizer,
    rng: ChaCha8Rng,
    updates: Vec<UpdateStats>,
}

impl Trainer {
    pub fn new(scenario: &Scenario, config: &TrainConfig, fuel: Arc<dyn FuelRateModel>) -> Result<Self> {
        config.validate()?;
        let arch = &config.architecture;
        if arch.raster_size != scenario.raster_cells || arch.self_dim != crate::env::SELF_OBS_DIM || arch.action_dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "architecture {arch:?} does not fit the scenario (raster {} cells, 9 inputs, 2 actions)",
                scenario.raster_cells
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let scaling = scenario.input_scaling();
        let mut policy = PolicyParams::init(arch, scaling.clone(), &mut rng)?;
        policy.log_std = Tensor::full(&[arch.action_dim], config.ppo.initial_std.ln());
        let value = ValueParams::init(arch, scaling, &mut rng)?;
        let env = Environment::new(Arc::new(scenario.clone()), fuel, config.reward, config.schedule())?;
        let worker = RolloutWorker::new(env, config.ppo.total_episodes)?;
        let opt = PpoOptimizer::new(&policy, &value, config.ppo.step_size);
        Ok(Trainer {
            config: config.clone(),
            worker,
            policy,
            value,
            opt,
            rng,
            updates: Vec::new(),
        })
    }

    pub fn finished(&self) -> bool {
        self.worker.exhausted()
    }

    pub fn episodes(&self) -> &[EpisodeSummary] {
        &self.worker.finished
    }

    pub fn policy(&self) -> &PolicyParams {
        &self.policy
    }

    /// Collects one rollout and updates on it. Returns `None` once all
    /// episodes have run.
    pub fn advance(&mut self) -> Result<Option<&UpdateStats>> {
        if self.finished() {
            return Ok(None);
        }
        let ppo = &self.config.ppo;
        if ppo.anneal_step_size {
            let left = 1.0 - self.worker.episodes_finished() as f64 / ppo.total_episodes as f64;
            self.opt.actor.config.step_size = ppo.step_size * left;
            self.opt.critic.config.step_size = ppo.step_size * left;
        }
        let buf = collect_rollout(&mut self.worker, &self.policy, &self.value, ppo.horizon, &mut self.rng)?;
        let stats = ppo_update(&mut self.policy, &mut self.value, &mut self.opt, &buf, &self.config.ppo, &mut self.rng)?;
        self.updates.push(stats);
        Ok(self.updates.last())
    }

    pub fn finish(self) -> (TrainReport, Checkpoint) {
        let rewards: Vec<f64> = self.worker.finished.iter().map(|e| e.reward).collect();
        let report = TrainReport {
            seed: self.config.seed,
            curriculum: self.config.ppo.curriculum,
            moving_average: moving_average(&rewards, self.config.moving_average_window),
            episodes: self.worker.finished,
            updates: self.updates,
        };
        (
            report,
            Checkpoint {
                policy: self.policy,
                value: self.value,
            },
        )
    }
}

/// Trains actor and critic on `scenario` for the configured number of
/// episodes.
pub fn train_crl(scenario: &Scenario, config: &TrainConfig, fuel: Arc<dyn FuelRateModel>) -> Result<(TrainReport, Checkpoint)> {
    let mut t = Trainer::new(scenario, config, fuel)?;
    while t.advance()?.is_some() {}
    Ok(t.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_warms_up() {
        assert_eq!(moving_average(&[2.0, 4.0, 6.0, 8.0], 2), vec![2.0, 3.0, 5.0, 7.0]);
        assert!(moving_average(&[], 5).is_empty());
    }

    #[test]
    fn config_defaults_and_round_trip() {
        let c = TrainConfig::from_toml("seed = 3\n[ppo]\nhorizon = 256\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.ppo.horizon, 256);
        assert_eq!(c.ppo.gamma, 0.99);
        assert_eq!(c.reward, RewardConfig::default());
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert!(TrainConfig::from_toml("[ppo]\ngamma = 1.5\n").is_err());
        assert!(TrainConfig::from_toml("[ppo]\nclip_epsilon = 0.0\n").is_err());
    }

    #[test]
    fn schedule_follows_episode_count() {
        let mut c = TrainConfig::default();
        c.ppo.total_episodes = 300;
        c.ppo.curriculum = false;
        let s = c.schedule();
        assert_eq!(s.total_episodes, 300);
        assert!(!s.enabled);
    }
}
