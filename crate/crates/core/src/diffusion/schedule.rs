use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-step noise variances and their cumulative signal retention. Step `t`
/// (1-based) lives at index `t - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas_bar: Vec<f64>,
    /// Standard deviation of the noise injected by each reverse step.
    pub sigmas: Vec<f64>,
}

/// Linear ramp of `steps` variances from `beta_min` to `beta_max`.
pub fn build_schedule(steps: usize, beta_min: f64, beta_max: f64) -> Result<NoiseSchedule> {
    if steps == 0 || !(0.0 < beta_min && beta_min <= beta_max && beta_max < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "schedule needs 0 < beta_min <= beta_max < 1 and steps > 0, got {steps}, {beta_min}, {beta_max}"
        )));
    }
    let betas: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                beta_min
            } else {
                beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let mut alphas_bar = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for b in &betas {
        acc *= 1.0 - b;
        alphas_bar.push(acc);
    }
    let sigmas = betas.iter().map(|b| b.sqrt()).collect();
    Ok(NoiseSchedule {
        betas,
        alphas_bar,
        sigmas,
    })
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// The same schedule with no noise injected while sampling.
    pub fn without_sampling_noise(mut self) -> Self {
        self.sigmas.iter_mut().for_each(|s| *s = 0.0);
        self
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::InvalidArgument(format!("step {t} outside 1..={}", self.steps())));
        }
        Ok(())
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alphas_bar[t - 1]
    }

    /// Signal retained before step `t`; 1 before the first step.
    pub fn alpha_bar_prev(&self, t: usize) -> f64 {
        if t <= 1 {
            1.0
        } else {
            self.alphas_bar[t - 2]
        }
    }
}

/// Noised sample at step `t`: `sqrt(ab)·x0 + sqrt(1 - ab)·eps`.
pub fn forward_sample(x0: &[f64], t: usize, eps: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    sched.check_step(t)?;
    if x0.len() != eps.len() {
        return Err(Error::LengthMismatch(x0.len(), eps.len()));
    }
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

/// Mean of one reverse step given a noise estimate:
/// `(x_t - beta/sqrt(1 - ab)·eps) / sqrt(1 - beta)`.
pub fn reverse_mean(x_t: &[f64], t: usize, eps: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    sched.check_step(t)?;
    if x_t.len() != eps.len() {
        return Err(Error::LengthMismatch(x_t.len(), eps.len()));
    }
    let beta = sched.betas[t - 1];
    let coef = beta / (1.0 - sched.alpha_bar(t)).sqrt();
    let inv = 1.0 / (1.0 - beta).sqrt();
    Ok(x_t.iter().zip(eps).map(|(x, e)| inv * (x - coef * e)).collect())
}
