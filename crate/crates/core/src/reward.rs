//! Multi-objective step reward and the curriculum goal-radius schedule.
//!
//! The step reward trades off progress toward the destination (`g`), fuel
//! burn normalised by gross tonnage (`f`) and collision risk (`s`), with
//! case-dependent bonuses and penalties. The curriculum shrinks the radius
//! inside which the destination counts as reached from `omega_0` to
//! `omega_f` over the configured number of training episodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    /// Goal radius at episode 0, nm.
    pub omega_0: f64,
    /// Final goal radius, nm.
    pub omega_f: f64,
    /// Number of episodes over which the radius shrinks.
    pub total_episodes: usize,
    pub enabled: bool,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        CurriculumSchedule {
            omega_0: 5.0,
            omega_f: 0.5,
            total_episodes: 1000,
            enabled: true,
        }
    }
}

impl CurriculumSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_0 > 0.0 && self.omega_f > 0.0) || self.total_episodes == 0 {
            return Err(Error::InvalidArgument(format!(
                "curriculum needs omega_0 > 0, omega_f > 0, total_episodes >= 1 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// The same schedule with the curriculum switched off.
    pub fn disabled(self) -> Self {
        CurriculumSchedule {
            enabled: false,
            ..self
        }
    }
}

/// Goal radius for episode `e`, nm.
pub fn goal_threshold(e: usize, sched: &CurriculumSchedule) -> f64 {
    if !sched.enabled {
        return sched.omega_f;
    }
    let progress = e as f64 / sched.total_episodes as f64;
    sched.omega_0 * (1.0 - progress).max(0.0) + sched.omega_f * progress.min(1.0)
}

/// Progress toward the destination over one step, nm.
pub fn goal_reward(d_pre: f64, d_cur: f64) -> f64 {
    d_pre - d_cur
}

/// Fuel term: `alpha * fcr / gt`.
pub fn fuel_penalty(fcr: f64, gt: f64, alpha: f64) -> Result<f64> {
    if !(gt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gross tonnage must be positive, got {gt}"
        )));
    }
    Ok(alpha * fcr / gt)
}

/// Weights and constants of the step reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub goal_weight: f64,
    pub terminal_bonus: f64,
    pub moved_away_penalty: f64,
    pub late_coefficient: f64,
    /// Fuel weight `alpha`.
    pub alpha: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            goal_weight: 1.5,
            terminal_bonus: 30.0,
            moved_away_penalty: 1.0,
            late_coefficient: 0.1,
            alpha: 500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardCase {
    Terminal,
    MovedAway,
    Late,
    Default,
}

impl RewardCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardCase::Terminal => "terminal",
            RewardCase::MovedAway => "moved_away",
            RewardCase::Late => "late",
            RewardCase::Default => "default",
        }
    }
}

/// Inputs of one step reward evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardContext {
    pub d_pre: f64,
    pub d_cur: f64,
    pub omega: f64,
    pub is_late: bool,
    pub fcr: f64,
    pub gt: f64,
    pub s_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub total: f64,
    pub g: f64,
    pub f: f64,
    pub s: f64,
    pub case: RewardCase,
    pub alpha: f64,
    /// `d_cur`, kept so the late penalty can be recomputed.
    pub d_cur: f64,
}

impl RewardBreakdown {
    /// Recomputes the total from the stored components.
    pub fn recompute(&self, cfg: &RewardConfig) -> f64 {
        combine(self.case, self.g, self.f, self.s, self.d_cur, cfg)
    }
}

fn combine(case: RewardCase, g: f64, f: f64, s: f64, d_cur: f64, cfg: &RewardConfig) -> f64 {
    let w = cfg.goal_weight;
    match case {
        RewardCase::Terminal => cfg.terminal_bonus + w * g - f - s,
        RewardCase::MovedAway => w * g - f - s - cfg.moved_away_penalty,
        RewardCase::Late => w * g - f - s - cfg.late_coefficient * d_cur,
        RewardCase::Default => w * g - f - s,
    }
}

/// Picks the reward case with precedence terminal > moved away > late.
pub fn select_case(d_pre: f64, d_cur: f64, omega: f64, is_late: bool) -> RewardCase {
    if d_cur < omega {
        RewardCase::Terminal
    } else if d_cur > d_pre {
        RewardCase::MovedAway
    } else if is_late {
        RewardCase::Late
    } else {
        RewardCase::Default
    }
}

pub fn step_reward(ctx: &RewardContext, cfg: &RewardConfig) -> Result<RewardBreakdown> {
    let g = goal_reward(ctx.d_pre, ctx.d_cur);
    let f = fuel_penalty(ctx.fcr, ctx.gt, cfg.alpha)?;
    let case = select_case(ctx.d_pre, ctx.d_cur, ctx.omega, ctx.is_late);
    Ok(RewardBreakdown {
        total: combine(case, g, f, ctx.s_t, ctx.d_cur, cfg),
        g,
        f,
        s: ctx.s_t,
        case,
        alpha: cfg.alpha,
        d_cur: ctx.d_cur,
    })
}
