//! Diagonal Gaussian policy squashed through `tanh` into the action box.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::action::{Action, ActionBounds};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction {
    /// Pre-squash Gaussian draw.
    pub raw: Vec<f64>,
    pub action: Action,
    /// Log density of `action` in action units.
    pub log_prob: f64,
}

/// `log(1 - tanh(u)^2)`, stable for large `|u|`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    let x = -2.0 * u.abs();
    2.0 * (std::f64::consts::LN_2 - u.abs() - x.exp().ln_1p())
}

fn scale(squashed: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + (squashed + 1.0) * 0.5 * (hi - lo)
}

/// Maps a pre-squash vector into the action box.
pub fn squash(raw: &[f64], bounds: &ActionBounds) -> Action {
    let r = bounds.ranges();
    Action {
        delta_heading: scale(raw[0].tanh(), r[0]),
        stw: scale(raw[1].tanh(), r[1]),
    }
}

/// Log density of the unsquashed Gaussian at `raw`.
pub fn gaussian_log_prob(raw: &[f64], mu: &[f64], sigma: &[f64]) -> f64 {
    raw.iter()
        .zip(mu.iter().zip(sigma))
        .map(|(u, (m, s))| {
            let z = (u - m) / s;
            -0.5 * z * z - s.ln() - 0.5 * LN_2PI
        })
        .sum()
}

/// Log-Jacobian of the map from `raw` to action units.
pub fn squash_log_jacobian(raw: &[f64], bounds: &ActionBounds) -> f64 {
    raw.iter()
        .zip(bounds.ranges())
        .map(|(u, (lo, hi))| log_one_minus_tanh_sq(*u) + (0.5 * (hi - lo)).ln())
        .sum()
}

/// Log density of the squashed action produced from `raw`.
pub fn squashed_log_prob(raw: &[f64], mu: &[f64], sigma: &[f64], bounds: &ActionBounds) -> f64 {
    gaussian_log_prob(raw, mu, sigma) - squash_log_jacobian(raw, bounds)
}

/// Inverse of [`squash`] for actions strictly inside the box.
pub fn unsquash(a: &Action, bounds: &ActionBounds) -> Vec<f64> {
    [a.delta_heading, a.stw]
        .iter()
        .zip(bounds.ranges())
        .map(|(v, (lo, hi))| (2.0 * (v - lo) / (hi - lo) - 1.0).atanh())
        .collect()
}

/// Draws an action from `N(mu, diag sigma²)` and squashes it.
pub fn sample_action<R: Rng>(mu: &[f64], sigma: &[f64], bounds: &ActionBounds, rng: &mut R) -> SampledAction {
    let raw: Vec<f64> = mu
        .iter()
        .zip(sigma)
        .map(|(m, s)| {
            let z: f64 = StandardNormal.sample(rng);
            m + s * z
        })
        .collect();
    let log_prob = squashed_log_prob(&raw, mu, sigma, bounds);
    SampledAction {
        action: squash(&raw, bounds),
        raw,
        log_prob,
    }
}

/// The action taken when exploration is off.
pub fn deterministic_action(mu: &[f64], bounds: &ActionBounds) -> Action {
    squash(mu, bounds)
}

/// Entropy of the pre-squash Gaussian.
pub fn entropy(sigma: &[f64]) -> f64 {
    sigma.iter().map(|s| s.ln() + 0.5 * (LN_2PI + 1.0)).sum()
}
