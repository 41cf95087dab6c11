//! Central-difference verification of reverse-mode gradients.

use rand::seq::index::sample;
use rand::Rng;

use super::policy::ParamSet;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const STEP: f64 = 1e-6;

/// Magnitudes below this are compared absolutely rather than relatively,
/// since central differences carry roughly `eps·|loss|/h` of rounding noise.
pub const RELATIVE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords: usize,
}

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`, with `0` when they agree exactly.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic` (ordered like [`ParamSet::tensors`]) with central
/// differences of `loss` on `samples` distinct random coordinates, or on all
/// of them when there are fewer.
pub fn finite_diff_check<P, R>(
    params: &P,
    analytic: &[Tensor],
    loss: impl Fn(&P) -> Result<f64>,
    samples: usize,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    P: ParamSet + Clone,
    R: Rng,
{
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    if analytic.len() != sizes.len() || analytic.iter().zip(&sizes).any(|(g, n)| g.len() != *n) {
        return Err(Error::Shape("gradient list does not match parameters".into()));
    }
    let total: usize = sizes.iter().sum();
    let picks = sample(rng, total, samples.min(total)).into_vec();

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for flat in &picks {
        let (mut t, mut i) = (0, *flat);
        while i >= sizes[t] {
            i -= sizes[t];
            t += 1;
        }
        let original = params.tensors()[t].data()[i];
        probe.tensors_mut()[t].data_mut()[i] = original + STEP;
        let up = loss(&probe)?;
        probe.tensors_mut()[t].data_mut()[i] = original - STEP;
        let down = loss(&probe)?;
        probe.tensors_mut()[t].data_mut()[i] = original;
        let numeric = (up - down) / (2.0 * STEP);
        worst = worst.max(relative_error(analytic[t].data()[i], numeric));
    }
    Ok(GradCheckReport {
        max_rel_error: worst,
        coords: picks.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_over_zero_is_zero() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(2.0, 2.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert!(relative_error(1e-9, 2e-9) < 1e-3);
    }
}
