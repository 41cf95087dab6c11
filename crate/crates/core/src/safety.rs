//! Collision-risk geometry: closest point of approach, dimension-aware safe
//! passing distance and the per-step risk score.

use serde::{Deserialize, Serialize};

use crate::geo::{local_offset, VesselKinematics, METRES_PER_NM};

/// Relative speeds below this (knots) are treated as no relative motion.
const MIN_RELATIVE_SPEED: f64 = 1e-9;

/// Floor of the safe passing distance, nm.
pub const MIN_SAFE_DISTANCE_NM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpaResult {
    /// Distance at closest approach, nm.
    pub dcpa: f64,
    /// Time to closest approach, hours. Negative when the vessels are
    /// already diverging.
    pub tcpa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyConfig {
    /// Buffer multiplier applied to the summed vessel dimensions.
    pub tau: f64,
    /// TCPA horizon beyond which a target carries no risk, hours.
    pub t_max: f64,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            tau: 4.0,
            t_max: 0.25,
        }
    }
}

/// Length overall and beam, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselDims {
    pub loa: f64,
    pub beam: f64,
}

/// A vessel together with its dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vessel {
    pub kinematics: VesselKinematics,
    pub dims: VesselDims,
}

/// Closest point of approach between two vessels holding course and speed,
/// computed in the planar frame centred on `own`.
pub fn cpa(own: &VesselKinematics, target: &VesselKinematics) -> CpaResult {
    let (px, py) = local_offset(own.position, target.position);
    let (oe, on) = own.ground_velocity();
    let (te, tn) = target.ground_velocity();
    let (vx, vy) = (te - oe, tn - on);
    let v2 = vx * vx + vy * vy;
    let tcpa = if v2.sqrt() < MIN_RELATIVE_SPEED {
        0.0
    } else {
        -(px * vx + py * vy) / v2
    };
    let dcpa = (px + vx * tcpa).hypot(py + vy * tcpa);
    CpaResult { dcpa, tcpa }
}

/// Minimum acceptable passing distance in nm for a pair of vessels.
pub fn safe_distance(own: VesselDims, target: VesselDims, tau: f64) -> f64 {
    let span = own.loa + own.beam + target.loa + target.beam;
    (tau * span / (2.0 * METRES_PER_NM)).max(MIN_SAFE_DISTANCE_NM)
}

/// Risk contribution of one target: product of the clipped distance and
/// time proximity factors.
pub fn pair_risk(own: &Vessel, target: &Vessel, config: &SafetyConfig) -> f64 {
    let c = cpa(&own.kinematics, &target.kinematics);
    let d_safe = safe_distance(own.dims, target.dims, config.tau);
    let distance_factor = (1.0 - c.dcpa / d_safe).clamp(0.0, 1.0);
    let time_factor = (1.0 - c.tcpa.abs() / config.t_max).clamp(0.0, 1.0);
    distance_factor * time_factor
}

/// Mean pairwise risk in `[0, 1]`; zero with no targets.
pub fn safety_score(own: &Vessel, targets: &[Vessel], config: &SafetyConfig) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let total: f64 = targets.iter().map(|t| pair_risk(own, t, config)).sum();
    total / targets.len() as f64
}
