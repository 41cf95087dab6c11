//! Episodic navigation environment: traffic playback, currents, observation
//! assembly and stepping.

mod current;
mod raster;
mod scenario;

use std::sync::{Arc, OnceLock};

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

pub use current::{current_at, CurrentField, CurrentGrid, MonthCurrents};
pub use raster::{cell_of, in_window, rasterize, RasterTensor, SparseRaster, CHANNELS, SOG_SCALE};
pub use scenario::{
    load_scenario, Scenario, SelfParticulars, TrafficVessel, OUT_OF_REGION_PENALTY,
    SCENARIO_VERSION,
};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::fuel::{
    encode_features, fit_ensemble, load_model, synthetic, BoostParams, FuelRateModel,
    OperationalRecord, TreeEnsemble,
};
use crate::geo::{
    compose_over_ground, dead_reckon, great_circle_distance, initial_bearing, normalize_degrees,
    CurrentVector, GeoPoint, VesselKinematics,
};
use crate::reward::{goal_threshold, step_reward, CurriculumSchedule, RewardBreakdown, RewardConfig, RewardContext};
use crate::safety::{safety_score, Vessel};

pub const SELF_OBS_DIM: usize = 9;

/// `[lat, lon, dest_lat, dest_lon, sin ψ, cos ψ, sin β, cos β, stw]` with ψ
/// the heading and β the current direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfObservation(pub [f64; SELF_OBS_DIM]);

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub self_obs: SelfObservation,
    pub raster: SparseRaster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    Reached,
    Deadline,
    OutOfRegion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    /// Zero unless the vessel left the region on this step.
    pub out_of_region_penalty: f64,
    /// Step reward plus the out-of-region penalty.
    pub total: f64,
    pub done: bool,
    pub reason: Option<DoneReason>,
    pub d_pre: f64,
    pub d_cur: f64,
    /// Fuel rate over the step, mt/hour.
    pub fcr: f64,
    pub applied: Action,
    pub kinematics: VesselKinematics,
    pub time: DateTime<Utc>,
}

/// Mutable state of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub own: VesselKinematics,
    pub current: CurrentVector,
    /// Hours since the scenario start.
    pub elapsed: f64,
    pub steps: usize,
    /// Goal radius for this episode, nm.
    pub omega: f64,
    /// STW commanded on the previous step; 0 before the first step.
    pub last_stw: f64,
    pub d_cur: f64,
    pub done: bool,
}

/// The built-in fuel surrogate: an ensemble fitted once per process on
/// synthetic records.
pub fn default_fuel_model() -> Arc<TreeEnsemble> {
    static MODEL: OnceLock<Arc<TreeEnsemble>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let params = BoostParams {
                n_trees: 60,
                max_depth: 4,
                learning_rate: 0.15,
                min_samples_leaf: 5,
            };
            let records = synthetic::generate_records(2000, 7);
            Arc::new(fit_ensemble(&records, &params).expect("synthetic records fit"))
        })
        .clone()
}

/// The scenario's fuel model file, or the built-in surrogate.
pub fn scenario_fuel_model(scenario: &Scenario) -> Result<Arc<dyn FuelRateModel>> {
    Ok(match &scenario.fuel_model {
        Some(path) => Arc::new(load_model(path)?),
        None => default_fuel_model(),
    })
}

pub struct Environment {
    scenario: Arc<Scenario>,
    fuel: Arc<dyn FuelRateModel>,
    reward: RewardConfig,
    curriculum: CurriculumSchedule,
    state: Option<SimState>,
}

impl Environment {
    pub fn new(
        scenario: Arc<Scenario>,
        fuel: Arc<dyn FuelRateModel>,
        reward: RewardConfig,
        curriculum: CurriculumSchedule,
    ) -> Result<Self> {
        scenario.validate()?;
        curriculum.validate()?;
        Ok(Environment {
            scenario,
            fuel,
            reward,
            curriculum,
            state: None,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> Option<&SimState> {
        self.state.as_ref()
    }

    /// Starts episode `e` with its curriculum goal radius.
    pub fn reset(&mut self, episode: usize) -> Result<Observation> {
        self.reset_with_threshold(goal_threshold(episode, &self.curriculum))
    }

    pub fn reset_with_threshold(&mut self, omega: f64) -> Result<Observation> {
        let s = &self.scenario;
        let heading = initial_bearing(s.start, s.destination)?;
        let current = current_at(&s.currents, s.start, s.start_time)?;
        self.state = Some(SimState {
            own: VesselKinematics {
                position: s.start,
                heading,
                stw: 0.0,
                sog: 0.0,
                cog: heading,
            },
            current,
            elapsed: 0.0,
            steps: 0,
            omega,
            last_stw: 0.0,
            d_cur: great_circle_distance(s.start, s.destination),
            done: false,
        });
        self.observe()
    }

    /// Traffic vessels present at `elapsed` hours, with their dimensions.
    pub fn traffic_at(&self, elapsed: f64) -> Vec<Vessel> {
        self.scenario
            .traffic
            .iter()
            .filter_map(|t| traffic_state(t, elapsed).map(|k| Vessel { kinematics: k, dims: t.dims }))
            .collect()
    }

    pub fn observe(&self) -> Result<Observation> {
        let st = self.state.as_ref().ok_or_else(|| Error::InvalidArgument("environment not reset".into()))?;
        let s = &self.scenario;
        let (beta_s, beta_c) = st.current.direction.to_radians().sin_cos();
        let (psi_s, psi_c) = st.own.heading.to_radians().sin_cos();
        let self_obs = SelfObservation([
            st.own.position.lat,
            st.own.position.lon,
            s.destination.lat,
            s.destination.lon,
            psi_s,
            psi_c,
            beta_s,
            beta_c,
            st.last_stw,
        ]);
        let traffic: Vec<VesselKinematics> = self.traffic_at(st.elapsed).iter().map(|v| v.kinematics).collect();
        let raster = rasterize(&traffic, &st.own, s.window_nm, s.raster_cells).to_sparse();
        Ok(Observation { self_obs, raster })
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        let scenario = Arc::clone(&self.scenario);
        let s = &*scenario;
        let st = self.state.as_ref().ok_or_else(|| Error::InvalidArgument("environment not reset".into()))?;
        if st.done {
            return Err(Error::EpisodeFinished);
        }
        let applied = s.bounds.clamp(action);
        let heading = normalize_degrees(st.own.heading + applied.delta_heading);
        let step_time = s.time_at(st.elapsed);
        let current = current_at(&s.currents, st.own.position, step_time)?;
        let (cog, sog) = compose_over_ground(heading, applied.stw, current);
        let position = dead_reckon(st.own.position, cog, sog, s.timestep);
        let own = VesselKinematics {
            position,
            heading,
            stw: applied.stw,
            sog,
            cog,
        };
        let steps = st.steps + 1;
        let elapsed = steps as f64 * s.timestep;
        let time = s.time_at(elapsed);

        let record = OperationalRecord {
            distance_travelled: sog * s.timestep,
            lat: position.lat,
            lon: position.lon,
            sog,
            loa: s.own.loa,
            beam: s.own.beam,
            gt: s.own.gt,
            ship_type: s.own.ship_type,
            month: step_time.month(),
            day: step_time.day(),
            hour: step_time.hour(),
            fcr_target: None,
        };
        let fcr = self.fuel.fuel_rate(&encode_features(&record)?).max(0.0);

        let targets: Vec<Vessel> = in_window(
            &self.traffic_at(elapsed),
            |v: &Vessel| &v.kinematics,
            &own,
            s.window_nm,
            s.raster_cells,
        )
        .copied()
        .collect();
        let s_t = safety_score(&Vessel { kinematics: own, dims: s.own.dims() }, &targets, &s.safety);

        let d_pre = st.d_cur;
        let d_cur = great_circle_distance(position, s.destination);
        let remaining = s.duration_hours() - elapsed;
        let is_late = d_cur / s.bounds.max_speed > remaining;
        let omega = st.omega;
        let reward = step_reward(
            &RewardContext {
                d_pre,
                d_cur,
                omega,
                is_late,
                fcr,
                gt: s.own.gt,
                s_t,
            },
            &self.reward,
        )?;

        let reason = if d_cur < omega {
            Some(DoneReason::Reached)
        } else if !s.region.contains(position) {
            Some(DoneReason::OutOfRegion)
        } else if steps >= s.max_steps() {
            Some(DoneReason::Deadline)
        } else {
            None
        };
        let out_of_region_penalty = if reason == Some(DoneReason::OutOfRegion) {
            OUT_OF_REGION_PENALTY
        } else {
            0.0
        };
        let next_current = match current_at(&s.currents, position, time) {
            Ok(c) => c,
            // Past the last covered month or off the grid after termination.
            Err(_) if reason.is_some() => current,
            Err(e) => return Err(e),
        };
        self.state = Some(SimState {
            own,
            current: next_current,
            elapsed,
            steps,
            omega,
            last_stw: applied.stw,
            d_cur,
            done: reason.is_some(),
        });
        Ok(StepOutcome {
            observation: self.observe()?,
            total: reward.total + out_of_region_penalty,
            reward,
            out_of_region_penalty,
            done: reason.is_some(),
            reason,
            d_pre,
            d_cur,
            fcr,
            applied,
            kinematics: own,
            time,
        })
    }
}

/// Position and motion of a replayed vessel, or `None` outside its time span.
fn traffic_state(t: &TrafficVessel, elapsed: f64) -> Option<VesselKinematics> {
    let local = elapsed - t.start_offset;
    let [lat, lon, sog] = t.trajectory.at(local)?;
    let pts = &t.trajectory.points;
    let seg = ((local / t.trajectory.timestep).floor() as usize).min(pts.len() - 2);
    let a = GeoPoint::new(pts[seg][0], pts[seg][1]).ok()?;
    let b = GeoPoint::new(pts[seg + 1][0], pts[seg + 1][1]).ok()?;
    let cog = initial_bearing(a, b).unwrap_or(0.0);
    Some(VesselKinematics::over_ground(GeoPoint::new(lat, lon).ok()?, cog, sog))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::Trajectory;
    use crate::reward::RewardCase;
    use crate::safety::VesselDims;
    use approx::assert_abs_diff_eq;

    fn env(s: Scenario) -> Environment {
        Environment::new(
            Arc::new(s),
            default_fuel_model(),
            RewardConfig::default(),
            CurriculumSchedule::default(),
        )
        .unwrap()
    }

    fn still_toy() -> Scenario {
        Scenario {
            currents: CurrentField::uniform(0.0, 0.0),
            ..Scenario::toy()
        }
    }

    #[test]
    fn reset_binds_curriculum_and_geometry() {
        let mut e = env(Scenario::toy());
        let a = e.reset(0).unwrap();
        let st = e.state().unwrap().clone();
        assert_eq!(st.omega, 5.0);
        assert_abs_diff_eq!(st.d_cur, 20.0, epsilon = 1e-9);
        assert_eq!(a.self_obs.0[8], 0.0);
        assert_eq!(e.reset(0).unwrap(), a);
        e.reset(1000).unwrap();
        assert_eq!(e.state().unwrap().omega, 0.5);
    }

    #[test]
    fn heading_update_and_clamp() {
        let mut e = env(still_toy());
        e.reset(0).unwrap();
        let h0 = e.state().unwrap().own.heading;
        let out = e.step(Action { delta_heading: 5.0, stw: 10.0 }).unwrap();
        assert_abs_diff_eq!(out.kinematics.heading, h0 + 5.0, epsilon = 1e-12);
        let out = e.step(Action { delta_heading: 40.0, stw: 99.0 }).unwrap();
        assert_eq!(out.applied, Action { delta_heading: 30.0, stw: 20.0 });
        assert_abs_diff_eq!(out.kinematics.heading, h0 + 35.0, epsilon = 1e-12);
        assert_eq!(out.observation.self_obs.0[8], 20.0);
        let (s, c) = (out.observation.self_obs.0[4], out.observation.self_obs.0[5]);
        assert_abs_diff_eq!(s * s + c * c, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn heading_90_encodes_as_unit_east() {
        let mut s = still_toy();
        s.destination = dead_reckon(s.start, 90.0, 20.0, 1.0);
        let mut e = env(s);
        e.reset(0).unwrap();
        let out = e.step(Action { delta_heading: 90.0 - e.state().unwrap().own.heading, stw: 10.0 }).unwrap();
        let o = out.observation.self_obs.0;
        assert_abs_diff_eq!(o[4], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(o[5], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn straight_run_reaches_when_inside_radius() {
        // 20 nm at 10 kn with half-hour steps: 15 nm left after one step,
        // then 10, 5, 0. With radius 5 the third step (d = 5) is not yet
        // inside; the fourth is.
        let mut e = env(still_toy());
        e.reset_with_threshold(5.0).unwrap();
        let mut reasons = Vec::new();
        loop {
            let out = e.step(Action { delta_heading: 0.0, stw: 10.0 }).unwrap();
            reasons.push((out.d_cur, out.reason));
            if out.done {
                break;
            }
        }
        assert_eq!(reasons.len(), 4);
        assert_abs_diff_eq!(reasons[2].0, 5.0, epsilon = 1e-6);
        assert_eq!(reasons[3].1, Some(DoneReason::Reached));
        assert!(reasons[..3].iter().all(|r| r.1.is_none()));
        assert!(matches!(e.step(Action { delta_heading: 0.0, stw: 10.0 }), Err(Error::EpisodeFinished)));
    }

    #[test]
    fn deadline_caps_episode_length() {
        let mut e = env(still_toy());
        e.reset_with_threshold(0.5).unwrap();
        let mut n = 0;
        let last;
        // Circling slowly never arrives.
        loop {
            let out = e.step(Action { delta_heading: 30.0, stw: 4.0 }).unwrap();
            n += 1;
            if out.done {
                last = out.reason;
                break;
            }
        }
        assert_eq!(n, e.scenario().max_steps());
        assert_eq!(n, 8);
        assert_eq!(last, Some(DoneReason::Deadline));
    }

    #[test]
    fn leaving_region_is_penalised() {
        let mut e = env(still_toy());
        e.reset_with_threshold(0.5).unwrap();
        let mut out = e.step(Action { delta_heading: 180.0, stw: 20.0 }).unwrap();
        while !out.done {
            out = e.step(Action { delta_heading: 0.0, stw: 20.0 }).unwrap();
        }
        assert_eq!(out.reason, Some(DoneReason::OutOfRegion));
        assert_eq!(out.out_of_region_penalty, OUT_OF_REGION_PENALTY);
        assert_abs_diff_eq!(out.total, out.reward.total - 30.0, epsilon = 1e-12);
    }

    #[test]
    fn late_case_when_deadline_unreachable() {
        let mut s = still_toy();
        s.deadline = s.start_time + chrono::Duration::minutes(30);
        let mut e = env(s);
        e.reset_with_threshold(0.5).unwrap();
        let out = e.step(Action { delta_heading: 0.0, stw: 10.0 }).unwrap();
        assert_eq!(out.reward.case, RewardCase::Late);
        assert_eq!(out.reason, Some(DoneReason::Deadline));
    }

    #[test]
    fn current_moves_the_vessel() {
        let mut s = Scenario::toy();
        s.currents = CurrentField::uniform(0.0, 2.0);
        let mut e = env(s);
        e.reset(0).unwrap();
        let start = e.state().unwrap().own.position;
        let out = e.step(Action { delta_heading: 0.0, stw: 4.0 }).unwrap();
        let moved = great_circle_distance(start, out.kinematics.position);
        assert!(out.kinematics.sog > 4.0 && (moved - out.kinematics.sog * 0.5).abs() < 1e-9);
        assert_abs_diff_eq!(out.observation.self_obs.0[7], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn traffic_is_rasterised_and_scored() {
        let mut s = still_toy();
        let here = s.start;
        let ahead = dead_reckon(here, 60.0, 14.0, 1.0);
        let beyond = here;
        // Head-on traffic approaching along the route.
        s.traffic.push(TrafficVessel {
            trajectory: Trajectory::new(
                vec![[ahead.lat, ahead.lon, 10.0], [beyond.lat, beyond.lon, 10.0]],
                1.4,
            )
            .unwrap(),
            start_offset: 0.0,
            dims: VesselDims { loa: 300.0, beam: 40.0 },
        });
        let mut e = env(s);
        let obs = e.reset(0).unwrap();
        assert!(obs.raster.is_empty(), "14 nm away is outside a 10 nm window");
        let out = e.step(Action { delta_heading: 0.0, stw: 10.0 }).unwrap();
        assert_eq!(out.observation.raster.cells.len(), 1);
        assert!(out.reward.s > 0.0);
        let cell = out.observation.raster.cells[0].1;
        assert_eq!(cell[0], 1.0);
        assert_abs_diff_eq!(cell[1], 10.0 / 30.0, epsilon = 1e-12);
    }

    #[test]
    fn default_fuel_model_tracks_the_law() {
        let m = default_fuel_model();
        let rec = OperationalRecord {
            distance_travelled: 6.0,
            lat: 5.0,
            lon: 70.0,
            sog: 12.0,
            loa: 200.0,
            beam: 32.0,
            gt: 40_000.0,
            ship_type: 3,
            month: 3,
            day: 1,
            hour: 0,
            fcr_target: None,
        };
        let pred = m.fuel_rate(&encode_features(&rec).unwrap());
        let law = synthetic::fuel_law(12.0, 40_000.0, 3, 3);
        assert!((pred - law).abs() < 0.25, "{pred} vs {law}");
    }
}
