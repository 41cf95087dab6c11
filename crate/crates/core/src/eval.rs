//! Policy evaluation, per-episode metrics and trace export.

use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::action::Action;
use crate::env::{DoneReason, Environment, Observation, Scenario};
use crate::error::{write_file, Error, Result};
use crate::fuel::FuelRateModel;
use crate::nn::{deterministic_action, forward_actor, sample_action, Checkpoint, PolicyParams, Tensor};
use crate::reward::{CurriculumSchedule, RewardBreakdown, RewardConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Accumulated reward.
    pub ar: f64,
    /// Accumulated fuel, mt.
    pub afc: f64,
    /// Accumulated safety score; higher is riskier.
    pub ass: f64,
    pub reached: bool,
    pub steps: usize,
}

/// Vessel state after a step. The first record of a trace is the start
/// state and carries no reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    pub heading: f64,
    pub stw: f64,
    pub sog: f64,
    pub cog: f64,
    pub reward: Option<RewardBreakdown>,
    /// Reward including any out-of-region penalty.
    pub total: f64,
    pub fcr: f64,
    pub distance_to_goal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub metrics: EpisodeMetrics,
    pub trace: Vec<TraceRecord>,
    pub reason: Option<DoneReason>,
}

/// Runs one episode with goal radius `omega`, choosing actions with `act`.
pub fn run_episode(
    env: &mut Environment,
    omega: f64,
    mut act: impl FnMut(&Observation) -> Result<Action>,
) -> Result<EpisodeResult> {
    let mut obs = env.reset_with_threshold(omega)?;
    let st = env.state().expect("reset").clone();
    let dt = env.scenario().timestep;
    let mut trace = vec![TraceRecord {
        time: env.scenario().start_time,
        lat: st.own.position.lat,
        lon: st.own.position.lon,
        heading: st.own.heading,
        stw: 0.0,
        sog: 0.0,
        cog: st.own.cog,
        reward: None,
        total: 0.0,
        fcr: 0.0,
        distance_to_goal: st.d_cur,
    }];
    let mut m = EpisodeMetrics {
        ar: 0.0,
        afc: 0.0,
        ass: 0.0,
        reached: false,
        steps: 0,
    };
    loop {
        let out = env.step(act(&obs)?)?;
        m.ar += out.total;
        m.afc += out.fcr * dt;
        m.ass += out.reward.s;
        m.steps += 1;
        let k = &out.kinematics;
        trace.push(TraceRecord {
            time: out.time,
            lat: k.position.lat,
            lon: k.position.lon,
            heading: k.heading,
            stw: k.stw,
            sog: k.sog,
            cog: k.cog,
            reward: Some(out.reward),
            total: out.total,
            fcr: out.fcr,
            distance_to_goal: out.d_cur,
        });
        if out.done {
            m.reached = out.reason == Some(DoneReason::Reached);
            return Ok(EpisodeResult {
                metrics: m,
                trace,
                reason: out.reason,
            });
        }
        obs = out.observation;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub episodes: usize,
    /// Act with the squashed mean instead of sampling.
    pub deterministic: bool,
    pub seed: u64,
    pub reward: RewardConfig,
    /// Goal radius used for every episode, nm.
    pub omega: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            episodes: 50,
            deterministic: true,
            seed: 0,
            reward: RewardConfig::default(),
            omega: CurriculumSchedule::default().omega_f,
        }
    }
}

/// Evaluates an actor on `scenario` at the final goal radius.
pub fn evaluate_policy(
    policy: &PolicyParams,
    scenario: &Scenario,
    fuel: Arc<dyn FuelRateModel>,
    settings: &EvalSettings,
) -> Result<Vec<EpisodeResult>> {
    let arch = &policy.arch;
    if arch.raster_size != scenario.raster_cells {
        return Err(Error::CheckpointMismatch(format!(
            "policy expects {}-cell rasters, scenario produces {}",
            arch.raster_size, scenario.raster_cells
        )));
    }
    let mut env = Environment::new(
        Arc::new(scenario.clone()),
        fuel,
        settings.reward,
        CurriculumSchedule::default(),
    )?;
    let bounds = scenario.bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let shape = [arch.raster_size, arch.raster_size, arch.raster_channels];
    (0..settings.episodes)
        .map(|_| {
            run_episode(&mut env, settings.omega, |obs| {
                let raster = Tensor::new(shape.to_vec(), obs.raster.to_dense().data)?;
                let (mu, sigma) = forward_actor(policy, &obs.self_obs.0, &raster)?;
                Ok(if settings.deterministic {
                    deterministic_action(&mu, &bounds)
                } else {
                    sample_action(&mu, &sigma, &bounds, &mut rng).action
                })
            })
        })
        .collect()
}

/// [`evaluate_policy`] on a checkpoint's actor.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    scenario: &Scenario,
    fuel: Arc<dyn FuelRateModel>,
    settings: &EvalSettings,
) -> Result<Vec<EpisodeResult>> {
    evaluate_policy(&checkpoint.policy, scenario, fuel, settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> MeanStd {
    let n = xs.clone().count();
    if n == 0 {
        return MeanStd { mean: f64::NAN, std: f64::NAN };
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    MeanStd { mean, std: var.sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub ar: MeanStd,
    pub afc: MeanStd,
    pub ass: MeanStd,
    pub steps: MeanStd,
    pub reach_rate: f64,
}

pub fn summarize(metrics: &[EpisodeMetrics]) -> MetricsSummary {
    let it = metrics.iter();
    MetricsSummary {
        episodes: metrics.len(),
        ar: mean_std(it.clone().map(|m| m.ar)),
        afc: mean_std(it.clone().map(|m| m.afc)),
        ass: mean_std(it.clone().map(|m| m.ass)),
        steps: mean_std(it.clone().map(|m| m.steps as f64)),
        reach_rate: if metrics.is_empty() {
            0.0
        } else {
            metrics.iter().filter(|m| m.reached).count() as f64 / metrics.len() as f64
        },
    }
}

/// One row per episode followed by `mean` and `std` rows.
pub fn metrics_csv(metrics: &[EpisodeMetrics]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["episode", "ar", "afc", "ass", "reached", "steps"]).expect("in-memory write");
    for (i, m) in metrics.iter().enumerate() {
        w.write_record([
            i.to_string(),
            m.ar.to_string(),
            m.afc.to_string(),
            m.ass.to_string(),
            (m.reached as u8).to_string(),
            m.steps.to_string(),
        ])
        .expect("in-memory write");
    }
    if !metrics.is_empty() {
        let s = summarize(metrics);
        for (label, pick) in [("mean", (|x: MeanStd| x.mean) as fn(MeanStd) -> f64), ("std", |x: MeanStd| x.std)] {
            let reach = if label == "mean" { s.reach_rate.to_string() } else { String::new() };
            w.write_record([
                label.to_string(),
                pick(s.ar).to_string(),
                pick(s.afc).to_string(),
                pick(s.ass).to_string(),
                reach,
                pick(s.steps).to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn save_metrics(metrics: &[EpisodeMetrics], path: &Path) -> Result<()> {
    write_file(path, &metrics_csv(metrics))
}

/// A FeatureCollection with the track as a LineString (`[lon, lat]` pairs,
/// per-step properties under `steps`) and start and end points.
pub fn trace_geojson(trace: &[TraceRecord]) -> Result<Value> {
    let (first, last) = match (trace.first(), trace.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyTrace),
    };
    let coords: Vec<[f64; 2]> = trace.iter().map(|r| [r.lon, r.lat]).collect();
    let steps: Vec<Value> = trace.iter().map(|r| serde_json::to_value(r).expect("serialises")).collect();
    let point = |r: &TraceRecord, role: &str| {
        json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": [r.lon, r.lat] },
            "properties": { "role": role, "time": r.time },
        })
    };
    Ok(json!({
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": coords },
                "properties": { "steps": steps },
            },
            point(first, "start"),
            point(last, "end"),
        ],
    }))
}

pub fn export_geojson(trace: &[TraceRecord], path: &Path) -> Result<()> {
    let v = trace_geojson(trace)?;
    write_file(path, &serde_json::to_string_pretty(&v).expect("serialises"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::default_fuel_model;
    use crate::geo::{dead_reckon, great_circle_distance};
    use crate::nn::{Architecture, InputScaling};
    use chrono::Duration;

    fn env(s: Scenario) -> Environment {
        Environment::new(Arc::new(s), default_fuel_model(), RewardConfig::default(), CurriculumSchedule::default()).unwrap()
    }

    #[test]
    fn scripted_metrics_are_sums() {
        let mut e = env(Scenario::toy());
        let actions = [Action { delta_heading: 10.0, stw: 12.0 }, Action { delta_heading: -5.0, stw: 8.0 }];
        let mut i = 0;
        let r = run_episode(&mut e, 0.5, |_| {
            let a = actions[i % 2];
            i += 1;
            Ok(a)
        })
        .unwrap();
        let steps = &r.trace[1..];
        assert_eq!(r.metrics.steps, steps.len());
        let ar: f64 = steps.iter().map(|t| t.total).sum();
        let afc: f64 = steps.iter().map(|t| t.fcr * 0.5).sum();
        let ass: f64 = steps.iter().map(|t| t.reward.unwrap().s).sum();
        assert!((r.metrics.ar - ar).abs() < 1e-9);
        assert!((r.metrics.afc - afc).abs() < 1e-9);
        assert_eq!(r.metrics.ass, ass);
        assert!(r.trace.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn immediate_terminal_episode() {
        let mut s = Scenario::toy();
        s.currents = crate::env::CurrentField::uniform(0.0, 0.0);
        s.timestep = 0.01;
        s.destination = dead_reckon(s.start, 45.0, 0.1, 1.0);
        s.deadline = s.start_time + Duration::hours(1);
        let policy = PolicyParams::init(
            &Architecture::default(),
            InputScaling::identity(9),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let res = evaluate_policy(&policy, &s, default_fuel_model(), &EvalSettings { episodes: 1, ..Default::default() }).unwrap();
        let m = res[0].metrics;
        assert_eq!(m.steps, 1);
        assert!(m.reached);
        let b = res[0].trace[1].reward.unwrap();
        assert!(m.ar > 29.0);
        assert!((m.ar - (30.0 + 1.5 * b.g - b.f - b.s)).abs() < 1e-12);
        assert!(great_circle_distance(s.start, s.destination) < 0.5);
    }

    #[test]
    fn zero_episodes() {
        let policy = PolicyParams::init(&Architecture::default(), InputScaling::identity(9), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let res = evaluate_policy(&policy, &Scenario::toy(), default_fuel_model(), &EvalSettings { episodes: 0, ..Default::default() }).unwrap();
        assert!(res.is_empty());
        assert_eq!(metrics_csv(&[]).lines().count(), 1);
    }

    #[test]
    fn mismatched_raster_is_rejected() {
        let mut s = Scenario::toy();
        s.raster_cells = 32;
        let policy = PolicyParams::init(&Architecture::default(), InputScaling::identity(9), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let err = evaluate_policy(&policy, &s, default_fuel_model(), &EvalSettings::default()).unwrap_err();
        assert!(matches!(err, Error::CheckpointMismatch(_)));
    }

    #[test]
    fn geojson_axis_order_and_errors() {
        assert!(matches!(trace_geojson(&[]), Err(Error::EmptyTrace)));
        let rec = |lat: f64, lon: f64, h: i64| TraceRecord {
            time: Scenario::toy().start_time + Duration::hours(h),
            lat,
            lon,
            heading: 0.0,
            stw: 0.0,
            sog: 0.0,
            cog: 0.0,
            reward: None,
            total: 0.0,
            fcr: 0.0,
            distance_to_goal: 0.0,
        };
        let v = trace_geojson(&[rec(5.0, 70.0, 0), rec(5.1, 70.2, 1)]).unwrap();
        let line = &v["features"][0]["geometry"];
        assert_eq!(line["type"], "LineString");
        assert_eq!(line["coordinates"], json!([[70.0, 5.0], [70.2, 5.1]]));
        assert_eq!(v["features"][2]["geometry"]["coordinates"], json!([70.2, 5.1]));
    }

    #[test]
    fn csv_has_summary_rows() {
        let m = [
            EpisodeMetrics { ar: 1.0, afc: 2.0, ass: 0.0, reached: true, steps: 3 },
            EpisodeMetrics { ar: 3.0, afc: 2.0, ass: 0.5, reached: false, steps: 5 },
        ];
        let text = metrics_csv(&m);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[3], "mean,2,2,0.25,0.5,4");
        assert_eq!(lines[4], "std,1,0,0.25,,1");
    }
}
