//! Scenario description and its TOML file format.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::current::{CurrentField, MonthCurrents};
use crate::action::ActionBounds;
use crate::diffusion::{read_trajectories, Trajectory};
use crate::error::{read_file, write_file, Error, Result};
use crate::fuel::SHIP_TYPES;
use crate::geo::{dead_reckon, great_circle_distance, GeoPoint, Region, NM_PER_DEGREE};
use crate::nn::InputScaling;
use crate::safety::{SafetyConfig, VesselDims};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfParticulars {
    pub loa: f64,
    pub beam: f64,
    pub gt: f64,
    pub ship_type: u32,
}

impl Default for SelfParticulars {
    fn default() -> Self {
        SelfParticulars {
            loa: 200.0,
            beam: 32.0,
            gt: 40_000.0,
            ship_type: 3,
        }
    }
}

impl SelfParticulars {
    pub fn dims(&self) -> VesselDims {
        VesselDims {
            loa: self.loa,
            beam: self.beam,
        }
    }
}

/// A traffic vessel replaying a trajectory from `start_offset` hours after
/// the scenario start.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficVessel {
    pub trajectory: Trajectory,
    pub start_offset: f64,
    pub dims: VesselDims,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub start: GeoPoint,
    pub destination: GeoPoint,
    pub start_time: DateTime<Utc>,
    pub deadline: DateTime<Utc>,
    /// Hours per step.
    pub timestep: f64,
    pub window_nm: f64,
    pub raster_cells: usize,
    /// Leaving this box ends the episode.
    pub region: Region,
    pub traffic: Vec<TrafficVessel>,
    pub currents: CurrentField,
    pub own: SelfParticulars,
    pub bounds: ActionBounds,
    pub safety: SafetyConfig,
    /// Fuel model file; `None` uses the built-in surrogate.
    pub fuel_model: Option<PathBuf>,
}

/// Penalty added to the step reward when the vessel leaves the region.
pub const OUT_OF_REGION_PENALTY: f64 = -30.0;

impl Scenario {
    /// Hours from start to deadline.
    pub fn duration_hours(&self) -> f64 {
        (self.deadline - self.start_time).num_milliseconds() as f64 / 3_600_000.0
    }

    /// Upper bound on steps per episode.
    pub fn max_steps(&self) -> usize {
        (self.duration_hours() / self.timestep - 1e-9).ceil().max(0.0) as usize
    }

    pub fn time_at(&self, hours: f64) -> DateTime<Utc> {
        self.start_time + Duration::milliseconds((hours * 3_600_000.0).round() as i64)
    }

    /// Calendar months touched between start and deadline.
    pub fn months(&self) -> Vec<u32> {
        let mut out = Vec::new();
        let (mut y, mut m) = (self.start_time.year(), self.start_time.month());
        loop {
            out.push(m);
            if (y, m) >= (self.deadline.year(), self.deadline.month()) || out.len() >= 12 {
                break;
            }
            (y, m) = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.deadline <= self.start_time {
            return Err(Error::Scenario(format!(
                "deadline {} must be after start_time {}",
                self.deadline, self.start_time
            )));
        }
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return Err(Error::Scenario(format!("timestep {} must be positive", self.timestep)));
        }
        if !(self.window_nm > 0.0) || self.raster_cells == 0 {
            return Err(Error::Scenario("window_nm and raster_cells must be positive".into()));
        }
        if great_circle_distance(self.start, self.destination) == 0.0 {
            return Err(Error::Scenario("start and destination coincide".into()));
        }
        self.region.validate().map_err(|e| Error::Scenario(format!("region: {e}")))?;
        if !self.region.contains(self.start) || !self.region.contains(self.destination) {
            return Err(Error::Scenario("region must contain start and destination".into()));
        }
        let p = &self.own;
        if !(p.loa >= 0.0 && p.beam >= 0.0 && p.gt > 0.0) {
            return Err(Error::Scenario(format!("self particulars invalid: {p:?}")));
        }
        if p.ship_type as usize >= SHIP_TYPES {
            return Err(Error::UnknownShipType(p.ship_type, SHIP_TYPES));
        }
        self.bounds.validate().map_err(|e| Error::Scenario(format!("bounds: {e}")))?;
        if !(self.safety.tau >= 0.0 && self.safety.t_max > 0.0) {
            return Err(Error::Scenario(format!("safety config invalid: {:?}", self.safety)));
        }
        self.currents.validate(&self.region)?;
        for m in self.months() {
            if !self.currents.has_month(m) {
                return Err(Error::MissingCurrentMonth(m));
            }
        }
        for (i, t) in self.traffic.iter().enumerate() {
            t.trajectory.validate().map_err(|e| Error::Scenario(format!("traffic {i}: {e}")))?;
        }
        Ok(())
    }

    /// Affine scaling of the self observation: positions become offsets from
    /// the destination in units of half the route length, so the goal sits
    /// at the origin and the start about two units away.
    pub fn input_scaling(&self) -> InputScaling {
        let d = self.destination;
        let unit_nm = 0.5 * great_circle_distance(self.start, d);
        let lat_s = NM_PER_DEGREE / unit_nm;
        let lon_s = lat_s * d.lat.to_radians().cos().max(1e-6);
        let b = &self.bounds;
        let v_c = 0.5 * (b.min_speed + b.max_speed);
        let v_s = 2.0 / (b.max_speed - b.min_speed);
        InputScaling {
            offset: vec![d.lat, d.lon, d.lat, d.lon, 0.0, 0.0, 0.0, 0.0, v_c],
            scale: vec![lat_s, lon_s, lat_s, lon_s, 1.0, 1.0, 1.0, 1.0, v_s],
        }
    }

    /// The small benchmark task: 20 nm from start to goal, no traffic, a
    /// constant 1 kn current, half-hour steps and a 4-hour deadline.
    pub fn toy() -> Self {
        let start = GeoPoint::new(5.0, 70.0).expect("valid");
        let destination = dead_reckon(start, 60.0, 20.0, 1.0);
        let start_time = Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).single().expect("valid");
        Scenario {
            name: "toy".into(),
            start,
            destination,
            start_time,
            deadline: start_time + Duration::hours(4),
            timestep: 0.5,
            window_nm: 10.0,
            raster_cells: 64,
            region: Region {
                lat_min: 4.75,
                lat_max: 5.45,
                lon_min: 69.75,
                lon_max: 70.55,
            },
            traffic: Vec::new(),
            currents: CurrentField::uniform(150.0, 1.0),
            own: SelfParticulars::default(),
            bounds: ActionBounds::default(),
            safety: SafetyConfig::default(),
            fuel_model: None,
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        file.into_scenario(base_dir)
    }

    /// Traffic is written inline.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&ScenarioFile::from_scenario(self)).expect("scenario serialises")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_toml())
    }
}

/// Reads and validates a scenario file. Relative paths inside it resolve
/// against the file's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let base = path.parent().unwrap_or(Path::new("."));
    Scenario::from_toml(&read_file(path)?, base).map_err(|e| match e {
        Error::Scenario(m) => Error::Scenario(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Position {
    lat: f64,
    lon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct UniformCurrent {
    direction: f64,
    speed: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurrentsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    uniform: Option<UniformCurrent>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    months: BTreeMap<String, MonthCurrents>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficSpec {
    #[serde(default)]
    start_offset: f64,
    #[serde(default = "default_traffic_loa")]
    loa: f64,
    #[serde(default = "default_traffic_beam")]
    beam: f64,
    #[serde(default = "default_timestep")]
    timestep: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<usize>,
}

fn default_traffic_loa() -> f64 {
    150.0
}

fn default_traffic_beam() -> f64 {
    25.0
}

fn default_timestep() -> f64 {
    0.5
}

fn default_window() -> f64 {
    10.0
}

fn default_cells() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: u32,
    #[serde(default)]
    name: String,
    start: Position,
    destination: Position,
    start_time: DateTime<Utc>,
    deadline: DateTime<Utc>,
    #[serde(default = "default_timestep")]
    timestep: f64,
    #[serde(default = "default_window")]
    window_nm: f64,
    #[serde(default = "default_cells")]
    raster_cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    region: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fuel_model: Option<PathBuf>,
    #[serde(default, rename = "self")]
    own: SelfParticulars,
    #[serde(default)]
    bounds: ActionBounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    safety: Option<SafetyConfig>,
    currents: CurrentsSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    traffic: Vec<TrafficSpec>,
}

/// Default region padding around start and destination, degrees.
const REGION_PADDING_DEG: f64 = 0.5;

impl ScenarioFile {
    fn into_scenario(self, base: &Path) -> Result<Scenario> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::Scenario(format!(
                "unsupported version {} (expected {SCENARIO_VERSION})",
                self.version
            )));
        }
        let point = |p: Position, field: &str| {
            GeoPoint::new(p.lat, p.lon).map_err(|e| Error::Scenario(format!("{field}: {e}")))
        };
        let start = point(self.start, "start")?;
        let destination = point(self.destination, "destination")?;
        let region = self.region.unwrap_or(Region {
            lat_min: (start.lat.min(destination.lat) - REGION_PADDING_DEG).max(-90.0),
            lat_max: (start.lat.max(destination.lat) + REGION_PADDING_DEG).min(90.0),
            lon_min: (start.lon.min(destination.lon) - REGION_PADDING_DEG).max(-180.0),
            lon_max: (start.lon.max(destination.lon) + REGION_PADDING_DEG).min(180.0),
        });

        let mut currents = match &self.currents.uniform {
            Some(u) => CurrentField::uniform(u.direction, u.speed),
            None => CurrentField::default(),
        };
        for (key, table) in self.currents.months {
            let m: u32 = key
                .parse()
                .map_err(|_| Error::Scenario(format!("currents.months key `{key}` is not a month number")))?;
            currents.months.insert(m, table);
        }

        let mut traffic = Vec::new();
        for (i, t) in self.traffic.into_iter().enumerate() {
            let trajectory = match (t.points, t.file) {
                (Some(points), None) => Trajectory::new(points, t.timestep)
                    .map_err(|e| Error::Scenario(format!("traffic {i}: {e}")))?,
                (None, Some(file)) => {
                    let path = if file.is_absolute() { file } else { base.join(file) };
                    let all = read_trajectories(&path, t.timestep)?;
                    let id = t.id.unwrap_or(0);
                    all.into_iter().nth(id).ok_or_else(|| {
                        Error::Scenario(format!("traffic {i}: {} has no trajectory {id}", path.display()))
                    })?
                }
                _ => {
                    return Err(Error::Scenario(format!(
                        "traffic {i}: give exactly one of `points` or `file`"
                    )))
                }
            };
            traffic.push(TrafficVessel {
                trajectory,
                start_offset: t.start_offset,
                dims: VesselDims {
                    loa: t.loa,
                    beam: t.beam,
                },
            });
        }

        let fuel_model = self
            .fuel_model
            .map(|p| if p.is_absolute() { p } else { base.join(p) });
        let scenario = Scenario {
            name: self.name,
            start,
            destination,
            start_time: self.start_time,
            deadline: self.deadline,
            timestep: self.timestep,
            window_nm: self.window_nm,
            raster_cells: self.raster_cells,
            region,
            traffic,
            currents,
            own: self.own,
            bounds: self.bounds,
            safety: self.safety.unwrap_or_default(),
            fuel_model,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn from_scenario(s: &Scenario) -> Self {
        ScenarioFile {
            version: SCENARIO_VERSION,
            name: s.name.clone(),
            start: Position {
                lat: s.start.lat,
                lon: s.start.lon,
            },
            destination: Position {
                lat: s.destination.lat,
                lon: s.destination.lon,
            },
            start_time: s.start_time,
            deadline: s.deadline,
            timestep: s.timestep,
            window_nm: s.window_nm,
            raster_cells: s.raster_cells,
            region: Some(s.region),
            fuel_model: s.fuel_model.clone(),
            own: s.own,
            bounds: s.bounds,
            safety: Some(s.safety),
            currents: CurrentsSpec {
                uniform: None,
                months: s
                    .currents
                    .months
                    .iter()
                    .map(|(m, t)| (m.to_string(), t.clone()))
                    .collect(),
            },
            traffic: s
                .traffic
                .iter()
                .map(|t| TrafficSpec {
                    start_offset: t.start_offset,
                    loa: t.dims.loa,
                    beam: t.dims.beam,
                    timestep: t.trajectory.timestep,
                    points: Some(t.trajectory.points.clone()),
                    file: None,
                    id: None,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
start = { lat = 5.0, lon = 70.0 }
destination = { lat = 5.2, lon = 70.2 }
start_time = "2024-03-01T00:00:00Z"
deadline = "2024-03-01T06:00:00Z"

[currents.uniform]
direction = 90.0
speed = 1.0
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = Scenario::from_toml(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(s.timestep, 0.5);
        assert_eq!(s.window_nm, 10.0);
        assert_eq!(s.raster_cells, 64);
        assert_eq!(s.bounds, ActionBounds::default());
        assert_eq!(s.safety, SafetyConfig::default());
        assert_eq!(s.own, SelfParticulars::default());
        assert!(s.region.contains(s.start) && s.region.contains(s.destination));
        assert_eq!(s.max_steps(), 12);
    }

    #[test]
    fn deadline_must_follow_start() {
        let text = MINIMAL.replace("2024-03-01T06:00:00Z", "2024-03-01T00:00:00Z");
        let err = Scenario::from_toml(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("deadline"), "{err}");
    }

    #[test]
    fn missing_month_is_named() {
        let text = MINIMAL.replace(
            "[currents.uniform]\ndirection = 90.0\nspeed = 1.0",
            "[currents.months.4]\ndirection = 90.0\nspeed = 1.0",
        );
        let err = Scenario::from_toml(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::MissingCurrentMonth(3)));
        assert!(err.to_string().contains("month 3"));
    }

    #[test]
    fn months_spanned() {
        let mut s = Scenario::toy();
        assert_eq!(s.months(), vec![3]);
        s.start_time = Utc.with_ymd_and_hms(2024, 12, 31, 20, 0, 0).unwrap();
        s.deadline = Utc.with_ymd_and_hms(2025, 1, 1, 4, 0, 0).unwrap();
        assert_eq!(s.months(), vec![1, 12]);
    }

    #[test]
    fn toy_round_trips_through_toml() {
        let mut toy = Scenario::toy();
        toy.traffic.push(TrafficVessel {
            trajectory: Trajectory::new(vec![[5.1, 70.1, 10.0], [5.1, 70.2, 10.0]], 0.5).unwrap(),
            start_offset: 0.5,
            dims: VesselDims { loa: 100.0, beam: 18.0 },
        });
        toy.validate().unwrap();
        assert!((great_circle_distance(toy.start, toy.destination) - 20.0).abs() < 1e-9);
        let back = Scenario::from_toml(&toy.to_toml(), Path::new(".")).unwrap();
        assert_eq!(back, toy);
    }

    #[test]
    fn traffic_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let trajs = vec![
            Trajectory::new(vec![[5.0, 70.0, 8.0], [5.01, 70.0, 8.0]], 0.5).unwrap(),
            Trajectory::new(vec![[5.1, 70.1, 9.0], [5.1, 70.11, 9.0]], 0.5).unwrap(),
        ];
        crate::diffusion::write_trajectories(&trajs, &dir.path().join("traffic.csv")).unwrap();
        let text = format!("{MINIMAL}\n[[traffic]]\nfile = \"traffic.csv\"\nid = 1\n");
        std::fs::write(dir.path().join("s.toml"), text).unwrap();
        let s = load_scenario(&dir.path().join("s.toml")).unwrap();
        assert_eq!(s.traffic[0].trajectory, trajs[1]);
    }
}
